//! Cell grids on `[0, z0]`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    edges: Vec<f64>,
    centers: Vec<f64>,
    widths: Vec<f64>,
}

impl Grid {
    pub fn from_edges(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::GridMismatch("a grid needs at least one cell".into()));
        }
        if let Some(w) = edges.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::GridMismatch(format!(
                "edges must be strictly increasing (found {} then {})",
                w[0], w[1]
            )));
        }
        let centers = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let widths = edges.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(Self { edges, centers, widths })
    }

    pub fn uniform(cells: usize, z0: f64) -> Result<Self> {
        let edges = (0..=cells).map(|k| z0 * k as f64 / cells as f64).collect();
        Self::from_edges(edges)
    }

    /// `cells` cells clustered at both ends by `s^2 / (s^2 + (1 - s)^2)`.
    /// When `cutoff` is given, the nearest interior edge is moved onto it.
    pub fn graded(cells: usize, z0: f64, cutoff: Option<f64>) -> Result<Self> {
        if cells < 2 {
            return Err(Error::GridMismatch(format!("graded grid needs at least 2 cells (got {cells})")));
        }
        let mut edges: Vec<f64> = (0..=cells)
            .map(|k| {
                let s = k as f64 / cells as f64;
                z0 * s * s / (s * s + (1.0 - s) * (1.0 - s))
            })
            .collect();
        edges[cells] = z0;
        if let Some(m) = cutoff {
            if !(m > 0.0 && m < z0) {
                return Err(Error::DomainError(format!("cutoff {m} outside (0, {z0})")));
            }
            let k = (1..cells)
                .min_by(|&a, &b| (edges[a] - m).abs().total_cmp(&(edges[b] - m).abs()))
                .expect("interior edge");
            edges[k] = m;
        }
        Self::from_edges(edges)
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn z0(&self) -> f64 {
        self.edges[self.edges.len() - 1]
    }

    /// Index of the cell containing `z` (clamped to the grid).
    pub fn locate(&self, z: f64) -> usize {
        let k = self.edges.partition_point(|&e| e <= z);
        k.clamp(1, self.len()) - 1
    }

    /// Integral over `[lo, hi]` of the piecewise constant function with cell values `u`.
    pub fn integrate_range(&self, u: &[f64], lo: f64, hi: f64) -> f64 {
        let lo = lo.max(self.edges[0]);
        let hi = hi.min(self.z0());
        if hi <= lo {
            return 0.0;
        }
        let (a, b) = (self.locate(lo), self.locate(hi));
        (a..=b)
            .map(|k| {
                let l = self.edges[k].max(lo);
                let r = self.edges[k + 1].min(hi);
                if r > l {
                    u[k] * (r - l)
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// `sum u_k dz_k`.
    pub fn mass(&self, u: &[f64]) -> f64 {
        u.iter().zip(&self.widths).map(|(a, w)| a * w).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_grid_contains_cutoff_and_is_symmetric_without_it() {
        let g = Grid::graded(64, 1.0, None).unwrap();
        let e = g.edges();
        for k in 0..=64 {
            assert!((e[k] + e[64 - k] - 1.0).abs() < 1e-14);
        }
        let g = Grid::graded(64, 1.0, Some(0.005)).unwrap();
        assert!(g.edges().contains(&0.005));
        assert_eq!(g.len(), 64);
        assert!(g.widths().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn range_integral_of_piecewise_constant() {
        let g = Grid::uniform(4, 1.0).unwrap();
        let u = [1.0, 2.0, 3.0, 4.0];
        assert!((g.integrate_range(&u, 0.0, 1.0) - 2.5).abs() < 1e-15);
        assert!((g.integrate_range(&u, 0.125, 0.375) - 0.375).abs() < 1e-15);
        assert_eq!(g.locate(0.25), 1);
        assert_eq!(g.locate(1.0), 3);
    }
}
