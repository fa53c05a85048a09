//! Copy-number model against the continuum equation: halving `h` (with `n h`
//! fixed at the cutoff) halves the L1 error.
//!
//! cargo run --release --example discrete_limit

use plasmid_spectra::discrete::refinement_errors;
use plasmid_spectra::grid::Grid;
use plasmid_spectra::params::{ModelParameters, Phi};
use plasmid_spectra::pde::{simulate, PdeModel, PdeRunOptions, PdeState};

fn main() -> plasmid_spectra::Result<()> {
    let params = ModelParameters::constant_rates(0.4, 0.1, 1.0, 1.0, 0.04, Phi::symmetric_beta(2.0)?)?;
    let u0 = |z: f64| if z > 0.2 && z < 0.8 { 1e3 * ((z - 0.2) * (0.8 - z)).powi(2) } else { 0.0 };
    let t_end = 1.0;

    let grid = Grid::uniform(2000, 1.0)?;
    let model = PdeModel::new(&params, grid.clone())?;
    let reference = simulate(&model, PdeState::project(&grid, u0, 0.0), &PdeRunOptions { t_end, dt_max: 0.05, stride: 0 })?.last;

    let levels = [(2, 0.02), (4, 0.01), (8, 0.005)];
    let errors = refinement_errors(&params, &levels, &u0, 0.0, t_end, &grid, &reference)?;
    for (k, ((n, h), e)) in levels.iter().zip(&errors).enumerate() {
        let ratio = if k > 0 { format!("{:.3}", errors[k - 1] / e) } else { "-".into() };
        println!("n = {n:>2}  h = {h:<6} L1 error {e:.5e}  ratio {ratio}");
    }
    Ok(())
}
