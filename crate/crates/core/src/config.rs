//! JSON run configuration, the `fig1` preset and model construction.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::eigen_fixedpoint::FixedPointConfig;
use crate::error::{Error, Result};
use crate::params::{ModelParameters, Phi, RateFunction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateSpec {
    Constant { value: f64 },
    /// `b0 z (z0 - z) / z0`
    Logistic { b0: f64 },
    /// `coeff z^exponent (z0 - z)`
    PowerLaw { coeff: f64, exponent: f64 },
    /// `intercept + slope z`
    Linear { intercept: f64, slope: f64 },
    /// Two-column CSV, path relative to the config file.
    Table { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    Uniform,
    Beta { shape: f64 },
    Bimodal { peak: f64, width: f64 },
    Table { path: PathBuf },
}

impl KernelSpec {
    /// File-name tag.
    pub fn tag(&self) -> String {
        match self {
            KernelSpec::Uniform => "uniform".into(),
            KernelSpec::Beta { shape } => format!("beta{shape}"),
            KernelSpec::Bimodal { .. } => "bimodal".into(),
            KernelSpec::Table { path } => {
                let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("table");
                format!("table-{stem}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub growth: RateSpec,
    pub beta: RateSpec,
    pub mu: RateSpec,
    pub kernels: Vec<KernelSpec>,
    pub m: f64,
    pub z0: f64,
    /// Admit the uniform density as a reference kernel.
    #[serde(default)]
    pub allow_uniform: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedPointSettings {
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub outer_max_steps: usize,
    pub delta_guard: f64,
    pub sample_spacing: f64,
    pub min_samples: usize,
}

impl Default for FixedPointSettings {
    fn default() -> Self {
        let d = FixedPointConfig::default();
        Self {
            inner_tol: d.inner_tol,
            inner_max_iter: d.inner_max_iter,
            outer_max_steps: d.outer_max_steps,
            delta_guard: d.delta_guard,
            sample_spacing: d.sample_spacing,
            min_samples: d.min_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorSettings {
    pub cells: usize,
    pub epsilons: Vec<f64>,
}

impl Default for OperatorSettings {
    fn default() -> Self {
        Self {
            cells: 512,
            epsilons: vec![1e-2, 1e-3, 1e-4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeSettings {
    pub cells: usize,
    pub t_end: f64,
    pub dt_max: f64,
    /// Trailing time window for the growth-rate fit.
    pub window: f64,
    /// Write every `stride`-th profile (0 writes none).
    pub stride: usize,
}

impl Default for PdeSettings {
    fn default() -> Self {
        Self {
            cells: 256,
            t_end: 40.0,
            dt_max: 0.05,
            window: 10.0,
            stride: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscreteSettings {
    /// Copy scales `h`; each run uses the threshold `n = m / h`. Empty means `m/2, m/4, m/8`.
    pub hs: Vec<f64>,
    pub t_end: f64,
    /// Uniform cells of the continuum reference.
    pub reference_cells: usize,
}

impl Default for DiscreteSettings {
    fn default() -> Self {
        Self {
            hs: Vec::new(),
            t_end: 1.0,
            reference_cells: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// `((z - lo)(hi - z))^2` on `[lo, hi]` scaled to `mass`.
    Bump { lo: f64, hi: f64, mass: f64 },
    Constant { value: f64 },
}

impl InitialSpec {
    pub fn density(&self) -> impl Fn(f64) -> f64 + Sync + Send + Copy {
        let (lo, hi, scale, flat) = match *self {
            InitialSpec::Bump { lo, hi, mass } => {
                let w = hi - lo;
                // int ((z - lo)(hi - z))^2 = w^5 / 30
                (lo, hi, 30.0 * mass / w.powi(5), None)
            }
            InitialSpec::Constant { value } => (0.0, 0.0, 0.0, Some(value)),
        };
        move |z: f64| match flat {
            Some(v) => v,
            None if z > lo && z < hi => scale * ((z - lo) * (hi - z)).powi(2),
            None => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    pub u0: InitialSpec,
    pub v0: f64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            u0: InitialSpec::Bump {
                lo: 0.2,
                hi: 0.8,
                mass: 1.0,
            },
            v0: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSettings {
    pub lambda_tol: f64,
    /// Relative L1 tolerance for profiles.
    pub profile_tol: f64,
    pub window: (f64, f64),
}

impl Default for CompareSettings {
    fn default() -> Self {
        Self {
            lambda_tol: 0.02,
            profile_tol: 0.05,
            window: (0.01, 0.95),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub fixedpoint: FixedPointSettings,
    pub operator: OperatorSettings,
    pub pde: PdeSettings,
    pub discrete: DiscreteSettings,
    pub initial: InitialConfig,
    pub compare: CompareSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Lower end of the window on which eigenfunctions integrate to one.
    pub norm_lo: f64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            norm_lo: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub model: ModelConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Directory that relative table paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// The reference setting with the uniform, unimodal and bimodal densities.
pub fn fig1_preset() -> Value {
    serde_json::json!({
        "preset": "fig1",
        "model": {
            "growth": {"kind": "logistic", "b0": 1.0},
            "beta": {"kind": "constant", "value": 0.4},
            "mu": {"kind": "constant", "value": 0.1},
            "kernels": [
                {"kind": "uniform"},
                {"kind": "beta", "shape": 2.0},
                {"kind": "bimodal", "peak": 0.8, "width": 0.2}
            ],
            "m": 0.005,
            "z0": 1.0,
            "allow_uniform": true
        }
    })
}

fn preset(name: &str) -> Result<Value> {
    match name {
        "fig1" => Ok(fig1_preset()),
        other => Err(Error::Config(format!("unknown preset '{other}' (known: fig1)"))),
    }
}

/// Objects merge key by key; anything else in `over` replaces `base`.
fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        // a tagged object switching variant is replaced, not merged
        (Value::Object(b), Value::Object(o)) if o.get("kind").is_none_or(|k| b.get("kind") == Some(k)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl RunConfig {
    /// Parses JSON text; a `preset` key (or `preset_override`) supplies defaults
    /// that the text then overrides.
    pub fn from_json(text: &str, base_dir: &Path, preset_override: Option<&str>) -> Result<Self> {
        let user: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
        let name = preset_override
            .map(str::to_string)
            .or_else(|| user.get("preset").and_then(Value::as_str).map(str::to_string));
        let mut value = match name {
            Some(n) => preset(&n)?,
            None => Value::Object(Default::default()),
        };
        merge(&mut value, user);
        Self::from_value(value, base_dir)
    }

    pub fn from_preset(name: &str) -> Result<Self> {
        Self::from_value(preset(name)?, Path::new("."))
    }

    pub fn load(path: Option<&Path>, preset_override: Option<&str>) -> Result<Self> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
                let base = p.parent().unwrap_or(Path::new(".")).to_path_buf();
                Self::from_json(&text, &base, preset_override)
            }
            None => match preset_override {
                Some(n) => Self::from_preset(n),
                None => Err(Error::Config("either --config or --preset is required".into())),
            },
        }
    }

    fn from_value(value: Value, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = serde_json::from_value(value).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let m = &self.model;
        if m.kernels.is_empty() {
            return bad("model.kernels must list at least one density".into());
        }
        if !(m.z0 > 0.0 && m.z0.is_finite()) {
            return bad(format!("model.z0 must be positive (got {})", m.z0));
        }
        let s = &self.solver;
        if s.operator.cells < 8 || s.pde.cells < 8 {
            return bad("grids need at least 8 cells".into());
        }
        if s.operator.epsilons.is_empty() || s.operator.epsilons.iter().any(|e| !(*e > 0.0)) {
            return bad("solver.operator.epsilons must be positive and nonempty".into());
        }
        if !(s.pde.t_end >= 0.0 && s.pde.dt_max > 0.0 && s.pde.window > 0.0) {
            return bad("solver.pde needs t_end >= 0, dt_max > 0 and window > 0".into());
        }
        for &h in &s.discrete.hs {
            let n = (m.m / h).round();
            if !(h > 0.0) || n < 2.0 || (n * h - m.m).abs() > 1e-9 * m.m {
                return bad(format!("solver.discrete.hs: h = {h} must divide the cutoff m = {} at least twice", m.m));
            }
        }
        if !(s.discrete.t_end >= 0.0) || s.discrete.reference_cells < 8 {
            return bad("solver.discrete needs t_end >= 0 and reference_cells >= 8".into());
        }
        let fp = &s.fixedpoint;
        if !(fp.inner_tol > 0.0) || fp.inner_max_iter == 0 || fp.outer_max_steps == 0 || !(fp.sample_spacing > 0.0) {
            return bad("solver.fixedpoint has a non-positive setting".into());
        }
        if !(self.output.norm_lo >= 0.0 && self.output.norm_lo < m.z0) {
            return bad(format!("output.norm_lo must lie in [0, z0) (got {})", self.output.norm_lo));
        }
        for spec in &m.kernels {
            if let KernelSpec::Table { path } = spec {
                let p = self.base_dir.join(path);
                if !p.exists() {
                    return bad(format!("kernel table {} does not exist", p.display()));
                }
            }
        }
        for spec in [&m.growth, &m.beta, &m.mu] {
            if let RateSpec::Table { path } = spec {
                let p = self.base_dir.join(path);
                if !p.exists() {
                    return bad(format!("rate table {} does not exist", p.display()));
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, as lowercase hex.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serialises");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    fn rate(&self, spec: &RateSpec) -> Result<RateFunction> {
        let z0 = self.model.z0;
        Ok(match spec {
            RateSpec::Constant { value } => RateFunction::Constant(*value),
            RateSpec::Logistic { b0 } => RateFunction::LogisticGrowth { b0: *b0, z0 },
            RateSpec::PowerLaw { coeff, exponent } => RateFunction::PowerLaw {
                coeff: *coeff,
                exponent: *exponent,
                z0,
            },
            RateSpec::Linear { intercept, slope } => {
                let (c, s) = (*intercept, *slope);
                RateFunction::custom(format!("{c} + {s} z"), move |z| c + s * z)
            }
            RateSpec::Table { path } => RateFunction::from_csv(&self.base_dir.join(path))?,
        })
    }

    pub fn phi(&self, spec: &KernelSpec) -> Result<Phi> {
        match spec {
            KernelSpec::Uniform => Ok(Phi::Uniform),
            KernelSpec::Beta { shape } => Phi::symmetric_beta(*shape),
            KernelSpec::Bimodal { peak, width } => Phi::bimodal(*peak, *width),
            KernelSpec::Table { path } => Phi::from_csv(&self.base_dir.join(path)),
        }
    }

    /// Model parameters for one of the configured densities.
    pub fn params(&self, spec: &KernelSpec) -> Result<ModelParameters> {
        let m = &self.model;
        let p = ModelParameters::new(
            self.rate(&m.growth)?,
            self.rate(&m.beta)?,
            self.rate(&m.mu)?,
            self.phi(spec)?,
            m.m,
            m.z0,
        )?;
        Ok(p.with_oracle_kernel(m.allow_uniform && matches!(spec, KernelSpec::Uniform)))
    }

    /// `(n, h)` levels of the discrete model.
    pub fn discrete_levels(&self) -> Vec<(usize, f64)> {
        let m = self.model.m;
        let hs = if self.solver.discrete.hs.is_empty() {
            vec![m / 2.0, m / 4.0, m / 8.0]
        } else {
            self.solver.discrete.hs.clone()
        };
        hs.into_iter().map(|h| ((m / h).round() as usize, h)).collect()
    }

    pub fn fixedpoint(&self) -> FixedPointConfig {
        let f = &self.solver.fixedpoint;
        FixedPointConfig {
            inner_tol: f.inner_tol,
            inner_max_iter: f.inner_max_iter,
            outer_max_steps: f.outer_max_steps,
            delta_guard: f.delta_guard,
            sample_spacing: f.sample_spacing,
            min_samples: f.min_samples,
            norm_lo: self.output.norm_lo,
        }
    }
}
