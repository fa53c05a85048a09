//! Command-line front end: subcommand dispatch and CSV emission.
//!
//! Exit codes: 0 success, 1 solver failure, 2 configuration error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::assumptions::{check_a5, check_a5_sufficient, A5Verdict};
use crate::config::{KernelSpec, RunConfig};
use crate::discrete::{continuum_limit_error, simulate_discrete, DiscreteModel};
use crate::eigen_fixedpoint::{self, ExactUniform};
use crate::eigen_operator::{EigenPair, OperatorModel};
use crate::error::{Error, Result};
use crate::flow::FlowMap;
use crate::grid::Grid;
use crate::params::{validate, ModelParameters};
use crate::pde::{longtime_eigen_estimate, simulate, PdeModel, PdeRunOptions, PdeState};
use crate::quadrature::relative_l1_panels;

pub const THREADS_ENV: &str = "PLASMID_SPECTRA_THREADS";

const L1_PANELS: usize = 4000;
const PHI_PANEL_POINTS: usize = 201;

#[derive(Debug, Parser)]
#[command(name = "plasmid-spectra", version, about = "Plasmid copy-number model: simulation and eigenpair solvers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check rates, kernel and the integrability condition.
    Validate(CommonArgs),
    /// Copy-number model at several scales against a continuum reference.
    SimulateDiscrete(CommonArgs),
    /// Finite-volume simulation and long-time growth rate.
    SimulatePde(CommonArgs),
    /// Eigenfunction by the interval-marching fixed-point construction.
    EigenFixedpoint(CommonArgs),
    /// Eigenpair by the regularised integral operator.
    EigenOperator(CommonArgs),
    /// Cross-solver comparison of growth rates and profiles.
    Compare(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<String>,
}

/// Comma-separated table with a config-hash comment line and a header row.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_numbers(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|x| num(*x)).collect());
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn render(&self, hash: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# config_hash={hash}");
        let _ = writeln!(s, "{}", self.columns.iter().map(|c| quote(c)).collect::<Vec<_>>().join(","));
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.iter().map(|c| quote(c)).collect::<Vec<_>>().join(","));
        }
        s
    }

    pub fn write(&self, path: &Path, hash: &str) -> Result<()> {
        std::fs::write(path, self.render(hash)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}

/// Shortest round-trip decimal form.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x}")
    }
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Everything a subcommand needs besides its own settings.
struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    hash: String,
    warnings: Vec<String>,
}

impl Ctx {
    fn write(&self, name: &str, table: &CsvTable) -> Result<()> {
        table.write(&self.out.join(name), &self.hash)
    }

    fn params(&self, spec: &KernelSpec) -> Result<ModelParameters> {
        self.cfg.params(spec).map_err(as_config)
    }

    fn warn(&mut self, msg: String) {
        eprintln!("warning: {msg}");
        self.warnings.push(msg);
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        _ => 1,
    }
}

/// Applies the thread cap from the environment.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer (got '{raw}')")))?;
    // a pool may already exist when called twice in one process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses arguments and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    configure_threads()?;
    let (args, f): (&CommonArgs, fn(&mut Ctx) -> Result<()>) = match &command {
        Command::Validate(a) => (a, cmd_validate),
        Command::SimulateDiscrete(a) => (a, cmd_simulate_discrete),
        Command::SimulatePde(a) => (a, cmd_simulate_pde),
        Command::EigenFixedpoint(a) => (a, cmd_eigen_fixedpoint),
        Command::EigenOperator(a) => (a, cmd_eigen_operator),
        Command::Compare(a) => (a, cmd_compare),
    };
    let cfg = RunConfig::load(args.config.as_deref(), args.preset.as_deref())?;
    let out = args.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    std::fs::create_dir_all(&out).map_err(|e| Error::Io(format!("cannot create {}: {e}", out.display())))?;
    let hash = cfg.hash();
    let mut ctx = Ctx {
        cfg,
        out,
        hash,
        warnings: Vec::new(),
    };
    f(&mut ctx)?;
    if !ctx.warnings.is_empty() {
        println!("{} warning(s)", ctx.warnings.len());
    }
    Ok(())
}

fn cmd_validate(ctx: &mut Ctx) -> Result<()> {
    let mut table = CsvTable::new(&["kernel", "check", "passed", "overridden", "slack", "detail"]);
    let mut hard = Vec::new();
    for spec in ctx.cfg.model.kernels.clone() {
        let tag = spec.tag();
        let params = ctx.params(&spec)?;
        let report = validate(&params).map_err(as_config)?;
        for c in &report.checks {
            table.push(vec![
                tag.clone(),
                c.name.clone(),
                c.passed.to_string(),
                c.overridden.to_string(),
                num(c.slack),
                c.detail.clone(),
            ]);
            let mark = if c.passed { "ok" } else if c.overridden { "flag" } else { "FAIL" };
            println!("{tag:>10} {:<28} {mark:<4} {}", c.name, c.detail);
            if !c.passed && !c.overridden {
                hard.push(format!("{tag}: {}", c.name));
            }
        }
        let flow = FlowMap::new(&params.b, params.z0);
        let a5 = check_a5(&params, &flow)?;
        let detail = format!(
            "verdict {:?}, value {:.6e} (flow form) {:.6e} (substituted), decay margin {:.4}",
            a5.verdict, a5.value_flow_form, a5.value_cov_form, a5.decay_margin
        );
        println!("{tag:>10} {:<28} {:<4} {detail}", "A5 integrability", verdict_mark(a5.verdict));
        table.push(vec![
            tag.clone(),
            "A5 integrability".into(),
            (a5.verdict == A5Verdict::Finite).to_string(),
            "false".into(),
            num(a5.certified_bound),
            detail,
        ]);
        match a5.verdict {
            A5Verdict::Finite => {}
            A5Verdict::LikelyDivergent => ctx.warn(format!("{tag}: the A5 integral appears to diverge")),
            A5Verdict::Inconclusive => ctx.warn(format!("{tag}: the A5 check is inconclusive")),
        }
        let s = check_a5_sufficient(&params);
        let detail = format!(
            "decay from {:?} (margin {:.4}), growth exponent {:.4}",
            s.decay_from, s.decay_margin, s.fitted_exponent
        );
        println!("{tag:>10} {:<28} {:<4} {detail}", "A5 sufficient condition", if s.passed() { "ok" } else { "no" });
        table.push(vec![
            tag,
            "A5 sufficient condition".into(),
            s.passed().to_string(),
            "false".into(),
            num(s.decay_margin),
            detail,
        ]);
    }
    ctx.write("validate.csv", &table)?;
    if !hard.is_empty() {
        return Err(Error::Config(format!("hard validation failures: {}", hard.join("; "))));
    }
    Ok(())
}

fn verdict_mark(v: A5Verdict) -> &'static str {
    match v {
        A5Verdict::Finite => "ok",
        A5Verdict::LikelyDivergent => "WARN",
        A5Verdict::Inconclusive => "??",
    }
}

fn cmd_simulate_discrete(ctx: &mut Ctx) -> Result<()> {
    let levels = ctx.cfg.discrete_levels();
    let settings = ctx.cfg.solver.discrete.clone();
    let initial = ctx.cfg.solver.initial.clone();
    let u0 = initial.u0.density();
    for spec in ctx.cfg.model.kernels.clone() {
        let tag = spec.tag();
        let params = ctx.params(&spec)?;
        let grid = Grid::uniform(settings.reference_cells, params.z0)?;
        let model = PdeModel::new(&params, grid.clone())?;
        let reference = simulate(
            &model,
            PdeState::project(&grid, u0, initial.v0),
            &PdeRunOptions {
                t_end: settings.t_end,
                dt_max: 0.05,
                stride: 0,
            },
        )?
        .last;
        let runs: Vec<(DiscreteModel, crate::discrete::DiscreteState, f64)> = levels
            .par_iter()
            .map(|&(n, h)| {
                let dm = DiscreteModel::new(&params, n, h)?;
                let init = dm.project(u0, initial.v0);
                let end = simulate_discrete(&dm, init, settings.t_end)?;
                let err = continuum_limit_error(&end, &grid, &reference)?;
                Ok((dm, end, err))
            })
            .collect::<Result<_>>()?;
        let mut refinement = CsvTable::new(&["n", "h", "l1_error", "ratio"]);
        let mut prev: Option<f64> = None;
        for ((n, h), (_, _, err)) in levels.iter().zip(&runs) {
            let ratio = prev.map_or(f64::NAN, |p| p / err);
            refinement.push(vec![n.to_string(), num(*h), num(*err), num(ratio)]);
            println!("{tag:>10} n = {n:<4} h = {h:<10} L1 error {err:.6e} ratio {}", num(ratio));
            prev = Some(*err);
        }
        ctx.write(&format!("discrete_refinement_{tag}.csv"), &refinement)?;
        let (dm, end, _) = runs.last().expect("at least one level");
        let mut state = CsvTable::new(&["i", "z", "count"]);
        for (i, x) in end.x.iter().enumerate() {
            state.push(vec![i.to_string(), num(i as f64 * dm.h), num(*x)]);
        }
        ctx.write(&format!("discrete_{tag}.csv"), &state)?;
    }
    Ok(())
}

/// PDE run per the configuration, with the long-time estimate when available.
fn run_pde(ctx: &Ctx, params: &ModelParameters) -> Result<(Grid, crate::pde::Trajectory)> {
    let s = &ctx.cfg.solver.pde;
    let init = &ctx.cfg.solver.initial;
    let grid = Grid::graded(s.cells, params.z0, Some(params.m))?;
    let model = PdeModel::new(params, grid.clone())?;
    let traj = simulate(
        &model,
        PdeState::project(&grid, init.u0.density(), init.v0),
        &PdeRunOptions {
            t_end: s.t_end,
            dt_max: s.dt_max,
            stride: s.stride,
        },
    )?;
    Ok((grid, traj))
}

fn cmd_simulate_pde(ctx: &mut Ctx) -> Result<()> {
    let window = ctx.cfg.solver.pde.window;
    let norm_lo = ctx.cfg.output.norm_lo;
    for spec in ctx.cfg.model.kernels.clone() {
        let tag = spec.tag();
        let params = ctx.params(&spec)?;
        let (grid, traj) = run_pde(ctx, &params)?;
        let mut series = CsvTable::new(&["t", "mass", "v0"]);
        for k in 0..traj.times.len() {
            series.push_numbers(&[traj.times[k], traj.mass[k], traj.v0[k]]);
        }
        ctx.write(&format!("pde_mass_{tag}.csv"), &series)?;
        let estimate = if traj.last.t >= window {
            match longtime_eigen_estimate(&traj, &grid, window, norm_lo) {
                Ok(e) => {
                    println!("{tag:>10} growth rate {:.6} (slope variance {:.2e})", e.lambda, e.slope_variance);
                    Some(e)
                }
                Err(e) => {
                    ctx.warn(format!("{tag}: {e}"));
                    None
                }
            }
        } else {
            None
        };
        let mut profile = CsvTable::new(&["z_lo", "z_hi", "z", "u", "u_normalised"]);
        for k in 0..grid.len() {
            let un = estimate.as_ref().map_or(f64::NAN, |e| e.profile[k]);
            profile.push_numbers(&[grid.edges()[k], grid.edges()[k + 1], grid.centers()[k], traj.last.u[k], un]);
        }
        ctx.write(&format!("pde_profile_{tag}.csv"), &profile)?;
        if !traj.snapshots.is_empty() {
            let mut snaps = CsvTable::new(&["t", "z", "u"]);
            for st in &traj.snapshots {
                for (z, u) in grid.centers().iter().zip(&st.u) {
                    snaps.push_numbers(&[st.t, *z, *u]);
                }
            }
            ctx.write(&format!("pde_snapshots_{tag}.csv"), &snaps)?;
        }
        println!(
            "{tag:>10} t = {} mass {:.6e} plasmid-free {:.6e} dt {}",
            traj.last.t,
            traj.mass.last().copied().unwrap_or(f64::NAN),
            traj.last.v0,
            traj.dt
        );
    }
    Ok(())
}

fn phi_panels(ctx: &Ctx) -> Result<CsvTable> {
    let specs = &ctx.cfg.model.kernels;
    let phis = specs.iter().map(|s| ctx.cfg.phi(s).map_err(as_config)).collect::<Result<Vec<_>>>()?;
    let mut cols = vec!["xi".to_string()];
    cols.extend(specs.iter().map(|s| format!("phi_{}", s.tag())));
    let mut t = CsvTable::new(&cols);
    for i in 0..PHI_PANEL_POINTS {
        let xi = i as f64 / (PHI_PANEL_POINTS - 1) as f64;
        let mut row = vec![xi];
        row.extend(phis.iter().map(|p| p.value(xi)));
        t.push_numbers(&row);
    }
    Ok(t)
}

fn cmd_eigen_fixedpoint(ctx: &mut Ctx) -> Result<()> {
    let fp = ctx.cfg.fixedpoint();
    let mut summary = CsvTable::new(&[
        "kernel",
        "lambda",
        "alpha",
        "intervals",
        "iterations",
        "unconverged",
        "residual_g",
        "residual_v",
        "continuity",
        "l1_vs_exact",
        "l1_vs_variant",
    ]);
    for spec in ctx.cfg.model.kernels.clone() {
        let tag = spec.tag();
        let params = ctx.params(&spec)?;
        let sol = eigen_fixedpoint::solve(&params, &fp)?;
        let exact = matches!(spec, KernelSpec::Uniform).then(|| ExactUniform::new(sol.alpha, sol.z0, sol.norm_lo));
        let mut cols = vec!["z", "g", "v", "u"];
        if exact.is_some() {
            cols.extend(["exact_raw", "exact_rescaled"]);
        }
        let mut t = CsvTable::new(&cols);
        for r in sol.table() {
            let mut row = r.to_vec();
            if let Some(ex) = &exact {
                let z = r[0];
                row.push(z.powf(-sol.alpha) * (sol.z0 - z).powf(sol.alpha - 1.0));
                row.push(ex.value(z));
            }
            t.push_numbers(&row);
        }
        ctx.write(&format!("eigen_fixedpoint_{tag}.csv"), &t)?;
        let (lo, hi) = (0.01 * sol.z0, 0.99 * sol.z0);
        let (l1, l1_variant) = match &exact {
            Some(ex) => (
                eigen_fixedpoint::relative_l1(|z| sol.u_at(z), |z| ex.value(z), lo, hi),
                eigen_fixedpoint::relative_l1(|z| sol.u_at(z), |z| ex.variant(z), lo, hi),
            ),
            None => (f64::NAN, f64::NAN),
        };
        let r = &sol.report;
        if r.unconverged_steps() > 0 {
            ctx.warn(format!("{tag}: {} interval(s) hit the iteration cap", r.unconverged_steps()));
        }
        println!(
            "{tag:>10} lambda {:.6} alpha {:.4} intervals {} iterations {} residual {:.2e} L1 vs exact {}",
            sol.lambda,
            sol.alpha,
            r.steps.len(),
            r.total_iterations(),
            r.residual_g,
            num(l1)
        );
        if exact.is_some() {
            println!("{:>10} the variant z^-alpha (z0 - z)^alpha differs by {:.3} in relative L1", "", l1_variant);
        }
        summary.push(vec![
            tag,
            num(sol.lambda),
            num(sol.alpha),
            r.steps.len().to_string(),
            r.total_iterations().to_string(),
            r.unconverged_steps().to_string(),
            num(r.residual_g),
            num(r.residual_v),
            num(r.continuity_mismatch),
            num(l1),
            num(l1_variant),
        ]);
    }
    ctx.write("eigen_fixedpoint_summary.csv", &summary)?;
    ctx.write("phi_panels.csv", &phi_panels(ctx)?)?;
    Ok(())
}

fn operator_pair(ctx: &Ctx, params: &ModelParameters) -> Result<EigenPair> {
    let s = &ctx.cfg.solver.operator;
    let op = OperatorModel::graded(params, s.cells)?;
    op.continue_epsilon(&s.epsilons, ctx.cfg.output.norm_lo)
}

fn cmd_eigen_operator(ctx: &mut Ctx) -> Result<()> {
    let mut summary = CsvTable::new(&["kernel", "lambda", "lambda_extrapolated", "closure_residual", "power_residual"]);
    let mut history = CsvTable::new(&["kernel", "epsilon", "lambda"]);
    for spec in ctx.cfg.model.kernels.clone() {
        let tag = spec.tag();
        let params = ctx.params(&spec)?;
        let pair = operator_pair(ctx, &params)?;
        let exact = matches!(spec, KernelSpec::Uniform).then(|| {
            let alpha = exact_alpha(&params);
            alpha.map(|a| ExactUniform::new(a, params.z0, ctx.cfg.output.norm_lo.max(params.m)))
        });
        let exact = exact.flatten();
        let mut cols = vec!["z_lo", "z_hi", "z", "u", "psi"];
        if exact.is_some() {
            cols.push("exact_rescaled");
        }
        let mut t = CsvTable::new(&cols);
        let g = &pair.grid;
        for k in 0..g.len() {
            let mut row = vec![g.edges()[k], g.edges()[k + 1], g.centers()[k], pair.u[k], pair.psi[k]];
            if let Some(ex) = &exact {
                row.push(if g.centers()[k] >= ex.lo { ex.value(g.centers()[k]) } else { f64::NAN });
            }
            t.push_numbers(&row);
        }
        ctx.write(&format!("eigen_operator_{tag}.csv"), &t)?;
        for (e, l) in &pair.epsilon_history {
            history.push(vec![tag.clone(), num(*e), num(*l)]);
        }
        println!(
            "{tag:>10} lambda {:.6} (extrapolated {:.6}) closure residual {:.2e}",
            pair.lambda, pair.lambda_extrapolated, pair.closure_residual
        );
        summary.push(vec![
            tag,
            num(pair.lambda),
            num(pair.lambda_extrapolated),
            num(pair.closure_residual),
            num(pair.power_residual),
        ]);
    }
    ctx.write("eigen_operator_summary.csv", &summary)?;
    ctx.write("eigen_operator_epsilon.csv", &history)?;
    ctx.write("phi_panels.csv", &phi_panels(ctx)?)?;
    Ok(())
}

/// `alpha = 2 beta / b0` in the constant-rate regime.
fn exact_alpha(params: &ModelParameters) -> Option<f64> {
    let (b0, _) = params.b.logistic()?;
    let beta = params.beta.constant_value()?;
    params.mu.constant_value()?;
    Some(2.0 * beta / b0)
}

fn cmd_compare(ctx: &mut Ctx) -> Result<()> {
    let c = ctx.cfg.solver.compare.clone();
    let (lo, hi) = c.window;
    let norm_lo = ctx.cfg.output.norm_lo;
    let mut table = CsvTable::new(&["kernel", "quantity", "value", "reference", "difference", "tolerance", "pass"]);
    let mut failures = 0;
    for spec in ctx.cfg.model.kernels.clone() {
        let tag = spec.tag();
        let params = ctx.params(&spec)?;
        let pair = operator_pair(ctx, &params)?;
        let (grid, traj) = run_pde(ctx, &params)?;
        let est = longtime_eigen_estimate(&traj, &grid, ctx.cfg.solver.pde.window, norm_lo)?;
        let fixed = if params.is_constant_rate_regime() {
            Some(eigen_fixedpoint::solve(&params, &ctx.cfg.fixedpoint())?)
        } else {
            None
        };
        let pde_u = |z: f64| est.profile[grid.locate(z)];
        let op_u = |z: f64| pair.u_at(z);
        let mut rows: Vec<(String, f64, f64, f64, f64)> = vec![(
            "lambda pde vs operator".into(),
            est.lambda,
            pair.lambda,
            (est.lambda - pair.lambda).abs(),
            c.lambda_tol,
        )];
        rows.push((
            "profile pde vs operator".into(),
            f64::NAN,
            f64::NAN,
            relative_l1_panels(pde_u, op_u, lo, hi, L1_PANELS),
            c.profile_tol,
        ));
        if let Some(sol) = &fixed {
            let fp_u = |z: f64| sol.u_at(z);
            rows.push((
                "lambda fixedpoint vs operator".into(),
                sol.lambda,
                pair.lambda,
                (sol.lambda - pair.lambda).abs(),
                c.lambda_tol,
            ));
            rows.push((
                "lambda pde vs fixedpoint".into(),
                est.lambda,
                sol.lambda,
                (est.lambda - sol.lambda).abs(),
                c.lambda_tol,
            ));
            rows.push((
                "profile operator vs fixedpoint".into(),
                f64::NAN,
                f64::NAN,
                relative_l1_panels(op_u, fp_u, lo, hi, L1_PANELS),
                c.profile_tol,
            ));
            rows.push((
                "profile pde vs fixedpoint".into(),
                f64::NAN,
                f64::NAN,
                relative_l1_panels(pde_u, fp_u, lo, hi, L1_PANELS),
                c.profile_tol,
            ));
        }
        for (q, v, r, d, tol) in rows {
            let pass = d <= tol;
            if !pass {
                failures += 1;
            }
            println!("{tag:>10} {q:<32} {:<12} {} (tol {tol})", num(d), if pass { "pass" } else { "FAIL" });
            table.push(vec![tag.clone(), q, num(v), num(r), num(d), num(tol), pass.to_string()]);
        }
    }
    ctx.write("compare.csv", &table)?;
    if failures > 0 {
        ctx.warn(format!("{failures} comparison(s) outside tolerance"));
    }
    Ok(())
}
