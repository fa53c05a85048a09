//! Finite-volume run to large times: the log-mass slope settles on the
//! principal eigenvalue and the normalised profile on the eigenfunction.
//!
//! cargo run --release --example pde_longtime

use plasmid_spectra::grid::Grid;
use plasmid_spectra::params::{ModelParameters, Phi};
use plasmid_spectra::pde::{longtime_eigen_estimate, simulate, PdeModel, PdeRunOptions, PdeState};

fn main() -> plasmid_spectra::Result<()> {
    let params = ModelParameters::reference(Phi::bimodal_default());
    let grid = Grid::graded(256, 1.0, Some(params.m))?;
    let model = PdeModel::new(&params, grid.clone())?;
    let init = PdeState::project(&grid, |z| if z > 0.2 && z < 0.8 { 1.0 } else { 0.0 }, 0.0);
    let traj = simulate(&model, init, &PdeRunOptions { t_end: 40.0, dt_max: 0.05, stride: 0 })?;

    println!("dt = {:.5}", traj.dt);
    for k in (0..traj.times.len()).step_by(traj.times.len() / 8) {
        println!("t = {:>6.2}  mass {:>12.5e}  plasmid-free {:>12.5e}", traj.times[k], traj.mass[k], traj.v0[k]);
    }
    let est = longtime_eigen_estimate(&traj, &grid, 10.0, 0.005)?;
    println!("growth rate {:.6} (sub-window slope variance {:.1e})", est.lambda, est.slope_variance);
    for z in [0.01, 0.05, 0.2, 0.5, 0.8, 0.95] {
        println!("  U({z}) ~ {:.4}", est.profile[grid.locate(z)]);
    }
    Ok(())
}
