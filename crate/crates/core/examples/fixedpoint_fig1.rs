//! Eigenfunctions of the reference model for the uniform, unimodal and bimodal
//! densities by the interval-marching fixed-point construction, with the
//! closed form for the uniform density.
//!
//! cargo run --release --example fixedpoint_fig1

use plasmid_spectra::eigen_fixedpoint::{relative_l1, solve, ExactUniform, FixedPointConfig};
use plasmid_spectra::params::{ModelParameters, Phi};

fn main() -> plasmid_spectra::Result<()> {
    let zs = [0.005, 0.01, 0.05, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99];
    print!("{:>12}", "z");
    for z in zs {
        print!("{z:>9}");
    }
    println!();
    for phi in [Phi::Uniform, Phi::symmetric_beta(2.0)?, Phi::bimodal_default()] {
        let label = phi.label();
        let sol = solve(&ModelParameters::reference(phi), &FixedPointConfig::default())?;
        print!("{:>12}", label.split('(').next().unwrap_or(&label));
        for z in zs {
            print!("{:>9.4}", sol.u_at(z));
        }
        let r = &sol.report;
        println!(
            "\n{:>12} {} intervals, {} iterations, residual {:.1e}",
            "",
            r.steps.len(),
            r.total_iterations(),
            r.residual_g
        );
        if label == "uniform" {
            let exact = ExactUniform::new(sol.alpha, 1.0, 0.005);
            let err = relative_l1(|z| sol.u_at(z), |z| exact.value(z), 0.01, 0.99);
            println!("{:>12} relative L1 to z^-a (1 - z)^(a - 1): {err:.2e}", "");
        }
    }
    Ok(())
}
