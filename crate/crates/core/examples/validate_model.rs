//! Builds the reference model for each density and prints the structural checks.
//!
//! cargo run --release --example validate_model

use plasmid_spectra::params::{validate, ModelParameters, Phi, RateFunction};

fn main() -> plasmid_spectra::Result<()> {
    for phi in [Phi::Uniform, Phi::symmetric_beta(2.0)?, Phi::bimodal_default()] {
        let params = ModelParameters::reference(phi);
        let report = validate(&params)?;
        println!("{}", params.kernel.phi.label());
        for c in &report.checks {
            let mark = match (c.passed, c.overridden) {
                (true, _) => "ok",
                (false, true) => "flagged",
                (false, false) => "FAILED",
            };
            println!("  {:<36} {:<8} {}", c.name, mark, c.detail);
        }
        let b = params.bounds();
        println!(
            "  eigenvalue window [{:.3}, {:.3}]\n",
            b.lambda_min(),
            b.lambda_max()
        );
    }

    // a cutoff above the cap is rejected before any check runs
    let bad = ModelParameters::new(
        RateFunction::LogisticGrowth { b0: 1.0, z0: 1.0 },
        RateFunction::Constant(0.4),
        RateFunction::Constant(0.1),
        Phi::Uniform,
        1.5,
        1.0,
    );
    println!("m = 1.5 with z0 = 1: {}", bad.unwrap_err());
    Ok(())
}
