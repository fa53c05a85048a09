//! Principal eigenpair from the regularised operator, including a death rate
//! that depends on the copy number (outside the closed-form regime).
//!
//! cargo run --release --example operator_eigenpair

use plasmid_spectra::eigen_operator::OperatorModel;
use plasmid_spectra::params::{ModelParameters, Phi, RateFunction};

fn main() -> plasmid_spectra::Result<()> {
    let constant = ModelParameters::reference(Phi::symmetric_beta(2.0)?);
    let varying = constant
        .clone()
        .with_mu(RateFunction::custom("0.05 + 0.1 z", |z| 0.05 + 0.1 * z))?;
    for (label, params) in [("mu = 0.1", constant), ("mu = 0.05 + 0.1 z", varying)] {
        let op = OperatorModel::graded(&params, 256)?;
        let search = op.find_lambda(1e-3, None)?;
        println!("{label}: bracket [{:.4}, {:.4}], lambda(eps = 1e-3) = {:.6}", search.bracket.0, search.bracket.1, search.lambda);
        let pair = op.continue_epsilon(&[1e-2, 1e-3, 1e-4], 0.005)?;
        for (eps, lambda) in &pair.epsilon_history {
            println!("  eps = {eps:<8} lambda = {lambda:.6}");
        }
        println!(
            "  lambda = {:.6}, closure residual {:.1e}, U(0.01) = {:.3}, U(0.5) = {:.3}",
            pair.lambda,
            pair.closure_residual,
            pair.u_at(0.01),
            pair.u_at(0.5)
        );
    }
    Ok(())
}
