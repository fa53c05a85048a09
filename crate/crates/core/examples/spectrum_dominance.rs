//! Dense spectrum of the discretised generator and the radius of the
//! transport-resolvent operator around the principal eigenvalue.
//!
//! cargo run --release --example spectrum_dominance

use plasmid_spectra::eigen_operator::{spectrum_dominance_check, OperatorModel};
use plasmid_spectra::grid::Grid;
use plasmid_spectra::params::{ModelParameters, Phi};

fn main() -> plasmid_spectra::Result<()> {
    let params = ModelParameters::reference(Phi::symmetric_beta(2.0)?);
    let d = spectrum_dominance_check(&params, Grid::graded(256, 1.0, Some(params.m))?)?;
    println!(
        "lambda_d = {:.6} (imaginary part {:.1e}), next real part {:.6}, gap {:.4}",
        d.lambda_d, d.lambda_d_imag, d.next_real_part, d.gap
    );
    println!("eigenvector nonnegative: {}, dominant: {}", d.eigenvector_nonnegative, d.dominant());

    let op = OperatorModel::graded(&params, 256)?;
    for xi in [d.lambda_d - 0.1, d.lambda_d, d.lambda_d + 0.2] {
        println!("xi = {xi:.4}: r(T) = {:.6}, |T| = {:.4}", op.t_xi_radius(xi)?, op.t_xi_norm(xi)?);
    }
    Ok(())
}
