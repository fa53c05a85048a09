//! The integrability condition on the loss exponent along characteristics.
//!
//! cargo run --release --example a5_integrability

use plasmid_spectra::assumptions::{check_a5, check_a5_sufficient, evaluate_a5};
use plasmid_spectra::flow::FlowMap;
use plasmid_spectra::params::{ModelParameters, Phi, RateFunction};

fn main() -> plasmid_spectra::Result<()> {
    let b = RateFunction::LogisticGrowth { b0: 1.0, z0: 1.0 };
    let flow = FlowMap::new(&b, 1.0);

    // constant exponent C: the double integral equals z0 / C
    for c in [0.1, 0.5, 1.0] {
        let r = evaluate_a5(&flow, &|_| c, c, &[])?;
        println!("C = {c}: {:.8} (flow form) {:.8} (substituted), expected {:.8}", r.value_flow_form, r.value_cov_form, 1.0 / c);
    }

    let reference = ModelParameters::reference(Phi::symmetric_beta(2.0)?);
    let r = check_a5(&reference, &flow)?;
    println!("\nreference rates: {:?}, value {:.6}, truncation error bound {:.1e}", r.verdict, r.value_cov_form, r.truncation_error_bound);

    // a death rate spreading faster than division compensates
    let spread = reference.clone().with_mu(RateFunction::custom("0.1 + 0.6 z", |z| 0.1 + 0.6 * z))?;
    let r = check_a5(&spread, &flow)?;
    println!("mu = 0.1 + 0.6 z: {:?}; truncated values:", r.verdict);
    for (k, v) in &r.truncated {
        println!("  |s| <= {k:>4}: {v:.4e}");
    }

    for (label, p) in [("logistic", &reference), ("mu spread", &spread)] {
        let s = check_a5_sufficient(p);
        println!(
            "{label:>10}: decay from {:?}, growth exponent near 0 = {:.3}, sufficient = {}",
            s.decay_from,
            s.fitted_exponent,
            s.passed()
        );
    }
    Ok(())
}
