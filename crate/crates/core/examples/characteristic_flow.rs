//! Characteristics of `dz/dt = b(z)` for logistic growth: closed form against
//! the numerical integrator, the semigroup property and the potential `int dz/b`.
//!
//! cargo run --release --example characteristic_flow

use plasmid_spectra::flow::FlowMap;
use plasmid_spectra::params::RateFunction;

fn main() -> plasmid_spectra::Result<()> {
    let b = RateFunction::LogisticGrowth { b0: 1.0, z0: 1.0 };
    let exact = FlowMap::new(&b, 1.0);
    let numeric = FlowMap::numeric(&b, 1.0);
    println!("{:>6} {:>6} {:>18} {:>18}", "t", "z", "closed form", "integrator");
    for &(t, z) in &[(0.5, 0.01), (2.0, 0.01), (5.0, 0.3), (10.0, 0.9)] {
        println!("{t:>6} {z:>6} {:>18.12} {:>18.12}", exact.flow(t, z)?, numeric.flow(t, z)?);
    }

    let (s, t, z) = (1.3, 2.1, 0.05);
    let composed = exact.flow(t, exact.flow(s, z)?)?;
    println!("\nZ(t, Z(s, z)) - Z(s + t, z) = {:e}", composed - exact.flow(s + t, z)?);

    // time to grow from x to z equals the potential difference
    let (x, z) = (0.1, 0.7);
    let w = exact.weight(x, z)?;
    println!("int_x^z dy/b = {w:.12}, flow over that time from x = {:.12}", exact.flow(w, x)?);
    Ok(())
}
