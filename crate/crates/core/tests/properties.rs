use proptest::prelude::*;

use plasmid_spectra::assumptions::evaluate_a5;
use plasmid_spectra::discrete::{build_segregation_table, step_discrete, DiscreteModel};
use plasmid_spectra::flow::FlowMap;
use plasmid_spectra::grid::Grid;
use plasmid_spectra::params::{ModelParameters, Phi, RateFunction};
use plasmid_spectra::pde::{PdeModel, PdeState};

fn density() -> impl Strategy<Value = Phi> {
    prop_oneof![
        Just(Phi::Uniform),
        (1.2f64..8.0).prop_map(|s| Phi::symmetric_beta(s).unwrap()),
        (0.55f64..0.9, 0.2f64..1.0).prop_map(|(p, w)| Phi::bimodal(p, w * (1.0 - p)).unwrap()),
    ]
}

fn logistic(b0: f64) -> FlowMap {
    FlowMap::new(&RateFunction::LogisticGrowth { b0, z0: 1.0 }, 1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernel_mass_is_two(phi in density(), zp in 0.01f64..1.0) {
        let p = ModelParameters::reference(phi).with_oracle_kernel(true);
        prop_assert!((p.kernel.mass(zp) - 2.0).abs() < 1e-8);
    }

    #[test]
    fn kernel_is_symmetric(phi in density(), zp in 0.01f64..1.0, s in 0.001f64..0.999) {
        let p = ModelParameters::reference(phi).with_oracle_kernel(true);
        let z = s * zp;
        let (a, b) = (p.kernel.value(z, zp), p.kernel.value(zp - z, zp));
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn flow_semigroup(b0 in 0.2f64..3.0, z in 1e-4f64..0.999, s in 0.0f64..5.0, t in 0.0f64..5.0) {
        let f = logistic(b0);
        let composed = f.flow(t, f.flow(s, z).unwrap()).unwrap();
        prop_assert!((composed - f.flow(s + t, z).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn flow_is_monotone(b0 in 0.2f64..3.0, z in 1e-4f64..0.99, dz in 1e-4f64..0.009, t in 0.0f64..5.0, dt in 0.01f64..2.0) {
        let f = logistic(b0);
        let base = f.flow(t, z).unwrap();
        prop_assert!(f.flow(t, z + dz).unwrap() >= base);
        prop_assert!(f.flow(t + dt, z).unwrap() >= base);
        prop_assert!(base >= z);
    }

    #[test]
    fn weight_is_additive(b0 in 0.2f64..3.0, x in 0.01f64..0.3, y in 0.3f64..0.6, z in 0.6f64..0.99) {
        let f = logistic(b0);
        let sum = f.weight(x, y).unwrap() + f.weight(y, z).unwrap();
        prop_assert!((sum - f.weight(x, z).unwrap()).abs() < 1e-8 * (1.0 + sum));
    }

    #[test]
    fn segregation_rows(phi in density(), n in 2usize..6, extra in 1usize..60) {
        let top = n + extra;
        let t = build_segregation_table(&phi, n, top).unwrap();
        for j in n..=top {
            let row = t.row(j).unwrap();
            prop_assert!((row.iter().sum::<f64>() - 2.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&r| r >= 0.0));
            for i in 0..=j {
                prop_assert!((row[i] - row[j - i]).abs() < 1e-12);
            }
        }
        prop_assert!(t.row(n - 1).is_none());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn pde_step_balances_mass_and_stays_nonnegative(
        phi in density(),
        beta in 0.1f64..1.0,
        mu in 0.0f64..0.5,
        cells in prop::collection::vec(0.0f64..1.0, 48),
        v0 in 0.0f64..1.0,
        frac in 0.1f64..1.0,
    ) {
        let p = ModelParameters::constant_rates(beta, mu, 1.0, 1.0, 0.01, phi).unwrap().with_oracle_kernel(true);
        let grid = Grid::graded(48, 1.0, Some(p.m)).unwrap();
        let model = PdeModel::new(&p, grid.clone()).unwrap();
        let st = PdeState { u: cells, v0, t: 0.0 };
        let dt = frac * model.max_dt();
        let next = model.step(&st, dt).unwrap();
        let want = dt * model.mass_rate(&model.transport(&st.u, dt));
        let got = grid.mass(&next.u) - grid.mass(&st.u);
        prop_assert!((got - want).abs() <= 1e-6 * grid.mass(&st.u).max(1e-12));
        prop_assert!(next.u.iter().all(|&x| x >= 0.0));
        prop_assert!(next.v0 >= 0.0);
    }

    #[test]
    fn discrete_step_stays_nonnegative(
        phi in density(),
        n in 2usize..5,
        counts in prop::collection::vec(0.0f64..1.0, 41),
    ) {
        let h = 1.0 / 40.0;
        let p = ModelParameters::constant_rates(0.4, 0.1, 1.0, 1.0, n as f64 * h, phi).unwrap().with_oracle_kernel(true);
        let model = DiscreteModel::new(&p, n, h).unwrap();
        let mut st = model.project(|_| 0.0, 0.0);
        prop_assume!(st.x.len() == counts.len());
        st.x = counts;
        let dt = model.default_dt();
        for _ in 0..20 {
            st = step_discrete(&st, &model, dt).unwrap();
            prop_assert!(st.x.iter().all(|&x| x >= 0.0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn a5_value_decreases_with_the_exponent(c in 0.1f64..1.5, dc in 0.05f64..0.5) {
        let f = logistic(1.0);
        let lo = evaluate_a5(&f, &|_| c, c, &[]).unwrap().value_cov_form;
        let hi = evaluate_a5(&f, &|_| c + dc, c + dc, &[]).unwrap().value_cov_form;
        prop_assert!((lo - 1.0 / c).abs() < 1e-4 / c);
        prop_assert!(hi < lo);
    }
}
