use std::sync::{Arc, OnceLock};

use hypflow_core::hyperbolic::{
    from_chart, geodesic_flow, horocycle_stable, horocycle_unstable, sasaki_separation, to_chart,
    ChartPhasePoint, GroupElement,
};
use hypflow_core::perturbed::{perturbed_flow, IntegratorConfig};
use hypflow_core::potential::{default_potential, PotentialField, StencilConfig};
use hypflow_core::quotient::bolza_group;
use hypflow_core::ExperimentParams;
use num_complex::Complex64;
use proptest::prelude::*;

fn potential() -> &'static PotentialField {
    static POT: OnceLock<PotentialField> = OnceLock::new();
    POT.get_or_init(|| default_potential(Arc::new(bolza_group())))
}

fn element() -> impl Strategy<Value = GroupElement> {
    (0.0..std::f64::consts::TAU, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(th, t, s)| {
        GroupElement::rotation(th) * GroupElement::diagonal(t) * GroupElement::upper_unipotent(s)
    })
}

/// Unit-layer point with base point near the fundamental domain.
fn unit_point() -> impl Strategy<Value = ChartPhasePoint> {
    (-0.8..0.8f64, 0.4..2.0f64, 0.0..std::f64::consts::TAU)
        .prop_map(|(u, v, th)| ChartPhasePoint::from_angle(Complex64::new(u, v), th, 1.0))
}

fn rel(a: &GroupElement, b: &GroupElement) -> f64 {
    let scale = a.entries().iter().fold(1.0f64, |m, x| m.max(x.abs()));
    a.distance_entries(b) / scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn flows_are_one_parameter_groups(g in element(), t1 in -2.0..2.0f64, t2 in -2.0..2.0f64) {
        let a = geodesic_flow(&geodesic_flow(&g, t1).unwrap(), t2).unwrap();
        let b = geodesic_flow(&g, t1 + t2).unwrap();
        prop_assert!(rel(&a, &b) < 1e-12);
        let a = horocycle_unstable(&horocycle_unstable(&g, t1), t2);
        prop_assert!(rel(&a, &horocycle_unstable(&g, t1 + t2)) < 1e-12);
        let a = horocycle_stable(&horocycle_stable(&g, t1), t2);
        prop_assert!(rel(&a, &horocycle_stable(&g, t1 + t2)) < 1e-12);
    }

    #[test]
    fn geodesic_conjugates_horocycles(g in element(), t in -3.0..3.0f64, tau in -2.0..2.0f64) {
        let lhs = geodesic_flow(&horocycle_unstable(&g, tau), t).unwrap();
        let rhs = horocycle_unstable(&geodesic_flow(&g, t).unwrap(), t.exp() * tau);
        prop_assert!(rel(&lhs, &rhs) < 1e-12);
        let lhs = geodesic_flow(&horocycle_stable(&g, tau), t).unwrap();
        let rhs = horocycle_stable(&geodesic_flow(&g, t).unwrap(), (-t).exp() * tau);
        prop_assert!(rel(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn chart_round_trip(g in element()) {
        let back = from_chart(&to_chart(&g)).unwrap();
        prop_assert!(sasaki_separation(&g, &back) < 1e-9);
        prop_assert!((to_chart(&g).p0() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn perp_is_orthogonal_and_isometric(p in unit_point()) {
        let q = p.perp();
        prop_assert!(p.cometric(&q).abs() < 1e-12);
        prop_assert!((q.norm_xi() - p.norm_xi()).abs() < 1e-12);
        prop_assert!(q.perp().max_abs_diff(&p.scaled(-1.0)) < 1e-12);
    }

    #[test]
    fn potential_is_gamma_invariant(p in unit_point(), k in 0usize..8) {
        let pot = potential();
        let gamma = pot.group().generators()[k % pot.group().generators().len()];
        let q = p.transport(&gamma);
        prop_assert!((pot.eval_v(q.base()) - pot.eval_v(p.base())).abs() < 1e-10);
        prop_assert!((pot.f_v(&q).unwrap() - pot.f_v(&p).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn gradient_matches_central_difference(u in -0.8..0.8f64, v in 0.4..2.0f64) {
        let pot = potential();
        let h = 1e-5;
        let z = Complex64::new(u, v);
        let (gu, gv) = pot.grad_v(z);
        let fu = (pot.eval_v(z + h) - pot.eval_v(z - h)) / (2.0 * h);
        let fv = (pot.eval_v(z + Complex64::i() * h) - pot.eval_v(z - Complex64::i() * h)) / (2.0 * h);
        prop_assert!((gu - fu).abs() < 1e-6 && (gv - fv).abs() < 1e-6, "{gu} {fu} {gv} {fv}");
    }

    #[test]
    fn rejects_c_at_or_above_three_halves(c in 1.5..3.0f64) {
        let p = ExperimentParams { eps0: 1e-2, nu1: 0.0, nu2: 0.1, c, j: 0, eta0: 0.05 };
        let msg = p.validate().unwrap_err().to_string();
        prop_assert!(msg.contains("c < 3/2"), "{}", msg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn weighted_derivatives_are_binomial_sums(p in unit_point()) {
        let pot = potential();
        let st = StencilConfig::default();
        let j = 3;
        let (Ok(w), Ok(d)) = (pot.flow_derivatives(&p, j, true, &st), pot.flow_derivatives(&p, j, false, &st)) else {
            // unstable stencils are reported, not compared
            return Ok(());
        };
        for m in 0..=j {
            let mut sum = 0.0;
            // each level is accepted up to 10 tol (1 + |d|)
            let slack = |x: f64| 10.0 * st.tol * (1.0 + x.abs());
            let mut err = slack(w[m].value);
            let mut binom = 1.0;
            for k in 0..=m {
                let sign = if (m - k) % 2 == 0 { 1.0 } else { -1.0 };
                sum += sign * binom * d[k].value;
                err += binom * slack(d[k].value);
                binom = binom * (m - k) as f64 / (k + 1) as f64;
            }
            prop_assert!((w[m].value - sum).abs() <= err, "order {m}: {} vs {sum}", w[m].value);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn perturbed_flow_is_reversible(p in unit_point(), t in 0.5..4.0f64) {
        let pot = potential();
        let cfg = IntegratorConfig::default();
        let eps = 1e-2;
        let fwd = perturbed_flow(pot, &p, eps, t, &cfg).unwrap();
        let back = perturbed_flow(pot, &fwd.lift.scaled(-1.0), eps, t, &cfg).unwrap();
        let err = back.lift.scaled(-1.0).max_abs_diff(&p);
        prop_assert!(err < 1e-7, "{err}");
    }
}
