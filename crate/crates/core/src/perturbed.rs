//! Hamiltonian flow of `p_ε = p₀ + εV` in the half-plane chart, and the
//! energy-shell rescaled flow on the unit cotangent bundle.

use num_complex::Complex64;
use ode_solvers::{Dop853, Dopri5, OutputType, System, Vector4};
use serde::{Deserialize, Serialize};
use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::hyperbolic::{cosh_distance, ChartPhasePoint, FrameVector, GroupElement};
use crate::potential::PotentialField;

/// Largest flow time accepted by the integrator.
pub const MAX_PERTURBED_TIME: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// 5 (Dormand–Prince 5(4)) or 8 (DOP853).
    pub order: u8,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Energy is sampled every this many accepted steps.
    pub energy_check_every: usize,
    /// Largest tolerated `|p_ε(t) - p_ε(0)|` (scaled by `max(1, |p_ε|)`).
    pub energy_tol: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            order: 8,
            rel_tol: 1e-13,
            abs_tol: 1e-13,
            max_step: 0.1,
            energy_check_every: 1,
            energy_tol: 1e-9,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.order != 5 && self.order != 8 {
            return Err(Error::InvalidInput(format!("integrator order must be 5 or 8, got {}", self.order)));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.energy_tol > 0.0) {
            return Err(Error::InvalidInput("integrator tolerances must be positive".into()));
        }
        if !(self.max_step > 0.0 && self.max_step <= 0.1) {
            return Err(Error::InvalidInput(format!("max_step must lie in (0, 0.1], got {}", self.max_step)));
        }
        if self.energy_check_every == 0 {
            return Err(Error::InvalidInput("energy_check_every must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryResult {
    /// Endpoint with its base point in the fundamental domain.
    pub endpoint: ChartPhasePoint,
    /// Endpoint on the same sheet as the starting point (no reduction applied).
    pub lift: ChartPhasePoint,
    pub energy_drift: f64,
    pub steps: usize,
    pub reductions: usize,
}

struct Hamiltonian<'a> {
    potential: &'a PotentialField,
    eps: f64,
    energy0: f64,
    check_every: usize,
    reduce_cosh: f64,
    accepted: usize,
    max_drift: f64,
    needs_reduction: bool,
}

impl Hamiltonian<'_> {
    fn energy(&self, y: &Vector4<f64>) -> f64 {
        let kinetic = 0.5 * y[1] * y[1] * (y[2] * y[2] + y[3] * y[3]);
        if self.eps == 0.0 {
            kinetic
        } else {
            kinetic + self.eps * self.potential.eval_v(Complex64::new(y[0], y[1]))
        }
    }
}

impl System<f64, Vector4<f64>> for Hamiltonian<'_> {
    fn system(&self, _t: f64, y: &Vector4<f64>, dy: &mut Vector4<f64>) {
        let (v, pu, pv) = (y[1], y[2], y[3]);
        let v2 = v * v;
        let (gu, gv) = if self.eps == 0.0 {
            (0.0, 0.0)
        } else {
            let j = self.potential.jet(Complex64::new(y[0], v));
            (j.du, j.dv)
        };
        dy[0] = v2 * pu;
        dy[1] = v2 * pv;
        dy[2] = -self.eps * gu;
        dy[3] = -v * (pu * pu + pv * pv) - self.eps * gv;
    }

    fn solout(&mut self, _t: f64, y: &Vector4<f64>, _dy: &Vector4<f64>) -> bool {
        self.accepted += 1;
        if self.accepted % self.check_every == 0 {
            let d = (self.energy(y) - self.energy0).abs();
            self.max_drift = self.max_drift.max(d);
        }
        let z = Complex64::new(y[0], y[1]);
        if !(y[1] > 0.0) || cosh_distance(z, Complex64::i()) > self.reduce_cosh {
            self.needs_reduction = true;
            return true;
        }
        false
    }
}

fn to_state(p: &ChartPhasePoint) -> Vector4<f64> {
    Vector4::new(p.u, p.v, p.pu, p.pv)
}

fn from_state(y: &Vector4<f64>) -> ChartPhasePoint {
    ChartPhasePoint::new(y[0], y[1], y[2], y[3])
}

fn integrate_segment(sys: &mut Hamiltonian<'_>, t0: f64, t1: f64, y: Vector4<f64>, cfg: &IntegratorConfig) -> Result<(f64, Vector4<f64>)> {
    // the solver takes ownership of the system; run it on a borrowed shim
    struct Shim<'s, 'a>(&'s mut Hamiltonian<'a>);
    impl System<f64, Vector4<f64>> for Shim<'_, '_> {
        fn system(&self, t: f64, y: &Vector4<f64>, dy: &mut Vector4<f64>) {
            self.0.system(t, y, dy)
        }
        fn solout(&mut self, t: f64, y: &Vector4<f64>, dy: &Vector4<f64>) -> bool {
            self.0.solout(t, y, dy)
        }
    }
    let shim = Shim(sys);
    let span = (t1 - t0).abs();
    let h_max = cfg.max_step.min(span.max(f64::MIN_POSITIVE));
    let map_err = |e: ode_solvers::dop_shared::IntegrationError| Error::Integration(e.to_string());
    let (ts, ys) = if cfg.order == 8 {
        let mut s = Dop853::from_param(
            shim, t0, t1, span, y, cfg.rel_tol, cfg.abs_tol, 0.9, 0.0, 0.333, 6.0, h_max, 0.0, 1_000_000, 1000,
            OutputType::Sparse,
        );
        s.integrate().map_err(map_err)?;
        (s.x_out().clone(), s.y_out().clone())
    } else {
        let mut s = Dopri5::from_param(
            shim, t0, t1, span, y, cfg.rel_tol, cfg.abs_tol, 0.9, 0.04, 0.2, 10.0, h_max, 0.0, 1_000_000, 1000,
            OutputType::Sparse,
        );
        s.integrate().map_err(map_err)?;
        (s.x_out().clone(), s.y_out().clone())
    };
    match (ts.last(), ys.last()) {
        (Some(&t), Some(&y)) => Ok((t, y)),
        _ => Err(Error::Integration("solver produced no output".into())),
    }
}

/// Halvings of `max_step` tried after the energy gate trips.
pub const STEP_REFINEMENTS: usize = 2;

/// Integrates Hamilton's equations of `v²|p|²/2 + εV` for time `t`.
///
/// The base point is brought back to the fundamental domain whenever it leaves
/// a 2-neighborhood of it; the covector is transported exactly. If the energy
/// drift exceeds the gate, the run is repeated with `max_step` halved, up to
/// [`STEP_REFINEMENTS`] times: the error estimator can step over the steep
/// bump edges with the coarse cap.
pub fn perturbed_flow(
    potential: &PotentialField,
    rho: &ChartPhasePoint,
    eps: f64,
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<TrajectoryResult> {
    cfg.validate()?;
    let mut run = *cfg;
    let mut refinements = 0;
    loop {
        match flow_once(potential, rho, eps, t, &run) {
            Err(Error::EnergyDriftExceeded { .. }) if refinements < STEP_REFINEMENTS => {
                run.max_step *= 0.5;
                refinements += 1;
            }
            other => return other,
        }
    }
}

fn flow_once(
    potential: &PotentialField,
    rho: &ChartPhasePoint,
    eps: f64,
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<TrajectoryResult> {
    if !(eps >= 0.0) {
        return Err(Error::InvalidInput(format!("perturbation size must be non-negative, got {eps}")));
    }
    if !(t.abs() <= MAX_PERTURBED_TIME) {
        return Err(Error::FlowTimeOverflow(t));
    }
    if !rho.is_finite() || !(rho.v > 0.0) {
        return Err(Error::InvalidInput("starting point must be finite with v > 0".into()));
    }
    let group = potential.group().clone();
    let reduce_radius = group.domain_radius() + 2.0;
    let mut sys = Hamiltonian {
        potential,
        eps,
        energy0: 0.0,
        check_every: cfg.energy_check_every,
        reduce_cosh: reduce_radius.cosh(),
        accepted: 0,
        max_drift: 0.0,
        needs_reduction: false,
    };
    sys.energy0 = sys.energy(&to_state(rho));

    let mut total = GroupElement::identity();
    let mut reductions = 0;
    let mut cur = *rho;
    // start from the domain so chart coordinates stay well conditioned
    if cosh_distance(cur.base(), Complex64::i()) > sys.reduce_cosh {
        let (_, gamma) = group.reduce_point(cur.base())?;
        cur = cur.transport(&gamma);
        total = gamma;
        reductions += 1;
    }
    let mut time = 0.0;
    let mut guard = 0;
    while t != 0.0 && (t - time).abs() > 1e-14 * t.abs().max(1.0) {
        sys.needs_reduction = false;
        let (t_reached, y) = integrate_segment(&mut sys, time, t, to_state(&cur), cfg)?;
        cur = from_state(&y);
        time = t_reached;
        if !cur.is_finite() || !(cur.v > 0.0) {
            return Err(Error::Integration(format!("trajectory left the chart at t = {time}")));
        }
        if sys.needs_reduction {
            let (_, gamma) = group.reduce_point(cur.base())?;
            cur = cur.transport(&gamma);
            total = gamma * total;
            reductions += 1;
        }
        guard += 1;
        if guard > 100_000 {
            return Err(Error::Integration("too many integration segments".into()));
        }
    }
    let end_drift = (sys.energy(&to_state(&cur)) - sys.energy0).abs();
    let drift = sys.max_drift.max(end_drift);
    let limit = cfg.energy_tol * sys.energy0.abs().max(1.0);
    if !(drift <= limit) {
        return Err(Error::EnergyDriftExceeded { drift, limit });
    }
    let lift = cur.transport(&total.inverse());
    let (_, gamma) = group.reduce_point(cur.base())?;
    let endpoint = cur.transport(&gamma);
    Ok(TrajectoryResult { endpoint, lift, energy_drift: drift, steps: sys.accepted, reductions })
}

/// `p_ε` at a phase point.
pub fn perturbed_energy(potential: &PotentialField, p: &ChartPhasePoint, eps: f64) -> f64 {
    let v = if eps == 0.0 { 0.0 } else { potential.eval_v(p.base()) };
    p.p0() + eps * v
}

/// Lifts a unit-layer point onto the `p_ε` energy layer of `anchor`.
pub fn lift_to_layer(potential: &PotentialField, rho: &ChartPhasePoint, anchor: &ChartPhasePoint, eps: f64) -> Result<ChartPhasePoint> {
    let e1 = perturbed_energy(potential, anchor, eps);
    let pot = if eps == 0.0 { 0.0 } else { eps * potential.eval_v(rho.base()) };
    if !(e1 - pot > 0.0) {
        return Err(Error::NegativeRadicand { anchor_energy: e1, potential_term: pot });
    }
    Ok(rho.normalized().scaled((2.0 * (e1 - pot)).sqrt()))
}

/// Projects a point to the unit layer by rescaling its covector.
pub fn project_to_unit(p: &ChartPhasePoint) -> ChartPhasePoint {
    p.normalized()
}

/// Rescaled flow on the unit layer: lift to the energy layer of `anchor`,
/// run the perturbed flow for time `t/‖ξ₁‖`, project back.
pub fn rescaled_flow(
    potential: &PotentialField,
    rho: &ChartPhasePoint,
    anchor: &ChartPhasePoint,
    eps: f64,
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<TrajectoryResult> {
    let lifted = lift_to_layer(potential, rho, anchor, eps)?;
    let mut r = perturbed_flow(potential, &lifted, eps, t / anchor.norm_xi(), cfg)?;
    r.endpoint = r.endpoint.normalized();
    r.lift = r.lift.normalized();
    Ok(r)
}

/// Generator of the rescaled flow in the Anosov frame, with its speed factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RescaledField {
    pub speed: f64,
    pub field: FrameVector,
}

/// `c·X₀ + κ(X^u − X^s)` with `κ = ε f_V / (√2 c ‖ξ₁‖²)`.
pub fn rescaled_vector_field(
    potential: &PotentialField,
    rho: &ChartPhasePoint,
    anchor: &ChartPhasePoint,
    eps: f64,
) -> Result<RescaledField> {
    let rho = rho.normalized();
    let n1 = anchor.norm_xi();
    let p01 = anchor.p0();
    let e1 = perturbed_energy(potential, anchor, eps);
    let pot = if eps == 0.0 { 0.0 } else { eps * potential.eval_v(rho.base()) };
    if !(e1 - pot > 0.0) {
        return Err(Error::NegativeRadicand { anchor_energy: e1, potential_term: pot });
    }
    let c = ((e1 - pot) / p01).sqrt();
    let kappa = if eps == 0.0 { 0.0 } else { eps * potential.f_v_unchecked(&rho) / (SQRT_2 * c * n1 * n1) };
    Ok(RescaledField { speed: c, field: FrameVector::new(c, -kappa, kappa) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperbolic::{from_chart, geodesic_flow, sasaki_separation, to_chart};
    use crate::potential::default_potential;
    use crate::quotient::bolza_group;
    use std::sync::Arc;

    fn setup() -> PotentialField {
        default_potential(Arc::new(bolza_group()))
    }

    #[test]
    fn zero_time_is_identity() {
        let p = setup();
        let rho = to_chart(&GroupElement::rotation(0.3));
        let r = perturbed_flow(&p, &rho, 1e-2, 0.0, &IntegratorConfig::default()).unwrap();
        assert_eq!(r.lift, rho);
    }

    #[test]
    fn unperturbed_matches_exact_flow() {
        let p = setup();
        let g = GroupElement::rotation(1.1);
        let r = perturbed_flow(&p, &to_chart(&g), 0.0, 3.0, &IntegratorConfig::default()).unwrap();
        let exact = geodesic_flow(&g, 3.0).unwrap();
        let got = from_chart(&r.lift.normalized()).unwrap();
        assert!(sasaki_separation(&exact, &got) < 1e-8);
    }

    #[test]
    fn energy_is_conserved() {
        let p = setup();
        let rho = to_chart(&GroupElement::rotation(2.0));
        let r = perturbed_flow(&p, &rho, 1e-2, 10.0, &IntegratorConfig::default()).unwrap();
        assert!(r.energy_drift <= 1e-9, "drift {}", r.energy_drift);
        assert!(r.reductions > 0);
    }

    #[test]
    fn config_is_validated() {
        let cfg = IntegratorConfig { max_step: 0.5, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = IntegratorConfig { order: 4, ..Default::default() };
        assert!(cfg.validate().is_err());
        let p = setup();
        let rho = to_chart(&GroupElement::identity());
        assert!(matches!(
            perturbed_flow(&p, &rho, 0.0, 60.0, &IntegratorConfig::default()),
            Err(Error::FlowTimeOverflow(_))
        ));
    }

    #[test]
    fn unperturbed_field_is_the_geodesic_generator() {
        let p = setup();
        let rho = to_chart(&GroupElement::rotation(0.2));
        let y = rescaled_vector_field(&p, &rho, &rho, 0.0).unwrap();
        assert_eq!(y.field, FrameVector::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn lift_and_projection_are_inverse() {
        let p = setup();
        let rho = to_chart(&GroupElement::rotation(0.7));
        let anchor = rho.scaled(1.02);
        let lifted = lift_to_layer(&p, &rho, &anchor, 1e-2).unwrap();
        assert!(project_to_unit(&lifted).max_abs_diff(&rho) < 1e-12);
        // a base point where V exceeds its anchor value makes large ε infeasible
        let hot = (0..64)
            .map(|k| to_chart(&crate::hyperbolic::geodesic_flow(&GroupElement::rotation(0.1 * k as f64), 1.0).unwrap()))
            .find(|q| p.eval_v(q.base()) > p.eval_v(anchor.base()) + 0.05)
            .unwrap();
        assert!(matches!(lift_to_layer(&p, &hot, &anchor, 1e3), Err(Error::NegativeRadicand { .. })));
    }
}
