//! Ergodic-average estimators: Liouville references, horocycle Birkhoff
//! averages, the geodesic-piece mixing average and the perturbed-flow
//! average `I(ε, b, T)` with its horocycle surrogate.

use std::f64::consts::SQRT_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperbolic::{
    from_chart_direction, geodesic_flow, geodesic_flow_chart, unit_horocycle_unstable, ChartPhasePoint,
    GroupElement,
};
use crate::observable::{Observable, ObservableKind};
use crate::perturbed::{perturbed_flow, IntegratorConfig};
use crate::potential::StencilConfig;
use crate::quadrature::GaussLegendre;
use crate::quotient::FuchsianGroup;
use crate::stability::{check_unit, poly_pn, reference_point, QuadratureConfig};

/// Longest horocycle step taken before re-reducing into the domain.
pub const HOROCYCLE_CHUNK: f64 = 1.0;
const PANEL_NODES: usize = 16;
const CHECK_NODES: usize = 8;

/// Walks forward along a unit-speed unstable horocycle, reducing after
/// every chunk so matrix entries stay bounded.
#[derive(Debug, Clone)]
pub struct HorocycleWalker<'a> {
    group: &'a FuchsianGroup,
    current: GroupElement,
    tau: f64,
}

impl<'a> HorocycleWalker<'a> {
    pub fn new(group: &'a FuchsianGroup, start: &GroupElement) -> Result<Self> {
        Ok(Self { group, current: group.reduce(start)?.g, tau: 0.0 })
    }

    pub fn position(&self) -> f64 {
        self.tau
    }

    pub fn current(&self) -> &GroupElement {
        &self.current
    }

    pub fn advance_to(&mut self, tau: f64) -> Result<&GroupElement> {
        if tau < self.tau {
            return Err(Error::InvalidInput(format!("horocycle walker cannot move back from {} to {tau}", self.tau)));
        }
        while self.tau < tau {
            let step = (tau - self.tau).min(HOROCYCLE_CHUNK);
            let next = unit_horocycle_unstable(&self.current, step);
            self.current = self.group.reduce(&next)?.g;
            self.tau = if step == HOROCYCLE_CHUNK { self.tau + step } else { tau };
        }
        Ok(&self.current)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiouvilleReference {
    pub mean: f64,
    pub mc_error: f64,
    pub n: usize,
    pub seed: u64,
}

/// Monte Carlo mean of `a` over Liouville samples; error is `std/√n`.
pub fn liouville_average(a: &Observable, n: usize, seed: u64) -> Result<LiouvilleReference> {
    if n < 1000 {
        return Err(Error::InvalidInput(format!("Liouville average needs n >= 1000, got {n}")));
    }
    let samples = a.potential().group().sample_liouville(n, seed)?;
    let values: Vec<f64> = samples.par_iter().map(|g| a.eval(g)).collect();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
    Ok(LiouvilleReference { mean, mc_error: (var / n as f64).sqrt(), n, seed })
}

/// A quadrature estimate with an error indicator from a coarser rule on the
/// same panels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub quad_error: f64,
}

struct PanelRules {
    fine: GaussLegendre,
    coarse: GaussLegendre,
}

impl PanelRules {
    fn new() -> Self {
        Self { fine: GaussLegendre::new(PANEL_NODES), coarse: GaussLegendre::new(CHECK_NODES) }
    }

    /// Fine and coarse integrals of `f` over `[a, b]`.
    fn both<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> (f64, f64) {
        (self.fine.integrate(a, b, &mut f), self.coarse.integrate(a, b, &mut f))
    }
}

/// `∫_{t0}^{t1} a(H_u^τ ρ) dτ` over unit panels, walking from `walker`'s
/// position (which must be `≤ t0`).
fn horocycle_integral(
    a: &Observable,
    walker: &mut HorocycleWalker<'_>,
    t0: f64,
    t1: f64,
    rules: &PanelRules,
) -> Result<(f64, f64)> {
    let panels = ((t1 - t0) / HOROCYCLE_CHUNK).ceil().max(1.0) as usize;
    let width = (t1 - t0) / panels as f64;
    let (mut fine, mut coarse) = (0.0, 0.0);
    for k in 0..panels {
        let lo = t0 + k as f64 * width;
        let base = *walker.advance_to(lo)?;
        let (f, c) = rules.both(0.0, width, |x| a.eval(&unit_horocycle_unstable(&base, x)));
        fine += f;
        coarse += c;
    }
    Ok((fine, coarse))
}

/// `(1/T) ∫₀^T a(H_u^τ ρ) dτ` along the unit-speed unstable horocycle.
pub fn horocycle_birkhoff(a: &Observable, rho: &GroupElement, t: f64) -> Result<Estimate> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("horocycle window must be positive, got {t}")));
    }
    if a.kind() == ObservableKind::One {
        return Ok(Estimate { value: 1.0, quad_error: 0.0 });
    }
    let mut walker = HorocycleWalker::new(a.potential().group(), rho)?;
    let (f, c) = horocycle_integral(a, &mut walker, 0.0, t, &PanelRules::new())?;
    Ok(Estimate { value: f / t, quad_error: (f - c).abs() / t })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingAverage {
    /// `(1/b) ∫₀^b a(H_u^s G₀^t ρ) dt`.
    pub value: f64,
    pub quad_error: f64,
    /// Horocycle window average `∫_{s e^{-b}}^{s} a(H_u^τ ρ) dτ / (s(1 − e^{-b}))`
    /// obtained by dropping the geodesic factor after `τ = s e^{-t}`.
    pub change_of_variables: f64,
    /// `|value − change_of_variables|`, of order `b`.
    pub discrepancy: f64,
}

/// Average of `a` over the image under `H_u^s` of a geodesic piece of length `b`.
///
/// Uses `H_u^s ∘ G₀^t = G₀^t ∘ H_u^{s e^{-t}}`, integrating in `τ = s e^{-t}`
/// so that a single horocycle walk serves every node.
pub fn mixing_average(a: &Observable, rho: &GroupElement, b: f64, s: f64) -> Result<MixingAverage> {
    if !(b > 0.0 && b <= 1.0) {
        return Err(Error::InvalidInput(format!("b must lie in (0, 1], got {b}")));
    }
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::InvalidInput(format!("s must be non-negative, got {s}")));
    }
    if a.kind() == ObservableKind::One {
        return Ok(MixingAverage { value: 1.0, quad_error: 0.0, change_of_variables: 1.0, discrepancy: 0.0 });
    }
    let rules = PanelRules::new();
    if s == 0.0 {
        let eval = |t: f64| a.eval(&geodesic_flow(rho, t).expect("t <= 1"));
        let (f, c) = rules.both(0.0, b, eval);
        let v = f / b;
        return Ok(MixingAverage { value: v, quad_error: (f - c).abs() / b, change_of_variables: v, discrepancy: 0.0 });
    }
    let lo = s * (-b).exp();
    let mut walker = HorocycleWalker::new(a.potential().group(), rho)?;
    let panels = ((s - lo) / HOROCYCLE_CHUNK).ceil().max(1.0) as usize;
    let width = (s - lo) / panels as f64;
    let (mut fine, mut coarse, mut plain) = (0.0, 0.0, 0.0);
    for k in 0..panels {
        let p0 = lo + k as f64 * width;
        let base = *walker.advance_to(p0)?;
        let point = |x: f64| unit_horocycle_unstable(&base, x);
        let (f, c) = rules.both(0.0, width, |x| {
            let tau = p0 + x;
            let g = geodesic_flow(&point(x), (s / tau).ln()).expect("t <= b");
            a.eval(&g) / tau
        });
        fine += f;
        coarse += c;
        plain += rules.fine.integrate(0.0, width, |x| a.eval(&point(x)));
    }
    let value = fine / b;
    let change_of_variables = plain / (s - lo);
    Ok(MixingAverage {
        value,
        quad_error: (fine - coarse).abs() / b,
        change_of_variables,
        discrepancy: (value - change_of_variables).abs(),
    })
}

/// Parameters of the perturbed equidistribution experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentParams {
    pub eps0: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub c: f64,
    pub j: usize,
    pub eta0: f64,
}

impl ExperimentParams {
    /// Piece length `b = ε₀^{ν₂}`.
    pub fn b(&self) -> f64 {
        self.eps0.powf(self.nu2)
    }

    /// Flow time `T = c |log ε₀|`.
    pub fn t(&self) -> f64 {
        self.c * self.eps0.ln().abs()
    }

    /// Checks `1 + ν₁ + (3J+1)ν₂ < c < 3/2` and the ranges of the remaining
    /// parameters. The message names the violated constraint.
    pub fn validate(&self) -> Result<()> {
        if !(self.eps0 > 0.0 && self.eps0 < 1.0) {
            return Err(Error::InvalidInput(format!("eps0 must lie in (0, 1), got {}", self.eps0)));
        }
        if !(self.nu1 >= 0.0 && self.nu2 > 0.0) {
            return Err(Error::InvalidInput("constraint nu1 >= 0 and nu2 > 0 violated".into()));
        }
        if !(self.eta0 > 0.0) {
            return Err(Error::InvalidInput("eta0 must be positive".into()));
        }
        if !(self.c < 1.5) {
            return Err(Error::InvalidInput(format!("constraint c < 3/2 violated: c = {}", self.c)));
        }
        let lower = 1.0 + self.nu1 + (3.0 * self.j as f64 + 1.0) * self.nu2;
        if !(lower < self.c) {
            return Err(Error::InvalidInput(format!(
                "constraint 1 + nu1 + (3J+1) nu2 < c violated: {lower} >= {}",
                self.c
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    /// Gauss–Legendre nodes over `s ∈ [0, b]`.
    pub n_quad: usize,
    pub integrator: IntegratorConfig,
    pub stencil: StencilConfig,
    pub quadrature: QuadratureConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_quad: 64,
            integrator: IntegratorConfig::default(),
            stencil: StencilConfig::default(),
            quadrature: QuadratureConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquidistReport {
    pub estimate: f64,
    pub liouville_ref: f64,
    pub deviation: f64,
    pub mc_error: f64,
    /// Difference to the same average on half as many nodes.
    pub quad_error: f64,
    pub eps: f64,
    pub eps0: f64,
    pub b: f64,
    pub t: f64,
    pub c: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub rho0: [f64; 4],
    pub observable: String,
    pub n_quad: usize,
    pub warning: Option<String>,
}

impl EquidistReport {
    /// Error bar on the deviation: Monte Carlo plus quadrature plus integrator tolerance.
    pub fn error_bar(&self, integrator_tol: f64) -> f64 {
        self.mc_error + self.quad_error + integrator_tol
    }
}

fn chart_array(p: &ChartPhasePoint) -> [f64; 4] {
    [p.u, p.v, p.pu, p.pv]
}

fn precondition_warning(a: &Observable, rho0: &ChartPhasePoint, params: &ExperimentParams, cfg: &ExperimentConfig) -> Option<String> {
    match a.potential().in_k_vj(rho0, params.j, params.eta0, &cfg.stencil) {
        Ok(true) => None,
        Ok(false) => Some(format!("precondition: not in K_V^{}({})", params.j, params.eta0)),
        Err(e) => Some(format!("precondition: membership undecided ({e})")),
    }
}

/// `(1/b) ∫₀^b a(G_ε^T(G₀^s ρ₀)) ds` with `b = ε₀^{ν₂}`, `T = c|log ε₀|`.
pub fn main_experiment(
    a: &Observable,
    rho0: &ChartPhasePoint,
    eps: f64,
    params: &ExperimentParams,
    cfg: &ExperimentConfig,
    reference: &LiouvilleReference,
) -> Result<EquidistReport> {
    params.validate()?;
    check_unit(rho0.p0())?;
    let lowest = params.eps0.powf(1.0 + params.nu1);
    if !(eps == 0.0 || (eps >= lowest * (1.0 - 1e-12) && eps <= params.eps0 * (1.0 + 1e-12))) {
        return Err(Error::InvalidInput(format!("eps = {eps} outside [{lowest}, {}]", params.eps0)));
    }
    if cfg.n_quad < 2 {
        return Err(Error::InvalidInput("n_quad must be at least 2".into()));
    }
    let warning = precondition_warning(a, rho0, params, cfg);
    let (b, t) = (params.b(), params.t());
    let integrand = |s: f64| -> Result<f64> {
        let start = geodesic_flow_chart(rho0, s)?;
        let traj = perturbed_flow(a.potential(), &start, eps, t, &cfg.integrator)?;
        Ok(a.eval_chart(&traj.endpoint))
    };
    let average = |n: usize| -> Result<f64> {
        let rule = GaussLegendre::new(n);
        let nodes: Vec<(f64, f64)> = rule.mapped(0.0, b).collect();
        let values = nodes.par_iter().map(|&(s, _)| integrand(s)).collect::<Result<Vec<f64>>>()?;
        Ok(nodes.iter().zip(&values).map(|((_, w), v)| w * v).sum::<f64>() / b)
    };
    let (estimate, coarse) = if a.kind() == ObservableKind::One {
        (1.0, 1.0)
    } else {
        (average(cfg.n_quad)?, average(cfg.n_quad / 2)?)
    };
    Ok(EquidistReport {
        estimate,
        liouville_ref: reference.mean,
        deviation: (estimate - reference.mean).abs(),
        mc_error: reference.mc_error,
        quad_error: (estimate - coarse).abs(),
        eps,
        eps0: params.eps0,
        b,
        t,
        c: params.c,
        nu1: params.nu1,
        nu2: params.nu2,
        rho0: chart_array(rho0),
        observable: a.id().to_string(),
        n_quad: cfg.n_quad,
        warning,
    })
}

/// Horocycle surrogate `(1/b) ∫₀^b a(H_u^{−ε P^N(s) e^{T} / √2}(ρ(ε, T))) ds`
/// around the reference point `ρ(ε, T) = G₀^T H_u^{ε β^u(ρ₀)} ρ₀`.
pub fn reparam_horocycle_average(
    a: &Observable,
    rho0: &ChartPhasePoint,
    eps: f64,
    b: f64,
    t: f64,
    n: usize,
    cfg: &ExperimentConfig,
) -> Result<f64> {
    check_unit(rho0.p0())?;
    if !(b > 0.0) {
        return Err(Error::InvalidInput(format!("b must be positive, got {b}")));
    }
    if a.kind() == ObservableKind::One {
        return Ok(1.0);
    }
    let pot = a.potential();
    let norm = rho0.norm_xi();
    let eps_eff = eps / (norm * norm);
    let poly = if pot.is_zero() || eps == 0.0 { None } else { Some(poly_pn(pot, rho0, n, &cfg.stencil)?) };
    let reference = reference_point(pot, rho0, eps_eff, t, &cfg.quadrature)?;
    let grow = (t * norm).exp();
    let rule = GaussLegendre::new(cfg.n_quad);
    let total: f64 = rule
        .mapped(0.0, b)
        .map(|(s, w)| {
            let shift = poly.as_ref().map_or(0.0, |p| -eps_eff * p.eval(s) * grow / SQRT_2);
            w * a.eval(&unit_horocycle_unstable(&reference, shift))
        })
        .sum();
    Ok(total / b)
}

/// Unperturbed control `(1/b) ∫₀^b a(G₀^{T+s} ρ₀) ds`.
pub fn geodesic_window_average(a: &Observable, rho0: &ChartPhasePoint, b: f64, t: f64, n_quad: usize) -> Result<f64> {
    let g = from_chart_direction(rho0);
    let norm = rho0.norm_xi();
    let rule = GaussLegendre::new(n_quad);
    let mut total = 0.0;
    for (s, w) in rule.mapped(0.0, b) {
        total += w * a.eval(&geodesic_flow(&g, (t + s) * norm)?);
    }
    Ok(total / b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperbolic::to_chart;
    use crate::potential::{default_potential, PotentialField};
    use crate::quotient::bolza_group;
    use std::sync::Arc;

    fn setup() -> (Arc<PotentialField>, GroupElement) {
        let group = Arc::new(bolza_group());
        let pot = Arc::new(default_potential(group.clone()));
        let rho = group.sample_liouville(1, 3).unwrap()[0];
        (pot, rho)
    }

    #[test]
    fn walker_matches_direct_matrix() {
        let (pot, rho) = setup();
        let mut w = HorocycleWalker::new(pot.group(), &rho).unwrap();
        let far = *w.advance_to(37.3).unwrap();
        let direct = unit_horocycle_unstable(&rho, 37.3);
        assert!((pot.eval_v(far.base_point()) - pot.eval_v(direct.base_point())).abs() < 1e-9);
        assert!(w.advance_to(1.0).is_err());
    }

    #[test]
    fn constants_are_exact() {
        let (pot, rho) = setup();
        let one = Observable::new(ObservableKind::One, pot.clone());
        assert_eq!(horocycle_birkhoff(&one, &rho, 50.0).unwrap().value, 1.0);
        assert_eq!(mixing_average(&one, &rho, 0.1, 100.0).unwrap().value, 1.0);
        let r = liouville_average(&one, 1000, 1).unwrap();
        assert_eq!((r.mean, r.mc_error), (1.0, 0.0));
        assert!(liouville_average(&one, 999, 1).is_err());
    }

    #[test]
    fn birkhoff_is_additive() {
        let (pot, rho) = setup();
        let a = Observable::new(ObservableKind::VPullback, pot.clone());
        let full = horocycle_birkhoff(&a, &rho, 40.0).unwrap().value;
        let first = horocycle_birkhoff(&a, &rho, 20.0).unwrap().value;
        let mid = unit_horocycle_unstable(&rho, 20.0);
        let second = horocycle_birkhoff(&a, &mid, 20.0).unwrap().value;
        assert!((full - 0.5 * (first + second)).abs() < 1e-10);
    }

    #[test]
    fn mixing_with_zero_shift_is_a_geodesic_window() {
        let (pot, rho) = setup();
        let a = Observable::new(ObservableKind::VPullback, pot.clone());
        let m = mixing_average(&a, &rho, 0.2, 0.0).unwrap();
        let g = geodesic_window_average(&a, &to_chart(&rho), 0.2, 0.0, 64).unwrap();
        assert!((m.value - g).abs() < 1e-12);
        let far = mixing_average(&a, &rho, 0.1, 50.0).unwrap();
        assert!(far.discrepancy < 0.1);
        assert!(far.quad_error < 1e-6);
    }

    #[test]
    fn parameter_constraints() {
        let ok = ExperimentParams { eps0: 1e-2, nu1: 0.0, nu2: 0.1, c: 1.2, j: 0, eta0: 0.05 };
        ok.validate().unwrap();
        let err = ExperimentParams { c: 1.6, ..ok }.validate().unwrap_err().to_string();
        assert!(err.contains("c < 3/2"), "{err}");
        let err = ExperimentParams { j: 1, ..ok }.validate().unwrap_err().to_string();
        assert!(err.contains("(3J+1)"), "{err}");
    }

    #[test]
    fn unperturbed_experiment_is_a_geodesic_window() {
        let (pot, rho) = setup();
        let a = Observable::new(ObservableKind::VPullback, pot.clone());
        let params = ExperimentParams { eps0: 1e-2, nu1: 0.0, nu2: 0.1, c: 1.2, j: 0, eta0: 0.05 };
        let cfg = ExperimentConfig { n_quad: 16, ..Default::default() };
        let reference = LiouvilleReference { mean: 0.0, mc_error: 0.0, n: 0, seed: 0 };
        let rho0 = to_chart(&rho);
        let r = main_experiment(&a, &rho0, 0.0, &params, &cfg, &reference).unwrap();
        let g = geodesic_window_average(&a, &rho0, params.b(), params.t(), 16).unwrap();
        assert!((r.estimate - g).abs() < 1e-8, "{} vs {g}", r.estimate);
        let one = Observable::new(ObservableKind::One, pot.clone());
        assert_eq!(main_experiment(&one, &rho0, 1e-2, &params, &cfg, &reference).unwrap().estimate, 1.0);
    }

    #[test]
    fn surrogate_without_potential_is_a_point_value() {
        let group = Arc::new(bolza_group());
        let zero = Arc::new(PotentialField::new(vec![], group.clone()).unwrap());
        let a = Observable::new(ObservableKind::CustomBump, zero);
        let rho0 = to_chart(&group.sample_liouville(1, 4).unwrap()[0]);
        let cfg = ExperimentConfig { n_quad: 16, ..Default::default() };
        let v = reparam_horocycle_average(&a, &rho0, 1e-2, 0.5, 5.0, 3, &cfg).unwrap();
        let point = geodesic_flow(&from_chart_direction(&rho0), 5.0).unwrap();
        assert!((v - a.eval(&point)).abs() < 1e-12);
    }
}
