//! Exponentially weighted transforms of `f_V` along the geodesic flow, the
//! reparametrization polynomial, and the structural-stability comparison.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::fit_constant;
use crate::hyperbolic::{
    from_chart_direction, geodesic_flow, geodesic_flow_chart, to_chart, unit_horocycle_stable,
    unit_horocycle_unstable, ChartPhasePoint, GroupElement,
};
use crate::observable::Observable;
use crate::perturbed::{rescaled_flow, IntegratorConfig};
use crate::potential::{PotentialField, StencilConfig, MAX_DERIVATIVE_ORDER};
use crate::quadrature::{panel_nodes, GaussLegendre};

/// Allowed deviation of `p₀` from 1/2 for near-unit points.
pub const NEAR_UNIT_TOL: f64 = 0.05;
/// Exponent `γ` in the predicted comparison bound.
pub const BOUND_GAMMA: f64 = 0.45;

const NODES_PER_PANEL: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Truncation time of the half-line integrals.
    pub t_max: f64,
    /// Total number of Gauss–Legendre nodes on `[0, t_max]`.
    pub n_quad: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { t_max: 30.0, n_quad: 2048 }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_max >= 20.0) {
            return Err(Error::InvalidInput(format!("t_max must be at least 20, got {}", self.t_max)));
        }
        if self.n_quad < 200 {
            return Err(Error::InvalidInput(format!("n_quad must be at least 200, got {}", self.n_quad)));
        }
        Ok(())
    }

    fn panels(&self) -> usize {
        self.n_quad.div_ceil(NODES_PER_PANEL)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaValue {
    pub value: f64,
    /// Bound on the neglected tail `∫_{t_max}^∞`.
    pub tail_bound: f64,
}

fn weighted_integral(potential: &PotentialField, g: &GroupElement, a: f64, b: f64, panels: usize, backward: bool) -> f64 {
    let rule = GaussLegendre::new(NODES_PER_PANEL);
    let sign = if backward { -1.0 } else { 1.0 };
    panel_nodes(&rule, a, b, panels)
        .into_iter()
        .map(|(tau, w)| {
            let h = geodesic_flow(g, sign * tau).expect("quadrature times are bounded");
            w * (-tau).exp() * potential.f_v_at(&h)
        })
        .sum()
}

pub(crate) fn check_unit(p0: f64) -> Result<()> {
    if !((p0 - 0.5).abs() <= NEAR_UNIT_TOL) {
        return Err(Error::OffShell { p0, expected: 0.5 });
    }
    Ok(())
}

/// `(1/√2) ∫₀^∞ f_V(G₀^τ ρ) e^{-τ} dτ`.
pub fn beta_u(potential: &PotentialField, g: &GroupElement, cfg: &QuadratureConfig) -> Result<BetaValue> {
    beta_impl(potential, g, cfg, false)
}

/// `(1/√2) ∫₀^∞ f_V(G₀^{-τ} ρ) e^{-τ} dτ`.
pub fn beta_s(potential: &PotentialField, g: &GroupElement, cfg: &QuadratureConfig) -> Result<BetaValue> {
    beta_impl(potential, g, cfg, true)
}

fn beta_impl(potential: &PotentialField, g: &GroupElement, cfg: &QuadratureConfig, backward: bool) -> Result<BetaValue> {
    cfg.validate()?;
    if potential.is_zero() {
        return Ok(BetaValue { value: 0.0, tail_bound: 0.0 });
    }
    let v = weighted_integral(potential, g, 0.0, cfg.t_max, cfg.panels(), backward) / SQRT_2;
    let tail_bound = potential.sup_f_v_bound() * (-cfg.t_max).exp() / SQRT_2;
    Ok(BetaValue { value: v, tail_bound })
}

/// `(1/√2) ∫₀^s e^{-τ} f_V(G₀^τ ρ) dτ` with panels of width at most 1/4.
pub fn partial_transform(potential: &PotentialField, g: &GroupElement, s: f64) -> f64 {
    if s == 0.0 || potential.is_zero() {
        return 0.0;
    }
    let panels = ((4.0 * s.abs()).ceil() as usize).max(1);
    weighted_integral(potential, g, 0.0, s, panels, false) / SQRT_2
}

/// `|e^{-s} β^u(G₀^s ρ) − β^u(ρ) + (1/√2)∫₀^s e^{-τ} f_V(G₀^τ ρ) dτ|`.
pub fn beta_u_cocycle_residual(potential: &PotentialField, g: &GroupElement, s: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if !(s.abs() <= 5.0) {
        return Err(Error::InvalidInput(format!("cocycle shift must satisfy |s| <= 5, got {s}")));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    let b0 = beta_u(potential, g, cfg)?.value;
    let b1 = beta_u(potential, &geodesic_flow(g, s)?, cfg)?.value;
    Ok(((-s).exp() * b1 - b0 + partial_transform(potential, g, s)).abs())
}

/// `P(s) = Σ_{p<N} (‖ξ₀‖s)^{p+1}/(p+1)! · (X₀−1)^p f_V(x₀, ξ₀/‖ξ₀‖)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowPolynomial {
    /// Weighted flow derivatives `(X₀−1)^p f_V` at the unit point, `p < N`.
    pub derivatives: Vec<f64>,
    /// Stencil error estimates of `derivatives`.
    pub errors: Vec<f64>,
    /// `‖ξ₀‖`.
    pub norm: f64,
}

impl FlowPolynomial {
    pub fn from_derivatives(derivatives: Vec<f64>, norm: f64) -> Self {
        let errors = vec![0.0; derivatives.len()];
        Self { derivatives, errors, norm }
    }

    pub fn order(&self) -> usize {
        self.derivatives.len()
    }

    /// The polynomial of order `min(n, N)` built from the same derivatives.
    pub fn truncated(&self, n: usize) -> Self {
        let k = n.min(self.order());
        Self { derivatives: self.derivatives[..k].to_vec(), errors: self.errors[..k].to_vec(), norm: self.norm }
    }

    /// Coefficients `c_0 = 0, c_1, …, c_N` of `P`.
    pub fn coeffs(&self) -> Vec<f64> {
        let mut c = vec![0.0];
        let mut fact = 1.0;
        for (p, d) in self.derivatives.iter().enumerate() {
            fact *= (p + 1) as f64;
            c.push(self.norm.powi(p as i32 + 1) / fact * d);
        }
        c
    }

    /// Coefficients `d_0, …, d_{N−1}` of `P'`.
    pub fn derivative_coeffs(&self) -> Vec<f64> {
        let mut c = Vec::with_capacity(self.order());
        let mut fact = 1.0;
        for (p, d) in self.derivatives.iter().enumerate() {
            if p > 0 {
                fact *= p as f64;
            }
            c.push(self.norm.powi(p as i32 + 1) / fact * d);
        }
        c
    }

    pub fn eval(&self, s: f64) -> f64 {
        horner(&self.coeffs(), s)
    }

    pub fn eval_derivative(&self, s: f64) -> f64 {
        horner(&self.derivative_coeffs(), s)
    }
}

pub fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Reparametrization polynomial at a near-unit point.
pub fn poly_pn(potential: &PotentialField, rho0: &ChartPhasePoint, n: usize, cfg: &StencilConfig) -> Result<FlowPolynomial> {
    if n == 0 || n > MAX_DERIVATIVE_ORDER {
        return Err(Error::InvalidInput(format!("polynomial order must lie in 1..={MAX_DERIVATIVE_ORDER}, got {n}")));
    }
    check_unit(rho0.p0())?;
    let unit = rho0.normalized();
    let d = potential.flow_derivatives(&unit, n - 1, true, cfg)?;
    Ok(FlowPolynomial {
        derivatives: d.iter().map(|x| x.value).collect(),
        errors: d.iter().map(|x| x.error).collect(),
        norm: rho0.norm_xi(),
    })
}

/// `|e^{-s‖ξ₀‖} β^u(G₀^{s‖ξ₀‖} ρ̂₀) − β^u(ρ̂₀) + P(s)/√2|`.
pub fn taylor_residual(
    potential: &PotentialField,
    rho0: &ChartPhasePoint,
    poly: &FlowPolynomial,
    s: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let g = from_chart_direction(rho0);
    let t = s * rho0.norm_xi();
    let b0 = beta_u(potential, &g, cfg)?.value;
    let b1 = beta_u(potential, &geodesic_flow(&g, t)?, cfg)?.value;
    Ok(((-t).exp() * b1 - b0 + poly.eval(s) / SQRT_2).abs())
}

/// `G₀^{T‖ξ₀‖} ∘ H_u^{ε β^u(ρ̂₀)} (ρ̂₀)` with unit-speed horocycle time.
pub fn reference_point(
    potential: &PotentialField,
    rho0: &ChartPhasePoint,
    eps: f64,
    t: f64,
    cfg: &QuadratureConfig,
) -> Result<GroupElement> {
    let g = from_chart_direction(rho0);
    let shift = if eps == 0.0 { 0.0 } else { eps * beta_u(potential, &g, cfg)?.value };
    geodesic_flow(&unit_horocycle_unstable(&g, shift), t * rho0.norm_xi())
}

/// First-order inverse of the conjugacy between the rescaled flow anchored
/// at `anchor` and the geodesic flow: unit-speed unstable then stable
/// horocycle steps of sizes `εβ^u/‖ξ₁‖²` and `εβ^s/‖ξ₁‖²`.
pub fn approx_inverse_conjugacy(
    potential: &PotentialField,
    g: &GroupElement,
    anchor: &ChartPhasePoint,
    eps: f64,
    cfg: &QuadratureConfig,
) -> Result<GroupElement> {
    if eps == 0.0 || potential.is_zero() {
        return Ok(*g);
    }
    let n2 = 2.0 * anchor.p0();
    let bu = beta_u(potential, g, cfg)?.value;
    let bs = beta_s(potential, g, cfg)?.value;
    let after_u = unit_horocycle_unstable(g, eps * bu / n2);
    Ok(unit_horocycle_stable(&after_u, eps * bs / n2))
}

/// `ε T + ε^{1+γ} e^{T‖ξ₀‖} + s + s^{N+1} ε e^{T‖ξ₀‖}`.
pub fn bound_shape(eps: f64, s: f64, t: f64, n: usize, norm: f64) -> f64 {
    let grow = (t * norm).exp();
    eps * t + eps.powf(1.0 + BOUND_GAMMA) * grow + s + s.powi(n as i32 + 1) * eps * grow
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityComparison {
    pub eps: f64,
    pub s: f64,
    pub t: f64,
    pub n: usize,
    /// Observable through the rescaled perturbed flow.
    pub lhs: f64,
    /// Observable through the reparametrized horocycle, first-order consistent form.
    pub rhs: f64,
    /// Same with the outer geodesic step and the `1/√2` omitted.
    pub rhs_plain: f64,
    pub gap: f64,
    pub gap_plain: f64,
    /// Shape of the predicted bound; multiply by a fitted `C₁`.
    pub shape: f64,
    /// `C₁ · shape` once `C₁` is known, otherwise `NaN`.
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonSetup<'a> {
    pub quadrature: &'a QuadratureConfig,
    pub integrator: &'a IntegratorConfig,
    pub stencil: &'a StencilConfig,
}

/// Both sides of the structural-stability approximation at one parameter tuple.
#[allow(clippy::too_many_arguments)]
pub fn stability_comparison(
    potential: &PotentialField,
    rho0: &ChartPhasePoint,
    eps: f64,
    s: f64,
    t: f64,
    n: usize,
    a: &Observable,
    setup: &ComparisonSetup<'_>,
) -> Result<StabilityComparison> {
    check_unit(rho0.p0())?;
    let poly = poly_pn(potential, rho0, n, setup.stencil)?;
    stability_comparison_with(potential, rho0, &poly, eps, s, t, a, setup)
}

/// As [`stability_comparison`] with a precomputed polynomial.
#[allow(clippy::too_many_arguments)]
pub fn stability_comparison_with(
    potential: &PotentialField,
    rho0: &ChartPhasePoint,
    poly: &FlowPolynomial,
    eps: f64,
    s: f64,
    t: f64,
    a: &Observable,
    setup: &ComparisonSetup<'_>,
) -> Result<StabilityComparison> {
    let norm = rho0.norm_xi();
    let unit = rho0.normalized();
    let g0 = from_chart_direction(&unit);
    // lhs: rescaled flow anchored on G₀^s(x₀, ξ₀), started at G₀^{s‖ξ₀‖} ρ̂₀
    let anchor = geodesic_flow_chart(rho0, s)?;
    let start = to_chart(&geodesic_flow(&g0, s * norm)?);
    let traj = rescaled_flow(potential, &start, &anchor, eps, t * norm, setup.integrator)?;
    let lhs = a.eval_chart(&traj.endpoint);

    let grow = (t * norm).exp();
    let p = poly.eval(s);
    // the transverse rate of the rescaled flow scales with 1/‖ξ₁‖²
    let eps_eff = eps / (norm * norm);
    let reference = reference_point(potential, rho0, eps_eff, t, setup.quadrature)?;
    let rhs_point = geodesic_flow(&unit_horocycle_unstable(&reference, -eps_eff * p * grow / SQRT_2), s * norm)?;
    let rhs = a.eval(&rhs_point);

    let reference_plain = reference_point(potential, rho0, eps, t, setup.quadrature)?;
    let rhs_plain = a.eval(&unit_horocycle_unstable(&reference_plain, -eps * p * grow));
    Ok(StabilityComparison {
        eps,
        s,
        t,
        n: poly.order(),
        lhs,
        rhs,
        rhs_plain,
        gap: (lhs - rhs).abs(),
        gap_plain: (lhs - rhs_plain).abs(),
        shape: bound_shape(eps, s, t, poly.order(), norm),
        bound: f64::NAN,
    })
}

/// Fits `C₁` as the smallest constant dominating every gap by its shape and
/// fills in the `bound` column.
pub fn fit_bound_constant(rows: &mut [StabilityComparison]) -> f64 {
    let shapes: Vec<f64> = rows.iter().map(|r| r.shape).collect();
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
    let c1 = fit_constant(&shapes, &gaps);
    for r in rows.iter_mut() {
        r.bound = c1 * r.shape;
    }
    c1
}
