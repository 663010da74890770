//! Unit cotangent bundle of the hyperbolic plane in the matrix model.
//!
//! A point is a unimodular real 2×2 matrix up to sign. Its base point in the
//! upper half-plane is `g·i` and its direction is the image of the upward unit
//! vector at `i`. The geodesic flow is right multiplication by
//! `diag(e^{t/2}, e^{-t/2})`, the unstable horocycle flow is right
//! multiplication by `[[1,0],[s,1]]` and the stable one by `[[1,s],[0,1]]`.

use std::f64::consts::SQRT_2;
use std::ops::Mul;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest |t| accepted by [`geodesic_flow`].
pub const MAX_FLOW_TIME: f64 = 700.0;
/// Tolerance on `p0 - 1/2` accepted by [`from_chart`].
pub const SHELL_TOL: f64 = 1e-9;
const DET_DRIFT: f64 = 1e-13;

/// Element of PSL(2,R), stored as the sign-canonical representative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    m: [f64; 4],
}

impl GroupElement {
    /// Builds an element from row-major entries, normalizing the determinant.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let det = a * d - b * c;
        if !(det.is_finite() && det > 0.0) {
            return Err(Error::InvalidInput(format!(
                "matrix [[{a}, {b}], [{c}, {d}]] has non-positive determinant {det}"
            )));
        }
        Ok(Self::from_raw([a, b, c, d]))
    }

    fn from_raw(m: [f64; 4]) -> Self {
        let mut g = Self { m };
        g.normalize();
        g
    }

    fn normalize(&mut self) {
        let det = self.det();
        if (det - 1.0).abs() > DET_DRIFT {
            let k = det.sqrt().recip();
            for x in &mut self.m {
                *x *= k;
            }
        }
        let [a, b, _, _] = self.m;
        if a < 0.0 || (a == 0.0 && b < 0.0) {
            for x in &mut self.m {
                *x = -*x;
            }
        }
    }

    pub fn identity() -> Self {
        Self { m: [1.0, 0.0, 0.0, 1.0] }
    }

    pub fn entries(&self) -> [f64; 4] {
        self.m
    }

    pub fn det(&self) -> f64 {
        self.m[0] * self.m[3] - self.m[1] * self.m[2]
    }

    pub fn trace(&self) -> f64 {
        self.m[0] + self.m[3]
    }

    pub fn inverse(&self) -> Self {
        let [a, b, c, d] = self.m;
        Self::from_raw([d, -b, -c, a])
    }

    /// `diag(e^{t/2}, e^{-t/2})`.
    pub fn diagonal(t: f64) -> Self {
        let h = 0.5 * t;
        Self::from_raw([h.exp(), 0.0, 0.0, (-h).exp()])
    }

    /// `[[1,0],[s,1]]`.
    pub fn lower_unipotent(s: f64) -> Self {
        Self::from_raw([1.0, 0.0, s, 1.0])
    }

    /// `[[1,s],[0,1]]`.
    pub fn upper_unipotent(s: f64) -> Self {
        Self::from_raw([1.0, s, 0.0, 1.0])
    }

    /// Rotation about `i` turning directions counterclockwise by `theta`.
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = (0.5 * theta).sin_cos();
        Self::from_raw([c, s, -s, c])
    }

    /// Möbius action on the upper half-plane.
    pub fn act(&self, z: Complex64) -> Complex64 {
        let [a, b, c, d] = self.m;
        (z * a + b) / (z * c + d)
    }

    /// Complex derivative of the Möbius map at `z`.
    pub fn derivative_at(&self, z: Complex64) -> Complex64 {
        let [_, _, c, d] = self.m;
        let den = z * c + d;
        (den * den).inv()
    }

    pub fn base_point(&self) -> Complex64 {
        let [a, b, c, d] = self.m;
        let n = c * c + d * d;
        Complex64::new((a * c + b * d) / n, 1.0 / n)
    }

    /// Largest entrywise difference, minimized over the sign ambiguity.
    pub fn distance_entries(&self, other: &Self) -> f64 {
        let mut plus = 0.0f64;
        let mut minus = 0.0f64;
        for (x, y) in self.m.iter().zip(&other.m) {
            plus = plus.max((x - y).abs());
            minus = minus.max((x + y).abs());
        }
        plus.min(minus)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.distance_entries(other) <= tol
    }
}

impl Mul for GroupElement {
    type Output = GroupElement;
    fn mul(self, rhs: GroupElement) -> GroupElement {
        let [a, b, c, d] = self.m;
        let [e, f, g, h] = rhs.m;
        GroupElement::from_raw([a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h])
    }
}

impl Mul for &GroupElement {
    type Output = GroupElement;
    fn mul(self, rhs: &GroupElement) -> GroupElement {
        *self * *rhs
    }
}

pub fn geodesic_flow(g: &GroupElement, t: f64) -> Result<GroupElement> {
    if !(t.abs() <= MAX_FLOW_TIME) {
        return Err(Error::FlowTimeOverflow(t));
    }
    Ok(*g * GroupElement::diagonal(t))
}

/// Right multiplication by `[[1,0],[s,1]]`. Its Sasaki speed is `√2`.
pub fn horocycle_unstable(g: &GroupElement, s: f64) -> GroupElement {
    *g * GroupElement::lower_unipotent(s)
}

/// Right multiplication by `[[1,s],[0,1]]`. Its Sasaki speed is `√2`.
pub fn horocycle_stable(g: &GroupElement, s: f64) -> GroupElement {
    *g * GroupElement::upper_unipotent(s)
}

/// Unstable horocycle flow parametrized by Sasaki arclength.
pub fn unit_horocycle_unstable(g: &GroupElement, tau: f64) -> GroupElement {
    horocycle_unstable(g, tau / SQRT_2)
}

/// Stable horocycle flow parametrized by Sasaki arclength.
pub fn unit_horocycle_stable(g: &GroupElement, tau: f64) -> GroupElement {
    horocycle_stable(g, tau / SQRT_2)
}

/// Tangent vector in the left-invariant frame `(X0, X^s, X^u)`.
///
/// In matrix form `X0 = diag(1/2, -1/2)`, `X^s = [[0,1],[0,0]]/√2` and
/// `X^u = [[0,0],[1,0]]/√2`; the frame is orthonormal for `<A,B> = 2 tr(A Bᵀ)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameVector {
    pub x0: f64,
    pub xs: f64,
    pub xu: f64,
}

impl FrameVector {
    pub fn new(x0: f64, xs: f64, xu: f64) -> Self {
        Self { x0, xs, xu }
    }

    /// Frame coefficients of a 2×2 matrix `[[a,b],[c,d]]` (the trace part is dropped).
    pub fn from_matrix(m: [f64; 4]) -> Self {
        Self { x0: m[0] - m[3], xs: SQRT_2 * m[1], xu: SQRT_2 * m[2] }
    }

    pub fn to_matrix(&self) -> [f64; 4] {
        [0.5 * self.x0, self.xs / SQRT_2, self.xu / SQRT_2, -0.5 * self.x0]
    }

    pub fn sasaki_norm(&self) -> f64 {
        (self.x0 * self.x0 + self.xs * self.xs + self.xu * self.xu).sqrt()
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { x0: self.x0 - other.x0, xs: self.xs - other.xs, xu: self.xu - other.xu }
    }
}

/// The Anosov frame at a point, as Lie algebra matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnosovFrame {
    pub flow: [f64; 4],
    pub stable: [f64; 4],
    pub unstable: [f64; 4],
}

impl AnosovFrame {
    /// The frame is left-invariant, so it has the same matrices at every point.
    pub fn at(_g: &GroupElement) -> Self {
        Self {
            flow: FrameVector::new(1.0, 0.0, 0.0).to_matrix(),
            stable: FrameVector::new(0.0, 1.0, 0.0).to_matrix(),
            unstable: FrameVector::new(0.0, 0.0, 1.0).to_matrix(),
        }
    }
}

/// Pushforward of a left-trivialized tangent vector under the geodesic flow
/// by time `t`, computed as the conjugation `a_{-t} A a_t`.
pub fn pushforward(v: &FrameVector, t: f64) -> FrameVector {
    let m = v.to_matrix();
    let e = (0.5 * t).exp();
    let ei = (-0.5 * t).exp();
    // diag(ei, e) * m * diag(e, ei)
    let out = [m[0], ei * m[1] * ei, e * m[2] * e, m[3]];
    FrameVector::from_matrix(out)
}

/// Expansion factor of the unstable direction under the geodesic flow.
pub fn unstable_jacobian_growth(_g: &GroupElement, t: f64) -> f64 {
    pushforward(&FrameVector::new(0.0, 0.0, 1.0), t).sasaki_norm()
}

/// Logarithm of an element close to the identity, in frame coordinates.
pub fn log_near_identity(g: &GroupElement) -> FrameVector {
    let mut m = g.entries();
    if m[0] + m[3] < 0.0 {
        for x in &mut m {
            *x = -*x;
        }
    }
    let c = 0.5 * (m[0] + m[3]);
    let x = c - 1.0;
    let factor = if x.abs() < 1e-4 {
        1.0 - x / 3.0 + 2.0 * x * x / 15.0
    } else if c > 1.0 {
        let th = c.acosh();
        th / th.sinh()
    } else {
        let th = c.clamp(-1.0, 1.0).acos();
        th / th.sin()
    };
    FrameVector::from_matrix([
        factor * (m[0] - c),
        factor * m[1],
        factor * m[2],
        factor * (m[3] - c),
    ])
}

/// Sasaki norm of `log(g⁻¹h)`; agrees with the Sasaki distance to second order
/// for nearby points.
pub fn sasaki_separation(g: &GroupElement, h: &GroupElement) -> f64 {
    log_near_identity(&(g.inverse() * *h)).sasaki_norm()
}

/// `(cosh d - 1)/2 = sinh²(d/2)` for the hyperbolic distance `d`.
pub fn sinh_half_sq(z: Complex64, w: Complex64) -> f64 {
    (z - w).norm_sqr() / (4.0 * z.im * w.im)
}

pub fn cosh_distance(z: Complex64, w: Complex64) -> f64 {
    1.0 + 2.0 * sinh_half_sq(z, w)
}

pub fn hyperbolic_distance(z: Complex64, w: Complex64) -> f64 {
    2.0 * sinh_half_sq(z, w).sqrt().asinh()
}

/// Cotangent point `(u, v, p_u, p_v)` in the upper half-plane chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartPhasePoint {
    pub u: f64,
    pub v: f64,
    pub pu: f64,
    pub pv: f64,
}

impl ChartPhasePoint {
    pub fn new(u: f64, v: f64, pu: f64, pv: f64) -> Self {
        Self { u, v, pu, pv }
    }

    /// Point at `z` whose covector points at angle `theta`, measured
    /// counterclockwise from "up", with covector norm `norm`.
    pub fn from_angle(z: Complex64, theta: f64, norm: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self { u: z.re, v: z.im, pu: -s * norm / z.im, pv: c * norm / z.im }
    }

    pub fn base(&self) -> Complex64 {
        Complex64::new(self.u, self.v)
    }

    /// Kinetic energy `v²(p_u² + p_v²)/2`.
    pub fn p0(&self) -> f64 {
        0.5 * self.v * self.v * (self.pu * self.pu + self.pv * self.pv)
    }

    /// Metric norm of the covector.
    pub fn norm_xi(&self) -> f64 {
        self.v * self.pu.hypot(self.pv)
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self { pu: self.pu * k, pv: self.pv * k, ..*self }
    }

    pub fn normalized(&self) -> Self {
        self.scaled(self.norm_xi().recip())
    }

    /// Direction angle of the covector, counterclockwise from "up".
    pub fn angle(&self) -> f64 {
        (-self.pu).atan2(self.pv)
    }

    /// Metric pairing `g*(ξ, η)` of the two covectors at the same base point.
    pub fn cometric(&self, other: &Self) -> f64 {
        self.v * self.v * (self.pu * other.pu + self.pv * other.pv)
    }

    /// Same base point, covector rotated counterclockwise by a quarter turn.
    pub fn perp(&self) -> Self {
        Self { pu: -self.pv, pv: self.pu, ..*self }
    }

    /// Image under the isometry `γ` acting on the cotangent bundle.
    pub fn transport(&self, gamma: &GroupElement) -> Self {
        let z = self.base();
        let lambda = gamma.derivative_at(z);
        let zn = gamma.act(z);
        let xi = Complex64::new(self.pu, self.pv) / lambda.conj();
        Self { u: zn.re, v: zn.im, pu: xi.re, pv: xi.im }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.u - other.u)
            .abs()
            .max((self.v - other.v).abs())
            .max((self.pu - other.pu).abs())
            .max((self.pv - other.pv).abs())
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite() && self.pu.is_finite() && self.pv.is_finite()
    }
}

pub fn perp_covector(p: &ChartPhasePoint) -> ChartPhasePoint {
    p.perp()
}

/// Chart coordinates of a point of the unit cotangent bundle.
pub fn to_chart(g: &GroupElement) -> ChartPhasePoint {
    let z = g.base_point();
    let w = g.derivative_at(Complex64::i()) * Complex64::i();
    let v2 = z.im * z.im;
    ChartPhasePoint { u: z.re, v: z.im, pu: w.re / v2, pv: w.im / v2 }
}

/// Inverse of [`to_chart`] on the unit layer.
pub fn from_chart(p: &ChartPhasePoint) -> Result<GroupElement> {
    let p0 = p.p0();
    if !((p0 - 0.5).abs() <= SHELL_TOL) || !(p.v > 0.0) {
        return Err(Error::OffShell { p0, expected: 0.5 });
    }
    Ok(from_chart_direction(p))
}

/// Group element with the base point and covector direction of `p`, ignoring
/// the covector length.
pub fn from_chart_direction(p: &ChartPhasePoint) -> GroupElement {
    let sv = p.v.sqrt();
    let affine = GroupElement::from_raw([sv, p.u / sv, 0.0, 1.0 / sv]);
    affine * GroupElement::rotation(p.angle())
}

/// Geodesic flow on any energy layer: the base point moves at speed `‖ξ‖`.
pub fn geodesic_flow_chart(p: &ChartPhasePoint, t: f64) -> Result<ChartPhasePoint> {
    let norm = p.norm_xi();
    let g = geodesic_flow(&from_chart_direction(p), t * norm)?;
    Ok(to_chart(&g).scaled(norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, PI};

    fn sample(u: f64, v: f64, th: f64) -> GroupElement {
        from_chart_direction(&ChartPhasePoint::from_angle(Complex64::new(u, v), th, 1.0))
    }

    #[test]
    fn identity_chart() {
        let p = to_chart(&GroupElement::identity());
        assert_eq!(p, ChartPhasePoint::new(0.0, 1.0, 0.0, 1.0));
        assert!((p.p0() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn geodesic_identity_and_group_law() {
        let id = GroupElement::identity();
        assert_eq!(geodesic_flow(&id, 0.0).unwrap(), id);
        let t = 0.37;
        let once = geodesic_flow(&id, 2.0 * t).unwrap();
        let twice = geodesic_flow(&geodesic_flow(&id, t).unwrap(), t).unwrap();
        assert!(once.approx_eq(&twice, 1e-15));
    }

    #[test]
    fn geodesic_overflow_guard() {
        let id = GroupElement::identity();
        assert!(matches!(geodesic_flow(&id, 700.5), Err(Error::FlowTimeOverflow(_))));
        assert!(geodesic_flow(&id, -700.0).is_ok());
    }

    #[test]
    fn geodesic_moves_at_unit_speed() {
        let g = sample(0.3, 1.7, 2.1);
        for t in [0.5, 1.0, 2.0] {
            let h = geodesic_flow(&g, t).unwrap();
            let d = hyperbolic_distance(g.base_point(), h.base_point());
            assert!((d - t).abs() < 1e-12, "t = {t}: d = {d}");
        }
    }

    #[test]
    fn horocycle_brute_force_product() {
        let g = sample(-0.4, 0.8, 0.9);
        let [a, b, c, d] = g.entries();
        let s = 5.0;
        let lower = horocycle_unstable(&g, s).entries();
        let expect = [a + b * s, b, c + d * s, d];
        for (x, y) in lower.iter().zip(&expect) {
            assert!((x - y).abs() < 1e-13);
        }
        let upper = horocycle_stable(&g, s).entries();
        let expect = [a, a * s + b, c, c * s + d];
        for (x, y) in upper.iter().zip(&expect) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn horocycle_commutations() {
        let g = sample(1.1, 0.6, -2.0);
        let (t, tau) = (1.3, 0.2);
        let lhs = geodesic_flow(&horocycle_unstable(&g, tau), t).unwrap();
        let rhs = horocycle_unstable(&geodesic_flow(&g, t).unwrap(), t.exp() * tau);
        assert!(lhs.approx_eq(&rhs, 1e-12));
        let lhs = geodesic_flow(&horocycle_stable(&g, tau), t).unwrap();
        let rhs = horocycle_stable(&geodesic_flow(&g, t).unwrap(), (-t).exp() * tau);
        assert!(lhs.approx_eq(&rhs, 1e-12));
        assert_eq!(horocycle_unstable(&g, 0.0), g);
        assert_eq!(horocycle_stable(&g, 0.0), g);
    }

    #[test]
    fn perp_examples() {
        let p = ChartPhasePoint::new(0.0, 1.0, 0.0, 1.0);
        assert_eq!(p.perp(), ChartPhasePoint::new(0.0, 1.0, -1.0, 0.0));
        let q = ChartPhasePoint::new(0.2, 2.0, 0.1, -0.3);
        let qq = q.perp().perp();
        assert_eq!((qq.pu, qq.pv), (-q.pu, -q.pv));
        assert!(q.cometric(&q.perp()).abs() < 1e-15);
    }

    #[test]
    fn jacobian_growth_closed_form() {
        let g = GroupElement::identity();
        assert!((unstable_jacobian_growth(&g, 0.0) - 1.0).abs() < 1e-15);
        assert!((unstable_jacobian_growth(&g, 1.0) / E - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_trajectory_separation_grows_like_exp() {
        let g = sample(0.1, 1.3, 0.4);
        let delta = 1e-7;
        let g2 = horocycle_unstable(&g, delta);
        let d0 = sasaki_separation(&g, &g2);
        let t = 3.0;
        let d3 = sasaki_separation(&geodesic_flow(&g, t).unwrap(), &geodesic_flow(&g2, t).unwrap());
        assert!((d3 / d0 / t.exp() - 1.0).abs() < 1e-2);
    }

    #[test]
    fn frame_is_orthonormal_for_trace_form() {
        let fr = AnosovFrame::at(&GroupElement::identity());
        let ip = |a: [f64; 4], b: [f64; 4]| 2.0 * (a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]);
        let all = [fr.flow, fr.stable, fr.unstable];
        for (i, a) in all.iter().enumerate() {
            for (j, b) in all.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((ip(*a, *b) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rotation_turns_direction_counterclockwise() {
        let g = GroupElement::rotation(PI / 2.0);
        let p = to_chart(&g);
        // up rotated by a quarter turn counterclockwise points left
        assert!((p.pu + 1.0).abs() < 1e-15 && p.pv.abs() < 1e-15);
    }

    #[test]
    fn from_chart_rejects_off_shell() {
        let p = ChartPhasePoint::new(0.0, 1.0, 0.0, 1.1);
        assert!(matches!(from_chart(&p), Err(Error::OffShell { .. })));
    }

    #[test]
    fn transport_matches_left_multiplication() {
        let g = sample(0.7, 0.4, 1.0);
        let gamma = GroupElement::new(2.0, 1.0, 3.0, 2.0).unwrap();
        let lhs = to_chart(&(gamma * g));
        let rhs = to_chart(&g).transport(&gamma);
        assert!(lhs.max_abs_diff(&rhs) < 1e-13);
    }

    #[test]
    fn log_recovers_small_generators() {
        let v = FrameVector::new(1e-3, -2e-3, 5e-4);
        let m = v.to_matrix();
        // exp of a small traceless matrix via its closed form
        let det = -(m[0] * m[3] - m[1] * m[2]);
        let th = det.abs().sqrt();
        let (c, s) = if det >= 0.0 { (th.cosh(), th.sinh() / th) } else { (th.cos(), th.sin() / th) };
        let g = GroupElement::new(c + s * m[0], s * m[1], s * m[2], c + s * m[3]).unwrap();
        let back = log_near_identity(&g);
        assert!(back.sub(&v).sasaki_norm() < 1e-14);
    }
}
