//! Γ-invariant bump potentials, the transverse derivative `f_V` and its
//! derivatives along the geodesic flow.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperbolic::{
    from_chart_direction, geodesic_flow, hyperbolic_distance, sinh_half_sq, to_chart,
    ChartPhasePoint, GroupElement, SHELL_TOL,
};
use crate::quotient::{radial_point, FuchsianGroup};

/// One bump `A·exp(1 - 1/(1 - (d/r)²))` of hyperbolic radius `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Complex64,
    pub radius: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy)]
struct Translate {
    center: Complex64,
    radius: f64,
    amplitude: f64,
    /// `sinh²(r/2)`: the support cutoff on the scale of [`sinh_half_sq`].
    cutoff: f64,
}

/// A smooth Γ-invariant potential on the quotient surface.
#[derive(Debug, Clone)]
pub struct PotentialField {
    bumps: Vec<Bump>,
    translates: Vec<Translate>,
    group: Arc<FuchsianGroup>,
}

/// Value and gradient covector `(∂_u V, ∂_v V)` at a base point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialJet {
    pub value: f64,
    pub du: f64,
    pub dv: f64,
}

impl PotentialField {
    /// Closes the bump supports under the group: every translate of every
    /// center whose support can meet the fundamental domain is listed.
    pub fn new(bumps: Vec<Bump>, group: Arc<FuchsianGroup>) -> Result<Self> {
        for b in &bumps {
            if !(b.radius > 0.0 && b.center.im > 0.0 && b.amplitude.is_finite()) {
                return Err(Error::InvalidInput(format!("invalid bump {b:?}")));
            }
        }
        let mut translates = Vec::new();
        for b in &bumps {
            for center in orbit_within(&group, b.center, group.domain_radius() + b.radius + 1e-6) {
                let s = (0.5 * b.radius).sinh();
                translates.push(Translate { center, radius: b.radius, amplitude: b.amplitude, cutoff: s * s });
            }
        }
        Ok(Self { bumps, translates, group })
    }

    /// The zero potential.
    pub fn zero(group: Arc<FuchsianGroup>) -> Self {
        Self { bumps: Vec::new(), translates: Vec::new(), group }
    }

    pub fn bumps(&self) -> &[Bump] {
        &self.bumps
    }

    pub fn group(&self) -> &Arc<FuchsianGroup> {
        &self.group
    }

    /// Centers of all listed translates.
    pub fn translate_centers(&self) -> Vec<Complex64> {
        self.translates.iter().map(|t| t.center).collect()
    }

    pub fn translate_count(&self) -> usize {
        self.translates.len()
    }

    pub fn is_zero(&self) -> bool {
        self.bumps.iter().all(|b| b.amplitude == 0.0)
    }

    /// Largest absolute value, bounded by the sum of the amplitudes.
    pub fn sup_bound(&self) -> f64 {
        self.bumps.iter().map(|b| b.amplitude.abs()).sum()
    }

    /// Bound on `|f_V|` (equivalently on the gradient norm): every listed
    /// translate contributes its largest slope.
    pub fn sup_f_v_bound(&self) -> f64 {
        let slope = (1..2000)
            .map(|k| {
                let q = k as f64 / 2000.0;
                let one_m = 1.0 - q * q;
                (1.0 - 1.0 / one_m).exp() * 2.0 * q / (one_m * one_m)
            })
            .fold(0.0, f64::max);
        self.translates.iter().map(|t| t.amplitude.abs() * slope / t.radius).sum()
    }

    /// Loads `center_u center_v radius amplitude` lines (`#` starts a comment).
    pub fn from_text(text: &str, group: Arc<FuchsianGroup>) -> Result<Self> {
        let mut bumps = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?;
            if vals.len() != 4 {
                return Err(Error::Parse { line: i + 1, msg: format!("expected 4 fields, got {}", vals.len()) });
            }
            bumps.push(Bump { center: Complex64::new(vals[0], vals[1]), radius: vals[2], amplitude: vals[3] });
        }
        Self::new(bumps, group)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# center_u center_v radius amplitude\n");
        for b in &self.bumps {
            s.push_str(&format!("{:?} {:?} {:?} {:?}\n", b.center.re, b.center.im, b.radius, b.amplitude));
        }
        s
    }

    /// Value and gradient on a base point inside the domain.
    fn jet_reduced(&self, z: Complex64) -> PotentialJet {
        let mut jet = PotentialJet { value: 0.0, du: 0.0, dv: 0.0 };
        for t in &self.translates {
            let s = sinh_half_sq(z, t.center);
            if s >= t.cutoff {
                continue;
            }
            let d = 2.0 * s.sqrt().asinh();
            let q = (d / t.radius).powi(2);
            let one_minus = 1.0 - q;
            let e = t.amplitude * (1.0 - 1.0 / one_minus).exp();
            jet.value += e;
            // chain rule through q(d(S)) with d/√S finite at S = 0
            let d_over_sqrt_s = if s < 1e-14 { 2.0 * (1.0 - s / 6.0) } else { d / s.sqrt() };
            let dq_ds = 2.0 / (t.radius * t.radius) * d_over_sqrt_s / (1.0 + s).sqrt();
            let dv_dq = -e / (one_minus * one_minus);
            let w = t.center;
            let den = 2.0 * z.im * w.im;
            let ds_du = (z.re - w.re) / den;
            let ds_dv = (z.im - w.im) / den - s / z.im;
            jet.du += dv_dq * dq_ds * ds_du;
            jet.dv += dv_dq * dq_ds * ds_dv;
        }
        jet
    }

    /// Value and gradient at any base point of the upper half-plane.
    pub fn jet(&self, z: Complex64) -> PotentialJet {
        if self.translates.is_empty() {
            return PotentialJet { value: 0.0, du: 0.0, dv: 0.0 };
        }
        let (zr, gamma) = self
            .group
            .reduce_point(z)
            .expect("reduction by the side pairings always terminates");
        let j = self.jet_reduced(zr);
        // pull the covector back through γ: dV_z = conj(γ'(z))·dV_{γz}
        let lambda = gamma.derivative_at(z).conj();
        let g = lambda * Complex64::new(j.du, j.dv);
        PotentialJet { value: j.value, du: g.re, dv: g.im }
    }

    pub fn eval_v(&self, z: Complex64) -> f64 {
        self.jet(z).value
    }

    pub fn grad_v(&self, z: Complex64) -> (f64, f64) {
        let j = self.jet(z);
        (j.du, j.dv)
    }

    /// `g*(dV, ξ^⊥)` at a unit-layer point.
    pub fn f_v(&self, p: &ChartPhasePoint) -> Result<f64> {
        let p0 = p.p0();
        if !((p0 - 0.5).abs() <= SHELL_TOL) {
            return Err(Error::OffShell { p0, expected: 0.5 });
        }
        Ok(self.f_v_unchecked(p))
    }

    /// `g*(dV, ξ^⊥)` for any covector length.
    pub fn f_v_unchecked(&self, p: &ChartPhasePoint) -> f64 {
        let j = self.jet(p.base());
        let q = p.perp();
        p.v * p.v * (j.du * q.pu + j.dv * q.pv)
    }

    pub fn f_v_at(&self, g: &GroupElement) -> f64 {
        self.f_v_unchecked(&to_chart(g))
    }
}

/// Default potential: two overlapping bumps whose translates cover the
/// surface, so no open set has vanishing `f_V` derivatives.
pub fn default_bumps() -> Vec<Bump> {
    vec![
        Bump { center: radial_point(0.7, 0.2), radius: 2.8, amplitude: 1.0 },
        Bump { center: radial_point(1.9, 2.25), radius: 2.8, amplitude: -0.7 },
    ]
}

pub fn default_potential(group: Arc<FuchsianGroup>) -> PotentialField {
    PotentialField::new(default_bumps(), group).expect("default bumps are valid")
}

/// Single radially symmetric bump; near its center `f_V` vanishes
/// identically along radial geodesics.
pub fn radial_control_potential(group: Arc<FuchsianGroup>) -> PotentialField {
    let b = Bump { center: radial_point(0.7, 0.2), radius: 1.8, amplitude: 1.0 };
    PotentialField::new(vec![b], group).expect("control bump is valid")
}

/// Unit-layer point at distance `offset` before the control bump center,
/// heading straight through it (rotated by `angle` about the center).
pub fn radial_control_point(offset: f64, angle: f64) -> ChartPhasePoint {
    let c = radial_point(0.7, 0.2);
    // move i to the center by the affine map, then step backwards along a geodesic
    let to_center = from_chart_direction(&ChartPhasePoint::new(c.re, c.im, 0.0, 1.0 / c.im));
    let g = to_center * GroupElement::rotation(angle);
    let start = geodesic_flow(&g, -offset).expect("small offset");
    to_chart(&start)
}

/// Orbit points `γ·c` within distance `radius` of `i`.
fn orbit_within(group: &FuchsianGroup, c: Complex64, radius: f64) -> Vec<Complex64> {
    // Explore tiles whose centers stay close enough that every tile on the
    // way to a kept translate is visited.
    let explore = radius + hyperbolic_distance(c, Complex64::i()) + 2.0 * group.domain_radius() + 1e-6;
    let key = |z: Complex64| ((z.re * 1e7).round() as i64, (z.im.ln() * 1e7).round() as i64);
    let mut seen: HashMap<(i64, i64), ()> = HashMap::new();
    // breadth-first, so every tile is reached by a short word
    let mut frontier = VecDeque::from([GroupElement::identity()]);
    seen.insert(key(Complex64::i()), ());
    let mut kept: Vec<Complex64> = Vec::new();
    while let Some(g) = frontier.pop_front() {
        let w = g.act(c);
        if hyperbolic_distance(w, Complex64::i()) <= radius
            && kept.iter().all(|&k| hyperbolic_distance(k, w) > 1e-6)
        {
            kept.push(w);
        }
        for p in group.pairings() {
            let h = g * *p;
            let center = h.base_point();
            if hyperbolic_distance(center, Complex64::i()) > explore {
                continue;
            }
            if seen.insert(key(center), ()).is_none() {
                frontier.push_back(h);
            }
        }
    }
    kept.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    kept
}

/// Step and tolerance of the flow-derivative stencils.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StencilConfig {
    /// Coarse step; the fine level uses half of it.
    pub step: f64,
    /// Requested absolute tolerance of a derivative.
    pub tol: f64,
}

impl Default for StencilConfig {
    fn default() -> Self {
        Self { step: 0.02, tol: 1e-6 }
    }
}

/// A derivative value with its Richardson error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Derivative {
    pub value: f64,
    pub error: f64,
}

pub const MAX_DERIVATIVE_ORDER: usize = 6;
/// Accuracy order of every stencil used here.
pub const STENCIL_ORDER: i32 = 8;

/// Finite-difference weights at 0 for the nodes `xs`, for derivative orders
/// `0..=m` (Fornberg's recursion).
pub fn fornberg_weights(xs: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0];
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i];
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

fn stencil_half_width(max_order: usize) -> usize {
    3 + max_order.div_ceil(2)
}

fn stencil_derivatives(values: &[f64], h: f64, max_order: usize) -> Vec<f64> {
    let m = (values.len() - 1) / 2;
    let xs: Vec<f64> = (0..values.len()).map(|k| (k as f64 - m as f64) * h).collect();
    let w = fornberg_weights(&xs, max_order);
    (0..=max_order)
        .map(|j| w[j].iter().zip(values).map(|(a, b)| a * b).sum())
        .collect()
}

/// Derivatives of orders `0..=max_order` at 0 of `f`, with Richardson
/// extrapolation between steps `h` and `h/2`. The step is halved (up to
/// four times) while the two levels disagree beyond the tolerance.
pub fn richardson_derivatives<F: Fn(f64) -> f64>(
    f: F,
    max_order: usize,
    cfg: &StencilConfig,
) -> Result<Vec<Derivative>> {
    let mut h = cfg.step;
    let mut last = Err(Error::StencilUnstable { spread: f64::INFINITY, tol: cfg.tol });
    for _ in 0..5 {
        last = richardson_at(&f, max_order, h, cfg.tol);
        if last.is_ok() {
            return last;
        }
        h *= 0.5;
    }
    last
}

fn richardson_at<F: Fn(f64) -> f64>(f: &F, max_order: usize, h: f64, tol: f64) -> Result<Vec<Derivative>> {
    let m = stencil_half_width(max_order) as i64;
    let fine: Vec<f64> = (-2 * m..=2 * m).map(|k| f(k as f64 * 0.5 * h)).collect();
    let coarse: Vec<f64> = fine.iter().step_by(2).copied().collect();
    let fine_window = &fine[m as usize..(3 * m) as usize + 1];
    let dc = stencil_derivatives(&coarse, h, max_order);
    let df = stencil_derivatives(fine_window, 0.5 * h, max_order);
    let factor = 2f64.powi(STENCIL_ORDER) - 1.0;
    let mut out = Vec::with_capacity(max_order + 1);
    let mut worst = (0.0f64, 0.0f64);
    for j in 0..=max_order {
        if j == 0 {
            out.push(Derivative { value: fine[2 * m as usize], error: 0.0 });
            continue;
        }
        let spread = (df[j] - dc[j]).abs();
        let ratio = spread / (tol * (1.0 + df[j].abs()));
        if ratio > worst.1 {
            worst = (spread, ratio);
        }
        out.push(Derivative { value: df[j] + (df[j] - dc[j]) / factor, error: spread / factor });
    }
    if worst.1 > 10.0 {
        return Err(Error::StencilUnstable { spread: worst.0, tol });
    }
    Ok(out)
}

impl PotentialField {
    /// `f_V` along the geodesic through `g`.
    pub fn f_v_along(&self, g: &GroupElement, s: f64) -> f64 {
        let h = geodesic_flow(g, s).expect("stencil offsets are small");
        self.f_v_at(&h)
    }

    /// Derivatives of orders `0..=max_order` along the geodesic flow, of
    /// `f_V` (unweighted) or of `e^{-s} f_V` (weighted, i.e. `(X0 - 1)^j f_V`).
    pub fn flow_derivatives(
        &self,
        p: &ChartPhasePoint,
        max_order: usize,
        weighted: bool,
        cfg: &StencilConfig,
    ) -> Result<Vec<Derivative>> {
        if max_order > MAX_DERIVATIVE_ORDER {
            return Err(Error::InvalidInput(format!("derivative order {max_order} exceeds {MAX_DERIVATIVE_ORDER}")));
        }
        let p0 = p.p0();
        if !((p0 - 0.5).abs() <= SHELL_TOL) {
            return Err(Error::OffShell { p0, expected: 0.5 });
        }
        let g = from_chart_direction(p);
        if weighted {
            richardson_derivatives(|s| (-s).exp() * self.f_v_along(&g, s), max_order, cfg)
        } else {
            richardson_derivatives(|s| self.f_v_along(&g, s), max_order, cfg)
        }
    }

    pub fn flow_derivative(
        &self,
        p: &ChartPhasePoint,
        j: usize,
        weighted: bool,
        cfg: &StencilConfig,
    ) -> Result<Derivative> {
        Ok(self.flow_derivatives(p, j, weighted, cfg)?[j])
    }

    /// Membership in the set where some `|(X0 - 1)^j f_V|`, `j ≤ J`, reaches `η0`.
    pub fn in_k_vj(&self, p: &ChartPhasePoint, j_max: usize, eta0: f64, cfg: &StencilConfig) -> Result<bool> {
        if !(eta0 > 0.0) {
            return Err(Error::InvalidInput("eta0 must be positive".into()));
        }
        Ok(self.max_weighted_derivative(p, j_max, cfg)? >= eta0)
    }

    pub fn max_weighted_derivative(&self, p: &ChartPhasePoint, j_max: usize, cfg: &StencilConfig) -> Result<f64> {
        let d = self.flow_derivatives(p, j_max, true, cfg)?;
        Ok(d.iter().map(|x| x.value.abs()).fold(0.0, f64::max))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanVerdict {
    EmptyEvidence,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalScanReport {
    pub j: usize,
    pub grid_size: usize,
    /// Minimum over the grid of `max_{j ≤ J} |X0^j f_V|`.
    pub min_over_grid: f64,
    /// Lipschitz slack `Λ·h`.
    pub margin: f64,
    pub lipschitz: f64,
    pub spacing: f64,
    pub points: usize,
    /// Chart coordinates of the grid minimizer.
    pub argmin: ChartPhasePoint,
    pub verdict: ScanVerdict,
}

/// Disk-model coordinates to the upper half-plane (`0 ↦ i`).
pub fn disk_to_half_plane(w: Complex64) -> Complex64 {
    Complex64::i() * (1.0 + w) / (1.0 - w)
}

/// Scans `max_{j ≤ J} |X0^j f_V|` over a `grid_size³` grid: a square in
/// disk coordinates covering the domain, times the direction circle.
pub fn scan_critical(
    potential: &PotentialField,
    j_max: usize,
    grid_size: usize,
    cfg: &StencilConfig,
) -> Result<CriticalScanReport> {
    let group = potential.group();
    let n = grid_size.max(2);
    let rho = (0.5 * group.domain_radius()).tanh();
    let dx = 2.0 * rho / (n - 1) as f64;
    let dth = 2.0 * PI / n as f64;
    let coord = |k: usize| -rho + k as f64 * dx;
    let mut cells = Vec::new();
    for iy in 0..n {
        for ix in 0..n {
            let w = Complex64::new(coord(ix), coord(iy));
            if w.norm() < 1.0 && group.in_domain(disk_to_half_plane(w)) {
                cells.push((ix, iy));
            }
        }
    }
    let rows: Vec<Vec<f64>> = cells
        .par_iter()
        .map(|&(ix, iy)| {
            let z = disk_to_half_plane(Complex64::new(coord(ix), coord(iy)));
            (0..n)
                .map(|it| {
                    let p = ChartPhasePoint::from_angle(z, it as f64 * dth, 1.0);
                    potential
                        .flow_derivatives(&p, j_max, false, cfg)
                        .map(|d| d.iter().map(|x| x.value.abs()).fold(0.0, f64::max))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let index: HashMap<(usize, usize), usize> = cells.iter().enumerate().map(|(k, &c)| (c, k)).collect();
    let mut min = f64::INFINITY;
    let mut argmin = ChartPhasePoint::new(0.0, 1.0, 0.0, 1.0);
    let mut slope = 0.0f64;
    let mut spacing = 0.0f64;
    for (k, &(ix, iy)) in cells.iter().enumerate() {
        let w = Complex64::new(coord(ix), coord(iy));
        let z = disk_to_half_plane(w);
        let metric = 2.0 / (1.0 - w.norm_sqr());
        // half-diagonal of the cell in the (hyperbolic base, angle) metric
        spacing = spacing.max(0.5 * (2.0 * (metric * dx).powi(2) + dth * dth).sqrt());
        for it in 0..n {
            let f = rows[k][it];
            if f < min {
                min = f;
                argmin = ChartPhasePoint::from_angle(z, it as f64 * dth, 1.0);
            }
            let g = rows[k][(it + 1) % n];
            slope = slope.max((g - f).abs() / dth);
        }
        for (jx, jy) in [(ix + 1, iy), (ix, iy + 1)] {
            if let Some(&kk) = index.get(&(jx, jy)) {
                let wm = 0.5 * (w + Complex64::new(coord(jx), coord(jy)));
                let step = 2.0 * dx / (1.0 - wm.norm_sqr());
                for it in 0..n {
                    slope = slope.max((rows[kk][it] - rows[k][it]).abs() / step);
                }
            }
        }
    }
    let lipschitz = 2.0 * slope;
    let margin = lipschitz * spacing;
    let verdict = if min > margin { ScanVerdict::EmptyEvidence } else { ScanVerdict::Inconclusive };
    Ok(CriticalScanReport {
        j: j_max,
        grid_size: n,
        min_over_grid: min,
        margin,
        lipschitz,
        spacing,
        points: cells.len() * n,
        argmin,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quotient::bolza_group;

    fn group() -> Arc<FuchsianGroup> {
        Arc::new(bolza_group())
    }

    #[test]
    fn outside_support_and_center() {
        let g = group();
        let p = PotentialField::new(vec![Bump { center: Complex64::i(), radius: 0.3, amplitude: 1.5 }], g).unwrap();
        let far = radial_point(1.0, 1.0);
        assert_eq!(p.eval_v(far), 0.0);
        assert_eq!(p.grad_v(far), (0.0, 0.0));
        assert!((p.eval_v(Complex64::i()) - 1.5).abs() < 1e-15);
        let (du, dv) = p.grad_v(Complex64::i());
        assert!(du.abs() < 1e-15 && dv.abs() < 1e-15);
    }

    #[test]
    fn zero_potential_has_zero_f_v() {
        let p = PotentialField::zero(group());
        let q = ChartPhasePoint::new(0.3, 1.2, 0.2, 0.7).normalized();
        assert_eq!(p.f_v(&q).unwrap(), 0.0);
        let d = p.flow_derivatives(&q, 4, true, &StencilConfig::default()).unwrap();
        assert!(d.iter().all(|x| x.value == 0.0));
        assert!(!p.in_k_vj(&q, 3, 1e-3, &StencilConfig::default()).unwrap());
    }

    #[test]
    fn f_v_rejects_off_shell() {
        let p = default_potential(group());
        let q = ChartPhasePoint::new(0.0, 1.0, 0.0, 2.0);
        assert!(matches!(p.f_v(&q), Err(Error::OffShell { .. })));
    }

    #[test]
    fn fornberg_reproduces_classical_stencils() {
        let w = fornberg_weights(&[-1.0, 0.0, 1.0], 2);
        assert_eq!(w[2], vec![1.0, -2.0, 1.0]);
        assert_eq!(w[1], vec![-0.5, 0.0, 0.5]);
    }

    #[test]
    fn f_v_is_zero_along_the_gradient() {
        let p = default_potential(group());
        let z = radial_point(2.0, 0.9);
        let (du, dv) = p.grad_v(z);
        // covector parallel to dV: its perpendicular annihilates dV
        let q = ChartPhasePoint::new(z.re, z.im, du, dv).normalized();
        assert!(p.f_v(&q).unwrap().abs() < 1e-10);
    }

    #[test]
    fn k_vj_membership_threshold() {
        let p = default_potential(group());
        let q = to_chart(&GroupElement::rotation(0.4));
        let f = p.f_v(&q).unwrap().abs();
        assert!(f > 0.0);
        let cfg = StencilConfig::default();
        assert!(p.in_k_vj(&q, 0, 0.5 * f, &cfg).unwrap());
        assert!(!p.in_k_vj(&q, 0, 2.0 * f, &cfg).unwrap());
    }

    #[test]
    fn control_point_is_near_the_critical_set() {
        let p = radial_control_potential(group());
        let q = radial_control_point(0.3, 0.0);
        let m = p.max_weighted_derivative(&q, 3, &StencilConfig::default()).unwrap();
        assert!(m < 1e-4, "max derivative {m}");
    }

    #[test]
    fn text_roundtrip() {
        let g = group();
        let p = default_potential(g.clone());
        let q = PotentialField::from_text(&p.to_text(), g.clone()).unwrap();
        assert_eq!(p.bumps(), q.bumps());
        assert!(PotentialField::from_text("0 1 0.5\n", g).is_err());
    }
}
