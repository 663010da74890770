//! Cartan's lower bound for products `∏|z − z_i|`, and the small-Jacobian
//! cover of the reparametrization polynomial on `[0, s₀]`.

use std::f64::consts::E;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stability::{horner, FlowPolynomial};

/// Number of steps of the dense soundness scan.
pub const DENSE_SCAN_STEPS: usize = 100_000;
/// Largest admissible `s₀`.
pub const S1_DEFAULT: f64 = 0.3;
const ROOT_RESIDUAL_GATE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: Complex64,
    pub radius: f64,
}

impl Disk {
    pub fn contains(&self, z: Complex64) -> bool {
        (z - self.center).norm() <= self.radius
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiskSystem {
    pub disks: Vec<Disk>,
    pub h: f64,
    pub n: usize,
}

impl DiskSystem {
    pub fn total_radius(&self) -> f64 {
        self.disks.iter().map(|d| d.radius).sum()
    }

    /// `(H/e)^n`.
    pub fn lower_bound(&self) -> f64 {
        (self.h / E).powi(self.n as i32)
    }

    pub fn covers(&self, z: Complex64) -> bool {
        self.disks.iter().any(|d| d.contains(z))
    }
}

/// Product `∏|z − z_i|`.
pub fn root_product(roots: &[Complex64], z: Complex64) -> f64 {
    roots.iter().map(|r| (z - r).norm()).product()
}

fn enclosing_circle(points: &[Complex64]) -> (Complex64, f64) {
    let contains_all = |c: Complex64, r: f64| points.iter().all(|p| (p - c).norm() <= r * (1.0 + 1e-12) + 1e-15);
    if points.len() == 1 {
        return (points[0], 0.0);
    }
    let mut best = (points[0], f64::INFINITY);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let c = 0.5 * (points[i] + points[j]);
            let r = 0.5 * (points[i] - points[j]).norm();
            if r < best.1 && contains_all(c, r) {
                best = (c, r);
            }
            for k in j + 1..points.len() {
                if let Some((c, r)) = circumcircle(points[i], points[j], points[k]) {
                    if r < best.1 && contains_all(c, r) {
                        best = (c, r);
                    }
                }
            }
        }
    }
    if best.1.is_infinite() {
        // all points coincide up to roundoff
        let c = points.iter().sum::<Complex64>() / points.len() as f64;
        let r = points.iter().map(|p| (p - c).norm()).fold(0.0, f64::max);
        best = (c, r);
    }
    best
}

fn circumcircle(a: Complex64, b: Complex64, c: Complex64) -> Option<(Complex64, f64)> {
    let (bx, by) = (b.re - a.re, b.im - a.im);
    let (cx, cy) = (c.re - a.re, c.im - a.im);
    let d = 2.0 * (bx * cy - by * cx);
    if d.abs() < 1e-300 {
        return None;
    }
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    let ux = (cy * b2 - by * c2) / d;
    let uy = (bx * c2 - cx * b2) / d;
    let center = a + Complex64::new(ux, uy);
    Some((center, (ux * ux + uy * uy).sqrt()))
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Classical greedy construction: repeatedly take the largest `k` such that a
/// disk of radius `kH/n` holds `k` of the remaining roots, then double all
/// radii. Outside the disks `∏|z − z_i| > (H/e)^n`.
pub fn cartan_disks(roots: &[Complex64], h: f64) -> Result<DiskSystem> {
    let n = roots.len();
    if n == 0 {
        return Err(Error::InvalidInput("Cartan disks need at least one point".into()));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!("H must be positive, got {h}")));
    }
    if n > 12 {
        return Err(Error::InvalidInput(format!("at most 12 points supported, got {n}")));
    }
    let mut remaining: Vec<Complex64> = roots.to_vec();
    let mut disks = Vec::new();
    while !remaining.is_empty() {
        let m = remaining.len();
        let mut chosen = None;
        'outer: for k in (1..=m).rev() {
            let radius = k as f64 * h / n as f64;
            for idx in subsets(m, k) {
                let pts: Vec<Complex64> = idx.iter().map(|&i| remaining[i]).collect();
                let (c, r) = enclosing_circle(&pts);
                if r <= radius {
                    chosen = Some((idx, c, radius));
                    break 'outer;
                }
            }
        }
        let (idx, center, radius) = chosen.expect("a single point always fits");
        disks.push(Disk { center, radius: 2.0 * radius });
        for &i in idx.iter().rev() {
            remaining.remove(i);
        }
    }
    Ok(DiskSystem { disks, h, n })
}

/// Roots of `Σ c_p x^p` (ascending coefficients, nonzero leading term),
/// from the companion matrix, polished by Newton steps.
pub fn polynomial_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let deg = coeffs.len().saturating_sub(1);
    if deg == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[deg];
    if lead == 0.0 {
        return Err(Error::InvalidInput("leading coefficient vanishes".into()));
    }
    let mut comp = DMatrix::<f64>::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -coeffs[i] / lead;
    }
    let eig = comp.complex_eigenvalues();
    let eval = |z: Complex64| {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &c in coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    };
    let scale = |z: Complex64| coeffs.iter().enumerate().map(|(k, c)| c.abs() * z.norm().powi(k as i32)).sum::<f64>();
    let mut out = Vec::with_capacity(deg);
    for z0 in eig.iter() {
        let mut z = Complex64::new(z0.re, z0.im);
        for _ in 0..3 {
            let (p, dp) = eval(z);
            if dp.norm() == 0.0 {
                break;
            }
            let step = p / dp;
            if !step.is_finite() || step.norm() > 1e-3 * (1.0 + z.norm()) {
                break;
            }
            z -= step;
        }
        let res = eval(z).0.norm() / scale(z).max(f64::MIN_POSITIVE);
        if !(res <= ROOT_RESIDUAL_GATE) {
            return Err(Error::RootResidual(res));
        }
        out.push(z);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverParams {
    pub s0: f64,
    pub theta: f64,
    pub j: usize,
    pub eta0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalCover {
    /// Disjoint closed subintervals of `[0, s₀]`.
    pub intervals: Vec<(f64, f64)>,
    pub total_length: f64,
    /// Index of the dominant coefficient used for the disks, if any.
    pub dominant_index: Option<usize>,
    /// `total_length / s₀^{1 + θ/(2(J+1))}`.
    pub c0: f64,
    /// Dense-scan points outside the cover with `|P'| ≤ s₀^{J+θ}`.
    pub violations: usize,
    pub params: CoverParams,
}

impl ExceptionalCover {
    pub fn certified(&self) -> bool {
        self.violations == 0
    }

    pub fn contains(&self, s: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| s >= a && s <= b)
    }
}

/// Coefficient floor `η₀/(2·J!)`.
pub fn coefficient_floor(eta0: f64, j: usize) -> f64 {
    let fact: f64 = (1..=j).map(|k| k as f64).product();
    eta0 / (2.0 * fact)
}

fn merge(mut iv: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (a, b) in iv {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// Intervals of `[0, s₀]` containing every `s` with `|P'(s)| ≤ s₀^{J+θ}`.
///
/// With `p₁` the first coefficient of `P'` above the floor, the tail of
/// higher coefficients is bounded on `[0, s₀]` and absorbed, and Cartan's
/// bound on the degree-`p₁` truncation locates the small set.
pub fn exceptional_cover(poly: &FlowPolynomial, params: &CoverParams) -> Result<ExceptionalCover> {
    let CoverParams { s0, theta, j, eta0 } = *params;
    if !(s0 > 0.0 && s0 <= S1_DEFAULT) {
        return Err(Error::InvalidInput(format!("s0 must lie in (0, {S1_DEFAULT}], got {s0}")));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidInput(format!("theta must lie in (0, 1), got {theta}")));
    }
    if !(eta0 > 0.0) {
        return Err(Error::InvalidInput("eta0 must be positive".into()));
    }
    let d = poly.derivative_coeffs();
    let floor = coefficient_floor(eta0, j);
    let above: Vec<usize> = (0..=j.min(d.len().saturating_sub(1))).filter(|&p| d[p].abs() >= floor).collect();
    if above.is_empty() {
        return Err(Error::NoDominantCoefficient { count: j + 1 });
    }
    let delta = s0.powf(j as f64 + theta);
    let tail = |p: usize| -> f64 { d.iter().enumerate().skip(p + 1).map(|(k, c)| c.abs() * s0.powi(k as i32)).sum() };

    let mut intervals = Vec::new();
    let mut dominant = None;
    let mut resolved = false;
    for &p1 in &above {
        let r = tail(p1);
        if p1 == 0 {
            if d[0].abs() > delta + r {
                dominant = Some(0);
                resolved = true;
                break;
            }
            continue;
        }
        let kappa = (delta + r) / d[p1].abs();
        let h = E * kappa.powf(1.0 / p1 as f64);
        let roots = polynomial_roots(&d[..=p1])?;
        let disks = cartan_disks(&roots, h)?;
        for dk in &disks.disks {
            let dy = dk.center.im.abs();
            if dy > dk.radius {
                continue;
            }
            let half = (dk.radius * dk.radius - dy * dy).sqrt();
            let a = (dk.center.re - half).max(0.0);
            let b = (dk.center.re + half).min(s0);
            if a <= b {
                intervals.push((a, b));
            }
        }
        dominant = Some(p1);
        resolved = true;
        break;
    }
    if !resolved {
        intervals = vec![(0.0, s0)];
    }
    let intervals = merge(intervals);
    let total_length = intervals.iter().fold(0.0, |acc, (a, b)| acc + (b - a));
    let mut cover = ExceptionalCover {
        intervals,
        total_length,
        dominant_index: dominant,
        c0: total_length / s0.powf(1.0 + theta / (2.0 * (j as f64 + 1.0))),
        violations: 0,
        params: *params,
    };
    cover.violations = dense_scan_violations(&d, &cover, s0, delta);
    Ok(cover)
}

fn dense_scan_violations(d: &[f64], cover: &ExceptionalCover, s0: f64, delta: f64) -> usize {
    (0..=DENSE_SCAN_STEPS)
        .map(|k| s0 * k as f64 / DENSE_SCAN_STEPS as f64)
        .filter(|&s| !cover.contains(s) && horner(d, s).abs() <= delta)
        .count()
}

/// Complement of the exceptional cover cut into equal windows of length
/// `b^{1+2J+2θ}`; each good segment drops its final partial window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodSplit {
    pub segments: Vec<(f64, f64)>,
    pub window: f64,
    pub window_count: u64,
    /// `window_count · window / b`.
    pub coverage: f64,
    pub cover: ExceptionalCover,
}

impl GoodSplit {
    /// The `k`-th window across all segments, in increasing order.
    pub fn window_at(&self, mut k: u64) -> Option<(f64, f64)> {
        for &(a, b) in &self.segments {
            let m = ((b - a) / self.window).floor() as u64;
            if k < m {
                let lo = a + k as f64 * self.window;
                return Some((lo, lo + self.window));
            }
            k -= m;
        }
        None
    }

    pub fn windows(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.window_count).filter_map(move |k| self.window_at(k))
    }
}

pub fn split_good_intervals(poly: &FlowPolynomial, b: f64, theta: f64, j: usize, eta0: f64) -> Result<GoodSplit> {
    let cover = exceptional_cover(poly, &CoverParams { s0: b, theta, j, eta0 })?;
    let window = b.powf(1.0 + 2.0 * j as f64 + 2.0 * theta);
    let mut segments = Vec::new();
    let mut start = 0.0;
    for &(a, c) in &cover.intervals {
        if a > start {
            segments.push((start, a));
        }
        start = c;
    }
    if start < b {
        segments.push((start, b));
    }
    let window_count: u64 = segments.iter().map(|(a, c)| ((c - a) / window).floor() as u64).sum();
    let coverage = window_count as f64 * window / b;
    Ok(GoodSplit { segments, window, window_count, coverage, cover })
}
