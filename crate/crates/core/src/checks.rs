//! Invariant checks and batch verifiers shared by the harness and the tests.

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cartan::{cartan_disks, exceptional_cover, root_product, CoverParams, ExceptionalCover};
use crate::error::Result;
use crate::fit::linear_fit;
use crate::hyperbolic::{
    from_chart, from_chart_direction, geodesic_flow, geodesic_flow_chart, horocycle_stable, horocycle_unstable,
    log_near_identity, sasaki_separation, to_chart, unit_horocycle_unstable, ChartPhasePoint, FrameVector,
    GroupElement,
};
use crate::perturbed::{perturbed_flow, rescaled_flow, rescaled_vector_field, IntegratorConfig};
use crate::potential::{PotentialField, StencilConfig};
use crate::stability::poly_pn;

fn random_element(rng: &mut ChaCha8Rng) -> GroupElement {
    GroupElement::rotation(rng.random_range(0.0..std::f64::consts::TAU))
        * GroupElement::diagonal(rng.random_range(-2.0..2.0))
        * GroupElement::upper_unipotent(rng.random_range(-2.0..2.0))
}

fn relative_distance(a: &GroupElement, b: &GroupElement) -> f64 {
    let scale = a.entries().iter().fold(1.0f64, |m, x| m.max(x.abs()));
    a.distance_entries(b) / scale
}

/// Worst relative residual of `G₀^t H_u^τ = H_u^{e^t τ} G₀^t` and
/// `G₀^t H_s^τ = H_s^{e^{-t} τ} G₀^t` over `n` random triples.
pub fn commutation_residual(n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..n {
        let g = random_element(&mut rng);
        let t = rng.random_range(-3.0..3.0);
        let tau = rng.random_range(-2.0..2.0);
        let lhs = geodesic_flow(&horocycle_unstable(&g, tau), t).expect("bounded t");
        let rhs = horocycle_unstable(&geodesic_flow(&g, t).expect("bounded t"), t.exp() * tau);
        worst = worst.max(relative_distance(&lhs, &rhs));
        let lhs = geodesic_flow(&horocycle_stable(&g, tau), t).expect("bounded t");
        let rhs = horocycle_stable(&geodesic_flow(&g, t).expect("bounded t"), (-t).exp() * tau);
        worst = worst.max(relative_distance(&lhs, &rhs));
    }
    worst
}

/// Fitted exponents of `log d(G₀^t ρ, G₀^t H_u^δ ρ)` against `t ∈ [0, 5]`,
/// one per random starting point.
pub fn unstable_growth_exponents(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let delta = 1e-8;
    let times: Vec<f64> = (0..=20).map(|k| 0.25 * k as f64).collect();
    (0..n)
        .map(|_| {
            let g = random_element(&mut rng);
            let h = unit_horocycle_unstable(&g, delta);
            let logs: Vec<f64> = times
                .iter()
                .map(|&t| {
                    let a = geodesic_flow(&g, t).expect("bounded t");
                    let b = geodesic_flow(&h, t).expect("bounded t");
                    sasaki_separation(&a, &b).ln()
                })
                .collect();
            linear_fit(&times, &logs).0
        })
        .collect()
}

/// Worst energy drift over `n` Liouville starting points.
pub fn worst_energy_drift(
    potential: &PotentialField,
    eps: f64,
    t: f64,
    n: usize,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let starts = potential.group().sample_liouville(n, seed)?;
    let drifts = starts
        .par_iter()
        .map(|g| perturbed_flow(potential, &to_chart(g), eps, t, cfg).map(|r| r.energy_drift))
        .collect::<Result<Vec<f64>>>()?;
    Ok(drifts.into_iter().fold(0.0, f64::max))
}

/// Worst Sasaki separation between the `ε = 0` integrator and the exact flow.
pub fn worst_unperturbed_error(
    potential: &PotentialField,
    t: f64,
    n: usize,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let starts = potential.group().sample_liouville(n, seed)?;
    let errs = starts
        .par_iter()
        .map(|g| {
            let r = perturbed_flow(potential, &to_chart(g), 0.0, t, cfg)?;
            Ok(sasaki_separation(&from_chart_direction(&r.lift), &geodesic_flow(g, t)?))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(errs.into_iter().fold(0.0, f64::max))
}

/// Worst Sasaki norm of `Y^ε` minus the centred difference quotient of the
/// rescaled flow at step `h`, over `n` Liouville points and `ε ∈ {1e-2, 3e-3}`.
pub fn keystone_error(
    potential: &PotentialField,
    n: usize,
    seed: u64,
    h: f64,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let starts = potential.group().sample_liouville(n, seed)?;
    let errs = starts
        .par_iter()
        .enumerate()
        .map(|(k, g)| {
            let rho = to_chart(g);
            // anchors slightly off the unit shell
            let norm = 1.0 + 0.05 * ((k as f64) / (n as f64 / 2.0) - 1.0);
            let anchor = geodesic_flow_chart(&rho, 0.3)?.scaled(norm);
            let g0 = from_chart(&rho)?;
            let mut worst = 0.0f64;
            for eps in [1e-2, 3e-3] {
                let y = rescaled_vector_field(potential, &rho, &anchor, eps)?;
                let fwd = rescaled_flow(potential, &rho, &anchor, eps, h, cfg)?;
                let bwd = rescaled_flow(potential, &rho, &anchor, eps, -h, cfg)?;
                let lf = log_near_identity(&(g0.inverse() * from_chart_direction(&fwd.lift)));
                let lb = log_near_identity(&(g0.inverse() * from_chart_direction(&bwd.lift)));
                let d = lf.sub(&lb);
                let fd = FrameVector::new(d.x0 / (2.0 * h), d.xs / (2.0 * h), d.xu / (2.0 * h));
                worst = worst.max(fd.sub(&y.field).sasaki_norm());
            }
            Ok(worst)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(errs.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartanInstance {
    pub degree: usize,
    pub h: f64,
    pub disks: usize,
    pub total_radius: f64,
    pub samples: usize,
    pub violations: usize,
    /// Smallest `∏|z − z_i| / (H/e)^n` over the outside samples.
    pub min_ratio: f64,
}

/// Random root sets of degree 1..=5 in the unit square, `H ∈ [0.05, 1]`,
/// each checked at `samples` points of `[-3, 3]²` outside the disks.
pub fn cartan_certificate_batch(instances: usize, samples: usize, seed: u64) -> Result<Vec<CartanInstance>> {
    (0..instances)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let degree = rng.random_range(1..=5usize);
            let roots: Vec<Complex64> = (0..degree)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let h = rng.random_range(0.05..1.0);
            let ds = cartan_disks(&roots, h)?;
            let bound = ds.lower_bound();
            let (mut taken, mut violations, mut min_ratio) = (0, 0, f64::INFINITY);
            while taken < samples {
                let z = Complex64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
                if ds.covers(z) {
                    continue;
                }
                taken += 1;
                let ratio = root_product(&roots, z) / bound;
                min_ratio = min_ratio.min(ratio);
                if !(ratio > 1.0) {
                    violations += 1;
                }
            }
            Ok(CartanInstance {
                degree,
                h,
                disks: ds.disks.len(),
                total_radius: ds.total_radius(),
                samples,
                violations,
                min_ratio,
            })
        })
        .collect()
}

/// Up to `count` unit-layer points in `K_V^J(η₀)`, taken in order from
/// successive Liouville batches. Points whose stencils fail are skipped.
pub fn sample_in_k_vj(
    potential: &PotentialField,
    count: usize,
    j: usize,
    eta0: f64,
    seed: u64,
    stencil: &StencilConfig,
) -> Result<Vec<ChartPhasePoint>> {
    let mut out = Vec::with_capacity(count);
    for round in 0..20u64 {
        let batch = potential.group().sample_liouville(4 * count.max(8), seed.wrapping_add(round * 7919))?;
        let keep: Vec<Option<ChartPhasePoint>> = batch
            .par_iter()
            .map(|g| {
                let p = to_chart(g);
                matches!(potential.in_k_vj(&p, j, eta0, stencil), Ok(true)).then_some(p)
            })
            .collect();
        out.extend(keep.into_iter().flatten().take(count - out.len()));
        if out.len() == count {
            break;
        }
    }
    Ok(out)
}

/// Exceptional covers of `(P^N)'` at points of `K_V^J(η₀)`.
pub fn cover_soundness_batch(
    potential: &PotentialField,
    points: &[ChartPhasePoint],
    n: usize,
    params: &CoverParams,
    stencil: &StencilConfig,
) -> Result<Vec<ExceptionalCover>> {
    points
        .par_iter()
        .map(|p| {
            let poly = poly_pn(potential, p, n, stencil)?;
            exceptional_cover(&poly, params)
        })
        .collect()
}

/// Starting point of a pinned single-trajectory experiment.
pub fn pinned_start(potential: &PotentialField, seed: u64) -> Result<GroupElement> {
    Ok(potential.group().sample_liouville(1, seed)?[0])
}

/// `G₀^s` applied to a chart point, returned as a group element.
pub fn flowed_element(p: &ChartPhasePoint, s: f64) -> Result<GroupElement> {
    geodesic_flow(&from_chart_direction(p), s * p.norm_xi())
}
