//! Parameter sweeps built from the estimators, with the trend and scaling
//! summaries used to judge them.

use std::f64::consts::SQRT_2;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equidist::{
    geodesic_window_average, horocycle_birkhoff, main_experiment, mixing_average, reparam_horocycle_average,
    EquidistReport, ExperimentConfig, ExperimentParams, LiouvilleReference,
};
use crate::error::Result;
use crate::fit::{decreasing_steps, fit_constant, loglog_slope};
use crate::hyperbolic::{from_chart_direction, geodesic_flow, ChartPhasePoint, GroupElement};
use crate::observable::Observable;
use crate::potential::{PotentialField, StencilConfig};
use crate::stability::{
    beta_u, bound_shape, fit_bound_constant, poly_pn, stability_comparison_with, ComparisonSetup, QuadratureConfig,
    StabilityComparison,
};

/// Outcome of the error-bar decrease test on a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trend {
    pub steps: usize,
    pub decreasing: usize,
    pub required: usize,
}

impl Trend {
    /// A step decreases when the later upper bar is below the earlier lower
    /// bar; at least two steps (all of them for shorter sweeps) must decrease.
    pub fn of(values: &[f64], errors: &[f64]) -> Self {
        let steps = values.len().saturating_sub(1);
        Self { steps, decreasing: decreasing_steps(values, errors), required: steps.min(2) }
    }

    pub fn holds(&self) -> bool {
        self.steps > 0 && self.decreasing >= self.required
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Log-spaced sample of `[lo, hi]`.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1).max(1) as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorExponents {
    pub point: usize,
    pub orders: Vec<usize>,
    /// Fitted exponent of the residual in `s`, per order.
    pub exponents: Vec<f64>,
}

/// Residual exponents of the reparametrization polynomial at each point, for
/// every order in `orders`. Points whose stencils fail are left out.
pub fn taylor_exponents(
    potential: &PotentialField,
    points: &[ChartPhasePoint],
    orders: &[usize],
    s_values: &[f64],
    qcfg: &QuadratureConfig,
    stencil: &StencilConfig,
) -> Result<Vec<TaylorExponents>> {
    let max_order = orders.iter().copied().max().unwrap_or(1);
    let rows: Vec<Option<TaylorExponents>> = points
        .par_iter()
        .enumerate()
        .map(|(k, p)| -> Result<Option<TaylorExponents>> {
            let Ok(full) = poly_pn(potential, p, max_order, stencil) else {
                return Ok(None);
            };
            let g = from_chart_direction(p);
            let b0 = beta_u(potential, &g, qcfg)?.value;
            let shifted = s_values
                .iter()
                .map(|&s| {
                    let t = s * p.norm_xi();
                    Ok((-t).exp() * beta_u(potential, &geodesic_flow(&g, t)?, qcfg)?.value - b0)
                })
                .collect::<Result<Vec<f64>>>()?;
            let exponents = orders
                .iter()
                .map(|&n| {
                    let poly = full.truncated(n);
                    let res: Vec<f64> =
                        s_values.iter().zip(&shifted).map(|(&s, d)| (d + poly.eval(s) / SQRT_2).abs()).collect();
                    loglog_slope(s_values, &res)
                })
                .collect();
            Ok(Some(TaylorExponents { point: k, orders: orders.to_vec(), exponents }))
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Median exponent per order over a batch.
pub fn median_exponents(rows: &[TaylorExponents], orders: &[usize]) -> Vec<f64> {
    (0..orders.len())
        .map(|i| {
            let mut v: Vec<f64> = rows.iter().map(|r| r.exponents[i]).collect();
            median(&mut v)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub point: usize,
    pub comparison: StabilityComparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySweep {
    pub rows: Vec<StabilityRow>,
    pub eps: Vec<f64>,
    /// Batch mean of the gap at each `ε`.
    pub mean_gap: Vec<f64>,
    /// Log-log slope of the batch-mean gap in `ε`.
    pub slope: f64,
    /// Median of the per-point slopes.
    pub median_point_slope: f64,
    pub c1: f64,
    pub skipped: usize,
}

/// Stability comparison over a batch of points and a list of `ε`.
#[allow(clippy::too_many_arguments)]
pub fn stability_sweep(
    potential: &PotentialField,
    points: &[ChartPhasePoint],
    eps: &[f64],
    s: f64,
    t: f64,
    n: usize,
    a: &Observable,
    setup: &ComparisonSetup<'_>,
) -> Result<StabilitySweep> {
    let per_point: Vec<Option<Vec<StabilityRow>>> = points
        .par_iter()
        .enumerate()
        .map(|(k, p)| -> Result<Option<Vec<StabilityRow>>> {
            let Ok(poly) = poly_pn(potential, p, n, setup.stencil) else {
                return Ok(None);
            };
            let rows = eps
                .iter()
                .map(|&e| {
                    stability_comparison_with(potential, p, &poly, e, s, t, a, setup)
                        .map(|comparison| StabilityRow { point: k, comparison })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Some(rows))
        })
        .collect::<Result<_>>()?;
    let skipped = per_point.iter().filter(|r| r.is_none()).count();
    let groups: Vec<Vec<StabilityRow>> = per_point.into_iter().flatten().collect();
    let mean_gap: Vec<f64> = (0..eps.len())
        .map(|i| groups.iter().map(|g| g[i].comparison.gap).sum::<f64>() / groups.len().max(1) as f64)
        .collect();
    let mut point_slopes: Vec<f64> = groups
        .iter()
        .map(|g| loglog_slope(eps, &g.iter().map(|r| r.comparison.gap).collect::<Vec<_>>()))
        .collect();
    let mut rows: Vec<StabilityRow> = groups.into_iter().flatten().collect();
    let mut comps: Vec<StabilityComparison> = rows.iter().map(|r| r.comparison).collect();
    let c1 = fit_bound_constant(&mut comps);
    for (r, c) in rows.iter_mut().zip(comps) {
        r.comparison = c;
    }
    Ok(StabilitySweep {
        rows,
        eps: eps.to_vec(),
        slope: loglog_slope(eps, &mean_gap),
        mean_gap,
        median_point_slope: median(&mut point_slopes),
        c1,
        skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffRow {
    pub t: f64,
    pub value: f64,
    pub deviation: f64,
    pub quad_error: f64,
    pub error_bar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffSweep {
    pub rows: Vec<BirkhoffRow>,
    pub trend: Trend,
    /// Final deviation at most three times its error bar.
    pub final_within: bool,
}

pub fn unique_ergodicity_sweep(
    a: &Observable,
    rho: &GroupElement,
    windows: &[f64],
    reference: &LiouvilleReference,
) -> Result<BirkhoffSweep> {
    let rows = windows
        .par_iter()
        .map(|&t| {
            let e = horocycle_birkhoff(a, rho, t)?;
            Ok(BirkhoffRow {
                t,
                value: e.value,
                deviation: (e.value - reference.mean).abs(),
                quad_error: e.quad_error,
                error_bar: reference.mc_error + e.quad_error,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let trend = Trend::of(
        &rows.iter().map(|r| r.deviation).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.error_bar).collect::<Vec<_>>(),
    );
    let final_within = rows.last().is_some_and(|r| r.deviation <= 3.0 * r.error_bar);
    Ok(BirkhoffSweep { rows, trend, final_within })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingRow {
    pub s: f64,
    pub b: f64,
    pub value: f64,
    pub deviation: f64,
    pub quad_error: f64,
    pub error_bar: f64,
    pub change_of_variables: f64,
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingSweep {
    pub rows: Vec<MixingRow>,
    /// Rows at the largest `s` for `b/2`, `b`, `2b`, used to fit `C`.
    pub b_rows: Vec<MixingRow>,
    /// Smallest `C` with discrepancy `≤ C·b` on the `b` rows.
    pub c_fit: f64,
    pub trend: Trend,
    /// Final deviation within `C·b` plus its error bar.
    pub final_within: bool,
}

pub fn mixing_sweep(
    a: &Observable,
    rho: &GroupElement,
    b: f64,
    shifts: &[f64],
    reference: &LiouvilleReference,
) -> Result<MixingSweep> {
    let row = |b: f64, s: f64| -> Result<MixingRow> {
        let m = mixing_average(a, rho, b, s)?;
        Ok(MixingRow {
            s,
            b,
            value: m.value,
            deviation: (m.value - reference.mean).abs(),
            quad_error: m.quad_error,
            error_bar: reference.mc_error + m.quad_error,
            change_of_variables: m.change_of_variables,
            discrepancy: m.discrepancy,
        })
    };
    let rows = shifts.par_iter().map(|&s| row(b, s)).collect::<Result<Vec<_>>>()?;
    let s_max = shifts.iter().copied().fold(0.0, f64::max);
    let b_rows =
        [0.5 * b, b, (2.0 * b).min(1.0)].par_iter().map(|&bb| row(bb, s_max)).collect::<Result<Vec<_>>>()?;
    let c_fit = fit_constant(
        &b_rows.iter().map(|r| r.b).collect::<Vec<_>>(),
        &b_rows.iter().map(|r| r.discrepancy).collect::<Vec<_>>(),
    );
    let trend = Trend::of(
        &rows.iter().map(|r| r.deviation).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.error_bar).collect::<Vec<_>>(),
    );
    let final_within = rows.last().is_some_and(|r| r.deviation <= c_fit * b + r.error_bar);
    Ok(MixingSweep { rows, b_rows, c_fit, trend, final_within })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadlineRow {
    pub point: usize,
    pub report: EquidistReport,
    /// Same average with `ε = 0`.
    pub unperturbed: f64,
    /// Horocycle surrogate of the average.
    pub surrogate: f64,
    pub surrogate_gap: f64,
    pub shape: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadlineSweep {
    pub rows: Vec<HeadlineRow>,
    pub eps0: Vec<f64>,
    /// Batch mean deviation per `ε₀`.
    pub mean_deviation: Vec<f64>,
    pub error_bar: Vec<f64>,
    /// Largest deviation over the batch per `ε₀` (a sample, not a supremum).
    pub worst_deviation: Vec<f64>,
    pub trend: Trend,
    /// Points whose own deviations pass the trend test.
    pub points_decreasing: usize,
    /// `C₁` fitted on the surrogate gaps against the four-term shape.
    pub c1: f64,
}

/// `I(ε₀, b, T)` over a batch of starting points and the `ε₀` list, with
/// `ε = ε₀` and the unperturbed and horocycle-surrogate companions.
pub fn headline_sweep(
    a: &Observable,
    points: &[ChartPhasePoint],
    eps0: &[f64],
    base: &ExperimentParams,
    n: usize,
    cfg: &ExperimentConfig,
    reference: &LiouvilleReference,
) -> Result<HeadlineSweep> {
    let mut rows = Vec::new();
    for (k, p) in points.iter().enumerate() {
        for &e0 in eps0 {
            let params = ExperimentParams { eps0: e0, ..*base };
            let report = main_experiment(a, p, e0, &params, cfg, reference)?;
            let unperturbed = geodesic_window_average(a, p, params.b(), params.t(), cfg.n_quad)?;
            let surrogate = reparam_horocycle_average(a, p, e0, params.b(), params.t(), n, cfg).unwrap_or(f64::NAN);
            rows.push(HeadlineRow {
                point: k,
                surrogate_gap: (report.estimate - surrogate).abs(),
                shape: bound_shape(e0, params.b(), params.t(), n, p.norm_xi()),
                report,
                unperturbed,
                surrogate,
            });
        }
    }
    let m = eps0.len();
    let tol = cfg.integrator.energy_tol;
    let column = |i: usize| rows.iter().skip(i).step_by(m).collect::<Vec<_>>();
    let mean_deviation: Vec<f64> =
        (0..m).map(|i| column(i).iter().map(|r| r.report.deviation).sum::<f64>() / points.len().max(1) as f64).collect();
    let error_bar: Vec<f64> = (0..m)
        .map(|i| column(i).iter().map(|r| r.report.error_bar(tol)).sum::<f64>() / points.len().max(1) as f64)
        .collect();
    let worst_deviation: Vec<f64> =
        (0..m).map(|i| column(i).iter().map(|r| r.report.deviation).fold(0.0, f64::max)).collect();
    let points_decreasing = rows
        .chunks(m)
        .filter(|c| {
            let d: Vec<f64> = c.iter().map(|r| r.report.deviation).collect();
            let e: Vec<f64> = c.iter().map(|r| r.report.error_bar(tol)).collect();
            Trend::of(&d, &e).holds()
        })
        .count();
    let finite: Vec<&HeadlineRow> = rows.iter().filter(|r| r.surrogate_gap.is_finite()).collect();
    let c1 = fit_constant(
        &finite.iter().map(|r| r.shape).collect::<Vec<_>>(),
        &finite.iter().map(|r| r.surrogate_gap).collect::<Vec<_>>(),
    );
    Ok(HeadlineSweep {
        trend: Trend::of(&mean_deviation, &error_bar),
        rows,
        eps0: eps0.to_vec(),
        mean_deviation,
        error_bar,
        worst_deviation,
        points_decreasing,
        c1,
    })
}

/// Observable of the same kind on another potential.
pub fn with_potential(a: &Observable, potential: Arc<PotentialField>) -> Observable {
    Observable::new(a.kind(), potential)
}
