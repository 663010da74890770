//! The experiment subcommands. Each returns its tables and the names of any
//! failed invariants.

use std::f64::consts::PI;
use std::fs;
use std::sync::Arc;

use hypflow_core::cartan::CoverParams;
use hypflow_core::checks::{
    cartan_certificate_batch, commutation_residual, cover_soundness_batch, pinned_start, sample_in_k_vj,
    unstable_growth_exponents, worst_energy_drift, worst_unperturbed_error,
};
use hypflow_core::equidist::liouville_average;
use hypflow_core::hyperbolic::{to_chart, GroupElement};
use hypflow_core::potential::{default_potential, radial_control_point, radial_control_potential, scan_critical};
use hypflow_core::quotient::bolza_group;
use hypflow_core::stability::{beta_u_cocycle_residual, ComparisonSetup};
use hypflow_core::sweeps::{
    headline_sweep, mixing_sweep, stability_sweep, unique_ergodicity_sweep, with_potential, HeadlineSweep,
};
use hypflow_core::{
    ExperimentConfig, FuchsianGroup, Observable, PotentialField, QuadratureConfig, StencilConfig,
};

use crate::config::RunConfig;
use crate::output::{Cell, Table};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    SurfaceInfo,
    FlowCheck,
    ScanCritical,
    StabilitySweep,
    CartanVerify,
    Equidistribution,
    UniqueErgodicity,
    Mixing,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::SurfaceInfo,
        Command::FlowCheck,
        Command::ScanCritical,
        Command::StabilitySweep,
        Command::CartanVerify,
        Command::Equidistribution,
        Command::UniqueErgodicity,
        Command::Mixing,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::SurfaceInfo => "surface-info",
            Command::FlowCheck => "flow-check",
            Command::ScanCritical => "scan-critical",
            Command::StabilitySweep => "stability-sweep",
            Command::CartanVerify => "cartan-verify",
            Command::Equidistribution => "equidistribution",
            Command::UniqueErgodicity => "unique-ergodicity",
            Command::Mixing => "mixing",
        }
    }
}

#[derive(Debug, Default)]
pub struct CommandOutput {
    pub tables: Vec<Table>,
    pub failures: Vec<String>,
}

pub struct Context {
    pub cfg: RunConfig,
    pub group: Arc<FuchsianGroup>,
    pub potential: Arc<PotentialField>,
    pub observable: Observable,
}

impl Context {
    pub fn new(cfg: RunConfig) -> Result<Self, CliError> {
        cfg.validate()?;
        let group = Arc::new(bolza_group());
        let potential = match &cfg.potential {
            Some(path) => Arc::new(PotentialField::from_text(&fs::read_to_string(path)?, group.clone())?),
            None => Arc::new(default_potential(group.clone())),
        };
        let observable = Observable::new(cfg.observable, potential.clone());
        Ok(Self { cfg, group, potential, observable })
    }

    fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig { n_quad: self.cfg.n_quad, integrator: self.cfg.integrator, ..Default::default() }
    }
}

pub fn run_command(cmd: Command, ctx: &Context) -> Result<CommandOutput, CliError> {
    match cmd {
        Command::SurfaceInfo => surface_info(ctx),
        Command::FlowCheck => flow_check(ctx),
        Command::ScanCritical => scan(ctx),
        Command::StabilitySweep => stability(ctx),
        Command::CartanVerify => cartan(ctx),
        Command::Equidistribution => equidistribution(ctx),
        Command::UniqueErgodicity => unique_ergodicity(ctx),
        Command::Mixing => mixing(ctx),
    }
}

fn chart_cells(p: &hypflow_core::ChartPhasePoint) -> Vec<Cell> {
    vec![p.u.into(), p.v.into(), p.pu.into(), p.pv.into()]
}

fn surface_info(ctx: &Context) -> Result<CommandOutput, CliError> {
    let g = &ctx.group;
    let n = (ctx.cfg.liouville_n / 10).max(1000);
    let (_, stats) = g.sample_liouville_with_stats(n, ctx.cfg.seed, 1)?;
    let area = stats.area_estimate();
    let exact = 4.0 * PI;
    let mut t = Table::new("surface_info", &["quantity", "value"]);
    let mut put = |k: &str, v: Cell| t.push(vec![k.into(), v]);
    put("generators", g.generators().len().into());
    put("relation_residual", g.relation_residual().into());
    put("domain_radius", g.domain_radius().into());
    put("area_estimate", area.into());
    put("area_exact", exact.into());
    put("area_relative_error", ((area - exact) / exact).abs().into());
    put("acceptance", stats.acceptance().into());
    put("area_samples", n.into());
    put("potential_translates", ctx.potential.translate_count().into());
    let mut gens = Table::new("surface_generators", &["index", "a", "b", "c", "d", "trace"]);
    for (k, e) in g.generators().iter().enumerate() {
        let [a, b, c, d] = e.entries();
        gens.push(vec![k.into(), a.into(), b.into(), c.into(), d.into(), e.trace().into()]);
    }
    let mut failures = Vec::new();
    if !(g.relation_residual() <= 1e-10) {
        failures.push(format!("group relation residual {} > 1e-10", g.relation_residual()));
    }
    Ok(CommandOutput { tables: vec![t, gens], failures })
}

fn flow_check(ctx: &Context) -> Result<CommandOutput, CliError> {
    let cfg = &ctx.cfg;
    let quick = cfg.check_samples < 4;
    let triples = if quick { 1000 } else { 10_000 };
    let mut rows: Vec<(&str, f64, f64)> = Vec::new();
    rows.push(("commutation_residual", commutation_residual(triples, cfg.seed), 1e-12));
    let rate = unstable_growth_exponents(cfg.check_samples * 4, cfg.seed)
        .into_iter()
        .map(|e| (e - 1.0).abs())
        .fold(0.0, f64::max);
    rows.push(("unstable_rate_error", rate, 0.01));
    rows.push(("relation_residual", ctx.group.relation_residual(), 1e-10));
    rows.push((
        "energy_drift",
        worst_energy_drift(&ctx.potential, 1e-2, 15.0, cfg.check_samples, cfg.seed, &cfg.integrator)?,
        cfg.integrator.energy_tol,
    ));
    rows.push((
        "unperturbed_error",
        worst_unperturbed_error(&ctx.potential, 10.0, cfg.check_samples, cfg.seed, &cfg.integrator)?,
        1e-8,
    ));
    let pts = ctx.group.sample_liouville(cfg.check_samples * 4, cfg.seed ^ 0x5eed)?;
    let mut invariance = 0.0f64;
    for (k, g) in pts.iter().enumerate() {
        let gamma = ctx.group.generators()[k % ctx.group.generators().len()];
        let z = g.base_point();
        invariance = invariance.max((ctx.potential.eval_v(gamma.act(z)) - ctx.potential.eval_v(z)).abs());
    }
    rows.push(("potential_invariance", invariance, 1e-10));
    let q = QuadratureConfig::default();
    let mut cocycle = 0.0f64;
    for g in pts.iter().take(cfg.check_samples) {
        cocycle = cocycle.max(beta_u_cocycle_residual(&ctx.potential, g, 1.5, &q)?);
    }
    rows.push(("beta_cocycle_residual", cocycle, 1e-8));

    let mut t = Table::new("flow_check", &["check", "value", "threshold", "pass"]);
    let mut failures = Vec::new();
    for (name, value, threshold) in rows {
        let pass = value <= threshold;
        if !pass {
            failures.push(format!("{name}: {value:e} > {threshold:e}"));
        }
        t.push(vec![name.into(), value.into(), threshold.into(), pass.into()]);
    }
    Ok(CommandOutput { tables: vec![t], failures })
}

fn scan(ctx: &Context) -> Result<CommandOutput, CliError> {
    let r = scan_critical(&ctx.potential, ctx.cfg.scan_j, ctx.cfg.scan_grid, &StencilConfig::default())?;
    let mut t = Table::new(
        "scan_critical",
        &["j", "grid_size", "points", "min_over_grid", "lipschitz", "spacing", "margin", "verdict", "u", "v", "pu", "pv"],
    );
    let mut row: Vec<Cell> = vec![
        r.j.into(),
        r.grid_size.into(),
        r.points.into(),
        r.min_over_grid.into(),
        r.lipschitz.into(),
        r.spacing.into(),
        r.margin.into(),
        format!("{:?}", r.verdict).into(),
    ];
    row.extend(chart_cells(&r.argmin));
    t.push(row);
    let mut failures = Vec::new();
    if !(r.min_over_grid > 0.0) {
        failures.push(format!("scan minimum {} is not positive", r.min_over_grid));
    }
    Ok(CommandOutput { tables: vec![t], failures })
}

fn stability(ctx: &Context) -> Result<CommandOutput, CliError> {
    let cfg = &ctx.cfg;
    let points: Vec<_> = ctx.group.sample_liouville(cfg.samples * 2, cfg.seed)?.iter().map(to_chart).collect();
    let q = QuadratureConfig::default();
    let st = StencilConfig::default();
    let setup = ComparisonSetup { quadrature: &q, integrator: &cfg.integrator, stencil: &st };
    let sw = stability_sweep(
        &ctx.potential,
        &points,
        &cfg.stability_eps,
        cfg.stability_s,
        cfg.stability_t,
        cfg.n,
        &ctx.observable,
        &setup,
    )?;
    let mut t = Table::new(
        "stability_sweep",
        &["point", "eps", "s", "t", "n", "lhs", "rhs", "rhs_plain", "gap", "gap_plain", "shape", "bound", "seed"],
    );
    for r in &sw.rows {
        let c = &r.comparison;
        t.push(vec![
            r.point.into(),
            c.eps.into(),
            c.s.into(),
            c.t.into(),
            c.n.into(),
            c.lhs.into(),
            c.rhs.into(),
            c.rhs_plain.into(),
            c.gap.into(),
            c.gap_plain.into(),
            c.shape.into(),
            c.bound.into(),
            cfg.seed.into(),
        ]);
    }
    let mut s = Table::new("stability_summary", &["quantity", "value"]);
    for (e, g) in sw.eps.iter().zip(&sw.mean_gap) {
        s.push(vec![format!("mean_gap@{e:e}").into(), (*g).into()]);
    }
    s.push(vec!["slope".into(), sw.slope.into()]);
    s.push(vec!["median_point_slope".into(), sw.median_point_slope.into()]);
    s.push(vec!["c1".into(), sw.c1.into()]);
    s.push(vec!["skipped_points".into(), sw.skipped.into()]);
    Ok(CommandOutput { tables: vec![t, s], failures: vec![] })
}

fn cartan(ctx: &Context) -> Result<CommandOutput, CliError> {
    let cfg = &ctx.cfg;
    let batch = cartan_certificate_batch(cfg.cartan_instances, cfg.cartan_samples, cfg.seed)?;
    let mut t = Table::new(
        "cartan_certificates",
        &["instance", "degree", "h", "disks", "total_radius", "samples", "violations", "min_ratio"],
    );
    let mut failures = Vec::new();
    for (k, i) in batch.iter().enumerate() {
        if i.violations > 0 {
            failures.push(format!("Cartan bound violated in instance {k} ({} samples)", i.violations));
        }
        t.push(vec![
            k.into(),
            i.degree.into(),
            i.h.into(),
            i.disks.into(),
            i.total_radius.into(),
            i.samples.into(),
            i.violations.into(),
            i.min_ratio.into(),
        ]);
    }
    let st = StencilConfig::default();
    let j = 1;
    let points = sample_in_k_vj(&ctx.potential, cfg.cover_points, j, cfg.eta0, cfg.seed, &st)?;
    let params = CoverParams { s0: cfg.cover_s0, theta: cfg.theta, j, eta0: cfg.eta0 };
    let covers = cover_soundness_batch(&ctx.potential, &points, cfg.n.max(j + 1), &params, &st)?;
    let mut c = Table::new(
        "exceptional_covers",
        &["point", "dominant_index", "intervals", "total_length", "c0", "violations", "u", "v", "pu", "pv"],
    );
    for (k, (cov, p)) in covers.iter().zip(&points).enumerate() {
        if !cov.certified() {
            failures.push(format!("exceptional cover {k} misses {} scan points", cov.violations));
        }
        let mut row: Vec<Cell> = vec![
            k.into(),
            cov.dominant_index.map_or(-1, |d| d as i64).to_string().into(),
            cov.intervals.len().into(),
            cov.total_length.into(),
            cov.c0.into(),
            cov.violations.into(),
        ];
        row.extend(chart_cells(p));
        c.push(row);
    }
    Ok(CommandOutput { tables: vec![t, c], failures })
}

fn headline_tables(name: &str, sw: &HeadlineSweep, seed: u64) -> (Table, Table) {
    let mut t = Table::new(
        name,
        &[
            "point", "eps0", "eps", "b", "t", "c", "nu1", "nu2", "estimate", "liouville_ref", "deviation", "mc_error",
            "quad_error", "unperturbed", "surrogate", "surrogate_gap", "shape", "u", "v", "pu", "pv", "observable",
            "n_quad", "seed", "warning",
        ],
    );
    for r in &sw.rows {
        let p = &r.report;
        let mut row: Vec<Cell> = vec![
            r.point.into(),
            p.eps0.into(),
            p.eps.into(),
            p.b.into(),
            p.t.into(),
            p.c.into(),
            p.nu1.into(),
            p.nu2.into(),
            p.estimate.into(),
            p.liouville_ref.into(),
            p.deviation.into(),
            p.mc_error.into(),
            p.quad_error.into(),
            r.unperturbed.into(),
            r.surrogate.into(),
            r.surrogate_gap.into(),
            r.shape.into(),
        ];
        row.extend(p.rho0.iter().map(|&x| Cell::from(x)));
        row.push(p.observable.clone().into());
        row.push(p.n_quad.into());
        row.push(seed.into());
        row.push(p.warning.clone().unwrap_or_default().into());
        t.push(row);
    }
    let mut s = Table::new(&format!("{name}_summary"), &["eps0", "mean_deviation", "error_bar", "worst_deviation"]);
    for k in 0..sw.eps0.len() {
        s.push(vec![
            sw.eps0[k].into(),
            sw.mean_deviation[k].into(),
            sw.error_bar[k].into(),
            sw.worst_deviation[k].into(),
        ]);
    }
    (t, s)
}

fn equidistribution(ctx: &Context) -> Result<CommandOutput, CliError> {
    let cfg = &ctx.cfg;
    let exp = ctx.experiment();
    let reference = liouville_average(&ctx.observable, cfg.liouville_n, cfg.seed)?;
    let points = sample_in_k_vj(&ctx.potential, cfg.samples, cfg.j, cfg.eta0, cfg.seed, &exp.stencil)?;
    let base = cfg.params(cfg.eps0[0]);
    let sw = headline_sweep(&ctx.observable, &points, &cfg.eps0, &base, cfg.n, &exp, &reference)?;

    let control_pot = Arc::new(radial_control_potential(ctx.group.clone()));
    let control_obs = with_potential(&ctx.observable, control_pot);
    let control_ref = liouville_average(&control_obs, cfg.liouville_n, cfg.seed)?;
    let control = headline_sweep(&control_obs, &[radial_control_point(0.3, 0.0)], &cfg.eps0, &base, cfg.n, &exp, &control_ref)?;

    let (t, s) = headline_tables("equidistribution", &sw, cfg.seed);
    let (ct, cs) = headline_tables("equidistribution_control", &control, cfg.seed);
    let mut v = Table::new("equidistribution_verdict", &["quantity", "value"]);
    v.push(vec!["points".into(), points.len().into()]);
    v.push(vec!["liouville_ref".into(), reference.mean.into()]);
    v.push(vec!["liouville_mc_error".into(), reference.mc_error.into()]);
    v.push(vec!["mean_deviation_decreasing".into(), sw.trend.holds().into()]);
    v.push(vec!["points_decreasing".into(), sw.points_decreasing.into()]);
    v.push(vec!["control_decreasing".into(), control.trend.holds().into()]);
    v.push(vec!["surrogate_c1".into(), sw.c1.into()]);
    Ok(CommandOutput { tables: vec![t, s, ct, cs, v], failures: vec![] })
}

fn pinned(ctx: &Context) -> Result<GroupElement, CliError> {
    Ok(pinned_start(&ctx.potential, ctx.cfg.seed)?)
}

fn unique_ergodicity(ctx: &Context) -> Result<CommandOutput, CliError> {
    let cfg = &ctx.cfg;
    let reference = liouville_average(&ctx.observable, cfg.liouville_n, cfg.seed)?;
    let sw = unique_ergodicity_sweep(&ctx.observable, &pinned(ctx)?, &cfg.birkhoff_t, &reference)?;
    let mut t = Table::new(
        "unique_ergodicity",
        &["t", "value", "liouville_ref", "deviation", "quad_error", "mc_error", "error_bar", "seed"],
    );
    for r in &sw.rows {
        t.push(vec![
            r.t.into(),
            r.value.into(),
            reference.mean.into(),
            r.deviation.into(),
            r.quad_error.into(),
            reference.mc_error.into(),
            r.error_bar.into(),
            cfg.seed.into(),
        ]);
    }
    let mut v = Table::new("unique_ergodicity_verdict", &["quantity", "value"]);
    v.push(vec!["decreasing_steps".into(), sw.trend.decreasing.into()]);
    v.push(vec!["decreasing".into(), sw.trend.holds().into()]);
    v.push(vec!["final_within_3_error_bars".into(), sw.final_within.into()]);
    Ok(CommandOutput { tables: vec![t, v], failures: vec![] })
}

fn mixing(ctx: &Context) -> Result<CommandOutput, CliError> {
    let cfg = &ctx.cfg;
    let reference = liouville_average(&ctx.observable, cfg.liouville_n, cfg.seed)?;
    let sw = mixing_sweep(&ctx.observable, &pinned(ctx)?, cfg.mixing_b, &cfg.mixing_s, &reference)?;
    let header = ["s", "b", "value", "deviation", "quad_error", "error_bar", "change_of_variables", "discrepancy", "seed"];
    let fill = |name: &str, rows: &[hypflow_core::sweeps::MixingRow]| {
        let mut t = Table::new(name, &header);
        for r in rows {
            t.push(vec![
                r.s.into(),
                r.b.into(),
                r.value.into(),
                r.deviation.into(),
                r.quad_error.into(),
                r.error_bar.into(),
                r.change_of_variables.into(),
                r.discrepancy.into(),
                cfg.seed.into(),
            ]);
        }
        t
    };
    let mut v = Table::new("mixing_verdict", &["quantity", "value"]);
    v.push(vec!["liouville_ref".into(), reference.mean.into()]);
    v.push(vec!["c_fit".into(), sw.c_fit.into()]);
    v.push(vec!["decreasing".into(), sw.trend.holds().into()]);
    v.push(vec!["final_within_cb".into(), sw.final_within.into()]);
    Ok(CommandOutput { tables: vec![fill("mixing", &sw.rows), fill("mixing_b_sweep", &sw.b_rows), v], failures: vec![] })
}
