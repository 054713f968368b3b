//! Executes the checks requested by a scenario.

use std::collections::HashSet;
use std::time::Instant;

use bergman_core::comparison::{
    max_principle_from_densities, sandwich_check, strictness_check, DensityPair, MaxPrincipleVerdict,
    StrictnessVerdict,
};
use bergman_core::homotopy::{
    derivative_forms, difference_quotient_bounds, g_central_difference, g_derivative_forms, l2_difference_bounds,
    observed_order, weight_at, HomotopyPath,
};
use bergman_core::kernel::{kernel_matrix, kernel_monotonicity_check, reproducing_residual, FunctionSpan, WeightedSpace};
use bergman_core::measure::{eval_weight, MeasureKind, QuadratureMeasure, WeightFamily, WeightFunction};
use bergman_core::quantization::{fock_origin_ratio, tcz_convergence_report, DegreeRule};
use rayon::prelude::*;

use crate::config::{Check, Params, ScenarioConfig, Tolerances};
use crate::error::HarnessError;
use crate::report::{
    CheckResult, ComparisonRow, HomotopyRow, MaxPrincipleRow, RunMeta, RunReport, StructuralRow, Tables, TczRow, Timing,
};

type CoreResult<T> = bergman_core::Result<T>;

/// Results of every check on one scenario, in declared order.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub id: String,
    pub checks: Vec<CheckResult>,
    pub tables: Tables,
    pub timings: Vec<Timing>,
}

impl ScenarioOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

struct Ctx<'a> {
    id: &'a str,
    measure: &'a QuadratureMeasure,
    span: &'a FunctionSpan,
    phi: &'a WeightFunction,
    psi: &'a WeightFunction,
    phi_family: &'a WeightFamily,
    params: &'a Params,
    tol: Tolerances,
}

pub fn run_scenario(config: &ScenarioConfig, tol_scale: f64) -> Result<ScenarioOutcome, HarnessError> {
    let wrap = |e| HarnessError::Scenario {
        id: config.id.clone(),
        source: e,
    };
    let measure = config.measure.build().map_err(wrap)?;
    let span = config.span.build(&measure).map_err(wrap)?;
    let phi = eval_weight(&config.phi, &measure).map_err(wrap)?;
    let psi = eval_weight(&config.psi, &measure).map_err(wrap)?;
    let ctx = Ctx {
        id: &config.id,
        measure: &measure,
        span: &span,
        phi: &phi,
        psi: &psi,
        phi_family: &config.phi,
        params: &config.params,
        tol: config.params.tolerances.scaled(tol_scale),
    };
    let mut outcome = ScenarioOutcome {
        id: config.id.clone(),
        checks: Vec::new(),
        tables: Tables::default(),
        timings: Vec::new(),
    };
    for &check in &config.checks {
        let start = Instant::now();
        let mut result = CheckResult::new(&config.id, check);
        let run = match check {
            Check::Structural => structural(&ctx, &mut result, &mut outcome.tables),
            Check::Comparison => comparison(&ctx, &mut result, &mut outcome.tables),
            Check::Sweep => sweep(&ctx, &mut result, &mut outcome.tables),
            Check::Homotopy => homotopy(&ctx, &mut result, &mut outcome.tables),
            Check::Tcz => tcz(&ctx, &mut result, &mut outcome.tables),
            Check::Maxprinciple => maxprinciple(&ctx, &mut result, &mut outcome.tables),
        };
        run.map_err(wrap)?;
        outcome.timings.push(Timing {
            scenario_id: config.id.clone(),
            check,
            seconds: start.elapsed().as_secs_f64(),
        });
        outcome.checks.push(result);
    }
    Ok(outcome)
}

fn structural(ctx: &Ctx<'_>, res: &mut CheckResult, tables: &mut Tables) -> CoreResult<()> {
    let tol = &ctx.tol;
    for (name, weight) in [("phi", ctx.phi), ("psi", ctx.psi)] {
        let space = WeightedSpace::new(ctx.span, ctx.measure, weight.clone())?;
        let kernel = kernel_matrix(&space);
        let density = space.density();
        let rank = space.rank();
        let trace = density.integral(ctx.measure);
        let trace_err = (trace - rank as f64).abs();
        let k_max = kernel.diagonal().into_iter().fold(0.0, f64::max);
        let reproducing = reproducing_residual(&kernel, weight, ctx.measure)? / (1.0 + k_max);
        let defect = space.orthonormality_defect();
        let min_eig = kernel.min_eigenvalue();
        let max_eig = kernel.max_eigenvalue();
        let shifted = WeightedSpace::new(ctx.span, ctx.measure, weight.shifted(1.0))?.density();
        let shift_dev = density
            .values
            .iter()
            .zip(&shifted.values)
            .map(|(a, b)| (a - b).abs() / (1.0 + a.abs()))
            .fold(0.0, f64::max);
        res.require(trace_err <= tol.trace * (rank as f64).max(1.0), || {
            format!("{name}: trace {trace} differs from rank {rank} by {trace_err:e}")
        });
        res.require(reproducing <= tol.reproducing, || {
            format!("{name}: reproducing residual {reproducing:e}")
        });
        res.require(defect <= tol.orthonormality, || format!("{name}: orthonormality defect {defect:e}"));
        res.require(min_eig >= -tol.psd * max_eig.max(0.0), || {
            format!("{name}: kernel eigenvalue {min_eig:e} below zero")
        });
        res.require(shift_dev <= tol.shift_covariance, || {
            format!("{name}: constant shift changed the density by {shift_dev:e}")
        });
        res.metric(&format!("{name}_rank"), rank as f64);
        res.metric(&format!("{name}_trace_err"), trace_err);
        res.metric(&format!("{name}_reproducing"), reproducing);
        tables.structural.push(StructuralRow {
            scenario_id: ctx.id.to_string(),
            weight: name.to_string(),
            rank,
            trace,
            trace_err,
            reproducing_residual: reproducing,
            orthonormality_defect: defect,
            min_eigenvalue: min_eig,
            shift_dev,
        });
    }
    let ranks = (res.metrics["phi_rank"], res.metrics["psi_rank"]);
    res.require(ranks.0 == ranks.1, || {
        format!("rank {} under phi but {} under psi", ranks.0, ranks.1)
    });
    // Lowering the weight can only shrink the kernel diagonal.
    let lower = bergman_core::comparison::reduce_less_singular(ctx.phi, ctx.psi)?;
    let lower = WeightedSpace::new(ctx.span, ctx.measure, lower)?;
    for (name, weight) in [("phi", ctx.phi), ("psi", ctx.psi)] {
        let upper = WeightedSpace::new(ctx.span, ctx.measure, weight.clone())?;
        let ok = kernel_monotonicity_check(&lower, &upper)?;
        res.require(ok, || format!("kernel of min(phi, psi) exceeds kernel of {name}"));
    }
    Ok(())
}

fn verdict(ok: bool, strict: StrictnessVerdict) -> String {
    if ok {
        strict.as_str().to_string()
    } else {
        "comparison-violated".to_string()
    }
}

fn comparison_rows(
    ctx: &Ctx<'_>,
    pair: &DensityPair<'_>,
    shifts: &[f64],
    res: &mut CheckResult,
    tables: &mut Tables,
) -> Vec<usize> {
    let tol = &ctx.tol;
    let mut sizes = Vec::with_capacity(shifts.len());
    let mut worst = f64::INFINITY;
    for &c in shifts {
        let r = pair.report(c);
        let ok = r.margin >= -tol.comparison * (1.0 + r.rhs);
        let strict = strictness_check(&r, r.rank_psi > 0);
        res.require(ok, || {
            format!("c = {c}: lhs {} exceeds rhs {} by {:e}", r.lhs, r.rhs, -r.margin)
        });
        res.require(strict != StrictnessVerdict::Violated, || {
            format!("c = {c}: margin {:e} not strict on a domain measure", r.margin)
        });
        worst = worst.min(r.margin);
        sizes.push(r.set_size);
        tables.comparison.push(ComparisonRow {
            scenario_id: ctx.id.to_string(),
            c,
            set_size: r.set_size,
            set_proper: r.set_proper,
            lhs: r.lhs,
            rhs: r.rhs,
            margin: r.margin,
            verdict: verdict(ok, strict),
        });
    }
    res.metric("min_margin", worst);
    sizes
}

fn comparison(ctx: &Ctx<'_>, res: &mut CheckResult, tables: &mut Tables) -> CoreResult<()> {
    let pair = DensityPair::new(ctx.phi, ctx.psi, ctx.span, ctx.measure)?;
    comparison_rows(ctx, &pair, &[0.0], res, tables);
    let chain = sandwich_check(ctx.phi, ctx.psi, ctx.span, ctx.measure)?;
    res.require(chain.sets_agree, || "reduced weight changed the sublevel set".into());
    res.require(chain.failing_link().is_none(), || {
        format!(
            "sandwich {} <= {} <= {} fails at {:?}",
            chain.lhs,
            chain.middle,
            chain.rhs,
            chain.failing_link()
        )
    });
    res.metric("sandwich_middle", chain.middle);
    Ok(())
}

fn sweep(ctx: &Ctx<'_>, res: &mut CheckResult, tables: &mut Tables) -> CoreResult<()> {
    let pair = DensityPair::new(ctx.phi, ctx.psi, ctx.span, ctx.measure)?;
    let sizes = comparison_rows(ctx, &pair, &ctx.params.c_grid, res, tables);
    let mut by_shift: Vec<(f64, usize)> = ctx.params.c_grid.iter().copied().zip(sizes).collect();
    by_shift.sort_by(|a, b| a.0.total_cmp(&b.0));
    res.require(by_shift.windows(2).all(|w| w[0].1 <= w[1].1), || {
        "sublevel set sizes decrease with the shift".into()
    });
    Ok(())
}

fn homotopy(ctx: &Ctx<'_>, res: &mut CheckResult, tables: &mut Tables) -> CoreResult<()> {
    let tol = &ctx.tol;
    let p = ctx.params;
    let path = HomotopyPath::new(ctx.phi, ctx.psi)?.with_t_grid(p.t_grid.clone());
    let rho = path.sublevel_indicator();
    let mut curve = Vec::with_capacity(p.t_grid.len());
    let (mut worst_dev, mut worst_fd, mut min_crossing) = (0.0f64, 0.0f64, f64::INFINITY);
    for &t in &p.t_grid {
        let d = g_derivative_forms(&path, &rho, t, p.fd_step, ctx.span, ctx.measure)?;
        res.require(d.max_pairwise_dev <= tol.derivative_forms, || {
            format!("t = {t}: derivative forms disagree by {:e}", d.max_pairwise_dev)
        });
        res.require(d.crossing >= -tol.nonnegativity, || {
            format!("t = {t}: crossing form {:e} is negative", d.crossing)
        });
        worst_dev = worst_dev.max(d.max_pairwise_dev);
        worst_fd = worst_fd.max((d.fd_estimate - d.crossing).abs() / (1.0 + d.crossing.abs()));
        min_crossing = min_crossing.min(d.crossing);
        curve.push((t, d.g_value));
        tables.homotopy.push(HomotopyRow {
            scenario_id: ctx.id.to_string(),
            t,
            g: d.g_value,
            rhs26: d.direct,
            rhs27: d.symmetric,
            rhs28: d.crossing,
            fd: d.fd_estimate,
            fd_step: d.fd_step,
            max_pairwise_dev: d.max_pairwise_dev,
        });
    }
    res.metric("max_pairwise_dev", worst_dev);
    res.metric("max_fd_err_grid", worst_fd);
    res.metric("min_crossing", min_crossing);

    let mut ordered = curve.clone();
    ordered.sort_by(|a, b| a.0.total_cmp(&b.0));
    let worst_drop = ordered.windows(2).map(|w| w[0].1 - w[1].1).fold(0.0, f64::max);
    res.require(worst_drop <= tol.monotone, || format!("G drops by {worst_drop:e} along the path"));
    res.metric("max_drop", worst_drop);

    let pair = DensityPair::new(ctx.phi, ctx.psi, ctx.span, ctx.measure)?;
    let ends = pair.report(0.0);
    for (t, want) in [(0.0, ends.lhs), (1.0, ends.rhs)] {
        if let Some(&(_, g)) = curve.iter().find(|(s, _)| *s == t) {
            let err = (g - want).abs();
            res.require(err <= tol.endpoints * (1.0 + want.abs()), || {
                format!("G({t}) = {g} but the comparison integral is {want}")
            });
        }
    }

    let fd = fd_check(ctx, &path, &rho)?;
    res.metric("fd_err", fd.err_at_step);
    res.require(fd.err_at_step <= tol.fd, || {
        format!("t = {}: central difference off by {:e}", p.fd_order_t, fd.err_at_step)
    });
    if let Some(order) = fd.order {
        res.metric("fd_order", order);
        res.require((order - 2.0).abs() <= tol.fd_order, || format!("central difference order {order:.3}"));
    }

    let t0 = 0.0;
    let (mut worst_ratio, mut violations) = (0.0f64, 0usize);
    for &tau in &p.bound_steps {
        let dq = difference_quotient_bounds(&path, t0, tau, ctx.span, ctx.measure)?;
        let l2 = l2_difference_bounds(&path, t0, tau, ctx.span, ctx.measure)?;
        for (kind, checks) in [("difference-quotient", &dq), ("l2", &l2)] {
            violations += checks.iter().filter(|b| !b.holds()).count();
            if let Some(i) = checks.iter().position(|b| !b.holds()) {
                res.require(false, || {
                    format!("{kind} bound fails at node {i} for tau = {tau}: {:e} > {:e}", checks[i].lhs, checks[i].bound)
                });
            }
            for b in checks.iter().filter(|b| b.bound > 0.0) {
                worst_ratio = worst_ratio.max(b.lhs / b.bound);
            }
        }
    }
    res.metric("max_bound_ratio", worst_ratio);
    res.metric("bound_violations", violations as f64);
    Ok(())
}

struct FdCheck {
    /// `|FD(tau) - G'| / (1 + |G'|)` at the configured step.
    err_at_step: f64,
    order: Option<f64>,
}

/// Central difference of `G` at `fd_order_t` against the crossing form, at
/// the configured step and across the step ladder. The order is taken from
/// the two coarsest steps whose errors sit above round-off; `None` when no
/// pair qualifies.
fn fd_check(ctx: &Ctx<'_>, path: &HomotopyPath, rho: &[f64]) -> CoreResult<FdCheck> {
    let p = ctx.params;
    let t = p.fd_order_t;
    let space = WeightedSpace::new(ctx.span, ctx.measure, weight_at(path, t))?;
    let exact = derivative_forms(path, rho, &space)?;
    let fd = |tau: f64| g_central_difference(path, rho, t, tau, ctx.span, ctx.measure);
    let err_at_step = (fd(p.fd_step)? - exact.crossing).abs() / (1.0 + exact.crossing.abs());
    let mut steps = p.fd_order_steps.clone();
    steps.sort_by(|a, b| b.total_cmp(a));
    let errs = steps
        .iter()
        .map(|&tau| Ok((tau, (fd(tau)? - exact.crossing).abs())))
        .collect::<CoreResult<Vec<_>>>()?;
    // Round-off in a central difference grows like eps * scale / tau.
    let scale = exact.scale.max(exact.crossing.abs()) + rho.iter().sum::<f64>();
    let floor = |tau: f64| 1e4 * f64::EPSILON * scale.max(1.0) / tau;
    let order = errs
        .windows(2)
        .find(|w| w[1].1 > floor(w[1].0))
        .map(|w| observed_order(w[0].1, w[1].1, w[0].0, w[1].0));
    Ok(FdCheck { err_at_step, order })
}

fn tcz(ctx: &Ctx<'_>, res: &mut CheckResult, tables: &mut Tables) -> CoreResult<()> {
    let tol = &ctx.tol;
    let p = ctx.params;
    let radius = match ctx.measure.kind() {
        MeasureKind::DiskProduct { radius, .. } => radius,
        MeasureKind::Discrete => {
            return Err(bergman_core::Error::InvalidConfiguration(
                "tcz check needs a disk measure".into(),
            ))
        }
    };
    let interior = p.interior_radius.unwrap_or(radius / 2.0);
    let rule = DegreeRule { factor: p.degree_factor };
    let reports = tcz_convergence_report(ctx.phi_family, &p.k_ladder, rule, ctx.measure, interior)?;
    let devs: Vec<f64> = reports.iter().filter_map(|r| r.max_abs_dev).collect();
    for w in devs.windows(2) {
        res.require(w[1] <= w[0] * (1.0 + tol.tcz_slack), || {
            format!("deviation grew from {:e} to {:e}", w[0], w[1])
        });
    }
    if let Some(&last) = devs.last() {
        res.require(last <= tol.tcz_max_dev, || format!("final deviation {last:e}"));
        res.metric("final_max_abs_dev", last);
    }
    for r in &reports {
        if let (WeightFamily::Gauss { a }, Some(got)) = (ctx.phi_family, r.origin_ratio) {
            let want = fock_origin_ratio(r.k * a, radius);
            let err = (got - want).abs() / want;
            res.require(err <= tol.tcz_origin, || {
                format!("k = {}: origin ratio {got} vs closed form {want}", r.k)
            });
            res.metric(&format!("origin_err_k{}", r.k), err);
        }
        tables.tcz.push(TczRow {
            scenario_id: ctx.id.to_string(),
            k: r.k,
            degree: r.degree,
            n_eval_points: r.eval_points.len(),
            max_abs_dev: r.max_abs_dev,
            mean_abs_dev: r.mean_abs_dev,
        });
    }
    Ok(())
}

fn maxprinciple(ctx: &Ctx<'_>, res: &mut CheckResult, tables: &mut Tables) -> CoreResult<()> {
    let pair = DensityPair::new(ctx.phi, ctx.psi, ctx.span, ctx.measure)?;
    let n = ctx.measure.len();
    let omega: Vec<usize> = match &ctx.params.omega {
        Some(o) => o.clone(),
        None => (0..n).filter(|&j| pair.b_phi.values[j] >= pair.b_psi.values[j]).collect(),
    };
    let (label, node) = if ctx.params.omega.is_none() && omega.len() == n {
        ("omega-covers-space".to_string(), None)
    } else if pair.phi.rank() != pair.psi.rank() {
        res.require(false, || {
            format!("rank {} under phi but {} under psi", pair.phi.rank(), pair.psi.rank())
        });
        ("rank-mismatch".to_string(), None)
    } else {
        match max_principle_from_densities(ctx.phi, ctx.psi, &omega, &pair.b_phi, &pair.b_psi)? {
            MaxPrincipleVerdict::PremisesFail { node, premise } => (format!("premises-fail:{premise:?}"), Some(node)),
            MaxPrincipleVerdict::ConclusionHolds => ("conclusion-holds".to_string(), None),
            MaxPrincipleVerdict::Counterexample { node } => {
                res.require(false, || format!("phi > psi at node {node} although both premises hold"));
                ("counterexample".to_string(), Some(node))
            }
        }
    };
    tables.maxprinciple.push(MaxPrincipleRow {
        scenario_id: ctx.id.to_string(),
        omega_size: omega.len(),
        verdict: label,
        node,
    });
    Ok(())
}

/// Runs every scenario on up to `workers` threads and assembles the report
/// in input order.
pub fn run_scenarios(
    configs: &[ScenarioConfig],
    tol_scale: f64,
    workers: Option<usize>,
) -> Result<RunReport, HarnessError> {
    let mut seen = HashSet::new();
    for c in configs {
        if !seen.insert(c.id.as_str()) {
            return Err(HarnessError::DuplicateId(c.id.clone()));
        }
    }
    let outcomes = with_workers(workers, || {
        configs
            .par_iter()
            .map(|c| run_scenario(c, tol_scale))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let mut report = RunReport {
        meta: RunMeta::new("run", None, configs.len(), tol_scale),
        checks: Vec::new(),
        tables: Tables::default(),
        failure_dump: None,
        timings: Vec::new(),
    };
    for (config, outcome) in configs.iter().zip(outcomes) {
        if report.failure_dump.is_none() && !outcome.passed() {
            report.failure_dump = Some(config.to_json());
        }
        merge(&mut report, outcome);
    }
    Ok(report)
}

pub(crate) fn merge(report: &mut RunReport, outcome: ScenarioOutcome) {
    report.checks.extend(outcome.checks);
    report.tables.extend(outcome.tables);
    report.timings.extend(outcome.timings);
}

pub(crate) fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match workers {
        Some(n) if n > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(f),
        _ => f(),
    }
}
