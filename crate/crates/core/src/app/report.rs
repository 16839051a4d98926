//! Verification and classification of a finished run.

use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::run::{RunRecord, RunStatus, Snapshots};
use super::scenario::Prepared;
use crate::barrier::{certify_m_convexity, containment_monitor, diameter_series, ContainmentReport, ConvexityCertificate, DiameterReport};
use crate::classify::{classify_limit, LimitReport};
use crate::error::Result;
use crate::verify::{
    check_decay_bounds, check_h_and_theta_inequalities, compute_bound_constants, default_tolerance, residual_p_evolution,
    volume_budget, BoundConstants, DecayReport, EvolutionWindow, InequalityReport, ResidualNorms, VolumeBudget,
};

/// One line of the verification summary. `pass` is `None` for checks that
/// carry information only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: Option<bool>,
    pub summary: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub windows: usize,
    pub max_l2: f64,
    pub max_linf: f64,
    pub tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierSummary {
    pub certificate: ConvexityCertificate,
    pub containment: ContainmentReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub scenario: String,
    /// No check failed.
    pub pass: bool,
    pub checks: Vec<Check>,
    pub constants: Option<BoundConstants>,
    pub decay: Option<DecayReport>,
    pub residual: Option<ResidualSummary>,
    pub inequalities: Option<InequalityReport>,
    pub budget: Option<VolumeBudget>,
    pub barrier: Option<BarrierSummary>,
    pub diameter: Option<DiameterReport>,
}

impl VerificationReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Constants of the decay bounds from the first record and the curvature
/// report; `None` for pointwise runs or when `ϱ₀ ≤ 0`.
pub fn bound_constants(record: &RunRecord) -> Option<BoundConstants> {
    let first = record.series.first()?;
    let c = record.curvature.as_ref()?;
    compute_bound_constants(first.min_p, first.max_theta, c.min_ric, c.sup_sigma_n).ok()
}

fn fmt_opt(v: Option<bool>) -> &'static str {
    match v {
        Some(true) => "pass",
        Some(false) => "FAIL",
        None => "info",
    }
}

/// Runs every applicable check. Also returns the residual norms per series
/// row so the caller can fill the CSV columns.
pub fn verify_run(
    cfg: &ScenarioConfig,
    prep: Option<&Prepared>,
    record: &RunRecord,
    snaps: &Snapshots,
) -> Result<(VerificationReport, Vec<(usize, ResidualNorms)>)> {
    let mut checks = Vec::new();
    let mut push = |name: &str, pass: Option<bool>, summary: String| {
        checks.push(Check { name: name.into(), pass, summary })
    };
    let opts = &cfg.verify;
    let constants = bound_constants(record);
    let cond_a = record.curvature.as_ref().is_some_and(|c| c.cond_a);

    push(
        "status",
        Some(record.status != RunStatus::Aborted),
        match &record.abort_reason {
            Some(r) => format!("aborted at t = {}: {r}", record.t_final),
            None => format!("{:?} at t = {} after {} steps", record.status, record.t_final, record.steps),
        },
    );

    if let Some(c) = &record.curvature {
        push(
            "curvature",
            None,
            format!(
                "min Ric = {:.6}, min BRic = {:.6}, sup sigma_N = {:.6}, A = {}, B = {}, C = {}",
                c.min_ric, c.min_bric, c.sup_sigma_n, c.cond_a, c.cond_b, c.cond_c
            ),
        );
    }

    let mut decay = None;
    if let (Some(c), false) = (&constants, record.series.is_empty()) {
        let d = check_decay_bounds(&record.series, c, cond_a, default_tolerance(record.h));
        let summary = if d.applicable {
            format!(
                "worst margins p {:.3e}, |df|^2 {:.3e}, |H|^2 {:.3e}, theta {:.3e} (tol {:.1e})",
                d.worst_p_margin, d.worst_df2_margin, d.worst_h2_margin, d.worst_theta_margin, d.tol
            )
        } else {
            "condition A not certified; bounds not asserted".into()
        };
        push("decay_bounds", d.pass, summary);
        decay = Some(d);
    }

    let mut residual = None;
    let mut residual_rows = Vec::new();
    let mut inequalities: Option<InequalityReport> = None;
    if let (false, Some(prep)) = (snaps.windows.is_empty(), prep) {
        for win in &snaps.windows {
            let prev = prep.field(win.prev.clone())?;
            let cur = prep.field(win.cur.clone())?;
            let next = prep.field(win.next.clone())?;
            let w = EvolutionWindow { prev: &prev, cur: &cur, next: &next, dt: win.dt };
            residual_rows.push((win.record, residual_p_evolution(&w, opts.pole_margin)?));
            if opts.inequalities {
                if let Some(c) = &constants {
                    let r = check_h_and_theta_inequalities(&w, c.eps1, opts.delta, opts.pole_margin)?;
                    match &mut inequalities {
                        Some(acc) => acc.merge(&r),
                        None => inequalities = Some(r),
                    }
                }
            }
        }
        let max_l2 = residual_rows.iter().map(|r| r.1.l2).fold(0.0, f64::max);
        let max_linf = residual_rows.iter().map(|r| r.1.linf).fold(0.0, f64::max);
        let pass = opts.residual_tol.map(|tol| max_linf <= tol);
        push(
            "residual_p",
            pass,
            format!("{} windows, max L2 {max_l2:.3e}, max Linf {max_linf:.3e}", residual_rows.len()),
        );
        residual = Some(ResidualSummary { windows: residual_rows.len(), max_l2, max_linf, tol: opts.residual_tol });
        if let Some(r) = &inequalities {
            // The inequalities are derived under condition A.
            push(
                "inequalities",
                cond_a.then_some(r.pass),
                format!(
                    "{} nodes ({} skipped), worst slack |H|^2 {:.3e}, theta {:.3e}",
                    r.nodes_checked, r.nodes_skipped, r.worst_h_slack, r.worst_theta_slack
                ),
            );
        }
    }

    let mut budget = None;
    if record.budget.t.len() >= 2 {
        let b = volume_budget(&record.budget.t, &record.budget.volume, &record.budget.dissipation, opts.budget_rel_tol)?;
        push(
            "volume_budget",
            Some(b.pass),
            format!(
                "volume drop {:.6e}, dissipated {:.6e}, relative error {:.3e}",
                b.volume_start - b.volume_end,
                b.dissipated,
                b.relative_error
            ),
        );
        budget = Some(b);
    }

    let mut barrier = None;
    if let (Some(phi), Some(last), Some(prep)) = (&cfg.barrier, &snaps.last, prep) {
        let points: Vec<(Vec<f64>, [f64; 2])> =
            (0..prep.grid.node_count()).map(|i| (prep.grid.coord(i), last.values[i])).collect();
        let certificate = certify_m_convexity(
            phi,
            &prep.m,
            &prep.n,
            &points,
            opts.convexity_random_factor * points.len(),
            cfg.seed,
        )?;
        let containment = containment_monitor(&record.barrier_series, phi.level)?;
        // Containment is only guaranteed when φ is m-convex.
        let pass = certificate.verdict.then_some(containment.contained);
        push(
            "barrier",
            pass,
            format!(
                "m-convex audit {} (worst {:.3e} over {} points); worst margin {:.3e}{}",
                certificate.verdict,
                certificate.worst_value,
                certificate.samples,
                containment.worst_margin,
                containment.escaped_at.map(|t| format!(", escaped at t = {t}")).unwrap_or_default()
            ),
        );
        barrier = Some(BarrierSummary { certificate, containment });
    }

    let mut diameter = None;
    if let (Some(c), true) = (&constants, record.series.len() >= 2) {
        let t: Vec<f64> = record.series.iter().map(|r| r.t).collect();
        let d: Vec<f64> = record.series.iter().map(|r| r.image_diameter).collect();
        let rep = diameter_series(&t, &d, c.eps0, opts.diameter_slope_tol);
        push(
            "diameter",
            rep.pass,
            format!(
                "final diameter {:.3e}, log slope {}, required {}",
                d.last().copied().unwrap_or(0.0),
                rep.log_slope.map(|s| format!("{s:.4}")).unwrap_or("n/a".into()),
                rep.required_slope.map(|s| format!("{s:.4}")).unwrap_or("none".into())
            ),
        );
        diameter = Some(rep);
    }

    if let Some(last) = record.series.last() {
        push(
            "convergence",
            None,
            format!("max |H|^2 = {:.3e}, diameter = {:.3e} at t = {}", last.max_h2, last.image_diameter, last.t),
        );
    }

    if let Some(cmp) = record.drift.as_ref().and_then(|d| d.grid_comparison.as_ref()) {
        push(
            "drift_grid_comparison",
            Some(cmp.sup_error <= opts.compare_tol),
            format!("sup |z_grid - z_ode| = {:.3e} on [0, {}]", cmp.sup_error, cmp.t.last().copied().unwrap_or(0.0)),
        );
    }

    if let Some(h) = &record.hopf {
        push(
            "hopf",
            Some(h.max_deviation <= 1e-10),
            format!(
                "{} samples, lambda in [{}, {}], mu in [{}, {}], max deviation {:.3e}",
                h.samples, h.lambda_min, h.lambda_max, h.mu_min, h.mu_max, h.max_deviation
            ),
        );
    }

    let pass = checks.iter().all(|c| c.pass != Some(false));
    let report = VerificationReport {
        scenario: record.scenario.clone(),
        pass,
        checks,
        constants,
        decay,
        residual,
        inequalities,
        budget,
        barrier,
        diameter,
    };
    Ok((report, residual_rows))
}

/// Classifies the final state; `None` for pointwise runs, which have no grid.
pub fn classify_run(cfg: &ScenarioConfig, prep: Option<&Prepared>, record: &RunRecord, snaps: &Snapshots) -> Result<Option<LimitReport>> {
    let (Some(prep), Some(last)) = (prep, &snaps.last) else { return Ok(None) };
    let field = prep.field(last.values.clone())?;
    let converged = record.status == RunStatus::Converged;
    let ric_positive = record.curvature.as_ref().is_some_and(|c| c.min_ric > 0.0);
    Ok(Some(classify_limit(&field, converged, ric_positive, cfg.classify)?))
}

impl std::fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            writeln!(f, "{:<22} {:<5} {}", c.name, fmt_opt(c.pass), c.summary)?;
        }
        write!(f, "overall: {}", if self.pass { "PASS" } else { "FAIL" })
    }
}
