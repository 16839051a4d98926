//! Running a scenario: solver loop, time-series recording, snapshot windows
//! for the evolution checks, and the pointwise Hopf report.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{InitialMap, ScenarioConfig, SolverKind};
use super::report::{bound_constants, classify_run, verify_run, VerificationReport};
use super::scenario::{equivariant_state, prepare, Prepared};
use crate::barrier::image_diameter;
use crate::classify::LimitReport;
use crate::error::{Error, Result};
use crate::flow::{reduce_circle_drift, CircleDrift, DriftTrajectory, FlowParams, FlowState, FlowStatus};
use crate::frames::{p_value, singular_values, DifferentialSample};
use crate::geometry::conditions::sample_points;
use crate::geometry::{curvature_conditions_report, ChartManifold, CurvatureReport};
use crate::grid::GraphMapField;
use crate::verify::{summarize_field, FieldSummary, TimeSeriesRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    Drifting,
    /// `t_end` reached without convergence.
    Finished,
    Aborted,
    /// No flow was run.
    Pointwise,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub values: Vec<[f64; 2]>,
}

/// Three states `dt` apart centred at `t`; the first is the recorded state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    /// Index of the time-series row the window starts at.
    pub record: usize,
    pub t: f64,
    pub dt: f64,
    pub prev: Vec<[f64; 2]>,
    pub cur: Vec<[f64; 2]>,
    pub next: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Snapshots {
    pub initial: Snapshot,
    pub last: Option<Snapshot>,
    pub windows: Vec<Window>,
}

/// Volume and `∫|H|² dμ` at solver resolution, for the budget check.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BudgetSeries {
    pub t: Vec<f64>,
    pub volume: Vec<f64>,
    pub dissipation: Vec<f64>,
}

impl BudgetSeries {
    fn push(&mut self, t: f64, volume: f64, dissipation: f64) {
        self.t.push(t);
        self.volume.push(volume);
        self.dissipation.push(dissipation);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridComparison {
    pub t: Vec<f64>,
    pub z_grid: Vec<f64>,
    pub z_ode: Vec<f64>,
    pub sup_error: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DriftRecord {
    pub t: Vec<f64>,
    pub z: Vec<f64>,
    pub rate: Vec<f64>,
    pub volume: Vec<f64>,
    pub grid_comparison: Option<GridComparison>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopfReport {
    pub samples: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub mu_min: f64,
    pub mu_max: f64,
    /// `max(|λ − 2|, |μ − 2|)` over the samples.
    pub max_deviation: f64,
    pub p: f64,
    pub dil2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario: String,
    pub solver: SolverKind,
    pub status: RunStatus,
    pub abort_reason: Option<String>,
    pub t_final: f64,
    pub steps: u64,
    /// Smallest grid spacing, for tolerances.
    pub h: f64,
    pub series: Vec<TimeSeriesRecord>,
    pub budget: BudgetSeries,
    /// `(t, max_x φ(f_t(x)))` per record.
    pub barrier_series: Vec<(f64, f64)>,
    pub curvature: Option<CurvatureReport>,
    pub drift: Option<DriftRecord>,
    pub hopf: Option<HopfReport>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub record: RunRecord,
    pub snapshots: Snapshots,
    pub verification: VerificationReport,
    pub classification: Option<LimitReport>,
}

impl RunOutput {
    /// 0 pass, 1 verification failure, 3 solver abort.
    pub fn exit_code(&self) -> i32 {
        if self.record.status == RunStatus::Aborted {
            3
        } else if self.verification.pass {
            0
        } else {
            1
        }
    }
}

/// Largest pairwise distance between distinct image points.
fn field_diameter(field: &GraphMapField) -> Result<f64> {
    let mut pts = field.values.clone();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup_by(|a, b| (a[0] - b[0]).abs() < 1e-13 && (a[1] - b[1]).abs() < 1e-13);
    image_diameter(&field.n, &pts)
}

struct Recorder<'a> {
    cfg: &'a ScenarioConfig,
    series: Vec<TimeSeriesRecord>,
    barrier_series: Vec<(f64, f64)>,
}

impl<'a> Recorder<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Self {
        Self { cfg, series: Vec::new(), barrier_series: Vec::new() }
    }

    fn observe(&mut self, field: &GraphMapField, t: f64, diameter: f64, volume: Option<f64>) -> Result<FieldSummary> {
        let s = summarize_field(field)?;
        self.series.push(TimeSeriesRecord {
            t,
            min_p: s.min_p,
            max_lambda: s.max_lambda,
            max_mu: s.max_mu,
            max_df2: s.max_df2,
            max_h2: s.max_h2,
            max_a2: s.max_a2,
            max_theta: s.max_theta,
            total_volume: volume.unwrap_or(s.total_volume),
            image_diameter: diameter,
            ..Default::default()
        });
        if let Some(b) = &self.cfg.barrier {
            let mut worst = f64::NEG_INFINITY;
            for y in &field.values {
                worst = worst.max(b.value(&field.n, y)?);
            }
            self.barrier_series.push((t, worst));
        }
        Ok(s)
    }

    fn last_t(&self) -> Option<f64> {
        self.series.last().map(|r| r.t)
    }
}

struct SolverResult {
    status: RunStatus,
    abort_reason: Option<String>,
    t_final: f64,
    steps: u64,
    budget: BudgetSeries,
    snapshots: Snapshots,
    drift: Option<DriftRecord>,
}

/// Parameters of the second step of a window; unclipped so both steps match.
fn with_dt(params: &FlowParams, dt: f64) -> FlowParams {
    FlowParams { dt: Some(dt), t_end: f64::INFINITY, ..params.clone() }
}

fn run_equivariant(cfg: &ScenarioConfig, prep: &Prepared, rec: &mut Recorder) -> Result<SolverResult> {
    let n_phi = cfg.grid.dims[1];
    let params = &cfg.flow;
    let mut eq = equivariant_state(cfg)?;
    let mut budget = BudgetSeries::default();
    let mut snaps = Snapshots { initial: Snapshot { t: 0.0, values: prep.initial.values.clone() }, ..Default::default() };
    let (v0, d0) = eq.volume_and_dissipation(&eq.h);
    budget.push(0.0, v0, d0);
    let mut abort_reason = None;
    let mut records = 0u64;
    loop {
        if eq.steps % params.record_every == 0 {
            let field = eq.materialize(n_phi)?;
            rec.observe(&field, eq.t, eq.image_diameter(), None)?;
            if cfg.verify.residuals && records % cfg.verify.window_every == 0 {
                // The window starts at the recorded state.
                let mut fork = eq.clone();
                if let Ok(dt) = fork.step(params) {
                    let cur = fork.materialize(n_phi)?.values;
                    if fork.step(&with_dt(params, dt)).is_ok() {
                        snaps.windows.push(Window {
                            record: rec.series.len() - 1,
                            t: eq.t + dt,
                            dt,
                            prev: field.values,
                            cur,
                            next: fork.materialize(n_phi)?.values,
                        });
                    }
                }
            }
            records += 1;
        }
        if eq.t >= params.t_end - 1e-12 || (params.stop_when_converged && eq.status == FlowStatus::Converged) {
            break;
        }
        match eq.step(params) {
            Ok(_) => {
                let (v, d) = eq.volume_and_dissipation(&eq.h);
                budget.push(eq.t, v, d);
            }
            Err(e) => {
                abort_reason = Some(e.to_string());
                break;
            }
        }
    }
    let field = eq.materialize(n_phi)?;
    if abort_reason.is_none() && rec.last_t() != Some(eq.t) {
        rec.observe(&field, eq.t, eq.image_diameter(), None)?;
    }
    snaps.last = Some(Snapshot { t: eq.t, values: field.values });
    let status = match (&abort_reason, eq.status) {
        (Some(_), _) => RunStatus::Aborted,
        (None, FlowStatus::Converged) => RunStatus::Converged,
        _ => RunStatus::Finished,
    };
    Ok(SolverResult { status, abort_reason, t_final: eq.t, steps: eq.steps, budget, snapshots: snaps, drift: None })
}

fn run_grid(cfg: &ScenarioConfig, prep: &Prepared, rec: &mut Recorder) -> Result<SolverResult> {
    let params = &cfg.flow;
    let mut state = FlowState::new(prep.initial.clone())?;
    let mut budget = BudgetSeries::default();
    let mut snaps = Snapshots { initial: Snapshot { t: 0.0, values: prep.initial.values.clone() }, ..Default::default() };
    let mut abort_reason = None;
    let mut records = 0u64;
    loop {
        if state.steps % params.record_every == 0 {
            let s = rec.observe(&state.field, state.t, field_diameter(&state.field)?, None)?;
            budget.push(state.t, s.total_volume, s.h2_integral);
            if cfg.verify.residuals && records % cfg.verify.window_every == 0 {
                let mut fork = state.clone();
                if let Ok(r) = fork.step(params) {
                    let cur = fork.field.values.clone();
                    if fork.step(&with_dt(params, r.dt)).is_ok() {
                        snaps.windows.push(Window {
                            record: rec.series.len() - 1,
                            t: state.t + r.dt,
                            dt: r.dt,
                            prev: state.field.values.clone(),
                            cur,
                            next: fork.field.values.clone(),
                        });
                    }
                }
            }
            records += 1;
        }
        if state.t >= params.t_end - 1e-12 || (params.stop_when_converged && state.status == FlowStatus::Converged) {
            break;
        }
        if let Err(e) = state.step(params) {
            abort_reason = Some(state.abort_reason.clone().unwrap_or_else(|| e.to_string()));
            break;
        }
    }
    if abort_reason.is_none() && rec.last_t() != Some(state.t) {
        let s = rec.observe(&state.field, state.t, field_diameter(&state.field)?, None)?;
        budget.push(state.t, s.total_volume, s.h2_integral);
    }
    snaps.last = Some(Snapshot { t: state.t, values: state.field.values.clone() });
    let status = match (&abort_reason, state.status) {
        (Some(_), _) => RunStatus::Aborted,
        (None, FlowStatus::Converged) => RunStatus::Converged,
        _ => RunStatus::Finished,
    };
    Ok(SolverResult { status, abort_reason, t_final: state.t, steps: state.steps, budget, snapshots: snaps, drift: None })
}

fn rk4(drift: &CircleDrift, z: f64, h: f64) -> Result<f64> {
    let k1 = drift.rate(z)?;
    let k2 = drift.rate(z + 0.5 * h * k1)?;
    let k3 = drift.rate(z + 0.5 * h * k2)?;
    let k4 = drift.rate(z + h * k3)?;
    Ok(z + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

fn circle_values(prep: &Prepared, z: f64) -> Vec<[f64; 2]> {
    prep.initial.values.iter().map(|y| [y[0], z]).collect()
}

fn run_drift(cfg: &ScenarioConfig, prep: &Prepared, rec: &mut Recorder) -> Result<SolverResult> {
    let params = &cfg.flow;
    let warped = cfg.target.warped_surface("target")?.expect("validated warped target");
    let InitialMap::Circle { height } = cfg.initial else {
        return Err(Error::Configuration("circle drift needs a circle initial map".into()));
    };
    let r = match cfg.domain {
        super::config::ManifoldSpec::ProductS1S2 { circle_radius, .. } => circle_radius,
        _ => return Err(Error::Configuration("circle drift needs product_s1_s2".into())),
    };
    let drift = reduce_circle_drift(r, warped.clone())?;
    let dt = params.dt.unwrap_or(0.01);
    let half_turn = |z: f64| warped.distance(&[0.0, z], &[0.5 * warped.period, z]);

    let mut snaps = Snapshots { initial: Snapshot { t: 0.0, values: prep.initial.values.clone() }, ..Default::default() };
    let mut budget = BudgetSeries::default();
    let mut tr = DriftRecord::default();
    let (mut t, mut z, mut steps) = (0.0f64, height, 0u64);
    let mut rate = drift.rate(z)?;
    let mut quiet = 0u64;
    let mut converged = false;
    let mut abort_reason = None;
    let mut records = 0u64;
    loop {
        let vol = drift.volume(z);
        tr.t.push(t);
        tr.z.push(z);
        tr.rate.push(rate);
        tr.volume.push(vol);
        budget.push(t, vol, rate * rate * vol);
        if steps % params.record_every == 0 {
            let field = prep.field(circle_values(prep, z))?;
            rec.observe(&field, t, half_turn(z), Some(vol))?;
            if cfg.verify.residuals && records % cfg.verify.window_every == 0 {
                let w = cfg.verify.window_dt;
                if let (Ok(zp), Ok(zn)) = (rk4(&drift, z, -w), rk4(&drift, z, w)) {
                    snaps.windows.push(Window {
                        record: rec.series.len() - 1,
                        t,
                        dt: w,
                        prev: circle_values(prep, zp),
                        cur: field.values.clone(),
                        next: circle_values(prep, zn),
                    });
                }
            }
            records += 1;
        }
        if t >= params.t_end - 1e-12 || (params.stop_when_converged && converged) {
            break;
        }
        let h = dt.min(params.t_end - t);
        match rk4(&drift, z, h).and_then(|zn| Ok((zn, drift.rate(zn)?))) {
            Ok((zn, rn)) => {
                z = zn;
                rate = rn;
                t += h;
                steps += 1;
            }
            Err(e) => {
                abort_reason = Some(e.to_string());
                break;
            }
        }
        if rate.abs() < params.h_tol {
            quiet += 1;
            converged = quiet >= params.converge_window;
        } else {
            quiet = 0;
            converged = false;
        }
    }
    if abort_reason.is_none() && rec.last_t() != Some(t) {
        let field = prep.field(circle_values(prep, z))?;
        rec.observe(&field, t, half_turn(z), Some(drift.volume(z)))?;
    }
    snaps.last = Some(Snapshot { t, values: circle_values(prep, z) });

    let monotone = tr.z.windows(2).all(|w| w[1] > w[0]) || tr.z.windows(2).all(|w| w[1] < w[0]);
    let dissipation_decreasing = budget.dissipation.windows(2).all(|w| w[1] <= w[0]);
    let status = if abort_reason.is_some() {
        RunStatus::Aborted
    } else if converged {
        RunStatus::Converged
    } else if monotone && dissipation_decreasing {
        RunStatus::Drifting
    } else {
        RunStatus::Finished
    };

    if let Some(until) = cfg.verify.compare_grid_until {
        let ode = DriftTrajectory { t: tr.t.clone(), z: tr.z.clone(), rate: tr.rate.clone() };
        tr.grid_comparison = Some(compare_with_grid(prep, &ode, until.min(t), params)?);
    }
    Ok(SolverResult { status, abort_reason, t_final: t, steps, budget, snapshots: snaps, drift: Some(tr) })
}

/// Runs the full grid solver on the circle data and compares heights.
fn compare_with_grid(prep: &Prepared, ode: &DriftTrajectory, until: f64, params: &FlowParams) -> Result<GridComparison> {
    let grid_params = FlowParams { dt: None, ..params.clone() };
    let mut state = FlowState::new(prep.initial.clone())?;
    let mut out = GridComparison { t: vec![0.0], z_grid: vec![state.field.values[0][1]], z_ode: vec![ode.z_at(0.0)], sup_error: 0.0 };
    while state.t < until - 1e-12 {
        state.step(&grid_params)?;
        let (t, zg) = (state.t, state.field.values[0][1]);
        let zo = ode.z_at(t);
        out.t.push(t);
        out.z_grid.push(zg);
        out.z_ode.push(zo);
    }
    out.sup_error = out.z_grid.iter().zip(&out.z_ode).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(out)
}

/// Singular values of the Hopf map at random points of `S³`, with the
/// analytic differential `∂_η ↦ 2∂_θ`, `∂_{ξ₁} ↦ ∂_φ`, `∂_{ξ₂} ↦ −∂_φ`.
pub fn hopf_report(m: &ChartManifold, n: &ChartManifold, samples: usize, seed: u64) -> Result<HopfReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jac = nalgebra::DMatrix::from_row_slice(3, 2, &[2.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
    let mut r = HopfReport {
        samples,
        lambda_min: f64::INFINITY,
        lambda_max: f64::NEG_INFINITY,
        mu_min: f64::INFINITY,
        mu_max: f64::NEG_INFINITY,
        max_deviation: 0.0,
        p: p_value(2.0, 2.0),
        dil2: 4.0,
    };
    for x in sample_points(m, samples, &mut rng) {
        let mut y = InitialMap::Hopf.eval(&x);
        n.normalize(&mut y);
        let s = DifferentialSample::new(jac.clone(), m.metric_at(&x), n.metric_at(&y));
        let (l, m) = singular_values(&s)?;
        r.lambda_min = r.lambda_min.min(l);
        r.lambda_max = r.lambda_max.max(l);
        r.mu_min = r.mu_min.min(m);
        r.mu_max = r.mu_max.max(m);
        r.max_deviation = r.max_deviation.max((l - 2.0).abs()).max((m - 2.0).abs());
    }
    Ok(r)
}

/// Runs a validated config in memory.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let mut rec = Recorder::new(cfg);
    if cfg.solver == SolverKind::Pointwise {
        let m = cfg.domain.build("domain")?;
        let n = cfg.target.build("target")?;
        let curvature = curvature_conditions_report(&m, &n, &cfg.curvature)?;
        let record = RunRecord {
            scenario: cfg.scenario.clone(),
            solver: cfg.solver,
            status: RunStatus::Pointwise,
            abort_reason: None,
            t_final: 0.0,
            steps: 0,
            h: 0.0,
            series: Vec::new(),
            budget: BudgetSeries::default(),
            barrier_series: Vec::new(),
            curvature: Some(curvature),
            drift: None,
            hopf: Some(hopf_report(&m, &n, cfg.verify.samples, cfg.seed)?),
        };
        let snapshots = Snapshots::default();
        let (verification, _) = verify_run(cfg, None, &record, &snapshots)?;
        return Ok(RunOutput { record, snapshots, verification, classification: None });
    }
    let prep = prepare(cfg)?;
    let curvature = curvature_conditions_report(&prep.m, &prep.n, &cfg.curvature)?;
    let result = match cfg.solver {
        SolverKind::Equivariant => run_equivariant(cfg, &prep, &mut rec)?,
        SolverKind::Grid => run_grid(cfg, &prep, &mut rec)?,
        SolverKind::CircleDrift => run_drift(cfg, &prep, &mut rec)?,
        SolverKind::Pointwise => unreachable!("handled above"),
    };
    let mut record = RunRecord {
        scenario: cfg.scenario.clone(),
        solver: cfg.solver,
        status: result.status,
        abort_reason: result.abort_reason,
        t_final: result.t_final,
        steps: result.steps,
        h: prep.grid.h_min(),
        series: rec.series,
        budget: result.budget,
        barrier_series: rec.barrier_series,
        curvature: Some(curvature),
        drift: result.drift,
        hopf: None,
    };
    if let Some(c) = bound_constants(&record) {
        for row in &mut record.series {
            *row = std::mem::take(row).with_bounds(&c);
        }
    }
    let snapshots = result.snapshots;
    let (verification, residuals) = verify_run(cfg, Some(&prep), &record, &snapshots)?;
    for (idx, norms) in residuals {
        if let Some(row) = record.series.get_mut(idx) {
            row.residual_p_l2 = Some(norms.l2);
            row.residual_p_linf = Some(norms.linf);
        }
    }
    let classification = classify_run(cfg, Some(&prep), &record, &snapshots)?;
    Ok(RunOutput { record, snapshots, verification, classification })
}
