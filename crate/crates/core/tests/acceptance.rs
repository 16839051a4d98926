//! Acceptance gate: runs every criterion, prints one PASS/FAIL line each and
//! fails if any criterion fails.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use areaflow::app::report::bound_constants;
use areaflow::app::run::RunOutput;
use areaflow::app::scenario::builtin;
use areaflow::app::{run_scenario, RunStatus};
use areaflow::barrier::{brute_force_m_convexity, m_convexity_value};
use areaflow::classify::LimitClass;
use areaflow::flow::{nonparametric_rhs, EquivariantS2, FlowParams};
use areaflow::geometry::manifold::{flat_torus, product_s1_s2, round_sphere, space_form, sphere3_hopf};
use areaflow::geometry::{curvature_conditions_report, CurvatureModel, SamplingParams, Warp, WarpedSurface};
use areaflow::immersion::point_geometry;
use areaflow::identities::run_identities;
use areaflow::linalg::inner;
use areaflow::verify::{check_decay_bounds, residual_p_evolution, EvolutionWindow};

type Outcome = Result<(bool, String), String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn run(name: &str) -> Result<RunOutput, String> {
    run_scenario(&builtin(name).ok_or("unknown builtin")?).map_err(err)
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

fn in_ratio_band(errs: &[f64]) -> (bool, Vec<f64>) {
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    (ratios.iter().all(|r| (3.0..=5.0).contains(r)), ratios)
}

fn c1_identities() -> Outcome {
    let start = Instant::now();
    let r = run_identities(10_000, 7).map_err(err)?;
    let secs = start.elapsed().as_secs_f64();
    Ok((r.worst <= 1e-10 && secs < 10.0, format!("worst error {:.2e} over {} samples in {secs:.2} s", r.worst, r.samples)))
}

fn c2_hopf() -> Outcome {
    let out = run("hopf_pointwise")?;
    let h = out.record.hopf.ok_or("no Hopf report")?;
    Ok((h.samples >= 1000 && h.max_deviation <= 1e-10, format!("{} samples, max |sigma - 2| = {:.2e}", h.samples, h.max_deviation)))
}

/// Largest `|⟨(0,V) − H, ν⟩|` over normals `ξ, η` at nodes two or more rings
/// away from the poles.
fn consistency_residual(j: usize) -> Result<f64, String> {
    let s = EquivariantS2::new(j, 1.0, |t| 0.8 * t.sin()).map_err(err)?;
    let f = s.materialize(4).map_err(err)?;
    let mut worst: f64 = 0.0;
    for node in 0..f.node_count() {
        if f.grid.polar_margin(node) < 2 {
            continue;
        }
        let pg = point_geometry(&f, node).map_err(err)?;
        let v = nonparametric_rhs(&f, node).map_err(err)?;
        let mut d = -pg.h_vec.clone();
        d[2] += v[0];
        d[3] += v[1];
        let g = pg.product_metric();
        worst = worst.max(inner(&g, &d, &pg.frame.xi).abs()).max(inner(&g, &d, &pg.frame.eta).abs());
    }
    Ok(worst)
}

fn c3_consistency() -> Outcome {
    let errs = [32, 64, 128].iter().map(|&j| consistency_residual(j)).collect::<Result<Vec<_>, _>>()?;
    let (ok, ratios) = in_ratio_band(&errs);
    Ok((ok, format!("sup residuals [{}], ratios {ratios:.2?}", sci(&errs))))
}

/// L² residual of the `p` evolution at `t ≈ 0.1`, nodes two or more rings
/// from the poles.
fn p_residual(j: usize, dt: f64) -> Result<f64, String> {
    let mut s = EquivariantS2::new(j, 1.0, |t| 0.8 * t.sin()).map_err(err)?;
    let params = FlowParams { dt: Some(dt), t_end: f64::INFINITY, ..Default::default() };
    while s.t < 0.1 - 1.5 * dt {
        s.step(&params).map_err(err)?;
    }
    let a = s.materialize(4).map_err(err)?;
    s.step(&params).map_err(err)?;
    let b = s.materialize(4).map_err(err)?;
    s.step(&params).map_err(err)?;
    let c = s.materialize(4).map_err(err)?;
    let w = EvolutionWindow { prev: &a, cur: &b, next: &c, dt };
    Ok(residual_p_evolution(&w, 2).map_err(err)?.l2)
}

fn c4_evolution_residual(torus: &RunOutput) -> Outcome {
    let errs = [(16, 4e-4), (32, 1e-4), (64, 2.5e-5)]
        .iter()
        .map(|&(j, dt)| p_residual(j, dt))
        .collect::<Result<Vec<_>, _>>()?;
    let (ok, ratios) = in_ratio_band(&errs);
    let stationary = torus.verification.residual.as_ref().ok_or("torus run has no residual windows")?.max_linf;
    Ok((
        ok && stationary <= 1e-10,
        format!("L2 residuals [{}], ratios {ratios:.2?}; stationary torus {stationary:.2e}", sci(&errs)),
    ))
}

fn c5_decay(tsui: &RunOutput, secs: f64) -> Outcome {
    let c = bound_constants(&tsui.record).ok_or("no bound constants")?;
    let curv = tsui.record.curvature.as_ref().ok_or("no curvature report")?;
    let rows: Vec<_> = tsui.record.series.iter().filter(|r| r.t <= 5.0 + 1e-9).cloned().collect();
    let d = check_decay_bounds(&rows, &c, curv.cond_a, 1e-4);
    let ok = d.pass == Some(true) && c.eps0 == 0.25 && c.eps1 <= 0.0 && secs < 30.0 && rows.len() > 10;
    Ok((
        ok,
        format!(
            "eps0 {}, eps1 {}, {} checkpoints to t = 5, worst margins p {:.1e} df2 {:.1e} H2 {:.1e}, run {secs:.1} s",
            c.eps0, c.eps1, d.rows, d.worst_p_margin, d.worst_df2_margin, d.worst_h2_margin
        ),
    ))
}

fn c6_convergence(tsui: &RunOutput) -> Outcome {
    let hit = tsui
        .record
        .series
        .iter()
        .find(|r| r.max_h2.sqrt() < 1e-6 && r.image_diameter < 1e-3)
        .map(|r| r.t);
    let class = tsui.classification.as_ref().map(|c| c.class);
    let diam = tsui.verification.diameter.as_ref().ok_or("no diameter report")?;
    let ok = hit.is_some_and(|t| t <= 20.0) && class == Some(LimitClass::Constant) && diam.pass == Some(true);
    Ok((
        ok,
        format!(
            "|H| < 1e-6 and diam < 1e-3 at t = {}, class {}, log slope {} (required {})",
            opt(hit.map(|t| format!("{t:.3}"))),
            opt(class.map(|c| format!("{c:?}"))),
            opt(diam.log_slope.map(|v| format!("{v:.4}"))),
            opt(diam.required_slope.map(|v| format!("{v:.4}")))
        ),
    ))
}

fn c7_dichotomy(funnel: &RunOutput, waist: &RunOutput) -> Outcome {
    let fd = funnel.record.drift.as_ref().ok_or("funnel run has no drift record")?;
    let wd = waist.record.drift.as_ref().ok_or("waist run has no drift record")?;
    let i5 = fd.t.iter().position(|&t| t >= 5.0 - 1e-9).ok_or("funnel run ended before t = 5")?;
    let rise = fd.z[i5] - fd.z[0];
    let rate_positive = fd.rate.iter().all(|&r| r > 0.0);
    let vol_decreasing = fd.volume.windows(2).all(|w| w[1] < w[0]);
    let z_end = *wd.z.last().ok_or("empty waist run")?;
    let class = waist.classification.as_ref().map(|c| c.class);
    let cmp_f = fd.grid_comparison.as_ref().ok_or("funnel run has no grid comparison")?;
    let cmp_w = wd.grid_comparison.as_ref().ok_or("waist run has no grid comparison")?;
    let covers = |t: &[f64]| t.last().is_some_and(|&t| t >= 5.0 - 1e-9);
    let ok = rise > 0.0
        && rate_positive
        && vol_decreasing
        && z_end.abs() < 1e-4
        && class == Some(LimitClass::Rank1Geodesic)
        && cmp_f.sup_error <= 1e-3
        && cmp_w.sup_error <= 1e-3
        && covers(&cmp_f.t)
        && covers(&cmp_w.t);
    Ok((
        ok,
        format!(
            "funnel z(5) - z(0) = {rise:.4}, rate > 0: {rate_positive}, volume decreasing: {vol_decreasing}; \
             waist |z| = {:.1e}, class {}; grid sup errors {:.1e} / {:.1e}",
            z_end.abs(),
            opt(class.map(|c| format!("{c:?}"))),
            cmp_f.sup_error,
            cmp_w.sup_error
        ),
    ))
}

/// Sum of the `m` smallest eigenvalues of `hess` relative to `metric`, from
/// the Schur form of the nonsymmetric `metric⁻¹ hess` (no Cholesky whitening,
/// unlike the library route).
fn eigen_frame_trace(hess: &DMatrix<f64>, metric: &DMatrix<f64>, m: usize) -> f64 {
    let a = metric.clone().try_inverse().expect("metric is invertible") * hess;
    let mut vals: Vec<f64> = a.complex_eigenvalues().iter().map(|z| z.re).collect();
    vals.sort_by(f64::total_cmp);
    vals[..m].iter().sum()
}

fn opt(v: Option<String>) -> String {
    v.unwrap_or_else(|| "none".into())
}

fn c8_barrier(waist: &RunOutput) -> Outcome {
    let b = waist.verification.barrier.as_ref().ok_or("waist run has no barrier report")?;
    let strictly_inside = b.containment.margins.iter().all(|m| m.1 > 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut worst_match, mut worst_below): (f64, f64) = (0.0, 0.0);
    for _ in 0..50 {
        let n = rng.random_range(2..=6);
        let m = rng.random_range(1..=n);
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let hess = 0.5 * (&a + a.transpose());
        let q = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let metric = &q * q.transpose() + DMatrix::identity(n, n);
        let oracle = m_convexity_value(&hess, &metric, m).map_err(err)?;
        let brute = brute_force_m_convexity(&hess, &metric, m, 1000, &mut rng);
        worst_match = worst_match.max((oracle - eigen_frame_trace(&hess, &metric, m)).abs());
        worst_below = worst_below.max(oracle - brute);
    }
    let ok = b.certificate.verdict && b.containment.contained && strictly_inside && worst_match <= 1e-10 && worst_below <= 1e-10;
    Ok((
        ok,
        format!(
            "certified {}, worst margin {:.3} below level {}; oracle vs eigenframe {:.1e}, brute force never lower (max excess {:.1e})",
            b.certificate.verdict, b.containment.worst_margin, b.containment.level, worst_match, worst_below
        ),
    ))
}

fn c9_budget(runs: &[(&str, &RunOutput)]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, out) in runs {
        if out.record.status != RunStatus::Converged {
            continue;
        }
        let b = out.verification.budget.as_ref().ok_or(format!("{name} has no budget"))?;
        ok &= b.relative_error <= 0.02;
        parts.push(format!("{name} {:.1e}", b.relative_error));
    }
    ok &= parts.len() >= 3;
    Ok((ok, format!("relative errors: {}", parts.join(", "))))
}

fn c10_curvature() -> Outcome {
    let p = SamplingParams::default();
    let all = |r: &areaflow::geometry::CurvatureReport| r.cond_a && r.cond_b && r.cond_c;
    let hopf = curvature_conditions_report(&sphere3_hopf(), &round_sphere(2, 1.0), &p).map_err(err)?;
    let cyl = WarpedSurface::new(Warp::Cosh, -2.0, 2.0).map_err(err)?.to_manifold();
    let prod = curvature_conditions_report(&product_s1_s2(1.0, 1.0), &cyl, &p).map_err(err)?;
    let flat = curvature_conditions_report(&flat_torus(3, 1.0), &flat_torus(2, 0.5), &p).map_err(err)?;
    // Exact models must reproduce the closed form including equality; the
    // finite-differenced metric must agree with (2m-3)σ_M to FD accuracy.
    let mut mismatches = 0;
    let mut cases = 0;
    let mut fd_gap: f64 = 0.0;
    for m in 2..=5usize {
        let k = (2 * m - 3) as f64;
        for (sm, sn) in [(1.0, k), (1.0, k + 0.5), (1.0, k - 0.5), (-1.0, -k), (-1.0, -k + 0.5), (0.5, 0.5 * k), (0.0, 0.0)] {
            let exact_m = space_form(m, sm, 0.5).with_curvature_model(CurvatureModel::Constant(sm));
            let exact_n = space_form(2, sn, 0.5).with_curvature_model(CurvatureModel::Constant(sn));
            let r = curvature_conditions_report(&exact_m, &exact_n, &p).map_err(err)?;
            let expected = k * sm >= sn;
            cases += 1;
            if r.cond_a != expected || r.min_bric != k * sm || r.constant_curvature.is_none_or(|c| c.bric != expected) {
                mismatches += 1;
            }
        }
        for sm in [1.0, -1.0] {
            let fd_m = space_form(m, sm, 0.5);
            let r = curvature_conditions_report(&fd_m, &round_sphere(2, 1.0), &p).map_err(err)?;
            fd_gap = fd_gap.max((r.min_bric - k * sm).abs());
        }
    }
    let ok = all(&hopf)
        && hopf.min_bric == 3.0
        && all(&prod)
        && prod.min_bric == 1.0
        && all(&flat)
        && mismatches == 0
        && fd_gap < 1e-5;
    Ok((
        ok,
        format!(
            "S3/S2 min BRic {}, S1xS2/cosh min BRic {}, flat min BRic {}; constant curvature {}/{} cases exact, FD gap {:.1e}",
            hopf.min_bric,
            prod.min_bric,
            flat.min_bric,
            cases - mismatches,
            cases,
            fd_gap
        ),
    ))
}

// Own harness so the criterion lines always reach the `cargo test` output.
fn main() {
    let timed = |name: &str| {
        let start = Instant::now();
        let out = run(name);
        (out, start.elapsed().as_secs_f64())
    };
    let (tsui, tsui_secs) = timed("tsui_wang_s2");
    let (funnel, _) = timed("cylinder_drift");
    let (waist, _) = timed("cylinder_waist");
    let (torus, _) = timed("torus_projection");

    let with = |r: &Result<RunOutput, String>, f: &dyn Fn(&RunOutput) -> Outcome| match r {
        Ok(o) => f(o),
        Err(e) => Err(e.clone()),
    };
    let results: Vec<(&str, Outcome)> = vec![
        ("identities", c1_identities()),
        ("hopf singular values", c2_hopf()),
        ("nonparametric consistency", c3_consistency()),
        ("p evolution residual", with(&torus, &c4_evolution_residual)),
        ("decay bounds", with(&tsui, &|o| c5_decay(o, tsui_secs))),
        ("convergence to constant", with(&tsui, &c6_convergence)),
        (
            "drift vs waist",
            match (&funnel, &waist) {
                (Ok(f), Ok(w)) => c7_dichotomy(f, w),
                (Err(e), _) | (_, Err(e)) => Err(e.clone()),
            },
        ),
        ("barrier", with(&waist, &c8_barrier)),
        (
            "volume budget",
            match (&tsui, &funnel, &waist, &torus) {
                (Ok(a), Ok(b), Ok(c), Ok(d)) => {
                    c9_budget(&[("tsui_wang_s2", a), ("cylinder_drift", b), ("cylinder_waist", c), ("torus_projection", d)])
                }
                _ => Err("a scenario run failed".into()),
            },
        ),
        ("curvature conditions", c10_curvature()),
    ];

    println!();
    let mut failed = Vec::new();
    for (i, (name, outcome)) in results.iter().enumerate() {
        let (pass, detail) = match outcome {
            Ok((p, d)) => (*p, d.clone()),
            Err(e) => (false, format!("error: {e}")),
        };
        println!("C{} {} {name}: {detail}", i + 1, if pass { "PASS" } else { "FAIL" });
        if !pass {
            failed.push(i + 1);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
