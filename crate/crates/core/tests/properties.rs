//! Property tests for the invariants of the geometry, frame, immersion,
//! flow, verify, barrier and classify layers.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use areaflow::barrier::{brute_force_m_convexity, containment_monitor, m_convexity_value};
use areaflow::classify::{classify_evidence, ClassifyTolerances, LimitClass, LimitEvidence};
use areaflow::flow::{EquivariantS2, FlowParams, FlowState, Integrator};
use areaflow::frames::{build_svd_frame, frame_residual, p_value, s_value, singular_values, t_value, DifferentialSample};
use areaflow::geometry::manifold::{flat_torus, round_sphere, space_form};
use areaflow::geometry::{curvature_package, CurvatureModel};
use areaflow::grid::{GraphMapField, Grid};
use areaflow::immersion::point_geometry;
use areaflow::verify::{compute_bound_constants, summarize_field, volume_budget};

fn matrix(rows: usize, cols: usize, v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, &v[..rows * cols])
}

fn spd(n: usize, v: &[f64]) -> DMatrix<f64> {
    let q = matrix(n, n, v);
    &q * q.transpose() + DMatrix::identity(n, n) * 0.5
}

fn entries(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, n)
}

/// A differential of a map from an `m`-manifold with random metrics.
fn sample_strategy() -> impl Strategy<Value = DifferentialSample> {
    (2usize..=5).prop_flat_map(|m| {
        (entries(2 * m), entries(m * m), entries(4), 0.1..2.0f64).prop_map(move |(j, gm, gn, scale)| {
            let jac = matrix(m, 2, &j) * scale;
            DifferentialSample::new(jac, spd(m, &gm), spd(2, &gn))
        })
    })
}

fn torus_field(a: f64, b: f64, n: usize) -> GraphMapField {
    let m = Arc::new(flat_torus(2, 1.0));
    let target = Arc::new(flat_torus(2, 0.4));
    let grid = Arc::new(Grid::new(&m, &[n, n]).unwrap());
    GraphMapField::from_fn(grid, m, target, |x| [x[0] + a * x[1].sin(), x[1] + b * x[0].sin()]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn s_and_t_lie_on_the_unit_circle(s in -1e3..1e3f64) {
        let (a, b) = (s_value(s), t_value(s));
        prop_assert!((a * a + b * b - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn p_bounds_the_squared_differential(l in 0.0..5.0f64, ratio in 0.0..0.999f64) {
        // λμ < 1 by construction.
        let mu = if l > 0.0 { ratio / l.max(1.0) } else { ratio };
        let p = p_value(l, mu);
        let mid = 2.0 * (l * l + mu * mu) / ((1.0 + l * l) * (1.0 + mu * mu));
        let lo = 1.0 - p * p / 4.0;
        prop_assert!(lo <= mid + 1e-12 && mid <= 2.0 * lo + 1e-12, "{lo} {mid}");
    }

    #[test]
    fn frames_are_orthonormal(sample in sample_strategy()) {
        let frame = build_svd_frame(&sample).unwrap();
        prop_assert!(frame_residual(&sample, &frame) <= 1e-10);
    }

    #[test]
    fn singular_values_scale_with_target_metric(sample in sample_strategy(), r in 0.2..5.0f64) {
        let (l, m) = singular_values(&sample).unwrap();
        let scaled = DifferentialSample::new(sample.jacobian.clone(), sample.metric_m.clone(), &sample.metric_n * (r * r));
        let (ls, ms) = singular_values(&scaled).unwrap();
        prop_assert!((ls - r * l).abs() <= 1e-12 * (1.0 + r * l));
        prop_assert!((ms - r * m).abs() <= 1e-12 * (1.0 + r * l));
    }

    #[test]
    fn riemann_symmetries_and_traces(x in prop::collection::vec(-0.4..0.4f64, 3), k in -1.0..1.0f64) {
        let fd = curvature_package(&space_form(3, k, 0.5), &x).unwrap();
        prop_assert!(fd.symmetry_residual() <= 1e-8);
        let trace = (&fd.metric_inv * &fd.ricci).trace();
        prop_assert!((trace - fd.scalar).abs() <= 1e-8);
        let exact = curvature_package(&round_sphere(3, 1.0), &[0.3 + x[0].abs(), 1.0 + x[1], x[2]]).unwrap();
        prop_assert!(exact.symmetry_residual() <= 1e-12);
    }

    #[test]
    fn sectional_ignores_the_spanning_pair(
        x in prop::collection::vec(-0.4..0.4f64, 3),
        v in entries(3),
        w in entries(3),
        c in entries(4),
    ) {
        let t = curvature_package(&space_form(3, 0.7, 0.5), &x).unwrap();
        let (v, w) = (DVector::from_vec(v), DVector::from_vec(w));
        let det = c[0] * c[3] - c[1] * c[2];
        prop_assume!(det.abs() > 0.1);
        let Ok(s0) = t.sectional(&v, &w) else { return Ok(()) };
        let (v2, w2) = (&v * c[0] + &w * c[1], &v * c[2] + &w * c[3]);
        let s1 = t.sectional(&v2, &w2).unwrap();
        prop_assert!((s1 - s0).abs() <= 1e-10 * s0.abs().max(1.0));
    }

    #[test]
    fn bi_ricci_of_space_forms(m in 2usize..=5, k in -2.0..2.0f64, v in entries(5), w in entries(5)) {
        let man = space_form(m, k, 0.5).with_curvature_model(CurvatureModel::Constant(k));
        let t = curvature_package(&man, &vec![0.1; m]).unwrap();
        let (v, w) = (DVector::from_column_slice(&v[..m]), DVector::from_column_slice(&w[..m]));
        if let Ok(b) = t.bi_ricci(&v, &w) {
            prop_assert!((b - (2.0 * m as f64 - 3.0) * k).abs() <= 1e-10 * (1.0 + k.abs()));
        }
    }

    #[test]
    fn m_convexity_is_ordered_and_never_beaten(n in 2usize..=6, a in entries(36), q in entries(36), seed in 0u64..1000) {
        let h = matrix(n, n, &a);
        let hess = 0.5 * (&h + h.transpose());
        let metric = spd(n, &q);
        let values: Vec<f64> = (1..=n).map(|m| m_convexity_value(&hess, &metric, m).unwrap()).collect();
        // Increments are the eigenvalues in ascending order.
        let inc: Vec<f64> = std::iter::once(values[0]).chain(values.windows(2).map(|w| w[1] - w[0])).collect();
        prop_assert!(inc.windows(2).all(|w| w[1] >= w[0] - 1e-10));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for m in 1..=n {
            prop_assert!(brute_force_m_convexity(&hess, &metric, m, 50, &mut rng) >= values[m - 1] - 1e-10);
        }
    }

    #[test]
    fn containment_is_shift_invariant(vals in prop::collection::vec(0.0..1.0f64, 2..20), level in 0.2..1.2f64, shift in -5.0..5.0f64) {
        prop_assume!(vals[0] < level);
        let series: Vec<(f64, f64)> = vals.iter().enumerate().map(|(i, &v)| (i as f64, v)).collect();
        let shifted: Vec<(f64, f64)> = series.iter().map(|&(t, v)| (t, v + shift)).collect();
        let a = containment_monitor(&series, level).unwrap();
        let b = containment_monitor(&shifted, level + shift).unwrap();
        prop_assert_eq!(a.contained, b.contained);
        prop_assert_eq!(a.escaped_at, b.escaped_at);
    }

    #[test]
    fn classification_is_consistent(
        max_h in 0.0..2e-6f64,
        max_a in 0.0..2e-4f64,
        rank in 0usize..=2,
        std in 0.0..2e-3f64,
        sigma in 0.0..2e-6f64,
        converged: bool,
        ric_positive: bool,
    ) {
        let tol = ClassifyTolerances::default();
        let ev = LimitEvidence { max_h, max_a, rank, lambda_std: std, mu_std: std, max_abs_sigma_n: sigma, ..Default::default() };
        let r = classify_evidence(ev, converged, ric_positive, tol);
        if r.class != LimitClass::NotMinimal {
            prop_assert!(max_h < tol.h_tol && converged);
        }
        if r.class == LimitClass::Constant {
            prop_assert_eq!(rank, 0);
        }
        let nonconstant = matches!(r.class, LimitClass::Rank1Geodesic | LimitClass::Rank2Flat);
        prop_assert_eq!(r.contradiction, ric_positive && nonconstant);
    }

    #[test]
    fn bound_p_starts_at_initial_min_p(rho in 0.01..1.99f64, theta in 0.0..3.0f64, ric in -1.0..2.0f64, sigma in -1.0..1.0f64) {
        let c = compute_bound_constants(rho, theta, ric, sigma).unwrap();
        prop_assert!((c.bound_p(0.0) - rho).abs() <= 1e-12);
        prop_assert!(c.bound_p(1.0) >= c.bound_p(0.0) - 1e-15 || c.eps0 < 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn immersion_pointwise_inequalities(a in -0.6..0.6f64, b in -0.6..0.6f64, node in 0usize..144) {
        let f = torus_field(a, b, 12);
        let pg = point_geometry(&f, node).unwrap();
        prop_assert!(pg.a_h_norm2() <= pg.a2 * pg.h2 * (1.0 + 1e-12) + 1e-15);
        prop_assert!((pg.theta().unwrap() - pg.h2 / pg.p()).abs() <= 1e-12 * (1.0 + pg.h2));
        // Eigenvalues of g against g_M lie in [1, 1 + λ²].
        let lm = pg.metric_m.clone().cholesky().unwrap().l().try_inverse().unwrap();
        let rel = &lm * &pg.induced * lm.transpose();
        let ev = SymmetricEigen::new(0.5 * (&rel + rel.transpose())).eigenvalues;
        let lam = pg.lambda();
        prop_assert!(ev.iter().all(|&e| e >= 1.0 - 1e-12 && e <= 1.0 + lam * lam + 1e-12));
    }

    #[test]
    fn volume_drops_while_curvature_is_present(a in 0.05..0.5f64, b in 0.05..0.5f64) {
        let mut state = FlowState::new(torus_field(a, b, 10)).unwrap();
        let params = FlowParams::default();
        let mut prev = summarize_field(&state.field).unwrap();
        for _ in 0..5 {
            state.step(&params).unwrap();
            let cur = summarize_field(&state.field).unwrap();
            prop_assert!(prev.max_h2 > 0.0 && cur.total_volume < prev.total_volume);
            prev = cur;
        }
    }

    #[test]
    fn equivariant_min_p_stays_above_the_bound(amp in 0.2..0.95f64) {
        let mut s = EquivariantS2::new(32, 1.0, |t| amp * t.sin()).unwrap();
        let f0 = summarize_field(&s.materialize(4).unwrap()).unwrap();
        let c = compute_bound_constants(f0.min_p, f0.max_theta, 1.0, 1.0).unwrap();
        let params = FlowParams { t_end: 1.0, ..Default::default() };
        while s.t < 1.0 {
            s.step(&params).unwrap();
            prop_assert!(s.min_p() >= c.bound_p(s.t) - 1e-6 - 10.0 * (std::f64::consts::PI / 32.0).powi(2));
        }
    }
}

/// Euler and RK2 differ by `O(dt)` at a fixed time.
#[test]
fn integrators_agree_to_first_order() {
    let gap = |dt: f64| {
        let run = |integrator| {
            let mut s = EquivariantS2::new(24, 1.0, |t| 0.8 * t.sin()).unwrap();
            let p = FlowParams { dt: Some(dt), t_end: 0.05, integrator, ..Default::default() };
            while s.t < 0.05 - 1e-12 {
                s.step(&p).unwrap();
            }
            s.h
        };
        let (e, r) = (run(Integrator::Euler), run(Integrator::Rk2));
        e.iter().zip(&r).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let ratio = gap(2e-4) / gap(1e-4);
    assert!((1.7..2.3).contains(&ratio), "ratio {ratio}");
}

/// The trapezoidal budget closes at `O(dt²)` on an exact exponential.
#[test]
fn volume_budget_converges_on_exact_data() {
    let err = |n: usize| {
        let t: Vec<f64> = (0..=n).map(|i| 2.0 * i as f64 / n as f64).collect();
        let v: Vec<f64> = t.iter().map(|t| (-t).exp()).collect();
        volume_budget(&t, &v, &v, 0.02).unwrap().relative_error
    };
    let (a, b) = (err(50), err(100));
    assert!(a < 1e-3 && (3.5..4.5).contains(&(a / b)), "{a} {b}");
}
