//! Randomized suite of the pointwise algebraic identities of the frame
//! calculus, on seeded random metrics and differentials.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::barrier::{brute_force_m_convexity, m_convexity_value};
use crate::error::Result;
use crate::frames::{build_svd_frame, frame_residual, singular_values, DifferentialSample};
use crate::immersion::{quantity_r_vw_frame, w_norm2_closed, CurvatureInputs};
use crate::linalg::inner;

pub const IDENTITY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub samples: usize,
    pub seed: u64,
    /// Largest absolute error per identity.
    pub max_error: BTreeMap<String, f64>,
    pub worst: f64,
    pub pass: bool,
    pub elapsed_secs: f64,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| 0.5 * normal(rng));
    &a * a.transpose() + DMatrix::identity(n, n) * 0.5
}

fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| normal(rng));
    (&a + a.transpose()) * 0.5
}

/// A random sample: dimension `2..=5`, metrics, and a differential whose
/// size ranges over contracting and expanding maps.
pub fn random_sample(rng: &mut ChaCha8Rng) -> DifferentialSample {
    let m = rng.random_range(2..=5);
    let scale = 0.05 + 1.5 * rng.random::<f64>();
    let rank: u32 = rng.random_range(0..10);
    let mut jac = DMatrix::from_fn(m, 2, |_, _| scale * normal(rng));
    match rank {
        0 => jac.fill(0.0),
        1 => {
            let c = jac.column(0).into_owned();
            jac.set_column(1, &(c * normal(rng)));
        }
        _ => {}
    }
    DifferentialSample::new(jac, random_spd(m, rng), random_spd(2, rng))
}

pub fn run_identities(samples: usize, seed: u64) -> Result<IdentityReport> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_error: BTreeMap<String, f64> = BTreeMap::new();
    let mut record = |name: &str, err: f64| {
        let e = max_error.entry(name.to_string()).or_insert(0.0);
        if !(err <= *e) {
            *e = err;
        }
    };
    for i in 0..samples {
        let sample = random_sample(&mut rng);
        let m = sample.dim();
        let f = build_svd_frame(&sample)?;
        let (l, mu) = (f.lambda, f.mu);

        for (s, t) in [(f.s_diag[0], f.t11), (f.s_diag[1], f.t22)] {
            record("s_squared_plus_t_squared", (s * s + t * t - 1.0).abs());
        }
        record("frame_values_and_orthonormality", frame_residual(&sample, &f));
        record("p_is_trace_of_s", (f.p - (f.s_diag[0] + f.s_diag[1])).abs());

        if l * mu < 1.0 {
            let d = (1.0 + l * l) * (1.0 + mu * mu);
            let mid = 2.0 * (l * l + mu * mu) / d;
            let q = 1.0 - f.p * f.p / 4.0;
            record("est2_lower", (q - mid).max(0.0));
            record("est2_upper", (mid - 2.0 * q).max(0.0));
        }

        let (hx, he) = (normal(&mut rng), normal(&mut rng));
        let c = CurvatureInputs { ric: random_symmetric(m, &mut rng), sigma_alpha12: normal(&mut rng), sigma_n: normal(&mut rng) };
        let terms = quantity_r_vw_frame(&f, hx, he, &c);
        let h2 = hx * hx + he * he;
        let w2 = inner(&sample.metric_m, &terms.w, &terms.w);
        record("w_norm_closed_form", (w2 - w_norm2_closed(l, mu, hx, he)).abs());
        record("w_norm_le_h_norm", (w2 - h2).max(0.0));
        let lhs = inner(&c.ric, &terms.v, &terms.v) + inner(&c.ric, &terms.w, &terms.w);
        let rhs = (l * l / (1.0 + l * l) * inner(&c.ric, &f.alpha[0], &f.alpha[0])
            + mu * mu / (1.0 + mu * mu) * inner(&c.ric, &f.alpha[1], &f.alpha[1]))
            * h2;
        record("ric_v_plus_ric_w", (lhs - rhs).abs() / (1.0 + rhs.abs()));

        let r = 0.3 + 2.0 * rng.random::<f64>();
        let scaled = DifferentialSample::new(sample.jacobian.clone(), sample.metric_m.clone(), &sample.metric_n * (r * r));
        let (ls, ms) = singular_values(&scaled)?;
        record("singular_value_scaling", ((ls - r * l).abs() + (ms - r * mu).abs()) / (1.0 + r * l));

        let (ax, ae) = (random_symmetric(m, &mut rng), random_symmetric(m, &mut rng));
        let a2: f64 = ax.iter().chain(ae.iter()).map(|v| v * v).sum();
        let ah = &ax * hx + &ae * he;
        let ah2: f64 = ah.iter().map(|v| v * v).sum();
        record("cauchy_schwarz_a_h", (ah2 - a2 * h2).max(0.0) / (1.0 + a2 * h2));

        if i % 50 == 0 {
            let n = m + 2;
            let hess = random_symmetric(n, &mut rng);
            let g = random_spd(n, &mut rng);
            let k = rng.random_range(1..=n);
            let exact = m_convexity_value(&hess, &g, k)?;
            let brute = brute_force_m_convexity(&hess, &g, k, 200, &mut rng);
            record("m_convexity_brute_force_below_oracle", (exact - brute).max(0.0));
            if k < n {
                let next = m_convexity_value(&hess, &g, k + 1)?;
                let (vals, _) = crate::linalg::generalized_eigen(&hess, &g, &[])?;
                record("m_convexity_monotone", (next - exact - vals[k]).abs());
            }
        }
    }
    let worst = max_error.values().copied().fold(0.0, f64::max);
    Ok(IdentityReport {
        samples,
        seed,
        pass: worst <= IDENTITY_TOL,
        worst,
        max_error,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}
