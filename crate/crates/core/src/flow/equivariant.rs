//! Rotationally equivariant maps `S² → S²(ρ)`, `(θ, φ) ↦ (h(θ), φ)`.
//!
//! The graph flow reduces to
//! `h_t = h''/(1 + ρ²h'²) + (sin θ cos θ h' − sin h cos h)/(sin²θ + ρ² sin²h)`,
//! solved on cell-centred nodes `θ_j = (j + ½)π/J` with odd reflection of `h`
//! at both poles. Away from the poles the discrete right-hand side agrees
//! with the grid solver's on the materialized field to `O(Δθ²)`.

use std::f64::consts::PI;
use std::sync::Arc;

use super::{clip_to_end, FlowParams, FlowStatus, Integrator};
use crate::error::{Error, Result};
use crate::geometry::manifold::round_sphere;
use crate::grid::{GraphMapField, Grid};

#[derive(Clone, Debug)]
pub struct EquivariantS2 {
    pub rho: f64,
    pub h: Vec<f64>,
    pub t: f64,
    pub steps: u64,
    pub status: FlowStatus,
    quiet_steps: u64,
    sin_t: Vec<f64>,
    cos_t: Vec<f64>,
}

impl EquivariantS2 {
    pub fn new(nodes: usize, rho: f64, profile: impl Fn(f64) -> f64) -> Result<Self> {
        if nodes < 4 {
            return Err(Error::Configuration("equivariant profile needs at least 4 nodes".into()));
        }
        if !(rho > 0.0) {
            return Err(Error::Configuration("target radius must be positive".into()));
        }
        let d = PI / nodes as f64;
        let theta: Vec<f64> = (0..nodes).map(|j| (j as f64 + 0.5) * d).collect();
        let h = theta.iter().map(|&t| profile(t)).collect();
        let s = Self {
            rho,
            h,
            t: 0.0,
            steps: 0,
            status: FlowStatus::Running,
            quiet_steps: 0,
            sin_t: theta.iter().map(|t| t.sin()).collect(),
            cos_t: theta.iter().map(|t| t.cos()).collect(),
        };
        let min_p = s.min_p();
        if !(min_p > super::grid_solver::P_FLOOR) {
            return Err(Error::NotAreaDecreasing { min_p });
        }
        Ok(s)
    }

    pub fn nodes(&self) -> usize {
        self.h.len()
    }

    pub fn dtheta(&self) -> f64 {
        PI / self.nodes() as f64
    }

    pub fn theta(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dtheta()
    }

    /// `h` at a possibly out-of-range index, by odd reflection.
    #[inline]
    fn at(h: &[f64], j: isize) -> f64 {
        let n = h.len() as isize;
        if j < 0 {
            -h[(-1 - j) as usize]
        } else if j >= n {
            -h[(2 * n - 1 - j) as usize]
        } else {
            h[j as usize]
        }
    }

    /// `(h', h'')` at node `j`: five-point `h'`, three-point `h''`.
    ///
    /// The pole terms divide the error of `h'` by `sin²θ`; with the
    /// three-point `h'` the first nodes carry an `O(Δθ)` truncation error
    /// that leaves a kink in the solution.
    pub fn derivatives(h: &[f64], j: usize, d: f64) -> (f64, f64) {
        let j = j as isize;
        let (ll, l, c, r, rr) =
            (Self::at(h, j - 2), Self::at(h, j - 1), h[j as usize], Self::at(h, j + 1), Self::at(h, j + 2));
        ((ll - 8.0 * l + 8.0 * r - rr) / (12.0 * d), (r - 2.0 * c + l) / (d * d))
    }

    pub fn rhs(&self, h: &[f64]) -> Vec<f64> {
        let d = self.dtheta();
        let r2 = self.rho * self.rho;
        (0..h.len())
            .map(|j| {
                let (h1, h2) = Self::derivatives(h, j, d);
                let (sh, ch) = h[j].sin_cos();
                let (st, ct) = (self.sin_t[j], self.cos_t[j]);
                h2 / (1.0 + r2 * h1 * h1) + (st * ct * h1 - sh * ch) / (st * st + r2 * sh * sh)
            })
            .collect()
    }

    /// Singular values `(|h'|, sin h / sin θ)` at node `j`, unsorted, and `ρ`-scaled.
    pub fn stretches(&self, j: usize) -> (f64, f64) {
        let (h1, _) = Self::derivatives(&self.h, j, self.dtheta());
        (self.rho * h1.abs(), self.rho * self.h[j].sin().abs() / self.sin_t[j])
    }

    pub fn min_p(&self) -> f64 {
        (0..self.nodes())
            .map(|j| {
                let (a, b) = self.stretches(j);
                crate::frames::p_value(a, b)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Step size for the reduced problem: `cfl / max_j (2 g^{θθ}/Δθ² + g^{φφ})`.
    pub fn cfl_dt(&self, cfl: f64) -> f64 {
        let d = self.dtheta();
        let r2 = self.rho * self.rho;
        let mut worst: f64 = 0.0;
        for j in 0..self.nodes() {
            let (h1, _) = Self::derivatives(&self.h, j, d);
            let gtt = 1.0 / (1.0 + r2 * h1 * h1);
            let gpp = 1.0 / (self.sin_t[j].powi(2) + r2 * self.h[j].sin().powi(2));
            worst = worst.max(2.0 * gtt / (d * d) + gpp);
        }
        cfl / worst
    }

    /// Normal part `|H|²` at node `j` from the velocity `v = h_t`.
    pub fn h2_at(&self, h: &[f64], v: f64, j: usize) -> f64 {
        let (h1, _) = Self::derivatives(h, j, self.dtheta());
        let r2 = self.rho * self.rho;
        // (0, V) with V = v ∂_θN; tangential part along dF(∂_θ) = (1, h').
        let vv = r2 * v * v;
        let a = r2 * h1 * v;
        let g = 1.0 + r2 * h1 * h1;
        (vv - a * a / g).max(0.0)
    }

    pub fn step(&mut self, params: &FlowParams) -> Result<f64> {
        let dt = params.dt.unwrap_or_else(|| self.cfl_dt(params.cfl));
        let dt = clip_to_end(dt, self.t, params.t_end);
        let k1 = self.rhs(&self.h);
        let max_h2 = (0..self.nodes()).map(|j| self.h2_at(&self.h, k1[j], j)).fold(0.0, f64::max);
        let next: Vec<f64> = match params.integrator {
            Integrator::Euler => self.h.iter().zip(&k1).map(|(h, k)| h + dt * k).collect(),
            Integrator::Rk2 => {
                let stage: Vec<f64> = self.h.iter().zip(&k1).map(|(h, k)| h + dt * k).collect();
                let k2 = self.rhs(&stage);
                self.h.iter().zip(k1.iter().zip(&k2)).map(|(h, (a, b))| h + 0.5 * dt * (a + b)).collect()
            }
        };
        if next.iter().any(|v| !v.is_finite() || v.abs() > 1e6) {
            self.status = FlowStatus::Aborted;
            return Err(Error::State("equivariant profile blew up".into()));
        }
        self.h = next;
        self.t += dt;
        self.steps += 1;
        let min_p = self.min_p();
        if !(min_p > 0.0) {
            self.status = FlowStatus::Aborted;
            return Err(Error::NonPositiveP { p: min_p, node: 0 });
        }
        if max_h2.sqrt() < params.h_tol {
            self.quiet_steps += 1;
            if self.quiet_steps >= params.converge_window {
                self.status = FlowStatus::Converged;
            }
        } else {
            self.quiet_steps = 0;
            self.status = FlowStatus::Running;
        }
        Ok(dt)
    }

    /// Graph volume `2π Σ_j √(g_θθ g_φφ) Δθ` and `∫|H|² dμ` of a profile,
    /// with `|H|²` from the velocity `rhs(h)`.
    pub fn volume_and_dissipation(&self, h: &[f64]) -> (f64, f64) {
        let d = self.dtheta();
        let r2 = self.rho * self.rho;
        let v = self.rhs(h);
        let (mut vol, mut diss) = (0.0, 0.0);
        for j in 0..h.len() {
            let (h1, _) = Self::derivatives(h, j, d);
            let dens = ((1.0 + r2 * h1 * h1) * (self.sin_t[j].powi(2) + r2 * h[j].sin().powi(2))).sqrt();
            vol += dens;
            diss += self.h2_at(h, v[j], j) * dens;
        }
        let w = 2.0 * PI * d;
        (vol * w, diss * w)
    }

    /// Diameter of the image: it is a union of parallels at colatitudes
    /// `h_j`, and the farthest points of two parallels are half a turn apart.
    pub fn image_diameter(&self) -> f64 {
        let mut best: f64 = 0.0;
        for (a, &ha) in self.h.iter().enumerate() {
            for &hb in &self.h[a..] {
                // Points at polar angles ha, hb on opposite meridians.
                let s = (ha + hb).rem_euclid(2.0 * PI);
                best = best.max(s.min(2.0 * PI - s));
            }
        }
        self.rho * best
    }

    /// The profile as a map field on an `J × n_phi` grid of the unit sphere.
    pub fn materialize(&self, n_phi: usize) -> Result<GraphMapField> {
        Self::materialize_profile(&self.h, self.rho, n_phi)
    }

    pub fn materialize_profile(h: &[f64], rho: f64, n_phi: usize) -> Result<GraphMapField> {
        let m = Arc::new(round_sphere(2, 1.0));
        let n = Arc::new(round_sphere(2, rho));
        let grid = Arc::new(Grid::new(&m, &[h.len(), n_phi])?);
        let j_of = |theta: f64| ((theta / (PI / h.len() as f64)) - 0.5).round() as usize;
        GraphMapField::from_fn(grid, m, n, |x| [h[j_of(x[0]).min(h.len() - 1)], x[1]])
    }
}
