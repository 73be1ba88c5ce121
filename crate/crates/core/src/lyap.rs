//! Linearized Lyapunov level set around the post-fault equilibrium: the
//! small ellipse that seeds reverse-time trajectories and doubles as the
//! convergence tolerance band for forward runs.

use crate::mat2::Mat2;
use crate::model::{equilibrium, jacobian, ModelError};
use crate::ode::{integrate_forward, IntegrateError, IntegratorConfig};
use crate::params::{Scenario, State};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum SeedError {
    #[error("matrix is not Hurwitz (eigenvalue real part >= -1e-12)")]
    NotHurwitz,
    #[error("seed level could not be validated after {0} halvings")]
    SeedTooLarge(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
}

/// Solve the continuous Lyapunov equation A'P + PA = -Q for symmetric P,
/// via the 3-unknown linear system in (p11, p12, p22).
pub fn solve_lyapunov_2x2(a: &Mat2, q: &Mat2) -> Result<Mat2, SeedError> {
    if !a.is_hurwitz(1e-12) {
        return Err(SeedError::NotHurwitz);
    }
    let [[a11, a12], [a21, a22]] = a.m;
    // Rows: (1,1), (1,2), (2,2) components of A'P + PA.
    let mut m = [
        [2.0 * a11, 2.0 * a21, 0.0],
        [a12, a11 + a22, a21],
        [0.0, 2.0 * a12, 2.0 * a22],
    ];
    let mut b = [-q.m[0][0], -q.m[0][1], -q.m[1][1]];

    // Gaussian elimination with partial pivoting on the 3x3 system.
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|i, j| m[*i][col].abs().total_cmp(&m[*j][col].abs()))
            .unwrap();
        m.swap(col, piv);
        b.swap(col, piv);
        let d = m[col][col];
        for row in (col + 1)..3 {
            let f = m[row][col] / d;
            for c in col..3 {
                m[row][c] -= f * m[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0f64; 3];
    for row in (0..3).rev() {
        let mut s = b[row];
        for c in (row + 1)..3 {
            s -= m[row][c] * x[c];
        }
        x[row] = s / m[row][row];
    }
    Ok(Mat2::new(x[0], x[1], x[1], x[2]))
}

/// Ellipsoidal level set {x : (x - x_eq)' P (x - x_eq) = c} of the
/// linearized Lyapunov function.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LyapunovSeed {
    pub p: Mat2,
    pub c: f64,
    pub x_eq: State,
    /// Forward simulations spent validating the level value.
    pub validation_sims: usize,
}

impl LyapunovSeed {
    /// Lyapunov function value V(x) = (x - x_eq)' P (x - x_eq).
    pub fn value(&self, s: State) -> f64 {
        self.p.quad_form([s.x1 - self.x_eq.x1, s.x2 - self.x_eq.x2])
    }

    pub fn contains(&self, s: State) -> bool {
        self.value(s) <= self.c
    }

    /// Point on the level-set boundary in direction theta from x_eq;
    /// continuous and 2*pi-periodic in theta.
    pub fn boundary_point(&self, theta: f64) -> State {
        let u = [theta.cos(), theta.sin()];
        let r = (self.c / self.p.quad_form(u)).sqrt();
        State::new(self.x_eq.x1 + r * u[0], self.x_eq.x2 + r * u[1])
    }

    /// Largest distance from x_eq to the boundary: sqrt(c / lambda_min(P)).
    pub fn max_semi_axis(&self) -> f64 {
        (self.c / self.p.sym_eigenvalues()[0]).sqrt()
    }

    /// The seed translated by 2*pi*k in angle (neighboring equilibrium).
    pub fn translated(&self, k: i32) -> LyapunovSeed {
        LyapunovSeed {
            p: self.p,
            c: self.c,
            x_eq: State::new(self.x_eq.x1 + 2.0 * std::f64::consts::PI * k as f64, self.x_eq.x2),
            validation_sims: self.validation_sims,
        }
    }

    /// Polygonal approximation of the boundary with `n` vertices.
    pub fn polygonize(&self, n: usize) -> Vec<State> {
        (0..n)
            .map(|i| self.boundary_point(2.0 * std::f64::consts::PI * i as f64 / n as f64))
            .collect()
    }
}

/// Default size of the seed ellipse: largest semi-axis, phase-plane units.
pub const DEFAULT_SEED_SEMI_AXIS: f64 = 0.05;
const MAX_HALVINGS: usize = 20;
const VALIDATION_HORIZON: f64 = 0.1;

/// Build and validate the seed around the post-fault equilibrium.
///
/// P solves A'P + PA = -I at the equilibrium; c starts at the level whose
/// largest semi-axis is `semi_axis` and is halved (up to 20 times) until all
/// `n_check` boundary points flow inward monotonically in V over the first
/// 0.1 s of forward simulation.
pub fn build_seed(
    sc: &Scenario,
    semi_axis: f64,
    n_check: usize,
    cfg: &IntegratorConfig,
) -> Result<LyapunovSeed, SeedError> {
    let post = sc.post_fault();
    let x_eq = equilibrium(&post, State::new(0.0, 0.0))?;
    let t_steady = post.t_ramp_end() + 1.0;
    let a = jacobian(x_eq, t_steady, &post, post.params.sat_mode)?;
    let p = solve_lyapunov_2x2(&a, &Mat2::identity())?;

    let lambda_min = p.sym_eigenvalues()[0];
    let mut c = semi_axis * semi_axis * lambda_min;

    let mut sims = 0;
    for _ in 0..=MAX_HALVINGS {
        let mut seed = LyapunovSeed {
            p,
            c,
            x_eq,
            validation_sims: 0,
        };
        sims += n_check;
        if validate_seed(&seed, &post, n_check, cfg)? {
            seed.validation_sims = sims;
            return Ok(seed);
        }
        c /= 2.0;
    }
    Err(SeedError::SeedTooLarge(MAX_HALVINGS))
}

fn validate_seed(
    seed: &LyapunovSeed,
    post: &Scenario,
    n_check: usize,
    cfg: &IntegratorConfig,
) -> Result<bool, SeedError> {
    // Validate on the steady segment, where the band predicate is used.
    let t0 = post.t_ramp_end();
    for i in 0..n_check {
        let theta = 2.0 * std::f64::consts::PI * i as f64 / n_check as f64;
        let x0 = seed.boundary_point(theta);
        let traj = integrate_forward(x0, t0, t0 + VALIDATION_HORIZON, post, cfg, None, None)?;
        let mut prev = seed.value(x0);
        for s in traj.states.iter().skip(1) {
            let v = seed.value(*s);
            if v > prev * (1.0 + 1e-9) {
                return Ok(false);
            }
            prev = v;
        }
    }
    Ok(true)
}
