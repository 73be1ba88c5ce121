//! Adaptive 1-D boundary sampler: chooses seed angles theta so that few
//! reverse-time simulations produce a smooth TLRoA boundary. Implements the
//! three interval losses (homogeneous, Euclidean, curvature) with greedy
//! midpoint bisection of the worst interval.

use crate::ode::IntegrateError;
use crate::params::State;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Homogeneous,
    Euclidean,
    Curvature,
}

impl LossKind {
    pub fn parse(s: &str) -> Option<LossKind> {
        match s {
            "homogeneous" => Some(LossKind::Homogeneous),
            "euclidean" => Some(LossKind::Euclidean),
            "curvature" => Some(LossKind::Curvature),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Homogeneous => "homogeneous",
            LossKind::Euclidean => "euclidean",
            LossKind::Curvature => "curvature",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub loss_kind: LossKind,
    pub loss_goal: f64,
    pub n_min: usize,
    pub n_max: usize,
    /// Midpoints of the this-many worst intervals are evaluated per round
    /// (concurrently); part of the config so results do not depend on the
    /// worker count.
    pub batch_width: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            loss_kind: LossKind::Curvature,
            loss_goal: 0.03,
            n_min: 16,
            n_max: 512,
            batch_width: 1,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), crate::params::ParamError> {
        if !(self.loss_goal > 0.0) {
            return Err(crate::params::ParamError::OutOfRange(format!(
                "loss_goal must be > 0, got {}",
                self.loss_goal
            )));
        }
        if self.n_min < 4 || self.n_max < self.n_min || self.batch_width == 0 {
            return Err(crate::params::ParamError::OutOfRange(format!(
                "need n_min >= 4 (got {}), n_max >= n_min (got {}), batch_width >= 1 (got {})",
                self.n_min, self.n_max, self.batch_width
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    GoalMet,
    BudgetExhausted,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Sample {
    pub theta: f64,
    pub endpoint: State,
    /// Order in which the sample was evaluated.
    pub insertion_index: usize,
}

/// Ordered samples with per-interval losses (interval i spans sample i to
/// the cyclically next sample).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleSet {
    pub samples: Vec<Sample>,
    pub interval_losses: Vec<f64>,
    pub termination: Termination,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn endpoints(&self) -> Vec<State> {
        self.samples.iter().map(|s| s.endpoint).collect()
    }

    pub fn max_loss(&self) -> f64 {
        self.interval_losses.iter().cloned().fold(0.0, f64::max)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SamplerError {
    #[error("boundary evaluation failed at theta = {theta}: {source}")]
    Eval {
        theta: f64,
        #[source]
        source: IntegrateError,
    },
    #[error(transparent)]
    Config(#[from] crate::params::ParamError),
}

/// Output-space scaling: each axis divided by the bounding-box extent of
/// the current endpoints (refreshed every round).
#[derive(Clone, Copy, Debug)]
pub struct OutputScale {
    pub x: f64,
    pub y: f64,
}

impl OutputScale {
    pub fn from_endpoints<'a>(points: impl Iterator<Item = &'a State>) -> OutputScale {
        let mut min_x = f64::INFINITY;
        let mut max_x = f64::NEG_INFINITY;
        let mut min_y = f64::INFINITY;
        let mut max_y = f64::NEG_INFINITY;
        for p in points {
            min_x = min_x.min(p.x1);
            max_x = max_x.max(p.x1);
            min_y = min_y.min(p.x2);
            max_y = max_y.max(p.x2);
        }
        OutputScale {
            x: (max_x - min_x).max(1e-12),
            y: (max_y - min_y).max(1e-12),
        }
    }

    fn normalize(&self, p: State) -> [f64; 2] {
        [p.x1 / self.x, p.x2 / self.y]
    }
}

fn cyclic_span(left: f64, right: f64) -> f64 {
    let d = right - left;
    if d > 0.0 {
        d
    } else {
        d + 2.0 * PI
    }
}

fn triangle_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs()
}

/// Small weight tying a chord-length term into the curvature loss so that
/// long straight runs are still eventually refined.
const CURVATURE_CHORD_WEIGHT: f64 = 0.02;

/// Loss of the interval between `left` and `right` (cyclically adjacent
/// samples), with the outer neighbors `prev` (before left) and `next`
/// (after right) for the curvature triangle.
pub fn interval_loss(
    kind: LossKind,
    left: (f64, State),
    right: (f64, State),
    prev: State,
    next: State,
    scale: &OutputScale,
) -> f64 {
    match kind {
        LossKind::Homogeneous => cyclic_span(left.0, right.0) / (2.0 * PI),
        LossKind::Euclidean => chord(left.1, right.1, scale),
        LossKind::Curvature => {
            let p = scale.normalize(prev);
            let l = scale.normalize(left.1);
            let r = scale.normalize(right.1);
            let n = scale.normalize(next);
            let area = triangle_area(p, l, r).max(triangle_area(l, r, n));
            area.sqrt() + CURVATURE_CHORD_WEIGHT * chord(left.1, right.1, scale)
        }
    }
}

fn chord(a: State, b: State, scale: &OutputScale) -> f64 {
    let an = scale.normalize(a);
    let bn = scale.normalize(b);
    ((bn[0] - an[0]).powi(2) + (bn[1] - an[1]).powi(2)).sqrt()
}

fn all_losses(samples: &[Sample], kind: LossKind) -> Vec<f64> {
    let n = samples.len();
    let scale = OutputScale::from_endpoints(samples.iter().map(|s| &s.endpoint));
    (0..n)
        .map(|i| {
            let left = &samples[i];
            let right = &samples[(i + 1) % n];
            let prev = &samples[(i + n - 1) % n];
            let next = &samples[(i + 2) % n];
            interval_loss(
                kind,
                (left.theta, left.endpoint),
                (right.theta, right.endpoint),
                prev.endpoint,
                next.endpoint,
                &scale,
            )
        })
        .collect()
}

/// Greedy refinement: evaluate `n_min` uniform angles, then repeatedly
/// bisect the worst interval(s) until every interval loss is below the goal
/// or the budget is exhausted. Deterministic given the config and `f`.
pub fn run_sampler<F>(f: &F, cfg: &SamplerConfig) -> Result<SampleSet, SamplerError>
where
    F: Fn(f64) -> Result<State, IntegrateError> + Sync,
{
    cfg.validate()?;

    let eval_batch = |thetas: &[f64], base_index: usize| -> Result<Vec<Sample>, SamplerError> {
        let results: Vec<Result<State, IntegrateError>> =
            thetas.par_iter().map(|theta| f(*theta)).collect();
        thetas
            .iter()
            .zip(results)
            .enumerate()
            .map(|(i, (theta, res))| match res {
                Ok(endpoint) => Ok(Sample {
                    theta: *theta,
                    endpoint,
                    insertion_index: base_index + i,
                }),
                Err(source) => Err(SamplerError::Eval {
                    theta: *theta,
                    source,
                }),
            })
            .collect()
    };

    let init: Vec<f64> = (0..cfg.n_min)
        .map(|i| 2.0 * PI * i as f64 / cfg.n_min as f64)
        .collect();
    let mut samples = eval_batch(&init, 0)?;
    let mut evaluated = samples.len();

    loop {
        let losses = all_losses(&samples, cfg.loss_kind);
        let max = losses.iter().cloned().fold(0.0, f64::max);
        if max < cfg.loss_goal {
            return Ok(SampleSet {
                samples,
                interval_losses: losses,
                termination: Termination::GoalMet,
            });
        }
        if evaluated >= cfg.n_max {
            return Ok(SampleSet {
                samples,
                interval_losses: losses,
                termination: Termination::BudgetExhausted,
            });
        }

        // Indices of the worst intervals above goal, ties broken by theta.
        let mut order: Vec<usize> = (0..losses.len())
            .filter(|i| losses[*i] >= cfg.loss_goal)
            .collect();
        order.sort_by(|a, b| {
            losses[*b]
                .total_cmp(&losses[*a])
                .then(samples[*a].theta.total_cmp(&samples[*b].theta))
        });
        let batch = cfg.batch_width.min(cfg.n_max - evaluated).min(order.len());
        let mut midpoints: Vec<f64> = order[..batch]
            .iter()
            .map(|i| {
                let l = samples[*i].theta;
                let span = cyclic_span(l, samples[(*i + 1) % samples.len()].theta);
                (l + span / 2.0).rem_euclid(2.0 * PI)
            })
            .collect();
        midpoints.sort_by(f64::total_cmp);

        let new_samples = eval_batch(&midpoints, evaluated)?;
        evaluated += new_samples.len();
        samples.extend(new_samples);
        samples.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ok(f: impl Fn(f64) -> State + Sync) -> impl Fn(f64) -> Result<State, IntegrateError> + Sync {
        move |theta| Ok(f(theta))
    }

    #[test]
    fn homogeneous_loss_is_span_fraction() {
        let scale = OutputScale { x: 1.0, y: 1.0 };
        let z = State::new(0.0, 0.0);
        let loss = interval_loss(
            LossKind::Homogeneous,
            (0.0, z),
            (PI / 8.0, z),
            z,
            z,
            &scale,
        );
        assert_relative_eq!(loss, 1.0 / 16.0);
    }

    #[test]
    fn collinear_points_have_zero_curvature_area() {
        let scale = OutputScale { x: 1.0, y: 1.0 };
        let a = State::new(0.0, 0.0);
        let b = State::new(1.0, 1.0);
        let c = State::new(2.0, 2.0);
        let d = State::new(3.0, 3.0);
        let loss = interval_loss(LossKind::Curvature, (0.0, b), (0.1, c), a, d, &scale);
        // Only the small chord tie-in remains.
        let chord = CURVATURE_CHORD_WEIGHT * 2.0f64.sqrt();
        assert_relative_eq!(loss, chord, epsilon = 1e-12);
    }

    #[test]
    fn euclidean_loss_invariant_to_uniform_rescaling() {
        let pts = [
            State::new(0.0, 0.0),
            State::new(1.0, 2.0),
            State::new(3.0, 1.0),
            State::new(2.0, -1.0),
        ];
        let scale = OutputScale::from_endpoints(pts.iter());
        let l1 = interval_loss(LossKind::Euclidean, (0.0, pts[1]), (0.1, pts[2]), pts[0], pts[3], &scale);
        let scaled: Vec<State> = pts.iter().map(|p| State::new(10.0 * p.x1, 10.0 * p.x2)).collect();
        let scale10 = OutputScale::from_endpoints(scaled.iter());
        let l2 = interval_loss(
            LossKind::Euclidean,
            (0.0, scaled[1]),
            (0.1, scaled[2]),
            scaled[0],
            scaled[3],
            &scale10,
        );
        assert_relative_eq!(l1, l2, max_relative = 1e-12);
    }

    #[test]
    fn constant_function_terminates_at_n_min() {
        let f = ok(|_| State::new(1.0, 2.0));
        for kind in [LossKind::Euclidean, LossKind::Curvature] {
            let cfg = SamplerConfig {
                loss_kind: kind,
                ..Default::default()
            };
            let set = run_sampler(&f, &cfg).unwrap();
            assert_eq!(set.len(), cfg.n_min);
            assert_eq!(set.termination, Termination::GoalMet);
        }
    }

    #[test]
    fn homogeneous_refines_uniformly() {
        let f = ok(|theta: f64| State::new(theta.cos(), theta.sin()));
        let cfg = SamplerConfig {
            loss_kind: LossKind::Homogeneous,
            loss_goal: 0.03,
            ..Default::default()
        };
        let set = run_sampler(&f, &cfg).unwrap();
        assert_eq!(set.termination, Termination::GoalMet);
        // Every interval strictly below goal.
        assert!(set.max_loss() < 0.03);
        // Uniform bisection: spans should all be equal.
        let spans: Vec<f64> = (0..set.len())
            .map(|i| cyclic_span(set.samples[i].theta, set.samples[(i + 1) % set.len()].theta))
            .collect();
        let (lo, hi) = spans
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), s| (lo.min(*s), hi.max(*s)));
        assert_relative_eq!(lo, hi, max_relative = 1e-9);
    }

    #[test]
    fn curvature_samples_denser_at_superellipse_corners() {
        // Superellipse |x|^8 + |y|^8 = 1: curvature concentrates at the four
        // diagonal corners and stays low on the nearly flat axis-aligned
        // sides. (An eccentric ellipse would not do here: the bounding-box
        // normalization maps it back to a circle.)
        let f = ok(|theta: f64| {
            let c = theta.cos();
            let s = theta.sin();
            State::new(
                c.abs().powf(0.25).copysign(c),
                s.abs().powf(0.25).copysign(s),
            )
        });
        // A sample sits near a corner when both coordinates are large.
        let corner_fraction = |kind: LossKind| {
            let cfg = SamplerConfig {
                loss_kind: kind,
                loss_goal: 0.02,
                n_min: 16,
                n_max: 512,
                batch_width: 1,
            };
            let set = run_sampler(&f, &cfg).unwrap();
            let corners = set
                .samples
                .iter()
                .filter(|s| s.endpoint.x1.abs().min(s.endpoint.x2.abs()) > 0.8)
                .count();
            corners as f64 / set.len() as f64
        };
        let curvature = corner_fraction(LossKind::Curvature);
        let euclidean = corner_fraction(LossKind::Euclidean);
        assert!(
            curvature > euclidean,
            "curvature loss should focus on corners: {curvature:.3} vs euclidean {euclidean:.3}"
        );
    }

    #[test]
    fn refinement_partitions_intervals() {
        let f = ok(|theta: f64| State::new((2.0 * theta).cos(), (3.0 * theta).sin()));
        let cfg = SamplerConfig {
            loss_kind: LossKind::Euclidean,
            loss_goal: 0.05,
            ..Default::default()
        };
        let set = run_sampler(&f, &cfg).unwrap();
        for w in set.samples.windows(2) {
            assert!(w[0].theta < w[1].theta, "thetas must stay strictly sorted");
        }
        assert!(set.samples[0].theta >= 0.0);
        assert!(set.samples.last().unwrap().theta < 2.0 * PI);
    }

    #[test]
    fn sampler_is_deterministic() {
        let f = ok(|theta: f64| State::new((2.0 * theta).cos() + theta.sin(), (3.0 * theta).sin()));
        let cfg = SamplerConfig {
            loss_kind: LossKind::Curvature,
            loss_goal: 0.02,
            batch_width: 4,
            ..Default::default()
        };
        let a = run_sampler(&f, &cfg).unwrap();
        let b = run_sampler(&f, &cfg).unwrap();
        assert_eq!(a.len(), b.len());
        for (sa, sb) in a.samples.iter().zip(b.samples.iter()) {
            assert_eq!(sa.theta.to_bits(), sb.theta.to_bits());
            assert_eq!(sa.insertion_index, sb.insertion_index);
        }
    }

    #[test]
    fn goal_met_means_every_interval_below_goal() {
        let f = ok(|theta: f64| State::new(theta.cos(), 2.0 * theta.sin()));
        let cfg = SamplerConfig {
            loss_kind: LossKind::Euclidean,
            loss_goal: 0.04,
            ..Default::default()
        };
        let set = run_sampler(&f, &cfg).unwrap();
        assert_eq!(set.termination, Termination::GoalMet);
        for loss in &set.interval_losses {
            assert!(*loss < 0.04);
        }
    }

    #[test]
    fn errors_carry_the_offending_theta() {
        let f = |theta: f64| -> Result<State, IntegrateError> {
            if theta > 3.0 {
                Err(IntegrateError::NonFinite(theta))
            } else {
                Ok(State::new(theta.cos(), theta.sin()))
            }
        };
        let err = run_sampler(&f, &SamplerConfig::default()).unwrap_err();
        match err {
            SamplerError::Eval { theta, .. } => assert!(theta > 3.0),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
