//! Transient-stability assessment: run the fault from the pre-fault
//! equilibrium, take the state at clearance, and test it against the TLRoA
//! boundary (home and 2*pi-shifted neighbors). Also scans clearing times
//! into stable/unstable windows, cross-checked by forward simulation.

use crate::lyap::LyapunovSeed;
use crate::model::{equilibrium, ModelError};
use crate::ode::{
    integrate_forward, EventKind, IntegrateError, IntegratorConfig, Trajectory,
};
use crate::params::{Scenario, State};
use crate::roa::TlroaEstimate;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, thiserror::Error)]
pub enum AssessError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Params(#[from] crate::params::ParamError),
}

/// Outcome of one membership test: converges into the basin of the home
/// equilibrium, a 2*pi*k neighbor, or none of the tested basins.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Stable { k: i32 },
    Unstable,
}

impl Verdict {
    pub fn is_stable(&self) -> bool {
        matches!(self, Verdict::Stable { .. })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AssessmentResult {
    /// State at the instant of fault clearance.
    pub clearing_state: State,
    pub verdict: Verdict,
    /// Fault-on trajectory from the pre-fault equilibrium to clearance.
    pub trajectory: Trajectory,
    pub sim_count: usize,
}

/// Pre-fault operating point: the equilibrium of the pre-fault currents.
pub fn prefault_equilibrium(sc: &Scenario) -> Result<State, ModelError> {
    let pre = Scenario {
        i_d_target: sc.i_d_prefault,
        ..sc.clone()
    };
    equilibrium(&pre, State::new(0.0, 0.0))
}

/// Integrate the fault-on dynamics from the pre-fault equilibrium to the
/// clearing instant.
pub fn fault_trajectory(sc: &Scenario, cfg: &IntegratorConfig) -> Result<Trajectory, AssessError> {
    let x0 = prefault_equilibrium(sc)?;
    let traj = integrate_forward(
        x0,
        sc.t_fault_start,
        sc.t_fault_clear,
        sc,
        cfg,
        None,
        None,
    )?;
    Ok(traj)
}

/// Neighbor test order: home first, then increasing |k| (negative before
/// positive, matching the fault-on drift direction).
fn neighbor_order(k_max: i32) -> Vec<i32> {
    let mut ks = vec![0];
    for k in 1..=k_max {
        ks.push(-k);
        ks.push(k);
    }
    ks
}

/// Membership verdict of a single state against the TLRoA curve and its
/// translates up to |k| <= k_max.
pub fn verdict_for(curve_home: &crate::geom::BoundaryCurve, s: State, k_max: i32) -> Verdict {
    for k in neighbor_order(k_max) {
        if curve_home.translated(k).contains(s) {
            return Verdict::Stable { k };
        }
    }
    Verdict::Unstable
}

/// Full assessment of one scenario against a precomputed TLRoA estimate.
pub fn assess(
    sc: &Scenario,
    est: &TlroaEstimate,
    k_max: i32,
    cfg: &IntegratorConfig,
) -> Result<AssessmentResult, AssessError> {
    let trajectory = fault_trajectory(sc, cfg)?;
    let clearing_state = trajectory.end_state();
    let verdict = verdict_for(&est.curve, clearing_state, k_max);
    Ok(AssessmentResult {
        clearing_state,
        verdict,
        trajectory,
        sim_count: 1,
    })
}

/// Forward verification of one clearing state: does it enter the seed band
/// (home or neighbor) within `t_back` after the recovery ramp? Returns the
/// basin index when it does.
pub fn verify_by_simulation(
    clearing_state: State,
    sc: &Scenario,
    seed: &LyapunovSeed,
    t_back: f64,
    cfg: &IntegratorConfig,
) -> Result<Option<i32>, IntegrateError> {
    let post = sc.post_fault();
    let t_steady = post.t_ramp_end();
    let x_eq = seed.x_eq;
    let p = seed.p;
    let c = seed.c;
    let mut band = |t: f64, s: State| -> bool {
        if t < t_steady {
            return false;
        }
        let k = ((s.x1 - x_eq.x1) / (2.0 * PI)).round();
        let dx = [s.x1 - x_eq.x1 - 2.0 * PI * k, s.x2 - x_eq.x2];
        p.quad_form(dx) <= c
    };
    let traj = integrate_forward(
        clearing_state,
        0.0,
        t_steady + t_back,
        &post,
        cfg,
        Some(x_eq.x1),
        Some(&mut band),
    )?;
    if traj.terminated_by(EventKind::ToleranceBandEntered) {
        let k = ((traj.end_state().x1 - x_eq.x1) / (2.0 * PI)).round() as i32;
        Ok(Some(k))
    } else {
        Ok(None)
    }
}

/// One clearing time in the scan, with both the membership verdict and the
/// forward-simulation cross-check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanPoint {
    pub t_clear: f64,
    pub clearing_state: State,
    pub verdict: Verdict,
    /// Basin reached in the verification run, when any.
    pub sim_basin: Option<i32>,
    pub agree: bool,
}

/// Maximal run of consecutive scan points sharing a stability class.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ClearingWindow {
    pub t_start: f64,
    pub t_end: f64,
    pub stable: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClearingScan {
    pub points: Vec<ScanPoint>,
    pub windows: Vec<ClearingWindow>,
    /// Bisection-refined clearing times where the verdict flips.
    pub transitions: Vec<f64>,
    pub mismatch_count: usize,
    pub sim_count: usize,
}

const TRANSITION_BISECTIONS: usize = 20;

/// Scan clearing times over [t_min, t_max] with `n` points: each point is
/// classified by TLRoA membership and cross-checked by a forward run from
/// the same clearing state. Verdict flips are refined by bisection on the
/// membership test.
pub fn clearing_windows(
    base: &Scenario,
    est: &TlroaEstimate,
    t_min: f64,
    t_max: f64,
    n: usize,
    k_max: i32,
    cfg: &IntegratorConfig,
) -> Result<ClearingScan, AssessError> {
    assert!(n >= 2 && t_max > t_min && t_min > base.t_fault_start);
    let mut sim_count = 0;

    // The fault-on flow does not depend on the clearing time, so one long
    // run covers every scan point; states at intermediate clearing times
    // still need their own exact-stop integration for full accuracy.
    let clearing_state_at = |t_clear: f64| -> Result<State, AssessError> {
        let sc = Scenario {
            t_fault_clear: t_clear,
            ..base.clone()
        };
        Ok(fault_trajectory(&sc, cfg)?.end_state())
    };

    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let t_clear = t_min + (t_max - t_min) * i as f64 / (n - 1) as f64;
        let clearing_state = clearing_state_at(t_clear)?;
        sim_count += 1;
        let verdict = verdict_for(&est.curve, clearing_state, k_max);
        let sim_basin = verify_by_simulation(clearing_state, base, &est.seed, est.curve.t_back, cfg)?;
        sim_count += 1;
        // Asymmetric invariant: the TLRoA is a conservative subset of the
        // true basin, so membership-stable must imply simulation-stable;
        // the converse direction is allowed to disagree.
        let agree = !verdict.is_stable() || sim_basin.is_some();
        points.push(ScanPoint {
            t_clear,
            clearing_state,
            verdict,
            sim_basin,
            agree,
        });
    }

    let mut windows: Vec<ClearingWindow> = Vec::new();
    for pt in &points {
        match windows.last_mut() {
            Some(w) if w.stable == pt.verdict.is_stable() => w.t_end = pt.t_clear,
            _ => windows.push(ClearingWindow {
                t_start: pt.t_clear,
                t_end: pt.t_clear,
                stable: pt.verdict.is_stable(),
            }),
        }
    }

    let mut transitions = Vec::new();
    for w in points.windows(2) {
        if w[0].verdict.is_stable() != w[1].verdict.is_stable() {
            let mut lo = w[0].t_clear;
            let mut hi = w[1].t_clear;
            let lo_stable = w[0].verdict.is_stable();
            for _ in 0..TRANSITION_BISECTIONS {
                let mid = 0.5 * (lo + hi);
                let s = clearing_state_at(mid)?;
                sim_count += 1;
                if verdict_for(&est.curve, s, k_max).is_stable() == lo_stable {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            transitions.push(0.5 * (lo + hi));
        }
    }

    let mismatch_count = points.iter().filter(|p| !p.agree).count();
    Ok(ClearingScan {
        points,
        windows,
        transitions,
        mismatch_count,
        sim_count,
    })
}
