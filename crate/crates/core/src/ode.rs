//! Adaptive Dormand-Prince 5(4) initial-value solver with event detection,
//! forward integration, reverse-time integration (negated vector field), and
//! exact handling of the scenario's phase-switch times.

use crate::model::{rhs, ModelError};
use crate::params::{SatMode, Scenario, State};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    FaultCleared,
    RampStarted,
    RampEnded,
    ToleranceBandEntered,
    DivergenceDetected,
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::FaultCleared => "fault_cleared",
            EventKind::RampStarted => "ramp_started",
            EventKind::RampEnded => "ramp_ended",
            EventKind::ToleranceBandEntered => "tolerance_band_entered",
            EventKind::DivergenceDetected => "divergence_detected",
        }
    }
}

/// Time-stamped sequence of states produced by integration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub events: Vec<(f64, EventKind)>,
}

impl Trajectory {
    pub fn end_state(&self) -> State {
        *self.states.last().expect("trajectory is never empty")
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    pub fn terminated_by(&self, kind: EventKind) -> bool {
        self.events.iter().any(|(_, k)| *k == kind)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the step size [s].
    pub max_step: f64,
    /// Angle distance from the tracked equilibrium beyond which a forward
    /// run is declared divergent [rad].
    pub divergence_radius: f64,
    /// Default forward horizon for stability classification [s].
    pub max_time: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_step: 0.02,
            divergence_radius: 3.0 * std::f64::consts::PI,
            max_time: 5.0,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), crate::params::ParamError> {
        for (name, v) in [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("max_step", self.max_step),
            ("divergence_radius", self.divergence_radius),
            ("max_time", self.max_time),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(crate::params::ParamError::OutOfRange(format!(
                    "integrator {name} must be > 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IntegrateError {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepFailure { t: f64, h: f64 },
    #[error("hard saturation breaks time reversal; use sat_mode = smooth or none")]
    HardSaturationNotReversible,
    #[error("state became non-finite at t = {0}")]
    NonFinite(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

const H_MIN: f64 = 1e-12;
const MAX_STEPS: usize = 50_000_000;

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Check invoked on every accepted step; returning an event stops the run.
pub type TerminalCheck<'a> = dyn FnMut(f64, State) -> Option<EventKind> + 'a;

/// Integrate dy/dt = f(t, y) forward in engine time from `t0` to `t_end`,
/// landing exactly on each labeled switch time. Generic over the vector
/// field so the reverse-time wrapper and the unit tests can reuse it.
pub fn integrate_ivp<F>(
    f: &F,
    x0: State,
    t0: f64,
    t_end: f64,
    switches: &[(f64, Option<EventKind>)],
    cfg: &IntegratorConfig,
    mut check: Option<&mut TerminalCheck>,
) -> Result<Trajectory, IntegrateError>
where
    F: Fn(f64, State) -> Result<[f64; 2], ModelError>,
{
    assert!(t_end > t0, "integrate_ivp requires t_end > t0");
    if !x0.is_finite() {
        return Err(IntegrateError::NonFinite(t0));
    }

    let mut pending: Vec<(f64, Option<EventKind>)> = switches
        .iter()
        .filter(|(ts, _)| *ts > t0 + 1e-15 && *ts < t_end - 1e-15)
        .cloned()
        .collect();
    pending.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![x0],
        events: Vec::new(),
    };

    let mut t = t0;
    let mut y = [x0.x1, x0.x2];
    let mut k1 = f(t, x0)?;
    let mut h = initial_step(&k1, &y, cfg, t_end - t0);
    let mut fsal_valid = true;

    for _ in 0..MAX_STEPS {
        if t >= t_end - 1e-15 {
            break;
        }
        // Never step across the next phase switch or the horizon.
        let next_stop = pending.first().map(|(ts, _)| *ts).unwrap_or(t_end);
        let mut hitting_stop = false;
        if t + h >= next_stop - 1e-15 {
            h = next_stop - t;
            hitting_stop = true;
        }
        if h < H_MIN {
            return Err(IntegrateError::StepFailure { t, h });
        }

        if !fsal_valid {
            k1 = f(t, State::new(y[0], y[1]))?;
            fsal_valid = true;
        }
        let mut k = [[0.0f64; 2]; 7];
        k[0] = k1;
        for stage in 1..7 {
            let mut yi = y;
            for (j, kj) in k.iter().enumerate().take(stage) {
                yi[0] += h * A[stage][j] * kj[0];
                yi[1] += h * A[stage][j] * kj[1];
            }
            k[stage] = f(t + C[stage] * h, State::new(yi[0], yi[1]))?;
        }

        let mut y5 = y;
        let mut y4 = y;
        for (j, kj) in k.iter().enumerate() {
            y5[0] += h * B5[j] * kj[0];
            y5[1] += h * B5[j] * kj[1];
            y4[0] += h * B4[j] * kj[0];
            y4[1] += h * B4[j] * kj[1];
        }
        if !y5[0].is_finite() || !y5[1].is_finite() {
            return Err(IntegrateError::NonFinite(t));
        }

        let mut err = 0.0;
        for i in 0..2 {
            let sc = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y5[i].abs());
            let e = (y5[i] - y4[i]) / sc;
            err += e * e;
        }
        err = (err / 2.0).sqrt();

        if err <= 1.0 {
            // Accept.
            t += h;
            y = y5;
            k1 = k[6]; // FSAL
            let state = State::new(y[0], y[1]);
            traj.times.push(t);
            traj.states.push(state);

            if hitting_stop && !pending.is_empty() {
                let (ts, kind) = pending.remove(0);
                debug_assert!((ts - t).abs() < 1e-12);
                if let Some(kind) = kind {
                    traj.events.push((t, kind));
                }
                // The vector field changes across the switch; the last stage
                // evaluation belongs to the old phase.
                fsal_valid = false;
            }
            if let Some(check) = check.as_deref_mut() {
                if let Some(kind) = check(t, state) {
                    traj.events.push((t, kind));
                    return Ok(traj);
                }
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = (h * factor).min(cfg.max_step);
        } else {
            let factor = (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            h *= factor;
            fsal_valid = true; // k1 still valid, step was rejected
            if h < H_MIN {
                return Err(IntegrateError::StepFailure { t, h });
            }
        }
    }
    Ok(traj)
}

fn initial_step(f0: &[f64; 2], y0: &[f64; 2], cfg: &IntegratorConfig, span: f64) -> f64 {
    let sc0 = cfg.abs_tol + cfg.rel_tol * y0[0].abs().max(y0[1].abs());
    let d0 = (y0[0].powi(2) + y0[1].powi(2)).sqrt() / sc0;
    let d1 = (f0[0].powi(2) + f0[1].powi(2)).sqrt() / sc0;
    let h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h.min(cfg.max_step).min(span)
}

fn scenario_switches(sc: &Scenario) -> Vec<(f64, Option<EventKind>)> {
    let mut out = vec![
        (sc.t_fault_start, None),
        (
            sc.t_fault_clear,
            Some(if sc.ramp_duration() > 0.0 {
                EventKind::RampStarted
            } else {
                EventKind::FaultCleared
            }),
        ),
    ];
    if sc.ramp_duration() > 0.0 {
        out.push((sc.t_ramp_end(), Some(EventKind::RampEnded)));
    }
    out
}

/// Forward integration of the scenario dynamics.
///
/// `divergence_center`, when given, is the equilibrium angle used for the
/// divergence exit; `band`, when given, is the tolerance-band predicate
/// (true once the state is inside the band).
pub fn integrate_forward(
    x0: State,
    t0: f64,
    t_end: f64,
    sc: &Scenario,
    cfg: &IntegratorConfig,
    divergence_center: Option<f64>,
    band: Option<&mut dyn FnMut(f64, State) -> bool>,
) -> Result<Trajectory, IntegrateError> {
    let sat = sc.params.sat_mode;
    let f = |t: f64, s: State| rhs(t, s, sc, sat);
    let radius = cfg.divergence_radius;
    let mut band = band;
    let mut check = move |t: f64, s: State| -> Option<EventKind> {
        if let Some(center) = divergence_center {
            if (s.x1 - center).abs() > radius {
                return Some(EventKind::DivergenceDetected);
            }
        }
        if let Some(b) = band.as_deref_mut() {
            if b(t, s) {
                return Some(EventKind::ToleranceBandEntered);
            }
        }
        None
    };
    integrate_ivp(
        &f,
        x0,
        t0,
        t_end,
        &scenario_switches(sc),
        cfg,
        Some(&mut check),
    )
}

/// Reverse-time integration: runs the negated vector field from the forward
/// instant `t_end_forward` back over `duration` seconds, mirroring the phase
/// schedule on the backward clock. The returned trajectory is on the
/// backward clock (tau = 0 at `t_end_forward`).
pub fn integrate_reverse(
    x_end: State,
    t_end_forward: f64,
    duration: f64,
    sc: &Scenario,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, IntegrateError> {
    assert!(duration > 0.0, "reverse duration must be > 0");
    if sc.params.sat_mode == SatMode::Hard {
        return Err(IntegrateError::HardSaturationNotReversible);
    }
    let sat = sc.params.sat_mode;
    let g = |tau: f64, s: State| {
        let f = rhs(t_end_forward - tau, s, sc, sat)?;
        Ok([-f[0], -f[1]])
    };
    let switches: Vec<(f64, Option<EventKind>)> = scenario_switches(sc)
        .into_iter()
        .map(|(ts, kind)| (t_end_forward - ts, kind))
        .filter(|(tau, _)| *tau > 0.0 && *tau < duration)
        .collect();
    integrate_ivp(&g, x_end, 0.0, duration, &switches, cfg, None)
}
