//! Physical and control parameters of the reduced-order wind-turbine model,
//! plus the piecewise fault scenario (pre-fault / fault / post-fault ramp).
//!
//! Electrical quantities are kept in per-unit on peak bases: the base voltage
//! is the peak line-to-neutral value `V_b = V_ll * sqrt(2/3)` and the grid
//! impedance is stored as a per-unit resistance and per-unit reactance at
//! nominal frequency. The PLL gains act on voltage in volts, so the swing
//! coefficients scale the per-unit voltage terms by `V_b` (see `model`).

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A point in the PLL phase plane: angle `x1 = delta` [rad] and its
/// derivative `x2 = delta_dot` [rad/s].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub x1: f64,
    pub x2: f64,
}

impl State {
    pub fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }

    /// Euclidean distance in the (rad, rad/s) plane.
    pub fn distance(&self, other: State) -> f64 {
        ((self.x1 - other.x1).powi(2) + (self.x2 - other.x2).powi(2)).sqrt()
    }

    /// Angle wrapped to (-pi, pi].
    pub fn wrapped_angle(&self) -> f64 {
        let mut a = self.x1.rem_euclid(2.0 * PI);
        if a > PI {
            a -= 2.0 * PI;
        }
        a
    }
}

/// PLL frequency saturation variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SatMode {
    None,
    Hard,
    Smooth,
}

impl SatMode {
    pub fn parse(s: &str) -> Option<SatMode> {
        match s {
            "none" => Some(SatMode::None),
            "hard" => Some(SatMode::Hard),
            "smooth" => Some(SatMode::Smooth),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SatMode::None => "none",
            SatMode::Hard => "hard",
            SatMode::Smooth => "smooth",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ParamError {
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("scenario invalid: {0}")]
    BadScenario(String),
}

/// Physical and control constants of the reduced-order model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// PLL proportional gain [rad/s per volt].
    pub k_p: f64,
    /// PLL integral gain [rad/s^2 per volt].
    pub k_i: f64,
    /// Grid resistance [pu].
    pub r_lg: f64,
    /// Grid reactance at nominal frequency [pu].
    pub l_g: f64,
    /// Grid voltage magnitude before the fault [pu].
    pub v_g_prefault: f64,
    /// Grid voltage magnitude during the fault [pu].
    pub v_g_fault: f64,
    /// Grid voltage magnitude after fault clearance [pu].
    pub v_g_postfault: f64,
    /// Grid angular frequency [rad/s].
    pub omega_g: f64,
    /// Reference-frame angular frequency [rad/s].
    pub omega0: f64,
    /// Power base [VA].
    pub s_b: f64,
    /// Voltage base: peak line-to-neutral [V].
    pub v_b: f64,
    /// Line-to-line rms voltage the bases derive from [V].
    pub v_ll: f64,
    /// Short-circuit ratio the impedance derives from.
    pub scr: f64,
    /// X/R ratio of the grid impedance.
    pub xr: f64,
    /// PLL frequency saturation half-width [rad/s].
    pub sat_limit: f64,
    pub sat_mode: SatMode,
}

impl SystemParams {
    /// Parameters of the 12 MVA, 690 V, 50 Hz study system
    /// (SCR 3.3, X/R 18.6, k_p 0.025, k_i 1.5).
    pub fn study_case() -> Self {
        Self::from_scr_xr(3.3, 18.6)
    }

    /// Build the grid impedance from short-circuit ratio and X/R ratio:
    /// |Z| = 1/SCR pu, split by the impedance angle.
    pub fn from_scr_xr(scr: f64, xr: f64) -> Self {
        let z = 1.0 / scr;
        let denom = (1.0 + xr * xr).sqrt();
        let f_g = 50.0;
        SystemParams {
            k_p: 0.025,
            k_i: 1.5,
            r_lg: z / denom,
            l_g: z * xr / denom,
            v_g_prefault: 1.0,
            v_g_fault: 0.0,
            v_g_postfault: 1.0,
            omega_g: 2.0 * PI * f_g,
            omega0: 2.0 * PI * f_g,
            s_b: 12.0e6,
            v_b: 690.0 * (2.0f64 / 3.0).sqrt(),
            v_ll: 690.0,
            scr,
            xr,
            sat_limit: 2.0 * PI * 5.0,
            sat_mode: SatMode::None,
        }
    }

    /// Current base [A] used for kA/s ramp-rate conversion.
    pub fn i_b(&self) -> f64 {
        self.s_b / (3.0f64.sqrt() * self.v_ll)
    }

    /// Ramp rate in kA/s converted to pu/s via the current base.
    pub fn ramp_ka_per_s_to_pu(&self, ka_per_s: f64) -> f64 {
        ka_per_s * 1000.0 / self.i_b()
    }

    /// Grid resistance scaled to volts per pu current.
    pub fn r_scaled(&self) -> f64 {
        self.r_lg * self.v_b
    }

    /// Grid inductance scaled to volt-seconds per pu current
    /// (reactance / omega_g, times the voltage base).
    pub fn l_scaled(&self) -> f64 {
        self.l_g * self.v_b / self.omega_g
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let pos = [
            ("k_p", self.k_p),
            ("k_i", self.k_i),
            ("l_g", self.l_g),
            ("omega_g", self.omega_g),
            ("s_b", self.s_b),
            ("v_b", self.v_b),
            ("sat_limit", self.sat_limit),
        ];
        for (name, v) in pos {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ParamError::OutOfRange(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.r_lg >= 0.0) {
            return Err(ParamError::OutOfRange(format!(
                "r_lg must be >= 0, got {}",
                self.r_lg
            )));
        }
        for (name, v) in [
            ("v_g_prefault", self.v_g_prefault),
            ("v_g_fault", self.v_g_fault),
            ("v_g_postfault", self.v_g_postfault),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(ParamError::OutOfRange(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Maximum converter current magnitude [pu] allowed in any phase.
pub const I_MAX_PU: f64 = 1.1;

/// Phase of the fault schedule a given instant falls in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    PreFault,
    Fault,
    PostFaultRamp,
    PostFaultSteady,
}

/// Commanded currents at one instant, with their time derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurrentCommand {
    pub i_d: f64,
    pub i_q: f64,
    /// d/dt of i_d [pu/s]; nonzero only on the ramp segment.
    pub di_d: f64,
    /// d/dt of i_q [pu/s]; zero for the schedules used here.
    pub di_q: f64,
}

/// Piecewise schedule of current injections and grid voltage across the
/// pre-fault, fault and post-fault-ramp phases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub params: SystemParams,
    pub i_d_prefault: f64,
    pub i_q_prefault: f64,
    pub i_d_fault: f64,
    pub i_q_fault: f64,
    /// Post-fault active-current ramp rate [pu/s]. `f64::INFINITY` disables
    /// the ramp (the current steps straight to `i_d_target`).
    pub ramp_rate: f64,
    pub t_fault_start: f64,
    pub t_fault_clear: f64,
    /// Post-fault steady active current [pu].
    pub i_d_target: f64,
}

impl Scenario {
    /// Severe-dip fault-ride-through case: V_g = 0, i_d = 0.01, i_q = -1
    /// during the fault, recovery ramp 28.4 kA/s.
    pub fn study_case() -> Self {
        let params = SystemParams::study_case();
        let ramp_rate = params.ramp_ka_per_s_to_pu(28.4);
        Scenario {
            params,
            i_d_prefault: 1.0,
            i_q_prefault: 0.0,
            i_d_fault: 0.01,
            i_q_fault: -1.0,
            ramp_rate,
            t_fault_start: 0.0,
            t_fault_clear: 0.5,
            i_d_target: 1.0,
        }
    }

    /// Same operating point with no post-fault ramp.
    pub fn study_case_no_ramp() -> Self {
        Scenario {
            ramp_rate: f64::INFINITY,
            ..Self::study_case()
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        self.params.validate()?;
        if !(self.ramp_rate > 0.0) {
            return Err(ParamError::BadScenario(format!(
                "ramp_rate must be > 0, got {}",
                self.ramp_rate
            )));
        }
        if !(self.t_fault_clear > self.t_fault_start) {
            return Err(ParamError::BadScenario(format!(
                "t_fault_clear ({}) must exceed t_fault_start ({})",
                self.t_fault_clear, self.t_fault_start
            )));
        }
        for (label, i_d, i_q) in [
            ("pre-fault", self.i_d_prefault, self.i_q_prefault),
            ("fault", self.i_d_fault, self.i_q_fault),
            ("post-fault", self.i_d_target, self.i_q_prefault),
        ] {
            let mag = (i_d * i_d + i_q * i_q).sqrt();
            if mag > I_MAX_PU + 1e-12 {
                return Err(ParamError::BadScenario(format!(
                    "{label} current magnitude {mag:.4} pu exceeds I_max = {I_MAX_PU} pu"
                )));
            }
        }
        Ok(())
    }

    /// Duration of the post-fault active-current ramp [s].
    pub fn ramp_duration(&self) -> f64 {
        let span = self.i_d_target - self.i_d_fault;
        if self.ramp_rate.is_infinite() || span <= 0.0 {
            0.0
        } else {
            span / self.ramp_rate
        }
    }

    /// Forward time at which the post-fault ramp ends.
    pub fn t_ramp_end(&self) -> f64 {
        self.t_fault_clear + self.ramp_duration()
    }

    pub fn phase_at(&self, t: f64) -> Phase {
        if t < self.t_fault_start {
            Phase::PreFault
        } else if t < self.t_fault_clear {
            Phase::Fault
        } else if t < self.t_ramp_end() {
            Phase::PostFaultRamp
        } else {
            Phase::PostFaultSteady
        }
    }

    /// Grid voltage magnitude [pu] at time `t`.
    pub fn voltage_at(&self, t: f64) -> f64 {
        match self.phase_at(t) {
            Phase::PreFault => self.params.v_g_prefault,
            Phase::Fault => self.params.v_g_fault,
            Phase::PostFaultRamp | Phase::PostFaultSteady => self.params.v_g_postfault,
        }
    }

    /// Commanded currents and their derivatives at time `t`. During the
    /// post-fault ramp i_d rises linearly from `i_d_fault` to `i_d_target`;
    /// i_q returns to its pre-fault value on clearance.
    pub fn current_at(&self, t: f64) -> CurrentCommand {
        match self.phase_at(t) {
            Phase::PreFault => CurrentCommand {
                i_d: self.i_d_prefault,
                i_q: self.i_q_prefault,
                di_d: 0.0,
                di_q: 0.0,
            },
            Phase::Fault => CurrentCommand {
                i_d: self.i_d_fault,
                i_q: self.i_q_fault,
                di_d: 0.0,
                di_q: 0.0,
            },
            Phase::PostFaultRamp => CurrentCommand {
                i_d: self.i_d_fault + self.ramp_rate * (t - self.t_fault_clear),
                i_q: self.i_q_prefault,
                di_d: self.ramp_rate,
                di_q: 0.0,
            },
            Phase::PostFaultSteady => CurrentCommand {
                i_d: self.i_d_target,
                i_q: self.i_q_prefault,
                di_d: 0.0,
                di_q: 0.0,
            },
        }
    }

    /// Times at which the schedule switches phase, ascending.
    pub fn switch_times(&self) -> Vec<f64> {
        let mut ts = vec![self.t_fault_start, self.t_fault_clear];
        if self.ramp_duration() > 0.0 {
            ts.push(self.t_ramp_end());
        }
        ts
    }

    /// The same operating point with the fault collapsed away: time 0 is the
    /// instant of fault clearance, so t >= 0 runs the ramp then the steady
    /// segment. Used by the RoA estimators, which only see post-fault dynamics.
    pub fn post_fault(&self) -> Scenario {
        Scenario {
            t_fault_start: -2.0,
            t_fault_clear: 0.0,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn impedance_from_scr_xr_is_consistent() {
        let p = SystemParams::from_scr_xr(3.3, 18.6);
        let z = (p.r_lg * p.r_lg + p.l_g * p.l_g).sqrt();
        assert_relative_eq!(z, 1.0 / 3.3, max_relative = 1e-12);
        assert_relative_eq!(p.l_g / p.r_lg, 18.6, max_relative = 1e-12);
    }

    #[test]
    fn current_base_matches_rating() {
        let p = SystemParams::study_case();
        // 12 MVA at 690 V: S / (sqrt(3) * 690) ~= 10.04 kA.
        assert_relative_eq!(p.i_b(), 10_041.58, max_relative = 1e-4);
        assert_relative_eq!(p.ramp_ka_per_s_to_pu(28.4), 28_400.0 / p.i_b(), max_relative = 1e-12);
    }

    #[test]
    fn schedule_phases_and_currents() {
        let sc = Scenario::study_case();
        assert_eq!(sc.phase_at(-0.1), Phase::PreFault);
        assert_eq!(sc.phase_at(0.2), Phase::Fault);
        assert_eq!(sc.phase_at(0.51), Phase::PostFaultRamp);
        assert_eq!(sc.phase_at(10.0), Phase::PostFaultSteady);

        let cmd = sc.current_at(0.2);
        assert_eq!(cmd.i_q, -1.0);
        assert_eq!(cmd.di_d, 0.0);

        let on_ramp = sc.current_at(sc.t_fault_clear + 0.1);
        assert_relative_eq!(on_ramp.i_d, 0.01 + sc.ramp_rate * 0.1, max_relative = 1e-12);
        assert_eq!(on_ramp.di_d, sc.ramp_rate);

        let end = sc.current_at(sc.t_ramp_end() + 1.0);
        assert_eq!(end.i_d, 1.0);
        assert_eq!(end.di_d, 0.0);
    }

    #[test]
    fn no_ramp_has_zero_duration() {
        let sc = Scenario::study_case_no_ramp();
        assert_eq!(sc.ramp_duration(), 0.0);
        assert_eq!(sc.current_at(sc.t_fault_clear).i_d, 1.0);
        assert!(sc.validate().is_ok());
    }

    #[test]
    fn overcurrent_scenario_rejected() {
        let mut sc = Scenario::study_case();
        sc.i_d_fault = 0.8;
        sc.i_q_fault = -1.0;
        assert!(sc.validate().is_err());
    }

    #[test]
    fn wrapped_angle_range() {
        assert_relative_eq!(State::new(3.0 * PI, 0.0).wrapped_angle(), PI);
        assert_relative_eq!(State::new(-PI - 0.1, 0.0).wrapped_angle(), PI - 0.1, epsilon = 1e-12);
    }
}
