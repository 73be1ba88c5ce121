//! Reduced-order wind-turbine dynamics: the equivalent swing equation, its
//! saturated variant, equilibria, and the analytic Jacobian.
//!
//! The swing form is `M_eq * x2' = T_m_eq - T_e_eq - D_eq * x1'` with
//! `x1 = delta` (PLL angle) and `x2 = delta'`. Coefficients are evaluated
//! from the piecewise current/voltage schedule; the time-derivative terms of
//! the commanded currents are zero on constant segments and equal to the
//! ramp slope on the recovery ramp. Grid frequency and voltage are constant
//! inside each phase, so their derivative terms vanish.

use crate::mat2::Mat2;
use crate::params::{SatMode, Scenario, State};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    /// |M_eq| below threshold: the swing equation is singular at this point.
    #[error("degenerate equivalent mass M_eq = {0:e}")]
    DegenerateMass(f64),
    #[error("no post-fault equilibrium: {0}")]
    NoEquilibrium(String),
    #[error("equilibrium solve did not converge within {0} iterations")]
    NoConvergence(usize),
}

/// Coefficients of the equivalent swing equation at one (state, time) point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwingCoefficients {
    pub m_eq: f64,
    pub t_m_eq: f64,
    pub t_e_eq: f64,
    pub d_eq: f64,
}

const M_EQ_MIN: f64 = 1e-9;

/// Evaluate the swing coefficients at state `s` and time `t`.
pub fn coefficients(s: State, t: f64, sc: &Scenario) -> Result<SwingCoefficients, ModelError> {
    let p = &sc.params;
    let cmd = sc.current_at(t);
    let v = sc.voltage_at(t) * p.v_b;
    let r = p.r_scaled();
    let l = p.l_scaled();

    let m_eq = 1.0 - p.k_p * l * cmd.i_d;
    if m_eq.abs() < M_EQ_MIN {
        return Err(ModelError::DegenerateMass(m_eq));
    }
    // di_q and its second derivative are zero for every schedule here
    // (i_q is constant per phase); only the i_d ramp contributes.
    let t_m_eq = p.k_p * (r * cmd.di_q + l * cmd.di_d * p.omega_g)
        + p.k_i * (r * cmd.i_q + l * cmd.di_q + l * cmd.i_d * p.omega_g);
    let t_e_eq = p.k_i * v * s.x1.sin();
    let d_eq = p.k_p * (v * s.x1.cos() - l * cmd.di_d) - p.k_i * l * cmd.i_d;

    Ok(SwingCoefficients {
        m_eq,
        t_m_eq,
        t_e_eq,
        d_eq,
    })
}

/// Smooth (tanh) saturation: odd, strictly increasing, |result| < limit.
pub fn saturate_smooth(x2: f64, sat_limit: f64) -> f64 {
    sat_limit * (x2 / sat_limit).tanh()
}

fn effective_x2(x2: f64, sat_mode: SatMode, sat_limit: f64) -> f64 {
    match sat_mode {
        SatMode::None => x2,
        SatMode::Hard => x2.clamp(-sat_limit, sat_limit),
        SatMode::Smooth => saturate_smooth(x2, sat_limit),
    }
}

fn effective_x2_derivative(x2: f64, sat_mode: SatMode, sat_limit: f64) -> f64 {
    match sat_mode {
        SatMode::None => 1.0,
        SatMode::Hard => {
            if x2.abs() > sat_limit {
                0.0
            } else {
                1.0
            }
        }
        SatMode::Smooth => {
            let th = (x2 / sat_limit).tanh();
            1.0 - th * th
        }
    }
}

/// Right-hand side (x1', x2') of the (possibly saturated) swing equation.
pub fn rhs(t: f64, s: State, sc: &Scenario, sat_mode: SatMode) -> Result<[f64; 2], ModelError> {
    let c = coefficients(s, t, sc)?;
    let x2_eff = effective_x2(s.x2, sat_mode, sc.params.sat_limit);
    Ok([x2_eff, (c.t_m_eq - c.t_e_eq - c.d_eq * x2_eff) / c.m_eq])
}

/// Analytic Jacobian of `rhs` with respect to the state.
pub fn jacobian(s: State, t: f64, sc: &Scenario, sat_mode: SatMode) -> Result<Mat2, ModelError> {
    let p = &sc.params;
    let c = coefficients(s, t, sc)?;
    let v = sc.voltage_at(t) * p.v_b;
    let x2_eff = effective_x2(s.x2, sat_mode, p.sat_limit);
    let sig = effective_x2_derivative(s.x2, sat_mode, p.sat_limit);

    let dte_dx1 = p.k_i * v * s.x1.cos();
    let dd_dx1 = -p.k_p * v * s.x1.sin();
    Ok(Mat2::new(
        0.0,
        sig,
        (-dte_dx1 - dd_dx1 * x2_eff) / c.m_eq,
        -c.d_eq * sig / c.m_eq,
    ))
}

const EQ_MAX_ITER: usize = 100;
const EQ_RESIDUAL_TOL: f64 = 1e-10;

/// Stable equilibrium of the post-fault steady segment, near `guess`.
///
/// On steady segments x2' = 0 reduces to the scalar sine equation
/// `V_g sin(x1) = r_Lg i_q + L_g omega_g i_d` (volt-scaled); the branch with
/// positive damping and a Hurwitz Jacobian is returned, at the periodic copy
/// nearest to the guess.
pub fn equilibrium(sc: &Scenario, guess: State) -> Result<State, ModelError> {
    let p = &sc.params;
    let t_steady = sc.t_ramp_end() + 1.0;
    let cmd = sc.current_at(t_steady);
    let v = sc.voltage_at(t_steady) * p.v_b;
    let target = p.r_scaled() * cmd.i_q + p.l_scaled() * p.omega_g * cmd.i_d;

    if v <= 0.0 || target.abs() > v {
        return Err(ModelError::NoEquilibrium(format!(
            "sine equation unsolvable: |{target:.4}| > V_g = {v:.4} (grid too weak for the injected current)"
        )));
    }

    // Damped Newton on g(x1) = V sin(x1) - target from the guess.
    let g = |x: f64| v * x.sin() - target;
    let mut x = guess.x1;
    let mut converged = false;
    for _ in 0..EQ_MAX_ITER {
        let gx = g(x);
        if gx.abs() < v * 1e-15 {
            converged = true;
            break;
        }
        let dg = v * x.cos();
        if dg.abs() < v * 1e-12 {
            // At a fold point; nudge toward the stable branch.
            x -= 0.1 * gx.signum();
            continue;
        }
        let mut step = gx / dg;
        // Damping: halve until the residual does not grow.
        let mut lambda = 1.0;
        while lambda > 1e-6 && g(x - lambda * step).abs() > gx.abs() {
            lambda /= 2.0;
        }
        step *= lambda;
        x -= step;
        if step.abs() < 1e-15 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(ModelError::NoConvergence(EQ_MAX_ITER));
    }

    // Newton may have landed on the cos < 0 branch (the saddle); reflect to
    // the stable companion and keep the periodic copy nearest to the guess.
    if x.cos() < 0.0 {
        x = std::f64::consts::PI - x;
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let k = ((guess.x1 - x) / two_pi).round();
    x += k * two_pi;

    let eq = State::new(x, 0.0);
    let f = rhs(t_steady, eq, sc, SatMode::None)?;
    let norm = (f[0] * f[0] + f[1] * f[1]).sqrt();
    if norm >= EQ_RESIDUAL_TOL {
        return Err(ModelError::NoConvergence(EQ_MAX_ITER));
    }
    if !jacobian(eq, t_steady, sc, SatMode::None)?.is_hurwitz(0.0) {
        return Err(ModelError::NoEquilibrium(
            "solution branch is not linearly stable".into(),
        ));
    }
    Ok(eq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::SystemParams;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn steady_time(sc: &Scenario) -> f64 {
        sc.t_ramp_end() + 1.0
    }

    #[test]
    fn mass_matches_direct_substitution() {
        // M_eq = 1 - k_p * L_g,eff * i_d at i_d = 1, with L_g from SCR 3.3.
        let sc = Scenario::study_case();
        let p = &sc.params;
        let c = coefficients(State::new(0.0, 0.0), steady_time(&sc), &sc).unwrap();
        assert_relative_eq!(c.m_eq, 1.0 - p.k_p * p.l_scaled() * 1.0, max_relative = 1e-14);
    }

    #[test]
    fn zero_current_gives_zero_mechanical_torque() {
        let mut sc = Scenario::study_case_no_ramp();
        sc.i_d_target = 0.0;
        sc.i_q_prefault = 0.0;
        let c = coefficients(State::new(0.3, 0.0), steady_time(&sc), &sc).unwrap();
        assert_eq!(c.t_m_eq, 0.0);
    }

    #[test]
    fn electrical_torque_vanishes_at_zero_angle() {
        let sc = Scenario::study_case();
        let c = coefficients(State::new(0.0, 0.0), steady_time(&sc), &sc).unwrap();
        assert_eq!(c.t_e_eq, 0.0);
    }

    #[test]
    fn degenerate_mass_is_reported() {
        let mut sc = Scenario::study_case_no_ramp();
        // Force k_p * l * i_d = 1.
        sc.params.k_p = 1.0 / (sc.params.l_scaled() * sc.i_d_target);
        let err = coefficients(State::new(0.0, 0.0), steady_time(&sc), &sc).unwrap_err();
        assert!(matches!(err, ModelError::DegenerateMass(_)));
    }

    #[test]
    fn rhs_vanishes_at_equilibrium() {
        let sc = Scenario::study_case();
        let eq = equilibrium(&sc, State::new(0.0, 0.0)).unwrap();
        let f = rhs(steady_time(&sc), eq, &sc, SatMode::None).unwrap();
        assert!((f[0] * f[0] + f[1] * f[1]).sqrt() < 1e-10);
    }

    #[test]
    fn equilibrium_matches_bisection_oracle() {
        let sc = Scenario::study_case();
        let p = &sc.params;
        let eq = equilibrium(&sc, State::new(0.0, 0.0)).unwrap();

        // Independent bisection on V sin(x) = r i_q + l w i_d over [0, pi/2].
        let target = p.l_scaled() * p.omega_g * 1.0;
        let v = p.v_g_postfault * p.v_b;
        let (mut lo, mut hi) = (0.0f64, PI / 2.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if v * mid.sin() < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert_relative_eq!(eq.x1, 0.5 * (lo + hi), epsilon = 1e-12);
        assert_eq!(eq.x2, 0.0);
        // Table 1 point: delta* = asin(X_pu * i_d / V_pu) ~= 0.3075 rad.
        assert_relative_eq!(eq.x1, (p.l_g / p.v_g_postfault).asin(), epsilon = 1e-12);
    }

    #[test]
    fn equilibria_repeat_every_two_pi() {
        let sc = Scenario::study_case();
        let e0 = equilibrium(&sc, State::new(0.0, 0.0)).unwrap();
        let e1 = equilibrium(&sc, State::new(2.0 * PI, 0.0)).unwrap();
        let em = equilibrium(&sc, State::new(-2.0 * PI, 0.0)).unwrap();
        assert_relative_eq!(e1.x1 - e0.x1, 2.0 * PI, epsilon = 1e-10);
        assert_relative_eq!(e0.x1 - em.x1, 2.0 * PI, epsilon = 1e-10);
    }

    #[test]
    fn zero_current_equilibrium_at_origin() {
        let mut sc = Scenario::study_case_no_ramp();
        sc.i_d_target = 0.0;
        sc.i_q_prefault = 0.0;
        let eq = equilibrium(&sc, State::new(0.1, 0.0)).unwrap();
        assert_relative_eq!(eq.x1, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn weak_grid_has_no_equilibrium() {
        let mut sc = Scenario::study_case_no_ramp();
        sc.params = SystemParams::from_scr_xr(0.2, 18.6);
        let err = equilibrium(&sc, State::new(0.0, 0.0)).unwrap_err();
        assert!(matches!(err, ModelError::NoEquilibrium(_)));
    }

    #[test]
    fn jacobian_upper_right_is_one_without_saturation() {
        let sc = Scenario::study_case();
        let j = jacobian(State::new(0.4, 3.0), steady_time(&sc), &sc, SatMode::None).unwrap();
        assert_eq!(j.m[0][1], 1.0);
        assert_eq!(j.m[0][0], 0.0);
    }

    #[test]
    fn jacobian_is_hurwitz_at_stable_equilibrium() {
        let sc = Scenario::study_case();
        let eq = equilibrium(&sc, State::new(0.0, 0.0)).unwrap();
        let j = jacobian(eq, steady_time(&sc), &sc, SatMode::None).unwrap();
        assert!(j.is_hurwitz(0.0));
    }

    fn fd_jacobian(s: State, t: f64, sc: &Scenario, sat: SatMode) -> Mat2 {
        let h = 1e-6;
        let f = |x1: f64, x2: f64| rhs(t, State::new(x1, x2), sc, sat).unwrap();
        let fx1p = f(s.x1 + h, s.x2);
        let fx1m = f(s.x1 - h, s.x2);
        let fx2p = f(s.x1, s.x2 + h);
        let fx2m = f(s.x1, s.x2 - h);
        Mat2::new(
            (fx1p[0] - fx1m[0]) / (2.0 * h),
            (fx2p[0] - fx2m[0]) / (2.0 * h),
            (fx1p[1] - fx1m[1]) / (2.0 * h),
            (fx2p[1] - fx2m[1]) / (2.0 * h),
        )
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let sc = Scenario::study_case();
        let t = steady_time(&sc);
        let states = [
            (0.0, 0.0),
            (0.5, 2.0),
            (-1.0, -5.0),
            (2.0, 10.0),
            (3.0, -20.0),
            (-2.5, 15.0),
            (1.2, 1.0),
            (0.3, -0.2),
            (-0.7, 8.0),
            (2.9, -12.0),
        ];
        for sat in [SatMode::None, SatMode::Smooth] {
            for (x1, x2) in states {
                let s = State::new(x1, x2);
                let j = jacobian(s, t, &sc, sat).unwrap();
                let fd = fd_jacobian(s, t, &sc, sat);
                for r in 0..2 {
                    for c in 0..2 {
                        let scale = j.m[r][c].abs().max(1.0);
                        assert!(
                            (j.m[r][c] - fd.m[r][c]).abs() / scale < 1e-5,
                            "entry ({r},{c}) analytic {} vs fd {}",
                            j.m[r][c],
                            fd.m[r][c]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn smooth_saturation_basics() {
        let limit = 2.0 * PI * 5.0;
        assert_eq!(saturate_smooth(0.0, limit), 0.0);
        // tanh rounds to exactly 1.0 for huge arguments, hence <=.
        assert!(saturate_smooth(1e6, limit) <= limit);
        assert!(saturate_smooth(1e6, limit) > limit * 0.999999);
        // Unit slope at the origin.
        let h = 1e-7;
        let slope = (saturate_smooth(h, limit) - saturate_smooth(-h, limit)) / (2.0 * h);
        assert_relative_eq!(slope, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn smooth_mode_close_to_none_at_small_rates() {
        let sc = Scenario::study_case();
        let t = steady_time(&sc);
        let s = State::new(0.8, 0.01 * sc.params.sat_limit);
        let f_none = rhs(t, s, &sc, SatMode::None).unwrap();
        let f_smooth = rhs(t, s, &sc, SatMode::Smooth).unwrap();
        // tanh(u) = u - u^3/3 + ..., so the relative gap is bounded by u^2/3.
        assert!((f_none[0] - f_smooth[0]).abs() / f_none[0].abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn rhs_is_two_pi_periodic(x1 in -10.0f64..10.0, x2 in -50.0f64..50.0, t in 0.0f64..2.0) {
            let sc = Scenario::study_case();
            let a = rhs(t, State::new(x1, x2), &sc, SatMode::None).unwrap();
            let b = rhs(t, State::new(x1 + 2.0 * PI, x2), &sc, SatMode::None).unwrap();
            // sin/cos of shifted arguments differ only by rounding.
            prop_assert!((a[0] - b[0]).abs() <= 1e-9);
            prop_assert!((a[1] - b[1]).abs() <= 1e-9 * a[1].abs().max(1.0));
        }

        #[test]
        fn smooth_saturation_is_bounded_and_odd(x2 in -1e4f64..1e4, limit in 0.1f64..100.0) {
            let y = saturate_smooth(x2, limit);
            prop_assert!(y.abs() <= limit);
            if x2 != 0.0 {
                prop_assert!(y.signum() == x2.signum());
            }
            let ym = saturate_smooth(-x2, limit);
            prop_assert!((y + ym).abs() < 1e-12 * limit);
        }

        #[test]
        fn smooth_saturation_small_signal_bound(frac in -0.01f64..0.01, limit in 0.1f64..100.0) {
            let x2 = frac * limit;
            let y = saturate_smooth(x2, limit);
            // u - tanh(u) < u^3/3; the bound is tight to O(u^5), so leave
            // a few ulps of slack for the floating-point evaluation.
            let slack = 4.0 * f64::EPSILON * x2.abs();
            prop_assert!((y - x2).abs() <= x2.abs().powi(3) / (3.0 * limit * limit) + slack);
        }

        #[test]
        fn jacobian_fd_agreement_over_parameter_draws(
            scale_kp in 0.5f64..1.5,
            scale_ki in 0.5f64..1.5,
            scale_scr in 0.5f64..1.5,
            x1 in -3.0f64..3.0,
            x2 in -40.0f64..40.0,
        ) {
            let mut sc = Scenario::study_case();
            sc.params = SystemParams::from_scr_xr(3.3 * scale_scr, 18.6);
            sc.params.k_p *= scale_kp;
            sc.params.k_i *= scale_ki;
            let t = sc.t_ramp_end() + 1.0;
            let s = State::new(x1, x2);
            let j = jacobian(s, t, &sc, SatMode::None).unwrap();
            let fd = fd_jacobian(s, t, &sc, SatMode::None);
            for r in 0..2 {
                for c in 0..2 {
                    let scale = j.m[r][c].abs().max(1.0);
                    prop_assert!((j.m[r][c] - fd.m[r][c]).abs() / scale < 1e-4);
                }
            }
        }
    }
}
