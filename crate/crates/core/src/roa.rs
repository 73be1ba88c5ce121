//! Region-of-attraction estimation two ways: the forward brute-force grid
//! oracle, and the reverse-time TLRoA boundary grown from the Lyapunov seed.

use crate::geom::{BoundaryCurve, CurveMetadata};
use crate::lyap::{build_seed, LyapunovSeed, SeedError, DEFAULT_SEED_SEMI_AXIS};
use crate::ode::{
    integrate_forward, integrate_reverse, EventKind, IntegrateError, IntegratorConfig,
};
use crate::params::{SatMode, Scenario, State};
use crate::sampler::{run_sampler, SampleSet, SamplerConfig, SamplerError, Termination};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, thiserror::Error)]
pub enum RoaError {
    #[error(transparent)]
    Seed(#[from] SeedError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Params(#[from] crate::params::ParamError),
}

/// Rectangular window and resolution of the forward oracle grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub delta_min: f64,
    pub delta_max: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub n_delta: usize,
    pub n_omega: usize,
}

impl GridSpec {
    /// Default window centered on the equilibrium: delta in x_eq +- 3*pi,
    /// delta_dot in +-2*pi*10 rad/s, 80 x 40 cells (~3200 simulations).
    pub fn default_around(x_eq: State) -> GridSpec {
        GridSpec {
            delta_min: x_eq.x1 - 3.0 * PI,
            delta_max: x_eq.x1 + 3.0 * PI,
            omega_min: -2.0 * PI * 10.0,
            omega_max: 2.0 * PI * 10.0,
            n_delta: 80,
            n_omega: 40,
        }
    }

    pub fn cell_center(&self, i_delta: usize, i_omega: usize) -> State {
        let fx = (i_delta as f64 + 0.5) / self.n_delta as f64;
        let fy = (i_omega as f64 + 0.5) / self.n_omega as f64;
        State::new(
            self.delta_min + fx * (self.delta_max - self.delta_min),
            self.omega_min + fy * (self.omega_max - self.omega_min),
        )
    }

    pub fn cell_count(&self) -> usize {
        self.n_delta * self.n_omega
    }

    pub fn validate(&self) -> Result<(), crate::params::ParamError> {
        if self.n_delta == 0 || self.n_omega == 0 {
            return Err(crate::params::ParamError::OutOfRange(
                "grid resolution must be nonzero".into(),
            ));
        }
        if !(self.delta_max > self.delta_min) || !(self.omega_max > self.omega_min) {
            return Err(crate::params::ParamError::OutOfRange(
                "grid window must have positive extent".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CellLabel {
    StableHome { settle_time: f64 },
    StableNeighbor { k: i32, settle_time: f64 },
    Unstable { note: Option<String> },
}

impl CellLabel {
    pub fn is_stable(&self) -> bool {
        !matches!(self, CellLabel::Unstable { .. })
    }

    pub fn neighbor_index(&self) -> Option<i32> {
        match self {
            CellLabel::StableHome { .. } => Some(0),
            CellLabel::StableNeighbor { k, .. } => Some(*k),
            CellLabel::Unstable { .. } => None,
        }
    }
}

/// Forward-simulated RoA classification over a grid of initial conditions.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassifiedGrid {
    pub spec: GridSpec,
    /// Row-major: labels[i_omega * n_delta + i_delta].
    pub labels: Vec<CellLabel>,
    pub x_eq: State,
    pub sim_count: usize,
}

impl ClassifiedGrid {
    pub fn label(&self, i_delta: usize, i_omega: usize) -> &CellLabel {
        &self.labels[i_omega * self.spec.n_delta + i_delta]
    }
}

/// Classify one post-fault initial condition by forward simulation: stable
/// into the home band, into a 2*pi*k-translated band, or unstable within
/// the horizon. Runs the post-fault schedule (time 0 = fault clearance).
pub fn classify_state(
    x0: State,
    post: &Scenario,
    seed: &LyapunovSeed,
    cfg: &IntegratorConfig,
) -> Result<CellLabel, IntegrateError> {
    let t_steady = post.t_ramp_end();
    let x_eq = seed.x_eq;
    let p = seed.p;
    let c = seed.c;
    let mut band = |t: f64, s: State| -> bool {
        if t < t_steady {
            return false; // the band predicate only applies on the steady segment
        }
        let k = ((s.x1 - x_eq.x1) / (2.0 * PI)).round();
        let dx = [s.x1 - x_eq.x1 - 2.0 * PI * k, s.x2 - x_eq.x2];
        p.quad_form(dx) <= c
    };
    let traj = integrate_forward(
        x0,
        0.0,
        cfg.max_time.max(t_steady + 1e-3),
        post,
        cfg,
        Some(x_eq.x1),
        Some(&mut band),
    )?;
    if traj.terminated_by(EventKind::ToleranceBandEntered) {
        let end = traj.end_state();
        let k = ((end.x1 - x_eq.x1) / (2.0 * PI)).round() as i32;
        let settle_time = traj.end_time();
        if k == 0 {
            Ok(CellLabel::StableHome { settle_time })
        } else {
            Ok(CellLabel::StableNeighbor { k, settle_time })
        }
    } else {
        Ok(CellLabel::Unstable { note: None })
    }
}

/// Brute-force forward oracle: every cell center is integrated through the
/// post-fault dynamics and classified. Integrator failures mark the cell
/// unstable with a note instead of aborting the grid.
pub fn forward_roa(
    sc: &Scenario,
    grid: &GridSpec,
    seed: &LyapunovSeed,
    cfg: &IntegratorConfig,
) -> Result<ClassifiedGrid, RoaError> {
    grid.validate()?;
    let post = sc.post_fault();
    let labels: Vec<CellLabel> = (0..grid.cell_count())
        .into_par_iter()
        .map(|idx| {
            let x0 = grid.cell_center(idx % grid.n_delta, idx / grid.n_delta);
            classify_state(x0, &post, seed, cfg).unwrap_or_else(|e| CellLabel::Unstable {
                note: Some(e.to_string()),
            })
        })
        .collect();
    Ok(ClassifiedGrid {
        spec: grid.clone(),
        labels,
        x_eq: seed.x_eq,
        sim_count: grid.cell_count(),
    })
}

/// TLRoA estimate together with the sampler diagnostics that produced it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TlroaEstimate {
    pub curve: BoundaryCurve,
    pub samples: SampleSet,
    pub seed: LyapunovSeed,
    /// Reverse-time integrator invocations.
    pub sim_count: usize,
}

/// Reverse-time endpoint for one seed angle: flows backward through the
/// steady segment for `t_back` and then back through the recovery ramp.
pub fn reverse_endpoint(
    theta: f64,
    post: &Scenario,
    seed: &LyapunovSeed,
    t_back: f64,
    cfg: &IntegratorConfig,
) -> Result<State, IntegrateError> {
    let x_start = seed.boundary_point(theta);
    let duration = t_back + post.ramp_duration();
    if duration <= 0.0 {
        return Ok(x_start);
    }
    let t_end_forward = post.t_ramp_end() + t_back;
    let traj = integrate_reverse(x_start, t_end_forward, duration, post, cfg)?;
    Ok(traj.end_state())
}

/// Estimate the time-limited RoA boundary by adaptively sampling seed
/// angles and reverse-integrating each over `t_back` (+ ramp duration).
/// Endpoints ordered by theta form the closed boundary. A sampler that
/// exhausts its budget yields a warning on the curve, not an error.
pub fn estimate_tlroa(
    sc: &Scenario,
    seed: &LyapunovSeed,
    t_back: f64,
    sampler: &SamplerConfig,
    cfg: &IntegratorConfig,
) -> Result<TlroaEstimate, RoaError> {
    if sc.params.sat_mode == SatMode::Hard {
        return Err(RoaError::Integrate(
            IntegrateError::HardSaturationNotReversible,
        ));
    }
    let post = sc.post_fault();
    let f = |theta: f64| reverse_endpoint(theta, &post, seed, t_back, cfg);
    let samples = run_sampler(&f, sampler)?;

    let mut metadata = CurveMetadata {
        scenario_hash: scenario_hash(sc),
        sample_count: samples.len(),
        sampler_loss: Some(samples.max_loss()),
        neighbor_k: 0,
        warnings: Vec::new(),
    };
    if samples.termination == Termination::BudgetExhausted {
        metadata.warnings.push(format!(
            "sampler budget exhausted at {} samples with max interval loss {:.3e} (goal {:.3e})",
            samples.len(),
            samples.max_loss(),
            sampler.loss_goal
        ));
    }
    let sim_count = samples.len();
    let curve = BoundaryCurve::new(samples.endpoints(), t_back, metadata);
    Ok(TlroaEstimate {
        curve,
        samples,
        seed: seed.clone(),
        sim_count,
    })
}

/// Stable fingerprint of the scenario used to tie exported curves back to
/// the run that produced them.
pub fn scenario_hash(sc: &Scenario) -> String {
    use sha2::{Digest, Sha256};
    let json = serde_json::to_string(sc).expect("scenario serializes");
    let mut hasher = Sha256::new();
    hasher.update(json.as_bytes());
    let digest = hasher.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Parameter axis of a sensitivity sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    TBack,
    RampRate,
    IdFault,
    Scr,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Option<SweepAxis> {
        match s {
            "t_back" => Some(SweepAxis::TBack),
            "ramp_rate" => Some(SweepAxis::RampRate),
            "i_d_fault" => Some(SweepAxis::IdFault),
            "scr" | "SCR" => Some(SweepAxis::Scr),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::TBack => "t_back",
            SweepAxis::RampRate => "ramp_rate",
            SweepAxis::IdFault => "i_d_fault",
            SweepAxis::Scr => "scr",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepEntry {
    pub value: f64,
    pub area: f64,
    pub sample_count: usize,
    pub curve: BoundaryCurve,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub entries: Vec<SweepEntry>,
    pub sim_count: usize,
}

/// Apply one sweep value to a copy of the base scenario. Ramp rates are in
/// pu/s at this level; unit conversion happens in the front end.
pub fn scenario_with(base: &Scenario, axis: SweepAxis, value: f64) -> Scenario {
    let mut sc = base.clone();
    match axis {
        SweepAxis::TBack => {}
        SweepAxis::RampRate => sc.ramp_rate = value,
        SweepAxis::IdFault => sc.i_d_fault = value,
        SweepAxis::Scr => {
            let xr = sc.params.xr;
            let scr_params = crate::params::SystemParams::from_scr_xr(value, xr);
            sc.params.scr = value;
            sc.params.r_lg = scr_params.r_lg;
            sc.params.l_g = scr_params.l_g;
        }
    }
    sc
}

/// One TLRoA per axis value, with polygon areas for comparison. Each value
/// rebuilds the seed (the equilibrium moves with SCR and ramp changes).
pub fn sweep_tlroa(
    base: &Scenario,
    axis: SweepAxis,
    values: &[f64],
    t_back: f64,
    sampler: &SamplerConfig,
    cfg: &IntegratorConfig,
) -> Result<SweepResult, RoaError> {
    let mut entries = Vec::with_capacity(values.len());
    let mut sim_count = 0;
    for &value in values {
        let sc = scenario_with(base, axis, value);
        sc.validate()?;
        let tb = if axis == SweepAxis::TBack { value } else { t_back };
        let seed = build_seed(&sc, DEFAULT_SEED_SEMI_AXIS, 16, cfg)?;
        sim_count += seed.validation_sims;
        let est = estimate_tlroa(&sc, &seed, tb, sampler, cfg)?;
        sim_count += est.sim_count;
        entries.push(SweepEntry {
            value,
            area: est.curve.area(),
            sample_count: est.samples.len(),
            curve: est.curve,
        });
    }
    Ok(SweepResult {
        axis,
        entries,
        sim_count,
    })
}
