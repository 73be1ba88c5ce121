//! Flat sectioned key=value run configuration. Keys carry their units in
//! the name; values are plain numbers or words. Parsing is line-precise,
//! and a parsed document can be written back out and re-parsed losslessly.

use crate::ode::IntegratorConfig;
use crate::params::{SatMode, Scenario, SystemParams};
use crate::roa::{GridSpec, SweepAxis};
use crate::sampler::{LossKind, SamplerConfig};
use std::collections::HashSet;
use std::f64::consts::PI;
use std::fmt::Write as _;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value` or `[section]`, got `{text}`")]
    BadLine { line: usize, text: String },
    #[error("line {line}: key `{key}` appears before any [section] header")]
    KeyOutsideSection { line: usize, key: String },
    #[error("line {line}: unknown section `[{name}]`")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: unknown key `{key}` in section [{section}]")]
    UnknownKey {
        line: usize,
        section: String,
        key: String,
    },
    #[error("line {line}: duplicate key `{key}` in section [{section}]")]
    DuplicateKey {
        line: usize,
        section: String,
        key: String,
    },
    #[error("line {line}: value `{value}` for `{key}` is not {expected}")]
    BadValue {
        line: usize,
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("[{section}]: exactly one of `{a}` and `{b}` must be set")]
    ExactlyOneOf {
        section: String,
        a: &'static str,
        b: &'static str,
    },
    #[error("override `{0}` must look like section.key=value")]
    BadOverride(String),
    #[error(transparent)]
    Params(#[from] crate::params::ParamError),
}

const SECTIONS: [&str; 7] = [
    "system",
    "scenario",
    "integrator",
    "grid",
    "tlroa",
    "assess",
    "sweep",
];

/// One parsed `key = value` entry with its source line.
#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Order-preserving parsed config file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Document {
    pub sections: Vec<(String, Vec<Entry>)>,
}

impl Document {
    pub fn parse(text: &str) -> Result<Document, ConfigError> {
        let mut doc = Document::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let trimmed = stripped.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(name) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = name.trim().to_string();
                if !SECTIONS.contains(&name.as_str()) {
                    return Err(ConfigError::UnknownSection { line, name });
                }
                doc.sections.push((name, Vec::new()));
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(ConfigError::BadLine {
                    line,
                    text: trimmed.to_string(),
                });
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            let Some((section, entries)) = doc.sections.last_mut() else {
                return Err(ConfigError::KeyOutsideSection { line, key });
            };
            if entries.iter().any(|e| e.key == key) {
                return Err(ConfigError::DuplicateKey {
                    line,
                    section: section.clone(),
                    key,
                });
            }
            entries.push(Entry { key, value, line });
        }
        Ok(doc)
    }

    /// Normalized text form; `parse(text(doc))` reproduces the document
    /// (sections, keys and values in order; comments are not kept).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, entries) in &self.sections {
            let _ = writeln!(out, "[{name}]");
            for e in entries {
                let _ = writeln!(out, "{} = {}", e.key, e.value);
            }
            out.push('\n');
        }
        out
    }

    /// Short hash of the normalized text; stamped into every output file.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        hasher.update(self.to_text().as_bytes());
        let digest = hasher.finalize();
        digest[..6].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections
            .iter()
            .filter(|(name, _)| name == section)
            .flat_map(|(_, entries)| entries.iter())
            .find(|e| e.key == key)
    }

    /// Apply a `section.key=value` override, creating the section or key as
    /// needed.
    pub fn set(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let err = || ConfigError::BadOverride(assignment.to_string());
        let (path, value) = assignment.split_once('=').ok_or_else(err)?;
        let (section, key) = path.trim().split_once('.').ok_or_else(err)?;
        let (section, key, value) = (section.trim(), key.trim(), value.trim());
        if section.is_empty() || key.is_empty() {
            return Err(err());
        }
        if !SECTIONS.contains(&section) {
            return Err(ConfigError::UnknownSection {
                line: 0,
                name: section.to_string(),
            });
        }
        let entries = match self.sections.iter_mut().find(|(n, _)| n == section) {
            Some((_, entries)) => entries,
            None => {
                self.sections.push((section.to_string(), Vec::new()));
                &mut self.sections.last_mut().unwrap().1
            }
        };
        match entries.iter_mut().find(|e| e.key == key) {
            Some(e) => e.value = value.to_string(),
            None => entries.push(Entry {
                key: key.to_string(),
                value: value.to_string(),
                line: 0,
            }),
        }
        Ok(())
    }
}

/// Typed view of a document with every default filled in.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub integrator: IntegratorConfig,
    /// Grid window; `None` means size it around the equilibrium at run time.
    pub grid_window: Option<(f64, f64, f64, f64)>,
    pub n_delta: usize,
    pub n_omega: usize,
    pub sampler: SamplerConfig,
    pub t_back_s: f64,
    pub seed_semi_axis_rad: f64,
    pub seed_n_check: usize,
    pub k_max: i32,
    pub t_clear_min_s: f64,
    pub t_clear_max_s: f64,
    pub n_clear: usize,
    pub sweep_axis: Option<SweepAxis>,
    pub sweep_values: Vec<f64>,
}

struct Reader<'a> {
    doc: &'a Document,
    used: HashSet<(String, String)>,
}

impl<'a> Reader<'a> {
    fn f64(&mut self, section: &str, key: &str, default: f64) -> Result<f64, ConfigError> {
        self.opt_f64(section, key).map(|v| v.unwrap_or(default))
    }

    fn opt_f64(&mut self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.doc.get(section, key) {
            None => Ok(None),
            Some(e) => {
                self.used.insert((section.to_string(), key.to_string()));
                e.value
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|_| ConfigError::BadValue {
                        line: e.line,
                        key: e.key.clone(),
                        value: e.value.clone(),
                        expected: "a number",
                    })
            }
        }
    }

    fn usize(&mut self, section: &str, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.doc.get(section, key) {
            None => Ok(default),
            Some(e) => {
                self.used.insert((section.to_string(), key.to_string()));
                e.value.parse::<usize>().map_err(|_| ConfigError::BadValue {
                    line: e.line,
                    key: e.key.clone(),
                    value: e.value.clone(),
                    expected: "a nonnegative integer",
                })
            }
        }
    }

    fn i32(&mut self, section: &str, key: &str, default: i32) -> Result<i32, ConfigError> {
        match self.doc.get(section, key) {
            None => Ok(default),
            Some(e) => {
                self.used.insert((section.to_string(), key.to_string()));
                e.value.parse::<i32>().map_err(|_| ConfigError::BadValue {
                    line: e.line,
                    key: e.key.clone(),
                    value: e.value.clone(),
                    expected: "an integer",
                })
            }
        }
    }

    fn word<T>(
        &mut self,
        section: &str,
        key: &str,
        default: T,
        expected: &'static str,
        parse: impl Fn(&str) -> Option<T>,
    ) -> Result<T, ConfigError> {
        match self.doc.get(section, key) {
            None => Ok(default),
            Some(e) => {
                self.used.insert((section.to_string(), key.to_string()));
                parse(&e.value).ok_or(ConfigError::BadValue {
                    line: e.line,
                    key: e.key.clone(),
                    value: e.value.clone(),
                    expected,
                })
            }
        }
    }

    fn f64_list(&mut self, section: &str, key: &str) -> Result<Vec<f64>, ConfigError> {
        match self.doc.get(section, key) {
            None => Ok(Vec::new()),
            Some(e) => {
                self.used.insert((section.to_string(), key.to_string()));
                e.value
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<Result<Vec<f64>, _>>()
                    .map_err(|_| ConfigError::BadValue {
                        line: e.line,
                        key: e.key.clone(),
                        value: e.value.clone(),
                        expected: "a comma-separated list of numbers",
                    })
            }
        }
    }

    /// Any key that exists but was never consumed is a typo.
    fn reject_unknown(&self) -> Result<(), ConfigError> {
        for (section, entries) in &self.doc.sections {
            for e in entries {
                if !self.used.contains(&(section.clone(), e.key.clone())) {
                    return Err(ConfigError::UnknownKey {
                        line: e.line,
                        section: section.clone(),
                        key: e.key.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

impl RunConfig {
    pub fn from_document(doc: &Document) -> Result<RunConfig, ConfigError> {
        let mut r = Reader {
            doc,
            used: HashSet::new(),
        };

        let scr = r.f64("system", "scr", 3.3)?;
        let xr = r.f64("system", "x_r_ratio", 18.6)?;
        let mut params = SystemParams::from_scr_xr(scr, xr);
        params.k_p = r.f64("system", "k_p_rad_per_V_s", params.k_p)?;
        params.k_i = r.f64("system", "k_i_rad_per_V_s2", params.k_i)?;
        params.s_b = r.f64("system", "s_b_VA", params.s_b)?;
        let v_ll = r.f64("system", "v_ll_V", params.v_ll)?;
        params.v_ll = v_ll;
        params.v_b = v_ll * (2.0f64 / 3.0).sqrt();
        let f_g = r.f64("system", "f_g_Hz", 50.0)?;
        params.omega_g = 2.0 * PI * f_g;
        params.omega0 = params.omega_g;
        params.v_g_prefault = r.f64("system", "v_g_prefault_pu", params.v_g_prefault)?;
        params.v_g_fault = r.f64("system", "v_g_fault_pu", params.v_g_fault)?;
        params.v_g_postfault = r.f64("system", "v_g_postfault_pu", params.v_g_postfault)?;
        params.sat_limit = r.f64("system", "sat_limit_rad_per_s", params.sat_limit)?;
        params.sat_mode = r.word(
            "system",
            "sat_mode",
            params.sat_mode,
            "one of none/hard/smooth",
            SatMode::parse,
        )?;

        let ka = r.opt_f64("scenario", "ramp_rate_kA_per_s")?;
        let pu = r.opt_f64("scenario", "ramp_rate_pu_per_s")?;
        let ramp_rate = match (ka, pu) {
            (Some(ka), None) => params.ramp_ka_per_s_to_pu(ka),
            (None, Some(pu)) => pu,
            _ => {
                return Err(ConfigError::ExactlyOneOf {
                    section: "scenario".into(),
                    a: "ramp_rate_kA_per_s",
                    b: "ramp_rate_pu_per_s",
                })
            }
        };
        let scenario = Scenario {
            i_d_prefault: r.f64("scenario", "i_d_prefault_pu", 1.0)?,
            i_q_prefault: r.f64("scenario", "i_q_prefault_pu", 0.0)?,
            i_d_fault: r.f64("scenario", "i_d_fault_pu", 0.01)?,
            i_q_fault: r.f64("scenario", "i_q_fault_pu", -1.0)?,
            ramp_rate,
            t_fault_start: r.f64("scenario", "t_fault_start_s", 0.0)?,
            t_fault_clear: r.f64("scenario", "t_fault_clear_s", 0.5)?,
            i_d_target: r.f64("scenario", "i_d_target_pu", 1.0)?,
            params,
        };
        scenario.validate()?;

        let d = IntegratorConfig::default();
        let integrator = IntegratorConfig {
            rel_tol: r.f64("integrator", "rel_tol", d.rel_tol)?,
            abs_tol: r.f64("integrator", "abs_tol", d.abs_tol)?,
            max_step: r.f64("integrator", "max_step_s", d.max_step)?,
            divergence_radius: r.f64("integrator", "divergence_radius_rad", d.divergence_radius)?,
            max_time: r.f64("integrator", "max_time_s", d.max_time)?,
        };
        integrator.validate()?;

        let window = [
            r.opt_f64("grid", "delta_min_rad")?,
            r.opt_f64("grid", "delta_max_rad")?,
            r.opt_f64("grid", "omega_min_rad_per_s")?,
            r.opt_f64("grid", "omega_max_rad_per_s")?,
        ];
        let grid_window = match window {
            [Some(a), Some(b), Some(c), Some(e)] => Some((a, b, c, e)),
            [None, None, None, None] => None,
            _ => {
                return Err(ConfigError::ExactlyOneOf {
                    section: "grid".into(),
                    a: "all four window keys",
                    b: "none of them",
                })
            }
        };
        let n_delta = r.usize("grid", "n_delta", 80)?;
        let n_omega = r.usize("grid", "n_omega", 40)?;

        let sd = SamplerConfig::default();
        let sampler = SamplerConfig {
            loss_kind: r.word(
                "tlroa",
                "loss",
                sd.loss_kind,
                "one of homogeneous/euclidean/curvature",
                LossKind::parse,
            )?,
            loss_goal: r.f64("tlroa", "loss_goal", sd.loss_goal)?,
            n_min: r.usize("tlroa", "n_min", sd.n_min)?,
            n_max: r.usize("tlroa", "n_max", sd.n_max)?,
            batch_width: r.usize("tlroa", "batch_width", sd.batch_width)?,
        };
        sampler.validate()?;

        let cfg = RunConfig {
            t_back_s: r.f64("tlroa", "t_back_s", 1.0)?,
            seed_semi_axis_rad: r.f64("tlroa", "seed_semi_axis_rad", 0.05)?,
            seed_n_check: r.usize("tlroa", "seed_n_check", 16)?,
            k_max: r.i32("assess", "k_max", 2)?,
            t_clear_min_s: r.f64("assess", "t_clear_min_s", 0.05)?,
            t_clear_max_s: r.f64("assess", "t_clear_max_s", 1.2)?,
            n_clear: r.usize("assess", "n_clear", 24)?,
            sweep_axis: r.word("sweep", "axis", None, "one of t_back/ramp_rate/i_d_fault/scr", |s| {
                SweepAxis::parse(s).map(Some)
            })?,
            sweep_values: r.f64_list("sweep", "values")?,
            scenario,
            integrator,
            grid_window,
            n_delta,
            n_omega,
            sampler,
        };
        r.reject_unknown()?;
        Ok(cfg)
    }

    /// Grid specification, falling back to the default window around the
    /// given equilibrium angle.
    pub fn grid_spec(&self, x_eq: crate::params::State) -> GridSpec {
        let mut spec = GridSpec::default_around(x_eq);
        if let Some((dmin, dmax, omin, omax)) = self.grid_window {
            spec.delta_min = dmin;
            spec.delta_max = dmax;
            spec.omega_min = omin;
            spec.omega_max = omax;
        }
        spec.n_delta = self.n_delta;
        spec.n_omega = self.n_omega;
        spec
    }
}

/// Template config for the 12 MVA study case; shipped as an example and used
/// when no `--config` is given.
pub fn example_config() -> &'static str {
    "\
# Transient-stability run configuration. Values are plain numbers; each key
# carries its unit in the name. Unknown keys are rejected.

[system]
scr = 3.3
x_r_ratio = 18.6
k_p_rad_per_V_s = 0.025
k_i_rad_per_V_s2 = 1.5
s_b_VA = 12e6
v_ll_V = 690
f_g_Hz = 50
v_g_prefault_pu = 1.0
v_g_fault_pu = 0.0
v_g_postfault_pu = 1.0
sat_mode = none
sat_limit_rad_per_s = 31.4159265358979

[scenario]
i_d_prefault_pu = 1.0
i_q_prefault_pu = 0.0
i_d_fault_pu = 0.01
i_q_fault_pu = -1.0
i_d_target_pu = 1.0
# Exactly one of the two ramp keys may be set.
ramp_rate_kA_per_s = 28.4
t_fault_start_s = 0.0
t_fault_clear_s = 0.5

[integrator]
rel_tol = 1e-8
abs_tol = 1e-10
max_step_s = 0.02
divergence_radius_rad = 9.42477796076938
max_time_s = 5.0

[grid]
n_delta = 80
n_omega = 40

[tlroa]
t_back_s = 1.0
loss = curvature
loss_goal = 0.03
n_min = 16
n_max = 512
batch_width = 1
seed_semi_axis_rad = 0.05
seed_n_check = 16

[assess]
k_max = 2
t_clear_min_s = 0.05
t_clear_max_s = 1.2
n_clear = 24

[sweep]
axis = ramp_rate
# ramp_rate values are in kA/s; other axes use their natural unit.
values = 14.2, 28.4
"
}
