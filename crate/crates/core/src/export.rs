//! Result serialization: CSV tables with `#` header comments, JSON
//! documents with a schema version, run manifests, and SVG 1.1 phase-plane
//! plots. All floating-point values are written with 17 significant digits
//! so files round-trip bit-exactly.

use crate::assess::ClearingScan;
use crate::ode::Trajectory;
use crate::roa::{CellLabel, ClassifiedGrid, SweepResult, TlroaEstimate};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io::{self, Write};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// 17 significant digits: enough to reproduce any f64 exactly.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn csv_header(w: &mut dyn Write, config_hash: &str, columns: &[(&str, &str)]) -> io::Result<()> {
    writeln!(w, "# config_hash: {config_hash}")?;
    writeln!(w, "# tool_version: {TOOL_VERSION}")?;
    writeln!(w, "# values: 17 significant digits")?;
    for (name, unit) in columns {
        writeln!(w, "# column {name}: {unit}")?;
    }
    let names: Vec<&str> = columns.iter().map(|(n, _)| *n).collect();
    writeln!(w, "{}", names.join(","))
}

pub fn write_trajectory_csv(
    w: &mut dyn Write,
    traj: &Trajectory,
    config_hash: &str,
) -> io::Result<()> {
    csv_header(
        w,
        config_hash,
        &[
            ("t", "s"),
            ("delta", "rad"),
            ("ddelta", "rad/s"),
            ("event", "name or empty"),
        ],
    )?;
    for (i, (t, s)) in traj.times.iter().zip(traj.states.iter()).enumerate() {
        let event = traj
            .events
            .iter()
            .find(|(te, _)| (te - t).abs() < 1e-15 && (i > 0 || *te == *t))
            .map(|(_, k)| k.name())
            .unwrap_or("");
        writeln!(
            w,
            "{},{},{},{}",
            fmt_f64(*t),
            fmt_f64(s.x1),
            fmt_f64(s.x2),
            event
        )?;
    }
    Ok(())
}

pub fn write_boundary_csv(
    w: &mut dyn Write,
    est: &TlroaEstimate,
    config_hash: &str,
) -> io::Result<()> {
    csv_header(
        w,
        config_hash,
        &[
            ("theta", "rad"),
            ("delta", "rad"),
            ("ddelta", "rad/s"),
            ("insertion_index", "evaluation order"),
            ("interval_loss", "dimensionless"),
        ],
    )?;
    for (s, loss) in est.samples.samples.iter().zip(est.samples.interval_losses.iter()) {
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt_f64(s.theta),
            fmt_f64(s.endpoint.x1),
            fmt_f64(s.endpoint.x2),
            s.insertion_index,
            fmt_f64(*loss)
        )?;
    }
    Ok(())
}

/// JSON form of a TLRoA boundary with enough metadata to reproduce it.
pub fn boundary_json(est: &TlroaEstimate, config_hash: &str) -> serde_json::Value {
    serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "config_hash": config_hash,
        "t_back_s": est.curve.t_back,
        "area_rad2_per_s": est.curve.area(),
        "sample_count": est.samples.len(),
        "simulation_count": est.sim_count,
        "metadata": est.curve.metadata,
        "seed": est.seed,
        "vertices": est.curve.vertices,
    })
}

pub fn write_grid_csv(
    w: &mut dyn Write,
    grid: &ClassifiedGrid,
    config_hash: &str,
) -> io::Result<()> {
    csv_header(
        w,
        config_hash,
        &[
            ("delta", "rad"),
            ("ddelta", "rad/s"),
            ("label", "stable_home|stable_neighbor|unstable"),
            ("k", "basin index or empty"),
            ("settle_time", "s or empty"),
            ("note", "free text"),
        ],
    )?;
    for iy in 0..grid.spec.n_omega {
        for ix in 0..grid.spec.n_delta {
            let center = grid.spec.cell_center(ix, iy);
            let (label, k, settle, note) = match grid.label(ix, iy) {
                CellLabel::StableHome { settle_time } => {
                    ("stable_home", "0".to_string(), fmt_f64(*settle_time), String::new())
                }
                CellLabel::StableNeighbor { k, settle_time } => (
                    "stable_neighbor",
                    k.to_string(),
                    fmt_f64(*settle_time),
                    String::new(),
                ),
                CellLabel::Unstable { note } => (
                    "unstable",
                    String::new(),
                    String::new(),
                    note.clone().unwrap_or_default().replace(',', ";"),
                ),
            };
            writeln!(
                w,
                "{},{},{label},{k},{settle},{note}",
                fmt_f64(center.x1),
                fmt_f64(center.x2)
            )?;
        }
    }
    Ok(())
}

pub fn write_scan_csv(w: &mut dyn Write, scan: &ClearingScan, config_hash: &str) -> io::Result<()> {
    csv_header(
        w,
        config_hash,
        &[
            ("t_clear", "s"),
            ("delta", "rad"),
            ("ddelta", "rad/s"),
            ("verdict", "stable|unstable"),
            ("k", "basin index or empty"),
            ("sim_basin", "basin index or empty"),
            ("agree", "0|1"),
        ],
    )?;
    for p in &scan.points {
        let (verdict, k) = match p.verdict {
            crate::assess::Verdict::Stable { k } => ("stable", k.to_string()),
            crate::assess::Verdict::Unstable => ("unstable", String::new()),
        };
        writeln!(
            w,
            "{},{},{},{verdict},{k},{},{}",
            fmt_f64(p.t_clear),
            fmt_f64(p.clearing_state.x1),
            fmt_f64(p.clearing_state.x2),
            p.sim_basin.map(|k| k.to_string()).unwrap_or_default(),
            u8::from(p.agree)
        )?;
    }
    Ok(())
}

pub fn write_sweep_csv(w: &mut dyn Write, sweep: &SweepResult, config_hash: &str) -> io::Result<()> {
    csv_header(
        w,
        config_hash,
        &[
            (sweep.axis.name(), "axis units"),
            ("area", "rad^2/s"),
            ("sample_count", "boundary samples"),
        ],
    )?;
    for e in &sweep.entries {
        writeln!(
            w,
            "{},{},{}",
            fmt_f64(e.value),
            fmt_f64(e.area),
            e.sample_count
        )?;
    }
    Ok(())
}

/// Provenance record written next to every command's outputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    pub config_hash: String,
    pub overrides: Vec<String>,
    /// Omitted under deterministic output mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
    pub simulation_count: usize,
    pub outputs: Vec<String>,
}

// ---------------------------------------------------------------------------
// SVG phase-plane plots.

const PLOT_W: f64 = 860.0;
const PLOT_H: f64 = 600.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 25.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;

/// Phase-plane figure: optional classification raster, boundary curves, and
/// trajectories, rendered as standalone SVG 1.1.
#[derive(Default)]
pub struct PhasePlot {
    title: String,
    raster: Vec<(f64, f64, f64, f64, &'static str)>,
    curves: Vec<(Vec<[f64; 2]>, String, bool)>,
    bounds: Option<[f64; 4]>,
}

const COLOR_HOME: &str = "#7fc97f";
const COLOR_NEIGHBOR: &str = "#80b1d3";
const COLOR_UNSTABLE: &str = "#fb8072";

impl PhasePlot {
    pub fn new(title: &str) -> PhasePlot {
        PhasePlot {
            title: title.to_string(),
            ..Default::default()
        }
    }

    fn include(&mut self, x: f64, y: f64) {
        let b = self.bounds.get_or_insert([x, x, y, y]);
        b[0] = b[0].min(x);
        b[1] = b[1].max(x);
        b[2] = b[2].min(y);
        b[3] = b[3].max(y);
    }

    pub fn add_grid(&mut self, grid: &ClassifiedGrid) {
        let spec = &grid.spec;
        let dw = (spec.delta_max - spec.delta_min) / spec.n_delta as f64;
        let dh = (spec.omega_max - spec.omega_min) / spec.n_omega as f64;
        for iy in 0..spec.n_omega {
            for ix in 0..spec.n_delta {
                let color = match grid.label(ix, iy) {
                    CellLabel::StableHome { .. } => COLOR_HOME,
                    CellLabel::StableNeighbor { .. } => COLOR_NEIGHBOR,
                    CellLabel::Unstable { .. } => COLOR_UNSTABLE,
                };
                let x = spec.delta_min + ix as f64 * dw;
                let y = spec.omega_min + iy as f64 * dh;
                self.raster.push((x, y, dw, dh, color));
            }
        }
        self.include(spec.delta_min, spec.omega_min);
        self.include(spec.delta_max, spec.omega_max);
    }

    pub fn add_closed_curve(&mut self, vertices: &[crate::params::State], color: &str) {
        let pts: Vec<[f64; 2]> = vertices.iter().map(|v| [v.x1, v.x2]).collect();
        for p in &pts {
            self.include(p[0], p[1]);
        }
        self.curves.push((pts, color.to_string(), true));
    }

    pub fn add_trajectory(&mut self, traj: &Trajectory, color: &str) {
        let pts: Vec<[f64; 2]> = traj.states.iter().map(|s| [s.x1, s.x2]).collect();
        for p in &pts {
            self.include(p[0], p[1]);
        }
        self.curves.push((pts, color.to_string(), false));
    }

    pub fn render(&self) -> String {
        let b = self.bounds.unwrap_or([0.0, 1.0, 0.0, 1.0]);
        let (x0, x1) = pad_range(b[0], b[1]);
        let (y0, y1) = pad_range(b[2], b[3]);
        let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * (PLOT_W - MARGIN_L - MARGIN_R);
        let py = |y: f64| PLOT_H - MARGIN_B - (y - y0) / (y1 - y0) * (PLOT_H - MARGIN_T - MARGIN_B);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{PLOT_W}" height="{PLOT_H}" viewBox="0 0 {PLOT_W} {PLOT_H}">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
            PLOT_W / 2.0,
            xml_escape(&self.title)
        );

        for (x, y, w, h, color) in &self.raster {
            // y + h maps to the rect's top edge in screen coordinates.
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}"/>"#,
                px(*x),
                py(*y + *h),
                px(*x + *w) - px(*x),
                py(*y) - py(*y + *h),
            );
        }

        for (pts, color, closed) in &self.curves {
            let coords: Vec<String> = pts
                .iter()
                .map(|p| format!("{:.2},{:.2}", px(p[0]), py(p[1])))
                .collect();
            let tag = if *closed { "polygon" } else { "polyline" };
            let _ = writeln!(
                s,
                r#"<{tag} points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                coords.join(" ")
            );
        }

        // Axes.
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            PLOT_W - MARGIN_L - MARGIN_R,
            PLOT_H - MARGIN_T - MARGIN_B,
        );
        for t in ticks(x0, x1) {
            let _ = writeln!(
                s,
                r#"<line x1="{0:.2}" y1="{1}" x2="{0:.2}" y2="{2}" stroke="black"/>"#,
                px(t),
                PLOT_H - MARGIN_B,
                PLOT_H - MARGIN_B + 5.0
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
                px(t),
                PLOT_H - MARGIN_B + 18.0,
                tick_label(t)
            );
        }
        for t in ticks(y0, y1) {
            let _ = writeln!(
                s,
                r#"<line x1="{1}" y1="{0:.2}" x2="{2}" y2="{0:.2}" stroke="black"/>"#,
                py(t),
                MARGIN_L - 5.0,
                MARGIN_L
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
                MARGIN_L - 8.0,
                py(t) + 4.0,
                tick_label(t)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">delta [rad]</text>"#,
            PLOT_W / 2.0,
            PLOT_H - 12.0
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 16 {0})">d(delta)/dt [rad/s]</text>"#,
            PLOT_H / 2.0
        );
        s.push_str("</svg>\n");
        s
    }
}

fn pad_range(lo: f64, hi: f64) -> (f64, f64) {
    let span = (hi - lo).max(1e-9);
    (lo - 0.05 * span, hi + 0.05 * span)
}

/// Around six round-valued ticks spanning [lo, hi].
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-12 * span {
        out.push(if t.abs() < 1e-12 * span { 0.0 } else { t });
        t += step;
    }
    out
}

fn tick_label(t: f64) -> String {
    if t == 0.0 {
        "0".to_string()
    } else if t.abs() >= 0.01 && t.abs() < 10000.0 {
        let s = format!("{t:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{t:.1e}")
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{BoundaryCurve, CurveMetadata};
    use crate::lyap::LyapunovSeed;
    use crate::mat2::Mat2;
    use crate::ode::EventKind;
    use crate::params::State;
    use crate::roa::GridSpec;
    use crate::sampler::{Sample, SampleSet, Termination};

    #[test]
    fn f64_formatting_roundtrips_exactly() {
        for x in [
            0.1,
            std::f64::consts::PI,
            -1.0 / 3.0,
            1.23456789e-15,
            6.02e23,
            f64::INFINITY,
        ] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "failed for {s}");
        }
    }

    fn fake_estimate() -> TlroaEstimate {
        let vertices = vec![
            State::new(0.0, 0.0),
            State::new(1.0, 0.0),
            State::new(1.0, 1.0),
        ];
        let samples: Vec<Sample> = vertices
            .iter()
            .enumerate()
            .map(|(i, v)| Sample {
                theta: i as f64,
                endpoint: *v,
                insertion_index: i,
            })
            .collect();
        TlroaEstimate {
            curve: BoundaryCurve::new(vertices, 1.0, CurveMetadata::default()),
            samples: SampleSet {
                samples,
                interval_losses: vec![0.01, 0.02, 0.03],
                termination: Termination::GoalMet,
            },
            seed: LyapunovSeed {
                p: Mat2::identity(),
                c: 1.0,
                x_eq: State::new(0.0, 0.0),
                validation_sims: 0,
            },
            sim_count: 3,
        }
    }

    #[test]
    fn boundary_csv_has_hash_and_units() {
        let mut buf = Vec::new();
        write_boundary_csv(&mut buf, &fake_estimate(), "abc123").unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# config_hash: abc123"));
        assert!(text.contains("# column ddelta: rad/s"));
        assert!(text.contains("theta,delta,ddelta,insertion_index,interval_loss"));
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 4);
    }

    #[test]
    fn boundary_json_has_schema_version() {
        let v = boundary_json(&fake_estimate(), "abc123");
        assert_eq!(v["schema_version"], SCHEMA_VERSION);
        assert_eq!(v["vertices"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn trajectory_csv_marks_events() {
        let traj = Trajectory {
            times: vec![0.0, 0.5, 1.0],
            states: vec![
                State::new(0.0, 0.0),
                State::new(0.1, 0.2),
                State::new(0.2, 0.1),
            ],
            events: vec![(0.5, EventKind::FaultCleared)],
        };
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &traj, "h").unwrap();
        let text = String::from_utf8(buf).unwrap();
        let event_lines: Vec<&str> = text.lines().filter(|l| l.ends_with("fault_cleared")).collect();
        assert_eq!(event_lines.len(), 1);
    }

    #[test]
    fn grid_csv_row_count_matches_cells() {
        let spec = GridSpec {
            delta_min: 0.0,
            delta_max: 1.0,
            omega_min: 0.0,
            omega_max: 1.0,
            n_delta: 3,
            n_omega: 2,
        };
        let grid = ClassifiedGrid {
            labels: vec![
                CellLabel::StableHome { settle_time: 0.5 },
                CellLabel::StableNeighbor { k: -1, settle_time: 1.0 },
                CellLabel::Unstable { note: Some("diverged, fast".into()) },
                CellLabel::Unstable { note: None },
                CellLabel::StableHome { settle_time: 0.2 },
                CellLabel::StableHome { settle_time: 0.1 },
            ],
            spec,
            x_eq: State::new(0.0, 0.0),
            sim_count: 6,
        };
        let mut buf = Vec::new();
        write_grid_csv(&mut buf, &grid, "h").unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = text
            .lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with("delta"))
            .collect();
        assert_eq!(rows.len(), 6);
        // Notes must not introduce extra CSV columns.
        for row in rows {
            assert_eq!(row.matches(',').count(), 5, "bad row: {row}");
        }
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let mut plot = PhasePlot::new("test & demo");
        let est = fake_estimate();
        plot.add_closed_curve(&est.curve.vertices, "#000000");
        plot.add_trajectory(
            &Trajectory {
                times: vec![0.0, 1.0],
                states: vec![State::new(-0.5, 0.3), State::new(0.5, -0.3)],
                events: vec![],
            },
            "#ff0000",
        );
        let svg = plot.render();
        assert!(svg.starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\""));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("polygon"));
        assert!(svg.contains("polyline"));
        assert!(svg.contains("test &amp; demo"));
        // Every opened tag style we emit is self-closing or closed.
        assert_eq!(svg.matches("<svg").count(), 1);
    }

    #[test]
    fn manifest_serializes_without_wall_time_when_deterministic() {
        let m = RunManifest {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            command: "tlroa".into(),
            config_hash: "abc".into(),
            overrides: vec!["tlroa.t_back_s=0.9".into()],
            wall_time_s: None,
            simulation_count: 42,
            outputs: vec!["boundary.csv".into()],
        };
        let json = serde_json::to_string(&m).unwrap();
        assert!(!json.contains("wall_time_s"));
        assert!(json.contains("\"schema_version\":1"));
    }

    #[test]
    fn ticks_are_round_and_cover_range() {
        let ts = ticks(-3.2, 7.9);
        assert!(ts.len() >= 4 && ts.len() <= 12);
        assert!(ts.first().unwrap() >= &-3.2);
        assert!(ts.last().unwrap() <= &7.9);
        for t in &ts {
            let r = t / 2.0;
            assert!((r - r.round()).abs() < 1e-9, "tick {t} not on the 2.0 step");
        }
    }
}
