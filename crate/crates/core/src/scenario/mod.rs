//! Scenario files, report generation and the command runner behind the CLI.

mod config;
mod report;

use std::path::{Path, PathBuf};

use serde_json::json;
use thiserror::Error;

pub use config::{
    calibration_preset, detector_preset, fiber_preset, OutputFormat, OutputSpec, PlanningSpec, PresetNames, Scenario,
    SweepAxes, CALIBRATION_PRESETS, DETECTOR_PRESETS, FIBER_PRESETS,
};
pub use report::{Cell, Report};

use crate::error::ModelError;
use crate::fiber::CoreId;
use crate::leakage::ChannelAllocation;
use crate::planner::{plan_allocation, rank_slots, PlanResult, PlanningProblem};
use crate::qkd::{sweep_distance, sweep_wavelength, LinkModel, PointStatus, SweepPoint};
use crate::units::{PowerDbm, Wavelength};

/// Problems with the scenario document itself.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("scenario syntax: {0}")]
    Syntax(String),
    #[error("scenario field '{path}': {message}")]
    Invalid { path: String, message: String },
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("model error: {0}")]
    Model(#[from] ModelError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    pub const EXIT_PARSE: i32 = 2;
    pub const EXIT_MODEL: i32 = 3;
    pub const EXIT_IO: i32 = 4;

    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Scenario(_) => Self::EXIT_PARSE,
            RunError::Model(_) => Self::EXIT_MODEL,
            RunError::Io { .. } => Self::EXIT_IO,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Leakage,
    Keyrate,
    SweepDistance,
    SweepWavelength,
    Plan,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Leakage => "leakage",
            Command::Keyrate => "keyrate",
            Command::SweepDistance => "sweep-distance",
            Command::SweepWavelength => "sweep-wavelength",
            Command::Plan => "plan",
        }
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, RunError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| RunError::Io { path: path.to_path_buf(), source })?;
    Ok(Scenario::parse(&text)?)
}

pub fn run_command(cmd: Command, scenario: &Scenario) -> Result<Report, RunError> {
    let mut report = Report::new(cmd.name(), &[], scenario.to_toml());
    for (k, v) in [
        ("fiber_preset", &scenario.presets.fiber),
        ("detector_preset", &scenario.presets.detector),
        ("calibration", &scenario.presets.calibration),
    ] {
        report.meta(k, v.as_deref().unwrap_or("none"));
    }
    match cmd {
        Command::Leakage => leakage(scenario, &mut report)?,
        Command::Keyrate => keyrate(scenario, &mut report)?,
        Command::SweepDistance => {
            let axis = scenario.sweep.distances_km.as_ref().ok_or_else(|| missing("sweep.distances_km"))?;
            let points = sweep_distance(&scenario.link, axis)?;
            key_rows(&mut report, &points, false);
        }
        Command::SweepWavelength => {
            let axis = scenario.sweep.wavelengths_nm.as_ref().ok_or_else(|| missing("sweep.wavelengths_nm"))?;
            if scenario.link.allocation.data_channels.is_empty() {
                return Err(ScenarioError::Invalid {
                    path: "allocation".into(),
                    message: "a wavelength sweep needs data channels to move".into(),
                }
                .into());
            }
            let points = sweep_wavelength(&scenario.link, axis, scenario.link.fiber.length_km)?;
            key_rows(&mut report, &points, true);
        }
        Command::Plan => plan(scenario, &mut report)?,
    }
    Ok(report)
}

fn missing(path: &str) -> RunError {
    ScenarioError::Invalid { path: path.into(), message: "required by this command".into() }.into()
}

const KEY_COLUMNS: [&str; 12] =
    ["length_km", "eta", "Y0", "Q_mu", "E_mu", "Q1", "e1", "R_per_gate", "R_bps", "mu", "noise_hz", "status"];

fn key_cells(status: &PointStatus, length_km: f64) -> Vec<Cell> {
    match status.evaluation() {
        Some(e) => {
            let k = &e.key;
            vec![
                length_km.into(),
                k.eta_total.into(),
                k.y0.into(),
                k.q_mu.into(),
                k.e_mu.into(),
                k.q1.into(),
                k.e1.into(),
                k.r_per_gate.into(),
                k.r_bps.into(),
                k.mu.into(),
                e.noise.total_rate_hz().into(),
                status.label().into(),
            ]
        }
        None => {
            // R = 0 is reported, with the status column saying why
            let mut row = vec![Cell::Empty; KEY_COLUMNS.len()];
            row[0] = length_km.into();
            row[8] = 0.0.into();
            row[11] = status.label().into();
            row
        }
    }
}

fn key_rows(report: &mut Report, points: &[SweepPoint], with_wavelength: bool) {
    let mut cols: Vec<&str> = Vec::new();
    if with_wavelength {
        cols.push("data_wavelength_nm");
    }
    cols.extend(KEY_COLUMNS);
    report.columns = cols.iter().map(|c| c.to_string()).collect();
    for p in points {
        let mut row = Vec::new();
        if with_wavelength {
            row.push(p.data_wavelength_nm.into());
        }
        row.extend(key_cells(&p.status, p.length_km));
        report.push(row);
    }
}

fn keyrate(scenario: &Scenario, report: &mut Report) -> Result<(), RunError> {
    let model = &scenario.link;
    model.validate()?;
    let length = model.fiber.length_km;
    let status = model.evaluate_point(length);
    if let PointStatus::Failed(e) = status {
        return Err(e.into());
    }
    report.columns = KEY_COLUMNS.iter().map(|c| c.to_string()).collect();
    report.push(key_cells(&status, length));
    Ok(())
}

const LEAK_COLUMNS: [&str; 11] = [
    "wavelength_setting_nm",
    "launch_setting_dbm",
    "kind",
    "core",
    "wavelength_nm",
    "launch_dbm",
    "leaked_dbm",
    "detected_hz",
    "per_gate_prob",
    "status",
    "length_km",
];

fn leakage(scenario: &Scenario, report: &mut Report) -> Result<(), RunError> {
    let base = &scenario.link;
    base.validate()?;
    let length = base.fiber.length_km;
    report.columns = LEAK_COLUMNS.iter().map(|c| c.to_string()).collect();
    let wavelengths: Vec<Option<f64>> = match &scenario.sweep.wavelengths_nm {
        Some(v) => v.iter().copied().map(Some).collect(),
        None => vec![None],
    };
    let launches: Vec<Option<f64>> = match &scenario.sweep.launch_powers_dbm {
        Some(v) => v.iter().copied().map(Some).collect(),
        None => vec![None],
    };
    for &wl in &wavelengths {
        for &lp in &launches {
            let mut alloc = match wl {
                Some(nm) => base.reassigned_to(Wavelength::new(nm)?)?,
                None => base.allocation.clone(),
            };
            if let Some(p) = lp {
                let p = PowerDbm::new(p)?;
                for ch in &mut alloc.data_channels {
                    ch.launch_power = p;
                }
            }
            leakage_rows(report, &base.with_allocation(alloc), length, wl, lp);
        }
    }
    Ok(())
}

fn leakage_rows(report: &mut Report, model: &LinkModel, length: f64, wl: Option<f64>, lp: Option<f64>) {
    let setting = |kind: &str| -> Vec<Cell> { vec![wl.into(), lp.into(), kind.into()] };
    let tail = |status: String| -> Vec<Cell> { vec![status.into(), length.into()] };
    match model.noise(length) {
        Ok(n) => {
            for c in &n.per_channel {
                let mut row = setting("channel");
                row.extend([
                    Cell::Int(c.channel.core.index() as i64),
                    c.channel.wavelength.0.into(),
                    c.channel.launch_power.0.into(),
                    c.leaked_dbm().into(),
                    c.detected_rate_hz.into(),
                    c.per_gate_prob.into(),
                ]);
                row.extend(tail("ok".into()));
                report.push(row);
            }
            let mut row = setting("dark");
            row.extend([Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty]);
            row.extend([n.dark_rate_hz.into(), n.dark_per_gate_prob.into()]);
            row.extend(tail("ok".into()));
            report.push(row);
            let mut row = setting("total");
            row.extend([Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty]);
            row.extend([n.total_rate_hz().into(), n.total_per_gate_prob.into()]);
            row.extend(tail("ok".into()));
            report.push(row);
        }
        Err(e) => {
            let mut row = setting("total");
            row.extend(vec![Cell::Empty; 6]);
            row.extend(tail(PointStatus::Failed(e).label()));
            report.push(row);
        }
    }
}

fn plan(scenario: &Scenario, report: &mut Report) -> Result<(), RunError> {
    let spec = scenario.planning.as_ref().ok_or_else(|| missing("planning"))?;
    let link = &scenario.link;
    let problem = PlanningProblem {
        fiber: link.fiber.clone(),
        length_km: link.fiber.length_km,
        filter: link.filter.clone(),
        qkd: link.qkd.clone(),
        quantum: link.allocation.quantum,
        candidates: spec.candidates.clone(),
        min_key_rate_bps: spec.min_key_rate_bps,
        extra_loss_db: link.extra_loss_db,
        extra_path_loss_db: link.extra_path_loss_db,
        feasibility: scenario.feasibility.clone(),
    };
    let ranked = rank_slots(&problem)?;
    let result = plan_allocation(&problem)?;
    let rep = link.qkd.detector.repetition_rate_hz;

    report.meta("min_key_rate_bps", format!("{:?}", spec.min_key_rate_bps));
    report.meta("achieved_key_rate_bps", format!("{:?}", result.achieved_key_rate_bps));
    report.meta("selected_channels", result.selected.len());
    report.meta("candidate_channels", ranked.len());
    report.meta("noise_budget_per_gate", format!("{:?}", result.noise_budget_per_gate));
    report.meta("budget_utilization_pct", format!("{:.2}", result.budget_utilization_pct()));

    report.columns = [
        "rank",
        "core",
        "wavelength_nm",
        "launch_dbm",
        "contribution_per_gate",
        "contribution_hz",
        "cumulative_per_gate",
        "selected",
    ]
    .iter()
    .map(|c| c.to_string())
    .collect();
    let mut cumulative = link.qkd.detector.dark_count_prob_per_gate;
    for (i, slot) in ranked.iter().enumerate() {
        cumulative += slot.contribution;
        let chosen = i < result.selected.len();
        report.push(vec![
            Cell::Int(i as i64 + 1),
            Cell::Int(slot.channel.core.index() as i64),
            slot.channel.wavelength.0.into(),
            slot.channel.launch_power.0.into(),
            slot.contribution.into(),
            (slot.contribution * rep).into(),
            cumulative.into(),
            (if chosen { "yes" } else { "no" }).into(),
        ]);
    }
    let grid = plan_grid(&result, &problem);
    report.extra = Some((
        "plan".into(),
        json!({
            "min_key_rate_bps": spec.min_key_rate_bps,
            "achieved_key_rate_bps": result.achieved_key_rate_bps,
            "noise_budget_per_gate": result.noise_budget_per_gate,
            "budget_utilization_pct": result.budget_utilization_pct(),
            "total_noise_per_gate": result.noise.total_per_gate_prob,
            "key": result.key,
            "selected": result.selected,
            "grid": grid.rows,
            "grid_wavelengths_nm": grid.wavelengths,
        }),
    ));
    report.table = Some(grid.render(&result));
    Ok(())
}

struct PlanGrid {
    wavelengths: Vec<f64>,
    /// One string per core, one character per wavelength.
    rows: Vec<String>,
}

impl PlanGrid {
    fn render(&self, result: &PlanResult) -> String {
        let mut out = String::from("core");
        for nm in &self.wavelengths {
            out.push_str(&format!(" {nm:>7}"));
        }
        out.push('\n');
        for (core, row) in self.rows.iter().enumerate() {
            out.push_str(&format!("{core:>4}"));
            for c in row.chars() {
                out.push_str(&format!(" {c:>7}"));
            }
            out.push('\n');
        }
        out.push_str("\nX selected, . candidate not selected, Q quantum slot, blank not a candidate\n");
        out.push_str(&format!(
            "selected {} channels, key rate {:.1} bps, noise budget utilisation {:.1} %\n",
            result.selected.len(),
            result.achieved_key_rate_bps,
            result.budget_utilization_pct()
        ));
        out
    }
}

fn plan_grid(result: &PlanResult, problem: &PlanningProblem) -> PlanGrid {
    let mut wavelengths: Vec<f64> = problem.candidates.iter().map(|c| c.wavelength.0).collect();
    wavelengths.push(problem.quantum.wavelength.0);
    wavelengths.sort_by(f64::total_cmp);
    wavelengths.dedup();
    let sel = ChannelAllocation { quantum: problem.quantum, data_channels: result.selected.clone() };
    let rows = CoreId::all()
        .map(|core| {
            wavelengths
                .iter()
                .map(|&nm| {
                    let at = |c: &crate::leakage::DataChannel| c.core == core && c.wavelength.0 == nm;
                    if problem.quantum.core == core && problem.quantum.wavelength.0 == nm {
                        'Q'
                    } else if sel.data_channels.iter().any(at) {
                        'X'
                    } else if problem.candidates.iter().any(at) {
                        '.'
                    } else {
                        ' '
                    }
                })
                .collect()
        })
        .collect();
    PlanGrid { wavelengths, rows }
}
