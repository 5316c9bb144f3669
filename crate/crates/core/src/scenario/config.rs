//! Scenario files: TOML documents naming presets and overriding any field.
//!
//! Parsing goes through a raw, all-optional mirror of the document, which is
//! then resolved (presets, calibration, explicit fields, in that order) into
//! a fully specified [`Scenario`]. [`Scenario::to_toml`] writes every resolved
//! value back out, so emitting and re-parsing is the identity.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::ScenarioError;
use crate::calibration::{Calibration, WAVELENGTH_GRID_NM};
use crate::classical::{BerPoint, ClassicalFeasibility};
use crate::error::ModelError;
use crate::fiber::{CoreId, FiberSpec, FiberVariant, IsolationMatrix};
use crate::leakage::{ChannelAllocation, DataChannel, DetectorSpec, FilterSpec, QuantumSlot, RejectionPoint};
use crate::qkd::{LinkModel, MuPolicy, QkdLinkParams};
use crate::units::{LossDb, PowerDbm, Wavelength};

pub const FIBER_PRESETS: [&str; 3] = ["nt-mcf-2018", "ta-mcf-2018", "smf-baseline"];
pub const DETECTOR_PRESETS: [&str; 1] = ["detector-id210"];
pub const CALIBRATION_PRESETS: [&str; 1] = ["mcf-2018"];

pub fn fiber_preset(name: &str) -> Option<FiberSpec> {
    match name {
        "nt-mcf-2018" => Some(FiberSpec::nt_mcf_2018()),
        "ta-mcf-2018" => Some(FiberSpec::ta_mcf_2018()),
        "smf-baseline" => Some(FiberSpec::smf_baseline()),
        _ => None,
    }
}

pub fn detector_preset(name: &str) -> Option<DetectorSpec> {
    match name {
        "detector-id210" => Some(DetectorSpec::id210()),
        _ => None,
    }
}

pub fn calibration_preset(name: &str) -> Option<Calibration> {
    match name {
        "mcf-2018" => Some(Calibration::mcf_2018()),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
    Table,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "table" => Ok(OutputFormat::Table),
            other => Err(format!("unknown output format '{other}' (expected csv, json or table)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PresetNames {
    pub fiber: Option<String>,
    pub detector: Option<String>,
    pub calibration: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanningSpec {
    pub min_key_rate_bps: f64,
    pub candidates: Vec<DataChannel>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepAxes {
    pub distances_km: Option<Vec<f64>>,
    pub wavelengths_nm: Option<Vec<f64>>,
    pub launch_powers_dbm: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputSpec {
    pub format: OutputFormat,
    pub path: Option<PathBuf>,
}

/// A fully resolved scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub presets: PresetNames,
    pub link: LinkModel,
    pub feasibility: ClassicalFeasibility,
    pub planning: Option<PlanningSpec>,
    pub sweep: SweepAxes,
    pub output: OutputSpec,
}

// ---- raw document -------------------------------------------------------

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(skip_serializing_if = "Option::is_none")]
    fiber: Option<RawFiber>,
    #[serde(skip_serializing_if = "Option::is_none")]
    detector: Option<RawDetector>,
    #[serde(skip_serializing_if = "Option::is_none")]
    filter: Option<RawFilter>,
    #[serde(skip_serializing_if = "Option::is_none")]
    qkd: Option<RawQkd>,
    #[serde(skip_serializing_if = "Option::is_none")]
    link: Option<RawLink>,
    #[serde(skip_serializing_if = "Option::is_none")]
    allocation: Option<RawAllocation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    planning: Option<RawPlanning>,
    #[serde(skip_serializing_if = "Option::is_none")]
    feasibility: Option<RawFeasibility>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<RawSweep>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<RawOutput>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFiber {
    #[serde(skip_serializing_if = "Option::is_none")]
    preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    variant: Option<FiberVariant>,
    #[serde(skip_serializing_if = "Option::is_none")]
    length_km: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    attenuation_db_per_km: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    xt_adjacent_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    xt_reference_length_km: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    chromatic_dispersion_ps_nm_km: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    isolation_matrix_db: Option<IsolationMatrix>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetector {
    #[serde(skip_serializing_if = "Option::is_none")]
    preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    efficiency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gate_width_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    repetition_rate_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dark_count_prob_per_gate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    deadtime_s: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFilter {
    #[serde(skip_serializing_if = "Option::is_none")]
    center_nm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    knee_rejection_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rejection_curve: Option<Vec<RejectionPoint>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    insertion_loss_db: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQkd {
    #[serde(skip_serializing_if = "Option::is_none")]
    mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    optimize_mu: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mu_search: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    misalignment_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fec_inefficiency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sift_factor: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLink {
    #[serde(skip_serializing_if = "Option::is_none")]
    calibration: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    extra_loss_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    extra_path_loss_db: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Layout {
    None,
    SideCores,
    AllCores,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    core: u8,
    wavelength_nm: f64,
    launch_dbm: f64,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAllocation {
    #[serde(skip_serializing_if = "Option::is_none")]
    quantum_core: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    quantum_wavelength_nm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    layout: Option<Layout>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wavelengths_nm: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    launch_dbm: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    channels: Vec<RawChannel>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlanning {
    #[serde(skip_serializing_if = "Option::is_none")]
    min_key_rate_bps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cores: Option<Vec<u8>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wavelengths_nm: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    launch_dbm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    candidates: Option<Vec<RawChannel>>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFeasibility {
    #[serde(skip_serializing_if = "Option::is_none")]
    launch_window_dbm: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wavelength_window_nm: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fec_ber_limit: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    ber_table: Vec<BerPoint>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    #[serde(skip_serializing_if = "Option::is_none")]
    distances_km: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wavelengths_nm: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    launch_powers_dbm: Option<Vec<f64>>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    format: Option<OutputFormat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<PathBuf>,
}

// ---- resolution ---------------------------------------------------------

fn err(path: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { path: path.to_string(), message: message.into() }
}

fn model_err(path: &str) -> impl Fn(ModelError) -> ScenarioError + '_ {
    move |e| match e {
        ModelError::InvalidArgument(m) => err(path, m),
        other => err(path, other.to_string()),
    }
}

fn required<T>(v: Option<T>, path: &str) -> Result<T, ScenarioError> {
    v.ok_or_else(|| err(path, "missing required field"))
}

fn resolve_fiber(raw: Option<RawFiber>) -> Result<(FiberSpec, Option<String>), ScenarioError> {
    let raw = raw.ok_or_else(|| err("fiber", "missing section (name a preset or give the fiber fields)"))?;
    let (base, preset) = match &raw.preset {
        Some(name) => {
            let spec = fiber_preset(name).ok_or_else(|| {
                err("fiber.preset", format!("unknown preset '{name}' (known: {})", FIBER_PRESETS.join(", ")))
            })?;
            (Some(spec), Some(name.clone()))
        }
        None => (None, None),
    };
    let fiber = match base {
        Some(b) => FiberSpec {
            variant: raw.variant.unwrap_or(b.variant),
            length_km: raw.length_km.unwrap_or(b.length_km),
            attenuation_db_per_km: raw.attenuation_db_per_km.unwrap_or(b.attenuation_db_per_km),
            xt_adjacent_db: raw.xt_adjacent_db.unwrap_or(b.xt_adjacent_db),
            xt_reference_length_km: raw.xt_reference_length_km.unwrap_or(b.xt_reference_length_km),
            chromatic_dispersion_ps_nm_km: raw
                .chromatic_dispersion_ps_nm_km
                .unwrap_or(b.chromatic_dispersion_ps_nm_km),
            isolation_override: raw.isolation_matrix_db.or(b.isolation_override),
        },
        None => {
            let variant = required(raw.variant, "fiber.variant")?;
            let single = variant == FiberVariant::SingleMode;
            let length_km = required(raw.length_km, "fiber.length_km")?;
            FiberSpec {
                variant,
                length_km,
                attenuation_db_per_km: required(raw.attenuation_db_per_km, "fiber.attenuation_db_per_km")?,
                xt_adjacent_db: if single {
                    raw.xt_adjacent_db.unwrap_or(f64::INFINITY)
                } else {
                    required(raw.xt_adjacent_db, "fiber.xt_adjacent_db")?
                },
                xt_reference_length_km: raw.xt_reference_length_km.unwrap_or(length_km),
                chromatic_dispersion_ps_nm_km: raw.chromatic_dispersion_ps_nm_km.unwrap_or(0.0),
                isolation_override: raw.isolation_matrix_db,
            }
        }
    };
    fiber.validate().map_err(model_err("fiber"))?;
    Ok((fiber, preset))
}

fn resolve_detector(raw: Option<RawDetector>) -> Result<(DetectorSpec, Option<String>), ScenarioError> {
    let raw = raw.unwrap_or_default();
    let name = raw.preset.clone().unwrap_or_else(|| DETECTOR_PRESETS[0].to_string());
    let b = detector_preset(&name).ok_or_else(|| {
        err("detector.preset", format!("unknown preset '{name}' (known: {})", DETECTOR_PRESETS.join(", ")))
    })?;
    let det = DetectorSpec {
        efficiency: raw.efficiency.unwrap_or(b.efficiency),
        gate_width_s: raw.gate_width_s.unwrap_or(b.gate_width_s),
        repetition_rate_hz: raw.repetition_rate_hz.unwrap_or(b.repetition_rate_hz),
        dark_count_prob_per_gate: raw.dark_count_prob_per_gate.unwrap_or(b.dark_count_prob_per_gate),
        deadtime_s: raw.deadtime_s.unwrap_or(b.deadtime_s),
    };
    det.validate().map_err(model_err("detector"))?;
    Ok((det, Some(name)))
}

fn channel(raw: &RawChannel, path: &str) -> Result<DataChannel, ScenarioError> {
    DataChannel::new(raw.core, raw.wavelength_nm, raw.launch_dbm).map_err(model_err(path))
}

fn resolve_allocation(raw: Option<RawAllocation>) -> Result<ChannelAllocation, ScenarioError> {
    let raw = raw.unwrap_or_default();
    let quantum = QuantumSlot {
        core: CoreId::new(raw.quantum_core.unwrap_or(0)).map_err(model_err("allocation.quantum_core"))?,
        wavelength: Wavelength::new(raw.quantum_wavelength_nm.unwrap_or(1550.0))
            .map_err(model_err("allocation.quantum_wavelength_nm"))?,
    };
    let layout = raw.layout.unwrap_or(Layout::None);
    let mut data = match layout {
        Layout::None => {
            if raw.wavelengths_nm.is_some() || raw.launch_dbm.is_some() {
                return Err(err("allocation.layout", "wavelengths_nm/launch_dbm need layout = side-cores or all-cores"));
            }
            Vec::new()
        }
        Layout::SideCores | Layout::AllCores => {
            let wl = required(raw.wavelengths_nm.clone(), "allocation.wavelengths_nm")?;
            let p = required(raw.launch_dbm, "allocation.launch_dbm")?;
            let a = if layout == Layout::SideCores {
                ChannelAllocation::side_cores(quantum, &wl, p)
            } else {
                ChannelAllocation::all_cores(quantum, &wl, p)
            };
            a.map_err(model_err("allocation"))?.data_channels
        }
    };
    for (i, c) in raw.channels.iter().enumerate() {
        let path = format!("allocation.channels[{i}]");
        let ch = channel(c, &path)?;
        if ch.occupies(&quantum) {
            return Err(err(&path, format!("core {} at {} nm is the quantum slot", ch.core, ch.wavelength.0)));
        }
        if data.iter().any(|o| o.core == ch.core && o.wavelength == ch.wavelength) {
            return Err(err(&path, format!("core {} at {} nm is already allocated", ch.core, ch.wavelength.0)));
        }
        data.push(ch);
    }
    ChannelAllocation::new(quantum, data).map_err(model_err("allocation"))
}

fn check_axis(v: &Option<Vec<f64>>, path: &str) -> Result<(), ScenarioError> {
    if let Some(v) = v {
        if v.is_empty() {
            return Err(err(path, "must not be empty"));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(err(path, "entries must be finite"));
        }
        if v.windows(2).any(|w| w[1] <= w[0]) {
            return Err(err(path, "must be sorted strictly ascending"));
        }
    }
    Ok(())
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| ScenarioError::Syntax(e.to_string()))?;
        Self::resolve(raw)
    }

    fn resolve(raw: RawScenario) -> Result<Scenario, ScenarioError> {
        let (fiber, fiber_preset) = resolve_fiber(raw.fiber)?;
        let (detector, detector_preset) = resolve_detector(raw.detector)?;
        let allocation = resolve_allocation(raw.allocation)?;
        allocation.validate_for(&fiber).map_err(model_err("allocation"))?;

        let raw_link = raw.link.unwrap_or_default();
        let calibration = match &raw_link.calibration {
            Some(name) => Some(calibration_preset(name).ok_or_else(|| {
                err(
                    "link.calibration",
                    format!("unknown calibration '{name}' (known: {})", CALIBRATION_PRESETS.join(", ")),
                )
            })?),
            None => None,
        };

        let raw_filter = raw.filter.unwrap_or_default();
        let center = raw_filter.center_nm.unwrap_or(allocation.quantum.wavelength.0);
        let knee = raw_filter
            .knee_rejection_db
            .or(calibration.as_ref().map(|c| c.knee_rejection_db))
            .unwrap_or(FilterSpec::DEFAULT_KNEE_DB);
        let mut filter = FilterSpec::with_knee(center, knee);
        if let Some(curve) = raw_filter.rejection_curve {
            if raw_filter.knee_rejection_db.is_some() {
                return Err(err("filter.knee_rejection_db", "give either knee_rejection_db or rejection_curve, not both"));
            }
            filter.rejection_curve = curve;
        }
        if let Some(il) = raw_filter.insertion_loss_db {
            filter.insertion_loss_db = LossDb(il);
        }
        filter.validate().map_err(model_err("filter"))?;

        let raw_qkd = raw.qkd.unwrap_or_default();
        let mut qkd = QkdLinkParams::new(detector);
        if let Some(c) = &calibration {
            qkd.mu = c.mu;
            qkd.misalignment_error = c.misalignment_error;
        }
        qkd.mu = raw_qkd.mu.unwrap_or(qkd.mu);
        qkd.misalignment_error = raw_qkd.misalignment_error.unwrap_or(qkd.misalignment_error);
        qkd.fec_inefficiency = raw_qkd.fec_inefficiency.unwrap_or(qkd.fec_inefficiency);
        qkd.sift_factor = raw_qkd.sift_factor.unwrap_or(qkd.sift_factor);
        qkd.validate().map_err(model_err("qkd"))?;
        let mu_policy = if raw_qkd.optimize_mu.unwrap_or(false) {
            let (lo, hi) = raw_qkd.mu_search.unwrap_or((0.01, 2.0));
            MuPolicy::Optimize { lo, hi }
        } else {
            if raw_qkd.mu_search.is_some() {
                return Err(err("qkd.mu_search", "only meaningful with optimize_mu = true"));
            }
            MuPolicy::Fixed
        };

        let extra_loss = raw_link
            .extra_loss_db
            .or(calibration.as_ref().map(|c| c.extra_loss_db))
            .unwrap_or(0.0);
        let extra_path = raw_link
            .extra_path_loss_db
            .or(calibration.as_ref().map(|c| c.extra_path_loss_db))
            .unwrap_or(0.0);
        let link = LinkModel {
            fiber,
            filter,
            qkd,
            allocation,
            extra_loss_db: LossDb::new(extra_loss).map_err(model_err("link.extra_loss_db"))?,
            extra_path_loss_db: LossDb::new(extra_path).map_err(model_err("link.extra_path_loss_db"))?,
            mu_policy,
        };
        link.validate().map_err(model_err("qkd.mu_search"))?;

        let raw_feas = raw.feasibility.unwrap_or_default();
        let defaults = ClassicalFeasibility::default();
        let feasibility = ClassicalFeasibility {
            launch_window_dbm: raw_feas.launch_window_dbm.unwrap_or(defaults.launch_window_dbm),
            wavelength_window_nm: raw_feas.wavelength_window_nm.unwrap_or(defaults.wavelength_window_nm),
            fec_ber_limit: raw_feas.fec_ber_limit.unwrap_or(defaults.fec_ber_limit),
            ber_table: raw_feas.ber_table,
        };
        feasibility.validate().map_err(model_err("feasibility"))?;

        let planning = match raw.planning {
            None => None,
            Some(p) => Some(resolve_planning(p, &link.allocation.quantum)?),
        };

        let raw_sweep = raw.sweep.unwrap_or_default();
        check_axis(&raw_sweep.distances_km, "sweep.distances_km")?;
        check_axis(&raw_sweep.wavelengths_nm, "sweep.wavelengths_nm")?;
        check_axis(&raw_sweep.launch_powers_dbm, "sweep.launch_powers_dbm")?;
        if let Some(d) = &raw_sweep.distances_km {
            if d[0] <= 0.0 {
                return Err(err("sweep.distances_km", "distances must be positive"));
            }
        }
        if let Some(w) = &raw_sweep.wavelengths_nm {
            for (i, nm) in w.iter().enumerate() {
                Wavelength::new(*nm).map_err(model_err(&format!("sweep.wavelengths_nm[{i}]")))?;
            }
        }
        let sweep = SweepAxes {
            distances_km: raw_sweep.distances_km,
            wavelengths_nm: raw_sweep.wavelengths_nm,
            launch_powers_dbm: raw_sweep.launch_powers_dbm,
        };

        let raw_out = raw.output.unwrap_or_default();
        let output = OutputSpec { format: raw_out.format.unwrap_or_default(), path: raw_out.path };

        Ok(Scenario {
            presets: PresetNames {
                fiber: fiber_preset,
                detector: detector_preset,
                calibration: raw_link.calibration,
            },
            link,
            feasibility,
            planning,
            sweep,
            output,
        })
    }

    /// The resolved scenario with every value spelled out.
    pub fn to_toml(&self) -> String {
        let l = &self.link;
        let f = &l.fiber;
        let d = &l.qkd.detector;
        let raw = RawScenario {
            fiber: Some(RawFiber {
                preset: self.presets.fiber.clone(),
                variant: Some(f.variant),
                length_km: Some(f.length_km),
                attenuation_db_per_km: Some(f.attenuation_db_per_km),
                xt_adjacent_db: Some(f.xt_adjacent_db),
                xt_reference_length_km: Some(f.xt_reference_length_km),
                chromatic_dispersion_ps_nm_km: Some(f.chromatic_dispersion_ps_nm_km),
                isolation_matrix_db: f.isolation_override,
            }),
            detector: Some(RawDetector {
                preset: self.presets.detector.clone(),
                efficiency: Some(d.efficiency),
                gate_width_s: Some(d.gate_width_s),
                repetition_rate_hz: Some(d.repetition_rate_hz),
                dark_count_prob_per_gate: Some(d.dark_count_prob_per_gate),
                deadtime_s: Some(d.deadtime_s),
            }),
            filter: Some(RawFilter {
                center_nm: Some(l.filter.center_nm.0),
                knee_rejection_db: None,
                rejection_curve: Some(l.filter.rejection_curve.clone()),
                insertion_loss_db: Some(l.filter.insertion_loss_db.0),
            }),
            qkd: Some(RawQkd {
                mu: Some(l.qkd.mu),
                optimize_mu: Some(matches!(l.mu_policy, MuPolicy::Optimize { .. })),
                mu_search: match l.mu_policy {
                    MuPolicy::Optimize { lo, hi } => Some((lo, hi)),
                    MuPolicy::Fixed => None,
                },
                misalignment_error: Some(l.qkd.misalignment_error),
                fec_inefficiency: Some(l.qkd.fec_inefficiency),
                sift_factor: Some(l.qkd.sift_factor),
            }),
            link: Some(RawLink {
                calibration: self.presets.calibration.clone(),
                extra_loss_db: Some(l.extra_loss_db.0),
                extra_path_loss_db: Some(l.extra_path_loss_db.0),
            }),
            allocation: Some(RawAllocation {
                quantum_core: Some(l.allocation.quantum.core.index() as u8),
                quantum_wavelength_nm: Some(l.allocation.quantum.wavelength.0),
                layout: None,
                wavelengths_nm: None,
                launch_dbm: None,
                channels: l.allocation.data_channels.iter().map(raw_channel).collect(),
            }),
            planning: self.planning.as_ref().map(|p| RawPlanning {
                min_key_rate_bps: Some(p.min_key_rate_bps),
                cores: None,
                wavelengths_nm: None,
                launch_dbm: None,
                candidates: Some(p.candidates.iter().map(raw_channel).collect()),
            }),
            feasibility: Some(RawFeasibility {
                launch_window_dbm: Some(self.feasibility.launch_window_dbm),
                wavelength_window_nm: Some(self.feasibility.wavelength_window_nm),
                fec_ber_limit: Some(self.feasibility.fec_ber_limit),
                ber_table: self.feasibility.ber_table.clone(),
            }),
            sweep: Some(RawSweep {
                distances_km: self.sweep.distances_km.clone(),
                wavelengths_nm: self.sweep.wavelengths_nm.clone(),
                launch_powers_dbm: self.sweep.launch_powers_dbm.clone(),
            }),
            output: Some(RawOutput { format: Some(self.output.format), path: self.output.path.clone() }),
        };
        toml::to_string(&raw).expect("scenario serialises to TOML")
    }
}

fn raw_channel(c: &DataChannel) -> RawChannel {
    RawChannel { core: c.core.index() as u8, wavelength_nm: c.wavelength.0, launch_dbm: c.launch_power.0 }
}

fn resolve_planning(p: RawPlanning, quantum: &QuantumSlot) -> Result<PlanningSpec, ScenarioError> {
    let min = required(p.min_key_rate_bps, "planning.min_key_rate_bps")?;
    if !(min >= 0.0 && min.is_finite()) {
        return Err(err("planning.min_key_rate_bps", format!("{min} must be finite and >= 0")));
    }
    let mut candidates = Vec::new();
    match p.candidates {
        Some(list) => {
            if p.cores.is_some() || p.wavelengths_nm.is_some() || p.launch_dbm.is_some() {
                return Err(err("planning.candidates", "give either candidates or cores/wavelengths_nm/launch_dbm, not both"));
            }
            for (i, c) in list.iter().enumerate() {
                let path = format!("planning.candidates[{i}]");
                let ch = channel(c, &path)?;
                if ch.occupies(quantum) {
                    return Err(err(&path, "candidate is the quantum slot"));
                }
                if candidates.iter().any(|o: &DataChannel| o.core == ch.core && o.wavelength == ch.wavelength) {
                    return Err(err(&path, "duplicate candidate slot"));
                }
                candidates.push(ch);
            }
        }
        None => {
            let cores = p.cores.unwrap_or_else(|| (0..7).collect());
            let wl = p.wavelengths_nm.unwrap_or_else(|| WAVELENGTH_GRID_NM.to_vec());
            let launch = p.launch_dbm.unwrap_or(-4.0);
            PowerDbm::new(launch).map_err(model_err("planning.launch_dbm"))?;
            for (i, &core) in cores.iter().enumerate() {
                CoreId::new(core).map_err(model_err(&format!("planning.cores[{i}]")))?;
            }
            for &nm in &wl {
                for &core in &cores {
                    let ch = DataChannel::new(core, nm, launch).map_err(model_err("planning.wavelengths_nm"))?;
                    if !ch.occupies(quantum)
                        && !candidates.iter().any(|o: &DataChannel| o.core == ch.core && o.wavelength == ch.wavelength)
                    {
                        candidates.push(ch);
                    }
                }
            }
        }
    }
    Ok(PlanningSpec { min_key_rate_bps: min, candidates })
}
