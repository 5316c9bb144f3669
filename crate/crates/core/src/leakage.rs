//! Photon leakage from classical data channels into the quantum receiver.
//!
//! Each data channel reaches the single-photon detector through one of two
//! paths: inter-core crosstalk (side cores into the quantum core) or the
//! quantum core itself, where only the receive filter stands in the way. The
//! leaked power is turned into a photon flux, thinned by detection efficiency
//! and the gate width, and the resulting per-gate probabilities are added to
//! the dark-count probability. All probabilities of interest are far below 1,
//! so the Poisson click probability is linearised; a total at or above 1 is a
//! saturation error rather than a silently wrong number.

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::fiber::{fiber_loss, xt_isolation, CoreId, FiberSpec};
use crate::units::{combine_losses, dbm_to_watts, photon_flux, LossDb, PowerDbm, Wavelength};

/// Breakpoints closer than this are treated as the same offset.
const OFFSET_EPS_NM: f64 = 1e-9;

/// Gated InGaAs single-photon detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub efficiency: f64,
    pub gate_width_s: f64,
    pub repetition_rate_hz: f64,
    pub dark_count_prob_per_gate: f64,
    /// Kept for reference; no deadtime correction is applied (below 1% at the
    /// count rates involved here).
    pub deadtime_s: f64,
}

impl DetectorSpec {
    /// ID Quantique id210 settings: 1 MHz gating, 1 ns effective gate, 10%
    /// efficiency, 1.3e-5 dark counts per gate, 10 μs deadtime.
    pub fn id210() -> Self {
        DetectorSpec {
            efficiency: 0.1,
            gate_width_s: 1e-9,
            repetition_rate_hz: 1e6,
            dark_count_prob_per_gate: 1.3e-5,
            deadtime_s: 10e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(ModelError::invalid(format!(
                "detector efficiency {} must lie in (0, 1]",
                self.efficiency
            )));
        }
        if !(self.gate_width_s > 0.0 && self.gate_width_s.is_finite()) {
            return Err(ModelError::invalid(format!("gate width {} s must be > 0", self.gate_width_s)));
        }
        if !(self.repetition_rate_hz > 0.0 && self.repetition_rate_hz.is_finite()) {
            return Err(ModelError::invalid(format!(
                "repetition rate {} Hz must be > 0",
                self.repetition_rate_hz
            )));
        }
        if self.gate_width_s * self.repetition_rate_hz > 1.0 {
            return Err(ModelError::invalid(format!(
                "gate duty cycle {} exceeds 1",
                self.gate_width_s * self.repetition_rate_hz
            )));
        }
        if !(self.dark_count_prob_per_gate >= 0.0 && self.dark_count_prob_per_gate < 1.0) {
            return Err(ModelError::invalid(format!(
                "dark count probability {} must lie in [0, 1)",
                self.dark_count_prob_per_gate
            )));
        }
        if !(self.deadtime_s >= 0.0 && self.deadtime_s.is_finite()) {
            return Err(ModelError::invalid(format!("deadtime {} s must be >= 0", self.deadtime_s)));
        }
        Ok(())
    }

    /// Dark counts per second: dark probability per gate times gate rate.
    pub fn dark_rate_hz(&self) -> f64 {
        self.dark_count_prob_per_gate * self.repetition_rate_hz
    }
}

/// One step of the piecewise-constant rejection curve: every offset at or
/// beyond `offset_nm` (up to the next breakpoint) sees `rejection_db`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RejectionPoint {
    pub offset_nm: f64,
    pub rejection_db: f64,
}

/// FBG + band-pass receive filter in front of the detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub center_nm: Wavelength,
    pub rejection_curve: Vec<RejectionPoint>,
    pub insertion_loss_db: LossDb,
}

impl FilterSpec {
    /// Default knee rejection at 2 nm offset. Uncalibrated.
    pub const DEFAULT_KNEE_DB: f64 = 30.0;
    pub const KNEE_OFFSET_NM: f64 = 2.0;
    /// ~55 dB total extinction of the FBG + BPF cascade.
    pub const PLATEAU_DB: f64 = 55.0;
    pub const PLATEAU_OFFSET_NM: f64 = 4.0;

    /// Passband at the center, `knee_db` from 2 nm, the 55 dB plateau from 4 nm.
    pub fn with_knee(center_nm: f64, knee_db: f64) -> Self {
        FilterSpec {
            center_nm: Wavelength(center_nm),
            rejection_curve: vec![
                RejectionPoint { offset_nm: 0.0, rejection_db: 0.0 },
                RejectionPoint { offset_nm: Self::KNEE_OFFSET_NM, rejection_db: knee_db },
                RejectionPoint { offset_nm: Self::PLATEAU_OFFSET_NM, rejection_db: Self::PLATEAU_DB },
            ],
            insertion_loss_db: LossDb::ZERO,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.center_nm.validate()?;
        LossDb::new(self.insertion_loss_db.0)?;
        let first = self
            .rejection_curve
            .first()
            .ok_or_else(|| ModelError::invalid("rejection curve is empty"))?;
        if first.offset_nm != 0.0 || first.rejection_db != 0.0 {
            return Err(ModelError::invalid(
                "rejection curve must start at offset 0 nm with 0 dB (the quantum passband)",
            ));
        }
        for w in self.rejection_curve.windows(2) {
            if !(w[1].offset_nm > w[0].offset_nm) {
                return Err(ModelError::invalid(format!(
                    "rejection curve offsets must be strictly increasing ({} then {})",
                    w[0].offset_nm, w[1].offset_nm
                )));
            }
            if !(w[1].rejection_db >= w[0].rejection_db) || !w[1].rejection_db.is_finite() {
                return Err(ModelError::invalid(format!(
                    "rejection must be finite and non-decreasing with offset ({} dB then {} dB)",
                    w[0].rejection_db, w[1].rejection_db
                )));
            }
        }
        Ok(())
    }

    /// Rejection for a channel at `lambda`, not counting insertion loss.
    pub fn rejection(&self, lambda: Wavelength) -> LossDb {
        let offset = (lambda.0 - self.center_nm.0).abs();
        let db = self
            .rejection_curve
            .iter()
            .take_while(|p| p.offset_nm <= offset + OFFSET_EPS_NM)
            .last()
            .map_or(0.0, |p| p.rejection_db);
        LossDb(db)
    }

    /// Insertion loss plus rejection.
    pub fn attenuation(&self, lambda: Wavelength) -> LossDb {
        LossDb(self.insertion_loss_db.0 + self.rejection(lambda).0)
    }

    /// Value of the breakpoint at the knee offset, if the curve has one.
    pub fn knee_db(&self) -> Option<f64> {
        self.rejection_curve
            .iter()
            .find(|p| (p.offset_nm - Self::KNEE_OFFSET_NM).abs() < OFFSET_EPS_NM)
            .map(|p| p.rejection_db)
    }

    pub fn set_knee_db(&mut self, knee_db: f64) {
        match self
            .rejection_curve
            .iter_mut()
            .find(|p| (p.offset_nm - Self::KNEE_OFFSET_NM).abs() < OFFSET_EPS_NM)
        {
            Some(p) => p.rejection_db = knee_db,
            None => {
                self.rejection_curve.push(RejectionPoint {
                    offset_nm: Self::KNEE_OFFSET_NM,
                    rejection_db: knee_db,
                });
                self.rejection_curve
                    .sort_by(|a, b| a.offset_nm.total_cmp(&b.offset_nm));
            }
        }
    }
}

/// A classical data channel: one wavelength in one core.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataChannel {
    pub core: CoreId,
    #[serde(rename = "wavelength_nm")]
    pub wavelength: Wavelength,
    #[serde(rename = "launch_dbm")]
    pub launch_power: PowerDbm,
}

impl DataChannel {
    pub fn new(core: u8, wavelength_nm: f64, launch_dbm: f64) -> Result<Self> {
        Ok(DataChannel {
            core: CoreId::new(core)?,
            wavelength: Wavelength::new(wavelength_nm)?,
            launch_power: PowerDbm::new(launch_dbm)?,
        })
    }

    pub fn occupies(&self, slot: &QuantumSlot) -> bool {
        self.core == slot.core && self.wavelength == slot.wavelength
    }
}

/// Where the quantum channel lives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumSlot {
    pub core: CoreId,
    #[serde(rename = "wavelength_nm")]
    pub wavelength: Wavelength,
}

impl Default for QuantumSlot {
    /// 1550 nm in the center core, the worst position for inter-core crosstalk.
    fn default() -> Self {
        QuantumSlot { core: CoreId::CENTER, wavelength: Wavelength(1550.0) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelAllocation {
    pub quantum: QuantumSlot,
    pub data_channels: Vec<DataChannel>,
}

impl ChannelAllocation {
    pub fn new(quantum: QuantumSlot, data_channels: Vec<DataChannel>) -> Result<Self> {
        let a = ChannelAllocation { quantum, data_channels };
        a.validate()?;
        Ok(a)
    }

    /// Data channels on every side core at each of `wavelengths_nm`.
    pub fn side_cores(quantum: QuantumSlot, wavelengths_nm: &[f64], launch_dbm: f64) -> Result<Self> {
        let cores: Vec<CoreId> = CoreId::side_cores().filter(|c| *c != quantum.core).collect();
        Self::on_cores(quantum, &cores, wavelengths_nm, launch_dbm)
    }

    /// Data channels on all seven cores at each of `wavelengths_nm`, skipping
    /// the quantum slot itself.
    pub fn all_cores(quantum: QuantumSlot, wavelengths_nm: &[f64], launch_dbm: f64) -> Result<Self> {
        let cores: Vec<CoreId> = CoreId::all().collect();
        Self::on_cores(quantum, &cores, wavelengths_nm, launch_dbm)
    }

    pub fn on_cores(
        quantum: QuantumSlot,
        cores: &[CoreId],
        wavelengths_nm: &[f64],
        launch_dbm: f64,
    ) -> Result<Self> {
        let mut data = Vec::new();
        for &nm in wavelengths_nm {
            for &core in cores {
                let ch = DataChannel {
                    core,
                    wavelength: Wavelength::new(nm)?,
                    launch_power: PowerDbm::new(launch_dbm)?,
                };
                if !ch.occupies(&quantum) {
                    data.push(ch);
                }
            }
        }
        Self::new(quantum, data)
    }

    pub fn validate(&self) -> Result<()> {
        self.quantum.wavelength.validate()?;
        for (i, ch) in self.data_channels.iter().enumerate() {
            ch.wavelength.validate()?;
            PowerDbm::new(ch.launch_power.0)?;
            if ch.occupies(&self.quantum) {
                return Err(ModelError::invalid(format!(
                    "data channel {i} (core {}, {} nm) sits on the quantum slot",
                    ch.core, ch.wavelength.0
                )));
            }
            if let Some(j) = self.data_channels[..i]
                .iter()
                .position(|o| o.core == ch.core && o.wavelength == ch.wavelength)
            {
                return Err(ModelError::invalid(format!(
                    "data channels {j} and {i} both occupy core {} at {} nm",
                    ch.core, ch.wavelength.0
                )));
            }
        }
        Ok(())
    }

    /// Additional checks that depend on the fiber: single-mode fiber has one core.
    pub fn validate_for(&self, fiber: &FiberSpec) -> Result<()> {
        self.validate()?;
        if !fiber.has_cores() {
            let cores = std::iter::once(self.quantum.core)
                .chain(self.data_channels.iter().map(|c| c.core));
            if let Some(c) = cores.into_iter().find(|c| !c.is_center()) {
                return Err(ModelError::invalid(format!(
                    "single-mode fiber has only core 0, allocation uses core {c}"
                )));
            }
        }
        Ok(())
    }
}

/// Everything on the leakage path except the channel itself.
#[derive(Debug, Clone, Copy)]
pub struct LeakagePath<'a> {
    pub fiber: &'a FiberSpec,
    pub filter: &'a FilterSpec,
    pub detector: &'a DetectorSpec,
    pub length_km: f64,
    /// Fan-in/fan-out and receiver insertion losses on the leakage path.
    pub extra_path_loss: LossDb,
}

/// Leaked optical power from `ch` arriving at the detector, in watts.
pub fn leaked_power_at_detector(ch: &DataChannel, quantum: &QuantumSlot, path: &LeakagePath<'_>) -> Result<f64> {
    if ch.occupies(quantum) {
        return Err(ModelError::invalid(format!(
            "data channel (core {}, {} nm) equals the quantum slot",
            ch.core, ch.wavelength.0
        )));
    }
    let iso = if ch.core == quantum.core {
        // in-core path: only the filter separates the wavelengths
        LossDb::ZERO
    } else {
        match xt_isolation(path.fiber, ch.core, quantum.core, path.length_km)? {
            Some(iso) => iso,
            None => return Ok(0.0),
        }
    };
    let total = combine_losses(&[
        fiber_loss(path.fiber, path.length_km)?,
        iso,
        path.filter.attenuation(ch.wavelength),
        LossDb::new(path.extra_path_loss.0)?,
    ])?;
    dbm_to_watts(PowerDbm(ch.launch_power.0 - total.0))
}

/// Probability that leaked light at `lambda` fires one detector gate.
pub fn per_gate_probability(p_leak_w: f64, lambda: Wavelength, det: &DetectorSpec) -> Result<f64> {
    Ok(photon_flux(p_leak_w, lambda)? * det.efficiency * det.gate_width_s)
}

/// Detector clicks per second caused by `p_leak_w` of leaked light.
pub fn detected_rate(p_leak_w: f64, lambda: Wavelength, det: &DetectorSpec) -> Result<f64> {
    Ok(per_gate_probability(p_leak_w, lambda, det)? * det.repetition_rate_hz)
}

/// Per-gate noise contributed by a single data channel.
pub fn channel_contribution(ch: &DataChannel, quantum: &QuantumSlot, path: &LeakagePath<'_>) -> Result<f64> {
    let p = leaked_power_at_detector(ch, quantum, path)?;
    per_gate_probability(p, ch.wavelength, path.detector)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelNoise {
    pub channel: DataChannel,
    pub leaked_power_w: f64,
    pub detected_rate_hz: f64,
    pub per_gate_prob: f64,
}

impl ChannelNoise {
    /// −∞ when the channel has no leakage path.
    pub fn leaked_dbm(&self) -> f64 {
        10.0 * self.leaked_power_w.log10() + 30.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseBreakdown {
    pub per_channel: Vec<ChannelNoise>,
    pub dark_per_gate_prob: f64,
    pub dark_rate_hz: f64,
    pub total_per_gate_prob: f64,
}

impl NoiseBreakdown {
    pub fn leak_per_gate_prob(&self) -> f64 {
        self.per_channel.iter().map(|c| c.per_gate_prob).sum()
    }

    pub fn leak_rate_hz(&self) -> f64 {
        self.per_channel.iter().map(|c| c.detected_rate_hz).sum()
    }

    pub fn total_rate_hz(&self) -> f64 {
        self.dark_rate_hz + self.leak_rate_hz()
    }
}

/// Dark counts plus every data channel's leakage, per gate and per second.
pub fn noise_breakdown(alloc: &ChannelAllocation, path: &LeakagePath<'_>) -> Result<NoiseBreakdown> {
    alloc.validate()?;
    path.detector.validate()?;
    let mut per_channel = Vec::with_capacity(alloc.data_channels.len());
    for ch in &alloc.data_channels {
        let p = leaked_power_at_detector(ch, &alloc.quantum, path)?;
        per_channel.push(ChannelNoise {
            channel: *ch,
            leaked_power_w: p,
            detected_rate_hz: detected_rate(p, ch.wavelength, path.detector)?,
            per_gate_prob: per_gate_probability(p, ch.wavelength, path.detector)?,
        });
    }
    let dark = path.detector.dark_count_prob_per_gate;
    let total = dark + per_channel.iter().map(|c| c.per_gate_prob).sum::<f64>();
    if total >= 1.0 {
        return Err(ModelError::Saturation { total });
    }
    Ok(NoiseBreakdown {
        per_channel,
        dark_per_gate_prob: dark,
        dark_rate_hz: path.detector.dark_rate_hz(),
        total_per_gate_prob: total,
    })
}
