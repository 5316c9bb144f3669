//! End-to-end link evaluation and the distance / wavelength sweeps.

use serde::{Deserialize, Serialize};

use super::{channel_transmittance, key_rate, optimize_mu, KeyRateResult, QkdLinkParams};
use crate::error::{ModelError, Result};
use crate::fiber::{CoreId, FiberSpec};
use crate::leakage::{noise_breakdown, ChannelAllocation, DataChannel, FilterSpec, LeakagePath, NoiseBreakdown};
use crate::units::{LossDb, PowerDbm, Wavelength};

/// How the mean photon number is chosen at each operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum MuPolicy {
    /// Use `QkdLinkParams::mu` everywhere.
    Fixed,
    /// Golden-section optimum in `[lo, hi]`, re-run at every point.
    Optimize { lo: f64, hi: f64 },
}

/// Everything needed to turn a fiber length into a key rate.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkModel {
    pub fiber: FiberSpec,
    pub filter: FilterSpec,
    pub qkd: QkdLinkParams,
    pub allocation: ChannelAllocation,
    /// Insertion loss seen by the quantum signal on top of fiber attenuation.
    pub extra_loss_db: LossDb,
    /// Insertion loss on the leakage path.
    pub extra_path_loss_db: LossDb,
    pub mu_policy: MuPolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkEvaluation {
    pub length_km: f64,
    pub noise: NoiseBreakdown,
    pub key: KeyRateResult,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PointStatus {
    Ok(LinkEvaluation),
    /// Optimised mu found no positive key; the evaluation is at the configured mu.
    NoKey(LinkEvaluation),
    Failed(ModelError),
}

impl PointStatus {
    pub fn evaluation(&self) -> Option<&LinkEvaluation> {
        match self {
            PointStatus::Ok(e) | PointStatus::NoKey(e) => Some(e),
            PointStatus::Failed(_) => None,
        }
    }

    /// Clamped key rate in bits/s; zero for failed points.
    pub fn r_bps(&self) -> f64 {
        self.evaluation().map_or(0.0, |e| e.key.r_bps)
    }

    pub fn label(&self) -> String {
        match self {
            PointStatus::Ok(e) if e.key.has_key() => "ok".into(),
            PointStatus::Ok(_) | PointStatus::NoKey(_) => "no_key".into(),
            PointStatus::Failed(ModelError::Saturation { .. }) => "saturated".into(),
            PointStatus::Failed(e) => format!("error: {e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub length_km: f64,
    /// Wavelength assigned to the data channels (wavelength sweeps only).
    pub data_wavelength_nm: Option<f64>,
    pub status: PointStatus,
}

impl LinkModel {
    pub fn validate(&self) -> Result<()> {
        self.fiber.validate()?;
        self.filter.validate()?;
        self.qkd.validate()?;
        self.allocation.validate_for(&self.fiber)?;
        LossDb::new(self.extra_loss_db.0)?;
        LossDb::new(self.extra_path_loss_db.0)?;
        if let MuPolicy::Optimize { lo, hi } = self.mu_policy {
            if !(lo > 0.0 && hi <= 2.0 && lo < hi) {
                return Err(ModelError::invalid(format!("mu search interval [{lo}, {hi}] must lie in (0, 2]")));
            }
        }
        Ok(())
    }

    pub fn leakage_path(&self, length_km: f64) -> LeakagePath<'_> {
        LeakagePath {
            fiber: &self.fiber,
            filter: &self.filter,
            detector: &self.qkd.detector,
            length_km,
            extra_path_loss: self.extra_path_loss_db,
        }
    }

    /// Transmittance of the quantum signal, including the receive filter's
    /// insertion loss.
    pub fn transmittance(&self, length_km: f64) -> Result<f64> {
        let extra = LossDb::new(self.extra_loss_db.0 + self.filter.insertion_loss_db.0)?;
        channel_transmittance(&self.fiber, length_km, &self.qkd.detector, extra)
    }

    pub fn noise(&self, length_km: f64) -> Result<NoiseBreakdown> {
        noise_breakdown(&self.allocation, &self.leakage_path(length_km))
    }

    /// Noise, transmittance and key rate at `length_km`. With an optimising
    /// mu policy and no key anywhere, returns `NoKey` evaluated at the
    /// configured mu.
    pub fn evaluate(&self, length_km: f64) -> Result<LinkEvaluation> {
        match self.evaluate_point(length_km) {
            PointStatus::Ok(e) | PointStatus::NoKey(e) => Ok(e),
            PointStatus::Failed(e) => Err(e),
        }
    }

    pub fn evaluate_point(&self, length_km: f64) -> PointStatus {
        let run = || -> Result<PointStatus> {
            let noise = self.noise(length_km)?;
            let eta = self.transmittance(length_km)?;
            let y0 = noise.total_per_gate_prob;
            let params = match self.mu_policy {
                MuPolicy::Fixed => self.qkd.clone(),
                MuPolicy::Optimize { lo, hi } => match optimize_mu(&self.qkd, eta, y0, lo, hi) {
                    Ok(mu) => self.qkd.with_mu(mu),
                    Err(ModelError::NoKey { .. }) => {
                        let key = key_rate(&self.qkd, eta, y0)?;
                        return Ok(PointStatus::NoKey(LinkEvaluation { length_km, noise, key }));
                    }
                    Err(e) => return Err(e),
                },
            };
            let key = key_rate(&params, eta, y0)?;
            Ok(PointStatus::Ok(LinkEvaluation { length_km, noise, key }))
        };
        run().unwrap_or_else(PointStatus::Failed)
    }

    pub fn with_allocation(&self, allocation: ChannelAllocation) -> Self {
        LinkModel { allocation, ..self.clone() }
    }

    /// The allocation with every data channel moved to `lambda`, keeping each
    /// core's launch power. Slots that would land on the quantum channel are
    /// dropped.
    pub fn reassigned_to(&self, lambda: Wavelength) -> Result<ChannelAllocation> {
        let mut pattern: Vec<(CoreId, PowerDbm)> = Vec::new();
        for ch in &self.allocation.data_channels {
            if !pattern.iter().any(|(c, _)| *c == ch.core) {
                pattern.push((ch.core, ch.launch_power));
            }
        }
        let q = self.allocation.quantum;
        let data = pattern
            .into_iter()
            .map(|(core, launch_power)| DataChannel { core, wavelength: lambda, launch_power })
            .filter(|ch| !ch.occupies(&q))
            .collect();
        ChannelAllocation::new(q, data)
    }
}

fn check_axis(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(ModelError::invalid(format!("{what} list is empty")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::invalid(format!("{what} list has non-finite entries")));
    }
    if values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ModelError::invalid(format!("{what} list must be strictly ascending")));
    }
    Ok(())
}

/// Key rate along the fiber: at each length the fiber loss, the crosstalk
/// isolation and therefore the leakage are recomputed before the key rate.
/// Points without key carry R = 0; model failures are kept per point.
pub fn sweep_distance(model: &LinkModel, lengths_km: &[f64]) -> Result<Vec<SweepPoint>> {
    model.validate()?;
    check_axis(lengths_km, "distance")?;
    if lengths_km[0] <= 0.0 {
        return Err(ModelError::invalid("distances must be positive"));
    }
    Ok(lengths_km
        .iter()
        .map(|&length_km| SweepPoint {
            length_km,
            data_wavelength_nm: None,
            status: model.evaluate_point(length_km),
        })
        .collect())
}

/// Key rate at `length_km` as every data channel is moved to each wavelength
/// in turn.
pub fn sweep_wavelength(model: &LinkModel, wavelengths_nm: &[f64], length_km: f64) -> Result<Vec<SweepPoint>> {
    model.validate()?;
    check_axis(wavelengths_nm, "wavelength")?;
    let mut out = Vec::with_capacity(wavelengths_nm.len());
    for &nm in wavelengths_nm {
        let lambda = Wavelength::new(nm)?;
        let status = match model.reassigned_to(lambda) {
            Ok(alloc) => model.with_allocation(alloc).evaluate_point(length_km),
            Err(e) => PointStatus::Failed(e),
        };
        out.push(SweepPoint { length_km, data_wavelength_nm: Some(nm), status });
    }
    Ok(out)
}
