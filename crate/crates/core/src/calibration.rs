//! Calibration of the parameters the measurements leave open, and the
//! reference channel layouts the calibration is anchored on.
//!
//! Free parameters: receiver insertion loss on the quantum signal
//! (`extra_loss_db`), the mean photon number, the insertion loss on the
//! leakage path (`extra_path_loss_db`) and the filter rejection at 2 nm offset
//! (`knee_rejection_db`). The misalignment error is held at its default: the
//! single key-rate anchor cannot separate it from the insertion loss.
//!
//! Procedure, all at the anchor length with six side cores carrying one far
//! wavelength at the anchor launch power:
//!
//! 1. bisect `extra_loss_db` until the trench-assisted link, at its optimal
//!    mu, delivers the anchor key rate; fix mu at that optimum;
//! 2. bisect the smallest `extra_path_loss_db` for which the non-trench key
//!    rate is within `max_nt_ta_gap` of the trench-assisted one;
//! 3. repeat 1-2 until both losses settle;
//! 4. with the six side cores moved to the near wavelength (2 nm from the
//!    quantum channel), solve for the knee rejection that puts the non-trench
//!    key-rate zero crossing at `collapse_length_km`.
//!
//! The committed result lives in `calibration/mcf-2018.toml`.

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::fiber::FiberSpec;
use crate::leakage::{channel_contribution, ChannelAllocation, DetectorSpec, FilterSpec, QuantumSlot};
use crate::planner::noise_budget;
use crate::qkd::{optimize_mu, LinkModel, MuPolicy, QkdLinkParams};
use crate::units::LossDb;

/// Eight data wavelengths across 1530-1560 nm, one of them 2 nm above the
/// quantum channel.
pub const WAVELENGTH_GRID_NM: [f64; 8] = [1530.0, 1534.0, 1538.0, 1542.0, 1546.0, 1552.0, 1556.0, 1560.0];
pub const NEAR_WAVELENGTH_NM: f64 = 1552.0;
pub const FAR_WAVELENGTH_NM: f64 = 1530.0;

pub const MCF_2018_TOML: &str = include_str!("../calibration/mcf-2018.toml");

const MU_SEARCH: (f64, f64) = (0.01, 2.0);
const LOSS_SEARCH_MAX_DB: f64 = 60.0;
const LOSS_TOL_DB: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationAnchors {
    pub length_km: f64,
    pub launch_dbm: f64,
    pub target_key_rate_bps: f64,
    /// Largest relative key-rate shortfall of NT against TA counted as negligible.
    pub max_nt_ta_gap: f64,
    pub collapse_length_km: f64,
    pub misalignment_error: f64,
}

impl Default for CalibrationAnchors {
    fn default() -> Self {
        CalibrationAnchors {
            length_km: 2.5,
            launch_dbm: -4.0,
            target_key_rate_bps: 4400.0,
            max_nt_ta_gap: 0.01,
            collapse_length_km: 4.0,
            misalignment_error: QkdLinkParams::DEFAULT_MISALIGNMENT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    pub extra_loss_db: f64,
    pub extra_path_loss_db: f64,
    pub mu: f64,
    pub misalignment_error: f64,
    pub knee_rejection_db: f64,
    pub anchors: CalibrationAnchors,
}

impl Calibration {
    /// The committed calibration.
    pub fn mcf_2018() -> Self {
        toml::from_str(MCF_2018_TOML).expect("committed calibration file parses")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("calibration serialises")
    }

    /// Overwrite the calibrated fields of `model`.
    pub fn apply(&self, model: &mut LinkModel) {
        model.extra_loss_db = LossDb(self.extra_loss_db);
        model.extra_path_loss_db = LossDb(self.extra_path_loss_db);
        model.qkd.mu = self.mu;
        model.qkd.misalignment_error = self.misalignment_error;
        model.mu_policy = MuPolicy::Fixed;
        model.filter.set_knee_db(self.knee_rejection_db);
    }
}

/// Six side cores (around a center-core quantum channel) at each wavelength.
pub fn side_cores(wavelengths_nm: &[f64], launch_dbm: f64) -> ChannelAllocation {
    ChannelAllocation::side_cores(QuantumSlot::default(), wavelengths_nm, launch_dbm)
        .expect("reference layout is valid")
}

/// All seven cores at each wavelength, minus the quantum slot.
pub fn all_cores(wavelengths_nm: &[f64], launch_dbm: f64) -> ChannelAllocation {
    ChannelAllocation::all_cores(QuantumSlot::default(), wavelengths_nm, launch_dbm)
        .expect("reference layout is valid")
}

/// Uncalibrated link with the measured fiber/detector parameters and the
/// given allocation.
pub fn reference_model(fiber: FiberSpec, allocation: ChannelAllocation) -> LinkModel {
    LinkModel {
        fiber,
        filter: FilterSpec::with_knee(1550.0, FilterSpec::DEFAULT_KNEE_DB),
        qkd: QkdLinkParams::new(DetectorSpec::id210()),
        allocation,
        extra_loss_db: LossDb::ZERO,
        extra_path_loss_db: LossDb::ZERO,
        mu_policy: MuPolicy::Fixed,
    }
}

/// Smallest `x` in `[lo, hi]` with `pred(x)` true, for `pred` monotone
/// false→true.
fn bisect_threshold(mut lo: f64, mut hi: f64, pred: impl Fn(f64) -> Result<bool>) -> Result<f64> {
    if pred(lo)? {
        return Ok(lo);
    }
    if !pred(hi)? {
        return Err(ModelError::invalid(format!("calibration target not reachable within [{lo}, {hi}]")));
    }
    while hi - lo > LOSS_TOL_DB {
        let mid = 0.5 * (lo + hi);
        if pred(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

pub fn calibrate(anchors: &CalibrationAnchors) -> Result<Calibration> {
    let far = side_cores(&[FAR_WAVELENGTH_NM], anchors.launch_dbm);
    let mut ta = reference_model(FiberSpec::ta_mcf_2018(), far.clone());
    let mut nt = reference_model(FiberSpec::nt_mcf_2018(), far);
    for m in [&mut ta, &mut nt] {
        m.qkd.misalignment_error = anchors.misalignment_error;
    }
    let len = anchors.length_km;

    let mut extra_loss = 0.0;
    let mut path_loss = 0.0;
    let mut mu = QkdLinkParams::DEFAULT_MU;
    for _ in 0..100 {
        // 1. insertion loss for the anchor rate at optimal mu
        ta.extra_path_loss_db = LossDb(path_loss);
        let optimal_rate = |m: &LinkModel| -> Result<f64> {
            let noise = m.noise(len)?;
            let eta = m.transmittance(len)?;
            let mu = match optimize_mu(&m.qkd, eta, noise.total_per_gate_prob, MU_SEARCH.0, MU_SEARCH.1) {
                Ok(mu) => mu,
                Err(ModelError::NoKey { .. }) => return Ok(0.0),
                Err(e) => return Err(e),
            };
            let k = crate::qkd::key_rate(&m.qkd.with_mu(mu), eta, noise.total_per_gate_prob)?;
            Ok(k.r_bps)
        };
        let new_extra = bisect_threshold(0.0, LOSS_SEARCH_MAX_DB, |x| {
            let mut m = ta.clone();
            m.extra_loss_db = LossDb(x);
            Ok(optimal_rate(&m)? <= anchors.target_key_rate_bps)
        })?;
        ta.extra_loss_db = LossDb(new_extra);
        let eta = ta.transmittance(len)?;
        mu = optimize_mu(&ta.qkd, eta, ta.noise(len)?.total_per_gate_prob, MU_SEARCH.0, MU_SEARCH.1)?;
        ta.qkd.mu = mu;

        // 2. leakage-path loss for a negligible NT/TA gap
        nt.extra_loss_db = LossDb(new_extra);
        nt.qkd.mu = mu;
        let new_path = bisect_threshold(0.0, LOSS_SEARCH_MAX_DB, |x| {
            let mut n = nt.clone();
            n.extra_path_loss_db = LossDb(x);
            let mut t = ta.clone();
            t.extra_path_loss_db = LossDb(x);
            let rn = n.evaluate(len)?.key.r_bps;
            let rt = t.evaluate(len)?.key.r_bps;
            Ok(rn >= (1.0 - anchors.max_nt_ta_gap) * rt)
        })?;
        let settled = (new_extra - extra_loss).abs() < 1e-7 && (new_path - path_loss).abs() < 1e-7;
        extra_loss = new_extra;
        path_loss = new_path;
        if settled {
            break;
        }
    }

    // 4. knee rejection from the near-wavelength zero crossing
    let mut near = reference_model(
        FiberSpec::nt_mcf_2018(),
        side_cores(&[NEAR_WAVELENGTH_NM], anchors.launch_dbm),
    );
    near.qkd.mu = mu;
    near.qkd.misalignment_error = anchors.misalignment_error;
    near.extra_loss_db = LossDb(extra_loss);
    near.extra_path_loss_db = LossDb(path_loss);
    near.filter.set_knee_db(0.0);
    let lc = anchors.collapse_length_km;
    let budget = noise_budget(&near.qkd, near.transmittance(lc)?, 0.0)?;
    // leakage with no knee rejection; the zero-knee total is far above 1, so
    // sum the linear contributions directly rather than via noise_breakdown
    let path = near.leakage_path(lc);
    let leak0 = near
        .allocation
        .data_channels
        .iter()
        .map(|ch| channel_contribution(ch, &near.allocation.quantum, &path))
        .sum::<Result<f64>>()?;
    let allowed_leak = budget - near.qkd.detector.dark_count_prob_per_gate;
    let knee = 10.0 * (leak0 / allowed_leak).log10();
    if !(0.0..=FilterSpec::PLATEAU_DB).contains(&knee) {
        return Err(ModelError::invalid(format!(
            "calibrated knee rejection {knee} dB falls outside [0, {}] dB",
            FilterSpec::PLATEAU_DB
        )));
    }

    Ok(Calibration {
        extra_loss_db: extra_loss,
        extra_path_loss_db: path_loss,
        mu,
        misalignment_error: anchors.misalignment_error,
        knee_rejection_db: knee,
        anchors: anchors.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_layouts() {
        assert_eq!(side_cores(&[1530.0], -4.0).data_channels.len(), 6);
        assert_eq!(all_cores(&WAVELENGTH_GRID_NM, -4.0).data_channels.len(), 56);
    }

    #[test]
    fn bisect_finds_threshold() {
        let x = bisect_threshold(0.0, 10.0, |x| Ok(x >= 3.25)).unwrap();
        assert!((x - 3.25).abs() <= LOSS_TOL_DB);
        assert!(bisect_threshold(0.0, 1.0, |x| Ok(x > 5.0)).is_err());
    }
}
