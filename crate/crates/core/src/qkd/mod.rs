//! Decoy-state BB84 secret key rate with the infinite-decoy model.
//!
//! Background (dark counts plus leakage) enters only through the vacuum
//! yield `Y0`. With a Poisson source of mean photon number `mu` and overall
//! transmittance `eta`:
//!
//! ```text
//! Q_mu = 1 − (1 − Y0)·exp(−eta·mu)
//! E_mu = (e0·Y0 + e_d·(1 − exp(−eta·mu))) / Q_mu
//! Y1   = 1 − (1 − Y0)(1 − eta)
//! e1   = (e0·Y0 + e_d·eta) / Y1
//! Q1   = Y1 · mu · exp(−mu)
//! R   >= q · (Q1·(1 − H2(e1)) − Q_mu·f·H2(E_mu))
//! ```
//!
//! Yields compose exactly, `Y_n = 1 − (1 − Y0)(1 − eta)^n`, so `Q_mu` and
//! `Y1` are the Poisson averages of those yields rather than the `Y0 + eta`
//! approximations.

mod sweep;

pub use sweep::{
    sweep_distance, sweep_wavelength, LinkEvaluation, LinkModel, MuPolicy, PointStatus, SweepPoint,
};

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::fiber::{fiber_loss, FiberSpec};
use crate::leakage::DetectorSpec;
use crate::units::{combine_losses, LossDb};

/// Error rate of vacuum and background clicks.
pub const ERROR_VACUUM: f64 = 0.5;

/// Absolute tolerance on mu for [`optimize_mu`].
pub const MU_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QkdLinkParams {
    pub mu: f64,
    pub detector: DetectorSpec,
    /// Optical misalignment error `e_d`.
    pub misalignment_error: f64,
    /// Error-correction inefficiency `f(E)`.
    pub fec_inefficiency: f64,
    /// Sifting factor `q`.
    pub sift_factor: f64,
}

impl QkdLinkParams {
    pub const DEFAULT_MU: f64 = 0.5;
    pub const DEFAULT_MISALIGNMENT: f64 = 0.01;
    pub const DEFAULT_FEC_INEFFICIENCY: f64 = 1.22;
    pub const DEFAULT_SIFT_FACTOR: f64 = 1.0;

    pub fn new(detector: DetectorSpec) -> Self {
        QkdLinkParams {
            mu: Self::DEFAULT_MU,
            detector,
            misalignment_error: Self::DEFAULT_MISALIGNMENT,
            fec_inefficiency: Self::DEFAULT_FEC_INEFFICIENCY,
            sift_factor: Self::DEFAULT_SIFT_FACTOR,
        }
    }

    pub fn with_mu(&self, mu: f64) -> Self {
        QkdLinkParams { mu, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        self.detector.validate()?;
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(ModelError::invalid(format!("mean photon number {} must be > 0", self.mu)));
        }
        if !(0.0..0.5).contains(&self.misalignment_error) {
            return Err(ModelError::invalid(format!(
                "misalignment error {} must lie in [0, 0.5)",
                self.misalignment_error
            )));
        }
        if !(self.fec_inefficiency >= 1.0 && self.fec_inefficiency.is_finite()) {
            return Err(ModelError::invalid(format!(
                "error-correction inefficiency {} must be >= 1",
                self.fec_inefficiency
            )));
        }
        if !(self.sift_factor > 0.0 && self.sift_factor <= 1.0) {
            return Err(ModelError::invalid(format!(
                "sift factor {} must lie in (0, 1]",
                self.sift_factor
            )));
        }
        Ok(())
    }
}

/// Gains and error rates for one (mu, eta, Y0) operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Gains {
    pub q_mu: f64,
    pub e_mu: f64,
    pub y1: f64,
    pub e1: f64,
    pub q1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KeyRateResult {
    pub mu: f64,
    pub eta_total: f64,
    pub y0: f64,
    pub q_mu: f64,
    pub e_mu: f64,
    pub y1: f64,
    pub e1: f64,
    pub q1: f64,
    /// Unclamped bound; negative means no key.
    pub r_raw: f64,
    pub r_per_gate: f64,
    pub r_bps: f64,
}

impl KeyRateResult {
    pub fn has_key(&self) -> bool {
        self.r_per_gate > 0.0
    }
}

/// Binary Shannon entropy in bits, with H2(0) = H2(1) = 0.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(ModelError::invalid(format!("entropy argument {x} outside [0, 1]")));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(-x * x.log2() - (1.0 - x) * (1.0 - x).log2())
}

/// Detector efficiency times the fiber and extra insertion losses.
pub fn channel_transmittance(
    fiber: &FiberSpec,
    length_km: f64,
    det: &DetectorSpec,
    extra_loss_db: LossDb,
) -> Result<f64> {
    let loss = combine_losses(&[fiber_loss(fiber, length_km)?, extra_loss_db])?;
    Ok(det.efficiency * loss.transmission())
}

fn check_operating_point(params: &QkdLinkParams, eta: f64, y0: f64) -> Result<()> {
    params.validate()?;
    if !(0.0..=1.0).contains(&eta) {
        return Err(ModelError::invalid(format!("transmittance {eta} outside [0, 1]")));
    }
    if !(0.0..1.0).contains(&y0) {
        return Err(ModelError::invalid(format!("background yield {y0} outside [0, 1)")));
    }
    Ok(())
}

pub fn gains_and_qber(params: &QkdLinkParams, eta: f64, y0: f64) -> Result<Gains> {
    check_operating_point(params, eta, y0)?;
    let mu = params.mu;
    let e_d = params.misalignment_error;
    // 1 − exp(−x) without cancellation for small eta·mu
    let signal = -(-eta * mu).exp_m1();
    let q_mu = y0 + (1.0 - y0) * signal;
    if q_mu <= 0.0 {
        return Err(ModelError::DegenerateChannel);
    }
    let e_mu = (ERROR_VACUUM * y0 + e_d * signal) / q_mu;
    let y1 = 1.0 - (1.0 - y0) * (1.0 - eta);
    let e1 = if y1 > 0.0 { (ERROR_VACUUM * y0 + e_d * eta) / y1 } else { ERROR_VACUUM };
    let q1 = y1 * mu * (-mu).exp();
    Ok(Gains { q_mu, e_mu, y1, e1, q1 })
}

pub fn key_rate(params: &QkdLinkParams, eta: f64, y0: f64) -> Result<KeyRateResult> {
    let g = gains_and_qber(params, eta, y0)?;
    let r_raw = params.sift_factor
        * (g.q1 * (1.0 - binary_entropy(g.e1.min(1.0))?)
            - g.q_mu * params.fec_inefficiency * binary_entropy(g.e_mu.min(1.0))?);
    let r_per_gate = r_raw.max(0.0);
    Ok(KeyRateResult {
        mu: params.mu,
        eta_total: eta,
        y0,
        q_mu: g.q_mu,
        e_mu: g.e_mu,
        y1: g.y1,
        e1: g.e1,
        q1: g.q1,
        r_raw,
        r_per_gate,
        r_bps: r_per_gate * params.detector.repetition_rate_hz,
    })
}

/// Golden-section search for the mu in `[lo, hi]` that maximises the
/// (unclamped) key rate, to [`MU_TOLERANCE`] absolute. `params.mu` is ignored.
///
/// Returns [`ModelError::NoKey`] when the best point found still has no key.
pub fn optimize_mu(params: &QkdLinkParams, eta: f64, y0: f64, lo: f64, hi: f64) -> Result<f64> {
    if !(lo > 0.0 && hi <= 2.0 && lo < hi) {
        return Err(ModelError::invalid(format!("mu search interval [{lo}, {hi}] must lie in (0, 2]")));
    }
    let rate = |mu: f64| key_rate(&params.with_mu(mu), eta, y0).map(|r| r.r_raw);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = rate(c)?;
    let mut fd = rate(d)?;
    while b - a > MU_TOLERANCE {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = rate(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = rate(d)?;
        }
    }
    let best = 0.5 * (a + b);
    if rate(best)? <= 0.0 {
        return Err(ModelError::NoKey { lo, hi });
    }
    Ok(best)
}
