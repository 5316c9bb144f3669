//! Power, loss and wavelength quantities plus the physical constants the
//! models share.
//!
//! Configuration and reports speak dB/dBm; everything internal runs on linear
//! watts so that sweeps do not accumulate log/exp round-off.

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

/// Planck constant, J·s (exact SI value).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light in vacuum, m/s (exact SI value).
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

/// Lower edge of the supported band, nm.
pub const MIN_WAVELENGTH_NM: f64 = 1500.0;
/// Upper edge of the supported band (C+L), nm.
pub const MAX_WAVELENGTH_NM: f64 = 1620.0;

/// Optical power in dBm.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PowerDbm(pub f64);

/// Attenuation, isolation or rejection in dB. Non-negative wherever it is used
/// as a loss.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LossDb(pub f64);

/// Vacuum wavelength in nm.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Wavelength(pub f64);

impl PowerDbm {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(ModelError::invalid(format!("power {value} dBm is not finite")));
        }
        Ok(PowerDbm(value))
    }

    pub fn dbm(self) -> f64 {
        self.0
    }

    pub fn to_watts(self) -> Result<f64> {
        dbm_to_watts(self)
    }
}

impl LossDb {
    pub const ZERO: LossDb = LossDb(0.0);

    /// A loss that must be a finite, non-negative attenuation.
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(ModelError::invalid(format!(
                "loss {value} dB must be finite and non-negative"
            )));
        }
        Ok(LossDb(value))
    }

    pub fn db(self) -> f64 {
        self.0
    }

    /// Linear power transmission factor 10^(-dB/10).
    pub fn transmission(self) -> f64 {
        10f64.powf(-self.0 / 10.0)
    }
}

impl Wavelength {
    pub fn new(nm: f64) -> Result<Self> {
        let w = Wavelength(nm);
        w.validate()?;
        Ok(w)
    }

    pub fn nm(self) -> f64 {
        self.0
    }

    pub fn validate(self) -> Result<()> {
        if !self.0.is_finite() || !(MIN_WAVELENGTH_NM..=MAX_WAVELENGTH_NM).contains(&self.0) {
            return Err(ModelError::invalid(format!(
                "wavelength {} nm outside supported band [{MIN_WAVELENGTH_NM}, {MAX_WAVELENGTH_NM}] nm",
                self.0
            )));
        }
        Ok(())
    }

    /// Photon energy h·c/λ in joules.
    pub fn photon_energy_j(self) -> f64 {
        PLANCK * SPEED_OF_LIGHT / (self.0 * 1e-9)
    }
}

/// 10^((p − 30)/10) W.
pub fn dbm_to_watts(p: PowerDbm) -> Result<f64> {
    if !p.0.is_finite() {
        return Err(ModelError::invalid(format!("power {} dBm is not finite", p.0)));
    }
    Ok(10f64.powf((p.0 - 30.0) / 10.0))
}

/// Inverse of [`dbm_to_watts`]. Zero watts maps to −∞ dBm.
pub fn watts_to_dbm(watts: f64) -> Result<PowerDbm> {
    if !watts.is_finite() || watts < 0.0 {
        return Err(ModelError::invalid(format!("power {watts} W must be finite and >= 0")));
    }
    Ok(PowerDbm(10.0 * watts.log10() + 30.0))
}

/// Photons per second carried by `watts` of light at `lambda`.
pub fn photon_flux(watts: f64, lambda: Wavelength) -> Result<f64> {
    lambda.validate()?;
    if !watts.is_finite() || watts < 0.0 {
        return Err(ModelError::invalid(format!("power {watts} W must be finite and >= 0")));
    }
    Ok(watts / lambda.photon_energy_j())
}

/// Cascade of attenuations: the dB values add.
pub fn combine_losses(losses: &[LossDb]) -> Result<LossDb> {
    let mut total = 0.0;
    for l in losses {
        if !l.0.is_finite() || l.0 < 0.0 {
            return Err(ModelError::invalid(format!("loss {} dB in cascade is negative", l.0)));
        }
        total += l.0;
    }
    Ok(LossDb(total))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn dbm_examples() {
        assert_eq!(dbm_to_watts(PowerDbm(0.0)).unwrap(), 1.0e-3);
        assert!(rel(dbm_to_watts(PowerDbm(-30.0)).unwrap(), 1.0e-6) < 1e-15);
        // 10^(-13.45) = 3.5481338923357...e-14
        assert!(rel(dbm_to_watts(PowerDbm(-104.5)).unwrap(), 3.548_133_892_335_8e-14) < 1e-12);
    }

    #[test]
    fn dbm_rejects_non_finite() {
        assert!(dbm_to_watts(PowerDbm(f64::NAN)).is_err());
        assert!(dbm_to_watts(PowerDbm(f64::INFINITY)).is_err());
        assert!(PowerDbm::new(f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn photon_flux_examples() {
        let l = Wavelength(1550.0);
        assert_eq!(photon_flux(0.0, l).unwrap(), 0.0);
        // 1e-3 * 1550e-9 / (6.62607015e-34 * 2.99792458e8)
        assert!(rel(photon_flux(1.0e-3, l).unwrap(), 7.802_880_679_691_2e15) < 1e-12);
        assert!(rel(photon_flux(3.548e-14, l).unwrap(), 2.768e5) < 1e-3);
    }

    #[test]
    fn photon_flux_rejects_bad_wavelength() {
        assert!(photon_flux(1e-3, Wavelength(850.0)).is_err());
        assert!(photon_flux(1e-3, Wavelength(f64::NAN)).is_err());
        assert!(photon_flux(-1.0, Wavelength(1550.0)).is_err());
    }

    #[test]
    fn combine_losses_examples() {
        assert_eq!(combine_losses(&[]).unwrap(), LossDb(0.0));
        assert_eq!(combine_losses(&[LossDb(45.0), LossDb(55.0)]).unwrap(), LossDb(100.0));
        assert_eq!(
            combine_losses(&[LossDb(0.5), LossDb(45.0), LossDb(55.0)]).unwrap(),
            LossDb(100.5)
        );
        assert!(combine_losses(&[LossDb(1.0), LossDb(-0.1)]).is_err());
    }

    #[test]
    fn zero_watts_is_minus_infinity_dbm() {
        assert_eq!(watts_to_dbm(0.0).unwrap().0, f64::NEG_INFINITY);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn dbm_round_trip(p in -150.0f64..30.0) {
                let w = dbm_to_watts(PowerDbm(p)).unwrap();
                prop_assert!(w > 0.0);
                let back = watts_to_dbm(w).unwrap().0;
                let w2 = dbm_to_watts(PowerDbm(back)).unwrap();
                prop_assert!(((w2 - w) / w).abs() < 1e-12);
                prop_assert!((back - p).abs() <= 1e-12 * p.abs().max(1.0));
            }

            #[test]
            fn flux_is_linear(p in 1e-20f64..1e-2, a in 1e-3f64..1e3, l in 1500.0f64..1620.0) {
                let lam = Wavelength(l);
                let f1 = photon_flux(a * p, lam).unwrap();
                let f2 = a * photon_flux(p, lam).unwrap();
                prop_assert!(((f1 - f2) / f2).abs() < 1e-12);
            }

            #[test]
            fn combine_is_permutation_invariant(v in proptest::collection::vec(0.0f64..100.0, 0..8)) {
                let fwd: Vec<LossDb> = v.iter().copied().map(LossDb).collect();
                let mut rev = fwd.clone();
                rev.reverse();
                let a = combine_losses(&fwd).unwrap().0;
                let b = combine_losses(&rev).unwrap().0;
                prop_assert!((a - b).abs() <= 1e-9);
                // associativity: combining a split cascade equals combining the whole
                let mid = fwd.len() / 2;
                let left = combine_losses(&fwd[..mid]).unwrap();
                let right = combine_losses(&fwd[mid..]).unwrap();
                let c = combine_losses(&[left, right]).unwrap().0;
                prop_assert!((a - c).abs() <= 1e-9);
            }
        }
    }
}
