//! Feasibility of the classical data channels.
//!
//! The 112 Gb/s PAM4 links stay below the HD-FEC threshold for every launch
//! power between −10 and −3 dBm across 1530-1560 nm, so feasibility is a
//! membership test on that validated envelope. A measured BER table can be
//! attached to tighten it.

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::leakage::DataChannel;

/// Hard-decision FEC BER threshold.
pub const HD_FEC_BER_LIMIT: f64 = 3.8e-3;

/// One measured operating point: launch power × wavelength → BER.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub launch_dbm: f64,
    pub wavelength_nm: f64,
    pub ber: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalFeasibility {
    pub launch_window_dbm: (f64, f64),
    pub wavelength_window_nm: (f64, f64),
    pub fec_ber_limit: f64,
    /// Optional measured BER points. When present, a channel must also match
    /// a point (same launch power and wavelength) that clears the FEC limit.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ber_table: Vec<BerPoint>,
}

impl Default for ClassicalFeasibility {
    fn default() -> Self {
        ClassicalFeasibility {
            launch_window_dbm: (-10.0, -3.0),
            wavelength_window_nm: (1530.0, 1560.0),
            fec_ber_limit: HD_FEC_BER_LIMIT,
            ber_table: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    pub reason: Option<String>,
}

impl ClassicalFeasibility {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.launch_window_dbm;
        if !(lo < hi) {
            return Err(ModelError::invalid(format!("launch window [{lo}, {hi}] dBm is empty")));
        }
        let (lo, hi) = self.wavelength_window_nm;
        if !(lo < hi) {
            return Err(ModelError::invalid(format!("wavelength window [{lo}, {hi}] nm is empty")));
        }
        if !(self.fec_ber_limit > 0.0 && self.fec_ber_limit < 0.5) {
            return Err(ModelError::invalid(format!("FEC limit {} must lie in (0, 0.5)", self.fec_ber_limit)));
        }
        Ok(())
    }
}

/// Closed-interval membership in both windows (and the BER table, if any).
pub fn channel_feasible(ch: &DataChannel, rules: &ClassicalFeasibility) -> Feasibility {
    let p = ch.launch_power.0;
    let (plo, phi) = rules.launch_window_dbm;
    let nm = ch.wavelength.0;
    let (wlo, whi) = rules.wavelength_window_nm;
    let reason = if p < plo {
        Some(format!("launch power {p} dBm below validated window [{plo}, {phi}] dBm"))
    } else if p > phi {
        Some(format!("launch power {p} dBm above validated window [{plo}, {phi}] dBm"))
    } else if !(wlo..=whi).contains(&nm) {
        Some(format!("wavelength {nm} nm outside validated spectrum [{wlo}, {whi}] nm"))
    } else if !rules.ber_table.is_empty() {
        match rules
            .ber_table
            .iter()
            .find(|b| b.launch_dbm == p && b.wavelength_nm == nm)
        {
            None => Some(format!("no BER measurement for {p} dBm at {nm} nm")),
            Some(b) if b.ber >= rules.fec_ber_limit => Some(format!(
                "measured BER {:.2e} at {p} dBm, {nm} nm is above the FEC limit {:.2e}",
                b.ber, rules.fec_ber_limit
            )),
            Some(_) => None,
        }
    } else {
        None
    };
    Feasibility { feasible: reason.is_none(), reason }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ch(p: f64, nm: f64) -> DataChannel {
        DataChannel::new(1, nm, p).unwrap()
    }

    #[test]
    fn window_examples() {
        let rules = ClassicalFeasibility::default();
        assert!(channel_feasible(&ch(-4.0, 1540.0), &rules).feasible);

        let low = channel_feasible(&ch(-12.0, 1540.0), &rules);
        assert!(!low.feasible);
        assert!(low.reason.unwrap().contains("below validated window"));

        let out = channel_feasible(&ch(-4.0, 1565.0), &rules);
        assert!(!out.feasible);
        assert!(out.reason.unwrap().contains("outside validated spectrum"));
    }

    #[test]
    fn boundaries_are_feasible() {
        let rules = ClassicalFeasibility::default();
        for (p, nm) in [(-10.0, 1530.0), (-3.0, 1560.0), (-10.0, 1560.0), (-3.0, 1530.0)] {
            assert!(channel_feasible(&ch(p, nm), &rules).feasible, "{p} dBm {nm} nm");
        }
        assert!(!channel_feasible(&ch(-2.99, 1545.0), &rules).feasible);
    }

    #[test]
    fn ber_table_hook() {
        let rules = ClassicalFeasibility {
            ber_table: vec![
                BerPoint { launch_dbm: -4.0, wavelength_nm: 1540.0, ber: 1e-5 },
                BerPoint { launch_dbm: -10.0, wavelength_nm: 1540.0, ber: 5e-3 },
            ],
            ..Default::default()
        };
        assert!(channel_feasible(&ch(-4.0, 1540.0), &rules).feasible);
        assert!(!channel_feasible(&ch(-10.0, 1540.0), &rules).feasible);
        assert!(!channel_feasible(&ch(-5.0, 1540.0), &rules).feasible);
    }

    #[test]
    fn empty_windows_are_invalid() {
        let rules = ClassicalFeasibility { launch_window_dbm: (-3.0, -10.0), ..Default::default() };
        assert!(rules.validate().is_err());
        ClassicalFeasibility::default().validate().unwrap();
    }
}
