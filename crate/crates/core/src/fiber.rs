//! Seven-core fiber description: hexagonal core layout, attenuation and
//! inter-core crosstalk, with crosstalk rescaled for the fiber length.
//!
//! Crosstalk power grows linearly with length (weakly coupled, homogeneous
//! cores), so the isolation at length `L` is
//! `xt_adjacent_db − 10·log10(L / xt_reference_length_km)`. Only nearest
//! neighbours couple unless an explicit isolation matrix is supplied.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::units::LossDb;

pub const NUM_CORES: usize = 7;

/// Core index: 0 is the center core, 1..=6 walk the hexagonal ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct CoreId(u8);

impl CoreId {
    pub const CENTER: CoreId = CoreId(0);

    pub fn new(index: u8) -> Result<Self> {
        if (index as usize) < NUM_CORES {
            Ok(CoreId(index))
        } else {
            Err(ModelError::invalid(format!(
                "core index {index} out of range 0..={}",
                NUM_CORES - 1
            )))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_center(self) -> bool {
        self.0 == 0
    }

    pub fn all() -> impl Iterator<Item = CoreId> {
        (0..NUM_CORES as u8).map(CoreId)
    }

    pub fn side_cores() -> impl Iterator<Item = CoreId> {
        (1..NUM_CORES as u8).map(CoreId)
    }
}

impl TryFrom<u8> for CoreId {
    type Error = ModelError;
    fn try_from(v: u8) -> Result<Self> {
        CoreId::new(v)
    }
}

impl From<CoreId> for u8 {
    fn from(c: CoreId) -> u8 {
        c.0
    }
}

impl fmt::Display for CoreId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Nearest-neighbour test on the hexagonal layout.
pub fn adjacency(a: CoreId, b: CoreId) -> Result<bool> {
    if a == b {
        return Err(ModelError::invalid(format!("adjacency of core {a} with itself")));
    }
    if a.is_center() || b.is_center() {
        return Ok(true);
    }
    // ring positions 1..=6 -> 0..=5
    let (x, y) = (a.0 - 1, b.0 - 1);
    let d = (x + 6 - y) % 6;
    Ok(d == 1 || d == 5)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FiberVariant {
    TrenchAssisted,
    NonTrench,
    /// Standard single-mode fiber baseline: one core, no crosstalk.
    SingleMode,
}

/// Explicit core-to-core isolation at the reference length, `[src][dst]` in dB.
/// `inf` means no coupling path; the diagonal is ignored.
pub type IsolationMatrix = [[f64; NUM_CORES]; NUM_CORES];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberSpec {
    pub variant: FiberVariant,
    pub length_km: f64,
    pub attenuation_db_per_km: f64,
    /// Isolation between adjacent cores at `xt_reference_length_km`, as a
    /// positive dB figure (a measured −45 dB crosstalk is stored as 45).
    pub xt_adjacent_db: f64,
    pub xt_reference_length_km: f64,
    /// Metadata only.
    pub chromatic_dispersion_ps_nm_km: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isolation_override: Option<IsolationMatrix>,
}

impl FiberSpec {
    /// 7-core non-trench fiber: about −45 dB crosstalk measured over 2.5 km.
    /// Core/cladding refractive indices 1.4639/1.4591, pitch 41.1 μm,
    /// cladding 150 μm (recorded here only).
    pub fn nt_mcf_2018() -> Self {
        FiberSpec {
            variant: FiberVariant::NonTrench,
            length_km: 2.5,
            attenuation_db_per_km: 0.2,
            xt_adjacent_db: 45.0,
            xt_reference_length_km: 2.5,
            chromatic_dispersion_ps_nm_km: 16.0,
            isolation_override: None,
        }
    }

    /// 7-core trench-assisted fiber: about −65 dB crosstalk over 2.5 km.
    pub fn ta_mcf_2018() -> Self {
        FiberSpec {
            variant: FiberVariant::TrenchAssisted,
            xt_adjacent_db: 65.0,
            ..Self::nt_mcf_2018()
        }
    }

    /// Standard single-mode fiber baseline with the same attenuation.
    pub fn smf_baseline() -> Self {
        FiberSpec {
            variant: FiberVariant::SingleMode,
            length_km: 2.5,
            attenuation_db_per_km: 0.2,
            xt_adjacent_db: f64::INFINITY,
            xt_reference_length_km: 2.5,
            chromatic_dispersion_ps_nm_km: 17.0,
            isolation_override: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_km.is_finite() && self.length_km > 0.0) {
            return Err(ModelError::invalid(format!(
                "fiber length {} km must be > 0",
                self.length_km
            )));
        }
        if !(self.attenuation_db_per_km.is_finite() && self.attenuation_db_per_km >= 0.0) {
            return Err(ModelError::invalid(format!(
                "attenuation {} dB/km must be >= 0",
                self.attenuation_db_per_km
            )));
        }
        if self.variant == FiberVariant::SingleMode {
            return Ok(());
        }
        if !(self.xt_adjacent_db > 0.0) || self.xt_adjacent_db.is_nan() {
            return Err(ModelError::invalid(format!(
                "adjacent-core isolation {} dB must be > 0",
                self.xt_adjacent_db
            )));
        }
        if !(self.xt_reference_length_km.is_finite() && self.xt_reference_length_km > 0.0) {
            return Err(ModelError::invalid(format!(
                "crosstalk reference length {} km must be > 0",
                self.xt_reference_length_km
            )));
        }
        if let Some(m) = &self.isolation_override {
            for (i, row) in m.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    if i != j && (v.is_nan() || *v <= 0.0) {
                        return Err(ModelError::invalid(format!(
                            "isolation matrix entry [{i}][{j}] = {v} dB must be > 0 (or inf)"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn has_cores(&self) -> bool {
        self.variant != FiberVariant::SingleMode
    }

    /// Reference-length isolation from `src` into `dst`, `None` when there is
    /// no coupling path.
    fn reference_isolation(&self, src: CoreId, dst: CoreId) -> Result<Option<f64>> {
        if !self.has_cores() {
            return Ok(None);
        }
        if let Some(m) = &self.isolation_override {
            let v = m[src.index()][dst.index()];
            return Ok(if v.is_finite() { Some(v) } else { None });
        }
        Ok(if adjacency(src, dst)? { Some(self.xt_adjacent_db) } else { None })
    }
}

/// Isolation from `src` into `dst` after `length_km` of fiber. `None` means
/// the pair does not couple.
pub fn xt_isolation(
    fiber: &FiberSpec,
    src: CoreId,
    dst: CoreId,
    length_km: f64,
) -> Result<Option<LossDb>> {
    if !(length_km.is_finite() && length_km > 0.0) {
        return Err(ModelError::invalid(format!("length {length_km} km must be > 0")));
    }
    if src == dst {
        return Err(ModelError::invalid(format!("crosstalk from core {src} into itself")));
    }
    let Some(iso_ref) = fiber.reference_isolation(src, dst)? else {
        return Ok(None);
    };
    let iso = if length_km == fiber.xt_reference_length_km {
        iso_ref
    } else {
        iso_ref - 10.0 * (length_km / fiber.xt_reference_length_km).log10()
    };
    if iso < 0.0 {
        return Err(ModelError::invalid(format!(
            "crosstalk {src}->{dst} exceeds unity at {length_km} km; outside the weak-coupling model"
        )));
    }
    Ok(Some(LossDb(iso)))
}

/// Attenuation over `length_km` of one core.
pub fn fiber_loss(fiber: &FiberSpec, length_km: f64) -> Result<LossDb> {
    if !length_km.is_finite() || length_km < 0.0 {
        return Err(ModelError::invalid(format!("length {length_km} km must be >= 0")));
    }
    Ok(LossDb(fiber.attenuation_db_per_km * length_km))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(i: u8) -> CoreId {
        CoreId::new(i).unwrap()
    }

    #[test]
    fn adjacency_examples() {
        assert!(adjacency(c(0), c(3)).unwrap());
        assert!(adjacency(c(1), c(2)).unwrap());
        assert!(!adjacency(c(1), c(4)).unwrap());
        assert!(adjacency(c(6), c(1)).unwrap());
        assert!(adjacency(c(2), c(2)).is_err());
    }

    #[test]
    fn adjacency_is_symmetric_with_hexagonal_degrees() {
        for a in CoreId::all() {
            let mut degree = 0;
            for b in CoreId::all().filter(|b| *b != a) {
                let ab = adjacency(a, b).unwrap();
                assert_eq!(ab, adjacency(b, a).unwrap());
                degree += ab as usize;
            }
            assert_eq!(degree, if a.is_center() { 6 } else { 3 }, "core {a}");
        }
    }

    #[test]
    fn core_id_range() {
        assert!(CoreId::new(7).is_err());
        assert_eq!(CoreId::side_cores().count(), 6);
    }

    #[test]
    fn xt_isolation_examples() {
        let nt = FiberSpec::nt_mcf_2018();
        let ta = FiberSpec::ta_mcf_2018();
        assert_eq!(xt_isolation(&nt, c(1), c(0), 2.5).unwrap(), Some(LossDb(45.0)));
        let at5 = xt_isolation(&nt, c(1), c(0), 5.0).unwrap().unwrap().0;
        assert!((at5 - (45.0 - 10.0 * 2f64.log10())).abs() < 1e-12);
        assert!((at5 - 41.99).abs() < 5e-3);
        assert_eq!(xt_isolation(&ta, c(1), c(0), 2.5).unwrap(), Some(LossDb(65.0)));
        assert_eq!(xt_isolation(&nt, c(1), c(4), 2.5).unwrap(), None);
    }

    #[test]
    fn xt_isolation_errors() {
        let nt = FiberSpec::nt_mcf_2018();
        assert!(xt_isolation(&nt, c(1), c(0), 0.0).is_err());
        assert!(xt_isolation(&nt, c(1), c(0), -1.0).is_err());
        assert!(xt_isolation(&nt, c(1), c(1), 2.5).is_err());
    }

    #[test]
    fn single_mode_has_no_crosstalk() {
        let smf = FiberSpec::smf_baseline();
        smf.validate().unwrap();
        assert_eq!(xt_isolation(&smf, c(1), c(0), 2.5).unwrap(), None);
    }

    #[test]
    fn override_matrix_replaces_adjacency() {
        let mut f = FiberSpec::nt_mcf_2018();
        let mut m = [[f64::INFINITY; NUM_CORES]; NUM_CORES];
        m[1][4] = 70.0;
        f.isolation_override = Some(m);
        f.validate().unwrap();
        assert_eq!(xt_isolation(&f, c(1), c(4), 2.5).unwrap(), Some(LossDb(70.0)));
        assert_eq!(xt_isolation(&f, c(1), c(0), 2.5).unwrap(), None);
        m[2][3] = -1.0;
        f.isolation_override = Some(m);
        assert!(f.validate().is_err());
    }

    #[test]
    fn fiber_loss_examples() {
        let nt = FiberSpec::nt_mcf_2018();
        assert!((fiber_loss(&nt, 2.5).unwrap().0 - 0.5).abs() < 1e-12);
        assert_eq!(fiber_loss(&nt, 0.0).unwrap().0, 0.0);
        assert!((fiber_loss(&nt, 122.0).unwrap().0 - 24.4).abs() < 1e-12);
        assert!(fiber_loss(&nt, -0.1).is_err());
    }

    #[test]
    fn validate_rejects_bad_specs() {
        let mut f = FiberSpec::nt_mcf_2018();
        f.length_km = 0.0;
        assert!(f.validate().is_err());
        let mut f = FiberSpec::nt_mcf_2018();
        f.xt_adjacent_db = 0.0;
        assert!(f.validate().is_err());
        let mut f = FiberSpec::nt_mcf_2018();
        f.attenuation_db_per_km = -0.2;
        assert!(f.validate().is_err());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn doubling_length_costs_3db(l in 0.01f64..500.0) {
                let nt = FiberSpec::nt_mcf_2018();
                let (a, b) = (CoreId::new(0).unwrap(), CoreId::new(2).unwrap());
                let i1 = xt_isolation(&nt, a, b, l).unwrap().unwrap().0;
                let i2 = xt_isolation(&nt, a, b, 2.0 * l).unwrap().unwrap().0;
                prop_assert!((i1 - i2 - 10.0 * 2f64.log10()).abs() < 1e-9);
            }

            #[test]
            fn trench_isolates_better(l in 0.01f64..1000.0) {
                let (a, b) = (CoreId::new(3).unwrap(), CoreId::new(0).unwrap());
                let nt = xt_isolation(&FiberSpec::nt_mcf_2018(), a, b, l).unwrap().unwrap().0;
                let ta = xt_isolation(&FiberSpec::ta_mcf_2018(), a, b, l).unwrap().unwrap().0;
                prop_assert!(ta > nt);
            }
        }
    }
}
