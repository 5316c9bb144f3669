//! Core/wavelength allocation under a secret-key-rate floor.
//!
//! The planner maximises the number of active data channels (each carries
//! the same 112 Gb/s) while the quantum link keeps at least
//! `min_key_rate_bps`. Two facts reduce this to a knapsack with unit values:
//!
//! 1. leakage contributions are independent and add up per gate, so the
//!    background yield of a selection is `dark + Σ contribution`;
//! 2. the key rate is non-increasing in the background yield.
//!
//! Hence a selection is admissible iff its summed contribution fits under the
//! noise budget `Y0* − dark`, where `Y0*` is the largest background yield
//! that still meets the floor (found by bisection). Maximising cardinality
//! under one additive budget is solved by taking the cheapest items first:
//! if an optimal set `S` has `k` items, the `k` cheapest items cost no more
//! than `S`, so they fit too; greedy takes exactly the longest affordable
//! prefix of the sorted order, which therefore has at least `k` items.
//!
//! The final selection is re-checked against the exact key-rate function and
//! trimmed from the expensive end if the bisection tolerance let it overshoot.

use std::cmp::Ordering;

use serde::Serialize;

use crate::classical::{channel_feasible, ClassicalFeasibility};
use crate::error::{ModelError, Result};
use crate::fiber::FiberSpec;
use crate::leakage::{channel_contribution, ChannelAllocation, DataChannel, FilterSpec, NoiseBreakdown, QuantumSlot};
use crate::qkd::{key_rate, KeyRateResult, LinkModel, MuPolicy, QkdLinkParams};
use crate::units::LossDb;

/// Relative tolerance on the bisected background-yield budget.
pub const BUDGET_REL_TOL: f64 = 1e-6;

/// Upper end of the budget search; at Y0 = 0.5 the QBER is ~0.5 and no
/// setting of the other parameters yields key.
const Y0_SEARCH_MAX: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct PlanningProblem {
    pub fiber: FiberSpec,
    pub length_km: f64,
    pub filter: FilterSpec,
    /// Mean photon number is taken as fixed from `qkd.mu`.
    pub qkd: QkdLinkParams,
    pub quantum: QuantumSlot,
    pub candidates: Vec<DataChannel>,
    pub min_key_rate_bps: f64,
    pub extra_loss_db: LossDb,
    pub extra_path_loss_db: LossDb,
    pub feasibility: ClassicalFeasibility,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankedSlot {
    pub channel: DataChannel,
    /// Per-gate noise probability this slot adds on its own.
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub selected: Vec<DataChannel>,
    /// Candidates left out, cheapest first.
    pub rejected: Vec<RankedSlot>,
    pub achieved_key_rate_bps: f64,
    pub key: KeyRateResult,
    pub noise: NoiseBreakdown,
    /// Largest total background yield per gate that meets the floor.
    pub noise_budget_per_gate: f64,
}

impl PlanResult {
    /// Total per-gate noise as a percentage of the budget.
    pub fn budget_utilization_pct(&self) -> f64 {
        100.0 * self.noise.total_per_gate_prob / self.noise_budget_per_gate
    }
}

impl PlanningProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_key_rate_bps >= 0.0 && self.min_key_rate_bps.is_finite()) {
            return Err(ModelError::invalid(format!(
                "minimum key rate {} bps must be finite and >= 0",
                self.min_key_rate_bps
            )));
        }
        self.feasibility.validate()?;
        // duplicate and quantum-slot checks come with the allocation
        ChannelAllocation { quantum: self.quantum, data_channels: self.candidates.clone() }
            .validate_for(&self.fiber)?;
        for (i, ch) in self.candidates.iter().enumerate() {
            let f = channel_feasible(ch, &self.feasibility);
            if let Some(reason) = f.reason {
                return Err(ModelError::invalid(format!("candidate {i} infeasible: {reason}")));
            }
        }
        self.model(Vec::new()).validate()?;
        if !(self.length_km > 0.0 && self.length_km.is_finite()) {
            return Err(ModelError::invalid(format!("length {} km must be > 0", self.length_km)));
        }
        Ok(())
    }

    /// The link with `data_channels` active.
    pub fn model(&self, data_channels: Vec<DataChannel>) -> LinkModel {
        LinkModel {
            fiber: self.fiber.clone(),
            filter: self.filter.clone(),
            qkd: self.qkd.clone(),
            allocation: ChannelAllocation { quantum: self.quantum, data_channels },
            extra_loss_db: self.extra_loss_db,
            extra_path_loss_db: self.extra_path_loss_db,
            mu_policy: MuPolicy::Fixed,
        }
    }
}

/// Largest background yield per gate at which the key rate still reaches
/// `min_rate_bps`, by bisection on the unclamped rate. With `min_rate_bps = 0`
/// this is the zero crossing.
pub fn noise_budget(qkd: &QkdLinkParams, eta: f64, min_rate_bps: f64) -> Result<f64> {
    if !(min_rate_bps >= 0.0 && min_rate_bps.is_finite()) {
        return Err(ModelError::invalid(format!("minimum rate {min_rate_bps} must be finite and >= 0")));
    }
    let rep = qkd.detector.repetition_rate_hz;
    let meets = |y0: f64| -> Result<bool> { Ok(key_rate(qkd, eta, y0)?.r_raw * rep >= min_rate_bps) };
    let dark = qkd.detector.dark_count_prob_per_gate;
    if !meets(dark)? {
        return Err(ModelError::NoBudget {
            min_rate_bps,
            dark_only_rate_bps: key_rate(qkd, eta, dark)?.r_bps,
        });
    }
    let (mut lo, mut hi) = (dark, Y0_SEARCH_MAX);
    if meets(hi)? {
        return Ok(hi);
    }
    while hi - lo > BUDGET_REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if meets(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

fn slot_order(a: &RankedSlot, b: &RankedSlot) -> Ordering {
    a.contribution
        .total_cmp(&b.contribution)
        .then(a.channel.core.cmp(&b.channel.core))
        .then(a.channel.wavelength.0.total_cmp(&b.channel.wavelength.0))
}

/// Candidates ordered by their leakage contribution, cheapest first; ties go
/// to the lower core index, then the shorter wavelength.
pub fn rank_slots(problem: &PlanningProblem) -> Result<Vec<RankedSlot>> {
    problem.validate()?;
    let link = problem.model(Vec::new());
    let path = link.leakage_path(problem.length_km);
    let mut ranked = problem
        .candidates
        .iter()
        .map(|ch| {
            Ok(RankedSlot { channel: *ch, contribution: channel_contribution(ch, &problem.quantum, &path)? })
        })
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(slot_order);
    Ok(ranked)
}

pub fn plan_allocation(problem: &PlanningProblem) -> Result<PlanResult> {
    let ranked = rank_slots(problem)?;
    let eta = problem.model(Vec::new()).transmittance(problem.length_km)?;
    let budget = noise_budget(&problem.qkd, eta, problem.min_key_rate_bps)?;

    let mut total = problem.qkd.detector.dark_count_prob_per_gate;
    let mut take = 0;
    for slot in &ranked {
        if total + slot.contribution > budget {
            break;
        }
        total += slot.contribution;
        take += 1;
    }

    let rep = problem.qkd.detector.repetition_rate_hz;
    loop {
        let selected: Vec<DataChannel> = ranked[..take].iter().map(|s| s.channel).collect();
        let model = problem.model(selected.clone());
        let noise = model.noise(problem.length_km)?;
        let key = key_rate(&problem.qkd, eta, noise.total_per_gate_prob)?;
        if key.r_raw * rep >= problem.min_key_rate_bps || take == 0 {
            return Ok(PlanResult {
                selected,
                rejected: ranked[take..].to_vec(),
                achieved_key_rate_bps: key.r_bps,
                key,
                noise,
                noise_budget_per_gate: budget,
            });
        }
        take -= 1;
    }
}
