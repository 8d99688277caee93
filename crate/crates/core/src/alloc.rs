//! Resource pools and rate quotes.
//!
//! NR access points hand out resource blocks from an [`NrPool`]; the
//! satellite hands out TDMA symbol blocks from a [`SatPool`], where every
//! connection additionally pays a header and a guard space. Both pools grant
//! best-effort: when the full requirement does not fit, the largest amount
//! that does fit is granted and the quote says so.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::ids::UeId;
use crate::scenario::{NrConfig, SatFrameConfig};

#[derive(Debug, Error, PartialEq)]
pub enum AllocError {
    #[error("{0} holds no allocation in this pool")]
    NotFound(UeId),
    #[error("{0} already holds an allocation in this pool")]
    AlreadyAllocated(UeId),
    #[error("requested bitrate must be > 0 (got {0})")]
    Domain(f64),
}

/// Result of `ceil(R / r)` sizing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnitsNeeded {
    Units(u32),
    /// The unit rate is zero: no amount of resources satisfies the request.
    Unsatisfiable,
}

impl UnitsNeeded {
    pub fn count(self) -> Option<u32> {
        match self {
            UnitsNeeded::Units(n) => Some(n),
            UnitsNeeded::Unsatisfiable => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateQuote {
    pub unit_rate_bps: f64,
    pub units_needed: UnitsNeeded,
    pub units_granted: u32,
    /// Raw granted capacity, `units_granted · unit_rate_bps`.
    pub achievable_bps: f64,
}

impl RateQuote {
    fn new(unit_rate_bps: f64, units_needed: UnitsNeeded, units_granted: u32) -> Self {
        Self {
            unit_rate_bps,
            units_needed,
            units_granted,
            achievable_bps: units_granted as f64 * unit_rate_bps,
        }
    }

    pub fn is_rejection(&self) -> bool {
        self.units_granted == 0
    }

    pub fn is_partial(&self) -> bool {
        match self.units_needed {
            UnitsNeeded::Units(n) => self.units_granted < n,
            UnitsNeeded::Unsatisfiable => true,
        }
    }

    /// Bitrate reported to the UE: the ceiling in the unit count can
    /// over-provision, so the served rate is capped at the request.
    pub fn reported_bps(&self, requested_bps: f64) -> f64 {
        self.achievable_bps.min(requested_bps)
    }
}

/// Shannon rate of one NR resource block, `B_RB·log2(1 + SINR)`.
pub fn nr_unit_rate(sinr_linear: f64, rb_bandwidth_hz: f64) -> f64 {
    rb_bandwidth_hz * (1.0 + sinr_linear.max(0.0)).log2()
}

/// Number of units needed to carry `requested_bps`.
pub fn units_needed(requested_bps: f64, unit_rate_bps: f64) -> Result<UnitsNeeded, AllocError> {
    if !(requested_bps > 0.0) {
        return Err(AllocError::Domain(requested_bps));
    }
    if !(unit_rate_bps > 0.0) {
        return Ok(UnitsNeeded::Unsatisfiable);
    }
    let n = (requested_bps / unit_rate_bps).ceil();
    Ok(UnitsNeeded::Units(n.min(u32::MAX as f64) as u32))
}

/// Rate carried by one TDMA block: the full-carrier Shannon rate scaled by
/// the block's time share of the frame.
pub fn sat_unit_rate(snr_linear: f64, cfg: &SatFrameConfig, bandwidth_hz: f64) -> f64 {
    bandwidth_hz * (1.0 + snr_linear.max(0.0)).log2() * cfg.block_time_share()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NrPool {
    total_rbs: u32,
    free_rbs: u32,
    rb_bandwidth_hz: f64,
    allocations: BTreeMap<UeId, u32>,
}

impl NrPool {
    pub fn new(cfg: &NrConfig) -> Self {
        Self::with_capacity(cfg.total_rbs, cfg.rb_bandwidth_hz())
    }

    pub fn with_capacity(total_rbs: u32, rb_bandwidth_hz: f64) -> Self {
        Self {
            total_rbs,
            free_rbs: total_rbs,
            rb_bandwidth_hz,
            allocations: BTreeMap::new(),
        }
    }

    pub fn total_rbs(&self) -> u32 {
        self.total_rbs
    }

    pub fn free_rbs(&self) -> u32 {
        self.free_rbs
    }

    pub fn rb_bandwidth_hz(&self) -> f64 {
        self.rb_bandwidth_hz
    }

    pub fn allocated_rbs(&self) -> u32 {
        self.allocations.values().sum()
    }

    pub fn allocations(&self) -> &BTreeMap<UeId, u32> {
        &self.allocations
    }

    pub fn rbs_of(&self, ue: UeId) -> Option<u32> {
        self.allocations.get(&ue).copied()
    }

    pub fn allocate(
        &mut self,
        ue: UeId,
        requested_bps: f64,
        unit_rate_bps: f64,
    ) -> Result<RateQuote, AllocError> {
        if self.allocations.contains_key(&ue) {
            return Err(AllocError::AlreadyAllocated(ue));
        }
        let needed = units_needed(requested_bps, unit_rate_bps)?;
        let granted = match needed {
            UnitsNeeded::Units(n) => n.min(self.free_rbs),
            UnitsNeeded::Unsatisfiable => 0,
        };
        if granted > 0 {
            self.free_rbs -= granted;
            self.allocations.insert(ue, granted);
        }
        Ok(RateQuote::new(unit_rate_bps, needed, granted))
    }

    /// Resizes an existing allocation for a new per-RB rate. Shrinks at once
    /// when fewer RBs are needed and grows up to the free capacity otherwise.
    /// An unsatisfiable rate keeps the current holding.
    pub fn reallocate(
        &mut self,
        ue: UeId,
        new_unit_rate_bps: f64,
        requested_bps: f64,
    ) -> Result<RateQuote, AllocError> {
        let held = *self.allocations.get(&ue).ok_or(AllocError::NotFound(ue))?;
        let needed = units_needed(requested_bps, new_unit_rate_bps)?;
        let target = match needed {
            UnitsNeeded::Units(n) => n,
            UnitsNeeded::Unsatisfiable => held,
        };
        let granted = if target <= held {
            target.max(1)
        } else {
            held + (target - held).min(self.free_rbs)
        };
        self.free_rbs = self.free_rbs + held - granted;
        self.allocations.insert(ue, granted);
        Ok(RateQuote::new(new_unit_rate_bps, needed, granted))
    }

    pub fn release(&mut self, ue: UeId) -> Result<u32, AllocError> {
        let held = self
            .allocations
            .remove(&ue)
            .ok_or(AllocError::NotFound(ue))?;
        self.free_rbs += held;
        Ok(held)
    }

    pub fn utilization(&self) -> f64 {
        self.allocated_rbs() as f64 / self.total_rbs as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SatGrant {
    pub blocks: u32,
    pub occupied_symbols: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SatPool {
    cfg: SatFrameConfig,
    budget_symbols: u32,
    free_symbols: u32,
    allocations: BTreeMap<UeId, SatGrant>,
}

impl SatPool {
    pub fn new(cfg: &SatFrameConfig) -> Self {
        let budget = cfg.budget_symbols();
        Self {
            cfg: *cfg,
            budget_symbols: budget,
            free_symbols: budget,
            allocations: BTreeMap::new(),
        }
    }

    /// Pool with an explicit free budget, for exercising edge cases.
    pub fn with_budget(cfg: &SatFrameConfig, budget_symbols: u32) -> Self {
        Self {
            cfg: *cfg,
            budget_symbols,
            free_symbols: budget_symbols,
            allocations: BTreeMap::new(),
        }
    }

    pub fn config(&self) -> &SatFrameConfig {
        &self.cfg
    }

    pub fn budget_symbols(&self) -> u32 {
        self.budget_symbols
    }

    pub fn free_symbols(&self) -> u32 {
        self.free_symbols
    }

    pub fn occupied_symbols(&self) -> u32 {
        self.allocations.values().map(|g| g.occupied_symbols).sum()
    }

    pub fn allocated_blocks(&self) -> u32 {
        self.allocations.values().map(|g| g.blocks).sum()
    }

    pub fn allocations(&self) -> &BTreeMap<UeId, SatGrant> {
        &self.allocations
    }

    pub fn grant_of(&self, ue: UeId) -> Option<SatGrant> {
        self.allocations.get(&ue).copied()
    }

    /// Upper bound on blocks the frame can ever hold (no overhead counted).
    pub fn block_capacity(&self) -> u32 {
        self.budget_symbols / self.cfg.n_block
    }

    /// Largest block count whose footprint fits into `symbols`.
    fn blocks_fitting(&self, symbols: u32) -> u32 {
        let overhead = self.cfg.n_head + self.cfg.n_space;
        symbols.saturating_sub(overhead) / self.cfg.n_block
    }

    pub fn allocate(
        &mut self,
        ue: UeId,
        requested_bps: f64,
        per_block_rate_bps: f64,
    ) -> Result<RateQuote, AllocError> {
        if self.allocations.contains_key(&ue) {
            return Err(AllocError::AlreadyAllocated(ue));
        }
        let needed = units_needed(requested_bps, per_block_rate_bps)?;
        let blocks = match needed {
            UnitsNeeded::Units(n) => n.min(self.blocks_fitting(self.free_symbols)),
            UnitsNeeded::Unsatisfiable => 0,
        };
        self.grant_blocks(ue, blocks);
        Ok(RateQuote::new(per_block_rate_bps, needed, blocks))
    }

    /// Places exactly `blocks` blocks for `ue` when they fit; used by
    /// `allocate` and by tests that need a specific layout.
    pub fn grant_blocks(&mut self, ue: UeId, blocks: u32) -> bool {
        if blocks == 0 || self.allocations.contains_key(&ue) {
            return false;
        }
        let occupied = self.cfg.occupied_symbols(blocks);
        if occupied > self.free_symbols {
            return false;
        }
        self.free_symbols -= occupied;
        self.allocations.insert(
            ue,
            SatGrant {
                blocks,
                occupied_symbols: occupied,
            },
        );
        true
    }

    /// Re-sizes a connection for a new per-block rate, same rules as
    /// [`NrPool::reallocate`].
    pub fn reallocate(
        &mut self,
        ue: UeId,
        per_block_rate_bps: f64,
        requested_bps: f64,
    ) -> Result<RateQuote, AllocError> {
        let held = *self.allocations.get(&ue).ok_or(AllocError::NotFound(ue))?;
        let needed = units_needed(requested_bps, per_block_rate_bps)?;
        let target = match needed {
            UnitsNeeded::Units(n) => n,
            UnitsNeeded::Unsatisfiable => held.blocks,
        };
        let blocks = if target <= held.blocks {
            target.max(1)
        } else {
            let extra = (self.free_symbols / self.cfg.n_block).min(target - held.blocks);
            held.blocks + extra
        };
        let occupied = self.cfg.occupied_symbols(blocks);
        self.free_symbols = self.free_symbols + held.occupied_symbols - occupied;
        self.allocations.insert(
            ue,
            SatGrant {
                blocks,
                occupied_symbols: occupied,
            },
        );
        Ok(RateQuote::new(per_block_rate_bps, needed, blocks))
    }

    pub fn release(&mut self, ue: UeId) -> Result<SatGrant, AllocError> {
        let grant = self
            .allocations
            .remove(&ue)
            .ok_or(AllocError::NotFound(ue))?;
        self.free_symbols += grant.occupied_symbols;
        Ok(grant)
    }

    /// Share of the frame budget no longer available to a new connection.
    /// Free symbols too few to host even a one-block connection are
    /// stranded and count as used.
    pub fn utilization(&self) -> f64 {
        let usable_free = if self.free_symbols >= self.cfg.min_footprint_symbols() {
            self.free_symbols
        } else {
            0
        };
        1.0 - usable_free as f64 / self.budget_symbols as f64
    }

    /// Plain occupied-symbol ratio, without the stranded remainder.
    pub fn symbol_utilization(&self) -> f64 {
        self.occupied_symbols() as f64 / self.budget_symbols as f64
    }
}

/// An AP's resource pool, whichever RAT it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub enum ResourcePool {
    Nr(NrPool),
    Sat(SatPool),
}

impl ResourcePool {
    pub fn allocate(
        &mut self,
        ue: UeId,
        requested_bps: f64,
        unit_rate_bps: f64,
    ) -> Result<RateQuote, AllocError> {
        match self {
            ResourcePool::Nr(p) => p.allocate(ue, requested_bps, unit_rate_bps),
            ResourcePool::Sat(p) => p.allocate(ue, requested_bps, unit_rate_bps),
        }
    }

    pub fn reallocate(
        &mut self,
        ue: UeId,
        unit_rate_bps: f64,
        requested_bps: f64,
    ) -> Result<RateQuote, AllocError> {
        match self {
            ResourcePool::Nr(p) => p.reallocate(ue, unit_rate_bps, requested_bps),
            ResourcePool::Sat(p) => p.reallocate(ue, unit_rate_bps, requested_bps),
        }
    }

    pub fn release(&mut self, ue: UeId) -> Result<(), AllocError> {
        match self {
            ResourcePool::Nr(p) => p.release(ue).map(|_| ()),
            ResourcePool::Sat(p) => p.release(ue).map(|_| ()),
        }
    }

    /// Allocation units held by `ue` (RBs or blocks).
    pub fn units_of(&self, ue: UeId) -> Option<u32> {
        match self {
            ResourcePool::Nr(p) => p.rbs_of(ue),
            ResourcePool::Sat(p) => p.grant_of(ue).map(|g| g.blocks),
        }
    }

    pub fn holds(&self, ue: UeId) -> bool {
        self.units_of(ue).is_some()
    }

    /// Per-UE unit counts, in UE order.
    pub fn unit_map(&self) -> BTreeMap<UeId, u32> {
        match self {
            ResourcePool::Nr(p) => p.allocations().clone(),
            ResourcePool::Sat(p) => p
                .allocations()
                .iter()
                .map(|(u, g)| (*u, g.blocks))
                .collect(),
        }
    }

    /// Unit capacity used to normalize utilization ratios.
    pub fn unit_capacity(&self) -> u32 {
        match self {
            ResourcePool::Nr(p) => p.total_rbs(),
            ResourcePool::Sat(p) => p.block_capacity(),
        }
    }

    pub fn load(&self) -> f64 {
        match self {
            ResourcePool::Nr(p) => p.utilization(),
            ResourcePool::Sat(p) => p.utilization(),
        }
    }

    pub fn connection_count(&self) -> usize {
        match self {
            ResourcePool::Nr(p) => p.allocations().len(),
            ResourcePool::Sat(p) => p.allocations().len(),
        }
    }

    /// `allocated + free == capacity`, in the pool's native accounting unit.
    pub fn is_conserved(&self) -> bool {
        match self {
            ResourcePool::Nr(p) => p.allocated_rbs() + p.free_rbs() == p.total_rbs(),
            ResourcePool::Sat(p) => {
                let cfg = p.config();
                p.occupied_symbols() + p.free_symbols() == p.budget_symbols()
                    && p.allocations()
                        .values()
                        .all(|g| g.occupied_symbols == cfg.occupied_symbols(g.blocks))
            }
        }
    }
}
