//! Resource-block utilization ratio (RBUR) over a sliding window and the
//! RBUR-weighted inter-AP interference it drives.
//!
//! `RBUR_k` is the mean fraction of AP `k`'s units allocated over the last
//! `T` ticks. A UE `i` evaluating AP `j` sees interference
//! `Σ_{k≠j} P_ik · RBUR_k` from co-channel APs.

use std::collections::{BTreeMap, VecDeque};

use thiserror::Error;

use crate::channel::LinkBudget;
use crate::ids::{ApId, UeId};
use crate::units;

#[derive(Debug, Error, PartialEq)]
pub enum LedgerError {
    #[error("{ap} allocates {allocated} units but has capacity {capacity}")]
    OverCapacity {
        ap: ApId,
        allocated: u32,
        capacity: u32,
    },
    #[error("{0} is not tracked by the ledger")]
    UnknownAp(ApId),
}

/// Allocated units per UE per AP at one tick. A UE appears under an AP only
/// when it was connected to it, so the entry encodes the association
/// indicator.
pub type TickSnapshot = BTreeMap<ApId, BTreeMap<UeId, u32>>;

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationLedger {
    window_len: usize,
    capacity: BTreeMap<ApId, u32>,
    window: VecDeque<TickSnapshot>,
}

impl AllocationLedger {
    pub fn new(window_len: usize, capacity: BTreeMap<ApId, u32>) -> Self {
        assert!(window_len >= 1, "window must span at least one tick");
        Self {
            window_len,
            capacity,
            window: VecDeque::with_capacity(window_len + 1),
        }
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    pub fn capacity_of(&self, ap: ApId) -> Option<u32> {
        self.capacity.get(&ap).copied()
    }

    pub fn snapshots(&self) -> impl Iterator<Item = &TickSnapshot> {
        self.window.iter()
    }

    pub fn record_tick(&mut self, snapshot: TickSnapshot) -> Result<(), LedgerError> {
        for (ap, per_ue) in &snapshot {
            let capacity = self.capacity_of(*ap).ok_or(LedgerError::UnknownAp(*ap))?;
            let allocated: u32 = per_ue.values().sum();
            if allocated > capacity {
                return Err(LedgerError::OverCapacity {
                    ap: *ap,
                    allocated,
                    capacity,
                });
            }
        }
        self.window.push_back(snapshot);
        while self.window.len() > self.window_len {
            self.window.pop_front();
        }
        Ok(())
    }

    /// Windowed mean utilization of `ap`, in [0, 1]. The mean runs over the
    /// snapshots present, so a partly filled window is not diluted.
    pub fn rbur(&self, ap: ApId) -> Result<f64, LedgerError> {
        let capacity = self.capacity_of(ap).ok_or(LedgerError::UnknownAp(ap))?;
        if self.window.is_empty() || capacity == 0 {
            return Ok(0.0);
        }
        let allocated: u64 = self
            .window
            .iter()
            .filter_map(|snap| snap.get(&ap))
            .flat_map(|per_ue| per_ue.values())
            .map(|&n| n as u64)
            .sum();
        Ok(allocated as f64 / (self.window.len() as f64 * capacity as f64))
    }
}

/// `Σ P_ik · RBUR_k` over co-channel APs other than the serving one.
/// `rx_powers_mw` holds the UE's received power from each AP over the
/// allocation-unit bandwidth.
pub fn interference_mw(
    serving_ap: ApId,
    co_channel_aps: &[ApId],
    rx_powers_mw: &BTreeMap<ApId, f64>,
    ledger: &AllocationLedger,
) -> Result<f64, LedgerError> {
    let mut total = 0.0;
    for &k in co_channel_aps {
        if k == serving_ap {
            continue;
        }
        let p = rx_powers_mw.get(&k).copied().unwrap_or(0.0);
        total += p * ledger.rbur(k)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrReport {
    pub signal_dbm: f64,
    pub interference_mw: f64,
    pub noise_mw: f64,
    pub sinr_linear: f64,
}

impl SinrReport {
    pub fn sinr_db(&self) -> f64 {
        units::linear_to_db(self.sinr_linear)
    }
}

/// SINR over one allocation unit from signal, interference and noise powers.
pub fn sinr_from_powers(signal_dbm: f64, interference_mw: f64, noise_dbm: f64) -> SinrReport {
    let signal_mw = units::dbm_to_mw(signal_dbm);
    let noise_mw = units::dbm_to_mw(noise_dbm);
    let interference_mw = interference_mw.max(0.0);
    SinrReport {
        signal_dbm,
        interference_mw,
        noise_mw,
        sinr_linear: signal_mw / (interference_mw + noise_mw),
    }
}

/// SINR of the pair described by `budget`.
pub fn sinr(budget: &LinkBudget, interference_mw: f64) -> SinrReport {
    sinr_from_powers(budget.unit_rx_power_dbm, interference_mw, budget.noise_dbm)
}
