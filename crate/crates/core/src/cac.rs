//! Connection admission control: AP association, admission, connection
//! updates with handover, and the drop policy.
//!
//! The procedure per UE is: measure received power from every AP and keep
//! the visible ones; rank them with an [`AssociationStrategy`]; walk the
//! ranking and let each AP allocate best-effort from the SINR-derived unit
//! rate. Connected UEs are re-quoted every tick and hand over (or drop) when
//! the served rate falls under their minimum.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::Arc;

use crate::alloc::{AllocError, RateQuote, ResourcePool};
use crate::channel::LinkBudget;
use crate::ids::{ApId, UeId};
use crate::registry::{Registry, UnknownName};
use crate::scenario::{ApSpec, AssociationConfig, Rat};
pub use crate::scenario::{HandoverTrigger, PartialGrantPolicy};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phase {
    /// Not yet requesting service.
    Idle,
    /// Requesting, but no AP is visible.
    Requesting,
    Connected {
        ap: ApId,
        quote: RateQuote,
    },
    Dropped,
    /// Refused this tick; retries on the next one.
    Rejected,
}

impl Phase {
    pub fn serving_ap(&self) -> Option<ApId> {
        match self {
            Phase::Connected { ap, .. } => Some(*ap),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Phase::Idle => "idle",
            Phase::Requesting => "requesting",
            Phase::Connected { .. } => "connected",
            Phase::Dropped => "dropped",
            Phase::Rejected => "rejected",
        }
    }

    /// Whether admission should run for this UE once it has arrived.
    pub fn wants_admission(&self) -> bool {
        matches!(self, Phase::Idle | Phase::Requesting | Phase::Rejected)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct UeHistory {
    pub handovers: u32,
    pub drops: u32,
    pub rejections: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionState {
    pub ue: UeId,
    pub phase: Phase,
    pub achieved_bps: f64,
    pub history: UeHistory,
}

impl ConnectionState {
    pub fn idle(ue: UeId) -> Self {
        Self {
            ue,
            phase: Phase::Idle,
            achieved_bps: 0.0,
            history: UeHistory::default(),
        }
    }

    pub fn connected(ue: UeId, ap: ApId, quote: RateQuote, requested_bps: f64) -> Self {
        Self {
            ue,
            phase: Phase::Connected { ap, quote },
            achieved_bps: quote.reported_bps(requested_bps),
            history: UeHistory::default(),
        }
    }

    fn set_phase(&mut self, phase: Phase, achieved_bps: f64) {
        self.phase = phase;
        self.achieved_bps = achieved_bps;
    }
}

/// What a strategy may look at for one visible AP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateInfo {
    pub ap: ApId,
    pub rx_power_dbm: f64,
    pub load: f64,
}

pub trait AssociationStrategy: Send + Sync {
    fn name(&self) -> &'static str;
    /// Orders visible APs from most to least preferred; may drop some.
    fn rank(&self, visible: &[CandidateInfo]) -> Vec<ApId>;
}

fn by_power(a: &CandidateInfo, b: &CandidateInfo) -> Ordering {
    b.rx_power_dbm
        .total_cmp(&a.rx_power_dbm)
        .then(a.ap.cmp(&b.ap))
}

/// The UE picks the strongest received AP.
pub struct UserCentric;

impl AssociationStrategy for UserCentric {
    fn name(&self) -> &'static str {
        "user_centric"
    }

    fn rank(&self, visible: &[CandidateInfo]) -> Vec<ApId> {
        let mut v = visible.to_vec();
        v.sort_by(by_power);
        v.into_iter().map(|c| c.ap).collect()
    }
}

/// The RAN steers toward the least loaded AP; received power breaks ties.
pub struct RanControlled;

impl AssociationStrategy for RanControlled {
    fn name(&self) -> &'static str {
        "ran_controlled"
    }

    fn rank(&self, visible: &[CandidateInfo]) -> Vec<ApId> {
        let mut v = visible.to_vec();
        v.sort_by(|a, b| a.load.total_cmp(&b.load).then_with(|| by_power(a, b)));
        v.into_iter().map(|c| c.ap).collect()
    }
}

/// The RAN removes APs loaded at or above `threshold`; the UE then picks by
/// received power among the rest.
pub struct RanAssisted {
    pub threshold: f64,
}

impl AssociationStrategy for RanAssisted {
    fn name(&self) -> &'static str {
        "ran_assisted"
    }

    fn rank(&self, visible: &[CandidateInfo]) -> Vec<ApId> {
        let mut v: Vec<CandidateInfo> = visible
            .iter()
            .filter(|c| c.load < self.threshold)
            .copied()
            .collect();
        v.sort_by(by_power);
        v.into_iter().map(|c| c.ap).collect()
    }
}

pub type StrategyFactory = dyn Fn(&AssociationConfig) -> Arc<dyn AssociationStrategy> + Send + Sync;

pub fn association_registry() -> Registry<StrategyFactory> {
    let mut r: Registry<StrategyFactory> = Registry::new("association strategy");
    r.register(
        "user_centric",
        Arc::new(|_: &AssociationConfig| Arc::new(UserCentric) as _),
    );
    r.register(
        "ran_controlled",
        Arc::new(|_: &AssociationConfig| Arc::new(RanControlled) as _),
    );
    r.register(
        "ran_assisted",
        Arc::new(|cfg: &AssociationConfig| {
            Arc::new(RanAssisted {
                threshold: cfg.assist_threshold,
            }) as _
        }),
    );
    r
}

pub fn build_strategy(
    cfg: &AssociationConfig,
) -> Result<Arc<dyn AssociationStrategy>, UnknownName> {
    let factory = association_registry().get(&cfg.strategy)?;
    Ok(factory(cfg))
}

/// Visible APs ranked by `strategy`. APs below their visibility threshold
/// never reach the strategy.
pub fn choose_ap(
    budgets: &BTreeMap<ApId, LinkBudget>,
    loads: &BTreeMap<ApId, f64>,
    strategy: &dyn AssociationStrategy,
) -> Vec<ApId> {
    let visible: Vec<CandidateInfo> = budgets
        .iter()
        .filter(|(_, b)| b.visible)
        .map(|(&ap, b)| CandidateInfo {
            ap,
            rx_power_dbm: b.rx_power_dbm,
            load: loads.get(&ap).copied().unwrap_or(0.0),
        })
        .collect();
    strategy.rank(&visible)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Admission {
    Connected {
        ap: ApId,
        quote: RateQuote,
    },
    Rejected,
    /// Nothing visible: the UE keeps requesting.
    NoCandidates,
}

/// Per-UE request parameters used by admission and updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Demand {
    pub requested_bps: f64,
    pub min_bps: f64,
}

/// Walks `candidates` in order; the first AP whose grant reaches the
/// minimum bitrate wins and later candidates are not touched.
pub fn admit(
    ue: UeId,
    candidates: &[ApId],
    pools: &mut [ResourcePool],
    unit_rates: &BTreeMap<ApId, f64>,
    demand: Demand,
    partial: PartialGrantPolicy,
) -> Result<Admission, AllocError> {
    if candidates.is_empty() {
        return Ok(Admission::NoCandidates);
    }
    let mut best_partial: Option<(ApId, f64)> = None;
    for &ap in candidates {
        let rate = unit_rates.get(&ap).copied().unwrap_or(0.0);
        let pool = &mut pools[ap.0];
        let quote = pool.allocate(ue, demand.requested_bps, rate)?;
        if quote.is_rejection() {
            continue;
        }
        if quote.achievable_bps >= demand.min_bps {
            return Ok(Admission::Connected { ap, quote });
        }
        if best_partial.is_none_or(|(_, bps)| quote.achievable_bps > bps) {
            best_partial = Some((ap, quote.achievable_bps));
        }
        pool.release(ue)?;
    }
    match (best_partial, partial) {
        (Some((ap, _)), PartialGrantPolicy::Keep) => {
            let rate = unit_rates.get(&ap).copied().unwrap_or(0.0);
            let quote = pools[ap.0].allocate(ue, demand.requested_bps, rate)?;
            Ok(Admission::Connected { ap, quote })
        }
        _ => Ok(Admission::Rejected),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateAction {
    None,
    /// Served rate fell under the minimum: move or drop.
    HandoverAttempt,
    /// Served rate is at or above the minimum but short of the request:
    /// move only if another AP grants the full request.
    ImproveAttempt,
}

/// Applies a fresh quote to a connected UE.
pub fn update_connection(
    state: &ConnectionState,
    new_quote: RateQuote,
    demand: Demand,
    trigger: HandoverTrigger,
) -> (ConnectionState, UpdateAction) {
    let mut next = state.clone();
    let Phase::Connected { ap, .. } = state.phase else {
        return (next, UpdateAction::None);
    };
    next.set_phase(
        Phase::Connected {
            ap,
            quote: new_quote,
        },
        new_quote.reported_bps(demand.requested_bps),
    );
    let action = if new_quote.achievable_bps < demand.min_bps {
        UpdateAction::HandoverAttempt
    } else if trigger == HandoverTrigger::BelowRequested
        && new_quote.achievable_bps < demand.requested_bps
    {
        UpdateAction::ImproveAttempt
    } else {
        UpdateAction::None
    };
    (next, action)
}

/// Moves a degraded UE to another AP that grants its full request, if one
/// does; otherwise the current connection is kept as is.
pub fn resolve_improvement(
    state: &ConnectionState,
    candidates: &[ApId],
    pools: &mut [ResourcePool],
    unit_rates: &BTreeMap<ApId, f64>,
    demand: Demand,
) -> Result<ConnectionState, AllocError> {
    let Phase::Connected { ap: current, .. } = state.phase else {
        return Ok(state.clone());
    };
    let others: Vec<ApId> = candidates
        .iter()
        .copied()
        .filter(|&a| a != current)
        .collect();
    let full = Demand {
        requested_bps: demand.requested_bps,
        min_bps: demand.requested_bps,
    };
    let mut next = state.clone();
    if let Admission::Connected { ap, quote } = admit(
        state.ue,
        &others,
        pools,
        unit_rates,
        full,
        PartialGrantPolicy::Release,
    )? {
        pools[current.0].release(state.ue)?;
        next.set_phase(
            Phase::Connected { ap, quote },
            quote.reported_bps(demand.requested_bps),
        );
        next.history.handovers += 1;
    }
    Ok(next)
}

/// Runs a handover attempt for a UE connected to `current` whose rate fell
/// under its minimum. Other candidates are tried first; a target must reach
/// the minimum. On failure the UE is dropped. Resources on the old AP are
/// released in both cases.
pub fn resolve_handover(
    state: &ConnectionState,
    candidates: &[ApId],
    pools: &mut [ResourcePool],
    unit_rates: &BTreeMap<ApId, f64>,
    demand: Demand,
) -> Result<ConnectionState, AllocError> {
    let Phase::Connected { ap: current, .. } = state.phase else {
        return Ok(state.clone());
    };
    let others: Vec<ApId> = candidates
        .iter()
        .copied()
        .filter(|&a| a != current)
        .collect();
    let mut next = state.clone();
    match admit(
        state.ue,
        &others,
        pools,
        unit_rates,
        demand,
        PartialGrantPolicy::Release,
    )? {
        Admission::Connected { ap, quote } => {
            pools[current.0].release(state.ue)?;
            next.set_phase(
                Phase::Connected { ap, quote },
                quote.reported_bps(demand.requested_bps),
            );
            next.history.handovers += 1;
        }
        Admission::Rejected | Admission::NoCandidates => {
            pools[current.0].release(state.ue)?;
            next.set_phase(Phase::Dropped, 0.0);
            next.history.drops += 1;
        }
    }
    Ok(next)
}

/// Whether the AP still reaches the core network. The satellite is always
/// backhauled; other APs follow their `backhaul_up` switch.
pub fn ap_backhaul_check(ap: &ApSpec) -> bool {
    match ap.rat() {
        Rat::SatelliteTdma => true,
        Rat::NrFdd => ap.backhaul_up,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alloc::{NrPool, UnitsNeeded};
    use crate::channel::HataFlags;

    fn budget(rx: f64, visible: bool) -> LinkBudget {
        LinkBudget {
            path_loss_db: 100.0,
            rx_power_dbm: rx,
            unit_rx_power_dbm: rx,
            noise_dbm: -110.0,
            visible,
            hata_flags: HataFlags::default(),
        }
    }

    fn budgets(entries: &[(usize, f64, bool)]) -> BTreeMap<ApId, LinkBudget> {
        entries
            .iter()
            .map(|&(a, rx, v)| (ApId(a), budget(rx, v)))
            .collect()
    }

    fn loads(entries: &[(usize, f64)]) -> BTreeMap<ApId, f64> {
        entries.iter().map(|&(a, l)| (ApId(a), l)).collect()
    }

    const DEMAND: Demand = Demand {
        requested_bps: 10e6,
        min_bps: 5e6,
    };

    #[test]
    fn user_centric_sorts_by_power() {
        let b = budgets(&[(0, -80.0, true), (1, -70.0, true)]);
        let c = choose_ap(&b, &loads(&[]), &UserCentric);
        assert_eq!(c, vec![ApId(1), ApId(0)]);
    }

    #[test]
    fn ran_controlled_sorts_by_load() {
        let b = budgets(&[(0, -70.0, true), (1, -70.0, true)]);
        let c = choose_ap(&b, &loads(&[(0, 0.9), (1, 0.1)]), &RanControlled);
        assert_eq!(c, vec![ApId(1), ApId(0)]);
        let b = budgets(&[(0, -75.0, true), (1, -70.0, true)]);
        let c = choose_ap(&b, &loads(&[(0, 0.5), (1, 0.5)]), &RanControlled);
        assert_eq!(c, vec![ApId(1), ApId(0)]);
    }

    #[test]
    fn ran_assisted_filters_loaded_aps() {
        let b = budgets(&[(0, -60.0, true), (1, -70.0, true), (2, -80.0, true)]);
        let s = RanAssisted { threshold: 0.8 };
        let c = choose_ap(&b, &loads(&[(0, 0.85), (1, 0.2), (2, 0.79)]), &s);
        assert_eq!(c, vec![ApId(1), ApId(2)]);
    }

    #[test]
    fn invisible_aps_are_excluded() {
        let b = budgets(&[(0, -130.0, false), (1, -140.0, false)]);
        assert!(choose_ap(&b, &loads(&[]), &UserCentric).is_empty());
        let mut pools = vec![ResourcePool::Nr(NrPool::with_capacity(10, 720e3))];
        let a = admit(
            UeId(0),
            &[],
            &mut pools,
            &BTreeMap::new(),
            DEMAND,
            PartialGrantPolicy::Keep,
        )
        .unwrap();
        assert_eq!(a, Admission::NoCandidates);
    }

    fn two_pools(cap0: u32, cap1: u32) -> Vec<ResourcePool> {
        vec![
            ResourcePool::Nr(NrPool::with_capacity(cap0, 720e3)),
            ResourcePool::Nr(NrPool::with_capacity(cap1, 720e3)),
        ]
    }

    fn rates(r: f64) -> BTreeMap<ApId, f64> {
        [(ApId(0), r), (ApId(1), r)].into_iter().collect()
    }

    #[test]
    fn first_candidate_serves_later_untouched() {
        let mut pools = two_pools(135, 135);
        let a = admit(
            UeId(0),
            &[ApId(0), ApId(1)],
            &mut pools,
            &rates(4e6),
            DEMAND,
            PartialGrantPolicy::Keep,
        )
        .unwrap();
        match a {
            Admission::Connected { ap, quote } => {
                assert_eq!(ap, ApId(0));
                assert_eq!(quote.units_granted, 3);
                assert_eq!(quote.reported_bps(10e6), 10e6);
            }
            other => panic!("{other:?}"),
        }
        assert!(!pools[1].holds(UeId(0)));
        assert_eq!(
            pools[1],
            ResourcePool::Nr(NrPool::with_capacity(135, 720e3))
        );
    }

    #[test]
    fn exhausted_first_candidate_spills_to_second() {
        let mut pools = two_pools(0, 135);
        let a = admit(
            UeId(0),
            &[ApId(0), ApId(1)],
            &mut pools,
            &rates(4e6),
            DEMAND,
            PartialGrantPolicy::Keep,
        )
        .unwrap();
        assert!(matches!(a, Admission::Connected { ap: ApId(1), .. }));
    }

    #[test]
    fn nothing_granted_is_rejected() {
        let mut pools = two_pools(0, 0);
        let a = admit(
            UeId(0),
            &[ApId(0), ApId(1)],
            &mut pools,
            &rates(4e6),
            DEMAND,
            PartialGrantPolicy::Keep,
        )
        .unwrap();
        assert_eq!(a, Admission::Rejected);
    }

    #[test]
    fn partial_below_minimum_follows_policy() {
        // One free RB at 4 Mbps cannot reach 5 Mbps.
        let mut pools = two_pools(1, 0);
        let a = admit(
            UeId(0),
            &[ApId(0), ApId(1)],
            &mut pools,
            &rates(4e6),
            DEMAND,
            PartialGrantPolicy::Release,
        )
        .unwrap();
        assert_eq!(a, Admission::Rejected);
        assert!(pools.iter().all(|p| !p.holds(UeId(0))));

        let a = admit(
            UeId(0),
            &[ApId(0), ApId(1)],
            &mut pools,
            &rates(4e6),
            DEMAND,
            PartialGrantPolicy::Keep,
        )
        .unwrap();
        match a {
            Admission::Connected { ap, quote } => {
                assert_eq!(ap, ApId(0));
                assert_eq!(quote.achievable_bps, 4e6);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn partial_above_minimum_is_accepted_degraded() {
        let mut pools = two_pools(2, 0);
        let a = admit(
            UeId(0),
            &[ApId(0)],
            &mut pools,
            &rates(3e6),
            DEMAND,
            PartialGrantPolicy::Release,
        )
        .unwrap();
        match a {
            Admission::Connected { quote, .. } => assert_eq!(quote.achievable_bps, 6e6),
            other => panic!("{other:?}"),
        }
    }

    fn quote(rate: f64, granted: u32, needed: u32) -> RateQuote {
        RateQuote {
            unit_rate_bps: rate,
            units_needed: UnitsNeeded::Units(needed),
            units_granted: granted,
            achievable_bps: rate * granted as f64,
        }
    }

    #[test]
    fn steady_state_update() {
        let s = ConnectionState::connected(UeId(0), ApId(0), quote(5e6, 2, 2), 10e6);
        let (next, action) =
            update_connection(&s, quote(5e6, 2, 2), DEMAND, HandoverTrigger::BelowMinimum);
        assert_eq!(action, UpdateAction::None);
        assert_eq!(next.achieved_bps, 10e6);
    }

    #[test]
    fn degraded_update_hands_over_when_possible() {
        let mut pools = two_pools(1, 135);
        pools[0].allocate(UeId(0), 10e6, 4e6).unwrap();
        let s = ConnectionState::connected(UeId(0), ApId(0), quote(4e6, 1, 3), 10e6);
        let (s, action) =
            update_connection(&s, quote(4e6, 1, 3), DEMAND, HandoverTrigger::BelowMinimum);
        assert_eq!(action, UpdateAction::HandoverAttempt);
        let next =
            resolve_handover(&s, &[ApId(0), ApId(1)], &mut pools, &rates(4e6), DEMAND).unwrap();
        assert_eq!(next.phase.serving_ap(), Some(ApId(1)));
        assert_eq!(next.achieved_bps, 10e6);
        assert_eq!(next.history.handovers, 1);
        assert_eq!(next.history.drops, 0);
        assert!(!pools[0].holds(UeId(0)));
    }

    #[test]
    fn degraded_update_without_alternative_drops() {
        let mut pools = two_pools(1, 0);
        pools[0].allocate(UeId(0), 10e6, 4e6).unwrap();
        let s = ConnectionState::connected(UeId(0), ApId(0), quote(4e6, 1, 3), 10e6);
        let next =
            resolve_handover(&s, &[ApId(0), ApId(1)], &mut pools, &rates(4e6), DEMAND).unwrap();
        assert_eq!(next.phase, Phase::Dropped);
        assert_eq!(next.achieved_bps, 0.0);
        assert_eq!(next.history.drops, 1);
        assert!(pools.iter().all(|p| !p.holds(UeId(0))));
    }

    #[test]
    fn short_of_request_moves_only_to_a_full_grant() {
        // 2 RBs at 3 Mbps: 6 Mbps served, above the 5 Mbps minimum.
        let s = ConnectionState::connected(UeId(0), ApId(0), quote(3e6, 2, 4), 10e6);
        let (_, action) =
            update_connection(&s, quote(3e6, 2, 4), DEMAND, HandoverTrigger::BelowMinimum);
        assert_eq!(action, UpdateAction::None);
        let (s, action) = update_connection(
            &s,
            quote(3e6, 2, 4),
            DEMAND,
            HandoverTrigger::BelowRequested,
        );
        assert_eq!(action, UpdateAction::ImproveAttempt);

        let mut pools = two_pools(2, 2);
        pools[0].allocate(UeId(0), 10e6, 3e6).unwrap();
        let stay =
            resolve_improvement(&s, &[ApId(0), ApId(1)], &mut pools, &rates(3e6), DEMAND).unwrap();
        assert_eq!(stay, s);
        assert!(pools[0].holds(UeId(0)) && !pools[1].holds(UeId(0)));

        let mut pools = two_pools(2, 135);
        pools[0].allocate(UeId(0), 10e6, 3e6).unwrap();
        let moved =
            resolve_improvement(&s, &[ApId(0), ApId(1)], &mut pools, &rates(3e6), DEMAND).unwrap();
        assert_eq!(moved.phase.serving_ap(), Some(ApId(1)));
        assert_eq!(moved.achieved_bps, 10e6);
        assert_eq!(moved.history.handovers, 1);
        assert!(!pools[0].holds(UeId(0)));
    }

    #[test]
    fn backhaul_switch() {
        let s = crate::scenario::builtin_paper_scenario();
        assert!(s.aps.iter().all(ap_backhaul_check));
        let mut uav = s.aps[2].clone();
        uav.backhaul_up = false;
        assert!(!ap_backhaul_check(&uav));
        let mut sat = s.aps[0].clone();
        sat.backhaul_up = false;
        assert!(ap_backhaul_check(&sat));
    }

    #[test]
    fn registry_builds_all_strategies() {
        for name in ["user_centric", "ran_controlled", "ran_assisted"] {
            let cfg = AssociationConfig {
                strategy: name.to_string(),
                assist_threshold: 0.8,
                partial_grant: PartialGrantPolicy::Keep,
                handover_trigger: HandoverTrigger::BelowMinimum,
            };
            assert_eq!(build_strategy(&cfg).unwrap().name(), name);
        }
        let bad = AssociationConfig {
            strategy: "telepathic".to_string(),
            assist_threshold: 0.8,
            partial_grant: PartialGrantPolicy::Keep,
            handover_trigger: HandoverTrigger::BelowMinimum,
        };
        assert!(build_strategy(&bad).is_err());
    }
}
