//! The tick loop.
//!
//! Each tick runs, in order: UE motion, mobile-AP motion (driven by the
//! previous tick's demand snapshot), link budgets, interference, connection
//! updates, admission, ledger recording and metrics. Everything random is
//! drawn once at start-up from a single seeded stream.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::alloc::{nr_unit_rate, sat_unit_rate, NrPool, ResourcePool, SatPool};
use crate::cac::{
    admit, build_strategy, choose_ap, resolve_handover, resolve_improvement, update_connection,
    Admission, AssociationStrategy, ConnectionState, Demand, Phase, UpdateAction,
};
use crate::channel::{link_budget, LinkBudget};
use crate::geometry::Point2;
use crate::ids::{ApId, UeId};
use crate::interference::{interference_mw, sinr, AllocationLedger, TickSnapshot};
use crate::mobility::{
    fly_toward, intervention_registry, step_ue, DemandSample, GridDims, InterventionPolicy,
    InterventionState, Pose,
};
use crate::registry::UnknownName;
use crate::scenario::{Mobility, RadioConfig, Rat, Scenario, ScenarioError};
use crate::units;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    UnknownName(#[from] UnknownName),
    #[error("invariant violated at tick {tick} in {module}: {detail}")]
    Invariant {
        tick: u64,
        module: &'static str,
        detail: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counters {
    pub rejections: u64,
    pub drops: u64,
    pub handovers: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApFrame {
    pub load: f64,
    pub connected: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeFrame {
    pub achieved_bps: f64,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsFrame {
    pub tick: u64,
    pub t_s: f64,
    pub aps: Vec<ApFrame>,
    pub ues: Vec<UeFrame>,
    pub counters: Counters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub ticks: u64,
    pub rejections: u64,
    pub drops: u64,
    pub handovers: u64,
    /// Lowest rate reported by any Connected UE over the run.
    pub min_connected_bps: Option<f64>,
    /// Highest load seen on any satellite AP; 0 without one.
    pub peak_satellite_load: f64,
    /// Link evaluations where the Hata model ran outside its fitted range.
    pub hata_out_of_range: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub frames: Vec<MetricsFrame>,
    pub summary: RunSummary,
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub tick: u64,
    pub ue_poses: Vec<Pose>,
    pub ap_poses: Vec<Pose>,
    pub ap_modes: Vec<InterventionState>,
    pub pools: Vec<ResourcePool>,
    pub ledger: AllocationLedger,
    pub connections: Vec<ConnectionState>,
    pub arrivals_s: Vec<f64>,
    pub rng: ChaCha8Rng,
    pub counters: Counters,
    /// Demand picture of the previous tick, read by mobile-AP control.
    pub distress: Vec<DemandSample>,
}

/// Arrival instants, uniform over the arrival window. Fixed instants still
/// consume their draw.
pub fn sample_arrivals<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Vec<f64> {
    scenario
        .ues
        .iter()
        .map(|ue| {
            let t = rng.gen_range(0.0..scenario.arrival_window_s);
            ue.arrival_time_s.unwrap_or(t)
        })
        .collect()
}

fn initial_pools(scenario: &Scenario) -> Vec<ResourcePool> {
    scenario
        .aps
        .iter()
        .map(|ap| match &ap.radio {
            RadioConfig::Nr(nr) => ResourcePool::Nr(NrPool::new(nr)),
            RadioConfig::Sat(sat) => ResourcePool::Sat(SatPool::new(sat)),
        })
        .collect()
}

impl SimState {
    /// Draws UE positions, then arrival times, then headings.
    pub fn initial(scenario: &Scenario) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        let positions = crate::mobility::sample_positions(scenario, &mut rng);
        let arrivals_s = sample_arrivals(scenario, &mut rng);
        let headings = crate::mobility::sample_headings(scenario, &mut rng);
        let ue_poses = crate::mobility::poses_from(scenario, &positions, &headings);
        let pools = initial_pools(scenario);
        let capacity = pools
            .iter()
            .enumerate()
            .map(|(j, p)| (ApId(j), p.unit_capacity()))
            .collect();
        let distress = ue_poses
            .iter()
            .map(|p| DemandSample {
                position: p.ground(),
                served: false,
                serving: None,
            })
            .collect();
        Self {
            tick: 0,
            ue_poses,
            ap_poses: scenario
                .aps
                .iter()
                .map(|ap| Pose::at(ap.position))
                .collect(),
            ap_modes: vec![InterventionState::LOITERING; scenario.aps.len()],
            pools,
            ledger: AllocationLedger::new(scenario.rbur_window_ticks, capacity),
            connections: (0..scenario.ues.len())
                .map(|i| ConnectionState::idle(UeId(i)))
                .collect(),
            arrivals_s,
            rng,
            counters: Counters::default(),
            distress,
        }
    }
}

/// Per-UE radio picture for one tick.
struct RadioView {
    budgets: Vec<BTreeMap<ApId, LinkBudget>>,
    unit_rates: Vec<BTreeMap<ApId, f64>>,
}

pub struct Simulation {
    scenario: Scenario,
    strategy: Arc<dyn AssociationStrategy>,
    policy: Arc<dyn InterventionPolicy>,
    co_channel: Vec<Vec<ApId>>,
    state: SimState,
    hata_out_of_range: u64,
}

impl Simulation {
    pub fn new(scenario: Scenario) -> Result<Self, EngineError> {
        scenario.validate()?;
        let strategy = build_strategy(&scenario.association)?;
        let policy = intervention_registry().get(&scenario.intervention_policy)?;
        let co_channel = scenario
            .aps
            .iter()
            .map(|a| {
                scenario
                    .aps
                    .iter()
                    .enumerate()
                    .filter(|(_, b)| a.is_co_channel(b))
                    .map(|(k, _)| ApId(k))
                    .collect()
            })
            .collect();
        let state = SimState::initial(&scenario);
        Ok(Self {
            scenario,
            strategy,
            policy,
            co_channel,
            state,
            hata_out_of_range: 0,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn hata_out_of_range(&self) -> u64 {
        self.hata_out_of_range
    }

    fn invariant(&self, module: &'static str, detail: impl Into<String>) -> EngineError {
        EngineError::Invariant {
            tick: self.state.tick,
            module,
            detail: detail.into(),
        }
    }

    fn move_ues(&mut self) {
        let grid = GridDims::of(&self.scenario);
        let dt = self.scenario.tick_s;
        for pose in &mut self.state.ue_poses {
            *pose = step_ue(*pose, dt, grid);
        }
    }

    fn move_mobile_aps(&mut self) {
        let mobile: Vec<usize> = self
            .scenario
            .aps
            .iter()
            .enumerate()
            .filter(|(_, ap)| ap.mobility.is_mobile())
            .map(|(j, _)| j)
            .collect();
        if mobile.is_empty() {
            return;
        }
        let grounds: Vec<(ApId, Point2)> = mobile
            .iter()
            .map(|&j| (ApId(j), self.state.ap_poses[j].ground()))
            .collect();
        let targets = self.policy.targets(&grounds, &self.state.distress);
        for (&j, target) in mobile.iter().zip(targets) {
            let Mobility::Intervening {
                max_speed_mps,
                cruise_altitude_m,
            } = self.scenario.aps[j].mobility
            else {
                continue;
            };
            let (pose, mode) = fly_toward(
                self.state.ap_poses[j],
                target,
                self.scenario.tick_s,
                max_speed_mps,
                cruise_altitude_m,
            );
            self.state.ap_poses[j] = pose;
            self.state.ap_modes[j] = mode;
        }
    }

    fn radio_view(&mut self) -> Result<RadioView, EngineError> {
        let s = &self.scenario;
        let mut budgets = Vec::with_capacity(s.ues.len());
        for pose in &self.state.ue_poses {
            let per_ap: BTreeMap<ApId, LinkBudget> = s
                .aps
                .iter()
                .enumerate()
                .map(|(j, ap)| {
                    let b = link_budget(
                        pose.position(),
                        self.state.ap_poses[j].position(),
                        ap,
                        s.ap_min_power_dbm(ApId(j)),
                        s.noise_density_dbm_per_hz,
                    );
                    (ApId(j), b)
                })
                .collect();
            self.hata_out_of_range += per_ap.values().filter(|b| b.hata_flags.any()).count() as u64;
            budgets.push(per_ap);
        }

        let mut unit_rates = Vec::with_capacity(budgets.len());
        for per_ap in &budgets {
            let unit_mw: BTreeMap<ApId, f64> = per_ap
                .iter()
                .map(|(&j, b)| (j, units::dbm_to_mw(b.unit_rx_power_dbm)))
                .collect();
            let mut rates = BTreeMap::new();
            for (&j, b) in per_ap {
                let i_mw = interference_mw(j, &self.co_channel[j.0], &unit_mw, &self.state.ledger)
                    .map_err(|e| self.invariant("interference", e.to_string()))?;
                let report = sinr(b, i_mw);
                let ap = &s.aps[j.0];
                let rate = match &ap.radio {
                    RadioConfig::Nr(nr) => nr_unit_rate(report.sinr_linear, nr.rb_bandwidth_hz()),
                    RadioConfig::Sat(sat) => {
                        sat_unit_rate(report.sinr_linear, sat, ap.bandwidth_hz)
                    }
                };
                rates.insert(j, rate);
            }
            unit_rates.push(rates);
        }
        Ok(RadioView {
            budgets,
            unit_rates,
        })
    }

    fn loads(&self) -> BTreeMap<ApId, f64> {
        self.state
            .pools
            .iter()
            .enumerate()
            .map(|(j, p)| (ApId(j), p.load()))
            .collect()
    }

    /// Candidate list for UE `i`, hiding APs without backhaul.
    fn candidates(&self, view: &RadioView, i: usize, backhaul: &[bool]) -> Vec<ApId> {
        let mut budgets = view.budgets[i].clone();
        for (j, b) in budgets.iter_mut() {
            if !backhaul[j.0] {
                b.visible = false;
            }
        }
        choose_ap(&budgets, &self.loads(), self.strategy.as_ref())
    }

    fn demand(&self, i: usize) -> Demand {
        let ue = &self.scenario.ues[i];
        Demand {
            requested_bps: ue.requested_bitrate_bps,
            min_bps: ue.min_bitrate_bps,
        }
    }

    fn update_connections(
        &mut self,
        view: &RadioView,
        backhaul: &[bool],
    ) -> Result<(), EngineError> {
        for i in 0..self.state.connections.len() {
            let Phase::Connected { ap, .. } = self.state.connections[i].phase else {
                continue;
            };
            let ue = UeId(i);
            let demand = self.demand(i);
            if !backhaul[ap.0] {
                self.state.pools[ap.0]
                    .release(ue)
                    .map_err(|e| self.invariant("cac", e.to_string()))?;
                let c = &mut self.state.connections[i];
                c.phase = Phase::Requesting;
                c.achieved_bps = 0.0;
                continue;
            }
            let rate = view.unit_rates[i][&ap];
            let quote = self.state.pools[ap.0]
                .reallocate(ue, rate, demand.requested_bps)
                .map_err(|e| self.invariant("phy-alloc", e.to_string()))?;
            let trigger = self.scenario.association.handover_trigger;
            let (next, action) =
                update_connection(&self.state.connections[i], quote, demand, trigger);
            let next = match action {
                UpdateAction::None => next,
                UpdateAction::ImproveAttempt => {
                    let candidates = self.candidates(view, i, backhaul);
                    let before = next.history.handovers;
                    let after = resolve_improvement(
                        &next,
                        &candidates,
                        &mut self.state.pools,
                        &view.unit_rates[i],
                        demand,
                    )
                    .map_err(|e| self.invariant("cac", e.to_string()))?;
                    self.state.counters.handovers += (after.history.handovers - before) as u64;
                    after
                }
                UpdateAction::HandoverAttempt => {
                    let candidates = self.candidates(view, i, backhaul);
                    let before = next.history;
                    let after = resolve_handover(
                        &next,
                        &candidates,
                        &mut self.state.pools,
                        &view.unit_rates[i],
                        demand,
                    )
                    .map_err(|e| self.invariant("cac", e.to_string()))?;
                    self.state.counters.handovers +=
                        (after.history.handovers - before.handovers) as u64;
                    self.state.counters.drops += (after.history.drops - before.drops) as u64;
                    if after.phase == Phase::Dropped {
                        log::debug!("tick {}: {ue} dropped", self.state.tick);
                    }
                    after
                }
            };
            self.state.connections[i] = next;
        }
        Ok(())
    }

    fn admit_waiting(
        &mut self,
        view: &RadioView,
        backhaul: &[bool],
        t_s: f64,
    ) -> Result<(), EngineError> {
        for i in 0..self.state.connections.len() {
            if self.state.arrivals_s[i] > t_s || !self.state.connections[i].phase.wants_admission()
            {
                continue;
            }
            let ue = UeId(i);
            let demand = self.demand(i);
            let candidates = self.candidates(view, i, backhaul);
            let outcome = admit(
                ue,
                &candidates,
                &mut self.state.pools,
                &view.unit_rates[i],
                demand,
                self.scenario.association.partial_grant,
            )
            .map_err(|e| self.invariant("cac", e.to_string()))?;
            let c = &mut self.state.connections[i];
            match outcome {
                Admission::Connected { ap, quote } => {
                    c.phase = Phase::Connected { ap, quote };
                    c.achieved_bps = quote.reported_bps(demand.requested_bps);
                }
                Admission::Rejected => {
                    c.phase = Phase::Rejected;
                    c.achieved_bps = 0.0;
                    c.history.rejections += 1;
                    self.state.counters.rejections += 1;
                }
                Admission::NoCandidates => {
                    c.phase = Phase::Requesting;
                    c.achieved_bps = 0.0;
                }
            }
        }
        Ok(())
    }

    fn record_ledger(&mut self) -> Result<(), EngineError> {
        let snapshot: TickSnapshot = self
            .state
            .pools
            .iter()
            .enumerate()
            .map(|(j, p)| (ApId(j), p.unit_map()))
            .collect();
        self.state
            .ledger
            .record_tick(snapshot)
            .map_err(|e| self.invariant("interference", e.to_string()))
    }

    /// Pool accounting and single association at the tick boundary.
    fn check_conservation(&self) -> Result<(), EngineError> {
        for (j, p) in self.state.pools.iter().enumerate() {
            if !p.is_conserved() {
                return Err(
                    self.invariant("phy-alloc", format!("{} pool is not conserved", ApId(j)))
                );
            }
        }
        for c in &self.state.connections {
            let holders: Vec<usize> = (0..self.state.pools.len())
                .filter(|&j| self.state.pools[j].holds(c.ue))
                .collect();
            match c.phase {
                Phase::Connected { ap, .. } => {
                    if holders != [ap.0] {
                        return Err(self.invariant(
                            "cac",
                            format!("{} connected to {ap} but held by {holders:?}", c.ue),
                        ));
                    }
                }
                _ => {
                    if !holders.is_empty() || c.achieved_bps != 0.0 {
                        return Err(self.invariant(
                            "cac",
                            format!(
                                "{} is {} but holds resources or rate",
                                c.ue,
                                c.phase.label()
                            ),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    fn frame(&self, t_s: f64) -> MetricsFrame {
        MetricsFrame {
            tick: self.state.tick,
            t_s,
            aps: self
                .state
                .pools
                .iter()
                .map(|p| ApFrame {
                    load: p.load(),
                    connected: p.connection_count(),
                })
                .collect(),
            ues: self
                .state
                .connections
                .iter()
                .map(|c| UeFrame {
                    achieved_bps: c.achieved_bps,
                    phase: c.phase,
                })
                .collect(),
            counters: self.state.counters,
        }
    }

    /// Unserved UEs, including those not yet arrived; dropped UEs have left.
    fn distress_snapshot(&self) -> Vec<DemandSample> {
        self.state
            .connections
            .iter()
            .zip(&self.state.ue_poses)
            .enumerate()
            .filter(|(_, (c, _))| c.phase != Phase::Dropped)
            .map(|(i, (c, pose))| DemandSample {
                position: pose.ground(),
                served: matches!(c.phase, Phase::Connected { .. })
                    && c.achieved_bps >= self.scenario.ues[i].min_bitrate_bps,
                serving: c.phase.serving_ap(),
            })
            .collect()
    }

    /// Advances one tick.
    pub fn step(&mut self) -> Result<MetricsFrame, EngineError> {
        self.state.tick += 1;
        let t_s = self.state.tick as f64 * self.scenario.tick_s;
        self.move_ues();
        self.move_mobile_aps();
        let view = self.radio_view()?;
        let backhaul: Vec<bool> = self
            .scenario
            .aps
            .iter()
            .map(crate::cac::ap_backhaul_check)
            .collect();
        self.update_connections(&view, &backhaul)?;
        self.admit_waiting(&view, &backhaul, t_s)?;
        self.record_ledger()?;
        self.check_conservation()?;
        self.state.distress = self.distress_snapshot();
        Ok(self.frame(t_s))
    }
}

/// Runs `scenario` to completion.
pub fn run(scenario: &Scenario) -> Result<RunOutput, EngineError> {
    let mut sim = Simulation::new(scenario.clone())?;
    let ticks = scenario.ticks();
    let satellites: Vec<usize> = scenario
        .aps
        .iter()
        .enumerate()
        .filter(|(_, ap)| ap.rat() == Rat::SatelliteTdma)
        .map(|(j, _)| j)
        .collect();
    let mut frames = Vec::with_capacity(ticks as usize);
    let mut min_connected: Option<f64> = None;
    let mut peak_sat = 0.0f64;
    for _ in 0..ticks {
        let frame = sim.step()?;
        for u in &frame.ues {
            if matches!(u.phase, Phase::Connected { .. }) {
                min_connected =
                    Some(min_connected.map_or(u.achieved_bps, |m| m.min(u.achieved_bps)));
            }
        }
        for &j in &satellites {
            peak_sat = peak_sat.max(frame.aps[j].load);
        }
        frames.push(frame);
    }
    if sim.hata_out_of_range > 0 {
        log::debug!(
            "{} link evaluations used the Hata model outside its fitted range",
            sim.hata_out_of_range
        );
    }
    let counters = frames.last().map(|f| f.counters).unwrap_or_default();
    Ok(RunOutput {
        summary: RunSummary {
            seed: scenario.seed,
            ticks,
            rejections: counters.rejections,
            drops: counters.drops,
            handovers: counters.handovers,
            min_connected_bps: min_connected,
            peak_satellite_load: peak_sat,
            hata_out_of_range: sim.hata_out_of_range,
        },
        frames,
    })
}
