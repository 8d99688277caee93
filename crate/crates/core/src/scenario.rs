//! Scenario configuration: grid, radio access points, user population and
//! run timing. Scenarios are read from and written to TOML documents; see
//! `docs/scenario.md` for the schema.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point2, Point3};
use crate::ids::ApId;
use crate::units;

pub const DEFAULT_SEED: u64 = 2021;
pub const DEFAULT_TICK_S: f64 = 1.0;
pub const DEFAULT_DURATION_S: f64 = 300.0;
pub const DEFAULT_ARRIVAL_WINDOW_S: f64 = 60.0;
pub const DEFAULT_RBUR_WINDOW_TICKS: usize = 10;
pub const DEFAULT_UE_HEIGHT_M: f64 = 1.5;
pub const DEFAULT_NOISE_FIGURE_DB: f64 = 7.0;
pub const DEFAULT_ASSIST_THRESHOLD: f64 = 0.8;
pub const DEFAULT_STRATEGY: &str = "user_centric";
pub const DEFAULT_INTERVENTION_POLICY: &str = "centroid";
pub const GEO_SLANT_RANGE_M: f64 = 35_786_000.0;

/// NR frames are always 10 ms.
pub const NR_FRAME_MS: f64 = 10.0;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("parse error at `{key}`: {message}")]
    Parse { key: String, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("cannot serialize scenario: {0}")]
    Serialize(String),
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

fn parse_err(key: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Parse {
        key: key.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rat {
    SatelliteTdma,
    NrFdd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Fr1,
    Fr2,
}

/// Propagation environment correction of the COST-231-Hata model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Environment {
    Urban,
    #[default]
    Suburban,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Mobility {
    Static,
    Intervening {
        max_speed_mps: f64,
        cruise_altitude_m: f64,
    },
}

impl Mobility {
    pub fn is_mobile(&self) -> bool {
        matches!(self, Mobility::Intervening { .. })
    }
}

/// Transmit power as given in the scenario document.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TxPower {
    Watts(f64),
    Dbm(f64),
    /// Satellite EIRP; antenna gain and feeder loss are already included.
    EirpDbw(f64),
}

impl TxPower {
    pub fn dbm(self) -> f64 {
        match self {
            TxPower::Watts(w) => units::watts_to_dbm(w),
            TxPower::Dbm(dbm) => dbm,
            TxPower::EirpDbw(dbw) => units::dbw_to_dbm(dbw),
        }
    }

    pub fn is_eirp(self) -> bool {
        matches!(self, TxPower::EirpDbw(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NrConfig {
    pub numerology: u8,
    pub total_rbs: u32,
    pub band: Band,
    #[serde(default = "default_symbols_per_rb")]
    pub symbols_per_rb: u8,
    #[serde(default = "default_noise_figure")]
    pub noise_figure_db: f64,
    #[serde(default)]
    pub environment: Environment,
}

fn default_symbols_per_rb() -> u8 {
    14
}

fn default_noise_figure() -> f64 {
    DEFAULT_NOISE_FIGURE_DB
}

impl NrConfig {
    /// Subcarrier spacing 15·2^μ kHz.
    pub fn subcarrier_spacing_hz(&self) -> f64 {
        15e3 * 2f64.powi(self.numerology as i32)
    }

    /// One RB spans 12 subcarriers.
    pub fn rb_bandwidth_hz(&self) -> f64 {
        12.0 * self.subcarrier_spacing_hz()
    }

    pub fn frame_ms(&self) -> f64 {
        NR_FRAME_MS
    }

    /// 14 symbols with normal cyclic prefix, 12 with extended.
    pub fn extended_cyclic_prefix(&self) -> bool {
        self.symbols_per_rb == 12
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SatFrameConfig {
    pub n_tot: u32,
    pub frame_s: f64,
    /// Symbols per synchronization message.
    pub n_sync: u32,
    pub sync_messages_per_frame: u32,
    pub n_head: u32,
    pub n_space: u32,
    pub n_slice: u32,
    pub n_block: u32,
    pub gt_db_per_k: f64,
    #[serde(default = "default_slant_range")]
    pub slant_range_m: f64,
}

fn default_slant_range() -> f64 {
    GEO_SLANT_RANGE_M
}

impl SatFrameConfig {
    pub fn sync_overhead_symbols(&self) -> u32 {
        self.sync_messages_per_frame * self.n_sync
    }

    /// Per-frame symbols usable by connections of this slice.
    pub fn budget_symbols(&self) -> u32 {
        self.n_slice.saturating_sub(self.sync_overhead_symbols())
    }

    /// Symbols occupied by a connection holding `blocks` blocks.
    pub fn occupied_symbols(&self, blocks: u32) -> u32 {
        self.n_head + blocks * self.n_block + self.n_space
    }

    /// Smallest footprint a new connection can have (one block).
    pub fn min_footprint_symbols(&self) -> u32 {
        self.occupied_symbols(1)
    }

    /// Fraction of the frame one block occupies in time.
    pub fn block_time_share(&self) -> f64 {
        self.n_block as f64 / self.n_tot as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadioConfig {
    Nr(NrConfig),
    Sat(SatFrameConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApSpec {
    pub name: String,
    pub tx_power: TxPower,
    pub antenna_gain_db: f64,
    pub feeder_loss_db: f64,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub position: Point3,
    pub mobility: Mobility,
    pub radio: RadioConfig,
    pub extra_losses_db: f64,
    /// Visibility threshold for this AP; falls back to the scenario value.
    pub min_power_dbm: Option<f64>,
    pub backhaul_up: bool,
}

impl ApSpec {
    pub fn rat(&self) -> Rat {
        match self.radio {
            RadioConfig::Nr(_) => Rat::NrFdd,
            RadioConfig::Sat(_) => Rat::SatelliteTdma,
        }
    }

    pub fn nr(&self) -> Option<&NrConfig> {
        match &self.radio {
            RadioConfig::Nr(nr) => Some(nr),
            RadioConfig::Sat(_) => None,
        }
    }

    pub fn sat(&self) -> Option<&SatFrameConfig> {
        match &self.radio {
            RadioConfig::Sat(sat) => Some(sat),
            RadioConfig::Nr(_) => None,
        }
    }

    /// Transmit power plus antenna gain minus feeder loss, in dBm.
    pub fn eirp_dbm(&self) -> f64 {
        if self.tx_power.is_eirp() {
            self.tx_power.dbm()
        } else {
            self.tx_power.dbm() + self.antenna_gain_db - self.feeder_loss_db
        }
    }

    /// Two APs interfere when they share RAT and carrier.
    pub fn is_co_channel(&self, other: &ApSpec) -> bool {
        self.rat() == other.rat() && self.carrier_hz == other.carrier_hz
    }

    fn validate(&self, idx: usize) -> Result<(), ScenarioError> {
        let at = |what: &str| invalid(format!("ap {idx} ({}): {what}", self.name));
        if !(self.carrier_hz > 0.0) {
            return Err(at("carrier_hz > 0"));
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(at("bandwidth_hz > 0"));
        }
        if let TxPower::Watts(w) = self.tx_power {
            if !(w > 0.0) {
                return Err(at("tx_power_w > 0"));
            }
        }
        if let Mobility::Intervening {
            max_speed_mps,
            cruise_altitude_m,
        } = self.mobility
        {
            if !(max_speed_mps >= 0.0) || !(cruise_altitude_m >= 0.0) {
                return Err(at(
                    "intervening max_speed_mps >= 0 and cruise_altitude_m >= 0",
                ));
            }
        }
        if self.position.z < 0.0 {
            return Err(at("position z >= 0"));
        }
        match &self.radio {
            RadioConfig::Nr(nr) => {
                if nr.total_rbs == 0 {
                    return Err(at("total_rbs > 0"));
                }
                if nr.symbols_per_rb != 12 && nr.symbols_per_rb != 14 {
                    return Err(at("symbols_per_rb in {12, 14}"));
                }
                if nr.numerology > 6 {
                    return Err(at("numerology <= 6"));
                }
            }
            RadioConfig::Sat(sat) => {
                if sat.n_slice > sat.n_tot {
                    return Err(at("n_slice <= n_tot"));
                }
                if sat.n_block == 0 {
                    return Err(at("n_block > 0"));
                }
                if !(sat.frame_s > 0.0) {
                    return Err(at("frame_s > 0"));
                }
                if sat.sync_overhead_symbols() > sat.n_slice {
                    return Err(at("sync overhead <= n_slice"));
                }
                if !(sat.slant_range_m > 0.0) {
                    return Err(at("slant_range_m > 0"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UeSpec {
    pub requested_bitrate_bps: f64,
    pub min_bitrate_bps: f64,
    pub speed_mps: f64,
    /// Fixed arrival time; drawn from the seeded stream when absent.
    pub arrival_time_s: Option<f64>,
    pub height_m: f64,
    /// Fixed start position; drawn uniformly over the grid when absent.
    pub start_position: Option<Point2>,
    /// Fixed heading; drawn uniformly in [0, 2π) when absent.
    pub heading_rad: Option<f64>,
}

impl UeSpec {
    pub fn paper_default() -> Self {
        Self {
            requested_bitrate_bps: 10e6,
            min_bitrate_bps: 5e6,
            speed_mps: 10.0,
            arrival_time_s: None,
            height_m: DEFAULT_UE_HEIGHT_M,
            start_position: None,
            heading_rad: None,
        }
    }
}

/// What happens to a grant that cannot reach the UE's minimum bitrate when
/// no candidate does better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartialGrantPolicy {
    /// Keep the best partial grant (best-effort); the drop rule applies at
    /// the next connection update.
    #[default]
    Keep,
    /// Return the grant and reject the request for this tick.
    Release,
}

/// When a connected UE looks for another AP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HandoverTrigger {
    /// Only when the served rate falls under the minimum bitrate.
    #[default]
    BelowMinimum,
    /// Also when the served rate falls under the requested bitrate; the UE
    /// then moves only to an AP that grants the full request.
    BelowRequested,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssociationConfig {
    pub strategy: String,
    pub assist_threshold: f64,
    pub partial_grant: PartialGrantPolicy,
    pub handover_trigger: HandoverTrigger,
}

impl Default for AssociationConfig {
    fn default() -> Self {
        Self {
            strategy: DEFAULT_STRATEGY.to_string(),
            assist_threshold: DEFAULT_ASSIST_THRESHOLD,
            partial_grant: PartialGrantPolicy::default(),
            handover_trigger: HandoverTrigger::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub grid_width_m: f64,
    pub grid_height_m: f64,
    pub duration_s: f64,
    pub tick_s: f64,
    pub seed: u64,
    pub rbur_window_ticks: usize,
    pub min_power_dbm: f64,
    pub noise_density_dbm_per_hz: f64,
    pub arrival_window_s: f64,
    pub association: AssociationConfig,
    pub intervention_policy: String,
    pub aps: Vec<ApSpec>,
    pub ues: Vec<UeSpec>,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.grid_width_m > 0.0) || !(self.grid_height_m > 0.0) {
            return Err(invalid("grid dimensions must be > 0"));
        }
        if !(self.tick_s > 0.0) {
            return Err(invalid("tick_s must be > 0"));
        }
        if !(self.duration_s >= self.tick_s) {
            return Err(invalid("duration_s must be >= tick_s"));
        }
        if self.rbur_window_ticks < 1 {
            return Err(invalid("rbur_window_ticks must be >= 1"));
        }
        if !(self.arrival_window_s > 0.0) || self.arrival_window_s > self.duration_s {
            return Err(invalid("arrival_window_s must be in (0, duration_s]"));
        }
        if !(0.0..=1.0).contains(&self.association.assist_threshold) {
            return Err(invalid("assist_threshold must be in [0, 1]"));
        }
        if !self.min_power_dbm.is_finite() {
            return Err(invalid("min_power_dbm must be finite"));
        }
        if self.aps.is_empty() {
            return Err(invalid("at least one AP is required"));
        }
        for (i, ap) in self.aps.iter().enumerate() {
            ap.validate(i)?;
        }
        for (i, ue) in self.ues.iter().enumerate() {
            if !(ue.min_bitrate_bps > 0.0) || ue.min_bitrate_bps > ue.requested_bitrate_bps {
                return Err(invalid(format!(
                    "ue {i}: 0 < min_bitrate_bps <= requested_bitrate_bps"
                )));
            }
            if !(ue.speed_mps >= 0.0) {
                return Err(invalid(format!("ue {i}: speed_mps >= 0")));
            }
            if !(ue.height_m > 0.0) {
                return Err(invalid(format!("ue {i}: height_m > 0")));
            }
            if let Some(t) = ue.arrival_time_s {
                if !(t >= 0.0 && t < self.duration_s) {
                    return Err(invalid(format!(
                        "ue {i}: arrival_time_s in [0, duration_s)"
                    )));
                }
            }
            if let Some(p) = ue.start_position {
                if !(0.0..=self.grid_width_m).contains(&p.x)
                    || !(0.0..=self.grid_height_m).contains(&p.y)
                {
                    return Err(invalid(format!("ue {i}: start position inside the grid")));
                }
            }
        }
        Ok(())
    }

    pub fn ticks(&self) -> u64 {
        (self.duration_s / self.tick_s).round() as u64
    }

    /// Visibility threshold in force for `ap`.
    pub fn ap_min_power_dbm(&self, ap: ApId) -> f64 {
        self.aps[ap.0].min_power_dbm.unwrap_or(self.min_power_dbm)
    }

    pub fn without_mobile_aps(mut self) -> Self {
        self.aps.retain(|ap| !ap.mobility.is_mobile());
        self
    }

    /// Radio entities in the scenario: every AP plus every UE.
    pub fn radio_entity_count(&self) -> usize {
        self.aps.len() + self.ues.len()
    }

    pub fn to_toml(&self) -> Result<String, ScenarioError> {
        toml::to_string(&ScenarioFile::from(self))
            .map_err(|e| ScenarioError::Serialize(e.to_string()))
    }
}

/// Parses and validates a TOML scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| {
        let message = e.message().to_string();
        let key = message
            .split('`')
            .nth(1)
            .map(str::to_string)
            .unwrap_or_else(|| "document".to_string());
        parse_err(key, message)
    })?;
    let scenario = file.into_scenario()?;
    scenario.validate()?;
    Ok(scenario)
}

/// The congestion / service-continuity experiment: a 4 km × 4 km grid, 50
/// UEs, one GEO satellite spot and two aerial NR base stations that start
/// outside the area.
pub fn builtin_paper_scenario() -> Scenario {
    let satellite = ApSpec {
        name: "satellite".to_string(),
        tx_power: TxPower::EirpDbw(62.0),
        antenna_gain_db: 0.0,
        feeder_loss_db: 0.0,
        carrier_hz: 28.4e9,
        bandwidth_hz: 220e6,
        position: Point3::new(2000.0, 2000.0, GEO_SLANT_RANGE_M),
        mobility: Mobility::Static,
        radio: RadioConfig::Sat(SatFrameConfig {
            n_tot: 120_832,
            frame_s: 2e-3,
            n_sync: 288,
            sync_messages_per_frame: 2,
            n_head: 280,
            n_space: 64,
            n_slice: 39_104,
            n_block: 64,
            gt_db_per_k: -9.7,
            slant_range_m: GEO_SLANT_RANGE_M,
        }),
        extra_losses_db: 0.1,
        min_power_dbm: None,
        backhaul_up: true,
    };
    let uav = |name: &str, x: f64, y: f64| ApSpec {
        name: name.to_string(),
        tx_power: TxPower::Watts(15.0),
        antenna_gain_db: 15.0,
        feeder_loss_db: 1.0,
        carrier_hz: 800e6,
        bandwidth_hz: 100e6,
        position: Point3::new(x, y, 200.0),
        mobility: Mobility::Intervening {
            max_speed_mps: UAV_MAX_SPEED_MPS,
            cruise_altitude_m: 200.0,
        },
        radio: RadioConfig::Nr(NrConfig {
            numerology: 2,
            total_rbs: 135,
            band: Band::Fr1,
            symbols_per_rb: 14,
            noise_figure_db: DEFAULT_NOISE_FIGURE_DB,
            environment: Environment::Suburban,
        }),
        extra_losses_db: 0.0,
        min_power_dbm: Some(NR_MIN_POWER_DBM),
        backhaul_up: true,
    };
    Scenario {
        grid_width_m: 4000.0,
        grid_height_m: 4000.0,
        duration_s: DEFAULT_DURATION_S,
        tick_s: DEFAULT_TICK_S,
        seed: DEFAULT_SEED,
        rbur_window_ticks: DEFAULT_RBUR_WINDOW_TICKS,
        min_power_dbm: SCENARIO_MIN_POWER_DBM,
        noise_density_dbm_per_hz: units::THERMAL_NOISE_DBM_PER_HZ,
        arrival_window_s: DEFAULT_ARRIVAL_WINDOW_S,
        association: AssociationConfig {
            handover_trigger: HandoverTrigger::BelowRequested,
            ..AssociationConfig::default()
        },
        intervention_policy: BUILTIN_INTERVENTION_POLICY.to_string(),
        aps: vec![
            satellite,
            uav("uav-west", -UAV_STANDOFF_M, 2000.0),
            uav("uav-east", 4000.0 + UAV_STANDOFF_M, 2000.0),
        ],
        ues: vec![UeSpec::paper_default(); 50],
    }
}

// Builtin values the experiment description leaves open.
const SCENARIO_MIN_POWER_DBM: f64 = -125.0;
const NR_MIN_POWER_DBM: f64 = -70.0;
const UAV_MAX_SPEED_MPS: f64 = 50.0;
const UAV_STANDOFF_M: f64 = 2000.0;
const BUILTIN_INTERVENTION_POLICY: &str = "cluster";

/// Names accepted by `builtin`.
pub const BUILTIN_NAMES: &[&str] = &["paper"];

pub fn builtin(name: &str) -> Option<Scenario> {
    match name {
        "paper" => Some(builtin_paper_scenario()),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Document schema

fn d_duration() -> f64 {
    DEFAULT_DURATION_S
}
fn d_tick() -> f64 {
    DEFAULT_TICK_S
}
fn d_seed() -> u64 {
    DEFAULT_SEED
}
fn d_window() -> usize {
    DEFAULT_RBUR_WINDOW_TICKS
}
fn d_noise_density() -> f64 {
    units::THERMAL_NOISE_DBM_PER_HZ
}
fn d_arrival_window() -> f64 {
    DEFAULT_ARRIVAL_WINDOW_S
}
fn d_strategy() -> String {
    DEFAULT_STRATEGY.to_string()
}
fn d_assist() -> f64 {
    DEFAULT_ASSIST_THRESHOLD
}
fn d_policy() -> String {
    DEFAULT_INTERVENTION_POLICY.to_string()
}
fn d_true() -> bool {
    true
}
fn d_ue_height() -> f64 {
    DEFAULT_UE_HEIGHT_M
}
fn d_static() -> Mobility {
    Mobility::Static
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    grid_width_m: f64,
    grid_height_m: f64,
    #[serde(default = "d_duration")]
    duration_s: f64,
    #[serde(default = "d_tick")]
    tick_s: f64,
    #[serde(default = "d_seed")]
    seed: u64,
    #[serde(default = "d_window")]
    rbur_window_ticks: usize,
    min_power_dbm: f64,
    #[serde(default = "d_noise_density")]
    noise_density_dbm_per_hz: f64,
    #[serde(default = "d_arrival_window")]
    arrival_window_s: f64,
    #[serde(default = "d_strategy")]
    association_strategy: String,
    #[serde(default = "d_assist")]
    assist_threshold: f64,
    #[serde(default)]
    partial_grant_policy: PartialGrantPolicy,
    #[serde(default)]
    handover_trigger: HandoverTrigger,
    #[serde(default = "d_policy")]
    intervention_policy: String,
    #[serde(default)]
    ap: Vec<ApFile>,
    #[serde(default)]
    ue_group: Vec<UeGroupFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ApFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    rat: Rat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tx_power_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tx_power_dbm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eirp_dbw: Option<f64>,
    #[serde(default)]
    antenna_gain_db: f64,
    #[serde(default)]
    feeder_loss_db: f64,
    carrier_hz: f64,
    bandwidth_hz: f64,
    position_m: [f64; 3],
    #[serde(default)]
    extra_losses_db: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    min_power_dbm: Option<f64>,
    #[serde(default = "d_true")]
    backhaul_up: bool,
    #[serde(default = "d_static")]
    mobility: Mobility,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nr: Option<NrConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sat: Option<SatFrameConfig>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UeGroupFile {
    count: usize,
    requested_bitrate_bps: f64,
    min_bitrate_bps: f64,
    speed_mps: f64,
    #[serde(default = "d_ue_height")]
    height_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    arrival_time_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    position_m: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    heading_rad: Option<f64>,
}

impl ScenarioFile {
    fn into_scenario(self) -> Result<Scenario, ScenarioError> {
        let aps = self
            .ap
            .into_iter()
            .enumerate()
            .map(|(i, ap)| ap.into_spec(i))
            .collect::<Result<Vec<_>, _>>()?;
        let mut ues = Vec::new();
        for group in self.ue_group {
            let spec = UeSpec {
                requested_bitrate_bps: group.requested_bitrate_bps,
                min_bitrate_bps: group.min_bitrate_bps,
                speed_mps: group.speed_mps,
                arrival_time_s: group.arrival_time_s,
                height_m: group.height_m,
                start_position: group.position_m.map(|[x, y]| Point2::new(x, y)),
                heading_rad: group.heading_rad,
            };
            ues.extend(std::iter::repeat_n(spec, group.count));
        }
        Ok(Scenario {
            grid_width_m: self.grid_width_m,
            grid_height_m: self.grid_height_m,
            duration_s: self.duration_s,
            tick_s: self.tick_s,
            seed: self.seed,
            rbur_window_ticks: self.rbur_window_ticks,
            min_power_dbm: self.min_power_dbm,
            noise_density_dbm_per_hz: self.noise_density_dbm_per_hz,
            arrival_window_s: self.arrival_window_s,
            association: AssociationConfig {
                strategy: self.association_strategy,
                assist_threshold: self.assist_threshold,
                partial_grant: self.partial_grant_policy,
                handover_trigger: self.handover_trigger,
            },
            intervention_policy: self.intervention_policy,
            aps,
            ues,
        })
    }
}

impl ApFile {
    fn into_spec(self, idx: usize) -> Result<ApSpec, ScenarioError> {
        let key = |k: &str| format!("ap[{idx}].{k}");
        let tx_power = match (self.tx_power_w, self.tx_power_dbm, self.eirp_dbw) {
            (Some(w), None, None) => TxPower::Watts(w),
            (None, Some(dbm), None) => TxPower::Dbm(dbm),
            (None, None, Some(dbw)) => TxPower::EirpDbw(dbw),
            _ => {
                return Err(parse_err(
                    key("tx_power_w"),
                    "exactly one of tx_power_w, tx_power_dbm, eirp_dbw is required",
                ))
            }
        };
        let radio = match (self.rat, self.nr, self.sat) {
            (Rat::NrFdd, Some(nr), None) => RadioConfig::Nr(nr),
            (Rat::SatelliteTdma, None, Some(sat)) => RadioConfig::Sat(sat),
            (Rat::NrFdd, _, _) => {
                return Err(parse_err(
                    key("nr"),
                    "rat nr_fdd needs an [ap.nr] section and no [ap.sat]",
                ))
            }
            (Rat::SatelliteTdma, _, _) => {
                return Err(parse_err(
                    key("sat"),
                    "rat satellite_tdma needs an [ap.sat] section and no [ap.nr]",
                ))
            }
        };
        let [x, y, z] = self.position_m;
        Ok(ApSpec {
            name: self.name.unwrap_or_else(|| format!("ap{idx}")),
            tx_power,
            antenna_gain_db: self.antenna_gain_db,
            feeder_loss_db: self.feeder_loss_db,
            carrier_hz: self.carrier_hz,
            bandwidth_hz: self.bandwidth_hz,
            position: Point3::new(x, y, z),
            mobility: self.mobility,
            radio,
            extra_losses_db: self.extra_losses_db,
            min_power_dbm: self.min_power_dbm,
            backhaul_up: self.backhaul_up,
        })
    }
}

impl From<&Scenario> for ScenarioFile {
    fn from(s: &Scenario) -> Self {
        let ap = s
            .aps
            .iter()
            .map(|ap| {
                let (tx_power_w, tx_power_dbm, eirp_dbw) = match ap.tx_power {
                    TxPower::Watts(w) => (Some(w), None, None),
                    TxPower::Dbm(d) => (None, Some(d), None),
                    TxPower::EirpDbw(d) => (None, None, Some(d)),
                };
                let (nr, sat) = match ap.radio {
                    RadioConfig::Nr(nr) => (Some(nr), None),
                    RadioConfig::Sat(sat) => (None, Some(sat)),
                };
                ApFile {
                    name: Some(ap.name.clone()),
                    rat: ap.rat(),
                    tx_power_w,
                    tx_power_dbm,
                    eirp_dbw,
                    antenna_gain_db: ap.antenna_gain_db,
                    feeder_loss_db: ap.feeder_loss_db,
                    carrier_hz: ap.carrier_hz,
                    bandwidth_hz: ap.bandwidth_hz,
                    position_m: [ap.position.x, ap.position.y, ap.position.z],
                    extra_losses_db: ap.extra_losses_db,
                    min_power_dbm: ap.min_power_dbm,
                    backhaul_up: ap.backhaul_up,
                    mobility: ap.mobility,
                    nr,
                    sat,
                }
            })
            .collect();

        // Consecutive identical UEs collapse into one group.
        let mut ue_group: Vec<UeGroupFile> = Vec::new();
        let mut i = 0;
        while i < s.ues.len() {
            let spec = &s.ues[i];
            let mut count = 1;
            while i + count < s.ues.len() && s.ues[i + count] == *spec {
                count += 1;
            }
            ue_group.push(UeGroupFile {
                count,
                requested_bitrate_bps: spec.requested_bitrate_bps,
                min_bitrate_bps: spec.min_bitrate_bps,
                speed_mps: spec.speed_mps,
                height_m: spec.height_m,
                arrival_time_s: spec.arrival_time_s,
                position_m: spec.start_position.map(|p| [p.x, p.y]),
                heading_rad: spec.heading_rad,
            });
            i += count;
        }

        ScenarioFile {
            grid_width_m: s.grid_width_m,
            grid_height_m: s.grid_height_m,
            duration_s: s.duration_s,
            tick_s: s.tick_s,
            seed: s.seed,
            rbur_window_ticks: s.rbur_window_ticks,
            min_power_dbm: s.min_power_dbm,
            noise_density_dbm_per_hz: s.noise_density_dbm_per_hz,
            arrival_window_s: s.arrival_window_s,
            association_strategy: s.association.strategy.clone(),
            assist_threshold: s.association.assist_threshold,
            partial_grant_policy: s.association.partial_grant,
            handover_trigger: s.association.handover_trigger,
            intervention_policy: s.intervention_policy.clone(),
            ap,
            ue_group,
        }
    }
}
