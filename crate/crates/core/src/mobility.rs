//! UE straight-line motion with specular reflection at the grid boundary,
//! and the controller that flies intervening APs toward distressed UEs.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use rand::Rng;

use crate::geometry::{Point2, Point3};
use crate::ids::ApId;
use crate::registry::Registry;
use crate::scenario::{ApSpec, Mobility, Scenario};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x_m: f64,
    pub y_m: f64,
    pub z_m: f64,
    pub heading_rad: f64,
    pub speed_mps: f64,
}

impl Pose {
    pub fn ground(&self) -> Point2 {
        Point2::new(self.x_m, self.y_m)
    }

    pub fn position(&self) -> Point3 {
        Point3::new(self.x_m, self.y_m, self.z_m)
    }

    pub fn at(p: Point3) -> Self {
        Self {
            x_m: p.x,
            y_m: p.y,
            z_m: p.z,
            heading_rad: 0.0,
            speed_mps: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridDims {
    pub width_m: f64,
    pub height_m: f64,
}

impl GridDims {
    pub fn of(scenario: &Scenario) -> Self {
        Self {
            width_m: scenario.grid_width_m,
            height_m: scenario.grid_height_m,
        }
    }

    pub fn contains(&self, p: Point2) -> bool {
        (0.0..=self.width_m).contains(&p.x) && (0.0..=self.height_m).contains(&p.y)
    }
}

/// Uniform start positions, one per UE; fixed positions in the spec still
/// consume their draws.
pub fn sample_positions<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Vec<Point2> {
    scenario
        .ues
        .iter()
        .map(|ue| {
            let x = rng.gen_range(0.0..=scenario.grid_width_m);
            let y = rng.gen_range(0.0..=scenario.grid_height_m);
            ue.start_position.unwrap_or(Point2::new(x, y))
        })
        .collect()
}

pub fn sample_headings<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Vec<f64> {
    scenario
        .ues
        .iter()
        .map(|ue| {
            let h = rng.gen_range(0.0..TAU);
            ue.heading_rad.unwrap_or(h)
        })
        .collect()
}

pub fn poses_from(scenario: &Scenario, positions: &[Point2], headings: &[f64]) -> Vec<Pose> {
    scenario
        .ues
        .iter()
        .zip(positions.iter().zip(headings))
        .map(|(ue, (p, &h))| Pose {
            x_m: p.x,
            y_m: p.y,
            z_m: ue.height_m,
            heading_rad: h,
            speed_mps: ue.speed_mps,
        })
        .collect()
}

/// Independent uniform positions over the grid and uniform headings.
pub fn init_ue_poses<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Vec<Pose> {
    let positions = sample_positions(scenario, rng);
    let headings = sample_headings(scenario, rng);
    poses_from(scenario, &positions, &headings)
}

/// Folds an unbounded coordinate into [0, len]; returns the folded value and
/// whether the direction of travel ends up mirrored.
fn fold(coord: f64, len: f64) -> (f64, bool) {
    let m = coord.rem_euclid(2.0 * len);
    if m <= len {
        (m, false)
    } else {
        (2.0 * len - m, true)
    }
}

fn normalize_heading(h: f64) -> f64 {
    let h = h.rem_euclid(TAU);
    if h >= TAU {
        0.0
    } else {
        h
    }
}

/// Advances a UE in a straight line, reflecting off the grid walls.
pub fn step_ue(pose: Pose, dt: f64, grid: GridDims) -> Pose {
    if pose.speed_mps == 0.0 || dt <= 0.0 {
        return pose;
    }
    let travel = pose.speed_mps * dt;
    let nx = pose.x_m + travel * pose.heading_rad.cos();
    let ny = pose.y_m + travel * pose.heading_rad.sin();
    let (x, flip_x) = fold(nx, grid.width_m);
    let (y, flip_y) = fold(ny, grid.height_m);
    let heading_rad = match (flip_x, flip_y) {
        (false, false) => pose.heading_rad,
        (true, false) => normalize_heading(PI - pose.heading_rad),
        (false, true) => normalize_heading(-pose.heading_rad),
        (true, true) => normalize_heading(pose.heading_rad + PI),
    };
    Pose {
        x_m: x,
        y_m: y,
        heading_rad,
        ..pose
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterventionMode {
    Loitering,
    Transit,
    Serving,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterventionState {
    pub mode: InterventionMode,
    /// Present exactly in `Transit`.
    pub target: Option<Point2>,
}

impl InterventionState {
    pub const LOITERING: Self = Self {
        mode: InterventionMode::Loitering,
        target: None,
    };
}

impl Default for InterventionState {
    fn default() -> Self {
        Self::LOITERING
    }
}

/// One UE as seen by the intervention controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemandSample {
    pub position: Point2,
    /// Connected at or above its minimum bitrate.
    pub served: bool,
    /// AP the UE is connected to, if any.
    pub serving: Option<ApId>,
}

fn distressed(demand: &[DemandSample]) -> impl Iterator<Item = Point2> + '_ {
    demand.iter().filter(|d| !d.served).map(|d| d.position)
}

/// Moves an AP toward `target` at no more than `max_speed_mps`, flying at
/// `cruise_altitude_m`. With no target the AP holds position.
pub fn fly_toward(
    pose: Pose,
    target: Option<Point2>,
    dt: f64,
    max_speed_mps: f64,
    cruise_altitude_m: f64,
) -> (Pose, InterventionState) {
    let Some(target) = target else {
        return (
            Pose {
                speed_mps: 0.0,
                ..pose
            },
            InterventionState::LOITERING,
        );
    };
    let here = pose.ground();
    let dist = here.distance(target);
    let reach = max_speed_mps * dt;
    if dist <= reach {
        let heading_rad = if dist > 0.0 {
            normalize_heading((target.y - here.y).atan2(target.x - here.x))
        } else {
            pose.heading_rad
        };
        let moved = Pose {
            x_m: target.x,
            y_m: target.y,
            z_m: cruise_altitude_m,
            heading_rad,
            speed_mps: if dt > 0.0 { dist / dt } else { 0.0 },
        };
        return (
            moved,
            InterventionState {
                mode: InterventionMode::Serving,
                target: None,
            },
        );
    }
    let ux = (target.x - here.x) / dist;
    let uy = (target.y - here.y) / dist;
    let moved = Pose {
        x_m: here.x + ux * reach,
        y_m: here.y + uy * reach,
        z_m: cruise_altitude_m,
        heading_rad: normalize_heading(uy.atan2(ux)),
        speed_mps: max_speed_mps,
    };
    (
        moved,
        InterventionState {
            mode: InterventionMode::Transit,
            target: Some(target),
        },
    )
}

/// Single-AP controller: heads for the centroid of every UE that is unserved
/// or below its minimum bitrate, and loiters when there is none.
pub fn step_mobile_ap(
    ap_pose: Pose,
    _state: InterventionState,
    demand: &[DemandSample],
    dt: f64,
    spec: &ApSpec,
) -> (Pose, InterventionState) {
    let Mobility::Intervening {
        max_speed_mps,
        cruise_altitude_m,
    } = spec.mobility
    else {
        return (ap_pose, InterventionState::LOITERING);
    };
    let target = Point2::centroid(distressed(demand));
    fly_toward(ap_pose, target, dt, max_speed_mps, cruise_altitude_m)
}

/// Chooses where each intervening AP should head, given their ground
/// positions and the current demand picture.
pub trait InterventionPolicy: Send + Sync {
    fn name(&self) -> &'static str;
    fn targets(&self, aps: &[(ApId, Point2)], demand: &[DemandSample]) -> Vec<Option<Point2>>;
}

/// Index of the AP in `aps` closest to `p`; ties go to the lower index.
fn nearest(aps: &[(ApId, Point2)], p: Point2) -> Option<usize> {
    aps.iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.distance(p).total_cmp(&b.1 .1.distance(p)))
        .map(|(i, _)| i)
}

/// Every intervening AP heads for the centroid of all distressed UEs.
pub struct CentroidPolicy;

impl InterventionPolicy for CentroidPolicy {
    fn name(&self) -> &'static str {
        "centroid"
    }

    fn targets(&self, aps: &[(ApId, Point2)], demand: &[DemandSample]) -> Vec<Option<Point2>> {
        let c = Point2::centroid(distressed(demand));
        vec![c; aps.len()]
    }
}

/// Distressed UEs are split by nearest intervening AP; each AP heads for
/// the centroid of its own share. Ties go to the lower AP index.
pub struct NearestCentroidPolicy;

impl InterventionPolicy for NearestCentroidPolicy {
    fn name(&self) -> &'static str {
        "nearest_centroid"
    }

    fn targets(&self, aps: &[(ApId, Point2)], demand: &[DemandSample]) -> Vec<Option<Point2>> {
        let mut shares: Vec<Vec<Point2>> = vec![Vec::new(); aps.len()];
        for p in distressed(demand) {
            if let Some(i) = nearest(aps, p) {
                shares[i].push(p);
            }
        }
        shares.into_iter().map(Point2::centroid).collect()
    }
}

/// Like [`NearestCentroidPolicy`], but each AP also keeps the UEs it
/// already serves in its share, so it stays over its own users once the
/// distress is cleared.
pub struct ClusterPolicy;

impl InterventionPolicy for ClusterPolicy {
    fn name(&self) -> &'static str {
        "cluster"
    }

    fn targets(&self, aps: &[(ApId, Point2)], demand: &[DemandSample]) -> Vec<Option<Point2>> {
        let mut shares: Vec<Vec<Point2>> = vec![Vec::new(); aps.len()];
        for d in demand {
            let owner = if d.served {
                d.serving
                    .and_then(|ap| aps.iter().position(|(id, _)| *id == ap))
            } else {
                nearest(aps, d.position)
            };
            if let Some(i) = owner {
                shares[i].push(d.position);
            }
        }
        shares.into_iter().map(Point2::centroid).collect()
    }
}

pub fn intervention_registry() -> Registry<dyn InterventionPolicy> {
    let mut r: Registry<dyn InterventionPolicy> = Registry::new("intervention policy");
    r.register("centroid", Arc::new(CentroidPolicy));
    r.register("nearest_centroid", Arc::new(NearestCentroidPolicy));
    r.register("cluster", Arc::new(ClusterPolicy));
    r
}
