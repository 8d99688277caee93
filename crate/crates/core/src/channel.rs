//! Path loss, received power, visibility and noise for UE-AP pairs.

use thiserror::Error;

use crate::geometry::Point3;
use crate::scenario::{ApSpec, Environment, RadioConfig};
use crate::units::{self, SPEED_OF_LIGHT_MPS};

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("free-space path loss needs distance > 0 and frequency > 0 (got {distance_m} m, {carrier_hz} Hz)")]
    Domain { distance_m: f64, carrier_hz: f64 },
}

/// Free-space path loss 20·log10(4π·d·f/c).
pub fn fspl_db(distance_m: f64, carrier_hz: f64) -> Result<f64, ChannelError> {
    if !(distance_m > 0.0) || !(carrier_hz > 0.0) {
        return Err(ChannelError::Domain {
            distance_m,
            carrier_hz,
        });
    }
    Ok(20.0 * (4.0 * std::f64::consts::PI * distance_m * carrier_hz / SPEED_OF_LIGHT_MPS).log10())
}

pub const HATA_MIN_DISTANCE_M: f64 = 20.0;
pub const HATA_MIN_BS_HEIGHT_M: f64 = 30.0;
pub const HATA_MAX_BS_HEIGHT_M: f64 = 200.0;

/// Which inputs fell outside the COST-231-Hata calibration range.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HataFlags {
    pub distance_clamped: bool,
    pub bs_height_clamped: bool,
    pub frequency_out_of_range: bool,
    pub ue_height_out_of_range: bool,
}

impl HataFlags {
    pub fn any(&self) -> bool {
        self.distance_clamped
            || self.bs_height_clamped
            || self.frequency_out_of_range
            || self.ue_height_out_of_range
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HataEval {
    pub loss_db: f64,
    pub flags: HataFlags,
}

/// Mobile antenna correction a(h_ue) for small and medium cities.
pub fn hata_ue_correction_db(carrier_mhz: f64, h_ue_m: f64) -> f64 {
    let lf = carrier_mhz.log10();
    (1.1 * lf - 0.7) * h_ue_m - (1.56 * lf - 0.8)
}

/// COST-231-Hata loss with clamped inputs and validity flags.
pub fn cost_hata(
    distance_m: f64,
    carrier_hz: f64,
    h_bs_m: f64,
    h_ue_m: f64,
    environment: Environment,
) -> HataEval {
    let mut flags = HataFlags::default();
    let d = if distance_m < HATA_MIN_DISTANCE_M {
        flags.distance_clamped = true;
        HATA_MIN_DISTANCE_M
    } else {
        distance_m
    };
    let h_bs = if !(HATA_MIN_BS_HEIGHT_M..=HATA_MAX_BS_HEIGHT_M).contains(&h_bs_m) {
        flags.bs_height_clamped = true;
        h_bs_m.clamp(HATA_MIN_BS_HEIGHT_M, HATA_MAX_BS_HEIGHT_M)
    } else {
        h_bs_m
    };
    let f_mhz = carrier_hz / 1e6;
    flags.frequency_out_of_range = !(1500.0..=2000.0).contains(&f_mhz);
    flags.ue_height_out_of_range = !(1.0..=10.0).contains(&h_ue_m);

    let c_m = match environment {
        Environment::Suburban => 0.0,
        Environment::Urban => 3.0,
    };
    let loss_db =
        46.3 + 33.9 * f_mhz.log10() - 13.82 * h_bs.log10() - hata_ue_correction_db(f_mhz, h_ue_m)
            + (44.9 - 6.55 * h_bs.log10()) * (d / 1000.0).log10()
            + c_m;
    HataEval { loss_db, flags }
}

pub fn cost_hata_db(
    distance_m: f64,
    carrier_hz: f64,
    h_bs_m: f64,
    h_ue_m: f64,
    environment: Environment,
) -> f64 {
    cost_hata(distance_m, carrier_hz, h_bs_m, h_ue_m, environment).loss_db
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub path_loss_db: f64,
    /// Total received power over the carrier.
    pub rx_power_dbm: f64,
    /// Received power falling into one allocation unit (one RB for NR; the
    /// whole carrier for a satellite block).
    pub unit_rx_power_dbm: f64,
    /// Noise over the allocation-unit reference bandwidth.
    pub noise_dbm: f64,
    pub visible: bool,
    pub hata_flags: HataFlags,
}

/// Reference noise bandwidth of a satellite TDMA block: its time share of the
/// carrier.
pub fn sat_block_bandwidth_hz(ap: &ApSpec) -> Option<f64> {
    ap.sat().map(|s| ap.bandwidth_hz * s.block_time_share())
}

/// Noise density referred to the isotropic received power for a terminal
/// with the given G/T, in dBm/Hz.
pub fn gt_noise_density_dbm_per_hz(gt_db_per_k: f64) -> f64 {
    units::dbw_to_dbm(units::boltzmann_dbw_per_k_hz() - gt_db_per_k)
}

/// Carrier-to-noise density C/N0 in dB-Hz.
pub fn carrier_to_noise_density_db_hz(rx_power_dbm: f64, gt_db_per_k: f64) -> f64 {
    rx_power_dbm - gt_noise_density_dbm_per_hz(gt_db_per_k)
}

/// Link budget between a UE at `ue` and an AP at `ap_pos` described by `ap`.
pub fn link_budget(
    ue: Point3,
    ap_pos: Point3,
    ap: &ApSpec,
    min_power_dbm: f64,
    noise_density_dbm_per_hz: f64,
) -> LinkBudget {
    let eirp = ap.eirp_dbm();
    let (path_loss_db, hata_flags, unit_share_db, noise_dbm) = match &ap.radio {
        RadioConfig::Sat(sat) => {
            // GEO slant range dominates; grid motion is negligible.
            let pl = fspl_db(sat.slant_range_m, ap.carrier_hz).expect("validated slant range");
            let b = ap.bandwidth_hz * sat.block_time_share();
            let noise = gt_noise_density_dbm_per_hz(sat.gt_db_per_k) + units::linear_to_db(b);
            (pl, HataFlags::default(), 0.0, noise)
        }
        RadioConfig::Nr(nr) => {
            let eval = cost_hata(
                ue.horizontal_distance(ap_pos),
                ap.carrier_hz,
                ap_pos.z,
                ue.z,
                nr.environment,
            );
            let noise = noise_density_dbm_per_hz
                + nr.noise_figure_db
                + units::linear_to_db(nr.rb_bandwidth_hz());
            (
                eval.loss_db,
                eval.flags,
                units::linear_to_db(nr.total_rbs as f64),
                noise,
            )
        }
    };
    let rx_power_dbm = eirp - path_loss_db - ap.extra_losses_db;
    LinkBudget {
        path_loss_db,
        rx_power_dbm,
        unit_rx_power_dbm: rx_power_dbm - unit_share_db,
        noise_dbm,
        visible: rx_power_dbm >= min_power_dbm,
        hata_flags,
    }
}

/// P_ij = P_j·G_j·L_j·L_ij evaluated in the linear domain (losses as
/// attenuation factors ≤ 1), in mW.
pub fn rx_power_linear_mw(ap: &ApSpec, path_loss_db: f64) -> f64 {
    let p = units::dbm_to_mw(ap.tx_power.dbm());
    let (g, l) = if ap.tx_power.is_eirp() {
        (1.0, 1.0)
    } else {
        (
            units::db_to_linear(ap.antenna_gain_db),
            units::db_to_linear(-ap.feeder_loss_db),
        )
    };
    p * g * l * units::db_to_linear(-path_loss_db) * units::db_to_linear(-ap.extra_losses_db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::builtin_paper_scenario;

    // Hand-evaluated: 20·log10(4π·1·1e9/299792458) = 20·log10(41.9169) = 32.4478.
    const FSPL_1M_1GHZ: f64 = 32.4478;
    // a(1.5) at 800 MHz: (1.1·2.90309 − 0.7)·1.5 − (1.56·2.90309 − 0.8) = 0.01128.
    const A_HUE_800: f64 = 0.01128;
    // (44.9 − 6.55·log10 200)·log10 2 = 29.8286·0.30103 = 8.9793.
    const HATA_DOUBLING_200: f64 = 8.9793;

    #[test]
    fn fspl_reference_points() {
        assert!((fspl_db(1.0, 1e9).unwrap() - FSPL_1M_1GHZ).abs() < 0.01);
        let geo = fspl_db(35_786e3, 28.4e9).unwrap();
        assert!((geo - 212.6).abs() < 0.1, "{geo}");
    }

    #[test]
    fn fspl_doubling_adds_six_db() {
        let d = fspl_db(2000.0, 28.4e9).unwrap() - fspl_db(1000.0, 28.4e9).unwrap();
        assert!((d - 20.0 * 2f64.log10()).abs() < 1e-9);
        assert!((d - 6.02).abs() < 0.001);
    }

    #[test]
    fn fspl_domain_errors() {
        assert!(fspl_db(0.0, 1e9).is_err());
        assert!(fspl_db(1.0, -1.0).is_err());
    }

    #[test]
    fn hata_ue_correction_at_800_mhz() {
        assert!((hata_ue_correction_db(800.0, 1.5) - A_HUE_800).abs() < 0.005);
    }

    #[test]
    fn hata_distance_doubling() {
        let near = cost_hata_db(1000.0, 800e6, 200.0, 1.5, Environment::Suburban);
        let far = cost_hata_db(2000.0, 800e6, 200.0, 1.5, Environment::Suburban);
        assert!((far - near - HATA_DOUBLING_200).abs() < 0.02);
    }

    #[test]
    fn hata_urban_adds_three_db() {
        let s = cost_hata_db(1500.0, 800e6, 100.0, 1.5, Environment::Suburban);
        let u = cost_hata_db(1500.0, 800e6, 100.0, 1.5, Environment::Urban);
        assert!((u - s - 3.0).abs() < 1e-12);
    }

    #[test]
    fn hata_clamps_and_flags() {
        let e = cost_hata(5.0, 800e6, 500.0, 1.5, Environment::Suburban);
        assert!(e.flags.distance_clamped && e.flags.bs_height_clamped);
        assert!(e.flags.frequency_out_of_range);
        let clamped = cost_hata_db(20.0, 800e6, 200.0, 1.5, Environment::Suburban);
        assert_eq!(e.loss_db, clamped);
        let ok = cost_hata(2000.0, 1800e6, 50.0, 1.5, Environment::Urban);
        assert!(!ok.flags.any());
    }

    #[test]
    fn nr_eirp_equivalent() {
        let s = builtin_paper_scenario();
        let uav = &s.aps[1];
        assert!((uav.tx_power.dbm() - 41.76).abs() < 0.005);
        assert!((uav.eirp_dbm() - 55.76).abs() < 0.005);
    }

    #[test]
    fn satellite_carrier_to_noise_density() {
        let s = builtin_paper_scenario();
        let sat = &s.aps[0];
        let b = link_budget(
            Point3::new(10.0, 10.0, 1.5),
            sat.position,
            sat,
            -200.0,
            -174.0,
        );
        let cn0 = carrier_to_noise_density_db_hz(b.rx_power_dbm, -9.7);
        assert!((cn0 - 68.2).abs() < 0.2, "{cn0}");
        assert!(b.visible);
    }

    #[test]
    fn db_and_linear_received_power_agree() {
        let s = builtin_paper_scenario();
        for ap in &s.aps {
            for d in [50.0, 700.0, 3000.0] {
                let b = link_budget(
                    Point3::new(0.0, 0.0, 1.5),
                    Point3::new(d, 0.0, ap.position.z),
                    ap,
                    -200.0,
                    -174.0,
                );
                let lin = rx_power_linear_mw(ap, b.path_loss_db);
                let db = units::dbm_to_mw(b.rx_power_dbm);
                assert!(((lin - db) / db).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_loss_gives_eirp() {
        let s = builtin_paper_scenario();
        let uav = &s.aps[1];
        let lin = rx_power_linear_mw(uav, 0.0);
        assert!((units::mw_to_dbm(lin) - uav.eirp_dbm()).abs() < 1e-9);
    }

    #[test]
    fn visibility_is_threshold_predicate() {
        let s = builtin_paper_scenario();
        let uav = &s.aps[1];
        let ue = Point3::new(0.0, 0.0, 1.5);
        let pos = Point3::new(1500.0, 0.0, 200.0);
        let b = link_budget(ue, pos, uav, -200.0, -174.0);
        let at = link_budget(ue, pos, uav, b.rx_power_dbm, -174.0);
        assert!(at.visible);
        let above = link_budget(ue, pos, uav, b.rx_power_dbm + 1e-9, -174.0);
        assert!(!above.visible);
    }
}
