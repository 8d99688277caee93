//! Physical constants and dB / linear conversions.

pub const SPEED_OF_LIGHT_MPS: f64 = 299_792_458.0;

/// Boltzmann constant in J/K.
pub const BOLTZMANN_J_PER_K: f64 = 1.380_649e-23;

/// Thermal noise density at 290 K used for terrestrial receivers.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

/// 10·log10(k) in dBW/(K·Hz), about -228.6.
pub fn boltzmann_dbw_per_k_hz() -> f64 {
    10.0 * BOLTZMANN_J_PER_K.log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    db_to_linear(dbm)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    linear_to_db(mw)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    linear_to_db(watts / 1e-3)
}

pub fn dbw_to_dbm(dbw: f64) -> f64 {
    dbw + 30.0
}
