use super::params::{PlantParams, Pump};
use crate::error::{Error, Result};

pub const WATER_DENSITY: f64 = 1000.0;
pub const GRAVITY: f64 = 9.8;

/// Aeration energy (kWh) needed to supply `oxygen_uptake` kg O₂ while
/// holding `dissolved_oxygen`; transfer efficiency scales with the
/// saturation deficit.
pub fn aeration_energy(oxygen_uptake: f64, dissolved_oxygen: f64, p: &PlantParams) -> Result<f64> {
    if !(dissolved_oxygen < p.do_sat) {
        return Err(Error::InvalidArgument(format!(
            "DO {dissolved_oxygen} g/m³ must stay below saturation {}",
            p.do_sat
        )));
    }
    if oxygen_uptake < 0.0 || dissolved_oxygen < 0.0 {
        return Err(Error::InvalidArgument("oxygen uptake and DO must be non-negative".into()));
    }
    let driving_force = (p.do_sat - dissolved_oxygen) / p.do_sat;
    Ok(oxygen_uptake / (p.sae * driving_force))
}

/// Pump power in kW for a flow in m³/s.
pub fn pump_energy(flow: f64, pump: &Pump) -> f64 {
    let head = pump.h_static + pump.h_friction;
    WATER_DENSITY * GRAVITY * flow * head / (1000.0 * pump.efficiency)
}
