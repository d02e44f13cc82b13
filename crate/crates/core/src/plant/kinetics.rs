use serde::{Deserialize, Serialize};

use super::params::Kinetics;

/// Concentrations in one reactor (g/m³; COD basis for SS and particulates).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TankState {
    pub ss: f64,
    pub snh: f64,
    pub sno: f64,
    pub spo: f64,
    pub xh: f64,
    pub xa: f64,
    pub xi: f64,
}

pub const TANK_VARIABLES: [&str; 7] = ["SS", "SNH", "SNO", "SPO", "XH", "XA", "XI"];

impl TankState {
    pub fn to_array(self) -> [f64; 7] {
        [self.ss, self.snh, self.sno, self.spo, self.xh, self.xa, self.xi]
    }

    pub fn from_array(a: [f64; 7]) -> Self {
        Self { ss: a[0], snh: a[1], sno: a[2], spo: a[3], xh: a[4], xa: a[5], xi: a[6] }
    }

    pub fn particulate_cod(&self) -> f64 {
        self.xh + self.xa + self.xi
    }
}

/// Process rates in g/m³/d (growth and decay expressed as biomass COD).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ProcessRates {
    pub aerobic_growth: f64,
    pub anoxic_growth: f64,
    pub nitrification: f64,
    pub decay_heterotrophs: f64,
    pub decay_autotrophs: f64,
    /// Aerobic phosphate uptake into sludge, g P/m³/d.
    pub phosphate_uptake: f64,
}

impl ProcessRates {
    /// N oxidized to nitrate, g N/m³/d.
    pub fn nitrified_n(&self, k: &Kinetics) -> f64 {
        self.nitrification / k.y_a
    }

    /// Oxygen demand, g O₂/m³/d.
    pub fn oxygen_uptake(&self, k: &Kinetics) -> f64 {
        (1.0 - k.y_h) / k.y_h * self.aerobic_growth + 4.57 / k.y_a * self.nitrification
    }

    /// Nitrate-N reduced by anoxic growth, g N/m³/d.
    pub fn denitrified_n(&self, k: &Kinetics) -> f64 {
        (1.0 - k.y_h) / (2.86 * k.y_h) * self.anoxic_growth
    }
}

fn monod(s: f64, k: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        s / (k + s)
    }
}

pub fn process_rates(tank: &TankState, dissolved_oxygen: f64, k: &Kinetics) -> ProcessRates {
    let substrate = monod(tank.ss, k.k_s);
    let oxygen_h = monod(dissolved_oxygen, k.k_oh);
    let oxygen_inhibition = k.k_oh / (k.k_oh + dissolved_oxygen.max(0.0));
    ProcessRates {
        aerobic_growth: k.mu_h * substrate * oxygen_h * tank.xh,
        anoxic_growth: k.mu_h * k.eta_g * substrate * oxygen_inhibition * monod(tank.sno, k.k_no) * tank.xh,
        nitrification: k.mu_a * monod(tank.snh, k.k_nh) * monod(dissolved_oxygen, k.k_oa) * tank.xa,
        decay_heterotrophs: k.b_h * tank.xh,
        decay_autotrophs: k.b_a * tank.xa,
        phosphate_uptake: k.q_pp * monod(tank.spo, k.k_pp) * monod(dissolved_oxygen, k.k_o_pp),
    }
}

/// Conversion rates of each state variable, g/m³/d.
///
/// `n2o_fraction` is the share of nitrified N lost as N₂O-N instead of
/// accumulating as nitrate; `inert_n` and `inert_p` are the nutrient
/// contents of inert particulates. Phosphate uptake is not included; it
/// leaves the liquid with the wasted sludge.
pub fn conversion(r: &ProcessRates, k: &Kinetics, n2o_fraction: f64, inert_n: f64, inert_p: f64) -> TankState {
    let growth = r.aerobic_growth + r.anoxic_growth;
    let decay = r.decay_heterotrophs + r.decay_autotrophs;
    let nitrified = r.nitrified_n(k);
    TankState {
        ss: -growth / k.y_h + (1.0 - k.f_xi) * decay,
        snh: -k.i_n * (growth + r.nitrification) - nitrified + (k.i_n - k.f_xi * inert_n) * decay,
        sno: nitrified * (1.0 - n2o_fraction) - r.denitrified_n(k),
        spo: -k.i_p * (growth + r.nitrification) + (k.i_p - k.f_xi * inert_p) * decay,
        xh: growth - r.decay_heterotrophs,
        xa: r.nitrification - r.decay_autotrophs,
        xi: k.f_xi * decay,
    }
}
