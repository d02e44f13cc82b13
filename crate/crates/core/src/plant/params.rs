use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TankVolumes {
    pub primary_clarifier: f64,
    pub anaerobic: f64,
    pub anoxic1: f64,
    pub anoxic2: f64,
    pub aerobic: f64,
    pub secondary_clarifier: f64,
}

impl Default for TankVolumes {
    fn default() -> Self {
        Self {
            primary_clarifier: 300.0,
            anaerobic: 200.0,
            anoxic1: 400.0,
            anoxic2: 600.0,
            aerobic: 800.0,
            secondary_clarifier: 600.0,
        }
    }
}

impl TankVolumes {
    /// Biological reactor volumes in flow order.
    pub fn reactors(&self) -> [f64; 4] {
        [self.anaerobic, self.anoxic1, self.anoxic2, self.aerobic]
    }
}

/// Reduced activated-sludge kinetic and stoichiometric constants (per day, g/m³).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Kinetics {
    pub mu_h: f64,
    pub mu_a: f64,
    pub k_s: f64,
    pub k_nh: f64,
    pub k_oh: f64,
    pub k_oa: f64,
    pub k_no: f64,
    pub y_h: f64,
    pub y_a: f64,
    pub b_h: f64,
    pub b_a: f64,
    pub eta_g: f64,
    /// g N / g COD in biomass.
    pub i_n: f64,
    /// g P / g COD in biomass.
    pub i_p: f64,
    /// Fraction of decayed biomass left as inert particulate.
    pub f_xi: f64,
    /// Maximum aerobic biological phosphate uptake, g P/m³/d.
    pub q_pp: f64,
    /// Phosphate half-saturation of biological uptake, g P/m³.
    pub k_pp: f64,
    /// Oxygen half-saturation of biological uptake, g O₂/m³.
    pub k_o_pp: f64,
}

impl Default for Kinetics {
    fn default() -> Self {
        Self {
            mu_h: 4.0,
            mu_a: 1.0,
            k_s: 10.0,
            k_nh: 1.0,
            k_oh: 0.2,
            k_oa: 0.8,
            k_no: 0.5,
            y_h: 0.67,
            y_a: 0.24,
            b_h: 0.3,
            b_a: 0.08,
            eta_g: 0.8,
            i_n: 0.086,
            i_p: 0.02,
            f_xi: 0.08,
            q_pp: 18.0,
            k_pp: 0.5,
            k_o_pp: 0.05,
        }
    }
}

impl Kinetics {
    /// Rate constants zeroed; stoichiometry kept.
    pub fn reactions_off(&self) -> Self {
        Self { mu_h: 0.0, mu_a: 0.0, b_h: 0.0, b_a: 0.0, q_pp: 0.0, ..self.clone() }
    }
}

/// Split of influent COD and nutrient content of influent particulates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InfluentFractions {
    /// Soluble inert COD; passes the plant unchanged.
    pub soluble_inert: f64,
    /// Readily biodegradable COD.
    pub readily: f64,
    /// Slowly biodegradable particulate COD; hydrolysed on entry when not settled.
    pub particulate_degradable: f64,
    /// Inert particulate COD.
    pub particulate_inert: f64,
    /// g N / g COD in influent particulates and inert solids.
    pub i_n_particulate: f64,
    /// g P / g COD in influent particulates and inert solids.
    pub i_p_particulate: f64,
}

impl Default for InfluentFractions {
    fn default() -> Self {
        Self {
            soluble_inert: 0.025,
            readily: 0.425,
            particulate_degradable: 0.35,
            particulate_inert: 0.2,
            i_n_particulate: 0.06,
            i_p_particulate: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Digester {
    pub vs_destruction: f64,
    /// m³ CH₄ per kg COD destroyed.
    pub ch4_yield: f64,
    pub fugitive_ch4: f64,
    pub retention_days: f64,
}

impl Default for Digester {
    fn default() -> Self {
        Self { vs_destruction: 0.45, ch4_yield: 0.35, fugitive_ch4: 0.02, retention_days: 20.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Chp {
    pub electrical_efficiency: f64,
    /// kWh per m³ CH₄.
    pub ch4_lhv: f64,
}

impl Default for Chp {
    fn default() -> Self {
        Self { electrical_efficiency: 0.35, ch4_lhv: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Pump {
    /// m
    pub h_static: f64,
    /// m
    pub h_friction: f64,
    pub efficiency: f64,
}

impl Default for Pump {
    fn default() -> Self {
        Self { h_static: 5.0, h_friction: 1.0, efficiency: 0.7 }
    }
}

/// Fraction `base + amplitude·exp(−DO/scale)`, decreasing in DO.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoResponse {
    pub base: f64,
    pub amplitude: f64,
    pub do_scale: f64,
}

impl DoResponse {
    pub fn at(&self, dissolved_oxygen: f64) -> f64 {
        self.base + self.amplitude * (-dissolved_oxygen / self.do_scale).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantParams {
    pub volumes: TankVolumes,
    pub sludge_recycle_ratio: f64,
    pub irr_anoxic1_to_anaerobic: f64,
    pub irr_aerobic_to_anoxic2: f64,
    /// d
    pub srt_target: f64,
    /// kg FeCl₃ (100%) per kg TSS sent to digestion.
    pub fecl3_dose: f64,
    pub kinetics: Kinetics,
    pub influent_fractions: InfluentFractions,
    /// Maximum kg P bound per kg PAC (100%).
    pub p_binding: f64,
    /// Mass fraction of PAC in the dosed solution.
    pub pac_solution_strength: f64,
    /// kg O₂ per kWh at zero dissolved oxygen.
    pub sae: f64,
    /// g O₂/m³
    pub do_sat: f64,
    pub digester: Digester,
    pub chp: Chp,
    /// Dry-solids mass fraction of dewatered cake.
    pub dewatered_solids: f64,
    /// Dry-solids mass fraction of thickened sludge.
    pub thickened_solids: f64,
    pub pump: Pump,
    /// Particulate fraction removed by the primary clarifier.
    pub primary_removal: f64,
    /// g TSS/m³ leaving the secondary clarifier.
    pub effluent_tss: f64,
    /// g TSS per g particulate COD.
    pub tss_per_cod: f64,
    /// Mean residence time of solids in the clarifier blanket, d.
    pub clarifier_holdup_days: f64,
    /// W per m³ of reactor volume.
    pub mixing_power: f64,
    /// kW
    pub fixed_power: f64,
    /// N₂O-N emitted per unit N nitrified.
    pub n2o_fraction: DoResponse,
    /// Nitrite-N share of oxidized nitrogen in the effluent.
    pub nitrite_fraction: DoResponse,
    /// d
    pub substep: f64,
    /// Disable sludge wastage (mass-balance checks).
    pub wastage_enabled: bool,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            volumes: TankVolumes::default(),
            sludge_recycle_ratio: 1.5,
            irr_anoxic1_to_anaerobic: 3.0,
            irr_aerobic_to_anoxic2: 2.0,
            srt_target: 15.0,
            fecl3_dose: 0.030,
            kinetics: Kinetics::default(),
            influent_fractions: InfluentFractions::default(),
            p_binding: 0.03,
            pac_solution_strength: 0.25,
            sae: 0.7,
            do_sat: 9.0,
            digester: Digester::default(),
            chp: Chp::default(),
            dewatered_solids: 0.2,
            thickened_solids: 0.04,
            pump: Pump::default(),
            primary_removal: 0.5,
            effluent_tss: 10.0,
            tss_per_cod: 0.9,
            clarifier_holdup_days: 1.0 / 24.0,
            mixing_power: 3.0,
            fixed_power: 13.58,
            n2o_fraction: DoResponse { base: 0.004, amplitude: 0.016, do_scale: 0.5 },
            nitrite_fraction: DoResponse { base: 0.02, amplitude: 0.1, do_scale: 0.5 },
            substep: 0.0005,
            wastage_enabled: true,
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("volumes.primary_clarifier", self.volumes.primary_clarifier),
            ("volumes.anaerobic", self.volumes.anaerobic),
            ("volumes.anoxic1", self.volumes.anoxic1),
            ("volumes.anoxic2", self.volumes.anoxic2),
            ("volumes.aerobic", self.volumes.aerobic),
            ("volumes.secondary_clarifier", self.volumes.secondary_clarifier),
            ("srt_target", self.srt_target),
            ("p_binding", self.p_binding),
            ("sae", self.sae),
            ("do_sat", self.do_sat),
            ("digester.ch4_yield", self.digester.ch4_yield),
            ("digester.retention_days", self.digester.retention_days),
            ("chp.ch4_lhv", self.chp.ch4_lhv),
            ("tss_per_cod", self.tss_per_cod),
            ("clarifier_holdup_days", self.clarifier_holdup_days),
            ("substep", self.substep),
            ("pump.h_static", self.pump.h_static),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("plant.{name} must be > 0, got {v}")));
            }
        }
        let fractions = [
            ("kinetics.y_h", self.kinetics.y_h),
            ("kinetics.y_a", self.kinetics.y_a),
            ("kinetics.eta_g", self.kinetics.eta_g),
            ("kinetics.f_xi", self.kinetics.f_xi),
            ("pac_solution_strength", self.pac_solution_strength),
            ("digester.vs_destruction", self.digester.vs_destruction),
            ("digester.fugitive_ch4", self.digester.fugitive_ch4),
            ("chp.electrical_efficiency", self.chp.electrical_efficiency),
            ("dewatered_solids", self.dewatered_solids),
            ("thickened_solids", self.thickened_solids),
            ("pump.efficiency", self.pump.efficiency),
            ("primary_removal", self.primary_removal),
        ];
        for (name, v) in fractions {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("plant.{name} must lie in (0, 1), got {v}")));
            }
        }
        let k = &self.kinetics;
        for (name, v) in [
            ("mu_h", k.mu_h),
            ("mu_a", k.mu_a),
            ("b_h", k.b_h),
            ("b_a", k.b_a),
            ("k_s", k.k_s),
            ("k_nh", k.k_nh),
            ("k_oh", k.k_oh),
            ("k_oa", k.k_oa),
            ("k_no", k.k_no),
            ("i_n", k.i_n),
            ("i_p", k.i_p),
            ("q_pp", k.q_pp),
            ("k_pp", k.k_pp),
            ("k_o_pp", k.k_o_pp),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("plant.kinetics.{name} must be >= 0")));
            }
        }
        let f = &self.influent_fractions;
        let sum = f.soluble_inert + f.readily + f.particulate_degradable + f.particulate_inert;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("plant.influent_fractions must sum to 1, got {sum}")));
        }
        if self.sludge_recycle_ratio < 0.0 || self.irr_anoxic1_to_anaerobic < 0.0 || self.irr_aerobic_to_anoxic2 < 0.0 {
            return Err(Error::Config("recycle ratios must be >= 0".into()));
        }
        Ok(())
    }
}
