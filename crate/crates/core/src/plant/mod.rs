//! Reduced activated-sludge plant: four reactors in series with internal
//! recycles, an ideal secondary clarifier with a sludge blanket, chemical
//! phosphorus precipitation in the aerobic tank, and a sludge line with
//! thickening, FeCl₃ conditioning, digestion with CHP, and dewatering.

mod energy;
mod kinetics;
mod params;

use serde::{Deserialize, Serialize};

pub use energy::{aeration_energy, pump_energy, GRAVITY, WATER_DENSITY};
pub use kinetics::{conversion, process_rates, ProcessRates, TankState, TANK_VARIABLES};
pub use params::{Chp, Digester, DoResponse, InfluentFractions, Kinetics, PlantParams, Pump, TankVolumes};

use crate::error::{Error, Result};
use crate::influent::{generate_influent, InfluentConfig, InfluentRecord};

pub const ANAEROBIC: usize = 0;
pub const ANOXIC1: usize = 1;
pub const ANOXIC2: usize = 2;
pub const AEROBIC: usize = 3;
pub const TANK_NAMES: [&str; 4] = ["anaerobic", "anoxic1", "anoxic2", "aerobic"];

/// kg CH₄ per m³ at standard conditions.
pub const CH4_DENSITY: f64 = 0.717;
/// Control interval used throughout: one hour.
pub const CONTROL_INTERVAL: f64 = 1.0 / 24.0;
pub const WARMUP_DAYS: f64 = 20.0;
/// Ratio of effluent BOD to effluent COD.
pub const BOD_PER_COD: f64 = 0.5;

/// Admissible range of one control variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub fn clip(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    pub fn span(&self) -> f64 {
        self.hi - self.lo
    }

    /// Maps the box onto `[0, 1]`.
    pub fn normalize(&self, v: f64) -> f64 {
        (v - self.lo) / self.span()
    }

    pub fn denormalize(&self, u: f64) -> f64 {
        self.lo + u * self.span()
    }
}

/// g O₂/m³
pub const DO_BOUNDS: Bounds = Bounds { lo: 0.0, hi: 5.0 };
/// kg PAC solution per m³ of wastewater.
pub const DOSE_BOUNDS: Bounds = Bounds { lo: 0.0, hi: 0.5 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    /// Aerobic-tank dissolved oxygen set-point, g O₂/m³.
    pub do_setpoint: f64,
    /// PAC solution dose, kg per m³ of wastewater.
    pub pac_dose: f64,
}

impl Action {
    pub const BASELINE: Action = Action { do_setpoint: 1.5, pac_dose: 0.125 };

    pub fn new(do_setpoint: f64, pac_dose: f64) -> Self {
        Self { do_setpoint, pac_dose }
    }

    pub fn clipped(self) -> Self {
        // NaN maps to the lower bound
        let fix = |v: f64, b: Bounds| if v.is_nan() { b.lo } else { b.clip(v) };
        Self { do_setpoint: fix(self.do_setpoint, DO_BOUNDS), pac_dose: fix(self.pac_dose, DOSE_BOUNDS) }
    }

    pub fn is_within_bounds(&self) -> bool {
        (DO_BOUNDS.lo..=DO_BOUNDS.hi).contains(&self.do_setpoint)
            && (DOSE_BOUNDS.lo..=DOSE_BOUNDS.hi).contains(&self.pac_dose)
    }

    /// Both variables mapped to `[0, 1]` by their boxes.
    pub fn normalized(&self) -> [f64; 2] {
        [DO_BOUNDS.normalize(self.do_setpoint), DOSE_BOUNDS.normalize(self.pac_dose)]
    }

    pub fn from_normalized(u: [f64; 2]) -> Self {
        Self { do_setpoint: DO_BOUNDS.denormalize(u[0]), pac_dose: DOSE_BOUNDS.denormalize(u[1]) }
    }
}

/// Mass of inert/biomass particulates held in the clarifier blanket, kg COD.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Blanket {
    pub xh: f64,
    pub xa: f64,
    pub xi: f64,
}

impl Blanket {
    pub fn total(&self) -> f64 {
        self.xh + self.xa + self.xi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub tanks: [TankState; 4],
    pub blanket: Blanket,
    /// Degradable COD held in the digester, kg.
    pub digester_cod: f64,
    /// d
    pub elapsed: f64,
}

impl PlantState {
    /// Documented starting point for warm-up, close to the baseline
    /// operating point of the default parameters.
    pub fn seed() -> Self {
        let liquor = |ss, snh, sno, spo, xh, xa, xi| TankState { ss, snh, sno, spo, xh, xa, xi };
        Self {
            tanks: [
                liquor(95.4, 13.8, 0.07, 2.03, 893.0, 37.0, 882.0),
                liquor(104.9, 14.7, 0.0, 2.23, 880.0, 36.7, 878.0),
                liquor(58.9, 9.3, 0.03, 1.43, 848.0, 35.2, 839.0),
                liquor(1.9, 1.3, 4.5, 0.17, 864.0, 35.7, 828.0),
            ],
            blanket: Blanket { xh: 162.0, xa: 6.7, xi: 155.0 },
            digester_cod: 2873.0,
            elapsed: 0.0,
        }
    }

    /// Liquid-side inventories (reactors plus blanket) as (COD, N, P) in kg.
    pub fn inventory(&self, p: &PlantParams) -> MassLoads {
        let v = p.volumes.reactors();
        let k = &p.kinetics;
        let f = &p.influent_fractions;
        let mut out = MassLoads::default();
        for (t, vol) in self.tanks.iter().zip(v) {
            out.cod += vol * (t.ss + t.particulate_cod()) / 1000.0;
            out.n += vol * (t.snh + t.sno + k.i_n * (t.xh + t.xa) + f.i_n_particulate * t.xi) / 1000.0;
            out.p += vol * (t.spo + k.i_p * (t.xh + t.xa) + f.i_p_particulate * t.xi) / 1000.0;
        }
        let b = &self.blanket;
        out.cod += b.total();
        out.n += k.i_n * (b.xh + b.xa) + f.i_n_particulate * b.xi;
        out.p += k.i_p * (b.xh + b.xa) + f.i_p_particulate * b.xi;
        out
    }

    /// Solids inventory (reactors plus blanket), kg COD.
    pub fn solids(&self, p: &PlantParams) -> f64 {
        let v = p.volumes.reactors();
        self.tanks.iter().zip(v).map(|(t, vol)| vol * t.particulate_cod() / 1000.0).sum::<f64>() + self.blanket.total()
    }

    pub fn is_non_negative(&self) -> bool {
        self.tanks.iter().all(|t| t.to_array().iter().all(|&x| x >= 0.0))
            && self.blanket.xh >= 0.0
            && self.blanket.xa >= 0.0
            && self.blanket.xi >= 0.0
            && self.digester_cod >= 0.0
    }
}

/// COD, N and P masses in kg.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MassLoads {
    pub cod: f64,
    pub n: f64,
    pub p: f64,
}

impl std::ops::AddAssign for MassLoads {
    fn add_assign(&mut self, o: Self) {
        self.cod += o.cod;
        self.n += o.n;
        self.p += o.p;
    }
}

/// Effluent loads over one interval, kg (volume in m³).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EffluentLoads {
    pub volume: f64,
    pub cod: f64,
    pub bod: f64,
    pub nh4: f64,
    pub no3: f64,
    pub no2: f64,
    pub tn: f64,
    pub tp: f64,
}

/// Flow-weighted effluent concentrations, g/m³ (N species as N).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EffluentConcentrations {
    pub cod: f64,
    pub bod: f64,
    pub nh4: f64,
    pub no3: f64,
    pub no2: f64,
    pub tn: f64,
    pub tp: f64,
}

impl EffluentLoads {
    pub fn concentrations(&self) -> EffluentConcentrations {
        if self.volume <= 0.0 {
            return EffluentConcentrations::default();
        }
        let c = |kg: f64| 1000.0 * kg / self.volume;
        EffluentConcentrations {
            cod: c(self.cod),
            bod: c(self.bod),
            nh4: c(self.nh4),
            no3: c(self.no3),
            no2: c(self.no2),
            tn: c(self.tn),
            tp: c(self.tp),
        }
    }
}

/// Everything the impact model needs from one control interval.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepFluxes {
    pub effluent: EffluentLoads,
    /// kg O₂ consumed in the aerobic tank.
    pub oxygen_uptake: f64,
    /// kWh
    pub aeration_energy: f64,
    pub pump_energy: f64,
    pub other_energy: f64,
    pub biogas_electricity: f64,
    /// kg FeCl₃ (100%)
    pub fecl3_used: f64,
    /// kg PAC (100%)
    pub pac_pure_used: f64,
    /// kg wet dewatered sludge
    pub cake_mass: f64,
    /// kg
    pub process_n2o: f64,
    pub process_ch4: f64,
    /// m³ of influent treated
    pub treated_volume: f64,
    /// kg N oxidized to nitrate in the aerobic tank
    pub nitrified_n: f64,
    /// kg P bound by PAC
    pub precipitated_p: f64,
    /// kg P taken up biologically and wasted with the sludge
    pub biological_p: f64,
    pub influent_load: MassLoads,
    /// Solids and liquor leaving to the sludge line.
    pub sludge_line_load: MassLoads,
    /// kg N leaving as N₂ or N₂O
    pub nitrogen_to_gas: f64,
    /// kg COD of solids wasted or lost with the effluent.
    pub solids_removed: f64,
    /// Integration sub-steps and how many produced a clamped variable.
    pub substeps: u32,
    pub clamped: u32,
}

impl StepFluxes {
    /// FeCl₃ as delivered 40% solution, kg.
    pub fn fecl3_solution(&self) -> f64 {
        self.fecl3_used / 0.4
    }

    /// PAC as dosed solution, kg.
    pub fn pac_solution(&self, p: &PlantParams) -> f64 {
        self.pac_pure_used / p.pac_solution_strength
    }

    /// Aeration + pumping + other plant electricity, kWh.
    pub fn direct_energy(&self) -> f64 {
        self.aeration_energy + self.pump_energy + self.other_energy
    }

    /// Every extensive field multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        let e = &self.effluent;
        let m = |l: MassLoads| MassLoads { cod: l.cod * k, n: l.n * k, p: l.p * k };
        Self {
            effluent: EffluentLoads {
                volume: e.volume * k,
                cod: e.cod * k,
                bod: e.bod * k,
                nh4: e.nh4 * k,
                no3: e.no3 * k,
                no2: e.no2 * k,
                tn: e.tn * k,
                tp: e.tp * k,
            },
            oxygen_uptake: self.oxygen_uptake * k,
            aeration_energy: self.aeration_energy * k,
            pump_energy: self.pump_energy * k,
            other_energy: self.other_energy * k,
            biogas_electricity: self.biogas_electricity * k,
            fecl3_used: self.fecl3_used * k,
            pac_pure_used: self.pac_pure_used * k,
            cake_mass: self.cake_mass * k,
            process_n2o: self.process_n2o * k,
            process_ch4: self.process_ch4 * k,
            treated_volume: self.treated_volume * k,
            nitrified_n: self.nitrified_n * k,
            precipitated_p: self.precipitated_p * k,
            biological_p: self.biological_p * k,
            influent_load: m(self.influent_load),
            sludge_line_load: m(self.sludge_line_load),
            nitrogen_to_gas: self.nitrogen_to_gas * k,
            solids_removed: self.solids_removed * k,
            substeps: self.substeps,
            clamped: self.clamped,
        }
    }
}

/// Primary-clarifier effluent composition (g/m³) and what the clarifier
/// sends to the sludge line (g per m³ of influent).
struct PrimaryEffluent {
    soluble_inert: f64,
    tank: TankState,
    sludge_degradable: f64,
    sludge_inert: f64,
    sludge_n: f64,
    sludge_p: f64,
}

fn primary_clarifier(inf: &InfluentRecord, p: &PlantParams) -> PrimaryEffluent {
    let f = &p.influent_fractions;
    let r = p.primary_removal;
    let degradable = f.particulate_degradable * inf.cod;
    let inert = f.particulate_inert * inf.cod;
    let particulate_n = f.i_n_particulate * (degradable + inert);
    let particulate_p = f.i_p_particulate * (degradable + inert);
    PrimaryEffluent {
        soluble_inert: f.soluble_inert * inf.cod,
        tank: TankState {
            ss: f.readily * inf.cod + (1.0 - r) * degradable,
            // organic N/P of the hydrolysed particulates is released as ammonia/phosphate
            snh: (inf.tn - particulate_n + (1.0 - r) * f.i_n_particulate * degradable).max(0.0),
            sno: 0.0,
            spo: (inf.tp - particulate_p + (1.0 - r) * f.i_p_particulate * degradable).max(0.0),
            xh: 0.0,
            xa: 0.0,
            xi: (1.0 - r) * inert,
        },
        sludge_degradable: r * degradable,
        sludge_inert: r * inert,
        sludge_n: r * particulate_n,
        sludge_p: r * particulate_p,
    }
}

/// Advances the plant by one control interval under a constant influent
/// record and action.
pub fn step(
    state: &PlantState,
    inf: &InfluentRecord,
    action: Action,
    dt_control: f64,
    p: &PlantParams,
) -> Result<(PlantState, StepFluxes)> {
    if !(dt_control > 0.0) {
        return Err(Error::InvalidArgument("control interval must be positive".into()));
    }
    let action = action.clipped();
    let k = &p.kinetics;
    let fr = &p.influent_fractions;
    let vol = p.volumes.reactors();
    let n_sub = (dt_control / p.substep).ceil().max(1.0) as usize;
    let h = dt_control / n_sub as f64;

    let q = inf.q;
    let ret = p.sludge_recycle_ratio * q;
    let irr1 = p.irr_anoxic1_to_anaerobic * q;
    let irr2 = p.irr_aerobic_to_anoxic2 * q;
    let pe = primary_clarifier(inf, p);
    let dissolved_oxygen = [0.0, 0.0, 0.0, action.do_setpoint];
    let n2o_fraction = p.n2o_fraction.at(action.do_setpoint);
    let nitrite_fraction = p.nitrite_fraction.at(action.do_setpoint);
    // g PAC (100%) per day
    let pac_rate = action.pac_dose * p.pac_solution_strength * q * 1000.0;
    let x_eff_cod = p.effluent_tss / p.tss_per_cod;
    let tau = p.clarifier_holdup_days;
    let dig = &p.digester;
    let k_destruction = dig.vs_destruction / ((1.0 - dig.vs_destruction) * dig.retention_days);

    let mut s = state.clone();
    let mut fl = StepFluxes {
        treated_volume: q * dt_control,
        influent_load: MassLoads {
            cod: q * dt_control * inf.cod / 1000.0,
            n: q * dt_control * inf.tn / 1000.0,
            p: q * dt_control * inf.tp / 1000.0,
        },
        ..Default::default()
    };
    let primary_sludge = MassLoads {
        cod: q * (pe.sludge_degradable + pe.sludge_inert) / 1000.0,
        n: q * pe.sludge_n / 1000.0,
        p: q * pe.sludge_p / 1000.0,
    };
    // influent N/P clamped away in the primary split never enters
    let n_entering = primary_sludge.n + q * (pe.tank.snh + fr.i_n_particulate * pe.tank.xi) / 1000.0;
    let p_entering = primary_sludge.p + q * (pe.tank.spo + fr.i_p_particulate * pe.tank.xi) / 1000.0;
    fl.influent_load.n = fl.influent_load.n.min(n_entering * dt_control);
    fl.influent_load.p = fl.influent_load.p.min(p_entering * dt_control);

    let mut thickened_flow_volume = 0.0;
    let mut waste_flow_volume = 0.0;

    for _ in 0..n_sub {
        let t = &s.tanks;
        let aer = t[AEROBIC];
        let blanket_out = s.blanket.total() * 1000.0 / tau; // g/d

        // wastage tracks the SRT target
        let mut waste_fraction = 0.0;
        if p.wastage_enabled && blanket_out > 0.0 {
            let system_solids = s.solids(p) * 1000.0;
            let effluent_loss = q * x_eff_cod.min(aer.particulate_cod());
            let wanted = (system_solids / p.srt_target - effluent_loss).max(0.0);
            waste_fraction = (wanted / blanket_out).min(0.9);
        }
        let q_waste = waste_fraction * ret / (1.0 - waste_fraction);
        let q_eff = (q - q_waste).max(0.0);

        let aer_x = aer.particulate_cod();
        let xe_total = x_eff_cod.min(aer_x);
        let share = |x: f64| if aer_x > 0.0 { xe_total * x / aer_x } else { 0.0 };
        let xe = [share(aer.xh), share(aer.xa), share(aer.xi)];

        // hydraulic transport, g/m³/d
        let feed = |c: &TankState, flow: f64| {
            let a = c.to_array();
            a.map(|x| x * flow)
        };
        let mut d = [[0.0f64; 7]; 4];
        let ret_solubles = TankState { xh: 0.0, xa: 0.0, xi: 0.0, ..aer };
        let mut in0 = feed(&pe.tank, q);
        let r0 = feed(&ret_solubles, ret);
        let i0 = feed(&t[ANOXIC1], irr1);
        for j in 0..7 {
            in0[j] += r0[j] + i0[j];
        }
        let returned = 1.0 - waste_fraction;
        in0[4] += returned * s.blanket.xh * 1000.0 / tau;
        in0[5] += returned * s.blanket.xa * 1000.0 / tau;
        in0[6] += returned * s.blanket.xi * 1000.0 / tau;
        let flow0 = q + ret + irr1;
        let flow2 = q + ret + irr2;
        let in1 = feed(&t[ANAEROBIC], flow0);
        let mut in2 = feed(&t[ANOXIC1], q + ret);
        let i2 = feed(&t[AEROBIC], irr2);
        for j in 0..7 {
            in2[j] += i2[j];
        }
        let in3 = feed(&t[ANOXIC2], flow2);
        let inflows = [in0, in1, in2, in3];
        let outflows = [flow0, flow0, flow2, flow2];

        let mut oxygen = 0.0;
        let mut nitrified = 0.0;
        let mut denitrified = 0.0;
        let mut precipitated = 0.0;
        let mut bio_p = 0.0;
        for i in 0..4 {
            let c = t[i].to_array();
            let rates = process_rates(&t[i], dissolved_oxygen[i], k);
            let n2o = if i == AEROBIC { n2o_fraction } else { 0.0 };
            let conv = conversion(&rates, k, n2o, fr.i_n_particulate, fr.i_p_particulate).to_array();
            for j in 0..7 {
                d[i][j] = (inflows[i][j] - outflows[i] * c[j]) / vol[i] + conv[j];
            }
            nitrified += rates.nitrified_n(k) * vol[i];
            denitrified += rates.denitrified_n(k) * vol[i];
            if i == AEROBIC {
                oxygen += rates.oxygen_uptake(k) * vol[i];
                let spo = t[i].spo.max(0.0);
                let capacity = p.p_binding * pac_rate;
                precipitated = capacity.min(spo * vol[i] / h);
                bio_p = (rates.phosphate_uptake * vol[i]).min(spo * vol[i] / h - precipitated);
                d[i][3] -= (precipitated + bio_p) / vol[i];
            }
        }

        // clarifier blanket, g/d
        let feed_solids = [aer.xh, aer.xa, aer.xi].map(|x| x * (q + ret));
        let blanket_mass = [s.blanket.xh, s.blanket.xa, s.blanket.xi];
        let mut db = [0.0; 3];
        for j in 0..3 {
            db[j] = feed_solids[j] - q_eff * xe[j] - blanket_mass[j] * 1000.0 / tau;
        }
        let wasted = blanket_mass.map(|m| waste_fraction * m * 1000.0 / tau);

        // sludge line, g/d
        let waste_degradable = wasted[0] + wasted[1];
        let to_digester = q * pe.sludge_degradable + waste_degradable;
        let inert_solids = q * pe.sludge_inert + wasted[2];
        let thickened_tss = p.tss_per_cod * (to_digester + inert_solids) / 1000.0; // kg/d
        let fecl3 = p.fecl3_dose * thickened_tss;
        let destroyed = k_destruction * s.digester_cod; // kg/d
        let digested_out = s.digester_cod / dig.retention_days;
        let cake_dry = p.tss_per_cod * (inert_solids / 1000.0 + digested_out) + fecl3 + pac_rate / 1000.0;
        let methane = dig.ch4_yield * destroyed; // m³/d

        // accumulate interval totals
        let e = &mut fl.effluent;
        let vol_e = q_eff * h;
        let xe_sum = xe[0] + xe[1] + xe[2];
        let cod = aer.ss + pe.soluble_inert + xe_sum;
        e.volume += vol_e;
        e.cod += vol_e * cod / 1000.0;
        e.bod += vol_e * BOD_PER_COD * cod / 1000.0;
        e.nh4 += vol_e * aer.snh / 1000.0;
        e.no3 += vol_e * (1.0 - nitrite_fraction) * aer.sno / 1000.0;
        e.no2 += vol_e * nitrite_fraction * aer.sno / 1000.0;
        e.tn += vol_e * (aer.snh + aer.sno + k.i_n * (xe[0] + xe[1]) + fr.i_n_particulate * xe[2]) / 1000.0;
        e.tp += vol_e * (aer.spo + k.i_p * (xe[0] + xe[1]) + fr.i_p_particulate * xe[2]) / 1000.0;

        fl.oxygen_uptake += oxygen * h / 1000.0;
        fl.nitrified_n += nitrified * h / 1000.0;
        fl.precipitated_p += precipitated * h / 1000.0;
        fl.biological_p += bio_p * h / 1000.0;
        fl.nitrogen_to_gas += denitrified * h / 1000.0;
        fl.process_n2o += n2o_fraction * nitrified * h / 1000.0 * 44.0 / 28.0;
        fl.nitrogen_to_gas += n2o_fraction * nitrified * h / 1000.0;
        fl.fecl3_used += fecl3 * h;
        fl.pac_pure_used += pac_rate * h / 1000.0;
        fl.cake_mass += cake_dry / p.dewatered_solids * h;
        fl.process_ch4 += dig.fugitive_ch4 * methane * CH4_DENSITY * h;
        fl.biogas_electricity += (1.0 - dig.fugitive_ch4) * methane * p.chp.ch4_lhv * p.chp.electrical_efficiency * h;
        let waste_solubles = q_waste * aer.ss / 1000.0;
        fl.sludge_line_load += MassLoads {
            cod: h * (primary_sludge.cod + (wasted[0] + wasted[1] + wasted[2]) / 1000.0 + waste_solubles),
            n: h * (primary_sludge.n
                + (k.i_n * waste_degradable + fr.i_n_particulate * wasted[2] + q_waste * (aer.snh + aer.sno)) / 1000.0),
            p: h * (primary_sludge.p
                + (k.i_p * waste_degradable + fr.i_p_particulate * wasted[2] + q_waste * aer.spo) / 1000.0),
        };
        fl.solids_removed += h * ((wasted[0] + wasted[1] + wasted[2]) + q_eff * xe_sum) / 1000.0;
        waste_flow_volume += q_waste * h;
        thickened_flow_volume += thickened_tss / (p.thickened_solids * 1000.0) * h;

        // explicit Euler update with clamping
        let mut clamped = false;
        for i in 0..4 {
            let mut c = s.tanks[i].to_array();
            for j in 0..7 {
                let v = c[j] + h * d[i][j];
                if !v.is_finite() {
                    return Err(Error::NonFinite { tank: TANK_NAMES[i], variable: TANK_VARIABLES[j], time: s.elapsed });
                }
                if v < 0.0 {
                    clamped = true;
                    c[j] = 0.0;
                } else {
                    c[j] = v;
                }
            }
            s.tanks[i] = TankState::from_array(c);
        }
        s.blanket.xh = (s.blanket.xh + h * db[0] / 1000.0).max(0.0);
        s.blanket.xa = (s.blanket.xa + h * db[1] / 1000.0).max(0.0);
        s.blanket.xi = (s.blanket.xi + h * db[2] / 1000.0).max(0.0);
        s.digester_cod += h * (to_digester / 1000.0 - digested_out - destroyed);
        if !s.digester_cod.is_finite() || !s.blanket.total().is_finite() {
            return Err(Error::NonFinite { tank: "sludge line", variable: "COD", time: s.elapsed });
        }
        s.digester_cod = s.digester_cod.max(0.0);
        s.elapsed += h;
        fl.substeps += 1;
        fl.clamped += clamped as u32;
    }
    s.elapsed = state.elapsed + dt_control;

    // residual-sludge pump, thickening pump and dewatering pump
    let hours = 24.0 * dt_control;
    let avg_flow = |volume: f64| volume / dt_control / 86_400.0;
    fl.pump_energy = hours
        * (pump_energy(avg_flow(waste_flow_volume), &p.pump)
            + 2.0 * pump_energy(avg_flow(thickened_flow_volume), &p.pump));
    fl.other_energy = hours * (p.mixing_power * vol.iter().sum::<f64>() / 1000.0 + p.fixed_power);
    fl.aeration_energy = aeration_energy(fl.oxygen_uptake, action.do_setpoint, p)?;
    Ok((s, fl))
}

/// Result of the 20-day warm-up.
#[derive(Debug, Clone, PartialEq)]
pub struct Warmup {
    pub state: PlantState,
    /// Largest relative change of any reactor variable over the final day.
    pub max_relative_change: f64,
    pub worst_variable: (&'static str, &'static str),
    pub quasi_steady: bool,
}

/// Runs `days` of dynamic influent under a constant action from `start`.
pub fn run_constant(
    start: &PlantState,
    p: &PlantParams,
    cfg: &InfluentConfig,
    action: Action,
    days: f64,
) -> Result<(PlantState, Vec<StepFluxes>)> {
    let n = crate::influent::interval_count(days, CONTROL_INTERVAL);
    let mut s = start.clone();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let inf = generate_influent(cfg, s.elapsed);
        let (next, fl) = step(&s, &inf, action, CONTROL_INTERVAL, p)?;
        s = next;
        out.push(fl);
    }
    Ok((s, out))
}

pub fn warmup(p: &PlantParams, cfg: &InfluentConfig, action: Action) -> Result<Warmup> {
    let (day19, _) = run_constant(&PlantState::seed(), p, cfg, action, WARMUP_DAYS - 1.0)?;
    let (day20, _) = run_constant(&day19, p, cfg, action, 1.0)?;
    let mut worst = 0.0;
    let mut worst_variable = (TANK_NAMES[0], TANK_VARIABLES[0]);
    for (i, (t19, t20)) in day19.tanks.iter().zip(&day20.tanks).enumerate() {
        let (a, b) = (t19.to_array(), t20.to_array());
        for j in 0..7 {
            // tiny concentrations are compared on an absolute 0.1 g/m³ floor
            let rel = (b[j] - a[j]).abs() / a[j].abs().max(0.1);
            if rel > worst {
                worst = rel;
                worst_variable = (TANK_NAMES[i], TANK_VARIABLES[j]);
            }
        }
    }
    let quasi_steady = worst < 0.02;
    if !quasi_steady {
        log::warn!(
            "warm-up not quasi-steady: {}.{} changed {:.2}% over the final day",
            worst_variable.0,
            worst_variable.1,
            100.0 * worst
        );
    }
    Ok(Warmup { state: day20, max_relative_change: worst, worst_variable, quasi_steady })
}
