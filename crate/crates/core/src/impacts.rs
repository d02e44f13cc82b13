//! Life-cycle indicators (energy, cost, eutrophication, greenhouse gas),
//! internal normalization, constraint penalties and the scalar reward.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::plant::{Action, EffluentConcentrations, PlantParams, PlantState, StepFluxes};

pub const N2O_PER_N: f64 = 44.0 / 28.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpFactors {
    pub tp: f64,
    pub cod: f64,
    pub nh4: f64,
    pub no3: f64,
    pub no2: f64,
}

impl Default for EpFactors {
    fn default() -> Self {
        Self { tp: 3.07, cod: 0.022, nh4: 0.33, no3: 0.095, no2: 0.13 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GhgFactors {
    /// kg CO₂-eq/kWh
    pub electricity: f64,
    /// kg CO₂-eq/kg (100%)
    pub fecl3: f64,
    pub pac: f64,
    /// kg CO₂-eq/(kg·km)
    pub transport: f64,
    /// kg CO₂-eq/kg gas
    pub n2o: f64,
    pub ch4: f64,
}

impl Default for GhgFactors {
    fn default() -> Self {
        Self { electricity: 1.17, fecl3: 0.986, pac: 1.182, transport: 0.000192, n2o: 298.0, ch4: 25.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IpccFactors {
    /// kg CH₄/kg BOD
    pub bo: f64,
    pub mcf: f64,
    /// kg N₂O-N/kg N
    pub ef: f64,
}

impl Default for IpccFactors {
    fn default() -> Self {
        Self { bo: 0.25, mcf: 0.035, ef: 0.016 }
    }
}

/// Embodied energy of delivered chemical solutions, kWh/kg.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChemicalEnergy {
    pub fecl3_40: f64,
    pub pac_25: f64,
}

impl Default for ChemicalEnergy {
    fn default() -> Self {
        Self { fecl3_40: 3.4, pac_25: 1.94 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmissionFactors {
    pub ep: EpFactors,
    pub ghg: GhgFactors,
    pub ipcc: IpccFactors,
    pub chem_energy: ChemicalEnergy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostFactors {
    /// CNY/kWh
    pub electricity: f64,
    /// CNY/kg (100%)
    pub fecl3: f64,
    pub pac: f64,
    /// CNY/(kg·km)
    pub transport: f64,
    /// km
    pub distance: f64,
    /// CNY/kg wet sludge
    pub landfill: f64,
    /// CNY/kWh of biogas electricity
    pub biogas_subsidy: f64,
    /// CNY/m³
    pub misc: f64,
}

impl Default for CostFactors {
    fn default() -> Self {
        Self {
            electricity: 0.8,
            fecl3: 1.7,
            pac: 2.5,
            transport: 0.005,
            distance: 200.0,
            landfill: 0.52,
            biogas_subsidy: 0.25,
            misc: 0.3,
        }
    }
}

impl EmissionFactors {
    pub fn validate(&self) -> Result<()> {
        let g = &self.ghg;
        let all = [
            self.ep.tp,
            self.ep.cod,
            self.ep.nh4,
            self.ep.no3,
            self.ep.no2,
            g.electricity,
            g.fecl3,
            g.pac,
            g.transport,
            g.n2o,
            g.ch4,
            self.ipcc.bo,
            self.ipcc.mcf,
            self.ipcc.ef,
            self.chem_energy.fecl3_40,
            self.chem_energy.pac_25,
        ];
        if all.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Config("emission factors must be > 0".into()));
        }
        Ok(())
    }
}

impl CostFactors {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.electricity,
            self.fecl3,
            self.pac,
            self.transport,
            self.distance,
            self.landfill,
            self.biogas_subsidy,
            self.misc,
        ];
        if all.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Config("cost factors must be >= 0".into()));
        }
        Ok(())
    }
}

/// Effluent limits, g/m³.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DischargeStandard {
    pub name: String,
    pub cod: f64,
    pub nh3n: f64,
    pub tn: f64,
    pub tp: f64,
}

impl DischargeStandard {
    pub fn grade_1a() -> Self {
        Self { name: "I-A".into(), cod: 50.0, nh3n: 5.0, tn: 15.0, tp: 0.5 }
    }

    pub fn grade_1b() -> Self {
        Self { name: "I-B".into(), cod: 60.0, nh3n: 8.0, tn: 20.0, tp: 1.0 }
    }

    /// Quasi class-IV surface water.
    pub fn surface_water_iv() -> Self {
        Self { name: "SW".into(), cod: 30.0, nh3n: 1.5, tn: 15.0, tp: 0.3 }
    }

    pub fn validate(&self) -> Result<()> {
        if [self.cod, self.nh3n, self.tn, self.tp].iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Config(format!("standard {} limits must be > 0", self.name)));
        }
        Ok(())
    }
}

/// The discharge standards the scenarios refer to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Standards {
    pub grade_1a: DischargeStandard,
    pub grade_1b: DischargeStandard,
    pub surface_water_iv: DischargeStandard,
}

impl Default for Standards {
    fn default() -> Self {
        Self {
            grade_1a: DischargeStandard::grade_1a(),
            grade_1b: DischargeStandard::grade_1b(),
            surface_water_iv: DischargeStandard::surface_water_iv(),
        }
    }
}

impl Standards {
    pub fn validate(&self) -> Result<()> {
        self.grade_1a.validate()?;
        self.grade_1b.validate()?;
        self.surface_water_iv.validate()
    }
}

/// Per-component compliance (`true` = within limit).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Compliance {
    pub cod: bool,
    pub nh3n: bool,
    pub tn: bool,
    pub tp: bool,
}

impl Compliance {
    pub fn passed(&self) -> bool {
        self.cod && self.nh3n && self.tn && self.tp
    }
}

pub fn check_standard(c: &EffluentConcentrations, std: &DischargeStandard) -> Compliance {
    Compliance { cod: c.cod <= std.cod, nh3n: c.nh4 <= std.nh3n, tn: c.tn <= std.tn, tp: c.tp <= std.tp }
}

/// Effluent loads per m³ treated, kg/m³.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EffluentPerVolume {
    pub tp: f64,
    pub cod: f64,
    pub nh4: f64,
    pub no3: f64,
    pub no2: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EpBreakdown {
    pub tp: f64,
    pub cod: f64,
    pub nh4: f64,
    pub no3: f64,
    pub no2: f64,
    pub total: f64,
}

pub fn eutrophication_potential(e: &EffluentPerVolume, f: &EpFactors) -> Result<EpBreakdown> {
    if [e.tp, e.cod, e.nh4, e.no3, e.no2].iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidArgument("effluent loads must be non-negative".into()));
    }
    let mut b = EpBreakdown {
        tp: f.tp * e.tp,
        cod: f.cod * e.cod,
        nh4: f.nh4 * e.nh4,
        no3: f.no3 * e.no3,
        no2: f.no2 * e.no2,
        total: 0.0,
    };
    b.total = b.tp + b.cod + b.nh4 + b.no3 + b.no2;
    Ok(b)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EffluentGhg {
    pub ch4: f64,
    pub n2o: f64,
}

/// IPCC effluent emissions; inputs and outputs share the same time basis.
pub fn effluent_ghg(bod: f64, tn: f64, f: &IpccFactors) -> EffluentGhg {
    EffluentGhg { ch4: bod * f.bo * f.mcf, n2o: tn * f.ef * N2O_PER_N }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub aeration: f64,
    pub pumps: f64,
    pub chemicals: f64,
    pub other: f64,
    /// Recovered electricity, entered as a negative contribution.
    pub biogas: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    /// Consumption before biogas credit.
    pub fn gross(&self) -> f64 {
        self.aeration + self.pumps + self.chemicals + self.other
    }

    pub fn is_net_producer(&self) -> bool {
        self.total < 0.0
    }
}

fn per_m3(fl: &StepFluxes) -> f64 {
    if fl.treated_volume > 0.0 {
        1.0 / fl.treated_volume
    } else {
        0.0
    }
}

pub fn total_energy(fl: &StepFluxes, f: &EmissionFactors, p: &PlantParams) -> EnergyBreakdown {
    let s = per_m3(fl);
    let chemicals = fl.fecl3_solution() * f.chem_energy.fecl3_40 + fl.pac_solution(p) * f.chem_energy.pac_25;
    let mut b = EnergyBreakdown {
        aeration: fl.aeration_energy * s,
        pumps: fl.pump_energy * s,
        chemicals: chemicals * s,
        other: fl.other_energy * s,
        biogas: -fl.biogas_electricity * s,
        total: 0.0,
    };
    b.total = b.aeration + b.pumps + b.chemicals + b.other + b.biogas;
    b
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub energy: f64,
    pub transport: f64,
    pub chemicals: f64,
    pub sludge: f64,
    pub misc: f64,
    /// Subsidy for biogas electricity, negative.
    pub biogas: f64,
    pub total: f64,
}

pub fn life_cycle_cost(fl: &StepFluxes, c: &CostFactors) -> CostBreakdown {
    let s = per_m3(fl);
    let hauled = fl.fecl3_used + fl.pac_pure_used + fl.cake_mass;
    let mut b = CostBreakdown {
        energy: fl.direct_energy() * c.electricity * s,
        transport: hauled * c.distance * c.transport * s,
        chemicals: (fl.fecl3_used * c.fecl3 + fl.pac_pure_used * c.pac) * s,
        sludge: fl.cake_mass * c.landfill * s,
        misc: if fl.treated_volume > 0.0 { c.misc } else { 0.0 },
        biogas: -fl.biogas_electricity * c.biogas_subsidy * s,
        total: 0.0,
    };
    b.total = b.energy + b.transport + b.chemicals + b.sludge + b.misc + b.biogas;
    b
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GhgBreakdown {
    pub process: f64,
    pub energy: f64,
    pub material: f64,
    /// Avoided grid emissions from biogas electricity, negative.
    pub biogas: f64,
    pub total: f64,
}

/// `distance` is the haul distance (km) for chemicals and cake.
pub fn total_ghg(fl: &StepFluxes, f: &EmissionFactors, distance: f64) -> GhgBreakdown {
    let s = per_m3(fl);
    let eff = effluent_ghg(fl.effluent.bod, fl.effluent.tn, &f.ipcc);
    let g = &f.ghg;
    let hauled = fl.fecl3_used + fl.pac_pure_used + fl.cake_mass;
    let mut b = GhgBreakdown {
        process: (g.n2o * (fl.process_n2o + eff.n2o) + g.ch4 * (fl.process_ch4 + eff.ch4)) * s,
        energy: fl.direct_energy() * g.electricity * s,
        material: (fl.fecl3_used * g.fecl3 + fl.pac_pure_used * g.pac + hauled * distance * g.transport) * s,
        biogas: -fl.biogas_electricity * g.electricity * s,
        total: 0.0,
    };
    b.total = b.process + b.energy + b.material + b.biogas;
    b
}

/// All four indicators per m³ of treated wastewater.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ImpactVector {
    /// kWh/m³
    pub energy: EnergyBreakdown,
    /// CNY/m³
    pub cost: CostBreakdown,
    /// kg PO₄-eq/m³
    pub ep: EpBreakdown,
    /// kg CO₂-eq/m³
    pub ghg: GhgBreakdown,
}

impl ImpactVector {
    pub fn value(&self, ind: Indicator) -> f64 {
        match ind {
            Indicator::Energy => self.energy.total,
            Indicator::Ep => self.ep.total,
            Indicator::Ghg => self.ghg.total,
            Indicator::Cost => self.cost.total,
        }
    }
}

pub fn effluent_per_volume(fl: &StepFluxes) -> EffluentPerVolume {
    let s = per_m3(fl);
    let e = &fl.effluent;
    EffluentPerVolume { tp: e.tp * s, cod: e.cod * s, nh4: e.nh4 * s, no3: e.no3 * s, no2: e.no2 * s }
}

pub fn assess(fl: &StepFluxes, f: &EmissionFactors, c: &CostFactors, p: &PlantParams) -> Result<ImpactVector> {
    Ok(ImpactVector {
        energy: total_energy(fl, f, p),
        cost: life_cycle_cost(fl, c),
        ep: eutrophication_potential(&effluent_per_volume(fl), &f.ep)?,
        ghg: total_ghg(fl, f, c.distance),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Indicator {
    Energy,
    Ep,
    Ghg,
    Cost,
}

impl Indicator {
    pub const ALL: [Indicator; 4] = [Indicator::Energy, Indicator::Ep, Indicator::Ghg, Indicator::Cost];

    pub fn name(&self) -> &'static str {
        match self {
            Indicator::Energy => "energy",
            Indicator::Ep => "ep",
            Indicator::Ghg => "ghg",
            Indicator::Cost => "cost",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

/// Sampled extremes of each indicator.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NormalizationBounds {
    pub energy: Option<Range>,
    pub ep: Option<Range>,
    pub ghg: Option<Range>,
    pub cost: Option<Range>,
}

impl NormalizationBounds {
    pub fn get(&self, ind: Indicator) -> Option<Range> {
        match ind {
            Indicator::Energy => self.energy,
            Indicator::Ep => self.ep,
            Indicator::Ghg => self.ghg,
            Indicator::Cost => self.cost,
        }
    }

    fn slot(&mut self, ind: Indicator) -> &mut Option<Range> {
        match ind {
            Indicator::Energy => &mut self.energy,
            Indicator::Ep => &mut self.ep,
            Indicator::Ghg => &mut self.ghg,
            Indicator::Cost => &mut self.cost,
        }
    }

    /// Widens the bounds to include `iv`.
    pub fn include(&mut self, iv: &ImpactVector) {
        for ind in Indicator::ALL {
            let v = iv.value(ind);
            let slot = self.slot(ind);
            *slot = Some(match *slot {
                None => Range { min: v, max: v },
                Some(r) => Range { min: r.min.min(v), max: r.max.max(v) },
            });
        }
    }
}

/// Min–max scaling clipped to `[0, 1]`; degenerate bounds map to 0.
pub fn normalize(x: f64, ind: Indicator, b: &NormalizationBounds) -> Result<f64> {
    let r = b.get(ind).ok_or(Error::MissingBounds(ind.name()))?;
    let span = r.max - r.min;
    if !(span > 0.0) {
        return Ok(0.0);
    }
    Ok(((x - r.min) / span).clamp(0.0, 1.0))
}

/// One sampled operating point, kept so training can start from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub state: PlantState,
    /// Actions applied over the five intervals before `state`, oldest first.
    pub recent_actions: Vec<Action>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSample {
    pub bounds: NormalizationBounds,
    pub points: Vec<SamplePoint>,
}

/// Number of sampled states kept as training start points.
pub const KEPT_SAMPLE_POINTS: usize = 100;

/// Runs `n` control intervals with uniformly random actions and records
/// the extremes of every indicator.
pub fn sample_normalization_bounds(env: &Environment, n: usize, seed: u64) -> Result<NormalizationSample> {
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = env.initial_state()?;
    let mut bounds = NormalizationBounds::default();
    let mut recent: Vec<Action> = vec![Action::BASELINE; crate::marl::HISTORY_LEN];
    let stride = (n / KEPT_SAMPLE_POINTS).max(1);
    let mut points = Vec::new();
    for i in 0..n {
        let a = Action::new(
            rng.random_range(0.0..=crate::plant::DO_BOUNDS.hi),
            rng.random_range(0.0..=crate::plant::DOSE_BOUNDS.hi),
        );
        let out = env.advance(&state, a)?;
        bounds.include(&out.impacts);
        state = out.state;
        recent.remove(0);
        recent.push(a);
        if (i + 1) % stride == 0 && points.len() < KEPT_SAMPLE_POINTS {
            points.push(SamplePoint { state: state.clone(), recent_actions: recent.clone() });
        }
    }
    Ok(NormalizationSample { bounds, points })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RewardMode {
    Lca,
    Cost,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LcaWeights {
    pub energy: f64,
    pub ghg: f64,
    pub ep: f64,
}

impl LcaWeights {
    /// Regional weighting coefficients for EP, GHG and energy, in that order.
    pub const COEFFICIENTS: [f64; 3] = [2.017, 2.754, 2.900];

    pub fn from_coefficients(ep: f64, ghg: f64, energy: f64) -> Self {
        let s = ep + ghg + energy;
        Self { energy: energy / s, ghg: ghg / s, ep: ep / s }
    }

    /// Weights rounded to two decimals for reporting.
    pub fn rounded(&self) -> [f64; 3] {
        let r = |x: f64| (x * 100.0).round() / 100.0;
        [r(self.energy), r(self.ghg), r(self.ep)]
    }

    pub fn sum(&self) -> f64 {
        self.energy + self.ghg + self.ep
    }
}

impl Default for LcaWeights {
    fn default() -> Self {
        let [ep, ghg, energy] = Self::COEFFICIENTS;
        Self::from_coefficients(ep, ghg, energy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub weights: LcaWeights,
    pub violation_penalty: f64,
    pub lambda_smooth: f64,
    pub lambda_magnitude: f64,
    pub mode: RewardMode,
    pub standard: DischargeStandard,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            weights: LcaWeights::default(),
            violation_penalty: 1.0,
            lambda_smooth: 0.1,
            lambda_magnitude: 0.05,
            mode: RewardMode::Lca,
            standard: DischargeStandard::grade_1a(),
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        let w = &self.weights;
        if w.energy < 0.0 || w.ghg < 0.0 || w.ep < 0.0 || (w.sum() - 1.0).abs() > 1e-6 {
            return Err(Error::Config("LCA weights must be >= 0 and sum to 1".into()));
        }
        if self.violation_penalty < 0.0 || self.lambda_smooth < 0.0 || self.lambda_magnitude < 0.0 {
            return Err(Error::Config("penalty coefficients must be >= 0".into()));
        }
        self.standard.validate()
    }
}

pub fn constraint_penalty(
    effluent: &EffluentConcentrations,
    std: &DischargeStandard,
    action: Action,
    previous: Action,
    rc: &RewardConfig,
) -> f64 {
    let violation = if check_standard(effluent, std).passed() { 0.0 } else { rc.violation_penalty };
    let a = action.normalized();
    let b = previous.normalized();
    let smooth = (a[0] - b[0]).abs() + (a[1] - b[1]).abs();
    violation + rc.lambda_smooth * smooth + rc.lambda_magnitude * (a[0] + a[1])
}

pub fn reward(iv: &ImpactVector, b: &NormalizationBounds, penalty: f64, rc: &RewardConfig) -> Result<f64> {
    let cost = match rc.mode {
        RewardMode::Lca => {
            let w = &rc.weights;
            w.energy * normalize(iv.energy.total, Indicator::Energy, b)?
                + w.ep * normalize(iv.ep.total, Indicator::Ep, b)?
                + w.ghg * normalize(iv.ghg.total, Indicator::Ghg, b)?
        }
        RewardMode::Cost => normalize(iv.cost.total, Indicator::Cost, b)?,
    };
    Ok(-(cost + penalty))
}

#[cfg(test)]
mod tests;
