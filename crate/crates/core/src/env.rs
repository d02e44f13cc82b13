//! One control interval of plant operation, with impacts attached.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::impacts::{assess, CostFactors, EmissionFactors, ImpactVector};
use crate::influent::{generate_influent, InfluentConfig, InfluentRecord};
use crate::plant::{
    step, warmup, Action, EffluentConcentrations, PlantParams, PlantState, StepFluxes, CONTROL_INTERVAL,
};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub plant: PlantParams,
    pub influent: InfluentConfig,
    pub emissions: EmissionFactors,
    pub costs: CostFactors,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub influent: InfluentRecord,
    pub state: PlantState,
    pub fluxes: StepFluxes,
    pub effluent: EffluentConcentrations,
    pub impacts: ImpactVector,
}

impl Environment {
    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        self.influent.validate()?;
        self.emissions.validate()?;
        self.costs.validate()
    }

    /// Plant state after the warm-up under the baseline action.
    pub fn initial_state(&self) -> Result<PlantState> {
        Ok(warmup(&self.plant, &self.influent, Action::BASELINE)?.state)
    }

    /// Applies `action` for one control interval from `state`.
    pub fn advance(&self, state: &PlantState, action: Action) -> Result<Transition> {
        let influent = generate_influent(&self.influent, state.elapsed);
        let (next, fluxes) = step(state, &influent, action, CONTROL_INTERVAL, &self.plant)?;
        let impacts = assess(&fluxes, &self.emissions, &self.costs, &self.plant)?;
        Ok(Transition { influent, state: next, effluent: fluxes.effluent.concentrations(), fluxes, impacts })
    }
}
