//! Browser demo of the plant surrogate and the life-cycle reward.
//!
//! Three operations are exported to JavaScript, each returning a JSON
//! string: the diurnal influent curve, a constant-action simulation with
//! its impacts, and the reward landscape of static actions.

use serde::Serialize;
use wasm_bindgen::prelude::*;
use wwtp_core::env::Environment;
use wwtp_core::impacts::{check_standard, constraint_penalty, reward, sample_normalization_bounds};
use wwtp_core::influent::influent_series;
use wwtp_core::plant::{Action, DOSE_BOUNDS, DO_BOUNDS};
use wwtp_core::scenarios::{ScenarioName, ScenarioSpec};

#[derive(Debug, Clone, Serialize)]
pub struct InfluentCurve {
    pub hours: Vec<f64>,
    /// m³/d
    pub q: Vec<f64>,
    /// g/m³
    pub cod: Vec<f64>,
    pub tn: Vec<f64>,
    pub nh3n: Vec<f64>,
    pub tp: Vec<f64>,
}

/// One day of influent sampled every `step_minutes`.
pub fn influent_curve(step_minutes: f64) -> Result<InfluentCurve, String> {
    if !(1.0..=240.0).contains(&step_minutes) {
        return Err(format!("step must lie in [1, 240] min, got {step_minutes}"));
    }
    let env = Environment::default();
    let series = influent_series(&env.influent, 1.0, step_minutes / 1440.0).map_err(|e| e.to_string())?;
    Ok(InfluentCurve {
        hours: series.iter().map(|r| r.t * 24.0).collect(),
        q: series.iter().map(|r| r.q).collect(),
        cod: series.iter().map(|r| r.cod).collect(),
        tn: series.iter().map(|r| r.tn).collect(),
        nh3n: series.iter().map(|r| r.nh3n).collect(),
        tp: series.iter().map(|r| r.tp).collect(),
    })
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Indicators {
    /// kWh/m³
    pub energy: f64,
    /// CNY/m³
    pub cost: f64,
    /// kg PO₄-eq/m³
    pub ep: f64,
    /// kg CO₂-eq/m³
    pub ghg: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Simulation {
    /// Hours since the end of the warm-up.
    pub hours: Vec<f64>,
    /// Effluent, g/m³.
    pub nh4: Vec<f64>,
    pub tn: Vec<f64>,
    pub tp: Vec<f64>,
    pub cod: Vec<f64>,
    /// Per interval, per m³.
    pub energy: Vec<f64>,
    pub cost: Vec<f64>,
    pub ep: Vec<f64>,
    pub ghg: Vec<f64>,
    /// Volume-weighted means over the run.
    pub mean: Indicators,
    /// Intervals exceeding the Grade I-A limits.
    pub violations: usize,
}

fn check_action(do_setpoint: f64, dose: f64) -> Result<Action, String> {
    let a = Action::new(do_setpoint, dose);
    if !a.is_within_bounds() {
        return Err(format!(
            "action must lie in DO [{}, {}] g/m³ and dose [{}, {}] kg/m³",
            DO_BOUNDS.lo, DO_BOUNDS.hi, DOSE_BOUNDS.lo, DOSE_BOUNDS.hi
        ));
    }
    Ok(a)
}

/// Holds a constant action for `days` after the baseline warm-up.
pub fn simulate(do_setpoint: f64, dose: f64, days: f64) -> Result<Simulation, String> {
    let action = check_action(do_setpoint, dose)?;
    if !(days > 0.0 && days <= 30.0) {
        return Err(format!("days must lie in (0, 30], got {days}"));
    }
    let env = Environment::default();
    let grade_1a = ScenarioSpec::new(ScenarioName::Baseline).standard;
    let mut state = env.initial_state().map_err(|e| e.to_string())?;
    let start = state.elapsed;
    let n = (days * 24.0).round() as usize;
    let mut sim = Simulation {
        hours: Vec::with_capacity(n),
        nh4: Vec::with_capacity(n),
        tn: Vec::with_capacity(n),
        tp: Vec::with_capacity(n),
        cod: Vec::with_capacity(n),
        energy: Vec::with_capacity(n),
        cost: Vec::with_capacity(n),
        ep: Vec::with_capacity(n),
        ghg: Vec::with_capacity(n),
        mean: Indicators::default(),
        violations: 0,
    };
    let mut volume = 0.0;
    for _ in 0..n {
        let t = env.advance(&state, action).map_err(|e| e.to_string())?;
        let (e, iv, v) = (&t.effluent, &t.impacts, t.fluxes.treated_volume);
        sim.hours.push((state.elapsed - start) * 24.0);
        sim.nh4.push(e.nh4);
        sim.tn.push(e.tn);
        sim.tp.push(e.tp);
        sim.cod.push(e.cod);
        sim.energy.push(iv.energy.total);
        sim.cost.push(iv.cost.total);
        sim.ep.push(iv.ep.total);
        sim.ghg.push(iv.ghg.total);
        sim.mean.energy += iv.energy.total * v;
        sim.mean.cost += iv.cost.total * v;
        sim.mean.ep += iv.ep.total * v;
        sim.mean.ghg += iv.ghg.total * v;
        volume += v;
        if !check_standard(e, &grade_1a).passed() {
            sim.violations += 1;
        }
        state = t.state;
    }
    if volume > 0.0 {
        sim.mean.energy /= volume;
        sim.mean.cost /= volume;
        sim.mean.ep /= volume;
        sim.mean.ghg /= volume;
    }
    Ok(sim)
}

#[derive(Debug, Clone, Serialize)]
pub struct Landscape {
    pub scenario: String,
    /// g O₂/m³
    pub do_values: Vec<f64>,
    /// kg/m³
    pub dose_values: Vec<f64>,
    /// Mean reward per interval, `reward[i][j]` at `do_values[i]`, `dose_values[j]`.
    pub reward: Vec<Vec<f64>>,
    /// Fraction of intervals over the scenario's limits.
    pub violation: Vec<Vec<f64>>,
    pub best_do: f64,
    pub best_dose: f64,
    pub best_reward: f64,
    pub baseline_reward: f64,
}

/// Mean reward of static actions on a `points × points` grid, each held
/// for `days` from the baseline warm-up state. Normalization extremes come
/// from `samples` random-action intervals.
pub fn reward_landscape(scenario: &str, points: usize, days: f64, samples: usize) -> Result<Landscape, String> {
    let name = ScenarioName::parse(scenario).map_err(|e| e.to_string())?;
    let spec = ScenarioSpec::new(name);
    if !spec.is_trained() {
        return Err(format!("{} has no reward", name.label()));
    }
    if !(2..=41).contains(&points) {
        return Err(format!("points must lie in [2, 41], got {points}"));
    }
    if !(days > 0.0 && days <= 5.0) {
        return Err(format!("days must lie in (0, 5], got {days}"));
    }
    let env = Environment::default();
    let rc = spec.reward_config(&Default::default());
    let sample = sample_normalization_bounds(&env, samples.max(2), 0).map_err(|e| e.to_string())?;
    let start = env.initial_state().map_err(|e| e.to_string())?;
    let n = ((days * 24.0).round() as usize).max(1);

    let score = |a: Action| -> Result<(f64, f64), String> {
        let mut state = start.clone();
        let mut prev = Action::BASELINE;
        let (mut total, mut violations) = (0.0, 0usize);
        for _ in 0..n {
            let t = env.advance(&state, a).map_err(|e| e.to_string())?;
            let pen = constraint_penalty(&t.effluent, &rc.standard, a, prev, &rc);
            total += reward(&t.impacts, &sample.bounds, pen, &rc).map_err(|e| e.to_string())?;
            if !check_standard(&t.effluent, &rc.standard).passed() {
                violations += 1;
            }
            prev = a;
            state = t.state;
        }
        Ok((total / n as f64, violations as f64 / n as f64))
    };

    let axis = |hi: f64| (0..points).map(|i| hi * i as f64 / (points - 1) as f64).collect::<Vec<_>>();
    let do_values = axis(DO_BOUNDS.hi);
    let dose_values = axis(DOSE_BOUNDS.hi);
    let mut out = Landscape {
        scenario: name.label().into(),
        reward: Vec::with_capacity(points),
        violation: Vec::with_capacity(points),
        best_do: 0.0,
        best_dose: 0.0,
        best_reward: f64::NEG_INFINITY,
        baseline_reward: score(Action::BASELINE)?.0,
        do_values,
        dose_values,
    };
    for &d in &out.do_values {
        let mut row = Vec::with_capacity(points);
        let mut vrow = Vec::with_capacity(points);
        for &x in &out.dose_values {
            let (r, v) = score(Action::new(d, x))?;
            if r > out.best_reward {
                out.best_reward = r;
                out.best_do = d;
                out.best_dose = x;
            }
            row.push(r);
            vrow.push(v);
        }
        out.reward.push(row);
        out.violation.push(vrow);
    }
    Ok(out)
}

fn to_json<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    let v = r.map_err(|e| JsValue::from_str(&e))?;
    serde_json::to_string(&v).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen(js_name = influentCurve)]
pub fn influent_curve_json(step_minutes: f64) -> Result<String, JsValue> {
    to_json(influent_curve(step_minutes))
}

#[wasm_bindgen(js_name = simulate)]
pub fn simulate_json(do_setpoint: f64, dose: f64, days: f64) -> Result<String, JsValue> {
    to_json(simulate(do_setpoint, dose, days))
}

#[wasm_bindgen(js_name = rewardLandscape)]
pub fn reward_landscape_json(scenario: &str, points: usize, days: f64, samples: usize) -> Result<String, JsValue> {
    to_json(reward_landscape(scenario, points, days, samples))
}
