//! The five operating scenarios, their evaluation runs and the
//! comparison artifacts (cumulative deltas, component shares, summary).

use std::collections::VecDeque;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::env::{Environment, Transition};
use crate::error::{Error, Result};
use crate::impacts::{
    check_standard, sample_normalization_bounds, DischargeStandard, ImpactVector, NormalizationSample, RewardConfig,
    RewardMode, Standards,
};
use crate::marl::obs::ObsScale;
use crate::marl::{train, History, StepLog, Team, TrainConfig, HISTORY_LEN};
use crate::plant::{Action, PlantState, CONTROL_INTERVAL};

/// Days logged after the warm-up.
pub const EVAL_DAYS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScenarioName {
    #[serde(rename = "Baseline")]
    Baseline,
    #[serde(rename = "LCA-IA")]
    LcaIa,
    #[serde(rename = "LCA-IB")]
    LcaIb,
    #[serde(rename = "LCA-SW")]
    LcaSw,
    #[serde(rename = "Cost")]
    Cost,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 5] =
        [ScenarioName::Baseline, ScenarioName::LcaIa, ScenarioName::LcaIb, ScenarioName::LcaSw, ScenarioName::Cost];

    pub fn label(&self) -> &'static str {
        match self {
            ScenarioName::Baseline => "Baseline",
            ScenarioName::LcaIa => "LCA-IA",
            ScenarioName::LcaIb => "LCA-IB",
            ScenarioName::LcaSw => "LCA-SW",
            ScenarioName::Cost => "Cost",
        }
    }

    /// Lower-case command-line form, e.g. `lca-ia`.
    pub fn slug(&self) -> String {
        self.label().to_lowercase()
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|n| n.slug() == s.to_lowercase())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scenario {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: ScenarioName,
    /// `None` for the fixed-action baseline.
    pub mode: Option<RewardMode>,
    pub standard: DischargeStandard,
    /// Grade I-A, scored alongside every scenario for comparability.
    pub reference: DischargeStandard,
    pub fixed_action: Option<Action>,
}

impl ScenarioSpec {
    pub fn new(name: ScenarioName) -> Self {
        Self::with_standards(name, &Standards::default())
    }

    pub fn with_standards(name: ScenarioName, s: &Standards) -> Self {
        let (mode, standard, fixed_action) = match name {
            ScenarioName::Baseline => (None, &s.grade_1a, Some(Action::BASELINE)),
            ScenarioName::LcaIa => (Some(RewardMode::Lca), &s.grade_1a, None),
            ScenarioName::LcaIb => (Some(RewardMode::Lca), &s.grade_1b, None),
            ScenarioName::LcaSw => (Some(RewardMode::Lca), &s.surface_water_iv, None),
            ScenarioName::Cost => (Some(RewardMode::Cost), &s.grade_1a, None),
        };
        Self { name, mode, standard: standard.clone(), reference: s.grade_1a.clone(), fixed_action }
    }

    pub fn is_trained(&self) -> bool {
        self.mode.is_some()
    }

    /// `base` with this scenario's mode and standard.
    pub fn reward_config(&self, base: &RewardConfig) -> RewardConfig {
        RewardConfig { mode: self.mode.unwrap_or(base.mode), standard: self.standard.clone(), ..base.clone() }
    }
}

/// One logged control interval; impacts are per m³ treated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRecord {
    pub t: f64,
    pub r#do: f64,
    pub dose: f64,
    pub q: f64,
    pub cod: f64,
    pub nh4: f64,
    pub no3: f64,
    pub tn: f64,
    pub tp: f64,
    pub treated_volume: f64,
    pub impacts: ImpactVector,
    /// Against the scenario's own standard.
    pub violation: bool,
    /// Against Grade I-A, for comparability.
    pub violation_1a: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub scenario: ScenarioName,
    pub seed: Option<u64>,
    pub records: Vec<IntervalRecord>,
}

fn record(t: &Transition, action: Action, spec: &ScenarioSpec) -> IntervalRecord {
    let e = &t.effluent;
    IntervalRecord {
        t: t.influent.t,
        r#do: action.do_setpoint,
        dose: action.pac_dose,
        q: t.influent.q,
        cod: e.cod,
        nh4: e.nh4,
        no3: e.no3,
        tn: e.tn,
        tp: e.tp,
        treated_volume: t.fluxes.treated_volume,
        impacts: t.impacts,
        violation: !check_standard(e, &spec.standard).passed(),
        violation_1a: !check_standard(e, &spec.reference).passed(),
    }
}

fn interval_total() -> usize {
    crate::influent::interval_count(EVAL_DAYS, CONTROL_INTERVAL)
}

/// Warm-up under the baseline action, then the logged horizon at the
/// fixed action.
pub fn run_baseline(spec: &ScenarioSpec, env: &Environment) -> Result<EpisodeLog> {
    let action = spec
        .fixed_action
        .ok_or_else(|| Error::InvalidArgument(format!("{} has no fixed action", spec.name.label())))?;
    let mut state = env.initial_state()?;
    let mut records = Vec::with_capacity(interval_total());
    for _ in 0..interval_total() {
        let t = env.advance(&state, action)?;
        records.push(record(&t, action, spec));
        state = t.state;
    }
    Ok(EpisodeLog { scenario: spec.name, seed: None, records })
}

/// Greedy policy rollout from the baseline warm-up state.
pub fn run_trained(spec: &ScenarioSpec, env: &Environment, team: &Team, seed: Option<u64>) -> Result<EpisodeLog> {
    let start = env.initial_state()?;
    run_policy_from(spec, env, team, &start, seed)
}

pub fn run_policy_from(
    spec: &ScenarioSpec,
    env: &Environment,
    team: &Team,
    start: &PlantState,
    seed: Option<u64>,
) -> Result<EpisodeLog> {
    let scale = ObsScale::new(&env.influent);
    let mut state = start.clone();
    let mut history = History::new(env, &state, &[Action::BASELINE; HISTORY_LEN])?;
    let mut records = Vec::with_capacity(interval_total());
    for _ in 0..interval_total() {
        let obs = team.observe(history.slices(), &scale)?;
        let action = team.policy(&obs)?;
        let t = env.advance(&state, action)?;
        records.push(record(&t, action, spec));
        state = t.state;
        history.push(env, state.elapsed, action);
    }
    Ok(EpisodeLog { scenario: spec.name, seed, records })
}

/// Absolute amounts over a horizon: kWh, CNY, kg PO₄-eq, kg CO₂-eq.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub energy: f64,
    pub cost: f64,
    pub ep: f64,
    pub ghg: f64,
}

impl Totals {
    pub fn values(&self) -> [f64; 4] {
        [self.energy, self.cost, self.ep, self.ghg]
    }

    pub const NAMES: [&'static str; 4] = ["energy", "cost", "ep", "ghg"];
}

pub fn cumulative_totals(log: &EpisodeLog) -> Totals {
    let mut t = Totals::default();
    for r in &log.records {
        let v = r.treated_volume;
        t.energy += r.impacts.energy.total * v;
        t.cost += r.impacts.cost.total * v;
        t.ep += r.impacts.ep.total * v;
        t.ghg += r.impacts.ghg.total * v;
    }
    t
}

/// Scenario totals minus baseline totals.
pub fn cumulative_delta(log: &EpisodeLog, baseline: &EpisodeLog) -> Result<Totals> {
    if log.records.len() != baseline.records.len() {
        return Err(Error::HorizonMismatch(log.records.len(), baseline.records.len()));
    }
    let (a, b) = (cumulative_totals(log), cumulative_totals(baseline));
    Ok(Totals { energy: a.energy - b.energy, cost: a.cost - b.cost, ep: a.ep - b.ep, ghg: a.ghg - b.ghg })
}

/// Per-m³ flow-weighted means over the log.
pub fn per_m3(log: &EpisodeLog) -> Totals {
    let v: f64 = log.records.iter().map(|r| r.treated_volume).sum();
    let t = cumulative_totals(log);
    if v <= 0.0 {
        return Totals::default();
    }
    Totals { energy: t.energy / v, cost: t.cost / v, ep: t.ep / v, ghg: t.ghg / v }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentShare {
    pub component: String,
    /// Percent of the gross (positive) total; `None` when that total is 0.
    /// Biogas recovery appears as a negative share.
    pub share: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorBreakdown {
    pub indicator: String,
    pub components: Vec<ComponentShare>,
}

fn shares(indicator: &str, parts: &[(&str, f64)], offset: Option<f64>) -> IndicatorBreakdown {
    let gross: f64 = parts.iter().map(|p| p.1).sum();
    let pct = |x: f64| if gross > 0.0 { Some(100.0 * x / gross) } else { None };
    let mut components: Vec<ComponentShare> =
        parts.iter().map(|(n, x)| ComponentShare { component: (*n).into(), share: pct(*x) }).collect();
    if let Some(b) = offset {
        components.push(ComponentShare { component: "biogas".into(), share: pct(b) });
    }
    IndicatorBreakdown { indicator: indicator.into(), components }
}

/// Component shares of each indicator over the whole log.
pub fn component_breakdown(log: &EpisodeLog) -> Result<Vec<IndicatorBreakdown>> {
    if log.records.is_empty() {
        return Err(Error::InvalidArgument("empty log".into()));
    }
    let sum =
        |f: &dyn Fn(&ImpactVector) -> f64| log.records.iter().map(|r| f(&r.impacts) * r.treated_volume).sum::<f64>();
    Ok(vec![
        shares(
            "energy",
            &[
                ("aeration", sum(&|i| i.energy.aeration)),
                ("pumps", sum(&|i| i.energy.pumps)),
                ("chemicals", sum(&|i| i.energy.chemicals)),
                ("other", sum(&|i| i.energy.other)),
            ],
            Some(sum(&|i| i.energy.biogas)),
        ),
        shares(
            "cost",
            &[
                ("energy", sum(&|i| i.cost.energy)),
                ("transport", sum(&|i| i.cost.transport)),
                ("chemicals", sum(&|i| i.cost.chemicals)),
                ("sludge", sum(&|i| i.cost.sludge)),
                ("misc", sum(&|i| i.cost.misc)),
            ],
            Some(sum(&|i| i.cost.biogas)),
        ),
        shares(
            "ep",
            &[
                ("tp", sum(&|i| i.ep.tp)),
                ("cod", sum(&|i| i.ep.cod)),
                ("nh4", sum(&|i| i.ep.nh4)),
                ("no3", sum(&|i| i.ep.no3)),
                ("no2", sum(&|i| i.ep.no2)),
            ],
            None,
        ),
        shares(
            "ghg",
            &[
                ("process", sum(&|i| i.ghg.process)),
                ("energy", sum(&|i| i.ghg.energy)),
                ("material", sum(&|i| i.ghg.material)),
            ],
            Some(sum(&|i| i.ghg.biogas)),
        ),
    ])
}

pub fn violation_rate(log: &EpisodeLog) -> f64 {
    let n = log.records.len().max(1) as f64;
    log.records.iter().filter(|r| r.violation).count() as f64 / n
}

pub fn mean_action(log: &EpisodeLog) -> Action {
    let n = log.records.len().max(1) as f64;
    Action::new(
        log.records.iter().map(|r| r.r#do).sum::<f64>() / n,
        log.records.iter().map(|r| r.dose).sum::<f64>() / n,
    )
}

/// Trained scenario result for one seed.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub spec: ScenarioSpec,
    pub seed: u64,
    pub reward: RewardConfig,
    pub team: Team,
    pub train_log: Vec<StepLog>,
    pub eval: EpisodeLog,
}

/// Worker count: `WWTP_MARL_THREADS` when set, else available cores.
pub fn worker_count(jobs: usize) -> usize {
    let cap = std::env::var("WWTP_MARL_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    cap.min(jobs).max(1)
}

/// Runs `jobs` on up to `threads` workers; results keep job order.
pub fn run_parallel<J, T, F>(jobs: Vec<J>, threads: usize, f: F) -> Vec<T>
where
    J: Send,
    T: Send,
    F: Fn(J) -> T + Sync,
{
    let n = jobs.len();
    let queue = Mutex::new(jobs.into_iter().enumerate().collect::<VecDeque<_>>());
    let results: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads.clamp(1, n.max(1)) {
            s.spawn(|| loop {
                let next = queue.lock().expect("job queue poisoned").pop_front();
                let Some((i, job)) = next else { break };
                let out = f(job);
                results.lock().expect("result slots poisoned")[i] = Some(out);
            });
        }
    });
    results.into_inner().expect("result slots poisoned").into_iter().map(|r| r.expect("every job ran")).collect()
}

/// Seed used for the normalization sample of a training seed.
pub fn bounds_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub env: Environment,
    pub reward: RewardConfig,
    pub train: TrainConfig,
    pub standards: Standards,
    pub scenarios: Vec<ScenarioName>,
    pub seeds: Vec<u64>,
    pub bounds_samples: usize,
}

impl ExperimentPlan {
    /// Training settings of one seed.
    pub fn train_for(&self, seed: u64) -> TrainConfig {
        TrainConfig { seed, ..self.train.clone() }
    }
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub baseline: EpisodeLog,
    pub runs: Vec<ScenarioRun>,
}

/// Trains one scenario for one seed and evaluates the greedy policy.
pub fn train_and_evaluate(
    env: &Environment,
    sample: &NormalizationSample,
    spec: &ScenarioSpec,
    rc: &RewardConfig,
    tc: &TrainConfig,
) -> Result<ScenarioRun> {
    let rc = spec.reward_config(rc);
    let out = train(env, sample, &rc, tc)?;
    let eval = run_trained(spec, env, &out.team, Some(tc.seed))?;
    Ok(ScenarioRun { spec: spec.clone(), seed: tc.seed, reward: rc, team: out.team, train_log: out.log, eval })
}

/// Baseline plus every trained scenario × seed, fanned out over workers.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<Experiment> {
    plan.env.validate()?;
    let baseline = run_baseline(&ScenarioSpec::with_standards(ScenarioName::Baseline, &plan.standards), &plan.env)?;
    let threads = worker_count(plan.seeds.len());
    let samples = run_parallel(plan.seeds.clone(), threads, |s| {
        sample_normalization_bounds(&plan.env, plan.bounds_samples, bounds_seed(s))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut jobs = Vec::new();
    for name in plan.scenarios.iter().filter(|n| **n != ScenarioName::Baseline) {
        for (k, seed) in plan.seeds.iter().enumerate() {
            jobs.push((ScenarioSpec::with_standards(*name, &plan.standards), k, *seed));
        }
    }
    let threads = worker_count(jobs.len());
    let runs = run_parallel(jobs, threads, |(spec, k, seed)| {
        let tc = plan.train_for(seed);
        log::info!("training {} seed {seed}", spec.name.label());
        train_and_evaluate(&plan.env, &samples[k], &spec, &plan.reward, &tc)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(Experiment { baseline, runs })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self::default();
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std =
            if n > 1 { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TotalsStat {
    pub energy: Stat,
    pub cost: Stat,
    pub ep: Stat,
    pub ghg: Stat,
}

impl TotalsStat {
    fn of(ts: &[Totals]) -> Self {
        let col = |k: usize| Stat::of(&ts.iter().map(|t| t.values()[k]).collect::<Vec<_>>());
        Self { energy: col(0), cost: col(1), ep: col(2), ghg: col(3) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub scenario: ScenarioName,
    pub standard: String,
    pub seeds: Vec<u64>,
    pub mean_do: Stat,
    pub mean_dose: Stat,
    /// Flow-weighted means per m³.
    pub per_m3: TotalsStat,
    /// Cumulative difference from the baseline over the horizon.
    pub delta: TotalsStat,
    pub violation_rate: Stat,
    pub violation_rate_1a: Stat,
    pub breakdown: Vec<IndicatorBreakdown>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub eval_days: f64,
    pub scenarios: Vec<ScenarioSummary>,
}

fn averaged_breakdown(all: &[Vec<IndicatorBreakdown>]) -> Vec<IndicatorBreakdown> {
    let mut out = all[0].clone();
    for (i, ind) in out.iter_mut().enumerate() {
        for (j, c) in ind.components.iter_mut().enumerate() {
            let vals: Option<Vec<f64>> = all.iter().map(|b| b[i].components[j].share).collect();
            c.share = vals.map(|v| Stat::of(&v).mean);
        }
    }
    out
}

fn summarize(
    name: ScenarioName,
    standard: &str,
    seeds: Vec<u64>,
    logs: &[&EpisodeLog],
    baseline: &EpisodeLog,
) -> Result<ScenarioSummary> {
    let acts: Vec<Action> = logs.iter().map(|l| mean_action(l)).collect();
    let deltas = logs.iter().map(|l| cumulative_delta(l, baseline)).collect::<Result<Vec<_>>>()?;
    let per: Vec<Totals> = logs.iter().map(|l| per_m3(l)).collect();
    let breakdowns = logs.iter().map(|l| component_breakdown(l)).collect::<Result<Vec<_>>>()?;
    let rate_1a =
        |l: &EpisodeLog| l.records.iter().filter(|r| r.violation_1a).count() as f64 / l.records.len().max(1) as f64;
    Ok(ScenarioSummary {
        scenario: name,
        standard: standard.into(),
        seeds,
        mean_do: Stat::of(&acts.iter().map(|a| a.do_setpoint).collect::<Vec<_>>()),
        mean_dose: Stat::of(&acts.iter().map(|a| a.pac_dose).collect::<Vec<_>>()),
        per_m3: TotalsStat::of(&per),
        delta: TotalsStat::of(&deltas),
        violation_rate: Stat::of(&logs.iter().map(|l| violation_rate(l)).collect::<Vec<_>>()),
        violation_rate_1a: Stat::of(&logs.iter().map(|l| rate_1a(l)).collect::<Vec<_>>()),
        breakdown: averaged_breakdown(&breakdowns),
    })
}

/// Pure aggregation of the baseline and every evaluation log.
pub fn summary_report(baseline: &EpisodeLog, runs: &[(ScenarioSpec, &EpisodeLog)]) -> Result<SummaryReport> {
    let mut scenarios = vec![summarize(
        ScenarioName::Baseline,
        &ScenarioSpec::new(ScenarioName::Baseline).standard.name,
        vec![],
        &[baseline],
        baseline,
    )?];
    let mut names: Vec<ScenarioName> = runs.iter().map(|(s, _)| s.name).collect();
    names.sort();
    names.dedup();
    for name in names {
        let group: Vec<&(ScenarioSpec, &EpisodeLog)> = runs.iter().filter(|(s, _)| s.name == name).collect();
        let logs: Vec<&EpisodeLog> = group.iter().map(|(_, l)| *l).collect();
        let seeds = logs.iter().filter_map(|l| l.seed).collect();
        scenarios.push(summarize(name, &group[0].0.standard.name, seeds, &logs, baseline)?);
    }
    Ok(SummaryReport { eval_days: EVAL_DAYS, scenarios })
}

impl Experiment {
    pub fn summary(&self) -> Result<SummaryReport> {
        let runs: Vec<(ScenarioSpec, &EpisodeLog)> = self.runs.iter().map(|r| (r.spec.clone(), &r.eval)).collect();
        summary_report(&self.baseline, &runs)
    }
}

/// Flat CSV row of an episode log.
#[derive(Debug, Serialize)]
struct EpisodeRow {
    t: f64,
    r#do: f64,
    dose: f64,
    q: f64,
    cod: f64,
    nh4: f64,
    no3: f64,
    tn: f64,
    tp: f64,
    treated_volume: f64,
    energy: f64,
    cost: f64,
    ep: f64,
    ghg: f64,
    violation: u8,
    violation_1a: u8,
}

pub fn write_episode<W: std::io::Write>(log: &EpisodeLog, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in &log.records {
        wr.serialize(EpisodeRow {
            t: r.t,
            r#do: r.r#do,
            dose: r.dose,
            q: r.q,
            cod: r.cod,
            nh4: r.nh4,
            no3: r.no3,
            tn: r.tn,
            tp: r.tp,
            treated_volume: r.treated_volume,
            energy: r.impacts.energy.total,
            cost: r.impacts.cost.total,
            ep: r.impacts.ep.total,
            ghg: r.impacts.ghg.total,
            violation: u8::from(r.violation),
            violation_1a: u8::from(r.violation_1a),
        })?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_table3<W: std::io::Write>(report: &SummaryReport, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record([
        "scenario",
        "seeds",
        "energy_kwh",
        "energy_std",
        "cost_cny",
        "cost_std",
        "ep_kg_po4",
        "ep_std",
        "ghg_kg_co2",
        "ghg_std",
    ])?;
    for s in report.scenarios.iter().filter(|s| s.scenario != ScenarioName::Baseline) {
        let d = &s.delta;
        let mut row = vec![s.scenario.label().to_string(), s.seeds.len().to_string()];
        for st in [d.energy, d.cost, d.ep, d.ghg] {
            row.push(format!("{}", st.mean));
            row.push(format!("{}", st.std));
        }
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_breakdown<W: std::io::Write>(report: &SummaryReport, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["scenario", "indicator", "component", "share_pct"])?;
    for s in &report.scenarios {
        for ind in &s.breakdown {
            for c in &ind.components {
                let share = c.share.map(|v| format!("{v}")).unwrap_or_else(|| "NA".into());
                wr.write_record([s.scenario.label(), &ind.indicator, &c.component, &share])?;
            }
        }
    }
    wr.flush()?;
    Ok(())
}
