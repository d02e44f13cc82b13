use std::fmt::{self, Write as _};
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use wwtp_core::config::RunConfig;
use wwtp_core::env::Environment;
use wwtp_core::impacts::{assess, sample_normalization_bounds, ImpactVector};
use wwtp_core::influent::{generate_influent, influent_series};
use wwtp_core::marl::{train, window_mean, write_log, TeamDocument};
use wwtp_core::plant::{run_constant, warmup, Action, StepFluxes, CONTROL_INTERVAL};
use wwtp_core::scenarios::{
    bounds_seed, mean_action, run_baseline, run_experiment, run_trained, summary_report, violation_rate,
    write_breakdown, write_episode, write_table3, EpisodeLog, ScenarioName, ScenarioSpec, SummaryReport,
};

use crate::{
    BoundsCommand, Cli, Command, EvaluateArgs, ImpactsCommand, InfluentCommand, PlantCommand, ReportArgs,
    ScenariosCommand, TrainArgs,
};

/// Usage errors exit with 1, runtime failures with 2.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(e) | Failure::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<wwtp_core::Error> for Failure {
    fn from(e: wwtp_core::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(anyhow::anyhow!(msg.into()))
}

/// Every evaluation log of an experiment, as stored in `logs.json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct EvaluationLogs {
    pub baseline: EpisodeLog,
    pub runs: Vec<RunLog>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunLog {
    pub spec: ScenarioSpec,
    pub log: EpisodeLog,
}

pub fn run(cli: Cli) -> Outcome {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|e| Failure::Usage(e.into()))?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Influent(InfluentCommand::Export(a)) => {
            let dir = prepare(&a.out.out)?;
            influent_export(&cfg, a.days, a.interval, &dir)
        }
        Command::Plant(PlantCommand::Simulate(a)) => {
            let action = Action::new(a.do_setpoint, a.dose);
            if !action.is_within_bounds() {
                return Err(usage(format!(
                    "action (DO {}, dose {}) outside the box [0, 5] x [0, 0.5]",
                    a.do_setpoint, a.dose
                )));
            }
            if !(a.days > 0.0) {
                return Err(usage("--days must be > 0"));
            }
            let dir = prepare(&a.out.out)?;
            plant_simulate(&cfg, action, a.days, &dir)
        }
        Command::Impacts(ImpactsCommand::Assess(a)) => {
            let text = fs::read_to_string(&a.fluxes)
                .with_context(|| format!("cannot read {}", a.fluxes.display()))
                .map_err(Failure::Usage)?;
            let dir = prepare(&a.out.out)?;
            impacts_assess(&cfg, &text, &dir)
        }
        Command::Bounds(BoundsCommand::Sample(a)) => {
            let n = a.samples.unwrap_or(cfg.bounds_samples);
            if n < 2 {
                return Err(usage("--samples must be at least 2"));
            }
            let dir = prepare(&a.out.out)?;
            let seed = a.seed.unwrap_or(cfg.seed);
            let sample = sample_normalization_bounds(&cfg.environment(), n, bounds_seed(seed))?;
            write_json(&dir.join("bounds.json"), &sample)?;
            println!("sampled {n} intervals (seed {seed}) -> {}", dir.join("bounds.json").display());
            Ok(())
        }
        Command::Train(a) => train_command(&cfg, a),
        Command::Evaluate(a) => evaluate_command(&cfg, a),
        Command::Scenarios(ScenariosCommand::Run(a)) => {
            let names = if a.all {
                cfg.scenarios.clone()
            } else {
                a.scenario
                    .iter()
                    .map(|s| ScenarioName::parse(s))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| Failure::Usage(e.into()))?
            };
            if names.is_empty() {
                return Err(usage("give --all or at least one --scenario"));
            }
            let mut plan = cfg.experiment_plan();
            plan.scenarios = names;
            if let Some(seeds) = a.seeds {
                if seeds.is_empty() {
                    return Err(usage("--seeds must not be empty"));
                }
                plan.seeds = seeds;
            }
            if let Some(steps) = a.steps {
                plan.train.total_steps = steps;
            }
            plan.train.validate().map_err(|e| Failure::Usage(e.into()))?;
            let dir = prepare(&a.out.out)?;
            let exp = run_experiment(&plan)?;
            write_episode_file(&dir.join("baseline.csv"), &exp.baseline)?;
            let train_dir = prepare(&dir.join("train"))?;
            for r in &exp.runs {
                let stem = format!("{}_seed{}", r.spec.name.slug(), r.seed);
                write_episode_file(&dir.join(format!("{stem}.csv")), &r.eval)?;
                let f = create(&train_dir.join(format!("{stem}_log.csv")))?;
                write_log(&r.train_log, f)?;
                let doc = TeamDocument::new(&r.team, &plan.train_for(r.seed), &r.reward);
                write_text(&train_dir.join(format!("{stem}_agents.json")), &doc.to_json()?)?;
            }
            let logs = EvaluationLogs {
                baseline: exp.baseline.clone(),
                runs: exp.runs.iter().map(|r| RunLog { spec: r.spec.clone(), log: r.eval.clone() }).collect(),
            };
            write_json(&dir.join("logs.json"), &logs)?;
            let report = exp.summary()?;
            write_summary(&dir, &report)?;
            print_summary(&report);
            Ok(())
        }
        Command::Report(a) => report_command(a),
    }
}

fn prepare(dir: &Path) -> Result<std::path::PathBuf, Failure> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display())).map_err(Failure::Runtime)?;
    Ok(dir.to_path_buf())
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_text(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Outcome {
    let text = serde_json::to_string_pretty(value).context("serializing JSON")?;
    write_text(path, &text)
}

fn write_episode_file(path: &Path, log: &EpisodeLog) -> Outcome {
    write_episode(log, create(path)?)?;
    Ok(())
}

fn influent_export(cfg: &RunConfig, days: f64, interval_h: f64, dir: &Path) -> Outcome {
    let series = influent_series(&cfg.influent, days, interval_h / 24.0).map_err(|e| Failure::Usage(e.into()))?;
    let mut w = csv::Writer::from_writer(create(&dir.join("influent.csv"))?);
    w.write_record(["t_days", "Q_m3d", "COD", "TN", "NH3N", "TP"]).context("writing influent.csv")?;
    for r in &series {
        w.write_record([r.t, r.q, r.cod, r.tn, r.nh3n, r.tp].map(|v| v.to_string())).context("writing influent.csv")?;
    }
    w.flush().context("writing influent.csv")?;
    println!("{} records -> {}", series.len(), dir.join("influent.csv").display());
    Ok(())
}

#[derive(Serialize)]
struct PlantRow {
    t_days: f64,
    do_g_m3: f64,
    dose_kg_m3: f64,
    q_m3d: f64,
    cod: f64,
    bod: f64,
    nh4: f64,
    no3: f64,
    no2: f64,
    tn: f64,
    tp: f64,
    treated_m3: f64,
    aeration_kwh: f64,
    pump_kwh: f64,
    other_kwh: f64,
    biogas_kwh: f64,
    fecl3_kg: f64,
    pac_kg: f64,
    cake_kg: f64,
    n2o_kg: f64,
    ch4_kg: f64,
    clamped_substeps: u32,
}

fn plant_simulate(cfg: &RunConfig, action: Action, days: f64, dir: &Path) -> Outcome {
    let warm = warmup(&cfg.plant, &cfg.influent, action)?;
    let (_, fluxes) = run_constant(&warm.state, &cfg.plant, &cfg.influent, action, days)?;
    let mut w = csv::Writer::from_writer(create(&dir.join("plant.csv"))?);
    for (i, fl) in fluxes.iter().enumerate() {
        let t = warm.state.elapsed + i as f64 * CONTROL_INTERVAL;
        let e = fl.effluent.concentrations();
        w.serialize(PlantRow {
            t_days: t,
            do_g_m3: action.do_setpoint,
            dose_kg_m3: action.pac_dose,
            q_m3d: generate_influent(&cfg.influent, t).q,
            cod: e.cod,
            bod: e.bod,
            nh4: e.nh4,
            no3: e.no3,
            no2: e.no2,
            tn: e.tn,
            tp: e.tp,
            treated_m3: fl.treated_volume,
            aeration_kwh: fl.aeration_energy,
            pump_kwh: fl.pump_energy,
            other_kwh: fl.other_energy,
            biogas_kwh: fl.biogas_electricity,
            fecl3_kg: fl.fecl3_used,
            pac_kg: fl.pac_pure_used,
            cake_kg: fl.cake_mass,
            n2o_kg: fl.process_n2o,
            ch4_kg: fl.process_ch4,
            clamped_substeps: fl.clamped,
        })
        .context("writing plant.csv")?;
    }
    w.flush().context("writing plant.csv")?;
    write_json(&dir.join("fluxes.json"), &fluxes)?;
    if !warm.quasi_steady {
        eprintln!(
            "warning: warm-up not quasi-steady ({}.{} changed {:.2}% over the final day)",
            warm.worst_variable.0,
            warm.worst_variable.1,
            100.0 * warm.max_relative_change
        );
    }
    println!("{} intervals -> {}", fluxes.len(), dir.join("plant.csv").display());
    Ok(())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum FluxInput {
    Many(Vec<StepFluxes>),
    One(Box<StepFluxes>),
}

#[derive(Serialize)]
struct ImpactRow {
    index: usize,
    energy_kwh_m3: f64,
    cost_cny_m3: f64,
    ep_kg_po4_m3: f64,
    ghg_kg_co2_m3: f64,
    energy_aeration: f64,
    energy_pumps: f64,
    energy_chemicals: f64,
    energy_other: f64,
    energy_biogas: f64,
    cost_energy: f64,
    cost_transport: f64,
    cost_chemicals: f64,
    cost_sludge: f64,
    cost_misc: f64,
    cost_biogas: f64,
    ghg_process: f64,
    ghg_energy: f64,
    ghg_material: f64,
    ghg_biogas: f64,
}

fn impacts_assess(cfg: &RunConfig, text: &str, dir: &Path) -> Outcome {
    let fluxes = match serde_json::from_str::<FluxInput>(text) {
        Ok(FluxInput::Many(v)) => v,
        Ok(FluxInput::One(f)) => vec![*f],
        Err(_) => {
            // re-parse as an array for a precise message
            serde_json::from_str::<Vec<StepFluxes>>(text)
                .context("flux file must hold one flux object or an array of them")
                .map_err(Failure::Usage)?
        }
    };
    let env = cfg.environment();
    let impacts = fluxes
        .iter()
        .map(|fl| assess(fl, &env.emissions, &env.costs, &env.plant))
        .collect::<Result<Vec<ImpactVector>, _>>()?;
    let mut w = csv::Writer::from_writer(create(&dir.join("impacts.csv"))?);
    for (index, iv) in impacts.iter().enumerate() {
        w.serialize(ImpactRow {
            index,
            energy_kwh_m3: iv.energy.total,
            cost_cny_m3: iv.cost.total,
            ep_kg_po4_m3: iv.ep.total,
            ghg_kg_co2_m3: iv.ghg.total,
            energy_aeration: iv.energy.aeration,
            energy_pumps: iv.energy.pumps,
            energy_chemicals: iv.energy.chemicals,
            energy_other: iv.energy.other,
            energy_biogas: iv.energy.biogas,
            cost_energy: iv.cost.energy,
            cost_transport: iv.cost.transport,
            cost_chemicals: iv.cost.chemicals,
            cost_sludge: iv.cost.sludge,
            cost_misc: iv.cost.misc,
            cost_biogas: iv.cost.biogas,
            ghg_process: iv.ghg.process,
            ghg_energy: iv.ghg.energy,
            ghg_material: iv.ghg.material,
            ghg_biogas: iv.ghg.biogas,
        })
        .context("writing impacts.csv")?;
    }
    w.flush().context("writing impacts.csv")?;
    write_json(&dir.join("impacts.json"), &impacts)?;
    println!("{} records -> {}", impacts.len(), dir.join("impacts.csv").display());
    Ok(())
}

fn trainable(name: &str, cfg: &RunConfig) -> Result<ScenarioSpec, Failure> {
    let name = ScenarioName::parse(name).map_err(|e| Failure::Usage(e.into()))?;
    let spec = ScenarioSpec::with_standards(name, &cfg.standards);
    if !spec.is_trained() {
        return Err(usage(format!("{} has a fixed action and is not trained", name.label())));
    }
    Ok(spec)
}

fn train_command(cfg: &RunConfig, a: TrainArgs) -> Outcome {
    let spec = trainable(&a.scenario, cfg)?;
    let seed = a.seed.unwrap_or(cfg.seed);
    let mut tc = cfg.train_config(seed);
    if let Some(steps) = a.steps {
        tc.total_steps = steps;
    }
    tc.validate().map_err(|e| Failure::Usage(e.into()))?;
    let mut rc = spec.reward_config(&cfg.reward);
    if let Some(p) = a.violation_penalty {
        rc.violation_penalty = p;
    }
    rc.validate().map_err(|e| Failure::Usage(e.into()))?;
    let dir = prepare(&a.out.out)?;

    let env = cfg.environment();
    let sample = sample_normalization_bounds(&env, cfg.bounds_samples, bounds_seed(seed))?;
    let out = train(&env, &sample, &rc, &tc)?;
    write_log(&out.log, create(&dir.join("train_log.csv"))?)?;
    write_text(&dir.join("agents.json"), &TeamDocument::new(&out.team, &tc, &rc).to_json()?)?;
    write_json(&dir.join("bounds.json"), &sample)?;

    let rewards: Vec<f64> = out.log.iter().map(|s| s.reward).collect();
    let n = rewards.len();
    println!(
        "{} seed {seed}: {n} steps, mean reward first 100 {:.4}, last 100 {:.4}",
        spec.name.label(),
        window_mean(&rewards, 0, 100),
        window_mean(&rewards, n.saturating_sub(100), n)
    );
    Ok(())
}

fn evaluate_command(cfg: &RunConfig, a: EvaluateArgs) -> Outcome {
    let text = fs::read_to_string(&a.agents)
        .with_context(|| format!("cannot read {}", a.agents.display()))
        .map_err(Failure::Usage)?;
    let doc = TeamDocument::from_json(&text).map_err(|e| Failure::Usage(e.into()))?;
    let team = doc.to_team().map_err(|e| Failure::Usage(e.into()))?;
    let spec = trainable(&a.scenario, cfg)?;
    let dir = prepare(&a.out.out)?;

    let env: Environment = cfg.environment();
    let log = run_trained(&spec, &env, &team, Some(doc.train_config.seed))?;
    let baseline = run_baseline(&ScenarioSpec::with_standards(ScenarioName::Baseline, &cfg.standards), &env)?;
    write_episode_file(&dir.join(format!("{}.csv", spec.name.slug())), &log)?;
    write_episode_file(&dir.join("baseline.csv"), &baseline)?;
    let report = summary_report(&baseline, &[(spec.clone(), &log)])?;
    write_json(&dir.join("summary.json"), &report)?;

    let m = mean_action(&log);
    println!(
        "{}: mean DO {:.3} g/m³, mean dose {:.4} kg/m³, violation rate {:.3}",
        spec.name.label(),
        m.do_setpoint,
        m.pac_dose,
        violation_rate(&log)
    );
    Ok(())
}

fn report_command(a: ReportArgs) -> Outcome {
    let text = fs::read_to_string(&a.logs)
        .with_context(|| format!("cannot read {}", a.logs.display()))
        .map_err(Failure::Usage)?;
    let logs: EvaluationLogs = serde_json::from_str(&text)
        .with_context(|| format!("{} is not an evaluation log file", a.logs.display()))
        .map_err(Failure::Usage)?;
    let dir = prepare(&a.out.out)?;
    let runs: Vec<(ScenarioSpec, &EpisodeLog)> = logs.runs.iter().map(|r| (r.spec.clone(), &r.log)).collect();
    let report = summary_report(&logs.baseline, &runs)?;
    write_summary(&dir, &report)?;
    write_text(&dir.join("report.md"), &markdown(&report))?;
    print_summary(&report);
    Ok(())
}

fn write_summary(dir: &Path, report: &SummaryReport) -> Outcome {
    write_json(&dir.join("summary.json"), report)?;
    write_table3(report, create(&dir.join("table3_analog.csv"))?)?;
    write_breakdown(report, create(&dir.join("breakdown.csv"))?)?;
    Ok(())
}

fn print_summary(report: &SummaryReport) {
    println!("scenario    DO g/m³  dose kg/m³  dE kWh   dCost CNY  dEP kg PO4  dGHG kg CO2  violations");
    for s in &report.scenarios {
        println!(
            "{:<10} {:>8.3} {:>11.4} {:>7.0} {:>10.1} {:>11.3} {:>12.0} {:>10.3}",
            s.scenario.label(),
            s.mean_do.mean,
            s.mean_dose.mean,
            s.delta.energy.mean,
            s.delta.cost.mean,
            s.delta.ep.mean,
            s.delta.ghg.mean,
            s.violation_rate.mean
        );
    }
}

fn markdown(report: &SummaryReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Scenario summary\n");
    let _ = writeln!(s, "Evaluation horizon: {} d. Values are means over seeds (± sample std).\n", report.eval_days);
    let _ = writeln!(s, "| Scenario | Standard | Seeds | DO (g/m³) | Dose (kg/m³) | Energy (kWh/m³) | Cost (CNY/m³) | EP (kg PO₄-eq/m³) | GHG (kg CO₂-eq/m³) | Violation rate |");
    let _ = writeln!(s, "|---|---|---|---|---|---|---|---|---|---|");
    for r in &report.scenarios {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {:.3} ± {:.3} | {:.4} ± {:.4} | {:.4} | {:.4} | {:.6} | {:.4} | {:.3} |",
            r.scenario.label(),
            r.standard,
            r.seeds.len(),
            r.mean_do.mean,
            r.mean_do.std,
            r.mean_dose.mean,
            r.mean_dose.std,
            r.per_m3.energy.mean,
            r.per_m3.cost.mean,
            r.per_m3.ep.mean,
            r.per_m3.ghg.mean,
            r.violation_rate.mean
        );
    }
    let _ = writeln!(s, "\n## Cumulative difference from the baseline\n");
    let _ = writeln!(s, "| Scenario | Energy (kWh) | Cost (CNY) | EP (kg PO₄-eq) | GHG (kg CO₂-eq) |");
    let _ = writeln!(s, "|---|---|---|---|---|");
    for r in report.scenarios.iter().filter(|r| r.scenario != ScenarioName::Baseline) {
        let d = &r.delta;
        let _ = writeln!(
            s,
            "| {} | {:+.0} ± {:.0} | {:+.1} ± {:.1} | {:+.3} ± {:.3} | {:+.0} ± {:.0} |",
            r.scenario.label(),
            d.energy.mean,
            d.energy.std,
            d.cost.mean,
            d.cost.std,
            d.ep.mean,
            d.ep.std,
            d.ghg.mean,
            d.ghg.std
        );
    }
    s
}
