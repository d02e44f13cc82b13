//! Acceptance checks 1 to 8, one PASS/FAIL line each.
//!
//! Runs without the libtest harness. A failing criterion is reported but
//! only fails the process when `WWTP_ACCEPTANCE_STRICT=1`.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wwtp_core::env::Environment;
use wwtp_core::impacts::{
    effluent_ghg, eutrophication_potential, life_cycle_cost, sample_normalization_bounds, total_ghg, CostFactors,
    EffluentPerVolume, EmissionFactors, EpFactors, IpccFactors, LcaWeights, NormalizationSample, RewardConfig,
};
use wwtp_core::marl::buffer::ReplayBuffer;
use wwtp_core::marl::nn::{soft_update, Mlp, Output};
use wwtp_core::marl::persist::TeamDocument;
use wwtp_core::marl::train::{train, write_log, Team, TrainConfig};
use wwtp_core::marl::window_mean;
use wwtp_core::plant::{
    pump_energy, run_constant, Action, Kinetics, MassLoads, PlantParams, PlantState, Pump, StepFluxes,
};
use wwtp_core::scenarios::{
    bounds_seed, cumulative_delta, mean_action, run_baseline, run_parallel, train_and_evaluate, violation_rate,
    worker_count, ScenarioName, ScenarioRun, ScenarioSpec, Totals,
};

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const MIN_SEEDS: usize = 4;

const FORMULA_TOL: f64 = 1e-9;
const GRADIENT_TOL: f64 = 1e-4;
const GRADIENT_PAIRS: usize = 100;
const FD_STEP: f64 = 1e-5;
const CONSERVATION_TOL: f64 = 1e-3;
const LEARNING_GAIN: f64 = 0.2;
const LEARNING_WINDOW: usize = 100;
const VIOLATION_LIMIT: f64 = 0.1;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn timed(limit: Duration, elapsed: Duration, v: Verdict) -> Verdict {
    let within = elapsed <= limit;
    verdict(
        v.pass && within,
        format!("{}; {:.2} s (limit {:.0} s)", v.detail, elapsed.as_secs_f64(), limit.as_secs_f64()),
    )
}

// 1. Formula oracles

fn formula_oracles() -> Verdict {
    let start = Instant::now();
    let mut checks: Vec<(&str, f64, f64, f64, f64)> = Vec::new();

    // name, code value, straight-line oracle, stated value, printed precision
    let ep = eutrophication_potential(
        &EffluentPerVolume { tp: 0.0004, cod: 0.030, nh4: 0.002, no3: 0.010, no2: 0.0001 },
        &EpFactors::default(),
    )
    .expect("EP of valid loads")
    .total;
    let ep_oracle = 3.07 * 0.0004 + 0.022 * 0.030 + 0.33 * 0.002 + 0.095 * 0.010 + 0.13 * 0.0001;
    checks.push(("EP", ep, ep_oracle, 0.003511, 5e-7));

    let pump = pump_energy(0.01, &Pump::default());
    checks.push(("pump", pump, 1000.0 * 9.8 * 0.01 * 6.0 / (1000.0 * 0.7), 0.84, 5e-3));

    let ipcc = IpccFactors::default();
    checks.push(("CH4", effluent_ghg(20.0, 0.0, &ipcc).ch4, 20.0 * 0.25 * 0.035, 0.175, 5e-4));
    checks.push(("N2O", effluent_ghg(0.0, 10.0, &ipcc).n2o, 10.0 * 0.016 * 44.0 / 28.0, 0.25143, 5e-6));

    let cost_flux = StepFluxes {
        treated_volume: 1.0,
        aeration_energy: 0.5,
        pac_pure_used: 0.03,
        fecl3_used: 0.005,
        cake_mass: 0.08,
        biogas_electricity: 0.05,
        ..Default::default()
    };
    let cost = life_cycle_cost(&cost_flux, &CostFactors::default()).total;
    let cost_oracle =
        0.5 * 0.8 + (0.03 * 2.5 + 0.005 * 1.7) + (0.03 + 0.005 + 0.08) * 200.0 * 0.005 + 0.08 * 0.52 + 0.3
            - 0.05 * 0.25;
    checks.push(("cost", cost, cost_oracle, 0.9276, 5e-5));

    let ghg_flux = StepFluxes {
        treated_volume: 1.0,
        aeration_energy: 0.5,
        pac_pure_used: 0.03125,
        fecl3_used: 0.005,
        cake_mass: 0.115 - 0.03125 - 0.005,
        process_n2o: 1.8 / 298.0,
        biogas_electricity: 0.09,
        ..Default::default()
    };
    let ghg = total_ghg(&ghg_flux, &EmissionFactors::default(), 200.0).total;
    let ghg_oracle = 0.5 * 1.17 + 0.03125 * 1.182 + 0.005 * 0.986 + 0.115 * 200.0 * 0.000192 + 1.8 - 0.09 * 1.17;
    checks.push(("GHG", ghg, ghg_oracle, 2.326, 5e-4));

    let mut pass = true;
    let mut worst: f64 = 0.0;
    for (name, code, oracle, stated, printed) in &checks {
        let err = (code - oracle).abs();
        worst = worst.max(err);
        if err > FORMULA_TOL || (oracle - stated).abs() > *printed {
            pass = false;
            eprintln!("  {name}: code {code}, oracle {oracle}, stated {stated}");
        }
    }
    timed(
        Duration::from_secs(1),
        start.elapsed(),
        verdict(pass, format!("{} oracles, worst deviation {worst:.1e} (tol {FORMULA_TOL:.0e})", checks.len())),
    )
}

// 2. Gradient correctness

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-6)
}

fn gradient_check() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let actor: (&[usize], Output) = (&[40, 64, 64, 1], Output::Squash { lo: 0.0, hi: 5.0 });
    let critic: (&[usize], Output) = (&[82, 64, 64, 1], Output::Identity);
    let small: [(&[usize], Output); 3] = [
        (&[3, 5, 2], Output::Identity),
        (&[4, 6, 6, 1], Output::Squash { lo: 0.0, hi: 0.5 }),
        (&[5, 7, 3, 2], Output::Squash { lo: -1.0, hi: 2.0 }),
    ];
    let mut worst: f64 = 0.0;
    let mut compared = 0usize;
    for pair in 0..GRADIENT_PAIRS {
        // full-size networks in one pair of ten keep the check inside its time budget
        let (sizes, out) = match pair % 10 {
            0 => actor,
            5 => critic,
            _ => small[pair % small.len()],
        };
        let net = Mlp::new(sizes, out, &mut rng).expect("valid shape");
        let batch = 1 + pair % 3;
        let x: Vec<f64> = (0..batch * sizes[0]).map(|_| rng.random_range(-2.0..2.0)).collect();
        let c: Vec<f64> = (0..batch * net.output_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let loss = |n: &Mlp, v: &[f64]| -> f64 {
            let (y, _) = n.forward(v, batch).expect("forward");
            y.iter().zip(&c).map(|(a, b)| a * b).sum()
        };
        let (_, cache) = net.forward(&x, batch).expect("forward");
        let (g, dx) = net.backward(&cache, &c, true).expect("backward");
        let mut n = net.clone();
        for (k, gk) in g.iter().enumerate() {
            let p0 = n.params()[k];
            n.params_mut()[k] = p0 + FD_STEP;
            let up = loss(&n, &x);
            n.params_mut()[k] = p0 - FD_STEP;
            let down = loss(&n, &x);
            n.params_mut()[k] = p0;
            worst = worst.max(rel_err(*gk, (up - down) / (2.0 * FD_STEP)));
        }
        let dx = dx.expect("input gradient");
        for k in 0..x.len() {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[k] += FD_STEP;
            xm[k] -= FD_STEP;
            worst = worst.max(rel_err(dx[k], (loss(&net, &xp) - loss(&net, &xm)) / (2.0 * FD_STEP)));
        }
        compared += g.len() + x.len();
    }
    timed(
        Duration::from_secs(30),
        start.elapsed(),
        verdict(
            worst < GRADIENT_TOL,
            format!("{GRADIENT_PAIRS} pairs, {compared} derivatives, worst relative error {worst:.1e} (tol {GRADIENT_TOL:.0e})"),
        ),
    )
}

// 3. Conservation

fn conservation() -> Verdict {
    let start = Instant::now();
    let p = PlantParams { kinetics: Kinetics::default().reactions_off(), wastage_enabled: false, ..Default::default() };
    let cfg = wwtp_core::influent::InfluentConfig::default();
    let s0 = PlantState::seed();
    let (s1, fl) = run_constant(&s0, &p, &cfg, Action::new(1.5, 0.0), 1.0).expect("reactions-off run");
    let mut inflow = MassLoads::default();
    let mut sludge = MassLoads::default();
    let (mut cod, mut n, mut phos) = (0.0, 0.0, 0.0);
    for f in &fl {
        inflow += f.influent_load;
        sludge += f.sludge_line_load;
        cod += f.effluent.cod;
        n += f.effluent.tn;
        phos += f.effluent.tp;
    }
    let (before, after) = (s0.inventory(&p), s1.inventory(&p));
    let gap = |i: f64, o: f64, a: f64, b: f64| (i - o - (b - a)).abs() / i;
    let gaps = [
        gap(inflow.cod, cod + sludge.cod, before.cod, after.cod),
        gap(inflow.n, n + sludge.n, before.n, after.n),
        gap(inflow.p, phos + sludge.p, before.p, after.p),
    ];
    let worst = gaps.iter().cloned().fold(0.0, f64::max);
    timed(
        Duration::from_secs(10),
        start.elapsed(),
        verdict(
            worst < CONSERVATION_TOL,
            format!(
                "COD {:.1e}, N {:.1e}, P {:.1e} relative imbalance over 1 d (tol {CONSERVATION_TOL:.0e})",
                gaps[0], gaps[1], gaps[2]
            ),
        ),
    )
}

// 5 to 7 share one batch of training runs.

struct Runs {
    ia: Vec<ScenarioRun>,
    ib: Vec<ScenarioRun>,
    sw: Vec<ScenarioRun>,
    cost: Vec<ScenarioRun>,
    ablation: Vec<ScenarioRun>,
    durations: Vec<Duration>,
    samples: Vec<NormalizationSample>,
    baseline: wwtp_core::scenarios::EpisodeLog,
}

fn run_all(env: &Environment) -> Runs {
    let samples = run_parallel(SEEDS.to_vec(), worker_count(SEEDS.len()), |s| {
        sample_normalization_bounds(env, 10_000, bounds_seed(s)).expect("normalization sample")
    });
    let baseline = run_baseline(&ScenarioSpec::new(ScenarioName::Baseline), env).expect("baseline run");
    let ablated = RewardConfig { violation_penalty: 0.0, ..RewardConfig::default() };
    let names = [ScenarioName::LcaIa, ScenarioName::LcaIb, ScenarioName::LcaSw, ScenarioName::Cost];
    let mut jobs = Vec::new();
    for (variant, name) in names.iter().enumerate() {
        for k in 0..SEEDS.len() {
            jobs.push((variant, *name, k));
        }
    }
    for k in 0..SEEDS.len() {
        jobs.push((names.len(), ScenarioName::LcaIa, k));
    }
    let total = jobs.len();
    let threads = worker_count(total);
    eprintln!("  training {total} runs on {threads} worker(s)");
    let results = run_parallel(jobs, threads, |(variant, name, k)| {
        let start = Instant::now();
        let rc = if variant == names.len() { ablated.clone() } else { RewardConfig::default() };
        let tc = TrainConfig { seed: SEEDS[k], ..TrainConfig::default() };
        let run = train_and_evaluate(env, &samples[k], &ScenarioSpec::new(name), &rc, &tc).expect("training run");
        (variant, run, start.elapsed())
    });
    let mut groups: Vec<Vec<ScenarioRun>> = (0..=names.len()).map(|_| Vec::new()).collect();
    let mut durations = Vec::new();
    for (variant, run, d) in results {
        groups[variant].push(run);
        durations.push(d);
    }
    let ablation = groups.pop().unwrap();
    let cost = groups.pop().unwrap();
    let sw = groups.pop().unwrap();
    let ib = groups.pop().unwrap();
    let ia = groups.pop().unwrap();
    Runs { ia, ib, sw, cost, ablation, durations, samples, baseline }
}

// 4. Determinism

fn determinism(env: &Environment, runs: &Runs) -> Verdict {
    let first = &runs.ia[0];
    let one_run = runs.durations[0];
    let start = Instant::now();
    let rc = ScenarioSpec::new(ScenarioName::LcaIa).reward_config(&RewardConfig::default());
    let tc = TrainConfig { seed: SEEDS[0], ..TrainConfig::default() };
    let again = train(env, &runs.samples[0], &rc, &tc).expect("repeat run");
    let elapsed = start.elapsed();
    let bytes = |log: &[wwtp_core::marl::train::StepLog]| {
        let mut v = Vec::new();
        write_log(log, &mut v).expect("log serializes");
        v
    };
    let doc = |team: &Team| TeamDocument::new(team, &tc, &rc).to_json().expect("agents serialize");
    let same_log = bytes(&first.train_log) == bytes(&again.log);
    let same_agents = doc(&first.team) == doc(&again.team);
    timed(
        2 * one_run,
        elapsed,
        verdict(same_log && same_agents, format!("log identical {same_log}, agents identical {same_agents}")),
    )
}

// 5. Learning curve

fn learning_curve(runs: &Runs) -> Verdict {
    let mut passing = 0;
    let mut parts = Vec::new();
    for run in &runs.ia {
        let r: Vec<f64> = run.train_log.iter().map(|s| s.reward).collect();
        let n = r.len();
        let early = window_mean(&r, 0, LEARNING_WINDOW);
        let late = window_mean(&r, n.saturating_sub(LEARNING_WINDOW), n);
        let lo = r.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let gain = (late - early) / (hi - lo).max(f64::EPSILON);
        if gain >= LEARNING_GAIN {
            passing += 1;
        }
        parts.push(format!("{:+.3}", gain));
    }
    let slowest = runs.durations.iter().max().cloned().unwrap_or_default();
    timed(
        Duration::from_secs(600),
        slowest,
        verdict(
            passing >= MIN_SEEDS,
            format!(
                "late minus early window mean / reward range per seed [{}], {passing} of {} >= {LEARNING_GAIN}",
                parts.join(", "),
                runs.ia.len()
            ),
        ),
    )
}

// 6. Trend reproduction

fn trends(runs: &Runs) -> Verdict {
    let base = Action::BASELINE;
    let act = |v: &[ScenarioRun]| v.iter().map(|r| mean_action(&r.eval)).collect::<Vec<_>>();
    let (ia, ib, sw, cost) = (act(&runs.ia), act(&runs.ib), act(&runs.sw), act(&runs.cost));
    let count = |f: &dyn Fn(usize) -> bool| (0..SEEDS.len()).filter(|k| f(*k)).count();
    let delta = |r: &ScenarioRun| cumulative_delta(&r.eval, &runs.baseline).expect("matching horizons");
    let saving = |t: Totals| t.energy < 0.0 && t.cost < 0.0 && t.ghg < 0.0 && t.ep >= 0.0;
    let reverse = |t: Totals| t.energy > 0.0 && t.cost > 0.0 && t.ghg > 0.0 && t.ep < 0.0;
    let sign = count(&|k| {
        saving(delta(&runs.ia[k]))
            && saving(delta(&runs.ib[k]))
            && saving(delta(&runs.cost[k]))
            && reverse(delta(&runs.sw[k]))
    });
    let checks = [
        ("a", count(&|k| ia[k].do_setpoint < base.do_setpoint && ia[k].pac_dose < base.pac_dose)),
        ("b", count(&|k| cost[k].do_setpoint <= ia[k].do_setpoint)),
        ("c", count(&|k| ib[k].do_setpoint <= ia[k].do_setpoint)),
        ("d", count(&|k| sw[k].pac_dose > base.pac_dose)),
        ("e", sign),
    ];
    let pass = checks.iter().all(|(_, n)| *n >= MIN_SEEDS);
    let mean = |v: &[Action]| {
        let n = v.len() as f64;
        (v.iter().map(|a| a.do_setpoint).sum::<f64>() / n, v.iter().map(|a| a.pac_dose).sum::<f64>() / n)
    };
    let fmt = |(d, x): (f64, f64)| format!("{d:.2}/{x:.3}");
    verdict(
        pass,
        format!(
            "seeds holding {}; mean DO/dose IA {} IB {} SW {} Cost {}",
            checks.iter().map(|(c, n)| format!("({c}) {n}/5")).collect::<Vec<_>>().join(" "),
            fmt(mean(&ia)),
            fmt(mean(&ib)),
            fmt(mean(&sw)),
            fmt(mean(&cost)),
        ),
    )
}

// 7. Constraint efficacy

fn constraint_efficacy(runs: &Runs) -> Verdict {
    let rate = |v: &[ScenarioRun]| v.iter().map(|r| violation_rate(&r.eval)).sum::<f64>() / v.len() as f64;
    let (with, without) = (rate(&runs.ia), rate(&runs.ablation));
    verdict(
        with < VIOLATION_LIMIT && with < without,
        format!(
            "LCA-IA violation rate {:.1}% (limit {:.0}%), penalty-0 ablation {:.1}%",
            100.0 * with,
            100.0 * VIOLATION_LIMIT,
            100.0 * without
        ),
    )
}

// 8. Structural invariants

fn invariants() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut failures = Vec::new();

    for _ in 0..200 {
        let cap = rng.random_range(1..50usize);
        let pushes = rng.random_range(0..200usize);
        let mut buf = ReplayBuffer::new(cap);
        for i in 0..pushes {
            buf.push(i);
        }
        let kept: Vec<usize> = buf.iter().cloned().collect();
        let expected: Vec<usize> = (pushes.saturating_sub(cap)..pushes).collect();
        if kept != expected {
            failures.push("buffer FIFO");
            break;
        }
    }

    for _ in 0..100 {
        let tau = rng.random_range(0.001..0.5);
        let k = rng.random_range(1..50i32);
        let learned = Mlp::new(&[3, 4, 1], Output::Identity, &mut rng).expect("net");
        let mut target = Mlp::new(&[3, 4, 1], Output::Identity, &mut rng).expect("net");
        let gap0: Vec<f64> = target.params().iter().zip(learned.params()).map(|(t, l)| t - l).collect();
        for _ in 0..k {
            soft_update(&mut target, &learned, tau).expect("soft update");
        }
        let factor = (1.0 - tau).powi(k);
        let ok = target
            .params()
            .iter()
            .zip(learned.params())
            .zip(&gap0)
            .all(|((t, l), g)| ((t - l) - factor * g).abs() <= 1e-12 * (1.0 + g.abs()));
        if !ok {
            failures.push("soft-update decay");
            break;
        }
    }

    let cfg = TrainConfig::default().agent_config();
    let team = Team::new(&cfg, &mut rng).expect("team");
    for _ in 0..500 {
        let scale = rng.random_range(0.1..100.0);
        let obs: [Vec<f64>; 2] = std::array::from_fn(|_| (0..40).map(|_| rng.random_range(-scale..scale)).collect());
        let explore = rng.random_bool(0.5);
        let a = team.act(&obs, explore, &mut rng).expect("action");
        if !a.is_within_bounds() {
            failures.push("action box");
            break;
        }
    }

    let w = LcaWeights::default();
    if (w.sum() - 1.0).abs() > 1e-12 || w.rounded() != [0.38, 0.36, 0.26] {
        failures.push("weights");
    }

    timed(
        Duration::from_secs(10),
        start.elapsed(),
        verdict(
            failures.is_empty(),
            if failures.is_empty() {
                "buffer FIFO, soft-update (1 - tau)^k decay, action box and weight sum hold".into()
            } else {
                format!("violated: {}", failures.join(", "))
            },
        ),
    )
}

fn main() {
    let report = |n: usize, name: &str, v: &Verdict| {
        println!("criterion {n} {}: {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        v.pass
    };
    let mut passed = Vec::new();
    passed.push(report(1, "formula oracles", &formula_oracles()));
    passed.push(report(2, "gradient correctness", &gradient_check()));
    passed.push(report(3, "conservation", &conservation()));

    let env = Environment::default();
    let start = Instant::now();
    let runs = run_all(&env);
    eprintln!("  training batch took {:.0} s", start.elapsed().as_secs_f64());
    passed.push(report(4, "determinism", &determinism(&env, &runs)));
    passed.push(report(5, "learning curve", &learning_curve(&runs)));
    passed.push(report(6, "trend reproduction", &trends(&runs)));
    passed.push(report(7, "constraint efficacy", &constraint_efficacy(&runs)));
    passed.push(report(8, "structural invariants", &invariants()));

    let n = passed.iter().filter(|p| **p).count();
    println!("acceptance: {n} of {} criteria passed", passed.len());
    let strict = std::env::var("WWTP_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && n < passed.len() {
        std::process::exit(1);
    }
}
