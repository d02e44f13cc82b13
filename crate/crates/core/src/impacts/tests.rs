use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::plant::EffluentLoads;

/// Straight-line reimplementations with literal factors, kept independent
/// of the factor structs.
mod oracle {
    pub fn ep(tp: f64, cod: f64, nh4: f64, no3: f64, no2: f64) -> f64 {
        3.07 * tp + 0.022 * cod + 0.33 * nh4 + 0.095 * no3 + 0.13 * no2
    }

    pub struct Flux {
        pub v: f64,
        pub aer: f64,
        pub pump: f64,
        pub other: f64,
        pub bio: f64,
        pub fecl3: f64,
        pub pac: f64,
        pub cake: f64,
        pub n2o: f64,
        pub ch4: f64,
        pub bod: f64,
        pub tn: f64,
    }

    pub fn energy(f: &Flux) -> f64 {
        let chem = f.fecl3 / 0.4 * 3.4 + f.pac / 0.25 * 1.94;
        (f.aer + f.pump + f.other + chem - f.bio) / f.v
    }

    pub fn cost(f: &Flux) -> f64 {
        let e = (f.aer + f.pump + f.other) * 0.8;
        let t = (f.fecl3 + f.pac + f.cake) * 200.0 * 0.005;
        let c = f.fecl3 * 1.7 + f.pac * 2.5;
        let s = f.cake * 0.52;
        let b = f.bio * 0.25;
        (e + t + c + s - b) / f.v + 0.3
    }

    pub fn ghg(f: &Flux) -> f64 {
        let eff_ch4 = f.bod * 0.25 * 0.035;
        let eff_n2o = f.tn * 0.016 * 44.0 / 28.0;
        let pro = 298.0 * (f.n2o + eff_n2o) + 25.0 * (f.ch4 + eff_ch4);
        let en = (f.aer + f.pump + f.other) * 1.17;
        let mat = f.fecl3 * 0.986 + f.pac * 1.182 + (f.fecl3 + f.pac + f.cake) * 200.0 * 0.000192;
        (pro + en + mat - f.bio * 1.17) / f.v
    }
}

fn fluxes_from(o: &oracle::Flux) -> StepFluxes {
    StepFluxes {
        treated_volume: o.v,
        aeration_energy: o.aer,
        pump_energy: o.pump,
        other_energy: o.other,
        biogas_electricity: o.bio,
        fecl3_used: o.fecl3,
        pac_pure_used: o.pac,
        cake_mass: o.cake,
        process_n2o: o.n2o,
        process_ch4: o.ch4,
        effluent: EffluentLoads { volume: o.v, bod: o.bod, tn: o.tn, ..Default::default() },
        ..Default::default()
    }
}

fn random_flux(rng: &mut ChaCha8Rng) -> oracle::Flux {
    let mut r = |hi: f64| rng.random_range(0.0..hi);
    oracle::Flux {
        v: 1.0 + r(5000.0),
        aer: r(3000.0),
        pump: r(500.0),
        other: r(1000.0),
        bio: r(800.0),
        fecl3: r(20.0),
        pac: r(200.0),
        cake: r(500.0),
        n2o: r(5.0),
        ch4: r(5.0),
        bod: r(50.0),
        tn: r(60.0),
    }
}

fn per_volume(fl: &StepFluxes) -> ImpactVector {
    assess(fl, &EmissionFactors::default(), &CostFactors::default(), &PlantParams::default()).unwrap()
}

fn bounds(lo: f64, hi: f64) -> NormalizationBounds {
    let r = Some(Range { min: lo, max: hi });
    NormalizationBounds { energy: r, ep: r, ghg: r, cost: r }
}

#[test]
fn ep_example() {
    let e = EffluentPerVolume { tp: 0.0004, cod: 0.030, nh4: 0.002, no3: 0.010, no2: 0.0001 };
    let b = eutrophication_potential(&e, &EpFactors::default()).unwrap();
    assert_abs_diff_eq!(b.total, 0.003511, epsilon = 1e-9);
    assert_abs_diff_eq!(b.total, oracle::ep(0.0004, 0.030, 0.002, 0.010, 0.0001), epsilon = 1e-12);

    let only_tp = EffluentPerVolume { tp: 0.001, ..Default::default() };
    let b = eutrophication_potential(&only_tp, &EpFactors::default()).unwrap();
    assert_abs_diff_eq!(b.total, 0.00307, epsilon = 1e-12);
    let zero = eutrophication_potential(&EffluentPerVolume::default(), &EpFactors::default());
    assert_eq!(zero.unwrap().total, 0.0);
}

#[test]
fn ep_rejects_negative_loads() {
    let e = EffluentPerVolume { no3: -1e-6, ..Default::default() };
    assert!(eutrophication_potential(&e, &EpFactors::default()).is_err());
}

#[test]
fn effluent_ghg_examples() {
    let f = IpccFactors::default();
    let g = effluent_ghg(20.0, 0.0, &f);
    assert_abs_diff_eq!(g.ch4, 0.175, epsilon = 1e-12);
    assert_eq!(g.n2o, 0.0);
    let g = effluent_ghg(0.0, 10.0, &f);
    assert_abs_diff_eq!(g.n2o, 0.25143, epsilon = 1e-5);
    assert_abs_diff_eq!(g.n2o, 10.0 * 0.016 * 44.0 / 28.0, epsilon = 1e-12);
    assert_eq!(effluent_ghg(0.0, 0.0, &f), EffluentGhg::default());
}

#[test]
fn energy_example() {
    // chemical energy of 0.078 kWh from a PAC solution of 0.078 / 1.94 kg
    let fl = StepFluxes {
        treated_volume: 1.0,
        aeration_energy: 0.23,
        pump_energy: 0.05,
        other_energy: 0.25,
        biogas_electricity: 0.09,
        pac_pure_used: 0.078 / 1.94 * 0.25,
        ..Default::default()
    };
    let e = total_energy(&fl, &EmissionFactors::default(), &PlantParams::default());
    assert_abs_diff_eq!(e.chemicals, 0.078, epsilon = 1e-12);
    assert_abs_diff_eq!(e.total, 0.518, epsilon = 1e-9);
    assert_abs_diff_eq!(e.gross() + e.biogas, e.total, epsilon = 1e-12);
    assert!(!e.is_net_producer());
}

#[test]
fn biogas_surplus_gives_negative_energy() {
    let fl = StepFluxes { treated_volume: 1.0, aeration_energy: 0.1, biogas_electricity: 0.5, ..Default::default() };
    let e = total_energy(&fl, &EmissionFactors::default(), &PlantParams::default());
    assert_abs_diff_eq!(e.total, -0.4, epsilon = 1e-12);
    assert!(e.is_net_producer());
}

#[test]
fn cost_example() {
    let fl = StepFluxes {
        treated_volume: 1.0,
        aeration_energy: 0.5,
        pac_pure_used: 0.03,
        fecl3_used: 0.005,
        cake_mass: 0.08,
        biogas_electricity: 0.05,
        ..Default::default()
    };
    let c = life_cycle_cost(&fl, &CostFactors::default());
    assert_abs_diff_eq!(c.energy, 0.4, epsilon = 1e-12);
    assert_abs_diff_eq!(c.chemicals, 0.0835, epsilon = 1e-12);
    assert_abs_diff_eq!(c.transport, 0.115, epsilon = 1e-12);
    assert_abs_diff_eq!(c.sludge, 0.0416, epsilon = 1e-12);
    assert_abs_diff_eq!(c.misc, 0.3, epsilon = 1e-12);
    assert_abs_diff_eq!(c.biogas, -0.0125, epsilon = 1e-12);
    assert_abs_diff_eq!(c.total, 0.9276, epsilon = 1e-9);
}

#[test]
fn zero_flux_cost_is_misc_only() {
    let fl = StepFluxes { treated_volume: 1.0, ..Default::default() };
    assert_abs_diff_eq!(life_cycle_cost(&fl, &CostFactors::default()).total, 0.3, epsilon = 1e-12);
}

#[test]
fn electricity_price_scales_energy_cost_only() {
    let fl = StepFluxes {
        treated_volume: 2.0,
        aeration_energy: 0.7,
        pac_pure_used: 0.03,
        cake_mass: 0.1,
        ..Default::default()
    };
    let c1 = CostFactors::default();
    let c2 = CostFactors { electricity: 2.0 * c1.electricity, ..c1.clone() };
    let a = life_cycle_cost(&fl, &c1);
    let b = life_cycle_cost(&fl, &c2);
    assert_abs_diff_eq!(b.energy, 2.0 * a.energy, epsilon = 1e-15);
    assert_eq!((a.chemicals, a.transport, a.sludge), (b.chemicals, b.transport, b.sludge));
}

#[test]
fn ghg_example() {
    let fl = StepFluxes {
        treated_volume: 1.0,
        aeration_energy: 0.5,
        pac_pure_used: 0.03125,
        fecl3_used: 0.005,
        cake_mass: 0.115 - 0.03125 - 0.005,
        process_n2o: 1.8 / 298.0,
        biogas_electricity: 0.09,
        ..Default::default()
    };
    let g = total_ghg(&fl, &EmissionFactors::default(), 200.0);
    assert_abs_diff_eq!(g.energy, 0.585, epsilon = 1e-12);
    assert_abs_diff_eq!(g.process, 1.8, epsilon = 1e-12);
    assert_abs_diff_eq!(g.biogas, -0.1053, epsilon = 1e-12);
    assert_abs_diff_eq!(g.total, 2.326, epsilon = 5e-4);
    assert_abs_diff_eq!(g.total, 2.325_983_5, epsilon = 1e-9);
}

#[test]
fn single_n2o_term() {
    let fl = StepFluxes { treated_volume: 1.0, process_n2o: 0.01, ..Default::default() };
    assert_abs_diff_eq!(total_ghg(&fl, &EmissionFactors::default(), 200.0).total, 2.98, epsilon = 1e-12);
}

#[test]
fn indicators_match_oracles_on_random_fluxes() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let o = random_flux(&mut rng);
        let iv = per_volume(&fluxes_from(&o));
        let tol = |x: f64| 1e-12 * x.abs().max(1.0);
        let e = oracle::energy(&o);
        let c = oracle::cost(&o);
        let g = oracle::ghg(&o);
        assert!((iv.energy.total - e).abs() <= tol(e), "{} vs {e}", iv.energy.total);
        assert!((iv.cost.total - c).abs() <= tol(c), "{} vs {c}", iv.cost.total);
        assert!((iv.ghg.total - g).abs() <= tol(g), "{} vs {g}", iv.ghg.total);

        let ld: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..0.05)).collect();
        let e = EffluentPerVolume { tp: ld[0], cod: ld[1], nh4: ld[2], no3: ld[3], no2: ld[4] };
        let ep = eutrophication_potential(&e, &EpFactors::default()).unwrap().total;
        assert_abs_diff_eq!(ep, oracle::ep(ld[0], ld[1], ld[2], ld[3], ld[4]), epsilon = 1e-12);
    }
}

#[test]
fn components_sum_to_totals() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let iv = per_volume(&fluxes_from(&random_flux(&mut rng)));
        let e = &iv.energy;
        assert_abs_diff_eq!(e.aeration + e.pumps + e.chemicals + e.other + e.biogas, e.total, epsilon = 1e-9);
        let c = &iv.cost;
        let cs = c.energy + c.transport + c.chemicals + c.sludge + c.misc + c.biogas;
        assert_abs_diff_eq!(cs, c.total, epsilon = 1e-9);
        let g = &iv.ghg;
        assert_abs_diff_eq!(g.process + g.energy + g.material + g.biogas, g.total, epsilon = 1e-9);
    }
}

#[test]
fn normalize_examples() {
    let b = bounds(0.0, 10.0);
    assert_eq!(normalize(0.0, Indicator::Ep, &b).unwrap(), 0.0);
    assert_eq!(normalize(10.0, Indicator::Ep, &b).unwrap(), 1.0);
    assert_eq!(normalize(5.0, Indicator::Ep, &b).unwrap(), 0.5);
    assert_eq!(normalize(12.0, Indicator::Ep, &b).unwrap(), 1.0);
    assert_eq!(normalize(-3.0, Indicator::Ep, &b).unwrap(), 0.0);
    assert_eq!(normalize(4.0, Indicator::Ep, &bounds(3.0, 3.0)).unwrap(), 0.0);
    let missing = NormalizationBounds::default();
    assert!(matches!(normalize(1.0, Indicator::Cost, &missing), Err(Error::MissingBounds("cost"))));
}

#[test]
fn weights_round_to_reported_values() {
    let w = LcaWeights::default();
    assert_abs_diff_eq!(w.energy, 2.900 / 7.671, epsilon = 1e-12);
    assert_abs_diff_eq!(w.ep, 2.017 / 7.671, epsilon = 1e-12);
    assert_abs_diff_eq!(w.ghg, 2.754 / 7.671, epsilon = 1e-12);
    assert_eq!(w.rounded(), [0.38, 0.36, 0.26]);
    assert_abs_diff_eq!(w.sum(), 1.0, epsilon = 1e-12);
    assert!(RewardConfig::default().validate().is_ok());
}

#[test]
fn reward_examples() {
    let rc = RewardConfig::default();
    let b = bounds(0.0, 2.0);
    let mut iv = ImpactVector::default();
    iv.energy.total = 1.0;
    iv.ep.total = 1.0;
    iv.ghg.total = 1.0;
    assert_abs_diff_eq!(reward(&iv, &b, 0.0, &rc).unwrap(), -0.5, epsilon = 1e-12);
    assert_abs_diff_eq!(reward(&ImpactVector::default(), &b, 1.0, &rc).unwrap(), -1.0, epsilon = 1e-12);

    let cost_rc = RewardConfig { mode: RewardMode::Cost, ..rc };
    iv.cost.total = 1.5;
    assert_abs_diff_eq!(reward(&iv, &b, 0.2, &cost_rc).unwrap(), -0.95, epsilon = 1e-12);
}

#[test]
fn penalty_examples() {
    let clean = EffluentConcentrations::default();
    let lo = Action::new(0.0, 0.0);
    let quiet = RewardConfig { lambda_smooth: 0.0, lambda_magnitude: 0.0, ..Default::default() };
    let rc = RewardConfig::default();
    let std = DischargeStandard::grade_1a();
    assert_eq!(constraint_penalty(&clean, &std, lo, lo, &rc), 0.0);

    let dirty = EffluentConcentrations { tp: 0.6, ..Default::default() };
    assert_eq!(constraint_penalty(&dirty, &std, lo, lo, &quiet), 1.0);

    let smooth_only = RewardConfig { lambda_smooth: 0.1, ..quiet.clone() };
    let p = constraint_penalty(&clean, &std, Action::new(5.0, 0.1), Action::new(0.0, 0.1), &smooth_only);
    assert_abs_diff_eq!(p, 0.1, epsilon = 1e-12);

    // magnitude term: 0.05 * (0.5 + 0.4)
    let p = constraint_penalty(&clean, &std, Action::new(2.5, 0.2), Action::new(2.5, 0.2), &rc);
    assert_abs_diff_eq!(p, 0.045, epsilon = 1e-12);
}

#[test]
fn standards_use_inclusive_limits() {
    let at_limit = EffluentConcentrations { cod: 50.0, nh4: 5.0, tn: 15.0, tp: 0.5, ..Default::default() };
    assert!(check_standard(&at_limit, &DischargeStandard::grade_1a()).passed());
    assert!(check_standard(&EffluentConcentrations::default(), &DischargeStandard::surface_water_iv()).passed());
    let tp = EffluentConcentrations { tp: 0.4, ..Default::default() };
    assert!(check_standard(&tp, &DischargeStandard::grade_1a()).passed());
    let sw = check_standard(&tp, &DischargeStandard::surface_water_iv());
    assert!(!sw.passed() && !sw.tp && sw.cod && sw.nh3n && sw.tn);
}

#[test]
fn invalid_configs_are_rejected() {
    let rc = RewardConfig { weights: LcaWeights { energy: 0.5, ghg: 0.5, ep: 0.5 }, ..Default::default() };
    assert!(rc.validate().is_err());
    let f = EmissionFactors { ipcc: IpccFactors { mcf: 0.0, ..Default::default() }, ..Default::default() };
    assert!(f.validate().is_err());
    let c = CostFactors { landfill: -1.0, ..Default::default() };
    assert!(c.validate().is_err());
}

#[test]
fn sampling_is_deterministic_and_brackets_samples() {
    let env = Environment::default();
    let a = sample_normalization_bounds(&env, 40, 3).unwrap();
    let b = sample_normalization_bounds(&env, 40, 3).unwrap();
    assert_eq!(a, b);
    for ind in Indicator::ALL {
        let r = a.bounds.get(ind).unwrap();
        assert!(r.min < r.max, "{} degenerate", ind.name());
    }
    assert_eq!(a.points.len(), 40);
    assert!(a.points.iter().all(|p| p.recent_actions.len() == crate::marl::HISTORY_LEN));
    assert!(sample_normalization_bounds(&env, 1, 3).is_err());
}

#[test]
fn degenerate_bounds_normalize_to_zero() {
    let mut b = NormalizationBounds::default();
    let iv = per_volume(&fluxes_from(&random_flux(&mut ChaCha8Rng::seed_from_u64(1))));
    b.include(&iv);
    b.include(&iv);
    for ind in Indicator::ALL {
        assert_eq!(normalize(iv.value(ind), ind, &b).unwrap(), 0.0);
    }
}

proptest! {
    #[test]
    fn totals_scale_with_extensive_fluxes(seed in 0u64..1000, k in 0.01f64..100.0) {
        // per-m³ indicators are invariant when every extensive flux scales together
        let fl = fluxes_from(&random_flux(&mut ChaCha8Rng::seed_from_u64(seed)));
        let a = per_volume(&fl);
        let b = per_volume(&fl.scaled(k));
        for ind in Indicator::ALL {
            let (x, y) = (a.value(ind), b.value(ind));
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
        }
    }

    #[test]
    fn indicators_are_linear_in_fluxes(seed in 0u64..1000, k in 0.01f64..100.0) {
        // at fixed volume, scaling all other fluxes by k scales each total minus its constant by k
        let mut f = fluxes_from(&random_flux(&mut ChaCha8Rng::seed_from_u64(seed)));
        let v = f.treated_volume;
        let a = per_volume(&f);
        f = f.scaled(k);
        f.treated_volume = v;
        let b = per_volume(&f);
        for ind in Indicator::ALL {
            let offset = if ind == Indicator::Cost { 0.3 } else { 0.0 };
            let (x, y) = (a.value(ind) - offset, b.value(ind) - offset);
            prop_assert!((k * x - y).abs() <= 1e-9 * y.abs().max(1.0));
        }
    }

    #[test]
    fn reward_is_monotone(
        e in 0.0f64..1.0, ep in 0.0f64..1.0, g in 0.0f64..1.0, c in 0.0f64..1.0,
        d in 0.0f64..0.5, pen in 0.0f64..2.0, which in 0usize..5,
    ) {
        let b = bounds(0.0, 1.0);
        let mut iv = ImpactVector::default();
        iv.energy.total = e;
        iv.ep.total = ep;
        iv.ghg.total = g;
        iv.cost.total = c;
        let mut worse = iv;
        let mut pen2 = pen;
        match which {
            0 => worse.energy.total += d,
            1 => worse.ep.total += d,
            2 => worse.ghg.total += d,
            3 => worse.cost.total += d,
            _ => pen2 += d,
        }
        for mode in [RewardMode::Lca, RewardMode::Cost] {
            let rc = RewardConfig { mode, ..Default::default() };
            prop_assert!(reward(&worse, &b, pen2, &rc).unwrap() <= reward(&iv, &b, pen, &rc).unwrap());
        }
    }

    #[test]
    fn penalty_is_non_negative(d0 in 0.0f64..5.0, x0 in 0.0f64..0.5, d1 in 0.0f64..5.0, x1 in 0.0f64..0.5, tp in 0.0f64..2.0) {
        let c = EffluentConcentrations { tp, ..Default::default() };
        let p = constraint_penalty(&c, &DischargeStandard::grade_1a(), Action::new(d0, x0), Action::new(d1, x1), &RewardConfig::default());
        prop_assert!(p >= 0.0);
    }
}
