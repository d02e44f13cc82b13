//! Per-agent observations: five hourly slices of influent, time of day
//! and the agent's own control variable.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::influent::{generate_influent, InfluentConfig, InfluentExtremes, InfluentRecord};
use crate::plant::{Action, Bounds, CONTROL_INTERVAL, DOSE_BOUNDS, DO_BOUNDS};

use super::HISTORY_LEN;

/// Features per time slice.
pub const SLICE_FEATURES: usize = 8;
pub const OBS_DIM: usize = HISTORY_LEN * SLICE_FEATURES;

/// Influent sampled at the start of an interval, paired with the action
/// that was in force when it arrived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObsSlice {
    pub influent: InfluentRecord,
    pub action: Action,
}

/// Which control variable an agent owns.
pub fn agent_bounds(agent: usize) -> Bounds {
    if agent == 0 {
        DO_BOUNDS
    } else {
        DOSE_BOUNDS
    }
}

pub fn own_control(a: Action, agent: usize) -> f64 {
    if agent == 0 {
        a.do_setpoint
    } else {
        a.pac_dose
    }
}

/// Fixed min/max used to standardize influent features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObsScale {
    pub influent: InfluentExtremes,
}

impl ObsScale {
    pub fn new(cfg: &InfluentConfig) -> Self {
        Self { influent: cfg.extremes() }
    }
}

fn unit(v: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        (v - lo) / (hi - lo)
    } else {
        0.0
    }
}

/// Builds the observation of `agent` from the last `HISTORY_LEN` slices,
/// oldest first.
pub fn build_observation(history: &[ObsSlice], agent: usize, scale: &ObsScale) -> Result<Vec<f64>> {
    if history.len() < HISTORY_LEN {
        return Err(Error::InvalidArgument(format!("observation needs {HISTORY_LEN} slices, got {}", history.len())));
    }
    let own = agent_bounds(agent);
    let mut o = Vec::with_capacity(OBS_DIM);
    for s in &history[history.len() - HISTORY_LEN..] {
        let r = &s.influent;
        let (lo, hi) = (scale.influent.lo, scale.influent.hi);
        for (k, v) in [r.cod, r.tn, r.tp, r.nh3n, r.q].into_iter().enumerate() {
            o.push(unit(v, lo[k], hi[k]));
        }
        let angle = 2.0 * PI * r.hour_of_day() / 24.0;
        o.push(angle.sin());
        o.push(angle.cos());
        o.push(own.normalize(own_control(s.action, agent)));
    }
    Ok(o)
}

/// History ending at time `t`, with `actions` (oldest first) paired to
/// the slices ending there.
pub fn history_at(cfg: &InfluentConfig, t: f64, actions: &[Action]) -> Vec<ObsSlice> {
    let n = actions.len();
    actions
        .iter()
        .enumerate()
        .map(|(k, a)| ObsSlice {
            influent: generate_influent(cfg, t - (n - 1 - k) as f64 * CONTROL_INTERVAL),
            action: *a,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    fn constant_history(t: f64) -> Vec<ObsSlice> {
        history_at(&InfluentConfig::default(), t, &[Action::BASELINE; HISTORY_LEN])
    }

    #[test]
    fn observation_has_forty_features() {
        let scale = ObsScale::new(&InfluentConfig::default());
        let o = build_observation(&constant_history(3.0), 0, &scale).unwrap();
        assert_eq!(o.len(), 40);
        assert!(o.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn constant_plant_differs_only_in_time() {
        let cfg = InfluentConfig { flow_amplitude: 0.0, concentration_amplitude: 0.0, ..Default::default() };
        let scale = ObsScale::new(&cfg);
        let h = history_at(&cfg, 2.5, &[Action::BASELINE; HISTORY_LEN]);
        let o = build_observation(&h, 1, &scale).unwrap();
        for s in 1..HISTORY_LEN {
            for f in [0, 1, 2, 3, 4, 7] {
                assert_eq!(o[s * SLICE_FEATURES + f], o[f]);
            }
        }
        assert_ne!(o[5], o[SLICE_FEATURES + 5]);
    }

    #[test]
    fn midnight_time_encoding() {
        let scale = ObsScale::new(&InfluentConfig::default());
        let o = build_observation(&constant_history(4.0), 0, &scale).unwrap();
        let last = (HISTORY_LEN - 1) * SLICE_FEATURES;
        assert_abs_diff_eq!(o[last + 5], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(o[last + 6], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn agents_see_only_their_own_control() {
        let scale = ObsScale::new(&InfluentConfig::default());
        let mut h = constant_history(1.0);
        h[4].action = Action::new(5.0, 0.0);
        let last = (HISTORY_LEN - 1) * SLICE_FEATURES + 7;
        assert_eq!(build_observation(&h, 0, &scale).unwrap()[last], 1.0);
        assert_eq!(build_observation(&h, 1, &scale).unwrap()[last], 0.0);
        h[4].action = Action::new(0.0, 0.5);
        assert_eq!(build_observation(&h, 0, &scale).unwrap()[last], 0.0);
        assert_eq!(build_observation(&h, 1, &scale).unwrap()[last], 1.0);
    }

    #[test]
    fn influent_extremes_map_to_unit_interval() {
        let cfg = InfluentConfig::default();
        let scale = ObsScale::new(&cfg);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..=1440 {
            let h = history_at(&cfg, i as f64 / 1440.0, &[Action::BASELINE; HISTORY_LEN]);
            let q = build_observation(&h, 0, &scale).unwrap()[(HISTORY_LEN - 1) * SLICE_FEATURES + 4];
            lo = lo.min(q);
            hi = hi.max(q);
        }
        assert_abs_diff_eq!(lo, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(hi, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn short_history_is_rejected() {
        let scale = ObsScale::new(&InfluentConfig::default());
        let h = constant_history(1.0);
        assert!(build_observation(&h[..4], 0, &scale).is_err());
    }
}
