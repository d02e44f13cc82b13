//! Deterministic diurnal influent generator.
//!
//! Flow follows a double-peak daily pattern `p(t)` built from two raised
//! cosines (zero daily mean, maximum exactly +1). Concentrations share the
//! same shape but are diluted when the flow is high.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Full width of each raised-cosine peak, in hours.
pub const PEAK_WIDTH_HOURS: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InfluentConfig {
    /// m³/d
    pub mean_flow: f64,
    /// Fraction of the mean flow.
    pub flow_amplitude: f64,
    /// Hours of day of the morning and evening peaks.
    pub peak_hours: [f64; 2],
    /// g/m³
    pub mean_cod: f64,
    pub mean_tn: f64,
    pub mean_nh3n: f64,
    pub mean_tp: f64,
    pub concentration_amplitude: f64,
    pub dilution_coupling: f64,
}

impl Default for InfluentConfig {
    fn default() -> Self {
        Self {
            mean_flow: 2000.0,
            flow_amplitude: 0.3,
            peak_hours: [8.0, 19.0],
            mean_cod: 400.0,
            mean_tn: 40.0,
            mean_nh3n: 25.0,
            mean_tp: 6.0,
            concentration_amplitude: 0.2,
            dilution_coupling: 0.5,
        }
    }
}

impl InfluentConfig {
    pub fn validate(&self) -> Result<()> {
        let means = [
            ("mean_flow", self.mean_flow),
            ("mean_cod", self.mean_cod),
            ("mean_tn", self.mean_tn),
            ("mean_nh3n", self.mean_nh3n),
            ("mean_tp", self.mean_tp),
        ];
        for (name, v) in means {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("influent.{name} must be > 0, got {v}")));
            }
        }
        for (name, v) in
            [("flow_amplitude", self.flow_amplitude), ("concentration_amplitude", self.concentration_amplitude)]
        {
            if !(0.0..=0.9).contains(&v) {
                return Err(Error::Config(format!("influent.{name} must lie in [0, 0.9], got {v}")));
            }
        }
        if !(self.dilution_coupling >= 0.0) {
            return Err(Error::Config("influent.dilution_coupling must be >= 0".into()));
        }
        if self.mean_nh3n > self.mean_tn {
            return Err(Error::Config("influent.mean_nh3n must not exceed mean_tn".into()));
        }
        for h in self.peak_hours {
            if !(0.0..24.0).contains(&h) {
                return Err(Error::Config(format!("influent peak hour {h} outside [0, 24)")));
            }
        }
        Ok(())
    }

    /// Influent extremes over one day, used to standardize observations.
    pub fn extremes(&self) -> InfluentExtremes {
        let shape = DiurnalShape::new(self.peak_hours);
        let mut lo = [f64::INFINITY; 5];
        let mut hi = [f64::NEG_INFINITY; 5];
        for i in 0..=1440 {
            let r = self.record_with_shape(&shape, i as f64 / 1440.0);
            for (k, v) in [r.cod, r.tn, r.tp, r.nh3n, r.q].into_iter().enumerate() {
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
        }
        InfluentExtremes { lo, hi }
    }

    fn record_with_shape(&self, shape: &DiurnalShape, t: f64) -> InfluentRecord {
        let p = shape.value(t);
        let q = self.mean_flow * (1.0 + self.flow_amplitude * p);
        let factor =
            (1.0 + self.concentration_amplitude * p) / (1.0 + self.dilution_coupling * self.flow_amplitude * p);
        InfluentRecord {
            t,
            q,
            cod: self.mean_cod * factor,
            tn: self.mean_tn * factor,
            nh3n: self.mean_nh3n * factor,
            tp: self.mean_tp * factor,
        }
    }
}

/// Daily extremes in observation feature order: COD, TN, TP, NH3N, Q.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfluentExtremes {
    pub lo: [f64; 5],
    pub hi: [f64; 5],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfluentRecord {
    /// Days since simulation start.
    pub t: f64,
    /// m³/d
    pub q: f64,
    pub cod: f64,
    pub tn: f64,
    pub nh3n: f64,
    pub tp: f64,
}

impl InfluentRecord {
    pub fn hour_of_day(&self) -> f64 {
        hour_of_day(self.t)
    }
}

pub fn hour_of_day(t: f64) -> f64 {
    24.0 * (t - t.floor())
}

/// Double-peak unit-amplitude diurnal pattern with zero daily mean.
#[derive(Debug, Clone, Copy)]
pub struct DiurnalShape {
    peaks: [f64; 2],
    mean: f64,
    scale: f64,
}

impl DiurnalShape {
    pub fn new(peaks: [f64; 2]) -> Self {
        // Each compact raised cosine integrates to half its width.
        let mean = 2.0 * (PEAK_WIDTH_HOURS / 2.0) / 24.0;
        let mut max_raw = f64::NEG_INFINITY;
        for h in peaks {
            max_raw = max_raw.max(Self::raw(peaks, h));
        }
        for i in 0..2880 {
            max_raw = max_raw.max(Self::raw(peaks, i as f64 / 120.0));
        }
        Self { peaks, mean, scale: max_raw - mean }
    }

    fn raw(peaks: [f64; 2], hour: f64) -> f64 {
        peaks
            .iter()
            .map(|&c| {
                let mut d = (hour - c).rem_euclid(24.0);
                if d > 12.0 {
                    d -= 24.0;
                }
                if d.abs() < PEAK_WIDTH_HOURS / 2.0 {
                    0.5 * (1.0 + (2.0 * std::f64::consts::PI * d / PEAK_WIDTH_HOURS).cos())
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// Shape value at `t` days.
    pub fn value(&self, t: f64) -> f64 {
        (Self::raw(self.peaks, hour_of_day(t)) - self.mean) / self.scale
    }
}

pub fn generate_influent(cfg: &InfluentConfig, t: f64) -> InfluentRecord {
    cfg.record_with_shape(&DiurnalShape::new(cfg.peak_hours), t)
}

/// Records at `0, dt, 2dt, … < horizon`.
pub fn influent_series(cfg: &InfluentConfig, horizon: f64, dt: f64) -> Result<Vec<InfluentRecord>> {
    if !(horizon > 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidArgument("horizon and dt must be positive".into()));
    }
    if dt > horizon {
        return Err(Error::InvalidArgument(format!("dt ({dt}) exceeds horizon ({horizon})")));
    }
    let n = interval_count(horizon, dt);
    let shape = DiurnalShape::new(cfg.peak_hours);
    Ok((0..n).map(|i| cfg.record_with_shape(&shape, i as f64 * dt)).collect())
}

/// `ceil(horizon / dt)` with tolerance for representation error.
pub fn interval_count(horizon: f64, dt: f64) -> usize {
    let ratio = horizon / dt;
    let rounded = ratio.round();
    if (ratio - rounded).abs() < 1e-9 * ratio.max(1.0) {
        rounded as usize
    } else {
        ratio.ceil() as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_amplitude_gives_constant_flow() {
        let cfg = InfluentConfig { flow_amplitude: 0.0, ..Default::default() };
        for i in 0..100 {
            let r = generate_influent(&cfg, i as f64 * 0.0137);
            assert_eq!(r.q, cfg.mean_flow);
        }
    }

    #[test]
    fn daily_period() {
        let cfg = InfluentConfig::default();
        for i in 0..50 {
            let t = i as f64 * 0.173;
            let a = generate_influent(&cfg, t);
            let b = generate_influent(&cfg, t + 1.0);
            assert!((a.q - b.q).abs() < 1e-12 * a.q);
            assert!((a.cod - b.cod).abs() < 1e-12 * a.cod);
            assert!((a.tp - b.tp).abs() < 1e-12 * a.tp);
        }
    }

    #[test]
    fn first_peak_flow() {
        let cfg = InfluentConfig { mean_flow: 2000.0, flow_amplitude: 0.3, ..Default::default() };
        let shape = DiurnalShape::new(cfg.peak_hours);
        let t = cfg.peak_hours[0] / 24.0;
        assert!((shape.value(t) - 1.0).abs() < 1e-12);
        assert!((generate_influent(&cfg, t).q - 2600.0).abs() < 1e-9);
    }

    #[test]
    fn series_counts() {
        let cfg = InfluentConfig::default();
        assert_eq!(influent_series(&cfg, 10.0, 1.0 / 24.0).unwrap().len(), 240);
        let one = influent_series(&cfg, 1.0, 1.0).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].t, 0.0);
        assert!(influent_series(&cfg, 1.0, 2.0).is_err());
    }

    #[test]
    fn series_matches_pointwise() {
        let cfg = InfluentConfig::default();
        let dt = 1.0 / 24.0;
        for (i, r) in influent_series(&cfg, 2.0, dt).unwrap().iter().enumerate() {
            assert_eq!(*r, generate_influent(&cfg, i as f64 * dt));
        }
    }

    #[test]
    fn daily_mean_flow() {
        let cfg = InfluentConfig::default();
        let n = 24 * 60 * 3;
        let mean: f64 = (0..n).map(|i| generate_influent(&cfg, 3.0 * i as f64 / n as f64).q).sum::<f64>() / n as f64;
        assert!((mean - cfg.mean_flow).abs() / cfg.mean_flow < 1e-3);
    }

    #[test]
    fn ammonia_never_exceeds_total_nitrogen() {
        let cfg = InfluentConfig::default();
        for r in influent_series(&cfg, 1.0, 1.0 / 288.0).unwrap() {
            assert!(r.nh3n <= r.tn);
            assert!(r.q > 0.0 && r.cod >= 0.0 && r.tp >= 0.0);
        }
    }

    #[test]
    fn high_flow_dilutes() {
        let cfg = InfluentConfig { concentration_amplitude: 0.0, ..Default::default() };
        let peak = generate_influent(&cfg, cfg.peak_hours[0] / 24.0);
        assert!(peak.cod < cfg.mean_cod);
    }

    #[test]
    fn validation() {
        assert!(InfluentConfig::default().validate().is_ok());
        let bad = InfluentConfig { mean_nh3n: 50.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = InfluentConfig { flow_amplitude: 0.95, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
