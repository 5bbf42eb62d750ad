//! Nonparametric CUSUM detector.

use crate::config::IntersectionConfig;
use crate::model::{Control, Interval};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    H0,
    H1,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DetectorState {
    /// Per-vehicle statistic `C_i`, in ticks.
    pub c: Vec<i64>,
    pub bias: Vec<i64>,
    pub threshold: Vec<i64>,
}

impl DetectorState {
    pub fn new(cfg: &IntersectionConfig) -> Self {
        DetectorState {
            c: vec![0; cfg.n()],
            bias: cfg.bias().to_vec(),
            threshold: cfg.threshold().to_vec(),
        }
    }

    /// `C_i ← max(C_i + z_i, 0)`.
    pub fn update(&self, z: &[i64]) -> DetectorState {
        DetectorState {
            c: self.c.iter().zip(z).map(|(c, z)| (c + z).max(0)).collect(),
            ..self.clone()
        }
    }

    pub fn decide(&self) -> Decision {
        if self.c.iter().zip(&self.threshold).any(|(c, eta)| c > eta) {
            Decision::H1
        } else {
            Decision::H0
        }
    }

    /// Residual at the first step, which has no predecessor measurement.
    pub fn initial_residual(&self) -> Vec<i64> {
        self.bias.iter().map(|b| -b).collect()
    }

    /// One detector step: residual, update, decision.
    pub fn observe(
        &self,
        cfg: &IntersectionConfig,
        meas: &[i64],
        prev_meas: &[i64],
        control: &Control,
    ) -> (DetectorState, Vec<i64>, Decision) {
        let z = residual(cfg, meas, prev_meas, control, &self.bias);
        let next = self.update(&z);
        let d = next.decide();
        (next, z, d)
    }
}

/// `[x̂_min, x̂_max]`: hull of the one-step image of the previous measurement.
pub fn predicted_range(cfg: &IntersectionConfig, prev_meas: &[i64], control: &Control) -> Vec<Interval> {
    prev_meas
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let (a, b) = cfg.step_range(i, control);
            Interval::new(x + a, x + b)
        })
        .collect()
}

/// `z_i = dist(x̃_i, [x̂_min, x̂_max]) − b_i`.
pub fn residual(cfg: &IntersectionConfig, meas: &[i64], prev_meas: &[i64], control: &Control, bias: &[i64]) -> Vec<i64> {
    predicted_range(cfg, prev_meas, control)
        .iter()
        .zip(meas)
        .zip(bias)
        .map(|((r, &x), b)| r.distance(x) - b)
        .collect()
}
