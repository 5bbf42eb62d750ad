//! Set-membership estimator robust to measurement attacks of bounded length.

use std::collections::VecDeque;

use crate::config::IntersectionConfig;
use crate::detector::Decision;
use crate::model::{BoxUnion, Control};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EstimatorError {
    #[error("estimate became empty at step {k}: predicted {predicted:?} does not meet trust window {trusted:?}")]
    EmptyCorrection {
        k: usize,
        predicted: BoxUnion,
        trusted: BoxUnion,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EstimatorState {
    /// Last `T_max` (measurement, input applied after it) pairs, oldest first.
    pub history: VecDeque<(Vec<i64>, Control)>,
    /// Latest measurement `x̃_k`.
    pub last_meas: Vec<i64>,
    /// `I^c_k`.
    pub corrected: BoxUnion,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EstimatorOutcome {
    Updated(EstimatorState),
    Detected,
}

/// `Î_k = Post_{u_{k′}…u_{k−1}}(x̃_{k′}) ∪ {x̃_k}`; just `{x̃_k}` for an empty sequence.
pub fn trust_window(cfg: &IntersectionConfig, anchor: &[i64], seq: &[Control], meas: &[i64]) -> BoxUnion {
    let point = BoxUnion::point(meas);
    if seq.is_empty() {
        return point;
    }
    BoxUnion::point(anchor).post_seq(cfg, seq).union(&point)
}

/// `I^p_k = Post_{u_c}(I^c_{k−1})`.
pub fn predict(cfg: &IntersectionConfig, corrected: &BoxUnion, control: &Control) -> BoxUnion {
    corrected.post(cfg, control)
}

/// `I^c_k = I^p_k ∩ Î_k`.
pub fn correct(predicted: &BoxUnion, trusted: &BoxUnion) -> BoxUnion {
    predicted.intersect(trusted)
}

impl EstimatorState {
    /// Starts from the trusted initial set with the uncorrupted first measurement.
    pub fn new(cfg: &IntersectionConfig, meas0: &[i64]) -> Self {
        EstimatorState {
            history: VecDeque::new(),
            last_meas: meas0.to_vec(),
            corrected: cfg.x0().clone(),
            k: 0,
        }
    }

    /// Trust window for the next step, or the universe while fewer than
    /// `T_max` steps have elapsed.
    pub fn next_trust_window(&self, cfg: &IntersectionConfig, control: &Control, meas: &[i64]) -> BoxUnion {
        let t = cfg.t_max();
        let k = self.k + 1;
        if k < t {
            return BoxUnion::universe(cfg.n());
        }
        let mut window: Vec<(&[i64], &Control)> = self.history.iter().map(|(m, u)| (m.as_slice(), u)).collect();
        window.push((&self.last_meas, control));
        let window = &window[window.len() - t..];
        let anchor = window.first().map(|w| w.0).unwrap_or(meas);
        let seq: Vec<Control> = window.iter().map(|w| w.1.clone()).collect();
        trust_window(cfg, anchor, &seq, meas)
    }

    /// Step without correction: `I^c_{k+1} = I^p_{k+1}`. Used after an alarm
    /// by loops that keep running.
    pub fn open_loop(&self, cfg: &IntersectionConfig, meas: &[i64], control: &Control) -> EstimatorState {
        let mut history = self.history.clone();
        history.push_back((self.last_meas.clone(), control.clone()));
        while history.len() > cfg.t_max() {
            history.pop_front();
        }
        EstimatorState {
            history,
            last_meas: meas.to_vec(),
            corrected: predict(cfg, &self.corrected, control),
            k: self.k + 1,
        }
    }

    /// Processes `x̃_{k+1}` after applying `control` at step `k`.
    pub fn step(
        &self,
        cfg: &IntersectionConfig,
        meas: &[i64],
        control: &Control,
        decision: Decision,
    ) -> Result<EstimatorOutcome, EstimatorError> {
        if decision == Decision::H1 {
            return Ok(EstimatorOutcome::Detected);
        }
        let predicted = predict(cfg, &self.corrected, control);
        let trusted = self.next_trust_window(cfg, control, meas);
        let corrected = correct(&predicted, &trusted);
        if corrected.is_empty() {
            return Err(EstimatorError::EmptyCorrection {
                k: self.k + 1,
                predicted,
                trusted,
            });
        }
        let mut history = self.history.clone();
        history.push_back((self.last_meas.clone(), control.clone()));
        while history.len() > cfg.t_max() {
            history.pop_front();
        }
        Ok(EstimatorOutcome::Updated(EstimatorState {
            history,
            last_meas: meas.to_vec(),
            corrected,
            k: self.k + 1,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::presets;
    use crate::model::Interval;

    fn bx(lo: [i64; 2], hi: [i64; 2]) -> BoxUnion {
        BoxUnion::from_box(vec![Interval::new(lo[0], hi[0]), Interval::new(lo[1], hi[1])])
    }

    #[test]
    fn trust_window_absorbs_inner_measurement() {
        let cfg = presets::two_vehicle_config();
        let w = trust_window(&cfg, &[1000, 1000], &[Control(vec![1, 3])], &[2000, 5000]);
        assert_eq!(w, bx([2000, 4000], [3000, 5000]));
    }

    #[test]
    fn predict_box() {
        let cfg = presets::two_vehicle_config();
        let p = predict(&cfg, &bx([2000, 4000], [3000, 5000]), &Control(vec![1, 3]));
        assert_eq!(p, bx([3000, 7000], [5000, 9000]));
    }

    #[test]
    fn correction_step_from_the_example() {
        let p = bx([3000, 7000], [5000, 9000]);
        let hat = bx([3000, 8000], [4000, 9000]).union(&BoxUnion::point(&[3000, 8000]));
        assert_eq!(correct(&p, &hat), bx([3000, 8000], [4000, 9000]));
        assert_eq!(correct(&p, &BoxUnion::universe(2)), p);
    }

    #[test]
    fn surge_step_gives_the_post_box() {
        let cfg = presets::two_vehicle_config();
        let s = EstimatorState::new(&cfg, &[1000, 1000]);
        let EstimatorOutcome::Updated(s1) = s.step(&cfg, &[2000, 5000], &Control(vec![1, 3]), Decision::H0).unwrap() else {
            panic!("not detected")
        };
        assert_eq!(s1.corrected, bx([2000, 4000], [3000, 5000]));
        assert_eq!(s.step(&cfg, &[9000, 9000], &Control(vec![1, 3]), Decision::H1).unwrap(), EstimatorOutcome::Detected);
    }

    #[test]
    fn zero_window_tracks_measurements() {
        let cfg = presets::two_vehicle_config().with_t_max(0);
        let s = EstimatorState::new(&cfg, &[1000, 1000]);
        let EstimatorOutcome::Updated(s1) = s.step(&cfg, &[2300, 4700], &Control(vec![1, 3]), Decision::H0).unwrap() else {
            panic!()
        };
        assert_eq!(s1.corrected, BoxUnion::point(&[2300, 4700]));
    }
}
