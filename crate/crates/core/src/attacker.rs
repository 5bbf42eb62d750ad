//! Stealthy-attack characterisation and attack generators.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::IntersectionConfig;
use crate::detector::{predicted_range, DetectorState};
use crate::model::{BoxUnion, Control, Interval};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AttackStrategy {
    /// Largest undetectable error, then ride the detector threshold.
    Surge { sign: Sign },
    /// Constant error added to every target, in ticks.
    Offset { offset: i64 },
    /// Uniform over the stealthy interval on the tick grid.
    RandomStealthy,
    /// Explicit per-step error vectors (ticks) for the window.
    Trace { errors: Vec<Vec<i64>> },
}

impl AttackStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            AttackStrategy::Surge { sign: Sign::Positive } => "surge+",
            AttackStrategy::Surge { sign: Sign::Negative } => "surge-",
            AttackStrategy::Offset { .. } => "offset",
            AttackStrategy::RandomStealthy => "random",
            AttackStrategy::Trace { .. } => "trace",
        }
    }
}

/// Corrupts the targets' measurements during steps `start..end`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AttackPlan {
    pub targets: Vec<usize>,
    pub start: usize,
    pub end: usize,
    pub strategy: AttackStrategy,
}

impl AttackPlan {
    pub fn is_active(&self, k: usize) -> bool {
        self.start <= k && k < self.end
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Checks window length, start, targets and separation. Errors carry a
/// config key and a message.
pub fn validate_plans(plans: &[AttackPlan], cfg: &IntersectionConfig) -> Result<(), Vec<(String, String)>> {
    let t_max = cfg.t_max();
    let mut errs = Vec::new();
    for (a, p) in plans.iter().enumerate() {
        let key = format!("attack[{a}]");
        if p.start < 1 {
            errs.push((format!("{key}.start"), "attacks start at step 1 or later (initial state is trusted)".into()));
        }
        if p.end <= p.start {
            errs.push((format!("{key}.end"), "window must be non-empty".into()));
        }
        if p.len() > t_max {
            errs.push((key.clone(), format!("window length {} exceeds T_max = {t_max}", p.len())));
        }
        if p.targets.is_empty() || p.targets.iter().any(|&i| i >= cfg.n()) {
            errs.push((format!("{key}.targets"), "targets must be existing vehicle indices".into()));
        }
        if let AttackStrategy::Trace { errors } = &p.strategy {
            if errors.len() < p.len() {
                errs.push((format!("{key}.trace"), "trace must cover the whole window".into()));
            }
        }
    }
    let mut order: Vec<&AttackPlan> = plans.iter().collect();
    order.sort_by_key(|p| p.start);
    for w in order.windows(2) {
        if w[1].start < w[0].end + t_max {
            errs.push((
                "attack".into(),
                format!(
                    "windows [{}, {}) and [{}, {}) must be separated by at least T_max = {t_max} clean steps",
                    w[0].start, w[0].end, w[1].start, w[1].end
                ),
            ));
        }
    }
    if errs.is_empty() {
        Ok(())
    } else {
        Err(errs)
    }
}

/// Per-vehicle stealthy measurement interval `I^s_k`. An entry is `None`
/// when no measurement of that vehicle avoids an alarm.
pub fn stealthy_intervals(
    cfg: &IntersectionConfig,
    prev_meas: &[i64],
    control: &Control,
    det: &DetectorState,
) -> Vec<Option<Interval>> {
    predicted_range(cfg, prev_meas, control)
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let slack = det.threshold[i] + det.bias[i] - det.c[i];
            (slack >= 0).then(|| Interval::new(r.lo - slack, r.hi + slack))
        })
        .collect()
}

/// `I^s_k` as a single box; empty when some vehicle has no stealthy value.
pub fn stealthy_set(cfg: &IntersectionConfig, prev_meas: &[i64], control: &Control, det: &DetectorState) -> BoxUnion {
    match stealthy_intervals(cfg, prev_meas, control, det).into_iter().collect::<Option<Vec<_>>>() {
        Some(b) => BoxUnion::from_box(b),
        None => BoxUnion::empty(cfg.n()),
    }
}

/// Stealthy error bounds `[e_low, e_high]` for true state `x`.
pub fn stealthy_bounds(
    cfg: &IntersectionConfig,
    x: &[i64],
    prev_meas: &[i64],
    control: &Control,
    det: &DetectorState,
) -> Vec<Option<(i64, i64)>> {
    stealthy_intervals(cfg, prev_meas, control, det)
        .into_iter()
        .zip(x)
        .map(|(iv, &xi)| iv.map(|iv| (iv.lo - xi, iv.hi - xi)))
        .collect()
}

/// What the attacker sees when corrupting step `k`.
pub struct AttackInput<'a> {
    pub cfg: &'a IntersectionConfig,
    pub k: usize,
    pub x: &'a [i64],
    pub prev_meas: &'a [i64],
    pub prev_control: &'a Control,
    pub detector: &'a DetectorState,
}

/// Corrupted measurement for step `k` under the first active plan.
pub fn corrupt<R: Rng>(plans: &[AttackPlan], input: &AttackInput<'_>, rng: &mut R) -> Vec<i64> {
    let mut meas = input.x.to_vec();
    let Some(plan) = plans.iter().find(|p| p.is_active(input.k)) else {
        return meas;
    };
    let intervals = stealthy_intervals(input.cfg, input.prev_meas, input.prev_control, input.detector);
    let range = predicted_range(input.cfg, input.prev_meas, input.prev_control);
    for &i in &plan.targets {
        let det = input.detector;
        meas[i] = match &plan.strategy {
            AttackStrategy::Surge { sign } => {
                let first = input.k == plan.start;
                match (sign, first) {
                    (Sign::Positive, true) => range[i].hi + det.threshold[i] + det.bias[i] - det.c[i],
                    (Sign::Negative, true) => range[i].lo - det.threshold[i] - det.bias[i] + det.c[i],
                    (Sign::Positive, false) => range[i].hi + det.bias[i],
                    (Sign::Negative, false) => range[i].lo - det.bias[i],
                }
            }
            AttackStrategy::Offset { offset } => input.x[i] + offset,
            AttackStrategy::RandomStealthy => match intervals[i] {
                Some(iv) => rng.gen_range(iv.lo..=iv.hi),
                None => input.x[i],
            },
            AttackStrategy::Trace { errors } => input.x[i] + errors[input.k - plan.start][i],
        };
    }
    meas
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::presets;
    use crate::detector::Decision;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn surge_plan() -> AttackPlan {
        AttackPlan {
            targets: vec![1],
            start: 1,
            end: 2,
            strategy: AttackStrategy::Surge { sign: Sign::Positive },
        }
    }

    #[test]
    fn surge_on_vehicle_two_reports_two_five() {
        let cfg = presets::two_vehicle_config();
        let det = DetectorState::new(&cfg);
        let input = AttackInput {
            cfg: &cfg,
            k: 1,
            x: &[2000, 4000],
            prev_meas: &[1000, 1000],
            prev_control: &Control(vec![1, 3]),
            detector: &det,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = corrupt(&[surge_plan()], &input, &mut rng);
        assert_eq!(m, vec![2000, 5000]);
        let (_, _, d) = det.observe(&cfg, &m, &[1000, 1000], &Control(vec![1, 3]));
        assert_eq!(d, Decision::H0);
    }

    #[test]
    fn stealthy_set_without_slack_is_the_post_box() {
        let cfg = presets::two_vehicle_config();
        let det = DetectorState::new(&cfg);
        let s = stealthy_set(&cfg, &[1000, 1000], &Control(vec![1, 3]), &det);
        assert_eq!(s, BoxUnion::point(&[1000, 1000]).post(&cfg, &Control(vec![1, 3])));
        let b = stealthy_bounds(&cfg, &[2000, 4000], &[1000, 1000], &Control(vec![1, 3]), &det);
        assert_eq!(b[1], Some((0, 1000)));
    }

    #[test]
    fn no_targets_is_identity() {
        let cfg = presets::two_vehicle_config();
        let det = DetectorState::new(&cfg);
        let input = AttackInput {
            cfg: &cfg,
            k: 3,
            x: &[2000, 4000],
            prev_meas: &[1000, 1000],
            prev_control: &Control(vec![1, 3]),
            detector: &det,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(corrupt(&[surge_plan()], &input, &mut rng), vec![2000, 4000]);
    }

    #[test]
    fn plan_validation() {
        let cfg = presets::two_vehicle_config().with_t_max(2);
        let mut a = surge_plan();
        a.end = 3;
        assert!(validate_plans(&[a.clone()], &cfg).is_ok());
        let mut long = a.clone();
        long.end = 4;
        assert!(validate_plans(&[long], &cfg).is_err());
        let mut early = a.clone();
        early.start = 0;
        assert!(validate_plans(&[early], &cfg).is_err());
        let mut next = a.clone();
        next.start = 4;
        next.end = 5;
        assert!(validate_plans(&[a.clone(), next.clone()], &cfg).is_err());
        next.start = 5;
        next.end = 6;
        assert!(validate_plans(&[a, next], &cfg).is_ok());
    }
}
