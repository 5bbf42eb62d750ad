//! Seeded closed-loop engine: plant, attacker, detector, estimator and
//! supervisor.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attacker::{corrupt, AttackInput, AttackPlan};
use crate::config::{DisturbancePolicy, InputPolicy, IntersectionConfig, ScenarioConfig, UncontrolledPolicy};
use crate::des::{runtime_label, Label};
use crate::detector::{Decision, DetectorState};
use crate::estimator::{EstimatorError, EstimatorOutcome, EstimatorState};
use crate::exec::Exec;
use crate::model::{pair_segment_collides, quantize, segment_collides, BoxUnion, Cell, CellSet, Control};
use crate::numeric::{format_rational, Rational};
use crate::supervisor::{BaselineTable, ResilientTable, SupervisorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    SafeMarked,
    Collision,
    Deadlock,
    Detected,
    Horizon,
}

impl Outcome {
    pub const ALL: [Outcome; 5] = [Outcome::SafeMarked, Outcome::Collision, Outcome::Deadlock, Outcome::Detected, Outcome::Horizon];
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::SafeMarked => "SAFE_MARKED",
            Outcome::Collision => "COLLISION",
            Outcome::Deadlock => "DEADLOCK",
            Outcome::Detected => "DETECTED",
            Outcome::Horizon => "HORIZON",
        })
    }
}

/// Which supervisor drives the loop.
#[derive(Debug, Clone, Copy)]
pub enum Supervision<'a> {
    Baseline(&'a BaselineTable),
    Resilient(&'a ResilientTable),
    /// Every input allowed, chosen by the input policy; collisions are logged
    /// but do not stop the run.
    Unsupervised,
}

impl Supervision<'_> {
    pub fn kind(&self) -> Option<SupervisorKind> {
        match self {
            Supervision::Baseline(_) => Some(SupervisorKind::Baseline),
            Supervision::Resilient(_) => Some(SupervisorKind::Resilient),
            Supervision::Unsupervised => None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("step {k}: observer has no successor for input {control} and correction class {label}; state was {state}")]
    RefinementBreach {
        k: usize,
        control: Control,
        label: String,
        state: String,
    },
    #[error("step {k}: measured cell {cell} is outside the baseline table")]
    MissingCell { k: usize, cell: String },
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

/// One logged step: the state at `k` and what was applied after it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepRecord {
    pub k: usize,
    pub x: Vec<i64>,
    pub meas: Vec<i64>,
    pub error: Vec<i64>,
    pub cusum: Vec<i64>,
    pub decision: Decision,
    pub corrected: BoxUnion,
    /// `ℓ(I^c_k)`.
    pub estimate_cells: CellSet,
    /// Observer information state `ι_k` (resilient runs only).
    pub observer_info: Option<CellSet>,
    pub admissible: Vec<Control>,
    pub chosen: Option<Control>,
    pub uncontrolled: Vec<i64>,
    pub disturbance: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunTrace {
    pub seed: u64,
    pub supervisor: Option<SupervisorKind>,
    pub steps: Vec<StepRecord>,
    pub outcome: Outcome,
    /// Step at which the true cell had no safe continuation, if any.
    pub deadlock_step: Option<usize>,
    /// Steps whose segment met the bad set.
    pub collisions: Vec<usize>,
    /// Positions after the last logged step (including any post-deadlock
    /// continuation).
    pub final_state: Vec<i64>,
}

struct Streams {
    disturbance: ChaCha8Rng,
    input: ChaCha8Rng,
    attack: ChaCha8Rng,
    uncontrolled: ChaCha8Rng,
    init: ChaCha8Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let stream = |k: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(k);
            r
        };
        Streams {
            disturbance: stream(1),
            input: stream(2),
            attack: stream(3),
            uncontrolled: stream(4),
            init: stream(5),
        }
    }
}

fn all_marked(cfg: &IntersectionConfig, x: &[i64]) -> bool {
    x.iter().enumerate().all(|(i, &v)| v > cfg.beta(i))
}

fn sample_disturbance(cfg: &IntersectionConfig, sc: &ScenarioConfig, k: usize, rng: &mut ChaCha8Rng) -> Vec<i64> {
    if let Some(d) = sc.disturbance_script.get(k) {
        return d.clone();
    }
    let (lo, hi) = cfg.delta_bounds();
    (0..cfg.n())
        .map(|_| match sc.disturbance {
            DisturbancePolicy::Uniform => rng.gen_range(lo..=hi),
            DisturbancePolicy::Corners => {
                if rng.gen_bool(0.5) {
                    lo
                } else {
                    hi
                }
            }
            DisturbancePolicy::Max => hi,
            DisturbancePolicy::Min => lo,
        })
        .collect()
}

fn sample_uncontrolled(cfg: &IntersectionConfig, sc: &ScenarioConfig, k: usize, rng: &mut ChaCha8Rng) -> Vec<i64> {
    if let Some(u) = sc.uncontrolled_script.get(k) {
        return u.clone();
    }
    (0..cfg.n())
        .filter(|&i| !cfg.is_controlled(i))
        .map(|i| {
            let s = &cfg.vehicles()[i].speeds;
            match sc.uncontrolled_policy {
                UncontrolledPolicy::Random => *s.choose(rng).expect("speed grid is non-empty"),
                UncontrolledPolicy::Min => s[0],
                UncontrolledPolicy::Max => s[s.len() - 1],
            }
        })
        .collect()
}

fn choose_input(sc: &ScenarioConfig, k: usize, admissible: &[Control], rng: &mut ChaCha8Rng) -> Control {
    if let Some(u) = sc.input_script.get(k) {
        if admissible.contains(u) {
            return u.clone();
        }
    }
    match sc.input_policy {
        InputPolicy::First => admissible[0].clone(),
        InputPolicy::Random => admissible.choose(rng).expect("admissible set is non-empty").clone(),
    }
}

/// Runs one closed loop. `baseline` supplies the ground-truth deadlock test.
pub fn run_scenario(
    cfg: &IntersectionConfig,
    sc: &ScenarioConfig,
    supervision: Supervision<'_>,
    baseline: &BaselineTable,
) -> Result<RunTrace, SimError> {
    let mut rng = Streams::new(sc.seed);
    let unsupervised = matches!(supervision, Supervision::Unsupervised);
    let resilient = matches!(supervision, Supervision::Resilient(_));
    let hull = cfg.x0().hull().expect("initial set is non-empty");
    let mut x: Vec<i64> = hull.iter().map(|iv| rng.init.gen_range(iv.lo..=iv.hi)).collect();
    while !cfg.x0().contains(&x) {
        x = hull.iter().map(|iv| rng.init.gen_range(iv.lo..=iv.hi)).collect();
    }
    let mut meas = x.clone();
    let mut det = DetectorState::new(cfg).update(&DetectorState::new(cfg).initial_residual());
    let mut decision = Decision::H0;
    let mut est = EstimatorState::new(cfg, &meas);
    let mut obs_id = match supervision {
        Supervision::Resilient(t) => Some(t.observer.initial),
        _ => None,
    };
    let mut trace = RunTrace {
        seed: sc.seed,
        supervisor: supervision.kind(),
        steps: Vec::new(),
        outcome: Outcome::Horizon,
        deadlock_step: None,
        collisions: Vec::new(),
        final_state: Vec::new(),
    };
    let mut k = 0usize;
    let mut last_u: Option<Control> = None;
    let mut stepped_to: Vec<i64> = x.clone();
    loop {
        let admissible: Vec<Control> = match supervision {
            Supervision::Baseline(t) => {
                let q = quantize(cfg, &meas);
                t.admissible_controls(&q).ok_or_else(|| SimError::MissingCell {
                    k,
                    cell: format!("{q:?}"),
                })?
            }
            Supervision::Resilient(t) => t.admissible_controls(obs_id.expect("resilient run tracks the observer")),
            Supervision::Unsupervised => cfg.controls().to_vec(),
        };
        let mut rec = StepRecord {
            k,
            x: x.clone(),
            meas: meas.clone(),
            error: meas.iter().zip(&x).map(|(a, b)| a - b).collect(),
            cusum: det.c.clone(),
            decision,
            corrected: est.corrected.clone(),
            estimate_cells: est.corrected.quantize_set(cfg),
            observer_info: match supervision {
                Supervision::Resilient(t) => Some(t.observer.states[obs_id.unwrap()].info.clone()),
                _ => None,
            },
            admissible: admissible.clone(),
            chosen: None,
            uncontrolled: Vec::new(),
            disturbance: Vec::new(),
        };
        if k >= sc.horizon {
            trace.steps.push(rec);
            trace.outcome = Outcome::Horizon;
            break;
        }
        if admissible.is_empty() {
            trace.steps.push(rec);
            trace.outcome = Outcome::Deadlock;
            trace.deadlock_step.get_or_insert(k);
            break;
        }
        let u = choose_input(sc, k, &admissible, &mut rng.input);
        let unc = sample_uncontrolled(cfg, sc, k, &mut rng.uncontrolled);
        let delta = sample_disturbance(cfg, sc, k, &mut rng.disturbance);
        let disp: Vec<i64> = cfg.displacement(&u, &unc).iter().zip(&delta).map(|(a, b)| a + b).collect();
        rec.chosen = Some(u.clone());
        rec.uncontrolled = unc;
        rec.disturbance = delta;
        trace.steps.push(rec);

        let collided = segment_collides(cfg, &x, &disp);
        let next: Vec<i64> = x.iter().zip(&disp).map(|(a, b)| a + b).collect();
        x = next;
        last_u = Some(u.clone());
        stepped_to = x.clone();
        if collided {
            trace.collisions.push(k);
            if !unsupervised {
                trace.outcome = Outcome::Collision;
                break;
            }
        }
        if all_marked(cfg, &x) {
            trace.outcome = Outcome::SafeMarked;
            break;
        }
        let new_meas = corrupt(
            &sc.attacks,
            &AttackInput {
                cfg,
                k: k + 1,
                x: &x,
                prev_meas: &meas,
                prev_control: &u,
                detector: &det,
            },
            &mut rng.attack,
        );
        let (det_next, _, d) = det.observe(cfg, &new_meas, &meas, &u);
        // The resilient loop stops at an alarm; the other modes log it and
        // fall back to open-loop prediction.
        let next_est = match est.step(cfg, &new_meas, &u, d)? {
            EstimatorOutcome::Updated(e) => Some(e),
            EstimatorOutcome::Detected if resilient => None,
            EstimatorOutcome::Detected => Some(est.open_loop(cfg, &new_meas, &u)),
        };
        let Some(next_est) = next_est else {
            det = det_next;
            decision = d;
            meas = new_meas;
            trace.outcome = Outcome::Detected;
            break;
        };
        if !unsupervised {
            let q = quantize(cfg, &x);
            if baseline.lookup(&q).is_some_and(|a| a.is_empty()) {
                trace.deadlock_step = Some(k + 1);
                trace.outcome = continue_after_deadlock(cfg, sc, &mut x, &disp, k + 1, &mut trace.collisions);
                break;
            }
        }
        if let (Some(id), Supervision::Resilient(t)) = (obs_id, supervision) {
            let state = &t.observer.states[id];
            let label = runtime_trust_label(cfg, &est, state, &u, &new_meas);
            let uidx = cfg.controls().iter().position(|c| *c == u).expect("chosen input is a control");
            obs_id = Some(t.observer.step(id, uidx, &label).ok_or_else(|| SimError::RefinementBreach {
                k: k + 1,
                control: u.clone(),
                label: label.to_string(),
                state: state.to_string(),
            })?);
        }
        det = det_next;
        decision = d;
        meas = new_meas;
        est = next_est;
        k += 1;
    }
    if trace.outcome != Outcome::Collision && unsupervised && !trace.collisions.is_empty() {
        trace.outcome = Outcome::Collision;
    }
    // Final row: the state reached by the last step. The estimator has not
    // processed it, so the row carries the one-step prediction; without a
    // detection no measurement is taken and the row repeats the true position.
    if let (Some(u), true) = (&last_u, trace.steps.last().is_some_and(|r| r.chosen.is_some())) {
        let row_meas = if trace.outcome == Outcome::Detected { meas.clone() } else { stepped_to.clone() };
        let predicted = est.corrected.post(cfg, u);
        trace.steps.push(StepRecord {
            k: trace.steps.len(),
            x: stepped_to.clone(),
            error: row_meas.iter().zip(&stepped_to).map(|(a, b)| a - b).collect(),
            meas: row_meas,
            cusum: det.c.clone(),
            decision,
            estimate_cells: predicted.quantize_set(cfg),
            corrected: predicted,
            observer_info: None,
            admissible: Vec::new(),
            chosen: None,
            uncontrolled: Vec::new(),
            disturbance: Vec::new(),
        });
    }
    trace.final_state = x;
    Ok(trace)
}

/// Label of the new measurement, from the estimator's measurement window.
fn runtime_trust_label(
    cfg: &IntersectionConfig,
    est: &EstimatorState,
    state: &crate::des::SynthState,
    control: &Control,
    new_meas: &[i64],
) -> Label {
    let t = cfg.t_max();
    let mut window: Vec<(&[i64], &Control)> = est.history.iter().map(|(m, u)| (m.as_slice(), u)).collect();
    window.push((&est.last_meas, control));
    let cur = quantize(cfg, new_meas);
    if t == 0 || state.age + 1 < t {
        return runtime_label(cfg, state, &cur, &[], &cur);
    }
    let window = &window[window.len() - t..];
    let anchor = quantize(cfg, window[0].0);
    let seq: Vec<Control> = window.iter().map(|w| w.1.clone()).collect();
    runtime_label(cfg, state, &anchor, &seq, &cur)
}

/// Vehicles keep their last speed after a deadlock; returns `COLLISION` if
/// that continuation collides, else `DEADLOCK`.
fn continue_after_deadlock(
    cfg: &IntersectionConfig,
    sc: &ScenarioConfig,
    x: &mut [i64],
    disp: &[i64],
    mut k: usize,
    collisions: &mut Vec<usize>,
) -> Outcome {
    while k < sc.horizon + cfg.worst_crossing_steps() && !all_marked(cfg, x) {
        if segment_collides(cfg, x, disp) {
            collisions.push(k);
            for (a, b) in x.iter_mut().zip(disp) {
                *a += b;
            }
            return Outcome::Collision;
        }
        for (a, b) in x.iter_mut().zip(disp) {
            *a += b;
        }
        k += 1;
    }
    Outcome::Deadlock
}

/// `ℓ(I_k) = ι_k` at every step where the observer state is logged.
pub fn check_refinement(trace: &RunTrace) -> bool {
    trace.steps.iter().all(|r| r.observer_info.as_ref().is_none_or(|i| *i == r.estimate_cells))
}

/// `ℓ(I_k) ⊆ ι_k`: the observer never knows more than the estimator.
pub fn observer_covers_estimate(trace: &RunTrace) -> bool {
    trace.steps.iter().all(|r| r.observer_info.as_ref().is_none_or(|i| r.estimate_cells.is_subset(i)))
}

/// True state inside the corrected set at every logged step.
pub fn estimate_is_sound(trace: &RunTrace) -> bool {
    trace.steps.iter().all(|r| r.corrected.contains(&r.x))
}

/// Every vehicle pair stays collision-free along the logged trajectory.
pub fn pairwise_check(cfg: &IntersectionConfig, trace: &RunTrace) -> bool {
    let n = cfg.n();
    let mut xs: Vec<&[i64]> = trace.steps.iter().map(|r| r.x.as_slice()).collect();
    if trace.steps.last().is_some_and(|r| r.x != trace.final_state) {
        xs.push(&trace.final_state);
    }
    xs.windows(2).all(|w| {
        let step: Vec<i64> = w[1].iter().zip(w[0]).map(|(a, b)| a - b).collect();
        (0..n).all(|i| (i + 1..n).all(|j| !pair_segment_collides(cfg, i, j, w[0], &step)))
    })
}

fn pos(cfg: &IntersectionConfig, t: i64) -> String {
    format_rational(cfg.to_units(t))
}

/// Trace as CSV: `step, x_i…, meas_i…, C_i…, chosen, admissible_count, outcome`.
/// The outcome column reads `RUNNING` until the last row.
pub fn trace_csv(cfg: &IntersectionConfig, trace: &RunTrace) -> String {
    let n = cfg.n();
    let mut out = String::new();
    let mut header = vec!["step".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=n).map(|i| format!("meas{i}")));
    header.extend((1..=n).map(|i| format!("c{i}")));
    header.extend(["chosen".into(), "admissible_count".into(), "outcome".into()]);
    writeln!(out, "{}", header.join(",")).unwrap();
    let last = trace.steps.len().saturating_sub(1);
    for (idx, r) in trace.steps.iter().enumerate() {
        let mut row = vec![r.k.to_string()];
        row.extend(r.x.iter().map(|&v| pos(cfg, v)));
        row.extend(r.meas.iter().map(|&v| pos(cfg, v)));
        row.extend(r.cusum.iter().map(|&v| pos(cfg, v)));
        row.push(r.chosen.as_ref().map_or("-".to_string(), |u| format!("\"{u}\"")));
        row.push(r.admissible.len().to_string());
        row.push(if idx == last { trace.outcome.to_string() } else { "RUNNING".to_string() });
        writeln!(out, "{}", row.join(",")).unwrap();
    }
    out
}

/// Human-readable trace.
pub fn trace_text(cfg: &IntersectionConfig, trace: &RunTrace) -> String {
    let mut out = String::new();
    let kind = trace.supervisor.map_or("unsupervised", |k| k.name());
    writeln!(out, "run seed={} supervisor={kind} outcome={}", trace.seed, trace.outcome).unwrap();
    for r in &trace.steps {
        let v = |xs: &[i64]| xs.iter().map(|&t| pos(cfg, t)).collect::<Vec<_>>().join(",");
        let adm: Vec<String> = r.admissible.iter().map(|u| u.to_string()).collect();
        write!(
            out,
            "k={} x=({}) meas=({}) C=({}) est={}",
            r.k,
            v(&r.x),
            v(&r.meas),
            v(&r.cusum),
            r.estimate_cells
        )
        .unwrap();
        if let Some(i) = &r.observer_info {
            write!(out, " iota={i}").unwrap();
        }
        write!(out, " admissible={{{}}}", adm.join(",")).unwrap();
        if let Some(u) = &r.chosen {
            write!(out, " u={u} delta=({})", v(&r.disturbance)).unwrap();
        }
        writeln!(out).unwrap();
    }
    if let Some(d) = trace.deadlock_step {
        writeln!(out, "deadlock at step {d}").unwrap();
    }
    out
}

/// Runs many seeds in parallel with the same scenario template.
pub fn run_batch(
    cfg: &IntersectionConfig,
    template: &ScenarioConfig,
    seeds: &[u64],
    supervision: Supervision<'_>,
    baseline: &BaselineTable,
    exec: Exec,
) -> Vec<Result<RunTrace, SimError>> {
    exec.map(seeds, |&seed| {
        let sc = ScenarioConfig { seed, ..template.clone() };
        run_scenario(cfg, &sc, supervision, baseline)
    })
}

/// Outcome counts.
pub fn tally<'a>(traces: impl IntoIterator<Item = &'a RunTrace>) -> BTreeMap<Outcome, usize> {
    let mut m: BTreeMap<Outcome, usize> = Outcome::ALL.iter().map(|&o| (o, 0)).collect();
    for t in traces {
        *m.get_mut(&t.outcome).unwrap() += 1;
    }
    m
}

/// One sweep configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepPoint {
    pub t_max: usize,
    /// Detector threshold, position units.
    pub eta: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepRow {
    pub point: SweepPoint,
    pub synthesized: bool,
    pub error: Option<String>,
    pub observer_states: usize,
    pub sum_admissible: usize,
    /// Sum of admissible-set sizes over information states reached under
    /// supervision in every successful configuration of the sweep.
    pub permissiveness: usize,
    pub non_singleton_pending: usize,
    pub outcomes: BTreeMap<Outcome, usize>,
}

/// Clips attack windows to `T_max` so a template stays admissible.
pub fn clip_attacks(plans: &[AttackPlan], t_max: usize) -> Vec<AttackPlan> {
    plans
        .iter()
        .filter(|_| t_max > 0)
        .map(|p| AttackPlan {
            end: p.end.min(p.start + t_max),
            ..p.clone()
        })
        .collect()
}

/// Synthesizes and simulates every point. Failed syntheses are recorded, not fatal.
pub fn sweep(
    cfg: &IntersectionConfig,
    template: &ScenarioConfig,
    points: &[SweepPoint],
    runs: usize,
    exec: Exec,
    budget: usize,
) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    let mut maps: Vec<Option<BTreeMap<CellSet, BTreeSet<Control>>>> = Vec::new();
    for &p in points {
        let point_cfg = match cfg.with_threshold(p.eta) {
            Ok(c) => c.with_t_max(p.t_max),
            Err(e) => {
                rows.push(failed_row(p, e.to_string()));
                maps.push(None);
                continue;
            }
        };
        let table = match ResilientTable::synthesize(&point_cfg, exec, budget) {
            Ok(t) => t,
            Err(e) => {
                rows.push(failed_row(p, e.to_string()));
                maps.push(None);
                continue;
            }
        };
        let baseline = BaselineTable::synthesize(&point_cfg);
        let stats = table.stats();
        let mut row = SweepRow {
            point: p,
            synthesized: table.success(),
            error: None,
            observer_states: table.observer.len(),
            sum_admissible: stats.sum_admissible,
            permissiveness: 0,
            non_singleton_pending: 0,
            outcomes: tally(std::iter::empty()),
        };
        if table.success() {
            row.non_singleton_pending = table.non_singleton_pending().len();
            let sc = ScenarioConfig {
                attacks: clip_attacks(&template.attacks, p.t_max),
                ..template.clone()
            };
            let seeds: Vec<u64> = (0..runs as u64).map(|s| template.seed + s).collect();
            let traces = run_batch(&point_cfg, &sc, &seeds, Supervision::Resilient(&table), &baseline, exec);
            let ok: Vec<RunTrace> = traces.into_iter().filter_map(Result::ok).collect();
            row.outcomes = tally(&ok);
            maps.push(Some(table.by_information_state()));
        } else {
            row.error = Some("initial state pruned".into());
            maps.push(None);
        }
        rows.push(row);
    }
    let shared: Option<BTreeSet<CellSet>> = maps
        .iter()
        .flatten()
        .map(|m| m.keys().cloned().collect::<BTreeSet<_>>())
        .reduce(|a, b| a.intersection(&b).cloned().collect());
    if let Some(shared) = shared {
        for (row, m) in rows.iter_mut().zip(&maps) {
            if let Some(m) = m {
                row.permissiveness = shared.iter().map(|i| m[i].len()).sum();
            }
        }
    }
    rows
}

fn failed_row(p: SweepPoint, error: String) -> SweepRow {
    SweepRow {
        point: p,
        synthesized: false,
        error: Some(error),
        observer_states: 0,
        sum_admissible: 0,
        permissiveness: 0,
        non_singleton_pending: 0,
        outcomes: tally(std::iter::empty()),
    }
}

/// Sweep summary as CSV.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "t_max,eta,synthesized,observer_states,sum_admissible,permissiveness,non_singleton_pending,safe_marked,collision,deadlock,detected,horizon\n",
    );
    for r in rows {
        let o = |k: Outcome| r.outcomes.get(&k).copied().unwrap_or(0);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.point.t_max,
            format_rational(r.point.eta),
            r.synthesized,
            r.observer_states,
            r.sum_admissible,
            r.permissiveness,
            r.non_singleton_pending,
            o(Outcome::SafeMarked),
            o(Outcome::Collision),
            o(Outcome::Deadlock),
            o(Outcome::Detected),
            o(Outcome::Horizon)
        )
        .unwrap();
    }
    out
}

/// Marked cells of a cell vector, for diagnostics.
pub fn marked_count(q: &[Cell]) -> usize {
    q.iter().filter(|c| **c == Cell::Marked).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacker::{AttackStrategy, Sign};
    use crate::config::presets;
    use crate::des::DEFAULT_BUDGET;

    fn surge() -> AttackPlan {
        AttackPlan {
            targets: vec![1],
            start: 1,
            end: 2,
            strategy: AttackStrategy::Surge { sign: Sign::Positive },
        }
    }

    fn script(cfg: &IntersectionConfig, inputs: &[(i64, i64)], dist: &[(i64, i64)]) -> ScenarioConfig {
        let mut sc = ScenarioConfig::new(cfg, 0);
        sc.input_script = inputs.iter().map(|&(a, b)| Control(vec![a, b])).collect();
        sc.disturbance_script = dist.iter().map(|&(a, b)| vec![a * 1000, b * 1000]).collect();
        sc.attacks = vec![surge()];
        sc
    }

    #[test]
    fn baseline_under_surge_fails() {
        let cfg = presets::two_vehicle_config();
        let base = BaselineTable::synthesize(&cfg);
        let sc = script(&cfg, &[(1, 3), (1, 1)], &[(0, 0), (1, 0)]);
        let tr = run_scenario(&cfg, &sc, Supervision::Baseline(&base), &base).unwrap();
        assert_eq!(tr.steps[1].meas, vec![2000, 5000]);
        assert_eq!(tr.steps[1].x, vec![2000, 4000]);
        assert_eq!(tr.steps[1].chosen, Some(Control(vec![1, 1])));
        assert!(matches!(tr.outcome, Outcome::Collision | Outcome::Deadlock), "{}", trace_text(&cfg, &tr));
    }

    #[test]
    fn resilient_under_surge_is_safe() {
        let cfg = presets::two_vehicle_config();
        let base = BaselineTable::synthesize(&cfg);
        let table = ResilientTable::synthesize(&cfg, Exec::Parallel, DEFAULT_BUDGET).unwrap();
        let sc = script(&cfg, &[(1, 3), (1, 1)], &[(0, 0), (0, 1)]);
        let tr = run_scenario(&cfg, &sc, Supervision::Resilient(&table), &base).unwrap();
        assert_eq!(tr.steps[1].observer_info.as_ref().unwrap().to_string(), "({2,3},{4,5})");
        assert_eq!(tr.steps[1].admissible, vec![Control(vec![1, 3])]);
        assert_eq!(tr.steps[2].meas, vec![3000, 8000]);
        assert_eq!(tr.steps[2].observer_info.as_ref().unwrap().to_string(), "({3,4},{8,9})");
        assert_eq!(tr.outcome, Outcome::SafeMarked, "{}", trace_text(&cfg, &tr));
        assert!(check_refinement(&tr));
        assert!(estimate_is_sound(&tr));
    }

    #[test]
    fn same_seed_same_trace() {
        let cfg = presets::two_vehicle_config();
        let base = BaselineTable::synthesize(&cfg);
        let mut sc = ScenarioConfig::new(&cfg, 42);
        sc.input_policy = InputPolicy::Random;
        sc.attacks = vec![AttackPlan {
            strategy: AttackStrategy::RandomStealthy,
            ..surge()
        }];
        let a = run_scenario(&cfg, &sc, Supervision::Baseline(&base), &base).unwrap();
        let b = run_scenario(&cfg, &sc, Supervision::Baseline(&base), &base).unwrap();
        assert_eq!(a, b);
        assert_eq!(trace_csv(&cfg, &a), trace_csv(&cfg, &b));
    }

    #[test]
    fn csv_has_documented_columns() {
        let cfg = presets::two_vehicle_config();
        let base = BaselineTable::synthesize(&cfg);
        let sc = script(&cfg, &[(1, 3), (1, 1)], &[(0, 0), (1, 0)]);
        let tr = run_scenario(&cfg, &sc, Supervision::Baseline(&base), &base).unwrap();
        let csv = trace_csv(&cfg, &tr);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "step,x1,x2,meas1,meas2,c1,c2,chosen,admissible_count,outcome");
        assert_eq!(lines.next().unwrap(), "0,1,1,1,1,0,0,\"(1,3)\",2,RUNNING");
        assert!(csv.trim_end().ends_with(&tr.outcome.to_string()));
    }
}
