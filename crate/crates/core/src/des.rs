//! Finite abstraction of the estimator loop and its observer.
//!
//! A synthesis state holds the information state `ι` together with a bounded
//! window of measurement-cell sets and inputs, enough to compute the
//! correction class `λ^c` of every possible next measurement. One observer
//! transition composes detector filtering, correction and prediction.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use crate::config::IntersectionConfig;
use crate::detector::Decision;
use crate::exec::Exec;
use crate::model::{cell_extent, cell_safe, cells_of_span, post_cells, post_seq_cells, product_into, Cell, CellSet, CellVec, Control};

/// `W`: disturbance grid, in ticks.
pub fn build_w_set(cfg: &IntersectionConfig) -> Vec<i64> {
    let s = cfg.scale();
    let (dmin, dmax) = cfg.delta_bounds();
    let lo = crate::numeric::floor_div(dmin, s);
    let hi = crate::numeric::ceil_div(dmax, s);
    (lo..=hi).map(|k| k * s).collect()
}

/// Correction class of a measurement.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    /// Fewer than `T_max` steps elapsed: the trust window is the whole space.
    Whole,
    /// `ℓ(Î)`.
    Image(CellSet),
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Whole => write!(f, "X"),
            Label::Image(s) => write!(f, "{s}"),
        }
    }
}

impl std::str::FromStr for Label {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s.trim() == "X" {
            Ok(Label::Whole)
        } else {
            s.parse().map(Label::Image)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SynthState {
    /// Information state `ι`.
    pub info: CellSet,
    /// Possible measurement cells for the last `max(T_max, 1)` steps, oldest first.
    pub meas: Vec<CellSet>,
    /// Inputs applied after each recorded measurement except the newest.
    pub inputs: Vec<Control>,
    /// Steps elapsed, saturated at `T_max`.
    pub age: usize,
}

impl SynthState {
    pub fn initial(cfg: &IntersectionConfig) -> Self {
        let cells = cfg.x0().quantize_set(cfg);
        SynthState {
            info: cells.clone(),
            meas: vec![cells],
            inputs: Vec::new(),
            age: 0,
        }
    }

    pub fn is_marked(&self) -> bool {
        self.info.is_marked()
    }
}

impl fmt::Display for SynthState {
    /// `info=… age=… meas=a|b inputs=u;v`, the canonical key used in exports.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let meas: Vec<String> = self.meas.iter().map(|m| m.to_string()).collect();
        let inputs: Vec<String> = self.inputs.iter().map(|u| u.to_string()).collect();
        write!(
            f,
            "info={} age={} meas={} inputs={}",
            self.info,
            self.age,
            meas.join("|"),
            if inputs.is_empty() { "-".to_string() } else { inputs.join(";") }
        )
    }
}

impl std::str::FromStr for SynthState {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let mut info = None;
        let mut age = None;
        let mut meas = None;
        let mut inputs = None;
        for tok in s.split_whitespace() {
            let (k, v) = tok.split_once('=').ok_or_else(|| format!("bad field `{tok}`"))?;
            match k {
                "info" => info = Some(v.parse::<CellSet>()?),
                "age" => age = Some(v.parse::<usize>().map_err(|e| e.to_string())?),
                "meas" => meas = Some(v.split('|').map(str::parse).collect::<Result<Vec<CellSet>, _>>()?),
                "inputs" => {
                    inputs = Some(if v == "-" {
                        Vec::new()
                    } else {
                        v.split(';').map(str::parse).collect::<Result<Vec<Control>, _>>()?
                    })
                }
                _ => return Err(format!("unknown field `{k}`")),
            }
        }
        Ok(SynthState {
            info: info.ok_or("missing info")?,
            meas: meas.ok_or("missing meas")?,
            inputs: inputs.ok_or("missing inputs")?,
            age: age.ok_or("missing age")?,
        })
    }
}

/// Extent of a measured cell; marked cells extend to infinity.
fn meas_extent(cfg: &IntersectionConfig, i: usize, c: Cell) -> (i64, i64) {
    cell_extent(cfg, i, c).unwrap_or((cfg.beta(i), i64::MAX / 4))
}

/// Cells of every measurement that keeps the detector silent when the
/// previous measurement lies in cell `p`, with `C = 0`.
pub fn stealthy_cells(cfg: &IntersectionConfig, p: &[Cell], control: &Control) -> CellSet {
    let per: Vec<Vec<Cell>> = p
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let (lo, hi) = meas_extent(cfg, i, c);
            let (a, b) = cfg.step_range(i, control);
            let slack = cfg.threshold()[i] + cfg.bias()[i];
            cells_of_span(cfg, i, lo + a - slack, true, hi.saturating_add(b + slack))
        })
        .collect();
    let mut out = Vec::new();
    product_into(&per, &mut out);
    CellSet::from_vec(out)
}

/// `ℓ(Î)` for a trust window anchored in cell `prev`; just `{cur}` for an
/// empty input sequence.
pub fn lambda_c_image(cfg: &IntersectionConfig, prev: &[Cell], seq: &[Control], cur: &[Cell]) -> CellSet {
    let point = CellSet::singleton(cur.to_vec());
    if seq.is_empty() {
        return point;
    }
    post_seq_cells(cfg, &CellSet::singleton(prev.to_vec()), seq).union(&point)
}

/// Detector class of a measured cell against the stealthy cells.
pub fn lambda_d_outcome(stealthy: &CellSet, measured: &[Cell]) -> Decision {
    if stealthy.contains(measured) {
        Decision::H0
    } else {
        Decision::H1
    }
}

/// Whether `control` is safe from every cell of `info`.
pub fn info_safe(cfg: &IntersectionConfig, info: &CellSet, control: &Control) -> bool {
    info.iter().all(|q| cell_safe(cfg, q, control))
}

/// Observable successors of `state` under `control`, one per correction
/// class, in label order. Detection (`λ^d = H1`) has no successor.
pub fn successors(cfg: &IntersectionConfig, state: &SynthState, control: &Control) -> Vec<(Label, SynthState)> {
    let t = cfg.t_max();
    let pred = post_cells(cfg, &state.info, control);
    let last = state.meas.last().expect("measurement window is never empty");
    let k1 = state.age + 1;
    let mut groups: HashMap<Label, Vec<CellVec>> = HashMap::new();
    if k1 < t {
        let all: Vec<CellVec> = last.iter().flat_map(|p| stealthy_cells(cfg, p, control).iter().cloned().collect::<Vec<_>>()).collect();
        groups.insert(Label::Whole, all);
    } else if t == 0 {
        for p in last.iter() {
            for c in stealthy_cells(cfg, p, control).iter() {
                groups.entry(Label::Image(CellSet::singleton(c.clone()))).or_default().push(c.clone());
            }
        }
    } else if t == 1 {
        // Anchor of the trust window and of the stealthy set coincide.
        let seq = [control.clone()];
        for p in last.iter() {
            let base = post_seq_cells(cfg, &CellSet::singleton(p.clone()), &seq);
            for c in stealthy_cells(cfg, p, control).iter() {
                groups.entry(Label::Image(base.union(&CellSet::singleton(c.clone())))).or_default().push(c.clone());
            }
        }
    } else {
        let mut seq: Vec<Control> = state.inputs.clone();
        seq.push(control.clone());
        let seq = &seq[seq.len() - t..];
        let mut current: Vec<CellVec> = last.iter().flat_map(|p| stealthy_cells(cfg, p, control).iter().cloned().collect::<Vec<_>>()).collect();
        current.sort_unstable();
        current.dedup();
        for p in state.meas[0].iter() {
            let base = post_seq_cells(cfg, &CellSet::singleton(p.clone()), seq);
            for c in &current {
                groups.entry(Label::Image(base.union(&CellSet::singleton(c.clone())))).or_default().push(c.clone());
            }
        }
    }
    let window = t.max(1);
    let mut out: Vec<(Label, SynthState)> = groups
        .into_iter()
        .filter_map(|(label, cs)| {
            let info = match &label {
                Label::Whole => pred.clone(),
                Label::Image(img) => pred.intersect(img),
            };
            if info.is_empty() {
                return None;
            }
            let mut meas = state.meas.clone();
            meas.push(CellSet::from_vec(cs));
            let drop = meas.len().saturating_sub(window);
            meas.drain(..drop);
            let mut inputs = state.inputs.clone();
            inputs.push(control.clone());
            let drop = inputs.len().saturating_sub(window - 1);
            inputs.drain(..drop);
            Some((
                label,
                SynthState {
                    info,
                    meas,
                    inputs,
                    age: k1.min(t),
                },
            ))
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// Label of a runtime measurement at the step after `state`.
pub fn runtime_label(cfg: &IntersectionConfig, state: &SynthState, anchor: &[Cell], seq: &[Control], cur: &[Cell]) -> Label {
    if state.age + 1 < cfg.t_max() {
        Label::Whole
    } else {
        Label::Image(lambda_c_image(cfg, anchor, seq, cur))
    }
}

/// Outgoing moves of an observer state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Moves {
    /// Marked: no further control.
    Terminal,
    /// Per control (in `cfg.controls()` order): `None` if unsafe, else the
    /// labelled successors.
    Expanded(Vec<Option<Vec<(Label, usize)>>>),
}

#[derive(Debug, thiserror::Error)]
pub enum ObserverError {
    #[error("observer exceeded the state budget of {budget} (reached {count} states)")]
    Budget { budget: usize, count: usize },
}

#[derive(Debug, Clone)]
pub struct Observer {
    pub states: Vec<SynthState>,
    pub moves: Vec<Moves>,
    pub initial: usize,
    index: HashMap<SynthState, usize>,
}

/// Per-control successors of one state; `None` marks an unsafe input.
type Expansion = Vec<Option<Vec<(Label, SynthState)>>>;

pub const DEFAULT_BUDGET: usize = 400_000;

impl Observer {
    /// Breadth-first construction from the initial state. Unsafe inputs are
    /// not expanded since no safe supervisor can enable them.
    pub fn build(cfg: &IntersectionConfig, exec: Exec, budget: usize) -> Result<Observer, ObserverError> {
        let init = SynthState::initial(cfg);
        let mut obs = Observer {
            states: vec![init.clone()],
            moves: vec![Moves::Terminal],
            initial: 0,
            index: HashMap::from([(init, 0)]),
        };
        let mut frontier = vec![0usize];
        while !frontier.is_empty() {
            let expanded: Vec<Option<Expansion>> = exec.map(&frontier, |&id| {
                let s = &obs.states[id];
                if s.is_marked() {
                    return None;
                }
                Some(
                    cfg.controls()
                        .iter()
                        .map(|u| info_safe(cfg, &s.info, u).then(|| successors(cfg, s, u)))
                        .collect(),
                )
            });
            let mut next = Vec::new();
            for (&id, exp) in frontier.iter().zip(expanded) {
                let Some(per_control) = exp else { continue };
                let mut moves = Vec::with_capacity(per_control.len());
                for succ in per_control {
                    moves.push(succ.map(|list| {
                        list.into_iter()
                            .map(|(label, st)| {
                                let tid = match obs.index.get(&st) {
                                    Some(&t) => t,
                                    None => {
                                        let t = obs.states.len();
                                        obs.index.insert(st.clone(), t);
                                        obs.states.push(st);
                                        obs.moves.push(Moves::Terminal);
                                        next.push(t);
                                        t
                                    }
                                };
                                (label, tid)
                            })
                            .collect()
                    }));
                }
                obs.moves[id] = Moves::Expanded(moves);
            }
            if obs.states.len() > budget {
                return Err(ObserverError::Budget {
                    budget,
                    count: obs.states.len(),
                });
            }
            frontier = next;
        }
        Ok(obs)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn id_of(&self, s: &SynthState) -> Option<usize> {
        self.index.get(s).copied()
    }

    /// Successor of `id` under control index `u` and correction label.
    pub fn step(&self, id: usize, u: usize, label: &Label) -> Option<usize> {
        match &self.moves[id] {
            Moves::Terminal => None,
            Moves::Expanded(m) => m[u].as_ref()?.iter().find(|(l, _)| l == label).map(|&(_, t)| t),
        }
    }

    /// Plain-text automaton.
    ///
    /// ```text
    /// observer <states> <transitions>
    /// initial <id>
    /// state <id> <marked|open> <canonical state>
    /// edge <from> <input> <label> <to>
    /// unsafe <from> <input>
    /// ```
    pub fn to_text(&self, cfg: &IntersectionConfig) -> String {
        let mut out = String::new();
        let edges: usize = self
            .moves
            .iter()
            .map(|m| match m {
                Moves::Terminal => 0,
                Moves::Expanded(v) => v.iter().flatten().map(Vec::len).sum(),
            })
            .sum();
        writeln!(out, "observer {} {}", self.states.len(), edges).unwrap();
        writeln!(out, "initial {}", self.initial).unwrap();
        for (id, s) in self.states.iter().enumerate() {
            let tag = if s.is_marked() { "marked" } else { "open" };
            writeln!(out, "state {id} {tag} {s}").unwrap();
        }
        for (id, m) in self.moves.iter().enumerate() {
            let Moves::Expanded(per) = m else { continue };
            for (u, succ) in per.iter().enumerate() {
                let ctl = &cfg.controls()[u];
                match succ {
                    None => writeln!(out, "unsafe {id} {ctl}").unwrap(),
                    Some(list) => {
                        for (label, to) in list {
                            writeln!(out, "edge {id} {ctl} {label} {to}").unwrap();
                        }
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::presets;

    fn cs(s: &str) -> CellSet {
        s.parse().unwrap()
    }

    fn at(v: &[i64]) -> CellVec {
        v.iter().map(|&c| Cell::At(c)).collect()
    }

    #[test]
    fn w_sets() {
        let cfg = presets::two_vehicle_config();
        assert_eq!(build_w_set(&cfg), vec![0, 1000]);
        let mut spec = presets::two_vehicle();
        spec.d_max = crate::numeric::Num::int(0);
        spec.vehicles.iter_mut().for_each(|v| v.speeds = vec![1, 3]);
        assert_eq!(build_w_set(&spec.validate().unwrap()), vec![0]);
        let mut spec = presets::two_vehicle();
        spec.d_min = crate::numeric::Num::int(-1);
        spec.d_max = crate::numeric::Num::int(2);
        spec.vehicles.iter_mut().for_each(|v| v.speeds = vec![2, 3]);
        assert_eq!(build_w_set(&spec.validate().unwrap()), vec![-1000, 0, 1000, 2000]);
    }

    #[test]
    fn lambda_c_images() {
        let cfg = presets::two_vehicle_config();
        let u = Control(vec![1, 3]);
        assert_eq!(lambda_c_image(&cfg, &at(&[1, 1]), std::slice::from_ref(&u), &at(&[2, 5])), cs("({2,3},{4,5})"));
        assert_eq!(lambda_c_image(&cfg, &at(&[2, 5]), std::slice::from_ref(&u), &at(&[3, 8])), cs("({3,4},{8,9})"));
        assert_eq!(lambda_c_image(&cfg, &at(&[2, 5]), &[u], &at(&[4, 9])), cs("({3,4},{8,9})"));
    }

    #[test]
    fn lambda_d() {
        let s = cs("({2,3},{4,5})");
        assert_eq!(lambda_d_outcome(&s, &at(&[2, 5])), Decision::H0);
        assert_eq!(lambda_d_outcome(&s, &at(&[2, 7])), Decision::H1);
    }

    #[test]
    fn first_step_reaches_the_post_cells() {
        let cfg = presets::two_vehicle_config();
        let init = SynthState::initial(&cfg);
        let succ = successors(&cfg, &init, &Control(vec![1, 3]));
        assert_eq!(succ.len(), 1);
        assert_eq!(succ[0].1.info, cs("({2,3},{4,5})"));
        assert_eq!(succ[0].1.meas, vec![cs("({2,3},{4,5})")]);
    }

    #[test]
    fn correction_from_the_wide_state_has_four_classes() {
        let cfg = presets::two_vehicle_config();
        let init = SynthState::initial(&cfg);
        let u = Control(vec![1, 3]);
        let s1 = successors(&cfg, &init, &u).remove(0).1;
        let succ = successors(&cfg, &s1, &u);
        assert_eq!(post_cells(&cfg, &s1.info, &u), cs("({3,4,5},{7,8,9})"));
        assert_eq!(succ.len(), 4);
        let infos: Vec<String> = succ.iter().map(|(_, s)| s.info.to_string()).collect();
        assert!(infos.contains(&"({3,4},{8,9})".to_string()), "{infos:?}");
        let label = runtime_label(&cfg, &s1, &at(&[2, 5]), &[u], &at(&[3, 8]));
        let hit = succ.iter().find(|(l, _)| *l == label).unwrap();
        assert_eq!(hit.1.info, cs("({3,4},{8,9})"));
    }

    #[test]
    fn synth_state_text_round_trips() {
        let cfg = presets::two_vehicle_config();
        let init = SynthState::initial(&cfg);
        let s1 = successors(&cfg, &init, &Control(vec![1, 3])).remove(0).1;
        for s in [init, s1] {
            assert_eq!(s.to_string().parse::<SynthState>().unwrap(), s);
        }
    }

    #[test]
    fn observer_is_deterministic_and_reachable() {
        let cfg = presets::two_vehicle_config();
        let obs = Observer::build(&cfg, Exec::Sequential, DEFAULT_BUDGET).unwrap();
        let mut seen = vec![false; obs.len()];
        seen[obs.initial] = true;
        let mut stack = vec![obs.initial];
        while let Some(s) = stack.pop() {
            if let Moves::Expanded(per) = &obs.moves[s] {
                for list in per.iter().flatten() {
                    let mut labels: Vec<&Label> = list.iter().map(|(l, _)| l).collect();
                    let n = labels.len();
                    labels.dedup();
                    assert_eq!(labels.len(), n, "duplicate label at state {s}");
                    for &(_, t) in list {
                        if !seen[t] {
                            seen[t] = true;
                            stack.push(t);
                        }
                    }
                }
            }
        }
        assert!(seen.iter().all(|&b| b));
        let par = Observer::build(&cfg, Exec::Parallel, DEFAULT_BUDGET).unwrap();
        assert_eq!(par.to_text(&cfg), obs.to_text(&cfg));
    }

    #[test]
    fn budget_is_enforced() {
        let cfg = presets::two_vehicle_config();
        assert!(matches!(Observer::build(&cfg, Exec::Sequential, 3), Err(ObserverError::Budget { .. })));
    }
}
