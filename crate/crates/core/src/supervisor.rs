//! Supervisor synthesis: a safety/non-blocking fixpoint over a finite game.
//!
//! The resilient supervisor solves the game on the observer; the baseline
//! supervisor solves it on single grid cells with perfect measurements.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use crate::config::IntersectionConfig;
use crate::des::{info_safe, Moves, Observer, ObserverError, SynthState};
use crate::exec::Exec;
use crate::model::{cell_safe, post_cells, quantize_pos, Cell, CellSet, CellVec, Control};
use crate::numeric::{ceil_div, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SupervisorKind {
    Baseline,
    Resilient,
}

impl SupervisorKind {
    pub fn name(&self) -> &'static str {
        match self {
            SupervisorKind::Baseline => "baseline",
            SupervisorKind::Resilient => "resilient",
        }
    }
}

impl std::str::FromStr for SupervisorKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "baseline" => Ok(SupervisorKind::Baseline),
            "resilient" => Ok(SupervisorKind::Resilient),
            _ => Err(format!("unknown supervisor kind `{s}`")),
        }
    }
}

/// Finite game: per state, per control, `None` if unsafe else the possible
/// successors. Marked states are terminal.
#[derive(Debug, Clone, Default)]
pub struct Game {
    pub marked: Vec<bool>,
    pub moves: Vec<Vec<Option<Vec<usize>>>>,
}

/// Greatest set of choices that is safe and from which a marked state stays
/// reachable. Marked states admit every control. Returns control indices per
/// state in ascending order.
pub fn solve(game: &Game, n_controls: usize) -> Vec<Vec<usize>> {
    let n = game.marked.len();
    let mut allowed: Vec<Vec<bool>> = (0..n)
        .map(|s| {
            if game.marked[s] {
                vec![true; n_controls]
            } else {
                game.moves[s].iter().map(Option::is_some).collect()
            }
        })
        .collect();
    let mut rev: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for s in 0..n {
        if game.marked[s] {
            continue;
        }
        for (u, m) in game.moves[s].iter().enumerate() {
            for &t in m.iter().flatten() {
                rev[t].push((s, u));
            }
        }
    }
    let mut dead: Vec<bool> = (0..n).map(|s| !game.marked[s] && !allowed[s].iter().any(|&a| a)).collect();
    let mut queue: VecDeque<usize> = (0..n).filter(|&s| dead[s]).collect();
    loop {
        // Safety: drop choices that may lead into a dead state.
        while let Some(t) = queue.pop_front() {
            for &(s, u) in &rev[t] {
                if allowed[s][u] && !dead[s] {
                    allowed[s][u] = false;
                    if !allowed[s].iter().any(|&a| a) {
                        dead[s] = true;
                        queue.push_back(s);
                    }
                }
            }
        }
        // Non-blocking: keep only states that can still reach a marked state.
        let mut coreach: Vec<bool> = game.marked.clone();
        let mut bfs: VecDeque<usize> = (0..n).filter(|&s| coreach[s]).collect();
        while let Some(t) = bfs.pop_front() {
            for &(s, u) in &rev[t] {
                if allowed[s][u] && !dead[s] && !coreach[s] {
                    coreach[s] = true;
                    bfs.push_back(s);
                }
            }
        }
        let mut changed = false;
        for s in 0..n {
            if !dead[s] && !coreach[s] {
                dead[s] = true;
                allowed[s].iter_mut().for_each(|a| *a = false);
                queue.push_back(s);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    allowed
        .into_iter()
        .enumerate()
        .map(|(s, a)| if dead[s] { Vec::new() } else { (0..n_controls).filter(|&u| a[u]).collect() })
        .collect()
}

#[derive(Debug, thiserror::Error)]
pub enum SynthesisError {
    #[error(transparent)]
    Observer(#[from] ObserverError),
    #[error("no {0} supervisor exists: the initial state is pruned")]
    InitialPruned(&'static str),
}

/// Admissible-set summary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableStats {
    pub states: usize,
    pub open_states: usize,
    pub winning_states: usize,
    pub sum_admissible: usize,
    /// `histogram[k]` = open states with `k` admissible inputs.
    pub histogram: Vec<usize>,
}

impl TableStats {
    fn from(marked: impl Iterator<Item = bool>, admissible: &[Vec<usize>], n_controls: usize) -> Self {
        let mut st = TableStats {
            states: admissible.len(),
            open_states: 0,
            winning_states: 0,
            sum_admissible: 0,
            histogram: vec![0; n_controls + 1],
        };
        for (m, a) in marked.zip(admissible) {
            if m {
                continue;
            }
            st.open_states += 1;
            st.histogram[a.len()] += 1;
            st.sum_admissible += a.len();
            if !a.is_empty() {
                st.winning_states += 1;
            }
        }
        st
    }
}

/// Resilient supervisor: observer plus admissible control indices per state.
#[derive(Debug, Clone)]
pub struct ResilientTable {
    pub observer: Observer,
    pub admissible: Vec<Vec<usize>>,
    controls: Vec<Control>,
}

impl ResilientTable {
    pub fn synthesize(cfg: &IntersectionConfig, exec: Exec, budget: usize) -> Result<ResilientTable, ObserverError> {
        let observer = Observer::build(cfg, exec, budget)?;
        let game = Game {
            marked: observer.states.iter().map(SynthState::is_marked).collect(),
            moves: observer
                .moves
                .iter()
                .map(|m| match m {
                    Moves::Terminal => Vec::new(),
                    Moves::Expanded(per) => per.iter().map(|o| o.as_ref().map(|l| l.iter().map(|&(_, t)| t).collect())).collect(),
                })
                .collect(),
        };
        let admissible = solve(&game, cfg.controls().len());
        Ok(ResilientTable {
            observer,
            admissible,
            controls: cfg.controls().to_vec(),
        })
    }

    pub fn controls(&self) -> &[Control] {
        &self.controls
    }

    pub fn success(&self) -> bool {
        !self.admissible[self.observer.initial].is_empty()
    }

    pub fn admissible_controls(&self, id: usize) -> Vec<Control> {
        self.admissible[id].iter().map(|&u| self.controls[u].clone()).collect()
    }

    pub fn stats(&self) -> TableStats {
        TableStats::from(self.observer.states.iter().map(SynthState::is_marked), &self.admissible, self.controls.len())
    }

    /// States reachable from the initial state under admissible inputs.
    pub fn supervised_reachable(&self) -> Vec<usize> {
        let mut seen = vec![false; self.observer.len()];
        let mut order = Vec::new();
        let mut stack = vec![self.observer.initial];
        seen[self.observer.initial] = true;
        while let Some(s) = stack.pop() {
            order.push(s);
            let Moves::Expanded(per) = &self.observer.moves[s] else { continue };
            for &u in &self.admissible[s] {
                for &(_, t) in per[u].iter().flatten() {
                    if !seen[t] {
                        seen[t] = true;
                        stack.push(t);
                    }
                }
            }
        }
        order.sort_unstable();
        order
    }

    /// Union of admissible inputs per information state, over supervised
    /// reachable open states.
    pub fn by_information_state(&self) -> BTreeMap<CellSet, BTreeSet<Control>> {
        let mut out: BTreeMap<CellSet, BTreeSet<Control>> = BTreeMap::new();
        for s in self.supervised_reachable() {
            let st = &self.observer.states[s];
            if st.is_marked() {
                continue;
            }
            out.entry(st.info.clone()).or_default().extend(self.admissible_controls(s));
        }
        out
    }

    /// Supervised reachable open states, other than the initial one, where no
    /// vehicle has fully left the road yet and more than one input is admissible.
    pub fn non_singleton_pending(&self) -> Vec<usize> {
        self.supervised_reachable()
            .into_iter()
            .filter(|&s| {
                let st = &self.observer.states[s];
                s != self.observer.initial
                    && !st.is_marked()
                    && (0..st.info.iter().next().map_or(0, Vec::len)).all(|i| st.info.project(i) != [Cell::Marked])
                    && self.admissible[s].len() > 1
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let rows = self.observer.states.iter().zip(&self.admissible).map(|(s, a)| {
            let set: Vec<Control> = a.iter().map(|&u| self.controls[u].clone()).collect();
            (s.to_string(), set)
        });
        table_text("resilient", &self.controls, rows)
    }

    /// Replaces the admissible sets with those of an imported table. States of
    /// the observer missing from the import get an empty set.
    pub fn with_imported(mut self, imported: &ImportedTable) -> Result<ResilientTable, String> {
        if imported.kind != SupervisorKind::Resilient {
            return Err("table is not a resilient table".into());
        }
        if imported.controls != self.controls {
            return Err("table controls do not match the configuration".into());
        }
        let map: HashMap<&str, &Vec<Control>> = imported.rows.iter().map(|(k, v)| (k.as_str(), v)).collect();
        for (id, s) in self.observer.states.iter().enumerate() {
            let key = s.to_string();
            self.admissible[id] = match map.get(key.as_str()) {
                Some(set) => set.iter().filter_map(|u| self.controls.iter().position(|c| c == u)).collect(),
                None => Vec::new(),
            };
        }
        Ok(self)
    }
}

/// Perfect-measurement supervisor over single cells.
#[derive(Debug, Clone)]
pub struct BaselineTable {
    cells: Vec<CellVec>,
    index: HashMap<CellVec, usize>,
    pub admissible: Vec<Vec<usize>>,
    controls: Vec<Control>,
}

impl BaselineTable {
    /// Solves the game over every cell vector between the lowest initial cell
    /// (less a margin for attacked measurements) and the road exits.
    pub fn synthesize(cfg: &IntersectionConfig) -> BaselineTable {
        let s = cfg.scale();
        let hull = cfg.x0().hull().expect("initial set is non-empty");
        let per: Vec<Vec<Cell>> = (0..cfg.n())
            .map(|i| {
                let slack = cfg.threshold()[i] + cfg.bias()[i];
                let margin = 2 + ceil_div(slack, s);
                let lo = match quantize_pos(cfg, i, hull[i].lo) {
                    Cell::At(c) => c - margin,
                    Cell::Marked => i64::MAX,
                };
                let hi = match quantize_pos(cfg, i, cfg.beta(i)) {
                    Cell::At(c) => c,
                    Cell::Marked => unreachable!("β quantizes to a cell"),
                };
                let mut v: Vec<Cell> = (lo..=hi).map(Cell::At).collect();
                v.push(Cell::Marked);
                v
            })
            .collect();
        let mut cells = Vec::new();
        crate::model::product_into(&per, &mut cells);
        cells.sort();
        let index: HashMap<CellVec, usize> = cells.iter().cloned().enumerate().map(|(k, q)| (q, k)).collect();
        let is_marked = |q: &CellVec| q.iter().all(|c| *c == Cell::Marked);
        let game = Game {
            marked: cells.iter().map(is_marked).collect(),
            moves: cells
                .iter()
                .map(|q| {
                    if is_marked(q) {
                        return Vec::new();
                    }
                    let single = CellSet::singleton(q.clone());
                    cfg.controls()
                        .iter()
                        .map(|u| {
                            cell_safe(cfg, q, u).then(|| {
                                post_cells(cfg, &single, u)
                                    .iter()
                                    .map(|t| *index.get(t).expect("successors stay within the region"))
                                    .collect()
                            })
                        })
                        .collect()
                })
                .collect(),
        };
        let admissible = solve(&game, cfg.controls().len());
        BaselineTable {
            cells,
            index,
            admissible,
            controls: cfg.controls().to_vec(),
        }
    }

    pub fn controls(&self) -> &[Control] {
        &self.controls
    }

    /// Admissible control indices for a cell; `None` outside the table region.
    pub fn lookup(&self, q: &[Cell]) -> Option<&[usize]> {
        self.index.get(q).map(|&k| self.admissible[k].as_slice())
    }

    pub fn admissible_controls(&self, q: &[Cell]) -> Option<Vec<Control>> {
        self.lookup(q).map(|a| a.iter().map(|&u| self.controls[u].clone()).collect())
    }

    pub fn success(&self, cfg: &IntersectionConfig) -> bool {
        cfg.x0().quantize_set(cfg).iter().all(|q| self.lookup(q).is_some_and(|a| !a.is_empty()))
    }

    pub fn stats(&self) -> TableStats {
        TableStats::from(self.cells.iter().map(|q| q.iter().all(|c| *c == Cell::Marked)), &self.admissible, self.controls.len())
    }

    pub fn to_text(&self) -> String {
        let rows = self.cells.iter().zip(&self.admissible).map(|(q, a)| {
            (Self::cell_key(q), a.iter().map(|&u| self.controls[u].clone()).collect())
        });
        table_text("baseline", &self.controls, rows)
    }

    fn cell_key(q: &[Cell]) -> String {
        format!("({})", q.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","))
    }

    /// Replaces the admissible sets with those of an imported table. Cells
    /// missing from the import get an empty set.
    pub fn with_imported(mut self, imported: &ImportedTable) -> Result<BaselineTable, String> {
        if imported.kind != SupervisorKind::Baseline {
            return Err("table is not a baseline table".into());
        }
        if imported.controls != self.controls {
            return Err("table controls do not match the configuration".into());
        }
        let map: HashMap<&str, &Vec<Control>> = imported.rows.iter().map(|(k, v)| (k.as_str(), v)).collect();
        for (k, q) in self.cells.iter().enumerate() {
            self.admissible[k] = match map.get(Self::cell_key(q).as_str()) {
                Some(set) => set.iter().filter_map(|u| self.controls.iter().position(|c| c == u)).collect(),
                None => Vec::new(),
            };
        }
        Ok(self)
    }
}

/// Admissible sets for the whole information set `ι` under the baseline: the
/// inputs admissible in every cell.
pub fn baseline_for_set(table: &BaselineTable, cfg: &IntersectionConfig, info: &CellSet) -> Vec<Control> {
    cfg.controls()
        .iter()
        .enumerate()
        .filter(|&(u, _)| info.iter().all(|q| table.lookup(q).is_some_and(|a| a.contains(&u))))
        .map(|(_, c)| c.clone())
        .collect()
}

/// Whether an input is safe on every cell of `ι`.
pub fn safe_des(cfg: &IntersectionConfig, info: &CellSet, control: &Control) -> bool {
    info_safe(cfg, info, control)
}

/// `σ`: admissible inputs as speed vectors (`u_c / τ`), in speed units.
pub fn sigma(cfg: &IntersectionConfig, admissible: &[Control]) -> Vec<Vec<Rational>> {
    admissible
        .iter()
        .map(|u| u.0.iter().map(|&k| Rational::from_integer(k) * cfg.mu()).collect())
        .collect()
}

fn table_text(kind: &str, controls: &[Control], rows: impl Iterator<Item = (String, Vec<Control>)>) -> String {
    let mut out = String::new();
    let rows: Vec<(String, Vec<Control>)> = rows.collect();
    writeln!(out, "supervisor {kind} {}", rows.len()).unwrap();
    writeln!(out, "controls {}", controls.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")).unwrap();
    for (key, set) in rows {
        let rhs = if set.is_empty() {
            "-".to_string()
        } else {
            set.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
        };
        writeln!(out, "{key} => {rhs}").unwrap();
    }
    out
}

/// A parsed supervisor table file.
///
/// ```text
/// supervisor <baseline|resilient> <rows>
/// controls <u> <u> ...
/// <state key> => <u> <u> ... | -
/// ```
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImportedTable {
    pub kind: SupervisorKind,
    pub controls: Vec<Control>,
    pub rows: Vec<(String, Vec<Control>)>,
}

impl ImportedTable {
    pub fn parse(text: &str) -> Result<ImportedTable, String> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or("empty table")?;
        let mut h = header.split_whitespace();
        if h.next() != Some("supervisor") {
            return Err("missing `supervisor` header".into());
        }
        let kind: SupervisorKind = h.next().ok_or("missing kind")?.parse()?;
        let count: usize = h.next().ok_or("missing row count")?.parse().map_err(|e| format!("bad row count: {e}"))?;
        let ctl_line = lines.next().ok_or("missing controls line")?;
        let controls = ctl_line
            .strip_prefix("controls")
            .ok_or("missing `controls` line")?
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<Vec<Control>, _>>()?;
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            let (key, rhs) = line.split_once(" => ").ok_or_else(|| format!("row {}: missing `=>`", n + 1))?;
            let set = if rhs.trim() == "-" {
                Vec::new()
            } else {
                rhs.split_whitespace().map(str::parse).collect::<Result<Vec<Control>, _>>()?
            };
            rows.push((key.trim().to_string(), set));
        }
        if rows.len() != count {
            return Err(format!("header announces {count} rows, found {}", rows.len()));
        }
        Ok(ImportedTable { kind, controls, rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::presets;
    use crate::des::DEFAULT_BUDGET;

    fn at(v: &[i64]) -> CellVec {
        v.iter().map(|&c| Cell::At(c)).collect()
    }

    fn ctl(v: &[(i64, i64)]) -> Vec<Control> {
        v.iter().map(|&(a, b)| Control(vec![a, b])).collect()
    }

    #[test]
    fn baseline_matches_the_example() {
        let cfg = presets::two_vehicle_config();
        let t = BaselineTable::synthesize(&cfg);
        assert_eq!(t.admissible_controls(&at(&[1, 1])).unwrap(), ctl(&[(1, 3), (3, 1)]));
        assert_eq!(t.admissible_controls(&at(&[2, 4])).unwrap(), ctl(&[(1, 3)]));
        assert_eq!(t.admissible_controls(&at(&[2, 5])).unwrap(), ctl(&[(1, 1), (1, 3)]));
        for q in [[4, 5], [5, 5], [5, 6]] {
            assert!(t.admissible_controls(&at(&q)).unwrap().is_empty(), "{q:?}");
        }
        assert!(t.success(&cfg));
    }

    #[test]
    fn solver_prunes_unsafe_and_blocking_choices() {
        // 0 -a-> 1 (marked), 0 -b-> 2; 2 has only an unsafe move; 3 loops forever.
        let game = Game {
            marked: vec![false, true, false, false],
            moves: vec![
                vec![Some(vec![1]), Some(vec![2]), Some(vec![3])],
                vec![],
                vec![None, None, None],
                vec![Some(vec![3]), None, None],
            ],
        };
        let s = solve(&game, 3);
        assert_eq!(s[0], vec![0]);
        assert_eq!(s[1], vec![0, 1, 2]);
        assert!(s[2].is_empty());
        assert!(s[3].is_empty());
    }

    #[test]
    fn resilient_table_at_the_example_states() {
        let cfg = presets::two_vehicle_config();
        let t = ResilientTable::synthesize(&cfg, Exec::Parallel, DEFAULT_BUDGET).unwrap();
        assert!(t.success());
        assert_eq!(t.admissible_controls(t.observer.initial), ctl(&[(1, 3), (3, 1)]));
        let u = cfg.controls().iter().position(|c| *c == Control(vec![1, 3])).unwrap();
        let Moves::Expanded(per) = &t.observer.moves[t.observer.initial] else { panic!() };
        let (_, s1) = per[u].as_ref().unwrap()[0];
        assert_eq!(t.observer.states[s1].info.to_string(), "({2,3},{4,5})");
        assert_eq!(t.admissible_controls(s1), ctl(&[(1, 3)]));
    }

    #[test]
    fn table_text_round_trips() {
        let cfg = presets::two_vehicle_config();
        let t = ResilientTable::synthesize(&cfg, Exec::Sequential, DEFAULT_BUDGET).unwrap();
        let text = t.to_text();
        let imported = ImportedTable::parse(&text).unwrap();
        let again = t.clone().with_imported(&imported).unwrap();
        assert_eq!(again.admissible, t.admissible);
        assert_eq!(again.to_text(), text);
        let b = BaselineTable::synthesize(&cfg);
        let parsed = ImportedTable::parse(&b.to_text()).unwrap();
        assert_eq!(parsed.kind, SupervisorKind::Baseline);
        assert!(parsed.rows.iter().any(|(k, v)| k == "(2,5)" && *v == ctl(&[(1, 1), (1, 3)])));
        let b2 = b.clone().with_imported(&parsed).unwrap();
        assert_eq!(b2.admissible, b.admissible);
        assert!(b.with_imported(&imported).is_err());
    }

    #[test]
    fn sigma_divides_by_tau() {
        let mut spec = presets::two_vehicle();
        spec.tau = crate::numeric::Num::ratio(1, 2);
        spec.mu = crate::numeric::Num::int(2);
        spec.d_max = crate::numeric::Num::int(2);
        spec.roads.iter_mut().for_each(|r| {
            r.alpha = crate::numeric::Num::ratio(19, 2);
            r.beta = crate::numeric::Num::ratio(25, 2);
        });
        let cfg = spec.validate().unwrap();
        let v = sigma(&cfg, &ctl(&[(1, 3)]));
        assert_eq!(v, vec![vec![Rational::from_integer(2), Rational::from_integer(6)]]);
    }
}
