//! Plant dynamics, geometry, interval reachability and the grid quantizer.
//!
//! Positions are integer ticks (see [`crate::numeric`]). A cell `c` of
//! vehicle `i` covers `(c·s − s/2, c·s + s/2]` with `s = scale`, clipped at
//! the road exit β; positions beyond β map to [`Cell::Marked`].

use std::fmt;

use crate::config::IntersectionConfig;
use num_traits::Signed;

use crate::numeric::{ceil_div, floor_div, wide, Wide};

fn wi(v: i64) -> Wide {
    Wide::from_integer(v as i128)
}

/// Per-vehicle position in ticks.
pub type StateVec = Vec<i64>;

/// Per-vehicle displacement for one step, in ticks.
pub type InputVec = Vec<i64>;

/// Controlled input: one speed multiple of μ per controlled vehicle.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Control(pub Vec<i64>);

impl fmt::Display for Control {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, v) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

impl std::str::FromStr for Control {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let body = s.trim().trim_start_matches('(').trim_end_matches(')');
        if body.trim().is_empty() {
            return Ok(Control(Vec::new()));
        }
        body.split(',')
            .map(|t| t.trim().parse::<i64>().map_err(|e| format!("bad input `{s}`: {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(Control)
    }
}

/// Closed tick interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interval {
    pub lo: i64,
    pub hi: i64,
}

impl Interval {
    pub fn new(lo: i64, hi: i64) -> Self {
        debug_assert!(lo <= hi, "interval [{lo}, {hi}] is reversed");
        Interval { lo, hi }
    }

    pub fn point(x: i64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn contains(&self, x: i64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn meet(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn covers(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// Distance from `x` to the interval; zero inside.
    pub fn distance(&self, x: i64) -> i64 {
        if x < self.lo {
            self.lo - x
        } else if x > self.hi {
            x - self.hi
        } else {
            0
        }
    }
}

/// Axis-aligned box: one closed interval per vehicle.
pub type Boxed = Vec<Interval>;

/// Finite union of boxes. Kept normalized: no box is contained in another and
/// boxes differing in a single coordinate with overlapping ranges are merged.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BoxUnion {
    n: usize,
    boxes: Vec<Boxed>,
}

/// Half-width of the universe used for `Î = X`.
pub const UNIVERSE: i64 = 1 << 40;

impl BoxUnion {
    pub fn empty(n: usize) -> Self {
        BoxUnion { n, boxes: Vec::new() }
    }

    pub fn from_box(b: Boxed) -> Self {
        BoxUnion { n: b.len(), boxes: vec![b] }
    }

    pub fn from_boxes(n: usize, boxes: Vec<Boxed>) -> Self {
        let mut u = BoxUnion { n, boxes };
        u.normalize();
        u
    }

    pub fn point(x: &[i64]) -> Self {
        Self::from_box(x.iter().map(|&v| Interval::point(v)).collect())
    }

    pub fn universe(n: usize) -> Self {
        Self::from_box(vec![Interval::new(-UNIVERSE, UNIVERSE); n])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn boxes(&self) -> &[Boxed] {
        &self.boxes
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        self.boxes.iter().any(|b| b.iter().zip(x).all(|(iv, &v)| iv.contains(v)))
    }

    /// Smallest box containing the union.
    pub fn hull(&self) -> Option<Boxed> {
        let mut it = self.boxes.iter();
        let mut h = it.next()?.clone();
        for b in it {
            for (a, c) in h.iter_mut().zip(b) {
                a.lo = a.lo.min(c.lo);
                a.hi = a.hi.max(c.hi);
            }
        }
        Some(h)
    }

    pub fn union(&self, other: &BoxUnion) -> BoxUnion {
        let mut boxes = self.boxes.clone();
        boxes.extend(other.boxes.iter().cloned());
        Self::from_boxes(self.n, boxes)
    }

    pub fn intersect(&self, other: &BoxUnion) -> BoxUnion {
        let mut boxes = Vec::new();
        for a in &self.boxes {
            for b in &other.boxes {
                let m: Option<Boxed> = a.iter().zip(b).map(|(x, y)| x.meet(y)).collect();
                if let Some(m) = m {
                    boxes.push(m);
                }
            }
        }
        Self::from_boxes(self.n, boxes)
    }

    /// `self ⊆ other`, decided on the tick lattice.
    pub fn is_subset(&self, other: &BoxUnion) -> bool {
        self.boxes.iter().all(|b| {
            let single = BoxUnion::from_box(b.clone());
            let covered = single.intersect(other);
            covered.volume() == single.volume()
        })
    }

    /// Number of lattice points, counting overlaps once.
    pub fn volume(&self) -> u128 {
        // Inclusion-exclusion over a coordinate-compressed grid.
        if self.boxes.is_empty() {
            return 0;
        }
        let mut cuts: Vec<Vec<i64>> = vec![Vec::new(); self.n];
        for b in &self.boxes {
            for (d, iv) in b.iter().enumerate() {
                cuts[d].push(iv.lo);
                cuts[d].push(iv.hi + 1);
            }
        }
        for c in &mut cuts {
            c.sort_unstable();
            c.dedup();
        }
        let mut total = 0u128;
        let mut idx = vec![0usize; self.n];
        loop {
            if idx.iter().enumerate().all(|(d, &k)| k + 1 < cuts[d].len()) {
                let cell: Vec<(i64, i64)> = idx.iter().enumerate().map(|(d, &k)| (cuts[d][k], cuts[d][k + 1] - 1)).collect();
                let inside = self.boxes.iter().any(|b| b.iter().zip(&cell).all(|(iv, &(lo, hi))| iv.lo <= lo && hi <= iv.hi));
                if inside {
                    total += cell.iter().map(|&(lo, hi)| (hi - lo + 1) as u128).product::<u128>();
                }
            }
            let mut d = 0;
            loop {
                if d == self.n {
                    return total;
                }
                idx[d] += 1;
                if idx[d] + 1 < cuts[d].len() {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
        }
    }

    fn normalize(&mut self) {
        let mut changed = true;
        while changed {
            changed = false;
            let mut out: Vec<Boxed> = Vec::with_capacity(self.boxes.len());
            'next: for b in self.boxes.drain(..) {
                for o in out.iter_mut() {
                    if covers(o, &b) {
                        continue 'next;
                    }
                    if covers(&b, o) {
                        *o = b;
                        changed = true;
                        continue 'next;
                    }
                    if let Some(m) = merge(o, &b) {
                        *o = m;
                        changed = true;
                        continue 'next;
                    }
                }
                out.push(b);
            }
            self.boxes = out;
        }
        self.boxes.sort();
    }

    /// One-step reachable set `Post_{u_c}`: union over uncontrolled speeds
    /// and disturbances.
    pub fn post(&self, cfg: &IntersectionConfig, control: &Control) -> BoxUnion {
        let options: Vec<Vec<(i64, i64)>> = (0..self.n).map(|i| cfg.step_options(i, control)).collect();
        let mut boxes = Vec::new();
        for b in &self.boxes {
            for_each_choice(&options, |choice| {
                boxes.push(b.iter().zip(choice).map(|(iv, &(a, c))| Interval::new(iv.lo + a, iv.hi + c)).collect());
            });
        }
        Self::from_boxes(self.n, boxes)
    }

    /// Composition of [`BoxUnion::post`] over a non-empty input sequence.
    pub fn post_seq(&self, cfg: &IntersectionConfig, seq: &[Control]) -> BoxUnion {
        assert!(!seq.is_empty(), "post_seq needs at least one input");
        seq.iter().fold(self.clone(), |s, u| s.post(cfg, u))
    }

    /// All cells meeting the union.
    pub fn quantize_set(&self, cfg: &IntersectionConfig) -> CellSet {
        let mut out = Vec::new();
        for b in &self.boxes {
            let per: Vec<Vec<Cell>> = b
                .iter()
                .enumerate()
                .map(|(i, iv)| cells_of_span(cfg, i, iv.lo, false, iv.hi))
                .collect();
            product_into(&per, &mut out);
        }
        CellSet::from_vec(out)
    }
}

fn covers(a: &Boxed, b: &Boxed) -> bool {
    a.iter().zip(b).all(|(x, y)| x.covers(y))
}

fn merge(a: &Boxed, b: &Boxed) -> Option<Boxed> {
    let mut diff = None;
    for (d, (x, y)) in a.iter().zip(b).enumerate() {
        if x != y {
            if diff.is_some() {
                return None;
            }
            diff = Some(d);
        }
    }
    let d = diff?;
    let (x, y) = (a[d], b[d]);
    if x.lo.max(y.lo) > x.hi.min(y.hi) + 1 {
        return None;
    }
    let mut m = a.clone();
    m[d] = Interval::new(x.lo.min(y.lo), x.hi.max(y.hi));
    Some(m)
}

fn for_each_choice<T: Copy>(options: &[Vec<T>], mut f: impl FnMut(&[T])) {
    if options.iter().any(|o| o.is_empty()) {
        return;
    }
    let mut idx = vec![0usize; options.len()];
    let mut cur: Vec<T> = options.iter().map(|o| o[0]).collect();
    loop {
        f(&cur);
        let mut d = 0;
        loop {
            if d == options.len() {
                return;
            }
            idx[d] += 1;
            if idx[d] < options[d].len() {
                cur[d] = options[d][idx[d]];
                break;
            }
            idx[d] = 0;
            cur[d] = options[d][0];
            d += 1;
        }
    }
}

pub(crate) fn product_into(per: &[Vec<Cell>], out: &mut Vec<CellVec>) {
    for_each_choice(per, |c| out.push(c.to_vec()));
}

/// `x + u + δ`; δ must lie within the configured disturbance bounds.
pub fn step_dynamics(cfg: &IntersectionConfig, x: &[i64], u: &[i64], delta: &[i64]) -> StateVec {
    let (dmin, dmax) = cfg.delta_bounds();
    assert!(
        delta.iter().all(|&d| dmin <= d && d <= dmax),
        "disturbance {delta:?} outside [{dmin}, {dmax}]"
    );
    x.iter().zip(u).zip(delta).map(|((a, b), c)| a + b + c).collect()
}

/// Grid cell of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cell {
    /// Cell centred at `c·τμ`.
    At(i64),
    /// Past the road exit. Absorbing.
    Marked,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::At(c) => write!(f, "{c}"),
            Cell::Marked => write!(f, "m"),
        }
    }
}

impl std::str::FromStr for Cell {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "m" => Ok(Cell::Marked),
            t => t.parse().map(Cell::At).map_err(|e| format!("bad cell `{s}`: {e}")),
        }
    }
}

pub type CellVec = Vec<Cell>;

/// Sorted, duplicate-free set of cell vectors.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct CellSet(Vec<CellVec>);

impl CellSet {
    pub fn from_vec(mut v: Vec<CellVec>) -> Self {
        v.sort_unstable();
        v.dedup();
        CellSet(v)
    }

    pub fn singleton(q: CellVec) -> Self {
        CellSet(vec![q])
    }

    pub fn iter(&self) -> std::slice::Iter<'_, CellVec> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, q: &[Cell]) -> bool {
        self.0.binary_search_by(|p| p.as_slice().cmp(q)).is_ok()
    }

    pub fn intersect(&self, other: &CellSet) -> CellSet {
        CellSet(self.0.iter().filter(|q| other.contains(q)).cloned().collect())
    }

    pub fn union(&self, other: &CellSet) -> CellSet {
        let mut v = self.0.clone();
        v.extend(other.0.iter().cloned());
        Self::from_vec(v)
    }

    pub fn is_subset(&self, other: &CellSet) -> bool {
        self.0.iter().all(|q| other.contains(q))
    }

    /// True iff every vector in the set is fully marked.
    pub fn is_marked(&self) -> bool {
        !self.0.is_empty() && self.0.iter().all(|q| q.iter().all(|c| *c == Cell::Marked))
    }

    /// Projection onto vehicle `i`.
    pub fn project(&self, i: usize) -> Vec<Cell> {
        let mut v: Vec<Cell> = self.0.iter().map(|q| q[i]).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Whether the set equals the product of its projections.
    pub fn is_product(&self) -> bool {
        let Some(first) = self.0.first() else { return true };
        let n: usize = (0..first.len()).map(|i| self.project(i).len()).product();
        n == self.0.len()
    }
}

impl FromIterator<CellVec> for CellSet {
    fn from_iter<I: IntoIterator<Item = CellVec>>(iter: I) -> Self {
        Self::from_vec(iter.into_iter().collect())
    }
}

impl fmt::Display for CellSet {
    /// Products print as `({2,3},{4,5})`; anything else lists its vectors.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let Some(first) = self.0.first() else {
            return write!(f, "{{}}");
        };
        let join = |cells: &[Cell]| cells.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
        if self.is_product() {
            write!(f, "(")?;
            for i in 0..first.len() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{{{}}}", join(&self.project(i)))?;
            }
            write!(f, ")")
        } else {
            write!(f, "{{")?;
            for (k, q) in self.0.iter().enumerate() {
                if k > 0 {
                    write!(f, ",")?;
                }
                write!(f, "({})", join(q))?;
            }
            write!(f, "}}")
        }
    }
}

impl std::str::FromStr for CellSet {
    type Err = String;
    /// Parses either display form.
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let groups = |body: &str, open: char, close: char| -> Result<Vec<Vec<Cell>>, String> {
            let mut out = Vec::new();
            let mut rest = body.trim();
            while !rest.is_empty() {
                let rest2 = rest.strip_prefix(open).ok_or_else(|| format!("expected `{open}` in `{s}`"))?;
                let end = rest2.find(close).ok_or_else(|| format!("unclosed `{open}` in `{s}`"))?;
                let cells = if rest2[..end].trim().is_empty() {
                    Vec::new()
                } else {
                    rest2[..end].split(',').map(str::parse).collect::<Result<Vec<Cell>, _>>()?
                };
                out.push(cells);
                rest = rest2[end + 1..].trim_start().trim_start_matches(',').trim_start();
            }
            Ok(out)
        };
        if let Some(body) = s.strip_prefix('(').and_then(|b| b.strip_suffix(')')) {
            let per = groups(body, '{', '}')?;
            let mut out = Vec::new();
            product_into(&per, &mut out);
            Ok(CellSet::from_vec(out))
        } else if let Some(body) = s.strip_prefix('{').and_then(|b| b.strip_suffix('}')) {
            Ok(CellSet::from_vec(groups(body, '(', ')')?))
        } else {
            Err(format!("bad cell set `{s}`"))
        }
    }
}

/// `ℓ_i(x)`.
pub fn quantize_pos(cfg: &IntersectionConfig, i: usize, x: i64) -> Cell {
    if x > cfg.beta(i) {
        return Cell::Marked;
    }
    let s = cfg.scale();
    Cell::At(ceil_div(x - s / 2, s))
}

/// `ℓ(x)`.
pub fn quantize(cfg: &IntersectionConfig, x: &[i64]) -> CellVec {
    x.iter().enumerate().map(|(i, &v)| quantize_pos(cfg, i, v)).collect()
}

/// Tick extent `(lo, hi]` of an unmarked cell, clipped at β. `None` for
/// [`Cell::Marked`] or cells lying wholly past β.
pub fn cell_extent(cfg: &IntersectionConfig, i: usize, cell: Cell) -> Option<(i64, i64)> {
    let Cell::At(c) = cell else { return None };
    let s = cfg.scale();
    let lo = c * s - s / 2;
    let hi = (c * s + s / 2).min(cfg.beta(i));
    (lo < hi).then_some((lo, hi))
}

/// Cells met by the span from `lo` (open or closed) to the closed `hi`.
pub fn cells_of_span(cfg: &IntersectionConfig, i: usize, lo: i64, lo_open: bool, hi: i64) -> Vec<Cell> {
    let s = cfg.scale();
    let beta = cfg.beta(i);
    let mut out = Vec::new();
    let below_beta = if lo_open { lo < beta } else { lo <= beta };
    if below_beta && (lo < hi || (!lo_open && lo == hi)) {
        let first = if lo_open { floor_div(lo - s / 2, s) + 1 } else { ceil_div(lo - s / 2, s) };
        let last = ceil_div(hi.min(beta) - s / 2, s);
        out.extend((first..=last).map(Cell::At));
    }
    if hi > beta {
        out.push(Cell::Marked);
    }
    out
}

/// Cells reachable from `cell` when its extent is shifted by `[a, b]`.
pub fn shift_cell(cfg: &IntersectionConfig, i: usize, cell: Cell, a: i64, b: i64) -> Vec<Cell> {
    match cell_extent(cfg, i, cell) {
        None => vec![Cell::Marked],
        Some((lo, hi)) => cells_of_span(cfg, i, lo + a, true, hi + b),
    }
}

/// Cell-level image of one step: `ℓ(Post_u(ℓ⁻¹(ι)))`.
pub fn post_cells(cfg: &IntersectionConfig, set: &CellSet, control: &Control) -> CellSet {
    let options: Vec<Vec<(i64, i64)>> = (0..cfg.n()).map(|i| cfg.step_options(i, control)).collect();
    let mut out = Vec::new();
    for q in set.iter() {
        let per: Vec<Vec<Cell>> = q
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let mut v: Vec<Cell> = options[i].iter().flat_map(|&(a, b)| shift_cell(cfg, i, c, a, b)).collect();
                v.sort_unstable();
                v.dedup();
                v
            })
            .collect();
        product_into(&per, &mut out);
    }
    CellSet::from_vec(out)
}

/// Cell-level image of an input sequence: `ℓ(Post_{u_1…u_m}(ℓ⁻¹(ι)))`.
pub fn post_seq_cells(cfg: &IntersectionConfig, set: &CellSet, seq: &[Control]) -> CellSet {
    seq.iter().fold(set.clone(), |s, u| post_cells(cfg, &s, u))
}

/// `x ∈ B`.
pub fn in_bad_set(cfg: &IntersectionConfig, x: &[i64]) -> bool {
    let n = cfg.n();
    for i in 0..n {
        for j in i + 1..n {
            let (ri, rj) = (cfg.vehicles()[i].road, cfg.vehicles()[j].road);
            let inside = |k: usize| cfg.alpha(k) <= x[k] && x[k] <= cfg.beta(k);
            if ri != rj {
                if inside(i) && inside(j) {
                    return true;
                }
            } else if (x[i] - x[j]).abs() < cfg.gamma() && x[i] <= cfg.beta(i) && x[j] <= cfg.beta(j) {
                return true;
            }
        }
    }
    false
}

/// Whether any point of a box lies in the bad set (conservative for
/// same-road pairs).
pub fn box_meets_bad_set(cfg: &IntersectionConfig, b: &Boxed) -> bool {
    let n = cfg.n();
    for i in 0..n {
        for j in i + 1..n {
            let (ri, rj) = (cfg.vehicles()[i].road, cfg.vehicles()[j].road);
            let meets = |k: usize| b[k].lo <= cfg.beta(k) && b[k].hi >= cfg.alpha(k);
            if ri != rj {
                if meets(i) && meets(j) {
                    return true;
                }
            } else {
                let lo = b[i].lo - b[j].hi;
                let hi = b[i].hi - b[j].lo;
                let g = cfg.gamma();
                if lo < g && hi > -g && b[i].lo <= cfg.beta(i) && b[j].lo <= cfg.beta(j) {
                    return true;
                }
            }
        }
    }
    false
}

/// Position set of one vehicle at the start of a step: `lo` (open or closed)
/// to the closed `hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Extent {
    pub lo: i64,
    pub lo_open: bool,
    pub hi: i64,
}

/// Interval of times in `[0, 1]` (in steps) during which a vehicle may occupy
/// its conflict zone. The start is always attained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start: Wide,
    pub end: Wide,
    pub end_inclusive: bool,
}

impl Window {
    pub fn overlaps(&self, other: &Window) -> bool {
        let s = self.start.max(other.start);
        let (e, inc) = match self.end.cmp(&other.end) {
            std::cmp::Ordering::Less => (self.end, self.end_inclusive),
            std::cmp::Ordering::Greater => (other.end, other.end_inclusive),
            std::cmp::Ordering::Equal => (self.end, self.end_inclusive && other.end_inclusive),
        };
        s < e || (s == e && inc)
    }
}

/// Occupancy window of `[α, β]` for a vehicle starting in `ext` and moving
/// at a constant speed in `[smin, smax]` ticks per step.
pub fn occupancy(alpha: i64, beta: i64, ext: Extent, smin: i64, smax: i64) -> Option<Window> {
    debug_assert!(0 < smin && smin <= smax);
    let zero = wi(0);
    let one = wi(1);
    let start = wide(alpha - ext.hi, smax).max(zero);
    let mut end = wide(beta - ext.lo, smin);
    let mut end_inclusive = !ext.lo_open;
    if end > one {
        end = one;
        end_inclusive = true;
    }
    if end < zero {
        return None;
    }
    let w = Window {
        start,
        end,
        end_inclusive,
    };
    (w.start < w.end || (w.start == w.end && w.end_inclusive)).then_some(w)
}

/// Safety of one step for a product of per-vehicle extents (`None` = marked),
/// given the input. Cross-road pairs must not share zone time; same-road pairs
/// must keep the gap at least γ while both are on the road.
pub fn extents_safe(cfg: &IntersectionConfig, ext: &[Option<Extent>], control: &Control) -> bool {
    let n = cfg.n();
    let speeds: Vec<(i64, i64)> = (0..n).map(|i| cfg.step_range(i, control)).collect();
    let windows: Vec<Option<Window>> = (0..n)
        .map(|i| ext[i].and_then(|e| occupancy(cfg.alpha(i), cfg.beta(i), e, speeds[i].0, speeds[i].1)))
        .collect();
    for i in 0..n {
        for j in i + 1..n {
            if cfg.vehicles()[i].road != cfg.vehicles()[j].road {
                if let (Some(a), Some(b)) = (windows[i], windows[j]) {
                    if a.overlaps(&b) {
                        return false;
                    }
                }
            } else if let (Some(a), Some(b)) = (ext[i], ext[j]) {
                if !rear_end_safe(cfg, i, a, speeds[i], j, b, speeds[j]) {
                    return false;
                }
            }
        }
    }
    true
}

fn rear_end_safe(
    cfg: &IntersectionConfig,
    i: usize,
    a: Extent,
    si: (i64, i64),
    j: usize,
    b: Extent,
    sj: (i64, i64),
) -> bool {
    let g = cfg.gamma();
    if g == 0 {
        return true;
    }
    // Latest time both may still be on the road.
    let one = wi(1);
    let tb = wide(cfg.beta(i) - a.lo, si.0).min(wide(cfg.beta(j) - b.lo, sj.0)).min(one);
    if tb < wi(0) {
        return true;
    }
    let lo0 = wi(a.lo - b.hi);
    let hi0 = wi(a.hi - b.lo);
    let lo = lo0 + (tb * wi(si.0 - sj.1)).min(wi(0));
    let hi = hi0 + (tb * wi(si.1 - sj.0)).max(wi(0));
    let gw = wi(g);
    !(lo < gw && hi > -gw)
}

/// Safety of input `control` from every position of cell vector `q`.
pub fn cell_safe(cfg: &IntersectionConfig, q: &[Cell], control: &Control) -> bool {
    let ext: Vec<Option<Extent>> = q
        .iter()
        .enumerate()
        .map(|(i, &c)| cell_extent(cfg, i, c).map(|(lo, hi)| Extent { lo, lo_open: true, hi }))
        .collect();
    extents_safe(cfg, &ext, control)
}

/// Safety of input `control` from every point of a box union.
pub fn transition_safe(cfg: &IntersectionConfig, set: &BoxUnion, control: &Control) -> bool {
    set.boxes().iter().all(|b| {
        let ext: Vec<Option<Extent>> = b
            .iter()
            .enumerate()
            .map(|(i, iv)| {
                (iv.lo <= cfg.beta(i)).then(|| Extent {
                    lo: iv.lo,
                    lo_open: false,
                    hi: iv.hi.min(cfg.beta(i)),
                })
            })
            .collect();
        extents_safe(cfg, &ext, control)
    })
}

/// Whether the straight segment from `x` to `x + step` meets the bad set.
pub fn segment_collides(cfg: &IntersectionConfig, x: &[i64], step: &[i64]) -> bool {
    let n = cfg.n();
    (0..n).any(|i| (i + 1..n).any(|j| pair_segment_collides(cfg, i, j, x, step)))
}

/// [`segment_collides`] restricted to vehicles `i` and `j`.
pub fn pair_segment_collides(cfg: &IntersectionConfig, i: usize, j: usize, x: &[i64], step: &[i64]) -> bool {
    let win = |k: usize| {
        (x[k] <= cfg.beta(k))
            .then(|| occupancy(cfg.alpha(k), cfg.beta(k), Extent { lo: x[k], lo_open: false, hi: x[k] }, step[k], step[k]))
            .flatten()
    };
    if cfg.vehicles()[i].road != cfg.vehicles()[j].road {
        return matches!((win(i), win(j)), (Some(a), Some(b)) if a.overlaps(&b));
    }
    let g = cfg.gamma();
    if g == 0 || x[i] > cfg.beta(i) || x[j] > cfg.beta(j) {
        return false;
    }
    let one = wi(1);
    let tb = wide(cfg.beta(i) - x[i], step[i]).min(wide(cfg.beta(j) - x[j], step[j])).min(one);
    let zero = wi(0);
    let g0 = wi(x[i] - x[j]);
    let g1 = g0 + tb * wi(step[i] - step[j]);
    let min_abs = if (g0 < zero) != (g1 < zero) || g0 == zero || g1 == zero {
        zero
    } else {
        g0.abs().min(g1.abs())
    };
    min_abs < wi(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::presets;

    fn cfg() -> IntersectionConfig {
        presets::two_vehicle_config()
    }

    fn u(a: i64, b: i64) -> Control {
        Control(vec![a, b])
    }

    fn bx(lo: [i64; 2], hi: [i64; 2]) -> BoxUnion {
        BoxUnion::from_box(vec![Interval::new(lo[0], hi[0]), Interval::new(lo[1], hi[1])])
    }

    #[test]
    fn step_dynamics_adds_componentwise() {
        let c = cfg();
        assert_eq!(step_dynamics(&c, &[1000, 1000], &[1000, 3000], &[0, 0]), vec![2000, 4000]);
        assert_eq!(step_dynamics(&c, &[2000, 4000], &[1000, 3000], &[1000, 1000]), vec![4000, 8000]);
        assert_eq!(step_dynamics(&c, &[0, 0], &[0, 0], &[0, 0]), vec![0, 0]);
    }

    #[test]
    #[should_panic(expected = "outside")]
    fn step_dynamics_rejects_out_of_bounds_disturbance() {
        step_dynamics(&cfg(), &[0, 0], &[0, 0], &[0, 1001]);
    }

    #[test]
    fn post_examples() {
        let c = cfg();
        let p = BoxUnion::point(&[1000, 1000]).post(&c, &u(1, 3));
        assert_eq!(p, bx([2000, 4000], [3000, 5000]));
        let p = BoxUnion::point(&[2000, 5000]).post(&c, &u(1, 3));
        assert_eq!(p, bx([3000, 8000], [4000, 9000]));
        let seq = BoxUnion::point(&[1000, 1000]).post_seq(&c, &[u(1, 3), u(1, 3)]);
        assert_eq!(seq, bx([3000, 7000], [5000, 9000]));
    }

    #[test]
    fn post_distributes_over_disjoint_boxes() {
        let c = cfg();
        let a = bx([0, 0], [0, 0]);
        let b = bx([5000, 5000], [5000, 5000]);
        let both = a.union(&b).post(&c, &u(1, 1));
        assert_eq!(both, a.post(&c, &u(1, 1)).union(&b.post(&c, &u(1, 1))));
        assert_eq!(both.boxes().len(), 2);
    }

    #[test]
    fn quantizer_ties_go_down() {
        let c = cfg();
        assert_eq!(quantize_pos(&c, 0, 2400), Cell::At(2));
        assert_eq!(quantize_pos(&c, 0, 2500), Cell::At(2));
        assert_eq!(quantize_pos(&c, 0, 2510), Cell::At(3));
        assert_eq!(quantize_pos(&c, 0, 12500), Cell::At(12));
        assert_eq!(quantize_pos(&c, 0, 12600), Cell::Marked);
    }

    #[test]
    fn quantize_set_of_post_box() {
        let c = cfg();
        let s = bx([2000, 4000], [3000, 5000]).quantize_set(&c);
        assert_eq!(s.to_string(), "({2,3},{4,5})");
        assert_eq!(s.len(), 4);
    }

    #[test]
    fn cell_set_text_round_trips() {
        let s: CellSet = "({3,4,5},{7,8,9})".parse().unwrap();
        assert_eq!(s.len(), 9);
        assert_eq!(s.to_string().parse::<CellSet>().unwrap(), s);
        let t: CellSet = "{(1,2),(3,m)}".parse().unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.to_string(), "{(1,2),(3,m)}");
        assert_eq!(t.to_string().parse::<CellSet>().unwrap(), t);
    }

    #[test]
    fn bad_set_examples() {
        let c = cfg();
        assert!(in_bad_set(&c, &[10000, 11000]));
        assert!(!in_bad_set(&c, &[13000, 13000]));
        assert!(in_bad_set(&c, &[9500, 12500]));
        assert!(!in_bad_set(&c, &[9499, 12000]));

        let mut spec = presets::two_vehicle();
        spec.vehicles[1].road = 0;
        spec.vehicles[1].x0 = crate::config::InitialSpec::Point(crate::numeric::Num::int(3));
        spec.gamma = crate::numeric::Num::int(1);
        let same = spec.validate().unwrap();
        assert!(in_bad_set(&same, &[5000, 5500]));
        assert!(!in_bad_set(&same, &[5000, 6000]));
    }

    #[test]
    fn transition_safety_examples() {
        let c = cfg();
        assert!(transition_safe(&c, &BoxUnion::point(&[1000, 1000]), &u(1, 3)));
        let inside = bx([9900, 9900], [10100, 10100]);
        for ctl in c.controls() {
            assert!(!transition_safe(&c, &inside, ctl));
        }
    }

    #[test]
    fn window_end_at_one_keeps_exclusivity() {
        // Cell 12 = (11.5, 12.5] at speed 1 leaves the zone exactly at t = 1,
        // strictly, since its lower end is open.
        let c = cfg();
        let (lo, hi) = cell_extent(&c, 0, Cell::At(12)).unwrap();
        let w = occupancy(9500, 12500, Extent { lo, lo_open: true, hi }, 1000, 2000).unwrap();
        assert_eq!(w.end, wi(1));
        assert!(!w.end_inclusive);
        let late = Window {
            start: wi(1),
            end: wi(1),
            end_inclusive: true,
        };
        assert!(!w.overlaps(&late));
    }

    #[test]
    fn cell_span_and_shift() {
        let c = cfg();
        assert_eq!(shift_cell(&c, 0, Cell::At(2), 1000, 2000), vec![Cell::At(3), Cell::At(4)]);
        assert_eq!(shift_cell(&c, 0, Cell::At(12), 1000, 2000), vec![Cell::Marked]);
        assert_eq!(shift_cell(&c, 0, Cell::At(11), 1000, 2000), vec![Cell::At(12), Cell::Marked]);
        assert_eq!(shift_cell(&c, 0, Cell::Marked, 1000, 2000), vec![Cell::Marked]);
        let s: CellSet = "({1},{1})".parse().unwrap();
        assert_eq!(post_cells(&c, &s, &u(1, 3)).to_string(), "({2,3},{4,5})");
    }

    #[test]
    fn segment_collision_matches_bad_set_at_endpoints() {
        let c = cfg();
        assert!(segment_collides(&c, &[9000, 11000], &[1000, 1000]));
        assert!(!segment_collides(&c, &[4000, 8000], &[1000, 3000]));
        // Vehicle 2 passes 9.5..12.5 while vehicle 1 sits before the zone.
        assert!(!segment_collides(&c, &[2000, 9000], &[1000, 4000]));
    }

    #[test]
    fn volume_counts_lattice_points_once() {
        let a = bx([0, 0], [2, 2]);
        let b = bx([1, 1], [3, 3]);
        assert_eq!(a.volume(), 9);
        assert_eq!(a.union(&b).volume(), 9 + 9 - 4);
        assert!(a.intersect(&b).is_subset(&a));
        assert!(!b.is_subset(&a));
    }
}
