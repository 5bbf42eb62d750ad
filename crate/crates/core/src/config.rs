//! Scenario files and their validation.
//!
//! A config file is TOML with an `[intersection]` table, an optional
//! `[scenario]` table and any number of `[[attack]]` entries. Unknown keys are
//! rejected. Every numeric field accepts an integer, a float, or an exact
//! string such as `"19/2"`.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attacker::{AttackPlan, AttackStrategy, Sign};
use crate::model::{BoxUnion, Control, Interval};
use crate::numeric::{ceil_div, Num, Rational};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub key: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid configuration:\n{}", .0.iter().map(|d| format!("  - {d}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Diagnostic>),
}

impl ConfigError {
    pub fn diagnostics(&self) -> &[Diagnostic] {
        match self {
            ConfigError::Invalid(d) => d,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadSpec {
    pub alpha: Num,
    pub beta: Num,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialSpec {
    Point(Num),
    Interval([Num; 2]),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSpec {
    pub road: usize,
    #[serde(default = "yes")]
    pub controlled: bool,
    /// Admissible speeds as integer multiples of μ.
    pub speeds: Vec<i64>,
    pub x0: InitialSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<Num>,
}

fn yes() -> bool {
    true
}

fn default_scale() -> i64 {
    1000
}

/// Raw intersection description as written in a config file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntersectionSpec {
    pub tau: Num,
    pub mu: Num,
    /// Ticks per grid pitch τμ. Must be even so cell boundaries are ticks.
    #[serde(default = "default_scale")]
    pub scale: i64,
    #[serde(default = "zero_num")]
    pub gamma: Num,
    pub d_min: Num,
    pub d_max: Num,
    pub t_max: usize,
    #[serde(rename = "road")]
    pub roads: Vec<RoadSpec>,
    #[serde(rename = "vehicle")]
    pub vehicles: Vec<VehicleSpec>,
}

fn zero_num() -> Num {
    Num::int(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DisturbancePolicy {
    /// Uniform on the tick grid of `[δ_min, δ_max]`.
    #[default]
    Uniform,
    /// Uniform over `{δ_min, δ_max}`.
    Corners,
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InputPolicy {
    /// First admissible input in table order.
    #[default]
    First,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum UncontrolledPolicy {
    #[default]
    Random,
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub disturbance: DisturbancePolicy,
    /// Per-step displacements δ_k (position units), one vector per step.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub disturbance_script: Vec<Vec<Num>>,
    #[serde(default)]
    pub input_policy: InputPolicy,
    /// Controlled inputs as multiples of μ, one vector per step.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub input_script: Vec<Vec<i64>>,
    #[serde(default)]
    pub uncontrolled_policy: UncontrolledPolicy,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub uncontrolled_script: Vec<Vec<i64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Surge,
    Offset,
    Random,
    Trace,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSpec {
    /// 0-based vehicle indices.
    pub targets: Vec<usize>,
    pub start: usize,
    pub end: usize,
    pub strategy: StrategyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sign: Option<Sign>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<Num>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<Vec<Num>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub intersection: IntersectionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioSpec>,
    #[serde(default, rename = "attack", skip_serializing_if = "Vec::is_empty")]
    pub attacks: Vec<AttackSpec>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Road {
    pub alpha: i64,
    pub beta: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vehicle {
    pub road: usize,
    pub controlled: bool,
    /// Sorted, deduplicated speed multiples of μ.
    pub speeds: Vec<i64>,
}

/// Validated intersection. All positions are ticks (`τμ / scale`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntersectionConfig {
    pub(crate) tau: Rational,
    pub(crate) mu: Rational,
    pub(crate) scale: i64,
    pub(crate) gamma: i64,
    pub(crate) roads: Vec<Road>,
    pub(crate) vehicles: Vec<Vehicle>,
    pub(crate) delta_min: i64,
    pub(crate) delta_max: i64,
    pub(crate) t_max: usize,
    pub(crate) bias: Vec<i64>,
    pub(crate) threshold: Vec<i64>,
    pub(crate) x0: BoxUnion,
    pub(crate) controlled: Vec<usize>,
    pub(crate) controls: Vec<Control>,
    pub(crate) spec: IntersectionSpec,
}

struct Checker {
    diags: Vec<Diagnostic>,
}

impl Checker {
    fn fail(&mut self, key: impl Into<String>, message: impl Into<String>) {
        self.diags.push(Diagnostic {
            key: key.into(),
            message: message.into(),
        });
    }
}

impl IntersectionSpec {
    /// Ticks for a position-valued quantity, if it lies on the tick grid.
    fn ticks(&self, value: Rational) -> Option<i64> {
        let grid = self.tau.0 * self.mu.0;
        let t = value * Rational::from_integer(self.scale) / grid;
        t.is_integer().then(|| t.to_integer())
    }

    pub fn validate(&self) -> Result<IntersectionConfig, ConfigError> {
        let mut c = Checker { diags: Vec::new() };
        let zero = Rational::from_integer(0);
        if self.tau.0 <= zero {
            c.fail("intersection.tau", "must be positive");
        }
        if self.mu.0 <= zero {
            c.fail("intersection.mu", "must be positive");
        }
        if self.scale <= 0 || self.scale % 2 != 0 {
            c.fail("intersection.scale", "must be a positive even integer");
        }
        if !c.diags.is_empty() {
            return Err(ConfigError::Invalid(c.diags));
        }
        let scale = self.scale;
        let tick = |c: &mut Checker, key: &str, v: Rational| -> i64 {
            match self.ticks(v) {
                Some(t) => t,
                None => {
                    c.fail(key, format!("{} is not a multiple of τμ/{scale}", Num(v)));
                    0
                }
            }
        };

        let gamma = tick(&mut c, "intersection.gamma", self.gamma.0);
        if gamma < 0 {
            c.fail("intersection.gamma", "minimum gap must be non-negative");
        }
        if self.d_min.0 > self.d_max.0 {
            c.fail("intersection.d_min", "d_min exceeds d_max");
        }
        // δ = d·τ must be a whole number of grid pitches τμ.
        let step_of = |d: Rational| d / self.mu.0;
        let mut delta = [0i64; 2];
        for (slot, (key, d)) in [("intersection.d_min", self.d_min.0), ("intersection.d_max", self.d_max.0)]
            .into_iter()
            .enumerate()
        {
            let pitches = step_of(d);
            if !pitches.is_integer() {
                c.fail(
                    key,
                    format!(
                        "disturbance displacement {}·τ is not a multiple of the grid pitch τμ; the discrete abstraction requires δ bounds that are multiples of μ",
                        Num(d)
                    ),
                );
            } else {
                delta[slot] = pitches.to_integer() * scale;
            }
        }

        let mut roads = Vec::new();
        if self.roads.is_empty() {
            c.fail("intersection.road", "at least one road is required");
        }
        for (l, r) in self.roads.iter().enumerate() {
            let key = format!("intersection.road[{l}]");
            let alpha = tick(&mut c, &format!("{key}.alpha"), r.alpha.0);
            let beta = tick(&mut c, &format!("{key}.beta"), r.beta.0);
            if r.alpha.0 >= r.beta.0 {
                c.fail(&key, "alpha must be strictly below beta");
            }
            roads.push(Road { alpha, beta });
        }

        let mut vehicles = Vec::new();
        let mut bias = Vec::new();
        let mut threshold = Vec::new();
        let mut x0 = Vec::new();
        if self.vehicles.is_empty() {
            c.fail("intersection.vehicle", "at least one vehicle is required");
        }
        for (i, v) in self.vehicles.iter().enumerate() {
            let key = format!("intersection.vehicle[{i}]");
            if v.road >= self.roads.len() {
                c.fail(format!("{key}.road"), format!("road {} does not exist", v.road));
            }
            let speeds: Vec<i64> = v.speeds.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
            if speeds.is_empty() {
                c.fail(format!("{key}.speeds"), "at least one speed is required");
            } else if speeds[0] < 0 {
                c.fail(format!("{key}.speeds"), "speeds must be non-negative multiples of μ");
            } else {
                // v_min + d_min ≥ μ keeps every vehicle moving by at least one cell per step.
                let vmin = Rational::from_integer(speeds[0]) * self.mu.0;
                if vmin + self.d_min.0 < self.mu.0 {
                    c.fail(
                        format!("{key}.speeds"),
                        format!("v_min + d_min = {} is below μ = {}", Num(vmin + self.d_min.0), self.mu),
                    );
                }
            }
            let (lo, hi) = match &v.x0 {
                InitialSpec::Point(p) => (p.0, p.0),
                InitialSpec::Interval([a, b]) => (a.0, b.0),
            };
            if lo > hi {
                c.fail(format!("{key}.x0"), "interval bounds are reversed");
            }
            let lo_t = tick(&mut c, &format!("{key}.x0"), lo);
            let hi_t = tick(&mut c, &format!("{key}.x0"), hi);
            x0.push(Interval::new(lo_t, hi_t.max(lo_t)));
            let b = match v.bias {
                Some(b) => tick(&mut c, &format!("{key}.bias"), b.0),
                None => {
                    if scale % 10 != 0 {
                        c.fail(format!("{key}.bias"), "default bias 0.1·τμ needs a scale divisible by 10");
                    }
                    scale / 10
                }
            };
            if b < 0 {
                c.fail(format!("{key}.bias"), "must be non-negative");
            }
            let eta = match v.threshold {
                Some(t) => tick(&mut c, &format!("{key}.threshold"), t.0),
                None => 0,
            };
            if eta < 0 {
                c.fail(format!("{key}.threshold"), "must be non-negative");
            }
            bias.push(b);
            threshold.push(eta);
            vehicles.push(Vehicle {
                road: v.road,
                controlled: v.controlled,
                speeds,
            });
        }
        if !c.diags.is_empty() {
            return Err(ConfigError::Invalid(c.diags));
        }

        let controlled: Vec<usize> = (0..vehicles.len()).filter(|&i| vehicles[i].controlled).collect();
        let controls = control_product(&controlled, &vehicles);
        let cfg = IntersectionConfig {
            tau: self.tau.0,
            mu: self.mu.0,
            scale,
            gamma,
            roads,
            vehicles,
            delta_min: delta[0],
            delta_max: delta[1],
            t_max: self.t_max,
            bias,
            threshold,
            x0: BoxUnion::from_box(x0),
            controlled,
            controls,
            spec: self.clone(),
        };
        if cfg.x0_intersects_bad_set() {
            c.fail(
                "intersection.vehicle[*].x0",
                "the initial set intersects the bad set (initial states must be collision-free)",
            );
        }
        if !c.diags.is_empty() {
            return Err(ConfigError::Invalid(c.diags));
        }
        Ok(cfg)
    }
}

fn control_product(controlled: &[usize], vehicles: &[Vehicle]) -> Vec<Control> {
    let mut out = vec![Vec::new()];
    for &i in controlled {
        let mut next = Vec::new();
        for prefix in &out {
            for &s in &vehicles[i].speeds {
                let mut p = prefix.clone();
                p.push(s);
                next.push(p);
            }
        }
        out = next;
    }
    out.into_iter().map(Control).collect()
}

impl IntersectionConfig {
    pub fn n(&self) -> usize {
        self.vehicles.len()
    }
    pub fn tau(&self) -> Rational {
        self.tau
    }
    pub fn mu(&self) -> Rational {
        self.mu
    }
    /// Ticks per grid pitch τμ (one cell).
    pub fn scale(&self) -> i64 {
        self.scale
    }
    pub fn gamma(&self) -> i64 {
        self.gamma
    }
    pub fn roads(&self) -> &[Road] {
        &self.roads
    }
    pub fn vehicles(&self) -> &[Vehicle] {
        &self.vehicles
    }
    pub fn delta_bounds(&self) -> (i64, i64) {
        (self.delta_min, self.delta_max)
    }
    pub fn t_max(&self) -> usize {
        self.t_max
    }
    pub fn bias(&self) -> &[i64] {
        &self.bias
    }
    pub fn threshold(&self) -> &[i64] {
        &self.threshold
    }
    pub fn x0(&self) -> &BoxUnion {
        &self.x0
    }
    pub fn controlled(&self) -> &[usize] {
        &self.controlled
    }
    pub fn is_controlled(&self, i: usize) -> bool {
        self.vehicles[i].controlled
    }
    /// U_c in table order (lexicographic over controlled vehicles).
    pub fn controls(&self) -> &[Control] {
        &self.controls
    }
    pub fn spec(&self) -> &IntersectionSpec {
        &self.spec
    }
    pub fn alpha(&self, i: usize) -> i64 {
        self.roads[self.vehicles[i].road].alpha
    }
    pub fn beta(&self, i: usize) -> i64 {
        self.roads[self.vehicles[i].road].beta
    }

    /// Same intersection with a different attack-duration bound.
    pub fn with_t_max(&self, t_max: usize) -> Self {
        let mut spec = self.spec.clone();
        spec.t_max = t_max;
        spec.validate().expect("changing T_max keeps a valid config valid")
    }

    /// Same intersection with every detector threshold set to `eta` (position units).
    pub fn with_threshold(&self, eta: Rational) -> Result<Self, ConfigError> {
        let mut spec = self.spec.clone();
        for v in &mut spec.vehicles {
            v.threshold = Some(Num(eta));
        }
        spec.validate()
    }

    pub fn with_bias(&self, b: Rational) -> Result<Self, ConfigError> {
        let mut spec = self.spec.clone();
        for v in &mut spec.vehicles {
            v.bias = Some(Num(b));
        }
        spec.validate()
    }

    /// Position (in position units) of a tick count.
    pub fn to_units(&self, ticks: i64) -> Rational {
        Rational::new(ticks, self.scale) * self.tau * self.mu
    }

    pub fn to_ticks(&self, units: Rational) -> Option<i64> {
        self.spec.ticks(units)
    }

    /// Controlled input as a full per-vehicle displacement in ticks;
    /// uncontrolled entries are filled from `uncontrolled` (grid multiples).
    pub fn displacement(&self, control: &Control, uncontrolled: &[i64]) -> Vec<i64> {
        let mut out = vec![0; self.n()];
        let mut c = control.0.iter();
        let mut u = uncontrolled.iter();
        for (i, slot) in out.iter_mut().enumerate() {
            let k = if self.vehicles[i].controlled { c.next() } else { u.next() };
            *slot = k.copied().unwrap_or(0) * self.scale;
        }
        out
    }

    /// Range of one-step displacement `u_i + δ_i` in ticks, hulled over the
    /// uncontrolled speed grid.
    pub fn step_range(&self, i: usize, control: &Control) -> (i64, i64) {
        let (lo_k, hi_k) = match self.control_multiple(i, control) {
            Some(k) => (k, k),
            None => {
                let s = &self.vehicles[i].speeds;
                (s[0], s[s.len() - 1])
            }
        };
        (lo_k * self.scale + self.delta_min, hi_k * self.scale + self.delta_max)
    }

    /// Distinct one-step displacement intervals `u_i + [δ_min, δ_max]`, one per
    /// available speed, merged where they overlap or touch.
    pub fn step_options(&self, i: usize, control: &Control) -> Vec<(i64, i64)> {
        let speeds: Vec<i64> = match self.control_multiple(i, control) {
            Some(k) => vec![k],
            None => self.vehicles[i].speeds.clone(),
        };
        let mut out: Vec<(i64, i64)> = Vec::new();
        for k in speeds {
            let lo = k * self.scale + self.delta_min;
            let hi = k * self.scale + self.delta_max;
            match out.last_mut() {
                Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                _ => out.push((lo, hi)),
            }
        }
        out
    }

    pub(crate) fn control_multiple(&self, i: usize, control: &Control) -> Option<i64> {
        self.controlled.iter().position(|&c| c == i).map(|p| control.0[p])
    }

    /// Smallest possible one-step displacement of any vehicle, in ticks.
    pub fn min_step(&self) -> i64 {
        self.vehicles.iter().map(|v| v.speeds[0] * self.scale + self.delta_min).min().unwrap_or(self.scale)
    }

    /// Steps needed, in the worst case, for every vehicle to clear its road.
    pub fn worst_crossing_steps(&self) -> usize {
        let lo = self.x0.boxes().iter().flat_map(|b| b.iter().map(|iv| iv.lo)).min().unwrap_or(0);
        let top = self.roads.iter().map(|r| r.beta).max().unwrap_or(0);
        ceil_div((top - lo).max(0), self.min_step().max(1)).max(0) as usize
    }

    fn x0_intersects_bad_set(&self) -> bool {
        self.x0.boxes().iter().any(|b| crate::model::box_meets_bad_set(self, b))
    }
}

/// Validated run settings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub horizon: usize,
    pub disturbance: DisturbancePolicy,
    /// Per-step displacement in ticks.
    pub disturbance_script: Vec<Vec<i64>>,
    pub input_policy: InputPolicy,
    pub input_script: Vec<Control>,
    pub uncontrolled_policy: UncontrolledPolicy,
    pub uncontrolled_script: Vec<Vec<i64>>,
    pub attacks: Vec<AttackPlan>,
}

impl ScenarioConfig {
    pub fn new(cfg: &IntersectionConfig, seed: u64) -> Self {
        ScenarioConfig {
            seed,
            horizon: cfg.worst_crossing_steps() + 4,
            disturbance: DisturbancePolicy::Uniform,
            disturbance_script: Vec::new(),
            input_policy: InputPolicy::First,
            input_script: Vec::new(),
            uncontrolled_policy: UncontrolledPolicy::Random,
            uncontrolled_script: Vec::new(),
            attacks: Vec::new(),
        }
    }

    pub fn validate(&self, cfg: &IntersectionConfig) -> Result<(), ConfigError> {
        let mut c = Checker { diags: Vec::new() };
        if self.horizon < cfg.worst_crossing_steps() {
            c.fail(
                "scenario.horizon",
                format!("{} is below the worst-case crossing time of {} steps", self.horizon, cfg.worst_crossing_steps()),
            );
        }
        let (dmin, dmax) = cfg.delta_bounds();
        for (k, d) in self.disturbance_script.iter().enumerate() {
            if d.len() != cfg.n() || d.iter().any(|&x| x < dmin || x > dmax) {
                c.fail(format!("scenario.disturbance_script[{k}]"), "needs one in-bounds displacement per vehicle");
            }
        }
        for (k, u) in self.input_script.iter().enumerate() {
            if !cfg.controls().contains(u) {
                c.fail(format!("scenario.input_script[{k}]"), format!("{u} is not a controlled input"));
            }
        }
        let n_uc = cfg.n() - cfg.controlled().len();
        for (k, u) in self.uncontrolled_script.iter().enumerate() {
            let unc: Vec<usize> = (0..cfg.n()).filter(|&i| !cfg.is_controlled(i)).collect();
            if u.len() != n_uc || u.iter().zip(&unc).any(|(s, &i)| !cfg.vehicles()[i].speeds.contains(s)) {
                c.fail(format!("scenario.uncontrolled_script[{k}]"), "needs one grid speed per uncontrolled vehicle");
            }
        }
        if let Err(msgs) = crate::attacker::validate_plans(&self.attacks, cfg) {
            for (key, m) in msgs {
                c.fail(key, m);
            }
        }
        if c.diags.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(c.diags))
        }
    }
}

impl ConfigFile {
    /// Validates the intersection and (when present) the scenario and attacks.
    pub fn validate(&self) -> Result<(IntersectionConfig, ScenarioConfig), ConfigError> {
        let cfg = self.intersection.validate()?;
        let sc = self.scenario_for(&cfg)?;
        Ok((cfg, sc))
    }

    pub fn scenario_for(&self, cfg: &IntersectionConfig) -> Result<ScenarioConfig, ConfigError> {
        let spec = self.scenario.clone().unwrap_or_default();
        let mut c = Checker { diags: Vec::new() };
        let mut sc = ScenarioConfig::new(cfg, spec.seed);
        if let Some(h) = spec.horizon {
            sc.horizon = h;
        }
        sc.disturbance = spec.disturbance;
        sc.input_policy = spec.input_policy;
        sc.uncontrolled_policy = spec.uncontrolled_policy;
        sc.uncontrolled_script = spec.uncontrolled_script.clone();
        sc.input_script = spec.input_script.iter().cloned().map(Control).collect();
        for (k, row) in spec.disturbance_script.iter().enumerate() {
            let mut out = Vec::new();
            for v in row {
                match cfg.to_ticks(v.0) {
                    Some(t) => out.push(t),
                    None => c.fail(format!("scenario.disturbance_script[{k}]"), format!("{v} is off the tick grid")),
                }
            }
            sc.disturbance_script.push(out);
        }
        for (a, spec) in self.attacks.iter().enumerate() {
            let key = format!("attack[{a}]");
            let strategy = match spec.strategy {
                StrategyKind::Surge => AttackStrategy::Surge {
                    sign: spec.sign.unwrap_or(Sign::Positive),
                },
                StrategyKind::Random => AttackStrategy::RandomStealthy,
                StrategyKind::Offset => match spec.offset.and_then(|o| cfg.to_ticks(o.0)) {
                    Some(t) => AttackStrategy::Offset { offset: t },
                    None => {
                        c.fail(format!("{key}.offset"), "offset strategy needs an on-grid `offset`");
                        continue;
                    }
                },
                StrategyKind::Trace => {
                    let mut rows = Vec::new();
                    for (k, row) in spec.trace.iter().enumerate() {
                        let r: Option<Vec<i64>> = row.iter().map(|v| cfg.to_ticks(v.0)).collect();
                        match r {
                            Some(r) if r.len() == cfg.n() => rows.push(r),
                            _ => c.fail(format!("{key}.trace[{k}]"), "needs one on-grid error per vehicle"),
                        }
                    }
                    AttackStrategy::Trace { errors: rows }
                }
            };
            sc.attacks.push(AttackPlan {
                targets: spec.targets.clone(),
                start: spec.start,
                end: spec.end,
                strategy,
            });
        }
        if !c.diags.is_empty() {
            return Err(ConfigError::Invalid(c.diags));
        }
        sc.validate(cfg)?;
        Ok(sc)
    }
}

/// Ready-made configurations.
pub mod presets {
    use super::*;

    /// Two controlled vehicles on crossing roads: speeds {1,3}, d ∈ [0,1],
    /// τ = μ = 1, conflict zone [9.5, 12.5], x0 = (1,1), T_max = 1, η = b = 0.
    pub fn two_vehicle() -> IntersectionSpec {
        let road = || RoadSpec {
            alpha: Num::ratio(19, 2),
            beta: Num::ratio(25, 2),
        };
        let vehicle = |road| VehicleSpec {
            road,
            controlled: true,
            speeds: vec![1, 3],
            x0: InitialSpec::Point(Num::int(1)),
            bias: Some(Num::int(0)),
            threshold: Some(Num::int(0)),
        };
        IntersectionSpec {
            tau: Num::int(1),
            mu: Num::int(1),
            scale: 1000,
            gamma: Num::int(0),
            d_min: Num::int(0),
            d_max: Num::int(1),
            t_max: 1,
            roads: vec![road(), road()],
            vehicles: vec![vehicle(0), vehicle(1)],
        }
    }

    pub fn two_vehicle_config() -> IntersectionConfig {
        two_vehicle().validate().expect("preset is valid")
    }

    pub const TWO_VEHICLE_TOML: &str = include_str!("../configs/two_vehicle.toml");
}
