//! Executable acceptance checks, shared by `risup verify` and the test suite.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attacker::{stealthy_bounds, stealthy_set, AttackPlan, AttackStrategy, Sign};
use crate::config::{presets, DisturbancePolicy, InitialSpec, InputPolicy, IntersectionConfig, IntersectionSpec, RoadSpec, ScenarioConfig, VehicleSpec};
use crate::des::{successors, Moves, Observer, SynthState, DEFAULT_BUDGET};
use crate::detector::{Decision, DetectorState};
use crate::exec::Exec;
use crate::model::{quantize, CellSet, Control};
use crate::numeric::{Num, Rational};
use crate::sim::{check_refinement, estimate_is_sound, run_scenario, sweep, Outcome, RunTrace, SimError, Supervision, SweepPoint};
use crate::supervisor::{BaselineTable, ResilientTable};

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub limit: Duration,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} criterion {} ({}): {} [{:.2}s / {}s]",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.elapsed.as_secs_f64(),
            self.limit.as_secs()
        )
    }
}

type CheckFn = fn(Exec) -> Result<String, String>;

/// `(id, name, time limit in seconds, check)`.
pub const CHECKS: [(u8, &str, u64, CheckFn); 9] = [
    (1, "baseline vulnerability", 10, baseline_vulnerability),
    (2, "resilience under stealthy attacks", 120, resilience),
    (3, "correction step", 1, correction_step),
    (4, "stealthy error bounds", 60, stealthy_equivalence),
    (5, "estimator soundness", 300, estimator_soundness),
    (6, "observer refinement", 60, refinement),
    (7, "T_max tradeoff", 300, t_max_tradeoff),
    (8, "maximal permissiveness", 600, maximal_permissiveness),
    (9, "threshold monotonicity", 60, threshold_monotonicity),
];

pub fn run_check(id: u8, exec: Exec) -> Option<CheckResult> {
    let &(id, name, limit, f) = CHECKS.iter().find(|c| c.0 == id)?;
    let limit = Duration::from_secs(limit);
    let start = Instant::now();
    let res = f(exec);
    let elapsed = start.elapsed();
    let (mut passed, mut detail) = match res {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    if elapsed > limit {
        passed = false;
        detail.push_str("; over the time limit");
    }
    Some(CheckResult {
        id,
        name,
        passed,
        detail,
        elapsed,
        limit,
    })
}

pub fn run_all(exec: Exec) -> Vec<CheckResult> {
    CHECKS.iter().filter_map(|c| run_check(c.0, exec)).collect()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ctl(v: &[i64]) -> Control {
    Control(v.to_vec())
}

fn cells(s: &str) -> CellSet {
    s.parse().expect("literal cell set")
}

fn surge(targets: Vec<usize>, start: usize) -> AttackPlan {
    AttackPlan {
        targets,
        start,
        end: start + 1,
        strategy: AttackStrategy::Surge { sign: Sign::Positive },
    }
}

/// The example scenario: scripted inputs and disturbance, surge on vehicle 2 at step 1.
pub fn example_scenario(cfg: &IntersectionConfig, inputs: &[[i64; 2]], dist: &[[i64; 2]]) -> ScenarioConfig {
    let mut sc = ScenarioConfig::new(cfg, 0);
    sc.input_script = inputs.iter().map(|u| ctl(u)).collect();
    sc.disturbance_script = dist.iter().map(|d| d.iter().map(|v| v * cfg.scale()).collect()).collect();
    sc.attacks = vec![surge(vec![1], 1)];
    sc
}

/// Admissible attack windows: start ≥ 1, length ≤ `T_max`, at least `T_max`
/// clean steps between windows.
pub fn random_windows(rng: &mut impl Rng, cfg: &IntersectionConfig, horizon: usize, strategy: &AttackStrategy) -> Vec<AttackPlan> {
    let t = cfg.t_max();
    if t == 0 {
        return Vec::new();
    }
    let mut plans = Vec::new();
    let mut k = rng.gen_range(1..=3);
    while k < horizon {
        if rng.gen_bool(0.6) {
            let len = rng.gen_range(1..=t);
            let mut targets: Vec<usize> = (0..cfg.n()).filter(|_| rng.gen_bool(0.5)).collect();
            if targets.is_empty() {
                targets.push(rng.gen_range(0..cfg.n()));
            }
            plans.push(AttackPlan {
                targets,
                start: k,
                end: k + len,
                strategy: strategy.clone(),
            });
            k += len + t + rng.gen_range(0..3);
        } else {
            k += 1;
        }
    }
    plans
}

fn stealthy_strategies(cfg: &IntersectionConfig) -> Vec<AttackStrategy> {
    vec![
        AttackStrategy::Surge { sign: Sign::Positive },
        AttackStrategy::Surge { sign: Sign::Negative },
        AttackStrategy::RandomStealthy,
        AttackStrategy::Offset { offset: cfg.scale() },
    ]
}

/// Random inputs and disturbances with admissible windows of `strategy`.
pub fn randomized_scenario(cfg: &IntersectionConfig, seed: u64, strategy: &AttackStrategy) -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(7);
    let mut sc = ScenarioConfig::new(cfg, seed);
    sc.input_policy = InputPolicy::Random;
    sc.disturbance = if rng.gen_bool(0.5) { DisturbancePolicy::Uniform } else { DisturbancePolicy::Corners };
    sc.attacks = random_windows(&mut rng, cfg, sc.horizon, strategy);
    sc
}

fn baseline_vulnerability(_: Exec) -> Result<String, String> {
    let cfg = presets::two_vehicle_config();
    let base = BaselineTable::synthesize(&cfg);
    let s = cfg.scale();
    for (x, want) in [
        ([1, 1], vec![ctl(&[1, 3]), ctl(&[3, 1])]),
        ([2, 4], vec![ctl(&[1, 3])]),
        ([2, 5], vec![ctl(&[1, 1]), ctl(&[1, 3])]),
    ] {
        let got = base.admissible_controls(&quantize(&cfg, &[x[0] * s, x[1] * s]));
        ensure(got.as_ref() == Some(&want), || format!("σ̃({},{}) = {got:?}, expected {want:?}", x[0], x[1]))?;
    }
    let sc = example_scenario(&cfg, &[[1, 3], [1, 1]], &[[0, 0], [1, 0]]);
    let tr = run_scenario(&cfg, &sc, Supervision::Baseline(&base), &base).map_err(|e| e.to_string())?;
    let r1 = &tr.steps[1];
    ensure(r1.meas == [2 * s, 5 * s] && r1.decision == Decision::H0, || {
        format!("surge gave measurement {:?} with {:?}", r1.meas, r1.decision)
    })?;
    ensure(r1.chosen == Some(ctl(&[1, 1])), || format!("scripted (1,1) not applied: {:?}", r1.chosen))?;
    ensure(matches!(tr.outcome, Outcome::Collision | Outcome::Deadlock), || format!("outcome {}", tr.outcome))?;
    Ok(format!("tables match, surge passes as H0, scripted (1,1) ends in {}", tr.outcome))
}

fn resilience(exec: Exec) -> Result<String, String> {
    let cfg = presets::two_vehicle_config();
    let base = BaselineTable::synthesize(&cfg);
    let table = ResilientTable::synthesize(&cfg, exec, DEFAULT_BUDGET).map_err(|e| e.to_string())?;
    ensure(table.success(), || "resilient synthesis failed".into())?;
    let sc = example_scenario(&cfg, &[[1, 3], [1, 1]], &[[0, 0], [0, 1]]);
    let tr = run_scenario(&cfg, &sc, Supervision::Resilient(&table), &base).map_err(|e| e.to_string())?;
    let r1 = &tr.steps[1];
    ensure(r1.observer_info.as_ref() == Some(&cells("({2,3},{4,5})")), || {
        format!("information state after the surge is {:?}", r1.observer_info)
    })?;
    ensure(r1.admissible == [ctl(&[1, 3])], || format!("admissible after the surge: {:?}", r1.admissible))?;
    ensure(tr.outcome == Outcome::SafeMarked, || format!("scripted run ended {}", tr.outcome))?;

    const SEEDS: u64 = 1000;
    let mut total = 0;
    for strategy in stealthy_strategies(&cfg) {
        let seeds: Vec<u64> = (0..SEEDS).collect();
        let results = exec.map(&seeds, |&seed| {
            let sc = randomized_scenario(&cfg, seed, &strategy);
            run_scenario(&cfg, &sc, Supervision::Resilient(&table), &base)
        });
        for (seed, r) in seeds.iter().zip(results) {
            let tr = r.map_err(|e| format!("{} seed {seed}: {e}", strategy.name()))?;
            ensure(matches!(tr.outcome, Outcome::SafeMarked | Outcome::Detected), || {
                format!("{} seed {seed} ended {}", strategy.name(), tr.outcome)
            })?;
            total += 1;
        }
    }
    Ok(format!("({{2,3}},{{4,5}}) reached, only (1,3) enabled; {total} attacked runs all SAFE_MARKED or DETECTED"))
}

fn correction_step(_: Exec) -> Result<String, String> {
    let cfg = presets::two_vehicle_config();
    let u = ctl(&[1, 3]);
    let init = SynthState::initial(&cfg);
    let s1 = successors(&cfg, &init, &u)
        .into_iter()
        .find(|(_, s)| s.info == cells("({2,3},{4,5})"))
        .ok_or("({2,3},{4,5}) is not a successor of the initial state")?
        .1;
    let pred = crate::model::post_cells(&cfg, &s1.info, &u);
    ensure(pred == cells("({3,4,5},{7,8,9})"), || format!("prediction {pred}"))?;
    let succ = successors(&cfg, &s1, &u);
    ensure(succ.len() == 4, || format!("{} correction classes", succ.len()))?;
    let s = cfg.scale();
    let label = crate::des::runtime_label(&cfg, &s1, &quantize(&cfg, &[2 * s, 5 * s]), &[u], &quantize(&cfg, &[3 * s, 8 * s]));
    let hit = succ.iter().find(|(l, _)| *l == label).ok_or_else(|| format!("no successor labelled {label}"))?;
    ensure(hit.1.info == cells("({3,4},{8,9})"), || format!("successor {}", hit.1.info))?;
    Ok("successor ({3,4},{8,9}) among 4 correction classes".into())
}

/// One vehicle on a road of five cells, quarter-cell ticks.
pub fn single_vehicle(bias: Rational, eta: Rational) -> IntersectionConfig {
    IntersectionSpec {
        tau: Num::int(1),
        mu: Num::int(1),
        scale: 4,
        gamma: Num::int(0),
        d_min: Num::int(0),
        d_max: Num::int(1),
        t_max: 1,
        roads: vec![RoadSpec {
            alpha: Num::ratio(5, 2),
            beta: Num::ratio(9, 2),
        }],
        vehicles: vec![VehicleSpec {
            road: 0,
            controlled: true,
            speeds: vec![1, 2],
            x0: InitialSpec::Point(Num::int(0)),
            bias: Some(Num(bias)),
            threshold: Some(Num(eta)),
        }],
    }
    .validate()
    .expect("single-vehicle instance is valid")
}

fn stealthy_equivalence(_: Exec) -> Result<String, String> {
    let q = |n| Rational::new(n, 4);
    let mut cases = 0u64;
    for b in [q(0), q(1), q(2)] {
        for eta in [q(0), q(1), q(3), q(8)] {
            let cfg = single_vehicle(b, eta);
            let span = 5 * cfg.scale();
            for prev in 0..span {
                for u in cfg.controls() {
                    let (lo, hi) = cfg.step_range(0, u);
                    for c in 0..=cfg.threshold()[0] {
                        let det = DetectorState {
                            c: vec![c],
                            ..DetectorState::new(&cfg)
                        };
                        for x in prev + lo..=prev + hi {
                            let bounds = stealthy_bounds(&cfg, &[x], &[prev], u, &det)[0];
                            for e in -3 * cfg.scale()..=3 * cfg.scale() {
                                let (_, _, d) = det.observe(&cfg, &[x + e], &[prev], u);
                                let inside = bounds.is_some_and(|(l, h)| l <= e && e <= h);
                                ensure((d == Decision::H0) == inside, || {
                                    format!("b={b} η={eta} prev={prev} u={u} C={c} x={x} e={e}: {d:?} vs bounds {bounds:?}")
                                })?;
                                cases += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(format!("{cases} cases, no counterexample"))
}

fn estimator_soundness(exec: Exec) -> Result<String, String> {
    let base_spec = presets::two_vehicle();
    let mut configs = Vec::new();
    for t in 0..4 {
        for eta in [Rational::from_integer(0), Rational::new(1, 2), Rational::from_integer(1)] {
            for b in [Rational::from_integer(0), Rational::new(1, 4)] {
                let mut spec = base_spec.clone();
                spec.t_max = t;
                for v in &mut spec.vehicles {
                    v.threshold = Some(Num(eta));
                    v.bias = Some(Num(b));
                }
                let cfg = spec.validate().map_err(|e| e.to_string())?;
                let base = BaselineTable::synthesize(&cfg);
                configs.push((cfg, base));
            }
        }
    }
    const RUNS: u64 = 10_000;
    let seeds: Vec<u64> = (0..RUNS).collect();
    let results: Vec<Result<(usize, bool), String>> = exec.map(&seeds, |&seed| {
        let (cfg, base) = &configs[seed as usize % configs.len()];
        let strategies = stealthy_strategies(cfg);
        let strategy = &strategies[(seed as usize / configs.len()) % strategies.len()];
        let sc = randomized_scenario(cfg, seed, strategy);
        let sup = if seed % 2 == 0 { Supervision::Unsupervised } else { Supervision::Baseline(base) };
        let tr = run_scenario(cfg, &sc, sup, base).map_err(|e| format!("seed {seed}: {e}"))?;
        Ok((tr.steps.len(), estimate_is_sound(&tr)))
    });
    let mut steps = 0;
    for (seed, r) in results.into_iter().enumerate() {
        let (n, ok) = r?;
        ensure(ok, || format!("seed {seed}: true state left the corrected set"))?;
        steps += n;
    }
    Ok(format!("{RUNS} runs, {steps} steps, true state always in the corrected set"))
}

fn refinement(exec: Exec) -> Result<String, String> {
    let cfg = presets::two_vehicle_config();
    let base = BaselineTable::synthesize(&cfg);
    let table = ResilientTable::synthesize(&cfg, exec, DEFAULT_BUDGET).map_err(|e| e.to_string())?;
    let strategies = stealthy_strategies(&cfg);
    let seeds: Vec<u64> = (0..100).collect();
    let traces: Vec<Result<RunTrace, SimError>> = exec.map(&seeds, |&seed| {
        let sc = randomized_scenario(&cfg, seed, &strategies[seed as usize % strategies.len()]);
        run_scenario(&cfg, &sc, Supervision::Resilient(&table), &base)
    });
    let mut steps = 0;
    for (seed, tr) in traces.into_iter().enumerate() {
        let tr = tr.map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(check_refinement(&tr), || format!("seed {seed}: ℓ(I) differs from ι"))?;
        steps += tr.steps.iter().filter(|r| r.observer_info.is_some()).count();
    }
    let mut spec = presets::two_vehicle();
    spec.d_max = Num::ratio(7, 10);
    let rejected = match spec.validate() {
        Err(e) => e.diagnostics().iter().any(|d| d.key == "intersection.d_max"),
        Ok(_) => false,
    };
    ensure(rejected, || "δ_max = 0.7 was not rejected".into())?;
    Ok(format!("100 runs, {steps} observer steps with ℓ(I) = ι; δ_max = 0.7 rejected"))
}

fn t_max_tradeoff(exec: Exec) -> Result<String, String> {
    let cfg = presets::two_vehicle_config();
    let mut template = ScenarioConfig::new(&cfg, 0);
    template.input_policy = InputPolicy::Random;
    template.attacks = vec![surge(vec![1], 1)];
    let zero = Rational::from_integer(0);
    let points: Vec<SweepPoint> = [1, 4, 12].iter().map(|&t| SweepPoint { t_max: t, eta: zero }).collect();
    let rows = sweep(&cfg, &template, &points, 50, exec, DEFAULT_BUDGET);
    for r in &rows {
        ensure(r.synthesized, || format!("T_max = {} synthesis failed: {:?}", r.point.t_max, r.error))?;
        if r.point.t_max >= 4 {
            ensure(r.non_singleton_pending == 0, || {
                format!("T_max = {}: {} states with several admissible inputs", r.point.t_max, r.non_singleton_pending)
            })?;
        }
        let bad = r.outcomes[&Outcome::Collision] + r.outcomes[&Outcome::Deadlock];
        ensure(bad == 0, || format!("T_max = {}: {bad} unsafe runs", r.point.t_max))?;
    }
    let perm: Vec<usize> = rows.iter().map(|r| r.permissiveness).collect();
    ensure(perm.windows(2).all(|w| w[0] >= w[1]), || format!("permissiveness {perm:?} increases"))?;
    Ok(format!("all synthesized, singletons for T_max ≥ 4, permissiveness {perm:?}"))
}

/// Reduced instance: one controlled vehicle with two speeds against an
/// uncontrolled one, six cells per road including the exit.
pub fn reduced_instance() -> IntersectionSpec {
    let road = || RoadSpec {
        alpha: Num::ratio(7, 2),
        beta: Num::ratio(9, 2),
    };
    let vehicle = |controlled: bool, speeds: Vec<i64>| VehicleSpec {
        road: usize::from(!controlled),
        controlled,
        speeds,
        x0: InitialSpec::Point(Num::int(0)),
        bias: Some(Num::int(0)),
        threshold: Some(Num::int(0)),
    };
    IntersectionSpec {
        tau: Num::int(1),
        mu: Num::int(1),
        scale: 2,
        gamma: Num::int(0),
        d_min: Num::int(0),
        d_max: Num::int(1),
        t_max: 1,
        roads: vec![road(), road()],
        vehicles: vec![vehicle(true, vec![1, 4]), vehicle(false, vec![1])],
    }
}

/// Counts every safe non-blocking control map of the observer game and
/// returns the first one not contained in `table`, if any. Maps are
/// enumerated on their reachable part, which is all that distinguishes them.
pub fn brute_force_maps(obs: &Observer, table: &ResilientTable) -> (u64, Option<String>) {
    let nu = table.controls().len();
    let mut choice: Vec<Option<Vec<usize>>> = vec![None; obs.len()];
    let mut count = 0;
    let mut witness = None;
    enumerate(obs, table, nu, &mut choice, &mut count, &mut witness);
    (count, witness)
}

fn succs(obs: &Observer, s: usize, u: usize) -> Option<&[(crate::des::Label, usize)]> {
    match &obs.moves[s] {
        Moves::Terminal => Some(&[]),
        Moves::Expanded(per) => per[u].as_deref(),
    }
}

fn reachable(obs: &Observer, choice: &[Option<Vec<usize>>]) -> Vec<usize> {
    let mut seen = vec![false; obs.len()];
    let mut order = vec![obs.initial];
    seen[obs.initial] = true;
    let mut i = 0;
    while i < order.len() {
        let s = order[i];
        i += 1;
        if let Some(us) = &choice[s] {
            for &u in us {
                for &(_, t) in succs(obs, s, u).unwrap_or(&[]) {
                    if !seen[t] {
                        seen[t] = true;
                        order.push(t);
                    }
                }
            }
        }
    }
    order
}

fn enumerate(
    obs: &Observer,
    table: &ResilientTable,
    nu: usize,
    choice: &mut Vec<Option<Vec<usize>>>,
    count: &mut u64,
    witness: &mut Option<String>,
) {
    let reach = reachable(obs, choice);
    let open = reach.iter().copied().find(|&s| choice[s].is_none() && !obs.states[s].is_marked());
    let Some(s) = open else {
        if non_blocking(obs, choice, &reach) {
            *count += 1;
            for &s in &reach {
                if let Some(us) = &choice[s] {
                    if !us.iter().all(|u| table.admissible[s].contains(u)) && witness.is_none() {
                        *witness = Some(format!("state {} allows {us:?}, table allows {:?}", obs.states[s], table.admissible[s]));
                    }
                }
            }
        }
        return;
    };
    let safe: Vec<usize> = (0..nu).filter(|&u| succs(obs, s, u).is_some()).collect();
    for mask in 1u32..(1 << safe.len()) {
        let us: Vec<usize> = safe.iter().enumerate().filter(|(b, _)| mask & (1 << b) != 0).map(|(_, &u)| u).collect();
        choice[s] = Some(us);
        enumerate(obs, table, nu, choice, count, witness);
    }
    choice[s] = None;
}

fn non_blocking(obs: &Observer, choice: &[Option<Vec<usize>>], reach: &[usize]) -> bool {
    let mut co: BTreeSet<usize> = reach.iter().copied().filter(|&s| obs.states[s].is_marked()).collect();
    loop {
        let before = co.len();
        for &s in reach {
            if co.contains(&s) {
                continue;
            }
            let hits = choice[s].iter().flatten().any(|&u| succs(obs, s, u).unwrap_or(&[]).iter().any(|(_, t)| co.contains(t)));
            if hits {
                co.insert(s);
            }
        }
        if co.len() == before {
            return co.len() == reach.len();
        }
    }
}

fn maximal_permissiveness(exec: Exec) -> Result<String, String> {
    let cfg = reduced_instance().validate().map_err(|e| e.to_string())?;
    let table = ResilientTable::synthesize(&cfg, exec, DEFAULT_BUDGET).map_err(|e| e.to_string())?;
    ensure(table.success(), || "reduced instance has no supervisor".into())?;
    let (count, witness) = brute_force_maps(&table.observer, &table);
    if let Some(w) = witness {
        return Err(w);
    }
    ensure(count > 0, || "no safe non-blocking map found".into())?;
    Ok(format!("{} observer states, {count} safe non-blocking maps, all contained in the table", table.observer.len()))
}

fn threshold_monotonicity(exec: Exec) -> Result<String, String> {
    let cfg = presets::two_vehicle_config();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10_000 {
        let eta1: Vec<i64> = (0..2).map(|_| rng.gen_range(0..=2000)).collect();
        let eta2: Vec<i64> = eta1.iter().map(|e| e + rng.gen_range(0..=2000)).collect();
        let bias: Vec<i64> = (0..2).map(|_| rng.gen_range(0..=500)).collect();
        let c: Vec<i64> = eta1.iter().map(|&e| rng.gen_range(0..=e)).collect();
        let prev: Vec<i64> = (0..2).map(|_| rng.gen_range(0..=12_000)).collect();
        let u = &cfg.controls()[rng.gen_range(0..cfg.controls().len())];
        let d1 = DetectorState {
            c: c.clone(),
            bias: bias.clone(),
            threshold: eta1.clone(),
        };
        let d2 = DetectorState { threshold: eta2.clone(), ..d1.clone() };
        let (s1, s2) = (stealthy_set(&cfg, &prev, u, &d1), stealthy_set(&cfg, &prev, u, &d2));
        ensure(s1.is_subset(&s2), || format!("η {eta1:?} → {eta2:?}, C {c:?}, prev {prev:?}, u {u}: I^s not nested"))?;
    }
    let etas = [Rational::from_integer(0), Rational::new(1, 4), Rational::from_integer(1), Rational::from_integer(2)];
    let mut tables = Vec::new();
    for &eta in &etas {
        let c = cfg.with_threshold(eta).map_err(|e| e.to_string())?;
        tables.push(ResilientTable::synthesize(&c, exec, DEFAULT_BUDGET).map_err(|e| e.to_string())?);
    }
    let mut sums = Vec::new();
    for (w, pair) in tables.windows(2).enumerate() {
        let cmp = compare_on_shared_states(&pair[0], &pair[1]);
        ensure(cmp.violation.is_none(), || {
            format!("η {} → {}: {}", etas[w], etas[w + 1], cmp.violation.clone().unwrap_or_default())
        })?;
        ensure(cmp.sum_b <= cmp.sum_a, || format!("η {} → {}: permissiveness {} → {}", etas[w], etas[w + 1], cmp.sum_a, cmp.sum_b))?;
        sums.push((cmp.sum_a, cmp.sum_b));
    }
    Ok(format!("10000 nested stealthy sets; shared-state permissiveness {sums:?} for η = 0, 1/4, 1, 2"))
}

/// Comparison of two resilient tables on the observer states they share.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SharedComparison {
    pub shared: usize,
    pub sum_a: usize,
    pub sum_b: usize,
    /// First shared state where `b` admits an input `a` forbids.
    pub violation: Option<String>,
}

/// Compares admissible sets state by state on the non-marked observer
/// states present in both tables (matched by canonical key).
pub fn compare_on_shared_states(a: &ResilientTable, b: &ResilientTable) -> SharedComparison {
    let index: HashMap<String, usize> = b.observer.states.iter().enumerate().map(|(i, s)| (s.to_string(), i)).collect();
    let mut out = SharedComparison {
        shared: 0,
        sum_a: 0,
        sum_b: 0,
        violation: None,
    };
    for (i, s) in a.observer.states.iter().enumerate() {
        if s.is_marked() {
            continue;
        }
        let key = s.to_string();
        let Some(&j) = index.get(&key) else { continue };
        out.shared += 1;
        out.sum_a += a.admissible[i].len();
        out.sum_b += b.admissible[j].len();
        if out.violation.is_none() && !b.admissible[j].iter().all(|u| a.admissible[i].contains(u)) {
            out.violation = Some(format!("{key}: {:?} ⊄ {:?}", b.admissible_controls(j), a.admissible_controls(i)));
        }
    }
    out
}
