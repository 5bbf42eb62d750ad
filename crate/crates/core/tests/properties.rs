use std::sync::OnceLock;

use num_rational::Ratio;
use proptest::prelude::*;
use resilient_intersection::attacker::stealthy_set;
use resilient_intersection::config::presets;
use resilient_intersection::detector::{Decision, DetectorState};
use resilient_intersection::estimator::{EstimatorOutcome, EstimatorState};
use resilient_intersection::model::{
    cell_extent, post_cells, post_seq_cells, quantize, quantize_pos, segment_collides, step_dynamics, transition_safe,
    Interval,
};
use resilient_intersection::sim::{estimate_is_sound, pairwise_check, run_scenario, Supervision};
use resilient_intersection::{BaselineTable, BoxUnion, Cell, CellSet, ConfigFile, Control, IntersectionConfig, ScenarioConfig};

fn small_cfg() -> IntersectionConfig {
    let mut spec = presets::two_vehicle();
    spec.scale = 4;
    spec.validate().unwrap()
}

fn with_eta(cfg: &IntersectionConfig, eta4: i64) -> IntersectionConfig {
    cfg.with_threshold(Ratio::new(eta4, 4)).unwrap()
}

fn control() -> impl Strategy<Value = Control> {
    prop::sample::select(presets::two_vehicle_config().controls().to_vec())
}

fn state() -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(0i64..60, 2)
}

fn delta() -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(0i64..=4, 2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn quantized_point_lies_in_its_cell(x in -20i64..80) {
        let cfg = small_cfg();
        match quantize_pos(&cfg, 0, x) {
            Cell::Marked => prop_assert!(x > cfg.beta(0)),
            c => {
                let (lo, hi) = cell_extent(&cfg, 0, c).unwrap();
                prop_assert!(lo < x && x <= hi);
            }
        }
    }

    #[test]
    fn quantization_is_monotone(a in -20i64..80, b in -20i64..80) {
        let cfg = small_cfg();
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(quantize_pos(&cfg, 1, lo) <= quantize_pos(&cfg, 1, hi));
    }

    #[test]
    fn plant_step_stays_in_post(x in state(), u in control(), d in delta()) {
        let cfg = small_cfg();
        let disp = cfg.displacement(&u, &[]);
        let next = step_dynamics(&cfg, &x, &disp, &d);
        prop_assert!(BoxUnion::point(&x).post(&cfg, &u).contains(&next));
        let cells = post_cells(&cfg, &CellSet::singleton(quantize(&cfg, &x)), &u);
        prop_assert!(cells.contains(&quantize(&cfg, &next)));
    }

    #[test]
    fn post_seq_is_iterated_post(x in state(), seq in prop::collection::vec(control(), 1..4)) {
        let cfg = small_cfg();
        let start = BoxUnion::point(&x);
        let folded = seq.iter().fold(start.clone(), |s, u| s.post(&cfg, u));
        prop_assert_eq!(start.post_seq(&cfg, &seq), folded);
        let q = CellSet::singleton(quantize(&cfg, &x));
        let folded = seq.iter().fold(q.clone(), |s, u| post_cells(&cfg, &s, u));
        prop_assert_eq!(post_seq_cells(&cfg, &q, &seq), folded);
    }

    #[test]
    fn safety_is_antitone_in_the_set(x in state(), w in prop::collection::vec(0i64..6, 2), u in control()) {
        let cfg = small_cfg();
        let small = BoxUnion::point(&x);
        let big = BoxUnion::from_box(x.iter().zip(&w).map(|(&a, &b)| Interval::new(a, a + b)).collect());
        prop_assert!(small.is_subset(&big));
        if transition_safe(&cfg, &big, &u) {
            prop_assert!(transition_safe(&cfg, &small, &u));
        }
    }

    #[test]
    fn safe_transitions_avoid_the_bad_set(x in state(), u in control(), d in delta()) {
        let cfg = small_cfg();
        if transition_safe(&cfg, &BoxUnion::point(&x), &u) {
            let step: Vec<i64> = cfg.displacement(&u, &[]).iter().zip(&d).map(|(a, b)| a + b).collect();
            prop_assert!(!segment_collides(&cfg, &x, &step));
        }
    }

    #[test]
    fn alarm_iff_outside_stealthy_set(
        prev in state(),
        err in prop::collection::vec(-6i64..=6, 2),
        d in delta(),
        u in control(),
        eta4 in 0i64..=4,
        c0 in prop::collection::vec(0i64..=4, 2),
    ) {
        let cfg = with_eta(&small_cfg(), eta4);
        let mut det = DetectorState::new(&cfg);
        det.c = c0.iter().map(|&c| c.min(eta4)).collect();
        let x = step_dynamics(&cfg, &prev, &cfg.displacement(&u, &[]), &d);
        let meas: Vec<i64> = x.iter().zip(&err).map(|(a, e)| a + e).collect();
        let (_, _, decision) = det.observe(&cfg, &meas, &prev, &u);
        let stealthy = stealthy_set(&cfg, &prev, &u, &det);
        prop_assert_eq!(decision == Decision::H0, stealthy.contains(&meas));
    }

    #[test]
    fn stealthy_set_grows_with_threshold(prev in state(), u in control(), a in 0i64..=8, b in 0i64..=8) {
        let base = small_cfg();
        let (lo, hi) = (a.min(b), a.max(b));
        let s_lo = stealthy_set(&base, &prev, &u, &DetectorState::new(&with_eta(&base, lo)));
        let s_hi = stealthy_set(&base, &prev, &u, &DetectorState::new(&with_eta(&base, hi)));
        prop_assert!(s_lo.is_subset(&s_hi));
    }

    #[test]
    fn correction_only_shrinks_the_prediction(
        u in control(),
        d in delta(),
        e in prop::collection::vec(-2i64..=2, 2),
    ) {
        let cfg = with_eta(&small_cfg(), 4);
        let x: Vec<i64> = cfg.x0().hull().unwrap().iter().map(|iv| iv.lo).collect();
        let est = EstimatorState::new(&cfg, &x);
        let next = step_dynamics(&cfg, &x, &cfg.displacement(&u, &[]), &d);
        let meas: Vec<i64> = next.iter().zip(&e).map(|(a, b)| a + b).collect();
        let predicted = est.corrected.post(&cfg, &u);
        let det = DetectorState::new(&cfg);
        let (_, _, decision) = det.observe(&cfg, &meas, &x, &u);
        if let Ok(EstimatorOutcome::Updated(s)) = est.step(&cfg, &meas, &u, decision) {
            prop_assert!(s.corrected.is_subset(&predicted));
            prop_assert!(s.corrected.contains(&next));
        }
    }

    #[test]
    fn cellset_text_round_trips(cells in prop::collection::btree_set(prop::collection::vec(-2i64..6, 2), 1..6), m in any::<bool>()) {
        let mut v: Vec<Vec<Cell>> = cells.into_iter().map(|q| q.into_iter().map(Cell::At).collect()).collect();
        if m {
            v.push(vec![Cell::Marked, Cell::At(3)]);
        }
        let set = CellSet::from_vec(v);
        prop_assert_eq!(set.to_string().parse::<CellSet>().unwrap(), set);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn runs_are_deterministic_and_sound(seed in any::<u64>(), eta4 in 0i64..=4) {
        let cfg = with_eta(&small_cfg(), eta4);
        let baseline = &baselines()[eta4 as usize];
        let sc = resilient_intersection::verify::randomized_scenario(
            &cfg,
            seed,
            &resilient_intersection::attacker::AttackStrategy::RandomStealthy,
        );
        let a = run_scenario(&cfg, &sc, Supervision::Baseline(baseline), baseline).unwrap();
        let b = run_scenario(&cfg, &sc, Supervision::Baseline(baseline), baseline).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(estimate_is_sound(&a));
    }

    #[test]
    fn pairwise_check_matches_bad_set(seed in any::<u64>(), n in 3usize..=5) {
        let (cfg, mut sc) = ConfigFile::parse(&many_vehicles(n)).unwrap().validate().unwrap();
        sc.seed = seed;
        sc.input_policy = resilient_intersection::config::InputPolicy::Random;
        let tr = run_scenario(&cfg, &sc, Supervision::Unsupervised, &baselines()[0]).unwrap();
        prop_assert_eq!(pairwise_check(&cfg, &tr), tr.collisions.is_empty());
    }
}

fn baselines() -> &'static [BaselineTable] {
    static CELL: OnceLock<Vec<BaselineTable>> = OnceLock::new();
    CELL.get_or_init(|| (0..=4).map(|e| BaselineTable::synthesize(&with_eta(&small_cfg(), e))).collect())
}

/// `n` controlled vehicles spread over two crossing roads.
fn many_vehicles(n: usize) -> String {
    let mut s = String::from(
        "[intersection]\ntau = 1\nmu = 1\nscale = 2\ngamma = 1\nd_min = 0\nd_max = 1\nt_max = 1\n\
         [[intersection.road]]\nalpha = 5.5\nbeta = 7.5\n[[intersection.road]]\nalpha = 5.5\nbeta = 7.5\n",
    );
    for i in 0..n {
        let x0 = 3 - (i / 2) as i64 * 2;
        s += &format!("[[intersection.vehicle]]\nroad = {}\nspeeds = [1, 2]\nx0 = {x0}\nbias = 0\nthreshold = 0\n", i % 2);
    }
    s
}

#[test]
fn scenario_defaults_cover_the_crossing() {
    let cfg = small_cfg();
    let sc = ScenarioConfig::new(&cfg, 0);
    assert!(sc.horizon >= cfg.worst_crossing_steps());
    assert!(sc.validate(&cfg).is_ok());
}
