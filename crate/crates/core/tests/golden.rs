use resilient_intersection::config::presets;
use resilient_intersection::des::{Observer, DEFAULT_BUDGET};
use resilient_intersection::supervisor::ImportedTable;
use resilient_intersection::{ConfigFile, Exec, ResilientTable};

const GOLDEN: &str = include_str!("golden/two_vehicle_observer.txt");

#[test]
fn observer_export_matches_golden() {
    let (cfg, _) = ConfigFile::parse(presets::TWO_VEHICLE_TOML).unwrap().validate().unwrap();
    for exec in [Exec::Sequential, Exec::Parallel] {
        let obs = Observer::build(&cfg, exec, DEFAULT_BUDGET).unwrap();
        assert_eq!(obs.to_text(&cfg), GOLDEN);
    }
}

#[test]
fn golden_holds_the_example_states() {
    assert!(GOLDEN.starts_with("observer 88 "));
    for info in ["info=({2,3},{4,5})", "info=({3,4},{8,9})"] {
        assert!(GOLDEN.contains(info), "{info}");
    }
}

#[test]
fn table_text_round_trips() {
    let cfg = presets::two_vehicle_config();
    let table = ResilientTable::synthesize(&cfg, Exec::Parallel, DEFAULT_BUDGET).unwrap();
    let text = table.to_text();
    let imported = ImportedTable::parse(&text).unwrap();
    let fresh = ResilientTable::synthesize(&cfg, Exec::Sequential, DEFAULT_BUDGET).unwrap();
    let restored = fresh.with_imported(&imported).unwrap();
    assert_eq!(restored.admissible, table.admissible);
    assert_eq!(restored.to_text(), text);
}
