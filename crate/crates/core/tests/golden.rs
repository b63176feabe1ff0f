use windroute::harness::{ExperimentConfig, Scenario};
use windroute::mission::{simulate, Policy};

fn golden() -> Scenario {
    Scenario::from_json(include_str!("data/obstacle_scenario.json")).unwrap()
}

#[test]
fn obstacle_scenario_round_trips() {
    let s = golden();
    assert_eq!(s.obstacles.len(), 80);
    assert_eq!(s.depots.len(), 4);
    assert_eq!(Scenario::from_json(&s.to_json()).unwrap(), s);
}

#[test]
fn both_policies_finish_the_obstacle_scenario() {
    let s = golden();
    let grid = s.build_grid().unwrap();
    let cfg = ExperimentConfig::default();
    let mut energies = Vec::new();
    for policy in [Policy::Greedy, Policy::Divided] {
        let out = simulate(&grid, &s.wind, &s.craft, &cfg.mission_config(policy)).unwrap();
        assert!(out.completed, "{policy:?}");
        out.record.check().unwrap();
        let again = simulate(&grid, &s.wind, &s.craft, &cfg.mission_config(policy)).unwrap();
        assert_eq!(out.record, again.record);
        energies.push(out.total_energy());
    }
    assert!(energies[1] < energies[0]);
}
