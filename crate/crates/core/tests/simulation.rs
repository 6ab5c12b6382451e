use std::sync::Arc;

use dgnash::error::Error;
use dgnash::game::{GameSpec, Player};
use dgnash::grid::Grid;
use dgnash::nash::{build_nash_map, NashBuildOptions};
use dgnash::oracle;
use dgnash::sim::{
    deviation_catalog, deviation_experiment, make_punishment_profile, simulate, simulate_on, ExperimentOptions, FeedbackStrategy, Partition,
    ProfileOptions, SimOptions,
};

fn example() -> GameSpec {
    GameSpec::example(vec![-1.0, 0.0, 1.0])
}

#[test]
fn constant_controls_reach_the_exact_endpoint() {
    let spec = example();
    let t = simulate(&spec, 0.2, &[0.1, -0.3], &FeedbackStrategy::Constant(2), 0.03, &FeedbackStrategy::Constant(0), 0.05, 3, &SimOptions::default()).unwrap();
    let end = t.endpoint();
    assert!((end[0] - 0.9).abs() < 1e-12 && (end[1] + 1.1).abs() < 1e-12);
    assert!((t.payoff(Player::First) + 2.0).abs() < 1e-12);
    assert!((t.payoff(Player::Second) + 1.1).abs() < 1e-12);
    assert!(!t.any_punishment());
}

#[test]
fn equal_precisions_give_a_consistent_motion() {
    let spec = example();
    let p = Partition::uniform(0.0, 1.0, 0.1).unwrap();
    assert_eq!(p.instants().len(), 12);
    let t = simulate_on(&spec, &[0.0, 0.0], &FeedbackStrategy::Constant(1), 0.1, &p, &FeedbackStrategy::Constant(2), 0.1, &p).unwrap();
    assert_eq!(t.times, p.instants());
}

#[test]
fn out_of_range_control_is_a_strategy_error() {
    let spec = example();
    let r = simulate(&spec, 0.0, &[0.0, 0.0], &FeedbackStrategy::Constant(7), 0.1, &FeedbackStrategy::Constant(0), 0.1, 0, &SimOptions::default());
    assert!(matches!(r, Err(Error::Strategy(_))));
}

#[test]
fn trajectory_csv_has_documented_columns() {
    let spec = example();
    let t = simulate(&spec, 0.0, &[0.0, 0.0], &FeedbackStrategy::Constant(0), 0.25, &FeedbackStrategy::Constant(2), 0.25, 0, &SimOptions::default()).unwrap();
    let mut buf = Vec::new();
    t.write_csv(&spec, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,x1,x2,u1,v1,punishing_flag"));
    assert_eq!(lines.count(), t.len());
}

#[test]
fn profile_tracks_its_target_and_self_play_has_zero_gain() {
    let spec = example();
    let grid = Grid::for_game(&spec, 20, vec![-2.0, -2.0], vec![2.0, 2.0], vec![41, 41]).unwrap();
    let [w1, w2, c1, c2] = oracle::example_fields(&grid);
    let (w1, w2) = (Arc::new(w1), Arc::new(w2));
    let (map, _) = build_nash_map(&spec, &grid, &w1, &w2, &NashBuildOptions::default()).unwrap();

    // Singleton region: the agreed motion realizes a payoff within one quantum of its cloud target.
    let x = [0.0, 0.4];
    let target = map.cloud(0, grid.nearest_node(&x))[0];
    let exact = [oracle::lower1_exact(0.0, 0.0, 0.4), oracle::lower2_exact(0.0, 0.0, 0.4)];
    assert!((target[0] - exact[0]).abs() + (target[1] - exact[1]).abs() <= map.quantum());
    let profile = make_punishment_profile(&spec, &map, w1.clone(), w2.clone(), 0.0, &x, target, &ProfileOptions::default()).unwrap();
    let realized = profile.agreed.payoffs;
    assert!((realized[0] - target[0]).abs() + (realized[1] - target[1]).abs() <= map.quantum(), "{realized:?} vs {target:?}");
    assert!(profile.path_dist.iter().all(|d| *d <= 0.1));

    let opts = ExperimentOptions {
        eps_schedule: vec![0.05],
        trials: 1,
        ..ExperimentOptions::default()
    };
    let catalog = deviation_catalog(&spec, &profile, Player::First, Some(Arc::new(c1)), Some(w1.clone()));
    assert!(catalog.len() >= 12);
    let r = deviation_experiment(&spec, &profile, Player::First, &catalog, &opts).unwrap();
    assert_eq!(r.self_gain, 0.0);
    assert!(r.rows.iter().filter(|row| row.deviation == "profile").all(|row| !row.punished));
    let mut buf = Vec::new();
    r.write_csv(&mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), r.rows.len() + 1);

    let catalog2 = deviation_catalog(&spec, &profile, Player::Second, Some(Arc::new(c2)), Some(w2));
    let r2 = deviation_experiment(&spec, &profile, Player::Second, &catalog2, &opts).unwrap();
    assert!(r2.pass(), "{}", r2.summary());
}

#[test]
fn profile_rejects_targets_outside_the_map() {
    let spec = example();
    let grid = Grid::for_game(&spec, 10, vec![-2.0, -2.0], vec![2.0, 2.0], vec![21, 21]).unwrap();
    let [w1, w2, _, _] = oracle::example_fields(&grid);
    let (w1, w2) = (Arc::new(w1), Arc::new(w2));
    let (map, _) = build_nash_map(&spec, &grid, &w1, &w2, &NashBuildOptions::default()).unwrap();
    let r = make_punishment_profile(&spec, &map, w1, w2, 0.0, &[0.0, 0.0], [5.0, 5.0], &ProfileOptions::default());
    assert!(matches!(r, Err(Error::Precondition(_))));
}
