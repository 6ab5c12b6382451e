use dgnash::game::{AffineDynamics, Dynamics, GameSpec, HullWeights, Payoff, Player};
use dgnash::nash::{box_dist, dist_l1_points, hausdorff_l1, l1};
use dgnash::oracle::{self, ExampleField, OracleConfig};
use dgnash::sim::{simulate, FeedbackStrategy, Partition, SimOptions};
use dgnash::smooth::ScalarField;
use proptest::prelude::*;

fn example() -> GameSpec {
    GameSpec::example(vec![-1.0, 0.0, 1.0])
}

fn affine() -> GameSpec {
    let dynamics = AffineDynamics::new(2, vec![0.0, 1.0, -0.5, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]).unwrap();
    GameSpec::new(
        Dynamics::Affine(dynamics),
        0.0,
        1.0,
        vec![vec![-1.0], vec![0.0], vec![1.0]],
        vec![vec![-0.5], vec![0.5]],
        Payoff::Linear { w: vec![1.0, 0.0], b: 0.0 },
        Payoff::NegDistance { center: vec![0.0, 0.0] },
    )
    .unwrap()
}

fn unit() -> impl Strategy<Value = f64> {
    0.0..=1.0f64
}

fn coord() -> impl Strategy<Value = f64> {
    -1.5..=1.5f64
}

proptest! {
    #[test]
    fn lower_values_stay_below_cooperative_maxima(t in unit(), x in coord(), y in coord()) {
        prop_assert!(oracle::lower1_exact(t, x, y) <= oracle::coop_max_exact(Player::First, t, x, y));
        prop_assert!(oracle::lower2_exact(t, x, y) <= oracle::coop_max_exact(Player::Second, t, x, y));
    }

    #[test]
    fn nash_values_dominate_security_levels(t in unit(), x in coord(), y in coord()) {
        let s = oracle::nash_set_exact(t, x, y);
        prop_assert!(s.j1_lo <= s.j1_hi);
        prop_assert!(s.j1_lo >= oracle::lower1_exact(t, x, y));
        prop_assert!(s.j1_hi <= oracle::coop_max_exact(Player::First, t, x, y));
        prop_assert_eq!(s.j2, oracle::lower2_exact(t, x, y));
    }

    #[test]
    fn nash_set_is_terminal_payoff_at_horizon(x in coord(), y in coord()) {
        let s = oracle::nash_set_exact(1.0, x, y);
        prop_assert!(s.is_point());
        prop_assert_eq!(s.j1_lo, -(x - y).abs());
        prop_assert_eq!(s.j2, y);
    }

    #[test]
    fn minimax_pair_is_the_widest_family_member(t in unit(), x in coord(), y in coord()) {
        let minimax = oracle::minimax_exact(t, x, y);
        let c2 = oracle::family_exact(OracleConfig::new(2.0).unwrap(), t, x, y);
        prop_assert!((minimax.0 - c2.0).abs() < 1e-12 && (minimax.1 - c2.1).abs() < 1e-12);
        // minimax1 is the largest first payoff in the Nash set.
        prop_assert!((minimax.0 - oracle::nash_set_exact(t, x, y).j1_hi).abs() < 1e-12);
    }

    #[test]
    fn family_is_monotone_in_spread(g1 in 0.0..=2.0f64, g2 in 0.0..=2.0f64, t in unit(), x in coord(), y in coord()) {
        let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
        let a = oracle::family_exact(OracleConfig::new(lo).unwrap(), t, x, y).0;
        let b = oracle::family_exact(OracleConfig::new(hi).unwrap(), t, x, y).0;
        prop_assert!(a <= b + 1e-12);
        prop_assert!(a >= oracle::lower1_exact(t, x, y) - 1e-12);
    }

    #[test]
    fn family_is_lipschitz_continuous(g in 0.0..=2.0f64, t in 0.0..0.99f64, x in coord(), y in coord(), dx in -1e-3..1e-3f64, dy in -1e-3..1e-3f64, dt in 0.0..1e-3f64) {
        let cfg = OracleConfig::new(g).unwrap();
        let a = oracle::family_exact(cfg, t, x, y);
        let b = oracle::family_exact(cfg, t + dt, x + dx, y + dy);
        let step = dx.abs() + dy.abs() + dt;
        prop_assert!((a.0 - b.0).abs() <= (2.0 + g) * step + 1e-12);
        prop_assert!((a.1 - b.1).abs() <= 2.0 * step + 1e-12);
    }

    #[test]
    fn smooth_gradients_lie_in_the_exact_subdifferential(g in 0.1..=2.0f64, t in 0.0..0.95f64, x in -1.0..1.0f64, y in -1.0..1.0f64) {
        let cfg = OracleConfig::new(g).unwrap();
        let f = ExampleField::Family1(cfg);
        if let Some((a, s)) = f.gradient(t, &[x, y]) {
            let pieces = oracle::subdifferential_exact(cfg, t, x, y, 0.0);
            prop_assert!(oracle::dist_to_pieces(&pieces, [a, s[0], s[1]]) < 1e-9);
        }
    }

    #[test]
    fn tie_direction_is_an_admissible_velocity(g in 0.0..=2.0f64, t in unit(), x in coord(), y in coord()) {
        let d = oracle::tie_direction_exact(OracleConfig::new(g).unwrap(), t, x, y);
        prop_assert!(d[1] == 1.0 && d[0] <= 1.0 + 1e-12 && d[0] >= 1.0 - g - 1e-12);
    }

    #[test]
    fn partitions_are_finer_than_requested(t0 in 0.0..0.9f64, eps in 0.001..0.5f64, jitter in 0.0..0.99f64, seed in any::<u64>()) {
        let p = Partition::jittered(t0, 1.0, eps, jitter, seed).unwrap();
        let s = p.instants();
        prop_assert_eq!(s[0], t0);
        prop_assert_eq!(*s.last().unwrap(), 1.0);
        prop_assert!(s.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(p.fineness() < eps);
    }

    #[test]
    fn weak_duality_holds_on_sampled_costates(t in unit(), x in coord(), y in coord(), sx in -2.0..2.0f64, sy in -2.0..2.0f64) {
        for spec in [example(), affine()] {
            let (upper, lower) = spec.upper_lower(t, &[x, y], &[sx, sy]);
            prop_assert!(upper >= lower - 1e-12);
        }
        // Separated dynamics satisfy the saddle-point condition exactly.
        let (upper, lower) = example().upper_lower(t, &[x, y], &[sx, sy]);
        prop_assert!((upper - lower).abs() < 1e-12);
    }

    #[test]
    fn raw_velocities_ignore_sample_order(t in unit(), x in coord(), y in coord(), rot in 0usize..3) {
        let base = affine();
        let mut p = base.p.clone();
        p.rotate_left(rot);
        let spun = GameSpec::new(base.dynamics.clone(), 0.0, 1.0, p, base.q.clone(), base.payoff1.clone(), base.payoff2.clone()).unwrap();
        let sorted = |s: &GameSpec| {
            let mut v: Vec<Vec<u64>> = s.raw_velocities(t, &[x, y]).unwrap().chunks(2).map(|c| c.iter().map(|a| a.to_bits()).collect()).collect();
            v.sort();
            v
        };
        prop_assert_eq!(sorted(&base), sorted(&spun));
    }

    #[test]
    fn hull_samples_are_convex_combinations(t in unit(), x in coord(), y in coord(), seed in any::<u64>()) {
        let spec = affine();
        let w = HullWeights::generate(spec.n_pairs(), 10, seed);
        let vs = spec.velocity_set(t, &[x, y], &w).unwrap();
        let raw: Vec<&[f64]> = vs.raw().collect();
        let (lo0, hi0) = raw.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, r| (a.0.min(r[0]), a.1.max(r[0])));
        let (lo1, hi1) = raw.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, r| (a.0.min(r[1]), a.1.max(r[1])));
        for h in vs.iter() {
            prop_assert!(h[0] >= lo0 - 1e-12 && h[0] <= hi0 + 1e-12 && h[1] >= lo1 - 1e-12 && h[1] <= hi1 + 1e-12);
        }
    }

    #[test]
    fn cloud_distances_are_consistent(j in prop::array::uniform2(-2.0..2.0f64), pts in prop::collection::vec(prop::array::uniform2(-2.0..2.0f64), 1..8), r in 0.0..0.5f64) {
        let d = dist_l1_points(j, &pts).unwrap();
        prop_assert!(box_dist(j, &pts, r) <= d + 1e-12);
        prop_assert!(box_dist(j, &pts, 0.0) == d);
        prop_assert!(pts.iter().any(|p| (l1(j, *p) - d).abs() < 1e-12));
        let h = hausdorff_l1(&pts, &[j]).unwrap();
        prop_assert_eq!(h, hausdorff_l1(&[j], &pts).unwrap());
        prop_assert!(h >= d);
    }

    #[test]
    fn constant_play_moves_at_constant_velocity(x in coord(), y in coord(), i in 0usize..3, j in 0usize..3, eps in 0.01..0.3f64, seed in any::<u64>()) {
        let spec = example();
        let traj = simulate(&spec, 0.0, &[x, y], &FeedbackStrategy::Constant(i), eps, &FeedbackStrategy::Constant(j), eps / 2.0, seed, &SimOptions { jitter: 0.5 }).unwrap();
        let end = traj.endpoint();
        prop_assert!((end[0] - (x + spec.p[i][0])).abs() < 1e-9);
        prop_assert!((end[1] - (y + spec.q[j][0])).abs() < 1e-9);
    }
}
