//! Acceptance criteria at their stated tolerances. Each test prints one
//! `ACn ... PASS|FAIL` line before asserting.

use std::sync::{Arc, OnceLock};
use std::time::Instant;

use dgnash::game::{GameSpec, Player};
use dgnash::grid::Grid;
use dgnash::nash::{build_nash_map, verify_map, BuildReport, NashBuildOptions, NashMap, VerifyOptions};
use dgnash::oracle::{self, OracleConfig, SubdiffPiece};
use dgnash::smooth::{check_pair_conditions, check_control_selection, clarke_samples, sample_points, Selection, SmoothOptions};
use dgnash::value::{solve_cooperative_max, solve_lower_value, SolverOptions, ValueField};

fn example() -> GameSpec {
    GameSpec::example(vec![-1.0, 0.0, 1.0])
}

/// Written to the stderr handle directly so the line survives output capture.
fn verdict(name: &str, ok: bool, detail: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stderr(), "{name} {} {detail}", if ok { "PASS" } else { "FAIL" });
}

fn interior(p: &[f64]) -> bool {
    p.iter().all(|c| c.abs() <= 0.9 + 1e-12)
}

struct Solved {
    grid: Grid,
    lower1: Arc<ValueField>,
    lower2: Arc<ValueField>,
    coop1: ValueField,
    coop2: ValueField,
    secs: f64,
}

fn solved() -> &'static Solved {
    static CELL: OnceLock<Solved> = OnceLock::new();
    CELL.get_or_init(|| {
        let spec = example();
        let grid = Grid::for_game(&spec, 100, vec![-2.0, -2.0], vec![2.0, 2.0], vec![201, 201]).unwrap();
        let opts = SolverOptions::default();
        let start = Instant::now();
        let lower1 = solve_lower_value(&spec, &grid, Player::First, &opts).unwrap();
        let lower2 = solve_lower_value(&spec, &grid, Player::Second, &opts).unwrap();
        let coop1 = solve_cooperative_max(&spec, &grid, Player::First, &opts).unwrap();
        let coop2 = solve_cooperative_max(&spec, &grid, Player::Second, &opts).unwrap();
        Solved {
            grid,
            lower1: Arc::new(lower1),
            lower2: Arc::new(lower2),
            coop1,
            coop2,
            secs: start.elapsed().as_secs_f64(),
        }
    })
}

fn built() -> &'static (NashMap, BuildReport, f64) {
    static CELL: OnceLock<(NashMap, BuildReport, f64)> = OnceLock::new();
    CELL.get_or_init(|| {
        let s = solved();
        let start = Instant::now();
        let (map, report) = build_nash_map(&example(), &s.grid, &s.lower1, &s.lower2, &NashBuildOptions::default()).unwrap();
        (map, report, start.elapsed().as_secs_f64())
    })
}

#[test]
fn ac1_value_field_accuracy() {
    let s = solved();
    let errs = [
        ("lower1", s.lower1.max_abs_diff(|t, p| oracle::lower1_exact(t, p[0], p[1]), interior)),
        ("lower2", s.lower2.max_abs_diff(|t, p| oracle::lower2_exact(t, p[0], p[1]), interior)),
        ("coop1", s.coop1.max_abs_diff(|t, p| oracle::coop_max_exact(Player::First, t, p[0], p[1]), interior)),
        ("coop2", s.coop2.max_abs_diff(|t, p| oracle::coop_max_exact(Player::Second, t, p[0], p[1]), interior)),
    ];
    let ok = errs.iter().all(|e| e.1 <= 0.05) && s.secs <= 120.0;
    let detail: Vec<String> = errs.iter().map(|(n, e)| format!("{n}={e:.4}")).collect();
    verdict("AC1 value-field accuracy", ok, &format!("{} tol=0.05 solve={:.1}s", detail.join(" "), s.secs));
    assert!(ok);
}

#[test]
fn ac2_nash_set_reconstruction() {
    let s = solved();
    let (map, report, secs) = built();
    let g = &s.grid;
    let q = map.quantum();
    let tol_set = 0.1;
    let mut worst_h = 0.0f64;
    let mut worst_at = (0, 0);
    let mut worst_diam = 0.0f64;
    let mut empty = 0;
    for k in 0..g.n_slices() {
        let t = g.time(k);
        for node in 0..g.n_nodes() {
            let p = g.node_coords(node);
            if !interior(&p) {
                continue;
            }
            let cloud = map.cloud(k, node);
            if cloud.is_empty() {
                empty += 1;
                continue;
            }
            let h = oracle::nash_set_exact(t, p[0], p[1]).hausdorff_l1(cloud).unwrap();
            if h > worst_h {
                worst_h = h;
                worst_at = (k, node);
            }
            if p[1] >= p[0] + 0.1 {
                worst_diam = worst_diam.max(map.payoff_cloud(k, node).diameter_l1());
            }
        }
    }
    let ok = empty == 0 && worst_h <= tol_set && worst_diam <= 2.0 * q + tol_set;
    verdict(
        "AC2 nash-set reconstruction",
        ok,
        &format!(
            "hausdorff={worst_h:.4} at slice {} node {:?} (tol 0.1) singleton diam={worst_diam:.4} (tol {:.4}) empty={empty} build={secs:.1}s points={}",
            worst_at.0,
            g.node_coords(worst_at.1),
            2.0 * q + tol_set,
            report.total_points
        ),
    );
    assert!(ok);
}

#[test]
fn ac3_verifier_soundness_and_sensitivity() {
    let spec = example();
    let grid = Grid::for_game(&spec, 50, vec![-2.0, -2.0], vec![2.0, 2.0], vec![101, 101]).unwrap();
    let q = 0.5 * dgnash::nash::default_tol_val(&grid);
    let start = Instant::now();
    let exact = oracle::example_oracle_map(&grid, q).unwrap();
    let [w1, w2, _, _] = oracle::example_fields(&grid);
    let stride = grid.auto_stride(&spec);
    let opts = VerifyOptions::default().with_step(stride);
    let clean = verify_map(&exact, &spec, Some((&w1, &w2)), &opts).unwrap();
    let clean_secs = start.elapsed().as_secs_f64();

    let k = grid.time_steps() / 2;
    let node = grid.node_index(&[50, 50]);
    let mut bad = exact.clone();
    let mut pts = bad.cloud(k, node).to_vec();
    pts[0][0] += 0.5;
    bad.set_cloud(k, node, pts);
    let start = Instant::now();
    let perturbed = verify_map(&bad, &spec, Some((&w1, &w2)), &opts).unwrap();
    let bad_secs = start.elapsed().as_secs_f64();
    let worst_ok = perturbed.worst.as_ref().map_or(false, |w| w.k == k && w.node == node);
    let ok = clean.pass() && !perturbed.pass() && worst_ok && clean_secs <= 300.0 && bad_secs <= 300.0;
    verdict(
        "AC3 verifier soundness/sensitivity",
        ok,
        &format!(
            "exact residual={:.4} perturbed residual={:.4} tol_dd={} worst_at_perturbation={worst_ok} times={clean_secs:.1}s/{bad_secs:.1}s",
            clean.max_residual, perturbed.max_residual, clean.tol_dd
        ),
    );
    assert!(ok);
}

#[test]
fn ac4_candidate_pair_checks() {
    let spec = example();
    let opts = SmoothOptions::default();
    let t_hi = 1.0 - 0.04;
    let mut ok = true;
    let mut detail = Vec::new();
    let cases = [
        ("minimax", oracle::minimax_pair(), OracleConfig::new(2.0).unwrap()),
        ("spread0", oracle::family_pair(OracleConfig::new(0.0).unwrap()), OracleConfig::new(0.0).unwrap()),
        ("spread1", oracle::family_pair(OracleConfig::new(1.0).unwrap()), OracleConfig::new(1.0).unwrap()),
        ("spread2", oracle::family_pair(OracleConfig::new(2.0).unwrap()), OracleConfig::new(2.0).unwrap()),
    ];
    for (name, pair, cfg) in &cases {
        let mut pts = sample_points(0.0, t_hi, &[-1.0, -1.0], &[1.0, 1.0], 600, 11);
        pts.extend(oracle::kink_plane_points(*cfg, 400, t_hi, 13));
        let r = check_pair_conditions(pair, &spec, &pts, &opts).unwrap();
        ok &= r.pass() && r.checked_points == 1000;
        detail.push(format!("{name}:{}(visc {:.1e}, dabs {:.3})", if r.pass() { "pass" } else { "fail" }, r.max_viscosity, r.max_dabs));
    }

    let minimax = oracle::minimax_pair();
    let mut pts = sample_points(0.0, t_hi, &[-1.0, -1.0], &[1.0, 1.0], 600, 17);
    let kinks = oracle::kink_plane_points(OracleConfig::new(2.0).unwrap(), 400, t_hi, 19);
    pts.extend(kinks.iter().cloned());
    let p2 = check_control_selection(&minimax, &spec, &pts, &opts).unwrap();
    let kinks_excluded = p2.points[600..].iter().all(|p| p.selection == Selection::Excluded);
    ok &= p2.pass() && kinks_excluded && p2.checked > 0;
    detail.push(format!("selection:{}(checked {}, excluded {})", if p2.pass() { "pass" } else { "fail" }, p2.checked, p2.excluded));

    let segment = [SubdiffPiece::Segment { from: [0.0, 0.0, 0.0], to: [0.0, 1.0, -1.0] }];
    let mut worst_seg = 0.0f64;
    for g in [1.0, 2.0] {
        let cfg = OracleConfig::new(g).unwrap();
        let f = oracle::ExampleField::Family1(cfg);
        for (t, x) in oracle::kink_plane_points(cfg, 200, t_hi, 23).iter().step_by(2) {
            for s in clarke_samples(&f, *t, x, 0.0, 1.0, &opts).unwrap() {
                worst_seg = worst_seg.max(oracle::dist_to_pieces(&segment, [s.a, s.s[0], s.s[1]]));
            }
        }
    }
    ok &= worst_seg <= 0.05;
    detail.push(format!("diag-subgradient-dist={worst_seg:.2e} (tol 0.05)"));
    verdict("AC4 candidate-pair checks", ok, &detail.join(" "));
    assert!(ok);
}

#[test]
fn ac5_punishment_profile_deviations() {
    use dgnash::sim::{deviation_catalog, deviation_experiment, make_punishment_profile, ExperimentOptions, ProfileOptions};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    let spec = example();
    let grid = Grid::for_game(&spec, 50, vec![-2.0, -2.0], vec![2.0, 2.0], vec![101, 101]).unwrap();
    let opts = SolverOptions::default();
    let lower1 = Arc::new(solve_lower_value(&spec, &grid, Player::First, &opts).unwrap());
    let lower2 = Arc::new(solve_lower_value(&spec, &grid, Player::Second, &opts).unwrap());
    let coop1 = Arc::new(solve_cooperative_max(&spec, &grid, Player::First, &opts).unwrap());
    let coop2 = Arc::new(solve_cooperative_max(&spec, &grid, Player::Second, &opts).unwrap());
    let (map, _) = build_nash_map(&spec, &grid, &lower1, &lower2, &NashBuildOptions::default()).unwrap();

    let exp = ExperimentOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let half = grid.time_steps() / 2;
    let mut worst = vec![f64::NEG_INFINITY; exp.eps_schedule.len()];
    let mut self_gain = 0.0f64;
    let mut failures = Vec::new();
    let mut runs = 0;
    for start in 0..20 {
        let k = rng.gen_range(0..=half);
        let x = [rng.gen_range(-0.8..=0.8), rng.gen_range(-0.8..=0.8)];
        let node = grid.nearest_node(&x);
        let cloud = map.cloud(k, node);
        let target = cloud[rng.gen_range(0..cloud.len())];
        let profile = match make_punishment_profile(&spec, &map, lower1.clone(), lower2.clone(), grid.time(k), &x, target, &ProfileOptions::default()) {
            Ok(p) => p,
            Err(e) => {
                failures.push(format!("start {start}: {e}"));
                continue;
            }
        };
        for (deviant, coop, lower) in [(Player::First, &coop1, &lower1), (Player::Second, &coop2, &lower2)] {
            let catalog = deviation_catalog(&spec, &profile, deviant, Some(coop.clone()), Some(lower.clone()));
            let r = deviation_experiment(&spec, &profile, deviant, &catalog, &exp).unwrap();
            runs += r.rows.len();
            self_gain = self_gain.max(r.self_gain);
            for (w, e) in worst.iter_mut().zip(&r.per_eps) {
                *w = w.max(e.max_gain);
            }
            if !r.pass() {
                failures.push(format!("start {start} deviant {deviant:?}: {}", r.summary().replace('\n', " | ")));
            }
        }
    }
    for f in &failures {
        println!("  {f}");
    }
    let ok = failures.is_empty() && self_gain == 0.0;
    let per: Vec<String> = exp
        .eps_schedule
        .iter()
        .zip(&worst)
        .map(|(e, w)| format!("eps={e}:{w:.4}(tol {:.3})", exp.tol_nash(*e)))
        .collect();
    verdict(
        "AC5 punishment-profile deviations",
        ok,
        &format!("starts=20 runs={runs} max_gain {} profile_gain={self_gain} failures={}", per.join(" "), failures.len()),
    );
    assert!(ok);
}

fn affine_games() -> Vec<(&'static str, GameSpec)> {
    use dgnash::game::{AffineDynamics, Dynamics, Payoff};
    let controls = vec![vec![-1.0], vec![0.0], vec![1.0]];
    let rotating = AffineDynamics::new(2, vec![0.0, 1.0, -0.5, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]).unwrap();
    let skewed = AffineDynamics::new(2, vec![-0.5, 0.2, 0.0, 0.3], vec![1.0, 0.0], vec![0.0, 1.0])
        .unwrap()
        .with_time_slope(vec![0.0, 0.0, 0.1, 0.0])
        .unwrap();
    vec![
        (
            "affine-rotating",
            GameSpec::new(
                Dynamics::Affine(rotating),
                0.0,
                1.0,
                controls.clone(),
                vec![vec![-0.5], vec![0.5]],
                Payoff::Linear { w: vec![1.0, 0.0], b: 0.0 },
                Payoff::NegDistance { center: vec![0.0, 0.0] },
            )
            .unwrap(),
        ),
        (
            "affine-skewed",
            GameSpec::new(
                Dynamics::Affine(skewed),
                0.0,
                1.0,
                controls.clone(),
                controls,
                Payoff::NegAbsDiff { i: 0, j: 1 },
                Payoff::Linear { w: vec![0.0, 1.0], b: 0.0 },
            )
            .unwrap(),
        ),
    ]
}

fn map_text(map: &NashMap) -> Vec<u8> {
    let mut buf = Vec::new();
    map.write_text(&mut buf).unwrap();
    buf
}

fn field_csv(f: &ValueField) -> Vec<u8> {
    let mut buf = Vec::new();
    f.write_csv(&mut buf).unwrap();
    buf
}

#[test]
fn ac6_property_suites() {
    use dgnash::sim::{simulate, FeedbackStrategy, SimOptions};

    let mut games = vec![("example", example())];
    games.extend(affine_games());
    let opts = SolverOptions::default();
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, spec) in &games {
        let grid = Grid::for_game(spec, 40, vec![-2.0, -2.0], vec![2.0, 2.0], vec![81, 81]).unwrap();
        let tol_val = dgnash::nash::default_tol_val(&grid);
        let solve = || {
            [Player::First, Player::Second].map(|p| {
                (
                    solve_lower_value(spec, &grid, p, &opts).unwrap(),
                    solve_cooperative_max(spec, &grid, p, &opts).unwrap(),
                )
            })
        };
        let [(w1, c1), (w2, c2)] = solve();

        // Lower values never exceed cooperative maxima.
        let mut dominance = 0.0f64;
        for (w, c) in [(&w1, &c1), (&w2, &c2)] {
            for (a, b) in w.values().iter().zip(c.values()) {
                dominance = dominance.max(a - b);
            }
        }
        let dom_ok = dominance <= tol_val;

        // Lower-bound and terminal conditions on every built map, and monotonicity in tol_inv.
        let build = |tol_inv: f64| {
            let o = NashBuildOptions { tol_inv, ..NashBuildOptions::default() };
            build_nash_map(spec, &grid, &w1, &w2, &o).unwrap().0
        };
        let loose = build(1.0);
        let tight = build(0.5);
        let mut inv_ok = true;
        for m in [&loose, &tight] {
            inv_ok &= m.check_invariants(spec, Some((&w1, &w2)), tol_val).ok();
        }
        let q = loose.quantum();
        let mut not_nested = 0usize;
        for k in 0..grid.n_slices() {
            for node in 0..grid.n_nodes() {
                let big = loose.cloud(k, node);
                for p in tight.cloud(k, node) {
                    if big.is_empty() || dgnash::nash::dist_l1_points(*p, big).unwrap() > q {
                        not_nested += 1;
                    }
                }
            }
        }
        let mono_ok = not_nested == 0 && tight.total_points() <= loose.total_points();

        // Byte-identical reruns of solve and build.
        let [(w1b, c1b), (w2b, c2b)] = solve();
        let rerun = build(1.0);
        let same = field_csv(&w1) == field_csv(&w1b) && field_csv(&w2) == field_csv(&w2b) && field_csv(&c1) == field_csv(&c1b) && field_csv(&c2) == field_csv(&c2b) && map_text(&loose) == map_text(&rerun);

        ok &= dom_ok && inv_ok && mono_ok && same;
        detail.push(format!(
            "{name}:[dominance {dominance:.1e}<= {tol_val:.2} {} bounds {} nested {}({not_nested} stray, {}<={} pts) rerun {}]",
            if dom_ok { "ok" } else { "FAIL" },
            if inv_ok { "ok" } else { "FAIL" },
            if mono_ok { "ok" } else { "FAIL" },
            tight.total_points(),
            loose.total_points(),
            if same { "identical" } else { "DIFFERENT" }
        ));
    }

    // Euler convergence under eps halving on an affine game with nonzero drift matrix.
    let spec = &affine_games()[1].1;
    let endpoint = |eps: f64| {
        let t = simulate(spec, 0.0, &[0.3, -0.2], &FeedbackStrategy::Constant(2), eps, &FeedbackStrategy::Constant(0), eps, 0, &SimOptions::default()).unwrap();
        t.endpoint().to_vec()
    };
    let reference = endpoint(0.005 / 256.0);
    let err = |eps: f64| {
        let e = endpoint(eps);
        e.iter().zip(&reference).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    };
    let errs = [err(0.02), err(0.01), err(0.005)];
    let ratios = [errs[0] / errs[1], errs[1] / errs[2]];
    let conv_ok = ratios.iter().all(|r| (1.5..=3.0).contains(r));
    ok &= conv_ok;
    detail.push(format!("euler ratios {:.3}/{:.3} in [1.5,3] {}", ratios[0], ratios[1], if conv_ok { "ok" } else { "FAIL" }));

    // Seeded simulation reruns are byte-identical.
    let sim = || {
        let mut buf = Vec::new();
        let t = simulate(spec, 0.0, &[0.3, -0.2], &FeedbackStrategy::Constant(1), 0.01, &FeedbackStrategy::Constant(2), 0.02, 9, &SimOptions { jitter: 0.5 }).unwrap();
        t.write_csv(spec, &mut buf).unwrap();
        buf
    };
    let sim_same = sim() == sim();
    ok &= sim_same;
    detail.push(format!("seeded simulation rerun {}", if sim_same { "identical" } else { "DIFFERENT" }));

    verdict("AC6 property suites", ok, &detail.join(" "));
    assert!(ok);
}
