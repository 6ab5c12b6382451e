use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use dgnash::config::{PairSource, RunConfig};
use dgnash::game::{Dynamics, GameSpec, Player};
use dgnash::grid::Grid;
use dgnash::nash::{build_nash_map, verify_map, NashMap};
use dgnash::oracle::{self, OracleConfig};
use dgnash::sim::{deviation_catalog, deviation_experiment, make_punishment_profile, simulate, SimOptions};
use dgnash::smooth::{check_control_selection, check_pair_conditions, sample_points, CandidatePair};
use dgnash::value::{solve_cooperative_max, solve_lower_value, ValueField};

/// Nonzero-sum differential games on a grid: lower values, Nash payoff maps,
/// weak-invariance verification and punishment-strategy simulation.
#[derive(Parser)]
#[command(name = "dgnash", version, about)]
#[clap(allow_negative_numbers = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the lower values and cooperative maxima of both players.
    Solve(Common),
    /// Build the Nash payoff map.
    Nash(Common),
    /// Verify a stored payoff map.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Map file written by `nash` or `oracle`.
        #[arg(long)]
        map: PathBuf,
    },
    /// Check a candidate payoff pair for the upper-solution conditions.
    CheckPair {
        #[command(flatten)]
        common: Common,
        /// minimax | family | lower (overrides [check_pair] pair).
        #[arg(long)]
        pair: Option<String>,
        /// Family spread in [0, 2].
        #[arg(long)]
        spread: Option<f64>,
    },
    /// Build a punishment profile and run the deviation experiment.
    Simulate(Common),
    /// Dump the closed-form fields and payoff map of the example game.
    Oracle(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides [output] dir; default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol_val: Option<f64>,
    #[arg(long)]
    tol_set: Option<f64>,
    #[arg(long)]
    tol_dd: Option<f64>,
    #[arg(long)]
    tol_visc: Option<f64>,
    #[arg(long)]
    tol_nash: Option<f64>,
    #[arg(long)]
    tol_inv: Option<f64>,
    /// Number of time steps.
    #[arg(long)]
    grid_k: Option<usize>,
    /// Nodes per spatial dimension.
    #[arg(long)]
    grid_res: Option<usize>,
}

struct Run {
    cfg: RunConfig,
    grid: Grid,
    out: PathBuf,
}

impl Common {
    fn load(&self) -> Result<Run> {
        let mut cfg = RunConfig::from_path(&self.config).with_context(|| format!("reading config {}", self.config.display()))?;
        if let Some(s) = self.seed {
            cfg.set_seed(s);
        }
        let tols = [
            ("tol_val", self.tol_val),
            ("tol_set", self.tol_set),
            ("tol_dd", self.tol_dd),
            ("tol_visc", self.tol_visc),
            ("tol_nash", self.tol_nash),
            ("tol_inv", self.tol_inv),
        ];
        for (name, v) in tols {
            if let Some(v) = v {
                cfg.set_tolerance(name, v)?;
            }
        }
        if let Some(k) = self.grid_k {
            cfg.grid.time_steps = k;
        }
        if let Some(r) = self.grid_res {
            cfg.grid.nodes = vec![r; cfg.grid.nodes.len()];
        }
        let grid = cfg.build_grid()?;
        let out = self.out.clone().or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
        fs::create_dir_all(&out).with_context(|| format!("creating output directory {}", out.display()))?;
        Ok(Run { cfg, grid, out })
    }
}

/// Process outcome: PASS-type reports map to exit 0, FAIL to 2.
enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    fn of(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

fn is_example(spec: &GameSpec) -> bool {
    matches!(spec.dynamics, Dynamics::Example)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    let mut w = create(dir, name)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn write_field(dir: &Path, f: &ValueField) -> Result<()> {
    let mut w = create(dir, &format!("{}.csv", f.label().as_str()))?;
    f.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Distance from the box edge beyond which clamped boundary data cannot
/// reach: max speed * horizon + 0.1.
fn interior_margin(spec: &GameSpec, grid: &Grid) -> Result<f64> {
    let speed = spec
        .speed_bounds(&[spec.t0, spec.theta0], &grid.probe_states())
        .into_iter()
        .fold(0.0f64, f64::max);
    let margin = speed * (spec.theta0 - spec.t0) + 0.1;
    if grid.lo().iter().zip(grid.hi()).any(|(a, b)| b - a <= 2.0 * margin) {
        bail!("the grid box is too small for an interior region (margin {margin})");
    }
    Ok(margin)
}

fn interior_filter(spec: &GameSpec, grid: &Grid) -> Result<impl Fn(&[f64]) -> bool> {
    let margin = interior_margin(spec, grid)?;
    let (lo, hi) = (grid.lo().to_vec(), grid.hi().to_vec());
    Ok(move |p: &[f64]| p.iter().enumerate().all(|(d, c)| *c >= lo[d] + margin - 1e-12 && *c <= hi[d] - margin + 1e-12))
}

fn solve_lowers(run: &Run) -> Result<(ValueField, ValueField)> {
    let spec = &run.cfg.game;
    Ok((
        solve_lower_value(spec, &run.grid, Player::First, &run.cfg.solver)?,
        solve_lower_value(spec, &run.grid, Player::Second, &run.cfg.solver)?,
    ))
}

fn cmd_solve(c: &Common) -> Result<Verdict> {
    let run = c.load()?;
    let spec = &run.cfg.game;
    let start = Instant::now();
    let (w1, w2) = solve_lowers(&run)?;
    let c1 = solve_cooperative_max(spec, &run.grid, Player::First, &run.cfg.solver)?;
    let c2 = solve_cooperative_max(spec, &run.grid, Player::Second, &run.cfg.solver)?;
    let secs = start.elapsed().as_secs_f64();
    let mut summary = format!("solved 4 fields on {} slices x {} nodes\n", run.grid.n_slices(), run.grid.n_nodes());
    for f in [&w1, &w2, &c1, &c2] {
        write_field(&run.out, f)?;
        for w in f.warnings() {
            summary.push_str(&format!("warning ({}): {w}\n", f.label().as_str()));
        }
    }
    if is_example(spec) && run.grid.dim() == 2 {
        let inside = interior_filter(spec, &run.grid)?;
        let exact: [(&ValueField, fn(f64, f64, f64) -> f64); 4] = [
            (&w1, oracle::lower1_exact),
            (&w2, oracle::lower2_exact),
            (&c1, |t, x, y| oracle::coop_max_exact(Player::First, t, x, y)),
            (&c2, |t, x, y| oracle::coop_max_exact(Player::Second, t, x, y)),
        ];
        for (f, g) in exact {
            let e = f.max_abs_diff(|t, p| g(t, p[0], p[1]), &inside);
            summary.push_str(&format!("max interior error {}: {e}\n", f.label().as_str()));
        }
    }
    write_text(&run.out, "solve_summary.txt", &summary)?;
    print!("{summary}");
    println!("time {secs:.1}s");
    Ok(Verdict::Pass)
}

fn build(run: &Run, w1: &ValueField, w2: &ValueField) -> Result<(NashMap, String)> {
    let (map, report) = build_nash_map(&run.cfg.game, &run.grid, w1, w2, &run.cfg.nash)?;
    Ok((map, report.summary()))
}

fn cmd_nash(c: &Common) -> Result<Verdict> {
    let run = c.load()?;
    let spec = &run.cfg.game;
    let start = Instant::now();
    let (w1, w2) = solve_lowers(&run)?;
    let (map, mut summary) = build(&run, &w1, &w2)?;
    let secs = start.elapsed().as_secs_f64();
    let mut w = create(&run.out, "nash_map.txt")?;
    map.write_text(&mut w)?;
    w.flush()?;

    let tol_val = run.cfg.nash.tol_val.unwrap_or_else(|| dgnash::nash::default_tol_val(&run.grid));
    let inv = map.check_invariants(spec, Some((&w1, &w2)), tol_val);
    summary.push_str(&format!("lower-bound violations {}\nterminal violations {}\n", inv.lower_violations, inv.terminal_violations));
    let inside = interior_filter(spec, &run.grid).ok();
    let g = &run.grid;
    let mut empty = 0;
    let mut worst = 0.0f64;
    for k in 0..g.n_slices() {
        for node in 0..g.n_nodes() {
            let p = g.node_coords(node);
            if inside.as_ref().is_some_and(|f| !f(&p)) {
                continue;
            }
            let cloud = map.cloud(k, node);
            if cloud.is_empty() {
                empty += 1;
            } else if is_example(spec) && g.dim() == 2 {
                worst = worst.max(oracle::nash_set_exact(g.time(k), p[0], p[1]).hausdorff_l1(cloud)?);
            }
        }
    }
    summary.push_str(&format!("empty interior nodes {empty}\n"));
    let mut ok = inv.ok() && empty == 0;
    if is_example(spec) && g.dim() == 2 {
        let close = worst <= run.cfg.tol_set;
        summary.push_str(&format!("max interior hausdorff to the exact set {worst} (tol_set {})\n", run.cfg.tol_set));
        ok &= close;
    }
    summary.push_str(&format!("verdict: {}\n", if ok { "PASS" } else { "FAIL" }));
    write_text(&run.out, "nash_report.txt", &summary)?;
    print!("{summary}");
    println!("time {secs:.1}s");
    Ok(Verdict::of(ok))
}

fn cmd_verify(c: &Common, map_path: &Path) -> Result<Verdict> {
    let run = c.load()?;
    let spec = &run.cfg.game;
    let file = File::open(map_path).with_context(|| format!("opening map {}", map_path.display()))?;
    let map = NashMap::read_text(BufReader::new(file)).with_context(|| format!("reading map {}", map_path.display()))?;
    if map.grid().dim() != spec.state_dim {
        bail!("map dimension {} does not match the game ({})", map.grid().dim(), spec.state_dim);
    }
    let start = Instant::now();
    let w1 = solve_lower_value(spec, map.grid(), Player::First, &run.cfg.solver)?;
    let w2 = solve_lower_value(spec, map.grid(), Player::Second, &run.cfg.solver)?;
    let stride = run.cfg.solver.stride.resolve(map.grid(), spec);
    let opts = run.cfg.verify.clone().with_step(stride);
    let report = verify_map(&map, spec, Some((&w1, &w2)), &opts)?;
    let secs = start.elapsed().as_secs_f64();
    let summary = report.summary();
    write_text(&run.out, "verify_report.txt", &summary)?;
    let mut w = create(&run.out, "verify_residuals.csv")?;
    report.write_csv(&map, &mut w)?;
    w.flush()?;
    print!("{summary}");
    println!("time {secs:.1}s");
    Ok(Verdict::of(report.pass()))
}

fn cmd_check_pair(c: &Common, pair: Option<&str>, spread: Option<f64>) -> Result<Verdict> {
    let run = c.load()?;
    let spec = &run.cfg.game;
    let source = match (pair, spread) {
        (None, None) => run.cfg.check_pair.pair,
        (Some("minimax"), _) => PairSource::Minimax,
        (Some("lower"), _) => PairSource::Lower,
        (Some("family"), s) | (None, s @ Some(_)) => {
            let s = s.or(match run.cfg.check_pair.pair {
                PairSource::Family(g) => Some(g),
                _ => None,
            });
            PairSource::Family(s.unwrap_or(1.0))
        }
        (Some(other), _) => bail!("unknown pair `{other}` (minimax | family | lower)"),
    };
    let analytic = !matches!(source, PairSource::Lower);
    if analytic && !(is_example(spec) && spec.state_dim == 2) {
        bail!("closed-form pairs exist only for the example game");
    }
    let pair: CandidatePair = match source {
        PairSource::Minimax => oracle::minimax_pair(),
        PairSource::Family(g) => oracle::family_pair(OracleConfig::new(g)?),
        PairSource::Lower => {
            let (w1, w2) = solve_lowers(&run)?;
            CandidatePair::from_fields(w1, w2)
        }
    };
    let mut opts = run.cfg.smooth.clone();
    if !analytic {
        // Grid fields match the payoffs only at nodes.
        opts.tol_val = run.cfg.nash.tol_val.unwrap_or_else(|| dgnash::nash::default_tol_val(&run.grid));
    }
    let opts = &opts;
    let reach = opts.delta_schedule.iter().fold(0.0f64, |a, b| a.max(*b));
    let t_hi = spec.theta0 - reach;
    let n = run.cfg.check_pair.samples;
    let margin = interior_margin(spec, &run.grid)?;
    let lo: Vec<f64> = run.grid.lo().iter().map(|a| a + margin).collect();
    let hi: Vec<f64> = run.grid.hi().iter().map(|a| a - margin).collect();
    let kink_share = if analytic { n * 2 / 5 } else { 0 };
    let mut points = sample_points(spec.t0, t_hi, &lo, &hi, n - kink_share, run.cfg.sample_seed);
    let spread_for_kinks = match source {
        PairSource::Family(g) => g,
        _ => 2.0,
    };
    if kink_share > 0 {
        points.extend(oracle::kink_plane_points(OracleConfig::new(spread_for_kinks)?, kink_share, t_hi, run.cfg.sample_seed + 1));
    }
    let start = Instant::now();
    let report = check_pair_conditions(&pair, spec, &points, opts)?;
    let mut summary = report.summary();
    let mut ok = report.pass();
    let mut w = create(&run.out, "pair_residuals.csv")?;
    report.write_csv(&mut w)?;
    w.flush()?;
    // Control selection applies to smooth candidates only.
    if matches!(source, PairSource::Minimax) {
        let sel = check_control_selection(&pair, spec, &points, opts)?;
        summary.push('\n');
        summary.push_str(&sel.summary());
        ok &= sel.pass();
        let mut w = create(&run.out, "pair_selection.csv")?;
        sel.write_csv(spec, &mut w)?;
        w.flush()?;
    }
    write_text(&run.out, "pair_report.txt", &summary)?;
    print!("{summary}");
    println!("time {:.1}s", start.elapsed().as_secs_f64());
    Ok(Verdict::of(ok))
}

fn cmd_simulate(c: &Common) -> Result<Verdict> {
    let run = c.load()?;
    let spec = &run.cfg.game;
    let g = &run.grid;
    let start = Instant::now();
    let (w1, w2) = solve_lowers(&run)?;
    let (map, _) = build(&run, &w1, &w2)?;
    let c1 = Arc::new(solve_cooperative_max(spec, g, Player::First, &run.cfg.solver)?);
    let c2 = Arc::new(solve_cooperative_max(spec, g, Player::Second, &run.cfg.solver)?);
    let (w1, w2) = (Arc::new(w1), Arc::new(w2));

    let sim = &run.cfg.simulate;
    let k = g.nearest_slice(sim.t_start);
    let t_start = g.time(k);
    let mut summary = String::new();
    if (t_start - sim.t_start).abs() > 1e-12 {
        summary.push_str(&format!("start time {} moved to the grid slice {t_start}\n", sim.t_start));
    }
    let target = match sim.target {
        Some(t) => t,
        None => *map
            .cloud(k, g.nearest_node(&sim.x_start))
            .first()
            .context("the payoff map is empty at the start position")?,
    };
    let profile = make_punishment_profile(spec, &map, w1.clone(), w2.clone(), t_start, &sim.x_start, target, &run.cfg.profile)?;
    summary.push_str(&format!(
        "target ({}, {}) agreed payoffs ({}, {}) eta {:?}\n",
        target[0], target[1], profile.agreed.payoffs[0], profile.agreed.payoffs[1], profile.eta
    ));
    let mut w = create(&run.out, "agreed.csv")?;
    profile.agreed.write_csv(spec, &mut w)?;
    w.flush()?;
    let exp = &run.cfg.experiment;
    let finest = exp.eps_schedule.iter().fold(f64::INFINITY, |a, b| a.min(*b));
    let played = simulate(spec, t_start, &sim.x_start, &profile.u, finest, &profile.v, finest, exp.seed, &SimOptions::default())?;
    let mut w = create(&run.out, "profile_run.csv")?;
    played.write_csv(spec, &mut w)?;
    w.flush()?;

    let deviants = match sim.deviant {
        Some(p) => vec![p],
        None => vec![Player::First, Player::Second],
    };
    let mut ok = true;
    for who in deviants {
        let (coop, lower) = match who {
            Player::First => (&c1, &w1),
            Player::Second => (&c2, &w2),
        };
        let catalog = deviation_catalog(spec, &profile, who, Some(coop.clone()), Some(lower.clone()));
        let report = deviation_experiment(spec, &profile, who, &catalog, exp)?;
        ok &= report.pass();
        summary.push_str(&report.summary());
        let mut w = create(&run.out, &format!("deviations_player{}.csv", who.index()))?;
        report.write_csv(&mut w)?;
        w.flush()?;
    }
    summary.push_str(&format!("verdict: {}\n", if ok { "PASS" } else { "FAIL" }));
    write_text(&run.out, "simulate_report.txt", &summary)?;
    print!("{summary}");
    println!("time {:.1}s", start.elapsed().as_secs_f64());
    Ok(Verdict::of(ok))
}

fn cmd_oracle(c: &Common) -> Result<Verdict> {
    let run = c.load()?;
    if !(is_example(&run.cfg.game) && run.grid.dim() == 2) {
        bail!("closed forms exist only for the example game");
    }
    let quantum = run.cfg.nash.resolved_quantum(&run.grid);
    let map = oracle::example_oracle_map(&run.grid, quantum)?;
    let mut w = create(&run.out, "oracle_map.txt")?;
    map.write_text(&mut w)?;
    w.flush()?;
    for f in oracle::example_fields(&run.grid) {
        let mut w = create(&run.out, &format!("oracle_{}.csv", f.label().as_str()))?;
        f.write_csv(&mut w)?;
        w.flush()?;
    }
    println!("wrote oracle map ({} points, quantum {quantum}) and 4 fields to {}", map.total_points(), run.out.display());
    Ok(Verdict::Pass)
}

fn run(cli: Cli) -> Result<Verdict> {
    match cli.command {
        Command::Solve(c) => cmd_solve(&c),
        Command::Nash(c) => cmd_nash(&c),
        Command::Verify { common, map } => cmd_verify(&common, &map),
        Command::CheckPair { common, pair, spread } => cmd_check_pair(&common, pair.as_deref(), spread),
        Command::Simulate(c) => cmd_simulate(&c),
        Command::Oracle(c) => cmd_oracle(&c),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::Fail) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
