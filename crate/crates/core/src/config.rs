//! Line-oriented run configuration: `[section]` headers, `key = value`
//! lines, `#` comments. Number lists are separated by whitespace or commas,
//! points within a list by `;`.
//!
//! ```text
//! [game]
//! dynamics = example          # example | affine | coupled
//! t0 = 0
//! theta0 = 1
//! payoff1 = neg_abs_diff 0 1   # neg_abs_diff i j | linear w.. b | neg_distance c..
//! payoff2 = linear 0 1 0
//!
//! [controls]
//! p = -1 0 1                  # or p_box = lo hi count; lo hi count (per component)
//! q = -1 0 1
//!
//! [grid]
//! time_steps = 100
//! lo = -2 -2
//! hi = 2 2
//! nodes = 201 201
//! ```
//!
//! Affine games take `n`, `a` (row-major n x n), `b` (n x u_dim), `c`
//! (n x v_dim) and optional `a1`, `drift`; coupled games take `gain`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::game::{AffineDynamics, Dynamics, GameSpec, Payoff, Player};
use crate::grid::{BoundaryPolicy, Grid, Stride};
use crate::nash::{NashBuildOptions, PayoffPair, VerifyOptions};
use crate::sim::{ExperimentOptions, ProfileOptions};
use crate::smooth::SmoothOptions;
use crate::value::SolverOptions;

const SECTIONS: &[(&str, &[&str])] = &[
    ("game", &["dynamics", "t0", "theta0", "n", "a", "a1", "b", "c", "drift", "gain", "payoff1", "payoff2"]),
    ("controls", &["p", "q", "p_box", "q_box"]),
    ("grid", &["time_steps", "lo", "hi", "nodes", "boundary", "stride"]),
    (
        "tolerances",
        &["tol_val", "tol_set", "tol_dd", "tol_dd_pair", "tol_visc", "tol_inv", "tol_nash_base", "tol_nash_slope", "isaacs"],
    ),
    ("nash", &["hull_density", "quantum", "lower_slack", "dilation"]),
    ("verify", &["delta_steps", "perturb_radius", "perturb_extra"]),
    ("check_pair", &["pair", "spread", "samples", "fd_step"]),
    ("simulate", &["t_start", "x_start", "target", "eps", "trials", "jitter", "eta", "deviant"]),
    ("seeds", &["hull", "sim", "sample"]),
    ("output", &["dir"]),
];

#[derive(Clone, Debug)]
struct Entry {
    value: String,
    line: usize,
}

/// Parsed `[section] key = value` text with line numbers kept.
#[derive(Clone, Debug, Default)]
pub struct ConfigText {
    sections: BTreeMap<String, (usize, BTreeMap<String, Entry>)>,
}

impl ConfigText {
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Self::default();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(name) = body.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Config { line, msg: format!("malformed section header `{body}`") })?
                    .trim()
                    .to_string();
                if !SECTIONS.iter().any(|s| s.0 == name) {
                    return Err(Error::Config { line, msg: format!("unknown section [{name}]") });
                }
                if out.sections.contains_key(&name) {
                    return Err(Error::Config { line, msg: format!("section [{name}] appears twice") });
                }
                out.sections.insert(name.clone(), (line, BTreeMap::new()));
                current = Some(name);
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| Error::Config { line, msg: format!("expected `key = value`, got `{body}`") })?;
            let (key, value) = (key.trim().to_string(), value.trim().to_string());
            let section = current
                .as_ref()
                .ok_or_else(|| Error::Config { line, msg: format!("key `{key}` before any section header") })?;
            let allowed = SECTIONS.iter().find(|s| s.0 == section).map(|s| s.1).unwrap_or(&[]);
            if !allowed.contains(&key.as_str()) {
                return Err(Error::Config { line, msg: format!("unknown key `{key}` in [{section}]") });
            }
            let keys = &mut out.sections.get_mut(section).expect("section registered").1;
            if keys.insert(key.clone(), Entry { value, line }).is_some() {
                return Err(Error::Config { line, msg: format!("key `{key}` repeated in [{section}]") });
            }
        }
        Ok(out)
    }

    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section).and_then(|s| s.1.get(key))
    }

    pub fn has(&self, section: &str, key: &str) -> bool {
        self.entry(section, key).is_some()
    }

    pub fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.entry(section, key).map(|e| e.value.as_str())
    }

    fn required(&self, section: &str, key: &str) -> Result<&Entry> {
        self.entry(section, key).ok_or_else(|| Error::MissingKey {
            section: section.into(),
            key: key.into(),
        })
    }

    pub fn get<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        self.entry(section, key).map(|e| parse_scalar(e, key)).transpose()
    }

    pub fn require<T: FromStr>(&self, section: &str, key: &str) -> Result<T> {
        parse_scalar(self.required(section, key)?, key)
    }

    pub fn list(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>> {
        self.entry(section, key).map(|e| parse_list(&e.value, e.line, key)).transpose()
    }

    pub fn require_list(&self, section: &str, key: &str) -> Result<Vec<f64>> {
        let e = self.required(section, key)?;
        parse_list(&e.value, e.line, key)
    }

    fn points(&self, section: &str, key: &str) -> Result<Option<Vec<Vec<f64>>>> {
        self.entry(section, key)
            .map(|e| {
                e.value
                    .split(';')
                    .map(|p| parse_list(p, e.line, key))
                    .filter(|p| !matches!(p, Ok(v) if v.is_empty()))
                    .collect()
            })
            .transpose()
    }

    fn line_of(&self, section: &str, key: &str) -> usize {
        self.entry(section, key).map_or(0, |e| e.line)
    }
}

fn parse_scalar<T: FromStr>(e: &Entry, key: &str) -> Result<T> {
    e.value.parse().map_err(|_| Error::Config {
        line: e.line,
        msg: format!("cannot parse `{}` for key `{key}`", e.value),
    })
}

fn parse_list(s: &str, line: usize, key: &str) -> Result<Vec<f64>> {
    s.split(|c: char| c.is_whitespace() || c == ',' || c == ';')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Config { line, msg: format!("`{t}` in key `{key}` is not a finite number") })
        })
        .collect()
}

/// Grid parameters kept separate from the game so overrides can apply first.
#[derive(Clone, Debug, PartialEq)]
pub struct GridParams {
    pub time_steps: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub nodes: Vec<usize>,
}

impl GridParams {
    pub fn build(&self, spec: &GameSpec) -> Result<Grid> {
        Grid::for_game(spec, self.time_steps, self.lo.clone(), self.hi.clone(), self.nodes.clone())
    }
}

/// Which candidate pair `check-pair` inspects.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PairSource {
    /// The upper-solution family of the example game with the given spread.
    Family(f64),
    /// The minimax pair of the example game.
    Minimax,
    /// The solved lower values.
    Lower,
}

#[derive(Clone, Debug)]
pub struct SimulateParams {
    pub t_start: f64,
    pub x_start: Vec<f64>,
    /// Default: the first point of the cloud at the start node.
    pub target: Option<PayoffPair>,
    /// None runs both players as deviants.
    pub deviant: Option<Player>,
}

#[derive(Clone, Debug)]
pub struct CheckPairParams {
    pub pair: PairSource,
    pub samples: usize,
}

/// Everything a pipeline run needs, with defaults filled in.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub game: GameSpec,
    pub grid: GridParams,
    pub solver: SolverOptions,
    pub nash: NashBuildOptions,
    pub verify: VerifyOptions,
    pub smooth: SmoothOptions,
    pub profile: ProfileOptions,
    pub experiment: ExperimentOptions,
    pub simulate: SimulateParams,
    pub check_pair: CheckPairParams,
    pub tol_set: f64,
    pub sample_seed: u64,
    pub out_dir: Option<PathBuf>,
}

fn positive(value: f64, line: usize, key: &str) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Config { line, msg: format!("`{key}` must be positive and finite, got {value}") })
    }
}

fn parse_payoff(c: &ConfigText, key: &str) -> Result<Payoff> {
    let e = c.required("game", key)?;
    let mut it = e.value.split_whitespace();
    let kind = it.next().unwrap_or("");
    let rest = parse_list(&it.collect::<Vec<_>>().join(" "), e.line, key)?;
    let bad = |msg: &str| Error::Config { line: e.line, msg: format!("{key}: {msg}") };
    match kind {
        "neg_abs_diff" => {
            if rest.len() != 2 || rest.iter().any(|v| v.fract() != 0.0 || *v < 0.0) {
                return Err(bad("neg_abs_diff takes two coordinate indices"));
            }
            Ok(Payoff::NegAbsDiff { i: rest[0] as usize, j: rest[1] as usize })
        }
        "linear" => {
            if rest.len() < 2 {
                return Err(bad("linear takes weights followed by an offset"));
            }
            let (w, b) = rest.split_at(rest.len() - 1);
            Ok(Payoff::Linear { w: w.to_vec(), b: b[0] })
        }
        "neg_distance" => {
            if rest.is_empty() {
                return Err(bad("neg_distance takes a center"));
            }
            Ok(Payoff::NegDistance { center: rest })
        }
        _ => Err(bad(&format!("unknown payoff `{kind}` (neg_abs_diff | linear | neg_distance)"))),
    }
}

/// Cartesian product of per-component uniform samples `lo hi count; ...`.
fn box_samples(c: &ConfigText, key: &str) -> Result<Option<Vec<Vec<f64>>>> {
    let Some(rows) = c.points("controls", key)? else { return Ok(None) };
    let line = c.line_of("controls", key);
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for r in rows {
        if r.len() != 3 || r[2] < 1.0 || r[2].fract() != 0.0 || r[0] > r[1] {
            return Err(Error::Config { line, msg: format!("{key}: each component needs `lo hi count` with lo <= hi, count >= 1") });
        }
        let n = r[2] as usize;
        let vals: Vec<f64> = (0..n)
            .map(|i| if n == 1 { 0.5 * (r[0] + r[1]) } else { r[0] + (r[1] - r[0]) * i as f64 / (n - 1) as f64 })
            .collect();
        out = out
            .into_iter()
            .flat_map(|p| vals.iter().map(move |v| p.iter().copied().chain([*v]).collect()))
            .collect();
    }
    Ok(Some(out))
}

fn controls(c: &ConfigText, key: &str, boxed: &str, example: bool) -> Result<Vec<Vec<f64>>> {
    if c.has("controls", key) && c.has("controls", boxed) {
        return Err(Error::Config {
            line: c.line_of("controls", boxed),
            msg: format!("give either `{key}` or `{boxed}`, not both"),
        });
    }
    if let Some(b) = box_samples(c, boxed)? {
        return Ok(b);
    }
    if let Some(v) = c.list("controls", key)? {
        // A flat list of numbers is a list of scalar samples.
        let raw = c.raw("controls", key).unwrap_or("");
        if !raw.contains(';') {
            return Ok(v.into_iter().map(|x| vec![x]).collect());
        }
    }
    match c.points("controls", key)? {
        Some(p) => Ok(p),
        None if example => Ok(vec![vec![-1.0], vec![0.0], vec![1.0]]),
        None => Err(Error::MissingKey { section: "controls".into(), key: key.into() }),
    }
}

fn parse_game(c: &ConfigText) -> Result<GameSpec> {
    let kind: String = c.require("game", "dynamics")?;
    let line = c.line_of("game", "dynamics");
    let example = kind == "example";
    let t0 = c.get("game", "t0")?.unwrap_or(0.0);
    let theta0 = c.get("game", "theta0")?.unwrap_or(1.0);
    let p = controls(c, "p", "p_box", example)?;
    let q = controls(c, "q", "q_box", example)?;
    let dynamics = match kind.as_str() {
        "example" => Dynamics::Example,
        "coupled" => Dynamics::Coupled {
            gain: c.get("game", "gain")?.unwrap_or(1.0),
        },
        "affine" => {
            let n: usize = c.require("game", "n")?;
            let mut a = AffineDynamics::new(n, c.require_list("game", "a")?, c.require_list("game", "b")?, c.require_list("game", "c")?)
                .map_err(|e| Error::Config { line: c.line_of("game", "a"), msg: e.to_string() })?;
            if let Some(a1) = c.list("game", "a1")? {
                a = a.with_time_slope(a1).map_err(|e| Error::Config { line: c.line_of("game", "a1"), msg: e.to_string() })?;
            }
            if let Some(d) = c.list("game", "drift")? {
                a = a.with_drift(d).map_err(|e| Error::Config { line: c.line_of("game", "drift"), msg: e.to_string() })?;
            }
            Dynamics::Affine(a)
        }
        other => {
            return Err(Error::Config {
                line,
                msg: format!("unknown dynamics `{other}` (example | affine | coupled)"),
            })
        }
    };
    let (s1, s2) = if example && !c.has("game", "payoff1") && !c.has("game", "payoff2") {
        (Payoff::NegAbsDiff { i: 0, j: 1 }, Payoff::Linear { w: vec![0.0, 1.0], b: 0.0 })
    } else {
        (parse_payoff(c, "payoff1")?, parse_payoff(c, "payoff2")?)
    };
    GameSpec::new(dynamics, t0, theta0, p, q, s1, s2).map_err(|e| Error::Config { line, msg: e.to_string() })
}

fn stride(c: &ConfigText) -> Result<Stride> {
    match c.raw("grid", "stride") {
        None | Some("auto") => Ok(Stride::Auto),
        Some(s) => match s.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(Stride::Fixed(k)),
            _ => Err(Error::Config { line: c.line_of("grid", "stride"), msg: format!("stride must be `auto` or a positive integer, got `{s}`") }),
        },
    }
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        let c = ConfigText::parse(text)?;
        let game = parse_game(&c)?;

        let grid = GridParams {
            time_steps: c.require("grid", "time_steps")?,
            lo: c.require_list("grid", "lo")?,
            hi: c.require_list("grid", "hi")?,
            nodes: c
                .require_list("grid", "nodes")?
                .into_iter()
                .map(|v| {
                    if v >= 2.0 && v.fract() == 0.0 {
                        Ok(v as usize)
                    } else {
                        Err(Error::Config { line: c.line_of("grid", "nodes"), msg: format!("node counts must be integers >= 2, got {v}") })
                    }
                })
                .collect::<Result<_>>()?,
        };
        let boundary: BoundaryPolicy = match c.raw("grid", "boundary") {
            None => BoundaryPolicy::Clamp,
            Some(s) => s.parse().map_err(|msg| Error::Config { line: c.line_of("grid", "boundary"), msg })?,
        };
        let stride = stride(&c)?;

        let tol = |key: &str| -> Result<Option<f64>> {
            c.get::<f64>("tolerances", key)?.map(|v| positive(v, c.line_of("tolerances", key), key)).transpose()
        };
        let seed = |key: &str, default: u64| -> Result<u64> { Ok(c.get("seeds", key)?.unwrap_or(default)) };
        let hull_seed = seed("hull", 7)?;

        let solver = SolverOptions {
            stride,
            boundary,
            isaacs_tol: tol("isaacs")?.unwrap_or(1e-9),
        };
        let tol_val = tol("tol_val")?;
        let nash = NashBuildOptions {
            hull_density: c.get("nash", "hull_density")?.unwrap_or(10),
            quantum: c.get::<f64>("nash", "quantum")?.map(|v| positive(v, c.line_of("nash", "quantum"), "quantum")).transpose()?,
            tol_val,
            tol_inv: tol("tol_inv")?.unwrap_or(1.0),
            seed: hull_seed,
            stride,
            boundary,
            lower_slack: c.get("nash", "lower_slack")?,
            dilation: c.get("nash", "dilation")?,
        };
        let mut verify = VerifyOptions {
            hull_density: nash.hull_density,
            seed: hull_seed,
            tol_val,
            ..VerifyOptions::default()
        };
        if let Some(d) = c.list("verify", "delta_steps")? {
            if d.is_empty() || d.iter().any(|v| *v < 1.0 || v.fract() != 0.0) {
                return Err(Error::Config { line: c.line_of("verify", "delta_steps"), msg: "delta_steps must be positive integers".into() });
            }
            verify.delta_steps = d.into_iter().map(|v| v as usize).collect();
        }
        if let Some(r) = c.get("verify", "perturb_radius")? {
            verify.perturb_radius = r;
        }
        if let Some(g) = c.get("verify", "perturb_extra")? {
            verify.perturb_extra = g;
        }
        if let Some(t) = tol("tol_dd")? {
            verify.tol_dd = t;
        }

        let mut smooth = SmoothOptions { seed: hull_seed, tol_visc: tol("tol_visc")?, ..SmoothOptions::default() };
        if let Some(t) = tol("tol_dd_pair")? {
            smooth.tol_dd = t;
        }
        if let Some(h) = c.get::<f64>("check_pair", "fd_step")? {
            smooth.fd_step = positive(h, c.line_of("check_pair", "fd_step"), "fd_step")?;
        }
        let pair = match c.raw("check_pair", "pair").unwrap_or("minimax") {
            "minimax" => PairSource::Minimax,
            "lower" => PairSource::Lower,
            "family" => {
                let g: f64 = c.get("check_pair", "spread")?.unwrap_or(1.0);
                if !(0.0..=2.0).contains(&g) {
                    return Err(Error::Config { line: c.line_of("check_pair", "spread"), msg: format!("spread must lie in [0, 2], got {g}") });
                }
                PairSource::Family(g)
            }
            other => return Err(Error::Config { line: c.line_of("check_pair", "pair"), msg: format!("unknown pair `{other}` (minimax | family | lower)") }),
        };
        let check_pair = CheckPairParams {
            pair,
            samples: c.get("check_pair", "samples")?.unwrap_or(1000),
        };

        let tol_set = tol("tol_set")?.unwrap_or(0.1);
        let profile = ProfileOptions {
            hull_density: nash.hull_density,
            seed: hull_seed,
            tol_set,
            eta: c.get::<f64>("simulate", "eta")?.map(|v| positive(v, c.line_of("simulate", "eta"), "eta")).transpose()?,
            stride,
        };
        let mut experiment = ExperimentOptions { seed: seed("sim", 1)?, ..ExperimentOptions::default() };
        if let Some(e) = c.list("simulate", "eps")? {
            if e.is_empty() || e.iter().any(|v| *v <= 0.0) {
                return Err(Error::Config { line: c.line_of("simulate", "eps"), msg: "eps values must be positive".into() });
            }
            experiment.eps_schedule = e;
        }
        if let Some(t) = c.get("simulate", "trials")? {
            experiment.trials = t;
        }
        if let Some(j) = c.get::<f64>("simulate", "jitter")? {
            if !(0.0..1.0).contains(&j) {
                return Err(Error::Config { line: c.line_of("simulate", "jitter"), msg: format!("jitter must lie in [0, 1), got {j}") });
            }
            experiment.jitter = j;
        }
        if let Some(b) = tol("tol_nash_base")? {
            experiment.tol_base = b;
        }
        if let Some(s) = c.get::<f64>("tolerances", "tol_nash_slope")? {
            experiment.tol_slope = s;
        }
        let x_start = c.list("simulate", "x_start")?.unwrap_or_else(|| vec![0.0; game.state_dim]);
        if x_start.len() != game.state_dim {
            return Err(Error::Config {
                line: c.line_of("simulate", "x_start"),
                msg: format!("x_start has {} components, the game has {}", x_start.len(), game.state_dim),
            });
        }
        let target = match c.list("simulate", "target")? {
            None => None,
            Some(v) if v.len() == 2 => Some([v[0], v[1]]),
            Some(_) => return Err(Error::Config { line: c.line_of("simulate", "target"), msg: "target needs two payoffs".into() }),
        };
        let deviant = match c.raw("simulate", "deviant").unwrap_or("both") {
            "both" => None,
            s => Some(
                s.parse::<usize>()
                    .map_err(|_| ())
                    .and_then(|i| Player::from_index(i).map_err(|_| ()))
                    .map_err(|_| Error::Config { line: c.line_of("simulate", "deviant"), msg: format!("deviant must be 1, 2 or both, got `{s}`") })?,
            ),
        };
        let simulate = SimulateParams {
            t_start: c.get("simulate", "t_start")?.unwrap_or(game.t0),
            x_start,
            target,
            deviant,
        };

        Ok(Self {
            game,
            grid,
            solver,
            nash,
            verify,
            smooth,
            profile,
            experiment,
            simulate,
            check_pair,
            tol_set,
            sample_seed: seed("sample", 11)?,
            out_dir: c.raw("output", "dir").map(PathBuf::from),
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn build_grid(&self) -> Result<Grid> {
        self.grid.build(&self.game)
    }

    /// Applies a named tolerance override; names match the `[tolerances]` keys.
    pub fn set_tolerance(&mut self, name: &str, value: f64) -> Result<()> {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::Precondition(format!("tolerance {name} must be positive, got {value}")));
        }
        match name {
            "tol_val" => {
                self.nash.tol_val = Some(value);
                self.verify.tol_val = Some(value);
            }
            "tol_set" => {
                self.tol_set = value;
                self.profile.tol_set = value;
            }
            "tol_dd" => self.verify.tol_dd = value,
            "tol_dd_pair" => self.smooth.tol_dd = value,
            "tol_visc" => self.smooth.tol_visc = Some(value),
            "tol_inv" => self.nash.tol_inv = value,
            "tol_nash" => self.experiment.tol_base = value,
            _ => return Err(Error::Precondition(format!("unknown tolerance `{name}`"))),
        }
        Ok(())
    }

    /// Reseeds every seeded component from one base seed.
    pub fn set_seed(&mut self, seed: u64) {
        self.nash.seed = seed;
        self.verify.seed = seed;
        self.smooth.seed = seed;
        self.profile.seed = seed;
        self.experiment.seed = seed;
        self.sample_seed = seed;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = "\
[game]
dynamics = example

[grid]
time_steps = 20
lo = -2 -2
hi = 2 2
nodes = 21, 21
";

    #[test]
    fn example_defaults() {
        let cfg = RunConfig::from_text(EXAMPLE).unwrap();
        assert_eq!(cfg.game.p, vec![vec![-1.0], vec![0.0], vec![1.0]]);
        assert_eq!(cfg.grid.nodes, vec![21, 21]);
        assert_eq!(cfg.tol_set, 0.1);
        let g = cfg.build_grid().unwrap();
        assert_eq!(g.n_nodes(), 441);
    }

    #[test]
    fn missing_key_is_named() {
        let text = EXAMPLE.replace("time_steps = 20\n", "");
        match RunConfig::from_text(&text) {
            Err(Error::MissingKey { section, key }) => assert_eq!((section.as_str(), key.as_str()), ("grid", "time_steps")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn errors_cite_lines() {
        let text = EXAMPLE.replace("nodes = 21, 21", "nodes = 21, x");
        match RunConfig::from_text(&text) {
            Err(Error::Config { line, .. }) => assert_eq!(line, 8),
            other => panic!("unexpected {other:?}"),
        }
        match ConfigText::parse("[game]\nbogus = 1\n") {
            Err(Error::Config { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match ConfigText::parse("x = 1\n") {
            Err(Error::Config { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn affine_game_and_box_controls() {
        let text = "\
[game]
dynamics = affine
n = 2
a = 0 1; -1 0
b = 1 0 0 1
c = 1 0 0 1
payoff1 = linear 1 0 0
payoff2 = neg_distance 0 0

[controls]
p_box = -1 1 3; -1 1 2
q = 0 0; 0.5 0.5

[grid]
time_steps = 10
lo = -1 -1
hi = 1 1
nodes = 11 11
stride = 2
";
        let cfg = RunConfig::from_text(text).unwrap();
        assert_eq!(cfg.game.p.len(), 6);
        assert_eq!(cfg.game.p[1], vec![-1.0, 1.0]);
        assert_eq!(cfg.game.q, vec![vec![0.0, 0.0], vec![0.5, 0.5]]);
        assert_eq!(cfg.solver.stride, Stride::Fixed(2));
    }

    #[test]
    fn tolerance_overrides_validate() {
        let mut cfg = RunConfig::from_text(EXAMPLE).unwrap();
        cfg.set_tolerance("tol_dd", 0.5).unwrap();
        assert_eq!(cfg.verify.tol_dd, 0.5);
        assert!(cfg.set_tolerance("tol_dd", -1.0).is_err());
        assert!(cfg.set_tolerance("tol_bogus", 1.0).is_err());
        let text = format!("{EXAMPLE}\n[tolerances]\ntol_set = 0\n");
        assert!(matches!(RunConfig::from_text(&text), Err(Error::Config { line: 11, .. })));
    }
}
