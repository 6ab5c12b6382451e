//! Weak-invariance verification of arbitrary payoff maps through the
//! directional derivative of the map along hull velocities.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::cloud::PayoffPair;
use super::map::{InvariantReport, NashMap};
use crate::error::{Error, Result};
use crate::game::{GameSpec, HullWeights, VelocitySet};
use crate::value::ValueField;

/// Residuals at or below this count as exact transport.
const ZERO: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    /// Schedule as multiples of the grid time step.
    pub delta_steps: Vec<usize>,
    pub perturb_radius: f64,
    /// Seeded perturbations inside the perturbation ball beyond zero and the axes.
    pub perturb_extra: usize,
    pub hull_density: usize,
    pub seed: u64,
    pub tol_dd: f64,
    /// Slack of the lower-bound check; default 3 * (dt + max dx).
    pub tol_val: Option<f64>,
    /// Skip nodes whose queries may leave the grid box.
    pub skip_margin: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            delta_steps: vec![1, 2, 4],
            perturb_radius: 0.1,
            perturb_extra: 4,
            hull_density: 10,
            seed: 7,
            tol_dd: 1.0,
            tol_val: None,
            skip_margin: true,
        }
    }
}

impl VerifyOptions {
    /// Adds a step count to the schedule when missing (e.g. the builder stride).
    pub fn with_step(mut self, steps: usize) -> Self {
        if steps > 0 && !self.delta_steps.contains(&steps) {
            self.delta_steps.push(steps);
        }
        self
    }
}

/// Zero, the signed axis points at `radius`, then `extra` seeded points in the ball.
pub fn perturbation_samples(n: usize, radius: f64, extra: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; n]];
    if radius <= 0.0 {
        return out;
    }
    for d in 0..n {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; n];
            e[d] = s * radius;
            out.push(e);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    while out.len() < 1 + 2 * n + extra {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1.0 || norm == 0.0 {
            continue;
        }
        out.push(v.into_iter().map(|a| a * radius).collect());
    }
    out
}

struct Probe {
    p: Vec<f64>,
    stencil: Vec<(usize, f64)>,
    corner: Vec<f64>,
}

impl Probe {
    fn new(n: usize) -> Self {
        Self {
            p: vec![0.0; n],
            stencil: Vec::with_capacity(1 << n),
            corner: vec![0.0; n],
        }
    }
}

/// min over (slice, delta) and perturbation e of dist(point, cloud(t+delta, x+delta(w+e)))/delta.
fn dd_core(map: &NashMap, x: &[f64], point: PayoffPair, w: &[f64], deltas: &[(usize, f64)], perturbations: &[Vec<f64>], pr: &mut Probe) -> Result<f64> {
    let mut best = f64::INFINITY;
    for &(ks, delta) in deltas {
        for g in perturbations {
            for d in 0..x.len() {
                pr.p[d] = x[d] + delta * (w[d] + g[d]);
            }
            let dist = match map.dist_dilated(ks, &pr.p, point, &mut pr.stencil, &mut pr.corner) {
                Ok(v) => v,
                Err(Error::EmptyCloud) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            best = best.min(dist / delta);
            if best <= ZERO {
                return Ok(best);
            }
        }
    }
    Ok(best)
}

fn schedule_at(map: &NashMap, k: usize, steps: &[usize]) -> Vec<(usize, f64)> {
    let g = map.grid();
    let mut out: Vec<(usize, f64)> = steps
        .iter()
        .filter(|&&s| s > 0 && k + s <= g.time_steps())
        .map(|&s| (k + s, g.time(k + s) - g.time(k)))
        .collect();
    out.sort_by(|a, b| a.1.total_cmp(&b.1));
    out.dedup_by(|a, b| a.0 == b.0);
    out
}

/// Numerical directional derivative of the map at (t, x) for a payoff pair
/// and velocity. `t` and every `t + delta` must be grid slices; deltas
/// beyond the horizon are dropped.
pub fn directional_derivative(
    map: &NashMap,
    t: f64,
    x: &[f64],
    point: PayoffPair,
    w: &[f64],
    delta_schedule: &[f64],
    perturb_radius: f64,
) -> Result<f64> {
    let g = map.grid();
    let k = g.slice_of(t)?;
    let mut deltas = Vec::new();
    for &d in delta_schedule {
        if !(d > 0.0) {
            return Err(Error::Precondition("delta values must be positive".into()));
        }
        if t + d <= g.theta0() + 1e-9 * g.dt() {
            let ks = g.slice_of(t + d)?;
            deltas.push((ks, g.time(ks) - g.time(k)));
        }
    }
    if deltas.is_empty() {
        return Err(Error::Precondition(format!("no delta in the schedule fits before the horizon from t={t}")));
    }
    let perturbations = perturbation_samples(g.dim(), perturb_radius, 4, 0);
    dd_core(map, x, point, w, &deltas, &perturbations, &mut Probe::new(g.dim()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Worst {
    pub k: usize,
    pub node: usize,
    pub t: f64,
    pub x: Vec<f64>,
    pub point: PayoffPair,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeResidual {
    pub k: usize,
    pub node: usize,
    pub point: PayoffPair,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub max_residual: f64,
    pub worst: Option<Worst>,
    pub tol_dd: f64,
    pub residual_ok: bool,
    pub invariants: InvariantReport,
    pub checked_nodes: usize,
    pub checked_points: usize,
    pub skipped_nodes: usize,
    /// Worst point per node, for nodes with a nonzero residual.
    pub rows: Vec<NodeResidual>,
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        self.residual_ok && self.invariants.ok()
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        s.push_str("weak-invariance verification (finite samples of nodes, velocities, delta and perturbations; a PASS is numerical evidence, not a certificate)\n");
        s.push_str(&format!("verdict: {}\n", if self.pass() { "PASS" } else { "FAIL" }));
        s.push_str(&format!("max residual: {} (tol_dd {})\n", self.max_residual, self.tol_dd));
        if let Some(w) = &self.worst {
            s.push_str(&format!("worst: slice {} t={} x={:?} point=({}, {})\n", w.k, w.t, w.x, w.point[0], w.point[1]));
        }
        s.push_str(&format!(
            "checked nodes: {}, points: {}, skipped near boundary: {}\n",
            self.checked_nodes, self.checked_points, self.skipped_nodes
        ));
        let inv = &self.invariants;
        s.push_str(&format!(
            "lower-bound violations: {}{}\nterminal violations: {}\n",
            inv.lower_violations,
            if !inv.lower_checked {
                " (not checked: no lower-value fields)".to_string()
            } else if inv.lower_skipped > 0 {
                format!(" ({} boundary-affected nodes not checked)", inv.lower_skipped)
            } else {
                String::new()
            },
            inv.terminal_violations
        ));
        s
    }

    pub fn write_csv<W: Write>(&self, map: &NashMap, mut w: W) -> Result<()> {
        let g = map.grid();
        let mut header = String::from("t");
        for d in 0..g.dim() {
            header.push_str(&format!(",x{}", d + 1));
        }
        header.push_str(",J1,J2,residual\n");
        w.write_all(header.as_bytes())?;
        for r in &self.rows {
            let x = g.node_coords(r.node);
            let coords: Vec<String> = x.iter().map(|c| c.to_string()).collect();
            writeln!(w, "{},{},{},{},{}", g.time(r.k), coords.join(","), r.point[0], r.point[1], r.residual)?;
        }
        Ok(())
    }
}

struct NodeOutcome {
    skipped: bool,
    points: usize,
    worst: Option<(PayoffPair, f64)>,
}

/// Checks the lower-bound and terminal conditions, then the one-step transport residual of every stored
/// payoff at every non-terminal node.
pub fn verify_map(map: &NashMap, spec: &GameSpec, lowers: Option<(&ValueField, &ValueField)>, opts: &VerifyOptions) -> Result<VerifyReport> {
    let g = map.grid();
    if g.dim() != spec.state_dim {
        return Err(Error::InvalidGrid("map grid dimension differs from the game state".into()));
    }
    let tol_val = opts.tol_val.unwrap_or_else(|| super::build::default_tol_val(g));
    // Lower fields within speed * remaining time of the box edge depend on the boundary policy.
    let speed = spec.speed_bounds(&[g.time(0), spec.theta0], &g.probe_states());
    let invariants = map.check_invariants_where(spec, lowers, tol_val, |k, node| {
        if !opts.skip_margin {
            return true;
        }
        let reach = spec.theta0 - g.time(k);
        g.node_coords(node)
            .iter()
            .enumerate()
            .all(|(d, x)| x - speed[d] * reach >= g.lo()[d] - 1e-12 && x + speed[d] * reach <= g.hi()[d] + 1e-12)
    });
    let weights = HullWeights::generate(spec.n_pairs(), opts.hull_density, opts.seed);
    let perturbations = perturbation_samples(g.dim(), opts.perturb_radius, opts.perturb_extra, opts.seed);
    let n = g.dim();

    let mut max_residual = 0.0f64;
    let mut worst: Option<Worst> = None;
    let mut rows = Vec::new();
    let (mut checked_nodes, mut checked_points, mut skipped_nodes) = (0, 0, 0);
    for k in 0..g.time_steps() {
        let deltas = schedule_at(map, k, &opts.delta_steps);
        if deltas.is_empty() {
            continue;
        }
        let dmax = deltas.iter().map(|d| d.1).fold(0.0, f64::max);
        let t = g.time(k);
        let outcomes: Vec<NodeOutcome> = (0..g.n_nodes())
            .into_par_iter()
            .map_init(
                || (Probe::new(n), vec![0.0; n]),
                |(pr, x), node| -> Result<NodeOutcome> {
                    let cloud = map.cloud(k, node);
                    if cloud.is_empty() {
                        return Ok(NodeOutcome { skipped: false, points: 0, worst: None });
                    }
                    g.node_coords_into(node, x);
                    let vs = VelocitySet::from_raw(n, spec.raw_velocities(t, x)?, &weights);
                    if opts.skip_margin {
                        for d in 0..n {
                            let vmax = vs.iter().map(|w| w[d].abs()).fold(0.0, f64::max);
                            let m = dmax * (vmax + opts.perturb_radius);
                            if x[d] - m < g.lo()[d] - 1e-12 || x[d] + m > g.hi()[d] + 1e-12 {
                                return Ok(NodeOutcome { skipped: true, points: 0, worst: None });
                            }
                        }
                    }
                    let mut node_worst: Option<(PayoffPair, f64)> = None;
                    for &point in cloud {
                        let mut res = f64::INFINITY;
                        for w in vs.iter() {
                            res = res.min(dd_core(map, x, point, w, &deltas, &perturbations, pr)?);
                            if res <= ZERO {
                                break;
                            }
                        }
                        if node_worst.map_or(true, |(_, r)| res > r) {
                            node_worst = Some((point, res));
                        }
                    }
                    Ok(NodeOutcome {
                        skipped: false,
                        points: cloud.len(),
                        worst: node_worst,
                    })
                },
            )
            .collect::<Result<_>>()?;
        for (node, o) in outcomes.into_iter().enumerate() {
            if o.skipped {
                skipped_nodes += 1;
                continue;
            }
            if o.points == 0 {
                continue;
            }
            checked_nodes += 1;
            checked_points += o.points;
            if let Some((point, r)) = o.worst {
                if r > ZERO {
                    rows.push(NodeResidual { k, node, point, residual: r });
                }
                if worst.is_none() || r > max_residual {
                    max_residual = max_residual.max(r);
                    worst = Some(Worst {
                        k,
                        node,
                        t,
                        x: g.node_coords(node),
                        point,
                    });
                }
            }
        }
    }
    Ok(VerifyReport {
        max_residual,
        worst,
        tol_dd: opts.tol_dd,
        residual_ok: max_residual <= opts.tol_dd,
        invariants,
        checked_nodes,
        checked_points,
        skipped_nodes,
        rows,
    })
}

/// Hull velocities along which `point` is transported at (t, x) within tol_dd.
pub fn tangent_velocities(map: &NashMap, spec: &GameSpec, t: f64, x: &[f64], point: PayoffPair, opts: &VerifyOptions) -> Result<Vec<Vec<f64>>> {
    let g = map.grid();
    let k = g.slice_of(t)?;
    let deltas = schedule_at(map, k, &opts.delta_steps);
    if deltas.is_empty() {
        return Ok(Vec::new());
    }
    let weights = HullWeights::generate(spec.n_pairs(), opts.hull_density, opts.seed);
    let perturbations = perturbation_samples(g.dim(), opts.perturb_radius, opts.perturb_extra, opts.seed);
    let vs = VelocitySet::from_raw(g.dim(), spec.raw_velocities(t, x)?, &weights);
    let mut pr = Probe::new(g.dim());
    let mut out = Vec::new();
    for w in vs.iter() {
        if dd_core(map, x, point, w, &deltas, &perturbations, &mut pr)? <= opts.tol_dd {
            out.push(w.to_vec());
        }
    }
    Ok(out)
}
