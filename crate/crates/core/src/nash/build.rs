//! Backward construction of the largest discrete payoff map satisfying the
//! lower bounds, terminal consistency and one-step weak invariance.
//!
//! Interior payoffs live on the lattice quantum * Z^2. A candidate payoff
//! enters a node's cloud when it dominates the lower values (up to half a
//! quantum) and some hull velocity carries it to the successor slice, i.e.
//! the multilinear interpolation of successor distances at the foot point
//! is at most tol_inv * delta.

use rayon::prelude::*;

use super::cloud::{box_dist, PayoffPair};
use super::map::{CloudSlice, NashMap};
use crate::error::{Error, Result};
use crate::game::{GameSpec, HullWeights, VelocitySet};
use crate::grid::{BoundaryPolicy, Grid, Stride};
use crate::value::ValueField;

#[derive(Clone, Debug)]
pub struct NashBuildOptions {
    pub hull_density: usize,
    /// Payoff lattice step; default tol_val / 2.
    pub quantum: Option<f64>,
    /// Default 3 * (dt + max dx).
    pub tol_val: Option<f64>,
    pub tol_inv: f64,
    pub seed: u64,
    pub stride: Stride,
    pub boundary: BoundaryPolicy,
    /// Lower-bound slack; default quantum / 2.
    pub lower_slack: Option<f64>,
    /// Payoff Lipschitz constant stored for interpolated queries; default from the game.
    pub dilation: Option<f64>,
}

impl Default for NashBuildOptions {
    fn default() -> Self {
        Self {
            hull_density: 10,
            quantum: None,
            tol_val: None,
            tol_inv: 1.0,
            seed: 7,
            stride: Stride::Auto,
            boundary: BoundaryPolicy::Clamp,
            lower_slack: None,
            dilation: None,
        }
    }
}

pub fn default_tol_val(grid: &Grid) -> f64 {
    3.0 * (grid.dt() + grid.max_spacing())
}

impl NashBuildOptions {
    pub fn resolved_quantum(&self, grid: &Grid) -> f64 {
        self.quantum
            .unwrap_or_else(|| 0.5 * self.tol_val.unwrap_or_else(|| default_tol_val(grid)))
    }
}

#[derive(Clone, Debug)]
pub struct BuildReport {
    pub stride: usize,
    pub quantum: f64,
    pub tol_inv: f64,
    pub lower_slack: f64,
    pub hull_size: usize,
    /// Nodes (slice, node) left with an empty cloud; at most 1000 listed.
    pub empty_nodes: Vec<(usize, usize)>,
    pub n_empty: usize,
    pub total_points: usize,
    pub max_cloud: usize,
}

impl BuildReport {
    pub fn summary(&self) -> String {
        format!(
            "stride {}\nquantum {}\ntol_inv {}\nlower slack {}\nhull velocities {}\ntotal points {}\nlargest cloud {}\nempty nodes {}\n",
            self.stride, self.quantum, self.tol_inv, self.lower_slack, self.hull_size, self.total_points, self.max_cloud, self.n_empty
        )
    }
}

/// (J2, J1) in lattice units, so tuple order equals storage order.
type Key = (i32, i32);

struct LatSlice {
    offsets: Vec<usize>,
    keys: Vec<Key>,
}

impl LatSlice {
    fn from_nested(clouds: Vec<Vec<Key>>) -> Self {
        let mut offsets = Vec::with_capacity(clouds.len() + 1);
        offsets.push(0);
        let mut keys = Vec::with_capacity(clouds.iter().map(Vec::len).sum());
        for c in clouds {
            keys.extend_from_slice(&c);
            offsets.push(keys.len());
        }
        Self { offsets, keys }
    }

    fn cloud(&self, node: usize) -> &[Key] {
        &self.keys[self.offsets[node]..self.offsets[node + 1]]
    }
}

fn snap(p: PayoffPair, q: f64) -> Result<Key> {
    let a = (p[1] / q).round();
    let b = (p[0] / q).round();
    let lim = i32::MAX as f64 / 2.0;
    if !(a.abs() < lim && b.abs() < lim) {
        return Err(Error::Domain(format!("payoff {p:?} does not fit the lattice at quantum {q}")));
    }
    Ok((a as i32, b as i32))
}

#[inline]
fn to_pair(k: Key, q: f64) -> PayoffPair {
    [k.1 as f64 * q, k.0 as f64 * q]
}

#[inline]
fn lattice_dist(a: Key, cloud: &[Key]) -> Option<i64> {
    cloud
        .iter()
        .map(|b| (a.0 as i64 - b.0 as i64).abs() + (a.1 as i64 - b.1 as i64).abs())
        .min()
}

struct Ctx<'a> {
    spec: &'a GameSpec,
    grid: &'a Grid,
    weights: &'a HullWeights,
    lower1: &'a ValueField,
    lower2: &'a ValueField,
    restrict: Option<&'a NashMap>,
    boundary: BoundaryPolicy,
    q: f64,
    slack: f64,
    tol_inv: f64,
}

#[derive(Default)]
struct Buffers {
    x: Vec<f64>,
    raw: Vec<f64>,
    foot: Vec<f64>,
    stencil: Vec<(usize, f64)>,
    slots: Vec<usize>,
    entries: Vec<(usize, f64)>,
    ranges: Vec<(usize, usize)>,
    cand: Vec<Key>,
    member: Vec<bool>,
}

impl Ctx<'_> {
    fn node_step(&self, b: &mut Buffers, succ: &LatSlice, k: usize, kn: usize, node: usize) -> Result<Vec<Key>> {
        let g = self.grid;
        let n = g.dim();
        let t = g.time(k);
        let delta = g.time(kn) - t;
        let thr = self.tol_inv * delta;
        let eps = 1e-12 * thr.max(1.0);
        b.x.resize(n, 0.0);
        b.foot.resize(n, 0.0);
        g.node_coords_into(node, &mut b.x);
        b.raw.clear();
        b.raw.extend(self.spec.raw_velocities(t, &b.x)?);
        let vs = VelocitySet::from_raw(n, std::mem::take(&mut b.raw), self.weights);

        b.slots.clear();
        b.entries.clear();
        b.ranges.clear();
        for w in vs.iter() {
            for d in 0..n {
                b.foot[d] = b.x[d] + delta * w[d];
            }
            g.stencil_into(&b.foot, self.boundary, &mut b.stencil)
                .map_err(|e| Error::Domain(format!("node {:?} at t={t}: {e}", b.x)))?;
            let start = b.entries.len();
            for &(c, wt) in &b.stencil {
                let slot = match b.slots.iter().position(|&s| s == c) {
                    Some(s) => s,
                    None => {
                        b.slots.push(c);
                        b.slots.len() - 1
                    }
                };
                b.entries.push((slot, wt));
            }
            b.ranges.push((start, b.entries.len()));
        }
        b.raw = vs.hull;

        if kn == g.time_steps() {
            return self.terminal_step(b, k, node, delta, thr + eps);
        }

        b.cand.clear();
        for &s in &b.slots {
            b.cand.extend_from_slice(succ.cloud(s));
        }
        b.cand.sort_unstable();
        b.cand.dedup();

        let (lo1, lo2) = (self.lower1.at(k, node) - self.slack, self.lower2.at(k, node) - self.slack);
        let q = self.q;
        let restrict = self.restrict.map(|m| (m.cloud(k, node), m.resolution()));
        b.cand.retain(|&key| {
            let p = to_pair(key, q);
            if p[0] < lo1 || p[1] < lo2 {
                return false;
            }
            match restrict {
                Some((cloud, r)) => box_dist(p, cloud, r) == 0.0,
                None => true,
            }
        });

        let ns = b.slots.len();
        b.member.clear();
        b.member.resize(b.cand.len() * ns, false);
        for (s, &slot_node) in b.slots.iter().enumerate() {
            let cloud = succ.cloud(slot_node);
            for (ci, key) in b.cand.iter().enumerate() {
                b.member[ci * ns + s] = cloud.binary_search(key).is_ok();
            }
        }

        let mut accepted = Vec::new();
        for (ci, &key) in b.cand.iter().enumerate() {
            let member = &b.member[ci * ns..(ci + 1) * ns];
            let ok = b.ranges.iter().any(|&(s0, s1)| {
                let entries = &b.entries[s0..s1];
                let missing: f64 = entries.iter().filter(|e| !member[e.0]).map(|e| e.1).sum();
                if missing == 0.0 {
                    return true;
                }
                if q * missing > thr + eps {
                    return false;
                }
                let mut acc = 0.0;
                for &(slot, wt) in entries {
                    if member[slot] {
                        continue;
                    }
                    match lattice_dist(key, succ.cloud(b.slots[slot])) {
                        Some(d) => acc += wt * q * d as f64,
                        None => return false,
                    }
                    if acc > thr + eps {
                        return false;
                    }
                }
                true
            });
            if ok {
                accepted.push(key);
            }
        }
        Ok(accepted)
    }
}

impl Ctx<'_> {
    /// Step into the terminal slice: the successor payoff at a foot point is
    /// the terminal payoff at the foot, so no spatial interpolation is needed.
    fn terminal_step(&self, b: &mut Buffers, k: usize, node: usize, delta: f64, thr: f64) -> Result<Vec<Key>> {
        let n = self.grid.dim();
        let q = self.q;
        let half = 0.5 * q;
        let (lo1, lo2) = (self.lower1.at(k, node) - self.slack, self.lower2.at(k, node) - self.slack);
        let restrict = self.restrict.map(|m| (m.cloud(k, node), m.resolution()));
        let mut targets = Vec::with_capacity(b.raw.len() / n);
        for w in b.raw.chunks(n) {
            for d in 0..n {
                b.foot[d] = b.x[d] + delta * w[d];
            }
            targets.push([self.spec.payoff1.eval(&b.foot), self.spec.payoff2.eval(&b.foot)]);
        }
        b.cand.clear();
        for &p in &targets {
            b.cand.push(snap(p, q)?);
        }
        b.cand.sort_unstable();
        b.cand.dedup();
        let mut accepted = Vec::new();
        for &key in &b.cand {
            let p = to_pair(key, q);
            if p[0] < lo1 || p[1] < lo2 {
                continue;
            }
            if let Some((cloud, r)) = restrict {
                if box_dist(p, cloud, r) > 0.0 {
                    continue;
                }
            }
            if box_dist(p, &targets, half) <= thr {
                accepted.push(key);
            }
        }
        Ok(accepted)
    }
}

pub fn build_nash_map(
    spec: &GameSpec,
    grid: &Grid,
    lower1: &ValueField,
    lower2: &ValueField,
    opts: &NashBuildOptions,
) -> Result<(NashMap, BuildReport)> {
    build_nash_map_within(spec, grid, lower1, lower2, opts, None)
}

/// As `build_nash_map`, with candidates further restricted to payoffs
/// resolved by `restrict`'s clouds at the same node.
pub fn build_nash_map_within(
    spec: &GameSpec,
    grid: &Grid,
    lower1: &ValueField,
    lower2: &ValueField,
    opts: &NashBuildOptions,
    restrict: Option<&NashMap>,
) -> Result<(NashMap, BuildReport)> {
    if lower1.grid() != grid || lower2.grid() != grid {
        return Err(Error::Precondition("lower-value fields must be solved on the builder grid".into()));
    }
    if let Some(m) = restrict {
        if m.grid() != grid {
            return Err(Error::Precondition("restricting map must share the builder grid".into()));
        }
    }
    if grid.dim() != spec.state_dim {
        return Err(Error::InvalidGrid("grid dimension differs from the game state".into()));
    }
    if !(opts.tol_inv >= 0.0) {
        return Err(Error::Precondition("tol_inv must be nonnegative".into()));
    }
    let q = opts.resolved_quantum(grid);
    if !(q > 0.0) {
        return Err(Error::Precondition("quantum must be positive".into()));
    }
    let slack = opts.lower_slack.unwrap_or(0.5 * q);
    let stride = opts.stride.resolve(grid, spec);
    let weights = HullWeights::generate(spec.n_pairs(), opts.hull_density, opts.seed);
    let dilation = opts.dilation.unwrap_or_else(|| spec.payoff_lipschitz());
    let ctx = Ctx {
        spec,
        grid,
        weights: &weights,
        lower1,
        lower2,
        restrict,
        boundary: opts.boundary,
        q,
        slack,
        tol_inv: opts.tol_inv,
    };

    let kk = grid.time_steps();
    let nn = grid.n_nodes();
    let terminal: Vec<PayoffPair> = (0..nn)
        .into_par_iter()
        .map(|node| {
            let x = grid.node_coords(node);
            [spec.payoff1.eval(&x), spec.payoff2.eval(&x)]
        })
        .collect();
    let mut lattice: Vec<Option<LatSlice>> = (0..=kk).map(|_| None).collect();
    lattice[kk] = Some(LatSlice::from_nested(
        terminal.iter().map(|&p| snap(p, q).map(|key| vec![key])).collect::<Result<_>>()?,
    ));
    let mut slices: Vec<Option<CloudSlice>> = (0..=kk).map(|_| None).collect();
    slices[kk] = Some(CloudSlice::from_nested(terminal.iter().map(|&p| vec![p]).collect()));

    let mut empty_nodes = Vec::new();
    let mut n_empty = 0;
    for k in (0..kk).rev() {
        let kn = (k + stride).min(kk);
        let succ = lattice[kn].as_ref().expect("successor slice retained");
        let clouds: Vec<Vec<Key>> = (0..nn)
            .into_par_iter()
            .map_init(Buffers::default, |b, node| ctx.node_step(b, succ, k, kn, node))
            .collect::<Result<_>>()?;
        for (node, c) in clouds.iter().enumerate() {
            if c.is_empty() && lower1.at(k, node).is_finite() && lower2.at(k, node).is_finite() {
                n_empty += 1;
                if empty_nodes.len() < 1000 {
                    empty_nodes.push((k, node));
                }
            }
        }
        slices[k] = Some(CloudSlice::from_nested(
            clouds.iter().map(|c| c.iter().map(|&key| to_pair(key, q)).collect()).collect(),
        ));
        lattice[k] = Some(LatSlice::from_nested(clouds));
        if k + stride < kk {
            lattice[k + stride] = None;
        }
    }
    let slices: Vec<CloudSlice> = slices.into_iter().map(|s| s.expect("every slice built")).collect();
    let map = NashMap::new(grid.clone(), q, dilation, slices)?.with_boundary(opts.boundary);
    let report = BuildReport {
        stride,
        quantum: q,
        tol_inv: opts.tol_inv,
        lower_slack: slack,
        hull_size: spec.n_pairs() + weights.combos.len(),
        empty_nodes,
        n_empty,
        total_points: map.total_points(),
        max_cloud: map.max_cloud_len(),
    };
    Ok((map, report))
}
