use std::sync::Arc;

use super::motion::Trajectory;
use super::strategy::{Eta, FeedbackStrategy, PunishmentStrategy};
use crate::error::{Error, Result};
use crate::game::{GameSpec, HullWeights, Player, VelocitySet};
use crate::grid::Stride;
use crate::nash::{dist_l1_points, NashMap, PayoffPair};
use crate::value::ValueField;

#[derive(Clone, Debug)]
pub struct ProfileOptions {
    pub hull_density: usize,
    pub seed: u64,
    /// Admissible distance of the target from the successor cloud per step,
    /// and the precondition slack beyond one quantum.
    pub tol_set: f64,
    /// Detection threshold; default 2 * speed * eps + cell diameter.
    pub eta: Option<f64>,
    /// Agreed step in grid slices.
    pub stride: Stride,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            hull_density: 10,
            seed: 7,
            tol_set: 0.1,
            eta: None,
            stride: Stride::Auto,
        }
    }
}

/// Punishment-strategy profile around an agreed motion.
#[derive(Clone, Debug)]
pub struct Profile {
    pub u: FeedbackStrategy,
    pub v: FeedbackStrategy,
    pub agreed: Arc<Trajectory>,
    pub t_start: f64,
    pub x_start: Vec<f64>,
    pub target: PayoffPair,
    pub eta: Eta,
    /// Agreed step length, also the punishing lookahead.
    pub step: f64,
    /// Distance of the target from the map along the agreed samples.
    pub path_dist: Vec<f64>,
}

impl Profile {
    pub fn strategy(&self, who: Player) -> &FeedbackStrategy {
        match who {
            Player::First => &self.u,
            Player::Second => &self.v,
        }
    }
}

/// Nearest raw velocity index (lowest index on ties).
fn nearest_raw(vs: &VelocitySet, w: &[f64]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (k, r) in vs.raw().enumerate() {
        let d: f64 = r.iter().zip(w).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best.1 {
            best = (k, d);
        }
    }
    best.0
}

/// Builds the agreed motion by greedy transport of `target` through the map
/// and wraps both players' punishment strategies around it.
#[allow(clippy::too_many_arguments)]
pub fn make_punishment_profile(
    spec: &GameSpec,
    map: &NashMap,
    lower1: Arc<ValueField>,
    lower2: Arc<ValueField>,
    t_start: f64,
    x_start: &[f64],
    target: PayoffPair,
    opts: &ProfileOptions,
) -> Result<Profile> {
    let g = map.grid();
    let n = g.dim();
    if n != spec.state_dim || x_start.len() != n {
        return Err(Error::Precondition("start state, game and map dimensions differ".into()));
    }
    let k0 = g.slice_of(t_start)?;
    let node = g.nearest_node(x_start);
    let cloud = map.cloud(k0, node);
    let d0 = if cloud.is_empty() { f64::INFINITY } else { dist_l1_points(target, cloud)? };
    if d0 > map.quantum() + opts.tol_set {
        return Err(Error::Precondition(format!(
            "target ({}, {}) is {d0} away from the cloud at t={t_start}, x={:?}",
            target[0],
            target[1],
            g.node_coords(node)
        )));
    }
    let stride = opts.stride.resolve(g, spec);
    let kk = g.time_steps();
    let weights = HullWeights::generate(spec.n_pairs(), opts.hull_density, opts.seed);
    let nq = spec.q.len();

    let mut times = vec![g.time(k0)];
    let mut states = x_start.to_vec();
    let mut controls = Vec::new();
    let mut path_dist = vec![d0];
    let mut x = x_start.to_vec();
    let mut foot = vec![0.0; n];
    let mut stencil = Vec::new();
    let mut k = k0;
    let mut step = 0;
    while k < kk {
        let kn = (k + stride).min(kk);
        let t = g.time(k);
        let h = g.time(kn) - t;
        let vs = spec.velocity_set(t, &x, &weights)?;
        // (index, distance at the map resolution, distance without slack)
        let mut scored: Vec<(usize, f64, f64)> = Vec::with_capacity(vs.len());
        for (wi, w) in vs.iter().enumerate() {
            for d in 0..n {
                foot[d] = x[d] + h * w[d];
            }
            let coarse = map.dist_weighted(kn, &foot, target, &mut stencil)?;
            let fine = map.dist_weighted_at(kn, &foot, target, 0.0, &mut stencil)?;
            scored.push((wi, coarse, fine));
        }
        let best = scored.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
        if !(best <= opts.tol_set) {
            return Err(Error::Construction {
                step,
                msg: format!("no hull velocity keeps the target within {} at t={t}, x={x:?} (best {best})", opts.tol_set),
            });
        }
        let tied: Vec<usize> = scored.iter().filter(|s| s.1 <= best + 1e-12).map(|s| s.0).collect();
        let raw_tied: Vec<usize> = tied.iter().copied().filter(|&i| i < vs.n_raw).collect();
        let pool = if raw_tied.is_empty() { &tied } else { &raw_tied };
        let finest = pool.iter().map(|&i| scored[i].2).fold(f64::INFINITY, f64::min);
        let pool: Vec<usize> = pool.iter().copied().filter(|&i| scored[i].2 <= finest + 1e-12).collect();
        let mut mean = vec![0.0; n];
        for &i in &pool {
            for d in 0..n {
                mean[d] += vs.get(i)[d] / pool.len() as f64;
            }
        }
        let mut pick = (pool[0], f64::INFINITY);
        for &i in &pool {
            let d: f64 = vs.get(i).iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < pick.1 - 1e-15 {
                pick = (i, d);
            }
        }
        let raw = nearest_raw(&vs, vs.get(pick.0));
        let (i, j) = (raw / nq, raw % nq);
        let f = vs.get(raw).to_vec();
        for d in 0..n {
            x[d] += h * f[d];
        }
        controls.push((i, j));
        times.push(g.time(kn));
        states.extend_from_slice(&x);
        path_dist.push(map.dist_weighted(kn, &x, target, &mut stencil)?);
        k = kn;
        step += 1;
    }
    let punishing = vec![(false, false); controls.len()];
    let payoffs = [spec.payoff1.eval(&x), spec.payoff2.eval(&x)];
    let agreed = Arc::new(Trajectory {
        dim: n,
        times,
        states,
        controls,
        punishing,
        payoffs,
    });

    let speed = {
        let probes = g.probe_states();
        let ts = [spec.t0, 0.5 * (spec.t0 + spec.theta0), spec.theta0];
        let mut s = 0.0f64;
        for &t in &ts {
            for p in &probes {
                for r in spec.raw_velocities(t, p)?.chunks(n) {
                    s = s.max(r.iter().map(|a| a * a).sum::<f64>().sqrt());
                }
            }
        }
        s
    };
    let eta = match opts.eta {
        Some(e) => Eta::Fixed(e),
        None => Eta::Auto {
            speed,
            cell: g.cell_diameter(),
        },
    };
    let step_len = stride as f64 * g.dt();
    let make = |field: Arc<ValueField>| {
        FeedbackStrategy::Punishment(Arc::new(PunishmentStrategy {
            agreed: agreed.clone(),
            eta,
            punish_field: field,
            lookahead: step_len,
        }))
    };
    Ok(Profile {
        u: make(lower2),
        v: make(lower1),
        agreed: agreed.clone(),
        t_start,
        x_start: x_start.to_vec(),
        target,
        eta,
        step: step_len,
        path_dist,
    })
}
