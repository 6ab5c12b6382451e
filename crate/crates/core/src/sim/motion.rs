use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::strategy::FeedbackStrategy;
use crate::error::{Error, Result};
use crate::game::{GameSpec, Player};

/// Increasing instants from the start time to the horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    instants: Vec<f64>,
}

impl Partition {
    /// floor(T / eps) + 1 equal intervals, so the fineness is strictly below eps.
    pub fn uniform(t_start: f64, theta0: f64, eps: f64) -> Result<Self> {
        Self::jittered(t_start, theta0, eps, 0.0, 0)
    }

    /// Interior instants shifted by up to `jitter` * h / 2 (jitter in [0, 1)),
    /// with floor(T (1 + jitter) / eps) + 1 intervals so the fineness stays below eps.
    pub fn jittered(t_start: f64, theta0: f64, eps: f64, jitter: f64, seed: u64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::Precondition(format!("partition precision must be positive, got {eps}")));
        }
        if !(t_start < theta0) {
            return Err(Error::Precondition(format!("partition needs t_start < theta0, got {t_start} and {theta0}")));
        }
        if !(0.0..1.0).contains(&jitter) {
            return Err(Error::Precondition(format!("jitter must lie in [0, 1), got {jitter}")));
        }
        let span = theta0 - t_start;
        let mut n = (span * (1.0 + jitter) / eps).floor() as usize + 1;
        // Rounding can leave span / eps just below an integer; keep a margin.
        while span / n as f64 * (1.0 + jitter) >= eps * (1.0 - 1e-9) {
            n += 1;
        }
        let h = span / n as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut instants: Vec<f64> = (0..=n).map(|i| t_start + i as f64 * h).collect();
        instants[n] = theta0;
        if jitter > 0.0 {
            for t in &mut instants[1..n] {
                *t += rng.gen_range(-0.5..=0.5) * jitter * h;
            }
        }
        let p = Self { instants };
        debug_assert!(p.fineness() < eps, "fineness {} eps {eps} n {n} h {h} span {span} jitter {jitter}", p.fineness());
        Ok(p)
    }

    pub fn from_instants(instants: Vec<f64>) -> Result<Self> {
        if instants.len() < 2 || instants.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Precondition("partition instants must be strictly increasing with at least two entries".into()));
        }
        Ok(Self { instants })
    }

    pub fn instants(&self) -> &[f64] {
        &self.instants
    }

    pub fn fineness(&self) -> f64 {
        self.instants.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    fn contains(&self, t: f64) -> bool {
        self.instants.binary_search_by(|s| s.total_cmp(&t)).is_ok()
    }
}

/// Merged instants of two partitions (exact duplicates collapse).
pub fn merge_partitions(a: &Partition, b: &Partition) -> Vec<f64> {
    let mut out: Vec<f64> = a.instants.iter().chain(&b.instants).copied().collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Sampled step-by-step motion.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub dim: usize,
    pub times: Vec<f64>,
    /// Flattened states, one per time.
    pub states: Vec<f64>,
    /// (P index, Q index) applied on [times[k], times[k+1]).
    pub controls: Vec<(usize, usize)>,
    /// Punishment flags of (player I, player II) on each interval.
    pub punishing: Vec<(bool, bool)>,
    pub payoffs: [f64; 2],
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn endpoint(&self) -> &[f64] {
        self.state(self.times.len() - 1)
    }

    pub fn payoff(&self, who: Player) -> f64 {
        self.payoffs[who.index() - 1]
    }

    /// Linear interpolation of the state at time t (clamped to the ends).
    pub fn state_at(&self, t: f64, out: &mut [f64]) {
        let n = self.times.len();
        if t <= self.times[0] {
            out.copy_from_slice(self.state(0));
            return;
        }
        if t >= self.times[n - 1] {
            out.copy_from_slice(self.state(n - 1));
            return;
        }
        let k = self.interval_at(t);
        let (ta, tb) = (self.times[k], self.times[k + 1]);
        let l = (t - ta) / (tb - ta);
        for d in 0..self.dim {
            out[d] = (1.0 - l) * self.states[k * self.dim + d] + l * self.states[(k + 1) * self.dim + d];
        }
    }

    /// Index of the interval [times[k], times[k+1]) containing t.
    pub fn interval_at(&self, t: f64) -> usize {
        let n = self.times.len();
        match self.times.binary_search_by(|s| s.total_cmp(&t)) {
            Ok(k) => k.min(n - 2),
            Err(k) => k.saturating_sub(1).min(n - 2),
        }
    }

    pub fn any_punishment(&self) -> bool {
        self.punishing.iter().any(|p| p.0 || p.1)
    }

    /// CSV `t,x1..xn,u1..,v1..,punishing_flag`; the flag is 1 for player I,
    /// 2 for player II, 3 for both. The last row carries no control.
    pub fn write_csv<W: Write>(&self, spec: &GameSpec, mut w: W) -> Result<()> {
        let (ud, vd) = (spec.p[0].len(), spec.q[0].len());
        let mut header = String::from("t");
        for d in 0..self.dim {
            header.push_str(&format!(",x{}", d + 1));
        }
        for d in 0..ud {
            header.push_str(&format!(",u{}", d + 1));
        }
        for d in 0..vd {
            header.push_str(&format!(",v{}", d + 1));
        }
        header.push_str(",punishing_flag\n");
        w.write_all(header.as_bytes())?;
        for k in 0..self.times.len() {
            let mut row = vec![self.times[k].to_string()];
            row.extend(self.state(k).iter().map(|v| v.to_string()));
            if k < self.controls.len() {
                let (i, j) = self.controls[k];
                row.extend(spec.p[i].iter().map(|v| v.to_string()));
                row.extend(spec.q[j].iter().map(|v| v.to_string()));
                let (a, b) = self.punishing[k];
                row.push((a as u8 + 2 * b as u8).to_string());
            } else {
                row.extend(std::iter::repeat(String::new()).take(ud + vd + 1));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimOptions {
    /// Partition jitter in [0, 1); zero gives uniform partitions.
    pub jitter: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { jitter: 0.0 }
    }
}

/// Step-by-step motion from (t_start, x_start): player I keeps its control
/// on its own partition intervals, player II on its own, and the state is
/// advanced by Euler steps over the merged partition.
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    spec: &GameSpec,
    t_start: f64,
    x_start: &[f64],
    u: &FeedbackStrategy,
    eps1: f64,
    v: &FeedbackStrategy,
    eps2: f64,
    seed: u64,
    opts: &SimOptions,
) -> Result<Trajectory> {
    if x_start.len() != spec.state_dim {
        return Err(Error::Precondition(format!("start state has {} components, expected {}", x_start.len(), spec.state_dim)));
    }
    let p1 = Partition::jittered(t_start, spec.theta0, eps1, opts.jitter, seed.wrapping_mul(2))?;
    let p2 = Partition::jittered(t_start, spec.theta0, eps2, opts.jitter, seed.wrapping_mul(2).wrapping_add(1))?;
    simulate_on(spec, x_start, u, eps1, &p1, v, eps2, &p2)
}

/// As `simulate` with explicit partitions.
#[allow(clippy::too_many_arguments)]
pub fn simulate_on(
    spec: &GameSpec,
    x_start: &[f64],
    u: &FeedbackStrategy,
    eps1: f64,
    p1: &Partition,
    v: &FeedbackStrategy,
    eps2: f64,
    p2: &Partition,
) -> Result<Trajectory> {
    let n = spec.state_dim;
    let times = merge_partitions(p1, p2);
    let mut states = Vec::with_capacity(times.len() * n);
    states.extend_from_slice(x_start);
    let mut x = x_start.to_vec();
    let mut f = vec![0.0; n];
    let mut controls = Vec::with_capacity(times.len());
    let mut punishing = Vec::with_capacity(times.len());
    let mut cur_u = None;
    let mut cur_v = None;
    for k in 0..times.len() - 1 {
        let t = times[k];
        if cur_u.is_none() || p1.contains(t) {
            cur_u = Some(u.decide(spec, Player::First, t, &x, eps1)?);
        }
        if cur_v.is_none() || p2.contains(t) {
            cur_v = Some(v.decide(spec, Player::Second, t, &x, eps2)?);
        }
        let (du, dv) = (cur_u.unwrap(), cur_v.unwrap());
        spec.velocity_into(t, &x, du.index, dv.index, &mut f);
        spec.check_finite(t, &x, &spec.p[du.index], &spec.q[dv.index], &f)?;
        let h = times[k + 1] - t;
        for d in 0..n {
            x[d] += h * f[d];
        }
        states.extend_from_slice(&x);
        controls.push((du.index, dv.index));
        punishing.push((du.punishing, dv.punishing));
    }
    let payoffs = [spec.payoff1.eval(&x), spec.payoff2.eval(&x)];
    Ok(Trajectory {
        dim: n,
        times,
        states,
        controls,
        punishing,
        payoffs,
    })
}
