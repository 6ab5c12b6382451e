//! Game definition: dynamics catalog, control samples, terminal payoffs,
//! velocity sets, Hamiltonians and the numerical Isaacs check.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Extension point for dynamics not covered by the catalog.
pub trait VectorField: Send + Sync {
    fn name(&self) -> &str;
    fn state_dim(&self) -> usize;
    /// Writes f(t, x, u, v) into `out` (length = state_dim).
    fn eval(&self, t: f64, x: &[f64], u: &[f64], v: &[f64], out: &mut [f64]);
}

/// Extension point for terminal payoffs not covered by the catalog.
pub trait TerminalPayoff: Send + Sync {
    fn name(&self) -> &str;
    fn eval(&self, x: &[f64]) -> f64;
    /// Lipschitz constant with respect to the Euclidean norm.
    fn lipschitz(&self) -> f64;
}

/// f = (a0 + t a1) x + b u + c v + drift, matrices row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineDynamics {
    pub n: usize,
    pub a0: Vec<f64>,
    pub a1: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub drift: Vec<f64>,
    pub u_dim: usize,
    pub v_dim: usize,
}

impl AffineDynamics {
    pub fn new(n: usize, a0: Vec<f64>, b: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        if n == 0 || a0.len() != n * n || b.len() % n != 0 || c.len() % n != 0 {
            return Err(Error::InvalidGame(format!(
                "affine shapes: n={n}, |A|={}, |B|={}, |C|={}",
                a0.len(),
                b.len(),
                c.len()
            )));
        }
        let u_dim = b.len() / n;
        let v_dim = c.len() / n;
        Ok(Self {
            n,
            a0,
            a1: vec![0.0; n * n],
            b,
            c,
            drift: vec![0.0; n],
            u_dim,
            v_dim,
        })
    }

    pub fn with_time_slope(mut self, a1: Vec<f64>) -> Result<Self> {
        if a1.len() != self.n * self.n {
            return Err(Error::InvalidGame("affine a1 must be n x n".into()));
        }
        self.a1 = a1;
        Ok(self)
    }

    pub fn with_drift(mut self, drift: Vec<f64>) -> Result<Self> {
        if drift.len() != self.n {
            return Err(Error::InvalidGame("affine drift must have length n".into()));
        }
        self.drift = drift;
        Ok(self)
    }

    fn eval(&self, t: f64, x: &[f64], u: &[f64], v: &[f64], out: &mut [f64]) {
        let n = self.n;
        for r in 0..n {
            let mut acc = self.drift[r];
            for k in 0..n {
                acc += (self.a0[r * n + k] + t * self.a1[r * n + k]) * x[k];
            }
            for k in 0..self.u_dim {
                acc += self.b[r * self.u_dim + k] * u[k];
            }
            for k in 0..self.v_dim {
                acc += self.c[r * self.v_dim + k] * v[k];
            }
            out[r] = acc;
        }
    }
}

#[derive(Clone)]
pub enum Dynamics {
    /// x' = u, y' = v with scalar controls.
    Example,
    Affine(AffineDynamics),
    /// x' = gain * u * v on the line, scalar controls.
    Coupled { gain: f64 },
    Custom(Arc<dyn VectorField>),
}

impl fmt::Debug for Dynamics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dynamics::Example => write!(f, "Example"),
            Dynamics::Affine(a) => write!(f, "Affine({a:?})"),
            Dynamics::Coupled { gain } => write!(f, "Coupled {{ gain: {gain} }}"),
            Dynamics::Custom(c) => write!(f, "Custom({})", c.name()),
        }
    }
}

impl Dynamics {
    pub fn id(&self) -> &str {
        match self {
            Dynamics::Example => "example",
            Dynamics::Affine(_) => "affine",
            Dynamics::Coupled { .. } => "coupled",
            Dynamics::Custom(c) => c.name(),
        }
    }

    /// (state_dim, u_dim, v_dim) when the entry fixes them.
    fn shape(&self) -> (usize, Option<usize>, Option<usize>) {
        match self {
            Dynamics::Example => (2, Some(1), Some(1)),
            Dynamics::Affine(a) => (a.n, Some(a.u_dim), Some(a.v_dim)),
            Dynamics::Coupled { .. } => (1, Some(1), Some(1)),
            Dynamics::Custom(c) => (c.state_dim(), None, None),
        }
    }

    #[inline]
    pub fn eval_into(&self, t: f64, x: &[f64], u: &[f64], v: &[f64], out: &mut [f64]) {
        match self {
            Dynamics::Example => {
                out[0] = u[0];
                out[1] = v[0];
            }
            Dynamics::Affine(a) => a.eval(t, x, u, v, out),
            Dynamics::Coupled { gain } => out[0] = gain * u[0] * v[0],
            Dynamics::Custom(c) => c.eval(t, x, u, v, out),
        }
    }
}

#[derive(Clone)]
pub enum Payoff {
    /// -|x_i - x_j|
    NegAbsDiff { i: usize, j: usize },
    /// <w, x> + b
    Linear { w: Vec<f64>, b: f64 },
    /// -|x - center|_2
    NegDistance { center: Vec<f64> },
    Custom(Arc<dyn TerminalPayoff>),
}

impl fmt::Debug for Payoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payoff::NegAbsDiff { i, j } => write!(f, "NegAbsDiff({i},{j})"),
            Payoff::Linear { w, b } => write!(f, "Linear({w:?},{b})"),
            Payoff::NegDistance { center } => write!(f, "NegDistance({center:?})"),
            Payoff::Custom(c) => write!(f, "Custom({})", c.name()),
        }
    }
}

impl Payoff {
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Payoff::NegAbsDiff { i, j } => -(x[*i] - x[*j]).abs(),
            Payoff::Linear { w, b } => w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b,
            Payoff::NegDistance { center } => -center
                .iter()
                .zip(x)
                .map(|(c, xi)| (xi - c) * (xi - c))
                .sum::<f64>()
                .sqrt(),
            Payoff::Custom(c) => c.eval(x),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            Payoff::NegAbsDiff { i, j } => {
                if i == j {
                    0.0
                } else {
                    std::f64::consts::SQRT_2
                }
            }
            Payoff::Linear { w, .. } => w.iter().map(|a| a * a).sum::<f64>().sqrt(),
            Payoff::NegDistance { .. } => 1.0,
            Payoff::Custom(c) => c.lipschitz(),
        }
    }

    fn max_index(&self) -> Option<usize> {
        match self {
            Payoff::NegAbsDiff { i, j } => Some((*i).max(*j)),
            Payoff::Linear { w, .. } => w.len().checked_sub(1),
            Payoff::NegDistance { center } => center.len().checked_sub(1),
            Payoff::Custom(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Player {
    First,
    Second,
}

impl Player {
    pub fn from_index(which: usize) -> Result<Self> {
        match which {
            1 => Ok(Player::First),
            2 => Ok(Player::Second),
            _ => Err(Error::Precondition(format!("player index must be 1 or 2, got {which}"))),
        }
    }

    pub fn index(self) -> usize {
        match self {
            Player::First => 1,
            Player::Second => 2,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Player::First => Player::Second,
            Player::Second => Player::First,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GameSpec {
    pub dynamics: Dynamics,
    pub t0: f64,
    pub theta0: f64,
    pub state_dim: usize,
    pub p: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub payoff1: Payoff,
    pub payoff2: Payoff,
}

impl GameSpec {
    pub fn new(
        dynamics: Dynamics,
        t0: f64,
        theta0: f64,
        p: Vec<Vec<f64>>,
        q: Vec<Vec<f64>>,
        payoff1: Payoff,
        payoff2: Payoff,
    ) -> Result<Self> {
        if !(t0.is_finite() && theta0.is_finite() && t0 < theta0) {
            return Err(Error::InvalidGame(format!("need t0 < theta0, got {t0} and {theta0}")));
        }
        if p.is_empty() || q.is_empty() {
            return Err(Error::InvalidGame("control sample lists must be nonempty".into()));
        }
        let (n, u_dim, v_dim) = dynamics.shape();
        let u_dim = u_dim.unwrap_or(p[0].len());
        let v_dim = v_dim.unwrap_or(q[0].len());
        if p.iter().any(|u| u.len() != u_dim || u.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidGame(format!(
                "player I controls must be finite with {u_dim} components"
            )));
        }
        if q.iter().any(|v| v.len() != v_dim || v.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidGame(format!(
                "player II controls must be finite with {v_dim} components"
            )));
        }
        for s in [&payoff1, &payoff2] {
            if let Some(m) = s.max_index() {
                if m >= n {
                    return Err(Error::InvalidGame(format!(
                        "payoff {s:?} refers to coordinate {m} but state_dim is {n}"
                    )));
                }
            }
        }
        Ok(Self {
            dynamics,
            t0,
            theta0,
            state_dim: n,
            p,
            q,
            payoff1,
            payoff2,
        })
    }

    /// The example game on [0,1] with u, v in `controls`, payoff1 = -|x-y|, payoff2 = y.
    pub fn example(controls: Vec<f64>) -> Self {
        let c: Vec<Vec<f64>> = controls.into_iter().map(|u| vec![u]).collect();
        Self::new(
            Dynamics::Example,
            0.0,
            1.0,
            c.clone(),
            c,
            Payoff::NegAbsDiff { i: 0, j: 1 },
            Payoff::Linear { w: vec![0.0, 1.0], b: 0.0 },
        )
        .expect("example game is valid")
    }

    pub fn payoff(&self, who: Player) -> &Payoff {
        match who {
            Player::First => &self.payoff1,
            Player::Second => &self.payoff2,
        }
    }

    pub fn controls(&self, who: Player) -> &[Vec<f64>] {
        match who {
            Player::First => &self.p,
            Player::Second => &self.q,
        }
    }

    /// Sum of the payoff Lipschitz constants (l1 in payoff space).
    pub fn payoff_lipschitz(&self) -> f64 {
        self.payoff1.lipschitz() + self.payoff2.lipschitz()
    }

    pub fn n_pairs(&self) -> usize {
        self.p.len() * self.q.len()
    }

    pub fn eval_dynamics(&self, t: f64, x: &[f64], u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let slack = 1e-9 * (self.theta0 - self.t0);
        if t < self.t0 - slack || t > self.theta0 + slack {
            return Err(Error::Domain(format!(
                "time {t} outside [{}, {}]",
                self.t0, self.theta0
            )));
        }
        if x.len() != self.state_dim {
            return Err(Error::Domain(format!(
                "state has {} components, expected {}",
                x.len(),
                self.state_dim
            )));
        }
        let mut out = vec![0.0; self.state_dim];
        self.dynamics.eval_into(t, x, u, v, &mut out);
        self.check_finite(t, x, u, v, &out)?;
        Ok(out)
    }

    /// Velocity for sample indices (i over P, j over Q); no domain checks.
    #[inline]
    pub fn velocity_into(&self, t: f64, x: &[f64], i: usize, j: usize, out: &mut [f64]) {
        self.dynamics.eval_into(t, x, &self.p[i], &self.q[j], out);
    }

    pub(crate) fn check_finite(&self, t: f64, x: &[f64], u: &[f64], v: &[f64], f: &[f64]) -> Result<()> {
        if f.iter().all(|c| c.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite {
                t,
                x: x.to_vec(),
                u: u.to_vec(),
                v: v.to_vec(),
            })
        }
    }

    /// All raw velocities, ordered (i over P) then (j over Q), flattened.
    pub fn raw_velocities(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.state_dim;
        let mut out = vec![0.0; self.n_pairs() * n];
        for (i, u) in self.p.iter().enumerate() {
            for (j, v) in self.q.iter().enumerate() {
                let k = i * self.q.len() + j;
                let slot = &mut out[k * n..(k + 1) * n];
                self.dynamics.eval_into(t, x, u, v, slot);
                self.check_finite(t, x, u, v, slot)?;
            }
        }
        Ok(out)
    }

    pub fn velocity_set(&self, t: f64, x: &[f64], weights: &HullWeights) -> Result<VelocitySet> {
        let raw = self.raw_velocities(t, x)?;
        Ok(VelocitySet::from_raw(self.state_dim, raw, weights))
    }

    fn inner_table(&self, t: f64, x: &[f64], s: &[f64]) -> Vec<f64> {
        let n = self.state_dim;
        let mut f = vec![0.0; n];
        let mut table = Vec::with_capacity(self.n_pairs());
        for u in &self.p {
            for v in &self.q {
                self.dynamics.eval_into(t, x, u, v, &mut f);
                table.push(s.iter().zip(&f).map(|(a, b)| a * b).sum());
            }
        }
        table
    }

    /// which = First: max_u min_v <s,f>; which = Second: max_v min_u <s,f>.
    pub fn hamiltonian(&self, which: Player, t: f64, x: &[f64], s: &[f64]) -> f64 {
        let table = self.inner_table(t, x, s);
        let nq = self.q.len();
        let np = self.p.len();
        match which {
            Player::First => (0..np)
                .map(|i| (0..nq).map(|j| table[i * nq + j]).fold(f64::INFINITY, f64::min))
                .fold(f64::NEG_INFINITY, f64::max),
            Player::Second => (0..nq)
                .map(|j| (0..np).map(|i| table[i * nq + j]).fold(f64::INFINITY, f64::min))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// (min_u max_v <s,f>, max_v min_u <s,f>).
    pub fn upper_lower(&self, t: f64, x: &[f64], s: &[f64]) -> (f64, f64) {
        let table = self.inner_table(t, x, s);
        let nq = self.q.len();
        let np = self.p.len();
        let upper = (0..np)
            .map(|i| (0..nq).map(|j| table[i * nq + j]).fold(f64::NEG_INFINITY, f64::max))
            .fold(f64::INFINITY, f64::min);
        let lower = (0..nq)
            .map(|j| (0..np).map(|i| table[i * nq + j]).fold(f64::INFINITY, f64::min))
            .fold(f64::NEG_INFINITY, f64::max);
        (upper, lower)
    }

    pub fn isaacs_check(&self, t_samples: &[f64], x_samples: &[Vec<f64>], s_samples: &[Vec<f64>]) -> Result<IsaacsReport> {
        if t_samples.is_empty() || x_samples.is_empty() || s_samples.is_empty() {
            return Err(Error::Precondition("isaacs_check needs nonempty sample lists".into()));
        }
        let mut report = IsaacsReport {
            max_gap: 0.0,
            worst_t: t_samples[0],
            worst_x: x_samples[0].clone(),
            worst_s: s_samples[0].clone(),
        };
        for &t in t_samples {
            for x in x_samples {
                for s in s_samples {
                    let (upper, lower) = self.upper_lower(t, x, s);
                    let gap = (upper - lower).abs();
                    if gap > report.max_gap {
                        report.max_gap = gap;
                        report.worst_t = t;
                        report.worst_x = x.clone();
                        report.worst_s = s.clone();
                    }
                }
            }
        }
        Ok(report)
    }

    /// Largest |f_d| per coordinate over raw velocities at the given states.
    pub fn speed_bounds(&self, times: &[f64], states: &[Vec<f64>]) -> Vec<f64> {
        let n = self.state_dim;
        let mut bound = vec![0.0f64; n];
        let mut f = vec![0.0; n];
        for &t in times {
            for x in states {
                for u in &self.p {
                    for v in &self.q {
                        self.dynamics.eval_into(t, x, u, v, &mut f);
                        for d in 0..n {
                            if f[d].is_finite() {
                                bound[d] = bound[d].max(f[d].abs());
                            }
                        }
                    }
                }
            }
        }
        bound
    }
}

#[derive(Clone, Debug)]
pub struct IsaacsReport {
    pub max_gap: f64,
    pub worst_t: f64,
    pub worst_x: Vec<f64>,
    pub worst_s: Vec<f64>,
}

/// Convex-weight recipes over raw velocity indices, shared by every node.
#[derive(Clone, Debug, PartialEq)]
pub struct HullWeights {
    pub n_raw: usize,
    /// Each entry lists (raw index, weight) with weights summing to 1.
    pub combos: Vec<Vec<(usize, f64)>>,
}

impl HullWeights {
    /// Low-discrepancy convex weights: first half are chords between raw
    /// pairs, the rest spread over the full simplex.
    pub fn generate(n_raw: usize, density: usize, seed: u64) -> Self {
        let mut combos = Vec::with_capacity(density);
        if n_raw < 2 || density == 0 {
            return Self { n_raw, combos };
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift: f64 = rng.gen();
        let mut pairs: Vec<(usize, usize)> = (0..n_raw)
            .flat_map(|a| ((a + 1)..n_raw).map(move |b| (a, b)))
            .collect();
        for k in (1..pairs.len()).rev() {
            let r = rng.gen_range(0..=k);
            pairs.swap(k, r);
        }
        let n_chords = density.div_ceil(2);
        for k in 0..density {
            let base = (van_der_corput(k as u64 + 1, 2) + shift).fract();
            if k < n_chords {
                let (a, b) = pairs[k % pairs.len()];
                let lam = 0.1 + 0.8 * base;
                combos.push(vec![(a, 1.0 - lam), (b, lam)]);
            } else {
                let mut w: Vec<f64> = (0..n_raw)
                    .map(|d| {
                        let prime = PRIMES[d % PRIMES.len()];
                        let u = (van_der_corput(k as u64 + 1, prime) + shift * (d as f64 + 1.0)).fract();
                        -(1.0 - u).max(1e-12).ln()
                    })
                    .collect();
                let total: f64 = w.iter().sum();
                w.iter_mut().for_each(|x| *x /= total);
                combos.push(w.into_iter().enumerate().collect());
            }
        }
        Self { n_raw, combos }
    }
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn van_der_corput(mut k: u64, base: u64) -> f64 {
    let mut q = 0.0;
    let mut bk = 1.0 / base as f64;
    while k > 0 {
        q += (k % base) as f64 * bk;
        k /= base;
        bk /= base as f64;
    }
    q
}

/// Raw velocities followed by convex-combination samples, flattened.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocitySet {
    pub n: usize,
    pub n_raw: usize,
    /// raw velocities first, then hull combos; each `n` numbers.
    pub hull: Vec<f64>,
}

impl VelocitySet {
    pub fn from_raw(n: usize, raw: Vec<f64>, weights: &HullWeights) -> Self {
        let n_raw = raw.len() / n;
        let mut hull = raw;
        hull.reserve(weights.combos.len() * n);
        for combo in &weights.combos {
            let mut w = vec![0.0; n];
            for &(idx, lam) in combo {
                for d in 0..n {
                    w[d] += lam * hull[idx * n + d];
                }
            }
            hull.extend_from_slice(&w);
        }
        Self { n, n_raw, hull }
    }

    pub fn len(&self) -> usize {
        self.hull.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.hull.is_empty()
    }

    pub fn raw(&self) -> impl Iterator<Item = &[f64]> {
        self.hull[..self.n_raw * self.n].chunks(self.n)
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.hull.chunks(self.n)
    }

    pub fn get(&self, k: usize) -> &[f64] {
        &self.hull[k * self.n..(k + 1) * self.n]
    }
}
