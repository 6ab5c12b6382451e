use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::motion::Trajectory;
use crate::error::{Error, Result};
use crate::game::{GameSpec, Player};
use crate::grid::Grid;
use crate::value::ValueField;

/// Control choice as an index into the player's sample list.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Decision {
    pub index: usize,
    pub punishing: bool,
}

impl Decision {
    pub fn plain(index: usize) -> Self {
        Self { index, punishing: false }
    }
}

/// Positional control law u(t, x, eps).
pub trait ControlLaw: Send + Sync {
    fn name(&self) -> String;
    fn control(&self, spec: &GameSpec, who: Player, t: f64, x: &[f64], eps: f64) -> Result<Decision>;
}

/// Control index per (slice, node), looked up at the nearest slice and node.
#[derive(Clone, Debug)]
pub struct ControlTable {
    pub grid: Grid,
    pub indices: Vec<usize>,
}

impl ControlTable {
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, &[f64]) -> usize) -> Self {
        let mut indices = Vec::with_capacity(grid.n_slices() * grid.n_nodes());
        for k in 0..grid.n_slices() {
            for node in 0..grid.n_nodes() {
                indices.push(f(grid.time(k), &grid.node_coords(node)));
            }
        }
        Self { grid: grid.clone(), indices }
    }

    pub fn lookup(&self, t: f64, x: &[f64]) -> usize {
        let k = self.grid.nearest_slice(t);
        self.indices[k * self.grid.n_nodes() + self.grid.nearest_node(x)]
    }
}

/// Detection threshold for leaving the agreed path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Eta {
    Fixed(f64),
    /// 2 * speed * eps + cell diameter.
    Auto { speed: f64, cell: f64 },
}

impl Eta {
    pub fn at(&self, eps: f64) -> f64 {
        match *self {
            Eta::Fixed(e) => e,
            Eta::Auto { speed, cell } => 2.0 * speed * eps + cell,
        }
    }
}

/// Follow the agreed controls while within eta of the agreed path,
/// otherwise hold the opponent's lower value down one lookahead step ahead.
#[derive(Clone, Debug)]
pub struct PunishmentStrategy {
    pub agreed: Arc<Trajectory>,
    pub eta: Eta,
    /// Lower value of the opponent (lower2 when player I punishes).
    pub punish_field: Arc<ValueField>,
    pub lookahead: f64,
}

/// One-step lookahead value of `field` after playing (i, j) from (t, x).
pub fn lookahead_value(spec: &GameSpec, field: &ValueField, t: f64, x: &[f64], i: usize, j: usize, h: f64, buf: &mut [f64]) -> Result<f64> {
    let n = spec.state_dim;
    let mut f = vec![0.0; n];
    spec.velocity_into(t, x, i, j, &mut f);
    let th = (t + h).min(spec.theta0);
    let dt = th - t;
    for d in 0..n {
        buf[d] = x[d] + dt * f[d];
    }
    field.query_value(th, buf)
}

/// Own index optimizing `reduce` over the opponent's samples of the lookahead
/// value; `minimize` selects argmin instead of argmax. Lowest index wins ties.
fn lookahead_choice(spec: &GameSpec, who: Player, field: &ValueField, t: f64, x: &[f64], h: f64, opp_max: bool, minimize: bool) -> Result<usize> {
    let (own, opp) = (spec.controls(who).len(), spec.controls(who.other()).len());
    let mut buf = vec![0.0; spec.state_dim];
    let mut best = (0, f64::NAN);
    for a in 0..own {
        let mut agg = if opp_max { f64::NEG_INFINITY } else { f64::INFINITY };
        for b in 0..opp {
            let (i, j) = if who == Player::First { (a, b) } else { (b, a) };
            let v = lookahead_value(spec, field, t, x, i, j, h, &mut buf)?;
            agg = if opp_max { agg.max(v) } else { agg.min(v) };
        }
        let better = if minimize { agg < best.1 - 1e-12 } else { agg > best.1 + 1e-12 };
        if best.1.is_nan() || better {
            best = (a, agg);
        }
    }
    Ok(best.0)
}

impl PunishmentStrategy {
    pub fn agreed_control(&self, who: Player, t: f64) -> usize {
        let c = self.agreed.controls[self.agreed.interval_at(t)];
        if who == Player::First {
            c.0
        } else {
            c.1
        }
    }

    pub fn off_path(&self, t: f64, x: &[f64], eps: f64) -> bool {
        let mut a = vec![0.0; x.len()];
        self.agreed.state_at(t, &mut a);
        let d = a.iter().zip(x).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        d > self.eta.at(eps)
    }

    /// The punisher minimizes the worst case (over the opponent) of the opponent's lower value.
    pub fn punishing_control(&self, spec: &GameSpec, who: Player, t: f64, x: &[f64]) -> Result<usize> {
        lookahead_choice(spec, who, &self.punish_field, t, x, self.lookahead, true, true)
    }
}

/// Own control maximizing a field one step ahead, with the opponent
/// either cooperating (max) or adversarial (min).
#[derive(Clone, Debug)]
pub struct GreedyLookahead {
    pub field: Arc<ValueField>,
    pub step: f64,
    pub cooperative: bool,
}

impl ControlLaw for GreedyLookahead {
    fn name(&self) -> String {
        format!("greedy-{}({})", if self.cooperative { "selfish" } else { "security" }, self.field.label().as_str())
    }
    fn control(&self, spec: &GameSpec, who: Player, t: f64, x: &[f64], _eps: f64) -> Result<Decision> {
        Ok(Decision::plain(lookahead_choice(spec, who, &self.field, t, x, self.step, self.cooperative, false)?))
    }
}

/// `first` before `switch_at`, `second` from then on.
#[derive(Clone, Copy, Debug)]
pub struct BangBang {
    pub first: usize,
    pub second: usize,
    pub switch_at: f64,
}

impl ControlLaw for BangBang {
    fn name(&self) -> String {
        format!("bang-bang({}->{} at t={})", self.first, self.second, self.switch_at)
    }
    fn control(&self, _spec: &GameSpec, _who: Player, t: f64, _x: &[f64], _eps: f64) -> Result<Decision> {
        Ok(Decision::plain(if t < self.switch_at { self.first } else { self.second }))
    }
}

/// Agreed controls before `switch_at`, a constant afterwards.
#[derive(Clone, Debug)]
pub struct AgreedThenConstant {
    pub agreed: Arc<Trajectory>,
    pub switch_at: f64,
    pub control: usize,
}

impl ControlLaw for AgreedThenConstant {
    fn name(&self) -> String {
        format!("agreed-then-{}(t={})", self.control, self.switch_at)
    }
    fn control(&self, _spec: &GameSpec, who: Player, t: f64, _x: &[f64], _eps: f64) -> Result<Decision> {
        if t >= self.switch_at {
            return Ok(Decision::plain(self.control));
        }
        let c = self.agreed.controls[self.agreed.interval_at(t)];
        Ok(Decision::plain(if who == Player::First { c.0 } else { c.1 }))
    }
}

/// Pseudo-random control drawn from (seed, t); reproducible.
#[derive(Clone, Copy, Debug)]
pub struct RandomControl {
    pub seed: u64,
}

impl ControlLaw for RandomControl {
    fn name(&self) -> String {
        format!("random({})", self.seed)
    }
    fn control(&self, spec: &GameSpec, who: Player, t: f64, _x: &[f64], _eps: f64) -> Result<Decision> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ t.to_bits().rotate_left(17));
        Ok(Decision::plain(rng.gen_range(0..spec.controls(who).len())))
    }
}

#[derive(Clone)]
pub enum FeedbackStrategy {
    Constant(usize),
    Table(Arc<ControlTable>),
    Punishment(Arc<PunishmentStrategy>),
    Custom(Arc<dyn ControlLaw>),
}

impl fmt::Debug for FeedbackStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FeedbackStrategy {
    pub fn name(&self) -> String {
        match self {
            FeedbackStrategy::Constant(i) => format!("constant({i})"),
            FeedbackStrategy::Table(_) => "table".into(),
            FeedbackStrategy::Punishment(_) => "profile".into(),
            FeedbackStrategy::Custom(c) => c.name(),
        }
    }

    pub fn decide(&self, spec: &GameSpec, who: Player, t: f64, x: &[f64], eps: f64) -> Result<Decision> {
        let d = match self {
            FeedbackStrategy::Constant(i) => Decision::plain(*i),
            FeedbackStrategy::Table(tab) => Decision::plain(tab.lookup(t, x)),
            FeedbackStrategy::Punishment(p) => {
                if p.off_path(t, x, eps) {
                    Decision {
                        index: p.punishing_control(spec, who, t, x)?,
                        punishing: true,
                    }
                } else {
                    Decision::plain(p.agreed_control(who, t))
                }
            }
            FeedbackStrategy::Custom(c) => c.control(spec, who, t, x, eps)?,
        };
        let n = spec.controls(who).len();
        if d.index >= n {
            return Err(Error::Strategy(format!(
                "{} chose control {} for player {:?}, which has {n} samples",
                self.name(),
                d.index,
                who
            )));
        }
        Ok(d)
    }
}
