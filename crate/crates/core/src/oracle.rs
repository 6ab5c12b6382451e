//! Closed forms for the example game x' = u, y' = v on [0, 1] with
//! u, v in [-1, 1], payoff1 = -|x - y| and payoff2 = y.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::game::Player;
use crate::grid::Grid;
use crate::nash::{NashMap, Segment};
use crate::smooth::{CandidatePair, ScalarField, Smoothness};
use crate::value::{FieldLabel, ValueField};

/// Parameter of the upper-solution family, spread in [0, 2].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleConfig {
    spread: f64,
}

impl OracleConfig {
    pub fn new(spread: f64) -> Result<Self> {
        if !(0.0..=2.0).contains(&spread) {
            return Err(Error::Precondition(format!("spread must lie in [0, 2], got {spread}")));
        }
        Ok(Self { spread })
    }

    pub fn spread(&self) -> f64 {
        self.spread
    }
}

pub fn lower1_exact(_t: f64, x: f64, y: f64) -> f64 {
    -(x - y).abs()
}

pub fn lower2_exact(t: f64, _x: f64, y: f64) -> f64 {
    y + (1.0 - t)
}

pub fn coop_max_exact(which: Player, t: f64, x: f64, y: f64) -> f64 {
    match which {
        Player::First => (-(x - y).abs() + 2.0 * (1.0 - t)).min(0.0),
        Player::Second => y + (1.0 - t),
    }
}

/// Singleton for y >= x, horizontal segment for y < x.
pub fn nash_set_exact(t: f64, x: f64, y: f64) -> Segment {
    let lo = -(x - y).abs();
    let j2 = y + (1.0 - t);
    if y >= x {
        Segment::point(lo, j2)
    } else {
        Segment {
            j1_lo: lo,
            j1_hi: (lo + 2.0 * (1.0 - t)).min(0.0),
            j2,
        }
    }
}

pub fn minimax_exact(t: f64, x: f64, y: f64) -> (f64, f64) {
    let p1 = if x <= y {
        x - y
    } else if -x + y + 2.0 * (1.0 - t) < 0.0 {
        -x + y + 2.0 * (1.0 - t)
    } else {
        0.0
    };
    (p1, y + (1.0 - t))
}

pub fn family_exact(cfg: OracleConfig, t: f64, x: f64, y: f64) -> (f64, f64) {
    let c1 = if y >= x {
        -(x - y).abs()
    } else {
        (-(x - y).abs() + cfg.spread * (1.0 - t)).min(0.0)
    };
    (c1, y + (1.0 - t))
}

/// A piece of a generalized gradient set in (a, s_x, s_y) coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SubdiffPiece {
    Point([f64; 3]),
    /// Segment {(1 - lambda) from + lambda to : lambda in [0, 1]}.
    Segment { from: [f64; 3], to: [f64; 3] },
}

impl SubdiffPiece {
    pub fn dist_l2(&self, p: [f64; 3]) -> f64 {
        let d = |a: [f64; 3], b: [f64; 3]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
        match *self {
            SubdiffPiece::Point(q) => d(p, q),
            SubdiffPiece::Segment { from, to } => {
                let e = [to[0] - from[0], to[1] - from[1], to[2] - from[2]];
                let len2 = e[0] * e[0] + e[1] * e[1] + e[2] * e[2];
                if len2 == 0.0 {
                    return d(p, from);
                }
                let lam = (((p[0] - from[0]) * e[0] + (p[1] - from[1]) * e[1] + (p[2] - from[2]) * e[2]) / len2).clamp(0.0, 1.0);
                d(p, [from[0] + lam * e[0], from[1] + lam * e[1], from[2] + lam * e[2]])
            }
        }
    }
}

/// Distance from a sample to a union of pieces.
pub fn dist_to_pieces(pieces: &[SubdiffPiece], p: [f64; 3]) -> f64 {
    pieces.iter().map(|q| q.dist_l2(p)).fold(f64::INFINITY, f64::min)
}

/// Generalized gradient of the first family component: the gradient off the kink planes, the
/// hull of the two one-sided gradients on x = y and on x = y + spread(1-t).
/// Points within `tol` of a plane count as on it.
pub fn subdifferential_exact(cfg: OracleConfig, t: f64, x: f64, y: f64, tol: f64) -> Vec<SubdiffPiece> {
    let g = cfg.spread;
    let e = x - y;
    let band = g * (1.0 - t);
    let on_diag = e.abs() <= tol;
    let on_cap = (e - band).abs() <= tol;
    let mut out = Vec::new();
    if on_diag {
        out.push(SubdiffPiece::Segment {
            from: [0.0, 0.0, 0.0],
            to: [0.0, 1.0, -1.0],
        });
    }
    if on_cap {
        out.push(SubdiffPiece::Segment {
            from: [0.0, 0.0, 0.0],
            to: [-g, -1.0, 1.0],
        });
    }
    if on_diag && on_cap {
        // both planes meet: the inner band is empty and c1 = -|x - y| nearby
        out.push(SubdiffPiece::Segment {
            from: [0.0, 1.0, -1.0],
            to: [-g, -1.0, 1.0],
        });
    }
    if !out.is_empty() {
        return out;
    }
    if e < 0.0 {
        vec![SubdiffPiece::Point([0.0, 1.0, -1.0])]
    } else if e < band {
        vec![SubdiffPiece::Point([0.0, 0.0, 0.0])]
    } else {
        vec![SubdiffPiece::Point([-g, -1.0, 1.0])]
    }
}

pub fn subdifferential_c2_exact() -> Vec<SubdiffPiece> {
    vec![SubdiffPiece::Point([-1.0, 0.0, 1.0])]
}

/// Velocity (1 - d, 1) along which the family's modulus derivative vanishes.
pub fn tie_direction_exact(cfg: OracleConfig, t: f64, x: f64, y: f64) -> [f64; 2] {
    if y >= x {
        return [1.0, 1.0];
    }
    let g = (x - y).abs();
    let rest = 1.0 - t;
    let d = if rest <= 0.0 { cfg.spread } else { (g / rest).min(cfg.spread) };
    [1.0 - d, 1.0]
}

/// Exact payoff map on a grid: segments sampled at `quantum`, terminal slice holding the terminal payoffs.
pub fn example_oracle_map(grid: &Grid, quantum: f64) -> Result<NashMap> {
    if grid.dim() != 2 {
        return Err(Error::Precondition("the example map needs a 2-d grid".into()));
    }
    NashMap::from_fn(grid, quantum, 1.0 + std::f64::consts::SQRT_2, |k, node| {
        let t = grid.time(k);
        let p = grid.node_coords(node);
        if k == grid.time_steps() {
            vec![[-(p[0] - p[1]).abs(), p[1]]]
        } else {
            nash_set_exact(t, p[0], p[1]).sample(quantum)
        }
    })
}

/// Exact (lower1, lower2, coop1, coop2) fields on a grid.
pub fn example_fields(grid: &Grid) -> [ValueField; 4] {
    [
        ValueField::from_fn(grid, FieldLabel::Lower1, |t, p| lower1_exact(t, p[0], p[1])),
        ValueField::from_fn(grid, FieldLabel::Lower2, |t, p| lower2_exact(t, p[0], p[1])),
        ValueField::from_fn(grid, FieldLabel::Coop1, |t, p| coop_max_exact(Player::First, t, p[0], p[1])),
        ValueField::from_fn(grid, FieldLabel::Coop2, |t, p| coop_max_exact(Player::Second, t, p[0], p[1])),
    ]
}

/// Closed-form fields of the example as candidate components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExampleField {
    /// First component of the family; spread = 2 is the maximal payoff.
    Family1(OracleConfig),
    /// y + (1 - t), shared by the second component, lower2 and c2_plus.
    Second,
    Lower1,
}

/// Points within this distance of a kink plane count as non-smooth.
const KINK_BAND: f64 = 1e-2;

impl ExampleField {
    /// Signed distances (in x - y) to the kink planes.
    fn kinks(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let e = x[0] - x[1];
        match *self {
            ExampleField::Family1(c) => vec![e, e - c.spread * (1.0 - t)],
            ExampleField::Lower1 => vec![e],
            ExampleField::Second => vec![],
        }
    }
}

impl ScalarField for ExampleField {
    fn name(&self) -> String {
        match self {
            ExampleField::Family1(c) => format!("family1({})", c.spread),
            ExampleField::Second => "y+(1-t)".into(),
            ExampleField::Lower1 => "-|x-y|".into(),
        }
    }

    fn value(&self, t: f64, x: &[f64]) -> Result<f64> {
        Ok(match *self {
            ExampleField::Family1(c) => family_exact(c, t, x[0], x[1]).0,
            ExampleField::Second => lower2_exact(t, x[0], x[1]),
            ExampleField::Lower1 => lower1_exact(t, x[0], x[1]),
        })
    }

    fn gradient(&self, t: f64, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let e = x[0] - x[1];
        match *self {
            ExampleField::Second => Some((-1.0, vec![0.0, 1.0])),
            ExampleField::Lower1 if e < 0.0 => Some((0.0, vec![1.0, -1.0])),
            ExampleField::Lower1 if e > 0.0 => Some((0.0, vec![-1.0, 1.0])),
            ExampleField::Family1(_) if e < 0.0 => Some((0.0, vec![1.0, -1.0])),
            ExampleField::Family1(c) if e > c.spread * (1.0 - t) => Some((-c.spread, vec![-1.0, 1.0])),
            ExampleField::Family1(c) if e > 0.0 && e < c.spread * (1.0 - t) => Some((0.0, vec![0.0, 0.0])),
            _ => None,
        }
    }

    fn smooth_at(&self, t: f64, x: &[f64]) -> Option<bool> {
        Some(self.kinks(t, x).iter().all(|d| d.abs() > KINK_BAND))
    }
}

/// Family pair with the given spread.
pub fn family_pair(cfg: OracleConfig) -> CandidatePair {
    CandidatePair::new(
        format!("family({})", cfg.spread),
        Arc::new(ExampleField::Family1(cfg)),
        Arc::new(ExampleField::Second),
        Smoothness::Piecewise,
    )
}

/// The maximal pair (minimax1, minimax2) = (c1^2, c2^2).
pub fn minimax_pair() -> CandidatePair {
    let mut p = family_pair(OracleConfig { spread: 2.0 });
    p.name = "minimax".into();
    p
}

/// The lower values (lower1, lower2) as a pair.
pub fn lower_pair() -> CandidatePair {
    CandidatePair::new("lower", Arc::new(ExampleField::Lower1), Arc::new(ExampleField::Second), Smoothness::Piecewise)
}

/// Seeded points on the planes x = y and x = y + spread(1 - t), alternating,
/// with t in [0, t_hi] and y in [-1, 1].
pub fn kink_plane_points(cfg: OracleConfig, count: usize, t_hi: f64, seed: u64) -> Vec<(f64, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let t = rng.gen_range(0.0..=t_hi);
            let y = rng.gen_range(-1.0..=1.0);
            let x = if i % 2 == 0 { y } else { y + cfg.spread * (1.0 - t) };
            (t, vec![x, y])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values() {
        assert_eq!((lower1_exact(0.0, 0.0, 0.0), lower2_exact(0.0, 0.0, 0.0)), (0.0, 1.0));
        assert_eq!((lower1_exact(1.0, 2.0, 2.0), lower2_exact(1.0, 2.0, 2.0)), (0.0, 2.0));
        assert_eq!((lower1_exact(0.5, 1.0, -1.0), lower2_exact(0.5, 1.0, -1.0)), (-2.0, -0.5));
        assert_eq!(coop_max_exact(Player::First, 0.0, 3.0, 0.0), -1.0);
        assert_eq!(coop_max_exact(Player::First, 1.0, 0.3, 1.1), -(0.3f64 - 1.1).abs());
        assert_eq!(coop_max_exact(Player::Second, 0.25, 7.0, 0.5), 1.25);
    }

    #[test]
    fn nash_sets() {
        assert_eq!(nash_set_exact(0.5, 0.0, 1.0), Segment::point(-1.0, 1.5));
        let s = nash_set_exact(1.0, 0.7, 0.2);
        assert!(s.is_point());
        assert_eq!([s.j1_lo, s.j2], [-(0.7f64 - 0.2).abs(), 0.2]);
        assert_eq!(nash_set_exact(0.0, 1.0, 0.0), Segment { j1_lo: -1.0, j1_hi: 0.0, j2: 1.0 });
    }

    #[test]
    fn minimax_and_family() {
        assert_eq!(minimax_exact(0.0, 2.0, 0.0).0, 0.0);
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(minimax_exact(t, 0.4, 0.4).0, 0.0);
        }
        let g0 = OracleConfig::new(0.0).unwrap();
        assert_eq!(family_exact(g0, 0.0, 2.0, 0.0).0, -2.0);
        assert!(OracleConfig::new(2.5).is_err());
    }

    #[test]
    fn subdifferential_table() {
        let c = OracleConfig::new(1.0).unwrap();
        assert_eq!(subdifferential_exact(c, 0.0, 0.0, 1.0, 1e-12), vec![SubdiffPiece::Point([0.0, 1.0, -1.0])]);
        assert_eq!(subdifferential_exact(c, 0.0, 0.5, 0.0, 1e-12), vec![SubdiffPiece::Point([0.0, 0.0, 0.0])]);
        assert_eq!(subdifferential_exact(c, 0.0, 2.0, 0.0, 1e-12), vec![SubdiffPiece::Point([-1.0, -1.0, 1.0])]);
        let seg = subdifferential_exact(c, 0.2, 0.3, 0.3, 1e-12);
        assert_eq!(seg.len(), 1);
        assert!(dist_to_pieces(&seg, [0.0, 0.4, -0.4]) < 1e-15);
        assert!(dist_to_pieces(&seg, [0.0, -0.4, 0.4]) > 0.5);
        let cap = subdifferential_exact(c, 0.5, 0.5, 0.0, 1e-12);
        assert!(dist_to_pieces(&cap, [-0.5, -0.5, 0.5]) < 1e-15);
    }

    #[test]
    fn tie_directions() {
        let c2 = OracleConfig::new(2.0).unwrap();
        assert_eq!(tie_direction_exact(c2, 0.3, 0.0, 0.5), [1.0, 1.0]);
        assert_eq!(tie_direction_exact(c2, 0.0, 3.0, 0.0), [-1.0, 1.0]);
        let c1 = OracleConfig::new(1.0).unwrap();
        let w = tie_direction_exact(c1, 0.5, 0.25, 0.0);
        assert!((w[0] - 0.5).abs() < 1e-15);
    }
}
