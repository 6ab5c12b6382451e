use crate::error::{Error, Result};

pub type PayoffPair = [f64; 2];

#[inline]
pub fn l1(a: PayoffPair, b: PayoffPair) -> f64 {
    (a[0] - b[0]).abs() + (a[1] - b[1]).abs()
}

/// Orders by (J2, J1), the storage order of every cloud.
#[inline]
pub fn cmp_pair(a: &PayoffPair, b: &PayoffPair) -> std::cmp::Ordering {
    a[1].total_cmp(&b[1]).then(a[0].total_cmp(&b[0]))
}

/// inf over the points of |z1 - J1| + |z2 - J2|.
pub fn dist_l1_points(j: PayoffPair, points: &[PayoffPair]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(points.iter().map(|&p| l1(j, p)).fold(f64::INFINITY, f64::min))
}

/// l1 distance from `j` to the union of boxes of half-width `r` around the points.
#[inline]
pub fn box_dist(j: PayoffPair, points: &[PayoffPair], r: f64) -> f64 {
    let mut best = f64::INFINITY;
    for p in points {
        let d = ((j[0] - p[0]).abs() - r).max(0.0) + ((j[1] - p[1]).abs() - r).max(0.0);
        if d < best {
            best = d;
            if d == 0.0 {
                break;
            }
        }
    }
    best
}

/// Symmetric Hausdorff distance between two finite sets in the l1 metric.
pub fn hausdorff_l1(a: &[PayoffPair], b: &[PayoffPair]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let one = |x: &[PayoffPair], y: &[PayoffPair]| {
        x.iter()
            .map(|&p| y.iter().map(|&q| l1(p, q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    Ok(one(a, b).max(one(b, a)))
}

/// Horizontal payoff segment [j1_lo, j1_hi] x {j2}; a point when lo == hi.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub j1_lo: f64,
    pub j1_hi: f64,
    pub j2: f64,
}

impl Segment {
    pub fn point(j1: f64, j2: f64) -> Self {
        Self { j1_lo: j1, j1_hi: j1, j2 }
    }

    pub fn is_point(&self) -> bool {
        self.j1_lo == self.j1_hi
    }

    pub fn dist_from(&self, p: PayoffPair) -> f64 {
        let dx = if p[0] < self.j1_lo {
            self.j1_lo - p[0]
        } else if p[0] > self.j1_hi {
            p[0] - self.j1_hi
        } else {
            0.0
        };
        dx + (p[1] - self.j2).abs()
    }

    /// Exact Hausdorff-l1 distance between the segment and a finite set.
    pub fn hausdorff_l1(&self, points: &[PayoffPair]) -> Result<f64> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let into = points.iter().map(|&p| self.dist_from(p)).fold(0.0, f64::max);
        // s -> min_p |s - p1| + |j2 - p2| is a lower envelope of V shapes, its
        // maximum over the segment sits at an endpoint or a crossing of two Vs.
        let env = |s: f64| {
            points
                .iter()
                .map(|p| (s - p[0]).abs() + (self.j2 - p[1]).abs())
                .fold(f64::INFINITY, f64::min)
        };
        let mut out_of = env(self.j1_lo).max(env(self.j1_hi));
        for (i, a) in points.iter().enumerate() {
            let ea = (self.j2 - a[1]).abs();
            for b in &points[i + 1..] {
                let eb = (self.j2 - b[1]).abs();
                let (lo, hi, elo, ehi) = if a[0] <= b[0] { (a[0], b[0], ea, eb) } else { (b[0], a[0], eb, ea) };
                let s = 0.5 * (lo + hi + ehi - elo);
                if s > self.j1_lo && s < self.j1_hi {
                    out_of = out_of.max(env(s));
                }
            }
        }
        Ok(into.max(out_of))
    }

    /// Lattice multiples of `quantum` inside the segment plus both endpoints;
    /// lattice points closer than quantum/2 to an endpoint are dropped.
    pub fn sample(&self, quantum: f64) -> Vec<PayoffPair> {
        if self.is_point() {
            return vec![[self.j1_lo, self.j2]];
        }
        let mut out = vec![[self.j1_lo, self.j2]];
        let first = (self.j1_lo / quantum).ceil() as i64;
        let last = (self.j1_hi / quantum).floor() as i64;
        for i in first..=last {
            let v = i as f64 * quantum;
            if v - self.j1_lo >= 0.5 * quantum && self.j1_hi - v >= 0.5 * quantum {
                out.push([v, self.j2]);
            }
        }
        out.push([self.j1_hi, self.j2]);
        out
    }
}

/// Finite payoff set at one node, deduplicated at the quantum.
#[derive(Clone, Debug, PartialEq)]
pub struct PayoffCloud {
    points: Vec<PayoffPair>,
    quantum: f64,
}

impl PayoffCloud {
    /// Sorts by (J2, J1) and greedily drops points closer than quantum/2
    /// (l1) to an already kept point.
    pub fn new(mut points: Vec<PayoffPair>, quantum: f64) -> Self {
        points.sort_by(cmp_pair);
        let half = 0.5 * quantum;
        let mut kept: Vec<PayoffPair> = Vec::with_capacity(points.len());
        for p in points {
            let clash = kept.iter().rev().take_while(|k| p[1] - k[1] < half).any(|&k| l1(p, k) < half);
            if !clash {
                kept.push(p);
            }
        }
        Self { points: kept, quantum }
    }

    pub fn points(&self) -> &[PayoffPair] {
        &self.points
    }
    pub fn quantum(&self) -> f64 {
        self.quantum
    }
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dist_l1(&self, j: PayoffPair) -> Result<f64> {
        dist_l1_points(j, &self.points)
    }

    pub fn diameter_l1(&self) -> f64 {
        let mut d = 0.0f64;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                d = d.max(l1(*a, *b));
            }
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dist_examples() {
        let c = PayoffCloud::new(vec![[1.0, 2.0]], 0.01);
        assert_eq!(c.dist_l1([1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(c.dist_l1([0.0, 0.0]).unwrap(), 3.0);
        let c = PayoffCloud::new(vec![[1.0, 0.0], [0.0, 2.0]], 0.01);
        assert_eq!(c.dist_l1([0.0, 0.0]).unwrap(), 1.0);
        assert!(matches!(PayoffCloud::new(vec![], 0.1).dist_l1([0.0, 0.0]), Err(Error::EmptyCloud)));
    }

    #[test]
    fn dedup_invariant() {
        let c = PayoffCloud::new(vec![[0.0, 0.0], [0.01, 0.0], [0.0, 0.02], [0.1, 0.0], [0.06, 0.0]], 0.1);
        for (i, a) in c.points().iter().enumerate() {
            for b in &c.points()[i + 1..] {
                assert!(l1(*a, *b) >= 0.05, "{a:?} {b:?}");
            }
        }
        assert!(c.points().contains(&[0.0, 0.0]));
    }

    #[test]
    fn segment_hausdorff_exact() {
        let s = Segment { j1_lo: -1.0, j1_hi: 0.0, j2: 1.0 };
        let pts = s.sample(0.1);
        assert!(s.hausdorff_l1(&pts).unwrap() <= 0.05 + 1e-12);
        assert_eq!(pts.first().unwrap(), &[-1.0, 1.0]);
        assert_eq!(pts.last().unwrap(), &[0.0, 1.0]);
        // two endpoints only: the midpoint is 0.5 away
        let h = s.hausdorff_l1(&[[-1.0, 1.0], [0.0, 1.0]]).unwrap();
        assert!((h - 0.5).abs() < 1e-12);
        // vertical offset adds
        let h = s.hausdorff_l1(&[[-1.0, 1.1], [0.0, 1.1]]).unwrap();
        assert!((h - 0.6).abs() < 1e-12);
        // dense brute force agrees
        let pts = vec![[-0.9, 1.02], [-0.3, 0.95], [0.2, 1.0]];
        let brute = (0..=10000)
            .map(|i| {
                let sx = -1.0 + i as f64 * 1e-4;
                pts.iter().map(|p| l1([sx, 1.0], *p)).fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
            .max(pts.iter().map(|p| s.dist_from(*p)).fold(0.0, f64::max));
        assert!((s.hausdorff_l1(&pts).unwrap() - brute).abs() < 1e-3);
    }

    #[test]
    fn point_segment_matches_finite_hausdorff() {
        let s = Segment::point(0.5, 0.25);
        let pts = vec![[0.5, 0.3], [0.4, 0.25]];
        assert!((s.hausdorff_l1(&pts).unwrap() - hausdorff_l1(&[[0.5, 0.25]], &pts).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn box_distance() {
        assert_eq!(box_dist([0.0, 0.0], &[[0.04, 0.04]], 0.05), 0.0);
        assert!((box_dist([0.0, 0.0], &[[0.5, 0.0]], 0.05) - 0.45).abs() < 1e-15);
    }
}
