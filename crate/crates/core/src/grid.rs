//! Space-time tensor grid and multilinear interpolation stencils.

use crate::error::{Error, Result};
use crate::game::GameSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BoundaryPolicy {
    /// Project queries onto the grid box.
    #[default]
    Clamp,
    /// Queries outside the box are domain errors.
    Strict,
}

impl std::str::FromStr for BoundaryPolicy {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "clamp" => Ok(Self::Clamp),
            "strict" => Ok(Self::Strict),
            _ => Err(format!("unknown boundary policy `{s}` (clamp|strict)")),
        }
    }
}

const SNAP: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    t0: f64,
    theta0: f64,
    time_steps: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    nodes: Vec<usize>,
    h: Vec<f64>,
    strides: Vec<usize>,
    total: usize,
}

impl Grid {
    pub fn new(t0: f64, theta0: f64, time_steps: usize, lo: Vec<f64>, hi: Vec<f64>, nodes: Vec<usize>) -> Result<Self> {
        if time_steps == 0 || !(t0 < theta0) {
            return Err(Error::InvalidGrid(format!(
                "need time_steps >= 1 and t0 < theta0 (got {time_steps}, [{t0}, {theta0}])"
            )));
        }
        if lo.is_empty() || lo.len() != hi.len() || lo.len() != nodes.len() {
            return Err(Error::InvalidGrid("lo, hi and nodes must have equal nonzero length".into()));
        }
        for d in 0..lo.len() {
            if !(lo[d] < hi[d]) || nodes[d] < 2 {
                return Err(Error::InvalidGrid(format!(
                    "dimension {d}: need lo < hi and >= 2 nodes (got [{}, {}], {})",
                    lo[d], hi[d], nodes[d]
                )));
            }
        }
        let h = (0..lo.len()).map(|d| (hi[d] - lo[d]) / (nodes[d] - 1) as f64).collect();
        let mut strides = vec![1; nodes.len()];
        for d in (0..nodes.len().saturating_sub(1)).rev() {
            strides[d] = strides[d + 1] * nodes[d + 1];
        }
        let total = nodes.iter().product();
        Ok(Self {
            t0,
            theta0,
            time_steps,
            lo,
            hi,
            nodes,
            h,
            strides,
            total,
        })
    }

    /// Grid over the game's horizon.
    pub fn for_game(spec: &GameSpec, time_steps: usize, lo: Vec<f64>, hi: Vec<f64>, nodes: Vec<usize>) -> Result<Self> {
        if lo.len() != spec.state_dim {
            return Err(Error::InvalidGrid(format!(
                "grid has {} dimensions but the game state has {}",
                lo.len(),
                spec.state_dim
            )));
        }
        Self::new(spec.t0, spec.theta0, time_steps, lo, hi, nodes)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }
    pub fn t0(&self) -> f64 {
        self.t0
    }
    pub fn theta0(&self) -> f64 {
        self.theta0
    }
    pub fn time_steps(&self) -> usize {
        self.time_steps
    }
    pub fn n_slices(&self) -> usize {
        self.time_steps + 1
    }
    pub fn dt(&self) -> f64 {
        (self.theta0 - self.t0) / self.time_steps as f64
    }
    pub fn time(&self, k: usize) -> f64 {
        if k == self.time_steps {
            self.theta0
        } else {
            self.t0 + k as f64 * self.dt()
        }
    }
    pub fn lo(&self) -> &[f64] {
        &self.lo
    }
    pub fn hi(&self) -> &[f64] {
        &self.hi
    }
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }
    pub fn spacing(&self) -> &[f64] {
        &self.h
    }
    pub fn n_nodes(&self) -> usize {
        self.total
    }
    pub fn max_spacing(&self) -> f64 {
        self.h.iter().cloned().fold(0.0, f64::max)
    }
    pub fn cell_diameter(&self) -> f64 {
        self.h.iter().map(|h| h * h).sum::<f64>().sqrt()
    }

    /// Slice index for a time on the grid, within a small relative slack.
    pub fn slice_of(&self, t: f64) -> Result<usize> {
        let r = (t - self.t0) / self.dt();
        let k = r.round();
        if (r - k).abs() > 1e-6 || k < 0.0 || k > self.time_steps as f64 {
            return Err(Error::Domain(format!("time {t} is not a grid slice")));
        }
        Ok(k as usize)
    }

    pub fn nearest_slice(&self, t: f64) -> usize {
        let r = ((t - self.t0) / self.dt()).round();
        r.clamp(0.0, self.time_steps as f64) as usize
    }

    pub fn node_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut m = vec![0; self.dim()];
        for d in 0..self.dim() {
            m[d] = idx / self.strides[d];
            idx %= self.strides[d];
        }
        m
    }

    pub fn coord(&self, d: usize, i: usize) -> f64 {
        if i + 1 == self.nodes[d] {
            self.hi[d]
        } else {
            self.lo[d] + i as f64 * self.h[d]
        }
    }

    pub fn node_coords_into(&self, idx: usize, out: &mut [f64]) {
        let mut rem = idx;
        for d in 0..self.dim() {
            let i = rem / self.strides[d];
            rem %= self.strides[d];
            out[d] = self.coord(d, i);
        }
    }

    pub fn node_coords(&self, idx: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.node_coords_into(idx, &mut out);
        out
    }

    pub fn nearest_node(&self, p: &[f64]) -> usize {
        let mut idx = 0;
        for d in 0..self.dim() {
            let r = ((p[d] - self.lo[d]) / self.h[d]).round();
            let i = r.clamp(0.0, (self.nodes[d] - 1) as f64) as usize;
            idx += i * self.strides[d];
        }
        idx
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        (0..self.dim()).all(|d| {
            let slack = SNAP * self.h[d];
            p[d] >= self.lo[d] - slack && p[d] <= self.hi[d] + slack
        })
    }

    /// Multilinear stencil of `p`: corners with positive weight.
    /// Fractions within 1e-9 of a node snap onto it.
    pub fn stencil_into(&self, p: &[f64], policy: BoundaryPolicy, out: &mut Vec<(usize, f64)>) -> Result<()> {
        out.clear();
        out.push((0, 1.0));
        for d in 0..self.dim() {
            let mut r = (p[d] - self.lo[d]) / self.h[d];
            let top = (self.nodes[d] - 1) as f64;
            if !r.is_finite() {
                return Err(Error::Domain(format!("non-finite query coordinate {}", p[d])));
            }
            if r < -SNAP || r > top + SNAP {
                if policy == BoundaryPolicy::Strict {
                    return Err(Error::Domain(format!(
                        "query {:?} leaves the grid in dimension {d} ([{}, {}])",
                        p, self.lo[d], self.hi[d]
                    )));
                }
                r = r.clamp(0.0, top);
            }
            let mut i = r.floor();
            let mut f = r - i;
            if f > 1.0 - SNAP {
                i += 1.0;
                f = 0.0;
            } else if f < SNAP {
                f = 0.0;
            }
            let i = (i.max(0.0) as usize).min(self.nodes[d] - 1);
            let s = self.strides[d];
            if f == 0.0 {
                for c in out.iter_mut() {
                    c.0 += i * s;
                }
            } else {
                let len = out.len();
                for c in 0..len {
                    let (base, w) = out[c];
                    out[c] = (base + i * s, w * (1.0 - f));
                    out.push((base + (i + 1) * s, w * f));
                }
            }
        }
        Ok(())
    }

    pub fn stencil(&self, p: &[f64], policy: BoundaryPolicy) -> Result<Vec<(usize, f64)>> {
        let mut out = Vec::with_capacity(1 << self.dim());
        self.stencil_into(p, policy, &mut out)?;
        Ok(out)
    }

    /// Multilinear interpolation of one slice of nodal values.
    pub fn interpolate(&self, slice: &[f64], p: &[f64], policy: BoundaryPolicy) -> Result<f64> {
        let mut st = Vec::with_capacity(1 << self.dim());
        self.stencil_into(p, policy, &mut st)?;
        Ok(st.iter().map(|&(i, w)| w * slice[i]).sum())
    }

    /// Corners of the grid box plus its center, used for speed bounds.
    pub fn probe_states(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut out = Vec::with_capacity((1 << n) + 1);
        for mask in 0..(1usize << n) {
            out.push((0..n).map(|d| if mask >> d & 1 == 1 { self.hi[d] } else { self.lo[d] }).collect());
        }
        out.push((0..n).map(|d| 0.5 * (self.lo[d] + self.hi[d])).collect());
        out
    }

    /// Largest slice stride s with s*dt*vmax_d <= h_d in every dimension.
    pub fn auto_stride(&self, spec: &GameSpec) -> usize {
        let times = [self.t0, 0.5 * (self.t0 + self.theta0), self.theta0];
        let vmax = spec.speed_bounds(&times, &self.probe_states());
        let mut s = usize::MAX;
        for d in 0..self.dim() {
            if vmax[d] > 0.0 {
                let c = (self.h[d] / (self.dt() * vmax[d]) + 1e-9).floor();
                s = s.min(c.max(1.0) as usize);
            }
        }
        if s == usize::MAX {
            1
        } else {
            s.min(self.time_steps)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Stride {
    #[default]
    Auto,
    Fixed(usize),
}

impl Stride {
    pub fn resolve(self, grid: &Grid, spec: &GameSpec) -> usize {
        match self {
            Stride::Auto => grid.auto_stride(spec),
            Stride::Fixed(s) => s.clamp(1, grid.time_steps()),
        }
    }
}

impl std::str::FromStr for Stride {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(Stride::Auto);
        }
        s.parse::<usize>()
            .ok()
            .filter(|&v| v >= 1)
            .map(Stride::Fixed)
            .ok_or_else(|| format!("stride must be `auto` or a positive integer, got `{s}`"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g2() -> Grid {
        Grid::new(0.0, 1.0, 10, vec![-1.0, -2.0], vec![1.0, 2.0], vec![5, 9]).unwrap()
    }

    #[test]
    fn invalid_grids() {
        assert!(Grid::new(0.0, 1.0, 0, vec![0.0], vec![1.0], vec![2]).is_err());
        assert!(Grid::new(0.0, 1.0, 4, vec![1.0], vec![1.0], vec![2]).is_err());
        assert!(Grid::new(0.0, 1.0, 4, vec![0.0], vec![1.0], vec![1]).is_err());
        assert!(Grid::new(1.0, 0.0, 4, vec![0.0], vec![1.0], vec![3]).is_err());
    }

    #[test]
    fn indices_roundtrip() {
        let g = g2();
        for idx in 0..g.n_nodes() {
            assert_eq!(g.node_index(&g.multi_index(idx)), idx);
        }
        assert_eq!(g.node_coords(g.n_nodes() - 1), vec![1.0, 2.0]);
        assert_eq!(g.node_coords(0), vec![-1.0, -2.0]);
    }

    #[test]
    fn node_query_is_identity() {
        let g = g2();
        let vals: Vec<f64> = (0..g.n_nodes()).map(|i| (i as f64).sin()).collect();
        for idx in 0..g.n_nodes() {
            let p = g.node_coords(idx);
            assert_eq!(g.interpolate(&vals, &p, BoundaryPolicy::Strict).unwrap(), vals[idx]);
            assert_eq!(g.stencil(&p, BoundaryPolicy::Strict).unwrap().len(), 1);
        }
    }

    #[test]
    fn linear_fields_interpolate_exactly() {
        let g = g2();
        let f = |p: &[f64]| 2.0 * p[0] - 0.5 * p[1] + 0.25;
        let vals: Vec<f64> = (0..g.n_nodes()).map(|i| f(&g.node_coords(i))).collect();
        let a = g.node_coords(g.node_index(&[1, 2]));
        let b = g.node_coords(g.node_index(&[2, 2]));
        let mid = [(a[0] + b[0]) / 2.0, a[1]];
        let v = g.interpolate(&vals, &mid, BoundaryPolicy::Strict).unwrap();
        assert!((v - 0.5 * (vals[g.node_index(&[1, 2])] + vals[g.node_index(&[2, 2])])).abs() < 1e-14);
        for p in [[0.13, -1.7], [0.99, 1.99], [-0.6, 0.05]] {
            let v = g.interpolate(&vals, &p, BoundaryPolicy::Strict).unwrap();
            assert!((v - f(&p)).abs() < 1e-13);
        }
    }

    #[test]
    fn boundary_policies() {
        let g = g2();
        let vals = vec![1.0; g.n_nodes()];
        assert!(matches!(g.interpolate(&vals, &[1.5, 0.0], BoundaryPolicy::Strict), Err(Error::Domain(_))));
        assert_eq!(g.interpolate(&vals, &[1.5, 0.0], BoundaryPolicy::Clamp).unwrap(), 1.0);
        let st = g.stencil(&[5.0, 9.0], BoundaryPolicy::Clamp).unwrap();
        assert_eq!(st, vec![(g.n_nodes() - 1, 1.0)]);
    }

    #[test]
    fn stencil_weights_sum_to_one() {
        let g = g2();
        let st = g.stencil(&[0.1, 0.3], BoundaryPolicy::Clamp).unwrap();
        assert_eq!(st.len(), 4);
        assert!((st.iter().map(|c| c.1).sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn auto_stride_for_example() {
        let spec = GameSpec::example(vec![-1.0, 0.0, 1.0]);
        let g = Grid::for_game(&spec, 100, vec![-2.0, -2.0], vec![2.0, 2.0], vec![201, 201]).unwrap();
        assert_eq!(g.auto_stride(&spec), 2);
        let g = Grid::for_game(&spec, 100, vec![-2.0, -2.0], vec![2.0, 2.0], vec![401, 401]).unwrap();
        assert_eq!(g.auto_stride(&spec), 1);
    }

    #[test]
    fn slice_lookup() {
        let g = g2();
        assert_eq!(g.slice_of(0.3).unwrap(), 3);
        assert!(g.slice_of(0.35).is_err());
        assert_eq!(g.time(10), 1.0);
    }
}
