use std::io::{BufRead, Write};
use std::sync::Arc;

use rayon::prelude::*;

use super::cloud::{box_dist, cmp_pair, PayoffCloud, PayoffPair};
use crate::error::{Error, Result};
use crate::game::GameSpec;
use crate::grid::{BoundaryPolicy, Grid};
use crate::value::ValueField;

/// Clouds of one time slice in compressed-row form.
#[derive(Clone, Debug, PartialEq)]
pub struct CloudSlice {
    offsets: Vec<usize>,
    points: Vec<PayoffPair>,
}

impl CloudSlice {
    pub fn from_nested(clouds: Vec<Vec<PayoffPair>>) -> Self {
        let mut offsets = Vec::with_capacity(clouds.len() + 1);
        offsets.push(0);
        let total = clouds.iter().map(Vec::len).sum();
        let mut points = Vec::with_capacity(total);
        for mut c in clouds {
            c.sort_by(cmp_pair);
            points.extend_from_slice(&c);
            offsets.push(points.len());
        }
        Self { offsets, points }
    }

    pub fn cloud(&self, node: usize) -> &[PayoffPair] {
        &self.points[self.offsets[node]..self.offsets[node + 1]]
    }

    pub fn n_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }
}

/// Lower-value fields the lower-bound test refers to.
#[derive(Clone, Debug)]
pub struct LowerRef {
    pub lower1: Arc<ValueField>,
    pub lower2: Arc<ValueField>,
}

/// Time-indexed family of payoff clouds over the spatial grid.
#[derive(Clone, Debug)]
pub struct NashMap {
    grid: Grid,
    quantum: f64,
    dilation: f64,
    boundary: BoundaryPolicy,
    slices: Vec<CloudSlice>,
    lower_ref: Option<LowerRef>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct InvariantReport {
    pub lower_checked: bool,
    pub lower_violations: usize,
    /// Nodes left out of the lower-bound check by the node filter.
    pub lower_skipped: usize,
    pub terminal_violations: usize,
    /// First few violations: (slice, node, point).
    pub examples: Vec<(usize, usize, PayoffPair)>,
}

impl InvariantReport {
    pub fn ok(&self) -> bool {
        self.lower_violations == 0 && self.terminal_violations == 0
    }
}

impl NashMap {
    pub fn new(grid: Grid, quantum: f64, dilation: f64, slices: Vec<CloudSlice>) -> Result<Self> {
        if !(quantum > 0.0) || !(dilation >= 0.0) {
            return Err(Error::Precondition("quantum must be > 0 and dilation >= 0".into()));
        }
        if slices.len() != grid.n_slices() || slices.iter().any(|s| s.n_nodes() != grid.n_nodes()) {
            return Err(Error::Precondition("slice layout does not match the grid".into()));
        }
        Ok(Self {
            grid,
            quantum,
            dilation,
            boundary: BoundaryPolicy::Clamp,
            slices,
            lower_ref: None,
        })
    }

    /// Clouds from a closure over (slice, node), terminal slice included.
    pub fn from_fn(grid: &Grid, quantum: f64, dilation: f64, f: impl Fn(usize, usize) -> Vec<PayoffPair> + Sync) -> Result<Self> {
        let slices = (0..grid.n_slices())
            .map(|k| CloudSlice::from_nested((0..grid.n_nodes()).into_par_iter().map(|node| f(k, node)).collect()))
            .collect();
        Self::new(grid.clone(), quantum, dilation, slices)
    }

    pub fn with_lower_ref(mut self, lower1: Arc<ValueField>, lower2: Arc<ValueField>) -> Self {
        self.lower_ref = Some(LowerRef { lower1, lower2 });
        self
    }

    pub fn with_boundary(mut self, boundary: BoundaryPolicy) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn quantum(&self) -> f64 {
        self.quantum
    }
    pub fn dilation(&self) -> f64 {
        self.dilation
    }
    pub fn boundary(&self) -> BoundaryPolicy {
        self.boundary
    }
    pub fn lower_ref(&self) -> Option<&LowerRef> {
        self.lower_ref.as_ref()
    }
    pub fn slice(&self, k: usize) -> &CloudSlice {
        &self.slices[k]
    }

    /// Every stored payoff stands for a box of this half-width.
    pub fn resolution(&self) -> f64 {
        0.5 * self.quantum
    }

    pub fn cloud(&self, k: usize, node: usize) -> &[PayoffPair] {
        self.slices[k].cloud(node)
    }

    pub fn payoff_cloud(&self, k: usize, node: usize) -> PayoffCloud {
        PayoffCloud::new(self.cloud(k, node).to_vec(), self.quantum)
    }

    pub fn total_points(&self) -> usize {
        self.slices.iter().map(CloudSlice::n_points).sum()
    }

    pub fn max_cloud_len(&self) -> usize {
        self.slices
            .iter()
            .flat_map(|s| s.offsets.windows(2).map(|w| w[1] - w[0]))
            .max()
            .unwrap_or(0)
    }

    /// Replaces one cloud (rebuilds that slice's offsets).
    pub fn set_cloud(&mut self, k: usize, node: usize, points: Vec<PayoffPair>) {
        let s = &self.slices[k];
        let nested: Vec<Vec<PayoffPair>> = (0..s.n_nodes())
            .map(|i| if i == node { points.clone() } else { s.cloud(i).to_vec() })
            .collect();
        self.slices[k] = CloudSlice::from_nested(nested);
    }

    /// Distance from `j` to the cloud at a node, at the map's resolution.
    pub fn node_dist(&self, k: usize, node: usize, j: PayoffPair) -> Result<f64> {
        let c = self.cloud(k, node);
        if c.is_empty() {
            return Err(Error::EmptyCloud);
        }
        Ok(box_dist(j, c, self.resolution()))
    }

    /// Distance to the union of corner clouds, each dilated by
    /// dilation * |p - corner|.
    pub fn dist_dilated(&self, k: usize, p: &[f64], j: PayoffPair, stencil: &mut Vec<(usize, f64)>, corner: &mut [f64]) -> Result<f64> {
        self.grid.stencil_into(p, self.boundary, stencil)?;
        let mut best = f64::INFINITY;
        let mut any = false;
        for &(c, _) in stencil.iter() {
            let cloud = self.cloud(k, c);
            if cloud.is_empty() {
                continue;
            }
            any = true;
            self.grid.node_coords_into(c, corner);
            let gap: f64 = p.iter().zip(corner.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let d = (box_dist(j, cloud, self.resolution()) - self.dilation * gap).max(0.0);
            best = best.min(d);
            if best == 0.0 {
                break;
            }
        }
        if any {
            Ok(best)
        } else {
            Err(Error::EmptyCloud)
        }
    }

    /// Multilinear interpolation of the node distances; empty corners count as infinite.
    pub fn dist_weighted(&self, k: usize, p: &[f64], j: PayoffPair, stencil: &mut Vec<(usize, f64)>) -> Result<f64> {
        self.dist_weighted_at(k, p, j, self.resolution(), stencil)
    }

    /// As `dist_weighted` with an explicit box slack `r`.
    pub fn dist_weighted_at(&self, k: usize, p: &[f64], j: PayoffPair, r: f64, stencil: &mut Vec<(usize, f64)>) -> Result<f64> {
        self.grid.stencil_into(p, self.boundary, stencil)?;
        let mut acc = 0.0;
        for &(c, w) in stencil.iter() {
            let cloud = self.cloud(k, c);
            if cloud.is_empty() {
                return Ok(f64::INFINITY);
            }
            acc += w * box_dist(j, cloud, r);
        }
        Ok(acc)
    }

    /// Lower bounds against the given fields (or the stored reference) and terminal consistency against the payoffs.
    pub fn check_invariants(&self, spec: &GameSpec, lowers: Option<(&ValueField, &ValueField)>, tol_val: f64) -> InvariantReport {
        self.check_invariants_where(spec, lowers, tol_val, |_, _| true)
    }

    /// As `check_invariants`, with the lower-bound check limited to the (slice, node) pairs accepted by `keep`.
    pub fn check_invariants_where(
        &self,
        spec: &GameSpec,
        lowers: Option<(&ValueField, &ValueField)>,
        tol_val: f64,
        keep: impl Fn(usize, usize) -> bool + Sync,
    ) -> InvariantReport {
        let lowers = lowers.or_else(|| self.lower_ref.as_ref().map(|o| (o.lower1.as_ref(), o.lower2.as_ref())));
        let g = &self.grid;
        let kk = g.time_steps();
        let mut report = InvariantReport {
            lower_checked: lowers.is_some(),
            ..Default::default()
        };
        if let Some((w1, w2)) = lowers {
            let per_slice: Vec<(usize, usize, Vec<(usize, usize, PayoffPair)>)> = (0..g.n_slices())
                .into_par_iter()
                .map(|k| {
                    let (mut count, mut skipped) = (0, 0);
                    let mut ex = Vec::new();
                    for node in 0..g.n_nodes() {
                        if !keep(k, node) {
                            skipped += 1;
                            continue;
                        }
                        let (a, b) = (w1.at(k, node), w2.at(k, node));
                        for &p in self.cloud(k, node) {
                            if p[0] < a - tol_val || p[1] < b - tol_val {
                                count += 1;
                                if ex.len() < 5 {
                                    ex.push((k, node, p));
                                }
                            }
                        }
                    }
                    (count, skipped, ex)
                })
                .collect();
            for (c, skipped, ex) in per_slice {
                report.lower_violations += c;
                report.lower_skipped += skipped;
                for e in ex {
                    if report.examples.len() < 10 {
                        report.examples.push(e);
                    }
                }
            }
        }
        for node in 0..g.n_nodes() {
            let x = g.node_coords(node);
            let want = [spec.payoff1.eval(&x), spec.payoff2.eval(&x)];
            let c = self.cloud(kk, node);
            if c.len() != 1 || c[0] != want {
                report.terminal_violations += 1;
                if report.examples.len() < 10 {
                    report.examples.push((kk, node, c.first().copied().unwrap_or([f64::NAN; 2])));
                }
            }
        }
        report
    }

    /// Pointwise union of two maps on the same grid, deduplicated at this map's quantum.
    pub fn union(&self, other: &NashMap) -> Result<NashMap> {
        if self.grid != other.grid {
            return Err(Error::Precondition("union needs maps on the same grid".into()));
        }
        let slices = (0..self.grid.n_slices())
            .map(|k| {
                CloudSlice::from_nested(
                    (0..self.grid.n_nodes())
                        .into_par_iter()
                        .map(|node| {
                            let mut pts = self.cloud(k, node).to_vec();
                            for &p in other.cloud(k, node) {
                                if !pts.contains(&p) {
                                    pts.push(p);
                                }
                            }
                            if k == self.grid.time_steps() {
                                pts
                            } else {
                                PayoffCloud::new(pts, self.quantum).points().to_vec()
                            }
                        })
                        .collect(),
                )
            })
            .collect();
        let mut out = NashMap::new(self.grid.clone(), self.quantum, self.dilation.max(other.dilation), slices)?;
        out.boundary = self.boundary;
        out.lower_ref = self.lower_ref.clone();
        Ok(out)
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        let g = &self.grid;
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        writeln!(w, "# dgnash nash-map v1")?;
        writeln!(w, "# t0 = {}", g.t0())?;
        writeln!(w, "# theta0 = {}", g.theta0())?;
        writeln!(w, "# time_steps = {}", g.time_steps())?;
        writeln!(w, "# lo = {}", join(g.lo()))?;
        writeln!(w, "# hi = {}", join(g.hi()))?;
        writeln!(w, "# nodes = {}", g.nodes().iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" "))?;
        writeln!(w, "# quantum = {}", self.quantum)?;
        writeln!(w, "# dilation = {}", self.dilation)?;
        let mut x = vec![0.0; g.dim()];
        let mut line = String::new();
        for k in 0..g.n_slices() {
            let t = g.time(k);
            for node in 0..g.n_nodes() {
                g.node_coords_into(node, &mut x);
                line.clear();
                line.push_str(&t.to_string());
                for c in &x {
                    line.push(' ');
                    line.push_str(&c.to_string());
                }
                line.push_str(" :");
                for (i, p) in self.cloud(k, node).iter().enumerate() {
                    line.push_str(if i == 0 { " " } else { " ; " });
                    line.push_str(&p[0].to_string());
                    line.push(',');
                    line.push_str(&p[1].to_string());
                }
                line.push('\n');
                w.write_all(line.as_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let perr = |line: usize, msg: String| Error::Parse {
            what: "nash map".into(),
            line,
            msg,
        };
        let mut header: Vec<(String, String, usize)> = Vec::new();
        let mut records: Vec<(usize, String)> = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let s = line.trim();
            if s.is_empty() {
                continue;
            }
            if let Some(rest) = s.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once('=') {
                    header.push((k.trim().to_string(), v.trim().to_string(), i + 1));
                }
                continue;
            }
            records.push((i + 1, s.to_string()));
        }
        let get = |key: &str| -> Result<(&str, usize)> {
            header
                .iter()
                .find(|h| h.0 == key)
                .map(|h| (h.1.as_str(), h.2))
                .ok_or_else(|| perr(1, format!("missing header `# {key} = ...`")))
        };
        let num = |key: &str| -> Result<f64> {
            let (v, l) = get(key)?;
            v.parse::<f64>().map_err(|e| perr(l, format!("{key}: {e}")))
        };
        let nums = |key: &str| -> Result<Vec<f64>> {
            let (v, l) = get(key)?;
            v.split_whitespace()
                .map(|s| s.parse::<f64>().map_err(|e| perr(l, format!("{key}: {e}"))))
                .collect()
        };
        let (ts, tl) = get("time_steps")?;
        let time_steps: usize = ts.parse().map_err(|e| perr(tl, format!("time_steps: {e}")))?;
        let (ns, nl) = get("nodes")?;
        let nodes: Vec<usize> = ns
            .split_whitespace()
            .map(|s| s.parse::<usize>().map_err(|e| perr(nl, format!("nodes: {e}"))))
            .collect::<Result<_>>()?;
        let grid = Grid::new(num("t0")?, num("theta0")?, time_steps, nums("lo")?, nums("hi")?, nodes)?;
        let quantum = num("quantum")?;
        let dilation = num("dilation")?;
        let n = grid.dim();
        let mut clouds: Vec<Vec<Option<Vec<PayoffPair>>>> = vec![vec![None; grid.n_nodes()]; grid.n_slices()];
        for (line_no, rec) in records {
            let (head, body) = rec
                .split_once(':')
                .ok_or_else(|| perr(line_no, "record needs `t x1..xn : points`".into()))?;
            let coords: Vec<f64> = head
                .split_whitespace()
                .map(|s| s.parse::<f64>().map_err(|e| perr(line_no, e.to_string())))
                .collect::<Result<_>>()?;
            if coords.len() != n + 1 {
                return Err(perr(line_no, format!("expected {} coordinates, got {}", n + 1, coords.len())));
            }
            let k = grid
                .slice_of(coords[0])
                .map_err(|_| perr(line_no, format!("time {} is not a grid slice", coords[0])))?;
            let mut multi = vec![0; n];
            for d in 0..n {
                let r = (coords[d + 1] - grid.lo()[d]) / grid.spacing()[d];
                if (r - r.round()).abs() > 1e-6 || r.round() < 0.0 || r.round() as usize >= grid.nodes()[d] {
                    return Err(perr(line_no, format!("coordinate {} is not a grid node", coords[d + 1])));
                }
                multi[d] = r.round() as usize;
            }
            let mut pts = Vec::new();
            for item in body.split(';') {
                let item = item.trim();
                if item.is_empty() {
                    continue;
                }
                let (a, b) = item
                    .split_once(',')
                    .ok_or_else(|| perr(line_no, format!("payoff `{item}` needs J1,J2")))?;
                let a: f64 = a.trim().parse().map_err(|e| perr(line_no, format!("{e}")))?;
                let b: f64 = b.trim().parse().map_err(|e| perr(line_no, format!("{e}")))?;
                pts.push([a, b]);
            }
            let node = grid.node_index(&multi);
            if clouds[k][node].is_some() {
                return Err(perr(line_no, "duplicate record for this node".into()));
            }
            clouds[k][node] = Some(pts);
        }
        let mut slices = Vec::with_capacity(grid.n_slices());
        for (k, s) in clouds.into_iter().enumerate() {
            let mut nested = Vec::with_capacity(grid.n_nodes());
            for (node, c) in s.into_iter().enumerate() {
                nested.push(c.ok_or_else(|| perr(1, format!("no record for slice {k} node {:?}", grid.multi_index(node))))?);
            }
            slices.push(CloudSlice::from_nested(nested));
        }
        NashMap::new(grid, quantum, dilation, slices)
    }
}
