//! Zero-sum and cooperative value fields by backward semi-Lagrangian
//! dynamic programming with multilinear interpolation.

use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{GameSpec, Player};
use crate::grid::{BoundaryPolicy, Grid, Stride};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldLabel {
    Lower1,
    Lower2,
    Coop1,
    Coop2,
    Candidate,
}

impl FieldLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            FieldLabel::Lower1 => "lower1",
            FieldLabel::Lower2 => "lower2",
            FieldLabel::Coop1 => "coop1",
            FieldLabel::Coop2 => "coop2",
            FieldLabel::Candidate => "candidate",
        }
    }
}

/// How one backward step reduces over the control-pair table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepMode {
    /// The given player maximizes, the opponent minimizes.
    Lower(Player),
    /// Both players maximize.
    Cooperative,
}

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    pub stride: Stride,
    pub boundary: BoundaryPolicy,
    /// Isaacs gaps above this attach a warning to lower-value fields.
    pub isaacs_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            stride: Stride::Auto,
            boundary: BoundaryPolicy::Clamp,
            isaacs_tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ValueField {
    grid: Grid,
    values: Vec<f64>,
    label: FieldLabel,
    stride: usize,
    boundary: BoundaryPolicy,
    warnings: Vec<String>,
}

impl ValueField {
    /// Field with every slice evaluated from a closed form.
    pub fn from_fn(grid: &Grid, label: FieldLabel, f: impl Fn(f64, &[f64]) -> f64 + Sync) -> Self {
        let nn = grid.n_nodes();
        let values: Vec<f64> = (0..grid.n_slices())
            .into_par_iter()
            .flat_map_iter(|k| {
                let t = grid.time(k);
                let f = &f;
                (0..nn).map(move |idx| f(t, &grid.node_coords(idx)))
            })
            .collect();
        Self {
            grid: grid.clone(),
            values,
            label,
            stride: 1,
            boundary: BoundaryPolicy::Clamp,
            warnings: Vec::new(),
        }
    }

    pub fn from_values(grid: &Grid, label: FieldLabel, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_slices() * grid.n_nodes() {
            return Err(Error::Precondition(format!(
                "field needs {} values, got {}",
                grid.n_slices() * grid.n_nodes(),
                values.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
            label,
            stride: 1,
            boundary: BoundaryPolicy::Clamp,
            warnings: Vec::new(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn label(&self) -> FieldLabel {
        self.label
    }
    pub fn stride(&self) -> usize {
        self.stride
    }
    pub fn boundary(&self) -> BoundaryPolicy {
        self.boundary
    }
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn with_boundary(mut self, boundary: BoundaryPolicy) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        let nn = self.grid.n_nodes();
        &self.values[k * nn..(k + 1) * nn]
    }

    pub fn at(&self, k: usize, node: usize) -> f64 {
        self.values[k * self.grid.n_nodes() + node]
    }

    /// Linear in time between slices, multilinear in space.
    pub fn query_value(&self, t: f64, x: &[f64]) -> Result<f64> {
        let g = &self.grid;
        let slack = 1e-9 * (g.theta0() - g.t0());
        if !(t >= g.t0() - slack && t <= g.theta0() + slack) {
            return Err(Error::Domain(format!(
                "time {t} outside [{}, {}]",
                g.t0(),
                g.theta0()
            )));
        }
        let r = ((t - g.t0()) / g.dt()).clamp(0.0, g.time_steps() as f64);
        let mut k = r.floor() as usize;
        let mut f = r - k as f64;
        if f > 1.0 - 1e-9 {
            k += 1;
            f = 0.0;
        }
        if k >= g.time_steps() {
            return g.interpolate(self.slice(g.time_steps()), x, self.boundary);
        }
        let a = g.interpolate(self.slice(k), x, self.boundary)?;
        if f < 1e-9 {
            return Ok(a);
        }
        let b = g.interpolate(self.slice(k + 1), x, self.boundary)?;
        Ok((1.0 - f) * a + f * b)
    }

    pub fn max_abs_diff(&self, other: impl Fn(f64, &[f64]) -> f64, node_filter: impl Fn(&[f64]) -> bool) -> f64 {
        let g = &self.grid;
        let mut worst = 0.0f64;
        let mut x = vec![0.0; g.dim()];
        for k in 0..g.n_slices() {
            let t = g.time(k);
            for idx in 0..g.n_nodes() {
                g.node_coords_into(idx, &mut x);
                if node_filter(&x) {
                    worst = worst.max((self.at(k, idx) - other(t, &x)).abs());
                }
            }
        }
        worst
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let g = &self.grid;
        let mut header = String::from("t");
        for d in 0..g.dim() {
            header.push_str(&format!(",x{}", d + 1));
        }
        header.push_str(",value\n");
        w.write_all(header.as_bytes())?;
        let mut x = vec![0.0; g.dim()];
        let mut line = String::new();
        for k in 0..g.n_slices() {
            let t = g.time(k);
            for idx in 0..g.n_nodes() {
                g.node_coords_into(idx, &mut x);
                line.clear();
                line.push_str(&t.to_string());
                for c in &x {
                    line.push(',');
                    line.push_str(&c.to_string());
                }
                line.push(',');
                line.push_str(&self.at(k, idx).to_string());
                line.push('\n');
                w.write_all(line.as_bytes())?;
            }
        }
        Ok(())
    }

    /// Reads `t,x1..xn,value` rows covering a full tensor grid.
    pub fn read_csv<R: BufRead>(r: R, label: FieldLabel) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse {
            what: "field csv".into(),
            line,
            msg,
        };
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut width = 0;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if i == 0 {
                let cols: Vec<&str> = line.split(',').map(str::trim).collect();
                if cols.len() < 3 || cols[0] != "t" || cols[cols.len() - 1] != "value" {
                    return Err(err(1, "header must be t,x1..xn,value".into()));
                }
                width = cols.len();
                continue;
            }
            let vals: std::result::Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| err(i + 1, e.to_string()))?;
            if vals.len() != width {
                return Err(err(i + 1, format!("expected {width} columns, got {}", vals.len())));
            }
            rows.push(vals);
        }
        if rows.is_empty() {
            return Err(err(1, "no data rows".into()));
        }
        let n = width - 2;
        let axis = |c: usize| {
            let mut v: Vec<f64> = rows.iter().map(|r| r[c]).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let ts = axis(0);
        let xs: Vec<Vec<f64>> = (1..=n).map(axis).collect();
        if ts.len() < 2 || xs.iter().any(|a| a.len() < 2) {
            return Err(err(1, "need at least two distinct values per axis".into()));
        }
        let grid = Grid::new(
            ts[0],
            *ts.last().unwrap(),
            ts.len() - 1,
            xs.iter().map(|a| a[0]).collect(),
            xs.iter().map(|a| *a.last().unwrap()).collect(),
            xs.iter().map(|a| a.len()).collect(),
        )?;
        let nn = grid.n_nodes();
        let mut values = vec![f64::NAN; grid.n_slices() * nn];
        for (ri, row) in rows.iter().enumerate() {
            let k = grid
                .slice_of(row[0])
                .map_err(|_| err(ri + 2, format!("time {} is off the uniform grid", row[0])))?;
            let mut multi = vec![0; n];
            for d in 0..n {
                let r = (row[d + 1] - grid.lo()[d]) / grid.spacing()[d];
                if (r - r.round()).abs() > 1e-6 {
                    return Err(err(ri + 2, format!("coordinate {} is off the uniform grid", row[d + 1])));
                }
                multi[d] = r.round() as usize;
            }
            values[k * nn + grid.node_index(&multi)] = row[n + 1];
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(err(1, "rows do not cover every grid node".into()));
        }
        ValueField::from_values(&grid, label, values)
    }
}

struct StepBuffers {
    x: Vec<f64>,
    f: Vec<f64>,
    foot: Vec<f64>,
    table: Vec<f64>,
    stencil: Vec<(usize, f64)>,
}

/// One backward step: slice k from slice k_next (> k) of the same field.
pub fn backward_step(
    spec: &GameSpec,
    grid: &Grid,
    next: &[f64],
    k: usize,
    k_next: usize,
    mode: StepMode,
    boundary: BoundaryPolicy,
) -> Result<Vec<f64>> {
    let t = grid.time(k);
    let delta = grid.time(k_next) - t;
    let n = grid.dim();
    let np = spec.p.len();
    let nq = spec.q.len();
    (0..grid.n_nodes())
        .into_par_iter()
        .map_init(
            || StepBuffers {
                x: vec![0.0; n],
                f: vec![0.0; n],
                foot: vec![0.0; n],
                table: vec![0.0; np * nq],
                stencil: Vec::with_capacity(1 << n),
            },
            |b, idx| {
                grid.node_coords_into(idx, &mut b.x);
                for i in 0..np {
                    for j in 0..nq {
                        spec.velocity_into(t, &b.x, i, j, &mut b.f);
                        spec.check_finite(t, &b.x, &spec.p[i], &spec.q[j], &b.f)?;
                        for d in 0..n {
                            b.foot[d] = b.x[d] + delta * b.f[d];
                        }
                        grid.stencil_into(&b.foot, boundary, &mut b.stencil).map_err(|e| {
                            Error::Domain(format!("node {:?} at t={t}: {e}", b.x))
                        })?;
                        b.table[i * nq + j] = b.stencil.iter().map(|&(c, w)| w * next[c]).sum();
                    }
                }
                Ok(reduce_table(&b.table, np, nq, mode))
            },
        )
        .collect()
}

fn reduce_table(table: &[f64], np: usize, nq: usize, mode: StepMode) -> f64 {
    match mode {
        StepMode::Lower(Player::First) => (0..np)
            .map(|i| table[i * nq..(i + 1) * nq].iter().cloned().fold(f64::INFINITY, f64::min))
            .fold(f64::NEG_INFINITY, f64::max),
        StepMode::Lower(Player::Second) => (0..nq)
            .map(|j| (0..np).map(|i| table[i * nq + j]).fold(f64::INFINITY, f64::min))
            .fold(f64::NEG_INFINITY, f64::max),
        StepMode::Cooperative => table.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    }
}

fn solve(spec: &GameSpec, grid: &Grid, who: Player, mode: StepMode, label: FieldLabel, opts: &SolverOptions) -> Result<ValueField> {
    if grid.dim() != spec.state_dim {
        return Err(Error::InvalidGrid(format!(
            "grid has {} dimensions, game state has {}",
            grid.dim(),
            spec.state_dim
        )));
    }
    let nn = grid.n_nodes();
    let kk = grid.time_steps();
    let stride = opts.stride.resolve(grid, spec);
    let payoff = spec.payoff(who);
    let mut values = vec![0.0; grid.n_slices() * nn];
    {
        let terminal = &mut values[kk * nn..];
        terminal.par_iter_mut().enumerate().for_each(|(idx, v)| {
            *v = payoff.eval(&grid.node_coords(idx));
        });
    }
    for k in (0..kk).rev() {
        let kn = (k + stride).min(kk);
        let (head, tail) = values.split_at_mut((k + 1) * nn);
        let next = &tail[(kn - k - 1) * nn..(kn - k) * nn];
        let slice = backward_step(spec, grid, next, k, kn, mode, opts.boundary)?;
        head[k * nn..].copy_from_slice(&slice);
    }
    let mut warnings = Vec::new();
    if let StepMode::Lower(_) = mode {
        let report = spec.isaacs_check(&isaacs_times(grid), &grid.probe_states(), &costate_probes(grid.dim()))?;
        if report.max_gap > opts.isaacs_tol {
            warnings.push(format!(
                "Isaacs gap {} exceeds {} at t={}, x={:?}, s={:?}; values are the stated max-min",
                report.max_gap, opts.isaacs_tol, report.worst_t, report.worst_x, report.worst_s
            ));
        }
    }
    Ok(ValueField {
        grid: grid.clone(),
        values,
        label,
        stride,
        boundary: opts.boundary,
        warnings,
    })
}

fn isaacs_times(grid: &Grid) -> Vec<f64> {
    vec![grid.t0(), 0.5 * (grid.t0() + grid.theta0())]
}

/// Signed unit vectors plus the all-ones diagonals.
pub fn costate_probes(n: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for d in 0..n {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; n];
            e[d] = s;
            out.push(e);
        }
    }
    out.push(vec![1.0; n]);
    out.push((0..n).map(|d| if d % 2 == 0 { 1.0 } else { -1.0 }).collect());
    out
}

/// Lower value: `which` maximizes its own payoff, the opponent minimizes it.
pub fn solve_lower_value(spec: &GameSpec, grid: &Grid, which: Player, opts: &SolverOptions) -> Result<ValueField> {
    let label = match which {
        Player::First => FieldLabel::Lower1,
        Player::Second => FieldLabel::Lower2,
    };
    solve(spec, grid, which, StepMode::Lower(which), label, opts)
}

/// Cooperative maximum of payoff `which` over both players' controls.
pub fn solve_cooperative_max(spec: &GameSpec, grid: &Grid, which: Player, opts: &SolverOptions) -> Result<ValueField> {
    let label = match which {
        Player::First => FieldLabel::Coop1,
        Player::Second => FieldLabel::Coop2,
    };
    solve(spec, grid, which, StepMode::Cooperative, label, opts)
}
