//! Sufficient-condition checks for candidate payoff pairs: the upper
//! viscosity inequality a + H_i(s) <= 0 on sampled generalized gradients,
//! a vanishing modulus derivative along some hull velocity, and the
//! smooth control-selection conditions.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{GameSpec, Player};
use crate::nash::perturbation_samples;
use crate::value::ValueField;

/// Scalar function of (t, x).
pub trait ScalarField: Send + Sync {
    fn name(&self) -> String;
    fn value(&self, t: f64, x: &[f64]) -> Result<f64>;
    /// Analytic (dc/dt, grad_x c) where it exists.
    fn gradient(&self, _t: f64, _x: &[f64]) -> Option<(f64, Vec<f64>)> {
        None
    }
    /// Whether the field is known to be differentiable near (t, x).
    fn smooth_at(&self, _t: f64, _x: &[f64]) -> Option<bool> {
        None
    }
}

impl ScalarField for ValueField {
    fn name(&self) -> String {
        self.label().as_str().to_string()
    }
    fn value(&self, t: f64, x: &[f64]) -> Result<f64> {
        self.query_value(t, x)
    }
}

/// Constant field.
#[derive(Clone, Copy, Debug)]
pub struct ConstField(pub f64);

impl ScalarField for ConstField {
    fn name(&self) -> String {
        format!("const({})", self.0)
    }
    fn value(&self, _t: f64, _x: &[f64]) -> Result<f64> {
        Ok(self.0)
    }
    fn gradient(&self, _t: f64, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        Some((0.0, vec![0.0; x.len()]))
    }
    fn smooth_at(&self, _t: f64, _x: &[f64]) -> Option<bool> {
        Some(true)
    }
}

/// Affine field c0 + a t + <s, x>.
#[derive(Clone, Debug)]
pub struct AffineField {
    pub c0: f64,
    pub a: f64,
    pub s: Vec<f64>,
}

impl ScalarField for AffineField {
    fn name(&self) -> String {
        format!("affine({}, {}, {:?})", self.c0, self.a, self.s)
    }
    fn value(&self, t: f64, x: &[f64]) -> Result<f64> {
        Ok(self.c0 + self.a * t + self.s.iter().zip(x).map(|(s, x)| s * x).sum::<f64>())
    }
    fn gradient(&self, _t: f64, _x: &[f64]) -> Option<(f64, Vec<f64>)> {
        Some((self.a, self.s.clone()))
    }
    fn smooth_at(&self, _t: f64, _x: &[f64]) -> Option<bool> {
        Some(true)
    }
}

type FieldFn = dyn Fn(f64, &[f64]) -> f64 + Send + Sync;

/// Field given by a closure, no analytic derivative.
#[derive(Clone)]
pub struct FnField {
    name: String,
    f: Arc<FieldFn>,
}

impl FnField {
    pub fn new(name: impl Into<String>, f: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), f: Arc::new(f) }
    }
}

impl ScalarField for FnField {
    fn name(&self) -> String {
        self.name.clone()
    }
    fn value(&self, t: f64, x: &[f64]) -> Result<f64> {
        Ok((self.f)(t, x))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Smoothness {
    Smooth,
    Piecewise,
}

/// Candidate payoff pair (c1, c2).
#[derive(Clone)]
pub struct CandidatePair {
    pub name: String,
    pub c1: Arc<dyn ScalarField>,
    pub c2: Arc<dyn ScalarField>,
    pub smoothness: Smoothness,
}

impl fmt::Debug for CandidatePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CandidatePair({}: {}, {})", self.name, self.c1.name(), self.c2.name())
    }
}

impl CandidatePair {
    pub fn new(name: impl Into<String>, c1: Arc<dyn ScalarField>, c2: Arc<dyn ScalarField>, smoothness: Smoothness) -> Self {
        Self {
            name: name.into(),
            c1,
            c2,
            smoothness,
        }
    }

    pub fn from_fields(c1: ValueField, c2: ValueField) -> Self {
        Self::new("grid", Arc::new(c1), Arc::new(c2), Smoothness::Piecewise)
    }

    pub fn field(&self, which: Player) -> &dyn ScalarField {
        match which {
            Player::First => self.c1.as_ref(),
            Player::Second => self.c2.as_ref(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SmoothOptions {
    /// Finite-difference step in (t, x).
    pub fd_step: f64,
    /// Radius of the ball whose gradients enter the generalized gradient.
    pub ball_radius: f64,
    /// Random directions in the ball beyond the signed axes.
    pub ball_directions: usize,
    /// Default 10 * fd_step.
    pub tol_visc: Option<f64>,
    pub tol_dd: f64,
    /// Terminal consistency tolerance.
    pub tol_val: f64,
    /// Slack of the proximal inequality per unit distance.
    pub tol_prox: f64,
    pub delta_schedule: Vec<f64>,
    pub perturb_radius: f64,
    pub perturb_extra: usize,
    /// Hull velocities: raw velocities plus chords between every raw pair at steps 1/chord_steps.
    pub chord_steps: usize,
    pub seed: u64,
    /// Worst points kept per test.
    pub keep_worst: usize,
}

impl Default for SmoothOptions {
    fn default() -> Self {
        Self {
            fd_step: 1e-5,
            ball_radius: 1e-3,
            ball_directions: 16,
            tol_visc: None,
            tol_dd: 0.2,
            tol_val: 1e-6,
            tol_prox: 1e-2,
            delta_schedule: vec![0.01, 0.02, 0.04],
            perturb_radius: 0.1,
            perturb_extra: 4,
            chord_steps: 8,
            seed: 7,
            keep_worst: 10,
        }
    }
}

impl SmoothOptions {
    pub fn resolved_tol_visc(&self) -> f64 {
        self.tol_visc.unwrap_or(10.0 * self.fd_step)
    }
}

/// min over the schedule and perturbation samples of
/// (|c1(t+d, x+d(w+g)) - c1(t,x)| + |c2(...) - c2(t,x)|) / d.
pub fn modulus_derivative(pair: &CandidatePair, t: f64, x: &[f64], w: &[f64], delta_schedule: &[f64], perturb_radius: f64, theta0: f64) -> Result<f64> {
    let perturbations = perturbation_samples(x.len(), perturb_radius, 4, 0);
    modulus_core(pair, t, x, w, delta_schedule, &perturbations, theta0)
}

fn modulus_core(pair: &CandidatePair, t: f64, x: &[f64], w: &[f64], deltas: &[f64], perturbations: &[Vec<f64>], theta0: f64) -> Result<f64> {
    if deltas.is_empty() || deltas.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::Precondition("delta schedule must be nonempty and positive".into()));
    }
    let dmax = deltas.iter().cloned().fold(0.0, f64::max);
    if t + dmax > theta0 + 1e-12 {
        return Err(Error::Precondition(format!("t + max delta = {} exceeds the horizon {theta0}", t + dmax)));
    }
    let c1 = pair.c1.value(t, x)?;
    let c2 = pair.c2.value(t, x)?;
    let mut p = vec![0.0; x.len()];
    let mut best = f64::INFINITY;
    for &d in deltas {
        for g in perturbations {
            for i in 0..x.len() {
                p[i] = x[i] + d * (w[i] + g[i]);
            }
            let r = ((pair.c1.value(t + d, &p)? - c1).abs() + (pair.c2.value(t + d, &p)? - c2).abs()) / d;
            best = best.min(r);
        }
    }
    Ok(best)
}

/// Raw velocities plus chords between all raw pairs.
pub fn chord_velocities(spec: &GameSpec, t: f64, x: &[f64], steps: usize) -> Result<Vec<Vec<f64>>> {
    let n = spec.state_dim;
    let raw: Vec<Vec<f64>> = spec.raw_velocities(t, x)?.chunks(n).map(<[f64]>::to_vec).collect();
    let mut out = raw.clone();
    for i in 0..raw.len() {
        for j in i + 1..raw.len() {
            for s in 1..steps {
                let l = s as f64 / steps as f64;
                out.push((0..n).map(|d| (1.0 - l) * raw[i][d] + l * raw[j][d]).collect());
            }
        }
    }
    Ok(out)
}

/// Generalized-gradient sample (a, s) with its proximal tag.
#[derive(Clone, Debug, PartialEq)]
pub struct GradSample {
    pub a: f64,
    pub s: Vec<f64>,
    /// Passes the proximal inequality on the sample ball (a D^- member).
    pub proximal: bool,
}

impl GradSample {
    pub fn as_vec(&self) -> Vec<f64> {
        let mut v = vec![self.a];
        v.extend_from_slice(&self.s);
        v
    }
}

fn fd_gradient(f: &dyn ScalarField, t: f64, x: &[f64], h: f64, t0: f64, theta0: f64) -> Result<Vec<f64>> {
    let n = x.len();
    let mut g = Vec::with_capacity(n + 1);
    let (tl, tr) = ((t - h).max(t0), (t + h).min(theta0));
    g.push((f.value(tr, x)? - f.value(tl, x)?) / (tr - tl));
    let mut p = x.to_vec();
    for d in 0..n {
        p[d] = x[d] + h;
        let r = f.value(t, &p)?;
        p[d] = x[d] - h;
        let l = f.value(t, &p)?;
        p[d] = x[d];
        g.push((r - l) / (2.0 * h));
    }
    Ok(g)
}

fn ball_directions(dim: usize, extra: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for d in 0..dim {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; dim];
            e[d] = s;
            out.push(e);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5851_f42d_4c95_7f2d);
    while out.len() < 2 * dim + extra {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1.0 || norm < 1e-3 {
            continue;
        }
        out.push(v.into_iter().map(|a| a / norm).collect());
    }
    out
}

/// Generalized gradients of `f` at (t, x): gradients at the point and on a
/// small ball (limiting gradients), then convex combinations of the
/// distinct ones. Each sample is tagged by the proximal inequality
/// f(z') >= f(z) + <(a, s), z' - z> - tol_prox |z' - z| on the ball.
pub fn clarke_samples(f: &dyn ScalarField, t: f64, x: &[f64], t0: f64, theta0: f64, opts: &SmoothOptions) -> Result<Vec<GradSample>> {
    let n = x.len();
    let dirs = ball_directions(n + 1, opts.ball_directions, opts.seed);
    let mut grads: Vec<Vec<f64>> = Vec::new();
    let push = |g: Vec<f64>, grads: &mut Vec<Vec<f64>>| {
        if !grads.iter().any(|h| h.iter().zip(&g).all(|(a, b)| (a - b).abs() <= 1e-6)) {
            grads.push(g);
        }
    };
    match f.gradient(t, x).filter(|_| f.smooth_at(t, x) == Some(true)) {
        Some((a, s)) => {
            let mut g = vec![a];
            g.extend(s);
            push(g, &mut grads);
        }
        None => {
            push(fd_gradient(f, t, x, opts.fd_step, t0, theta0)?, &mut grads);
            let mut p = vec![0.0; n];
            for e in &dirs {
                let tz = t + opts.ball_radius * e[0];
                if tz < t0 || tz > theta0 {
                    continue;
                }
                for d in 0..n {
                    p[d] = x[d] + opts.ball_radius * e[d + 1];
                }
                let g = match f.gradient(tz, &p).filter(|_| f.smooth_at(tz, &p) == Some(true)) {
                    Some((a, s)) => {
                        let mut g = vec![a];
                        g.extend(s);
                        g
                    }
                    None => fd_gradient(f, tz, &p, opts.fd_step, t0, theta0)?,
                };
                push(g, &mut grads);
            }
        }
    }
    let base = grads.len();
    for i in 0..base {
        for j in i + 1..base {
            for l in [0.25, 0.5, 0.75] {
                let g: Vec<f64> = grads[i].iter().zip(&grads[j]).map(|(a, b)| (1.0 - l) * a + l * b).collect();
                push(g, &mut grads);
            }
        }
    }

    let f0 = f.value(t, x)?;
    let mut probes = Vec::new();
    let mut p = vec![0.0; n];
    for e in &dirs {
        for r in [0.25, 0.5, 1.0] {
            let rr = r * opts.ball_radius;
            let tz = t + rr * e[0];
            if tz < t0 || tz > theta0 {
                continue;
            }
            for d in 0..n {
                p[d] = x[d] + rr * e[d + 1];
            }
            let mut z = vec![rr * e[0]];
            z.extend((0..n).map(|d| rr * e[d + 1]));
            probes.push((z, f.value(tz, &p)? - f0, rr));
        }
    }
    Ok(grads
        .into_iter()
        .map(|g| {
            let proximal = probes
                .iter()
                .all(|(z, df, r)| df - g.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() >= -opts.tol_prox * r - 1e-12);
            GradSample {
                a: g[0],
                s: g[1..].to_vec(),
                proximal,
            }
        })
        .collect())
}

/// Seeded sample points (t, x) in [t_lo, t_hi] x box.
pub fn sample_points(t_lo: f64, t_hi: f64, lo: &[f64], hi: &[f64], count: usize, seed: u64) -> Vec<(f64, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let t = rng.gen_range(t_lo..=t_hi);
            let x = lo.iter().zip(hi).map(|(&a, &b)| rng.gen_range(a..=b)).collect();
            (t, x)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointResidual {
    pub t: f64,
    pub x: Vec<f64>,
    pub test: &'static str,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct PairConditionReport {
    pub pair: String,
    pub terminal_ok: bool,
    pub viscosity_ok: bool,
    pub dabs_ok: bool,
    pub max_terminal_gap: f64,
    pub max_viscosity: f64,
    pub max_dabs: f64,
    pub tol_visc: f64,
    pub tol_dd: f64,
    pub tol_val: f64,
    pub checked_points: usize,
    pub gradient_samples: usize,
    pub proximal_samples: usize,
    pub worst_points: Vec<PointResidual>,
    pub rows: Vec<PointResidual>,
}

const BANNER: &str = "finite samples of points, gradients and velocities; a PASS is numerical evidence, not a proof";

impl PairConditionReport {
    pub fn pass(&self) -> bool {
        self.terminal_ok && self.viscosity_ok && self.dabs_ok
    }

    pub fn summary(&self) -> String {
        let flag = |b: bool| if b { "PASS" } else { "FAIL" };
        let mut s = format!("upper-solution check of pair {} ({BANNER})\n", self.pair);
        s.push_str(&format!("verdict: {}\n", flag(self.pass())));
        s.push_str(&format!("terminal consistency: {} (max gap {} tol {})\n", flag(self.terminal_ok), self.max_terminal_gap, self.tol_val));
        s.push_str(&format!(
            "viscosity a+H<=tol: {} (max {} tol {}; {} gradient samples, {} proximal)\n",
            flag(self.viscosity_ok),
            self.max_viscosity,
            self.tol_visc,
            self.gradient_samples,
            self.proximal_samples
        ));
        s.push_str(&format!("modulus derivative: {} (max {} tol {})\n", flag(self.dabs_ok), self.max_dabs, self.tol_dd));
        s.push_str(&format!("points: {}\n", self.checked_points));
        for w in &self.worst_points {
            s.push_str(&format!("  worst {} at t={} x={:?}: {}\n", w.test, w.t, w.x, w.residual));
        }
        s
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_rows(&self.rows, w)
    }
}

fn write_rows<W: Write>(rows: &[PointResidual], mut w: W) -> Result<()> {
    let n = rows.first().map_or(0, |r| r.x.len());
    let mut header = String::from("t");
    for d in 0..n {
        header.push_str(&format!(",x{}", d + 1));
    }
    header.push_str(",test,residual\n");
    w.write_all(header.as_bytes())?;
    for r in rows {
        let xs: Vec<String> = r.x.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{},{},{},{}", r.t, xs.join(","), r.test, r.residual)?;
    }
    Ok(())
}

fn keep_worst(rows: &[PointResidual], test: &'static str, k: usize) -> Vec<PointResidual> {
    let mut v: Vec<PointResidual> = rows.iter().filter(|r| r.test == test).cloned().collect();
    v.sort_by(|a, b| b.residual.total_cmp(&a.residual));
    v.truncate(k);
    v
}

/// Terminal consistency, the viscosity inequality for both components and
/// the modulus-derivative condition at the given points.
pub fn check_pair_conditions(pair: &CandidatePair, spec: &GameSpec, points: &[(f64, Vec<f64>)], opts: &SmoothOptions) -> Result<PairConditionReport> {
    let tol_visc = opts.resolved_tol_visc();
    let (t0, theta0) = (spec.t0, spec.theta0);
    let perturbations = perturbation_samples(spec.state_dim, opts.perturb_radius, opts.perturb_extra, opts.seed);
    let dmax = opts.delta_schedule.iter().cloned().fold(0.0, f64::max);

    struct Out {
        rows: Vec<PointResidual>,
        samples: usize,
        proximal: usize,
    }
    let outs: Vec<Out> = points
        .par_iter()
        .map(|(t, x)| -> Result<Out> {
            let (t, x) = (*t, x.as_slice());
            let mut rows = Vec::with_capacity(4);
            let mut samples = 0;
            let mut proximal = 0;
            let term = (pair.c1.value(theta0, x)? - spec.payoff1.eval(x)).abs() + (pair.c2.value(theta0, x)? - spec.payoff2.eval(x)).abs();
            rows.push(PointResidual { t: theta0, x: x.to_vec(), test: "terminal", residual: term });
            for (which, label) in [(Player::First, "viscosity1"), (Player::Second, "viscosity2")] {
                let gs = clarke_samples(pair.field(which), t, x, t0, theta0, opts)?;
                let worst = gs
                    .iter()
                    .map(|g| g.a + spec.hamiltonian(which, t, x, &g.s))
                    .fold(f64::NEG_INFINITY, f64::max);
                samples += gs.len();
                proximal += gs.iter().filter(|g| g.proximal).count();
                rows.push(PointResidual { t, x: x.to_vec(), test: label, residual: worst });
            }
            if t + dmax <= theta0 + 1e-12 {
                let mut best = f64::INFINITY;
                for w in chord_velocities(spec, t, x, opts.chord_steps)? {
                    best = best.min(modulus_core(pair, t, x, &w, &opts.delta_schedule, &perturbations, theta0)?);
                    if best == 0.0 {
                        break;
                    }
                }
                rows.push(PointResidual { t, x: x.to_vec(), test: "dabs", residual: best });
            }
            Ok(Out { rows, samples, proximal })
        })
        .collect::<Result<_>>()?;

    let rows: Vec<PointResidual> = outs.iter().flat_map(|o| o.rows.iter().cloned()).collect();
    let max_of = |test: &str| rows.iter().filter(|r| r.test.starts_with(test)).map(|r| r.residual).fold(0.0, f64::max);
    let (mt, mv, md) = (max_of("terminal"), max_of("viscosity"), max_of("dabs"));
    let mut worst_points = Vec::new();
    for test in ["terminal", "viscosity1", "viscosity2", "dabs"] {
        worst_points.extend(keep_worst(&rows, test, 1));
    }
    worst_points.retain(|r| r.residual > 0.0);
    worst_points.truncate(opts.keep_worst);
    Ok(PairConditionReport {
        pair: pair.name.clone(),
        terminal_ok: mt <= opts.tol_val,
        viscosity_ok: mv <= tol_visc,
        dabs_ok: md <= opts.tol_dd,
        max_terminal_gap: mt,
        max_viscosity: mv,
        max_dabs: md,
        tol_visc,
        tol_dd: opts.tol_dd,
        tol_val: opts.tol_val,
        checked_points: points.len(),
        gradient_samples: outs.iter().map(|o| o.samples).sum(),
        proximal_samples: outs.iter().map(|o| o.proximal).sum(),
        worst_points,
        rows,
    })
}

/// Outcome of the control-selection search at one point.
#[derive(Clone, Debug, PartialEq)]
pub enum Selection {
    /// Indices into P and Q of the first pair satisfying all three conditions.
    Found { u: usize, v: usize },
    /// Deepest condition (5, 6 or 7) some pair satisfied, 0 if none.
    Failed { reached: u8 },
    /// Not smooth here; conditions do not apply.
    Excluded,
}

#[derive(Clone, Debug)]
pub struct PointSelection {
    pub t: f64,
    pub x: Vec<f64>,
    pub selection: Selection,
}

#[derive(Clone, Debug)]
pub struct SelectionReport {
    pub pair: String,
    pub first_best_ok: bool,
    pub second_best_ok: bool,
    pub transport_ok: bool,
    pub checked: usize,
    pub excluded: usize,
    pub failures: Vec<PointSelection>,
    pub points: Vec<PointSelection>,
}

impl SelectionReport {
    pub fn pass(&self) -> bool {
        self.first_best_ok && self.second_best_ok && self.transport_ok
    }

    pub fn summary(&self) -> String {
        let flag = |b: bool| if b { "PASS" } else { "FAIL" };
        let mut s = format!("smooth control-selection check of pair {} ({BANNER})\n", self.pair);
        s.push_str(&format!("verdict: {}\n", flag(self.pass())));
        s.push_str(&format!(
            "own-control maximization: {}\nopponent-control maximization: {}\nstationarity: {}\n",
            flag(self.first_best_ok),
            flag(self.second_best_ok),
            flag(self.transport_ok)
        ));
        s.push_str(&format!("checked points: {}, excluded as non-smooth: {}, failures: {}\n", self.checked, self.excluded, self.failures.len()));
        for f in self.failures.iter().take(10) {
            s.push_str(&format!("  failure at t={} x={:?}: {:?}\n", f.t, f.x, f.selection));
        }
        s
    }

    pub fn write_csv<W: Write>(&self, spec: &GameSpec, mut w: W) -> Result<()> {
        let n = spec.state_dim;
        let mut header = String::from("t");
        for d in 0..n {
            header.push_str(&format!(",x{}", d + 1));
        }
        header.push_str(",status,u_index,v_index\n");
        w.write_all(header.as_bytes())?;
        for p in &self.points {
            let xs: Vec<String> = p.x.iter().map(|v| v.to_string()).collect();
            let (status, u, v) = match &p.selection {
                Selection::Found { u, v } => ("found".to_string(), u.to_string(), v.to_string()),
                Selection::Failed { reached } => (format!("failed_after_{reached}"), String::new(), String::new()),
                Selection::Excluded => ("excluded".to_string(), String::new(), String::new()),
            };
            writeln!(w, "{},{},{status},{u},{v}", p.t, xs.join(","))?;
        }
        Ok(())
    }
}

fn gradient_of(f: &dyn ScalarField, t: f64, x: &[f64], t0: f64, theta0: f64, h: f64) -> Result<(f64, Vec<f64>)> {
    match f.gradient(t, x) {
        Some(g) => Ok(g),
        None => {
            let g = fd_gradient(f, t, x, h, t0, theta0)?;
            Ok((g[0], g[1..].to_vec()))
        }
    }
}

fn smooth_here(f: &dyn ScalarField, t: f64, x: &[f64], t0: f64, theta0: f64, opts: &SmoothOptions) -> Result<bool> {
    if let Some(b) = f.smooth_at(t, x) {
        return Ok(b);
    }
    let gs = clarke_samples(f, t, x, t0, theta0, opts)?;
    let tol = opts.resolved_tol_visc();
    let first = gs[0].as_vec();
    Ok(gs.iter().all(|g| g.as_vec().iter().zip(&first).all(|(a, b)| (a - b).abs() <= tol)))
}

/// Searches P x Q for (u, v) where u maximizes <grad c1, f(., v)>, v
/// maximizes <grad c2, f(u, .)> and both components are stationary along
/// f(u, v). Non-smooth points are excluded.
pub fn check_control_selection(pair: &CandidatePair, spec: &GameSpec, points: &[(f64, Vec<f64>)], opts: &SmoothOptions) -> Result<SelectionReport> {
    let tol = opts.resolved_tol_visc();
    let (t0, theta0) = (spec.t0, spec.theta0);
    let np = spec.p.len();
    let nq = spec.q.len();
    let sel: Vec<PointSelection> = points
        .par_iter()
        .map(|(t, x)| -> Result<PointSelection> {
            let (t, x) = (*t, x.as_slice());
            let done = |selection| Ok(PointSelection { t, x: x.to_vec(), selection });
            if pair.smoothness == Smoothness::Piecewise
                && !(smooth_here(pair.c1.as_ref(), t, x, t0, theta0, opts)? && smooth_here(pair.c2.as_ref(), t, x, t0, theta0, opts)?)
            {
                return done(Selection::Excluded);
            }
            let (a1, g1) = gradient_of(pair.c1.as_ref(), t, x, t0, theta0, opts.fd_step)?;
            let (a2, g2) = gradient_of(pair.c2.as_ref(), t, x, t0, theta0, opts.fd_step)?;
            let mut f = vec![0.0; spec.state_dim];
            let mut table = vec![[0.0f64; 2]; np * nq];
            for i in 0..np {
                for j in 0..nq {
                    spec.velocity_into(t, x, i, j, &mut f);
                    let dot = |g: &[f64]| g.iter().zip(&f).map(|(a, b)| a * b).sum::<f64>();
                    table[i * nq + j] = [dot(&g1), dot(&g2)];
                }
            }
            let mut reached = 0u8;
            for i in 0..np {
                for j in 0..nq {
                    let best_u = (0..np).map(|k| table[k * nq + j][0]).fold(f64::NEG_INFINITY, f64::max);
                    if table[i * nq + j][0] < best_u - tol {
                        continue;
                    }
                    reached = reached.max(5);
                    let best_v = (0..nq).map(|k| table[i * nq + k][1]).fold(f64::NEG_INFINITY, f64::max);
                    if table[i * nq + j][1] < best_v - tol {
                        continue;
                    }
                    reached = reached.max(6);
                    if (a1 + table[i * nq + j][0]).abs() <= tol && (a2 + table[i * nq + j][1]).abs() <= tol {
                        return done(Selection::Found { u: i, v: j });
                    }
                }
            }
            done(Selection::Failed { reached })
        })
        .collect::<Result<_>>()?;
    let excluded = sel.iter().filter(|p| p.selection == Selection::Excluded).count();
    let failures: Vec<PointSelection> = sel.iter().filter(|p| matches!(p.selection, Selection::Failed { .. })).cloned().collect();
    let reached_at_least = |k: u8| {
        failures.iter().all(|p| match p.selection {
            Selection::Failed { reached } => reached >= k,
            _ => true,
        })
    };
    Ok(SelectionReport {
        pair: pair.name.clone(),
        first_best_ok: reached_at_least(5),
        second_best_ok: reached_at_least(6),
        transport_ok: failures.is_empty(),
        checked: sel.len() - excluded,
        excluded,
        failures,
        points: sel,
    })
}
