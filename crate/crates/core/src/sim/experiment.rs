use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use super::motion::{simulate, SimOptions};
use super::profile::Profile;
use super::strategy::{AgreedThenConstant, BangBang, FeedbackStrategy, GreedyLookahead, RandomControl};
use crate::error::{Error, Result};
use crate::game::{GameSpec, Player};
use crate::value::ValueField;

/// Named unilateral deviation of one player.
#[derive(Clone, Debug)]
pub struct Deviation {
    pub name: String,
    pub strategy: FeedbackStrategy,
}

impl Deviation {
    pub fn new(strategy: FeedbackStrategy) -> Self {
        Self {
            name: strategy.name(),
            strategy,
        }
    }
}

/// Standard deviation set for `deviant`: every constant control, six
/// bang-bang switches between the first and last samples, greedy play on
/// the deviant's cooperative maximum and lower value (when given), two
/// agreed-then-constant switches and two random laws.
pub fn deviation_catalog(
    spec: &GameSpec,
    profile: &Profile,
    deviant: Player,
    coop: Option<Arc<ValueField>>,
    lower: Option<Arc<ValueField>>,
) -> Vec<Deviation> {
    let m = spec.controls(deviant).len();
    let (t0, t1) = (profile.t_start, spec.theta0);
    let mut out: Vec<Deviation> = (0..m).map(|i| Deviation::new(FeedbackStrategy::Constant(i))).collect();
    for frac in [0.25, 0.5, 0.75] {
        let switch_at = t0 + frac * (t1 - t0);
        for (first, second) in [(0, m - 1), (m - 1, 0)] {
            out.push(Deviation::new(FeedbackStrategy::Custom(Arc::new(BangBang { first, second, switch_at }))));
        }
    }
    if let Some(field) = coop {
        out.push(Deviation::new(FeedbackStrategy::Custom(Arc::new(GreedyLookahead {
            field,
            step: profile.step,
            cooperative: true,
        }))));
    }
    if let Some(field) = lower {
        out.push(Deviation::new(FeedbackStrategy::Custom(Arc::new(GreedyLookahead {
            field,
            step: profile.step,
            cooperative: false,
        }))));
    }
    let mid = 0.5 * (t0 + t1);
    for control in [0, m - 1] {
        out.push(Deviation::new(FeedbackStrategy::Custom(Arc::new(AgreedThenConstant {
            agreed: profile.agreed.clone(),
            switch_at: mid,
            control,
        }))));
    }
    for seed in [1, 2] {
        out.push(Deviation::new(FeedbackStrategy::Custom(Arc::new(RandomControl { seed }))));
    }
    out
}

#[derive(Clone, Debug)]
pub struct ExperimentOptions {
    pub eps_schedule: Vec<f64>,
    /// Trial 0 uses uniform partitions, later trials jittered ones.
    pub trials: usize,
    pub jitter: f64,
    pub seed: u64,
    /// Gain tolerance tol_base + tol_slope * eps.
    pub tol_base: f64,
    pub tol_slope: f64,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            eps_schedule: vec![0.02, 0.01, 0.005],
            trials: 2,
            jitter: 0.3,
            seed: 1,
            tol_base: 0.1,
            tol_slope: 5.0,
        }
    }
}

impl ExperimentOptions {
    pub fn tol_nash(&self, eps: f64) -> f64 {
        self.tol_base + self.tol_slope * eps
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub deviation: String,
    pub eps: f64,
    pub trial: usize,
    pub deviant_payoff: f64,
    pub profile_payoff: f64,
    pub gain: f64,
    /// Whether the non-deviating player ever punished.
    pub punished: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpsSummary {
    pub eps: f64,
    pub max_gain: f64,
    pub tol: f64,
    pub worst: String,
}

#[derive(Clone, Debug)]
pub struct DeviationReport {
    pub deviant: Player,
    pub rows: Vec<RunRecord>,
    pub per_eps: Vec<EpsSummary>,
    pub max_gain: f64,
    /// Largest |gain| of the profile replayed against itself; must be 0.
    pub self_gain: f64,
    /// Linear extrapolation of the worst gain to eps = 0 from the two finest precisions.
    pub extrapolated_gain: Option<f64>,
}

impl DeviationReport {
    pub fn pass(&self) -> bool {
        self.self_gain == 0.0 && self.per_eps.iter().all(|e| e.max_gain <= e.tol)
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "evidence: numerical deviation test for player {:?} ({} runs); a pass is not a proof of equilibrium\n",
            self.deviant,
            self.rows.len()
        );
        for e in &self.per_eps {
            s.push_str(&format!(
                "  eps={}: max gain {:.4} (tol {:.4}) worst {} -> {}\n",
                e.eps,
                e.max_gain,
                e.tol,
                e.worst,
                if e.max_gain <= e.tol { "ok" } else { "FAIL" }
            ));
        }
        s.push_str(&format!("  profile self-gain {}\n", self.self_gain));
        if let Some(x) = self.extrapolated_gain {
            s.push_str(&format!("  extrapolated gain at eps->0: {x:.4}\n"));
        }
        s.push_str(if self.pass() { "  PASS\n" } else { "  FAIL\n" });
        s
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "deviation,eps,trial,deviant_payoff,profile_payoff,gain,punished")?;
        for r in &self.rows {
            writeln!(
                w,
                "\"{}\",{},{},{},{},{},{}",
                r.deviation.replace('"', "'"),
                r.eps,
                r.trial,
                r.deviant_payoff,
                r.profile_payoff,
                r.gain,
                r.punished as u8
            )?;
        }
        Ok(())
    }
}

/// Plays the profile and every deviation of `deviant` for each precision
/// and trial. Both runs of a comparison share the same partitions, so the
/// gain isolates the deviation.
pub fn deviation_experiment(
    spec: &GameSpec,
    profile: &Profile,
    deviant: Player,
    catalog: &[Deviation],
    opts: &ExperimentOptions,
) -> Result<DeviationReport> {
    if opts.eps_schedule.is_empty() || opts.trials == 0 {
        return Err(Error::Precondition("deviation experiment needs at least one precision and one trial".into()));
    }
    let own = profile.strategy(deviant).clone();
    let mut entries = vec![Deviation {
        name: "profile".into(),
        strategy: own,
    }];
    entries.extend(catalog.iter().cloned());
    let n_entries = entries.len();
    let jobs: Vec<(f64, usize, usize)> = opts
        .eps_schedule
        .iter()
        .flat_map(|&eps| (0..opts.trials).flat_map(move |trial| (0..n_entries).map(move |e| (eps, trial, e))))
        .collect();

    let run = |eps: f64, trial: usize, strat: &FeedbackStrategy| {
        let sim = SimOptions {
            jitter: if trial == 0 { 0.0 } else { opts.jitter },
        };
        let seed = opts.seed.wrapping_add(trial as u64);
        let (u, v) = match deviant {
            Player::First => (strat, &profile.v),
            Player::Second => (&profile.u, strat),
        };
        simulate(spec, profile.t_start, &profile.x_start, u, eps, v, eps, seed, &sim)
    };

    let baselines: Vec<((f64, usize), f64)> = opts
        .eps_schedule
        .iter()
        .flat_map(|&eps| (0..opts.trials).map(move |trial| (eps, trial)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(eps, trial)| Ok(((eps, trial), run(eps, trial, profile.strategy(deviant))?.payoff(deviant))))
        .collect::<Result<_>>()?;
    let baseline = |eps: f64, trial: usize| {
        baselines
            .iter()
            .find(|b| b.0 .0 == eps && b.0 .1 == trial)
            .map(|b| b.1)
            .expect("baseline for every precision and trial")
    };

    let rows: Vec<RunRecord> = jobs
        .into_par_iter()
        .map(|(eps, trial, e)| {
            let d = &entries[e];
            let traj = run(eps, trial, &d.strategy)?;
            let dev = traj.payoff(deviant);
            let base = baseline(eps, trial);
            let punisher = deviant.other();
            Ok(RunRecord {
                deviation: d.name.clone(),
                eps,
                trial,
                deviant_payoff: dev,
                profile_payoff: base,
                gain: dev - base,
                punished: traj.punishing.iter().any(|p| if punisher == Player::First { p.0 } else { p.1 }),
            })
        })
        .collect::<Result<_>>()?;

    let self_gain = rows.iter().filter(|r| r.deviation == "profile").map(|r| r.gain.abs()).fold(0.0, f64::max);
    let per_eps: Vec<EpsSummary> = opts
        .eps_schedule
        .iter()
        .map(|&eps| {
            let worst = rows
                .iter()
                .filter(|r| r.eps == eps)
                .max_by(|a, b| a.gain.total_cmp(&b.gain))
                .expect("rows for every precision");
            EpsSummary {
                eps,
                max_gain: worst.gain,
                tol: opts.tol_nash(eps),
                worst: worst.deviation.clone(),
            }
        })
        .collect();
    let max_gain = per_eps.iter().map(|e| e.max_gain).fold(f64::NEG_INFINITY, f64::max);
    let extrapolated_gain = {
        let mut sorted = per_eps.clone();
        sorted.sort_by(|a, b| a.eps.total_cmp(&b.eps));
        (sorted.len() >= 2 && sorted[0].eps < sorted[1].eps).then(|| {
            let (a, b) = (&sorted[0], &sorted[1]);
            a.max_gain - a.eps * (b.max_gain - a.max_gain) / (b.eps - a.eps)
        })
    };
    Ok(DeviationReport {
        deviant,
        rows,
        per_eps,
        max_gain,
        self_gain,
        extrapolated_gain,
    })
}
