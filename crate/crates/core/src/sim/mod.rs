//! Step-by-step motions, positional strategies, punishment profiles and
//! unilateral deviation experiments.

mod experiment;
mod motion;
mod profile;
mod strategy;

pub use experiment::{deviation_catalog, deviation_experiment, Deviation, DeviationReport, EpsSummary, ExperimentOptions, RunRecord};
pub use motion::{merge_partitions, simulate, simulate_on, Partition, SimOptions, Trajectory};
pub use profile::{make_punishment_profile, Profile, ProfileOptions};
pub use strategy::{
    lookahead_value, AgreedThenConstant, BangBang, ControlLaw, ControlTable, Decision, Eta, FeedbackStrategy, GreedyLookahead, PunishmentStrategy,
    RandomControl,
};
