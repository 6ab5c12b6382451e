//! Nash-equilibrium payoff maps for two-person nonzero-sum differential
//! games with terminal payoffs.

pub mod config;
pub mod error;
pub mod game;
pub mod grid;
pub mod nash;
pub mod oracle;
pub mod sim;
pub mod smooth;
pub mod value;

pub use error::{Error, Result};
pub use game::{GameSpec, Player};
pub use grid::{BoundaryPolicy, Grid, Stride};
pub use value::{FieldLabel, SolverOptions, ValueField};
