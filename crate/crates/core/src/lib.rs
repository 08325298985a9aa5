//! Safe simultaneous screening of inactive features and samples for sparse
//! SVMs (elastic-net penalty, smoothed hinge loss), with a coordinate-descent
//! solver for the reduced dual and a grid-path harness.

pub mod boundary;
pub mod cli;
pub mod datamodel;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod numeric;
pub mod objective;
pub mod screening;
pub mod solver;
pub mod verification;

pub use boundary::{alpha_max, beta_max, build_grid, closed_form_reference, Grid, GridRow, GridSpec};
pub use datamodel::{generate_synthetic, load_libsvm, parse_libsvm, Dataset, Params, SynthSpec};
pub use error::{Result, SifsError};
pub use estimation::{Ball, ReferencePoint, ScreeningState};
pub use objective::{GapReport, SolutionPair};
pub use screening::{sifs, ScreenOrder, ScreeningMode, SifsReport};
pub use solver::SolverConfig;
pub use cli::cli_main;
