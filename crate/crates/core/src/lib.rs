//! Numerical solution and verification of one-dimensional quadratic BSDEs
//!
//! ```text
//! dY_t = -f(t, Y_t, Z_t) dt + Z_t . dB_t,    Y_T = xi.
//! ```
//!
//! The crate covers driver validation and truncation, a finite-difference
//! solver for the Markovian Lipschitz case, the forward-approximation pipeline
//! for quadratic drivers, the `L^f` calculus of f-subharmonic test functions,
//! statistical f-martingale checks and coupled-Brownian experiments.

pub mod coupling;
pub mod driver;
pub mod error;
pub mod forward;
pub mod martingale;
pub mod paths;
pub mod pde;
pub mod registry;
pub mod report;
pub mod rng;
pub mod subharmonic;

pub use driver::{project_ball, truncate, validate_driver, DriverSpec, SamplingBox, ValidationReport};
pub use error::{Error, Result};
pub use paths::{simulate_bm, ItoProcess, PathEnsemble, TimeGrid};
pub use pde::{extract_solution, solve_semilinear, sup_bound_check, ExtractOptions, SpaceGrid, TerminalCondition, ValueGrid};
pub use forward::{kobylanski_pipeline, simulate_forward, terminal_gap, ForwardRun, PipelineConfig, PipelineReport};
pub use martingale::{bmo_estimate, bsde_residual, estimate_drift, f_martingale_test, BinSpec, MartingaleReport, TestFamily};
pub use coupling::{coupled_solutions, lusin_check, simulate_coupled_bm, sp_ratio, tail_estimate, ui_report, LocalCorrelation};
pub use subharmonic::{construct_subharmonic, eval_lf, is_subharmonic, majorize_cone_quadratic, TestFunction};
