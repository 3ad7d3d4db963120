//! Covariance assembly and minimum-risk frontiers under box constraints.

pub mod covariance;
pub mod frontier;
pub mod pair;
pub mod qp;

pub use covariance::{assemble_covariance, CorrelationSource, CovarianceAssembly};
pub use frontier::{
    frontier_grid, gmv, min_risk_weights, trace_frontier, trace_on_grid, Frontier, FrontierPoint, FrontierRow,
};
pub use pair::{frontier_pair, prepare_pair, side_model, PairSetup, SideModel};
pub use qp::{minimize_variance, return_range, QpSolution, ReturnRange, WeightBounds};
