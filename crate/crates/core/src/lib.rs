//! Correlation-matrix denoising with random matrix theory and single-index
//! regression, applied to forecasting the risk of Markowitz portfolios.
//!
//! Every numeric type is generic over the scalar ([`Real`], implemented for
//! `f32` and `f64`) and defaults to `f64`. The `*F32` aliases below name the
//! single-precision variants.

pub mod error;
pub mod linalg;
pub mod marketdata;
pub mod markowitz;
pub mod metrics;
pub mod pipeline;
pub mod rmt;
pub mod rng;
pub mod scalar;
pub mod singleindex;
pub mod synthetic;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use marketdata::{
    filter_fully_liquid, log_returns, parse_prices, Layout, PriceFormat, PricePanel, ReturnPanel,
};
pub use markowitz::{
    assemble_covariance, frontier_pair, min_risk_weights, trace_frontier, CovarianceAssembly, Frontier,
    FrontierPoint, WeightBounds,
};
pub use metrics::{compare, ComparisonReport, MethodConfig};
pub use pipeline::{run_rolling, run_year_pair, RiskEnvelope, WindowSpec};
pub use rmt::{clean, decompose, pearson_correlation, CorrelationMatrix, MpParams, SpectralDecomposition};
pub use scalar::Real;
pub use singleindex::{fit_single_index, IndexSeries, RegressionFit};

pub type MatrixF32 = Matrix<f32>;
pub type PricePanelF32 = PricePanel<f32>;
pub type ReturnPanelF32 = ReturnPanel<f32>;
pub type CorrelationMatrixF32 = CorrelationMatrix<f32>;
pub type MpParamsF32 = MpParams<f32>;
pub type SpectralDecompositionF32 = SpectralDecomposition<f32>;
pub type IndexSeriesF32 = IndexSeries<f32>;
pub type RegressionFitF32 = RegressionFit<f32>;
pub type CovarianceAssemblyF32 = CovarianceAssembly<f32>;
pub type WeightBoundsF32 = WeightBounds<f32>;
pub type FrontierF32 = Frontier<f32>;
pub type FrontierPointF32 = FrontierPoint<f32>;
pub type MethodConfigF32 = MethodConfig<f32>;
pub type ComparisonReportF32 = ComparisonReport<f32>;
