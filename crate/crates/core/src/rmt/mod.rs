//! Random-matrix tools: the Marčenko-Pastur reference law, spectra of
//! correlation matrices, noise-band cleaning and goodness-of-fit testing.

pub mod ks;
pub mod mp;
pub mod shuffle;
pub mod spectrum;

pub use ks::{ks_one_sample, ks_one_sample_with, ks_two_sample, kolmogorov_survival, qq_points, KsResult};
pub use mp::MpParams;
pub use shuffle::{mp_sample, pool, shuffle_eigenvalue_sample};
pub use spectrum::{clean, decompose, pearson_correlation, Band, CorrelationMatrix, SpectralDecomposition};
