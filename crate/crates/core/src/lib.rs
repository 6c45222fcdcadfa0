//! Kernel density estimation with kernels whose Fourier transform is real,
//! symmetric and nonincreasing on the positive half-line.
//!
//! The crate selects such a kernel from data by minimizing the least-squares
//! cross-validation criterion over a dyadic discretization of the class,
//! computes the MISE-optimal member of the class (the monotone oracle) for
//! analytic test densities, and provides the wavelet-coefficient diagnostics
//! used to bound the empirical processes behind the oracle inequality.
//!
//! Every kernel is represented by its Fourier transform: a step function on
//! a [`FrequencyGrid`] covering `[0, W)`, extended symmetrically to negative
//! frequencies and zero outside `[-W, W]`.

pub mod bench;
pub mod cli;
pub mod criteria;
pub mod densities;
mod error;
pub mod quad;
pub mod selector;
pub mod spectral;
pub mod waveletdiag;

pub use criteria::{EmpiricalSpectrum, RiskReport};
pub use densities::{DensityModel, SampleSet};
pub use error::{Error, Result};
pub use selector::{RefinementStep, RefinementTrace, SeparableObjective};
pub use spectral::{FrequencyGrid, SpectralKernel};
