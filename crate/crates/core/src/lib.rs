//! Sparse-view parallel-beam CT reconstruction.
//!
//! The centrepiece is IHT-POCS: ART data-consistency sweeps alternated
//! with hard thresholding of the discrete gradient transform, mapped back
//! to the image through a local pseudo-inverse filter. ART, ART-TV and
//! IST-TV baselines, test phantoms, quality metrics and a residual-based
//! sparsity estimator come with it.
//!
//! ```
//! use sparsect::{phantom, Geometry, Method, Projector, SolverConfig, SystemMatrix, reconstruct};
//!
//! let truth = phantom::shepp_logan(32, 32)?;
//! let projector = Projector::precomputed(Geometry::parallel_beam(32, 32, 12)?);
//! let sino = projector.forward(&truth)?;
//!
//! let cfg = SolverConfig::new(Method::IhtPocs, 50).with_sparsity(300);
//! let result = reconstruct(&projector, &sino, &cfg, Some(&truth))?;
//! assert_eq!(result.iterations, 50);
//! # Ok::<(), sparsect::Error>(())
//! ```

// Checks like `!(x >= 0.0)` are written that way so NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dgt;
mod error;
pub mod geometry;
mod image;
pub mod io;
pub mod metrics;
pub mod phantom;
pub mod projector;
pub mod solvers;
pub mod sparsity;

pub use dgt::{
    gradient_magnitude, hard_threshold_pinv, l0_norm, select_threshold, soft_threshold_pinv, GradientMap, Threshold,
};
pub use error::{Error, FormatError, Result};
pub use geometry::Geometry;
pub use image::{delinearize, linearize, ConvergenceTrace, Image, Sinogram, TraceRecord};
pub use metrics::{naad, nmsd, psnr, MetricReport};
pub use projector::{forward_project, row_norm_sq, ExplicitMatrix, Projector, Ray, SparseRow, SystemMatrix};
pub use solvers::{
    art_sweep, positivity_clamp, reconstruct, reconstruct_with, Method, ReconResult, Relaxation, SolverConfig, TvParams,
};
pub use sparsity::{estimate_sparsity, residual_at, EstimateConfig, ResidualCurve, SparsityEstimate, SparsityGrid};

// The guide's and the README's code blocks run as doctests of this crate.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/projector.md")]
    mod projector {}
    #[doc = include_str!("../../../book/src/filter.md")]
    mod filter {}
    #[doc = include_str!("../../../book/src/iht_pocs.md")]
    mod iht_pocs {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/sparsity.md")]
    mod sparsity {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
