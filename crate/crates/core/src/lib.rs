//! Wasserstein K-means for Gaussian measures.
//!
//! Observations are Gaussians `N(m, S)`, compared with the closed-form
//! quadratic Wasserstein distance and averaged with Wasserstein barycenters.
//! After clustering, each member is registered on the geodesic from the
//! global barycenter to its cluster center, which scores how firmly it
//! belongs there and yields a compactness index per cluster.
//!
//! | module | contents |
//! |---|---|
//! | [`spd`] | SPD matrices, square roots, repair of near-singular input |
//! | [`measure`] | Gaussian measures, collections, `W₂` |
//! | [`barycenter`] | weighted Wasserstein barycenters |
//! | [`geodesic`] | McCann geodesics and registration |
//! | [`clustering`] | Wasserstein K-means |
//! | [`compactness`] | double registration and the compactness index |
//! | [`ingest`] | panel CSV to one measure per entity and period |
//!
//! The guide in `book/` walks through each step with runnable examples.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barycenter;
pub mod clustering;
pub mod compactness;
pub mod error;
pub mod geodesic;
pub mod ingest;
pub mod measure;
pub mod search;
pub mod spd;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/measures.md")]
    mod measures {}
    #[doc = include_str!("../../../book/src/barycenters.md")]
    mod barycenters {}
    #[doc = include_str!("../../../book/src/geodesics.md")]
    mod geodesics {}
    #[doc = include_str!("../../../book/src/kmeans.md")]
    mod kmeans {}
    #[doc = include_str!("../../../book/src/compactness.md")]
    mod compactness {}
    #[doc = include_str!("../../../book/src/ingest.md")]
    mod ingest {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
