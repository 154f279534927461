//! McCann geodesics between Gaussian measures and projection onto them.
//!
//! For `μ₀ = N(m₀, S₀)` and `μ₁ = N(m₁, S₁)` the optimal map of the centered
//! parts is the SPD matrix
//!
//! ```text
//! Λ = S₁^{1/2} (S₁^{1/2} S₀ S₁^{1/2})^{-1/2} S₁^{1/2}
//! ```
//!
//! and the constant-speed geodesic stays Gaussian:
//!
//! ```text
//! m(t) = (1 − t) m₀ + t m₁
//! S(t) = ((1 − t) I + t Λ) S₀ ((1 − t) I + t Λ)
//! ```

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::measure::{w2_distance, w2_squared, GaussianMeasure};
use crate::search;
use crate::spd::SpdMatrix;

/// Segments shorter than this are treated as constant curves.
pub const DEGENERATE_LENGTH: f64 = 1e-12;

/// Grid size of the registration scan.
pub const REGISTRATION_GRID: usize = 257;

/// Bracket width at which the golden-section refinement stops.
pub const REGISTRATION_TOL: f64 = 1e-8;

/// Optimal transport map `Λ` pushing the centered `from` onto the centered `to`.
pub fn transport_map(from: &GaussianMeasure, to: &GaussianMeasure) -> Result<SpdMatrix> {
    if from.dim() != to.dim() {
        return Err(Error::DimMismatch {
            expected: from.dim(),
            got: to.dim(),
        });
    }
    let root = to.dispersion_sqrt().as_matrix();
    let inner = SpdMatrix::from_symmetric_unchecked(root * from.dispersion().as_matrix() * root);
    let inner_inv_root = inner.inv_sqrt()?;
    let map = root * inner_inv_root.as_matrix() * root;
    Ok(SpdMatrix::from_symmetric_unchecked(map))
}

/// The geodesic `γ : [0, 1] → P₂(ℝᵈ)` with `γ(0) = source`, `γ(1) = target`.
#[derive(Debug, Clone)]
pub struct GeodesicSegment {
    source: GaussianMeasure,
    target: GaussianMeasure,
    map: SpdMatrix,
    length: f64,
}

impl GeodesicSegment {
    pub fn source(&self) -> &GaussianMeasure {
        &self.source
    }

    pub fn target(&self) -> &GaussianMeasure {
        &self.target
    }

    /// The transport map `Λ` of the centered parts.
    pub fn map(&self) -> &SpdMatrix {
        &self.map
    }

    /// `W₂(γ(0), γ(1))`.
    pub fn length(&self) -> f64 {
        self.length
    }

    /// Coincident endpoints: the curve is constant.
    pub fn is_degenerate(&self) -> bool {
        self.length < DEGENERATE_LENGTH
    }

    /// `γ(t)`. The endpoints are returned verbatim.
    pub fn point_at(&self, t: f64) -> Result<GaussianMeasure> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::OutOfRange { value: t });
        }
        if t == 0.0 {
            return Ok(self.source.clone());
        }
        if t == 1.0 {
            return Ok(self.target.clone());
        }
        let d = self.source.dim();
        let location = self.source.location() * (1.0 - t) + self.target.location() * t;
        let a = DMatrix::identity(d, d) * (1.0 - t) + self.map.as_matrix() * t;
        let dispersion = &a * self.source.dispersion().as_matrix() * &a;
        GaussianMeasure::new(location, SpdMatrix::from_symmetric_unchecked(dispersion))
    }

    /// Projects `mu` onto the segment: minimizes `t ↦ W₂²(mu, γ(t))` over `[0, 1]`.
    ///
    /// Degenerate segments register every measure at `t = 0`.
    pub fn register(&self, mu: &GaussianMeasure) -> Result<RegistrationSolution> {
        if mu.dim() != self.source.dim() {
            return Err(Error::DimMismatch {
                expected: self.source.dim(),
                got: mu.dim(),
            });
        }
        if self.is_degenerate() {
            return Ok(RegistrationSolution {
                tau: 0.0,
                dist: w2_distance(mu, &self.source)?,
                degenerate: true,
            });
        }
        let best = search::grid_then_golden(
            |t| w2_squared(mu, &self.point_at(t)?),
            REGISTRATION_GRID,
            REGISTRATION_TOL,
        )?;
        Ok(RegistrationSolution {
            tau: best.t,
            dist: best.value.max(0.0).sqrt(),
            degenerate: false,
        })
    }
}

/// Builds the geodesic from `a` to `b`.
pub fn make_geodesic(a: &GaussianMeasure, b: &GaussianMeasure) -> Result<GeodesicSegment> {
    let length = w2_distance(a, b)?;
    let map = if length < DEGENERATE_LENGTH {
        SpdMatrix::identity(a.dim())
    } else {
        transport_map(a, b)?
    };
    Ok(GeodesicSegment {
        source: a.clone(),
        target: b.clone(),
        map,
        length,
    })
}

pub fn point_at(g: &GeodesicSegment, t: f64) -> Result<GaussianMeasure> {
    g.point_at(t)
}

pub fn register(mu: &GaussianMeasure, g: &GeodesicSegment) -> Result<RegistrationSolution> {
    g.register(mu)
}

/// Minimizer of a registration problem and the distance attained there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegistrationSolution {
    pub tau: f64,
    pub dist: f64,
    /// Set when the segment was a constant curve and `tau` is conventional.
    pub degenerate: bool,
}
