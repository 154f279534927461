//! Wasserstein barycenters of Gaussian measures.
//!
//! The barycenter of `{N(m_i, S_i)}` with weights `w` is Gaussian. Its
//! location is the weighted mean of the `m_i`; its dispersion `S_B` is the
//! unique SPD solution of
//!
//! ```text
//! S_B = Σ_i w_i (S_B^{1/2} S_i S_B^{1/2})^{1/2}
//! ```
//!
//! found here with the fixed-point map
//!
//! ```text
//! M ↦ M^{-1/2} ( Σ_i w_i (M^{1/2} S_i M^{1/2})^{1/2} )² M^{-1/2}
//! ```

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::GaussianMeasure;
use crate::spd::{self, SpdMatrix};

/// Tolerance on `|Σ w_i − 1|`.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Non-negative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidWeights("no weights".into()));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidWeights(format!("weight {w} is negative or not finite")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidWeights(format!("weights sum to {total}, not 1")));
        }
        Ok(WeightVector(weights))
    }

    /// `1/n` each.
    pub fn uniform(n: usize) -> Self {
        WeightVector(vec![1.0 / n as f64; n])
    }

    /// Rescales non-negative values to sum to one.
    pub fn normalized(raw: &[f64]) -> Result<Self> {
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) || raw.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidWeights("weights must be non-negative with a positive sum".into()));
        }
        Ok(WeightVector(raw.iter().map(|w| w / total).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarycenterInit {
    FirstMember,
    EuclideanMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarycenterConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub init: BarycenterInit,
}

impl Default for BarycenterConfig {
    fn default() -> Self {
        BarycenterConfig {
            tol: 1e-10,
            max_iter: 500,
            init: BarycenterInit::EuclideanMean,
        }
    }
}

impl BarycenterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!("barycenter tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("barycenter max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BarycenterResult {
    pub barycenter: GaussianMeasure,
    pub iterations: usize,
    /// `‖S_B − Σ w_i (S_B^{1/2} S_i S_B^{1/2})^{1/2}‖_F`.
    pub residual: f64,
    /// False when `max_iter` was reached first; the last iterate is still returned.
    pub converged: bool,
}

impl BarycenterResult {
    /// Turns a non-converged result into [`Error::MaxIterExceeded`].
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::MaxIterExceeded {
                iterations: self.iterations,
                residual: self.residual,
            })
        }
    }
}

fn check_inputs(measures: &[GaussianMeasure], weights: &WeightVector) -> Result<usize> {
    let first = measures
        .first()
        .ok_or_else(|| Error::InvalidCollection("barycenter of an empty collection".into()))?;
    if weights.len() != measures.len() {
        return Err(Error::DimMismatch {
            expected: measures.len(),
            got: weights.len(),
        });
    }
    let d = first.dim();
    if let Some(bad) = measures.iter().find(|m| m.dim() != d) {
        return Err(Error::DimMismatch {
            expected: d,
            got: bad.dim(),
        });
    }
    Ok(d)
}

/// `m_B = Σ w_i m_i`.
pub fn barycenter_location(measures: &[GaussianMeasure], weights: &WeightVector) -> Result<DVector<f64>> {
    let d = check_inputs(measures, weights)?;
    let mut loc = DVector::zeros(d);
    for (m, w) in measures.iter().zip(weights.as_slice()) {
        if *w > 0.0 {
            loc.axpy(*w, m.location(), 1.0);
        }
    }
    Ok(loc)
}

/// `Σ_i w_i (M^{1/2} S_i M^{1/2})^{1/2}` for a given `M^{1/2}`.
fn root_mean(root: &DMatrix<f64>, measures: &[GaussianMeasure], weights: &[f64]) -> DMatrix<f64> {
    let d = root.nrows();
    let terms: Vec<DMatrix<f64>> = measures
        .par_iter()
        .zip(weights.par_iter())
        .filter(|(_, w)| **w > 0.0)
        .map(|(m, w)| {
            let inner = spd::symmetrize(&(root * m.dispersion().as_matrix() * root));
            spd::spectral_map(&inner, |l| l.max(0.0).sqrt()) * *w
        })
        .collect();
    // summed in input order so results do not depend on thread scheduling
    terms.into_iter().fold(DMatrix::zeros(d, d), |acc, t| acc + t)
}

/// One application of the fixed-point map.
pub fn fixed_point_step(m: &SpdMatrix, measures: &[GaussianMeasure], weights: &WeightVector) -> Result<SpdMatrix> {
    let d = check_inputs(measures, weights)?;
    if m.dim() != d {
        return Err(Error::DimMismatch {
            expected: d,
            got: m.dim(),
        });
    }
    let root = m.sqrt();
    let inv_root = m.inv_sqrt()?;
    let sum = root_mean(root.as_matrix(), measures, weights.as_slice());
    let next = inv_root.as_matrix() * (&sum * &sum) * inv_root.as_matrix();
    checked_spd(next)
}

/// Fixed-point defect `‖S − Σ w_i (S^{1/2} S_i S^{1/2})^{1/2}‖_F`.
pub fn fixed_point_residual(s: &SpdMatrix, measures: &[GaussianMeasure], weights: &WeightVector) -> Result<f64> {
    check_inputs(measures, weights)?;
    let sum = root_mean(s.sqrt().as_matrix(), measures, weights.as_slice());
    Ok((s.as_matrix() - sum).norm())
}

fn checked_spd(m: DMatrix<f64>) -> Result<SpdMatrix> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalBreakdown("fixed-point iterate is not finite".into()));
    }
    let m = spd::symmetrize(&m);
    SpdMatrix::new(m)
}

/// Weighted Wasserstein barycenter. Measures with zero weight are ignored.
pub fn wasserstein_barycenter(
    measures: &[GaussianMeasure],
    weights: &WeightVector,
    config: &BarycenterConfig,
) -> Result<BarycenterResult> {
    config.validate()?;
    let d = check_inputs(measures, weights)?;
    let location = barycenter_location(measures, weights)?;

    let (active, w): (Vec<GaussianMeasure>, Vec<f64>) = measures
        .iter()
        .zip(weights.as_slice())
        .filter(|(_, w)| **w > 0.0)
        .map(|(m, w)| (m.clone(), *w))
        .unzip();
    let total: f64 = w.iter().sum();
    let w = WeightVector(w.into_iter().map(|x| x / total).collect());

    if active.len() == 1 {
        return Ok(BarycenterResult {
            barycenter: GaussianMeasure::new(location, active[0].dispersion().clone())?,
            iterations: 0,
            residual: 0.0,
            converged: true,
        });
    }

    let mut current = match config.init {
        BarycenterInit::FirstMember => active[0].dispersion().clone(),
        BarycenterInit::EuclideanMean => {
            let mut acc = DMatrix::zeros(d, d);
            for (m, wi) in active.iter().zip(w.as_slice()) {
                acc += m.dispersion().as_matrix() * *wi;
            }
            SpdMatrix::from_symmetric_unchecked(acc)
        }
    };

    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iter {
        let next = fixed_point_step(&current, &active, &w)?;
        iterations += 1;
        let change = next.frobenius_distance(&current);
        let scale = current.as_matrix().norm().max(1.0);
        current = next;
        if change <= config.tol * scale {
            converged = true;
            break;
        }
    }

    let residual = fixed_point_residual(&current, &active, &w)?;
    if !converged {
        log::warn!("barycenter iteration stopped after {iterations} steps with residual {residual:e}");
    }
    Ok(BarycenterResult {
        barycenter: GaussianMeasure::new(location, current)?,
        iterations,
        residual,
        converged,
    })
}

/// Equal-weight barycenter with the default configuration.
pub fn uniform_barycenter(measures: &[GaussianMeasure]) -> Result<BarycenterResult> {
    wasserstein_barycenter(measures, &WeightVector::uniform(measures.len()), &BarycenterConfig::default())
}
