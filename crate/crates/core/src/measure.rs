//! Gaussian measures and the closed-form quadratic Wasserstein distance.
//!
//! For `μ₁ = N(m₁, S₁)` and `μ₂ = N(m₂, S₂)`
//!
//! ```text
//! W₂²(μ₁, μ₂) = ‖m₁ − m₂‖² + Tr(S₁ + S₂ − 2 (S₁^{1/2} S₂ S₁^{1/2})^{1/2})
//! ```
//!
//! The same value holds for any two members of one location-scatter family,
//! and bounds `W₂²` from below for arbitrary measures with those first two
//! moments. Only the Gaussian reading is used here.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spd::{self, SpdMatrix};

/// Relative size a negative trace term may reach before it is treated as a
/// numerical breakdown instead of rounding noise.
pub const TRACE_CLAMP_TOL: f64 = 1e-8;

/// Relative tolerance used by [`GaussianMeasure::approx_eq`].
pub const EQ_TOL: f64 = 1e-12;

/// A Gaussian (location-scatter) measure `N(m, S)`.
///
/// The principal square root of the dispersion is computed on first use and
/// cached, since the distance and registration routines need it repeatedly.
pub struct GaussianMeasure {
    location: DVector<f64>,
    dispersion: SpdMatrix,
    root: OnceLock<SpdMatrix>,
}

impl GaussianMeasure {
    pub fn new(location: DVector<f64>, dispersion: SpdMatrix) -> Result<Self> {
        if location.len() != dispersion.dim() {
            return Err(Error::DimMismatch {
                expected: dispersion.dim(),
                got: location.len(),
            });
        }
        if location.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(GaussianMeasure {
            location,
            dispersion,
            root: OnceLock::new(),
        })
    }

    /// Builds a measure from plain slices; the covariance is checked, not repaired.
    pub fn from_parts(mean: &[f64], cov: &[Vec<f64>]) -> Result<Self> {
        GaussianMeasure::new(DVector::from_column_slice(mean), SpdMatrix::from_rows(cov)?)
    }

    /// Zero-location measure, the embedding of an SPD matrix.
    pub fn centered(dispersion: SpdMatrix) -> Self {
        let d = dispersion.dim();
        GaussianMeasure {
            location: DVector::zeros(d),
            dispersion,
            root: OnceLock::new(),
        }
    }

    /// One-dimensional `N(mean, variance)`.
    pub fn univariate(mean: f64, variance: f64) -> Result<Self> {
        GaussianMeasure::new(DVector::from_element(1, mean), SpdMatrix::from_diagonal(&[variance])?)
    }

    pub fn dim(&self) -> usize {
        self.location.len()
    }

    pub fn location(&self) -> &DVector<f64> {
        &self.location
    }

    pub fn dispersion(&self) -> &SpdMatrix {
        &self.dispersion
    }

    /// `S^{1/2}`, cached.
    pub fn dispersion_sqrt(&self) -> &SpdMatrix {
        self.root.get_or_init(|| self.dispersion.sqrt())
    }

    /// Componentwise comparison of location and dispersion, relative to the
    /// larger of the two magnitudes (and at least 1).
    pub fn approx_eq(&self, other: &GaussianMeasure, rel_tol: f64) -> bool {
        if self.dim() != other.dim() {
            return false;
        }
        let close = |a: f64, b: f64| (a - b).abs() <= rel_tol * a.abs().max(b.abs()).max(1.0);
        self.location.iter().zip(other.location.iter()).all(|(a, b)| close(*a, *b))
            && self
                .dispersion
                .as_matrix()
                .iter()
                .zip(other.dispersion.as_matrix().iter())
                .all(|(a, b)| close(*a, *b))
    }

    /// `N(m + shift, S)`.
    pub fn translated(&self, shift: &DVector<f64>) -> Result<Self> {
        GaussianMeasure::new(&self.location + shift, self.dispersion.clone())
    }

    pub fn to_record(&self, label: Option<&str>) -> MeasureRecord {
        MeasureRecord {
            label: label.map(str::to_owned),
            mean: self.location.iter().copied().collect(),
            cov: self.dispersion.to_rows(),
        }
    }
}

impl Clone for GaussianMeasure {
    fn clone(&self) -> Self {
        GaussianMeasure {
            location: self.location.clone(),
            dispersion: self.dispersion.clone(),
            root: self.root.clone(),
        }
    }
}

impl PartialEq for GaussianMeasure {
    fn eq(&self, other: &Self) -> bool {
        self.location == other.location && self.dispersion == other.dispersion
    }
}

impl fmt::Debug for GaussianMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GaussianMeasure")
            .field("location", &self.location.as_slice())
            .field("dispersion", &self.dispersion)
            .finish()
    }
}

/// On-disk form of a measure: `{"label": ..., "mean": [...], "cov": [[...]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

impl MeasureRecord {
    /// Converts to a measure, repairing the covariance with `ensure_spd`.
    pub fn to_measure(&self, jitter: f64) -> Result<GaussianMeasure> {
        let cov = spd::matrix_from_rows(&self.cov)?;
        if cov.nrows() != self.mean.len() {
            return Err(Error::DimMismatch {
                expected: self.mean.len(),
                got: cov.nrows(),
            });
        }
        GaussianMeasure::new(DVector::from_column_slice(&self.mean), spd::ensure_spd(&cov, jitter)?)
    }
}

/// Jitter applied to covariances read from JSON.
pub const LOAD_JITTER: f64 = 1e-12;

/// A non-empty, dimension-uniform, optionally labelled list of measures.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureCollection {
    measures: Vec<GaussianMeasure>,
    labels: Option<Vec<String>>,
}

impl MeasureCollection {
    pub fn new(measures: Vec<GaussianMeasure>) -> Result<Self> {
        Self::build(measures, None)
    }

    pub fn with_labels(measures: Vec<GaussianMeasure>, labels: Vec<String>) -> Result<Self> {
        Self::build(measures, Some(labels))
    }

    fn build(measures: Vec<GaussianMeasure>, labels: Option<Vec<String>>) -> Result<Self> {
        let first = measures
            .first()
            .ok_or_else(|| Error::InvalidCollection("collection is empty".into()))?;
        let d = first.dim();
        if let Some(bad) = measures.iter().find(|m| m.dim() != d) {
            return Err(Error::DimMismatch {
                expected: d,
                got: bad.dim(),
            });
        }
        if let Some(labels) = &labels {
            if labels.len() != measures.len() {
                return Err(Error::InvalidCollection(format!(
                    "{} labels for {} measures",
                    labels.len(),
                    measures.len()
                )));
            }
            let mut seen = HashSet::new();
            if let Some(dup) = labels.iter().find(|l| !seen.insert(l.as_str())) {
                return Err(Error::InvalidCollection(format!("duplicate label {dup:?}")));
            }
        }
        Ok(MeasureCollection { measures, labels })
    }

    pub fn len(&self) -> usize {
        self.measures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measures.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.measures[0].dim()
    }

    pub fn measures(&self) -> &[GaussianMeasure] {
        &self.measures
    }

    pub fn get(&self, i: usize) -> &GaussianMeasure {
        &self.measures[i]
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// The label of measure `i`, or `m{i}` when the collection is unlabelled.
    pub fn label(&self, i: usize) -> String {
        match &self.labels {
            Some(l) => l[i].clone(),
            None => format!("m{i}"),
        }
    }

    /// Sub-collection in the order given by `indices`.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let measures = indices.iter().map(|&i| self.measures[i].clone()).collect();
        let labels = self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i].clone()).collect());
        Self::build(measures, labels)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, GaussianMeasure> {
        self.measures.iter()
    }

    pub fn to_records(&self) -> Vec<MeasureRecord> {
        self.measures
            .iter()
            .enumerate()
            .map(|(i, m)| m.to_record(self.labels.as_ref().map(|l| l[i].as_str())))
            .collect()
    }

    /// Builds a collection from records. Labels are kept only when every
    /// record has one.
    pub fn from_records(records: &[MeasureRecord]) -> Result<Self> {
        let measures = records
            .iter()
            .map(|r| r.to_measure(LOAD_JITTER))
            .collect::<Result<Vec<_>>>()?;
        let labels: Option<Vec<String>> = records.iter().map(|r| r.label.clone()).collect();
        Self::build(measures, labels)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_records())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let records: Vec<MeasureRecord> = serde_json::from_str(text)?;
        Self::from_records(&records)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

impl<'a> IntoIterator for &'a MeasureCollection {
    type Item = &'a GaussianMeasure;
    type IntoIter = std::slice::Iter<'a, GaussianMeasure>;

    fn into_iter(self) -> Self::IntoIter {
        self.measures.iter()
    }
}

/// Reads a single measure, or the first element of an array of measures.
pub fn load_measure(path: impl AsRef<Path>) -> Result<(GaussianMeasure, Option<String>)> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let record: MeasureRecord = match value {
        serde_json::Value::Array(mut items) if !items.is_empty() => serde_json::from_value(items.swap_remove(0))?,
        serde_json::Value::Array(_) => return Err(Error::InvalidCollection("empty measure array".into())),
        other => serde_json::from_value(other)?,
    };
    Ok((record.to_measure(LOAD_JITTER)?, record.label))
}

/// `Tr(S₁ + S₂ − 2 (S₁^{1/2} S₂ S₁^{1/2})^{1/2})`, the dispersion part of `W₂²`.
///
/// With `R_j = S_j^{1/2}`, the eigenvalues of `(R₁ S₂ R₁)^{1/2}` are the
/// singular values of `R₁ R₂`, and the trace term equals
/// `min_U ‖R₁ − R₂ U‖²_F` over orthogonal `U`, attained at the polar factor
/// `U* = V Wᵀ` of `R₁ R₂ = W Σ Vᵀ`. The value is taken from that residual
/// matrix, which does not cancel catastrophically when `S₁ ≈ S₂`. The plain
/// trace expression is still evaluated and must not go negative beyond
/// rounding.
pub fn bures_squared(a: &GaussianMeasure, b: &GaussianMeasure) -> Result<f64> {
    check_dims(a, b)?;
    let r1 = a.dispersion_sqrt().as_matrix();
    let r2 = b.dispersion_sqrt().as_matrix();
    let svd = (r1 * r2).svd(true, true);
    let (w, v_t) = match (&svd.u, &svd.v_t) {
        (Some(w), Some(v_t)) => (w, v_t),
        _ => return Err(Error::NumericalBreakdown("SVD did not produce singular vectors".into())),
    };
    let nuclear: f64 = svd.singular_values.iter().sum();
    let total = a.dispersion.trace() + b.dispersion.trace();
    clamp_trace_term(total - 2.0 * nuclear, total)?;
    let polar = v_t.transpose() * w.transpose();
    let term = (r1 - r2 * polar).norm_squared();
    if !term.is_finite() {
        return Err(Error::NumericalBreakdown("dispersion term is not finite".into()));
    }
    Ok(term)
}

fn clamp_trace_term(term: f64, total: f64) -> Result<f64> {
    if term >= 0.0 {
        Ok(term)
    } else if -term < TRACE_CLAMP_TOL * total {
        Ok(0.0)
    } else {
        Err(Error::NumericalBreakdown(format!(
            "trace term {term:e} is negative beyond rounding (traces sum to {total:e})"
        )))
    }
}

/// Squared quadratic Wasserstein distance between two Gaussian measures.
pub fn w2_squared(a: &GaussianMeasure, b: &GaussianMeasure) -> Result<f64> {
    let trace = bures_squared(a, b)?;
    let loc = (&a.location - &b.location).norm_squared();
    Ok(loc + trace)
}

pub fn w2_distance(a: &GaussianMeasure, b: &GaussianMeasure) -> Result<f64> {
    Ok(w2_squared(a, b)?.sqrt())
}

/// Bures–Wasserstein distance between SPD matrices: `W₂` of the centered
/// Gaussians with these dispersions.
pub fn bures_distance(a: &SpdMatrix, b: &SpdMatrix) -> Result<f64> {
    w2_distance(&GaussianMeasure::centered(a.clone()), &GaussianMeasure::centered(b.clone()))
}

fn check_dims(a: &GaussianMeasure, b: &GaussianMeasure) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(())
}

/// `Σ_i w_i W₂²(ν, μ_i)`, the barycentric objective.
pub fn weighted_cost(nu: &GaussianMeasure, measures: &[GaussianMeasure], weights: &[f64]) -> Result<f64> {
    measures
        .iter()
        .zip(weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(m, w)| Ok(w * w2_squared(nu, m)?))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;

    fn diag(mean: &[f64], d: &[f64]) -> GaussianMeasure {
        GaussianMeasure::new(DVector::from_column_slice(mean), SpdMatrix::from_diagonal(d).unwrap()).unwrap()
    }

    #[test]
    fn identical_measures_are_at_zero() {
        let a = GaussianMeasure::from_parts(&[1.0, -2.0], &[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        assert_abs_diff_eq!(w2_squared(&a, &a).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(w2_distance(&a, &a.clone()).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn univariate_closed_form() {
        let a = GaussianMeasure::univariate(0.0, 1.0).unwrap();
        let b = GaussianMeasure::univariate(3.0, 4.0).unwrap();
        assert_abs_diff_eq!(w2_squared(&a, &b).unwrap(), 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w2_distance(&a, &b).unwrap(), 10f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn commuting_dispersions() {
        let a = diag(&[0.0, 0.0], &[1.0, 4.0]);
        let b = diag(&[0.0, 0.0], &[4.0, 9.0]);
        assert_abs_diff_eq!(w2_squared(&a, &b).unwrap(), 2.0, epsilon = 1e-12);
        let d = bures_distance(a.dispersion(), b.dispersion()).unwrap();
        assert_abs_diff_eq!(d, 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn near_dirac_limit_is_euclidean() {
        let a = diag(&[0.0, 0.0], &[1e-14, 1e-14]);
        let b = diag(&[3.0, 4.0], &[1e-14, 1e-14]);
        assert_abs_diff_eq!(w2_distance(&a, &b).unwrap(), 5.0, epsilon = 1e-6);
    }

    #[test]
    fn bures_matches_centered_w2() {
        let a = SpdMatrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let b = SpdMatrix::from_rows(&[vec![1.0, -0.2], vec![-0.2, 3.0]]).unwrap();
        let via_measures =
            w2_distance(&GaussianMeasure::centered(a.clone()), &GaussianMeasure::centered(b.clone())).unwrap();
        assert_eq!(bures_distance(&a, &b).unwrap(), via_measures);
        assert!(bures_distance(&a, &a).unwrap() < 1e-14);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = GaussianMeasure::univariate(0.0, 1.0).unwrap();
        let b = diag(&[0.0, 0.0], &[1.0, 1.0]);
        assert!(matches!(w2_squared(&a, &b), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn negative_trace_clamp() {
        assert_eq!(clamp_trace_term(-1e-12, 1.0).unwrap(), 0.0);
        assert!(matches!(clamp_trace_term(-1e-3, 1.0), Err(Error::NumericalBreakdown(_))));
    }

    #[test]
    fn location_length_must_match() {
        let r = GaussianMeasure::new(dvector![0.0, 1.0], SpdMatrix::identity(3));
        assert!(matches!(r, Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn collection_invariants() {
        let a = GaussianMeasure::univariate(0.0, 1.0).unwrap();
        let b = diag(&[0.0, 0.0], &[1.0, 1.0]);
        assert!(MeasureCollection::new(vec![]).is_err());
        assert!(MeasureCollection::new(vec![a.clone(), b]).is_err());
        let dup = MeasureCollection::with_labels(vec![a.clone(), a.clone()], vec!["x".into(), "x".into()]);
        assert!(matches!(dup, Err(Error::InvalidCollection(_))));
        let short = MeasureCollection::with_labels(vec![a.clone(), a.clone()], vec!["x".into()]);
        assert!(short.is_err());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let a = GaussianMeasure::from_parts(&[0.1, 1.0 / 3.0], &[vec![2.0, 0.1], vec![0.1, 0.7]]).unwrap();
        let b = GaussianMeasure::from_parts(&[1.0, 2.0], &[vec![1.0 / 7.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let coll = MeasureCollection::with_labels(vec![a, b], vec!["AT".into(), "DE".into()]).unwrap();
        let text = coll.to_json().unwrap();
        let back = MeasureCollection::from_json(&text).unwrap();
        assert_eq!(back.labels().unwrap(), coll.labels().unwrap());
        for (x, y) in back.iter().zip(coll.iter()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn singular_covariance_is_repaired_on_load() {
        let text = r#"[{"label": "flat", "mean": [0, 0], "cov": [[4, 4], [4, 4]]}]"#;
        let coll = MeasureCollection::from_json(text).unwrap();
        assert!(coll.get(0).dispersion().eigenvalues()[0] > 0.0);
    }
}
