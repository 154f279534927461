//! Generators and reference implementations shared by the integration tests.

#![allow(dead_code)]

use chrono::{Duration, NaiveDate};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use wcluster::ingest::PanelRecord;
use wcluster::measure::GaussianMeasure;
use wcluster::spd::SpdMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Haar-ish orthogonal matrix from the QR factor of a Gaussian matrix.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| normal(rng));
    g.qr().q()
}

pub fn spd_from(q: &DMatrix<f64>, eig: &[f64]) -> DMatrix<f64> {
    let m = q * DMatrix::from_diagonal(&DVector::from_column_slice(eig)) * q.transpose();
    (&m + m.transpose()) * 0.5
}

/// SPD matrix with eigenvalues drawn uniformly from `[lo, hi]`.
pub fn random_spd(rng: &mut ChaCha8Rng, d: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let q = random_orthogonal(rng, d);
    let eig: Vec<f64> = (0..d).map(|_| rng.random_range(lo..hi)).collect();
    spd_from(&q, &eig)
}

pub fn measure(mean: DVector<f64>, cov: DMatrix<f64>) -> GaussianMeasure {
    GaussianMeasure::new(mean, SpdMatrix::new(cov).unwrap()).unwrap()
}

pub fn random_measure(rng: &mut ChaCha8Rng, d: usize, spread: f64) -> GaussianMeasure {
    let mean = DVector::from_fn(d, |_, _| spread * normal(rng));
    let cov = random_spd(rng, d, 0.1, 5.0);
    measure(mean, cov)
}

/// Principal square root computed directly from an eigendecomposition.
pub fn sqrtm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(a.clone());
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

pub struct Lloyd {
    pub assignments: Vec<usize>,
    pub centers: Vec<DVector<f64>>,
}

fn nearest(x: &DVector<f64>, centers: &[DVector<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, c) in centers.iter().enumerate() {
        let d = (x - c).norm_squared();
        if d < best_d {
            best = k;
            best_d = d;
        }
    }
    best
}

/// Plain Euclidean Lloyd iteration: same stopping rule, tie-breaking and
/// empty-cluster reseeding as the Wasserstein version.
pub fn euclidean_kmeans(points: &[DVector<f64>], mut centers: Vec<DVector<f64>>, max_iter: usize, tol: f64) -> Lloyd {
    let k = centers.len();
    let assign = |centers: &[DVector<f64>]| points.iter().map(|x| nearest(x, centers)).collect::<Vec<_>>();
    let mut assignments = assign(&centers);
    for _ in 0..max_iter {
        loop {
            let mut sizes = vec![0; k];
            for a in &assignments {
                sizes[*a] += 1;
            }
            let Some(empty) = sizes.iter().position(|s| *s == 0) else { break };
            let mut far: Option<(usize, f64)> = None;
            for (i, a) in assignments.iter().enumerate() {
                if sizes[*a] < 2 {
                    continue;
                }
                let d = (&points[i] - &centers[*a]).norm();
                if far.is_none_or(|(_, fd)| d > fd) {
                    far = Some((i, d));
                }
            }
            let donor = far.unwrap().0;
            assignments[donor] = empty;
            centers[empty] = points[donor].clone();
        }
        let mut sums = vec![DVector::zeros(points[0].len()); k];
        let mut counts = vec![0usize; k];
        for (x, a) in points.iter().zip(&assignments) {
            sums[*a] += x;
            counts[*a] += 1;
        }
        let updated: Vec<DVector<f64>> = sums.into_iter().zip(counts).map(|(s, c)| s / c as f64).collect();
        let movement = centers.iter().zip(&updated).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        centers = updated;
        let reassigned = assign(&centers);
        let unchanged = reassigned == assignments;
        assignments = reassigned;
        if unchanged || movement <= tol {
            break;
        }
    }
    Lloyd { assignments, centers }
}

/// Same partition up to a renaming of the cluster ids.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    let mut map = std::collections::HashMap::new();
    let mut back = std::collections::HashMap::new();
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| *map.entry(*x).or_insert(*y) == *y && *back.entry(*y).or_insert(*x) == *x)
}

/// Nelson–Siegel factor dynamics for one regime of a yield-curve panel.
#[derive(Debug, Clone, Copy)]
pub struct Regime {
    pub level: f64,
    pub slope: f64,
    pub curvature: f64,
    /// Weekly innovation scale of the three factors.
    pub vol: f64,
    /// AR(1) coefficient of the factors.
    pub persistence: f64,
    /// Spread of the entity-specific factor means around the regime means.
    pub entity_spread: f64,
}

pub const MATURITIES: usize = 10;

fn loadings(tau: f64) -> (f64, f64, f64) {
    let lambda = 0.6;
    let x = lambda * tau;
    let slope = (1.0 - (-x).exp()) / x;
    (1.0, slope, slope - (-x).exp())
}

/// Weekly yield curves (maturities 1..=10 years) for entities drawn from the
/// given regimes. Returns the records and each entity's regime index.
pub fn yield_panel(rng: &mut ChaCha8Rng, regimes: &[(Regime, usize)], weeks: usize) -> (Vec<PanelRecord>, Vec<usize>) {
    let start = NaiveDate::from_ymd_opt(2015, 1, 5).unwrap();
    let mut records = Vec::new();
    let mut labels = Vec::new();
    let mut entity = 0;
    for (r, (regime, count)) in regimes.iter().enumerate() {
        for _ in 0..*count {
            let name = format!("e{entity:02}");
            entity += 1;
            labels.push(r);
            let means = [
                regime.level + regime.entity_spread * normal(rng),
                regime.slope + regime.entity_spread * normal(rng),
                regime.curvature + regime.entity_spread * normal(rng),
            ];
            let mut f = means;
            for w in 0..weeks {
                for j in 0..3 {
                    f[j] = means[j] + regime.persistence * (f[j] - means[j]) + regime.vol * normal(rng);
                }
                let values = (1..=MATURITIES)
                    .map(|m| {
                        let (a, b, c) = loadings(m as f64);
                        a * f[0] + b * f[1] + c * f[2] + 0.02 * normal(rng)
                    })
                    .collect();
                records.push(PanelRecord {
                    entity: name.clone(),
                    date: start + Duration::weeks(w as i64),
                    values,
                });
            }
        }
    }
    (records, labels)
}

pub const CORE: Regime = Regime {
    level: 1.5,
    slope: -1.0,
    curvature: 0.5,
    vol: 0.05,
    persistence: 0.95,
    entity_spread: 0.1,
};

pub const PERIPHERY: Regime = Regime {
    level: 5.0,
    slope: -2.5,
    curvature: 1.5,
    vol: 0.25,
    persistence: 0.9,
    entity_spread: 0.3,
};
