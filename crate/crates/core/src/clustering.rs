//! Wasserstein K-means over Gaussian measures.
//!
//! Lloyd-style alternation: assign every measure to the center with the
//! smallest `W₂²`, then move every center to the equal-weight Wasserstein
//! barycenter of its members. Initial centers are members of the
//! collection; after the first update they are free barycenters.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barycenter::{wasserstein_barycenter, BarycenterConfig, WeightVector};
use crate::compactness::{evaluate_clustering, CompactnessReport};
use crate::error::{Error, Result};
use crate::measure::{w2_distance, w2_squared, GaussianMeasure, MeasureCollection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// `k` distinct members drawn with the seeded generator.
    RandomMembers,
    /// Member closest to the global barycenter, then greedy max-min `W₂`.
    FarthestFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringConfig {
    pub k: usize,
    pub init: InitStrategy,
    pub seed: u64,
    pub max_iter: usize,
    /// Largest center movement (in `W₂`) still counted as "no change".
    pub center_tol: f64,
    pub restarts: usize,
    pub barycenter: BarycenterConfig,
    /// Run the double registration on the final partition.
    pub reports: bool,
}

impl ClusteringConfig {
    pub fn new(k: usize) -> Self {
        ClusteringConfig {
            k,
            init: InitStrategy::RandomMembers,
            seed: 0,
            max_iter: 100,
            center_tol: 1e-8,
            restarts: 1,
            barycenter: BarycenterConfig::default(),
            reports: false,
        }
    }

    pub fn with_init(mut self, init: InitStrategy) -> Self {
        self.init = init;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_reports(mut self, reports: bool) -> Self {
        self.reports = reports;
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 || self.k > n {
            return Err(Error::KTooLarge { k: self.k, n });
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("restarts must be at least 1".into()));
        }
        if !(self.center_tol >= 0.0) {
            return Err(Error::InvalidConfig(format!("center_tol must be non-negative, got {}", self.center_tol)));
        }
        self.barycenter.validate()
    }
}

#[derive(Debug, Clone)]
pub struct ClusteringResult {
    pub assignments: Vec<usize>,
    pub centers: Vec<GaussianMeasure>,
    pub global_barycenter: GaussianMeasure,
    /// `Σ_i W₂²(μ_i, μ̄_{k(i)})`.
    pub inertia: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Inertia after every (assign, update) round of the winning restart,
    /// starting with the initial assignment.
    pub inertia_history: Vec<f64>,
    pub reports: Option<CompactnessReport>,
}

impl ClusteringResult {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.centers.len()];
        for a in &self.assignments {
            sizes[*a] += 1;
        }
        sizes
    }
}

/// Equal-weight barycenter of the whole collection.
pub fn global_barycenter(collection: &MeasureCollection) -> Result<GaussianMeasure> {
    barycenter_of(collection.measures(), &BarycenterConfig::default())
}

fn barycenter_of(measures: &[GaussianMeasure], config: &BarycenterConfig) -> Result<GaussianMeasure> {
    let result = wasserstein_barycenter(measures, &WeightVector::uniform(measures.len()), config)?;
    Ok(result.barycenter)
}

/// Initial centers for the first restart of `config`.
pub fn init_centers(collection: &MeasureCollection, config: &ClusteringConfig) -> Result<Vec<GaussianMeasure>> {
    config.validate(collection.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let indices = match config.init {
        InitStrategy::RandomMembers => random_members(collection.len(), config.k, &mut rng),
        InitStrategy::FarthestFirst => {
            let global = barycenter_of(collection.measures(), &config.barycenter)?;
            farthest_first(collection, config.k, &global)?
        }
    };
    Ok(indices.into_iter().map(|i| collection.get(i).clone()).collect())
}

fn random_members(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    sample(rng, n, k).into_vec()
}

/// Member closest to `global`, then repeatedly the member whose nearest
/// chosen center is farthest away. Ties go to the smaller index.
pub fn farthest_first(collection: &MeasureCollection, k: usize, global: &GaussianMeasure) -> Result<Vec<usize>> {
    let n = collection.len();
    if k == 0 || k > n {
        return Err(Error::KTooLarge { k, n });
    }
    let to_global = collection.iter().map(|m| w2_distance(m, global)).collect::<Result<Vec<_>>>()?;
    let mut chosen = vec![argmin(&to_global)];
    let mut nearest: Vec<f64> = collection
        .iter()
        .map(|m| w2_distance(m, collection.get(chosen[0])))
        .collect::<Result<_>>()?;
    while chosen.len() < k {
        let mut best = None;
        for (i, d) in nearest.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            match best {
                Some((_, bd)) if *d <= bd => {}
                _ => best = Some((i, *d)),
            }
        }
        let (next, _) = best.expect("k <= n leaves an unchosen member");
        chosen.push(next);
        for (i, m) in collection.iter().enumerate() {
            let d = w2_distance(m, collection.get(next))?;
            if d < nearest[i] {
                nearest[i] = d;
            }
        }
    }
    Ok(chosen)
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// `W₂²` from every measure to every center, row-major by measure.
fn cost_matrix(collection: &MeasureCollection, centers: &[GaussianMeasure]) -> Result<Vec<Vec<f64>>> {
    collection
        .measures()
        .par_iter()
        .map(|m| centers.iter().map(|c| w2_squared(m, c)).collect::<Result<Vec<_>>>())
        .collect()
}

/// Nearest center by `W₂²` for every measure; ties go to the lower cluster id.
pub fn assign_step(collection: &MeasureCollection, centers: &[GaussianMeasure]) -> Result<Vec<usize>> {
    if centers.is_empty() {
        return Err(Error::InvalidConfig("no centers to assign to".into()));
    }
    if let Some(bad) = centers.iter().find(|c| c.dim() != collection.dim()) {
        return Err(Error::DimMismatch {
            expected: collection.dim(),
            got: bad.dim(),
        });
    }
    Ok(cost_matrix(collection, centers)?.iter().map(|row| argmin(row)).collect())
}

/// Equal-weight barycenter of each cluster's members.
///
/// Fails with [`Error::EmptyCluster`] when some cluster in `0..k` has no
/// members; [`kmeans`] repairs empty clusters before calling this.
pub fn update_step(collection: &MeasureCollection, assignments: &[usize], k: usize) -> Result<Vec<GaussianMeasure>> {
    update_with(collection, assignments, k, &BarycenterConfig::default())
}

fn update_with(
    collection: &MeasureCollection,
    assignments: &[usize],
    k: usize,
    config: &BarycenterConfig,
) -> Result<Vec<GaussianMeasure>> {
    if assignments.len() != collection.len() {
        return Err(Error::SizeMismatch {
            expected: collection.len(),
            got: assignments.len(),
        });
    }
    let mut groups: Vec<Vec<GaussianMeasure>> = vec![Vec::new(); k];
    for (i, a) in assignments.iter().enumerate() {
        let group = groups
            .get_mut(*a)
            .ok_or_else(|| Error::InvalidConfig(format!("assignment {a} is out of range for {k} clusters")))?;
        group.push(collection.get(i).clone());
    }
    groups
        .par_iter()
        .enumerate()
        .map(|(cluster, members)| {
            if members.is_empty() {
                return Err(Error::EmptyCluster(cluster));
            }
            barycenter_of(members, config)
        })
        .collect()
}

/// Gives each empty cluster the member farthest from its current center,
/// taken from clusters that keep at least one member.
fn repair_empty_clusters(
    collection: &MeasureCollection,
    assignments: &mut [usize],
    centers: &mut [GaussianMeasure],
) -> Result<bool> {
    let k = centers.len();
    let mut repaired = false;
    loop {
        let mut sizes = vec![0usize; k];
        for a in assignments.iter() {
            sizes[*a] += 1;
        }
        let Some(empty) = sizes.iter().position(|s| *s == 0) else {
            return Ok(repaired);
        };
        let mut far: Option<(usize, f64)> = None;
        for (i, a) in assignments.iter().enumerate() {
            if sizes[*a] < 2 {
                continue;
            }
            let d = w2_distance(collection.get(i), &centers[*a])?;
            match far {
                Some((_, fd)) if d <= fd => {}
                _ => far = Some((i, d)),
            }
        }
        let (donor, _) = far.expect("k <= n leaves a cluster with two members");
        log::debug!("cluster {empty} is empty; reseeding with measure {donor}");
        assignments[donor] = empty;
        centers[empty] = collection.get(donor).clone();
        repaired = true;
    }
}

fn inertia_of(collection: &MeasureCollection, assignments: &[usize], centers: &[GaussianMeasure]) -> Result<f64> {
    let costs = collection
        .measures()
        .par_iter()
        .zip(assignments.par_iter())
        .map(|(m, a)| w2_squared(m, &centers[*a]))
        .collect::<Result<Vec<_>>>()?;
    Ok(costs.iter().sum())
}

/// One K-means run from the given initial centers.
pub fn kmeans_from_centers(
    collection: &MeasureCollection,
    initial_centers: Vec<GaussianMeasure>,
    config: &ClusteringConfig,
) -> Result<ClusteringResult> {
    let k = initial_centers.len();
    let config = ClusteringConfig { k, ..config.clone() };
    config.validate(collection.len())?;
    let global = barycenter_of(collection.measures(), &config.barycenter)?;
    let mut result = lloyd(collection, initial_centers, &config, global)?;
    if config.reports {
        result.reports = Some(evaluate_clustering(
            collection,
            &result.assignments,
            &result.centers,
            &result.global_barycenter,
        )?);
    }
    Ok(result)
}

fn lloyd(
    collection: &MeasureCollection,
    mut centers: Vec<GaussianMeasure>,
    config: &ClusteringConfig,
    global: GaussianMeasure,
) -> Result<ClusteringResult> {
    let k = centers.len();
    let mut assignments = assign_step(collection, &centers)?;
    let mut history = vec![inertia_of(collection, &assignments, &centers)?];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iter {
        iterations += 1;
        repair_empty_clusters(collection, &mut assignments, &mut centers)?;
        let updated = update_with(collection, &assignments, k, &config.barycenter)?;
        let movement = centers
            .iter()
            .zip(&updated)
            .map(|(a, b)| w2_distance(a, b))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        centers = updated;
        history.push(inertia_of(collection, &assignments, &centers)?);

        let reassigned = assign_step(collection, &centers)?;
        let unchanged = reassigned == assignments;
        assignments = reassigned;
        if unchanged || movement <= config.center_tol {
            converged = true;
            break;
        }
    }

    let inertia = inertia_of(collection, &assignments, &centers)?;
    Ok(ClusteringResult {
        assignments,
        centers,
        global_barycenter: global,
        inertia,
        iterations,
        converged,
        inertia_history: history,
        reports: None,
    })
}

/// Wasserstein K-means with `config.restarts` runs; the run with the lowest
/// inertia wins (earliest on ties).
///
/// With [`InitStrategy::FarthestFirst`] the first run uses the greedy
/// initialization and any further runs draw random members.
pub fn kmeans(collection: &MeasureCollection, config: &ClusteringConfig) -> Result<ClusteringResult> {
    config.validate(collection.len())?;
    let global = barycenter_of(collection.measures(), &config.barycenter)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<ClusteringResult> = None;
    for restart in 0..config.restarts {
        let indices = match (config.init, restart) {
            (InitStrategy::FarthestFirst, 0) => farthest_first(collection, config.k, &global)?,
            _ => random_members(collection.len(), config.k, &mut rng),
        };
        let centers = indices.into_iter().map(|i| collection.get(i).clone()).collect();
        let run = lloyd(collection, centers, config, global.clone())?;
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    let mut result = best.expect("restarts >= 1");
    if config.reports {
        result.reports = Some(evaluate_clustering(
            collection,
            &result.assignments,
            &result.centers,
            &result.global_barycenter,
        )?);
    }
    Ok(result)
}
