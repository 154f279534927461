//! Double registration and the Geodesic Compactness Index.
//!
//! For a cluster `k` with local barycenter `μ̄_k` and the global barycenter
//! `μ̄₀`, let `γ_k` be the geodesic from `μ̄₀` to `μ̄_k`. Every member `μ_i`
//! is registered on `γ_k`, giving `τ_i` and `σ̃_i = W₂(μ_i, γ_k(τ_i))`, and
//! `σ_i = W₂(μ_i, μ̄_k)`. The member closest to the center is the minimal
//! element `μ_*`. The anchor `γ_k(τ_i)` is then registered back onto the
//! geodesic `γ_{i,*}` running from `μ_i` (at 0) to `μ_*` (at 1), giving `s_i`.
//!
//! The similarity index and the per-cluster / total indices are
//!
//! ```text
//! τ̃_{k,i} = (s_i τ_i / τ_*) · (σ̃_* / σ̃_i)
//! GCI_k   = mean_i min(τ̃_{k,i}, 1)
//! GCI     = Σ_k (n_k / n) GCI_k
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesic::{make_geodesic, RegistrationSolution};
use crate::measure::{w2_distance, GaussianMeasure, MeasureCollection, EQ_TOL};

/// Floor applied to `τ_*` before dividing.
pub const EPS_TAU: f64 = 1e-9;

/// Floor applied to `σ̃_i` and `σ̃_*` before dividing.
pub const EPS_SIGMA: f64 = 1e-9;

/// Everything the double registration learns about one member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationRecord {
    pub measure_index: usize,
    pub tau: f64,
    pub sigma: f64,
    pub sigma_tilde: f64,
    pub s: f64,
    pub tau_tilde_raw: f64,
    /// `min(tau_tilde_raw, 1)`; the value aggregated into the GCI.
    pub tau_tilde: f64,
    /// A floor on `τ_*` or `σ̃` was used in the index.
    pub floored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub cluster_id: usize,
    /// Collection index of the minimal element.
    pub minimal_index: usize,
    pub records: Vec<RegistrationRecord>,
    pub gci: f64,
    /// `γ_k` was a constant curve (local and global barycenters coincide).
    pub degenerate: bool,
}

impl ClusterReport {
    pub fn size(&self) -> usize {
        self.records.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactnessReport {
    pub clusters: Vec<ClusterReport>,
    pub total_gci: f64,
    /// Some cluster geodesic was degenerate (always the case for K = 1).
    pub degenerate: bool,
}

/// Index of the member closest to `center`; ties go to the smaller index.
pub fn minimal_element(members: &[GaussianMeasure], center: &GaussianMeasure) -> Result<usize> {
    if members.is_empty() {
        return Err(Error::EmptyCluster(0));
    }
    let dists = members.iter().map(|m| w2_distance(m, center)).collect::<Result<Vec<_>>>()?;
    Ok(argmin_first(&dists))
}

fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Registers `anchor` on the geodesic from `mu_i` (s = 0) to `mu_star` (s = 1).
///
/// When `mu_i` is the minimal element the geodesic collapses to a point and
/// the convention `s = 1` is used.
pub fn reverse_register(
    mu_i: &GaussianMeasure,
    mu_star: &GaussianMeasure,
    anchor: &GaussianMeasure,
) -> Result<RegistrationSolution> {
    let g = make_geodesic(mu_i, mu_star)?;
    if g.is_degenerate() || mu_i.approx_eq(mu_star, EQ_TOL) {
        return Ok(RegistrationSolution {
            tau: 1.0,
            dist: w2_distance(mu_star, anchor)?,
            degenerate: true,
        });
    }
    g.register(anchor)
}

/// Raw geodesic similarity index with its floor flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityIndex {
    pub raw: f64,
    pub floored: bool,
}

impl SimilarityIndex {
    pub fn clamped(&self) -> f64 {
        self.raw.min(1.0)
    }
}

/// `(s_i τ_i / τ_*) · (σ̃_* / σ̃_i)` with `τ_*`, `σ̃_*` and `σ̃_i` floored.
///
/// The minimal element itself is assigned exactly 1 by the caller
/// ([`evaluate_clustering`]), independently of the floors.
pub fn similarity_index(
    tau_i: f64,
    s_i: f64,
    sigma_tilde_i: f64,
    tau_star: f64,
    sigma_tilde_star: f64,
) -> SimilarityIndex {
    let floored = tau_star < EPS_TAU || sigma_tilde_i < EPS_SIGMA || sigma_tilde_star < EPS_SIGMA;
    let tau_star = tau_star.max(EPS_TAU);
    let sigma_i = sigma_tilde_i.max(EPS_SIGMA);
    let sigma_star = sigma_tilde_star.max(EPS_SIGMA);
    SimilarityIndex {
        raw: (s_i * tau_i / tau_star) * (sigma_star / sigma_i),
        floored,
    }
}

/// Mean of the clamped member indices of one cluster.
pub fn gci_per_cluster(tau_tildes: &[f64]) -> Result<f64> {
    if tau_tildes.is_empty() {
        return Err(Error::EmptyCluster(0));
    }
    Ok(tau_tildes.iter().map(|t| t.min(1.0)).sum::<f64>() / tau_tildes.len() as f64)
}

/// `Σ_k (n_k / n) GCI_k` for `(n_k, GCI_k)` pairs.
pub fn gci_total(clusters: &[(usize, f64)], n: usize) -> Result<f64> {
    let total: usize = clusters.iter().map(|(size, _)| size).sum();
    if total != n || n == 0 {
        return Err(Error::SizeMismatch { expected: n, got: total });
    }
    // Σ n_k·GCI_k first, then one division, so K = n gives exactly 1.
    Ok(clusters.iter().map(|(size, gci)| *size as f64 * gci).sum::<f64>() / n as f64)
}

/// Runs the double registration for every cluster and aggregates the GCI.
///
/// `assignments[i]` is the cluster of measure `i`; `local_barycenters[k]`
/// is the center of cluster `k`.
pub fn evaluate_clustering(
    collection: &MeasureCollection,
    assignments: &[usize],
    local_barycenters: &[GaussianMeasure],
    global_barycenter: &GaussianMeasure,
) -> Result<CompactnessReport> {
    let n = collection.len();
    if assignments.len() != n {
        return Err(Error::SizeMismatch {
            expected: n,
            got: assignments.len(),
        });
    }
    let k = local_barycenters.len();
    if let Some(bad) = assignments.iter().find(|a| **a >= k) {
        return Err(Error::InvalidConfig(format!("assignment {bad} is out of range for {k} clusters")));
    }
    let clusters = (0..k)
        .into_par_iter()
        .map(|cluster| {
            let members: Vec<usize> = (0..n).filter(|&i| assignments[i] == cluster).collect();
            evaluate_cluster(collection, cluster, &members, &local_barycenters[cluster], global_barycenter)
        })
        .collect::<Result<Vec<_>>>()?;
    let sizes: Vec<(usize, f64)> = clusters.iter().map(|c| (c.size(), c.gci)).collect();
    let total_gci = gci_total(&sizes, n)?;
    let degenerate = clusters.iter().any(|c| c.degenerate);
    Ok(CompactnessReport {
        clusters,
        total_gci,
        degenerate,
    })
}

fn evaluate_cluster(
    collection: &MeasureCollection,
    cluster: usize,
    members: &[usize],
    center: &GaussianMeasure,
    global: &GaussianMeasure,
) -> Result<ClusterReport> {
    if members.is_empty() {
        return Err(Error::EmptyCluster(cluster));
    }
    let geodesic = make_geodesic(global, center)?;

    // Phase 1: registration on γ_k and the distance to the center.
    let first: Vec<(RegistrationSolution, f64)> = members
        .par_iter()
        .map(|&i| {
            let mu = collection.get(i);
            Ok((geodesic.register(mu)?, w2_distance(mu, center)?))
        })
        .collect::<Result<_>>()?;
    let sigmas: Vec<f64> = first.iter().map(|(_, sigma)| *sigma).collect();
    let star = argmin_first(&sigmas);
    let mu_star = collection.get(members[star]);
    let tau_star = first[star].0.tau;
    let sigma_tilde_star = first[star].0.dist;

    // Phase 2: reverse registration against the minimal element.
    let records = members
        .par_iter()
        .enumerate()
        .map(|(pos, &i)| {
            let (reg, sigma) = first[pos];
            if pos == star {
                return Ok(RegistrationRecord {
                    measure_index: i,
                    tau: reg.tau,
                    sigma,
                    sigma_tilde: reg.dist,
                    s: 1.0,
                    tau_tilde_raw: 1.0,
                    tau_tilde: 1.0,
                    floored: false,
                });
            }
            let mu = collection.get(i);
            let anchor = geodesic.point_at(reg.tau)?;
            let back = reverse_register(mu, mu_star, &anchor)?;
            let index = similarity_index(reg.tau, back.tau, reg.dist, tau_star, sigma_tilde_star);
            Ok(RegistrationRecord {
                measure_index: i,
                tau: reg.tau,
                sigma,
                sigma_tilde: reg.dist,
                s: back.tau,
                tau_tilde_raw: index.raw,
                tau_tilde: index.clamped(),
                floored: index.floored,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let tau_tildes: Vec<f64> = records.iter().map(|r| r.tau_tilde).collect();
    Ok(ClusterReport {
        cluster_id: cluster,
        minimal_index: members[star],
        gci: gci_per_cluster(&tau_tildes)?,
        records,
        degenerate: geodesic.is_degenerate(),
    })
}

/// JSON shape of one member row of a cluster report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberRow {
    pub label: String,
    pub tau: f64,
    pub sigma: f64,
    pub sigma_tilde: f64,
    pub s: f64,
    pub tau_tilde_raw: f64,
    pub tau_tilde: f64,
}

/// JSON shape of a cluster report:
/// `{"cluster", "minimal", "gci", "members": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReportDoc {
    pub cluster: usize,
    pub minimal: String,
    pub gci: f64,
    pub members: Vec<MemberRow>,
}

impl ClusterReport {
    pub fn to_doc(&self, collection: &MeasureCollection) -> ClusterReportDoc {
        ClusterReportDoc {
            cluster: self.cluster_id,
            minimal: collection.label(self.minimal_index),
            gci: self.gci,
            members: self
                .records
                .iter()
                .map(|r| MemberRow {
                    label: collection.label(r.measure_index),
                    tau: r.tau,
                    sigma: r.sigma,
                    sigma_tilde: r.sigma_tilde,
                    s: r.s,
                    tau_tilde_raw: r.tau_tilde_raw,
                    tau_tilde: r.tau_tilde,
                })
                .collect(),
        }
    }
}

impl CompactnessReport {
    /// Record of measure `i`, if it belongs to some cluster of the report.
    pub fn record_for(&self, i: usize) -> Option<&RegistrationRecord> {
        self.clusters.iter().flat_map(|c| c.records.iter()).find(|r| r.measure_index == i)
    }

    pub fn cluster_gcis(&self) -> Vec<f64> {
        self.clusters.iter().map(|c| c.gci).collect()
    }
}
