use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use wcluster::barycenter::{wasserstein_barycenter, BarycenterConfig, WeightVector};
use wcluster::clustering::{kmeans, ClusteringConfig, ClusteringResult, InitStrategy};
use wcluster::compactness::ClusterReportDoc;
use wcluster::ingest::{self, CovDenominator, SummaryConfig};
use wcluster::measure::{bures_distance, load_measure, w2_distance, MeasureCollection};

use crate::args::{BarycenterArgs, ClusterArgs, ClusterOptions, Denominator, DistanceArgs, IngestArgs, Init, ScanArgs};
use crate::failure::Failure;
use crate::manifest::{sidecar_path, RunManifest};

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn json_pretty<T: Serialize>(value: &T) -> Result<String, Failure> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

fn csv_failure(e: csv::Error) -> Failure {
    Failure::Input(e.to_string())
}

fn csv_text(rows: Vec<Vec<String>>) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).map_err(csv_failure)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Input(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn ingest(args: &IngestArgs) -> Result<(), Failure> {
    let config = SummaryConfig {
        cov_denominator: match args.cov_denominator {
            Denominator::NMinus1 => CovDenominator::NMinus1,
            Denominator::N => CovDenominator::N,
        },
        jitter: args.jitter,
        min_records: args.min_records,
    };
    config.validate()?;
    let panel = ingest::load_panel(&args.input, args.strict)?;
    let specs = ingest::load_periods(&args.periods)?;
    if let Some(bad) = specs.iter().find(|s| s.name.is_empty() || s.name.contains(['/', '\\'])) {
        return Err(Failure::Input(format!("period name {:?} cannot be used as a file name", bad.name)));
    }
    let split = ingest::split_periods(&panel.records, &specs)?;
    let summaries = ingest::summarize_split(&split, &config)?;

    std::fs::create_dir_all(&args.out)?;
    for summary in &summaries {
        let Some(collection) = &summary.collection else {
            log::warn!("period {} has no entity with enough records; nothing written", summary.period.name);
            continue;
        };
        let mut text = collection.to_json()?;
        text.push('\n');
        write_text(&args.out.join(format!("{}.json", summary.period.name)), &text)?;
        println!(
            "{}: {} measures{}",
            summary.period.name,
            collection.len(),
            if summary.skipped.is_empty() {
                String::new()
            } else {
                format!(" ({} skipped)", summary.skipped.len())
            }
        );
    }
    if panel.dropped > 0 || split.dropped > 0 {
        println!("dropped rows: {} malformed, {} outside every period", panel.dropped, split.dropped);
    }
    RunManifest::new("ingest", args, &[&args.input, &args.periods])?.write(&args.out.join("manifest.json"))
}

fn clustering_config(options: &ClusterOptions, k: usize, reports: bool) -> ClusteringConfig {
    ClusteringConfig {
        k,
        init: match options.init {
            Init::Random => InitStrategy::RandomMembers,
            Init::Farthest => InitStrategy::FarthestFirst,
        },
        seed: options.seed,
        max_iter: options.max_iter,
        restarts: options.restarts,
        reports,
        ..ClusteringConfig::new(k)
    }
}

#[derive(Serialize)]
struct ReportsDoc {
    total_gci: f64,
    degenerate: bool,
    clusters: Vec<ClusterReportDoc>,
}

pub fn cluster(args: &ClusterArgs) -> Result<(), Failure> {
    let collection = MeasureCollection::load(&args.measures)?;
    let config = clustering_config(&args.options, args.k, args.reports);
    let result = kmeans(&collection, &config)?;
    if !result.converged {
        log::warn!("k-means stopped after {} iterations without settling", result.iterations);
    }

    std::fs::create_dir_all(&args.out)?;
    write_text(&args.out.join("assignments.csv"), &assignments_csv(&collection, &result)?)?;

    let center_labels = (0..result.centers.len()).map(|k| format!("cluster-{k}")).collect();
    let centers = MeasureCollection::with_labels(result.centers.clone(), center_labels)?;
    let mut text = centers.to_json()?;
    text.push('\n');
    write_text(&args.out.join("centers.json"), &text)?;

    let sizes = result.cluster_sizes();
    println!("inertia {:.5}", result.inertia);
    match &result.reports {
        Some(report) => {
            let doc = ReportsDoc {
                total_gci: report.total_gci,
                degenerate: report.degenerate,
                clusters: report.clusters.iter().map(|c| c.to_doc(&collection)).collect(),
            };
            write_text(&args.out.join("reports.json"), &json_pretty(&doc)?)?;
            println!("cluster  size  gci");
            for c in &report.clusters {
                println!("{:>7}  {:>4}  {:.5}", c.cluster_id, c.size(), c.gci);
            }
            println!("total GCI {:.5}", report.total_gci);
        }
        None => {
            println!("cluster  size");
            for (k, size) in sizes.iter().enumerate() {
                println!("{k:>7}  {size:>4}");
            }
        }
    }
    RunManifest::new("cluster", args, &[&args.measures])?.write(&args.out.join("manifest.json"))
}

fn assignments_csv(collection: &MeasureCollection, result: &ClusteringResult) -> Result<String, Failure> {
    let mut header = vec!["label".to_string(), "cluster".to_string()];
    if result.reports.is_some() {
        header.extend(["tau", "sigma", "sigma_tilde", "s", "tau_tilde"].map(String::from));
    }
    let mut rows = vec![header];
    for (i, k) in result.assignments.iter().enumerate() {
        let mut row = vec![collection.label(i), k.to_string()];
        if let Some(report) = &result.reports {
            let r = report
                .record_for(i)
                .ok_or_else(|| Failure::Numerical(format!("measure {i} is missing from the reports")))?;
            row.extend([r.tau, r.sigma, r.sigma_tilde, r.s, r.tau_tilde].map(|v| v.to_string()));
        }
        rows.push(row);
    }
    csv_text(rows)
}

struct ScanRow {
    k: usize,
    total: f64,
    per_cluster: Vec<f64>,
    degenerate: bool,
}

/// Smallest K whose total index is within `slack` of the best one.
pub fn suggest_k(rows: &[(usize, f64)], slack: f64) -> Option<usize> {
    let best = rows.iter().map(|(_, g)| *g).fold(f64::NEG_INFINITY, f64::max);
    rows.iter().find(|(_, g)| *g >= best - slack).map(|(k, _)| *k)
}

pub fn gci_scan(args: &ScanArgs) -> Result<(), Failure> {
    let collection = MeasureCollection::load(&args.measures)?;
    let n = collection.len();
    if args.kmin == 0 || args.kmin > args.kmax || args.kmax > n {
        return Err(Failure::Config(format!(
            "need 1 <= kmin <= kmax <= {n}, got kmin {} and kmax {}",
            args.kmin, args.kmax
        )));
    }
    let rows: Vec<ScanRow> = (args.kmin..=args.kmax)
        .into_par_iter()
        .map(|k| {
            let result = kmeans(&collection, &clustering_config(&args.options, k, true))?;
            let report = result.reports.expect("reports were requested");
            Ok(ScanRow {
                k,
                total: report.total_gci,
                per_cluster: report.cluster_gcis(),
                degenerate: report.degenerate,
            })
        })
        .collect::<Result<_, Failure>>()?;

    let suggested = args
        .suggest_k
        .then(|| suggest_k(&rows.iter().map(|r| (r.k, r.total)).collect::<Vec<_>>(), 0.02))
        .flatten();

    let mut header = vec!["K".to_string(), "gci_total".to_string()];
    header.extend((1..=args.kmax).map(|k| format!("gci_{k}")));
    header.push("degenerate".into());
    if args.suggest_k {
        header.push("suggested".into());
    }
    let mut table = vec![header];
    for row in &rows {
        let mut line = vec![row.k.to_string(), row.total.to_string()];
        line.extend((0..args.kmax).map(|j| row.per_cluster.get(j).map_or(String::new(), |g| g.to_string())));
        line.push(row.degenerate.to_string());
        if args.suggest_k {
            line.push((suggested == Some(row.k)).to_string());
        }
        table.push(line);
    }
    write_text(&args.out, &csv_text(table)?)?;

    println!("K  gci_total");
    for row in &rows {
        let mark = if suggested == Some(row.k) { "  <- suggested" } else { "" };
        println!("{:<2} {:.5}{mark}", row.k, row.total);
    }
    RunManifest::new("gci-scan", args, &[&args.measures])?.write(&sidecar_path(&args.out))
}

pub fn distance(args: &DistanceArgs) -> Result<(), Failure> {
    let (a, _) = load_measure(&args.a)?;
    let (b, _) = load_measure(&args.b)?;
    let d = if args.bures {
        bures_distance(a.dispersion(), b.dispersion())?
    } else {
        w2_distance(&a, &b)?
    };
    println!("{d:.5}");
    Ok(())
}

pub fn barycenter(args: &BarycenterArgs) -> Result<(), Failure> {
    let collection = MeasureCollection::load(&args.measures)?;
    let weights = match &args.weights {
        Some(w) => WeightVector::new(w.clone())?,
        None => WeightVector::uniform(collection.len()),
    };
    let result = wasserstein_barycenter(collection.measures(), &weights, &BarycenterConfig::default())?;
    let result = result.require_converged()?;
    write_text(&args.out, &json_pretty(&result.barycenter.to_record(None))?)?;
    RunManifest::new("barycenter", args, &[&args.measures])?.write(&sidecar_path(&args.out))
}
