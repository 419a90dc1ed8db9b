//! Data files behind the frontier, partition and alternating-minimization
//! figures.

use std::fs;
use std::path::{Path, PathBuf};

use partial_updates::{
    alternate_minimize, best_at_beta, brute_force_frontier_with, induced_pmf, optimal_lengths,
    zipf, BruteForceOptions, CodeLengths, Pmf, SolverConfig, DEFAULT_TOL_BETA,
};
use serde::Serialize;

use crate::output::{to_json, Csv, Field};
use crate::{trace_csv, write_file, AltMinReport, CliError, Figure};

const FRONTIER_KS: [usize; 4] = [3, 4, 5, 6];
const PARTITION_BETAS: [f64; 3] = [0.82, 1.43, 1.58];
const ALTMIN_BETAS: [f64; 3] = [1.6, 2.4, 3.2];
const ALTMIN_INITIAL: [f64; 10] = [
    0.42, 0.32, 0.13, 0.1, 0.02, 0.007, 0.002, 0.0006, 0.00035, 0.00005,
];

fn source() -> Pmf {
    zipf(0.5, 8).expect("valid Zipf parameters")
}

#[derive(Serialize)]
struct PartitionFigureEntry {
    beta: f64,
    k: usize,
    partition: String,
    rgs: String,
    entropy: f64,
    age: f64,
    pmf: Pmf,
    lengths: CodeLengths,
}

fn frontier(
    out_dir: &Path,
    opts: &BruteForceOptions,
    cfg: &SolverConfig,
) -> Result<PathBuf, CliError> {
    let p = source();
    let mut csv = Csv::new(&["k", "entropy", "age", "rgs"]);
    for k in FRONTIER_KS {
        let f = brute_force_frontier_with(&p, k, cfg, opts)?;
        for pt in &f.envelope {
            let rgs = pt.partition.rgs_string();
            csv.row(&[
                Field::Int(k as u64),
                Field::Num(pt.entropy),
                Field::Num(pt.age),
                Field::Text(&rgs),
            ]);
        }
    }
    let path = out_dir.join("fig-frontier.csv");
    write_file(&path, &csv.finish())?;
    Ok(path)
}

fn partitions(
    out_dir: &Path,
    opts: &BruteForceOptions,
    cfg: &SolverConfig,
) -> Result<PathBuf, CliError> {
    let p = source();
    let k = 3;
    let f = brute_force_frontier_with(&p, k, cfg, opts)?;
    let mut entries = Vec::new();
    for beta in PARTITION_BETAS {
        let pt = best_at_beta(&f.points, beta, DEFAULT_TOL_BETA)?;
        let q = induced_pmf(&pt.partition, &p)?;
        let lengths = optimal_lengths(&q, cfg)?.lengths;
        entries.push(PartitionFigureEntry {
            beta,
            k,
            partition: pt.partition.to_string(),
            rgs: pt.partition.rgs_string(),
            entropy: pt.entropy,
            age: pt.age,
            pmf: q,
            lengths,
        });
    }
    let path = out_dir.join("fig-partitions.json");
    write_file(&path, &to_json(&entries)?)?;
    Ok(path)
}

fn altmin(out_dir: &Path, cfg: &SolverConfig) -> Result<Vec<PathBuf>, CliError> {
    let initial = Pmf::new(ALTMIN_INITIAL.to_vec())?;
    let mut csv = String::new();
    let mut reports = Vec::new();
    for (i, beta) in ALTMIN_BETAS.into_iter().enumerate() {
        let sol = alternate_minimize(&initial, beta, cfg)?;
        let part = trace_csv(&sol.trace, Some(beta)).finish();
        if i == 0 {
            csv.push_str(&part);
        } else {
            csv.extend(part.lines().skip(1).map(|l| format!("{l}\n")));
        }
        reports.push(AltMinReport::new(beta, &sol));
    }
    let trace_path = out_dir.join("fig-altmin.csv");
    let final_path = out_dir.join("fig-altmin.json");
    write_file(&trace_path, &csv)?;
    write_file(&final_path, &to_json(&reports)?)?;
    Ok(vec![trace_path, final_path])
}

/// Writes the requested figure data into `out_dir`, returning the paths.
pub fn run(
    figure: Figure,
    out_dir: &Path,
    jobs: Option<usize>,
    cfg: &SolverConfig,
) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(out_dir).map_err(|e| CliError::Io(out_dir.to_path_buf(), e))?;
    let opts = BruteForceOptions {
        jobs,
        ..BruteForceOptions::default()
    };
    let mut written = Vec::new();
    if matches!(figure, Figure::FigFrontier | Figure::All) {
        written.push(frontier(out_dir, &opts, cfg)?);
    }
    if matches!(figure, Figure::FigPartitions | Figure::All) {
        written.push(partitions(out_dir, &opts, cfg)?);
    }
    if matches!(figure, Figure::FigAltmin | Figure::All) {
        written.extend(altmin(out_dir, cfg)?);
    }
    Ok(written)
}
