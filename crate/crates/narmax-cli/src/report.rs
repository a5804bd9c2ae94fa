//! Report files written by the Monte Carlo harness.
//!
//! A report directory holds:
//!
//! * `report.json` — the machine-readable summary (schema 1): the experiment
//!   parameters echoed back, plus per-candidate figures and histogram file
//!   names.
//! * `rms_table.csv` — one row per candidate with both RMS figures.
//! * `ensemble_mean.csv` — `k,u,mean` over the input period (1-based `k`).
//! * `hist_<name>.csv` — `bin_left,bin_right,count` rows for each
//!   candidate's simulation-error histogram.
//!
//! All files are deterministic functions of the experiment outcome: floats
//! are printed in shortest round-trip form and rows in fixed order, so two
//! equal outcomes produce byte-identical directories.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::harness::EnsembleReport;

pub const SCHEMA_VERSION: u32 = 1;

/// The experiment parameters, echoed into the report for reproducibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecEcho {
    /// Canonical equation of the stochastic model.
    pub model: String,
    pub periods: usize,
    pub samples: usize,
    pub discard: usize,
    pub base_seed: u64,
    /// `"continuous"` or `"reset"`.
    pub mode: String,
    pub input_mean: f64,
    pub input_std: f64,
    pub histogram_bins: usize,
}

/// Per-candidate summary row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub name: String,
    /// Canonical equation of the candidate simulation model.
    pub model: String,
    pub rms_vs_mean: f64,
    pub avg_rms_vs_noisy: f64,
    pub histogram_file: String,
}

/// The `report.json` document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub schema: u32,
    pub spec: SpecEcho,
    pub periods_kept: usize,
    pub candidates: Vec<CandidateSummary>,
}

/// Reduces a candidate name to a safe file-name fragment.
pub fn sanitize_name(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    if out.is_empty() {
        out.push('_');
    }
    out
}

/// Builds the JSON summary from an experiment outcome. Histogram file names
/// are derived from the candidate names, disambiguated when two names
/// collide after sanitizing.
pub fn summarize(
    spec: SpecEcho,
    candidate_models: &[String],
    outcome: &EnsembleReport,
) -> ReportFile {
    assert_eq!(candidate_models.len(), outcome.candidates.len());
    let mut used: Vec<String> = Vec::new();
    let candidates = outcome
        .candidates
        .iter()
        .zip(candidate_models)
        .map(|(candidate, model)| {
            let mut stem = sanitize_name(&candidate.name);
            if used.contains(&stem) {
                let mut k = 2;
                while used.contains(&format!("{stem}_{k}")) {
                    k += 1;
                }
                stem = format!("{stem}_{k}");
            }
            used.push(stem.clone());
            CandidateSummary {
                name: candidate.name.clone(),
                model: model.clone(),
                rms_vs_mean: candidate.rms_vs_mean,
                avg_rms_vs_noisy: candidate.avg_rms_vs_noisy,
                histogram_file: format!("hist_{stem}.csv"),
            }
        })
        .collect();
    ReportFile { schema: SCHEMA_VERSION, spec, periods_kept: outcome.periods_kept, candidates }
}

/// Writes the complete report directory.
pub fn write_report_dir(
    dir: &Path,
    report: &ReportFile,
    outcome: &EnsembleReport,
) -> Result<()> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create report directory {}", dir.display()))?;

    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    fs::write(dir.join("report.json"), json).context("writing report.json")?;

    let mut rms = String::from("name,rms_vs_mean,avg_rms_vs_noisy\n");
    for candidate in &report.candidates {
        writeln!(rms, "{},{},{}", candidate.name, candidate.rms_vs_mean, candidate.avg_rms_vs_noisy)?;
    }
    fs::write(dir.join("rms_table.csv"), rms).context("writing rms_table.csv")?;

    let mut mean = String::from("k,u,mean\n");
    for (k, (u, m)) in outcome.input_period.iter().zip(&outcome.ensemble_mean).enumerate() {
        writeln!(mean, "{},{},{}", k + 1, u, m)?;
    }
    fs::write(dir.join("ensemble_mean.csv"), mean).context("writing ensemble_mean.csv")?;

    for (summary, candidate) in report.candidates.iter().zip(&outcome.candidates) {
        let mut hist = String::from("bin_left,bin_right,count\n");
        let histogram = &candidate.histogram;
        for (index, count) in histogram.counts.iter().enumerate() {
            writeln!(hist, "{},{},{}", histogram.edges[index], histogram.edges[index + 1], count)?;
        }
        fs::write(dir.join(&summary.histogram_file), hist)
            .with_context(|| format!("writing {}", summary.histogram_file))?;
    }
    Ok(())
}

/// Reads a previously written `report.json`.
pub fn read_report(dir: &Path) -> Result<ReportFile> {
    let path = dir.join("report.json");
    let text = fs::read_to_string(&path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let report: ReportFile = serde_json::from_str(&text)
        .with_context(|| format!("{} is not a valid report", path.display()))?;
    if report.schema != SCHEMA_VERSION {
        bail!(
            "{} has schema {} but this build reads schema {}",
            path.display(),
            report.schema,
            SCHEMA_VERSION
        );
    }
    Ok(report)
}

/// Renders the summary as an aligned text table for the terminal.
pub fn render_table(report: &ReportFile) -> String {
    let name_width = report
        .candidates
        .iter()
        .map(|c| c.name.len())
        .chain(["candidate".len()])
        .max()
        .unwrap_or(9);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<name_width$}  {:>14}  {:>18}",
        "candidate", "rms vs mean", "avg rms vs noisy"
    );
    for candidate in &report.candidates {
        let _ = writeln!(
            out,
            "{:<name_width$}  {:>14.6}  {:>18.6}",
            candidate.name, candidate.rms_vs_mean, candidate.avg_rms_vs_noisy
        );
    }
    let _ = writeln!(
        out,
        "({} kept periods of {} samples, seed {}, {} mode)",
        report.periods_kept, report.spec.samples, report.spec.base_seed, report.spec.mode
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{CandidateReport, Histogram};

    fn sample_outcome() -> EnsembleReport {
        EnsembleReport {
            input_period: vec![0.5, -1.5],
            ensemble_mean: vec![1.5, -0.5],
            periods_kept: 3,
            candidates: vec![CandidateReport {
                name: "exact".to_string(),
                rms_vs_mean: 0.25,
                avg_rms_vs_noisy: 1.75,
                free_run: vec![1.25, -0.75],
                histogram: Histogram { edges: vec![0.0, 0.5, 1.0], counts: vec![4, 2] },
            }],
        }
    }

    fn sample_spec() -> SpecEcho {
        SpecEcho {
            model: "y[k] = u[k] + e[k]".to_string(),
            periods: 8,
            samples: 2,
            discard: 5,
            base_seed: 7,
            mode: "continuous".to_string(),
            input_mean: 0.0,
            input_std: 1.0,
            histogram_bins: 2,
        }
    }

    #[test]
    fn report_round_trips_through_the_directory() {
        let outcome = sample_outcome();
        let report =
            summarize(sample_spec(), &["ys[k] = u[k]".to_string()], &outcome);
        let dir = tempfile::tempdir().unwrap();
        write_report_dir(dir.path(), &report, &outcome).unwrap();

        let reread = read_report(dir.path()).unwrap();
        assert_eq!(reread, report);

        let mean = std::fs::read_to_string(dir.path().join("ensemble_mean.csv")).unwrap();
        assert_eq!(mean, "k,u,mean\n1,0.5,1.5\n2,-1.5,-0.5\n");
        let rms = std::fs::read_to_string(dir.path().join("rms_table.csv")).unwrap();
        assert_eq!(rms, "name,rms_vs_mean,avg_rms_vs_noisy\nexact,0.25,1.75\n");
        let hist = std::fs::read_to_string(dir.path().join("hist_exact.csv")).unwrap();
        assert_eq!(hist, "bin_left,bin_right,count\n0,0.5,4\n0.5,1,2\n");
        let json = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
        assert!(json.ends_with("}\n"));
    }

    #[test]
    fn equal_outcomes_write_identical_bytes() {
        let outcome = sample_outcome();
        let report = summarize(sample_spec(), &["ys[k] = u[k]".to_string()], &outcome);
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        write_report_dir(dir_a.path(), &report, &outcome).unwrap();
        write_report_dir(dir_b.path(), &report, &outcome).unwrap();
        for file in ["report.json", "rms_table.csv", "ensemble_mean.csv", "hist_exact.csv"] {
            let a = std::fs::read(dir_a.path().join(file)).unwrap();
            let b = std::fs::read(dir_b.path().join(file)).unwrap();
            assert_eq!(a, b, "{file} differs");
        }
    }

    #[test]
    fn name_collisions_get_distinct_histogram_files() {
        let mut outcome = sample_outcome();
        let mut second = outcome.candidates[0].clone();
        second.name = "ex?ct".to_string();
        let mut third = outcome.candidates[0].clone();
        third.name = "exact".to_string();
        outcome.candidates.push(second);
        outcome.candidates.push(third);
        let report = summarize(
            sample_spec(),
            &[
                "ys[k] = u[k]".to_string(),
                "ys[k] = u[k]".to_string(),
                "ys[k] = u[k]".to_string(),
            ],
            &outcome,
        );
        assert_eq!(report.candidates[0].histogram_file, "hist_exact.csv");
        assert_eq!(report.candidates[1].histogram_file, "hist_ex_ct.csv");
        assert_eq!(report.candidates[2].histogram_file, "hist_exact_2.csv");
    }

    #[test]
    fn schema_mismatches_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let outcome = sample_outcome();
        let mut report = summarize(sample_spec(), &["ys[k] = u[k]".to_string()], &outcome);
        report.schema = 99;
        write_report_dir(dir.path(), &report, &outcome).unwrap();
        let err = read_report(dir.path()).unwrap_err();
        assert!(err.to_string().contains("schema 99"));
    }

    #[test]
    fn table_rendering_is_aligned() {
        let outcome = sample_outcome();
        let report = summarize(sample_spec(), &["ys[k] = u[k]".to_string()], &outcome);
        let table = render_table(&report);
        assert!(table.contains("candidate"));
        assert!(table.contains("exact"));
        assert!(table.contains("0.250000"));
        assert!(table.contains("1.750000"));
    }
}
