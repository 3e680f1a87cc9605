//! Report files: sweep.csv, novelty.csv, stats.json, and per-cell audit
//! dumps.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiment::SweepReport;
use crate::scoring::write_slates;

/// Lambda with at least one decimal, e.g. `-1.0`, `-0.4`, `0.05`.
fn format_lambda(lambda: f64) -> String {
    if lambda == lambda.trunc() {
        format!("{lambda:.1}")
    } else {
        format!("{lambda}")
    }
}

/// Metric value scaled to the 0..100 range with 2 decimals.
fn scaled(value: f64) -> String {
    format!("{:.2}", value * 100.0)
}

/// Writes all report files into `output_dir`:
///
/// - `sweep.csv`: per-lambda means and standard deviations over seeds,
///   scaled by 100 with 2 decimals;
/// - `novelty.csv`: per-lambda novelty means (unscaled);
/// - `stats.json`: per-seed corpus statistics;
/// - `audit/lam_<lambda>_seed_<seed>/`: slate, metric, and novelty dumps;
/// - `failures.log`: one line per failed cell, only when failures exist.
pub fn emit_reports(report: &SweepReport, output_dir: impl AsRef<Path>) -> Result<()> {
    let dir = output_dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    // sweep.csv
    let mut csv = String::from(
        "lambda,auc,auc_std,mrr,mrr_std,ndcg5,ndcg5_std,ndcg10,ndcg10_std,\
         cal_c,cal_c_std,cal_f,cal_f_std,rep_f,rep_f_std,act,act_std\n",
    );
    for summary in report.lambda_summaries() {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            format_lambda(summary.lambda),
            scaled(summary.auc.mean),
            scaled(summary.auc.std),
            scaled(summary.mrr.mean),
            scaled(summary.mrr.std),
            scaled(summary.ndcg5.mean),
            scaled(summary.ndcg5.std),
            scaled(summary.ndcg10.mean),
            scaled(summary.ndcg10.std),
            scaled(summary.cal_category.mean),
            scaled(summary.cal_category.std),
            scaled(summary.cal_frame.mean),
            scaled(summary.cal_frame.std),
            scaled(summary.rep_frame.mean),
            scaled(summary.rep_frame.std),
            scaled(summary.activation.mean),
            scaled(summary.activation.std),
        );
    }
    let sweep_path = dir.join("sweep.csv");
    fs::write(&sweep_path, csv).map_err(|e| Error::io(&sweep_path, e))?;

    // novelty.csv (counts and KL on their natural scale)
    let mut csv = String::from("lambda,avg_unique,avg_novel,avg_kl\n");
    for summary in report.lambda_summaries() {
        let _ = writeln!(
            csv,
            "{},{:.4},{:.4},{:.4}",
            format_lambda(summary.lambda),
            summary.avg_unique.mean,
            summary.avg_novel.mean,
            summary.avg_kl.mean,
        );
    }
    let novelty_path = dir.join("novelty.csv");
    fs::write(&novelty_path, csv).map_err(|e| Error::io(&novelty_path, e))?;

    // stats.json
    let mut json = String::from("{\"per_seed\": [");
    for (i, (seed, stats)) in report.stats.iter().enumerate() {
        if i > 0 {
            json.push_str(", ");
        }
        let _ = write!(json, "{{\"seed\": {seed}, \"stats\": {}}}", stats.to_json());
    }
    json.push_str("]}\n");
    let stats_path = dir.join("stats.json");
    fs::write(&stats_path, json).map_err(|e| Error::io(&stats_path, e))?;

    // Per-cell audit dumps.
    for cell in &report.cells {
        let cell_dir = audit_dir(dir, cell.lambda, cell.seed);
        fs::create_dir_all(&cell_dir).map_err(|e| Error::io(&cell_dir, e))?;

        write_slates(cell_dir.join("slates.tsv"), &cell.slates)?;

        let mut metrics = String::from("impression_id\tcal_c\tcal_f\trep_f\tact\n");
        for row in &cell.normative.per_impression {
            let _ = writeln!(
                metrics,
                "{}\t{}\t{}\t{}\t{}",
                row.impression_id, row.cal_category, row.cal_frame, row.rep_frame, row.activation
            );
        }
        let path = cell_dir.join("metrics.tsv");
        fs::write(&path, metrics).map_err(|e| Error::io(&path, e))?;

        let mut novelty = String::from("user_id\tunique\tnovel\tkl\n");
        for user in &cell.novelty.per_user {
            let _ = writeln!(
                novelty,
                "{}\t{}\t{}\t{}",
                user.user_id, user.unique_frames, user.novel_frames, user.kl
            );
        }
        let path = cell_dir.join("novelty.tsv");
        fs::write(&path, novelty).map_err(|e| Error::io(&path, e))?;
    }

    if !report.failures.is_empty() {
        let mut log = String::new();
        for failure in &report.failures {
            let _ = writeln!(
                log,
                "lambda={} seed={}: {}",
                format_lambda(failure.lambda),
                failure.seed,
                failure.message
            );
        }
        let path = dir.join("failures.log");
        fs::write(&path, log).map_err(|e| Error::io(&path, e))?;
    }

    Ok(())
}

/// Directory holding one cell's audit dump.
pub fn audit_dir(output_dir: &Path, lambda: f64, seed: u64) -> PathBuf {
    output_dir
        .join("audit")
        .join(format!("lam_{}_seed_{seed}", format_lambda(lambda)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SynthSpec;
    use crate::experiment::{run_sweep, ExperimentConfig};

    fn tiny_report() -> SweepReport {
        let mut spec = SynthSpec::desk_scale(4);
        spec.n_articles = 100;
        spec.n_users = 15;
        spec.n_impressions = 40;
        let mut config = ExperimentConfig::synthetic(spec);
        config.lambda_grid = vec![-1.0, 0.0, 0.4];
        config.seeds = vec![1];
        run_sweep(&config).unwrap()
    }

    #[test]
    fn report_files_have_expected_shape() {
        let report = tiny_report();
        let dir = tempfile::tempdir().unwrap();
        emit_reports(&report, dir.path()).unwrap();

        let sweep = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        let lines: Vec<&str> = sweep.lines().collect();
        assert_eq!(lines.len(), 4); // header + 3 lambdas
        assert!(lines[0].starts_with("lambda,auc,auc_std,mrr"));
        assert!(lines[1].starts_with("-1.0,"));
        assert!(lines[3].starts_with("0.4,"));
        // 17 columns, metric cells with exactly two decimals.
        for line in &lines[1..] {
            let cells: Vec<&str> = line.split(',').collect();
            assert_eq!(cells.len(), 17);
            for cell in &cells[1..] {
                let (_, decimals) = cell.split_once('.').unwrap();
                assert_eq!(decimals.len(), 2, "cell `{cell}`");
            }
        }

        let novelty = std::fs::read_to_string(dir.path().join("novelty.csv")).unwrap();
        assert!(novelty.starts_with("lambda,avg_unique,avg_novel,avg_kl\n"));
        assert_eq!(novelty.lines().count(), 4);

        let stats = std::fs::read_to_string(dir.path().join("stats.json")).unwrap();
        assert!(stats.contains("\"cramers_v\""));
        assert!(stats.contains("\"eta_squared\""));

        assert!(audit_dir(dir.path(), -1.0, 1).join("slates.tsv").exists());
        assert!(audit_dir(dir.path(), 0.4, 1).join("metrics.tsv").exists());
        assert!(audit_dir(dir.path(), 0.0, 1).join("novelty.tsv").exists());
        assert!(!dir.path().join("failures.log").exists());
    }

    #[test]
    fn novelty_csv_matches_recomputed_per_user_dumps() {
        let report = tiny_report();
        let dir = tempfile::tempdir().unwrap();
        emit_reports(&report, dir.path()).unwrap();

        let novelty = std::fs::read_to_string(dir.path().join("novelty.csv")).unwrap();
        for line in novelty.lines().skip(1) {
            let cells: Vec<&str> = line.split(',').collect();
            let lambda: f64 = cells[0].parse().unwrap();
            // Recompute the mean from the per-user audit dump.
            let dump =
                std::fs::read_to_string(audit_dir(dir.path(), lambda, 1).join("novelty.tsv"))
                    .unwrap();
            let mut total_novel = 0.0;
            let mut n = 0usize;
            for row in dump.lines().skip(1) {
                let fields: Vec<&str> = row.split('\t').collect();
                total_novel += fields[2].parse::<f64>().unwrap();
                n += 1;
            }
            let expected: f64 = cells[2].parse().unwrap();
            assert!(
                (total_novel / n as f64 - expected).abs() < 5e-5,
                "lambda {lambda}: {} vs {expected}",
                total_novel / n as f64
            );
        }
    }

    #[test]
    fn emitting_twice_is_byte_identical() {
        let report = tiny_report();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        emit_reports(&report, dir_a.path()).unwrap();
        emit_reports(&report, dir_b.path()).unwrap();
        for file in ["sweep.csv", "novelty.csv", "stats.json"] {
            let a = std::fs::read(dir_a.path().join(file)).unwrap();
            let b = std::fs::read(dir_b.path().join(file)).unwrap();
            assert_eq!(a, b, "{file} differs");
        }
    }
}
