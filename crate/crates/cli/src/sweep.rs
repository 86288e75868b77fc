//! Sensitivity sweep over the number of clusters.

use std::fmt::Write as _;

use anyhow::{Context, Result};
use summeans::build_provider;

use crate::config::{ExperimentConfig, KChoice};
use crate::corpus::{gold_labels, load_corpus};
use crate::experiment::{mean_std, run_experiment_with_provider, ExperimentSummary};

pub struct SweepRow {
    pub delta: f64,
    pub k: usize,
    pub summary: Option<ExperimentSummary>,
}

/// k' = round(k * (1 + delta)), snapped to six decimals first so binary
/// float fuzz cannot push a half-integer boundary the wrong way.
pub fn scaled_k(base: usize, delta: f64) -> f64 {
    let scaled = base as f64 * (1.0 + delta);
    let snapped = (scaled * 1e6).round() / 1e6;
    snapped.round()
}

/// Run the experiment at k' = round(k * (1 + delta)) for each delta, where
/// k is the gold label count. Values of k' below 1 are skipped with a
/// notice. The provider is shared so the corpus embeds once for the whole
/// sweep.
pub fn sweep_k(config: &ExperimentConfig, deltas: &[f64]) -> Result<Vec<SweepRow>> {
    let docs = load_corpus(&config.dataset_path)?;
    let labels = gold_labels(&docs).context("sweep-k requires a fully labeled corpus")?;
    let base_k = labels.len();
    let provider = build_provider(&config.provider)?;

    let mut rows = Vec::new();
    for &delta in deltas {
        let scaled = scaled_k(base_k, delta);
        if scaled < 1.0 {
            println!("delta {delta:+.2}: k' < 1, skipped");
            rows.push(SweepRow {
                delta,
                k: 0,
                summary: None,
            });
            continue;
        }
        let k = scaled as usize;
        let mut run_config = config.clone();
        run_config.k = KChoice::Explicit(k);
        run_config.output_dir = config.output_dir.join(format!("k{k}"));
        let summary = run_experiment_with_provider(&run_config, docs.clone(), provider.as_ref())?;
        rows.push(SweepRow {
            delta,
            k,
            summary: Some(summary),
        });
    }
    Ok(rows)
}

/// Format sweep rows as a fixed-width table with mean (std) cells.
pub fn render_table(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:>8} {:>5} {:>18} {:>18}", "delta", "k", "ACC", "NMI");
    for row in rows {
        match &row.summary {
            None => {
                let _ = writeln!(out, "{:>+8.2} {:>5} {:>18} {:>18}", row.delta, "-", "skipped", "-");
            }
            Some(summary) => {
                let accs: Vec<f64> = summary
                    .outcomes
                    .iter()
                    .filter_map(|o| o.metrics.as_ref().map(|m| m.acc))
                    .collect();
                let nmis: Vec<f64> = summary
                    .outcomes
                    .iter()
                    .filter_map(|o| o.metrics.as_ref().map(|m| m.nmi))
                    .collect();
                let (am, asd) = mean_std(&accs);
                let (nm, nsd) = mean_std(&nmis);
                let _ = writeln!(
                    out,
                    "{:>+8.2} {:>5} {:>10.4} ({asd:.4}) {:>10.4} ({nsd:.4})",
                    row.delta, row.k, am, nm
                );
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::scaled_k;

    #[test]
    fn k_rounding_matches_examples() {
        for (k, delta, expected) in [
            (10usize, -0.2f64, 8.0f64),
            (10, 0.0, 10.0),
            (10, 0.2, 12.0),
            (10, -0.1, 9.0),
            (10, 0.1, 11.0),
            (5, -0.9, 1.0),
        ] {
            assert_eq!(scaled_k(k, delta), expected, "k={k} delta={delta}");
        }
    }
}
