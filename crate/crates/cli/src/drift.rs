//! Drift reports: the chronological evolution of each cluster's textual
//! centroid, the human-readable view of a run.

use std::fmt::Write;

use crate::config::Mode;
use crate::experiment::SavedRun;

/// Render the per-cluster, chronological list of summaries. Runs without
/// summary events get an explicit notice instead of empty sections.
pub fn render(run: &SavedRun) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Textual centroid drift (config {}, seed {})",
        run.config_digest, run.seed
    );
    let total_events: usize = run.reports.iter().map(|r| r.summary_events.len()).sum();
    if total_events == 0 {
        let _ = writeln!(
            out,
            "\nNo textual centroids: this run used numeric-mean updates only."
        );
        return out;
    }
    for cluster in 0..run.k {
        let _ = writeln!(out, "\n== Cluster {cluster}");
        let mut wrote = false;
        for (batch, report) in run.reports.iter().enumerate() {
            for event in &report.summary_events {
                if event.cluster != cluster {
                    continue;
                }
                wrote = true;
                let location = match run.mode {
                    Mode::Static => format!("iter {}", event.iteration),
                    Mode::Stream => format!("batch {batch}, iter {}", event.iteration),
                };
                let text = if event.summary.is_empty() {
                    "(no summary text)"
                } else {
                    event.summary.as_str()
                };
                match &event.fallback {
                    Some(reason) => {
                        let _ = writeln!(out, "  [{location}] {text}  <- fallback: {reason}");
                    }
                    None => {
                        let _ = writeln!(out, "  [{location}] {text}");
                    }
                }
            }
        }
        if !wrote {
            let _ = writeln!(out, "  (no summary events for this cluster)");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::DocAssignment;
    use summeans::types::{
        ClusterState, EmbeddingVector, InitKind, RunReport, SummaryEvent,
    };

    fn report_with_events(events: Vec<SummaryEvent>) -> RunReport {
        let state = ClusterState {
            centroids: vec![EmbeddingVector::new(vec![0.0]).unwrap(); 3],
            assignments: vec![0, 1, 2],
            counts: vec![1, 1, 1],
            summaries: vec![None; 3],
        };
        RunReport {
            seed: 0,
            init: InitKind::KMeansPlusPlus,
            nominal_iterations: 4,
            iterations_run: 4,
            objective_trace: vec![1.0; 4],
            summary_events: events,
            repair_iterations: vec![],
            notes: vec![],
            final_state: state,
        }
    }

    fn event(iteration: usize, cluster: usize, summary: &str) -> SummaryEvent {
        SummaryEvent {
            iteration,
            cluster,
            summary: summary.to_string(),
            method: "lsa(q=5)".to_string(),
            prompt: None,
            fallback: None,
        }
    }

    #[test]
    fn sections_per_cluster_with_entries_per_step() {
        let events = vec![
            event(2, 0, "first summary a"),
            event(2, 1, "first summary b"),
            event(2, 2, "first summary c"),
            event(4, 0, "second summary a"),
            event(4, 1, "second summary b"),
            event(4, 2, "second summary c"),
        ];
        let run = SavedRun {
            config_digest: "dead".into(),
            seed: 1,
            mode: Mode::Static,
            k: 3,
            assignments: vec![DocAssignment {
                id: "a".into(),
                cluster: 0,
            }],
            summaries: vec![None; 3],
            reports: vec![report_with_events(events)],
        };
        let text = render(&run);
        assert_eq!(text.matches("== Cluster").count(), 3);
        assert_eq!(text.matches("[iter ").count(), 6);
        assert!(text.contains("second summary c"));
    }

    #[test]
    fn numeric_runs_get_a_notice() {
        let run = SavedRun {
            config_digest: "beef".into(),
            seed: 2,
            mode: Mode::Static,
            k: 3,
            assignments: vec![],
            summaries: vec![None; 3],
            reports: vec![report_with_events(vec![])],
        };
        let text = render(&run);
        assert!(text.contains("No textual centroids"));
        assert!(!text.contains("== Cluster"));
    }

    #[test]
    fn stream_entries_carry_batch_indices() {
        let run = SavedRun {
            config_digest: "feed".into(),
            seed: 3,
            mode: Mode::Stream,
            k: 3,
            assignments: vec![],
            summaries: vec![None; 3],
            reports: vec![
                report_with_events(vec![event(2, 0, "early view")]),
                report_with_events(vec![event(2, 0, "later view")]),
            ],
        };
        let text = render(&run);
        assert!(text.contains("[batch 0, iter 2] early view"));
        assert!(text.contains("[batch 1, iter 2] later view"));
    }
}
