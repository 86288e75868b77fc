//! Dataset ingestion: JSON Lines corpora of documents.

use std::collections::HashSet;
use std::io::{BufRead, BufReader};
use std::path::Path;

use anyhow::{bail, Context, Result};
use summeans::Document;

/// Load a corpus file: one JSON object per line with fields `id`, `text`,
/// optional `label`, optional `timestamp`. Duplicate ids and empty texts
/// are rejected with the offending line number.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .with_context(|| format!("cannot open dataset {}", path.display()))?;
    let mut docs = Vec::new();
    let mut ids: HashSet<String> = HashSet::new();
    for (index, line) in BufReader::new(file).lines().enumerate() {
        let lineno = index + 1;
        let line = line.with_context(|| format!("{}:{lineno}: read failed", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line)
            .with_context(|| format!("{}:{lineno}: malformed document", path.display()))?;
        if doc.text.trim().is_empty() {
            bail!("{}:{lineno}: document {} has empty text", path.display(), doc.id);
        }
        if !ids.insert(doc.id.clone()) {
            bail!("{}:{lineno}: duplicate document id {}", path.display(), doc.id);
        }
        docs.push(doc);
    }
    if docs.is_empty() {
        bail!("{}: no documents", path.display());
    }
    Ok(docs)
}

/// Distinct gold labels in first-appearance order; `None` when any document
/// is unlabeled.
pub fn gold_labels(docs: &[Document]) -> Option<Vec<String>> {
    let mut seen = Vec::new();
    for d in docs {
        let label = d.label.as_ref()?;
        if !seen.iter().any(|s| s == label) {
            seen.push(label.clone());
        }
    }
    Some(seen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_lines(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(file, "{l}").unwrap();
        }
        file
    }

    #[test]
    fn loads_documents_in_file_order() {
        let file = write_lines(&[
            r#"{"id": "a", "text": "first", "label": "x"}"#,
            r#"{"id": "b", "text": "second", "label": "y", "timestamp": 12}"#,
            r#"{"id": "c", "text": "third"}"#,
        ]);
        let docs = load_corpus(file.path()).unwrap();
        assert_eq!(docs.len(), 3);
        assert_eq!(docs[0].id, "a");
        assert_eq!(docs[1].timestamp, Some(12));
        assert_eq!(docs[2].label, None);
    }

    #[test]
    fn missing_text_reports_line_number() {
        let file = write_lines(&[
            r#"{"id": "a", "text": "fine"}"#,
            r#"{"id": "b"}"#,
        ]);
        let err = load_corpus(file.path()).unwrap_err();
        assert!(format!("{err:#}").contains(":2:"), "{err:#}");
    }

    #[test]
    fn duplicate_id_names_the_id() {
        let file = write_lines(&[
            r#"{"id": "dup", "text": "one"}"#,
            r#"{"id": "dup", "text": "two"}"#,
        ]);
        let err = load_corpus(file.path()).unwrap_err();
        assert!(err.to_string().contains("dup"), "{err}");
    }

    #[test]
    fn gold_labels_need_full_coverage() {
        let labeled = vec![
            Document::new("a", "t").with_label("x"),
            Document::new("b", "t").with_label("y"),
            Document::new("c", "t").with_label("x"),
        ];
        assert_eq!(gold_labels(&labeled).unwrap(), vec!["x", "y"]);
        let partial = vec![
            Document::new("a", "t").with_label("x"),
            Document::new("b", "t"),
        ];
        assert!(gold_labels(&partial).is_none());
    }
}
