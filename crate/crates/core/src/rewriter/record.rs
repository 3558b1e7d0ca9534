use serde::{Deserialize, Serialize};

/// One rewrite sample in its on-disk (JSONL) form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteRecord {
    pub id: String,
    /// Preceding utterances, oldest first.
    pub context: Vec<String>,
    pub decision: String,
    pub gold_rewrite: String,
}

/// Reads one record per nonblank line.
pub fn read_records<R: std::io::BufRead>(reader: R) -> crate::Result<Vec<RewriteRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| crate::Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_records(records: &[RewriteRecord]) -> crate::Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}
