use std::io::{self, BufRead, Write};

use thiserror::Error;

use super::Document;

#[derive(Debug, Error)]
pub enum CorpusReadError {
    #[error("corrupt corpus record at line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Writes one JSON record per line with keys `id, sentences, label, gold,
/// split` in that order.
pub fn write_corpus<W: Write>(mut out: W, documents: &[Document]) -> io::Result<()> {
    for doc in documents {
        serde_json::to_writer(&mut out, doc)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Reads a corpus file. Blank lines and `#` comment lines are skipped; line
/// numbers in errors are 1-based.
pub fn read_corpus<R: BufRead>(input: R) -> Result<Vec<Document>, CorpusReadError> {
    let mut documents = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let doc: Document = serde_json::from_str(&line).map_err(|e| CorpusReadError::Corrupt {
            line: i + 1,
            message: e.to_string(),
        })?;
        documents.push(doc);
    }
    Ok(documents)
}
