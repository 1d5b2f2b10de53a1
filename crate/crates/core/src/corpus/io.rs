use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{CorpusError, DialogueSession, Result};

/// Reads one JSON record per line. Blank lines are skipped; the first bad
/// record fails with its 1-based line number.
pub fn read_corpus<R: Read>(reader: R) -> Result<Vec<DialogueSession>> {
    let mut sessions = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let session: DialogueSession = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        session
            .validate()
            .map_err(|message| CorpusError::Malformed { line: i + 1, message })?;
        sessions.push(session);
    }
    Ok(sessions)
}

pub fn write_corpus<W: Write>(writer: W, sessions: &[DialogueSession]) -> Result<()> {
    let mut w = BufWriter::new(writer);
    for s in sessions {
        serde_json::to_writer(&mut w, s).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<DialogueSession>> {
    read_corpus(File::open(path)?)
}

pub fn save_corpus(sessions: &[DialogueSession], path: impl AsRef<Path>) -> Result<()> {
    write_corpus(File::create(path)?, sessions)
}
