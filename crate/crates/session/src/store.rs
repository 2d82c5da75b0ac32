//! One append-only JSON-lines event log per session.
//!
//! The first line is the `created` event carrying the session header; each
//! further line is an `answer` event. Loading a session replays its log.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SessionError};
use crate::protocol::{AnswerRecord, SessionHeader};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    Created(SessionHeader),
    Answer(AnswerRecord),
}

/// Session ids double as file names, so they are kept to a safe alphabet.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 64
        && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

/// Where session logs live; `None` keeps everything in memory.
#[derive(Clone, Debug)]
pub struct Store {
    dir: Option<PathBuf>,
}

/// A session log read back from disk.
#[derive(Clone, Debug, PartialEq)]
pub struct StoredSession {
    pub header: SessionHeader,
    pub answers: Vec<AnswerRecord>,
}

fn line(event: &LogEvent) -> Result<String> {
    let mut s = serde_json::to_string(event).map_err(|e| SessionError::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

impl Store {
    pub fn memory() -> Self {
        Self { dir: None }
    }

    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir: Some(dir) })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn path(&self, id: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{id}.jsonl")))
    }

    /// Writes a new log holding the header and any answers. Fails if the
    /// session already has a log.
    pub fn create(&self, header: &SessionHeader, answers: &[AnswerRecord]) -> Result<()> {
        let Some(path) = self.path(&header.id) else { return Ok(()) };
        if path.exists() {
            return Err(SessionError::Conflict(format!("session {} already exists", header.id)));
        }
        let mut body = line(&LogEvent::Created(header.clone()))?;
        for a in answers {
            body.push_str(&line(&LogEvent::Answer(a.clone()))?);
        }
        let tmp = path.with_extension("jsonl.tmp");
        {
            let mut f = File::create(&tmp)?;
            f.write_all(body.as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    pub fn append(&self, id: &str, answer: &AnswerRecord) -> Result<()> {
        let Some(path) = self.path(id) else { return Ok(()) };
        let mut f = OpenOptions::new().append(true).open(&path)?;
        f.write_all(line(&LogEvent::Answer(answer.clone()))?.as_bytes())?;
        f.sync_data()?;
        Ok(())
    }

    /// Reads one log. A torn final line (no trailing newline) is dropped
    /// with a warning; any other malformed line is an error.
    pub fn read(path: &Path) -> Result<(StoredSession, Option<String>)> {
        let reader = BufReader::new(File::open(path)?);
        let mut lines = Vec::new();
        for l in reader.split(b'\n') {
            lines.push(l?);
        }
        let ends_with_newline = fs::read(path)?.last() == Some(&b'\n');
        let mut header = None;
        let mut answers = Vec::new();
        let mut warning = None;
        let count = lines.len();
        for (i, raw) in lines.into_iter().enumerate() {
            if raw.iter().all(u8::is_ascii_whitespace) {
                continue;
            }
            let event = match serde_json::from_slice::<LogEvent>(&raw) {
                Ok(e) => e,
                Err(e) if i + 1 == count && !ends_with_newline => {
                    warning = Some(format!("{}: dropped torn final line ({e})", path.display()));
                    break;
                }
                Err(e) => {
                    return Err(SessionError::Io(format!("{} line {}: {e}", path.display(), i + 1)))
                }
            };
            match (event, &header) {
                (LogEvent::Created(h), None) => header = Some(h),
                (LogEvent::Answer(a), Some(_)) => answers.push(a),
                _ => {
                    return Err(SessionError::Io(format!(
                        "{} line {}: log must start with a single created event",
                        path.display(),
                        i + 1
                    )))
                }
            }
        }
        let header =
            header.ok_or_else(|| SessionError::Io(format!("{}: empty session log", path.display())))?;
        Ok((StoredSession { header, answers }, warning))
    }

    /// Every readable log in the store, plus warnings for the rest.
    pub fn load_all(&self) -> Result<(Vec<StoredSession>, Vec<String>)> {
        let Some(dir) = &self.dir else { return Ok((Vec::new(), Vec::new())) };
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        let mut sessions = Vec::new();
        let mut warnings = Vec::new();
        for p in paths {
            match Self::read(&p) {
                Ok((s, w)) => {
                    if let Some(w) = w {
                        warnings.push(w);
                        self.rewrite(&s)?;
                    }
                    sessions.push(s);
                }
                Err(e) => warnings.push(format!("skipped {}: {e}", p.display())),
            }
        }
        Ok((sessions, warnings))
    }

    /// Rewrites a log without its torn tail so later appends stay valid.
    pub fn rewrite(&self, stored: &StoredSession) -> Result<()> {
        let Some(path) = self.path(&stored.header.id) else { return Ok(()) };
        let _ = fs::remove_file(&path);
        self.create(&stored.header, &stored.answers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{Answer, Choice};
    use crate::render::PhenotypeSpec;
    use ide_core::ea::{Algorithm, RunConfig};

    fn header(id: &str) -> SessionHeader {
        SessionHeader {
            id: id.into(),
            algorithm: Algorithm::De,
            config: RunConfig::new(Algorithm::De, true, 3, 8),
            phenotype_spec: PhenotypeSpec::default(),
            seed: 1,
            created_at_ms: 5,
        }
    }

    fn answer(q: usize) -> AnswerRecord {
        AnswerRecord {
            query_id: format!("q{q}"),
            answer: Answer::Pair { choice: Choice::B },
            timestamp_ms: 10 + q as u64,
        }
    }

    #[test]
    fn ids_are_file_safe() {
        assert!(valid_id("a1-B_2"));
        assert!(!valid_id(""));
        assert!(!valid_id("../x"));
        assert!(!valid_id("a/b"));
        assert!(!valid_id(&"x".repeat(65)));
    }

    #[test]
    fn round_trip_and_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        store.create(&header("s1"), &[]).unwrap();
        store.append("s1", &answer(0)).unwrap();
        store.append("s1", &answer(1)).unwrap();
        assert!(matches!(store.create(&header("s1"), &[]), Err(SessionError::Conflict(_))));

        let (all, warnings) = store.load_all().unwrap();
        assert!(warnings.is_empty());
        assert_eq!(all, vec![StoredSession { header: header("s1"), answers: vec![answer(0), answer(1)] }]);

        let path = dir.path().join("s1.jsonl");
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"event\":\"answer\",\"query_id\":\"q2\",\"ans").unwrap();
        drop(f);
        let (all, warnings) = store.load_all().unwrap();
        assert_eq!(all[0].answers.len(), 2);
        assert_eq!(warnings.len(), 1);

        // loading repaired the log, so appends land on a fresh line
        store.append("s1", &answer(2)).unwrap();
        let (all, warnings) = store.load_all().unwrap();
        assert!(warnings.is_empty());
        assert_eq!(all[0].answers.len(), 3);
    }

    #[test]
    fn corrupt_logs_are_skipped_with_a_warning() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        fs::write(dir.path().join("bad.jsonl"), "not json\n").unwrap();
        fs::write(dir.path().join("ignored.txt"), "x").unwrap();
        store.create(&header("good"), &[answer(0)]).unwrap();
        let (all, warnings) = store.load_all().unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("bad.jsonl"));
    }
}
