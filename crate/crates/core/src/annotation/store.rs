use std::collections::{BTreeMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{AnnotationError, Ballot, Vote};
use crate::world::FmssId;

fn io(e: std::io::Error) -> AnnotationError {
    AnnotationError::Io(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ack {
    pub ballot_size: usize,
    /// The same (worker, fmss, timestamp) was already recorded.
    pub duplicate: bool,
}

/// Ballots keyed by asset section, optionally backed by an append-only
/// newline-delimited JSON log. Callers sharing a store across threads wrap
/// it in a lock; each record is a single append followed by a flush.
#[derive(Debug)]
pub struct VoteStore {
    class_count: usize,
    ballots: BTreeMap<FmssId, Ballot>,
    seen: HashSet<(String, FmssId, u64)>,
    log: Option<File>,
}

impl VoteStore {
    pub fn in_memory(class_count: usize) -> Self {
        VoteStore {
            class_count,
            ballots: BTreeMap::new(),
            seen: HashSet::new(),
            log: None,
        }
    }

    /// Replays an existing log (if any) and appends new votes to it. A torn
    /// final line left by a crash is truncated away.
    pub fn open(path: &Path, class_count: usize) -> Result<Self, AnnotationError> {
        let mut store = Self::in_memory(class_count);
        if path.exists() {
            let mut text = String::new();
            File::open(path)
                .map_err(io)?
                .read_to_string(&mut text)
                .map_err(io)?;
            let mut good = 0;
            for (i, line) in text.split_inclusive('\n').enumerate() {
                let complete = line.ends_with('\n');
                if line.trim().is_empty() {
                    good += line.len();
                    continue;
                }
                match serde_json::from_str::<Vote>(line.trim_end()) {
                    Ok(v) => {
                        store.apply(v)?;
                        good += line.len();
                    }
                    Err(_) if !complete => break,
                    Err(e) => {
                        return Err(AnnotationError::Parse {
                            line: i + 1,
                            message: e.to_string(),
                        })
                    }
                }
            }
            if good < text.len() {
                OpenOptions::new()
                    .write(true)
                    .open(path)
                    .map_err(io)?
                    .set_len(good as u64)
                    .map_err(io)?;
            }
        }
        store.log = Some(
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(io)?,
        );
        Ok(store)
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn validate(&self, vote: &Vote) -> Result<(), AnnotationError> {
        if (vote.class_id as usize) < self.class_count {
            Ok(())
        } else {
            Err(AnnotationError::InvalidClass {
                class: vote.class_id as u32,
                classes: self.class_count,
            })
        }
    }

    fn apply(&mut self, vote: Vote) -> Result<Ack, AnnotationError> {
        self.validate(&vote)?;
        let key = (vote.worker.clone(), vote.fmss.clone(), vote.ts_ms);
        let duplicate = !self.seen.insert(key);
        let ballot = self
            .ballots
            .entry(vote.fmss.clone())
            .or_insert_with(|| Ballot::new(vote.fmss.clone()));
        if !duplicate {
            ballot.insert_vote(vote);
        }
        Ok(Ack {
            ballot_size: ballot.votes.len(),
            duplicate,
        })
    }

    pub fn record(&mut self, vote: Vote) -> Result<Ack, AnnotationError> {
        self.validate(&vote)?;
        if self
            .seen
            .contains(&(vote.worker.clone(), vote.fmss.clone(), vote.ts_ms))
        {
            let size = self.ballots.get(&vote.fmss).map_or(0, |b| b.votes.len());
            return Ok(Ack {
                ballot_size: size,
                duplicate: true,
            });
        }
        if let Some(log) = &mut self.log {
            let mut line = serde_json::to_vec(&vote).expect("vote serializes");
            line.push(b'\n');
            log.write_all(&line).map_err(io)?;
            log.flush().map_err(io)?;
        }
        self.apply(vote)
    }

    pub fn ballot(&self, fmss: &FmssId) -> Option<&Ballot> {
        self.ballots.get(fmss)
    }

    pub fn has_vote_from(&self, worker: &str, fmss: &FmssId) -> bool {
        self.ballots
            .get(fmss)
            .is_some_and(|b| b.votes.iter().any(|v| v.worker == worker))
    }

    /// Snapshot of every ballot, ordered by asset section.
    pub fn ballots(&self) -> Vec<Ballot> {
        self.ballots.values().cloned().collect()
    }

    pub fn vote_count(&self) -> usize {
        self.ballots.values().map(|b| b.votes.len()).sum()
    }
}

pub fn record_vote(store: &mut VoteStore, vote: Vote) -> Result<Ack, AnnotationError> {
    store.record(vote)
}

/// Reads a votes log, one JSON object per line; blank lines are skipped.
pub fn parse_votes<R: Read>(source: R) -> Result<Vec<Vote>, AnnotationError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(&line).map_err(|e| AnnotationError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vote(worker: &str, class: u8, ts: u64) -> Vote {
        Vote {
            fmss: FmssId::new("a.ydr", "m", 0, 0),
            class_id: class,
            worker: worker.into(),
            ts_ms: ts,
        }
    }

    #[test]
    fn first_vote_and_duplicate() {
        let mut s = VoteStore::in_memory(37);
        assert_eq!(
            record_vote(&mut s, vote("w", 3, 10)).unwrap(),
            Ack {
                ballot_size: 1,
                duplicate: false
            }
        );
        assert_eq!(
            record_vote(&mut s, vote("w", 3, 10)).unwrap(),
            Ack {
                ballot_size: 1,
                duplicate: true
            }
        );
        assert_eq!(
            record_vote(&mut s, vote("w", 3, 11)).unwrap().ballot_size,
            2
        );
    }

    #[test]
    fn invalid_class_rejected() {
        let mut s = VoteStore::in_memory(37);
        let mut v = vote("w", 0, 0);
        v.class_id = 200;
        assert_eq!(
            record_vote(&mut s, v),
            Err(AnnotationError::InvalidClass {
                class: 200,
                classes: 37
            })
        );
        assert_eq!(s.vote_count(), 0);
    }

    #[test]
    fn ballots_sorted_by_time() {
        let mut s = VoteStore::in_memory(5);
        s.record(vote("a", 1, 30)).unwrap();
        s.record(vote("b", 2, 10)).unwrap();
        s.record(vote("c", 3, 20)).unwrap();
        let b = &s.ballots()[0];
        assert_eq!(
            b.votes.iter().map(|v| v.ts_ms).collect::<Vec<_>>(),
            vec![10, 20, 30]
        );
    }

    #[test]
    fn log_line_shape_and_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("votes.ndjson");
        {
            let mut s = VoteStore::open(&path, 5).unwrap();
            s.record(vote("a", 1, 30)).unwrap();
            s.record(vote("a", 1, 30)).unwrap();
            s.record(vote("b", 2, 10)).unwrap();
        }
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first["fmss"]["model"], "m");
        assert_eq!(first["class_id"], 1);
        assert_eq!(first["worker"], "a");
        assert_eq!(first["ts_ms"], 30);
        assert_eq!(parse_votes(text.as_bytes()).unwrap().len(), 2);

        let s = VoteStore::open(&path, 5).unwrap();
        assert_eq!(s.vote_count(), 2);
    }

    #[test]
    fn torn_tail_is_truncated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("votes.ndjson");
        {
            let mut s = VoteStore::open(&path, 5).unwrap();
            s.record(vote("a", 1, 1)).unwrap();
        }
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"fmss\":{\"fi").unwrap();
        drop(f);
        let mut s = VoteStore::open(&path, 5).unwrap();
        assert_eq!(s.vote_count(), 1);
        s.record(vote("b", 1, 2)).unwrap();
        drop(s);
        assert_eq!(VoteStore::open(&path, 5).unwrap().vote_count(), 2);
    }

    #[test]
    fn corrupt_interior_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("votes.ndjson");
        std::fs::write(&path, "garbage\n").unwrap();
        assert!(matches!(
            VoteStore::open(&path, 5),
            Err(AnnotationError::Parse { line: 1, .. })
        ));
    }
}
