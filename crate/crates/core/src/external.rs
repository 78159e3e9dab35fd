//! Scores and embeddings produced outside the toolkit.
//!
//! Neural quality estimators are consumed through score files or through a
//! scorer subprocess speaking line-delimited JSON:
//!
//! ```text
//! request:  {"id": <int>, "src": <string>, "tgt": <string>}
//! response: {"id": <int>, "score": <finite number>}
//! ```
//!
//! Closing the request stream signals end of input; the scorer answers every
//! outstanding request and exits 0. A response with `"score": null` (usually
//! with an `"error"` field) leaves that id unanswered.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde::Serialize;
use serde_json::Value;

use crate::corpus::{PairId, ParallelCorpus};
use crate::error::{Error, Result};
use crate::scores::{Direction, ScoreColumn};

pub const DEFAULT_WINDOW: usize = 256;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);

fn id_field(obj: &Value) -> Option<usize> {
    obj.get("id")?.as_u64().map(|id| id as usize)
}

enum ScoreField {
    Value(f64),
    Null,
}

/// Accepts a JSON number or a numeric string (so `"NaN"` is caught as non-finite).
fn score_field(obj: &Value) -> Option<ScoreField> {
    match obj.get("score")? {
        Value::Null => Some(ScoreField::Null),
        Value::Number(n) => n.as_f64().map(ScoreField::Value),
        Value::String(s) => s.trim().parse().ok().map(ScoreField::Value),
        _ => None,
    }
}

fn assemble(
    method: &str,
    direction: Direction,
    n_docs: usize,
    range: Option<(f64, f64)>,
    found: BTreeMap<PairId, f64>,
    unknown: Vec<PairId>,
) -> Result<ScoreColumn> {
    if !unknown.is_empty() {
        return Err(Error::UnknownIds {
            method: method.to_owned(),
            ids: unknown,
        });
    }
    let missing: Vec<PairId> = (0..n_docs).filter(|id| !found.contains_key(id)).collect();
    if !missing.is_empty() {
        return Err(Error::MissingIds {
            method: method.to_owned(),
            ids: missing,
        });
    }
    let mut column = ScoreColumn::new(method, direction, found.into_values().collect());
    column.range = range;
    column.validate()?;
    Ok(column)
}

/// Loads a JSONL score file (`{"id": int, "score": number}` per line) covering
/// ids `0..n_docs`.
pub fn load_scores(
    path: &Path,
    method: &str,
    direction: Direction,
    n_docs: usize,
    range: Option<(f64, f64)>,
) -> Result<ScoreColumn> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_scores(BufReader::new(file), method, direction, n_docs, range)
}

pub fn read_scores<R: BufRead>(
    reader: R,
    method: &str,
    direction: Direction,
    n_docs: usize,
    range: Option<(f64, f64)>,
) -> Result<ScoreColumn> {
    let mut found = BTreeMap::new();
    let mut unknown = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let row = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: &str| Error::Malformed {
            row,
            reason: reason.to_owned(),
        };
        let obj: Value = serde_json::from_str(&line).map_err(|e| malformed(&e.to_string()))?;
        let id = id_field(&obj).ok_or_else(|| malformed("missing or invalid \"id\""))?;
        let score = match score_field(&obj) {
            Some(ScoreField::Value(s)) => s,
            Some(ScoreField::Null) => continue,
            None => return Err(malformed("missing or invalid \"score\"")),
        };
        if !score.is_finite() {
            return Err(Error::NonFinite { row });
        }
        if id >= n_docs {
            unknown.push(id);
            continue;
        }
        if let Some((lo, hi)) = range {
            if score < lo || score > hi {
                return Err(Error::OutOfRange { id, score, lo, hi });
            }
        }
        if found.insert(id, score).is_some() {
            return Err(Error::DuplicateId {
                method: method.to_owned(),
                id,
            });
        }
    }
    assemble(method, direction, n_docs, range, found, unknown)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: BTreeMap<PairId, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(vectors: BTreeMap<PairId, Vec<f64>>) -> Result<Self> {
        let dim = vectors
            .values()
            .next()
            .map(Vec::len)
            .ok_or_else(|| Error::domain("embedding table is empty"))?;
        if dim == 0 {
            return Err(Error::domain("embeddings must have at least one dimension"));
        }
        for (id, v) in &vectors {
            if v.len() != dim {
                return Err(Error::domain(format!(
                    "embedding {id} has dimension {} instead of {dim}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::domain(format!("embedding {id} has a non-finite component")));
            }
        }
        Ok(EmbeddingTable { dim, vectors })
    }

    /// Reads `{"id": int, "vec": [numbers]}` lines.
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut vectors = BTreeMap::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let malformed = |reason: String| Error::Malformed { row: i + 1, reason };
            let obj: Value = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
            let id = id_field(&obj).ok_or_else(|| malformed("missing or invalid \"id\"".into()))?;
            let vec: Vec<f64> = obj
                .get("vec")
                .and_then(Value::as_array)
                .and_then(|xs| xs.iter().map(Value::as_f64).collect())
                .ok_or_else(|| malformed("missing or invalid \"vec\"".into()))?;
            if vectors.insert(id, vec).is_some() {
                return Err(malformed(format!("duplicate id {id}")));
            }
        }
        Self::new(vectors)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, id: PairId) -> Option<&[f64]> {
        self.vectors.get(&id).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Componentwise mean of every vector in the table.
    pub fn mean(&self) -> Vec<f64> {
        mean_of(self.vectors.values().map(Vec::as_slice), self.dim)
    }
}

fn mean_of<'a>(vectors: impl Iterator<Item = &'a [f64]>, dim: usize) -> Vec<f64> {
    let mut sum = vec![0.0; dim];
    let mut n = 0usize;
    for v in vectors {
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
        n += 1;
    }
    sum.iter().map(|s| s / n as f64).collect()
}

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::domain(format!(
            "dimension mismatch: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::domain("cosine similarity of a zero vector"));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Cosine similarity of each pair's embedding to `reference`, for ids `0..n_docs`.
pub fn similarity_to_reference(
    embeddings: &EmbeddingTable,
    reference: &[f64],
    n_docs: usize,
    method: &str,
) -> Result<ScoreColumn> {
    let missing: Vec<PairId> = (0..n_docs).filter(|id| embeddings.get(*id).is_none()).collect();
    if !missing.is_empty() {
        return Err(Error::MissingIds {
            method: method.to_owned(),
            ids: missing,
        });
    }
    let scores = (0..n_docs)
        .map(|id| cosine_similarity(embeddings.get(id).expect("checked above"), reference))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ScoreColumn::new(method, Direction::HigherBetter, scores).with_range(-1.0, 1.0))
}

/// Similarity of every corpus pair to the mean embedding of `in_domain_ids`.
pub fn semantic_similarity_scores(
    embeddings: &EmbeddingTable,
    in_domain_ids: &[PairId],
    n_docs: usize,
    method: &str,
) -> Result<ScoreColumn> {
    if in_domain_ids.is_empty() {
        return Err(Error::domain("no in-domain ids given"));
    }
    let mut absent = Vec::new();
    let vectors: Vec<&[f64]> = in_domain_ids
        .iter()
        .filter_map(|&id| {
            let v = embeddings.get(id);
            if v.is_none() {
                absent.push(id);
            }
            v
        })
        .collect();
    if !absent.is_empty() {
        return Err(Error::MissingIds {
            method: method.to_owned(),
            ids: absent,
        });
    }
    let reference = mean_of(vectors.into_iter(), embeddings.dim());
    similarity_to_reference(embeddings, &reference, n_docs, method)
}

#[derive(Debug, Clone)]
pub struct StreamOptions {
    /// Maximum number of requests sent but not yet answered.
    pub window: usize,
    /// Longest wait for the next response line.
    pub timeout: Duration,
    pub direction: Direction,
    pub range: Option<(f64, f64)>,
}

impl Default for StreamOptions {
    fn default() -> Self {
        StreamOptions {
            window: DEFAULT_WINDOW,
            timeout: DEFAULT_TIMEOUT,
            direction: Direction::HigherBetter,
            range: None,
        }
    }
}

#[derive(Serialize)]
struct Request<'a> {
    id: PairId,
    src: &'a str,
    tgt: &'a str,
}

enum ReaderEvent {
    Line(String),
    Eof,
    Failed(std::io::Error),
}

fn unanswered(requested: usize, answered: &BTreeMap<PairId, f64>) -> Vec<PairId> {
    (0..requested).filter(|id| !answered.contains_key(id)).collect()
}

fn fmt_id_list(ids: &[PairId]) -> String {
    let shown: Vec<String> = ids.iter().take(20).map(|i| i.to_string()).collect();
    if ids.len() > 20 {
        format!("{{{}, ...}}", shown.join(", "))
    } else {
        format!("{{{}}}", shown.join(", "))
    }
}

/// Scores every pair of `corpus` through a scorer subprocess.
///
/// Requests are pipelined by a writer thread with at most `options.window`
/// in flight; responses may arrive in any order and are matched by id.
pub fn stream_score(
    corpus: &ParallelCorpus,
    mut command: Command,
    method: &str,
    options: &StreamOptions,
) -> Result<ScoreColumn> {
    let mut child = command
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::Scorer(format!("cannot start scorer: {e}")))?;
    let stdin = child.stdin.take().expect("piped stdin");
    let stdout = child.stdout.take().expect("piped stdout");
    let mut stderr = child.stderr.take().expect("piped stderr");

    let stderr_thread = thread::spawn(move || {
        let mut buf = String::new();
        let _ = stderr.read_to_string(&mut buf);
        buf
    });

    let (event_tx, event_rx) = mpsc::channel();
    thread::spawn(move || {
        let mut reader = BufReader::new(stdout);
        loop {
            let mut line = String::new();
            let event = match reader.read_line(&mut line) {
                Ok(0) => ReaderEvent::Eof,
                Ok(_) => ReaderEvent::Line(line),
                Err(e) => ReaderEvent::Failed(e),
            };
            let done = !matches!(event, ReaderEvent::Line(_));
            if event_tx.send(event).is_err() || done {
                break;
            }
        }
    });

    let (credit_tx, credit_rx) = mpsc::channel::<()>();
    for _ in 0..options.window.max(1) {
        credit_tx.send(()).expect("receiver alive");
    }
    let requests: Vec<String> = corpus
        .pairs()
        .iter()
        .map(|p| {
            serde_json::to_string(&Request {
                id: p.id,
                src: &p.source_text,
                tgt: &p.target_text,
            })
        })
        .collect::<std::result::Result<_, _>>()?;
    let writer = thread::spawn(move || {
        let mut out = BufWriter::new(stdin);
        for req in requests {
            if credit_rx.try_recv().is_err() {
                // about to block on back-pressure: let the scorer see what we have
                if out.flush().is_err() || credit_rx.recv().is_err() {
                    return;
                }
            }
            if writeln!(out, "{req}").is_err() {
                return;
            }
        }
        let _ = out.flush();
        // dropping `out` closes the scorer's stdin
    });

    let n = corpus.n_docs();
    let mut answered: BTreeMap<PairId, f64> = BTreeMap::new();
    let mut responded: BTreeSet<PairId> = BTreeSet::new();
    let mut failure: Option<String> = None;
    let mut stream_ended = false;
    while responded.len() < n {
        match event_rx.recv_timeout(options.timeout) {
            Ok(ReaderEvent::Line(line)) => {
                if line.trim().is_empty() {
                    continue;
                }
                let parsed: Option<(PairId, Option<f64>)> = serde_json::from_str::<Value>(&line)
                    .ok()
                    .and_then(|obj| {
                        let id = id_field(&obj)?;
                        match score_field(&obj)? {
                            ScoreField::Value(s) => Some((id, Some(s))),
                            ScoreField::Null => Some((id, None)),
                        }
                    });
                let Some((id, score)) = parsed else {
                    failure = Some(format!("malformed response line: {}", line.trim_end()));
                    break;
                };
                if id >= n {
                    failure = Some(format!("response for unknown id {id}"));
                    break;
                }
                if !responded.insert(id) {
                    failure = Some(format!("duplicate response for id {id}"));
                    break;
                }
                let _ = credit_tx.send(());
                if let Some(score) = score {
                    if !score.is_finite() {
                        failure = Some(format!("non-finite score for id {id}"));
                        break;
                    }
                    answered.insert(id, score);
                }
            }
            Ok(ReaderEvent::Eof) => {
                stream_ended = true;
                let missing = unanswered(n, &answered);
                failure = Some(format!(
                    "scorer exited before answering {} ids: {}",
                    missing.len(),
                    fmt_id_list(&missing)
                ));
                break;
            }
            Ok(ReaderEvent::Failed(e)) => {
                failure = Some(format!("cannot read scorer output: {e}"));
                break;
            }
            Err(RecvTimeoutError::Timeout) => {
                let missing = unanswered(n, &answered);
                failure = Some(format!(
                    "timed out after {:?} waiting for {} ids: {}",
                    options.timeout,
                    missing.len(),
                    fmt_id_list(&missing)
                ));
                break;
            }
            Err(RecvTimeoutError::Disconnected) => {
                failure = Some("scorer output reader stopped".to_owned());
                break;
            }
        }
    }
    drop(credit_tx);

    if let Some(reason) = failure {
        if !stream_ended {
            let _ = child.kill();
        }
        let _ = child.wait();
        let stderr_text = if stream_ended {
            stderr_thread.join().unwrap_or_default()
        } else {
            String::new()
        };
        return Err(Error::Scorer(with_stderr(reason, &stderr_text)));
    }

    let _ = writer.join();
    let status = child.wait()?;
    let stderr_text = stderr_thread.join().unwrap_or_default();
    if !status.success() {
        return Err(Error::Scorer(with_stderr(
            format!("scorer exited with {status}"),
            &stderr_text,
        )));
    }
    let mut column = assemble(method, options.direction, n, options.range, answered, Vec::new())?;
    column.range = options.range;
    Ok(column)
}

fn with_stderr(reason: String, stderr: &str) -> String {
    let stderr = stderr.trim_end();
    if stderr.is_empty() {
        reason
    } else {
        format!("{reason}\nscorer stderr:\n{stderr}")
    }
}
