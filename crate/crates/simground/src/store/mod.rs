//! Persistent, append-only experience memory with tags, embeddings,
//! surprise scores and exact cosine retrieval.
//!
//! Two JSONL files, each with a versioned header line: `episodes.jsonl`
//! holds records in insertion order (ids are line positions), and
//! `annotations.jsonl` holds `(episode_id, tag, embedding, surprise)`
//! sidecar entries. Records are never mutated or deleted; re-appending an
//! identical record returns the existing id.

pub mod embed;

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use llm_gateway::{ChatMessage, CompletionRequest, Gateway, GatewayError};

use crate::agent_loop::{EpisodeOutcome, EpisodeRecord};
use crate::{EnvKind, Fidelity};
use embed::{cosine, EmbedError, Embedder, HashingEmbedder};

pub const STORE_FORMAT: &str = "episode-store";
pub const ANNOTATIONS_FORMAT: &str = "episode-annotations";
pub const STORE_VERSION: u32 = 1;

/// Tags are clipped to this many characters.
pub const TAG_MAX_CHARS: usize = 512;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store io at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("store parse: {0}")]
    Json(#[from] serde_json::Error),
    #[error("no episode with id {0}")]
    UnknownEpisode(u64),
    #[error("retrieval over an empty store (after filtering)")]
    EmptyStore,
    #[error("episode {0} has no steps to tag")]
    NothingToTag(u64),
    #[error("annotator returned empty tags twice for episode {0}")]
    EmptyTag(u64),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AnnotationLine {
    episode_id: u64,
    tag: Option<String>,
    embedding: Option<Vec<f32>>,
    surprise: Option<u8>,
    surprise_defaulted: Option<bool>,
}

#[derive(Debug, Clone, Default)]
struct Annotation {
    tag: Option<String>,
    embedding: Option<Vec<f32>>,
    surprise: Option<u8>,
    surprise_defaulted: bool,
}

/// Filter predicates for retrieval.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RetrievalFilter {
    pub env_kind: Option<EnvKind>,
    pub outcome: Option<EpisodeOutcome>,
    pub fidelity: Option<Fidelity>,
}

impl RetrievalFilter {
    pub fn env(env_kind: EnvKind) -> Self {
        Self { env_kind: Some(env_kind), ..Self::default() }
    }

    fn admits(&self, record: &EpisodeRecord) -> bool {
        self.env_kind.map_or(true, |k| record.env_kind == k)
            && self.outcome.map_or(true, |o| record.outcome == o)
            && self.fidelity.map_or(true, |f| record.fidelity == f)
    }
}

pub struct ExperienceStore {
    dir: Option<PathBuf>,
    records: Vec<EpisodeRecord>,
    by_hash: HashMap<String, u64>,
    annotations: BTreeMap<u64, Annotation>,
    embedder: Box<dyn Embedder>,
    episodes_file: Option<File>,
    annotations_file: Option<File>,
}

impl ExperienceStore {
    /// Volatile store for tests and dry runs.
    pub fn in_memory() -> Self {
        Self {
            dir: None,
            records: Vec::new(),
            by_hash: HashMap::new(),
            annotations: BTreeMap::new(),
            embedder: Box::new(HashingEmbedder::default()),
            episodes_file: None,
            annotations_file: None,
        }
    }

    /// Open (or create) a durable store directory.
    pub fn open(dir: &Path) -> Result<Self, StoreError> {
        std::fs::create_dir_all(dir).map_err(|e| StoreError::Io { path: dir.into(), source: e })?;
        let episodes_path = dir.join("episodes.jsonl");
        let annotations_path = dir.join("annotations.jsonl");

        let mut store = Self {
            dir: Some(dir.to_path_buf()),
            records: Vec::new(),
            by_hash: HashMap::new(),
            annotations: BTreeMap::new(),
            embedder: Box::new(HashingEmbedder::default()),
            episodes_file: None,
            annotations_file: None,
        };

        if episodes_path.exists() {
            let reader = BufReader::new(
                File::open(&episodes_path)
                    .map_err(|e| StoreError::Io { path: episodes_path.clone(), source: e })?,
            );
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(|e| StoreError::Io { path: episodes_path.clone(), source: e })?;
                if line.trim().is_empty() {
                    continue;
                }
                if i == 0 {
                    let _: Header = serde_json::from_str(&line)?;
                    continue;
                }
                let mut record: EpisodeRecord = serde_json::from_str(&line)?;
                let id = store.records.len() as u64;
                record.id = Some(id);
                store.by_hash.insert(record.content_hash(), id);
                store.records.push(record);
            }
        } else {
            let mut f = File::create(&episodes_path)
                .map_err(|e| StoreError::Io { path: episodes_path.clone(), source: e })?;
            let header = Header { format: STORE_FORMAT.into(), version: STORE_VERSION };
            writeln!(f, "{}", serde_json::to_string(&header)?)
                .map_err(|e| StoreError::Io { path: episodes_path.clone(), source: e })?;
        }

        if annotations_path.exists() {
            let reader = BufReader::new(
                File::open(&annotations_path)
                    .map_err(|e| StoreError::Io { path: annotations_path.clone(), source: e })?,
            );
            for (i, line) in reader.lines().enumerate() {
                let line = line
                    .map_err(|e| StoreError::Io { path: annotations_path.clone(), source: e })?;
                if line.trim().is_empty() {
                    continue;
                }
                if i == 0 {
                    let _: Header = serde_json::from_str(&line)?;
                    continue;
                }
                let a: AnnotationLine = serde_json::from_str(&line)?;
                let entry = store.annotations.entry(a.episode_id).or_default();
                if a.tag.is_some() {
                    entry.tag = a.tag;
                    entry.embedding = a.embedding;
                }
                if a.surprise.is_some() {
                    entry.surprise = a.surprise;
                    entry.surprise_defaulted = a.surprise_defaulted.unwrap_or(false);
                }
            }
        } else {
            let mut f = File::create(&annotations_path)
                .map_err(|e| StoreError::Io { path: annotations_path.clone(), source: e })?;
            let header = Header { format: ANNOTATIONS_FORMAT.into(), version: STORE_VERSION };
            writeln!(f, "{}", serde_json::to_string(&header)?)
                .map_err(|e| StoreError::Io { path: annotations_path.clone(), source: e })?;
        }

        store.episodes_file = Some(
            OpenOptions::new()
                .append(true)
                .open(&episodes_path)
                .map_err(|e| StoreError::Io { path: episodes_path.clone(), source: e })?,
        );
        store.annotations_file = Some(
            OpenOptions::new()
                .append(true)
                .open(&annotations_path)
                .map_err(|e| StoreError::Io { path: annotations_path, source: e })?,
        );
        Ok(store)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Durably append; idempotent on identical content.
    pub fn append(&mut self, mut record: EpisodeRecord) -> Result<u64, StoreError> {
        record.id = None;
        let hash = record.content_hash();
        if let Some(id) = self.by_hash.get(&hash) {
            return Ok(*id);
        }
        let id = self.records.len() as u64;
        record.id = Some(id);
        if let Some(file) = self.episodes_file.as_mut() {
            let mut stored = record.clone();
            stored.id = None;
            stored.tag = None;
            stored.surprise = None;
            let line = serde_json::to_string(&stored)?;
            let path = self.dir.clone().unwrap_or_default();
            writeln!(file, "{line}").map_err(|e| StoreError::Io { path: path.clone(), source: e })?;
            file.flush().map_err(|e| StoreError::Io { path, source: e })?;
        }
        self.by_hash.insert(hash, id);
        self.records.push(record);
        Ok(id)
    }

    /// Fetch a record with its annotations merged in.
    pub fn get(&self, id: u64) -> Result<EpisodeRecord, StoreError> {
        let mut record = self
            .records
            .get(id as usize)
            .cloned()
            .ok_or(StoreError::UnknownEpisode(id))?;
        if let Some(a) = self.annotations.get(&id) {
            record.tag = a.tag.clone();
            record.surprise = a.surprise;
        }
        Ok(record)
    }

    pub fn iter_ids(&self) -> impl Iterator<Item = u64> + '_ {
        0..self.records.len() as u64
    }

    pub fn tag_of(&self, id: u64) -> Option<&str> {
        self.annotations.get(&id).and_then(|a| a.tag.as_deref())
    }

    pub fn surprise_of(&self, id: u64) -> Option<(u8, bool)> {
        self.annotations
            .get(&id)
            .and_then(|a| a.surprise.map(|s| (s, a.surprise_defaulted)))
    }

    fn write_annotation(&mut self, line: &AnnotationLine) -> Result<(), StoreError> {
        if let Some(file) = self.annotations_file.as_mut() {
            let json = serde_json::to_string(line)?;
            let path = self.dir.clone().unwrap_or_default();
            writeln!(file, "{json}").map_err(|e| StoreError::Io { path: path.clone(), source: e })?;
            file.flush().map_err(|e| StoreError::Io { path, source: e })?;
        }
        Ok(())
    }

    /// Store a tag directly (used by tests and scripted pipelines).
    pub fn set_tag(&mut self, id: u64, tag: &str) -> Result<(), StoreError> {
        if self.records.get(id as usize).is_none() {
            return Err(StoreError::UnknownEpisode(id));
        }
        let clipped = clip_tag(tag);
        let embedding = self.embedder.embed(&clipped)?;
        self.write_annotation(&AnnotationLine {
            episode_id: id,
            tag: Some(clipped.clone()),
            embedding: Some(embedding.clone()),
            surprise: None,
            surprise_defaulted: None,
        })?;
        let entry = self.annotations.entry(id).or_default();
        entry.tag = Some(clipped);
        entry.embedding = Some(embedding);
        Ok(())
    }

    /// Ask the annotator for a strategy-and-outcome tag; one retry on an
    /// empty reply, then an error. The tag is clipped to the length bound.
    pub fn tag_experience(&mut self, id: u64, annotator: &Gateway, model: &str) -> Result<String, StoreError> {
        let record = self.get(id)?;
        if record.steps.is_empty() {
            return Err(StoreError::NothingToTag(id));
        }
        let prompt = format!(
            "[tag-request]\nSummarize the strategy and outcome of this episode in one short sentence.\n\n{}",
            record.digest(20)
        );
        let request =
            CompletionRequest::new(model, vec![ChatMessage::user(prompt)]).with_temperature(0.3);
        let mut tag = String::new();
        for _ in 0..2 {
            let replies = annotator.complete(&request)?;
            tag = replies[0].trim().to_string();
            if !tag.is_empty() {
                break;
            }
        }
        if tag.is_empty() {
            return Err(StoreError::EmptyTag(id));
        }
        let clipped = clip_tag(&tag);
        self.set_tag(id, &clipped)?;
        Ok(clipped)
    }

    /// Record a known surprise score without consulting an annotator.
    pub fn score_surprise_direct(
        &mut self,
        id: u64,
        score: u8,
        defaulted: bool,
    ) -> Result<(), StoreError> {
        if self.records.get(id as usize).is_none() {
            return Err(StoreError::UnknownEpisode(id));
        }
        self.write_annotation(&AnnotationLine {
            episode_id: id,
            tag: None,
            embedding: None,
            surprise: Some(score),
            surprise_defaulted: Some(defaulted),
        })?;
        let entry = self.annotations.entry(id).or_default();
        entry.surprise = Some(score);
        entry.surprise_defaulted = defaulted;
        Ok(())
    }

    /// Rubric-prompted 1-10 surprise score. One retry on an unusable
    /// reply, then a flagged default of 5.
    pub fn score_surprise(&mut self, id: u64, annotator: &Gateway, model: &str) -> Result<(u8, bool), StoreError> {
        let record = self.get(id)?;
        let prompt = format!(
            "[surprise-request]\nOn a scale of 1-10, how surprising or difficult is this episode? Reply with one integer.\n\n{}",
            record.digest(12)
        );
        let (score, defaulted) = surprise_from_gateway(annotator, model, &prompt)?;
        self.write_annotation(&AnnotationLine {
            episode_id: id,
            tag: None,
            embedding: None,
            surprise: Some(score),
            surprise_defaulted: Some(defaulted),
        })?;
        let entry = self.annotations.entry(id).or_default();
        entry.surprise = Some(score);
        entry.surprise_defaulted = defaulted;
        Ok((score, defaulted))
    }

    /// Exact top-k cosine retrieval over tagged episodes; ties break to the
    /// lower insertion id.
    pub fn retrieve(
        &self,
        query: &str,
        k: usize,
        filter: &RetrievalFilter,
    ) -> Result<Vec<(u64, f32)>, StoreError> {
        assert!(k >= 1, "k must be at least 1");
        let query_vec = self.embedder.embed(query)?;
        let mut scored: Vec<(u64, f32)> = Vec::new();
        for (id, a) in &self.annotations {
            let Some(embedding) = &a.embedding else { continue };
            let Some(record) = self.records.get(*id as usize) else { continue };
            if !filter.admits(record) {
                continue;
            }
            scored.push((*id, cosine(&query_vec, embedding)));
        }
        if scored.is_empty() {
            return Err(StoreError::EmptyStore);
        }
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.0.cmp(&b.0))
        });
        scored.truncate(k);
        Ok(scored)
    }

    pub fn embedder(&self) -> &dyn Embedder {
        self.embedder.as_ref()
    }
}

fn clip_tag(tag: &str) -> String {
    if tag.chars().count() <= TAG_MAX_CHARS {
        return tag.to_string();
    }
    let mut clipped: String = tag.chars().take(TAG_MAX_CHARS - 3).collect();
    clipped.push_str("...");
    clipped
}

/// Shared 1-10 scoring rule: first integer in the reply if in range; one
/// retry; then default 5 with the flag set.
pub fn surprise_from_gateway(
    gateway: &Gateway,
    model: &str,
    prompt: &str,
) -> Result<(u8, bool), GatewayError> {
    let request =
        CompletionRequest::new(model, vec![ChatMessage::user(prompt)]).with_temperature(0.0);
    for _ in 0..2 {
        let replies = match gateway.complete(&request) {
            Ok(r) => r,
            Err(GatewayError::GatewayExhausted { .. }) => return Ok((5, true)),
            Err(e) => return Err(e),
        };
        if let Some(score) = extract_score(&replies[0]) {
            return Ok((score, false));
        }
    }
    Ok((5, true))
}

fn extract_score(reply: &str) -> Option<u8> {
    let mut current = String::new();
    for c in reply.chars().chain(std::iter::once(' ')) {
        if c.is_ascii_digit() {
            current.push(c);
        } else if !current.is_empty() {
            if let Ok(v) = current.parse::<u8>() {
                if (1..=10).contains(&v) {
                    return Some(v);
                }
            }
            current.clear();
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envbridge::EnvSpec;
    use agent_world::WorldConfig;

    fn record(seed: u64, outcome: EpisodeOutcome) -> EpisodeRecord {
        EpisodeRecord {
            id: None,
            env_kind: EnvKind::AgentWorld,
            task_id: format!("t{seed}"),
            fidelity: Fidelity::Imperfect,
            seed,
            env_spec: EnvSpec::AgentWorld { config: WorldConfig::imperfect_default(), seed },
            steps: Vec::new(),
            outcome,
            refinement_round: 0,
            parent_episode: None,
            gateway_error: None,
            tag: None,
            surprise: None,
        }
    }

    #[test]
    fn append_assigns_monotone_ids_and_is_idempotent() {
        let mut store = ExperienceStore::in_memory();
        let a = store.append(record(1, EpisodeOutcome::Success)).unwrap();
        let b = store.append(record(2, EpisodeOutcome::Failure)).unwrap();
        assert_eq!((a, b), (0, 1));
        let again = store.append(record(1, EpisodeOutcome::Success)).unwrap();
        assert_eq!(again, 0);
        assert_eq!(store.len(), 2);
    }

    #[test]
    fn get_merges_annotations() {
        let mut store = ExperienceStore::in_memory();
        let id = store.append(record(1, EpisodeOutcome::Success)).unwrap();
        store.set_tag(id, "went straight for the stairs").unwrap();
        let merged = store.get(id).unwrap();
        assert_eq!(merged.tag.as_deref(), Some("went straight for the stairs"));
    }

    #[test]
    fn tag_clipping_at_bound() {
        let long = "x".repeat(600);
        let clipped = clip_tag(&long);
        assert_eq!(clipped.chars().count(), TAG_MAX_CHARS);
        assert!(clipped.ends_with("..."));
    }

    #[test]
    fn retrieval_is_exact_and_tie_breaks_by_id() {
        let mut store = ExperienceStore::in_memory();
        for i in 0..4 {
            let id = store.append(record(i, EpisodeOutcome::Success)).unwrap();
            store.set_tag(id, "identical tag text").unwrap();
        }
        let hits = store.retrieve("identical tag text", 2, &RetrievalFilter::default()).unwrap();
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[0].0, 0);
        assert_eq!(hits[1].0, 1);
        assert!((hits[0].1 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn retrieval_respects_filters() {
        let mut store = ExperienceStore::in_memory();
        let a = store.append(record(1, EpisodeOutcome::Success)).unwrap();
        let b = store.append(record(2, EpisodeOutcome::Failure)).unwrap();
        store.set_tag(a, "fight the boss directly").unwrap();
        store.set_tag(b, "collect the hammer first").unwrap();
        let filter = RetrievalFilter {
            outcome: Some(EpisodeOutcome::Failure),
            ..RetrievalFilter::default()
        };
        let hits = store.retrieve("hammer", 5, &filter).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].0, b);
    }

    #[test]
    fn empty_store_retrieval_errors() {
        let store = ExperienceStore::in_memory();
        assert!(matches!(
            store.retrieve("anything", 1, &RetrievalFilter::default()),
            Err(StoreError::EmptyStore)
        ));
    }

    #[test]
    fn score_extraction_rules() {
        assert_eq!(extract_score("8"), Some(8));
        assert_eq!(extract_score("I'd say 7 out of 10"), Some(7));
        assert_eq!(extract_score("eleven"), None);
        assert_eq!(extract_score("0"), None);
        assert_eq!(extract_score("42 then 3"), Some(3));
    }

    #[test]
    fn durability_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (id_a, id_b);
        {
            let mut store = ExperienceStore::open(dir.path()).unwrap();
            id_a = store.append(record(1, EpisodeOutcome::Success)).unwrap();
            id_b = store.append(record(2, EpisodeOutcome::Failure)).unwrap();
            store.set_tag(id_a, "tag a").unwrap();
            store.score_surprise_direct(id_b, 7, false).unwrap();
        }
        let store = ExperienceStore::open(dir.path()).unwrap();
        assert_eq!(store.len(), 2);
        assert_eq!(store.tag_of(id_a), Some("tag a"));
        assert_eq!(store.surprise_of(id_b), Some((7, false)));
        let merged = store.get(id_a).unwrap();
        assert_eq!(merged.tag.as_deref(), Some("tag a"));
    }
}
