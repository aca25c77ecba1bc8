//! Session recording and byte-identical replay.
//!
//! Transcript format: JSONL with a header line
//! `{"format":"chat-transcript","version":1}` followed by one line per
//! call: `{"request_hash", "request", "responses"}`.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::backend::ChatBackend;
use crate::{CompletionRequest, GatewayError};

pub const TRANSCRIPT_FORMAT: &str = "chat-transcript";
pub const TRANSCRIPT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranscriptLine {
    pub request_hash: String,
    pub request: CompletionRequest,
    pub responses: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
}

/// Wraps any backend and appends every `(request, responses)` pair to a
/// JSONL transcript usable by [`ReplayBackend`].
pub struct RecordingBackend {
    inner: Arc<dyn ChatBackend>,
    file: Mutex<File>,
}

impl RecordingBackend {
    pub fn create(inner: Arc<dyn ChatBackend>, path: &Path) -> Result<Self, GatewayError> {
        let mut file = File::create(path)?;
        let header = Header {
            format: TRANSCRIPT_FORMAT.into(),
            version: TRANSCRIPT_VERSION,
        };
        writeln!(file, "{}", serde_json::to_string(&header)?)?;
        Ok(Self { inner, file: Mutex::new(file) })
    }
}

impl ChatBackend for RecordingBackend {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>, GatewayError> {
        let responses = self.inner.complete(request)?;
        let line = TranscriptLine {
            request_hash: request.request_hash(),
            request: request.clone(),
            responses: responses.clone(),
        };
        let mut file = self.file.lock().unwrap();
        writeln!(file, "{}", serde_json::to_string(&line)?)?;
        file.flush()?;
        Ok(responses)
    }
}

/// Parse a transcript file, checking the header.
pub fn read_transcript(path: &Path) -> Result<Vec<TranscriptLine>, GatewayError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| GatewayError::InvalidRequest("empty transcript file".into()))??;
    let header: Header = serde_json::from_str(&header_line)?;
    if header.format != TRANSCRIPT_FORMAT {
        return Err(GatewayError::InvalidRequest(format!(
            "not a chat transcript: format {:?}",
            header.format
        )));
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

/// Replays a recorded session; any divergence from the recorded call
/// sequence is an error.
pub struct ReplayBackend {
    name: String,
    entries: Mutex<std::collections::VecDeque<TranscriptLine>>,
}

impl ReplayBackend {
    pub fn open(name: impl Into<String>, path: &Path) -> Result<Self, GatewayError> {
        let entries = read_transcript(path)?;
        Ok(Self {
            name: name.into(),
            entries: Mutex::new(entries.into()),
        })
    }
}

impl ChatBackend for ReplayBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>, GatewayError> {
        let mut entries = self.entries.lock().unwrap();
        let entry = entries.pop_front().ok_or_else(|| GatewayError::TranscriptDivergence {
            expected: "<end of transcript>".into(),
            got: request.request_hash(),
        })?;
        let got = request.request_hash();
        if entry.request_hash != got {
            return Err(GatewayError::TranscriptDivergence {
                expected: entry.request_hash,
                got,
            });
        }
        Ok(entry.responses)
    }
}
