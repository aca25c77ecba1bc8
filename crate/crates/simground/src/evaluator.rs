//! Evaluation harness: repeated task-completion runs and QA accuracy over
//! emitted datasets, with JSON/markdown report emission.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use llm_gateway::{ChatMessage, CompletionRequest, Gateway};

use crate::agent_loop::{run_episode, EpisodeOutcome, LoopConfig};
use crate::annotator::InstructionSample;
use crate::datasets::{read_split, DatasetError};
use crate::envbridge::{build_env, EnvSpec};
use crate::seeds::derive_seed;
use crate::store::ExperienceStore;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Loop(#[from] crate::agent_loop::LoopError),
    #[error(transparent)]
    Env(#[from] crate::envbridge::EnvError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("report io at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("report serialization: {0}")]
    Json(#[from] serde_json::Error),
}

/// A task suite: entries plus the suite seed that fans out to episodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskSuite {
    pub id: String,
    pub seed: u64,
    pub entries: Vec<EnvSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task_id: String,
    pub repeats: u32,
    pub successes: u32,
    pub mean: f64,
    /// Repeats lost to gateway exhaustion, counted as failures.
    pub gateway_failures: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CompletionReport {
    pub per_task: Vec<TaskResult>,
    pub macro_mean: f64,
    pub total_gateway_failures: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct QaAccuracy {
    pub correct: u32,
    pub total: u32,
}

impl QaAccuracy {
    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            f64::from(self.correct) / f64::from(self.total)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct QaReport {
    pub per_kind: BTreeMap<String, QaAccuracy>,
    pub ood: QaAccuracy,
    pub in_distribution: QaAccuracy,
    pub overall: QaAccuracy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EvalReport {
    pub completion: Option<CompletionReport>,
    pub qa: BTreeMap<String, QaReport>,
    pub suite_seed: u64,
    pub backend: String,
    pub config_digest: String,
}

/// Episode seed for `(suite seed, task index, repeat)`; documented so
/// evaluations are replayable.
pub fn episode_seed(suite_seed: u64, task_idx: usize, repeat: u32) -> u64 {
    derive_seed(suite_seed, &format!("task-{task_idx}-repeat-{repeat}"))
}

/// Run every task `repeats` times with per-repeat derived seeds; success is
/// a terminal `Success`. Gateway exhaustion counts as a flagged failure and
/// never aborts the suite.
pub fn eval_task_completion(
    suite: &TaskSuite,
    backend_for: &dyn Fn(&EnvSpec, u32) -> Gateway,
    repeats: u32,
    cfg: &LoopConfig,
    mut store: Option<&mut ExperienceStore>,
) -> Result<CompletionReport, EvalError> {
    let mut report = CompletionReport::default();
    for (task_idx, entry) in suite.entries.iter().enumerate() {
        let mut successes = 0u32;
        let mut gateway_failures = 0u32;
        for repeat in 0..repeats {
            let spec = entry.with_seed(episode_seed(suite.seed, task_idx, repeat));
            let gateway = backend_for(&spec, repeat);
            let mut env = build_env(&spec)?;
            let record = run_episode(env.as_mut(), &gateway, cfg, &spec, None)?;
            if record.gateway_error.is_some() {
                gateway_failures += 1;
            } else if record.outcome == EpisodeOutcome::Success {
                successes += 1;
            }
            if let Some(store) = store.as_deref_mut() {
                store.append(record).map_err(|e| {
                    crate::agent_loop::LoopError::Store(e.to_string())
                })?;
            }
        }
        report.per_task.push(TaskResult {
            task_id: entry.task_id(),
            repeats,
            successes,
            mean: f64::from(successes) / f64::from(repeats.max(1)),
            gateway_failures,
        });
        report.total_gateway_failures += gateway_failures;
    }
    report.macro_mean = if report.per_task.is_empty() {
        0.0
    } else {
        report.per_task.iter().map(|t| t.mean).sum::<f64>() / report.per_task.len() as f64
    };
    Ok(report)
}

/// Default choice extractor: an explicit "Answer: X" wins, otherwise the
/// last standalone capital letter A-E.
pub fn extract_choice(reply: &str) -> Option<String> {
    let re = regex::Regex::new(r"(?i)answer\s*[:=]?\s*([A-E])\b").expect("valid regex");
    if let Some(caps) = re.captures_iter(reply).last() {
        return Some(caps[1].to_uppercase());
    }
    let standalone = regex::Regex::new(r"\b([A-E])\b").expect("valid regex");
    standalone
        .captures_iter(reply)
        .last()
        .map(|c| c[1].to_string())
}

fn grade(sample: &InstructionSample, reply: &str) -> bool {
    if sample.context.is_some() && sample.answer.trim().len() == 1 {
        match extract_choice(reply) {
            Some(choice) => choice == sample.answer.trim().to_uppercase(),
            None => false,
        }
    } else {
        let normalize = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
        normalize(reply) == normalize(&sample.answer)
    }
}

/// Accuracy of a backend over one split file, reported per kind and with
/// the OOD subset broken out.
pub fn eval_qa(
    dataset_path: &Path,
    backend: &Gateway,
    model: &str,
    extractor: Option<&dyn Fn(&str) -> Option<String>>,
) -> Result<QaReport, EvalError> {
    let samples = read_split(dataset_path)?;
    if samples.is_empty() {
        return Err(EvalError::Dataset(DatasetError::EmptyDataset(dataset_path.into())));
    }
    let mut report = QaReport::default();
    for sample in &samples {
        let mut prompt = format!("Question: {}\n", sample.question);
        if let Some(context) = &sample.context {
            prompt.push_str(&format!("Context: {context}\n"));
        }
        prompt.push_str("Answer:");
        let request = CompletionRequest::new(model, vec![ChatMessage::user(prompt)])
            .with_temperature(0.0);
        let reply = match backend.complete(&request) {
            Ok(replies) => replies[0].clone(),
            // Failed calls grade as wrong answers.
            Err(_) => String::new(),
        };
        let correct = if let Some(extractor) = extractor {
            match extractor(&reply) {
                Some(extracted) => {
                    extracted.trim().eq_ignore_ascii_case(sample.answer.trim())
                }
                None => false,
            }
        } else {
            grade(sample, &reply)
        };

        let entry = report.per_kind.entry(sample.kind.name().to_string()).or_default();
        entry.total += 1;
        report.overall.total += 1;
        let bucket = if sample.ood { &mut report.ood } else { &mut report.in_distribution };
        bucket.total += 1;
        if correct {
            entry.correct += 1;
            report.overall.correct += 1;
            if sample.ood {
                report.ood.correct += 1;
            } else {
                report.in_distribution.correct += 1;
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Markdown,
}

/// Serialize a report deterministically. The markdown form mirrors a
/// model-by-environment results table.
pub fn emit_report(report: &EvalReport, path: &Path, format: ReportFormat) -> Result<(), EvalError> {
    let body = match format {
        ReportFormat::Json => serde_json::to_string_pretty(report)?,
        ReportFormat::Markdown => render_markdown(report),
    };
    std::fs::write(path, body).map_err(|e| EvalError::Io { path: path.into(), source: e })?;
    Ok(())
}

fn render_markdown(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "# Evaluation Report\n\nBackend: `{}`  \nSuite seed: {}  \nConfig digest: `{}`\n\n",
        report.backend, report.suite_seed, report.config_digest
    ));
    match &report.completion {
        Some(completion) => {
            out.push_str("## Task Completion\n\n| Task | Repeats | Successes | Mean |\n|---|---|---|---|\n");
            for task in &completion.per_task {
                out.push_str(&format!(
                    "| {} | {} | {} | {:.2} |\n",
                    task.task_id, task.repeats, task.successes, task.mean
                ));
            }
            out.push_str(&format!("\nMacro mean: **{:.2}**\n\n", completion.macro_mean));
        }
        None => out.push_str("## Task Completion\n\n_section omitted: no completion run_\n\n"),
    }
    if report.qa.is_empty() {
        out.push_str("## QA Accuracy\n\n_section omitted: no QA run_\n");
    } else {
        out.push_str("## QA Accuracy\n\n| Dataset | Kind | Accuracy |\n|---|---|---|\n");
        for (dataset, qa) in &report.qa {
            for (kind, acc) in &qa.per_kind {
                out.push_str(&format!(
                    "| {dataset} | {kind} | {:.2} ({}/{}) |\n",
                    acc.rate(),
                    acc.correct,
                    acc.total
                ));
            }
            out.push_str(&format!(
                "| {dataset} | _ood_ | {:.2} ({}/{}) |\n",
                qa.ood.rate(),
                qa.ood.correct,
                qa.ood.total
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn choice_extraction() {
        assert_eq!(extract_choice("Answer: B"), Some("B".into()));
        assert_eq!(extract_choice("thinking... the answer is C"), Some("C".into()));
        assert_eq!(extract_choice("A then maybe B. Answer: A"), Some("A".into()));
        assert_eq!(extract_choice("no letters here"), None);
    }

    #[test]
    fn episode_seed_is_pure_and_distinct() {
        assert_eq!(episode_seed(1, 0, 0), episode_seed(1, 0, 0));
        assert_ne!(episode_seed(1, 0, 0), episode_seed(1, 0, 1));
        assert_ne!(episode_seed(1, 0, 0), episode_seed(1, 1, 0));
        assert_ne!(episode_seed(1, 0, 0), episode_seed(2, 0, 0));
    }

    #[test]
    fn markdown_omits_missing_sections_with_notice() {
        let report = EvalReport::default();
        let md = render_markdown(&report);
        assert!(md.contains("_section omitted: no completion run_"));
        assert!(md.contains("_section omitted: no QA run_"));
    }
}
