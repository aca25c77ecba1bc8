//! Dataset assembly: schema validation, dedup, surprise-weighted ordering
//! and stratified JSONL emission with a manifest.
//!
//! Split files are JSONL with a versioned header record; the manifest is a
//! JSON sidecar whose counts must recount exactly against the files.
//! Out-of-distribution samples are confined to the last (evaluation) split
//! and never appear in train.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotator::InstructionSample;
use crate::seeds::derive_seed;

pub const DATASET_FORMAT: &str = "instruction-dataset";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("split ratios must be positive and sum to 1: {0}")]
    RatioError(String),
    #[error("sample {id} violates the schema: {reason}")]
    SchemaViolation { id: String, reason: String },
    #[error("dataset io at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("dataset parse: {0}")]
    Json(#[from] serde_json::Error),
    #[error("dataset at {0} is empty")]
    EmptyDataset(PathBuf),
}

/// Named split ratios; the last split is the evaluation split that holds
/// all OOD samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Splits {
    pub ratios: Vec<(String, f64)>,
}

impl Splits {
    pub fn standard() -> Self {
        Self {
            ratios: vec![
                ("train".into(), 0.8),
                ("val".into(), 0.1),
                ("eval".into(), 0.1),
            ],
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.ratios.is_empty() {
            return Err(DatasetError::RatioError("no splits given".into()));
        }
        if self.ratios.iter().any(|(_, r)| *r <= 0.0) {
            return Err(DatasetError::RatioError("nonpositive ratio".into()));
        }
        let sum: f64 = self.ratios.iter().map(|(_, r)| r).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(DatasetError::RatioError(format!("ratios sum to {sum}")));
        }
        Ok(())
    }

    /// Largest-remainder apportionment of `total`; ties favor the earlier
    /// split (train first).
    pub fn sizes(&self, total: usize) -> Vec<usize> {
        let mut sizes: Vec<usize> = Vec::with_capacity(self.ratios.len());
        let mut remainders: Vec<(usize, f64)> = Vec::new();
        let mut assigned = 0usize;
        for (i, (_, ratio)) in self.ratios.iter().enumerate() {
            let exact = ratio * total as f64;
            let floor = exact.floor() as usize;
            sizes.push(floor);
            assigned += floor;
            remainders.push((i, exact - floor as f64));
        }
        // Stable sort by descending remainder keeps earlier splits first on
        // ties.
        remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
        let mut left = total - assigned;
        for (i, _) in remainders {
            if left == 0 {
                break;
            }
            sizes[i] += 1;
            left -= 1;
        }
        sizes
    }
}

/// Remove exact duplicates by normalized question+answer; first wins.
pub fn dedup(samples: Vec<InstructionSample>) -> Vec<InstructionSample> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(samples.len());
    for sample in samples {
        let key = normalize(&format!("{}\n{}", sample.question, sample.answer));
        if seen.insert(key) {
            out.push(sample);
        }
    }
    out
}

fn normalize(s: &str) -> String {
    s.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Weighted order without replacement: selection probability proportional
/// to `sample.weight()`. Deterministic in the seed.
pub fn weighted_order(samples: Vec<InstructionSample>, seed: u64) -> Vec<InstructionSample> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Exponential-keys scheme: key = u^(1/w) descending reproduces
    // sequential weighted sampling without replacement.
    let mut keyed: Vec<(f64, usize, InstructionSample)> = samples
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            let w = s.weight().max(1e-9);
            let u: f64 = rng.gen_range(0.0..1.0f64).max(f64::MIN_POSITIVE);
            (u.powf(1.0 / w), i, s)
        })
        .collect();
    keyed.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
    });
    keyed.into_iter().map(|(_, _, s)| s).collect()
}

/// Schema rules every emitted record must satisfy.
pub fn validate_sample(sample: &InstructionSample) -> Result<(), DatasetError> {
    let fail = |reason: &str| {
        Err(DatasetError::SchemaViolation {
            id: sample.id.clone(),
            reason: reason.to_string(),
        })
    };
    if sample.question.trim().is_empty() {
        return fail("empty question");
    }
    if sample.answer.trim().is_empty() {
        return fail("empty answer");
    }
    if !(1..=10).contains(&sample.surprise) {
        return fail("surprise outside 1-10");
    }
    if let Some(context) = &sample.context {
        let labels = sample.option_labels();
        if labels.is_empty() {
            return fail("context without labeled options");
        }
        let answer = sample.answer.trim();
        if answer.len() == 1 {
            let c = answer.chars().next().unwrap();
            if !labels.contains(&c) {
                return fail("answer letter not among the declared options");
            }
        } else if context.is_empty() {
            return fail("empty context");
        }
    } else if sample.kind == crate::annotator::QaKind::MultipleChoice {
        return fail("multiple choice without options");
    }
    if sample.kind == crate::annotator::QaKind::Rationale && sample.rationale.is_none() {
        return fail("rationale kind without a rationale");
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SplitHeader {
    format: String,
    version: u32,
    split: String,
    master_seed: u64,
    config_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct DatasetManifest {
    /// Count per "env|kind|scale|verified" key.
    pub counts: BTreeMap<String, usize>,
    pub split_sizes: BTreeMap<String, usize>,
    pub total: usize,
    pub ood_total: usize,
    pub master_seed: u64,
    pub config_digest: String,
}

fn count_key(sample: &InstructionSample) -> String {
    format!(
        "{}|{}|{}|{}",
        sample.env_kind.name(),
        sample.kind.name(),
        sample.temporal_scale.name(),
        sample.verified
    )
}

/// Validate, stratify, split and write JSONL files plus the manifest.
pub fn emit_dataset(
    samples: &[InstructionSample],
    splits: &Splits,
    seed: u64,
    dir: &Path,
    master_seed: u64,
    config_digest: &str,
) -> Result<DatasetManifest, DatasetError> {
    splits.validate()?;
    for sample in samples {
        validate_sample(sample)?;
    }
    std::fs::create_dir_all(dir).map_err(|e| DatasetError::Io { path: dir.into(), source: e })?;

    // Stratified shuffle: group by (env_kind, kind), shuffle each group
    // under a derived seed, then interleave groups round-robin so every
    // split sees every stratum.
    let mut strata: BTreeMap<String, Vec<&InstructionSample>> = BTreeMap::new();
    for sample in samples {
        let key = format!("{}|{}", sample.env_kind.name(), sample.kind.name());
        strata.entry(key).or_default().push(sample);
    }
    for (key, group) in strata.iter_mut() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, key));
        group.shuffle(&mut rng);
    }
    let mut stream: Vec<&InstructionSample> = Vec::with_capacity(samples.len());
    let mut groups: Vec<Vec<&InstructionSample>> = strata.into_values().collect();
    let group_count = groups.len();
    let mut cursor = 0usize;
    while stream.len() < samples.len() {
        if let Some(sample) = groups[cursor % group_count].pop() {
            stream.push(sample);
        }
        cursor += 1;
    }

    // OOD samples are pinned to the last split. When they overflow its
    // quota, the evaluation split grows to hold them all and the earlier
    // splits share the remaining samples at renormalized ratios.
    let eval_idx = splits.ratios.len() - 1;
    let mut sizes = splits.sizes(samples.len());
    let (ood, mut in_dist): (Vec<&InstructionSample>, Vec<&InstructionSample>) =
        stream.into_iter().partition(|s| s.ood);
    if ood.len() > sizes[eval_idx] {
        let remaining = samples.len() - ood.len();
        if eval_idx == 0 {
            sizes[0] = samples.len();
        } else {
            let ratio_sum: f64 = splits.ratios[..eval_idx].iter().map(|(_, r)| r).sum();
            let sub = Splits {
                ratios: splits.ratios[..eval_idx]
                    .iter()
                    .map(|(name, r)| (name.clone(), r / ratio_sum))
                    .collect(),
            };
            let sub_sizes = sub.sizes(remaining);
            sizes[..eval_idx].copy_from_slice(&sub_sizes);
            sizes[eval_idx] = ood.len();
        }
    }
    let mut buckets: Vec<Vec<&InstructionSample>> = vec![Vec::new(); splits.ratios.len()];
    buckets[eval_idx].extend(ood);
    in_dist.reverse();
    for (idx, target) in sizes.iter().enumerate() {
        while buckets[idx].len() < *target {
            match in_dist.pop() {
                Some(s) => buckets[idx].push(s),
                None => break,
            }
        }
    }
    buckets[eval_idx].extend(in_dist.into_iter().rev());

    let mut manifest = DatasetManifest {
        master_seed,
        config_digest: config_digest.to_string(),
        ..DatasetManifest::default()
    };
    for ((name, _), bucket) in splits.ratios.iter().zip(&buckets) {
        let path = dir.join(format!("{name}.jsonl"));
        let mut file =
            File::create(&path).map_err(|e| DatasetError::Io { path: path.clone(), source: e })?;
        let header = SplitHeader {
            format: DATASET_FORMAT.into(),
            version: DATASET_VERSION,
            split: name.clone(),
            master_seed,
            config_digest: config_digest.to_string(),
        };
        writeln!(file, "{}", serde_json::to_string(&header)?)
            .map_err(|e| DatasetError::Io { path: path.clone(), source: e })?;
        for sample in bucket {
            writeln!(file, "{}", serde_json::to_string(sample)?)
                .map_err(|e| DatasetError::Io { path: path.clone(), source: e })?;
            *manifest.counts.entry(count_key(sample)).or_insert(0) += 1;
            if sample.ood {
                manifest.ood_total += 1;
            }
        }
        manifest.split_sizes.insert(name.clone(), bucket.len());
        manifest.total += bucket.len();
    }

    let manifest_path = dir.join("manifest.json");
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)
        .map_err(|e| DatasetError::Io { path: manifest_path, source: e })?;
    Ok(manifest)
}

/// Read one split file back into memory.
pub fn read_split(path: &Path) -> Result<Vec<InstructionSample>, DatasetError> {
    let file = File::open(path).map_err(|e| DatasetError::Io { path: path.into(), source: e })?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| DatasetError::Io { path: path.into(), source: e })?;
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 {
            let _: SplitHeader = serde_json::from_str(&line)?;
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotator::{new_sample, QaKind, TemporalScale};
    use crate::EnvKind;

    fn sample(q: &str, a: &str) -> InstructionSample {
        new_sample(
            EnvKind::AgentWorld,
            QaKind::EpisodicMemory,
            TemporalScale::Step,
            q.into(),
            None,
            a.into(),
            vec![0],
        )
    }

    #[test]
    fn largest_remainder_sizes() {
        let splits = Splits::standard();
        assert_eq!(splits.sizes(100), vec![80, 10, 10]);
        // 7 * (0.8, 0.1, 0.1) floors to [5, 0, 0]; the two largest
        // remainders (0.7, 0.7) beat train's 0.6.
        assert_eq!(splits.sizes(7), vec![5, 1, 1]);
        let even = Splits {
            ratios: vec![("a".into(), 0.5), ("b".into(), 0.5)],
        };
        // Tie on the remainder goes to the earlier split.
        assert_eq!(even.sizes(3), vec![2, 1]);
    }

    #[test]
    fn bad_ratios_are_rejected() {
        let splits = Splits { ratios: vec![("train".into(), 0.5), ("eval".into(), 0.4)] };
        assert!(matches!(splits.validate(), Err(DatasetError::RatioError(_))));
    }

    #[test]
    fn dedup_normalizes_case_and_whitespace() {
        let samples = vec![
            sample("Where is the   altar?", "(0, 4)"),
            sample("where is the altar?", "(0, 4)"),
            sample("Where is the altar?", "(1, 4)"),
        ];
        let kept = dedup(samples);
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn schema_rejects_answer_outside_options() {
        let mut s = sample("pick", "D");
        s.kind = QaKind::MultipleChoice;
        s.context = Some("A: one B: two C: three".into());
        let err = validate_sample(&s).unwrap_err();
        assert!(matches!(err, DatasetError::SchemaViolation { .. }));
        s.answer = "B".into();
        assert!(validate_sample(&s).is_ok());
    }

    #[test]
    fn equal_weights_reduce_to_seeded_shuffle() {
        let samples: Vec<_> = (0..12).map(|i| sample(&format!("q{i}"), "a")).collect();
        let a = weighted_order(samples.clone(), 5);
        let b = weighted_order(samples.clone(), 5);
        assert_eq!(
            a.iter().map(|s| s.question.clone()).collect::<Vec<_>>(),
            b.iter().map(|s| s.question.clone()).collect::<Vec<_>>()
        );
        let c = weighted_order(samples, 6);
        assert_ne!(
            a.iter().map(|s| s.question.clone()).collect::<Vec<_>>(),
            c.iter().map(|s| s.question.clone()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn empty_input_gives_empty_order() {
        assert!(weighted_order(Vec::new(), 1).is_empty());
    }

    #[test]
    fn emission_round_trips_and_respects_sizes() {
        let dir = tempfile::tempdir().unwrap();
        let samples: Vec<_> = (0..100)
            .map(|i| sample(&format!("question number {i}"), &format!("({i}, 0)")))
            .collect();
        let manifest =
            emit_dataset(&samples, &Splits::standard(), 3, dir.path(), 7, "digest").unwrap();
        assert_eq!(manifest.total, 100);
        assert_eq!(manifest.split_sizes["train"], 80);
        assert_eq!(manifest.split_sizes["val"], 10);
        assert_eq!(manifest.split_sizes["eval"], 10);

        let train = read_split(&dir.path().join("train.jsonl")).unwrap();
        assert_eq!(train.len(), 80);
        // Round trip reproduces samples exactly.
        let all: Vec<_> = ["train", "val", "eval"]
            .iter()
            .flat_map(|s| read_split(&dir.path().join(format!("{s}.jsonl"))).unwrap())
            .collect();
        for s in &all {
            assert!(samples.contains(s));
        }
        assert_eq!(all.len(), samples.len());
    }

    #[test]
    fn ood_never_leaks_out_of_eval() {
        let dir = tempfile::tempdir().unwrap();
        let mut samples: Vec<_> = (0..40)
            .map(|i| sample(&format!("question {i}"), "x"))
            .collect();
        for s in samples.iter_mut().take(12) {
            s.ood = true;
            s.env_kind = EnvKind::Driving;
        }
        let manifest =
            emit_dataset(&samples, &Splits::standard(), 9, dir.path(), 7, "digest").unwrap();
        assert_eq!(manifest.ood_total, 12);
        // Overflow: eval grows to hold all 12 OOD; 28 in-distribution
        // samples share train/val at renormalized 8:1.
        assert_eq!(manifest.split_sizes["eval"], 12);
        assert_eq!(manifest.split_sizes["train"] + manifest.split_sizes["val"], 28);
        for split in ["train", "val"] {
            let records = read_split(&dir.path().join(format!("{split}.jsonl"))).unwrap();
            assert!(records.iter().all(|s| !s.ood), "{split} leaked OOD");
        }
        let eval = read_split(&dir.path().join("eval.jsonl")).unwrap();
        assert_eq!(eval.iter().filter(|s| s.ood).count(), 12);
    }

    #[test]
    fn deterministic_emission() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let samples: Vec<_> = (0..25).map(|i| sample(&format!("q {i}"), "a")).collect();
        emit_dataset(&samples, &Splits::standard(), 3, dir_a.path(), 7, "d").unwrap();
        emit_dataset(&samples, &Splits::standard(), 3, dir_b.path(), 7, "d").unwrap();
        for split in ["train", "val", "eval", "manifest"] {
            let name = if split == "manifest" { "manifest.json".into() } else { format!("{split}.jsonl") };
            let a = std::fs::read_to_string(dir_a.path().join(&name)).unwrap();
            let b = std::fs::read_to_string(dir_b.path().join(&name)).unwrap();
            assert_eq!(a, b, "{name} differs");
        }
    }
}
