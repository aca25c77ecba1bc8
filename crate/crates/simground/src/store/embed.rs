//! Deterministic text embedding by signed feature hashing, and the
//! kinematic feature vector for driving scenes.

use thiserror::Error;

use urban_driving::TrafficScene;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("text has no hashable tokens: {0:?}")]
    NoTokens(String),
    #[error("embedding backend unavailable: {0}")]
    BackendUnavailable(String),
}

pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    /// L2-normalized vector; same text gives the same vector on every
    /// platform.
    fn embed(&self, text: &str) -> Result<Vec<f32>, EmbedError>;
}

/// FNV-1a 64-bit; fixed constants keep the embedding platform-stable.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Signed hashing of lowercase alphanumeric tokens into `dim` buckets.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dim: usize,
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0);
        Self { dim }
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self::new(256)
    }
}

impl Embedder for HashingEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>, EmbedError> {
        if text.is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let lower = text.to_lowercase();
        let mut acc = vec![0.0f32; self.dim];
        let mut any = false;
        for token in lower.split(|c: char| !c.is_ascii_alphanumeric()) {
            if token.is_empty() {
                continue;
            }
            any = true;
            let h = fnv1a(token.as_bytes());
            let bucket = ((h >> 1) as usize) % self.dim;
            let sign = if h & 1 == 0 { 1.0 } else { -1.0 };
            acc[bucket] += sign;
        }
        if !any {
            return Err(EmbedError::NoTokens(text.chars().take(40).collect()));
        }
        normalize(&mut acc);
        Ok(acc)
    }
}

pub fn normalize(v: &mut [f32]) {
    let norm: f32 = v.iter().map(|x| x * x).sum::<f32>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

/// Cosine similarity of two normalized vectors (plain dot product).
pub fn cosine(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fixed-dimension kinematic summary of a driving scene, used as the
/// in-distribution proxy for driving samples. L2-normalized.
pub fn kinematic_features(scene: &TrafficScene) -> Vec<f32> {
    const DIM: usize = 32;
    let mut f = vec![0.0f32; DIM];
    let ego = scene.ego();
    if let Some(ego) = ego {
        f[0] = ego.v as f32;
        f[1] = ego.target_speed as f32;
        f[2] = ego.lane_id as f32;
        f[3] = (ego.s / 100.0) as f32;
    }
    f[4] = scene.vehicles.len() as f32;
    f[5] = scene.pedestrians.len() as f32;
    f[6] = scene.obstacles.len() as f32;
    f[7] = scene.road.lanes.len() as f32;
    f[8] = scene.road.intersections.len() as f32;
    f[9] = scene.events.len() as f32;
    let speeds: Vec<f64> = scene.vehicles.values().map(|v| v.v).collect();
    if !speeds.is_empty() {
        f[10] = (speeds.iter().sum::<f64>() / speeds.len() as f64) as f32;
        f[11] = speeds.iter().cloned().fold(f64::MIN, f64::max) as f32;
    }
    // Nearest-neighbor gaps around the ego, one slot per surrounding car.
    if let Some(ego) = ego {
        let mut rels: Vec<(f64, f64)> = scene
            .vehicles
            .values()
            .filter(|v| !v.is_ego())
            .map(|v| (v.s - ego.s, v.v - ego.v))
            .collect();
        rels.sort_by(|a, b| a.0.abs().partial_cmp(&b.0.abs()).unwrap_or(std::cmp::Ordering::Equal));
        for (i, (ds, dv)) in rels.into_iter().take(8).enumerate() {
            f[12 + 2 * i] = (ds / 10.0) as f32;
            f[13 + 2 * i] = dv as f32;
        }
    }
    normalize(&mut f);
    f
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_is_deterministic_and_normalized() {
        let e = HashingEmbedder::default();
        let a = e.embed("yellow key door").unwrap();
        let b = e.embed("yellow key door").unwrap();
        assert_eq!(a, b);
        let norm: f32 = a.iter().map(|x| x * x).sum::<f32>().sqrt();
        assert!((norm - 1.0).abs() < 1e-6);
    }

    #[test]
    fn related_text_is_closer_than_unrelated() {
        let e = HashingEmbedder::default();
        let door = e.embed("yellow key door").unwrap();
        let gate = e.embed("yellow key gate").unwrap();
        let brake = e.embed("brake hard now").unwrap();
        assert!(cosine(&door, &gate) > cosine(&door, &brake));
    }

    #[test]
    fn empty_and_tokenless_text_error() {
        let e = HashingEmbedder::default();
        assert!(matches!(e.embed(""), Err(EmbedError::EmptyText)));
        assert!(matches!(e.embed("!!! ???"), Err(EmbedError::NoTokens(_))));
    }

    #[test]
    fn identical_text_cosine_is_one() {
        let e = HashingEmbedder::default();
        let a = e.embed("get the hammer first").unwrap();
        assert!((cosine(&a, &a) - 1.0).abs() < 1e-6);
    }
}
