//! Stage 1 of the routing protocol: task-agent matching, the composite
//! screening score, and Top-L candidate filtering with feasibility
//! constraints.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{dot, norm2};
use crate::pool::AgentPool;
use crate::types::{AgentId, AgentProfile, AgentState, Subtask};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatchError {
    #[error("embedding dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("zero-norm embedding")]
    ZeroVector,
    #[error("stage-1 weights must be non-negative, finite and not all zero")]
    InvalidWeights,
    #[error("top-L requires L >= 1")]
    InvalidL,
    #[error("no feasible candidate")]
    EmptyCandidateSet,
    #[error("embedding provider failed: {0}")]
    Embedder(String),
}

/// Lowercased, punctuation-stripped, whitespace-split token set.
fn token_set(text: &str) -> BTreeSet<String> {
    text.to_lowercase()
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c.is_whitespace() {
                c
            } else {
                ' '
            }
        })
        .collect::<String>()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

/// Token-level Jaccard similarity. Two empty texts score 0.
pub fn lexical_similarity(a: &str, b: &str) -> f64 {
    let ta = token_set(a);
    let tb = token_set(b);
    let union = ta.union(&tb).count();
    if union == 0 {
        return 0.0;
    }
    ta.intersection(&tb).count() as f64 / union as f64
}

/// Cosine similarity rescaled from `[-1, 1]` to `[0, 1]`.
pub fn embed_similarity(a: &[f64], b: &[f64]) -> Result<f64, MatchError> {
    if a.len() != b.len() {
        return Err(MatchError::DimensionMismatch(a.len(), b.len()));
    }
    let (na, nb) = (norm2(a), norm2(b));
    if na == 0.0 || nb == 0.0 {
        return Err(MatchError::ZeroVector);
    }
    let cos = (dot(a, b) / (na * nb)).clamp(-1.0, 1.0);
    Ok((cos + 1.0) / 2.0)
}

/// Source of text embeddings for the embedding match path.
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>, MatchError>;
}

/// Deterministic feature-hashing bag-of-words embedding. Each token is hashed
/// with FNV-1a into one of `dim` buckets with a hash-derived sign.
#[derive(Debug, Clone, Copy)]
pub struct HashingEmbedder {
    dim: usize,
}

impl HashingEmbedder {
    pub const DEFAULT_DIM: usize = 64;

    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DIM)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl Embedder for HashingEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, MatchError> {
        let mut v = vec![0.0; self.dim];
        for tok in token_set(text) {
            let h = fnv1a(tok.as_bytes());
            let bucket = (h % self.dim as u64) as usize;
            let sign = if (h >> 63) & 1 == 0 { 1.0 } else { -1.0 };
            v[bucket] += sign;
        }
        Ok(v)
    }
}

/// Task-agent match score in `[0, 1]`.
///
/// With an embedder, compares the agent's capability embedding (precomputed
/// when present and dimension-compatible, otherwise embedded from its
/// capability text) against the embedded requirement-plus-input text. Without
/// one, or when the embedding path fails, falls back to lexical similarity
/// between the requirement alone and the capability text.
pub fn match_score(agent: &AgentProfile, subtask: &Subtask, embedder: Option<&dyn Embedder>) -> f64 {
    let capability = agent.matching_text();
    if let Some(e) = embedder {
        if !capability.trim().is_empty() || agent.capability_embedding.is_some() {
            match embedding_match(agent, &capability, subtask, e) {
                Ok(s) => return s,
                Err(err) => tracing::debug!(agent = %agent.id, %err, "embedding match failed, using lexical path"),
            }
        }
    }
    lexical_similarity(&subtask.requirement, &capability)
}

fn embedding_match(
    agent: &AgentProfile,
    capability: &str,
    subtask: &Subtask,
    embedder: &dyn Embedder,
) -> Result<f64, MatchError> {
    let agent_vec = match &agent.capability_embedding {
        Some(v) if v.len() == embedder.dim() => v.clone(),
        _ => embedder.embed(capability)?,
    };
    let task_vec = embedder.embed(&subtask.full_text())?;
    embed_similarity(&agent_vec, &task_vec)
}

/// Weights on match, prior success and reliability in the screening score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Stage1Weights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

impl Default for Stage1Weights {
    fn default() -> Self {
        Self {
            w1: 0.5,
            w2: 0.3,
            w3: 0.2,
        }
    }
}

impl Stage1Weights {
    pub fn new(w1: f64, w2: f64, w3: f64) -> Result<Self, MatchError> {
        let w = Self { w1, w2, w3 };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), MatchError> {
        let ws = [self.w1, self.w2, self.w3];
        if ws.iter().any(|w| !w.is_finite() || *w < 0.0) || ws.iter().sum::<f64>() <= 0.0 {
            return Err(MatchError::InvalidWeights);
        }
        Ok(())
    }
}

/// Recent reliability: reputation gated by availability.
pub fn reliability(state: &AgentState) -> f64 {
    state.reputation * state.availability()
}

/// Composite screening score from an already-computed match score.
pub fn composite_score(match_score: f64, prior_success: f64, state: &AgentState, w: &Stage1Weights) -> f64 {
    w.w1 * match_score + w.w2 * prior_success + w.w3 * reliability(state)
}

pub fn stage1_score(
    agent: &AgentProfile,
    state: &AgentState,
    subtask: &Subtask,
    w: &Stage1Weights,
    embedder: Option<&dyn Embedder>,
) -> f64 {
    composite_score(match_score(agent, subtask, embedder), agent.prior_success, state, w)
}

/// Feasibility constraints applied before ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    /// Deadline in milliseconds; agents whose expected latency exceeds it
    /// are dropped.
    pub deadline_ms: Option<f64>,
    pub require_available: bool,
    /// Converts `latency_norm` back to milliseconds when no profiled p95 is
    /// known.
    pub latency_cap_ms: f64,
    /// Profiled p95 latency per agent, preferred over the state estimate.
    #[serde(default)]
    pub p95_ms: BTreeMap<AgentId, f64>,
}

impl Default for Constraints {
    fn default() -> Self {
        Self {
            deadline_ms: None,
            require_available: true,
            latency_cap_ms: 10_000.0,
            p95_ms: BTreeMap::new(),
        }
    }
}

impl Constraints {
    pub fn expected_latency_ms(&self, id: &AgentId, state: &AgentState) -> f64 {
        self.p95_ms
            .get(id)
            .copied()
            .unwrap_or(state.latency_norm * self.latency_cap_ms)
    }

    fn feasible(&self, id: &AgentId, state: &AgentState) -> bool {
        if self.require_available && !state.available {
            return false;
        }
        match self.deadline_ms {
            Some(d) => self.expected_latency_ms(id, state) <= d,
            None => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: AgentId,
    pub stage1_score: f64,
    pub match_score: f64,
}

/// Top-L shortlist, sorted by screening score descending with ties broken by
/// ascending agent id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    entries: Vec<Candidate>,
}

impl CandidateSet {
    pub fn from_scored(mut entries: Vec<Candidate>, l: usize) -> Self {
        entries.sort_by(|a, b| b.stage1_score.total_cmp(&a.stage1_score).then_with(|| a.id.cmp(&b.id)));
        entries.truncate(l);
        Self { entries }
    }

    pub fn entries(&self) -> &[Candidate] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> Vec<AgentId> {
        self.entries.iter().map(|c| c.id.clone()).collect()
    }

    pub fn contains(&self, id: &AgentId) -> bool {
        self.entries.iter().any(|c| &c.id == id)
    }

    pub fn get(&self, id: &AgentId) -> Option<&Candidate> {
        self.entries.iter().find(|c| &c.id == id)
    }
}

/// Score every pool agent that passes the constraints and keep the best `l`.
pub fn top_l_filter(
    pool: &AgentPool,
    subtask: &Subtask,
    w: &Stage1Weights,
    l: usize,
    constraints: &Constraints,
    embedder: Option<&dyn Embedder>,
) -> Result<CandidateSet, MatchError> {
    if l == 0 {
        return Err(MatchError::InvalidL);
    }
    w.validate()?;
    let scored: Vec<Candidate> = pool
        .iter()
        .filter(|(p, s)| constraints.feasible(&p.id, s))
        .map(|(p, s)| {
            let m = match_score(p, subtask, embedder);
            Candidate {
                id: p.id.clone(),
                stage1_score: composite_score(m, p.prior_success, s, w),
                match_score: m,
            }
        })
        .collect();
    if scored.is_empty() {
        return Err(MatchError::EmptyCandidateSet);
    }
    Ok(CandidateSet::from_scored(scored, l))
}
