//! Validated agent pools and their key-value config format.
//!
//! A pool file is TOML with one `[[agent]]` section per agent:
//!
//! ```toml
//! [[agent]]
//! id = "A"
//! capability_text = "step by step arithmetic"
//! tags = ["math"]
//! embedding_file = "a.vec"   # optional, whitespace/comma separated floats
//! prior_success = 0.5
//! load = 0.0
//! latency_norm = 0.2
//! reputation = 0.9
//! available = true
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{laplace_prior, AgentId, AgentProfile, AgentState};

#[derive(Debug, Error, PartialEq)]
pub enum PoolError {
    #[error("agent pool is empty")]
    Empty,
    #[error("{profiles} profiles but {states} states")]
    LengthMismatch { profiles: usize, states: usize },
    #[error("duplicate agent id {0:?}")]
    DuplicateId(String),
    #[error("empty agent id at position {0}")]
    EmptyId(usize),
    #[error("agent {id}: embedding has dimension {got}, pool uses {expected}")]
    EmbeddingDimension { id: String, expected: usize, got: usize },
    #[error("agent {id}: {reason}")]
    StateOutOfRange { id: String, reason: &'static str },
    #[error("agent {id}: prior_success {value} outside [0, 1]")]
    PriorOutOfRange { id: String, value: f64 },
    #[error("unknown agent {0}")]
    UnknownAgent(String),
    #[error("pool config: {0}")]
    Config(String),
}

/// Per-agent outcome counters feeding the Laplace-smoothed prior.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub successes: u64,
    pub trials: u64,
}

/// Profiles plus runtime states, validated together. Agents are kept sorted
/// by id so iteration order is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentPool {
    agents: Vec<(AgentProfile, AgentState)>,
    counts: Vec<OutcomeCounts>,
    embedding_dim: Option<usize>,
}

impl AgentPool {
    /// Validate aligned profile and state lists into a pool.
    pub fn validate(profiles: Vec<AgentProfile>, states: Vec<AgentState>) -> Result<Self, PoolError> {
        if profiles.is_empty() {
            return Err(PoolError::Empty);
        }
        if profiles.len() != states.len() {
            return Err(PoolError::LengthMismatch {
                profiles: profiles.len(),
                states: states.len(),
            });
        }
        let mut seen = BTreeSet::new();
        let mut embedding_dim = None;
        for (i, (p, s)) in profiles.iter().zip(&states).enumerate() {
            if p.id.as_str().is_empty() {
                return Err(PoolError::EmptyId(i));
            }
            if !seen.insert(p.id.clone()) {
                return Err(PoolError::DuplicateId(p.id.to_string()));
            }
            if let Some(e) = &p.capability_embedding {
                match embedding_dim {
                    None => embedding_dim = Some(e.len()),
                    Some(d) if d != e.len() => {
                        return Err(PoolError::EmbeddingDimension {
                            id: p.id.to_string(),
                            expected: d,
                            got: e.len(),
                        })
                    }
                    _ => {}
                }
            }
            if !(0.0..=1.0).contains(&p.prior_success) {
                return Err(PoolError::PriorOutOfRange {
                    id: p.id.to_string(),
                    value: p.prior_success,
                });
            }
            s.check().map_err(|reason| PoolError::StateOutOfRange {
                id: p.id.to_string(),
                reason,
            })?;
        }
        let mut agents: Vec<_> = profiles.into_iter().zip(states).collect();
        agents.sort_by(|a, b| a.0.id.cmp(&b.0.id));
        let counts = vec![OutcomeCounts::default(); agents.len()];
        Ok(Self {
            agents,
            counts,
            embedding_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn embedding_dim(&self) -> Option<usize> {
        self.embedding_dim
    }

    pub fn iter(&self) -> impl Iterator<Item = (&AgentProfile, &AgentState)> {
        self.agents.iter().map(|(p, s)| (p, s))
    }

    pub fn ids(&self) -> Vec<AgentId> {
        self.agents.iter().map(|(p, _)| p.id.clone()).collect()
    }

    /// The available subset `{j : u_j = 1}`.
    pub fn available(&self) -> impl Iterator<Item = (&AgentProfile, &AgentState)> {
        self.iter().filter(|(_, s)| s.available)
    }

    pub fn available_count(&self) -> usize {
        self.available().count()
    }

    pub fn contains(&self, id: &AgentId) -> bool {
        self.index_of(id).is_some()
    }

    fn index_of(&self, id: &AgentId) -> Option<usize> {
        self.agents.binary_search_by(|(p, _)| p.id.cmp(id)).ok()
    }

    pub fn get(&self, id: &AgentId) -> Option<(&AgentProfile, &AgentState)> {
        self.index_of(id).map(|i| (&self.agents[i].0, &self.agents[i].1))
    }

    pub fn state(&self, id: &AgentId) -> Option<&AgentState> {
        self.get(id).map(|(_, s)| s)
    }

    pub fn set_state(&mut self, id: &AgentId, state: AgentState) -> Result<(), PoolError> {
        state.check().map_err(|reason| PoolError::StateOutOfRange {
            id: id.to_string(),
            reason,
        })?;
        let i = self
            .index_of(id)
            .ok_or_else(|| PoolError::UnknownAgent(id.to_string()))?;
        self.agents[i].1 = state;
        Ok(())
    }

    pub fn set_available(&mut self, id: &AgentId, available: bool) -> Result<(), PoolError> {
        let i = self
            .index_of(id)
            .ok_or_else(|| PoolError::UnknownAgent(id.to_string()))?;
        self.agents[i].1.available = available;
        Ok(())
    }

    pub fn counts(&self, id: &AgentId) -> Option<OutcomeCounts> {
        self.index_of(id).map(|i| self.counts[i])
    }

    /// Fold one executed call into the agent's runtime signals: the success
    /// counters (and with them the Laplace prior), an exponential moving
    /// average of normalized latency, and reputation as the smoothed success
    /// rate.
    pub fn record_outcome(
        &mut self,
        id: &AgentId,
        success: bool,
        latency_norm: f64,
        latency_ema: f64,
    ) -> Result<(), PoolError> {
        let i = self
            .index_of(id)
            .ok_or_else(|| PoolError::UnknownAgent(id.to_string()))?;
        let c = &mut self.counts[i];
        c.trials += 1;
        if success {
            c.successes += 1;
        }
        let prior = laplace_prior(c.successes, c.trials);
        let (profile, state) = &mut self.agents[i];
        profile.prior_success = prior;
        state.reputation = prior;
        let l = latency_norm.clamp(0.0, 1.0);
        state.latency_norm = (1.0 - latency_ema) * state.latency_norm + latency_ema * l;
        Ok(())
    }

    /// Load a pool from the TOML key-value format. Relative embedding paths
    /// resolve against the config file's directory.
    pub fn load(path: &Path) -> Result<Self, PoolError> {
        let text = std::fs::read_to_string(path).map_err(|e| PoolError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, PoolError> {
        let file: PoolFile = toml::from_str(text).map_err(|e| PoolError::Config(e.to_string()))?;
        let mut profiles = Vec::with_capacity(file.agent.len());
        let mut states = Vec::with_capacity(file.agent.len());
        for a in file.agent {
            let embedding = match (&a.embedding, &a.embedding_file) {
                (Some(v), _) => Some(v.clone()),
                (None, Some(f)) => Some(read_embedding(&base_dir.join(f))?),
                (None, None) => None,
            };
            profiles.push(AgentProfile {
                id: AgentId::new(a.id),
                capability_text: a.capability_text,
                capability_tags: a.tags,
                capability_embedding: embedding,
                prior_success: a.prior_success,
            });
            states.push(AgentState {
                load: a.load,
                latency_norm: a.latency_norm,
                reputation: a.reputation,
                available: a.available,
            });
        }
        Self::validate(profiles, states)
    }

    /// Serialize back to the TOML config format (embeddings inline).
    pub fn to_toml(&self) -> String {
        let file = PoolFile {
            agent: self
                .agents
                .iter()
                .map(|(p, s)| AgentSection {
                    id: p.id.to_string(),
                    capability_text: p.capability_text.clone(),
                    tags: p.capability_tags.clone(),
                    embedding: p.capability_embedding.clone(),
                    embedding_file: None,
                    prior_success: p.prior_success,
                    load: s.load,
                    latency_norm: s.latency_norm,
                    reputation: s.reputation,
                    available: s.available,
                })
                .collect(),
        };
        toml::to_string(&file).expect("pool sections always serialize")
    }

    /// Per-agent snapshot of states keyed by id.
    pub fn states(&self) -> BTreeMap<AgentId, AgentState> {
        self.agents.iter().map(|(p, s)| (p.id.clone(), *s)).collect()
    }
}

fn read_embedding(path: &Path) -> Result<Vec<f64>, PoolError> {
    let text = std::fs::read_to_string(path).map_err(|e| PoolError::Config(format!("{}: {e}", path.display())))?;
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| PoolError::Config(format!("{}: bad float {t:?}: {e}", path.display())))
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct PoolFile {
    #[serde(default)]
    agent: Vec<AgentSection>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AgentSection {
    id: String,
    #[serde(default)]
    capability_text: String,
    #[serde(default)]
    tags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    embedding: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    embedding_file: Option<String>,
    #[serde(default = "default_prior")]
    prior_success: f64,
    #[serde(default)]
    load: f64,
    #[serde(default)]
    latency_norm: f64,
    #[serde(default = "default_reputation")]
    reputation: f64,
    #[serde(default = "default_available")]
    available: bool,
}

fn default_prior() -> f64 {
    0.5
}
fn default_reputation() -> f64 {
    1.0
}
fn default_available() -> bool {
    true
}
