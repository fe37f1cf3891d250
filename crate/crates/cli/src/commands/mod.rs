//! One module per subcommand, plus the input loaders they share.

pub mod diagnose;
pub mod profile;
pub mod replay;
pub mod route;
pub mod theory;
pub mod workload;

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;

use beacon_core::pool::AgentPool;
use beacon_core::simenv::{read_profiles, shipped_pool, shipped_profiles, EmpiricalProfile};
use beacon_core::types::AgentId;

use crate::output::read_input;

/// JSONL rows of `T`, skipping blank and header lines. Errors name the file
/// and the 1-based line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = read_input(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(line).map_err(|e| anyhow::anyhow!("{}:{}: {e}", path.display(), i + 1))?;
        out.push(item);
    }
    Ok(out)
}

pub fn load_pool(path: Option<&Path>) -> Result<AgentPool> {
    match path {
        Some(p) => AgentPool::load(p).with_context(|| format!("loading pool {}", p.display())),
        None => Ok(shipped_pool()),
    }
}

pub fn load_profiles(path: Option<&Path>) -> Result<BTreeMap<AgentId, EmpiricalProfile>> {
    match path {
        Some(p) => {
            let text = read_input(p)?;
            read_profiles(text.as_bytes()).map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))
        }
        None => Ok(shipped_profiles()),
    }
}

/// Fixed-precision float for CSV cells, so tables diff cleanly.
pub fn fmt(x: f64) -> String {
    format!("{x:.6}")
}
