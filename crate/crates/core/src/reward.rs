//! Batch rewards and group-relative advantages for RL training loops.
//!
//! Both entry points are pure: a request maps to a response with no state
//! carried between calls.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::{Alpha, DEFAULT_ALPHA};
use crate::fixed::Fixed6;
use crate::metric::score_utterance;
use crate::text::Tokenizer;

pub const DEFAULT_MAX_BATCH: usize = 10_000;

/// Groups whose reward spread falls below this get zero advantages.
pub const DEGENERATE_STD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RequestError {
    #[error("request has no items")]
    EmptyItems,
    #[error("request has {len} items, limit is {max}")]
    TooManyItems { len: usize, max: usize },
    #[error("duplicate item id {0:?}")]
    DuplicateId(String),
    #[error("alpha must lie strictly between 0 and 1, got {0}")]
    InvalidAlpha(f64),
    #[error("group {0:?} has no rewards")]
    EmptyGroup(String),
    #[error("group {0:?} has a non-finite reward")]
    NonFiniteReward(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardItem {
    pub id: String,
    #[serde(rename = "ref")]
    pub reference: String,
    pub hyp: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRequest {
    #[serde(default)]
    pub alpha: Option<f64>,
    pub items: Vec<RewardItem>,
}

/// Scores for one item, or the reason it could not be scored.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemScore {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ras: Option<Fixed6>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub usefulness: Option<Fixed6>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost: Option<Fixed6>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RewardResponse {
    pub alpha: f64,
    /// Same order as the request items.
    pub scores: Vec<ItemScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardGroup {
    pub group_id: String,
    pub rewards: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageRequest {
    pub groups: Vec<RewardGroup>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAdvantages {
    pub group_id: String,
    pub advantages: Vec<f64>,
    /// All rewards equal; advantages are zero.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageResponse {
    pub groups: Vec<GroupAdvantages>,
}

/// Immutable settings shared by every request.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardConfig {
    pub default_alpha: Alpha,
    pub tokenizer: Tokenizer,
    pub max_batch: usize,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            default_alpha: Alpha::default(),
            tokenizer: Tokenizer::default(),
            max_batch: DEFAULT_MAX_BATCH,
        }
    }
}

/// Scores every item against its own reference.
///
/// Request-level problems reject the whole batch; a bad item only gets an
/// inline error.
pub fn score_batch(req: &RewardRequest, config: &RewardConfig) -> Result<RewardResponse, RequestError> {
    if req.items.is_empty() {
        return Err(RequestError::EmptyItems);
    }
    if req.items.len() > config.max_batch {
        return Err(RequestError::TooManyItems {
            len: req.items.len(),
            max: config.max_batch,
        });
    }
    let alpha = match req.alpha {
        Some(a) => Alpha::new(a).map_err(|_| RequestError::InvalidAlpha(a))?,
        None => config.default_alpha,
    };
    let mut seen = HashSet::with_capacity(req.items.len());
    for item in &req.items {
        if !seen.insert(item.id.as_str()) {
            return Err(RequestError::DuplicateId(item.id.clone()));
        }
    }
    let scores = req
        .items
        .par_iter()
        .map(|item| {
            let reference = config.tokenizer.tokenize(&item.reference);
            let hypothesis = config.tokenizer.tokenize(&item.hyp);
            match score_utterance(&reference, &hypothesis, alpha) {
                Ok(s) => ItemScore {
                    id: item.id.clone(),
                    ras: Some(Fixed6(s.ras)),
                    usefulness: Some(Fixed6(s.usefulness)),
                    cost: Some(Fixed6(s.cost)),
                    error: None,
                },
                Err(e) => ItemScore {
                    id: item.id.clone(),
                    ras: None,
                    usefulness: None,
                    cost: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(RewardResponse {
        alpha: alpha.get(),
        scores,
    })
}

/// Standardizes each group's rewards by its mean and population standard
/// deviation.
pub fn group_advantages(req: &AdvantageRequest) -> Result<AdvantageResponse, RequestError> {
    let groups = req
        .groups
        .iter()
        .map(|g| {
            if g.rewards.is_empty() {
                return Err(RequestError::EmptyGroup(g.group_id.clone()));
            }
            if g.rewards.iter().any(|r| !r.is_finite()) {
                return Err(RequestError::NonFiniteReward(g.group_id.clone()));
            }
            let n = g.rewards.len() as f64;
            let mean = g.rewards.iter().sum::<f64>() / n;
            let std = (g.rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
            let degenerate = std < DEGENERATE_STD;
            let advantages = if degenerate {
                vec![0.0; g.rewards.len()]
            } else {
                g.rewards.iter().map(|r| (r - mean) / std).collect()
            };
            Ok(GroupAdvantages {
                group_id: g.group_id.clone(),
                advantages,
                degenerate,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(AdvantageResponse { groups })
}

/// Body of the health endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
    pub default_alpha: f64,
}

impl Health {
    pub fn new(default_alpha: Alpha) -> Self {
        Health {
            status: "ok".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            default_alpha: default_alpha.get(),
        }
    }
}

impl Default for Health {
    fn default() -> Self {
        Health::new(Alpha::new(DEFAULT_ALPHA).expect("valid default"))
    }
}
