//! Group-relative policy optimization arithmetic over supplied rewards and
//! per-token log-probabilities. No gradients: the policy lives elsewhere.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{mean, Real};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GrpoError {
    #[error("degenerate group: {0} reward(s), need at least 2")]
    DegenerateGroup(usize),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("token trace lengths differ: policy {policy}, old {old}, ref {reference}")]
    TraceLength {
        policy: usize,
        old: usize,
        reference: usize,
    },
    #[error("empty token trace")]
    EmptyTrace,
    #[error("{traces} traces for {rewards} rewards")]
    GroupMismatch { traces: usize, rewards: usize },
    #[error("invalid GRPO config: {0}")]
    InvalidConfig(String),
}

/// Clip range and KL weight have no defaults; callers must choose them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrpoConfig<T> {
    pub group_size: usize,
    pub clip_epsilon: T,
    pub kl_beta: T,
    pub std_floor: T,
}

impl<T: Real> GrpoConfig<T> {
    pub const DEFAULT_GROUP_SIZE: usize = 5;

    pub fn new(clip_epsilon: T, kl_beta: T) -> Result<Self, GrpoError> {
        let cfg = Self {
            group_size: Self::DEFAULT_GROUP_SIZE,
            clip_epsilon,
            kl_beta,
            std_floor: T::lit(1e-8),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_group_size(mut self, group_size: usize) -> Self {
        self.group_size = group_size;
        self
    }

    pub fn validate(&self) -> Result<(), GrpoError> {
        if self.group_size < 2 {
            return Err(GrpoError::InvalidConfig(format!("group_size must be >= 2, got {}", self.group_size)));
        }
        if !(self.clip_epsilon > T::zero() && self.clip_epsilon.is_finite()) {
            return Err(GrpoError::InvalidConfig(format!("clip_epsilon must be > 0, got {}", self.clip_epsilon)));
        }
        if !(self.kl_beta >= T::zero() && self.kl_beta.is_finite()) {
            return Err(GrpoError::InvalidConfig(format!("kl_beta must be >= 0, got {}", self.kl_beta)));
        }
        if self.std_floor.is_nan() || self.std_floor < T::zero() {
            return Err(GrpoError::InvalidConfig(format!("std_floor must be >= 0, got {}", self.std_floor)));
        }
        Ok(())
    }
}

/// Per-token log-probabilities of one sampled response under the current,
/// sampling-time and reference policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenTrace<T> {
    logp_policy: Vec<T>,
    logp_old: Vec<T>,
    logp_ref: Vec<T>,
}

impl<T: Real> TokenTrace<T> {
    pub fn new(logp_policy: Vec<T>, logp_old: Vec<T>, logp_ref: Vec<T>) -> Result<Self, GrpoError> {
        if logp_policy.len() != logp_old.len() || logp_policy.len() != logp_ref.len() {
            return Err(GrpoError::TraceLength {
                policy: logp_policy.len(),
                old: logp_old.len(),
                reference: logp_ref.len(),
            });
        }
        if logp_policy.is_empty() {
            return Err(GrpoError::EmptyTrace);
        }
        for (name, v) in [("logp_policy", &logp_policy), ("logp_old", &logp_old), ("logp_ref", &logp_ref)] {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(GrpoError::NonFinite(name));
            }
        }
        Ok(Self {
            logp_policy,
            logp_old,
            logp_ref,
        })
    }

    pub fn len(&self) -> usize {
        self.logp_policy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logp_policy.is_empty()
    }

    pub fn logp_policy(&self) -> &[T] {
        &self.logp_policy
    }

    pub fn logp_old(&self) -> &[T] {
        &self.logp_old
    }

    pub fn logp_ref(&self) -> &[T] {
        &self.logp_ref
    }
}

/// `(r_i − mean) / std` with the population standard deviation. Groups whose
/// std falls below `std_floor` get all-zero advantages.
pub fn group_advantages<T: Real>(rewards: &[T], config: &GrpoConfig<T>) -> Result<Vec<T>, GrpoError> {
    standardize(rewards, config.std_floor)
}

/// The advantage computation on its own, for callers that have no clip range
/// or KL weight (scoring a group does not need them).
pub fn standardize<T: Real>(rewards: &[T], std_floor: T) -> Result<Vec<T>, GrpoError> {
    if rewards.len() < 2 {
        return Err(GrpoError::DegenerateGroup(rewards.len()));
    }
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(GrpoError::NonFinite("rewards"));
    }
    let mu = mean(rewards).expect("non-empty");
    let centered: Vec<T> = rewards.iter().map(|&r| r - mu).collect();
    let var = mean(&centered.iter().map(|&d| d * d).collect::<Vec<_>>()).expect("non-empty");
    let std = var.sqrt();
    if std < std_floor || std == T::zero() {
        return Ok(vec![T::zero(); rewards.len()]);
    }
    Ok(centered.into_iter().map(|d| d / std).collect())
}

/// Token mean of `min(ρ·A, clip(ρ, 1−ε, 1+ε)·A)` with `ρ = exp(logp_policy − logp_old)`.
pub fn clipped_surrogate<T: Real>(trace: &TokenTrace<T>, advantage: T, config: &GrpoConfig<T>) -> Result<T, GrpoError> {
    let lo = T::one() - config.clip_epsilon;
    let hi = T::one() + config.clip_epsilon;
    let mut sum = T::zero();
    for (&p, &o) in trace.logp_policy.iter().zip(&trace.logp_old) {
        let ratio = (p - o).exp();
        if !ratio.is_finite() {
            return Err(GrpoError::NonFinite("probability ratio"));
        }
        let clipped = ratio.max(lo).min(hi);
        sum = sum + (ratio * advantage).min(clipped * advantage);
    }
    finite(sum / T::from_count(trace.len()), "surrogate")
}

/// Token mean of `e^Δ − Δ − 1` with `Δ = logp_ref − logp_policy`; never negative.
pub fn kl_penalty<T: Real>(trace: &TokenTrace<T>) -> Result<T, GrpoError> {
    let mut sum = T::zero();
    for (&p, &r) in trace.logp_policy.iter().zip(&trace.logp_ref) {
        let delta = r - p;
        let term = delta.exp() - delta - T::one();
        if !term.is_finite() {
            return Err(GrpoError::NonFinite("KL estimate"));
        }
        // e^Δ − Δ − 1 is ≥ 0 analytically; rounding can leave a tiny negative.
        sum = sum + term.max(T::zero());
    }
    finite(sum / T::from_count(trace.len()), "KL estimate")
}

/// `(1/G) Σ_i [surrogate(trace_i, A_i) − β·KL(trace_i)]`, to be maximized.
pub fn grpo_objective<T: Real>(traces: &[TokenTrace<T>], rewards: &[T], config: &GrpoConfig<T>) -> Result<T, GrpoError> {
    if traces.len() != rewards.len() {
        return Err(GrpoError::GroupMismatch {
            traces: traces.len(),
            rewards: rewards.len(),
        });
    }
    let advantages = group_advantages(rewards, config)?;
    let mut sum = T::zero();
    for (trace, &adv) in traces.iter().zip(&advantages) {
        sum = sum + clipped_surrogate(trace, adv, config)? - config.kl_beta * kl_penalty(trace)?;
    }
    finite(sum / T::from_count(traces.len()), "objective")
}

fn finite<T: Real>(v: T, what: &'static str) -> Result<T, GrpoError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(GrpoError::NonFinite(what))
    }
}
