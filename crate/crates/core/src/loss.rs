//! Closed-form preference-alignment loss over length-normalized
//! log-likelihood scores, with analytic gradients and a finite-difference
//! checker.
//!
//! All terms are functions of the score gap Δ = s_w − s_l between the
//! accepted and rejected responses:
//!
//! - preference term: softplus(−Δ/τ) = −log σ(Δ/τ)
//! - semantic term:   softplus(−Δ)   = −log of the accepted candidate's
//!   probability under the two-candidate softmax of (s_w, s_l)
//! - divergence term: KL between the two-candidate distribution induced by
//!   (s_w, s_l) and the one induced by the optional reference scores; zero
//!   when no reference is supplied
//!
//! total = l_pref + γ·l_sl + β·l_kl, assembled from the three terms by that
//! exact identity. Every logistic expression is computed through the stable
//! softplus form softplus(x) = max(x, 0) + ln(1 + e^{−|x|}), so nothing
//! exponentiates a large magnitude.
//!
//! The divergence form is one reading of an underdetermined design space
//! (token-level KL against a reference policy is the other); it is chosen
//! because it lives in the same two-candidate probability space as the
//! semantic term and needs no extra inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Length-normalized log-likelihood scores for one preference pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreferenceScores {
    pub s_w: f64,
    pub s_l: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_w_ref: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_l_ref: Option<f64>,
}

impl PreferenceScores {
    pub fn new(s_w: f64, s_l: f64) -> Self {
        PreferenceScores { s_w, s_l, s_w_ref: None, s_l_ref: None }
    }

    pub fn with_reference(s_w: f64, s_l: f64, s_w_ref: f64, s_l_ref: f64) -> Self {
        PreferenceScores { s_w, s_l, s_w_ref: Some(s_w_ref), s_l_ref: Some(s_l_ref) }
    }

    /// Builds scores from raw per-token log-probabilities by length
    /// normalization (mean over tokens). Reference sequences must be both
    /// present or both absent.
    pub fn from_token_logps(
        logp_w: &[f64],
        logp_l: &[f64],
        logp_w_ref: Option<&[f64]>,
        logp_l_ref: Option<&[f64]>,
    ) -> Result<Self> {
        let mean = |name: &str, logps: &[f64]| -> Result<f64> {
            if logps.is_empty() {
                return Err(Error::InvalidInput(format!("{name} is empty")));
            }
            Ok(logps.iter().sum::<f64>() / logps.len() as f64)
        };
        let (s_w_ref, s_l_ref) = match (logp_w_ref, logp_l_ref) {
            (Some(w), Some(l)) => (Some(mean("logp_w_ref", w)?), Some(mean("logp_l_ref", l)?)),
            (None, None) => (None, None),
            _ => {
                return Err(Error::InvalidInput(
                    "reference token log-probabilities need both logp_w_ref and logp_l_ref".into(),
                ));
            }
        };
        Ok(PreferenceScores { s_w: mean("logp_w", logp_w)?, s_l: mean("logp_l", logp_l)?, s_w_ref, s_l_ref })
    }

    fn validate(&self) -> Result<()> {
        let finite = [Some(self.s_w), Some(self.s_l), self.s_w_ref, self.s_l_ref]
            .into_iter()
            .flatten()
            .all(f64::is_finite);
        if !finite {
            return Err(Error::InvalidInput("scores must be finite".into()));
        }
        if self.s_w_ref.is_some() != self.s_l_ref.is_some() {
            return Err(Error::InvalidInput(
                "reference scores need both s_w_ref and s_l_ref".into(),
            ));
        }
        Ok(())
    }

    fn gap(&self) -> f64 {
        self.s_w - self.s_l
    }

    fn reference_gap(&self) -> Option<f64> {
        Some(self.s_w_ref? - self.s_l_ref?)
    }
}

/// One line of a scores stream: either precomputed sequence scores or raw
/// per-token log-probabilities, which are length-normalized by their mean.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ScoreInput {
    Scalars {
        s_w: f64,
        s_l: f64,
        #[serde(default)]
        s_w_ref: Option<f64>,
        #[serde(default)]
        s_l_ref: Option<f64>,
    },
    TokenLogps {
        logp_w: Vec<f64>,
        logp_l: Vec<f64>,
        #[serde(default)]
        logp_w_ref: Option<Vec<f64>>,
        #[serde(default)]
        logp_l_ref: Option<Vec<f64>>,
    },
}

impl ScoreInput {
    pub fn into_scores(self) -> Result<PreferenceScores> {
        match self {
            ScoreInput::Scalars { s_w, s_l, s_w_ref, s_l_ref } => {
                Ok(PreferenceScores { s_w, s_l, s_w_ref, s_l_ref })
            }
            ScoreInput::TokenLogps { logp_w, logp_l, logp_w_ref, logp_l_ref } => {
                PreferenceScores::from_token_logps(
                    &logp_w,
                    &logp_l,
                    logp_w_ref.as_deref(),
                    logp_l_ref.as_deref(),
                )
            }
        }
    }
}

/// Reads a JSONL scores stream (blank lines skipped), accepting both
/// [`ScoreInput`] shapes per line.
pub fn read_score_lines<R: std::io::BufRead>(reader: R) -> Result<Vec<PreferenceScores>> {
    let mut scores = Vec::new();
    for (number, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let input: ScoreInput = serde_json::from_str(&line).map_err(|e| {
            Error::InvalidInput(format!("score line {}: {e}", number + 1))
        })?;
        scores.push(input.into_scores().map_err(|e| {
            Error::InvalidInput(format!("score line {}: {e}", number + 1))
        })?);
    }
    Ok(scores)
}

/// Loss hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossParams {
    /// Preference-term temperature; must be positive.
    pub tau: f64,
    /// Weight of the semantic term.
    pub gamma: f64,
    /// Weight of the divergence term.
    pub beta: f64,
}

impl Default for LossParams {
    fn default() -> Self {
        LossParams { tau: 0.1, gamma: 1.0, beta: 0.1 }
    }
}

impl LossParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::Config(format!("tau must be a positive real, got {}", self.tau)));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::Config(format!("gamma must be non-negative, got {}", self.gamma)));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::Config(format!("beta must be non-negative, got {}", self.beta)));
        }
        Ok(())
    }
}

/// All loss terms and the analytic gradients of the total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_pref: f64,
    pub l_sl: f64,
    pub l_kl: f64,
    pub total: f64,
    pub grad_s_w: f64,
    pub grad_s_l: f64,
}

/// Numerically stable softplus: log(1 + eˣ) without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Numerically stable logistic sigmoid.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// −log σ((s_w − s_l)/tau). Precondition (validated by [`hcal`]): tau > 0.
pub fn preference_loss(scores: &PreferenceScores, tau: f64) -> f64 {
    softplus(-scores.gap() / tau)
}

/// −log q(accepted) where q is the two-candidate softmax of (s_w, s_l).
pub fn semantic_loss(scores: &PreferenceScores) -> f64 {
    softplus(-scores.gap())
}

/// KL divergence from the reference two-candidate distribution to the
/// scored one; 0 when no reference scores are present.
///
/// Computed as qw·(log qw − log qrw) + (1−qw)·(log(1−qw) − log(1−qrw)) with
/// every log-probability expressed through softplus, so extreme score gaps
/// stay finite.
pub fn kl_term(scores: &PreferenceScores) -> Result<f64> {
    let Some(reference_gap) = scores.reference_gap() else {
        return Ok(0.0);
    };
    let q_ref = sigmoid(reference_gap);
    if q_ref == 0.0 || q_ref == 1.0 {
        return Err(Error::DegenerateReference { q_ref });
    }
    let gap = scores.gap();
    let qw = sigmoid(gap);
    let accepted_side = softplus(-reference_gap) - softplus(-gap);
    let rejected_side = softplus(reference_gap) - softplus(gap);
    // Each side is (log of scored prob − log of reference prob) times the
    // scored prob; non-negative in total by Gibbs' inequality.
    Ok((qw * accepted_side + (1.0 - qw) * rejected_side).max(0.0))
}

/// Computes every term, the total, and the analytic gradients.
pub fn hcal(scores: &PreferenceScores, params: &LossParams) -> Result<LossBreakdown> {
    params.validate()?;
    scores.validate()?;

    let l_pref = preference_loss(scores, params.tau);
    let l_sl = semantic_loss(scores);
    let l_kl = kl_term(scores)?;
    let total = l_pref + params.gamma * l_sl + params.beta * l_kl;

    let gap = scores.gap();
    // d/ds_w softplus(−Δ/τ) = −σ(−Δ/τ)/τ; d/ds_w softplus(−Δ) = −σ(−Δ);
    // d/ds_w KL = qw(1−qw)(Δ − Δ_ref). Every term depends on the scores
    // only through Δ, so the s_l gradient is the exact negation.
    let mut grad_s_w = -sigmoid(-gap / params.tau) / params.tau - params.gamma * sigmoid(-gap);
    if let Some(reference_gap) = scores.reference_gap() {
        let qw = sigmoid(gap);
        grad_s_w += params.beta * qw * (1.0 - qw) * (gap - reference_gap);
    }
    let grad_s_l = -grad_s_w;

    Ok(LossBreakdown { l_pref, l_sl, l_kl, total, grad_s_w, grad_s_l })
}

/// Central-difference check of the analytic gradients; returns the maximum
/// relative error over ∂/∂s_w and ∂/∂s_l. `epsilon` must lie in (0, 1e-3].
pub fn grad_check(scores: &PreferenceScores, params: &LossParams, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1e-3) {
        return Err(Error::InvalidInput(format!(
            "epsilon must lie in (0, 1e-3], got {epsilon}"
        )));
    }
    let analytic = hcal(scores, params)?;
    let total_at = |s_w: f64, s_l: f64| -> Result<f64> {
        Ok(hcal(&PreferenceScores { s_w, s_l, ..*scores }, params)?.total)
    };
    let numeric_w = (total_at(scores.s_w + epsilon, scores.s_l)?
        - total_at(scores.s_w - epsilon, scores.s_l)?)
        / (2.0 * epsilon);
    let numeric_l = (total_at(scores.s_w, scores.s_l + epsilon)?
        - total_at(scores.s_w, scores.s_l - epsilon)?)
        / (2.0 * epsilon);

    let relative = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(epsilon);
    Ok(relative(analytic.grad_s_w, numeric_w).max(relative(analytic.grad_s_l, numeric_l)))
}
