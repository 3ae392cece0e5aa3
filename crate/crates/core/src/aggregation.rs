//! Label fusion strategies and worker-record update rules.
//!
//! Everything here is a pure function of responses and [`WorkerRecord`]s.
//! Ground truth about workers never reaches this module.

use std::fmt;
use std::str::FromStr;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::types::{Label, WorkerRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StrategyKind {
    /// Plain majority vote over an odd crowd.
    Mv,
    /// Vote weighted by each worker's historical agreement with consensus.
    Weighted,
    /// Point-estimate worker skills fed into the Bayes-rule label posterior.
    Em,
    /// Beta-Bernoulli predictive skills with unit updates.
    Bay,
    /// Beta-Bernoulli predictive skills with confidence-scaled updates.
    Conf,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::Mv,
        StrategyKind::Weighted,
        StrategyKind::Em,
        StrategyKind::Bay,
        StrategyKind::Conf,
    ];

    pub const PROBABILISTIC: [StrategyKind; 3] =
        [StrategyKind::Em, StrategyKind::Bay, StrategyKind::Conf];

    pub const VOTING: [StrategyKind; 2] = [StrategyKind::Mv, StrategyKind::Weighted];

    /// Probabilistic strategies report a confidence and run the iterative
    /// query loop; voting strategies do neither.
    pub fn is_probabilistic(self) -> bool {
        matches!(self, StrategyKind::Em | StrategyKind::Bay | StrategyKind::Conf)
    }

    /// Name used in result files.
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Mv => "MV",
            StrategyKind::Weighted => "Weighted",
            StrategyKind::Em => "EM",
            StrategyKind::Bay => "BAY",
            StrategyKind::Conf => "CONF",
        }
    }

    /// Name accepted on the command line.
    pub fn cli_name(self) -> &'static str {
        match self {
            StrategyKind::Mv => "mv",
            StrategyKind::Weighted => "weighted",
            StrategyKind::Em => "em",
            StrategyKind::Bay => "bayes",
            StrategyKind::Conf => "conf",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.cli_name() == lower || k.name().to_ascii_lowercase() == lower)
            .ok_or_else(|| {
                Error::contract(format!(
                    "unknown strategy `{s}` (expected mv, weighted, em, bayes or conf)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorResult {
    pub p_label_one: f64,
    pub chosen: Label,
    pub confidence: f64,
}

/// Majority over an odd, non-empty set of responses.
pub fn majority_vote(responses: &[Label]) -> Result<Label> {
    if responses.is_empty() || responses.len().is_multiple_of(2) {
        return Err(Error::contract(format!(
            "majority vote needs an odd, non-empty response set (got {})",
            responses.len()
        )));
    }
    let ones = responses.iter().filter(|&&l| l == Label::One).count();
    Ok(if 2 * ones > responses.len() {
        Label::One
    } else {
        Label::Zero
    })
}

/// `agreements / answered`, or `default` for a worker with no history.
pub fn agreement_weight(record: &WorkerRecord, default: f64) -> f64 {
    if record.answered > 0.0 {
        record.agreements / record.answered
    } else {
        default
    }
}

/// Sign of the weighted vote sum, with an exact zero resolved to `One`.
///
/// Positive and negative mass are accumulated separately and compared, so
/// equal weights behave exactly like counting.
pub fn weighted_vote(votes: &[Label], weights: &[f64]) -> Result<Label> {
    if votes.is_empty() || votes.len() != weights.len() {
        return Err(Error::contract(format!(
            "weighted vote needs equal, non-empty vote and weight lists (got {} and {})",
            votes.len(),
            weights.len()
        )));
    }
    let (mut pos, mut neg) = (0.0_f64, 0.0_f64);
    for (&vote, &w) in votes.iter().zip(weights) {
        match vote.sign() {
            1 => pos += w,
            _ => neg += w,
        }
    }
    Ok(if pos >= neg { Label::One } else { Label::Zero })
}

/// `P(response | hypothesis)` for a worker who is right with probability
/// `lambda` whatever the true class.
pub fn worker_likelihood(response: Label, lambda: f64, hypothesis: Label) -> f64 {
    if response == hypothesis {
        lambda
    } else {
        1.0 - lambda
    }
}

/// Maximum-likelihood skill estimate `c / N`, clamped to `[eps, 1 - eps]`.
/// Workers with no history get `prior_mean`.
pub fn mle_lambda(record: &WorkerRecord, prior_mean: f64, epsilon: f64) -> f64 {
    if record.answered > 0.0 {
        (record.agreements / record.answered).clamp(epsilon, 1.0 - epsilon)
    } else {
        prior_mean
    }
}

/// Label posterior under independent workers and a uniform class prior.
///
/// Each entry is `(P(w_i | L = 1), P(w_i | L = 0))` and must lie in `(0, 1]`.
/// The products are accumulated as log sums; the result is exponentiated once.
pub fn posterior_label(per_worker: &[(f64, f64)]) -> PosteriorResult {
    let (mut log_one, mut log_zero) = (0.0_f64, 0.0_f64);
    for &(given_one, given_zero) in per_worker {
        assert!(
            given_one > 0.0 && given_one <= 1.0 && given_zero > 0.0 && given_zero <= 1.0,
            "likelihoods must lie in (0, 1], got ({given_one}, {given_zero})"
        );
        log_one += given_one.ln();
        log_zero += given_zero.ln();
    }
    let margin = log_one - log_zero;
    // Probability of the more likely class, computed so that swapping the
    // two columns yields exactly 1 - p.
    let major = 1.0 / (1.0 + (-margin.abs()).exp());
    let p_label_one = if margin >= 0.0 { major } else { 1.0 - major };
    let chosen = if margin >= 0.0 { Label::One } else { Label::Zero };
    PosteriorResult {
        p_label_one,
        chosen,
        confidence: confidence(p_label_one, chosen),
    }
}

/// Distance of the posterior from the rejected label.
pub fn confidence(p_label_one: f64, chosen: Label) -> f64 {
    (p_label_one - (1.0 - f64::from(chosen.bit()))).abs()
}

/// Beta-Bernoulli predictive probability of `response` under `hypothesis`.
///
/// Uses the log-gamma form
/// `G(a+b) G(a+c) G(1-c+b) / (G(a) G(b) G(a+b+1))` with `c = 1` when the
/// response matches the hypothesis, which reduces to `a/(a+b)` or `b/(a+b)`.
pub fn beta_predictive(alpha: f64, beta: f64, response: Label, hypothesis: Label) -> Result<f64> {
    if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
        return Err(Error::contract(format!(
            "beta predictive needs positive finite parameters (got alpha={alpha}, beta={beta})"
        )));
    }
    let c = if response == hypothesis { 1.0 } else { 0.0 };
    let log_p = ln_gamma(alpha + beta) + ln_gamma(alpha + c) + ln_gamma(1.0 - c + beta)
        - ln_gamma(alpha)
        - ln_gamma(beta)
        - ln_gamma(alpha + beta + 1.0);
    Ok(log_p.exp())
}

/// Closed form of [`beta_predictive`].
pub fn beta_predictive_ratio(alpha: f64, beta: f64, response: Label, hypothesis: Label) -> f64 {
    if response == hypothesis {
        alpha / (alpha + beta)
    } else {
        beta / (alpha + beta)
    }
}

pub fn update_counts(record: &WorkerRecord, agreed: bool) -> WorkerRecord {
    let mut next = record.clone();
    next.answered += 1.0;
    if agreed {
        next.agreements += 1.0;
    }
    next
}

pub fn update_beta(record: &WorkerRecord, agreed: bool) -> WorkerRecord {
    let mut next = record.clone();
    if agreed {
        next.alpha += 1.0;
    } else {
        next.beta += 1.0;
    }
    next
}

/// Beta update scaled by the decision confidence `omega`.
pub fn update_beta_confidence(record: &WorkerRecord, agreed: bool, omega: f64) -> WorkerRecord {
    debug_assert!((0.0..=1.0).contains(&omega));
    let mut next = record.clone();
    if agreed {
        next.alpha += omega;
    } else {
        next.beta += omega;
    }
    next
}

/// How a strategy models one worker when fusing responses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SkillBelief {
    Point(f64),
    Beta { alpha: f64, beta: f64 },
}

impl SkillBelief {
    /// Belief a probabilistic strategy holds about a crowd worker.
    pub fn for_record(
        strategy: StrategyKind,
        record: &WorkerRecord,
        prior_mean: f64,
        epsilon: f64,
    ) -> SkillBelief {
        match strategy {
            StrategyKind::Bay | StrategyKind::Conf => SkillBelief::Beta {
                alpha: record.alpha,
                beta: record.beta,
            },
            _ => SkillBelief::Point(mle_lambda(record, prior_mean, epsilon)),
        }
    }

    /// `(P(response | L = 1), P(response | L = 0))`.
    pub fn likelihoods(&self, response: Label) -> (f64, f64) {
        match *self {
            SkillBelief::Point(lambda) => (
                worker_likelihood(response, lambda, Label::One),
                worker_likelihood(response, lambda, Label::Zero),
            ),
            SkillBelief::Beta { alpha, beta } => {
                let given = |h| {
                    beta_predictive(alpha, beta, response, h)
                        .expect("records keep alpha and beta positive")
                };
                (given(Label::One), given(Label::Zero))
            }
        }
    }
}

/// Applies the strategy's record update for one worker against consensus.
pub fn apply_update(
    strategy: StrategyKind,
    record: &WorkerRecord,
    agreed: bool,
    omega: f64,
) -> WorkerRecord {
    match strategy {
        StrategyKind::Mv | StrategyKind::Weighted | StrategyKind::Em => {
            update_counts(record, agreed)
        }
        StrategyKind::Bay => update_beta(record, agreed),
        StrategyKind::Conf => update_beta_confidence(record, agreed, omega),
    }
}
