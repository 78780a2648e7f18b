//! Closed-form false-positive / false-negative bounds for selection
//! frequencies of subsampled selection ensembles, and the minimal-threshold
//! solver built on them.
//!
//! Each bound is a minimum of a Chernoff-style term over an integer candidate
//! `l0`; the minimization is carried out by literal enumeration of the
//! candidate interval so that results can be checked against an independent
//! enumeration term by term.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("reference probability must lie strictly in (0,1), got {0}")]
    ReferenceProbability(f64),
    #[error("probability must lie in [0,1], got {0}")]
    Probability(f64),
    #[error("expected {expected}, got theta={theta}, tau={tau}")]
    Ordering { expected: &'static str, theta: f64, tau: f64 },
    #[error("no admissible l0 candidate in {{{lo}..{hi}}}")]
    EmptyCandidateRange { lo: i64, hi: i64 },
    #[error("subsample count must be at least 2, got {0}")]
    SubsampleCount(usize),
    #[error("target expected false positives must be positive, got {0}")]
    Target(f64),
    #[error("expected base selection size must satisfy 0 < q < D, got q={q}, d={d}")]
    BaseSelectionSize { q: f64, d: usize },
    #[error("threshold product tau*L = {0} is not an integer")]
    NonIntegerTauL(f64),
}

/// Inputs shared by the four frequency-threshold bounds: ensemble subsample
/// count, selection-frequency threshold, and the base selection-probability
/// cutoff separating "noise" from "signal" covariates.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BoundQuery {
    pub subsamples: usize,
    pub tau: f64,
    pub theta: f64,
}

/// A minimized bound value together with the attaining candidate. Values
/// above 1 are reported as-is and flagged vacuous rather than clamped.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Bound {
    pub value: f64,
    pub l0: i64,
    pub vacuous: bool,
}

/// Kullback-Leibler divergence between Bernoulli(p) and Bernoulli(q),
/// with the convention 0*log(0) = 0. Requires q strictly inside (0,1).
pub fn kl_bernoulli(p: f64, q: f64) -> Result<f64, BoundsError> {
    if !(q > 0.0 && q < 1.0) {
        return Err(BoundsError::ReferenceProbability(q));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(BoundsError::Probability(p));
    }
    let a = if p > 0.0 { p * (p / q).ln() } else { 0.0 };
    let b = if p < 1.0 { (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln() } else { 0.0 };
    Ok(a + b)
}

fn check_query(q: &BoundQuery) -> Result<(), BoundsError> {
    if q.subsamples < 2 {
        return Err(BoundsError::SubsampleCount(q.subsamples));
    }
    if !(q.theta > 0.0 && q.theta < 1.0) {
        return Err(BoundsError::ReferenceProbability(q.theta));
    }
    if !(q.tau > 0.0 && q.tau < 1.0) {
        return Err(BoundsError::Probability(q.tau));
    }
    Ok(())
}

/// Minimize `term(l0)` over the integer interval `{lo..hi}`; candidates for
/// which `term` returns `None` (non-positive denominator) are skipped.
fn minimize_l0(
    lo: i64,
    hi: i64,
    term: impl Fn(i64) -> Option<f64>,
) -> Result<Bound, BoundsError> {
    let mut best: Option<(f64, i64)> = None;
    for l0 in lo..=hi {
        if let Some(v) = term(l0) {
            match best {
                Some((bv, _)) if bv <= v => {}
                _ => best = Some((v, l0)),
            }
        }
    }
    match best {
        Some((value, l0)) => Ok(Bound { value, l0, vacuous: value >= 1.0 }),
        None => Err(BoundsError::EmptyCandidateRange { lo, hi }),
    }
}

fn fp_term(l: f64, tau: f64, theta: f64, l0: i64) -> Option<f64> {
    let l0f = l0 as f64;
    let denom = tau * l - l0f + 1.0;
    if denom <= 0.0 {
        return None;
    }
    let kl = kl_bernoulli(l0f / l, theta).expect("candidate in [0,1], theta in (0,1)");
    Some(((l - l0f + 1.0) / denom) * (-(l * kl)).exp())
}

fn fn_term(l: f64, tau: f64, theta: f64, l0: i64) -> Option<f64> {
    let l0f = l0 as f64;
    let denom = l0f - tau * l + 1.0;
    if denom <= 0.0 {
        return None;
    }
    let kl = kl_bernoulli(l0f / l, theta).expect("candidate in [0,1], theta in (0,1)");
    Some(((l0f + 1.0) / denom) * (-(l * kl)).exp())
}

/// Bound on the false-positive rate of the thresholded ensemble: the expected
/// fraction of cutoff-theta noise covariates whose selection frequency
/// reaches tau. Requires theta < tau.
pub fn fp_rate_bound(q: &BoundQuery) -> Result<Bound, BoundsError> {
    check_query(q)?;
    if q.theta >= q.tau {
        return Err(BoundsError::Ordering { expected: "theta < tau", theta: q.theta, tau: q.tau });
    }
    let l = q.subsamples as f64;
    let lo = (l * q.theta).ceil() as i64;
    let hi = (l * q.tau).ceil() as i64;
    minimize_l0(lo, hi, |l0| fp_term(l, q.tau, q.theta, l0))
}

/// Bound on expected ensemble false positives relative to the expected false
/// positives of a single base call. Requires theta < tau.
pub fn fp_vs_base_bound(q: &BoundQuery) -> Result<Bound, BoundsError> {
    check_query(q)?;
    if q.theta >= q.tau {
        return Err(BoundsError::Ordering { expected: "theta < tau", theta: q.theta, tau: q.tau });
    }
    let l = q.subsamples as f64;
    let lo = (l * q.theta).ceil() as i64 + 1;
    let hi = (l * q.tau).ceil() as i64;
    minimize_l0(lo, hi, |l0| fp_term(l, q.tau, q.theta, l0).map(|v| v / q.theta))
}

/// Bound on the false-negative rate: the expected fraction of above-cutoff
/// covariates whose selection frequency stays below tau. Requires tau < theta.
pub fn fn_rate_bound(q: &BoundQuery) -> Result<Bound, BoundsError> {
    check_query(q)?;
    if q.tau >= q.theta {
        return Err(BoundsError::Ordering { expected: "tau < theta", theta: q.theta, tau: q.tau });
    }
    let l = q.subsamples as f64;
    let lo = (l * q.tau).floor() as i64;
    let hi = (l * q.theta).floor() as i64;
    minimize_l0(lo, hi, |l0| fn_term(l, q.tau, q.theta, l0))
}

/// Bound on expected ensemble false negatives relative to the expected false
/// negatives of a single base call. Requires tau < theta.
pub fn fn_vs_base_bound(q: &BoundQuery) -> Result<Bound, BoundsError> {
    check_query(q)?;
    if q.tau >= q.theta {
        return Err(BoundsError::Ordering { expected: "tau < theta", theta: q.theta, tau: q.tau });
    }
    let l = q.subsamples as f64;
    let lo = (l * q.tau).floor() as i64;
    let hi = (l * q.theta).floor() as i64 - 1;
    minimize_l0(lo, hi, |l0| fn_term(l, q.tau, q.theta, l0).map(|v| v / (1.0 - q.theta)))
}

/// Per-noise-covariate false-positive rate under the exchangeable-noise
/// assumption, with cutoff q_base/D. Requires tau > q_base/D.
pub fn exchangeable_fp_rate(
    subsamples: usize,
    tau: f64,
    q_base: f64,
    d: usize,
) -> Result<Bound, BoundsError> {
    if !(q_base > 0.0 && q_base < d as f64) {
        return Err(BoundsError::BaseSelectionSize { q: q_base, d });
    }
    let theta = q_base / d as f64;
    let query = BoundQuery { subsamples, tau, theta };
    check_query(&query)?;
    if theta >= tau {
        return Err(BoundsError::Ordering { expected: "tau > q_base/D", theta, tau });
    }
    let l = subsamples as f64;
    let lo = (l * theta).ceil() as i64;
    let hi = (tau * l).ceil() as i64;
    minimize_l0(lo, hi, |l0| fp_term(l, tau, theta, l0))
}

/// Bound on the expected number of false positives among `n_noise`
/// exchangeable noise covariates.
pub fn expected_false_positives(
    subsamples: usize,
    tau: f64,
    q_base: f64,
    d: usize,
    n_noise: usize,
) -> Result<Bound, BoundsError> {
    let rate = exchangeable_fp_rate(subsamples, tau, q_base, d)?;
    Ok(Bound { value: rate.value * n_noise as f64, l0: rate.l0, vacuous: rate.vacuous })
}

/// The readable special case with the candidate pinned at l0 = tau*L, valid
/// when tau*L is an integer: rate = (L(1-tau)+1) * exp(-L*KL(tau, q_base/D)).
pub fn pinned_candidate_rate(
    subsamples: usize,
    tau: f64,
    q_base: f64,
    d: usize,
) -> Result<f64, BoundsError> {
    if !(q_base > 0.0 && q_base < d as f64) {
        return Err(BoundsError::BaseSelectionSize { q: q_base, d });
    }
    let theta = q_base / d as f64;
    let l = subsamples as f64;
    let tl = tau * l;
    if (tl - tl.round()).abs() > 1e-9 {
        return Err(BoundsError::NonIntegerTauL(tl));
    }
    if theta >= tau {
        return Err(BoundsError::Ordering { expected: "tau > q_base/D", theta, tau });
    }
    let kl = kl_bernoulli(tau, theta)?;
    Ok((l * (1.0 - tau) + 1.0) * (-(l * kl)).exp())
}

/// Smallest threshold tau on the grid `{q_base/D + j*1e-4 : j >= 1, tau < 1}`
/// whose expected-false-positive bound is at most `target_efp`, or `None`
/// when no grid point qualifies.
///
/// The minimized bound is non-increasing in tau (larger tau shrinks every
/// candidate term and enlarges the candidate set), so the scan returns at
/// the first feasible grid point.
pub fn tau_min(
    subsamples: usize,
    q_base: f64,
    d: usize,
    n_noise: usize,
    target_efp: f64,
) -> Result<Option<f64>, BoundsError> {
    if target_efp.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(BoundsError::Target(target_efp));
    }
    if !(q_base > 0.0 && q_base < d as f64) {
        return Err(BoundsError::BaseSelectionSize { q: q_base, d });
    }
    if subsamples < 2 {
        return Err(BoundsError::SubsampleCount(subsamples));
    }
    let theta = q_base / d as f64;
    let mut j = 1u64;
    loop {
        let tau = theta + j as f64 * 1e-4;
        if tau >= 1.0 {
            return Ok(None);
        }
        if let Ok(b) = expected_false_positives(subsamples, tau, q_base, d, n_noise) {
            if b.value <= target_efp {
                return Ok(Some(tau));
            }
        }
        j += 1;
    }
}
