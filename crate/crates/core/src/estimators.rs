//! Median-unbiased estimators of the number of false discoveries.
//!
//! Each estimator bounds `V(t)`, the number of true nulls among the
//! rejections at threshold `t`, by the size of the reflected region,
//! capped at `R(t)`. Under sign-symmetry of the null statistics about their
//! means, `P(V(t) <= V~(t)) >= 1/2`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_threshold, Result};
use crate::hypothesis::{HypothesisShape, StatisticVector};
use crate::profile::{build_profile, RejectionProfile};

/// A count bound that may be the sentinel negative infinity.
///
/// The randomized estimator sets its bound to negative infinity on a coin
/// flip; this is never encoded as a finite number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bound {
    Finite(usize),
    NegInfinity,
}

impl Bound {
    pub fn finite(self) -> Option<usize> {
        match self {
            Bound::Finite(v) => Some(v),
            Bound::NegInfinity => None,
        }
    }

    /// Whether `count <= self`.
    pub fn covers(self, count: usize) -> bool {
        match self {
            Bound::Finite(v) => count <= v,
            Bound::NegInfinity => false,
        }
    }
}

/// The guarantee under which an estimate is median unbiased.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Guarantee {
    /// Null statistics jointly symmetric about their means.
    Symmetry,
    /// Null statistics mutually independent with symmetric unimodal
    /// densities. Not checked at runtime.
    IndependentUnimodal,
    /// Group invariance of the transformed statistics (permutation bound).
    GroupInvariance,
}

/// Outcome of the tie-breaking coin of the randomized estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoinFlip {
    /// Keep the bound.
    Heads,
    /// Drop the bound to negative infinity.
    Tails,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Randomization {
    /// `None` when `R(t) != R-(t)` and no coin was needed.
    pub coin: Option<CoinFlip>,
    /// Set when the bound is negative infinity; `fdp_hat` is then reported
    /// as 0.
    pub floored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdpEstimate {
    pub t: f64,
    /// 0-based indices of the rejection set.
    pub rejected: Vec<usize>,
    pub r: usize,
    /// Size of the reflected region the estimate is built from.
    pub r_minus: usize,
    pub v_tilde: Bound,
    pub fdp_hat: f64,
    pub randomized: Option<Randomization>,
    pub guarantee: Guarantee,
}

impl FdpEstimate {
    pub(crate) fn from_counts(
        t: f64,
        rejected: Vec<usize>,
        r_minus: usize,
        guarantee: Guarantee,
    ) -> Self {
        let r = rejected.len();
        let v = r_minus.min(r);
        Self {
            t,
            rejected,
            r,
            r_minus,
            v_tilde: Bound::Finite(v),
            fdp_hat: ratio(v, r),
            randomized: None,
            guarantee,
        }
    }
}

pub(crate) fn ratio(v: usize, r: usize) -> f64 {
    v as f64 / r.max(1) as f64
}

/// Seeded source of fair coin flips. Single owner; parallel callers create
/// one per work unit.
#[derive(Debug, Clone)]
pub struct CoinSource {
    rng: ChaCha8Rng,
}

impl CoinSource {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn flip(&mut self) -> CoinFlip {
        if self.rng.random::<bool>() {
            CoinFlip::Heads
        } else {
            CoinFlip::Tails
        }
    }
}

/// Directional estimate `V~(t) = min(R-(t), R(t))`.
pub fn estimate_directional(sv: &StatisticVector, t: f64) -> Result<FdpEstimate> {
    sv.expect_shape(HypothesisShape::DirectionalRight)?;
    let t = check_threshold(t)?;
    Ok(plain_estimate(&build_profile(sv), t))
}

/// Randomized directional estimate. When `R(t) = R-(t)` a fair coin decides
/// between `V~(t)` and negative infinity; otherwise it equals
/// [`estimate_directional`] and no coin is drawn.
pub fn estimate_directional_randomized(
    sv: &StatisticVector,
    t: f64,
    coin: &mut CoinSource,
) -> Result<FdpEstimate> {
    randomized_with(sv, t, || coin.flip())
}

/// Randomized directional estimate with the coin outcome given explicitly.
pub fn estimate_directional_with_coin(
    sv: &StatisticVector,
    t: f64,
    flip: CoinFlip,
) -> Result<FdpEstimate> {
    randomized_with(sv, t, || flip)
}

fn randomized_with(
    sv: &StatisticVector,
    t: f64,
    flip: impl FnOnce() -> CoinFlip,
) -> Result<FdpEstimate> {
    let mut est = estimate_directional(sv, t)?;
    if est.r != est.r_minus {
        est.randomized = Some(Randomization {
            coin: None,
            floored: false,
        });
        return Ok(est);
    }
    let outcome = flip();
    let floored = outcome == CoinFlip::Tails;
    if floored {
        est.v_tilde = Bound::NegInfinity;
        est.fdp_hat = 0.0;
    }
    est.randomized = Some(Randomization {
        coin: Some(outcome),
        floored,
    });
    Ok(est)
}

/// Equivalence estimate: rejections are `|T_j| < delta_j - t`, the reflected
/// region is `|T_j| > delta_j + t`. For `t` at or above the smallest margin
/// the rejection set is empty.
pub fn estimate_equivalence(sv: &StatisticVector, t: f64) -> Result<FdpEstimate> {
    sv.expect_shape(HypothesisShape::Equivalence)?;
    let t = check_threshold(t)?;
    Ok(plain_estimate(&build_profile(sv), t))
}

/// Equivalence estimate whose reflected region is the window
/// `delta_j + t < |T_j| <= 3 delta_j - t`.
///
/// Valid only when the null statistics are mutually independent with
/// symmetric unimodal densities; the result is tagged
/// [`Guarantee::IndependentUnimodal`] and the assumption is not checked.
pub fn estimate_equivalence_windowed(sv: &StatisticVector, t: f64) -> Result<FdpEstimate> {
    sv.expect_shape(HypothesisShape::Equivalence)?;
    let t = check_threshold(t)?;
    let profile = build_profile(sv);
    let rejected = profile.rejected_at(t);
    let r_minus = windowed_reflected(sv, t).len();
    Ok(FdpEstimate::from_counts(
        t,
        rejected,
        r_minus,
        Guarantee::IndependentUnimodal,
    ))
}

/// 0-based indices with `delta_j + t < |T_j| <= 3 delta_j - t`.
pub fn windowed_reflected(sv: &StatisticVector, t: f64) -> Vec<usize> {
    sv.stats()
        .iter()
        .zip(sv.margins())
        .enumerate()
        .filter(|(_, (&x, &d))| d + t < x.abs() && x.abs() <= 3.0 * d - t)
        .map(|(j, _)| j)
        .collect()
}

/// Non-randomized estimate for whichever shape `sv` carries.
pub fn estimate(sv: &StatisticVector, t: f64) -> Result<FdpEstimate> {
    let t = check_threshold(t)?;
    Ok(plain_estimate(&build_profile(sv), t))
}

pub(crate) fn plain_estimate(profile: &RejectionProfile, t: f64) -> FdpEstimate {
    FdpEstimate::from_counts(t, profile.rejected_at(t), profile.rminus_at(t), Guarantee::Symmetry)
}
