//! Right-continuous rejection step functions `R(t)` and `R-(t)`.
//!
//! Both shapes reduce to the same form: hypothesis `j` is in the rejection set
//! at threshold `t` iff its rejection score exceeds `t`, and in the reflected
//! set iff its reflection score exceeds `t`.
//!
//! | shape       | rejection score      | reflection score     |
//! |-------------|----------------------|----------------------|
//! | directional | `T_j - delta_j`      | `delta_j - T_j`      |
//! | equivalence | `delta_j - |T_j|`    | `|T_j| - delta_j`    |
//!
//! All comparisons are strict and exact; no tolerance is applied at jump
//! points.

use crate::error::{check_threshold, Result};
use crate::hypothesis::{HypothesisShape, StatisticVector};

#[derive(Debug, Clone)]
pub struct RejectionProfile {
    shape: HypothesisShape,
    rejection_scores: Vec<f64>,
    reflection_scores: Vec<f64>,
    sorted_rejection: Vec<f64>,
    sorted_reflection: Vec<f64>,
    /// Equivalence only: `R(t) = 0` for `t >= cutoff`.
    cutoff: Option<f64>,
    jumps_r: Vec<f64>,
    jumps_rminus: Vec<f64>,
}

fn count_above(sorted: &[f64], t: f64) -> usize {
    sorted.len() - sorted.partition_point(|&v| v <= t)
}

fn positive_jumps(sorted: &[f64]) -> Vec<f64> {
    let mut jumps: Vec<f64> = sorted.iter().copied().filter(|&v| v > 0.0).collect();
    jumps.dedup();
    jumps
}

fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
}

/// Builds the profile of `sv`. Validation already happened when `sv` was
/// constructed, so this cannot fail.
pub fn build_profile(sv: &StatisticVector) -> RejectionProfile {
    let (rejection_scores, reflection_scores): (Vec<f64>, Vec<f64>) = match sv.shape() {
        HypothesisShape::DirectionalRight => sv
            .stats()
            .iter()
            .zip(sv.margins())
            .map(|(&t, &d)| (t - d, d - t))
            .unzip(),
        HypothesisShape::Equivalence => sv
            .stats()
            .iter()
            .zip(sv.margins())
            .map(|(&t, &d)| (d - t.abs(), t.abs() - d))
            .unzip(),
    };
    let sorted_rejection = sorted_copy(&rejection_scores);
    let sorted_reflection = sorted_copy(&reflection_scores);

    let cutoff = match sv.shape() {
        HypothesisShape::Equivalence => Some(sv.min_margin()),
        HypothesisShape::DirectionalRight => None,
    };

    let mut jumps_r = positive_jumps(&sorted_rejection);
    if let Some(c) = cutoff {
        // Scores at or above c only matter up to c, where R is forced to zero.
        let forced = sorted_rejection.last().is_some_and(|&top| top >= c);
        jumps_r.retain(|&v| v < c);
        if forced {
            jumps_r.push(c);
        }
    }
    let jumps_rminus = positive_jumps(&sorted_reflection);

    RejectionProfile {
        shape: sv.shape(),
        rejection_scores,
        reflection_scores,
        sorted_rejection,
        sorted_reflection,
        cutoff,
        jumps_r,
        jumps_rminus,
    }
}

impl RejectionProfile {
    pub fn shape(&self) -> HypothesisShape {
        self.shape
    }

    pub fn m(&self) -> usize {
        self.rejection_scores.len()
    }

    /// Points in `(0, inf)` where `R` decreases, ascending and deduplicated.
    pub fn jump_points_r(&self) -> &[f64] {
        &self.jumps_r
    }

    /// Points in `(0, inf)` where `R-` decreases, ascending and deduplicated.
    pub fn jump_points_rminus(&self) -> &[f64] {
        &self.jumps_rminus
    }

    pub fn cutoff(&self) -> Option<f64> {
        self.cutoff
    }

    /// `R(t)`, the number of rejections at threshold `t >= 0`.
    pub fn eval_r(&self, t: f64) -> Result<usize> {
        check_threshold(t).map(|t| self.r_at(t))
    }

    /// `R-(t)`, the size of the reflected region at threshold `t >= 0`.
    pub fn eval_rminus(&self, t: f64) -> Result<usize> {
        check_threshold(t).map(|t| self.rminus_at(t))
    }

    pub(crate) fn r_at(&self, t: f64) -> usize {
        match self.cutoff {
            Some(c) if t >= c => 0,
            _ => count_above(&self.sorted_rejection, t),
        }
    }

    pub(crate) fn rminus_at(&self, t: f64) -> usize {
        count_above(&self.sorted_reflection, t)
    }

    /// Indices (0-based, ascending) of the rejection set at `t`.
    pub fn rejected(&self, t: f64) -> Result<Vec<usize>> {
        let t = check_threshold(t)?;
        Ok(self.rejected_at(t))
    }

    pub(crate) fn rejected_at(&self, t: f64) -> Vec<usize> {
        if matches!(self.cutoff, Some(c) if t >= c) {
            return Vec::new();
        }
        indices_above(&self.rejection_scores, t)
    }

    /// Indices (0-based, ascending) of the reflected set at `t`.
    pub fn reflected(&self, t: f64) -> Result<Vec<usize>> {
        let t = check_threshold(t)?;
        Ok(indices_above(&self.reflection_scores, t))
    }

    /// The candidate threshold set: `{0}` together with every discontinuity
    /// of `R` or `R-`, ascending and deduplicated.
    pub fn discontinuities(&self) -> Vec<f64> {
        let mut points = Vec::with_capacity(1 + self.jumps_r.len() + self.jumps_rminus.len());
        points.push(0.0);
        points.extend_from_slice(&self.jumps_r);
        points.extend_from_slice(&self.jumps_rminus);
        points.sort_by(f64::total_cmp);
        points.dedup();
        points
    }
}

fn indices_above(scores: &[f64], t: f64) -> Vec<usize> {
    scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > t)
        .map(|(j, _)| j)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn directional(stats: &[f64], delta: f64) -> RejectionProfile {
        let sv = StatisticVector::with_common_margin(
            stats.to_vec(),
            delta,
            HypothesisShape::DirectionalRight,
        )
        .unwrap();
        build_profile(&sv)
    }

    fn equivalence(stats: &[f64], delta: f64) -> RejectionProfile {
        let sv =
            StatisticVector::with_common_margin(stats.to_vec(), delta, HypothesisShape::Equivalence)
                .unwrap();
        build_profile(&sv)
    }

    #[test]
    fn directional_counts_and_jumps() {
        let p = directional(&[3.0, -2.5, 0.5, 4.0], 0.0);
        assert_eq!(p.eval_r(1.0).unwrap(), 2);
        assert_eq!(p.rejected(1.0).unwrap(), vec![0, 3]);
        assert_eq!(p.eval_rminus(1.0).unwrap(), 1);
        assert_eq!(p.reflected(1.0).unwrap(), vec![1]);
        assert_eq!(p.jump_points_r(), &[0.5, 3.0, 4.0]);
        assert_eq!(p.jump_points_rminus(), &[2.5]);
        assert_eq!(p.discontinuities(), vec![0.0, 0.5, 2.5, 3.0, 4.0]);
    }

    #[test]
    fn strict_boundaries() {
        let p = directional(&[3.0, -2.5, 0.5, 4.0], 0.0);
        assert_eq!(p.eval_r(0.0).unwrap(), 3);
        assert_eq!(p.eval_r(4.0).unwrap(), 0);
        assert_eq!(p.eval_rminus(2.5).unwrap(), 0);
        assert_eq!(p.eval_rminus(2.49).unwrap(), 1);
    }

    #[test]
    fn statistics_on_the_margin_are_never_counted() {
        let p = directional(&[1.5, 1.5, 1.5], 1.5);
        for t in [0.0, 0.1, 2.0] {
            assert_eq!(p.eval_r(t).unwrap(), 0);
            assert_eq!(p.eval_rminus(t).unwrap(), 0);
        }
        assert!(p.jump_points_r().is_empty());
        assert_eq!(p.discontinuities(), vec![0.0]);
    }

    #[test]
    fn equivalence_counts() {
        let p = equivalence(&[0.2, -0.3, 2.5, 1.0], 2.0);
        assert_eq!(p.eval_r(0.5).unwrap(), 3);
        assert_eq!(p.rejected(0.5).unwrap(), vec![0, 1, 3]);
        assert_eq!(p.eval_rminus(0.5).unwrap(), 0);
        assert_eq!(p.eval_r(2.0).unwrap(), 0);
    }

    #[test]
    fn equivalence_forced_zero_with_heterogeneous_margins() {
        let sv = StatisticVector::new(
            vec![0.0, 0.0],
            vec![1.0, 5.0],
            HypothesisShape::Equivalence,
        )
        .unwrap();
        let p = build_profile(&sv);
        assert_eq!(p.eval_r(0.99).unwrap(), 2);
        assert_eq!(p.eval_r(1.0).unwrap(), 0);
        assert_eq!(p.eval_r(3.0).unwrap(), 0);
        assert_eq!(p.jump_points_r(), &[1.0]);
    }

    #[test]
    fn negative_and_nan_thresholds_rejected() {
        let p = directional(&[1.0], 0.0);
        assert!(p.eval_r(-0.1).is_err());
        assert!(p.eval_rminus(f64::NAN).is_err());
    }

    #[test]
    fn duplicate_jumps_are_merged() {
        let p = directional(&[2.0, 2.0, -2.0], 0.0);
        assert_eq!(p.jump_points_r(), &[2.0]);
        assert_eq!(p.discontinuities(), vec![0.0, 2.0]);
    }

    fn naive_counts(stats: &[f64], margins: &[f64], shape: HypothesisShape, t: f64) -> (usize, usize) {
        let c = margins.iter().copied().fold(f64::INFINITY, f64::min);
        let mut r = 0;
        let mut rm = 0;
        for (&x, &d) in stats.iter().zip(margins) {
            match shape {
                HypothesisShape::DirectionalRight => {
                    if x - d > t {
                        r += 1;
                    }
                    if x - d < -t {
                        rm += 1;
                    }
                }
                HypothesisShape::Equivalence => {
                    if x.abs() < d - t && t < c {
                        r += 1;
                    }
                    if x.abs() > d + t {
                        rm += 1;
                    }
                }
            }
        }
        (r, rm)
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, bool, f64)> {
        (1usize..30).prop_flat_map(|m| {
            (
                prop::collection::vec((-12i32..12).prop_map(|k| k as f64 * 0.25), m),
                prop::collection::vec((1i32..10).prop_map(|k| k as f64 * 0.25), m),
                any::<bool>(),
                (0i32..16).prop_map(|k| k as f64 * 0.25),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn evaluation_matches_naive_recount((stats, margins, equiv, t) in instance()) {
            let shape = if equiv { HypothesisShape::Equivalence } else { HypothesisShape::DirectionalRight };
            let sv = StatisticVector::new(stats.clone(), margins.clone(), shape).unwrap();
            let p = build_profile(&sv);
            let (r, rm) = naive_counts(&stats, &margins, shape, t);
            prop_assert_eq!(p.eval_r(t).unwrap(), r);
            prop_assert_eq!(p.eval_rminus(t).unwrap(), rm);
            prop_assert_eq!(p.rejected(t).unwrap().len(), r);
        }

        #[test]
        fn monotone_and_right_continuous((stats, margins, equiv, t) in instance(), dt in 0.0f64..3.0) {
            let shape = if equiv { HypothesisShape::Equivalence } else { HypothesisShape::DirectionalRight };
            let sv = StatisticVector::new(stats, margins, shape).unwrap();
            let p = build_profile(&sv);
            prop_assert!(p.eval_r(t).unwrap() >= p.eval_r(t + dt).unwrap());
            prop_assert!(p.eval_rminus(t).unwrap() >= p.eval_rminus(t + dt).unwrap());
            for &tau in p.jump_points_r().iter().chain(p.jump_points_rminus()) {
                let eps = 1e-9;
                prop_assert_eq!(p.eval_r(tau).unwrap(), p.eval_r(tau + eps).unwrap());
                prop_assert_eq!(p.eval_rminus(tau).unwrap(), p.eval_rminus(tau + eps).unwrap());
            }
        }

        #[test]
        fn equivalence_tail_is_zero((stats, margins, _e, t) in instance()) {
            let sv = StatisticVector::new(stats, margins, HypothesisShape::Equivalence).unwrap();
            let p = build_profile(&sv);
            let c = sv.min_margin();
            prop_assert_eq!(p.eval_r(c + t).unwrap(), 0);
        }
    }
}
