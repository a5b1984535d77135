//! Median-FDP control and p-value transforms for flexible procedures.
//!
//! [`control_mfdp`] scans the finite set of discontinuities of the estimated
//! FDP, takes `s` as the largest point whose estimate exceeds `gamma`, and
//! rejects at the next point `s+`. Because the estimate is right-continuous,
//! `s+` also equals `sup{t >= 0 : FDP~(t) > gamma}`.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{check_gamma, Error, Result};
use crate::estimators::ratio;
use crate::hypothesis::{HypothesisShape, StatisticVector};
use crate::profile::build_profile;

/// A threshold that may be the sentinel negative infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Threshold {
    NegInfinity,
    At(f64),
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::NegInfinity => f.write_str("-inf"),
            Threshold::At(t) => write!(f, "{t}"),
        }
    }
}

impl Threshold {
    pub fn is_below(self, t: f64) -> bool {
        match self {
            Threshold::NegInfinity => true,
            Threshold::At(s) => s < t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlResult {
    pub gamma: f64,
    /// Largest candidate threshold whose estimated FDP exceeds `gamma`.
    pub s: Threshold,
    /// Rejection threshold: the smallest candidate strictly above `s`.
    pub s_plus: f64,
    /// 0-based indices rejected at `s_plus`.
    pub rejected: Vec<usize>,
    pub r: usize,
    pub v_tilde: usize,
    pub fdp_hat_at_s_plus: f64,
}

/// Rejects `R(s+)` so that the median of the FDP is at most `gamma`.
///
/// Works for both shapes. When the estimate never exceeds `gamma`, `s` is
/// negative infinity and `s+ = 0`.
pub fn control_mfdp(sv: &StatisticVector, gamma: f64) -> Result<ControlResult> {
    let gamma = check_gamma(gamma)?;
    let profile = build_profile(sv);
    let points = profile.discontinuities();

    let fdp_at = |t: f64| {
        let r = profile.r_at(t);
        let v = profile.rminus_at(t).min(r);
        (r, v, ratio(v, r))
    };

    let last_exceeding = points.iter().rposition(|&t| fdp_at(t).2 > gamma);
    let (s, s_plus) = match last_exceeding {
        None => (Threshold::NegInfinity, points[0]),
        Some(i) => {
            // The largest candidate has no rejections, so i is never the last.
            let next = *points
                .get(i + 1)
                .expect("estimated FDP is zero at the largest discontinuity");
            (Threshold::At(points[i]), next)
        }
    };
    let (r, v, fdp) = fdp_at(s_plus);
    Ok(ControlResult {
        gamma,
        s,
        s_plus,
        rejected: profile.rejected_at(s_plus),
        r,
        v_tilde: v,
        fdp_hat_at_s_plus: fdp,
    })
}

/// A guessed (or known) null density of `T_j - mu_j`, symmetric about 0.
#[derive(Clone)]
pub enum NullDensity {
    StandardNormal,
    ScaledNormal { sigma: f64 },
    StudentT { df: f64 },
    /// User-supplied CDF of a distribution symmetric about 0.
    UserCdf(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for NullDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

impl NullDensity {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NullDensity::ScaledNormal { sigma } if !(sigma.is_finite() && sigma > 0.0) => Err(
                Error::InvalidArgument(format!("normal scale must be positive, got {sigma}")),
            ),
            NullDensity::StudentT { df } if !(df.is_finite() && df > 0.0) => Err(
                Error::InvalidArgument(format!("degrees of freedom must be positive, got {df}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            NullDensity::StandardNormal => "std-normal".to_owned(),
            NullDensity::ScaledNormal { sigma } => format!("normal(sigma={sigma})"),
            NullDensity::StudentT { df } => format!("student-t(df={df})"),
            NullDensity::UserCdf(_) => "user-cdf".to_owned(),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            NullDensity::StandardNormal => normal_cdf(x),
            NullDensity::ScaledNormal { sigma } => normal_cdf(x / sigma),
            NullDensity::StudentT { df } => StudentsT::new(0.0, 1.0, *df)
                .expect("validated degrees of freedom")
                .cdf(x),
            NullDensity::UserCdf(f) => f(x),
        }
    }
}

/// Standard normal CDF through the complementary error function, accurate
/// in both tails.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Null densities shared by all hypotheses or given one per hypothesis.
#[derive(Debug, Clone)]
pub enum NullModel {
    Shared(NullDensity),
    PerHypothesis(Vec<NullDensity>),
}

impl NullModel {
    fn density(&self, j: usize) -> &NullDensity {
        match self {
            NullModel::Shared(d) => d,
            NullModel::PerHypothesis(ds) => &ds[j],
        }
    }

    fn validate(&self, m: usize) -> Result<()> {
        match self {
            NullModel::Shared(d) => d.validate(),
            NullModel::PerHypothesis(ds) => {
                if ds.len() != m {
                    return Err(Error::LengthMismatch {
                        stats: m,
                        margins: ds.len(),
                    });
                }
                ds.iter().try_for_each(NullDensity::validate)
            }
        }
    }

    fn describe(&self) -> String {
        match self {
            NullModel::Shared(d) => d.describe(),
            NullModel::PerHypothesis(_) => "per-hypothesis".to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueVector {
    pub pvals: Vec<f64>,
    /// Which null density family generated the values.
    pub provenance: String,
}

impl PValueVector {
    pub fn new(pvals: Vec<f64>, provenance: impl Into<String>) -> Result<Self> {
        if let Some((index, &value)) = pvals
            .iter()
            .enumerate()
            .find(|(_, p)| !(0.0..=1.0).contains(*p))
        {
            return Err(Error::InvalidPValue { index, value });
        }
        Ok(Self {
            pvals,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.pvals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pvals.is_empty()
    }

    /// Writes `index,pvalue` rows (1-based index, 17 significant digits).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "index,pvalue")?;
        for (j, p) in self.pvals.iter().enumerate() {
            writeln!(out, "{},{:.16e}", j + 1, p)?;
        }
        Ok(())
    }
}

/// `P_j = integral of f_j over (T_j - delta_j, inf)`.
pub fn directional_pvalues(sv: &StatisticVector, null: &NullModel) -> Result<PValueVector> {
    sv.expect_shape(HypothesisShape::DirectionalRight)?;
    null.validate(sv.len())?;
    // Upper tail through symmetry keeps precision for large statistics.
    let pvals = sv
        .stats()
        .iter()
        .zip(sv.margins())
        .enumerate()
        .map(|(j, (&t, &d))| null.density(j).cdf(d - t))
        .collect();
    PValueVector::new(pvals, null.describe())
}

/// `P_j = 1 - F_j(T_j + delta_j)` for `T_j < 0`, `F_j(T_j - delta_j)`
/// otherwise. By symmetry both branches equal `F_j(|T_j| - delta_j)`.
pub fn equivalence_pvalues(sv: &StatisticVector, null: &NullModel) -> Result<PValueVector> {
    sv.expect_shape(HypothesisShape::Equivalence)?;
    null.validate(sv.len())?;
    let pvals = sv
        .stats()
        .iter()
        .zip(sv.margins())
        .enumerate()
        .map(|(j, (&t, &d))| {
            let f = null.density(j);
            if t < 0.0 {
                f.cdf(-(t + d))
            } else {
                f.cdf(t - d)
            }
        })
        .collect();
    PValueVector::new(pvals, null.describe())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::estimate;
    use proptest::prelude::*;

    fn dir(stats: &[f64]) -> StatisticVector {
        StatisticVector::with_common_margin(stats.to_vec(), 0.0, HypothesisShape::DirectionalRight)
            .unwrap()
    }

    #[test]
    fn directional_worked_example() {
        let res = control_mfdp(&dir(&[5.0, 4.0, 3.0, -3.5]), 0.4).unwrap();
        assert_eq!(res.s, Threshold::At(3.0));
        assert_eq!(res.s_plus, 3.5);
        assert_eq!(res.rejected, vec![0, 1]);
        assert_eq!(res.fdp_hat_at_s_plus, 0.0);
    }

    #[test]
    fn worked_example_fdp_over_candidates() {
        // Frozen from hand enumeration over M = {0, 3, 3.5, 4, 5}.
        let sv = dir(&[5.0, 4.0, 3.0, -3.5]);
        let points = build_profile(&sv).discontinuities();
        assert_eq!(points, vec![0.0, 3.0, 3.5, 4.0, 5.0]);
        let fdp: Vec<f64> = points.iter().map(|&t| estimate(&sv, t).unwrap().fdp_hat).collect();
        assert_eq!(fdp, vec![1.0 / 3.0, 0.5, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn all_in_rejection_region_rejects_everything() {
        for gamma in [0.0, 0.05, 0.5, 0.99] {
            let res = control_mfdp(&dir(&[0.1, 2.0, 3.0]), gamma).unwrap();
            assert_eq!(res.s, Threshold::NegInfinity);
            assert_eq!(res.s_plus, 0.0);
            assert_eq!(res.rejected, vec![0, 1, 2]);
        }
    }

    #[test]
    fn gamma_out_of_range() {
        assert!(control_mfdp(&dir(&[1.0]), 1.0).is_err());
        assert!(control_mfdp(&dir(&[1.0]), -0.1).is_err());
        assert!(control_mfdp(&dir(&[1.0]), f64::NAN).is_err());
    }

    #[test]
    fn equivalence_control_stays_below_margin() {
        let sv = StatisticVector::with_common_margin(
            vec![0.1, -0.2, 1.9, 2.5, -3.0, 0.4],
            2.0,
            HypothesisShape::Equivalence,
        )
        .unwrap();
        let res = control_mfdp(&sv, 0.1).unwrap();
        assert!(res.fdp_hat_at_s_plus <= 0.1);
        assert!(res.s_plus <= 2.0);
        assert!(res.s.is_below(res.s_plus));
    }

    // Independent quadrature of the standard normal density.
    // Taylor series Phi(x) = 1/2 + phi(x) * sum x^(2k+1) / (1*3*...*(2k+1)).
    fn series_normal_cdf(x: f64) -> f64 {
        let phi = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let (mut term, mut sum, mut k) = (x, x, 1.0);
        while term.abs() > 1e-30 * sum.abs().max(1e-300) {
            k += 2.0;
            term *= x * x / k;
            sum += term;
        }
        0.5 + phi * sum
    }

    #[test]
    fn normal_cdf_matches_series() {
        for x in [-5.0, -2.0, -1.0, 0.0, 0.5, 1.96, 3.0] {
            assert!((normal_cdf(x) - series_normal_cdf(x)).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn directional_pvalue_examples() {
        let null = NullModel::Shared(NullDensity::StandardNormal);
        let pv = directional_pvalues(&dir(&[0.0, 1.96]), &null).unwrap();
        assert_eq!(pv.pvals[0], 0.5);
        let oracle = 1.0 - series_normal_cdf(1.96);
        assert!((pv.pvals[1] - oracle).abs() < 1e-12);
        assert!((pv.pvals[1] - 0.025).abs() < 1e-4);

        let scaled = NullModel::Shared(NullDensity::ScaledNormal { sigma: 2.0 });
        let pv2 = directional_pvalues(&dir(&[3.92]), &scaled).unwrap();
        assert_eq!(pv2.pvals[0], pv.pvals[1]);
    }

    #[test]
    fn equivalence_pvalue_examples() {
        let null = NullModel::Shared(NullDensity::StandardNormal);
        let sv = StatisticVector::new(vec![0.0, -2.0], vec![2.0, 2.0], HypothesisShape::Equivalence)
            .unwrap();
        let pv = equivalence_pvalues(&sv, &null).unwrap();
        assert!((pv.pvals[0] - series_normal_cdf(-2.0)).abs() < 1e-12);
        assert!((pv.pvals[0] - 0.02275).abs() < 1e-5);
        assert_eq!(pv.pvals[1], 0.5);

        let left = StatisticVector::new(vec![-1e-300], vec![2.0], HypothesisShape::Equivalence).unwrap();
        let right = StatisticVector::new(vec![0.0], vec![2.0], HypothesisShape::Equivalence).unwrap();
        let l = equivalence_pvalues(&left, &null).unwrap().pvals[0];
        let r = equivalence_pvalues(&right, &null).unwrap().pvals[0];
        assert_eq!(l, r);
    }

    #[test]
    fn student_t_pvalues() {
        let null = NullModel::Shared(NullDensity::StudentT { df: 4.0 });
        let pv = directional_pvalues(&dir(&[0.0, 2.776_445_105_2]), &null).unwrap();
        assert!((pv.pvals[0] - 0.5).abs() < 1e-15);
        // 0.975 quantile of t with 4 degrees of freedom.
        assert!((pv.pvals[1] - 0.025).abs() < 1e-9);
        assert!(directional_pvalues(&dir(&[0.0]), &NullModel::Shared(NullDensity::StudentT { df: 0.0 })).is_err());
    }

    #[test]
    fn user_cdf_and_per_hypothesis() {
        let logistic = NullDensity::UserCdf(Arc::new(|x: f64| 1.0 / (1.0 + (-x).exp())));
        let model = NullModel::PerHypothesis(vec![logistic, NullDensity::StandardNormal]);
        let pv = directional_pvalues(&dir(&[0.0, 0.0]), &model).unwrap();
        assert_eq!(pv.pvals, vec![0.5, 0.5]);
        let short = NullModel::PerHypothesis(vec![NullDensity::StandardNormal]);
        assert!(directional_pvalues(&dir(&[0.0, 0.0]), &short).is_err());
    }

    #[test]
    fn pvalue_csv_format() {
        let pv = PValueVector::new(vec![0.5, 0.025], "std-normal").unwrap();
        let mut buf = Vec::new();
        pv.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "index,pvalue");
        assert_eq!(lines[1], "1,5.0000000000000000e-1");
        let parsed: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(parsed, 0.025);
        assert!(PValueVector::new(vec![1.5], "x").is_err());
    }

    fn grid_sup(sv: &StatisticVector, gamma: f64, step: f64, upper: f64) -> f64 {
        // Largest grid point with estimate above gamma, plus one step.
        let steps = (upper / step).ceil() as usize;
        (0..=steps)
            .map(|k| k as f64 * step)
            .rfind(|&t| estimate(sv, t).unwrap().fdp_hat > gamma)
            .map_or(0.0, |s| s + step)
    }

    proptest! {
        #[test]
        fn control_invariants(stats in prop::collection::vec(-6.0f64..6.0, 1..40), gamma in 0.0f64..0.99) {
            let sv = dir(&stats);
            let res = control_mfdp(&sv, gamma).unwrap();
            prop_assert!(res.fdp_hat_at_s_plus <= gamma);
            prop_assert!(res.s.is_below(res.s_plus));
            let points = build_profile(&sv).discontinuities();
            prop_assert!(points.contains(&res.s_plus));
            let max = *points.last().unwrap();
            prop_assert!(res.s == Threshold::NegInfinity || res.s_plus <= max);
        }

        #[test]
        fn nested_in_gamma(stats in prop::collection::vec(-6.0f64..6.0, 1..40), g1 in 0.0f64..0.99, g2 in 0.0f64..0.99) {
            let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
            let sv = dir(&stats);
            let a = control_mfdp(&sv, lo).unwrap();
            let b = control_mfdp(&sv, hi).unwrap();
            prop_assert!(a.s_plus >= b.s_plus);
            prop_assert!(a.rejected.iter().all(|j| b.rejected.contains(j)));
        }

        #[test]
        fn min_over_candidates_equals_grid_sup(
            ks in prop::collection::btree_set(-200i32..200, 1..25),
            gamma in 0.0f64..0.9,
        ) {
            // Jump points on a 0.01 lattice never tie and sit at least 0.001 apart.
            let stats: Vec<f64> = ks.iter().map(|&k| k as f64 * 0.01 + 0.0005).collect();
            let sv = dir(&stats);
            let res = control_mfdp(&sv, gamma).unwrap();
            let step = 0.00025;
            let sup = grid_sup(&sv, gamma, step, 2.1);
            if res.s == Threshold::NegInfinity {
                prop_assert_eq!(sup, 0.0);
            } else {
                prop_assert!((res.s_plus - sup).abs() <= step + 1e-9, "s+ {} vs grid {}", res.s_plus, sup);
            }
        }

        #[test]
        fn pvalues_monotone(a in -7.0f64..7.0, b in -7.0f64..7.0) {
            prop_assume!(a != b);
            let null = NullModel::Shared(NullDensity::StandardNormal);
            let pv = directional_pvalues(&dir(&[a, b]), &null).unwrap();
            prop_assert_eq!(a < b, pv.pvals[0] > pv.pvals[1]);
        }
    }
}
