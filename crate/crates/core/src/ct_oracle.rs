//! Brute-force closed testing over all nonempty subsets of at most 12
//! hypotheses, and checks of the closed-form shortcuts against it.
//!
//! Subsets are `u32` bitmasks with bit `j` for hypothesis `j`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{rejection_masks, sam_bound, upper_order_index, GroupKind, SamStatistic, TransformationGroup};
use crate::error::{Error, Result};
use crate::estimators::{estimate_directional_with_coin, plain_estimate, windowed_reflected, Bound, CoinFlip};
use crate::exec::Execution;
use crate::hypothesis::{HypothesisShape, StatisticVector};
use crate::profile::build_profile;
use crate::statistics::DataMatrix;

pub const MAX_ORACLE_M: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    /// `phi_I = 1(R_I > R-_I)`.
    DirectionalBasic,
    /// `phi_I = 1(R_I > R-_I) + b 1(R_I = R-_I)` with one shared coin `b`.
    DirectionalRandomized,
    /// The basic test with equivalence regions.
    EquivalenceBasic,
    /// The basic equivalence test with the reflected region capped at
    /// `3 delta_j - t`.
    EquivalenceWindowed,
    /// `R_I(X) > ` the upper `(1 - alpha)` order statistic of `R_I(gX)`.
    SamSubset,
}

impl std::fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FamilyKind::DirectionalBasic => "directional-basic",
            FamilyKind::DirectionalRandomized => "directional-randomized",
            FamilyKind::EquivalenceBasic => "equivalence-basic",
            FamilyKind::EquivalenceWindowed => "equivalence-windowed",
            FamilyKind::SamSubset => "sam-subset",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
enum LocalTests {
    Reflection { rejected: u32, reflected: u32, tie_rejects: bool },
    Sam { identity: u32, masks: Vec<u32>, order_index: usize },
}

/// Local tests for every subset, fixed by the data (and coin).
#[derive(Debug, Clone)]
pub struct LocalTestFamily {
    kind: FamilyKind,
    m: usize,
    tests: LocalTests,
}

fn mask_of(indices: &[usize]) -> u32 {
    indices.iter().fold(0, |acc, &j| acc | 1 << j)
}

fn check_m(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::Empty);
    }
    if m > MAX_ORACLE_M {
        return Err(Error::Infeasible(format!(
            "closed testing enumerates 2^m subsets; m = {m} exceeds {MAX_ORACLE_M}"
        )));
    }
    Ok(())
}

impl LocalTestFamily {
    /// Builds one of the reflection families from statistics at threshold
    /// `t`. The coin `b` only matters for the randomized family.
    pub fn from_statistics(kind: FamilyKind, sv: &StatisticVector, t: f64, b: bool) -> Result<Self> {
        check_m(sv.len())?;
        let expected = match kind {
            FamilyKind::DirectionalBasic | FamilyKind::DirectionalRandomized => HypothesisShape::DirectionalRight,
            FamilyKind::EquivalenceBasic | FamilyKind::EquivalenceWindowed => HypothesisShape::Equivalence,
            FamilyKind::SamSubset => {
                return Err(Error::InvalidArgument("SAM families are built from data".into()))
            }
        };
        sv.expect_shape(expected)?;
        let profile = build_profile(sv);
        let rejected = mask_of(&profile.rejected(t)?);
        let reflected = match kind {
            FamilyKind::EquivalenceWindowed => mask_of(&windowed_reflected(sv, t)),
            _ => mask_of(&profile.reflected(t)?),
        };
        Ok(Self {
            kind,
            m: sv.len(),
            tests: LocalTests::Reflection {
                rejected,
                reflected,
                tie_rejects: kind == FamilyKind::DirectionalRandomized && b,
            },
        })
    }

    /// SAM local tests from the rejection masks of every group element,
    /// identity first.
    pub fn sam_subset(m: usize, masks: Vec<u32>, alpha: f64) -> Result<Self> {
        check_m(m)?;
        if masks.len() < 2 {
            return Err(Error::InvalidArgument("need the identity and one other transformation".into()));
        }
        Ok(Self {
            kind: FamilyKind::SamSubset,
            m,
            tests: LocalTests::Sam {
                identity: masks[0],
                order_index: upper_order_index(alpha, masks.len()),
                masks,
            },
        })
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// The local test of the intersection hypothesis `H_I`.
    pub fn evaluate(&self, subset: u32) -> bool {
        match &self.tests {
            LocalTests::Reflection {
                rejected,
                reflected,
                tie_rejects,
            } => {
                let r = (subset & rejected).count_ones();
                let rm = (subset & reflected).count_ones();
                r > rm || (*tie_rejects && r == rm)
            }
            LocalTests::Sam {
                identity,
                masks,
                order_index,
            } => {
                let mut counts: Vec<u32> = masks.iter().map(|g| (subset & g).count_ones()).collect();
                let (_, q, _) = counts.select_nth_unstable(order_index - 1);
                (subset & identity).count_ones() > *q
            }
        }
    }
}

/// The closure of a local test family.
#[derive(Debug, Clone)]
pub struct ClosureResult {
    m: usize,
    local: Vec<bool>,
    in_x: Vec<bool>,
    t_alpha: Vec<u8>,
}

impl ClosureResult {
    pub fn m(&self) -> usize {
        self.m
    }

    /// Whether `H_I` is rejected by its local test.
    pub fn local(&self, subset: u32) -> bool {
        self.local[subset as usize]
    }

    /// Whether `I` is in the closed-testing rejection collection, i.e. every
    /// `J` containing `I` has a rejecting local test.
    pub fn contains(&self, subset: u32) -> bool {
        self.in_x[subset as usize]
    }

    /// `t_alpha(I) = max{|J| : J nonempty, J subset of I, J not rejected}`,
    /// or 0 when every nonempty subset of `I` is rejected.
    pub fn t_alpha(&self, subset: u32) -> usize {
        self.t_alpha[subset as usize] as usize
    }

    pub fn rejected_subsets(&self) -> impl Iterator<Item = u32> + '_ {
        (1..self.in_x.len() as u32).filter(|&s| self.in_x[s as usize])
    }
}

pub fn run_closure(family: &LocalTestFamily) -> Result<ClosureResult> {
    check_m(family.m)?;
    let size = 1usize << family.m;
    let full = size - 1;
    let local: Vec<bool> = (0..size).map(|s| s != 0 && family.evaluate(s as u32)).collect();

    // Supersets have larger masks, so a descending sweep sees them first.
    let mut in_x = vec![false; size];
    for s in (1..size).rev() {
        in_x[s] = local[s]
            && (0..family.m)
                .filter(|&j| s >> j & 1 == 0)
                .all(|j| in_x[s | 1 << j]);
    }
    debug_assert!(full == 0 || in_x[full] == local[full]);

    // Largest non-rejected subset: either the set itself or inside some
    // set with one element removed.
    let mut t_alpha = vec![0u8; size];
    for s in 1..size {
        t_alpha[s] = if in_x[s] {
            (0..family.m)
                .filter(|&j| s >> j & 1 == 1)
                .map(|j| t_alpha[s & !(1 << j)])
                .max()
                .unwrap_or(0)
        } else {
            s.count_ones() as u8
        };
    }
    Ok(ClosureResult {
        m: family.m,
        local,
        in_x,
        t_alpha,
    })
}

/// Comparison of the brute-force closure with its closed forms on one
/// instance.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShortcutCheck {
    pub subsets: usize,
    /// Subsets whose membership in the rejection collection disagrees with
    /// the closed-form criterion.
    pub membership_mismatches: usize,
    /// Subsets whose `t_alpha(I)` disagrees with `|I| min (|I \ R| + V)`.
    pub bound_mismatches: usize,
    /// `Some(false)` when `t_alpha(R(t))` differs from the estimator;
    /// `None` when the estimator is negative infinity and the identity does
    /// not apply.
    pub identity_holds: Option<bool>,
    /// Randomized family only: subsets where `I in X <=> R_I > V'` read
    /// literally fails. Nonzero only when `V'` is negative infinity.
    pub literal_mismatches: usize,
    /// Closure soundness or `t_alpha` monotonicity failures.
    pub invariant_violations: usize,
}

impl ShortcutCheck {
    pub fn mismatches(&self) -> usize {
        self.membership_mismatches
            + self.bound_mismatches
            + self.invariant_violations
            + usize::from(self.identity_holds == Some(false))
    }
}

fn closure_invariant_violations(closure: &ClosureResult) -> usize {
    let mut bad = 0;
    for s in 1..1u32 << closure.m {
        if closure.contains(s) && !closure.local(s) {
            bad += 1;
        }
        for j in 0..closure.m {
            let sub = s & !(1 << j);
            if s >> j & 1 == 1 && sub != 0 && closure.t_alpha(sub) > closure.t_alpha(s) {
                bad += 1;
            }
        }
    }
    bad
}

/// Brute-forces the closure of a reflection family and compares it with
/// the closed forms.
///
/// For the randomized family the shared coin is tied to the estimator's:
/// `b = 1` exactly when `R(t) = R-(t)` and the coin shows tails. The
/// membership criterion checked is `R_I > R- or (b and R_I = R-)`.
pub fn verify_shortcut(kind: FamilyKind, sv: &StatisticVector, t: f64, coin: CoinFlip) -> Result<ShortcutCheck> {
    let profile = build_profile(sv);
    let r_set = mask_of(&profile.rejected(t)?);
    let r = r_set.count_ones() as usize;
    let (r_minus, estimate, b) = match kind {
        FamilyKind::DirectionalBasic | FamilyKind::EquivalenceBasic => {
            let est = plain_estimate(&profile, t);
            (est.r_minus, est.v_tilde, false)
        }
        FamilyKind::EquivalenceWindowed => {
            let rm = windowed_reflected(sv, t).len();
            (rm, Bound::Finite(rm.min(r)), false)
        }
        FamilyKind::DirectionalRandomized => {
            let est = estimate_directional_with_coin(sv, t, coin)?;
            let b = est.r == est.r_minus && coin == CoinFlip::Tails;
            (est.r_minus, est.v_tilde, b)
        }
        FamilyKind::SamSubset => {
            return Err(Error::InvalidArgument("SAM families have no closed form".into()))
        }
    };
    let family = LocalTestFamily::from_statistics(kind, sv, t, b)?;
    let closure = run_closure(&family)?;

    let mut check = ShortcutCheck {
        subsets: (1usize << sv.len()) - 1,
        ..Default::default()
    };
    for s in 1..1u32 << sv.len() {
        let r_i = (s & r_set).count_ones() as usize;
        let expected = r_i > r_minus || (b && r_i == r_minus);
        if closure.contains(s) != expected {
            check.membership_mismatches += 1;
        }
        let literal = match estimate {
            Bound::Finite(v) => r_i > v,
            Bound::NegInfinity => true,
        };
        if kind == FamilyKind::DirectionalRandomized && closure.contains(s) != literal {
            check.literal_mismatches += 1;
        }
        if let Bound::Finite(v) = estimate {
            let outside = (s & !r_set).count_ones() as usize;
            let size = s.count_ones() as usize;
            if closure.t_alpha(s) != size.min(outside + v) {
                check.bound_mismatches += 1;
            }
        }
    }
    check.identity_holds = match estimate {
        Bound::Finite(v) => Some(closure.t_alpha(r_set) == v),
        Bound::NegInfinity => None,
    };
    check.invariant_violations = closure_invariant_violations(&closure);
    Ok(check)
}

/// Summary of many random oracle instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub instances: usize,
    pub mismatches: usize,
    pub family: FamilyKind,
    pub seed: u64,
    pub max_m: usize,
    /// Instances where the bound identity did not apply (`V' = -inf`).
    pub excluded_identity: usize,
    /// Randomized family: instances where the literal `R_I > V'` rule
    /// disagreed with the closure.
    pub literal_mismatch_instances: usize,
}

/// Random statistics on a coarse grid so that ties and boundary hits occur.
pub fn random_instance(kind: FamilyKind, m: usize, rng: &mut ChaCha8Rng) -> Result<(StatisticVector, f64)> {
    let t = f64::from(rng.random_range(0..5u8)) * 0.5;
    match kind {
        FamilyKind::EquivalenceBasic | FamilyKind::EquivalenceWindowed => {
            let margins: Vec<f64> = (0..m).map(|_| f64::from(rng.random_range(2..7u8)) * 0.5).collect();
            let stats = (0..m).map(|_| f64::from(rng.random_range(-32..=32i8)) * 0.25).collect();
            let t = t.min(margins.iter().copied().fold(f64::INFINITY, f64::min) + 0.5);
            Ok((StatisticVector::new(stats, margins, HypothesisShape::Equivalence)?, t))
        }
        _ => {
            let margins: Vec<f64> = (0..m).map(|_| f64::from(rng.random_range(0..3u8)) * 0.5).collect();
            let stats = (0..m).map(|_| f64::from(rng.random_range(-16..=16i8)) * 0.25).collect();
            Ok((StatisticVector::new(stats, margins, HypothesisShape::DirectionalRight)?, t))
        }
    }
}

fn instance_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

/// Runs `instances` random checks with `1 <= m <= max_m`.
///
/// The SAM family has no closed form; its instances check closure
/// soundness, monotonicity of `t_alpha`, and that the closed-testing bound
/// never exceeds plain SAM.
pub fn run_oracle(kind: FamilyKind, max_m: usize, instances: usize, seed: u64, exec: Execution) -> Result<OracleReport> {
    check_m(max_m)?;
    let results: Vec<Result<(usize, bool, bool)>> = exec.map_indexed(instances, |i| {
        let mut rng = instance_rng(seed, i);
        let m = rng.random_range(1..=max_m);
        if kind == FamilyKind::SamSubset {
            return sam_instance(m, &mut rng).map(|bad| (bad, false, false));
        }
        let (sv, t) = random_instance(kind, m, &mut rng)?;
        let coin = if rng.random::<bool>() { CoinFlip::Heads } else { CoinFlip::Tails };
        let check = verify_shortcut(kind, &sv, t, coin)?;
        Ok((check.mismatches(), check.identity_holds.is_none(), check.literal_mismatches > 0))
    });
    let mut report = OracleReport {
        instances,
        mismatches: 0,
        family: kind,
        seed,
        max_m,
        excluded_identity: 0,
        literal_mismatch_instances: 0,
    };
    for r in results {
        let (bad, excluded, literal) = r?;
        report.mismatches += bad;
        report.excluded_identity += usize::from(excluded);
        report.literal_mismatch_instances += usize::from(literal);
    }
    Ok(report)
}

fn sam_instance(m: usize, rng: &mut ChaCha8Rng) -> Result<usize> {
    let n = rng.random_range(2..=6usize);
    let values = (0..n * m).map(|_| f64::from(rng.random_range(-8..=12i8)) * 0.25).collect();
    let dm = DataMatrix::new(n, m, values)?;
    let t = f64::from(rng.random_range(0..4u8)) * 0.5;
    let group = TransformationGroup::new(GroupKind::SignFlipFull { n })?;
    let seq = Execution::Sequential;
    let masks = rejection_masks(&dm, SamStatistic::ScaledColumnSums, &group, t, seq)?;
    let identity = masks[0];
    let closure = run_closure(&LocalTestFamily::sam_subset(m, masks, 0.5)?)?;
    let sam = sam_bound(&dm, SamStatistic::ScaledColumnSums, &group, t, 0.5, seq)?;
    let mut bad = closure_invariant_violations(&closure);
    if sam.v_tilde.finite().is_none_or(|v| closure.t_alpha(identity) > v) {
        bad += 1;
    }
    Ok(bad)
}
