//! Median-unbiased estimation of the false discovery proportion and
//! median-FDP control for directional and equivalence hypotheses.
//!
//! The estimators only need test statistics that are symmetric about their
//! means. The number of statistics reflected across the margin estimates the
//! number of false rejections:
//!
//! ```
//! use mfdp::{estimate_directional, HypothesisShape, StatisticVector};
//!
//! let sv = StatisticVector::with_common_margin(
//!     vec![3.0, -2.5, 0.5, 4.0],
//!     0.0,
//!     HypothesisShape::DirectionalRight,
//! )
//! .unwrap();
//! let est = estimate_directional(&sv, 1.0).unwrap();
//! assert_eq!((est.r, est.v_tilde.finite(), est.fdp_hat), (2, Some(1), 0.5));
//! ```

pub mod baselines;
pub mod control;
pub mod ct_oracle;
pub mod error;
pub mod estimators;
pub mod exec;
pub mod hypothesis;
pub mod io;
pub mod profile;
pub mod simulate;
pub mod statistics;

pub use control::{
    control_mfdp, directional_pvalues, equivalence_pvalues, ControlResult, NullDensity, NullModel,
    PValueVector, Threshold,
};
pub use error::{Error, Result};
pub use estimators::{
    estimate, estimate_directional, estimate_directional_randomized,
    estimate_directional_with_coin, estimate_equivalence, estimate_equivalence_windowed, Bound,
    CoinFlip, CoinSource, FdpEstimate, Guarantee, Randomization,
};
pub use exec::Execution;
pub use hypothesis::{HypothesisShape, StatisticVector};
pub use profile::{build_profile, RejectionProfile};
pub use statistics::{DataMatrix, GroupLabels, Margins};
