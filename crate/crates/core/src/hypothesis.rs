//! Hypothesis families and the statistic/margin pairs they are tested with.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which null hypothesis each statistic is tested against.
///
/// `DirectionalRight` is `H_j: mu_j <= delta_j` (noninferiority). `Equivalence`
/// is `H_j: |mu_j| >= delta_j`, so a rejection certifies `mu_j` lies inside
/// `(-delta_j, delta_j)`. Left-sided hypotheses are handled by negating the
/// statistic and its margin, see [`crate::statistics::apply_margin_shift`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HypothesisShape {
    #[serde(alias = "directional")]
    DirectionalRight,
    Equivalence,
}

impl fmt::Display for HypothesisShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HypothesisShape::DirectionalRight => f.write_str("directional"),
            HypothesisShape::Equivalence => f.write_str("equivalence"),
        }
    }
}

/// `m` observed test statistics with their margins.
///
/// The true means are unknown to the analyst and are deliberately not part of
/// this type; simulations carry them in [`crate::simulate::ScenarioTruth`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticVector {
    stats: Vec<f64>,
    margins: Vec<f64>,
    shape: HypothesisShape,
}

impl StatisticVector {
    pub fn new(stats: Vec<f64>, margins: Vec<f64>, shape: HypothesisShape) -> Result<Self> {
        if stats.is_empty() {
            return Err(Error::Empty);
        }
        if stats.len() != margins.len() {
            return Err(Error::LengthMismatch {
                stats: stats.len(),
                margins: margins.len(),
            });
        }
        for (index, &value) in stats.iter().chain(margins.iter()).enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    index: index % stats.len(),
                    value,
                });
            }
        }
        if shape == HypothesisShape::Equivalence {
            if let Some((index, &value)) = margins.iter().enumerate().find(|(_, &d)| d <= 0.0) {
                return Err(Error::NonPositiveMargin { index, value });
            }
        }
        Ok(Self {
            stats,
            margins,
            shape,
        })
    }

    /// Statistics sharing one margin.
    pub fn with_common_margin(stats: Vec<f64>, delta: f64, shape: HypothesisShape) -> Result<Self> {
        let margins = vec![delta; stats.len()];
        Self::new(stats, margins, shape)
    }

    pub fn len(&self) -> usize {
        self.stats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stats.is_empty()
    }

    pub fn stats(&self) -> &[f64] {
        &self.stats
    }

    pub fn margins(&self) -> &[f64] {
        &self.margins
    }

    pub fn shape(&self) -> HypothesisShape {
        self.shape
    }

    pub fn expect_shape(&self, expected: HypothesisShape) -> Result<()> {
        if self.shape == expected {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected,
                found: self.shape,
            })
        }
    }

    /// Smallest margin; for equivalence testing the rejection set is empty
    /// for every threshold at or above it.
    pub fn min_margin(&self) -> f64 {
        self.margins.iter().copied().fold(f64::INFINITY, f64::min)
    }
}
