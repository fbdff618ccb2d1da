//! Unit-level data for the estimators: one record per experimental unit
//! with a binary treatment, an ordinal outcome, and optional covariates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("dataset has no units")]
    Empty,
    #[error("arm {arm} has no units")]
    EmptyArm { arm: u8 },
    #[error("treatment must be 0 or 1, unit {index} has {value}")]
    BadTreatment { index: usize, value: u8 },
    #[error("outcome {outcome} out of range for {categories} categories at unit {index}")]
    OutcomeOutOfRange { index: usize, outcome: usize, categories: usize },
    #[error("unit {index} has {got} covariates, expected {expected}")]
    CovariateShapeMismatch { index: usize, got: usize, expected: usize },
    #[error("covariate for unit {index} is not finite")]
    NonFiniteCovariate { index: usize },
    #[error("need at least 2 outcome categories, got {0}")]
    TooFewCategories(usize),
}

/// One experimental unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitRecord {
    pub treatment: u8,
    pub outcome: usize,
    #[serde(default)]
    pub covariates: Vec<f64>,
}

/// A validated dataset: rectangular covariates, outcomes within range.
/// Arms may be empty here; estimators that need both arms check for
/// themselves, so bootstrap resamples can fail softly.
#[derive(Debug, Clone)]
pub struct Dataset {
    units: Vec<UnitRecord>,
    num_categories: usize,
    num_covariates: usize,
}

impl Dataset {
    pub fn new(units: Vec<UnitRecord>, num_categories: usize) -> Result<Self, DataError> {
        if units.is_empty() {
            return Err(DataError::Empty);
        }
        if num_categories < 2 {
            return Err(DataError::TooFewCategories(num_categories));
        }
        let num_covariates = units[0].covariates.len();
        for (index, unit) in units.iter().enumerate() {
            if unit.treatment > 1 {
                return Err(DataError::BadTreatment { index, value: unit.treatment });
            }
            if unit.outcome >= num_categories {
                return Err(DataError::OutcomeOutOfRange {
                    index,
                    outcome: unit.outcome,
                    categories: num_categories,
                });
            }
            if unit.covariates.len() != num_covariates {
                return Err(DataError::CovariateShapeMismatch {
                    index,
                    got: unit.covariates.len(),
                    expected: num_covariates,
                });
            }
            if unit.covariates.iter().any(|v| !v.is_finite()) {
                return Err(DataError::NonFiniteCovariate { index });
            }
        }
        Ok(Self { units, num_categories, num_covariates })
    }

    /// Category count inferred as one past the largest observed outcome.
    pub fn with_inferred_categories(units: Vec<UnitRecord>) -> Result<Self, DataError> {
        let max = units.iter().map(|u| u.outcome).max().ok_or(DataError::Empty)?;
        Self::new(units, (max + 1).max(2))
    }

    /// Expands per-category counts into covariate-free unit records.
    pub fn from_counts(treated: &[u64], control: &[u64]) -> Result<Self, DataError> {
        if treated.len() != control.len() {
            return Err(DataError::CovariateShapeMismatch {
                index: 0,
                got: control.len(),
                expected: treated.len(),
            });
        }
        let mut units = Vec::new();
        for (arm, counts) in [(1u8, treated), (0u8, control)] {
            for (outcome, &count) in counts.iter().enumerate() {
                for _ in 0..count {
                    units.push(UnitRecord { treatment: arm, outcome, covariates: Vec::new() });
                }
            }
            if counts.iter().all(|&c| c == 0) {
                return Err(DataError::EmptyArm { arm });
            }
        }
        Self::new(units, treated.len())
    }

    pub fn units(&self) -> &[UnitRecord] {
        &self.units
    }

    pub fn num_units(&self) -> usize {
        self.units.len()
    }

    pub fn num_categories(&self) -> usize {
        self.num_categories
    }

    pub fn num_covariates(&self) -> usize {
        self.num_covariates
    }

    pub fn arm_size(&self, arm: u8) -> usize {
        self.units.iter().filter(|u| u.treatment == arm).count()
    }

    /// New dataset built from the units at `indices`, in order.
    pub fn resample(&self, indices: &[usize]) -> Self {
        let units = indices.iter().map(|&i| self.units[i].clone()).collect();
        Self {
            units,
            num_categories: self.num_categories,
            num_covariates: self.num_covariates,
        }
    }
}
