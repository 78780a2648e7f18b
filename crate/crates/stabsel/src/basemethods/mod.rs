//! Base variable selectors behind a single interface: a dataset goes in, a
//! set of selected covariate indices (in the original index space) comes out.

pub mod cmim;
pub mod lasso;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;

pub use cmim::{cmim_select, CmimError};
pub use lasso::{lasso_fit, lasso_lambda_for_count, CountSelection, LassoError, LassoFit};

#[derive(Debug, Error)]
pub enum SelectorError {
    #[error(transparent)]
    Lasso(#[from] LassoError),
    #[error(transparent)]
    Cmim(#[from] CmimError),
    #[error("{0}")]
    Other(String),
}

/// Coordinates of one base call inside an ensemble run. Custom selectors can
/// use them to derive per-call randomness that is independent of scheduling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub iteration: usize,
    pub subsample: usize,
    pub subset: usize,
}

/// A base selection method. Implementations must be pure functions of the
/// dataset and cell so ensemble results do not depend on execution order.
pub trait Selector: Sync {
    /// Selected covariate indices in the original index space of `ds`.
    fn select(&self, ds: &Dataset, cell: &Cell) -> Result<Vec<usize>, SelectorError>;
}

/// The built-in base methods.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaseSelector {
    /// L1-regularized least squares with the penalty chosen so that exactly
    /// `q` covariates are selected.
    Lasso { q: usize },
    /// Greedy conditional-mutual-information maximization picking `q`
    /// covariates, with optional score-update horizon and bin count.
    Cmim { q: usize, horizon: Option<usize>, bins: usize },
}

impl BaseSelector {
    pub fn target_count(&self) -> usize {
        match *self {
            BaseSelector::Lasso { q } | BaseSelector::Cmim { q, .. } => q,
        }
    }

    pub fn with_target_count(&self, q: usize) -> BaseSelector {
        match *self {
            BaseSelector::Lasso { .. } => BaseSelector::Lasso { q },
            BaseSelector::Cmim { horizon, bins, .. } => BaseSelector::Cmim { q, horizon, bins },
        }
    }

    pub fn validate(&self) -> Result<(), SelectorError> {
        match *self {
            BaseSelector::Lasso { q } => {
                if q == 0 {
                    return Err(SelectorError::Other("lasso target count must be >= 1".into()));
                }
            }
            BaseSelector::Cmim { q, horizon, bins } => {
                if q == 0 {
                    return Err(SelectorError::Other("cmim target count must be >= 1".into()));
                }
                if bins < 2 {
                    return Err(CmimError::BinCount(bins).into());
                }
                if horizon == Some(0) {
                    return Err(CmimError::Horizon.into());
                }
            }
        }
        Ok(())
    }
}

impl Selector for BaseSelector {
    fn select(&self, ds: &Dataset, _cell: &Cell) -> Result<Vec<usize>, SelectorError> {
        let local: Vec<usize> = match *self {
            BaseSelector::Lasso { q } => lasso_lambda_for_count(ds, q)?.support,
            BaseSelector::Cmim { q, horizon, bins } => cmim_select(ds, q, horizon, bins)?,
        };
        Ok(local.into_iter().map(|j| ds.original_index(j)).collect())
    }
}
