//! Random partitioning of observations and covariates for one iteration:
//! L disjoint observation subsamples of size floor(N/L), and a full partition
//! of the covariates into V subsets of near-equal size.

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PartitionError {
    #[error("subsample count {l} exceeds observation count {n}")]
    TooManySubsamples { l: usize, n: usize },
    #[error("subset count {v} exceeds covariate count {d}")]
    TooManySubsets { v: usize, d: usize },
    #[error("subsample and subset counts must be at least 1")]
    Zero,
}

/// One iteration's draw: disjoint observation subsamples and a disjoint
/// covariate partition. Immutable once drawn; shared read-only by workers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionPlan {
    pub subsamples: Vec<Vec<usize>>,
    pub subsets: Vec<Vec<usize>>,
    pub iteration: usize,
}

/// Draw a plan by uniform shuffle and consecutive cuts.
///
/// Observations: the first `l * floor(n/l)` shuffled indices are cut into
/// `l` blocks; the remainder is unused this iteration. Covariates: all `d`
/// shuffled indices are cut into `v` blocks, the first `d mod v` of size
/// `floor(d/v) + 1`, the rest of size `floor(d/v)`.
pub fn draw_plan(
    n: usize,
    d: usize,
    l: usize,
    v: usize,
    iteration: usize,
    rng: &mut impl Rng,
) -> Result<PartitionPlan, PartitionError> {
    if l == 0 || v == 0 {
        return Err(PartitionError::Zero);
    }
    if l > n {
        return Err(PartitionError::TooManySubsamples { l, n });
    }
    if v > d {
        return Err(PartitionError::TooManySubsets { v, d });
    }

    let mut obs: Vec<usize> = (0..n).collect();
    obs.shuffle(rng);
    let sub_size = n / l;
    let subsamples = (0..l)
        .map(|i| obs[i * sub_size..(i + 1) * sub_size].to_vec())
        .collect();

    let mut cov: Vec<usize> = (0..d).collect();
    cov.shuffle(rng);
    let base = d / v;
    let extra = d % v;
    let mut subsets = Vec::with_capacity(v);
    let mut start = 0;
    for j in 0..v {
        let size = base + usize::from(j < extra);
        subsets.push(cov[start..start + size].to_vec());
        start += size;
    }
    debug_assert_eq!(start, d);

    Ok(PartitionPlan { subsamples, subsets, iteration })
}
