//! Greedy conditional-mutual-information-maximization feature selection.
//!
//! The first pick maximizes the plug-in mutual information with the response;
//! each later pick maximizes the minimum, over already-selected covariates,
//! of the conditional mutual information given that covariate. An optional
//! update horizon `k` freezes the scores after the first `k` picks, so the
//! remaining covariates are chosen by their frozen scores in one pass.
//!
//! Continuous covariates are discretized into equal-frequency bins; a
//! response with more than two distinct values is median-split.

use thiserror::Error;

use crate::dataset::Dataset;

#[derive(Debug, Error)]
pub enum CmimError {
    #[error("target count {q} out of range; need 1 <= q <= D = {d}")]
    CountOutOfRange { q: usize, d: usize },
    #[error("bin count must be at least 2, got {0}")]
    BinCount(usize),
    #[error("update horizon must be at least 1")]
    Horizon,
}

/// Equal-frequency binning by midrank: a tie group occupying sorted positions
/// `p..=pe` lands in bin `floor(bins * (p + pe + 1) / (2n))`, the bin holding
/// the bulk of its mass. Distinct values at distinct ranks spread evenly; a
/// constant column collapses to a single bin.
pub fn discretize_equal_frequency(col: &[f64], bins: usize) -> Vec<u32> {
    let n = col.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
    let mut out = vec![0u32; n];
    let mut p = 0;
    while p < n {
        let mut pe = p;
        while pe + 1 < n && col[order[pe + 1]] == col[order[p]] {
            pe += 1;
        }
        let midrank = (p + pe + 1) as f64 / (2 * n) as f64;
        let bin = ((midrank * bins as f64).floor() as usize).min(bins - 1);
        for &idx in &order[p..=pe] {
            out[idx] = bin as u32;
        }
        p = pe + 1;
    }
    out
}

fn alphabet(labels: &[u32]) -> usize {
    labels.iter().copied().max().map_or(1, |m| m as usize + 1)
}

/// Plug-in mutual information (natural log) of two label sequences.
pub fn mutual_information(x: &[u32], y: &[u32]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    let (nx, ny) = (alphabet(x), alphabet(y));
    let mut joint = vec![0u32; nx * ny];
    let mut cx = vec![0u32; nx];
    let mut cy = vec![0u32; ny];
    for (&a, &b) in x.iter().zip(y) {
        joint[a as usize * ny + b as usize] += 1;
        cx[a as usize] += 1;
        cy[b as usize] += 1;
    }
    let nf = n as f64;
    let mut mi = 0.0;
    for a in 0..nx {
        for b in 0..ny {
            let c = joint[a * ny + b];
            if c > 0 {
                let p = f64::from(c) / nf;
                mi += p * ((f64::from(c) * nf) / (f64::from(cx[a]) * f64::from(cy[b]))).ln();
            }
        }
    }
    mi.max(0.0)
}

/// Plug-in conditional mutual information I(X;Y|Z): the Z-stratum MI values
/// weighted by the empirical stratum probabilities.
pub fn conditional_mutual_information(x: &[u32], y: &[u32], z: &[u32]) -> f64 {
    assert_eq!(x.len(), y.len());
    assert_eq!(x.len(), z.len());
    let n = x.len();
    let (nx, ny, nz) = (alphabet(x), alphabet(y), alphabet(z));
    let mut joint = vec![0u32; nx * ny * nz];
    let mut cxz = vec![0u32; nx * nz];
    let mut cyz = vec![0u32; ny * nz];
    let mut cz = vec![0u32; nz];
    for ((&a, &b), &c) in x.iter().zip(y).zip(z) {
        joint[(c as usize * nx + a as usize) * ny + b as usize] += 1;
        cxz[c as usize * nx + a as usize] += 1;
        cyz[c as usize * ny + b as usize] += 1;
        cz[c as usize] += 1;
    }
    let nf = n as f64;
    let mut cmi = 0.0;
    for s in 0..nz {
        if cz[s] == 0 {
            continue;
        }
        let nzf = f64::from(cz[s]);
        let mut stratum = 0.0;
        for a in 0..nx {
            for b in 0..ny {
                let c = joint[(s * nx + a) * ny + b];
                if c > 0 {
                    let p = f64::from(c) / nzf;
                    stratum += p
                        * ((f64::from(c) * nzf)
                            / (f64::from(cxz[s * nx + a]) * f64::from(cyz[s * ny + b])))
                        .ln();
                }
            }
        }
        cmi += (nzf / nf) * stratum.max(0.0);
    }
    cmi
}

fn discretize_response(y: &[f64]) -> Vec<u32> {
    let mut distinct: Vec<f64> = y.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() <= 2 {
        y.iter()
            .map(|v| u32::from(distinct.len() == 2 && *v == distinct[1]))
            .collect()
    } else {
        discretize_equal_frequency(y, 2)
    }
}

/// Greedy CMIM order of length `q`, ties broken by lowest column index.
///
/// `horizon` of `None` runs the full recursion; `Some(k)` stops updating
/// scores after the k-th pick.
pub fn cmim_select(
    ds: &Dataset,
    q: usize,
    horizon: Option<usize>,
    bins: usize,
) -> Result<Vec<usize>, CmimError> {
    let d = ds.d();
    if q == 0 || q > d {
        return Err(CmimError::CountOutOfRange { q, d });
    }
    if bins < 2 {
        return Err(CmimError::BinCount(bins));
    }
    if horizon == Some(0) {
        return Err(CmimError::Horizon);
    }

    let binned: Vec<Vec<u32>> = (0..d)
        .map(|j| {
            let col: Vec<f64> = ds.x().column(j).iter().copied().collect();
            discretize_equal_frequency(&col, bins)
        })
        .collect();
    let y: Vec<f64> = ds.y().iter().copied().collect();
    let yb = discretize_response(&y);

    // the first pick maximizes the plain mutual information; every later
    // pick maximizes the min over already-selected covariates of the
    // conditional mutual information, so the first conditioning replaces the
    // plain score rather than joining the min
    let mut score: Vec<f64> = (0..d).map(|j| mutual_information(&binned[j], &yb)).collect();
    let mut conditioned = false;
    let mut selected: Vec<usize> = Vec::with_capacity(q);
    let mut taken = vec![false; d];

    while selected.len() < q {
        let mut best = usize::MAX;
        let mut best_score = f64::NEG_INFINITY;
        for j in 0..d {
            if !taken[j] && score[j] > best_score {
                best_score = score[j];
                best = j;
            }
        }
        taken[best] = true;
        selected.push(best);
        let within_horizon = horizon.is_none_or(|k| selected.len() <= k);
        if within_horizon && selected.len() < q {
            for j in 0..d {
                if !taken[j] {
                    let cond = conditional_mutual_information(&binned[j], &yb, &binned[best]);
                    if !conditioned || cond < score[j] {
                        score[j] = cond;
                    }
                }
            }
            conditioned = true;
        }
    }
    Ok(selected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::Rng;

    use crate::seeding;

    fn dataset_from_cols(cols: Vec<Vec<f64>>, y: Vec<f64>) -> Dataset {
        let n = y.len();
        let d = cols.len();
        let x = DMatrix::from_fn(n, d, |i, j| cols[j][i]);
        Dataset::new(x, DVector::from_vec(y), None).unwrap()
    }

    #[test]
    fn binning_splits_binary_columns() {
        assert_eq!(discretize_equal_frequency(&[0.0, 1.0, 1.0, 0.0], 2), vec![0, 1, 1, 0]);
        // skewed binary still separates the two values, either direction
        assert_eq!(discretize_equal_frequency(&[0.0, 1.0, 1.0, 1.0], 2), vec![0, 1, 1, 1]);
        assert_eq!(
            discretize_equal_frequency(&[1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0], 2),
            vec![1, 1, 0, 0, 0, 0, 1, 0]
        );
    }

    #[test]
    fn binning_handles_constants_and_quartiles() {
        // a constant column collapses to one bin (the middle one)
        assert_eq!(discretize_equal_frequency(&[3.0; 5], 4), vec![2; 5]);
        let col = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        assert_eq!(discretize_equal_frequency(&col, 4), vec![0, 0, 1, 1, 2, 2, 3, 3]);
    }

    #[test]
    fn mi_detects_identity_and_independence() {
        let x = vec![0u32, 1, 0, 1, 0, 1, 0, 1];
        let same = mutual_information(&x, &x);
        assert!((same - std::f64::consts::LN_2).abs() < 1e-12);
        let indep = vec![0u32, 0, 1, 1, 0, 0, 1, 1];
        assert!(mutual_information(&x, &indep).abs() < 1e-12);
    }

    #[test]
    fn mi_nonnegative_and_entropy_bounded() {
        let mut rng = seeding::stream(17, &[]);
        for _ in 0..200 {
            let n = 16;
            let x: Vec<u32> = (0..n).map(|_| rng.random_range(0..3u32)).collect();
            let y: Vec<u32> = (0..n).map(|_| rng.random_range(0..2u32)).collect();
            let mi = mutual_information(&x, &y);
            assert!(mi >= 0.0);
            let entropy = |v: &[u32]| {
                let k = alphabet(v);
                let mut c = vec![0usize; k];
                v.iter().for_each(|&a| c[a as usize] += 1);
                -c.iter()
                    .filter(|&&ci| ci > 0)
                    .map(|&ci| {
                        let p = ci as f64 / n as f64;
                        p * p.ln()
                    })
                    .sum::<f64>()
            };
            assert!(mi <= entropy(&x).min(entropy(&y)) + 1e-12);
        }
    }

    #[test]
    fn conditional_mi_vanishes_given_the_same_variable() {
        let x = vec![0u32, 1, 0, 1, 1, 0];
        let y = vec![0u32, 1, 0, 1, 1, 1];
        assert!(conditional_mutual_information(&x, &y, &x).abs() < 1e-12);
    }

    #[test]
    fn first_pick_is_the_response_copy() {
        // column 1 determines the response exactly
        let cols = vec![
            vec![0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0],
            vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0],
            vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0],
        ];
        let y = cols[1].clone();
        let ds = dataset_from_cols(cols, y);
        let order = cmim_select(&ds, 3, None, 2).unwrap();
        assert_eq!(order[0], 1);
    }

    #[test]
    fn constant_covariate_scores_zero_without_error() {
        let cols = vec![
            vec![5.0; 8],
            vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0],
        ];
        let y = cols[1].clone();
        let ds = dataset_from_cols(cols, y);
        let order = cmim_select(&ds, 2, None, 2).unwrap();
        assert_eq!(order, vec![1, 0]);
    }

    #[test]
    fn output_has_no_duplicates_and_full_length() {
        let mut rng = seeding::stream(23, &[]);
        for _ in 0..20 {
            let d = rng.random_range(2..6usize);
            let cols: Vec<Vec<f64>> = (0..d)
                .map(|_| (0..12).map(|_| f64::from(rng.random_range(0..2u32))).collect())
                .collect();
            let y: Vec<f64> = (0..12).map(|_| f64::from(rng.random_range(0..2u32))).collect();
            let ds = dataset_from_cols(cols, y);
            let order = cmim_select(&ds, d, None, 2).unwrap();
            let mut sorted = order.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), d);
        }
    }

    #[test]
    fn long_horizon_matches_unbounded() {
        let mut rng = seeding::stream(29, &[]);
        for _ in 0..20 {
            let cols: Vec<Vec<f64>> = (0..5)
                .map(|_| (0..10).map(|_| f64::from(rng.random_range(0..2u32))).collect())
                .collect();
            let y: Vec<f64> = (0..10).map(|_| f64::from(rng.random_range(0..2u32))).collect();
            let ds = dataset_from_cols(cols, y);
            let full = cmim_select(&ds, 5, None, 2).unwrap();
            let capped = cmim_select(&ds, 5, Some(5), 2).unwrap();
            assert_eq!(full, capped);
        }
    }

    #[test]
    fn horizon_freezes_scores() {
        // with horizon 1 every pick after the first uses the score
        // min(I(X;Y), I(X;Y|first)); verify against a direct evaluation
        let mut rng = seeding::stream(31, &[]);
        let cols: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..16).map(|_| f64::from(rng.random_range(0..2u32))).collect())
            .collect();
        let y: Vec<f64> = cols[0].iter().zip(&cols[1]).map(|(a, b)| (a + b) % 2.0).collect();
        let ds = dataset_from_cols(cols.clone(), y.clone());
        let order = cmim_select(&ds, 4, Some(1), 2).unwrap();

        let binned: Vec<Vec<u32>> =
            cols.iter().map(|c| discretize_equal_frequency(c, 2)).collect();
        let yb = discretize_response(&y);
        let mut first = 0usize;
        let mut best = f64::NEG_INFINITY;
        for (j, b) in binned.iter().enumerate() {
            let mi = mutual_information(b, &yb);
            if mi > best {
                best = mi;
                first = j;
            }
        }
        assert_eq!(order[0], first);
        let frozen: Vec<f64> = (0..4)
            .map(|j| conditional_mutual_information(&binned[j], &yb, &binned[first]))
            .collect();
        let mut rest: Vec<usize> = (0..4).filter(|&j| j != first).collect();
        rest.sort_by(|&a, &b| frozen[b].total_cmp(&frozen[a]).then(a.cmp(&b)));
        assert_eq!(&order[1..], &rest[..]);
    }

    #[test]
    fn rejects_invalid_parameters() {
        let ds = dataset_from_cols(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![0.0, 1.0]);
        assert!(matches!(
            cmim_select(&ds, 0, None, 2),
            Err(CmimError::CountOutOfRange { .. })
        ));
        assert!(matches!(
            cmim_select(&ds, 3, None, 2),
            Err(CmimError::CountOutOfRange { .. })
        ));
        assert!(matches!(cmim_select(&ds, 1, None, 1), Err(CmimError::BinCount(1))));
        assert!(matches!(cmim_select(&ds, 1, Some(0), 2), Err(CmimError::Horizon)));
    }

    #[test]
    fn row_order_invariance() {
        let mut rng = seeding::stream(37, &[]);
        let cols: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..14).map(|_| rng.random::<f64>()).collect())
            .collect();
        let y: Vec<f64> = (0..14).map(|_| f64::from(rng.random_range(0..2u32))).collect();
        let ds = dataset_from_cols(cols, y);
        let mut perm: Vec<usize> = (0..14).collect();
        perm.reverse();
        let shuffled = ds.restrict(&perm, &[0, 1, 2, 3]).unwrap();
        assert_eq!(
            cmim_select(&ds, 4, None, 2).unwrap(),
            cmim_select(&shuffled, 4, None, 2).unwrap()
        );
    }
}
