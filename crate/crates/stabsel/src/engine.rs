//! The selection-frequency ensemble: repeat T times a draw of L disjoint
//! observation subsamples and V disjoint covariate subsets, run the base
//! selector on every (subsample, subset) cell, and accumulate how often each
//! covariate is selected. Thresholding the frequencies gives the final set.
//!
//! Frequencies are accumulated as integer counts and divided by L*T only on
//! output, and all partition randomness is consumed sequentially before any
//! cell is dispatched, so results are bit-identical across schedules and
//! thread counts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basemethods::{BaseSelector, Cell, Selector};
use crate::dataset::Dataset;
use crate::partition::{draw_plan, PartitionError};
use crate::{par, seeding};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid engine configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("{failed} of {total} base calls failed (more than 10%); first failure: {first}")]
    TooManyFailures { failed: usize, total: usize, first: String },
    #[error("rank cutoff {k} out of range for {d} covariates")]
    RankCutoff { k: usize, d: usize },
}

/// Whether to keep the per-call audit log.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum AuditMode {
    /// Keep the log unless the run has more than 10^6 cells.
    #[default]
    Auto,
    Enabled,
    Disabled,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Number of partition redraws (T).
    pub iterations: usize,
    /// Disjoint observation subsamples per iteration (L).
    pub subsamples: usize,
    /// Disjoint covariate subsets per iteration (V).
    pub subsets: usize,
    /// Selection-frequency threshold, in (0,1).
    pub tau: f64,
    pub selector: BaseSelector,
    pub seed: u64,
    /// Max concurrent base calls; 0 means one per core.
    pub parallelism: usize,
    pub audit: AuditMode,
}

impl EngineConfig {
    pub fn new(
        iterations: usize,
        subsamples: usize,
        subsets: usize,
        tau: f64,
        selector: BaseSelector,
        seed: u64,
    ) -> Self {
        Self {
            iterations,
            subsamples,
            subsets,
            tau,
            selector,
            seed,
            parallelism: 0,
            audit: AuditMode::Auto,
        }
    }

    fn validate(&self, n: usize, d: usize) -> Result<(), EngineError> {
        if self.iterations == 0 || self.subsamples == 0 || self.subsets == 0 {
            return Err(EngineError::InvalidConfig(
                "iterations, subsamples and subsets must be at least 1".into(),
            ));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(EngineError::InvalidConfig(format!(
                "tau must lie strictly in (0,1), got {}",
                self.tau
            )));
        }
        if self.subsamples > n {
            return Err(EngineError::InvalidConfig(format!(
                "subsample count {} exceeds observation count {n}",
                self.subsamples
            )));
        }
        if self.subsets > d {
            return Err(EngineError::InvalidConfig(format!(
                "subset count {} exceeds covariate count {d}",
                self.subsets
            )));
        }
        self.selector
            .validate()
            .map_err(|e| EngineError::InvalidConfig(e.to_string()))
    }
}

/// What one base call produced.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellOutcome {
    Selected(Vec<usize>),
    Failed(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub cell: Cell,
    pub outcome: CellOutcome,
}

/// Per-covariate selection counts in units of 1/(L*T).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyTable {
    counts: Vec<u64>,
    denominator: u64,
    /// Total base calls attempted (L*V*T).
    pub runs: usize,
    pub failures: usize,
    pub audit: Option<Vec<AuditRecord>>,
}

impl FrequencyTable {
    pub fn d(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// The frequency unit: L*T.
    pub fn denominator(&self) -> u64 {
        self.denominator
    }

    /// Selection frequency of covariate `d`.
    pub fn pi(&self, d: usize) -> f64 {
        self.counts[d] as f64 / self.denominator as f64
    }

    pub fn pis(&self) -> Vec<f64> {
        (0..self.d()).map(|d| self.pi(d)).collect()
    }

    /// Covariates whose frequency reaches `tau`, ascending.
    pub fn selected_at(&self, tau: f64) -> Vec<usize> {
        (0..self.d()).filter(|&d| self.pi(d) >= tau).collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SelectionResult {
    pub table: FrequencyTable,
    /// Covariates at or above the configured threshold, ascending.
    pub selected: Vec<usize>,
    pub config: EngineConfig,
}

/// Run the ensemble with the configured base selector.
pub fn run(ds: &Dataset, cfg: &EngineConfig) -> Result<SelectionResult, EngineError> {
    run_with(ds, cfg, &cfg.selector)
}

/// Run the ensemble with a caller-supplied selector (the configured one is
/// ignored). Used by the experiment drivers and by tests with stub selectors.
pub fn run_with<S: Selector + ?Sized>(
    ds: &Dataset,
    cfg: &EngineConfig,
    selector: &S,
) -> Result<SelectionResult, EngineError> {
    let (n, d) = (ds.n(), ds.d());
    cfg.validate(n, d)?;

    // all plan randomness is drawn up front, sequentially
    let mut rng = seeding::stream(cfg.seed, &[]);
    let mut plans = Vec::with_capacity(cfg.iterations);
    for t in 0..cfg.iterations {
        plans.push(draw_plan(n, d, cfg.subsamples, cfg.subsets, t, &mut rng)?);
    }

    let mut cells = Vec::with_capacity(cfg.iterations * cfg.subsamples * cfg.subsets);
    for t in 0..cfg.iterations {
        for i in 0..cfg.subsamples {
            for j in 0..cfg.subsets {
                cells.push(Cell { iteration: t, subsample: i, subset: j });
            }
        }
    }
    let total = cells.len();

    let outcomes: Vec<CellOutcome> = par::with_pool(cfg.parallelism, || {
        par::map_indexed(total, |idx| {
            let cell = cells[idx];
            let plan = &plans[cell.iteration];
            let view =
                match ds.restrict(&plan.subsamples[cell.subsample], &plan.subsets[cell.subset]) {
                    Ok(v) => v,
                    Err(e) => return CellOutcome::Failed(e.to_string()),
                };
            match selector.select(&view, &cell) {
                Ok(mut sel) => {
                    sel.sort_unstable();
                    sel.dedup();
                    if sel.iter().any(|&s| s >= d) {
                        CellOutcome::Failed("selector returned an out-of-range index".into())
                    } else {
                        CellOutcome::Selected(sel)
                    }
                }
                Err(e) => CellOutcome::Failed(e.to_string()),
            }
        })
    });

    let mut counts = vec![0u64; d];
    let mut failures = 0usize;
    let mut first_failure = None;
    for outcome in &outcomes {
        match outcome {
            CellOutcome::Selected(sel) => {
                for &s in sel {
                    counts[s] += 1;
                }
            }
            CellOutcome::Failed(msg) => {
                failures += 1;
                if first_failure.is_none() {
                    first_failure = Some(msg.clone());
                }
            }
        }
    }
    if failures * 10 > total {
        return Err(EngineError::TooManyFailures {
            failed: failures,
            total,
            first: first_failure.unwrap_or_default(),
        });
    }

    let keep_audit = match cfg.audit {
        AuditMode::Enabled => true,
        AuditMode::Disabled => false,
        AuditMode::Auto => total <= 1_000_000,
    };
    let audit = keep_audit.then(|| {
        cells
            .iter()
            .zip(outcomes)
            .map(|(&cell, outcome)| AuditRecord { cell, outcome })
            .collect()
    });

    let table = FrequencyTable {
        counts,
        denominator: (cfg.subsamples * cfg.iterations) as u64,
        runs: total,
        failures,
        audit,
    };
    let selected = table.selected_at(cfg.tau);
    Ok(SelectionResult { table, selected, config: cfg.clone() })
}

/// Indices of the `k` largest selection frequencies, ties broken by lowest
/// index. Exact: the comparison uses the integer counts.
pub fn rank(table: &FrequencyTable, k: usize) -> Result<Vec<usize>, EngineError> {
    let d = table.d();
    if k == 0 || k > d {
        return Err(EngineError::RankCutoff { k, d });
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| table.counts[b].cmp(&table.counts[a]).then(a.cmp(&b)));
    order.truncate(k);
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::Rng;

    use crate::basemethods::SelectorError;
    use crate::seeding;

    fn noise_dataset(n: usize, d: usize, seed: u64) -> Dataset {
        let mut rng = seeding::stream(seed, &[100]);
        let x = DMatrix::from_fn(n, d, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let y = DVector::from_fn(n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        Dataset::new(x, y, None).unwrap()
    }

    /// Selects the covariate with original index 0 whenever visible.
    struct Constant;
    impl Selector for Constant {
        fn select(&self, ds: &Dataset, _cell: &Cell) -> Result<Vec<usize>, SelectorError> {
            Ok(ds.original_indices().iter().copied().filter(|&d| d == 0).collect())
        }
    }

    fn cfg(t: usize, l: usize, v: usize, tau: f64, seed: u64) -> EngineConfig {
        EngineConfig::new(t, l, v, tau, BaseSelector::Lasso { q: 1 }, seed)
    }

    #[test]
    fn constant_selector_reaches_frequency_one() {
        let ds = noise_dataset(12, 5, 1);
        let result = run_with(&ds, &cfg(5, 2, 1, 0.5, 7), &Constant).unwrap();
        assert_eq!(result.table.pi(0), 1.0);
        for d in 1..5 {
            assert_eq!(result.table.pi(d), 0.0);
        }
        assert_eq!(result.selected, vec![0]);
    }

    #[test]
    fn counting_identity_for_fixed_size_selector() {
        struct TwoPerCall;
        impl Selector for TwoPerCall {
            fn select(&self, ds: &Dataset, _cell: &Cell) -> Result<Vec<usize>, SelectorError> {
                Ok(ds.original_indices()[..2].to_vec())
            }
        }
        let ds = noise_dataset(9, 6, 2);
        let result = run_with(&ds, &cfg(4, 3, 3, 0.5, 11), &TwoPerCall).unwrap();
        let total: u64 = result.table.counts().iter().sum();
        // q * L * V * T selections in units of 1/(L*T)
        assert_eq!(total, 2 * 3 * 3 * 4);
        assert_eq!(total as f64 / result.table.denominator() as f64, 6.0);
    }

    #[test]
    fn frequencies_are_multiples_of_the_unit() {
        let ds = noise_dataset(20, 6, 3);
        let result = run(&ds, &cfg(3, 2, 2, 0.5, 13)).unwrap();
        let den = result.table.denominator();
        for d in 0..6 {
            let c = result.table.counts()[d];
            assert!((0..=den).contains(&c));
            assert_eq!(result.table.pi(d), c as f64 / den as f64);
        }
    }

    #[test]
    fn audit_recount_matches_counts() {
        let ds = noise_dataset(20, 6, 4);
        let mut config = cfg(3, 2, 2, 0.5, 17);
        config.audit = AuditMode::Enabled;
        let result = run(&ds, &config).unwrap();
        let audit = result.table.audit.as_ref().unwrap();
        assert_eq!(audit.len(), result.table.runs);
        let mut recount = vec![0u64; 6];
        for rec in audit {
            if let CellOutcome::Selected(sel) = &rec.outcome {
                for &s in sel {
                    recount[s] += 1;
                }
            }
        }
        assert_eq!(recount.as_slice(), result.table.counts());
    }

    #[test]
    fn schedule_independence() {
        let ds = noise_dataset(24, 8, 5);
        let mut sequential = cfg(4, 2, 2, 0.5, 23);
        sequential.parallelism = 1;
        let mut parallel = sequential.clone();
        parallel.parallelism = 8;
        let a = run(&ds, &sequential).unwrap();
        let b = run(&ds, &parallel).unwrap();
        assert_eq!(a.table, b.table);
        assert_eq!(a.selected, b.selected);
    }

    #[test]
    fn raising_tau_never_adds_covariates() {
        let ds = noise_dataset(20, 6, 6);
        let result = run(&ds, &cfg(5, 2, 2, 0.2, 29)).unwrap();
        let mut prev = result.table.selected_at(0.05);
        for i in 1..20 {
            let tau = 0.05 * i as f64;
            if tau >= 1.0 {
                break;
            }
            let cur = result.table.selected_at(tau);
            assert!(cur.iter().all(|d| prev.contains(d)));
            prev = cur;
        }
    }

    #[test]
    fn failed_cells_contribute_nothing() {
        struct FailOnFirstSubsample;
        impl Selector for FailOnFirstSubsample {
            fn select(&self, ds: &Dataset, cell: &Cell) -> Result<Vec<usize>, SelectorError> {
                if cell.subsample == 0 && cell.iteration < 2 {
                    Err(SelectorError::Other("synthetic failure".into()))
                } else {
                    Ok(vec![ds.original_index(0)])
                }
            }
        }
        // 2 failures out of 40 cells: under the 10% abort threshold
        let ds = noise_dataset(30, 5, 7);
        let result = run_with(&ds, &cfg(20, 2, 1, 0.5, 31), &FailOnFirstSubsample).unwrap();
        assert_eq!(result.table.failures, 2);
        let total: u64 = result.table.counts().iter().sum();
        assert_eq!(total, 38);
    }

    #[test]
    fn aborts_when_too_many_cells_fail() {
        struct AlwaysFail;
        impl Selector for AlwaysFail {
            fn select(&self, _ds: &Dataset, _cell: &Cell) -> Result<Vec<usize>, SelectorError> {
                Err(SelectorError::Other("broken".into()))
            }
        }
        let ds = noise_dataset(10, 4, 8);
        let err = run_with(&ds, &cfg(2, 2, 1, 0.5, 37), &AlwaysFail).unwrap_err();
        assert!(matches!(err, EngineError::TooManyFailures { failed: 4, total: 4, .. }));
    }

    #[test]
    fn unbiasedness_of_frequencies() {
        // a stochastic stub whose per-cell randomness is derived from the
        // cell coordinates, selecting covariate d with probability p(d)
        struct Random {
            seed: u64,
            probs: Vec<f64>,
        }
        impl Selector for Random {
            fn select(&self, ds: &Dataset, cell: &Cell) -> Result<Vec<usize>, SelectorError> {
                let mut rng = seeding::stream(
                    self.seed,
                    &[cell.iteration as u64, cell.subsample as u64, cell.subset as u64],
                );
                Ok(ds
                    .original_indices()
                    .iter()
                    .copied()
                    .filter(|&d| rng.random::<f64>() < self.probs[d])
                    .collect())
            }
        }
        let probs = [0.1, 0.5, 0.9];
        let ds = noise_dataset(8, 3, 9);
        let runs = 200;
        let (t, l) = (10, 2);
        let mut sums = [0.0; 3];
        for r in 0..runs {
            let sel = Random { seed: 1000 + r, probs: probs.to_vec() };
            let result = run_with(&ds, &cfg(t, l, 1, 0.5, 2000 + r), &sel).unwrap();
            for (d, sum) in sums.iter_mut().enumerate() {
                *sum += result.table.pi(d);
            }
        }
        for (d, (&sum, &p)) in sums.iter().zip(&probs).enumerate() {
            let mean = sum / runs as f64;
            let se = (p * (1.0 - p) / (t * l * runs as usize) as f64).sqrt();
            assert!((mean - p).abs() <= 3.0 * se, "covariate {d}: mean {mean} vs p {p}");
        }
    }

    #[test]
    fn rank_orders_by_count_with_low_index_ties() {
        let table = FrequencyTable {
            counts: vec![5, 9, 5],
            denominator: 10,
            runs: 10,
            failures: 0,
            audit: None,
        };
        assert_eq!(rank(&table, 2).unwrap(), vec![1, 0]);
        assert_eq!(rank(&table, 3).unwrap(), vec![1, 0, 2]);
        let flat = FrequencyTable {
            counts: vec![3, 3, 3],
            denominator: 10,
            runs: 10,
            failures: 0,
            audit: None,
        };
        assert_eq!(rank(&flat, 3).unwrap(), vec![0, 1, 2]);
        assert!(matches!(rank(&flat, 0), Err(EngineError::RankCutoff { .. })));
        assert!(matches!(rank(&flat, 4), Err(EngineError::RankCutoff { .. })));
    }

    #[test]
    fn deterministic_in_seed() {
        let ds = noise_dataset(20, 6, 10);
        let a = run(&ds, &cfg(3, 2, 2, 0.5, 41)).unwrap();
        let b = run(&ds, &cfg(3, 2, 2, 0.5, 41)).unwrap();
        assert_eq!(a.table, b.table);
    }

    #[test]
    fn rejects_invalid_configs() {
        let ds = noise_dataset(10, 4, 11);
        assert!(run(&ds, &cfg(0, 2, 1, 0.5, 1)).is_err());
        assert!(run(&ds, &cfg(1, 11, 1, 0.5, 1)).is_err());
        assert!(run(&ds, &cfg(1, 2, 5, 0.5, 1)).is_err());
        assert!(run(&ds, &cfg(1, 2, 1, 1.0, 1)).is_err());
    }
}
