//! L1-regularized least squares by cyclic coordinate descent, and the
//! grid-plus-bisection search for the largest penalty selecting an exact
//! number of covariates.
//!
//! The objective is `||y - X b||^2 + lambda * |b|_1` on the standardized
//! problem: columns centered and scaled to unit Euclidean norm, response
//! centered. Reported supports refer to the columns of the input dataset.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::dataset::Dataset;

pub const DEFAULT_MAX_SWEEPS: usize = 10_000;
/// Grid points for the exact-count search.
pub const DEFAULT_GRID_POINTS: usize = 400;
/// The grid spans `[GRID_FLOOR * lambda_max, lambda_max]`, geometrically.
pub const GRID_FLOOR: f64 = 1e-4;
/// Convergence requires the max KKT violation to be at most this times
/// `lambda_max`.
pub const KKT_RTOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum LassoError {
    #[error("penalty must be finite and nonnegative, got {0}")]
    InvalidPenalty(f64),
    #[error("coordinate descent did not converge after {sweeps} sweeps (KKT residual {residual:e}, tolerance {tolerance:e})")]
    NonConvergence { sweeps: usize, residual: f64, tolerance: f64 },
    #[error("target count {q} out of range; need 1 <= q <= min(N-1, D) = {max}")]
    CountOutOfRange { q: usize, max: usize },
}

/// A converged coordinate-descent solution on the standardized problem.
#[derive(Clone, Debug)]
pub struct LassoFit {
    /// Coefficients for the standardized (centered, unit-norm) columns.
    pub beta: DVector<f64>,
    pub lambda: f64,
    /// Attained value of `||y - X b||^2 + lambda |b|_1`.
    pub objective: f64,
    /// Max violation of the subgradient conditions at the solution.
    pub kkt_residual: f64,
    /// `max_j |2 x_j^T y|` for the standardized problem; the smallest penalty
    /// with an all-zero solution.
    pub lambda_max: f64,
    pub sweeps: usize,
    /// Objective value after each sweep, in order.
    pub objective_trace: Vec<f64>,
}

impl LassoFit {
    /// Column indices with nonzero coefficients, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.beta
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != 0.0)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn support_size(&self) -> usize {
        self.beta.iter().filter(|&&b| b != 0.0).count()
    }
}

/// Standardized copy of a dataset. Near-constant columns are zeroed out so
/// they can never enter the support.
struct Standardized {
    x: DMatrix<f64>,
    y: DVector<f64>,
    lambda_max: f64,
}

fn standardize(ds: &Dataset) -> Standardized {
    let n = ds.n();
    let d = ds.d();
    let mut x = ds.x().clone();
    for j in 0..d {
        let mut col = x.column_mut(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        col.iter_mut().for_each(|v| *v -= mean);
        let norm = col.norm();
        if norm > 1e-12 {
            col /= norm;
        } else {
            col.iter_mut().for_each(|v| *v = 0.0);
        }
    }
    let mut y = ds.y().clone();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    y.iter_mut().for_each(|v| *v -= y_mean);

    let correlations = x.tr_mul(&y);
    let lambda_max = correlations.iter().fold(0.0f64, |acc, &c| acc.max((2.0 * c).abs()));
    Standardized { x, y, lambda_max }
}

#[derive(Clone)]
struct CdState {
    beta: DVector<f64>,
    residual: DVector<f64>,
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Rebuild the residual from the nonzero coefficients only.
fn refresh_residual(std: &Standardized, state: &mut CdState) {
    state.residual.copy_from(&std.y);
    for (j, &b) in state.beta.iter().enumerate() {
        if b != 0.0 {
            state.residual.axpy(-b, &std.x.column(j), 1.0);
        }
    }
}

fn objective(state: &CdState, lambda: f64) -> f64 {
    state.residual.norm_squared() + lambda * state.beta.iter().map(|b| b.abs()).sum::<f64>()
}


fn kkt_residual(std: &Standardized, state: &CdState, lambda: f64) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..std.x.ncols() {
        let c = 2.0 * std.x.column(j).dot(&state.residual);
        let viol = if state.beta[j] != 0.0 {
            (c - lambda * state.beta[j].signum()).abs()
        } else {
            (c.abs() - lambda).max(0.0)
        };
        worst = worst.max(viol);
    }
    worst
}

struct FitStats {
    kkt: f64,
    sweeps: usize,
    trace: Vec<f64>,
}

/// Working-set bookkeeping for Gram-based sweeps: inner products among the
/// working columns, the working-coordinate gradients, and running values of
/// the residual sum of squares and the coefficient l1 norm.
struct WorkingSet {
    coords: Vec<usize>,
    gram: Vec<f64>,
    grad: Vec<f64>,
    rss: f64,
    l1: f64,
}

impl WorkingSet {
    /// Rebuild from the current (fresh) residual and full gradient vector.
    fn rebuild(
        std: &Standardized,
        state: &CdState,
        coords: Vec<usize>,
        gradient: &DVector<f64>,
    ) -> Self {
        let w = coords.len();
        let mut gram = vec![0.0; w * w];
        for a in 0..w {
            gram[a * w + a] = std.x.column(coords[a]).norm_squared();
            for b in 0..a {
                let dot = std.x.column(coords[a]).dot(&std.x.column(coords[b]));
                gram[a * w + b] = dot;
                gram[b * w + a] = dot;
            }
        }
        let grad = coords.iter().map(|&j| gradient[j]).collect();
        let rss = state.residual.norm_squared();
        let l1 = state.beta.iter().map(|b| b.abs()).sum();
        WorkingSet { coords, gram, grad, rss, l1 }
    }

    /// One cyclic pass; returns the largest coefficient change. Unit-norm
    /// columns make each update a soft threshold, and the gradients update
    /// through the Gram row in O(|W|).
    fn sweep(&mut self, beta: &mut DVector<f64>, lambda: f64) -> f64 {
        let w = self.coords.len();
        let mut max_delta = 0.0f64;
        for p in 0..w {
            let j = self.coords[p];
            let old = beta[j];
            let g_pre = self.grad[p];
            let new = soft_threshold(g_pre + old, lambda / 2.0);
            if new != old {
                let diff = new - old;
                for m in 0..w {
                    self.grad[m] -= diff * self.gram[m * w + p];
                }
                self.rss += diff * (diff - 2.0 * g_pre);
                self.l1 += new.abs() - old.abs();
                beta[j] = new;
                max_delta = max_delta.max(diff.abs());
            }
        }
        max_delta
    }

    /// Working-set KKT residual from the maintained gradients.
    fn kkt(&self, beta: &DVector<f64>, lambda: f64) -> f64 {
        let mut kkt = 0.0f64;
        for (p, &j) in self.coords.iter().enumerate() {
            let c = 2.0 * self.grad[p];
            let viol = if beta[j] != 0.0 {
                (c - lambda * beta[j].signum()).abs()
            } else {
                (c.abs() - lambda).max(0.0)
            };
            kkt = kkt.max(viol);
        }
        kkt
    }

    fn objective(&self, lambda: f64) -> f64 {
        self.rss + lambda * self.l1
    }
}

/// Coordinate descent from a warm start until the KKT conditions hold.
///
/// Iterates on a growing working set with Gram-based sweeps, then makes one
/// full gradient pass; that pass is both the KKT check and the screen that
/// pulls violating coordinates into the set.
fn solve(
    std: &Standardized,
    lambda: f64,
    warm: Option<CdState>,
    max_sweeps: usize,
) -> Result<(CdState, FitStats), LassoError> {
    let d = std.x.ncols();
    let mut state = match warm {
        Some(mut s) => {
            // refresh the residual so drift from earlier fits cannot accumulate
            refresh_residual(std, &mut s);
            s
        }
        None => CdState { beta: DVector::zeros(d), residual: std.y.clone() },
    };
    let tolerance = KKT_RTOL * std.lambda_max;
    // the unregularized limit is judged on coefficient accuracy, not just on
    // the subgradient residual, so converge it harder
    let inner_tolerance = if lambda == 0.0 { tolerance * 1e-3 } else { tolerance };

    let mut working: Vec<usize> = state
        .beta
        .iter()
        .enumerate()
        .filter(|(_, &b)| b != 0.0)
        .map(|(j, _)| j)
        .collect();
    let mut in_working = vec![false; d];
    for &j in &working {
        in_working[j] = true;
    }
    let mut gradient = std.x.tr_mul(&state.residual);

    let mut sweeps = 0usize;
    let mut trace = Vec::new();
    loop {
        let mut set = WorkingSet::rebuild(std, &state, working, &gradient);
        while !set.coords.is_empty() {
            set.sweep(&mut state.beta, lambda);
            sweeps += 1;
            trace.push(set.objective(lambda));
            if set.kkt(&state.beta, lambda) <= inner_tolerance {
                break;
            }
            if sweeps >= max_sweeps {
                refresh_residual(std, &mut state);
                let kkt = kkt_residual(std, &state, lambda);
                return Err(LassoError::NonConvergence { sweeps, residual: kkt, tolerance });
            }
        }
        working = set.coords;

        // full pass: the KKT check doubles as the screen pulling violating
        // coordinates into the working set
        refresh_residual(std, &mut state);
        gradient = std.x.tr_mul(&state.residual);
        let mut kkt = 0.0f64;
        for j in 0..d {
            let c = 2.0 * gradient[j];
            let viol = if state.beta[j] != 0.0 {
                (c - lambda * state.beta[j].signum()).abs()
            } else {
                (c.abs() - lambda).max(0.0)
            };
            kkt = kkt.max(viol);
            if viol > tolerance && !in_working[j] {
                in_working[j] = true;
                working.push(j);
            }
        }
        if kkt <= tolerance {
            return Ok((state, FitStats { kkt, sweeps, trace }));
        }
        if sweeps >= max_sweeps {
            return Err(LassoError::NonConvergence { sweeps, residual: kkt, tolerance });
        }
    }
}

fn build_fit(std: &Standardized, state: CdState, stats: FitStats, lambda: f64) -> LassoFit {
    let objective = objective(&state, lambda);
    LassoFit {
        beta: state.beta,
        lambda,
        objective,
        kkt_residual: stats.kkt,
        lambda_max: std.lambda_max,
        sweeps: stats.sweeps,
        objective_trace: stats.trace,
    }
}

/// Fit at a single penalty value.
pub fn lasso_fit(ds: &Dataset, lambda: f64) -> Result<LassoFit, LassoError> {
    lasso_fit_with(ds, lambda, DEFAULT_MAX_SWEEPS)
}

pub fn lasso_fit_with(
    ds: &Dataset,
    lambda: f64,
    max_sweeps: usize,
) -> Result<LassoFit, LassoError> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(LassoError::InvalidPenalty(lambda));
    }
    let std = standardize(ds);
    let (state, stats) = solve(&std, lambda, None, max_sweeps)?;
    Ok(build_fit(&std, state, stats, lambda))
}

/// The smallest penalty with an all-zero solution for this dataset.
pub fn lambda_max(ds: &Dataset) -> f64 {
    standardize(ds).lambda_max
}

/// Result of the exact-count penalty search.
#[derive(Clone, Debug)]
pub struct CountSelection {
    pub lambda: f64,
    /// Column indices of the nonzero coefficients, ascending.
    pub support: Vec<usize>,
    /// False when no penalty attained exactly the requested count and the
    /// returned solution has the largest attainable count below it.
    pub exact: bool,
    pub fit: LassoFit,
}

/// Find the largest penalty whose solution has exactly `q` nonzero
/// coefficients.
///
/// Walks a geometric grid downward from `lambda_max` with warm starts; the
/// first grid point attaining the count is refined upward by bisection
/// against its larger neighbour. Where the support count jumps past `q`
/// between neighbours, bisection searches the gap; if the whole grid fails
/// to attain the count, the solution with the largest count below `q` is
/// returned with `exact = false`.
pub fn lasso_lambda_for_count(ds: &Dataset, q: usize) -> Result<CountSelection, LassoError> {
    let max_q = ds.n().saturating_sub(1).min(ds.d());
    if q == 0 || q > max_q {
        return Err(LassoError::CountOutOfRange { q, max: max_q });
    }
    let std = standardize(ds);
    if std.lambda_max == 0.0 {
        // degenerate response: every penalty gives the empty support
        let (state, stats) = solve(&std, 0.0, None, DEFAULT_MAX_SWEEPS)?;
        let fit = build_fit(&std, state, stats, 0.0);
        return Ok(CountSelection { lambda: 0.0, support: fit.support(), exact: false, fit });
    }

    let points = DEFAULT_GRID_POINTS;
    let ratio = GRID_FLOOR.powf(1.0 / (points - 1) as f64);
    let grid: Vec<f64> = (0..points).map(|i| std.lambda_max * ratio.powi(i as i32)).collect();

    let mut warm: Option<CdState> = None;
    let mut prev_lambda = std.lambda_max;
    // largest count observed below q, largest lambda first
    let mut best_under: Option<(f64, usize)> = None;
    // Support counts trend upward as the penalty shrinks; once the count has
    // stayed above q for this many consecutive grid points the exact count is
    // gone and scanning deeper only buys ever-larger fits.
    let overshoot_patience = 10;
    let mut consecutive_over = 0;

    for &lambda in &grid {
        let (state, _) = solve(&std, lambda, warm.clone(), DEFAULT_MAX_SWEEPS)?;
        let count = state.beta.iter().filter(|&&b| b != 0.0).count();
        if count > q {
            consecutive_over += 1;
        } else {
            consecutive_over = 0;
        }
        if count == q {
            let refined = refine_largest(&std, q, lambda, state.clone(), prev_lambda)?;
            if let Some(sel) = cold_confirm(&std, q, refined)? {
                return Ok(sel);
            }
        } else if count < q {
            let better = match &best_under {
                Some((_, c)) => count > *c,
                None => true,
            };
            if better {
                best_under = Some((lambda, count));
            }
        } else if let Some((lambda_hit, state_hit)) =
            bisect_for_count(&std, q, lambda, prev_lambda, &state)?
        {
            let refined = refine_largest(&std, q, lambda_hit, state_hit, prev_lambda)?;
            if let Some(sel) = cold_confirm(&std, q, refined)? {
                return Ok(sel);
            }
        }
        warm = Some(state);
        prev_lambda = lambda;
        if consecutive_over >= overshoot_patience {
            break;
        }
    }

    let (lambda, _) = best_under.expect("grid always contains a count below q");
    let (state, stats) = solve(&std, lambda, None, DEFAULT_MAX_SWEEPS)?;
    let fit = build_fit(&std, state, stats, lambda);
    let exact = fit.support_size() == q;
    Ok(CountSelection { lambda, support: fit.support(), exact, fit })
}

/// The returned pair must reproduce under a cold refit, so the final fit is
/// always computed from scratch. When the refined penalty sits numerically on
/// a path knot the cold support can disagree with the warm one; step down
/// until the two agree.
fn cold_confirm(
    std: &Standardized,
    q: usize,
    lambda: f64,
) -> Result<Option<CountSelection>, LassoError> {
    let mut candidate = lambda;
    for _ in 0..20 {
        let (state, stats) = solve(std, candidate, None, DEFAULT_MAX_SWEEPS)?;
        let fit = build_fit(std, state, stats, candidate);
        if fit.support_size() == q {
            return Ok(Some(CountSelection {
                lambda: candidate,
                support: fit.support(),
                exact: true,
                fit,
            }));
        }
        candidate *= 0.999;
    }
    Ok(None)
}

/// Push the penalty up toward `upper` while the support count stays exactly
/// `q`. `state` solves at `lambda` with count `q`; returns the final lower
/// endpoint.
fn refine_largest(
    std: &Standardized,
    q: usize,
    lambda: f64,
    state: CdState,
    upper: f64,
) -> Result<f64, LassoError> {
    let mut lo = lambda;
    let mut lo_state = state;
    let mut hi = upper;
    for _ in 0..30 {
        let mid = (lo * hi).sqrt();
        if !(mid > lo && mid < hi) {
            break;
        }
        let (s, _) = solve(std, mid, Some(lo_state.clone()), DEFAULT_MAX_SWEEPS)?;
        if s.beta.iter().filter(|&&b| b != 0.0).count() == q {
            lo = mid;
            lo_state = s;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Search `(lower, upper)` for a penalty with support count exactly `q`,
/// knowing count(`lower`) > q and count(`upper`) < q.
fn bisect_for_count(
    std: &Standardized,
    q: usize,
    lower: f64,
    upper: f64,
    lower_state: &CdState,
) -> Result<Option<(f64, CdState)>, LassoError> {
    let mut lo = lower;
    let mut hi = upper;
    let mut warm = lower_state.clone();
    for _ in 0..40 {
        let mid = (lo * hi).sqrt();
        if !(mid > lo && mid < hi) {
            return Ok(None);
        }
        let (s, _) = solve(std, mid, Some(warm.clone()), DEFAULT_MAX_SWEEPS)?;
        let count = s.beta.iter().filter(|&&b| b != 0.0).count();
        match count.cmp(&q) {
            std::cmp::Ordering::Equal => return Ok(Some((mid, s))),
            std::cmp::Ordering::Greater => {
                lo = mid;
                warm = s;
            }
            std::cmp::Ordering::Less => hi = mid,
        }
    }
    Ok(None)
}
