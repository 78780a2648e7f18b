//! Synthetic designs: structured Gaussian covariates with a sparse linear
//! response at a controlled signal-to-noise ratio.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, DatasetError, GroundTruth};
use crate::seeding;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid design spec: {0}")]
    InvalidSpec(String),
    #[error("no closed-form covariance for design kind {0:?}")]
    UnsupportedKind(DesignKind),
    #[error("grouped design needs D >= 520, got {0}")]
    GroupedDimensionTooSmall(usize),
    #[error("grouped design presumes 20 informative covariates, got {0}")]
    GroupedCountMismatch(usize),
    #[error("covariance factorization found eigenvalue {min:e} below tolerance (largest {max:e})")]
    NotPositiveSemidefinite { min: f64, max: f64 },
    #[error("signal variance is zero; cannot scale noise to the requested ratio")]
    ZeroSignalVariance,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DesignKind {
    /// Four interleaved blocks: correlation 0.8 between covariates with equal
    /// index mod 4, none across.
    FourBlocks,
    /// Correlation 0.99^|i-j|.
    Toeplitz,
    /// Toeplitz correlations with informative indices clustered in 5 groups
    /// of 4 around positions 100, 200, ..., 500.
    ToeplitzGrouped,
    /// Each covariate is a random loading of 10 shared latent factors plus
    /// unit noise.
    TenFactors,
    /// Correlation 0.9 between every pair of informative covariates,
    /// everything else independent.
    CorrelatedInformative,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum NoiseKind {
    Gaussian,
    StudentT { df: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DesignSpec {
    pub kind: DesignKind,
    pub n: usize,
    pub d: usize,
    pub n_informative: usize,
    /// Target Var(signal) / Var(noise) for the generated response.
    pub snr: f64,
    pub noise: NoiseKind,
    pub seed: u64,
}

impl DesignSpec {
    /// Defaults: 20 informative covariates, Gaussian noise.
    pub fn new(kind: DesignKind, n: usize, d: usize, snr: f64, seed: u64) -> Self {
        Self { kind, n, d, n_informative: 20, snr, noise: NoiseKind::Gaussian, seed }
    }

    fn validate(&self) -> Result<(), SynthError> {
        if self.n == 0 || self.d == 0 {
            return Err(SynthError::InvalidSpec("N and D must be at least 1".into()));
        }
        if self.n_informative > self.d {
            return Err(SynthError::InvalidSpec(format!(
                "n_informative {} exceeds D {}",
                self.n_informative, self.d
            )));
        }
        if self.snr.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)
            || !self.snr.is_finite()
        {
            return Err(SynthError::InvalidSpec(format!("snr must be positive, got {}", self.snr)));
        }
        if let NoiseKind::StudentT { df } = self.noise {
            if df.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) || !df.is_finite() {
                return Err(SynthError::InvalidSpec(format!(
                    "student-t df must be positive, got {df}"
                )));
            }
        }
        if self.kind == DesignKind::ToeplitzGrouped {
            if self.d < 520 {
                return Err(SynthError::GroupedDimensionTooSmall(self.d));
            }
            if self.n_informative != 20 {
                return Err(SynthError::GroupedCountMismatch(self.n_informative));
            }
        }
        Ok(())
    }
}

fn toeplitz_matrix(d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, j| 0.99f64.powi((i as i32 - j as i32).abs()))
}

/// The covariance (equivalently, correlation: unit diagonal) matrix of the
/// multivariate-normal designs. Informative covariates are taken canonically
/// as the first `n_informative` indices; the sampler permutes afterwards.
pub fn covariance(spec: &DesignSpec) -> Result<DMatrix<f64>, SynthError> {
    spec.validate()?;
    let d = spec.d;
    match spec.kind {
        DesignKind::Toeplitz => Ok(toeplitz_matrix(d)),
        DesignKind::FourBlocks => Ok(DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                1.0
            } else if i % 4 == j % 4 {
                0.8
            } else {
                0.0
            }
        })),
        DesignKind::CorrelatedInformative => {
            let m = spec.n_informative;
            Ok(DMatrix::from_fn(d, d, |i, j| {
                if i == j {
                    1.0
                } else if i < m && j < m {
                    0.9
                } else {
                    0.0
                }
            }))
        }
        kind => Err(SynthError::UnsupportedKind(kind)),
    }
}

/// A factor `A` with `A A^T = cov`, from the symmetric eigendecomposition
/// with eigenvalues clipped at zero. Near-singular structured matrices (long
/// Toeplitz chains) make a plain Cholesky unusable here.
fn factor_covariance(cov: DMatrix<f64>) -> Result<DMatrix<f64>, SynthError> {
    let se = cov.symmetric_eigen();
    let max = se.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let floor = -1e-8 * max;
    let mut scaled = se.eigenvectors;
    for (j, &ev) in se.eigenvalues.iter().enumerate() {
        if ev < floor {
            return Err(SynthError::NotPositiveSemidefinite { min: ev, max });
        }
        let s = ev.max(0.0).sqrt();
        scaled.column_mut(j).iter_mut().for_each(|v| *v *= s);
    }
    Ok(scaled)
}

fn population_variance(v: &DVector<f64>) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

/// A design with its covariance factor precomputed, so repeated draws (e.g.
/// experiment repetitions) do not refactorize.
pub struct DesignSampler {
    spec: DesignSpec,
    factor: Option<DMatrix<f64>>,
}

impl DesignSampler {
    pub fn new(spec: DesignSpec) -> Result<Self, SynthError> {
        spec.validate()?;
        let factor = match spec.kind {
            DesignKind::Toeplitz | DesignKind::FourBlocks | DesignKind::CorrelatedInformative => {
                Some(factor_covariance(covariance(&spec)?)?)
            }
            DesignKind::ToeplitzGrouped => Some(factor_covariance(toeplitz_matrix(spec.d))?),
            DesignKind::TenFactors => None,
        };
        Ok(Self { spec, factor })
    }

    pub fn spec(&self) -> &DesignSpec {
        &self.spec
    }

    /// Draw one realization. The same seed always reproduces the same pair.
    pub fn draw(&self, seed: u64) -> Result<(Dataset, GroundTruth), SynthError> {
        let spec = &self.spec;
        let (n, d, m) = (spec.n, spec.d, spec.n_informative);
        let mut rng = seeding::stream(seed, &[]);

        let mut x = match spec.kind {
            DesignKind::TenFactors => {
                let k = 10;
                // loadings are fixed per realization
                let loadings = draw_normal_matrix(d, k, &mut rng);
                let factors = draw_normal_matrix(n, k, &mut rng);
                let mut x = &factors * loadings.transpose();
                for v in x.iter_mut() {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    *v += noise;
                }
                x
            }
            _ => {
                let z = draw_normal_matrix(n, d, &mut rng);
                let a = self.factor.as_ref().expect("factor precomputed for Gaussian designs");
                z * a.transpose()
            }
        };

        let informative: Vec<usize> = match spec.kind {
            DesignKind::CorrelatedInformative => {
                // permute columns so the correlated block lands on a uniform
                // random index set
                let mut perm: Vec<usize> = (0..d).collect();
                perm.shuffle(&mut rng);
                let mut permuted = DMatrix::zeros(n, d);
                for (j, &target) in perm.iter().enumerate() {
                    permuted.set_column(target, &x.column(j));
                }
                x = permuted;
                let mut inf: Vec<usize> = perm[..m].to_vec();
                inf.sort_unstable();
                inf
            }
            DesignKind::ToeplitzGrouped => {
                let mut inf = Vec::with_capacity(20);
                for g in 1..=5usize {
                    // window [100g-20, 100g+20] in 1-based positions
                    let lo = 100 * g - 21;
                    let picks = rand::seq::index::sample(&mut rng, 41, 4);
                    inf.extend(picks.iter().map(|p| lo + p));
                }
                inf.sort_unstable();
                inf
            }
            _ => {
                let mut inf: Vec<usize> =
                    rand::seq::index::sample(&mut rng, d, m).into_iter().collect();
                inf.sort_unstable();
                inf
            }
        };

        let mut beta = DVector::zeros(d);
        for &idx in &informative {
            beta[idx] = rng.random::<f64>();
        }

        let signal = &x * &beta;
        let var_signal = population_variance(&signal);
        if m > 0 && var_signal == 0.0 {
            return Err(SynthError::ZeroSignalVariance);
        }

        let mut noise = DVector::zeros(n);
        match spec.noise {
            NoiseKind::Gaussian => {
                noise.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
            }
            NoiseKind::StudentT { df } => {
                let t = StudentT::new(df)
                    .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
                noise.iter_mut().for_each(|v| *v = t.sample(&mut rng));
            }
        }
        // scale so the empirical variance ratio equals snr exactly
        let var_noise = population_variance(&noise);
        if var_noise == 0.0 {
            return Err(SynthError::InvalidSpec(
                "noise draws have zero variance; need N >= 2".into(),
            ));
        }
        let scale = (var_signal / (spec.snr * var_noise)).sqrt();
        let y = &signal + noise * scale;

        let names = (0..d).map(|j| format!("x{j}")).collect();
        let ds = Dataset::new(x, y, Some(names))?;
        Ok((ds, GroundTruth::from_beta(beta)))
    }
}

fn draw_normal_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = StandardNormal.sample(rng);
        }
    }
    m
}

/// Draw one realization of a design, factorizing its covariance on the fly.
/// For repeated draws build a [`DesignSampler`] once instead.
pub fn draw_design(spec: &DesignSpec) -> Result<(Dataset, GroundTruth), SynthError> {
    let seed = spec.seed;
    DesignSampler::new(spec.clone())?.draw(seed)
}
