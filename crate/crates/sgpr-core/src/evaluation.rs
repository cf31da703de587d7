//! Statistical machinery for adaptive DL parameter selection.
//!
//! Reconstruction quality is measured by the maximum absolute normalized
//! cross-correlation between a profile and its sparse reconstruction; sets of
//! those similarity values are compared through their empirical distributions
//! using the coefficient of variation, the two-sample Kolmogorov–Smirnov
//! distance, and the DKW-inequality metric.

use crate::dictionary_learning::{learn, DlAlgorithm, LearnConfig};
use crate::error::{Error, Result};
use crate::parallel;
use crate::sparse_coding::{batch_omp, SparseCodeMatrix, StopRule};
use ndarray::{ArrayView1, ArrayView2};
use rayon::prelude::*;

/// Similarity between two equal-length signals: the maximum over all lags of
/// the absolute normalized cross-correlation, in [0, 1]. By convention the
/// result is 0 when either signal is identically zero.
pub fn similarity(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dim(format!(
            "similarity arguments have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let raa = a.dot(&a);
    let rbb = b.dot(&b);
    if raa == 0.0 || rbb == 0.0 {
        return Ok(0.0);
    }
    let n = a.len() as i64;
    let denom = (raa * rbb).sqrt();
    let mut best = 0.0f64;
    // full linear (zero-padded) lag range -(n-1)..=(n-1)
    for lag in -(n - 1)..n {
        let mut acc = 0.0;
        let lo = 0.max(-lag);
        let hi = n.min(n - lag);
        for i in lo..hi {
            acc += a[i as usize] * b[(i + lag) as usize];
        }
        best = best.max(acc.abs());
    }
    Ok((best / denom).min(1.0))
}

/// Per-column similarity between a dataset and its sparse reconstruction.
pub fn reconstruction_similarities(
    y: ArrayView2<f64>,
    dict: ArrayView2<f64>,
    codes: &SparseCodeMatrix,
) -> Result<Vec<f64>> {
    if codes.column_count() != y.ncols() {
        return Err(Error::dim(format!(
            "{} codes for {} columns",
            codes.column_count(),
            y.ncols()
        )));
    }
    if codes.atom_count != dict.ncols() || y.nrows() != dict.nrows() {
        return Err(Error::dim("codes/dictionary/data shapes disagree"));
    }
    parallel::install(|| {
        (0..y.ncols())
            .into_par_iter()
            .map(|l| {
                let rec = codes.codes[l].reconstruct(dict);
                similarity(y.column(l), rec.view())
            })
            .collect()
    })
}

/// Coefficient of variation: sample standard deviation (n−1 denominator)
/// divided by the mean.
pub fn coefficient_of_variation(samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::param("CV needs at least two samples"));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return Err(Error::param("CV undefined for zero mean"));
    }
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
    Ok(var.sqrt() / mean)
}

/// Empirical cumulative distribution function of a sample set.
/// Evaluation is right-continuous: 0 before the minimum, 1 at and after the
/// maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    values: Vec<f64>,
}

impl Ecdf {
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::param("ECDF needs at least one sample"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("ECDF samples must be finite"));
        }
        let mut values = samples.to_vec();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Sorted sample values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Fraction of samples ≤ x.
    pub fn eval(&self, x: f64) -> f64 {
        let idx = self.values.partition_point(|&v| v <= x);
        idx as f64 / self.values.len() as f64
    }
}

/// Two-sample Kolmogorov–Smirnov distance: the supremum of |F̂ − Ĝ| over the
/// pooled sample points (exact for right-continuous step functions).
pub fn ks_distance(a: &Ecdf, b: &Ecdf) -> f64 {
    let mut worst = 0.0f64;
    let (va, vb) = (a.values(), b.values());
    let (mut i, mut j) = (0usize, 0usize);
    let (na, nb) = (va.len() as f64, vb.len() as f64);
    while i < va.len() || j < vb.len() {
        let x = match (va.get(i), vb.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => break,
        };
        while i < va.len() && va[i] <= x {
            i += 1;
        }
        while j < vb.len() && vb[j] <= x {
            j += 1;
        }
        worst = worst.max((i as f64 / na - j as f64 / nb).abs());
    }
    worst
}

/// The DKW confidence bound √(−(2/L)·ln(α/2)) on the two-sample K-S distance
/// at confidence level 1−α.
pub fn dkw_bound(l: usize, alpha: f64) -> Result<f64> {
    if l == 0 {
        return Err(Error::param("DKW bound needs L >= 1"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("confidence alpha must be in (0, 1)"));
    }
    Ok((-(2.0 / l as f64) * (alpha / 2.0).ln()).sqrt())
}

/// DKW metric: the confidence bound minus the observed K-S distance. A
/// negative value rejects the hypothesis that both samples share one
/// underlying distribution at confidence 1−α.
pub fn dkw_metric(a: &Ecdf, b: &Ecdf, l: usize, alpha: f64) -> Result<f64> {
    Ok(dkw_bound(l, alpha)? - ks_distance(a, b))
}

/// Evaluation summary for one parameter combination.
#[derive(Debug, Clone)]
pub struct MetricReport {
    /// Human-readable description of the parameter combination.
    pub label: String,
    pub mean: f64,
    pub std: f64,
    pub cv: f64,
    /// K-S distance of this combination's similarity ECDF to the reference.
    pub d_ks: f64,
    /// DKW metric against the reference at confidence 1−α.
    pub d_dkw: f64,
    pub alpha: f64,
}

/// One grid point of a parameter sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub label: String,
    pub config: LearnConfig,
}

/// The reference parameter combination the paper-style sweep compares
/// against: `N_t = 1, K = 300, N_b = 30, N_r = 10, N_u = 10` applied on top
/// of a base configuration.
pub fn reference_config(base: &LearnConfig) -> LearnConfig {
    LearnConfig {
        iterations: 1,
        atom_count: 300,
        new_batch: 30,
        prev_batch: 10,
        drop_off_age: 10,
        ..base.clone()
    }
}

/// Sweep a learner over a parameter grid.
///
/// Every combination is learned, the training set re-coded with `code_stop`,
/// similarities computed, and the resulting ECDF compared against the
/// reference combination's ECDF. Reports come back in grid order.
pub fn parameter_sweep(
    algorithm: DlAlgorithm,
    grid: &[SweepPoint],
    y: ArrayView2<f64>,
    reference: &LearnConfig,
    code_stop: &StopRule,
    alpha: f64,
) -> Result<Vec<MetricReport>> {
    parameter_sweep_detailed(algorithm, grid, y, reference, code_stop, alpha).map(|(r, _)| r)
}

/// [`parameter_sweep`] plus the raw similarity samples of every combination
/// (for histogram reporting).
pub fn parameter_sweep_detailed(
    algorithm: DlAlgorithm,
    grid: &[SweepPoint],
    y: ArrayView2<f64>,
    reference: &LearnConfig,
    code_stop: &StopRule,
    alpha: f64,
) -> Result<(Vec<MetricReport>, Vec<(String, Vec<f64>)>)> {
    if grid.is_empty() {
        return Err(Error::param("parameter sweep needs a non-empty grid"));
    }
    let ref_sims = sweep_similarities(algorithm, y, reference, code_stop)?;
    let ref_ecdf = Ecdf::new(&ref_sims)?;

    let runs: Vec<Result<Vec<f64>>> = parallel::install(|| {
        grid.par_iter()
            .map(|point| sweep_similarities(algorithm, y, &point.config, code_stop))
            .collect()
    });

    let mut reports = Vec::with_capacity(grid.len());
    let mut samples = Vec::with_capacity(grid.len());
    for (point, sims) in grid.iter().zip(runs) {
        let sims = sims?;
        let ecdf = Ecdf::new(&sims)?;
        let n = sims.len() as f64;
        let mean = sims.iter().sum::<f64>() / n;
        let var = sims.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
        let l = ecdf.len().min(ref_ecdf.len());
        let d_ks = ks_distance(&ecdf, &ref_ecdf);
        reports.push(MetricReport {
            label: point.label.clone(),
            mean,
            std: var.sqrt(),
            cv: coefficient_of_variation(&sims)?,
            d_ks,
            d_dkw: dkw_bound(l, alpha)? - d_ks,
            alpha,
        });
        samples.push((point.label.clone(), sims));
    }
    Ok((reports, samples))
}

fn sweep_similarities(
    algorithm: DlAlgorithm,
    y: ArrayView2<f64>,
    config: &LearnConfig,
    code_stop: &StopRule,
) -> Result<Vec<f64>> {
    let (dict, _, _) = learn(algorithm, y, config)?;
    let codes = batch_omp(y, dict.atoms.view(), code_stop)?;
    reconstruction_similarities(y, dict.atoms.view(), &codes)
}

/// Fixed-bin histogram of similarity values for reporting: 100 bins of width
/// 0.01 over [0, 1]. Metrics never operate on these bins.
pub fn epdf_histogram(samples: &[f64]) -> [u32; 100] {
    let mut bins = [0u32; 100];
    for &s in samples {
        let idx = ((s.clamp(0.0, 1.0)) * 100.0).floor() as usize;
        bins[idx.min(99)] += 1;
    }
    bins
}
