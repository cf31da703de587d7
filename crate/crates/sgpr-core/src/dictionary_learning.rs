//! Dictionary learning.
//!
//! Four learners behind one interface: batch K-SVD, online ODL
//! (accumulator-based block coordinate descent), CBWLSU (correlation-based
//! weighted-least-squares updates), and DOMINODL (drop-off mini-batch online
//! learning). All learners are deterministic in `(Y, config, seed)` and
//! return the learned dictionary, a sparse decomposition of the training set
//! with the final dictionary, and a per-iteration report.

use crate::error::{Error, Result};
use crate::linalg;
use crate::parallel;
use crate::rng::{self, stream};
use crate::sparse_coding::{batch_omp, lars_lasso, omp_unchecked, SparseCode, SparseCodeMatrix, StopRule};
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use rand::prelude::*;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::time::Instant;

/// The available dictionary learning algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DlAlgorithm {
    Ksvd,
    Odl,
    Cbwlsu,
    Dominodl,
}

impl DlAlgorithm {
    pub const ALL: [DlAlgorithm; 4] = [
        DlAlgorithm::Ksvd,
        DlAlgorithm::Odl,
        DlAlgorithm::Cbwlsu,
        DlAlgorithm::Dominodl,
    ];

    fn order_stream_index(self) -> u64 {
        match self {
            DlAlgorithm::Ksvd => 0,
            DlAlgorithm::Odl => 1,
            DlAlgorithm::Cbwlsu => 2,
            DlAlgorithm::Dominodl => 3,
        }
    }
}

impl std::fmt::Display for DlAlgorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            DlAlgorithm::Ksvd => "ksvd",
            DlAlgorithm::Odl => "odl",
            DlAlgorithm::Cbwlsu => "cbwlsu",
            DlAlgorithm::Dominodl => "dominodl",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for DlAlgorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ksvd" | "k-svd" => Ok(DlAlgorithm::Ksvd),
            "odl" => Ok(DlAlgorithm::Odl),
            "cbwlsu" => Ok(DlAlgorithm::Cbwlsu),
            "dominodl" => Ok(DlAlgorithm::Dominodl),
            other => Err(Error::param(format!("unknown DL algorithm '{other}'"))),
        }
    }
}

/// Where a dictionary came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub algorithm: String,
    pub config_digest: u64,
    pub seed: u64,
}

/// A learned sparsifying basis: M×K matrix with unit-ℓ2-norm columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    pub atoms: Array2<f64>,
    pub provenance: Provenance,
}

impl Dictionary {
    /// Build a dictionary, renormalizing every column to unit norm.
    /// Fails on non-finite entries or zero columns.
    pub fn from_atoms(mut atoms: Array2<f64>, provenance: Provenance) -> Result<Self> {
        if atoms.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("dictionary contains non-finite entries".into()));
        }
        for j in 0..atoms.ncols() {
            let n = linalg::norm(atoms.column(j));
            if n == 0.0 {
                return Err(Error::Numerical(format!("dictionary atom {j} is zero")));
            }
            atoms.column_mut(j).mapv_inplace(|v| v / n);
        }
        Ok(Self { atoms, provenance })
    }

    pub fn signal_len(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.ncols()
    }

    /// Largest deviation of any column norm from 1.
    pub fn max_norm_deviation(&self) -> f64 {
        (0..self.atom_count())
            .map(|j| (linalg::norm(self.atoms.column(j)) - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Learner configuration. Field names follow the usual symbols: `K` atoms,
/// `N_t` iterations, `N_b`/`N_r` new/previous mini-batch sizes, `N_u`
/// drop-off age, `δ` coding residual threshold, `χ` convergence threshold,
/// `λ` the ODL ℓ1 regularizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    pub atom_count: usize,
    pub iterations: usize,
    pub new_batch: usize,
    pub prev_batch: usize,
    pub drop_off_age: usize,
    /// OMP residual threshold; `None` derives 0.1 × the median column norm
    /// of the training set.
    pub residual_threshold: Option<f64>,
    pub convergence_threshold: f64,
    pub odl_lambda: f64,
    pub seed: u64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            atom_count: 640,
            iterations: 100,
            new_batch: 30,
            prev_batch: 10,
            drop_off_age: 10,
            residual_threshold: None,
            convergence_threshold: 0.25,
            odl_lambda: 0.1,
            seed: 0,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.atom_count == 0 {
            return Err(Error::param("atom count K must be >= 1"));
        }
        if self.new_batch == 0 || self.prev_batch == 0 || self.drop_off_age == 0 {
            return Err(Error::param("mini-batch sizes and drop-off age must be >= 1"));
        }
        if let Some(d) = self.residual_threshold {
            if !(d >= 0.0) {
                return Err(Error::param("residual threshold must be >= 0"));
            }
        }
        if !(self.convergence_threshold > 0.0) {
            return Err(Error::param("convergence threshold must be > 0"));
        }
        if !(self.odl_lambda > 0.0) {
            return Err(Error::param("ODL lambda must be > 0"));
        }
        Ok(())
    }

    /// FNV-1a digest of the configuration, recorded in provenance.
    pub fn digest(&self) -> u64 {
        let repr = format!(
            "k={};nt={};nb={};nr={};nu={};delta={:?};chi={};lambda={};seed={}",
            self.atom_count,
            self.iterations,
            self.new_batch,
            self.prev_batch,
            self.drop_off_age,
            self.residual_threshold,
            self.convergence_threshold,
            self.odl_lambda,
            self.seed
        );
        let mut h = 0xcbf29ce484222325u64;
        for b in repr.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }
}

/// Per-run diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnReport {
    pub iterations: usize,
    pub wall_time_secs: f64,
    /// ‖Y − DX‖_F after each iteration, with the codes known at that point
    /// (columns not yet visited by an online learner count as zero codes).
    pub reconstruction_errors: Vec<f64>,
    /// Elements dropped per iteration (DOMINODL; empty for other learners).
    pub dropoff_counts: Vec<usize>,
    /// Alive previous-element pool size per iteration (DOMINODL only).
    pub prev_pool_sizes: Vec<usize>,
    /// Post-update weighted error per iteration — the χ convergence
    /// statistic (DOMINODL only).
    pub weighted_errors: Vec<f64>,
}

/// Coding threshold: configured value, or 0.1 × the median column norm.
pub fn resolve_delta(y: ArrayView2<f64>, config: &LearnConfig) -> f64 {
    if let Some(d) = config.residual_threshold {
        return d;
    }
    let mut norms: Vec<f64> = (0..y.ncols()).map(|l| linalg::norm(y.column(l))).collect();
    norms.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if norms.is_empty() {
        0.0
    } else if norms.len() % 2 == 1 {
        norms[norms.len() / 2]
    } else {
        0.5 * (norms[norms.len() / 2 - 1] + norms[norms.len() / 2])
    };
    0.1 * median
}

/// Initial dictionary: `K` distinct columns sampled from `Y` without
/// replacement (seeded), each normalized. When `K > L` the remainder is
/// filled with seeded Gaussian atoms.
pub fn init_dictionary(y: ArrayView2<f64>, atom_count: usize, seed: u64) -> Result<Dictionary> {
    let (m, l) = y.dim();
    if atom_count == 0 || l == 0 || m == 0 {
        return Err(Error::param("init_dictionary needs non-empty data and K >= 1"));
    }
    let mut rng = stream(seed, rng::TAG_DICT_INIT, 0);
    let mut atoms = Array2::<f64>::zeros((m, atom_count));
    let take = atom_count.min(l);
    let picks = rand::seq::index::sample(&mut rng, l, take);
    let fill_gaussian = |col: &mut ndarray::ArrayViewMut1<f64>, rng: &mut rand_chacha::ChaCha8Rng| {
        loop {
            for v in col.iter_mut() {
                *v = rand_distr::StandardNormal.sample(rng);
            }
            let n = linalg::norm(col.view());
            if n > 0.0 {
                col.mapv_inplace(|v| v / n);
                break;
            }
        }
    };
    for (j, src) in picks.into_iter().enumerate() {
        let n = linalg::norm(y.column(src));
        if n > 0.0 {
            let col = y.column(src).mapv(|v| v / n);
            atoms.column_mut(j).assign(&col);
        } else {
            fill_gaussian(&mut atoms.column_mut(j), &mut rng);
        }
    }
    for j in take..atom_count {
        fill_gaussian(&mut atoms.column_mut(j), &mut rng);
    }
    Dictionary::from_atoms(
        atoms,
        Provenance {
            algorithm: "init".into(),
            config_digest: 0,
            seed,
        },
    )
}

/// Dispatch to one of the four learners.
pub fn learn(
    algorithm: DlAlgorithm,
    y: ArrayView2<f64>,
    config: &LearnConfig,
) -> Result<(Dictionary, SparseCodeMatrix, LearnReport)> {
    match algorithm {
        DlAlgorithm::Ksvd => ksvd(y, config),
        DlAlgorithm::Odl => odl(y, config),
        DlAlgorithm::Cbwlsu => cbwlsu(y, config),
        DlAlgorithm::Dominodl => dominodl(y, config),
    }
}

fn check_training_set(y: ArrayView2<f64>, config: &LearnConfig) -> Result<()> {
    config.validate()?;
    if y.nrows() == 0 || y.ncols() == 0 {
        return Err(Error::param("training set must be non-empty"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("training set contains non-finite values"));
    }
    Ok(())
}

/// ‖Y − DX‖_F for the currently known codes.
fn global_error(y: ArrayView2<f64>, atoms: &Array2<f64>, codes: &[Option<SparseCode>]) -> f64 {
    let mut acc = 0.0;
    for (l, code) in codes.iter().enumerate() {
        match code {
            Some(c) => {
                let rec = c.reconstruct(atoms.view());
                let col = y.column(l);
                acc += col
                    .iter()
                    .zip(rec.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
            }
            None => acc += y.column(l).dot(&y.column(l)),
        }
    }
    acc.sqrt()
}

fn finish(
    algorithm: DlAlgorithm,
    atoms: Array2<f64>,
    config: &LearnConfig,
) -> Result<Dictionary> {
    Dictionary::from_atoms(
        atoms,
        Provenance {
            algorithm: algorithm.to_string(),
            config_digest: config.digest(),
            seed: config.seed,
        },
    )
}

// ---------------------------------------------------------------------------
// K-SVD
// ---------------------------------------------------------------------------

/// Batch K-SVD with the initial dictionary sampled from the training set.
pub fn ksvd(
    y: ArrayView2<f64>,
    config: &LearnConfig,
) -> Result<(Dictionary, SparseCodeMatrix, LearnReport)> {
    check_training_set(y, config)?;
    let init = init_dictionary(y, config.atom_count, config.seed)?;
    ksvd_from(y, config, init.atoms.view())
}

/// K-SVD from an explicit initial dictionary.
///
/// Each iteration sparse-codes the whole set with batch OMP at threshold δ,
/// then updates every atom in sequence: the error restricted to the columns
/// using the atom is replaced by its leading rank-1 approximation (atom =
/// left singular vector, coefficient row = σ·right singular vector). Atoms
/// used by no column are re-seeded from the worst-represented column.
pub fn ksvd_from(
    y: ArrayView2<f64>,
    config: &LearnConfig,
    init: ArrayView2<f64>,
) -> Result<(Dictionary, SparseCodeMatrix, LearnReport)> {
    check_training_set(y, config)?;
    let (m, l) = y.dim();
    let k = config.atom_count;
    if init.dim() != (m, k) {
        return Err(Error::dim(format!(
            "initial dictionary is {:?}, expected ({m}, {k})",
            init.dim()
        )));
    }
    let start = Instant::now();
    let delta = resolve_delta(y, config);
    let stop = StopRule::residual(delta)?;
    let mut atoms = init.to_owned();
    for j in 0..k {
        let n = linalg::norm(atoms.column(j));
        if n == 0.0 {
            return Err(Error::Numerical(format!("initial atom {j} is zero")));
        }
        atoms.column_mut(j).mapv_inplace(|v| v / n);
    }

    let mut errors = Vec::with_capacity(config.iterations);
    let mut codes;
    for _ in 0..config.iterations {
        codes = batch_omp(y, atoms.view(), &stop)?;

        // columns using each atom
        let mut users: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (col, code) in codes.codes.iter().enumerate() {
            for &j in &code.support {
                users[j].push(col);
            }
        }
        // worst-represented columns for re-seeding unused atoms
        let mut worst: Vec<usize> = (0..l).collect();
        worst.sort_by(|&a, &b| {
            codes.codes[b]
                .residual_norm
                .partial_cmp(&codes.codes[a].residual_norm)
                .unwrap()
        });
        let mut worst_iter = worst.into_iter();

        for j in 0..k {
            if users[j].is_empty() {
                for col in worst_iter.by_ref() {
                    let n = linalg::norm(y.column(col));
                    if n > 0.0 {
                        let replacement = y.column(col).mapv(|v| v / n);
                        atoms.column_mut(j).assign(&replacement);
                        break;
                    }
                }
                continue;
            }
            // restricted error E_j = Y_ω − D X_ω + d_j X_{j,ω}
            let cols = &users[j];
            let mut e = Array2::<f64>::zeros((m, cols.len()));
            for (c, &col) in cols.iter().enumerate() {
                let code = &codes.codes[col];
                let mut resid = y.column(col).to_owned();
                for &a in &code.support {
                    if a != j {
                        resid.scaled_add(-code.coefficients[a], &atoms.column(a));
                    }
                }
                e.column_mut(c).assign(&resid);
            }
            let (u, sigma, v) = linalg::leading_singular_pair(e.view(), Some(atoms.column(j)));
            if sigma > 0.0 {
                atoms.column_mut(j).assign(&u);
                for (c, &col) in cols.iter().enumerate() {
                    codes.codes[col].coefficients[j] = sigma * v[c];
                }
            }
        }

        let snapshot: Vec<Option<SparseCode>> =
            codes.codes.iter().cloned().map(Some).collect();
        errors.push(global_error(y, &atoms, &snapshot));
    }

    let dict = finish(DlAlgorithm::Ksvd, atoms, config)?;
    // decompose with the exported dictionary so the returned codes and
    // residuals refer to it
    codes = batch_omp(y, dict.atoms.view(), &stop)?;
    let report = LearnReport {
        iterations: config.iterations,
        wall_time_secs: start.elapsed().as_secs_f64(),
        reconstruction_errors: errors,
        dropoff_counts: Vec::new(),
        prev_pool_sizes: Vec::new(),
        weighted_errors: Vec::new(),
    };
    Ok((dict, codes, report))
}

// ---------------------------------------------------------------------------
// ODL
// ---------------------------------------------------------------------------

#[cfg_attr(not(test), allow(dead_code))]
pub(crate) struct OdlState {
    pub(crate) atoms: Array2<f64>,
    pub(crate) a: Array2<f64>,
    pub(crate) b: Array2<f64>,
    pub(crate) drawn: Vec<(usize, SparseCode)>,
    pub(crate) errors: Vec<f64>,
}

pub(crate) fn odl_core(y: ArrayView2<f64>, config: &LearnConfig) -> Result<OdlState> {
    let (m, l) = y.dim();
    let k = config.atom_count;
    let init = init_dictionary(y, k, config.seed)?;
    let mut atoms = init.atoms;

    let mut order: Vec<usize> = (0..l).collect();
    let mut rng = stream(
        config.seed,
        rng::TAG_LEARN_ORDER,
        DlAlgorithm::Odl.order_stream_index(),
    );
    order.shuffle(&mut rng);

    let mut a = Array2::<f64>::zeros((k, k));
    let mut b = Array2::<f64>::zeros((m, k));
    let mut latest: Vec<Option<SparseCode>> = vec![None; l];
    let mut drawn = Vec::with_capacity(config.iterations);
    let mut errors = Vec::with_capacity(config.iterations);

    for t in 0..config.iterations {
        let col = order[t % l];
        let code = lars_lasso(y.column(col), atoms.view(), config.odl_lambda)?;

        for &i in &code.support {
            let xi = code.coefficients[i];
            for &j in &code.support {
                a[(i, j)] += xi * code.coefficients[j];
            }
            let mut bcol = b.column_mut(i);
            bcol.scaled_add(xi, &y.column(col));
        }

        // block coordinate descent over columns with a warm restart
        for j in 0..k {
            let ajj = a[(j, j)];
            if ajj == 0.0 {
                continue;
            }
            let da = atoms.dot(&a.column(j));
            let mut u = Array1::<f64>::zeros(m);
            for i in 0..m {
                u[i] = (b[(i, j)] - da[i]) / ajj + atoms[(i, j)];
            }
            let scale = linalg::norm(u.view()).max(1.0);
            for i in 0..m {
                atoms[(i, j)] = u[i] / scale;
            }
        }

        latest[col] = Some(code.clone());
        drawn.push((col, code));
        errors.push(global_error(y, &atoms, &latest));
    }

    Ok(OdlState {
        atoms,
        a,
        b,
        drawn,
        errors,
    })
}

/// Online dictionary learning: one element per iteration (drawn from a
/// seeded permutation), LARS-LASSO coding, rank-accumulator updates
/// `A ← A + x xᵀ`, `B ← B + y xᵀ`, and a block-coordinate-descent sweep over
/// dictionary columns with warm restart. Columns never used (`A_jj = 0`) are
/// skipped; exported columns are renormalized to exactly unit norm.
pub fn odl(
    y: ArrayView2<f64>,
    config: &LearnConfig,
) -> Result<(Dictionary, SparseCodeMatrix, LearnReport)> {
    check_training_set(y, config)?;
    let start = Instant::now();
    let state = odl_core(y, config)?;
    let dict = finish(DlAlgorithm::Odl, state.atoms, config)?;
    let delta = resolve_delta(y, config);
    let codes = batch_omp(y, dict.atoms.view(), &StopRule::residual(delta)?)?;
    let report = LearnReport {
        iterations: config.iterations,
        wall_time_secs: start.elapsed().as_secs_f64(),
        reconstruction_errors: state.errors,
        dropoff_counts: Vec::new(),
        prev_pool_sizes: Vec::new(),
        weighted_errors: Vec::new(),
    };
    Ok((dict, codes, report))
}

// ---------------------------------------------------------------------------
// Weighted least squares atom update (shared by CBWLSU and DOMINODL)
// ---------------------------------------------------------------------------

const WEIGHT_FLOOR: f64 = 1e-12;

/// Weighted-least-squares dictionary block update:
/// `D̂ = Y W Xᵀ (X W Xᵀ + εI)⁻¹` with ridge `ε = 1e-8·trace/K_sel`, columns
/// renormalized. Minimizes `‖(Y − D X) W^{1/2}‖_F` up to the ridge term.
pub fn wls_update(
    y_sel: ArrayView2<f64>,
    x_sel: ArrayView2<f64>,
    weights: ArrayView1<f64>,
) -> Result<Array2<f64>> {
    let p = y_sel.ncols();
    if p == 0 {
        return Err(Error::param("WLS update needs at least one column"));
    }
    if x_sel.ncols() != p || weights.len() != p {
        return Err(Error::dim(format!(
            "WLS shapes: Y has {p} columns, X has {}, W has {}",
            x_sel.ncols(),
            weights.len()
        )));
    }
    if weights.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::param("WLS weights must be positive"));
    }
    let k_sel = x_sel.nrows();
    let mut xw = x_sel.to_owned();
    for (mut col, &w) in xw.columns_mut().into_iter().zip(weights.iter()) {
        col.mapv_inplace(|v| v * w);
    }
    let r = y_sel.dot(&xw.t()); // M × K_sel
    let mut s_mat = x_sel.dot(&xw.t()); // K_sel × K_sel
    let trace: f64 = (0..k_sel).map(|i| s_mat[(i, i)]).sum();
    if !(trace > 0.0) {
        return Err(Error::Numerical(
            "WLS update on an all-zero coefficient block".into(),
        ));
    }
    let ridge = 1e-8 * trace / k_sel as f64;
    for i in 0..k_sel {
        s_mat[(i, i)] += ridge;
    }
    let l = linalg::cholesky(s_mat.view())
        .ok_or_else(|| Error::Numerical("WLS Gram factorization failed".into()))?;
    let mut rhs = r.t().to_owned(); // K_sel × M, one system per column
    linalg::cholesky_solve_multi(&l, &mut rhs);
    let mut dhat = rhs.t().to_owned();
    for j in 0..k_sel {
        let n = linalg::norm(dhat.column(j));
        if n > 0.0 {
            dhat.column_mut(j).mapv_inplace(|v| v / n);
        }
    }
    Ok(dhat)
}

/// Inverse-squared-error weights (Eq.-35 style) for a set of columns, with a
/// small floor guarding perfectly represented elements.
fn error_weights(
    y: ArrayView2<f64>,
    atoms: &Array2<f64>,
    codes: &[SparseCode],
    members: &[usize],
) -> Array1<f64> {
    Array1::from_iter(members.iter().map(|&l| {
        let rec = codes[l].reconstruct(atoms.view());
        let e2 = y
            .column(l)
            .iter()
            .zip(rec.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
        1.0 / e2.max(WEIGHT_FLOOR)
    }))
}

fn gather_selection(
    y: ArrayView2<f64>,
    codes: &[SparseCode],
    members: &[usize],
) -> (Vec<usize>, Array2<f64>, Array2<f64>) {
    let mut atom_set = BTreeSet::new();
    for &l in members {
        atom_set.extend(codes[l].support.iter().copied());
    }
    let atom_list: Vec<usize> = atom_set.into_iter().collect();
    let mut y_sel = Array2::<f64>::zeros((y.nrows(), members.len()));
    let mut x_sel = Array2::<f64>::zeros((atom_list.len(), members.len()));
    for (c, &l) in members.iter().enumerate() {
        y_sel.column_mut(c).assign(&y.column(l));
        for (r, &atom) in atom_list.iter().enumerate() {
            x_sel[(r, c)] = codes[l].coefficients[atom];
        }
    }
    (atom_list, y_sel, x_sel)
}

fn apply_block(atoms: &mut Array2<f64>, atom_list: &[usize], dhat: &Array2<f64>) {
    for (c, &atom) in atom_list.iter().enumerate() {
        if linalg::norm(dhat.column(c)) > 0.0 {
            atoms.column_mut(atom).assign(&dhat.column(c));
        }
    }
}

// ---------------------------------------------------------------------------
// CBWLSU
// ---------------------------------------------------------------------------

/// Correlation-based weighted-least-squares update learning: one new element
/// per iteration; the update set is the new element plus every previous
/// element whose sparse code correlates with it (`⟨x_l, x_t⟩ ≠ 0`); the atoms
/// used by that set are refreshed with [`wls_update`].
pub fn cbwlsu(
    y: ArrayView2<f64>,
    config: &LearnConfig,
) -> Result<(Dictionary, SparseCodeMatrix, LearnReport)> {
    check_training_set(y, config)?;
    let start = Instant::now();
    let l = y.ncols();
    let init = init_dictionary(y, config.atom_count, config.seed)?;
    let mut atoms = init.atoms;
    let delta = resolve_delta(y, config);
    let stop = StopRule::residual(delta)?;

    let mut order: Vec<usize> = (0..l).collect();
    let mut rng = stream(
        config.seed,
        rng::TAG_LEARN_ORDER,
        DlAlgorithm::Cbwlsu.order_stream_index(),
    );
    order.shuffle(&mut rng);

    let mut codes: Vec<Option<SparseCode>> = vec![None; l];
    let mut processed: Vec<usize> = Vec::with_capacity(l);
    let mut errors = Vec::with_capacity(l);

    for &col in &order {
        let code = omp_unchecked(y.column(col), atoms.view(), &stop);
        codes[col] = Some(code);

        let current = codes[col].as_ref().unwrap();
        let mut members: Vec<usize> = processed
            .iter()
            .copied()
            .filter(|&prev| {
                let pc = codes[prev].as_ref().unwrap();
                sparse_dot(pc, current) != 0.0
            })
            .collect();
        members.push(col);

        let snapshot: Vec<SparseCode> = members
            .iter()
            .map(|&i| codes[i].clone().unwrap())
            .collect();
        let member_idx: Vec<usize> = (0..members.len()).collect();
        let (atom_list, y_sel, x_sel) = {
            let mut y_sel = Array2::<f64>::zeros((y.nrows(), members.len()));
            for (c, &i) in members.iter().enumerate() {
                y_sel.column_mut(c).assign(&y.column(i));
            }
            let (atom_list, _, x_sel) = gather_selection(y_sel.view(), &snapshot, &member_idx);
            (atom_list, y_sel, x_sel)
        };
        if !atom_list.is_empty() && std::env::var_os("SGPR_CBWLSU_FREEZE").is_none() {
            let weights = error_weights(y_sel.view(), &atoms, &snapshot, &member_idx);
            if let Ok(dhat) = wls_update(y_sel.view(), x_sel.view(), weights.view()) {
                apply_block(&mut atoms, &atom_list, &dhat);
            }
        }

        if std::env::var_os("SGPR_TRACE").is_some() && processed.len() % 100 == 0 {
            eprintln!(
                "cbwlsu t={} |N|={} k_sel={}",
                processed.len(),
                members.len(),
                atom_list.len()
            );
        }
        processed.push(col);
        errors.push(global_error(y, &atoms, &codes));
    }

    let dict = finish(DlAlgorithm::Cbwlsu, atoms, config)?;
    let final_codes = batch_omp(y, dict.atoms.view(), &stop)?;
    let report = LearnReport {
        iterations: l,
        wall_time_secs: start.elapsed().as_secs_f64(),
        reconstruction_errors: errors,
        dropoff_counts: Vec::new(),
        prev_pool_sizes: Vec::new(),
        weighted_errors: Vec::new(),
    };
    Ok((dict, final_codes, report))
}

fn sparse_dot(a: &SparseCode, b: &SparseCode) -> f64 {
    let mut acc = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    while i < a.support.len() && j < b.support.len() {
        match a.support[i].cmp(&b.support[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                let atom = a.support[i];
                acc += a.coefficients[atom] * b.coefficients[atom];
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

// ---------------------------------------------------------------------------
// DOMINODL
// ---------------------------------------------------------------------------

/// Drop-off mini-batch online dictionary learning.
///
/// Scans the (seeded-permuted, column-normalized) training set in mini
/// batches of `N_b` new elements. Each iteration draws a random mini-batch
/// of `N_r` previous elements disjoint from the previous draw, keeps those
/// whose codes share an atom with the new batch, runs one [`wls_update`] on
/// the combined set, re-codes it, and drops previous elements that have not
/// been picked up for `N_u` iterations. Stops when the post-update weighted
/// error falls below `χ` or the data is exhausted.
pub fn dominodl(
    y: ArrayView2<f64>,
    config: &LearnConfig,
) -> Result<(Dictionary, SparseCodeMatrix, LearnReport)> {
    check_training_set(y, config)?;
    let start = Instant::now();
    let (m, l) = y.dim();

    let mut order: Vec<usize> = (0..l).collect();
    let mut rng_order = stream(
        config.seed,
        rng::TAG_LEARN_ORDER,
        DlAlgorithm::Dominodl.order_stream_index(),
    );
    order.shuffle(&mut rng_order);

    // normalized working copy in scan order
    let mut work = Array2::<f64>::zeros((m, l));
    for (pos, &col) in order.iter().enumerate() {
        let n = linalg::norm(y.column(col));
        if n > 0.0 {
            let normalized = y.column(col).mapv(|v| v / n);
            work.column_mut(pos).assign(&normalized);
        }
    }

    let init = init_dictionary(work.view(), config.atom_count, config.seed)?;
    let mut atoms = init.atoms;
    let delta = resolve_delta(work.view(), config);
    let stop = StopRule::residual(delta)?;

    let initial = batch_omp(work.view(), atoms.view(), &stop)?;
    let mut codes: Vec<SparseCode> = initial.codes;

    let mut alive = vec![true; l];
    let mut last_used = vec![0usize; l];
    let mut prev_mini: Vec<usize> = Vec::new();
    let mut rng_mb = stream(config.seed, rng::TAG_MINIBATCH, 0);

    let mut errors = Vec::new();
    let mut dropoffs = Vec::new();
    let mut pool_sizes = Vec::new();
    let mut chi_trace = Vec::new();
    let mut t = 0usize;
    let mut iter = 0usize;

    while t < l {
        iter += 1;
        let b_end = (t + config.new_batch).min(l);
        let batch: Vec<usize> = (t..b_end).collect();

        // fresh SR of the new mini-batch
        let fresh: Vec<SparseCode> = parallel::install(|| {
            batch
                .par_iter()
                .map(|&p| omp_unchecked(work.column(p), atoms.view(), &stop))
                .collect()
        });
        for (&p, code) in batch.iter().zip(fresh) {
            codes[p] = code;
        }

        let mut batch_atoms = vec![false; config.atom_count];
        for &p in &batch {
            for &j in &codes[p].support {
                batch_atoms[j] = true;
            }
        }

        let prev_pool: Vec<usize> = (0..t).filter(|&p| alive[p]).collect();
        pool_sizes.push(prev_pool.len());
        let mini: Vec<usize> = if prev_pool.len() < 2 * config.prev_batch {
            // too few previous samples: consider all of them
            prev_pool.clone()
        } else {
            let fresh_pool: Vec<usize> = prev_pool
                .iter()
                .copied()
                .filter(|p| !prev_mini.contains(p))
                .collect();
            let pool = if fresh_pool.len() >= config.prev_batch {
                fresh_pool
            } else {
                prev_pool.clone()
            };
            rand::seq::index::sample(&mut rng_mb, pool.len(), config.prev_batch)
                .into_iter()
                .map(|i| pool[i])
                .collect()
        };

        // previous elements correlated with the new batch: shared atoms in
        // the sparse decompositions
        let correlated: Vec<usize> = mini
            .iter()
            .copied()
            .filter(|&p| codes[p].support.iter().any(|&j| batch_atoms[j]))
            .collect();

        let mut combined = correlated.clone();
        combined.extend(batch.iter().copied());

        // update block (Alg.-step-12 rule): atoms used by both the new
        // batch and the previous mini-batch codes
        let mut mini_atoms = vec![false; config.atom_count];
        for &p in &mini {
            for &j in &codes[p].support {
                mini_atoms[j] = true;
            }
        }
        let block: Vec<usize> = (0..config.atom_count)
            .filter(|&j| batch_atoms[j] && mini_atoms[j])
            .collect();

        // the convergence statistic is meaningful only once previous
        // elements take part in the update
        let mut weighted_error = f64::INFINITY;
        if !block.is_empty() {
            // fit the block against the residual once every out-of-block
            // contribution is removed
            let mut y_sel = Array2::<f64>::zeros((m, combined.len()));
            let mut x_sel = Array2::<f64>::zeros((block.len(), combined.len()));
            for (c, &p) in combined.iter().enumerate() {
                let code = &codes[p];
                let mut resid = work.column(p).to_owned();
                for &j in &code.support {
                    if !(batch_atoms[j] && mini_atoms[j]) {
                        resid.scaled_add(-code.coefficients[j], &atoms.column(j));
                    }
                }
                y_sel.column_mut(c).assign(&resid);
                for (r, &j) in block.iter().enumerate() {
                    x_sel[(r, c)] = code.coefficients[j];
                }
            }
            let weights = error_weights(work.view(), &atoms, &codes, &combined);
            if x_sel.iter().any(|&v| v != 0.0) {
                if let Ok(dhat) = wls_update(y_sel.view(), x_sel.view(), weights.view()) {
                    apply_block(&mut atoms, &block, &dhat);
                }
            }
            // re-code the combined set with the updated atoms
            let recoded: Vec<SparseCode> = parallel::install(|| {
                combined
                    .par_iter()
                    .map(|&p| omp_unchecked(work.column(p), atoms.view(), &stop))
                    .collect()
            });
            for (&p, code) in combined.iter().zip(recoded) {
                codes[p] = code;
            }
            if !correlated.is_empty() {
                weighted_error = combined
                    .iter()
                    .zip(weights.iter())
                    .map(|(&p, &w)| w * codes[p].residual_norm * codes[p].residual_norm)
                    .sum();
            }
        }

        for &p in &correlated {
            last_used[p] = iter;
        }
        for &p in &batch {
            last_used[p] = iter;
        }

        // drop-off of stale previous elements
        let mut dropped = 0usize;
        for p in 0..b_end {
            if alive[p] && iter.saturating_sub(last_used[p]) >= config.drop_off_age {
                alive[p] = false;
                dropped += 1;
            }
        }
        dropoffs.push(dropped);
        chi_trace.push(weighted_error);
        let snapshot: Vec<Option<SparseCode>> = codes.iter().cloned().map(Some).collect();
        errors.push(global_error(work.view(), &atoms, &snapshot));

        prev_mini = mini;
        t = b_end;
        if weighted_error < config.convergence_threshold {
            break;
        }
    }

    let dict = finish(DlAlgorithm::Dominodl, atoms, config)?;
    let final_delta = resolve_delta(y, config);
    let final_codes = batch_omp(y, dict.atoms.view(), &StopRule::residual(final_delta)?)?;
    let report = LearnReport {
        iterations: iter,
        wall_time_secs: start.elapsed().as_secs_f64(),
        reconstruction_errors: errors,
        dropoff_counts: dropoffs,
        prev_pool_sizes: pool_sizes,
        weighted_errors: chi_trace,
    };
    Ok((dict, final_codes, report))
}

// ---------------------------------------------------------------------------
// Complexity probe
// ---------------------------------------------------------------------------

/// One timing measurement of [`complexity_probe`].
#[derive(Debug, Clone)]
pub struct ProbeRow {
    pub algorithm: DlAlgorithm,
    pub columns: usize,
    pub atom_count: usize,
    pub seconds: f64,
    pub iterations: usize,
}

/// Measure wall-times of the requested learners over a grid of problem sizes
/// `(L columns, K atoms)` under identical seeds and stop rules. Learners run
/// on a dedicated single thread so measurements are comparable.
pub fn complexity_probe(
    y: ArrayView2<f64>,
    algorithms: &[DlAlgorithm],
    sizes: &[(usize, usize)],
    base: &LearnConfig,
) -> Result<Vec<ProbeRow>> {
    if sizes.is_empty() || algorithms.is_empty() {
        return Err(Error::param("probe needs at least one size and algorithm"));
    }
    let mut rows = Vec::new();
    for &(l, k) in sizes {
        if l == 0 || l > y.ncols() {
            return Err(Error::param(format!(
                "probe size {l} exceeds available {} columns",
                y.ncols()
            )));
        }
        let sub = y.slice(s![.., ..l]);
        let config = LearnConfig {
            atom_count: k,
            ..base.clone()
        };
        for &algo in algorithms {
            let (_, _, report) = parallel::install_sequential(|| learn(algo, sub, &config))?;
            rows.push(ProbeRow {
                algorithm: algo,
                columns: l,
                atom_count: k,
                seconds: report.wall_time_secs,
                iterations: report.iterations,
            });
        }
    }
    Ok(rows)
}
