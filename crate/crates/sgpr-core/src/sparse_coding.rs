//! Sparse decomposition solvers.
//!
//! Greedy pursuit (OMP with Gram–Schmidt atom orthogonalization, and its
//! Gram-matrix batch variant) plus the LARS-LASSO homotopy path and a
//! Pareto-walk BPDN solver built on it. These are used standalone and as the
//! coding step inside every dictionary learner.

use crate::error::{Error, Result};
use crate::linalg;
use crate::parallel;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;

/// Stopping criterion for greedy pursuit: a sparsity cap, a residual
/// threshold, or both (whichever is met first).
#[derive(Debug, Clone, PartialEq)]
pub struct StopRule {
    max_sparsity: Option<usize>,
    residual_threshold: Option<f64>,
}

impl StopRule {
    /// Stop after `s` atoms.
    pub fn sparsity(s: usize) -> Result<Self> {
        if s == 0 {
            return Err(Error::param("sparsity target must be >= 1"));
        }
        Ok(Self {
            max_sparsity: Some(s),
            residual_threshold: None,
        })
    }

    /// Stop once the residual ℓ2 norm drops to `delta`.
    pub fn residual(delta: f64) -> Result<Self> {
        if !(delta >= 0.0) {
            return Err(Error::param("residual threshold must be >= 0"));
        }
        Ok(Self {
            max_sparsity: None,
            residual_threshold: Some(delta),
        })
    }

    /// Stop at whichever of the two criteria is met first.
    pub fn both(s: usize, delta: f64) -> Result<Self> {
        let mut rule = Self::sparsity(s)?;
        rule.residual_threshold = Self::residual(delta)?.residual_threshold;
        Ok(rule)
    }

    pub fn max_sparsity(&self) -> Option<usize> {
        self.max_sparsity
    }

    pub fn residual_threshold(&self) -> Option<f64> {
        self.residual_threshold
    }
}

/// Sparse coefficient vector over a dictionary.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    /// Dense length-K coefficient vector; entries outside `support` are zero.
    pub coefficients: Array1<f64>,
    /// Active atom indices, ascending.
    pub support: Vec<usize>,
    /// ℓ2 norm of `y − D x`.
    pub residual_norm: f64,
}

impl SparseCode {
    pub fn empty(atom_count: usize, residual_norm: f64) -> Self {
        Self {
            coefficients: Array1::zeros(atom_count),
            support: Vec::new(),
            residual_norm,
        }
    }

    pub fn sparsity(&self) -> usize {
        self.support.len()
    }

    /// Reconstruction `D x` using only the active atoms.
    pub fn reconstruct(&self, dict: ArrayView2<f64>) -> Array1<f64> {
        let mut out = Array1::<f64>::zeros(dict.nrows());
        for &j in &self.support {
            out.scaled_add(self.coefficients[j], &dict.column(j));
        }
        out
    }
}

/// Per-column sparse codes for a whole dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCodeMatrix {
    pub atom_count: usize,
    pub codes: Vec<SparseCode>,
}

impl SparseCodeMatrix {
    pub fn column_count(&self) -> usize {
        self.codes.len()
    }

    /// Dense K×L coefficient matrix.
    pub fn to_dense(&self) -> Array2<f64> {
        let mut x = Array2::<f64>::zeros((self.atom_count, self.codes.len()));
        for (l, code) in self.codes.iter().enumerate() {
            for &j in &code.support {
                x[(j, l)] = code.coefficients[j];
            }
        }
        x
    }
}

fn check_dict(y_len: usize, dict: ArrayView2<f64>, stop: &StopRule) -> Result<()> {
    let (m, k) = dict.dim();
    if y_len != m {
        return Err(Error::dim(format!(
            "signal length {y_len} vs dictionary rows {m}"
        )));
    }
    if let Some(s) = stop.max_sparsity() {
        if s > k {
            return Err(Error::param(format!(
                "requested sparsity {s} exceeds atom count {k}"
            )));
        }
    }
    for j in 0..k {
        if linalg::norm(dict.column(j)) == 0.0 {
            return Err(Error::param(format!("zero-norm atom at index {j}")));
        }
    }
    Ok(())
}

/// Orthogonal matching pursuit.
///
/// Each iteration selects the atom with the largest absolute correlation to
/// the residual (ties to the lowest index), orthogonalizes it against the
/// previously selected atoms, and projects the residual. After stopping, one
/// least-squares fit on the original selected atoms produces the reported
/// coefficients, so they refer to the dictionary's columns.
pub fn omp(y: ArrayView1<f64>, dict: ArrayView2<f64>, stop: &StopRule) -> Result<SparseCode> {
    check_dict(y.len(), dict, stop)?;
    Ok(omp_unchecked(y, dict, stop))
}

pub(crate) fn omp_unchecked(
    y: ArrayView1<f64>,
    dict: ArrayView2<f64>,
    stop: &StopRule,
) -> SparseCode {
    let (m, k) = dict.dim();
    let max_atoms = stop.max_sparsity().unwrap_or(usize::MAX).min(m.min(k));
    let mut residual = y.to_owned();
    let mut rnorm = linalg::norm(residual.view());
    if rnorm == 0.0 {
        return SparseCode::empty(k, 0.0);
    }

    let mut support: Vec<usize> = Vec::new();
    let mut ortho: Vec<Array1<f64>> = Vec::new();
    let mut excluded = vec![false; k];
    loop {
        if support.len() >= max_atoms {
            break;
        }
        if let Some(delta) = stop.residual_threshold() {
            if rnorm <= delta {
                break;
            }
        }
        let mut best: Option<usize> = None;
        let mut best_val = 0.0;
        for j in 0..k {
            if excluded[j] {
                continue;
            }
            let c = dict.column(j).dot(&residual).abs();
            if c > best_val {
                best_val = c;
                best = Some(j);
            }
        }
        let Some(j) = best else { break };
        if best_val == 0.0 {
            break;
        }
        excluded[j] = true;

        let mut q = dict.column(j).to_owned();
        for _ in 0..2 {
            for o in &ortho {
                let pr = o.dot(&q);
                q.scaled_add(-pr, o);
            }
        }
        let qn = linalg::norm(q.view());
        if qn <= 1e-12 {
            // atom already spanned by the selection
            continue;
        }
        q.mapv_inplace(|v| v / qn);
        let w = q.dot(&residual);
        residual.scaled_add(-w, &q);
        rnorm = linalg::norm(residual.view());
        ortho.push(q);
        support.push(j);
    }

    if support.is_empty() {
        return SparseCode::empty(k, linalg::norm(y));
    }
    support.sort_unstable();
    let mut sub = Array2::<f64>::zeros((m, support.len()));
    for (c, &j) in support.iter().enumerate() {
        sub.column_mut(c).assign(&dict.column(j));
    }
    let coef = linalg::lstsq(sub.view(), y);
    let mut x = Array1::<f64>::zeros(k);
    for (c, &j) in support.iter().enumerate() {
        x[j] = coef[c];
    }
    let fit = sub.dot(&coef);
    let residual_norm = linalg::norm((&y.to_owned() - &fit).view());
    SparseCode {
        coefficients: x,
        support,
        residual_norm,
    }
}

/// Batch OMP over the columns of `y`, equivalent per column to [`omp`].
///
/// Precomputes `G = DᵀD` and `α⁰ = Dᵀy`, runs the atom selection on the
/// correlation vector with a progressive Cholesky factorization of the
/// selected Gram block, and tracks the residual norm incrementally so
/// residual-threshold stopping never forms the residual vector.
pub fn batch_omp(
    y: ArrayView2<f64>,
    dict: ArrayView2<f64>,
    stop: &StopRule,
) -> Result<SparseCodeMatrix> {
    check_dict(y.nrows(), dict, stop)?;
    let gram = dict.t().dot(&dict);
    let codes: Vec<SparseCode> = parallel::install(|| {
        (0..y.ncols())
            .into_par_iter()
            .map(|l| batch_omp_column(y.column(l), dict, &gram, stop))
            .collect()
    });
    Ok(SparseCodeMatrix {
        atom_count: dict.ncols(),
        codes,
    })
}

fn batch_omp_column(
    y: ArrayView1<f64>,
    dict: ArrayView2<f64>,
    gram: &Array2<f64>,
    stop: &StopRule,
) -> SparseCode {
    let (m, k) = dict.dim();
    let max_atoms = stop.max_sparsity().unwrap_or(usize::MAX).min(m.min(k));
    let ynorm2 = y.dot(&y);
    if ynorm2 == 0.0 {
        return SparseCode::empty(k, 0.0);
    }
    let alpha0 = dict.t().dot(&y);
    let mut alpha = alpha0.clone();
    let mut selected: Vec<usize> = Vec::new();
    let mut mask = vec![false; k];
    // progressive lower Cholesky factor of G restricted to the selection
    let mut chol: Vec<Vec<f64>> = Vec::new();
    let mut coef: Array1<f64> = Array1::zeros(0);
    let mut err2 = ynorm2;

    loop {
        if selected.len() >= max_atoms {
            break;
        }
        if let Some(delta) = stop.residual_threshold() {
            if err2.max(0.0).sqrt() <= delta {
                break;
            }
        }
        let mut best: Option<usize> = None;
        let mut best_val = 0.0;
        for j in 0..k {
            if mask[j] {
                continue;
            }
            let c = alpha[j].abs();
            if c > best_val {
                best_val = c;
                best = Some(j);
            }
        }
        let Some(j) = best else { break };
        if best_val == 0.0 {
            break;
        }

        // extend the Cholesky factor with atom j
        let s = selected.len();
        let mut row = vec![0.0; s + 1];
        for (r, &i) in selected.iter().enumerate() {
            let mut sum = gram[(i, j)];
            for c in 0..r {
                sum -= chol[r][c] * row[c];
            }
            row[r] = sum / chol[r][r];
        }
        let d = gram[(j, j)] - row[..s].iter().map(|v| v * v).sum::<f64>();
        if d <= 1e-12 {
            // numerically dependent atom: exclude and keep searching
            mask[j] = true;
            continue;
        }
        row[s] = d.sqrt();
        chol.push(row);
        selected.push(j);
        mask[j] = true;

        // solve L Lᵀ c = α⁰_I
        let n = selected.len();
        let mut w = vec![0.0; n];
        for i in 0..n {
            let mut sum = alpha0[selected[i]];
            for c in 0..i {
                sum -= chol[i][c] * w[c];
            }
            w[i] = sum / chol[i][i];
        }
        let mut c = vec![0.0; n];
        for i in (0..n).rev() {
            let mut sum = w[i];
            for r in (i + 1)..n {
                sum -= chol[r][i] * c[r];
            }
            c[i] = sum / chol[i][i];
        }
        coef = Array1::from_vec(c);

        // α = α⁰ − G_I c ; ‖r‖² = ‖y‖² − ⟨α⁰_I, c⟩
        alpha.assign(&alpha0);
        let mut proj = 0.0;
        for (idx, &i) in selected.iter().enumerate() {
            let ci = coef[idx];
            proj += alpha0[i] * ci;
            alpha.scaled_add(-ci, &gram.column(i));
        }
        err2 = ynorm2 - proj;
    }

    if selected.is_empty() {
        return SparseCode::empty(k, ynorm2.sqrt());
    }

    let mut order: Vec<usize> = (0..selected.len()).collect();
    order.sort_by_key(|&i| selected[i]);
    let support: Vec<usize> = order.iter().map(|&i| selected[i]).collect();
    let mut x = Array1::<f64>::zeros(k);
    for &i in &order {
        x[selected[i]] = coef[i];
    }
    // report the exact residual of the final least-squares fit
    let mut fit = Array1::<f64>::zeros(m);
    for &j in &support {
        fit.scaled_add(x[j], &dict.column(j));
    }
    let residual_norm = linalg::norm((&y.to_owned() - &fit).view());
    SparseCode {
        coefficients: x,
        support,
        residual_norm,
    }
}

/// One breakpoint of the LARS-LASSO regularization path.
#[derive(Debug, Clone)]
pub struct LarsBreakpoint {
    pub lambda: f64,
    pub coefficients: Array1<f64>,
}

/// Full LARS-LASSO homotopy path of `argmin ½‖y − Dx‖² + λ‖x‖₁` from
/// `λ = ‖Dᵀy‖∞` down to `lambda_min`, one breakpoint per active-set change
/// plus the endpoint.
pub fn lars_lasso_path(
    y: ArrayView1<f64>,
    dict: ArrayView2<f64>,
    lambda_min: f64,
) -> Result<Vec<LarsBreakpoint>> {
    if lambda_min < 0.0 {
        return Err(Error::param("lambda must be >= 0"));
    }
    let (m, k) = dict.dim();
    if y.len() != m {
        return Err(Error::dim(format!(
            "signal length {} vs dictionary rows {m}",
            y.len()
        )));
    }

    let mut corr = dict.t().dot(&y);
    let mut x = Array1::<f64>::zeros(k);
    let mut lambda = corr.iter().fold(0.0f64, |a, &c| a.max(c.abs()));
    let mut path = vec![LarsBreakpoint {
        lambda,
        coefficients: x.clone(),
    }];
    if lambda <= lambda_min || lambda == 0.0 {
        return Ok(path);
    }

    let mut active: Vec<usize> = Vec::new();
    let mut in_active = vec![false; k];
    let first = argmax_abs(&corr, &in_active).expect("nonzero correlation");
    active.push(first);
    in_active[first] = true;

    let max_events = 8 * k.max(m) + 16;
    for _ in 0..max_events {
        let s = active.len();
        // equiangular direction: (D_Aᵀ D_A) d = sign(c_A)
        let mut gram = Array2::<f64>::zeros((s, s));
        for (a, &i) in active.iter().enumerate() {
            for (b, &j) in active.iter().enumerate() {
                gram[(a, b)] = dict.column(i).dot(&dict.column(j));
            }
        }
        let signs = Array1::from_iter(active.iter().map(|&j| corr[j].signum()));
        let dir = match linalg::solve_spd(gram.view(), signs.view()) {
            Some(d) => d,
            None => return Err(Error::Numerical("collinear active set in LARS".into())),
        };
        // correlation decay rates a = Dᵀ D_A d
        let mut v = Array1::<f64>::zeros(m);
        for (idx, &j) in active.iter().enumerate() {
            v.scaled_add(dir[idx], &dict.column(j));
        }
        let rates = dict.t().dot(&v);

        let gamma_target = lambda - lambda_min;
        let mut gamma = gamma_target;
        let mut event: Option<PathEvent> = None;

        for j in 0..k {
            if in_active[j] {
                continue;
            }
            // inactive correlation c_j - γ a_j meets ±(λ - γ)
            for (num, den) in [
                (lambda - corr[j], 1.0 - rates[j]),
                (lambda + corr[j], 1.0 + rates[j]),
            ] {
                if den > 1e-12 {
                    let g = num / den;
                    if g > 1e-12 && g < gamma - 1e-15 {
                        gamma = g;
                        event = Some(PathEvent::Add(j));
                    }
                }
            }
        }
        for (idx, &j) in active.iter().enumerate() {
            if dir[idx] != 0.0 {
                let g = -x[j] / dir[idx];
                if g > 1e-12 && g < gamma - 1e-15 {
                    gamma = g;
                    event = Some(PathEvent::Drop(idx));
                }
            }
        }

        for (idx, &j) in active.iter().enumerate() {
            x[j] += gamma * dir[idx];
        }
        corr.scaled_add(-gamma, &rates);
        lambda -= gamma;
        // pin active correlations to ±λ to stop numerical drift
        for &j in &active {
            corr[j] = corr[j].signum() * lambda;
        }

        match event {
            None => {
                path.push(LarsBreakpoint {
                    lambda,
                    coefficients: x.clone(),
                });
                break;
            }
            Some(PathEvent::Add(j)) => {
                path.push(LarsBreakpoint {
                    lambda,
                    coefficients: x.clone(),
                });
                active.push(j);
                in_active[j] = true;
            }
            Some(PathEvent::Drop(idx)) => {
                let j = active.remove(idx);
                x[j] = 0.0;
                in_active[j] = false;
                path.push(LarsBreakpoint {
                    lambda,
                    coefficients: x.clone(),
                });
                if active.is_empty() {
                    break;
                }
            }
        }
        if lambda <= lambda_min + 1e-300 {
            break;
        }
    }
    Ok(path)
}

enum PathEvent {
    Add(usize),
    Drop(usize),
}

fn argmax_abs(v: &Array1<f64>, skip: &[bool]) -> Option<usize> {
    let mut best = None;
    let mut best_val = 0.0;
    for (j, &c) in v.iter().enumerate() {
        if skip[j] {
            continue;
        }
        if c.abs() > best_val {
            best_val = c.abs();
            best = Some(j);
        }
    }
    best
}

/// LASSO solution at a single regularization value λ (Eq. of the penalized
/// least-squares form ½‖y − Dx‖² + λ‖x‖₁), via the homotopy path.
pub fn lars_lasso(
    y: ArrayView1<f64>,
    dict: ArrayView2<f64>,
    lambda: f64,
) -> Result<SparseCode> {
    let path = lars_lasso_path(y, dict, lambda)?;
    let last = path.last().expect("path has at least the zero solution");
    Ok(code_from_coefficients(y, dict, &last.coefficients))
}

fn code_from_coefficients(
    y: ArrayView1<f64>,
    dict: ArrayView2<f64>,
    coefficients: &Array1<f64>,
) -> SparseCode {
    let support: Vec<usize> = coefficients
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0.0)
        .map(|(j, _)| j)
        .collect();
    let mut fit = Array1::<f64>::zeros(y.len());
    for &j in &support {
        fit.scaled_add(coefficients[j], &dict.column(j));
    }
    let residual_norm = linalg::norm((&y.to_owned() - &fit).view());
    SparseCode {
        coefficients: coefficients.clone(),
        support,
        residual_norm,
    }
}

/// Basis-pursuit denoising via Pareto-curve traversal: walk the LARS path
/// from large λ downward and return the first breakpoint whose residual
/// satisfies `‖y − Dx‖₂ ≤ δ`. If no breakpoint reaches `δ`, the final
/// (minimum-residual) path solution is returned.
pub fn bpdn_solve(
    y: ArrayView1<f64>,
    dict: ArrayView2<f64>,
    delta: f64,
) -> Result<SparseCode> {
    let ynorm = linalg::norm(y);
    if !(0.0..=ynorm).contains(&delta) {
        return Err(Error::param(format!(
            "delta must satisfy 0 <= delta <= ||y|| = {ynorm}, got {delta}"
        )));
    }
    let path = lars_lasso_path(y, dict, 0.0)?;
    let mut last = None;
    for bp in &path {
        let code = code_from_coefficients(y, dict, &bp.coefficients);
        if code.residual_norm <= delta {
            return Ok(code);
        }
        last = Some(code);
    }
    Ok(last.expect("path is never empty"))
}
