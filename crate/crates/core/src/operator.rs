//! The nonnegative coefficient operator behind the embedding lower bound.
//!
//! For active sets `v ⊆ u` the entry is `A[v][u] = γ_u m^{|u \ v|} / γ_v`,
//! so that `(Ac)_v = γ_v^{-1} Σ_{u ⊇ v} c_u γ_u m^{|u \ v|}` and the lower
//! bound is `sup_{c >= 0} ‖Ac‖_p / ‖c‖_p`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::exponent::ExponentPair;
use crate::lattice::{diameter_bounded_sets, SubsetMask, WindowSet, MAX_MASK_DIM};
use crate::weights::WeightScheme;

/// Largest dense operator dimension (a 4096 x 4096 matrix is 128 MiB).
pub const DENSE_MAX_DIM: usize = 1 << 12;

/// Largest number of stored nonzeros in the active-set representation.
pub const SPARSE_MAX_NNZ: usize = 1 << 23;

/// Largest dimension for which Kronecker operators may be applied to full vectors.
pub const KRONECKER_APPLY_MAX_DIM: usize = 24;

/// Above this magnitude of `ln γ_u`, entries are formed from log-weights.
const LOG_WEIGHT_THRESHOLD: f64 = 300.0;

/// A linear map on real vectors, as needed by the norm routines.
pub trait LinearOperator: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `y = A x`.
    fn apply_into(&self, x: &[f64], y: &mut [f64]);
    /// `y = Aᵀ x`.
    fn apply_transpose_into(&self, x: &[f64], y: &mut [f64]);
    fn column_sums(&self) -> Vec<f64>;
    fn row_sums(&self) -> Vec<f64>;
    fn min_entry(&self) -> f64;

    fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows()];
        self.apply_into(x, &mut y);
        y
    }
}

/// A row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidInput("ragged matrix rows".into()));
        }
        Ok(DenseMatrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `self ⊗ other`, with `other` varying fastest.
    pub fn kronecker(&self, other: &DenseMatrix) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.get(i, j);
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out.set(i * other.rows + k, j * other.cols + l, a * other.get(k, l));
                    }
                }
            }
        }
        out
    }
}

impl LinearOperator for DenseMatrix {
    fn nrows(&self) -> usize {
        self.rows
    }

    fn ncols(&self) -> usize {
        self.cols
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    fn apply_transpose_into(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (yj, a) in y.iter_mut().zip(self.row(i)) {
                *yj += a * xi;
            }
        }
    }

    fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (s, a) in sums.iter_mut().zip(self.row(i)) {
                *s += a;
            }
        }
        sums
    }

    fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Nonnegative coefficients `c_u` indexed like an operator's active sets.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientVector(Vec<f64>);

impl CoefficientVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::Domain(format!(
                "coefficients must be finite and nonnegative, got {bad}"
            )));
        }
        Ok(CoefficientVector(values))
    }

    pub fn indicator(len: usize, index: usize) -> Self {
        let mut v = vec![0.0; len];
        v[index] = 1.0;
        CoefficientVector(v)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// One stored entry of the active-set representation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SparseEntry {
    pub col: u32,
    /// `|u \ v|`.
    pub diff_card: u32,
    pub value: f64,
}

/// Labels of the active sets an operator is indexed by.
#[derive(Clone, Debug, PartialEq)]
pub enum SetLabels {
    Masks(Vec<SubsetMask>),
    Windows(Vec<WindowSet>),
}

impl SetLabels {
    pub fn len(&self) -> usize {
        match self {
            SetLabels::Masks(m) => m.len(),
            SetLabels::Windows(w) => w.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cardinality(&self, i: usize) -> u32 {
        match self {
            SetLabels::Masks(m) => m[i].cardinality(),
            SetLabels::Windows(w) => w[i].cardinality(),
        }
    }

    pub fn diameter(&self, i: usize) -> u32 {
        match self {
            SetLabels::Masks(m) => m[i].diameter(),
            SetLabels::Windows(w) => w[i].diameter(),
        }
    }

    pub fn describe(&self, i: usize) -> String {
        match self {
            SetLabels::Masks(m) => m[i].to_string(),
            SetLabels::Windows(w) => {
                let coords: Vec<String> = w[i].coords().iter().map(|c| c.to_string()).collect();
                format!("{{{}}}", coords.join(","))
            }
        }
    }
}

/// Row-major sparse storage over a restricted support.
#[derive(Clone, Debug, PartialEq)]
pub struct ActiveSetOperator {
    labels: SetLabels,
    rows: Vec<Vec<SparseEntry>>,
    nnz: usize,
}

impl ActiveSetOperator {
    pub fn labels(&self) -> &SetLabels {
        &self.labels
    }

    pub fn rows(&self) -> &[Vec<SparseEntry>] {
        &self.rows
    }

    pub fn nnz(&self) -> usize {
        self.nnz
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.rows.len();
        let mut d = DenseMatrix::zeros(n, n);
        for (v, row) in self.rows.iter().enumerate() {
            for e in row {
                d.set(v, e.col as usize, e.value);
            }
        }
        d
    }
}

impl LinearOperator for ActiveSetOperator {
    fn nrows(&self) -> usize {
        self.rows.len()
    }

    fn ncols(&self) -> usize {
        self.rows.len()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for (yi, row) in y.iter_mut().zip(&self.rows) {
            *yi = row.iter().map(|e| e.value * x[e.col as usize]).sum();
        }
    }

    fn apply_transpose_into(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for (&xi, row) in x.iter().zip(&self.rows) {
            if xi == 0.0 {
                continue;
            }
            for e in row {
                y[e.col as usize] += e.value * xi;
            }
        }
    }

    fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.rows.len()];
        for row in &self.rows {
            for e in row {
                sums[e.col as usize] += e.value;
            }
        }
        sums
    }

    fn row_sums(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|e| e.value).sum())
            .collect()
    }

    fn min_entry(&self) -> f64 {
        // implicit zeros count when the matrix is not full
        let stored = self
            .rows
            .iter()
            .flatten()
            .map(|e| e.value)
            .fold(f64::INFINITY, f64::min);
        if self.nnz < self.rows.len() * self.rows.len() {
            stored.min(0.0)
        } else {
            stored
        }
    }
}

/// Per-coordinate 2x2 factors `[[1, γ_j m], [0, 1]]` of the product-weight operator.
///
/// Index 0 of a factor means "j not in the set", index 1 "j in the set";
/// global indices are bitmasks with coordinate 1 least significant.
#[derive(Clone, Debug, PartialEq)]
pub struct KroneckerOperator {
    factors: Vec<[[f64; 2]; 2]>,
}

impl KroneckerOperator {
    pub fn factors(&self) -> &[[[f64; 2]; 2]] {
        &self.factors
    }

    pub fn factor_matrix(&self, j: usize) -> DenseMatrix {
        let f = self.factors[j];
        DenseMatrix::from_rows(&[f[0].to_vec(), f[1].to_vec()]).expect("2x2")
    }

    /// The full `2^s x 2^s` matrix; small `s` only.
    pub fn expand(&self) -> Result<DenseMatrix> {
        if self.factors.len() > 12 {
            return Err(Error::Capacity(format!(
                "refusing to expand a Kronecker operator with s = {}",
                self.factors.len()
            )));
        }
        // Coordinate 1 is the least significant bit, so it must vary fastest:
        // expand as F_s ⊗ ... ⊗ F_1.
        let mut acc = DenseMatrix::identity(1);
        for j in (0..self.factors.len()).rev() {
            acc = acc.kronecker(&self.factor_matrix(j));
        }
        Ok(acc)
    }

    fn dim(&self) -> usize {
        1usize << self.factors.len()
    }

    fn apply_factors(&self, x: &[f64], y: &mut [f64], transpose: bool) {
        y.copy_from_slice(x);
        for (j, f) in self.factors.iter().enumerate() {
            let bit = 1usize << j;
            let f = if transpose {
                [[f[0][0], f[1][0]], [f[0][1], f[1][1]]]
            } else {
                *f
            };
            for i0 in 0..y.len() {
                if i0 & bit != 0 {
                    continue;
                }
                let i1 = i0 | bit;
                let (a, b) = (y[i0], y[i1]);
                y[i0] = f[0][0] * a + f[0][1] * b;
                y[i1] = f[1][0] * a + f[1][1] * b;
            }
        }
    }
}

impl LinearOperator for KroneckerOperator {
    fn nrows(&self) -> usize {
        self.dim()
    }

    fn ncols(&self) -> usize {
        self.dim()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.apply_factors(x, y, false);
    }

    fn apply_transpose_into(&self, x: &[f64], y: &mut [f64]) {
        self.apply_factors(x, y, true);
    }

    fn column_sums(&self) -> Vec<f64> {
        let ones = vec![1.0; self.dim()];
        let mut y = vec![0.0; self.dim()];
        self.apply_transpose_into(&ones, &mut y);
        y
    }

    fn row_sums(&self) -> Vec<f64> {
        let ones = vec![1.0; self.dim()];
        self.apply_vec(&ones)
    }

    fn min_entry(&self) -> f64 {
        self.factors
            .iter()
            .flat_map(|f| f.iter().flatten().copied())
            .fold(f64::INFINITY, f64::min)
    }
}

/// A dense operator together with the active sets indexing it.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    masks: Vec<SubsetMask>,
    matrix: DenseMatrix,
}

impl DenseOperator {
    pub fn masks(&self) -> &[SubsetMask] {
        &self.masks
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }
}

/// The coefficient operator in one of its three representations.
#[derive(Clone, Debug, PartialEq)]
pub enum EmbeddingOperator {
    Dense(DenseOperator),
    KroneckerFactors(KroneckerOperator),
    ActiveSet(ActiveSetOperator),
}

impl EmbeddingOperator {
    pub fn dim(&self) -> usize {
        match self {
            EmbeddingOperator::Dense(d) => d.masks.len(),
            EmbeddingOperator::KroneckerFactors(k) => k.dim(),
            EmbeddingOperator::ActiveSet(a) => a.rows.len(),
        }
    }

    /// `A c`. Kronecker operators are applied factor by factor.
    pub fn apply(&self, c: &CoefficientVector) -> Result<Vec<f64>> {
        if let EmbeddingOperator::KroneckerFactors(k) = self {
            if k.factors.len() > KRONECKER_APPLY_MAX_DIM {
                return Err(Error::Capacity(format!(
                    "Kronecker apply is capped at s = {KRONECKER_APPLY_MAX_DIM}"
                )));
            }
        }
        let n = self.dim();
        if c.len() != n {
            return Err(Error::InvalidInput(format!(
                "coefficient vector has length {} but the operator has dimension {n}",
                c.len()
            )));
        }
        Ok(self.as_linear().apply_vec(c.values()))
    }

    pub fn as_linear(&self) -> &dyn LinearOperator {
        match self {
            EmbeddingOperator::Dense(d) => &d.matrix,
            EmbeddingOperator::KroneckerFactors(k) => k,
            EmbeddingOperator::ActiveSet(a) => a,
        }
    }

    pub fn to_dense_matrix(&self) -> Result<DenseMatrix> {
        match self {
            EmbeddingOperator::Dense(d) => Ok(d.matrix.clone()),
            EmbeddingOperator::KroneckerFactors(k) => k.expand(),
            EmbeddingOperator::ActiveSet(a) => {
                if a.rows.len() > DENSE_MAX_DIM {
                    return Err(Error::Capacity("operator too large to densify".into()));
                }
                Ok(a.to_dense())
            }
        }
    }
}

/// Entry `γ_u m^k / γ_v`, through logs when weights are extreme.
fn entry(w_u: f64, w_v: f64, ln_u: f64, ln_v: f64, k: u32, m: f64, use_logs: bool) -> f64 {
    if use_logs {
        (ln_u - ln_v + f64::from(k) * m.ln()).exp()
    } else {
        w_u * m.powi(k as i32) / w_v
    }
}

fn needs_logs(ln_weights: &[f64]) -> bool {
    ln_weights.iter().any(|l| l.abs() > LOG_WEIGHT_THRESHOLD)
}

/// Dense operator over the active sets of `scheme` on `{1, ..., s}`.
pub fn build_dense(scheme: &WeightScheme, s: usize, exps: &ExponentPair) -> Result<EmbeddingOperator> {
    scheme.check_dimension(s)?;
    if scheme.support_size(s) > DENSE_MAX_DIM as f64 {
        return Err(Error::Capacity(format!(
            "support of size {} exceeds the dense cap {DENSE_MAX_DIM}; use the active-set or Kronecker representation",
            scheme.support_size(s)
        )));
    }
    let masks = scheme.active_sets(s)?;
    let weights: Vec<f64> = masks.iter().map(|&u| scheme.weight(u)).collect();
    let ln_weights: Vec<f64> = masks.iter().map(|&u| scheme.log_weight(u)).collect();
    let use_logs = needs_logs(&ln_weights);
    let m = exps.m();
    let n = masks.len();
    let mut matrix = DenseMatrix::zeros(n, n);
    for (vi, &v) in masks.iter().enumerate() {
        for (ui, &u) in masks.iter().enumerate() {
            if v.is_subset_of(u) {
                let k = u.difference(v).cardinality();
                let value = if vi == ui {
                    1.0
                } else {
                    entry(weights[ui], weights[vi], ln_weights[ui], ln_weights[vi], k, m, use_logs)
                };
                matrix.set(vi, ui, value);
            }
        }
    }
    Ok(EmbeddingOperator::Dense(DenseOperator { masks, matrix }))
}

/// Sparse operator storing only `v ⊆ u` pairs.
///
/// Masks are used for `s <= 63`; beyond that only finite-diameter weights
/// are supported, through window-encoded sets.
pub fn build_active_set(
    scheme: &WeightScheme,
    s: usize,
    exps: &ExponentPair,
) -> Result<EmbeddingOperator> {
    scheme.check_dimension(s)?;
    let estimated = estimated_nnz(scheme, s);
    if estimated > SPARSE_MAX_NNZ as f64 {
        return Err(Error::Capacity(format!(
            "active-set operator would store about {estimated:.3e} entries (cap {SPARSE_MAX_NNZ})"
        )));
    }
    let m = exps.m();
    if s <= MAX_MASK_DIM {
        let masks = scheme.active_sets(s)?;
        let weights: Vec<f64> = masks.iter().map(|&u| scheme.weight(u)).collect();
        let ln_weights: Vec<f64> = masks.iter().map(|&u| scheme.log_weight(u)).collect();
        let use_logs = needs_logs(&ln_weights);
        let index: HashMap<SubsetMask, u32> =
            masks.iter().enumerate().map(|(i, &u)| (u, i as u32)).collect();
        let mut rows: Vec<Vec<SparseEntry>> = vec![Vec::new(); masks.len()];
        let mut nnz = 0;
        for (ui, &u) in masks.iter().enumerate() {
            for v in u.submasks() {
                let vi = *index.get(&v).ok_or_else(|| {
                    Error::Internal(format!("support not downward closed at {v} ⊆ {u}"))
                })? as usize;
                let k = u.cardinality() - v.cardinality();
                let value = if k == 0 {
                    1.0
                } else {
                    entry(weights[ui], weights[vi], ln_weights[ui], ln_weights[vi], k, m, use_logs)
                };
                rows[vi].push(SparseEntry {
                    col: ui as u32,
                    diff_card: k,
                    value,
                });
                nnz += 1;
            }
        }
        return Ok(EmbeddingOperator::ActiveSet(ActiveSetOperator {
            labels: SetLabels::Masks(masks),
            rows,
            nnz,
        }));
    }
    let WeightScheme::FiniteDiameter { q, .. } = scheme else {
        return Err(Error::Capacity(format!(
            "active-set operators beyond s = {MAX_MASK_DIM} exist only for finite-diameter weights"
        )));
    };
    let sets = diameter_bounded_sets(s, *q)?;
    let weights: Vec<f64> = sets.iter().map(|&u| scheme.weight_window(u)).collect();
    let index: HashMap<WindowSet, u32> =
        sets.iter().enumerate().map(|(i, &u)| (u, i as u32)).collect();
    let mut rows: Vec<Vec<SparseEntry>> = vec![Vec::new(); sets.len()];
    let mut nnz = 0;
    for (ui, &u) in sets.iter().enumerate() {
        for v in u.subsets() {
            let vi = index[&v] as usize;
            let k = u.cardinality() - v.cardinality();
            let value = if k == 0 {
                1.0
            } else {
                weights[ui] * m.powi(k as i32) / weights[vi]
            };
            rows[vi].push(SparseEntry {
                col: ui as u32,
                diff_card: k,
                value,
            });
            nnz += 1;
        }
    }
    Ok(EmbeddingOperator::ActiveSet(ActiveSetOperator {
        labels: SetLabels::Windows(sets),
        rows,
        nnz,
    }))
}

/// `Σ_{u ∈ U} 2^{|u|}`, the number of stored entries of the active-set form.
pub fn estimated_nnz(scheme: &WeightScheme, s: usize) -> f64 {
    match scheme {
        WeightScheme::Product { .. } | WeightScheme::Pod { .. } => 3f64.powi(s as i32),
        WeightScheme::FiniteOrder { q, .. } => (0..=(*q).min(s))
            .map(|k| crate::weights::choose(s as u64, k as u64) * 2f64.powi(k as i32))
            .sum(),
        WeightScheme::FiniteDiameter { q, .. } => {
            // a diameter-ℓ set has 2 endpoints plus any of the ℓ-1 interior points
            let mut total = 1.0 + 2.0 * s as f64;
            for ell in 1..=(*q).min(s.saturating_sub(1)) {
                total += (s - ell) as f64 * 4.0 * 3f64.powi(ell as i32 - 1);
            }
            total
        }
        WeightScheme::Explicit(table) => table
            .support()
            .map(|u| 2f64.powi(u.cardinality() as i32))
            .sum(),
    }
}

/// The Kronecker form for product weights `γ_1, ..., γ_s`.
pub fn kronecker_factors(gammas: &[f64], exps: &ExponentPair) -> Result<EmbeddingOperator> {
    if let Some(g) = gammas.iter().find(|g| !(**g > 0.0) || !g.is_finite()) {
        return Err(Error::InvalidInput(format!("gammas must be positive, got {g}")));
    }
    let m = exps.m();
    Ok(EmbeddingOperator::KroneckerFactors(KroneckerOperator {
        factors: gammas.iter().map(|&g| [[1.0, g * m], [0.0, 1.0]]).collect(),
    }))
}

/// The Kronecker form of a scheme; only product weights factor.
pub fn kronecker_factors_for(
    scheme: &WeightScheme,
    s: usize,
    exps: &ExponentPair,
) -> Result<EmbeddingOperator> {
    scheme.check_dimension(s)?;
    match scheme {
        WeightScheme::Product { gammas } => kronecker_factors(&gammas[..s], exps),
        other => Err(Error::Usage(format!(
            "only product weights have a Kronecker factorization, got {}",
            other.kind()
        ))),
    }
}
