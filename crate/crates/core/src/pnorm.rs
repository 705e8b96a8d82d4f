//! Induced `p`-norms `‖A‖_p = sup ‖Ac‖_p / ‖c‖_p` of nonnegative matrices.
//!
//! For an entrywise nonnegative `A`, `‖A|c|‖_p >= ‖Ac‖_p`, so the supremum
//! is attained on the nonnegative orthant and every routine here searches
//! only over `c >= 0`. For `1 < p < ∞` the value comes from a nonlinear power
//! iteration and is always the ratio at a returned witness, hence a
//! certified lower estimate of `‖A‖_p`.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exponent::ExponentPair;
use crate::operator::{CoefficientVector, DenseMatrix, EmbeddingOperator, LinearOperator};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMethod {
    ColumnSum,
    RowSum,
    Spectral,
    PowerMethod,
    Kronecker,
    /// A single closed-form column of an operator too large to store.
    StructuredColumn,
}

impl NormMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            NormMethod::ColumnSum => "column_sum",
            NormMethod::RowSum => "row_sum",
            NormMethod::Spectral => "spectral",
            NormMethod::PowerMethod => "power_method",
            NormMethod::Kronecker => "kronecker",
            NormMethod::StructuredColumn => "structured_column",
        }
    }
}

/// The vector attaining a reported norm value.
#[derive(Clone, Debug, PartialEq)]
pub enum Witness {
    Vector(CoefficientVector),
    /// Per-coordinate 2-vectors whose tensor product is the witness.
    Factored(Vec<[f64; 2]>),
    /// A witness known only by description, e.g. the indicator of `[s]` at large `s`.
    Structured(String),
}

impl Witness {
    /// The full witness vector; factored witnesses are expanded (small `s` only).
    pub fn expand(&self) -> Result<Vec<f64>> {
        match self {
            Witness::Vector(c) => Ok(c.values().to_vec()),
            Witness::Factored(factors) => {
                if factors.len() > 24 {
                    return Err(Error::Capacity("factored witness too long to expand".into()));
                }
                let mut out = vec![1.0];
                // factor j fills index bit j, coordinate 1 being the least significant
                for f in factors {
                    let mut next = Vec::with_capacity(out.len() * 2);
                    next.extend(out.iter().map(|x| x * f[0]));
                    next.extend(out.iter().map(|x| x * f[1]));
                    out = next;
                }
                Ok(out)
            }
            Witness::Structured(what) => Err(Error::Capacity(format!(
                "structured witness '{what}' has no stored vector"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PNormResult {
    pub value: f64,
    pub method: NormMethod,
    pub iterations: usize,
    /// Zero for exact methods; for iterative ones the last relative change
    /// of the ratio scaled by the value.
    pub residual: f64,
    pub witness: Witness,
}

/// Controls for the iterative routines.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerOptions {
    /// Stop once the ratio changes by less than this, relatively.
    pub tol: f64,
    pub max_iters: usize,
    pub random_starts: usize,
    pub seed: u64,
}

impl Default for PowerOptions {
    fn default() -> Self {
        PowerOptions {
            tol: 1e-10,
            max_iters: 50_000,
            random_starts: 8,
            seed: 0,
        }
    }
}

/// Spectral-norm iteration limits.
const SPECTRAL_TOL: f64 = 1e-12;
const SPECTRAL_MAX_ITERS: usize = 10_000;

/// `‖x‖_p` computed with the largest entry factored out.
pub fn vector_pnorm(x: &[f64], p: f64) -> f64 {
    let top = x.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if top == 0.0 || p.is_infinite() {
        return top;
    }
    if p == 1.0 {
        return x.iter().map(|v| v.abs()).sum();
    }
    top * x.iter().map(|v| (v.abs() / top).powf(p)).sum::<f64>().powf(1.0 / p)
}

/// `‖Ac‖_p / ‖c‖_p`.
pub fn ratio(a: &dyn LinearOperator, c: &[f64], p: f64) -> f64 {
    let denom = vector_pnorm(c, p);
    if denom == 0.0 {
        return 0.0;
    }
    vector_pnorm(&a.apply_vec(c), p) / denom
}

fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.map_or(true, |b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Maximum column sum.
pub fn norm_1(a: &dyn LinearOperator) -> PNormResult {
    let sums = a.column_sums();
    let (value, witness) = match argmax(&sums) {
        Some(j) => (sums[j], CoefficientVector::indicator(a.ncols(), j)),
        None => (0.0, CoefficientVector::new(Vec::new()).expect("empty")),
    };
    PNormResult {
        value,
        method: NormMethod::ColumnSum,
        iterations: 0,
        residual: 0.0,
        witness: Witness::Vector(witness),
    }
}

/// Maximum row sum; the witness is the all-ones vector on the maximizing row's support.
pub fn norm_inf(a: &dyn LinearOperator) -> PNormResult {
    let sums = a.row_sums();
    let Some(i) = argmax(&sums) else {
        return PNormResult {
            value: 0.0,
            method: NormMethod::RowSum,
            iterations: 0,
            residual: 0.0,
            witness: Witness::Vector(CoefficientVector::new(Vec::new()).expect("empty")),
        };
    };
    let mut e = vec![0.0; a.nrows()];
    e[i] = 1.0;
    let mut row = vec![0.0; a.ncols()];
    a.apply_transpose_into(&e, &mut row);
    let support: Vec<f64> = row.iter().map(|&x| if x > 0.0 { 1.0 } else { 0.0 }).collect();
    PNormResult {
        value: sums[i],
        method: NormMethod::RowSum,
        iterations: 0,
        residual: 0.0,
        witness: Witness::Vector(CoefficientVector::new(support).expect("0/1 entries")),
    }
}

/// Largest singular value by power iteration on `c ↦ Aᵀ(Ac)`.
pub fn norm_2(a: &dyn LinearOperator) -> PNormResult {
    let n = a.ncols();
    let mut x = vec![1.0 / (n.max(1) as f64).sqrt(); n];
    let mut y = vec![0.0; a.nrows()];
    let mut z = vec![0.0; n];
    let mut estimate = 0.0;
    let mut change = f64::INFINITY;
    let mut iterations = 0;
    while iterations < SPECTRAL_MAX_ITERS {
        iterations += 1;
        a.apply_into(&x, &mut y);
        let next = vector_pnorm(&y, 2.0);
        if next == 0.0 {
            change = 0.0;
            break;
        }
        change = (next - estimate).abs() / next;
        estimate = next;
        a.apply_transpose_into(&y, &mut z);
        let zn = vector_pnorm(&z, 2.0);
        if zn == 0.0 {
            break;
        }
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi = zi / zn;
        }
        if change < SPECTRAL_TOL {
            break;
        }
    }
    // report the ratio at the final iterate so the witness certifies it
    let value = ratio(a, &x, 2.0);
    let witness = x.iter().map(|v| v.max(0.0)).collect();
    PNormResult {
        value: value.max(0.0),
        method: NormMethod::Spectral,
        iterations,
        residual: change * value,
        witness: Witness::Vector(coeffs(witness)),
    }
}

fn coeffs(values: Vec<f64>) -> CoefficientVector {
    CoefficientVector::new(values).expect("nonnegative by construction")
}

struct StartOutcome {
    value: f64,
    witness: Vec<f64>,
    iterations: usize,
    last_change: f64,
}

/// One run of the nonlinear power iteration from `start`.
///
/// Returns the best ratio seen and its vector. The ratio sequence of the
/// iteration is nondecreasing for nonnegative `A`.
fn power_iterate(
    a: &dyn LinearOperator,
    exps: &ExponentPair,
    start: &[f64],
    opts: &PowerOptions,
    trace: Option<&mut Vec<f64>>,
) -> StartOutcome {
    let p = exps.p();
    let p_star = exps.p_star();
    let mut c: Vec<f64> = start.to_vec();
    let norm = vector_pnorm(&c, p);
    if norm == 0.0 {
        return StartOutcome {
            value: 0.0,
            witness: c,
            iterations: 0,
            last_change: 0.0,
        };
    }
    c.iter_mut().for_each(|v| *v /= norm);
    let mut y = a.apply_vec(&c);
    let mut current = vector_pnorm(&y, p);
    let mut best = (current, c.clone());
    let mut trace = trace;
    if let Some(t) = trace.as_deref_mut() {
        t.push(current);
    }
    let mut t = vec![0.0; y.len()];
    let mut z = vec![0.0; c.len()];
    let mut last_change = f64::INFINITY;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        iterations += 1;
        let ymax = y.iter().fold(0.0f64, |acc, v| acc.max(*v));
        if ymax == 0.0 {
            last_change = 0.0;
            break;
        }
        for (ti, yi) in t.iter_mut().zip(&y) {
            *ti = (yi / ymax).powf(p - 1.0);
        }
        a.apply_transpose_into(&t, &mut z);
        let zmax = z.iter().fold(0.0f64, |acc, v| acc.max(*v));
        if zmax == 0.0 {
            last_change = 0.0;
            break;
        }
        for (ci, zi) in c.iter_mut().zip(&z) {
            *ci = (zi / zmax).powf(p_star - 1.0);
        }
        let norm = vector_pnorm(&c, p);
        c.iter_mut().for_each(|v| *v /= norm);
        a.apply_into(&c, &mut y);
        let next = vector_pnorm(&y, p);
        if let Some(t) = trace.as_deref_mut() {
            t.push(next);
        }
        if next > best.0 {
            best = (next, c.clone());
        }
        last_change = (next - current).abs() / next.max(f64::MIN_POSITIVE);
        current = next;
        if last_change < opts.tol {
            break;
        }
    }
    StartOutcome {
        value: best.0,
        witness: best.1,
        iterations,
        last_change,
    }
}

/// The ratio sequence of a single power iteration run, for diagnostics and tests.
pub fn power_trace(
    a: &dyn LinearOperator,
    exps: &ExponentPair,
    start: &[f64],
    opts: &PowerOptions,
) -> Vec<f64> {
    let mut trace = Vec::new();
    power_iterate(a, exps, start, opts, Some(&mut trace));
    trace
}

/// Induced `p`-norm for `1 < p < ∞`; endpoints route to [`norm_1`] / [`norm_inf`].
///
/// Multi-start: the all-ones vector, the indicator of the largest column,
/// the support of the largest row, every vector in `extra_starts`, and
/// `opts.random_starts` random positive vectors. The reported value is the
/// best ratio over all runs.
pub fn norm_p(
    a: &dyn LinearOperator,
    exps: &ExponentPair,
    opts: &PowerOptions,
    extra_starts: &[Vec<f64>],
) -> Result<PNormResult> {
    if exps.is_one() {
        return Ok(norm_1(a));
    }
    if exps.is_infinite() {
        return Ok(norm_inf(a));
    }
    if a.min_entry() < 0.0 {
        return Err(Error::Domain(
            "the nonnegative power iteration needs an entrywise nonnegative matrix".into(),
        ));
    }
    let n = a.ncols();
    if n == 0 {
        return Ok(PNormResult {
            value: 0.0,
            method: NormMethod::PowerMethod,
            iterations: 0,
            residual: 0.0,
            witness: Witness::Vector(coeffs(Vec::new())),
        });
    }
    if let Some(bad) = extra_starts.iter().find(|s| s.len() != n) {
        return Err(Error::InvalidInput(format!(
            "start vector of length {} for an operator of dimension {n}",
            bad.len()
        )));
    }

    let mut starts: Vec<Vec<f64>> = vec![vec![1.0; n]];
    if let Witness::Vector(c) = norm_1(a).witness {
        starts.push(c.into_inner());
    }
    if let Witness::Vector(c) = norm_inf(a).witness {
        starts.push(c.into_inner());
    }
    starts.extend(extra_starts.iter().cloned());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.random_starts {
        starts.push((0..n).map(|_| rng.gen_range(0.05..1.0)).collect());
    }

    let outcomes: Vec<StartOutcome> = starts
        .par_iter()
        .map(|start| power_iterate(a, exps, start, opts, None))
        .collect();
    let best = outcomes
        .into_iter()
        .reduce(|best, next| if next.value > best.value { next } else { best })
        .expect("at least one start");
    Ok(PNormResult {
        value: best.value,
        method: NormMethod::PowerMethod,
        iterations: best.iterations,
        residual: best.last_change * best.value,
        witness: Witness::Vector(coeffs(best.witness)),
    })
}

/// `‖⊗_j F_j‖_p = Π_j ‖F_j‖_p` over the 2x2 factors of a Kronecker operator.
///
/// Identical factors are evaluated once, so this runs in `O(s)` up to the
/// number of distinct `γ_j`.
pub fn norm_p_kronecker(
    op: &EmbeddingOperator,
    exps: &ExponentPair,
    opts: &PowerOptions,
) -> Result<PNormResult> {
    let EmbeddingOperator::KroneckerFactors(k) = op else {
        return Err(Error::Usage(
            "norm_p_kronecker needs the Kronecker factor representation".into(),
        ));
    };
    let factor_opts = PowerOptions {
        random_starts: 0,
        ..opts.clone()
    };
    let mut cache: HashMap<[u64; 4], (f64, [f64; 2], usize)> = HashMap::new();
    let mut value = 1.0;
    let mut iterations = 0;
    let mut witness = Vec::with_capacity(k.factors().len());
    for f in k.factors() {
        let key = [f[0][0].to_bits(), f[0][1].to_bits(), f[1][0].to_bits(), f[1][1].to_bits()];
        let entry = match cache.get(&key) {
            Some(e) => *e,
            None => {
                let m = DenseMatrix::from_rows(&[f[0].to_vec(), f[1].to_vec()])?;
                let r = norm_p(&m, exps, &factor_opts, &[vec![1.0, 1.0]])?;
                let w = match &r.witness {
                    Witness::Vector(c) => [c.values()[0], c.values()[1]],
                    Witness::Factored(_) | Witness::Structured(_) => unreachable!("dense norm returns a vector"),
                };
                let e = (r.value, w, r.iterations);
                cache.insert(key, e);
                e
            }
        };
        value *= entry.0;
        iterations += entry.2;
        witness.push(entry.1);
    }
    Ok(PNormResult {
        value,
        method: NormMethod::Kronecker,
        iterations,
        residual: 0.0,
        witness: Witness::Factored(witness),
    })
}

/// Independent grid-and-ascent maximizer of `‖Ac‖_p / ‖c‖_p` over `c >= 0`,
/// used only to validate [`norm_p`].
pub mod oracle {
    use super::*;

    pub const MAX_DIM: usize = 16;
    const GRID_BUDGET: f64 = 60_000.0;
    const KEEP: usize = 6;

    fn ratio_of(a: &DenseMatrix, c: &[f64], p: f64) -> f64 {
        let n = c.len();
        let mut y = vec![0.0; a.nrows()];
        for (i, yi) in y.iter_mut().enumerate() {
            for (j, cj) in c.iter().enumerate().take(n) {
                *yi += a.get(i, j) * cj;
            }
        }
        let denom = vector_pnorm(c, p);
        if denom == 0.0 {
            0.0
        } else {
            vector_pnorm(&y, p) / denom
        }
    }

    fn ascend(a: &DenseMatrix, mut c: Vec<f64>, p: f64) -> f64 {
        let mut best = ratio_of(a, &c, p);
        let mut step = 0.25;
        let mut rounds = 0;
        while step > 1e-11 && rounds < 200_000 {
            rounds += 1;
            let mut improved = false;
            for i in 0..c.len() {
                for dir in [1.0, -1.0] {
                    let old = c[i];
                    c[i] = (old + dir * step).max(0.0);
                    let r = ratio_of(a, &c, p);
                    if r > best * (1.0 + 1e-15) {
                        best = r;
                        improved = true;
                    } else {
                        c[i] = old;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
            let top = c.iter().fold(0.0f64, |acc, v| acc.max(*v));
            if top > 0.0 {
                c.iter_mut().for_each(|v| *v /= top);
            }
        }
        best
    }

    /// Brute-force `‖A‖_p` for a square nonnegative matrix of dimension at most 16.
    pub fn brute_force_norm_p(a: &DenseMatrix, exps: &ExponentPair) -> Result<f64> {
        let n = a.ncols();
        if n > MAX_DIM {
            return Err(Error::Capacity(format!(
                "brute-force oracle handles dimension <= {MAX_DIM}, got {n}"
            )));
        }
        if n == 0 {
            return Ok(0.0);
        }
        let p = exps.p();
        let levels = (GRID_BUDGET.powf(1.0 / n as f64).floor() as usize).max(2) - 1;
        let total = (levels + 1).pow(n as u32);
        let mut scored: Vec<(f64, Vec<f64>)> = Vec::new();
        let mut digits = vec![0usize; n];
        for _ in 0..total {
            let c: Vec<f64> = digits.iter().map(|&d| d as f64 / levels as f64).collect();
            let r = ratio_of(a, &c, p);
            if r > 0.0 {
                scored.push((r, c));
            }
            for d in digits.iter_mut() {
                *d += 1;
                if *d <= levels {
                    break;
                }
                *d = 0;
            }
        }
        scored.sort_by(|x, y| y.0.total_cmp(&x.0));
        scored.truncate(KEEP);
        Ok(scored
            .into_iter()
            .map(|(_, c)| ascend(a, c, p))
            .fold(0.0, f64::max))
    }
}
