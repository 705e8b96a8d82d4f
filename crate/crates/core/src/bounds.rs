//! Exact endpoint norms, lower and upper bounds of the embedding, and the
//! explicit per-family bounds, collected into [`BoundReport`]s.
//!
//! Everything here is a statement about `‖ι‖` for one `(scheme, s, p)`. The
//! lower bound is the induced `p`-norm of the coefficient operator, the upper
//! bound interpolates between the exact `p = 1` and `p = ∞` norms.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exponent::ExponentPair;
use crate::lattice::{weighted_diameter_sum, SubsetMask, MAX_MASK_DIM};
use crate::operator::{
    build_active_set, estimated_nnz, kronecker_factors_for, DenseMatrix, EmbeddingOperator,
    SetLabels, DENSE_MAX_DIM, SPARSE_MAX_NNZ,
};
use crate::pnorm::{norm_p, norm_p_kronecker, NormMethod, PNormResult, PowerOptions, Witness};
use crate::weights::{ln_choose, WeightScheme};

/// Relative slack allowed in the ordering checks.
pub const ORDER_SLACK: f64 = 1e-9;

/// Cap on `Σ_{u ∈ U} 2^{|u|}` for the enumeration-based endpoint norms.
pub const ENUMERATION_MAX_TERMS: f64 = (1u64 << 26) as f64;

/// Dimensions at which the finite-diameter row-sum closed form is confirmed by enumeration.
const FDW_CONFIRM_MAX_DIM: usize = 12;

/// How the lower bound was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Product of the 2x2 factor norms.
    Kronecker,
    /// Sparse operator over the full support.
    ActiveSet,
    /// Finite-order operator reduced to one coordinate per cardinality class.
    CardinalityClasses,
    /// POD column of `[s]` (or the row sums at `p = ∞`) in closed form.
    PodStructured,
}

impl Route {
    pub fn as_str(self) -> &'static str {
        match self {
            Route::Kronecker => "kronecker",
            Route::ActiveSet => "active_set",
            Route::CardinalityClasses => "cardinality_classes",
            Route::PodStructured => "pod_structured",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LowerBound {
    pub result: PNormResult,
    pub route: Route,
    /// Short human-readable description of the witness.
    pub witness_summary: String,
}

/// A value of the simplified bound and the column that attains it.
#[derive(Clone, Debug, PartialEq)]
pub struct SimpleBound {
    pub value: f64,
    pub candidate: String,
}

/// A positive number carried as its logarithm.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize)]
pub struct LogValue {
    pub ln: f64,
}

impl LogValue {
    /// The value itself; `inf` when it overflows.
    pub fn value(self) -> f64 {
        self.ln.exp()
    }
}

/// All computed quantities for one `(scheme, s, p)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub scheme: String,
    pub s: usize,
    pub p: ExponentPair,
    pub lower_bound: f64,
    pub lower_bound_simple: f64,
    pub exact: Option<f64>,
    pub upper_bound: Option<f64>,
    pub method: NormMethod,
    pub iterations: usize,
    pub residual: f64,
    #[serde(skip)]
    pub route: Route,
    #[serde(skip)]
    pub witness_summary: String,
    #[serde(skip)]
    pub simple_candidate: String,
}

fn at_most(a: f64, b: f64) -> bool {
    a <= b + ORDER_SLACK * b.abs().max(f64::MIN_POSITIVE)
}

impl BoundReport {
    pub fn compute(
        scheme: &WeightScheme,
        s: usize,
        exps: &ExponentPair,
        opts: &PowerOptions,
    ) -> Result<BoundReport> {
        let lower = lower_bound(scheme, s, exps, opts)?;
        let simple = lower_bound_simple(scheme, s, exps)?;
        let exact = if exps.is_one() {
            Some(exact_norm_p1(scheme, s)?)
        } else if exps.is_infinite() {
            Some(exact_norm_pinf(scheme, s)?)
        } else {
            None
        };
        let upper = match upper_bound_interpolation(scheme, s, exps) {
            Ok(v) => Some(v),
            Err(Error::Capacity(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(BoundReport {
            scheme: scheme.to_string(),
            s,
            p: *exps,
            lower_bound: lower.result.value,
            lower_bound_simple: simple.value,
            exact,
            upper_bound: upper,
            method: lower.result.method,
            iterations: lower.result.iterations,
            residual: lower.result.residual,
            route: lower.route,
            witness_summary: lower.witness_summary,
            simple_candidate: simple.candidate,
        })
    }

    /// `simple ≤ lower ≤ exact ≤ upper` (and `lower ≤ upper`) up to [`ORDER_SLACK`].
    pub fn check_ordering(&self) -> Result<()> {
        let mut chain = vec![
            ("lower_bound_simple", self.lower_bound_simple),
            ("lower_bound", self.lower_bound),
        ];
        if let Some(e) = self.exact {
            chain.push(("exact", e));
        }
        if let Some(u) = self.upper_bound {
            chain.push(("upper_bound", u));
        }
        for w in chain.windows(2) {
            let ((na, a), (nb, b)) = (w[0], w[1]);
            if !at_most(a, b) {
                return Err(Error::Internal(format!(
                    "ordering violated for {} at s = {}, p = {}: {na} = {a} > {nb} = {b}",
                    self.scheme, self.s, self.p
                )));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// exact endpoint norms

/// `‖ι‖` at `p = 1`: `max_{u ∈ U} Σ_{v ⊆ u} γ_u / γ_v`.
pub fn exact_norm_p1(scheme: &WeightScheme, s: usize) -> Result<f64> {
    scheme.check_dimension(s)?;
    match scheme {
        WeightScheme::Product { gammas } => Ok(gammas[..s].iter().map(|g| 1.0 + g).product()),
        WeightScheme::FiniteOrder { omega, q } => Ok((1.0 + omega).powi((*q).min(s) as i32)),
        WeightScheme::FiniteDiameter { omega, q } => {
            Ok((1.0 + omega).powi((*q + 1).min(s) as i32))
        }
        WeightScheme::Pod { c, beta1, beta2 } => {
            Ok(pod_full_column_ln(s, *c, *beta1, *beta2, &ExponentPair::one()).exp())
        }
        WeightScheme::Explicit(_) => Ok(enumerated_endpoint_norms(scheme, s)?.0),
    }
}

/// `‖ι‖` at `p = ∞`: `max_{v ∈ U} Σ_{u ∈ U, u ⊇ v} γ_u / (2^{|u \ v|} γ_v)`.
pub fn exact_norm_pinf(scheme: &WeightScheme, s: usize) -> Result<f64> {
    scheme.check_dimension(s)?;
    match scheme {
        WeightScheme::Product { gammas } => {
            Ok(gammas[..s].iter().map(|g| 1.0 + g / 2.0).product())
        }
        WeightScheme::FiniteOrder { omega, q } => {
            // row v with |v| = j sums over the supersets adding at most q - j coordinates
            let x = omega / 2.0;
            let q = (*q).min(s);
            let best = (0..=q)
                .map(|j| {
                    (0..=q - j)
                        .map(|i| (ln_choose((s - j) as u64, i as u64) + i as f64 * x.ln()).exp())
                        .sum::<f64>()
                })
                .fold(0.0, f64::max);
            Ok(best)
        }
        WeightScheme::FiniteDiameter { omega, q } => {
            let closed = fdw_row_sum_at_empty(s, *q, *omega)?;
            if s <= FDW_CONFIRM_MAX_DIM {
                let brute = enumerated_endpoint_norms(scheme, s)?.1;
                if (brute - closed).abs() > 1e-12 * closed {
                    return Err(Error::Internal(format!(
                        "finite-diameter row sum at the empty set ({closed}) is not the maximal row ({brute})"
                    )));
                }
            }
            Ok(closed)
        }
        WeightScheme::Pod { c, beta1, beta2 } => Ok(pod_max_row_ln(s, *c, *beta1, *beta2).exp()),
        WeightScheme::Explicit(_) => Ok(enumerated_endpoint_norms(scheme, s)?.1),
    }
}

/// `1 + sx + Σ_{ℓ=1}^{min(q, s-1)} (s-ℓ) x² (1+x)^{ℓ-1}` with `x = ω/2`.
fn fdw_row_sum_at_empty(s: usize, q: usize, omega: f64) -> Result<f64> {
    let x = omega / 2.0;
    let mut total = 1.0 + s as f64 * x;
    for ell in 1..=q.min(s.saturating_sub(1)) {
        total += weighted_diameter_sum(s, ell, x)?;
    }
    Ok(total)
}

/// Maximal column and row sums of the operator at `p = 1` and `p = ∞`, by
/// direct enumeration of the support and its submasks.
pub fn enumerated_endpoint_norms(scheme: &WeightScheme, s: usize) -> Result<(f64, f64)> {
    let terms = estimated_nnz(scheme, s);
    if terms > ENUMERATION_MAX_TERMS {
        return Err(Error::Capacity(format!(
            "enumerating {terms:.3e} subset pairs exceeds the cap {ENUMERATION_MAX_TERMS:.3e}"
        )));
    }
    let sets = scheme.active_sets(s)?;
    let index: HashMap<SubsetMask, usize> = sets.iter().enumerate().map(|(i, &u)| (u, i)).collect();
    let weights: Vec<f64> = sets.iter().map(|&u| scheme.weight(u)).collect();
    let mut rows = vec![0.0; sets.len()];
    let mut best_col = 0.0f64;
    for (ui, &u) in sets.iter().enumerate() {
        let mut col = 0.0;
        for v in u.submasks() {
            let vi = *index.get(&v).ok_or_else(|| {
                Error::InvalidInput(format!("support is not downward closed: {v} ⊆ {u} missing"))
            })?;
            let ratio = weights[ui] / weights[vi];
            col += ratio;
            rows[vi] += ratio * 0.5f64.powi((u.cardinality() - v.cardinality()) as i32);
        }
        best_col = best_col.max(col);
    }
    Ok((best_col, rows.into_iter().fold(0.0, f64::max)))
}

// ---------------------------------------------------------------------------
// POD closed forms

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    for i in 1..=n {
        out.push(out[i - 1] + (i as f64).ln());
    }
    out
}

fn ln_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Adds one variable with log-value `ln_b` to log elementary symmetric sums.
fn push_elementary(le: &mut Vec<f64>, ln_b: f64) {
    le.push(f64::NEG_INFINITY);
    for k in (1..le.len()).rev() {
        le[k] = ln_add(le[k], ln_b + le[k - 1]);
    }
}

/// `ln ‖A e_{[s]}‖_p` for POD weights: `(1/p) ln Σ_k (s!/(s-k)!)^{pβ1} e_k(b)`
/// with `b_j = (c m / j^{β2})^p`. At `p = ∞` the largest entry of the column.
fn pod_full_column_ln(s: usize, c: f64, beta1: f64, beta2: f64, exps: &ExponentPair) -> f64 {
    let lf = ln_factorials(s);
    let ln_cm = c.ln() + exps.m().ln();
    if exps.is_infinite() {
        let mut best = 0.0f64;
        let mut acc = 0.0;
        for k in 1..=s {
            acc += ln_cm - beta2 * (k as f64).ln();
            best = best.max(beta1 * (lf[s] - lf[s - k]) + acc);
        }
        return best;
    }
    let p = exps.p();
    let mut le = vec![0.0];
    for j in 1..=s {
        push_elementary(&mut le, p * (ln_cm - beta2 * (j as f64).ln()));
    }
    let total = (0..=s).fold(f64::NEG_INFINITY, |acc, k| {
        ln_add(acc, p * beta1 * (lf[s] - lf[s - k]) + le[k])
    });
    total / p
}

/// `ln max_v` of the POD row sums at `p = ∞`.
///
/// For `|v| = t` the row is `Σ_i ((t+i)!/t!)^{β1} e_i(c / (2 j^{β2}) : j ∉ v)`,
/// which is largest when `v` holds the `t` largest coordinates.
fn pod_max_row_ln(s: usize, c: f64, beta1: f64, beta2: f64) -> f64 {
    let lf = ln_factorials(s);
    let mut le = vec![0.0];
    // n = 0: v = [s], the row is the single diagonal entry 1
    let mut best = 0.0f64;
    for n in 1..=s {
        push_elementary(&mut le, c.ln() - 2f64.ln() - beta2 * (n as f64).ln());
        let t = s - n;
        let row = (0..=n).fold(f64::NEG_INFINITY, |acc, i| {
            ln_add(acc, beta1 * (lf[t + i] - lf[t]) + le[i])
        });
        best = best.max(row);
    }
    best
}

// ---------------------------------------------------------------------------
// lower bounds

/// The induced `p`-norm of the coefficient operator: a certified lower bound on `‖ι‖`.
///
/// Product weights go through the Kronecker factors, finite-order weights
/// with a support beyond [`DENSE_MAX_DIM`] (or `s` beyond mask range)
/// through cardinality classes, POD weights beyond the sparse cap through
/// the closed-form column of `[s]` or the largest prefix block still on the
/// sparse route, and everything else through the sparse operator.
pub fn lower_bound(
    scheme: &WeightScheme,
    s: usize,
    exps: &ExponentPair,
    opts: &PowerOptions,
) -> Result<LowerBound> {
    scheme.check_dimension(s)?;
    match scheme {
        WeightScheme::Product { .. } => {
            let op = kronecker_factors_for(scheme, s, exps)?;
            let result = norm_p_kronecker(&op, exps, opts)?;
            Ok(LowerBound {
                result,
                route: Route::Kronecker,
                witness_summary: format!("tensor product of {s} two-entry factors"),
            })
        }
        WeightScheme::FiniteOrder { omega, q }
            if s > MAX_MASK_DIM || scheme.support_size(s) > DENSE_MAX_DIM as f64 =>
        {
            cardinality_class_norm(s, *q, *omega, exps, opts)
        }
        WeightScheme::Pod { c, beta1, beta2 } if estimated_nnz(scheme, s) > SPARSE_MAX_NNZ as f64 => {
            let (value, method, witness) = if exps.is_infinite() {
                (
                    pod_max_row_ln(s, *c, *beta1, *beta2).exp(),
                    NormMethod::RowSum,
                    "ones on the supersets of the maximal row",
                )
            } else {
                let column = pod_full_column_ln(s, *c, *beta1, *beta2, exps).exp();
                let prefix = pod_prefix_norm(scheme, exps, opts)?;
                if prefix.1 > column {
                    (prefix.1, NormMethod::PowerMethod, "optimized vector on the subsets of a prefix")
                } else {
                    (column, NormMethod::StructuredColumn, "indicator of [s]")
                }
            };
            Ok(LowerBound {
                result: PNormResult {
                    value,
                    method,
                    iterations: 0,
                    residual: 0.0,
                    witness: Witness::Structured(witness.into()),
                },
                route: Route::PodStructured,
                witness_summary: witness.into(),
            })
        }
        _ => active_set_norm(scheme, s, exps, opts),
    }
}

type PrefixKey = [u64; 8];

/// The operator on the subsets of `[k]` is a principal block of the one on
/// `[s]` for every `s >= k`, so its norm bounds every larger dimension from
/// below. Returns `(k, norm)` for the largest `k` still on the sparse route,
/// memoized because a scan asks for the same block at every `s`.
fn pod_prefix_norm(scheme: &WeightScheme, exps: &ExponentPair, opts: &PowerOptions) -> Result<(usize, f64)> {
    static CACHE: OnceLock<Mutex<HashMap<PrefixKey, Arc<OnceLock<Result<(usize, f64)>>>>>> = OnceLock::new();
    let WeightScheme::Pod { c, beta1, beta2 } = scheme else {
        return Err(Error::Usage("prefix blocks are only used for POD weights".into()));
    };
    let key = [
        c.to_bits(),
        beta1.to_bits(),
        beta2.to_bits(),
        exps.p().to_bits(),
        opts.tol.to_bits(),
        opts.max_iters as u64,
        opts.random_starts as u64,
        opts.seed,
    ];
    let slot = {
        let mut map = CACHE.get_or_init(Default::default).lock().unwrap_or_else(|e| e.into_inner());
        map.entry(key).or_default().clone()
    };
    slot.get_or_init(|| {
        let k = (1..=MAX_MASK_DIM)
            .take_while(|&k| estimated_nnz(scheme, k) <= SPARSE_MAX_NNZ as f64)
            .last()
            .unwrap_or(1);
        active_set_norm(scheme, k, exps, opts).map(|lb| (k, lb.result.value))
    })
    .clone()
}

fn active_set_norm(
    scheme: &WeightScheme,
    s: usize,
    exps: &ExponentPair,
    opts: &PowerOptions,
) -> Result<LowerBound> {
    let op = build_active_set(scheme, s, exps)?;
    let EmbeddingOperator::ActiveSet(sparse) = &op else {
        return Err(Error::Internal("expected an active-set operator".into()));
    };
    let labels = sparse.labels();
    let n = labels.len();
    let mut starts = Vec::new();

    // the column of largest p-norm, so the result dominates the simplified bound
    let mut col = vec![0.0f64; n];
    for row in sparse.rows() {
        for e in row {
            let c = &mut col[e.col as usize];
            if exps.is_infinite() {
                *c = c.max(e.value);
            } else {
                *c += e.value.powf(exps.p());
            }
        }
    }
    let best_col = (0..n).fold(0, |b, i| if col[i] > col[b] { i } else { b });
    starts.push(indicator(n, |i| i == best_col));

    // the proof vectors of the finite-order and finite-diameter lower bounds
    match scheme {
        WeightScheme::FiniteOrder { q, .. } => {
            let k = (*q).min(s) as u32;
            starts.push(indicator(n, |i| labels.cardinality(i) == k));
        }
        WeightScheme::FiniteDiameter { q, .. } if *q < s => {
            starts.push(indicator(n, |i| labels.diameter(i) == *q as u32));
        }
        _ => {}
    }

    let result = norm_p(op.as_linear(), exps, opts, &starts)?;
    let witness_summary = summarize_vector(&result.witness, labels);
    Ok(LowerBound {
        result,
        route: Route::ActiveSet,
        witness_summary,
    })
}

fn indicator(n: usize, pick: impl Fn(usize) -> bool) -> Vec<f64> {
    (0..n).map(|i| if pick(i) { 1.0 } else { 0.0 }).collect()
}

fn summarize_vector(witness: &Witness, labels: &SetLabels) -> String {
    let Witness::Vector(c) = witness else {
        return String::new();
    };
    let values = c.values();
    let nonzero = values.iter().filter(|v| **v > 0.0).count();
    let top = (0..values.len()).fold(0, |b, i| if values[i] > values[b] { i } else { b });
    if values.is_empty() {
        return "empty".into();
    }
    format!(
        "{nonzero} of {} coefficients nonzero, largest at {}",
        values.len(),
        labels.describe(top)
    )
}

/// The `(q+1) x (q+1)` matrix of the finite-order operator restricted to
/// vectors constant on each cardinality class, in coordinates
/// `b_k = C(s,k)^{1/p} a_k` that make the restriction an isometry of `ℓ_p`.
///
/// Entry `(j, k)`, `j <= k`: `(C(s,j)/C(s,k))^{1/p} C(s-j, k-j) (ωm)^{k-j}`.
pub fn cardinality_class_matrix(s: usize, q: usize, omega: f64, exps: &ExponentPair) -> DenseMatrix {
    let q = q.min(s);
    let inv_p = exps.inv_p();
    let ln_wm = omega.ln() + exps.m().ln();
    let mut r = DenseMatrix::zeros(q + 1, q + 1);
    for j in 0..=q {
        for k in j..=q {
            let ln = inv_p * (ln_choose(s as u64, j as u64) - ln_choose(s as u64, k as u64))
                + ln_choose((s - j) as u64, (k - j) as u64)
                + (k - j) as f64 * ln_wm;
            r.set(j, k, if j == k { 1.0 } else { ln.exp() });
        }
    }
    r
}

/// Finite-order lower bound over cardinality classes.
///
/// The operator commutes with coordinate permutations and `AᵀA` is
/// irreducible (row `∅` is positive), so the maximizer of `‖Ac‖_p/‖c‖_p` is
/// unique up to scale and therefore permutation invariant: restricting to
/// class-constant vectors loses nothing.
pub fn cardinality_class_norm(
    s: usize,
    q: usize,
    omega: f64,
    exps: &ExponentPair,
    opts: &PowerOptions,
) -> Result<LowerBound> {
    let r = cardinality_class_matrix(s, q, omega, exps);
    let k = q.min(s);
    let result = norm_p(&r, exps, opts, &[indicator(k + 1, |i| i == k)])?;
    let witness_summary = match &result.witness {
        Witness::Vector(b) => {
            let parts: Vec<String> = b.values().iter().map(|v| format!("{v:.3e}")).collect();
            format!("constant on cardinality classes, scaled class weights [{}]", parts.join(", "))
        }
        _ => String::new(),
    };
    Ok(LowerBound {
        result,
        route: Route::CardinalityClasses,
        witness_summary,
    })
}

/// Largest column `p`-norm of the operator,
/// `max_{u ∈ U} (Σ_{v ⊆ u} γ_u^p / ((p*+1)^{p|u\v|/p*} γ_v^p))^{1/p}`.
///
/// Structured schemes use the maximizing column in closed form: `[s]` for
/// product and POD weights, any `|u| = q` for finite-order weights, a full
/// window of `q + 1` consecutive coordinates for finite-diameter weights.
pub fn lower_bound_simple(scheme: &WeightScheme, s: usize, exps: &ExponentPair) -> Result<SimpleBound> {
    scheme.check_dimension(s)?;
    let m = exps.m();
    // (1 + x^p)^{1/p}, the column norm of one unit of |u|
    let unit = |x: f64| {
        if exps.is_infinite() {
            x.max(1.0)
        } else {
            (1.0 + x.powf(exps.p())).powf(exps.inv_p())
        }
    };
    let bound = |value: f64, candidate: String| Ok(SimpleBound { value, candidate });
    match scheme {
        WeightScheme::Product { gammas } => {
            bound(gammas[..s].iter().map(|g| unit(g * m)).product(), "[s]".into())
        }
        WeightScheme::FiniteOrder { omega, q } => {
            let k = (*q).min(s);
            bound(unit(omega * m).powi(k as i32), format!("|u| = {k}"))
        }
        WeightScheme::FiniteDiameter { omega, q } => {
            let k = (*q + 1).min(s);
            bound(unit(omega * m).powi(k as i32), format!("{k} consecutive coordinates"))
        }
        WeightScheme::Pod { c, beta1, beta2 } => {
            bound(pod_full_column_ln(s, *c, *beta1, *beta2, exps).exp(), "[s]".into())
        }
        WeightScheme::Explicit(table) => {
            let mut best = (0.0f64, SubsetMask::EMPTY);
            for u in table.support() {
                let gu = table.get(u);
                let terms = u.submasks().map(|v| {
                    gu * m.powi((u.cardinality() - v.cardinality()) as i32) / table.get(v)
                });
                let value = if exps.is_infinite() {
                    terms.fold(0.0, f64::max)
                } else {
                    let p = exps.p();
                    terms.map(|t| t.powf(p)).sum::<f64>().powf(1.0 / p)
                };
                if value > best.0 {
                    best = (value, u);
                }
            }
            bound(best.0, best.1.to_string())
        }
    }
}

/// `‖ι‖_{p=1}^{1/p} ‖ι‖_{p=∞}^{1/p*}`, an upper bound by interpolation.
pub fn upper_bound_interpolation(scheme: &WeightScheme, s: usize, exps: &ExponentPair) -> Result<f64> {
    if exps.is_one() {
        return exact_norm_p1(scheme, s);
    }
    if exps.is_infinite() {
        return exact_norm_pinf(scheme, s);
    }
    let p1 = exact_norm_p1(scheme, s)?;
    let pinf = exact_norm_pinf(scheme, s)?;
    Ok(p1.powf(exps.inv_p()) * pinf.powf(exps.inv_p_star()))
}

// ---------------------------------------------------------------------------
// product weights

/// `Π_j (1 + (γ_j/√3)(√(1 + γ_j²/12) + γ_j³/√12))^{1/2}`, evaluated as printed
/// for the `p = 2` norm under product weights.
pub fn exact_norm_p2_product(gammas: &[f64]) -> f64 {
    let sqrt3 = 3f64.sqrt();
    let sqrt12 = 12f64.sqrt();
    gammas
        .iter()
        .map(|g| (1.0 + (g / sqrt3) * ((1.0 + g * g / 12.0).sqrt() + g.powi(3) / sqrt12)).sqrt())
        .product()
}

/// `Π_j (1 + γ_j ((p-1)/(p*+1))^{1/p*})^{1/p}` for `1 < p < ∞`.
pub fn product_lower_bound(gammas: &[f64], exps: &ExponentPair) -> Result<f64> {
    if !exps.is_interior() {
        return Err(Error::Domain(format!(
            "the closed-form product lower bound needs 1 < p < inf, got p = {exps}; use the exact endpoint norms"
        )));
    }
    let p = exps.p();
    let factor = ((p - 1.0) / (exps.p_star() + 1.0)).powf(exps.inv_p_star());
    let ln: f64 = gammas.iter().map(|g| (g * factor).ln_1p()).sum();
    Ok((ln / p).exp())
}

// ---------------------------------------------------------------------------
// explicit bounds from the weight-family proofs

/// `m^q ω^q C(s,q)^{1-1/p}`: the ratio at the indicator of `{|u| = q}`.
pub fn fow_lower_bound_explicit(s: usize, q: usize, omega: f64, exps: &ExponentPair) -> Result<f64> {
    if q > s {
        return Err(Error::Domain(format!("finite-order bound needs q <= s, got q = {q}, s = {s}")));
    }
    let ln = q as f64 * (exps.m() * omega).ln() + exps.inv_p_star() * ln_choose(s as u64, q as u64);
    Ok(ln.exp())
}

/// `ω^q m² ((1+m)/2^{1/p})^{q-1} (s-q)^{1/p*}`: the bound at the indicator of `{diam(u) = q}`.
pub fn fdw_lower_bound_explicit(s: usize, q: usize, omega: f64, exps: &ExponentPair) -> Result<f64> {
    if q == 0 || q >= s {
        return Err(Error::Domain(format!(
            "finite-diameter bound needs 1 <= q < s, got q = {q}, s = {s}"
        )));
    }
    let m = exps.m();
    let middle = (1.0 + m) / 2f64.powf(exps.inv_p());
    Ok(omega.powi(q as i32)
        * m
        * m
        * middle.powi(q as i32 - 1)
        * ((s - q) as f64).powf(exps.inv_p_star()))
}

/// The POD bound from the chain `v = {k, ..., s}` inside the column of `[s]`:
/// `(Σ_{k=1}^s (s!/(s-k+1)!)^{pβ1} (cm)^{p(k-1)} ((k-1)!)^{-pβ2})^{1/p}`, as a log.
pub fn pod_chain_lower_bound(
    s: usize,
    exps: &ExponentPair,
    c: f64,
    beta1: f64,
    beta2: f64,
) -> Result<LogValue> {
    if s == 0 {
        return Err(Error::InvalidInput("dimension s must be at least 1".into()));
    }
    WeightScheme::pod(c, beta1, beta2)?;
    let lf = ln_factorials(s);
    let ln_cm = c.ln() + exps.m().ln();
    // ln of the k-th term before raising to p
    let term = |k: usize| {
        beta1 * (lf[s] - lf[s - k + 1]) + (k - 1) as f64 * ln_cm - beta2 * lf[k - 1]
    };
    let ln = if exps.is_infinite() {
        (1..=s).map(term).fold(f64::NEG_INFINITY, f64::max)
    } else {
        let p = exps.p();
        (1..=s).fold(f64::NEG_INFINITY, |acc, k| ln_add(acc, p * term(k))) / p
    };
    Ok(LogValue { ln })
}

/// Least-squares slope of `ln value` against `ln s` over the last half of the points.
pub fn fit_growth_rate(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.len() < 5 {
        return Err(Error::InvalidInput(format!(
            "a growth fit needs at least 5 points, got {}",
            pairs.len()
        )));
    }
    if let Some((s, v)) = pairs.iter().find(|(s, v)| !(*s > 0.0) || !(*v > 0.0)) {
        return Err(Error::Domain(format!(
            "growth fit needs positive abscissae and values, got ({s}, {v})"
        )));
    }
    let tail = &pairs[pairs.len() / 2..];
    let n = tail.len() as f64;
    let xs: Vec<f64> = tail.iter().map(|(s, _)| s.ln()).collect();
    let ys: Vec<f64> = tail.iter().map(|(_, v)| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("growth fit needs distinct abscissae".into()));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::lattice::SubsetMask;
    use crate::weights::ExplicitTable;

    fn exps(p: f64) -> ExponentPair {
        ExponentPair::new(p).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    fn lb(scheme: &WeightScheme, s: usize, p: f64) -> f64 {
        lower_bound(scheme, s, &exps(p), &PowerOptions::default())
            .unwrap()
            .result
            .value
    }

    fn single_pair_table() -> WeightScheme {
        let t = ExplicitTable::from_entries([
            (SubsetMask::EMPTY, 1.0),
            (SubsetMask::from_coords(&[1], 1).unwrap(), 1.0),
        ])
        .unwrap();
        WeightScheme::explicit(t)
    }

    #[test]
    fn exact_p1_examples() {
        let prod = WeightScheme::product(vec![1.0, 1.0, 1.0]).unwrap();
        assert_eq!(exact_norm_p1(&prod, 3).unwrap(), 8.0);
        let fdw = WeightScheme::finite_diameter(1.0, 2).unwrap();
        for s in [3, 5, 10, 200] {
            assert_eq!(exact_norm_p1(&fdw, s).unwrap(), 8.0);
        }
        let only_empty =
            WeightScheme::explicit(ExplicitTable::from_entries([(SubsetMask::EMPTY, 2.5)]).unwrap());
        assert_eq!(exact_norm_p1(&only_empty, 1).unwrap(), 1.0);
    }

    #[test]
    fn exact_pinf_examples() {
        assert_eq!(exact_norm_pinf(&single_pair_table(), 1).unwrap(), 1.5);
        let prod = WeightScheme::product(vec![0.8]).unwrap();
        assert!(rel(exact_norm_pinf(&prod, 1).unwrap(), 1.4) < 1e-15);
        let fdw = WeightScheme::finite_diameter(2.0, 1).unwrap();
        assert_eq!(exact_norm_pinf(&fdw, 5).unwrap(), 10.0);
    }

    #[test]
    fn closed_forms_match_enumeration() {
        let schemes = [
            WeightScheme::product(vec![0.3, 1.7, 0.9, 2.0, 0.05, 1.1, 0.6, 1.3, 0.4, 1.9]).unwrap(),
            WeightScheme::finite_order(0.7, 2).unwrap(),
            WeightScheme::finite_order(2.0, 3).unwrap(),
            WeightScheme::finite_diameter(0.5, 1).unwrap(),
            WeightScheme::finite_diameter(2.0, 3).unwrap(),
            WeightScheme::pod(1.0, 0.5, 1.0).unwrap(),
            WeightScheme::pod(2.5, 1.2, 2.0).unwrap(),
        ];
        for scheme in &schemes {
            for s in 1..=10 {
                let (p1, pinf) = enumerated_endpoint_norms(scheme, s).unwrap();
                let c1 = exact_norm_p1(scheme, s).unwrap();
                let cinf = exact_norm_pinf(scheme, s).unwrap();
                assert!(rel(c1, p1) < 1e-12, "{scheme} s={s}: {c1} vs {p1}");
                assert!(rel(cinf, pinf) < 1e-12, "{scheme} s={s}: {cinf} vs {pinf}");
            }
        }
    }

    #[test]
    fn endpoint_sharpness() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut schemes = vec![
            WeightScheme::product(vec![0.5, 1.5, 1.0, 0.2, 2.0, 0.7]).unwrap(),
            WeightScheme::finite_order(1.5, 2).unwrap(),
            WeightScheme::finite_diameter(0.75, 2).unwrap(),
            WeightScheme::pod(1.0, 0.5, 1.0).unwrap(),
        ];
        for _ in 0..6 {
            let s = rng.gen_range(1..=8);
            schemes.push(WeightScheme::explicit(
                ExplicitTable::random_downward_closed(s, 3, &mut rng).unwrap(),
            ));
        }
        for scheme in &schemes {
            for s in 1..=6 {
                if scheme.check_dimension(s).is_err() {
                    continue;
                }
                assert!(rel(lb(scheme, s, 1.0), exact_norm_p1(scheme, s).unwrap()) < 1e-10);
                assert!(rel(lb(scheme, s, f64::INFINITY), exact_norm_pinf(scheme, s).unwrap()) < 1e-10);
            }
        }
    }

    #[test]
    fn lower_bound_examples() {
        let prod = WeightScheme::product(vec![1.0]).unwrap();
        let a = 3f64.sqrt().recip();
        let singular = (a + (a * a + 4.0).sqrt()) / 2.0;
        let value = lb(&prod, 1, 2.0);
        assert!(rel(value, singular) < 1e-9);
        assert!(value <= exact_norm_p2_product(&[1.0]) * (1.0 + 1e-12));
    }

    #[test]
    fn simple_bound_examples() {
        let prod = WeightScheme::product(vec![1.0, 1.0]).unwrap();
        let simple = lower_bound_simple(&prod, 2, &exps(2.0)).unwrap();
        assert!(rel(simple.value, 4.0 / 3.0) < 1e-14);

        let only_empty =
            WeightScheme::explicit(ExplicitTable::from_entries([(SubsetMask::EMPTY, 1.0)]).unwrap());
        assert_eq!(lower_bound_simple(&only_empty, 1, &exps(2.0)).unwrap().value, 1.0);

        for scheme in [
            WeightScheme::product(vec![0.4, 1.2, 2.0]).unwrap(),
            WeightScheme::finite_order(1.3, 2).unwrap(),
            WeightScheme::finite_diameter(0.6, 1).unwrap(),
        ] {
            let simple = lower_bound_simple(&scheme, 3, &ExponentPair::one()).unwrap();
            assert!(rel(simple.value, exact_norm_p1(&scheme, 3).unwrap()) < 1e-14);
        }
    }

    /// Largest column p-norm straight from the definition, over every active set.
    fn brute_simple(scheme: &WeightScheme, s: usize, e: &ExponentPair) -> f64 {
        let mut best = 0.0f64;
        for u in scheme.active_sets(s).unwrap() {
            let terms: Vec<f64> = u
                .submasks()
                .map(|v| {
                    scheme.weight(u) * e.m().powi((u.cardinality() - v.cardinality()) as i32)
                        / scheme.weight(v)
                })
                .collect();
            let value = if e.is_infinite() {
                terms.iter().cloned().fold(0.0, f64::max)
            } else {
                terms.iter().map(|t| t.powf(e.p())).sum::<f64>().powf(e.inv_p())
            };
            best = best.max(value);
        }
        best
    }

    #[test]
    fn structured_simple_bound_matches_brute_force() {
        let schemes = [
            WeightScheme::product(vec![0.3, 1.7, 0.9, 2.0, 0.05, 1.1, 0.6]).unwrap(),
            WeightScheme::finite_order(0.7, 2).unwrap(),
            WeightScheme::finite_order(3.0, 3).unwrap(),
            WeightScheme::finite_diameter(0.5, 1).unwrap(),
            WeightScheme::finite_diameter(3.0, 2).unwrap(),
            WeightScheme::pod(1.0, 0.5, 1.0).unwrap(),
            WeightScheme::pod(3.0, 1.5, 2.0).unwrap(),
        ];
        for scheme in &schemes {
            for s in 1..=7 {
                for p in [1.0, 1.5, 2.0, 4.0, f64::INFINITY] {
                    let e = exps(p);
                    let fast = lower_bound_simple(scheme, s, &e).unwrap().value;
                    let slow = brute_simple(scheme, s, &e);
                    assert!(rel(fast, slow) < 1e-12, "{scheme} s={s} p={p}: {fast} vs {slow}");
                }
            }
        }
    }

    #[test]
    fn cardinality_classes_match_full_operator() {
        for (s, q, omega) in [(6, 2, 1.0), (9, 3, 0.5), (10, 2, 2.0), (7, 7, 1.0)] {
            let scheme = WeightScheme::finite_order(omega, q).unwrap();
            for p in [1.0, 1.5, 2.0, 3.0, f64::INFINITY] {
                let e = exps(p);
                let opts = PowerOptions::default();
                let classes = cardinality_class_norm(s, q, omega, &e, &opts).unwrap();
                let full = active_set_norm(&scheme, s, &e, &opts).unwrap();
                assert!(
                    rel(classes.result.value, full.result.value) < 1e-8,
                    "s={s} q={q} p={p}: {} vs {}",
                    classes.result.value,
                    full.result.value
                );
            }
        }
    }

    #[test]
    fn large_finite_order_uses_classes() {
        let scheme = WeightScheme::finite_order(1.0, 2).unwrap();
        let low = lower_bound(&scheme, 500, &exps(2.0), &PowerOptions::default()).unwrap();
        assert_eq!(low.route, Route::CardinalityClasses);
        let p1 = lower_bound(&scheme, 500, &ExponentPair::one(), &PowerOptions::default()).unwrap();
        assert!(rel(p1.result.value, 4.0) < 1e-12);
        let pinf = lower_bound(&scheme, 500, &ExponentPair::infinity(), &PowerOptions::default())
            .unwrap();
        assert!(rel(pinf.result.value, exact_norm_pinf(&scheme, 500).unwrap()) < 1e-12);
    }

    #[test]
    fn interpolation_examples() {
        let fow = WeightScheme::finite_order(1.0, 1).unwrap();
        let e = exps(2.0);
        let upper = upper_bound_interpolation(&fow, 100, &e).unwrap();
        let expected = (exact_norm_p1(&fow, 100).unwrap() * exact_norm_pinf(&fow, 100).unwrap()).sqrt();
        assert!(rel(upper, expected) < 1e-14);
        let report = BoundReport::compute(&fow, 100, &e, &PowerOptions::default()).unwrap();
        assert!(report.lower_bound <= upper);
        report.check_ordering().unwrap();

        assert_eq!(
            upper_bound_interpolation(&fow, 10, &ExponentPair::one()).unwrap(),
            exact_norm_p1(&fow, 10).unwrap()
        );
        assert_eq!(
            upper_bound_interpolation(&fow, 10, &ExponentPair::infinity()).unwrap(),
            exact_norm_pinf(&fow, 10).unwrap()
        );
    }

    #[test]
    fn p2_product_printed_formula() {
        assert!(rel(exact_norm_p2_product(&[1e-12, 1e-9]), 1.0) < 1e-8);
        let direct = (1.0 + 2.0 * (2f64.sqrt() + 12.0)).sqrt();
        assert!(rel(exact_norm_p2_product(&[12f64.sqrt()]), direct) < 1e-14);
        assert!((direct - 5.2753).abs() < 1e-4);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let g: Vec<f64> = (0..rng.gen_range(1..=6)).map(|_| rng.gen_range(0.01..2.0)).collect();
            assert!(exact_norm_p2_product(&g) >= product_lower_bound(&g, &exps(2.0)).unwrap());
        }
    }

    #[test]
    fn product_lower_bound_examples() {
        let g = 0.7;
        let v = product_lower_bound(&[g], &exps(2.0)).unwrap();
        assert!(rel(v, (1.0 + g / 3f64.sqrt()).sqrt()) < 1e-14);
        assert!(rel(product_lower_bound(&[1e-15; 3], &exps(3.0)).unwrap(), 1.0) < 1e-12);
        assert!(product_lower_bound(&[1.0], &ExponentPair::one()).is_err());
        assert!(product_lower_bound(&[1.0], &ExponentPair::infinity()).is_err());
    }

    #[test]
    fn product_p2_ordering_against_kronecker() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let s = rng.gen_range(1..=10);
            let g: Vec<f64> = (0..s).map(|_| rng.gen_range(1e-3..=2.0)).collect();
            let scheme = WeightScheme::product(g.clone()).unwrap();
            for p in [1.5, 2.0, 3.0] {
                let closed = product_lower_bound(&g, &exps(p)).unwrap();
                assert!(closed <= lb(&scheme, s, p) * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn summability() {
        let e = exps(2.0);
        let harmonic = |s: usize| -> Vec<f64> { (1..=s).map(|j| 1.0 / j as f64).collect() };
        let squares = |s: usize| -> Vec<f64> { (1..=s).map(|j| 1.0 / (j * j) as f64).collect() };
        let grow = product_lower_bound(&harmonic(10_000), &e).unwrap()
            / product_lower_bound(&harmonic(100), &e).unwrap();
        assert!(grow > 2.0);
        let settle = product_lower_bound(&squares(10_000), &e).unwrap()
            - product_lower_bound(&squares(1_000), &e).unwrap();
        assert!(settle.abs() < 1e-3);
    }

    #[test]
    fn explicit_bound_examples() {
        let e2 = exps(2.0);
        assert!(rel(fow_lower_bound_explicit(9, 1, 1.0, &e2).unwrap(), 3f64.sqrt()) < 1e-14);
        assert_eq!(fow_lower_bound_explicit(9, 2, 1.5, &ExponentPair::one()).unwrap(), 2.25);
        assert!(fow_lower_bound_explicit(2, 3, 1.0, &e2).is_err());

        assert!(rel(fdw_lower_bound_explicit(5, 1, 1.0, &ExponentPair::infinity()).unwrap(), 1.0) < 1e-15);
        let m = e2.m();
        assert!(rel(fdw_lower_bound_explicit(7, 1, 2.0, &e2).unwrap(), 2.0 * m * m * 6f64.sqrt()) < 1e-14);
        assert!(fdw_lower_bound_explicit(3, 3, 1.0, &e2).is_err());
    }

    #[test]
    fn explicit_bounds_are_dominated() {
        for s in 2..=12 {
            for p in [1.0, 1.5, 2.0, 4.0, f64::INFINITY] {
                let e = exps(p);
                for q in 1..s.min(4) {
                    for omega in [0.5, 1.0, 2.0] {
                        let fow = WeightScheme::finite_order(omega, q).unwrap();
                        let fdw = WeightScheme::finite_diameter(omega, q).unwrap();
                        let f = fow_lower_bound_explicit(s, q, omega, &e).unwrap();
                        let d = fdw_lower_bound_explicit(s, q, omega, &e).unwrap();
                        assert!(at_most(f, lb(&fow, s, p)), "fow s={s} q={q} p={p}");
                        assert!(at_most(d, lb(&fdw, s, p)), "fdw s={s} q={q} p={p}");
                    }
                }
                let pod = WeightScheme::pod(1.0, 0.5, 1.0).unwrap();
                let chain = pod_chain_lower_bound(s, &e, 1.0, 0.5, 1.0).unwrap().value();
                assert!(at_most(chain, lb(&pod, s, p)), "pod s={s} p={p}");
            }
        }
    }

    #[test]
    fn pod_chain_examples() {
        let e = exps(2.0);
        assert_eq!(pod_chain_lower_bound(1, &e, 1.0, 0.5, 1.0).unwrap().value(), 1.0);
        // plain summation of the printed series
        let (s, c, b1, b2) = (4usize, 1.0f64, 1.0, 2.0);
        let p = 2.0;
        let fact = |n: usize| (1..=n).map(|i| i as f64).product::<f64>();
        let cm = c * e.m();
        let direct: f64 = (1..=s)
            .map(|k| {
                (fact(s) / fact(s - k + 1)).powf(p * b1)
                    * cm.powf(p * (k - 1) as f64)
                    * fact(k - 1).powf(-p * b2)
            })
            .sum::<f64>()
            .sqrt();
        let logged = pod_chain_lower_bound(s, &e, c, b1, b2).unwrap();
        assert!(rel(logged.value(), direct) < 1e-13);
        assert!(logged.value() >= 1.0);
    }

    #[test]
    fn pod_large_dimension_stays_finite() {
        let e = exps(2.0);
        let v = pod_chain_lower_bound(4096, &e, 1.0, 0.5, 1.0).unwrap();
        assert!(v.ln.is_finite() && v.ln > 0.0);
        let pod = WeightScheme::pod(1.0, 0.5, 1.0).unwrap();
        let low = lower_bound(&pod, 200, &e, &PowerOptions::default()).unwrap();
        assert_eq!(low.route, Route::PodStructured);
        assert!(low.result.value >= pod_chain_lower_bound(200, &e, 1.0, 0.5, 1.0).unwrap().value());
    }

    #[test]
    fn growth_rate_examples() {
        let square: Vec<(f64, f64)> = (1..=10).map(|s| (s as f64, (s * s) as f64)).collect();
        assert!((fit_growth_rate(&square).unwrap() - 2.0).abs() < 1e-12);
        let flat: Vec<(f64, f64)> = (1..=10).map(|s| (s as f64, 3.5)).collect();
        assert!(fit_growth_rate(&flat).unwrap().abs() < 1e-12);
        let e = exps(2.0);
        let explicit: Vec<(f64, f64)> = (5..=10)
            .map(|k| {
                let s = 1usize << k;
                (s as f64, fow_lower_bound_explicit(s, 2, 1.0, &e).unwrap())
            })
            .collect();
        assert!((fit_growth_rate(&explicit).unwrap() - 1.0).abs() < 0.05);
        assert!(fit_growth_rate(&square[..4]).is_err());
        assert!(fit_growth_rate(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0), (4.0, 1.0), (5.0, 1.0)]).is_err());
    }

    #[test]
    fn fdw_row_at_empty_set_dominates() {
        for s in 2..=12 {
            for q in 1..s {
                for omega in [0.5, 1.0, 2.0, 5.0] {
                    let scheme = WeightScheme::finite_diameter(omega, q).unwrap();
                    assert!(exact_norm_pinf(&scheme, s).is_ok());
                }
            }
        }
    }

    #[test]
    fn report_json_fields() {
        let scheme = WeightScheme::product(vec![1.0, 1.0]).unwrap();
        let report = BoundReport::compute(&scheme, 2, &ExponentPair::one(), &PowerOptions::default())
            .unwrap();
        assert_eq!(report.lower_bound, 4.0);
        assert_eq!(report.exact, Some(4.0));
        let json = serde_json::to_string(&report).unwrap();
        for field in [
            "scheme", "s", "p", "lower_bound", "lower_bound_simple", "exact", "upper_bound", "method",
            "iterations", "residual",
        ] {
            assert!(json.contains(&format!("\"{field}\"")), "{field} missing in {json}");
        }
        let inf = BoundReport::compute(&scheme, 2, &ExponentPair::infinity(), &PowerOptions::default())
            .unwrap();
        assert!(serde_json::to_string(&inf).unwrap().contains("\"p\":\"inf\""));
    }

    proptest! {
        #[test]
        fn ordering_chain_on_random_tables(seed in any::<u64>(), p in 1.0f64..6.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = rng.gen_range(1..=7);
            let table = ExplicitTable::random_downward_closed(s, 3, &mut rng).unwrap();
            let scheme = WeightScheme::explicit(table);
            let report = BoundReport::compute(&scheme, s, &exps(p), &PowerOptions::default()).unwrap();
            prop_assert!(report.check_ordering().is_ok(), "{report:?}");
        }
    }
}
