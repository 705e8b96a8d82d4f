//! The function-space side of the lower bound: the extremal univariate
//! witness `h`, the anchored and ANOVA forms of the witness function
//! `f = Σ_u c_u γ_u Π_{j∈u} H(x_j)`, and tensor Gauss–Legendre evaluation of
//! both weighted norms.
//!
//! Coefficient vectors are indexed like the operator: by the active sets of
//! the scheme in increasing bit order.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::exponent::ExponentPair;
use crate::lattice::SubsetMask;
use crate::operator::CoefficientVector;
use crate::weights::WeightScheme;

/// Largest dimension handled by tensor quadrature.
pub const QUADRATURE_MAX_DIM: usize = 3;

/// Nodes per axis used by default.
pub const DEFAULT_NODES: usize = 64;

/// Gauss points per panel of the composite rule.
const PANEL_ORDER: usize = 16;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton's method on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A composite Gauss–Legendre rule on `[0, 1]`.
///
/// Panels halve in width towards `t = 1`, where the witness `h` loses
/// smoothness when `p > 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureGrid {
    /// `n` points per axis: one panel when `n <= 16`, otherwise `n / 16` graded panels.
    pub fn graded(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("a quadrature rule needs at least one node".into()));
        }
        if n > PANEL_ORDER && n % PANEL_ORDER != 0 {
            return Err(Error::InvalidInput(format!(
                "node counts above {PANEL_ORDER} must be multiples of {PANEL_ORDER}, got {n}"
            )));
        }
        let order = n.min(PANEL_ORDER);
        let panels = n / order;
        // breakpoints 0, 1/2, 3/4, ..., 1 - 2^{-(panels-1)}, 1
        let mut breaks = vec![0.0];
        for k in 1..panels {
            breaks.push(1.0 - 0.5f64.powi(k as i32));
        }
        breaks.push(1.0);
        let (x, w) = gauss_legendre(order);
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for pair in breaks.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let half = (b - a) / 2.0;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(a + half * (xi + 1.0));
                weights.push(half * wi);
            }
        }
        Ok(QuadratureGrid { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫₀¹ g`.
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * g(*x)).sum()
    }

    /// `∫_{[0,1]^d} g` over the tensor grid; `g` receives a point of length `d`.
    pub fn integrate_tensor(&self, d: usize, mut g: impl FnMut(&[f64]) -> f64) -> f64 {
        let n = self.len();
        let mut idx = vec![0usize; d];
        let mut point = vec![0.0; d];
        let mut total = 0.0;
        loop {
            let mut w = 1.0;
            for (k, &i) in idx.iter().enumerate() {
                point[k] = self.nodes[i];
                w *= self.weights[i];
            }
            total += w * g(&point);
            // odometer increment
            let mut k = 0;
            loop {
                if k == d {
                    return total;
                }
                idx[k] += 1;
                if idx[k] < n {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }
}

/// The unit-norm `h ∈ L_p(0,1)` extremal for Hölder's inequality against `1 - t`:
/// `h(t) = (p*+1)^{1/p} (1-t)^{p*-1}`, and `h ≡ 1` at `p = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WitnessFunction {
    exps: ExponentPair,
    scale: f64,
}

/// The witness for `exps`; `p = ∞` has no quadrature path.
pub fn extremal_h(exps: &ExponentPair) -> Result<WitnessFunction> {
    if exps.is_infinite() {
        return Err(Error::Usage(
            "p = inf has no witness-function quadrature; its constant m = 1/2 enters only the analytic bounds"
                .into(),
        ));
    }
    let scale = if exps.is_one() {
        1.0
    } else {
        (exps.p_star() + 1.0).powf(exps.inv_p())
    };
    Ok(WitnessFunction { exps: *exps, scale })
}

impl WitnessFunction {
    pub fn exps(&self) -> &ExponentPair {
        &self.exps
    }

    /// `h(t)`.
    pub fn h(&self, t: f64) -> f64 {
        if self.exps.is_one() {
            return 1.0;
        }
        self.scale * (1.0 - t).powf(self.exps.p_star() - 1.0)
    }

    /// `H(x) = ∫₀ˣ h = (p*+1)^{1/p} (1 - (1-x)^{p*}) / p*`.
    pub fn big_h(&self, x: f64) -> f64 {
        if self.exps.is_one() {
            return x;
        }
        let ps = self.exps.p_star();
        self.scale * (1.0 - (1.0 - x).powf(ps)) / ps
    }

    /// `∫₀¹ H = ∫₀¹ h(t)(1-t) dt`, equal to `m` for `p > 1`.
    pub fn mean_big_h(&self) -> f64 {
        if self.exps.is_one() {
            0.5
        } else {
            self.exps.m()
        }
    }
}

/// Checks `s` and `c` against the scheme and returns the active sets with their weights.
fn setup(
    c: &CoefficientVector,
    scheme: &WeightScheme,
    s: usize,
) -> Result<(Vec<SubsetMask>, Vec<f64>)> {
    if s > QUADRATURE_MAX_DIM {
        return Err(Error::Capacity(format!(
            "witness quadrature is capped at s = {QUADRATURE_MAX_DIM}, got s = {s}"
        )));
    }
    let sets = scheme.active_sets(s)?;
    if c.len() != sets.len() {
        return Err(Error::InvalidInput(format!(
            "coefficient vector has length {} but the scheme has {} active sets",
            c.len(),
            sets.len()
        )));
    }
    let weights = sets.iter().map(|&u| scheme.weight(u)).collect();
    Ok((sets, weights))
}

fn check_point(x: &[f64], s: usize) -> Result<()> {
    if x.len() != s || x.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidInput(format!("point must lie in [0,1]^{s}")));
    }
    Ok(())
}

/// `f(x) = Σ_u c_u γ_u Π_{j∈u} H(x_j)`, the witness function in anchored form.
pub fn anchored_eval(
    c: &CoefficientVector,
    scheme: &WeightScheme,
    s: usize,
    exps: &ExponentPair,
    x: &[f64],
) -> Result<f64> {
    let (sets, weights) = setup(c, scheme, s)?;
    check_point(x, s)?;
    let h = extremal_h(exps)?;
    let big_h: Vec<f64> = x.iter().map(|&xj| h.big_h(xj)).collect();
    Ok(sets
        .iter()
        .zip(&weights)
        .zip(c.values())
        .map(|((u, g), cu)| cu * g * u.coords().iter().map(|&j| big_h[j - 1]).product::<f64>())
        .sum())
}

/// The ANOVA component `f_v(x) = S_v Π_{j∈v} (H(x_j) - m)` with
/// `S_v = Σ_{u ⊇ v} c_u γ_u m^{|u\v|}`.
pub fn anova_component_eval(
    c: &CoefficientVector,
    scheme: &WeightScheme,
    s: usize,
    exps: &ExponentPair,
    v: SubsetMask,
    x: &[f64],
) -> Result<f64> {
    let (sets, weights) = setup(c, scheme, s)?;
    check_point(x, s)?;
    let h = extremal_h(exps)?;
    let mean = h.mean_big_h();
    let s_v: f64 = sets
        .iter()
        .zip(&weights)
        .zip(c.values())
        .filter(|((u, _), _)| v.is_subset_of(**u))
        .map(|((u, g), cu)| cu * g * mean.powi((u.cardinality() - v.cardinality()) as i32))
        .sum();
    Ok(s_v * v.coords().iter().map(|&j| h.big_h(x[j - 1]) - mean).product::<f64>())
}

/// `∂^v f` at the point whose `v` coordinates are `x_v` and others `t`:
/// `Σ_{u ⊇ v} c_u γ_u Π_{j∈v} h(x_j) Π_{j∈u\v} H(t_j)`.
fn mixed_derivative(
    sets: &[SubsetMask],
    weights: &[f64],
    c: &[f64],
    h: &WitnessFunction,
    v: SubsetMask,
    point: &[f64],
) -> f64 {
    let hv: f64 = v.coords().iter().map(|&j| h.h(point[j - 1])).product();
    let mut total = 0.0;
    for ((u, g), cu) in sets.iter().zip(weights).zip(c) {
        if *cu == 0.0 || !v.is_subset_of(*u) {
            continue;
        }
        let rest: f64 = u.difference(v).coords().iter().map(|&j| h.big_h(point[j - 1])).product();
        total += cu * g * rest;
    }
    hv * total
}

/// Places the coordinates of `v` and of its complement into one point of `[0,1]^s`.
fn merge(v: SubsetMask, s: usize, xv: &[f64], rest: &[f64]) -> Vec<f64> {
    let mut point = vec![0.0; s];
    let (mut a, mut b) = (0, 0);
    for j in 1..=s {
        if v.contains(j) {
            point[j - 1] = xv[a];
            a += 1;
        } else {
            point[j - 1] = rest[b];
            b += 1;
        }
    }
    point
}

/// `‖f‖_F` with its quadrature cross-check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnchoredNorm {
    /// `(Σ_u c_u^p)^{1/p}`.
    pub value: f64,
    /// The same norm assembled from quadrature of `f^{(u)}` at the anchor, for `s <= 2`.
    pub quadrature: Option<f64>,
}

/// `‖f‖_F = (Σ_u γ_u^{-p} ‖f^{(u)}([·_u; 0])‖_p^p)^{1/p}`.
///
/// For the witness `f^{(u)}([x_u; 0]) = c_u γ_u Π h(x_j)`, so the value is
/// `(Σ c_u^p)^{1/p}`; at `s <= 2` the `u`-terms are also integrated numerically.
pub fn norm_f_numeric(
    c: &CoefficientVector,
    scheme: &WeightScheme,
    s: usize,
    exps: &ExponentPair,
    grid: &QuadratureGrid,
) -> Result<AnchoredNorm> {
    let (sets, weights) = setup(c, scheme, s)?;
    let h = extremal_h(exps)?;
    let p = exps.p();
    let value = c.values().iter().map(|v| v.powf(p)).sum::<f64>().powf(1.0 / p);
    let quadrature = if s <= 2 {
        let mut total = 0.0;
        for (u, g) in sets.iter().zip(&weights) {
            let k = u.cardinality() as usize;
            let zeros = vec![0.0; s - k];
            let integral = grid.integrate_tensor(k, |xu| {
                let point = merge(*u, s, xu, &zeros);
                mixed_derivative(&sets, &weights, c.values(), &h, *u, &point).abs().powf(p)
            });
            total += integral / g.powf(p);
        }
        Some(total.powf(1.0 / p))
    } else {
        None
    };
    Ok(AnchoredNorm { value, quadrature })
}

/// `‖f‖_H = (Σ_v γ_v^{-p} ‖∫ f^{(v)}([·_v; t_{v^c}]) dt_{v^c}‖_p^p)^{1/p}` by
/// tensor quadrature: the inner integral over `t_{v^c}` and the outer
/// `L_p` norm over `x_v` are both taken on the grid.
pub fn norm_h_numeric(
    c: &CoefficientVector,
    scheme: &WeightScheme,
    s: usize,
    exps: &ExponentPair,
    grid: &QuadratureGrid,
) -> Result<f64> {
    let (sets, weights) = setup(c, scheme, s)?;
    let h = extremal_h(exps)?;
    let p = exps.p();
    let mut total = 0.0;
    for (v, g) in sets.iter().zip(&weights) {
        let k = v.cardinality() as usize;
        let outer = grid.integrate_tensor(k, |xv| {
            let inner = grid.integrate_tensor(s - k, |rest| {
                let point = merge(*v, s, xv, rest);
                mixed_derivative(&sets, &weights, c.values(), &h, *v, &point)
            });
            inner.abs().powf(p)
        });
        total += outer / g.powf(p);
    }
    Ok(total.powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::operator::build_dense;
    use crate::pnorm::vector_pnorm;

    fn exps(p: f64) -> ExponentPair {
        ExponentPair::new(p).unwrap()
    }

    fn coeffs(v: Vec<f64>) -> CoefficientVector {
        CoefficientVector::new(v).unwrap()
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1, 2, 5, 16] {
            let (x, w) = gauss_legendre(n);
            for deg in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-14, "n={n} deg={deg}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn grid_weights_sum_to_one() {
        for n in [1, 7, 16, 64, 128] {
            let grid = QuadratureGrid::graded(n).unwrap();
            assert_eq!(grid.len(), n);
            assert!(grid.weights().iter().all(|w| *w > 0.0));
            assert!((grid.weights().iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(grid.nodes().iter().all(|x| (0.0..1.0).contains(x)));
        }
        assert!(QuadratureGrid::graded(0).is_err());
        assert!(QuadratureGrid::graded(40).is_err());
    }

    #[test]
    fn witness_examples() {
        let h2 = extremal_h(&exps(2.0)).unwrap();
        assert!((h2.h(0.25) - 3f64.sqrt() * 0.75).abs() < 1e-15);
        let grid = QuadratureGrid::graded(64).unwrap();
        assert!((grid.integrate(|t| h2.h(t) * (1.0 - t)) - 3f64.sqrt().recip()).abs() < 1e-14);
        assert!((grid.integrate(|t| h2.h(t).powi(2)) - 1.0).abs() < 1e-14);

        let h1 = extremal_h(&ExponentPair::one()).unwrap();
        assert!((grid.integrate(|t| h1.h(t)) - 1.0).abs() < 1e-14);
        assert!(extremal_h(&ExponentPair::infinity()).is_err());
    }

    #[test]
    fn holder_constants() {
        let grid = QuadratureGrid::graded(128).unwrap();
        for p in [1.25, 1.5, 2.0, 3.0, 5.0] {
            let e = exps(p);
            let h = extremal_h(&e).unwrap();
            let norm = grid.integrate(|t| h.h(t).powf(p));
            let pairing = grid.integrate(|t| h.h(t) * (1.0 - t));
            assert!((norm - 1.0).abs() < 1e-10, "p={p}: {norm}");
            assert!((pairing - e.m()).abs() < 1e-10, "p={p}: {pairing} vs {}", e.m());
            assert!((grid.integrate(|x| h.big_h(x)) - e.m()).abs() < 1e-10);
        }
    }

    #[test]
    fn anchored_examples() {
        let product = WeightScheme::product(vec![1.0, 1.0]).unwrap();
        let e = exps(2.0);
        let ones_at_empty = coeffs(vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(anchored_eval(&ones_at_empty, &product, 2, &e, &[0.3, 0.9]).unwrap(), 1.0);

        let single = WeightScheme::product(vec![1.0]).unwrap();
        let x = 0.4;
        let f = anchored_eval(&coeffs(vec![0.0, 1.0]), &single, 1, &e, &[x]).unwrap();
        assert!((f - 3f64.sqrt() * (x - x * x / 2.0)).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let c = coeffs((0..4).map(|_| rng.gen_range(0.0..2.0)).collect());
            let at_origin = anchored_eval(&c, &product, 2, &e, &[0.0, 0.0]).unwrap();
            assert_eq!(at_origin, c.values()[0]);
        }
    }

    #[test]
    fn anova_components_sum_to_f_and_have_mean_zero() {
        let scheme = WeightScheme::product(vec![0.5, 2.0]).unwrap();
        let grid = QuadratureGrid::graded(64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for p in [1.5, 2.0, 3.0] {
            let e = exps(p);
            let c = coeffs((0..4).map(|_| rng.gen_range(0.0..1.0)).collect());
            let sets = scheme.active_sets(2).unwrap();
            let x = [0.3, 0.8];
            let total: f64 = sets
                .iter()
                .map(|&v| anova_component_eval(&c, &scheme, 2, &e, v, &x).unwrap())
                .sum();
            let f = anchored_eval(&c, &scheme, 2, &e, &x).unwrap();
            assert!((total - f).abs() < 1e-13);
            for &v in sets.iter().filter(|v| !v.is_empty()) {
                let mean = grid.integrate_tensor(2, |pt| {
                    anova_component_eval(&c, &scheme, 2, &e, v, pt).unwrap()
                });
                assert!(mean.abs() < 1e-9, "v={v} p={p}: {mean}");
            }
        }
    }

    #[test]
    fn anchored_norm_examples() {
        let scheme = WeightScheme::product(vec![1.0, 1.0]).unwrap();
        let grid = QuadratureGrid::graded(64).unwrap();
        let e = exps(3.0);
        let one = norm_f_numeric(&coeffs(vec![0.0, 0.0, 1.0, 0.0]), &scheme, 2, &e, &grid).unwrap();
        assert!((one.value - 1.0).abs() < 1e-15);
        let all = norm_f_numeric(&coeffs(vec![1.0; 4]), &scheme, 2, &e, &grid).unwrap();
        assert!((all.value - 4f64.powf(1.0 / 3.0)).abs() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let e2 = exps(2.0);
        let weighted = WeightScheme::product(vec![0.7, 1.9]).unwrap();
        for _ in 0..5 {
            let c = coeffs((0..4).map(|_| rng.gen_range(0.0..1.0)).collect());
            let n = norm_f_numeric(&c, &weighted, 2, &e2, &grid).unwrap();
            assert!((n.quadrature.unwrap() - n.value).abs() < 1e-8 * n.value);
        }
    }

    #[test]
    fn anova_norm_examples() {
        let grid = QuadratureGrid::graded(64).unwrap();
        let e = exps(2.0);
        let single = WeightScheme::product(vec![1.0]).unwrap();
        let constant = norm_h_numeric(&coeffs(vec![1.0, 0.0]), &single, 1, &e, &grid).unwrap();
        assert!((constant - 1.0).abs() < 1e-14);
        let top = norm_h_numeric(&coeffs(vec![0.0, 1.0]), &single, 1, &e, &grid).unwrap();
        assert!((top - (4.0f64 / 3.0).sqrt()).abs() < 1e-8);

        let scheme = WeightScheme::product(vec![1.0, 1.0]).unwrap();
        let op = build_dense(&scheme, 2, &e).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let c = coeffs((0..4).map(|_| rng.gen_range(0.0..1.0)).collect());
            let numeric = norm_h_numeric(&c, &scheme, 2, &e, &grid).unwrap();
            let matrix = vector_pnorm(&op.apply(&c).unwrap(), 2.0);
            assert!((numeric - matrix).abs() < 1e-7 * matrix);
        }
    }

    #[test]
    fn three_dimensional_agreement() {
        let grid = QuadratureGrid::graded(16).unwrap();
        let e = exps(2.0);
        let scheme = WeightScheme::finite_order(1.5, 2).unwrap();
        let n = scheme.active_sets(3).unwrap().len();
        let c = coeffs((0..n).map(|i| 1.0 / (i + 1) as f64).collect());
        let op = build_dense(&scheme, 3, &e).unwrap();
        let numeric = norm_h_numeric(&c, &scheme, 3, &e, &grid).unwrap();
        let matrix = vector_pnorm(&op.apply(&c).unwrap(), 2.0);
        assert!((numeric - matrix).abs() < 1e-10 * matrix);
    }

    #[test]
    fn dimension_cap() {
        let scheme = WeightScheme::finite_order(1.0, 1).unwrap();
        let c = coeffs(vec![1.0; 5]);
        let grid = QuadratureGrid::graded(16).unwrap();
        assert!(matches!(
            norm_h_numeric(&c, &scheme, 4, &exps(2.0), &grid),
            Err(Error::Capacity(_))
        ));
    }
}
