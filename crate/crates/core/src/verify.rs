//! Oracle suites run by `embednorm verify`.
//!
//! Each suite compares a fast path against an independent one and reports
//! the worst relative residual it saw.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{enumerated_endpoint_norms, exact_norm_p1, exact_norm_pinf, lower_bound, BoundReport};
use crate::error::{Error, Result};
use crate::exponent::ExponentPair;
use crate::lattice::{count_by_diameter, enumerate_subsets, weighted_diameter_sum};
use crate::operator::{build_active_set, kronecker_factors, CoefficientVector};
use crate::pnorm::{norm_p, norm_p_kronecker, vector_pnorm, PowerOptions};
use crate::quadrature::{norm_f_numeric, norm_h_numeric, QuadratureGrid, DEFAULT_NODES};
use crate::weights::{ExplicitTable, WeightScheme};

/// Largest `--max-s` accepted by the suites.
pub const VERIFY_MAX_DIM: usize = 16;

const ENDPOINT_MAX_DIM: usize = 10;
const KRONECKER_MAX_DIM: usize = 8;
const WITNESS_MAX_DIM: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Endpoint,
    Kronecker,
    Eqell,
    Witness,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Endpoint, Suite::Kronecker, Suite::Eqell, Suite::Witness];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Endpoint => "endpoint",
            Suite::Kronecker => "kronecker",
            Suite::Eqell => "eqell",
            Suite::Witness => "witness",
        }
    }

    /// Tolerance on the relative residual.
    pub fn tolerance(self) -> f64 {
        match self {
            Suite::Endpoint => 1e-10,
            Suite::Kronecker | Suite::Witness => 1e-6,
            Suite::Eqell => 1e-12,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|s| s.as_str() == text.trim())
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "unknown suite '{text}', expected one of endpoint, kronecker, eqell, witness"
                ))
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyConfig {
    pub max_s: usize,
    pub seed: u64,
    pub power: PowerOptions,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            max_s: 10,
            seed: 0,
            power: PowerOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: bool,
    pub checks: usize,
    pub worst_residual: f64,
    /// Description of the check with the worst residual.
    pub worst_case: String,
    pub failures: Vec<String>,
}

/// Accumulates residuals for one suite.
struct Tally {
    suite: Suite,
    checks: usize,
    worst: f64,
    worst_case: String,
    failures: Vec<String>,
}

impl Tally {
    fn new(suite: Suite) -> Self {
        Tally {
            suite,
            checks: 0,
            worst: 0.0,
            worst_case: String::new(),
            failures: Vec::new(),
        }
    }

    fn compare(&mut self, what: impl Fn() -> String, got: f64, want: f64) {
        let residual = (got - want).abs() / want.abs().max(f64::MIN_POSITIVE);
        self.record(what, residual, format!("{got} vs {want}"));
    }

    fn record(&mut self, what: impl Fn() -> String, residual: f64, detail: String) {
        self.checks += 1;
        let residual = if residual.is_nan() { f64::INFINITY } else { residual };
        if residual > self.worst || self.worst_case.is_empty() {
            self.worst = self.worst.max(residual);
            self.worst_case = what();
        }
        if residual > self.suite.tolerance() {
            self.failures.push(format!("{}: {detail}", what()));
        }
    }

    fn fail(&mut self, what: String) {
        self.checks += 1;
        self.failures.push(what);
    }

    fn finish(self) -> SuiteReport {
        SuiteReport {
            suite: self.suite,
            passed: self.failures.is_empty(),
            checks: self.checks,
            worst_residual: self.worst,
            worst_case: self.worst_case,
            failures: self.failures,
        }
    }
}

/// Runs the given suites in parallel, in the order given.
pub fn run_suites(suites: &[Suite], config: &VerifyConfig) -> Result<Vec<SuiteReport>> {
    if config.max_s == 0 {
        return Err(Error::InvalidInput("--max-s must be at least 1".into()));
    }
    if config.max_s > VERIFY_MAX_DIM {
        return Err(Error::Capacity(format!(
            "verification suites enumerate subsets and are capped at max-s = {VERIFY_MAX_DIM}, got {}",
            config.max_s
        )));
    }
    suites.par_iter().map(|&s| run_suite(s, config)).collect()
}

pub fn run_suite(suite: Suite, config: &VerifyConfig) -> Result<SuiteReport> {
    match suite {
        Suite::Endpoint => endpoint_suite(config),
        Suite::Kronecker => kronecker_suite(config),
        Suite::Eqell => eqell_suite(config),
        Suite::Witness => witness_suite(config),
    }
}

/// Lower bounds at `p = 1, ∞` against the exact norms; closed forms against
/// enumeration; the ordering chain on every report.
fn endpoint_suite(config: &VerifyConfig) -> Result<SuiteReport> {
    let mut tally = Tally::new(Suite::Endpoint);
    let max_s = config.max_s.min(ENDPOINT_MAX_DIM);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut schemes: Vec<(WeightScheme, usize)> = Vec::new();
    for _ in 0..20 {
        let s = rng.gen_range(1..=max_s);
        let generators = rng.gen_range(1..=4);
        schemes.push((
            WeightScheme::explicit(ExplicitTable::random_downward_closed(s, generators, &mut rng)?),
            s,
        ));
    }
    for s in 1..=max_s {
        let gammas: Vec<f64> = (0..s).map(|_| rng.gen_range(0.01..=2.0)).collect();
        schemes.push((WeightScheme::product(gammas)?, s));
        for q in 1..=3 {
            schemes.push((WeightScheme::finite_order(rng.gen_range(0.25..3.0), q)?, s));
            schemes.push((WeightScheme::finite_diameter(rng.gen_range(0.25..3.0), q)?, s));
        }
        schemes.push((WeightScheme::pod(1.0, 0.5, 1.0)?, s));
    }

    for (scheme, s) in &schemes {
        let (p1, pinf) = enumerated_endpoint_norms(scheme, *s)?;
        let label = |what: &str| format!("{what} {scheme} s={s}");
        tally.compare(|| label("p=1 closed form"), exact_norm_p1(scheme, *s)?, p1);
        tally.compare(|| label("p=inf closed form"), exact_norm_pinf(scheme, *s)?, pinf);
        for exps in [ExponentPair::one(), ExponentPair::new(2.0)?, ExponentPair::infinity()] {
            let report = BoundReport::compute(scheme, *s, &exps, &config.power)?;
            if let Err(e) = report.check_ordering() {
                tally.fail(e.to_string());
            }
            if let Some(exact) = report.exact {
                tally.compare(
                    || format!("lower bound at p={exps} {scheme} s={s}"),
                    report.lower_bound,
                    exact,
                );
            }
        }
    }
    Ok(tally.finish())
}

/// Sparse-operator norm against the product of 2x2 factor norms.
fn kronecker_suite(config: &VerifyConfig) -> Result<SuiteReport> {
    let mut tally = Tally::new(Suite::Kronecker);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    for s in 1..=config.max_s.min(KRONECKER_MAX_DIM) {
        let gammas: Vec<f64> = (0..s).map(|_| rng.gen_range(0.05..=2.0)).collect();
        let scheme = WeightScheme::product(gammas.clone())?;
        for p in [1.0, 1.5, 2.0, 3.0, f64::INFINITY] {
            let exps = ExponentPair::new(p)?;
            let full = build_active_set(&scheme, s, &exps)?;
            let direct = norm_p(full.as_linear(), &exps, &config.power, &[])?;
            let factored = norm_p_kronecker(&kronecker_factors(&gammas, &exps)?, &exps, &config.power)?;
            tally.compare(
                || format!("s={s} p={exps} gammas={gammas:?}"),
                direct.value,
                factored.value,
            );
        }
    }
    Ok(tally.finish())
}

/// The diameter-class sums against full enumeration, exactly at `x = 1`.
fn eqell_suite(config: &VerifyConfig) -> Result<SuiteReport> {
    let mut tally = Tally::new(Suite::Eqell);
    let xs = [0.25f64, 1.0, 2.0];
    for s in 2..=config.max_s {
        let mut sums = vec![[0.0f64; 3]; s];
        let mut counts = vec![0u128; s];
        for u in enumerate_subsets(s)? {
            let d = u.diameter() as usize;
            counts[d] += 1;
            for (k, x) in xs.iter().enumerate() {
                sums[d][k] += x.powi(u.cardinality() as i32);
            }
        }
        for ell in 1..s {
            let closed_count = count_by_diameter(s, ell);
            if closed_count != counts[ell] {
                tally.fail(format!(
                    "count of diameter-{ell} sets at s={s}: {closed_count} vs {}",
                    counts[ell]
                ));
            } else {
                tally.checks += 1;
            }
            for (k, &x) in xs.iter().enumerate() {
                let closed = weighted_diameter_sum(s, ell, x)?;
                if x == 1.0 && closed != sums[ell][k] {
                    tally.fail(format!(
                        "x=1 sum at s={s}, diameter {ell}: {closed} vs {}",
                        sums[ell][k]
                    ));
                    continue;
                }
                tally.compare(|| format!("s={s} diameter={ell} x={x}"), closed, sums[ell][k]);
            }
        }
    }
    Ok(tally.finish())
}

/// Ratio of the two function-space norms of the witness against `‖Ac‖_p / ‖c‖_p`.
fn witness_suite(config: &VerifyConfig) -> Result<SuiteReport> {
    let mut tally = Tally::new(Suite::Witness);
    let grid = QuadratureGrid::graded(DEFAULT_NODES)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(2));
    for s in 1..=config.max_s.min(WITNESS_MAX_DIM) {
        for p in [1.5, 2.0, 3.0] {
            let exps = ExponentPair::new(p)?;
            for trial in 0..5 {
                let gammas: Vec<f64> = (0..s).map(|_| [0.5, 1.0, 2.0][rng.gen_range(0..3)]).collect();
                let scheme = WeightScheme::product(gammas.clone())?;
                let op = build_active_set(&scheme, s, &exps)?;
                let c = CoefficientVector::new((0..1usize << s).map(|_| rng.gen_range(0.0..1.0)).collect())?;
                let functional = norm_h_numeric(&c, &scheme, s, &exps, &grid)?
                    / norm_f_numeric(&c, &scheme, s, &exps, &grid)?.value;
                let matrix = vector_pnorm(&op.apply(&c)?, p) / vector_pnorm(c.values(), p);
                tally.compare(
                    || format!("s={s} p={p} gammas={gammas:?} trial={trial}"),
                    functional,
                    matrix,
                );
            }
        }
    }
    // the lower bound itself must be reachable by some witness ratio
    let scheme = WeightScheme::product(vec![1.0])?;
    let exps = ExponentPair::new(2.0)?;
    let lb = lower_bound(&scheme, 1, &exps, &config.power)?;
    let witness = CoefficientVector::new(lb.result.witness.expand()?)?;
    let functional = norm_h_numeric(&witness, &scheme, 1, &exps, &grid)?
        / norm_f_numeric(&witness, &scheme, 1, &exps, &grid)?.value;
    tally.compare(|| "optimal witness, s=1 p=2".into(), functional, lb.result.value);
    Ok(tally.finish())
}
