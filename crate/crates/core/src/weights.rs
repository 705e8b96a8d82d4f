//! Weight families `γ = (γ_u)` and their supports.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::lattice::{
    diameter_bounded_sets, enumerate_subsets, is_downward_closed, subsets_up_to_cardinality,
    SubsetMask, WindowSet, MAX_MASK_DIM,
};

/// Above this cardinality the POD factorial is evaluated through logarithms.
const POD_DIRECT_MAX_CARD: u32 = 20;

/// A weight table given set by set. Its support is downward closed and contains `∅`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExplicitTable {
    weights: BTreeMap<SubsetMask, f64>,
    max_coord: usize,
}

impl ExplicitTable {
    pub fn from_entries(entries: impl IntoIterator<Item = (SubsetMask, f64)>) -> Result<Self> {
        let mut weights = BTreeMap::new();
        for (u, w) in entries {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "weight of {u} must be a positive finite number, got {w}"
                )));
            }
            if weights.insert(u, w).is_some() {
                return Err(Error::InvalidInput(format!("duplicate subset {u}")));
            }
        }
        if !weights.contains_key(&SubsetMask::EMPTY) {
            return Err(Error::InvalidInput(
                "explicit weights must define the empty set".into(),
            ));
        }
        let support: Vec<SubsetMask> = weights.keys().copied().collect();
        if !is_downward_closed(&support) {
            return Err(Error::InvalidInput(
                "support of explicit weights is not downward closed".into(),
            ));
        }
        let max_coord = support
            .iter()
            .map(|u| 64 - u.bits().leading_zeros() as usize)
            .max()
            .unwrap_or(0);
        Ok(ExplicitTable { weights, max_coord })
    }

    /// Parses the text format: one `<coords|empty> <weight>` entry per line,
    /// coordinates 1-based and comma separated, `#` starting a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |why: &str| Error::InvalidInput(format!("line {}: {why}: '{raw}'", lineno + 1));
            let mut fields = line.split_whitespace();
            let (Some(set), Some(value), None) = (fields.next(), fields.next(), fields.next())
            else {
                return Err(bad("expected '<coordinates> <weight>'"));
            };
            let mask = if set.eq_ignore_ascii_case("empty") {
                SubsetMask::EMPTY
            } else {
                let coords = set
                    .split(',')
                    .map(|c| c.trim().parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| bad("bad coordinate list"))?;
                SubsetMask::from_coords(&coords, MAX_MASK_DIM).map_err(|e| bad(&e.to_string()))?
            };
            let w: f64 = value.parse().map_err(|_| bad("bad weight"))?;
            entries.push((mask, w));
        }
        ExplicitTable::from_entries(entries)
    }

    /// Random positive weights on the downward closure of `generators` random sets.
    pub fn random_downward_closed<R: Rng>(s: usize, generators: usize, rng: &mut R) -> Result<Self> {
        if s == 0 || s > MAX_MASK_DIM {
            return Err(Error::Capacity(format!("random tables need 1 <= s <= 63, got {s}")));
        }
        let mut support = BTreeMap::new();
        support.insert(SubsetMask::EMPTY, ());
        for _ in 0..generators {
            let size = rng.gen_range(1..=s.min(6));
            let mut bits = 0u64;
            while bits.count_ones() < size as u32 {
                bits |= 1 << rng.gen_range(0..s);
            }
            for v in SubsetMask::from_bits(bits).submasks() {
                support.insert(v, ());
            }
        }
        let entries = support
            .into_keys()
            .map(|u| (u, rng.gen_range(0.05..3.0)))
            .collect::<Vec<_>>();
        ExplicitTable::from_entries(entries)
    }

    pub fn get(&self, u: SubsetMask) -> f64 {
        self.weights.get(&u).copied().unwrap_or(0.0)
    }

    pub fn support(&self) -> impl Iterator<Item = SubsetMask> + '_ {
        self.weights.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Largest coordinate used by any set in the table.
    pub fn max_coord(&self) -> usize {
        self.max_coord
    }
}

/// The weight families handled by the crate.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightScheme {
    /// `γ_u = Π_{j ∈ u} γ_j`.
    Product { gammas: Vec<f64> },
    /// `γ_u = ω^{|u|}` if `|u| <= q`, else 0.
    FiniteOrder { omega: f64, q: usize },
    /// `γ_u = ω^{|u|}` if `diam(u) <= q`, else 0.
    FiniteDiameter { omega: f64, q: usize },
    /// `γ_u = (|u|!)^{β1} Π_{j ∈ u} c / j^{β2}` with `0 < β1 < β2`.
    Pod { c: f64, beta1: f64, beta2: f64 },
    Explicit(ExplicitTable),
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must be positive and finite, got {x}")))
    }
}

impl WeightScheme {
    pub fn product(gammas: Vec<f64>) -> Result<Self> {
        if gammas.is_empty() {
            return Err(Error::InvalidInput("product weights need at least one gamma".into()));
        }
        for (j, &g) in gammas.iter().enumerate() {
            positive(&format!("gamma_{}", j + 1), g)?;
        }
        Ok(WeightScheme::Product { gammas })
    }

    pub fn finite_order(omega: f64, q: usize) -> Result<Self> {
        positive("omega", omega)?;
        if q == 0 {
            return Err(Error::InvalidInput("finite-order weights need q >= 1".into()));
        }
        Ok(WeightScheme::FiniteOrder { omega, q })
    }

    pub fn finite_diameter(omega: f64, q: usize) -> Result<Self> {
        positive("omega", omega)?;
        if q == 0 {
            return Err(Error::InvalidInput("finite-diameter weights need q >= 1".into()));
        }
        if q >= MAX_MASK_DIM {
            return Err(Error::Capacity(format!("diameter bound q = {q} too large")));
        }
        Ok(WeightScheme::FiniteDiameter { omega, q })
    }

    pub fn pod(c: f64, beta1: f64, beta2: f64) -> Result<Self> {
        positive("c", c)?;
        positive("beta1", beta1)?;
        positive("beta2", beta2)?;
        if beta1 >= beta2 {
            return Err(Error::InvalidInput(format!(
                "POD weights need beta1 < beta2, got {beta1} >= {beta2}"
            )));
        }
        Ok(WeightScheme::Pod { c, beta1, beta2 })
    }

    pub fn explicit(table: ExplicitTable) -> Self {
        WeightScheme::Explicit(table)
    }

    /// Checks that the scheme is defined on `{1, ..., s}`.
    pub fn check_dimension(&self, s: usize) -> Result<()> {
        if s == 0 {
            return Err(Error::InvalidInput("dimension s must be at least 1".into()));
        }
        match self {
            WeightScheme::Product { gammas } if gammas.len() < s => Err(Error::InvalidInput(
                format!("product weights define {} gammas but s = {s}", gammas.len()),
            )),
            WeightScheme::Explicit(table) if table.max_coord() > s => Err(Error::InvalidInput(
                format!("explicit weights use coordinate {} but s = {s}", table.max_coord()),
            )),
            _ => Ok(()),
        }
    }

    /// `γ_u`, exactly 0 outside the support.
    pub fn weight(&self, u: SubsetMask) -> f64 {
        match self {
            WeightScheme::Product { gammas } => u
                .coords()
                .iter()
                .map(|&j| gammas.get(j - 1).copied().unwrap_or(0.0))
                .product(),
            WeightScheme::FiniteOrder { omega, q } => {
                if u.cardinality() as usize <= *q {
                    omega.powi(u.cardinality() as i32)
                } else {
                    0.0
                }
            }
            WeightScheme::FiniteDiameter { omega, q } => {
                if u.diameter() as usize <= *q {
                    omega.powi(u.cardinality() as i32)
                } else {
                    0.0
                }
            }
            WeightScheme::Pod { c, beta1, beta2 } => {
                let k = u.cardinality();
                if k > POD_DIRECT_MAX_CARD {
                    return self.log_weight(u).exp();
                }
                let factorial: f64 = (1..=k).map(f64::from).product();
                u.coords()
                    .iter()
                    .map(|&j| c / (j as f64).powf(*beta2))
                    .product::<f64>()
                    * factorial.powf(*beta1)
            }
            WeightScheme::Explicit(table) => table.get(u),
        }
    }

    /// `ln γ_u`, `-∞` outside the support.
    pub fn log_weight(&self, u: SubsetMask) -> f64 {
        match self {
            WeightScheme::Pod { c, beta1, beta2 } => {
                let k = u.cardinality();
                let ln_fact: f64 = (2..=k).map(|i| f64::from(i).ln()).sum();
                beta1 * ln_fact
                    + u.coords()
                        .iter()
                        .map(|&j| c.ln() - beta2 * (j as f64).ln())
                        .sum::<f64>()
            }
            _ => self.weight(u).ln(),
        }
    }

    /// `γ_u` for a diameter-bounded set at arbitrary `s`.
    pub fn weight_window(&self, u: WindowSet) -> f64 {
        match self {
            WeightScheme::FiniteDiameter { omega, q } => {
                if u.diameter() as usize <= *q {
                    omega.powi(u.cardinality() as i32)
                } else {
                    0.0
                }
            }
            WeightScheme::FiniteOrder { omega, q } => {
                if u.cardinality() as usize <= *q {
                    omega.powi(u.cardinality() as i32)
                } else {
                    0.0
                }
            }
            WeightScheme::Product { gammas } => u
                .coords()
                .iter()
                .map(|&j| gammas.get(j - 1).copied().unwrap_or(0.0))
                .product(),
            WeightScheme::Pod { c, beta1, beta2 } => {
                let k = u.cardinality();
                let ln_fact: f64 = (2..=k).map(|i| f64::from(i).ln()).sum();
                let ln_w = beta1 * ln_fact
                    + u.coords()
                        .iter()
                        .map(|&j| c.ln() - beta2 * (j as f64).ln())
                        .sum::<f64>();
                ln_w.exp()
            }
            WeightScheme::Explicit(table) => u.to_mask().map_or(0.0, |m| table.get(m)),
        }
    }

    /// The support `U = {u : γ_u > 0}` as masks, increasing in bit order.
    pub fn active_sets(&self, s: usize) -> Result<Vec<SubsetMask>> {
        self.check_dimension(s)?;
        match self {
            WeightScheme::Product { .. } | WeightScheme::Pod { .. } => enumerate_subsets(s),
            WeightScheme::FiniteOrder { q, .. } => subsets_up_to_cardinality(s, *q),
            WeightScheme::FiniteDiameter { q, .. } => {
                if s > MAX_MASK_DIM {
                    return Err(Error::Capacity(format!(
                        "mask-valued support is capped at s = {MAX_MASK_DIM}; use the window generator"
                    )));
                }
                let mut sets: Vec<SubsetMask> = diameter_bounded_sets(s, *q)?
                    .into_iter()
                    .map(|w| w.to_mask().expect("s <= 63"))
                    .collect();
                sets.sort_unstable();
                Ok(sets)
            }
            WeightScheme::Explicit(table) => Ok(table.support().collect()),
        }
    }

    /// `|U|` without materializing it (as `f64` since it may be astronomically large).
    pub fn support_size(&self, s: usize) -> f64 {
        match self {
            WeightScheme::Product { .. } | WeightScheme::Pod { .. } => 2f64.powi(s as i32),
            WeightScheme::FiniteOrder { q, .. } => {
                (0..=(*q).min(s)).map(|k| choose(s as u64, k as u64)).sum()
            }
            WeightScheme::FiniteDiameter { q, .. } => {
                let mut total = s as f64 + 1.0;
                for ell in 1..=(*q).min(s.saturating_sub(1)) {
                    total += (s - ell) as f64 * 2f64.powi(ell as i32 - 1);
                }
                total
            }
            WeightScheme::Explicit(table) => table.len() as f64,
        }
    }

    /// Short stable name used in reports.
    pub fn kind(&self) -> &'static str {
        match self {
            WeightScheme::Product { .. } => "product",
            WeightScheme::FiniteOrder { .. } => "fow",
            WeightScheme::FiniteDiameter { .. } => "fdw",
            WeightScheme::Pod { .. } => "pod",
            WeightScheme::Explicit(_) => "explicit",
        }
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightScheme::Product { gammas } => {
                let list: Vec<String> = gammas.iter().map(|g| g.to_string()).collect();
                write!(f, "product(gammas={})", list.join(","))
            }
            WeightScheme::FiniteOrder { omega, q } => write!(f, "fow(omega={omega},q={q})"),
            WeightScheme::FiniteDiameter { omega, q } => write!(f, "fdw(omega={omega},q={q})"),
            WeightScheme::Pod { c, beta1, beta2 } => {
                write!(f, "pod(c={c},beta1={beta1},beta2={beta2})")
            }
            WeightScheme::Explicit(table) => write!(f, "explicit(sets={})", table.len()),
        }
    }
}

/// Binomial coefficient as a float.
pub fn choose(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    // the running product is an integer at every step; keep it exact below 2^53
    if acc < 9.0e15 {
        acc.round()
    } else {
        acc
    }
}

/// `ln C(n, k)`.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (0..k)
        .map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln())
        .sum()
}
