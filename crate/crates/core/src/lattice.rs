//! Subsets of the coordinate set `{1, ..., s}` and the counting facts needed on them.
//!
//! Coordinates are 1-based in documentation and I/O and 0-based in bit
//! positions: coordinate `j` lives in bit `j - 1`.

use std::collections::HashSet;
use std::fmt;

use crate::error::{Error, Result};

/// Largest dimension for which the whole powerset may be materialized.
pub const MAX_ENUMERATION_DIM: usize = 30;

/// Largest dimension a [`SubsetMask`] can address.
pub const MAX_MASK_DIM: usize = 63;

/// A subset of `{1, ..., s}` stored as a bitmask, `s <= 63`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct SubsetMask(u64);

impl SubsetMask {
    pub const EMPTY: SubsetMask = SubsetMask(0);

    /// Builds a mask, rejecting bits at or above position `s`.
    pub fn new(bits: u64, s: usize) -> Result<Self> {
        if s > MAX_MASK_DIM {
            return Err(Error::Capacity(format!(
                "subset masks address at most {MAX_MASK_DIM} coordinates, got s = {s}"
            )));
        }
        if bits >> s != 0 {
            return Err(Error::InvalidInput(format!(
                "mask {bits:#b} has bits outside the first {s} coordinates"
            )));
        }
        Ok(SubsetMask(bits))
    }

    /// Unchecked constructor for masks produced by the lattice machinery itself.
    pub const fn from_bits(bits: u64) -> Self {
        SubsetMask(bits)
    }

    /// The full set `{1, ..., s}`.
    pub fn full(s: usize) -> Result<Self> {
        if s > MAX_MASK_DIM {
            return Err(Error::Capacity(format!(
                "subset masks address at most {MAX_MASK_DIM} coordinates, got s = {s}"
            )));
        }
        Ok(SubsetMask(low_bits(s)))
    }

    /// Builds a mask from 1-based coordinates.
    pub fn from_coords(coords: &[usize], s: usize) -> Result<Self> {
        let mut bits = 0u64;
        for &j in coords {
            if j == 0 || j > s {
                return Err(Error::InvalidInput(format!(
                    "coordinate {j} outside 1..={s}"
                )));
            }
            bits |= 1 << (j - 1);
        }
        SubsetMask::new(bits, s)
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub const fn cardinality(self) -> u32 {
        self.0.count_ones()
    }

    /// Whether the 1-based coordinate `j` belongs to the set.
    pub const fn contains(self, j: usize) -> bool {
        j >= 1 && j <= 64 && self.0 >> (j - 1) & 1 == 1
    }

    pub const fn is_subset_of(self, other: SubsetMask) -> bool {
        self.0 & !other.0 == 0
    }

    pub const fn union(self, other: SubsetMask) -> SubsetMask {
        SubsetMask(self.0 | other.0)
    }

    pub const fn difference(self, other: SubsetMask) -> SubsetMask {
        SubsetMask(self.0 & !other.0)
    }

    pub const fn complement(self, s: usize) -> SubsetMask {
        SubsetMask(!self.0 & low_bits(s))
    }

    /// 1-based coordinates in increasing order.
    pub fn coords(self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.cardinality() as usize);
        let mut bits = self.0;
        while bits != 0 {
            out.push(bits.trailing_zeros() as usize + 1);
            bits &= bits - 1;
        }
        out
    }

    /// Largest coordinate spread `max |i - j|` over members; 0 for the empty set.
    pub const fn diameter(self) -> u32 {
        if self.0 == 0 {
            0
        } else {
            63 - self.0.leading_zeros() - self.0.trailing_zeros()
        }
    }

    /// All subsets of `self`, from `self` down to the empty set.
    pub fn submasks(self) -> Submasks {
        Submasks {
            set: self.0,
            next: Some(self.0),
        }
    }
}

impl fmt::Debug for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("{}");
        }
        let coords: Vec<String> = self.coords().iter().map(|j| j.to_string()).collect();
        write!(f, "{{{}}}", coords.join(","))
    }
}

const fn low_bits(s: usize) -> u64 {
    if s >= 64 {
        u64::MAX
    } else {
        (1u64 << s) - 1
    }
}

/// Submask descent `sub = (sub - 1) & set`, visiting every subset exactly once.
#[derive(Clone, Debug)]
pub struct Submasks {
    set: u64,
    next: Option<u64>,
}

impl Iterator for Submasks {
    type Item = SubsetMask;

    fn next(&mut self) -> Option<SubsetMask> {
        let current = self.next?;
        self.next = if current == 0 {
            None
        } else {
            Some((current - 1) & self.set)
        };
        Some(SubsetMask(current))
    }
}

/// All `2^s` subsets of `{1, ..., s}` in increasing bit order.
pub fn enumerate_subsets(s: usize) -> Result<Vec<SubsetMask>> {
    if s > MAX_ENUMERATION_DIM {
        return Err(Error::Capacity(format!(
            "full subset enumeration is capped at s = {MAX_ENUMERATION_DIM}, got s = {s}"
        )));
    }
    Ok((0..1u64 << s).map(SubsetMask).collect())
}

/// Subsets of `{1, ..., s}` with at most `q` elements, in increasing bit order.
pub fn subsets_up_to_cardinality(s: usize, q: usize) -> Result<Vec<SubsetMask>> {
    if s > MAX_MASK_DIM {
        return Err(Error::Capacity(format!(
            "subset masks address at most {MAX_MASK_DIM} coordinates, got s = {s}"
        )));
    }
    let mut out = vec![SubsetMask::EMPTY];
    for k in 1..=q.min(s) {
        // Gosper's hack over all k-element masks below 2^s.
        let mut x: u64 = (1u64 << k) - 1;
        let limit = low_bits(s);
        loop {
            out.push(SubsetMask(x));
            let c = x & x.wrapping_neg();
            let r = x.wrapping_add(c);
            if r == 0 || r > limit {
                break;
            }
            let next = (((r ^ x) >> 2) / c) | r;
            if next > limit {
                break;
            }
            x = next;
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// `Σ_{u ⊆ [s], diam(u) = ℓ} x^{|u|}` in closed form `(s - ℓ) x² (1 + x)^{ℓ-1}`.
///
/// Defined for `1 <= ℓ <= s - 1`. Diameter 0 (the empty set and the
/// singletons) is left to the caller.
pub fn weighted_diameter_sum(s: usize, ell: usize, x: f64) -> Result<f64> {
    if ell == 0 || ell + 1 > s {
        return Err(Error::Domain(format!(
            "diameter {ell} outside 1..={} for s = {s}",
            s.saturating_sub(1)
        )));
    }
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("x must be nonnegative, got {x}")));
    }
    Ok((s - ell) as f64 * x * x * (1.0 + x).powi(ell as i32 - 1))
}

/// Number of subsets of `{1, ..., s}` with diameter exactly `ℓ`.
///
/// `ℓ = 0` counts the empty set and the `s` singletons. Values beyond
/// `u128` saturate.
pub fn count_by_diameter(s: usize, ell: usize) -> u128 {
    if ell == 0 {
        return s as u128 + 1;
    }
    if ell >= s {
        return 0;
    }
    let pow = if ell - 1 >= 128 {
        u128::MAX
    } else {
        1u128 << (ell - 1)
    };
    pow.saturating_mul((s - ell) as u128)
}

/// Whether every subset of every member is itself a member.
pub fn is_downward_closed(active: &[SubsetMask]) -> bool {
    let members: HashSet<u64> = active.iter().map(|u| u.bits()).collect();
    // Closure under removing one element implies closure under all subsets.
    members.iter().all(|&u| {
        let mut rest = u;
        while rest != 0 {
            let low = rest & rest.wrapping_neg();
            if !members.contains(&(u & !low)) {
                return false;
            }
            rest &= rest - 1;
        }
        true
    })
}

/// A set of bounded diameter anywhere inside `{1, ..., s}` for arbitrary `s`.
///
/// Stored as the 0-based position of its smallest element plus a pattern
/// whose bit `k` marks the element `start + k`. The pattern of a nonempty
/// set always has bit 0 set; the empty set is `(0, 0)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
pub struct WindowSet {
    start: u32,
    pattern: u64,
}

impl WindowSet {
    pub const EMPTY: WindowSet = WindowSet {
        start: 0,
        pattern: 0,
    };

    /// Normalizing constructor; `start` is the 0-based offset of pattern bit 0.
    pub fn new(start: u32, pattern: u64) -> Self {
        if pattern == 0 {
            return WindowSet::EMPTY;
        }
        let shift = pattern.trailing_zeros();
        WindowSet {
            start: start + shift,
            pattern: pattern >> shift,
        }
    }

    pub fn from_mask(mask: SubsetMask) -> Self {
        WindowSet::new(0, mask.bits())
    }

    /// The equivalent mask if every member is below coordinate 64.
    pub fn to_mask(self) -> Option<SubsetMask> {
        if self.pattern == 0 {
            return Some(SubsetMask::EMPTY);
        }
        let top = self.start as u64 + 63 - self.pattern.leading_zeros() as u64;
        (top < 64).then(|| SubsetMask(self.pattern << self.start))
    }

    pub const fn start(self) -> u32 {
        self.start
    }

    pub const fn pattern(self) -> u64 {
        self.pattern
    }

    pub const fn cardinality(self) -> u32 {
        self.pattern.count_ones()
    }

    pub const fn diameter(self) -> u32 {
        if self.pattern == 0 {
            0
        } else {
            63 - self.pattern.leading_zeros()
        }
    }

    /// 1-based coordinates in increasing order.
    pub fn coords(self) -> Vec<usize> {
        SubsetMask(self.pattern)
            .coords()
            .into_iter()
            .map(|k| k + self.start as usize)
            .collect()
    }

    /// All subsets, normalized.
    pub fn subsets(self) -> impl Iterator<Item = WindowSet> {
        let start = self.start;
        SubsetMask(self.pattern)
            .submasks()
            .map(move |m| WindowSet::new(start, m.bits()))
    }
}

/// Every subset of `{1, ..., s}` with diameter at most `q`, empty set first,
/// then grouped by smallest element.
///
/// The count is `s + 1 + Σ_{ℓ=1}^{min(q, s-1)} (s - ℓ) 2^{ℓ-1}`.
pub fn diameter_bounded_sets(s: usize, q: usize) -> Result<Vec<WindowSet>> {
    if q > MAX_MASK_DIM - 1 {
        return Err(Error::Capacity(format!(
            "window sets support diameters up to {}, got q = {q}",
            MAX_MASK_DIM - 1
        )));
    }
    if s > u32::MAX as usize {
        return Err(Error::Capacity(format!("dimension {s} too large")));
    }
    let mut out = vec![WindowSet::EMPTY];
    for start in 0..s {
        let width = q.min(s - 1 - start) + 1;
        // Odd patterns: the smallest element is `start` itself.
        for half in 0..1u64 << (width - 1) {
            out.push(WindowSet {
                start: start as u32,
                pattern: half << 1 | 1,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_diameter_counts(s: usize) -> Vec<u128> {
        let mut counts = vec![0u128; s.max(1)];
        for u in enumerate_subsets(s).unwrap() {
            counts[u.diameter() as usize] += 1;
        }
        counts
    }

    #[test]
    fn enumerate_small_dimensions() {
        let one = enumerate_subsets(1).unwrap();
        assert_eq!(one, vec![SubsetMask::EMPTY, SubsetMask::from_bits(1)]);
        let two: Vec<u32> = enumerate_subsets(2)
            .unwrap()
            .iter()
            .map(|u| u.cardinality())
            .collect();
        assert_eq!(two, vec![0, 1, 1, 2]);
        assert_eq!(enumerate_subsets(20).unwrap().len(), 1 << 20);
    }

    #[test]
    fn enumeration_cap() {
        assert!(matches!(enumerate_subsets(31), Err(Error::Capacity(_))));
    }

    #[test]
    fn submask_descent_visits_every_subset_once() {
        let u = SubsetMask::from_bits(0b1011_0101);
        let mut subs: Vec<u64> = u.submasks().map(|v| v.bits()).collect();
        assert_eq!(subs.len(), 1 << u.cardinality());
        subs.sort_unstable();
        subs.dedup();
        assert_eq!(subs.len(), 1 << u.cardinality());
        assert!(subs.iter().all(|&v| v & !u.bits() == 0));
        assert_eq!(SubsetMask::EMPTY.submasks().count(), 1);
    }

    #[test]
    fn diameter_examples() {
        assert_eq!(SubsetMask::EMPTY.diameter(), 0);
        assert_eq!(SubsetMask::from_coords(&[3], 5).unwrap().diameter(), 0);
        assert_eq!(SubsetMask::from_coords(&[1, 4], 5).unwrap().diameter(), 3);
    }

    #[test]
    fn coordinate_mapping_is_one_based() {
        let u = SubsetMask::from_coords(&[1, 3], 3).unwrap();
        assert_eq!(u.bits(), 0b101);
        assert_eq!(u.coords(), vec![1, 3]);
        assert!(u.contains(3) && !u.contains(2));
        assert_eq!(u.to_string(), "{1,3}");
        assert!(SubsetMask::from_coords(&[4], 3).is_err());
        assert!(SubsetMask::new(0b1000, 3).is_err());
    }

    #[test]
    fn weighted_diameter_sum_examples() {
        assert_eq!(weighted_diameter_sum(5, 2, 1.0).unwrap(), 6.0);
        assert_eq!(weighted_diameter_sum(7, 3, 0.0).unwrap(), 0.0);
        assert_eq!(weighted_diameter_sum(5, 1, 0.5).unwrap(), 1.0);
        assert!(weighted_diameter_sum(5, 0, 1.0).is_err());
        assert!(weighted_diameter_sum(5, 5, 1.0).is_err());
    }

    #[test]
    fn count_by_diameter_examples() {
        assert_eq!(count_by_diameter(5, 0), 6);
        assert_eq!(count_by_diameter(5, 2), 6);
        assert_eq!(count_by_diameter(5, 4), 8);
        assert_eq!(count_by_diameter(5, 5), 0);
    }

    #[test]
    fn count_by_diameter_matches_enumeration() {
        for s in 1..=14 {
            let brute = brute_force_diameter_counts(s);
            for (ell, &expected) in brute.iter().enumerate() {
                assert_eq!(count_by_diameter(s, ell), expected, "s={s} ell={ell}");
            }
            let total: u128 = (0..s).map(|ell| count_by_diameter(s, ell)).sum();
            assert_eq!(total, 1u128 << s);
        }
    }

    #[test]
    fn weighted_diameter_sum_matches_enumeration() {
        for s in 2..=12 {
            let subsets = enumerate_subsets(s).unwrap();
            for ell in 1..s {
                for x in [0.25f64, 0.5, 1.0, 2.0] {
                    let brute: f64 = subsets
                        .iter()
                        .filter(|u| u.diameter() as usize == ell)
                        .map(|u| x.powi(u.cardinality() as i32))
                        .sum();
                    let closed = weighted_diameter_sum(s, ell, x).unwrap();
                    assert!(
                        (closed - brute).abs() <= 1e-12 * brute.abs().max(1e-300),
                        "s={s} ell={ell} x={x}: {closed} vs {brute}"
                    );
                }
            }
        }
    }

    #[test]
    fn downward_closure() {
        let m = |b| SubsetMask::from_bits(b);
        assert!(is_downward_closed(&[m(0), m(1), m(2), m(3)]));
        assert!(!is_downward_closed(&[m(0), m(3)]));
        assert!(is_downward_closed(&[m(0)]));
    }

    #[test]
    fn removing_a_non_maximal_member_breaks_closure() {
        let s = 4;
        let all = enumerate_subsets(s).unwrap();
        assert!(is_downward_closed(&all));
        let full = SubsetMask::full(s).unwrap();
        for removed in all.iter().filter(|&&u| u != full) {
            let rest: Vec<SubsetMask> = all.iter().copied().filter(|u| u != removed).collect();
            assert!(!is_downward_closed(&rest), "removed {removed}");
        }
    }

    #[test]
    fn cardinality_bounded_sets() {
        let sets = subsets_up_to_cardinality(5, 1).unwrap();
        assert_eq!(sets.len(), 6);
        let sets = subsets_up_to_cardinality(10, 3).unwrap();
        assert_eq!(sets.len(), 1 + 10 + 45 + 120);
        assert!(sets.windows(2).all(|w| w[0] < w[1]));
        assert!(sets.iter().all(|u| u.cardinality() <= 3));
        assert_eq!(subsets_up_to_cardinality(63, 1).unwrap().len(), 64);
    }

    #[test]
    fn diameter_bounded_sets_match_counts() {
        for s in 1..=14 {
            for q in 0..s {
                let sets = diameter_bounded_sets(s, q).unwrap();
                let expected: u128 = (0..=q).map(|ell| count_by_diameter(s, ell)).sum();
                assert_eq!(sets.len() as u128, expected, "s={s} q={q}");
                let masks: HashSet<u64> =
                    sets.iter().map(|w| w.to_mask().unwrap().bits()).collect();
                assert_eq!(masks.len(), sets.len());
                assert!(sets.iter().all(|w| w.diameter() as usize <= q));
            }
        }
    }

    #[test]
    fn window_set_normalization() {
        let w = WindowSet::new(3, 0b1010);
        assert_eq!(w.start(), 4);
        assert_eq!(w.pattern(), 0b101);
        assert_eq!(w.coords(), vec![5, 7]);
        assert_eq!(w.diameter(), 2);
        let subs: Vec<WindowSet> = w.subsets().collect();
        assert_eq!(subs.len(), 4);
        assert!(subs.contains(&WindowSet::new(6, 1)));
        assert!(subs.contains(&WindowSet::EMPTY));
        assert_eq!(WindowSet::new(70, 1).to_mask(), None);
    }
}
