//! Multi-indices over (temporal mode, channel) pairs, the bookkeeping unit of
//! the Cameron–Martin expansion.
//!
//! A [`MultiIndex`] stores only its nonzero counts. Temporal indices `k` are
//! 1-based (matching the cosine modes `m_1, m_2, ...`), channels `l` run over
//! `1..=r`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest single entry accepted by [`MultiIndex::factorial`].
pub const FACTORIAL_GUARD: u32 = 20;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    r: u32,
    // key (k, l) sorts exactly like the flattened slot (k - 1) * r + l
    entries: BTreeMap<(u32, u32), u32>,
}

impl MultiIndex {
    /// The zero index for `r` channels.
    pub fn empty(r: u32) -> Self {
        assert!(r >= 1, "channel count must be positive");
        Self { r, entries: BTreeMap::new() }
    }

    /// Builds an index from `(k, l, count)` triples; zero counts are dropped
    /// and repeated pairs accumulate.
    pub fn from_entries(r: u32, entries: impl IntoIterator<Item = (u32, u32, u32)>) -> Result<Self> {
        let mut alpha = Self::empty(r);
        for (k, l, count) in entries {
            if k == 0 || l == 0 || l > r {
                return Err(Error::InvalidArgument(format!(
                    "multi-index entry ({k},{l}) outside k >= 1, 1 <= l <= {r}"
                )));
            }
            if count > 0 {
                *alpha.entries.entry((k, l)).or_insert(0) += count;
            }
        }
        Ok(alpha)
    }

    pub fn channels(&self) -> u32 {
        self.r
    }

    /// `α_k^l`, zero when absent.
    pub fn get(&self, k: u32, l: u32) -> u32 {
        self.entries.get(&(k, l)).copied().unwrap_or(0)
    }

    /// Nonzero entries as `(k, l, count)` in slot order.
    pub fn entries(&self) -> impl Iterator<Item = (u32, u32, u32)> + '_ {
        self.entries.iter().map(|(&(k, l), &c)| (k, l, c))
    }

    /// Length `|α|`, the chaos order.
    pub fn length(&self) -> u32 {
        self.entries.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Order `d(α)`: the largest temporal index in use, 0 for the empty index.
    pub fn order(&self) -> u32 {
        self.entries.keys().map(|&(k, _)| k).max().unwrap_or(0)
    }

    /// `α(k, l)`: the entry at `(k, l)` decremented toward zero.
    pub fn lower(&self, k: u32, l: u32) -> Self {
        let mut out = self.clone();
        if let Some(c) = out.entries.get_mut(&(k, l)) {
            *c -= 1;
            if *c == 0 {
                out.entries.remove(&(k, l));
            }
        }
        out
    }

    /// `α! = Π α_k^l!`.
    pub fn factorial(&self) -> Result<u64> {
        let mut out: u64 = 1;
        for &c in self.entries.values() {
            if c > FACTORIAL_GUARD {
                return Err(Error::FactorialOverflow { count: c });
            }
            for j in 2..=u64::from(c) {
                out = out.checked_mul(j).ok_or(Error::FactorialOverflow { count: c })?;
            }
        }
        Ok(out)
    }

    pub fn characteristic_set(&self) -> CharacteristicSet {
        let pairs = self
            .entries
            .iter()
            .flat_map(|(&(k, l), &c)| std::iter::repeat_n((k, l), c as usize))
            .collect();
        CharacteristicSet { pairs }
    }

    /// Componentwise `self <= other`.
    pub fn is_dominated_by(&self, other: &Self) -> bool {
        self.entries.iter().all(|(&(k, l), &c)| other.get(k, l) >= c)
    }

    /// Every index `β` with `β <= self` componentwise, grouped by length
    /// (entry `j` holds the indices of length `j`).
    pub fn downward_closure(&self) -> Vec<Vec<MultiIndex>> {
        let slots: Vec<((u32, u32), u32)> = self.entries.iter().map(|(&key, &c)| (key, c)).collect();
        let mut layers = vec![Vec::new(); self.length() as usize + 1];
        let mut counts = vec![0u32; slots.len()];
        loop {
            let beta = MultiIndex {
                r: self.r,
                entries: slots
                    .iter()
                    .zip(&counts)
                    .filter(|(_, &c)| c > 0)
                    .map(|(&(key, _), &c)| (key, c))
                    .collect(),
            };
            layers[beta.length() as usize].push(beta);
            // odometer increment
            let mut pos = 0;
            loop {
                if pos == slots.len() {
                    for layer in &mut layers {
                        layer.sort_by(canonical_cmp);
                    }
                    return layers;
                }
                if counts[pos] < slots[pos].1 {
                    counts[pos] += 1;
                    break;
                }
                counts[pos] = 0;
                pos += 1;
            }
        }
    }

    /// Normalized Wick product `ξ_α = Π H_{α_k^l}(ξ_{k,l}) / sqrt(α!)`.
    pub fn xi_eval<T: Real>(&self, xi: &XiValues<T>) -> Result<T> {
        let mut prod = T::one();
        for (&(k, l), &c) in &self.entries {
            let x = xi.get(k, l).ok_or(Error::MissingXi { k, l })?;
            prod *= hermite_poly(c, x);
        }
        let fact = self.factorial()?;
        Ok(prod / T::lit(fact as f64).sqrt())
    }

    fn slot_vector(&self, slots: usize) -> Vec<u32> {
        let mut v = vec![0; slots];
        for (&(k, l), &c) in &self.entries {
            let s = ((k - 1) * self.r + (l - 1)) as usize;
            if s >= v.len() {
                v.resize(s + 1, 0);
            }
            v[s] = c;
        }
        v
    }
}

/// Canonical order: graded by `|α|`, then lexicographic on the flattened
/// slot vector (smaller count in the first differing slot comes first).
pub fn canonical_cmp(a: &MultiIndex, b: &MultiIndex) -> std::cmp::Ordering {
    a.length().cmp(&b.length()).then_with(|| {
        let slots = (a.order().max(b.order()) * a.r.max(b.r)) as usize;
        a.slot_vector(slots).cmp(&b.slot_vector(slots))
    })
}

impl fmt::Display for MultiIndex {
    /// `k:l:count` triples separated by spaces, `-` for the empty index.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.entries.is_empty() {
            return f.write_str("-");
        }
        let mut first = true;
        for (&(k, l), &c) in &self.entries {
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            write!(f, "{k}:{l}:{c}")?;
        }
        Ok(())
    }
}

impl MultiIndex {
    /// Parses the text form written by `Display`.
    pub fn parse(r: u32, s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "-" {
            return Ok(Self::empty(r));
        }
        let mut triples = Vec::new();
        for tok in s.split_whitespace() {
            let parts: Vec<&str> = tok.split(':').collect();
            let parsed: std::result::Result<Vec<u32>, _> = parts.iter().map(|p| u32::from_str(p)).collect();
            match parsed {
                Ok(v) if v.len() == 3 && v[2] > 0 => triples.push((v[0], v[1], v[2])),
                _ => {
                    return Err(Error::Parse { line: 0, message: format!("bad multi-index token `{tok}`") });
                }
            }
        }
        Self::from_entries(r, triples)
    }
}

/// Ordered pair list `(i_1, q_1), ..., (i_|α|, q_|α|)`; `(k, l)` appears
/// exactly `α_k^l` times.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CharacteristicSet {
    pub pairs: Vec<(u32, u32)>,
}

impl CharacteristicSet {
    /// Rebuilds the multi-index the set was taken from.
    pub fn to_multi_index(&self, r: u32) -> Result<MultiIndex> {
        MultiIndex::from_entries(r, self.pairs.iter().map(|&(k, l)| (k, l, 1)))
    }

    pub fn last(&self) -> Option<(u32, u32)> {
        self.pairs.last().copied()
    }
}

/// All `α` with `|α| <= max_length` and `d(α) <= max_order` over `r`
/// channels, in canonical order.
pub fn enumerate_truncated(max_length: u32, max_order: u32, r: u32) -> Vec<MultiIndex> {
    assert!(max_order >= 1 && r >= 1, "enumeration needs n >= 1 and r >= 1");
    let slots = (max_order * r) as usize;
    let mut out = Vec::new();
    for total in 0..=max_length {
        for_each_composition(total, slots, |v| {
            let entries = v
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(s, &c)| {
                    let s = s as u32;
                    ((s / r + 1, s % r + 1), c)
                })
                .collect();
            out.push(MultiIndex { r, entries });
        });
    }
    out
}

/// `binomial(n, k)` in `u128`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * u128::from(n - i) / u128::from(i + 1))
}

/// Visits every vector of `slots` nonnegative integers summing to `total`,
/// in ascending lexicographic order.
pub(crate) fn for_each_composition(total: u32, slots: usize, mut visit: impl FnMut(&[u32])) {
    fn rec(buf: &mut Vec<u32>, pos: usize, remaining: u32, visit: &mut dyn FnMut(&[u32])) {
        if pos + 1 == buf.len() {
            buf[pos] = remaining;
            visit(buf);
            return;
        }
        for c in 0..=remaining {
            buf[pos] = c;
            rec(buf, pos + 1, remaining - c, visit);
        }
    }
    if slots == 0 {
        if total == 0 {
            visit(&[]);
        }
        return;
    }
    let mut buf = vec![0; slots];
    rec(&mut buf, 0, total, &mut visit);
}

/// Probabilists' Hermite polynomial `H_ν(x)` by the three-term recurrence
/// `H_{n+1} = x H_n - n H_{n-1}`.
pub fn hermite_poly<T: Real>(nu: u32, x: T) -> T {
    let mut prev = T::one();
    if nu == 0 {
        return prev;
    }
    let mut cur = x;
    for n in 1..nu {
        let next = x * cur - T::count(n as usize) * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Dense table of `ξ_{k,l}` for `k = 1..=n`, `l = 1..=r`.
#[derive(Clone, Debug, PartialEq)]
pub struct XiValues<T> {
    n: u32,
    r: u32,
    values: Vec<T>,
}

impl<T: Real> XiValues<T> {
    pub fn zeros(n: u32, r: u32) -> Self {
        Self { n, r, values: vec![T::zero(); (n * r) as usize] }
    }

    pub fn from_fn(n: u32, r: u32, mut f: impl FnMut(u32, u32) -> T) -> Self {
        let mut out = Self::zeros(n, r);
        for k in 1..=n {
            for l in 1..=r {
                out.set(k, l, f(k, l));
            }
        }
        out
    }

    pub fn modes(&self) -> u32 {
        self.n
    }

    pub fn channels(&self) -> u32 {
        self.r
    }

    pub fn get(&self, k: u32, l: u32) -> Option<T> {
        if k == 0 || l == 0 || k > self.n || l > self.r {
            None
        } else {
            Some(self.values[((k - 1) * self.r + (l - 1)) as usize])
        }
    }

    pub fn set(&mut self, k: u32, l: u32, v: T) {
        assert!(k >= 1 && k <= self.n && l >= 1 && l <= self.r, "xi slot ({k},{l}) out of range");
        self.values[((k - 1) * self.r + (l - 1)) as usize] = v;
    }
}
