use std::fmt;

use serde::{Deserialize, Serialize};

use super::fenwick::FenwickSet;
use crate::error::{out_of_range, Error, Result};

/// A permutation of `{1..N}` in one-line notation: entry `i - 1` holds `w(i)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct Permutation(Vec<u32>);

impl Permutation {
    /// Validates that `values` is a bijection of `{1..N}`.
    pub fn from_one_line(values: Vec<u32>) -> Result<Self> {
        let n = values.len();
        let mut seen = vec![false; n + 1];
        for &v in &values {
            let idx = v as usize;
            if idx == 0 || idx > n {
                return Err(Error::InvalidPermutation(format!(
                    "value {v} outside 1..={n}"
                )));
            }
            if seen[idx] {
                return Err(Error::InvalidPermutation(format!("value {v} repeated")));
            }
            seen[idx] = true;
        }
        Ok(Self(values))
    }

    pub(crate) fn from_vec_unchecked(values: Vec<u32>) -> Self {
        Self(values)
    }

    pub fn identity(n: usize) -> Self {
        Self((1..=n as u32).collect())
    }

    pub fn reversal(n: usize) -> Self {
        Self((1..=n as u32).rev().collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    /// `w(i)` for 1-based `i`.
    pub fn at(&self, i: usize) -> u32 {
        self.0[i - 1]
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0u32; self.0.len()];
        for (i, &v) in self.0.iter().enumerate() {
            inv[v as usize - 1] = i as u32 + 1;
        }
        Self(inv)
    }

    /// Swap the values at 1-based positions `i` and `i + 1`.
    pub fn swap_adjacent(&self, i: usize) -> Result<Self> {
        if i == 0 || i >= self.0.len() {
            return Err(out_of_range(format!(
                "adjacent swap index must lie in 1..={}, got {i}",
                self.0.len().saturating_sub(1)
            )));
        }
        let mut out = self.0.clone();
        out.swap(i - 1, i);
        Ok(Self(out))
    }
}

impl TryFrom<Vec<u32>> for Permutation {
    type Error = Error;

    fn try_from(values: Vec<u32>) -> Result<Self> {
        Self::from_one_line(values)
    }
}

impl From<Permutation> for Vec<u32> {
    fn from(p: Permutation) -> Self {
        p.0
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Number of pairs `i < j` with `w(i) > w(j)`, in `O(N log N)`.
pub fn inversion_count(w: &Permutation) -> u64 {
    // w(i) inverts with every smaller value that appears after position i
    let mut unseen = FenwickSet::full(w.len());
    let mut total = 0u64;
    for &v in w.as_slice() {
        let rank = unseen.prefix_count(v as usize);
        total += (rank - 1) as u64;
        unseen.take_kth(rank);
    }
    total
}

/// `H_{L,K}(w) = #{i <= L : w(i) <= K}`.
pub fn height(w: &Permutation, l: usize, k: usize) -> Result<usize> {
    let n = w.len();
    if l == 0 || l > n || k == 0 || k > n {
        return Err(out_of_range(format!(
            "height needs 1 <= L, K <= {n}, got L = {l}, K = {k}"
        )));
    }
    Ok(w.as_slice()[..l].iter().filter(|&&v| v as usize <= k).count())
}

/// Block increments of the height function: component `i` counts positions in
/// `(L_{i-1}, L_i]` (with `L_0 = 0`) whose value is at most `K`.
pub fn multi_height(w: &Permutation, ls: &[usize], k: usize) -> Result<Vec<usize>> {
    let n = w.len();
    if k == 0 || k > n {
        return Err(out_of_range(format!("K must lie in 1..={n}, got {k}")));
    }
    if ls.is_empty() {
        return Err(out_of_range("L list must be nonempty"));
    }
    let mut prev = 0usize;
    let mut out = Vec::with_capacity(ls.len());
    for (idx, &l) in ls.iter().enumerate() {
        if l == 0 || l > n {
            return Err(out_of_range(format!("L_{} = {l} outside 1..={n}", idx + 1)));
        }
        if l < prev {
            return Err(out_of_range(format!(
                "L list must be nondecreasing, got L_{} = {l} after {prev}",
                idx + 1
            )));
        }
        let count = w.as_slice()[prev..l].iter().filter(|&&v| v as usize <= k).count();
        out.push(count);
        prev = l;
    }
    Ok(out)
}
