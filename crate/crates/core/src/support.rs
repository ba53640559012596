//! Sparsity structures: packed bit vectors over `{0,1}^p`.
//!
//! Indices are 0-based in this API. Reports and the command line use
//! 1-based indices, see [`Support::active_indices_one_based`].

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::error::DimensionError;

const WORD: usize = 64;

/// A model `δ ∈ {0,1}^p`.
///
/// Equality and hashing use the packed words; the cached weight is kept in
/// sync by every mutating method.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Support {
    words: Vec<u64>,
    len: usize,
    weight: usize,
}

impl Support {
    /// The empty (null) model of length `p`.
    pub fn empty(p: usize) -> Self {
        Support {
            words: vec![0; p.div_ceil(WORD)],
            len: p,
            weight: 0,
        }
    }

    /// The full model of length `p`.
    pub fn full(p: usize) -> Self {
        let mut s = Support::empty(p);
        for j in 0..p {
            s.set(j, true);
        }
        s
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut s = Support::empty(bits.len());
        for (j, &b) in bits.iter().enumerate() {
            if b {
                s.set(j, true);
            }
        }
        s
    }

    /// Builds a support from 0-based active indices.
    pub fn from_indices(p: usize, active: &[usize]) -> Result<Self, DimensionError> {
        let mut s = Support::empty(p);
        for &j in active {
            if j >= p {
                return Err(DimensionError::IndexOutOfRange { index: j, len: p });
            }
            s.set(j, true);
        }
        Ok(s)
    }

    /// Support whose bit `j` is bit `j` of `code` (state enumeration order).
    pub fn from_code(p: usize, code: usize) -> Self {
        debug_assert!(p < usize::BITS as usize);
        let mut s = Support::empty(p);
        for j in 0..p {
            if (code >> j) & 1 == 1 {
                s.set(j, true);
            }
        }
        s
    }

    /// Integer code `Σ δ_j 2^j`; only meaningful for `p < 64`.
    pub fn code(&self) -> usize {
        debug_assert!(self.len < usize::BITS as usize);
        self.words.first().copied().unwrap_or(0) as usize
    }

    /// Number of coordinates `p`.
    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    /// True for `p = 0`; see [`Support::is_null`] for the empty model.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// True for the null model `δ = 0`.
    #[inline]
    pub fn is_null(&self) -> bool {
        self.weight == 0
    }

    /// `‖δ‖₀`.
    #[inline]
    pub fn weight(&self) -> usize {
        self.weight
    }

    #[inline]
    pub fn get(&self, j: usize) -> bool {
        debug_assert!(j < self.len);
        (self.words[j / WORD] >> (j % WORD)) & 1 == 1
    }

    /// Sets bit `j` in place. Panics if `j` is out of range.
    #[inline]
    pub fn set(&mut self, j: usize, bit: bool) {
        assert!(j < self.len, "index {j} out of range for support of length {}", self.len);
        let mask = 1u64 << (j % WORD);
        let w = &mut self.words[j / WORD];
        let old = *w & mask != 0;
        if old != bit {
            *w ^= mask;
            if bit {
                self.weight += 1;
            } else {
                self.weight -= 1;
            }
        }
    }

    /// Copy of `self` with bit `j` set to `bit` (`δ^{(j,b)}`).
    pub fn flip(&self, j: usize, bit: bool) -> Result<Support, DimensionError> {
        if j >= self.len {
            return Err(DimensionError::IndexOutOfRange { index: j, len: self.len });
        }
        let mut out = self.clone();
        out.set(j, bit);
        Ok(out)
    }

    /// Component-wise minimum.
    pub fn meet(&self, other: &Support) -> Result<Support, DimensionError> {
        self.check_len(other)?;
        let words: Vec<u64> = self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect();
        let weight = words.iter().map(|w| w.count_ones() as usize).sum();
        Ok(Support { words, len: self.len, weight })
    }

    /// Component-wise maximum.
    pub fn join(&self, other: &Support) -> Result<Support, DimensionError> {
        self.check_len(other)?;
        let words: Vec<u64> = self.words.iter().zip(&other.words).map(|(a, b)| a | b).collect();
        let weight = words.iter().map(|w| w.count_ones() as usize).sum();
        Ok(Support { words, len: self.len, weight })
    }

    /// `self ⊆ other`.
    pub fn is_subset(&self, other: &Support) -> Result<bool, DimensionError> {
        self.check_len(other)?;
        Ok(self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0))
    }

    /// Number of coordinates where the two supports differ.
    pub fn hamming(&self, other: &Support) -> Result<usize, DimensionError> {
        self.check_len(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum())
    }

    /// Active indices (0-based, increasing).
    pub fn active(&self) -> Vec<usize> {
        self.iter_active().collect()
    }

    pub fn iter_active(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            core::iter::from_fn(move || {
                if rest == 0 {
                    None
                } else {
                    let b = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    Some(wi * WORD + b)
                }
            })
        })
    }

    /// Active indices in the 1-based report convention.
    pub fn active_indices_one_based(&self) -> Vec<usize> {
        self.iter_active().map(|j| j + 1).collect()
    }

    /// `(w, 0)_δ`: places `w[i]` at the i-th active coordinate.
    pub fn embed(&self, w: &[f64]) -> Result<Vec<f64>, DimensionError> {
        if w.len() != self.weight {
            return Err(DimensionError::Mismatch { expected: self.weight, found: w.len() });
        }
        let mut out = vec![0.0; self.len];
        for (wi, j) in w.iter().zip(self.iter_active()) {
            out[j] = *wi;
        }
        Ok(out)
    }

    /// `[θ]_δ`: the active coordinates of `theta`, in increasing index order.
    pub fn extract(&self, theta: &[f64]) -> Result<Vec<f64>, DimensionError> {
        if theta.len() != self.len {
            return Err(DimensionError::Mismatch { expected: self.len, found: theta.len() });
        }
        Ok(self.iter_active().map(|j| theta[j]).collect())
    }

    fn check_len(&self, other: &Support) -> Result<(), DimensionError> {
        if self.len != other.len {
            Err(DimensionError::Mismatch { expected: self.len, found: other.len })
        } else {
            Ok(())
        }
    }
}

impl Ord for Support {
    /// Lexicographic on `(δ_1, …, δ_p)` with `0 < 1`; shorter supports first.
    fn cmp(&self, other: &Self) -> Ordering {
        match self.len.cmp(&other.len) {
            Ordering::Equal => {}
            o => return o,
        }
        for (a, b) in self.words.iter().zip(&other.words) {
            let diff = a ^ b;
            if diff != 0 {
                let bit = diff.trailing_zeros();
                return if (a >> bit) & 1 == 0 { Ordering::Less } else { Ordering::Greater };
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for Support {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Support {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Support(p={}, {:?})", self.len, self.active_indices_one_based())
    }
}

impl fmt::Display for Support {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, j) in self.iter_active().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", j + 1)?;
        }
        f.write_str("}")
    }
}
