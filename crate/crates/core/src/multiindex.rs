//! Multi-indices over a fixed ambient dimension.
//!
//! Axes are zero-based in code: `delta(nu, 0)` is the first unit index.

use std::fmt;
use std::ops::{Add, Index};

use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A tuple of nonnegative integers of length `nu >= 1`.
///
/// The derived ordering is lexicographic on the entries.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        assert!(!entries.is_empty(), "multi-index must have length >= 1");
        MultiIndex(entries)
    }

    pub fn zero(nu: usize) -> Self {
        Self::new(vec![0; nu])
    }

    /// The unit multi-index along `axis`.
    pub fn delta(nu: usize, axis: usize) -> Self {
        let mut e = vec![0; nu];
        e[axis] = 1;
        Self::new(e)
    }

    pub fn nu(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    /// Degree `|alpha|`.
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }

    /// `prod_j alpha_j!` as an exact integer.
    pub fn factorial(&self) -> BigUint {
        self.0.iter().fold(BigUint::one(), |acc, &a| acc * factorial(a))
    }

    /// Same as [`factorial`](Self::factorial) in floating point.
    pub fn factorial_f64(&self) -> f64 {
        self.0
            .iter()
            .map(|&a| (1..=a).map(f64::from).product::<f64>())
            .product()
    }

    /// Changes entry `axis` by `amount`; fails if the entry would go negative.
    pub fn shift(&self, axis: usize, amount: i64) -> Result<Self> {
        if axis >= self.nu() {
            return Err(Error::Domain(format!(
                "axis {axis} out of range for dimension {}",
                self.nu()
            )));
        }
        let v = i64::from(self.0[axis]) + amount;
        if v < 0 {
            return Err(Error::Domain(format!(
                "shifting {self:?} along axis {axis} by {amount} gives a negative entry"
            )));
        }
        let mut e = self.0.clone();
        e[axis] = v as u32;
        Ok(Self(e))
    }

    /// `self + delta_axis`, never fails.
    pub fn bump(&self, axis: usize) -> Self {
        let mut e = self.0.clone();
        e[axis] += 1;
        Self(e)
    }

    /// Componentwise `self <= other`.
    pub fn le(&self, other: &Self) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// `self - other`, if componentwise nonnegative.
    pub fn checked_sub(&self, other: &Self) -> Option<Self> {
        if !other.le(self) {
            return None;
        }
        Some(Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()))
    }

    /// `k * self`.
    pub fn scale(&self, k: u32) -> Self {
        Self(self.0.iter().map(|a| a * k).collect())
    }

    /// Whether `2 * self <= alpha` componentwise.
    pub fn half_le(&self, alpha: &Self) -> bool {
        self.0.iter().zip(&alpha.0).all(|(b, a)| 2 * b <= *a)
    }

    /// Concatenation of two index tuples (dimension adds).
    pub fn concat(&self, other: &Self) -> Self {
        let mut e = self.0.clone();
        e.extend_from_slice(&other.0);
        Self(e)
    }

    /// Axis sequence realizing this index, e.g. `(2,1)` gives `[0, 0, 1]`.
    pub fn axis_sequence(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(j, &a)| std::iter::repeat_n(j, a as usize))
            .collect()
    }

    /// `x^alpha` for a real point.
    pub fn monomial(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .map(|(&a, &xi)| xi.powi(a as i32))
            .product()
    }
}

impl Index<usize> for MultiIndex {
    type Output = u32;
    fn index(&self, i: usize) -> &u32 {
        &self.0[i]
    }
}

impl Add for &MultiIndex {
    type Output = MultiIndex;
    fn add(self, rhs: &MultiIndex) -> MultiIndex {
        assert_eq!(self.nu(), rhs.nu(), "dimension mismatch");
        MultiIndex(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

pub fn factorial(n: u32) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, k| acc * k)
}

/// All multi-indices of length `nu` and degree `k`, in descending
/// lexicographic order: `(2,0), (1,1), (0,2)`.
pub fn enumerate_degree(nu: usize, k: u32) -> Vec<MultiIndex> {
    assert!(nu >= 1);
    let mut out = Vec::new();
    let mut cur = vec![0u32; nu];
    fill_degree(&mut cur, 0, k, &mut out);
    out
}

fn fill_degree(cur: &mut [u32], pos: usize, rest: u32, out: &mut Vec<MultiIndex>) {
    if pos + 1 == cur.len() {
        cur[pos] = rest;
        out.push(MultiIndex(cur.to_vec()));
        return;
    }
    for a in (0..=rest).rev() {
        cur[pos] = a;
        fill_degree(cur, pos + 1, rest - a, out);
    }
}

/// All multi-indices with `lo <= degree <= hi`, grouped by degree.
pub fn enumerate_degree_range(nu: usize, lo: u32, hi: u32) -> Vec<MultiIndex> {
    (lo..=hi).flat_map(|k| enumerate_degree(nu, k)).collect()
}

/// All `beta` with `2 beta <= alpha`, in ascending lexicographic order.
pub fn enumerate_half(alpha: &MultiIndex) -> Vec<MultiIndex> {
    let bounds: Vec<u32> = alpha.entries().iter().map(|a| a / 2).collect();
    enumerate_box(&bounds)
}

/// All `beta <= alpha` componentwise, ascending lexicographic order.
pub fn enumerate_below(alpha: &MultiIndex) -> Vec<MultiIndex> {
    enumerate_box(alpha.entries())
}

fn enumerate_box(bounds: &[u32]) -> Vec<MultiIndex> {
    let mut out = vec![MultiIndex(Vec::with_capacity(bounds.len()))];
    for &b in bounds {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..=b).map(move |v| {
                    let mut e = prefix.0.clone();
                    e.push(v);
                    MultiIndex(e)
                })
            })
            .collect();
    }
    out
}

/// Ordered splittings `alpha = alpha_1 + ... + alpha_parts`.
pub fn compositions(alpha: &MultiIndex, parts: usize) -> Vec<Vec<MultiIndex>> {
    if parts == 0 {
        return if alpha.is_zero() { vec![vec![]] } else { vec![] };
    }
    if parts == 1 {
        return vec![vec![alpha.clone()]];
    }
    let mut out = Vec::new();
    for first in enumerate_below(alpha) {
        let rest = alpha.checked_sub(&first).expect("first <= alpha");
        for mut tail in compositions(&rest, parts - 1) {
            tail.insert(0, first.clone());
            out.push(tail);
        }
    }
    out
}
