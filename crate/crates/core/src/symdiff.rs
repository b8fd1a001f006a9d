//! Exact calculus on sums of terms
//!
//! ```text
//!     c · (t − Re z)^γ · (i Im z)^η · |t − z|^{−2m}
//! ```
//!
//! with rational `c`. The quantity `|t − z|² = Σ_j (t_j − Re z_j)² + (Im z_j)²`
//! is kept atomic, so the family is closed under `∂_{t_i}` and two sums can be
//! compared key by key. `z` stays symbolic; the `(i Im z)^η` factor lets the
//! complex linear factors `t_ℓ − z̄_ℓ` and `t_ℓ − z_ℓ` live in the same family.
//! Sums built only from `g(t) = |t − z|^{−2}` never carry an `η` part.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::multiindex::{compositions, enumerate_half, MultiIndex};

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn rat_big(n: num_bigint::BigUint) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Monomial part of a term: exponents of `(t − Re z)`, `(i Im z)` and `|t−z|^{−2}`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TermKey {
    pub gamma: MultiIndex,
    pub eta: MultiIndex,
    pub m: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Term {
    pub coeff: BigRational,
    pub gamma: MultiIndex,
    pub eta: MultiIndex,
    pub m: u32,
}

impl Term {
    /// A term without an `(i Im z)` factor.
    pub fn new(coeff: BigRational, gamma: MultiIndex, m: u32) -> Self {
        let nu = gamma.nu();
        Term {
            coeff,
            gamma,
            eta: MultiIndex::zero(nu),
            m,
        }
    }

    fn key(&self) -> TermKey {
        TermKey {
            gamma: self.gamma.clone(),
            eta: self.eta.clone(),
            m: self.m,
        }
    }
}

/// Normal form: one coefficient per key, zero coefficients never stored.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TermSum {
    nu: usize,
    terms: BTreeMap<TermKey, BigRational>,
}

impl TermSum {
    pub fn zero(nu: usize) -> Self {
        TermSum {
            nu,
            terms: BTreeMap::new(),
        }
    }

    pub fn from_term(t: Term) -> Self {
        let mut s = Self::zero(t.gamma.nu());
        s.add_term(t);
        s
    }

    pub fn constant(nu: usize, c: BigRational) -> Self {
        Self::from_term(Term::new(c, MultiIndex::zero(nu), 0))
    }

    pub fn one(nu: usize) -> Self {
        Self::constant(nu, BigRational::one())
    }

    /// `g(t) = |t − z|^{−2}`.
    pub fn g(nu: usize) -> Self {
        Self::g_power(nu, 1)
    }

    /// `g(t)^m`.
    pub fn g_power(nu: usize, m: u32) -> Self {
        Self::from_term(Term::new(BigRational::one(), MultiIndex::zero(nu), m))
    }

    /// `t_i − Re z_i`.
    pub fn coordinate(nu: usize, i: usize) -> Self {
        Self::from_term(Term::new(BigRational::one(), MultiIndex::delta(nu, i), 0))
    }

    /// `i · Im z_i`.
    pub fn imaginary(nu: usize, i: usize) -> Self {
        Self::from_term(Term {
            coeff: BigRational::one(),
            gamma: MultiIndex::zero(nu),
            eta: MultiIndex::delta(nu, i),
            m: 0,
        })
    }

    /// `g_ℓ(t) = t_ℓ − z̄_ℓ = (t_ℓ − Re z_ℓ) + i Im z_ℓ`.
    pub fn conj_linear(nu: usize, l: usize) -> Self {
        Self::coordinate(nu, l).add(&Self::imaginary(nu, l))
    }

    /// `t_ℓ − z_ℓ = (t_ℓ − Re z_ℓ) − i Im z_ℓ`.
    pub fn linear(nu: usize, l: usize) -> Self {
        Self::coordinate(nu, l).sub(&Self::imaginary(nu, l))
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = Term> + '_ {
        self.terms.iter().map(|(k, c)| Term {
            coeff: c.clone(),
            gamma: k.gamma.clone(),
            eta: k.eta.clone(),
            m: k.m,
        })
    }

    pub fn coefficient(&self, gamma: &MultiIndex, m: u32) -> BigRational {
        let key = TermKey {
            gamma: gamma.clone(),
            eta: MultiIndex::zero(self.nu),
            m,
        };
        self.terms.get(&key).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn add_term(&mut self, t: Term) {
        assert_eq!(t.gamma.nu(), self.nu, "dimension mismatch");
        if t.coeff.is_zero() {
            return;
        }
        let key = t.key();
        let entry = self.terms.entry(key.clone()).or_insert_with(BigRational::zero);
        *entry += t.coeff;
        if entry.is_zero() {
            self.terms.remove(&key);
        }
    }

    pub fn add(&self, other: &TermSum) -> TermSum {
        let mut out = self.clone();
        for t in other.terms() {
            out.add_term(t);
        }
        out
    }

    pub fn sub(&self, other: &TermSum) -> TermSum {
        self.add(&other.scale(&rat(-1)))
    }

    pub fn scale(&self, c: &BigRational) -> TermSum {
        let mut out = TermSum::zero(self.nu);
        for mut t in self.terms() {
            t.coeff *= c;
            out.add_term(t);
        }
        out
    }

    pub fn mul(&self, other: &TermSum) -> TermSum {
        assert_eq!(self.nu, other.nu, "dimension mismatch");
        let mut out = TermSum::zero(self.nu);
        for a in self.terms() {
            for b in other.terms() {
                out.add_term(Term {
                    coeff: &a.coeff * &b.coeff,
                    gamma: &a.gamma + &b.gamma,
                    eta: &a.eta + &b.eta,
                    m: a.m + b.m,
                });
            }
        }
        out
    }

    /// Exact `∂_{t_i}`: power rule on `(t − Re z)^γ` plus
    /// `∂_i |t−z|^{−2m} = −2m (t_i − Re z_i) |t−z|^{−2m−2}`.
    pub fn differentiate(&self, i: usize) -> TermSum {
        let mut out = TermSum::zero(self.nu);
        for t in self.terms() {
            let gi = t.gamma[i];
            if gi > 0 {
                out.add_term(Term {
                    coeff: &t.coeff * rat(i64::from(gi)),
                    gamma: t.gamma.shift(i, -1).expect("gamma_i > 0"),
                    eta: t.eta.clone(),
                    m: t.m,
                });
            }
            if t.m > 0 {
                out.add_term(Term {
                    coeff: &t.coeff * rat(-2 * i64::from(t.m)),
                    gamma: t.gamma.bump(i),
                    eta: t.eta.clone(),
                    m: t.m + 1,
                });
            }
        }
        out
    }

    /// `∂^α` applied axis by axis in increasing axis order.
    pub fn derivative(&self, alpha: &MultiIndex) -> TermSum {
        self.derivative_along(&alpha.axis_sequence())
    }

    /// Applies `∂_{axes[0]}`, then `∂_{axes[1]}`, and so on.
    pub fn derivative_along(&self, axes: &[usize]) -> TermSum {
        axes.iter().fold(self.clone(), |s, &i| s.differentiate(i))
    }

    /// Multiplies by `(t_i − Re z_i)`.
    pub fn times_coordinate(&self, i: usize) -> TermSum {
        self.mul(&TermSum::coordinate(self.nu, i))
    }

    /// Multiplies by `|t − z|^{−2k}`.
    pub fn times_g_power(&self, k: u32) -> TermSum {
        self.mul(&TermSum::g_power(self.nu, k))
    }

    pub fn max_exponents(&self) -> (u32, u32, u32) {
        let mut mg = 0;
        let mut me = 0;
        let mut mm = 0;
        for k in self.terms.keys() {
            mg = mg.max(k.gamma.entries().iter().copied().max().unwrap_or(0));
            me = me.max(k.eta.entries().iter().copied().max().unwrap_or(0));
            mm = mm.max(k.m);
        }
        (mg, me, mm)
    }

    /// Floating-point value at real `t` and complex `z`.
    pub fn evaluate(&self, t: &[f64], z: &[Complex64]) -> Result<Complex64> {
        assert_eq!(t.len(), self.nu);
        assert_eq!(z.len(), self.nu);
        if self.is_empty() {
            return Ok(Complex64::zero());
        }
        let (mg, me, mm) = self.max_exponents();
        let table = PowerTable::new(t, z, mg, me, mm)?;
        Ok(self.compile().evaluate(&table))
    }

    /// Real value; fails if the sum has an imaginary `(i Im z)` part that
    /// does not cancel.
    pub fn evaluate_real(&self, t: &[f64], z: &[Complex64]) -> Result<f64> {
        Ok(self.evaluate(t, z)?.re)
    }

    pub fn compile(&self) -> CompiledTermSum {
        let (mg, me, mm) = self.max_exponents();
        CompiledTermSum {
            terms: self
                .terms
                .iter()
                .map(|(k, c)| CompiledTerm {
                    coeff: c.to_f64().expect("finite rational"),
                    gamma: k.gamma.entries().to_vec(),
                    eta: k.eta.entries().to_vec(),
                    eta_degree: k.eta.degree(),
                    m: k.m,
                })
                .collect(),
            max_gamma: mg,
            max_eta: me,
            max_m: mm,
        }
    }
}

impl fmt::Debug for TermSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for TermSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "0");
        }
        for (n, (k, c)) in self.terms.iter().enumerate() {
            if n > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}·x^{}", k.gamma)?;
            if !k.eta.is_zero() {
                write!(f, "·(iy)^{}", k.eta)?;
            }
            write!(f, "·g^{}", k.m)?;
        }
        Ok(())
    }
}

/// Per-point powers of `(t_j − Re z_j)`, `Im z_j` and `|t − z|^{−2}`,
/// stored flat so one table can be refilled without allocating.
pub struct PowerTable {
    gamma_stride: usize,
    eta_stride: usize,
    coord: Vec<f64>,
    imag: Vec<f64>,
    inv_q: Vec<f64>,
}

impl PowerTable {
    pub fn new(t: &[f64], z: &[Complex64], max_gamma: u32, max_eta: u32, max_m: u32) -> Result<Self> {
        let mut table = Self::empty(t.len(), max_gamma, max_eta, max_m);
        table.fill(t, z)?;
        Ok(table)
    }

    /// Zeroed table for `nu` coordinates.
    pub fn empty(nu: usize, max_gamma: u32, max_eta: u32, max_m: u32) -> Self {
        let gamma_stride = max_gamma as usize + 1;
        let eta_stride = max_eta as usize + 1;
        PowerTable {
            gamma_stride,
            eta_stride,
            coord: vec![0.0; nu * gamma_stride],
            imag: vec![0.0; nu * eta_stride],
            inv_q: vec![0.0; max_m as usize + 1],
        }
    }

    pub fn fill(&mut self, t: &[f64], z: &[Complex64]) -> Result<()> {
        let mut q = 0.0;
        for (j, (tj, zj)) in t.iter().zip(z).enumerate() {
            let x = tj - zj.re;
            q += x * x + zj.im * zj.im;
            powers_into(x, &mut self.coord[j * self.gamma_stride..(j + 1) * self.gamma_stride]);
            powers_into(zj.im, &mut self.imag[j * self.eta_stride..(j + 1) * self.eta_stride]);
        }
        let with_m = self.inv_q.len() > 1;
        if with_m && q == 0.0 {
            return Err(Error::Singular(format!("|t - z|^2 = 0 at t = {t:?}")));
        }
        powers_into(if with_m { 1.0 / q } else { 0.0 }, &mut self.inv_q);
        Ok(())
    }
}

fn powers_into(x: f64, out: &mut [f64]) {
    let mut p = 1.0;
    for slot in out {
        *slot = p;
        p *= x;
    }
}

#[derive(Clone, Debug)]
struct CompiledTerm {
    coeff: f64,
    gamma: Vec<u32>,
    eta: Vec<u32>,
    eta_degree: u32,
    m: u32,
}

/// Floating-point form of a [`TermSum`] for repeated evaluation.
#[derive(Clone, Debug)]
pub struct CompiledTermSum {
    terms: Vec<CompiledTerm>,
    pub max_gamma: u32,
    pub max_eta: u32,
    pub max_m: u32,
}

impl CompiledTermSum {
    pub fn evaluate(&self, table: &PowerTable) -> Complex64 {
        let mut re = 0.0;
        let mut im = 0.0;
        for t in &self.terms {
            let mut v = t.coeff * table.inv_q[t.m as usize];
            for (j, &g) in t.gamma.iter().enumerate() {
                v *= table.coord[j * table.gamma_stride + g as usize];
            }
            for (j, &e) in t.eta.iter().enumerate() {
                v *= table.imag[j * table.eta_stride + e as usize];
            }
            // i^{|η|}
            match t.eta_degree % 4 {
                0 => re += v,
                1 => im += v,
                2 => re -= v,
                _ => im -= v,
            }
        }
        Complex64::new(re, im)
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// `∂^α g` by repeated differentiation of `g`.
pub fn derivative_of_g(alpha: &MultiIndex) -> TermSum {
    TermSum::g(alpha.nu()).derivative(alpha)
}

/// The exact term `T_α^β`:
/// coefficient `(−2)^{|α−β|} |α−β|! / (2^{|β|} β! (α−2β)!)`,
/// `γ = α − 2β`, `m = |α − β|`.
pub fn t_coeff(alpha: &MultiIndex, beta: &MultiIndex) -> Result<Term> {
    if alpha.nu() != beta.nu() || !beta.half_le(alpha) {
        return Err(Error::Precondition(format!(
            "2β ≤ α fails for α = {alpha:?}, β = {beta:?}"
        )));
    }
    let amb = alpha.checked_sub(beta).expect("β ≤ α");
    let gamma = alpha.checked_sub(&beta.scale(2)).expect("2β ≤ α");
    let d = amb.degree();
    let sign = if d.is_multiple_of(2) { 1 } else { -1 };
    let num = rat(sign) * rat_big(num_bigint::BigUint::from(2u32).pow(d))
        * rat_big(crate::multiindex::factorial(d));
    let den = rat_big(num_bigint::BigUint::from(2u32).pow(beta.degree()))
        * rat_big(beta.factorial())
        * rat_big(gamma.factorial());
    Ok(Term::new(num / den, gamma, d))
}

/// `T_α^β` as a one-term sum.
pub fn t_sum(alpha: &MultiIndex, beta: &MultiIndex) -> Result<TermSum> {
    Ok(TermSum::from_term(t_coeff(alpha, beta)?))
}

/// Closed form `Σ_{2β≤α} α! T_α^β |t−z|^{−2}`.
pub fn lemma0_closed_form(alpha: &MultiIndex) -> TermSum {
    let af = rat_big(alpha.factorial());
    let mut out = TermSum::zero(alpha.nu());
    for beta in enumerate_half(alpha) {
        let mut t = t_coeff(alpha, &beta).expect("enumerated β satisfies 2β ≤ α");
        t.coeff *= &af;
        t.m += 1;
        out.add_term(t);
    }
    out
}

/// `T_α^β |t−z|^{−2} = −((β_j+1)/|α+δ_j−β|) T_{α+2δ_j}^{β+δ_j}`, exactly.
pub fn check_h1(alpha: &MultiIndex, beta: &MultiIndex, j: usize) -> Result<bool> {
    let lhs = t_sum(alpha, beta)?.times_g_power(1);
    let a2 = alpha.bump(j).bump(j);
    let b1 = beta.bump(j);
    let denom = alpha.bump(j).checked_sub(beta).expect("β ≤ α").degree();
    let c = -BigRational::new(BigInt::from(beta[j] + 1), BigInt::from(denom));
    let rhs = t_sum(&a2, &b1)?.scale(&c);
    Ok(lhs == rhs)
}

/// `(β_i+1) T_{α+2δ_i}^{β+δ_i} · 2(t_i − Re z_i) = (α_i+1−2β_i) T_{α+δ_i}^β`, exactly.
pub fn check_h2(alpha: &MultiIndex, beta: &MultiIndex, i: usize) -> Result<bool> {
    // validates 2β ≤ α
    t_coeff(alpha, beta)?;
    let a2 = alpha.bump(i).bump(i);
    let b1 = beta.bump(i);
    let lhs = t_sum(&a2, &b1)?
        .times_coordinate(i)
        .scale(&rat(2 * i64::from(beta[i] + 1)));
    let c = i64::from(alpha[i]) + 1 - 2 * i64::from(beta[i]);
    let rhs = t_sum(&alpha.bump(i), beta)?.scale(&rat(c));
    Ok(lhs == rhs)
}

/// `∂^α (Π f_i) = Σ_{Σα_i = α} α!/Π α_i! Π ∂^{α_i} f_i`.
pub fn leibniz_derivative(factors: &[TermSum], alpha: &MultiIndex) -> TermSum {
    let nu = alpha.nu();
    if factors.is_empty() {
        return if alpha.is_zero() {
            TermSum::one(nu)
        } else {
            TermSum::zero(nu)
        };
    }
    let af = rat_big(alpha.factorial());
    let mut out = TermSum::zero(nu);
    for parts in compositions(alpha, factors.len()) {
        let mut denom = BigRational::one();
        let mut prod = TermSum::one(nu);
        for (f, a) in factors.iter().zip(&parts) {
            denom *= rat_big(a.factorial());
            prod = prod.mul(&f.derivative(a));
            if prod.is_empty() {
                break;
            }
        }
        out = out.add(&prod.scale(&(&af / denom)));
    }
    out
}

/// Result of an exhaustive symbolic sweep.
#[derive(Clone, Debug, Serialize)]
pub struct SymbolicCertificate {
    pub nu: usize,
    pub max_degree: u32,
    /// Indices `α` whose derivative `∂^α g` was compared with the closed form.
    pub closed_form_checked: usize,
    /// `(α, β, j)` triples checked against h1 and h2, counted once per identity.
    pub index_identities_checked: usize,
    pub closed_form_failures: Vec<String>,
    pub index_identity_failures: Vec<String>,
}

impl SymbolicCertificate {
    pub fn checked(&self) -> usize {
        self.closed_form_checked + self.index_identities_checked
    }

    pub fn passed(&self) -> bool {
        self.closed_form_failures.is_empty() && self.index_identity_failures.is_empty()
    }
}

/// Checks the closed form for `∂^α g`, identity h1 and identity h2 for every
/// admissible index with `|α| ≤ max_degree`.
pub fn verify_symbolic(nu: usize, max_degree: u32) -> SymbolicCertificate {
    let mut cert = SymbolicCertificate {
        nu,
        max_degree,
        closed_form_checked: 0,
        index_identities_checked: 0,
        closed_form_failures: Vec::new(),
        index_identity_failures: Vec::new(),
    };
    for alpha in crate::multiindex::enumerate_degree_range(nu, 0, max_degree) {
        cert.closed_form_checked += 1;
        if derivative_of_g(&alpha) != lemma0_closed_form(&alpha) {
            cert.closed_form_failures.push(format!("alpha={alpha}"));
        }
        for beta in enumerate_half(&alpha) {
            for j in 0..nu {
                cert.index_identities_checked += 2;
                if !check_h1(&alpha, &beta, j).unwrap_or(false) {
                    cert.index_identity_failures.push(format!("h1 alpha={alpha} beta={beta} j={j}"));
                }
                if !check_h2(&alpha, &beta, j).unwrap_or(false) {
                    cert.index_identity_failures.push(format!("h2 alpha={alpha} beta={beta} i={j}"));
                }
            }
        }
    }
    cert
}

/// Largest absolute coefficient, useful for scale estimates.
pub fn max_abs_coefficient(s: &TermSum) -> f64 {
    s.terms
        .values()
        .map(|c| c.abs().to_f64().unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mi(e: &[u32]) -> MultiIndex {
        MultiIndex::new(e.to_vec())
    }

    fn term(c: i64, g: &[u32], m: u32) -> Term {
        Term::new(rat(c), mi(g), m)
    }

    fn sum(ts: Vec<Term>) -> TermSum {
        let mut s = TermSum::zero(ts[0].gamma.nu());
        for t in ts {
            s.add_term(t);
        }
        s
    }

    #[test]
    fn differentiate_g_is_chain_rule() {
        for i in 0..3 {
            let d = TermSum::g(3).differentiate(i);
            let mut delta = [0u32; 3];
            delta[i] = 1;
            assert_eq!(d, sum(vec![term(-2, &delta, 2)]));
        }
    }

    #[test]
    fn differentiate_constant_vanishes() {
        let c = TermSum::constant(2, rat(7));
        assert!(c.differentiate(0).is_empty());
        assert!(c.differentiate(1).is_empty());
    }

    #[test]
    fn second_derivative_of_g() {
        let expected = sum(vec![term(8, &[2, 0], 3), term(-2, &[0, 0], 2)]);
        assert_eq!(TermSum::g(2).differentiate(0).differentiate(0), expected);
        assert_eq!(derivative_of_g(&mi(&[2, 0])), expected);
        assert_eq!(lemma0_closed_form(&mi(&[2, 0])), expected);
    }

    #[test]
    fn derivative_of_g_small_cases() {
        assert_eq!(derivative_of_g(&mi(&[0, 0])), sum(vec![term(1, &[0, 0], 1)]));
        assert_eq!(derivative_of_g(&mi(&[1, 0])), sum(vec![term(-2, &[1, 0], 2)]));
        assert_eq!(lemma0_closed_form(&mi(&[0, 0])), sum(vec![term(1, &[0, 0], 1)]));
        assert_eq!(lemma0_closed_form(&mi(&[1, 0])), sum(vec![term(-2, &[1, 0], 2)]));
    }

    #[test]
    fn t_coeff_examples() {
        assert_eq!(t_coeff(&mi(&[0]), &mi(&[0])).unwrap(), term(1, &[0], 0));
        assert_eq!(t_coeff(&mi(&[1, 0]), &mi(&[0, 0])).unwrap(), term(-2, &[1, 0], 1));
        assert_eq!(t_coeff(&mi(&[2, 0]), &mi(&[1, 0])).unwrap(), term(-1, &[0, 0], 1));
        assert!(matches!(
            t_coeff(&mi(&[1, 0]), &mi(&[1, 0])),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn h1_h2_examples() {
        let z = mi(&[0, 0]);
        assert!(check_h1(&z, &z, 0).unwrap());
        assert!(check_h1(&mi(&[1, 0]), &z, 0).unwrap());
        assert!(check_h2(&z, &z, 0).unwrap());
        assert!(check_h2(&mi(&[2, 0]), &mi(&[1, 0]), 0).unwrap());
        assert!(check_h1(&mi(&[1, 0]), &mi(&[1, 0]), 0).is_err());
    }

    #[test]
    fn exhaustive_sweep_small() {
        for nu in 1..=2 {
            let cert = verify_symbolic(nu, 4);
            assert!(cert.passed(), "{:?} {:?}", cert.closed_form_failures, cert.index_identity_failures);
            assert!(cert.closed_form_checked > 0 && cert.index_identities_checked > 0);
        }
    }

    #[test]
    fn evaluate_examples() {
        let z = [Complex64::new(0.0, 1.0)];
        let g = TermSum::g(1);
        assert!((g.evaluate_real(&[1.0], &z).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(TermSum::zero(1).evaluate_real(&[1.0], &z).unwrap(), 0.0);
        let dg = g.differentiate(0);
        assert!((dg.evaluate_real(&[1.0], &z).unwrap() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn evaluate_singular() {
        let z = [Complex64::new(1.0, 0.0)];
        assert!(matches!(
            TermSum::g(1).evaluate(&[1.0], &z),
            Err(Error::Singular(_))
        ));
        // no |t−z| factor: fine even at t = z
        assert!(TermSum::coordinate(1, 0).evaluate(&[1.0], &z).is_ok());
    }

    #[test]
    fn linear_factors_evaluate_to_complex_differences() {
        let t = [0.3, -1.2];
        let z = [Complex64::new(0.5, 0.7), Complex64::new(-0.1, -0.4)];
        for l in 0..2 {
            let gl = TermSum::conj_linear(2, l).evaluate(&t, &z).unwrap();
            let expected = Complex64::new(t[l], 0.0) - z[l].conj();
            assert!((gl - expected).norm() < 1e-15);
            let lin = TermSum::linear(2, l).evaluate(&t, &z).unwrap();
            assert!((lin - (Complex64::new(t[l], 0.0) - z[l])).norm() < 1e-15);
        }
        // (t−z̄)(t−z) = |t_l − z_l|^2 for each component
        let prod = TermSum::conj_linear(1, 0).mul(&TermSum::linear(1, 0));
        let v = prod.evaluate(&[0.3], &[Complex64::new(0.5, 0.7)]).unwrap();
        assert!((v.re - (0.04 + 0.49)).abs() < 1e-15 && v.im.abs() < 1e-15);
    }

    #[test]
    fn derivative_is_path_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for nu in 1..=3usize {
            for _ in 0..10 {
                let alpha = MultiIndex::new((0..nu).map(|_| rng.random_range(0..3)).collect());
                let reference = derivative_of_g(&alpha);
                for _ in 0..3 {
                    let mut axes = alpha.axis_sequence();
                    axes.shuffle(&mut rng);
                    assert_eq!(TermSum::g(nu).derivative_along(&axes), reference);
                }
            }
        }
    }

    #[test]
    fn differentiate_matches_central_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-5;
        for nu in 1..=3usize {
            for _ in 0..20 {
                let alpha = MultiIndex::new((0..nu).map(|_| rng.random_range(0..3)).collect());
                let s = derivative_of_g(&alpha).mul(&TermSum::conj_linear(nu, 0));
                let t: Vec<f64> = (0..nu).map(|_| rng.random_range(-1.0..1.0)).collect();
                let z: Vec<Complex64> = (0..nu)
                    .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(0.5..1.5)))
                    .collect();
                for i in 0..nu {
                    let exact = s.differentiate(i).evaluate(&t, &z).unwrap();
                    let mut tp = t.clone();
                    let mut tm = t.clone();
                    tp[i] += h;
                    tm[i] -= h;
                    let fd = (s.evaluate(&tp, &z).unwrap() - s.evaluate(&tm, &z).unwrap()) / (2.0 * h);
                    let scale = exact.norm().max(1.0);
                    assert!((exact - fd).norm() / scale <= 1e-6, "{exact} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn multinomial_product_rule_matches_direct() {
        let nu = 2;
        let factors = vec![
            TermSum::g(nu),
            TermSum::conj_linear(nu, 1),
            TermSum::g(nu),
        ];
        let product = factors.iter().fold(TermSum::one(nu), |acc, f| acc.mul(f));
        for alpha in crate::multiindex::enumerate_degree_range(nu, 0, 3) {
            assert_eq!(leibniz_derivative(&factors, &alpha), product.derivative(&alpha));
        }
    }
}
