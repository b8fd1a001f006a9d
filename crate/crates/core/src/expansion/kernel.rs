//! Kernel-level remainders as sums of `L(A) · ad_A^γ(B) · R(A)` with `L`, `R`
//! exact functions of `(t, z)`.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiindex::{enumerate_degree, enumerate_degree_range, enumerate_half, MultiIndex};
use crate::operator::{iterated_commutator, CommutingTuple, Operator};
use crate::symdiff::{leibniz_derivative, t_sum, TermSum};

/// `left(A) · ad_A^{ad}(B) · right(A)`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelTerm {
    pub left: TermSum,
    pub ad: MultiIndex,
    pub right: TermSum,
}

/// Elementary kernel factors: `g = |t − z|^{−2}` and `g_ℓ = t_ℓ − z̄_ℓ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFactor {
    G,
    Gl(usize),
}

impl KernelFactor {
    pub fn symbol(self, nu: usize) -> TermSum {
        match self {
            KernelFactor::G => TermSum::g(nu),
            KernelFactor::Gl(l) => TermSum::conj_linear(nu, l),
        }
    }

    fn check(self, nu: usize) -> Result<()> {
        match self {
            KernelFactor::Gl(l) if l >= nu => Err(Error::Precondition(format!("axis {l} out of range for nu = {nu}"))),
            _ => Ok(()),
        }
    }
}

fn ratio(num: u32, den: u32) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn inverse_factorial(alpha: &MultiIndex) -> BigRational {
    BigRational::one() / BigRational::from_integer(BigInt::from(alpha.factorial()))
}

/// `R_n^g(A, ad^{α0}(B))` for `g = |A − z|^{−2}`.
pub fn g_remainder_terms(alpha0: &MultiIndex, n: u32) -> Vec<KernelTerm> {
    let nu = alpha0.nu();
    let g = TermSum::g(nu);
    let mut out = Vec::new();
    let coefficient = |alpha: &MultiIndex, beta: &MultiIndex, i: usize| -> TermSum {
        let denom = alpha.bump(i).checked_sub(beta).expect("β ≤ α").degree();
        t_sum(&alpha.bump(i).bump(i), &beta.bump(i))
            .expect("2β ≤ α")
            .scale(&ratio(beta[i] + 1, denom))
    };
    if n >= 1 {
        for alpha in enumerate_degree(nu, n - 1) {
            for beta in enumerate_half(&alpha) {
                for i in 0..nu {
                    out.push(KernelTerm {
                        left: coefficient(&alpha, &beta, i),
                        ad: (alpha0 + &alpha).bump(i).bump(i),
                        right: g.clone(),
                    });
                }
            }
        }
    }
    for alpha in enumerate_degree(nu, n) {
        for beta in enumerate_half(&alpha) {
            for i in 0..nu {
                let c = coefficient(&alpha, &beta, i);
                let ad = (alpha0 + &alpha).bump(i);
                out.push(KernelTerm {
                    left: c.mul(&TermSum::conj_linear(nu, i)),
                    ad: ad.clone(),
                    right: g.clone(),
                });
                out.push(KernelTerm {
                    left: c,
                    ad,
                    right: TermSum::linear(nu, i).mul(&g),
                });
            }
        }
    }
    out
}

/// `R_n^{g_ℓ}(A, ad^{α0}(B))`: `ad^{α0+δ_ℓ}(B)` for `n = 0`, zero otherwise.
pub fn gl_remainder_terms(alpha0: &MultiIndex, n: u32, l: usize) -> Vec<KernelTerm> {
    let nu = alpha0.nu();
    if n > 0 {
        return Vec::new();
    }
    vec![KernelTerm {
        left: TermSum::one(nu),
        ad: alpha0.bump(l),
        right: TermSum::one(nu),
    }]
}

pub fn factor_remainder_terms(factor: KernelFactor, alpha0: &MultiIndex, n: u32) -> Vec<KernelTerm> {
    match factor {
        KernelFactor::G => g_remainder_terms(alpha0, n),
        KernelFactor::Gl(l) => gl_remainder_terms(alpha0, n, l),
    }
}

/// Both sides of the product rule for `[B, Π h_i(A)]` at order `n`.
#[derive(Clone, Debug)]
pub struct LeibnizTerms {
    /// `(α, ∂^α(Π h_i)/α!)` for `1 ≤ |α| ≤ n`.
    pub taylor: Vec<(MultiIndex, TermSum)>,
    pub remainder: Vec<KernelTerm>,
}

pub fn leibniz_terms(factors: &[KernelFactor], nu: usize, n: u32) -> Result<LeibnizTerms> {
    if factors.is_empty() {
        return Err(Error::Precondition("need at least one factor".into()));
    }
    for f in factors {
        f.check(nu)?;
    }
    let symbols: Vec<TermSum> = factors.iter().map(|f| f.symbol(nu)).collect();
    let taylor = enumerate_degree_range(nu, 1, n)
        .into_iter()
        .filter_map(|alpha| {
            let d = leibniz_derivative(&symbols, &alpha).scale(&inverse_factorial(&alpha));
            (!d.is_empty()).then_some((alpha, d))
        })
        .collect();
    let mut remainder = Vec::new();
    for (j, factor) in factors.iter().enumerate() {
        let suffix = symbols[j + 1..].iter().fold(TermSum::one(nu), |acc, s| acc.mul(s));
        for alpha in enumerate_degree_range(nu, 0, n) {
            let prefix = leibniz_derivative(&symbols[..j], &alpha).scale(&inverse_factorial(&alpha));
            if prefix.is_empty() {
                continue;
            }
            for t in factor_remainder_terms(*factor, &alpha, n - alpha.degree()) {
                remainder.push(KernelTerm {
                    left: prefix.mul(&t.left),
                    ad: t.ad,
                    right: t.right.mul(&suffix),
                });
            }
        }
    }
    Ok(LeibnizTerms { taylor, remainder })
}

/// Factor list whose product is `g^ν g_ℓ = |t − z|^{−2ν}(t_ℓ − z̄_ℓ)`.
pub fn kernel_factors(nu: usize, l: usize) -> Vec<KernelFactor> {
    let mut f = vec![KernelFactor::G; nu - 1];
    f.push(KernelFactor::Gl(l));
    f.push(KernelFactor::G);
    f
}

/// `|t − z|^{−2ν}(t_ℓ − z̄_ℓ)`.
pub fn kernel_symbol(nu: usize, l: usize) -> TermSum {
    TermSum::g_power(nu, nu as u32).mul(&TermSum::conj_linear(nu, l))
}

/// `R_{ℓ,n}` as kernel terms.
pub fn kernel_remainder_terms(nu: usize, l: usize, n: u32) -> Result<Vec<KernelTerm>> {
    if l >= nu {
        return Err(Error::Precondition(format!("axis {l} out of range for nu = {nu}")));
    }
    Ok(leibniz_terms(&kernel_factors(nu, l), nu, n)?.remainder)
}

/// Sums the left factors of terms sharing `(ad, right)` and drops vanishing ones.
pub fn simplify(terms: &[KernelTerm]) -> Vec<KernelTerm> {
    let mut map: BTreeMap<(MultiIndex, TermSum), TermSum> = BTreeMap::new();
    for t in terms {
        let key = (t.ad.clone(), t.right.clone());
        let slot = map.entry(key).or_insert_with(|| TermSum::zero(t.left.nu()));
        *slot = slot.add(&t.left);
    }
    map.into_iter()
        .filter(|(_, left)| !left.is_empty())
        .map(|((ad, right), left)| KernelTerm { left, ad, right })
        .collect()
}

/// `s(A)` at the point `z`.
pub fn symbol_operator(a: &CommutingTuple, s: &TermSum, z: &[Complex64]) -> Result<Operator> {
    if z.len() != a.nu() {
        return Err(Error::Precondition(format!("z has {} components, tuple has {}", z.len(), a.nu())));
    }
    a.spectral_apply(|x| s.evaluate(x, z))
}

/// `Σ left(A) ad_A^γ(B) right(A)` with iterated commutators of the matrices.
pub fn evaluate_terms(a: &CommutingTuple, b: &Operator, z: &[Complex64], terms: &[KernelTerm]) -> Result<Operator> {
    let d = a.dim();
    let mut ads: HashMap<MultiIndex, Operator> = HashMap::new();
    let mut acc = Operator::zeros(d, d);
    for t in terms {
        let ad = ads
            .entry(t.ad.clone())
            .or_insert_with(|| iterated_commutator(a, b, &t.ad));
        let l = symbol_operator(a, &t.left, z)?;
        let r = symbol_operator(a, &t.right, z)?;
        acc += l * &*ad * r;
    }
    Ok(acc)
}

/// `Σ_α s_α(A) ad_A^α(B)`.
pub fn evaluate_taylor(a: &CommutingTuple, b: &Operator, z: &[Complex64], taylor: &[(MultiIndex, TermSum)]) -> Result<Operator> {
    let d = a.dim();
    let mut acc = Operator::zeros(d, d);
    for (alpha, s) in taylor {
        acc += symbol_operator(a, s, z)? * iterated_commutator(a, b, alpha);
    }
    Ok(acc)
}

/// `R_n^g(A, ad^{α0}(B))` at `z`.
pub fn remainder_g(a: &CommutingTuple, b: &Operator, alpha0: &MultiIndex, n: u32, z: &[Complex64]) -> Result<Operator> {
    check_nu(a, alpha0)?;
    a.resolvent_kernel(z)?;
    evaluate_terms(a, b, z, &g_remainder_terms(alpha0, n))
}

/// `R_n^{g_ℓ}(A, ad^{α0}(B))`; independent of `z`.
pub fn remainder_gl(a: &CommutingTuple, b: &Operator, alpha0: &MultiIndex, n: u32, l: usize) -> Result<Operator> {
    check_nu(a, alpha0)?;
    KernelFactor::Gl(l).check(a.nu())?;
    let z = vec![Complex64::new(0.0, 1.0); a.nu()];
    evaluate_terms(a, b, &z, &gl_remainder_terms(alpha0, n, l))
}

/// `(Σ_α ∂^α(Π h_i)(A) ad^α(B)/α!, remainder)` for the factors `h_i`.
pub fn leibniz_expand(
    a: &CommutingTuple,
    b: &Operator,
    factors: &[KernelFactor],
    n: u32,
    z: &[Complex64],
) -> Result<(Operator, Operator)> {
    a.resolvent_kernel(z)?;
    let terms = leibniz_terms(factors, a.nu(), n)?;
    Ok((
        evaluate_taylor(a, b, z, &terms.taylor)?,
        evaluate_terms(a, b, z, &terms.remainder)?,
    ))
}

/// `R_{ℓ,n}(A, B)` at `z`.
pub fn remainder_kernel(a: &CommutingTuple, b: &Operator, l: usize, n: u32, z: &[Complex64]) -> Result<Operator> {
    a.resolvent_kernel(z)?;
    evaluate_terms(a, b, z, &kernel_remainder_terms(a.nu(), l, n)?)
}

fn check_nu(a: &CommutingTuple, alpha0: &MultiIndex) -> Result<()> {
    if alpha0.nu() != a.nu() {
        return Err(Error::Precondition("multi-index and tuple dimensions differ".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{commutator, op_norm, random_operator, relative_residual};

    fn point(nu: usize) -> Vec<Complex64> {
        (0..nu)
            .map(|j| Complex64::new(0.3 - 0.2 * j as f64, 0.7 + 0.1 * j as f64))
            .collect()
    }

    #[test]
    fn single_factor_reduces_to_g_remainder() {
        let t = leibniz_terms(&[KernelFactor::G], 2, 2).unwrap();
        let direct = simplify(&g_remainder_terms(&MultiIndex::zero(2), 2));
        assert_eq!(simplify(&t.remainder), direct);
    }

    #[test]
    fn kernel_factors_multiply_to_kernel() {
        for nu in 1..=3 {
            for l in 0..nu {
                let prod = kernel_factors(nu, l)
                    .iter()
                    .fold(TermSum::one(nu), |acc, f| acc.mul(&f.symbol(nu)));
                assert_eq!(prod, kernel_symbol(nu, l));
            }
        }
    }

    #[test]
    fn gl_remainder_is_one_commutator() {
        let a = CommutingTuple::random(3, 2, 5, 1.0).unwrap();
        let b = random_operator(4, 5);
        let alpha0 = MultiIndex::new(vec![1, 0]);
        let r0 = remainder_gl(&a, &b, &alpha0, 0, 1).unwrap();
        let expect = iterated_commutator(&a, &b, &MultiIndex::new(vec![1, 1]));
        assert!(op_norm(&(&r0 - &expect)) < 1e-12);
        assert_eq!(op_norm(&remainder_gl(&a, &b, &alpha0, 2, 1).unwrap()), 0.0);
        // [ad^{α0}(B), A_ℓ − z̄_ℓ] = ad^{α0+δ_ℓ}(B)
        let z = point(2);
        let shifted = a.component(1) - Operator::identity(5, 5) * z[1].conj();
        let lhs = commutator(&iterated_commutator(&a, &b, &alpha0), &shifted);
        assert!(relative_residual(&lhs, &expect, 1.0) < 1e-12);
    }

    #[test]
    fn commuting_b_gives_zero_kernel_remainder() {
        let a = CommutingTuple::random(8, 2, 4, 1.0).unwrap();
        let b = a.spectral_apply_real(|x| x[0] - 2.0 * x[1]);
        let r = remainder_kernel(&a, &b, 0, 1, &point(2)).unwrap();
        assert!(op_norm(&r) < 1e-12, "{}", op_norm(&r));
    }

    #[test]
    fn rejects_bad_axis() {
        assert!(kernel_remainder_terms(2, 2, 1).is_err());
        assert!(leibniz_terms(&[KernelFactor::Gl(3)], 2, 1).is_err());
    }
}
