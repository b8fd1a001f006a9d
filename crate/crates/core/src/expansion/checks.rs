//! Residuals of the kernel-level identities at a fixed `z`, each side
//! computed from matrices independently of the other. Residuals are
//! normalized by `‖B‖ · max(1, ‖h(A)‖)` with `h` the kernel commuted with `B`.

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::kernel::{
    kernel_symbol, leibniz_expand, remainder_g, remainder_gl, remainder_kernel, symbol_operator, KernelFactor,
};
use crate::error::Result;
use crate::multiindex::{enumerate_degree_range, MultiIndex};
use crate::operator::{commutator, iterated_commutator, op_norm, relative_residual, CommutingTuple, Operator};
use crate::symdiff::TermSum;

/// Seeded `z` with `Re z_j ∈ [−2, 2]` and `|Im z_j| ∈ [0.3, 1.5]`, random signs.
pub fn random_point(seed: u64, nu: usize) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7a3c_91e5);
    (0..nu)
        .map(|_| {
            let re = rng.random_range(-2.0..2.0);
            let im: f64 = rng.random_range(0.3..1.5);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            Complex64::new(re, sign * im)
        })
        .collect()
}

fn scale(b: &Operator, h: &Operator) -> f64 {
    op_norm(b) * op_norm(h).max(1.0)
}

/// `Σ_{1≤|α|≤n} ∂^α h(A) ad^{α0+α}(B)/α!` with `∂^α h` from direct differentiation.
fn shifted_taylor(
    a: &CommutingTuple,
    b: &Operator,
    h: &TermSum,
    alpha0: &MultiIndex,
    n: u32,
    z: &[Complex64],
) -> Result<Operator> {
    let d = a.dim();
    let mut acc = Operator::zeros(d, d);
    for alpha in enumerate_degree_range(a.nu(), 1, n) {
        let dh = symbol_operator(a, &h.derivative(&alpha), z)?;
        let ad = iterated_commutator(a, b, &(alpha0 + &alpha));
        acc += dh * ad * Complex64::from(1.0 / alpha.factorial_f64());
    }
    Ok(acc)
}

/// `[B, |A − z|^{−2}]` against the two-sum right side at `n = 0`.
pub fn basestep_residual(a: &CommutingTuple, b: &Operator, z: &[Complex64]) -> Result<f64> {
    let g = a.resolvent_kernel(z)?;
    let lhs = commutator(b, &g);
    let d = a.dim();
    let mut rhs = Operator::zeros(d, d);
    for i in 0..a.nu() {
        let ad = iterated_commutator(a, b, &MultiIndex::delta(a.nu(), i));
        let shift = |c: Complex64| a.component(i) - Operator::identity(d, d) * c;
        rhs -= &g * shift(z[i].conj()) * &ad * &g + &g * &ad * shift(z[i]) * &g;
    }
    // the right side is also the n = 0 remainder
    let terms = remainder_g(a, b, &MultiIndex::zero(a.nu()), 0, z)?;
    let s = scale(b, &g);
    Ok(relative_residual(&lhs, &rhs, s).max(relative_residual(&terms, &rhs, s)))
}

/// `[ad^{α0}(B), g(A)] − Σ ∂^α g(A) ad^{α0+α}(B)/α! − R_n^g(A, ad^{α0}(B))`.
pub fn lemma1_residual(a: &CommutingTuple, b: &Operator, alpha0: &MultiIndex, n: u32, z: &[Complex64]) -> Result<f64> {
    let g = a.resolvent_kernel(z)?;
    let lhs = commutator(&iterated_commutator(a, b, alpha0), &g);
    let taylor = shifted_taylor(a, b, &TermSum::g(a.nu()), alpha0, n, z)?;
    let rem = remainder_g(a, b, alpha0, n, z)?;
    Ok(relative_residual(&lhs, &(taylor + rem), scale(b, &g)))
}

/// `[ad^{α0}(B), A_ℓ − z̄_ℓ] − Σ ∂^α g_ℓ ad^{α0+α}(B)/α! − R_n^{g_ℓ}`.
pub fn gl_identity_residual(
    a: &CommutingTuple,
    b: &Operator,
    alpha0: &MultiIndex,
    n: u32,
    l: usize,
    z: &[Complex64],
) -> Result<f64> {
    let d = a.dim();
    let gl = a.component(l) - Operator::identity(d, d) * z[l].conj();
    let lhs = commutator(&iterated_commutator(a, b, alpha0), &gl);
    let taylor = shifted_taylor(a, b, &TermSum::conj_linear(a.nu(), l), alpha0, n, z)?;
    let rem = remainder_gl(a, b, alpha0, n, l)?;
    Ok(relative_residual(&lhs, &(taylor + rem), scale(b, &gl)))
}

fn factor_matrix(a: &CommutingTuple, f: KernelFactor, g: &Operator, z: &[Complex64]) -> Operator {
    match f {
        KernelFactor::G => g.clone(),
        KernelFactor::Gl(l) => a.component(l) - Operator::identity(a.dim(), a.dim()) * z[l].conj(),
    }
}

/// `[B, Π h_i(A)] − (sum + remainder)` from [`leibniz_expand`], with the
/// product formed by matrix multiplication.
pub fn leibniz_residual(
    a: &CommutingTuple,
    b: &Operator,
    factors: &[KernelFactor],
    n: u32,
    z: &[Complex64],
) -> Result<f64> {
    let g = a.resolvent_kernel(z)?;
    let d = a.dim();
    let prod = factors
        .iter()
        .fold(Operator::identity(d, d), |acc, f| acc * factor_matrix(a, *f, &g, z));
    let (sum, rem) = leibniz_expand(a, b, factors, n, z)?;
    Ok(relative_residual(&commutator(b, &prod), &(sum + rem), scale(b, &prod)))
}

/// `[B, K_ℓ(A)] − Σ ∂^α K_ℓ(A) ad^α(B)/α! − R_{ℓ,n}` for
/// `K_ℓ = |A − z|^{−2ν}(A_ℓ − z̄_ℓ)`.
pub fn acommb_residual(a: &CommutingTuple, b: &Operator, l: usize, n: u32, z: &[Complex64]) -> Result<f64> {
    let g = a.resolvent_kernel(z)?;
    let d = a.dim();
    let gl = a.component(l) - Operator::identity(d, d) * z[l].conj();
    let k = (0..a.nu()).fold(gl, |acc, _| acc * &g);
    let h = kernel_symbol(a.nu(), l);
    let taylor = shifted_taylor(a, b, &h, &MultiIndex::zero(a.nu()), n, z)?;
    let rem = remainder_kernel(a, b, l, n, z)?;
    Ok(relative_residual(&commutator(b, &k), &(taylor + rem), scale(b, &k)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::kernel::{evaluate_taylor, g_remainder_terms, leibniz_terms, simplify, KernelTerm};
    use crate::operator::random_operator;

    #[test]
    fn basestep_holds() {
        for nu in 1..=3 {
            for seed in 0..3 {
                let a = CommutingTuple::random(seed, nu, 6, 1.5).unwrap();
                let b = random_operator(seed + 50, 6);
                let r = basestep_residual(&a, &b, &random_point(seed, nu)).unwrap();
                assert!(r < 1e-12, "nu={nu} seed={seed}: {r:e}");
            }
        }
    }

    #[test]
    fn lemma1_holds_with_shift() {
        let a = CommutingTuple::random(11, 2, 5, 1.5).unwrap();
        let b = random_operator(12, 5);
        let z = random_point(13, 2);
        for n in 0..=3 {
            let r = lemma1_residual(&a, &b, &MultiIndex::new(vec![1, 1]), n, &z).unwrap();
            assert!(r < 1e-10, "n={n}: {r:e}");
        }
    }

    #[test]
    fn gl_identity_holds() {
        let a = CommutingTuple::random(14, 2, 5, 1.5).unwrap();
        let b = random_operator(15, 5);
        let z = random_point(16, 2);
        for n in 0..=2 {
            let r = gl_identity_residual(&a, &b, &MultiIndex::new(vec![0, 2]), n, 1, &z).unwrap();
            assert!(r < 1e-12, "n={n}: {r:e}");
        }
    }

    #[test]
    fn product_rule_holds_for_two_and_three_factors() {
        let a = CommutingTuple::random(17, 2, 5, 1.5).unwrap();
        let b = random_operator(18, 5);
        let z = random_point(19, 2);
        let lists = [
            vec![KernelFactor::G, KernelFactor::G],
            vec![KernelFactor::Gl(0), KernelFactor::G],
            vec![KernelFactor::G, KernelFactor::Gl(1), KernelFactor::G],
        ];
        for factors in &lists {
            for n in 0..=2 {
                let r = leibniz_residual(&a, &b, factors, n, &z).unwrap();
                assert!(r < 1e-10, "{factors:?} n={n}: {r:e}");
            }
        }
    }

    #[test]
    fn kernel_identity_holds() {
        for nu in 1..=2 {
            let a = CommutingTuple::random(20, nu, 5, 1.5).unwrap();
            let b = random_operator(21, 5);
            let z = random_point(22, nu);
            for n in 0..=2 {
                for l in 0..nu {
                    let r = acommb_residual(&a, &b, l, n, &z).unwrap();
                    assert!(r < 1e-10, "nu={nu} n={n} l={l}: {r:e}");
                }
            }
        }
    }

    #[test]
    fn order_zero_kernel_remainder_combines_basestep_and_gl() {
        // ν = 1: R_{0,0} = R_0^{g_0} g + g_0 R_0^g
        let t = leibniz_terms(&[KernelFactor::Gl(0), KernelFactor::G], 1, 0).unwrap();
        let zero = MultiIndex::zero(1);
        let mut expect = vec![KernelTerm {
            left: TermSum::one(1),
            ad: MultiIndex::delta(1, 0),
            right: TermSum::g(1),
        }];
        for term in g_remainder_terms(&zero, 0) {
            expect.push(KernelTerm {
                left: TermSum::conj_linear(1, 0).mul(&term.left),
                ..term
            });
        }
        assert_eq!(simplify(&t.remainder), simplify(&expect));
        let taylor_empty = evaluate_taylor(
            &CommutingTuple::random(1, 1, 3, 1.0).unwrap(),
            &random_operator(2, 3),
            &random_point(3, 1),
            &t.taylor,
        )
        .unwrap();
        assert_eq!(op_norm(&taylor_empty), 0.0);
    }
}
