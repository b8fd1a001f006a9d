//! Commutator expansion `[B, f(A)] = Σ_{1≤|α|≤n} ∂^α f(A) ad_A^α(B)/α! + R_n`,
//! its kernel-level pieces and bound experiments.

pub mod checks;
pub mod integral;
pub mod kernel;
pub mod probe;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::aae::SmoothFunction;
use crate::error::{Error, Result};
use crate::multiindex::{enumerate_degree, MultiIndex};
use crate::operator::{commutator, iterated_commutator, CommutingTuple, Operator};

pub use checks::{
    acommb_residual, basestep_residual, gl_identity_residual, leibniz_residual, lemma1_residual, random_point,
};
pub use integral::{remainder_integral, remainder_integral_batch, remainder_integral_with_estimate, KernelPlan};
pub use kernel::{
    evaluate_terms, kernel_remainder_terms, leibniz_expand, leibniz_terms, remainder_g, remainder_gl,
    remainder_kernel, simplify, KernelFactor, KernelTerm, LeibnizTerms,
};
pub use probe::{
    bound_experiment, check_hypotheses, commutator_sum, hadamard_probe, BoundSummary, ExpansionReport, HadamardProbe,
    Instance, Ratio,
};

/// Where the derivatives of `f` stand relative to the commutators.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `∂^α f(A) ad_A^α(B)`.
    #[default]
    Left,
    /// `(−1)^{|α|−1} ad_A^α(B) ∂^α f(A)`.
    Right,
}

/// `∂^α f(A)` by the spectral oracle.
pub fn partial_operator(a: &CommutingTuple, f: &dyn SmoothFunction, alpha: &MultiIndex) -> Result<Operator> {
    a.spectral_apply(|x| Ok(f.partial(x, alpha)?.into()))
}

fn check_pair(a: &CommutingTuple, b: &Operator, f: &dyn SmoothFunction) -> Result<()> {
    if b.nrows() != a.dim() || b.ncols() != a.dim() {
        return Err(Error::Precondition(format!(
            "B is {}×{}, A acts on dimension {}",
            b.nrows(),
            b.ncols(),
            a.dim()
        )));
    }
    if f.nu() != a.nu() {
        return Err(Error::Precondition("function and tuple dimensions differ".into()));
    }
    Ok(())
}

/// Degree-`k` parts of the expansion for `k = 1..=n`.
pub fn taylor_terms_by_degree(
    a: &CommutingTuple,
    b: &Operator,
    f: &dyn SmoothFunction,
    n: u32,
    side: Side,
) -> Result<Vec<Operator>> {
    check_pair(a, b, f)?;
    if f.max_order() < n {
        return Err(Error::Precondition(format!(
            "{} provides derivatives to order {}, need {n}",
            f.name(),
            f.max_order()
        )));
    }
    let d = a.dim();
    (1..=n)
        .map(|k| {
            let mut acc = Operator::zeros(d, d);
            for alpha in enumerate_degree(a.nu(), k) {
                let c = 1.0 / alpha.factorial_f64();
                let df = partial_operator(a, f, &alpha)?;
                let ad = iterated_commutator(a, b, &alpha);
                match side {
                    Side::Left => acc += df * ad * Complex64::from(c),
                    Side::Right => {
                        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                        acc += ad * df * Complex64::from(sign * c);
                    }
                }
            }
            Ok(acc)
        })
        .collect()
}

/// `Σ_{1≤|α|≤n} ∂^α f(A) ad_A^α(B)/α!` (or its right-sided form).
pub fn taylor_terms(a: &CommutingTuple, b: &Operator, f: &dyn SmoothFunction, n: u32, side: Side) -> Result<Operator> {
    let d = a.dim();
    Ok(taylor_terms_by_degree(a, b, f, n, side)?
        .into_iter()
        .fold(Operator::zeros(d, d), |acc, t| acc + t))
}

/// `[B, f(A)] − taylor_terms`.
pub fn remainder_direct(a: &CommutingTuple, b: &Operator, f: &dyn SmoothFunction, n: u32, side: Side) -> Result<Operator> {
    let fa = a.spectral_apply(|x| Ok(f.value(x)?.into()))?;
    Ok(commutator(b, &fa) - taylor_terms(a, b, f, n, side)?)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;


    use super::*;
    use crate::aae::{BracketPower, Gaussian, Polynomial};
    use crate::operator::{op_norm, random_hermitian, random_operator};

    #[test]
    fn identity_b_has_no_terms() {
        let a = CommutingTuple::random(1, 2, 5, 1.0).unwrap();
        let f = BracketPower::new(2, -2.0);
        let b = Operator::identity(5, 5);
        assert!(op_norm(&taylor_terms(&a, &b, &f, 3, Side::Left).unwrap()) < 1e-14);
    }

    #[test]
    fn first_order_is_derivative_times_commutator() {
        let a = CommutingTuple::random(2, 1, 6, 1.0).unwrap();
        let b = random_operator(3, 6);
        let f = Gaussian {
            center: vec![0.2],
            width: 0.8,
            s: -4.0,
        };
        let expect = partial_operator(&a, &f, &MultiIndex::new(vec![1])).unwrap() * commutator(&b, a.component(0));
        let got = taylor_terms(&a, &b, &f, 1, Side::Left).unwrap();
        assert!(op_norm(&(got - expect)) < 1e-13);
    }

    #[test]
    fn sides_agree_at_first_order() {
        // f(x) = x: both sides reduce to [B, A]
        let a = CommutingTuple::diagonal(vec![vec![0.0], vec![1.0]]).unwrap();
        let mut b = Operator::zeros(2, 2);
        b[(0, 1)] = Complex64::new(1.0, 0.0);
        let f = Polynomial::coordinate(1, 0);
        let l = taylor_terms(&a, &b, &f, 1, Side::Left).unwrap();
        let r = taylor_terms(&a, &b, &f, 1, Side::Right).unwrap();
        // [B, A] has the single entry B_01 (x_1 − x_0) = 1
        assert_eq!(l[(0, 1)], Complex64::new(1.0, 0.0));
        assert!(op_norm(&(l - r)) < 1e-15);
    }

    #[test]
    fn polynomial_expansions_are_exact() {
        let a = CommutingTuple::random(4, 2, 5, 1.0).unwrap();
        let b = random_operator(5, 5);
        let f = Polynomial::new(
            2,
            vec![
                (MultiIndex::new(vec![2, 1]), 1.0),
                (MultiIndex::new(vec![0, 2]), -0.5),
            ],
        )
        .unwrap();
        for side in [Side::Left, Side::Right] {
            let r = remainder_direct(&a, &b, &f, 3, side).unwrap();
            assert!(op_norm(&r) < 1e-12, "{side:?}: {}", op_norm(&r));
        }
    }

    #[test]
    fn commuting_b_and_scalars_have_zero_remainder() {
        let a = CommutingTuple::random(6, 2, 4, 1.0).unwrap();
        let f = BracketPower::new(2, -2.0);
        let b = a.spectral_apply_real(|x| x[0] * x[1]);
        assert!(op_norm(&remainder_direct(&a, &b, &f, 2, Side::Left).unwrap()) < 1e-13);
        let s = CommutingTuple::random(6, 2, 1, 1.0).unwrap();
        let b1 = random_operator(7, 1);
        assert!(op_norm(&remainder_direct(&s, &b1, &f, 2, Side::Left).unwrap()) < 1e-15);
    }

    #[test]
    fn remainder_is_linear_in_b() {
        let a = CommutingTuple::random(9, 1, 6, 1.5).unwrap();
        let b = random_operator(10, 6);
        let f = BracketPower::new(1, -2.0);
        let c = Complex64::new(-1.5, 0.25);
        let r1 = remainder_direct(&a, &(&b * c), &f, 2, Side::Left).unwrap();
        let r2 = remainder_direct(&a, &b, &f, 2, Side::Left).unwrap() * c;
        assert!(op_norm(&(&r1 - &r2)) <= 1e-10 * op_norm(&r2));
    }

    #[test]
    fn right_side_is_adjoint_of_left_with_negated_b() {
        let f: Arc<dyn SmoothFunction> = Arc::new(BracketPower::shifted(vec![0.3, -0.2], -2.0));
        for seed in 0..4 {
            let a = CommutingTuple::random(seed, 2, 5, 1.2).unwrap();
            let b = random_hermitian(seed + 100, 5);
            let left = remainder_direct(&a, &b, f.as_ref(), 2, Side::Left).unwrap();
            let right = remainder_direct(&a, &(-&b), f.as_ref(), 2, Side::Right).unwrap();
            assert!(op_norm(&(right - left.adjoint())) < 1e-9);
        }
    }
}
