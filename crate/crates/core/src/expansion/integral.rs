//! `R_{λ,n}(A, B) = C_ν Σ_ℓ ∫ ∂̄_ℓ f̃(z) R_{ℓ,n}(A, B; z) dz` by quadrature.
//!
//! In the eigenbasis of `A` every kernel term `L(A) ad^γ(B) R(A)` has entries
//! `L(x_p) B̃_pq Δ^γ_pq R(x_q)` with `Δ^γ_pq = Π_j (x_qj − x_pj)^{γ_j}`, so
//!
//! ```text
//!     R̃_pq = Σ_γ B̃_pq Δ^γ_pq Φ^γ_pq,   Φ^γ_pq = C_ν Σ_ℓ ∫ ∂̄_ℓ f̃ Σ_t L_t(x_p, z) R_t(x_q, z) dz
//! ```
//!
//! and the weights `Φ^γ` do not depend on `B`.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::kernel::{kernel_remainder_terms, simplify, KernelTerm};
use crate::aae::AlmostAnalytic;
use crate::error::{Error, Result};
use crate::hs::{check_integrable, hs_constant, Estimated};
use crate::multiindex::MultiIndex;
use crate::operator::{op_norm, CommutingTuple, Operator};
use crate::quadrature::{integrate, NodeContext, NodeSink, QuadStats, QuadratureSpec};
use crate::symdiff::{CompiledTermSum, PowerTable, TermSum};

#[derive(Clone, Debug)]
struct Group {
    gamma: usize,
    right: usize,
    /// `(ℓ, left)` pairs
    members: Vec<(usize, usize)>,
}

/// Kernel terms for every axis `ℓ`, compiled and grouped by `(γ, right)`.
#[derive(Clone, Debug)]
pub struct KernelPlan {
    nu: usize,
    gammas: Vec<MultiIndex>,
    lefts: Vec<CompiledTermSum>,
    rights: Vec<CompiledTermSum>,
    groups: Vec<Group>,
    max_gamma: u32,
    max_eta: u32,
    max_m: u32,
}

impl KernelPlan {
    /// Plan for `R_{ℓ,n}`, `ℓ = 0..ν`.
    pub fn remainder(nu: usize, n: u32) -> Result<Self> {
        let per_axis = (0..nu)
            .map(|l| kernel_remainder_terms(nu, l, n))
            .collect::<Result<Vec<_>>>()?;
        Self::from_terms(nu, &per_axis)
    }

    /// Plan for arbitrary kernel terms, `per_axis[ℓ]` integrated against `∂̄_ℓ f̃`.
    pub fn from_terms(nu: usize, per_axis: &[Vec<KernelTerm>]) -> Result<Self> {
        if per_axis.len() != nu {
            return Err(Error::Precondition(format!("need terms for {nu} axes, got {}", per_axis.len())));
        }
        let mut gammas: BTreeMap<MultiIndex, usize> = BTreeMap::new();
        let mut lefts: BTreeMap<TermSum, usize> = BTreeMap::new();
        let mut rights: BTreeMap<TermSum, usize> = BTreeMap::new();
        let mut groups: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
        let intern = |map: &mut BTreeMap<TermSum, usize>, s: &TermSum| -> usize {
            let next = map.len();
            *map.entry(s.clone()).or_insert(next)
        };
        for (l, terms) in per_axis.iter().enumerate() {
            for t in simplify(terms) {
                let next = gammas.len();
                let g = *gammas.entry(t.ad.clone()).or_insert(next);
                let left = intern(&mut lefts, &t.left);
                let right = intern(&mut rights, &t.right);
                groups.entry((g, right)).or_default().push((l, left));
            }
        }
        let order = |map: BTreeMap<TermSum, usize>| -> Vec<CompiledTermSum> {
            let mut v: Vec<(usize, TermSum)> = map.into_iter().map(|(s, i)| (i, s)).collect();
            v.sort_by_key(|p| p.0);
            v.into_iter().map(|(_, s)| s.compile()).collect()
        };
        let mut gamma_list: Vec<(usize, MultiIndex)> = gammas.into_iter().map(|(g, i)| (i, g)).collect();
        gamma_list.sort_by_key(|p| p.0);
        let lefts = order(lefts);
        let rights = order(rights);
        let all = lefts.iter().chain(&rights);
        let max_gamma = all.clone().map(|c| c.max_gamma).max().unwrap_or(0);
        let max_eta = all.clone().map(|c| c.max_eta).max().unwrap_or(0);
        let max_m = all.map(|c| c.max_m).max().unwrap_or(0);
        Ok(KernelPlan {
            nu,
            gammas: gamma_list.into_iter().map(|p| p.1).collect(),
            lefts,
            rights,
            groups: groups
                .into_iter()
                .map(|((gamma, right), members)| Group { gamma, right, members })
                .collect(),
            max_gamma,
            max_eta,
            max_m,
        })
    }

    pub fn gammas(&self) -> &[MultiIndex] {
        &self.gammas
    }

    /// Number of rank-one updates per node and extension.
    pub fn group_count(&self) -> usize {
        self.groups.len()
    }
}

struct KernelSink {
    plan: Arc<KernelPlan>,
    points: Arc<Vec<Vec<f64>>>,
    n_ext: usize,
    /// `[e][group][p·d + q]`
    acc: Vec<Complex64>,
    z: Vec<Complex64>,
    lvals: Vec<Complex64>,
    rvals: Vec<Complex64>,
    column: Vec<Complex64>,
    table: PowerTable,
}

impl KernelSink {
    fn new(plan: Arc<KernelPlan>, points: Arc<Vec<Vec<f64>>>, n_ext: usize) -> Self {
        let d = points.len();
        let g = plan.groups.len();
        KernelSink {
            acc: vec![Complex64::new(0.0, 0.0); n_ext * g * d * d],
            z: vec![Complex64::new(0.0, 0.0); plan.nu],
            lvals: vec![Complex64::new(0.0, 0.0); plan.lefts.len() * d],
            rvals: vec![Complex64::new(0.0, 0.0); plan.rights.len() * d],
            column: vec![Complex64::new(0.0, 0.0); d],
            table: PowerTable::empty(plan.nu, plan.max_gamma, plan.max_eta, plan.max_m),
            plan,
            points,
            n_ext,
        }
    }
}

impl NodeSink for KernelSink {
    fn visit(&mut self, node: &NodeContext<'_>) {
        let plan = &*self.plan;
        let nu = plan.nu;
        let d = self.points.len();
        for j in 0..nu {
            self.z[j] = Complex64::new(node.u[j], node.v[j]);
        }
        for (p, x) in self.points.iter().enumerate() {
            self.table
                .fill(x, &self.z)
                .expect("nodes never lie on the real subspace");
            for (i, c) in plan.lefts.iter().enumerate() {
                self.lvals[i * d + p] = c.evaluate(&self.table);
            }
            for (i, c) in plan.rights.iter().enumerate() {
                self.rvals[i * d + p] = c.evaluate(&self.table);
            }
        }
        let n_groups = plan.groups.len();
        for e in 0..self.n_ext {
            let dbar = &node.dbar[e * nu..(e + 1) * nu];
            for (gi, grp) in plan.groups.iter().enumerate() {
                self.column.fill(Complex64::new(0.0, 0.0));
                for &(l, left) in &grp.members {
                    let c = dbar[l] * node.weight;
                    for p in 0..d {
                        self.column[p] += c * self.lvals[left * d + p];
                    }
                }
                let base = (e * n_groups + gi) * d * d;
                let right = &self.rvals[grp.right * d..(grp.right + 1) * d];
                for p in 0..d {
                    let a = self.column[p];
                    let row = &mut self.acc[base + p * d..base + (p + 1) * d];
                    for (slot, r) in row.iter_mut().zip(right) {
                        *slot += a * r;
                    }
                }
            }
        }
    }

    fn merge(&mut self, later: Self) {
        for (a, b) in self.acc.iter_mut().zip(later.acc) {
            *a += b;
        }
    }
}

/// `Φ^γ` for one extension; the remainder for any `B` follows by [`apply`](Self::apply).
#[derive(Clone, Debug)]
pub struct RemainderWeights {
    pub gammas: Vec<MultiIndex>,
    pub phi: Vec<DMatrix<f64>>,
    pub stats: QuadStats,
}

impl RemainderWeights {
    /// `U (Σ_γ B̃ ∘ Δ^γ ∘ Φ^γ) U*`.
    pub fn apply(&self, a: &CommutingTuple, b: &Operator) -> Result<Operator> {
        let d = a.dim();
        if b.nrows() != d || b.ncols() != d {
            return Err(Error::Precondition("B and A dimensions differ".into()));
        }
        let bt = a.to_eigenbasis(b);
        let x = a.spectrum();
        let mut out = Operator::zeros(d, d);
        for (gamma, phi) in self.gammas.iter().zip(&self.phi) {
            for p in 0..d {
                for q in 0..d {
                    let mut delta = 1.0;
                    for (j, &k) in gamma.entries().iter().enumerate() {
                        delta *= (x[q][j] - x[p][j]).powi(k as i32);
                    }
                    out[(p, q)] += bt[(p, q)] * (delta * phi[(p, q)]);
                }
            }
        }
        Ok(a.from_eigenbasis(&out))
    }
}

/// Integrates a kernel plan against each extension.
pub fn integrate_plan(
    a: &CommutingTuple,
    plan: &Arc<KernelPlan>,
    exts: &[&AlmostAnalytic],
    quad: &QuadratureSpec,
) -> Result<Vec<RemainderWeights>> {
    if a.nu() > 3 {
        return Err(Error::Precondition("quadrature is limited to nu ≤ 3".into()));
    }
    if plan.nu != a.nu() {
        return Err(Error::Precondition("plan and tuple dimensions differ".into()));
    }
    for e in exts {
        check_integrable(e)?;
        if e.nu() != a.nu() {
            return Err(Error::Precondition("extension and tuple dimensions differ".into()));
        }
    }
    let d = a.dim();
    let points = Arc::new(a.spectrum().to_vec());
    let (sink, stats) = integrate(exts, a.spectrum(), quad, || {
        KernelSink::new(plan.clone(), points.clone(), exts.len())
    })?;
    let c = hs_constant(a.nu());
    let n_groups = plan.groups.len();
    Ok((0..exts.len())
        .map(|e| {
            let mut phi = vec![DMatrix::<f64>::zeros(d, d); plan.gammas.len()];
            for (gi, grp) in plan.groups.iter().enumerate() {
                let base = (e * n_groups + gi) * d * d;
                let target = &mut phi[grp.gamma];
                for p in 0..d {
                    for q in 0..d {
                        // conjugate-symmetric integrand: the integral is the real part
                        target[(p, q)] += c * sink.acc[base + p * d + q].re;
                    }
                }
            }
            RemainderWeights {
                gammas: plan.gammas.clone(),
                phi,
                stats,
            }
        })
        .collect())
}

/// `R_{λ,n}(A, B)` for several extensions sharing one node set.
pub fn remainder_integral_batch(
    a: &CommutingTuple,
    b: &Operator,
    exts: &[&AlmostAnalytic],
    n: u32,
    quad: &QuadratureSpec,
) -> Result<Vec<Operator>> {
    let plan = Arc::new(KernelPlan::remainder(a.nu(), n)?);
    integrate_plan(a, &plan, exts, quad)?
        .iter()
        .map(|w| w.apply(a, b))
        .collect()
}

pub fn remainder_integral(
    a: &CommutingTuple,
    b: &Operator,
    ext: &AlmostAnalytic,
    n: u32,
    quad: &QuadratureSpec,
) -> Result<Operator> {
    Ok(remainder_integral_batch(a, b, &[ext], n, quad)?.remove(0))
}

/// Results at `quad` and at one refinement level up, with their distance as
/// the error estimate.
pub fn remainder_integral_with_estimate(
    a: &CommutingTuple,
    b: &Operator,
    exts: &[&AlmostAnalytic],
    n: u32,
    quad: &QuadratureSpec,
) -> Result<Vec<Estimated<Operator>>> {
    let base = remainder_integral_batch(a, b, exts, n, quad)?;
    let refined = remainder_integral_batch(a, b, exts, n, &quad.refined())?;
    Ok(base
        .into_iter()
        .zip(refined)
        .map(|(result, refined)| {
            let estimate = op_norm(&(&result - &refined));
            Estimated {
                result,
                refined,
                estimate,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::aae::{build_extension, BracketPower, SmoothFunction};
    use crate::expansion::kernel::{evaluate_terms, kernel_symbol};
    use crate::expansion::{remainder_direct, Side};
    use crate::multiindex::enumerate_degree_range;
    use crate::operator::{random_operator, relative_residual};

    #[test]
    fn eigenbasis_route_matches_matrix_route_pointwise() {
        // a one-node "integral": compare Φ-assembly with the matrix evaluation
        let nu = 2;
        let a = CommutingTuple::random(5, nu, 4, 1.2).unwrap();
        let b = random_operator(6, 4);
        let z = vec![Complex64::new(0.2, 0.6), Complex64::new(-0.4, -0.9)];
        let plan = Arc::new(KernelPlan::remainder(nu, 2).unwrap());
        let points = Arc::new(a.spectrum().to_vec());
        let mut sink = KernelSink::new(plan.clone(), points, 1);
        let dbar = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let u = [z[0].re, z[1].re];
        let v = [z[0].im, z[1].im];
        sink.visit(&NodeContext {
            u: &u,
            v: &v,
            weight: 1.0,
            dbar: &dbar,
        });
        let d = a.dim();
        let bt = a.to_eigenbasis(&b);
        let mut got = Operator::zeros(d, d);
        for (gi, grp) in plan.groups.iter().enumerate() {
            let gamma = &plan.gammas[grp.gamma];
            for p in 0..d {
                for q in 0..d {
                    let x = a.spectrum();
                    let delta: f64 = (0..nu).map(|j| (x[q][j] - x[p][j]).powi(gamma[j] as i32)).product();
                    got[(p, q)] += bt[(p, q)] * delta * sink.acc[gi * d * d + p * d + q];
                }
            }
        }
        let got = a.from_eigenbasis(&got);
        let expect = evaluate_terms(&a, &b, &z, &kernel_remainder_terms(nu, 0, 2).unwrap()).unwrap();
        assert!(relative_residual(&got, &expect, op_norm(&expect)) < 1e-12);
    }

    #[test]
    fn integral_reproduces_derivatives() {
        // B = I, ad^0: Φ-integral of ∂^α K_ℓ gives ∂^α f(A)
        let nu = 1;
        let f: Arc<dyn SmoothFunction> = Arc::new(BracketPower::new(nu, -2.0));
        let ext = build_extension(f.clone(), 5).unwrap();
        let a = CommutingTuple::random(2, nu, 5, 1.5).unwrap();
        let quad = QuadratureSpec::default_for(nu);
        for alpha in enumerate_degree_range(nu, 0, 2) {
            let terms = vec![vec![KernelTerm {
                left: kernel_symbol(nu, 0).derivative(&alpha),
                ad: MultiIndex::zero(nu),
                right: TermSum::one(nu),
            }]];
            let plan = Arc::new(KernelPlan::from_terms(nu, &terms).unwrap());
            let w = integrate_plan(&a, &plan, &[&ext], &quad).unwrap().remove(0);
            let got = w.apply(&a, &Operator::identity(5, 5)).unwrap();
            let expect = crate::expansion::partial_operator(&a, f.as_ref(), &alpha).unwrap();
            assert!(op_norm(&(got - &expect)) < 1e-4 * op_norm(&expect).max(1.0), "{alpha:?}");
        }
    }

    #[test]
    fn agrees_with_direct_route_in_one_dimension() {
        let f: Arc<dyn SmoothFunction> = Arc::new(BracketPower::new(1, -2.0));
        let ext = build_extension(f.clone(), 4).unwrap();
        let a = CommutingTuple::random(3, 1, 5, 1.5).unwrap();
        let b = random_operator(4, 5);
        let quad = QuadratureSpec::default_for(1);
        let est = remainder_integral_with_estimate(&a, &b, &[&ext], 1, &quad).unwrap().remove(0);
        let direct = remainder_direct(&a, &b, f.as_ref(), 1, Side::Left).unwrap();
        let err = op_norm(&(&est.result - &direct));
        assert!(err <= 3.0 * est.estimate + 1e-12, "err {err:e}, estimate {:e}", est.estimate);
        assert!(err < 1e-4, "{err:e}");
    }

    #[test]
    fn linear_in_b_and_zero_for_commuting_b() {
        let f: Arc<dyn SmoothFunction> = Arc::new(BracketPower::new(1, -2.0));
        let ext = build_extension(f, 4).unwrap();
        let a = CommutingTuple::random(7, 1, 4, 1.0).unwrap();
        let b = random_operator(8, 4);
        let mut quad = QuadratureSpec::default_for(1);
        quad.u_panels = 4;
        let plan = Arc::new(KernelPlan::remainder(1, 1).unwrap());
        let w = integrate_plan(&a, &plan, &[&ext], &quad).unwrap().remove(0);
        let r1 = w.apply(&a, &b).unwrap();
        let r2 = w.apply(&a, &(&b * Complex64::new(2.0, 0.0))).unwrap();
        assert!(op_norm(&(&r2 - &r1 * Complex64::new(2.0, 0.0))) <= 1e-10 * op_norm(&r1));
        let diag = a.spectral_apply_real(|x| x[0].sin());
        assert!(op_norm(&w.apply(&a, &diag).unwrap()) < 1e-14);
    }
}
