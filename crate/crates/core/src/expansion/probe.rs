//! Weighted remainder norms: growth of the kernel remainder as `Im z → 0`
//! and the ratio of `‖⟨A⟩^{t1} R_{λ,n} ⟨A⟩^{t2}‖` to the order-`(n+1)`
//! commutator norms.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::kernel::remainder_kernel;
use super::{remainder_direct, taylor_terms_by_degree, Side};
use crate::aae::FunctionFamily;
use crate::error::{Error, Result};
use crate::fit::loglog_slope;
use crate::multiindex::enumerate_degree;
use crate::operator::{iterated_commutator, op_norm, random_operator, CommutingTuple, Operator};

/// Commutator sums below this multiple of `‖B‖` count as vanishing.
pub const DEGENERATE_TOL: f64 = 1e-12;

/// Remainder norms allowed when the commutator sum vanishes.
pub const EXACT_EXPANSION_TOL: f64 = 1e-8;

/// Rejects `(n, t1, t2, s)` outside `0 ≤ t1 ≤ n+1`, `0 ≤ t2 ≤ 1`, `t1 + t2 + s < n + 1`.
pub fn check_hypotheses(n: u32, t1: f64, t2: f64, s: f64) -> Result<()> {
    let np1 = f64::from(n) + 1.0;
    if !(0.0..=np1).contains(&t1) {
        return Err(Error::Hypothesis(format!("t1 = {t1} must lie in [0, n+1] = [0, {np1}]")));
    }
    if !(0.0..=1.0).contains(&t2) {
        return Err(Error::Hypothesis(format!("t2 = {t2} must lie in [0, 1]")));
    }
    if t1 + t2 + s >= np1 {
        return Err(Error::Hypothesis(format!(
            "t1 + t2 + s = {} must be below n + 1 = {np1}",
            t1 + t2 + s
        )));
    }
    Ok(())
}

/// `Σ_{|α|=k} ‖ad_A^α(B)‖`.
pub fn commutator_sum(a: &CommutingTuple, b: &Operator, k: u32) -> f64 {
    enumerate_degree(a.nu(), k)
        .iter()
        .map(|alpha| op_norm(&iterated_commutator(a, b, alpha)))
        .sum()
}

fn weighted(a: &CommutingTuple, r: &Operator, t1: f64, t2: f64) -> f64 {
    op_norm(&(a.weight(t1).matrix * r * a.weight(t2).matrix))
}

/// Weighted kernel-remainder norms along `z = u0 + i v (1, …, 1)`.
#[derive(Clone, Debug, Serialize)]
pub struct HadamardProbe {
    pub l: usize,
    pub n: u32,
    pub t1: f64,
    pub t2: f64,
    pub u0: Vec<f64>,
    /// `(v, ‖⟨A⟩^{t1} R_{ℓ,n} ⟨A⟩^{t2}‖)`
    pub rows: Vec<(f64, f64)>,
    pub slope: Option<f64>,
    /// The order-`(n+1)` commutators vanish, so every norm is roundoff.
    pub degenerate: bool,
}

impl HadamardProbe {
    /// Lower limit `−(n + 2ν)` for the slope.
    pub fn limit(&self) -> f64 {
        -(f64::from(self.n) + 2.0 * self.u0.len() as f64)
    }

    /// CSV with columns `v,weighted_norm,fitted_slope`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("v,weighted_norm,fitted_slope\n");
        let slope = self.slope.map_or_else(|| "nan".to_string(), |x| format!("{x}"));
        for (v, r) in &self.rows {
            let _ = writeln!(s, "{v:e},{r:e},{slope}");
        }
        s
    }
}

#[allow(clippy::too_many_arguments)]
pub fn hadamard_probe(
    a: &CommutingTuple,
    b: &Operator,
    l: usize,
    n: u32,
    t1: f64,
    t2: f64,
    v_path: &[f64],
    u0: &[f64],
) -> Result<HadamardProbe> {
    if !(0.0..=f64::from(n) + 1.0).contains(&t1) || !(0.0..=1.0).contains(&t2) {
        return Err(Error::Hypothesis(format!(
            "weights t1 = {t1}, t2 = {t2} outside 0 ≤ t1 ≤ n+1, 0 ≤ t2 ≤ 1"
        )));
    }
    if u0.len() != a.nu() {
        return Err(Error::Precondition("u0 and tuple dimensions differ".into()));
    }
    if v_path.len() < 2 || v_path.iter().any(|v| !(*v > 0.0)) || v_path.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Precondition("v path must be decreasing positive reals".into()));
    }
    let degenerate = commutator_sum(a, b, n + 1) <= DEGENERATE_TOL * op_norm(b);
    let w1 = a.weight(t1).matrix;
    let w2 = a.weight(t2).matrix;
    let mut rows = Vec::with_capacity(v_path.len());
    for &v in v_path {
        let z: Vec<Complex64> = u0.iter().map(|&u| Complex64::new(u, v)).collect();
        let r = remainder_kernel(a, b, l, n, &z)?;
        rows.push((v, op_norm(&(&w1 * r * &w2))));
    }
    let slope = if degenerate { None } else { loglog_slope(&rows) };
    Ok(HadamardProbe {
        l,
        n,
        t1,
        t2,
        u0: u0.to_vec(),
        rows,
        slope,
        degenerate,
    })
}

/// One seeded `(A, B)` pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub seed: u64,
    pub d: usize,
    /// Spectrum drawn from `[−scale, scale]^ν`.
    #[serde(default = "default_scale")]
    pub scale: f64,
}

fn default_scale() -> f64 {
    2.0
}

impl Instance {
    pub fn new(seed: u64, d: usize) -> Self {
        Instance {
            seed,
            d,
            scale: default_scale(),
        }
    }

    pub fn build(&self, nu: usize) -> Result<(CommutingTuple, Operator)> {
        let a = CommutingTuple::random(self.seed, nu, self.d, self.scale)?;
        let b = random_operator(self.seed.wrapping_mul(0x9e37_79b9).wrapping_add(1), self.d);
        Ok((a, b))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Ratio {
    Finite(f64),
    /// All order-`(n+1)` commutators vanish.
    ExactExpansion,
}

/// Expansion diagnostics for one instance and one family member.
#[derive(Clone, Debug, Serialize)]
pub struct ExpansionReport {
    pub seed: u64,
    pub d: usize,
    pub member: f64,
    pub n: u32,
    pub t1: f64,
    pub t2: f64,
    pub s: f64,
    /// `‖Σ_{|α|=k} ∂^α f(A) ad^α(B)/α!‖` for `k = 1..=n`.
    pub term_norms: Vec<f64>,
    pub remainder_norm: f64,
    pub weighted_remainder_norm: f64,
    pub commutator_sum: f64,
    pub ratio: Ratio,
    /// Named identity residuals, where computed.
    pub residuals: Vec<(String, f64)>,
    /// Fitted decay exponents, where computed.
    pub exponents: Vec<(String, f64)>,
}

/// Remainder against the commutator bound for every family member.
pub fn expansion_reports(
    family: &FunctionFamily,
    n: u32,
    t1: f64,
    t2: f64,
    instance: &Instance,
) -> Result<Vec<ExpansionReport>> {
    let s = family.bounds.s;
    check_hypotheses(n, t1, t2, s)?;
    let nu = family
        .members
        .first()
        .ok_or_else(|| Error::Precondition("family has no members".into()))?
        .nu();
    let (a, b) = instance.build(nu)?;
    let csum = commutator_sum(&a, &b, n + 1);
    let degenerate = csum <= DEGENERATE_TOL * op_norm(&b);
    family
        .members
        .iter()
        .zip(&family.parameters)
        .map(|(f, &member)| {
            let terms = taylor_terms_by_degree(&a, &b, f.as_ref(), n, Side::Left)?;
            let r = remainder_direct(&a, &b, f.as_ref(), n, Side::Left)?;
            let wn = weighted(&a, &r, t1, t2);
            let ratio = if degenerate {
                Ratio::ExactExpansion
            } else {
                Ratio::Finite(wn / csum)
            };
            Ok(ExpansionReport {
                seed: instance.seed,
                d: instance.d,
                member,
                n,
                t1,
                t2,
                s,
                term_norms: terms.iter().map(op_norm).collect(),
                remainder_norm: op_norm(&r),
                weighted_remainder_norm: wn,
                commutator_sum: csum,
                ratio,
                residuals: Vec::new(),
                exponents: Vec::new(),
            })
        })
        .collect()
}

/// Aggregate of finite ratios at one dimension.
#[derive(Clone, Debug, Serialize)]
pub struct DimensionSummary {
    pub d: usize,
    pub instances: usize,
    pub max_ratio: f64,
    pub median_ratio: f64,
    pub exact_expansions: usize,
    /// Largest remainder among exact expansions (should be roundoff).
    pub exact_expansion_max_remainder: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundSummary {
    pub family: String,
    pub n: u32,
    pub t1: f64,
    pub t2: f64,
    pub s: f64,
    pub per_dimension: Vec<DimensionSummary>,
    /// `max_d max_ratio / min_d max_ratio`.
    pub spread: f64,
    pub all_finite: bool,
    pub reports: Vec<ExpansionReport>,
}

impl BoundSummary {
    /// Ratio spread below `factor` and every exact expansion within roundoff.
    pub fn stable_within(&self, factor: f64) -> bool {
        self.all_finite
            && self.spread < factor
            && self
                .per_dimension
                .iter()
                .all(|p| p.exact_expansion_max_remainder <= EXACT_EXPANSION_TOL)
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

/// Ratios over all instances and members, aggregated per dimension.
pub fn bound_experiment(
    family: &FunctionFamily,
    n: u32,
    t1: f64,
    t2: f64,
    instances: &[Instance],
) -> Result<BoundSummary> {
    check_hypotheses(n, t1, t2, family.bounds.s)?;
    let mut reports = Vec::new();
    for inst in instances {
        reports.extend(expansion_reports(family, n, t1, t2, inst)?);
    }
    let mut dims: Vec<usize> = instances.iter().map(|i| i.d).collect();
    dims.sort_unstable();
    dims.dedup();
    let per_dimension: Vec<DimensionSummary> = dims
        .iter()
        .map(|&d| {
            let at_d: Vec<&ExpansionReport> = reports.iter().filter(|r| r.d == d).collect();
            let finite: Vec<f64> = at_d
                .iter()
                .filter_map(|r| match r.ratio {
                    Ratio::Finite(x) => Some(x),
                    Ratio::ExactExpansion => None,
                })
                .collect();
            let exact: Vec<f64> = at_d
                .iter()
                .filter(|r| r.ratio == Ratio::ExactExpansion)
                .map(|r| r.remainder_norm)
                .collect();
            DimensionSummary {
                d,
                instances: instances.iter().filter(|i| i.d == d).count(),
                max_ratio: finite.iter().copied().fold(f64::NAN, f64::max),
                median_ratio: median(finite),
                exact_expansions: exact.len(),
                exact_expansion_max_remainder: exact.into_iter().fold(0.0, f64::max),
            }
        })
        .collect();
    let maxes: Vec<f64> = per_dimension.iter().map(|p| p.max_ratio).filter(|x| x.is_finite()).collect();
    let spread = if maxes.is_empty() {
        f64::NAN
    } else {
        maxes.iter().copied().fold(f64::MIN, f64::max) / maxes.iter().copied().fold(f64::MAX, f64::min)
    };
    let all_finite = reports.iter().all(|r| match r.ratio {
        Ratio::Finite(x) => x.is_finite(),
        Ratio::ExactExpansion => true,
    });
    Ok(BoundSummary {
        family: family.name.clone(),
        n,
        t1,
        t2,
        s: family.bounds.s,
        per_dimension,
        spread,
        all_finite,
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aae::FamilySpec;
    use crate::fit::geometric_path;

    #[test]
    fn hypotheses_are_enforced() {
        assert!(check_hypotheses(2, 1.0, 1.0, -2.0).is_ok());
        assert!(matches!(check_hypotheses(1, 1.0, 0.5, 0.5), Err(Error::Hypothesis(_))));
        assert!(check_hypotheses(1, 2.5, 0.0, -3.0).is_err());
        assert!(check_hypotheses(1, 0.0, 1.5, -3.0).is_err());
    }

    #[test]
    fn probe_is_degenerate_for_commuting_b() {
        let a = CommutingTuple::random(1, 1, 4, 1.0).unwrap();
        let b = a.spectral_apply_real(|x| x[0] * x[0]);
        let p = hadamard_probe(&a, &b, 0, 1, 0.0, 0.0, &geometric_path(1.0, 0.01, 6), &[0.1]).unwrap();
        assert!(p.degenerate);
        assert!(p.slope.is_none());
        assert!(p.rows.iter().all(|r| r.1 < 1e-8));
    }

    #[test]
    fn kernel_remainder_decays_for_large_v() {
        let a = CommutingTuple::random(2, 1, 4, 1.0).unwrap();
        let b = random_operator(3, 4);
        let p = hadamard_probe(&a, &b, 0, 1, 0.0, 0.0, &[1e3, 1e2, 1e1], &[0.0]).unwrap();
        assert!(p.rows[0].1 < p.rows[1].1 && p.rows[1].1 < p.rows[2].1);
    }

    #[test]
    fn ratios_are_invariant_under_scaling_b() {
        let family = FamilySpec::ShiftedInverseBracket {
            lambdas: vec![-0.5, 0.5],
        }
        .build(1, 3, 1)
        .unwrap();
        let inst = Instance::new(4, 5);
        let (a, b) = inst.build(1).unwrap();
        let r1 = remainder_direct(&a, &b, family.members[0].as_ref(), 2, Side::Left).unwrap();
        let c = Complex64::new(3.0, -1.0);
        let r2 = remainder_direct(&a, &(&b * c), family.members[0].as_ref(), 2, Side::Left).unwrap();
        let q1 = weighted(&a, &r1, 1.0, 1.0) / commutator_sum(&a, &b, 3);
        let q2 = weighted(&a, &r2, 1.0, 1.0) / commutator_sum(&a, &(&b * c), 3);
        assert!((q1 - q2).abs() <= 1e-8 * q1);
    }

    #[test]
    fn bound_experiment_reports_finite_ratios() {
        let family = FamilySpec::ShiftedInverseBracket {
            lambdas: vec![0.0, 1.0],
        }
        .build(1, 3, 1)
        .unwrap();
        let inst: Vec<Instance> = (0..4).flat_map(|s| [Instance::new(s, 3), Instance::new(s, 6)]).collect();
        let summary = bound_experiment(&family, 2, 1.0, 1.0, &inst).unwrap();
        assert!(summary.all_finite);
        assert_eq!(summary.per_dimension.len(), 2);
        assert_eq!(summary.reports.len(), 16);
        assert!(summary.spread >= 1.0);
    }
}
