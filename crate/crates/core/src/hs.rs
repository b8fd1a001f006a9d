//! `f(A) = C_ν Σ_ℓ ∫ ∂̄_ℓ f̃(z) (A_ℓ − z̄_ℓ)|A − z|^{−2ν} dz` by quadrature.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::aae::{build_extension, cutoff_family, default_cutoff, AlmostAnalytic, SmoothFunction};
use crate::error::{Error, Result};
use crate::operator::{op_norm, CommutingTuple, Operator};
use crate::quadrature::{integrate, NodeContext, NodeSink, QuadStats, QuadratureSpec};

/// `C_ν = (ν − 1)!/π^ν`.
pub fn hs_constant(nu: usize) -> f64 {
    assert!(nu >= 1, "nu must be positive");
    let fact: f64 = (1..nu).map(|k| k as f64).product();
    fact / PI.powi(nu as i32)
}

/// Integral over the quadrature nodes for several extensions at once,
/// without the constant `C_ν`.
struct SpectralSink {
    nu: usize,
    points: Arc<Vec<Vec<f64>>>,
    n_ext: usize,
    acc: Vec<Complex64>,
    abs_mass: Vec<f64>,
}

impl NodeSink for SpectralSink {
    fn visit(&mut self, node: &NodeContext<'_>) {
        let nu = self.nu;
        let v2: f64 = node.v.iter().map(|x| x * x).sum();
        let mut kernel = [Complex64::new(0.0, 0.0); 3];
        for (p, x) in self.points.iter().enumerate() {
            let mut q = v2;
            for j in 0..nu {
                let d = x[j] - node.u[j];
                q += d * d;
            }
            let inv = q.powi(-(nu as i32));
            let mut knorm = 0.0;
            for l in 0..nu {
                // x_ℓ − z̄_ℓ = (x_ℓ − u_ℓ) + i v_ℓ
                kernel[l] = Complex64::new(x[l] - node.u[l], node.v[l]) * inv;
                knorm += kernel[l].norm_sqr();
            }
            let knorm = knorm.sqrt();
            for e in 0..self.n_ext {
                let mut s = Complex64::new(0.0, 0.0);
                let mut dn = 0.0;
                for l in 0..nu {
                    let d = node.dbar[e * nu + l];
                    s += d * kernel[l];
                    dn += d.norm_sqr();
                }
                let idx = e * self.points.len() + p;
                self.acc[idx] += s * node.weight;
                self.abs_mass[idx] += node.weight * dn.sqrt() * knorm;
            }
        }
    }

    fn merge(&mut self, later: Self) {
        for (a, b) in self.acc.iter_mut().zip(later.acc) {
            *a += b;
        }
        for (a, b) in self.abs_mass.iter_mut().zip(later.abs_mass) {
            *a += b;
        }
    }
}

/// Quadrature result for one function.
#[derive(Clone, Debug)]
pub struct HsResult {
    pub matrix: Operator,
    /// Values at the joint eigenvalues, including `C_ν`.
    pub spectral_values: Vec<Complex64>,
    /// `C_ν Σ_nodes w |∂̄f̃| |kernel|`, maximized over eigenvalues.
    pub abs_mass: f64,
    pub stats: QuadStats,
}

pub(crate) fn check_integrable(ext: &AlmostAnalytic) -> Result<()> {
    if ext.decay() < 0.0 || ext.base().support_radius().is_some() {
        Ok(())
    } else {
        Err(Error::Hypothesis(format!(
            "{} has s = {} ≥ 0 and no compact support; use the cutoff route",
            ext.base().name(),
            ext.decay()
        )))
    }
}

/// `f(A)` for several extensions sharing one node set.
pub fn hs_apply_batch(a: &CommutingTuple, exts: &[&AlmostAnalytic], quad: &QuadratureSpec) -> Result<Vec<HsResult>> {
    if a.nu() > 3 {
        return Err(Error::Precondition("quadrature is limited to nu ≤ 3".into()));
    }
    for e in exts {
        check_integrable(e)?;
        if e.nu() != a.nu() {
            return Err(Error::Precondition("extension and tuple dimensions differ".into()));
        }
    }
    let d = a.dim();
    let points = Arc::new(a.spectrum().to_vec());
    let (sink, stats) = integrate(exts, a.spectrum(), quad, || SpectralSink {
        nu: a.nu(),
        points: points.clone(),
        n_ext: exts.len(),
        acc: vec![Complex64::new(0.0, 0.0); exts.len() * d],
        abs_mass: vec![0.0; exts.len() * d],
    })?;
    let c = hs_constant(a.nu());
    Ok((0..exts.len())
        .map(|e| {
            let values: Vec<Complex64> = sink.acc[e * d..(e + 1) * d]
                .iter()
                .map(|x| Complex64::new(x.re * c, 0.0))
                .collect();
            let mass = sink.abs_mass[e * d..(e + 1) * d].iter().copied().fold(0.0, f64::max) * c;
            HsResult {
                matrix: a.from_diagonal_values(&values),
                spectral_values: values,
                abs_mass: mass,
                stats,
            }
        })
        .collect())
}

pub fn hs_apply(a: &CommutingTuple, ext: &AlmostAnalytic, quad: &QuadratureSpec) -> Result<HsResult> {
    Ok(hs_apply_batch(a, &[ext], quad)?.remove(0))
}

/// `f(A)` by the spectral oracle.
pub fn spectral_oracle(a: &CommutingTuple, f: &dyn SmoothFunction) -> Result<Operator> {
    a.spectral_apply(|x| Ok(Complex64::new(f.value(x)?, 0.0)))
}

/// Result at `quad`, result at one refinement level up, and their distance.
#[derive(Clone, Debug)]
pub struct Estimated<T> {
    pub result: T,
    pub refined: T,
    pub estimate: f64,
}

pub fn hs_apply_with_estimate(
    a: &CommutingTuple,
    ext: &AlmostAnalytic,
    quad: &QuadratureSpec,
) -> Result<Estimated<HsResult>> {
    let result = hs_apply(a, ext, quad)?;
    let refined = hs_apply(a, ext, &quad.refined())?;
    let estimate = op_norm(&(&result.matrix - &refined.matrix));
    Ok(Estimated {
        result,
        refined,
        estimate,
    })
}

/// `‖result(quad) − result(refined quad)‖`.
pub fn quad_error_estimate(a: &CommutingTuple, ext: &AlmostAnalytic, quad: &QuadratureSpec) -> Result<f64> {
    Ok(hs_apply_with_estimate(a, ext, quad)?.estimate)
}

#[derive(Clone, Debug, Serialize)]
pub struct Calibration {
    pub nu: usize,
    /// Real part of the least-squares scalar.
    pub constant: f64,
    pub imaginary_part: f64,
    /// `‖c·raw − f(A)‖_F` at the fitted `c`.
    pub residual: f64,
    pub formula: f64,
    pub relative_deviation: f64,
}

/// Fits `c` in `c·∫ ∂̄f̃ (A_ℓ − z̄_ℓ)|A − z|^{−2ν} dz ≈ f(A)` by least squares.
pub fn calibrate_constant(a: &CommutingTuple, ext: &AlmostAnalytic, quad: &QuadratureSpec) -> Result<Calibration> {
    let r = hs_apply(a, ext, quad)?;
    let formula = hs_constant(a.nu());
    let raw: Vec<Complex64> = r.spectral_values.iter().map(|x| x / formula).collect();
    let target = a
        .spectrum()
        .iter()
        .map(|x| ext.base().value(x))
        .collect::<Result<Vec<f64>>>()?;
    let rr: f64 = raw.iter().map(|x| x.norm_sqr()).sum();
    let tn: f64 = target.iter().map(|x| x * x).sum();
    if rr <= 1e-24 * tn.max(1e-300) || rr == 0.0 {
        return Err(Error::IllConditioned("raw integral is numerically zero".into()));
    }
    let c: Complex64 = raw.iter().zip(&target).map(|(r, t)| r.conj() * *t).sum::<Complex64>() / rr;
    // the shared basis is unitary, so Frobenius norms reduce to the spectral values
    let residual = raw
        .iter()
        .zip(&target)
        .map(|(r, t)| (c * r - t).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(Calibration {
        nu: a.nu(),
        constant: c.re,
        imaginary_part: c.im,
        residual,
        formula,
        relative_deviation: (c.re - formula).abs() / formula,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CutoffStep {
    pub k: f64,
    /// `‖f_k(A) − f_{k'}(A)‖` against the previous `k`.
    pub change: Option<f64>,
    pub oracle_error: f64,
}

#[derive(Clone, Debug)]
pub struct CutoffSeries {
    pub steps: Vec<CutoffStep>,
    pub last: Operator,
}

/// `f(A)` for `s ≥ 0` through `χ(x/k) f(x)` with increasing `k`.
pub fn hs_apply_cutoff(
    a: &CommutingTuple,
    f: Arc<dyn SmoothFunction>,
    ks: &[f64],
    n_trunc: u32,
    quad: &QuadratureSpec,
) -> Result<CutoffSeries> {
    if ks.is_empty() {
        return Err(Error::Precondition("need at least one cutoff scale".into()));
    }
    let oracle = spectral_oracle(a, f.as_ref())?;
    let chi = default_cutoff(a.nu());
    let mut steps = Vec::with_capacity(ks.len());
    let mut prev: Option<Operator> = None;
    for &k in ks {
        let fk = cutoff_family(f.clone(), chi.clone(), k)?;
        let ext = build_extension(fk, n_trunc)?;
        let m = hs_apply(a, &ext, quad)?.matrix;
        steps.push(CutoffStep {
            k,
            change: prev.as_ref().map(|p| op_norm(&(&m - p))),
            oracle_error: op_norm(&(&m - &oracle)),
        });
        prev = Some(m);
    }
    Ok(CutoffSeries {
        steps,
        last: prev.expect("nonempty"),
    })
}
