//! Almost analytic extensions built from Taylor data of `f` and a bump in
//! the imaginary directions:
//!
//! `f̃(u + iv) = Σ_{|α|≤N} (∂^α f(u)/α!) (iv)^α Π_j κ(λ_{|α|} v_j / ⟨u⟩)`.

pub mod bump;
pub mod functions;

use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use bump::Bump;
pub use functions::{
    builtin_families, check_bounds, cutoff_family, default_cutoff, estimate_constants, BoundCheck, BracketPower,
    Cutoff, DerivativeBounds, FamilyInfo, FamilySpec, FunctionFamily, Gaussian, LimitedOrder, MollifiedIndicator,
    Polynomial, SmoothFunction,
};

use crate::error::{Error, Result};
use crate::fit::{geometric_path, loglog_slope};
use crate::jet::JetLayout;
use crate::operator::japanese_bracket;

/// Seed used for sampling `C_α` when none is given.
pub const DEFAULT_CONSTANT_SEED: u64 = 0x00c0_ffee;

/// Largest supported truncation order `N`.
pub const MAX_TRUNCATION: u32 = 40;

/// Truncated almost analytic extension of a [`SmoothFunction`].
#[derive(Clone, Debug)]
pub struct AlmostAnalytic {
    base: Arc<dyn SmoothFunction>,
    order: u32,
    lambdas: Vec<f64>,
    bounds: DerivativeBounds,
    bump: Bump,
    layout: Arc<JetLayout>,
    // per axis ℓ, per position of |α| ≤ N: (position of α + δ_ℓ, α_ℓ + 1)
    shifted: Vec<Vec<(usize, f64)>>,
}

/// Taylor data of `f` at a real point `u`.
#[derive(Clone, Debug)]
pub struct BasePoint {
    pub u: Vec<f64>,
    pub rho: f64,
    coeffs: Vec<f64>,
}

/// Thresholds `λ_0 = C_0`, `λ_k = max(max_{|α|=k} C_α, λ_{k−1} + 1)`.
pub fn thresholds(bounds: &DerivativeBounds, n: u32) -> Vec<f64> {
    let c0 = bounds.max_at_degree(0);
    // the zero function has C_0 = 0; any positive λ_0 works for it
    let mut out = vec![if c0 > 0.0 { c0 } else { 1.0 }];
    for k in 1..=n {
        let prev = out[k as usize - 1];
        out.push(bounds.max_at_degree(k).max(prev + 1.0));
    }
    out
}

/// Default truncation order for expansion order `n` in dimension `nu`.
pub fn default_truncation(n: u32, nu: usize) -> u32 {
    n + 2 * nu as u32 + 1
}

/// Builds `f̃` with sampled constants `C_α`, `|α| ≤ n_trunc`.
pub fn build_extension(f: Arc<dyn SmoothFunction>, n_trunc: u32) -> Result<AlmostAnalytic> {
    check_order(&f, n_trunc)?;
    let bounds = estimate_constants(std::slice::from_ref(&f), n_trunc, DEFAULT_CONSTANT_SEED)?;
    build_extension_with_bounds(f, n_trunc, bounds)
}

/// Builds `f̃` from given constants (e.g. uniform over a family).
pub fn build_extension_with_bounds(
    f: Arc<dyn SmoothFunction>,
    n_trunc: u32,
    bounds: DerivativeBounds,
) -> Result<AlmostAnalytic> {
    check_order(&f, n_trunc)?;
    if bounds.order < n_trunc {
        return Err(Error::Precondition(format!(
            "constants known to order {}, need {n_trunc}",
            bounds.order
        )));
    }
    let nu = f.nu();
    let layout = JetLayout::shared(nu, n_trunc + 1);
    let top = layout.degree_range(n_trunc).end;
    let shifted = (0..nu)
        .map(|l| {
            layout.indices()[..top]
                .iter()
                .map(|a| {
                    let pos = layout.position(&a.bump(l)).expect("degree ≤ N+1");
                    (pos, f64::from(a[l] + 1))
                })
                .collect()
        })
        .collect();
    Ok(AlmostAnalytic {
        lambdas: thresholds(&bounds, n_trunc),
        base: f,
        order: n_trunc,
        bounds,
        bump: Bump,
        layout,
        shifted,
    })
}

fn check_order(f: &Arc<dyn SmoothFunction>, n_trunc: u32) -> Result<()> {
    if !(1..=MAX_TRUNCATION).contains(&n_trunc) {
        return Err(Error::Precondition(format!(
            "truncation order must lie in 1..={MAX_TRUNCATION}"
        )));
    }
    if f.max_order() < n_trunc + 1 {
        return Err(Error::Precondition(format!(
            "truncation order {n_trunc} needs derivatives of order {}, {} provides {}",
            n_trunc + 1,
            f.name(),
            f.max_order()
        )));
    }
    Ok(())
}

impl AlmostAnalytic {
    pub fn nu(&self) -> usize {
        self.base.nu()
    }

    pub fn truncation(&self) -> u32 {
        self.order
    }

    pub fn base(&self) -> &Arc<dyn SmoothFunction> {
        &self.base
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn bounds(&self) -> &DerivativeBounds {
        &self.bounds
    }

    pub fn bump(&self) -> Bump {
        self.bump
    }

    pub fn decay(&self) -> f64 {
        self.base.decay()
    }

    /// Half-width in each `v_j` of the support above `u`.
    pub fn v_radius(&self, rho: f64) -> f64 {
        Bump::SUPPORT * rho / self.lambdas[0]
    }

    pub fn base_point(&self, u: &[f64]) -> Result<BasePoint> {
        let jet = self.base.jet(u, self.order + 1)?;
        Ok(BasePoint {
            u: u.to_vec(),
            rho: japanese_bracket(u),
            coeffs: jet.into_coeffs(),
        })
    }

    /// `(iv)^α` for `|α| ≤ N`, grouped by degree via the layout.
    fn monomials(&self, v: &[f64]) -> Vec<Complex64> {
        let nu = self.nu();
        let n = self.order as usize;
        let mut pw = vec![vec![Complex64::new(1.0, 0.0); n + 1]; nu];
        for j in 0..nu {
            let iv = Complex64::new(0.0, v[j]);
            for k in 1..=n {
                pw[j][k] = pw[j][k - 1] * iv;
            }
        }
        let top = self.layout.degree_range(self.order).end;
        self.layout.indices()[..top]
            .iter()
            .map(|a| {
                a.entries()
                    .iter()
                    .enumerate()
                    .fold(Complex64::new(1.0, 0.0), |acc, (j, &e)| acc * pw[j][e as usize])
            })
            .collect()
    }

    /// `K_k = Π_j κ(λ_k v_j/ρ)` and `(∂_{u_ℓ} + i ∂_{v_ℓ}) K_k` for all ℓ.
    fn cutoffs(&self, bp: &BasePoint, v: &[f64]) -> (Vec<f64>, Vec<Vec<Complex64>>) {
        let nu = self.nu();
        let rho = bp.rho;
        let mut k_val = Vec::with_capacity(self.lambdas.len());
        let mut k_dbar = vec![Vec::with_capacity(self.lambdas.len()); nu];
        let mut a = vec![0.0; nu];
        let mut da = vec![0.0; nu];
        for &lam in &self.lambdas {
            for j in 0..nu {
                let (val, der) = self.bump.value_and_derivative(lam * v[j] / rho);
                a[j] = val;
                da[j] = der;
            }
            let prod_except = |skip: usize| -> f64 { (0..nu).filter(|&i| i != skip).map(|i| a[i]).product() };
            k_val.push(a.iter().product());
            // Σ_j κ'(·) v_j Π_{i≠j} κ(·)
            let s: f64 = (0..nu)
                .filter(|&j| da[j] != 0.0)
                .map(|j| da[j] * v[j] * prod_except(j))
                .sum();
            for l in 0..nu {
                let du = -lam * s * bp.u[l] / (rho * rho * rho);
                let dv = if da[l] != 0.0 { da[l] * lam / rho * prod_except(l) } else { 0.0 };
                k_dbar[l].push(Complex64::new(du, dv));
            }
        }
        (k_val, k_dbar)
    }

    /// `f̃(u + iv)`.
    pub fn value_at(&self, bp: &BasePoint, v: &[f64]) -> Complex64 {
        if self.outside_support(bp, v) {
            return Complex64::new(0.0, 0.0);
        }
        let mono = self.monomials(v);
        let (k_val, _) = self.cutoffs(bp, v);
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..=self.order {
            let mut vk = Complex64::new(0.0, 0.0);
            for p in self.layout.degree_range(k) {
                vk += mono[p] * bp.coeffs[p];
            }
            acc += vk * k_val[k as usize];
        }
        acc
    }

    fn outside_support(&self, bp: &BasePoint, v: &[f64]) -> bool {
        let r = self.v_radius(bp.rho);
        v.iter().any(|vj| vj.abs() >= r)
    }

    /// Writes `∂̄_ℓ f̃(u + iv)` for every axis ℓ into `out`.
    pub fn dbar_at(&self, bp: &BasePoint, v: &[f64], out: &mut [Complex64]) {
        let nu = self.nu();
        out[..nu].fill(Complex64::new(0.0, 0.0));
        if self.outside_support(bp, v) {
            return;
        }
        let n = self.order;
        let mono = self.monomials(v);
        let (k_val, k_dbar) = self.cutoffs(bp, v);
        let mut v_sum = Vec::with_capacity(n as usize + 1);
        for k in 0..=n {
            let mut acc = Complex64::new(0.0, 0.0);
            for p in self.layout.degree_range(k) {
                acc += mono[p] * bp.coeffs[p];
            }
            v_sum.push(acc);
        }
        for l in 0..nu {
            let shifted = &self.shifted[l];
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..=n {
                let mut w = Complex64::new(0.0, 0.0);
                for p in self.layout.degree_range(k) {
                    let (q, factor) = shifted[p];
                    w += mono[p] * (factor * bp.coeffs[q]);
                }
                let kk = k as usize;
                let diff = if k < n { k_val[kk] - k_val[kk + 1] } else { k_val[kk] };
                acc += w * diff + v_sum[kk] * k_dbar[l][kk];
            }
            out[l] = acc * 0.5;
        }
    }

    /// `∂̄_ℓ f̃` for every ℓ at the node held by `basis`.
    pub fn dbar_with(&self, bp: &BasePoint, basis: &NodeBasis, out: &mut [Complex64]) {
        let nu = self.nu();
        let n = self.order as usize;
        let stride = n + 1;
        let mut v_sum = [Complex64::new(0.0, 0.0); MAX_TRUNCATION as usize + 1];
        for k in 0..=n {
            let mut acc = Complex64::new(0.0, 0.0);
            for p in self.layout.degree_range(k as u32) {
                acc += basis.mono[p] * bp.coeffs[p];
            }
            v_sum[k] = acc;
        }
        for l in 0..nu {
            let shifted = &self.shifted[l];
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..=n {
                let mut w = Complex64::new(0.0, 0.0);
                for p in self.layout.degree_range(k as u32) {
                    let (q, factor) = shifted[p];
                    w += basis.mono[p] * (factor * bp.coeffs[q]);
                }
                let diff = if k < n { basis.k_val[k] - basis.k_val[k + 1] } else { basis.k_val[k] };
                acc += w * diff + v_sum[k] * basis.k_dbar[l * stride + k];
            }
            out[l] = acc * 0.5;
        }
    }

    /// `f̃(z)`.
    pub fn value(&self, z: &[Complex64]) -> Result<Complex64> {
        let (u, v) = split(z, self.nu())?;
        Ok(self.value_at(&self.base_point(&u)?, &v))
    }

    /// `∂̄_ℓ f̃(z)`, `∂̄_ℓ = ½(∂_{u_ℓ} + i ∂_{v_ℓ})`.
    pub fn dbar(&self, l: usize, z: &[Complex64]) -> Result<Complex64> {
        if l >= self.nu() {
            return Err(Error::Precondition(format!("axis {l} out of range")));
        }
        let (u, v) = split(z, self.nu())?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.nu()];
        self.dbar_at(&self.base_point(&u)?, &v, &mut out);
        Ok(out[l])
    }

    /// `|∂̄ f̃(z)|` (Euclidean over axes).
    pub fn dbar_norm(&self, bp: &BasePoint, v: &[f64]) -> f64 {
        let mut out = vec![Complex64::new(0.0, 0.0); self.nu()];
        self.dbar_at(bp, v, &mut out);
        out.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Cutoff values `κ(λ_k t_i)` and `κ'(λ_k t_i)` on a rule `v = ⟨u⟩·t`,
/// shared by every `u` and by every extension with the same thresholds.
#[derive(Clone, Debug)]
pub struct CutoffTable {
    nodes: Vec<f64>,
    lambdas: Vec<f64>,
    kappa: Vec<f64>,
    dkappa: Vec<f64>,
}

impl CutoffTable {
    pub fn new(bump: Bump, lambdas: &[f64], unit_nodes: &[f64]) -> Self {
        let m = unit_nodes.len();
        let mut kappa = Vec::with_capacity(lambdas.len() * m);
        let mut dkappa = Vec::with_capacity(lambdas.len() * m);
        for &lam in lambdas {
            for &t in unit_nodes {
                let (a, b) = bump.value_and_derivative(lam * t);
                kappa.push(a);
                dkappa.push(b);
            }
        }
        CutoffTable {
            nodes: unit_nodes.to_vec(),
            lambdas: lambdas.to_vec(),
            kappa,
            dkappa,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Monomials `(iv)^α` and cutoff factors `K_k`, `(∂_{u_ℓ} + i∂_{v_ℓ})K_k` at one
/// tensor node, reusable across extensions sharing thresholds and layout.
#[derive(Clone, Debug)]
pub struct NodeBasis {
    nu: usize,
    order: usize,
    alphas: Vec<u32>,
    powers: Vec<Complex64>,
    mono: Vec<Complex64>,
    k_val: Vec<f64>,
    k_dbar: Vec<Complex64>,
    rho: f64,
}

impl NodeBasis {
    pub fn new(ext: &AlmostAnalytic) -> Self {
        let nu = ext.nu();
        let top = ext.layout.degree_range(ext.order).end;
        let alphas = ext.layout.indices()[..top]
            .iter()
            .flat_map(|a| a.entries().to_vec())
            .collect();
        let n = ext.order as usize;
        NodeBasis {
            nu,
            order: n,
            alphas,
            powers: Vec::new(),
            mono: vec![Complex64::new(0.0, 0.0); top],
            k_val: vec![0.0; n + 1],
            k_dbar: vec![Complex64::new(0.0, 0.0); nu * (n + 1)],
            rho: 1.0,
        }
    }

    /// Prepares `(i⟨u⟩t_i)^k` for the fiber above `rho = ⟨u⟩`.
    pub fn set_fiber(&mut self, table: &CutoffTable, rho: f64) {
        let n = self.order;
        self.rho = rho;
        self.powers.clear();
        for &t in &table.nodes {
            let iv = Complex64::new(0.0, rho * t);
            let mut p = Complex64::new(1.0, 0.0);
            for _ in 0..=n {
                self.powers.push(p);
                p *= iv;
            }
        }
    }

    /// Fills the node `v_j = ⟨u⟩ t_{idx_j}` above `u`.
    pub fn set_node(&mut self, table: &CutoffTable, u: &[f64], idx: &[usize]) {
        let (nu, n, m) = (self.nu, self.order, table.len());
        let stride = n + 1;
        for (p, slot) in self.mono.iter_mut().enumerate() {
            let a = &self.alphas[p * nu..(p + 1) * nu];
            let mut acc = self.powers[idx[0] * stride + a[0] as usize];
            for j in 1..nu {
                acc *= self.powers[idx[j] * stride + a[j] as usize];
            }
            *slot = acc;
        }
        let rho = self.rho;
        let mut kv = [0.0; 3];
        let mut dk = [0.0; 3];
        for k in 0..=n {
            let lam = table.lambdas[k];
            for j in 0..nu {
                kv[j] = table.kappa[k * m + idx[j]];
                dk[j] = table.dkappa[k * m + idx[j]];
            }
            let except = |skip: usize| -> f64 {
                let mut p = 1.0;
                for i in 0..nu {
                    if i != skip {
                        p *= kv[i];
                    }
                }
                p
            };
            self.k_val[k] = kv[..nu].iter().product();
            let mut s = 0.0;
            for j in 0..nu {
                if dk[j] != 0.0 {
                    s += dk[j] * table.nodes[idx[j]] * except(j);
                }
            }
            for l in 0..nu {
                let du = -lam * s * u[l] / (rho * rho);
                let dv = if dk[l] != 0.0 { dk[l] * lam / rho * except(l) } else { 0.0 };
                self.k_dbar[l * stride + k] = Complex64::new(du, dv);
            }
        }
    }
}

fn split(z: &[Complex64], nu: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if z.len() != nu {
        return Err(Error::Precondition(format!("z has {} components, expected {nu}", z.len())));
    }
    Ok((z.iter().map(|c| c.re).collect(), z.iter().map(|c| c.im).collect()))
}

/// `|∂̄f̃|` along `v = t·(1,…,1)` at fixed `u`, with the fitted log-log slope.
#[derive(Clone, Debug, Serialize)]
pub struct DecayProbe {
    pub u: Vec<f64>,
    pub rows: Vec<(f64, f64)>,
    pub slope: Option<f64>,
}

impl DecayProbe {
    /// CSV with columns `abs_v,abs_dbar,fitted_slope`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("abs_v,abs_dbar,fitted_slope\n");
        let slope = self.slope.map_or_else(|| "nan".to_string(), |x| format!("{x}"));
        for (v, d) in &self.rows {
            let _ = writeln!(s, "{v:e},{d:e},{slope}");
        }
        s
    }
}

/// Probes the vanishing order of `∂̄f̃` as `Im z → 0`, starting inside the
/// region where every cutoff factor equals 1.
pub fn decay_probe(ext: &AlmostAnalytic, u: &[f64], points: usize) -> Result<DecayProbe> {
    let bp = ext.base_point(u)?;
    let nu = ext.nu();
    let lam_max = *ext.lambdas.last().expect("nonempty");
    let hi = Bump::PLATEAU * bp.rho / lam_max / 2.0;
    let rows: Vec<(f64, f64)> = geometric_path(hi, hi * 1e-3, points.max(2))
        .into_iter()
        .map(|t| {
            let v = vec![t; nu];
            (t * (nu as f64).sqrt(), ext.dbar_norm(&bp, &v))
        })
        .collect();
    let slope = loglog_slope(&rows);
    Ok(DecayProbe {
        u: u.to_vec(),
        rows,
        slope,
    })
}

/// Generic real point used by decay probes.
pub fn generic_point(nu: usize) -> Vec<f64> {
    (0..nu).map(|j| 0.37 + 0.23 * j as f64).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayRow {
    pub ell: u32,
    /// Smallest `C_ℓ` with `|∂̄f̃(z)| ≤ C_ℓ ⟨z⟩^{s−ℓ−1} |Im z|^ℓ` on the sample.
    pub constant: f64,
    pub finite: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    pub truncation: u32,
    pub s: f64,
    pub samples: usize,
    pub rows: Vec<DecayRow>,
    pub fitted_order: Option<f64>,
}

/// Samples `z` in the support region and estimates `C_ℓ` for `ℓ ≤ ell_max`.
pub fn verify_decay(ext: &AlmostAnalytic, ell_max: u32, samples: usize, seed: u64) -> Result<DecayReport> {
    let nu = ext.nu();
    let s = ext.decay();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut maxima = vec![0.0f64; ell_max as usize + 1];
    let mut finite = true;
    for _ in 0..samples {
        let radius = 10f64.powf(rng.random_range(-1.0..1.3));
        let u: Vec<f64> = (0..nu).map(|_| radius * rng.random_range(-1.0..1.0)).collect();
        let bp = ext.base_point(&u)?;
        let vmax = ext.v_radius(bp.rho);
        let v: Vec<f64> = (0..nu)
            .map(|_| {
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                sign * vmax * 10f64.powf(rng.random_range(-4.0..0.0))
            })
            .collect();
        let d = ext.dbar_norm(&bp, &v);
        let abs_v = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let bracket_z = (bp.rho * bp.rho + abs_v * abs_v).sqrt();
        for ell in 0..=ell_max {
            let denom = bracket_z.powf(s - f64::from(ell) - 1.0) * abs_v.powi(ell as i32);
            let r = d / denom;
            if !r.is_finite() {
                finite = false;
            } else {
                maxima[ell as usize] = maxima[ell as usize].max(r);
            }
        }
    }
    let probe = decay_probe(ext, &generic_point(nu), 12)?;
    Ok(DecayReport {
        truncation: ext.truncation(),
        s,
        samples,
        rows: maxima
            .into_iter()
            .enumerate()
            .map(|(ell, c)| DecayRow {
                ell: ell as u32,
                constant: c,
                finite,
            })
            .collect(),
        fitted_order: probe.slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cz(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn inverse_bracket(nu: usize) -> Arc<dyn SmoothFunction> {
        Arc::new(BracketPower::new(nu, -2.0))
    }

    #[test]
    fn thresholds_follow_recipe() {
        let ext = build_extension(inverse_bracket(1), 4).unwrap();
        let lam = ext.lambdas();
        assert_eq!(lam.len(), 5);
        assert!((lam[0] - ext.bounds().max_at_degree(0)).abs() < 1e-15);
        for k in 1..lam.len() {
            assert!(lam[k] >= lam[k - 1] + 1.0);
            assert!(lam[k] >= ext.bounds().max_at_degree(k as u32));
        }
    }

    #[test]
    fn identity_extends_analytically_in_plateau() {
        let f: Arc<dyn SmoothFunction> = Arc::new(Polynomial::coordinate(1, 0));
        let ext = build_extension(f, 3).unwrap();
        let z = [cz(0.8, 0.05)];
        assert!((ext.value(&z).unwrap() - z[0]).norm() < 1e-15);
        assert!(ext.dbar(0, &z).unwrap().norm() < 1e-15);
    }

    #[test]
    fn restriction_to_real_axis() {
        for nu in [1, 2] {
            let f = inverse_bracket(nu);
            let ext = build_extension(f.clone(), 3).unwrap();
            let u: Vec<f64> = (0..nu).map(|j| 0.4 - 0.9 * j as f64).collect();
            let z: Vec<Complex64> = u.iter().map(|&x| cz(x, 0.0)).collect();
            assert_eq!(ext.value(&z).unwrap(), cz(f.value(&u).unwrap(), 0.0));
            for l in 0..nu {
                assert_eq!(ext.dbar(l, &z).unwrap(), cz(0.0, 0.0));
            }
        }
    }

    #[test]
    fn vanishes_outside_support() {
        let ext = build_extension(inverse_bracket(2), 3).unwrap();
        let u = [0.5, -1.0];
        let rho = japanese_bracket(&u);
        let r = ext.v_radius(rho);
        let z = [cz(u[0], 0.1), cz(u[1], 1.0001 * r)];
        assert_eq!(ext.value(&z).unwrap(), cz(0.0, 0.0));
        assert_eq!(ext.dbar(0, &z).unwrap(), cz(0.0, 0.0));
        let inside = [cz(u[0], 0.1), cz(u[1], 0.2 * r)];
        assert!(ext.value(&inside).unwrap().norm() > 0.0);
    }

    #[test]
    fn dbar_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for nu in [1, 2] {
            let ext = build_extension(inverse_bracket(nu), 4).unwrap();
            let mut checked = 0;
            while checked < 6 {
                let u: Vec<f64> = (0..nu).map(|_| rng.random_range(-2.0..2.0)).collect();
                let rho = japanese_bracket(&u);
                let r = ext.v_radius(rho);
                let v: Vec<f64> = (0..nu).map(|_| rng.random_range(-r..r) * 0.95).collect();
                let z: Vec<Complex64> = u.iter().zip(&v).map(|(a, b)| cz(*a, *b)).collect();
                for l in 0..nu {
                    let h = 1e-6;
                    let shift = |du: f64, dv: f64| {
                        let mut w = z.clone();
                        w[l] += cz(du, dv);
                        ext.value(&w).unwrap()
                    };
                    let d_u = (shift(h, 0.0) - shift(-h, 0.0)) / (2.0 * h);
                    let d_v = (shift(0.0, h) - shift(0.0, -h)) / (2.0 * h);
                    let fd = (d_u + cz(0.0, 1.0) * d_v) * 0.5;
                    let exact = ext.dbar(l, &z).unwrap();
                    let scale = d_u.norm().max(d_v.norm()).max(1e-3);
                    assert!((fd - exact).norm() <= 1e-5 * scale, "nu={nu} z={z:?}: {exact} vs {fd}");
                }
                checked += 1;
            }
        }
    }

    #[test]
    fn polynomial_of_low_degree_is_analytic_in_plateau() {
        let beta = crate::MultiIndex::new(vec![2, 1]);
        let f: Arc<dyn SmoothFunction> = Arc::new(
            Polynomial::new(2, vec![(beta, 1.5), (crate::MultiIndex::new(vec![0, 1]), -0.5)]).unwrap(),
        );
        let ext = build_extension(f, 4).unwrap();
        let u = [0.3, 0.2];
        let bp = ext.base_point(&u).unwrap();
        let t = Bump::PLATEAU * bp.rho / ext.lambdas()[4] * 0.9;
        let mut out = [cz(0.0, 0.0); 2];
        ext.dbar_at(&bp, &[t, -0.5 * t], &mut out);
        assert!(out.iter().all(|c| c.norm() < 1e-14));
    }

    #[test]
    fn vanishing_order_equals_truncation() {
        for n in [3u32, 5] {
            for nu in [1, 2] {
                let ext = build_extension(inverse_bracket(nu), n).unwrap();
                let probe = decay_probe(&ext, &generic_point(nu), 10).unwrap();
                let slope = probe.slope.unwrap();
                assert!((slope - f64::from(n)).abs() < 0.2, "N={n} nu={nu}: {slope}");
            }
        }
    }

    #[test]
    fn decay_report_constants_are_finite() {
        let ext = build_extension(inverse_bracket(1), 4).unwrap();
        let rep = verify_decay(&ext, 4, 400, 3).unwrap();
        assert!(rep.rows.iter().all(|r| r.finite && r.constant.is_finite()));
        assert!((rep.fitted_order.unwrap() - 4.0).abs() < 0.2);
        let beyond = verify_decay(&ext, 6, 400, 3).unwrap();
        assert!(beyond.rows[6].constant > beyond.rows[4].constant);
    }

    #[test]
    fn rejects_insufficient_derivative_order() {
        let f: Arc<dyn SmoothFunction> = Arc::new(LimitedOrder {
            inner: inverse_bracket(1),
            max_order: 3,
        });
        assert!(build_extension(f.clone(), 3).is_err());
        assert!(build_extension(f, 2).is_ok());
    }

    #[test]
    fn probe_csv_layout() {
        let ext = build_extension(inverse_bracket(1), 3).unwrap();
        let csv = decay_probe(&ext, &[0.2], 4).unwrap().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "abs_v,abs_dbar,fitted_slope");
        assert_eq!(lines.len(), 5);
    }
}
