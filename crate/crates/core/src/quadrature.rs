//! Product Gauss–Legendre rules over `ℂ^ν = ℝ^ν_u × ℝ^ν_v` adapted to the
//! support and cutoff structure of an almost analytic extension.
//!
//! Each `u_j` axis is either a finite box (compact support) or all of `ℝ`
//! through `u = L·tan(πθ/2)`. For each `u`, every `v_j` axis is split at
//! the radii `⟨u⟩/(2λ_k)` and `⟨u⟩/λ_k` where the cutoff factors change,
//! mirrored about `v = 0`, so no node sits on `v = 0`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::aae::{AlmostAnalytic, Bump, CutoffTable, NodeBasis};
use crate::error::{Error, Result};
use crate::operator::japanese_bracket;

/// Environment variable selecting the number of worker threads.
pub const THREADS_ENV: &str = "OPCALC_THREADS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    /// Uniform panels per `u` axis (in `θ` for the tan map).
    pub u_panels: usize,
    /// Gauss–Legendre nodes per `u` panel.
    pub u_nodes: usize,
    /// Gauss–Legendre nodes per `v` panel.
    pub v_nodes: usize,
    /// Number of cutoff levels `k` whose transition radii become `v` breakpoints.
    pub kappa_levels: u32,
    /// Tan-map length scale; defaults to `max(1, spectral radius)`.
    #[serde(default)]
    pub u_scale: Option<f64>,
    /// Whether spectral coordinates become `u` breakpoints.
    #[serde(default = "yes")]
    pub spectral_breaks: bool,
    /// Each level multiplies the nodes per panel by about 3/2.
    #[serde(default)]
    pub refinement: u32,
}

fn yes() -> bool {
    true
}

impl QuadratureSpec {
    /// Budget tuned for `nu ≤ 2`.
    pub fn default_for(nu: usize) -> Self {
        match nu {
            1 => QuadratureSpec {
                u_panels: 16,
                u_nodes: 16,
                v_nodes: 16,
                kappa_levels: 4,
                u_scale: None,
                spectral_breaks: true,
                refinement: 0,
            },
            _ => QuadratureSpec {
                u_panels: 4,
                u_nodes: 6,
                v_nodes: 9,
                kappa_levels: 1,
                u_scale: None,
                spectral_breaks: true,
                refinement: 0,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.u_nodes < 2 || self.v_nodes < 2 {
            return Err(Error::Config("quadrature needs at least 2 nodes per panel".into()));
        }
        if self.u_panels < 1 {
            return Err(Error::Config("quadrature needs at least one u panel".into()));
        }
        if let Some(l) = self.u_scale {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Config("u_scale must be positive".into()));
            }
        }
        if self.refinement > 6 {
            return Err(Error::Config("refinement above 6 levels is not supported".into()));
        }
        Ok(())
    }

    /// One more uniform refinement level.
    pub fn refined(&self) -> Self {
        QuadratureSpec {
            refinement: self.refinement + 1,
            ..self.clone()
        }
    }

    fn u_points_per_panel(&self) -> usize {
        refine(self.u_nodes, self.refinement)
    }

    fn v_points_per_panel(&self) -> usize {
        refine(self.v_nodes, self.refinement)
    }
}

/// Node count after `level` steps of `m ↦ ⌈3m/2⌉`.
fn refine(m: usize, level: u32) -> usize {
    (0..level).fold(m, |m, _| (3 * m).div_ceil(2))
}

type Rule = Arc<Vec<(f64, f64)>>;

/// Gauss–Legendre pairs on `[-1, 1]`.
fn gl_rule(m: usize) -> Rule {
    static CACHE: OnceLock<Mutex<HashMap<usize, Rule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("rule cache poisoned");
    guard
        .entry(m)
        .or_insert_with(|| {
            let rule = GaussLegendre::new(NonZeroUsize::new(m).expect("m ≥ 1"));
            let mut pairs = rule.as_node_weight_pairs().to_vec();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            Arc::new(pairs)
        })
        .clone()
}

fn push_panel(out: &mut Vec<(f64, f64)>, a: f64, b: f64, rule: &[(f64, f64)]) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    for &(x, w) in rule {
        out.push((mid + half * x, half * w));
    }
}

fn merge_breaks(mut pts: Vec<f64>, tol: f64) -> Vec<f64> {
    pts.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(pts.len());
    for p in pts {
        if out.last().is_none_or(|&q| p - q > tol) {
            out.push(p);
        }
    }
    out
}

/// Nodes and weights along one `u` axis.
pub fn u_axis(spec: &QuadratureSpec, coords: &[f64], scale: f64, support: Option<f64>) -> Vec<(f64, f64)> {
    let rule = gl_rule(spec.u_points_per_panel());
    let p = spec.u_panels;
    let pts: &[f64] = if spec.spectral_breaks { coords } else { &[] };
    let mut out = Vec::new();
    match support {
        Some(r) => {
            let mut br: Vec<f64> = (0..=p).map(|i| -r + 2.0 * r * i as f64 / p as f64).collect();
            br.extend(pts.iter().copied().filter(|x| x.abs() < r));
            let br = merge_breaks(br, 1e-9 * r.max(1.0));
            for w in br.windows(2) {
                push_panel(&mut out, w[0], w[1], &rule);
            }
        }
        None => {
            let mut br: Vec<f64> = (0..=p).map(|i| -1.0 + 2.0 * i as f64 / p as f64).collect();
            br.extend(pts.iter().map(|x| (x / scale).atan() * 2.0 / PI));
            let br = merge_breaks(br, 1e-9);
            let mut theta = Vec::new();
            for w in br.windows(2) {
                push_panel(&mut theta, w[0], w[1], &rule);
            }
            for (t, w) in theta {
                let a = 0.5 * PI * t;
                let c = a.cos();
                out.push((scale * a.tan(), w * scale * 0.5 * PI / (c * c)));
            }
        }
    }
    out
}

/// Symmetric nodes along one `v` axis above a point with `⟨u⟩ = rho`.
pub fn v_axis(spec: &QuadratureSpec, lambdas: &[f64], rho: f64) -> Vec<(f64, f64)> {
    let rule = gl_rule(spec.v_points_per_panel());
    let radius = Bump::SUPPORT * rho / lambdas[0];
    let mut br = vec![0.0, radius];
    for &lam in lambdas.iter().take(spec.kappa_levels as usize + 1) {
        for r in [Bump::PLATEAU * rho / lam, Bump::SUPPORT * rho / lam] {
            if r < radius {
                br.push(r);
            }
        }
    }
    let br = merge_breaks(br, 1e-12 * radius);
    let mut half = Vec::new();
    for w in br.windows(2) {
        push_panel(&mut half, w[0], w[1], &rule);
    }
    let mut out: Vec<(f64, f64)> = half.iter().rev().map(|&(v, w)| (-v, w)).collect();
    out.extend(half);
    out
}

/// Per-node data handed to a [`NodeSink`]. Only nodes with `v_0 > 0` are
/// visited, with doubled weight: for real `f` and kernels with real
/// coefficients the integrand at `z̄` is the conjugate of the one at `z`, so
/// the integral is the real part of the accumulated sum.
pub struct NodeContext<'a> {
    pub u: &'a [f64],
    pub v: &'a [f64],
    /// Product quadrature weight (`du dv` measure).
    pub weight: f64,
    /// `∂̄_ℓ f̃_e(z)` at index `e·ν + ℓ`.
    pub dbar: &'a [Complex64],
}

pub trait NodeSink: Send + Sized {
    fn visit(&mut self, node: &NodeContext<'_>);
    fn merge(&mut self, later: Self);
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct QuadStats {
    pub u_points: usize,
    pub nodes: usize,
}

/// Worker threads from [`THREADS_ENV`], default 1.
pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

fn check_compatible(exts: &[&AlmostAnalytic]) -> Result<()> {
    let first = exts
        .first()
        .ok_or_else(|| Error::Precondition("need at least one extension".into()))?;
    for e in exts {
        if e.nu() != first.nu()
            || e.lambdas() != first.lambdas()
            || e.base().support_radius() != first.base().support_radius()
        {
            return Err(Error::Precondition(
                "batched extensions must share nu, thresholds and support".into(),
            ));
        }
    }
    Ok(())
}

/// Runs `make()`-created sinks over every quadrature node. The node set is
/// split into contiguous chunks of `u` points, one per worker, and partial
/// results are merged in chunk order.
pub fn integrate<S, M>(
    exts: &[&AlmostAnalytic],
    spectrum: &[Vec<f64>],
    spec: &QuadratureSpec,
    make: M,
) -> Result<(S, QuadStats)>
where
    S: NodeSink,
    M: Fn() -> S + Sync,
{
    spec.validate()?;
    check_compatible(exts)?;
    let nu = exts[0].nu();
    if nu > 3 {
        return Err(Error::Precondition("quadrature is limited to nu ≤ 3".into()));
    }
    if spectrum.iter().any(|p| p.len() != nu) {
        return Err(Error::Precondition("spectrum dimension does not match the extension".into()));
    }
    let support = exts[0].base().support_radius();
    let radius = spectrum
        .iter()
        .flat_map(|p| p.iter().map(|x| x.abs()))
        .fold(0.0, f64::max);
    let scale = spec.u_scale.unwrap_or(radius.max(1.0));
    let axes: Vec<Vec<(f64, f64)>> = (0..nu)
        .map(|j| {
            let coords: Vec<f64> = spectrum.iter().map(|p| p[j]).collect();
            u_axis(spec, &coords, scale, support)
        })
        .collect();
    let total: usize = axes.iter().map(Vec::len).product();
    let threads = thread_count().min(total.max(1));
    let chunk = total.div_ceil(threads);

    let unit = v_axis(spec, exts[0].lambdas(), 1.0);
    let table = CutoffTable::new(exts[0].bump(), exts[0].lambdas(), &unit.iter().map(|p| p.0).collect::<Vec<_>>());
    let m = unit.len();
    let half = m / 2;

    let run = |start: usize, end: usize| -> Result<(S, QuadStats)> {
        let mut sink = make();
        let mut stats = QuadStats::default();
        let mut basis = NodeBasis::new(exts[0]);
        let mut u = vec![0.0; nu];
        let mut v = vec![0.0; nu];
        let mut idx = vec![0usize; nu];
        let mut dbar = vec![Complex64::new(0.0, 0.0); exts.len() * nu];
        let nv = half * m.pow(nu as u32 - 1);
        for uidx in start..end {
            let mut rem = uidx;
            let mut wu = 1.0;
            for j in 0..nu {
                let (x, w) = axes[j][rem % axes[j].len()];
                rem /= axes[j].len();
                u[j] = x;
                wu *= w;
            }
            let rho = japanese_bracket(&u);
            let bps = exts.iter().map(|e| e.base_point(&u)).collect::<Result<Vec<_>>>()?;
            basis.set_fiber(&table, rho);
            // the conjugate node −v contributes the complex conjugate
            let wu = 2.0 * wu * rho.powi(nu as i32);
            stats.u_points += 1;
            for vidx in 0..nv {
                let mut r = vidx;
                let mut w = wu;
                for j in 0..nu {
                    let i = if j == 0 {
                        let i = half + r % half;
                        r /= half;
                        i
                    } else {
                        let i = r % m;
                        r /= m;
                        i
                    };
                    idx[j] = i;
                    v[j] = rho * unit[i].0;
                    w *= unit[i].1;
                }
                basis.set_node(&table, &u, &idx);
                let mut any = false;
                for (e, (ext, bp)) in exts.iter().zip(&bps).enumerate() {
                    let out = &mut dbar[e * nu..(e + 1) * nu];
                    ext.dbar_with(bp, &basis, out);
                    any |= out.iter().any(|c| *c != Complex64::new(0.0, 0.0));
                }
                stats.nodes += 1;
                if any {
                    sink.visit(&NodeContext {
                        u: &u,
                        v: &v,
                        weight: w,
                        dbar: &dbar,
                    });
                }
            }
        }
        Ok((sink, stats))
    };

    let parts: Vec<Result<(S, QuadStats)>> = if threads == 1 {
        vec![run(0, total)]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads)
                .map(|t| {
                    let run = &run;
                    scope.spawn(move || run(t * chunk, ((t + 1) * chunk).min(total)))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("quadrature worker panicked"))
                .collect()
        })
    };
    let mut iter = parts.into_iter();
    let (mut sink, mut stats) = iter.next().expect("at least one part")?;
    for part in iter {
        let (s, st) = part?;
        sink.merge(s);
        stats.u_points += st.u_points;
        stats.nodes += st.nodes;
    }
    Ok((sink, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tan_axis_integrates_decaying_function() {
        let spec = QuadratureSpec::default_for(1);
        let axis = u_axis(&spec, &[0.3, -0.7], 1.0, None);
        // ∫ (1+u²)^{-2} du = π/2
        let s: f64 = axis.iter().map(|(u, w)| w / (1.0 + u * u).powi(2)).sum();
        assert!((s - PI / 2.0).abs() < 1e-10, "{s}");
    }

    #[test]
    fn compact_axis_covers_box() {
        let spec = QuadratureSpec::default_for(1);
        let axis = u_axis(&spec, &[0.1], 1.0, Some(2.5));
        let len: f64 = axis.iter().map(|(_, w)| w).sum();
        assert!((len - 5.0).abs() < 1e-12);
        assert!(axis.iter().all(|(u, _)| u.abs() < 2.5));
    }

    #[test]
    fn v_axis_is_symmetric_and_avoids_zero() {
        let spec = QuadratureSpec::default_for(1);
        let lambdas = [1.1, 2.5, 6.0, 20.0];
        let rule = v_axis(&spec, &lambdas, 1.3);
        let n = rule.len();
        assert_eq!(n % 2, 0);
        for k in 0..n / 2 {
            assert_eq!(rule[k].0, -rule[n - 1 - k].0);
            assert_eq!(rule[k].1, rule[n - 1 - k].1);
        }
        assert!(rule.iter().all(|(v, _)| *v != 0.0));
        let len: f64 = rule.iter().map(|(_, w)| w).sum();
        assert!((len - 2.0 * 1.3 / 1.1).abs() < 1e-12);
    }

    #[test]
    fn refinement_grows_nodes_by_half() {
        let spec = QuadratureSpec {
            u_nodes: 5,
            ..QuadratureSpec::default_for(2)
        };
        let a = u_axis(&spec, &[], 1.0, None).len();
        let b = u_axis(&spec.refined(), &[], 1.0, None).len();
        let c = u_axis(&spec.refined().refined(), &[], 1.0, None).len();
        assert_eq!((a / spec.u_panels, b / spec.u_panels, c / spec.u_panels), (5, 8, 12));
        assert!(QuadratureSpec { u_nodes: 1, ..spec }.validate().is_err());
    }
}
