//! Smooth test functions with closed-form partials, their derivative
//! constants `C_α`, and parameterized families.

use std::fmt;
use std::sync::Arc;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::bump::Bump;
use crate::error::{Error, Result};
use crate::jet::{squared_distance_jet, Jet, JetLayout};
use crate::multiindex::MultiIndex;
use crate::operator::japanese_bracket;

/// A real smooth function on `R^nu` with partials of every order up to
/// [`max_order`](SmoothFunction::max_order).
pub trait SmoothFunction: Send + Sync + fmt::Debug {
    fn nu(&self) -> usize;

    /// Exponent `s` in `|∂^α f(x)| ≤ C_α ⟨x⟩^{s−|α|}`.
    fn decay(&self) -> f64;

    fn name(&self) -> String;

    /// Taylor jet at `x` up to total degree `order`.
    fn jet(&self, x: &[f64], order: u32) -> Result<Jet>;

    fn max_order(&self) -> u32 {
        u32::MAX
    }

    /// Half-width of a box centered at the origin containing the support,
    /// when the support is compact.
    fn support_radius(&self) -> Option<f64> {
        None
    }

    /// Point around which derivative constants are sampled most densely.
    fn center(&self) -> Vec<f64> {
        vec![0.0; self.nu()]
    }

    /// Length scale of the finest features.
    fn feature_scale(&self) -> f64 {
        1.0
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.jet(x, 0)?.value())
    }

    fn partial(&self, x: &[f64], alpha: &MultiIndex) -> Result<f64> {
        Ok(self.jet(x, alpha.degree())?.partial(alpha))
    }
}

fn check_point(nu: usize, x: &[f64]) -> Result<()> {
    if x.len() != nu {
        return Err(Error::Precondition(format!(
            "point has {} coordinates, function has {nu}",
            x.len()
        )));
    }
    Ok(())
}

/// `⟨x − μ⟩^s`.
#[derive(Clone, Debug)]
pub struct BracketPower {
    pub s: f64,
    pub center: Vec<f64>,
}

impl BracketPower {
    pub fn new(nu: usize, s: f64) -> Self {
        BracketPower {
            s,
            center: vec![0.0; nu],
        }
    }

    pub fn shifted(center: Vec<f64>, s: f64) -> Self {
        BracketPower { s, center }
    }
}

impl SmoothFunction for BracketPower {
    fn nu(&self) -> usize {
        self.center.len()
    }

    fn decay(&self) -> f64 {
        self.s
    }

    fn name(&self) -> String {
        format!("bracket_power(s={}, center={:?})", self.s, self.center)
    }

    fn jet(&self, x: &[f64], order: u32) -> Result<Jet> {
        check_point(self.nu(), x)?;
        let layout = JetLayout::shared(self.nu(), order);
        Ok(squared_distance_jet(&layout, x, &self.center)
            .add_scalar(1.0)
            .powf(self.s / 2.0))
    }

    fn center(&self) -> Vec<f64> {
        self.center.clone()
    }
}

/// `exp(−|x − c|² / (2w²))`, declared with decay exponent `s`.
#[derive(Clone, Debug)]
pub struct Gaussian {
    pub center: Vec<f64>,
    pub width: f64,
    pub s: f64,
}

impl SmoothFunction for Gaussian {
    fn nu(&self) -> usize {
        self.center.len()
    }

    fn decay(&self) -> f64 {
        self.s
    }

    fn name(&self) -> String {
        format!("gaussian(width={}, center={:?})", self.width, self.center)
    }

    fn jet(&self, x: &[f64], order: u32) -> Result<Jet> {
        check_point(self.nu(), x)?;
        let layout = JetLayout::shared(self.nu(), order);
        let q = squared_distance_jet(&layout, x, &self.center);
        Ok(q.scale(-0.5 / (self.width * self.width)).exp())
    }

    fn center(&self) -> Vec<f64> {
        self.center.clone()
    }

    fn feature_scale(&self) -> f64 {
        self.width.min(1.0)
    }
}

/// Smoothed indicator of a cube: `Π_j κ((x_j − c_j)/r)`.
#[derive(Clone, Debug)]
pub struct MollifiedIndicator {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl SmoothFunction for MollifiedIndicator {
    fn nu(&self) -> usize {
        self.center.len()
    }

    fn decay(&self) -> f64 {
        0.0
    }

    fn name(&self) -> String {
        format!("mollified_indicator(radius={}, center={:?})", self.radius, self.center)
    }

    fn jet(&self, x: &[f64], order: u32) -> Result<Jet> {
        check_point(self.nu(), x)?;
        let layout = JetLayout::shared(self.nu(), order);
        let mut acc = Jet::constant(&layout, 1.0);
        for j in 0..self.nu() {
            let y = (x[j] - self.center[j]) / self.radius;
            let factor = Bump.jet_on_axis(&layout, j, y).rescale_argument(self.radius);
            acc = acc.mul(&factor);
        }
        Ok(acc)
    }

    fn support_radius(&self) -> Option<f64> {
        let c = self.center.iter().map(|c| c.abs()).fold(0.0, f64::max);
        Some(c + self.radius)
    }

    fn center(&self) -> Vec<f64> {
        self.center.clone()
    }

    fn feature_scale(&self) -> f64 {
        (self.radius / 2.0).min(1.0)
    }
}

/// Real polynomial `Σ c_β x^β`.
#[derive(Clone, Debug)]
pub struct Polynomial {
    nu: usize,
    terms: Vec<(MultiIndex, f64)>,
}

impl Polynomial {
    pub fn new(nu: usize, terms: Vec<(MultiIndex, f64)>) -> Result<Self> {
        if terms.iter().any(|(b, _)| b.nu() != nu) {
            return Err(Error::Precondition("monomial dimension mismatch".into()));
        }
        Ok(Polynomial { nu, terms })
    }

    /// `f(x) = x_j`.
    pub fn coordinate(nu: usize, j: usize) -> Self {
        Polynomial {
            nu,
            terms: vec![(MultiIndex::delta(nu, j), 1.0)],
        }
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|(b, _)| b.degree()).max().unwrap_or(0)
    }
}

impl SmoothFunction for Polynomial {
    fn nu(&self) -> usize {
        self.nu
    }

    fn decay(&self) -> f64 {
        f64::from(self.degree())
    }

    fn name(&self) -> String {
        format!("polynomial(degree={})", self.degree())
    }

    fn jet(&self, x: &[f64], order: u32) -> Result<Jet> {
        check_point(self.nu, x)?;
        let layout = JetLayout::shared(self.nu, order);
        let vars: Vec<Jet> = (0..self.nu).map(|j| Jet::variable(&layout, x, j)).collect();
        let mut acc = Jet::constant(&layout, 0.0);
        for (beta, c) in &self.terms {
            let mut mono = Jet::constant(&layout, *c);
            for (j, &b) in beta.entries().iter().enumerate() {
                for _ in 0..b {
                    mono = mono.mul(&vars[j]);
                }
            }
            acc = acc.add(&mono);
        }
        Ok(acc)
    }
}

/// `χ(x/k) f(x)`.
#[derive(Clone, Debug)]
pub struct Cutoff {
    base: Arc<dyn SmoothFunction>,
    chi: Arc<dyn SmoothFunction>,
    k: f64,
}

impl Cutoff {
    pub fn scale(&self) -> f64 {
        self.k
    }
}

impl SmoothFunction for Cutoff {
    fn nu(&self) -> usize {
        self.base.nu()
    }

    fn decay(&self) -> f64 {
        self.base.decay()
    }

    fn name(&self) -> String {
        format!("cutoff(k={}, {}, {})", self.k, self.chi.name(), self.base.name())
    }

    fn jet(&self, x: &[f64], order: u32) -> Result<Jet> {
        let y: Vec<f64> = x.iter().map(|v| v / self.k).collect();
        let chi = self.chi.jet(&y, order)?.rescale_argument(self.k);
        Ok(chi.mul(&self.base.jet(x, order)?))
    }

    fn max_order(&self) -> u32 {
        self.base.max_order().min(self.chi.max_order())
    }

    fn support_radius(&self) -> Option<f64> {
        self.chi.support_radius().map(|r| r * self.k)
    }

    fn center(&self) -> Vec<f64> {
        self.base.center()
    }

    fn feature_scale(&self) -> f64 {
        self.base.feature_scale().min(self.k * self.chi.feature_scale())
    }
}

/// `x ↦ χ(x/k) f(x)`. `χ` must be compactly supported with `χ(0) = 1`.
pub fn cutoff_family(
    f: Arc<dyn SmoothFunction>,
    chi: Arc<dyn SmoothFunction>,
    k: f64,
) -> Result<Arc<dyn SmoothFunction>> {
    if f.nu() != chi.nu() {
        return Err(Error::Precondition("cutoff dimension mismatch".into()));
    }
    if !(k > 0.0) {
        return Err(Error::Precondition(format!("cutoff scale must be positive, got {k}")));
    }
    if chi.support_radius().is_none() {
        return Err(Error::Precondition("cutoff must be compactly supported".into()));
    }
    let at_zero = chi.value(&vec![0.0; chi.nu()])?;
    if (at_zero - 1.0).abs() > 1e-12 {
        return Err(Error::Precondition(format!("cutoff must equal 1 at 0, got {at_zero}")));
    }
    Ok(Arc::new(Cutoff { base: f, chi, k }))
}

/// Default cutoff `χ(x) = Π_j κ(x_j)`.
pub fn default_cutoff(nu: usize) -> Arc<dyn SmoothFunction> {
    Arc::new(MollifiedIndicator {
        center: vec![0.0; nu],
        radius: 1.0,
    })
}

/// Caps the available derivative order of another function.
#[derive(Clone, Debug)]
pub struct LimitedOrder {
    pub inner: Arc<dyn SmoothFunction>,
    pub max_order: u32,
}

impl SmoothFunction for LimitedOrder {
    fn nu(&self) -> usize {
        self.inner.nu()
    }

    fn decay(&self) -> f64 {
        self.inner.decay()
    }

    fn name(&self) -> String {
        format!("limited({}, order={})", self.inner.name(), self.max_order)
    }

    fn jet(&self, x: &[f64], order: u32) -> Result<Jet> {
        if order > self.max_order {
            return Err(Error::Precondition(format!(
                "derivatives of order {order} requested, only {} available",
                self.max_order
            )));
        }
        self.inner.jet(x, order)
    }

    fn max_order(&self) -> u32 {
        self.max_order
    }
}

/// Sampled constants `C_α` with `|∂^α f(x)| ≤ C_α ⟨x⟩^{s−|α|}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DerivativeBounds {
    pub s: f64,
    pub order: u32,
    pub constants: Vec<(MultiIndex, f64)>,
}

impl DerivativeBounds {
    pub fn constant(&self, alpha: &MultiIndex) -> Option<f64> {
        self.constants.iter().find(|(a, _)| a == alpha).map(|(_, c)| *c)
    }

    /// `max_{|α| = k} C_α`.
    pub fn max_at_degree(&self, k: u32) -> f64 {
        self.constants
            .iter()
            .filter(|(a, _)| a.degree() == k)
            .map(|(_, c)| *c)
            .fold(0.0, f64::max)
    }
}

const CONSTANT_MARGIN: f64 = 1.1;

/// Sample points: a grid around the origin and each function's center,
/// plus seeded points with log-uniform radii.
fn sample_points(fs: &[Arc<dyn SmoothFunction>], seed: u64) -> Vec<Vec<f64>> {
    let nu = fs[0].nu();
    let mut pts = Vec::new();
    let fine = fs.iter().map(|f| f.feature_scale()).fold(1.0, f64::min);
    let (per_axis_cap, random_count) = match nu {
        1 => (4001usize, 2000usize),
        2 => (121, 3000),
        _ => (25, 3000),
    };
    let mut centers: Vec<Vec<f64>> = vec![vec![0.0; nu]];
    for f in fs {
        let c = f.center();
        if !centers.contains(&c) {
            centers.push(c);
        }
    }
    for c in &centers {
        let radius = 6.0;
        let per_axis = ((2.0 * radius / (0.05 * fine)).ceil() as usize + 1).min(per_axis_cap);
        let grid: Vec<f64> = (0..per_axis)
            .map(|k| -radius + 2.0 * radius * k as f64 / (per_axis - 1) as f64)
            .collect();
        let total = per_axis.pow(nu as u32);
        for idx in 0..total {
            let mut rem = idx;
            let mut p = Vec::with_capacity(nu);
            for j in 0..nu {
                p.push(c[j] + grid[rem % per_axis]);
                rem /= per_axis;
            }
            pts.push(p);
        }
    }
    if let Some(r) = fs.iter().map(|f| f.support_radius()).try_fold(0.0f64, |acc, r| r.map(|r| acc.max(r))) {
        // compact support: a grid over the support box
        let per_axis = ((2.0 * r / (0.05 * fine)).ceil() as usize + 1).min(per_axis_cap);
        let total = per_axis.pow(nu as u32);
        for idx in 0..total {
            let mut rem = idx;
            let mut p = Vec::with_capacity(nu);
            for _ in 0..nu {
                p.push(-r + 2.0 * r * (rem % per_axis) as f64 / (per_axis - 1) as f64);
                rem /= per_axis;
            }
            pts.push(p);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random_count {
        let dir: Vec<f64> = (0..nu).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        let r = 10f64.powf(rng.random_range(-2.0..3.0));
        let c = &centers[rng.random_range(0..centers.len())];
        pts.push(dir.iter().zip(c).map(|(d, cj)| cj + r * d / n).collect());
    }
    pts
}

/// Estimates `C_α` for `|α| ≤ order`, uniformly over `fs`, as
/// 1.1 times the sampled maximum of `|∂^α f(x)| ⟨x⟩^{|α|−s}`.
pub fn estimate_constants(fs: &[Arc<dyn SmoothFunction>], order: u32, seed: u64) -> Result<DerivativeBounds> {
    let first = fs
        .first()
        .ok_or_else(|| Error::Precondition("need at least one function".into()))?;
    let nu = first.nu();
    let s = first.decay();
    if fs.iter().any(|f| f.nu() != nu || f.decay() != s) {
        return Err(Error::Precondition("family members must share nu and s".into()));
    }
    if fs.iter().any(|f| f.max_order() < order) {
        return Err(Error::Precondition(format!("derivatives up to order {order} are not available")));
    }
    let layout = JetLayout::shared(nu, order);
    let mut maxima = vec![0.0f64; layout.len()];
    for x in sample_points(fs, seed) {
        let br = japanese_bracket(&x);
        for f in fs {
            let jet = f.jet(&x, order)?;
            for (p, alpha) in layout.indices().iter().enumerate() {
                let d = jet.coeffs()[p] * layout.factorial(p);
                let ratio = d.abs() * br.powf(f64::from(alpha.degree()) - s);
                if ratio.is_finite() {
                    maxima[p] = maxima[p].max(ratio);
                }
            }
        }
    }
    Ok(DerivativeBounds {
        s,
        order,
        constants: layout
            .indices()
            .iter()
            .cloned()
            .zip(maxima.into_iter().map(|m| m * CONSTANT_MARGIN))
            .collect(),
    })
}

/// Outcome of re-checking sampled bounds on a fresh sample.
#[derive(Clone, Debug, Serialize)]
pub struct BoundCheck {
    pub samples: usize,
    pub violations: usize,
    /// `max |∂^α f| ⟨x⟩^{|α|−s} / C_α` over the sample.
    pub worst_ratio: f64,
}

impl BoundCheck {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

pub fn check_bounds(f: &Arc<dyn SmoothFunction>, bounds: &DerivativeBounds, seed: u64) -> Result<BoundCheck> {
    let layout = JetLayout::shared(f.nu(), bounds.order);
    let pts = sample_points(std::slice::from_ref(f), seed);
    let mut violations = 0;
    let mut worst = 0.0f64;
    for x in &pts {
        let br = japanese_bracket(x);
        let jet = f.jet(x, bounds.order)?;
        for (p, alpha) in layout.indices().iter().enumerate() {
            let c = bounds.constant(alpha).unwrap_or(0.0);
            let v = jet.coeffs()[p].abs() * layout.factorial(p) * br.powf(f64::from(alpha.degree()) - bounds.s);
            if v == 0.0 {
                continue;
            }
            let r = if c > 0.0 { v / c } else { f64::INFINITY };
            worst = worst.max(r);
            if r > 1.0 {
                violations += 1;
            }
        }
    }
    Ok(BoundCheck {
        samples: pts.len(),
        violations,
        worst_ratio: worst,
    })
}

/// Finite parameterized set of functions sharing `s` and `C_α`.
#[derive(Clone, Debug)]
pub struct FunctionFamily {
    pub name: String,
    pub parameters: Vec<f64>,
    pub members: Vec<Arc<dyn SmoothFunction>>,
    pub bounds: DerivativeBounds,
}

impl FunctionFamily {
    pub fn new(
        name: impl Into<String>,
        parameters: Vec<f64>,
        members: Vec<Arc<dyn SmoothFunction>>,
        order: u32,
        seed: u64,
    ) -> Result<Self> {
        if parameters.len() != members.len() || members.is_empty() {
            return Err(Error::Precondition("one member per parameter value required".into()));
        }
        let bounds = estimate_constants(&members, order, seed)?;
        Ok(FunctionFamily {
            name: name.into(),
            parameters,
            members,
            bounds,
        })
    }

    pub fn s(&self) -> f64 {
        self.bounds.s
    }

    pub fn nu(&self) -> usize {
        self.members[0].nu()
    }
}

fn default_shifts() -> Vec<f64> {
    vec![0.0]
}

fn default_lambdas() -> Vec<f64> {
    vec![-1.0, -0.5, 0.0, 0.5, 1.0]
}

/// Serializable description of a built-in family. Shifts `λ` move the
/// center to `λ·(1,…,1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    BracketPower {
        s: f64,
        #[serde(default = "default_shifts")]
        shifts: Vec<f64>,
    },
    ShiftedInverseBracket {
        #[serde(default = "default_lambdas")]
        lambdas: Vec<f64>,
    },
    Gaussian {
        width: f64,
        #[serde(default = "default_shifts")]
        shifts: Vec<f64>,
    },
    MollifiedIndicator {
        radius: f64,
        #[serde(default = "default_shifts")]
        shifts: Vec<f64>,
    },
}

impl FamilySpec {
    pub fn name(&self) -> &'static str {
        match self {
            FamilySpec::BracketPower { .. } => "bracket_power",
            FamilySpec::ShiftedInverseBracket { .. } => "shifted_inverse_bracket",
            FamilySpec::Gaussian { .. } => "gaussian",
            FamilySpec::MollifiedIndicator { .. } => "mollified_indicator",
        }
    }

    pub fn parameters(&self) -> &[f64] {
        match self {
            FamilySpec::BracketPower { shifts, .. }
            | FamilySpec::Gaussian { shifts, .. }
            | FamilySpec::MollifiedIndicator { shifts, .. } => shifts,
            FamilySpec::ShiftedInverseBracket { lambdas } => lambdas,
        }
    }

    pub fn decay(&self) -> f64 {
        match self {
            FamilySpec::BracketPower { s, .. } => *s,
            FamilySpec::ShiftedInverseBracket { .. } | FamilySpec::Gaussian { .. } => -2.0,
            FamilySpec::MollifiedIndicator { .. } => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.parameters().is_empty() || self.parameters().iter().any(|p| !p.is_finite()) {
            return Err(Error::Config(format!("{}: parameter list must be nonempty and finite", self.name())));
        }
        match self {
            FamilySpec::BracketPower { s, .. } if !s.is_finite() => {
                Err(Error::Config("bracket_power: s must be finite".into()))
            }
            FamilySpec::Gaussian { width, .. } if !(*width > 0.0) => {
                Err(Error::Config("gaussian: width must be positive".into()))
            }
            FamilySpec::MollifiedIndicator { radius, .. } if !(*radius > 0.0) => {
                Err(Error::Config("mollified_indicator: radius must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn member(&self, nu: usize, param: f64) -> Arc<dyn SmoothFunction> {
        let center = vec![param; nu];
        match self {
            FamilySpec::BracketPower { s, .. } => Arc::new(BracketPower::shifted(center, *s)),
            FamilySpec::ShiftedInverseBracket { .. } => Arc::new(BracketPower::shifted(center, -2.0)),
            FamilySpec::Gaussian { width, .. } => Arc::new(Gaussian {
                center,
                width: *width,
                s: -2.0,
            }),
            FamilySpec::MollifiedIndicator { radius, .. } => Arc::new(MollifiedIndicator {
                center,
                radius: *radius,
            }),
        }
    }

    /// Builds the family with constants `C_α` for `|α| ≤ order`.
    pub fn build(&self, nu: usize, order: u32, seed: u64) -> Result<FunctionFamily> {
        self.validate()?;
        let params = self.parameters().to_vec();
        let members = params.iter().map(|&p| self.member(nu, p)).collect();
        FunctionFamily::new(self.name(), params, members, order, seed)
    }
}

/// Catalog entry for a built-in family.
#[derive(Clone, Debug, Serialize)]
pub struct FamilyInfo {
    pub name: &'static str,
    pub description: &'static str,
    pub parameter: &'static str,
    pub example: FamilySpec,
}

pub fn builtin_families() -> Vec<FamilyInfo> {
    vec![
        FamilyInfo {
            name: "bracket_power",
            description: "⟨x − λ(1,…,1)⟩^s; needs the cutoff route when s ≥ 0",
            parameter: "s (decay exponent), shifts λ",
            example: FamilySpec::BracketPower {
                s: -2.0,
                shifts: vec![0.0],
            },
        },
        FamilyInfo {
            name: "shifted_inverse_bracket",
            description: "⟨x − λ(1,…,1)⟩^{-2}, s = -2",
            parameter: "λ grid",
            example: FamilySpec::ShiftedInverseBracket {
                lambdas: default_lambdas(),
            },
        },
        FamilyInfo {
            name: "gaussian",
            description: "exp(−|x − λ(1,…,1)|²/(2w²)), declared s = -2",
            parameter: "width w, shifts λ",
            example: FamilySpec::Gaussian {
                width: 1.0,
                shifts: vec![0.0],
            },
        },
        FamilyInfo {
            name: "mollified_indicator",
            description: "Π_j κ((x_j − λ)/r), compactly supported, s = 0",
            parameter: "radius r, shifts λ",
            example: FamilySpec::MollifiedIndicator {
                radius: 1.5,
                shifts: vec![0.0],
            },
        },
    ]
}
