//! Truncated multivariate Taylor polynomials.
//!
//! A [`Jet`] stores the Taylor coefficients `c_α = ∂^α f(x)/α!` of a real
//! function at a point, for all `|α| ≤ order`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::multiindex::{enumerate_degree_range, MultiIndex};

/// Index table and product table for jets in `nu` variables up to `order`.
#[derive(Debug)]
pub struct JetLayout {
    nu: usize,
    order: u32,
    indices: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
    degree_start: Vec<usize>,
    products: Vec<(u32, u32, u32)>,
    factorials: Vec<f64>,
}

impl JetLayout {
    fn build(nu: usize, order: u32) -> Self {
        let indices = enumerate_degree_range(nu, 0, order);
        let lookup: HashMap<MultiIndex, usize> =
            indices.iter().enumerate().map(|(k, a)| (a.clone(), k)).collect();
        let mut degree_start = vec![0; order as usize + 2];
        for (k, a) in indices.iter().enumerate().rev() {
            degree_start[a.degree() as usize] = k;
        }
        degree_start[order as usize + 1] = indices.len();
        let mut products = Vec::new();
        for (i, a) in indices.iter().enumerate() {
            for (j, b) in indices.iter().enumerate() {
                if a.degree() + b.degree() <= order {
                    products.push((i as u32, j as u32, lookup[&(a + b)] as u32));
                }
            }
        }
        let factorials = indices.iter().map(MultiIndex::factorial_f64).collect();
        JetLayout {
            nu,
            order,
            indices,
            lookup,
            degree_start,
            products,
            factorials,
        }
    }

    /// Shared layout for `(nu, order)`.
    pub fn shared(nu: usize, order: u32) -> Arc<JetLayout> {
        type Cache = Mutex<HashMap<(usize, u32), Arc<JetLayout>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("jet layout cache poisoned");
        guard
            .entry((nu, order))
            .or_insert_with(|| Arc::new(JetLayout::build(nu, order)))
            .clone()
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Multi-indices in graded descending-lex order.
    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        self.lookup.get(alpha).copied()
    }

    /// Positions of all indices of degree `k`.
    pub fn degree_range(&self, k: u32) -> std::ops::Range<usize> {
        self.degree_start[k as usize]..self.degree_start[k as usize + 1]
    }

    /// `α!` for the index at `pos`.
    pub fn factorial(&self, pos: usize) -> f64 {
        self.factorials[pos]
    }
}

#[derive(Clone, Debug)]
pub struct Jet {
    layout: Arc<JetLayout>,
    coeffs: Vec<f64>,
}

impl Jet {
    pub fn constant(layout: &Arc<JetLayout>, c: f64) -> Self {
        let mut coeffs = vec![0.0; layout.len()];
        coeffs[0] = c;
        Jet {
            layout: layout.clone(),
            coeffs,
        }
    }

    /// The coordinate function `x_j` expanded at `x`.
    pub fn variable(layout: &Arc<JetLayout>, x: &[f64], j: usize) -> Self {
        let mut jet = Self::constant(layout, x[j]);
        if layout.order >= 1 {
            let pos = layout.position(&MultiIndex::delta(layout.nu, j)).expect("degree-1 index");
            jet.coeffs[pos] = 1.0;
        }
        jet
    }

    /// Jet of `x ↦ φ(x_j)` from the univariate derivatives `φ^{(k)}(x_j)`.
    pub fn univariate(layout: &Arc<JetLayout>, j: usize, derivs: &[f64]) -> Self {
        let mut jet = Self::constant(layout, derivs[0]);
        let mut kfact = 1.0;
        for k in 1..=layout.order {
            kfact *= f64::from(k);
            let mut e = vec![0; layout.nu];
            e[j] = k;
            let pos = layout.position(&MultiIndex::new(e)).expect("pure index");
            jet.coeffs[pos] = derivs[k as usize] / kfact;
        }
        jet
    }

    pub fn from_coeffs(layout: &Arc<JetLayout>, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), layout.len());
        Jet {
            layout: layout.clone(),
            coeffs,
        }
    }

    pub fn layout(&self) -> &Arc<JetLayout> {
        &self.layout
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Taylor coefficients in layout order.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// `∂^α f(x) = α! c_α`; zero beyond the jet order.
    pub fn partial(&self, alpha: &MultiIndex) -> f64 {
        match self.layout.position(alpha) {
            Some(p) => self.coeffs[p] * self.layout.factorials[p],
            None => 0.0,
        }
    }

    pub fn add(&self, other: &Jet) -> Jet {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Jet) -> Jet {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Jet {
        Jet {
            layout: self.layout.clone(),
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
        }
    }

    pub fn add_scalar(&self, c: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += c;
        out
    }

    /// Jet of `x ↦ f(x/k)` at the point where `self` is the jet of `f` at `x/k`.
    pub fn rescale_argument(&self, k: f64) -> Jet {
        let mut out = self.clone();
        for (p, a) in self.layout.indices.iter().enumerate() {
            out.coeffs[p] *= k.powi(-(a.degree() as i32));
        }
        out
    }

    pub fn mul(&self, other: &Jet) -> Jet {
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for &(i, j, k) in &self.layout.products {
            coeffs[k as usize] += self.coeffs[i as usize] * other.coeffs[j as usize];
        }
        Jet {
            layout: self.layout.clone(),
            coeffs,
        }
    }

    /// `φ ∘ self`, given `derivs[k] = φ^{(k)}(self.value())` for `k ≤ order`.
    pub fn compose(&self, derivs: &[f64]) -> Jet {
        let order = self.layout.order as usize;
        assert!(derivs.len() > order, "need derivatives up to the jet order");
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        let mut inv_fact = vec![1.0; order + 1];
        for k in 1..=order {
            inv_fact[k] = inv_fact[k - 1] / k as f64;
        }
        // Horner in the nilpotent part h
        let mut acc = Jet::constant(&self.layout, derivs[order] * inv_fact[order]);
        for k in (0..order).rev() {
            acc = acc.mul(&h);
            acc.coeffs[0] += derivs[k] * inv_fact[k];
        }
        acc
    }

    pub fn powf(&self, p: f64) -> Jet {
        let a = self.value();
        let order = self.layout.order as usize;
        let mut derivs = Vec::with_capacity(order + 1);
        let mut falling = 1.0;
        for k in 0..=order {
            derivs.push(falling * a.powf(p - k as f64));
            falling *= p - k as f64;
        }
        self.compose(&derivs)
    }

    pub fn recip(&self) -> Jet {
        self.powf(-1.0)
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        self.compose(&vec![e; self.layout.order as usize + 1])
    }

    fn zip(&self, other: &Jet, op: impl Fn(f64, f64) -> f64) -> Jet {
        debug_assert!(Arc::ptr_eq(&self.layout, &other.layout));
        Jet {
            layout: self.layout.clone(),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| op(*a, *b)).collect(),
        }
    }
}

/// Jet of `Σ_j (x_j − c_j)²` at `x`.
pub fn squared_distance_jet(layout: &Arc<JetLayout>, x: &[f64], center: &[f64]) -> Jet {
    let mut acc = Jet::constant(layout, 0.0);
    for j in 0..layout.nu() {
        let d = Jet::variable(layout, x, j).add_scalar(-center[j]);
        acc = acc.add(&d.mul(&d));
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn layout_is_graded() {
        let l = JetLayout::shared(2, 3);
        assert_eq!(l.len(), 10);
        assert_eq!(l.degree_range(2), 3..6);
        assert_eq!(l.indices()[l.degree_range(1).start], MultiIndex::new(vec![1, 0]));
        assert!(Arc::ptr_eq(&l, &JetLayout::shared(2, 3)));
    }

    #[test]
    fn product_of_variables() {
        let l = JetLayout::shared(2, 4);
        let x = [0.7, -1.3];
        let f = Jet::variable(&l, &x, 0).mul(&Jet::variable(&l, &x, 1));
        assert!(close(f.value(), -0.91, 1e-15));
        assert_eq!(f.partial(&MultiIndex::new(vec![1, 1])), 1.0);
        assert!(close(f.partial(&MultiIndex::new(vec![1, 0])), -1.3, 1e-15));
        assert_eq!(f.partial(&MultiIndex::new(vec![2, 0])), 0.0);
    }

    #[test]
    fn univariate_exp_and_power() {
        let l = JetLayout::shared(1, 6);
        let x = [0.4];
        let e = Jet::variable(&l, &x, 0).exp();
        for k in 0..=6 {
            assert!(close(e.partial(&MultiIndex::new(vec![k])), 0.4f64.exp(), 1e-13));
        }
        let p = Jet::variable(&l, &x, 0).add_scalar(1.0).powf(-2.5);
        // d³/dx³ (1+x)^{-2.5} = (-2.5)(-3.5)(-4.5)(1+x)^{-5.5}
        let expected = -2.5 * -3.5 * -4.5 * 1.4f64.powf(-5.5);
        assert!(close(p.partial(&MultiIndex::new(vec![3])), expected, 1e-12));
    }

    #[test]
    fn bracket_matches_finite_differences() {
        let l = JetLayout::shared(2, 3);
        let f = |x: &[f64]| squared_distance_jet(&l, x, &[0.2, -0.1]).add_scalar(1.0).powf(-1.0);
        let x = [0.5, 0.8];
        let jet = f(&x);
        let h = 1e-5;
        let d1 = (f(&[x[0], x[1] + h]).value() - f(&[x[0], x[1] - h]).value()) / (2.0 * h);
        assert!(close(jet.partial(&MultiIndex::new(vec![0, 1])), d1, 1e-8));
        let dx = |y: &[f64]| f(y).partial(&MultiIndex::new(vec![1, 0]));
        let mixed_fd = (dx(&[x[0], x[1] + h]) - dx(&[x[0], x[1] - h])) / (2.0 * h);
        assert!(close(jet.partial(&MultiIndex::new(vec![1, 1])), mixed_fd, 1e-7));
    }

    #[test]
    fn recip_inverts() {
        let l = JetLayout::shared(3, 4);
        let x = [0.3, -0.2, 1.1];
        let f = squared_distance_jet(&l, &x, &[0.0; 3]).add_scalar(2.0);
        let one = f.mul(&f.recip());
        assert!(close(one.value(), 1.0, 1e-14));
        assert!(one.coeffs()[1..].iter().all(|c| c.abs() < 1e-13));
    }
}
