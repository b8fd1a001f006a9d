use std::sync::Arc;

use crate::jet::{Jet, JetLayout};

/// Smooth even bump: 1 on `[-1/2, 1/2]`, 0 outside `(-1, 1)`.
///
/// `κ(x) = σ(2(1 − |x|))` with `σ(t) = ψ(t)/(ψ(t) + ψ(1 − t))`, `ψ(t) = e^{−1/t}`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Bump;

fn psi(t: f64) -> f64 {
    if t <= 0.0 { 0.0 } else { (-1.0 / t).exp() }
}

impl Bump {
    pub const PLATEAU: f64 = 0.5;
    pub const SUPPORT: f64 = 1.0;

    pub fn value(&self, x: f64) -> f64 {
        let a = x.abs();
        if a <= Self::PLATEAU {
            1.0
        } else if a >= Self::SUPPORT {
            0.0
        } else {
            let t = 2.0 * (1.0 - a);
            let p = psi(t);
            p / (p + psi(1.0 - t))
        }
    }

    /// `(κ(x), κ'(x))`.
    pub fn value_and_derivative(&self, x: f64) -> (f64, f64) {
        let a = x.abs();
        if a <= Self::PLATEAU {
            return (1.0, 0.0);
        }
        if a >= Self::SUPPORT {
            return (0.0, 0.0);
        }
        let t = 2.0 * (1.0 - a);
        let (p, q) = (psi(t), psi(1.0 - t));
        let dp = p / (t * t);
        let dq = q / ((1.0 - t) * (1.0 - t));
        let s = p + q;
        let dsigma = (dp * q + p * dq) / (s * s);
        (p / s, -2.0 * x.signum() * dsigma)
    }

    /// `κ^{(k)}(x)` for `k = 0..=order`.
    pub fn derivatives(&self, x: f64, order: u32) -> Vec<f64> {
        let a = x.abs();
        let mut out = vec![0.0; order as usize + 1];
        if a <= Self::PLATEAU {
            out[0] = 1.0;
            return out;
        }
        if a >= Self::SUPPORT {
            return out;
        }
        let layout = JetLayout::shared(1, order);
        let sign = x.signum();
        // t = 2(1 − |x|) as a jet in x
        let t = Jet::variable(&layout, &[x], 0).scale(-2.0 * sign).add_scalar(2.0);
        let one_minus_t = t.scale(-1.0).add_scalar(1.0);
        let p = psi_jet(&t);
        let q = psi_jet(&one_minus_t);
        let sigma = p.mul(&p.add(&q).recip());
        let mut kfact = 1.0;
        for (k, slot) in out.iter_mut().enumerate() {
            if k > 0 {
                kfact *= k as f64;
            }
            *slot = sigma.coeffs()[k] * kfact;
        }
        out
    }

    /// Univariate jet of `x ↦ κ(x)` lifted to axis `j` of `layout`.
    pub fn jet_on_axis(&self, layout: &Arc<JetLayout>, j: usize, x: f64) -> Jet {
        Jet::univariate(layout, j, &self.derivatives(x, layout.order()))
    }
}

fn psi_jet(t: &Jet) -> Jet {
    if t.value() <= 0.0 {
        return Jet::constant(t.layout(), 0.0);
    }
    t.recip().scale(-1.0).exp()
}
