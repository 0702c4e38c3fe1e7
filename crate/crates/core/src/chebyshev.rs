//! Tensor Chebyshev interpolation helpers.

use std::f64::consts::PI;

/// Chebyshev points of the first kind on `[-1, 1]` with barycentric weights.
#[derive(Debug, Clone)]
pub(crate) struct Chebyshev {
    pub(crate) nodes: Vec<f64>,
    bary: Vec<f64>,
}

impl Chebyshev {
    pub(crate) fn new(q: usize) -> Self {
        let theta = |k: usize| (2 * k + 1) as f64 * PI / (2 * q) as f64;
        Self {
            nodes: (0..q).map(|k| theta(k).cos()).collect(),
            bary: (0..q).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 } * theta(k).sin()).collect(),
        }
    }

    pub(crate) fn q(&self) -> usize {
        self.nodes.len()
    }

    /// Lagrange basis values at `t`.
    pub(crate) fn lagrange(&self, t: f64, out: &mut [f64]) {
        if let Some(k) = self.nodes.iter().position(|&n| n == t) {
            out.iter_mut().for_each(|v| *v = 0.0);
            out[k] = 1.0;
            return;
        }
        let mut s = 0.0;
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.bary[k] / (t - self.nodes[k]);
            s += *o;
        }
        out.iter_mut().for_each(|v| *v /= s);
    }

    /// Lagrange basis values and derivatives at `t`, by the product rule.
    pub(crate) fn lagrange_d(&self, t: f64, val: &mut [f64], der: &mut [f64]) {
        let q = self.q();
        for k in 0..q {
            let mut v = 1.0;
            let mut d = 0.0;
            for j in 0..q {
                if j == k {
                    continue;
                }
                let den = self.nodes[k] - self.nodes[j];
                d = d * (t - self.nodes[j]) / den + v / den;
                v *= (t - self.nodes[j]) / den;
            }
            val[k] = v;
            der[k] = d;
        }
    }
}
