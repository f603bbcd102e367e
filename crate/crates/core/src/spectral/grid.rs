use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_GRID: usize = 4096;

/// Gauss-Legendre nodes and weights mapped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureGrid {
    pub fn gauss_legendre(m: usize) -> Result<Self> {
        if !(2..=MAX_GRID).contains(&m) {
            return Err(Error::InvalidGrid {
                got: m,
                max: MAX_GRID,
            });
        }
        let mut nodes = vec![0.0; m];
        let mut weights = vec![0.0; m];
        // Roots come out descending on [-1, 1]; store them ascending on [0, 1].
        for i in 0..m.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(m, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(m, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // symmetric pair
            nodes[i] = 0.5 * (1.0 - x);
            nodes[m - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[m - 1 - i] = 0.5 * w;
        }
        if m % 2 == 1 {
            nodes[m / 2] = 0.5;
        }
        Ok(QuadratureGrid { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `sum_i w_i f(x_i)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Legendre polynomial `P_n(x)` and its derivative by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
