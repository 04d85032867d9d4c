//! Natural cubic splines on strictly increasing knots.

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        if n != ys.len() || n < 2 {
            return Err(Error::InvalidArgument(format!(
                "spline needs matching knots and values (got {} and {})",
                n,
                ys.len()
            )));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("spline knots must increase strictly".into()));
        }
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm for the interior second derivatives.
            let mut c_prime = vec![0.0; n];
            let mut d_prime = vec![0.0; n];
            for i in 1..n - 1 {
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                let a = h0;
                let b = 2.0 * (h0 + h1);
                let c = h1;
                let d = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
                let denom = b - a * c_prime[i - 1];
                c_prime[i] = c / denom;
                d_prime[i] = (d - a * d_prime[i - 1]) / denom;
            }
            for i in (1..n - 1).rev() {
                m[i] = d_prime[i] - c_prime[i] * m[i + 1];
            }
        }
        Ok(CubicSpline { xs, ys, m })
    }

    /// Value at `x`; outside the knots the end cubic is extended.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let i = match self.xs.partition_point(|&k| k <= x) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}

/// Several splines sharing one set of knots.
#[derive(Clone, Debug)]
pub struct VectorSpline {
    components: Vec<CubicSpline>,
}

impl VectorSpline {
    /// `values[i]` is the vector at `xs[i]`; all vectors must have equal length.
    pub fn new(xs: &[f64], values: &[Vec<f64>]) -> Result<Self> {
        let width = values.first().map(Vec::len).unwrap_or(0);
        if values.iter().any(|v| v.len() != width) {
            return Err(Error::InvalidArgument("ragged spline values".into()));
        }
        let components = (0..width)
            .map(|k| CubicSpline::new(xs.to_vec(), values.iter().map(|v| v[k]).collect()))
            .collect::<Result<Vec<_>>>()?;
        Ok(VectorSpline { components })
    }

    pub fn eval(&self, x: f64) -> Vec<f64> {
        self.components.iter().map(|s| s.eval(x)).collect()
    }

    pub fn width(&self) -> usize {
        self.components.len()
    }
}
