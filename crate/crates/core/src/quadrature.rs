//! Adaptive Gauss–Kronrod quadrature for vector-valued integrands and
//! Chebyshev interpolation on an interval.

use crate::error::{Error, Result};
use crate::linalg::C64;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd Kronrod nodes 1, 3, 5 and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-14, rel_tol: 1e-12, max_intervals: 4096 }
    }
}

fn gk15<F>(f: &mut F, a: f64, b: f64, len: usize) -> (Vec<C64>, f64)
where
    F: FnMut(f64) -> Vec<C64>,
{
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kron = vec![C64::default(); len];
    let mut gauss = vec![C64::default(); len];
    let fc = f(centre);
    for i in 0..len {
        kron[i] += WGK[7] * fc[i];
        gauss[i] += WG[3] * fc[i];
    }
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(centre - dx);
        let f2 = f(centre + dx);
        for i in 0..len {
            let s = f1[i] + f2[i];
            kron[i] += WGK[j] * s;
            if j % 2 == 1 {
                gauss[i] += WG[j / 2] * s;
            }
        }
    }
    let mut err = 0.0f64;
    for i in 0..len {
        kron[i] *= half;
        gauss[i] *= half;
        err = err.max((kron[i] - gauss[i]).norm());
    }
    (kron, err)
}

/// `∫_a^b f(x) dx` for `f: ℝ → ℂ^len`, bisecting the interval with the
/// largest Kronrod–Gauss difference until the max-abs error estimate is
/// below `max(abs_tol, rel_tol·‖I‖)`.
pub fn integrate_vec<F>(mut f: F, a: f64, b: f64, len: usize, opts: QuadOptions) -> Result<Vec<C64>>
where
    F: FnMut(f64) -> Vec<C64>,
{
    if a == b {
        return Ok(vec![C64::default(); len]);
    }
    let (v, e) = gk15(&mut f, a, b, len);
    let mut pieces = vec![(a, b, v, e)];
    loop {
        let mut total = vec![C64::default(); len];
        let mut err = 0.0;
        for p in &pieces {
            for i in 0..len {
                total[i] += p.2[i];
            }
            err += p.3;
        }
        let scale = total.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if err <= opts.abs_tol.max(opts.rel_tol * scale) {
            return Ok(total);
        }
        if pieces.len() >= opts.max_intervals {
            return Err(Error::Integration(format!("quadrature did not converge: error estimate {err:.3e}")));
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let (lo, hi, _, _) = pieces.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&mut f, lo, mid, len);
        let (v2, e2) = gk15(&mut f, mid, hi, len);
        pieces.push((lo, mid, v1, e1));
        pieces.push((mid, hi, v2, e2));
    }
}

/// Chebyshev points of the second kind on `[a, b]`, ascending, endpoints included.
pub fn chebyshev_nodes(a: f64, b: f64, degree: usize) -> Vec<f64> {
    (0..=degree)
        .map(|j| {
            let x = -(std::f64::consts::PI * j as f64 / degree as f64).cos();
            0.5 * (a + b) + 0.5 * (b - a) * x
        })
        .map(|x| x.clamp(a, b))
        .collect()
}

/// Barycentric interpolation through values sampled at [`chebyshev_nodes`].
#[derive(Clone, Debug)]
pub struct ChebyshevInterpolant {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    values: Vec<Vec<C64>>,
}

impl ChebyshevInterpolant {
    pub fn new(nodes: Vec<f64>, values: Vec<Vec<C64>>) -> Self {
        let m = nodes.len();
        let weights = (0..m)
            .map(|j| {
                let w = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j + 1 == m {
                    0.5 * w
                } else {
                    w
                }
            })
            .collect();
        Self { nodes, weights, values }
    }

    pub fn eval(&self, x: f64) -> Vec<C64> {
        let len = self.values.first().map_or(0, Vec::len);
        if let Some(j) = self.nodes.iter().position(|&t| t == x) {
            return self.values[j].clone();
        }
        let mut num = vec![C64::default(); len];
        let mut den = 0.0;
        for (j, &t) in self.nodes.iter().enumerate() {
            let c = self.weights[j] / (x - t);
            den += c;
            for i in 0..len {
                num[i] += c * self.values[j][i];
            }
        }
        num.into_iter().map(|v| v / den).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_kronrod_smooth_and_oscillatory() {
        let v = integrate_vec(|x| vec![C64::new(x.cos(), (3.0 * x).sin())], 0.0, 2.0, 1, QuadOptions::default()).unwrap();
        assert!((v[0].re - 2f64.sin()).abs() < 1e-13);
        assert!((v[0].im - (1.0 - 6f64.cos()) / 3.0).abs() < 1e-13);
    }

    #[test]
    fn chebyshev_reproduces_exponential() {
        let nodes = chebyshev_nodes(0.0, 3.0, 40);
        let values = nodes.iter().map(|&t| vec![C64::new(0.0, 1.3 * t).exp() * (-0.4 * t).exp()]).collect();
        let p = ChebyshevInterpolant::new(nodes, values);
        for k in 0..50 {
            let t = 3.0 * k as f64 / 49.0 + 1e-3 * (k % 3) as f64;
            let t = t.min(3.0);
            let exact = C64::new(0.0, 1.3 * t).exp() * (-0.4 * t).exp();
            assert!((p.eval(t)[0] - exact).norm() < 1e-13);
        }
    }
}
