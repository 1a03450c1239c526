//! Quadrature and interpolation on uniform and Gauss–Legendre grids.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use num_traits::{Float, Zero};

type C = Complex64;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm1) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Composite Gauss–Legendre rule on consecutive panels `[b_k, b_{k+1}]`.
pub fn composite_gl(breaks: &[f64], rule: &(Vec<f64>, Vec<f64>)) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = rule;
    let mut nodes = Vec::with_capacity(gx.len() * breaks.len());
    let mut weights = Vec::with_capacity(gx.len() * breaks.len());
    for p in breaks.windows(2) {
        let (a, b) = (p[0], p[1]);
        let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
        for (x, w) in gx.iter().zip(gw) {
            nodes.push(m + h * x);
            weights.push(h.abs() * w);
        }
    }
    (nodes, weights)
}

/// Trapezoid rule for uniformly spaced complex samples.
pub fn trapezoid(v: &[C], h: f64) -> C {
    match v.len() {
        0 | 1 => C::zero(),
        n => {
            let inner: C = v[1..n - 1].iter().sum();
            (inner + 0.5 * (v[0] + v[n - 1])) * h
        }
    }
}

/// Trapezoid rule for real samples.
pub fn trapezoid_real(v: &[f64], h: f64) -> f64 {
    match v.len() {
        0 | 1 => 0.0,
        n => (v[1..n - 1].iter().sum::<f64>() + 0.5 * (v[0] + v[n - 1])) * h,
    }
}

/// Values halfway between uniform samples, sixth-order Lagrange, with the
/// samples extended by zero outside the grid. Entry `k` sits at `x_k + h/2`.
pub fn midpoints(v: &[C]) -> Vec<C> {
    let n = v.len();
    let at = |k: isize| -> C {
        if k < 0 || k as usize >= n {
            C::zero()
        } else {
            v[k as usize]
        }
    };
    (0..n.saturating_sub(1))
        .map(|k| {
            let k = k as isize;
            (3.0 * (at(k - 2) + at(k + 3)) - 25.0 * (at(k - 1) + at(k + 2)) + 150.0 * (at(k) + at(k + 1)))
                / 256.0
        })
        .collect()
}

const LAGRANGE_PTS: usize = 8;
// Barycentric weights (-1)^j C(7, j) for eight equispaced nodes.
const BARY: [f64; LAGRANGE_PTS] = [1.0, -7.0, 21.0, -35.0, 35.0, -21.0, 7.0, -1.0];

/// Complex function tabulated on `z0 + k dz`, read back with eight-point
/// Lagrange interpolation. Zero outside the table.
#[derive(Clone, Debug)]
pub struct UniformTable {
    pub z0: f64,
    pub dz: f64,
    pub values: Vec<C>,
}

impl UniformTable {
    pub fn new(z0: f64, dz: f64, values: Vec<C>) -> Self {
        UniformTable { z0, dz, values }
    }

    pub fn z_end(&self) -> f64 {
        self.z0 + (self.values.len().saturating_sub(1)) as f64 * self.dz
    }

    pub fn contains(&self, z: f64) -> bool {
        z >= self.z0 - 1e-12 * self.dz && z <= self.z_end() + 1e-12 * self.dz
    }

    pub fn eval(&self, z: f64) -> C {
        let n = self.values.len();
        if n == 0 || !self.contains(z) {
            return C::zero();
        }
        if n < LAGRANGE_PTS {
            let s = ((z - self.z0) / self.dz).round() as usize;
            return self.values[s.min(n - 1)];
        }
        let s = (z - self.z0) / self.dz;
        let i = (s.floor() as isize).clamp(0, n as isize - 1);
        let first = (i - 3).clamp(0, (n - LAGRANGE_PTS) as isize) as usize;
        let t = s - first as f64;
        let mut num = C::zero();
        let mut den = 0.0;
        for j in 0..LAGRANGE_PTS {
            let d = t - j as f64;
            if d.abs() < 1e-13 {
                return self.values[first + j];
            }
            let c = BARY[j] / d;
            num += self.values[first + j] * c;
            den += c;
        }
        num / den
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [1usize, 2, 5, 16, 20] {
            let (x, w) = gauss_legendre(n);
            let s: f64 = w.iter().sum();
            assert!((s - 2.0).abs() < 1e-14, "n={n}");
            for p in 0..2 * n {
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
                assert!((got - exact).abs() < 1e-13, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn composite_rule_on_exponential() {
        let rule = gauss_legendre(16);
        let (x, w) = composite_gl(&[0.0, 1.0, 3.0, 7.0], &rule);
        let got: f64 = x.iter().zip(&w).map(|(x, w)| w * (-x).exp()).sum();
        assert!((got - (1.0 - (-7.0f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn midpoint_interpolation_order() {
        let h = 0.05;
        let v: Vec<C> = (0..200).map(|k| C::new((k as f64 * h).sin(), 0.0)).collect();
        let m = midpoints(&v);
        for k in 10..190 {
            let exact = ((k as f64 + 0.5) * h).sin();
            assert!((m[k].re - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn table_interpolation() {
        let dz = 0.01;
        let vals: Vec<C> = (0..1000).map(|k| C::new(0.0, 3.0 * k as f64 * dz).exp()).collect();
        let t = UniformTable::new(0.0, dz, vals);
        for z in [0.0013, 1.2345, 5.0, 9.987] {
            let e = C::new(0.0, 3.0 * z).exp();
            assert!((t.eval(z) - e).norm() < 1e-12, "z={z}");
        }
        assert_eq!(t.eval(-1.0), C::zero());
    }

    #[test]
    fn trapezoid_gaussian_is_spectral() {
        let h = 0.1;
        let v: Vec<C> = (0..201).map(|k| C::new((-(k as f64 * h - 10.0).powi(2)).exp(), 0.0)).collect();
        assert!((trapezoid(&v, h).re - PI.sqrt()).abs() < 1e-13);
    }
}
