//! Dense complex linear algebra: LU with partial pivoting and a 1-norm
//! condition estimate. Sizes here are a few hundred at most.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::{Float, Zero};

type C = Complex64;

/// Row-major square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMat {
    pub n: usize,
    pub data: Vec<C>,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        CMat { n, data: vec![C::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = C::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        CMat { n, data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[C] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// `self * other`.
    pub fn mul(&self, other: &CMat) -> CMat {
        let n = self.n;
        let mut out = CMat::zeros(n);
        for i in 0..n {
            let orow = &mut out.data[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.data[i * n + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let brow = &other.data[k * n..(k + 1) * n];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[C]) -> Vec<C> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(v).fold(C::zero(), |s, (a, b)| s + a * b))
            .collect()
    }

    pub fn add_identity(&mut self) {
        for i in 0..self.n {
            self.data[i * self.n + i] += C::new(1.0, 0.0);
        }
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        let n = self.n;
        let mut col = vec![0.0f64; n];
        for i in 0..n {
            for (j, c) in col.iter_mut().enumerate() {
                *c += self.data[i * n + j].norm();
            }
        }
        col.into_iter().fold(0.0, f64::max)
    }
}

/// The factorization hit an exactly zero pivot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Singular;

/// `P A = L U` with unit lower `L`.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: CMat,
    perm: Vec<usize>,
    sign: f64,
    anorm: f64,
}

impl Lu {
    pub fn factor(mut a: CMat) -> Result<Self, Singular> {
        let n = a.n;
        let anorm = a.norm1();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let mut p = k;
            let mut best = a.data[k * n + k].l1_norm();
            for i in k + 1..n {
                let v = a.data[i * n + k].l1_norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Singular);
            }
            if p != k {
                for j in 0..n {
                    a.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = a.data[k * n + k];
            let inv = C::new(1.0, 0.0) / pivot;
            let (top, bottom) = a.data.split_at_mut((k + 1) * n);
            let krow = &top[k * n + k + 1..k * n + n];
            for i in 0..n - k - 1 {
                let row = &mut bottom[i * n..(i + 1) * n];
                let l = row[k] * inv;
                row[k] = l;
                if l.re == 0.0 && l.im == 0.0 {
                    continue;
                }
                for (x, u) in row[k + 1..].iter_mut().zip(krow) {
                    *x -= l * u;
                }
            }
        }
        Ok(Lu { lu: a, perm, sign, anorm })
    }

    pub fn n(&self) -> usize {
        self.lu.n
    }

    pub fn solve(&self, b: &[C]) -> Vec<C> {
        let n = self.lu.n;
        let mut x: Vec<C> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let mut s = x[i];
            for j in 0..i {
                s -= row[j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let mut s = x[i];
            for j in i + 1..n {
                s -= row[j] * x[j];
            }
            x[i] = s / row[i];
        }
        x
    }

    /// Solve `A^H x = b`.
    pub fn solve_adjoint(&self, b: &[C]) -> Vec<C> {
        let n = self.lu.n;
        let mut w = b.to_vec();
        // U^H w = b, forward
        for i in 0..n {
            let mut s = w[i];
            for j in 0..i {
                s -= self.lu.get(j, i).conj() * w[j];
            }
            w[i] = s / self.lu.get(i, i).conj();
        }
        // L^H v = w, backward
        for i in (0..n).rev() {
            let mut s = w[i];
            for j in i + 1..n {
                s -= self.lu.get(j, i).conj() * w[j];
            }
            w[i] = s;
        }
        let mut x = vec![C::zero(); n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = w[i];
        }
        x
    }

    pub fn det(&self) -> C {
        let mut d = C::new(self.sign, 0.0);
        for i in 0..self.lu.n {
            d *= self.lu.get(i, i);
        }
        d
    }

    /// Hager/Higham estimate of `‖A‖₁ ‖A⁻¹‖₁`.
    pub fn cond1(&self) -> f64 {
        let n = self.lu.n;
        if n == 0 {
            return 1.0;
        }
        let nf = n as f64;
        let mut x = vec![C::new(1.0 / nf, 0.0); n];
        let mut est = 0.0f64;
        let mut last_j = usize::MAX;
        for _ in 0..5 {
            let y = self.solve(&x);
            est = est.max(y.iter().map(|v| v.norm()).sum());
            let xi: Vec<C> = y
                .iter()
                .map(|v| {
                    let m = v.norm();
                    if m == 0.0 {
                        C::new(1.0, 0.0)
                    } else {
                        v / m
                    }
                })
                .collect();
            let z = self.solve_adjoint(&xi);
            let (j, zmax) = z
                .iter()
                .enumerate()
                .map(|(k, v)| (k, v.norm()))
                .fold((0, -1.0), |b, c| if c.1 > b.1 { c } else { b });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| (a.conj() * b).re).sum();
            if zmax <= ztx || j == last_j {
                break;
            }
            last_j = j;
            x = vec![C::zero(); n];
            x[j] = C::new(1.0, 0.0);
        }
        let alt: Vec<C> = (0..n)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                C::new(s * (1.0 + i as f64 / (nf - 1.0).max(1.0)), 0.0)
            })
            .collect();
        let y = self.solve(&alt);
        let alt_est = 2.0 * y.iter().map(|v| v.norm()).sum::<f64>() / (3.0 * nf);
        self.anorm * est.max(alt_est)
    }
}

/// Solve `A x = b` and report the condition estimate.
pub fn solve_with_cond(a: CMat, b: &[C]) -> Result<(Vec<C>, f64), Singular> {
    let lu = Lu::factor(a)?;
    let c = lu.cond1();
    Ok((lu.solve(b), c))
}
