//! Reflectionless potentials in closed form.
//!
//! With `F(z) = -i Σ m_l e^{iλ_l z}` and `F̄(z) = i Σ m̄_k e^{-iλ̄_k z}` the
//! Marchenko kernels are finite exponential sums, `K₁(x,y) = Σ P_k e^{-iλ̄_k y}`
//! and `K̄₂(x,y) = Σ Q_k e^{iλ_k y}`, and the coefficients solve small linear
//! systems `(I - S_P) P = i m̄ e^{-iλ̄x}`, `(I - S_Q) Q = i m e^{iλx}`.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::{Float, Zero};

use crate::error::{Error, Result};
use crate::evolution::EXPONENT_CAP;
use crate::linalg::{CMat, Lu};
use crate::model::*;
use crate::I;

type C = Complex64;

/// Condition estimate above which a soliton system counts as singular.
pub const COND_LIMIT: f64 = 1e12;

/// Upper (`λ_l`, `m_l`) and lower (`λ̄_k`, `m̄_k`) data at a fixed time.
struct Spectrum {
    lam: Vec<C>,
    m: Vec<C>,
    lam_bar: Vec<C>,
    m_bar: Vec<C>,
}

impl Spectrum {
    fn new(upper: &[BoundState], lower: &[BoundState], dispersion: &DispersionSpec, t: f64) -> Result<Self> {
        for s in upper {
            if !(s.lambda.im > 0.0) {
                return Err(Error::InvalidInput(format!("upper state {} not in Im > 0", s.lambda)));
            }
        }
        for s in lower {
            if !(s.lambda.im < 0.0) {
                return Err(Error::InvalidInput(format!("lower state {} not in Im < 0", s.lambda)));
            }
        }
        if !t.is_finite() {
            return Err(Error::InvalidInput(format!("time {t} is not finite")));
        }
        if t != 0.0 {
            dispersion.validate()?;
        }
        let factor = |lam: C, sign: f64| -> Result<C> {
            if t == 0.0 {
                return Ok(C::new(1.0, 0.0));
            }
            let e = 2.0 * dispersion.eval(lam) * t;
            if !(e.norm() <= EXPONENT_CAP) {
                return Err(Error::Overflow { exponent: e.norm(), cap: EXPONENT_CAP });
            }
            Ok((sign * e).exp())
        };
        let mut m = Vec::with_capacity(upper.len());
        for s in upper {
            m.push(s.norming * factor(s.lambda, -1.0)?);
        }
        let mut m_bar = Vec::with_capacity(lower.len());
        for s in lower {
            m_bar.push(s.norming * factor(s.lambda, 1.0)?);
        }
        Ok(Spectrum {
            lam: upper.iter().map(|s| s.lambda).collect(),
            m,
            lam_bar: lower.iter().map(|s| s.lambda).collect(),
            m_bar,
        })
    }

    /// `I - S_P` and its right-hand side.
    fn p_system(&self, x: f64) -> (CMat, Vec<C>) {
        let nb = self.lam_bar.len();
        let mut s = CMat::identity(nb);
        for k in 0..nb {
            for j in 0..nb {
                let mut acc = C::zero();
                for l in 0..self.lam.len() {
                    let ph = I * (2.0 * self.lam[l] - self.lam_bar[k] - self.lam_bar[j]) * x;
                    acc += self.m[l] * self.m_bar[k] * ph.exp()
                        / ((self.lam[l] - self.lam_bar[k]) * (self.lam[l] - self.lam_bar[j]));
                }
                s.set(k, j, s.get(k, j) - acc);
            }
        }
        let rhs = (0..nb).map(|k| I * self.m_bar[k] * (-I * self.lam_bar[k] * x).exp()).collect();
        (s, rhs)
    }

    /// `I - S_Q` and its right-hand side.
    fn q_system(&self, x: f64) -> (CMat, Vec<C>) {
        let n = self.lam.len();
        let mut s = CMat::identity(n);
        for k in 0..n {
            for j in 0..n {
                let mut acc = C::zero();
                for l in 0..self.lam_bar.len() {
                    let ph = I * (self.lam[k] + self.lam[j] - 2.0 * self.lam_bar[l]) * x;
                    acc += self.m[k] * self.m_bar[l] * ph.exp()
                        / ((self.lam[j] - self.lam_bar[l]) * (self.lam[k] - self.lam_bar[l]));
                }
                s.set(k, j, s.get(k, j) - acc);
            }
        }
        let rhs = (0..n).map(|k| I * self.m[k] * (I * self.lam[k] * x).exp()).collect();
        (s, rhs)
    }

    fn at(&self, x: f64) -> Result<(C, C)> {
        let (mp, rp) = self.p_system(x);
        let p = solve_scaled(mp, rp, x)?;
        let k1: C = p.iter().zip(&self.lam_bar).map(|(pk, lb)| pk * (-I * lb * x).exp()).sum();
        let (mq, rq) = self.q_system(x);
        let q = solve_scaled(mq, rq, x)?;
        let k2: C = q.iter().zip(&self.lam).map(|(qk, l)| qk * (I * l * x).exp()).sum();
        Ok((-2.0 * k1, -2.0 * k2))
    }
}

/// Power-of-two row and column scalings bringing every row and column max
/// near one.
fn equilibrate(a: &CMat) -> (Vec<f64>, Vec<f64>) {
    let n = a.n;
    let pow2 = |v: f64| if v > 0.0 && v.is_finite() { 2f64.powi(-(v.log2().round() as i32)) } else { 1.0 };
    let rows: Vec<f64> = (0..n).map(|i| pow2(a.row(i).iter().map(|z| z.norm()).fold(0.0, f64::max))).collect();
    let cols: Vec<f64> = (0..n)
        .map(|j| pow2((0..n).map(|i| a.get(i, j).norm() * rows[i]).fold(0.0, f64::max)))
        .collect();
    (rows, cols)
}

/// Solve `A y = b` after equilibration, rejecting near-singular systems.
fn solve_scaled(a: CMat, b: Vec<C>, x: f64) -> Result<Vec<C>> {
    let n = a.n;
    if n == 0 {
        return Ok(Vec::new());
    }
    let (rows, cols) = equilibrate(&a);
    let scaled = CMat::from_fn(n, |i, j| a.get(i, j) * rows[i] * cols[j]);
    let lu = Lu::factor(scaled).map_err(|_| Error::SingularDeterminant { x, cond: f64::INFINITY })?;
    let cond = lu.cond1();
    if !(cond <= COND_LIMIT) {
        return Err(Error::SingularDeterminant { x, cond });
    }
    let rb: Vec<C> = b.iter().zip(&rows).map(|(v, r)| v * r).collect();
    Ok(lu.solve(&rb).into_iter().zip(&cols).map(|(v, c)| v * c).collect())
}

/// Reflectionless potential with the given bound states, evolved to `t`
/// under `dispersion`; normings are taken at time zero.
pub fn soliton_potential(
    upper: &[BoundState],
    lower: &[BoundState],
    dispersion: &DispersionSpec,
    x_grid: Grid,
    t: f64,
) -> Result<SampledPotential> {
    let sp = Spectrum::new(upper, lower, dispersion, t)?;
    let xs = x_grid.points();
    let vals = crate::par::map(&xs, |&x| sp.at(x));
    let mut q = Vec::with_capacity(xs.len());
    let mut r = Vec::with_capacity(xs.len());
    for v in vals {
        let (a, b) = v?;
        q.push(a);
        r.push(b);
    }
    SampledPotential::new(x_grid, q, r, t, CaseTag::Nls)
}

/// `Δ_P(x) = det(I - S_P)` and `Δ_Q(x) = det(I - S_Q)` at time `t`.
pub fn determinants(
    upper: &[BoundState],
    lower: &[BoundState],
    dispersion: &DispersionSpec,
    x: f64,
    t: f64,
) -> Result<(C, C)> {
    let sp = Spectrum::new(upper, lower, dispersion, t)?;
    let det = |m: CMat| Lu::factor(m).map(|lu| lu.det()).unwrap_or(C::zero());
    Ok((det(sp.p_system(x).0), det(sp.q_system(x).0)))
}

/// Slowest exponential decay rate of the tails, `2 min |Im λ|` over all states.
pub fn asymptotic_envelope(upper: &[BoundState], lower: &[BoundState]) -> Result<f64> {
    upper
        .iter()
        .chain(lower)
        .map(|s| 2.0 * s.lambda.im.abs())
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))))
        .ok_or(Error::EmptySpectrum)
}

/// Focusing pairs: each upper `(λ, m)` gets the lower partner `(λ*, m*)`.
pub fn focusing_pairs(upper: &[BoundState]) -> Vec<BoundState> {
    upper.iter().map(|s| BoundState::lower(s.lambda.conj(), s.norming.conj())).collect()
}

/// Upper norming giving the focusing one-soliton `2η sech(2η(x - x₀)) e^{-2iξx}`
/// for `λ = ξ + iη`.
pub fn one_soliton_norming(lambda: C, x0: f64) -> C {
    -I * 2.0 * lambda.im * (2.0 * lambda.im * x0).exp()
}

/// KdV reflectionless potential from purely imaginary upper states
/// `λ = iβ` with positive right normings at time zero, evolved to `t` under
/// `A₀ = -4iλ³` and reconstructed by the Marchenko solver.
pub fn kdv_soliton_potential(states: &[BoundState], x_grid: Grid, t: f64) -> Result<SampledPotential> {
    for s in states {
        if s.half_plane != HalfPlane::Upper || s.lambda.re != 0.0 || !(s.lambda.im > 0.0) {
            return Err(Error::InvalidInput(format!("KdV state {} must lie on the positive imaginary axis", s.lambda)));
        }
        if !(s.norming.re > 0.0) || s.norming.im != 0.0 {
            return Err(Error::InvalidInput(format!("KdV norming {} must be real positive", s.norming)));
        }
    }
    let sd = ScatteringData::reflectionless(states.to_vec(), DispersionSpec::kdv(), CaseTag::Kdv);
    let sd = crate::evolution::evolve(&sd, t)?;
    let k = crate::marchenko::build_kernels(&sd, x_grid.start, x_grid.end())?;
    crate::marchenko::solve_marchenko(&k, x_grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn sech_pair() -> (Vec<BoundState>, Vec<BoundState>) {
        (vec![BoundState::upper(c(0.0, 0.5), c(0.0, -1.0))], vec![BoundState::lower(c(0.0, -0.5), c(0.0, 1.0))])
    }

    #[test]
    fn empty_spectrum_gives_zero() {
        let p = soliton_potential(&[], &[], &DispersionSpec::nls(), Grid::linspace(-5.0, 5.0, 11), 0.3).unwrap();
        assert!(p.q.iter().chain(&p.r).all(|z| *z == C::zero()));
        assert_eq!(asymptotic_envelope(&[], &[]), Err(Error::EmptySpectrum));
    }

    #[test]
    fn one_soliton_is_sech() {
        let (u, l) = sech_pair();
        let p = soliton_potential(&u, &l, &DispersionSpec::nls(), Grid::linspace(-20.0, 20.0, 401), 0.0).unwrap();
        for (x, (q, r)) in p.x().iter().zip(p.q.iter().zip(&p.r)) {
            let e = 1.0 / x.cosh();
            assert!((q - e).norm() < 1e-13, "x={x} q={q}");
            assert!((r + e).norm() < 1e-13, "x={x} r={r}");
        }
    }

    #[test]
    fn one_soliton_moves_and_rotates() {
        // focusing NLS with speed: q = 2η sech(2η(x - x0 + 4ξt)) e^{-2iξx - 4i(ξ²-η²)t}
        let lam = c(0.3, 0.4);
        let x0 = 1.5;
        let u = vec![BoundState::upper(lam, one_soliton_norming(lam, x0))];
        let l = focusing_pairs(&u);
        let t = 0.7;
        let p = soliton_potential(&u, &l, &DispersionSpec::nls(), Grid::linspace(-15.0, 15.0, 301), t).unwrap();
        let (xi, eta) = (lam.re, lam.im);
        for (x, q) in p.x().iter().zip(&p.q) {
            let env = 2.0 * eta / (2.0 * eta * (x - x0 + 4.0 * xi * t)).cosh();
            assert!((q.norm() - env).abs() < 1e-12, "x={x}");
        }
        for (q, r) in p.q.iter().zip(&p.r) {
            assert!((r + q.conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn determinants_tend_to_one() {
        let u = vec![BoundState::upper(c(0.0, 0.5), c(0.0, -1.0)), BoundState::upper(c(0.0, 1.5), c(0.0, 3.0))];
        let l = focusing_pairs(&u);
        let (dp, dq) = determinants(&u, &l, &DispersionSpec::nls(), 30.0, 0.0).unwrap();
        assert!((dp - 1.0).norm() < 1e-8 && (dq - 1.0).norm() < 1e-8);
    }

    #[test]
    fn envelope_rates() {
        let (u, l) = sech_pair();
        assert_eq!(asymptotic_envelope(&u, &l).unwrap(), 1.0);
        let u2 = vec![BoundState::upper(c(0.0, 0.5), c(0.0, -1.0)), BoundState::upper(c(0.0, 1.5), c(0.0, 3.0))];
        assert_eq!(asymptotic_envelope(&u2, &focusing_pairs(&u2)).unwrap(), 1.0);
    }

    #[test]
    fn two_soliton_tail_follows_slowest_mode() {
        let u = vec![BoundState::upper(c(0.0, 0.5), c(0.0, -1.0)), BoundState::upper(c(0.0, 1.5), c(0.0, 3.0))];
        let l = focusing_pairs(&u);
        let p = soliton_potential(&u, &l, &DispersionSpec::nls(), Grid::linspace(-10.0, 30.0, 801), 0.0).unwrap();
        let x = p.x();
        let n = x.len();
        let (i0, i1) = (n - 81, n - 1);
        let slope = (p.q[i1].norm().ln() - p.q[i0].norm().ln()) / (x[i1] - x[i0]);
        assert!((slope + 1.0).abs() < 0.02, "slope {slope}");
    }

    #[test]
    fn kdv_one_soliton_travels_at_speed_four() {
        // 2 sech²(x - 4t) with β = 1, c = 2
        let st = vec![BoundState::upper(c(0.0, 1.0), c(2.0, 0.0))];
        let p = kdv_soliton_potential(&st, Grid::linspace(-10.0, 10.0, 201), 0.5).unwrap();
        for (x, q) in p.x().iter().zip(&p.q) {
            let e = 2.0 / (x - 2.0).cosh().powi(2);
            assert!((q.re - e).abs() < 1e-8, "x={x} q={q} want {e}");
        }
        assert!(kdv_soliton_potential(&[BoundState::upper(c(0.1, 1.0), c(2.0, 0.0))], Grid::linspace(0.0, 1.0, 9), 0.0).is_err());
    }

    #[test]
    fn wrong_half_plane_rejected() {
        let u = vec![BoundState::upper(c(0.0, -0.5), c(1.0, 0.0))];
        assert!(soliton_potential(&u, &[], &DispersionSpec::nls(), Grid::linspace(0.0, 1.0, 9), 0.0).is_err());
    }
}
