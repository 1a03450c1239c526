//! Scattering for `v'' + (λ² + q) v = 0` (the `r = -1` reduction).
//!
//! The Faddeev functions `m1 = e^{-iλx} f1 → 1` at `+∞` and
//! `m2 = e^{iλx} f2 → 1` at `-∞` are marched from the edge where they are
//! normalised: `m1'' + 2iλ m1' = -q m1`, `m2'' - 2iλ m2' = -q m2`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::{Float, Zero};

use crate::error::{Error, Result};
use crate::model::*;
use crate::quad;

type C = Complex64;

const SINGULAR: f64 = 1e-8;
const BLOWUP: f64 = 1e150;

/// `m1`, `m2` and their x-derivatives on the sample grid.
#[derive(Clone, Debug)]
pub struct FaddeevPair {
    pub lambda: C,
    pub m1: Vec<C>,
    pub m1_prime: Vec<C>,
    pub m2: Vec<C>,
    pub m2_prime: Vec<C>,
}

/// Coefficients at a single λ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KdvCoefficients {
    /// `1/T` from `m1`.
    pub inv_t: C,
    /// `1/T` recomputed from `m2`; agrees with `inv_t` to discretisation error.
    pub inv_t_left: C,
    /// `R1/T`, right reflection.
    pub r1_over_t: C,
    /// `R2/T`, left reflection.
    pub r2_over_t: C,
}

fn check(p: &SampledPotential) -> Result<()> {
    p.check()?;
    if p.case_tag != CaseTag::Kdv {
        return Err(Error::InvalidInput(String::from("expected a KdV-case potential")));
    }
    Ok(())
}

/// RK4 for `m'' = s·2iλ m' - q m` (`s = -1` for `m1`, `+1` for `m2`),
/// stepping from grid index `from` toward `to`.
fn march(p: &SampledPotential, qm: &[C], lam: C, sign: f64, leftward: bool) -> Result<(Vec<C>, Vec<C>)> {
    let n = p.grid().len;
    let h = if leftward { -p.grid().step } else { p.grid().step };
    let k2 = C::new(0.0, 2.0 * sign) * lam;
    let f = |q: C, y: [C; 2]| -> [C; 2] { [y[1], k2 * y[1] - q * y[0]] };
    let mut m = vec![C::zero(); n];
    let mut mp = vec![C::zero(); n];
    let mut y = [C::new(1.0, 0.0), C::zero()];
    let start = if leftward { n - 1 } else { 0 };
    m[start] = y[0];
    mp[start] = y[1];
    for s in 0..n - 1 {
        let (k, next, mid) = if leftward { (n - 1 - s, n - 2 - s, n - 2 - s) } else { (s, s + 1, s) };
        let (q0, qh, q1) = (p.q[k], qm[mid], p.q[next]);
        let hh = 0.5 * h;
        let a = f(q0, y);
        let b = f(qh, [y[0] + hh * a[0], y[1] + hh * a[1]]);
        let c = f(qh, [y[0] + hh * b[0], y[1] + hh * b[1]]);
        let d = f(q1, [y[0] + h * c[0], y[1] + h * c[1]]);
        let w = h / 6.0;
        y = [
            y[0] + w * (a[0] + 2.0 * (b[0] + c[0]) + d[0]),
            y[1] + w * (a[1] + 2.0 * (b[1] + c[1]) + d[1]),
        ];
        if !(y[0].norm_sqr() + y[1].norm_sqr() < BLOWUP * BLOWUP) {
            return Err(Error::NoConvergence(format!("Faddeev march overflowed at lambda = {lam}")));
        }
        m[next] = y[0];
        mp[next] = y[1];
    }
    Ok((m, mp))
}

/// Faddeev functions at `λ` (`Im λ ≥ 0`).
pub fn faddeev_solve(p: &SampledPotential, lambda: C) -> Result<FaddeevPair> {
    check(p)?;
    if lambda.norm() < SINGULAR {
        return Err(Error::SingularLambda(lambda.norm()));
    }
    let qm = quad::midpoints(&p.q);
    let (m1, m1_prime) = march(p, &qm, lambda, -1.0, true)?;
    let (m2, m2_prime) = march(p, &qm, lambda, 1.0, false)?;
    Ok(FaddeevPair { lambda, m1, m1_prime, m2, m2_prime })
}

fn weighted(p: &SampledPotential, m: &[C], lam: C, sign: f64) -> C {
    let g = p.grid();
    let v: Vec<C> = (0..g.len)
        .map(|k| {
            let ph = if sign == 0.0 { C::new(1.0, 0.0) } else { (C::new(0.0, 2.0 * sign) * lam * g.at(k)).exp() };
            ph * p.q[k] * m[k]
        })
        .collect();
    quad::trapezoid(&v, g.step)
}

/// `1/T`, `R1/T`, `R2/T` at `λ`.
pub fn kdv_coefficients(p: &SampledPotential, lambda: C) -> Result<KdvCoefficients> {
    let fp = faddeev_solve(p, lambda)?;
    Ok(coefficients_from(p, &fp))
}

fn coefficients_from(p: &SampledPotential, fp: &FaddeevPair) -> KdvCoefficients {
    let lam = fp.lambda;
    let k = 1.0 / (C::new(0.0, 2.0) * lam);
    KdvCoefficients {
        inv_t: 1.0 + k * weighted(p, &fp.m1, lam, 0.0),
        inv_t_left: 1.0 + k * weighted(p, &fp.m2, lam, 0.0),
        r1_over_t: -k * weighted(p, &fp.m2, lam, -1.0),
        r2_over_t: -k * weighted(p, &fp.m1, lam, 1.0),
    }
}

/// Scattering data on a real grid; slots are `a = ā = 1/T`, `b = R1/T`,
/// `b̄ = R2/T`. The grid must avoid `λ = 0`.
pub fn kdv_scattering_data(p: &SampledPotential, lambda: &[f64]) -> Result<ScatteringData> {
    check(p)?;
    let qm = quad::midpoints(&p.q);
    let rows = crate::par::map(lambda, |&l| -> Result<KdvCoefficients> {
        let lam = C::new(l, 0.0);
        if lam.norm() < SINGULAR || !l.is_finite() {
            return Err(Error::SingularLambda(l.abs()));
        }
        let (m1, m1_prime) = march(p, &qm, lam, -1.0, true)?;
        let (m2, m2_prime) = march(p, &qm, lam, 1.0, false)?;
        Ok(coefficients_from(p, &FaddeevPair { lambda: lam, m1, m1_prime, m2, m2_prime }))
    });
    let mut sd = ScatteringData {
        lambda_grid: lambda.to_vec(),
        a: Vec::new(),
        b: Vec::new(),
        a_bar: Vec::new(),
        b_bar: Vec::new(),
        bound_states: Vec::new(),
        dispersion: DispersionSpec::kdv(),
        case_tag: CaseTag::Kdv,
        t: p.t,
    };
    for r in rows {
        let c = r?;
        sd.a.push(c.inv_t);
        sd.b.push(c.r1_over_t);
        sd.a_bar.push(c.inv_t);
        sd.b_bar.push(c.r2_over_t);
    }
    Ok(sd)
}

/// Largest `| |T|² + |R1|² - 1 |` over the grid.
pub fn kdv_unitarity_defect(sd: &ScatteringData) -> f64 {
    sd.a.iter()
        .zip(&sd.b)
        .map(|(a, b)| {
            let t = 1.0 / a;
            let r = b * t;
            (t.norm_sqr() + r.norm_sqr() - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

fn inv_t_imag_axis(p: &SampledPotential, qm: &[C], beta: f64) -> Result<f64> {
    let lam = C::new(0.0, beta);
    let (m1, _) = march(p, qm, lam, -1.0, true)?;
    Ok((1.0 + weighted(p, &m1, lam, 0.0) / (C::new(0.0, 2.0) * lam)).re)
}

const BETA_SAMPLES: usize = 400;

/// Bound states `λ = iβ` with right/left normings `c_R`, `c_L`.
///
/// Zeros of `1/T(iβ)` are bracketed on `(0, beta_max]` and refined by
/// bisection-secant. The search stops at `sqrt(max q)`, beyond which no
/// eigenvalue can exist.
pub fn kdv_bound_states(p: &SampledPotential, beta_max: f64) -> Result<Vec<BoundState>> {
    check(p)?;
    if !(beta_max > 0.0) {
        return Err(Error::InvalidInput(String::from("beta_max must be positive")));
    }
    let qmax = p.q.iter().map(|z| z.re).fold(0.0, f64::max);
    if qmax <= 0.0 {
        return Ok(Vec::new());
    }
    let bmax = beta_max.min(qmax.sqrt() * 1.001 + 1e-6);
    let bmin = bmax * 1e-3;
    let qm = quad::midpoints(&p.q);
    let betas: Vec<f64> = (0..=BETA_SAMPLES)
        .map(|k| bmin + (bmax - bmin) * k as f64 / BETA_SAMPLES as f64)
        .collect();
    let vals = crate::par::map(&betas, |&b| inv_t_imag_axis(p, &qm, b));
    let vals = vals.into_iter().collect::<Result<Vec<f64>>>()?;
    let mut out = Vec::new();
    for k in 0..BETA_SAMPLES {
        let (g0, g1) = (vals[k], vals[k + 1]);
        if g0 == 0.0 || g0.signum() != g1.signum() {
            let beta = refine(|b| inv_t_imag_axis(p, &qm, b), betas[k], betas[k + 1], g0, g1)?;
            out.push(normings(p, &qm, beta)?);
        }
    }
    Ok(out)
}

fn refine(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64) -> Result<f64> {
    if fa == 0.0 {
        return Ok(a);
    }
    for it in 0..200 {
        let secant = b - fb * (b - a) / (fb - fa);
        let mid = 0.5 * (a + b);
        let x = if it % 3 == 2 || !(secant > a.min(b) && secant < a.max(b)) { mid } else { secant };
        let fx = f(x)?;
        if fx == 0.0 || (b - a).abs() < 1e-14 * b.abs().max(1.0) {
            return Ok(x);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
    }
    Err(Error::BracketFailure(format!("no convergence in [{a}, {b}]")))
}

fn normings(p: &SampledPotential, qm: &[C], beta: f64) -> Result<BoundState> {
    let lam = C::new(0.0, beta);
    let (m1, _) = march(p, qm, lam, -1.0, true)?;
    let (m2, _) = march(p, qm, lam, 1.0, false)?;
    let g = p.grid();
    let resid = (1.0 + weighted(p, &m1, lam, 0.0) / (C::new(0.0, 2.0) * lam)).norm();
    if resid > 1e-8 {
        return Err(Error::BracketFailure(format!("1/T(i{beta}) = {resid:.3e} after refinement")));
    }
    // f1 = e^{-βx} m1, f2 = e^{βx} m2; both real at a bound state
    let f1: Vec<f64> = (0..g.len).map(|k| (-beta * g.at(k)).exp() * m1[k].re).collect();
    let f2: Vec<f64> = (0..g.len).map(|k| (beta * g.at(k)).exp() * m2[k].re).collect();
    // each march is only trustworthy up to the well: past it a tiny residual
    // in 1/T(iβ) feeds the growing solution. Splice f2 (left) and f1 (right)
    // at the peak, using f1 = γ f2.
    let m = (0..g.len).max_by(|&i, &j| f1[i].abs().total_cmp(&f1[j].abs())).unwrap_or(0);
    let gamma = f1[m] / f2[m];
    let sq = |f: &[f64]| -> Vec<f64> { f.iter().map(|v| v * v).collect() };
    let right = quad::trapezoid_real(&sq(&f1[m..]), g.step) + f1[g.len - 1].powi(2) / (2.0 * beta);
    let left = quad::trapezoid_real(&sq(&f2[..=m]), g.step) + f2[0].powi(2) / (2.0 * beta);
    let norm1 = right + gamma * gamma * left;
    let c_r = 1.0 / norm1;
    let c_l = gamma * gamma / norm1;
    Ok(BoundState::upper(lam, C::new(c_r, 0.0)).with_left(C::new(c_l, 0.0)))
}

/// Continuation of `b = R1/T` into `Im λ ≥ 0`; also returns `max |m2|`.
pub(crate) fn extend_b_kdv(p: &SampledPotential, lambda: C) -> Result<(C, f64)> {
    if lambda.norm() < SINGULAR {
        return Err(Error::SingularLambda(lambda.norm()));
    }
    let qm = quad::midpoints(&p.q);
    let (m2, _) = march(p, &qm, lambda, 1.0, false)?;
    let mmax = m2.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let k = 1.0 / (C::new(0.0, 2.0) * lambda);
    Ok((-k * weighted(p, &m2, lambda, -1.0), mmax))
}
