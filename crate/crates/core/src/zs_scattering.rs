//! Direct scattering for `v1' + iλ v1 = q v2`, `v2' - iλ v2 = r v1`.
//!
//! Jost solutions are integrated in the gauge `v = (e^{-iλx} u1, e^{iλx} u2)`,
//! where the system reads `u1' = q e^{2iλx} u2`, `u2' = r e^{-2iλx} u1`, with
//! classical RK4 on the sample grid and sixth-order midpoint interpolation
//! of the potential.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use num_traits::{Float, Zero};
use serde::{Deserialize, Serialize};

use crate::certifier;
use crate::error::{Error, Result};
use crate::model::*;
use crate::quad;
use crate::schrodinger_scattering;

type C = Complex64;

const BLOWUP: f64 = 1e150;
const RESYNC: usize = 32;
const FD_STEP: f64 = 1e-5;

/// Which Jost solution to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Jost {
    /// `(1, 0) e^{-iλx}` at `-∞`.
    Phi,
    /// `(0, -1) e^{iλx}` at `-∞`.
    PhiBar,
    /// `(0, 1) e^{iλx}` at `+∞`.
    Psi,
    /// `(1, 0) e^{-iλx}` at `+∞`.
    PsiBar,
}

/// Rectangle `[re_lo, re_hi] × [im_lo, im_hi]` in the upper half plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub re_lo: f64,
    pub re_hi: f64,
    pub im_lo: f64,
    pub im_hi: f64,
}

impl SearchBox {
    pub fn new(re_lo: f64, re_hi: f64, im_lo: f64, im_hi: f64) -> Self {
        SearchBox { re_lo, re_hi, im_lo, im_hi }
    }

    /// Box large enough for the discrete spectrum of `p`.
    pub fn default_for(p: &SampledPotential) -> Self {
        let m = p.q.iter().chain(&p.r).map(|z| z.norm()).fold(0.0, f64::max);
        let h = 1.1 * m + 0.1;
        SearchBox::new(-h, h, 0.01, h)
    }

    fn validate(&self) -> Result<()> {
        let ok = self.re_lo < self.re_hi && self.im_lo < self.im_hi && self.im_lo > 0.0;
        if ok && [self.re_lo, self.re_hi, self.im_lo, self.im_hi].iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidInput(String::from("search box must be a finite rectangle in Im > 0")))
        }
    }

    fn contains(&self, z: C) -> bool {
        z.re > self.re_lo && z.re < self.re_hi && z.im > self.im_lo && z.im < self.im_hi
    }

    fn quarters(&self) -> [SearchBox; 4] {
        let mr = 0.5 * (self.re_lo + self.re_hi);
        let mi = 0.5 * (self.im_lo + self.im_hi);
        [
            SearchBox::new(self.re_lo, mr, self.im_lo, mi),
            SearchBox::new(mr, self.re_hi, self.im_lo, mi),
            SearchBox::new(self.re_lo, mr, mi, self.im_hi),
            SearchBox::new(mr, self.re_hi, mi, self.im_hi),
        ]
    }
}

/// Gauge-transformed ZS integrator bound to one potential.
pub(crate) struct Zs<'a> {
    p: &'a SampledPotential,
    qm: Vec<C>,
    rm: Vec<C>,
}

type Pair = [C; 2];

impl<'a> Zs<'a> {
    pub(crate) fn new(p: &'a SampledPotential) -> Self {
        Zs { p, qm: quad::midpoints(&p.q), rm: quad::midpoints(&p.r) }
    }

    fn diverged(lam: C) -> Error {
        Error::DivergedIntegration { re: lam.re, im: lam.im }
    }

    /// March `M` solutions from the left edge to the right edge. `visit` sees
    /// every grid index with the current gauge vectors.
    pub(crate) fn march_right<const M: usize>(
        &self,
        lam: C,
        mut u: [Pair; M],
        mut visit: impl FnMut(usize, &[Pair; M]),
    ) -> Result<[Pair; M]> {
        let g = self.p.grid();
        let n = g.len;
        let h = g.step;
        let i2 = C::new(0.0, 2.0) * lam;
        let half = (C::new(0.0, 1.0) * lam * h).exp();
        let half_inv = 1.0 / half;
        let (mut e, mut ei) = (C::zero(), C::zero());
        visit(0, &u);
        for k in 0..n - 1 {
            if k % RESYNC == 0 {
                e = (i2 * g.at(k)).exp();
                ei = (-i2 * g.at(k)).exp();
            }
            let (em, eim) = (e * half, ei * half_inv);
            let (e1, ei1) = (em * half, eim * half_inv);
            let a0 = self.p.q[k] * e;
            let b0 = self.p.r[k] * ei;
            let am = self.qm[k] * em;
            let bm = self.rm[k] * eim;
            let a1 = self.p.q[k + 1] * e1;
            let b1 = self.p.r[k + 1] * ei1;
            let mut bad = false;
            for v in u.iter_mut() {
                *v = rk4([a0, am, a1], [b0, bm, b1], *v, h);
                bad |= !(v[0].norm_sqr() + v[1].norm_sqr() < BLOWUP * BLOWUP);
            }
            if bad {
                return Err(Self::diverged(lam));
            }
            e = e1;
            ei = ei1;
            visit(k + 1, &u);
        }
        Ok(u)
    }

    /// March from the right edge to the left edge.
    pub(crate) fn march_left<const M: usize>(
        &self,
        lam: C,
        mut u: [Pair; M],
        mut visit: impl FnMut(usize, &[Pair; M]),
    ) -> Result<[Pair; M]> {
        let g = self.p.grid();
        let n = g.len;
        let h = -g.step;
        let i2 = C::new(0.0, 2.0) * lam;
        let half = (C::new(0.0, 1.0) * lam * h).exp();
        let half_inv = 1.0 / half;
        let (mut e, mut ei) = (C::zero(), C::zero());
        visit(n - 1, &u);
        for (step, k) in (1..n).rev().enumerate() {
            if step % RESYNC == 0 {
                e = (i2 * g.at(k)).exp();
                ei = (-i2 * g.at(k)).exp();
            }
            let (em, eim) = (e * half, ei * half_inv);
            let (e1, ei1) = (em * half, eim * half_inv);
            let a0 = self.p.q[k] * e;
            let b0 = self.p.r[k] * ei;
            let am = self.qm[k - 1] * em;
            let bm = self.rm[k - 1] * eim;
            let a1 = self.p.q[k - 1] * e1;
            let b1 = self.p.r[k - 1] * ei1;
            let mut bad = false;
            for v in u.iter_mut() {
                *v = rk4([a0, am, a1], [b0, bm, b1], *v, h);
                bad |= !(v[0].norm_sqr() + v[1].norm_sqr() < BLOWUP * BLOWUP);
            }
            if bad {
                return Err(Self::diverged(lam));
            }
            e = e1;
            ei = ei1;
            visit(k - 1, &u);
        }
        Ok(u)
    }

    /// `(a, b, ā, b̄)` at `λ` from the right-edge values of `φ` and `φ̄`.
    pub(crate) fn coefficients(&self, lam: C) -> Result<[C; 4]> {
        let one = C::new(1.0, 0.0);
        let [u, w] = self.march_right(lam, [[one, C::zero()], [C::zero(), -one]], |_, _| {})?;
        Ok([u[0], u[1], -w[1], w[0]])
    }

    pub(crate) fn a(&self, lam: C) -> Result<C> {
        let [u] = self.march_right(lam, [[C::new(1.0, 0.0), C::zero()]], |_, _| {})?;
        Ok(u[0])
    }

    pub(crate) fn a_bar(&self, lam: C) -> Result<C> {
        let [w] = self.march_right(lam, [[C::zero(), C::new(-1.0, 0.0)]], |_, _| {})?;
        Ok(-w[1])
    }
}

#[inline(always)]
fn rk4(a: [C; 3], b: [C; 3], u: Pair, h: f64) -> Pair {
    let f = |al: C, be: C, v: Pair| -> Pair { [al * v[1], be * v[0]] };
    let hh = 0.5 * h;
    let k1 = f(a[0], b[0], u);
    let k2 = f(a[1], b[1], [u[0] + hh * k1[0], u[1] + hh * k1[1]]);
    let k3 = f(a[1], b[1], [u[0] + hh * k2[0], u[1] + hh * k2[1]]);
    let k4 = f(a[2], b[2], [u[0] + h * k3[0], u[1] + h * k3[1]]);
    let s = h / 6.0;
    [
        u[0] + s * (k1[0] + 2.0 * (k2[0] + k3[0]) + k4[0]),
        u[1] + s * (k1[1] + 2.0 * (k2[1] + k3[1]) + k4[1]),
    ]
}

fn check_nls(p: &SampledPotential) -> Result<()> {
    p.check()?;
    if p.case_tag != CaseTag::Nls {
        return Err(Error::InvalidInput(String::from("expected an NLS-case potential")));
    }
    Ok(())
}

/// Jost solution `which` at `λ`, as `v = (v1, v2)` on the sample grid.
///
/// `Phi`/`Psi` continue analytically into `Im λ > 0`, `PhiBar`/`PsiBar`
/// into `Im λ < 0`; elsewhere the integration may overflow.
pub fn jost_solve(p: &SampledPotential, lambda: C, which: Jost) -> Result<Vec<[C; 2]>> {
    check_nls(p)?;
    let zs = Zs::new(p);
    let one = C::new(1.0, 0.0);
    let g = p.grid();
    let mut out = vec![[C::zero(); 2]; g.len];
    let i = C::new(0.0, 1.0);
    let mut store = |k: usize, u: &[Pair; 1]| {
        let x = g.at(k);
        out[k] = [(-i * lambda * x).exp() * u[0][0], (i * lambda * x).exp() * u[0][1]];
    };
    match which {
        Jost::Phi => zs.march_right(lambda, [[one, C::zero()]], &mut store)?,
        Jost::PhiBar => zs.march_right(lambda, [[C::zero(), -one]], &mut store)?,
        Jost::Psi => zs.march_left(lambda, [[C::zero(), one]], &mut store)?,
        Jost::PsiBar => zs.march_left(lambda, [[one, C::zero()]], &mut store)?,
    };
    Ok(out)
}

/// `a, b, ā, b̄` on a real λ grid. Bound states are not searched for.
///
/// KdV-case potentials are routed to the Schrödinger solver.
pub fn scattering_coefficients(p: &SampledPotential, lambda: &[f64]) -> Result<ScatteringData> {
    if p.case_tag == CaseTag::Kdv {
        return schrodinger_scattering::kdv_scattering_data(p, lambda);
    }
    check_nls(p)?;
    if lambda.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidInput(String::from("lambda grid must be finite")));
    }
    let zs = Zs::new(p);
    let rows = crate::par::map(lambda, |&l| zs.coefficients(C::new(l, 0.0)));
    let mut sd = ScatteringData {
        lambda_grid: lambda.to_vec(),
        a: Vec::with_capacity(lambda.len()),
        b: Vec::with_capacity(lambda.len()),
        a_bar: Vec::with_capacity(lambda.len()),
        b_bar: Vec::with_capacity(lambda.len()),
        bound_states: Vec::new(),
        dispersion: DispersionSpec::nls(),
        case_tag: CaseTag::Nls,
        t: p.t,
    };
    for row in rows {
        let [a, b, ab, bb] = row?;
        sd.a.push(a);
        sd.b.push(b);
        sd.a_bar.push(ab);
        sd.b_bar.push(bb);
    }
    Ok(sd)
}

/// Zeros of `a` in `bx` with norming `m_k = b_k / a'(λ_k)` and left norming
/// `1 / (b_k a'(λ_k))`.
pub fn find_bound_states(p: &SampledPotential, bx: SearchBox) -> Result<Vec<BoundState>> {
    check_nls(p)?;
    bx.validate()?;
    let zs = Zs::new(p);
    let f = |l: C| zs.a(l);
    let zeros = locate_zeros(&f, bx, 0)?;
    zeros
        .into_iter()
        .map(|l| {
            let d = derivative(&f, l)?;
            let b = proportionality(&zs, l, Jost::Phi, Jost::Psi)?;
            Ok(BoundState::upper(l, b / d).with_left(1.0 / (b * d)))
        })
        .collect()
}

/// Zeros of `ā` in the mirror image of `bx` (lower half plane), with
/// `m̄_k = b̄_k / ā'(λ̄_k)` and left norming `1 / (b̄_k ā'(λ̄_k))`.
pub fn find_conjugate_bound_states(p: &SampledPotential, bx: SearchBox) -> Result<Vec<BoundState>> {
    check_nls(p)?;
    bx.validate()?;
    let zs = Zs::new(p);
    // zeros of z -> ā(conj z) conjugated live in the upper box
    let f = |l: C| zs.a_bar(l.conj()).map(|v| v.conj());
    let zeros = locate_zeros(&f, bx, 0)?;
    zeros
        .into_iter()
        .map(|z| {
            let l = z.conj();
            let g = |w: C| zs.a_bar(w);
            let d = derivative(&g, l)?;
            let b = proportionality(&zs, l, Jost::PhiBar, Jost::PsiBar)?;
            Ok(BoundState::lower(l, b / d).with_left(1.0 / (b * d)))
        })
        .collect()
}

/// Full forward transform: coefficients on `lambda` plus the discrete
/// spectrum in `bx` and its mirror. KdV potentials search the whole
/// admissible segment of the imaginary axis instead of `bx`.
pub fn forward(p: &SampledPotential, lambda: &[f64], bx: SearchBox) -> Result<ScatteringData> {
    if p.case_tag == CaseTag::Kdv {
        let mut sd = schrodinger_scattering::kdv_scattering_data(p, lambda)?;
        sd.bound_states = schrodinger_scattering::kdv_bound_states(p, f64::INFINITY)?;
        return Ok(sd);
    }
    let mut sd = scattering_coefficients(p, lambda)?;
    sd.bound_states = find_bound_states(p, bx)?;
    sd.bound_states.extend(find_conjugate_bound_states(p, bx)?);
    Ok(sd)
}

/// Central difference along the real direction.
fn derivative(f: &impl Fn(C) -> Result<C>, l: C) -> Result<C> {
    let h = C::new(FD_STEP, 0.0);
    Ok((f(l + h)? - f(l - h)?) / (2.0 * FD_STEP))
}

/// `b` with `left(λ) = b · right(λ)`, matched where the potential peaks so
/// that neither solution has been integrated through its growing direction.
fn proportionality(zs: &Zs, lam: C, left: Jost, right: Jost) -> Result<C> {
    let (km, _) = zs.p.peak();
    let one = C::new(1.0, 0.0);
    let l0 = match left {
        Jost::Phi => [one, C::zero()],
        _ => [C::zero(), -one],
    };
    let r0 = match right {
        Jost::Psi => [C::zero(), one],
        _ => [one, C::zero()],
    };
    let mut lv = [C::zero(); 2];
    let mut rv = [C::zero(); 2];
    zs.march_right(lam, [l0], |k, u| {
        if k == km {
            lv = u[0];
        }
    })?;
    zs.march_left(lam, [r0], |k, u| {
        if k == km {
            rv = u[0];
        }
    })?;
    // the gauge factors are common to both solutions
    let num = lv[0] * rv[0].conj() + lv[1] * rv[1].conj();
    let den = rv[0].norm_sqr() + rv[1].norm_sqr();
    Ok(num / den)
}

const BOUNDARY_NODES: usize = 512;
const MAX_NODES: usize = 16384;
const MAX_DEPTH: usize = 6;

struct Contour {
    nodes: Vec<C>,
    log_steps: Vec<C>,
    winding: i64,
}

fn boundary_nodes(bx: &SearchBox, per_side: usize) -> Vec<C> {
    let corners = [
        C::new(bx.re_lo, bx.im_lo),
        C::new(bx.re_hi, bx.im_lo),
        C::new(bx.re_hi, bx.im_hi),
        C::new(bx.re_lo, bx.im_hi),
    ];
    let mut v = Vec::with_capacity(4 * per_side + 1);
    for s in 0..4 {
        let (a, b) = (corners[s], corners[(s + 1) % 4]);
        for k in 0..per_side {
            v.push(a + (b - a) * (k as f64 / per_side as f64));
        }
    }
    v.push(corners[0]);
    v
}

fn sample_contour(f: &(impl Fn(C) -> Result<C> + Sync), bx: &SearchBox, per_side: usize) -> Result<(Contour, f64)> {
    let nodes = boundary_nodes(bx, per_side);
    let vals = crate::par::map(&nodes[..nodes.len() - 1], |&z| f(z));
    let mut vals = vals.into_iter().collect::<Result<Vec<C>>>()?;
    vals.push(vals[0]);
    let mut total = 0.0;
    let mut worst = 0.0f64;
    let mut log_steps = Vec::with_capacity(vals.len() - 1);
    for w in vals.windows(2) {
        if w[0].norm() == 0.0 || w[1].norm() == 0.0 {
            return Ok((Contour { nodes, log_steps, winding: 0 }, f64::INFINITY));
        }
        let ratio = w[1] / w[0];
        let step = C::new(ratio.norm().ln(), ratio.arg());
        worst = worst.max(step.im.abs());
        total += step.im;
        log_steps.push(step);
    }
    let winding = (total / (2.0 * PI)).round() as i64;
    Ok((Contour { nodes, log_steps, winding }, worst))
}

fn contour(f: &(impl Fn(C) -> Result<C> + Sync), bx: &SearchBox) -> Result<Contour> {
    let mut per_side = BOUNDARY_NODES;
    let mut prev: Option<i64> = None;
    loop {
        let (c, worst) = sample_contour(f, bx, per_side)?;
        if worst < 0.5 && prev == Some(c.winding) {
            return Ok(c);
        }
        if per_side >= MAX_NODES {
            return Err(Error::NoConvergence(format!(
                "argument principle unresolved on box [{}, {}] x [{}, {}]",
                bx.re_lo, bx.re_hi, bx.im_lo, bx.im_hi
            )));
        }
        if worst < 0.5 {
            prev = Some(c.winding);
        }
        per_side *= 2;
    }
}

fn locate_zeros(f: &(impl Fn(C) -> Result<C> + Sync), bx: SearchBox, depth: usize) -> Result<Vec<C>> {
    let c = contour(f, &bx)?;
    if c.winding < 0 {
        return Err(Error::WindingMismatch { winding: c.winding, found: 0 });
    }
    let n = c.winding as usize;
    if n == 0 {
        return Ok(Vec::new());
    }
    if n <= 4 {
        if let Some(z) = zeros_from_moments(f, &c, &bx, n) {
            return Ok(z);
        }
    }
    if depth >= MAX_DEPTH {
        return Err(Error::WindingMismatch { winding: c.winding, found: 0 });
    }
    let mut all = Vec::new();
    for q in bx.quarters() {
        all.extend(locate_zeros(f, q, depth + 1)?);
    }
    if all.len() != n {
        return Err(Error::WindingMismatch { winding: c.winding, found: all.len() });
    }
    Ok(all)
}

/// Power sums of the zeros from `∮ z^p d log f`, then Newton polishing.
fn zeros_from_moments(f: &impl Fn(C) -> Result<C>, c: &Contour, bx: &SearchBox, n: usize) -> Option<Vec<C>> {
    let mut s = vec![C::zero(); n + 1];
    for (w, step) in c.nodes.windows(2).zip(&c.log_steps) {
        let mid = 0.5 * (w[0] + w[1]);
        let mut zp = C::new(1.0, 0.0);
        for sp in s.iter_mut() {
            *sp += zp * step;
            zp *= mid;
        }
    }
    let scale = 1.0 / C::new(0.0, 2.0 * PI);
    for v in s.iter_mut() {
        *v *= scale;
    }
    // Newton identities: monic coefficients e_k of prod (z - z_k)
    let mut e = vec![C::zero(); n + 1];
    e[0] = C::new(1.0, 0.0);
    for k in 1..=n {
        let mut acc = C::zero();
        for i in 1..=k {
            let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
            acc += sign * e[k - i] * s[i];
        }
        e[k] = acc / k as f64;
    }
    let coeffs: Vec<C> = (0..=n).map(|k| if k % 2 == 0 { e[k] } else { -e[k] }).collect();
    let guesses = durand_kerner(&coeffs);
    let mut roots = Vec::with_capacity(n);
    for g in guesses {
        let z = newton(f, g)?;
        if !bx.contains(z) || roots.iter().any(|r: &C| (r - z).norm() < 1e-6) {
            return None;
        }
        roots.push(z);
    }
    Some(roots)
}

/// Roots of `z^n + c1 z^{n-1} + ... + cn` (`coeffs[0] = 1`).
fn durand_kerner(coeffs: &[C]) -> Vec<C> {
    let n = coeffs.len() - 1;
    let eval = |z: C| coeffs.iter().fold(C::zero(), |acc, &a| acc * z + a);
    let rad = 1.0 + coeffs[1..].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let seed = C::new(0.4, 0.9);
    let mut z: Vec<C> = (0..n).map(|k| seed.powu(k as u32) * rad * 0.5).collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..n {
            let mut den = C::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    den *= z[i] - z[j];
                }
            }
            let dz = eval(z[i]) / den;
            z[i] -= dz;
            moved = moved.max(dz.norm());
        }
        if moved < 1e-15 * rad {
            break;
        }
    }
    z
}

fn newton(f: &impl Fn(C) -> Result<C>, mut z: C) -> Option<C> {
    for _ in 0..60 {
        let v = f(z).ok()?;
        if v.norm() < 1e-13 {
            return Some(z);
        }
        let d = derivative(f, z).ok()?;
        if d.norm() == 0.0 {
            return None;
        }
        let dz = v / d;
        z -= dz;
        if dz.norm() < 1e-14 * (1.0 + z.norm()) {
            return (f(z).ok()?.norm() < 1e-10).then_some(z);
        }
    }
    (f(z).ok()?.norm() < 1e-10).then_some(z)
}

/// `b(λ) = ∫ r(y) e^{-2iλy} u1(y, λ) dy` for `Im λ ≥ 0`, with a check that
/// the fitted decay of `r` beyond the grid keeps the neglected tail small.
pub fn extend_b(p: &SampledPotential, lambda: C) -> Result<C> {
    p.check()?;
    let env = match tail_envelope(p) {
        Ok(e) => e,
        Err(Error::NoDecay(_)) => None,
        Err(e) => return Err(e),
    };
    extend_b_with(p, lambda, env.as_ref())
}

/// Right-side envelope of the decaying component (`r`, or `q` for KdV).
/// `Ok(None)` means the component vanishes identically on the tail.
pub fn tail_envelope(p: &SampledPotential) -> Result<Option<DecayEnvelope>> {
    let x = p.x();
    let comp = if p.case_tag == CaseTag::Kdv { &p.q } else { &p.r };
    let mags: Vec<f64> = comp.iter().map(|z| z.norm()).collect();
    let tail_nonzero = x.iter().zip(&mags).filter(|(x, m)| **x >= 1.0 && **m > 0.0).count();
    if tail_nonzero == 0 {
        return Ok(None);
    }
    certifier::fit_samples(&x, &mags, Side::Right).map(Some)
}

/// As [`extend_b`] with a precomputed envelope (`None`: no tail at all).
pub fn extend_b_with(p: &SampledPotential, lambda: C, env: Option<&DecayEnvelope>) -> Result<C> {
    if lambda.im < 0.0 || !(lambda.re.is_finite() && lambda.im.is_finite()) {
        return Err(Error::InvalidInput(String::from("extend_b needs finite lambda with Im >= 0")));
    }
    let comp = if p.case_tag == CaseTag::Kdv { &p.q } else { &p.r };
    if comp.iter().all(|z| z.is_zero()) {
        return Ok(C::zero());
    }
    let (b, weight_max) = match p.case_tag {
        CaseTag::Nls => {
            let zs = Zs::new(p);
            let g = p.grid();
            let mut integrand = vec![C::zero(); g.len];
            let mut umax = 0.0f64;
            let i2 = C::new(0.0, 2.0) * lambda;
            zs.march_right(lambda, [[C::new(1.0, 0.0), C::zero()]], |k, u| {
                umax = umax.max(u[0][0].norm());
                integrand[k] = p.r[k] * (-i2 * g.at(k)).exp() * u[0][0];
            })?;
            (quad::trapezoid(&integrand, g.step), umax)
        }
        CaseTag::Kdv => schrodinger_scattering::extend_b_kdv(p, lambda)?,
    };
    if !(b.re.is_finite() && b.im.is_finite()) {
        return Err(Error::DivergedIntegration { re: lambda.re, im: lambda.im });
    }
    if let Some(env) = env {
        let xr = p.grid().end();
        let growth = 2.0 * lambda.im;
        let slope = env.rate * (1.0 + env.exponent_excess) * xr.max(1.0).powf(env.exponent_excess) - growth;
        if slope <= 0.0 || xr <= 0.0 {
            return Err(Error::EnvelopeInsufficient { im_lambda: lambda.im });
        }
        let log_edge = env.amplitude.ln() - env.rate * xr.powf(1.0 + env.exponent_excess) + growth * xr;
        let tail = weight_max * log_edge.exp() / slope;
        if !(tail <= 1e-8 * b.norm().max(1.0)) {
            return Err(Error::EnvelopeInsufficient { im_lambda: lambda.im });
        }
    }
    Ok(b)
}

/// Symmetric grid of `n` points on `[-half_width, half_width]`; for even
/// `n` it avoids `λ = 0`.
pub fn lambda_grid(half_width: f64, n: usize) -> Vec<f64> {
    Grid::linspace(-half_width, half_width, n).points()
}
