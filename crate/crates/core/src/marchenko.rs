//! Inverse scattering through the Marchenko equations.
//!
//! Kernels are split into a continuous part, tabulated on a uniform `z` grid
//! from the real-axis data, and a residue part evaluated exactly. For each
//! `x` the right pair (unknowns on `s > x`) or the left pair (`s < x`) is
//! discretised with composite Gauss–Legendre panels and solved densely.
//!
//! Right pair, `s, y > x`:
//! ```text
//! K₁(x,y) = F̄(x+y) + ∫ K̄₁(x,s) F̄(s+y) ds,   K̄₁(x,y) = -∫ K₁(x,s) F(s+y) ds
//! K₂(x,y) = ∫ K̄₂(x,s) F̄(s+y) ds,            K̄₂(x,y) = -F(x+y) - ∫ K₂(x,s) F(s+y) ds
//! q = -2 K₁(x,x),  r = -2 K̄₂(x,x)
//! ```
//! Left pair, `s, y < x`:
//! ```text
//! L̄₁(x,y) = -G(x+y) + ∫ L₁(x,s) G(s+y) ds,   L₁(x,y) = -∫ L̄₁(x,s) Ḡ(s+y) ds
//! L̄₂(x,y) = ∫ L₂(x,s) G(s+y) ds,             L₂(x,y) = -Ḡ(x+y) - ∫ L̄₂(x,s) Ḡ(s+y) ds
//! q = 2 L̄₁(x,x),  r = -2 L₂(x,x)
//! ```
//! KdV: `B(x,t) + F₁(x+t) + ∫₀^∞ B(x,u) F₁(x+t+u) du = 0` with `q = ∂ₓB(x,0)`,
//! and the mirror equation in `F₂` on `t < 0` with `q = -∂ₓB(x,0)`. The
//! `x`-derivative is obtained from the differentiated equation, which shares
//! the factorisation.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use num_traits::{Float, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution;
use crate::linalg::{CMat, Lu};
use crate::model::*;
use crate::quad::{self, UniformTable};
use crate::zs_scattering::{self, SearchBox};

type C = Complex64;

const GL_NODES: usize = 16;
const RESYNC: usize = 64;
const SCAN_STEP: f64 = 0.05;

/// Which Marchenko pair to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairPolicy {
    /// Per `x`, the cheaper well-conditioned pair.
    Auto,
    Right,
    Left,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarchenkoConfig {
    /// Largest accepted 1-norm condition estimate of the Nyström matrix.
    pub cond_limit: f64,
    /// A pair is only chosen automatically when its a-priori conditioning
    /// estimate stays below this.
    pub switch_limit: f64,
    /// Integration windows end where the kernel envelope has dropped by this
    /// factor from its value at the diagonal.
    pub window_tol: f64,
    /// Largest integration window.
    pub max_window: f64,
    /// Continuous kernel parts below this are integrated on coarse panels.
    pub coarse_floor: f64,
    pub pair: PairPolicy,
}

impl Default for MarchenkoConfig {
    fn default() -> Self {
        MarchenkoConfig {
            cond_limit: 1e12,
            switch_limit: 1e5,
            window_tol: 1e-7,
            max_window: 40.0,
            coarse_floor: 1e-6,
            pair: PairPolicy::Auto,
        }
    }
}

/// One Marchenko kernel: a tabulated continuous part plus `Σ c e^{κz}`.
#[derive(Clone, Debug)]
pub struct Kernel {
    pub table: UniformTable,
    pub residues: Vec<(C, C)>,
}

impl Kernel {
    pub fn eval(&self, z: f64) -> C {
        let mut v = self.table.eval(z);
        for (c, k) in &self.residues {
            v += c * (k * z).exp();
        }
        v
    }

    /// `Σ |c| e^{Re κ z}`.
    fn residue_bound(&self, z: f64) -> f64 {
        self.residues.iter().map(|(c, k)| c.norm() * (k.re * z).exp()).sum()
    }

    /// `Σ |c| e^{Re κ z} / |Re κ|`, the residue mass beyond `z`.
    fn residue_mass(&self, z: f64) -> f64 {
        self.residues.iter().map(|(c, k)| c.norm() * (k.re * z).exp() / k.re.abs()).sum()
    }

    fn max_rate(&self) -> f64 {
        self.residues.iter().map(|(_, k)| k.norm()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub enum KernelSet {
    Nls { f: Kernel, f_bar: Kernel, g: Option<Kernel>, g_bar: Option<Kernel> },
    Kdv { f1: Kernel, f1_prime: Kernel, f2: Option<Kernel>, f2_prime: Option<Kernel> },
}

/// Marchenko kernels for reconstruction on `[x_min, x_max]`.
#[derive(Clone, Debug)]
pub struct MarchenkoKernels {
    pub case_tag: CaseTag,
    pub t: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub kernels: KernelSet,
    pub warnings: Vec<String>,
    /// Highest frequency present in the continuous parts, in `z` units.
    bandwidth: f64,
    /// Largest `|κ|` over residue terms.
    residue_rate: f64,
    /// Running maxima of the continuous parts towards `+∞` (right pair) and
    /// `-∞` (left pair).
    cont_right: Vec<f64>,
    cont_left: Vec<f64>,
    scale: f64,
    config: MarchenkoConfig,
}

fn trapezoid_weights(l: &[f64]) -> Vec<f64> {
    let n = l.len();
    (0..n)
        .map(|k| match (k, n) {
            (_, 1) => 0.0,
            (0, _) => 0.5 * (l[1] - l[0]),
            (k, n) if k == n - 1 => 0.5 * (l[n - 1] - l[n - 2]),
            (k, _) => 0.5 * (l[k + 1] - l[k - 1]),
        })
        .collect()
}

fn is_uniform(l: &[f64]) -> bool {
    if l.len() < 3 {
        return true;
    }
    let h = l[1] - l[0];
    l.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs())
}

/// `pref Σ_k wρ_k e^{iσλ_k z}` on `z0 + j dz`.
fn fourier(lam: &[f64], wrho: &[C], sigma: f64, pref: f64, z0: f64, dz: f64, nz: usize) -> Vec<C> {
    if lam.is_empty() || wrho.iter().all(|v| v.is_zero()) {
        return vec![C::zero(); nz];
    }
    let uniform = is_uniform(lam);
    let h = if lam.len() > 1 { lam[1] - lam[0] } else { 0.0 };
    let idx: Vec<usize> = (0..nz).collect();
    crate::par::map(&idx, |&j| {
        let z = z0 + j as f64 * dz;
        let mut acc = C::zero();
        if uniform {
            let step = C::from_polar(1.0, sigma * h * z);
            let mut e = C::zero();
            for (k, (l, w)) in lam.iter().zip(wrho).enumerate() {
                if k % RESYNC == 0 {
                    e = C::from_polar(1.0, sigma * l * z);
                }
                acc += w * e;
                e *= step;
            }
        } else {
            for (l, w) in lam.iter().zip(wrho) {
                acc += w * C::from_polar(1.0, sigma * l * z);
            }
        }
        acc * pref
    })
}

/// `a(λ) = Π (λ - λ_j) / Π (λ - λ̄_l)` and its derivative at `z`.
fn product_derivative(zeros: &[C], poles: &[C], z: C, skip: usize) -> C {
    // derivative at the simple zero zeros[skip]
    let mut v = C::new(1.0, 0.0);
    for (j, w) in zeros.iter().enumerate() {
        if j != skip {
            v *= z - w;
        }
    }
    for p in poles {
        v /= z - p;
    }
    v
}

/// Fill in missing left normings for reflectionless data from the product
/// form of `a`.
fn complete_left_normings(sd: &mut ScatteringData) -> bool {
    if sd.bound_states.iter().all(|s| s.left_norming.is_some()) {
        return true;
    }
    let reflectionless = sd.b.iter().chain(&sd.b_bar).all(|v| v.is_zero());
    if !reflectionless {
        return false;
    }
    let ups: Vec<C> = sd.upper_states().map(|s| s.lambda).collect();
    let lows: Vec<C> = match sd.case_tag {
        CaseTag::Nls => sd.lower_states().map(|s| s.lambda).collect(),
        CaseTag::Kdv => ups.iter().map(|l| l.conj()).collect(),
    };
    if sd.case_tag == CaseTag::Nls && ups.len() != lows.len() {
        return false;
    }
    for s in sd.bound_states.iter_mut().filter(|s| s.left_norming.is_none()) {
        let g = match (sd.case_tag, s.half_plane) {
            (CaseTag::Kdv, _) => {
                let k = ups.iter().position(|l| *l == s.lambda).unwrap_or(0);
                let ap = product_derivative(&ups, &lows, s.lambda, k);
                -1.0 / (s.norming * ap * ap)
            }
            (CaseTag::Nls, HalfPlane::Upper) => {
                let k = ups.iter().position(|l| *l == s.lambda).unwrap_or(0);
                let ap = product_derivative(&ups, &lows, s.lambda, k);
                1.0 / (s.norming * ap * ap)
            }
            (CaseTag::Nls, HalfPlane::Lower) => {
                let k = lows.iter().position(|l| *l == s.lambda).unwrap_or(0);
                let ap = product_derivative(&lows, &ups, s.lambda, k);
                1.0 / (s.norming * ap * ap)
            }
        };
        if sd.case_tag == CaseTag::Kdv {
            s.left_norming = Some(C::new(g.re, 0.0));
        } else {
            s.left_norming = Some(g);
        }
    }
    true
}

/// [`build_kernels_with`] under the default configuration.
pub fn build_kernels(sd: &ScatteringData, x_min: f64, x_max: f64) -> Result<MarchenkoKernels> {
    build_kernels_with(sd, x_min, x_max, &MarchenkoConfig::default())
}

/// Tabulate the kernels needed to reconstruct on `[x_min, x_max]`.
///
/// The real-axis integrals use the trapezoid rule on `sd.lambda_grid`;
/// when its period `2π/Δλ` is shorter than the tabulated range a warning is
/// recorded.
pub fn build_kernels_with(sd: &ScatteringData, x_min: f64, x_max: f64, cfg: &MarchenkoConfig) -> Result<MarchenkoKernels> {
    sd.validate()?;
    if !(x_min.is_finite() && x_max.is_finite() && x_min <= x_max) {
        return Err(Error::InvalidInput(format!("bad reconstruction range [{x_min}, {x_max}]")));
    }
    if !(cfg.max_window >= 1.0) {
        return Err(Error::InvalidInput(String::from("max_window must be at least 1")));
    }
    let mut sd = sd.clone();
    let have_left = complete_left_normings(&mut sd);
    let mut warnings = Vec::new();
    if !have_left {
        warnings.push(String::from("left normings unavailable; right pair only"));
    }
    let lam = &sd.lambda_grid;
    let w = trapezoid_weights(lam);
    let kdv = sd.case_tag == CaseTag::Kdv;
    let n = lam.len();
    let ratio = |num: &[C], den: &[C]| -> Vec<C> { (0..n).map(|k| w[k] * num[k] / den[k]).collect() };
    let rho_f = ratio(&sd.b, &sd.a);
    let rho_fb = ratio(&sd.b_bar, &sd.a_bar);
    let (rho_g, rho_gb) = if kdv { (Vec::new(), Vec::new()) } else { (ratio(&sd.b_bar, &sd.a), ratio(&sd.b, &sd.a_bar)) };
    if rho_f.iter().chain(&rho_fb).chain(&rho_g).chain(&rho_gb).any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::InvalidInput(String::from("reflection data not finite (a vanishes on the grid?)")));
    }

    // bandwidth: largest |λ| carrying non-negligible reflection
    let peak = rho_f.iter().chain(&rho_fb).chain(&rho_g).chain(&rho_gb).map(|v| v.norm()).fold(0.0, f64::max);
    let mut lam_eff = 0.0f64;
    if peak > 0.0 {
        for (k, l) in lam.iter().enumerate() {
            let m = [&rho_f, &rho_fb, &rho_g, &rho_gb].iter().filter(|v| !v.is_empty()).map(|v| v[k].norm()).fold(0.0, f64::max);
            if m > 1e-12 * peak {
                lam_eff = lam_eff.max(l.abs());
            }
        }
    }
    let sigma = if kdv { 2.0 } else { 1.0 };
    let bandwidth = sigma * lam_eff;
    let (base_lo, base_hi) = if kdv { (x_min, x_max) } else { (2.0 * x_min, 2.0 * x_max) };
    let span = 2.0 * cfg.max_window + 0.5;
    let z0 = base_lo - span;
    let z1 = base_hi + span;
    let (dz, nz) = if peak > 0.0 {
        let dz = 0.01f64.min(0.1 / bandwidth.max(1e-3));
        (dz, ((z1 - z0) / dz).ceil() as usize + 1)
    } else {
        (1.0, 0)
    };
    if peak > 0.0 && lam.len() > 1 {
        let dl = lam.windows(2).map(|p| p[1] - p[0]).fold(0.0, f64::max);
        let period = 2.0 * PI / (sigma * dl);
        if period < z1 - z0 {
            warnings.push(format!(
                "AliasWarning: lambda spacing {dl:.3e} gives period {period:.1} shorter than the kernel range {:.1}",
                z1 - z0
            ));
        }
    }
    let pref = if kdv { 1.0 / PI } else { 0.5 / PI };
    let table = |rho: &[C], s: f64| UniformTable::new(z0, dz, fourier(lam, rho, s, pref, z0, dz, nz));
    let i = C::new(0.0, 1.0);

    let upper: Vec<&BoundState> = sd.upper_states().collect();
    let lower: Vec<&BoundState> = sd.lower_states().collect();
    let kernels = if kdv {
        let lam_i: Vec<C> = lam.iter().map(|l| C::new(0.0, 2.0 * l)).collect();
        let deriv = |rho: &[C], s: f64| -> Vec<C> { rho.iter().zip(&lam_i).map(|(r, l)| r * l * s).collect() };
        let res1: Vec<(C, C)> = upper.iter().map(|s| (2.0 * s.norming, C::new(-2.0 * s.lambda.im, 0.0))).collect();
        let res2: Vec<(C, C)> = upper
            .iter()
            .filter_map(|s| s.left_norming.map(|g| (2.0 * g, C::new(2.0 * s.lambda.im, 0.0))))
            .collect();
        let prime = |r: &[(C, C)]| r.iter().map(|(c, k)| (c * k, *k)).collect::<Vec<_>>();
        KernelSet::Kdv {
            f1: Kernel { table: table(&rho_f, 2.0), residues: res1.clone() },
            f1_prime: Kernel { table: table(&deriv(&rho_f, 1.0), 2.0), residues: prime(&res1) },
            f2: have_left.then(|| Kernel { table: table(&rho_fb, -2.0), residues: res2.clone() }),
            f2_prime: have_left.then(|| Kernel { table: table(&deriv(&rho_fb, -1.0), -2.0), residues: prime(&res2) }),
        }
    } else {
        let f = Kernel { table: table(&rho_f, 1.0), residues: upper.iter().map(|s| (-i * s.norming, i * s.lambda)).collect() };
        let f_bar = Kernel { table: table(&rho_fb, -1.0), residues: lower.iter().map(|s| (i * s.norming, -i * s.lambda)).collect() };
        let (g, g_bar) = if have_left {
            (
                Some(Kernel {
                    table: table(&rho_g, -1.0),
                    residues: upper.iter().map(|s| (-i * s.left_norming.unwrap_or_default(), -i * s.lambda)).collect(),
                }),
                Some(Kernel {
                    table: table(&rho_gb, 1.0),
                    residues: lower.iter().map(|s| (i * s.left_norming.unwrap_or_default(), i * s.lambda)).collect(),
                }),
            )
        } else {
            (None, None)
        };
        KernelSet::Nls { f, f_bar, g, g_bar }
    };

    let mut mk = MarchenkoKernels {
        case_tag: sd.case_tag,
        t: sd.t,
        x_min,
        x_max,
        kernels,
        warnings,
        bandwidth,
        residue_rate: 0.0,
        cont_right: Vec::new(),
        cont_left: Vec::new(),
        scale: 1.0,
        config: cfg.clone(),
    };
    mk.residue_rate = mk.right_kernels().iter().chain(mk.left_kernels().iter()).map(|k| k.max_rate()).fold(0.0, f64::max);
    mk.scale = abs_max(&mk.right_kernels(), nz).into_iter().chain(abs_max(&mk.left_kernels(), nz)).fold(1.0, f64::max);
    let mut right = abs_max(&mk.right_kernels(), nz);
    for j in (1..right.len()).rev() {
        right[j - 1] = right[j - 1].max(right[j]);
    }
    let mut left = abs_max(&mk.left_kernels(), nz);
    for j in 1..left.len() {
        left[j] = left[j].max(left[j - 1]);
    }
    mk.cont_right = right;
    mk.cont_left = left;
    Ok(mk)
}

fn abs_max(ks: &[&Kernel], nz: usize) -> Vec<f64> {
    if ks.is_empty() {
        return Vec::new();
    }
    (0..nz).map(|j| ks.iter().map(|k| k.table.values[j].norm()).fold(0.0, f64::max)).collect()
}

/// Right or left half-line pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Pair {
    Right,
    Left,
}

impl MarchenkoKernels {
    pub fn config(&self) -> &MarchenkoConfig {
        &self.config
    }

    fn right_kernels(&self) -> Vec<&Kernel> {
        match &self.kernels {
            KernelSet::Nls { f, f_bar, .. } => vec![f, f_bar],
            KernelSet::Kdv { f1, .. } => vec![f1],
        }
    }

    fn left_kernels(&self) -> Vec<&Kernel> {
        match &self.kernels {
            KernelSet::Nls { g: Some(g), g_bar: Some(gb), .. } => vec![g, gb],
            KernelSet::Kdv { f2: Some(f2), .. } => vec![f2],
            _ => Vec::new(),
        }
    }

    fn has_left(&self) -> bool {
        !self.left_kernels().is_empty()
    }

    fn table_geometry(&self) -> (f64, f64, usize) {
        let t = &self.right_kernels()[0].table;
        (t.z0, t.dz, t.values.len())
    }

    /// Largest continuous magnitude beyond `z` in the direction of the pair.
    fn cont_tail(&self, pair: Pair, z: f64) -> f64 {
        let (z0, dz, _) = self.table_geometry();
        let v = match pair {
            Pair::Right => &self.cont_right,
            Pair::Left => &self.cont_left,
        };
        if v.is_empty() {
            return 0.0;
        }
        let s = (z - z0) / dz;
        match pair {
            Pair::Right if s <= 0.0 => v[0],
            Pair::Right => v.get(s.floor() as usize).copied().unwrap_or(0.0),
            Pair::Left if s < 0.0 => 0.0,
            Pair::Left => v[(s.ceil() as usize).min(v.len() - 1)],
        }
    }

    /// Envelope of the kernels beyond `z` in the direction of the pair.
    fn envelope(&self, pair: Pair, z: f64) -> f64 {
        let ks = match pair {
            Pair::Right => self.right_kernels(),
            Pair::Left => self.left_kernels(),
        };
        self.cont_tail(pair, z) + ks.iter().map(|k| k.residue_bound(z)).sum::<f64>()
    }

    fn base(&self, x: f64) -> f64 {
        match self.case_tag {
            CaseTag::Nls => 2.0 * x,
            CaseTag::Kdv => x,
        }
    }

    /// A-priori conditioning estimate from the residue terms.
    fn cond_estimate(&self, pair: Pair, x: f64) -> f64 {
        let b = self.base(x);
        let ks = match pair {
            Pair::Right => self.right_kernels(),
            Pair::Left => self.left_kernels(),
        };
        match ks.as_slice() {
            [k] => 1.0 + k.residue_mass(b),
            [k, kb] => 1.0 + k.residue_mass(b) * kb.residue_mass(b),
            _ => f64::INFINITY,
        }
    }

    /// Composite Gauss–Legendre nodes `u` (offsets from the diagonal) and
    /// weights for the pair at `x`; `None` when the kernels vanish there.
    fn panels(&self, pair: Pair, x: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        let cfg = &self.config;
        let b = self.base(x);
        let sign = match pair {
            Pair::Right => 1.0,
            Pair::Left => -1.0,
        };
        let e0 = self.envelope(pair, b);
        if !(e0 > 1e-300) {
            return None;
        }
        let mut width = cfg.max_window;
        let mut u = 1.0;
        while u < cfg.max_window {
            if self.envelope(pair, b + sign * u) <= cfg.window_tol * e0 {
                width = u;
                break;
            }
            u += SCAN_STEP;
        }
        let res_w = if self.residue_rate > 0.0 { 12.0 / self.residue_rate } else { f64::INFINITY };
        let w_active = 2.0f64.min(12.0 / self.bandwidth.max(1e-12)).min(res_w);
        let w_coarse = 8.0f64.min(res_w);
        let mut breaks = vec![0.0];
        let mut cur = 0.0;
        let mut prev = w_active;
        while cur < width - 1e-12 {
            let quiet = self.cont_tail(pair, b + sign * cur) <= cfg.coarse_floor * self.scale;
            let step = if quiet { (prev * 1.5).min(w_coarse).max(w_active) } else { w_active };
            let mut next = (cur + step).min(width);
            if width - next < 0.25 * step {
                next = width;
            }
            breaks.push(next);
            prev = step;
            cur = next;
        }
        let rule = quad::gauss_legendre(GL_NODES);
        let (nodes, weights) = quad::composite_gl(&breaks, &rule);
        Some((nodes.into_iter().map(|v| sign * v).collect(), weights))
    }

    fn choose(&self, x: f64) -> Pair {
        let limit = self.config.switch_limit;
        match self.config.pair {
            PairPolicy::Right => return Pair::Right,
            PairPolicy::Left if self.has_left() => return Pair::Left,
            _ => {}
        }
        if !self.has_left() {
            return Pair::Right;
        }
        let cr = self.cond_estimate(Pair::Right, x);
        let cl = self.cond_estimate(Pair::Left, x);
        match (cr <= limit, cl <= limit) {
            (true, false) => Pair::Right,
            (false, true) => Pair::Left,
            (false, false) => {
                if cr <= cl {
                    Pair::Right
                } else {
                    Pair::Left
                }
            }
            (true, true) => {
                let n = |p| self.panels(p, x).map_or(0, |(u, _)| u.len());
                if n(Pair::Left) < n(Pair::Right) {
                    Pair::Left
                } else {
                    Pair::Right
                }
            }
        }
    }
}

/// Per-point diagnostics of a Marchenko solve.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MarchenkoReport {
    /// Largest condition estimate over all solves.
    pub max_cond: f64,
    /// Largest `|K₂(x,x) - K̄₁(x,x)|` over right-pair NLS solves.
    pub cross_identity: f64,
    /// Grid points reconstructed with the left pair.
    pub left_points: usize,
    pub largest_system: usize,
    pub warnings: Vec<String>,
}

struct Point {
    q: C,
    r: C,
    cond: f64,
    cross: f64,
    left: bool,
    n: usize,
}

/// `w_j k(b + u_i + u_j)`.
fn kernel_matrix(k: &Kernel, b: f64, u: &[f64], w: &[f64]) -> CMat {
    let n = u.len();
    let mut m = CMat::zeros(n);
    for i in 0..n {
        for j in i..n {
            let v = k.eval(b + u[i] + u[j]);
            m.set(i, j, v * w[j]);
            m.set(j, i, v * w[i]);
        }
    }
    m
}

fn kernel_vec(k: &Kernel, b: f64, u: &[f64]) -> Vec<C> {
    u.iter().map(|v| k.eval(b + v)).collect()
}

fn wdot(w: &[f64], a: &[C], b: &[C]) -> C {
    w.iter().zip(a.iter().zip(b)).fold(C::zero(), |s, (w, (a, b))| s + *w * a * b)
}

fn neg(v: &[C]) -> Vec<C> {
    v.iter().map(|z| -z).collect()
}

fn factor(m: CMat, x: f64, limit: f64) -> Result<(Lu, f64)> {
    let lu = Lu::factor(m).map_err(|_| Error::IllConditioned { x, cond: f64::INFINITY })?;
    let cond = lu.cond1();
    if !(cond <= limit) {
        return Err(Error::IllConditioned { x, cond });
    }
    Ok((lu, cond))
}

impl MarchenkoKernels {
    fn solve_point(&self, x: f64) -> Result<Point> {
        let pair = self.choose(x);
        let b = self.base(x);
        let kdv = self.case_tag == CaseTag::Kdv;
        let zero_r = if kdv { C::new(-1.0, 0.0) } else { C::zero() };
        let Some((u, w)) = self.panels(pair, x) else {
            return Ok(Point { q: C::zero(), r: zero_r, cond: 1.0, cross: 0.0, left: pair == Pair::Left, n: 0 });
        };
        let limit = self.config.cond_limit;
        let n = u.len();
        let left = pair == Pair::Left;
        match (&self.kernels, pair) {
            (KernelSet::Nls { f, f_bar, .. }, Pair::Right) => {
                let a = kernel_matrix(f, b, &u, &w);
                let bm = kernel_matrix(f_bar, b, &u, &w);
                let mut m = a.mul(&bm);
                m.add_identity();
                let (lu, cond) = factor(m, x, limit)?;
                let fb = kernel_vec(f_bar, b, &u);
                let ff = kernel_vec(f, b, &u);
                // K̄₁ and K₁
                let k1b = lu.solve(&neg(&a.mul_vec(&fb)));
                let k1: Vec<C> = fb.iter().zip(bm.mul_vec(&k1b)).map(|(p, q)| p + q).collect();
                let k1_xx = f_bar.eval(b) + wdot(&w, &k1b, &fb);
                // K̄₂ and K₂
                let k2b = lu.solve(&neg(&ff));
                let k2 = bm.mul_vec(&k2b);
                let k2b_xx = -f.eval(b) - wdot(&w, &k2, &ff);
                let cross = (wdot(&w, &k2b, &fb) + wdot(&w, &k1, &ff)).norm();
                Ok(Point { q: -2.0 * k1_xx, r: -2.0 * k2b_xx, cond, cross, left, n })
            }
            (KernelSet::Nls { g: Some(g), g_bar: Some(gb), .. }, Pair::Left) => {
                let c = kernel_matrix(g, b, &u, &w);
                let d = kernel_matrix(gb, b, &u, &w);
                let mut m = c.mul(&d);
                m.add_identity();
                let (lu, cond) = factor(m, x, limit)?;
                let gv = kernel_vec(g, b, &u);
                let gbv = kernel_vec(gb, b, &u);
                let l1b = lu.solve(&neg(&gv));
                let l1 = neg(&d.mul_vec(&l1b));
                let l1b_xx = -g.eval(b) + wdot(&w, &gv, &l1);
                let l2b = lu.solve(&neg(&c.mul_vec(&gbv)));
                let l2_xx = -gb.eval(b) - wdot(&w, &gbv, &l2b);
                Ok(Point { q: 2.0 * l1b_xx, r: -2.0 * l2_xx, cond, cross: 0.0, left, n })
            }
            (KernelSet::Kdv { f1, f1_prime, f2, f2_prime }, _) => {
                let (k, kp, sign) = match pair {
                    Pair::Right => (f1, f1_prime, 1.0),
                    Pair::Left => match (f2, f2_prime) {
                        (Some(k), Some(kp)) => (k, kp, -1.0),
                        _ => return Err(Error::InvalidInput(String::from("left kernels missing"))),
                    },
                };
                let mut m = kernel_matrix(k, b, &u, &w);
                let ap = kernel_matrix(kp, b, &u, &w);
                m.add_identity();
                let (lu, cond) = factor(m, x, limit)?;
                let fv = kernel_vec(k, b, &u);
                let fpv = kernel_vec(kp, b, &u);
                let bv = lu.solve(&neg(&fv));
                let rhs: Vec<C> = fpv.iter().zip(ap.mul_vec(&bv)).map(|(p, q)| -p - q).collect();
                let bx = lu.solve(&rhs);
                let d = -kp.eval(b) - wdot(&w, &bx, &fv) - wdot(&w, &bv, &fpv);
                Ok(Point { q: C::new(sign * d.re, 0.0), r: zero_r, cond, cross: 0.0, left, n })
            }
            _ => Err(Error::InvalidInput(String::from("left kernels missing"))),
        }
    }
}

/// Reconstruct `(q, r)` on `x_grid`.
pub fn solve_marchenko(k: &MarchenkoKernels, x_grid: Grid) -> Result<SampledPotential> {
    solve_marchenko_report(k, x_grid).map(|(p, _)| p)
}

/// [`solve_marchenko`] with diagnostics.
pub fn solve_marchenko_report(k: &MarchenkoKernels, x_grid: Grid) -> Result<(SampledPotential, MarchenkoReport)> {
    let xs = x_grid.points();
    let tol = 1e-9 * (k.x_max - k.x_min).abs().max(1.0);
    if xs.iter().any(|x| *x < k.x_min - tol || *x > k.x_max + tol) {
        return Err(Error::GridTooShort(format!(
            "x grid [{}, {}] exceeds the kernel range [{}, {}]",
            x_grid.start,
            x_grid.end(),
            k.x_min,
            k.x_max
        )));
    }
    let pts = crate::par::map(&xs, |&x| k.solve_point(x));
    let mut report = MarchenkoReport { warnings: k.warnings.clone(), ..Default::default() };
    let mut q = Vec::with_capacity(xs.len());
    let mut r = Vec::with_capacity(xs.len());
    for p in pts {
        let p = p?;
        q.push(p.q);
        r.push(p.r);
        report.max_cond = report.max_cond.max(p.cond);
        report.cross_identity = report.cross_identity.max(p.cross);
        report.left_points += p.left as usize;
        report.largest_system = report.largest_system.max(p.n);
    }
    let pot = SampledPotential::new(x_grid, q, r, k.t, k.case_tag)?;
    Ok((pot, report))
}

/// Settings for [`roundtrip_with`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoundtripConfig {
    pub lambda_half_width: f64,
    pub lambda_points: usize,
    pub search_box: Option<SearchBox>,
    pub marchenko: MarchenkoConfig,
}

impl Default for RoundtripConfig {
    fn default() -> Self {
        RoundtripConfig { lambda_half_width: 8.0, lambda_points: 2048, search_box: None, marchenko: MarchenkoConfig::default() }
    }
}

/// Forward transform, evolution to `t1` under `dispersion`, and inversion
/// on the grid of `p`.
pub fn roundtrip(p: &SampledPotential, t1: f64) -> Result<SampledPotential> {
    let dispersion = match p.case_tag {
        CaseTag::Nls => DispersionSpec::nls(),
        CaseTag::Kdv => DispersionSpec::kdv(),
    };
    roundtrip_with(p, t1, &dispersion, &RoundtripConfig::default()).map(|(q, _)| q)
}

/// [`roundtrip`] with explicit dispersion and settings.
pub fn roundtrip_with(
    p: &SampledPotential,
    t1: f64,
    dispersion: &DispersionSpec,
    cfg: &RoundtripConfig,
) -> Result<(SampledPotential, MarchenkoReport)> {
    p.check().map_err(|e| e.at_stage("input"))?;
    let lam = zs_scattering::lambda_grid(cfg.lambda_half_width, cfg.lambda_points);
    let bx = cfg.search_box.unwrap_or_else(|| SearchBox::default_for(p));
    let mut sd = zs_scattering::forward(p, &lam, bx).map_err(|e| e.at_stage("forward"))?;
    sd.dispersion = dispersion.clone();
    let sd = evolution::evolve(&sd, t1).map_err(|e| e.at_stage("evolve"))?;
    let g = p.grid();
    let k = build_kernels_with(&sd, g.start, g.end(), &cfg.marchenko).map_err(|e| e.at_stage("kernels"))?;
    let (mut out, rep) = solve_marchenko_report(&k, g).map_err(|e| e.at_stage("inverse"))?;
    out.t = t1;
    Ok((out, rep))
}
