//! Core data types shared by every stage of the pipeline.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::Float;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Which reduction of the AKNS system a potential or data set belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseTag {
    /// General two-component system; NLS, mKdV and friends.
    Nls,
    /// Schrödinger reduction, `r = -1`, real `q`.
    Kdv,
}

impl CaseTag {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseTag::Nls => "nls",
            CaseTag::Kdv => "kdv",
        }
    }
}

impl core::str::FromStr for CaseTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nls" => Ok(CaseTag::Nls),
            "kdv" => Ok(CaseTag::Kdv),
            other => Err(Error::InvalidInput(format!("unknown case tag '{other}'"))),
        }
    }
}

/// Uniform grid `start + k * step`, `k = 0..len`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl Grid {
    pub fn new(start: f64, step: f64, len: usize) -> Self {
        Grid { start, step, len }
    }

    /// `n` equally spaced points covering `[lo, hi]` inclusive.
    pub fn linspace(lo: f64, hi: f64, n: usize) -> Self {
        let step = if n > 1 { (hi - lo) / (n - 1) as f64 } else { 0.0 };
        Grid { start: lo, step, len: n }
    }

    /// Grid with spacing close to `dx` covering `[lo, hi]` inclusive.
    pub fn with_spacing(lo: f64, hi: f64, dx: f64) -> Self {
        let n = ((hi - lo) / dx).round() as usize + 1;
        Self::linspace(lo, hi, n)
    }

    #[inline]
    pub fn at(&self, k: usize) -> f64 {
        self.start + k as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.at(self.len.saturating_sub(1))
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len).map(|k| self.at(k)).collect()
    }
}

/// A potential pair `(q, r)` sampled on a uniform grid at time `t`.
/// Outside the grid both components are taken to be zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledPotential {
    pub x0: f64,
    pub dx: f64,
    pub q: Vec<Complex64>,
    pub r: Vec<Complex64>,
    pub t: f64,
    pub case_tag: CaseTag,
}

/// Smallest grid accepted anywhere in the crate.
pub const MIN_GRID_LEN: usize = 8;

impl SampledPotential {
    /// Build and validate.
    pub fn new(grid: Grid, q: Vec<Complex64>, r: Vec<Complex64>, t: f64, case_tag: CaseTag) -> Result<Self> {
        let p = SampledPotential { x0: grid.start, dx: grid.step, q, r, t, case_tag };
        p.check()?;
        Ok(p)
    }

    /// Zero potential of the given case.
    pub fn zero(grid: Grid, case_tag: CaseTag) -> Self {
        let r = match case_tag {
            CaseTag::Nls => Complex64::new(0.0, 0.0),
            CaseTag::Kdv => Complex64::new(-1.0, 0.0),
        };
        SampledPotential {
            x0: grid.start,
            dx: grid.step,
            q: vec![Complex64::new(0.0, 0.0); grid.len],
            r: vec![r; grid.len],
            t: 0.0,
            case_tag,
        }
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.x0, self.dx, self.q.len())
    }

    pub fn at_time(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    /// Focusing NLS sample `r = -conj(q)` of a closed-form `q`.
    pub fn focusing(grid: Grid, q: impl Fn(f64) -> Complex64) -> Self {
        let qs: Vec<Complex64> = grid.points().into_iter().map(q).collect();
        let rs = qs.iter().map(|z| -z.conj()).collect();
        SampledPotential { x0: grid.start, dx: grid.step, q: qs, r: rs, t: 0.0, case_tag: CaseTag::Nls }
    }

    /// Real `r = q` sample (defocusing-sign mKdV reduction).
    pub fn symmetric_real(grid: Grid, q: impl Fn(f64) -> f64) -> Self {
        let qs: Vec<Complex64> = grid.points().into_iter().map(|x| Complex64::new(q(x), 0.0)).collect();
        SampledPotential { x0: grid.start, dx: grid.step, r: qs.clone(), q: qs, t: 0.0, case_tag: CaseTag::Nls }
    }

    /// Schrödinger sample, `r = -1`.
    pub fn kdv(grid: Grid, q: impl Fn(f64) -> f64) -> Self {
        let qs = grid.points().into_iter().map(|x| Complex64::new(q(x), 0.0)).collect();
        SampledPotential {
            x0: grid.start,
            dx: grid.step,
            q: qs,
            r: vec![Complex64::new(-1.0, 0.0); grid.len],
            t: 0.0,
            case_tag: CaseTag::Kdv,
        }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn x(&self) -> Vec<f64> {
        self.grid().points()
    }

    /// Every violated invariant, one description each; empty when valid.
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.q.len() < MIN_GRID_LEN || self.r.len() < MIN_GRID_LEN {
            v.push(String::from("grid too short"));
        }
        if self.q.len() != self.r.len() {
            v.push(format!("q and r differ in length ({} vs {})", self.q.len(), self.r.len()));
        }
        if !(self.dx.is_finite() && self.dx > 0.0) {
            v.push(String::from("dx must be positive and finite"));
        }
        if !self.x0.is_finite() {
            v.push(String::from("x0 must be finite"));
        }
        if !self.t.is_finite() {
            v.push(String::from("t must be finite"));
        }
        let finite = |z: &Complex64| z.re.is_finite() && z.im.is_finite();
        if !self.q.iter().all(finite) {
            v.push(String::from("q contains non-finite entries"));
        }
        if !self.r.iter().all(finite) {
            v.push(String::from("r contains non-finite entries"));
        }
        if self.case_tag == CaseTag::Kdv && self.r.iter().any(|z| z.re != -1.0 || z.im != 0.0) {
            v.push(String::from("r must equal \u{2212}1 in KdV case"));
        }
        v
    }

    /// [`validate`](Self::validate) as a `Result`.
    pub fn check(&self) -> Result<()> {
        let v = self.validate();
        match v.first() {
            None => Ok(()),
            Some(m) if m == "grid too short" => Err(Error::GridTooShort(m.clone())),
            Some(_) => Err(Error::InvalidInput(v.join("; "))),
        }
    }

    /// Warns when the samples at either grid edge exceed `tol`, i.e. the
    /// potential is visibly truncated.
    pub fn truncation_warning(&self, tol: f64) -> Option<String> {
        let decaying = if self.case_tag == CaseTag::Kdv { &self.q } else { &self.r };
        let edge = [self.q.first(), self.q.last(), decaying.first(), decaying.last()]
            .into_iter()
            .flatten()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        (edge > tol).then(|| format!("edge magnitude {edge:.3e} exceeds truncation tolerance {tol:.1e}"))
    }

    /// Largest `|q| + |r|` sample and its index.
    pub(crate) fn peak(&self) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for (k, (q, r)) in self.q.iter().zip(&self.r).enumerate() {
            let v = q.norm() + if self.case_tag == CaseTag::Kdv { 0.0 } else { r.norm() };
            if v > best.1 {
                best = (k, v);
            }
        }
        best
    }
}

/// `A0(z)` as a ratio of polynomials; coefficients in ascending powers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionSpec {
    pub numerator: Vec<Complex64>,
    #[serde(default = "unit_poly")]
    pub denominator: Vec<Complex64>,
    #[serde(default)]
    pub label: String,
}

fn unit_poly() -> Vec<Complex64> {
    vec![Complex64::new(1.0, 0.0)]
}

fn horner(c: &[Complex64], z: Complex64) -> Complex64 {
    c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &a| acc * z + a)
}

fn degree(c: &[Complex64]) -> Option<usize> {
    c.iter().rposition(|a| *a != Complex64::new(0.0, 0.0))
}

impl DispersionSpec {
    pub fn polynomial(coeffs: Vec<Complex64>) -> Self {
        DispersionSpec { numerator: coeffs, denominator: unit_poly(), label: String::new() }
    }

    /// `A0 = -2i z^2`: focusing cubic NLS `i q_t + q_xx + 2|q|^2 q = 0`.
    pub fn nls() -> Self {
        Self::monomial(2, Complex64::new(0.0, -2.0)).labelled("nls2")
    }

    /// `A0 = -4i z^3`: KdV `q_t + 6 q q_x + q_xxx = 0` when `r = -1`,
    /// mKdV `q_t - 6 q^2 q_x + q_xxx = 0` when `r = q`.
    pub fn kdv() -> Self {
        Self::monomial(3, Complex64::new(0.0, -4.0)).labelled("kdv3")
    }

    /// `A0 = -i z`: pure transport `q_t = q_x`.
    pub fn transport() -> Self {
        Self::monomial(1, Complex64::new(0.0, -1.0)).labelled("transport1")
    }

    pub fn labelled(mut self, label: &str) -> Self {
        self.label = String::from(label);
        self
    }

    pub fn monomial(deg: usize, c: Complex64) -> Self {
        let mut v = vec![Complex64::new(0.0, 0.0); deg + 1];
        v[deg] = c;
        Self::polynomial(v)
    }

    /// Named presets used by the command line.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "nls2" => Some(Self::nls()),
            "kdv3" => Some(Self::kdv()),
            "mkdv3" => Some(Self::kdv().labelled("mkdv3")),
            "transport1" => Some(Self::transport()),
            _ => None,
        }
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        horner(&self.numerator, z) / horner(&self.denominator, z)
    }

    pub fn is_polynomial(&self) -> bool {
        degree(&self.denominator).unwrap_or(0) == 0
    }

    /// `deg numerator - deg denominator`; `None` for the zero relation.
    pub fn effective_degree(&self) -> Option<i64> {
        let n = degree(&self.numerator)? as i64;
        let d = degree(&self.denominator).unwrap_or(0) as i64;
        Some(n - d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.numerator.last().map_or(true, |c| *c == Complex64::new(0.0, 0.0)) {
            return Err(Error::InvalidDispersion(String::from("leading numerator coefficient is zero")));
        }
        if degree(&self.denominator).is_none() {
            return Err(Error::InvalidDispersion(String::from("denominator is identically zero")));
        }
        let finite = |z: &Complex64| z.re.is_finite() && z.im.is_finite();
        if !self.numerator.iter().chain(&self.denominator).all(finite) {
            return Err(Error::InvalidDispersion(String::from("non-finite coefficient")));
        }
        match self.effective_degree() {
            Some(d) if d >= 1 => Ok(()),
            _ => Err(Error::InvalidDispersion(String::from("effective degree must be at least 1"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HalfPlane {
    /// Zero of `a` in `Im λ > 0`.
    Upper,
    /// Zero of `ā` in `Im λ < 0`.
    Lower,
}

/// Discrete eigenvalue with its norming constants.
///
/// For `Upper` states `norming` is `m_k = b_k / a'(λ_k)` and `left_norming`
/// is `1 / (b_k a'(λ_k))`; `Lower` states mirror this with `b̄`, `ā`.
/// KdV states sit at `λ = iβ` with `norming = c_R`, `left_norming = c_L`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundState {
    pub lambda: Complex64,
    pub norming: Complex64,
    pub half_plane: HalfPlane,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left_norming: Option<Complex64>,
}

impl BoundState {
    pub fn upper(lambda: Complex64, norming: Complex64) -> Self {
        BoundState { lambda, norming, half_plane: HalfPlane::Upper, left_norming: None }
    }

    pub fn lower(lambda: Complex64, norming: Complex64) -> Self {
        BoundState { lambda, norming, half_plane: HalfPlane::Lower, left_norming: None }
    }

    pub fn with_left(mut self, g: Complex64) -> Self {
        self.left_norming = Some(g);
        self
    }
}

/// Scattering data on a real λ grid plus the discrete spectrum.
///
/// In the KdV case the slots hold `a = ā = 1/T`, `b = R1/T`, `b̄ = R2/T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringData {
    pub lambda_grid: Vec<f64>,
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
    pub a_bar: Vec<Complex64>,
    pub b_bar: Vec<Complex64>,
    pub bound_states: Vec<BoundState>,
    pub t: f64,
    pub dispersion: DispersionSpec,
    pub case_tag: CaseTag,
}

impl ScatteringData {
    pub fn upper_states(&self) -> impl Iterator<Item = &BoundState> {
        self.bound_states.iter().filter(|s| s.half_plane == HalfPlane::Upper)
    }

    pub fn lower_states(&self) -> impl Iterator<Item = &BoundState> {
        self.bound_states.iter().filter(|s| s.half_plane == HalfPlane::Lower)
    }

    /// Reflectionless data: empty continuous spectrum.
    pub fn reflectionless(bound_states: Vec<BoundState>, dispersion: DispersionSpec, case_tag: CaseTag) -> Self {
        ScatteringData {
            lambda_grid: Vec::new(),
            a: Vec::new(),
            b: Vec::new(),
            a_bar: Vec::new(),
            b_bar: Vec::new(),
            bound_states,
            t: 0.0,
            dispersion,
            case_tag,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.lambda_grid.len();
        if [self.a.len(), self.b.len(), self.a_bar.len(), self.b_bar.len()].iter().any(|&m| m != n) {
            return Err(Error::InvalidInput(String::from("scattering arrays differ in length")));
        }
        if self.lambda_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(String::from("lambda_grid must be strictly increasing")));
        }
        for s in &self.bound_states {
            let ok = match s.half_plane {
                HalfPlane::Upper => s.lambda.im > 0.0,
                HalfPlane::Lower => s.lambda.im < 0.0,
            };
            if !ok {
                return Err(Error::InvalidInput(format!("bound state {} lies in the wrong half plane", s.lambda)));
            }
            if self.case_tag == CaseTag::Kdv && (s.lambda.re != 0.0 || !(s.norming.re > 0.0) || s.norming.im != 0.0) {
                return Err(Error::InvalidInput(String::from(
                    "KdV bound states need purely imaginary lambda and real positive norming",
                )));
            }
        }
        self.dispersion.validate()
    }

    /// Largest `|aā + b b̄ - 1|` over the grid.
    pub fn unitarity_defect(&self) -> f64 {
        (0..self.lambda_grid.len())
            .map(|k| (self.a[k] * self.a_bar[k] + self.b[k] * self.b_bar[k] - 1.0).norm())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// Fitted bound `|f(x)| <= amplitude * exp(-rate * |x|^(1 + exponent_excess))`
/// on one side; `residual` is the sup-norm misfit in `log |f|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayEnvelope {
    pub amplitude: f64,
    pub rate: f64,
    pub exponent_excess: f64,
    pub side: Side,
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    ConditionsMet,
    ConditionsFailed,
    Inconclusive,
}

/// Open interval `(lower, upper)`; empty when `lower >= upper`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoWindow {
    #[serde(with = "ext_f64")]
    pub lower: f64,
    #[serde(with = "ext_f64")]
    pub upper: f64,
}

impl RhoWindow {
    pub fn contains(&self, rho: f64) -> bool {
        self.lower < rho && rho < self.upper
    }

    /// A representative interior point.
    pub fn midpoint(&self) -> Option<f64> {
        (self.lower < self.upper).then(|| 0.5 * (self.lower + self.upper))
    }
}

/// Finite-radius proxy for the indicator `h_b(φ)` on one ray.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndicatorSample {
    pub angle: f64,
    /// `-inf` when `b` vanished at every sampled radius.
    #[serde(with = "ext_f64")]
    pub estimate: f64,
    /// Largest radius at which `b` could be trusted on this ray.
    pub radius_cap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub rho_window: RhoWindow,
    pub window_nonempty: bool,
    pub indicator_samples: Vec<IndicatorSample>,
    pub verdict: Verdict,
    pub notes: String,
}

/// `f64` that may be infinite or NaN; non-finite values travel as the
/// strings `"inf"`, `"-inf"` and `"nan"`.
pub mod ext_f64 {
    use super::*;

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Tag(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> core::result::Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> core::result::Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Tag(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("bad float tag '{other}'"))),
            },
        }
    }
}
