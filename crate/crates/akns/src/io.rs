//! File formats: potentials as CSV, everything else as JSON.
//!
//! A potential file looks like
//!
//! ```text
//! # t=0.5 case=nls
//! # columns: x,re_q,im_q,re_r,im_r
//! x,re_q,im_q,re_r,im_r
//! -10.0,0.0,0.0,-0.0,0.0
//! ...
//! ```
//!
//! Rows on a non-uniform `x` are resampled onto the uniform grid with the
//! same endpoints and row count by natural cubic splines.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use akns_core::{CaseTag, Complex64, Grid, SampledPotential};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::AppError;

pub const HEADER: [&str; 5] = ["x", "re_q", "im_q", "re_r", "im_r"];

/// Relative spacing deviation tolerated before resampling kicks in.
const UNIFORM_TOL: f64 = 1e-9;

/// Parse a potential CSV from text.
pub fn parse_potential(text: &str) -> Result<SampledPotential, AppError> {
    let mut t = 0.0;
    let mut case = CaseTag::Nls;
    let mut body = String::new();
    for line in text.lines() {
        let trimmed = line.trim();
        if let Some(comment) = trimmed.strip_prefix('#') {
            for tok in comment.split_whitespace() {
                if let Some(v) = tok.strip_prefix("t=") {
                    t = v.parse().map_err(|_| AppError::Format(format!("bad time stamp '{v}'")))?;
                } else if let Some(v) = tok.strip_prefix("case=") {
                    case = v.parse()?;
                }
            }
        } else if !trimmed.is_empty() {
            body.push_str(line);
            body.push('\n');
        }
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| AppError::Format(format!("missing column '{name}'")))
    };
    let idx = [col("x")?, col("re_q")?, col("im_q")?, col("re_r")?, col("im_r")?];
    let mut x = Vec::new();
    let mut q = Vec::new();
    let mut r = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut v = [0.0; 5];
        for (slot, &i) in v.iter_mut().zip(&idx) {
            let s = rec.get(i).ok_or_else(|| AppError::Format(format!("row {} too short", line + 1)))?;
            *slot = s.parse().map_err(|_| AppError::Format(format!("row {}: bad number '{s}'", line + 1)))?;
        }
        x.push(v[0]);
        q.push(Complex64::new(v[1], v[2]));
        r.push(Complex64::new(v[3], v[4]));
    }
    if x.len() < 2 {
        return Err(AppError::Format(format!("{} data rows", x.len())));
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(AppError::Format(String::from("x must be strictly increasing")));
    }
    let grid = Grid::linspace(x[0], x[x.len() - 1], x.len());
    let uniform = x.iter().enumerate().all(|(k, xk)| (xk - grid.at(k)).abs() <= UNIFORM_TOL * grid.step);
    let (q, r) = if uniform {
        (q, r)
    } else {
        let pts = grid.points();
        let resample = |v: &[Complex64]| -> Vec<Complex64> {
            let re = Spline::new(&x, &v.iter().map(|z| z.re).collect::<Vec<_>>());
            let im = Spline::new(&x, &v.iter().map(|z| z.im).collect::<Vec<_>>());
            pts.iter().map(|&p| Complex64::new(re.eval(p), im.eval(p))).collect()
        };
        let q = resample(&q);
        let r = match case {
            CaseTag::Kdv => vec![Complex64::new(-1.0, 0.0); pts.len()],
            CaseTag::Nls => resample(&r),
        };
        (q, r)
    };
    Ok(SampledPotential::new(grid, q, r, t, case)?)
}

pub fn read_potential(path: &Path) -> Result<SampledPotential, AppError> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    parse_potential(&text).map_err(|e| e.in_file(path))
}

/// Serialize a potential as CSV.
pub fn potential_csv(p: &SampledPotential) -> Result<String, AppError> {
    let mut out = format!("# t={} case={}\n# columns: {}\n", p.t, p.case_tag.as_str(), HEADER.join(","));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER)?;
    for (x, (q, r)) in p.x().iter().zip(p.q.iter().zip(&p.r)) {
        w.write_record([x, &q.re, &q.im, &r.re, &r.im].map(|v| fmt_f64(*v)))?;
    }
    let bytes = w.into_inner().map_err(|e| AppError::Format(e.to_string()))?;
    out.push_str(&String::from_utf8_lossy(&bytes));
    Ok(out)
}

pub fn write_potential(path: &Path, p: &SampledPotential) -> Result<(), AppError> {
    write_text(path, &potential_csv(p)?)
}

/// Plot-ready CSV with arbitrary columns.
pub fn table_csv(columns: &[&str], rows: &[Vec<f64>]) -> Result<String, AppError> {
    let mut out = format!("# columns: {}\n", columns.join(","));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(columns)?;
    for row in rows {
        w.write_record(row.iter().map(|v| fmt_f64(*v)))?;
    }
    let bytes = w.into_inner().map_err(|e| AppError::Format(e.to_string()))?;
    out.push_str(&String::from_utf8_lossy(&bytes));
    Ok(out)
}

/// 17 significant digits, enough to round-trip every `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        // keep the sign of negative zero
        return if v.is_sign_negative() { String::from("-0.0") } else { String::from("0.0") };
    }
    format!("{v:.16e}")
}

/// JSON formatter printing every float with 17 significant digits.
struct Digits17;

impl serde_json::ser::Formatter for Digits17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }
}

/// Deterministic JSON: struct fields in declaration order, floats with 17
/// significant digits.
pub fn to_json<T: Serialize>(value: &T) -> Result<String, AppError> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T, AppError> {
    Ok(serde_json::from_str(text)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, AppError> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    from_json(&text).map_err(|e| e.in_file(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), AppError> {
    write_text(path, &to_json(value)?)
}

fn write_text(path: &Path, text: &str) -> Result<(), AppError> {
    fs::write(path, text).map_err(|e| AppError::io(path, e))
}

/// Natural cubic spline through `(x_k, y_k)`.
pub struct Spline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl Spline {
    /// `x` must be strictly increasing with at least two points.
    pub fn new(x: &[f64], y: &[f64]) -> Self {
        let n = x.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // tridiagonal system for interior second derivatives (Thomas)
            let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
            let mut diag = vec![0.0; n];
            let mut rhs = vec![0.0; n];
            for i in 1..n - 1 {
                diag[i] = 2.0 * (h[i - 1] + h[i]);
                rhs[i] = 6.0 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
            }
            for i in 2..n - 1 {
                let f = h[i - 1] / diag[i - 1];
                diag[i] -= f * h[i - 1];
                rhs[i] -= f * rhs[i - 1];
            }
            for i in (1..n - 1).rev() {
                let upper = if i + 1 < n - 1 { h[i] * m[i + 1] } else { 0.0 };
                m[i] = (rhs[i] - upper) / diag[i];
            }
        }
        Spline { x: x.to_vec(), y: y.to_vec(), m }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let k = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        };
        let h = self.x[k + 1] - self.x[k];
        let a = (self.x[k + 1] - t) / h;
        let b = (t - self.x[k]) / h;
        a * self.y[k]
            + b * self.y[k + 1]
            + ((a * a * a - a) * self.m[k] + (b * b * b - b) * self.m[k + 1]) * h * h / 6.0
    }
}
