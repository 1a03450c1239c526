//! Time evolution of scattering data: `a` is conserved, `b` and the norming
//! constants pick up `exp(∓2 A₀(λ) Δt)`.

use alloc::format;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::*;

/// Default bound on `|2 A₀(λ_k) Δt|` for bound states.
pub const EXPONENT_CAP: f64 = 600.0;

/// [`evolve_with_cap`] with [`EXPONENT_CAP`].
pub fn evolve(sd: &ScatteringData, t1: f64) -> Result<ScatteringData> {
    evolve_with_cap(sd, t1, EXPONENT_CAP)
}

/// Evolve `sd` from `sd.t` to `t1`.
///
/// Upper-half-plane normings scale like `b`, lower ones like `b̄`; the
/// left normings carried alongside scale the opposite way.
pub fn evolve_with_cap(sd: &ScatteringData, t1: f64, cap: f64) -> Result<ScatteringData> {
    sd.dispersion.validate()?;
    let dt = t1 - sd.t;
    if !dt.is_finite() {
        return Err(Error::InvalidInput(format!("time step {t1} - {} is not finite", sd.t)));
    }
    let mut out = sd.clone();
    out.t = t1;
    if dt == 0.0 {
        return Ok(out);
    }
    let a0 = |z: Complex64| sd.dispersion.eval(z);
    for k in 0..sd.lambda_grid.len() {
        let e = 2.0 * a0(Complex64::new(sd.lambda_grid[k], 0.0)) * dt;
        if !(e.re.is_finite() && e.im.is_finite()) {
            return Err(Error::InvalidDispersion(format!("A0 has a pole at lambda = {}", sd.lambda_grid[k])));
        }
        if e.re.abs() > cap {
            return Err(Error::Overflow { exponent: e.re.abs(), cap });
        }
        out.b[k] = sd.b[k] * (-e).exp();
        out.b_bar[k] = sd.b_bar[k] * e.exp();
    }
    for s in &mut out.bound_states {
        let e = 2.0 * a0(s.lambda) * dt;
        let mag = e.norm();
        if !mag.is_finite() || mag > cap {
            return Err(Error::Overflow { exponent: mag, cap });
        }
        let e = match s.half_plane {
            HalfPlane::Upper => -e,
            HalfPlane::Lower => e,
        };
        s.norming *= e.exp();
        if let Some(g) = s.left_norming.as_mut() {
            *g *= (-e).exp();
        }
        if sd.case_tag == CaseTag::Kdv {
            // the exponent is real on the imaginary axis; drop rounding noise
            s.norming.im = 0.0;
            if let Some(g) = s.left_norming.as_mut() {
                g.im = 0.0;
            }
        }
    }
    Ok(out)
}
