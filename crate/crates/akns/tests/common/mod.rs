//! Independent reference computations for the integration tests: plain RK4
//! shooting on the untransformed equations with the potential evaluated in
//! closed form, Richardson-extrapolated in the step.

#![allow(dead_code)]

use akns::akns_core::Complex64;

pub type C = Complex64;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn sech(x: f64) -> f64 {
    1.0 / x.cosh()
}

fn rk4<const N: usize>(f: &dyn Fn(f64, [C; N]) -> [C; N], x0: f64, x1: f64, y0: [C; N], steps: usize) -> [C; N] {
    let h = (x1 - x0) / steps as f64;
    let mut y = y0;
    let add = |y: [C; N], k: [C; N], s: f64| -> [C; N] {
        let mut o = y;
        for i in 0..N {
            o[i] += s * k[i];
        }
        o
    };
    for s in 0..steps {
        let x = x0 + s as f64 * h;
        let k1 = f(x, y);
        let k2 = f(x + 0.5 * h, add(y, k1, 0.5 * h));
        let k3 = f(x + 0.5 * h, add(y, k2, 0.5 * h));
        let k4 = f(x + h, add(y, k3, h));
        for i in 0..N {
            y[i] += h / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }
    }
    y
}

fn richardson<const N: usize>(run: impl Fn(usize) -> [C; N], steps: usize) -> [C; N] {
    let coarse = run(steps);
    let fine = run(2 * steps);
    let mut out = fine;
    for i in 0..N {
        out[i] = (16.0 * fine[i] - coarse[i]) / 15.0;
    }
    out
}

/// `(a(λ), b(λ))` of `v1' = -iλ v1 + q v2`, `v2' = iλ v2 + r v1` on
/// `[-l, l]`: `φ = (e^{-iλx}, 0)` at the left edge, `a = φ1 e^{iλl}`,
/// `b = φ2 e^{-iλl}` at the right edge.
pub fn zs_shoot(q: &dyn Fn(f64) -> C, r: &dyn Fn(f64) -> C, lam: C, l: f64, steps: usize) -> (C, C) {
    let i = c(0.0, 1.0);
    let f = |x: f64, v: [C; 2]| -> [C; 2] { [-i * lam * v[0] + q(x) * v[1], i * lam * v[1] + r(x) * v[0]] };
    let y = richardson(|n| rk4(&f, -l, l, [(i * lam * l).exp(), C::new(0.0, 0.0)], n), steps);
    (y[0] * (i * lam * l).exp(), y[1] * (-i * lam * l).exp())
}

/// `(1/T, R/T)` of `v'' + (λ² + q) v = 0` for real `λ`: the solution equal
/// to `e^{iλx}` right of the support is written as `A e^{iλx} + B e^{-iλx}`
/// at the left edge.
pub fn schrodinger_shoot(q: &dyn Fn(f64) -> f64, lam: f64, l: f64, steps: usize) -> (C, C) {
    let i = c(0.0, 1.0);
    let f = |x: f64, v: [C; 2]| -> [C; 2] { [v[1], -(lam * lam + q(x)) * v[0]] };
    let e = (i * lam * l).exp();
    let y = richardson(|n| rk4(&f, l, -l, [e, i * lam * e], n), steps);
    // at x = -l: A e^{-iλl} + B e^{iλl} = y0, iλ(A e^{-iλl} - B e^{iλl}) = y1
    let ap = 0.5 * (y[0] + y[1] / (i * lam));
    let bm = 0.5 * (y[0] - y[1] / (i * lam));
    (ap * (i * lam * l).exp(), bm * (-i * lam * l).exp())
}

/// For `λ = iβ`: the solution equal to `e^{-βx}` right of the support is
/// `A e^{βx} + B e^{-βx}` at the left edge; returns `B / A`, which changes
/// sign at a bound state.
pub fn schrodinger_bound_defect(q: &dyn Fn(f64) -> f64, beta: f64, l: f64, steps: usize) -> f64 {
    let f = |x: f64, v: [C; 2]| -> [C; 2] { [v[1], (C::new(beta * beta, 0.0) - q(x)) * v[0]] };
    let e = (-beta * l).exp();
    let y = richardson(|n| rk4(&f, l, -l, [c(e, 0.0), c(-beta * e, 0.0)], n), steps);
    let a = 0.5 * (y[0].re + y[1].re / beta) * (beta * l).exp();
    let b = 0.5 * (y[0].re - y[1].re / beta) * (-beta * l).exp();
    b / a
}

/// Secant refinement of a real root of `f` starting from `x0`, `x1`.
pub fn secant(f: impl Fn(f64) -> f64, mut x0: f64, mut x1: f64) -> f64 {
    let (mut f0, mut f1) = (f(x0), f(x1));
    for _ in 0..60 {
        if f1 == f0 {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = f(x1);
        if (x1 - x0).abs() < 1e-14 {
            break;
        }
    }
    x1
}
