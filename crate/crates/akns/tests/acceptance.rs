//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `cargo test --release -p akns --test acceptance` prints the report and
//! exits successfully; add `-- --strict` (or set `AKNS_ACCEPTANCE_STRICT=1`)
//! to exit non-zero when any criterion fails. Criterion numbers given as
//! further arguments select a subset.

mod common;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use akns::akns_core::certifier::{self, Field};
use akns::akns_core::marchenko::{self, RoundtripConfig};
use akns::akns_core::schrodinger_scattering as schrod;
use akns::akns_core::zs_scattering::{self, SearchBox};
use akns::akns_core::*;
use akns::pde_oracle::{self, l2_distance, OracleConfig};
use common::*;

type Check = std::result::Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn core<T>(r: akns::akns_core::Result<T>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn max_diff(a: &[C], b: &[C]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max)
}

// ---------------------------------------------------------------- 1

fn thresholds() -> Check {
    let kdv = DispersionSpec::preset("kdv3").unwrap();
    let mkdv = DispersionSpec::preset("mkdv3").unwrap();
    let nls = DispersionSpec::preset("nls2").unwrap();
    let transport = DispersionSpec::preset("transport1").unwrap();
    let env = |delta: f64| DecayEnvelope { amplitude: 1.0, rate: 1.0, exponent_excess: delta, side: Side::Right, residual: 0.0 };
    let open = |d: &DispersionSpec, delta: f64| certifier::rho_window(&env(delta), Some(&env(delta)), d).window_nonempty;
    for d in [&kdv, &mkdv] {
        ensure(!open(d, 0.5), "δ = 1/2 must be rejected for degree 3")?;
        ensure(open(d, 0.5f64.next_up()), "next float above 1/2 must open the window for degree 3")?;
        ensure(!open(d, 0.25) && open(d, 0.75), "degree 3 window misplaced")?;
    }
    ensure(!open(&nls, 1.0), "δ = 1 must be rejected for degree 2")?;
    ensure(open(&nls, 1.0f64.next_up()), "next float above 1 must open the window for degree 2")?;
    for delta in [f64::MIN_POSITIVE, 1e-300, 0.5, 1.0, 2.0, 1e10, f64::MAX] {
        ensure(!open(&transport, delta), format!("transport window open at δ = {delta}"))?;
    }
    // the lower end is exactly 1 + 1/δ, the upper end the degree
    let r = certifier::rho_window(&env(0.5), None, &kdv);
    ensure(r.rho_window.lower == 3.0 && r.rho_window.upper == 3.0 && r.verdict == Verdict::ConditionsFailed, "kdv3 at δ = 1/2")?;
    // runtime of the threshold arithmetic itself
    let t = Instant::now();
    let mut acc = 0usize;
    for k in 1..=1000u32 {
        let delta = k as f64 / 1000.0;
        acc += certifier::window_nonempty(delta, 3) as usize + certifier::window_nonempty(delta, 2) as usize;
    }
    let per_call = t.elapsed() / 2000;
    ensure(acc == 500, format!("window count {acc}, expected 500"))?;
    ensure(per_call < Duration::from_millis(1), format!("{per_call:?} per decision"))?;
    Ok(format!("δ > 1/2 (degree 3), δ > 1 (degree 2), empty for -iz; {per_call:?} per decision"))
}

// ---------------------------------------------------------------- 2

fn unitarity() -> Check {
    let lam = zs_scattering::lambda_grid(8.0, 512);
    let g = Grid::with_spacing(-15.0, 15.0, 0.01);
    let nls: [(&str, Box<dyn Fn(f64) -> C>); 3] = [
        ("0.3 sech x", Box::new(|x| c(0.3 * sech(x), 0.0))),
        ("0.8 exp(-x^2)", Box::new(|x| c(0.8 * (-x * x).exp(), 0.0))),
        ("0.6 sech x e^{0.4ix}", Box::new(|x| 0.6 * sech(x) * C::from_polar(1.0, 0.4 * x))),
    ];
    let kdv: [(&str, Box<dyn Fn(f64) -> f64>); 3] = [
        ("1.5 exp(-x^2)", Box::new(|x| 1.5 * (-x * x).exp())),
        ("0.5 sech^2 x", Box::new(|x| 0.5 * sech(x).powi(2))),
        ("-exp(-(x-1)^2)", Box::new(|x| -(-(x - 1.0) * (x - 1.0)).exp())),
    ];
    let mut worst: f64 = 0.0;
    let mut slowest = Duration::ZERO;
    for (name, q) in nls.iter() {
        let t = Instant::now();
        let p = SampledPotential::focusing(g, q);
        let sd = core(zs_scattering::scattering_coefficients(&p, &lam))?;
        let d = sd.a.iter().zip(&sd.b).map(|(a, b)| (a.norm_sqr() + b.norm_sqr() - 1.0).abs()).fold(0.0, f64::max);
        slowest = slowest.max(t.elapsed());
        ensure(d < 1e-6, format!("NLS {name}: defect {d:.2e}"))?;
        worst = worst.max(d);
    }
    for (name, q) in kdv.iter() {
        let t = Instant::now();
        let p = SampledPotential::kdv(g, q);
        let sd = core(schrod::kdv_scattering_data(&p, &lam))?;
        let d = schrod::kdv_unitarity_defect(&sd);
        slowest = slowest.max(t.elapsed());
        ensure(d < 1e-6, format!("KdV {name}: defect {d:.2e}"))?;
        worst = worst.max(d);
    }
    ensure(slowest < Duration::from_secs(30), format!("slowest case {slowest:?}"))?;
    Ok(format!("max defect {worst:.2e} over 6 potentials, slowest case {slowest:.1?}"))
}

// ---------------------------------------------------------------- 3

fn reflectionless() -> Check {
    let lam = zs_scattering::lambda_grid(8.0, 512);
    let g = Grid::with_spacing(-20.0, 20.0, 0.01);
    let mut notes = Vec::new();
    for n in [1usize, 2] {
        let amp = n as f64;
        let q = move |x: f64| c(amp * sech(x), 0.0);
        let r = move |x: f64| c(-amp * sech(x), 0.0);
        let p = SampledPotential::focusing(g, q);
        let mut sd = core(zs_scattering::scattering_coefficients(&p, &lam))?;
        sd.bound_states = core(zs_scattering::find_bound_states(&p, SearchBox::default_for(&p)))?;
        let bmax = sd.b.iter().map(|z| z.norm()).fold(0.0, f64::max);
        ensure(bmax < 1e-4, format!("{n} sech: max |b| = {bmax:.2e}"))?;
        let mut got: Vec<C> = sd.bound_states.iter().map(|s| s.lambda).collect();
        got.sort_by(|a, b| a.im.total_cmp(&b.im));
        ensure(got.len() == n, format!("{n} sech: {} bound states", got.len()))?;
        let mut err: f64 = 0.0;
        for (k, l) in got.iter().enumerate() {
            err = err.max((l - c(0.0, k as f64 + 0.5)).norm());
        }
        ensure(err < 1e-5, format!("{n} sech: eigenvalue error {err:.2e}"))?;
        // shooting oracle: a vanishes at (k + 1/2) i and b vanishes on the axis
        let mut oracle_a: f64 = 0.0;
        for k in 0..n {
            let (a, _) = zs_shoot(&q, &r, c(0.0, k as f64 + 0.5), 20.0, 8000);
            oracle_a = oracle_a.max(a.norm());
        }
        let mut oracle_b: f64 = 0.0;
        for l in [-3.0, -0.7, 0.0, 0.4, 1.3, 5.0] {
            let (_, b) = zs_shoot(&q, &r, c(l, 0.0), 20.0, 8000);
            oracle_b = oracle_b.max(b.norm());
        }
        ensure(oracle_a < 1e-6 && oracle_b < 1e-6, format!("{n} sech oracle: |a| {oracle_a:.1e}, |b| {oracle_b:.1e}"))?;
        notes.push(format!("{n} sech: |b| {bmax:.1e}, λ err {err:.1e}"));
    }
    // 2 sech^2 x, Schrödinger case
    let q = |x: f64| 2.0 * sech(x).powi(2);
    let p = SampledPotential::kdv(g, q);
    let sd = core(schrod::kdv_scattering_data(&p, &lam))?;
    let rmax = sd.b.iter().zip(&sd.a).map(|(b, a)| (b / a).norm()).fold(0.0, f64::max);
    ensure(rmax < 1e-5, format!("2 sech^2: max |R1| = {rmax:.2e}"))?;
    let bs = core(schrod::kdv_bound_states(&p, f64::INFINITY))?;
    ensure(bs.len() == 1, format!("2 sech^2: {} bound states", bs.len()))?;
    let beta = bs[0].lambda.im;
    ensure((beta - 1.0).abs() < 1e-6, format!("2 sech^2: β = {beta}"))?;
    let beta_oracle = secant(|b| schrodinger_bound_defect(&q, b, 20.0, 8000), 0.999, 1.001);
    let (_, r_oracle) = schrodinger_shoot(&q, 0.7, 20.0, 8000);
    ensure((beta_oracle - 1.0).abs() < 1e-8 && r_oracle.norm() < 1e-6, format!("oracle β {beta_oracle}, |R/T| {:.1e}", r_oracle.norm()))?;
    notes.push(format!("2 sech^2: |R1| {rmax:.1e}, β err {:.1e}", (beta - 1.0).abs()));
    Ok(notes.join("; "))
}

// ---------------------------------------------------------------- 4

fn roundtrips() -> Check {
    let g = Grid::with_spacing(-15.0, 15.0, 0.01);
    let gk = Grid::with_spacing(-12.0, 12.0, 0.01);
    let cases: Vec<(&str, SampledPotential)> = vec![
        ("sech", SampledPotential::focusing(g, |x| c(sech(x), 0.0))),
        ("0.8 gauss", SampledPotential::focusing(g, |x| c(0.8 * (-x * x).exp(), 0.0))),
        ("chirped 1.2 gauss", SampledPotential::focusing(g, |x| 1.2 * (-x * x / 2.0).exp() * C::from_polar(1.0, 0.5 * x))),
        ("2 sech^2", SampledPotential::kdv(gk, |x| 2.0 * sech(x).powi(2))),
        ("1.5 gauss", SampledPotential::kdv(gk, |x| 1.5 * (-x * x).exp())),
        ("3 gauss(x/1.5) - bump", SampledPotential::kdv(gk, |x| 3.0 * (-x * x / 2.25).exp() - 0.5 * (-(x - 2.0).powi(2)).exp())),
    ];
    let mut parts = Vec::new();
    for (name, p) in &cases {
        let disp = match p.case_tag {
            CaseTag::Nls => DispersionSpec::nls(),
            CaseTag::Kdv => DispersionSpec::kdv(),
        };
        let t = Instant::now();
        let (out, rep) = core(marchenko::roundtrip_with(p, p.t, &disp, &RoundtripConfig::default()))?;
        let err = max_diff(&out.q, &p.q).max(max_diff(&out.r, &p.r));
        ensure(err < 1e-4, format!("{name}: L∞ {err:.2e} (cond {:.1e})", rep.max_cond))?;
        parts.push(format!("{name} {err:.1e} ({:.0?})", t.elapsed()));
    }
    Ok(parts.join(", "))
}

// ---------------------------------------------------------------- 5

fn commuting_square() -> Check {
    let dt = 0.25;
    let g = Grid::with_spacing(-20.0, 20.0, 0.01);
    let gk = Grid::with_spacing(-10.0, 10.0, 0.01);
    let lam = c(0.2, 0.5);
    let up = vec![BoundState::upper(lam, solitons::one_soliton_norming(lam, 0.0))];
    let one = core(solitons::soliton_potential(&up, &solitons::focusing_pairs(&up), &DispersionSpec::nls(), g, 0.0))?;
    let cases: Vec<(&str, SampledPotential, f64)> = vec![
        ("NLS 1-soliton", one, 5e-4),
        ("NLS gauss", SampledPotential::focusing(g, |x| c(0.8 * (-x * x).exp(), 0.0)), 5e-4),
        ("KdV 1-soliton", SampledPotential::kdv(gk, |x| 2.0 * sech(x).powi(2)), 1e-4),
        ("KdV gauss", SampledPotential::kdv(gk, |x| 1.5 * (-x * x).exp()), 1e-4),
    ];
    let mut parts = Vec::new();
    for (name, p, odt) in &cases {
        let disp = match p.case_tag {
            CaseTag::Nls => DispersionSpec::nls(),
            CaseTag::Kdv => DispersionSpec::kdv(),
        };
        let (ist, _) = core(marchenko::roundtrip_with(p, dt, &disp, &RoundtripConfig::default()))?;
        let pde = pde_oracle::flow(p, dt, *odt, &OracleConfig::default()).map_err(|e| e.to_string())?;
        let err = l2_distance(&ist.q, &pde.q, p.dx);
        ensure(err < 1e-3, format!("{name}: L2 {err:.2e}"))?;
        parts.push(format!("{name} {err:.1e}"));
    }
    Ok(parts.join(", "))
}

// ---------------------------------------------------------------- 6

fn dichotomy() -> Check {
    let g = Grid::with_spacing(-20.0, 20.0, 0.01);
    let gk = Grid::with_spacing(-10.0, 10.0, 0.01);
    let nls = DispersionSpec::nls();
    let s = |l: C, m: C| BoundState::upper(l, m);
    let two = vec![s(c(0.0, 0.5), c(0.0, -1.0)), s(c(0.0, 1.0), c(0.0, 2.0))];
    let moving = vec![s(c(0.3, 0.4), solitons::one_soliton_norming(c(0.3, 0.4), 1.0))];
    let one = vec![s(c(0.0, 0.5), c(0.0, -1.0))];
    let mut pots = Vec::new();
    for (name, up) in [("NLS 1", &one), ("NLS 2", &two), ("NLS moving", &moving)] {
        pots.push((name, core(solitons::soliton_potential(up, &solitons::focusing_pairs(up), &nls, g, 0.0))?));
    }
    pots.push(("KdV 1", core(solitons::kdv_soliton_potential(&[s(c(0.0, 1.0), c(2.0, 0.0))], gk, 0.0))?));
    pots.push((
        "KdV 2",
        core(solitons::kdv_soliton_potential(&[s(c(0.0, 1.0), c(6.0, 0.0)), s(c(0.0, 2.0), c(12.0, 0.0))], gk, 0.0))?,
    ));
    let mut worst = f64::INFINITY;
    for (name, p) in &pots {
        let mags: Vec<f64> = p.q.iter().map(|z| z.norm()).collect();
        let x = p.x();
        for side in [Side::Right, Side::Left] {
            for k in 100..=4000 {
                let delta = k as f64 * 1e-3;
                if let Some(res) = certifier::residual_at(&x, &mags, side, delta) {
                    ensure(res > certifier::RESIDUAL_BOUND, format!("{name} {side:?}: δ = {delta} fits with residual {res:.3}"))?;
                    worst = worst.min(res);
                }
            }
        }
    }
    let gauss = SampledPotential::focusing(Grid::with_spacing(-10.0, 10.0, 0.01), |x| c((-x * x).exp(), 0.0));
    let mut deltas = Vec::new();
    for side in [Side::Right, Side::Left] {
        let env = core(certifier::fit_envelope(&gauss, Field::Q, side))?;
        ensure((env.exponent_excess - 1.0).abs() <= 0.05, format!("gaussian {side:?}: δ = {}", env.exponent_excess))?;
        deltas.push(env.exponent_excess);
    }
    Ok(format!("5 soliton potentials, smallest residual at δ ≥ 0.1 is {worst:.3}; gaussian δ = {deltas:?}"))
}

// ---------------------------------------------------------------- 7

fn marchenko_vs_closed_form() -> Check {
    let g = Grid::linspace(-10.0, 10.0, 201);
    let nls = DispersionSpec::nls();
    let run = |up: Vec<BoundState>| -> std::result::Result<f64, String> {
        let lo = solitons::focusing_pairs(&up);
        let want = core(solitons::soliton_potential(&up, &lo, &nls, g, 0.0))?;
        let mut states = up.clone();
        states.extend(lo);
        let sd = ScatteringData::reflectionless(states, nls.clone(), CaseTag::Nls);
        let k = core(marchenko::build_kernels(&sd, g.start, g.end()))?;
        let got = core(marchenko::solve_marchenko(&k, g))?;
        Ok(max_diff(&got.q, &want.q).max(max_diff(&got.r, &want.r)))
    };
    let e1 = run(vec![BoundState::upper(c(0.1, 0.5), solitons::one_soliton_norming(c(0.1, 0.5), 0.5))])?;
    ensure(e1 < 1e-8, format!("one state: {e1:.2e}"))?;
    let e2 = run(vec![BoundState::upper(c(0.0, 0.5), c(0.0, -1.0)), BoundState::upper(c(0.3, 1.0), c(0.5, 2.0))])?;
    ensure(e2 < 1e-6, format!("two states: {e2:.2e}"))?;
    // KdV: 2 sech^2 and 6 sech^2 in closed form
    let k1 = core(solitons::kdv_soliton_potential(&[BoundState::upper(c(0.0, 1.0), c(2.0, 0.0))], g, 0.0))?;
    let ek1 = k1.x().iter().zip(&k1.q).map(|(x, q)| (q.re - 2.0 * sech(*x).powi(2)).abs()).fold(0.0, f64::max);
    ensure(ek1 < 1e-8, format!("KdV one state: {ek1:.2e}"))?;
    let k2 = core(solitons::kdv_soliton_potential(
        &[BoundState::upper(c(0.0, 1.0), c(6.0, 0.0)), BoundState::upper(c(0.0, 2.0), c(12.0, 0.0))],
        g,
        0.0,
    ))?;
    let ek2 = k2.x().iter().zip(&k2.q).map(|(x, q)| (q.re - 6.0 * sech(*x).powi(2)).abs()).fold(0.0, f64::max);
    ensure(ek2 < 1e-6, format!("KdV two states: {ek2:.2e}"))?;
    Ok(format!("NLS {e1:.1e} / {e2:.1e}, KdV {ek1:.1e} / {ek2:.1e}"))
}

// ---------------------------------------------------------------- 8

fn isospectrality() -> Check {
    let dt = 0.25;
    let g = Grid::with_spacing(-20.0, 20.0, 0.01);
    let p = SampledPotential::focusing(g, |x| 1.6 * (-x * x / 2.0).exp() * C::from_polar(1.0, 0.3 * x));
    let bx = SearchBox::default_for(&p);
    let before = core(zs_scattering::find_bound_states(&p, bx))?;
    let p1 = pde_oracle::flow(&p, dt, 5e-4, &OracleConfig::default()).map_err(|e| e.to_string())?;
    let after = core(zs_scattering::find_bound_states(&p1, bx))?;
    ensure(!before.is_empty() && before.len() == after.len(), format!("NLS counts {} vs {}", before.len(), after.len()))?;
    let mut err: f64 = 0.0;
    for s in &before {
        let d = after.iter().map(|t| (t.lambda - s.lambda).norm()).fold(f64::INFINITY, f64::min);
        err = err.max(d);
    }
    let gk = Grid::with_spacing(-15.0, 15.0, 0.01);
    let pk = SampledPotential::kdv(gk, |x| 3.0 * (-x * x / 2.0).exp());
    let kb = core(schrod::kdv_bound_states(&pk, f64::INFINITY))?;
    let pk1 = pde_oracle::flow(&pk, dt, 1e-4, &OracleConfig::default()).map_err(|e| e.to_string())?;
    let ka = core(schrod::kdv_bound_states(&pk1, f64::INFINITY))?;
    ensure(!kb.is_empty() && kb.len() == ka.len(), format!("KdV counts {} vs {}", kb.len(), ka.len()))?;
    let mut errk: f64 = 0.0;
    for (s, t) in kb.iter().zip(&ka) {
        errk = errk.max((s.lambda - t.lambda).norm());
    }
    ensure(err < 1e-4 && errk < 1e-4, format!("drift NLS {err:.2e}, KdV {errk:.2e}"))?;
    Ok(format!("{} NLS states drift {err:.1e}, {} KdV states drift {errk:.1e}", before.len(), kb.len()))
}

// ---------------------------------------------------------------- 9

fn indicator() -> Check {
    let g = Grid::with_spacing(-10.0, 10.0, 0.01);
    let gauss = SampledPotential::focusing(g, |x| c((-x * x).exp(), 0.0));
    let env = core(certifier::fit_envelope(&gauss, Field::Q, Side::Right))?;
    let report = certifier::rho_window(&env, Some(&env), &DispersionSpec::preset("mkdv3").unwrap());
    ensure(report.window_nonempty, format!("window {:?} empty", report.rho_window))?;
    let rho = report.rho_window.midpoint().ok_or("no midpoint")?;
    let angles: Vec<f64> = (1..6).map(|k| k as f64 * PI / 6.0).collect();
    let out = core(certifier::indicator_estimate(&gauss, rho, &angles))?;
    ensure(!out.samples.is_empty(), "no attainable rays")?;
    let worst = out.samples.iter().map(|s| s.estimate).fold(f64::NEG_INFINITY, f64::max);
    let zero = SampledPotential::zero(g, CaseTag::Nls);
    let z = core(certifier::indicator_estimate(&zero, rho, &angles))?;
    let zero_ok = z.samples.len() == angles.len() && z.samples.iter().all(|s| s.estimate == f64::NEG_INFINITY);
    let rays: Vec<String> = out.samples.iter().map(|s| format!("{:.2}:{:.3}@r{:.1}", s.angle, s.estimate, s.radius_cap)).collect();
    let msg = format!(
        "gaussian at ρ = {rho:.3} in ({}, {}): max h_b proxy {worst:.3} [{}], {} dropped; zero potential {}",
        report.rho_window.lower,
        report.rho_window.upper,
        rays.join(" "),
        out.dropped.len(),
        if zero_ok { "-inf on every ray" } else { "NOT -inf on every ray" }
    );
    if worst <= 0.1 && zero_ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() {
    let criteria: [(&str, u64, fn() -> Check); 9] = [
        ("threshold reproduction", 1, thresholds),
        ("unitarity", 180, unitarity),
        ("reflectionless spectra", 60, reflectionless),
        ("forward/inverse identity", 300, roundtrips),
        ("commuting square", 300, commuting_square),
        ("Lemma-1 dichotomy", 60, dichotomy),
        ("soliton/Marchenko agreement", 60, marchenko_vs_closed_form),
        ("isospectrality", 120, isospectrality),
        ("indicator sign behaviour", 120, indicator),
    ];
    let args: Vec<String> = std::env::args().skip(1).collect();
    let strict = args.iter().any(|a| a == "--strict") || std::env::var_os("AKNS_ACCEPTANCE_STRICT").is_some_and(|v| v == "1");
    let filter: Vec<&String> = args.iter().filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (k, (name, budget, f)) in criteria.iter().enumerate() {
        let n = k + 1;
        if !filter.is_empty() && !filter.iter().any(|a| **a == n.to_string()) {
            continue;
        }
        ran += 1;
        let t = Instant::now();
        let res = f();
        let el = t.elapsed();
        // criterion 1 times its own arithmetic; the rest carry wall-clock budgets
        let res = match res {
            Ok(msg) if n > 1 && el > Duration::from_secs(*budget) => Err(format!("{msg}; took {el:.1?} > {budget} s")),
            r => r,
        };
        match res {
            Ok(msg) => println!("criterion {n} [{name}]: PASS ({el:.1?}) {msg}"),
            Err(msg) => {
                failed += 1;
                println!("criterion {n} [{name}]: FAIL ({el:.1?}) {msg}");
            }
        }
    }
    println!("{}/{ran} criteria passed", ran - failed);
    if strict && failed > 0 {
        std::process::exit(1);
    }
}
