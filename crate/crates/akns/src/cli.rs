//! Command-line pipeline. The binary only parses arguments and maps errors
//! to exit codes; everything else lives here so it can be tested.

use std::io::Write;
use std::path::{Path, PathBuf};

use akns_core::marchenko::{self, MarchenkoConfig, PairPolicy, RoundtripConfig};
use akns_core::zs_scattering::{self, SearchBox};
use akns_core::{certifier, evolution, solitons, BoundState, CaseTag, Complex64, DispersionSpec, Grid, ScatteringData};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::pde_oracle::{self, l2_distance, OracleConfig, Reduction};
use crate::{io, AppError};

#[derive(Parser, Debug)]
#[command(name = "akns", version, about = "Inverse scattering toolkit for the AKNS system and KdV")]
pub struct Cli {
    /// Worker threads for the data-parallel stages.
    #[arg(long, global = true, env = "AKNS_THREADS")]
    pub threads: Option<usize>,
    /// JSON file supplying defaults for the flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Potential CSV to scattering JSON.
    Forward {
        #[arg(long = "in")]
        input: PathBuf,
        /// Real spectral grid `lo:hi:n`.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        /// Eigenvalue search box `re_lo:re_hi:im_lo:im_hi` (NLS case).
        #[arg(long = "box", allow_hyphen_values = true)]
        search_box: Option<String>,
        #[arg(long)]
        dispersion: Option<String>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Evolve scattering JSON to `t1`.
    Evolve {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        t1: f64,
        /// Replace the dispersion stored in the file.
        #[arg(long)]
        dispersion: Option<String>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Scattering JSON to potential CSV.
    Inverse {
        #[arg(long = "in")]
        input: PathBuf,
        /// Reconstruction grid `lo:hi:n`.
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        #[arg(long, value_parser = parse_pair)]
        pair: Option<PairPolicy>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Soliton specification JSON to potential CSV.
    Soliton {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        t: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Decay certificate from two snapshots.
    Certify {
        #[arg(long)]
        t0: PathBuf,
        #[arg(long)]
        t1: PathBuf,
        #[arg(long)]
        dispersion: Option<String>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Forward, evolve to `t1`, inverse; prints an error summary line.
    Roundtrip {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        t1: f64,
        #[arg(long)]
        dispersion: Option<String>,
        /// Oracle step used as reference when `t1` differs from the input time.
        #[arg(long, default_value_t = 5e-4)]
        oracle_dt: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Direct PDE integration.
    Oracle {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        steps: usize,
        #[arg(long, allow_hyphen_values = true)]
        dt: f64,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Args, Debug, Clone)]
pub struct OutArg {
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Defaults read from `--config`; flags win.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub threads: Option<usize>,
    pub dispersion: Option<String>,
    pub grid: Option<String>,
    #[serde(rename = "box")]
    pub search_box: Option<String>,
    pub marchenko: Option<MarchenkoConfig>,
    pub oracle: Option<OracleConfig>,
}

/// One soliton per entry of `upper`; `lower` defaults to the focusing
/// partners.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolitonSpec {
    #[serde(rename = "case", default = "nls_case")]
    pub case_tag: CaseTag,
    #[serde(default)]
    pub dispersion: Option<DispersionChoice>,
    pub upper: Vec<StateSpec>,
    #[serde(default)]
    pub lower: Option<Vec<StateSpec>>,
}

fn nls_case() -> CaseTag {
    CaseTag::Nls
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSpec {
    pub lambda: Complex64,
    pub norming: Complex64,
}

/// A preset name or an explicit rational `A₀`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DispersionChoice {
    Preset(String),
    Spec(DispersionSpec),
}

impl DispersionChoice {
    pub fn resolve(&self) -> Result<DispersionSpec, AppError> {
        match self {
            DispersionChoice::Preset(name) => dispersion_arg(name),
            DispersionChoice::Spec(s) => Ok(s.clone()),
        }
    }
}

/// Error summary printed by `roundtrip`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundtripSummary {
    pub reference: String,
    pub max_error: f64,
    pub l2_error: f64,
    pub max_cond: f64,
    pub left_points: usize,
    pub warnings: Vec<String>,
}

fn parse_pair(s: &str) -> Result<PairPolicy, String> {
    match s {
        "auto" => Ok(PairPolicy::Auto),
        "right" => Ok(PairPolicy::Right),
        "left" => Ok(PairPolicy::Left),
        _ => Err(format!("unknown pair '{s}' (auto, right, left)")),
    }
}

fn fields<const N: usize>(s: &str, what: &str) -> Result<[f64; N], AppError> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != N {
        return Err(AppError::Usage(format!("{what} '{s}' needs {N} ':'-separated fields")));
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.trim().parse().map_err(|_| AppError::Usage(format!("{what} '{s}': bad number '{p}'")))?;
    }
    Ok(out)
}

/// `lo:hi:n`, inclusive endpoints.
pub fn parse_grid(s: &str) -> Result<Grid, AppError> {
    let [lo, hi, n] = fields::<3>(s, "grid")?;
    if !(n >= 2.0 && n.fract() == 0.0 && lo < hi && lo.is_finite() && hi.is_finite()) {
        return Err(AppError::Usage(format!("grid '{s}' needs lo < hi and an integer n >= 2")));
    }
    Ok(Grid::linspace(lo, hi, n as usize))
}

pub fn parse_box(s: &str) -> Result<SearchBox, AppError> {
    let [a, b, c, d] = fields::<4>(s, "box")?;
    if !(a < b && c < d && c >= 0.0) {
        return Err(AppError::Usage(format!("box '{s}' must be re_lo:re_hi:im_lo:im_hi with im_lo >= 0")));
    }
    Ok(SearchBox::new(a, b, c, d))
}

/// A preset (`kdv3`, `nls2`, `mkdv3`, `transport1`) or a JSON file.
pub fn dispersion_arg(s: &str) -> Result<DispersionSpec, AppError> {
    if let Some(d) = DispersionSpec::preset(s) {
        return Ok(d);
    }
    let path = Path::new(s);
    if path.exists() {
        let d: DispersionSpec = io::read_json(path)?;
        d.validate()?;
        return Ok(d);
    }
    Err(AppError::Usage(format!("unknown dispersion '{s}' (kdv3, nls2, mkdv3, transport1 or a JSON file)")))
}

fn default_dispersion(case: CaseTag) -> DispersionSpec {
    match case {
        CaseTag::Nls => DispersionSpec::nls(),
        CaseTag::Kdv => DispersionSpec::kdv(),
    }
}

fn emit(out: &OutArg, text: &str) -> Result<(), AppError> {
    match &out.out {
        Some(p) => std::fs::write(p, text).map_err(|e| AppError::io(p, e)),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes()).map_err(|e| AppError::io(Path::new("<stdout>"), e))
        }
    }
}

fn configure_threads(n: Option<usize>) -> Result<(), AppError> {
    if let Some(n) = n {
        if n == 0 {
            return Err(AppError::Usage(String::from("--threads must be positive")));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Execute a parsed command line.
pub fn run(cli: Cli) -> Result<(), AppError> {
    let cfg: Config = match &cli.config {
        Some(p) => io::read_json(p)?,
        None => Config::default(),
    };
    configure_threads(cli.threads.or(cfg.threads))?;
    let mcfg = cfg.marchenko.clone().unwrap_or_default();
    let ocfg = cfg.oracle.clone().unwrap_or_default();
    let pick_disp = |flag: &Option<String>| -> Result<Option<DispersionSpec>, AppError> {
        flag.as_ref().or(cfg.dispersion.as_ref()).map(|s| dispersion_arg(s)).transpose()
    };
    match cli.command {
        Command::Forward { input, grid, search_box, dispersion, out } => {
            let p = io::read_potential(&input)?;
            let lam = match grid.as_ref().or(cfg.grid.as_ref()) {
                Some(g) => parse_grid(g)?.points(),
                None => {
                    let d = RoundtripConfig::default();
                    zs_scattering::lambda_grid(d.lambda_half_width, d.lambda_points)
                }
            };
            let bx = match search_box.as_ref().or(cfg.search_box.as_ref()) {
                Some(b) => parse_box(b)?,
                None => SearchBox::default_for(&p),
            };
            let mut sd = zs_scattering::forward(&p, &lam, bx)?;
            sd.t = p.t;
            sd.dispersion = pick_disp(&dispersion)?.unwrap_or_else(|| default_dispersion(p.case_tag));
            emit(&out, &io::to_json(&sd)?)
        }
        Command::Evolve { input, t1, dispersion, out } => {
            let mut sd: ScatteringData = io::read_json(&input)?;
            if let Some(d) = pick_disp(&dispersion)? {
                sd.dispersion = d;
            }
            emit(&out, &io::to_json(&evolution::evolve(&sd, t1)?)?)
        }
        Command::Inverse { input, grid, pair, out } => {
            let sd: ScatteringData = io::read_json(&input)?;
            let g = parse_grid(&grid)?;
            let mut m = mcfg;
            if let Some(p) = pair {
                m.pair = p;
            }
            let k = marchenko::build_kernels_with(&sd, g.start, g.end(), &m)?;
            let (p, rep) = marchenko::solve_marchenko_report(&k, g)?;
            for w in &rep.warnings {
                eprintln!("warning: {w}");
            }
            emit(&out, &io::potential_csv(&p)?)
        }
        Command::Soliton { spec, grid, t, out } => {
            let s: SolitonSpec = io::read_json(&spec)?;
            let g = parse_grid(&grid)?;
            let upper: Vec<BoundState> = s.upper.iter().map(|u| BoundState::upper(u.lambda, u.norming)).collect();
            let p = match s.case_tag {
                CaseTag::Kdv => solitons::kdv_soliton_potential(&upper, g, t)?,
                CaseTag::Nls => {
                    let lower = match &s.lower {
                        Some(l) => l.iter().map(|v| BoundState::lower(v.lambda, v.norming)).collect(),
                        None => solitons::focusing_pairs(&upper),
                    };
                    let d = match &s.dispersion {
                        Some(c) => c.resolve()?,
                        None => DispersionSpec::nls(),
                    };
                    solitons::soliton_potential(&upper, &lower, &d, g, t)?
                }
            };
            emit(&out, &io::potential_csv(&p)?)
        }
        Command::Certify { t0, t1, dispersion, out } => {
            let p0 = io::read_potential(&t0)?;
            let p1 = io::read_potential(&t1)?;
            let d = pick_disp(&dispersion)?.unwrap_or_else(|| default_dispersion(p0.case_tag));
            emit(&out, &io::to_json(&certifier::certify(&p0, &p1, &d)?)?)
        }
        Command::Roundtrip { input, t1, dispersion, oracle_dt, out } => {
            let p = io::read_potential(&input)?;
            let d = pick_disp(&dispersion)?.unwrap_or_else(|| default_dispersion(p.case_tag));
            let rcfg = RoundtripConfig { marchenko: mcfg, ..Default::default() };
            let (got, rep) = marchenko::roundtrip_with(&p, t1, &d, &rcfg)?;
            let (reference, want) = if t1 == p.t {
                (String::from("input"), p.clone())
            } else {
                (String::from("oracle"), pde_oracle::flow(&p, t1, oracle_dt, &ocfg)?)
            };
            let max_error = got.q.iter().zip(&want.q).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            let summary = RoundtripSummary {
                reference,
                max_error,
                l2_error: l2_distance(&got.q, &want.q, p.dx),
                max_cond: rep.max_cond,
                left_points: rep.left_points,
                warnings: rep.warnings,
            };
            if out.out.is_some() {
                emit(&out, &io::potential_csv(&got)?)?;
            }
            println!(
                "max_error={} l2_error={} reference={} max_cond={:.3e}",
                io::fmt_f64(summary.max_error),
                io::fmt_f64(summary.l2_error),
                summary.reference,
                summary.max_cond
            );
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            Ok(())
        }
        Command::Oracle { input, steps, dt, out } => {
            let p = io::read_potential(&input)?;
            let q = match p.case_tag {
                CaseTag::Kdv => pde_oracle::step_kdv_with(&p, dt, steps, &ocfg)?,
                CaseTag::Nls => {
                    let red = Reduction::detect(&p).ok_or_else(|| {
                        AppError::Usage(String::from("NLS-case input must satisfy r = -conj(q) or r = q"))
                    })?;
                    pde_oracle::step_nls_with(&p, dt, steps, red, &ocfg)?
                }
            };
            emit(&out, &io::potential_csv(&q)?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_and_box_parsing() {
        let g = parse_grid("-20:20:2048").unwrap();
        assert_eq!((g.start, g.end(), g.len), (-20.0, 20.0, 2048));
        assert!(parse_grid("1:0:10").is_err());
        assert!(parse_grid("0:1:2.5").is_err());
        assert!(parse_grid("0:1").is_err());
        assert_eq!(parse_box("-1:1:0:2").unwrap(), SearchBox::new(-1.0, 1.0, 0.0, 2.0));
        assert!(parse_box("-1:1:-1:2").is_err());
    }

    #[test]
    fn presets_resolve() {
        assert_eq!(dispersion_arg("kdv3").unwrap().effective_degree(), Some(3));
        assert_eq!(dispersion_arg("nls2").unwrap().effective_degree(), Some(2));
        assert_eq!(dispersion_arg("transport1").unwrap().effective_degree(), Some(1));
        assert!(matches!(dispersion_arg("nope"), Err(AppError::Usage(_))));
    }

    #[test]
    fn soliton_spec_json() {
        let s: SolitonSpec = io::from_json(r#"{"upper":[{"lambda":[0,0.5],"norming":[0,-1]}]}"#).unwrap();
        assert_eq!(s.case_tag, CaseTag::Nls);
        assert!(s.lower.is_none());
        let s: SolitonSpec =
            io::from_json(r#"{"case":"kdv","dispersion":"kdv3","upper":[{"lambda":[0,1],"norming":[2,0]}]}"#).unwrap();
        assert_eq!(s.dispersion, Some(DispersionChoice::Preset(String::from("kdv3"))));
    }

    #[test]
    fn config_rejects_unknown_keys() {
        assert!(io::from_json::<Config>(r#"{"threads":2,"grid":"-8:8:512"}"#).is_ok());
        assert!(io::from_json::<Config>(r#"{"thread":2}"#).is_err());
    }
}
