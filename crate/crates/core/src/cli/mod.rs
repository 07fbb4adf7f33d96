//! Command-line front end.

pub mod config;
pub mod output;
pub mod verify;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::coupling::{eval_coupling, CouplingError, CouplingSpec};
use crate::freefermion::{ground_energy, ModelConfig, Sector};
use crate::geometry::{field_grid, Plane};
use crate::phase::{classify_at, classify_point, Verdict};
use crate::scaling::{
    fit_power_law, full_sum_divergence_probe, predicted_law, singular_contribution, PathKind, ScalingError,
};

use config::{parse_config, ConfigError, PlaneSpec, RunConfig};
use output::{config_hash, fmt_opt, fmt_sig, write_json};
use verify::{run_verify, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_BROKEN: i32 = 2;
pub const EXIT_BOUNDARY: i32 = 3;
pub const EXIT_VERIFY_FAILED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "nhxy", version, about = "Non-Hermitian XY chain: spectra, phase maps, curvature and scaling")]
pub struct Cli {
    /// Run configuration (`section.key = value` lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for sampled verification points.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Quasiparticle spectrum and ground energy at one point.
    Spectrum,
    /// Phase verdict on a plane.
    PhaseMap,
    /// Berry curvature magnitude on a plane.
    CurvatureMap,
    /// Critical power laws along an approach path.
    Scaling,
    /// Exact-diagonalization checks of the free-fermion solution.
    Verify,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("cannot read config {path}: {source}")]
    ReadConfig {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write output: {0}")]
    Write(#[from] std::io::Error),
    #[error("this command needs {0}")]
    Missing(&'static str),
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    Scaling(#[from] ScalingError),
}

/// Parsed configuration together with the hash of its text.
struct Loaded {
    config: RunConfig,
    hash: String,
}

fn load(path: Option<&Path>) -> Result<Loaded, CliError> {
    let text = match path {
        Some(p) => fs::read_to_string(p).map_err(|source| CliError::ReadConfig {
            path: p.to_path_buf(),
            source,
        })?,
        None => String::new(),
    };
    Ok(Loaded {
        config: parse_config(&text)?,
        hash: config_hash(&text),
    })
}

/// Runs the parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    if let Some(n) = cli.threads {
        // a pool may already exist when called repeatedly in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32, CliError> {
    let loaded = load(cli.config.as_deref())?;
    fs::create_dir_all(&cli.out)?;
    match cli.command {
        Command::Spectrum => cmd_spectrum(&loaded, &cli.out),
        Command::PhaseMap => cmd_map(&loaded, &cli.out, false),
        Command::CurvatureMap => cmd_map(&loaded, &cli.out, true),
        Command::Scaling => cmd_scaling(&loaded, &cli.out),
        Command::Verify => cmd_verify(&loaded, &cli.out, cli.seed),
    }
}

fn eta_label(eta: Sector) -> &'static str {
    match eta {
        Sector::Even => "+",
        Sector::Odd => "-",
    }
}

fn model_json(cfg: &ModelConfig<f64>) -> Value {
    json!({ "J": cfg.j, "N": cfg.n, "eta": eta_label(cfg.eta) })
}

fn cmd_spectrum(loaded: &Loaded, out: &Path) -> Result<i32, CliError> {
    let c = &loaded.config;
    let cfg = c.model.ok_or(CliError::Missing("model.N"))?;
    let p = c.point.as_ref().ok_or(CliError::Missing("a point (point.<param> = value)"))?;
    let cv = eval_coupling(&c.coupling, p)?;
    let report = ground_energy(p, &cv, &cfg);
    let class = classify_point(p, &cv, &cfg);

    let mut csv = String::from("k,re_eps,im_eps,real_flag\n");
    for m in &report.modes {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            fmt_sig(m.k),
            fmt_sig(m.eps.re),
            fmt_sig(m.eps.im),
            m.real_flag
        );
    }
    fs::write(out.join("spectrum.csv"), csv)?;

    let point: Map<String, Value> = p
        .names()
        .iter()
        .zip(p.values())
        .map(|(n, v)| (n.clone(), json!(v)))
        .collect();
    let summary = json!({
        "config_hash": loaded.hash,
        "family": c.family,
        "model": model_json(&cfg),
        "point": point,
        "E_g": { "re": report.e_g.re + 0.0, "im": report.e_g.im + 0.0 },
        "all_real": report.all_real,
        "verdict": class.verdict,
        "offending_momenta": class.offending,
        "tolerance": cfg.tolerance(),
    });
    write_json(&out.join("summary.json"), &summary)?;
    Ok(match class.verdict {
        Verdict::Unbroken => EXIT_OK,
        Verdict::Broken => EXIT_BROKEN,
        Verdict::Boundary => EXIT_BOUNDARY,
    })
}

fn plane_json(spec: &PlaneSpec) -> Value {
    let axis = |a: &crate::geometry::Axis| json!({ "start": a.start, "stop": a.stop, "step": a.step, "count": a.count() });
    let (kind, fixed) = match spec.plane {
        Plane::OmegaGamma { lambda } => ("omega-gamma", json!({ "lambda": lambda })),
        Plane::GammaLambda { omega } => ("gamma-lambda", json!({ "omega": omega })),
    };
    json!({ "kind": kind, "fixed": fixed, "x": axis(&spec.x), "y": axis(&spec.y) })
}

struct MapRow {
    x: f64,
    y: f64,
    verdict: Verdict,
    omega_phi: Option<f64>,
    magnitude: Option<f64>,
}

fn cmd_map(loaded: &Loaded, out: &Path, curvature: bool) -> Result<i32, CliError> {
    let c = &loaded.config;
    let cfg = c.model.ok_or(CliError::Missing("model.N"))?;
    let spec = c.plane.as_ref().ok_or(CliError::Missing("a plane section"))?;
    if c.coupling != CouplingSpec::PaperExample {
        return Err(CliError::Unsupported(format!(
            "maps are defined on planes of the paper-example family, not \"{}\"",
            c.family
        )));
    }
    let rows: Vec<MapRow> = if curvature {
        field_grid(spec.plane, spec.x, spec.y, &cfg)
            .into_iter()
            .map(|r| MapRow {
                x: r.x,
                y: r.y,
                verdict: r.sample.verdict,
                omega_phi: r.sample.omega_phi,
                magnitude: r.sample.magnitude,
            })
            .collect()
    } else {
        let xs = spec.x.values();
        spec.y
            .values()
            .into_par_iter()
            .flat_map_iter(|y| {
                xs.iter()
                    .map(|&x| {
                        let (rho, lambda) = spec.plane.cylinder(x, y);
                        MapRow {
                            x,
                            y,
                            verdict: classify_at(lambda, rho, &cfg).verdict,
                            omega_phi: None,
                            magnitude: None,
                        }
                    })
                    .collect::<Vec<_>>()
            })
            .collect()
    };

    let mut csv = String::with_capacity(rows.len() * 32);
    csv.push_str("x,y,verdict,omega_phi,magnitude\n");
    let mut counts = [0usize; 3];
    for r in &rows {
        counts[r.verdict as usize] += 1;
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            fmt_sig(r.x),
            fmt_sig(r.y),
            r.verdict,
            fmt_opt(r.omega_phi),
            fmt_opt(r.magnitude)
        );
    }
    let stem = if curvature { "curvature_map" } else { "phase_map" };
    fs::write(out.join(format!("{stem}.csv")), csv)?;
    let sidecar = json!({
        "command": if curvature { "curvature-map" } else { "phase-map" },
        "config_hash": loaded.hash,
        "family": c.family,
        "model": model_json(&cfg),
        "plane": plane_json(spec),
        "rows": rows.len(),
        "counts": { "unbroken": counts[0], "broken": counts[1], "boundary": counts[2] },
        "tolerances": {
            "imaginary_part": cfg.tolerance(),
            "boundary_eps_squared": cfg.tolerance() * (2.0 * cfg.j).abs().max(1.0),
        },
    });
    write_json(&out.join(format!("{stem}.json")), &sidecar)?;
    Ok(EXIT_OK)
}

fn cmd_scaling(loaded: &Loaded, out: &Path) -> Result<i32, CliError> {
    let c = &loaded.config;
    let spec = c.scaling.as_ref().ok_or(CliError::Missing("a scaling section"))?;
    let j = c.model.map_or(1.0, |m| m.j);
    let kind = match spec.path.kind {
        PathKind::I => "I",
        PathKind::II => "II",
    };
    let mut csv = String::from("delta,value,quantity,path_kind\n");
    let mut fits = Vec::new();
    for &q in &spec.quantities {
        let samples = spec
            .deltas
            .iter()
            .map(|&d| Ok((d, singular_contribution(&spec.path, d, q, j)?)))
            .collect::<Result<Vec<_>, ScalingError>>()?;
        for (d, v) in &samples {
            let _ = writeln!(csv, "{},{},{},{kind}", fmt_sig(*d), fmt_sig(*v), q.name());
        }
        let fit = fit_power_law(&samples)?;
        let (pe, pp) = predicted_law(&spec.path, q, j);
        fits.push(json!({
            "quantity": q.name(),
            "exponent": fit.exponent,
            "prefactor": fit.sign * fit.prefactor,
            "predicted_exponent": pe,
            "predicted_prefactor": pp,
            "residual": fit.residual,
            "window": [fit.window.0, fit.window.1],
        }));
    }
    fs::write(out.join("scaling.csv"), csv)?;

    let probe = match c.model {
        Some(cfg) if cfg.eta == Sector::Even => {
            let r = full_sum_divergence_probe(&spec.path, &cfg, &spec.deltas)?;
            json!({
                "N": r.n,
                "omega_monotone": r.omega_monotone,
                "full_fit": r.full_fit,
                "rows": r.rows,
            })
        }
        _ => Value::Null,
    };
    let summary = json!({
        "config_hash": loaded.hash,
        "J": j,
        "path": spec.path,
        "fits": fits,
        "full_sum_probe": probe,
    });
    write_json(&out.join("scaling.json"), &summary)?;
    Ok(EXIT_OK)
}

fn cmd_verify(loaded: &Loaded, out: &Path, seed: u64) -> Result<i32, CliError> {
    let v = &loaded.config.verify;
    let opts = VerifyOptions {
        sizes: v.sizes.clone(),
        points: v.points,
        tolerance: v.tolerance,
        seed,
        lowering_override: None,
    };
    let report = run_verify(&opts);
    let table = report.table();
    print!("{table}");
    fs::write(out.join("verify.txt"), &table)?;
    write_json(
        &out.join("verify.json"),
        &json!({ "config_hash": loaded.hash, "report": report, "passed": report.passed() }),
    )?;
    if report.passed() {
        Ok(EXIT_OK)
    } else {
        for f in report.failures() {
            eprintln!("failed: {} (N = {}, worst {:e} > tol {:e})", f.check, f.n, f.worst, f.tolerance);
        }
        Ok(EXIT_VERIFY_FAILED)
    }
}
