//! Oracle equivalence suite: exact diagonalization against the free-fermion solution on seeded
//! random points of both regions.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::coupling::{eval_coupling, CouplingSpec, ParamPoint, GAMMA, LAMBDA};
use crate::freefermion::{ground_energy, quasiparticle_spectrum, radicand, ModelConfig, Sector};
use crate::geometry::{connection_numeric_pair_in, curvature_cylindrical, curvature_from_energy, Gauge};
use crate::oracle::{
    biorthogonal_ground, build_hamiltonian_raw, conjugate_pairing_defect, multiset_distance, rt_residual,
    rt_state_test, sector_spectrum, RtVerdict,
};
use crate::phase::{classify_at, Verdict};

/// Errors above the requested tolerance but below this are reported as tolerance-bound.
pub const CORRECTNESS_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    ToleranceBound,
    Fail,
}

impl Status {
    fn label(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::ToleranceBound => "FAIL (tolerance-bound)",
            Status::Fail => "FAIL",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Unbroken,
    Broken,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub check: &'static str,
    pub n: usize,
    pub region: Region,
    pub samples: usize,
    /// Largest error over the samples.
    pub worst: f64,
    pub tolerance: f64,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub rows: Vec<CheckRow>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.status == Status::Pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRow> {
        self.rows.iter().filter(|r| r.status != Status::Pass)
    }

    /// Fixed-width table, one line per check.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<22} {:>3} {:<9} {:>7} {:>11} {:>9}  status", "check", "N", "region", "samples", "worst", "tol");
        for r in &self.rows {
            let region = match r.region {
                Region::Unbroken => "unbroken",
                Region::Broken => "broken",
            };
            let _ = writeln!(
                s,
                "{:<22} {:>3} {:<9} {:>7} {:>11.3e} {:>9.1e}  {}",
                r.check,
                r.n,
                region,
                r.samples,
                r.worst,
                r.tolerance,
                r.status.label()
            );
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub sizes: Vec<usize>,
    pub points: usize,
    pub tolerance: f64,
    pub seed: u64,
    /// Replaces `|Λ|` in the `σ⁻σ⁻` coefficient of the oracle Hamiltonian. Test harness only.
    pub lowering_override: Option<Complex64>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            sizes: vec![4, 6, 8],
            points: 20,
            tolerance: 1e-8,
            seed: 0,
            lowering_override: None,
        }
    }
}

/// Points whose every grid radicand (both sectors) is at least this far from zero, so that the dense
/// eigensolver is well conditioned.
const MARGIN: f64 = 0.05;

/// Seeded points `(ω, γ, λ)` of the built-in family in the requested region at size `n`.
pub fn sample_points(n: usize, region: Region, count: usize, seed: u64) -> Vec<ParamPoint<f64>> {
    let salt = n as u64 * 2 + u64::from(region == Region::Broken);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let cfg = ModelConfig::unit(n).expect("valid size");
    let mut grid = cfg.grid();
    grid.extend(ModelConfig::<f64>::new(1.0, n, Sector::Odd).expect("valid size").grid());
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let omega: f64 = rng.gen_range(-1.5..1.5);
        let gamma: f64 = rng.gen_range(-1.5..1.5);
        let lambda: f64 = rng.gen_range(-2.5..2.5);
        let g = omega.hypot(gamma);
        if grid.iter().any(|&k| radicand(k, lambda, g).abs() < MARGIN) {
            continue;
        }
        let verdict = classify_at(lambda, g, &cfg).verdict;
        let wanted = match region {
            Region::Unbroken => Verdict::Unbroken,
            Region::Broken => Verdict::Broken,
        };
        if verdict == wanted {
            out.push(ParamPoint::cylinder(omega, gamma, lambda));
        }
    }
    out
}

fn status(worst: f64, tol: f64) -> Status {
    if worst <= tol {
        Status::Pass
    } else if worst <= CORRECTNESS_FLOOR.max(tol) {
        Status::ToleranceBound
    } else {
        Status::Fail
    }
}

/// Per-point errors of every check, in a fixed order.
fn point_errors(n: usize, region: Region, p: &ParamPoint<f64>, opts: &VerifyOptions) -> Vec<(&'static str, f64)> {
    let spec = CouplingSpec::PaperExample;
    let cv = eval_coupling(&spec, p).expect("built-in family");
    let lowering = opts
        .lowering_override
        .unwrap_or(Complex64::new(cv.abs_lambda, 0.0));
    let h = build_hamiltonian_raw(n, 1.0, cv.coupling, lowering, p.lambda()).expect("size checked");
    let scale = h.frobenius_norm().max(1.0);
    let mut out = Vec::new();

    for eta in [Sector::Even, Sector::Odd] {
        let cfg = ModelConfig::new(1.0, n, eta).expect("valid size");
        let name = match eta {
            Sector::Even => "spectrum_even",
            Sector::Odd => "spectrum_odd",
        };
        let err = match (sector_spectrum(&h, eta), quasiparticle_spectrum(&cfg, p, &cv)) {
            (Ok(ed), Ok(qp)) => {
                let mag = ed.eigenvalues.iter().map(|z| z.norm()).fold(1.0, f64::max);
                multiset_distance(&ed.eigenvalues, &qp).map_or(f64::INFINITY, |d| d / mag)
            }
            _ => f64::INFINITY,
        };
        out.push((name, err));
        if eta == Sector::Even {
            let pairing = sector_spectrum(&h, eta)
                .map(|s| conjugate_pairing_defect(&s.eigenvalues))
                .unwrap_or(f64::INFINITY);
            out.push(("conjugate_pairs", pairing));
        }
    }

    out.push(("rt_residual", rt_residual(&h, cv.phi) / scale));

    let cfg = ModelConfig::unit(n).expect("valid size");
    let ground = biorthogonal_ground(&h, Sector::Even);
    let expected = match region {
        Region::Unbroken => RtVerdict::Symmetric,
        Region::Broken => RtVerdict::Broken,
    };
    let verdict_ok = ground
        .as_ref()
        .ok()
        .and_then(|g| rt_state_test(g, cv.phi, n).ok())
        .is_some_and(|v| v == expected);
    out.push(("rt_state", if verdict_ok { 0.0 } else { 1.0 }));

    if region == Region::Unbroken {
        let e_g = ground_energy(p, &cv, &cfg).e_g;
        let err = ground
            .as_ref()
            .map(|g| (g.eigenvalue - e_g).norm() / e_g.norm().max(1.0))
            .unwrap_or(f64::INFINITY);
        out.push(("ground_energy", err));

        let rho = p.rho().expect("built-in family");
        let lambda = p.lambda();
        let identity = match (
            curvature_cylindrical(rho, lambda, &cfg).omega_phi,
            curvature_from_energy(rho, lambda, &cfg, None),
        ) {
            (Some(a), Ok(b)) => (a - b).abs() / a.abs().max(1.0),
            _ => f64::INFINITY,
        };
        out.push(("energy_curvature", identity));

        out.push(("gauge_independence", gauge_defect(p, &cfg)));
    }
    out
}

/// Difference between the numeric (γ, λ) curvature computed in the vacuum and largest-component
/// gauges, summed over pairs.
fn gauge_defect(p: &ParamPoint<f64>, cfg: &ModelConfig<f64>) -> f64 {
    let spec = CouplingSpec::PaperExample;
    let gi = p.index_of(GAMMA).expect("schema");
    let li = p.index_of(LAMBDA).expect("schema");
    let h = 1e-3;
    let curl = |gauge: Gauge| -> Option<Complex64> {
        let a = |q: ParamPoint<f64>, idx: usize| -> Option<Complex64> {
            cfg.pair_momenta()
                .into_iter()
                .map(|k| connection_numeric_pair_in(k, &spec, &q, cfg, 1e-5, gauge).ok().map(|c| c.components[idx]))
                .sum()
        };
        let g0 = p.values()[gi];
        let l0 = p.values()[li];
        let d_g = (a(p.with_index(gi, g0 + h), li)? - a(p.with_index(gi, g0 - h), li)?) / (2.0 * h);
        let d_l = (a(p.with_index(li, l0 + h), gi)? - a(p.with_index(li, l0 - h), gi)?) / (2.0 * h);
        Some(d_g - d_l)
    };
    match (curl(Gauge::Vacuum), curl(Gauge::Largest)) {
        (Some(a), Some(b)) => (a - b).norm() / a.norm().max(1.0),
        _ => f64::INFINITY,
    }
}

/// Per-check tolerances. Spectra and pairing use the requested value; the others scale with it
/// from their own defaults (finite-difference checks are 100 times looser).
fn tolerance_for(check: &str, requested: f64) -> f64 {
    match check {
        "rt_residual" => requested.min(1e-12),
        "ground_energy" => requested.min(1e-9),
        "energy_curvature" | "gauge_independence" => (requested * 100.0).min(CORRECTNESS_FLOOR),
        "rt_state" => 0.0,
        _ => requested,
    }
}

pub fn run_verify(opts: &VerifyOptions) -> VerifyReport {
    let mut rows = Vec::new();
    for &n in &opts.sizes {
        for region in [Region::Unbroken, Region::Broken] {
            let points = sample_points(n, region, opts.points, opts.seed);
            let per_point: Vec<Vec<(&'static str, f64)>> =
                points.par_iter().map(|p| point_errors(n, region, p, opts)).collect();
            let Some(first) = per_point.first() else { continue };
            for (idx, &(check, _)) in first.iter().enumerate() {
                let worst = per_point.iter().map(|v| v[idx].1).fold(0.0, |a: f64, b| if b.is_nan() { f64::INFINITY } else { a.max(b) });
                let tolerance = tolerance_for(check, opts.tolerance);
                let st = if check == "rt_state" {
                    if worst == 0.0 {
                        Status::Pass
                    } else {
                        Status::Fail
                    }
                } else {
                    status(worst, tolerance)
                };
                rows.push(CheckRow {
                    check,
                    n,
                    region,
                    samples: per_point.len(),
                    worst,
                    tolerance,
                    status: st,
                });
            }
        }
    }
    VerifyReport { seed: opts.seed, rows }
}
