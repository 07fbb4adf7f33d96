//! Critical scaling of the ground-energy derivatives and the curvature near the boundary
//! surface `λ² − ρ² = 1` of the built-in family.

use serde::Serialize;
use thiserror::Error;

use crate::freefermion::{band, radicand, ModelConfig, Sector};
use crate::phase::{classify_at, Verdict};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScalingError {
    #[error("invalid approach path: {0}")]
    Path(String),
    #[error("point (ρ = {rho}, λ = {lambda}) is {verdict}, expected unbroken")]
    NotUnbroken { rho: f64, lambda: f64, verdict: Verdict },
    #[error("scaling sums are defined on the even-sector grid")]
    OddSector,
    #[error("distance δ = {0} must be positive")]
    Distance(f64),
    #[error("a power-law fit needs at least 5 samples, got {0}")]
    TooFewSamples(usize),
    #[error("samples change sign; no single power law")]
    SignChange,
}

/// `(∂E_g/∂λ, ∂E_g/∂ρ) = (−4J² Σ (λ − cos k)/ε_k, 4J² Σ ρ sin²k/ε_k)` over the pair momenta.
pub fn energy_first_derivs<T: Real>(rho: T, lambda: T, cfg: &ModelConfig<T>) -> Result<(T, T), ScalingError> {
    if cfg.eta == Sector::Odd {
        return Err(ScalingError::OddSector);
    }
    let verdict = classify_at(lambda, rho.abs(), cfg).verdict;
    if verdict != Verdict::Unbroken {
        return Err(ScalingError::NotUnbroken {
            rho: rho.to_f64().unwrap_or(f64::NAN),
            lambda: lambda.to_f64().unwrap_or(f64::NAN),
            verdict,
        });
    }
    let four_j2 = T::lit(4.0) * cfg.j * cfg.j;
    let (mut dl, mut dr) = (T::zero(), T::zero());
    for k in cfg.pair_momenta() {
        let eps = band(k, lambda, rho.abs(), cfg.j).re;
        let s = k.sin();
        dl = dl - four_j2 * (lambda - k.cos()) / eps;
        dr = dr + four_j2 * rho * s * s / eps;
    }
    Ok((dl, dr))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PathKind {
    /// Fixed `ρ`, `λ ↓ λ_c = √(ρ² + 1)`.
    I,
    /// Fixed `λ`, `ρ ↑ ρ_c = √(λ² − 1)`.
    II,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApproachPath {
    pub kind: PathKind,
    /// `ρ` for kind I, `λ` for kind II.
    pub fixed: f64,
    /// `λ_c` for kind I, `ρ_c` for kind II.
    pub critical: f64,
    /// `arccos(1/λ_c)`.
    pub k_c: f64,
}

impl ApproachPath {
    pub fn kind_i(rho: f64) -> Result<Self, ScalingError> {
        if !rho.is_finite() || rho <= 0.0 {
            return Err(ScalingError::Path(format!("path I requires ρ > 0, got {rho}")));
        }
        let lambda_c = rho.hypot(1.0);
        Self::checked(PathKind::I, rho, lambda_c, lambda_c, rho)
    }

    pub fn kind_ii(lambda: f64) -> Result<Self, ScalingError> {
        if !lambda.is_finite() || lambda.abs() <= 1.0 {
            return Err(ScalingError::Path(format!("path II requires |λ| > 1, got {lambda}")));
        }
        let rho_c = (lambda * lambda - 1.0).sqrt();
        Self::checked(PathKind::II, lambda, rho_c, lambda, rho_c)
    }

    fn checked(kind: PathKind, fixed: f64, critical: f64, lambda_c: f64, rho_c: f64) -> Result<Self, ScalingError> {
        let k_c = (1.0 / lambda_c).acos();
        let found = critical_momentum_numeric(lambda_c, rho_c);
        if (found - k_c).abs() > 1e-5 {
            return Err(ScalingError::Path(format!(
                "band minimum at k = {found} does not sit at arccos(1/λ_c) = {k_c}"
            )));
        }
        Ok(Self {
            kind,
            fixed,
            critical,
            k_c,
        })
    }

    /// `(ρ, λ)` at distance `δ` from the critical point, on the unbroken side.
    pub fn point(&self, delta: f64) -> (f64, f64) {
        match self.kind {
            PathKind::I => (self.fixed, self.critical + delta),
            PathKind::II => (self.critical - delta, self.fixed),
        }
    }

    /// `∂(radicand at k_c)/∂δ` at the critical point.
    fn radicand_slope(&self) -> f64 {
        let (rho, lambda) = self.point(0.0);
        let (s, c) = self.k_c.sin_cos();
        match self.kind {
            PathKind::I => 2.0 * (lambda - c),
            PathKind::II => 2.0 * rho * s * s,
        }
    }
}

/// Minimizer of the radicand over `k ∈ (0, π)`, by a scan and golden-section refinement.
pub fn critical_momentum_numeric(lambda: f64, g: f64) -> f64 {
    let f = |k: f64| radicand(k, lambda, g);
    let n = 4096;
    let h = std::f64::consts::PI / n as f64;
    let best = (1..n)
        .min_by(|&a, &b| f(a as f64 * h).total_cmp(&f(b as f64 * h)))
        .expect("nonempty scan");
    let (mut a, mut b) = ((best - 1) as f64 * h, (best + 1) as f64 * h);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let x1 = b - ratio * (b - a);
        let x2 = a + ratio * (b - a);
        if f(x1) < f(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    (a + b) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    DEdLambda,
    DEdRho,
    OmegaPhi,
}

impl Quantity {
    pub const ALL: [Quantity; 3] = [Quantity::DEdLambda, Quantity::DEdRho, Quantity::OmegaPhi];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::DEdLambda => "dE_dlambda",
            Quantity::DEdRho => "dE_drho",
            Quantity::OmegaPhi => "omega_phi",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|q| q.name() == s)
    }
}

fn summand(q: Quantity, k: f64, rho: f64, lambda: f64, j: f64) -> f64 {
    let eps = band(k, lambda, rho, j).re;
    let (s, c) = k.sin_cos();
    match q {
        Quantity::DEdLambda => -4.0 * j * j * (lambda - c) / eps,
        Quantity::DEdRho => 4.0 * j * j * rho * s * s / eps,
        Quantity::OmegaPhi => 4.0 * j * j * j * rho * (lambda - c) * s * s / (eps * eps * eps),
    }
}

/// The `k = k_c` summand of the quantity at distance `δ` along the path.
pub fn singular_contribution(path: &ApproachPath, delta: f64, which: Quantity, j: f64) -> Result<f64, ScalingError> {
    if delta.is_nan() || delta <= 0.0 {
        return Err(ScalingError::Distance(delta));
    }
    let (rho, lambda) = path.point(delta);
    Ok(summand(which, path.k_c, rho, lambda, j))
}

/// Leading asymptote `value ≈ prefactor·δ^exponent` of [`singular_contribution`], with the sign
/// of the value carried by the prefactor.
pub fn predicted_law(path: &ApproachPath, which: Quantity, j: f64) -> (f64, f64) {
    let (rho, lambda) = path.point(0.0);
    let (s, c) = path.k_c.sin_cos();
    let slope = path.radicand_slope();
    let a = lambda - c;
    match which {
        Quantity::DEdLambda => (-0.5, -2.0 * j * a / slope.sqrt()),
        Quantity::DEdRho => (-0.5, 2.0 * j * rho * s * s / slope.sqrt()),
        Quantity::OmegaPhi => (-1.5, rho * a * s * s / (2.0 * slope.powf(1.5))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    /// `exp(intercept)`, always positive.
    pub prefactor: f64,
    /// Common sign of the samples.
    pub sign: f64,
    /// Largest `|value − sign·prefactor·δ^exponent| / |value|` over the samples.
    pub residual: f64,
    pub window: (f64, f64),
}

/// Least-squares line through `(ln δ, ln |value|)`.
pub fn fit_power_law(samples: &[(f64, f64)]) -> Result<PowerLawFit, ScalingError> {
    if samples.len() < 5 {
        return Err(ScalingError::TooFewSamples(samples.len()));
    }
    let sign = samples[0].1.signum();
    if samples.iter().any(|&(_, v)| v == 0.0 || v.signum() != sign) {
        return Err(ScalingError::SignChange);
    }
    if let Some(&(d, _)) = samples.iter().find(|&&(d, _)| d.is_nan() || d <= 0.0) {
        return Err(ScalingError::Distance(d));
    }
    let n = samples.len() as f64;
    let xs: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1.abs().ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let exponent = sxy / sxx;
    let prefactor = (my - exponent * mx).exp();
    let residual = samples
        .iter()
        .map(|&(d, v)| (v.abs() - prefactor * d.powf(exponent)).abs() / v.abs())
        .fold(0.0, f64::max);
    let lo = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s.0).fold(0.0, f64::max);
    Ok(PowerLawFit {
        exponent,
        prefactor,
        sign,
        residual,
        window: (lo, hi),
    })
}

/// `count` log-spaced distances from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Default fit window `[1e-6, 1e-4]` with 20 samples.
pub fn default_window() -> Vec<f64> {
    log_spaced(1e-6, 1e-4, 20)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeRow {
    pub delta: f64,
    /// Full finite-N sums.
    pub d_e_d_lambda: f64,
    pub d_e_d_rho: f64,
    pub omega_phi: f64,
    /// The `k_c` summand of the curvature sum.
    pub singular_omega_phi: f64,
    /// The curvature summand of the grid momentum nearest `k_c`.
    pub nearest_mode_omega_phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub path: ApproachPath,
    pub n: usize,
    pub rows: Vec<ProbeRow>,
    /// Whether the full curvature sum grows monotonically as `δ` shrinks.
    pub omega_monotone: bool,
    /// Power-law fit of the full curvature sum over the probed distances, if one exists.
    pub full_fit: Option<PowerLawFit>,
}

/// Full finite-N sums along the path next to the critical-mode contribution.
pub fn full_sum_divergence_probe(
    path: &ApproachPath,
    cfg: &ModelConfig<f64>,
    deltas: &[f64],
) -> Result<ProbeReport, ScalingError> {
    if cfg.eta == Sector::Odd {
        return Err(ScalingError::OddSector);
    }
    let moms = cfg.pair_momenta();
    let nearest = moms
        .iter()
        .copied()
        .min_by(|a, b| (a - path.k_c).abs().total_cmp(&(b - path.k_c).abs()))
        .expect("grid has pair momenta");
    let mut sorted = deltas.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let rows = sorted
        .iter()
        .map(|&delta| {
            let (rho, lambda) = path.point(delta);
            let (dl, dr) = energy_first_derivs(rho, lambda, cfg)?;
            let omega = moms.iter().map(|&k| summand(Quantity::OmegaPhi, k, rho, lambda, cfg.j)).sum();
            Ok(ProbeRow {
                delta,
                d_e_d_lambda: dl,
                d_e_d_rho: dr,
                omega_phi: omega,
                singular_omega_phi: singular_contribution(path, delta, Quantity::OmegaPhi, cfg.j)?,
                nearest_mode_omega_phi: summand(Quantity::OmegaPhi, nearest, rho, lambda, cfg.j),
            })
        })
        .collect::<Result<Vec<_>, ScalingError>>()?;
    let omega_monotone = rows.windows(2).all(|w| w[1].omega_phi > w[0].omega_phi);
    let samples: Vec<(f64, f64)> = rows.iter().map(|r| (r.delta, r.omega_phi)).collect();
    Ok(ProbeReport {
        path: *path,
        n: cfg.n,
        full_fit: fit_power_law(&samples).ok(),
        omega_monotone,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freefermion::ground_energy_at;
    use proptest::prelude::*;

    fn cfg(n: usize) -> ModelConfig<f64> {
        ModelConfig::unit(n).unwrap()
    }

    #[test]
    fn trivial_derivatives() {
        for n in [4, 10, 64] {
            let (dl, dr) = energy_first_derivs(0.0, 2.0, &cfg(n)).unwrap();
            assert!((dl + n as f64).abs() < 1e-12 * n as f64);
            assert_eq!(dr, 0.0);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for (rho, lambda, n) in [(1.0, 2.0, 4), (0.4, -1.5, 12), (2.0, 3.0, 50)] {
            let c = cfg(n);
            let (dl, dr) = energy_first_derivs(rho, lambda, &c).unwrap();
            let h = 1e-5;
            let e = |r: f64, l: f64| ground_energy_at(l, r, &c).re;
            let fl = (e(rho, lambda + h) - e(rho, lambda - h)) / (2.0 * h);
            let fr = (e(rho + h, lambda) - e(rho - h, lambda)) / (2.0 * h);
            assert!((dl - fl).abs() <= 1e-7 * dl.abs().max(1.0), "{dl} vs {fl}");
            assert!((dr - fr).abs() <= 1e-7 * dr.abs().max(1.0), "{dr} vs {fr}");
        }
    }

    #[test]
    fn derivative_signs() {
        for (rho, lambda) in [(0.5, 1.5), (1.0, 2.0), (2.0, 2.5)] {
            let (dl, dr) = energy_first_derivs(rho, lambda, &cfg(40)).unwrap();
            assert!(dl < 0.0 && dr > 0.0);
        }
    }

    #[test]
    fn critical_momentum() {
        let p = ApproachPath::kind_i(1.0).unwrap();
        assert!((p.k_c - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        let q = ApproachPath::kind_ii(2.0).unwrap();
        assert!((q.k_c - std::f64::consts::FRAC_PI_3).abs() < 1e-15);
        let r = ApproachPath::kind_ii(-2.0).unwrap();
        assert!((r.k_c - 2.0 * std::f64::consts::FRAC_PI_3).abs() < 1e-15);
        assert!(matches!(ApproachPath::kind_ii(0.5), Err(ScalingError::Path(_))));
    }

    #[test]
    fn closed_form_prefactors() {
        let i = ApproachPath::kind_i(1.0).unwrap();
        let ii = ApproachPath::kind_ii(2.0).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12 * b.abs();
        assert!(close(predicted_law(&i, Quantity::DEdLambda, 1.0).1, -(2f64.powf(0.25))));
        assert!(close(predicted_law(&i, Quantity::OmegaPhi, 1.0).1, 2f64.powf(-0.25) / 8.0));
        assert!(close(predicted_law(&ii, Quantity::DEdRho, 1.0).1, 2f64.sqrt() * 3f64.powf(0.75) / 2.0));
        assert!(close(predicted_law(&ii, Quantity::OmegaPhi, 1.0).1, (2.0 * 3f64.sqrt()).sqrt() / 8.0));
    }

    #[test]
    fn fits_recover_the_laws() {
        for (path, q) in [
            (ApproachPath::kind_i(1.0).unwrap(), Quantity::DEdLambda),
            (ApproachPath::kind_i(1.0).unwrap(), Quantity::OmegaPhi),
            (ApproachPath::kind_ii(2.0).unwrap(), Quantity::DEdRho),
            (ApproachPath::kind_ii(2.0).unwrap(), Quantity::OmegaPhi),
        ] {
            let samples: Vec<(f64, f64)> = default_window()
                .into_iter()
                .map(|d| (d, singular_contribution(&path, d, q, 1.0).unwrap()))
                .collect();
            let fit = fit_power_law(&samples).unwrap();
            let (e, p) = predicted_law(&path, q, 1.0);
            assert!((fit.exponent - e).abs() < 0.02, "{q:?}: {}", fit.exponent);
            assert!((fit.sign * fit.prefactor - p).abs() < 0.02 * p.abs(), "{q:?}: {}", fit.prefactor);
        }
    }

    #[test]
    fn synthetic_fit_is_exact() {
        let samples: Vec<(f64, f64)> = log_spaced(1e-3, 1.0, 8).into_iter().map(|d| (d, 3.0 * d.powf(-0.5))).collect();
        let fit = fit_power_law(&samples).unwrap();
        assert!((fit.exponent + 0.5).abs() < 1e-12 && (fit.prefactor - 3.0).abs() < 1e-11);
        assert!(fit.residual < 1e-12);
        assert!(matches!(fit_power_law(&samples[..4]), Err(ScalingError::TooFewSamples(4))));
        let mixed = [(1.0, 1.0), (2.0, -1.0), (3.0, 1.0), (4.0, 1.0), (5.0, 1.0)];
        assert_eq!(fit_power_law(&mixed), Err(ScalingError::SignChange));
    }

    #[test]
    fn probe_behaviour() {
        let path = ApproachPath::kind_i(1.0).unwrap();
        let r = full_sum_divergence_probe(&path, &cfg(1000), &log_spaced(1e-3, 1e-2, 6)).unwrap();
        assert!(r.omega_monotone);

        let fine = full_sum_divergence_probe(&path, &cfg(1_000_000), &[1e-2]).unwrap();
        let coarse = full_sum_divergence_probe(&path, &cfg(1000), &[1e-2]).unwrap();
        for row in [fine.rows[0], coarse.rows[0]] {
            let rel = (row.nearest_mode_omega_phi - row.singular_omega_phi).abs() / row.singular_omega_phi;
            assert!(rel < 0.05, "{row:?}");
        }

        let far = full_sum_divergence_probe(&path, &cfg(1000), &log_spaced(0.5, 5.0, 6)).unwrap();
        let fit = far.full_fit.unwrap();
        assert!((fit.exponent + 1.5).abs() > 0.1 || fit.residual > 0.01, "{fit:?}");
    }

    proptest! {
        #[test]
        fn universal_exponents(rho in 0.2f64..3.0, lambda in 1.1f64..4.0) {
            let i = ApproachPath::kind_i(rho).unwrap();
            let ii = ApproachPath::kind_ii(lambda).unwrap();
            for q in [Quantity::DEdLambda, Quantity::OmegaPhi] {
                let fit = |p: &ApproachPath| {
                    let s: Vec<_> = default_window().into_iter()
                        .map(|d| (d, singular_contribution(p, d, q, 1.0).unwrap())).collect();
                    fit_power_law(&s).unwrap().exponent
                };
                prop_assert!((fit(&i) - fit(&ii)).abs() < 0.02);
            }
        }
    }
}
