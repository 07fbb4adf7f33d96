//! Unbroken / broken / boundary classification, finite-size exceptional boundaries and the
//! thermodynamic boundary surface `λ² − g² = 1`.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::coupling::{eval_coupling, CouplingError, CouplingSpec, CouplingValues, ParamPoint};
use crate::freefermion::{mode_at, ModelConfig, Sector};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Unbroken,
    Broken,
    Boundary,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Unbroken => "unbroken",
            Verdict::Broken => "broken",
            Verdict::Boundary => "boundary",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseClassification<T: Real> {
    pub verdict: Verdict,
    /// Imaginary-ε momenta when broken, vanishing-ε momenta when on the boundary.
    pub offending: Vec<T>,
    pub eta: Sector,
}

/// Classification from `(λ, g)` alone. Imaginary modes take precedence over boundary modes.
/// At `g = 0` the chain is Hermitian and a vanishing `ε` is a level crossing, so it never
/// produces `Boundary`.
pub fn classify_at<T: Real>(lambda: T, g: T, cfg: &ModelConfig<T>) -> PhaseClassification<T> {
    let hermitian = g == T::zero();
    let mut imaginary = Vec::new();
    let mut vanishing = Vec::new();
    for k in cfg.grid() {
        let m = mode_at(k, lambda, g, cfg);
        if !m.real_flag {
            imaginary.push(k);
        } else if m.boundary_flag && !hermitian {
            vanishing.push(k);
        }
    }
    let (verdict, offending) = if !imaginary.is_empty() {
        (Verdict::Broken, imaginary)
    } else if !vanishing.is_empty() {
        (Verdict::Boundary, vanishing)
    } else {
        (Verdict::Unbroken, Vec::new())
    };
    PhaseClassification {
        verdict,
        offending,
        eta: cfg.eta,
    }
}

pub fn classify_point<T: Real>(
    p: &ParamPoint<T>,
    cv: &CouplingValues<T>,
    cfg: &ModelConfig<T>,
) -> PhaseClassification<T> {
    classify_at(p.lambda(), cv.g, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    fn sign<T: Real>(self) -> T {
        match self {
            Branch::Plus => T::one(),
            Branch::Minus => -T::one(),
        }
    }
}

/// The surface `λ = s·g·sin k + cos k` on which the mode `k` has `ε_k = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryCurve<T: Real> {
    pub k: T,
    pub branch: Branch,
}

impl<T: Real> BoundaryCurve<T> {
    pub fn lambda_at(&self, g: T) -> T {
        self.branch.sign::<T>() * g * self.k.sin() + self.k.cos()
    }

    /// Signed distance `λ − λ_boundary(g)`.
    pub fn residual(&self, lambda: T, g: T) -> T {
        lambda - self.lambda_at(g)
    }
}

/// All curves of the sector grid, one per `(k, 2π − k)` pair and sign branch.
pub fn boundary_curves<T: Real>(cfg: &ModelConfig<T>) -> Vec<BoundaryCurve<T>> {
    cfg.pair_momenta()
        .into_iter()
        .flat_map(|k| [Branch::Plus, Branch::Minus].map(|branch| BoundaryCurve { k, branch }))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Crossing<T: Real> {
    pub t: T,
    pub point: ParamPoint<T>,
    pub curve: BoundaryCurve<T>,
}

/// Subintervals scanned for sign changes before bisection.
pub const PATH_SAMPLES: usize = 256;
const ROOT_TOL: f64 = 1e-12;

/// Crossings of the finite-size boundary curves by the path `t ↦ path(t)`, `t ∈ [t0, t1]`.
///
/// Each curve residual is sampled on [`PATH_SAMPLES`] subintervals and every sign change is
/// bisected until `|f| < 1e-12` (or the bracket stops shrinking). Roots with `g = 0` are dropped.
/// Results are ordered by curve, then by `t`.
pub fn finite_size_boundaries<T, P>(
    cfg: &ModelConfig<T>,
    spec: &CouplingSpec,
    path: P,
    t0: T,
    t1: T,
) -> Result<Vec<Crossing<T>>, CouplingError>
where
    T: Real,
    P: Fn(T) -> ParamPoint<T>,
{
    let eval = |t: T| -> Result<(ParamPoint<T>, T), CouplingError> {
        let p = path(t);
        let g = eval_coupling(spec, &p)?.g;
        Ok((p, g))
    };
    let steps = PATH_SAMPLES;
    let ts: Vec<T> = (0..=steps)
        .map(|i| t0 + (t1 - t0) * T::lit(i as f64 / steps as f64))
        .collect();
    let samples: Vec<(ParamPoint<T>, T)> = ts.iter().map(|&t| eval(t)).collect::<Result<_, _>>()?;

    let mut out = Vec::new();
    for curve in boundary_curves(cfg) {
        let f = |s: &(ParamPoint<T>, T)| curve.residual(s.0.lambda(), s.1);
        let values: Vec<T> = samples.iter().map(f).collect();
        for i in 0..=steps {
            // at g = 0 the curve is a Hermitian level crossing, not an exceptional point
            if values[i] == T::zero() && samples[i].1 != T::zero() {
                out.push(Crossing {
                    t: ts[i],
                    point: samples[i].0.clone(),
                    curve,
                });
            }
            if i < steps && values[i] * values[i + 1] < T::zero() {
                let (mut a, mut b, mut fa) = (ts[i], ts[i + 1], values[i]);
                let mut best = (a, samples[i].0.clone(), fa.abs(), samples[i].1);
                for _ in 0..200 {
                    let m = (a + b) / T::lit(2.0);
                    if m <= a.min(b) || m >= a.max(b) {
                        break;
                    }
                    let s = eval(m)?;
                    let fm = f(&s);
                    if fm.abs() < best.2 {
                        best = (m, s.0.clone(), fm.abs(), s.1);
                    }
                    if fm.abs() < T::lit(ROOT_TOL) || fm == T::zero() {
                        break;
                    }
                    if fa * fm < T::zero() {
                        b = m;
                    } else {
                        a = m;
                        fa = fm;
                    }
                }
                if best.3 == T::zero() {
                    continue;
                }
                out.push(Crossing {
                    t: best.0,
                    point: best.1,
                    curve,
                });
            }
        }
    }
    Ok(out)
}

/// `λ² − g² − 1`: negative with `g > 0` is broken in the thermodynamic limit.
pub fn thermo_residual<T: Real>(p: &ParamPoint<T>, cv: &CouplingValues<T>) -> T {
    thermo_residual_at(p.lambda(), cv.g)
}

pub fn thermo_residual_at<T: Real>(lambda: T, g: T) -> T {
    lambda * lambda - g * g - T::one()
}

/// Thermodynamic verdict. The whole `g = 0` surface is unbroken.
pub fn thermo_verdict<T: Real>(lambda: T, g: T) -> Verdict {
    let r = thermo_residual_at(lambda, g);
    if g == T::zero() || r > T::zero() {
        Verdict::Unbroken
    } else if r < T::zero() {
        Verdict::Broken
    } else {
        Verdict::Boundary
    }
}

/// First-order Euclidean distance in the `(λ, g)` plane to the surface `λ² − g² = 1`.
pub fn surface_distance<T: Real>(lambda: T, g: T) -> T {
    let r = thermo_residual_at(lambda, g).abs();
    let norm = (lambda * lambda + g * g).sqrt();
    if norm == T::zero() {
        // the origin is at distance 1 from both sheets' vertices and the asymptotes alike
        T::one()
    } else {
        r / (norm + norm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub total: usize,
    pub agree: usize,
    /// Indices into the input of every point where the verdicts differ.
    pub disagreements: Vec<usize>,
    /// Largest [`surface_distance`] among disagreeing points (0 when all agree).
    pub shell_width: f64,
}

impl ConsistencyReport {
    pub fn agreement(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.agree as f64 / self.total as f64
        }
    }
}

/// Compares the finite-N verdict of [`classify_at`] with [`thermo_verdict`] at each point.
/// A finite-N `Boundary` is compatible with either thermodynamic verdict.
pub fn classification_consistency<T: Real>(
    cfg: &ModelConfig<T>,
    spec: &CouplingSpec,
    points: &[ParamPoint<T>],
) -> Result<ConsistencyReport, CouplingError> {
    let verdicts: Vec<(bool, f64)> = points
        .par_iter()
        .map(|p| {
            let g = eval_coupling(spec, p)?.g;
            let lambda = p.lambda();
            let finite = classify_at(lambda, g, cfg).verdict;
            let thermo = thermo_verdict(lambda, g);
            let agree = finite == thermo || finite == Verdict::Boundary || thermo == Verdict::Boundary;
            let d = surface_distance(lambda, g).to_f64().unwrap_or(f64::INFINITY);
            Ok((agree, d))
        })
        .collect::<Result<_, CouplingError>>()?;
    let disagreements: Vec<usize> = verdicts
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.0)
        .map(|(i, _)| i)
        .collect();
    let shell_width = disagreements.iter().map(|&i| verdicts[i].1).fold(0.0, f64::max);
    Ok(ConsistencyReport {
        total: points.len(),
        agree: points.len() - disagreements.len(),
        disagreements,
        shell_width,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, SQRT_2};

    fn cfg(n: usize) -> ModelConfig<f64> {
        ModelConfig::unit(n).unwrap()
    }

    fn classify(o: f64, g: f64, l: f64, n: usize) -> PhaseClassification<f64> {
        let p = ParamPoint::cylinder(o, g, l);
        let cv = eval_coupling(&CouplingSpec::PaperExample, &p).unwrap();
        classify_point(&p, &cv, &cfg(n))
    }

    #[test]
    fn example_verdicts() {
        for n in [4, 6, 10, 100] {
            assert_eq!(classify(0.0, 0.5, 2.0, n).verdict, Verdict::Unbroken);
        }
        let c = classify(0.0, 2.0, 0.0, 4);
        assert_eq!(c.verdict, Verdict::Broken);
        assert_eq!(c.offending.len(), 4);
        assert_eq!(classify(0.0, 0.0, 0.5, 4).verdict, Verdict::Unbroken);
        let c = classify(0.0, 1.0, SQRT_2, 4);
        assert_eq!(c.verdict, Verdict::Boundary);
        assert!(c.offending.iter().any(|k| (k - FRAC_PI_4).abs() < 1e-12));
    }

    #[test]
    fn curves_carry_boundary_modes() {
        let c = cfg(8);
        for curve in boundary_curves(&c) {
            for g in [0.3, 1.0, 2.5] {
                let m = mode_at(curve.k, curve.lambda_at(g), g, &c);
                assert!(m.boundary_flag, "{curve:?} g = {g}");
            }
        }
    }

    #[test]
    fn crossings_on_lambda_paths() {
        let path = |l: f64| ParamPoint::cylinder(0.0, 1.0, l);
        let x = finite_size_boundaries(&cfg(4), &CouplingSpec::PaperExample, path, 1.0, 2.0).unwrap();
        assert_eq!(x.len(), 1);
        assert!((x[0].t - SQRT_2).abs() < 1e-11);
        assert_eq!(x[0].curve.branch, Branch::Plus);
        assert!((x[0].curve.k - FRAC_PI_4).abs() < 1e-15);

        let x = finite_size_boundaries(&cfg(4), &CouplingSpec::PaperExample, path, 0.0, 1.0).unwrap();
        assert!(x
            .iter()
            .any(|c| c.curve.branch == Branch::Plus && (c.curve.k - 3.0 * FRAC_PI_4).abs() < 1e-15 && c.t.abs() < 1e-12));

        let flat = |l: f64| ParamPoint::cylinder(0.0, 0.0, l);
        assert!(finite_size_boundaries(&cfg(8), &CouplingSpec::PaperExample, flat, -3.0, 3.0)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn bisected_roots_are_boundary_modes() {
        let c = cfg(10);
        let path = |t: f64| ParamPoint::cylinder(0.2 * t, 0.9, 2.0 - 2.5 * t);
        let x = finite_size_boundaries(&c, &CouplingSpec::PaperExample, path, 0.0, 1.0).unwrap();
        assert!(!x.is_empty());
        for crossing in &x {
            let g = eval_coupling(&CouplingSpec::PaperExample, &crossing.point).unwrap().g;
            assert!(crossing.curve.residual(crossing.point.lambda(), g).abs() < 1e-12);
            assert!(mode_at(crossing.curve.k, crossing.point.lambda(), g, &c).boundary_flag);
        }
    }

    #[test]
    fn thermodynamic_surface() {
        let r = |o: f64, g: f64, l: f64| {
            let p = ParamPoint::cylinder(o, g, l);
            thermo_residual(&p, &eval_coupling(&CouplingSpec::PaperExample, &p).unwrap())
        };
        assert_eq!(r(0.0, 0.0, 1.0), 0.0);
        assert!(r(0.0, 3f64.sqrt(), 2.0).abs() < 1e-15);
        assert!((r(0.0, 0.5, 2.0) - 2.75).abs() < 1e-15);
        assert_eq!(thermo_verdict(0.5, 0.0), Verdict::Unbroken);
        assert_eq!(thermo_verdict(0.5, 0.1), Verdict::Broken);
    }

    #[test]
    fn lambda_reflection_symmetry() {
        for n in [4, 8, 12] {
            for (l, g) in [(0.3, 0.2), (1.2, 0.9), (2.0, 2.0), (0.9, 0.05)] {
                assert_eq!(classify_at(l, g, &cfg(n)).verdict, classify_at(-l, g, &cfg(n)).verdict);
            }
        }
    }

    #[test]
    fn g_zero_axis_agrees() {
        let pts: Vec<_> = (-9..=9).map(|i| ParamPoint::cylinder(0.0, 0.0, i as f64 * 0.1)).collect();
        let rep = classification_consistency(&cfg(1000), &CouplingSpec::PaperExample, &pts).unwrap();
        assert_eq!(rep.agree, rep.total);
    }

    #[test]
    fn deep_unbroken_agrees() {
        let mut pts = Vec::new();
        for i in 0..20 {
            let l = 1.2 + 0.15 * i as f64;
            let rho = (l * l - 1.1).sqrt() * 0.99 * (i % 5) as f64 / 4.0;
            pts.push(ParamPoint::cylinder(rho * 0.6, rho * 0.8, if i % 2 == 0 { l } else { -l }));
        }
        let rep = classification_consistency(&cfg(1000), &CouplingSpec::PaperExample, &pts).unwrap();
        assert_eq!(rep.agreement(), 1.0);
    }

    #[test]
    fn both_sectors_share_the_bulk() {
        let odd = ModelConfig::new(1.0, 200, Sector::Odd).unwrap();
        for (l, g) in [(2.0, 0.5), (0.2, 1.5), (-3.0, 1.0), (0.5, 1.0)] {
            assert_eq!(classify_at(l, g, &cfg(200)).verdict, classify_at(l, g, &odd).verdict);
        }
    }
}
