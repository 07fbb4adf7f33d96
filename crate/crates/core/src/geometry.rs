//! Biorthogonal Berry connection and curvature of the even-sector ground state.
//!
//! The ground state factorizes over momentum pairs `(k, −k)` with `0 < k < π`, so every quantity
//! here is a sum over those pairs. Analytic forms are evaluated through `cos θ_k` and the
//! partials of the pairing phase `β`; the numeric cross-check works directly on the 2×2 block of
//! each pair.

use num_complex::Complex;
use rayon::prelude::*;
use thiserror::Error;

use crate::coupling::{beta_partials, eval_coupling, g_partials, CouplingError, CouplingSpec, ParamPoint, LAMBDA};
use crate::freefermion::{band, ground_energy_at, mode_at, pair_block, ModelConfig, ModelError, Sector};
use crate::phase::{classify_at, Verdict};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("geometry is defined in the unbroken region only; point is {0}")]
    NotUnbroken(Verdict),
    #[error("finite-difference stencil leaves the unbroken region")]
    BrokenNeighborhood,
    #[error("geometry is implemented for the even sector only")]
    OddSector,
    #[error("pairing strength g vanishes, so the phase β is undefined")]
    VanishingPairing,
    #[error("parameter index {0} out of range")]
    Index(usize),
    #[error("no gauge can be fixed: right eigenvector vanishes")]
    Gauge,
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn require_even<T: Real>(cfg: &ModelConfig<T>) -> Result<(), GeometryError> {
    if cfg.eta == Sector::Odd {
        Err(GeometryError::OddSector)
    } else {
        Ok(())
    }
}

fn require_unbroken<T: Real>(lambda: T, g: T, cfg: &ModelConfig<T>) -> Result<(), GeometryError> {
    match classify_at(lambda, g, cfg).verdict {
        Verdict::Unbroken => Ok(()),
        v => Err(GeometryError::NotUnbroken(v)),
    }
}

/// Components `A_i` in schema order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionVector<T: Real> {
    pub names: Vec<String>,
    pub components: Vec<Complex<T>>,
}

impl<T: Real> ConnectionVector<T> {
    pub fn get(&self, name: &str) -> Option<Complex<T>> {
        self.names.iter().position(|n| n == name).map(|i| self.components[i])
    }
}

/// `cos θ_k` over the pair momenta.
fn cos_thetas<T: Real>(lambda: T, g: T, cfg: &ModelConfig<T>) -> Result<Vec<Complex<T>>, GeometryError> {
    cfg.pair_momenta()
        .into_iter()
        .map(|k| {
            mode_at(k, lambda, g, cfg)
                .cos_theta
                .ok_or(GeometryError::NotUnbroken(Verdict::Boundary))
        })
        .collect()
}

/// `A_i = −i (∂β/∂ξ_i) Σ_k (1 − cos θ_k)/2`.
pub fn connection_analytic<T: Real>(
    spec: &CouplingSpec,
    p: &ParamPoint<T>,
    cfg: &ModelConfig<T>,
) -> Result<ConnectionVector<T>, GeometryError> {
    require_even(cfg)?;
    let cv = eval_coupling(spec, p)?;
    if cv.g == T::zero() {
        return Err(GeometryError::VanishingPairing);
    }
    require_unbroken(p.lambda(), cv.g, cfg)?;
    let half = T::lit(0.5);
    let weight = cos_thetas(p.lambda(), cv.g, cfg)?
        .into_iter()
        .fold(Complex::new(T::zero(), T::zero()), |acc, c| {
            acc + (Complex::new(T::one(), T::zero()) - c) * half
        });
    let minus_i = Complex::new(T::zero(), -T::one());
    let components = beta_partials(spec, p)?
        .into_iter()
        .map(|db| minus_i * db * weight)
        .collect();
    Ok(ConnectionVector {
        names: p.names().to_vec(),
        components,
    })
}

/// How the phase of the per-pair right eigenvector is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gauge {
    /// Component on the fermion vacuum real positive.
    Vacuum,
    /// Largest component real positive.
    Largest,
}

type PairVector<T> = [Complex<T>; 2];

/// Biorthonormal `(left row, right column)` of the `2J cos k + ε` branch of the pair block.
fn pair_eigvecs<T: Real>(
    k: T,
    spec: &CouplingSpec,
    p: &ParamPoint<T>,
    cfg: &ModelConfig<T>,
    gauge: Gauge,
) -> Result<(PairVector<T>, PairVector<T>), GeometryError> {
    let cv = eval_coupling(spec, p)?;
    let lambda = p.lambda();
    let zero = Complex::new(T::zero(), T::zero());
    let one = Complex::new(T::one(), T::zero());
    let Some(beta) = cv.beta else {
        // no pairing: the pair stays in the vacuum
        return Ok(([one, zero], [one, zero]));
    };
    let h = pair_block(k, lambda, cv.g, beta, cfg.j);
    let e = Complex::new((cfg.j + cfg.j) * k.cos(), T::zero()) + band(k, lambda, cv.g, cfg.j);
    if h[0][1] == zero || h[1][0] == zero {
        return Ok(([one, zero], [one, zero]));
    }
    // right (1, ρ_r), left row (1, ρ_l), scaled jointly so that left·right = 1
    let rho_r = (e - h[0][0]) / h[0][1];
    let rho_l = (e - h[0][0]) / h[1][0];
    let norm = one + rho_l * rho_r;
    if norm.norm() == T::zero() {
        return Err(GeometryError::Gauge);
    }
    let c = norm.sqrt().inv();
    let mut right = [c, c * rho_r];
    let mut left = [c, c * rho_l];
    let pivot = match gauge {
        Gauge::Vacuum => right[0],
        Gauge::Largest => {
            if right[1].norm() > right[0].norm() {
                right[1]
            } else {
                right[0]
            }
        }
    };
    if pivot.norm() == T::zero() {
        return Err(GeometryError::Gauge);
    }
    let phase = pivot.conj() / pivot.norm();
    right.iter_mut().for_each(|x| *x = *x * phase);
    left.iter_mut().for_each(|x| *x = *x / phase);
    Ok((left, right))
}

/// Numeric per-pair connection for every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct PairConnection<T: Real> {
    pub k: T,
    pub components: Vec<Complex<T>>,
    pub gauge: Gauge,
    /// Set when the vacuum gauge was requested but the vacuum component was too small.
    pub fallback: bool,
}

/// Vacuum components below this magnitude trigger the largest-component gauge.
pub const GAUGE_FLOOR: f64 = 1e-6;

/// `i·left(ξ)·(right(ξ + h ê_i) − right(ξ − h ê_i))/(2h)` for the pair `(k, −k)`.
pub fn connection_numeric_pair<T: Real>(
    k: T,
    spec: &CouplingSpec,
    p: &ParamPoint<T>,
    cfg: &ModelConfig<T>,
    h: T,
) -> Result<PairConnection<T>, GeometryError> {
    let (_, right) = pair_eigvecs(k, spec, p, cfg, Gauge::Vacuum)?;
    let fallback = right[0].norm() < T::lit(GAUGE_FLOOR);
    let gauge = if fallback { Gauge::Largest } else { Gauge::Vacuum };
    let mut out = connection_numeric_pair_in(k, spec, p, cfg, h, gauge)?;
    out.fallback = fallback;
    Ok(out)
}

/// [`connection_numeric_pair`] in an explicitly chosen gauge.
pub fn connection_numeric_pair_in<T: Real>(
    k: T,
    spec: &CouplingSpec,
    p: &ParamPoint<T>,
    cfg: &ModelConfig<T>,
    h: T,
    gauge: Gauge,
) -> Result<PairConnection<T>, GeometryError> {
    require_even(cfg)?;
    if !(k > T::zero() && k < T::PI()) {
        return Err(ModelError::MomentumRange {
            k: k.to_f64().unwrap_or(f64::NAN),
        }
        .into());
    }
    let cv = eval_coupling(spec, p)?;
    require_unbroken(p.lambda(), cv.g, cfg)?;
    let (left, _) = pair_eigvecs(k, spec, p, cfg, gauge)?;
    let i_unit = Complex::new(T::zero(), T::one());
    let components = (0..p.len())
        .map(|idx| {
            let x = p.values()[idx];
            let (_, up) = pair_eigvecs(k, spec, &p.with_index(idx, x + h), cfg, gauge)?;
            let (_, down) = pair_eigvecs(k, spec, &p.with_index(idx, x - h), cfg, gauge)?;
            let d = left[0] * (up[0] - down[0]) + left[1] * (up[1] - down[1]);
            Ok(i_unit * d / (h + h))
        })
        .collect::<Result<_, GeometryError>>()?;
    Ok(PairConnection {
        k,
        components,
        gauge,
        fallback: false,
    })
}

/// Summed numeric connection over all pairs.
pub fn connection_numeric<T: Real>(
    spec: &CouplingSpec,
    p: &ParamPoint<T>,
    cfg: &ModelConfig<T>,
    h: T,
) -> Result<ConnectionVector<T>, GeometryError> {
    let mut components = vec![Complex::new(T::zero(), T::zero()); p.len()];
    for k in cfg.pair_momenta() {
        let pc = connection_numeric_pair(k, spec, p, cfg, h)?;
        for (acc, c) in components.iter_mut().zip(pc.components) {
            *acc = *acc + c;
        }
    }
    Ok(ConnectionVector {
        names: p.names().to_vec(),
        components,
    })
}

/// Antisymmetric `Ω_ij` in schema order.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureTensor<T: Real> {
    pub names: Vec<String>,
    pub omega: Vec<Vec<Complex<T>>>,
}

impl<T: Real> CurvatureTensor<T> {
    pub fn get(&self, i: &str, j: &str) -> Option<Complex<T>> {
        let a = self.names.iter().position(|n| n == i)?;
        let b = self.names.iter().position(|n| n == j)?;
        Some(self.omega[a][b])
    }
}

/// `∂ cos θ_k / ∂ξ_i` for every pair (outer) and parameter (inner).
fn cos_theta_partials<T: Real>(
    spec: &CouplingSpec,
    p: &ParamPoint<T>,
    g: T,
    cfg: &ModelConfig<T>,
) -> Result<Vec<Vec<T>>, GeometryError> {
    let dg = g_partials(spec, p)?;
    let lambda_index = p.index_of(LAMBDA).ok_or(CouplingError::MissingLambda)?;
    let lambda = p.lambda();
    Ok(cfg
        .pair_momenta()
        .into_iter()
        .map(|k| {
            let (sin_k, cos_k) = k.sin_cos();
            let a = lambda - cos_k;
            let b = g * sin_k;
            let s = (a * a - b * b).sqrt();
            let s3 = s * s * s;
            let d_lambda = -b * b / s3;
            let d_g = a * b * sin_k / s3;
            dg.iter()
                .enumerate()
                .map(|(i, &dgi)| d_g * dgi + if i == lambda_index { d_lambda } else { T::zero() })
                .collect()
        })
        .collect())
}

/// `Ω_ij = (i/2) Σ_k [(∂_j β)(∂_i cos θ) − (∂_i β)(∂_j cos θ)]` for all index pairs.
pub fn curvature_tensor<T: Real>(
    spec: &CouplingSpec,
    p: &ParamPoint<T>,
    cfg: &ModelConfig<T>,
) -> Result<CurvatureTensor<T>, GeometryError> {
    require_even(cfg)?;
    let cv = eval_coupling(spec, p)?;
    if cv.g == T::zero() {
        return Err(GeometryError::VanishingPairing);
    }
    require_unbroken(p.lambda(), cv.g, cfg)?;
    let db = beta_partials(spec, p)?;
    let dc = cos_theta_partials(spec, p, cv.g, cfg)?;
    let n = p.len();
    let zero = Complex::new(T::zero(), T::zero());
    let mut sum_dc = vec![T::zero(); n];
    for row in &dc {
        for (acc, v) in sum_dc.iter_mut().zip(row) {
            *acc = *acc + *v;
        }
    }
    let half_i = Complex::new(T::zero(), T::lit(0.5));
    let mut omega = vec![vec![zero; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = half_i * (db[j] * sum_dc[i] - db[i] * sum_dc[j]);
            omega[i][j] = v;
            omega[j][i] = -v;
        }
    }
    Ok(CurvatureTensor {
        names: p.names().to_vec(),
        omega,
    })
}

/// Single component `Ω_ij`.
pub fn curvature_component<T: Real>(
    spec: &CouplingSpec,
    p: &ParamPoint<T>,
    cfg: &ModelConfig<T>,
    i: usize,
    j: usize,
) -> Result<Complex<T>, GeometryError> {
    if i >= p.len() {
        return Err(GeometryError::Index(i));
    }
    if j >= p.len() {
        return Err(GeometryError::Index(j));
    }
    Ok(curvature_tensor(spec, p, cfg)?.omega[i][j])
}

/// Curvature of the built-in family in cylindrical coordinates `(ρ, φ = λ, λ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureSample<T: Real> {
    pub rho: T,
    pub lambda: T,
    pub verdict: Verdict,
    /// Tangential component; `None` off the unbroken region.
    pub omega_phi: Option<T>,
    /// `|Ω|`, equal to `|Ω_φ|` because the radial and axial components vanish identically.
    pub magnitude: Option<T>,
}

impl<T: Real> CurvatureSample<T> {
    pub fn is_valid(&self) -> bool {
        self.omega_phi.is_some()
    }
}

/// `Ω_φ = 4J³ρ Σ_k (λ − cos k) sin²k / ε_k³`.
pub fn curvature_cylindrical<T: Real>(rho: T, lambda: T, cfg: &ModelConfig<T>) -> CurvatureSample<T> {
    let g = rho.abs();
    let verdict = classify_at(lambda, g, cfg).verdict;
    // only the even-sector ground state carries a sample
    let valid = verdict == Verdict::Unbroken && cfg.eta == Sector::Even;
    let omega_phi = valid.then(|| {
        let j = cfg.j;
        let sum = cfg.pair_momenta().into_iter().fold(T::zero(), |acc, k| {
            let eps = band(k, lambda, g, j).re;
            let s = k.sin();
            acc + (lambda - k.cos()) * s * s / (eps * eps * eps)
        });
        T::lit(4.0) * j * j * j * rho * sum
    });
    CurvatureSample {
        rho,
        lambda,
        verdict,
        omega_phi,
        magnitude: omega_phi.map(|w| w.abs()),
    }
}

/// `h = 1e-4·max(1, |x|)`.
pub fn energy_step<T: Real>(x: T) -> T {
    T::lit(1e-4) * T::one().max(x.abs())
}

/// `−(1/4J)·∂²E_g/∂ρ∂λ` from centred four-point stencils with steps `(h_ρ, h_λ)` and twice
/// those, Richardson-combined to fourth order. Steps default to [`energy_step`].
pub fn curvature_from_energy<T: Real>(
    rho: T,
    lambda: T,
    cfg: &ModelConfig<T>,
    steps: Option<(T, T)>,
) -> Result<T, GeometryError> {
    require_even(cfg)?;
    let (hr, hl) = steps.unwrap_or((energy_step(rho), energy_step(lambda)));
    let energy = |r: T, l: T| -> Result<T, GeometryError> {
        if classify_at(l, r.abs(), cfg).verdict != Verdict::Unbroken {
            return Err(GeometryError::BrokenNeighborhood);
        }
        let e = ground_energy_at(l, r.abs(), cfg);
        if e.im.abs() > cfg.tolerance() {
            return Err(GeometryError::BrokenNeighborhood);
        }
        Ok(e.re)
    };
    let mixed = |hr: T, hl: T| -> Result<T, GeometryError> {
        let pp = energy(rho + hr, lambda + hl)?;
        let pm = energy(rho + hr, lambda - hl)?;
        let mp = energy(rho - hr, lambda + hl)?;
        let mm = energy(rho - hr, lambda - hl)?;
        Ok((pp - pm - mp + mm) / (T::lit(4.0) * hr * hl))
    };
    let fine = mixed(hr, hl)?;
    let coarse = mixed(hr + hr, hl + hl)?;
    let d = (T::lit(4.0) * fine - coarse) / T::lit(3.0);
    Ok(-d / (T::lit(4.0) * cfg.j))
}

/// One axis of a sampling grid: `start + i·step` for `i = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Axis {
    pub fn new(start: f64, stop: f64, step: f64) -> Self {
        Self { start, stop, step }
    }

    pub fn count(&self) -> usize {
        if self.step.is_nan() || self.step <= 0.0 || self.stop < self.start {
            return 1;
        }
        ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn value(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count()).map(|i| self.value(i)).collect()
    }
}

/// Planes through the parameter space of the built-in family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Plane {
    /// `x = ω`, `y = γ` at fixed `λ`.
    OmegaGamma { lambda: f64 },
    /// `x = γ`, `y = λ` at fixed `ω`.
    GammaLambda { omega: f64 },
}

impl Plane {
    /// `(ρ, λ)` of the node `(x, y)`.
    pub fn cylinder(&self, x: f64, y: f64) -> (f64, f64) {
        match *self {
            Plane::OmegaGamma { lambda } => (x.hypot(y), lambda),
            Plane::GammaLambda { omega } => (omega.hypot(x), y),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldRow {
    pub x: f64,
    pub y: f64,
    pub sample: CurvatureSample<f64>,
}

/// Row-major samples (`y` outer, `x` inner) of the curvature field on a plane. Rows are
/// evaluated in parallel; the output order does not depend on scheduling.
pub fn field_grid(plane: Plane, xs: Axis, ys: Axis, cfg: &ModelConfig<f64>) -> Vec<FieldRow> {
    let xv = xs.values();
    ys.values()
        .into_par_iter()
        .flat_map_iter(|y| {
            xv.iter()
                .map(|&x| {
                    let (rho, lambda) = plane.cylinder(x, y);
                    FieldRow {
                        x,
                        y,
                        sample: curvature_cylindrical(rho, lambda, cfg),
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect()
}
