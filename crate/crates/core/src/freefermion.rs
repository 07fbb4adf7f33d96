//! Free-fermion solution of the chain: momentum grids, the complex quasiparticle band, Bogoliubov
//! angles, ground-state pair amplitudes and the many-body spectrum built from quasiparticles.

use std::fmt;

use num_complex::Complex;
use thiserror::Error;

use crate::coupling::{CouplingError, CouplingValues, ParamPoint};
use crate::scalar::Real;

/// Largest chain for which the quasiparticle many-body spectrum is enumerated.
pub const MAX_ENUMERATED_SITES: usize = 14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("N must be even, got {0}")]
    OddLength(usize),
    #[error("N must be at least 4, got {0}")]
    TooShort(usize),
    #[error("energy scale J must be nonzero and finite")]
    BadScale,
    #[error("N = {n} exceeds the size guard {max}")]
    SizeGuard { n: usize, max: usize },
    #[error("mode k = {k} sits on the exceptional boundary (ε = 0)")]
    Boundary { k: f64 },
    #[error("momentum k = {k} is outside (0, π)")]
    MomentumRange { k: f64 },
    #[error(transparent)]
    Coupling(#[from] CouplingError),
}

/// Fermion-parity sector: `Even` (η = +, antiperiodic momenta) or `Odd` (η = −, periodic).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sector {
    Even,
    Odd,
}

impl Sector {
    pub fn sign(self) -> i32 {
        match self {
            Sector::Even => 1,
            Sector::Odd => -1,
        }
    }
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sector::Even => "+",
            Sector::Odd => "-",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig<T: Real> {
    pub j: T,
    pub n: usize,
    pub eta: Sector,
}

impl<T: Real> ModelConfig<T> {
    pub fn new(j: T, n: usize, eta: Sector) -> Result<Self, ModelError> {
        check_length(n)?;
        if j == T::zero() || !j.is_finite() {
            return Err(ModelError::BadScale);
        }
        Ok(Self { j, n, eta })
    }

    /// `J = 1`, even sector.
    pub fn unit(n: usize) -> Result<Self, ModelError> {
        Self::new(T::one(), n, Sector::Even)
    }

    /// `|Im ε| ≤ tol` marks a real mode. Boundary modes are detected on `|ε|² ≤ tol·max(1, |2J|)`,
    /// since a radicand rounded to machine precision leaves `|ε|` near `√ulp`.
    pub fn tolerance(&self) -> T {
        T::tol(1e-10) * T::one().max((self.j + self.j).abs())
    }

    pub fn grid(&self) -> Vec<T> {
        momentum_grid(self.n, self.eta).expect("length checked at construction")
    }

    /// Grid momenta strictly inside (0, π): one representative per (k, 2π − k) pair.
    pub fn pair_momenta(&self) -> Vec<T> {
        pair_momenta(&self.grid())
    }
}

fn check_length(n: usize) -> Result<(), ModelError> {
    if n % 2 == 1 {
        return Err(ModelError::OddLength(n));
    }
    if n < 4 {
        return Err(ModelError::TooShort(n));
    }
    Ok(())
}

/// `k_+ = 2(m + ½)π/N` or `k_− = 2mπ/N` for `m = 0..N`, ascending.
pub fn momentum_grid<T: Real>(n: usize, eta: Sector) -> Result<Vec<T>, ModelError> {
    check_length(n)?;
    let offset = match eta {
        Sector::Even => 0.5,
        Sector::Odd => 0.0,
    };
    let nf = n as f64;
    Ok((0..n)
        .map(|m| T::lit(2.0 * (m as f64 + offset) * std::f64::consts::PI / nf))
        .collect())
}

fn pair_momenta<T: Real>(grid: &[T]) -> Vec<T> {
    // index test: a float comparison against π would misplace k_− = π
    let n = grid.len();
    grid.iter()
        .enumerate()
        .filter(|&(m, k)| *k > T::zero() && 2 * m < n)
        .map(|(_, k)| *k)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode<T: Real> {
    pub k: T,
    pub eps: Complex<T>,
    /// `2J(λ − cos k)/ε`; `None` on the boundary.
    pub cos_theta: Option<Complex<T>>,
    /// `2iJ·g·sin k/ε`; `None` on the boundary.
    pub sin_theta: Option<Complex<T>>,
    pub real_flag: bool,
    pub boundary_flag: bool,
}

/// Radicand `(λ − cos k)² − g² sin² k` of the band.
pub fn radicand<T: Real>(k: T, lambda: T, g: T) -> T {
    let a = lambda - k.cos();
    let b = g * k.sin();
    a * a - b * b
}

/// `2J·√radicand` on the principal branch: negative radicands give `+i|·|^{1/2}`.
pub fn band<T: Real>(k: T, lambda: T, g: T, j: T) -> Complex<T> {
    let r = radicand(k, lambda, g);
    let two_j = j + j;
    if r >= T::zero() {
        Complex::new(two_j * r.sqrt(), T::zero())
    } else {
        Complex::new(T::zero(), two_j * (-r).sqrt())
    }
}

pub fn mode_at<T: Real>(k: T, lambda: T, g: T, cfg: &ModelConfig<T>) -> Mode<T> {
    let eps = band(k, lambda, g, cfg.j);
    let tol = cfg.tolerance();
    // compared at the level of ε², where rounding of the radicand lives
    let eps_sq = eps.norm_sqr();
    let boundary_flag = eps_sq <= tol * (cfg.j + cfg.j).abs().max(T::one());
    let two_j = cfg.j + cfg.j;
    let (cos_theta, sin_theta) = if boundary_flag {
        (None, None)
    } else {
        let cos_t = Complex::new(two_j * (lambda - k.cos()), T::zero()) / eps;
        let sin_t = Complex::new(T::zero(), two_j * g * k.sin()) / eps;
        (Some(cos_t), Some(sin_t))
    };
    Mode {
        k,
        eps,
        cos_theta,
        sin_theta,
        real_flag: boundary_flag || eps.im.abs() <= tol,
        boundary_flag,
    }
}

pub fn mode_data<T: Real>(
    k: T,
    p: &ParamPoint<T>,
    cv: &CouplingValues<T>,
    cfg: &ModelConfig<T>,
) -> Mode<T> {
    mode_at(k, p.lambda(), cv.g, cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport<T: Real> {
    pub config: ModelConfig<T>,
    pub point: ParamPoint<T>,
    pub modes: Vec<Mode<T>>,
    /// `−½ Σ_k ε_k` over the full sector grid.
    pub e_g: Complex<T>,
    pub all_real: bool,
}

/// `−½ Σ_k ε_k` without building the mode list.
pub fn ground_energy_at<T: Real>(lambda: T, g: T, cfg: &ModelConfig<T>) -> Complex<T> {
    let sum = cfg
        .grid()
        .into_iter()
        .fold(Complex::new(T::zero(), T::zero()), |acc, k| acc + band(k, lambda, g, cfg.j));
    -sum / T::lit(2.0)
}

/// Ground energy and the full mode list. In the odd sector the same `−½ Σ ε` sum is reported
/// over the periodic grid, with the unpaired `k = 0, π` modes counted like any other.
pub fn ground_energy<T: Real>(
    p: &ParamPoint<T>,
    cv: &CouplingValues<T>,
    cfg: &ModelConfig<T>,
) -> SpectrumReport<T> {
    let lambda = p.lambda();
    let modes: Vec<Mode<T>> = cfg.grid().into_iter().map(|k| mode_at(k, lambda, cv.g, cfg)).collect();
    let sum = modes
        .iter()
        .fold(Complex::new(T::zero(), T::zero()), |acc, m| acc + m.eps);
    SpectrumReport {
        config: *cfg,
        point: p.clone(),
        all_real: modes.iter().all(|m| m.real_flag),
        e_g: -sum / T::lit(2.0),
        modes,
    }
}

/// Amplitudes of one `(k, −k)` factor of the ground pair:
/// `|G⟩ ∝ (u + v_right c†_k c†_{−k})|vac⟩`, `|Ḡ⟩ ∝ (u + v_left c†_k c†_{−k})|vac⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairAmplitudes<T: Real> {
    pub k: T,
    /// `cos(θ/2)`.
    pub u: Complex<T>,
    /// `sin(θ/2)`.
    pub s: Complex<T>,
    /// `i e^{−β} sin(θ/2)`.
    pub v_right: Complex<T>,
    /// `−i e^{β*} sin(θ/2)`.
    pub v_left: Complex<T>,
}

impl<T: Real> PairAmplitudes<T> {
    /// `conj(u)·u + conj(v_left)·v_right`.
    pub fn biorthogonal_norm(&self) -> Complex<T> {
        self.u.conj() * self.u + self.v_left.conj() * self.v_right
    }
}

pub fn pair_amplitudes<T: Real>(
    k: T,
    p: &ParamPoint<T>,
    cv: &CouplingValues<T>,
    cfg: &ModelConfig<T>,
) -> Result<PairAmplitudes<T>, ModelError> {
    if !(k > T::zero() && k < T::PI()) {
        return Err(ModelError::MomentumRange {
            k: k.to_f64().unwrap_or(f64::NAN),
        });
    }
    let zero = Complex::new(T::zero(), T::zero());
    let one = Complex::new(T::one(), T::zero());
    let lambda = p.lambda();
    if cv.g * k.sin() == T::zero() && lambda > k.cos() {
        return Ok(PairAmplitudes {
            k,
            u: one,
            s: zero,
            v_right: zero,
            v_left: zero,
        });
    }
    let beta = cv.beta()?;
    let mode = mode_at(k, lambda, cv.g, cfg);
    let (Some(cos_t), Some(sin_t)) = (mode.cos_theta, mode.sin_theta) else {
        return Err(ModelError::Boundary {
            k: k.to_f64().unwrap_or(f64::NAN),
        });
    };
    let u = ((one + cos_t) / T::lit(2.0)).sqrt();
    let s = sin_t / (u + u);
    let i = Complex::new(T::zero(), T::one());
    Ok(PairAmplitudes {
        k,
        u,
        s,
        v_right: i * (-beta).exp() * s,
        v_left: -i * beta.conj().exp() * s,
    })
}

/// Hamiltonian restricted to `{|vac⟩, c†_k c†_{−k}|vac⟩}` of one momentum pair (row = bra).
///
/// Eigenvalues are `2J cos k ± ε_k`.
pub fn pair_block<T: Real>(k: T, lambda: T, g: T, beta: Complex<T>, j: T) -> [[Complex<T>; 2]; 2] {
    let two_j = j + j;
    let pairing = two_j * g * k.sin();
    let diag_vac = Complex::new(two_j * lambda, T::zero());
    let diag_pair = Complex::new(two_j * lambda - (two_j + two_j) * (lambda - k.cos()), T::zero());
    [
        [diag_vac, beta.exp() * pairing],
        [-(-beta).exp() * pairing, diag_pair],
    ]
}

/// Occupations of one many-body configuration: `m_k ∈ {0, 1, 2}` per pair and `n ∈ {0, 1}`
/// per unpaired momentum (`k = 0, π` of the odd sector).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupationConfig {
    pub pairs: Vec<u8>,
    pub unpaired: Vec<u8>,
}

impl OccupationConfig {
    pub fn particle_number(&self) -> usize {
        self.pairs.iter().chain(&self.unpaired).map(|&m| m as usize).sum()
    }

    /// Each singly occupied pair contributes a factor 2 (`c†_k` or `c†_{−k}`).
    pub fn multiplicity(&self) -> usize {
        1 << self.pairs.iter().filter(|&&m| m == 1).count()
    }
}

/// All configurations with the requested total particle-number parity.
pub fn occupation_configs(pairs: usize, unpaired: usize, odd: bool) -> Vec<OccupationConfig> {
    let total = 3usize.pow(pairs as u32) << unpaired;
    (0..total)
        .filter_map(|mut code| {
            let unp: Vec<u8> = (0..unpaired)
                .map(|_| {
                    let n = (code & 1) as u8;
                    code >>= 1;
                    n
                })
                .collect();
            let prs: Vec<u8> = (0..pairs)
                .map(|_| {
                    let m = (code % 3) as u8;
                    code /= 3;
                    m
                })
                .collect();
            let cfg = OccupationConfig {
                pairs: prs,
                unpaired: unp,
            };
            (cfg.particle_number() % 2 == usize::from(odd)).then_some(cfg)
        })
        .collect()
}

/// Many-body spectrum of the sector from quasiparticle occupations, with multiplicity.
///
/// Pair `k` contributes `(m_k − 1)ε_k + 2J cos k`; an unpaired mode contributes
/// `Jλ − 2J(λ − cos k)·n`. The even sector keeps even particle number, the odd sector odd.
pub fn quasiparticle_spectrum<T: Real>(
    cfg: &ModelConfig<T>,
    p: &ParamPoint<T>,
    cv: &CouplingValues<T>,
) -> Result<Vec<Complex<T>>, ModelError> {
    if cfg.n > MAX_ENUMERATED_SITES {
        return Err(ModelError::SizeGuard {
            n: cfg.n,
            max: MAX_ENUMERATED_SITES,
        });
    }
    let lambda = p.lambda();
    let j = cfg.j;
    let two_j = j + j;
    let grid = cfg.grid();
    let pairs: Vec<(T, Complex<T>)> = pair_momenta(&grid)
        .into_iter()
        .map(|k| (k, band(k, lambda, cv.g, j)))
        .collect();
    let unpaired: Vec<T> = match cfg.eta {
        Sector::Even => Vec::new(),
        Sector::Odd => vec![T::zero(), T::PI()],
    };
    let configs = occupation_configs(pairs.len(), unpaired.len(), cfg.eta == Sector::Odd);
    let mut out = Vec::with_capacity(1 << cfg.n.saturating_sub(1));
    for oc in configs {
        let mut e = Complex::new(T::zero(), T::zero());
        for (&(k, eps), &m) in pairs.iter().zip(&oc.pairs) {
            e = e + eps * T::lit(f64::from(m) - 1.0) + Complex::new(two_j * k.cos(), T::zero());
        }
        for (&k, &n) in unpaired.iter().zip(&oc.unpaired) {
            let filled = T::lit(f64::from(n));
            e = e + Complex::new(j * lambda - two_j * (lambda - k.cos()) * filled, T::zero());
        }
        out.extend(std::iter::repeat_n(e, oc.multiplicity()));
    }
    Ok(out)
}
