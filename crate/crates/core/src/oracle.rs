//! Brute-force reference: the full `2^N` spin Hamiltonian, its parity sectors, biorthogonal
//! eigenpairs and the rotation-time symmetry checks.
//!
//! Basis states are σ^z products; site 1 is the most significant bit and a 0 bit is spin up.
//! Ladder operators are `σ^± = σ^x ± iσ^y`, so `σ^+|↓⟩ = 2|↑⟩`.

use faer::Mat;
use num_complex::Complex64;
use thiserror::Error;

use crate::coupling::{CouplingValues, ParamPoint};
use crate::freefermion::{ModelConfig, Sector};

/// Largest chain the dense builder accepts.
pub const MAX_DENSE_SITES: usize = 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("N = {n} exceeds the dense size guard {max}")]
    SizeGuard { n: usize, max: usize },
    #[error("‖[H, Π]‖ = {commutator:e} exceeds {limit:e}: parity is not conserved")]
    ParityBroken { commutator: f64, limit: f64 },
    #[error("eigensolver failed to converge")]
    NoConvergence,
    #[error("ground level is degenerate (gap {gap:e} ≤ {limit:e})")]
    Degenerate { gap: f64, limit: f64 },
    #[error("ground eigenpair is ill conditioned (κ = {condition:e}); exceptional point nearby")]
    IllConditioned { condition: f64 },
    #[error("no unique left eigenvector within {radius:e} of conj(E) ({found} candidates)")]
    LeftMatch { radius: f64, found: usize },
    #[error("vector is zero")]
    ZeroVector,
}

/// Dense `2^N × 2^N` complex operator in the σ^z product basis.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    sites: usize,
    mat: Mat<Complex64>,
}

impl DenseOperator {
    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.mat[(row, col)]
    }

    pub fn matrix(&self) -> &Mat<Complex64> {
        &self.mat
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius(&self.mat)
    }

    pub fn adjoint(&self) -> DenseOperator {
        DenseOperator {
            sites: self.sites,
            mat: adjoint(&self.mat),
        }
    }

    /// `‖H − H†‖_F`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for r in 0..n {
            for c in 0..n {
                acc += (self.mat[(r, c)] - self.mat[(c, r)].conj()).norm_sqr();
            }
        }
        acc.sqrt()
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        matvec(&self.mat, v)
    }

    /// Restriction to a set of basis indices.
    pub fn restrict(&self, indices: &[usize]) -> Mat<Complex64> {
        Mat::from_fn(indices.len(), indices.len(), |r, c| self.mat[(indices[r], indices[c])])
    }
}

fn frobenius(m: &Mat<Complex64>) -> f64 {
    let mut acc = 0.0;
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            acc += m[(r, c)].norm_sqr();
        }
    }
    acc.sqrt()
}

fn adjoint(m: &Mat<Complex64>) -> Mat<Complex64> {
    Mat::from_fn(m.ncols(), m.nrows(), |r, c| m[(c, r)].conj())
}

fn matvec(m: &Mat<Complex64>, v: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); m.nrows()];
    for c in 0..m.ncols() {
        let x = v[c];
        if x.re == 0.0 && x.im == 0.0 {
            continue;
        }
        for (r, o) in out.iter_mut().enumerate() {
            *o += m[(r, c)] * x;
        }
    }
    out
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn bit(state: usize, site: usize, sites: usize) -> usize {
    (state >> (sites - 1 - site)) & 1
}

/// `Σ_j σ^z_j` of a basis state.
pub fn magnetization(state: usize, sites: usize) -> i32 {
    sites as i32 - 2 * state.count_ones() as i32
}

/// Eigenvalue of `Π = ⊗_j σ^z_j` on a basis state.
pub fn parity(state: usize) -> i32 {
    if state.count_ones().is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// Basis indices of the `Π = η` subspace, ascending.
pub fn sector_indices(sites: usize, eta: Sector) -> Vec<usize> {
    (0..1usize << sites).filter(|&s| parity(s) == eta.sign()).collect()
}

/// Builds the Hamiltonian with an explicit `σ⁻σ⁻` factor: the coefficient is `−G*·lowering`.
/// The physical chain uses `lowering = |Λ|`; `−1` gives the Hermitian partner.
pub fn build_hamiltonian_raw(
    sites: usize,
    j: f64,
    coupling: Complex64,
    lowering: Complex64,
    lambda: f64,
) -> Result<DenseOperator, OracleError> {
    if sites > MAX_DENSE_SITES {
        return Err(OracleError::SizeGuard {
            n: sites,
            max: MAX_DENSE_SITES,
        });
    }
    let dim = 1usize << sites;
    let mut mat = Mat::<Complex64>::zeros(dim, dim);
    // (J/4)·(2·2) from the two ladder operators
    let raise = coupling * j;
    let lower = -coupling.conj() * lowering * j;
    let hop = Complex64::new(j, 0.0);
    for state in 0..dim {
        mat[(state, state)] += Complex64::new(j * lambda * f64::from(magnetization(state, sites)), 0.0);
        for a in 0..sites {
            let b = (a + 1) % sites;
            let ma = 1usize << (sites - 1 - a);
            let mb = 1usize << (sites - 1 - b);
            let flipped = state ^ ma ^ mb;
            match (bit(state, a, sites), bit(state, b, sites)) {
                // both down: σ⁺σ⁺ raises to both up
                (1, 1) => mat[(flipped, state)] += raise,
                (0, 0) => mat[(flipped, state)] += lower,
                // one up, one down: σ⁺_aσ⁻_b or σ⁻_aσ⁺_b
                _ => mat[(flipped, state)] += hop,
            }
        }
    }
    Ok(DenseOperator { sites, mat })
}

pub fn build_hamiltonian(
    cfg: &ModelConfig<f64>,
    p: &ParamPoint<f64>,
    cv: &CouplingValues<f64>,
) -> Result<DenseOperator, OracleError> {
    build_hamiltonian_raw(
        cfg.n,
        cfg.j,
        cv.coupling,
        Complex64::new(cv.abs_lambda, 0.0),
        p.lambda(),
    )
}

/// `‖[H, Π]‖_F`.
pub fn parity_commutator(h: &DenseOperator) -> f64 {
    let n = h.dim();
    let mut acc = 0.0;
    for r in 0..n {
        for c in 0..n {
            if parity(r) != parity(c) {
                acc += 4.0 * h.mat[(r, c)].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

fn check_parity(h: &DenseOperator) -> Result<(), OracleError> {
    let commutator = parity_commutator(h);
    let limit = 1e-10 * h.frobenius_norm();
    if commutator > limit {
        return Err(OracleError::ParityBroken { commutator, limit });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectorSpectrum {
    pub eta: Sector,
    pub eigenvalues: Vec<Complex64>,
}

pub fn sector_spectrum(h: &DenseOperator, eta: Sector) -> Result<SectorSpectrum, OracleError> {
    check_parity(h)?;
    let block = h.restrict(&sector_indices(h.sites, eta));
    let eigenvalues = block.eigenvalues().map_err(|_| OracleError::NoConvergence)?;
    Ok(SectorSpectrum { eta, eigenvalues })
}

pub fn full_spectrum(h: &DenseOperator) -> Result<Vec<Complex64>, OracleError> {
    h.mat.eigenvalues().map_err(|_| OracleError::NoConvergence)
}

/// Right/left eigenvectors of one eigenvalue, embedded in the full basis, with `⟨left|right⟩ = 1`.
#[derive(Debug, Clone)]
pub struct BiorthogonalPair {
    pub eta: Sector,
    pub eigenvalue: Complex64,
    pub right: Vec<Complex64>,
    pub left: Vec<Complex64>,
    /// `‖left‖·‖right‖`; grows without bound at an exceptional point.
    pub condition: f64,
}

impl BiorthogonalPair {
    /// `max(‖H r − E r‖, ‖H† l − E* l‖) / ‖H‖_F`.
    pub fn residual(&self, h: &DenseOperator) -> f64 {
        let hr = h.apply(&self.right);
        let rr: Vec<Complex64> = hr.iter().zip(&self.right).map(|(a, b)| a - self.eigenvalue * b).collect();
        let hl = h.adjoint().apply(&self.left);
        let rl: Vec<Complex64> = hl
            .iter()
            .zip(&self.left)
            .map(|(a, b)| a - self.eigenvalue.conj() * b)
            .collect();
        norm(&rr).max(norm(&rl)) / h.frobenius_norm()
    }
}

/// Condition number above which an eigenpair is treated as coalescing.
pub const MAX_CONDITION: f64 = 1e6;

/// Ground eigenpair of the sector: minimal real part, ties broken toward the most negative
/// imaginary part. Gauge: the largest right component is real positive.
pub fn biorthogonal_ground(h: &DenseOperator, eta: Sector) -> Result<BiorthogonalPair, OracleError> {
    check_parity(h)?;
    let indices = sector_indices(h.sites, eta);
    let block = h.restrict(&indices);
    let evd = block.eigen().map_err(|_| OracleError::NoConvergence)?;
    let dim = indices.len();
    let values: Vec<Complex64> = (0..dim).map(|i| evd.S()[i]).collect();
    let scale = values.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let tie = 1e-8 * scale;

    let min_re = values.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    let chosen = (0..dim)
        .filter(|&i| values[i].re <= min_re + tie)
        .min_by(|&a, &b| values[a].im.total_cmp(&values[b].im))
        .expect("nonempty sector");
    let e = values[chosen];
    let gap = (0..dim)
        .filter(|&i| i != chosen)
        .map(|i| (values[i] - e).norm())
        .fold(f64::INFINITY, f64::min);
    if gap <= tie {
        return Err(OracleError::Degenerate { gap, limit: tie });
    }

    let adj = adjoint(&block);
    let evd_adj = adj.eigen().map_err(|_| OracleError::NoConvergence)?;
    let radius = 1e-8 * scale;
    let candidates: Vec<usize> = (0..dim)
        .filter(|&i| (evd_adj.S()[i] - e.conj()).norm() <= radius)
        .collect();
    if candidates.len() != 1 {
        return Err(OracleError::LeftMatch {
            radius,
            found: candidates.len(),
        });
    }
    let li = candidates[0];

    let mut right: Vec<Complex64> = (0..dim).map(|r| evd.U()[(r, chosen)]).collect();
    let mut left: Vec<Complex64> = (0..dim).map(|r| evd_adj.U()[(r, li)]).collect();
    let rn = norm(&right);
    let big = right
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .ok_or(OracleError::ZeroVector)?;
    if rn == 0.0 || big.norm() == 0.0 {
        return Err(OracleError::ZeroVector);
    }
    let phase = big.conj() / big.norm() / rn;
    right.iter_mut().for_each(|x| *x *= phase);
    let overlap = dot(&left, &right);
    if overlap.norm() == 0.0 {
        return Err(OracleError::IllConditioned {
            condition: f64::INFINITY,
        });
    }
    let fix = overlap.conj().inv();
    left.iter_mut().for_each(|x| *x *= fix);
    let condition = norm(&left) * norm(&right);
    if condition > MAX_CONDITION {
        return Err(OracleError::IllConditioned { condition });
    }

    let embed = |v: &[Complex64]| {
        let mut out = vec![Complex64::new(0.0, 0.0); h.dim()];
        for (&idx, x) in indices.iter().zip(v) {
            out[idx] = *x;
        }
        out
    };
    Ok(BiorthogonalPair {
        eta,
        eigenvalue: e,
        right: embed(&right),
        left: embed(&left),
        condition,
    })
}

/// Diagonal of the spin rotation entering the antiunitary symmetry, `exp(+iφ Σ_j σ^z_j / 2)`.
///
/// With this basis convention the invariant combination is `R·K` with this sign (equivalently
/// `K·exp(−iφ Σσ^z/2)`), where `K` is entrywise conjugation.
pub fn rotation_diagonal(phi: f64, sites: usize) -> Vec<Complex64> {
    (0..1usize << sites)
        .map(|s| Complex64::from_polar(1.0, phi * f64::from(magnetization(s, sites)) / 2.0))
        .collect()
}

/// `‖R·conj(H)·R⁻¹ − H‖_F`.
pub fn rt_residual(h: &DenseOperator, phi: f64) -> f64 {
    let rot = rotation_diagonal(phi, h.sites);
    let n = h.dim();
    let mut acc = 0.0;
    for r in 0..n {
        for c in 0..n {
            let t = rot[r] * h.mat[(r, c)].conj() / rot[c];
            acc += (t - h.mat[(r, c)]).norm_sqr();
        }
    }
    acc.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RtVerdict {
    Symmetric,
    Broken,
}

/// Whether `R·conj(right)` equals `right` up to a global phase.
pub fn rt_state_test(pair: &BiorthogonalPair, phi: f64, sites: usize) -> Result<RtVerdict, OracleError> {
    let v = &pair.right;
    let nv = norm(v);
    if nv == 0.0 {
        return Err(OracleError::ZeroVector);
    }
    let rot = rotation_diagonal(phi, sites);
    let image: Vec<Complex64> = v.iter().zip(&rot).map(|(x, r)| r * x.conj()).collect();
    let overlap = dot(&image, v).norm() / (norm(&image) * nv);
    Ok(if overlap > 1.0 - 1e-8 {
        RtVerdict::Symmetric
    } else {
        RtVerdict::Broken
    })
}

/// Greedy nearest-neighbour matching of two multisets. Returns the largest matched distance, or
/// `None` when the sizes differ.
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    let mut used = vec![false; b.len()];
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by(|&x, &y| a[x].re.total_cmp(&a[y].re).then(a[x].im.total_cmp(&a[y].im)));
    let mut worst: f64 = 0.0;
    for i in order {
        let (best, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, z)| (j, (z - a[i]).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("sizes match");
        used[best] = true;
        worst = worst.max(d);
    }
    Some(worst)
}

/// Largest distance from an eigenvalue's conjugate to its nearest partner in the same set.
pub fn conjugate_pairing_defect(values: &[Complex64]) -> f64 {
    values
        .iter()
        .map(|z| {
            values
                .iter()
                .map(|w| (w - z.conj()).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{eval_coupling, CouplingSpec};

    fn setup(omega: f64, gamma: f64, lambda: f64, n: usize) -> (DenseOperator, CouplingValues<f64>) {
        let p = ParamPoint::cylinder(omega, gamma, lambda);
        let cv = eval_coupling(&CouplingSpec::PaperExample, &p).unwrap();
        let cfg = ModelConfig::unit(n).unwrap();
        (build_hamiltonian(&cfg, &p, &cv).unwrap(), cv)
    }

    #[test]
    fn hermiticity_cases() {
        let (h, _) = setup(0.0, 0.0, 1.0, 4);
        assert!(h.hermiticity_defect() < 1e-14);
        assert!(full_spectrum(&h).unwrap().iter().all(|z| z.im.abs() < 1e-10));

        let (h, _) = setup(0.0, 1.0, 2.0, 4);
        assert!(h.hermiticity_defect() > 0.1);

        let g = Complex64::from_polar(1.0, 2.0);
        let toggled = build_hamiltonian_raw(4, 1.0, g, Complex64::new(-1.0, 0.0), 2.0).unwrap();
        assert!(toggled.hermiticity_defect() < 1e-14);
    }

    #[test]
    fn sector_dimensions_and_projectors() {
        assert_eq!(sector_indices(4, Sector::Even).len(), 8);
        assert_eq!(sector_indices(4, Sector::Odd).len(), 8);
        let mut all: Vec<usize> = sector_indices(6, Sector::Even);
        all.extend(sector_indices(6, Sector::Odd));
        all.sort();
        assert_eq!(all, (0..64).collect::<Vec<_>>());
    }

    #[test]
    fn parity_is_conserved() {
        for (o, g, l) in [(0.0, 1.0, 2.0), (0.3, 2.0, 0.0), (1.0, 0.2, -0.7)] {
            let (h, _) = setup(o, g, l, 6);
            assert!(parity_commutator(&h) <= 1e-10 * h.frobenius_norm());
        }
    }

    #[test]
    fn size_guard() {
        let z = Complex64::new(1.0, 0.0);
        assert!(matches!(
            build_hamiltonian_raw(14, 1.0, z, z, 1.0),
            Err(OracleError::SizeGuard { .. })
        ));
    }

    #[test]
    fn classical_ground_state() {
        let (h, _) = setup(0.0, 0.0, 2.0, 4);
        let pair = biorthogonal_ground(&h, Sector::Even).unwrap();
        assert!((pair.eigenvalue - Complex64::new(-8.0, 0.0)).norm() < 1e-12);
        assert!((pair.right[15] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(pair.residual(&h) < 1e-9);
    }

    #[test]
    fn ground_pair_is_biorthonormal() {
        let (h, _) = setup(0.0, 1.0, 2.0, 4);
        let pair = biorthogonal_ground(&h, Sector::Even).unwrap();
        assert!((pair.eigenvalue.re + 7.39104).abs() < 1e-5);
        assert!((dot(&pair.left, &pair.right) - 1.0).norm() < 1e-12);
        assert!(pair.residual(&h) < 1e-9);
    }

    #[test]
    fn boundary_point_is_refused() {
        let (h, _) = setup(0.0, 1.0, 2f64.sqrt(), 4);
        let err = biorthogonal_ground(&h, Sector::Even).unwrap_err();
        assert!(
            matches!(err, OracleError::Degenerate { .. } | OracleError::IllConditioned { .. }),
            "{err}"
        );
    }

    #[test]
    fn rt_residuals() {
        for (o, g, l) in [(0.0, 1.0, 2.0), (0.5, 0.5, -1.0), (0.0, 2.0, 0.0)] {
            let (h, cv) = setup(o, g, l, 4);
            let norm = h.frobenius_norm();
            assert!(rt_residual(&h, cv.phi) < 1e-12 * norm);
            assert!(rt_residual(&h, cv.phi + 0.1) > 1e-3 * norm);
        }
        let toggled = build_hamiltonian_raw(4, 1.0, Complex64::new(0.7, 0.0), Complex64::new(-1.0, 0.0), 1.3).unwrap();
        assert!(rt_residual(&toggled, 0.0) < 1e-12 * toggled.frobenius_norm());
    }

    #[test]
    fn rt_state_verdicts() {
        let (h, cv) = setup(0.0, 1.0, 2.0, 4);
        let pair = biorthogonal_ground(&h, Sector::Even).unwrap();
        assert_eq!(rt_state_test(&pair, cv.phi, 4).unwrap(), RtVerdict::Symmetric);

        let (h, cv) = setup(0.0, 2.0, 0.0, 4);
        let pair = biorthogonal_ground(&h, Sector::Even).unwrap();
        assert!(pair.eigenvalue.im.abs() > 1.0);
        assert_eq!(rt_state_test(&pair, cv.phi, 4).unwrap(), RtVerdict::Broken);

        let (h, cv) = setup(0.0, 0.0, 0.5, 4);
        let pair = biorthogonal_ground(&h, Sector::Even).unwrap();
        assert_eq!(rt_state_test(&pair, cv.phi, 4).unwrap(), RtVerdict::Symmetric);
    }

    #[test]
    fn broken_spectrum_pairs_up() {
        let (h, _) = setup(0.0, 2.0, 0.0, 4);
        let s = sector_spectrum(&h, Sector::Even).unwrap();
        assert!(s.eigenvalues.iter().any(|z| z.im.abs() > 1.0));
        assert!(conjugate_pairing_defect(&s.eigenvalues) < 1e-8);
    }

    #[test]
    fn multiset_matching() {
        let a = [Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 2.0)];
        let b = [Complex64::new(0.0, 2.0), Complex64::new(1.0, 1e-9), Complex64::new(1.0, 0.0)];
        assert!(multiset_distance(&a, &b).unwrap() < 2e-9);
        assert!(multiset_distance(&a, &b[..2]).is_none());
        let c = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 2.0), Complex64::new(0.0, 2.0)];
        assert!(multiset_distance(&a, &c).unwrap() > 1.0);
    }
}
