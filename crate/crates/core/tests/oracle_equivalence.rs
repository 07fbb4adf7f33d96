use nhxy::coupling::{eval_coupling, CouplingSpec, GAMMA, LAMBDA, OMEGA};
use nhxy::freefermion::{ground_energy, quasiparticle_spectrum, radicand, Sector};
use nhxy::oracle::{
    biorthogonal_ground, build_hamiltonian, conjugate_pairing_defect, multiset_distance, parity_commutator,
    sector_spectrum,
};
use nhxy::phase::{classify_point, Verdict};
use nhxy::{ModelConfig, ParamPoint};
use num_complex::Complex64;
use proptest::prelude::*;

fn far_from_exceptional(n: usize, p: &ParamPoint) -> bool {
    let g = p.get(OMEGA).unwrap().hypot(p.get(GAMMA).unwrap());
    [Sector::Even, Sector::Odd].into_iter().all(|eta| {
        ModelConfig::new(1.0, n, eta)
            .unwrap()
            .grid()
            .into_iter()
            .all(|k| radicand(k, p.lambda(), g).abs() > 0.05)
    })
}

fn compare(n: usize, eta: Sector, p: &ParamPoint) -> f64 {
    let cfg = ModelConfig::new(1.0, n, eta).unwrap();
    let cv = eval_coupling(&CouplingSpec::PaperExample, p).unwrap();
    let h = build_hamiltonian(&cfg, p, &cv).unwrap();
    let ed = sector_spectrum(&h, eta).unwrap().eigenvalues;
    let qp = quasiparticle_spectrum(&cfg, p, &cv).unwrap();
    let scale = h.frobenius_norm().max(1.0);
    multiset_distance(&ed, &qp).expect("same sector dimension") / scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn quasiparticle_spectrum_matches_dense_sectors(
        omega in -2.0f64..2.0,
        gamma in -2.0f64..2.0,
        lambda in -3.0f64..3.0,
        half in 2usize..4,
    ) {
        let n = 2 * half;
        let p = ParamPoint::cylinder(omega, gamma, lambda);
        prop_assume!(far_from_exceptional(n, &p));
        for eta in [Sector::Even, Sector::Odd] {
            let err = compare(n, eta, &p);
            prop_assert!(err < 1e-9, "N={} {:?} error {:e}", n, eta, err);
        }
    }
}

#[test]
fn parity_is_conserved_and_complex_levels_pair_up() {
    let cfg = ModelConfig::unit(6).unwrap();
    for (o, g, l) in [(0.3, 0.9, 0.2), (1.0, 1.0, 1.1), (0.0, 2.0, -0.5)] {
        let p = ParamPoint::cylinder(o, g, l);
        let cv = eval_coupling(&CouplingSpec::PaperExample, &p).unwrap();
        let h = build_hamiltonian(&cfg, &p, &cv).unwrap();
        assert!(parity_commutator(&h) < 1e-12);
        assert!(h.hermiticity_defect() > 1e-3);
        let ev = sector_spectrum(&h, Sector::Even).unwrap().eigenvalues;
        assert!(ev.iter().any(|z| z.im.abs() > 1e-3), "expected a broken point");
        assert!(conjugate_pairing_defect(&ev) < 1e-8);
    }
}

#[test]
fn biorthogonal_ground_state_carries_the_closed_form_energy() {
    for n in [4, 6, 8] {
        let cfg = ModelConfig::unit(n).unwrap();
        for (o, g, l) in [(0.0, 1.0, 2.0), (0.4, -0.3, -1.8), (0.2, 0.2, 3.5)] {
            let p = ParamPoint::cylinder(o, g, l);
            let cv = eval_coupling(&CouplingSpec::PaperExample, &p).unwrap();
            assert_eq!(classify_point(&p, &cv, &cfg).verdict, Verdict::Unbroken);
            let h = build_hamiltonian(&cfg, &p, &cv).unwrap();
            let pair = biorthogonal_ground(&h, Sector::Even).unwrap();
            let e_g = ground_energy(&p, &cv, &cfg).e_g;
            assert!((pair.eigenvalue - e_g).norm() <= 1e-9 * e_g.norm(), "{} vs {e_g}", pair.eigenvalue);
            assert!(pair.residual(&h) < 1e-10);
            let overlap: Complex64 = pair.left.iter().zip(&pair.right).map(|(l, r)| l.conj() * r).sum();
            assert!((overlap - 1.0).norm() < 1e-10);
        }
    }
}

#[test]
fn custom_family_builds_the_same_operator() {
    let custom = CouplingSpec::custom("sqrt(omega^2 + gamma^2)*exp(i*lambda)", "1", &[OMEGA, GAMMA, LAMBDA]).unwrap();
    let cfg = ModelConfig::unit(6).unwrap();
    let p = ParamPoint::cylinder(0.7, -0.2, 1.3);
    let a = build_hamiltonian(&cfg, &p, &eval_coupling(&custom, &p).unwrap()).unwrap();
    let b = build_hamiltonian(&cfg, &p, &eval_coupling(&CouplingSpec::PaperExample, &p).unwrap()).unwrap();
    let mut worst: f64 = 0.0;
    for r in 0..a.dim() {
        for c in 0..a.dim() {
            worst = worst.max((a.get(r, c) - b.get(r, c)).norm());
        }
    }
    assert!(worst < 1e-14);
}

/// Berry phase of the dense ground state around a small square in the `(γ, λ)` plane, divided
/// by its area.
fn dense_plaquette_curvature(n: usize, gamma: f64, lambda: f64, h: f64) -> f64 {
    let cfg = ModelConfig::unit(n).unwrap();
    let corners = [(gamma, lambda), (gamma + h, lambda), (gamma + h, lambda + h), (gamma, lambda + h)];
    let states: Vec<_> = corners
        .iter()
        .map(|&(g, l)| {
            let p = ParamPoint::cylinder(0.0, g, l);
            let cv = eval_coupling(&CouplingSpec::PaperExample, &p).unwrap();
            biorthogonal_ground(&build_hamiltonian(&cfg, &p, &cv).unwrap(), Sector::Even).unwrap()
        })
        .collect();
    let mut product = Complex64::new(1.0, 0.0);
    for i in 0..4 {
        let next = &states[(i + 1) % 4];
        product *= states[i].left.iter().zip(&next.right).map(|(l, r)| l.conj() * r).sum::<Complex64>();
    }
    -product.arg() / (h * h)
}

#[test]
fn dense_ground_state_curvature_is_the_mirror_of_the_vacuum_branch() {
    // the lowest dense level fills the 2J cos k − ε branch of every pair
    use nhxy::geometry::curvature_tensor;
    for (n, gamma, lambda) in [(4, 1.0, 2.0), (6, 0.5, -1.8)] {
        let ed = dense_plaquette_curvature(n, gamma, lambda, 1e-3);
        let t = curvature_tensor(
            &CouplingSpec::PaperExample,
            &ParamPoint::cylinder(0.0, gamma + 5e-4, lambda + 5e-4),
            &ModelConfig::unit(n).unwrap(),
        )
        .unwrap();
        let closed = t.get(GAMMA, LAMBDA).unwrap().re;
        assert!(closed.abs() > 1e-2);
        assert!((ed + closed).abs() < 1e-4 * closed.abs().max(1.0), "dense {ed} vs closed form {closed}");
    }
}
