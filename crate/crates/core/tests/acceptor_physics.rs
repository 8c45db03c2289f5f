use acceptorloss_core::acceptor::*;
use acceptorloss_core::constants::{ev_to_joules, BOHR_MAGNETON, DEBYE, PLANCK};
use nalgebra::{Complex, DMatrix};
use proptest::prelude::*;

type C = Complex<f64>;

fn fro(m: &Mat4) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn scale(m: &Mat4, c: f64) -> Mat4 {
    m.map(|z| z * c)
}

/// Eigenvalues of a Hermitian matrix through its real 8×8 embedding
/// `[[Re, -Im], [Im, Re]]`; every eigenvalue appears twice there.
fn embedded_eigenvalues(h: &Mat4) -> [f64; 4] {
    let s = h.iter().fold(0.0_f64, |a, z| a.max(z.norm()));
    let mut big = DMatrix::<f64>::zeros(8, 8);
    for i in 0..4 {
        for j in 0..4 {
            let z = h[(i, j)] / s;
            big[(i, j)] = z.re;
            big[(i + 4, j + 4)] = z.re;
            big[(i, j + 4)] = -z.im;
            big[(i + 4, j)] = z.im;
        }
    }
    let mut ev: Vec<f64> = big
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|x| x * s)
        .collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    [ev[0], ev[2], ev[4], ev[6]]
}

#[test]
#[allow(clippy::needless_range_loop)]
fn spin_matrices_match_explicit_ladder_elements() {
    // Written out by hand: <3/2|J+|1/2> = √3, <1/2|J+|-1/2> = 2, <-1/2|J+|-3/2> = √3.
    let r3 = 3f64.sqrt();
    let jp = [
        [0.0, r3, 0.0, 0.0],
        [0.0, 0.0, 2.0, 0.0],
        [0.0, 0.0, 0.0, r3],
        [0.0; 4],
    ];
    let s = build_spin_operators();
    for i in 0..4 {
        for j in 0..4 {
            let jx = 0.5 * (jp[i][j] + jp[j][i]);
            let jy = C::new(0.0, -0.5) * (jp[i][j] - jp[j][i]);
            assert!((s.jx[(i, j)] - C::new(jx, 0.0)).norm() < 1e-15);
            assert!((s.jy[(i, j)] - jy).norm() < 1e-15);
        }
    }
}

#[test]
fn spin_algebra() {
    let s = build_spin_operators();
    let i = C::new(0.0, 1.0);
    let comm = |a: &Mat4, b: &Mat4| a * b - b * a;
    assert!(fro(&(comm(&s.jx, &s.jy) - s.jz.map(|z| z * i))) < 1e-14);
    assert!(fro(&(comm(&s.jy, &s.jz) - s.jx.map(|z| z * i))) < 1e-14);
    assert!(fro(&(comm(&s.jz, &s.jx) - s.jy.map(|z| z * i))) < 1e-14);
    let casimir = s.jx * s.jx + s.jy * s.jy + s.jz * s.jz;
    assert!(fro(&(casimir - scale(&Mat4::identity(), 3.75))) < 1e-14);
    for m in [&s.jx, &s.jy, &s.jz] {
        assert!(fro(&(m - m.adjoint())) < 1e-15);
    }
}

#[test]
fn zeeman_along_z_closed_form() {
    let p = AcceptorParams::default();
    let bz = 0.2;
    let h = hamiltonian_magnetic(&p, &FieldVector::new(0.0, 0.0, bz));
    let ms = [1.5, 0.5, -0.5, -1.5];
    for (k, m) in ms.iter().enumerate() {
        let want = BOHR_MAGNETON * bz * (p.g1 * m + p.g2 * m * m * m);
        assert!((h[(k, k)].re - want).abs() < 1e-12 * want.abs());
    }
    assert!(fro(&(h - Mat4::from_diagonal(&h.diagonal()))) < 1e-40);
}

#[test]
fn zeeman_30_gauss_half_states() {
    let p = AcceptorParams::default();
    let bz = 3e-3;
    let h = hamiltonian_magnetic(&p, &FieldVector::new(0.0, 0.0, bz));
    let split_hz = (h[(1, 1)].re - h[(2, 2)].re).abs() / PLANCK;
    let closed = BOHR_MAGNETON * bz * (p.g1 + p.g2 / 4.0).abs() / PLANCK;
    assert!((split_hz / closed - 1.0).abs() < 1e-12);
    assert!((split_hz / 45.2e6 - 1.0).abs() < 5e-3, "{split_hz}");
}

#[test]
fn electric_term_is_traceless_and_matches_products() {
    let p = AcceptorParams::default();
    let s = build_spin_operators();
    let h = hamiltonian_electric(&p, &FieldVector::new(2e5, -3e5, 7e4));
    assert!(h.trace().norm() < 1e-15 * fro(&h));
    let ex = 4.2e5;
    let hx = hamiltonian_electric(&p, &FieldVector::new(ex, 0.0, 0.0));
    let oracle = scale(
        &(s.jy * s.jz + s.jz * s.jy),
        p.dipole_debye * DEBYE / 3f64.sqrt() * ex,
    );
    assert!(fro(&(hx - oracle)) < 1e-13 * fro(&oracle));
}

#[test]
fn uniaxial_strain_orbital_splitting() {
    let p = AcceptorParams::default();
    let ls = level_structure(
        &p,
        &StrainTensor::uniaxial_z(1e-5),
        &FieldVector::ZERO,
        &FieldVector::ZERO,
    );
    let closed = 2.0 * ev_to_joules(p.gamma_b_ev).abs() * 1e-5 / PLANCK;
    assert!((ls.orbital_splitting_hz / closed - 1.0).abs() < 1e-10);
    assert!((ls.orbital_splitting_hz - 6.87e9).abs() < 0.01e9);
    assert!(ls.zeeman_lower_hz.abs() < 1.0 && ls.zeeman_upper_hz.abs() < 1.0);
    // Pair energies are (9/4)γS and (1/4)γS, each twofold.
    let g = ev_to_joules(p.gamma_b_ev) * 1e-5;
    let mut want = [2.25 * g, 2.25 * g, 0.25 * g, 0.25 * g];
    want.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for (a, b) in ls.eigenvalues.iter().zip(want) {
        assert!((a - b).abs() < 1e-10 * g.abs());
    }
}

#[test]
fn strain_plus_field_lifts_kramers_pairs() {
    let p = AcceptorParams::default();
    let ls = level_structure(
        &p,
        &StrainTensor::uniaxial_z(1e-5),
        &FieldVector::ZERO,
        &FieldVector::new(0.0, 0.0, 3e-3),
    );
    assert!(ls.zeeman_lower_hz > 1e6 && ls.zeeman_upper_hz > 1e6);
    assert!((ls.zeeman_lower_hz - ls.zeeman_upper_hz).abs() > 1e6);
    for w in ls.eigenvalues.windows(2) {
        assert!(w[0] <= w[1]);
    }
}

fn strain_strategy() -> impl Strategy<Value = StrainTensor> {
    prop::array::uniform6(-2e-5..2e-5f64).prop_map(|c| StrainTensor {
        xx: c[0],
        yy: c[1],
        zz: c[2],
        xy: c[3],
        yz: c[4],
        zx: c[5],
    })
}

fn field_strategy(mag: f64) -> impl Strategy<Value = FieldVector> {
    prop::array::uniform3(-mag..mag).prop_map(|c| FieldVector::new(c[0], c[1], c[2]))
}

proptest! {
    #[test]
    fn builders_are_hermitian(s in strain_strategy(), e in field_strategy(1e6), b in field_strategy(0.1)) {
        let p = AcceptorParams::default();
        for h in [hamiltonian_strain(&p, &s), hamiltonian_electric(&p, &e), hamiltonian_magnetic(&p, &b)] {
            prop_assert!(fro(&(h - h.adjoint())) <= 1e-12 * fro(&h));
        }
    }

    #[test]
    fn builders_are_linear(s in strain_strategy(), e in field_strategy(1e6), b in field_strategy(0.1), c in -5.0..5.0f64) {
        let p = AcceptorParams::default();
        let pairs = [
            (hamiltonian_strain(&p, &s.scaled(c)), scale(&hamiltonian_strain(&p, &s), c)),
            (hamiltonian_electric(&p, &e.scaled(c)), scale(&hamiltonian_electric(&p, &e), c)),
            (hamiltonian_magnetic(&p, &b.scaled(c)), scale(&hamiltonian_magnetic(&p, &b), c)),
        ];
        for (lhs, rhs) in pairs {
            prop_assert!(fro(&(lhs - rhs)) <= 1e-12 * fro(&rhs).max(1e-300));
        }
    }

    #[test]
    fn level_structure_matches_dense_diagonalization(s in strain_strategy(), e in field_strategy(1e6), b in field_strategy(0.1)) {
        let p = AcceptorParams::default();
        let h = hamiltonian_strain(&p, &s) + hamiltonian_electric(&p, &e) + hamiltonian_magnetic(&p, &b);
        let ls = level_structure(&p, &s, &e, &b);
        let oracle = embedded_eigenvalues(&h);
        let scale = oracle.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
        for (a, o) in ls.eigenvalues.iter().zip(oracle) {
            prop_assert!((a - o).abs() <= 1e-10 * scale);
        }
        // eigenvectors satisfy H v = E v
        for k in 0..4 {
            let v = ls.eigenvectors.column(k);
            let r = h * v - v * C::new(ls.eigenvalues[k], 0.0);
            prop_assert!(r.norm() <= 1e-10 * scale);
        }
    }

    #[test]
    fn uniaxial_splitting_is_twice_gamma_strain(sign in prop::bool::ANY, mag in 1e-7..5e-5f64, axis in 0usize..3) {
        let p = AcceptorParams::default();
        let v = if sign { mag } else { -mag };
        let mut s = StrainTensor::default();
        match axis { 0 => s.xx = v, 1 => s.yy = v, _ => s.zz = v }
        let ls = level_structure(&p, &s, &FieldVector::ZERO, &FieldVector::ZERO);
        let closed = 2.0 * (ev_to_joules(p.gamma_b_ev) * v).abs() / PLANCK;
        prop_assert!((ls.orbital_splitting_hz / closed - 1.0).abs() < 1e-10);
    }
}
