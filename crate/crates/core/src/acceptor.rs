//! Boron acceptor level structure.
//!
//! The bound hole of a boron acceptor in silicon is an effective spin-3/2
//! with a twofold orbital degeneracy. Strain and electric fields split the
//! two Kramers pairs (the "orbital splitting"); a magnetic field then lifts
//! the remaining spin degeneracy inside each pair.
//!
//! All matrices use the basis `m = +3/2, +1/2, -1/2, -3/2` (index 0..3) and
//! all energies are in joules.

use nalgebra::{Complex, Matrix2, Matrix4};
use thiserror::Error;

use crate::constants::{
    debye_to_coulomb_meter, ev_to_joules, hz_to_joules, joules_to_hz, BOHR_MAGNETON,
};

pub type C64 = Complex<f64>;
pub type Mat4 = Matrix4<C64>;
pub type Mat2 = Matrix2<C64>;

const FRAC_1_SQRT_3: f64 = 0.577_350_269_189_625_8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AcceptorError {
    #[error("two-level system has zero splitting (eps0 = delta0 = 0)")]
    ZeroTlsSplitting,
    #[error("negative tunneling rate delta0 = {0}")]
    NegativeTunneling(f64),
}

/// Spin-3/2 angular momentum matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinOperators {
    pub jx: Mat4,
    pub jy: Mat4,
    pub jz: Mat4,
}

impl SpinOperators {
    pub fn new() -> Self {
        build_spin_operators()
    }
}

impl Default for SpinOperators {
    fn default() -> Self {
        Self::new()
    }
}

/// Coupling constants of the spin-3/2 acceptor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcceptorParams {
    pub g1: f64,
    pub g2: f64,
    /// Electric dipole, debye.
    pub dipole_debye: f64,
    /// Deformation potential γ_B, eV.
    pub gamma_b_ev: f64,
    /// Shear deformation potential γ'_B, eV.
    pub gamma_b_prime_ev: f64,
}

impl Default for AcceptorParams {
    /// Literature values for boron in silicon.
    fn default() -> Self {
        Self {
            g1: -1.07,
            g2: -0.03,
            dipole_debye: 0.26,
            gamma_b_ev: -1.42,
            gamma_b_prime_ev: -3.7,
        }
    }
}

/// Symmetric strain tensor; only the six independent components are stored.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StrainTensor {
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
    pub xy: f64,
    pub yz: f64,
    pub zx: f64,
}

impl StrainTensor {
    pub fn uniaxial_z(s: f64) -> Self {
        Self {
            zz: s,
            ..Self::default()
        }
    }

    pub fn hydrostatic(s: f64) -> Self {
        Self {
            xx: s,
            yy: s,
            zz: s,
            ..Self::default()
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            xx: c * self.xx,
            yy: c * self.yy,
            zz: c * self.zz,
            xy: c * self.xy,
            yz: c * self.yz,
            zx: c * self.zx,
        }
    }

    pub fn components(&self) -> [f64; 6] {
        [self.xx, self.yy, self.zz, self.xy, self.yz, self.zx]
    }

    pub fn is_finite(&self) -> bool {
        self.components().iter().all(|c| c.is_finite())
    }
}

/// Cartesian field vector: tesla for magnetic fields, V/m for electric fields.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FieldVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl FieldVector {
    pub const ZERO: Self = Self {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(c * self.x, c * self.y, c * self.z)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Standard-tunneling-model two-level system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TlsParams {
    /// Static asymmetry energy divided by h, Hz.
    pub eps0_hz: f64,
    /// Tunneling energy divided by h, Hz.
    pub delta0_hz: f64,
    /// Deformation potential, eV.
    pub gamma_ev: f64,
    /// Electric dipole, debye.
    pub dipole_debye: f64,
}

impl TlsParams {
    pub fn energy_hz(&self) -> f64 {
        self.eps0_hz.hypot(self.delta0_hz)
    }
}

/// Eigen-decomposition of the combined acceptor Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelStructure {
    /// Mean of the upper pair minus mean of the lower pair, Hz.
    pub orbital_splitting_hz: f64,
    /// E₂ − E₁, Hz.
    pub zeeman_lower_hz: f64,
    /// E₄ − E₃, Hz.
    pub zeeman_upper_hz: f64,
    /// Ascending eigenvalues, J.
    pub eigenvalues: [f64; 4],
    /// Eigenvectors as columns, in the order of `eigenvalues`. Vectors inside
    /// a degenerate pair are not canonicalized.
    pub eigenvectors: Mat4,
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn anticommutator(a: &Mat4, b: &Mat4) -> Mat4 {
    a * b + b * a
}

/// Spin-3/2 matrices from the ladder-operator matrix elements
/// `<m+1|J+|m> = sqrt(j(j+1) - m(m+1))`.
pub fn build_spin_operators() -> SpinOperators {
    let j = 1.5_f64;
    let m_of = |i: usize| j - i as f64;
    let mut jp = Mat4::zeros();
    let mut jz = Mat4::zeros();
    for i in 0..4 {
        jz[(i, i)] = re(m_of(i));
    }
    // J+ maps index i (m) to index i-1 (m+1).
    for i in 1..4 {
        let m = m_of(i);
        jp[(i - 1, i)] = re((j * (j + 1.0) - m * (m + 1.0)).sqrt());
    }
    let jm = jp.adjoint();
    let jx = (jp + jm).map(|z| z * 0.5);
    let jy = (jp - jm).map(|z| z * C64::new(0.0, -0.5));
    SpinOperators { jx, jy, jz }
}

/// Zeeman term `μ_B [g1 (J·B) + g2 (Jx³Bx + Jy³By + Jz³Bz)]`.
pub fn hamiltonian_magnetic(params: &AcceptorParams, b: &FieldVector) -> Mat4 {
    let s = build_spin_operators();
    let cube = |m: &Mat4| m * m * m;
    let linear = s.jx.map(|z| z * b.x) + s.jy.map(|z| z * b.y) + s.jz.map(|z| z * b.z);
    let cubic =
        cube(&s.jx).map(|z| z * b.x) + cube(&s.jy).map(|z| z * b.y) + cube(&s.jz).map(|z| z * b.z);
    (linear.map(|z| z * params.g1) + cubic.map(|z| z * params.g2)).map(|z| z * BOHR_MAGNETON)
}

/// Stark term `(p_B/√3)(Ex{Jy,Jz} + Ey{Jz,Jx} + Ez{Jx,Jy})`.
pub fn hamiltonian_electric(params: &AcceptorParams, e: &FieldVector) -> Mat4 {
    let s = build_spin_operators();
    let p = debye_to_coulomb_meter(params.dipole_debye) * FRAC_1_SQRT_3;
    let h = anticommutator(&s.jy, &s.jz).map(|z| z * e.x)
        + anticommutator(&s.jz, &s.jx).map(|z| z * e.y)
        + anticommutator(&s.jx, &s.jy).map(|z| z * e.z);
    h.map(|z| z * p)
}

/// Deformation-potential term
/// `γ_B(Sxx Jx² + Syy Jy² + Szz Jz²) + (γ'_B/√3)(Sxy{Jx,Jy} + Syz{Jy,Jz} + Szx{Jz,Jx})`.
pub fn hamiltonian_strain(params: &AcceptorParams, strain: &StrainTensor) -> Mat4 {
    let s = build_spin_operators();
    let gb = ev_to_joules(params.gamma_b_ev);
    let gbp = ev_to_joules(params.gamma_b_prime_ev) * FRAC_1_SQRT_3;
    let diag = (s.jx * s.jx).map(|z| z * strain.xx)
        + (s.jy * s.jy).map(|z| z * strain.yy)
        + (s.jz * s.jz).map(|z| z * strain.zz);
    let shear = anticommutator(&s.jx, &s.jy).map(|z| z * strain.xy)
        + anticommutator(&s.jy, &s.jz).map(|z| z * strain.yz)
        + anticommutator(&s.jz, &s.jx).map(|z| z * strain.zx);
    diag.map(|z| z * gb) + shear.map(|z| z * gbp)
}

/// Ascending eigenvalues and matching eigenvector columns of a Hermitian 4×4
/// matrix. The matrix is rescaled to unit magnitude before diagonalizing.
pub fn hermitian_eigen(h: &Mat4) -> ([f64; 4], Mat4) {
    let scale = h.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));
    if scale == 0.0 {
        return ([0.0; 4], Mat4::identity());
    }
    let herm = (h + h.adjoint()).map(|z| z * (0.5 / scale));
    let eig = herm.symmetric_eigen();
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let mut values = [0.0; 4];
    let mut vectors = Mat4::zeros();
    for (k, &i) in order.iter().enumerate() {
        values[k] = eig.eigenvalues[i] * scale;
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Diagonalizes `H_S + H_E + H_B` and reports the orbital and Zeeman splittings.
pub fn level_structure(
    params: &AcceptorParams,
    strain: &StrainTensor,
    e: &FieldVector,
    b: &FieldVector,
) -> LevelStructure {
    let h = hamiltonian_strain(params, strain)
        + hamiltonian_electric(params, e)
        + hamiltonian_magnetic(params, b);
    let (eigenvalues, eigenvectors) = hermitian_eigen(&h);
    let [e1, e2, e3, e4] = eigenvalues;
    LevelStructure {
        orbital_splitting_hz: joules_to_hz(0.5 * (e3 + e4) - 0.5 * (e1 + e2)),
        zeeman_lower_hz: joules_to_hz(e2 - e1),
        zeeman_upper_hz: joules_to_hz(e4 - e3),
        eigenvalues,
        eigenvectors,
    }
}

/// Two-level Hamiltonian in the energy eigenbasis with a strain and field
/// perturbation: `½ΔE σz + (γS + pE)((ε₀/ΔE)σz + (Δ₀/ΔE)σx)`, in joules.
///
/// `strain` is the strain projected on the defect axis and `field` the
/// electric field (V/m) projected on the dipole.
pub fn tls_hamiltonian(params: &TlsParams, strain: f64, field: f64) -> Result<Mat2, AcceptorError> {
    if params.delta0_hz < 0.0 {
        return Err(AcceptorError::NegativeTunneling(params.delta0_hz));
    }
    let de_hz = params.energy_hz();
    if de_hz == 0.0 {
        return Err(AcceptorError::ZeroTlsSplitting);
    }
    let de = hz_to_joules(de_hz);
    let coupling = ev_to_joules(params.gamma_ev) * strain
        + debye_to_coulomb_meter(params.dipole_debye) * field;
    let cz = 0.5 * de + coupling * params.eps0_hz / de_hz;
    let cx = coupling * params.delta0_hz / de_hz;
    Ok(Mat2::new(re(cz), re(cx), re(cx), re(-cz)))
}
