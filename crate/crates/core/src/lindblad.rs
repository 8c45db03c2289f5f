//! Driven, phonon-damped four-level acceptor dynamics.
//!
//! Levels `|1⟩, |2⟩` form the lower Kramers pair and `|3⟩, |4⟩` the upper
//! pair. A resonant drive couples `|1⟩↔|3⟩` and `|2⟩↔|4⟩`; in a magnetic
//! field the lower and upper pairs are split by `Δ` and `δ` and, in the frame
//! rotating with the `|1⟩↔|3⟩` transition, the Hamiltonian is
//!
//! ```text
//! H/ħ = Δ|2⟩⟨2| + δ|4⟩⟨4| + Ω(|3⟩⟨1| + |4⟩⟨2|) + Ω*(|1⟩⟨3| + |2⟩⟨4|)
//! ```
//!
//! Eight phonon collapse operators connect the pairs. Rates (`γ′`, `γ̃`) and
//! frequencies (`Ω`, `Δ`, `δ`) share one time unit; the crate uses s⁻¹
//! (angular for `Ω`, `Δ`, `δ`).
//!
//! Density matrices are vectorized column-major: `vec(ρ)[i + 4j] = ρ[i][j]`,
//! so `vec(AρB) = (Bᵀ ⊗ A) vec(ρ)`.

use alloc::vec::Vec;
use core::f64::consts::SQRT_2;

use nalgebra::{DMatrix, SMatrix, SVector, SVD};
use thiserror::Error;

use crate::acceptor::{Mat4, C64};
use crate::constants::{BOLTZMANN, PLANCK};

pub type Super = SMatrix<C64, 16, 16>;
pub type SuperVec = SVector<C64, 16>;

/// Relative singular-value threshold below which a direction counts as part
/// of the Liouvillian kernel.
pub const NULL_SPACE_TOLERANCE: f64 = 1e-11;

/// `|Δ−δ| / |Ω|` below which the secular in-field closed form is flagged.
pub const SECULAR_RATIO_THRESHOLD: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LindbladError {
    #[error("invalid four-level parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("steady state is not unique: kernel dimension {dimension}")]
    DegenerateSteadyState { dimension: usize },
    #[error("no stationary state found (smallest singular value {smallest:e})")]
    NoSteadyState { smallest: f64 },
    #[error("critical Rabi frequency vanishes in a field at zero temperature (nbar = 0)")]
    ZeroTemperatureSaturation,
    #[error("matrix exponential failed at t = {t}")]
    StepFailure { t: f64 },
    #[error("invalid density matrix: {0}")]
    InvalidState(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LindbladWarning {
    /// The detuning between the two drive transitions is too small for the
    /// secular closed form to be trusted.
    ApproximationInvalid { detuning: f64, omega: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourLevelParams {
    /// Spontaneous rate |3⟩→|1⟩ and |4⟩→|2⟩, s⁻¹.
    pub gamma_prime: f64,
    /// Spontaneous rate |3⟩→|2⟩ and |4⟩→|1⟩, s⁻¹.
    pub gamma_tilde: f64,
    /// Thermal phonon occupancy.
    pub nbar: f64,
    /// Complex drive amplitude, rad/s.
    pub omega: C64,
    /// Zeeman splitting of the lower pair, rad/s.
    pub delta_big: f64,
    /// Zeeman splitting of the upper pair, rad/s.
    pub delta_small: f64,
    /// Spin relaxation |1⟩↔|2⟩, s⁻¹. Zero unless explicitly enabled; never
    /// used by the closed forms.
    pub gamma_spin: f64,
}

impl Default for FourLevelParams {
    fn default() -> Self {
        Self {
            gamma_prime: 1.0,
            gamma_tilde: 1.0,
            nbar: 0.0,
            omega: C64::new(0.0, 0.0),
            delta_big: 0.0,
            delta_small: 0.0,
            gamma_spin: 0.0,
        }
    }
}

impl FourLevelParams {
    pub fn validate(&self) -> Result<(), LindbladError> {
        let bad = |name, value: f64| Err(LindbladError::InvalidParameter { name, value });
        if !(self.gamma_prime > 0.0 && self.gamma_prime.is_finite()) {
            return bad("gamma_prime", self.gamma_prime);
        }
        if !(self.gamma_tilde >= 0.0 && self.gamma_tilde.is_finite()) {
            return bad("gamma_tilde", self.gamma_tilde);
        }
        if !(self.nbar >= 0.0 && self.nbar.is_finite()) {
            return bad("nbar", self.nbar);
        }
        if !(self.gamma_spin >= 0.0 && self.gamma_spin.is_finite()) {
            return bad("gamma_spin", self.gamma_spin);
        }
        if !(self.omega.re.is_finite() && self.omega.im.is_finite()) {
            return bad("omega", self.omega.norm());
        }
        if !(self.delta_big.is_finite() && self.delta_small.is_finite()) {
            return bad("delta", self.delta_big - self.delta_small);
        }
        Ok(())
    }

    /// `γ′ + γ̃`
    pub fn total_rate(&self) -> f64 {
        self.gamma_prime + self.gamma_tilde
    }

    /// Pumping rate `R = 4|Ω|² / [(1+2n̄)(γ′+γ̃)]`.
    pub fn pumping_rate(&self) -> f64 {
        4.0 * self.omega.norm_sqr() / ((1.0 + 2.0 * self.nbar) * self.total_rate())
    }

    pub fn with_omega(&self, omega: f64) -> Self {
        Self {
            omega: C64::new(omega, 0.0),
            ..*self
        }
    }
}

/// Weighted jump operator `C = weight · |to⟩⟨from|` (levels are 1-based).
#[derive(Debug, Clone, PartialEq)]
pub struct CollapseOp {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

impl CollapseOp {
    pub fn matrix(&self) -> Mat4 {
        let mut m = Mat4::zeros();
        m[(self.to - 1, self.from - 1)] = C64::new(self.weight, 0.0);
        m
    }
}

/// The eight phonon channels C₁…C₈ in order: thermal absorption
/// (odd indices) and emission (even indices) on |1⟩↔|3⟩, |2⟩↔|3⟩,
/// |1⟩↔|4⟩ and |2⟩↔|4⟩.
pub fn collapse_operators(p: &FourLevelParams) -> [CollapseOp; 8] {
    let (n, gp, gt) = (p.nbar, p.gamma_prime, p.gamma_tilde);
    let op = |from, to, rate: f64| CollapseOp {
        from,
        to,
        weight: rate.sqrt(),
    };
    [
        op(1, 3, n * gp),
        op(3, 1, (n + 1.0) * gp),
        op(2, 3, n * gt),
        op(3, 2, (n + 1.0) * gt),
        op(1, 4, n * gt),
        op(4, 1, (n + 1.0) * gt),
        op(2, 4, n * gp),
        op(4, 2, (n + 1.0) * gp),
    ]
}

/// Rotating-frame Hamiltonian divided by ħ.
pub fn hamiltonian(p: &FourLevelParams, field_on: bool) -> Mat4 {
    let mut h = Mat4::zeros();
    h[(2, 0)] = p.omega;
    h[(3, 1)] = p.omega;
    h[(0, 2)] = p.omega.conj();
    h[(1, 3)] = p.omega.conj();
    if field_on {
        h[(1, 1)] = C64::new(p.delta_big, 0.0);
        h[(3, 3)] = C64::new(p.delta_small, 0.0);
    }
    h
}

/// Vectorized Lindblad generator.
#[derive(Debug, Clone, PartialEq)]
pub struct Liouvillian(pub Super);

impl Liouvillian {
    pub fn apply(&self, rho: &Mat4) -> Mat4 {
        unvec(&(self.0 * vec(rho)))
    }

    pub fn matrix(&self) -> &Super {
        &self.0
    }
}

pub fn vec(rho: &Mat4) -> SuperVec {
    SuperVec::from_iterator(rho.iter().copied())
}

pub fn unvec(v: &SuperVec) -> Mat4 {
    Mat4::from_iterator(v.iter().copied())
}

fn dissipator(c: &Mat4) -> Super {
    let id = Mat4::identity();
    let cdc = c.adjoint() * c;
    c.conjugate().kronecker(c)
        - (id.kronecker(&cdc) + cdc.transpose().kronecker(&id)).map(|z| z * 0.5)
}

/// `L[ρ] = −i[H,ρ] + Σ D[Cₖ]ρ` with `D[C]ρ = CρC† − ½{C†C, ρ}`.
pub fn build_liouvillian(p: &FourLevelParams, field_on: bool) -> Liouvillian {
    let id = Mat4::identity();
    let h = hamiltonian(p, field_on);
    let mut l = (id.kronecker(&h) - h.transpose().kronecker(&id)).map(|z| z * C64::new(0.0, -1.0));
    for c in collapse_operators(p) {
        if c.weight != 0.0 {
            l += dissipator(&c.matrix());
        }
    }
    if p.gamma_spin > 0.0 {
        for (from, to) in [(1, 2), (2, 1)] {
            let c = CollapseOp {
                from,
                to,
                weight: p.gamma_spin.sqrt(),
            };
            l += dissipator(&c.matrix());
        }
    }
    Liouvillian(l)
}

/// 4×4 density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix4(pub Mat4);

impl DensityMatrix4 {
    pub fn diagonal(pops: [f64; 4]) -> Self {
        let mut m = Mat4::zeros();
        for (i, p) in pops.iter().enumerate() {
            m[(i, i)] = C64::new(*p, 0.0);
        }
        Self(m)
    }

    pub fn maximally_mixed() -> Self {
        Self::diagonal([0.25; 4])
    }

    /// Projector onto a basis level (1-based).
    pub fn basis(level: usize) -> Self {
        let mut pops = [0.0; 4];
        pops[level - 1] = 1.0;
        Self::diagonal(pops)
    }

    pub fn populations(&self) -> [f64; 4] {
        [
            self.0[(0, 0)].re,
            self.0[(1, 1)].re,
            self.0[(2, 2)].re,
            self.0[(3, 3)].re,
        ]
    }

    /// Element ρ_ij with 1-based indices.
    pub fn element(&self, i: usize, j: usize) -> C64 {
        self.0[(i - 1, j - 1)]
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// `ρ₁₁ − ρ₃₃`, the population difference of the driven transition.
    pub fn population_difference(&self) -> f64 {
        self.0[(0, 0)].re - self.0[(2, 2)].re
    }

    pub fn hermiticity_error(&self) -> f64 {
        (self.0 - self.0.adjoint())
            .iter()
            .fold(0.0_f64, |a, z| a.max(z.norm()))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let (ev, _) = crate::acceptor::hermitian_eigen(&self.0);
        ev[0]
    }

    /// Checks Hermiticity, unit trace and positivity at the given tolerance.
    pub fn validate(&self, tol: f64) -> Result<(), LindbladError> {
        if self.hermiticity_error() > tol {
            return Err(LindbladError::InvalidState("not Hermitian"));
        }
        if (self.trace() - C64::new(1.0, 0.0)).norm() > tol {
            return Err(LindbladError::InvalidState("trace differs from one"));
        }
        if self.min_eigenvalue() < -tol {
            return Err(LindbladError::InvalidState("negative eigenvalue"));
        }
        Ok(())
    }

    pub fn max_population_diff(&self, other: &Self) -> f64 {
        let (a, b) = (self.populations(), other.populations());
        (0..4).map(|k| (a[k] - b[k]).abs()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.0 - other.0)
            .iter()
            .fold(0.0_f64, |a, z| a.max(z.norm()))
    }
}

/// Thermal population difference `(ρ₁₁ − ρ₃₃)₀ = 1/(4n̄+2)` without drive.
pub fn thermal_population_difference(nbar: f64) -> f64 {
    1.0 / (4.0 * nbar + 2.0)
}

fn normalize_state(v: &SuperVec) -> Result<DensityMatrix4, LindbladError> {
    let m = unvec(v);
    let tr = m.trace();
    if tr.norm() < 1e-300 {
        return Err(LindbladError::InvalidState(
            "stationary vector has zero trace",
        ));
    }
    let m = m.map(|z| z / tr);
    Ok(DensityMatrix4((m + m.adjoint()).map(|z| z * 0.5)))
}

struct Kernel {
    right: Vec<SuperVec>,
    smallest: f64,
}

fn kernel(m: &Super) -> Kernel {
    let svd = SVD::new(*m, false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let sigma_max = svd.singular_values.max();
    let mut idx: Vec<usize> = (0..16).collect();
    idx.sort_by(|&a, &b| {
        svd.singular_values[a]
            .partial_cmp(&svd.singular_values[b])
            .unwrap()
    });
    let smallest = svd.singular_values[idx[0]];
    let right = idx
        .iter()
        .filter(|&&k| svd.singular_values[k] <= NULL_SPACE_TOLERANCE * sigma_max)
        .map(|&k| v_t.row(k).adjoint())
        .collect();
    Kernel {
        right,
        smallest: if sigma_max > 0.0 {
            smallest / sigma_max
        } else {
            0.0
        },
    }
}

/// Unique stationary state from the one-dimensional kernel of `L`.
pub fn steady_state_numeric(l: &Liouvillian) -> Result<DensityMatrix4, LindbladError> {
    let k = kernel(&l.0);
    match k.right.len() {
        0 => Err(LindbladError::NoSteadyState {
            smallest: k.smallest,
        }),
        1 => normalize_state(&k.right[0]),
        dimension => Err(LindbladError::DegenerateSteadyState { dimension }),
    }
}

/// Long-time limit `lim_{t→∞} exp(Lt)[ρ₀]`, computed as the spectral
/// projection of `ρ₀` onto the kernel of `L` along its range. Agrees with
/// [`steady_state_numeric`] when the stationary state is unique and resolves
/// degenerate cases by the initial condition.
pub fn stationary_projection(
    l: &Liouvillian,
    rho0: &DensityMatrix4,
) -> Result<DensityMatrix4, LindbladError> {
    let right = kernel(&l.0).right;
    let left = kernel(&l.0.adjoint()).right;
    if right.is_empty() || right.len() != left.len() {
        return Err(LindbladError::NoSteadyState { smallest: 0.0 });
    }
    let d = right.len();
    let r = DMatrix::from_fn(16, d, |i, j| right[j][i]);
    let lf = DMatrix::from_fn(16, d, |i, j| left[j][i]);
    let gram = lf.adjoint() * &r;
    let inv = gram
        .try_inverse()
        .ok_or(LindbladError::DegenerateSteadyState { dimension: d })?;
    let x0 = DMatrix::from_iterator(16, 1, vec(&rho0.0).iter().copied());
    let proj = r * (inv * (lf.adjoint() * x0));
    normalize_state(&SuperVec::from_iterator(proj.iter().copied()))
}

/// Zero-field closed-form populations
/// `ρ₁₁ = ρ₂₂ = ½[(1+n̄)Γ + R] / [(1+2n̄)Γ + 2R]`,
/// `ρ₃₃ = ρ₄₄ = ½[n̄Γ + R] / [(1+2n̄)Γ + 2R]`, with `Γ = γ′+γ̃`.
pub fn steady_state_analytic_zero_field(p: &FourLevelParams) -> DensityMatrix4 {
    let g = p.total_rate();
    let n = p.nbar;
    let r = p.pumping_rate();
    let den = (1.0 + 2.0 * n) * g + 2.0 * r;
    let ground = 0.5 * ((1.0 + n) * g + r) / den;
    let excited = 0.5 * (n * g + r) / den;
    DensityMatrix4::diagonal([ground, ground, excited, excited])
}

/// Closed-form in-field populations under the secular approximation (the
/// `|2⟩↔|4⟩` transition is far detuned and its coherences are dropped).
///
/// A warning is returned alongside the state when `|Δ−δ| < 10|Ω|`.
pub fn steady_state_analytic_field(
    p: &FourLevelParams,
) -> (DensityMatrix4, Option<LindbladWarning>) {
    let detuning = (p.delta_big - p.delta_small).abs();
    let omega = p.omega.norm();
    let warning = (detuning < SECULAR_RATIO_THRESHOLD * omega)
        .then_some(LindbladWarning::ApproximationInvalid { detuning, omega });
    let r = p.pumping_rate();
    if r == 0.0 {
        return (steady_state_analytic_zero_field(p), warning);
    }
    let (n, gp, gt) = (p.nbar, p.gamma_prime, p.gamma_tilde);
    let g = gp + gt;
    let x = n * (1.0 + n);
    let den = r * (1.0 + 8.0 * x) * gp
        + r * (1.0 + 2.0 * n) * (1.0 + 2.0 * n) * gt
        + 4.0 * x * (1.0 + 2.0 * n) * gp * g;
    let rho11 = x * (2.0 * (1.0 + n) * gp * g + r * (2.0 * gp + gt)) / den;
    let rho22 = (1.0 + n) * (2.0 * x * gp * g + r * (gp + 2.0 * n * gp + gt + n * gt)) / den;
    let rho33 = x * (2.0 * n * gp * g + r * (2.0 * gp + gt)) / den;
    let rho44 = n * (2.0 * x * gp * g + r * (gp + 2.0 * n * gp + n * gt)) / den;
    (
        DensityMatrix4::diagonal([rho11, rho22, rho33, rho44]),
        warning,
    )
}

/// `|Ω_c(B=0)|` from `|Ω_c|² = (Γ²/8)(2n̄+1)²(√2−1)`.
pub fn critical_rabi_zero_field(p: &FourLevelParams) -> f64 {
    let g = p.total_rate();
    let s = 2.0 * p.nbar + 1.0;
    (g * g / 8.0 * s * s * (SQRT_2 - 1.0)).sqrt()
}

/// `|Ω_c(B>0)|` from the secular closed form
/// `|Ω_c|² = x(1+2n̄)²γ′Γ²(√2−1) / [γ′(1+8x) + γ̃(1+4x)]`, `x = n̄(1+n̄)`.
pub fn critical_rabi_field(p: &FourLevelParams) -> Result<f64, LindbladError> {
    if p.nbar == 0.0 {
        return Err(LindbladError::ZeroTemperatureSaturation);
    }
    if !(p.nbar > 0.0) {
        return Err(LindbladError::InvalidParameter {
            name: "nbar",
            value: p.nbar,
        });
    }
    let (n, gp, gt) = (p.nbar, p.gamma_prime, p.gamma_tilde);
    let g = gp + gt;
    let x = n * (1.0 + n);
    let s = 1.0 + 2.0 * n;
    let num = x * s * s * gp * g * g * (SQRT_2 - 1.0);
    let den = gp * (1.0 + 8.0 * x) + gt * (1.0 + 4.0 * x);
    Ok((num / den).sqrt())
}

/// Ratio of critical drive powers without and with a field,
/// `1 + 1/(8x) + b/(8x) + b/2` with `x = n̄(n̄+1)` and `b = γ̃/γ′`.
pub fn saturation_ratio(nbar: f64, branching: f64) -> Result<f64, LindbladError> {
    if !(nbar > 0.0 && nbar.is_finite()) {
        return Err(LindbladError::InvalidParameter {
            name: "nbar",
            value: nbar,
        });
    }
    if !(branching >= 0.0 && branching.is_finite()) {
        return Err(LindbladError::InvalidParameter {
            name: "branching",
            value: branching,
        });
    }
    let x8 = 8.0 * nbar * (nbar + 1.0);
    Ok(1.0 + 1.0 / x8 + branching / x8 + branching / 2.0)
}

/// Bose–Einstein occupancy at frequency `f_hz` and temperature `t_kelvin`.
pub fn nbar_from_temperature(f_hz: f64, t_kelvin: f64) -> f64 {
    1.0 / (PLANCK * f_hz / (BOLTZMANN * t_kelvin)).exp_m1()
}

/// Inverse of [`nbar_from_temperature`].
pub fn temperature_from_nbar(f_hz: f64, nbar: f64) -> f64 {
    PLANCK * f_hz / (BOLTZMANN * (1.0 / nbar).ln_1p())
}

/// `ρ(t) = exp(Lt)[ρ₀]`.
pub fn evolve(
    l: &Liouvillian,
    rho0: &DensityMatrix4,
    t: f64,
) -> Result<DensityMatrix4, LindbladError> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(LindbladError::StepFailure { t });
    }
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    let prop = expm(&l.0.map(|z| z * t));
    let out = unvec(&(prop * vec(&rho0.0)));
    if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(LindbladError::StepFailure { t });
    }
    Ok(DensityMatrix4(out))
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
/// The argument is scaled to 1-norm ≤ ½, where 20 terms are exact to
/// double precision.
fn expm(a: &Super) -> Super {
    let norm1 = (0..16)
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm1 * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let a = a.map(|z| z * scale);
    let mut result = Super::identity();
    let mut term = Super::identity();
    for k in 1..=20 {
        term = (term * a).map(|z| z / k as f64);
        result += term;
    }
    for _ in 0..squarings {
        result = result * result;
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upward_channels_vanish_at_zero_temperature() {
        let p = FourLevelParams {
            nbar: 0.0,
            ..Default::default()
        };
        let c = collapse_operators(&p);
        for k in [0, 2, 4, 6] {
            assert_eq!(c[k].weight, 0.0);
        }
        assert!(c[1].weight > 0.0);
    }

    #[test]
    fn only_direct_channels_without_branching() {
        let p = FourLevelParams {
            nbar: 0.3,
            gamma_tilde: 0.0,
            ..Default::default()
        };
        let c = collapse_operators(&p);
        for op in c.iter().filter(|op| op.weight != 0.0) {
            let pair = (op.from.min(op.to), op.from.max(op.to));
            assert!(pair == (1, 3) || pair == (2, 4), "{pair:?}");
        }
    }

    #[test]
    fn emission_weight() {
        let p = FourLevelParams {
            nbar: 1.0,
            gamma_prime: 1.0,
            ..Default::default()
        };
        assert!((collapse_operators(&p)[1].weight - SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn dark_ground_state_is_stationary() {
        let p = FourLevelParams {
            nbar: 0.0,
            gamma_tilde: 0.7,
            ..Default::default()
        };
        let l = build_liouvillian(&p, false);
        let out = l.apply(&DensityMatrix4::diagonal([0.5, 0.5, 0.0, 0.0]).0);
        assert!(out.iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn degenerate_kernel_is_reported() {
        let p = FourLevelParams {
            nbar: 0.0,
            ..Default::default()
        };
        let err = steady_state_numeric(&build_liouvillian(&p, false)).unwrap_err();
        assert!(matches!(err, LindbladError::DegenerateSteadyState { .. }));
    }

    #[test]
    fn projection_resolves_dark_case_from_mixed_state() {
        let p = FourLevelParams {
            nbar: 0.0,
            gamma_tilde: 0.4,
            ..Default::default()
        };
        let rho = stationary_projection(
            &build_liouvillian(&p, false),
            &DensityMatrix4::maximally_mixed(),
        )
        .unwrap();
        let want = DensityMatrix4::diagonal([0.5, 0.5, 0.0, 0.0]);
        assert!(rho.max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn saturation_ratio_rejects_bad_inputs() {
        assert!(saturation_ratio(0.0, 1.0).is_err());
        assert!(saturation_ratio(-1.0, 1.0).is_err());
        assert!(saturation_ratio(0.1, -0.5).is_err());
    }

    #[test]
    fn field_critical_rabi_rejects_zero_temperature() {
        let p = FourLevelParams {
            nbar: 0.0,
            ..Default::default()
        };
        assert_eq!(
            critical_rabi_field(&p),
            Err(LindbladError::ZeroTemperatureSaturation)
        );
    }

    #[test]
    fn secular_warning_threshold() {
        let mut p = FourLevelParams {
            nbar: 0.1,
            ..Default::default()
        }
        .with_omega(1.0);
        p.delta_big = 5.0;
        assert!(steady_state_analytic_field(&p).1.is_some());
        p.delta_big = 50.0;
        assert!(steady_state_analytic_field(&p).1.is_none());
    }

    #[test]
    fn evolve_at_zero_time_is_identity() {
        let p = FourLevelParams {
            nbar: 0.2,
            ..Default::default()
        }
        .with_omega(0.5);
        let rho0 = DensityMatrix4::basis(3);
        assert_eq!(
            evolve(&build_liouvillian(&p, false), &rho0, 0.0).unwrap(),
            rho0
        );
    }
}
