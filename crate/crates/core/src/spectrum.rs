//! Participation-weighted acceptor loss spectrum.
//!
//! A strain map assigns every cell of a device cross-section a participation
//! weight `p(r)ΔV` and a strain tensor. Each cell's acceptors share a single
//! orbital splitting, so histogramming the weights over splitting frequency
//! gives the weighted participation density `P(f₀)` (per Hz). Combined with
//! the acceptor susceptibility this yields the low-power loss tangent.
//!
//! Unit conventions: dipoles in debye, concentrations in cm⁻³, frequencies in
//! Hz, `P` in Hz⁻¹. Everything is converted to SI before use.

use alloc::vec::Vec;
use core::f64::consts::PI;

use thiserror::Error;

use crate::acceptor::{level_structure, AcceptorParams, FieldVector, StrainTensor};
use crate::constants::{
    debye_to_coulomb_meter, per_cm3_to_per_m3, HBAR, SILICON_EPSILON_R, VACUUM_PERMITTIVITY,
};

/// Homogeneous linewidth used when none is given (FWHM, Hz). Only affects
/// [`loss_tangent_full`].
pub const DEFAULT_LINEWIDTH_HZ: f64 = 1e6;
pub const DEFAULT_BIN_WIDTH_HZ: f64 = 0.5e9;
pub const DEFAULT_MAX_SPLITTING_HZ: f64 = 150e9;
/// Allowed mismatch between the stated total participation and the weights.
pub const PARTICIPATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectrumError {
    #[error("cell {index}: negative participation weight {weight}")]
    NegativeWeight { index: usize, weight: f64 },
    #[error("cell {index}: non-finite strain or weight")]
    InvalidCell { index: usize },
    #[error("weights sum to {sum} but total participation is {total}")]
    ParticipationMismatch { sum: f64, total: f64 },
    #[error("total participation {0} exceeds one")]
    ParticipationAboveOne(f64),
    #[error("bin edges must be finite, strictly ascending and at least two")]
    InvalidBins,
    #[error("invalid dopant parameter {name} = {value}")]
    InvalidDopant { name: &'static str, value: f64 },
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("degenerate fit: {0}")]
    DegenerateFit(&'static str),
}

/// One cell of a strain map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrainCell {
    /// Cross-section position, µm.
    pub position_um: [f64; 2],
    /// Participation weight `p(r)ΔV` (dimensionless).
    pub weight: f64,
    pub strain: StrainTensor,
}

/// Strain map with per-cell participation weights.
#[derive(Debug, Clone, PartialEq)]
pub struct StrainField {
    cells: Vec<StrainCell>,
    total_bulk_participation: f64,
}

impl StrainField {
    /// Validates the cells. When `total` is `None` the weight sum is used.
    pub fn new(cells: Vec<StrainCell>, total: Option<f64>) -> Result<Self, SpectrumError> {
        for (index, c) in cells.iter().enumerate() {
            if !c.weight.is_finite() || !c.strain.is_finite() {
                return Err(SpectrumError::InvalidCell { index });
            }
            if c.weight < 0.0 {
                return Err(SpectrumError::NegativeWeight {
                    index,
                    weight: c.weight,
                });
            }
        }
        let sum: f64 = cells.iter().map(|c| c.weight).sum();
        let total = total.unwrap_or(sum);
        if (sum - total).abs() > PARTICIPATION_TOLERANCE {
            return Err(SpectrumError::ParticipationMismatch { sum, total });
        }
        if total > 1.0 + PARTICIPATION_TOLERANCE {
            return Err(SpectrumError::ParticipationAboveOne(total));
        }
        Ok(Self {
            cells,
            total_bulk_participation: total,
        })
    }

    pub fn cells(&self) -> &[StrainCell] {
        &self.cells
    }

    pub fn total_bulk_participation(&self) -> f64 {
        self.total_bulk_participation
    }

    /// Synthetic half cross-section below a metal edge; not measured or
    /// simulated data.
    ///
    /// Cells cover `x ∈ [0, 200] µm`, `y ∈ [0, 100] µm` (depth) with the film
    /// edge at `x = 25 µm` on the surface. The strain magnitude decays as
    /// `peak · exp(−r/10 µm)` from the edge and the weights fall off with
    /// depth and lateral distance; they are normalized to `total`.
    pub fn synthetic_edge_profile(nx: usize, ny: usize, peak_strain: f64, total: f64) -> Self {
        let (lx, ly, edge, decay) = (200.0, 100.0, 25.0, 10.0);
        let mut cells = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                let x = (ix as f64 + 0.5) * lx / nx as f64;
                let y = (iy as f64 + 0.5) * ly / ny as f64;
                let (dx, dy) = (x - edge, y);
                let r = dx.hypot(dy);
                let s = peak_strain * (-r / decay).exp();
                let theta = dy.atan2(dx);
                let strain = StrainTensor {
                    xx: -0.4 * s * theta.cos(),
                    yy: 0.1 * s,
                    zz: s * (0.8 + 0.2 * theta.sin()),
                    xy: 0.0,
                    yz: 0.0,
                    zx: 0.3 * s * (2.0 * theta).sin(),
                };
                let weight = (-y / 40.0).exp() * (-(x - edge).abs() / 80.0).exp();
                cells.push(StrainCell {
                    position_um: [x, y],
                    weight,
                    strain,
                });
            }
        }
        let sum: f64 = cells.iter().map(|c| c.weight).sum();
        for c in &mut cells {
            c.weight *= total / sum;
        }
        Self {
            cells,
            total_bulk_participation: total,
        }
    }
}

/// A cell reduced to its participation weight and orbital splitting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappedCell {
    pub weight: f64,
    pub splitting_hz: f64,
}

/// Orbital splitting of every cell at zero electric and magnetic field.
pub fn splitting_map(
    field: &StrainField,
    params: &AcceptorParams,
) -> Result<Vec<MappedCell>, SpectrumError> {
    map_cells(&field.cells, params, 0)
}

/// [`splitting_map`] over a slice of cells; reported indices start at
/// `first_index`.
pub fn map_cells(
    cells: &[StrainCell],
    params: &AcceptorParams,
    first_index: usize,
) -> Result<Vec<MappedCell>, SpectrumError> {
    cells
        .iter()
        .enumerate()
        .map(|(k, c)| {
            if !c.strain.is_finite() || !c.weight.is_finite() {
                return Err(SpectrumError::InvalidCell {
                    index: first_index + k,
                });
            }
            let ls = level_structure(params, &c.strain, &FieldVector::ZERO, &FieldVector::ZERO);
            Ok(MappedCell {
                weight: c.weight,
                splitting_hz: ls.orbital_splitting_hz,
            })
        })
        .collect()
}

/// Histogram bin edges in Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct BinSpec {
    edges: Vec<f64>,
}

impl BinSpec {
    pub fn from_edges(edges: Vec<f64>) -> Result<Self, SpectrumError> {
        let ok = edges.len() >= 2
            && edges.iter().all(|e| e.is_finite())
            && edges.windows(2).all(|w| w[1] > w[0]);
        if ok {
            Ok(Self { edges })
        } else {
            Err(SpectrumError::InvalidBins)
        }
    }

    /// Uniform bins of `width` from `start` up to at least `stop`.
    pub fn uniform(start: f64, stop: f64, width: f64) -> Result<Self, SpectrumError> {
        if !(width > 0.0 && stop > start) {
            return Err(SpectrumError::InvalidBins);
        }
        let n = ((stop - start) / width - 1e-9).ceil().max(1.0) as usize;
        Self::from_edges((0..=n).map(|k| start + k as f64 * width).collect())
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }
}

impl Default for BinSpec {
    fn default() -> Self {
        Self::uniform(0.0, DEFAULT_MAX_SPLITTING_HZ, DEFAULT_BIN_WIDTH_HZ)
            .expect("valid default bins")
    }
}

/// Weighted participation density `P(f₀)` per bin.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSpectrum {
    pub bin_edges_hz: Vec<f64>,
    /// Participation density per bin, 1/Hz.
    pub p_per_hz: Vec<f64>,
    /// Weight of splittings below the first edge.
    pub underflow_weight: f64,
    /// Weight of splittings at or above the last edge.
    pub overflow_weight: f64,
}

impl LossSpectrum {
    pub fn bin_centers(&self) -> impl Iterator<Item = f64> + '_ {
        self.bin_edges_hz.windows(2).map(|w| 0.5 * (w[0] + w[1]))
    }

    pub fn bin_widths(&self) -> impl Iterator<Item = f64> + '_ {
        self.bin_edges_hz.windows(2).map(|w| w[1] - w[0])
    }

    /// `Σ P·Δf` over the binned range.
    pub fn binned_weight(&self) -> f64 {
        self.p_per_hz
            .iter()
            .zip(self.bin_widths())
            .map(|(p, w)| p * w)
            .sum()
    }

    /// Binned weight plus under- and overflow.
    pub fn total_weight(&self) -> f64 {
        self.binned_weight() + self.underflow_weight + self.overflow_weight
    }

    /// Density of the bin containing `f_hz` (zero outside the binned range).
    pub fn density_at(&self, f_hz: f64) -> f64 {
        bin_index(&self.bin_edges_hz, f_hz).map_or(0.0, |k| self.p_per_hz[k])
    }
}

fn bin_index(edges: &[f64], f: f64) -> Option<usize> {
    let last = *edges.last()?;
    if f < edges[0] || f >= last {
        return None;
    }
    // first edge strictly greater than f, minus one
    Some(edges.partition_point(|&e| e <= f) - 1)
}

/// Histogram of participation weights over splitting frequency, normalized
/// per Hz. Each cell is a Dirac delta at its splitting.
pub fn weighted_participation(mapped: &[MappedCell], bins: &BinSpec) -> LossSpectrum {
    let edges = bins.edges();
    let mut sums = alloc::vec![0.0; edges.len() - 1];
    let (mut under, mut over) = (0.0, 0.0);
    for c in mapped {
        match bin_index(edges, c.splitting_hz) {
            Some(k) => sums[k] += c.weight,
            None if c.splitting_hz < edges[0] => under += c.weight,
            None => over += c.weight,
        }
    }
    let p_per_hz = sums
        .iter()
        .zip(edges.windows(2))
        .map(|(s, w)| s / (w[1] - w[0]))
        .collect();
    LossSpectrum {
        bin_edges_hz: edges.to_vec(),
        p_per_hz,
        underflow_weight: under,
        overflow_weight: over,
    }
}

/// Dopant ensemble. `dipole_debye` already includes any orientation
/// averaging factor (e.g. `√(1/3)` for random alignment).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopantSpec {
    pub concentration_cm3: f64,
    pub dipole_debye: f64,
    pub epsilon_r: f64,
}

impl DopantSpec {
    pub fn new(concentration_cm3: f64, dipole_debye: f64) -> Self {
        Self {
            concentration_cm3,
            dipole_debye,
            epsilon_r: SILICON_EPSILON_R,
        }
    }

    pub fn validate(&self) -> Result<(), SpectrumError> {
        if !(self.concentration_cm3 >= 0.0 && self.concentration_cm3.is_finite()) {
            return Err(SpectrumError::InvalidDopant {
                name: "concentration",
                value: self.concentration_cm3,
            });
        }
        if !self.dipole_debye.is_finite() {
            return Err(SpectrumError::InvalidDopant {
                name: "dipole",
                value: self.dipole_debye,
            });
        }
        if !(self.epsilon_r > 1.0) {
            return Err(SpectrumError::InvalidDopant {
                name: "epsilon_r",
                value: self.epsilon_r,
            });
        }
        Ok(())
    }

    /// `μ²N/(2ε₀ħ)` in s⁻¹: the frequency integral of `χ″`.
    pub fn susceptibility_strength(&self) -> f64 {
        let mu = debye_to_coulomb_meter(self.dipole_debye);
        mu * mu * per_cm3_to_per_m3(self.concentration_cm3) / (2.0 * VACUUM_PERMITTIVITY * HBAR)
    }
}

/// Unit-area Lorentzian in ordinary frequency with full width `fwhm_hz`.
pub fn lorentzian(f_hz: f64, f0_hz: f64, fwhm_hz: f64) -> f64 {
    let hw = 0.5 * fwhm_hz;
    let d = f_hz - f0_hz;
    hw / (PI * (d * d + hw * hw))
}

/// `∫_{lo}^{hi} g(f, f₀) df₀` for the Lorentzian above.
fn lorentzian_mass(f_hz: f64, lo: f64, hi: f64, fwhm_hz: f64) -> f64 {
    let hw = 0.5 * fwhm_hz;
    (((hi - f_hz) / hw).atan() - ((lo - f_hz) / hw).atan()) / PI
}

/// Imaginary susceptibility `χ″(f, f₀) = μ²N g(f, f₀)/(2ε₀ħ)`.
pub fn susceptibility_im(f_hz: f64, f0_hz: f64, linewidth_hz: f64, dopant: &DopantSpec) -> f64 {
    dopant.susceptibility_strength() * lorentzian(f_hz, f0_hz, linewidth_hz)
}

/// Loss tangent for a slowly varying `P`: `μ²PN/(2ε₀ε_rħ)`.
pub fn loss_tangent_narrowband(p_per_hz: f64, dopant: &DopantSpec) -> f64 {
    dopant.susceptibility_strength() * p_per_hz / dopant.epsilon_r
}

/// Loss tangent `∫ P(f₀) χ″(f, f₀) df₀ / ε_r` over a binned spectrum. Each
/// bin is treated as a constant density and the Lorentzian is integrated
/// exactly across it; under/overflow weight has no frequency and is skipped.
pub fn loss_tangent_full(
    spectrum: &LossSpectrum,
    f_hz: f64,
    linewidth_hz: f64,
    dopant: &DopantSpec,
) -> f64 {
    let overlap: f64 = spectrum
        .p_per_hz
        .iter()
        .zip(spectrum.bin_edges_hz.windows(2))
        .filter(|(p, _)| **p != 0.0)
        .map(|(p, w)| p * lorentzian_mass(f_hz, w[0], w[1], linewidth_hz))
        .sum();
    dopant.susceptibility_strength() * overlap / dopant.epsilon_r
}

/// Material-limited quality factor `1/tanδ`.
pub fn quality_factor(tan_delta: f64) -> f64 {
    1.0 / tan_delta
}

/// Fit of `log Q = −log(a·ρ)`: slope fixed to −1 in log-log, intercept free.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopingFit {
    /// Loss per concentration, cm³.
    pub a: f64,
    pub log10_a: f64,
    /// Standard error of `log10_a` (zero for two exact points).
    pub log10_a_std_err: f64,
    pub n_points: usize,
}

impl DopingFit {
    pub fn predicted_q(&self, concentration_cm3: f64) -> f64 {
        1.0 / (self.a * concentration_cm3)
    }
}

/// Least-squares fit over `(concentration_cm3, q)` pairs.
pub fn doping_fit(points: &[(f64, f64)]) -> Result<DopingFit, SpectrumError> {
    if points.len() < 2 {
        return Err(SpectrumError::DegenerateFit("need at least two points"));
    }
    for &(rho, q) in points {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(SpectrumError::NonPositive {
                name: "concentration",
                value: rho,
            });
        }
        if !(q > 0.0 && q.is_finite()) {
            return Err(SpectrumError::NonPositive {
                name: "quality factor",
                value: q,
            });
        }
    }
    if points.iter().all(|p| p.0 == points[0].0) {
        return Err(SpectrumError::DegenerateFit("all concentrations are equal"));
    }
    let n = points.len() as f64;
    let ys: Vec<f64> = points
        .iter()
        .map(|&(rho, q)| -(q.log10() + rho.log10()))
        .collect();
    let mean = ys.iter().sum::<f64>() / n;
    let var = ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / (n - 1.0);
    Ok(DopingFit {
        a: 10f64.powf(mean),
        log10_a: mean,
        log10_a_std_err: (var / n).sqrt(),
        n_points: points.len(),
    })
}

/// Acceptor-to-TLS loss ratio assuming equal dipoles:
/// `(ρ_acc · p_acc) / (ρ_tls · p_tls)` with densities per cm³ per GHz.
pub fn compare_loss_channels(
    tls_density_per_cm3_per_ghz: f64,
    tls_participation: f64,
    acceptor_density_per_cm3_per_ghz: f64,
    acceptor_participation: f64,
) -> Result<f64, SpectrumError> {
    for (name, value) in [
        ("tls density", tls_density_per_cm3_per_ghz),
        ("tls participation", tls_participation),
        ("acceptor density", acceptor_density_per_cm3_per_ghz),
        ("acceptor participation", acceptor_participation),
    ] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(SpectrumError::NonPositive { name, value });
        }
    }
    Ok((acceptor_density_per_cm3_per_ghz * acceptor_participation)
        / (tls_density_per_cm3_per_ghz * tls_participation))
}
