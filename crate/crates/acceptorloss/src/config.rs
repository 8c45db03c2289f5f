//! Run configuration. TOML, unknown keys rejected, units in key names.

use std::fs;
use std::path::{Path, PathBuf};

use acceptorloss_core::acceptor::{AcceptorParams, FieldVector, StrainTensor};
use acceptorloss_core::constants::{dbm_to_watts, SILICON_EPSILON_R};
use acceptorloss_core::spectrum::{BinSpec, DopantSpec, DEFAULT_LINEWIDTH_HZ};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_ATTENUATION_DB: f64 = 85.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acceptor: Option<AcceptorSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strain: Option<StrainSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lindblad: Option<LindbladSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dopant: Option<DopantSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<LossSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<BinsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resonator: Option<ResonatorSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saturation: Option<SaturationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doping: Option<DopingSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic_map: Option<SyntheticMapSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub files: Option<FilesSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            acceptor: None,
            strain: None,
            lindblad: None,
            dopant: None,
            loss: None,
            bins: None,
            resonator: None,
            saturation: None,
            doping: None,
            synthetic_map: None,
            files: None,
            sweep: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceptorSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dipole_debye: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_b_ev: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_b_prime_ev: Option<f64>,
}

/// Strain tensor components (dimensionless).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrainSection {
    #[serde(default)]
    pub xx: f64,
    #[serde(default)]
    pub yy: f64,
    #[serde(default)]
    pub zz: f64,
    #[serde(default)]
    pub xy: f64,
    #[serde(default)]
    pub yz: f64,
    #[serde(default)]
    pub zx: f64,
}

/// Four-level model. Rates in s⁻¹, energies in rad/s.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LindbladSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_prime_per_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_tilde_per_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_spin_per_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nbar: Option<f64>,
    /// Bath temperature; needs `transition_ghz`, excludes `nbar`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature_k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition_ghz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_rad_per_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_phase_rad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_big_rad_per_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_small_rad_per_s: Option<f64>,
    /// Magnetic field; the level splittings follow from the acceptor model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_gauss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_direction: Option<[f64; 3]>,
    /// Rabi frequency per √photon, used when a resonator power is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rabi_per_sqrt_photon_rad_per_s: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DopantSection {
    pub concentration_cm3: f64,
    /// Dipole including orientation averaging; defaults to 0.26 D·√(1/3).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dipole_debye: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_r: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_per_ghz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_ghz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linewidth_mhz: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_ghz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_ghz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width_ghz: Option<f64>,
}

/// Powers are at the source; `attenuation_db` brings them to the device.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonatorSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f0_ghz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qe: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pin_dbm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pin_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attenuation_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature_k: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaturationSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tan_delta0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_c_photons: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DopingSection {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub predict_cm3: Vec<f64>,
}

/// Generated edge-strain map, used when no strain map file is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticMapSection {
    pub cells_x: usize,
    pub cells_y: usize,
    pub peak_strain: f64,
    pub total_participation: f64,
}

impl Default for SyntheticMapSection {
    fn default() -> Self {
        Self {
            cells_x: 80,
            cells_y: 40,
            peak_strain: 2e-5,
            total_participation: 0.92,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilesSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s21_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strain_map: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doping_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saturation_zero_field_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saturation_field_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub command: String,
    #[serde(default)]
    pub axes: Vec<AxisSpec>,
}

/// One sweep axis over a dotted config key. Exactly one of `values`,
/// `linspace` or `logspace` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub key: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linspace: Option<RangeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logspace: Option<RangeSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub start: f64,
    pub stop: f64,
    pub num: usize,
}

/// A config still in tree form, so flags and sweep points can patch it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfigTree {
    table: toml::Table,
    base_dir: Option<PathBuf>,
}

impl ConfigTree {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let table = text
            .parse::<toml::Table>()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Self {
            table,
            base_dir: None,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut tree = Self::parse(&text)?;
        tree.base_dir = path.parent().map(Path::to_path_buf);
        Ok(tree)
    }

    /// Sets a dotted key, creating intermediate tables.
    pub fn set(&mut self, key: &str, value: toml::Value) -> Result<(), CliError> {
        let parts: Vec<&str> = key.split('.').collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(CliError::Config(format!("bad key `{key}`")));
        }
        let (last, parents) = parts.split_last().expect("non-empty");
        let mut table = &mut self.table;
        for p in parents {
            let entry = table
                .entry(p.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            table = entry
                .as_table_mut()
                .ok_or_else(|| CliError::Config(format!("`{p}` in `{key}` is not a table")))?;
        }
        table.insert(last.to_string(), value);
        Ok(())
    }

    /// Applies a `key=value` override; the value is read as TOML, falling
    /// back to a plain string.
    pub fn set_override(&mut self, assignment: &str) -> Result<(), CliError> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not key=value")))?;
        let raw = raw.trim();
        let value = format!("v = {raw}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        self.set(key.trim(), value)
    }

    pub fn ensure_schema_version(&mut self) {
        self.table
            .entry("schema_version")
            .or_insert(toml::Value::Integer(SCHEMA_VERSION as i64));
    }

    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg: RunConfig = self
            .table
            .clone()
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        if let (Some(dir), Some(files)) = (&self.base_dir, cfg.files.as_mut()) {
            for p in [
                &mut files.s21_csv,
                &mut files.strain_map,
                &mut files.doping_csv,
                &mut files.saturation_zero_field_csv,
                &mut files.saturation_field_csv,
            ]
            .into_iter()
            .flatten()
            {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical form, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn acceptor_params(&self) -> AcceptorParams {
        let d = AcceptorParams::default();
        let Some(a) = &self.acceptor else { return d };
        AcceptorParams {
            g1: a.g1.unwrap_or(d.g1),
            g2: a.g2.unwrap_or(d.g2),
            dipole_debye: a.dipole_debye.unwrap_or(d.dipole_debye),
            gamma_b_ev: a.gamma_b_ev.unwrap_or(d.gamma_b_ev),
            gamma_b_prime_ev: a.gamma_b_prime_ev.unwrap_or(d.gamma_b_prime_ev),
        }
    }

    pub fn strain_tensor(&self) -> StrainTensor {
        self.strain
            .as_ref()
            .map_or_else(StrainTensor::default, |s| StrainTensor {
                xx: s.xx,
                yy: s.yy,
                zz: s.zz,
                xy: s.xy,
                yz: s.yz,
                zx: s.zx,
            })
    }

    pub fn dopant(&self) -> Result<DopantSpec, CliError> {
        let d = self
            .dopant
            .as_ref()
            .ok_or_else(|| missing("dopant.concentration_cm3"))?;
        let spec = DopantSpec {
            concentration_cm3: d.concentration_cm3,
            dipole_debye: d.dipole_debye.unwrap_or(0.26 / 3f64.sqrt()),
            epsilon_r: d.epsilon_r.unwrap_or(SILICON_EPSILON_R),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn bins(&self) -> Result<BinSpec, CliError> {
        let b = self.bins.clone().unwrap_or_default();
        Ok(BinSpec::uniform(
            b.start_ghz.unwrap_or(0.0) * 1e9,
            b.stop_ghz.unwrap_or(150.0) * 1e9,
            b.width_ghz.unwrap_or(0.5) * 1e9,
        )?)
    }

    pub fn loss_frequency_hz(&self) -> f64 {
        self.loss.as_ref().and_then(|l| l.f_ghz).unwrap_or(6.0) * 1e9
    }

    pub fn linewidth_hz(&self) -> f64 {
        self.loss
            .as_ref()
            .and_then(|l| l.linewidth_mhz)
            .map_or(DEFAULT_LINEWIDTH_HZ, |m| m * 1e6)
    }

    pub fn attenuation_db(&self) -> f64 {
        self.resonator
            .as_ref()
            .and_then(|r| r.attenuation_db)
            .unwrap_or(DEFAULT_ATTENUATION_DB)
    }

    /// Source power in watts, if either power key is set.
    pub fn source_power_w(&self) -> Result<Option<f64>, CliError> {
        let Some(r) = &self.resonator else {
            return Ok(None);
        };
        match (r.pin_dbm, r.pin_w) {
            (Some(_), Some(_)) => Err(CliError::Config(
                "set only one of resonator.pin_dbm and resonator.pin_w".into(),
            )),
            (Some(dbm), None) => Ok(Some(dbm_to_watts(dbm))),
            (None, Some(w)) if w >= 0.0 => Ok(Some(w)),
            (None, Some(w)) => Err(CliError::Validation(format!(
                "resonator.pin_w = {w} is negative"
            ))),
            (None, None) => Ok(None),
        }
    }

    /// Power at the device after the attenuation chain.
    pub fn device_power_w(&self) -> Result<Option<f64>, CliError> {
        Ok(self
            .source_power_w()?
            .map(|p| p * 10f64.powf(-self.attenuation_db() / 10.0)))
    }

    pub fn field_vector_tesla(&self) -> Result<Option<FieldVector>, CliError> {
        let Some(l) = &self.lindblad else {
            return Ok(None);
        };
        let Some(gauss) = l.field_gauss else {
            return Ok(None);
        };
        let [x, y, z] = l.field_direction.unwrap_or([1.0, 0.0, 0.0]);
        let norm = (x * x + y * y + z * z).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(CliError::Validation(
                "lindblad.field_direction must be a non-zero vector".into(),
            ));
        }
        let b = gauss * 1e-4 / norm;
        Ok(Some(FieldVector::new(x * b, y * b, z * b)))
    }
}

pub fn missing(key: &str) -> CliError {
    CliError::Config(format!("missing `{key}`"))
}
