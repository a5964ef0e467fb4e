//! Run configuration, field files and run manifests.
//!
//! A field `name` is stored as `name.f64` (raw little-endian `f64`,
//! component-major) next to `name.json` holding `{torus, rank, components}`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{NlvcError, Result};
use crate::field::{Field, Rank};
use crate::kernel::KernelSpec;
use crate::lattice::{Direction, DomainMask, Torus};
use crate::operators::{Backend, StencilOptions};
use crate::poincare::SEED;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub torus: Torus,
    /// Interior box; the largest centred box is used when absent.
    #[serde(default, rename = "box")]
    pub bounds: Option<BoxSpec>,
}

/// Frequencies for the `symbol` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolSection {
    #[serde(default = "d_rmin")]
    pub rmin: f64,
    #[serde(default = "d_rmax")]
    pub rmax: f64,
    #[serde(default = "d_radii")]
    pub n_radii: usize,
    #[serde(default = "d_dirs")]
    pub n_dirs: usize,
    /// Also estimate the comparison constant on the same grid.
    #[serde(default)]
    pub comparison: bool,
}

fn d_rmin() -> f64 {
    0.01
}
fn d_rmax() -> f64 {
    100.0
}
fn d_radii() -> usize {
    17
}
fn d_dirs() -> usize {
    16
}

impl Default for SymbolSection {
    fn default() -> Self {
        SymbolSection { rmin: d_rmin(), rmax: d_rmax(), n_radii: d_radii(), n_dirs: d_dirs(), comparison: false }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoincareSection {
    /// Grid spacings for a refinement study on the configured box.
    #[serde(default)]
    pub refine: Vec<f64>,
}

/// Source of a vector or scalar field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSource {
    /// Standard normal values on the interior from the run seed.
    Random,
    /// The same value at every interior point, per component.
    Constant { value: Vec<f64> },
    /// `amplitude (sin 2πk x₂, cos 2πk x₁, ...)`, for velocities.
    Oscillating { amplitude: f64, frequency: f64 },
    /// A field file written by this tool.
    File { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CdSection {
    #[serde(default = "one")]
    pub epsilon: f64,
    pub velocity: FieldSource,
    /// Load; with `manufactured` it instead seeds the exact solution.
    #[serde(default = "random_source")]
    pub load: FieldSource,
    #[serde(default)]
    pub manufactured: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElasticitySection {
    pub lambda: f64,
    pub mu: f64,
    #[serde(default = "random_source")]
    pub load: FieldSource,
    #[serde(default)]
    pub manufactured: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HelmholtzSection {
    #[serde(default = "random_source")]
    pub input: FieldSource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalizeSection {
    pub deltas: Vec<f64>,
    /// Points per axis of the unit torus.
    pub n: usize,
}

fn one() -> f64 {
    1.0
}
fn random_source() -> FieldSource {
    FieldSource::Random
}
fn d_seed() -> u64 {
    SEED
}
fn d_tol() -> f64 {
    1e-10
}
fn d_samples() -> usize {
    10
}
fn d_symbol_samples() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kernel: KernelSpec,
    pub domain: DomainSpec,
    /// `ν`; defaults to the first coordinate axis.
    #[serde(default)]
    pub direction: Option<Vec<f64>>,
    #[serde(default)]
    pub stencil: StencilOptions,
    #[serde(default)]
    pub backend: Backend,
    #[serde(default = "d_tol")]
    pub tol: f64,
    #[serde(default = "d_seed")]
    pub seed: u64,
    /// Random fields per verification check.
    #[serde(default = "d_samples")]
    pub samples: usize,
    #[serde(default = "d_symbol_samples")]
    pub symbol_samples: usize,
    #[serde(default)]
    pub symbol: Option<SymbolSection>,
    #[serde(default)]
    pub poincare: Option<PoincareSection>,
    #[serde(default)]
    pub cd: Option<CdSection>,
    #[serde(default)]
    pub elasticity: Option<ElasticitySection>,
    #[serde(default)]
    pub helmholtz: Option<HelmholtzSection>,
    #[serde(default)]
    pub localize: Option<LocalizeSection>,
}

impl RunConfig {
    /// Checks every value that serde cannot.
    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        let t = Torus::new(self.domain.torus.n.clone(), self.domain.torus.h)?;
        if t.dim() != self.kernel.d {
            return Err(NlvcError::Config(format!("kernel is {}-dimensional, torus is {}-dimensional", self.kernel.d, t.dim())));
        }
        self.nu()?;
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(NlvcError::Config(format!("tolerance must be positive, got {}", self.tol)));
        }
        if let Some(b) = &self.domain.bounds {
            if b.lo.len() != t.dim() || b.hi.len() != t.dim() {
                return Err(NlvcError::Config("box corners need one entry per axis".into()));
            }
        }
        if let Some(tr) = self.stencil.trunc_radius {
            if !(tr > 0.0) {
                return Err(NlvcError::Config(format!("trunc_radius must be positive, got {tr}")));
            }
        }
        if let Some(l) = &self.localize {
            if l.deltas.len() < 2 || l.deltas.iter().any(|&x| !(x > 0.0)) {
                return Err(NlvcError::Config("localize needs at least two positive horizons".into()));
            }
        }
        if let Some(e) = &self.cd {
            if !(e.epsilon > 0.0) {
                return Err(NlvcError::Config(format!("diffusivity must be positive, got {}", e.epsilon)));
            }
        }
        Ok(())
    }

    pub fn nu(&self) -> Result<Direction> {
        match &self.direction {
            Some(v) => {
                if v.len() != self.kernel.d {
                    return Err(NlvcError::Config(format!("direction needs {} components", self.kernel.d)));
                }
                Direction::new(v)
            }
            None => Ok(Direction::axis(self.kernel.d, 0, 1.0)),
        }
    }

    pub fn torus(&self) -> &Torus {
        &self.domain.torus
    }

    /// Interior mask for a stencil reach of `radius` cells.
    pub fn mask(&self, radius: usize) -> Result<DomainMask> {
        match &self.domain.bounds {
            Some(b) => DomainMask::build_box(self.torus(), &b.lo, &b.hi, radius),
            None => crate::verify::centred_domain(self.torus(), radius),
        }
    }

    pub fn suite(&self) -> Result<crate::verify::SuiteConfig> {
        Ok(crate::verify::SuiteConfig {
            kernel: self.kernel.clone(),
            torus: self.domain.torus.clone(),
            nu: self.nu()?.as_slice().to_vec(),
            domain: self.domain.bounds.as_ref().map(|b| (b.lo.clone(), b.hi.clone())),
            stencil: self.stencil,
            seed: self.seed,
            samples: self.samples,
            symbol_samples: self.symbol_samples,
            tol: self.tol,
        })
    }
}

/// Record of one run, readable again as a configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: RunConfig,
    #[serde(default)]
    pub outputs: Vec<String>,
}

/// Parses a configuration or a manifest and validates it.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let cfg: RunConfig = if value.get("config").is_some() && value.get("command").is_some() {
        serde_json::from_value::<Manifest>(value)?.config
    } else {
        serde_json::from_value(value)?
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    parse_config(&text)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldHeader {
    pub torus: Torus,
    pub rank: Rank,
    pub components: usize,
}

fn field_paths(path: &Path) -> (PathBuf, PathBuf) {
    let base = if path.extension().is_some_and(|e| e == "f64" || e == "json") { path.with_extension("") } else { path.to_path_buf() };
    let mut payload = base.clone().into_os_string();
    payload.push(".f64");
    let mut header = base.into_os_string();
    header.push(".json");
    (PathBuf::from(payload), PathBuf::from(header))
}

/// Writes `path.f64` and `path.json`; returns both paths.
pub fn write_field(path: &Path, field: &Field) -> Result<(PathBuf, PathBuf)> {
    let (payload, header) = field_paths(path);
    let mut bytes = Vec::with_capacity(field.data.len() * 8);
    for x in &field.data {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    fs::write(&payload, bytes)?;
    let h = FieldHeader { torus: field.torus.clone(), rank: field.rank, components: field.rank.components() };
    fs::write(&header, serde_json::to_string_pretty(&h)?)?;
    Ok((payload, header))
}

/// Reads a field written by [`write_field`]; `path` may name either file or
/// their common stem.
pub fn read_field(path: &Path) -> Result<Field> {
    let (payload, header) = field_paths(path);
    let h: FieldHeader = serde_json::from_str(&fs::read_to_string(&header)?)?;
    let torus = Torus::new(h.torus.n.clone(), h.torus.h)?;
    if h.components != h.rank.components() {
        return Err(NlvcError::Format(format!("header lists {} components but rank {} has {}", h.components, h.rank, h.rank.components())));
    }
    let bytes = fs::read(&payload)?;
    let expected = torus.len() * h.components * 8;
    if bytes.len() != expected {
        return Err(NlvcError::Format(format!("payload has {} bytes, header implies {expected}", bytes.len())));
    }
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    Field::from_data(&torus, h.rank, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "kernel": {"family": "compact_integrable", "d": 2, "delta": 0.25},
        "domain": {"torus": {"n": [24, 24], "h": 0.0625}}
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.seed, 0xA11CE);
        assert_eq!(c.tol, 1e-10);
        assert_eq!(c.backend, Backend::Direct);
        assert_eq!(c.nu().unwrap(), Direction::axis(2, 0, 1.0));
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = MINIMAL.replacen("\"domain\"", "\"colour\": 1, \"domain\"", 1);
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn negative_tolerance_is_rejected() {
        let text = MINIMAL.replacen("\"domain\"", "\"tol\": -1e-8, \"domain\"", 1);
        assert!(matches!(parse_config(&text), Err(NlvcError::Config(_))));
    }

    #[test]
    fn manifest_reads_back_as_config() {
        let c = parse_config(MINIMAL).unwrap();
        let m = Manifest { command: "verify".into(), version: VERSION.into(), seed: c.seed, config: c.clone(), outputs: vec![] };
        let back = parse_config(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
