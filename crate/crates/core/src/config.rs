//! Run configuration: one TOML file, dotted-key overrides, and the mapping onto
//! the library types.
//!
//! ```toml
//! seed = 7
//!
//! [model]
//! mu = 1.0
//! sigma = 0.2
//! tau = 1.0
//! iota = 1.0
//! # trunc_radius defaults to grid.half_length / 4
//! c2 = 1.0
//! k_m_const = 1.0
//! nonlinearity = { kind = "ricker", epsilon = 1.0 }
//! forcing = { kind = "zero" }
//!
//! [grid]
//! dim = 1
//! half_length = 6.283185307179586
//! points = 256
//!
//! [integrator]
//! n_tau = 64
//! t_final = 20.0
//! ```
//!
//! Every table rejects unknown keys. Missing keys take the defaults shown by
//! [`RunConfig::default`].

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{AlphaGrid, BoundOptions};
use crate::error::{Error, Result};
use crate::field::{Field, Grid};
use crate::harness::{
    AbsorbingOptions, ContractionOptions, DimensionOptions, EstimatorOptions, HistoryShape,
    RandomSegmentSpec,
};
use crate::model::{validate, ModelParams, NonlinKind, NonlinSpec};
use crate::spectral::CharEquation;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Base seed; each experiment draws from its own stream family.
    pub seed: u64,
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub integrator: IntegratorConfig,
    pub initial: InitialConfig,
    pub spectral: SpectralConfig,
    pub bounds: BoundsConfig,
    pub verify: VerifyConfig,
    pub dims: DimsConfig,
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub mu: f64,
    pub sigma: f64,
    pub tau: f64,
    pub iota: f64,
    pub trunc_radius: Option<f64>,
    pub c2: f64,
    pub k_m_const: f64,
    pub nonlinearity: NonlinConfig,
    pub forcing: ForcingConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            mu: 1.0,
            sigma: 0.2,
            tau: 1.0,
            iota: 1.0,
            trunc_radius: None,
            c2: 1.0,
            k_m_const: 1.0,
            nonlinearity: NonlinConfig::default(),
            forcing: ForcingConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NonlinConfig {
    pub kind: NonlinKind,
    pub epsilon: f64,
}

impl Default for NonlinConfig {
    fn default() -> Self {
        NonlinConfig {
            kind: NonlinKind::Ricker,
            epsilon: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingKind {
    #[default]
    Zero,
    /// `g ≡ amplitude`
    Constant,
    /// `g(x) = amplitude·exp(−|x|²/(2 width²))`
    Gaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForcingConfig {
    pub kind: ForcingKind,
    pub amplitude: f64,
    pub width: f64,
}

impl Default for ForcingConfig {
    fn default() -> Self {
        ForcingConfig {
            kind: ForcingKind::Zero,
            amplitude: 0.0,
            width: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub dim: usize,
    pub half_length: f64,
    pub points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            dim: 1,
            half_length: 2.0 * std::f64::consts::PI,
            points: 256,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub n_tau: usize,
    pub t_final: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            n_tau: 64,
            t_final: 20.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    /// Band-limited Gaussian noise history.
    #[default]
    Random,
    /// Spatially and temporally constant history `value`.
    Constant,
}

/// Initial history for `simulate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub kind: InitialKind,
    /// `‖φ‖_C` of a random history.
    pub norm: f64,
    pub value: f64,
    pub shape: HistoryShape,
    pub bandwidth: f64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig {
            kind: InitialKind::Random,
            norm: 1.0,
            value: 1.0,
            shape: HistoryShape::Constant,
            bandwidth: 4.0,
        }
    }
}

impl InitialConfig {
    pub fn segment_spec(&self) -> RandomSegmentSpec {
        RandomSegmentSpec {
            shape: self.shape,
            bandwidth: self.bandwidth,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CharEqConfig {
    /// Solve the characteristic equation with the squared eigenvalue as printed.
    pub raw_power2: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralConfig {
    pub m_max: usize,
    /// Cut index `m` for the spectral table.
    pub cut: usize,
    #[serde(rename = "charEq")]
    pub char_eq: CharEqConfig,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            m_max: 16,
            cut: 1,
            char_eq: CharEqConfig::default(),
        }
    }
}

impl SpectralConfig {
    pub fn form(&self) -> CharEquation {
        if self.char_eq.raw_power2 {
            CharEquation::RawPower2
        } else {
            CharEquation::Corrected
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlphaGridConfig {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for AlphaGridConfig {
    fn default() -> Self {
        let g = AlphaGrid::default();
        AlphaGridConfig {
            min: g.min,
            max: g.max,
            points: g.points,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Dotted key varied by the sweep, e.g. `model.sigma`.
    pub param: Option<String>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsConfig {
    /// Fixed `(m, α)` evaluated alongside the optimum; also used by `verify`.
    pub m: usize,
    pub alpha: f64,
    pub t_star: f64,
    pub alpha_grid: AlphaGridConfig,
    pub sweep: SweepConfig,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig {
            m: 2,
            alpha: 0.5,
            t_star: 1.0,
            alpha_grid: AlphaGridConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl BoundsConfig {
    pub fn options(&self, form: CharEquation) -> BoundOptions {
        BoundOptions {
            alpha_grid: AlphaGrid {
                min: self.alpha_grid.min,
                max: self.alpha_grid.max,
                points: self.alpha_grid.points,
            },
            extra_alphas: vec![self.alpha],
            t_star: self.t_star,
            form,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub absorbing: bool,
    pub contraction: bool,
    pub ensemble: usize,
    pub t_final: f64,
    pub max_norm_factor: f64,
    pub overshoot: f64,
    pub gronwall_tolerance: f64,
    pub pairs: usize,
    pub pre_run: f64,
    pub horizon: f64,
    pub pair_norm: f64,
    pub perturbation: f64,
    pub prefactor_limit: f64,
    pub shape: HistoryShape,
    pub bandwidth: f64,
    /// Re-run the absorbing experiment on a box of twice the half length and report the change.
    pub l_doubling: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        let a = AbsorbingOptions::default();
        let c = ContractionOptions::default();
        VerifyConfig {
            absorbing: true,
            contraction: true,
            ensemble: a.ensemble,
            t_final: a.t_final,
            max_norm_factor: a.max_norm_factor,
            overshoot: a.overshoot,
            gronwall_tolerance: a.gronwall_tolerance,
            pairs: c.pairs,
            pre_run: c.pre_run,
            horizon: c.horizon,
            pair_norm: c.init_norm,
            perturbation: c.perturbation,
            prefactor_limit: c.prefactor_limit,
            shape: HistoryShape::Constant,
            bandwidth: 4.0,
            l_doubling: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DimsConfig {
    pub trajectories: usize,
    pub burn_in: f64,
    pub sample_interval: f64,
    pub points_per_trajectory: usize,
    pub embed_k: usize,
    pub init_norm: f64,
    pub resolution: f64,
    pub slope_tolerance: f64,
    pub min_decades: f64,
}

impl Default for DimsConfig {
    fn default() -> Self {
        let d = DimensionOptions::default();
        DimsConfig {
            trajectories: d.trajectories,
            burn_in: d.burn_in,
            sample_interval: d.sample_interval,
            points_per_trajectory: d.points_per_trajectory,
            embed_k: d.embed_k,
            init_norm: d.init_norm,
            resolution: d.estimator.resolution,
            slope_tolerance: d.estimator.slope_tolerance,
            min_decades: d.estimator.min_decades,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: "out".into() }
    }
}

/// Parses a value written on the command line as a TOML value, falling back to a bare string.
fn parse_override_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Applies one `a.b.c=value` override, creating intermediate tables.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
    let key = key.trim();
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("malformed override key `{key}`")));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{key}`: `{part}` is not a table")))?;
    }
    cur.insert(
        parts[parts.len() - 1].to_string(),
        parse_override_value(raw.trim()),
    );
    Ok(())
}

impl RunConfig {
    /// Parses TOML text after applying overrides.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<(RunConfig, toml::Table)> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = table
            .clone()
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Ok((cfg, table))
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::from_toml_str(&text, overrides)?.0)
    }

    /// The fully populated configuration as TOML.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of [`RunConfig::to_toml`].
    pub fn hash(&self) -> Result<String> {
        Ok(sha256_hex(self.to_toml()?.as_bytes()))
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.dim, self.grid.half_length, self.grid.points)
            .map_err(|e| Error::param("grid", e.to_string()))
    }

    pub fn forcing(&self, grid: Grid) -> Field {
        let f = &self.model.forcing;
        match f.kind {
            ForcingKind::Zero => Field::zeros(grid),
            ForcingKind::Constant => Field::constant(grid, f.amplitude),
            ForcingKind::Gaussian => {
                let w2 = 2.0 * f.width * f.width;
                Field::from_fn(grid, |x| {
                    let r2: f64 = x.iter().map(|v| v * v).sum();
                    f.amplitude * (-r2 / w2).exp()
                })
            }
        }
    }

    /// Builds and validates the model.
    pub fn params(&self) -> Result<ModelParams> {
        let grid = self.grid()?;
        let m = &self.model;
        let mut p = ModelParams::new(
            grid,
            m.mu,
            m.sigma,
            m.tau,
            NonlinSpec::new(m.nonlinearity.kind, m.nonlinearity.epsilon),
        );
        p.iota = m.iota;
        p.c2 = m.c2;
        p.k_m_const = m.k_m_const;
        if let Some(k) = m.trunc_radius {
            p.trunc_radius = k;
        }
        if m.forcing.kind == ForcingKind::Gaussian
            && (m.forcing.width.is_nan() || m.forcing.width <= 0.0)
        {
            return Err(Error::param("model.forcing.width", "must be > 0"));
        }
        p.forcing = self.forcing(grid);
        validate(&p)?;
        grid.check_contains_ball(p.trunc_radius)
            .map_err(|e| Error::param("model.trunc_radius", e.to_string()))?;
        if self.integrator.n_tau == 0 {
            return Err(Error::param("integrator.n_tau", "must be >= 1"));
        }
        Ok(p)
    }

    pub fn absorbing_options(&self) -> AbsorbingOptions {
        let v = &self.verify;
        AbsorbingOptions {
            ensemble: v.ensemble,
            t_final: v.t_final,
            max_norm_factor: v.max_norm_factor,
            overshoot: v.overshoot,
            floor: AbsorbingOptions::default().floor,
            gronwall_tolerance: v.gronwall_tolerance,
            seed: self.seed,
            init: RandomSegmentSpec {
                shape: v.shape,
                bandwidth: v.bandwidth,
            },
        }
    }

    pub fn contraction_options(&self) -> ContractionOptions {
        let v = &self.verify;
        ContractionOptions {
            pairs: v.pairs,
            pre_run: v.pre_run,
            horizon: v.horizon,
            init_norm: v.pair_norm,
            perturbation: v.perturbation,
            prefactor_limit: v.prefactor_limit,
            seed: self.seed.wrapping_add(1),
            init: RandomSegmentSpec {
                shape: v.shape,
                bandwidth: v.bandwidth,
            },
        }
    }

    pub fn dimension_options(&self) -> DimensionOptions {
        let d = &self.dims;
        DimensionOptions {
            trajectories: d.trajectories,
            burn_in: d.burn_in,
            sample_interval: d.sample_interval,
            points_per_trajectory: d.points_per_trajectory,
            embed_k: d.embed_k,
            init_norm: d.init_norm,
            seed: self.seed.wrapping_add(2),
            init: RandomSegmentSpec::default(),
            estimator: EstimatorOptions {
                resolution: d.resolution,
                slope_tolerance: d.slope_tolerance,
                min_decades: d.min_decades,
                ..EstimatorOptions::default()
            },
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
