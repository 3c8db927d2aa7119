//! Experiment configuration: one TOML document whose sections mirror the
//! simulation-parameter table (geometry, phantom, source, hyperparameters).

use std::path::Path;

use brt_core::{
    make_pair, rectangle_description, shepp_logan_description, ImageGrid, OperatorOptions,
    PhantomDescription, Realization, ScatterVariant, Shape, SolverConfig, SourceDetectorPair,
    SourceModel, WeightPrecision,
};
use serde::{Deserialize, Serialize};

use crate::benchmark::MAX_BENCHMARK_PAIRS;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub phantom: PhantomConfig,
    #[serde(default)]
    pub scatter: ScatterConfig,
    pub pairs: Vec<PairConfig>,
    #[serde(default)]
    pub source: SourceConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub operator: OperatorConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub reconstruction: ReconstructionConfig,
    #[serde(default)]
    pub baseline: BaselineConfig,
    #[serde(default)]
    pub benchmark: BenchmarkConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Columns.
    pub l1: usize,
    /// Rows.
    pub l2: usize,
    pub delta1: f64,
    pub delta2: f64,
}

/// Attenuation phantom; the scatter map is derived from its unit-max version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhantomConfig {
    SheppLogan {
        max_mu: f64,
    },
    Rectangle {
        width: f64,
        height: f64,
        max_mu: f64,
    },
    Shapes {
        max_mu: f64,
        shapes: Vec<Shape>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ScatterConfig {
    pub variant: ScatterVariant,
}

/// One source-detector pair, angles in degrees counterclockwise from +x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    pub source_deg: f64,
    pub detector_deg: f64,
    /// Optional assertion; checked against the geometry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transmission: Option<bool>,
}

impl PairConfig {
    pub fn to_pair(&self) -> SourceDetectorPair {
        make_pair(self.source_deg.to_radians(), self.detector_deg.to_radians())
    }
}

/// A scalar applied everywhere, or one value per sample (row-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Values {
    Scalar(f64),
    PerSample(Vec<f64>),
}

impl Values {
    fn expand(&self, n: usize) -> Vec<f64> {
        match self {
            Values::Scalar(v) => vec![*v; n],
            Values::PerSample(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub i0: Values,
    /// Background counts, shared by every pair.
    pub beta: Values,
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig {
            i0: Values::Scalar(350.0),
            beta: Values::Scalar(17.5),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorConfig {
    pub realization: Realization,
    pub extra_padding_rows: usize,
    pub smooth_sizes: bool,
    /// Store direct-operator weights in single precision.
    pub single_precision: bool,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        OperatorConfig {
            realization: Realization::Auto,
            extra_padding_rows: 0,
            smooth_sizes: false,
            single_precision: false,
        }
    }
}

impl OperatorConfig {
    pub fn options(&self) -> OperatorOptions {
        OperatorOptions {
            realization: self.realization,
            precision: if self.single_precision {
                WeightPrecision::Single
            } else {
                WeightPrecision::Double
            },
            extra_rows: self.extra_padding_rows,
            smooth_sizes: self.smooth_sizes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub seed: u64,
    /// Poisson draws; otherwise the means themselves are written.
    pub noisy: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            seed: 0,
            noisy: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructionConfig {
    pub init_alpha: f64,
    pub init_mu: f64,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        ReconstructionConfig {
            init_alpha: 0.5,
            init_mu: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    /// Floor applied to background-subtracted counts before the log.
    pub d0: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig { d0: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    /// Grid sizes as `[columns, rows]`, covering a 2 x 1.5 extent.
    pub sizes: Vec<[usize; 2]>,
    pub pair_counts: Vec<usize>,
    pub realizations: Vec<Realization>,
    pub repetitions: usize,
    /// Direct-operator sets whose estimated footprint exceeds this are skipped.
    pub memory_budget_gb: f64,
    /// Direct operators at or above this many pixels use single precision.
    pub single_precision_from_pixels: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            sizes: vec![[200, 150], [400, 300], [800, 600]],
            pair_counts: vec![1, 2, 4, 8],
            realizations: vec![Realization::Direct, Realization::Fourier],
            repetitions: 5,
            memory_budget_gb: 3.5,
            single_precision_from_pixels: 200_000,
        }
    }
}

impl BenchmarkConfig {
    /// Reads only the `[benchmark]` table of a configuration file; other
    /// sections may be present and are ignored.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        #[derive(Deserialize)]
        struct Wrapper {
            #[serde(default)]
            benchmark: BenchmarkConfig,
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let w: Wrapper = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        w.benchmark.validate()?;
        Ok(w.benchmark)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.repetitions == 0 {
            return Err(invalid("benchmark.repetitions", "must be at least 1"));
        }
        if self.sizes.iter().any(|s| s[0] < 2 || s[1] < 2) {
            return Err(invalid("benchmark.sizes", "each size needs at least 2 columns and 2 rows"));
        }
        if self.pair_counts.iter().any(|&c| c == 0 || c > MAX_BENCHMARK_PAIRS) {
            return Err(invalid(
                "benchmark.pair_counts",
                format!("counts must lie in 1..={MAX_BENCHMARK_PAIRS}"),
            ));
        }
        if !(self.memory_budget_gb > 0.0) {
            return Err(invalid("benchmark.memory_budget_gb", "must be positive"));
        }
        Ok(())
    }
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration is always representable as TOML")
    }

    /// Field-level checks that the type system cannot express.
    pub fn validate(&self) -> Result<(), CliError> {
        let grid = self.image_grid()?;
        let n = grid.len();
        let max_mu = self.max_mu();
        if !(max_mu > 0.0 && max_mu.is_finite()) {
            return Err(invalid("phantom.max_mu", format!("must be positive, got {max_mu}")));
        }
        match &self.phantom {
            PhantomConfig::Rectangle { width, height, .. } => {
                rectangle_description(&grid, *width, *height, 1.0, 1.0)
                    .map_err(|e| invalid("phantom", e))?;
            }
            PhantomConfig::Shapes { shapes, .. } if shapes.is_empty() => {
                return Err(invalid("phantom.shapes", "at least one shape is required"));
            }
            _ => {}
        }
        if self.pairs.is_empty() {
            return Err(invalid("pairs", "at least one source-detector pair is required"));
        }
        for (k, p) in self.pairs.iter().enumerate() {
            if !(p.source_deg.is_finite() && p.detector_deg.is_finite()) {
                return Err(invalid(&format!("pairs[{k}]"), "angles must be finite"));
            }
            let pair = p.to_pair();
            if let Some(flag) = p.transmission {
                if flag != pair.is_transmission {
                    return Err(invalid(
                        &format!("pairs[{k}].transmission"),
                        format!(
                            "declared {flag} but the angles describe a {} pair",
                            if pair.is_transmission { "transmission" } else { "scatter" }
                        ),
                    ));
                }
            }
        }
        for (name, values) in [("source.i0", &self.source.i0), ("source.beta", &self.source.beta)] {
            let v = values.expand(n);
            if v.len() != n {
                return Err(invalid(name, format!("expected {n} samples, got {}", v.len())));
            }
            if let Some(bad) = v.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
                return Err(invalid(name, format!("values must be finite and nonnegative, got {bad}")));
            }
        }
        self.solver.validate().map_err(|e| invalid("solver", e))?;
        if !(0.0..=1.0).contains(&self.reconstruction.init_alpha) {
            return Err(invalid("reconstruction.init_alpha", "must lie in [0, 1]"));
        }
        if !(self.reconstruction.init_mu >= 0.0 && self.reconstruction.init_mu.is_finite()) {
            return Err(invalid("reconstruction.init_mu", "must be finite and nonnegative"));
        }
        if !(self.baseline.d0 > 0.0) {
            return Err(invalid("baseline.d0", "must be positive"));
        }
        self.benchmark.validate()?;
        Ok(())
    }

    pub fn image_grid(&self) -> Result<ImageGrid, CliError> {
        let g = &self.grid;
        ImageGrid::new(g.l1, g.l2, g.delta1, g.delta2).map_err(|e| invalid("grid", e))
    }

    pub fn max_mu(&self) -> f64 {
        match &self.phantom {
            PhantomConfig::SheppLogan { max_mu }
            | PhantomConfig::Rectangle { max_mu, .. }
            | PhantomConfig::Shapes { max_mu, .. } => *max_mu,
        }
    }

    /// Phantom with peak value one; `scale` is applied by the caller.
    pub fn unit_phantom(&self) -> Result<PhantomDescription, CliError> {
        let grid = self.image_grid()?;
        Ok(match &self.phantom {
            PhantomConfig::SheppLogan { .. } => shepp_logan_description(1.0),
            PhantomConfig::Rectangle { width, height, .. } => {
                rectangle_description(&grid, *width, *height, 1.0, 1.0)
                    .map_err(|e| invalid("phantom", e))?
            }
            PhantomConfig::Shapes { shapes, .. } => PhantomDescription {
                shapes: shapes.clone(),
                scale: 1.0,
            },
        })
    }

    pub fn source_pairs(&self) -> Vec<SourceDetectorPair> {
        self.pairs.iter().map(PairConfig::to_pair).collect()
    }

    pub fn source_model(&self) -> Result<SourceModel, CliError> {
        let n = self.image_grid()?.len();
        let beta = self.source.beta.expand(n);
        Ok(SourceModel {
            i0: self.source.i0.expand(n),
            beta: vec![beta; self.pairs.len()],
        })
    }
}
