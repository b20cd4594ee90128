//! Experiment configuration: TOML or JSON, chosen by file extension.

use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use dyadlab_core::io::{read_shift, read_weight, StoredShift, WeightSidecar};
use dyadlab_core::shifts::{
    martingale_transform, martingale_transform_per_haar, petermichl_shift, random_generic_shift, random_signs,
    random_simple_shift, NormMethod, PowerIteration, ScaleFamily, SimpleHaarShift,
};
use dyadlab_core::weights::{power_weight, random_a2_weight, spike_weight};
use dyadlab_core::{DyadicCube, DyadicGrid, Weight};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_experiment")]
    pub experiment: String,
    /// Base seed for random components without an explicit seed.
    #[serde(default)]
    pub seed: u64,
    pub grid: GridSpec,
    #[serde(default)]
    pub shift: ShiftSpec,
    #[serde(default)]
    pub weights: Vec<WeightSpec>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub lemmas: LemmaSpec,
    #[serde(default)]
    pub cz: CzSpec,
}

fn default_experiment() -> String {
    "experiment".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "one")]
    pub d: u32,
    #[serde(rename = "N")]
    pub n: u32,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ShiftChoice {
    Zero,
    #[default]
    Petermichl,
    Martingale,
    Random,
    Generic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftSpec {
    #[serde(default)]
    pub kind: ShiftChoice,
    #[serde(default = "one")]
    pub tau: u32,
    pub seed: Option<u64>,
    #[serde(default)]
    pub family: ScaleFamily,
    /// Shift file written by the library; overrides `kind`.
    pub path: Option<PathBuf>,
}

impl Default for ShiftSpec {
    fn default() -> Self {
        ShiftSpec {
            kind: ShiftChoice::default(),
            tau: 2,
            seed: None,
            family: ScaleFamily::All,
            path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    Constant {
        #[serde(default = "unit")]
        value: f64,
    },
    Power {
        a: f64,
    },
    Cascade {
        n: u32,
        seed: Option<u64>,
    },
    Spike {
        k: u32,
        height: f64,
    },
    File {
        path: PathBuf,
    },
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    #[default]
    Power,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub method: MethodChoice,
    pub power_rel_tol: f64,
    pub power_max_iter: usize,
    pub power_seed: u64,
    /// Allowed excess of a testing constant over the measured norm.
    pub necessity_slack: f64,
    pub carleson_tol: f64,
    pub identity_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let p = PowerIteration::default();
        Tolerances {
            method: MethodChoice::Power,
            power_rel_tol: p.rel_tol,
            power_max_iter: p.max_iter,
            power_seed: p.seed,
            necessity_slack: 1e-9,
            carleson_tol: 1e-10,
            identity_tol: 1e-10,
        }
    }
}

impl Tolerances {
    pub fn method(&self) -> NormMethod {
        match self.method {
            MethodChoice::Dense => NormMethod::Dense,
            MethodChoice::Power => NormMethod::Power(PowerIteration {
                rel_tol: self.power_rel_tol,
                max_iter: self.power_max_iter,
                seed: self.power_seed,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LemmaSpec {
    /// Random families for the exponential-integrability check.
    pub jn_families: u32,
    /// Superlevel threshold constant; the calibrated value when absent.
    pub k: Option<f64>,
}

impl Default for LemmaSpec {
    fn default() -> Self {
        LemmaSpec {
            jn_families: 10,
            k: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CzSpec {
    pub inputs: u32,
    /// Height as a multiple of `‖f‖_1`; must be at least 1.
    pub lambda_factor: f64,
}

impl Default for CzSpec {
    fn default() -> Self {
        CzSpec {
            inputs: 10,
            lambda_factor: 2.0,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Usage(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => {
                serde_json::from_str(&text).map_err(|e| HarnessError::Usage(format!("{}: {e}", path.display())))?
            }
            Some("toml") => {
                toml::from_str(&text).map_err(|e| HarnessError::Usage(format!("{}: {e}", path.display())))?
            }
            _ => {
                return Err(HarnessError::Usage(format!(
                    "{}: config files must end in .toml or .json",
                    path.display()
                )))
            }
        };
        cfg.grid()?;
        Ok(cfg)
    }

    pub fn grid(&self) -> Result<DyadicGrid> {
        DyadicGrid::new(self.grid.d, self.grid.n).map_err(|e| HarnessError::Usage(e.to_string()))
    }

    pub fn shift_seed(&self) -> u64 {
        self.shift.seed.unwrap_or(self.seed)
    }

    pub fn build_shift(&self) -> Result<StoredShift> {
        let grid = self.grid()?;
        let spec = &self.shift;
        if let Some(path) = &spec.path {
            let file =
                File::open(path).map_err(|e| HarnessError::Usage(format!("cannot open {}: {e}", path.display())))?;
            let t = read_shift(BufReader::new(file)).map_err(|e| HarnessError::Usage(e.to_string()))?;
            if t.as_operator().grid() != grid {
                return Err(HarnessError::Usage(format!("{} is not on {grid}", path.display())));
            }
            return Ok(t);
        }
        let seed = self.shift_seed();
        let built = match spec.kind {
            ShiftChoice::Zero => StoredShift::Simple(SimpleHaarShift::zero(grid, spec.tau)?),
            ShiftChoice::Petermichl => StoredShift::Simple(petermichl_shift(grid, spec.family)?),
            ShiftChoice::Random => StoredShift::Simple(random_simple_shift(grid, spec.tau, seed, spec.family)?),
            ShiftChoice::Generic => StoredShift::Generic(random_generic_shift(grid, spec.tau, seed, spec.family)?),
            ShiftChoice::Martingale if grid.dim() == 1 => {
                let signs = random_signs(&grid, seed);
                StoredShift::Simple(martingale_transform(grid, |q| signs[&q])?)
            }
            ShiftChoice::Martingale => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut signs: HashMap<(DyadicCube, usize), f64> = HashMap::new();
                for q in grid.cubes().filter(|q| q.level < grid.depth()) {
                    for m in 1..grid.child_count() {
                        signs.insert((q, m), if rng.random::<bool>() { 1.0 } else { -1.0 });
                    }
                }
                StoredShift::Generic(martingale_transform_per_haar(grid, |q, m| signs[&(q, m)])?)
            }
        };
        Ok(built)
    }

    /// Weights in config order; the Lebesgue weight when none are listed.
    pub fn build_weights(&self) -> Result<Vec<(String, Weight)>> {
        let grid = self.grid()?;
        if self.weights.is_empty() {
            return Ok(vec![("constant(1)".into(), Weight::lebesgue(grid))]);
        }
        self.weights
            .iter()
            .enumerate()
            .map(|(i, spec)| spec.build(grid, self.seed.wrapping_add(i as u64)))
            .collect()
    }
}

impl WeightSpec {
    pub fn id(&self, default_seed: u64) -> String {
        match self {
            WeightSpec::Constant { value } => format!("constant({value})"),
            WeightSpec::Power { a } => format!("power(a={a})"),
            WeightSpec::Cascade { n, seed } => format!("cascade(n={n},seed={})", seed.unwrap_or(default_seed)),
            WeightSpec::Spike { k, height } => format!("spike(k={k},height={height})"),
            WeightSpec::File { path } => format!("file({})", path.display()),
        }
    }

    pub fn build(&self, grid: DyadicGrid, default_seed: u64) -> Result<(String, Weight)> {
        let w = match self {
            WeightSpec::Constant { value } => Weight::constant(grid, *value)?,
            WeightSpec::Power { a } => power_weight(*a, grid)?,
            WeightSpec::Cascade { n, seed } => random_a2_weight(*n, seed.unwrap_or(default_seed), grid)?,
            WeightSpec::Spike { k, height } => spike_weight(grid, *k, *height)?,
            WeightSpec::File { path } => load_weight_file(path, grid)?,
        };
        Ok((self.id(default_seed), w))
    }
}

/// Reads a weight in grid-function format, with the sidecar `<path>.json`
/// when present.
pub fn load_weight_file(path: &Path, grid: DyadicGrid) -> Result<Weight> {
    let file = File::open(path).map_err(|e| HarnessError::Usage(format!("cannot open {}: {e}", path.display())))?;
    let mut side = path.as_os_str().to_owned();
    side.push(".json");
    let sidecar: Option<WeightSidecar> = match std::fs::read_to_string(&side) {
        Ok(text) => Some(serde_json::from_str(&text).map_err(|e| HarnessError::Usage(format!("sidecar: {e}")))?),
        Err(_) => None,
    };
    let w = read_weight(BufReader::new(file), sidecar)
        .map_err(|e| HarnessError::Usage(format!("{}: {e}", path.display())))?;
    if w.grid() != grid {
        return Err(HarnessError::Usage(format!(
            "{} is on {}, expected {grid}",
            path.display(),
            w.grid()
        )));
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_and_json_agree() {
        let toml_text = r#"
            experiment = "demo"
            seed = 4
            grid = { N = 8 }
            shift = { kind = "random", tau = 2, family = "separated" }
            [[weights]]
            family = "power"
            a = 0.5
            [[weights]]
            family = "cascade"
            n = 3
        "#;
        let a: ExperimentConfig = toml::from_str(toml_text).unwrap();
        let b: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.grid.d, 1);
        assert_eq!(a.tolerances, Tolerances::default());
        let ws = a.build_weights().unwrap();
        assert_eq!(ws[1].0, "cascade(n=3,seed=5)");
        assert!(a.build_shift().is_ok());
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(toml::from_str::<ExperimentConfig>("grid = { N = 4 }\nbogus = 1").is_err());
        assert!(toml::from_str::<ExperimentConfig>("grid = { N = 4 }\n[[weights]]\nfamily = \"nope\"").is_err());
    }
}
