//! Experiment manifests: a JSON file (`--config`) overlaid with flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ergolab::{Convention, ModelParams, SimConfig, Strategy};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy<f64>>,
    /// Shorthand for `a(x) = c mu 1(x > x0)` when no strategy is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_multiple: Option<f64>,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub outputs: Vec<OutputSpec>,
    #[serde(default)]
    pub density: DensitySection,
    #[serde(default)]
    pub hjb: HjbSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub diagnose: DiagnoseSection,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub mu: Option<f64>,
    pub cap: Option<f64>,
    pub x0: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub seed: Option<u64>,
    pub n_paths: Option<usize>,
    pub x_init: Option<f64>,
    pub burn_in_fraction: Option<f64>,
    pub record_every: Option<usize>,
    pub noise_scale: Option<f64>,
    pub blowup_bound: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Summary,
    TrajectoryCsv,
    EnsembleJson,
    DensityCsv,
    NumericDensityCsv,
    SplitJson,
    ResidualCsv,
    CandidateJson,
    SweepCsv,
    DiagnosticCsv,
    VerdictJson,
}

impl OutputKind {
    pub fn default_file(self) -> &'static str {
        match self {
            OutputKind::Summary => "summary.json",
            OutputKind::TrajectoryCsv => "trajectory.csv",
            OutputKind::EnsembleJson => "ensemble.json",
            OutputKind::DensityCsv => "density.csv",
            OutputKind::NumericDensityCsv => "density_numeric.csv",
            OutputKind::SplitJson => "split.json",
            OutputKind::ResidualCsv => "residuals.csv",
            OutputKind::CandidateJson => "candidate.json",
            OutputKind::SweepCsv => "sweep.csv",
            OutputKind::DiagnosticCsv => "diagnostic.csv",
            OutputKind::VerdictJson => "verdict.json",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub kind: OutputKind,
    pub path: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DensityMode {
    #[default]
    ClosedForm,
    Numeric,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ConventionArg {
    #[default]
    Sde,
    Paper,
}

impl From<ConventionArg> for Convention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Sde => Convention::SdeConsistent,
            ConventionArg::Paper => Convention::PaperNotation,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySection {
    pub mode: Option<DensityMode>,
    pub convention: Option<ConventionArg>,
    pub half_width: Option<f64>,
    pub n_cells: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HjbSection {
    pub r: Option<f64>,
    pub convention: Option<ConventionArg>,
    pub grid: Option<GridSpec>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        if self.n == 0 || !(self.lo <= self.hi) {
            return Err(CliError::Usage(format!("bad grid {self:?}")));
        }
        if self.n == 1 {
            return Ok(vec![self.lo]);
        }
        let step = (self.hi - self.lo) / (self.n - 1) as f64;
        Ok((0..self.n).map(|i| self.lo + step * i as f64).collect())
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub c: Option<Vec<f64>>,
    pub x0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseSection {
    pub checkpoints: Option<Vec<f64>>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
    }

    pub fn params(&self) -> Result<ModelParams<f64>, CliError> {
        let m = &self.model;
        Ok(ModelParams::new(m.mu.unwrap_or(1.0), m.cap.unwrap_or(3.0), m.x0.unwrap_or(0.0))?)
    }

    pub fn sim_config(&self) -> Result<SimConfig<f64>, CliError> {
        let s = &self.sim;
        let d = SimConfig::<f64>::default();
        let cfg = SimConfig {
            dt: s.dt.unwrap_or(d.dt),
            horizon: s.horizon.unwrap_or(d.horizon),
            seed: s.seed.unwrap_or(d.seed),
            n_paths: s.n_paths.unwrap_or(d.n_paths),
            x_init: s.x_init.unwrap_or(d.x_init),
            noise_scale: s.noise_scale.unwrap_or(d.noise_scale),
            blowup_bound: s.blowup_bound.unwrap_or(d.blowup_bound),
            record_every: s.record_every.unwrap_or(d.record_every),
            burn_in_fraction: s.burn_in_fraction.unwrap_or(d.burn_in_fraction),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn strategy(&self, params: &ModelParams<f64>) -> Result<Strategy<f64>, CliError> {
        match (&self.strategy, self.rate_multiple) {
            (Some(s), None) => Ok(s.clone()),
            (None, Some(c)) => Ok(Strategy::proportional_threshold(params, c)?),
            (Some(_), Some(_)) => Err(CliError::Usage("give either a strategy or a rate multiple, not both".into())),
            (None, None) => Err(CliError::Usage("no strategy: set `strategy` or `rate_multiple` (--c)".into())),
        }
    }

    /// Output files for `kinds`, resolved under `out_dir`. An explicit
    /// `outputs` list selects and names files; otherwise every kind is
    /// written under its default name.
    pub fn output_paths(&self, out_dir: &Path, kinds: &[OutputKind]) -> Result<BTreeMap<OutputKind, PathBuf>, CliError> {
        let mut map = BTreeMap::new();
        if self.outputs.is_empty() {
            for &k in kinds {
                map.insert(k, out_dir.join(k.default_file()));
            }
        } else {
            for o in &self.outputs {
                if !kinds.contains(&o.kind) {
                    return Err(CliError::Usage(format!("output {:?} is not produced by this command", o.kind)));
                }
                if map.insert(o.kind, out_dir.join(&o.path)).is_some() {
                    return Err(CliError::Usage(format!("output {:?} listed twice", o.kind)));
                }
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for p in map.values() {
            if !seen.insert(p.clone()) {
                return Err(CliError::Usage(format!("output path {} used twice", p.display())));
            }
        }
        Ok(map)
    }
}
