use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use dqmap::io::ingest_psd_files;
use dqmap::NoisePsd;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    Zero,
    /// S(ω) = cτ²/(1 + ω²τ²).
    Ou { c: f64, tau: f64 },
    Flat { level: f64 },
    /// PSD file plus sidecar; relative paths resolve against the config file.
    Tabulated { csv: PathBuf, sidecar: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveSection {
    /// Rabi frequency, rad/s.
    pub omega: f64,
    /// End of the time grid; defaults to two full flops.
    pub t_max: Option<f64>,
    pub n_times: usize,
    /// Explicit time grid, overrides `t_max`/`n_times`.
    pub times: Option<Vec<f64>>,
    /// Rabi frequencies for the π-pulse sweep in `predict`.
    pub omega_grid: Vec<f64>,
    /// Also write the non-Markovianity curve in `predict`.
    pub nm_curve: bool,
}

impl Default for DriveSection {
    fn default() -> Self {
        DriveSection {
            omega: 2.0 * PI * 2e4,
            t_max: None,
            n_times: 200,
            times: None,
            omega_grid: Vec::new(),
            nm_curve: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub dephasing: NoiseSpec,
    pub amplitude: Option<NoiseSpec>,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection { dephasing: NoiseSpec::Ou { c: 2e8, tau: 5e-4 }, amplitude: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub m_mc: usize,
    pub dt: Option<f64>,
    pub seed: u64,
    /// Haar-random input states for channel infidelities.
    pub n_haar: usize,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection { m_mc: 10_000, dt: None, seed: 1, n_haar: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TomographySection {
    /// Shots per time, split evenly over 4 states × 3 bases.
    pub shots: u64,
    pub repetitions: usize,
    pub chain_steps: usize,
    /// Number of evenly spaced times for synthetic data.
    pub n_times: usize,
    /// Measured counts; when absent, counts are simulated from the model.
    pub counts: Option<PathBuf>,
}

impl Default for TomographySection {
    fn default() -> Self {
        TomographySection { shots: 1200, repetitions: 1, chain_steps: 100_000, n_times: 10, counts: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RbNoise {
    /// Twirled model channel of a π/2 pulse at the configured drive.
    Model,
    Depolarizing { p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RbSection {
    pub n_seq: usize,
    pub shots: u64,
    pub max_length: usize,
    pub noise: RbNoise,
}

impl Default for RbSection {
    fn default() -> Self {
        RbSection { n_seq: 100, shots: 100, max_length: 1024, noise: RbNoise::Model }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { directory: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub drive: DriveSection,
    pub noise: NoiseSection,
    pub simulation: SimulationSection,
    pub tomography: TomographySection,
    pub rb: RbSection,
    pub output: OutputSection,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    /// Parse a config file, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for spec in std::iter::once(&mut cfg.noise.dephasing).chain(cfg.noise.amplitude.as_mut()) {
            if let NoiseSpec::Tabulated { csv, sidecar } = spec {
                fix(csv);
                fix(sidecar);
            }
        }
        if let Some(c) = cfg.tomography.counts.as_mut() {
            fix(c);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        positive("drive.omega", self.drive.omega)?;
        if let Some(t) = self.drive.t_max {
            positive("drive.t_max", t)?;
        }
        if self.drive.times.is_none() && self.drive.n_times == 0 {
            return Err(invalid("drive.n_times must be at least 1"));
        }
        if let Some(ts) = &self.drive.times {
            if ts.is_empty() || ts[0] <= 0.0 || ts.windows(2).any(|w| w[1] <= w[0]) {
                return Err(invalid("drive.times must be positive and strictly increasing"));
            }
        }
        for &w in &self.drive.omega_grid {
            positive("drive.omega_grid entry", w)?;
        }
        for spec in std::iter::once(&self.noise.dephasing).chain(self.noise.amplitude.as_ref()) {
            match spec {
                NoiseSpec::Ou { c, tau } => {
                    NoisePsd::ou(*c, *tau)?;
                }
                NoiseSpec::Flat { level } if !(*level >= 0.0 && level.is_finite()) => {
                    return Err(invalid("flat noise level must be nonnegative"));
                }
                NoiseSpec::Tabulated { csv, sidecar } => {
                    for p in [csv, sidecar] {
                        if !p.exists() {
                            return Err(invalid(format!("referenced file {} does not exist", p.display())));
                        }
                    }
                }
                _ => {}
            }
        }
        if let Some(dt) = self.simulation.dt {
            positive("simulation.dt", dt)?;
        }
        if self.simulation.m_mc == 0 || self.simulation.n_haar == 0 {
            return Err(invalid("simulation.m_mc and simulation.n_haar must be at least 1"));
        }
        let t = &self.tomography;
        if t.shots == 0 || t.shots % 12 != 0 {
            return Err(invalid("tomography.shots must be a positive multiple of 12 (4 states × 3 bases)"));
        }
        if t.repetitions == 0 || t.n_times == 0 || t.chain_steps < 10 {
            return Err(invalid("tomography needs repetitions >= 1, n_times >= 1 and chain_steps >= 10"));
        }
        if let Some(c) = &t.counts {
            if !c.exists() {
                return Err(invalid(format!("counts file {} does not exist", c.display())));
            }
        }
        if self.rb.n_seq == 0 || self.rb.shots == 0 || self.rb.max_length == 0 {
            return Err(invalid("rb.n_seq, rb.shots and rb.max_length must be at least 1"));
        }
        if let RbNoise::Depolarizing { p } = self.rb.noise {
            if !(0.0..=0.75).contains(&p) {
                return Err(invalid("rb depolarizing p must be in [0, 0.75]"));
            }
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        match &self.drive.times {
            Some(t) => t.clone(),
            None => {
                let n = self.drive.n_times;
                let t_max = self.t_max();
                (1..=n).map(|k| t_max * k as f64 / n as f64).collect()
            }
        }
    }

    pub fn t_max(&self) -> f64 {
        match (&self.drive.times, self.drive.t_max) {
            (Some(t), _) => *t.last().unwrap(),
            (None, Some(t)) => t,
            (None, None) => 4.0 * PI / self.drive.omega,
        }
    }

    pub fn dephasing_psd(&self) -> Result<NoisePsd, CliError> {
        build_psd(&self.noise.dephasing)
    }

    pub fn amplitude_psd(&self) -> Result<Option<NoisePsd>, CliError> {
        self.noise.amplitude.as_ref().map(build_psd).transpose()
    }
}

pub fn build_psd(spec: &NoiseSpec) -> Result<NoisePsd, CliError> {
    Ok(match spec {
        NoiseSpec::Zero => NoisePsd::Zero,
        NoiseSpec::Ou { c, tau } => NoisePsd::ou(*c, *tau)?,
        NoiseSpec::Flat { level } => NoisePsd::Flat { level: *level },
        NoiseSpec::Tabulated { csv, sidecar } => NoisePsd::Tabulated(ingest_psd_files(csv, sidecar)?),
    })
}
