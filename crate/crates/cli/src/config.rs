use std::path::Path;

use markovest::channel::MarkovChannel;
use markovest::cycle::Axis;
use markovest::lti::LtiSystem;
use markovest::matrix::Matrix;
use markovest::sim::{InitialState, Mode, SimulationConfig};
use serde::{Deserialize, Serialize};

/// Fixtures compiled into the binary, addressable by name.
pub const FIXTURES: &[(&str, &str)] = &[
    (
        "pendubot_default",
        include_str!("../fixtures/pendubot_default.json"),
    ),
    ("fig3a", include_str!("../fixtures/fig3a.json")),
    ("fig3b", include_str!("../fixtures/fig3b.json")),
    ("fig3c", include_str!("../fixtures/fig3c.json")),
    ("fig3d", include_str!("../fixtures/fig3d.json")),
    (
        "example2_onoff",
        include_str!("../fixtures/example2_onoff.json"),
    ),
    (
        "three_state_fig8",
        include_str!("../fixtures/three_state_fig8.json"),
    ),
    ("rotation", include_str!("../fixtures/rotation.json")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemBlock,
    pub channel: ChannelBlock,
    #[serde(default)]
    pub simulation: SimulationBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanBlock>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemBlock {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    #[serde(rename = "V")]
    pub v: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelBlock {
    pub transition: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr: Option<SnrBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnrBlock {
    pub gains: Vec<f64>,
    pub blocklength: u32,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationBlock {
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub initial_state: InitialState,
}

fn default_horizon() -> usize {
    100_000
}

fn default_seeds() -> Vec<u64> {
    (1..=10).collect()
}

impl Default for SimulationBlock {
    fn default() -> Self {
        Self {
            horizon: default_horizon(),
            seeds: default_seeds(),
            mode: Mode::Smart,
            initial_state: InitialState::Stationary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanBlock {
    pub axes: Vec<Axis>,
    /// Adds the analytic MSE column.
    #[serde(default)]
    pub mse: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Relative truncation tolerance of the MSE series.
    #[serde(default = "default_series")]
    pub series: f64,
    #[serde(default = "default_riccati")]
    pub riccati: f64,
    #[serde(default = "default_riccati_iter")]
    pub riccati_max_iter: usize,
    /// `ε` of the upper envelopes.
    #[serde(default = "default_epsilon")]
    pub bounds_epsilon: f64,
    /// Inclusive index range of the envelope checks.
    #[serde(default = "default_range")]
    pub bounds_range: [usize; 2],
}

fn default_series() -> f64 {
    1e-9
}
fn default_riccati() -> f64 {
    1e-12
}
fn default_riccati_iter() -> usize {
    100_000
}
fn default_epsilon() -> f64 {
    0.05
}
fn default_range() -> [usize; 2] {
    [1, 200]
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            series: default_series(),
            riccati: default_riccati(),
            riccati_max_iter: default_riccati_iter(),
            bounds_epsilon: default_epsilon(),
            bounds_range: default_range(),
        }
    }
}

/// Loads `source` as a file path, falling back to a bundled fixture name
/// (with or without `.json`).
pub fn load(source: Option<&str>) -> Result<ExperimentConfig, String> {
    let name = source.unwrap_or("pendubot_default");
    let text = if Path::new(name).is_file() {
        std::fs::read_to_string(name).map_err(|e| format!("{name}: {e}"))?
    } else {
        let stem = name.strip_suffix(".json").unwrap_or(name);
        match FIXTURES.iter().find(|(n, _)| *n == stem) {
            Some((_, text)) => (*text).to_owned(),
            None => return Err(format!("{name}: no such file or bundled fixture")),
        }
    };
    parse(&text)
}

/// Parses and validates; errors name the offending JSON path.
pub fn parse(text: &str) -> Result<ExperimentConfig, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: ExperimentConfig =
        serde_path_to_error::deserialize(de).map_err(|e| match e.path().to_string() {
            p if p == "." => e.inner().to_string(),
            p => format!("{p}: {}", e.inner()),
        })?;
    config.build()?;
    Ok(config)
}

fn matrix(path: &str, rows: &[Vec<f64>]) -> Result<Matrix, String> {
    let width = rows.first().map_or(0, Vec::len);
    if width == 0 {
        return Err(format!("{path}: matrix must be non-empty"));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(format!(
                "{path}[{i}]: expected {width} entries, got {}",
                row.len()
            ));
        }
    }
    Matrix::from_rows(rows).map_err(|e| format!("{path}: {e}"))
}

/// Validated models built from a config.
pub struct Model {
    pub system: LtiSystem,
    pub channel: MarkovChannel,
}

impl ExperimentConfig {
    pub fn build(&self) -> Result<Model, String> {
        let s = &self.system;
        let system = LtiSystem::new(
            matrix("system.A", &s.a)?,
            matrix("system.C", &s.c)?,
            matrix("system.W", &s.w)?,
            matrix("system.V", &s.v)?,
        )
        .map_err(|e| format!("system: {e}"))?;
        let channel = self.build_channel()?;
        if let Some(scan) = &self.scan {
            for (k, axis) in scan.axes.iter().enumerate() {
                if axis.state >= channel.states() {
                    return Err(format!(
                        "scan.axes[{k}].state: no channel state {}",
                        axis.state
                    ));
                }
            }
        }
        Ok(Model { system, channel })
    }

    fn build_channel(&self) -> Result<MarkovChannel, String> {
        let c = &self.channel;
        let p = matrix("channel.transition", &c.transition)?;
        match (&c.d, &c.snr) {
            (Some(d), None) => MarkovChannel::new(p, d.clone()),
            (None, Some(snr)) => {
                MarkovChannel::from_snr(p, snr.gains.clone(), snr.blocklength, snr.rate)
            }
            _ => return Err("channel: give exactly one of `d` and `snr`".into()),
        }
        .map_err(|e| format!("channel: {e}"))
    }

    pub fn simulation_config(&self) -> SimulationConfig {
        let s = &self.simulation;
        let mut config = SimulationConfig::new(s.horizon, s.seeds.clone(), s.mode);
        config.initial_state = s.initial_state;
        config
    }
}
