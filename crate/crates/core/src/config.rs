//! Flat key-value configuration: `section.key = value` lines, `#` comments,
//! unknown keys rejected by name. Parsing an emitted spec reproduces it
//! exactly, which is what the output-directory provenance echo relies on.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::engine::{ProtocolKind, Scenario, SensingField};
use crate::error::{Result, SimError};

/// A fully-resolved experiment: the scenario template, which protocols to
/// run, under which seeds, and where the CSV files go.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub protocols: Vec<ProtocolKind>,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            scenario: Scenario::default(),
            protocols: ProtocolKind::ALL.to_vec(),
            seeds: vec![1, 2, 3, 4, 5],
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.protocols.is_empty() {
            return Err(SimError::config("run.protocols must not be empty"));
        }
        if self.seeds.is_empty() {
            return Err(SimError::config("run.seeds must not be empty"));
        }
        self.scenario.validate()
    }
}

/// Read and resolve a configuration file. Missing keys keep their defaults.
pub fn parse_config(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| SimError::config(format!("invalid value '{value}' for key '{key}'")))
}

/// Resolve configuration text into a spec, applying defaults for anything
/// unspecified and validating the result.
pub fn parse_config_str(text: &str) -> Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::default();
    // Sensing keys may arrive in any order relative to the distribution
    // selector, so collect them and build the field afterwards.
    let mut sense_kind: Option<String> = None;
    let mut sense_lo = 0.0f64;
    let mut sense_hi = 100.0f64;
    let mut sense_mean = 40.0f64;
    let mut sense_std = 10.0f64;
    let mut saw_uniform_keys = false;
    let mut saw_gaussian_keys = false;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(SimError::config(format!(
                "line {}: expected 'key = value', got '{line}'",
                lineno + 1
            )));
        };
        let key = key.trim();
        let value = value.trim();
        let s = &mut spec.scenario;
        match key {
            "sim.nodes" => s.nodes = parse_num(key, value)?,
            "sim.width" => s.width = parse_num(key, value)?,
            "sim.height" => s.height = parse_num(key, value)?,
            "sim.bs_x" => s.bs.x = parse_num(key, value)?,
            "sim.bs_y" => s.bs.y = parse_num(key, value)?,
            "sim.max_rounds" => s.max_rounds = parse_num(key, value)?,
            "sim.initial_energy" => s.initial_energy = parse_num(key, value)?,
            "sim.alive_floor_frac" => s.alive_floor_frac = parse_num(key, value)?,
            "radio.e_elec" => s.radio.e_elec = parse_num(key, value)?,
            "radio.eps_amp" => s.radio.eps_amp = parse_num(key, value)?,
            "radio.data_bits" => s.radio.data_bits = parse_num(key, value)?,
            "radio.ctrl_bits" => s.radio.ctrl_bits = parse_num(key, value)?,
            "radio.bandwidth" => s.radio.bandwidth = parse_num(key, value)?,
            "radio.e_agg" => s.radio.e_agg = parse_num(key, value)?,
            "sensing.distribution" => sense_kind = Some(value.to_string()),
            "sensing.lo" => {
                sense_lo = parse_num(key, value)?;
                saw_uniform_keys = true;
            }
            "sensing.hi" => {
                sense_hi = parse_num(key, value)?;
                saw_uniform_keys = true;
            }
            "sensing.mean" => {
                sense_mean = parse_num(key, value)?;
                saw_gaussian_keys = true;
            }
            "sensing.std_dev" => {
                sense_std = parse_num(key, value)?;
                saw_gaussian_keys = true;
            }
            "priya.clusters" => s.priya.num_clusters = parse_num(key, value)?,
            "priya.range_lo" => s.priya.range_lo = parse_num(key, value)?,
            "priya.range_hi" => s.priya.range_hi = parse_num(key, value)?,
            "priya.ch_min_energy_frac" => s.priya.ch_min_energy_frac = parse_num(key, value)?,
            "baseline.ch_fraction" => s.baseline.ch_fraction = parse_num(key, value)?,
            "baseline.resetup_rounds" => s.baseline.resetup_rounds = parse_num(key, value)?,
            "teen.hard_threshold" => s.teen.hard_threshold = parse_num(key, value)?,
            "teen.soft_threshold" => s.teen.soft_threshold = parse_num(key, value)?,
            "apteen.attribute" => s.apteen.attribute = value.to_string(),
            "apteen.hard_threshold" => s.apteen.hard_threshold = parse_num(key, value)?,
            "apteen.soft_threshold" => s.apteen.soft_threshold = parse_num(key, value)?,
            "apteen.count_time" => s.apteen.count_time = parse_num(key, value)?,
            "run.protocols" => {
                spec.protocols = value
                    .split(',')
                    .map(|p| ProtocolKind::from_str(p.trim()))
                    .collect::<Result<Vec<_>>>()?;
            }
            "run.seeds" => {
                spec.seeds = value
                    .split(',')
                    .map(|v| parse_num::<u64>(key, v.trim()))
                    .collect::<Result<Vec<_>>>()?;
            }
            "run.out_dir" => spec.out_dir = PathBuf::from(value),
            other => {
                return Err(SimError::config(format!("unknown key '{other}'")));
            }
        }
    }

    let kind = match (sense_kind.as_deref(), saw_uniform_keys, saw_gaussian_keys) {
        (Some(k), _, _) => Some(k),
        (None, true, false) => Some("uniform"),
        (None, false, true) => Some("gaussian"),
        (None, false, false) => None, // keep the default field
        (None, true, true) => {
            return Err(SimError::config(
                "both uniform and gaussian sensing keys given; \
                 set sensing.distribution to pick one",
            ));
        }
    };
    match kind {
        None => {}
        Some("uniform") => {
            spec.scenario.sensing = SensingField::Uniform {
                lo: sense_lo,
                hi: sense_hi,
            }
        }
        Some("gaussian") => {
            spec.scenario.sensing = SensingField::Gaussian {
                mean: sense_mean,
                std_dev: sense_std,
            }
        }
        Some(other) => {
            return Err(SimError::config(format!(
                "invalid value '{other}' for key 'sensing.distribution' \
                 (expected uniform or gaussian)"
            )));
        }
    }

    spec.validate()?;
    Ok(spec)
}

/// Serialize a resolved spec in the same grammar `parse_config_str` accepts.
pub fn emit_config(spec: &ExperimentSpec) -> String {
    let s = &spec.scenario;
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    line("sim.nodes", s.nodes.to_string());
    line("sim.width", s.width.to_string());
    line("sim.height", s.height.to_string());
    line("sim.bs_x", s.bs.x.to_string());
    line("sim.bs_y", s.bs.y.to_string());
    line("sim.max_rounds", s.max_rounds.to_string());
    line("sim.initial_energy", s.initial_energy.to_string());
    line("sim.alive_floor_frac", s.alive_floor_frac.to_string());
    line("radio.e_elec", s.radio.e_elec.to_string());
    line("radio.eps_amp", s.radio.eps_amp.to_string());
    line("radio.data_bits", s.radio.data_bits.to_string());
    line("radio.ctrl_bits", s.radio.ctrl_bits.to_string());
    line("radio.bandwidth", s.radio.bandwidth.to_string());
    line("radio.e_agg", s.radio.e_agg.to_string());
    match &s.sensing {
        SensingField::Uniform { lo, hi } => {
            line("sensing.distribution", "uniform".into());
            line("sensing.lo", lo.to_string());
            line("sensing.hi", hi.to_string());
        }
        SensingField::Gaussian { mean, std_dev } => {
            line("sensing.distribution", "gaussian".into());
            line("sensing.mean", mean.to_string());
            line("sensing.std_dev", std_dev.to_string());
        }
        SensingField::Scripted { .. } => {
            // Scripted traces exist only through the library API.
            line("sensing.distribution", "scripted".into());
        }
    }
    line("priya.clusters", s.priya.num_clusters.to_string());
    line("priya.range_lo", s.priya.range_lo.to_string());
    line("priya.range_hi", s.priya.range_hi.to_string());
    line(
        "priya.ch_min_energy_frac",
        s.priya.ch_min_energy_frac.to_string(),
    );
    line("baseline.ch_fraction", s.baseline.ch_fraction.to_string());
    line(
        "baseline.resetup_rounds",
        s.baseline.resetup_rounds.to_string(),
    );
    line("teen.hard_threshold", s.teen.hard_threshold.to_string());
    line("teen.soft_threshold", s.teen.soft_threshold.to_string());
    line("apteen.attribute", s.apteen.attribute.clone());
    line("apteen.hard_threshold", s.apteen.hard_threshold.to_string());
    line("apteen.soft_threshold", s.apteen.soft_threshold.to_string());
    line("apteen.count_time", s.apteen.count_time.to_string());
    line(
        "run.protocols",
        spec.protocols
            .iter()
            .map(|p| p.as_str())
            .collect::<Vec<_>>()
            .join(","),
    );
    line(
        "run.seeds",
        spec.seeds
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    line("run.out_dir", spec.out_dir.display().to_string());
    out
}
