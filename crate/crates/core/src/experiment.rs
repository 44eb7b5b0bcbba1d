//! Experiment orchestration: one run per (protocol, seed), medians across
//! seeds for the per-round series, and the CSV files consumers plot from.
//!
//! All files are staged as temporaries in the output directory and renamed
//! into place only after every write succeeded, so a failing run never
//! leaves a half-overwritten result set behind.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use crate::config::{emit_config, ExperimentSpec};
use crate::engine::{run, MetricsReport, ProtocolKind, RoundRecord};
use crate::error::Result;

/// File names emitted into the output directory.
pub const DEATHS_CSV: &str = "deaths.csv";
pub const ENERGY_CSV: &str = "energy.csv";
pub const PACKETS_CSV: &str = "packets.csv";
pub const NODE_ENERGY_CSV: &str = "node_energy.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const RESOLVED_CONFIG: &str = "config_resolved.cfg";

pub struct ExperimentOutput {
    pub runs: Vec<MetricsReport>,
    pub files: Vec<PathBuf>,
}

/// Median of a sorted-on-demand sample; even counts average the middle pair.
fn median(values: &mut [f64]) -> f64 {
    debug_assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// One series row per round, padded past a run's end by repeating its last
/// record (a finished network keeps its final counters). A run that never
/// completed a round pads as fully dead.
fn padded(records: &[RoundRecord], round: usize) -> RoundRecord {
    match records.last() {
        Some(_) => records[round.min(records.len() - 1)],
        None => RoundRecord {
            alive: 0,
            cum_energy_j: 0.0,
            bs_packets_cum: 0,
            ch_packets_cum: 0,
        },
    }
}

fn fmt_opt_u32(v: Option<u32>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// Run every (protocol, seed) pair of the spec and emit the CSV set.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;

    let mut runs: Vec<MetricsReport> = Vec::new();
    for &protocol in &spec.protocols {
        for &seed in &spec.seeds {
            let mut scenario = spec.scenario.clone();
            scenario.protocol = protocol;
            scenario.seed = seed;
            runs.push(run(&scenario)?);
        }
    }

    let by_protocol = |p: ProtocolKind| runs.iter().filter(move |r| r.protocol == p);
    let n_nodes = spec.scenario.nodes as f64;

    let mut deaths = String::from("round,protocol,alive_count,dead_pct\n");
    let mut energy = String::from("round,protocol,cumulative_joules\n");
    let mut packets = String::from("round,protocol,bs_packets_cum,ch_packets_cum\n");
    for &protocol in &spec.protocols {
        let series: Vec<&Vec<RoundRecord>> = by_protocol(protocol).map(|r| &r.rounds).collect();
        let longest = series.iter().map(|s| s.len()).max().unwrap_or(0);
        for round in 0..longest {
            let mut alive: Vec<f64> = series
                .iter()
                .map(|s| padded(s, round).alive as f64)
                .collect();
            let mut cum_j: Vec<f64> = series
                .iter()
                .map(|s| padded(s, round).cum_energy_j)
                .collect();
            let mut bs: Vec<f64> = series
                .iter()
                .map(|s| padded(s, round).bs_packets_cum as f64)
                .collect();
            let mut ch: Vec<f64> = series
                .iter()
                .map(|s| padded(s, round).ch_packets_cum as f64)
                .collect();
            let alive_med = median(&mut alive);
            let dead_pct = 100.0 * (n_nodes - alive_med) / n_nodes;
            deaths.push_str(&format!("{round},{protocol},{alive_med},{dead_pct}\n"));
            energy.push_str(&format!("{round},{protocol},{}\n", median(&mut cum_j)));
            packets.push_str(&format!(
                "{round},{protocol},{},{}\n",
                median(&mut bs),
                median(&mut ch)
            ));
        }
    }

    let mut node_energy = String::from("protocol,seed,node_id,dissipated_joules\n");
    for report in &runs {
        for (id, spent) in report.node_spent_j.iter().enumerate() {
            node_energy.push_str(&format!(
                "{},{},{id},{spent}\n",
                report.protocol, report.seed
            ));
        }
    }

    let mut summary = String::from(
        "protocol,seed,first_death_round,all_dead_round,formation_time_s,\
         avg_delay_s,yield_ch_pps,yield_bs_pps\n",
    );
    for report in &runs {
        let s = &report.summary;
        summary.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            report.protocol,
            report.seed,
            fmt_opt_u32(s.first_death_round),
            fmt_opt_u32(s.all_dead_round),
            fmt_opt_f64(s.formation_time_s),
            fmt_opt_f64(s.avg_delay_s),
            fmt_opt_f64(s.yield_ch_pps),
            fmt_opt_f64(s.yield_bs_pps),
        ));
    }

    fs::create_dir_all(&spec.out_dir)?;
    let outputs = [
        (DEATHS_CSV, deaths),
        (ENERGY_CSV, energy),
        (PACKETS_CSV, packets),
        (NODE_ENERGY_CSV, node_energy),
        (SUMMARY_CSV, summary),
        (RESOLVED_CONFIG, emit_config(spec)),
    ];

    // Stage every file first, then rename the complete set into place.
    let mut staged = Vec::new();
    for (name, contents) in &outputs {
        let tmp = spec.out_dir.join(format!(".{name}.tmp"));
        let mut file = fs::File::create(&tmp)?;
        file.write_all(contents.as_bytes())?;
        file.sync_all()?;
        staged.push((tmp, spec.out_dir.join(name)));
    }
    let mut files = Vec::new();
    for (tmp, target) in staged {
        fs::rename(&tmp, &target)?;
        files.push(target);
    }

    Ok(ExperimentOutput { runs, files })
}
