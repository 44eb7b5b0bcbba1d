//! The round loop: deployment, sensing, protocol dispatch, TDMA slotting,
//! and the metrics collector.
//!
//! Simulated time advances by the sum of serialization delays scheduled in
//! each phase; rounds run back to back with no idle gaps. Per-packet delay
//! is the packet's TDMA slot wait plus the serialization delay of each hop
//! it traverses.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::baselines::{ApteenConfig, BaselineConfig, BaselineKind, BaselineProtocol, TeenConfig};
use crate::error::{Result, SimError};
use crate::priya::{PriyaConfig, PriyaProtocol};
use crate::protocol::{BsPacket, HeadPacket, Network, Protocol, RoundEvents};
use crate::radio::{EnergyCause, RadioParams};
use crate::topology::{deploy, NodeId, Position};

const SENSING_STREAM: u64 = 0x12;
const ELECTION_STREAM: u64 = 0x13;

/// Assign TDMA slots: the alive members, sorted by id, take slots
/// 0..m-1. Dead members are excluded at each re-issue.
pub fn tdma_slots<F: Fn(NodeId) -> bool>(members: &[NodeId], include: F) -> Vec<NodeId> {
    let mut slots: Vec<NodeId> = members.iter().copied().filter(|&m| include(m)).collect();
    slots.sort_unstable();
    slots
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProtocolKind {
    Priya,
    Leach,
    Teen,
    Apteen,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 4] = [
        ProtocolKind::Priya,
        ProtocolKind::Leach,
        ProtocolKind::Teen,
        ProtocolKind::Apteen,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ProtocolKind::Priya => "priya",
            ProtocolKind::Leach => "leach",
            ProtocolKind::Teen => "teen",
            ProtocolKind::Apteen => "apteen",
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProtocolKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "priya" => Ok(ProtocolKind::Priya),
            "leach" => Ok(ProtocolKind::Leach),
            "teen" => Ok(ProtocolKind::Teen),
            "apteen" => Ok(ProtocolKind::Apteen),
            other => Err(SimError::config(format!("unsupported protocol '{other}'"))),
        }
    }
}

/// Where each round's readings come from. The stream is seeded
/// independently of topology and election randomness, so two protocols run
/// under the same scenario seed sense identical values round for round.
#[derive(Debug, Clone, PartialEq)]
pub enum SensingField {
    Uniform { lo: f64, hi: f64 },
    Gaussian { mean: f64, std_dev: f64 },
    /// Fixed trace: `rounds[r][node]`. Rounds past the end repeat the last row.
    Scripted { rounds: Vec<Vec<f64>> },
}

impl SensingField {
    fn sample_round(&self, rng: &mut ChaCha8Rng, round: u32, n: usize, out: &mut Vec<f64>) {
        out.clear();
        match self {
            SensingField::Uniform { lo, hi } => {
                let dist = Uniform::new_inclusive(*lo, *hi);
                out.extend((0..n).map(|_| dist.sample(rng)));
            }
            SensingField::Gaussian { mean, std_dev } => {
                let dist = Normal::new(*mean, *std_dev).expect("validated std_dev");
                out.extend((0..n).map(|_| dist.sample(rng)));
            }
            SensingField::Scripted { rounds } => {
                let row = &rounds[(round as usize).min(rounds.len() - 1)];
                out.extend_from_slice(row);
            }
        }
    }
}

impl Default for SensingField {
    /// Default field: a bell curve centred inside the desired range with a
    /// thin tail past its upper bound. Per reading this is roughly 16%
    /// below range, 82% in range and 2% above it; at the cluster level,
    /// where the maximum of all awake members' readings decides the route,
    /// it leaves about a quarter of the aggregates critical, so the sleep,
    /// normal and critical paths all carry regular traffic.
    fn default() -> Self {
        SensingField::Gaussian {
            mean: 40.0,
            std_dev: 10.0,
        }
    }
}

/// Everything one run needs: topology, radio, protocol choice and its
/// parameters, the sensing model, and the seed making it all reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub nodes: u32,
    pub width: f64,
    pub height: f64,
    /// May sit outside the region; by convention it does.
    pub bs: Position,
    pub radio: RadioParams,
    pub initial_energy: f64,
    /// Fraction of initial energy below which a node is no longer operational.
    pub alive_floor_frac: f64,
    pub protocol: ProtocolKind,
    pub priya: PriyaConfig,
    pub baseline: BaselineConfig,
    pub teen: TeenConfig,
    pub apteen: ApteenConfig,
    pub sensing: SensingField,
    pub max_rounds: u32,
    pub seed: u64,
    /// Keep per-packet delivery records in the report (tests and small runs).
    pub record_packets: bool,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            nodes: 100,
            width: 100.0,
            height: 100.0,
            bs: Position { x: 50.0, y: 175.0 },
            radio: RadioParams::default(),
            initial_energy: 2.0,
            alive_floor_frac: 0.05,
            protocol: ProtocolKind::Priya,
            priya: PriyaConfig::default(),
            baseline: BaselineConfig::default(),
            teen: TeenConfig::default(),
            apteen: ApteenConfig::default(),
            sensing: SensingField::default(),
            max_rounds: 4000,
            seed: 1,
            record_packets: false,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        fn ensure(cond: bool, msg: &str) -> Result<()> {
            if cond {
                Ok(())
            } else {
                Err(SimError::config(msg.to_string()))
            }
        }
        ensure(self.nodes > 0, "sim.nodes must be positive")?;
        ensure(self.width > 0.0, "sim.width must be positive")?;
        ensure(self.height > 0.0, "sim.height must be positive")?;
        ensure(self.initial_energy > 0.0, "sim.initial_energy must be positive")?;
        ensure(
            (0.0..1.0).contains(&self.alive_floor_frac),
            "sim.alive_floor_frac must be in [0, 1)",
        )?;
        ensure(self.radio.e_elec >= 0.0, "radio.e_elec must be non-negative")?;
        ensure(self.radio.eps_amp >= 0.0, "radio.eps_amp must be non-negative")?;
        ensure(self.radio.e_agg >= 0.0, "radio.e_agg must be non-negative")?;
        ensure(self.radio.data_bits > 0, "radio.data_bits must be positive")?;
        ensure(self.radio.bandwidth > 0.0, "radio.bandwidth must be positive")?;
        ensure(self.priya.num_clusters > 0, "priya.clusters must be positive")?;
        ensure(
            self.priya.num_clusters <= self.nodes,
            "priya.clusters must not exceed sim.nodes",
        )?;
        ensure(
            self.priya.range_lo < self.priya.range_hi,
            "priya.range_lo must be below priya.range_hi",
        )?;
        ensure(
            self.priya.ch_min_energy_frac > 0.0 && self.priya.ch_min_energy_frac < 1.0,
            "priya.ch_min_energy_frac must be in (0, 1)",
        )?;
        ensure(
            self.baseline.ch_fraction > 0.0 && self.baseline.ch_fraction <= 1.0,
            "baseline.ch_fraction must be in (0, 1]",
        )?;
        ensure(
            self.baseline.resetup_rounds >= 1,
            "baseline.resetup_rounds must be at least 1",
        )?;
        ensure(
            self.teen.soft_threshold >= 0.0,
            "teen.soft_threshold must be non-negative",
        )?;
        ensure(
            self.apteen.soft_threshold >= 0.0,
            "apteen.soft_threshold must be non-negative",
        )?;
        ensure(self.apteen.count_time >= 1, "apteen.count_time must be at least 1")?;
        match &self.sensing {
            SensingField::Uniform { lo, hi } => {
                ensure(lo <= hi, "sensing.lo must not exceed sensing.hi")?
            }
            SensingField::Gaussian { std_dev, .. } => {
                ensure(*std_dev >= 0.0, "sensing.std_dev must be non-negative")?
            }
            SensingField::Scripted { rounds } => {
                ensure(!rounds.is_empty(), "scripted sensing trace must be non-empty")?;
                ensure(
                    rounds.iter().all(|r| r.len() == self.nodes as usize),
                    "scripted sensing rows must cover every node",
                )?;
            }
        }
        Ok(())
    }

    fn build_protocol(&self) -> Box<dyn Protocol> {
        match self.protocol {
            ProtocolKind::Priya => Box::new(PriyaProtocol::new(self.priya, self.seed)),
            ProtocolKind::Leach => Box::new(BaselineProtocol::new(
                BaselineKind::Leach,
                self.baseline,
                self.teen,
                self.apteen.clone(),
            )),
            ProtocolKind::Teen => Box::new(BaselineProtocol::new(
                BaselineKind::Teen,
                self.baseline,
                self.teen,
                self.apteen.clone(),
            )),
            ProtocolKind::Apteen => Box::new(BaselineProtocol::new(
                BaselineKind::Apteen,
                self.baseline,
                self.teen,
                self.apteen.clone(),
            )),
        }
    }
}

/// One row of the per-round series. All counters are cumulative from the
/// start of the run (setup included).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundRecord {
    pub alive: u32,
    pub cum_energy_j: f64,
    pub bs_packets_cum: u64,
    pub ch_packets_cum: u64,
}

/// Total energy drained per ledger cause.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyByCause {
    pub tx_data: f64,
    pub tx_ctrl: f64,
    pub rx: f64,
    pub aggregate: f64,
}

impl EnergyByCause {
    fn add(&mut self, cause: EnergyCause, joules: f64) {
        match cause {
            EnergyCause::TxData => self.tx_data += joules,
            EnergyCause::TxCtrl => self.tx_ctrl += joules,
            EnergyCause::Rx => self.rx += joules,
            EnergyCause::Aggregate => self.aggregate += joules,
        }
    }
}

/// Run summary over the whole simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    /// Earliest round with a death event; absent when nobody died.
    pub first_death_round: Option<u32>,
    /// Round at which the last node died; absent when someone survived.
    pub all_dead_round: Option<u32>,
    /// Simulated seconds from setup start until the first member data
    /// packet reached a cluster head.
    pub formation_time_s: Option<f64>,
    /// Mean accumulated delay over delivered member-to-head data packets.
    pub avg_delay_s: Option<f64>,
    /// Data packets received at cluster heads per simulated second.
    pub yield_ch_pps: Option<f64>,
    /// Data packets received at the base station per simulated second.
    pub yield_bs_pps: Option<f64>,
    /// Total simulated time.
    pub elapsed_s: f64,
    /// Sum of every energy ledger entry in the run.
    pub ledger_total_j: f64,
}

/// Machine-readable result of one run.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub protocol: ProtocolKind,
    pub seed: u64,
    pub rounds: Vec<RoundRecord>,
    /// Ledger-derived dissipation per node.
    pub node_spent_j: Vec<f64>,
    /// Remaining battery per node at run end.
    pub node_final_j: Vec<f64>,
    pub node_initial_j: Vec<f64>,
    pub energy_by_cause: EnergyByCause,
    pub summary: RunSummary,
    /// Per-packet logs, populated only when the scenario asks for them.
    pub bs_packet_log: Vec<(u32, BsPacket)>,
    pub head_packet_log: Vec<(u32, HeadPacket)>,
}

impl MetricsReport {
    /// Total battery drop across all nodes, for conservation auditing
    /// against `summary.ledger_total_j`.
    pub fn energy_drop_j(&self) -> f64 {
        self.node_initial_j
            .iter()
            .zip(&self.node_final_j)
            .map(|(i, f)| i - f)
            .sum()
    }
}

/// Folds round events into running totals and the summary.
struct Collector {
    n: u32,
    record_packets: bool,
    node_spent: Vec<f64>,
    by_cause: EnergyByCause,
    running_energy: f64,
    elapsed: f64,
    bs_count: u64,
    ch_count: u64,
    delay_sum: f64,
    delay_n: u64,
    formation: Option<f64>,
    first_death: Option<u32>,
    all_dead: Option<u32>,
    deaths_seen: u32,
    bs_log: Vec<(u32, BsPacket)>,
    head_log: Vec<(u32, HeadPacket)>,
}

impl Collector {
    fn new(n: u32, record_packets: bool) -> Self {
        Collector {
            n,
            record_packets,
            node_spent: vec![0.0; n as usize],
            by_cause: EnergyByCause::default(),
            running_energy: 0.0,
            elapsed: 0.0,
            bs_count: 0,
            ch_count: 0,
            delay_sum: 0.0,
            delay_n: 0,
            formation: None,
            first_death: None,
            all_dead: None,
            deaths_seen: 0,
            bs_log: Vec::new(),
            head_log: Vec::new(),
        }
    }

    fn absorb(&mut self, ev: &RoundEvents) {
        let phase_start = self.elapsed;
        for entry in &ev.ledger {
            self.node_spent[entry.node as usize] += entry.joules;
            self.by_cause.add(entry.cause, entry.joules);
            self.running_energy += entry.joules;
        }
        self.elapsed += ev.elapsed_s;
        self.bs_count += ev.bs_packets.len() as u64;
        self.ch_count += ev.head_packets.len() as u64;
        for p in &ev.head_packets {
            self.delay_sum += p.delay_s;
        }
        self.delay_n += ev.head_packets.len() as u64;
        if self.formation.is_none() {
            if let Some(first) = ev
                .head_packets
                .iter()
                .map(|p| p.delay_s)
                .min_by(|a, b| a.partial_cmp(b).unwrap())
            {
                self.formation = Some(phase_start + first);
            }
        }
        for _ in &ev.deaths {
            self.deaths_seen += 1;
            if self.first_death.is_none() {
                self.first_death = Some(ev.round);
            }
            if self.deaths_seen == self.n && self.all_dead.is_none() {
                self.all_dead = Some(ev.round);
            }
        }
        if self.record_packets {
            self.bs_log.extend(ev.bs_packets.iter().map(|&p| (ev.round, p)));
            self.head_log.extend(ev.head_packets.iter().map(|&p| (ev.round, p)));
        }
    }

    fn snapshot(&self, alive: u32) -> RoundRecord {
        RoundRecord {
            alive,
            cum_energy_j: self.running_energy,
            bs_packets_cum: self.bs_count,
            ch_packets_cum: self.ch_count,
        }
    }

    fn summarize(&self) -> RunSummary {
        let ledger_total: f64 = self.node_spent.iter().sum();
        let per_second = |count: u64| {
            if self.elapsed > 0.0 {
                Some(count as f64 / self.elapsed)
            } else {
                None
            }
        };
        RunSummary {
            first_death_round: self.first_death,
            all_dead_round: self.all_dead,
            formation_time_s: self.formation,
            avg_delay_s: if self.delay_n > 0 {
                Some(self.delay_sum / self.delay_n as f64)
            } else {
                None
            },
            yield_ch_pps: per_second(self.ch_count),
            yield_bs_pps: per_second(self.bs_count),
            elapsed_s: self.elapsed,
            ledger_total_j: ledger_total,
        }
    }
}

/// Execute one scenario: setup, then steady rounds until `max_rounds` or
/// until every node is dead. Fully deterministic in the scenario, seed
/// included.
pub fn run(scenario: &Scenario) -> Result<MetricsReport> {
    scenario.validate()?;

    let nodes = deploy(
        scenario.nodes,
        scenario.width,
        scenario.height,
        scenario.initial_energy,
        scenario.seed,
    );
    let mut net = Network::new(
        nodes,
        scenario.bs,
        scenario.radio,
        scenario.alive_floor_frac,
    );
    let mut protocol = scenario.build_protocol();

    let mut sensing_rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    sensing_rng.set_stream(SENSING_STREAM);
    let mut election_rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    election_rng.set_stream(ELECTION_STREAM);

    let mut collector = Collector::new(scenario.nodes, scenario.record_packets);
    let mut ev = RoundEvents::new(0);
    protocol.setup(&mut net, &mut ev, 0, &mut election_rng);
    collector.absorb(&ev);

    let mut rounds = Vec::new();
    let mut readings = Vec::with_capacity(scenario.nodes as usize);
    for r in 0..scenario.max_rounds {
        if net.alive_count() == 0 {
            break;
        }
        scenario.sensing.sample_round(
            &mut sensing_rng,
            r,
            scenario.nodes as usize,
            &mut readings,
        );
        ev.reset(r);
        protocol.steady_round(&mut net, &mut ev, &readings, r);
        collector.absorb(&ev);
        rounds.push(collector.snapshot(net.alive_count()));

        // Rotation and periodic re-setup happen after the round's metrics
        // are appended; their cost lands on the next round.
        if r + 1 < scenario.max_rounds && net.alive_count() > 0 {
            ev.reset(r + 1);
            protocol.maybe_rotate(&mut net, &mut ev, r + 1, &mut election_rng);
            collector.absorb(&ev);
        }
    }

    let summary = collector.summarize();
    Ok(MetricsReport {
        protocol: scenario.protocol,
        seed: scenario.seed,
        rounds,
        node_spent_j: collector.node_spent.clone(),
        node_final_j: net.nodes.iter().map(|n| n.energy).collect(),
        node_initial_j: net.nodes.iter().map(|n| n.initial_energy).collect(),
        energy_by_cause: collector.by_cause,
        summary,
        bs_packet_log: collector.bs_log,
        head_packet_log: collector.head_log,
    })
}
