//! Election-based baseline protocols sharing one cluster machinery:
//! probabilistic head election, advertisement/join cluster formation and
//! TDMA scheduling, with per-protocol transmit gates layered on top.

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::engine::tdma_slots;
use crate::protocol::{BsPacket, HeadPacket, Network, Protocol, RoundEvents};
use crate::radio::{aggregate_cost, tx_delay, EnergyCause};
use crate::topology::{centroid, distance, Cluster, Node, NodeId, Role};

/// Shared election/re-setup parameters for the baseline family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    /// Desired cluster-head fraction per election (the election formula's p).
    pub ch_fraction: f64,
    /// Heads are re-elected and clusters re-formed every this many rounds.
    pub resetup_rounds: u32,
}

impl BaselineConfig {
    /// Rounds per election epoch: a node serves as head at most once per
    /// `round(1/p)` consecutive rounds.
    pub fn rounds_per_epoch(&self) -> u32 {
        ((1.0 / self.ch_fraction).round() as u32).max(1)
    }
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            ch_fraction: 0.05,
            resetup_rounds: 20,
        }
    }
}

/// Reactive transmit gate: report only above the hard threshold, and then
/// only when the value moved at least the soft threshold since last report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TeenConfig {
    pub hard_threshold: f64,
    pub soft_threshold: f64,
}

impl Default for TeenConfig {
    fn default() -> Self {
        TeenConfig {
            hard_threshold: 60.0,
            soft_threshold: 2.0,
        }
    }
}

/// Hybrid gate: the reactive gate plus a count-time forcing a report after
/// `count_time` silent rounds.
///
/// Default thresholds differ from the pure reactive protocol on purpose:
/// the hybrid retrieves the whole range of interest (hard threshold at the
/// range floor), while the reactive one only raises alerts past the
/// critical boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct ApteenConfig {
    /// Label of the sensed physical quantity.
    pub attribute: String,
    pub hard_threshold: f64,
    pub soft_threshold: f64,
    pub count_time: u32,
}

impl Default for ApteenConfig {
    fn default() -> Self {
        ApteenConfig {
            attribute: "temperature".to_string(),
            hard_threshold: 30.0,
            soft_threshold: 2.0,
            count_time: 5,
        }
    }
}

/// Election bookkeeping: which nodes are still eligible this epoch.
#[derive(Debug, Clone, Default)]
pub struct LeachState {
    eligible: BTreeSet<NodeId>,
    epoch: Option<u64>,
}

impl LeachState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_eligible(&self, id: NodeId) -> bool {
        self.eligible.contains(&id)
    }

    pub fn eligible(&self) -> &BTreeSet<NodeId> {
        &self.eligible
    }
}

/// Head-election threshold: `p / (1 - p*(r mod 1/p))` for eligible nodes,
/// zero otherwise. Clamped to [0, 1] and pinned to exactly 1 on the last
/// round of an epoch, so every remaining eligible node is elected there
/// independent of floating-point rounding in the denominator.
pub fn leach_threshold(ch_fraction: f64, round: u32, in_eligible: bool) -> f64 {
    if !in_eligible {
        return 0.0;
    }
    let epoch_len = ((1.0 / ch_fraction).round() as u32).max(1);
    let r = round % epoch_len;
    if r + 1 == epoch_len {
        return 1.0;
    }
    let t = ch_fraction / (1.0 - ch_fraction * r as f64);
    t.clamp(0.0, 1.0)
}

/// Elect this period's cluster heads.
///
/// At an epoch boundary the eligible set resets to all alive nodes. Each
/// alive eligible node draws uniform [0,1) and becomes a head when the draw
/// falls below its threshold; elected nodes leave the eligible set until the
/// epoch resets. If a draw elects nobody it repeats with fresh randoms, so
/// at least one head always exists while the eligible set is non-empty.
/// Once every node has served within the epoch the set is exhausted and no
/// head is electable until the epoch resets; the once-per-epoch exclusion
/// is never broken.
pub fn leach_elect(
    nodes: &[Node],
    state: &mut LeachState,
    ch_fraction: f64,
    round: u32,
    rng: &mut ChaCha8Rng,
) -> Vec<NodeId> {
    let epoch_len = ((1.0 / ch_fraction).round() as u64).max(1);
    let epoch = round as u64 / epoch_len;
    if state.epoch != Some(epoch) {
        state.epoch = Some(epoch);
        state.eligible = nodes.iter().filter(|n| n.alive).map(|n| n.id).collect();
    }
    state.eligible.retain(|&id| nodes[id as usize].alive);
    if state.eligible.is_empty() {
        return Vec::new();
    }

    loop {
        let mut elected = Vec::new();
        for &id in &state.eligible {
            let draw: f64 = rng.gen();
            if draw < leach_threshold(ch_fraction, round, true) {
                elected.push(id);
            }
        }
        if !elected.is_empty() {
            for id in &elected {
                state.eligible.remove(id);
            }
            return elected;
        }
    }
}

/// A formed baseline cluster: the geometry plus its single head.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineCluster {
    pub cluster: Cluster,
    pub ch: NodeId,
}

/// Form clusters around the elected heads and charge the control traffic:
/// each head advertises network-wide, every other node joins its nearest
/// head (lower id on ties), and each head broadcasts a TDMA schedule to its
/// members.
pub fn leach_join(
    net: &mut Network,
    ev: &mut RoundEvents,
    ch_ids: &[NodeId],
) -> Vec<BaselineCluster> {
    let everyone = net.alive_ids();
    for &ch in ch_ids {
        net.broadcast_ctrl(ev, ch, &everyone);
    }

    let live_heads: Vec<NodeId> = ch_ids.iter().copied().filter(|&c| net.is_alive(c)).collect();
    let mut membership: Vec<Vec<NodeId>> = vec![Vec::new(); live_heads.len()];
    for &m in &everyone {
        if !net.is_alive(m) || live_heads.contains(&m) {
            continue;
        }
        let Some((slot, &ch)) = live_heads
            .iter()
            .enumerate()
            .filter(|(_, &c)| net.is_alive(c))
            .min_by(|(_, &a), (_, &b)| {
                let da = distance(net.node(m).pos, net.node(a).pos);
                let db = distance(net.node(m).pos, net.node(b).pos);
                da.partial_cmp(&db).unwrap().then(a.cmp(&b))
            })
        else {
            continue;
        };
        net.unicast(ev, m, ch, net.radio.ctrl_bits, EnergyCause::TxCtrl);
        membership[slot].push(m);
    }

    let mut out = Vec::new();
    for (i, &ch) in live_heads.iter().enumerate() {
        // The schedule broadcast also carries any threshold parameters.
        net.broadcast_ctrl(ev, ch, &membership[i]);
        let mut members = membership[i].clone();
        members.push(ch);
        members.sort_unstable();
        let positions: Vec<_> = members.iter().map(|&m| net.node(m).pos).collect();
        out.push(BaselineCluster {
            cluster: Cluster {
                id: i as u32,
                members,
                centroid: centroid(&positions),
            },
            ch,
        });
    }
    out
}

/// Reactive gate: transmit on the first hard-threshold crossing, afterwards
/// only when the value moved at least the soft threshold from the last
/// transmitted value. Updates `last_sent` when it fires.
pub fn teen_should_transmit(value: f64, last_sent: &mut Option<f64>, cfg: &TeenConfig) -> bool {
    if value <= cfg.hard_threshold {
        return false;
    }
    let fire = match *last_sent {
        None => true,
        Some(prev) => (value - prev).abs() >= cfg.soft_threshold,
    };
    if fire {
        *last_sent = Some(value);
    }
    fire
}

/// Hybrid gate: the reactive gate, or a forced report once the node has
/// been silent for `count_time` rounds. Transmitting resets the counter.
pub fn apteen_should_transmit(
    value: f64,
    last_sent: &mut Option<f64>,
    rounds_since_tx: &mut u32,
    cfg: &ApteenConfig,
) -> bool {
    let teen = TeenConfig {
        hard_threshold: cfg.hard_threshold,
        soft_threshold: cfg.soft_threshold,
    };
    let reactive = teen_should_transmit(value, last_sent, &teen);
    let forced = *rounds_since_tx >= cfg.count_time;
    if reactive || forced {
        *last_sent = Some(value);
        *rounds_since_tx = 0;
        true
    } else {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    Leach,
    Teen,
    Apteen,
}

/// One of the three election-based protocols, driven by the engine.
#[derive(Debug, Clone)]
pub struct BaselineProtocol {
    kind: BaselineKind,
    cfg: BaselineConfig,
    teen: TeenConfig,
    apteen: ApteenConfig,
    state: LeachState,
    clusters: Vec<BaselineCluster>,
}

impl BaselineProtocol {
    pub fn new(
        kind: BaselineKind,
        cfg: BaselineConfig,
        teen: TeenConfig,
        apteen: ApteenConfig,
    ) -> Self {
        BaselineProtocol {
            kind,
            cfg,
            teen,
            apteen,
            state: LeachState::new(),
            clusters: Vec::new(),
        }
    }

    pub fn clusters(&self) -> &[BaselineCluster] {
        &self.clusters
    }

    fn gate(&self, node: &mut Node, value: f64) -> bool {
        match self.kind {
            BaselineKind::Leach => true,
            BaselineKind::Teen => teen_should_transmit(value, &mut node.last_sent, &self.teen),
            BaselineKind::Apteen => apteen_should_transmit(
                value,
                &mut node.last_sent,
                &mut node.rounds_since_tx,
                &self.apteen,
            ),
        }
    }
}

impl Protocol for BaselineProtocol {
    fn name(&self) -> &'static str {
        match self.kind {
            BaselineKind::Leach => "leach",
            BaselineKind::Teen => "teen",
            BaselineKind::Apteen => "apteen",
        }
    }

    fn setup(&mut self, net: &mut Network, ev: &mut RoundEvents, round: u32, rng: &mut ChaCha8Rng) {
        for node in net.nodes.iter_mut().filter(|n| n.alive) {
            node.role = Role::Member;
            node.cluster = None;
            node.last_sent = None;
            node.rounds_since_tx = 0;
        }
        let heads = leach_elect(&net.nodes, &mut self.state, self.cfg.ch_fraction, round, rng);
        self.clusters = leach_join(net, ev, &heads);
        for bc in &self.clusters {
            for &m in &bc.cluster.members {
                net.nodes[m as usize].cluster = Some(bc.cluster.id);
            }
            if net.is_alive(bc.ch) {
                net.nodes[bc.ch as usize].role = Role::ClusterHead;
            }
        }
    }

    fn steady_round(&mut self, net: &mut Network, ev: &mut RoundEvents, readings: &[f64], _round: u32) {
        if self.kind == BaselineKind::Apteen {
            for node in net.nodes.iter_mut().filter(|n| n.alive) {
                node.rounds_since_tx += 1;
            }
        }
        let data_bits = net.radio.data_bits;
        let slot_len = tx_delay(data_bits, &net.radio);

        for bc in &self.clusters {
            let ch = bc.ch;
            if !net.is_alive(ch) {
                // No head, no schedule: the cluster stays silent until the
                // next re-setup.
                continue;
            }
            let slots = tdma_slots(
                &bc.cluster.members,
                |m| m != ch && net.is_alive(m),
            );

            let own = self.gate(&mut net.nodes[ch as usize], readings[ch as usize]);
            let mut inputs: u64 = 0;
            for (slot, &m) in slots.iter().enumerate() {
                if !self.gate(&mut net.nodes[m as usize], readings[m as usize]) {
                    continue;
                }
                let out = net.unicast(ev, m, ch, data_bits, EnergyCause::TxData);
                if out.delivered {
                    inputs += 1;
                    ev.head_packets.push(HeadPacket {
                        head: ch,
                        origin: m,
                        delay_s: (slot + 1) as f64 * slot_len,
                    });
                }
            }

            if !net.is_alive(ch) || (inputs == 0 && !own) {
                continue;
            }
            net.charge(
                ev,
                ch,
                aggregate_cost(data_bits, inputs, &net.radio),
                EnergyCause::Aggregate,
            );
            if !net.is_alive(ch) {
                continue;
            }
            if net.send_to_bs(ev, ch, data_bits, EnergyCause::TxData) {
                ev.bs_packets.push(BsPacket {
                    origin: ch,
                    delay_s: slots.len() as f64 * slot_len + slot_len,
                    hops: 2,
                });
            }
        }
    }

    fn maybe_rotate(&mut self, net: &mut Network, ev: &mut RoundEvents, round: u32, rng: &mut ChaCha8Rng) {
        if round > 0 && round.is_multiple_of(self.cfg.resetup_rounds) && net.alive_count() > 0 {
            self.setup(net, ev, round, rng);
        }
    }
}
