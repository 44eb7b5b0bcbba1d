//! The dual-head cluster protocol: the base station partitions the field
//! and appoints a data head (near each cluster centre) and a routing head
//! (nearest the base station) per cluster, plus one principal head relaying
//! the other clusters' traffic upward. Members gate their transmissions on
//! a desired reading range, critical aggregates shortcut straight to the
//! base station, and head roles rotate on spent energy rather than time.

use rand_chacha::ChaCha8Rng;

use crate::engine::tdma_slots;
use crate::error::Result;
use crate::protocol::{BsPacket, HeadPacket, Network, Protocol, RoundEvents};
use crate::radio::{aggregate_cost, tx_delay, EnergyCause};
use crate::topology::{distance, partition, Cluster, NodeId, Position, Role};

/// Where a sensed value falls relative to the desired range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReadingClass {
    /// Below the range: the node keeps its transmitter off.
    Sleep,
    /// Inside the range (boundaries inclusive): reported on the normal path.
    Normal,
    /// Above the range: delay-sensitive, shortcut to the base station.
    Critical,
}

/// Classify a reading against the desired range `[lo, hi]`.
pub fn classify(value: f64, lo: f64, hi: f64) -> ReadingClass {
    debug_assert!(lo < hi);
    if value < lo {
        ReadingClass::Sleep
    } else if value > hi {
        ReadingClass::Critical
    } else {
        ReadingClass::Normal
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriyaConfig {
    pub num_clusters: u32,
    /// Desired reading range, in reading units.
    pub range_lo: f64,
    pub range_hi: f64,
    /// A head whose battery fraction drops below this rotates out, and
    /// only nodes at or above it may take a head role.
    pub ch_min_energy_frac: f64,
}

impl Default for PriyaConfig {
    fn default() -> Self {
        PriyaConfig {
            num_clusters: 5,
            range_lo: 30.0,
            range_hi: 60.0,
            ch_min_energy_frac: 0.35,
        }
    }
}

/// The two head roles of one cluster. Equal only in a single-node cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClusterHeads {
    pub dch: NodeId,
    pub rch: NodeId,
}

/// All head assignments: one head pair per cluster and the network-wide
/// principal head, which is always one of the routing heads.
#[derive(Debug, Clone, PartialEq)]
pub struct PriyaHeads {
    pub per_cluster: Vec<ClusterHeads>,
    pub pch: Option<NodeId>,
}

fn nearest_member(
    net: &Network,
    members: &[NodeId],
    target: Position,
    exclude: Option<NodeId>,
) -> Option<NodeId> {
    members
        .iter()
        .copied()
        .filter(|&m| net.is_alive(m) && Some(m) != exclude)
        .min_by(|&a, &b| {
            let da = distance(net.node(a).pos, target);
            let db = distance(net.node(b).pos, target);
            da.partial_cmp(&db).unwrap().then(a.cmp(&b))
        })
}

/// Base-station-driven setup: partition the alive nodes into proximity
/// clusters, appoint per-cluster heads (data head nearest the centroid,
/// routing head nearest the base station, distinct whenever the cluster has
/// more than one member) and the principal head, then charge each head's
/// announcement broadcast and the data head's TDMA schedule broadcast.
pub fn priya_setup(
    net: &mut Network,
    ev: &mut RoundEvents,
    cfg: &PriyaConfig,
    seed: u64,
) -> Result<(Vec<Cluster>, PriyaHeads)> {
    let clusters = partition(&net.nodes, cfg.num_clusters as usize, seed)?;

    let mut per_cluster = Vec::with_capacity(clusters.len());
    for cluster in &clusters {
        let dch = nearest_member(net, &cluster.members, cluster.centroid, None)
            .expect("partition clusters are non-empty");
        let rch = if cluster.members.len() == 1 {
            dch
        } else {
            nearest_member(net, &cluster.members, net.bs, Some(dch))
                .expect("multi-node cluster has a second member")
        };
        per_cluster.push(ClusterHeads { dch, rch });
    }
    let pch = per_cluster
        .iter()
        .map(|h| h.rch)
        .filter(|&r| net.is_alive(r))
        .min_by(|&a, &b| {
            let da = distance(net.node(a).pos, net.bs);
            let db = distance(net.node(b).pos, net.bs);
            da.partial_cmp(&db).unwrap().then(a.cmp(&b))
        });

    for (cluster, heads) in clusters.iter().zip(&per_cluster) {
        for &m in &cluster.members {
            let node = &mut net.nodes[m as usize];
            node.cluster = Some(cluster.id);
            node.role = Role::Member;
        }
        net.nodes[heads.dch as usize].role = Role::DataHead;
        net.nodes[heads.rch as usize].role = Role::RoutingHead;
    }
    if let Some(p) = pch {
        net.nodes[p as usize].role = Role::PrincipalHead;
    }

    for (cluster, heads) in clusters.iter().zip(&per_cluster) {
        net.broadcast_ctrl(ev, heads.dch, &cluster.members);
        if heads.rch != heads.dch {
            net.broadcast_ctrl(ev, heads.rch, &cluster.members);
        }
        // TDMA schedule, issued by the data head the members report to.
        net.broadcast_ctrl(ev, heads.dch, &cluster.members);
    }

    Ok((clusters, PriyaHeads { per_cluster, pch }))
}

#[derive(Debug, Clone)]
pub struct PriyaProtocol {
    cfg: PriyaConfig,
    seed: u64,
    clusters: Vec<Cluster>,
    heads: PriyaHeads,
}

impl PriyaProtocol {
    pub fn new(cfg: PriyaConfig, seed: u64) -> Self {
        PriyaProtocol {
            cfg,
            seed,
            clusters: Vec::new(),
            heads: PriyaHeads {
                per_cluster: Vec::new(),
                pch: None,
            },
        }
    }

    pub fn heads(&self) -> &PriyaHeads {
        &self.heads
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    /// Successor for one head role: the alive cluster member nearest the
    /// outgoing head according to the outgoing head's own distance table,
    /// skipping current heads, nodes below the head energy floor, and
    /// `exclude`. Lower id wins ties. None when nobody qualifies.
    ///
    /// When the outgoing head is already dead and nobody clears the energy
    /// floor, the floor is waived: a live head below the floor beats a dead
    /// one holding the role.
    fn successor(
        &self,
        net: &Network,
        members: &[NodeId],
        old_head: NodeId,
        current: ClusterHeads,
        exclude: Option<NodeId>,
    ) -> Option<NodeId> {
        let pick = |require_bar: bool| {
            let table = &net.node(old_head).known_distances;
            members
                .iter()
                .copied()
                .filter(|&m| {
                    m != current.dch
                        && m != current.rch
                        && Some(m) != exclude
                        && net.is_alive(m)
                        && (!require_bar
                            || net.node(m).energy_fraction() >= self.cfg.ch_min_energy_frac)
                })
                .filter_map(|m| table.get(&m).map(|&d| (d, m)))
                .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)))
                .map(|(_, m)| m)
        };
        pick(true).or_else(|| {
            if net.is_alive(old_head) {
                None
            } else {
                pick(false)
            }
        })
    }

    fn rederive_pch(&mut self, net: &mut Network) {
        let new_pch = self
            .heads
            .per_cluster
            .iter()
            .map(|h| h.rch)
            .filter(|&r| net.is_alive(r))
            .min_by(|&a, &b| {
                let da = distance(net.node(a).pos, net.bs);
                let db = distance(net.node(b).pos, net.bs);
                da.partial_cmp(&db).unwrap().then(a.cmp(&b))
            });
        if new_pch == self.heads.pch {
            return;
        }
        if let Some(old) = self.heads.pch {
            let node = &mut net.nodes[old as usize];
            if node.alive && node.role == Role::PrincipalHead {
                node.role = Role::RoutingHead;
            }
        }
        if let Some(new) = new_pch {
            net.nodes[new as usize].role = Role::PrincipalHead;
        }
        self.heads.pch = new_pch;
    }
}

impl Protocol for PriyaProtocol {
    fn name(&self) -> &'static str {
        "priya"
    }

    fn setup(&mut self, net: &mut Network, ev: &mut RoundEvents, _round: u32, _rng: &mut ChaCha8Rng) {
        let (clusters, heads) = priya_setup(net, ev, &self.cfg, self.seed)
            .expect("scenario validation guarantees enough alive nodes");
        self.clusters = clusters;
        self.heads = heads;
    }

    fn steady_round(&mut self, net: &mut Network, ev: &mut RoundEvents, readings: &[f64], _round: u32) {
        let data_bits = net.radio.data_bits;
        let slot_len = tx_delay(data_bits, &net.radio);
        let (lo, hi) = (self.cfg.range_lo, self.cfg.range_hi);
        let pch = self.heads.pch;
        // Delay and hop count of each aggregate the principal head receives
        // this round.
        let mut pch_inbox: Vec<(f64, u32)> = Vec::new();

        for (cluster, &ClusterHeads { dch, rch }) in self.clusters.iter().zip(&self.heads.per_cluster)
        {
            if !net.is_alive(dch) {
                continue;
            }
            let slots = tdma_slots(&cluster.members, |m| m != dch && net.is_alive(m));

            // The data head's own reading joins the aggregate without radio cost.
            let own = readings[dch as usize];
            let mut aggregate = match classify(own, lo, hi) {
                ReadingClass::Sleep => None,
                _ => Some(own),
            };
            let mut inputs: u64 = 0;
            for (slot, &m) in slots.iter().enumerate() {
                let value = readings[m as usize];
                if classify(value, lo, hi) == ReadingClass::Sleep {
                    continue;
                }
                let out = net.unicast(ev, m, dch, data_bits, EnergyCause::TxData);
                if out.delivered {
                    inputs += 1;
                    aggregate = Some(aggregate.map_or(value, |a: f64| a.max(value)));
                    ev.head_packets.push(HeadPacket {
                        head: dch,
                        origin: m,
                        delay_s: (slot + 1) as f64 * slot_len,
                    });
                }
            }
            let Some(aggregate) = aggregate else {
                continue; // whole cluster below range: nothing moves
            };
            if !net.is_alive(dch) {
                continue;
            }
            net.charge(
                ev,
                dch,
                aggregate_cost(data_bits, inputs, &net.radio),
                EnergyCause::Aggregate,
            );
            if !net.is_alive(dch) {
                continue;
            }

            let member_phase = slots.len() as f64 * slot_len;
            let (delay_at_rch, hops_at_rch) = if dch == rch {
                (member_phase, 1)
            } else {
                let out = net.unicast(ev, dch, rch, data_bits, EnergyCause::TxData);
                if !out.delivered {
                    continue;
                }
                (member_phase + slot_len, 2)
            };

            let direct = Some(rch) == pch || classify(aggregate, lo, hi) == ReadingClass::Critical;
            if direct {
                if net.send_to_bs(ev, rch, data_bits, EnergyCause::TxData) {
                    ev.bs_packets.push(BsPacket {
                        origin: rch,
                        delay_s: delay_at_rch + slot_len,
                        hops: hops_at_rch + 1,
                    });
                }
            } else if let Some(p) = pch {
                // Routing heads keep forwarding to the assigned principal
                // head even if it died mid-round; the delivery is lost.
                let out = net.unicast(ev, rch, p, data_bits, EnergyCause::TxData);
                if out.delivered {
                    pch_inbox.push((delay_at_rch + slot_len, hops_at_rch + 1));
                }
            }
        }

        // The principal head fuses the aggregates it received into one
        // upload per round.
        if let Some(p) = pch {
            if !pch_inbox.is_empty() && net.is_alive(p) {
                net.charge(
                    ev,
                    p,
                    aggregate_cost(data_bits, pch_inbox.len() as u64, &net.radio),
                    EnergyCause::Aggregate,
                );
                if net.is_alive(p) && net.send_to_bs(ev, p, data_bits, EnergyCause::TxData) {
                    let latest = pch_inbox.iter().map(|x| x.0).fold(0.0f64, f64::max);
                    let deepest = pch_inbox.iter().map(|x| x.1).max().unwrap();
                    ev.bs_packets.push(BsPacket {
                        origin: p,
                        delay_s: latest + slot_len,
                        hops: deepest + 1,
                    });
                }
            }
        }
    }

    fn maybe_rotate(&mut self, net: &mut Network, ev: &mut RoundEvents, _round: u32, _rng: &mut ChaCha8Rng) {
        let mut changed_any = false;
        for (ci, cluster) in self.clusters.iter().enumerate() {
            let current = self.heads.per_cluster[ci];
            let dch_low = net.node(current.dch).energy_fraction() < self.cfg.ch_min_energy_frac;
            let rch_low = net.node(current.rch).energy_fraction() < self.cfg.ch_min_energy_frac;
            if !dch_low && !rch_low {
                continue;
            }

            // Both roles rotate together; a head with no qualified successor
            // keeps its role until death.
            let new_dch = self
                .successor(net, &cluster.members, current.dch, current, None)
                .unwrap_or(current.dch);
            let new_rch = self
                .successor(net, &cluster.members, current.rch, current, Some(new_dch))
                .unwrap_or(current.rch);
            // Commit only when a depleted role actually changes hands;
            // swapping just the healthy head would churn announcements
            // every round while the stuck head stays stuck.
            let low_replaced = (dch_low && new_dch != current.dch)
                || (rch_low && new_rch != current.rch);
            if !low_replaced {
                continue;
            }

            for old in [current.dch, current.rch] {
                let node = &mut net.nodes[old as usize];
                if node.alive {
                    node.role = Role::Member;
                }
            }
            self.heads.per_cluster[ci] = ClusterHeads {
                dch: new_dch,
                rch: new_rch,
            };
            net.nodes[new_dch as usize].role = Role::DataHead;
            net.nodes[new_rch as usize].role = Role::RoutingHead;

            // Incoming heads announce themselves to the cluster.
            if new_dch != current.dch {
                net.broadcast_ctrl(ev, new_dch, &cluster.members);
            }
            if new_rch != current.rch && new_rch != new_dch {
                net.broadcast_ctrl(ev, new_rch, &cluster.members);
            }
            changed_any = true;
        }

        let pch_invalid = match self.heads.pch {
            None => !self.heads.per_cluster.is_empty(),
            Some(p) => !net.is_alive(p) || !self.heads.per_cluster.iter().any(|h| h.rch == p),
        };
        if changed_any || pch_invalid {
            self.rederive_pch(net);
        }
        // A retained routing head may have had its role overwritten above.
        if let Some(p) = self.heads.pch {
            if net.is_alive(p) {
                net.nodes[p as usize].role = Role::PrincipalHead;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio::RadioParams;
    use crate::topology::Node;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn classify_range_bands() {
        assert_eq!(classify(45.0, 30.0, 60.0), ReadingClass::Normal);
        assert_eq!(classify(75.0, 30.0, 60.0), ReadingClass::Critical);
        assert_eq!(classify(20.0, 30.0, 60.0), ReadingClass::Sleep);
        assert_eq!(classify(30.0, 30.0, 60.0), ReadingClass::Normal);
        assert_eq!(classify(60.0, 30.0, 60.0), ReadingClass::Normal);
    }

    fn net_from(positions: &[(f64, f64)], bs: (f64, f64)) -> Network {
        let nodes = positions
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| Node::new(i as NodeId, Position { x, y }, 2.0))
            .collect();
        Network::new(
            nodes,
            Position { x: bs.0, y: bs.1 },
            RadioParams::default(),
            0.05,
        )
    }

    #[test]
    fn setup_picks_centroid_and_bs_nearest_heads() {
        let mut net = net_from(&[(0.0, 0.0), (5.0, 5.0), (10.0, 10.0)], (50.0, 50.0));
        let mut ev = RoundEvents::new(0);
        let cfg = PriyaConfig {
            num_clusters: 1,
            ..PriyaConfig::default()
        };
        let (clusters, heads) = priya_setup(&mut net, &mut ev, &cfg, 7).unwrap();
        assert_eq!(clusters.len(), 1);
        // centroid (5,5) -> node 1; nearest the sink -> node 2
        assert_eq!(heads.per_cluster[0].dch, 1);
        assert_eq!(heads.per_cluster[0].rch, 2);
        assert_eq!(heads.pch, Some(2));
        assert_eq!(net.node(1).role, Role::DataHead);
        assert_eq!(net.node(2).role, Role::PrincipalHead);
    }

    #[test]
    fn single_node_cluster_holds_both_roles() {
        let mut net = net_from(&[(0.0, 0.0), (100.0, 100.0), (99.0, 99.0)], (0.0, 10.0));
        let mut ev = RoundEvents::new(0);
        let cfg = PriyaConfig {
            num_clusters: 2,
            ..PriyaConfig::default()
        };
        let (clusters, heads) = priya_setup(&mut net, &mut ev, &cfg, 1).unwrap();
        let lone = clusters
            .iter()
            .position(|c| c.members == vec![0])
            .expect("node 0 sits alone");
        assert_eq!(heads.per_cluster[lone].dch, heads.per_cluster[lone].rch);
        let pair = 1 - lone;
        assert_ne!(heads.per_cluster[pair].dch, heads.per_cluster[pair].rch);
    }

    #[test]
    fn max_aggregation_keeps_critical_visible() {
        // A single critical member survives max-aggregation regardless of
        // how many normal readings dilute it.
        let readings = [45.0, 45.0, 75.0, 45.0];
        let agg = readings.iter().copied().fold(f64::MIN, f64::max);
        assert_eq!(classify(agg, 30.0, 60.0), ReadingClass::Critical);
    }

    /// Two clusters on a line, the sink far off one end: nodes {0,1,2} sit
    /// far from the sink, {3,4,5} next to it. The near cluster supplies the
    /// principal head (node 5), the far one routes through it.
    fn two_cluster_world() -> (Network, PriyaProtocol, usize) {
        let mut net = net_from(
            &[
                (0.0, 0.0),
                (6.0, 0.0),
                (12.0, 0.0),
                (80.0, 0.0),
                (86.0, 0.0),
                (92.0, 0.0),
            ],
            (130.0, 0.0),
        );
        let cfg = PriyaConfig {
            num_clusters: 2,
            ..PriyaConfig::default()
        };
        let mut protocol = PriyaProtocol::new(cfg, 2);
        let mut ev = RoundEvents::new(0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        protocol.setup(&mut net, &mut ev, 0, &mut rng);
        assert_eq!(protocol.heads().pch, Some(5));
        let far_idx = protocol
            .clusters()
            .iter()
            .position(|c| c.members.contains(&0))
            .unwrap();
        assert_eq!(protocol.clusters()[far_idx].members, vec![0, 1, 2]);
        (net, protocol, far_idx)
    }

    #[test]
    fn sleeping_cluster_moves_no_packets() {
        let (mut net, mut protocol, far_idx) = two_cluster_world();
        let far_dch = protocol.heads().per_cluster[far_idx].dch;
        let before: Vec<f64> = net.nodes.iter().map(|n| n.energy).collect();
        let mut ev = RoundEvents::new(0);
        // far cluster {0,1,2} all below range; near cluster in range
        let readings = vec![20.0, 25.0, 10.0, 45.0, 50.0, 40.0];
        protocol.steady_round(&mut net, &mut ev, &readings, 0);
        assert!(ev.head_packets.iter().all(|p| p.head != far_dch));
        assert!(ev.bs_packets.iter().all(|p| p.origin >= 3));
        // and the sleeping cluster spent nothing this round
        for id in [0u32, 1, 2] {
            assert_eq!(net.node(id).energy, before[id as usize], "node {id}");
        }
    }

    #[test]
    fn critical_aggregate_shortcuts_in_three_hops() {
        let (mut net, mut protocol, far_idx) = two_cluster_world();
        let far_rch = protocol.heads().per_cluster[far_idx].rch;
        let mut ev = RoundEvents::new(0);
        let readings = vec![45.0, 75.0, 45.0, 45.0, 45.0, 45.0];
        protocol.steady_round(&mut net, &mut ev, &readings, 0);
        let critical = ev
            .bs_packets
            .iter()
            .find(|p| p.origin == far_rch)
            .expect("far cluster delivered directly");
        assert_eq!(critical.hops, 3);
    }

    #[test]
    fn normal_aggregate_relays_in_four_hops() {
        let (mut net, mut protocol, _) = two_cluster_world();
        let mut ev = RoundEvents::new(0);
        let readings = vec![45.0; 6];
        protocol.steady_round(&mut net, &mut ev, &readings, 0);
        let relayed = ev
            .bs_packets
            .iter()
            .find(|p| p.hops == 4)
            .expect("principal head relayed the far aggregate");
        assert_eq!(relayed.origin, 5);
        // the principal head's own cluster still goes direct
        assert!(ev.bs_packets.iter().any(|p| p.origin == 5 && p.hops == 3));
        assert_eq!(ev.bs_packets.len(), 2);
    }
}
