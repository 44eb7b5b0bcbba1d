//! The contract every routing protocol implements, plus the network state
//! and charging helpers they share: all energy spend and packet movement
//! flows through `Network` so the ledger, the distance tables and the
//! simulated clock stay consistent across protocols.

use rand_chacha::ChaCha8Rng;

use crate::radio::{self, EnergyCause, EnergyLedgerEntry, RadioParams};
use crate::topology::{distance, NodeId, Node, Position};

/// Mutable network state for one run: the nodes, the sink position and the
/// shared radio parameters.
#[derive(Debug, Clone)]
pub struct Network {
    pub nodes: Vec<Node>,
    pub bs: Position,
    pub radio: RadioParams,
    /// Fraction of initial energy below which a node stops being operational.
    pub alive_floor_frac: f64,
}

/// A data packet delivered to a cluster head (first hop from a member).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadPacket {
    pub head: NodeId,
    pub origin: NodeId,
    /// TDMA slot wait plus serialization, from the start of the round.
    pub delay_s: f64,
}

/// A data packet delivered to the base station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsPacket {
    /// The head that performed the final transmission.
    pub origin: NodeId,
    /// Accumulated slot wait plus per-hop serialization, from round start.
    pub delay_s: f64,
    /// Radio hops from the originating member to the base station.
    pub hops: u32,
}

/// Everything that happened in one round (or one setup/rotation phase):
/// the energy ledger, data packet deliveries, deaths, and how far the
/// simulated clock advanced (the sum of serialization delays scheduled).
#[derive(Debug, Clone, Default)]
pub struct RoundEvents {
    pub round: u32,
    pub ledger: Vec<EnergyLedgerEntry>,
    pub head_packets: Vec<HeadPacket>,
    pub bs_packets: Vec<BsPacket>,
    pub deaths: Vec<NodeId>,
    pub elapsed_s: f64,
}

impl RoundEvents {
    pub fn new(round: u32) -> Self {
        RoundEvents {
            round,
            ..Default::default()
        }
    }

    /// Reset for reuse, keeping allocations.
    pub fn reset(&mut self, round: u32) {
        self.round = round;
        self.ledger.clear();
        self.head_packets.clear();
        self.bs_packets.clear();
        self.deaths.clear();
        self.elapsed_s = 0.0;
    }
}

/// Result of a unicast transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TxOutcome {
    /// The sender was alive and transmitted (energy charged, clock advanced).
    pub sent: bool,
    /// The receiver was alive and received the packet.
    pub delivered: bool,
}

impl Network {
    pub fn new(nodes: Vec<Node>, bs: Position, radio: RadioParams, alive_floor_frac: f64) -> Self {
        Network {
            nodes,
            bs,
            radio,
            alive_floor_frac,
        }
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id as usize]
    }

    pub fn is_alive(&self, id: NodeId) -> bool {
        self.nodes[id as usize].alive
    }

    pub fn alive_count(&self) -> u32 {
        self.nodes.iter().filter(|n| n.alive).count() as u32
    }

    pub fn alive_ids(&self) -> Vec<NodeId> {
        self.nodes.iter().filter(|n| n.alive).map(|n| n.id).collect()
    }

    fn floor_j(&self, id: NodeId) -> f64 {
        self.alive_floor_frac * self.nodes[id as usize].initial_energy
    }

    /// Drain energy from a live node, logging the actual drop and any death.
    pub fn charge(&mut self, ev: &mut RoundEvents, id: NodeId, joules: f64, cause: EnergyCause) {
        let floor = self.floor_j(id);
        let node = &mut self.nodes[id as usize];
        let outcome = radio::deduct(node, joules, floor);
        if outcome.spent > 0.0 || cause != EnergyCause::Aggregate {
            ev.ledger.push(EnergyLedgerEntry {
                node: id,
                round: ev.round,
                cause,
                joules: outcome.spent,
            });
        }
        if outcome.died {
            ev.deaths.push(id);
        }
    }

    fn note_contact(&mut self, a: NodeId, b: NodeId) {
        let d = distance(self.nodes[a as usize].pos, self.nodes[b as usize].pos);
        self.nodes[a as usize].known_distances.insert(b, d);
        self.nodes[b as usize].known_distances.insert(a, d);
    }

    /// One node transmits `bits` to another. The sender pays the transmit
    /// cost over their distance and advances the clock by the serialization
    /// delay; the receiver, if still alive, pays the receive cost. Both ends
    /// learn each other's distance.
    pub fn unicast(
        &mut self,
        ev: &mut RoundEvents,
        from: NodeId,
        to: NodeId,
        bits: u64,
        cause: EnergyCause,
    ) -> TxOutcome {
        if !self.is_alive(from) {
            return TxOutcome {
                sent: false,
                delivered: false,
            };
        }
        let d = distance(self.nodes[from as usize].pos, self.nodes[to as usize].pos);
        self.charge(ev, from, radio::tx_cost(bits, d, &self.radio), cause);
        ev.elapsed_s += radio::tx_delay(bits, &self.radio);
        if !self.is_alive(to) {
            return TxOutcome {
                sent: true,
                delivered: false,
            };
        }
        self.charge(ev, to, radio::rx_cost(bits, &self.radio), EnergyCause::Rx);
        self.note_contact(from, to);
        TxOutcome {
            sent: true,
            delivered: true,
        }
    }

    /// One control broadcast to a recipient set: a single transmission sized
    /// to reach the farthest live recipient, one receive charge per live
    /// recipient. A broadcast with nobody left to hear it is skipped
    /// entirely. Returns false when the sender is dead.
    pub fn broadcast_ctrl(&mut self, ev: &mut RoundEvents, from: NodeId, to: &[NodeId]) -> bool {
        if !self.is_alive(from) {
            return false;
        }
        let bits = self.radio.ctrl_bits;
        let from_pos = self.nodes[from as usize].pos;
        let mut reach = 0.0f64;
        let mut heard = false;
        for &id in to.iter().filter(|&&id| id != from && self.is_alive(id)) {
            reach = reach.max(distance(from_pos, self.nodes[id as usize].pos));
            heard = true;
        }
        if !heard {
            return true;
        }
        self.charge(
            ev,
            from,
            radio::tx_cost(bits, reach, &self.radio),
            EnergyCause::TxCtrl,
        );
        ev.elapsed_s += radio::tx_delay(bits, &self.radio);
        for &id in to {
            if id == from || !self.is_alive(id) {
                continue;
            }
            self.charge(ev, id, radio::rx_cost(bits, &self.radio), EnergyCause::Rx);
            self.note_contact(from, id);
        }
        true
    }

    /// Transmit `bits` to the base station (energy-unconstrained, never
    /// dies). Returns true when the sender was alive to transmit.
    pub fn send_to_bs(
        &mut self,
        ev: &mut RoundEvents,
        from: NodeId,
        bits: u64,
        cause: EnergyCause,
    ) -> bool {
        if !self.is_alive(from) {
            return false;
        }
        let d = distance(self.nodes[from as usize].pos, self.bs);
        self.charge(ev, from, radio::tx_cost(bits, d, &self.radio), cause);
        ev.elapsed_s += radio::tx_delay(bits, &self.radio);
        true
    }
}

/// Behavioral contract shared by all protocols: a setup phase that forms
/// clusters and heads, a steady-state round that moves sensed data upward,
/// and an end-of-round maintenance hook (head rotation or periodic re-setup).
pub trait Protocol {
    fn name(&self) -> &'static str;

    /// Form clusters and assign heads, charging all control traffic.
    fn setup(&mut self, net: &mut Network, ev: &mut RoundEvents, round: u32, rng: &mut ChaCha8Rng);

    /// One steady-state data round. `readings[id]` is the value node `id`
    /// sensed this round; dead nodes are never mutated.
    fn steady_round(&mut self, net: &mut Network, ev: &mut RoundEvents, readings: &[f64], round: u32);

    /// End-of-round maintenance, evaluated after metrics are appended.
    fn maybe_rotate(&mut self, net: &mut Network, ev: &mut RoundEvents, round: u32, rng: &mut ChaCha8Rng);
}
