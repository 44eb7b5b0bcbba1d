//! First-order radio energy model: transmit/receive/aggregation costs,
//! serialization delay, and the per-event energy ledger.

use crate::topology::{Node, NodeId, Role};

/// Energy-model coefficients, packet sizes and link rate shared by every
/// protocol in a run.
///
/// Defaults follow the usual first-order radio model conventions for this
/// class of simulation: 50 nJ/bit electronics, 100 pJ/bit/m² amplifier,
/// 2000-bit data packets, 200-bit control packets, 10 kbit/s links.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioParams {
    /// Electronics energy per bit for both transmit and receive, J/bit.
    pub e_elec: f64,
    /// Free-space amplifier coefficient, J/bit/m².
    pub eps_amp: f64,
    /// Data packet size, bits.
    pub data_bits: u64,
    /// Control packet size (advertisements, joins, schedules), bits.
    pub ctrl_bits: u64,
    /// Link rate between peers, bits/s.
    pub bandwidth: f64,
    /// Aggregation cost per bit per input signal, J/bit/signal.
    /// Zero by default: only TX/RX are charged.
    pub e_agg: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            e_elec: 50e-9,
            eps_amp: 100e-12,
            data_bits: 2000,
            ctrl_bits: 200,
            bandwidth: 10_000.0,
            e_agg: 0.0,
        }
    }
}

/// What an energy ledger entry was spent on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyCause {
    TxData,
    TxCtrl,
    Rx,
    Aggregate,
}

/// One energy ledger entry: which node spent how many joules, when and why.
/// The sum of all entries in a run equals the total energy drained from the
/// nodes, which the engine audits against per-node battery drops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyLedgerEntry {
    pub node: NodeId,
    pub round: u32,
    pub cause: EnergyCause,
    pub joules: f64,
}

/// Energy to transmit `bits` over `distance_m` meters:
/// electronics per bit plus amplifier per bit scaled by distance squared.
pub fn tx_cost(bits: u64, distance_m: f64, radio: &RadioParams) -> f64 {
    let bits = bits as f64;
    radio.e_elec * bits + radio.eps_amp * bits * distance_m * distance_m
}

/// Energy to receive `bits`: electronics only.
pub fn rx_cost(bits: u64, radio: &RadioParams) -> f64 {
    radio.e_elec * bits as f64
}

/// Energy to fuse `n_inputs` received signals into one `bits`-sized packet.
pub fn aggregate_cost(bits: u64, n_inputs: u64, radio: &RadioParams) -> f64 {
    radio.e_agg * bits as f64 * n_inputs as f64
}

/// Serialization delay of a `bits`-sized packet on the shared link rate.
pub fn tx_delay(bits: u64, radio: &RadioParams) -> f64 {
    bits as f64 / radio.bandwidth
}

/// Outcome of deducting energy from a node's battery.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deduction {
    /// Joules actually drained (the requested cost clamped to the charge left).
    pub spent: f64,
    /// True exactly when the post-deduction energy fell below the
    /// operational floor.
    pub died: bool,
}

/// Drain `joules` from a live node's battery, clamping at zero.
///
/// The node dies when its remaining energy drops strictly below `floor_j`
/// (the operational floor, e.g. 5% of initial energy). Dead nodes never
/// spend or receive again; calling this on a dead node is a contract
/// violation.
pub fn deduct(node: &mut Node, joules: f64, floor_j: f64) -> Deduction {
    debug_assert!(node.alive, "deduct on dead node {}", node.id);
    debug_assert!(joules >= 0.0);
    let spent = joules.min(node.energy);
    node.energy -= spent;
    let died = node.energy < floor_j;
    if died {
        node.alive = false;
        node.role = Role::Member;
    }
    Deduction { spent, died }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Position;
    use proptest::prelude::*;

    fn radio() -> RadioParams {
        RadioParams::default()
    }

    fn assert_rel(actual: f64, expected: f64, rel: f64) {
        if expected == 0.0 {
            assert_eq!(actual, 0.0, "expected exactly zero, got {actual}");
        } else {
            let err = ((actual - expected) / expected).abs();
            assert!(err <= rel, "got {actual}, want {expected} (rel err {err})");
        }
    }

    #[test]
    fn tx_cost_hand_values() {
        let r = radio();
        assert_eq!(tx_cost(0, 100.0, &r), 0.0);
        assert_rel(tx_cost(2000, 0.0, &r), 1.0e-4, 1e-15);
        assert_rel(tx_cost(2000, 100.0, &r), 2.1e-3, 1e-15);
    }

    #[test]
    fn rx_cost_hand_values() {
        let r = radio();
        assert_eq!(rx_cost(0, &r), 0.0);
        assert_rel(rx_cost(2000, &r), 1.0e-4, 1e-15);
        assert_rel(rx_cost(1, &r), 5.0e-8, 1e-15);
    }

    #[test]
    fn aggregate_cost_hand_values() {
        let r = radio();
        assert_eq!(aggregate_cost(2000, 5, &r), 0.0); // e_agg defaults to 0
        let mut r2 = r;
        r2.e_agg = 5e-9;
        assert_eq!(aggregate_cost(2000, 0, &r2), 0.0);
        assert_rel(aggregate_cost(2000, 5, &r2), 5e-5, 1e-15);
    }

    #[test]
    fn tx_delay_hand_values() {
        let r = radio();
        assert_rel(tx_delay(2000, &r), 0.2, 1e-15);
        assert_eq!(tx_delay(0, &r), 0.0);
        assert_rel(tx_delay(10_000, &r), 1.0, 1e-15);
    }

    #[test]
    fn tx_at_zero_distance_equals_rx() {
        let r = radio();
        for bits in [0u64, 1, 7, 200, 2000, 1_000_000] {
            assert_eq!(tx_cost(bits, 0.0, &r), rx_cost(bits, &r));
        }
    }

    fn test_node(energy: f64) -> Node {
        let mut n = Node::new(0, Position { x: 0.0, y: 0.0 }, 2.0);
        n.energy = energy;
        n
    }

    #[test]
    fn deduct_leaves_live_node_above_floor() {
        let mut n = test_node(1.0);
        let d = deduct(&mut n, 0.3, 0.1);
        assert!((n.energy - 0.7).abs() < 1e-15);
        assert!(!d.died);
        assert!(n.alive);
    }

    #[test]
    fn deduct_kills_below_floor() {
        let mut n = test_node(0.35);
        let d = deduct(&mut n, 0.3, 0.1);
        assert!((n.energy - 0.05).abs() < 1e-15);
        assert!(d.died);
        assert!(!n.alive);
        assert!((d.spent - 0.3).abs() < 1e-15);
    }

    #[test]
    fn deduct_clamps_at_zero_and_records_actual_drain() {
        let mut n = test_node(0.2);
        let d = deduct(&mut n, 0.5, 0.1);
        assert_eq!(n.energy, 0.0);
        assert!(d.died);
        assert!((d.spent - 0.2).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn tx_cost_monotone_in_bits_and_distance(
            a in 0u64..100_000, b in 0u64..100_000,
            d1 in 0.0f64..500.0, d2 in 0.0f64..500.0,
        ) {
            let r = radio();
            let (lo_b, hi_b) = (a.min(b), a.max(b));
            let (lo_d, hi_d) = (d1.min(d2), d1.max(d2));
            prop_assert!(tx_cost(lo_b, lo_d, &r) <= tx_cost(hi_b, lo_d, &r));
            prop_assert!(tx_cost(lo_b, lo_d, &r) <= tx_cost(lo_b, hi_d, &r));
            prop_assert!(rx_cost(lo_b, &r) <= rx_cost(hi_b, &r));
        }

        #[test]
        fn tx_zero_distance_matches_rx(bits in 0u64..1_000_000) {
            let r = radio();
            prop_assert_eq!(tx_cost(bits, 0.0, &r), rx_cost(bits, &r));
        }
    }
}
