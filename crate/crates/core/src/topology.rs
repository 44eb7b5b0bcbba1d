//! Node deployment, plane geometry, and the proximity partitioning used by
//! base-station-driven cluster formation.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SimError};

pub type NodeId = u32;

// Per-function ChaCha streams so callers can reuse one scenario seed without
// correlating draws across deployment and partition initialization.
const DEPLOY_STREAM: u64 = 0x10;
const PARTITION_STREAM: u64 = 0x11;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

/// Euclidean distance between two positions.
pub fn distance(a: Position, b: Position) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    (dx * dx + dy * dy).sqrt()
}

/// Role a node currently plays in its cluster, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Member,
    /// Single head of a cluster (election-based protocols).
    ClusterHead,
    /// In-cluster aggregation head, near the cluster centre.
    DataHead,
    /// Upstream forwarding head, nearest the base station in its cluster.
    RoutingHead,
    /// The routing head relaying every cluster's traffic to the base station.
    PrincipalHead,
}

/// One sensor node: position, battery, role, and the per-protocol sensing
/// state (last transmitted value, silent-round counter) plus the distance
/// table of peers it has actually communicated with.
#[derive(Debug, Clone)]
pub struct Node {
    pub id: NodeId,
    pub pos: Position,
    pub energy: f64,
    pub initial_energy: f64,
    pub alive: bool,
    pub role: Role,
    pub cluster: Option<u32>,
    /// Last value this node actually transmitted (threshold-gated protocols).
    pub last_sent: Option<f64>,
    /// Rounds elapsed since this node last transmitted (count-time forcing).
    pub rounds_since_tx: u32,
    /// Distances to peers this node has exchanged traffic with.
    pub known_distances: BTreeMap<NodeId, f64>,
}

impl Node {
    pub fn new(id: NodeId, pos: Position, initial_energy: f64) -> Self {
        Node {
            id,
            pos,
            energy: initial_energy,
            initial_energy,
            alive: true,
            role: Role::Member,
            cluster: None,
            last_sent: None,
            rounds_since_tx: 0,
            known_distances: BTreeMap::new(),
        }
    }

    /// Remaining battery as a fraction of the initial charge.
    pub fn energy_fraction(&self) -> f64 {
        if self.initial_energy > 0.0 {
            self.energy / self.initial_energy
        } else {
            0.0
        }
    }
}

/// A proximity cluster: member ids (sorted), and the final centroid of the
/// partition that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub id: u32,
    pub members: Vec<NodeId>,
    pub centroid: Position,
}

/// Deploy `n` nodes uniformly at random over a `width` x `height` region,
/// each with a full battery. Identical arguments yield an identical list.
pub fn deploy(n: u32, width: f64, height: f64, initial_energy: f64, seed: u64) -> Vec<Node> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(DEPLOY_STREAM);
    (0..n)
        .map(|id| {
            let x = rng.gen_range(0.0..=width);
            let y = rng.gen_range(0.0..=height);
            Node::new(id, Position { x, y }, initial_energy)
        })
        .collect()
}

/// Arithmetic mean of a non-empty set of positions.
pub fn centroid(positions: &[Position]) -> Position {
    assert!(!positions.is_empty(), "centroid of empty set");
    let n = positions.len() as f64;
    let (sx, sy) = positions
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    Position { x: sx / n, y: sy / n }
}

/// Partition the alive nodes into `k` non-empty proximity clusters by Lloyd
/// iteration, seeded with `k` distinct nodes drawn deterministically.
///
/// Every alive node lands in exactly one cluster; each cluster carries its
/// final centroid. Ties (nearest centroid, farthest node) break toward the
/// lower index so the result is a pure function of `(nodes, k, seed)`.
pub fn partition(nodes: &[Node], k: usize, seed: u64) -> Result<Vec<Cluster>> {
    let alive: Vec<&Node> = nodes.iter().filter(|n| n.alive).collect();
    if k == 0 {
        return Err(SimError::config("cluster count must be at least 1"));
    }
    if k > alive.len() {
        return Err(SimError::config(format!(
            "cluster count {} exceeds alive node count {}",
            k,
            alive.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(PARTITION_STREAM);
    let mut idx: Vec<usize> = (0..alive.len()).collect();
    idx.shuffle(&mut rng);
    let mut centroids: Vec<Position> = idx[..k].iter().map(|&i| alive[i].pos).collect();

    let mut assignment: Vec<usize> = vec![0; alive.len()];
    let mut prev_sse = f64::INFINITY;
    for _ in 0..200 {
        // Assign each node to its nearest centroid; lower index wins ties.
        let mut changed = false;
        for (i, node) in alive.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = distance(node.pos, centroids[0]);
            for (c, centre) in centroids.iter().enumerate().skip(1) {
                let d = distance(node.pos, *centre);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
        }

        // Repair empty clusters: move in the node farthest from its current
        // centroid, never draining a cluster down to zero members.
        loop {
            let mut sizes = vec![0usize; k];
            for &a in &assignment {
                sizes[a] += 1;
            }
            let Some(empty) = sizes.iter().position(|&s| s == 0) else {
                break;
            };
            let mut far: Option<(f64, usize)> = None;
            for (i, node) in alive.iter().enumerate() {
                if sizes[assignment[i]] < 2 {
                    continue;
                }
                let d = distance(node.pos, centroids[assignment[i]]);
                let better = match far {
                    None => true,
                    Some((fd, fi)) => d > fd || (d == fd && i < fi),
                };
                if better {
                    far = Some((d, i));
                }
            }
            let (_, i) = far.expect("k <= alive count guarantees a donor");
            assignment[i] = empty;
            centroids[empty] = alive[i].pos;
            changed = true;
        }

        // Recompute centroids.
        let mut sums = vec![(0.0f64, 0.0f64, 0usize); k];
        for (i, node) in alive.iter().enumerate() {
            let s = &mut sums[assignment[i]];
            s.0 += node.pos.x;
            s.1 += node.pos.y;
            s.2 += 1;
        }
        for (c, (sx, sy, count)) in sums.into_iter().enumerate() {
            centroids[c] = Position {
                x: sx / count as f64,
                y: sy / count as f64,
            };
        }

        let sse: f64 = alive
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let d = distance(n.pos, centroids[assignment[i]]);
                d * d
            })
            .sum();
        debug_assert!(
            sse <= prev_sse * (1.0 + 1e-12) + 1e-12,
            "within-cluster SSE increased: {prev_sse} -> {sse}"
        );
        prev_sse = sse;

        if !changed {
            break;
        }
    }

    let mut clusters: Vec<Cluster> = (0..k)
        .map(|c| Cluster {
            id: c as u32,
            members: Vec::new(),
            centroid: centroids[c],
        })
        .collect();
    for (i, node) in alive.iter().enumerate() {
        clusters[assignment[i]].members.push(node.id);
    }
    for cluster in &mut clusters {
        cluster.members.sort_unstable();
        debug_assert!(!cluster.members.is_empty());
    }
    Ok(clusters)
}
