//! Matching enumeration and max-weight matching selection.

use crate::error::{Error, Result};
use crate::linkgen::LinkSnapshot;
use crate::model::SwitchTopology;
use crate::rng::{mix_words, SplitMix64};

/// Hard cap on flow count: matchings are enumerated exhaustively over 2^K.
pub const MAX_FLOWS: usize = 20;

/// A feasible schedule: a set of flows such that no user's link is used
/// twice. Flow `i` is bit `i` of the mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Matching {
    mask: u32,
    n_flows: usize,
}

impl Matching {
    pub fn empty(n_flows: usize) -> Self {
        Self { mask: 0, n_flows }
    }

    pub fn mask(&self) -> u32 {
        self.mask
    }

    pub fn n_flows(&self) -> usize {
        self.n_flows
    }

    pub fn scheduled(&self, flow: usize) -> bool {
        self.mask & (1 << flow) != 0
    }

    pub fn len(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }

    /// The binary vector `[r_1, ..., r_K]`.
    pub fn to_vec(&self) -> Vec<u8> {
        (0..self.n_flows).map(|i| self.scheduled(i) as u8).collect()
    }

    pub fn iter_scheduled(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_flows).filter(|&i| self.scheduled(i))
    }
}

/// Whether a flow needs merely both links up, or both links up with
/// opposite orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ServiceRule {
    AnyOrientation,
    OppositeParity,
}

impl std::str::FromStr for ServiceRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "any" | "any_orientation" => Ok(ServiceRule::AnyOrientation),
            "parity" | "opposite_parity" => Ok(ServiceRule::OppositeParity),
            other => Err(Error::Config(format!("unknown service rule '{other}'"))),
        }
    }
}

/// How max-weight resolves ties between equally weighted matchings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum TieBreak {
    /// Lexicographically smallest maximizer (smallest mask). The default.
    LowestIndex,
    /// Uniform pick among the tied maximizers, keyed by the salt; the same
    /// salt always picks the same matching.
    SeededRandom { salt: u64 },
}

/// Check a mask against the per-user constraint: each user's link serves at
/// most one scheduled flow.
fn mask_is_matching(topology: &SwitchTopology, mask: u32) -> bool {
    let mut used = 0u64; // bit per link
    for i in 0..topology.n_flows() {
        if mask & (1 << i) == 0 {
            continue;
        }
        let (a, b) = topology.flow_links(i);
        let bits = (1u64 << a) | (1u64 << b);
        if used & bits != 0 {
            return false;
        }
        used |= bits;
    }
    true
}

/// All matchings of a topology, in increasing mask order (so the all-zero
/// matching comes first and the order is deterministic).
pub fn enumerate_matchings(topology: &SwitchTopology) -> Result<Vec<Matching>> {
    let k = topology.n_flows();
    if k > MAX_FLOWS {
        return Err(Error::CapacityExceeded {
            what: "flows",
            size: k,
            cap: MAX_FLOWS,
        });
    }
    let mut out = Vec::new();
    for mask in 0..(1u32 << k) {
        if mask_is_matching(topology, mask) {
            out.push(Matching { mask, n_flows: k });
        }
    }
    Ok(out)
}

/// Whether a flow can be served under the given snapshot and rule.
pub fn serviceable(
    topology: &SwitchTopology,
    flow: usize,
    snapshot: &LinkSnapshot,
    rule: ServiceRule,
) -> bool {
    let (a, b) = topology.flow_links(flow);
    if !(snapshot.t[a] && snapshot.t[b]) {
        return false;
    }
    match rule {
        ServiceRule::AnyOrientation => true,
        ServiceRule::OppositeParity => snapshot.o[a] != snapshot.o[b],
    }
}

/// Bitmask of serviceable flows.
pub fn serviceable_mask(
    topology: &SwitchTopology,
    snapshot: &LinkSnapshot,
    rule: ServiceRule,
) -> u32 {
    let mut mask = 0u32;
    for i in 0..topology.n_flows() {
        if serviceable(topology, i, snapshot, rule) {
            mask |= 1 << i;
        }
    }
    mask
}

/// Weight of a matching: the sum of `q_i * Q_i` over scheduled flows,
/// accumulated in increasing flow order.
pub fn matching_weight(mask: u32, weights: &[f64]) -> f64 {
    let mut total = 0.0;
    for (i, w) in weights.iter().enumerate() {
        if mask & (1 << i) != 0 {
            total += w;
        }
    }
    total
}

/// Select the max-weight matching for the current queues and link states.
///
/// The objective for a matching `r` is `sum_i r_i * q_i * Q_i * [serviceable_i]`.
/// The returned matching never schedules a flow contributing zero weight
/// (unserviceable or empty queue), so a scheduled flow always means a swap
/// attempt on a real request.
pub fn max_weight(
    topology: &SwitchTopology,
    snapshot: &LinkSnapshot,
    queues: &[u64],
    rule: ServiceRule,
    tie_break: TieBreak,
) -> Result<Matching> {
    let matchings = enumerate_matchings(topology)?;
    Ok(max_weight_with(
        topology, &matchings, snapshot, queues, rule, tie_break,
    ))
}

/// [`max_weight`] with the matchings precomputed; the hot path for the
/// simulator.
pub fn max_weight_with(
    topology: &SwitchTopology,
    matchings: &[Matching],
    snapshot: &LinkSnapshot,
    queues: &[u64],
    rule: ServiceRule,
    tie_break: TieBreak,
) -> Matching {
    let k = topology.n_flows();
    debug_assert_eq!(queues.len(), k);
    let serv = serviceable_mask(topology, snapshot, rule);
    let mut weights = vec![0.0f64; k];
    let mut positive = 0u32;
    for i in 0..k {
        if serv & (1 << i) != 0 && queues[i] > 0 {
            let w = topology.flows[i].q * queues[i] as f64;
            if w > 0.0 {
                weights[i] = w;
                positive |= 1 << i;
            }
        }
    }

    let mut best_weight = 0.0f64;
    let mut tied: Vec<Matching> = vec![Matching::empty(k)];
    for m in matchings {
        // Restricting to positive-weight flows canonicalizes away zero-weight
        // padding without changing the achievable maximum.
        if m.mask & !positive != 0 {
            continue;
        }
        let w = matching_weight(m.mask, &weights);
        if w > best_weight {
            best_weight = w;
            tied.clear();
            tied.push(*m);
        } else if w == best_weight && m.mask != 0 {
            tied.push(*m);
        }
    }

    match tie_break {
        TieBreak::LowestIndex => tied[0], // enumeration order is ascending mask
        TieBreak::SeededRandom { salt } => {
            if tied.len() == 1 {
                tied[0]
            } else {
                let pick = SplitMix64::new(mix_words(salt, &[tied.len() as u64])).next();
                tied[(pick % tied.len() as u64) as usize]
            }
        }
    }
}
