//! Switch topology, flows, and the canonical 3-flow scenarios.
//!
//! The network is hub-and-spoke: user `j` is connected to the switch by
//! link `j` (same position in the two lists), and a flow is an unordered
//! pair of users asking for end-to-end entanglement through the hub.

use crate::error::{Error, Result};
use crate::linkgen::herald_prob;
use serde::{Deserialize, Serialize};

/// How the per-step success probability `p` of a link was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LinkSource {
    /// `p` was supplied directly.
    Direct,
    /// `p = 1 - (1 - pnla)^m` computed from the per-channel success
    /// probability and the multiplexing count.
    Derived { pnla: f64, m: u64 },
}

/// Per-link parameters: heralding success probability for at least one of
/// the multiplexed channels in a time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LinkParamConfig", into = "LinkParamConfig")]
pub struct LinkParam {
    p: f64,
    source: LinkSource,
}

impl LinkParam {
    pub fn direct(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain {
                name: "p",
                value: p,
                range: "[0, 1]",
            });
        }
        Ok(Self {
            p,
            source: LinkSource::Direct,
        })
    }

    /// Build from multiplexed-channel parameters; the stored `p` is exactly
    /// `1 - (1 - pnla)^m`.
    pub fn derived(pnla: f64, m: u64) -> Result<Self> {
        let p = herald_prob(pnla, m)?;
        Ok(Self {
            p,
            source: LinkSource::Derived { pnla, m },
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn source(&self) -> LinkSource {
        self.source
    }
}

/// Serialized form of [`LinkParam`]: either `{"p": 0.6}` or
/// `{"pnla": 0.01, "m": 100}`.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LinkParamConfig {
    Derived { pnla: f64, m: u64 },
    Direct { p: f64 },
}

impl TryFrom<LinkParamConfig> for LinkParam {
    type Error = Error;

    fn try_from(cfg: LinkParamConfig) -> Result<Self> {
        match cfg {
            LinkParamConfig::Direct { p } => LinkParam::direct(p),
            LinkParamConfig::Derived { pnla, m } => LinkParam::derived(pnla, m),
        }
    }
}

impl From<LinkParam> for LinkParamConfig {
    fn from(lp: LinkParam) -> Self {
        match lp.source {
            LinkSource::Direct => LinkParamConfig::Direct { p: lp.p },
            LinkSource::Derived { pnla, m } => LinkParamConfig::Derived { pnla, m },
        }
    }
}

/// One bipartite entanglement flow through the switch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    /// 1-based flow index.
    #[serde(default)]
    pub id: usize,
    /// The two users (by identifier) this flow entangles.
    pub users: (u32, u32),
    /// Success probability of the entanglement swap for this flow.
    pub q: f64,
    /// Reverse coherent information per served request, in ebits. Supplied
    /// externally; used only to scale request rates into entanglement rates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rci: Option<f64>,
}

impl FlowSpec {
    pub fn new(id: usize, a: u32, b: u32, q: f64) -> Self {
        Self {
            id,
            users: (a, b),
            q,
            rci: None,
        }
    }
}

/// A hub-and-spoke switch topology. `links[j]` connects `users[j]` to the
/// switch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchTopology {
    pub users: Vec<u32>,
    pub links: Vec<LinkParam>,
    pub flows: Vec<FlowSpec>,
}

/// A single validation failure. Violations are data, not exceptions: a
/// topology may hold any shape and [`SwitchTopology::validate`] reports
/// everything wrong with it at once.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// `users` and `links` differ in length.
    LinkCountMismatch { users: usize, links: usize },
    /// A user identifier appears twice in `users`.
    DuplicateUser { user: u32 },
    /// A flow references a user not in `users`.
    UnknownUser { flow: usize, user: u32 },
    /// A flow's two users are not distinct.
    FlowUsersNotDistinct { flow: usize },
    /// Two flows request the same user pair.
    DuplicateFlow { first: usize, second: usize },
    /// A flow's swap probability is outside (0, 1].
    InvalidSwapProbability { flow: usize, q: f64 },
    /// A flow's rci is negative.
    NegativeRci { flow: usize, rci: f64 },
    /// Flow ids are not 1..=K in order.
    BadFlowId { position: usize, id: usize },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::LinkCountMismatch { users, links } => {
                write!(f, "one link per user required: {users} users, {links} links")
            }
            Violation::DuplicateUser { user } => write!(f, "duplicate user {user}"),
            Violation::UnknownUser { flow, user } => {
                write!(f, "flow {flow} references unknown user {user}")
            }
            Violation::FlowUsersNotDistinct { flow } => {
                write!(f, "flow {flow} users must be distinct")
            }
            Violation::DuplicateFlow { first, second } => {
                write!(f, "flows {first} and {second} share the same user set")
            }
            Violation::InvalidSwapProbability { flow, q } => {
                write!(f, "flow {flow} swap probability {q} outside (0, 1]")
            }
            Violation::NegativeRci { flow, rci } => {
                write!(f, "flow {flow} rci {rci} is negative")
            }
            Violation::BadFlowId { position, id } => {
                write!(f, "flow at position {position} has id {id}, expected {}", position + 1)
            }
        }
    }
}

impl SwitchTopology {
    /// Check every structural invariant; an empty list means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.users.len() != self.links.len() {
            out.push(Violation::LinkCountMismatch {
                users: self.users.len(),
                links: self.links.len(),
            });
        }
        for (i, u) in self.users.iter().enumerate() {
            if self.users[..i].contains(u) {
                out.push(Violation::DuplicateUser { user: *u });
            }
        }
        for (pos, flow) in self.flows.iter().enumerate() {
            let id = pos + 1;
            if flow.id != id {
                out.push(Violation::BadFlowId {
                    position: pos,
                    id: flow.id,
                });
            }
            let (a, b) = flow.users;
            if a == b {
                out.push(Violation::FlowUsersNotDistinct { flow: id });
            }
            for u in [a, b] {
                if !self.users.contains(&u) {
                    out.push(Violation::UnknownUser { flow: id, user: u });
                }
            }
            if !(flow.q > 0.0 && flow.q <= 1.0) {
                out.push(Violation::InvalidSwapProbability { flow: id, q: flow.q });
            }
            if let Some(rci) = flow.rci {
                if rci < 0.0 {
                    out.push(Violation::NegativeRci { flow: id, rci });
                }
            }
            for (prev, other) in self.flows[..pos].iter().enumerate() {
                let (c, d) = other.users;
                if (a, b) == (c, d) || (a, b) == (d, c) {
                    out.push(Violation::DuplicateFlow {
                        first: prev + 1,
                        second: id,
                    });
                }
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    pub fn n_flows(&self) -> usize {
        self.flows.len()
    }

    pub fn n_links(&self) -> usize {
        self.links.len()
    }

    /// Position of a user identifier, which is also its link index.
    pub fn user_index(&self, user: u32) -> Option<usize> {
        self.users.iter().position(|&u| u == user)
    }

    /// Link indices of the two links a flow needs.
    pub fn flow_links(&self, flow: usize) -> (usize, usize) {
        let (a, b) = self.flows[flow].users;
        (
            self.user_index(a).expect("valid topology"),
            self.user_index(b).expect("valid topology"),
        )
    }

    pub fn link_probs(&self) -> Vec<f64> {
        self.links.iter().map(|l| l.p()).collect()
    }

    pub fn swap_probs(&self) -> Vec<f64> {
        self.flows.iter().map(|f| f.q).collect()
    }

    /// Contention adjacency over flows: `i` and `m` are adjacent iff they
    /// share a user. Symmetric and irreflexive.
    pub fn contention_graph(&self) -> ContentionGraph {
        let k = self.flows.len();
        let mut adj = vec![0u32; k];
        for i in 0..k {
            let (a, b) = self.flows[i].users;
            for m in (i + 1)..k {
                let (c, d) = self.flows[m].users;
                if a == c || a == d || b == c || b == d {
                    adj[i] |= 1 << m;
                    adj[m] |= 1 << i;
                }
            }
        }
        ContentionGraph { adj }
    }
}

/// Flow-contention adjacency, stored as one bitmask per flow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContentionGraph {
    adj: Vec<u32>,
}

impl ContentionGraph {
    pub fn n_flows(&self) -> usize {
        self.adj.len()
    }

    pub fn adjacent(&self, i: usize, m: usize) -> bool {
        self.adj[i] & (1 << m) != 0
    }

    /// Bitmask of flows contending with flow `i`.
    pub fn neighbors(&self, i: usize) -> u32 {
        self.adj[i]
    }

    /// True iff every pair of flows in `subset` (a bitmask) contends.
    pub fn pairwise_contending(&self, subset: u32) -> bool {
        let k = self.adj.len();
        for i in 0..k {
            if subset & (1 << i) == 0 {
                continue;
            }
            for m in (i + 1)..k {
                if subset & (1 << m) != 0 && !self.adjacent(i, m) {
                    return false;
                }
            }
        }
        true
    }
}

/// The three canonical 3-flow layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioTag {
    /// 3 users; flows (1,2), (2,3), (1,3): all pairwise contending.
    A,
    /// 4 users; flows (1,2), (2,3), (3,4): flows 1 and 3 disjoint, flow 2
    /// contends with both.
    B,
    /// 6 users; flows (1,2), (3,4), (5,6): fully disjoint.
    C,
}

impl std::str::FromStr for ScenarioTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(ScenarioTag::A),
            "b" => Ok(ScenarioTag::B),
            "c" => Ok(ScenarioTag::C),
            other => Err(Error::Config(format!("unknown scenario tag '{other}'"))),
        }
    }
}

/// A canonical scenario together with its generated topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub tag: ScenarioTag,
    pub topology: SwitchTopology,
}

/// Build one of the canonical scenarios with uniform link `p` and uniform
/// swap `q`.
pub fn build_scenario(tag: ScenarioTag, p: f64, q: f64) -> Result<Scenario> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain {
            name: "q",
            value: q,
            range: "[0, 1]",
        });
    }
    let pairs: &[(u32, u32)] = match tag {
        ScenarioTag::A => &[(1, 2), (2, 3), (1, 3)],
        ScenarioTag::B => &[(1, 2), (2, 3), (3, 4)],
        ScenarioTag::C => &[(1, 2), (3, 4), (5, 6)],
    };
    let n_users = match tag {
        ScenarioTag::A => 3,
        ScenarioTag::B => 4,
        ScenarioTag::C => 6,
    };
    let users: Vec<u32> = (1..=n_users).collect();
    let links = users
        .iter()
        .map(|_| LinkParam::direct(p))
        .collect::<Result<Vec<_>>>()?;
    let flows = pairs
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| FlowSpec::new(i + 1, a, b, q))
        .collect();
    Ok(Scenario {
        tag,
        topology: SwitchTopology { users, links, flows },
    })
}

/// On-disk topology description: either a full `users`/`links`/`flows`
/// object or the `scenario` shorthand.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TopologyConfig {
    Shorthand { scenario: ScenarioShorthand },
    Explicit(SwitchTopology),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioShorthand {
    pub tag: String,
    pub p: f64,
    pub q: f64,
}

impl TopologyConfig {
    pub fn from_json(text: &str) -> Result<SwitchTopology> {
        let cfg: TopologyConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut topo = match cfg {
            TopologyConfig::Shorthand { scenario } => {
                build_scenario(scenario.tag.parse()?, scenario.p, scenario.q)?.topology
            }
            TopologyConfig::Explicit(t) => t,
        };
        // Flow ids may be omitted in config files; assign positions.
        if topo.flows.iter().all(|f| f.id == 0) {
            for (i, f) in topo.flows.iter_mut().enumerate() {
                f.id = i + 1;
            }
        }
        let violations = topo.validate();
        if !violations.is_empty() {
            let msgs: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err(Error::InvalidTopology(msgs.join("; ")));
        }
        Ok(topo)
    }

    pub fn from_path(path: &std::path::Path) -> Result<SwitchTopology> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn scenario_a_structure() {
        let s = build_scenario(ScenarioTag::A, 0.632, 1.0).unwrap();
        assert_eq!(s.topology.users.len(), 3);
        assert_eq!(s.topology.links.len(), 3);
        assert_eq!(s.topology.flows.len(), 3);
        for l in &s.topology.links {
            assert_eq!(l.p(), 0.632);
        }
        for f in &s.topology.flows {
            assert_eq!(f.q, 1.0);
        }
        assert!(s.topology.is_valid());
    }

    #[test]
    fn scenario_c_flows_pairwise_disjoint() {
        let s = build_scenario(ScenarioTag::C, 1.0, 1.0).unwrap();
        assert_eq!(s.topology.links.len(), 6);
        let g = s.topology.contention_graph();
        for i in 0..3 {
            assert_eq!(g.neighbors(i), 0);
        }
    }

    #[test]
    fn scenario_b_contention_pattern() {
        let s = build_scenario(ScenarioTag::B, 0.5, 1.0).unwrap();
        let g = s.topology.contention_graph();
        // f1 and f3 share no user; f2 shares a user with each.
        assert!(!g.adjacent(0, 2));
        assert!(g.adjacent(0, 1));
        assert!(g.adjacent(1, 2));
    }

    #[test]
    fn scenario_a_contention_complete() {
        let s = build_scenario(ScenarioTag::A, 0.3, 1.0).unwrap();
        let g = s.topology.contention_graph();
        for i in 0..3 {
            for m in 0..3 {
                assert_eq!(g.adjacent(i, m), i != m);
            }
        }
        assert!(g.pairwise_contending(0b111));
    }

    #[test]
    fn invalid_probability_rejected() {
        assert!(build_scenario(ScenarioTag::A, 1.5, 1.0).is_err());
        assert!(build_scenario(ScenarioTag::A, 0.5, -0.1).is_err());
        assert!(LinkParam::direct(-0.2).is_err());
    }

    #[test]
    fn validate_reports_self_loop_flow() {
        let mut topo = build_scenario(ScenarioTag::A, 0.5, 1.0).unwrap().topology;
        topo.flows[0].users = (1, 1);
        let v = topo.validate();
        assert!(v.contains(&Violation::FlowUsersNotDistinct { flow: 1 }));
    }

    #[test]
    fn validate_reports_link_count_mismatch() {
        let mut topo = build_scenario(ScenarioTag::A, 0.5, 1.0).unwrap().topology;
        topo.links.pop();
        let v = topo.validate();
        assert!(v
            .iter()
            .any(|x| matches!(x, Violation::LinkCountMismatch { users: 3, links: 2 })));
    }

    #[test]
    fn validate_reports_duplicate_flows() {
        let mut topo = build_scenario(ScenarioTag::A, 0.5, 1.0).unwrap().topology;
        topo.flows[2].users = (3, 2); // same set as flow 2, reversed
        let v = topo.validate();
        assert!(v
            .iter()
            .any(|x| matches!(x, Violation::DuplicateFlow { first: 2, second: 3 })));
    }

    #[test]
    fn derived_link_param_matches_herald_prob() {
        let lp = LinkParam::derived(0.01, 100).unwrap();
        assert_eq!(lp.p(), herald_prob(0.01, 100).unwrap());
    }

    #[test]
    fn config_shorthand_roundtrip() {
        let topo =
            TopologyConfig::from_json(r#"{"scenario": {"tag": "b", "p": 0.5, "q": 1.0}}"#).unwrap();
        assert_eq!(topo.flows.len(), 3);
        assert_eq!(topo.users.len(), 4);
    }

    #[test]
    fn config_explicit_with_derived_links() {
        let text = r#"{
            "users": [1, 2],
            "links": [{"p": 0.7}, {"pnla": 0.5, "m": 2}],
            "flows": [{"users": [1, 2], "q": 0.9, "rci": 1.3}]
        }"#;
        let topo = TopologyConfig::from_json(text).unwrap();
        assert_eq!(topo.links[0].p(), 0.7);
        assert_eq!(topo.links[1].p(), 0.75);
        assert_eq!(topo.flows[0].id, 1);
        assert_eq!(topo.flows[0].rci, Some(1.3));
    }

    #[test]
    fn config_rejects_invalid_topology() {
        let text = r#"{
            "users": [1, 2, 3],
            "links": [{"p": 0.7}, {"p": 0.7}, {"p": 0.7}],
            "flows": [{"users": [1, 1], "q": 1.0}]
        }"#;
        assert!(TopologyConfig::from_json(text).is_err());
    }

    proptest! {
        #[test]
        fn contention_graph_symmetric_irreflexive(
            tag in prop_oneof![Just(ScenarioTag::A), Just(ScenarioTag::B), Just(ScenarioTag::C)],
            p in 0.0f64..=1.0,
        ) {
            let topo = build_scenario(tag, p, 1.0).unwrap().topology;
            let g = topo.contention_graph();
            for i in 0..g.n_flows() {
                prop_assert!(!g.adjacent(i, i));
                for m in 0..g.n_flows() {
                    prop_assert_eq!(g.adjacent(i, m), g.adjacent(m, i));
                }
            }
        }

        #[test]
        fn built_scenarios_validate(
            tag in prop_oneof![Just(ScenarioTag::A), Just(ScenarioTag::B), Just(ScenarioTag::C)],
            p in 0.0f64..=1.0,
            q in 0.001f64..=1.0,
        ) {
            let s = build_scenario(tag, p, q).unwrap();
            prop_assert!(s.topology.validate().is_empty());
        }

        #[test]
        fn derived_p_monotone(pnla in 0.01f64..0.99, m in 1u64..200) {
            let p1 = LinkParam::derived(pnla, m).unwrap().p();
            let p2 = LinkParam::derived(pnla, m + 1).unwrap().p();
            let p3 = LinkParam::derived((pnla + 0.01).min(1.0), m).unwrap().p();
            prop_assert!(p2 >= p1);
            prop_assert!(p3 >= p1);
        }
    }
}
