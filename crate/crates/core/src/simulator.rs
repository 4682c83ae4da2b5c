//! The discrete-time switch loop: arrivals, link sampling, max-weight
//! scheduling, swap attempts, queue update.

use crate::error::{Error, Result};
use crate::linkgen::{sample_links, LinkSnapshot, LinkStreams};
use crate::model::SwitchTopology;
use crate::rng::{mix_words, RngStream, StreamDomain};
use crate::scheduler::{
    enumerate_matchings, max_weight_with, serviceable, Matching, ServiceRule, TieBreak,
};
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Request arrival distribution per flow per step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArrivalKind {
    /// One request with probability `lambda`, none otherwise. Requires
    /// `lambda <= 1`.
    Bernoulli,
    /// Poisson-distributed count with mean `lambda`; admits rates above 1.
    Poisson,
}

/// I.i.d. arrival processes with per-flow mean rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalModel {
    pub kind: ArrivalKind,
    pub rates: Vec<f64>,
}

impl ArrivalModel {
    pub fn bernoulli(rates: Vec<f64>) -> Result<Self> {
        let m = Self {
            kind: ArrivalKind::Bernoulli,
            rates,
        };
        m.check()?;
        Ok(m)
    }

    pub fn poisson(rates: Vec<f64>) -> Result<Self> {
        let m = Self {
            kind: ArrivalKind::Poisson,
            rates,
        };
        m.check()?;
        Ok(m)
    }

    pub fn check(&self) -> Result<()> {
        for &r in &self.rates {
            if !(r >= 0.0) {
                return Err(Error::Domain {
                    name: "lambda",
                    value: r,
                    range: "[0, inf)",
                });
            }
            if self.kind == ArrivalKind::Bernoulli && r > 1.0 {
                return Err(Error::Domain {
                    name: "lambda",
                    value: r,
                    range: "[0, 1] for Bernoulli arrivals",
                });
            }
        }
        Ok(())
    }
}

/// Everything a run needs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub topology: SwitchTopology,
    pub arrivals: ArrivalModel,
    pub rule: ServiceRule,
    /// Number of time steps.
    pub horizon: u64,
    pub seed: u64,
    pub tie_break: TieBreak,
    /// Record the scheduled matching of every step in the trace.
    #[serde(default)]
    pub record_schedule: bool,
    /// Record per-request waiting times (arrival-to-service, FIFO).
    #[serde(default)]
    pub record_waits: bool,
}

impl SimConfig {
    pub fn new(
        topology: SwitchTopology,
        arrivals: ArrivalModel,
        rule: ServiceRule,
        horizon: u64,
        seed: u64,
    ) -> Self {
        Self {
            topology,
            arrivals,
            rule,
            horizon,
            seed,
            tie_break: TieBreak::LowestIndex,
            record_schedule: false,
            record_waits: false,
        }
    }

    pub fn check(&self) -> Result<()> {
        if !self.topology.is_valid() {
            let msgs: Vec<String> = self
                .topology
                .validate()
                .iter()
                .map(|v| v.to_string())
                .collect();
            return Err(Error::InvalidTopology(msgs.join("; ")));
        }
        if self.arrivals.rates.len() != self.topology.n_flows() {
            return Err(Error::Mismatch(format!(
                "{} arrival rates for {} flows",
                self.arrivals.rates.len(),
                self.topology.n_flows()
            )));
        }
        self.arrivals.check()?;
        if self.horizon < 1 {
            return Err(Error::Parameter {
                name: "horizon",
                value: self.horizon as i64,
                requirement: ">= 1",
            });
        }
        Ok(())
    }
}

/// Mutable queue state during a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueueState {
    pub queues: Vec<u64>,
    pub arrivals: Vec<u64>,
    pub services: Vec<u64>,
    pub swap_failures: Vec<u64>,
    /// FIFO arrival timestamps, present only when waits are recorded.
    pending: Option<Vec<VecDeque<u64>>>,
}

impl QueueState {
    pub fn empty(n_flows: usize, record_waits: bool) -> Self {
        Self {
            queues: vec![0; n_flows],
            arrivals: vec![0; n_flows],
            services: vec![0; n_flows],
            swap_failures: vec![0; n_flows],
            pending: record_waits.then(|| vec![VecDeque::new(); n_flows]),
        }
    }
}

/// Result of one step: the scheduled matching and the flows actually served.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    pub scheduled: Matching,
    pub served_mask: u32,
}

/// Advance the state by one time step.
///
/// Order within the step: new arrivals join their queues; the max-weight
/// matching is computed on the updated queues; each scheduled flow attempts
/// its swap (success removes the head request, failure keeps it and burns the
/// step's entanglement); finally all unused link entanglement expires with
/// the step.
#[allow(clippy::too_many_arguments)]
pub fn step(
    topology: &SwitchTopology,
    matchings: &[Matching],
    state: &mut QueueState,
    snapshot: &LinkSnapshot,
    new_arrivals: &[u64],
    rule: ServiceRule,
    tie_break: TieBreak,
    mut swap_succeeds: impl FnMut(usize) -> bool,
    mut waits_out: Option<&mut Vec<Vec<u64>>>,
) -> StepOutcome {
    let now = snapshot.step;
    for (i, &a) in new_arrivals.iter().enumerate() {
        state.queues[i] += a;
        state.arrivals[i] += a;
        if let Some(pending) = state.pending.as_mut() {
            for _ in 0..a {
                pending[i].push_back(now);
            }
        }
    }

    let scheduled = max_weight_with(topology, matchings, snapshot, &state.queues, rule, tie_break);

    let mut served_mask = 0u32;
    for i in scheduled.iter_scheduled() {
        debug_assert!(state.queues[i] > 0, "scheduled an empty queue");
        debug_assert!(
            serviceable(topology, i, snapshot, rule),
            "scheduled an unserviceable flow"
        );
        if swap_succeeds(i) {
            state.queues[i] -= 1;
            state.services[i] += 1;
            served_mask |= 1 << i;
            if let Some(pending) = state.pending.as_mut() {
                let arrived = pending[i].pop_front().expect("queue accounting");
                if let Some(w) = waits_out.as_mut() {
                    w[i].push(now - arrived);
                }
            }
        } else {
            state.swap_failures[i] += 1;
        }
    }

    StepOutcome {
        scheduled,
        served_mask,
    }
}

/// Full record of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    /// End-of-step queue length per flow: `qlen[i][n]` is flow i's queue
    /// after step n completed.
    pub qlen: Vec<Vec<u64>>,
    /// End-of-step total queue length.
    pub qtotal: Vec<u64>,
    pub arrivals: Vec<u64>,
    pub services: Vec<u64>,
    pub swap_failures: Vec<u64>,
    /// Scheduled matching per step (masks), when recorded.
    pub schedules: Option<Vec<u32>>,
    /// Waiting times per flow (steps from arrival to service), when recorded.
    pub waits: Option<Vec<Vec<u64>>>,
}

impl SimTrace {
    pub fn horizon(&self) -> usize {
        self.qtotal.len()
    }

    pub fn n_flows(&self) -> usize {
        self.qlen.len()
    }

    /// Check the trace conservation identities exactly.
    pub fn verify_conservation(&self) -> std::result::Result<(), String> {
        let n = self.horizon();
        for (i, series) in self.qlen.iter().enumerate() {
            if series.len() != n {
                return Err(format!("flow {i} series length {} != {n}", series.len()));
            }
            let final_q = *series.last().unwrap_or(&0);
            if self.arrivals[i] - self.services[i] != final_q {
                return Err(format!(
                    "flow {i}: arrivals {} - services {} != final queue {final_q}",
                    self.arrivals[i], self.services[i]
                ));
            }
            if self.services[i] > self.arrivals[i] {
                return Err(format!("flow {i}: more services than arrivals"));
            }
        }
        for step in 0..n {
            let total: u64 = self.qlen.iter().map(|s| s[step]).sum();
            if total != self.qtotal[step] {
                return Err(format!("step {step}: qtotal {} != sum {total}", self.qtotal[step]));
            }
        }
        Ok(())
    }

    /// Write the trace as CSV with header `step,q1,...,qK,qtotal`.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        write!(out, "step")?;
        for i in 1..=self.n_flows() {
            write!(out, ",q{i}")?;
        }
        writeln!(out, ",qtotal")?;
        for step in 0..self.horizon() {
            write!(out, "{step}")?;
            for series in &self.qlen {
                write!(out, ",{}", series[step])?;
            }
            writeln!(out, ",{}", self.qtotal[step])?;
        }
        Ok(())
    }

    /// Summary JSON: final counts plus an echo of the configuration.
    pub fn summary_json(&self, cfg: &SimConfig) -> serde_json::Value {
        serde_json::json!({
            "config": cfg,
            "final_queues": self.qlen.iter().map(|s| *s.last().unwrap_or(&0)).collect::<Vec<_>>(),
            "arrivals": self.arrivals,
            "services": self.services,
            "swap_failures": self.swap_failures,
        })
    }
}

/// Run a simulation from empty queues.
///
/// Deterministic for a fixed config: arrivals, links, swaps, and tie-break
/// salts each draw from their own streams keyed by `(seed, role, index, step)`.
pub fn run(cfg: &SimConfig) -> Result<SimTrace> {
    cfg.check()?;
    let topo = &cfg.topology;
    let k = topo.n_flows();
    let matchings = enumerate_matchings(topo)?;
    let link_streams = LinkStreams::new(cfg.seed, topo.n_links());
    let arrival_streams: Vec<RngStream> = (0..k)
        .map(|i| RngStream::new(cfg.seed, StreamDomain::Arrival, i as u64))
        .collect();
    let swap_streams: Vec<RngStream> = (0..k)
        .map(|i| RngStream::new(cfg.seed, StreamDomain::Swap, i as u64))
        .collect();
    let tie_salt_base = match cfg.tie_break {
        TieBreak::LowestIndex => 0,
        TieBreak::SeededRandom { salt } => mix_words(cfg.seed, &[salt]),
    };

    let n = cfg.horizon as usize;
    let mut state = QueueState::empty(k, cfg.record_waits);
    let mut qlen: Vec<Vec<u64>> = vec![Vec::with_capacity(n); k];
    let mut qtotal: Vec<u64> = Vec::with_capacity(n);
    let mut schedules = cfg.record_schedule.then(|| Vec::with_capacity(n));
    let mut waits = cfg.record_waits.then(|| vec![Vec::new(); k]);
    let mut new_arrivals = vec![0u64; k];

    for step_idx in 0..cfg.horizon {
        for i in 0..k {
            let lam = cfg.arrivals.rates[i];
            new_arrivals[i] = if lam <= 0.0 {
                0
            } else {
                let mut rng = arrival_streams[i].at_step(step_idx);
                match cfg.arrivals.kind {
                    ArrivalKind::Bernoulli => (rng.uniform() < lam) as u64,
                    ArrivalKind::Poisson => {
                        let dist = rand_distr::Poisson::new(lam).expect("validated rate");
                        dist.sample(&mut rng) as u64
                    }
                }
            };
        }

        let snapshot = sample_links(topo, &link_streams, step_idx);
        let tie = match cfg.tie_break {
            TieBreak::LowestIndex => TieBreak::LowestIndex,
            TieBreak::SeededRandom { .. } => TieBreak::SeededRandom {
                salt: mix_words(tie_salt_base, &[step_idx]),
            },
        };
        let outcome = step(
            topo,
            &matchings,
            &mut state,
            &snapshot,
            &new_arrivals,
            cfg.rule,
            tie,
            |flow| {
                let q = topo.flows[flow].q;
                q >= 1.0 || swap_streams[flow].at_step(step_idx).uniform() < q
            },
            waits.as_mut(),
        );

        let mut total = 0u64;
        for i in 0..k {
            qlen[i].push(state.queues[i]);
            total += state.queues[i];
        }
        qtotal.push(total);
        if let Some(s) = schedules.as_mut() {
            s.push(outcome.scheduled.mask());
        }
    }

    let trace = SimTrace {
        qlen,
        qtotal,
        arrivals: state.arrivals,
        services: state.services,
        swap_failures: state.swap_failures,
        schedules,
        waits,
    };
    debug_assert_eq!(trace.verify_conservation(), Ok(()));
    Ok(trace)
}
