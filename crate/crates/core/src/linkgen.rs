//! Link-level formulas and per-time-step stochastic link sampling.
//!
//! Links are memoryless: a heralded entanglement lives exactly one time
//! step, so each step is sampled independently of every other step.

use crate::error::{Error, Result};
use crate::model::SwitchTopology;
use crate::rng::{RngStream, SplitMix64, StreamDomain};

/// Direct-transmission capacity `-log2(1 - eta)` in ebits per mode.
pub fn direct_capacity(eta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::Domain {
            name: "eta",
            value: eta,
            range: "[0, 1)",
        });
    }
    Ok(-(1.0 - eta).log2())
}

/// Probability that at least one of `m` multiplexed channels heralds in a
/// time step: `1 - (1 - pnla)^m`.
///
/// `m = 1` returns `pnla` exactly; larger `m` uses the log1p/expm1 form,
/// which stays accurate when `pnla` is tiny and `m` is large.
pub fn herald_prob(pnla: f64, m: u64) -> Result<f64> {
    if !(pnla > 0.0 && pnla <= 1.0) {
        return Err(Error::Domain {
            name: "pnla",
            value: pnla,
            range: "(0, 1]",
        });
    }
    if m < 1 {
        return Err(Error::Parameter {
            name: "m",
            value: m as i64,
            requirement: ">= 1",
        });
    }
    if m == 1 {
        return Ok(pnla);
    }
    Ok(-f64::exp_m1(m as f64 * f64::ln_1p(-pnla)))
}

/// Heralding probability at the canonical multiplexing depth
/// `m = round(1/pnla)` (floored at 1).
///
/// As `pnla -> 0` this decreases toward `1 - 1/e ~= 0.632` from above,
/// giving a scale-independent floor for the link success probability.
pub fn saturation_prob(pnla: f64) -> Result<f64> {
    if !(pnla > 0.0 && pnla <= 1.0) {
        return Err(Error::Domain {
            name: "pnla",
            value: pnla,
            range: "(0, 1]",
        });
    }
    let m = ((1.0 / pnla).round() as u64).max(1);
    herald_prob(pnla, m)
}

/// Optional parametric hook `pnla = c * eta^(1/4)`, clamped to (0, 1].
///
/// The proportionality constant is not pinned down by the link model, so it
/// is a caller-supplied input with default 1.
pub fn pnla_from_eta(eta: f64, c: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Domain {
            name: "eta",
            value: eta,
            range: "(0, 1]",
        });
    }
    if c <= 0.0 {
        return Err(Error::Domain {
            name: "c",
            value: c,
            range: "(0, inf)",
        });
    }
    Ok((c * eta.powf(0.25)).min(1.0))
}

/// Link states for one time step.
///
/// `t[j]` says whether link `j` heralded at least one entanglement;
/// `o[j]` is its orientation bit (true = quantum-scissor end at the
/// switch), meaningful only where `t[j]` is set and stored as `false`
/// elsewhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkSnapshot {
    pub t: Vec<bool>,
    pub o: Vec<bool>,
    pub step: u64,
}

impl LinkSnapshot {
    /// Snapshot with the given up-links and all orientations false; handy
    /// in tests.
    pub fn with_up(t: Vec<bool>, step: u64) -> Self {
        let o = vec![false; t.len()];
        Self { t, o, step }
    }
}

/// One independent random stream per link of a topology.
#[derive(Debug, Clone)]
pub struct LinkStreams {
    streams: Vec<RngStream>,
}

impl LinkStreams {
    pub fn new(seed: u64, n_links: usize) -> Self {
        Self {
            streams: (0..n_links)
                .map(|j| RngStream::new(seed, StreamDomain::Link, j as u64))
                .collect(),
        }
    }

    pub fn step_rng(&self, link: usize, step: u64) -> SplitMix64 {
        self.streams[link].at_step(step)
    }
}

/// Sample one time step of link states.
///
/// Each link heralds independently with its probability `p`; conditional on
/// success the orientation is a fair coin. Exactly two uniforms are consumed
/// per link (success, then orientation) whether or not the link succeeds, so
/// the trace does not depend on which consumers look at orientations.
pub fn sample_links(topology: &SwitchTopology, streams: &LinkStreams, step: u64) -> LinkSnapshot {
    let n = topology.n_links();
    let mut t = vec![false; n];
    let mut o = vec![false; n];
    for j in 0..n {
        let mut rng = streams.step_rng(j, step);
        let u_success = rng.uniform();
        let u_orient = rng.uniform();
        if u_success < topology.links[j].p() {
            t[j] = true;
            o[j] = u_orient < 0.5;
        }
    }
    LinkSnapshot { t, o, step }
}
