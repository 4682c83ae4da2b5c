//! Rate-vector grid sweeps: simulate every grid point, classify stability,
//! and compare against an analytic region.

use crate::error::{Error, Result};
use crate::model::FlowSpec;
use crate::region::RateRegion;
use crate::rng::mix_words;
use crate::simulator::{run, ArrivalKind, SimConfig};
use crate::stability::{classify, SlopeBasis, DEFAULT_SLOPE_THRESHOLD};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Desk-scale defaults: tractable on a workstation.
pub const DESK_DLAM: f64 = 0.02;
pub const DESK_HORIZON: u64 = 20_000;
/// Grid resolution and horizon used for the published figures; a
/// cluster-scale job when applied to a full 3D grid.
pub const PAPER_DLAM: f64 = 0.005;
pub const PAPER_HORIZON: u64 = 100_000;

/// Default cap on total simulated steps per sweep.
pub const DEFAULT_MAX_TOTAL_STEPS: u64 = 2_000_000_000;

/// One axis of the rate grid: `min, min + step, ..` up to `max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRange {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl GridRange {
    pub fn new(min: f64, max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::Domain {
                name: "step",
                value: step,
                range: "(0, inf)",
            });
        }
        if !(min >= 0.0 && max >= min) {
            return Err(Error::Domain {
                name: "min..max",
                value: min,
                range: "0 <= min <= max",
            });
        }
        Ok(Self { min, max, step })
    }

    pub fn len(&self) -> usize {
        ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.min + idx as f64 * self.step
    }
}

/// A full sweep specification.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    /// Base simulation config; its arrival rates are replaced per grid point.
    pub base: SimConfig,
    /// One range per flow.
    pub grid: Vec<GridRange>,
    /// Repetitions per grid point (distinct seeds).
    pub reps: u32,
    /// Analytic region to compare against, if any.
    pub region: Option<RateRegion>,
    pub threshold: f64,
    pub basis: SlopeBasis,
    /// Refuse to run if `points * reps * horizon` exceeds this.
    pub max_total_steps: u64,
}

impl SweepSpec {
    pub fn new(base: SimConfig, grid: Vec<GridRange>) -> Self {
        Self {
            base,
            grid,
            reps: 1,
            region: None,
            threshold: DEFAULT_SLOPE_THRESHOLD,
            basis: SlopeBasis::Total,
            max_total_steps: DEFAULT_MAX_TOTAL_STEPS,
        }
    }

    /// Same range on every flow.
    pub fn uniform_grid(base: SimConfig, range: GridRange) -> Self {
        let k = base.topology.n_flows();
        Self::new(base, vec![range; k])
    }

    pub fn n_points(&self) -> u128 {
        self.grid.iter().map(|g| g.len() as u128).product()
    }

    fn check(&self) -> Result<()> {
        self.base.check()?;
        let k = self.base.topology.n_flows();
        if self.grid.len() != k {
            return Err(Error::Mismatch(format!(
                "{} grid ranges for {k} flows",
                self.grid.len()
            )));
        }
        if self.reps < 1 {
            return Err(Error::Parameter {
                name: "reps",
                value: self.reps as i64,
                requirement: ">= 1",
            });
        }
        if self.base.arrivals.kind == ArrivalKind::Bernoulli {
            for g in &self.grid {
                if g.max > 1.0 {
                    return Err(Error::Domain {
                        name: "grid max",
                        value: g.max,
                        range: "[0, 1] for Bernoulli arrivals",
                    });
                }
            }
        }
        let estimate = self.n_points() * self.reps as u128 * self.base.horizon as u128;
        if estimate > self.max_total_steps as u128 {
            return Err(Error::ResourceCap {
                estimate,
                cap: self.max_total_steps,
            });
        }
        Ok(())
    }
}

/// One simulated grid point (one repetition).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lam: Vec<f64>,
    pub rep: u32,
    pub seed: u64,
    pub slope: f64,
    pub stable: bool,
    /// Membership in the comparison region, when one was supplied.
    pub inside: Option<bool>,
    /// `stable == inside`, when a region was supplied.
    pub agree: Option<bool>,
}

/// All records of a sweep, sorted by grid coordinates then repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub n_flows: usize,
    /// Swap probabilities of the swept topology (needed to re-evaluate
    /// region membership).
    pub q: Vec<f64>,
    pub grid: Vec<GridRange>,
    pub horizon: u64,
    pub base_seed: u64,
    pub threshold: f64,
}

impl SweepResult {
    /// CSV with header `lam1,...,lamK,slope,stable,inside,agree`; floats in
    /// shortest round-trip form so identical sweeps are byte-identical.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        for i in 1..=self.n_flows {
            write!(out, "{}lam{i}", if i > 1 { "," } else { "" })?;
        }
        writeln!(out, ",slope,stable,inside,agree")?;
        for p in &self.points {
            for (i, l) in p.lam.iter().enumerate() {
                write!(out, "{}{l}", if i > 0 { "," } else { "" })?;
            }
            write!(out, ",{},{}", p.slope, p.stable)?;
            match p.inside {
                Some(v) => write!(out, ",{v}")?,
                None => write!(out, ",")?,
            }
            match p.agree {
                Some(v) => writeln!(out, ",{v}")?,
                None => writeln!(out, ",")?,
            }
        }
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        let stable = self.points.iter().filter(|p| p.stable).count();
        serde_json::json!({
            "points": self.points.len(),
            "stable": stable,
            "unstable": self.points.len() - stable,
            "grid": self.grid,
            "horizon": self.horizon,
            "seed": self.base_seed,
            "threshold": self.threshold,
        })
    }
}

/// Seed for one grid point: mixes the base seed with the bit patterns of
/// the rate vector and the repetition index, so a point keeps its seed when
/// the grid around it grows or shrinks.
pub fn point_seed(base_seed: u64, lam: &[f64], rep: u32) -> u64 {
    let mut words: Vec<u64> = lam.iter().map(|l| l.to_bits()).collect();
    words.push(rep as u64);
    mix_words(base_seed, &words)
}

/// Run the full grid, in parallel, with deterministic output order.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    run_sweep_with_progress(spec, |_, _| {})
}

/// [`run_sweep`] with a progress callback `(done, total)`, called after each
/// completed point.
pub fn run_sweep_with_progress(
    spec: &SweepSpec,
    progress: impl Fn(usize, usize) + Sync,
) -> Result<SweepResult> {
    spec.check()?;
    let k = spec.base.topology.n_flows();
    let counts: Vec<usize> = spec.grid.iter().map(|g| g.len()).collect();
    let n_points = counts.iter().product::<usize>();

    let mut jobs: Vec<Vec<f64>> = Vec::with_capacity(n_points);
    let mut idx = vec![0usize; k];
    'outer: loop {
        jobs.push((0..k).map(|i| spec.grid[i].value(idx[i])).collect());
        let mut pos = k;
        loop {
            if pos == 0 {
                break 'outer;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < counts[pos] {
                break;
            }
            idx[pos] = 0;
            if pos == 0 {
                break 'outer;
            }
        }
    }
    debug_assert_eq!(jobs.len(), n_points);

    let q = spec.base.topology.swap_probs();
    let total_jobs = n_points * spec.reps as usize;
    let done = std::sync::atomic::AtomicUsize::new(0);
    let points: Vec<SweepPoint> = jobs
        .par_iter()
        .flat_map_iter(|lam| (0..spec.reps).map(move |rep| (lam.clone(), rep)))
        .map(|(lam, rep)| {
            let seed = point_seed(spec.base.seed, &lam, rep);
            let mut cfg = spec.base.clone();
            cfg.arrivals.rates = lam.clone();
            cfg.seed = seed;
            let trace = run(&cfg)?;
            let verdict = classify(&trace, spec.threshold, spec.basis)?;
            let inside = spec.region.as_ref().map(|r| r.contains(&lam, &q));
            let agree = inside.map(|i| i == verdict.stable);
            let finished = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
            progress(finished, total_jobs);
            Ok(SweepPoint {
                lam,
                rep,
                seed,
                slope: verdict.slope,
                stable: verdict.stable,
                inside,
                agree,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SweepResult {
        points,
        n_flows: k,
        q,
        grid: spec.grid.clone(),
        horizon: spec.base.horizon,
        base_seed: spec.base.seed,
        threshold: spec.threshold,
    })
}

/// Four-way agreement counts between simulated stability and analytic
/// membership.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgreementCounts {
    pub stable_inside: usize,
    pub stable_outside: usize,
    pub unstable_inside: usize,
    pub unstable_outside: usize,
}

/// Summary of a sweep-vs-region comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub counts: AgreementCounts,
    pub total: usize,
    pub disagreement: f64,
    /// Points whose whole one-grid-step axis neighborhood shares their
    /// membership, i.e. more than one grid step from the region boundary.
    pub far_total: usize,
    pub far_disagreements: usize,
    pub far_disagreement: f64,
}

/// Compare a sweep against a region.
///
/// A point counts as far from the boundary when every axis neighbor one
/// grid step away (with nonnegative rates) has the same region membership,
/// so no single grid move can cross the boundary.
pub fn agreement_report(result: &SweepResult, region: &RateRegion) -> Result<AgreementReport> {
    if region.n_flows != result.n_flows {
        return Err(Error::Mismatch(format!(
            "region has {} flows, sweep has {}",
            region.n_flows, result.n_flows
        )));
    }
    let mut counts = AgreementCounts {
        stable_inside: 0,
        stable_outside: 0,
        unstable_inside: 0,
        unstable_outside: 0,
    };
    let mut far_total = 0usize;
    let mut far_disagreements = 0usize;
    for p in &result.points {
        let inside = region.contains(&p.lam, &result.q);
        match (p.stable, inside) {
            (true, true) => counts.stable_inside += 1,
            (true, false) => counts.stable_outside += 1,
            (false, true) => counts.unstable_inside += 1,
            (false, false) => counts.unstable_outside += 1,
        }
        let disagrees = p.stable != inside;
        if far_from_boundary(region, &result.q, &p.lam, &result.grid, inside) {
            far_total += 1;
            if disagrees {
                far_disagreements += 1;
            }
        }
    }
    let total = result.points.len();
    let disagreement = if total == 0 {
        0.0
    } else {
        (counts.stable_outside + counts.unstable_inside) as f64 / total as f64
    };
    let far_disagreement = if far_total == 0 {
        0.0
    } else {
        far_disagreements as f64 / far_total as f64
    };
    Ok(AgreementReport {
        counts,
        total,
        disagreement,
        far_total,
        far_disagreements,
        far_disagreement,
    })
}

/// Whether no single one-grid-step axis move (with nonnegative rates) can
/// change the point's region membership.
pub fn far_from_boundary(
    region: &RateRegion,
    q: &[f64],
    lam: &[f64],
    grid: &[GridRange],
    inside: bool,
) -> bool {
    let mut neighbor = lam.to_vec();
    for i in 0..lam.len() {
        for sign in [1.0, -1.0] {
            let moved = lam[i] + sign * grid[i].step;
            if moved < 0.0 {
                continue;
            }
            neighbor[i] = moved;
            let n_inside = region.contains(&neighbor, q);
            neighbor[i] = lam[i];
            if n_inside != inside {
                return false;
            }
        }
    }
    true
}

/// Entanglement rates: request rates scaled by each flow's reverse coherent
/// information (ebits per time step).
pub fn entanglement_rates(lam: &[f64], flows: &[FlowSpec]) -> Result<Vec<f64>> {
    if lam.len() != flows.len() {
        return Err(Error::Mismatch(format!(
            "{} rates for {} flows",
            lam.len(),
            flows.len()
        )));
    }
    flows
        .iter()
        .zip(lam)
        .map(|(f, &l)| {
            let rci = f.rci.ok_or(Error::MissingFlowData {
                flow: f.id,
                what: "rci",
            })?;
            Ok(l * rci)
        })
        .collect()
}
