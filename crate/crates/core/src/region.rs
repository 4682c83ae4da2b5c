//! Analytic stably-supportable rate regions.
//!
//! A region is a set of subset-sum facets `{(S, c_S)}` meaning
//! `sum_{i in S} lambda_i / q_i <= c_S`. The facet value for a subset is its
//! maximum service rate: the expected largest number of subset flows the
//! switch could schedule simultaneously in one time step. For a subset whose
//! flows all pairwise contend, at most one of them can be scheduled per step,
//! so the facet value reduces to the probability that at least one is
//! serviceable; for flows that never contend the facet value is the sum of
//! the singleton values and the facet is redundant, which is exactly why the
//! disjoint-pair constraint drops out of the path scenario and the fully
//! disjoint scenario reduces to its per-flow bounds.

use crate::error::{Error, Result};
use crate::model::SwitchTopology;
use crate::scheduler::{enumerate_matchings, ServiceRule, MAX_FLOWS};
use num::bigint::BigInt;
use num::rational::Ratio;
use num::{One, Zero};
use serde::Deserialize;

/// Enumeration refuses joint link-outcome spaces over more links than this.
pub const MAX_ENUM_LINKS: usize = 20;

/// Vertex enumeration (plot geometry, binding-facet report) is exhaustive
/// over constraint combinations and is capped at this many flows.
pub const MAX_GEOMETRY_FLOWS: usize = 5;

type BigRational = Ratio<BigInt>;

/// One facet: `sum_{i in S} lambda_i / q_i <= bound`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsetBound {
    /// Flow subset as a bitmask (flow `i` is bit `i`).
    pub subset: u32,
    pub bound: f64,
}

impl SubsetBound {
    /// 1-based flow indices of the subset, ascending.
    pub fn flow_ids(&self) -> Vec<usize> {
        (0..32)
            .filter(|i| self.subset & (1 << i) != 0)
            .map(|i| i + 1)
            .collect()
    }
}

/// A full rate region: one facet per nonempty flow subset, ascending mask
/// order, plus the service rule it was computed under.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRegion {
    pub n_flows: usize,
    pub rule: ServiceRule,
    pub bounds: Vec<SubsetBound>,
}

impl RateRegion {
    pub fn bound_for(&self, subset: u32) -> Option<f64> {
        self.bounds
            .iter()
            .find(|b| b.subset == subset)
            .map(|b| b.bound)
    }

    /// Membership test: every facet satisfied (up to 1e-12 slack for
    /// round-off on the boundary).
    pub fn contains(&self, lam: &[f64], q: &[f64]) -> bool {
        self.contains_with_margin(lam, q, -1e-12)
    }

    /// Strict-interior test: every facet satisfied with at least `margin`
    /// slack.
    pub fn contains_with_margin(&self, lam: &[f64], q: &[f64], margin: f64) -> bool {
        debug_assert_eq!(lam.len(), self.n_flows);
        debug_assert_eq!(q.len(), self.n_flows);
        if lam.iter().any(|&l| l < 0.0) {
            return false;
        }
        for b in &self.bounds {
            let mut sum = 0.0;
            for i in 0..self.n_flows {
                if b.subset & (1 << i) != 0 {
                    sum += lam[i] / q[i];
                }
            }
            if sum > b.bound - margin {
                return false;
            }
        }
        true
    }

    /// Which facets actually shape the region: facet `j` is binding iff
    /// dropping it would admit points violating it. Exhausts vertex
    /// candidates of the relaxed polytope, so capped by
    /// [`MAX_GEOMETRY_FLOWS`].
    pub fn binding_facets(&self) -> Result<Vec<bool>> {
        if self.n_flows > MAX_GEOMETRY_FLOWS {
            return Err(Error::CapacityExceeded {
                what: "flows for facet geometry",
                size: self.n_flows,
                cap: MAX_GEOMETRY_FLOWS,
            });
        }
        let mut out = Vec::with_capacity(self.bounds.len());
        for (j, facet) in self.bounds.iter().enumerate() {
            let remaining: Vec<SubsetBound> = self
                .bounds
                .iter()
                .enumerate()
                .filter(|(idx, _)| *idx != j)
                .map(|(_, b)| *b)
                .collect();
            // If some coordinate of the facet would become unconstrained the
            // relaxation is unbounded in that direction.
            let mut unbounded = false;
            for i in 0..self.n_flows {
                if facet.subset & (1 << i) != 0
                    && !remaining.iter().any(|b| b.subset & (1 << i) != 0)
                {
                    unbounded = true;
                }
            }
            if unbounded {
                out.push(true);
                continue;
            }
            let verts = vertices_of(self.n_flows, &remaining);
            let mut best = 0.0f64;
            for v in &verts {
                let s: f64 = (0..self.n_flows)
                    .filter(|i| facet.subset & (1 << i) != 0)
                    .map(|i| v[i])
                    .sum();
                best = best.max(s);
            }
            out.push(best > facet.bound + 1e-9);
        }
        Ok(out)
    }

    /// Vertices of the region polytope in normalized coordinates
    /// (`x_i = lambda_i / q_i`; identical to rate space at `q = 1`).
    pub fn vertices(&self) -> Result<Vec<Vec<f64>>> {
        if self.n_flows > MAX_GEOMETRY_FLOWS {
            return Err(Error::CapacityExceeded {
                what: "flows for facet geometry",
                size: self.n_flows,
                cap: MAX_GEOMETRY_FLOWS,
            });
        }
        Ok(vertices_of(self.n_flows, &self.bounds))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rule = match self.rule {
            ServiceRule::AnyOrientation => "any_orientation",
            ServiceRule::OppositeParity => "opposite_parity",
        };
        serde_json::json!({
            "rule": rule,
            "n_flows": self.n_flows,
            "bounds": self.bounds.iter().map(|b| {
                serde_json::json!({"subset": b.flow_ids(), "bound": b.bound})
            }).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct WireBound {
            subset: Vec<usize>,
            bound: f64,
        }
        #[derive(Deserialize)]
        struct Wire {
            rule: String,
            n_flows: usize,
            bounds: Vec<WireBound>,
        }
        let wire: Wire = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let rule: ServiceRule = wire.rule.parse()?;
        let mut bounds = Vec::with_capacity(wire.bounds.len());
        for wb in wire.bounds {
            let mut mask = 0u32;
            for id in wb.subset {
                if id == 0 || id > wire.n_flows {
                    return Err(Error::Config(format!("flow id {id} out of range")));
                }
                mask |= 1 << (id - 1);
            }
            bounds.push(SubsetBound {
                subset: mask,
                bound: wb.bound,
            });
        }
        bounds.sort_by_key(|b| b.subset);
        Ok(RateRegion {
            n_flows: wire.n_flows,
            rule,
            bounds,
        })
    }

    /// Sample a grid over rate space and write `lam1,lam2,lam3,in_region`
    /// rows (3-flow regions only).
    pub fn write_boundary_samples_csv<W: std::io::Write>(
        &self,
        q: &[f64],
        max: f64,
        step: f64,
        out: &mut W,
    ) -> Result<()> {
        if self.n_flows != 3 {
            return Err(Error::Mismatch(format!(
                "boundary sample CSV is 3-flow only, region has {}",
                self.n_flows
            )));
        }
        if step <= 0.0 {
            return Err(Error::Domain {
                name: "step",
                value: step,
                range: "(0, inf)",
            });
        }
        let n = (max / step).floor() as usize + 1;
        writeln!(out, "lam1,lam2,lam3,in_region").map_err(io_err)?;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let lam = [i as f64 * step, j as f64 * step, k as f64 * step];
                    let inside = self.contains(&lam, q);
                    writeln!(out, "{},{},{},{}", lam[0], lam[1], lam[2], inside)
                        .map_err(io_err)?;
                }
            }
        }
        Ok(())
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::Config(e.to_string())
}

/// Kahan-compensated accumulator; 3^L outcome probabilities of magnitude
/// <= 1 sum representably for L <= 20 but the compensation keeps the facet
/// cross-checks at the 1e-12 level honest.
#[derive(Default)]
struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    fn add(&mut self, term: f64) {
        let t = self.sum + (term - self.comp);
        self.comp = (t - self.sum) - (term - self.comp);
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum
    }
}

/// Sorted link indices touched by the subset's flows.
fn relevant_links(topology: &SwitchTopology, subset: u32) -> Vec<usize> {
    let mut links = Vec::new();
    for i in 0..topology.n_flows() {
        if subset & (1 << i) != 0 {
            let (a, b) = topology.flow_links(i);
            links.push(a);
            links.push(b);
        }
    }
    links.sort_unstable();
    links.dedup();
    links
}

/// Per-flow link positions within the relevant-link list.
fn flow_positions(topology: &SwitchTopology, subset: u32, links: &[usize]) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for i in 0..topology.n_flows() {
        if subset & (1 << i) != 0 {
            let (a, b) = topology.flow_links(i);
            let pa = links.binary_search(&a).expect("relevant link");
            let pb = links.binary_search(&b).expect("relevant link");
            out.push((i, pa, pb));
        }
    }
    out
}

/// Iterate all digit vectors of the given radix; digit semantics are
/// 0 = down, 1 = up (orientation 0), 2 = up (orientation 1).
fn for_each_outcome(radix: u8, len: usize, mut f: impl FnMut(&[u8])) {
    let mut digits = vec![0u8; len];
    loop {
        f(&digits);
        let mut pos = 0;
        loop {
            if pos == len {
                return;
            }
            digits[pos] += 1;
            if digits[pos] < radix {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}

fn check_subset(topology: &SwitchTopology, subset: u32) -> Result<Vec<usize>> {
    let k = topology.n_flows();
    if subset == 0 || subset >= (1u32 << k) {
        return Err(Error::Mismatch(format!(
            "subset mask {subset:#b} invalid for {k} flows"
        )));
    }
    let links = relevant_links(topology, subset);
    if links.len() > MAX_ENUM_LINKS {
        return Err(Error::CapacityExceeded {
            what: "links",
            size: links.len(),
            cap: MAX_ENUM_LINKS,
        });
    }
    Ok(links)
}

fn serviceable_in_outcome(digits: &[u8], pa: usize, pb: usize, rule: ServiceRule) -> bool {
    match rule {
        ServiceRule::AnyOrientation => digits[pa] >= 1 && digits[pb] >= 1,
        ServiceRule::OppositeParity => {
            digits[pa] >= 1 && digits[pb] >= 1 && digits[pa] != digits[pb]
        }
    }
}

/// Exact probability that at least one flow of `subset` is serviceable,
/// by enumeration of the joint link-outcome space over the links the subset
/// touches (2^L outcomes ignoring orientation, 3^L with it).
pub fn serviceable_prob(topology: &SwitchTopology, subset: u32, rule: ServiceRule) -> Result<f64> {
    let links = check_subset(topology, subset)?;
    let flows = flow_positions(topology, subset, &links);
    let radix: u8 = match rule {
        ServiceRule::AnyOrientation => 2,
        ServiceRule::OppositeParity => 3,
    };
    let tables = outcome_tables(topology, &links, radix);
    let mut acc = KahanSum::default();
    for_each_outcome(radix, links.len(), |digits| {
        if flows
            .iter()
            .any(|&(_, pa, pb)| serviceable_in_outcome(digits, pa, pb, rule))
        {
            acc.add(outcome_prob(&tables, digits));
        }
    });
    Ok(acc.value())
}

/// Expected maximum number of `subset` flows the switch can schedule
/// simultaneously in one step: the subset's max service rate and hence its
/// facet value. Equals [`serviceable_prob`] whenever the subset is pairwise
/// contending.
pub fn max_service_rate(topology: &SwitchTopology, subset: u32, rule: ServiceRule) -> Result<f64> {
    let links = check_subset(topology, subset)?;
    let flows = flow_positions(topology, subset, &links);
    let matchings = enumerate_matchings(topology)?;
    let radix: u8 = match rule {
        ServiceRule::AnyOrientation => 2,
        ServiceRule::OppositeParity => 3,
    };
    let tables = outcome_tables(topology, &links, radix);
    let mut acc = KahanSum::default();
    for_each_outcome(radix, links.len(), |digits| {
        let mut serv = 0u32;
        for &(i, pa, pb) in &flows {
            if serviceable_in_outcome(digits, pa, pb, rule) {
                serv |= 1 << i;
            }
        }
        if serv == 0 {
            return;
        }
        let best = matchings
            .iter()
            .map(|m| (m.mask() & serv).count_ones())
            .max()
            .unwrap_or(0);
        if best > 0 {
            acc.add(best as f64 * outcome_prob(&tables, digits));
        }
    });
    Ok(acc.value())
}

fn outcome_tables(topology: &SwitchTopology, links: &[usize], radix: u8) -> Vec<[f64; 3]> {
    links
        .iter()
        .map(|&j| {
            let p = topology.links[j].p();
            if radix == 2 {
                [1.0 - p, p, 0.0]
            } else {
                [1.0 - p, p / 2.0, p / 2.0]
            }
        })
        .collect()
}

fn outcome_prob(tables: &[[f64; 3]], digits: &[u8]) -> f64 {
    let mut prob = 1.0;
    for (table, &d) in tables.iter().zip(digits) {
        prob *= table[d as usize];
    }
    prob
}

/// Exact-rational [`serviceable_prob`], for verifying the compensated
/// floating-point route.
pub fn serviceable_prob_exact(
    topology: &SwitchTopology,
    subset: u32,
    rule: ServiceRule,
) -> Result<BigRational> {
    rational_enumeration(topology, subset, rule, false)
}

/// Exact-rational [`max_service_rate`].
pub fn max_service_rate_exact(
    topology: &SwitchTopology,
    subset: u32,
    rule: ServiceRule,
) -> Result<BigRational> {
    rational_enumeration(topology, subset, rule, true)
}

fn rational_enumeration(
    topology: &SwitchTopology,
    subset: u32,
    rule: ServiceRule,
    weighted: bool,
) -> Result<BigRational> {
    let links = check_subset(topology, subset)?;
    let flows = flow_positions(topology, subset, &links);
    let matchings = enumerate_matchings(topology)?;
    let radix: u8 = match rule {
        ServiceRule::AnyOrientation => 2,
        ServiceRule::OppositeParity => 3,
    };
    let two = BigRational::from_integer(BigInt::from(2));
    let tables: Vec<[BigRational; 3]> = links
        .iter()
        .map(|&j| {
            let p = BigRational::from_float(topology.links[j].p())
                .expect("probability is finite");
            let down = BigRational::one() - p.clone();
            if radix == 2 {
                [down, p, BigRational::zero()]
            } else {
                [down, p.clone() / two.clone(), p / two.clone()]
            }
        })
        .collect();
    let mut total = BigRational::zero();
    for_each_outcome(radix, links.len(), |digits| {
        let mut serv = 0u32;
        for &(i, pa, pb) in &flows {
            if serviceable_in_outcome(digits, pa, pb, rule) {
                serv |= 1 << i;
            }
        }
        if serv == 0 {
            return;
        }
        let count = if weighted {
            matchings
                .iter()
                .map(|m| (m.mask() & serv).count_ones())
                .max()
                .unwrap_or(0)
        } else {
            1
        };
        if count == 0 {
            return;
        }
        let mut prob = BigRational::from_integer(BigInt::from(count));
        for (table, &d) in tables.iter().zip(digits.iter()) {
            prob *= table[d as usize].clone();
        }
        total += prob;
    });
    Ok(total)
}

/// The analytic region of a topology: one facet per nonempty flow subset.
pub fn analytic_region(topology: &SwitchTopology, rule: ServiceRule) -> Result<RateRegion> {
    let k = topology.n_flows();
    if k > MAX_FLOWS {
        return Err(Error::CapacityExceeded {
            what: "flows",
            size: k,
            cap: MAX_FLOWS,
        });
    }
    let mut bounds = Vec::with_capacity((1usize << k) - 1);
    for subset in 1..(1u32 << k) {
        bounds.push(SubsetBound {
            subset,
            bound: max_service_rate(topology, subset, rule)?,
        });
    }
    Ok(RateRegion {
        n_flows: k,
        rule,
        bounds,
    })
}

/// Closed-form region for the canonical 3-flow scenarios with uniform link
/// probability, bypassing enumeration. Must agree with [`analytic_region`]
/// facet by facet.
pub fn closed_form_region_3flow(
    p: f64,
    tag: crate::model::ScenarioTag,
    rule: ServiceRule,
) -> Result<RateRegion> {
    use crate::model::ScenarioTag;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain {
            name: "p",
            value: p,
            range: "[0, 1]",
        });
    }
    let p2 = p * p;
    let p3 = p * p * p;
    // Facet values per subset cardinality class.
    let (single, pair_contending, triple): (f64, f64, f64);
    let pair_disjoint: f64;
    match rule {
        ServiceRule::AnyOrientation => {
            single = p2;
            pair_contending = p3 + 2.0 * (1.0 - p) * p2;
            pair_disjoint = 2.0 * p2;
            triple = match tag {
                // All three contend: one of three link pairs must be up.
                ScenarioTag::A => p3 + 3.0 * (1.0 - p) * p2,
                // Path: both end flows can be served together, and the
                // middle flow only helps when both its neighbors are down.
                ScenarioTag::B => 2.0 * p2 + p2 * (1.0 - p) * (1.0 - p),
                ScenarioTag::C => 3.0 * p2,
            };
        }
        ServiceRule::OppositeParity => {
            single = p2 / 2.0;
            pair_contending = p2 - p3 / 4.0;
            pair_disjoint = p2;
            triple = match tag {
                ScenarioTag::A => 3.0 * p2 / 2.0 - 3.0 * p3 / 4.0,
                ScenarioTag::B => p2 + (p2 / 2.0) * (1.0 - p / 2.0) * (1.0 - p / 2.0),
                ScenarioTag::C => 3.0 * p2 / 2.0,
            };
        }
    }
    let pair = |mask: u32| -> f64 {
        match tag {
            ScenarioTag::A => pair_contending,
            // Scenario B: flows 1 and 3 (mask 0b101) are disjoint.
            ScenarioTag::B => {
                if mask == 0b101 {
                    pair_disjoint
                } else {
                    pair_contending
                }
            }
            ScenarioTag::C => pair_disjoint,
        }
    };
    let bounds = (1u32..8)
        .map(|mask| {
            let bound = match mask.count_ones() {
                1 => single,
                2 => pair(mask),
                _ => triple,
            };
            SubsetBound { subset: mask, bound }
        })
        .collect();
    Ok(RateRegion {
        n_flows: 3,
        rule,
        bounds,
    })
}

/// Vertex candidates of `{x >= 0, subset sums <= bounds}` by exhausting
/// constraint combinations; returns the feasible, deduplicated vertices.
fn vertices_of(n: usize, bounds: &[SubsetBound]) -> Vec<Vec<f64>> {
    // Constraint rows: subset facets then coordinate planes x_i = 0.
    let mut rows: Vec<(Vec<f64>, f64)> = bounds
        .iter()
        .map(|b| {
            let coeffs: Vec<f64> = (0..n)
                .map(|i| if b.subset & (1 << i) != 0 { 1.0 } else { 0.0 })
                .collect();
            (coeffs, b.bound)
        })
        .collect();
    for i in 0..n {
        let mut coeffs = vec![0.0; n];
        coeffs[i] = -1.0;
        rows.push((coeffs, 0.0));
    }

    let feasible = |x: &[f64]| -> bool {
        rows.iter().all(|(coeffs, rhs)| {
            let lhs: f64 = coeffs.iter().zip(x).map(|(c, v)| c * v).sum();
            lhs <= rhs + 1e-9
        })
    };

    let mut verts: Vec<Vec<f64>> = Vec::new();
    let m = rows.len();
    let mut pick = vec![0usize; n];
    // Iterate all n-combinations of constraint indices.
    fn combos(m: usize, n: usize, start: usize, pick: &mut Vec<usize>, depth: usize, f: &mut impl FnMut(&[usize])) {
        if depth == n {
            f(pick);
            return;
        }
        for idx in start..m {
            pick[depth] = idx;
            combos(m, n, idx + 1, pick, depth + 1, f);
        }
    }
    combos(m, n, 0, &mut pick, 0, &mut |combo: &[usize]| {
        let mut a: Vec<Vec<f64>> = combo.iter().map(|&i| rows[i].0.clone()).collect();
        let mut b: Vec<f64> = combo.iter().map(|&i| rows[i].1).collect();
        if let Some(x) = solve_square(&mut a, &mut b) {
            if feasible(&x) && !verts.iter().any(|v| close(v, &x)) {
                verts.push(x);
            }
        }
    });
    verts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    verts
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-9)
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_square(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in (row + 1)..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_scenario, ScenarioTag};
    use num::ToPrimitive;

    fn topo(tag: ScenarioTag, p: f64) -> SwitchTopology {
        build_scenario(tag, p, 1.0).unwrap().topology
    }

    #[test]
    fn serviceable_prob_scenario_a_known_values() {
        let t = topo(ScenarioTag::A, 0.5);
        let single_any = serviceable_prob(&t, 0b001, ServiceRule::AnyOrientation).unwrap();
        assert!((single_any - 0.25).abs() < 1e-15);
        let single_parity = serviceable_prob(&t, 0b001, ServiceRule::OppositeParity).unwrap();
        assert!((single_parity - 0.125).abs() < 1e-15);
        let triple_parity = serviceable_prob(&t, 0b111, ServiceRule::OppositeParity).unwrap();
        assert!((triple_parity - 0.28125).abs() < 1e-15);
    }

    #[test]
    fn facets_match_formulas_at_reference_p() {
        let p: f64 = 0.632;
        let region = analytic_region(&topo(ScenarioTag::A, p), ServiceRule::AnyOrientation).unwrap();
        let single = p * p;
        let pair = p.powi(3) + 2.0 * (1.0 - p) * p * p;
        let triple = p.powi(3) + 3.0 * (1.0 - p) * p * p;
        for b in &region.bounds {
            let expected = match b.subset.count_ones() {
                1 => single,
                2 => pair,
                _ => triple,
            };
            assert!((b.bound - expected).abs() < 1e-12, "mask {:#b}", b.subset);
        }
        let parity = analytic_region(&topo(ScenarioTag::A, p), ServiceRule::OppositeParity).unwrap();
        for b in &parity.bounds {
            let expected = match b.subset.count_ones() {
                1 => p * p / 2.0,
                2 => p * p - p.powi(3) / 4.0,
                _ => 3.0 * p * p / 2.0 - 3.0 * p.powi(3) / 4.0,
            };
            assert!((b.bound - expected).abs() < 1e-12, "mask {:#b}", b.subset);
        }
    }

    #[test]
    fn closed_form_matches_enumeration_everywhere() {
        for tag in [ScenarioTag::A, ScenarioTag::B, ScenarioTag::C] {
            for rule in [ServiceRule::AnyOrientation, ServiceRule::OppositeParity] {
                for step in 0..=10 {
                    let p = step as f64 / 10.0;
                    let enumerated = analytic_region(&topo(tag, p), rule).unwrap();
                    let closed = closed_form_region_3flow(p, tag, rule).unwrap();
                    for (e, c) in enumerated.bounds.iter().zip(&closed.bounds) {
                        assert_eq!(e.subset, c.subset);
                        assert!(
                            (e.bound - c.bound).abs() < 1e-12,
                            "{tag:?} {rule:?} p={p} mask {:#b}: {} vs {}",
                            e.subset,
                            e.bound,
                            c.bound
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn scenario_b_closed_form_at_half() {
        let region =
            closed_form_region_3flow(0.5, ScenarioTag::B, ServiceRule::AnyOrientation).unwrap();
        assert!((region.bound_for(0b001).unwrap() - 0.25).abs() < 1e-15);
        assert!((region.bound_for(0b011).unwrap() - 0.375).abs() < 1e-15);
        assert!((region.bound_for(0b110).unwrap() - 0.375).abs() < 1e-15);
        // Disjoint pair: exactly the sum of the singles, so never binding.
        assert!((region.bound_for(0b101).unwrap() - 0.5).abs() < 1e-15);
        // Both end flows served plus the middle flow when its neighbors are
        // down: 2 p^2 + p^2 (1-p)^2 = 0.5625 at p = 0.5.
        assert!((region.bound_for(0b111).unwrap() - 0.5625).abs() < 1e-15);
    }

    #[test]
    fn disjoint_facets_are_singleton_sums() {
        let p = 0.632;
        for rule in [ServiceRule::AnyOrientation, ServiceRule::OppositeParity] {
            let region = analytic_region(&topo(ScenarioTag::C, p), rule).unwrap();
            let single = region.bound_for(0b001).unwrap();
            for b in &region.bounds {
                let card = b.subset.count_ones() as f64;
                assert!((b.bound - card * single).abs() < 1e-12);
                if b.subset.count_ones() > 1 {
                    assert!(b.bound > single);
                }
            }
            let binding = region.binding_facets().unwrap();
            for (b, is_binding) in region.bounds.iter().zip(&binding) {
                assert_eq!(
                    *is_binding,
                    b.subset.count_ones() == 1,
                    "mask {:#b}",
                    b.subset
                );
            }
        }
    }

    #[test]
    fn scenario_b_disjoint_pair_not_binding() {
        let region = analytic_region(&topo(ScenarioTag::B, 0.632), ServiceRule::AnyOrientation).unwrap();
        let binding = region.binding_facets().unwrap();
        for (b, is_binding) in region.bounds.iter().zip(&binding) {
            if b.subset == 0b101 {
                assert!(!is_binding, "disjoint pair facet must be redundant");
            } else {
                assert!(is_binding, "mask {:#b} should bind", b.subset);
            }
        }
    }

    #[test]
    fn facet_monotone_in_p_and_parity_penalty() {
        for tag in [ScenarioTag::A, ScenarioTag::B, ScenarioTag::C] {
            let mut prev: Option<RateRegion> = None;
            for step in 0..=10 {
                let p = step as f64 / 10.0;
                let any = analytic_region(&topo(tag, p), ServiceRule::AnyOrientation).unwrap();
                let par = analytic_region(&topo(tag, p), ServiceRule::OppositeParity).unwrap();
                for (a, o) in any.bounds.iter().zip(&par.bounds) {
                    assert!(o.bound <= a.bound + 1e-15);
                    if p > 0.0 {
                        assert!(o.bound < a.bound, "parity strictly cheaper for p > 0");
                    }
                }
                if let Some(prev_region) = prev {
                    for (lo, hi) in prev_region.bounds.iter().zip(&any.bounds) {
                        assert!(lo.bound <= hi.bound + 1e-15);
                    }
                }
                prev = Some(any);
            }
        }
    }

    #[test]
    fn region_invariants_monotone_subadditive() {
        let region = analytic_region(&topo(ScenarioTag::B, 0.7), ServiceRule::AnyOrientation).unwrap();
        let k = region.n_flows;
        for s in 1u32..(1 << k) {
            for s2 in 1u32..(1 << k) {
                if s & s2 == s && s != s2 {
                    assert!(region.bound_for(s).unwrap() <= region.bound_for(s2).unwrap() + 1e-15);
                }
                if s & s2 == 0 {
                    let joint = region.bound_for(s | s2).unwrap();
                    assert!(joint <= region.bound_for(s).unwrap() + region.bound_for(s2).unwrap() + 1e-12);
                }
            }
        }
    }

    #[test]
    fn pair_facet_inclusion_exclusion_identity() {
        // Two ways to service a contending pair under parity:
        // 2 * (p^2 / 2) - p^3 / 4.
        for step in 1..=10 {
            let p = step as f64 / 10.0;
            let region = analytic_region(&topo(ScenarioTag::A, p), ServiceRule::OppositeParity).unwrap();
            let single = region.bound_for(0b001).unwrap();
            let pair = region.bound_for(0b011).unwrap();
            assert!((pair - (2.0 * single - p.powi(3) / 4.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn rational_route_confirms_compensated_floats() {
        for tag in [ScenarioTag::A, ScenarioTag::B, ScenarioTag::C] {
            // Probabilities that are not exactly representable stress the
            // float accumulation.
            for p in [0.1, 1.0 / 3.0, 0.632, 0.9999] {
                let t = topo(tag, p);
                for rule in [ServiceRule::AnyOrientation, ServiceRule::OppositeParity] {
                    for subset in [0b001u32, 0b011, 0b101, 0b111] {
                        let float = serviceable_prob(&t, subset, rule).unwrap();
                        let exact = serviceable_prob_exact(&t, subset, rule).unwrap();
                        assert!((float - exact.to_f64().unwrap()).abs() < 1e-14);
                        let float_w = max_service_rate(&t, subset, rule).unwrap();
                        let exact_w = max_service_rate_exact(&t, subset, rule).unwrap();
                        assert!((float_w - exact_w.to_f64().unwrap()).abs() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn contains_examples() {
        let region = analytic_region(&topo(ScenarioTag::A, 0.632), ServiceRule::AnyOrientation).unwrap();
        let q = [1.0, 1.0, 1.0];
        assert!(region.contains(&[0.39, 0.0, 0.0], &q));
        assert!(!region.contains(&[0.41, 0.0, 0.0], &q));
        assert!(region.contains(&[0.0, 0.0, 0.0], &q));
        assert!(!region.contains(&[-0.1, 0.0, 0.0], &q));
        // Heterogeneous q rescales the effective load.
        let q2 = [0.5, 1.0, 1.0];
        assert!(!region.contains(&[0.39, 0.0, 0.0], &q2));
        assert!(region.contains(&[0.19, 0.0, 0.0], &q2));
        // Strict interior with margin.
        assert!(!region.contains_with_margin(&[0.399, 0.0, 0.0], &q, 0.01));
    }

    #[test]
    fn unit_cube_at_p_one_disjoint() {
        let region = analytic_region(&topo(ScenarioTag::C, 1.0), ServiceRule::AnyOrientation).unwrap();
        for b in &region.bounds {
            assert_eq!(b.bound, b.subset.count_ones() as f64);
        }
        let verts = region.vertices().unwrap();
        assert_eq!(verts.len(), 8, "unit cube has 8 vertices");
        assert!(verts.iter().any(|v| v == &vec![1.0, 1.0, 1.0]));
    }

    #[test]
    fn vertices_satisfy_all_facets() {
        for tag in [ScenarioTag::A, ScenarioTag::B] {
            let region = analytic_region(&topo(tag, 0.632), ServiceRule::AnyOrientation).unwrap();
            let q = [1.0, 1.0, 1.0];
            for v in region.vertices().unwrap() {
                assert!(region.contains(&v, &q), "{tag:?} vertex {v:?}");
            }
        }
    }

    #[test]
    fn enumeration_cap_enforced() {
        // 11 disjoint flows over 22 users push past the 20-link cap.
        let users: Vec<u32> = (1..=22).collect();
        let links = users
            .iter()
            .map(|_| crate::model::LinkParam::direct(0.5).unwrap())
            .collect();
        let flows = (0..11)
            .map(|i| crate::model::FlowSpec::new(i + 1, (2 * i + 1) as u32, (2 * i + 2) as u32, 1.0))
            .collect();
        let t = SwitchTopology {
            users,
            links,
            flows,
        };
        assert!(t.is_valid());
        let err = serviceable_prob(&t, (1 << 11) - 1, ServiceRule::AnyOrientation).unwrap_err();
        assert!(matches!(err, Error::CapacityExceeded { .. }));
    }

    #[test]
    fn json_roundtrip() {
        let region = analytic_region(&topo(ScenarioTag::A, 0.632), ServiceRule::OppositeParity).unwrap();
        let text = serde_json::to_string(&region.to_json()).unwrap();
        let back = RateRegion::from_json(&text).unwrap();
        assert_eq!(back.n_flows, 3);
        assert_eq!(back.rule, ServiceRule::OppositeParity);
        for (a, b) in region.bounds.iter().zip(&back.bounds) {
            assert_eq!(a.subset, b.subset);
            assert!((a.bound - b.bound).abs() < 1e-15);
        }
    }

    #[test]
    fn boundary_csv_shape() {
        let region = analytic_region(&topo(ScenarioTag::C, 0.632), ServiceRule::AnyOrientation).unwrap();
        let mut buf = Vec::new();
        region
            .write_boundary_samples_csv(&[1.0; 3], 1.0, 0.5, &mut buf)
            .unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "lam1,lam2,lam3,in_region");
        assert_eq!(lines.len(), 1 + 27);
        assert!(lines[1].starts_with("0,0,0,true"));
    }
}
