//! Multi-seller winner determination: each bidder may be served by at most
//! one seller. Exact solutions come from depth-first branch-and-bound with
//! a surrogate-relaxation bound (all seller capacities pooled into one
//! knapsack, solved by the exact DP); approximate solutions come from a
//! local-exchange heuristic that greedily builds an assignment and then
//! applies one rearrangement and two improvement passes.

use std::collections::BTreeMap;

use crate::error::{AuctionError, Result};
use crate::types::{
    bundle_norm, Allocation, CapacityVector, Grant, MsWdpInstance, ResourceBundle,
};

use super::{solve_dp_general_xor, SolverReport};

const DEFAULT_NODE_BUDGET: u64 = 20_000_000;

/// Welfare of the surrogate relaxation: one pooled knapsack with the summed
/// capacities, solved exactly. Always an upper bound on the multi-seller
/// optimum, and equal to it for a single seller.
pub fn surrogate_bound(instance: &MsWdpInstance) -> Result<f64> {
    let pooled = instance.pooled();
    Ok(solve_dp_general_xor(&pooled)?.allocation.welfare)
}

/// Suffix bound table: `g[k][c][p][a]` is the pooled-capacity optimum over
/// the bidders ranked `k..` in branching order.
struct SuffixBound {
    dim_c: usize,
    dim_p: usize,
    dim_a: usize,
    vals: Vec<f64>,
}

impl SuffixBound {
    fn build(inst: &MsWdpInstance, order: &[usize]) -> SuffixBound {
        let mut pooled = CapacityVector::default();
        for s in &inst.sellers {
            pooled = pooled.plus(s);
        }
        let dim_c = pooled.subchannel_slots as usize + 1;
        let dim_p = pooled.power_units as usize + 1;
        let dim_a = pooled.antenna_units as usize + 1;
        let states = dim_c * dim_p * dim_a;
        let stages = order.len();
        let mut vals = vec![0.0f64; (stages + 1) * states];
        for k in (0..stages).rev() {
            let (head, tail) = vals.split_at_mut((k + 1) * states);
            let cur = &mut head[k * states..];
            let next = &tail[..states];
            let bid = &inst.bids[order[k]];
            for c in 0..dim_c {
                for p in 0..dim_p {
                    for a in 0..dim_a {
                        let here = (c * dim_p + p) * dim_a + a;
                        let mut best = next[here];
                        for atom in &bid.atoms {
                            let (bc, bp, ba) = (
                                atom.bundle.subchannels as usize,
                                atom.bundle.power as usize,
                                atom.bundle.antennas as usize,
                            );
                            if bc <= c && bp <= p && ba <= a {
                                let cand =
                                    next[((c - bc) * dim_p + (p - bp)) * dim_a + (a - ba)]
                                        + atom.value;
                                if cand > best {
                                    best = cand;
                                }
                            }
                        }
                        cur[here] = best;
                    }
                }
            }
        }
        SuffixBound {
            dim_c,
            dim_p,
            dim_a,
            vals,
        }
    }

    fn bound(&self, stage: usize, pooled: &CapacityVector) -> f64 {
        let states = self.dim_c * self.dim_p * self.dim_a;
        let idx = (pooled.subchannel_slots as usize * self.dim_p + pooled.power_units as usize)
            * self.dim_a
            + pooled.antenna_units as usize;
        self.vals[stage * states + idx]
    }
}

fn canonical_welfare(inst: &MsWdpInstance, decisions: &[Option<Grant>]) -> f64 {
    let mut w = 0.0;
    for (bid, d) in inst.bids.iter().zip(decisions) {
        if let Some(g) = d {
            w += bid.atoms[g.atom].value;
        }
    }
    w
}

struct BnB<'a> {
    inst: &'a MsWdpInstance,
    order: Vec<usize>,
    bounds: SuffixBound,
    decisions: Vec<Option<Grant>>,
    incumbent: Vec<Option<Grant>>,
    incumbent_welfare: f64,
    nodes: u64,
    budget: u64,
    exhausted: bool,
}

impl BnB<'_> {
    fn search(&mut self, depth: usize, remaining: &mut Vec<CapacityVector>, value: f64) {
        if self.exhausted {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            self.exhausted = true;
            return;
        }
        if depth == self.order.len() {
            let welfare = canonical_welfare(self.inst, &self.decisions);
            if welfare > self.incumbent_welfare {
                self.incumbent_welfare = welfare;
                self.incumbent = self.decisions.clone();
            }
            return;
        }
        let mut pooled = CapacityVector::default();
        for s in remaining.iter() {
            pooled = pooled.plus(s);
        }
        if value + self.bounds.bound(depth, &pooled) <= self.incumbent_welfare {
            return;
        }
        let pos = self.order[depth];
        for (i, atom) in self.inst.bids[pos].atoms.iter().enumerate() {
            for s in 0..remaining.len() {
                if remaining[s].fits(&atom.bundle) {
                    let saved = remaining[s];
                    remaining[s] = remaining[s].minus(&atom.bundle);
                    self.decisions[pos] = Some(Grant { seller: s, atom: i });
                    self.search(depth + 1, remaining, value + atom.value);
                    remaining[s] = saved;
                    self.decisions[pos] = None;
                }
            }
        }
        self.search(depth + 1, remaining, value);
    }
}

/// Exact multi-seller winner determination via branch-and-bound with the
/// surrogate bound. The optional `warm_start` allocation (any feasible one)
/// initializes the incumbent; otherwise the heuristic seeds it when the
/// instance is single-minded. Exceeding the node budget returns the best
/// incumbent flagged `optimal = false`.
pub fn solve_ms_branch_and_bound_seeded(
    instance: &MsWdpInstance,
    warm_start: Option<&Allocation>,
) -> Result<SolverReport> {
    let n = instance.bids.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut density = vec![0.0f64; n];
    for (pos, bid) in instance.bids.iter().enumerate() {
        density[pos] = bid
            .atoms
            .iter()
            .map(|a| {
                let norm = bundle_norm(&a.bundle, &instance.weights);
                if norm > 0.0 {
                    a.value / norm.sqrt()
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max);
    }
    order.sort_by(|&a, &b| density[b].partial_cmp(&density[a]).unwrap().then(a.cmp(&b)));

    let bounds = SuffixBound::build(instance, &order);

    let mut incumbent: Vec<Option<Grant>> = vec![None; n];
    let mut incumbent_welfare = 0.0;
    let mut seed_from = |alloc: &Allocation| -> Result<()> {
        if !crate::types::check_feasible_ms(alloc, instance)? {
            return Err(AuctionError::Contract(
                "warm-start allocation is infeasible for this instance".into(),
            ));
        }
        if alloc.welfare > incumbent_welfare {
            let mut dec = vec![None; n];
            for (pos, bid) in instance.bids.iter().enumerate() {
                dec[pos] = alloc.grants.get(&bid.bidder).copied();
            }
            incumbent = dec;
            incumbent_welfare = alloc.welfare;
        }
        Ok(())
    };
    if let Some(alloc) = warm_start {
        seed_from(alloc)?;
    } else if instance.all_single_minded() {
        let heuristic = solve_ms_heuristic(instance)?;
        seed_from(&heuristic.allocation)?;
    }

    let mut bnb = BnB {
        inst: instance,
        order,
        bounds,
        decisions: vec![None; n],
        incumbent,
        incumbent_welfare,
        nodes: 0,
        budget: DEFAULT_NODE_BUDGET,
        exhausted: false,
    };
    let mut remaining = instance.sellers.clone();
    let root_bound = bnb.bounds.bound(0, &remaining.iter().fold(
        CapacityVector::default(),
        |acc, s| acc.plus(s),
    ));
    bnb.search(0, &mut remaining, 0.0);

    let mut grants = BTreeMap::new();
    for (pos, bid) in instance.bids.iter().enumerate() {
        if let Some(g) = bnb.incumbent[pos] {
            grants.insert(bid.bidder, g);
        }
    }
    let allocation = Allocation::from_grants(&instance.bids, grants)?;
    let mut report = SolverReport::new(allocation, !bnb.exhausted, bnb.nodes);
    report.upper_bound = Some(root_bound);
    Ok(report)
}

/// Branch-and-bound without a caller-provided warm start.
pub fn solve_ms_branch_and_bound(instance: &MsWdpInstance) -> Result<SolverReport> {
    solve_ms_branch_and_bound_seeded(instance, None)
}

/// State shared by the heuristic passes: users and sellers are re-indexed
/// once (users by normalized value descending, sellers by aggregated
/// capacity ascending) and all passes work on those ranks.
struct Exchange<'a> {
    inst: &'a MsWdpInstance,
    /// rank -> bid position
    users: Vec<usize>,
    /// rank -> original seller index
    sellers: Vec<usize>,
    /// remaining capacity per seller rank
    caps: Vec<CapacityVector>,
    /// assignment per user rank: seller rank
    x: Vec<Option<usize>>,
    ops: u64,
}

impl<'a> Exchange<'a> {
    fn new(inst: &'a MsWdpInstance) -> Exchange<'a> {
        let mut users: Vec<usize> = (0..inst.bids.len()).collect();
        let density: Vec<f64> = inst
            .bids
            .iter()
            .map(|b| {
                let atom = &b.atoms[0];
                let norm = bundle_norm(&atom.bundle, &inst.weights);
                if norm > 0.0 {
                    atom.value / norm.sqrt()
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        users.sort_by(|&a, &b| density[b].partial_cmp(&density[a]).unwrap().then(a.cmp(&b)));

        let mut sellers: Vec<usize> = (0..inst.sellers.len()).collect();
        let aggregated: Vec<f64> = inst
            .sellers
            .iter()
            .map(|s| {
                inst.weights.subchannel * s.subchannel_slots as f64
                    + inst.weights.power * s.power_units as f64
            })
            .collect();
        sellers.sort_by(|&a, &b| {
            aggregated[a]
                .partial_cmp(&aggregated[b])
                .unwrap()
                .then(a.cmp(&b))
        });

        let caps = sellers.iter().map(|&s| inst.sellers[s]).collect();
        let x = vec![None; inst.bids.len()];
        Exchange {
            inst,
            users,
            sellers,
            caps,
            x,
            ops: 0,
        }
    }

    fn bundle(&self, rank: usize) -> &ResourceBundle {
        &self.inst.bids[self.users[rank]].atoms[0].bundle
    }

    fn value(&self, rank: usize) -> f64 {
        self.inst.bids[self.users[rank]].atoms[0].value
    }

    /// First-fit pass for one seller over the ranked users.
    fn greedy_fill(&mut self, seller: usize) {
        for rank in 0..self.users.len() {
            self.ops += 1;
            if self.x[rank].is_none() && self.caps[seller].fits(self.bundle(rank)) {
                self.caps[seller] = self.caps[seller].minus(self.bundle(rank));
                self.x[rank] = Some(seller);
            }
        }
    }

    fn initial_solution(&mut self) {
        self.x.iter_mut().for_each(|v| *v = None);
        for seller in 0..self.sellers.len() {
            self.greedy_fill(seller);
        }
    }

    /// Rebuilds the assignment: previously assigned users are re-placed in
    /// reverse rank order by a circular first-fit scan over the sellers,
    /// then every seller is greedily refilled.
    fn rearrangement(&mut self) {
        let previously: Vec<bool> = self.x.iter().map(Option::is_some).collect();
        for (rank, cap) in self.caps.iter_mut().enumerate() {
            *cap = self.inst.sellers[self.sellers[rank]];
        }
        self.x.iter_mut().for_each(|v| *v = None);
        let m_count = self.sellers.len();
        let mut cursor = 0usize;
        for rank in (0..self.users.len()).rev() {
            if !previously[rank] {
                continue;
            }
            self.ops += 1;
            let found = (0..m_count)
                .map(|off| (cursor + off) % m_count)
                .find(|&l| self.caps[l].fits(self.bundle(rank)));
            if let Some(l) = found {
                self.caps[l] = self.caps[l].minus(self.bundle(rank));
                self.x[rank] = Some(l);
                cursor = if l < cursor { l + 1 } else { 0 };
            }
        }
        for seller in 0..m_count {
            self.greedy_fill(seller);
        }
    }

    /// Pairwise swap across sellers: move the larger of two assigned bids
    /// into the smaller one's seller when the freed slack admits the most
    /// valuable unassigned bid.
    fn first_improvement(&mut self) {
        let n = self.users.len();
        for k in 0..n {
            if self.x[k].is_none() {
                continue;
            }
            for j in k + 1..n {
                self.ops += 1;
                let (Some(sk), Some(sj)) = (self.x[k], self.x[j]) else {
                    continue;
                };
                if sj == sk {
                    continue;
                }
                let (h, l) = if self.bundle(j).subchannels > self.bundle(k).subchannels {
                    (j, k)
                } else {
                    (k, j)
                };
                let (s_h, s_l) = (self.x[h].unwrap(), self.x[l].unwrap());
                let d_c = self.bundle(h).subchannels - self.bundle(l).subchannels;
                let d_p = self.bundle(h).power as i64 - self.bundle(l).power as i64;
                // The larger bid must fit into the smaller bid's seller.
                if d_c > self.caps[s_l].subchannel_slots
                    || d_p > self.caps[s_l].power_units as i64
                {
                    continue;
                }
                let slack_c = self.caps[s_h].subchannel_slots + d_c;
                let slack_p = self.caps[s_h].power_units as i64 + d_p;
                let t = (0..n)
                    .filter(|&u| {
                        self.x[u].is_none()
                            && self.bundle(u).subchannels <= slack_c
                            && (self.bundle(u).power as i64) <= slack_p
                    })
                    .max_by(|&a, &b| {
                        self.value(a)
                            .partial_cmp(&self.value(b))
                            .unwrap()
                            .then(b.cmp(&a))
                    });
                let Some(t) = t else { continue };
                self.caps[s_l].subchannel_slots -= d_c;
                self.caps[s_l].power_units =
                    (self.caps[s_l].power_units as i64 - d_p) as u32;
                self.caps[s_h].subchannel_slots = slack_c - self.bundle(t).subchannels;
                self.caps[s_h].power_units = (slack_p - self.bundle(t).power as i64) as u32;
                self.x[h] = Some(s_l);
                self.x[l] = Some(s_h);
                self.x[t] = Some(s_h);
            }
        }
    }

    /// Evict one winner when a greedily packed set of unassigned bids fits
    /// in its slack and is worth strictly more.
    fn second_improvement(&mut self) {
        let n = self.users.len();
        for k in (0..n).rev() {
            let Some(seller) = self.x[k] else { continue };
            let mut slack_c = self.caps[seller].subchannel_slots + self.bundle(k).subchannels;
            let mut slack_p = self.caps[seller].power_units + self.bundle(k).power;
            let mut packed = Vec::new();
            for j in 0..n {
                self.ops += 1;
                if self.x[j].is_none()
                    && self.bundle(j).subchannels <= slack_c
                    && self.bundle(j).power <= slack_p
                {
                    packed.push(j);
                    slack_c -= self.bundle(j).subchannels;
                    slack_p -= self.bundle(j).power;
                }
            }
            let gain: f64 = packed.iter().map(|&j| self.value(j)).sum();
            if gain > self.value(k) {
                self.x[k] = None;
                for &j in &packed {
                    self.x[j] = Some(seller);
                }
                self.caps[seller].subchannel_slots = slack_c;
                self.caps[seller].power_units = slack_p;
            }
        }
    }

    fn allocation(&self) -> Result<Allocation> {
        let mut grants = BTreeMap::new();
        for (rank, assignment) in self.x.iter().enumerate() {
            if let Some(seller_rank) = assignment {
                grants.insert(
                    self.inst.bids[self.users[rank]].bidder,
                    Grant {
                        seller: self.sellers[*seller_rank],
                        atom: 0,
                    },
                );
            }
        }
        Allocation::from_grants(&self.inst.bids, grants)
    }
}

fn validate_heuristic_instance(instance: &MsWdpInstance) -> Result<()> {
    if !instance.all_single_minded() {
        return Err(AuctionError::Contract(
            "the exchange heuristic handles single-minded bids only".into(),
        ));
    }
    let antennas_used = instance
        .bids
        .iter()
        .any(|b| b.atoms[0].bundle.antennas != 0)
        || instance.sellers.iter().any(|s| s.antenna_units != 0);
    if antennas_used {
        return Err(AuctionError::Contract(
            "the exchange heuristic works on the two-dimensional lower-level lattice".into(),
        ));
    }
    Ok(())
}

/// The greedy initial solution alone (re-indexing plus first-fit), exposed
/// so callers can measure how much the improvement passes gain.
pub fn ms_initial_greedy(instance: &MsWdpInstance) -> Result<SolverReport> {
    validate_heuristic_instance(instance)?;
    let mut ex = Exchange::new(instance);
    ex.initial_solution();
    Ok(SolverReport::new(ex.allocation()?, false, ex.ops))
}

/// Local-exchange heuristic: greedy initial solution, one rearrangement,
/// one pairwise-swap pass, one eviction pass. The improvement passes never
/// lower welfare; if the rearrangement ends up worse than the plain greedy
/// start, the greedy solution is returned instead.
pub fn solve_ms_heuristic(instance: &MsWdpInstance) -> Result<SolverReport> {
    validate_heuristic_instance(instance)?;
    let mut ex = Exchange::new(instance);
    ex.initial_solution();
    let initial = ex.allocation()?;

    ex.rearrangement();
    ex.first_improvement();
    ex.second_improvement();
    let improved = ex.allocation()?;

    let best = if improved.welfare >= initial.welfare {
        improved
    } else {
        initial
    };
    Ok(SolverReport::new(best, false, ex.ops))
}
