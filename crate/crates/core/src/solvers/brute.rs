//! Exhaustive enumeration oracles. Exponential in the bid count, so both
//! entry points carry hard size guards; they exist to cross-check the exact
//! solvers, not to run at scale.

use std::collections::BTreeMap;

use crate::error::{AuctionError, Result};
use crate::types::{Allocation, CapacityVector, Grant, MsWdpInstance, WdpInstance};

use super::{decisions_preferred, SolverReport};

const MAX_BRUTE_ATOMS: usize = 25;

struct Best {
    welfare: f64,
    decisions: Vec<Option<Grant>>,
}

struct SingleSearch<'a> {
    inst: &'a WdpInstance,
    decisions: Vec<Option<Grant>>,
    best: Best,
    nodes: u64,
}

impl SingleSearch<'_> {
    fn recurse(&mut self, k: usize, remaining: CapacityVector, value: f64) {
        self.nodes += 1;
        if k == self.inst.bids.len() {
            let better = value > self.best.welfare
                || (value == self.best.welfare
                    && decisions_preferred(&self.decisions, &self.best.decisions));
            if better {
                self.best.welfare = value;
                self.best.decisions = self.decisions.clone();
            }
            return;
        }
        // Decline first so the all-reject vector is always visited.
        self.decisions[k] = None;
        self.recurse(k + 1, remaining, value);
        for (i, atom) in self.inst.bids[k].atoms.iter().enumerate() {
            if remaining.fits(&atom.bundle) {
                self.decisions[k] = Some(Grant { seller: 0, atom: i });
                self.recurse(k + 1, remaining.minus(&atom.bundle), value + atom.value);
            }
        }
        self.decisions[k] = None;
    }
}

fn report_from_decisions(
    bids: &[crate::types::Bid],
    decisions: &[Option<Grant>],
    nodes: u64,
) -> Result<SolverReport> {
    let mut grants = BTreeMap::new();
    for (bid, d) in bids.iter().zip(decisions) {
        if let Some(grant) = d {
            grants.insert(bid.bidder, *grant);
        }
    }
    let allocation = Allocation::from_grants(bids, grants)?;
    Ok(SolverReport::new(allocation, true, nodes))
}

/// Enumerates every XOR-respecting atom subset and returns a maximum-welfare
/// feasible allocation. Guarded to instances with at most 25 atoms in total.
pub fn solve_brute_force(instance: &WdpInstance) -> Result<SolverReport> {
    let atoms: usize = instance.bids.iter().map(|b| b.atoms.len()).sum();
    if atoms > MAX_BRUTE_ATOMS {
        return Err(AuctionError::TooLarge(format!(
            "brute force is limited to {MAX_BRUTE_ATOMS} atoms, instance has {atoms}"
        )));
    }
    let n = instance.bids.len();
    let mut search = SingleSearch {
        inst: instance,
        decisions: vec![None; n],
        best: Best {
            welfare: 0.0,
            decisions: vec![None; n],
        },
        nodes: 0,
    };
    search.recurse(0, instance.capacity, 0.0);
    report_from_decisions(&instance.bids, &search.best.decisions, search.nodes)
}

struct MsSearch<'a> {
    inst: &'a MsWdpInstance,
    decisions: Vec<Option<Grant>>,
    best: Best,
    nodes: u64,
}

impl MsSearch<'_> {
    fn recurse(&mut self, k: usize, remaining: &mut Vec<CapacityVector>, value: f64) {
        self.nodes += 1;
        if k == self.inst.bids.len() {
            let better = value > self.best.welfare
                || (value == self.best.welfare
                    && decisions_preferred(&self.decisions, &self.best.decisions));
            if better {
                self.best.welfare = value;
                self.best.decisions = self.decisions.clone();
            }
            return;
        }
        self.decisions[k] = None;
        self.recurse(k + 1, remaining, value);
        for (i, atom) in self.inst.bids[k].atoms.iter().enumerate() {
            for s in 0..remaining.len() {
                if remaining[s].fits(&atom.bundle) {
                    let saved = remaining[s];
                    remaining[s] = remaining[s].minus(&atom.bundle);
                    self.decisions[k] = Some(Grant { seller: s, atom: i });
                    self.recurse(k + 1, remaining, value + atom.value);
                    remaining[s] = saved;
                }
            }
        }
        self.decisions[k] = None;
    }
}

/// Enumerates every (bidder, seller, atom) assignment for a multi-seller
/// instance; the oracle for the branch-and-bound solver.
pub fn solve_ms_brute_force(instance: &MsWdpInstance) -> Result<SolverReport> {
    let atoms: usize = instance.bids.iter().map(|b| b.atoms.len()).sum();
    if atoms * instance.sellers.len() > MAX_BRUTE_ATOMS {
        return Err(AuctionError::TooLarge(format!(
            "multi-seller brute force is limited to {} atom-seller pairs, instance has {}",
            MAX_BRUTE_ATOMS,
            atoms * instance.sellers.len()
        )));
    }
    let n = instance.bids.len();
    let mut search = MsSearch {
        inst: instance,
        decisions: vec![None; n],
        best: Best {
            welfare: 0.0,
            decisions: vec![None; n],
        },
        nodes: 0,
    };
    let mut remaining = instance.sellers.clone();
    search.recurse(0, &mut remaining, 0.0);
    report_from_decisions(&instance.bids, &search.best.decisions, search.nodes)
}
