//! Exact dynamic programs over the integer resource lattice.
//!
//! One stage per bidder; the state is the remaining capacity vector. The
//! recursion is `f(k, e) = max(f(k-1, e), max_u f(k-1, e - u) + b_k(u))`
//! over the bidder's atoms `u`, with `f(0, .) = 0` (a bid that never fits is
//! simply never accepted). Winners are recovered by re-walking the table
//! from the full-capacity state; on value ties the walk skips the bidder,
//! which realizes the lowest-id-wins rule.
//!
//! The table is dense over stage x slots x power (x antennas in the upper
//! level, where the subchannel axis advances in groups).

use std::collections::BTreeMap;

use crate::error::{AuctionError, Result};
use crate::types::{Allocation, CapacityVector, Grant, WdpInstance};

use super::SolverReport;

struct Lattice {
    dim_c: usize,
    dim_p: usize,
    dim_a: usize,
}

impl Lattice {
    fn new(cap: &CapacityVector, group: u32) -> Lattice {
        Lattice {
            dim_c: (cap.subchannel_slots / group) as usize + 1,
            dim_p: cap.power_units as usize + 1,
            dim_a: cap.antenna_units as usize + 1,
        }
    }

    fn states(&self) -> usize {
        self.dim_c * self.dim_p * self.dim_a
    }

    fn idx(&self, c: usize, p: usize, a: usize) -> usize {
        (c * self.dim_p + p) * self.dim_a + a
    }
}

/// Atom projected onto the lattice: subchannels in group steps.
#[derive(Clone, Copy)]
struct LatticeAtom {
    c: usize,
    p: usize,
    a: usize,
    value: f64,
    index: usize,
}

fn lattice_atoms(inst: &WdpInstance, group: u32) -> Result<Vec<Vec<LatticeAtom>>> {
    inst.bids
        .iter()
        .map(|bid| {
            bid.atoms
                .iter()
                .enumerate()
                .map(|(index, atom)| {
                    if atom.bundle.subchannels % group != 0 {
                        return Err(AuctionError::Contract(format!(
                            "bid {} atom {} requests {} subchannels, not a multiple of the group size {}",
                            bid.bidder, index, atom.bundle.subchannels, group
                        )));
                    }
                    Ok(LatticeAtom {
                        c: (atom.bundle.subchannels / group) as usize,
                        p: atom.bundle.power as usize,
                        a: atom.bundle.antennas as usize,
                        value: atom.value,
                        index,
                    })
                })
                .collect()
        })
        .collect()
}

fn dp_run(inst: &WdpInstance, group: u32) -> Result<SolverReport> {
    let lat = Lattice::new(&inst.capacity, group);
    let atoms = lattice_atoms(inst, group)?;
    let stages = inst.bids.len();
    let states = lat.states();

    let mut table = vec![0.0f64; (stages + 1) * states];
    for k in 1..=stages {
        let (prev_rows, cur_rows) = table.split_at_mut(k * states);
        let prev = &prev_rows[(k - 1) * states..];
        let cur = &mut cur_rows[..states];
        for c in 0..lat.dim_c {
            for p in 0..lat.dim_p {
                for a in 0..lat.dim_a {
                    let here = lat.idx(c, p, a);
                    let mut best = prev[here];
                    for atom in &atoms[k - 1] {
                        if atom.c <= c && atom.p <= p && atom.a <= a {
                            let cand = prev[lat.idx(c - atom.c, p - atom.p, a - atom.a)]
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

    // Back-trace: accept a bidder's best atom only when strictly better than
    // skipping, leaving contested capacity to lower-indexed bidders.
    let mut grants = BTreeMap::new();
    let (mut c, mut p, mut a) = (lat.dim_c - 1, lat.dim_p - 1, lat.dim_a - 1);
    for k in (1..=stages).rev() {
        let prev = &table[(k - 1) * states..k * states];
        let skip = prev[lat.idx(c, p, a)];
        let mut best_take = f64::NEG_INFINITY;
        let mut best_atom: Option<&LatticeAtom> = None;
        for atom in &atoms[k - 1] {
            if atom.c <= c && atom.p <= p && atom.a <= a {
                let cand = prev[lat.idx(c - atom.c, p - atom.p, a - atom.a)] + atom.value;
                if cand > best_take {
                    best_take = cand;
                    best_atom = Some(atom);
                }
            }
        }
        if let Some(atom) = best_atom {
            if best_take > skip {
                grants.insert(
                    inst.bids[k - 1].bidder,
                    Grant {
                        seller: 0,
                        atom: atom.index,
                    },
                );
                c -= atom.c;
                p -= atom.p;
                a -= atom.a;
            }
        }
    }

    let allocation = Allocation::from_grants(&inst.bids, grants)?;
    Ok(SolverReport::new(
        allocation,
        true,
        (stages * states) as u64,
    ))
}

/// Exact DP for single-minded bids: each stage has exactly one accept/skip
/// transition.
pub fn solve_dp_single_minded(instance: &WdpInstance) -> Result<SolverReport> {
    if let Some(bad) = instance.bids.iter().find(|b| !b.is_single_minded()) {
        return Err(AuctionError::Contract(format!(
            "bid {} is not single-minded ({} atoms)",
            bad.bidder,
            bad.atoms.len()
        )));
    }
    dp_run(instance, 1)
}

/// Exact DP over XOR bids: every stage considers all of the bidder's atoms
/// plus the decline transition.
pub fn solve_dp_general_xor(instance: &WdpInstance) -> Result<SolverReport> {
    dp_run(instance, 1)
}

/// Upper-level DP: three constrained dimensions with the subchannel axis in
/// groups of `group_size`. Every atom's subchannel count must be a multiple
/// of the group size.
pub fn solve_upper_dp(instance: &WdpInstance, group_size: u32) -> Result<SolverReport> {
    if group_size == 0 {
        return Err(AuctionError::Contract("group size must be >= 1".into()));
    }
    dp_run(instance, group_size)
}
