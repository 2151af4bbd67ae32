//! Winner-determination solvers: exhaustive oracle, exact dynamic programs,
//! greedy approximations, and the multi-seller branch-and-bound plus local
//! exchange heuristic.
//!
//! Every solver is a pure function from an instance to a [`SolverReport`]
//! and is deterministic: equal instances produce bit-identical reports.
//! Ties between equal-welfare optima are broken by preferring to reject the
//! highest differing bidder (so the lowest bidder id wins contested
//! resources), then by the lowest atom index, then the lowest seller index.

mod brute;
mod dp;
mod greedy;
mod multi_seller;

pub use brute::{solve_brute_force, solve_ms_brute_force};
pub use dp::{solve_dp_general_xor, solve_dp_single_minded, solve_upper_dp};
pub use greedy::{solve_greedy_general_xor, solve_greedy_single_minded};
pub use multi_seller::{
    ms_initial_greedy, solve_ms_branch_and_bound, solve_ms_branch_and_bound_seeded,
    solve_ms_heuristic, surrogate_bound,
};

use crate::types::{Allocation, Grant};

/// Outcome of one solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub allocation: Allocation,
    /// True for solvers that guarantee a welfare-maximal allocation.
    pub optimal: bool,
    /// Relaxation bound, when the solver computed one (branch-and-bound).
    pub upper_bound: Option<f64>,
    /// Work counter: table cells, enumeration leaves, or search nodes.
    pub nodes_explored: u64,
}

impl SolverReport {
    pub(crate) fn new(allocation: Allocation, optimal: bool, nodes: u64) -> Self {
        SolverReport {
            allocation,
            optimal,
            upper_bound: None,
            nodes_explored: nodes,
        }
    }
}

/// Deterministic preference between equal-welfare decision vectors (indexed
/// by bid position). Scanning from the highest bidder down, prefer the
/// vector that rejects the bidder; among two grants prefer the lower atom,
/// then the lower seller. Returns true when `a` is strictly preferred.
pub(crate) fn decisions_preferred(a: &[Option<Grant>], b: &[Option<Grant>]) -> bool {
    debug_assert_eq!(a.len(), b.len());
    for k in (0..a.len()).rev() {
        match (&a[k], &b[k]) {
            (None, None) => continue,
            (None, Some(_)) => return true,
            (Some(_), None) => return false,
            (Some(x), Some(y)) => {
                if x.atom != y.atom {
                    return x.atom < y.atom;
                }
                if x.seller != y.seller {
                    return x.seller < y.seller;
                }
            }
        }
    }
    false
}

#[cfg(test)]
pub(crate) mod testgen {
    //! Seeded random instances for solver cross-checks. Values are dyadic
    //! (multiples of 1/16) so welfare sums are exact in f64 and optimal
    //! welfare comparisons across solvers are bit comparisons.

    use rand::Rng;

    use crate::types::{
        Bid, BidAtom, BidderId, CapacityVector, MsWdpInstance, ResourceBundle, WdpInstance, Weights,
    };

    pub fn dyadic_value(rng: &mut impl Rng) -> f64 {
        rng.gen_range(1..=800) as f64 / 16.0
    }

    pub fn gen_single_minded(
        rng: &mut impl Rng,
        max_bids: usize,
        cap_c: u32,
        cap_p: u32,
    ) -> WdpInstance {
        let n = rng.gen_range(1..=max_bids);
        let bids = (0..n)
            .map(|i| {
                let c = rng.gen_range(0..=cap_c / 2 + 1);
                let p = rng.gen_range(0..=cap_p / 2 + 1);
                Bid::single_minded(
                    BidderId(i as u32),
                    ResourceBundle::new(c, p, 0),
                    dyadic_value(rng),
                )
            })
            .collect();
        WdpInstance::new(
            bids,
            CapacityVector::new(rng.gen_range(1..=cap_c), rng.gen_range(1..=cap_p), 0),
            Weights::default(),
        )
        .unwrap()
    }

    pub fn gen_xor(
        rng: &mut impl Rng,
        max_bidders: usize,
        max_atoms: usize,
        cap_c: u32,
        cap_p: u32,
    ) -> WdpInstance {
        let n = rng.gen_range(1..=max_bidders);
        let bids = (0..n)
            .map(|i| {
                let atoms = (0..rng.gen_range(1..=max_atoms))
                    .map(|_| {
                        BidAtom::new(
                            ResourceBundle::new(
                                rng.gen_range(0..=cap_c),
                                rng.gen_range(0..=cap_p),
                                0,
                            ),
                            dyadic_value(rng),
                        )
                    })
                    .collect();
                Bid::xor(BidderId(i as u32), atoms)
            })
            .collect();
        WdpInstance::new(
            bids,
            CapacityVector::new(rng.gen_range(1..=cap_c), rng.gen_range(1..=cap_p), 0),
            Weights::default(),
        )
        .unwrap()
    }

    /// Upper-level style instance: three constrained dimensions, subchannel
    /// counts multiples of `group`.
    pub fn gen_upper(
        rng: &mut impl Rng,
        max_bidders: usize,
        max_atoms: usize,
        group: u32,
        cap: CapacityVector,
    ) -> WdpInstance {
        let n = rng.gen_range(1..=max_bidders);
        let max_groups = cap.subchannel_slots / group;
        let bids = (0..n)
            .map(|i| {
                let atoms = (0..rng.gen_range(1..=max_atoms))
                    .map(|_| {
                        BidAtom::new(
                            ResourceBundle::new(
                                rng.gen_range(0..=max_groups) * group,
                                rng.gen_range(0..=cap.power_units),
                                rng.gen_range(0..=cap.antenna_units),
                            ),
                            dyadic_value(rng),
                        )
                    })
                    .collect();
                Bid::xor(BidderId(i as u32), atoms)
            })
            .collect();
        WdpInstance::new(bids, cap, Weights::default()).unwrap()
    }

    pub fn gen_ms_single_minded(
        rng: &mut impl Rng,
        max_bids: usize,
        sellers: usize,
        cap_c: u32,
        cap_p: u32,
    ) -> MsWdpInstance {
        let n = rng.gen_range(1..=max_bids);
        let bids = (0..n)
            .map(|i| {
                Bid::single_minded(
                    BidderId(i as u32),
                    ResourceBundle::new(rng.gen_range(0..=cap_c), rng.gen_range(0..=cap_p), 0),
                    dyadic_value(rng),
                )
            })
            .collect();
        let sellers = (0..sellers)
            .map(|_| CapacityVector::new(rng.gen_range(1..=cap_c), rng.gen_range(1..=cap_p), 0))
            .collect();
        MsWdpInstance::new(bids, sellers, Weights::default()).unwrap()
    }
}
