//! Hierarchical (two-level) combinatorial auctions for virtualized wireless
//! resource allocation: massive-MIMO-derived bidder valuations, exact and
//! approximate winner-determination solvers, incentive-compatible pricing,
//! multi-seller extensions, and the orchestration that ties both levels
//! together by backward induction.
//!
//! The crate is organized along the problem structure:
//!
//! * [`types`]: bundles, bids, capacities, instances, allocations;
//! * [`mimo`]: the deterministic rate model turning radio parameters into
//!   bid values and implicit-demand allocation profiles;
//! * [`solvers`]: winner determination: brute-force oracle, exact dynamic
//!   programs, greedy approximations, multi-seller branch-and-bound and a
//!   local-exchange heuristic;
//! * [`pricing`]: VCG with base access prices and blocking-set critical
//!   pricing for the greedy solvers;
//! * [`hierarchy`]: the two-level orchestration plus the fixed-sharing,
//!   general-sharing, and multi-seller reference schemes.
//!
//! Everything is deterministic: identical inputs produce bit-identical
//! outputs, which the experiment harness relies on for reproducibility.

pub mod error;
pub mod hierarchy;
pub mod mimo;
pub mod pricing;
pub mod solvers;
pub mod types;

pub use error::{AuctionError, Result};
pub use types::{
    bundle_norm, check_feasible, check_feasible_ms, Allocation, Bid, BidAtom, BidderId,
    CapacityVector, Grant, MsWdpInstance, PricedOutcome, ResourceBundle, WdpInstance, Weights,
};
