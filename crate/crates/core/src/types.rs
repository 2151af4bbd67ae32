//! Domain types shared by every solver: resource bundles, bids, capacity
//! vectors, winner-determination instances, and allocations.
//!
//! All quantities are integer counts (power is discretized into units on one
//! lattice for both auction levels). Bid values are `f64`; welfare is always
//! recomputed as the sum of accepted atom values in bid order, so equal grant
//! sets produce bit-identical welfare regardless of which solver found them.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{AuctionError, Result};

/// A demanded or granted tuple of subchannels, power units, and antennas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ResourceBundle {
    pub subchannels: u32,
    pub power: u32,
    pub antennas: u32,
}

impl ResourceBundle {
    pub const EMPTY: ResourceBundle = ResourceBundle {
        subchannels: 0,
        power: 0,
        antennas: 0,
    };

    pub fn new(subchannels: u32, power: u32, antennas: u32) -> Self {
        ResourceBundle {
            subchannels,
            power,
            antennas,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.subchannels == 0 && self.power == 0 && self.antennas == 0
    }

    /// Component-wise sum.
    pub fn plus(&self, other: &ResourceBundle) -> ResourceBundle {
        ResourceBundle {
            subchannels: self.subchannels + other.subchannels,
            power: self.power + other.power,
            antennas: self.antennas + other.antennas,
        }
    }

    /// Component-wise dominance: does `other` cover this bundle?
    pub fn covered_by(&self, other: &ResourceBundle) -> bool {
        self.subchannels <= other.subchannels
            && self.power <= other.power
            && self.antennas <= other.antennas
    }
}

impl fmt::Display for ResourceBundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(c={}, p={}, a={})",
            self.subchannels, self.power, self.antennas
        )
    }
}

/// Opaque bidder identity. Ordering is used only for deterministic
/// tie-breaking (lowest id wins contested ties).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BidderId(pub u32);

impl fmt::Display for BidderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "b{}", self.0)
    }
}

/// One (bundle, value) pair inside a bid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BidAtom {
    pub bundle: ResourceBundle,
    pub value: f64,
}

impl BidAtom {
    pub fn new(bundle: ResourceBundle, value: f64) -> Self {
        BidAtom { bundle, value }
    }
}

/// A bid: one atom for a single-minded bidder, or an XOR combination of
/// atoms of which at most one may be accepted.
#[derive(Debug, Clone, PartialEq)]
pub struct Bid {
    pub bidder: BidderId,
    pub atoms: Vec<BidAtom>,
    pub xor: bool,
}

impl Bid {
    pub fn single_minded(bidder: BidderId, bundle: ResourceBundle, value: f64) -> Self {
        Bid {
            bidder,
            atoms: vec![BidAtom::new(bundle, value)],
            xor: false,
        }
    }

    pub fn xor(bidder: BidderId, atoms: Vec<BidAtom>) -> Self {
        Bid {
            bidder,
            atoms,
            xor: true,
        }
    }

    /// A bid with exactly one atom is single-minded.
    pub fn is_single_minded(&self) -> bool {
        self.atoms.len() == 1
    }

    fn validate(&self) -> Result<()> {
        if self.atoms.is_empty() {
            return Err(AuctionError::Config(format!(
                "bid {} has no atoms",
                self.bidder
            )));
        }
        if !self.xor && self.atoms.len() != 1 {
            return Err(AuctionError::Config(format!(
                "bid {} has {} atoms but is not flagged XOR",
                self.bidder,
                self.atoms.len()
            )));
        }
        for atom in &self.atoms {
            if !atom.value.is_finite() || atom.value < 0.0 {
                return Err(AuctionError::Config(format!(
                    "bid {} carries a non-finite or negative value {}",
                    self.bidder, atom.value
                )));
            }
        }
        Ok(())
    }
}

/// Available resources on one seller's side of a WDP.
///
/// In the lower-level auction `subchannel_slots` is the pooled slot budget
/// (subchannels times the per-subchannel user limit J) and `antenna_units`
/// is zero: antennas are capacity-neutral there, all of an MVNO's antennas
/// serve every admitted user. The upper level constrains all three.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CapacityVector {
    pub subchannel_slots: u32,
    pub power_units: u32,
    pub antenna_units: u32,
}

impl CapacityVector {
    pub fn new(subchannel_slots: u32, power_units: u32, antenna_units: u32) -> Self {
        CapacityVector {
            subchannel_slots,
            power_units,
            antenna_units,
        }
    }

    pub fn fits(&self, bundle: &ResourceBundle) -> bool {
        bundle.subchannels <= self.subchannel_slots
            && bundle.power <= self.power_units
            && bundle.antennas <= self.antenna_units
    }

    /// Remaining capacity after granting `bundle`. Caller checks `fits`.
    pub fn minus(&self, bundle: &ResourceBundle) -> CapacityVector {
        CapacityVector {
            subchannel_slots: self.subchannel_slots - bundle.subchannels,
            power_units: self.power_units - bundle.power,
            antenna_units: self.antenna_units - bundle.antennas,
        }
    }

    pub fn plus(&self, other: &CapacityVector) -> CapacityVector {
        CapacityVector {
            subchannel_slots: self.subchannel_slots + other.subchannel_slots,
            power_units: self.power_units + other.power_units,
            antenna_units: self.antenna_units + other.antenna_units,
        }
    }
}

/// Normalization weights for bundle size (the weighted sum over subchannels
/// and power; antennas never enter the norm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub subchannel: f64,
    pub power: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            subchannel: 1.0,
            power: 1.0,
        }
    }
}

impl Weights {
    fn validate(&self) -> Result<()> {
        if !(self.subchannel.is_finite() && self.subchannel > 0.0)
            || !(self.power.is_finite() && self.power > 0.0)
        {
            return Err(AuctionError::Config(format!(
                "weights must be strictly positive, got ({}, {})",
                self.subchannel, self.power
            )));
        }
        Ok(())
    }
}

/// Weighted bundle size used to normalize bids: `w_c * c + w_p * p`.
/// Returns 0 for the empty bundle; callers dividing by the square root
/// must special-case that.
pub fn bundle_norm(bundle: &ResourceBundle, weights: &Weights) -> f64 {
    weights.subchannel * bundle.subchannels as f64 + weights.power * bundle.power as f64
}

fn validate_bids(bids: &[Bid]) -> Result<()> {
    for bid in bids {
        bid.validate()?;
    }
    // Canonical form: strictly ascending bidder ids. This makes bid-vector
    // position, welfare summation order, and the lowest-id tie-break rule
    // coincide for every solver.
    for pair in bids.windows(2) {
        if pair[0].bidder >= pair[1].bidder {
            return Err(AuctionError::Config(format!(
                "bids must be sorted by strictly ascending bidder id ({} then {})",
                pair[0].bidder, pair[1].bidder
            )));
        }
    }
    Ok(())
}

/// A single-seller winner-determination instance.
#[derive(Debug, Clone, PartialEq)]
pub struct WdpInstance {
    pub bids: Vec<Bid>,
    pub capacity: CapacityVector,
    pub weights: Weights,
}

impl WdpInstance {
    pub fn new(bids: Vec<Bid>, capacity: CapacityVector, weights: Weights) -> Result<Self> {
        validate_bids(&bids)?;
        weights.validate()?;
        Ok(WdpInstance {
            bids,
            capacity,
            weights,
        })
    }

    pub fn bid(&self, bidder: BidderId) -> Option<&Bid> {
        self.bids.iter().find(|b| b.bidder == bidder)
    }

    /// The same instance with one bidder removed (used by VCG re-solves and
    /// blocking-set computation).
    pub fn without_bidder(&self, bidder: BidderId) -> WdpInstance {
        WdpInstance {
            bids: self
                .bids
                .iter()
                .filter(|b| b.bidder != bidder)
                .cloned()
                .collect(),
            capacity: self.capacity,
            weights: self.weights,
        }
    }

    pub fn all_single_minded(&self) -> bool {
        self.bids.iter().all(|b| b.is_single_minded())
    }
}

/// A multi-seller winner-determination instance: each bidder may be served
/// by at most one seller, and every seller has its own capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct MsWdpInstance {
    pub bids: Vec<Bid>,
    pub sellers: Vec<CapacityVector>,
    pub weights: Weights,
}

impl MsWdpInstance {
    pub fn new(bids: Vec<Bid>, sellers: Vec<CapacityVector>, weights: Weights) -> Result<Self> {
        validate_bids(&bids)?;
        weights.validate()?;
        if sellers.is_empty() {
            return Err(AuctionError::Config("no sellers".into()));
        }
        Ok(MsWdpInstance {
            bids,
            sellers,
            weights,
        })
    }

    /// Surrogate-pooled single-seller view: all seller capacities summed
    /// component-wise into one knapsack.
    pub fn pooled(&self) -> WdpInstance {
        let mut cap = CapacityVector::default();
        for s in &self.sellers {
            cap = cap.plus(s);
        }
        WdpInstance {
            bids: self.bids.clone(),
            capacity: cap,
            weights: self.weights,
        }
    }

    pub fn without_bidder(&self, bidder: BidderId) -> MsWdpInstance {
        MsWdpInstance {
            bids: self
                .bids
                .iter()
                .filter(|b| b.bidder != bidder)
                .cloned()
                .collect(),
            sellers: self.sellers.clone(),
            weights: self.weights,
        }
    }

    pub fn all_single_minded(&self) -> bool {
        self.bids.iter().all(|b| b.is_single_minded())
    }
}

/// One accepted bid: which seller serves the bidder and which atom won.
/// Single-seller solvers always use seller 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grant {
    pub seller: usize,
    pub atom: usize,
}

/// An accepted-bid mapping plus its social welfare.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Allocation {
    pub grants: BTreeMap<BidderId, Grant>,
    pub welfare: f64,
}

impl Allocation {
    pub fn empty() -> Self {
        Allocation::default()
    }

    /// Builds an allocation from grants, recomputing welfare canonically
    /// (accepted atom values summed in bid order).
    pub fn from_grants(bids: &[Bid], grants: BTreeMap<BidderId, Grant>) -> Result<Self> {
        let mut welfare = 0.0;
        for bid in bids {
            if let Some(grant) = grants.get(&bid.bidder) {
                let atom = bid.atoms.get(grant.atom).ok_or_else(|| {
                    AuctionError::Structural(format!(
                        "grant for {} references atom {} of {}",
                        bid.bidder,
                        grant.atom,
                        bid.atoms.len()
                    ))
                })?;
                welfare += atom.value;
            }
        }
        for bidder in grants.keys() {
            if !bids.iter().any(|b| b.bidder == *bidder) {
                return Err(AuctionError::Structural(format!(
                    "grant references unknown bidder {bidder}"
                )));
            }
        }
        Ok(Allocation { grants, welfare })
    }

    pub fn winners(&self) -> impl Iterator<Item = BidderId> + '_ {
        self.grants.keys().copied()
    }

    pub fn is_winner(&self, bidder: BidderId) -> bool {
        self.grants.contains_key(&bidder)
    }
}

fn check_feasible_sellers(
    allocation: &Allocation,
    bids: &[Bid],
    sellers: &[CapacityVector],
) -> Result<bool> {
    let mut used = vec![ResourceBundle::EMPTY; sellers.len()];
    let mut welfare = 0.0;
    for bid in bids {
        if let Some(grant) = allocation.grants.get(&bid.bidder) {
            let atom = bid.atoms.get(grant.atom).ok_or_else(|| {
                AuctionError::Structural(format!(
                    "allocation grants atom {} to {} which has only {} atoms",
                    grant.atom,
                    bid.bidder,
                    bid.atoms.len()
                ))
            })?;
            if grant.seller >= sellers.len() {
                return Err(AuctionError::Structural(format!(
                    "allocation references seller {} of {}",
                    grant.seller,
                    sellers.len()
                )));
            }
            used[grant.seller] = used[grant.seller].plus(&atom.bundle);
            welfare += atom.value;
        }
    }
    for bidder in allocation.grants.keys() {
        if !bids.iter().any(|b| b.bidder == *bidder) {
            return Err(AuctionError::Structural(format!(
                "allocation references unknown bidder {bidder}"
            )));
        }
    }
    for (seller, total) in used.iter().enumerate() {
        if !sellers[seller].fits(total) {
            return Ok(false);
        }
    }
    // Welfare must equal the grant sum exactly; the canonical summation
    // order makes this a bit comparison, not a tolerance check.
    Ok(welfare == allocation.welfare)
}

/// True iff all capacity and XOR constraints hold and the recorded welfare
/// matches the grant sum. Structural errors signal a corrupted allocation.
pub fn check_feasible(allocation: &Allocation, instance: &WdpInstance) -> Result<bool> {
    check_feasible_sellers(allocation, &instance.bids, &[instance.capacity])
}

/// Multi-seller feasibility: per-seller capacities, at most one grant per
/// bidder (guaranteed by the grant map), welfare matches.
pub fn check_feasible_ms(allocation: &Allocation, instance: &MsWdpInstance) -> Result<bool> {
    check_feasible_sellers(allocation, &instance.bids, &instance.sellers)
}

/// An allocation together with per-winner prices and per-bidder utilities.
/// Losers pay nothing and have zero utility.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PricedOutcome {
    pub allocation: Allocation,
    pub prices: BTreeMap<BidderId, f64>,
    pub utilities: BTreeMap<BidderId, f64>,
}

impl PricedOutcome {
    pub fn total_revenue(&self) -> f64 {
        self.prices.values().sum()
    }
}
