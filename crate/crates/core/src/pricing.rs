//! Incentive-compatible pricing.
//!
//! Exact solvers pair with VCG pricing floored by a per-unit base access
//! price: a winner pays the larger of the base price of her granted bundle
//! and the welfare loss her presence imposes on everyone else. Greedy
//! solvers pair with blocking-set critical pricing: a winner pays the
//! highest normalized value among the bidders she uniquely blocks, rescaled
//! to her own bundle size, again floored by the base price.
//!
//! Bidders are assumed to participate only when their value covers the base
//! price of what they request (the base price is public); instance builders
//! enforce that, which keeps truthful utilities non-negative.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{AuctionError, Result};
use crate::solvers::SolverReport;
use crate::types::{
    bundle_norm, Bid, BidderId, MsWdpInstance, PricedOutcome, ResourceBundle, WdpInstance,
};

/// Per-unit base access prices; the base price of a bundle is linear in its
/// components.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BasePrice {
    pub per_subchannel: f64,
    pub per_power_unit: f64,
    pub per_antenna: f64,
}

impl BasePrice {
    pub const FREE: BasePrice = BasePrice {
        per_subchannel: 0.0,
        per_power_unit: 0.0,
        per_antenna: 0.0,
    };

    pub fn new(per_subchannel: f64, per_power_unit: f64, per_antenna: f64) -> Self {
        BasePrice {
            per_subchannel,
            per_power_unit,
            per_antenna,
        }
    }

    pub fn price(&self, bundle: &ResourceBundle) -> f64 {
        self.per_subchannel * bundle.subchannels as f64
            + self.per_power_unit * bundle.power as f64
            + self.per_antenna * bundle.antennas as f64
    }
}

/// Which pricing rule a level of the auction applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    /// VCG with base floor; requires an exact solver.
    Vcg,
    /// Blocking-set critical pricing with base floor; requires the greedy
    /// solver (incentive compatible for single-minded bidders only).
    GreedyCritical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricingPolicy {
    pub kind: PolicyKind,
    pub base: BasePrice,
}

impl PricingPolicy {
    pub fn vcg(base: BasePrice) -> Self {
        PricingPolicy {
            kind: PolicyKind::Vcg,
            base,
        }
    }

    pub fn greedy_critical(base: BasePrice) -> Self {
        PricingPolicy {
            kind: PolicyKind::GreedyCritical,
            base,
        }
    }
}

fn accepted_value(bid: &Bid, atom: usize) -> f64 {
    bid.atoms[atom].value
}

/// Sum of accepted values over winners other than `skip`, in bid order.
/// Using the same summation order as the reduced solve makes the VCG price
/// an exact zero whenever removing a bidder leaves the others unchanged.
fn others_value(bids: &[Bid], report: &SolverReport, skip: BidderId) -> f64 {
    let mut total = 0.0;
    for bid in bids {
        if bid.bidder == skip {
            continue;
        }
        if let Some(grant) = report.allocation.grants.get(&bid.bidder) {
            total += accepted_value(bid, grant.atom);
        }
    }
    total
}

fn assemble_outcome(
    bids: &[Bid],
    report: SolverReport,
    prices: BTreeMap<BidderId, f64>,
) -> PricedOutcome {
    let mut utilities = BTreeMap::new();
    for bid in bids {
        let u = match report.allocation.grants.get(&bid.bidder) {
            Some(grant) => accepted_value(bid, grant.atom) - prices[&bid.bidder],
            None => 0.0,
        };
        utilities.insert(bid.bidder, u);
    }
    PricedOutcome {
        allocation: report.allocation,
        prices,
        utilities,
    }
}

fn vcg_prices_impl<I, F>(
    bids: &[Bid],
    instance: &I,
    base: &BasePrice,
    without: impl Fn(&I, BidderId) -> I,
    solver: F,
) -> Result<PricedOutcome>
where
    F: Fn(&I) -> Result<SolverReport>,
{
    let report = solver(instance)?;
    if !report.optimal {
        return Err(AuctionError::Policy(
            "VCG pricing requires an exact solver (the report is not optimal)".into(),
        ));
    }
    let mut prices = BTreeMap::new();
    for bid in bids {
        let Some(grant) = report.allocation.grants.get(&bid.bidder) else {
            continue;
        };
        let reduced = without(instance, bid.bidder);
        let reduced_report = solver(&reduced)?;
        if !reduced_report.optimal {
            return Err(AuctionError::Policy(
                "VCG re-solve did not produce an optimal report".into(),
            ));
        }
        let with_k = others_value(bids, &report, bid.bidder);
        let without_k = reduced_report.allocation.welfare;
        let vcg = (without_k - with_k).max(0.0);
        let floor = base.price(&bid.atoms[grant.atom].bundle);
        prices.insert(bid.bidder, vcg.max(floor));
    }
    Ok(assemble_outcome(bids, report, prices))
}

/// VCG pricing with base floor for a single-seller instance. The solver is
/// re-run once per winner on the instance without that bidder.
pub fn vcg_prices<F>(instance: &WdpInstance, base: &BasePrice, solver: F) -> Result<PricedOutcome>
where
    F: Fn(&WdpInstance) -> Result<SolverReport>,
{
    vcg_prices_impl(
        &instance.bids,
        instance,
        base,
        WdpInstance::without_bidder,
        solver,
    )
}

/// VCG pricing with base floor for a multi-seller instance.
pub fn vcg_prices_ms<F>(
    instance: &MsWdpInstance,
    base: &BasePrice,
    solver: F,
) -> Result<PricedOutcome>
where
    F: Fn(&MsWdpInstance) -> Result<SolverReport>,
{
    vcg_prices_impl(
        &instance.bids,
        instance,
        base,
        MsWdpInstance::without_bidder,
        solver,
    )
}

/// Bidders uniquely blocked by `winner_id`: losers of the original run that
/// win once the solver is re-run without the winner.
pub fn blocking_set<F>(
    winner_id: BidderId,
    instance: &WdpInstance,
    solver: F,
) -> Result<BTreeSet<BidderId>>
where
    F: Fn(&WdpInstance) -> Result<SolverReport>,
{
    let original = solver(instance)?;
    if !original.allocation.is_winner(winner_id) {
        return Err(AuctionError::Contract(format!(
            "{winner_id} is not a winner of this instance"
        )));
    }
    let rerun = solver(&instance.without_bidder(winner_id))?;
    Ok(rerun
        .allocation
        .winners()
        .filter(|b| !original.allocation.is_winner(*b))
        .collect())
}

fn critical_price_from_blockers(
    instance: &WdpInstance,
    rerun: &SolverReport,
    original: &SolverReport,
    winner_bundle: &ResourceBundle,
) -> f64 {
    let winner_norm = bundle_norm(winner_bundle, &instance.weights).sqrt();
    let mut best = 0.0f64;
    for bid in &instance.bids {
        let Some(grant) = rerun.allocation.grants.get(&bid.bidder) else {
            continue;
        };
        if original.allocation.is_winner(bid.bidder) {
            continue;
        }
        let atom = &bid.atoms[grant.atom];
        let norm = bundle_norm(&atom.bundle, &instance.weights);
        if norm > 0.0 {
            best = best.max(atom.value / norm.sqrt() * winner_norm);
        }
    }
    best
}

fn greedy_critical_impl<F>(
    instance: &WdpInstance,
    base: &BasePrice,
    solver: F,
) -> Result<PricedOutcome>
where
    F: Fn(&WdpInstance) -> Result<SolverReport>,
{
    let report = solver(instance)?;
    if report.optimal {
        return Err(AuctionError::Policy(
            "critical pricing pairs with the greedy solver, not an exact one".into(),
        ));
    }
    let mut prices = BTreeMap::new();
    for bid in &instance.bids {
        let Some(grant) = report.allocation.grants.get(&bid.bidder) else {
            continue;
        };
        let rerun = solver(&instance.without_bidder(bid.bidder))?;
        let critical =
            critical_price_from_blockers(instance, &rerun, &report, &bid.atoms[grant.atom].bundle);
        let floor = base.price(&bid.atoms[grant.atom].bundle);
        prices.insert(bid.bidder, critical.max(floor));
    }
    Ok(assemble_outcome(&instance.bids, report, prices))
}

/// Blocking-set critical pricing for single-minded instances solved by the
/// greedy algorithm (the scope in which it is incentive compatible).
pub fn greedy_critical_prices<F>(
    instance: &WdpInstance,
    base: &BasePrice,
    solver: F,
) -> Result<PricedOutcome>
where
    F: Fn(&WdpInstance) -> Result<SolverReport>,
{
    if !instance.all_single_minded() {
        return Err(AuctionError::Policy(
            "critical pricing is only incentive compatible for single-minded bids; \
             use greedy_critical_prices_xor for XOR combinations"
            .into(),
        ));
    }
    greedy_critical_impl(instance, base, solver)
}

/// The same blocking-set pricing applied to XOR combinations through their
/// accepted atoms. Well defined for any bids, but carries no incentive
/// compatibility guarantee beyond the single-minded case.
pub fn greedy_critical_prices_xor<F>(
    instance: &WdpInstance,
    base: &BasePrice,
    solver: F,
) -> Result<PricedOutcome>
where
    F: Fn(&WdpInstance) -> Result<SolverReport>,
{
    greedy_critical_impl(instance, base, solver)
}
