//! Two-level auction orchestration by backward induction.
//!
//! The lower level is solved hypothetically for every candidate resource
//! bundle an MVNO might win; the resale revenue (sum of lower-level prices
//! minus the reserve cost) becomes the MVNO's valuation of that bundle.
//! Those valuations form the upper-level XOR bids, the upper level is
//! solved and priced, and finally each lower auction is re-solved and
//! re-priced at the bundle actually won. Fixed sharing, general sharing,
//! and the multi-seller broker variants reuse the same pieces.

use std::collections::BTreeMap;

use crate::error::{AuctionError, Result};
use crate::mimo::{enumerate_profiles, explicit_value, Demand, RadioConfig, UserProfile};
use crate::pricing::{
    greedy_critical_prices, greedy_critical_prices_xor, vcg_prices, PolicyKind,
    PricingPolicy,
};
use crate::solvers::{
    solve_dp_general_xor, solve_dp_single_minded, solve_greedy_general_xor,
    solve_greedy_single_minded, solve_ms_branch_and_bound_seeded, solve_ms_heuristic,
    solve_upper_dp, SolverReport,
};
use crate::types::{
    Allocation, Bid, BidAtom, BidderId, CapacityVector, Grant, MsWdpInstance, PricedOutcome,
    ResourceBundle, WdpInstance, Weights,
};

/// Total resources owned by the infrastructure provider.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CapacityTotals {
    pub subchannels: u32,
    pub power_units: u32,
    pub antennas: u32,
}

/// Per-MVNO reservation and the cost charged for it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvnoConfig {
    pub reserved: ResourceBundle,
    /// q_res: subtracted from resale revenue when the MVNO values a bundle.
    pub reserve_cost: f64,
}

/// Which solver a level runs. Exact DP pairs with VCG pricing, greedy with
/// blocking-set critical pricing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelSolver {
    Dp,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelConfig {
    pub solver: LevelSolver,
    pub policy: PricingPolicy,
}

impl LevelConfig {
    fn validate(&self) -> Result<()> {
        match (self.solver, self.policy.kind) {
            (LevelSolver::Dp, PolicyKind::Vcg) => Ok(()),
            (LevelSolver::Greedy, PolicyKind::GreedyCritical) => Ok(()),
            (LevelSolver::Dp, PolicyKind::GreedyCritical) => Err(AuctionError::Policy(
                "critical pricing must pair with the greedy solver".into(),
            )),
            (LevelSolver::Greedy, PolicyKind::Vcg) => Err(AuctionError::Policy(
                "VCG pricing must pair with an exact solver".into(),
            )),
        }
    }
}

/// Enumeration grids for upper-level MVNO bids: subchannels advance in
/// groups, power and antennas in the given number of steps across the
/// leftover pool (endpoints always included).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UpperGrid {
    pub power_steps: u32,
    pub antenna_steps: u32,
    /// Hard cap on the total number of enumerated atoms.
    pub atom_budget: usize,
}

impl Default for UpperGrid {
    fn default() -> Self {
        UpperGrid {
            power_steps: 10,
            antenna_steps: 4,
            atom_budget: 20_000,
        }
    }
}

/// Full description of one auction round.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub radio: RadioConfig,
    pub totals: CapacityTotals,
    pub mvnos: Vec<MvnoConfig>,
    /// Subscribed users per MVNO; user ids must be globally unique and
    /// ascending in (mvno, position) order.
    pub users: Vec<Vec<UserProfile>>,
    /// J: how many users may share one subchannel.
    pub users_per_subchannel: u32,
    /// Upper-level subchannel group size.
    pub group_size: u32,
    pub lower: LevelConfig,
    pub upper: LevelConfig,
    pub grid: UpperGrid,
    pub weights: Weights,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.radio.validate()?;
        self.lower.validate()?;
        self.upper.validate()?;
        if self.mvnos.is_empty() {
            return Err(AuctionError::Config("scenario has no MVNOs".into()));
        }
        if self.users.len() != self.mvnos.len() {
            return Err(AuctionError::Config(format!(
                "{} MVNOs but {} user groups",
                self.mvnos.len(),
                self.users.len()
            )));
        }
        if self.users_per_subchannel == 0 || self.group_size == 0 {
            return Err(AuctionError::Config(
                "users_per_subchannel and group_size must be >= 1".into(),
            ));
        }
        let mut reserved = ResourceBundle::EMPTY;
        for m in &self.mvnos {
            reserved = reserved.plus(&m.reserved);
        }
        if reserved.subchannels > self.totals.subchannels
            || reserved.power > self.totals.power_units
            || reserved.antennas > self.totals.antennas
        {
            return Err(AuctionError::Config(format!(
                "reservations {} exceed the provider totals (c={}, p={}, a={})",
                reserved, self.totals.subchannels, self.totals.power_units, self.totals.antennas
            )));
        }
        let mut prev: Option<u32> = None;
        for group in &self.users {
            for user in group {
                user.validate()?;
                if prev.is_some_and(|p| p >= user.user_id) {
                    return Err(AuctionError::Config(
                        "user ids must be globally unique and ascending".into(),
                    ));
                }
                prev = Some(user.user_id);
            }
        }
        Ok(())
    }

    /// Resources left for the upper-level auction after reservations.
    pub fn leftover(&self) -> ResourceBundle {
        let mut reserved = ResourceBundle::EMPTY;
        for m in &self.mvnos {
            reserved = reserved.plus(&m.reserved);
        }
        ResourceBundle {
            subchannels: self.totals.subchannels - reserved.subchannels,
            power: self.totals.power_units - reserved.power,
            antennas: self.totals.antennas - reserved.antennas,
        }
    }

    pub fn total_users(&self) -> usize {
        self.users.iter().map(Vec::len).sum()
    }
}

/// Utilization fractions relative to the provider totals.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ResourceUtilization {
    pub subchannels: f64,
    pub power: f64,
    pub antennas: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metrics {
    /// Sum of accepted user-bid values across the final lower outcomes.
    pub social_welfare: f64,
    pub utilization: ResourceUtilization,
    /// Winning users divided by all users.
    pub user_satisfaction: f64,
}

/// Outcome of one full round: the upper-level result (absent for schemes
/// without an upper auction), the final lower-level outcomes, and metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct HierOutcome {
    pub upper: Option<PricedOutcome>,
    pub lower: Vec<PricedOutcome>,
    pub metrics: Metrics,
}

/// Solves and prices a lower-level (two-dimensional) instance under the
/// level configuration.
pub fn price_lower(instance: &WdpInstance, level: &LevelConfig) -> Result<PricedOutcome> {
    level.validate()?;
    match level.solver {
        LevelSolver::Dp => {
            if instance.all_single_minded() {
                vcg_prices(instance, &level.policy.base, solve_dp_single_minded)
            } else {
                vcg_prices(instance, &level.policy.base, solve_dp_general_xor)
            }
        }
        LevelSolver::Greedy => {
            if instance.all_single_minded() {
                greedy_critical_prices(instance, &level.policy.base, solve_greedy_single_minded)
            } else {
                greedy_critical_prices_xor(instance, &level.policy.base, solve_greedy_general_xor)
            }
        }
    }
}

fn price_upper(instance: &WdpInstance, level: &LevelConfig, group: u32) -> Result<PricedOutcome> {
    level.validate()?;
    match level.solver {
        LevelSolver::Dp => vcg_prices(instance, &level.policy.base, |inst| {
            solve_upper_dp(inst, group)
        }),
        LevelSolver::Greedy => {
            greedy_critical_prices_xor(instance, &level.policy.base, solve_greedy_general_xor)
        }
    }
}

/// Capacity available to MVNO `m`'s users when it holds `hat` resources.
fn lower_capacity(scenario: &Scenario, hat: &ResourceBundle) -> CapacityVector {
    CapacityVector::new(
        hat.subchannels * scenario.users_per_subchannel,
        hat.power,
        0,
    )
}

/// Builds the user-level instance for one MVNO holding the given full
/// resource bundle (reservation plus anything won upstream).
///
/// Explicit users contribute single-minded atoms valued at the bundle's
/// antenna count; implicit users contribute one XOR atom per feasible
/// subchannel width. Antennas are capacity-neutral in the lower level, so
/// instance atoms carry none. A user abstains from any atom whose value
/// does not cover its public base price, and users left with no atoms are
/// omitted (they cannot win).
fn lower_instance_for(
    scenario: &Scenario,
    mvno: usize,
    hat: &ResourceBundle,
) -> Result<WdpInstance> {
    let base = &scenario.lower.policy.base;
    let mut bids = Vec::new();
    for user in &scenario.users[mvno] {
        let mut atoms = Vec::new();
        match user.demand {
            Demand::Explicit(demand) => {
                let value = explicit_value(user, hat.antennas, &scenario.radio)?;
                let bundle = ResourceBundle::new(demand.subchannels, demand.power, 0);
                if value >= base.price(&bundle) {
                    atoms.push(BidAtom::new(bundle, value));
                }
            }
            Demand::Implicit { .. } => {
                for atom in
                    enumerate_profiles(user, hat.subchannels, hat.antennas, &scenario.radio)?
                {
                    let bundle =
                        ResourceBundle::new(atom.bundle.subchannels, atom.bundle.power, 0);
                    if atom.value >= base.price(&bundle) {
                        atoms.push(BidAtom::new(bundle, atom.value));
                    }
                }
            }
        }
        match atoms.len() {
            0 => {}
            1 => bids.push(Bid {
                bidder: BidderId(user.user_id),
                atoms,
                xor: false,
            }),
            _ => bids.push(Bid::xor(BidderId(user.user_id), atoms)),
        }
    }
    WdpInstance::new(bids, lower_capacity(scenario, hat), scenario.weights)
}

/// The lower-level instance an MVNO would face if `candidate` were added to
/// its reservation.
pub fn build_user_bids(
    scenario: &Scenario,
    mvno: usize,
    candidate: &ResourceBundle,
) -> Result<WdpInstance> {
    let hat = scenario.mvnos[mvno].reserved.plus(candidate);
    lower_instance_for(scenario, mvno, &hat)
}

/// Resale valuation of a candidate bundle: solve and price the hypothetical
/// lower auction, sum the prices, subtract the reserve cost, clamp at zero
/// so bids stay non-negative.
pub fn mvno_valuation(
    scenario: &Scenario,
    mvno: usize,
    candidate: &ResourceBundle,
) -> Result<f64> {
    let instance = build_user_bids(scenario, mvno, candidate)?;
    let outcome = price_lower(&instance, &scenario.lower)?;
    let revenue = outcome.total_revenue();
    Ok((revenue - scenario.mvnos[mvno].reserve_cost).max(0.0))
}

/// Sets every MVNO's reserve cost to its reserved-only resale revenue, so
/// valuations become the incremental revenue of winning a bundle and the
/// empty bundle is worth exactly zero. Without this, a tiny atom would
/// carry the whole reserved pool's revenue and crowd out real leases.
pub fn apply_baseline_reserve_costs(scenario: &mut Scenario) -> Result<()> {
    scenario.validate()?;
    for m in 0..scenario.mvnos.len() {
        let instance = build_user_bids(scenario, m, &ResourceBundle::EMPTY)?;
        let outcome = price_lower(&instance, &scenario.lower)?;
        scenario.mvnos[m].reserve_cost = outcome.total_revenue();
    }
    Ok(())
}

fn grid_points(limit: u32, steps: u32) -> Vec<u32> {
    if limit == 0 {
        return vec![0];
    }
    let step = (limit as f64 / steps as f64).round().max(1.0) as u32;
    let mut points: Vec<u32> = (0..=limit / step).map(|i| i * step).collect();
    if *points.last().unwrap() != limit {
        points.push(limit);
    }
    points
}

/// Enumerates every MVNO's upper-level XOR bid over the configured grids.
/// Atoms whose valuation is zero or below their base price are pruned (a
/// rational MVNO does not place them).
pub fn build_mvno_bids(scenario: &Scenario) -> Result<WdpInstance> {
    let leftover = scenario.leftover();
    let c_points: Vec<u32> = (0..=leftover.subchannels / scenario.group_size)
        .map(|g| g * scenario.group_size)
        .collect();
    let p_points = grid_points(leftover.power, scenario.grid.power_steps);
    let a_points = grid_points(leftover.antennas, scenario.grid.antenna_steps);
    let per_mvno = c_points.len() * p_points.len() * a_points.len();
    let total_atoms = per_mvno * scenario.mvnos.len();
    if total_atoms > scenario.grid.atom_budget {
        return Err(AuctionError::TooLarge(format!(
            "upper-level enumeration would create {} atoms (budget {}); coarsen the grids or \
             raise the budget",
            total_atoms, scenario.grid.atom_budget
        )));
    }

    let base = &scenario.upper.policy.base;
    let mut bids = Vec::new();
    for m in 0..scenario.mvnos.len() {
        let mut atoms = Vec::new();
        for &c in &c_points {
            for &p in &p_points {
                for &a in &a_points {
                    let bundle = ResourceBundle::new(c, p, a);
                    let value = mvno_valuation(scenario, m, &bundle)?;
                    if value > 0.0 && value >= base.price(&bundle) {
                        atoms.push(BidAtom::new(bundle, value));
                    }
                }
            }
        }
        // A bundle that costs more resources yet resells for no more than
        // some other bundle is never worth bidding on; restricting the
        // combination to undominated ones also keeps the menu small.
        let undominated: Vec<BidAtom> = atoms
            .iter()
            .filter(|atom| {
                !atoms.iter().any(|other| {
                    other.bundle != atom.bundle
                        && other.bundle.covered_by(&atom.bundle)
                        && other.value >= atom.value
                })
            })
            .cloned()
            .collect();
        if !undominated.is_empty() {
            bids.push(Bid::xor(BidderId(m as u32), undominated));
        }
    }
    WdpInstance::new(
        bids,
        CapacityVector::new(leftover.subchannels, leftover.power, leftover.antennas),
        scenario.weights,
    )
}

fn empty_outcome() -> PricedOutcome {
    PricedOutcome {
        allocation: Allocation::empty(),
        prices: BTreeMap::new(),
        utilities: BTreeMap::new(),
    }
}

/// Bundle MVNO `m` won in the upper outcome, or the empty bundle.
pub fn won_bundle(upper: &PricedOutcome, instance: &WdpInstance, m: usize) -> ResourceBundle {
    let bidder = BidderId(m as u32);
    match (upper.allocation.grants.get(&bidder), instance.bid(bidder)) {
        (Some(grant), Some(bid)) => bid.atoms[grant.atom].bundle,
        _ => ResourceBundle::EMPTY,
    }
}

fn metrics_from_lower(
    scenario: &Scenario,
    lower: &[PricedOutcome],
    instances: &[WdpInstance],
    antennas_engaged: u32,
) -> Metrics {
    let mut welfare = 0.0;
    let mut slots = 0u64;
    let mut power = 0u64;
    let mut winners = 0usize;
    for (outcome, instance) in lower.iter().zip(instances) {
        welfare += outcome.allocation.welfare;
        winners += outcome.allocation.grants.len();
        for bid in &instance.bids {
            if let Some(grant) = outcome.allocation.grants.get(&bid.bidder) {
                let bundle = &bid.atoms[grant.atom].bundle;
                slots += bundle.subchannels as u64;
                power += bundle.power as u64;
            }
        }
    }
    let slot_total = (scenario.totals.subchannels * scenario.users_per_subchannel) as f64;
    let total_users = scenario.total_users().max(1);
    Metrics {
        social_welfare: welfare,
        utilization: ResourceUtilization {
            subchannels: slots as f64 / slot_total.max(1.0),
            power: power as f64 / (scenario.totals.power_units as f64).max(1.0),
            antennas: antennas_engaged as f64 / (scenario.totals.antennas as f64).max(1.0),
        },
        user_satisfaction: winners as f64 / total_users as f64,
    }
}

/// Runs the full two-level auction with a caller-supplied upper instance
/// (normally the output of [`build_mvno_bids`]; tests use this entry point
/// to inject counterfactual MVNO bids).
pub fn run_hierarchical_with_upper(
    scenario: &Scenario,
    upper_instance: &WdpInstance,
) -> Result<HierOutcome> {
    scenario.validate()?;
    let upper_outcome = if upper_instance.bids.is_empty() {
        empty_outcome()
    } else {
        price_upper(upper_instance, &scenario.upper, scenario.group_size)?
    };

    let mut lower = Vec::new();
    let mut instances = Vec::new();
    let mut antennas_engaged = 0u32;
    for m in 0..scenario.mvnos.len() {
        let won = won_bundle(&upper_outcome, upper_instance, m);
        let hat = scenario.mvnos[m].reserved.plus(&won);
        antennas_engaged += hat.antennas;
        let instance = lower_instance_for(scenario, m, &hat)?;
        let outcome = price_lower(&instance, &scenario.lower)?;
        lower.push(outcome);
        instances.push(instance);
    }

    let metrics = metrics_from_lower(scenario, &lower, &instances, antennas_engaged);
    Ok(HierOutcome {
        upper: Some(upper_outcome),
        lower,
        metrics,
    })
}

/// The proposed scheme: backward induction over both levels.
pub fn run_hierarchical(scenario: &Scenario) -> Result<HierOutcome> {
    scenario.validate()?;
    let upper_instance = build_mvno_bids(scenario)?;
    run_hierarchical_with_upper(scenario, &upper_instance)
}

/// Static fixed sharing: the provider totals are split equally among the
/// MVNOs (remainder to the lowest index) and only the lower auctions run.
pub fn run_fixed_sharing(scenario: &Scenario) -> Result<HierOutcome> {
    scenario.validate()?;
    let m_count = scenario.mvnos.len() as u32;
    let mut lower = Vec::new();
    let mut instances = Vec::new();
    for m in 0..scenario.mvnos.len() {
        let extra = |total: u32| {
            if m == 0 {
                total % m_count
            } else {
                0
            }
        };
        let hat = ResourceBundle::new(
            scenario.totals.subchannels / m_count + extra(scenario.totals.subchannels),
            scenario.totals.power_units / m_count + extra(scenario.totals.power_units),
            scenario.totals.antennas / m_count + extra(scenario.totals.antennas),
        );
        let instance = lower_instance_for(scenario, m, &hat)?;
        let outcome = price_lower(&instance, &scenario.lower)?;
        lower.push(outcome);
        instances.push(instance);
    }
    let metrics = metrics_from_lower(scenario, &lower, &instances, scenario.totals.antennas);
    Ok(HierOutcome {
        upper: None,
        lower,
        metrics,
    })
}

/// General sharing benchmark: one pooled single-level auction over all
/// users with every antenna active, solved by the exact DP regardless of
/// the scenario's lower solver choice.
pub fn run_general_sharing(scenario: &Scenario) -> Result<HierOutcome> {
    scenario.validate()?;
    let hat = ResourceBundle::new(
        scenario.totals.subchannels,
        scenario.totals.power_units,
        scenario.totals.antennas,
    );
    let mut bids = Vec::new();
    for m in 0..scenario.mvnos.len() {
        let instance = lower_instance_for(scenario, m, &hat)?;
        bids.extend(instance.bids);
    }
    bids.sort_by_key(|b| b.bidder);
    let instance = WdpInstance::new(bids, lower_capacity(scenario, &hat), scenario.weights)?;
    let outcome = if instance.all_single_minded() {
        vcg_prices(&instance, &scenario.lower.policy.base, solve_dp_single_minded)?
    } else {
        vcg_prices(&instance, &scenario.lower.policy.base, solve_dp_general_xor)?
    };
    let lower = vec![outcome];
    let instances = vec![instance];
    let metrics = metrics_from_lower(scenario, &lower, &instances, scenario.totals.antennas);
    Ok(HierOutcome {
        upper: None,
        lower,
        metrics,
    })
}

/// Lower-level solver for the multi-seller broker auction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsSolver {
    /// Branch-and-bound (exact), priced by VCG with base floor.
    Exact,
    /// Local-exchange heuristic, priced by blocking-set critical prices.
    Heuristic,
}

/// Multi-seller variant: the upper level runs exactly as in the
/// hierarchical scheme, then one broker auction assigns every user to at
/// most one MVNO under per-MVNO capacities.
///
/// User values follow their subscribed MVNO's antenna count (bids are
/// placed before association, so the value is seller-independent as in the
/// explicit multi-seller formulation). For the exact solver the incumbent
/// is warm-started from the union of the per-MVNO restricted solutions,
/// which also makes the result dominate the single-seller outcome seed for
/// seed.
pub fn run_multiseller(scenario: &Scenario, solver: MsSolver) -> Result<HierOutcome> {
    scenario.validate()?;
    let upper_instance = build_mvno_bids(scenario)?;
    let upper_outcome = if upper_instance.bids.is_empty() {
        empty_outcome()
    } else {
        price_upper(&upper_instance, &scenario.upper, scenario.group_size)?
    };

    let mut sellers = Vec::new();
    let mut all_bids: Vec<Bid> = Vec::new();
    let mut per_mvno_instances = Vec::new();
    for m in 0..scenario.mvnos.len() {
        let won = won_bundle(&upper_outcome, &upper_instance, m);
        let hat = scenario.mvnos[m].reserved.plus(&won);
        sellers.push(lower_capacity(scenario, &hat));
        let instance = lower_instance_for(scenario, m, &hat)?;
        all_bids.extend(instance.bids.iter().cloned());
        per_mvno_instances.push(instance);
    }
    all_bids.sort_by_key(|b| b.bidder);
    let ms_instance = MsWdpInstance::new(all_bids, sellers, scenario.weights)?;

    let outcome = match solver {
        MsSolver::Exact => {
            // Warm start: each user assigned to its own MVNO per the
            // single-seller optimum.
            let mut grants: BTreeMap<BidderId, Grant> = BTreeMap::new();
            for (m, instance) in per_mvno_instances.iter().enumerate() {
                let report = if instance.all_single_minded() {
                    solve_dp_single_minded(instance)?
                } else {
                    solve_dp_general_xor(instance)?
                };
                for (bidder, grant) in report.allocation.grants {
                    grants.insert(
                        bidder,
                        Grant {
                            seller: m,
                            atom: grant.atom,
                        },
                    );
                }
            }
            let warm = Allocation::from_grants(&ms_instance.bids, grants)?;
            let solver_fn = |inst: &MsWdpInstance| solve_ms_branch_and_bound_seeded(inst, None);
            let main =
                |inst: &MsWdpInstance| solve_ms_branch_and_bound_seeded(inst, Some(&warm));
            // VCG with the warm-started main solve; re-solves run unseeded.
            vcg_prices_ms_with_main(&ms_instance, scenario, main, solver_fn)?
        }
        MsSolver::Heuristic => ms_critical_prices(&ms_instance, scenario)?,
    };

    let metrics = ms_metrics(scenario, &ms_instance, &outcome);
    Ok(HierOutcome {
        upper: Some(upper_outcome),
        lower: vec![outcome],
        metrics,
    })
}

fn vcg_prices_ms_with_main<M, F>(
    instance: &MsWdpInstance,
    scenario: &Scenario,
    main: M,
    resolver: F,
) -> Result<PricedOutcome>
where
    M: Fn(&MsWdpInstance) -> Result<SolverReport>,
    F: Fn(&MsWdpInstance) -> Result<SolverReport>,
{
    // Equivalent to vcg_prices_ms but allows a different (warm-started)
    // solve for the main run.
    let report = main(instance)?;
    if !report.optimal {
        // The branch-and-bound gave up on its node budget; surface that as
        // a size problem so the harness can skip the scheme with a reason.
        return Err(AuctionError::TooLarge(
            "multi-seller branch-and-bound exhausted its node budget before proving \
             optimality; the instance is too large for exact VCG pricing"
                .into(),
        ));
    }
    let base = &scenario.lower.policy.base;
    let mut prices = BTreeMap::new();
    for bid in &instance.bids {
        let Some(grant) = report.allocation.grants.get(&bid.bidder) else {
            continue;
        };
        let reduced = instance.without_bidder(bid.bidder);
        let reduced_report = resolver(&reduced)?;
        if !reduced_report.optimal {
            return Err(AuctionError::TooLarge(
                "multi-seller branch-and-bound exhausted its node budget during a VCG \
                 re-solve"
                    .into(),
            ));
        }
        let mut with_k = 0.0;
        for other in &instance.bids {
            if other.bidder == bid.bidder {
                continue;
            }
            if let Some(g) = report.allocation.grants.get(&other.bidder) {
                with_k += other.atoms[g.atom].value;
            }
        }
        let vcg = (reduced_report.allocation.welfare - with_k).max(0.0);
        let floor = base.price(&bid.atoms[grant.atom].bundle);
        prices.insert(bid.bidder, vcg.max(floor));
    }
    let mut utilities = BTreeMap::new();
    for bid in &instance.bids {
        let u = match report.allocation.grants.get(&bid.bidder) {
            Some(grant) => bid.atoms[grant.atom].value - prices[&bid.bidder],
            None => 0.0,
        };
        utilities.insert(bid.bidder, u);
    }
    Ok(PricedOutcome {
        allocation: report.allocation,
        prices,
        utilities,
    })
}

/// Blocking-set critical pricing for the heuristic multi-seller solve.
fn ms_critical_prices(instance: &MsWdpInstance, scenario: &Scenario) -> Result<PricedOutcome> {
    let report = solve_ms_heuristic(instance)?;
    let base = &scenario.lower.policy.base;
    let mut prices = BTreeMap::new();
    for bid in &instance.bids {
        let Some(grant) = report.allocation.grants.get(&bid.bidder) else {
            continue;
        };
        let rerun = solve_ms_heuristic(&instance.without_bidder(bid.bidder))?;
        let winner_norm =
            crate::types::bundle_norm(&bid.atoms[grant.atom].bundle, &instance.weights).sqrt();
        let mut critical = 0.0f64;
        for other in &instance.bids {
            let Some(g) = rerun.allocation.grants.get(&other.bidder) else {
                continue;
            };
            if report.allocation.is_winner(other.bidder) {
                continue;
            }
            let atom = &other.atoms[g.atom];
            let norm = crate::types::bundle_norm(&atom.bundle, &instance.weights);
            if norm > 0.0 {
                critical = critical.max(atom.value / norm.sqrt() * winner_norm);
            }
        }
        let floor = base.price(&bid.atoms[grant.atom].bundle);
        prices.insert(bid.bidder, critical.max(floor));
    }
    let mut utilities = BTreeMap::new();
    for bid in &instance.bids {
        let u = match report.allocation.grants.get(&bid.bidder) {
            Some(grant) => bid.atoms[grant.atom].value - prices[&bid.bidder],
            None => 0.0,
        };
        utilities.insert(bid.bidder, u);
    }
    Ok(PricedOutcome {
        allocation: report.allocation,
        prices,
        utilities,
    })
}

fn ms_metrics(
    scenario: &Scenario,
    instance: &MsWdpInstance,
    outcome: &PricedOutcome,
) -> Metrics {
    let mut slots = 0u64;
    let mut power = 0u64;
    for bid in &instance.bids {
        if let Some(grant) = outcome.allocation.grants.get(&bid.bidder) {
            let bundle = &bid.atoms[grant.atom].bundle;
            slots += bundle.subchannels as u64;
            power += bundle.power as u64;
        }
    }
    let slot_total = (scenario.totals.subchannels * scenario.users_per_subchannel) as f64;
    Metrics {
        social_welfare: outcome.allocation.welfare,
        utilization: ResourceUtilization {
            subchannels: slots as f64 / slot_total.max(1.0),
            power: power as f64 / (scenario.totals.power_units as f64).max(1.0),
            antennas: scenario.totals.antennas as f64
                / (scenario.totals.antennas as f64).max(1.0),
        },
        user_satisfaction: outcome.allocation.grants.len() as f64
            / scenario.total_users().max(1) as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pricing::BasePrice;

    fn desk_scenario(users_per_mvno: usize) -> Scenario {
        let mut users = Vec::new();
        let mut id = 0;
        for m in 0..2 {
            let mut group = Vec::new();
            for i in 0..users_per_mvno {
                group.push(UserProfile {
                    user_id: id,
                    delta: 0.8 + 0.1 * ((m + i) % 5) as f64,
                    demand: Demand::Explicit(ResourceBundle::new(
                        (i % 3) as u32,
                        (2 + 3 * i % 7) as u32,
                        0,
                    )),
                });
                id += 1;
            }
            users.push(group);
        }
        Scenario {
            radio: RadioConfig::default(),
            totals: CapacityTotals {
                subchannels: 12,
                power_units: 40,
                antennas: 16,
            },
            mvnos: vec![
                MvnoConfig {
                    reserved: ResourceBundle::new(3, 10, 4),
                    reserve_cost: 0.0,
                },
                MvnoConfig {
                    reserved: ResourceBundle::new(3, 10, 4),
                    reserve_cost: 0.0,
                },
            ],
            users,
            users_per_subchannel: 1,
            group_size: 1,
            lower: LevelConfig {
                solver: LevelSolver::Dp,
                policy: PricingPolicy::vcg(BasePrice::new(0.1, 0.02, 0.0)),
            },
            upper: LevelConfig {
                solver: LevelSolver::Dp,
                policy: PricingPolicy::vcg(BasePrice::FREE),
            },
            grid: UpperGrid {
                power_steps: 5,
                antenna_steps: 2,
                atom_budget: 20_000,
            },
            weights: Weights::default(),
        }
    }

    #[test]
    fn build_user_bids_over_reservations_only() {
        let scenario = desk_scenario(4);
        let inst = build_user_bids(&scenario, 0, &ResourceBundle::EMPTY).unwrap();
        assert_eq!(
            inst.capacity,
            CapacityVector::new(3 * scenario.users_per_subchannel, 10, 0)
        );
        // Users demanding zero subchannels have zero value and abstain
        // because of the positive base price.
        assert!(inst.bids.len() <= 4);
        for bid in &inst.bids {
            assert_eq!(bid.atoms[0].bundle.antennas, 0);
        }
    }

    #[test]
    fn more_antennas_raise_explicit_values() {
        let scenario = desk_scenario(4);
        let small = build_user_bids(&scenario, 0, &ResourceBundle::EMPTY).unwrap();
        let big = build_user_bids(&scenario, 0, &ResourceBundle::new(0, 0, 12)).unwrap();
        for bid in &small.bids {
            let twin = big.bid(bid.bidder).expect("still participating");
            assert!(twin.atoms[0].value > bid.atoms[0].value);
        }
    }

    #[test]
    fn more_subchannels_weakly_grow_lower_welfare() {
        let scenario = desk_scenario(5);
        let base = build_user_bids(&scenario, 0, &ResourceBundle::EMPTY).unwrap();
        let wider = build_user_bids(&scenario, 0, &ResourceBundle::new(4, 0, 0)).unwrap();
        let w0 = solve_dp_single_minded(&base).unwrap().allocation.welfare;
        let w1 = solve_dp_single_minded(&wider).unwrap().allocation.welfare;
        assert!(w1 >= w0);
    }

    #[test]
    fn valuation_without_users_is_zero() {
        let mut scenario = desk_scenario(3);
        scenario.users[0].clear();
        let v = mvno_valuation(&scenario, 0, &ResourceBundle::new(2, 5, 2)).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn valuation_is_zero_under_abundance_with_zero_base() {
        let mut scenario = desk_scenario(2);
        scenario.lower.policy.base = BasePrice::FREE;
        // Plenty of everything: VCG prices collapse to zero, so resale
        // revenue is zero. This is exactly why a base price exists.
        let v = mvno_valuation(&scenario, 0, &ResourceBundle::new(6, 20, 8)).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn base_price_revenue_tracks_granted_subchannels() {
        let mut scenario = desk_scenario(3);
        scenario.lower.policy.base = BasePrice::new(1e-3, 0.0, 0.0);
        // Large candidate: no contention, every participating user wins and
        // pays base; revenue = beta_c * total granted subchannels.
        let candidate = ResourceBundle::new(9, 30, 8);
        let inst = build_user_bids(&scenario, 0, &candidate).unwrap();
        let outcome = price_lower(&inst, &scenario.lower).unwrap();
        let granted: u32 = inst
            .bids
            .iter()
            .filter(|b| outcome.allocation.is_winner(b.bidder))
            .map(|b| b.atoms[0].bundle.subchannels)
            .sum();
        let v = mvno_valuation(&scenario, 0, &candidate).unwrap();
        assert!((v - 1e-3 * granted as f64).abs() < 1e-12);
    }

    #[test]
    fn mvno_bid_enumeration_prunes_and_stays_within_budget() {
        let scenario = desk_scenario(4);
        let inst = build_mvno_bids(&scenario).unwrap();
        assert!(inst.bids.len() <= 2);
        for bid in &inst.bids {
            for atom in &bid.atoms {
                assert!(atom.value > 0.0);
                assert_eq!(atom.bundle.subchannels % scenario.group_size, 0);
            }
        }
    }

    #[test]
    fn atom_budget_guard_trips() {
        let mut scenario = desk_scenario(2);
        scenario.grid.atom_budget = 3;
        assert!(matches!(
            build_mvno_bids(&scenario),
            Err(AuctionError::TooLarge(_))
        ));
    }

    #[test]
    fn hierarchical_run_is_deterministic() {
        let scenario = desk_scenario(4);
        let a = run_hierarchical(&scenario).unwrap();
        let b = run_hierarchical(&scenario).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_leftover_degenerates_to_fixed_sharing() {
        let mut scenario = desk_scenario(4);
        // Reservations exhaust the totals and match the equal split.
        scenario.totals = CapacityTotals {
            subchannels: 6,
            power_units: 20,
            antennas: 8,
        };
        let hier = run_hierarchical(&scenario).unwrap();
        let fixed = run_fixed_sharing(&scenario).unwrap();
        assert_eq!(hier.metrics.social_welfare, fixed.metrics.social_welfare);
        assert_eq!(hier.lower, fixed.lower);
    }

    #[test]
    fn general_sharing_dominates_hierarchical() {
        for users in [3, 4, 5] {
            let scenario = desk_scenario(users);
            let gs = run_general_sharing(&scenario).unwrap();
            let hier = run_hierarchical(&scenario).unwrap();
            assert!(gs.metrics.social_welfare >= hier.metrics.social_welfare - 1e-9);
        }
    }

    #[test]
    fn fixed_sharing_with_one_mvno_equals_general_sharing() {
        let mut scenario = desk_scenario(4);
        scenario.mvnos = vec![MvnoConfig {
            reserved: ResourceBundle::new(3, 10, 4),
            reserve_cost: 0.0,
        }];
        let users = scenario.users.remove(0);
        scenario.users = vec![users];
        let fs = run_fixed_sharing(&scenario).unwrap();
        let gs = run_general_sharing(&scenario).unwrap();
        assert_eq!(fs.metrics.social_welfare, gs.metrics.social_welfare);
    }

    #[test]
    fn multiseller_exact_dominates_hierarchical_and_heuristic() {
        let scenario = desk_scenario(4);
        let hier = run_hierarchical(&scenario).unwrap();
        let ms1 = run_multiseller(&scenario, MsSolver::Exact).unwrap();
        let ms2 = run_multiseller(&scenario, MsSolver::Heuristic).unwrap();
        assert!(ms1.metrics.social_welfare >= hier.metrics.social_welfare);
        assert!(ms1.metrics.social_welfare >= ms2.metrics.social_welfare);
    }

    #[test]
    fn single_mvno_multiseller_equals_hierarchical() {
        let mut scenario = desk_scenario(4);
        scenario.mvnos.truncate(1);
        scenario.users.truncate(1);
        let hier = run_hierarchical(&scenario).unwrap();
        let ms = run_multiseller(&scenario, MsSolver::Exact).unwrap();
        assert_eq!(
            hier.metrics.social_welfare,
            ms.metrics.social_welfare
        );
    }

    #[test]
    fn trivial_grid_yields_empty_and_full_atoms() {
        // Leftover resources in one dimension only and a group size equal
        // to the whole leftover: the grid degenerates to {empty, full}.
        // Subchannels stay scarce at the full lease, so the full atom
        // resells for strictly more than the reserved baseline.
        let mut scenario = desk_scenario(5);
        scenario.totals = CapacityTotals {
            subchannels: 12,
            power_units: 60,
            antennas: 8,
        };
        scenario.mvnos = vec![
            MvnoConfig {
                reserved: ResourceBundle::new(3, 30, 4),
                reserve_cost: 0.0,
            };
            2
        ];
        for group in &mut scenario.users {
            for user in group.iter_mut() {
                user.demand = Demand::Explicit(ResourceBundle::new(2, 5, 0));
            }
        }
        scenario.group_size = 6;
        let inst = build_mvno_bids(&scenario).unwrap();
        for bid in &inst.bids {
            assert!(bid.atoms.len() <= 2);
            for atom in &bid.atoms {
                assert!(atom.bundle.subchannels == 0 || atom.bundle.subchannels == 6);
            }
        }
        // At least one MVNO values the full leftover above its baseline.
        assert!(inst
            .bids
            .iter()
            .any(|b| b.atoms.iter().any(|a| a.bundle.subchannels == 6)));
    }

    #[test]
    fn mvno_menus_are_monotone_after_dominance_pruning() {
        let scenario = desk_scenario(5);
        let inst = build_mvno_bids(&scenario).unwrap();
        for bid in &inst.bids {
            for a in &bid.atoms {
                for b in &bid.atoms {
                    if a.bundle != b.bundle && a.bundle.covered_by(&b.bundle) {
                        assert!(
                            a.value < b.value,
                            "menu kept a dominated atom: {} ({}) vs {} ({})",
                            b.bundle,
                            b.value,
                            a.bundle,
                            a.value
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn implicit_users_bid_xor_profiles_and_can_win() {
        let mut scenario = desk_scenario(3);
        scenario.users[0][0] = UserProfile {
            user_id: scenario.users[0][0].user_id,
            delta: 1.2,
            demand: Demand::Implicit { target_rate: 2.0 },
        };
        let inst = build_user_bids(&scenario, 0, &ResourceBundle::new(2, 6, 2)).unwrap();
        let implicit_bid = inst.bid(BidderId(scenario.users[0][0].user_id)).unwrap();
        assert!(implicit_bid.atoms.len() > 1, "implicit user should offer several profiles");
        for atom in &implicit_bid.atoms {
            assert_eq!(atom.bundle.antennas, 0);
            assert_eq!(atom.value, 1.2 * 2.0);
        }
        let outcome = run_hierarchical(&scenario).unwrap();
        assert!(outcome.metrics.social_welfare > 0.0);
    }

    #[test]
    fn each_level_dp_matches_the_exhaustive_optimum() {
        let scenario = desk_scenario(4);
        let upper = build_mvno_bids(&scenario).unwrap();
        let upper_dp = solve_upper_dp(&upper, scenario.group_size).unwrap();
        let upper_oracle = crate::solvers::solve_brute_force(&upper).unwrap();
        assert_eq!(
            upper_dp.allocation.welfare,
            upper_oracle.allocation.welfare
        );
        for m in 0..scenario.mvnos.len() {
            let inst = build_user_bids(&scenario, m, &ResourceBundle::new(2, 6, 4)).unwrap();
            let dp = solve_dp_single_minded(&inst).unwrap();
            let oracle = crate::solvers::solve_brute_force(&inst).unwrap();
            assert_eq!(dp.allocation.welfare, oracle.allocation.welfare);
        }
    }

    #[test]
    fn granted_resources_stay_within_each_capacity_pool() {
        let scenario = desk_scenario(5);
        let upper_inst = build_mvno_bids(&scenario).unwrap();
        let outcome = run_hierarchical(&scenario).unwrap();
        let upper = outcome.upper.as_ref().unwrap();
        // Upper-level grants fit in the leftover pool.
        let mut leased = ResourceBundle::EMPTY;
        for m in 0..scenario.mvnos.len() {
            leased = leased.plus(&won_bundle(upper, &upper_inst, m));
        }
        assert!(leased.covered_by(&scenario.leftover()));
        // Each MVNO's user grants fit in its slice.
        for m in 0..scenario.mvnos.len() {
            let won = won_bundle(upper, &upper_inst, m);
            let hat = scenario.mvnos[m].reserved.plus(&won);
            let inst = lower_instance_for(&scenario, m, &hat).unwrap();
            let mut used = ResourceBundle::EMPTY;
            for bid in &inst.bids {
                if let Some(grant) = outcome.lower[m].allocation.grants.get(&bid.bidder) {
                    used = used.plus(&bid.atoms[grant.atom].bundle);
                }
            }
            assert!(used.subchannels <= hat.subchannels * scenario.users_per_subchannel);
            assert!(used.power <= hat.power);
        }
    }

    #[test]
    fn mismatched_policy_pairings_are_rejected() {
        let mut scenario = desk_scenario(2);
        scenario.lower.solver = LevelSolver::Greedy;
        assert!(matches!(
            run_hierarchical(&scenario),
            Err(AuctionError::Policy(_))
        ));
    }
}
