//! Deterministic scenario generation from a template and a seed.

use anyhow::{bail, Result};
use slice_auction::hierarchy::{
    CapacityTotals, LevelConfig, LevelSolver, MvnoConfig, Scenario, UpperGrid,
};
use slice_auction::mimo::{Demand, RadioConfig, UserProfile};
use slice_auction::pricing::{BasePrice, PricingPolicy};
use slice_auction::types::{ResourceBundle, Weights};

use crate::config::{Scheme, ScenarioTemplate};
use crate::rng::SplitMix64;

/// Builds the scenario for `seed` with the template's per-MVNO user count
/// and reservations. Identical (template, seed) pairs yield identical
/// scenarios; every scheme then sees the same users.
pub fn generate_scenario(template: &ScenarioTemplate, seed: u64) -> Result<Scenario> {
    let counts = vec![template.users_per_mvno; template.mvno_count as usize];
    let reserved = ResourceBundle::new(
        template.reserved_subchannels,
        template.reserved_power,
        template.reserved_antennas,
    );
    generate_scenario_partitioned(template, seed, &counts, &reserved)
}

/// Scenario generation with explicit per-MVNO user counts and reservation
/// bundle; the MVNO-count sweep re-partitions users and reservations while
/// keeping the provider totals fixed.
pub fn generate_scenario_partitioned(
    template: &ScenarioTemplate,
    seed: u64,
    users_per_mvno: &[u32],
    reserved: &ResourceBundle,
) -> Result<Scenario> {
    if users_per_mvno.is_empty() {
        bail!("need at least one MVNO");
    }
    if template.delta_min <= 0.0 || template.delta_max < template.delta_min {
        bail!("delta range must satisfy 0 < min <= max");
    }
    let mvno_count = users_per_mvno.len() as u32;
    if reserved.subchannels * mvno_count > template.subchannels
        || reserved.power * mvno_count > template.power_units
        || reserved.antennas * mvno_count > template.antennas
    {
        bail!(
            "reservations {}x{} exceed the provider totals",
            mvno_count,
            reserved
        );
    }

    let mut users = Vec::new();
    let mut user_id = 0u32;
    for (m, &count) in users_per_mvno.iter().enumerate() {
        let mut group = Vec::new();
        for i in 0..count {
            let mut rng = SplitMix64::stream(seed, &[m as u64, i as u64]);
            let delta = rng.uniform_f64(template.delta_min, template.delta_max);
            let implicit = rng.next_f64() < template.implicit_fraction;
            let demand = if implicit {
                Demand::Implicit {
                    target_rate: rng
                        .uniform_f64(template.implicit_rate_min, template.implicit_rate_max),
                }
            } else {
                let c = rng.uniform_u32(0, template.demand_subchannels_max);
                let p = rng.uniform_u32(0, template.demand_power_max);
                Demand::Explicit(ResourceBundle::new(c, p, 0))
            };
            group.push(UserProfile {
                user_id,
                delta,
                demand,
            });
            user_id += 1;
        }
        users.push(group);
    }

    let scenario = Scenario {
        radio: RadioConfig {
            bandwidth: template.bandwidth,
            cells: template.cells,
            alpha: template.alpha,
            power_unit: template.power_unit_watts,
            noise_ref: template.noise_ref,
        },
        totals: CapacityTotals {
            subchannels: template.subchannels,
            power_units: template.power_units,
            antennas: template.antennas,
        },
        mvnos: vec![
            MvnoConfig {
                reserved: *reserved,
                reserve_cost: template.reserve_cost,
            };
            users_per_mvno.len()
        ],
        users,
        users_per_subchannel: template.users_per_subchannel,
        group_size: template.group_size,
        lower: LevelConfig {
            solver: LevelSolver::Dp,
            policy: PricingPolicy::vcg(BasePrice::new(
                template.lower_base_subchannel,
                template.lower_base_power,
                template.lower_base_antenna,
            )),
        },
        upper: LevelConfig {
            solver: LevelSolver::Dp,
            policy: PricingPolicy::vcg(BasePrice::new(
                template.upper_base_subchannel,
                template.upper_base_power,
                template.upper_base_antenna,
            )),
        },
        grid: UpperGrid {
            power_steps: template.power_grid_steps,
            antenna_steps: template.antenna_grid_steps,
            atom_budget: template.atom_budget,
        },
        weights: Weights {
            subchannel: template.weight_subchannel,
            power: template.weight_power,
        },
    };
    scenario
        .validate()
        .map_err(|e| anyhow::anyhow!("generated scenario is invalid: {e}"))?;
    Ok(scenario)
}

/// Adapts the base scenario to one scheme and a reserve-cost mode: the DPA
/// group size and the solver/pricing pairing per level. FS and GS ignore
/// the upper level. In baseline mode each MVNO's q_res is recomputed under
/// the scheme's own lower-level configuration.
pub fn scenario_for_scheme_mode(
    base: &Scenario,
    scheme: Scheme,
    baseline_reserve_cost: bool,
) -> Result<Scenario> {
    let mut scenario = base.clone();
    match scheme {
        Scheme::Fs | Scheme::Gs | Scheme::Ms1 | Scheme::Ms2 => {}
        Scheme::Dpa(group) => {
            scenario.group_size = group;
        }
        Scheme::Ga => {
            scenario.lower = LevelConfig {
                solver: LevelSolver::Greedy,
                policy: PricingPolicy::greedy_critical(base.lower.policy.base),
            };
            scenario.upper = LevelConfig {
                solver: LevelSolver::Greedy,
                policy: PricingPolicy::greedy_critical(base.upper.policy.base),
            };
        }
    }
    let needs_upper = !matches!(scheme, Scheme::Fs | Scheme::Gs);
    if baseline_reserve_cost && needs_upper {
        slice_auction::hierarchy::apply_baseline_reserve_costs(&mut scenario)
            .map_err(|e| anyhow::anyhow!("baseline reserve costs: {e}"))?;
    }
    Ok(scenario)
}

/// Scheme adaptation with fixed reserve costs (no baseline recomputation).
pub fn scenario_for_scheme(base: &Scenario, scheme: Scheme) -> Scenario {
    scenario_for_scheme_mode(base, scheme, false).expect("fixed mode cannot fail")
}
