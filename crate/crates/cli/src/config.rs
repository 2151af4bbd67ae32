//! Experiment configuration: allocation schemes, scenario templates, and
//! the TOML config file schema. Every template field has a default (the
//! desk-scale template), so a config file only needs to list deviations;
//! CLI flags override file values in turn.

use std::fmt;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

/// One allocation scheme to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Fixed sharing: equal static split, lower auctions only.
    Fs,
    /// General sharing: one pooled single-level auction (welfare benchmark).
    Gs,
    /// Hierarchical auction, exact DP at both levels, with this upper-level
    /// subchannel group size.
    Dpa(u32),
    /// Hierarchical auction, greedy at both levels.
    Ga,
    /// Multi-seller lower level solved exactly (branch-and-bound).
    Ms1,
    /// Multi-seller lower level solved by the exchange heuristic.
    Ms2,
}

impl FromStr for Scheme {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        match upper.as_str() {
            "FS" => Ok(Scheme::Fs),
            "GS" => Ok(Scheme::Gs),
            "GA" => Ok(Scheme::Ga),
            "MS1" => Ok(Scheme::Ms1),
            "MS2" => Ok(Scheme::Ms2),
            _ => {
                if let Some(group) = upper.strip_prefix("DPA:") {
                    let group: u32 = group
                        .parse()
                        .with_context(|| format!("bad DPA group size in {s:?}"))?;
                    if group == 0 {
                        bail!("DPA group size must be >= 1");
                    }
                    Ok(Scheme::Dpa(group))
                } else if upper == "DPA" {
                    Ok(Scheme::Dpa(1))
                } else {
                    bail!("unknown scheme {s:?} (expected FS, GS, DPA[:g], GA, MS1, MS2)")
                }
            }
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Fs => write!(f, "FS"),
            Scheme::Gs => write!(f, "GS"),
            Scheme::Dpa(g) => write!(f, "DPA:{g}"),
            Scheme::Ga => write!(f, "GA"),
            Scheme::Ms1 => write!(f, "MS1"),
            Scheme::Ms2 => write!(f, "MS2"),
        }
    }
}

/// All knobs of one scenario family plus the user-demand distributions.
/// Integer demands are drawn uniformly from `0..=max`; continuous
/// parameters uniformly from `[min, max)`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioTemplate {
    // Provider totals.
    pub subchannels: u32,
    pub power_units: u32,
    pub antennas: u32,
    // MVNOs and their reservations (identical per MVNO).
    pub mvno_count: u32,
    pub reserved_subchannels: u32,
    pub reserved_power: u32,
    pub reserved_antennas: u32,
    /// Fixed q_res component; see `reserve_cost_mode`.
    pub reserve_cost: f64,
    /// "baseline": q_res per MVNO is its reserved-only resale revenue
    /// (valuations become incremental revenue; the empty bundle is worth 0).
    /// "fixed": q_res is the `reserve_cost` constant for every MVNO.
    pub reserve_cost_mode: String,
    // Users and demands.
    pub users_per_mvno: u32,
    pub demand_subchannels_max: u32,
    pub demand_power_max: u32,
    pub delta_min: f64,
    pub delta_max: f64,
    /// Fraction of users expressing an implicit rate target instead of an
    /// explicit bundle.
    pub implicit_fraction: f64,
    pub implicit_rate_min: f64,
    pub implicit_rate_max: f64,
    // Auction structure.
    pub users_per_subchannel: u32,
    pub group_size: u32,
    pub weight_subchannel: f64,
    pub weight_power: f64,
    // Radio model.
    pub bandwidth: f64,
    pub cells: u32,
    pub alpha: f64,
    pub power_unit_watts: f64,
    pub noise_ref: f64,
    // Base access prices per level.
    pub lower_base_subchannel: f64,
    pub lower_base_power: f64,
    pub lower_base_antenna: f64,
    pub upper_base_subchannel: f64,
    pub upper_base_power: f64,
    pub upper_base_antenna: f64,
    // Upper-level enumeration grids.
    pub power_grid_steps: u32,
    pub antenna_grid_steps: u32,
    pub atom_budget: usize,
}

impl Default for ScenarioTemplate {
    fn default() -> Self {
        ScenarioTemplate::desk()
    }
}

impl ScenarioTemplate {
    /// Desk-scale template: the full setup shrunk to a fifth, small enough
    /// for exact solvers across hundreds of seeds. Per-user demand runs much
    /// hotter than at full scale: with only ten users per MVNO, deep excess
    /// demand is what keeps a dense pool of losing bids at every capacity
    /// level, which the full-scale setup gets from sheer user count.
    /// Antennas are fully reserved (half each), so the upper auction trades
    /// subchannels and power.
    pub fn desk() -> Self {
        ScenarioTemplate {
            subchannels: 20,
            power_units: 100,
            antennas: 40,
            mvno_count: 2,
            reserved_subchannels: 0,
            reserved_power: 30,
            reserved_antennas: 20,
            reserve_cost: 0.0,
            reserve_cost_mode: "baseline".to_string(),
            users_per_mvno: 10,
            demand_subchannels_max: 8,
            demand_power_max: 64,
            delta_min: 0.9,
            delta_max: 1.1,
            implicit_fraction: 0.0,
            implicit_rate_min: 1.0,
            implicit_rate_max: 4.0,
            users_per_subchannel: 1,
            group_size: 1,
            weight_subchannel: 1.0,
            weight_power: 1.0,
            bandwidth: 1.0,
            cells: 7,
            alpha: 0.1,
            power_unit_watts: 1.0,
            noise_ref: 1.0,
            lower_base_subchannel: 0.2,
            lower_base_power: 0.1,
            lower_base_antenna: 0.0,
            upper_base_subchannel: 0.0,
            upper_base_power: 0.0,
            upper_base_antenna: 0.0,
            power_grid_steps: 20,
            antenna_grid_steps: 4,
            atom_budget: 20_000,
        }
    }

    /// Full-scale template: 100 subchannels, 200 antennas, 500 power units,
    /// two MVNOs reserving (30, 150, 50) each, 50 users per MVNO, per-user
    /// demands of up to 2 subchannels and 10 power units. Exact DP across
    /// the full upper grid is expensive; the harness requires `--force`
    /// once the work estimate crosses the budget.
    pub fn paper() -> Self {
        ScenarioTemplate {
            subchannels: 100,
            power_units: 500,
            antennas: 200,
            reserved_subchannels: 30,
            reserved_power: 150,
            reserved_antennas: 50,
            users_per_mvno: 50,
            demand_subchannels_max: 2,
            demand_power_max: 10,
            delta_min: 0.5,
            delta_max: 1.5,
            lower_base_subchannel: 0.1,
            lower_base_power: 0.02,
            power_grid_steps: 10,
            ..ScenarioTemplate::desk()
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "desk" => Ok(ScenarioTemplate::desk()),
            "paper" => Ok(ScenarioTemplate::paper()),
            other => bail!("unknown template {other:?} (expected `desk` or `paper`)"),
        }
    }
}

/// Work estimate above which `run` refuses without `--force`: roughly the
/// number of DP table cells filled across one seed.
pub const WORK_BUDGET: f64 = 5e9;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub schemes: Vec<Scheme>,
    pub seeds: u32,
    /// Worker threads for seed-level parallelism; 0 = one per core.
    pub jobs: usize,
    pub force: bool,
    pub template: ScenarioTemplate,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schemes: vec![Scheme::Fs, Scheme::Gs, Scheme::Dpa(1)],
            seeds: 10,
            jobs: 0,
            force: false,
            template: ScenarioTemplate::desk(),
        }
    }
}

/// On-disk form of the configuration (all fields optional).
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    schemes: Option<Vec<String>>,
    seeds: Option<u32>,
    jobs: Option<usize>,
    force: Option<bool>,
    template: Option<String>,
    scenario: Option<toml::Value>,
}

impl ExperimentConfig {
    /// Parses a TOML config file. `scenario` starts from the named template
    /// (default desk) and overrides individual fields.
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).context("invalid config file")?;
        let mut config = ExperimentConfig::default();
        if let Some(name) = &file.template {
            config.template = ScenarioTemplate::by_name(name)?;
        }
        if let Some(overrides) = file.scenario {
            config.template = apply_scenario_overrides(&config.template, overrides)?;
        }
        if let Some(schemes) = &file.schemes {
            config.schemes = schemes
                .iter()
                .map(|s| s.parse())
                .collect::<Result<Vec<_>>>()?;
        }
        if let Some(seeds) = file.seeds {
            config.seeds = seeds;
        }
        if let Some(jobs) = file.jobs {
            config.jobs = jobs;
        }
        if let Some(force) = file.force {
            config.force = force;
        }
        if config.schemes.is_empty() {
            bail!("at least one scheme is required");
        }
        if config.seeds == 0 {
            bail!("seeds must be >= 1");
        }
        Ok(config)
    }
}

fn apply_scenario_overrides(
    base: &ScenarioTemplate,
    overrides: toml::Value,
) -> Result<ScenarioTemplate> {
    // Serialize the base template, splice the overrides on top, parse back.
    let mut table = toml::Value::try_from(SerializableTemplate(base.clone()))
        .context("template serialization")?;
    let toml::Value::Table(ref mut base_table) = table else {
        bail!("template did not serialize to a table");
    };
    let toml::Value::Table(over) = overrides else {
        bail!("[scenario] must be a table");
    };
    for (key, value) in over {
        if !base_table.contains_key(&key) {
            bail!("unknown scenario field {key:?}");
        }
        base_table.insert(key, value);
    }
    table.try_into().context("invalid scenario override")
}

// Serde serialization is only needed for the override splice above, so keep
// it private behind a newtype.
struct SerializableTemplate(ScenarioTemplate);

impl serde::Serialize for SerializableTemplate {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let t = &self.0;
        let mut map = serializer.serialize_map(None)?;
        macro_rules! field {
            ($name:ident) => {
                map.serialize_entry(stringify!($name), &t.$name)?;
            };
        }
        field!(subchannels);
        field!(power_units);
        field!(antennas);
        field!(mvno_count);
        field!(reserved_subchannels);
        field!(reserved_power);
        field!(reserved_antennas);
        field!(reserve_cost);
        field!(reserve_cost_mode);
        field!(users_per_mvno);
        field!(demand_subchannels_max);
        field!(demand_power_max);
        field!(delta_min);
        field!(delta_max);
        field!(implicit_fraction);
        field!(implicit_rate_min);
        field!(implicit_rate_max);
        field!(users_per_subchannel);
        field!(group_size);
        field!(weight_subchannel);
        field!(weight_power);
        field!(bandwidth);
        field!(cells);
        field!(alpha);
        field!(power_unit_watts);
        field!(noise_ref);
        field!(lower_base_subchannel);
        field!(lower_base_power);
        field!(lower_base_antenna);
        field!(upper_base_subchannel);
        field!(upper_base_power);
        field!(upper_base_antenna);
        field!(power_grid_steps);
        field!(antenna_grid_steps);
        field!(atom_budget);
        map.end()
    }
}
