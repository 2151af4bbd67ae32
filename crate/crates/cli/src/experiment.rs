//! Experiment execution: per-(scheme, seed) metric rows, aggregates with
//! standard errors, the MVNO-count sweep, and the work-estimate guard.

use anyhow::{anyhow, bail, Result};
use rayon::prelude::*;
use slice_auction::hierarchy::{
    run_fixed_sharing, run_general_sharing, run_hierarchical, run_multiseller, HierOutcome,
    MsSolver, Scenario,
};

use crate::config::{ExperimentConfig, Scheme, ScenarioTemplate, WORK_BUDGET};
use crate::scenario::{generate_scenario, generate_scenario_partitioned, scenario_for_scheme_mode};
use slice_auction::types::ResourceBundle;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Seed,
    Mean,
    Skip,
    Trend,
}

impl RowKind {
    fn label(self) -> &'static str {
        match self {
            RowKind::Seed => "seed",
            RowKind::Mean => "mean",
            RowKind::Skip => "skip",
            RowKind::Trend => "trend",
        }
    }
}

/// One output row; aggregate rows leave `seed` empty and carry the welfare
/// standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub kind: RowKind,
    pub scheme: String,
    pub mvnos: Option<u32>,
    pub seed: Option<u64>,
    pub welfare: Option<f64>,
    pub normalized_welfare: Option<f64>,
    pub subchannel_utilization: Option<f64>,
    pub power_utilization: Option<f64>,
    pub antenna_utilization: Option<f64>,
    pub user_satisfaction: Option<f64>,
    pub welfare_sem: Option<f64>,
    pub note: String,
}

impl ResultRow {
    fn blank(kind: RowKind, scheme: String) -> Self {
        ResultRow {
            kind,
            scheme,
            mvnos: None,
            seed: None,
            welfare: None,
            normalized_welfare: None,
            subchannel_utilization: None,
            power_utilization: None,
            antenna_utilization: None,
            user_satisfaction: None,
            welfare_sem: None,
            note: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    /// Header comment lines recording the configuration behind the data.
    pub meta: Vec<String>,
    pub rows: Vec<ResultRow>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl ResultTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for line in &self.meta {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out.push_str(
            "kind,scheme,mvnos,seed,welfare,normalized_welfare,subchannel_utilization,\
             power_utilization,antenna_utilization,user_satisfaction,welfare_sem,note\n",
        );
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                row.kind.label(),
                row.scheme,
                row.mvnos.map(|m| m.to_string()).unwrap_or_default(),
                row.seed.map(|s| s.to_string()).unwrap_or_default(),
                fmt_opt(row.welfare),
                fmt_opt(row.normalized_welfare),
                fmt_opt(row.subchannel_utilization),
                fmt_opt(row.power_utilization),
                fmt_opt(row.antenna_utilization),
                fmt_opt(row.user_satisfaction),
                fmt_opt(row.welfare_sem),
                row.note,
            ));
        }
        out
    }

    /// Plot-ready companion data: one series per figure analogue.
    pub fn to_plot_csv(&self) -> String {
        let mut out = String::from("figure,series,x,y,yerr\n");
        for row in &self.rows {
            match row.kind {
                RowKind::Mean => {
                    if let Some(count) = row.mvnos {
                        if let Some(u) = row.subchannel_utilization {
                            out.push_str(&format!(
                                "utilization_by_mvno_count,{},{},{:.6},\n",
                                row.scheme, count, u
                            ));
                        }
                        continue;
                    }
                    if let Some(w) = row.normalized_welfare.or(row.welfare) {
                        out.push_str(&format!(
                            "welfare_by_scheme,{},{},{:.6},{}\n",
                            row.scheme,
                            row.scheme,
                            w,
                            fmt_opt(row.welfare_sem)
                        ));
                    }
                    if let Some(u) = row.subchannel_utilization {
                        out.push_str(&format!(
                            "subchannel_utilization_by_scheme,{},{},{:.6},\n",
                            row.scheme, row.scheme, u
                        ));
                    }
                    if let Some(s) = row.user_satisfaction {
                        out.push_str(&format!(
                            "user_satisfaction_by_scheme,{},{},{:.6},\n",
                            row.scheme, row.scheme, s
                        ));
                    }
                }
                _ => continue,
            }
        }
        out
    }
}

/// Runs one scheme on one generated scenario.
pub fn run_scheme(scenario: &Scenario, scheme: Scheme, baseline: bool) -> Result<HierOutcome> {
    let adapted = scenario_for_scheme_mode(scenario, scheme, baseline)?;
    let outcome = match scheme {
        Scheme::Fs => run_fixed_sharing(&adapted),
        Scheme::Gs => run_general_sharing(&adapted),
        Scheme::Dpa(_) | Scheme::Ga => run_hierarchical(&adapted),
        Scheme::Ms1 => run_multiseller(&adapted, MsSolver::Exact),
        Scheme::Ms2 => run_multiseller(&adapted, MsSolver::Heuristic),
    };
    outcome.map_err(|e| anyhow!("{scheme}: {e}"))
}

/// Rough per-seed work estimate in DP table cells: the pooled general
/// sharing table plus the upper-level enumeration times the lower-level
/// table and its VCG re-solves.
pub fn work_estimate(template: &ScenarioTemplate) -> f64 {
    let users_total = (template.mvno_count * template.users_per_mvno) as f64;
    let j = template.users_per_subchannel as f64;
    let gs_table = users_total
        * (template.subchannels as f64 * j + 1.0)
        * (template.power_units as f64 + 1.0);

    let leftover_c =
        template.subchannels - template.mvno_count * template.reserved_subchannels;
    let leftover_p = template.power_units - template.mvno_count * template.reserved_power;
    let leftover_a = template.antennas - template.mvno_count * template.reserved_antennas;
    let c_points = (leftover_c / template.group_size.max(1)) as f64 + 1.0;
    let p_points = template.power_grid_steps.min(leftover_p) as f64 + 2.0;
    let a_points = template.antenna_grid_steps.min(leftover_a) as f64 + 2.0;
    let atoms = c_points * p_points * a_points * template.mvno_count as f64;

    let hat_c = (template.reserved_subchannels + leftover_c) as f64;
    let hat_p = (template.reserved_power + leftover_p) as f64;
    let users = template.users_per_mvno as f64;
    let lower_table = users * (hat_c * j + 1.0) * (hat_p + 1.0);
    let vcg_factor = users + 1.0;

    gs_table + atoms * lower_table * vcg_factor
}

fn baseline_mode(template: &ScenarioTemplate) -> Result<bool> {
    match template.reserve_cost_mode.as_str() {
        "baseline" => Ok(true),
        "fixed" => Ok(false),
        other => bail!("unknown reserve_cost_mode {other:?} (expected `baseline` or `fixed`)"),
    }
}

fn seed_row(scheme: Scheme, seed: u64, outcome: &HierOutcome) -> ResultRow {
    let m = &outcome.metrics;
    ResultRow {
        kind: RowKind::Seed,
        scheme: scheme.to_string(),
        mvnos: None,
        seed: Some(seed),
        welfare: Some(m.social_welfare),
        normalized_welfare: None,
        subchannel_utilization: Some(m.utilization.subchannels),
        power_utilization: Some(m.utilization.power),
        antenna_utilization: Some(m.utilization.antennas),
        user_satisfaction: Some(m.user_satisfaction),
        welfare_sem: None,
        note: String::new(),
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Standard error of the mean (sample standard deviation over sqrt(n)).
pub fn sem(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if jobs == 0 {
        Ok(f())
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| anyhow!("thread pool: {e}"))?;
        Ok(pool.install(f))
    }
}

struct SchemeRun {
    scheme: Scheme,
    rows: Vec<ResultRow>,
    welfare: Vec<f64>,
    skipped: Option<String>,
}

fn run_one_scheme(
    template: &ScenarioTemplate,
    scheme: Scheme,
    seeds: u32,
) -> Result<SchemeRun> {
    let baseline = baseline_mode(template)?;
    // Probe the first seed; a size guard there skips the scheme with a
    // reason instead of failing the whole experiment.
    let probe_scenario = generate_scenario(template, 0)?;
    if let Err(err) = run_scheme(&probe_scenario, scheme, baseline) {
        if err.to_string().contains("instance too large") {
            return Ok(SchemeRun {
                scheme,
                rows: Vec::new(),
                welfare: Vec::new(),
                skipped: Some(err.to_string()),
            });
        }
        return Err(err);
    }
    let outcomes: Vec<(u64, HierOutcome)> = (0..seeds as u64)
        .into_par_iter()
        .map(|seed| {
            let scenario = generate_scenario(template, seed)?;
            let outcome = run_scheme(&scenario, scheme, baseline)?;
            Ok((seed, outcome))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut welfare = Vec::new();
    for (seed, outcome) in &outcomes {
        rows.push(seed_row(scheme, *seed, outcome));
        welfare.push(outcome.metrics.social_welfare);
    }
    Ok(SchemeRun {
        scheme,
        rows,
        welfare,
        skipped: None,
    })
}

/// Runs every scheme over every seed, appends per-scheme aggregate rows,
/// and normalizes welfare by the GS mean when GS is among the schemes.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultTable> {
    let estimate = work_estimate(&config.template);
    if estimate > WORK_BUDGET && !config.force {
        bail!(
            "estimated work is {estimate:.2e} table cells per seed (budget {WORK_BUDGET:.0e}); \
             rerun with --force or shrink the template"
        );
    }
    let template = &config.template;
    let runs = with_pool(config.jobs, || {
        config
            .schemes
            .iter()
            .map(|&scheme| run_one_scheme(template, scheme, config.seeds))
            .collect::<Result<Vec<_>>>()
    })??;

    let gs_mean = runs
        .iter()
        .find(|r| r.scheme == Scheme::Gs && !r.welfare.is_empty())
        .map(|r| mean(&r.welfare));

    let mut rows = Vec::new();
    for run in &runs {
        if let Some(reason) = &run.skipped {
            let mut row = ResultRow::blank(RowKind::Skip, run.scheme.to_string());
            row.note = reason.replace(',', ";");
            rows.push(row);
            continue;
        }
        for mut row in run.rows.clone() {
            if let (Some(gs), Some(w)) = (gs_mean, row.welfare) {
                row.normalized_welfare = Some(w / gs);
            }
            rows.push(row);
        }
        let welfare_mean = mean(&run.welfare);
        let mut agg = ResultRow::blank(RowKind::Mean, run.scheme.to_string());
        agg.welfare = Some(welfare_mean);
        agg.normalized_welfare = gs_mean.map(|gs| welfare_mean / gs);
        agg.welfare_sem = Some(sem(&run.welfare));
        let util_c: Vec<f64> = run
            .rows
            .iter()
            .filter_map(|r| r.subchannel_utilization)
            .collect();
        let util_p: Vec<f64> = run.rows.iter().filter_map(|r| r.power_utilization).collect();
        let util_a: Vec<f64> = run
            .rows
            .iter()
            .filter_map(|r| r.antenna_utilization)
            .collect();
        let sat: Vec<f64> = run.rows.iter().filter_map(|r| r.user_satisfaction).collect();
        agg.subchannel_utilization = Some(mean(&util_c));
        agg.power_utilization = Some(mean(&util_p));
        agg.antenna_utilization = Some(mean(&util_a));
        agg.user_satisfaction = Some(mean(&sat));
        rows.push(agg);
    }

    Ok(ResultTable {
        meta: table_meta(config, None),
        rows,
    })
}

fn table_meta(config: &ExperimentConfig, counts: Option<&[u32]>) -> Vec<String> {
    let t = &config.template;
    let mut meta = vec![
        "generator=splitmix64 (streams keyed by seed, mvno, user)".to_string(),
        format!(
            "schemes={}",
            config
                .schemes
                .iter()
                .map(Scheme::to_string)
                .collect::<Vec<_>>()
                .join("|")
        ),
        format!("seeds=0..{}", config.seeds),
        format!(
            "totals: subchannels={} power_units={} antennas={} mvnos={} users_per_mvno={}",
            t.subchannels, t.power_units, t.antennas, t.mvno_count, t.users_per_mvno
        ),
        format!(
            "demands: c~U[0,{}] p~U[0,{}] delta~U[{},{}) implicit_fraction={}",
            t.demand_subchannels_max,
            t.demand_power_max,
            t.delta_min,
            t.delta_max,
            t.implicit_fraction
        ),
        format!(
            "radio: W={} L={} alpha={} power_unit={} noise_ref={} J={}",
            t.bandwidth, t.cells, t.alpha, t.power_unit_watts, t.noise_ref, t.users_per_subchannel
        ),
        format!(
            "base_prices: lower=({},{},{}) upper=({},{},{})",
            t.lower_base_subchannel,
            t.lower_base_power,
            t.lower_base_antenna,
            t.upper_base_subchannel,
            t.upper_base_power,
            t.upper_base_antenna
        ),
    ];
    if let Some(counts) = counts {
        meta.push(format!(
            "sweep: mvno_counts={}",
            counts
                .iter()
                .map(u32::to_string)
                .collect::<Vec<_>>()
                .join("|")
        ));
    }
    meta
}

/// Re-partitions the template's users and reservation pool over each MVNO
/// count (totals fixed), runs the configured schemes, and reports mean
/// utilization per count plus a weak-monotonicity trend row per scheme.
pub fn sweep_mvno_count(config: &ExperimentConfig, counts: &[u32]) -> Result<ResultTable> {
    if counts.is_empty() {
        bail!("sweep needs at least one MVNO count");
    }
    let baseline = baseline_mode(&config.template)?;
    if counts.iter().any(|&c| c == 0) {
        bail!("MVNO counts must be >= 1");
    }
    let t = &config.template;
    let total_users = t.mvno_count * t.users_per_mvno;
    let reserved_total = ResourceBundle::new(
        t.mvno_count * t.reserved_subchannels,
        t.mvno_count * t.reserved_power,
        t.mvno_count * t.reserved_antennas,
    );

    let mut rows = Vec::new();
    // mean subchannel utilization per (scheme, count), in input order
    let mut trend: Vec<(Scheme, Vec<(u32, f64)>)> =
        config.schemes.iter().map(|&s| (s, Vec::new())).collect();

    for &count in counts {
        let base = total_users / count;
        let remainder = total_users % count;
        let users_split: Vec<u32> = (0..count)
            .map(|m| base + u32::from(m < remainder))
            .collect();
        let reserved = ResourceBundle::new(
            reserved_total.subchannels / count,
            reserved_total.power / count,
            reserved_total.antennas / count,
        );
        let note = if remainder != 0 {
            format!("{remainder} leftover users assigned round-robin")
        } else {
            String::new()
        };

        for (scheme_idx, &scheme) in config.schemes.iter().enumerate() {
            let template = t.clone();
            let users_split = users_split.clone();
            let outcomes = with_pool(config.jobs, || {
                (0..config.seeds as u64)
                    .into_par_iter()
                    .map(|seed| {
                        let scenario = generate_scenario_partitioned(
                            &template,
                            seed,
                            &users_split,
                            &reserved,
                        )?;
                        run_scheme(&scenario, scheme, baseline)
                    })
                    .collect::<Result<Vec<_>>>()
            })??;

            let welfare: Vec<f64> =
                outcomes.iter().map(|o| o.metrics.social_welfare).collect();
            let util_c: Vec<f64> = outcomes
                .iter()
                .map(|o| o.metrics.utilization.subchannels)
                .collect();
            for (seed, outcome) in outcomes.iter().enumerate() {
                let mut row = seed_row(scheme, seed as u64, outcome);
                row.mvnos = Some(count);
                row.note = note.clone();
                rows.push(row);
            }
            let mut agg = ResultRow::blank(RowKind::Mean, scheme.to_string());
            agg.mvnos = Some(count);
            agg.welfare = Some(mean(&welfare));
            agg.welfare_sem = Some(sem(&welfare));
            agg.subchannel_utilization = Some(mean(&util_c));
            agg.note = note.clone();
            rows.push(agg);
            trend[scheme_idx].1.push((count, mean(&util_c)));
        }
    }

    for (scheme, series) in &trend {
        let weakly_decreasing = series.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
        let mut row = ResultRow::blank(RowKind::Trend, scheme.to_string());
        row.note = format!(
            "subchannel_utilization weakly_decreasing={} series={}",
            weakly_decreasing,
            series
                .iter()
                .map(|(c, u)| format!("{c}:{u:.6}"))
                .collect::<Vec<_>>()
                .join("|")
        );
        rows.push(row);
    }

    Ok(ResultTable {
        meta: table_meta(config, Some(counts)),
        rows,
    })
}

/// Convenience wrapper used by tests and the reproducibility check: runs
/// the experiment and renders both output files as strings.
pub fn run_to_strings(config: &ExperimentConfig) -> Result<(String, String)> {
    let table = run_experiment(config)?;
    Ok((table.to_csv(), table.to_plot_csv()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;

    fn tiny_config() -> ExperimentConfig {
        let mut config = ExperimentConfig::default();
        config.template.users_per_mvno = 4;
        config.template.subchannels = 8;
        config.template.power_units = 30;
        config.template.antennas = 12;
        config.template.reserved_subchannels = 2;
        config.template.reserved_power = 8;
        config.template.reserved_antennas = 3;
        config.template.power_grid_steps = 4;
        config.template.antenna_grid_steps = 2;
        config.seeds = 2;
        config.jobs = 1;
        config
    }

    #[test]
    fn two_schemes_one_seed_two_seed_rows() {
        let mut config = tiny_config();
        config.schemes = vec![Scheme::Fs, Scheme::Gs];
        config.seeds = 1;
        let table = run_experiment(&config).unwrap();
        let seed_rows: Vec<_> = table
            .rows
            .iter()
            .filter(|r| r.kind == RowKind::Seed)
            .collect();
        assert_eq!(seed_rows.len(), 2);
        let mean_rows: Vec<_> = table
            .rows
            .iter()
            .filter(|r| r.kind == RowKind::Mean)
            .collect();
        assert_eq!(mean_rows.len(), 2);
    }

    #[test]
    fn gs_normalized_welfare_is_one() {
        let mut config = tiny_config();
        config.schemes = vec![Scheme::Fs, Scheme::Gs];
        let table = run_experiment(&config).unwrap();
        let gs_mean = table
            .rows
            .iter()
            .find(|r| r.kind == RowKind::Mean && r.scheme == "GS")
            .unwrap();
        assert!((gs_mean.normalized_welfare.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn aggregates_equal_the_mean_of_seed_rows() {
        let mut config = tiny_config();
        config.schemes = vec![Scheme::Dpa(1)];
        config.seeds = 3;
        let table = run_experiment(&config).unwrap();
        let seeds: Vec<f64> = table
            .rows
            .iter()
            .filter(|r| r.kind == RowKind::Seed)
            .map(|r| r.welfare.unwrap())
            .collect();
        let agg = table
            .rows
            .iter()
            .find(|r| r.kind == RowKind::Mean)
            .unwrap();
        assert!((agg.welfare.unwrap() - mean(&seeds)).abs() < 1e-12);
    }

    #[test]
    fn identical_configs_produce_identical_output() {
        let mut config = tiny_config();
        config.schemes = vec![Scheme::Fs, Scheme::Gs, Scheme::Dpa(1)];
        let (a_csv, a_plot) = run_to_strings(&config).unwrap();
        let (b_csv, b_plot) = run_to_strings(&config).unwrap();
        assert_eq!(a_csv, b_csv);
        assert_eq!(a_plot, b_plot);
    }

    #[test]
    fn work_guard_requires_force_at_paper_scale() {
        let mut config = ExperimentConfig::default();
        config.template = ScenarioTemplate::paper();
        config.schemes = vec![Scheme::Dpa(1)];
        let err = run_experiment(&config).unwrap_err();
        assert!(err.to_string().contains("--force"));
    }

    #[test]
    fn sweep_single_mvno_matches_general_sharing_utilization() {
        let mut config = tiny_config();
        config.schemes = vec![Scheme::Gs];
        let sweep = sweep_mvno_count(&config, &[1]).unwrap();
        let run = run_experiment(&{
            let mut c = config.clone();
            // Re-partitioning with count=1 doubles the per-MVNO numbers.
            c.template.users_per_mvno *= c.template.mvno_count;
            c.template.reserved_subchannels *= c.template.mvno_count;
            c.template.reserved_power *= c.template.mvno_count;
            c.template.reserved_antennas *= c.template.mvno_count;
            c.template.mvno_count = 1;
            c
        })
        .unwrap();
        let sweep_util = sweep
            .rows
            .iter()
            .find(|r| r.kind == RowKind::Mean)
            .unwrap()
            .subchannel_utilization
            .unwrap();
        let run_util = run
            .rows
            .iter()
            .find(|r| r.kind == RowKind::Mean)
            .unwrap()
            .subchannel_utilization
            .unwrap();
        assert!((sweep_util - run_util).abs() < 1e-12);
    }

    #[test]
    fn oversized_schemes_are_skipped_with_a_reason() {
        let mut config = tiny_config();
        config.schemes = vec![Scheme::Gs, Scheme::Dpa(1)];
        config.template.atom_budget = 2;
        let table = run_experiment(&config).unwrap();
        let skip = table
            .rows
            .iter()
            .find(|r| r.kind == RowKind::Skip)
            .expect("DPA should be skipped");
        assert_eq!(skip.scheme, "DPA:1");
        assert!(skip.note.contains("too large"));
        // GS does not touch the upper grid and still runs.
        assert!(table
            .rows
            .iter()
            .any(|r| r.kind == RowKind::Mean && r.scheme == "GS"));
    }

    #[test]
    fn sweep_notes_uneven_user_splits() {
        let mut config = tiny_config();
        config.schemes = vec![Scheme::Fs];
        config.seeds = 1;
        let table = sweep_mvno_count(&config, &[3]).unwrap();
        let row = table.rows.iter().find(|r| r.kind == RowKind::Seed).unwrap();
        assert!(row.note.contains("round-robin"));
    }
}
