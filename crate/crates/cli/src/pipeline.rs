//! End-to-end run pipeline: obtain the panel, run the schedule, compute
//! importance, emit artifacts.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;

use osassl_core::features::{
    aggregate_swi, build_swi_block, cdf_probabilities, compound_covariates, fit_quarter_cdfs,
    quarter_means, read_grid_csv, read_houses_csv, read_overlaps_csv, GridSwi, HouseRecord,
    OverlapWeights, QuarterCdf, PERIODS_PER_YEAR,
};
use osassl_core::graph::degree_stats;
use osassl_core::importance::{
    group_report, score_categorical, score_continuous, GroupSummary, ImportanceScore,
};
use osassl_core::panel::{
    io as panel_io, CovariateKind, CovariateSchema, Observation, Panel, PanelSlice, SchemaEntry,
    TimeIndex,
};
use osassl_core::superlearner::{run_schedule, ScheduleConfig, ScheduleOutput};
use osassl_core::synthgen::{generate, GroundTruth};

use crate::config::{ImportanceSource, InputConfig, RunConfig};
use crate::outputs;

pub fn execute(config: &RunConfig, out_dir: &Path) -> anyhow::Result<()> {
    let diagnostics = config.diagnostics();
    if !diagnostics.is_empty() {
        anyhow::bail!("config stage: {}", diagnostics.join("; "));
    }

    let (panel, truth) = load_input(config).context("input stage")?;

    let schedule_config = ScheduleConfig {
        stages: config.meta.stages,
        lambda: config.meta.lambda,
        epsilon: config.meta.epsilon,
        penalty_variant: config.meta.penalty_variant,
        algorithms: config.meta.algorithms.clone(),
    };
    let truth_ref = truth
        .as_ref()
        .map(|t| t as &dyn osassl_core::superlearner::TruthModel);
    let output =
        run_schedule(&panel, &config.zoo, &schedule_config, truth_ref).context("schedule stage")?;

    let (scores, groups) =
        importance_scores(&panel, &output, config).context("importance stage")?;

    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("output stage: cannot create `{}`", out_dir.display()))?;
    outputs::write_all(
        out_dir,
        &panel,
        &output,
        &scores,
        &groups,
        truth.as_ref().map(|t| &t.graph),
        config.meta.epsilon,
    )
    .context("output stage")?;
    Ok(())
}

fn load_input(config: &RunConfig) -> anyhow::Result<(Panel, Option<GroundTruth>)> {
    match &config.input {
        InputConfig::Synthetic(spec) => {
            let (panel, truth) = generate(spec)?;
            Ok((panel, Some(truth)))
        }
        InputConfig::Csv(csv) => {
            let (schema, cost_bound) = panel_io::read_schema(&csv.schema)
                .with_context(|| format!("schema `{}`", csv.schema.display()))?;
            let mut panel = panel_io::read_panel_csv(&csv.panel, &schema, cost_bound)
                .with_context(|| format!("panel `{}`", csv.panel.display()))?;
            if csv.swi.is_some() || csv.houses.is_some() {
                let swi = match &csv.swi {
                    Some(input) => {
                        let grid = read_grid_csv(&input.grid)
                            .with_context(|| format!("grid `{}`", input.grid.display()))?;
                        let overlaps = read_overlaps_csv(&input.overlaps)
                            .with_context(|| format!("overlaps `{}`", input.overlaps.display()))?;
                        Some((grid, overlaps, input.cdf_years))
                    }
                    None => None,
                };
                let houses = match &csv.houses {
                    Some(input) => {
                        let records = read_houses_csv(&input.path)
                            .with_context(|| format!("houses `{}`", input.path.display()))?;
                        Some((records, input.quantile_count))
                    }
                    None => None,
                };
                panel = enrich_panel(&panel, swi, houses).context("feature pipeline")?;
            }
            Ok((panel, None))
        }
    }
}

/// House records grouped by (city, year).
type HouseMap = BTreeMap<(u32, i32), Vec<HouseRecord>>;

/// Appends compound covariates (X role) and the drought-index block plus
/// quarter-CDF probabilities (Z role) to every observation.
fn enrich_panel(
    panel: &Panel,
    swi: Option<(GridSwi, OverlapWeights, (i32, i32))>,
    houses: Option<(Vec<HouseRecord>, usize)>,
) -> anyhow::Result<Panel> {
    let mut entries: Vec<SchemaEntry> = panel.schema().entries().to_vec();

    let house_map: Option<(HouseMap, usize)> = houses.map(|(records, k)| {
        let mut map: HouseMap = BTreeMap::new();
        for record in records {
            map.entry((record.city.0, record.year))
                .or_default()
                .push(record);
        }
        (map, k)
    });
    if let Some((_, k)) = &house_map {
        for label in ["attr1", "attr2", "attr3", "a12", "a13", "a123"] {
            entries.push(SchemaEntry::continuous(
                &format!("cc_mean_{label}"),
                "compound",
            ));
        }
        for attr in 1..=3 {
            for i in 1..=*k {
                entries.push(SchemaEntry::continuous(
                    &format!("cc_q_attr{attr}_{i:02}"),
                    "compound",
                ));
            }
        }
    }

    let cdfs: Option<(GridSwi, OverlapWeights, QuarterCdf)> = match swi {
        Some((grid, overlaps, (start, end))) => {
            let mut samples: [Vec<f64>; 4] = Default::default();
            for city in panel.cities() {
                for year in start..=end {
                    let series = aggregate_swi(&grid, &overlaps, *city, year)
                        .with_context(|| format!("cdf window year {year}"))?;
                    for (q, mean) in quarter_means(&series).into_iter().enumerate() {
                        samples[q].push(mean);
                    }
                }
            }
            let cdfs = fit_quarter_cdfs(&samples)?;
            for lag in 0..3 {
                for p in 1..=PERIODS_PER_YEAR {
                    entries.push(SchemaEntry::swi(&format!("swi_raw_t{lag}_p{p:02}"), "swi"));
                }
            }
            for lag in 0..3 {
                for stat in ["min", "mean", "sd"] {
                    entries.push(SchemaEntry::swi(&format!("swi_{stat}_t{lag}"), "swi"));
                }
            }
            for window in 1..=3 {
                entries.push(SchemaEntry::swi(&format!("swi_dry_w{window}"), "swi"));
            }
            for q in 1..=4 {
                for lag in 0..3 {
                    entries.push(SchemaEntry::swi(&format!("swi_cdf_q{q}_t{lag}"), "swi"));
                }
            }
            Some((grid, overlaps, cdfs))
        }
        None => None,
    };

    let schema = CovariateSchema::new(entries)?;
    let mut slices = Vec::with_capacity(panel.n_slices());
    for slice in panel.slices() {
        let year = slice.time.0;
        let mut observations = Vec::with_capacity(slice.observations.len());
        for obs in &slice.observations {
            let mut x = obs.x.clone();
            let mut z = obs.z.clone();
            if let Some((map, k)) = &house_map {
                let records = map.get(&(obs.city.0, year)).ok_or_else(|| {
                    anyhow::anyhow!("no house records for city {} year {year}", obs.city.0)
                })?;
                let compound = compound_covariates(records, *k)?;
                x.extend_from_slice(&compound.means);
                for quantiles in &compound.quantiles {
                    x.extend_from_slice(quantiles);
                }
            }
            if let Some((grid, overlaps, cdfs)) = &cdfs {
                let series: Vec<[f64; PERIODS_PER_YEAR]> = (0..3)
                    .map(|lag| aggregate_swi(grid, overlaps, obs.city, year - lag))
                    .collect::<Result<_, _>>()
                    .with_context(|| format!("swi for city {} around year {year}", obs.city.0))?;
                let block = build_swi_block(&series[0], &series[1], &series[2])?;
                z.extend_from_slice(&block);
                let means: [[f64; 4]; 3] = std::array::from_fn(|lag| quarter_means(&series[lag]));
                z.extend_from_slice(&cdf_probabilities(cdfs, &means));
            }
            observations.push(Observation::new(
                obs.city,
                obs.time,
                x,
                z,
                obs.y,
                obs.declared,
                &schema,
            )?);
        }
        slices.push(PanelSlice {
            time: slice.time,
            observations,
        });
    }
    Ok(Panel::from_slices(
        schema,
        slices,
        Some(panel.cost_bound()),
    )?)
}

/// Pools evaluation-window predictions and scores every schema covariate.
fn importance_scores(
    panel: &Panel,
    output: &ScheduleOutput,
    config: &RunConfig,
) -> anyhow::Result<(Vec<ImportanceScore>, Vec<GroupSummary>)> {
    let settings = &config.importance;
    let in_window = |time: TimeIndex| {
        settings
            .window
            .is_none_or(|(start, end)| time.0 >= start && time.0 <= end)
    };
    let rows: Vec<_> = output
        .report
        .rows
        .iter()
        .filter(|r| in_window(r.time))
        .collect();
    if rows.is_empty() {
        anyhow::bail!("importance window excludes every evaluation year");
    }

    let mut predictions = Vec::new();
    let mut slice_refs = Vec::new();
    let first_time = panel.first_time().0;
    for row in &rows {
        let slice = &panel.slices()[(row.time.0 - first_time) as usize];
        let city_preds = match settings.source {
            ImportanceSource::Discrete => &row.city_predictions,
            ImportanceSource::Continuous => &row.city_predictions_continuous,
        };
        for (city_index, pred) in city_preds.iter().enumerate() {
            predictions.push(*pred);
            slice_refs.push(&slice.observations[city_index]);
        }
    }

    let mut scores = Vec::new();
    let mut x_index = 0;
    let mut z_index = 0;
    for (entry_index, entry) in panel.schema().entries().iter().enumerate() {
        let seed = settings
            .seed
            .wrapping_add((entry_index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let is_x = entry.role == osassl_core::panel::CovariateRole::X;
        let values: Vec<f64> = slice_refs
            .iter()
            .map(|obs| if is_x { obs.x[x_index] } else { obs.z[z_index] })
            .collect();
        let score = match entry.kind {
            CovariateKind::Continuous => score_continuous(
                &entry.name,
                &entry.group,
                &predictions,
                &values,
                settings.n_permutations,
                seed,
            )?,
            CovariateKind::Categorical { levels } => {
                let codes: Vec<usize> = values.iter().map(|v| *v as usize).collect();
                score_categorical(
                    &entry.name,
                    &entry.group,
                    &predictions,
                    &codes,
                    levels,
                    settings.n_permutations,
                    seed,
                )?
            }
        };
        scores.push(score);
        if is_x {
            x_index += 1;
        } else {
            z_index += 1;
        }
    }
    let groups = group_report(&scores, settings.alpha)?;
    Ok((scores, groups))
}

/// Generates a synthetic panel and writes the panel CSV, the schema
/// sidecar and a truth sidecar recording the spec and truth parameters.
pub fn generate_to_dir(
    spec: &osassl_core::synthgen::GeneratorSpec,
    out_dir: &Path,
) -> anyhow::Result<()> {
    let (panel, truth) = generate(spec).context("generate stage")?;
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("output stage: cannot create `{}`", out_dir.display()))?;
    panel_io::write_panel_csv(&panel, &out_dir.join("panel.csv")).context("output stage")?;
    panel_io::write_schema(
        &out_dir.join("schema.json"),
        panel.schema(),
        Some(panel.cost_bound()),
    )
    .context("output stage")?;
    let sidecar = serde_json::json!({
        "spec": spec,
        "truth": truth,
        "degree_stats": degree_stats(&truth.graph).ok(),
    });
    std::fs::write(
        out_dir.join("truth.json"),
        serde_json::to_string_pretty(&sidecar).context("output stage")?,
    )
    .context("output stage")?;
    Ok(())
}
