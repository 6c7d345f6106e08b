//! Panel CSV and schema sidecar I/O.
//!
//! Panel CSV: UTF-8, `.` decimal separator, header row with required
//! columns `city`, `year`, `declared` (0/1), `cost`, followed by one column
//! per schema entry in sidecar order.
//!
//! Schema sidecar: JSON. Either a bare array of entries
//! `[{"name", "kind", "levels"?, "group", "role"?}, ...]` or an object
//! `{"covariates": [...], "cost_bound": <number>?}` when a panel-level cost
//! bound is pinned. `role` defaults to `"x"`; `"z"` marks drought-index
//! channels. `levels` is required for `"categorical"` entries.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    CityId, CovariateKind, CovariateRole, CovariateSchema, Observation, Panel, PanelError,
    PanelSlice, SchemaEntry, TimeIndex,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SidecarEntry {
    name: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    levels: Option<u8>,
    group: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    role: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Sidecar {
    Entries(Vec<SidecarEntry>),
    WithBound {
        covariates: Vec<SidecarEntry>,
        #[serde(default)]
        cost_bound: Option<f64>,
    },
}

fn entry_from_sidecar(raw: &SidecarEntry) -> Result<SchemaEntry, PanelError> {
    let kind = match raw.kind.as_str() {
        "continuous" => CovariateKind::Continuous,
        "categorical" => CovariateKind::Categorical {
            levels: raw.levels.ok_or_else(|| {
                PanelError::Format(format!("entry `{}`: categorical without levels", raw.name))
            })?,
        },
        other => {
            return Err(PanelError::Format(format!(
                "entry `{}`: unknown kind `{other}`",
                raw.name
            )))
        }
    };
    let role = match raw.role.as_deref() {
        None | Some("x") => CovariateRole::X,
        Some("z") => CovariateRole::Z,
        Some(other) => {
            return Err(PanelError::Format(format!(
                "entry `{}`: unknown role `{other}`",
                raw.name
            )))
        }
    };
    Ok(SchemaEntry {
        name: raw.name.clone(),
        kind,
        group: raw.group.clone(),
        role,
    })
}

fn entry_to_sidecar(entry: &SchemaEntry) -> SidecarEntry {
    let (kind, levels) = match entry.kind {
        CovariateKind::Continuous => ("continuous".to_owned(), None),
        CovariateKind::Categorical { levels } => ("categorical".to_owned(), Some(levels)),
    };
    SidecarEntry {
        name: entry.name.clone(),
        kind,
        levels,
        group: entry.group.clone(),
        role: match entry.role {
            CovariateRole::X => None,
            CovariateRole::Z => Some("z".to_owned()),
        },
    }
}

/// Reads a schema sidecar; returns the schema and the optional pinned cost
/// bound.
pub fn read_schema(path: &Path) -> Result<(CovariateSchema, Option<f64>), PanelError> {
    let text = std::fs::read_to_string(path)?;
    let sidecar: Sidecar = serde_json::from_str(&text)?;
    let (raw_entries, bound) = match sidecar {
        Sidecar::Entries(entries) => (entries, None),
        Sidecar::WithBound {
            covariates,
            cost_bound,
        } => (covariates, cost_bound),
    };
    let entries = raw_entries
        .iter()
        .map(entry_from_sidecar)
        .collect::<Result<Vec<_>, _>>()?;
    Ok((CovariateSchema::new(entries)?, bound))
}

pub fn write_schema(
    path: &Path,
    schema: &CovariateSchema,
    cost_bound: Option<f64>,
) -> Result<(), PanelError> {
    let covariates: Vec<SidecarEntry> = schema.entries().iter().map(entry_to_sidecar).collect();
    let text = match cost_bound {
        Some(bound) => serde_json::to_string_pretty(&serde_json::json!({
            "covariates": covariates,
            "cost_bound": bound,
        }))?,
        None => serde_json::to_string_pretty(&covariates)?,
    };
    std::fs::write(path, text)?;
    Ok(())
}

fn parse_field<T: std::str::FromStr>(raw: &str, column: &str, line: u64) -> Result<T, PanelError> {
    raw.trim()
        .parse::<T>()
        .map_err(|_| PanelError::Format(format!("line {line}: bad `{column}` value `{raw}`")))
}

/// Reads a panel CSV against a schema. Missing values (empty fields) are
/// rejected; there is no imputation.
pub fn read_panel_csv(
    path: &Path,
    schema: &CovariateSchema,
    cost_bound: Option<f64>,
) -> Result<Panel, PanelError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_owned())
        .collect();
    let mut expected: Vec<String> = vec![
        "city".to_owned(),
        "year".to_owned(),
        "declared".to_owned(),
        "cost".to_owned(),
    ];
    expected.extend(schema.entries().iter().map(|e| e.name.clone()));
    if header != expected {
        return Err(PanelError::Format(format!(
            "header mismatch: expected [{}], found [{}]",
            expected.join(","),
            header.join(",")
        )));
    }

    let x_slots: Vec<bool> = schema
        .entries()
        .iter()
        .map(|e| e.role == CovariateRole::X)
        .collect();
    let mut by_year: BTreeMap<i32, Vec<Observation>> = BTreeMap::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let line = idx as u64 + 2;
        if record.len() != expected.len() {
            return Err(PanelError::Format(format!(
                "line {line}: {} fields, expected {}",
                record.len(),
                expected.len()
            )));
        }
        for (pos, field) in record.iter().enumerate() {
            if field.trim().is_empty() {
                return Err(PanelError::Format(format!(
                    "line {line}: missing value in column `{}`",
                    expected[pos]
                )));
            }
        }
        let city = CityId(parse_field::<u32>(&record[0], "city", line)?);
        let year = TimeIndex(parse_field::<i32>(&record[1], "year", line)?);
        let declared_raw: u8 = parse_field(&record[2], "declared", line)?;
        let declared = match declared_raw {
            0 => false,
            1 => true,
            other => {
                return Err(PanelError::Format(format!(
                    "line {line}: `declared` must be 0 or 1, found {other}"
                )))
            }
        };
        let cost: f64 = parse_field(&record[3], "cost", line)?;
        let mut x = Vec::with_capacity(schema.n_x());
        let mut z = Vec::with_capacity(schema.n_z());
        for (slot, field) in record.iter().skip(4).enumerate() {
            let value: f64 = parse_field(field, &expected[slot + 4], line)?;
            if x_slots[slot] {
                x.push(value);
            } else {
                z.push(value);
            }
        }
        let obs = Observation::new(city, year, x, z, cost, declared, schema)?;
        by_year.entry(year.0).or_default().push(obs);
    }

    let slices: Vec<PanelSlice> = by_year
        .into_iter()
        .map(|(year, observations)| PanelSlice {
            time: TimeIndex(year),
            observations,
        })
        .collect();
    Panel::from_slices(schema.clone(), slices, cost_bound)
}

pub fn write_panel_csv(panel: &Panel, path: &Path) -> Result<(), PanelError> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec![
        "city".to_owned(),
        "year".to_owned(),
        "declared".to_owned(),
        "cost".to_owned(),
    ];
    header.extend(panel.schema().entries().iter().map(|e| e.name.clone()));
    writer.write_record(&header)?;
    let x_roles: Vec<bool> = panel
        .schema()
        .entries()
        .iter()
        .map(|e| e.role == CovariateRole::X)
        .collect();
    for slice in panel.slices() {
        for obs in &slice.observations {
            let mut row = vec![
                obs.city.0.to_string(),
                obs.time.0.to_string(),
                if obs.declared { "1" } else { "0" }.to_string(),
                obs.y.to_string(),
            ];
            let mut xi = 0;
            let mut zi = 0;
            for is_x in &x_roles {
                if *is_x {
                    row.push(obs.x[xi].to_string());
                    xi += 1;
                } else {
                    row.push(obs.z[zi].to_string());
                    zi += 1;
                }
            }
            writer.write_record(&row)?;
        }
    }
    writer.flush()?;
    Ok(())
}
