//! Panel data model: cities, yearly slices, covariate schema, cost bounds.
//!
//! A [`Panel`] is a time-ordered sequence of [`PanelSlice`]s over a fixed
//! city set. Every observation carries a covariate vector `x` (mixed
//! continuous/categorical, described by the [`CovariateSchema`]), a vector
//! `z` of continuous drought-index features, a nonnegative cost bounded by
//! the panel-level `cost_bound`, and the declaration flag. A city that did
//! not obtain the declaration has cost exactly zero; that constraint is
//! enforced at construction and propagated by every predictor.

pub mod io;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Opaque city identifier, unique within a panel's city set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CityId(pub u32);

/// Year-like time index; strictly increasing across a panel's slices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TimeIndex(pub i32);

impl TimeIndex {
    pub fn next(self) -> TimeIndex {
        TimeIndex(self.0 + 1)
    }
}

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("covariate schema entry `{0}` duplicated")]
    DuplicateEntry(String),
    #[error("categorical entry `{name}` has {levels} levels; expected 2..=5")]
    BadLevelCount { name: String, levels: u8 },
    #[error("swi-role entry `{0}` must be continuous")]
    CategoricalSwi(String),
    #[error("non-declared observation for city {0:?} has nonzero cost {1}")]
    MaskedCost(CityId, f64),
    #[error("cost {cost} for city {city:?} outside [0, {bound}]")]
    CostOutOfBounds { city: CityId, cost: f64, bound: f64 },
    #[error("covariate vector for city {city:?} has {got} entries, schema expects {want}")]
    Arity {
        city: CityId,
        got: usize,
        want: usize,
    },
    #[error("covariate `{name}` for city {city:?} is not a valid level code: {value}")]
    BadLevelCode {
        city: CityId,
        name: String,
        value: f64,
    },
    #[error("covariate `{name}` for city {city:?} is not finite")]
    NotFinite { city: CityId, name: String },
    #[error("panel has no slices")]
    Empty,
    #[error("slice at {0:?} does not cover the panel city set exactly")]
    Coverage(TimeIndex),
    #[error("slice times not contiguous: {0:?} followed by {1:?}")]
    NonContiguous(TimeIndex, TimeIndex),
    #[error("observation time {0:?} does not match its slice time {1:?}")]
    SliceTimeMismatch(TimeIndex, TimeIndex),
    #[error("prefix time {t:?} out of range [{first:?}, {last:?}]")]
    PrefixOutOfRange {
        t: TimeIndex,
        first: TimeIndex,
        last: TimeIndex,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("schema json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("panel csv: {0}")]
    Format(String),
}

/// Kind of a covariate column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateKind {
    Continuous,
    /// Small categorical; stored as integer codes `0..levels`.
    Categorical {
        levels: u8,
    },
}

/// Whether an entry belongs to the city-description block (`X`) or the
/// drought-index block (`Z`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CovariateRole {
    #[default]
    X,
    Z,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaEntry {
    pub name: String,
    pub kind: CovariateKind,
    /// Group label used by the importance report.
    pub group: String,
    #[serde(default)]
    pub role: CovariateRole,
}

impl SchemaEntry {
    pub fn continuous(name: &str, group: &str) -> Self {
        SchemaEntry {
            name: name.to_owned(),
            kind: CovariateKind::Continuous,
            group: group.to_owned(),
            role: CovariateRole::X,
        }
    }

    pub fn categorical(name: &str, levels: u8, group: &str) -> Self {
        SchemaEntry {
            name: name.to_owned(),
            kind: CovariateKind::Categorical { levels },
            group: group.to_owned(),
            role: CovariateRole::X,
        }
    }

    pub fn swi(name: &str, group: &str) -> Self {
        SchemaEntry {
            name: name.to_owned(),
            kind: CovariateKind::Continuous,
            group: group.to_owned(),
            role: CovariateRole::Z,
        }
    }
}

/// Ordered covariate schema shared by all observations of a panel.
///
/// Entries with role `X` describe the mixed covariate vector; entries with
/// role `Z` name the continuous drought-index channels. The relative order
/// of entries fixes the panel CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSchema {
    entries: Vec<SchemaEntry>,
}

impl CovariateSchema {
    pub fn new(entries: Vec<SchemaEntry>) -> Result<Self, PanelError> {
        let mut seen = std::collections::HashSet::new();
        for e in &entries {
            if !seen.insert(e.name.clone()) {
                return Err(PanelError::DuplicateEntry(e.name.clone()));
            }
            if let CovariateKind::Categorical { levels } = e.kind {
                if !(2..=5).contains(&levels) {
                    return Err(PanelError::BadLevelCount {
                        name: e.name.clone(),
                        levels,
                    });
                }
                if e.role == CovariateRole::Z {
                    return Err(PanelError::CategoricalSwi(e.name.clone()));
                }
            }
        }
        Ok(CovariateSchema { entries })
    }

    pub fn entries(&self) -> &[SchemaEntry] {
        &self.entries
    }

    pub fn x_entries(&self) -> impl Iterator<Item = &SchemaEntry> {
        self.entries.iter().filter(|e| e.role == CovariateRole::X)
    }

    pub fn z_entries(&self) -> impl Iterator<Item = &SchemaEntry> {
        self.entries.iter().filter(|e| e.role == CovariateRole::Z)
    }

    pub fn n_x(&self) -> usize {
        self.x_entries().count()
    }

    pub fn n_z(&self) -> usize {
        self.z_entries().count()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.iter().any(|e| e.name == name)
    }

    /// Position of `name` within the x-block (or z-block).
    pub fn x_position(&self, name: &str) -> Option<usize> {
        self.x_entries().position(|e| e.name == name)
    }

    pub fn z_position(&self, name: &str) -> Option<usize> {
        self.z_entries().position(|e| e.name == name)
    }
}

/// One (city, year) record.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub city: CityId,
    pub time: TimeIndex,
    /// Covariates in schema x-order; categorical entries hold level codes.
    pub x: Vec<f64>,
    /// Drought-index features in schema z-order.
    pub z: Vec<f64>,
    pub y: f64,
    pub declared: bool,
}

impl Observation {
    /// Validates arity, level codes, finiteness and the zero-mask
    /// constraint (`declared = false` forces `y = 0`). Cost bounds are
    /// checked against the panel bound at panel construction.
    pub fn new(
        city: CityId,
        time: TimeIndex,
        x: Vec<f64>,
        z: Vec<f64>,
        y: f64,
        declared: bool,
        schema: &CovariateSchema,
    ) -> Result<Self, PanelError> {
        if x.len() != schema.n_x() {
            return Err(PanelError::Arity {
                city,
                got: x.len(),
                want: schema.n_x(),
            });
        }
        if z.len() != schema.n_z() {
            return Err(PanelError::Arity {
                city,
                got: z.len(),
                want: schema.n_z(),
            });
        }
        for (value, entry) in x.iter().zip(schema.x_entries()) {
            if !value.is_finite() {
                return Err(PanelError::NotFinite {
                    city,
                    name: entry.name.clone(),
                });
            }
            if let CovariateKind::Categorical { levels } = entry.kind {
                if value.fract() != 0.0 || *value < 0.0 || *value >= levels as f64 {
                    return Err(PanelError::BadLevelCode {
                        city,
                        name: entry.name.clone(),
                        value: *value,
                    });
                }
            }
        }
        for (value, entry) in z.iter().zip(schema.z_entries()) {
            if !value.is_finite() {
                return Err(PanelError::NotFinite {
                    city,
                    name: entry.name.clone(),
                });
            }
        }
        if !declared && y != 0.0 {
            return Err(PanelError::MaskedCost(city, y));
        }
        if !y.is_finite() || y < 0.0 {
            return Err(PanelError::CostOutOfBounds {
                city,
                cost: y,
                bound: f64::INFINITY,
            });
        }
        Ok(Observation {
            city,
            time,
            x,
            z,
            y,
            declared,
        })
    }
}

/// All observations of one year, ordered by city id.
#[derive(Debug, Clone)]
pub struct PanelSlice {
    pub time: TimeIndex,
    pub observations: Vec<Observation>,
}

impl PanelSlice {
    pub fn actual_total(&self) -> f64 {
        self.observations.iter().map(|o| o.y).sum()
    }
}

/// Immutable panel: schema, city set, contiguous slices, cost bound.
#[derive(Debug, Clone)]
pub struct Panel {
    schema: Arc<CovariateSchema>,
    cities: Vec<CityId>,
    slices: Vec<PanelSlice>,
    cost_bound: f64,
}

impl Panel {
    /// Builds a panel from slices, validating coverage, contiguity and cost
    /// bounds. When `cost_bound` is `None` the bound defaults to 1.5 times
    /// the largest observed cost (or 1.0 on an all-zero panel).
    pub fn from_slices(
        schema: CovariateSchema,
        mut slices: Vec<PanelSlice>,
        cost_bound: Option<f64>,
    ) -> Result<Self, PanelError> {
        if slices.is_empty() {
            return Err(PanelError::Empty);
        }
        slices.sort_by_key(|s| s.time);
        for s in &mut slices {
            s.observations.sort_by_key(|o| o.city);
        }
        let cities: Vec<CityId> = slices[0].observations.iter().map(|o| o.city).collect();
        if cities.windows(2).any(|w| w[0] == w[1]) {
            return Err(PanelError::Coverage(slices[0].time));
        }
        for window in slices.windows(2) {
            if window[1].time != window[0].time.next() {
                return Err(PanelError::NonContiguous(window[0].time, window[1].time));
            }
        }
        for s in &slices {
            if s.observations.len() != cities.len()
                || s.observations
                    .iter()
                    .zip(&cities)
                    .any(|(o, c)| o.city != *c)
            {
                return Err(PanelError::Coverage(s.time));
            }
            for o in &s.observations {
                if o.time != s.time {
                    return Err(PanelError::SliceTimeMismatch(o.time, s.time));
                }
            }
        }
        let max_cost = slices
            .iter()
            .flat_map(|s| s.observations.iter().map(|o| o.y))
            .fold(0.0_f64, f64::max);
        let bound = cost_bound.unwrap_or(if max_cost > 0.0 { max_cost * 1.5 } else { 1.0 });
        for s in &slices {
            for o in &s.observations {
                if o.y < 0.0 || o.y > bound {
                    return Err(PanelError::CostOutOfBounds {
                        city: o.city,
                        cost: o.y,
                        bound,
                    });
                }
            }
        }
        Ok(Panel {
            schema: Arc::new(schema),
            cities,
            slices,
            cost_bound: bound,
        })
    }

    pub fn schema(&self) -> &CovariateSchema {
        &self.schema
    }

    pub fn cities(&self) -> &[CityId] {
        &self.cities
    }

    pub fn n_cities(&self) -> usize {
        self.cities.len()
    }

    pub fn slices(&self) -> &[PanelSlice] {
        &self.slices
    }

    pub fn n_slices(&self) -> usize {
        self.slices.len()
    }

    pub fn first_time(&self) -> TimeIndex {
        self.slices[0].time
    }

    pub fn last_time(&self) -> TimeIndex {
        self.slices[self.slices.len() - 1].time
    }

    pub fn cost_bound(&self) -> f64 {
        self.cost_bound
    }

    /// Sub-panel of all slices with time `<= t`; shares the schema and the
    /// city set. This realizes the training history available at time `t`.
    pub fn history_prefix(&self, t: TimeIndex) -> Result<Panel, PanelError> {
        if t < self.first_time() || t > self.last_time() {
            return Err(PanelError::PrefixOutOfRange {
                t,
                first: self.first_time(),
                last: self.last_time(),
            });
        }
        let keep = (t.0 - self.first_time().0 + 1) as usize;
        Ok(Panel {
            schema: Arc::clone(&self.schema),
            cities: self.cities.clone(),
            slices: self.slices[..keep].to_vec(),
            cost_bound: self.cost_bound,
        })
    }

    /// Iterator over all observations in time order.
    pub fn observations(&self) -> impl Iterator<Item = &Observation> {
        self.slices.iter().flat_map(|s| s.observations.iter())
    }
}
