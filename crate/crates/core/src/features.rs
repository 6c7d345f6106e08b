//! City-level feature engineering: grid-to-city drought-index aggregation,
//! three-year index blocks, quarter CDF probabilities and insured-sum
//! weighted compound covariates.
//!
//! A year splits into 36 ten-day periods: period `p` spans days
//! `10(p-1)+1 ..= 10p`, with period 36 absorbing the year's tail. The dry
//! season (April-September) is approximated by periods 10..=27 and the four
//! quarters by consecutive 9-period blocks.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::panel::CityId;
use crate::stats::{mean, population_sd, quantile_type1};

pub const PERIODS_PER_YEAR: usize = 36;
/// Periods covering April 1 - September 30 (1-based, inclusive).
pub const DRY_SEASON: std::ops::RangeInclusive<usize> = 10..=27;
/// Feature count of [`build_swi_block`]: 108 raw + 9 summaries + 3
/// dry-season means.
pub const SWI_BLOCK_LEN: usize = 120;
/// Default quantile count for compound covariates.
pub const DEFAULT_QUANTILE_COUNT: usize = 29;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("city {0:?} has no overlap weights")]
    UnknownCity(CityId),
    #[error("city {0:?} has zero total intersection area")]
    ZeroArea(CityId),
    #[error("negative intersection area for city {0:?}")]
    NegativeArea(CityId),
    #[error("grid cell {cell} missing for year {year}")]
    MissingCell { cell: u64, year: i32 },
    #[error("grid cell {cell}, year {year}: period {period} out of 1..=36")]
    BadPeriod { cell: u64, year: i32, period: usize },
    #[error("grid cell {cell}, year {year}: {got} periods, expected 36 contiguous")]
    IncompleteYear { cell: u64, year: i32, got: usize },
    #[error("quarter {0} has no historical values")]
    EmptyQuarter(usize),
    #[error("no house records")]
    NoHouses,
    #[error("house {0} has non-positive insured sum {1}")]
    BadInsuredSum(u64, f64),
    #[error("quantile count must be >= 1")]
    BadQuantileCount,
    #[error("non-finite value in {0}")]
    NotFinite(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Format(String),
}

/// Per grid-cell, per (year, ten-day period) drought-index values.
#[derive(Debug, Clone, Default)]
pub struct GridSwi {
    cells: BTreeMap<(u64, i32), Vec<f64>>,
}

impl GridSwi {
    /// Builds from `(cell, year, period, value)` records; every appearing
    /// (cell, year) pair must cover periods 1..=36 exactly.
    pub fn from_records(records: &[(u64, i32, usize, f64)]) -> Result<Self, FeatureError> {
        let mut partial: BTreeMap<(u64, i32), Vec<Option<f64>>> = BTreeMap::new();
        for &(cell, year, period, value) in records {
            if !(1..=PERIODS_PER_YEAR).contains(&period) {
                return Err(FeatureError::BadPeriod { cell, year, period });
            }
            if !value.is_finite() {
                return Err(FeatureError::NotFinite(format!(
                    "grid cell {cell}, year {year}, period {period}"
                )));
            }
            partial
                .entry((cell, year))
                .or_insert_with(|| vec![None; PERIODS_PER_YEAR])[period - 1] = Some(value);
        }
        let mut cells = BTreeMap::new();
        for ((cell, year), values) in partial {
            let got = values.iter().filter(|v| v.is_some()).count();
            if got != PERIODS_PER_YEAR {
                return Err(FeatureError::IncompleteYear { cell, year, got });
            }
            cells.insert(
                (cell, year),
                values.into_iter().map(Option::unwrap).collect(),
            );
        }
        Ok(GridSwi { cells })
    }

    pub fn get(&self, cell: u64, year: i32) -> Option<&[f64]> {
        self.cells.get(&(cell, year)).map(Vec::as_slice)
    }

    pub fn years(&self) -> impl Iterator<Item = i32> + '_ {
        self.cells.keys().map(|&(_, y)| y)
    }
}

/// Per-city list of (grid cell, intersection area).
#[derive(Debug, Clone, Default)]
pub struct OverlapWeights {
    per_city: BTreeMap<CityId, Vec<(u64, f64)>>,
}

impl OverlapWeights {
    pub fn from_records(records: &[(CityId, u64, f64)]) -> Result<Self, FeatureError> {
        let mut per_city: BTreeMap<CityId, Vec<(u64, f64)>> = BTreeMap::new();
        for &(city, cell, area) in records {
            if area < 0.0 || !area.is_finite() {
                return Err(FeatureError::NegativeArea(city));
            }
            per_city.entry(city).or_default().push((cell, area));
        }
        for (city, cells) in &per_city {
            if cells.iter().map(|(_, a)| a).sum::<f64>() <= 0.0 {
                return Err(FeatureError::ZeroArea(*city));
            }
        }
        Ok(OverlapWeights { per_city })
    }

    pub fn cities(&self) -> impl Iterator<Item = CityId> + '_ {
        self.per_city.keys().copied()
    }

    pub fn cells_of(&self, city: CityId) -> Option<&[(u64, f64)]> {
        self.per_city.get(&city).map(Vec::as_slice)
    }
}

/// Area-weighted convex average of the overlapping cells' index values:
/// one value per ten-day period.
pub fn aggregate_swi(
    grid: &GridSwi,
    weights: &OverlapWeights,
    city: CityId,
    year: i32,
) -> Result<[f64; PERIODS_PER_YEAR], FeatureError> {
    let cells = weights
        .cells_of(city)
        .ok_or(FeatureError::UnknownCity(city))?;
    let total: f64 = cells.iter().map(|(_, a)| a).sum();
    if total <= 0.0 {
        return Err(FeatureError::ZeroArea(city));
    }
    let mut out = [0.0; PERIODS_PER_YEAR];
    for &(cell, area) in cells {
        let values = grid
            .get(cell, year)
            .ok_or(FeatureError::MissingCell { cell, year })?;
        for (slot, value) in out.iter_mut().zip(values) {
            *slot += area * value;
        }
    }
    for slot in &mut out {
        *slot /= total;
    }
    Ok(out)
}

/// Concatenated three-year feature block for one city:
/// - 108 raw values (years `t`, `t-1`, `t-2`, 36 periods each),
/// - per-year minima, means and population standard deviations
///   (min/mean/sd for `t`, then `t-1`, then `t-2`),
/// - dry-season means over the windows `t`, `t..t-1` and `t..t-2`.
pub fn build_swi_block(
    year_t: &[f64],
    year_t1: &[f64],
    year_t2: &[f64],
) -> Result<Vec<f64>, FeatureError> {
    for series in [year_t, year_t1, year_t2] {
        if series.len() != PERIODS_PER_YEAR {
            return Err(FeatureError::Format(format!(
                "swi series has {} periods, expected {PERIODS_PER_YEAR}",
                series.len()
            )));
        }
    }
    let mut out = Vec::with_capacity(SWI_BLOCK_LEN);
    out.extend_from_slice(year_t);
    out.extend_from_slice(year_t1);
    out.extend_from_slice(year_t2);
    for series in [year_t, year_t1, year_t2] {
        out.push(series.iter().copied().fold(f64::INFINITY, f64::min));
        out.push(mean(series));
        out.push(population_sd(series));
    }
    let dry = |series: &[f64]| -> Vec<f64> {
        series[(*DRY_SEASON.start() - 1)..*DRY_SEASON.end()].to_vec()
    };
    let mut window = dry(year_t);
    out.push(mean(&window));
    window.extend(dry(year_t1));
    out.push(mean(&window));
    window.extend(dry(year_t2));
    out.push(mean(&window));
    debug_assert_eq!(out.len(), SWI_BLOCK_LEN);
    Ok(out)
}

/// Mean index values per quarter (consecutive 9-period blocks).
pub fn quarter_means(series: &[f64]) -> [f64; 4] {
    debug_assert_eq!(series.len(), PERIODS_PER_YEAR);
    let mut out = [0.0; 4];
    for (q, slot) in out.iter_mut().enumerate() {
        *slot = mean(&series[q * 9..(q + 1) * 9]);
    }
    out
}

/// Empirical cumulative distribution functions of historical quarter-mean
/// index values, one per quarter.
#[derive(Debug, Clone)]
pub struct QuarterCdf {
    sorted: [Vec<f64>; 4],
}

impl QuarterCdf {
    /// `F_q(x)` = fraction of historical quarter-`q` values `<= x`.
    pub fn evaluate(&self, quarter: usize, x: f64) -> f64 {
        debug_assert!((1..=4).contains(&quarter));
        let values = &self.sorted[quarter - 1];
        let count = values.partition_point(|v| *v <= x);
        count as f64 / values.len() as f64
    }

    pub fn n_samples(&self, quarter: usize) -> usize {
        self.sorted[quarter - 1].len()
    }
}

/// Fits the four quarter CDFs from historical samples (one vector per
/// quarter, pooled over years and cities).
pub fn fit_quarter_cdfs(samples: &[Vec<f64>; 4]) -> Result<QuarterCdf, FeatureError> {
    let mut sorted: [Vec<f64>; 4] = Default::default();
    for q in 0..4 {
        if samples[q].is_empty() {
            return Err(FeatureError::EmptyQuarter(q + 1));
        }
        if samples[q].iter().any(|v| !v.is_finite()) {
            return Err(FeatureError::NotFinite(format!("quarter {} samples", q + 1)));
        }
        let mut values = samples[q].clone();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        sorted[q] = values;
    }
    Ok(QuarterCdf { sorted })
}

/// The 12 probabilities `F_q(mean_{q,tau})` for quarters 1..=4 and
/// `tau in {t, t-1, t-2}` (quarter-major order).
pub fn cdf_probabilities(cdfs: &QuarterCdf, quarter_means_3y: &[[f64; 4]; 3]) -> [f64; 12] {
    let mut out = [0.0; 12];
    for q in 1..=4 {
        for (lag, means) in quarter_means_3y.iter().enumerate() {
            out[(q - 1) * 3 + lag] = cdfs.evaluate(q, means[q - 1]);
        }
    }
    out
}

/// One insured house within a city for one year.
#[derive(Debug, Clone, PartialEq)]
pub struct HouseRecord {
    pub house: u64,
    pub city: CityId,
    pub year: i32,
    pub insured_sum: f64,
    /// Attribute values: mean cell index, clay hazard level, ground slope.
    pub attrs: [f64; 3],
}

impl HouseRecord {
    pub fn new(
        house: u64,
        city: CityId,
        year: i32,
        insured_sum: f64,
        attrs: [f64; 3],
    ) -> Result<Self, FeatureError> {
        if insured_sum <= 0.0 || !insured_sum.is_finite() {
            return Err(FeatureError::BadInsuredSum(house, insured_sum));
        }
        if attrs.iter().any(|a| !a.is_finite()) {
            return Err(FeatureError::NotFinite(format!("house {house} attributes")));
        }
        Ok(HouseRecord {
            house,
            city,
            year,
            insured_sum,
            attrs,
        })
    }
}

/// Insured-sum weighted means for the three attributes and their products,
/// plus per-attribute quantile vectors of `{s_h * C_h}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompoundCovariates {
    /// Weighted means in order: attr1, attr2, attr3, attr1*attr2,
    /// attr1*attr3, attr1*attr2*attr3.
    pub means: [f64; 6],
    /// For each attribute, `k` evenly spaced empirical quantiles
    /// (probabilities `i/(k+1)`, left-continuous) of `{s_h * C_h : h}`.
    pub quantiles: [Vec<f64>; 3],
}

/// Computes the compound covariates for one (city, year) house set.
pub fn compound_covariates(
    houses: &[HouseRecord],
    quantile_count: usize,
) -> Result<CompoundCovariates, FeatureError> {
    if houses.is_empty() {
        return Err(FeatureError::NoHouses);
    }
    if quantile_count == 0 {
        return Err(FeatureError::BadQuantileCount);
    }
    for h in houses {
        if h.insured_sum <= 0.0 {
            return Err(FeatureError::BadInsuredSum(h.house, h.insured_sum));
        }
    }
    let total_sum: f64 = houses.iter().map(|h| h.insured_sum).sum();
    let weighted = |value: fn(&HouseRecord) -> f64| -> f64 {
        houses.iter().map(|h| h.insured_sum * value(h)).sum::<f64>() / total_sum
    };
    let means = [
        weighted(|h| h.attrs[0]),
        weighted(|h| h.attrs[1]),
        weighted(|h| h.attrs[2]),
        weighted(|h| h.attrs[0] * h.attrs[1]),
        weighted(|h| h.attrs[0] * h.attrs[2]),
        weighted(|h| h.attrs[0] * h.attrs[1] * h.attrs[2]),
    ];
    let mut quantiles: [Vec<f64>; 3] = Default::default();
    for (a, out) in quantiles.iter_mut().enumerate() {
        let mut scaled: Vec<f64> = houses.iter().map(|h| h.insured_sum * h.attrs[a]).collect();
        scaled.sort_by(|x, y| x.partial_cmp(y).unwrap());
        *out = (1..=quantile_count)
            .map(|i| quantile_type1(&scaled, i as f64 / (quantile_count + 1) as f64))
            .collect();
    }
    Ok(CompoundCovariates { means, quantiles })
}

/// Reads grid index values from CSV columns `cell,year,period,swi`.
pub fn read_grid_csv(path: &Path) -> Result<GridSwi, FeatureError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    expect_header(&mut reader, &["cell", "year", "period", "swi"])?;
    let mut records = Vec::new();
    for row in reader.deserialize::<(u64, i32, usize, f64)>() {
        records.push(row?);
    }
    GridSwi::from_records(&records)
}

/// Reads overlap areas from CSV columns `city,cell,area`.
pub fn read_overlaps_csv(path: &Path) -> Result<OverlapWeights, FeatureError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    expect_header(&mut reader, &["city", "cell", "area"])?;
    let mut records = Vec::new();
    for row in reader.deserialize::<(u32, u64, f64)>() {
        let (city, cell, area) = row?;
        records.push((CityId(city), cell, area));
    }
    OverlapWeights::from_records(&records)
}

/// Reads house records from CSV columns
/// `house,city,year,insured_sum,attr1,attr2,attr3`.
pub fn read_houses_csv(path: &Path) -> Result<Vec<HouseRecord>, FeatureError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    expect_header(
        &mut reader,
        &[
            "house",
            "city",
            "year",
            "insured_sum",
            "attr1",
            "attr2",
            "attr3",
        ],
    )?;
    let mut out = Vec::new();
    for row in reader.deserialize::<(u64, u32, i32, f64, f64, f64, f64)>() {
        let (house, city, year, insured_sum, a1, a2, a3) = row?;
        out.push(HouseRecord::new(
            house,
            CityId(city),
            year,
            insured_sum,
            [a1, a2, a3],
        )?);
    }
    Ok(out)
}

fn expect_header(
    reader: &mut csv::Reader<std::fs::File>,
    expected: &[&str],
) -> Result<(), FeatureError> {
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_owned())
        .collect();
    if header != expected {
        return Err(FeatureError::Format(format!(
            "header mismatch: expected [{}], found [{}]",
            expected.join(","),
            header.join(",")
        )));
    }
    Ok(())
}
