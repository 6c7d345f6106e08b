//! Seeded synthetic panel generator with a known stationary regression
//! function, a controllable conditional-dependency graph and an exposed
//! conditional noise variance.
//!
//! Costs are built as `theta(x, z) + amplitude * unit_noise` for declared
//! cities, where the noise amplitude never exceeds the distance of
//! `theta` to the cost bounds, so the conditional mean is exactly `theta`
//! and every cost lies in `[0, B]` without clipping. Within a slice the
//! unit noise of a city mixes its own innovation with innovations attached
//! to its incident edges; two cities are correlated if and only if they
//! share an edge, which makes the generating graph an exact one-hop
//! dependency graph.
//!
//! Generation is deterministic per seed and uses one RNG stream per slice,
//! so extending the horizon leaves earlier slices bitwise unchanged.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{
    edgeless_graph, lattice_graph, ring_graph, star_graph, DependencyGraph, GraphError,
};
use crate::learners::{BaseLearner, LearnerError};
use crate::panel::{
    CityId, CovariateSchema, Observation, Panel, PanelError, PanelSlice, SchemaEntry, TimeIndex,
};
use crate::stats::mix_seed;
use crate::superlearner::TruthModel;

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("invalid generator spec: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Topology {
    /// 4-neighbor lattice; `rows * cols` must equal the city count.
    Lattice {
        rows: usize,
        cols: usize,
    },
    /// Ring with `neighbors_each_side` links on each side.
    Ring {
        neighbors_each_side: usize,
    },
    Star,
    Edgeless,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaFamily {
    /// Linear in the raw covariates (a ridge on the one-hot design is
    /// well-specified for this family).
    Linear,
    /// Additive with smooth nonlinear transforms.
    AdditiveNonlinear,
    /// Additive step functions.
    Piecewise,
}

/// Declaration probability `clamp(base + slope * mean(z), 0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeclarationModel {
    pub base: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// Amplitude `fraction * min(theta_min, B - theta_max)` everywhere.
    Constant,
    /// Amplitude `fraction * min(theta(x, z), B - theta(x, z))`.
    Proportional,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub model: NoiseModel,
    /// Amplitude fraction in `[0, 1)`; 0 turns noise off.
    pub fraction: f64,
    /// Edge-noise mixing strength in `[0, 1)`.
    pub edge_correlation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSpec {
    /// Continuous city covariates in `[0, 1]` with AR(1) persistence.
    pub n_continuous: usize,
    /// One categorical covariate per entry, with this many levels.
    pub categorical_levels: Vec<u8>,
    /// Drought-index channels in `[0, 1]`.
    pub n_swi: usize,
    /// AR coefficient of the continuous covariates, in `[0, 1)`.
    pub ar_coefficient: f64,
    /// Weight of the year-level common factor inside every index channel,
    /// in `[0, 1]`.
    pub year_factor_weight: f64,
}

impl Default for CovariateSpec {
    fn default() -> Self {
        CovariateSpec {
            n_continuous: 3,
            categorical_levels: vec![3],
            n_swi: 4,
            ar_coefficient: 0.6,
            year_factor_weight: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n_cities: usize,
    pub n_slices: usize,
    pub topology: Topology,
    pub theta: ThetaFamily,
    pub declaration: DeclarationModel,
    pub noise: NoiseSpec,
    pub seed: u64,
    #[serde(default)]
    pub covariates: CovariateSpec,
    /// Width of the regression function's range: `theta` spans
    /// `[0.25, 0.25 + theta_span]` on declared observations. Small spans
    /// relative to the noise make the selection problem harder.
    #[serde(default = "default_theta_span")]
    pub theta_span: f64,
    /// Cost bound; defaults to 1.2 times the largest attainable `theta`.
    #[serde(default)]
    pub cost_bound: Option<f64>,
}

fn default_theta_span() -> f64 {
    1.0
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<(), GeneratorError> {
        if self.n_cities == 0 || self.n_slices == 0 {
            return Err(GeneratorError::BadSpec(
                "need at least one city and one slice".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.noise.fraction) {
            return Err(GeneratorError::BadSpec(format!(
                "noise fraction {} outside [0, 1)",
                self.noise.fraction
            )));
        }
        if !(0.0..1.0).contains(&self.noise.edge_correlation) {
            return Err(GeneratorError::BadSpec(format!(
                "edge correlation {} outside [0, 1)",
                self.noise.edge_correlation
            )));
        }
        if self.covariates.n_swi == 0 {
            return Err(GeneratorError::BadSpec(
                "need at least one drought-index channel".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.covariates.ar_coefficient) {
            return Err(GeneratorError::BadSpec(
                "ar coefficient outside [0, 1)".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.covariates.year_factor_weight) {
            return Err(GeneratorError::BadSpec(
                "year factor weight outside [0, 1]".into(),
            ));
        }
        for levels in &self.covariates.categorical_levels {
            if !(2..=5).contains(levels) {
                return Err(GeneratorError::BadSpec(format!(
                    "categorical level count {levels} outside 2..=5"
                )));
            }
        }
        if self.theta_span.is_nan() || self.theta_span <= 0.0 || !self.theta_span.is_finite() {
            return Err(GeneratorError::BadSpec(
                "theta_span must be positive and finite".into(),
            ));
        }
        if let Topology::Lattice { rows, cols } = self.topology {
            if rows * cols != self.n_cities {
                return Err(GeneratorError::BadSpec(format!(
                    "lattice {rows}x{cols} does not cover {} cities",
                    self.n_cities
                )));
            }
        }
        if let Topology::Ring {
            neighbors_each_side,
        } = self.topology
        {
            if neighbors_each_side == 0 || 2 * neighbors_each_side >= self.n_cities {
                return Err(GeneratorError::BadSpec(
                    "ring width must satisfy 0 < 2*width < n_cities".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> Result<CovariateSchema, GeneratorError> {
        let mut entries = Vec::new();
        for i in 0..self.covariates.n_continuous {
            entries.push(SchemaEntry::continuous(&format!("x{i}"), "city"));
        }
        for (c, levels) in self.covariates.categorical_levels.iter().enumerate() {
            entries.push(SchemaEntry::categorical(
                &format!("cat{c}"),
                *levels,
                "zone",
            ));
        }
        for j in 0..self.covariates.n_swi {
            entries.push(SchemaEntry::swi(&format!("z{j}"), "swi"));
        }
        Ok(CovariateSchema::new(entries)?)
    }
}

/// Canonical additive weights of the regression function; all transformed
/// features live in `[0, 1]`, so `theta` spans exactly
/// `[base, base + sum of weights]` on declared observations.
#[derive(Debug, Clone, Serialize)]
pub struct ThetaWeights {
    pub base: f64,
    pub x: Vec<f64>,
    pub categorical: Vec<f64>,
    pub z: Vec<f64>,
}

impl ThetaWeights {
    fn canonical(covariates: &CovariateSpec, span: f64) -> ThetaWeights {
        let raw_x: Vec<f64> = (0..covariates.n_continuous)
            .map(|i| 1.0 + 0.5 * i as f64)
            .collect();
        let raw_cat: Vec<f64> = covariates.categorical_levels.iter().map(|_| 0.8).collect();
        let raw_z: Vec<f64> = (0..covariates.n_swi)
            .map(|j| 1.5 + 0.25 * j as f64)
            .collect();
        let total: f64 =
            raw_x.iter().sum::<f64>() + raw_cat.iter().sum::<f64>() + raw_z.iter().sum::<f64>();
        let scale = span / total;
        ThetaWeights {
            base: 0.25,
            x: raw_x.iter().map(|w| w * scale).collect(),
            categorical: raw_cat.iter().map(|w| w * scale).collect(),
            z: raw_z.iter().map(|w| w * scale).collect(),
        }
    }

    fn span(&self) -> f64 {
        self.x.iter().sum::<f64>()
            + self.categorical.iter().sum::<f64>()
            + self.z.iter().sum::<f64>()
    }
}

/// The generating truth: regression function, noise law and graph.
#[derive(Debug, Clone, Serialize)]
pub struct GroundTruth {
    pub family: ThetaFamily,
    pub weights: ThetaWeights,
    pub graph: DependencyGraph,
    pub noise: NoiseSpec,
    pub cost_bound: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    /// Per-city noise variance factor from the edge mixing:
    /// `Var(unit noise) = kappa / 3`.
    pub kappa: Vec<f64>,
    categorical_levels: Vec<u8>,
}

impl GroundTruth {
    /// The regression value for a declared observation's features.
    pub fn regression(&self, x: &[f64], z: &[f64]) -> f64 {
        let n_cont = self.weights.x.len();
        let mut value = self.weights.base;
        for (i, w) in self.weights.x.iter().enumerate() {
            value += w * transform_x(self.family, x[i]);
        }
        for (c, w) in self.weights.categorical.iter().enumerate() {
            let levels = self.categorical_levels[c] as f64;
            value += w * x[n_cont + c] / (levels - 1.0);
        }
        for (j, w) in self.weights.z.iter().enumerate() {
            value += w * transform_z(self.family, z[j]);
        }
        value
    }

    /// Noise amplitude at a given regression value.
    pub fn amplitude(&self, theta: f64) -> f64 {
        match self.noise.model {
            NoiseModel::Constant => {
                self.noise.fraction * (self.theta_min).min(self.cost_bound - self.theta_max)
            }
            NoiseModel::Proportional => self.noise.fraction * theta.min(self.cost_bound - theta),
        }
    }
}

impl TruthModel for GroundTruth {
    fn theta_star(&self, _city_index: usize, obs: &Observation) -> f64 {
        if !obs.declared {
            return 0.0;
        }
        self.regression(&obs.x, &obs.z)
    }

    fn conditional_variance(&self, city_index: usize, obs: &Observation) -> f64 {
        if !obs.declared {
            return 0.0;
        }
        let amplitude = self.amplitude(self.regression(&obs.x, &obs.z));
        amplitude * amplitude * self.kappa[city_index] / 3.0
    }
}

fn transform_x(family: ThetaFamily, u: f64) -> f64 {
    match family {
        ThetaFamily::Linear => u,
        ThetaFamily::AdditiveNonlinear => (std::f64::consts::PI * u).sin(),
        ThetaFamily::Piecewise => {
            if u > 0.5 {
                1.0
            } else {
                0.0
            }
        }
    }
}

fn transform_z(family: ThetaFamily, u: f64) -> f64 {
    match family {
        ThetaFamily::Linear => u,
        ThetaFamily::AdditiveNonlinear => u * u,
        ThetaFamily::Piecewise => {
            if u > 2.0 / 3.0 {
                1.0
            } else if u > 1.0 / 3.0 {
                0.5
            } else {
                0.0
            }
        }
    }
}

fn build_graph(spec: &GeneratorSpec) -> Result<DependencyGraph, GeneratorError> {
    let cities: Vec<CityId> = (0..spec.n_cities as u32).map(CityId).collect();
    Ok(match spec.topology {
        Topology::Lattice { rows, cols } => lattice_graph(&cities, rows, cols)?,
        Topology::Ring {
            neighbors_each_side,
        } => ring_graph(&cities, neighbors_each_side)?,
        Topology::Star => star_graph(&cities)?,
        Topology::Edgeless => edgeless_graph(&cities)?,
    })
}

/// Generates the panel and its ground truth from the spec.
pub fn generate(spec: &GeneratorSpec) -> Result<(Panel, GroundTruth), GeneratorError> {
    spec.validate()?;
    let schema = spec.schema()?;
    let graph = build_graph(spec)?;
    let weights = ThetaWeights::canonical(&spec.covariates, spec.theta_span);
    let theta_min = weights.base;
    let theta_max = weights.base + weights.span();
    let cost_bound = match spec.cost_bound {
        Some(bound) => {
            if bound <= theta_max {
                return Err(GeneratorError::BadSpec(format!(
                    "cost bound {bound} must exceed the regression maximum {theta_max}"
                )));
            }
            bound
        }
        None => theta_max * 1.2,
    };
    let rho = spec.noise.edge_correlation;
    let neighbor_counts = graph.neighbor_counts();
    let kappa: Vec<f64> = neighbor_counts
        .iter()
        .map(|&d| {
            if d == 0 {
                1.0
            } else {
                (1.0 - rho) * (1.0 - rho) + rho * rho / d as f64
            }
        })
        .collect();
    let truth = GroundTruth {
        family: spec.theta,
        weights,
        graph: graph.clone(),
        noise: spec.noise,
        cost_bound,
        theta_min,
        theta_max,
        kappa,
        categorical_levels: spec.covariates.categorical_levels.clone(),
    };

    let incident = graph.incident_edges();
    let n = spec.n_cities;
    let cov = &spec.covariates;
    let mut prev_x: Vec<Vec<f64>> = vec![vec![0.0; cov.n_continuous]; n];
    let mut slices = Vec::with_capacity(spec.n_slices);
    for t in 1..=spec.n_slices {
        let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(spec.seed, t as u64));
        let year_factor: f64 = rng.random();

        let mut xs: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut declared_flags: Vec<bool> = Vec::with_capacity(n);
        for prev in prev_x.iter() {
            let mut x = Vec::with_capacity(cov.n_continuous + cov.categorical_levels.len());
            for prev_value in prev.iter().take(cov.n_continuous) {
                let innovation: f64 = rng.random();
                let value = if t == 1 {
                    innovation
                } else {
                    cov.ar_coefficient * prev_value + (1.0 - cov.ar_coefficient) * innovation
                };
                x.push(value);
            }
            for levels in &cov.categorical_levels {
                let draw: f64 = rng.random();
                x.push((draw * *levels as f64).floor().min(*levels as f64 - 1.0));
            }
            let mut z = Vec::with_capacity(cov.n_swi);
            for _ in 0..cov.n_swi {
                let idio: f64 = rng.random();
                z.push(
                    cov.year_factor_weight * year_factor + (1.0 - cov.year_factor_weight) * idio,
                );
            }
            let z_mean = z.iter().sum::<f64>() / z.len() as f64;
            let p = (spec.declaration.base + spec.declaration.slope * z_mean).clamp(0.0, 1.0);
            let declared = rng.random::<f64>() < p;
            xs.push(x);
            zs.push(z);
            declared_flags.push(declared);
        }

        let city_innovations: Vec<f64> = (0..n).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
        let edge_innovations: Vec<f64> = (0..graph.n_edges())
            .map(|_| 2.0 * rng.random::<f64>() - 1.0)
            .collect();

        let mut observations = Vec::with_capacity(n);
        for c in 0..n {
            let declared = declared_flags[c];
            let y = if declared {
                let theta = truth.regression(&xs[c], &zs[c]);
                let unit = if incident[c].is_empty() {
                    city_innovations[c]
                } else {
                    let edge_mean: f64 = incident[c]
                        .iter()
                        .map(|&e| edge_innovations[e])
                        .sum::<f64>()
                        / incident[c].len() as f64;
                    (1.0 - rho) * city_innovations[c] + rho * edge_mean
                };
                theta + truth.amplitude(theta) * unit
            } else {
                0.0
            };
            observations.push(Observation::new(
                CityId(c as u32),
                TimeIndex(t as i32),
                xs[c].clone(),
                zs[c].clone(),
                y,
                declared,
                &schema,
            )?);
        }
        for (slot, x) in prev_x.iter_mut().zip(&xs) {
            for (i, value) in x.iter().enumerate().take(cov.n_continuous) {
                slot[i] = *value;
            }
        }
        slices.push(PanelSlice {
            time: TimeIndex(t as i32),
            observations,
        });
    }
    let panel = Panel::from_slices(schema, slices, Some(cost_bound))?;
    Ok((panel, truth))
}

/// One learner's Monte-Carlo squared bias against the truth.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedLearner {
    pub index: usize,
    pub mean_squared_bias: f64,
}

/// Ranks learners by squared bias against the true regression function:
/// each learner is fitted on a freshly generated training panel and scored
/// on the declared observations of a held-out slice. Ordering is
/// ascending; ties keep the zoo order.
pub fn best_fixed_algorithm(
    spec: &GeneratorSpec,
    learners: &[BaseLearner],
    train_slices: usize,
) -> Result<Vec<RankedLearner>, GeneratorError> {
    if train_slices == 0 {
        return Err(GeneratorError::BadSpec("train_slices must be >= 1".into()));
    }
    let mut probe_spec = spec.clone();
    probe_spec.n_slices = train_slices + 1;
    probe_spec.seed = mix_seed(spec.seed, 0xbe57);
    let (panel, truth) = generate(&probe_spec)?;
    let history = panel.history_prefix(TimeIndex(train_slices as i32))?;
    let holdout = &panel.slices()[train_slices];

    let mut ranked: Vec<RankedLearner> = learners
        .iter()
        .enumerate()
        .map(|(index, learner)| {
            let predictor = learner.fit(&history)?;
            let mut sum = 0.0;
            let mut count = 0usize;
            for obs in holdout.observations.iter().filter(|o| o.declared) {
                let bias = predictor.predict(obs) - truth.regression(&obs.x, &obs.z);
                sum += bias * bias;
                count += 1;
            }
            if count == 0 {
                return Err(GeneratorError::BadSpec(
                    "holdout slice has no declared observations".into(),
                ));
            }
            Ok(RankedLearner {
                index,
                mean_squared_bias: sum / count as f64,
            })
        })
        .collect::<Result<_, GeneratorError>>()?;
    ranked.sort_by(|a, b| {
        a.mean_squared_bias
            .partial_cmp(&b.mean_squared_bias)
            .unwrap()
            .then(a.index.cmp(&b.index))
    });
    Ok(ranked)
}
