//! City dependency graph and neighbor-count statistics.
//!
//! The graph encodes the conditional-independence assumption: cities that
//! are not adjacent have conditionally independent observations given the
//! history and the drought-index sequence. Training never consults the
//! graph; it only matters for the synthetic generator and the theoretical
//! probes, through its degree `deg = 1 + max incident edges`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::panel::CityId;
use crate::stats::quantile_type1;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("empty graph")]
    Empty,
    #[error("self-loop on city {0:?}")]
    SelfLoop(CityId),
    #[error("edge references unknown city {0:?}")]
    UnknownCity(CityId),
}

/// Undirected simple graph on a city set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DependencyGraph {
    cities: Vec<CityId>,
    /// Edges as index pairs into `cities`, normalized `i < j`, deduplicated.
    edges: Vec<(usize, usize)>,
}

impl DependencyGraph {
    pub fn new(
        mut cities: Vec<CityId>,
        edge_pairs: &[(CityId, CityId)],
    ) -> Result<Self, GraphError> {
        cities.sort();
        cities.dedup();
        let index = |c: CityId| -> Result<usize, GraphError> {
            cities
                .binary_search(&c)
                .map_err(|_| GraphError::UnknownCity(c))
        };
        let mut edges = Vec::with_capacity(edge_pairs.len());
        for &(a, b) in edge_pairs {
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            let (i, j) = (index(a)?, index(b)?);
            edges.push((i.min(j), i.max(j)));
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(DependencyGraph { cities, edges })
    }

    pub fn cities(&self) -> &[CityId] {
        &self.cities
    }

    pub fn n_vertices(&self) -> usize {
        self.cities.len()
    }

    /// Edges as index pairs (sorted, `i < j`).
    pub fn edge_indices(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Per-vertex neighbor counts, in city order.
    pub fn neighbor_counts(&self) -> Vec<usize> {
        let mut counts = vec![0_usize; self.cities.len()];
        for &(i, j) in &self.edges {
            counts[i] += 1;
            counts[j] += 1;
        }
        counts
    }

    /// Incident edge list per vertex (edge indices).
    pub fn incident_edges(&self) -> Vec<Vec<usize>> {
        let mut incident = vec![Vec::new(); self.cities.len()];
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            incident[i].push(e);
            incident[j].push(e);
        }
        incident
    }

    /// `deg(graph) = 1 + max` per-vertex neighbor count.
    pub fn degree(&self) -> usize {
        1 + self.neighbor_counts().into_iter().max().unwrap_or(0)
    }
}

/// Order statistics of per-vertex neighbor counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeStats {
    pub min: usize,
    pub q1: f64,
    pub median: f64,
    pub mean: f64,
    pub q3: f64,
    pub q99: f64,
    pub max: usize,
    /// `max + 1`.
    pub degree: usize,
}

/// Summary of per-vertex neighbor counts: min, quartiles, mean,
/// 99%-quantile, max. Quantiles use the left-continuous empirical
/// definition.
pub fn degree_stats(graph: &DependencyGraph) -> Result<DegreeStats, GraphError> {
    if graph.n_vertices() == 0 {
        return Err(GraphError::Empty);
    }
    let counts = graph.neighbor_counts();
    let mut sorted: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    let max = *counts.iter().max().unwrap();
    Ok(DegreeStats {
        min: *counts.iter().min().unwrap(),
        q1: quantile_type1(&sorted, 0.25),
        median: quantile_type1(&sorted, 0.5),
        mean,
        q3: quantile_type1(&sorted, 0.75),
        q99: quantile_type1(&sorted, 0.99),
        max,
        degree: max + 1,
    })
}

/// 2D lattice with 4-neighbor connectivity over `rows * cols` cities.
pub fn lattice_graph(
    cities: &[CityId],
    rows: usize,
    cols: usize,
) -> Result<DependencyGraph, GraphError> {
    assert_eq!(
        cities.len(),
        rows * cols,
        "lattice dims must match city count"
    );
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let here = cities[r * cols + c];
            if c + 1 < cols {
                edges.push((here, cities[r * cols + c + 1]));
            }
            if r + 1 < rows {
                edges.push((here, cities[(r + 1) * cols + c]));
            }
        }
    }
    DependencyGraph::new(cities.to_vec(), &edges)
}

/// Ring where each city is linked to `half_width` neighbors on each side.
pub fn ring_graph(cities: &[CityId], half_width: usize) -> Result<DependencyGraph, GraphError> {
    let n = cities.len();
    let mut edges = Vec::new();
    if n > 1 {
        for i in 0..n {
            for d in 1..=half_width.min(n.saturating_sub(1) / 2) {
                edges.push((cities[i], cities[(i + d) % n]));
            }
        }
    }
    DependencyGraph::new(cities.to_vec(), &edges)
}

/// Star with the first city as hub.
pub fn star_graph(cities: &[CityId]) -> Result<DependencyGraph, GraphError> {
    let edges: Vec<(CityId, CityId)> = cities[1..].iter().map(|&c| (cities[0], c)).collect();
    DependencyGraph::new(cities.to_vec(), &edges)
}

pub fn edgeless_graph(cities: &[CityId]) -> Result<DependencyGraph, GraphError> {
    DependencyGraph::new(cities.to_vec(), &[])
}
