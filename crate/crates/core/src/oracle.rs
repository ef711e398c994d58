//! Exhaustive ground truth for small networks: every full activation pattern
//! is tested for feasibility and the nearest decision boundary is the
//! minimum over all feasible regions.

use alloc::vec::Vec;
use core::fmt;

use crate::geometry::Polyhedron;
use crate::linalg::Norm;
use crate::network::{affine_prefix, ActivationPattern, NetworkError, ReluNetwork};
use crate::search::{decision_bound, SearchError};
use crate::solver::{feasible, SolverError, Tolerances};

/// Largest total neuron count [`enumerate_regions`] accepts.
pub const DEFAULT_CAP: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub enum OracleError {
    CapExceeded { neurons: usize, cap: usize },
    Solver(SolverError),
    Search(SearchError),
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::CapExceeded { neurons, cap } => {
                write!(f, "network has {neurons} hidden neurons; exhaustive enumeration is capped at {cap}")
            }
            OracleError::Solver(e) => write!(f, "{e}"),
            OracleError::Search(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for OracleError {}

impl From<NetworkError> for OracleError {
    fn from(e: NetworkError) -> Self {
        OracleError::Search(SearchError::Network(e))
    }
}

/// Feasible full patterns in lexicographic order (-1 before +1).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegionCatalog {
    pub patterns: Vec<ActivationPattern>,
}

impl RegionCatalog {
    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// Nearest decision-boundary distance inside each region (`+inf` if none).
    pub fn distances(&self, net: &ReluNetwork, x: &[f64], y: usize, norm: Norm) -> Result<Vec<f64>, OracleError> {
        let tol = Tolerances::default();
        self.patterns
            .iter()
            .map(|p| {
                decision_bound(net, p, x, y, norm, f64::INFINITY, &tol).map(|d| d.distance).map_err(OracleError::Search)
            })
            .collect()
    }
}

pub fn enumerate_regions(net: &ReluNetwork) -> Result<RegionCatalog, OracleError> {
    enumerate_regions_with_cap(net, DEFAULT_CAP)
}

/// Same result as testing all `2^N` full patterns; a prefix whose
/// constraints are already infeasible is not extended.
pub fn enumerate_regions_with_cap(net: &ReluNetwork, cap: usize) -> Result<RegionCatalog, OracleError> {
    let neurons = net.total_neurons();
    if neurons > cap {
        return Err(OracleError::CapExceeded { neurons, cap });
    }
    let tol = Tolerances::default();
    let mut out = RegionCatalog::default();
    let mut layers: Vec<Vec<bool>> = Vec::new();
    let base = Polyhedron::new(net.input_dim());
    extend(net, &tol, &mut layers, Vec::new(), &base, &mut out)?;
    Ok(out)
}

fn extend(
    net: &ReluNetwork,
    tol: &Tolerances,
    done: &mut Vec<Vec<bool>>,
    current: Vec<bool>,
    poly: &Polyhedron,
    out: &mut RegionCatalog,
) -> Result<(), OracleError> {
    let depth = done.len();
    if depth == net.num_hidden() {
        out.patterns.push(ActivationPattern::from_layers(done.clone()));
        return Ok(());
    }
    if current.len() == net.hidden_width(depth) {
        done.push(current);
        extend(net, tol, done, Vec::new(), poly, out)?;
        done.pop();
        return Ok(());
    }
    let map = affine_prefix(net, &ActivationPattern::from_layers(done.clone()))?;
    let (row, c) = map.row(depth, current.len());
    for on in [false, true] {
        let s = if on { -1.0 } else { 1.0 };
        let mut p = poly.clone();
        p.push_inequality(row.iter().map(|v| s * v).collect(), -s * c, Some((depth, current.len())));
        if p.is_statically_infeasible() || !feasible(&p, tol).map_err(OracleError::Solver)? {
            continue;
        }
        let mut next = current.clone();
        next.push(on);
        extend(net, tol, done, next, &p, out)?;
    }
    Ok(())
}

/// Nearest decision boundary found by exhaustive search.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForce {
    pub distance: f64,
    pub point: Option<Vec<f64>>,
    pub regions: usize,
}

pub fn brute_force_distance(net: &ReluNetwork, x: &[f64], y: usize, norm: Norm) -> Result<BruteForce, OracleError> {
    let catalog = enumerate_regions(net)?;
    brute_force_over(net, &catalog, x, y, norm)
}

pub fn brute_force_over(
    net: &ReluNetwork,
    catalog: &RegionCatalog,
    x: &[f64],
    y: usize,
    norm: Norm,
) -> Result<BruteForce, OracleError> {
    let tol = Tolerances::default();
    let mut best = BruteForce { distance: f64::INFINITY, point: None, regions: catalog.len() };
    for p in &catalog.patterns {
        let db = decision_bound(net, p, x, y, norm, f64::INFINITY, &tol).map_err(OracleError::Search)?;
        if db.distance < best.distance {
            best.distance = db.distance;
            best.point = db.point;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::tests::example_net;
    use crate::network::Layer;

    #[test]
    fn example_has_seven_regions() {
        let net = example_net();
        let cat = enumerate_regions(&net).unwrap();
        assert_eq!(cat.len(), 7);
        assert!(!cat.patterns.contains(&ActivationPattern::from_signs(&[&[-1, -1], &[1]])));
    }

    #[test]
    fn example_distances() {
        let net = example_net();
        let x = [-1.0, -1.25];
        let r = brute_force_distance(&net, &x, 1, Norm::L2).unwrap();
        assert!((r.distance - 13.25 / libm::sqrt(2.0)).abs() < 1e-9);
        let r = brute_force_distance(&net, &x, 1, Norm::Linf).unwrap();
        assert!((r.distance - 6.625).abs() < 1e-9);
        let cat = enumerate_regions(&net).unwrap();
        let d = cat.distances(&net, &x, 1, Norm::L2).unwrap();
        // unbounded regions reach f_1 = 10 too, further away
        let mut finite: Vec<(alloc::string::String, f64)> =
            cat.patterns.iter().zip(&d).filter(|(_, d)| d.is_finite()).map(|(p, d)| (format!("{p}"), *d)).collect();
        finite.sort_by(|a, b| a.1.total_cmp(&b.1));
        assert_eq!(finite.len(), 3);
        assert_eq!(finite[0].0, "((+1,+1),(+1))");
        assert_eq!(finite[1].0, "((+1,-1),(+1))");
        assert!((finite[1].1 - 12.0).abs() < 1e-9);
        assert_eq!(finite[2].0, "((-1,+1),(+1))");
        assert!((finite[2].1 - 12.25).abs() < 1e-9);
    }

    #[test]
    fn single_neuron_two_regions() {
        let net = ReluNetwork::new(
            2,
            vec![
                Layer::from_rows(&[vec![1.0, -2.0]], vec![0.3]).unwrap(),
                Layer::from_rows(&[vec![1.0], vec![-1.0]], vec![0.0, 0.0]).unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(enumerate_regions(&net).unwrap().len(), 2);
    }

    #[test]
    fn cap_is_enforced() {
        let rows: Vec<Vec<f64>> = (0..21).map(|i| vec![1.0, i as f64]).collect();
        let net = ReluNetwork::new(
            2,
            vec![
                Layer::from_rows(&rows, vec![0.0; 21]).unwrap(),
                Layer::from_rows(&[vec![1.0; 21], vec![0.0; 21]], vec![0.0, 0.0]).unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(enumerate_regions(&net), Err(OracleError::CapExceeded { neurons: 21, cap: 20 }));
    }
}
