//! Polyhedral descriptions of activation regions and faces, plus the
//! ball-based constraint pruning used to shrink projection programs.

use alloc::vec::Vec;
use core::fmt;

use crate::linalg::{dot, norm2, Norm};
use crate::network::{affine_prefix, ActivationPattern, NetworkError, ReluNetwork};

/// Normals with Euclidean length at or below this are treated as zero.
pub const ZERO_NORMAL: f64 = 1e-12;

/// `{v : a.v <= b}` with `|a|_2 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub a: Vec<f64>,
    pub b: f64,
}

impl Halfspace {
    /// Normalizes `a.v <= b`. Returns `Ok(None)` for a trivially true
    /// constraint and `Err(())` for a trivially false one.
    #[allow(clippy::result_unit_err)]
    pub fn normalized(a: Vec<f64>, b: f64) -> Result<Option<Halfspace>, ()> {
        let n = norm2(&a);
        if n <= ZERO_NORMAL {
            return if b >= -ZERO_NORMAL { Ok(None) } else { Err(()) };
        }
        Ok(Some(Halfspace { a: a.iter().map(|v| v / n).collect(), b: b / n }))
    }

    /// `b - a.v`; negative when `v` violates the constraint.
    pub fn slack(&self, v: &[f64]) -> f64 {
        self.b - dot(&self.a, v)
    }
}

/// Neuron that produced a constraint: (hidden layer, index), both 0-based.
pub type NeuronId = (usize, usize);

/// Linear inequalities with at most one equality.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyhedron {
    dim: usize,
    inequalities: Vec<Halfspace>,
    tags: Vec<Option<NeuronId>>,
    equality: Option<Halfspace>,
    infeasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeometryError {
    ZeroNormal,
    Network(NetworkError),
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::ZeroNormal => write!(f, "hyperplane has a zero normal"),
            GeometryError::Network(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for GeometryError {}

impl From<NetworkError> for GeometryError {
    fn from(e: NetworkError) -> Self {
        GeometryError::Network(e)
    }
}

impl Polyhedron {
    pub fn new(dim: usize) -> Polyhedron {
        Polyhedron { dim, inequalities: Vec::new(), tags: Vec::new(), equality: None, infeasible: false }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn inequalities(&self) -> &[Halfspace] {
        &self.inequalities
    }

    pub fn tags(&self) -> &[Option<NeuronId>] {
        &self.tags
    }

    /// The equality as `a.v = b` with `|a|_2 = 1`.
    pub fn equality(&self) -> Option<&Halfspace> {
        self.equality.as_ref()
    }

    /// True when a constant constraint is violated, i.e. the set is empty
    /// without solving anything.
    pub fn is_statically_infeasible(&self) -> bool {
        self.infeasible
    }

    /// Inequality rows plus the equality row, if any.
    pub fn num_rows(&self) -> usize {
        self.inequalities.len() + usize::from(self.equality.is_some())
    }

    /// Adds `a.v <= b`; constant constraints are dropped or mark the set empty.
    pub fn push_inequality(&mut self, a: Vec<f64>, b: f64, tag: Option<NeuronId>) {
        debug_assert_eq!(a.len(), self.dim);
        match Halfspace::normalized(a, b) {
            Ok(Some(h)) => {
                self.inequalities.push(h);
                self.tags.push(tag);
            }
            Ok(None) => {}
            Err(()) => self.infeasible = true,
        }
    }

    pub fn push_halfspace(&mut self, h: Halfspace, tag: Option<NeuronId>) {
        self.push_inequality(h.a, h.b, tag);
    }

    /// Sets `a.v = b`. A zero normal with `b != 0` empties the set; with
    /// `b == 0` the equality is dropped.
    pub fn set_equality(&mut self, a: Vec<f64>, b: f64) {
        let n = norm2(&a);
        if n <= ZERO_NORMAL {
            if b.abs() > ZERO_NORMAL {
                self.infeasible = true;
            }
            self.equality = None;
            return;
        }
        self.equality = Some(Halfspace { a: a.iter().map(|v| v / n).collect(), b: b / n });
    }

    /// Largest constraint violation at `v` (0 when feasible).
    pub fn max_violation(&self, v: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for h in &self.inequalities {
            worst = worst.max(-h.slack(v));
        }
        if let Some(e) = &self.equality {
            worst = worst.max(e.slack(v).abs());
        }
        worst
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        !self.infeasible && self.max_violation(v) <= tol
    }

    /// Same set intersected with extra halfspaces.
    pub fn with_halfspaces(&self, extra: &[Halfspace]) -> Polyhedron {
        let mut p = self.clone();
        for h in extra {
            p.push_inequality(h.a.clone(), h.b, None);
        }
        p
    }
}

/// Closed l_p ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
    pub norm: Norm,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64, norm: Norm) -> Ball {
        debug_assert!(radius >= 0.0 && radius.is_finite());
        Ball { center, radius, norm }
    }
}

/// Inequalities `s_j z^{i+1}_j >= 0` for every neuron the pattern covers.
pub fn region_polyhedron(net: &ReluNetwork, pattern: &ActivationPattern) -> Result<Polyhedron, NetworkError> {
    let map = affine_prefix(net, pattern)?;
    let mut poly = Polyhedron::new(net.input_dim());
    for (i, signs) in pattern.layers().iter().enumerate() {
        for (j, on) in signs.iter().enumerate() {
            let (row, c) = map.row(i, j);
            // on: -(row.x + c) <= 0; off: row.x + c <= 0
            let s = if *on { -1.0 } else { 1.0 };
            poly.push_inequality(row.iter().map(|v| s * v).collect(), -s * c, Some((i, j)));
        }
    }
    Ok(poly)
}

/// The region of `pattern` with neuron `(layer, neuron)` pinned to zero.
pub fn face_polyhedron(
    net: &ReluNetwork,
    pattern: &ActivationPattern,
    layer: usize,
    neuron: usize,
) -> Result<Polyhedron, NetworkError> {
    if layer >= pattern.depth() || neuron >= pattern.layer(layer).len() {
        return Err(NetworkError::NeuronOutOfRange { layer, neuron });
    }
    let map = affine_prefix(net, pattern)?;
    let mut poly = Polyhedron::new(net.input_dim());
    for (i, signs) in pattern.layers().iter().enumerate() {
        for (j, on) in signs.iter().enumerate() {
            let (row, c) = map.row(i, j);
            if (i, j) == (layer, neuron) {
                poly.set_equality(row.to_vec(), -c);
                continue;
            }
            let s = if *on { -1.0 } else { 1.0 };
            poly.push_inequality(row.iter().map(|v| s * v).collect(), -s * c, Some((i, j)));
        }
    }
    Ok(poly)
}

/// `min_{a.v = b} |x - v|_p = |a.x - b| / |a|_q`.
pub fn hyperplane_distance(x: &[f64], a: &[f64], b: f64, norm: Norm) -> Result<f64, GeometryError> {
    let scale = norm.dual().of(a);
    if scale <= ZERO_NORMAL {
        return Err(GeometryError::ZeroNormal);
    }
    Ok((dot(a, x) - b).abs() / scale)
}

#[derive(Debug, Clone, PartialEq)]
pub enum PruneOutcome {
    Pruned(Polyhedron),
    /// Some constraint excludes the whole ball, so the set misses it.
    DisjointFromBall,
}

/// Drops inequalities whose halfspace contains the whole ball. If a
/// constraint's hyperplane misses the ball and the center violates it, the
/// set cannot meet the ball at all; likewise for an equality whose hyperplane
/// misses the ball.
pub fn prune_constraints(poly: &Polyhedron, ball: &Ball) -> PruneOutcome {
    if poly.infeasible {
        return PruneOutcome::Pruned(poly.clone());
    }
    let mut out = Polyhedron::new(poly.dim);
    if let Some(e) = &poly.equality {
        if let Ok(d) = hyperplane_distance(&ball.center, &e.a, e.b, ball.norm) {
            if d > ball.radius {
                return PruneOutcome::DisjointFromBall;
            }
        }
        out.equality = Some(e.clone());
    }
    for (h, tag) in poly.inequalities.iter().zip(&poly.tags) {
        let far = match hyperplane_distance(&ball.center, &h.a, h.b, ball.norm) {
            Ok(d) => d > ball.radius,
            Err(_) => true,
        };
        if far {
            if h.slack(&ball.center) >= 0.0 {
                continue;
            }
            return PruneOutcome::DisjointFromBall;
        }
        out.inequalities.push(h.clone());
        out.tags.push(*tag);
    }
    PruneOutcome::Pruned(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::tests::example_net;
    use alloc::vec;

    fn pat(s: &[&[i8]]) -> ActivationPattern {
        ActivationPattern::from_signs(s)
    }

    fn rows(p: &Polyhedron) -> Vec<(Vec<f64>, f64)> {
        p.inequalities().iter().map(|h| (h.a.clone(), h.b)).collect()
    }

    #[test]
    fn region_of_first_layer_pattern() {
        let net = example_net();
        let p = region_polyhedron(&net, &pat(&[&[-1, -1]])).unwrap();
        assert_eq!(rows(&p), vec![(vec![1.0, 0.0], 0.0), (vec![0.0, 1.0], 0.0)]);
        assert!(p.equality().is_none());
    }

    #[test]
    fn constant_preactivation_is_dropped() {
        let net = example_net();
        let p = region_polyhedron(&net, &pat(&[&[-1, -1], &[-1]])).unwrap();
        assert_eq!(p.inequalities().len(), 2);
        assert!(!p.is_statically_infeasible());
        let q = region_polyhedron(&net, &pat(&[&[-1, -1], &[1]])).unwrap();
        assert!(q.is_statically_infeasible());
    }

    #[test]
    fn region_all_on() {
        let net = example_net();
        let p = region_polyhedron(&net, &pat(&[&[1, 1], &[1]])).unwrap();
        let r = rows(&p);
        assert_eq!(r[0], (vec![-1.0, 0.0], 0.0));
        assert_eq!(r[1], (vec![0.0, -1.0], 0.0));
        let s = 1.0 / 2f64.sqrt();
        assert!((r[2].0[0] + s).abs() < 1e-15 && (r[2].0[1] + s).abs() < 1e-15);
        assert!((r[2].1 + s).abs() < 1e-15);
        assert_eq!(p.tags()[2], Some((1, 0)));
    }

    #[test]
    fn faces() {
        let net = example_net();
        let f = face_polyhedron(&net, &pat(&[&[-1, -1]]), 0, 0).unwrap();
        assert_eq!(rows(&f), vec![(vec![0.0, 1.0], 0.0)]);
        let e = f.equality().unwrap();
        assert_eq!((e.a.clone(), e.b), (vec![1.0, 0.0], 0.0));

        let g = face_polyhedron(&net, &pat(&[&[1, 1], &[1]]), 1, 0).unwrap();
        assert_eq!(rows(&g), vec![(vec![-1.0, 0.0], 0.0), (vec![0.0, -1.0], 0.0)]);
        let e = g.equality().unwrap();
        assert!((e.a[0] * 2f64.sqrt() - 1.0).abs() < 1e-12 && (e.b * 2f64.sqrt() - 1.0).abs() < 1e-12);

        let dead = face_polyhedron(&net, &pat(&[&[-1, -1], &[-1]]), 1, 0).unwrap();
        assert!(dead.is_statically_infeasible());
        assert!(face_polyhedron(&net, &pat(&[&[-1, -1]]), 1, 0).is_err());
    }

    #[test]
    fn hyperplane_distances() {
        let d = hyperplane_distance(&[-1.0, -1.25], &[1.0, 0.0], 0.0, Norm::L2).unwrap();
        assert_eq!(d, 1.0);
        let d = hyperplane_distance(&[0.0, 0.0], &[1.0, 1.0], 11.0, Norm::L2).unwrap();
        assert!((d - 11.0 / 2f64.sqrt()).abs() < 1e-12);
        let d = hyperplane_distance(&[0.0, 0.0], &[1.0, 1.0], 11.0, Norm::Linf).unwrap();
        assert_eq!(d, 5.5);
        let d = hyperplane_distance(&[0.0, 0.0], &[1.0, 2.0], 4.0, Norm::L1).unwrap();
        assert_eq!(d, 2.0);
        assert_eq!(hyperplane_distance(&[0.0], &[0.0], 1.0, Norm::L2), Err(GeometryError::ZeroNormal));
    }

    fn single(a: f64, b: f64) -> Polyhedron {
        let mut p = Polyhedron::new(2);
        p.push_inequality(vec![a, 0.0], b, None);
        p
    }

    #[test]
    fn pruning_cases() {
        let ball = Ball::new(vec![0.0, 0.0], 1.0, Norm::Linf);
        match prune_constraints(&single(1.0, 5.0), &ball) {
            PruneOutcome::Pruned(p) => assert_eq!(p.inequalities().len(), 0),
            other => panic!("{other:?}"),
        }
        match prune_constraints(&single(1.0, 0.5), &ball) {
            PruneOutcome::Pruned(p) => assert_eq!(p.inequalities().len(), 1),
            other => panic!("{other:?}"),
        }
        assert_eq!(prune_constraints(&single(1.0, -3.0), &ball), PruneOutcome::DisjointFromBall);
    }

    #[test]
    fn equality_outside_ball_is_disjoint() {
        let mut p = Polyhedron::new(2);
        p.set_equality(vec![1.0, 1.0], 11.0);
        let ball = Ball::new(vec![0.0, 0.0], 5.0, Norm::Linf);
        assert_eq!(prune_constraints(&p, &ball), PruneOutcome::DisjointFromBall);
        let ball = Ball::new(vec![0.0, 0.0], 5.5, Norm::Linf);
        assert!(matches!(prune_constraints(&p, &ball), PruneOutcome::Pruned(_)));
    }
}
