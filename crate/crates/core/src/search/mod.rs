//! Best-first verification engines over activation patterns.

mod geocert;
mod layercert;
mod queue;

use alloc::vec::Vec;
use core::fmt;

use crate::geometry::{prune_constraints, region_polyhedron, Ball, PruneOutcome};
use crate::linalg::Norm;
use crate::network::{
    activation_pattern, affine_prefix, decision_from_map, ActivationPattern, NetworkError, ReluNetwork,
};
use crate::solver::{project, ProjectionStatus, Tolerances};

pub use geocert::geocert;
pub use layercert::layercert;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    GeoCert,
    LayerCertBasic,
    LayerCertIa,
    LayerCertCrown,
    LayerCertBoth,
}

impl Method {
    pub const ALL: [Method; 5] =
        [Method::GeoCert, Method::LayerCertBasic, Method::LayerCertIa, Method::LayerCertCrown, Method::LayerCertBoth];

    pub fn name(self) -> &'static str {
        match self {
            Method::GeoCert => "geocert",
            Method::LayerCertBasic => "layercert-basic",
            Method::LayerCertIa => "layercert-ia",
            Method::LayerCertCrown => "layercert-crown",
            Method::LayerCertBoth => "layercert-both",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == s)
    }

    pub fn uses_intervals(self) -> bool {
        matches!(self, Method::LayerCertIa | Method::LayerCertBoth)
    }

    pub fn uses_restriction(self) -> bool {
        matches!(self, Method::LayerCertCrown | Method::LayerCertBoth)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RestrictionMode {
    None,
    /// One restriction set computed on the initial ball.
    Initial,
    /// Additionally recomputed under every partial pattern that is expanded.
    EveryNode,
}

impl RestrictionMode {
    pub fn name(self) -> &'static str {
        match self {
            RestrictionMode::None => "none",
            RestrictionMode::Initial => "initial",
            RestrictionMode::EveryNode => "every-node",
        }
    }

    pub fn parse(s: &str) -> Option<RestrictionMode> {
        match s {
            "none" => Some(RestrictionMode::None),
            "initial" => Some(RestrictionMode::Initial),
            "every-node" | "every_node" => Some(RestrictionMode::EveryNode),
            _ => None,
        }
    }
}

/// When a pattern enters the seen set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeenPolicy {
    OnPush,
    OnPop,
}

impl SeenPolicy {
    pub fn parse(s: &str) -> Option<SeenPolicy> {
        match s {
            "push" | "on-push" => Some(SeenPolicy::OnPush),
            "pop" | "on-pop" => Some(SeenPolicy::OnPop),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub method: Method,
    pub norm: Norm,
    /// Seconds, measured by the [`Clock`] passed to the search.
    pub time_limit: f64,
    pub restriction: RestrictionMode,
    /// Ignored by GeoCert, which always marks on pop.
    pub seen_policy: SeenPolicy,
    /// Drop constraints that cannot matter inside the current ball.
    pub domain_pruning: bool,
    pub tol: Tolerances,
}

impl SearchConfig {
    /// Defaults: no time limit, push policy, and an initial restriction for
    /// the methods that use one.
    pub fn new(method: Method, norm: Norm) -> SearchConfig {
        SearchConfig {
            method,
            norm,
            time_limit: f64::INFINITY,
            restriction: if method.uses_restriction() { RestrictionMode::Initial } else { RestrictionMode::None },
            seen_policy: SeenPolicy::OnPush,
            domain_pruning: true,
            tol: Tolerances::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        let wants = self.method.uses_restriction();
        let has = self.restriction != RestrictionMode::None;
        if wants && !has {
            return Err(SearchError::InvalidConfig("this method needs a restriction mode other than none"));
        }
        if !wants && has {
            return Err(SearchError::InvalidConfig("restriction is only available to the crown and both methods"));
        }
        if self.time_limit.is_nan() || self.time_limit < 0.0 {
            return Err(SearchError::InvalidConfig("time limit must be nonnegative"));
        }
        Ok(())
    }
}

/// Source of elapsed time; the core crate has no clock of its own.
pub trait Clock {
    fn elapsed_secs(&self) -> f64;
}

/// A clock that never advances.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn elapsed_secs(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counters {
    pub priority_programs: usize,
    pub decision_programs: usize,
    pub feasibility_programs: usize,
    pub patterns_popped: usize,
    pub patterns_pruned: usize,
}

impl Counters {
    pub fn programs(&self) -> usize {
        self.priority_programs + self.decision_programs + self.feasibility_programs
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VerificationStatus {
    ExactDistance(f64),
    CertifiedAtRadius(f64),
    TimedOutLowerBound(f64),
}

impl VerificationStatus {
    pub fn name(&self) -> &'static str {
        match self {
            VerificationStatus::ExactDistance(_) => "exact",
            VerificationStatus::CertifiedAtRadius(_) => "certified",
            VerificationStatus::TimedOutLowerBound(_) => "timeout",
        }
    }

    pub fn value(&self) -> f64 {
        match self {
            VerificationStatus::ExactDistance(v)
            | VerificationStatus::CertifiedAtRadius(v)
            | VerificationStatus::TimedOutLowerBound(v) => *v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationResult {
    pub status: VerificationStatus,
    /// Point with a different class at the exact distance.
    pub adversarial: Option<Vec<f64>>,
    pub counters: Counters,
    pub wall_time: f64,
    /// Priorities in pop order.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SearchError {
    Numerical {
        iterations: usize,
    },
    Network(NetworkError),
    InvalidConfig(&'static str),
    InvalidRadius,
    /// The search was started with a label other than the predicted class.
    WrongClass {
        expected: usize,
        found: usize,
    },
}

impl fmt::Display for SearchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SearchError::Numerical { iterations } => {
                write!(f, "numerical failure in projection solver after {iterations} iterations")
            }
            SearchError::Network(e) => write!(f, "{e}"),
            SearchError::InvalidConfig(m) => write!(f, "invalid configuration: {m}"),
            SearchError::InvalidRadius => write!(f, "radius must be positive and finite"),
            SearchError::WrongClass { expected, found } => {
                write!(f, "input is classified as {found}, not {expected}")
            }
        }
    }
}

impl core::error::Error for SearchError {}

impl From<NetworkError> for SearchError {
    fn from(e: NetworkError) -> Self {
        SearchError::Network(e)
    }
}

/// Pattern of the next layer at `v`, appended to `pattern`.
pub fn next_layer(
    net: &ReluNetwork,
    pattern: &ActivationPattern,
    v: &[f64],
) -> Result<ActivationPattern, NetworkError> {
    let depth = pattern.depth();
    if depth >= net.num_hidden() {
        return Err(NetworkError::DepthOutOfRange(depth + 1));
    }
    let at_v = activation_pattern(net, v, depth + 1)?;
    let mut child = pattern.clone();
    child.push_layer(at_v.layer(depth).to_vec());
    Ok(child)
}

/// Closest decision-boundary point inside a full region.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionBound {
    /// `+inf` when no boundary meets the region (within the pruning radius).
    pub distance: f64,
    pub point: Option<Vec<f64>>,
    /// Projection programs solved.
    pub programs: usize,
}

/// `min_{j != y}` of the projection of `x` onto `R_A ∩ {f_y = f_j}`.
/// Constraints are pruned against the ball of `radius` around `x`, so a
/// returned distance is exact only when it is below `radius`; pass
/// `f64::INFINITY` to disable pruning.
pub fn decision_bound(
    net: &ReluNetwork,
    pattern: &ActivationPattern,
    x: &[f64],
    y: usize,
    norm: Norm,
    radius: f64,
    tol: &Tolerances,
) -> Result<DecisionBound, SearchError> {
    let classes: Vec<usize> = (0..net.num_classes()).filter(|j| *j != y).collect();
    decision_bound_for(net, pattern, x, y, &classes, norm, radius, tol)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn decision_bound_for(
    net: &ReluNetwork,
    pattern: &ActivationPattern,
    x: &[f64],
    y: usize,
    classes: &[usize],
    norm: Norm,
    radius: f64,
    tol: &Tolerances,
) -> Result<DecisionBound, SearchError> {
    if !pattern.is_full(net) {
        return Err(NetworkError::PatternNotFull.into());
    }
    let map = affine_prefix(net, pattern)?;
    let region = region_polyhedron(net, pattern)?;
    let ball = Ball::new(x.to_vec(), if radius.is_finite() { radius } else { 0.0 }, norm);
    let mut best = DecisionBound { distance: f64::INFINITY, point: None, programs: 0 };
    for &j in classes {
        let diff = decision_from_map(net, &map, y, j)?;
        let mut poly = region.clone();
        poly.set_equality(diff.a, -diff.b);
        if poly.is_statically_infeasible() {
            continue;
        }
        if radius.is_finite() {
            match prune_constraints(&poly, &ball) {
                PruneOutcome::DisjointFromBall => continue,
                PruneOutcome::Pruned(p) => poly = p,
            }
        }
        let r = project(x, &poly, norm, tol);
        best.programs += 1;
        match r.status {
            ProjectionStatus::Optimal => {
                if r.distance < best.distance {
                    best.distance = r.distance;
                    best.point = Some(r.point);
                }
            }
            ProjectionStatus::Infeasible => {}
            ProjectionStatus::NumericalFailure => {
                return Err(SearchError::Numerical { iterations: r.iterations });
            }
        }
    }
    Ok(best)
}

/// Nudges a boundary point `v` across the boundary so that it is classified
/// differently from `y`, moving it by at most `tol.feas` in the given norm.
/// Tries the decision gradient of `v`'s region, then the ray from `x` through
/// `v`, then projections of `x` onto the regions meeting at `v` with the
/// competitor strictly ahead. Returns `v` unchanged if it already flips, or if
/// no nudge works.
pub fn adversarial_witness(
    net: &ReluNetwork,
    x: &[f64],
    y: usize,
    v: &[f64],
    norm: Norm,
    tol: &Tolerances,
) -> Vec<f64> {
    match net.classify(v) {
        Ok(c) if c == y => {}
        _ => return v.to_vec(),
    }
    let budget = tol.feas;
    gradient_nudge(net, y, v, norm, budget)
        .or_else(|| ray_nudge(net, x, y, v, norm, budget))
        .or_else(|| region_nudge(net, x, y, v, norm, tol))
        .unwrap_or_else(|| v.to_vec())
}

/// Most near-zero neurons at `v` whose both states are tried.
const AMBIGUOUS_MAX: usize = 8;

fn region_nudge(net: &ReluNetwork, x: &[f64], y: usize, v: &[f64], norm: Norm, tol: &Tolerances) -> Option<Vec<f64>> {
    let budget = tol.feas;
    let fwd = net.forward(v).ok()?;
    let base: Vec<Vec<bool>> = fwd.preactivations.iter().map(|z| z.iter().map(|t| *t >= 0.0).collect()).collect();
    let ambiguous: Vec<(usize, usize)> = fwd
        .preactivations
        .iter()
        .enumerate()
        .flat_map(|(l, z)| z.iter().enumerate().filter(|(_, t)| t.abs() <= budget).map(move |(i, _)| (l, i)))
        .collect();
    if ambiguous.len() > AMBIGUOUS_MAX {
        return None;
    }
    let limit = norm.dist(x, v) + budget;
    // the point must land strictly inside its region, so solve tighter than
    // the budget
    let tight = Tolerances { feas: budget * 1e-4, opt: tol.opt.min(budget * 1e-4), ..*tol };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << ambiguous.len()) {
        let mut layers = base.clone();
        for (bit, (l, i)) in ambiguous.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                layers[*l][*i] = !layers[*l][*i];
            }
        }
        let pattern = ActivationPattern::from_layers(layers);
        let Ok(map) = affine_prefix(net, &pattern) else { continue };
        let Ok(region) = region_polyhedron(net, &pattern) else { continue };
        for j in (0..net.num_classes()).filter(|j| *j != y) {
            let Ok(diff) = decision_from_map(net, &map, y, j) else { continue };
            // f_y - f_j <= -margin; the cone of flipping points at v can be
            // thin, so the margin is a small fraction of the budget
            let margin = 1e-2 * budget * norm.dual().of(&diff.a);
            let mut poly = region.clone();
            poly.push_inequality(diff.a, -diff.b - margin, None);
            let r = project(x, &poly, norm, &tight);
            if r.status != ProjectionStatus::Optimal || r.distance > limit {
                continue;
            }
            if net.classify(&r.point).is_ok_and(|c| c != y) && best.as_ref().map_or(true, |b| r.distance < b.0) {
                best = Some((r.distance, r.point));
            }
        }
    }
    best.map(|b| b.1)
}

fn nudge_steps(budget: f64) -> impl Iterator<Item = f64> {
    core::iter::successors(Some(budget * 1e-4), |s| Some(s * 4.0)).take_while(move |s| *s <= budget)
}

fn gradient_nudge(net: &ReluNetwork, y: usize, v: &[f64], norm: Norm, budget: f64) -> Option<Vec<f64>> {
    let logits = net.logits(v).ok()?;
    let pattern = activation_pattern(net, v, net.num_hidden()).ok()?;
    let map = affine_prefix(net, &pattern).ok()?;
    // strongest competitor at v
    let mut k = if y == 0 { 1 } else { 0 };
    for (j, l) in logits.iter().enumerate() {
        if j != y && *l > logits[k] {
            k = j;
        }
    }
    let diff = decision_from_map(net, &map, y, k).ok()?;
    if norm.dual().of(&diff.a) <= 0.0 {
        return None;
    }
    nudge_steps(budget).find_map(|step| {
        let mut w = v.to_vec();
        match norm {
            Norm::L2 => {
                let n = crate::linalg::norm2(&diff.a);
                for (wi, ai) in w.iter_mut().zip(&diff.a) {
                    *wi -= step * ai / n;
                }
            }
            Norm::Linf => {
                for (wi, ai) in w.iter_mut().zip(&diff.a) {
                    if *ai > 0.0 {
                        *wi -= step;
                    } else if *ai < 0.0 {
                        *wi += step;
                    }
                }
            }
            Norm::L1 => {
                let mut m = 0;
                for (i, ai) in diff.a.iter().enumerate() {
                    if ai.abs() > diff.a[m].abs() {
                        m = i;
                    }
                }
                w[m] -= step * diff.a[m].signum();
            }
        }
        net.classify(&w).is_ok_and(|c| c != y).then_some(w)
    })
}

fn ray_nudge(net: &ReluNetwork, x: &[f64], y: usize, v: &[f64], norm: Norm, budget: f64) -> Option<Vec<f64>> {
    let d = norm.dist(x, v);
    if d <= 0.0 {
        return None;
    }
    nudge_steps(budget).find_map(|step| {
        let w: Vec<f64> = x.iter().zip(v).map(|(xi, vi)| vi + step * (vi - xi) / d).collect();
        net.classify(&w).is_ok_and(|c| c != y).then_some(w)
    })
}

/// Classifies `x` and runs the configured method.
pub fn verify(
    net: &ReluNetwork,
    x: &[f64],
    radius: f64,
    cfg: &SearchConfig,
    clock: &dyn Clock,
) -> Result<VerificationResult, SearchError> {
    let y = net.classify(x)?;
    match cfg.method {
        Method::GeoCert => geocert(net, x, y, radius, cfg, clock),
        _ => layercert(net, x, y, radius, cfg, clock),
    }
}

pub(crate) fn check_inputs(
    net: &ReluNetwork,
    x: &[f64],
    y: usize,
    radius: f64,
    cfg: &SearchConfig,
) -> Result<(), SearchError> {
    cfg.validate()?;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(SearchError::InvalidRadius);
    }
    let found = net.classify(x)?;
    if found != y {
        return Err(SearchError::WrongClass { expected: y, found });
    }
    Ok(())
}

/// Shared bookkeeping for both engines.
pub(crate) struct Progress<'a> {
    pub x: &'a [f64],
    pub y: usize,
    pub radius: f64,
    pub upper: f64,
    pub best: Option<Vec<f64>>,
    pub counters: Counters,
    pub trace: Vec<f64>,
    pub max_popped: f64,
}

impl<'a> Progress<'a> {
    pub fn new(x: &'a [f64], y: usize, radius: f64) -> Progress<'a> {
        Progress {
            x,
            y,
            radius,
            upper: radius,
            best: None,
            counters: Counters::default(),
            trace: Vec::new(),
            max_popped: 0.0,
        }
    }

    pub fn record_pop(&mut self, d: f64) {
        self.counters.patterns_popped += 1;
        self.trace.push(d);
        if d > self.max_popped {
            self.max_popped = d;
        }
    }

    pub fn offer(&mut self, db: DecisionBound) {
        self.counters.decision_programs += db.programs;
        if db.distance < self.upper {
            self.upper = db.distance;
            self.best = db.point;
        }
    }

    pub fn ball(&self, norm: Norm) -> Ball {
        Ball::new(self.x.to_vec(), self.upper, norm)
    }

    /// Radius for constraint pruning; infinite when pruning is off.
    pub fn pruning_radius(&self, cfg: &SearchConfig) -> f64 {
        if cfg.domain_pruning {
            self.upper
        } else {
            f64::INFINITY
        }
    }

    pub fn finish(self, net: &ReluNetwork, cfg: &SearchConfig, clock: &dyn Clock) -> VerificationResult {
        let (status, adversarial) = match self.best {
            Some(v) => {
                let w = adversarial_witness(net, self.x, self.y, &v, cfg.norm, &cfg.tol);
                (VerificationStatus::ExactDistance(self.upper), Some(w))
            }
            None => (VerificationStatus::CertifiedAtRadius(self.radius), None),
        };
        VerificationResult {
            status,
            adversarial,
            counters: self.counters,
            wall_time: clock.elapsed_secs(),
            trace: self.trace,
        }
    }

    pub fn timed_out(self, clock: &dyn Clock) -> VerificationResult {
        VerificationResult {
            status: VerificationStatus::TimedOutLowerBound(self.max_popped),
            adversarial: None,
            counters: self.counters,
            wall_time: clock.elapsed_secs(),
            trace: self.trace,
        }
    }
}
