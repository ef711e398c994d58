//! Hierarchical best-first search over partial activation patterns.
//!
//! A popped pattern of depth `l` pushes its closest child (the next-layer
//! pattern at its witness, same priority) and its unseen siblings, i.e. the
//! depth-`l` patterns that differ in one neuron of layer `l`.
//!
//! With a restriction, every face is intersected with halfspaces that contain
//! all decision boundaries inside the ball. The halfspaces attached to an
//! entry (its scope) depend on its ancestors when they are recomputed per
//! node; their intersection is convex, so best-first order stays exact.

use alloc::vec::Vec;

use super::queue::{Queue, Seen};
use super::{
    check_inputs, decision_bound, next_layer, Clock, Progress, RestrictionMode, SearchConfig, SearchError, SeenPolicy,
    VerificationResult,
};
use crate::bounds::{contains_db, restriction, restriction_set, DbCheck, Restriction};
use crate::geometry::{face_polyhedron, prune_constraints, region_polyhedron, Halfspace, Polyhedron, PruneOutcome};
use crate::network::{activation_pattern, ActivationPattern, LinearFunc, ReluNetwork};
use crate::solver::{project, ProjectionStatus};

struct Scope {
    halfspaces: Vec<Halfspace>,
}

enum Step {
    Push(f64, Vec<f64>),
    Prune,
}

fn halfspace_of(g: &LinearFunc) -> Option<Halfspace> {
    Halfspace::normalized(g.a.clone(), -g.b).ok().flatten()
}

struct Search<'n, 'c> {
    net: &'n ReluNetwork,
    cfg: &'c SearchConfig,
    queue: Queue,
    seen: Seen,
    scopes: Vec<Scope>,
}

impl Search<'_, '_> {
    fn push(&mut self, d: f64, pattern: ActivationPattern, point: Vec<f64>, scope: usize) {
        if self.cfg.seen_policy == SeenPolicy::OnPush && !self.seen.insert(0, &pattern) {
            return;
        }
        self.queue.push(d, pattern, point, scope);
    }

    fn constrained(&self, mut poly: Polyhedron, scope: usize, st: &Progress) -> Option<Polyhedron> {
        for h in &self.scopes[scope].halfspaces {
            poly.push_halfspace(h.clone(), None);
        }
        if poly.is_statically_infeasible() {
            return None;
        }
        if !self.cfg.domain_pruning {
            return Some(poly);
        }
        match prune_constraints(&poly, &st.ball(self.cfg.norm)) {
            PruneOutcome::DisjointFromBall => None,
            PruneOutcome::Pruned(p) => Some(p),
        }
    }

    /// Projection counted as a priority program; `None` if infeasible.
    fn priority(&self, poly: &Polyhedron, st: &mut Progress) -> Result<Option<(f64, Vec<f64>)>, SearchError> {
        let r = project(st.x, poly, self.cfg.norm, &self.cfg.tol);
        st.counters.priority_programs += 1;
        match r.status {
            ProjectionStatus::Optimal => Ok(Some((r.distance, r.point))),
            ProjectionStatus::Infeasible => Ok(None),
            ProjectionStatus::NumericalFailure => Err(SearchError::Numerical { iterations: r.iterations }),
        }
    }

    /// Recomputes the restriction under `pattern` and tightens the scope.
    /// Returns the scope for the child and the child's priority and witness.
    fn refine(
        &mut self,
        pattern: &ActivationPattern,
        scope: usize,
        d: f64,
        point: &[f64],
        st: &mut Progress,
        classes: &[usize],
    ) -> Result<(usize, Step), SearchError> {
        let ball = st.ball(self.cfg.norm);
        let Some(set) = restriction_set(self.net, &ball, pattern, st.y, classes) else {
            return Ok((scope, Step::Prune));
        };
        let Some(g) = set.combined(&ball) else {
            return Ok((scope, Step::Prune));
        };
        let Some(h) = halfspace_of(&g) else {
            return Ok((scope, Step::Push(d, point.to_vec())));
        };
        let mut halfspaces = self.scopes[scope].halfspaces.clone();
        halfspaces.push(h);
        self.scopes.push(Scope { halfspaces });
        let child_scope = self.scopes.len() - 1;
        if g.eval(point) <= 0.0 {
            return Ok((child_scope, Step::Push(d, point.to_vec())));
        }
        let region = region_polyhedron(self.net, pattern)?;
        let Some(poly) = self.constrained(region, child_scope, st) else {
            return Ok((child_scope, Step::Prune));
        };
        Ok(match self.priority(&poly, st)? {
            Some((d2, v)) => (child_scope, Step::Push(d2.max(d), v)),
            None => (child_scope, Step::Prune),
        })
    }
}

pub fn layercert(
    net: &ReluNetwork,
    x: &[f64],
    y: usize,
    radius: f64,
    cfg: &SearchConfig,
    clock: &dyn Clock,
) -> Result<VerificationResult, SearchError> {
    check_inputs(net, x, y, radius, cfg)?;
    let mut st = Progress::new(x, y, radius);
    let mut s = Search { net, cfg, queue: Queue::default(), seen: Seen::default(), scopes: Vec::new() };
    let others: Vec<usize> = (0..net.num_classes()).filter(|j| *j != y).collect();

    if cfg.restriction == RestrictionMode::None {
        s.scopes.push(Scope { halfspaces: Vec::new() });
        s.push(0.0, activation_pattern(net, x, 1)?, x.to_vec(), 0);
    } else {
        match restriction(net, x, radius, y, cfg.norm) {
            Restriction::Certified => return Ok(st.finish(net, cfg, clock)),
            Restriction::Restricted { distance, pattern, point, bound, .. } => {
                s.scopes.push(Scope { halfspaces: halfspace_of(&bound).into_iter().collect() });
                s.push(distance, pattern, point, 0);
            }
        }
    }

    while let Some(entry) = s.queue.pop() {
        if clock.elapsed_secs() > cfg.time_limit {
            return Ok(st.timed_out(clock));
        }
        st.record_pop(entry.d);
        if cfg.seen_policy == SeenPolicy::OnPop && !s.seen.insert(0, &entry.pattern) {
            continue;
        }
        if st.upper <= entry.d {
            break;
        }
        let a = &entry.pattern;

        if a.is_full(net) {
            st.offer(decision_bound(net, a, x, y, cfg.norm, st.pruning_radius(cfg), &cfg.tol)?);
        } else {
            let gated = cfg.method.uses_intervals() && contains_db(net, a, &st.ball(cfg.norm), y) == DbCheck::No;
            let (scope, step) = if gated {
                (entry.scope, Step::Prune)
            } else if cfg.restriction == RestrictionMode::EveryNode {
                s.refine(a, entry.scope, entry.d, &entry.point, &mut st, &others)?
            } else {
                (entry.scope, Step::Push(entry.d, entry.point.clone()))
            };
            match step {
                Step::Push(d, v) => {
                    let child = next_layer(net, a, &v)?;
                    s.push(d, child, v, scope);
                }
                Step::Prune => st.counters.patterns_pruned += 1,
            }
        }

        let layer = a.depth() - 1;
        for neuron in 0..a.layer(layer).len() {
            let b = a.flipped(layer, neuron);
            if s.seen.contains(0, &b) {
                continue;
            }
            let face = face_polyhedron(net, a, layer, neuron)?;
            let Some(face) = s.constrained(face, entry.scope, &st) else {
                continue;
            };
            if let Some((d, v)) = s.priority(&face, &mut st)? {
                s.push(d, b, v, entry.scope);
            }
        }
    }
    Ok(st.finish(net, cfg, clock))
}
