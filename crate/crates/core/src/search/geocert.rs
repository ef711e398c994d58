//! Best-first search over full activation patterns. Neighbours differ in one
//! neuron and are reached through their shared face.

use super::queue::{Queue, Seen};
use super::{check_inputs, decision_bound, Clock, Progress, SearchConfig, SearchError, VerificationResult};
use crate::geometry::{face_polyhedron, prune_constraints, PruneOutcome};
use crate::network::{activation_pattern, ReluNetwork};
use crate::solver::{project, ProjectionStatus};

pub fn geocert(
    net: &ReluNetwork,
    x: &[f64],
    y: usize,
    radius: f64,
    cfg: &SearchConfig,
    clock: &dyn Clock,
) -> Result<VerificationResult, SearchError> {
    check_inputs(net, x, y, radius, cfg)?;
    let mut st = Progress::new(x, y, radius);
    let mut queue = Queue::default();
    let mut seen = Seen::default();
    queue.push(0.0, activation_pattern(net, x, net.num_hidden())?, x.to_vec(), 0);

    while let Some(entry) = queue.pop() {
        if clock.elapsed_secs() > cfg.time_limit {
            return Ok(st.timed_out(clock));
        }
        st.record_pop(entry.d);
        if !seen.insert(0, &entry.pattern) {
            continue;
        }
        if st.upper <= entry.d {
            break;
        }
        let a = entry.pattern;
        st.offer(decision_bound(net, &a, x, y, cfg.norm, st.pruning_radius(cfg), &cfg.tol)?);
        let ball = st.ball(cfg.norm);
        for layer in 0..a.depth() {
            for neuron in 0..a.layer(layer).len() {
                let b = a.flipped(layer, neuron);
                if seen.contains(0, &b) {
                    continue;
                }
                let face = face_polyhedron(net, &a, layer, neuron)?;
                if face.is_statically_infeasible() {
                    continue;
                }
                let face = if cfg.domain_pruning {
                    match prune_constraints(&face, &ball) {
                        PruneOutcome::DisjointFromBall => continue,
                        PruneOutcome::Pruned(p) => p,
                    }
                } else {
                    face
                };
                let r = project(x, &face, cfg.norm, &cfg.tol);
                st.counters.priority_programs += 1;
                match r.status {
                    ProjectionStatus::Optimal => queue.push(r.distance, b, r.point, 0),
                    ProjectionStatus::Infeasible => {}
                    ProjectionStatus::NumericalFailure => {
                        return Err(SearchError::Numerical { iterations: r.iterations })
                    }
                }
            }
        }
    }
    Ok(st.finish(net, cfg, clock))
}
