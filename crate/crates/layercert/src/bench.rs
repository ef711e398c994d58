//! Running verification queries and turning results into records.

use std::time::Instant;

use layercert_core::{verify, Clock, ReluNetwork, SearchConfig, SearchError, VerificationResult, VerificationStatus};
use rayon::prelude::*;

use crate::format::BenchRecord;

/// Wall clock started at construction.
#[derive(Debug, Clone, Copy)]
pub struct StdClock(Instant);

impl StdClock {
    pub fn start() -> StdClock {
        StdClock(Instant::now())
    }
}

impl Clock for StdClock {
    fn elapsed_secs(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// Result of one query. Numerical failures are kept so that the other
/// inputs still produce records.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub input_id: usize,
    pub result: Result<VerificationResult, SearchError>,
    pub wall_time: f64,
}

impl Outcome {
    pub fn is_numerical_failure(&self) -> bool {
        matches!(self.result, Err(SearchError::Numerical { .. }))
    }

    pub fn timed_out(&self) -> bool {
        matches!(&self.result, Ok(r) if matches!(r.status, VerificationStatus::TimedOutLowerBound(_)))
    }

    /// `None` for errors other than numerical failure.
    pub fn record(&self, cfg: &SearchConfig) -> Option<BenchRecord> {
        let mut rec = BenchRecord {
            input_id: self.input_id,
            method: cfg.method.name().to_string(),
            norm: cfg.norm.name().to_string(),
            status: "numerical_failure".to_string(),
            value: 0.0,
            priority_programs: 0,
            decision_programs: 0,
            feasibility_programs: 0,
            patterns_popped: 0,
            patterns_pruned: 0,
            wall_time: self.wall_time,
        };
        match &self.result {
            Ok(r) => {
                rec.status = r.status.name().to_string();
                rec.value = r.status.value();
                rec.priority_programs = r.counters.priority_programs;
                rec.decision_programs = r.counters.decision_programs;
                rec.feasibility_programs = r.counters.feasibility_programs;
                rec.patterns_popped = r.counters.patterns_popped;
                rec.patterns_pruned = r.counters.patterns_pruned;
            }
            Err(SearchError::Numerical { .. }) => {}
            Err(_) => return None,
        }
        Some(rec)
    }
}

pub fn run_one(net: &ReluNetwork, input_id: usize, x: &[f64], radius: f64, cfg: &SearchConfig) -> Outcome {
    let clock = StdClock::start();
    let result = verify(net, x, radius, cfg, &clock);
    Outcome { input_id, result, wall_time: clock.elapsed_secs() }
}

/// Runs every input with up to `jobs` queries in flight; outcomes come back
/// in input order.
pub fn run_all(net: &ReluNetwork, inputs: &[Vec<f64>], radius: f64, cfg: &SearchConfig, jobs: usize) -> Vec<Outcome> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().expect("thread pool");
    pool.install(|| inputs.par_iter().enumerate().map(|(i, x)| run_one(net, i, x, radius, cfg)).collect())
}
