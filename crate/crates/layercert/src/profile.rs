//! Performance-profile curves: for each method, the number of instances
//! solved within each time budget.

use std::collections::{BTreeMap, BTreeSet};

use crate::format::BenchRecord;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProfileError {
    #[error("need records from at least two methods, found {0}")]
    TooFewMethods(usize),
    #[error("method {method} has a different instance set than {reference}")]
    Mismatch { method: String, reference: String },
    #[error("method {method} has two records for input {input_id} with norm {norm}")]
    Duplicate { method: String, input_id: usize, norm: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfilePoint {
    pub method: String,
    pub time: f64,
    pub solved: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub instances: usize,
    pub points: Vec<ProfilePoint>,
}

impl Profile {
    pub fn curve(&self, method: &str) -> Vec<(f64, usize)> {
        self.points.iter().filter(|p| p.method == method).map(|p| (p.time, p.solved)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["method", "time", "solved"]).expect("in-memory write");
        for p in &self.points {
            w.write_record([p.method.clone(), p.time.to_string(), p.solved.to_string()]).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }
}

/// Records are grouped by method; instances are `(input_id, norm)` pairs and
/// every method must cover the same set.
pub fn profile(records: &[BenchRecord]) -> Result<Profile, ProfileError> {
    let mut by_method: BTreeMap<&str, Vec<&BenchRecord>> = BTreeMap::new();
    for r in records {
        by_method.entry(r.method.as_str()).or_default().push(r);
    }
    if by_method.len() < 2 {
        return Err(ProfileError::TooFewMethods(by_method.len()));
    }
    let mut reference: Option<(&str, BTreeSet<(usize, &str)>)> = None;
    for (method, recs) in &by_method {
        let mut set = BTreeSet::new();
        for r in recs {
            if !set.insert((r.input_id, r.norm.as_str())) {
                return Err(ProfileError::Duplicate {
                    method: method.to_string(),
                    input_id: r.input_id,
                    norm: r.norm.clone(),
                });
            }
        }
        match &reference {
            None => reference = Some((method, set)),
            Some((name, r)) if *r != set => {
                return Err(ProfileError::Mismatch { method: method.to_string(), reference: name.to_string() })
            }
            Some(_) => {}
        }
    }
    let instances = reference.map_or(0, |(_, s)| s.len());
    let mut points = Vec::new();
    for (method, recs) in &by_method {
        let mut times: Vec<f64> = recs.iter().filter(|r| r.solved()).map(|r| r.wall_time.max(0.0)).collect();
        times.sort_by(f64::total_cmp);
        points.extend(times.into_iter().enumerate().map(|(i, time)| ProfilePoint {
            method: method.to_string(),
            time,
            solved: i + 1,
        }));
    }
    Ok(Profile { instances, points })
}
