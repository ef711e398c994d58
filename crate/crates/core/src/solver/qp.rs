//! Dual active-set method for `min 1/2 |v - x|^2` over a polyhedron.
//!
//! Work is done in the displacement `d = v - x` with constraints written as
//! `n.d >= c`. The unconstrained minimizer `d = 0` is dual feasible, and
//! violated constraints are added one at a time while dual feasibility is
//! kept, dropping active constraints whose multiplier reaches zero.

use alloc::vec;
use alloc::vec::Vec;

use super::{ProjectionResult, SolverError, Tolerances};
use crate::geometry::Polyhedron;
use crate::linalg::{dot, norm2, Norm};

struct Active {
    /// Orthonormal basis of the span of active normals, one vector per entry.
    q: Vec<Vec<f64>>,
    /// Upper-triangular factor, row-major `k x k`.
    r: Vec<f64>,
}

fn factor(normals: &[&[f64]]) -> Active {
    let k = normals.len();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut r = vec![0.0; k * k];
    for (j, a) in normals.iter().enumerate() {
        let mut v = a.to_vec();
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let c = dot(qi, &v);
                r[i * k + j] += c;
                for (vv, qq) in v.iter_mut().zip(qi) {
                    *vv -= c * qq;
                }
            }
        }
        let nv = norm2(&v);
        r[j * k + j] = nv;
        let inv = if nv > 0.0 { 1.0 / nv } else { 0.0 };
        for vv in v.iter_mut() {
            *vv *= inv;
        }
        q.push(v);
    }
    Active { q, r }
}

impl Active {
    /// Least-norm `d` with `n_i.d = c_i` for every factored normal, or `None`
    /// if the factor is singular.
    fn least_norm(&self, c: &[f64]) -> Option<Vec<f64>> {
        let k = self.q.len();
        let mut w = vec![0.0; k];
        for j in 0..k {
            let diag = self.r[j * k + j];
            if diag <= 1e-12 {
                return None;
            }
            let mut s = c[j];
            for i in 0..j {
                s -= self.r[i * k + j] * w[i];
            }
            w[j] = s / diag;
        }
        let mut d = vec![0.0; self.q.first().map_or(0, |q| q.len())];
        for (wi, qi) in w.iter().zip(&self.q) {
            for (dd, qq) in d.iter_mut().zip(qi) {
                *dd += wi * qq;
            }
        }
        Some(d)
    }

    /// Returns `(z, r)` with `z = (I - QQ^T) n` and `r = R^-1 Q^T n`.
    fn step_dirs(&self, n: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let k = self.q.len();
        let mut z = n.to_vec();
        let mut qtn = vec![0.0; k];
        for (i, qi) in self.q.iter().enumerate() {
            qtn[i] = dot(qi, n);
            for (zz, qq) in z.iter_mut().zip(qi) {
                *zz -= qtn[i] * qq;
            }
        }
        let mut rr = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = qtn[i];
            for j in i + 1..k {
                s -= self.r[i * k + j] * rr[j];
            }
            rr[i] = s / self.r[i * k + i];
        }
        (z, rr)
    }
}

pub(super) fn project_l2(x: &[f64], poly: &Polyhedron, tol: &Tolerances) -> Result<ProjectionResult, SolverError> {
    let dim = x.len();
    let mut normals: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for h in poly.inequalities() {
        // a.v <= b  <=>  -a.d >= a.x - b
        normals.push(h.a.iter().map(|v| -v).collect());
        rhs.push(-h.slack(x));
    }
    let eq_index = poly.equality().map(|e| {
        let s = e.slack(x);
        // a.d = s; orient so that d = 0 violates the >= form when s != 0
        if s >= 0.0 {
            normals.push(e.a.clone());
            rhs.push(s);
        } else {
            normals.push(e.a.iter().map(|v| -v).collect());
            rhs.push(-s);
        }
        normals.len() - 1
    });

    let viol_tol = 1e-12;
    let mut d = vec![0.0; dim];
    let mut active: Vec<usize> = Vec::new();
    let mut act_n: Vec<Vec<f64>> = Vec::new();
    let mut act_c: Vec<f64> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let mut iterations = 0;

    let mut fac = factor(&[]);
    let slack = |d: &[f64], i: usize| dot(&normals[i], d) - rhs[i];

    loop {
        // pick the constraint to add: the equality first, then the most violated
        let mut p = None;
        if let Some(e) = eq_index {
            if !active.contains(&e) && slack(&d, e).abs() > viol_tol * (1.0 + rhs[e].abs()) {
                p = Some(e);
            }
        }
        if p.is_none() {
            let mut worst = 0.0;
            for i in 0..normals.len() {
                if active.contains(&i) || Some(i) == eq_index {
                    continue;
                }
                let s = slack(&d, i);
                let thr = -viol_tol * (1.0 + rhs[i].abs());
                if s < thr && s < worst {
                    worst = s;
                    p = Some(i);
                }
            }
        }
        let Some(p) = p else {
            let point: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
            return Ok(ProjectionResult::optimal(x, point, Norm::L2, iterations));
        };
        // an equality can be violated from either side after earlier steps
        let flip = Some(p) == eq_index && slack(&d, p) > 0.0;
        let np: Vec<f64> = if flip { normals[p].iter().map(|v| -v).collect() } else { normals[p].clone() };
        let cp = if flip { -rhs[p] } else { rhs[p] };
        let mut up = 0.0;

        loop {
            iterations += 1;
            if iterations > tol.max_iter {
                return Err(SolverError { iterations });
            }
            let s = dot(&np, &d) - cp;
            let (z, r) = fac.step_dirs(&np);
            let zn = dot(&z, &np);
            let zero_z = zn <= 1e-14 * dot(&np, &np);
            let mut t1 = f64::INFINITY;
            let mut drop = None;
            for (k, &idx) in active.iter().enumerate() {
                if Some(idx) == eq_index {
                    continue;
                }
                if r[k] > 0.0 {
                    let ratio = u[k] / r[k];
                    if ratio < t1 {
                        t1 = ratio;
                        drop = Some(k);
                    }
                }
            }
            let t2 = if zero_z { f64::INFINITY } else { -s / zn };
            let t = t1.min(t2);
            if t == f64::INFINITY {
                return Ok(ProjectionResult::infeasible(iterations));
            }
            if !zero_z {
                for (dd, zz) in d.iter_mut().zip(&z) {
                    *dd += t * zz;
                }
            }
            for (uk, rk) in u.iter_mut().zip(&r) {
                *uk -= t * rk;
            }
            up += t;
            if t2 <= t1 {
                active.push(p);
                act_n.push(np.clone());
                act_c.push(cp);
                u.push(up);
                let refs: Vec<&[f64]> = act_n.iter().map(|v| v.as_slice()).collect();
                fac = factor(&refs);
                // after a full step d solves the active equalities with least
                // norm; recomputing it removes drift from long step sequences
                if let Some(fresh) = fac.least_norm(&act_c) {
                    d = fresh;
                }
                break;
            }
            let k = drop.expect("finite t1 has a blocking index");
            active.remove(k);
            act_n.remove(k);
            act_c.remove(k);
            u.remove(k);
            let refs: Vec<&[f64]> = act_n.iter().map(|v| v.as_slice()).collect();
            fac = factor(&refs);
        }
    }
}
