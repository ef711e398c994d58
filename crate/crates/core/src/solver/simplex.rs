//! Revised simplex for the l_1 / l_inf epigraph program with column generation.
//!
//! Rows are the constraints of the polyhedron written in the displacement
//! `delta = v - x`: `a_i.delta <= b_i - a_i.x` and `e.delta = f - e.x`.
//! Columns are slacks, phase-one artificials and atoms of the unit ball
//! (`+-e_k` for l_1, sign vectors for l_inf) with cost 1 in phase two.
//! Pricing an atom against duals `pi` reduces to `max_a w.a` with
//! `w = sum_i pi_i row_i`, which is `|w|_q` and has a closed-form maximizer.

use alloc::vec;
use alloc::vec::Vec;

use super::{ProjectionResult, SolverError, Tolerances};
use crate::geometry::Polyhedron;
use crate::linalg::{dot, Norm};

const PIVOT_TOL: f64 = 1e-11;
const PRICE_TOL: f64 = 1e-10;
const REFACTOR_EVERY: usize = 40;

#[derive(Debug, Clone)]
enum Atom {
    Coord(usize, f64),
    Signs(Vec<f64>),
}

impl Atom {
    fn dot(&self, row: &[f64]) -> f64 {
        match self {
            Atom::Coord(k, s) => row[*k] * s,
            Atom::Signs(s) => dot(row, s),
        }
    }

    fn add_to(&self, scale: f64, out: &mut [f64]) {
        match self {
            Atom::Coord(k, s) => out[*k] += scale * s,
            Atom::Signs(s) => {
                for (o, v) in out.iter_mut().zip(s) {
                    *o += scale * v;
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Col {
    Slack(usize),
    Artificial(usize),
    Atom(usize),
}

struct Lp<'a> {
    norm: Norm,
    n: usize,
    rows: Vec<&'a [f64]>,
    /// Right-hand sides after sign normalization, all >= 0.
    rhs: Vec<f64>,
    sign: Vec<f64>,
    is_eq: Vec<bool>,
    atoms: Vec<Atom>,
    basis: Vec<Col>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    slack_basic: Vec<bool>,
    iterations: usize,
    max_iter: usize,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

impl<'a> Lp<'a> {
    fn new(x: &[f64], poly: &'a Polyhedron, norm: Norm, tol: &Tolerances) -> Lp<'a> {
        let n = x.len();
        let mut rows = Vec::new();
        let mut raw = Vec::new();
        let mut is_eq = Vec::new();
        for h in poly.inequalities() {
            rows.push(h.a.as_slice());
            raw.push(h.slack(x));
            is_eq.push(false);
        }
        if let Some(e) = poly.equality() {
            rows.push(e.a.as_slice());
            raw.push(e.slack(x));
            is_eq.push(true);
        }
        let m = rows.len();
        // Loosen inequality rows by distinct tiny amounts so ratio ties are rare.
        let mut rhs = Vec::with_capacity(m);
        let mut sign = Vec::with_capacity(m);
        for (i, r) in raw.iter().enumerate() {
            let mut r = *r;
            if !is_eq[i] {
                let frac = libm::fmod(0.618_033_988_75 * (i as f64 + 1.0), 1.0);
                r += 1e-11 * (1.0 + r.abs()) * (1.0 + frac);
            }
            let s = if r < 0.0 { -1.0 } else { 1.0 };
            rhs.push(s * r);
            sign.push(s);
        }
        let mut basis = Vec::with_capacity(m);
        let mut slack_basic = vec![false; m];
        for i in 0..m {
            if !is_eq[i] && sign[i] > 0.0 {
                basis.push(Col::Slack(i));
                slack_basic[i] = true;
            } else {
                basis.push(Col::Artificial(i));
            }
        }
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        let xb = rhs.clone();
        Lp {
            norm,
            n,
            rows,
            rhs,
            sign,
            is_eq,
            atoms: Vec::new(),
            basis,
            binv,
            xb,
            slack_basic,
            iterations: 0,
            max_iter: tol.max_iter,
        }
    }

    fn m(&self) -> usize {
        self.rows.len()
    }

    fn column(&self, col: Col) -> Vec<f64> {
        let m = self.m();
        let mut out = vec![0.0; m];
        match col {
            Col::Slack(i) => out[i] = self.sign[i],
            Col::Artificial(i) => out[i] = 1.0,
            Col::Atom(k) => {
                let atom = &self.atoms[k];
                for i in 0..m {
                    out[i] = self.sign[i] * atom.dot(self.rows[i]);
                }
            }
        }
        out
    }

    fn atom_column(&self, atom: &Atom) -> Vec<f64> {
        (0..self.m()).map(|i| self.sign[i] * atom.dot(self.rows[i])).collect()
    }

    fn cost(&self, col: Col, phase: u8) -> f64 {
        match (col, phase) {
            (Col::Artificial(_), 1) => 1.0,
            (Col::Atom(_), 2) => 1.0,
            _ => 0.0,
        }
    }

    fn solve_binv(&self, col: &[f64]) -> Vec<f64> {
        let m = self.m();
        (0..m).map(|r| dot(&self.binv[r * m..(r + 1) * m], col)).collect()
    }

    /// `w = sum_i c_i sign_i row_i` for row weights `c`.
    fn weighted_rows(&self, c: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.n];
        for (i, row) in self.rows.iter().enumerate() {
            let s = c[i] * self.sign[i];
            if s != 0.0 {
                for (o, r) in w.iter_mut().zip(row.iter()) {
                    *o += s * r;
                }
            }
        }
        w
    }

    /// Atom maximizing `w.a` and the attained value `|w|_q`.
    fn best_atom(&self, w: &[f64]) -> (Atom, f64) {
        match self.norm {
            Norm::L1 => {
                let mut k = 0;
                for (i, v) in w.iter().enumerate() {
                    if v.abs() > w[k].abs() {
                        k = i;
                    }
                }
                let s = if w[k] < 0.0 { -1.0 } else { 1.0 };
                (Atom::Coord(k, s), w[k].abs())
            }
            _ => {
                let signs: Vec<f64> = w.iter().map(|v| if *v < 0.0 { -1.0 } else { 1.0 }).collect();
                let value = w.iter().map(|v| v.abs()).sum();
                (Atom::Signs(signs), value)
            }
        }
    }

    fn pivot(&mut self, r: usize, entering: Col, d: &[f64]) {
        let m = self.m();
        let theta = self.xb[r] / d[r];
        for i in 0..m {
            if i != r {
                self.xb[i] -= theta * d[i];
            }
        }
        self.xb[r] = theta;
        let piv = d[r];
        for k in 0..m {
            self.binv[r * m + k] /= piv;
        }
        for i in 0..m {
            if i == r || d[i] == 0.0 {
                continue;
            }
            let f = d[i];
            for k in 0..m {
                self.binv[i * m + k] -= f * self.binv[r * m + k];
            }
        }
        if let Col::Slack(i) = self.basis[r] {
            self.slack_basic[i] = false;
        }
        if let Col::Slack(i) = entering {
            self.slack_basic[i] = true;
        }
        self.basis[r] = entering;
    }

    /// Rebuilds the basis inverse from scratch by Gauss-Jordan elimination.
    fn refactor(&mut self) -> Result<(), SolverError> {
        let m = self.m();
        let mut a = vec![0.0; m * m];
        for (c, col) in self.basis.iter().enumerate() {
            let v = self.column(*col);
            for r in 0..m {
                a[r * m + c] = v[r];
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let mut p = c;
            for r in c + 1..m {
                if a[r * m + c].abs() > a[p * m + c].abs() {
                    p = r;
                }
            }
            if a[p * m + c].abs() < 1e-13 {
                return Err(SolverError { iterations: self.iterations });
            }
            if p != c {
                for k in 0..m {
                    a.swap(p * m + k, c * m + k);
                    inv.swap(p * m + k, c * m + k);
                }
            }
            let piv = a[c * m + c];
            for k in 0..m {
                a[c * m + k] /= piv;
                inv[c * m + k] /= piv;
            }
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = a[r * m + c];
                if f == 0.0 {
                    continue;
                }
                for k in 0..m {
                    a[r * m + k] -= f * a[c * m + k];
                    inv[r * m + k] -= f * inv[c * m + k];
                }
            }
        }
        self.binv = inv;
        self.xb = self.solve_binv(&self.rhs.clone());
        Ok(())
    }

    fn run_phase(&mut self, phase: u8) -> Result<PhaseEnd, SolverError> {
        let m = self.m();
        let mut since_refactor = 0;
        loop {
            self.iterations += 1;
            if self.iterations > self.max_iter {
                return Err(SolverError { iterations: self.iterations });
            }
            since_refactor += 1;
            if since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
                since_refactor = 0;
            }
            // duals pi = B^-T c_B
            let cb: Vec<f64> = self.basis.iter().map(|c| self.cost(*c, phase)).collect();
            let mut pi = vec![0.0; m];
            for r in 0..m {
                if cb[r] != 0.0 {
                    for k in 0..m {
                        pi[k] += cb[r] * self.binv[r * m + k];
                    }
                }
            }
            let mut best: Option<(f64, Col)> = None;
            for i in 0..m {
                if self.is_eq[i] || self.slack_basic[i] {
                    continue;
                }
                let rc = -pi[i] * self.sign[i];
                if rc < -PRICE_TOL && best.is_none_or(|(b, _)| rc < b) {
                    best = Some((rc, Col::Slack(i)));
                }
            }
            let w = self.weighted_rows(&pi);
            let (atom, value) = self.best_atom(&w);
            let atom_cost = if phase == 2 { 1.0 } else { 0.0 };
            let rc_atom = atom_cost - value;
            let mut new_atom = None;
            if rc_atom < -PRICE_TOL && best.is_none_or(|(b, _)| rc_atom < b) {
                best = Some((rc_atom, Col::Atom(usize::MAX)));
                new_atom = Some(atom);
            }
            let Some((_, mut entering)) = best else {
                return Ok(PhaseEnd::Optimal);
            };
            let col = match (&entering, &new_atom) {
                (Col::Atom(_), Some(a)) => self.atom_column(a),
                _ => self.column(entering),
            };
            let d = self.solve_binv(&col);
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for r in 0..m {
                if phase == 2 && matches!(self.basis[r], Col::Artificial(_)) && d[r].abs() > PIVOT_TOL {
                    leave = Some(r);
                    best_ratio = 0.0;
                    break;
                }
                if d[r] > PIVOT_TOL {
                    let ratio = self.xb[r].max(0.0) / d[r];
                    let better = match leave {
                        None => true,
                        Some(l) => ratio < best_ratio - 1e-14 || (ratio <= best_ratio + 1e-14 && d[r] > d[l]),
                    };
                    if better {
                        leave = Some(r);
                        best_ratio = ratio;
                    }
                }
            }
            let Some(r) = leave else {
                return Ok(PhaseEnd::Unbounded);
            };
            if self.xb[r] < 0.0 || best_ratio == 0.0 {
                self.xb[r] = 0.0;
            }
            if let Some(a) = new_atom {
                self.atoms.push(a);
                entering = Col::Atom(self.atoms.len() - 1);
            }
            self.pivot(r, entering, &d);
        }
    }

    fn infeasibility(&self) -> f64 {
        self.basis.iter().zip(&self.xb).filter(|(c, _)| matches!(c, Col::Artificial(_))).map(|(_, v)| v.max(0.0)).sum()
    }

    /// Pivots zero-level artificials out of the basis where some column can
    /// replace them; rows where none can are redundant and keep theirs.
    fn drive_out_artificials(&mut self) {
        let m = self.m();
        for r in 0..m {
            if !matches!(self.basis[r], Col::Artificial(_)) {
                continue;
            }
            let rho: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
            let mut entering = None;
            for i in 0..m {
                if !self.is_eq[i] && !self.slack_basic[i] && (rho[i] * self.sign[i]).abs() > 1e-9 {
                    entering = Some((Col::Slack(i), None));
                    break;
                }
            }
            if entering.is_none() {
                let w = self.weighted_rows(&rho);
                if w.iter().any(|v| v.abs() > 1e-9) {
                    let (atom, _) = self.best_atom(&w);
                    entering = Some((Col::Atom(usize::MAX), Some(atom)));
                }
            }
            let Some((mut col, atom)) = entering else { continue };
            let column = match &atom {
                Some(a) => self.atom_column(a),
                None => self.column(col),
            };
            let d = self.solve_binv(&column);
            if d[r].abs() <= 1e-9 {
                continue;
            }
            self.xb[r] = 0.0;
            if let Some(a) = atom {
                self.atoms.push(a);
                col = Col::Atom(self.atoms.len() - 1);
            }
            self.pivot(r, col, &d);
        }
    }

    fn displacement(&self) -> Vec<f64> {
        let mut delta = vec![0.0; self.n];
        for (c, v) in self.basis.iter().zip(&self.xb) {
            if let Col::Atom(k) = c {
                self.atoms[*k].add_to(v.max(0.0), &mut delta);
            }
        }
        delta
    }
}

fn infeasibility_tol(tol: &Tolerances) -> f64 {
    (tol.feas * 1e-2).max(1e-10)
}

pub(super) fn phase_one(x: &[f64], poly: &Polyhedron, tol: &Tolerances) -> Result<bool, SolverError> {
    let mut lp = Lp::new(x, poly, Norm::Linf, tol);
    lp.run_phase(1)?;
    Ok(lp.infeasibility() <= infeasibility_tol(tol))
}

pub(super) fn project_gauge(
    x: &[f64],
    poly: &Polyhedron,
    norm: Norm,
    tol: &Tolerances,
) -> Result<ProjectionResult, SolverError> {
    let mut lp = Lp::new(x, poly, norm, tol);
    lp.run_phase(1)?;
    if lp.infeasibility() > infeasibility_tol(tol) {
        return Ok(ProjectionResult::infeasible(lp.iterations));
    }
    lp.drive_out_artificials();
    for attempt in 0..3 {
        match lp.run_phase(2)? {
            PhaseEnd::Optimal => {}
            PhaseEnd::Unbounded => return Err(SolverError { iterations: lp.iterations }),
        }
        let delta = lp.displacement();
        let point: Vec<f64> = x.iter().zip(&delta).map(|(a, b)| a + b).collect();
        if poly.max_violation(&point) <= tol.feas || attempt == 2 {
            return Ok(ProjectionResult::optimal(x, point, norm, lp.iterations));
        }
        lp.refactor()?;
    }
    unreachable!()
}
