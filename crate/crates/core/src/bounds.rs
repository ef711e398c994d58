//! Sound but incomplete bounds on the network over a ball: interval
//! propagation with partial-pattern clamping and a CROWN-style linear lower
//! bound on logit differences.

use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::Ball;
use crate::linalg::{dot, Norm};
use crate::network::{activation_pattern, ActivationPattern, LinearFunc, ReluNetwork};

/// A lower bound must exceed this to count as strictly positive.
pub const POSITIVE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalVector {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl IntervalVector {
    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }

    pub fn contains(&self, v: &[f64], slack: f64) -> bool {
        v.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (l, h))| *x >= l - slack && *x <= h + slack)
    }

    fn affine(&self, rows: usize, weights: &[f64], bias: &[f64]) -> IntervalVector {
        let cols = self.lo.len();
        let mut lo = bias.to_vec();
        let mut hi = bias.to_vec();
        for r in 0..rows {
            let w = &weights[r * cols..(r + 1) * cols];
            for k in 0..cols {
                let (a, b) = (w[k] * self.lo[k], w[k] * self.hi[k]);
                if a <= b {
                    lo[r] += a;
                    hi[r] += b;
                } else {
                    lo[r] += b;
                    hi[r] += a;
                }
            }
        }
        IntervalVector { lo, hi }
    }

    fn relu(&self) -> IntervalVector {
        IntervalVector {
            lo: self.lo.iter().map(|v| v.max(0.0)).collect(),
            hi: self.hi.iter().map(|v| v.max(0.0)).collect(),
        }
    }
}

/// Pre-activation bounds per hidden layer (after clamping) and logit bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalBounds {
    pub preactivations: Vec<IntervalVector>,
    pub logits: IntervalVector,
}

impl IntervalBounds {
    /// Interval of `f_y - f_j` from the difference of the two output rows
    /// applied to the last hidden layer, which is tighter than subtracting
    /// the two logit intervals.
    pub fn difference(&self, net: &ReluNetwork, y: usize, j: usize) -> (f64, f64) {
        let out = net.layer(net.num_hidden());
        let last = self.preactivations.last().expect("at least one hidden layer").relu();
        let (wy, wj) = (out.row(y), out.row(j));
        let mut lo = out.bias()[y] - out.bias()[j];
        let mut hi = lo;
        for k in 0..last.len() {
            let w = wy[k] - wj[k];
            let (a, b) = (w * last.lo[k], w * last.hi[k]);
            lo += a.min(b);
            hi += a.max(b);
        }
        (lo, hi)
    }
}

/// Interval bounds over `ball ∩ R_pattern`. The input box is the smallest
/// box containing the ball. Returns `None` when the clamps contradict the
/// bounds, which proves the intersection empty.
pub fn interval_propagate(net: &ReluNetwork, ball: &Ball, pattern: &ActivationPattern) -> Option<IntervalBounds> {
    let mut x = IntervalVector {
        lo: ball.center.iter().map(|c| c - ball.radius).collect(),
        hi: ball.center.iter().map(|c| c + ball.radius).collect(),
    };
    let mut pre = Vec::with_capacity(net.num_hidden());
    for i in 0..net.num_hidden() {
        let layer = net.layer(i);
        let mut z = x.affine(layer.rows(), layer.weights(), layer.bias());
        if i < pattern.depth() {
            for (k, on) in pattern.layer(i).iter().enumerate() {
                if *on {
                    z.lo[k] = z.lo[k].max(0.0);
                } else {
                    z.hi[k] = z.hi[k].min(0.0);
                }
                if z.lo[k] > z.hi[k] {
                    let slack = 1e-12 * (1.0 + z.lo[k].abs() + z.hi[k].abs());
                    if z.lo[k] > z.hi[k] + slack {
                        return None;
                    }
                    z.lo[k] = 0.0;
                    z.hi[k] = 0.0;
                }
            }
        }
        x = z.relu();
        pre.push(z);
    }
    let out = net.layer(net.num_hidden());
    let logits = x.affine(out.rows(), out.weights(), out.bias());
    Some(IntervalBounds { preactivations: pre, logits })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DbCheck {
    /// No decision boundary meets `ball ∩ R_pattern`.
    No,
    Maybe,
}

/// Interval test for a decision boundary of class `y` inside `ball ∩ R_pattern`.
pub fn contains_db(net: &ReluNetwork, pattern: &ActivationPattern, ball: &Ball, y: usize) -> DbCheck {
    let others: Vec<usize> = (0..net.num_classes()).filter(|j| *j != y).collect();
    contains_db_against(net, pattern, ball, y, &others)
}

/// As [`contains_db`] but only for the boundaries between `y` and `classes`.
pub fn contains_db_against(
    net: &ReluNetwork,
    pattern: &ActivationPattern,
    ball: &Ball,
    y: usize,
    classes: &[usize],
) -> DbCheck {
    let Some(bounds) = interval_propagate(net, ball, pattern) else {
        return DbCheck::No;
    };
    if classes.iter().all(|&j| bounds.difference(net, y, j).0 > POSITIVE) {
        DbCheck::No
    } else {
        DbCheck::Maybe
    }
}

/// `min_{v in ball} g(v) = a.x + b - r |a|_q`.
pub fn min_over_ball(g: &LinearFunc, ball: &Ball) -> f64 {
    g.eval(&ball.center) - ball.radius * ball.norm.dual().of(&g.a)
}

/// A linear `g` with `g(v) <= f_y(v) - f_j(v)` on `ball ∩ R_pattern`, or
/// `None` if that set is provably empty.
pub fn linear_lower_bound(
    net: &ReluNetwork,
    ball: &Ball,
    pattern: &ActivationPattern,
    y: usize,
    j: usize,
) -> Option<LinearFunc> {
    let bounds = interval_propagate(net, ball, pattern)?;
    Some(crown_from_bounds(net, &bounds, y, j))
}

fn crown_from_bounds(net: &ReluNetwork, bounds: &IntervalBounds, y: usize, j: usize) -> LinearFunc {
    let depth = net.num_hidden();
    let out = net.layer(depth);
    let mut lambda: Vec<f64> = out.row(y).iter().zip(out.row(j)).map(|(a, b)| a - b).collect();
    let mut constant = out.bias()[y] - out.bias()[j];
    for i in (0..depth).rev() {
        let z = &bounds.preactivations[i];
        // relax y = relu(z) against the sign of its coefficient
        let mut mu = vec![0.0; lambda.len()];
        for k in 0..lambda.len() {
            let (l, u, c) = (z.lo[k], z.hi[k], lambda[k]);
            if l >= 0.0 {
                mu[k] = c;
            } else if u <= 0.0 {
                mu[k] = 0.0;
            } else if c >= 0.0 {
                let alpha = if u >= -l { 1.0 } else { 0.0 };
                mu[k] = c * alpha;
            } else {
                let s = u / (u - l);
                mu[k] = c * s;
                constant -= c * s * l;
            }
        }
        let layer = net.layer(i);
        constant += dot(&mu, layer.bias());
        let cols = layer.cols();
        let mut next = vec![0.0; cols];
        for (r, m) in mu.iter().enumerate() {
            if *m != 0.0 {
                for (n, w) in next.iter_mut().zip(layer.row(r)) {
                    *n += m * w;
                }
            }
        }
        lambda = next;
    }
    LinearFunc::new(lambda, constant)
}

/// Closed-form projection of `x` onto `{v : g(v) <= 0}`: `(distance, point)`.
/// Returns `None` if the halfspace is empty (zero normal, positive offset).
pub fn warm_start(x: &[f64], g: &LinearFunc, norm: Norm) -> Option<(f64, Vec<f64>)> {
    let gx = g.eval(x);
    if gx <= 0.0 {
        return Some((0.0, x.to_vec()));
    }
    let scale = norm.dual().of(&g.a);
    if scale <= 0.0 {
        return None;
    }
    let mut v = x.to_vec();
    match norm {
        Norm::L2 => {
            let t = gx / dot(&g.a, &g.a);
            for (vi, ai) in v.iter_mut().zip(&g.a) {
                *vi -= t * ai;
            }
        }
        Norm::Linf => {
            let t = gx / scale;
            for (vi, ai) in v.iter_mut().zip(&g.a) {
                if *ai > 0.0 {
                    *vi -= t;
                } else if *ai < 0.0 {
                    *vi += t;
                }
            }
        }
        Norm::L1 => {
            let mut k = 0;
            for (i, ai) in g.a.iter().enumerate() {
                if ai.abs() > g.a[k].abs() {
                    k = i;
                }
            }
            v[k] -= gx / g.a[k];
        }
    }
    Some((gx / scale, v))
}

/// One member of a restriction set: a superset `{g <= 0}` of the boundary
/// between `y` and `class` inside the ball, with its closest point to the center.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictionMember {
    pub class: usize,
    pub g: LinearFunc,
    pub distance: f64,
    pub point: Vec<f64>,
}

/// Members with union semantics: every decision boundary inside the ball
/// lies in at least one `{g_j <= 0}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RestrictionSet {
    pub members: Vec<RestrictionMember>,
}

impl RestrictionSet {
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    /// Member with the smallest warm-start distance (first on ties).
    pub fn closest(&self) -> Option<&RestrictionMember> {
        let mut best: Option<&RestrictionMember> = None;
        for m in &self.members {
            if best.is_none_or(|b| m.distance < b.distance) {
                best = Some(m);
            }
        }
        best
    }

    /// A single linear `h` with `h <= min_j g_j` on the ball, so that
    /// `{h <= 0}` is a convex superset of the union of the members. Built as
    /// `g_k` (or the members' mean) minus its largest gap to any member over
    /// the ball; the candidate whose halfspace lies furthest from the center
    /// wins. With one member this is the member itself.
    pub fn combined(&self, ball: &Ball) -> Option<LinearFunc> {
        let n = self.members.len();
        if n == 0 {
            return None;
        }
        if n == 1 {
            return Some(self.members[0].g.clone());
        }
        let mut candidates: Vec<LinearFunc> = self.members.iter().map(|m| m.g.clone()).collect();
        let dim = ball.center.len();
        let mut mean = LinearFunc::new(vec![0.0; dim], 0.0);
        for m in &self.members {
            for (o, a) in mean.a.iter_mut().zip(&m.g.a) {
                *o += a / n as f64;
            }
            mean.b += m.g.b / n as f64;
        }
        candidates.push(mean);
        let q = ball.norm.dual();
        let mut best: Option<(f64, LinearFunc)> = None;
        for mut h in candidates {
            let mut gap = 0.0f64;
            for m in &self.members {
                let diff: Vec<f64> = h.a.iter().zip(&m.g.a).map(|(a, b)| a - b).collect();
                let max = (h.b - m.g.b) + dot(&diff, &ball.center) + ball.radius * q.of(&diff);
                gap = gap.max(max);
            }
            h.b -= gap;
            let scale = q.of(&h.a);
            let signed = if scale > 0.0 {
                h.eval(&ball.center) / scale
            } else if h.b > 0.0 {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            };
            if best.as_ref().is_none_or(|(s, _)| signed > *s) {
                best = Some((signed, h));
            }
        }
        best.map(|(_, h)| h)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Restriction {
    /// Every `f_y - f_j` is strictly positive on the ball (or the region
    /// misses it): no adversarial point within the radius.
    Certified,
    Restricted {
        distance: f64,
        pattern: ActivationPattern,
        point: Vec<f64>,
        set: RestrictionSet,
        /// Convex superset `{bound <= 0}` of the set's union.
        bound: LinearFunc,
    },
}

/// Restriction set over `B_p(x, radius)` for the untargeted problem at class `y`.
pub fn restriction(net: &ReluNetwork, x: &[f64], radius: f64, y: usize, norm: Norm) -> Restriction {
    let ball = Ball::new(x.to_vec(), radius, norm);
    let classes: Vec<usize> = (0..net.num_classes()).filter(|j| *j != y).collect();
    let set = restriction_set(net, &ball, &ActivationPattern::empty(), y, &classes);
    let Some(set) = set else {
        return Restriction::Certified;
    };
    if set.is_empty() {
        return Restriction::Certified;
    }
    let bound = set.combined(&ball).expect("nonempty");
    let Some((distance, point)) = warm_start(x, &bound, norm) else {
        return Restriction::Certified;
    };
    let pattern = activation_pattern(net, &point, 1).expect("dimension checked by caller");
    Restriction::Restricted { distance, pattern, point, set, bound }
}

/// Members for `classes` over `ball ∩ R_pattern`; members whose bound is
/// positive on the whole ball are dropped. `None` if the set is empty.
pub fn restriction_set(
    net: &ReluNetwork,
    ball: &Ball,
    pattern: &ActivationPattern,
    y: usize,
    classes: &[usize],
) -> Option<RestrictionSet> {
    let bounds = interval_propagate(net, ball, pattern)?;
    let mut members = Vec::new();
    for &j in classes {
        let g = crown_from_bounds(net, &bounds, y, j);
        if min_over_ball(&g, ball) > POSITIVE {
            continue;
        }
        let Some((distance, point)) = warm_start(&ball.center, &g, ball.norm) else {
            continue;
        };
        members.push(RestrictionMember { class: j, g, distance, point });
    }
    Some(RestrictionSet { members })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::tests::example_net;

    fn ball(c: &[f64], r: f64, norm: Norm) -> Ball {
        Ball::new(c.to_vec(), r, norm)
    }

    #[test]
    fn unit_box_at_origin() {
        let net = example_net();
        let b = interval_propagate(&net, &ball(&[0.0, 0.0], 1.0, Norm::Linf), &ActivationPattern::empty()).unwrap();
        assert_eq!(b.logits.lo, vec![0.0, 10.0]);
        assert_eq!(b.logits.hi, vec![1.0, 10.0]);
    }

    #[test]
    fn stable_off_ball() {
        let net = example_net();
        let b = interval_propagate(&net, &ball(&[-1.0, -1.25], 0.3, Norm::Linf), &ActivationPattern::empty()).unwrap();
        assert!(b.preactivations[0].hi.iter().all(|v| *v < 0.0));
        assert_eq!(b.logits.lo, vec![0.0, 10.0]);
        assert_eq!(b.logits.hi, vec![0.0, 10.0]);
    }

    #[test]
    fn clamped_pattern() {
        let net = example_net();
        let pat = ActivationPattern::from_signs(&[&[-1, -1]]);
        let b = interval_propagate(&net, &ball(&[0.0, 0.0], 1.0, Norm::Linf), &pat).unwrap();
        assert_eq!(b.preactivations[1].lo, vec![-1.0]);
        assert_eq!(b.preactivations[1].hi, vec![-1.0]);
        assert_eq!((b.logits.lo[0], b.logits.hi[0]), (0.0, 0.0));
    }

    #[test]
    fn contradictory_clamp_is_empty() {
        let net = example_net();
        let pat = ActivationPattern::from_signs(&[&[-1, -1], &[1]]);
        assert!(interval_propagate(&net, &ball(&[0.0, 0.0], 1.0, Norm::Linf), &pat).is_none());
        assert_eq!(contains_db(&net, &pat, &ball(&[0.0, 0.0], 1.0, Norm::Linf), 1), DbCheck::No);
    }

    #[test]
    fn contains_db_examples() {
        let net = example_net();
        let pat = ActivationPattern::from_signs(&[&[-1, -1]]);
        assert_eq!(contains_db(&net, &pat, &ball(&[-1.0, -1.25], 0.3, Norm::Linf), 1), DbCheck::No);
        let empty = ActivationPattern::empty();
        assert_eq!(contains_db(&net, &empty, &ball(&[5.0, 5.0], 2.0, Norm::Linf), 1), DbCheck::Maybe);
    }

    #[test]
    fn crown_all_stable() {
        let net = example_net();
        let g = linear_lower_bound(&net, &ball(&[-1.0, -1.25], 0.3, Norm::Linf), &ActivationPattern::empty(), 1, 0)
            .unwrap();
        assert!(g.a.iter().all(|v| *v == 0.0));
        assert_eq!(g.b, 10.0);
    }

    #[test]
    fn dual_norm_concretization() {
        let g = LinearFunc::new(vec![1.0, 1.0], 0.0);
        assert_eq!(min_over_ball(&g, &ball(&[0.0, 0.0], 1.0, Norm::Linf)), -2.0);
        assert!((min_over_ball(&g, &ball(&[0.0, 0.0], 1.0, Norm::L2)) + 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(min_over_ball(&g, &ball(&[0.0, 0.0], 1.0, Norm::L1)), -1.0);
    }

    #[test]
    fn restriction_certifies_small_ball() {
        let net = example_net();
        assert_eq!(restriction(&net, &[-1.0, -1.25], 0.3, 1, Norm::Linf), Restriction::Certified);
    }

    #[test]
    fn warm_start_examples() {
        let g = LinearFunc::new(vec![1.0, 0.0], -11.0);
        assert_eq!(warm_start(&[0.0, 0.0], &g, Norm::L2), Some((0.0, vec![0.0, 0.0])));
        let g = LinearFunc::new(vec![-1.0, 0.0], 2.0);
        let (d, v) = warm_start(&[0.0, 0.0], &g, Norm::L2).unwrap();
        assert_eq!(d, 2.0);
        assert_eq!(v, vec![2.0, 0.0]);
        let g = LinearFunc::new(vec![-1.0, -2.0], 4.0);
        let (d, v) = warm_start(&[0.0, 0.0], &g, Norm::Linf).unwrap();
        assert!((d - 4.0 / 3.0).abs() < 1e-15 && g.eval(&v).abs() < 1e-12);
        let (d, v) = warm_start(&[0.0, 0.0], &g, Norm::L1).unwrap();
        assert_eq!((d, v), (2.0, vec![0.0, 2.0]));
    }
}
