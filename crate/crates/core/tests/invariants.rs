mod common;

use common::{random_net, random_point};
use layercert_core::{
    activation_pattern, affine_prefix, contains_db, decision_affine, decision_bound, enumerate_regions, feasible,
    hyperplane_distance, interval_propagate, linear_lower_bound, min_over_ball, next_layer, project, Ball, DbCheck,
    Norm, Polyhedron, ProjectionStatus, ReluNetwork, Tolerances,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NORMS: [Norm; 3] = [Norm::L1, Norm::L2, Norm::Linf];

fn net_from_seed(rng: &mut ChaCha8Rng, max_width: usize) -> ReluNetwork {
    let depth = rng.gen_range(1..=3);
    let widths: Vec<usize> = (0..depth).map(|_| rng.gen_range(1..=max_width)).collect();
    let dim = rng.gen_range(1..=4);
    let classes = rng.gen_range(2..=4);
    random_net(rng, dim, &widths, classes)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

/// Random polyhedron in `dim` dimensions; feasible when `through` is given.
fn random_poly(rng: &mut ChaCha8Rng, dim: usize, rows: usize, through: Option<&[f64]>) -> Polyhedron {
    let mut p = Polyhedron::new(dim);
    for _ in 0..rows {
        let a: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let b = match through {
            Some(v) => a.iter().zip(v).map(|(x, y)| x * y).sum::<f64>() + rng.gen_range(0.0..=1.0),
            None => rng.gen_range(-2.0..=2.0),
        };
        p.push_inequality(a, b, None);
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn affine_prefix_matches_forward(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = net_from_seed(&mut rng, 8);
        let x = random_point(&mut rng, net.input_dim(), 2.0);
        let f = net.forward(&x).unwrap();
        for depth in 0..=net.num_hidden() {
            let map = affine_prefix(&net, &activation_pattern(&net, &x, depth).unwrap()).unwrap();
            for i in 0..map.len() {
                let want = if i < net.num_hidden() { &f.preactivations[i] } else { &f.logits };
                for (got, want) in map.eval(i, &x).iter().zip(want) {
                    prop_assert!(close(*got, *want), "depth {depth} layer {i}: {got} vs {want}");
                }
            }
        }
        let full = activation_pattern(&net, &x, net.num_hidden()).unwrap();
        let y = net.classify(&x).unwrap();
        for j in (0..net.num_classes()).filter(|j| *j != y) {
            let g = decision_affine(&net, &full, y, j).unwrap();
            prop_assert!(close(g.eval(&x), f.logits[y] - f.logits[j]));
        }
    }

    #[test]
    fn next_layer_extends_prefix(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = net_from_seed(&mut rng, 8);
        let x = random_point(&mut rng, net.input_dim(), 2.0);
        for depth in 0..net.num_hidden() {
            let a = activation_pattern(&net, &x, depth).unwrap();
            prop_assert_eq!(next_layer(&net, &a, &x).unwrap(), activation_pattern(&net, &x, depth + 1).unwrap());
        }
    }

    #[test]
    fn projection_is_feasible_and_not_beaten(seed in any::<u64>(), ni in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let norm = NORMS[ni];
        let tol = Tolerances::default();
        let dim = rng.gen_range(1..=4);
        let inside = random_point(&mut rng, dim, 1.0);
        let rows = rng.gen_range(1..=8);
        let poly = random_poly(&mut rng, dim, rows, Some(&inside));
        let x = random_point(&mut rng, dim, 3.0);
        let r = project(&x, &poly, norm, &tol);
        prop_assert_eq!(r.status, ProjectionStatus::Optimal);
        prop_assert!(poly.max_violation(&r.point) <= tol.feas);
        prop_assert!((norm.dist(&x, &r.point) - r.distance).abs() <= tol.opt);
        prop_assert!(r.distance <= norm.dist(&x, &inside) + tol.opt);
        for _ in 0..300 {
            let t: f64 = rng.gen();
            let v: Vec<f64> = inside.iter().zip(&r.point).map(|(a, b)| a + t * (b - a)).collect();
            let v: Vec<f64> = v.iter().map(|c| c + rng.gen_range(-0.3..=0.3)).collect();
            if poly.max_violation(&v) <= 0.0 {
                prop_assert!(norm.dist(&x, &v) >= r.distance - tol.opt);
            }
        }
    }

    #[test]
    fn feasibility_matches_projection(seed in any::<u64>(), ni in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tol = Tolerances::default();
        let dim = rng.gen_range(1..=3);
        let rows = rng.gen_range(1..=8);
        let poly = random_poly(&mut rng, dim, rows, None);
        let x = random_point(&mut rng, dim, 1.0);
        let r = project(&x, &poly, NORMS[ni], &tol);
        prop_assert_ne!(r.status, ProjectionStatus::NumericalFailure);
        prop_assert_eq!(feasible(&poly, &tol).unwrap(), r.status == ProjectionStatus::Optimal);
    }

    #[test]
    fn hyperplane_distance_matches_projection(seed in any::<u64>(), ni in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let norm = NORMS[ni];
        let dim = rng.gen_range(1..=5);
        let a = random_point(&mut rng, dim, 1.0);
        prop_assume!(a.iter().any(|v| v.abs() > 1e-3));
        let b = rng.gen_range(-2.0..=2.0);
        let x = random_point(&mut rng, dim, 2.0);
        let mut poly = Polyhedron::new(dim);
        poly.set_equality(a.clone(), b);
        let r = project(&x, &poly, norm, &Tolerances::default());
        prop_assert!((r.distance - hyperplane_distance(&x, &a, b, norm).unwrap()).abs() <= 1e-6);
    }

    #[test]
    fn interval_and_crown_are_sound(seed in any::<u64>(), ni in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let norm = NORMS[ni];
        let net = net_from_seed(&mut rng, 8);
        let x = random_point(&mut rng, net.input_dim(), 1.0);
        let ball = Ball::new(x.clone(), rng.gen_range(0.01..=1.0), norm);
        let v: Vec<f64> = x.iter().map(|c| c + rng.gen_range(-1.0..=1.0) * ball.radius / net.input_dim() as f64).collect();
        let pattern = activation_pattern(&net, &v, rng.gen_range(0..=net.num_hidden())).unwrap();
        let b = interval_propagate(&net, &ball, &pattern).expect("v lies in ball and region");
        let f = net.forward(&v).unwrap();
        prop_assert!(b.logits.contains(&f.logits, 1e-9));
        for (iv, z) in b.preactivations.iter().zip(&f.preactivations) {
            prop_assert!(iv.contains(z, 1e-9));
        }
        let y = net.classify(&x).unwrap();
        for j in (0..net.num_classes()).filter(|j| *j != y) {
            let g = linear_lower_bound(&net, &ball, &pattern, y, j).unwrap();
            prop_assert!(g.eval(&v) <= f.logits[y] - f.logits[j] + 1e-9);
            let (lo, hi) = b.difference(&net, y, j);
            prop_assert!(lo - 1e-9 <= f.logits[y] - f.logits[j] && f.logits[y] - f.logits[j] <= hi + 1e-9);
        }
    }
}

#[test]
fn crown_usually_beats_intervals() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let (mut wins, mut total) = (0, 0);
    for _ in 0..300 {
        let net = net_from_seed(&mut rng, 8);
        let x = random_point(&mut rng, net.input_dim(), 1.0);
        let norm = NORMS[rng.gen_range(0..3)];
        let ball = Ball::new(x.clone(), rng.gen_range(0.01..=0.5), norm);
        let empty = activation_pattern(&net, &x, 0).unwrap();
        let y = net.classify(&x).unwrap();
        let j = (y + 1) % net.num_classes();
        let g = linear_lower_bound(&net, &ball, &empty, y, j).unwrap();
        let lo = interval_propagate(&net, &ball, &empty).unwrap().difference(&net, y, j).0;
        total += 1;
        if min_over_ball(&g, &ball) >= lo - 1e-9 {
            wins += 1;
        }
    }
    assert!(wins as f64 >= 0.95 * total as f64, "crown >= interval on {wins}/{total}");
}

#[test]
fn contains_db_no_means_no_boundary() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let tol = Tolerances::default();
    let mut checked = 0;
    for _ in 0..60 {
        let depth = rng.gen_range(2..=3);
        let widths: Vec<usize> = (0..depth).map(|_| rng.gen_range(2..=16 / depth)).collect();
        let dim = rng.gen_range(2..=3);
        let classes = rng.gen_range(2..=3);
        let net = random_net(&mut rng, dim, &widths, classes);
        let catalog = enumerate_regions(&net).unwrap();
        for _ in 0..3 {
            let x = random_point(&mut rng, dim, 1.0);
            let y = net.classify(&x).unwrap();
            for norm in NORMS {
                let ball = Ball::new(x.clone(), rng.gen_range(0.05..=1.5), norm);
                for d in 0..=net.num_hidden() {
                    let prefix = activation_pattern(&net, &x, d).unwrap();
                    if contains_db(&net, &prefix, &ball, y) != DbCheck::No {
                        continue;
                    }
                    checked += 1;
                    for p in catalog.patterns.iter().filter(|p| p.prefix(d) == prefix) {
                        let db = decision_bound(&net, p, &x, y, norm, f64::INFINITY, &tol).unwrap();
                        assert!(
                            db.distance > ball.radius - 1e-9,
                            "boundary at {} inside radius {}",
                            db.distance,
                            ball.radius
                        );
                    }
                }
            }
        }
    }
    assert!(checked > 50, "only {checked} pruned prefixes checked");
}
