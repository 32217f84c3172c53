use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use specclust_core::geometry::{grid_discretize, sample, DensityField, Domain};
use specclust_core::math;
use specclust_core::measure::WeightedPointSet;
use specclust_core::transport::{
    hungarian, infinity_matching, matching_resolution, pushforward, tl2_distance, tl2_via_map, wasserstein2,
};

fn random_measure(rng: &mut ChaCha8Rng, m: usize, dim: usize) -> WeightedPointSet {
    let pts: Vec<f64> = (0..m * dim).map(|_| rng.random::<f64>()).collect();
    let w: Vec<f64> = (0..m).map(|_| 0.1 + rng.random::<f64>()).collect();
    let total: f64 = w.iter().sum();
    WeightedPointSet::new(dim, pts, w.iter().map(|x| x / total).collect()).unwrap()
}

fn lift(mu: &WeightedPointSet, f: &[f64]) -> WeightedPointSet {
    let d = mu.dim();
    let mut pts = Vec::new();
    for i in 0..mu.len() {
        pts.extend_from_slice(mu.point(i));
        pts.push(f[i]);
    }
    WeightedPointSet::raw(d + 1, pts, mu.weights().to_vec())
}

#[test]
fn hand_distances() {
    let a = WeightedPointSet::new(1, vec![0.0, 2.0], vec![0.5, 0.5]).unwrap();
    let b = WeightedPointSet::new(1, vec![1.0, 3.0], vec![0.5, 0.5]).unwrap();
    assert!((wasserstein2(&a, &b).unwrap().0 - 1.0).abs() < 1e-12);
    let p = WeightedPointSet::uniform(2, vec![0.0, 0.0]).unwrap();
    let q = WeightedPointSet::uniform(2, vec![3.0, 4.0]).unwrap();
    assert!((wasserstein2(&p, &q).unwrap().0 - 5.0).abs() < 1e-12);
    let (d, _) = tl2_distance(&p, &[1.0], &q, &[-1.0]).unwrap();
    assert!((d - 29f64.sqrt()).abs() < 1e-12);
}

#[test]
fn tl2_metric_axioms() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..200 {
        let ms: Vec<usize> = (0..3).map(|_| rng.random_range(1..=8)).collect();
        let measures: Vec<WeightedPointSet> = ms.iter().map(|&m| random_measure(&mut rng, m, 2)).collect();
        let fs: Vec<Vec<f64>> = ms.iter().map(|&m| (0..m).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()).collect();
        let d = |a: usize, b: usize| tl2_distance(&measures[a], &fs[a], &measures[b], &fs[b]).unwrap().0;
        let (ab, ba, bc, ac) = (d(0, 1), d(1, 0), d(1, 2), d(0, 2));
        assert!((ab - ba).abs() <= 1e-10, "{ab} {ba}");
        assert!(ac <= ab + bc + 1e-9);
        assert!(d(0, 0) <= 1e-9);
    }
}

#[test]
fn tl2_via_map_bounds_exact_distance() {
    let rho = DensityField::uniform(Domain::unit(2).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for t in 0..50 {
        let n = 16 + (t % 5) * 9;
        let cloud = sample(&rho, n, 300 + t as u64).unwrap();
        let nu = WeightedPointSet::uniform(2, cloud.coords().to_vec()).unwrap();
        let grid = grid_discretize(&rho, &matching_resolution(n, 2)).unwrap();
        let map = infinity_matching(&grid, &nu).unwrap();
        let f: Vec<f64> = (0..grid.len()).map(|_| rng.random::<f64>()).collect();
        let g: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let via = tl2_via_map(&map, &f, &g, &nu).unwrap();
        let src = map.source_measure();
        let fa: Vec<f64> = map.cells.iter().map(|&c| f[c]).collect();
        let (exact, _) = tl2_distance(&src, &fa, &nu, &g).unwrap();
        assert!(via >= exact - 1e-9, "{via} < {exact}");
        // f = g ∘ T gives the displacement-only cost
        let fg: Vec<f64> = {
            let mut v = vec![0.0; grid.len()];
            for a in 0..map.len() {
                v[map.cells[a]] = g[map.targets[a]];
            }
            v
        };
        if map.cells.windows(2).all(|w| w[0] != w[1]) {
            let only = tl2_via_map(&map, &fg, &g, &nu).unwrap();
            assert!(only <= map.sup_displacement + 1e-12);
        }
    }
}

#[test]
fn hungarian_matches_permutations() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for k in 1..=4 {
        for _ in 0..30 {
            let cost: Vec<f64> = (0..k * k).map(|_| rng.random::<f64>()).collect();
            let (assign, total) = hungarian(k, &cost).unwrap();
            let check: f64 = (0..k).map(|r| cost[r * k + assign[r]]).sum();
            assert!((check - total).abs() < 1e-12);
            let mut perm: Vec<usize> = (0..k).collect();
            let mut best = f64::INFINITY;
            permute(&mut perm, 0, &mut |p| {
                best = best.min((0..k).map(|r| cost[r * k + p[r]]).sum());
            });
            assert!(total <= best + 1e-12);
        }
    }
}

fn permute(p: &mut Vec<usize>, i: usize, f: &mut dyn FnMut(&[usize])) {
    if i == p.len() {
        f(p);
        return;
    }
    for j in i..p.len() {
        p.swap(i, j);
        permute(p, i + 1, f);
        p.swap(i, j);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn tl2_equals_lifted_wasserstein(seed in any::<u64>(), m1 in 1usize..12, m2 in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mu = random_measure(&mut rng, m1, 2);
        let th = random_measure(&mut rng, m2, 2);
        let f: Vec<f64> = (0..m1).map(|_| rng.random::<f64>()).collect();
        let g: Vec<f64> = (0..m2).map(|_| rng.random::<f64>()).collect();
        let (d, plan) = tl2_distance(&mu, &f, &th, &g).unwrap();
        let (w, _) = wasserstein2(&lift(&mu, &f), &lift(&th, &g)).unwrap();
        prop_assert!((d - w).abs() < 1e-10);
        prop_assert!(plan.marginal_error(mu.weights(), th.weights()) < 1e-9);
        prop_assert!(plan.entries.iter().all(|e| e.2 >= 0.0));
    }

    #[test]
    fn pushforward_change_of_variables(seed in any::<u64>(), m in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mu = random_measure(&mut rng, m, 2);
        // a map with deliberate collisions
        let images: Vec<f64> = (0..m).flat_map(|i| {
            let p = mu.point(i);
            [math::round(p[0] * 4.0) / 4.0, p[0] * p[1]]
        }).collect();
        let pf = pushforward(&mu, &images, 2).unwrap();
        prop_assert!((pf.total_mass() - 1.0).abs() < 1e-12);
        for _ in 0..20 {
            let c: Vec<f64> = (0..6).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let phi = |x: &[f64]| c[0] + c[1] * x[0] + c[2] * x[1] + c[3] * x[0] * x[1] + c[4] * x[0].powi(3) + c[5] * x[1].powi(2);
            let lhs: f64 = (0..pf.len()).map(|j| pf.weights()[j] * phi(pf.point(j))).sum();
            let rhs: f64 = (0..m).map(|i| mu.weights()[i] * phi(&images[2 * i..2 * i + 2])).sum();
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }
        let single = pushforward(&mu, &vec![0.5; m], 1).unwrap();
        prop_assert_eq!(single.len(), 1);
    }
}
