use proptest::prelude::*;
use specclust_core::geometry::{
    empirical_measure, grid_discretize, sample, DensityField, DensityKind, Domain,
};

fn affine() -> DensityField {
    DensityField::new(DensityKind::Affine { c0: 1.0, slope: vec![1.0] }, Domain::unit(1).unwrap()).unwrap()
}

#[test]
fn uniform_sample_passes_chi_square() {
    let rho = DensityField::uniform(Domain::unit(2).unwrap());
    let n = 100_000;
    let cloud = sample(&rho, n, 11).unwrap();
    let bins = 10;
    let mut counts = vec![0usize; bins * bins];
    for i in 0..n {
        let p = cloud.point(i);
        let a = ((p[0] * bins as f64) as usize).min(bins - 1);
        let b = ((p[1] * bins as f64) as usize).min(bins - 1);
        counts[a * bins + b] += 1;
    }
    let expected = n as f64 / (bins * bins) as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // upper 0.001 quantile of chi-square with 99 degrees of freedom
    assert!(chi2 < 148.23, "chi2 = {chi2}");
}

#[test]
fn affine_sample_mean() {
    let cloud = sample(&affine(), 100_000, 1).unwrap();
    let mean: f64 = cloud.coords().iter().sum::<f64>() / 100_000.0;
    assert!((mean - 5.0 / 9.0).abs() < 0.01, "{mean}");
}

#[test]
fn grid_weights_examples() {
    let g = grid_discretize(&affine(), &[2]).unwrap();
    assert!((g.weights()[0] - 5.0 / 12.0).abs() < 1e-12);
    assert!((g.weights()[1] - 7.0 / 12.0).abs() < 1e-12);
    let u = grid_discretize(&DensityField::uniform(Domain::unit(1).unwrap()), &[4]).unwrap();
    assert!(u.weights().iter().all(|w| (w - 0.25).abs() < 1e-15));
    assert!(grid_discretize(&affine(), &[1]).is_err());
}

#[test]
fn refinement_changes_region_mass_by_spacing() {
    let rho = DensityField::new(
        DensityKind::GaussianBumps { centers: vec![vec![0.3, 0.6]], width: 0.2, floor: 0.2 },
        Domain::unit(2).unwrap(),
    )
    .unwrap();
    // mass of [0, 0.5]² at resolution r and 2r
    let region = |r: usize| {
        let g = grid_discretize(&rho, &[r, r]).unwrap();
        (0..g.len()).filter(|&c| g.cell_center(c).iter().all(|x| *x < 0.5)).map(|c| g.weights()[c]).sum::<f64>()
    };
    for r in [8, 16, 32] {
        let diff = (region(r) - region(2 * r)).abs();
        assert!(diff < 2.0 / r as f64, "r = {r}: {diff}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sampling_is_deterministic_and_contained(n in 1usize..300, seed in any::<u64>(), d in 1usize..4) {
        let lower: Vec<f64> = (0..d).map(|a| -0.5 * a as f64).collect();
        let upper: Vec<f64> = (0..d).map(|a| 1.0 + 0.25 * a as f64).collect();
        let rho = DensityField::new(
            DensityKind::Affine { c0: 2.0, slope: vec![1.0; d] },
            Domain::new(lower, upper).unwrap(),
        ).unwrap();
        let a = sample(&rho, n, seed).unwrap();
        let b = sample(&rho, n, seed).unwrap();
        prop_assert_eq!(a.coords(), b.coords());
        for i in 0..n {
            prop_assert!(rho.domain().contains(a.point(i)));
        }
        let m = empirical_measure(&a);
        prop_assert!((m.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_weights_sum_to_one(r0 in 2usize..30, r1 in 2usize..30, width in 0.05f64..0.5, floor in 0.01f64..1.0) {
        let rho = DensityField::new(
            DensityKind::GaussianBumps { centers: vec![vec![0.2, 0.7], vec![0.9, 0.1]], width, floor },
            Domain::unit(2).unwrap(),
        ).unwrap();
        let g = grid_discretize(&rho, &[r0, r1]).unwrap();
        prop_assert!(g.weights().iter().all(|w| *w >= 0.0));
        prop_assert!((g.weights().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for c in 0..g.len() {
            let v = rho.eval(&g.cell_center(c));
            prop_assert!(v >= rho.lower_bound() * (1.0 - 1e-12) && v <= rho.upper_bound() * (1.0 + 1e-12));
        }
    }
}
