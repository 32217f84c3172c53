use proptest::prelude::*;
use specclust::io;
use specclust::report::{self, medians, parse_records, records_to_csv};
use specclust::sweep::SweepRecord;
use specclust::ExperimentConfig;
use specclust_core::geometry::{grid_discretize, sample, DensityField, Domain};
use specclust_core::graph::build_graph;
use specclust_core::kernel::RadialKernel;
use specclust_core::math;

fn record(n: usize, seed: u64, k_index: usize, x: f64) -> SweepRecord {
    SweepRecord {
        n,
        seed,
        eps: 0.1,
        kind: "sym".into(),
        k_index,
        eigenvalue: x,
        rescaled: 2.0 * x,
        reference: 2.5,
        rel_error: (k_index > 1).then_some((2.0 * x - 2.5).abs() / 2.5),
        subspace_tl2: (k_index > 1).then_some(x / 10.0),
        cluster_w2_total: None,
        components: 1,
        wall_ms: 0,
    }
}

#[test]
fn single_record_gives_header_and_one_row() {
    let csv = records_to_csv(&[record(100, 0, 2, 1.25)]).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(
        lines[0],
        "n,seed,eps,kind,k_index,eigenvalue,rescaled,reference,rel_error,subspace_tl2,cluster_w2_total,components,wall_ms"
    );
    assert!(lines[1].ends_with(",,1,0"));
    assert!(records_to_csv(&[]).is_err());
}

#[test]
fn medians_match_recomputation_from_csv() {
    let mut recs = Vec::new();
    for (s, x) in [0.3, 1.7, 0.9, 2.2, 1.1].iter().enumerate() {
        for k in 1..=3 {
            recs.push(record(500, s as u64, k, x * k as f64));
            recs.push(record(1000, s as u64, k, x * k as f64 + 0.01));
        }
    }
    let parsed = parse_records(&records_to_csv(&recs).unwrap()).unwrap();
    for row in medians(&recs) {
        let col: Vec<f64> = parsed.iter().filter(|r| r.n == row.n && r.k_index == row.k_index).map(|r| r.rescaled).collect();
        assert_eq!(row.trials, 5);
        assert_eq!(row.rescaled, Some(math::median(&col)));
        if row.k_index == 1 {
            assert_eq!(row.rel_error, None);
        }
    }
}

#[test]
fn svg_plots_are_well_formed() {
    let svg = report::loglog_svg("t", "y", &[("a".into(), vec![(100.0, 0.5), (1000.0, 0.05)]), ("b".into(), vec![(100.0, 0.0)])]);
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<polyline").count(), 1);
    assert!(report::loglog_svg("t", "y", &[]).contains("no data"));
}

#[test]
fn artifact_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cloud = sample(&DensityField::uniform(Domain::unit(2).unwrap()), 50, 3).unwrap();
    let p = dir.path().join("cloud.csv");
    io::write_cloud(&p, &cloud).unwrap();
    assert_eq!(io::read_cloud(&p).unwrap().coords(), cloud.coords());

    let g = build_graph(&cloud, &RadialKernel::Indicator, 0.3).unwrap();
    let p = dir.path().join("g.txt");
    io::write_graph(&p, &g).unwrap();
    let t = io::read_graph(&p).unwrap();
    assert_eq!(t, g.triplets().collect::<Vec<_>>());
    assert!(t.iter().all(|&(i, j, _)| i <= j));

    let header = io::EigenHeader { n: 3, eps: 0.2, kind: "rw".into(), values: vec![0.0, 1.5], rescaled: vec![0.0, 75.0], residuals: vec![1e-12, 2e-12] };
    let vecs = vec![vec![1.0, 1.0, 1.0], vec![0.1, -0.2, 1.0 / 3.0]];
    let p = dir.path().join("e.csv");
    io::write_eigenpairs(&p, &header, &vecs).unwrap();
    assert_eq!(io::read_eigenpairs(&p).unwrap(), (header, vecs));

    let labels = vec![Some(0), None, Some(1), Some(0)];
    let p = dir.path().join("a.csv");
    io::write_assignments(&p, &labels).unwrap();
    assert_eq!(io::read_assignments(&p).unwrap(), labels);

    let grid = grid_discretize(&DensityField::uniform(Domain::unit(1).unwrap()), &[4]).unwrap();
    let p = dir.path().join("grid.csv");
    io::write_grid_values(&p, &grid, &[vec![1.0, 2.0, 3.0, 4.0]]).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert_eq!(text.lines().next().unwrap(), "x1,weight,f1");
    assert_eq!(text.lines().count(), 5);

    std::fs::write(dir.path().join("bad.txt"), "0 1\n").unwrap();
    assert!(io::read_graph(&dir.path().join("bad.txt")).is_err());
}

#[test]
fn shipped_configs_load() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in std::fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 4);
}

fn arb_opt() -> impl Strategy<Value = Option<f64>> {
    prop_oneof![Just(None), (-1e6f64..1e6).prop_map(Some), (1e-300f64..1e-290).prop_map(Some)]
}

proptest! {
    #[test]
    fn csv_round_trip(
        rows in prop::collection::vec(
            (1usize..100_000, any::<u64>(), 1e-6f64..1.0, 1usize..10, -1e3f64..1e3, arb_opt(), arb_opt(), arb_opt(), 0usize..5, any::<u32>()),
            1..20,
        )
    ) {
        let recs: Vec<SweepRecord> = rows
            .into_iter()
            .map(|(n, seed, eps, k, x, a, b, c, comp, ms)| SweepRecord {
                n, seed, eps, kind: "unnormalized".into(), k_index: k, eigenvalue: x, rescaled: x * 3.0,
                reference: x / 7.0, rel_error: a, subspace_tl2: b, cluster_w2_total: c, components: comp, wall_ms: ms as u64,
            })
            .collect();
        let parsed = parse_records(&records_to_csv(&recs).unwrap()).unwrap();
        prop_assert_eq!(parsed, recs);
    }
}
