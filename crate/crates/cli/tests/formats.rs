use decorr::data::{split_for, Recipe, Source};
use decorr::gnnb;
use decorr::output::{parse_matrix_csv, parse_study_csv, study_csv};
use decorr::sweep::{mean_std, SweepSpec};
use decorr::CliError;
use decorr_core::metrics::study::StudyPoint;
use proptest::prelude::*;
use serde_json::json;

const TWO_NODES: &str = "# gnnb 1 2 1 2 2
# features
1.5 -2
0.25 3e-3
# labels
0
1
# edges
0 1
";

#[test]
fn two_node_file_symmetrizes() {
    let ds = gnnb::parse(TWO_NODES).unwrap();
    assert_eq!(ds.graph.num_nodes(), 2);
    assert_eq!(ds.graph.num_edges(), 1);
    assert_eq!(ds.graph.adjacency().nnz(), 2);
    assert_eq!(ds.graph.features().row(1), &[0.25, 0.003]);
    assert_eq!(ds.graph.labels(), &[Some(0), Some(1)]);
    assert!(ds.split.is_none());
}

#[test]
fn duplicate_edges_collapse() {
    let text = "# gnnb 1 3 3 1 1\n# features\n0\n0\n0\n# labels\n0\n-1\n0\n# edges\n0 1\n0 1\n2 1\n";
    let ds = gnnb::parse(text).unwrap();
    assert_eq!(ds.graph.edges(), vec![(0, 1), (1, 2)]);
    assert_eq!(ds.graph.adjacency().nnz(), 4);
    assert_eq!(ds.graph.labels()[1], None);
}

#[test]
fn write_read_is_exact() {
    let recipe = Recipe::parse("sbm:sizes=30/40,p_in=0.2,p_out=0.02,dim=5,sep=1.3,train=5").unwrap();
    let ds = recipe.build(11).unwrap();
    let text = gnnb::to_string(&ds.graph, ds.split.as_ref());
    let back = gnnb::parse(&text).unwrap();
    assert_eq!(back, ds);
    assert_eq!(gnnb::to_string(&back.graph, back.split.as_ref()), text);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.gnnb");
    gnnb::write(&path, &ds.graph, None).unwrap();
    let plain = gnnb::read(&path).unwrap();
    assert_eq!(plain.graph, ds.graph);
    assert!(plain.split.is_none());
}

#[test]
fn malformed_files_are_data_errors() {
    let cases = [
        ("", "empty"),
        ("# gnnb 2 1 0 1 1\n", "version"),
        (
            "# gnnb 1 2 1 2 2\n# features\n1 2\n3\n# labels\n0 1\n# edges\n0 1\n",
            "feature width",
        ),
        ("# gnnb 1 2 1 1 2\n# features\n1\n2\n# labels\n0 2\n# edges\n0 1\n", "label range"),
        ("# gnnb 1 2 1 1 2\n# features\n1\n2\n# labels\n0 1\n# edges\n0 5\n", "node range"),
        ("# gnnb 1 2 2 1 2\n# features\n1\n2\n# labels\n0 1\n# edges\n0 1\n", "edge count"),
        ("# gnnb 1 2 1 1 2\n# features\n1\n2\n# labels\n0 1\n", "missing edges"),
        (
            "# gnnb 1 2 1 1 2\n# features\n1\n2\n# labels\n0 1\n# edges\n0 1\n# colours\n1\n",
            "unknown section",
        ),
        (
            "# gnnb 1 2 1 1 2\n# features\n1\n2\n# labels\n0 1\n# edges\n0 1\n# split val\n1\n",
            "val without train",
        ),
        (
            "# gnnb 1 2 1 1 2\n# features\n1\n2\n# labels\n0 1\n# edges\n0 1\n# split train\n0\n# split test\n0\n",
            "overlap",
        ),
    ];
    for (text, what) in cases {
        match gnnb::parse(text) {
            Err(CliError::Data(_)) => {}
            other => panic!("{what}: expected a data error, got {other:?}"),
        }
    }
}

#[test]
fn file_split_is_used_verbatim() {
    let text = format!("{TWO_NODES}# split train\n0\n# split test\n1\n");
    let ds = gnnb::parse(&text).unwrap();
    let s = split_for(&ds, 99).unwrap();
    assert_eq!((s.train, s.val, s.test), (vec![0], vec![], vec![1]));
}

#[test]
fn recipes_parse() {
    assert_eq!(
        Recipe::parse("er:n=10,p=0.5").unwrap(),
        Recipe::ErdosRenyi { n: 10, p: 0.5, dim: 100 }
    );
    let Recipe::Sbm(p) = Recipe::parse("sbm:sizes=3/4/5,p_in=0.5,p_out=0.1,dim=7,sep=2,train=2").unwrap() else {
        panic!("expected sbm");
    };
    assert_eq!(p.block_sizes, vec![3, 4, 5]);
    assert_eq!((p.p_in, p.p_out, p.dim, p.separation, p.train_per_class), (0.5, 0.1, 7, 2.0, 2));
    for bad in [
        "ws:n=3",
        "er:n=10",
        "er:n=10,p=0.5,q=1",
        "er:n=ten,p=0.5",
        "sbm:p_in=1,p_out=0",
        "er:n=10;p=1",
    ] {
        assert!(matches!(Recipe::parse(bad), Err(CliError::Usage(_))), "{bad}");
    }
}

#[test]
fn er_extremes() {
    let empty = Recipe::parse("er:n=6,p=0,dim=2").unwrap().build(0).unwrap();
    assert_eq!(empty.graph.num_edges(), 0);
    let full = Recipe::parse("er:n=4,p=1,dim=2").unwrap().build(0).unwrap();
    assert_eq!(full.graph.num_edges(), 6);
}

#[test]
fn recipes_are_seeded() {
    let r = Recipe::parse("er:n=50,p=0.1,dim=3").unwrap();
    assert_eq!(r.build(4).unwrap(), r.build(4).unwrap());
    assert_ne!(r.build(4).unwrap().graph.edges(), r.build(5).unwrap().graph.edges());
}

#[test]
fn source_resolution() {
    assert!(matches!(Source::resolve(None, None, None), Err(CliError::Usage(_))));
    let both = Source::resolve(Some("a.gnnb".as_ref()), Some("er:n=2,p=1"), None);
    assert!(matches!(both, Err(CliError::Usage(_))));

    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cora.gnnb"), TWO_NODES).unwrap();
    let src = Source::resolve(Some("cora".as_ref()), None, Some(dir.path())).unwrap();
    assert_eq!(src, Source::File(dir.path().join("cora.gnnb")));
    assert_eq!(src.load(0).unwrap().graph.num_nodes(), 2);

    let missing = Source::resolve(Some("nope".as_ref()), None, Some(dir.path())).unwrap();
    assert!(missing.load(0).is_err());
}

#[test]
fn matrix_csv() {
    let m = parse_matrix_csv("a,b\n1,0\n-0.1,1.1\n").unwrap();
    assert_eq!((m.rows(), m.cols()), (2, 2));
    assert_eq!(m.row(1), &[-0.1, 1.1]);
    let m = parse_matrix_csv("1, 2\n3, 4\n").unwrap();
    assert_eq!(m.row(0), &[1.0, 2.0]);
    assert!(parse_matrix_csv("1,2\n3\n").is_err());
    assert!(parse_matrix_csv("").is_err());
}

#[test]
fn study_csv_round_trips() {
    let points = vec![
        StudyPoint {
            variant: "full".into(),
            k: 0,
            corr_mean: Some(0.1),
            corr_std: Some(0.01),
            smv_mean: None,
            smv_std: None,
            runs: 3,
        },
        StudyPoint {
            variant: "lcc".into(),
            k: 7,
            corr_mean: None,
            corr_std: None,
            smv_mean: Some(0.3333333333333333),
            smv_std: Some(1e-17),
            runs: 0,
        },
    ];
    let text = study_csv(&points);
    assert!(text.starts_with("K,corr_mean,corr_std,smv_mean,smv_std,variant,runs\n"));
    assert_eq!(parse_study_csv(&text).unwrap(), points);
}

#[test]
fn sweep_cells_follow_the_grid() {
    let spec: SweepSpec = serde_json::from_value(json!({
        "base": {"epochs": 7, "dropout": 0.0},
        "grid": {"layers": [2, 15], "preset": ["none", "decorr"]},
        "repeats": 3,
        "seed": 10
    }))
    .unwrap();
    let cells = spec.cells().unwrap();
    assert_eq!(cells.len(), 4);
    let shape: Vec<(u64, &str)> = cells.iter().map(|c| (c.args.layers, c.args.method())).collect();
    assert_eq!(shape, vec![(2, "none"), (2, "decorr"), (15, "none"), (15, "decorr")]);
    assert!(cells.iter().all(|c| c.args.epochs == 7 && c.seeds == vec![10, 11, 12]));

    let bad: SweepSpec = serde_json::from_value(json!({"grid": {"depth": [2]}})).unwrap();
    assert!(matches!(bad.cells(), Err(CliError::Usage(_))));
    let empty: SweepSpec = serde_json::from_value(json!({"grid": {"layers": []}})).unwrap();
    assert!(empty.cells().is_err());
    assert!(serde_json::from_value::<SweepSpec>(json!({"grids": {}})).is_err());
}

#[test]
fn mean_std_examples() {
    assert_eq!(mean_std(&[0.5]), (0.5, 0.0));
    let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
    assert_eq!(m, 2.0);
    assert!((s - 1.0).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gnnb_round_trip_is_bit_exact(
        n in 1usize..12,
        d in 1usize..4,
        values in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 48),
        edges in prop::collection::vec((0usize..12, 0usize..12), 0..20),
        unlabeled in any::<u16>(),
    ) {
        let x = decorr_core::DenseMatrix::from_vec(n, d, values[..n * d].to_vec()).unwrap();
        let edges: Vec<(usize, usize)> = edges.into_iter().filter(|&(a, b)| a < n && b < n).collect();
        let labels = (0..n).map(|i| if unlabeled >> i & 1 == 1 { None } else { Some(i % 3) }).collect();
        let g = decorr_core::Graph::new(x, &edges, labels, 3).unwrap();
        let text = gnnb::to_string(&g, None);
        let back = gnnb::parse(&text).unwrap();
        prop_assert_eq!(&back.graph, &g);
        prop_assert_eq!(gnnb::to_string(&back.graph, None), text);
    }
}
