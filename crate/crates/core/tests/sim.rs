use fcit_core::graph::Endpoint;
use fcit_core::sim::{
    compare_graphs, compare_to_dag, derive_seed, path_metrics, random_forward_dag, simulate_sem,
    true_pag, MetricsReport, Sem, SimSpec,
};
use fcit_core::text::from_text;
use fcit_core::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn same_seed_same_graph_and_data() {
    let spec = SimSpec::new(10, 2, 3.0, 50).with_seed(42);
    let g1 = random_forward_dag(&spec).unwrap();
    let g2 = random_forward_dag(&spec).unwrap();
    assert_eq!(g1, g2);
    let d1 = simulate_sem(&g1, &spec).unwrap();
    let d2 = simulate_sem(&g2, &spec).unwrap();
    assert_eq!(d1.names(), d2.names());
    assert_eq!(d1.values(), d2.values());
    let other = random_forward_dag(&spec.with_seed(43)).unwrap();
    assert_ne!(g1, other);
}

#[test]
fn data_covers_measured_nodes_only() {
    let spec = SimSpec::new(6, 3, 2.0, 40).with_seed(1);
    let g = random_forward_dag(&spec).unwrap();
    let d = simulate_sem(&g, &spec).unwrap();
    assert_eq!(d.n(), 40);
    assert_eq!(d.p(), 6);
    let mut names = d.names().to_vec();
    names.sort();
    let mut want = g.names_of(&g.measured());
    want.sort();
    assert_eq!(names, want);
    assert!(names.iter().all(|n| n.starts_with('X')));
}

#[test]
fn column_order_is_shuffled_across_seeds() {
    let orders: std::collections::BTreeSet<Vec<String>> = (0..10)
        .map(|s| {
            let spec = SimSpec::new(8, 0, 2.0, 5).with_seed(s);
            simulate_sem(&random_forward_dag(&spec).unwrap(), &spec)
                .unwrap()
                .names()
                .to_vec()
        })
        .collect();
    assert!(orders.len() > 1);
}

#[test]
fn infeasible_density_is_reported() {
    assert!(matches!(
        random_forward_dag(&SimSpec::new(5, 0, 10.0, 10)),
        Err(Error::InfeasibleDensity { .. })
    ));
}

#[test]
fn sampled_parameters_stay_in_range() {
    let spec = SimSpec::new(30, 5, 4.0, 10).with_seed(7);
    let g = random_forward_dag(&spec).unwrap();
    let sem = Sem::random(&g, &spec, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(sem.coefs.len(), g.edge_count());
    assert!(sem.coefs.values().all(|&c| (-1.0..=1.0).contains(&c)));
    assert!(sem.noise_var.iter().all(|&v| (1.0..=3.0).contains(&v)));
    assert!(sem.coefs.values().any(|&c| c.abs() < 0.1));
}

#[test]
fn truth_scores_perfectly_against_itself() {
    for i in 0..20 {
        let spec = SimSpec::new(10, 3, 3.0, 10).with_seed(derive_seed(2, i));
        let dag = random_forward_dag(&spec).unwrap();
        let pag = true_pag(&dag).unwrap();
        let m = compare_graphs(&pag, &pag, &dag).unwrap();
        for v in [m.ap, m.ar, m.ahp, m.ahr, m.ahpc, m.ahrc, m.tp, m.tr]
            .into_iter()
            .flatten()
        {
            assert_eq!(v, 1.0);
        }
        assert!(m.legal_pag);
        if let Some(v) = m.arrow_path_prec {
            assert_eq!(v, 1.0);
        }
        if let Some(v) = m.tail_path_prec {
            assert_eq!(v, 1.0);
        }
    }
}

#[test]
fn hand_checked_metrics() {
    let dag =
        from_text("Graph Nodes:\nA,B,C,(L)\nGraph Edges:\n1. A --> B\n2. L --> B\n3. L --> C\n")
            .unwrap();
    let truth = true_pag(&dag).unwrap();
    let est = from_text("Graph Nodes:\nC,B,A\nGraph Edges:\n1. A --> B\n2. B <-> C\n3. A o-> C\n")
        .unwrap();
    let m = compare_graphs(&est, &truth, &dag).unwrap();
    assert_eq!(m.ap, Some(2.0 / 3.0));
    assert_eq!(m.ar, Some(1.0));
    assert_eq!(m.bidir_latent_prec, Some(1.0));
    let (arrow, tail, bidir) = path_metrics(&est, &dag).unwrap();
    assert_eq!(arrow, Some(1.0));
    assert_eq!(tail, Some(1.0));
    assert_eq!(bidir, Some(1.0));
    let flipped = from_text("Graph Nodes:\nA,B,C\nGraph Edges:\n1. B --> A\n").unwrap();
    let (arrow, tail, bidir) = path_metrics(&flipped, &dag).unwrap();
    assert_eq!((arrow, tail, bidir), (Some(0.0), Some(0.0), None));
}

#[test]
fn undefined_cells_print_as_star() {
    let dag = from_text("Graph Nodes:\nA,B\nGraph Edges:\n1. A --> B\n").unwrap();
    let est = from_text("Graph Nodes:\nA,B\nGraph Edges:\n1. A o-> B\n").unwrap();
    let m = compare_to_dag(&est, &dag).unwrap();
    assert_eq!(m.bidir_latent_prec, None);
    let cells = m.cells();
    assert_eq!(cells.len(), MetricsReport::FIELDS.len());
    assert_eq!(cells[10], "*");
    assert_eq!(cells[8], "1.0000");
}

#[test]
fn mismatched_variables_are_rejected() {
    let dag = from_text("Graph Nodes:\nA,B\nGraph Edges:\n1. A --> B\n").unwrap();
    let est = from_text("Graph Nodes:\nA,Q\nGraph Edges:\n").unwrap();
    let pag = true_pag(&dag).unwrap();
    assert!(matches!(
        compare_graphs(&est, &pag, &dag),
        Err(Error::NodeSetMismatch(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn generated_graphs_meet_the_spec(m in 2usize..25, l in 0usize..6, deg in 0.0f64..5.0, seed in any::<u64>()) {
        let spec = SimSpec::new(m, l, deg, 10).with_seed(seed);
        prop_assume!(spec.validate().is_ok());
        let g = random_forward_dag(&spec).unwrap();
        prop_assert!(g.is_dag());
        prop_assert_eq!(g.edge_count(), spec.edge_target());
        prop_assert_eq!(g.latents().len(), l);
        prop_assert!(g.edges().iter().all(|e| e.end_a == Endpoint::Tail || e.end_b == Endpoint::Tail));
        let pag = true_pag(&g).unwrap();
        prop_assert_eq!(pag.node_count(), m);
    }
}
