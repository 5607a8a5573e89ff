use compsearch::archive::{dominates, ArchiveRecord, ParetoArchive};
use compsearch::costmodel::{compressed_cost, CostMetric};
use compsearch::evaluator::protocol::{decode_request, encode_request, Request};
use compsearch::evaluator::{surrogate_accuracy, SurrogateModel};
use compsearch::genetic::{crossover, mutate, pair_parents, select, GaConfig};
use compsearch::genotype::{
    build_search_space, clamp_to_domain, decode, dequantize_rank, GeneDomain, Individual,
    LayerSpec, Method, ModelArch, SearchSpace,
};
use compsearch::scoring::{fitness, pen_acc, selection_probs, Accuracy};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mixed_space() -> SearchSpace {
    let arch = ModelArch::new(
        "mixed",
        vec![
            LayerSpec::conv(3, 3, 32, 16, 16).unwrap(),
            LayerSpec::depthwise(3, 32, 16, 16).unwrap(),
            LayerSpec::pointwise(32, 64, 16, 16).unwrap(),
            LayerSpec::conv(3, 64, 64, 8, 8).unwrap(),
            LayerSpec::fully_connected(4096, 10).unwrap(),
        ],
    )
    .unwrap();
    build_search_space(
        &arch,
        &[Method::StructuredPruning, Method::Svd, Method::Tucker2],
    )
    .unwrap()
}

fn individual(space: &SearchSpace) -> impl Strategy<Value = Individual> {
    let genes: Vec<BoxedStrategy<f64>> = space
        .genes()
        .iter()
        .map(|g| match g.domain {
            GeneDomain::Continuous => (0.0f64..=1.0).boxed(),
            GeneDomain::Discrete { max } => (1..=max).prop_map(|v| v as f64).boxed(),
        })
        .collect();
    let space = space.clone();
    genes.prop_map(move |v| Individual::new(&space, v).unwrap())
}

fn raw_vector(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, d)
}

proptest! {
    #[test]
    fn clamp_is_idempotent_and_in_domain(raw in raw_vector(11)) {
        let space = mixed_space();
        let once = clamp_to_domain(&space, &raw).unwrap();
        space.check(once.values()).unwrap();
        let twice = clamp_to_domain(&space, once.values()).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn decode_is_deterministic_and_valid(x in individual(&mixed_space())) {
        let space = mixed_space();
        let a = decode(&space, &x).unwrap();
        let b = decode(&space, &x).unwrap();
        prop_assert_eq!(&a, &b);
        a.validate(space.arch()).unwrap();
    }

    #[test]
    fn dequantize_is_monotone_and_bounded(full in 1u64..5000, bins in 1u32..128) {
        let mut prev = 0;
        for bin in 0..=bins {
            let r = dequantize_rank(bin, bins, full);
            prop_assert!(r >= 1 && r <= full.max(1));
            prop_assert!(r >= prev);
            prev = r;
        }
        prop_assert_eq!(dequantize_rank(bins, bins, full), full);
    }

    #[test]
    fn more_compression_never_costs_more(x in individual(&mixed_space()), gene in 0usize..11, metric in prop_oneof![Just(CostMetric::Flops), Just(CostMetric::Params)]) {
        let space = mixed_space();
        let mut y = x.values().to_vec();
        match space.gene(gene).domain {
            GeneDomain::Continuous => y[gene] = (y[gene] + 0.25).min(1.0),
            GeneDomain::Discrete { .. } => y[gene] = (y[gene] - 1.0).max(1.0),
        }
        let y = Individual::new(&space, y).unwrap();
        let cx = compressed_cost(space.arch(), &decode(&space, &x).unwrap(), metric).unwrap();
        let cy = compressed_cost(space.arch(), &decode(&space, &y).unwrap(), metric).unwrap();
        prop_assert!(cy.total <= cx.total, "{} > {}", cy.total, cx.total);
        prop_assert!(cx.total <= cx.original_total);
        prop_assert_eq!(cx.per_layer.iter().sum::<u64>(), cx.total);
    }

    #[test]
    fn surrogate_is_monotone(x in individual(&mixed_space()), gene in 0usize..11) {
        let space = mixed_space();
        let model = SurrogateModel::new(91.0, (0..11).map(|i| 1.0 + i as f64).collect());
        let mut y = x.values().to_vec();
        match space.gene(gene).domain {
            GeneDomain::Continuous => y[gene] = (y[gene] + 0.1).min(1.0),
            GeneDomain::Discrete { .. } => y[gene] = (y[gene] - 1.0).max(1.0),
        }
        let y = Individual::new(&space, y).unwrap();
        let ax = surrogate_accuracy(&model, &space, &x).unwrap().value();
        let ay = surrogate_accuracy(&model, &space, &y).unwrap().value();
        prop_assert!(ay <= ax);
    }

    #[test]
    fn log_fitness_is_gain_minus_log_penalty(dc in -1.0f64..1.0, orig in 50.0f64..100.0, drop in 0.0f64..50.0, thr in 0.0f64..50.0) {
        let p = pen_acc(Accuracy::new(orig).unwrap(), Accuracy::new(orig - drop).unwrap(), Accuracy::new(thr).unwrap());
        prop_assert!(p >= 1e-3);
        let f = fitness(dc, p);
        prop_assert!((f.ln() - (dc - p.ln())).abs() < 1e-12);
    }

    #[test]
    fn penalty_decreases_on_each_branch(a in 0.0f64..99.0, step in 0.01f64..1.0) {
        let (orig, thr) = (Accuracy::new(100.0).unwrap(), Accuracy::new(60.0).unwrap());
        let b = a + step;
        let same_branch = (a < 60.0) == (b < 60.0);
        let pa = pen_acc(orig, Accuracy::new(a).unwrap(), thr);
        let pb = pen_acc(orig, Accuracy::new(b).unwrap(), thr);
        if same_branch {
            prop_assert!(pb < pa);
        }
        if a < 60.0 {
            let excess = pa - (100.0 - a);
            prop_assert!((excess - (60.0 - a).exp()).abs() <= 1e-9 * excess);
        }
    }

    #[test]
    fn selection_probs_normalize(f in prop::collection::vec(0.0f64..1e3, 2..60)) {
        let p = selection_probs(&f).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&v| v >= 0.0));
        let argmax = |v: &[f64]| v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        prop_assert_eq!(p[argmax(&p)], p[argmax(&f)]);
    }

    #[test]
    fn crossover_only_exchanges_values(a in individual(&mixed_space()), b in individual(&mixed_space()), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c1, c2) = crossover(&a, &b, &GaConfig::default(), &mut rng);
        for i in 0..a.len() {
            let same = c1[i] == a[i] && c2[i] == b[i];
            let swapped = c1[i] == b[i] && c2[i] == a[i];
            prop_assert!(same || swapped);
        }
    }

    #[test]
    fn one_cycle_keeps_size_and_domain(pop in prop::collection::vec(individual(&mixed_space()), 10), fit in prop::collection::vec(0.0f64..10.0, 10), seed in any::<u64>(), p_m in 0.0f64..=1.0) {
        let space = mixed_space();
        let cfg = GaConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picks = select(&fit, &mut rng).unwrap();
        let sel: Vec<Individual> = picks.iter().map(|&i| pop[i].clone()).collect();
        let sel_fit: Vec<f64> = picks.iter().map(|&i| fit[i]).collect();
        let mut next = Vec::new();
        for (i, j) in pair_parents(&sel, &sel_fit, &space).unwrap() {
            let (c1, c2) = crossover(&sel[i], &sel[j], &cfg, &mut rng);
            next.push(mutate(&c1, &space, p_m, &cfg, &mut rng));
            next.push(mutate(&c2, &space, p_m, &cfg, &mut rng));
        }
        prop_assert_eq!(next.len(), 10);
        for x in &next {
            space.check(x.values()).unwrap();
        }
    }

    #[test]
    fn archive_is_mutually_non_dominated(recs in prop::collection::vec((0u32..20, 0u64..20), 1..80)) {
        let mut archive = ParetoArchive::new();
        for &(a, c) in &recs {
            archive.offer(record(a as f64, c));
        }
        let members = archive.records();
        for m in members {
            for n in members {
                prop_assert!(!dominates(m.accuracy, m.cost, n.accuracy, n.cost));
            }
        }
        for &(a, c) in &recs {
            let covered = members.iter().any(|m| (m.accuracy == a as f64 && m.cost == c) || dominates(m.accuracy, m.cost, a as f64, c));
            prop_assert!(covered);
        }
    }

    #[test]
    fn request_roundtrip(x in individual(&mixed_space()), id in any::<u64>()) {
        let space = mixed_space();
        let req = Request { id, spec: decode(&space, &x).unwrap(), arch: "mixed".into() };
        let line = encode_request(&req);
        prop_assert!(!line.contains('\n'));
        let back = decode_request(&line).unwrap();
        prop_assert_eq!(&back, &req);
        prop_assert_eq!(encode_request(&back), line);
    }
}

fn record(acc: f64, cost: u64) -> ArchiveRecord {
    ArchiveRecord {
        genotype: serde_json::from_str("[]").unwrap(),
        accuracy: acc,
        cost,
        delta_c: 0.0,
        fitness: 0.0,
    }
}
