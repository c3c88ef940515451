#![allow(clippy::needless_range_loop)]

mod common;

use common::{random_gaps, random_graph, subsets};
use dispatch_core::fixtures::{toy_gaps, toy_graph};
use dispatch_core::graph::full_distance_matrix;
use dispatch_core::relocation::{
    brute_force_centers, multi_restart_search, objective, restart_seeds, search_centers,
    CenterProblem, CenterUpdate, BRUTE_FORCE_CAP,
};
use dispatch_core::{ActivationKind, DistanceMatrix, Partition, VertexId};
use proptest::prelude::*;

fn ids(v: &[u32]) -> Vec<VertexId> {
    v.iter().map(|&i| VertexId(i)).collect()
}

fn kind_strategy() -> impl Strategy<Value = ActivationKind> {
    prop::sample::select(ActivationKind::ALL.to_vec())
}

fn check_partition(p: &Partition, n: usize) {
    assert_eq!(p.validate(n), Ok(()));
    for (j, c) in p.centers.iter().enumerate() {
        assert_eq!(p.assignment[c.index()] as usize, j);
    }
}

#[test]
fn toy_table_values() {
    let g = toy_graph();
    let dm = full_distance_matrix(&g, 0);
    let gaps = toy_gaps();
    let pairs = [
        ([0, 1], 11, 3),
        ([0, 2], 13, 2),
        ([0, 3], 10, -11),
        ([1, 2], 7, 7),
        ([1, 3], 9, 4),
        ([2, 3], 11, -6),
    ];
    for (c, ignore, identity) in pairs {
        let c = ids(&c);
        assert_eq!(
            objective(&dm, &c, &gaps, ActivationKind::Ignore).unwrap(),
            (ignore * 60) as f64
        );
        assert_eq!(
            objective(&dm, &c, &gaps, ActivationKind::Identity).unwrap(),
            (identity * 60) as f64
        );
    }
    let best = brute_force_centers(&g, 2, &gaps, ActivationKind::Identity, 0).unwrap();
    assert_eq!((best.centers, best.objective), (ids(&[0, 3]), -660.0));
    let best = brute_force_centers(&g, 2, &gaps, ActivationKind::Ignore, 0).unwrap();
    assert_eq!((best.centers, best.objective), (ids(&[1, 2]), 420.0));
}

#[test]
fn toy_exhaustive_starts_and_restarts_find_minimum() {
    let g = toy_graph();
    let dm = full_distance_matrix(&g, 0);
    let problem = CenterProblem::new(&dm, &toy_gaps(), ActivationKind::Identity).unwrap();
    let best = subsets(4, 2)
        .iter()
        .map(|init| problem.search_from(init, 0).unwrap().partition.objective)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(best, -660.0);
    let p = multi_restart_search(
        &g,
        2,
        &toy_gaps(),
        ActivationKind::Identity,
        &restart_seeds(1, 8),
        0,
    )
    .unwrap();
    assert_eq!(p.objective, -660.0);
    let mut sorted = p.centers.clone();
    sorted.sort();
    assert_eq!(sorted, ids(&[0, 3]));
}

#[test]
fn k_equal_n_converges_immediately() {
    let g = toy_graph();
    let dm = full_distance_matrix(&g, 0);
    let problem = CenterProblem::new(&dm, &toy_gaps(), ActivationKind::Relu).unwrap();
    let run = problem.search(4, 3).unwrap();
    assert_eq!(run.partition.objective, 0.0);
    assert_eq!(run.partition.iterations, 1);
    assert_eq!(
        brute_force_centers(&g, 4, &toy_gaps(), ActivationKind::Sigmoid, 0)
            .unwrap()
            .objective,
        0.0
    );
}

#[test]
fn single_restart_equals_single_search() {
    let g = random_graph(11, 10, 15, 60);
    let gaps = random_gaps(11, 10);
    let one = multi_restart_search(&g, 3, &gaps, ActivationKind::Relu, &[42], 0).unwrap();
    let run = search_centers(&g, 3, &gaps, ActivationKind::Relu, 42, 0).unwrap();
    assert_eq!(one, run);
}

/// Per-vertex scan: centers own themselves, everyone else takes the first
/// center with the smallest signed product.
fn assignment_oracle(dm: &DistanceMatrix, centers: &[VertexId], w: &[f64]) -> (Vec<u32>, f64) {
    let n = w.len();
    let mut out = Vec::new();
    let mut total = 0.0;
    for v in 0..n {
        if let Some(j) = centers.iter().position(|c| c.index() == v) {
            out.push(j as u32);
            continue;
        }
        let products: Vec<f64> = centers
            .iter()
            .map(|&c| dm.get(c, VertexId::from_index(v)) * w[v])
            .collect();
        let min = products.iter().cloned().fold(f64::INFINITY, f64::min);
        out.push(products.iter().position(|&p| p == min).unwrap() as u32);
        total += min;
    }
    (out, total)
}

/// Candidate scan per subarea in index order: skip candidates already
/// chosen, keep the incumbent unless something is strictly cheaper.
fn update_oracle(dm: &DistanceMatrix, p: &Partition, w: &[f64], weighted: bool) -> Vec<VertexId> {
    let n = w.len();
    let mut taken: Vec<VertexId> = Vec::new();
    for (j, members) in p.subareas().iter().enumerate() {
        let inc = p.centers[j];
        let cost = |x: VertexId| -> f64 {
            members
                .iter()
                .map(|&v| dm.get(x, v) * if weighted { w[v.index()] } else { 1.0 })
                .sum()
        };
        if members.is_empty() {
            taken.push(inc);
            continue;
        }
        let mut cands: Vec<(f64, bool, VertexId)> = (0..n)
            .map(VertexId::from_index)
            .filter(|x| !taken.contains(x))
            .map(|x| (cost(x), x != inc, x))
            .collect();
        let best = cands.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
        cands.retain(|c| c.0 == best);
        cands.sort_by(|a, b| a.1.cmp(&b.1).then(a.2.cmp(&b.2)));
        taken.push(cands[0].2);
    }
    taken
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn descent_is_monotone_and_stops_at_a_fixed_point(
        seed in any::<u64>(), n in 2usize..=12, k in 1usize..=4, kind in kind_strategy(),
    ) {
        let k = k.min(n);
        let g = random_graph(seed, n, 2 * n, 30);
        let dm = full_distance_matrix(&g, 0);
        let gaps = random_gaps(seed, n);
        let problem = CenterProblem::new(&dm, &gaps, kind).unwrap();
        let run = problem.search(k, seed).unwrap();
        for w in run.trace.windows(2) {
            prop_assert!(w[1] < w[0]);
        }
        prop_assert_eq!(*run.trace.last().unwrap(), run.partition.objective);
        prop_assert!(run.partition.iterations < 10_000);
        check_partition(&run.partition, n);
        let again = problem.search_from(&run.partition.centers, seed).unwrap();
        prop_assert_eq!(&again.partition.centers, &run.partition.centers);
        prop_assert_eq!(again.partition.objective, run.partition.objective);
        prop_assert_eq!(again.trace.len(), 1);
    }

    #[test]
    fn exhaustive_starts_reach_the_brute_force_optimum(
        seed in any::<u64>(), n in 2usize..=8, k in 1usize..=3, kind in kind_strategy(),
    ) {
        let k = k.min(n);
        let g = random_graph(seed, n, n, 30);
        let dm = full_distance_matrix(&g, 0);
        let gaps = random_gaps(seed, n);
        let problem = CenterProblem::new(&dm, &gaps, kind).unwrap();
        let exact = problem.brute_force(k, BRUTE_FORCE_CAP).unwrap();
        let best = subsets(n, k)
            .iter()
            .map(|init| problem.search_from(init, 0).unwrap().partition.objective)
            .fold(f64::INFINITY, f64::min);
        prop_assert_eq!(best, exact.objective);
        let min_scan = subsets(n, k)
            .iter()
            .map(|c| problem.objective(c).unwrap())
            .fold(f64::INFINITY, f64::min);
        prop_assert_eq!(exact.objective, min_scan);
    }

    #[test]
    fn assignment_matches_per_vertex_scan(seed in any::<u64>(), k in 1usize..=4, kind in kind_strategy()) {
        let g = random_graph(seed, 8, 10, 30);
        let dm = full_distance_matrix(&g, 0);
        let gaps = random_gaps(seed, 8);
        let problem = CenterProblem::new(&dm, &gaps, kind).unwrap();
        let centers = problem.random_centers(k, seed).unwrap();
        let p = problem.assign(&centers).unwrap();
        let (assignment, total) = assignment_oracle(&dm, &centers, problem.weights());
        prop_assert_eq!(&p.assignment, &assignment);
        prop_assert!((p.objective - total).abs() <= 1e-9 * total.abs().max(1.0));
    }

    #[test]
    fn center_update_matches_candidate_scan(
        seed in any::<u64>(), k in 1usize..=4, kind in kind_strategy(), weighted in any::<bool>(),
    ) {
        let g = random_graph(seed, 8, 10, 30);
        let dm = full_distance_matrix(&g, 0);
        let gaps = random_gaps(seed, 8);
        let update = if weighted { CenterUpdate::Weighted } else { CenterUpdate::Unweighted };
        let problem = CenterProblem::new(&dm, &gaps, kind).unwrap().with_update(update);
        let p = problem.assign(&problem.random_centers(k, seed).unwrap()).unwrap();
        let got = problem.update_centers(&p);
        prop_assert_eq!(got, update_oracle(&dm, &p, problem.weights(), weighted));
    }

    #[test]
    fn ignore_objective_is_unweighted_kmedoids_cost(seed in any::<u64>(), k in 1usize..=4) {
        let g = random_graph(seed, 9, 9, 30);
        let dm = full_distance_matrix(&g, 0);
        let gaps = random_gaps(seed, 9);
        let problem = CenterProblem::new(&dm, &gaps, ActivationKind::Ignore).unwrap();
        for c in subsets(9, k).iter().step_by(7) {
            let want: f64 = g
                .vertices()
                .map(|v| c.iter().map(|&ci| dm.get(ci, v)).fold(f64::INFINITY, f64::min))
                .sum();
            prop_assert_eq!(problem.objective(c).unwrap(), want);
        }
    }

    #[test]
    fn restart_order_does_not_matter(seed in any::<u64>(), k in 1usize..=4) {
        let g = random_graph(seed, 10, 12, 30);
        let gaps = random_gaps(seed, 10);
        let seeds = restart_seeds(seed, 6);
        let mut shuffled = seeds.clone();
        shuffled.reverse();
        shuffled.swap(0, 3);
        let a = multi_restart_search(&g, k, &gaps, ActivationKind::Relu, &seeds, 0).unwrap();
        let b = multi_restart_search(&g, k, &gaps, ActivationKind::Relu, &shuffled, 0).unwrap();
        prop_assert_eq!(a.objective, b.objective);
        prop_assert_eq!(a.centers, b.centers);
    }
}
