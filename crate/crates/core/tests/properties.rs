mod common;

use common::{max_abs_diff, mean_rows, separated_star};
use opinion_sim::config::{parse_config, ControllerGroup, OutputConfig, OutputFormat, RunConfig};
use opinion_sim::controllers::{apply_popular, apply_strategic, ControllerSpec};
use opinion_sim::engine::{SimConfig, StabilityCriterion};
use opinion_sim::matrix::{
    renorm_hadamard_power, row_diff_matrix, row_normalize, row_similarity_matrix, DenseMatrix,
    NormEps,
};
use opinion_sim::network::{
    edge_probabilities, opinion_step, resample_edges, weight_matrix, AdjacencyMatrix, EdgeParams,
    OpinionMatrix, RngStream, Role,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const EPS: NormEps = NormEps::DEFAULT;

fn matrix(
    rows: std::ops::RangeInclusive<usize>,
    cols: std::ops::RangeInclusive<usize>,
) -> impl Strategy<Value = DenseMatrix> {
    (rows, cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(0.0f64..=1.0, r * c)
            .prop_map(move |v| DenseMatrix::from_vec(r, c, v).unwrap())
    })
}

fn opinions_and_graph() -> impl Strategy<Value = (OpinionMatrix, AdjacencyMatrix)> {
    (2usize..=12, 1usize..=5).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(0.0f64..=1.0, n * m),
            prop::collection::vec(any::<bool>(), n * (n - 1) / 2),
        )
            .prop_map(move |(x, bits)| {
                let x = OpinionMatrix::new(DenseMatrix::from_vec(n, m, x).unwrap()).unwrap();
                let mut a = AdjacencyMatrix::empty(n);
                let mut it = bits.into_iter();
                for i in 0..n {
                    for j in (i + 1)..n {
                        a.set(i, j, it.next().unwrap());
                    }
                }
                (x, a)
            })
    })
}

fn hull_contains(rows: &[&[f64]], v: &[f64]) -> bool {
    (0..v.len()).all(|c| {
        let lo = rows.iter().map(|r| r[c]).fold(f64::INFINITY, f64::min);
        let hi = rows.iter().map(|r| r[c]).fold(f64::NEG_INFINITY, f64::max);
        v[c] >= lo - 1e-12 && v[c] <= hi + 1e-12
    })
}

proptest! {
    #[test]
    fn normalized_rows_sum_to_one_or_zero(m in matrix(1..=8, 1..=8)) {
        let r = row_normalize(&m, EPS).unwrap();
        for (src, s) in m.iter_rows().zip(r.row_sums()) {
            if src.iter().all(|&v| v == 0.0) {
                prop_assert_eq!(s, 0.0);
            } else {
                prop_assert!(s <= 1.0 + 1e-12);
                prop_assert!(s >= 1.0 - 1e-9 * src.len() as f64);
            }
        }
    }

    #[test]
    fn difference_matrix_is_hollow_and_symmetric_in_support(x in matrix(2..=10, 1..=5)) {
        let d = row_diff_matrix(&x, EPS).unwrap();
        prop_assert!(d.is_hollow());
        for i in 0..x.rows() {
            for j in 0..x.rows() {
                prop_assert_eq!(d[(i, j)] > 0.0, d[(j, i)] > 0.0);
            }
        }
    }

    #[test]
    fn similarity_is_hollow_and_bounded(x in matrix(2..=12, 1..=5)) {
        let s = row_similarity_matrix(&x, EPS).unwrap();
        prop_assert!(s.is_hollow());
        prop_assert!(s.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn unit_power_is_identity_on_stochastic_rows(m in matrix(1..=6, 2..=6)) {
        let r = row_normalize(&m, EPS).unwrap();
        let p = renorm_hadamard_power(&r, 1.0, EPS).unwrap();
        prop_assert!(max_abs_diff(r.as_slice(), p.as_slice()) <= 1e-9);
    }

    #[test]
    fn larger_powers_sharpen_rows(row in prop::collection::vec(0.01f64..=1.0, 2..=8)) {
        let m = DenseMatrix::from_rows(std::slice::from_ref(&row)).unwrap();
        let arg_max = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
        let arg_min = (0..row.len()).min_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
        let mut prev: Option<DenseMatrix> = None;
        for p in [1.0, 2.0, 4.0, 8.0] {
            let cur = renorm_hadamard_power(&m, p, EPS).unwrap();
            if let Some(prev) = &prev {
                prop_assert!(cur[(0, arg_max)] >= prev[(0, arg_max)] - 1e-12);
                prop_assert!(cur[(0, arg_min)] <= prev[(0, arg_min)] + 1e-12);
            }
            prev = Some(cur);
        }
    }

    #[test]
    fn weight_rows_are_stochastic((x, a) in opinions_and_graph()) {
        let w = weight_matrix(&x, &a, EPS).unwrap();
        prop_assert!(w.row_sums().iter().all(|s| (s - 1.0).abs() <= 1e-9));
        prop_assert!(w.as_slice().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn opinion_step_stays_in_neighbor_range((x, a) in opinions_and_graph()) {
        let w = weight_matrix(&x, &a, EPS).unwrap();
        let next = opinion_step(&x, &w).unwrap();
        for i in 0..x.n() {
            let mut rows: Vec<&[f64]> = vec![x.row(i)];
            rows.extend((0..x.n()).filter(|&j| a.get(i, j)).map(|j| x.row(j)));
            prop_assert!(hull_contains(&rows, next.row(i)));
        }
    }

    #[test]
    fn resampled_graphs_are_symmetric_and_hollow(
        (x, _a) in opinions_and_graph(),
        theta in 1u32..=10,
        eps_edge in 0.0f64..0.5,
        seed in any::<u64>(),
    ) {
        let params = EdgeParams::new(theta, eps_edge).unwrap();
        let s_hat = edge_probabilities(&x, &params, EPS).unwrap();
        let roles = vec![Role::Standard; x.n()];
        let mut rng = RngStream::new(seed);
        let a = resample_edges(&s_hat, &params, &roles, &mut rng).unwrap();
        prop_assert!(a.is_symmetric() && a.is_hollow());
        prop_assert_eq!(rng.draws(), (x.n() * (x.n() - 1) / 2) as u64);
    }

    #[test]
    fn controller_outputs_stay_in_convex_hull(
        (x, a) in opinions_and_graph(),
        rho in -60.0f64..60.0,
        goal_seed in any::<u64>(),
    ) {
        let goal: Vec<f64> = (0..x.m()).map(|c| ((goal_seed >> (c * 8)) & 0xff) as f64 / 255.0).collect();
        for i in 0..x.n() {
            let mut nbrs: Vec<&[f64]> = (0..x.n()).filter(|&j| a.get(i, j)).map(|j| x.row(j)).collect();
            if nbrs.is_empty() {
                nbrs.push(x.row(i));
            }
            let pop = apply_popular(&x, &a, i, rho, EPS).unwrap();
            prop_assert!(hull_contains(&nbrs, &pop));
            nbrs.push(&goal);
            let strat = apply_strategic(&x, &a, i, &goal, rho, EPS).unwrap();
            prop_assert!(hull_contains(&nbrs, &strat));
        }
    }

    #[test]
    fn popular_limits_are_within_weight_bound(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = separated_star(&mut rng, 0.05);
        let out = |rho| apply_popular(&inst.x, &inst.a, inst.center, rho, EPS).unwrap();
        // Every non-extreme neighbor j carries weight at most (d_j / d_ext)^rho.
        let bound = |ext: f64, rho: f64| -> f64 {
            inst.d.iter().filter(|&&d| d != ext).map(|&d| (d / ext).powf(rho)).sum::<f64>() + 1e-9
        };
        let d_min = inst.d.iter().copied().fold(f64::INFINITY, f64::min);
        let d_max = inst.d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(max_abs_diff(&out(-50.0), &inst.mean_where(d_min)) <= bound(d_min, -50.0));
        prop_assert!(max_abs_diff(&out(0.0), &mean_rows(&inst.neighbor_rows(), inst.x.m())) <= 1e-12);
        prop_assert!(max_abs_diff(&out(50.0), &inst.mean_where(d_max)) <= bound(d_max, 50.0));
    }

    #[test]
    fn config_round_trips(
        n_standard in 1usize..100,
        m in 1usize..6,
        theta in 1u32..20,
        eps_edge in 0.0f64..0.99,
        steps in 1usize..10_000,
        seed in any::<u64>(),
        rho in -100.0f64..100.0,
        count in 1usize..5,
        window in proptest::option::of(1usize..50),
    ) {
        let cfg = RunConfig {
            n_standard,
            m,
            theta,
            eps_edge,
            eps_norm: 1e-12,
            steps,
            seed,
            controllers: vec![
                ControllerGroup { count, spec: ControllerSpec::Popular { rho } },
                ControllerGroup { count: 1, spec: ControllerSpec::Strategic { rho, goal: vec![0.25; m] } },
            ],
            stability: window.map(|window| StabilityCriterion { tol: 1e-4, window, stop_early: false }),
            output: OutputConfig { dir: "results/x".into(), formats: vec![OutputFormat::Json, OutputFormat::Csv] },
        };
        prop_assert_eq!(parse_config(&cfg.to_json_string()).unwrap(), cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn runs_replay_exactly(seed in any::<u64>()) {
        let mut cfg = SimConfig::baseline();
        cfg.n_standard = 15;
        cfg.controllers = vec![
            ControllerSpec::Stubborn { opinion: vec![0.0; 3] },
            ControllerSpec::Popular { rho: -10.0 },
            ControllerSpec::Strategic { rho: 2.0, goal: vec![1.0, 0.0, 0.0] },
        ];
        let mut a = cfg.init(seed).unwrap();
        let mut b = cfg.init(seed).unwrap();
        let ta = a.run(100, None).unwrap();
        let tb = b.run(100, None).unwrap();
        prop_assert_eq!(ta.metrics, tb.metrics);
        prop_assert_eq!(a.x.matrix().as_slice(), b.x.matrix().as_slice());
        prop_assert_eq!(a.a, b.a);
        prop_assert_eq!(a.rng.draws(), b.rng.draws());
    }
}

#[test]
fn edge_frequency_tracks_floored_probability() {
    let trials = 10_000;
    for (k, &(p, eps_edge)) in [(0.0, 0.01), (0.3, 0.001), (0.002, 0.05), (0.8, 0.0)]
        .iter()
        .enumerate()
    {
        let s_hat = DenseMatrix::from_rows(&[[0.0, p], [p, 0.0]]).unwrap();
        let params = EdgeParams::new(7, eps_edge).unwrap();
        let roles = [Role::Standard, Role::Standard];
        let mut rng = RngStream::new(100 + k as u64);
        let hits = (0..trials)
            .filter(|_| {
                resample_edges(&s_hat, &params, &roles, &mut rng)
                    .unwrap()
                    .get(0, 1)
            })
            .count();
        let target = f64::max(p, eps_edge);
        let freq = hits as f64 / trials as f64;
        let tol = 3.0 * (target * (1.0 - target) / trials as f64).sqrt();
        assert!(
            (freq - target).abs() <= tol,
            "p={p} eps={eps_edge}: {freq} vs {target}"
        );
    }
}
