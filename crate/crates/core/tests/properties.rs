use confluxlab::bounds::{parallel_bound, ChiProblem, ChiTerm};
use confluxlab::daap::{build_cdag, builtin, parse_daap, Cdag};
use confluxlab::factor::{confchox, conflux, FactorConfig};
use confluxlab::matrix::DenseMatrix;
use confluxlab::pebble::{brute_force_optimal_q, greedy_schedule, run_schedule, GameMode, OracleCaps, ScheduleError};
use confluxlab::simnet::{spawn, Collective, GridSpec, Message, SimConfig, SimError};
use proptest::prelude::*;

fn grids() -> impl Strategy<Value = GridSpec> {
    prop::sample::select(vec![(1, 1, 1), (1, 1, 2), (2, 2, 1), (2, 2, 2), (1, 1, 4)])
        .prop_map(|(x, y, z)| GridSpec::new(x, y, z).unwrap())
}

/// (src, dst, len) legs; every rank knows the whole plan.
fn plans() -> impl Strategy<Value = (GridSpec, Vec<(usize, usize, usize)>)> {
    grids().prop_flat_map(|g| {
        let p = g.p();
        (Just(g), prop::collection::vec((0..p, 0..p, 0usize..20), 0..24))
    })
}

fn run_plan(g: GridSpec, plan: &[(usize, usize, usize)]) -> confluxlab::simnet::CommStats {
    let cfg = SimConfig::new(g, 1 << 12);
    spawn::<_, SimError, _>(&cfg, |ctx| {
        let me = ctx.rank();
        for (i, &(s, d, len)) in plan.iter().enumerate() {
            ctx.set_phase((i % 3) as u32);
            if s == me {
                ctx.send(d, i as u32, Message { data: vec![1.0; len], index: vec![7; len % 3] })?;
            }
        }
        for (i, &(s, d, len)) in plan.iter().enumerate() {
            ctx.set_phase((i % 3) as u32);
            if d == me {
                let m = ctx.recv(s, i as u32)?;
                assert_eq!(m.data.len(), len);
            }
        }
        Ok(())
    })
    .unwrap()
    .stats
}

/// Small DAG with vertex `j`'s predecessors drawn from earlier vertices,
/// at most two each.
fn dags() -> impl Strategy<Value = Cdag> {
    (3usize..8).prop_flat_map(|n| {
        prop::collection::vec((any::<prop::sample::Index>(), any::<prop::sample::Index>(), 0usize..3), n).prop_map(move |picks| {
            let mut edges = Vec::new();
            for (j, (a, b, k)) in picks.iter().enumerate().skip(1) {
                let mut preds = vec![a.index(j)];
                if *k == 2 {
                    preds.push(b.index(j));
                }
                preds.sort();
                preds.dedup();
                if *k > 0 {
                    edges.extend(preds.into_iter().map(|p| (p, j)));
                }
            }
            Cdag::from_edges(n, &edges).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn traffic_is_conserved_and_deterministic((g, plan) in plans()) {
        let a = run_plan(g, &plan);
        prop_assert!(a.conserved());
        let words: usize = plan.iter().filter(|(s, d, _)| s != d).map(|(_, _, l)| l + l % 3).sum();
        prop_assert_eq!(a.total_sent(), words);
        let by_phase: usize = (0..3).map(|p| a.phase_total(p).sent()).sum();
        prop_assert_eq!(by_phase, a.total_sent());
        prop_assert_eq!(a, run_plan(g, &plan));
    }

    #[test]
    fn flat_broadcast_and_reduce_mirror(len in 1usize..32, root in 0usize..8) {
        let g = GridSpec::new(2, 2, 2).unwrap();
        let mut cfg = SimConfig::new(g, 1 << 12);
        cfg.collective = Collective::Flat;
        let group: Vec<usize> = (0..8).collect();
        let b = spawn::<_, SimError, _>(&cfg, |ctx| {
            ctx.set_phase(0);
            ctx.broadcast(root, &group, 0, Message::data(vec![1.0; len]))?;
            ctx.set_phase(1);
            ctx.reduce(root, &group, 1, vec![1.0; len])
        })
        .unwrap();
        let bc = b.stats.phase_total(0);
        let rd = b.stats.phase_total(1);
        prop_assert_eq!(bc.msgs, 7);
        prop_assert_eq!(bc.sent(), 7 * len);
        prop_assert_eq!(rd.sent(), bc.sent());
        prop_assert_eq!(b.stats.ranks[root].phase(1).recv(), b.stats.ranks[root].phase(0).sent());
        prop_assert_eq!(b.results[root].clone(), Some(vec![8.0; len]));
    }

    #[test]
    fn chi_is_monotone(
        nvars in 1usize..4,
        raw in prop::collection::vec((prop::collection::vec(any::<bool>(), 3), 1u8..4), 1..4),
    ) {
        let mut terms: Vec<ChiTerm> = raw
            .iter()
            .map(|(mask, w)| ChiTerm { vars: (0..nvars).filter(|&v| mask[v]).collect(), weight: *w as f64 })
            .collect();
        // every variable must be bounded by some term
        terms.push(ChiTerm { vars: (0..nvars).collect(), weight: 1.0 });
        let p = ChiProblem { nvars, terms };
        let lo = p.min_budget();
        let chis: Vec<f64> = (0..20).map(|i| p.solve(lo * 1.4f64.powi(i)).unwrap().chi).collect();
        for w in chis.windows(2) {
            prop_assert!(w[1] >= w[0] * (1.0 - 1e-9), "{:?}", chis);
        }
    }

    #[test]
    fn pebbling_legality_is_prefix_closed(g in dags(), m in 3usize..5) {
        let s = greedy_schedule(&g, m).unwrap();
        for k in 0..=s.len() {
            match run_schedule(&g, &s[..k], m, GameMode::Sequential) {
                Ok(_) | Err(ScheduleError::Incomplete { .. }) => {}
                Err(e) => prop_assert!(false, "prefix {} illegal: {}", k, e),
            }
        }
    }

    #[test]
    fn optimal_io_does_not_grow_with_memory(g in dags()) {
        let caps = OracleCaps::default();
        let q: Vec<u64> = (3..=5).map(|m| brute_force_optimal_q(&g, m, GameMode::Sequential, caps).unwrap().q).collect();
        prop_assert!(q[0] >= q[1] && q[1] >= q[2], "{:?}", q);
        let w = brute_force_optimal_q(&g, 3, GameMode::Sequential, caps).unwrap();
        prop_assert_eq!(run_schedule(&g, &w.witness, 3, GameMode::Sequential).unwrap().total(), w.q);
    }

    #[test]
    fn cdag_build_is_deterministic_and_acyclic(n in 1i64..7, which in 0usize..3) {
        let src = [builtin::LU, builtin::CHOLESKY, builtin::GEMM][which];
        let prog = parse_daap(src).unwrap();
        let a = build_cdag(&prog, n).unwrap();
        prop_assert_eq!(&a, &build_cdag(&prog, n).unwrap());
        prop_assert!(a.topo_order().is_some());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn pivots_form_a_permutation_and_match_unpivoted_lu(
        seed in any::<u64>(),
        cfg in prop::sample::select(vec![((1, 1, 1), 32, 4), ((2, 2, 1), 32, 4), ((2, 2, 2), 32, 4), ((2, 2, 2), 48, 8)]),
    ) {
        let ((x, y, z), n, v) = cfg;
        let fc = FactorConfig::new(GridSpec::new(x, y, z).unwrap(), n).with_block(v);
        let a = DenseMatrix::random(n, n, seed);
        let r = conflux(&a, &fc).unwrap();
        prop_assert!(r.pivots.is_bijection());
        for k in 0..r.pivots.steps.len() {
            let before = r.pivots.mask_after(k);
            prop_assert!(r.pivots.steps[k].iter().all(|&p| !before[p]));
        }
        // unpivoted Doolittle on the permuted matrix
        let pa = a.permute_rows(&r.pivots.permutation());
        let mut w: Vec<Vec<f64>> = (0..n).map(|i| pa.row(i).to_vec()).collect();
        for k in 0..n {
            for i in k + 1..n {
                let f = w[i][k] / w[k][k];
                w[i][k] = f;
                for j in k + 1..n {
                    w[i][j] -= f * w[k][j];
                }
            }
        }
        let mut diff = 0.0;
        let mut norm = 0.0;
        let u = r.u.as_ref().unwrap();
        for i in 0..n {
            for j in 0..n {
                let (got, want) = if j < i { (r.l[(i, j)], w[i][j]) } else { (u[(i, j)], w[i][j]) };
                diff += (got - want) * (got - want);
                norm += want * want;
            }
        }
        prop_assert!((diff / norm).sqrt() <= 1e-10);
        prop_assert!(r.stats.conserved());
        let local = (n / x) * (n / y);
        prop_assert!(r.stats.ranks.iter().all(|s| s.peak_words >= local));
        let again = conflux(&a, &fc).unwrap();
        prop_assert_eq!(&again.stats, &r.stats);
        prop_assert_eq!(&again.pivots, &r.pivots);
        prop_assert_eq!(&again.l, &r.l);
    }

    #[test]
    fn cholesky_conserves_and_is_accurate(seed in any::<u64>()) {
        let fc = FactorConfig::new(GridSpec::new(2, 2, 2).unwrap(), 32).with_block(4);
        let r = confchox(&DenseMatrix::random_spd(32, seed), &fc).unwrap();
        prop_assert!(r.residual_ok());
        prop_assert!(r.stats.conserved());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn parallel_terms_scale_as_one_over_p(p in 1usize..64, m in 2.0f64..200.0) {
        let prog = parse_daap(builtin::GEMM).unwrap();
        let one = parallel_bound(&prog, m, 1).unwrap();
        let par = parallel_bound(&prog, m, p).unwrap();
        for n in [4, 16] {
            for (a, b) in one.statement_terms(n).iter().zip(par.statement_terms(n)) {
                prop_assert!((a / p as f64 - b).abs() <= 1e-12 * a);
            }
        }
    }
}

/// The relaxed gemm optimum is never below the best integer block.
#[test]
fn relaxed_chi_dominates_integer_search() {
    let p = ChiProblem {
        nvars: 3,
        terms: vec![
            ChiTerm { vars: vec![0, 1], weight: 1.0 },
            ChiTerm { vars: vec![0, 2], weight: 1.0 },
            ChiTerm { vars: vec![2, 1], weight: 1.0 },
        ],
    };
    for x in (3..=300).step_by(7) {
        let mut best = 0;
        for a in 1..=x {
            for b in 1..=x {
                if a * b >= x {
                    break;
                }
                for c in 1..=x {
                    if a * b + a * c + c * b > x {
                        break;
                    }
                    best = best.max(a * b * c);
                }
            }
        }
        let relaxed = p.solve(x as f64).unwrap().chi;
        assert!(relaxed >= best as f64 * (1.0 - 1e-12), "X={x}: {relaxed} < {best}");
    }
}
