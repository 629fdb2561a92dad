use proptest::prelude::*;

use subpop::eval::{
    bootstrap_ci, draw_pairs, pairwise_on, pareto_frontier, pareto_mask, per_class, relative_of,
    top1, BootstrapConfig, PairMode, PredictionRecord,
};
use subpop::rng::Stream;
use subpop::tasks::Domain;

/// Scores come from a small grid so argmax ties are common.
fn records_strategy() -> impl Strategy<Value = (usize, Vec<PredictionRecord>)> {
    (2usize..=10).prop_flat_map(|c| {
        let rec = (any::<bool>(), 0..c, proptest::collection::vec(0u8..4, c)).prop_map(
            |(src, y, s)| PredictionRecord {
                example_id: String::new(),
                domain: if src { Domain::Source } else { Domain::Target },
                true_superclass: y,
                scores: s.into_iter().map(f64::from).collect(),
            },
        );
        (Just(c), proptest::collection::vec(rec, 1..500))
    })
}

fn refs(rs: &[PredictionRecord]) -> Vec<&PredictionRecord> {
    rs.iter().collect()
}

// Brute-force recounts written without the library's helpers.

fn oracle_pred(scores: &[f64]) -> usize {
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    scores.iter().position(|&s| s == m).unwrap()
}

fn oracle_top1(rs: &[PredictionRecord]) -> f64 {
    let hits = rs.iter().filter(|r| oracle_pred(&r.scores) == r.true_superclass).count();
    hits as f64 / rs.len() as f64
}

fn oracle_per_class(rs: &[PredictionRecord], c: usize) -> Vec<Option<f64>> {
    (0..c)
        .map(|k| {
            let of_k: Vec<_> = rs.iter().filter(|r| r.true_superclass == k).collect();
            if of_k.is_empty() {
                return None;
            }
            let hits = of_k.iter().filter(|r| oracle_pred(&r.scores) == k).count();
            Some(hits as f64 / of_k.len() as f64)
        })
        .collect()
}

fn oracle_all_pairs(rs: &[PredictionRecord], c: usize) -> Option<f64> {
    let mut sum = 0.0;
    let mut used = 0usize;
    for a in 0..c {
        for b in a + 1..c {
            let mut n = 0usize;
            let mut hit = 0usize;
            for r in rs {
                let y = r.true_superclass;
                if y == a {
                    n += 1;
                    hit += (r.scores[a] >= r.scores[b]) as usize;
                } else if y == b {
                    n += 1;
                    hit += (r.scores[b] > r.scores[a]) as usize;
                }
            }
            if n > 0 {
                sum += hit as f64 / n as f64;
                used += 1;
            }
        }
    }
    (used > 0).then(|| sum / used as f64)
}

fn cfg(b: usize, parallel: bool) -> BootstrapConfig {
    BootstrapConfig {
        b,
        alpha: 0.05,
        seed: 3,
        parallel,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn metrics_match_recount((c, rs) in records_strategy()) {
        prop_assert_eq!(top1(&refs(&rs)).unwrap(), oracle_top1(&rs));
        prop_assert_eq!(per_class(&refs(&rs), c), oracle_per_class(&rs, c));
        let pw = pairwise_on(&refs(&rs), &draw_pairs(c, PairMode::All, 0)).ok();
        prop_assert_eq!(pw, oracle_all_pairs(&rs, c));
    }

    #[test]
    fn top1_is_count_weighted_per_class((c, rs) in records_strategy()) {
        let pc = per_class(&refs(&rs), c);
        let weighted: f64 = pc
            .iter()
            .enumerate()
            .filter_map(|(k, a)| a.map(|a| a * rs.iter().filter(|r| r.true_superclass == k).count() as f64))
            .sum::<f64>()
            / rs.len() as f64;
        prop_assert!((weighted - top1(&refs(&rs)).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn invariant_to_score_scale((c, rs) in records_strategy(), e in -8i32..8) {
        let f = 2f64.powi(e);
        let scaled: Vec<PredictionRecord> = rs
            .iter()
            .map(|r| PredictionRecord { scores: r.scores.iter().map(|s| s * f).collect(), ..r.clone() })
            .collect();
        prop_assert_eq!(top1(&refs(&rs)).unwrap(), top1(&refs(&scaled)).unwrap());
        let pairs = draw_pairs(c, PairMode::All, 0);
        prop_assert_eq!(pairwise_on(&refs(&rs), &pairs).ok(), pairwise_on(&refs(&scaled), &pairs).ok());
    }

    #[test]
    fn invariant_to_record_order((c, rs) in records_strategy(), seed in any::<u64>()) {
        let mut shuffled = rs.clone();
        Stream::indexed(seed, "perm", 0).shuffle(&mut shuffled);
        prop_assert_eq!(top1(&refs(&rs)).unwrap(), top1(&refs(&shuffled)).unwrap());
        prop_assert_eq!(per_class(&refs(&rs), c), per_class(&refs(&shuffled), c));
        let pairs = draw_pairs(c, PairMode::PerClass(3), seed);
        prop_assert_eq!(pairwise_on(&refs(&rs), &pairs).ok(), pairwise_on(&refs(&shuffled), &pairs).ok());
    }

    #[test]
    fn two_class_pairwise_is_top1((_c, rs) in records_strategy()) {
        let two: Vec<PredictionRecord> = rs
            .iter()
            .map(|r| PredictionRecord {
                true_superclass: r.true_superclass % 2,
                scores: r.scores[..2].to_vec(),
                ..r.clone()
            })
            .collect();
        let pw = pairwise_on(&refs(&two), &[(0, 1)]).unwrap();
        prop_assert_eq!(pw, top1(&refs(&two)).unwrap());
    }

    #[test]
    fn bootstrap_is_deterministic((_c, rs) in records_strategy()) {
        let r = refs(&rs);
        let a = bootstrap_ci(&r, top1, &cfg(64, true)).unwrap();
        let b = bootstrap_ci(&r, top1, &cfg(64, false)).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.point, top1(&r).unwrap());
        prop_assert!(a.ci_low <= a.point && a.point <= a.ci_high);
        prop_assert_eq!(a.bootstrap_b, 64);
        prop_assert_eq!(a.n, rs.len());
        if let Ok(rel) = bootstrap_ci(&r, relative_of, &cfg(64, true)) {
            prop_assert_eq!(rel.point, relative_of(&r).unwrap());
            prop_assert!(rel.bootstrap_b <= 64);
        }
    }

    #[test]
    fn pareto_properties(pts in proptest::collection::vec((0u8..20, 0u8..20), 1..40)) {
        let xy: Vec<(f64, f64)> = pts.iter().map(|&(a, b)| (f64::from(a) / 20.0, f64::from(b) / 20.0)).collect();
        let mask = pareto_mask(&xy);
        let dom = |p: (f64, f64), q: (f64, f64)| p.0 >= q.0 && p.1 >= q.1 && (p.0 > q.0 || p.1 > q.1);
        prop_assert!(mask.iter().any(|&m| m));
        for (i, &q) in xy.iter().enumerate() {
            if mask[i] {
                for (j, &p) in xy.iter().enumerate() {
                    prop_assert!(!(mask[j] && dom(p, q)));
                }
            } else {
                prop_assert!(xy.iter().zip(&mask).any(|(&p, &m)| m && dom(p, q)));
            }
        }
        let labelled: Vec<(f64, f64, String)> = xy.iter().enumerate().map(|(i, p)| (p.0, p.1, i.to_string())).collect();
        let front = pareto_frontier(&labelled);
        prop_assert_eq!(front.len(), mask.iter().filter(|&&m| m).count());
        let xs: Vec<f64> = front.iter().map(|l| xy[l.parse::<usize>().unwrap()].0).collect();
        prop_assert!(xs.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn random_scores_give_chance_pairwise() {
    let mut rng = Stream::indexed(9, "scores", 0);
    let c = 10;
    let rs: Vec<PredictionRecord> = (0..5000)
        .map(|i| PredictionRecord {
            example_id: i.to_string(),
            domain: Domain::Target,
            true_superclass: i % c,
            scores: (0..c).map(|_| rng.unit()).collect(),
        })
        .collect();
    let pw = pairwise_on(&refs(&rs), &draw_pairs(c, PairMode::All, 0)).unwrap();
    assert!((pw - 0.5).abs() < 0.03, "{pw}");
    let t1 = top1(&refs(&rs)).unwrap();
    assert!((t1 - 0.1).abs() < 0.03, "{t1}");
}

#[test]
fn per_class_pairs_are_distinct_partners() {
    for c in 2..12 {
        let pairs = draw_pairs(c, PairMode::PerClass(3), 5);
        assert_eq!(pairs.len(), c * 3.min(c - 1));
        for k in 0..c {
            let mut partners: Vec<usize> = pairs.iter().filter(|p| p.0 == k).map(|p| p.1).collect();
            assert!(!partners.contains(&k));
            partners.sort();
            partners.dedup();
            assert_eq!(partners.len(), 3.min(c - 1));
        }
    }
}
