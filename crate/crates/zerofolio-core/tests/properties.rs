//! Property tests for the serialization, selection, and statistics contracts.

use std::collections::BTreeSet;

use proptest::prelude::*;

use zerofolio_core::eval::{cross_validate, EmbeddingSource, SelectorSpec};
use zerofolio_core::forest::single_best;
use zerofolio_core::scenario::{RunRecord, Scenario};
use zerofolio_core::selector::{
    hybrid_soft_vote, score_algorithms, select, vote_scores, AlgorithmScores, Metric,
    SelectorConfig, TrainedSelector, Weighting,
};
use zerofolio_core::serialize::{serialize_instance, shuffle_lines, SerializationConfig};
use zerofolio_core::stats::{gap_closed, wilcoxon_signed_rank};
use zerofolio_core::{rng::SplitMix64, EmbeddingVector};

// ---------------------------------------------------------------------------
// Brute-force k-NN oracle: full distance sort plus direct weighted sums,
// written independently of the library's heap-based path.
// ---------------------------------------------------------------------------

fn oracle_distance(metric: Metric, a: &[f64], b: &[f64]) -> f64 {
    match metric {
        Metric::Manhattan => {
            let mut total = 0.0;
            for d in 0..a.len() {
                let diff = a[d] - b[d];
                total += if diff < 0.0 { -diff } else { diff };
            }
            total
        }
        Metric::Cosine => {
            let mut dot = 0.0;
            let mut na = 0.0;
            let mut nb = 0.0;
            for d in 0..a.len() {
                dot += a[d] * b[d];
                na += a[d] * a[d];
                nb += b[d] * b[d];
            }
            if na == 0.0 || nb == 0.0 {
                1.0
            } else {
                1.0 - dot / (na.sqrt() * nb.sqrt())
            }
        }
    }
}

fn oracle_scores(
    query: &[f64],
    points: &[Vec<f64>],
    par10: &[Vec<f64>],
    config: &SelectorConfig,
) -> Vec<f64> {
    let mut order: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (oracle_distance(config.metric, query, p), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    order.truncate(config.k.max(1).min(points.len()));

    let n_algorithms = par10[0].len();
    let mut scores = vec![0.0; n_algorithms];
    let zero_hit = order.iter().any(|&(d, _)| d == 0.0);
    for &(d, i) in &order {
        let w = match config.weighting {
            Weighting::Uniform => 1.0,
            Weighting::InverseDistance => {
                if zero_hit {
                    if d == 0.0 {
                        1.0
                    } else {
                        continue;
                    }
                } else {
                    1.0 / d
                }
            }
        };
        for a in 0..n_algorithms {
            scores[a] += w * par10[i][a];
        }
    }
    scores
}

type KnnCase = (Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>, SelectorConfig);

fn random_case(rng: &mut SplitMix64) -> KnnCase {
    let n = 1 + (rng.next_below(100)) as usize;
    let dim = 1 + (rng.next_below(16)) as usize;
    let n_algorithms = 3 + (rng.next_below(6)) as usize;
    let point = |rng: &mut SplitMix64| (0..dim).map(|_| rng.next_f64() * 20.0 - 10.0).collect();
    let points: Vec<Vec<f64>> = (0..n).map(|_| point(rng)).collect();
    let par10: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n_algorithms).map(|_| rng.next_f64() * 12_000.0).collect())
        .collect();
    let query = point(rng);
    let metric = if rng.next_below(2) == 0 { Metric::Manhattan } else { Metric::Cosine };
    let weighting =
        if rng.next_below(2) == 0 { Weighting::InverseDistance } else { Weighting::Uniform };
    let k = match rng.next_below(4) {
        0 => 1,
        1 => 5,
        2 => 10,
        _ => n,
    };
    (query, points, par10, SelectorConfig { k, metric, weighting })
}

#[test]
fn knn_matches_brute_force_oracle() {
    let mut rng = SplitMix64::new(2024);
    for _ in 0..200 {
        let (query, points, par10, config) = random_case(&mut rng);
        let selector = TrainedSelector::new(
            points.iter().map(|p| EmbeddingVector::new(p.clone()).unwrap()).collect(),
            par10.clone(),
            config.clone(),
        )
        .unwrap();
        let q = EmbeddingVector::new(query.clone()).unwrap();
        let got = score_algorithms(&q, &selector).unwrap();
        let want = oracle_scores(&query, &points, &par10, &config);
        for (g, w) in got.scores.iter().zip(&want) {
            let scale = w.abs().max(1.0);
            assert!((g - w).abs() <= 1e-12 * scale, "{g} vs {w} under {config:?}");
        }
        let oracle_pick = want
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
            .unwrap()
            .0;
        assert_eq!(select(&got), oracle_pick);
    }
}

// ---------------------------------------------------------------------------
// Serialization contract
// ---------------------------------------------------------------------------

fn line_strategy() -> impl Strategy<Value = String> {
    proptest::string::string_regex("[ -~]{0,30}").unwrap()
}

fn files_strategy() -> impl Strategy<Value = Vec<String>> {
    proptest::collection::vec(
        proptest::collection::vec(line_strategy(), 0..20).prop_map(|l| l.join("\n")),
        1..4,
    )
}

proptest! {
    #[test]
    fn output_never_exceeds_budget(
        files in files_strategy(),
        budget in 1usize..2000,
        seed in any::<u64>(),
        shuffle in any::<bool>(),
    ) {
        let cfg = SerializationConfig { budget_chars: budget, seed, shuffle };
        let blobs: Vec<&[u8]> = files.iter().map(|f| f.as_bytes()).collect();
        let out = serialize_instance(&blobs, &cfg);
        prop_assert!(out.chars().count() <= budget);
    }

    #[test]
    fn no_shuffle_output_is_a_prefix(
        files in files_strategy(),
        budget in 1usize..2000,
    ) {
        let cfg = SerializationConfig { budget_chars: budget, seed: 0, shuffle: false };
        let blobs: Vec<&[u8]> = files.iter().map(|f| f.as_bytes()).collect();
        let out = serialize_instance(&blobs, &cfg);
        let concatenated = files.join("\n");
        let normalized: String = concatenated.lines().collect::<Vec<_>>().join("\n");
        prop_assert!(normalized.starts_with(&out));
    }

    #[test]
    fn serialization_is_deterministic(
        files in files_strategy(),
        budget in 1usize..500,
        seed in any::<u64>(),
    ) {
        let cfg = SerializationConfig { budget_chars: budget, seed, shuffle: true };
        let blobs: Vec<&[u8]> = files.iter().map(|f| f.as_bytes()).collect();
        prop_assert_eq!(serialize_instance(&blobs, &cfg), serialize_instance(&blobs, &cfg));
    }

    #[test]
    fn shuffle_preserves_the_line_multiset(
        lines in proptest::collection::vec(line_strategy(), 0..50),
        seed in any::<u64>(),
    ) {
        let shuffled = shuffle_lines(&lines, seed);
        let mut a = lines.clone();
        let mut b = shuffled;
        a.sort();
        b.sort();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn different_seeds_give_different_output() {
    // A 1000-line file; any two distinct seeds from the fixed trials below
    // must serialize differently.
    let mut rng = SplitMix64::new(555);
    let lines: Vec<String> =
        (0..1000).map(|i| format!("line {} {}", i, rng.next_u64())).collect();
    let file = lines.join("\n");
    let out = |seed: u64| {
        let cfg = SerializationConfig { budget_chars: 10_000, seed, shuffle: true };
        serialize_instance(&[file.as_bytes()], &cfg)
    };
    for (s, t) in [(0u64, 1u64), (1, 2), (42, 43), (7, 700)] {
        assert_ne!(out(s), out(t), "seeds {s} and {t} collided");
    }
}

// ---------------------------------------------------------------------------
// Selector invariants
// ---------------------------------------------------------------------------

fn int_matrix(
    rows: usize,
    cols: usize,
) -> impl Strategy<Value = Vec<Vec<f64>>> {
    proptest::collection::vec(
        proptest::collection::vec((0u32..1000).prop_map(f64::from), cols),
        rows,
    )
}

proptest! {
    #[test]
    fn selection_is_scale_invariant_under_inverse_distance(
        par10 in int_matrix(8, 4),
        scale in prop_oneof![Just(0.5f64), Just(2.0), Just(3.5), Just(100.0)],
    ) {
        let points: Vec<EmbeddingVector> = (0..8)
            .map(|i| EmbeddingVector::new(vec![i as f64, (i * i) as f64]).unwrap())
            .collect();
        let config = SelectorConfig { k: 4, ..SelectorConfig::default() };
        let base = TrainedSelector::new(points.clone(), par10.clone(), config.clone()).unwrap();
        let scaled_matrix: Vec<Vec<f64>> = par10
            .iter()
            .map(|row| row.iter().map(|v| v * scale).collect())
            .collect();
        let scaled = TrainedSelector::new(points, scaled_matrix, config).unwrap();
        let query = EmbeddingVector::new(vec![2.5, 3.5]).unwrap();
        prop_assert_eq!(
            select(&score_algorithms(&query, &base).unwrap()),
            select(&score_algorithms(&query, &scaled).unwrap())
        );
    }

    #[test]
    fn manhattan_selection_is_translation_invariant(
        coords in proptest::collection::vec(
            proptest::collection::vec(-50i32..50, 3),
            5..20,
        ),
        offset in proptest::collection::vec(-1000i32..1000, 3),
        par10 in int_matrix(20, 3),
    ) {
        let as_vec = |c: &[i32], shift: &[i32]| {
            EmbeddingVector::new(
                c.iter().zip(shift).map(|(&x, &t)| f64::from(x) + f64::from(t)).collect(),
            )
            .unwrap()
        };
        let zero = vec![0i32; 3];
        let n = coords.len();
        let rows: Vec<Vec<f64>> = par10.into_iter().take(n).collect();
        let config = SelectorConfig { k: 3, ..SelectorConfig::default() };

        let plain = TrainedSelector::new(
            coords.iter().map(|c| as_vec(c, &zero)).collect(),
            rows.clone(),
            config.clone(),
        )
        .unwrap();
        let shifted = TrainedSelector::new(
            coords.iter().map(|c| as_vec(c, &offset)).collect(),
            rows,
            config,
        )
        .unwrap();

        let q0 = as_vec(&[1, 2, 3], &zero);
        let q1 = as_vec(&[1, 2, 3], &offset);
        prop_assert_eq!(
            select(&score_algorithms(&q0, &plain).unwrap()),
            select(&score_algorithms(&q1, &shifted).unwrap())
        );
    }

    #[test]
    fn voting_identical_integer_scores_is_identity(
        scores in proptest::collection::vec((0u32..10_000).prop_map(f64::from), 2..8),
        copies in 1usize..8,
    ) {
        let s = AlgorithmScores { scores };
        let stack: Vec<AlgorithmScores> = (0..copies).map(|_| s.clone()).collect();
        prop_assert_eq!(vote_scores(&stack).unwrap().scores, s.scores);
    }

    #[test]
    fn voting_identical_scores_preserves_argmin(
        scores in proptest::collection::vec(0.0f64..1e6, 2..8),
        copies in 1usize..8,
    ) {
        let s = AlgorithmScores { scores };
        let stack: Vec<AlgorithmScores> = (0..copies).map(|_| s.clone()).collect();
        prop_assert_eq!(select(&vote_scores(&stack).unwrap()), select(&s));
    }

    #[test]
    fn hybrid_output_stays_in_unit_interval(
        a in proptest::collection::vec(-1e9f64..1e9, 2..10),
        b_raw in proptest::collection::vec(-1e9f64..1e9, 2..10),
        alpha in 0.0f64..=1.0,
    ) {
        let len = a.len().min(b_raw.len());
        let sa = AlgorithmScores { scores: a[..len].to_vec() };
        let sb = AlgorithmScores { scores: b_raw[..len].to_vec() };
        let fused = hybrid_soft_vote(&sa, &sb, alpha).unwrap();
        prop_assert!(fused.scores.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn hybrid_with_itself_preserves_argmin(
        a in proptest::collection::vec(-1e6f64..1e6, 2..10),
    ) {
        let s = AlgorithmScores { scores: a };
        let fused = hybrid_soft_vote(&s, &s, 0.5).unwrap();
        prop_assert_eq!(select(&fused), select(&s));
    }

    #[test]
    fn gap_closed_is_affine_invariant(
        sbs in 100u32..100_000,
        alg in 0u32..200_000,
        vbs_offset in 1u32..100,
        scale in prop_oneof![Just(0.25f64), Just(2.0), Just(8.0)],
    ) {
        let sbs = f64::from(sbs);
        let vbs = sbs - f64::from(vbs_offset);
        let alg = f64::from(alg);
        let a = gap_closed(sbs, alg, vbs).unwrap();
        let b = gap_closed(sbs * scale, alg * scale, vbs * scale).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn wilcoxon_is_symmetric(
        pairs in proptest::collection::vec((0.0f64..100.0, 0.0f64..100.0), 1..40),
    ) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        prop_assert_eq!(
            wilcoxon_signed_rank(&x, &y).unwrap(),
            wilcoxon_signed_rank(&y, &x).unwrap()
        );
    }
}

// ---------------------------------------------------------------------------
// Uniform weighting with k = n collapses to the training-set single best.
// ---------------------------------------------------------------------------

#[test]
fn uniform_full_k_reduces_to_training_sbs() {
    let mut rng = SplitMix64::new(31);
    for _ in 0..50 {
        let n = 2 + rng.next_below(40) as usize;
        let n_algorithms = 2 + rng.next_below(6) as usize;
        let cutoff = 1000.0;
        // Integer PAR10 values keep both summation routes exact.
        let runs: Vec<RunRecord> = (0..n * n_algorithms)
            .map(|_| {
                if rng.next_below(4) == 0 {
                    RunRecord { runtime_seconds: cutoff, solved: false }
                } else {
                    RunRecord { runtime_seconds: rng.next_below(1000) as f64, solved: true }
                }
            })
            .collect();
        let scenario = Scenario::new(
            "random".into(),
            (0..n_algorithms).map(|a| format!("alg{a}")).collect(),
            cutoff,
            (0..n).map(|i| format!("i{i}")).collect(),
            runs,
            vec![None; n],
            vec![1; n],
        )
        .unwrap();

        let train: BTreeSet<usize> = (0..n).collect();
        let sbs = single_best(&scenario, &train);

        let selector = TrainedSelector::new(
            (0..n)
                .map(|_| EmbeddingVector::new(vec![rng.next_f64(), rng.next_f64()]).unwrap())
                .collect(),
            (0..n).map(|i| scenario.par10_row(i)).collect(),
            SelectorConfig { k: n, metric: Metric::Manhattan, weighting: Weighting::Uniform },
        )
        .unwrap();
        let query = EmbeddingVector::new(vec![rng.next_f64(), rng.next_f64()]).unwrap();
        let pick = select(&score_algorithms(&query, &selector).unwrap());
        assert_eq!(pick, sbs);
    }
}

// ---------------------------------------------------------------------------
// Cross-validation is deterministic regardless of repetition.
// ---------------------------------------------------------------------------

#[test]
fn cross_validation_is_repeatable() {
    let mut rng = SplitMix64::new(77);
    let n = 40;
    let cutoff = 300.0;
    let runs: Vec<RunRecord> = (0..n * 3)
        .map(|_| {
            if rng.next_below(3) == 0 {
                RunRecord { runtime_seconds: cutoff, solved: false }
            } else {
                RunRecord { runtime_seconds: rng.next_f64() * cutoff, solved: true }
            }
        })
        .collect();
    let scenario = Scenario::new(
        "repeat".into(),
        vec!["a".into(), "b".into(), "c".into()],
        cutoff,
        (0..n).map(|i| format!("i{i}")).collect(),
        runs,
        vec![None; n],
        (0..n).map(|i| (i % 5) as u32 + 1).collect(),
    )
    .unwrap();
    let vectors = (0..n)
        .flat_map(|i| {
            let mut r = SplitMix64::new(i as u64);
            [(0u64, r.next_f64()), (1, r.next_f64())].map(move |(s, v)| {
                ((i, s), EmbeddingVector::new(vec![v, v * 2.0]).unwrap())
            })
        })
        .collect();
    let source = EmbeddingSource::Vectors(vectors);
    let eligible: BTreeSet<usize> = (0..n).collect();
    let spec = SelectorSpec::KnnEmbedding {
        config: SelectorConfig::default(),
        seeds: vec![0, 1],
    };
    let a = cross_validate(&scenario, &source, &eligible, &spec).unwrap();
    let b = cross_validate(&scenario, &source, &eligible, &spec).unwrap();
    assert_eq!(a, b);
}
