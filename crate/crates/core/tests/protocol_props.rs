mod common;

use common::*;
use proptest::prelude::*;
use treekd::code::{CodewordIndex, LinearCode};
use treekd::graph::{AgentId, SecurityGraph, WeightedEdge};
use treekd::protocol::{failure_bound, reconcile, run, run_block, ProtocolConfig, RunStats};
use treekd::rational::Rational;
use treekd::rng::{SeededRng, Stream};
use treekd::subroutine::{subroutine_round, EdgeBits};
use treekd::transcript::Transcript;

fn path3(flip: f64) -> SecurityGraph {
    SecurityGraph::new(
        3,
        vec![
            WeightedEdge::new(0, 1, Rational::from_integer(1), flip, false),
            WeightedEdge::new(1, 2, Rational::from_integer(1), flip, false),
        ],
        0..3,
    )
}

fn with_flip(mut g: SecurityGraph, flip: f64) -> SecurityGraph {
    for e in &mut g.edges {
        e.flip_prob = flip;
    }
    g
}

/// Probability that one position leaves every agent agreeing with the leader,
/// summed over the four flip patterns of the two edges on the 3-path.
fn path3_position_agreement(flip: f64) -> f64 {
    let tree = path3(flip).mst_kruskal().unwrap();
    let mut total = 0.0;
    for pattern in 0..4u32 {
        let position: Vec<EdgeBits> = (0..2)
            .map(|i| EdgeBits {
                at_a: false,
                at_b: pattern >> i & 1 == 1,
            })
            .collect();
        let mut masks = SeededRng::derive(pattern as u64, Stream::Masks, 0, 0);
        let mut choices = SeededRng::derive(pattern as u64, Stream::TerminalChoice, 0, 0);
        let mut agree_always = true;
        for _ in 0..16 {
            let out = subroutine_round(
                &tree,
                &position,
                AgentId(0),
                &mut masks,
                &mut choices,
                &mut Transcript::new(),
            )
            .unwrap();
            agree_always &= out.secrets.iter().all(|&s| s == out.secrets[0]);
        }
        if agree_always {
            let flips = pattern.count_ones() as i32;
            total += flip.powi(flips) * (1.0 - flip).powi(2 - flips);
        }
    }
    total
}

#[test]
fn heavy_noise_aborts_almost_always() {
    let per_position = path3_position_agreement(0.3);
    assert!((per_position - 0.49).abs() < 1e-12);
    // delta m = 0.35 < 1, so a single check mismatch aborts.
    let p_abort = 1.0 - per_position.powi(7);
    assert!(p_abort > 0.99, "{p_abort}");

    let mut config = ProtocolConfig::new(path3(0.3), LinearCode::hamming_7_4());
    config.blocks = 10_000;
    config.seed = 1;
    let (results, _) = run(&config).unwrap();
    let stats = RunStats::from_results(&results);
    let sigma = (p_abort * (1.0 - p_abort) / 10_000.0).sqrt();
    assert!(
        (stats.abort_rate() - p_abort).abs() < 4.0 * sigma,
        "{} vs {p_abort}",
        stats.abort_rate()
    );
    assert!(stats.abort_rate() > 0.99);
}

#[test]
fn low_noise_agreement_regression() {
    let mut config = ProtocolConfig::new(path3(0.02), LinearCode::hamming_7_4());
    config.blocks = 200;
    config.seed = 7;
    config.delta = Rational::new(3, 20);
    let (results, _) = run(&config).unwrap();
    let stats = RunStats::from_results(&results);
    assert!(stats.agreement_rate() > 0.95);
    assert_eq!((stats.completed, stats.agreed), FIXTURE);
}

// (completed, agreed) at seed 7, recorded from the implementation.
const FIXTURE: (usize, usize) = (195, 189);

#[test]
fn noiseless_runs_complete_with_one_key() {
    let mut rng = rng(40);
    for n in 2..=8 {
        for _ in 0..3 {
            let g = random_connected_graph(n, 0.4, 3, &mut rng);
            for code in [
                LinearCode::hamming_7_4(),
                LinearCode::repetition(3).unwrap(),
            ] {
                for seed in 0..3 {
                    let mut config = ProtocolConfig::new(g.clone(), code.clone());
                    config.blocks = 3;
                    config.seed = seed;
                    config.leader = AgentId(rng.index(n));
                    let (results, _) = run(&config).unwrap();
                    for r in &results {
                        assert!(r.keys_agree(), "n={n} seed={seed}");
                        assert_eq!(r.keys.len(), n);
                        assert!(r.code_errors.iter().all(|&e| e == 0));
                    }
                }
            }
        }
    }
}

#[test]
fn small_code_errors_imply_agreement() {
    let mut rng = rng(41);
    let mut checked = 0;
    for _ in 0..60 {
        let n = 2 + rng.index(5);
        let g = with_flip(random_connected_graph(n, 0.3, 3, &mut rng), 0.03);
        let mut config = ProtocolConfig::new(g, LinearCode::hamming_7_4());
        config.blocks = 20;
        config.seed = rng.below(1000);
        config.delta = Rational::new(1, 2);
        let (results, _) = run(&config).unwrap();
        for r in results.iter().filter(|r| r.is_completed()) {
            if r.code_errors.iter().all(|&e| e <= 1) {
                assert!(r.keys_agree());
                checked += 1;
            }
        }
    }
    assert!(checked > 100);
}

#[test]
fn completed_blocks_account_resources_exactly() {
    let mut rng = rng(42);
    for n in 2..=9 {
        let g = random_connected_graph(n, 0.3, 2, &mut rng);
        for code in [
            LinearCode::hamming_7_4(),
            LinearCode::repetition(5).unwrap(),
        ] {
            let (m, k) = (code.m() as u64, code.k() as u64);
            let config = ProtocolConfig::new(g.clone(), code);
            let r = run_block(&config, 0, &mut Transcript::new()).unwrap();
            let e = &r.efficiency;
            assert!(r.is_completed());
            assert_eq!(e.pairwise_bits_consumed, (n as u64 - 1) * 2 * m);
            assert_eq!(e.code_pairwise_bits, (n as u64 - 1) * m);
            assert_eq!(e.subroutine_bits, 2 * m);
            assert_eq!(e.key_bits, k);
            assert_eq!(
                e.eta_subroutine,
                Rational::new(n as u64, 2 * (n as u64 - 1))
            );
            assert_eq!(
                e.eta_code,
                Rational::new(k * n as u64, 2 * m * (n as u64 - 1))
            );
        }
    }
}

#[test]
fn weight_two_errors_always_miscorrect_under_hamming() {
    // A perfect distance-3 code sends every weight-2 error to a different codeword.
    let code = LinearCode::hamming_7_4();
    let v = treekd::bits::BitString::from_u64(0b1011001, 7);
    let mut miscorrected = 0;
    for e in (0u64..128).filter(|e| e.count_ones() == 2) {
        let noisy = &v ^ &treekd::bits::BitString::from_u64(e, 7);
        let mut rng = SeededRng::derive(e, Stream::Codeword, 0, 0);
        let keys = reconcile(
            &code,
            &mut rng,
            &[v.clone(), noisy],
            AgentId(0),
            &mut Transcript::new(),
        )
        .unwrap();
        assert_ne!(keys[0], keys[1], "e={e:07b}");
        miscorrected += 1;
    }
    assert_eq!(miscorrected, 21);
}

#[test]
fn leader_index_is_uniform_over_reconcile_calls() {
    let code = LinearCode::hamming_7_4();
    let v = treekd::bits::BitString::zeros(7);
    let mut rng = SeededRng::derive(5, Stream::Codeword, 0, 0);
    let mut counts = [0usize; 16];
    for _ in 0..16_000 {
        let keys = reconcile(
            &code,
            &mut rng,
            &[v.clone(), v.clone()],
            AgentId(0),
            &mut Transcript::new(),
        )
        .unwrap();
        assert_eq!(keys[0], keys[1]);
        let CodewordIndex(i) = keys[0];
        counts[i as usize] += 1;
    }
    assert!(
        counts.iter().all(|&c| (880..=1120).contains(&c)),
        "{counts:?}"
    );
}

proptest! {
    #[test]
    fn failure_bound_is_monotone(d in 0.01f64..0.99, e in 0.0f64..0.5, de in 0.001f64..0.1, n in 1u64..500) {
        let base = failure_bound(d, e, n).unwrap();
        prop_assert!(failure_bound(d, e + de, n).unwrap() < base || base == 0.0);
        if e > 0.0 {
            prop_assert!(failure_bound(d, e, n + 1).unwrap() < base || base == 0.0);
            // delta - delta^2 peaks at 1/2
            let toward_edge = if d < 0.5 { (d - de).max(d / 2.0) } else { (d + de).min((1.0 + d) / 2.0) };
            prop_assert!(failure_bound(toward_edge, e, n).unwrap() < base || base == 0.0);
            let doubled = failure_bound(d, e, 2 * n).unwrap();
            prop_assert!((doubled - base * base).abs() <= 1e-12 * base.max(1e-300));
        }
    }
}
