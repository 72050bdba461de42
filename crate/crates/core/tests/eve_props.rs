mod common;

use common::*;
use treekd::code::{CodewordIndex, LinearCode};
use treekd::eve::{
    analyze_transcript, consistent_configurations, key_uniformity_test, rounds, secret_entropy,
};
use treekd::graph::AgentId;
use treekd::protocol::{run, ProtocolConfig};
use treekd::rng::{SeededRng, Stream};
use treekd::subroutine::{subroutine_round, EdgeAssignment, EdgeBits};
use treekd::transcript::{Payload, Transcript};

#[test]
fn honest_rounds_leave_exactly_two_complementary_configurations() {
    let mut rng = rng(50);
    for _ in 0..300 {
        let n = 2 + rng.index(11);
        let tree = random_tree(n, &mut rng);
        let word = rng.below(1 << (n - 1));
        let position: Vec<EdgeBits> = (0..n - 1)
            .map(|i| {
                let b = word >> i & 1 == 1;
                EdgeBits { at_a: b, at_b: b }
            })
            .collect();
        let mut masks = SeededRng::derive(rng.below(u64::MAX), Stream::Masks, 0, 0);
        let mut choices = SeededRng::derive(rng.below(u64::MAX), Stream::TerminalChoice, 0, 0);
        let mut t = Transcript::new();
        subroutine_round(
            &tree,
            &position,
            AgentId(0),
            &mut masks,
            &mut choices,
            &mut t,
        )
        .unwrap();

        let round = &rounds(&t)[0];
        let cs = consistent_configurations(round, &tree).unwrap();
        assert!(cs.is_complementary_pair(), "n={n}");
        let truth = EdgeAssignment::from_word(word, &tree);
        assert!(cs.configurations.contains(&truth));
        for terminal in tree.terminal_agents() {
            assert_eq!(secret_entropy(&cs, terminal, &tree).unwrap(), 1.0);
        }
        assert!(analyze_transcript(&t, &tree).unwrap().passes());
    }
}

#[test]
fn one_tampered_bit_still_leaves_two_configurations_but_not_the_truth() {
    // The constraints form a tree, so any single flip stays solvable; it just
    // moves the solution pair away from the true assignment.
    let mut rng = rng(51);
    for _ in 0..100 {
        let n = 3 + rng.index(8);
        let tree = random_tree(n, &mut rng);
        let position = vec![
            EdgeBits {
                at_a: false,
                at_b: false
            };
            n - 1
        ];
        let mut masks = SeededRng::derive(1, Stream::Masks, 0, 0);
        let mut choices = SeededRng::derive(1, Stream::TerminalChoice, 0, 0);
        let mut t = Transcript::new();
        subroutine_round(
            &tree,
            &position,
            AgentId(0),
            &mut masks,
            &mut choices,
            &mut t,
        )
        .unwrap();

        let mut round = rounds(&t)[0].clone();
        let which = rng.index(round.announcements.len());
        let bits = &mut round.announcements[which].masked_bits;
        let key = *bits.keys().nth(rng.index(bits.len())).unwrap();
        *bits.get_mut(&key).unwrap() ^= true;
        let cs = consistent_configurations(&round, &tree).unwrap();
        assert!(cs.is_complementary_pair());
        assert!(!cs
            .configurations
            .contains(&EdgeAssignment::from_word(0, &tree)));
    }
}

#[test]
fn protocol_transcripts_pass_analysis() {
    let mut rng = rng(52);
    for _ in 0..10 {
        let n = 2 + rng.index(7);
        let g = random_connected_graph(n, 0.3, 3, &mut rng);
        let mut config = ProtocolConfig::new(g, LinearCode::hamming_7_4());
        config.blocks = 2;
        let (_, t) = run(&config).unwrap();
        let tree = config.graph.mst_kruskal().unwrap();
        let report = analyze_transcript(&t, &tree).unwrap();
        assert_eq!(report.rounds.len(), 28);
        assert!(report.passes());
        assert_eq!(report.trivially_secure(), n == 2);
    }
}

#[test]
fn leader_keys_have_small_bit_bias() {
    let g = path3_graph();
    let mut config = ProtocolConfig::new(g, LinearCode::hamming_7_4());
    config.blocks = 10_000;
    config.seed = 11;
    let (results, _) = run(&config).unwrap();
    let report = key_uniformity_test(&results).unwrap();
    assert_eq!(report.samples, 10_000);
    assert!(
        report.bit_bias.iter().all(|&b| b < 0.02),
        "{:?}",
        report.bit_bias
    );
}

#[test]
fn constant_keys_are_rejected() {
    let mut config = ProtocolConfig::new(path3_graph(), LinearCode::hamming_7_4());
    config.blocks = 1000;
    let (mut results, _) = run(&config).unwrap();
    for r in &mut results {
        r.keys = vec![CodewordIndex(5); r.keys.len()];
    }
    let report = key_uniformity_test(&results).unwrap();
    assert!(report.rejects_uniformity(0.001));
    assert!(report.bit_bias.iter().all(|&b| b == 0.5));
}

#[test]
fn transcripts_roundtrip_through_the_log_format() {
    let mut config = ProtocolConfig::new(path3_graph(), LinearCode::hamming_7_4());
    config.blocks = 3;
    let (_, t) = run(&config).unwrap();
    let parsed = Transcript::parse_log(&t.to_log()).unwrap();
    assert_eq!(parsed.messages(), t.messages());
    assert!(t
        .messages()
        .iter()
        .any(|m| matches!(m.payload, Payload::CodeBroadcast(_))));
}

fn path3_graph() -> treekd::graph::SecurityGraph {
    tree_graph(3, &[(0, 1), (1, 2)], 0.0)
}
