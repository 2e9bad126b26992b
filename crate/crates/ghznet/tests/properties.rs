//! Property suites over the classical coding algebra, channel fidelities,
//! and criticality classification.

use ghznet::analysis::{entanglement_fidelity, IdentityChannel, MeasureResendChannel, MixtureChannel};
use ghznet::coding::{compose_frames, encode_all, decode_record, OutcomeRecord, PauliFrame};
use ghznet::qsim::{BellOutcome, Pauli, StateVector, XOutcome};
use ghznet::recovery::{criticality_check, Block, NetworkTopology};
use num_complex::Complex64;
use proptest::prelude::*;
use std::collections::BTreeSet;

fn arb_record(terminal: usize) -> impl Strategy<Value = OutcomeRecord> {
    (0usize..4, any::<bool>()).prop_map(move |(bell, x)| {
        OutcomeRecord::new(terminal, BellOutcome::from_index(bell), XOutcome::new(x))
    })
}

fn arb_records(n: usize) -> impl Strategy<Value = Vec<OutcomeRecord>> {
    (1..=n)
        .map(arb_record)
        .collect::<Vec<_>>()
        .prop_map(|records| records)
}

fn arb_records_any_n() -> impl Strategy<Value = Vec<OutcomeRecord>> {
    (3usize..=6).prop_flat_map(arb_records)
}

fn arb_flip_case() -> impl Strategy<Value = (Vec<OutcomeRecord>, usize, usize)> {
    (3usize..=5).prop_flat_map(|n| (arb_records(n), 0..n, 0usize..3))
}

proptest! {
    #[test]
    fn decode_inverts_encode(records in arb_records_any_n()) {
        let n = records.len();
        let messages = encode_all(&records).unwrap();
        prop_assert_eq!(messages.len(), n + 1);
        for r in &records {
            let (a, b) = decode_record(&messages, r.terminal).unwrap();
            prop_assert_eq!(a, r.a);
            prop_assert_eq!(b, r.b);
        }
    }

    #[test]
    fn frame_group_is_abelian_and_involutive(f in 0usize..4, g in 0usize..4) {
        let fr = PauliFrame::new(f & 2 != 0, f & 1 != 0);
        let gr = PauliFrame::new(g & 2 != 0, g & 1 != 0);
        prop_assert_eq!(compose_frames(fr, gr), compose_frames(gr, fr));
        prop_assert_eq!(compose_frames(fr, fr), PauliFrame::IDENTITY);
        prop_assert_eq!(compose_frames(fr, PauliFrame::IDENTITY), fr);
    }

    #[test]
    fn mixture_fidelity_is_convex(weight in 0.0f64..=1.0) {
        let mix = MixtureChannel {
            weight_a: weight,
            a: IdentityChannel,
            b: MeasureResendChannel,
        };
        let f = entanglement_fidelity(&mix).unwrap();
        let expect = weight + (1.0 - weight) * 0.5;
        prop_assert!((f - expect).abs() < 1e-12);
    }

    #[test]
    fn gates_preserve_norm(
        re_a in -1.0f64..1.0, im_a in -1.0f64..1.0,
        re_b in -1.0f64..1.0, im_b in -1.0f64..1.0,
        ops in proptest::collection::vec(0usize..5, 1..12),
    ) {
        prop_assume!(re_a.abs() + im_a.abs() + re_b.abs() + im_b.abs() > 1e-6);
        let single = StateVector::prepare_arbitrary(
            Complex64::new(re_a, im_a),
            Complex64::new(re_b, im_b),
        ).unwrap();
        let mut state = single.tensor(&StateVector::plus_state()).unwrap();
        for op in ops {
            state = match op {
                0 => state.apply_pauli(Pauli::X, 0).unwrap(),
                1 => state.apply_pauli(Pauli::Z, 1).unwrap(),
                2 => state.apply_pauli(Pauli::XZ, 0).unwrap(),
                3 => state.apply_cphase(0, 1).unwrap(),
                _ => state.apply_pauli(Pauli::I, 1).unwrap(),
            };
        }
        prop_assert!((state.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn criticality_is_monotone(
        n in 4usize..=9,
        fail_bits in any::<u16>(),
        extra in 1usize..=9,
    ) {
        prop_assume!(extra <= n);
        let nodes: Vec<usize> = (1..=n).collect();
        let edges: Vec<(usize, usize)> = (1..n).map(|i| (i, i + 1)).collect();
        let blocks: Vec<Block> = nodes
            .windows(3)
            .step_by(2)
            .map(|w| Block { nodes: w.to_vec() })
            .chain([Block { nodes: nodes.clone() }])
            .collect();
        let topology = NetworkTopology::new(nodes, edges, blocks, None).unwrap();
        let failures: BTreeSet<usize> = (1..=n).filter(|v| fail_bits >> (v - 1) & 1 == 1).collect();
        if criticality_check(&topology, &failures).is_critical() {
            let mut bigger = failures.clone();
            bigger.insert(extra);
            prop_assert!(criticality_check(&topology, &bigger).is_critical());
        }
    }

    #[test]
    fn single_bit_flip_moves_exactly_one_parity_lane(
        (base, which, flip_lane) in arb_flip_case(),
    ) {
        let mut flipped = base.clone();
        let r = &mut flipped[which];
        match flip_lane {
            0 => r.a = BellOutcome::new(!r.a.b1, r.a.b0),
            1 => r.a = BellOutcome::new(r.a.b1, !r.a.b0),
            _ => r.b = XOutcome::new(!r.b.bit),
        }
        let e0 = encode_all(&base).unwrap();
        let e1 = encode_all(&flipped).unwrap();
        // The full channel flips in exactly the matching lane; each
        // leave-one-out channel either matches it or is untouched (when it
        // excludes the flipped terminal).
        for (m0, m1) in e0.iter().zip(&e1) {
            let excluded = matches!(m0.channel, ghznet::coding::ChannelId::Ej(j) if j == base[which].terminal);
            if excluded {
                prop_assert_eq!(m0.a_parity, m1.a_parity);
                prop_assert_eq!(m0.b_parity, m1.b_parity);
            } else {
                match flip_lane {
                    0 => {
                        prop_assert_ne!(m0.a_parity.b1, m1.a_parity.b1);
                        prop_assert_eq!(m0.a_parity.b0, m1.a_parity.b0);
                        prop_assert_eq!(m0.b_parity, m1.b_parity);
                    }
                    1 => {
                        prop_assert_eq!(m0.a_parity.b1, m1.a_parity.b1);
                        prop_assert_ne!(m0.a_parity.b0, m1.a_parity.b0);
                        prop_assert_eq!(m0.b_parity, m1.b_parity);
                    }
                    _ => {
                        prop_assert_eq!(m0.a_parity, m1.a_parity);
                        prop_assert_ne!(m0.b_parity.bit, m1.b_parity.bit);
                    }
                }
            }
        }
    }
}
