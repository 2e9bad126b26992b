//! Acceptance suite: every criterion runs at its stated tolerance and
//! prints one `ACCEPTANCE <name> PASS` line (run with `--nocapture` to see
//! them; any failure fails the test).

use ghznet::analysis::{self, BOUND_COEFFICIENT};
use ghznet::butterfly::{
    build_instance, enumerate_branches, enumerate_copy_branches, run_round, truth_table_check,
    Chirality, RoutingConfig,
};
use ghznet::cli::{parse_scenario, run_scenario};
use ghznet::coding::{compose_frames, encode_all, decode_record, OutcomeRecord, PauliFrame};
use ghznet::qsim::{BellOutcome, Pauli, RandomSource, XOutcome, TOL_PROTOCOL};
use ghznet::recovery::{
    self, prepare_graph_network, Block, DetectorModel, NetworkTopology,
};
use num_complex::Complex64;
use std::collections::BTreeSet;
use std::path::Path;
use std::time::Instant;

const TOL_EXACT: f64 = 1e-12;

fn random_inputs(n: usize, seed: u64) -> Vec<(Complex64, Complex64)> {
    let mut rng = RandomSource::from_seed(seed);
    (0..n)
        .map(|_| {
            (
                Complex64::new(rng.next_unit() - 0.5, rng.next_unit() - 0.5),
                Complex64::new(rng.next_unit() - 0.5, rng.next_unit() - 0.5),
            )
        })
        .collect()
}

#[test]
fn criterion_truth_table_reproduction() {
    let started = Instant::now();
    let rows = truth_table_check(10, 0xACCE97).expect("truth table check runs");
    assert_eq!(rows.len(), 8);
    for row in &rows {
        assert!(
            row.residual_overlap > 1.0 - TOL_PROTOCOL,
            "residual mismatch on row ({:?}, {:?}): {}",
            row.bell,
            row.x,
            row.residual_overlap
        );
        assert!(
            row.restored_fidelity > 1.0 - TOL_PROTOCOL,
            "correction failed on row ({:?}, {:?}): {}",
            row.bell,
            row.x,
            row.restored_fidelity
        );
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 1.0,
        "truth table check took {elapsed:?}, budget 1 s"
    );
    println!("ACCEPTANCE truth_table_reproduction PASS");
}

#[test]
fn criterion_perfect_cross_transmission() {
    let started = Instant::now();
    for tuple in 0..20u64 {
        for chirality in [Chirality::Clockwise, Chirality::Counterclockwise] {
            let inputs3 = random_inputs(3, 1000 + tuple);
            let instance3 = build_instance(3, &inputs3).unwrap();
            let routing3 = RoutingConfig::new(3, chirality).unwrap();
            let transcripts = enumerate_branches(&instance3, &routing3).unwrap();
            assert_eq!(transcripts.len(), 512);
            for t in &transcripts {
                for &f in &t.final_fidelities {
                    assert!(
                        (f - 1.0).abs() < TOL_PROTOCOL,
                        "n=3 {chirality} tuple {tuple}: fidelity {f}"
                    );
                }
            }

            let inputs4 = random_inputs(4, 2000 + tuple);
            let instance4 = build_instance(4, &inputs4).unwrap();
            let routing4 = RoutingConfig::new(4, chirality).unwrap();
            let transcripts = enumerate_branches(&instance4, &routing4).unwrap();
            assert_eq!(transcripts.len(), 4096);
            for t in &transcripts {
                for &f in &t.final_fidelities {
                    assert!(
                        (f - 1.0).abs() < TOL_PROTOCOL,
                        "n=4 {chirality} tuple {tuple}: fidelity {f}"
                    );
                }
            }
        }
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 120.0,
        "cross-transmission sweep took {elapsed:?}, budget 2 min"
    );
    println!("ACCEPTANCE perfect_cross_transmission PASS");
}

#[test]
fn criterion_channel_structure() {
    for n in [3usize, 4, 5] {
        let inputs = random_inputs(n, 31 * n as u64);
        let instance = build_instance(n, &inputs).unwrap();
        let routing = RoutingConfig::new(n, Chirality::Clockwise).unwrap();
        let mut rng = RandomSource::from_seed(7);
        let transcript = run_round(&instance, &routing, &mut rng).unwrap();
        assert_eq!(
            transcript.messages.len(),
            n + 1,
            "n={n} should use n+1 parity channels"
        );
    }
    println!("ACCEPTANCE channel_structure PASS");
}

#[test]
fn criterion_fidelity_sum_bound() {
    assert!((analysis::threshold(3) - 2.1384).abs() < TOL_EXACT);
    assert!((analysis::threshold(4) - 2.28096).abs() < TOL_EXACT);

    // Entanglement-free baseline: measure-and-resend satisfies the bound.
    let baseline3 = analysis::baseline_no_entanglement(3).unwrap();
    assert!((baseline3.sum - 1.5).abs() < TOL_EXACT);
    assert!(baseline3.satisfied);
    let baseline4 = analysis::baseline_no_entanglement(4).unwrap();
    assert!(baseline4.satisfied);

    // The entangled protocol's sum equals d and violates the bound.
    for d in [3usize, 4] {
        let report = analysis::entangled_protocol_report(d, Chirality::Clockwise).unwrap();
        assert!((report.sum - d as f64).abs() < TOL_PROTOCOL);
        assert!(
            !report.satisfied,
            "entangled sum {} should exceed threshold {}",
            report.sum, report.threshold
        );
    }
    // Arithmetic separation for the remaining desk-scale sizes.
    for d in 3usize..=10 {
        assert!(d as f64 > analysis::threshold(d));
        assert!(analysis::threshold(d) < BOUND_COEFFICIENT);
    }
    println!("ACCEPTANCE fidelity_sum_bound PASS");
}

fn plus() -> (Complex64, Complex64) {
    let w = std::f64::consts::FRAC_1_SQRT_2;
    (Complex64::new(w, 0.0), Complex64::new(w, 0.0))
}

fn acceptance_topologies() -> Vec<NetworkTopology> {
    let block = |nodes: &[usize]| Block {
        nodes: nodes.to_vec(),
    };
    vec![
        // Five-node path.
        NetworkTopology::new(
            (1..=5).collect(),
            (1..5).map(|i| (i, i + 1)).collect(),
            vec![block(&[1, 2, 3]), block(&[3, 4, 5])],
            None,
        )
        .unwrap(),
        // Six-node cycle.
        NetworkTopology::new(
            (1..=6).collect(),
            (1..6).map(|i| (i, i + 1)).chain([(6, 1)]).collect(),
            vec![block(&[1, 2, 3]), block(&[3, 4, 5]), block(&[5, 6, 1])],
            None,
        )
        .unwrap(),
        // Seven-node star around node 1.
        NetworkTopology::new(
            (1..=7).collect(),
            (2..=7).map(|i| (1, i)).collect(),
            vec![block(&[1, 2, 3]), block(&[1, 4, 5]), block(&[1, 6, 7])],
            None,
        )
        .unwrap(),
        // Two triangles sharing node 3.
        NetworkTopology::new(
            (1..=5).collect(),
            vec![(1, 2), (2, 3), (1, 3), (3, 4), (4, 5), (3, 5)],
            vec![block(&[1, 2, 3]), block(&[3, 4, 5])],
            None,
        )
        .unwrap(),
        // Three-by-three grid.
        NetworkTopology::new(
            (1..=9).collect(),
            vec![
                (1, 2),
                (2, 3),
                (4, 5),
                (5, 6),
                (7, 8),
                (8, 9),
                (1, 4),
                (4, 7),
                (2, 5),
                (5, 8),
                (3, 6),
                (6, 9),
            ],
            vec![block(&[1, 2, 3]), block(&[4, 5, 6]), block(&[7, 8, 9])],
            None,
        )
        .unwrap(),
        // Complete graph on four nodes.
        NetworkTopology::new(
            (1..=4).collect(),
            vec![(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)],
            vec![block(&[1, 2, 3, 4])],
            None,
        )
        .unwrap(),
    ]
}

#[test]
fn criterion_graph_state_stabilizers() {
    let topologies = acceptance_topologies();
    assert!(topologies.len() >= 5);
    for (idx, topology) in topologies.iter().enumerate() {
        let network = prepare_graph_network(topology, plus()).unwrap();
        for (v, e) in network.stabilizer_report().unwrap() {
            assert!(
                (e - 1.0).abs() < TOL_PROTOCOL,
                "topology {idx}: prepared stabilizer at node {v} is {e}"
            );
        }

        // After any single excision (the input node is refused by contract).
        for &v in topology.nodes() {
            if v == topology.input() {
                continue;
            }
            let mut scratch = network.clone();
            let mut rng = RandomSource::from_seed(500 + v as u64);
            scratch.excise_node(v, &mut rng).unwrap();
            for (u, e) in scratch.stabilizer_report().unwrap() {
                assert!(
                    (e - 1.0).abs() < TOL_PROTOCOL,
                    "topology {idx}: stabilizer at {u} after excising {v} is {e}"
                );
            }
        }

        // After any successful single-failure recovery.
        for &v in topology.nodes() {
            let mut rng = RandomSource::from_seed(900 + v as u64);
            let failures = BTreeSet::from([v]);
            let (recovered, _, report) = recovery::recover(
                network.clone(),
                &failures,
                &DetectorModel::default(),
                &mut rng,
            )
            .unwrap();
            assert!(
                report.unrepaired.is_empty(),
                "topology {idx}: node {v} was not repaired"
            );
            for (u, e) in recovered.stabilizer_report().unwrap() {
                assert!(
                    (e - 1.0).abs() < TOL_PROTOCOL,
                    "topology {idx}: stabilizer at {u} after recovering {v} is {e}"
                );
            }
        }
    }
    println!("ACCEPTANCE graph_state_stabilizers PASS");
}

#[test]
fn criterion_shipped_scenarios() {
    let started = Instant::now();
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");

    let two_failure = std::fs::read_to_string(dir.join("two_failure_recovery.scn")).unwrap();
    let scenario = parse_scenario(&two_failure, &dir).unwrap();
    let report = run_scenario(&scenario).unwrap();
    assert!(
        report.all_pass(),
        "two-failure scenario verdicts: {:?}",
        report.verdicts
    );
    assert!(report
        .results
        .iter()
        .any(|l| l == "criticality recoverable"));

    let critical = std::fs::read_to_string(dir.join("critical_failure.scn")).unwrap();
    let scenario = parse_scenario(&critical, &dir).unwrap();
    let report = run_scenario(&scenario).unwrap();
    assert!(
        report.all_pass(),
        "critical scenario verdicts: {:?}",
        report.verdicts
    );
    assert!(report.results.iter().any(|l| l == "criticality critical"));
    // Untouched blocks keep their stabilizers.
    for line in report.results.iter().filter(|l| l.starts_with("STABILIZER")) {
        let value: f64 = line.split(' ').nth(2).unwrap().parse().unwrap();
        assert!((value - 1.0).abs() < TOL_PROTOCOL, "{line}");
    }

    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 30.0,
        "shipped scenarios took {elapsed:?}, budget 30 s"
    );
    println!("ACCEPTANCE shipped_scenarios PASS");
}

fn frame_matrix(f: PauliFrame) -> [[Complex64; 2]; 2] {
    let o = Complex64::ONE;
    let z = Complex64::ZERO;
    match f.to_pauli() {
        Pauli::I => [[o, z], [z, o]],
        Pauli::X => [[z, o], [o, z]],
        Pauli::Z => [[o, z], [z, -o]],
        Pauli::XZ => [[z, -o], [o, z]],
    }
}

fn mat_mul(a: [[Complex64; 2]; 2], b: [[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    let mut out = [[Complex64::ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for (k, row) in b.iter().enumerate() {
                out[i][j] += a[i][k] * row[j];
            }
        }
    }
    out
}

fn mat_inv(a: [[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let inv = det.inv();
    [
        [a[1][1] * inv, -a[0][1] * inv],
        [-a[1][0] * inv, a[0][0] * inv],
    ]
}

#[test]
fn criterion_property_suites() {
    // XOR decode identity, exhaustively for n ≤ 5.
    for n in 3usize..=5 {
        for assignment in 0usize..(1 << (3 * n)) {
            let records: Vec<OutcomeRecord> = (0..n)
                .map(|i| {
                    let bits = (assignment >> (3 * i)) & 0b111;
                    OutcomeRecord::new(
                        i + 1,
                        BellOutcome::from_index(bits >> 1),
                        XOutcome::new(bits & 1 != 0),
                    )
                })
                .collect();
            let messages = encode_all(&records).unwrap();
            for r in &records {
                let (a, b) = decode_record(&messages, r.terminal).unwrap();
                assert_eq!((a, b), (r.a, r.b), "decode identity at n={n}");
            }
        }
    }

    // Frame group table versus 2×2 matrix products, phase-insensitive.
    for fi in 0..4u8 {
        for gi in 0..4u8 {
            let f = PauliFrame::new(fi & 2 != 0, fi & 1 != 0);
            let g = PauliFrame::new(gi & 2 != 0, gi & 1 != 0);
            let lhs = mat_mul(frame_matrix(f), mat_inv(frame_matrix(g)));
            let rhs = frame_matrix(compose_frames(f, g));
            let same = (0..2).all(|i| (0..2).all(|j| (lhs[i][j] - rhs[i][j]).norm() < TOL_EXACT));
            let negated =
                (0..2).all(|i| (0..2).all(|j| (lhs[i][j] + rhs[i][j]).norm() < TOL_EXACT));
            assert!(same || negated, "frame pair ({fi}, {gi})");
        }
    }

    // No-signaling: the branch-averaged pre-correction reduced state of
    // every receiving qubit is maximally mixed.
    let inputs = random_inputs(3, 777);
    let instance = build_instance(3, &inputs).unwrap();
    let routing = RoutingConfig::new(3, Chirality::Clockwise).unwrap();
    for copy in 1..=3 {
        let branches = enumerate_copy_branches(&instance, &routing, copy).unwrap();
        let mut rho = [[Complex64::ZERO; 2]; 2];
        for b in &branches {
            let amps = b.delivered.amplitudes();
            for i in 0..2 {
                for j in 0..2 {
                    rho[i][j] += b.probability * amps[i] * amps[j].conj();
                }
            }
        }
        assert!((rho[0][0].re - 0.5).abs() < TOL_PROTOCOL);
        assert!((rho[1][1].re - 0.5).abs() < TOL_PROTOCOL);
        assert!(rho[0][1].norm() < TOL_PROTOCOL);
    }

    // Determinism: repeated seeded runs render byte-identical reports.
    let scenario = parse_scenario("[butterfly]\nn = 3\nseed = 99\n", Path::new(".")).unwrap();
    let first = run_scenario(&scenario).unwrap().render();
    let second = run_scenario(&scenario).unwrap().render();
    assert_eq!(first, second);

    println!("ACCEPTANCE property_suites PASS");
}
