mod common;

use std::io::{BufReader, BufWriter, Write};
use std::net::TcpStream;
use std::time::Duration;

use common::{random_circuit, rng};
use qvirt::observable::Mode;
use qvirt::protocol::{self, ErrorCode, Outcome, Request, Response};
use qvirt::{
    Cluster, ClusterError, EnsembleJob, LocalCluster, PauliOperator, Simulator, WorkerConfig,
    WorkerDaemon,
};

fn ensemble(n: usize, qubits: usize, seed: u64) -> Vec<qvirt::Circuit> {
    let mut rng = rng(seed);
    let ansatz = random_circuit(&mut rng, qubits, 20);
    PauliOperator::random(qubits, n, seed)
        .measurement_circuits(&ansatz)
        .unwrap()
        .into_iter()
        .map(|(_, c)| c)
        .collect()
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let workers = LocalCluster::spawn(4, WorkerConfig::default()).unwrap();
    let circuits = ensemble(37, 5, 3);
    for mode in [Mode::Exact, Mode::Shots { shots: 256, seed: 17 }] {
        let runs: Vec<_> = (1..=4)
            .map(|k| {
                workers
                    .cluster()
                    .scatter_execute(&EnsembleJob {
                        circuits: circuits.clone(),
                        mode,
                        n_virtual_qpus: k,
                    })
                    .unwrap()
            })
            .collect();
        for r in &runs[1..] {
            assert_eq!(r.results, runs[0].results);
        }
        assert_eq!(runs[2].circuits_per_worker, vec![13, 12, 12]);
        assert_eq!(runs[3].timing.execution_seconds.len(), 4);
    }
}

#[test]
fn gathered_values_match_local_simulation() {
    let workers = LocalCluster::spawn(2, WorkerConfig::default()).unwrap();
    let circuits = ensemble(9, 4, 8);
    let r = workers
        .cluster()
        .scatter_execute(&EnsembleJob {
            circuits: circuits.clone(),
            mode: Mode::Exact,
            n_virtual_qpus: 2,
        })
        .unwrap();
    let sim = Simulator::default();
    for (c, v) in circuits.iter().zip(r.parities()) {
        assert_eq!(sim.exact_parity(c).unwrap().to_bits(), v.to_bits());
    }
    let t = &r.timing;
    assert!(t.wall_seconds >= t.max_execution());
    assert!((t.pre_post_seconds - (t.wall_seconds - t.max_execution())).abs() < 1e-12);
}

#[test]
fn more_workers_than_circuits() {
    let workers = LocalCluster::spawn(4, WorkerConfig::default()).unwrap();
    let r = workers
        .cluster()
        .scatter_execute(&EnsembleJob {
            circuits: ensemble(2, 2, 1),
            mode: Mode::Exact,
            n_virtual_qpus: 4,
        })
        .unwrap();
    assert_eq!(r.circuits_per_worker, vec![1, 1, 0, 0]);
    assert_eq!(r.results.len(), 2);
}

#[test]
fn failed_worker_fails_ensemble_with_partial_results() {
    let mut workers = LocalCluster::spawn(3, WorkerConfig::default()).unwrap();
    workers.handles[1].kill();
    let circuits = ensemble(9, 3, 5);
    let err = workers
        .cluster()
        .scatter_execute(&EnsembleJob {
            circuits,
            mode: Mode::Exact,
            n_virtual_qpus: 3,
        })
        .unwrap_err();
    match err {
        ClusterError::WorkerFailed { worker, partial, message, .. } => {
            assert_eq!(worker, 1);
            assert!(message.contains("transport"), "{message}");
            let present: Vec<bool> = partial.iter().map(Option::is_some).collect();
            assert_eq!(present, [true, true, true, false, false, false, true, true, true]);
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(workers.cluster().ping_all().is_err());
}

#[test]
fn capability_error_reaches_coordinator() {
    let config = WorkerConfig {
        max_qubits: 3,
        ..WorkerConfig::default()
    };
    let workers = LocalCluster::spawn(1, config).unwrap();
    let err = workers
        .cluster()
        .scatter_execute(&EnsembleJob {
            circuits: ensemble(4, 4, 2),
            mode: Mode::Exact,
            n_virtual_qpus: 1,
        })
        .unwrap_err();
    assert!(err.to_string().contains("Capability"), "{err}");
}

#[test]
fn unreachable_address() {
    assert!(matches!(Cluster::new(["not an address"]), Err(ClusterError::Address(_))));
}

fn connect(addr: std::net::SocketAddr) -> (BufReader<TcpStream>, BufWriter<TcpStream>) {
    let s = TcpStream::connect(addr).unwrap();
    s.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    (BufReader::new(s.try_clone().unwrap()), BufWriter::new(s))
}

#[test]
fn malformed_frames_keep_the_connection_alive() {
    let workers = LocalCluster::spawn(1, WorkerConfig::default()).unwrap();
    let (mut r, mut w) = connect(workers.addresses()[0]);

    protocol::write_frame(&mut w, b"{not json").unwrap();
    w.flush().unwrap();
    match protocol::recv::<_, Response>(&mut r).unwrap() {
        Response::Error { code, .. } => assert_eq!(code, ErrorCode::Malformed),
        other => panic!("{other:?}"),
    }

    protocol::write_frame(&mut w, br#"{"type":"warp"}"#).unwrap();
    w.flush().unwrap();
    assert!(matches!(
        protocol::recv::<_, Response>(&mut r).unwrap(),
        Response::Error { code: ErrorCode::Malformed, .. }
    ));

    // Structurally valid JSON describing an invalid circuit.
    let bad = br#"{"type":"execute","job_id":3,"circuit":{"num_qubits":1,"gates":[{"kind":"CNOT","qubits":[0,0]}],"measurements":[]},"shots":10,"seed":0}"#;
    protocol::write_frame(&mut w, bad).unwrap();
    w.flush().unwrap();
    assert!(matches!(
        protocol::recv::<_, Response>(&mut r).unwrap(),
        Response::Error { .. }
    ));

    protocol::send(&mut w, &Request::Ping).unwrap();
    assert!(matches!(protocol::recv::<_, Response>(&mut r).unwrap(), Response::Pong { .. }));
}

#[test]
fn batch_seed_mismatch_is_malformed() {
    let workers = LocalCluster::spawn(1, WorkerConfig::default()).unwrap();
    let (mut r, mut w) = connect(workers.addresses()[0]);
    let request = Request::Batch {
        job_id: 1,
        circuits: ensemble(2, 2, 4),
        shots: Some(10),
        seeds: vec![1],
    };
    protocol::send(&mut w, &request).unwrap();
    match protocol::recv::<_, Response>(&mut r).unwrap() {
        Response::Error { code, job_id, .. } => {
            assert_eq!(code, ErrorCode::Malformed);
            assert_eq!(job_id, Some(1));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn exact_execute_reply_shape() {
    let workers = LocalCluster::spawn(1, WorkerConfig::default()).unwrap();
    let (mut r, mut w) = connect(workers.addresses()[0]);
    let mut circuit = qvirt::Circuit::new(1).unwrap();
    circuit.append(qvirt::GateKind::X, &[0], None).unwrap();
    circuit.measure_all().unwrap();
    let request = Request::Execute {
        job_id: 5,
        circuit,
        shots: None,
        seed: 0,
    };
    protocol::send(&mut w, &request).unwrap();
    match protocol::recv::<_, Response>(&mut r).unwrap() {
        Response::Result { job_id, outcome, .. } => {
            assert_eq!(job_id, 5);
            assert_eq!(outcome, Outcome::Expectations { expectations: vec![-1.0] });
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn shutdown_stops_the_daemon() {
    let handle = WorkerDaemon::bind("127.0.0.1:0", WorkerConfig::default())
        .unwrap()
        .spawn()
        .unwrap();
    let (mut r, mut w) = connect(handle.addr());
    protocol::send(&mut w, &Request::Shutdown).unwrap();
    assert!(matches!(protocol::recv::<_, Response>(&mut r).unwrap(), Response::Bye));
    for _ in 0..100 {
        if handle.is_stopped() {
            break;
        }
        std::thread::sleep(Duration::from_millis(10));
    }
    assert!(handle.is_stopped());
    assert!(Cluster::new([handle.addr()]).unwrap().ping_all().is_err());
}
