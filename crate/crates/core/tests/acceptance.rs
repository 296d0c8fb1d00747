//! Acceptance run: one line per criterion, non-zero exit if any fails.
//!
//! A criterion whose hardware precondition is not met on this host is
//! reported as NOT RUN together with whatever was measured; it is neither
//! a pass nor silently skipped.

mod common;

use std::collections::HashMap;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use common::*;
use qvirt::observable::Mode;
use qvirt::pool::{linspace, JobState};
use qvirt::vqe::{fixed_point_energy_benchmark, synthetic_problem, BenchReport, BENCH_SEED};
use qvirt::{
    hardware_efficient_ansatz, parse_qasm, shots_for_precision, vqe_minimize, wait_all, Circuit,
    ExecutorPool, GateKind, JobHandle, JobTable, LocalCluster, Pauli, PauliOperator, PoolConfig,
    Simulator, VqeParams, WorkerConfig, WorkerDaemon,
};
use rand::Rng;

enum Verdict {
    Pass(String),
    Fail(String),
    NotRun(String),
}

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("took {t:.1?}, limit {limit:?}"))
}

fn oracle_equivalence() -> Check {
    let start = Instant::now();
    let mut rng = rng(0xACCE);
    let sim = Simulator::default();
    let mut worst = 0.0f64;
    for i in 0..200 {
        let n = rng.gen_range(1..=6);
        let gates = rng.gen_range(1..=30);
        let c = random_circuit(&mut rng, n, gates);
        let got = sim.simulate(&c).map_err(|e| e.to_string())?;
        let want = oracle_state(&c);
        let err = got
            .amplitudes()
            .iter()
            .zip(want.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        worst = worst.max(err);
        ensure(err <= 1e-9, || format!("circuit {i}: amplitude error {err:e}"))?;
    }
    within(start, Duration::from_secs(60))?;
    Ok(format!("200 circuits, max amplitude error {worst:.1e}, {:.1?}", start.elapsed()))
}

fn energy_oracle() -> Check {
    let start = Instant::now();
    let mut rng = rng(0xE0E0);
    let sim = Simulator::default();
    let shots = 100_000u64;
    let (mut worst_exact, mut worst_ratio) = (0.0f64, 0.0f64);
    for i in 0..50u64 {
        let n = rng.gen_range(1..=8);
        let gates = rng.gen_range(1..=30);
        let ansatz = random_circuit(&mut rng, n, gates);
        let terms = rng.gen_range(1..=20).min((1usize << (2 * n)) - 1);
        let h = PauliOperator::random(n, terms, 7000 + i);
        let want = oracle_energy(&h, &ansatz);

        let exact = h.expectation(&ansatz, Mode::Exact, &sim).map_err(|e| e.to_string())?.energy;
        let err = (exact - want).abs();
        worst_exact = worst_exact.max(err);
        ensure(err <= 1e-9, || format!("pair {i}: exact error {err:e}"))?;

        let sampled = h
            .expectation(&ansatz, Mode::Shots { shots, seed: i }, &sim)
            .map_err(|e| e.to_string())?
            .energy;
        let bound = 5.0 * h.coefficient_norm() / (shots as f64).sqrt();
        let err = (sampled - want).abs();
        worst_ratio = worst_ratio.max(err / bound);
        ensure(err <= bound, || format!("pair {i}: shot error {err:e} > {bound:e}"))?;
    }
    within(start, Duration::from_secs(120))?;
    Ok(format!(
        "50 pairs, exact max error {worst_exact:.1e}, shot error at most {:.0}% of bound, {:.1?}",
        100.0 * worst_ratio,
        start.elapsed()
    ))
}

fn post_rotations() -> Check {
    let ansatz = random_circuit(&mut rng(5), 6, 25);
    let prefix = ansatz.gates().len();
    let h = PauliOperator::random(6, 500, 0xF00);
    let circuits = h.measurement_circuits(&ansatz).map_err(|e| e.to_string())?;
    ensure(circuits.len() == h.len(), || "one circuit per non-identity term".into())?;
    let mut rotated = 0;
    for (t, c) in &circuits {
        let term = &h.terms()[*t];
        ensure(c.gates()[..prefix] == ansatz.gates()[..], || format!("term {t}: ansatz not preserved"))?;
        let mut expected = Vec::new();
        for (&q, &p) in &term.paulis {
            match p {
                Pauli::X => expected.push((GateKind::H, q)),
                Pauli::Y => expected.extend([(GateKind::Sdg, q), (GateKind::H, q)]),
                Pauli::Z => {}
            }
        }
        let tail: Vec<(GateKind, usize)> = c.gates()[prefix..]
            .iter()
            .filter(|g| g.kind != GateKind::Measure)
            .map(|g| (g.kind, g.qubits[0]))
            .collect();
        ensure(tail == expected, || format!("term {t} ({term}): post-rotations {tail:?}"))?;
        let measured: Vec<usize> = c.measurements().iter().map(|&(q, _)| q).collect();
        let support: Vec<usize> = term.paulis.keys().copied().collect();
        ensure(measured == support, || format!("term {t}: measured {measured:?}"))?;
        rotated += expected.len();
    }
    Ok(format!("{} terms, {rotated} basis-change gates, none on Z or identity letters", circuits.len()))
}

fn listing_end_to_end() -> Check {
    let start = Instant::now();
    let workers = LocalCluster::spawn(4, WorkerConfig::default()).map_err(|e| e.to_string())?;
    let addrs: Vec<String> = workers.addresses().iter().map(|a| a.to_string()).collect();
    let pool = ExecutorPool::from_addresses(&addrs, PoolConfig::default()).map_err(|e| e.to_string())?;
    let circuit = parse_qasm(LISTING).map_err(|e| e.to_string())?;
    let thetas: Vec<Vec<f64>> = linspace(0.0, std::f64::consts::PI, 100)
        .into_iter()
        .map(|t| vec![t])
        .collect();
    let table = JobTable::scan(circuit, &thetas, 1024, 1);
    let handles = (0..100)
        .map(|j| pool.run_async(&table, 0, j))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    wait_all(&handles, Duration::from_secs(30)).map_err(|e| e.to_string())?;
    let done = handles.iter().filter(|h| h.complete()).count();
    ensure(done == 100, || format!("{done}/100 complete"))?;
    let mass = handles[0].result().map(|r| r.probability("11")).unwrap_or(0.0);
    ensure(mass >= 0.99, || format!("theta=0 mass on 11 is {mass}"))?;
    let mut per: HashMap<String, usize> = HashMap::new();
    for h in &handles {
        *per.entry(h.endpoint().address().to_string()).or_default() += 1;
    }
    let mut counts: Vec<usize> = per.values().copied().collect();
    counts.sort();
    ensure(counts == [25; 4], || format!("per-endpoint counts {counts:?}"))?;
    within(start, Duration::from_secs(30))?;
    Ok(format!(
        "100/100 complete, theta=0 mass on \"11\" {mass:.3}, per endpoint {counts:?}, {:.1?}",
        start.elapsed()
    ))
}

fn run_benchmark() -> Result<(BenchReport, Duration), String> {
    let start = Instant::now();
    let workers = LocalCluster::spawn(4, WorkerConfig::default()).map_err(|e| e.to_string())?;
    let params = synthetic_problem(16, 3052, 2, BENCH_SEED);
    let report = fixed_point_energy_benchmark(&params, &[1, 2, 4], workers.cluster()).map_err(|e| e.to_string())?;
    Ok((report, start.elapsed()))
}

fn transparency(bench: &Result<(BenchReport, Duration), String>) -> Check {
    let (report, elapsed) = bench.as_ref().map_err(Clone::clone)?;
    ensure(report.terms == 3052 && report.qubits == 16, || "wrong problem size".into())?;
    let bits: Vec<u64> = report.rows.iter().map(|r| r.energy.to_bits()).collect();
    ensure(bits.iter().all(|b| *b == bits[0]), || {
        format!("energies differ: {:?}", report.rows.iter().map(|r| r.energy).collect::<Vec<_>>())
    })?;
    let cpw: Vec<Vec<usize>> = report.rows.iter().map(|r| r.circuits_per_worker.clone()).collect();
    ensure(cpw == vec![vec![3052], vec![1526; 2], vec![763; 4]], || format!("partition {cpw:?}"))?;
    ensure(*elapsed < Duration::from_secs(600), || format!("took {elapsed:.1?}, limit 600s"))?;
    Ok(format!(
        "E = {:.12} identical for k=1,2,4; circuits per worker 3052/1526/763; {elapsed:.1?}",
        report.rows[0].energy
    ))
}

fn scaling(bench: &Result<(BenchReport, Duration), String>) -> Verdict {
    let report = match bench {
        Ok((r, _)) => r,
        Err(e) => return Verdict::Fail(e.clone()),
    };
    let cores = thread::available_parallelism().map_or(1, |n| n.get());
    let speedup = report.rows.last().map_or(0.0, |r| r.speedup);
    let overhead = report
        .rows
        .iter()
        .map(|r| r.overhead_s / r.wall_s)
        .fold(0.0, f64::max);
    let measured = format!(
        "speedup(k=4) {speedup:.2}x, max overhead fraction {:.1}%, walls {:?}",
        100.0 * overhead,
        report.rows.iter().map(|r| format!("{:.2}s", r.wall_s)).collect::<Vec<_>>()
    );
    if overhead > 0.2 {
        return Verdict::Fail(format!("overhead fraction above 20%: {measured}"));
    }
    if cores < 4 {
        return Verdict::NotRun(format!(
            "speedup needs a host with at least 4 cores, this one has {cores}; overhead bound met; {measured}"
        ));
    }
    if speedup >= 2.8 {
        Verdict::Pass(measured)
    } else {
        Verdict::Fail(measured)
    }
}

fn vqe_convergence() -> Check {
    let start = Instant::now();
    let workers = LocalCluster::spawn(2, WorkerConfig::default()).map_err(|e| e.to_string())?;
    let z = PauliOperator::parse("(1.0) Z0").map_err(|e| e.to_string())?;
    let one = vqe_minimize(
        &VqeParams {
            max_iters: 100,
            ftol: 1e-10,
            ..VqeParams::new(hardware_efficient_ansatz(1, 1), z)
        },
        workers.cluster(),
    )
    .map_err(|e| e.to_string())?;
    ensure((one.opt_val + 1.0).abs() <= 1e-4 && one.evaluations <= 100, || {
        format!("1 qubit: opt_val {} after {} evaluations", one.opt_val, one.evaluations)
    })?;

    let h = PauliOperator::parse("(0.5) Z0 + (0.5) Z1 + (0.25) X0 X1").map_err(|e| e.to_string())?;
    let exact = ground_energy(&h, 2);
    let two = vqe_minimize(
        &VqeParams {
            max_iters: 300,
            ftol: 1e-10,
            theta0: vec![0.1, -0.2],
            n_virtual_qpus: 2,
            ..VqeParams::new(hardware_efficient_ansatz(2, 1), h)
        },
        workers.cluster(),
    )
    .map_err(|e| e.to_string())?;
    ensure((two.opt_val - exact).abs() <= 1e-3, || {
        format!("2 qubits: opt_val {} vs ground {exact}", two.opt_val)
    })?;
    within(start, Duration::from_secs(30))?;
    Ok(format!(
        "1q opt_val {:.7} in {} evals; 2q opt_val {:.6} vs ground {exact:.6} in {} evals; {:.1?}",
        one.opt_val,
        one.evaluations,
        two.opt_val,
        two.evaluations,
        start.elapsed()
    ))
}

fn shot_rule() -> Check {
    let shots = shots_for_precision(1e-3).map_err(|e| e.to_string())?;
    ensure(shots == 1_000_000, || format!("got {shots}"))?;
    Ok(format!("shots_for_precision(1e-3) = {shots}"))
}

fn bell() -> Circuit {
    let mut c = Circuit::new(2).unwrap();
    c.append(GateKind::H, &[0], None).unwrap();
    c.append(GateKind::CNOT, &[0, 1], None).unwrap();
    c.measure_all().unwrap();
    c
}

/// Polls every handle from a separate thread while workers die underneath.
fn fuzz_lifecycles(seed: u64) -> Result<(usize, usize), String> {
    let mut rng = rng(seed);
    let mut daemons = Vec::new();
    for _ in 0..3 {
        let config = WorkerConfig {
            delay: Duration::from_micros(rng.gen_range(0..3000)),
            ..WorkerConfig::default()
        };
        daemons.push(
            WorkerDaemon::bind("127.0.0.1:0", config)
                .and_then(WorkerDaemon::spawn)
                .map_err(|e| e.to_string())?,
        );
    }
    let addrs: Vec<String> = daemons.iter().map(|d| d.addr().to_string()).collect();
    let config = PoolConfig {
        connect_timeout: Duration::from_millis(200),
        lanes_per_endpoint: rng.gen_range(1..=2),
        ..PoolConfig::default()
    };
    let pool = ExecutorPool::from_addresses(&addrs, config).map_err(|e| e.to_string())?;
    let handles: Arc<Mutex<Vec<JobHandle>>> = Arc::default();
    let stop = Arc::new(AtomicBool::new(false));
    let observer = {
        let (handles, stop) = (handles.clone(), stop.clone());
        thread::spawn(move || -> Result<(), String> {
            let mut seen: HashMap<u64, JobState> = HashMap::new();
            while !stop.load(Ordering::SeqCst) {
                for h in handles.lock().unwrap().iter() {
                    let now = h.state();
                    if let Some(&before) = seen.get(&h.job_id()) {
                        // Polling may skip states but never sees one go backwards.
                        let forward = now == before || (!before.is_terminal() && now > before);
                        ensure(forward, || {
                            format!("job {} observed {before} then {now}", h.job_id())
                        })?;
                    }
                    seen.insert(h.job_id(), now);
                }
            }
            Ok(())
        })
    };
    let total = rng.gen_range(30..80);
    let kill_at: Vec<usize> = (0..rng.gen_range(1..=3)).map(|_| rng.gen_range(0..total)).collect();
    for i in 0..total {
        if kill_at.contains(&i) {
            let victim = rng.gen_range(0..daemons.len());
            daemons[victim].kill();
        }
        let h = match pool.get_next_available_qpu() {
            Ok(ep) => pool.async_execute(&ep, bell(), 32, i as u64).map_err(|e| e.to_string())?,
            Err(_) => break,
        };
        handles.lock().unwrap().push(h);
        if rng.gen_bool(0.3) {
            thread::sleep(Duration::from_micros(rng.gen_range(0..2000)));
        }
    }
    let hs = handles.lock().unwrap().clone();
    wait_all(&hs, Duration::from_secs(30)).map_err(|e| e.to_string())?;
    stop.store(true, Ordering::SeqCst);
    observer.join().map_err(|_| "observer panicked".to_string())??;
    let mut failed = 0;
    for h in &hs {
        let t = h.transitions();
        ensure(t.first() == Some(&JobState::Queued), || format!("job {} starts at {t:?}", h.job_id()))?;
        ensure(t.windows(2).all(|w| w[0].can_advance_to(w[1])), || {
            format!("job {} illegal lifecycle {t:?}", h.job_id())
        })?;
        match h.state() {
            JobState::Complete => ensure(h.result().is_some() && h.error().is_none(), || "complete without result".into())?,
            JobState::Failed => {
                failed += 1;
                ensure(h.result().is_none() && h.error().is_some(), || "failed without error".into())?
            }
            s => return Err(format!("job {} not terminal: {s}", h.job_id())),
        }
    }
    Ok((hs.len(), failed))
}

fn state_machine() -> Check {
    let (mut jobs, mut failed) = (0, 0);
    for seed in 0..12 {
        let (j, f) = fuzz_lifecycles(seed)?;
        jobs += j;
        failed += f;
    }
    ensure(failed > 0, || "no fault was actually injected".into())?;

    let delay = Duration::from_millis(4);
    let workers = LocalCluster::spawn(
        4,
        WorkerConfig {
            delay,
            ..WorkerConfig::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let addrs: Vec<String> = workers.addresses().iter().map(|a| a.to_string()).collect();
    let pool = ExecutorPool::from_addresses(&addrs, PoolConfig::default()).map_err(|e| e.to_string())?;
    let circuit = bell();
    let submit = |n: usize| -> Result<(Duration, Vec<JobHandle>), String> {
        let start = Instant::now();
        let hs = (0..n)
            .map(|i| {
                let ep = pool.get_next_available_qpu()?;
                pool.async_execute(&ep, circuit.clone(), 16, i as u64)
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        Ok((start.elapsed(), hs))
    };
    let start = Instant::now();
    let (t1000, hs) = submit(1000)?;
    // The 250 jobs queued on each endpoint need at least 250 delays to run.
    let floor = delay * 250;
    ensure(t1000 < floor / 10, || format!("submitting 1000 jobs took {t1000:?}"))?;
    let pending = hs.iter().filter(|h| !h.is_terminal()).count();
    ensure(pending > 900, || format!("only {pending} jobs pending right after submission"))?;
    wait_all(&hs, Duration::from_secs(60)).map_err(|e| e.to_string())?;
    let total = start.elapsed();
    ensure(hs.iter().all(|h| h.complete()), || "not every delayed job completed".into())?;
    Ok(format!(
        "{jobs} fuzzed jobs ({failed} failed by injected worker deaths) with legal lifecycles; \
         1000 submissions in {t1000:.1?} ({:.1} us/job) vs {total:.1?} to execute",
        t1000.as_secs_f64() * 1e6 / 1000.0
    ))
}

fn run(name: &str, f: impl FnOnce() -> Verdict) -> bool {
    let verdict = panic::catch_unwind(AssertUnwindSafe(f))
        .unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Verdict::Fail(format!("panicked: {msg}"))
        });
    let (tag, detail, ok) = match verdict {
        Verdict::Pass(d) => ("PASS", d, true),
        Verdict::Fail(d) => ("FAIL", d, false),
        Verdict::NotRun(d) => ("NOT RUN", d, true),
    };
    println!("[{tag}] {name}: {detail}");
    ok
}

fn check(f: impl FnOnce() -> Check) -> impl FnOnce() -> Verdict {
    move || match f() {
        Ok(d) => Verdict::Pass(d),
        Err(d) => Verdict::Fail(d),
    }
}

fn main() -> ExitCode {
    println!("acceptance criteria");
    let mut ok = true;
    ok &= run("oracle equivalence", check(oracle_equivalence));
    ok &= run("energy oracle", check(energy_oracle));
    ok &= run("post-rotation structure", check(post_rotations));
    ok &= run("quickstart scan end-to-end", check(listing_end_to_end));
    let bench = run_benchmark();
    ok &= run("distribution transparency", check(|| transparency(&bench)));
    ok &= run("scaling shape", || scaling(&bench));
    ok &= run("vqe convergence", check(vqe_convergence));
    ok &= run("shot rule", check(shot_rule));
    ok &= run("job state machine", check(state_machine));
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
