//! End-to-end acceptance gate. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails.

use std::collections::HashMap;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use adafleet::citygrid::GridCoord;
use adafleet::cpd::{dirichlet_mle, log_likelihood, sample_dirichlet, DirichletParams, SuffStats};
use adafleet::demand::{Request, RequestStatus};
use adafleet::exec::{with_threads, Exec};
use adafleet::harness::config_file::load_config;
use adafleet::harness::cpd_bench::{run_bench, BenchSettings};
use adafleet::harness::experiment::{compare, threads_from_env, Arm};
use adafleet::harness::metrics::metrics_to_string;
use adafleet::qdispatch::{q_update, reward, switch_context, Action, ModelBank, RewardComponents, RewardWeights};
use adafleet::routing::{feasible_capacity_fast, route_planning, CapacityIndex, Route, Stop, StopKind};
use adafleet::simcore::{run, SimConfig};
use adafleet::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Gate {
    lines: Vec<String>,
    failed: Vec<u32>,
}

impl Gate {
    fn record(&mut self, n: u32, name: &str, pass: bool, detail: String) {
        let line = format!("criterion {n} {} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        println!("{line}");
        self.lines.push(line);
        if !pass {
            self.failed.push(n);
        }
    }
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

// ---- random routes on a 12x12 grid ------------------------------------

fn coord(rng: &mut ChaCha8Rng) -> GridCoord {
    GridCoord::new(rng.random_range(0..12), rng.random_range(0..12))
}

fn request(id: u64, rng: &mut ChaCha8Rng) -> Request {
    let origin = coord(rng);
    let mut destination = coord(rng);
    while destination == origin {
        destination = coord(rng);
    }
    Request {
        id,
        origin,
        destination,
        passengers: rng.random_range(1..=2),
        request_tick: 0,
        fare: 0.0,
        status: RequestStatus::Pending,
    }
}

/// Up to three requests, each either on board (drop-off only) or assigned
/// (pickup before drop-off). Returns the route and the on-board count.
fn random_route(rng: &mut ChaCha8Rng) -> (Route, u32) {
    let mut route = Route::new(coord(rng));
    let mut onboard = 0;
    for id in 1..=rng.random_range(0..=3u64) {
        let r = request(id, rng);
        if rng.random_bool(0.5) {
            onboard += r.passengers;
            let at = rng.random_range(0..=route.stops.len());
            route.stops.insert(at, Stop::dropoff(&r));
        } else {
            let p = rng.random_range(0..=route.stops.len());
            route.stops.insert(p, Stop::pickup(&r));
            let d = rng.random_range(p + 1..=route.stops.len());
            route.stops.insert(d, Stop::dropoff(&r));
        }
    }
    (route, onboard)
}

fn path_cells(anchor: GridCoord, stops: &[Stop]) -> u64 {
    let mut prev = anchor;
    let mut total = 0u64;
    for s in stops {
        total += (prev.row.abs_diff(s.coord.row) + prev.col.abs_diff(s.coord.col)) as u64;
        prev = s.coord;
    }
    total
}

/// Full-recomputation two-pass search: every pickup slot priced by the
/// whole path, earliest minimum kept; then every later drop-off slot.
fn two_pass_oracle(route: &Route, r: &Request) -> (u64, usize, usize) {
    let n = route.stops.len();
    let mut best: Option<(u64, usize)> = None;
    for x in 0..=n {
        let mut s = route.stops.clone();
        s.insert(x, Stop::pickup(r));
        let c = path_cells(route.anchor, &s);
        if best.is_none_or(|(b, _)| c < b) {
            best = Some((c, x));
        }
    }
    let (_, x) = best.unwrap();
    let mut with_p = route.stops.clone();
    with_p.insert(x, Stop::pickup(r));
    let mut best: Option<(u64, usize)> = None;
    for y in x + 1..=n + 1 {
        let mut s = with_p.clone();
        s.insert(y, Stop::dropoff(r));
        let c = path_cells(route.anchor, &s);
        if best.is_none_or(|(b, _)| c < b) {
            best = Some((c, y));
        }
    }
    let (c, y) = best.unwrap();
    (c, x, y)
}

fn criterion_1(g: &mut Gate) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let (route, _) = random_route(&mut rng);
        let r = request(99, &mut rng);
        let plan = route_planning(&route, &r);
        let (cost, x, y) = two_pass_oracle(&route, &r);
        let ok = plan.cost_cells == cost
            && plan.pickup_index == x
            && plan.dropoff_index == y
            && path_cells(plan.route.anchor, &plan.route.stops) == cost;
        if !ok {
            mismatches += 1;
        }
    }
    let t = start.elapsed();
    g.record(
        1,
        "insertion matches exhaustive two-pass search",
        mismatches == 0 && t < Duration::from_secs(10),
        format!("1000 instances, {mismatches} mismatches, {}", secs(t)),
    );
}

fn criterion_2(g: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(2002);
    let cmax = 4;
    let mut checked = 0;
    let mut disagreements = 0;
    while checked < 1000 {
        let (route, onboard) = random_route(&mut rng);
        // occupancy before and after each stop, by hand
        let mut load = onboard;
        let mut ext = vec![load];
        for s in &route.stops {
            match s.kind {
                StopKind::Pickup => load += s.passengers,
                StopKind::Dropoff => load -= s.passengers,
            }
            ext.push(load);
        }
        if ext.iter().any(|&v| v > cmax) {
            continue;
        }
        checked += 1;
        let n = route.stops.len();
        let x = rng.random_range(0..=n);
        let y = rng.random_range(x + 1..=n + 1);
        let pax = rng.random_range(1..=3);
        // naive re-scan of the route with both stops in place
        let r = Request { passengers: pax, ..request(50, &mut rng) };
        let mut stops = route.stops.clone();
        stops.insert(x, Stop::pickup(&r));
        stops.insert(y, Stop::dropoff(&r));
        let mut load = onboard;
        let mut naive = load <= cmax;
        for s in &stops {
            match s.kind {
                StopKind::Pickup => load += s.passengers,
                StopKind::Dropoff => load -= s.passengers,
            }
            naive &= load <= cmax;
        }
        let index = CapacityIndex::for_route(&route, onboard).unwrap();
        if feasible_capacity_fast(&index, x, y, pax, cmax) != naive {
            disagreements += 1;
        }
    }
    g.record(
        2,
        "fast capacity check agrees with re-scan",
        disagreements == 0,
        format!("{checked} instances, {disagreements} disagreements"),
    );
}

fn criterion_3(g: &mut Gate) {
    let start = Instant::now();
    let truth = [2.0, 5.0, 3.0];
    let mut rng = ChaCha8Rng::seed_from_u64(3003);
    let samples: Vec<_> = (0..5000).map(|_| sample_dirichlet(&truth, &mut rng).unwrap()).collect();
    let fit = dirichlet_mle(&samples).unwrap();
    let rel: Vec<f64> = fit.alpha().iter().zip(truth).map(|(a, t)| (a - t).abs() / t).collect();
    let max_rel = rel.iter().cloned().fold(0.0, f64::max);
    let ll_fit = log_likelihood(&samples, &fit).unwrap();
    let ll_true = log_likelihood(&samples, &DirichletParams::new(truth.to_vec()).unwrap()).unwrap();
    let mean_log = SuffStats::from_samples(&samples).unwrap().mean_log();
    let grad = fit
        .objective_gradient(&mean_log)
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max);
    let t = start.elapsed();
    g.record(
        3,
        "Dirichlet MLE recovers (2, 5, 3)",
        max_rel <= 0.10 && ll_fit >= ll_true && grad < 1e-5 && t < Duration::from_secs(5),
        format!(
            "alpha {:.3?}, max rel err {max_rel:.4}, LL fit {ll_fit:.3} vs true {ll_true:.3}, |grad| {grad:.2e}, {}",
            fit.alpha(),
            secs(t)
        ),
    );
}

fn criterion_4(g: &mut Gate) {
    let start = Instant::now();
    let r = run_bench(&BenchSettings::default(), Exec::Parallel).unwrap();
    let t = start.elapsed();
    g.record(
        4,
        "change recovery on 40+40 Dirichlet windows",
        r.recall >= 0.90 && r.false_positive_rate <= 0.10 && t < Duration::from_secs(60),
        format!(
            "recall {:.2} (|T*-40| <= 3), false positive rate {:.2}, mean offset {:.2}, {}",
            r.recall,
            r.false_positive_rate,
            r.mean_latency,
            secs(t)
        ),
    );
}

fn criterion_5(g: &mut Gate) {
    let zone = GridCoord::new(3, 4);
    let mut bank = ModelBank::new(1).unwrap();
    q_update(&mut bank, zone, Action::STAY, 10.0, GridCoord::new(0, 0), 0.1, 0.9);
    let worked = bank.q(zone, Action::STAY);

    let mut rng = ChaCha8Rng::seed_from_u64(5005);
    let mut bank = ModelBank::new(1).unwrap();
    let mut shadow: HashMap<(GridCoord, usize), f64> = HashMap::new();
    let zones: Vec<GridCoord> = (0..4).map(|i| GridCoord::new(i, i + 1)).collect();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let z = zones[rng.random_range(0..zones.len())];
        let next = zones[rng.random_range(0..zones.len())];
        let a = rng.random_range(0..5usize);
        let r = rng.random_range(-20.0..20.0);
        let sigma = rng.random_range(0.001..0.1);
        let eta = 0.9;
        let max_next = (0..225)
            .map(|b| *shadow.get(&(next, b)).unwrap_or(&0.0))
            .fold(f64::NEG_INFINITY, f64::max);
        let old = *shadow.get(&(z, a)).unwrap_or(&0.0);
        let expect = (1.0 - sigma) * old + sigma * (r + eta * max_next);
        shadow.insert((z, a), expect);
        q_update(&mut bank, z, Action::from_index(a), r, next, sigma, eta);
        worst = worst.max((bank.q(z, Action::from_index(a)) - expect).abs());
    }

    let k = 4;
    let mut cyc = ModelBank::new(k).unwrap();
    let mut seen = vec![cyc.context()];
    for t in 0..k as u64 {
        seen.push(switch_context(&mut cyc, t));
    }
    let wraps = seen == vec![1, 2, 3, 4, 1];
    g.record(
        5,
        "Q-update exactness and cyclic switching",
        (worked - 1.0).abs() <= 1e-12 && worst <= 1e-12 && wraps,
        format!("worked example Q = {worked}, worst random error {worst:.1e}, contexts {seen:?}"),
    );
}

fn criterion_6(g: &mut Gate) {
    let w = RewardWeights::new([10.0, 1.0, 5.0, 12.0, 8.0]).unwrap();
    let c = RewardComponents {
        served: 1,
        dispatch_minutes: 2.0,
        extra_minutes: 0.0,
        profit: 5.0,
        activated: true,
    };
    let r = reward(&c, &w);
    g.record(6, "reward arithmetic", r == 60.0, format!("reward {r}"));
}

fn paired_config() -> SimConfig {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/paired.conf");
    load_config(&p).unwrap()
}

fn criteria_7_and_8(g: &mut Gate) {
    let cfg = paired_config();
    let start = Instant::now();
    let seeds: Vec<u64> = (0..5).collect();
    let result = compare(&cfg, &seeds, 30, Exec::Parallel, threads_from_env().unwrap());
    let t = start.elapsed();
    match result {
        Ok(rep) => {
            let a = rep.mean_accept(Arm::Adaptive);
            let b = rep.mean_accept(Arm::Baseline);
            let per_seed: Vec<String> = rep
                .pairs
                .iter()
                .map(|p| format!("{}:{:+.4}", p.seed, p.adaptive.accept_rate - p.baseline.accept_rate))
                .collect();
            g.record(
                7,
                "adaptive beats baseline with change points recovered",
                a > b && rep.pooled.recall >= 0.7 && t < Duration::from_secs(600),
                format!(
                    "accept {a:.4} vs {b:.4} (per seed {}), recall {:.2}, precision {:.2}, mean |dt| {:.1}, {}",
                    per_seed.join(" "),
                    rep.pooled.recall,
                    rep.pooled.precision,
                    rep.pooled.mean_abs_delta,
                    secs(t)
                ),
            );
            let ticks = 2 * rep.pairs.len() as u64 * cfg.ticks;
            g.record(8, "conservation sweep", true, format!("0 violations over {ticks} checked ticks"));
        }
        Err(Error::Invariant(msg)) => {
            g.record(7, "adaptive beats baseline with change points recovered", false, "runs aborted".into());
            g.record(8, "conservation sweep", false, msg);
        }
        Err(e) => panic!("paired comparison failed: {e}"),
    }
}

fn criterion_9(g: &mut Gate) {
    let cfg = paired_config();
    let csv = |threads: Option<usize>, exec: Exec| {
        let mut c = cfg.clone();
        c.exec = exec;
        let out = with_threads(threads, || run(&c, 7)).unwrap();
        metrics_to_string(&out.metrics).unwrap()
    };
    let a = csv(Some(1), Exec::Parallel);
    let b = csv(Some(4), Exec::Parallel);
    let c = csv(None, Exec::Sequential);
    g.record(
        9,
        "byte-identical metrics across thread counts",
        a == b && b == c,
        format!("{} bytes each, 1 thread, 4 threads and sequential", a.len()),
    );
}

#[test]
fn acceptance() {
    let mut g = Gate {
        lines: Vec::new(),
        failed: Vec::new(),
    };
    criterion_1(&mut g);
    criterion_2(&mut g);
    criterion_3(&mut g);
    criterion_4(&mut g);
    criterion_5(&mut g);
    criterion_6(&mut g);
    criteria_7_and_8(&mut g);
    criterion_9(&mut g);
    assert!(g.failed.is_empty(), "failed criteria {:?}\n{}", g.failed, g.lines.join("\n"));
}
