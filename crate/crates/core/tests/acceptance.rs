//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fails.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uavrelay::beamforming::{bb_uav_transmit_rzf, HybridBeamformers, RfStage};
use uavrelay::channel::complex_gaussian;
use uavrelay::clustering::{kmeans_associate, Assignment};
use uavrelay::geometry::{ArrayGeometry, Position3D};
use uavrelay::harness::{base_layout, batch_ids, draw_users, fig3_surface, parse_results_csv, swarm_seed, ExperimentConfig, Preset, ResultRow};
use uavrelay::linalg::CMatrix;
use uavrelay::placement::{decode, evaluate_candidate, evaluate_objective, optimize, slot_bounds, ObjectiveKind, SchemeId};
use uavrelay::pso::{run_swarm, SwarmConfig};
use uavrelay::rates::{rate_first_hop, rate_second_hop, sinr_user, LinkTerms, NoiseModel};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng, 1.0))
}

/// Dense complex inverse by Gauss-Jordan elimination with partial pivoting.
fn gauss_jordan_inverse(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    let mut a: Vec<Vec<Complex64>> = (0..n)
        .map(|i| {
            let mut row: Vec<Complex64> = (0..n).map(|j| m[(i, j)]).collect();
            row.extend((0..n).map(|j| Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0)));
            row
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].norm().total_cmp(&a[y][c].norm())).unwrap();
        a.swap(c, p);
        let pivot = a[c][c];
        for v in a[c].iter_mut() {
            *v /= pivot;
        }
        for r in 0..n {
            if r != c {
                let f = a[r][c];
                for j in 0..2 * n {
                    let t = a[c][j];
                    a[r][j] -= f * t;
                }
            }
        }
    }
    CMatrix::from_fn(n, n, |i, j| a[i][n + j])
}

fn cm_gap(f: &RfStage) -> f64 {
    let target = 1.0 / (f.matrix.nrows() as f64).sqrt();
    f.matrix.iter().map(|z| (z.norm() - target).abs()).fold(0.0, f64::max)
}

/// `‖F·B·diag(√p)‖_F²` by explicit sums.
fn radiated(f: &CMatrix, b: &CMatrix, p: &[f64]) -> f64 {
    let mut total = 0.0;
    for j in 0..b.ncols() {
        for n in 0..f.nrows() {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..f.ncols() {
                acc += f[(n, r)] * b[(r, j)];
            }
            total += p[j] * acc.norm_sqr();
        }
    }
    total
}

fn unitary_gap(b: &CMatrix) -> f64 {
    let g = b * b.adjoint();
    (g - CMatrix::identity(b.nrows(), b.nrows())).norm()
}

fn criterion_1() -> Outcome {
    let cfg = Preset::Desk.config();
    let model = cfg.system_model(30.0).unwrap();
    let (mut cm, mut power, mut unit) = (0.0f64, 0.0f64, 0.0f64);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checked = 0;
    for &m in &cfg.m_uavs {
        for id in SchemeId::ALL {
            let scheme = cfg.scheme(id, m);
            for drop in 0..cfg.user_drops {
                let base = base_layout(&cfg, draw_users(&cfg, drop), m).unwrap();
                let bounds = slot_bounds(&base, m);
                for r in 0..5u64 {
                    let mut slots = bounds.sample(&mut rng);
                    slots[2 * m..].iter_mut().for_each(|a| *a = a.max(0.05));
                    let cand = decode(&slots, m, base.n_users()).unwrap();
                    let ev = evaluate_candidate(&model, &scheme, &base, &cand, r).unwrap();
                    let hb: &HybridBeamformers = &ev.beamformers;
                    cm = cm.max(cm_gap(&hb.f_b));
                    power = power.max((radiated(&hb.f_b.matrix, &hb.b_b.matrix, &hb.pa.p_bs) - model.p_t).abs() / model.p_t);
                    for (i, u) in hb.uavs.iter().enumerate() {
                        cm = cm.max(cm_gap(&u.f_ur)).max(cm_gap(&u.f_ut));
                        let pu = radiated(&u.f_ut.matrix, &u.b_ut.matrix, &hb.pa.p_uav[i]);
                        power = power.max((pu - model.p_uav).abs() / model.p_uav);
                        unit = unit.max(unitary_gap(&u.b_ur.matrix));
                    }
                    checked += 1;
                }
            }
        }
    }

    let mut kmeans_ok = true;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(4..40);
        let users: Vec<Position3D> = (0..n)
            .map(|_| Position3D::new(rng.random_range(0.0..100.0), rng.random_range(0.0..100.0), 0.0))
            .collect();
        let k = rng.random_range(1..=4);
        let out = kmeans_associate(&users, k, 100, &mut rng).unwrap();
        kmeans_ok &= out.objective_trace.windows(2).all(|w| w[1] <= w[0] + 1e-9 * w[0].max(1.0));
    }

    let scheme = cfg.scheme(SchemeId::Joint, 2);
    let base = base_layout(&cfg, draw_users(&cfg, 0), 2).unwrap();
    let bounds = slot_bounds(&base, 2);
    let batch = [0u64];
    let objective = |x: &[f64]| evaluate_objective(&model, &scheme, &base, x, &batch, ObjectiveKind::TotalRate);
    let mut pso_ok = true;
    for seed in 0..20u64 {
        let swarm = SwarmConfig {
            n_particles: 8,
            n_iters: 10,
            rng_seed: seed,
            ..SwarmConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let run = run_swarm(&swarm, &bounds, None, &objective, &mut rng, |_| {});
        pso_ok &= run.history.windows(2).all(|w| w[1] >= w[0]) && run.history.len() == 11;
    }

    let passed = cm <= 1e-12 && power <= 1e-9 && unit <= 1e-10 && kmeans_ok && pso_ok;
    outcome(
        passed,
        format!(
            "{checked} designs: CM dev {cm:.1e}, power rel err {power:.1e}, B_ur unitarity {unit:.1e}; \
             K-means monotone {kmeans_ok} (50 runs); PSO monotone {pso_ok} (20 runs)"
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut rzf = 0.0f64;
    for i in 0..120 {
        let km = 1 + i % 4;
        let h = random_matrix(km, 4, &mut rng);
        let beta = match i % 4 {
            0 => 1.0,
            1 => 1e-3,
            2 => 1e-9,
            _ => rng.random_range(0.0..1.0),
        };
        if km < 4 && beta < 1e-6 {
            continue;
        }
        let mut gram = h.adjoint() * &h;
        for i in 0..4 {
            gram[(i, i)] += Complex64::new(beta * 4.0, 0.0);
        }
        let expect = gauss_jordan_inverse(&gram) * h.adjoint();
        let got = bb_uav_transmit_rzf(&h, beta).unwrap().matrix;
        rzf = rzf.max((got - &expect).norm() / expect.norm());
    }

    let mut r2 = 0.0f64;
    for _ in 0..100 {
        let m = rng.random_range(1..=4);
        let per = rng.random_range(1..=4);
        let mut owners: Vec<usize> = (0..m * per).map(|k| k % m).collect();
        for i in (1..owners.len()).rev() {
            owners.swap(i, rng.random_range(0..=i));
        }
        let sinrs: Vec<f64> = (0..owners.len()).map(|_| rng.random_range(0.0..1e3)).collect();
        let asg = Assignment::from_owners(owners.clone(), m).unwrap();
        let got = rate_second_hop(&asg, &sinrs);
        for (u, g) in got.iter().enumerate() {
            let mut naive = 0.0;
            for k in 0..owners.len() {
                if owners[k] == u {
                    naive += (1.0 + sinrs[k]).log2();
                }
            }
            r2 = r2.max((g - naive).abs());
        }
    }

    // K = 2 scalar instance: user 0 on stream 0 of both transmitters
    let noise = NoiseModel {
        sigma2_relay: 0.0,
        sigma2_direct: 0.2,
        sigma2_second_hop: 0.4,
    };
    let direct = LinkTerms {
        gains: vec![0.3, 0.7],
        powers: vec![2.0, 1.5],
        own: 0,
    };
    let relay = LinkTerms {
        gains: vec![1.2, 0.1],
        powers: vec![0.5, 3.0],
        own: 0,
    };
    let hand = 0.6 / (1.05 + 0.2) + 0.6 / (0.3 + 0.25 + 0.4);
    let sinr = (sinr_user(Some(&direct), &relay, 0.25, &noise) - hand).abs();

    let one = CMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
    let rf = RfStage::from_pairs(&ArrayGeometry::new(1, 1, 0.5).unwrap(), vec![(0.0, 0.0)]);
    let mut siso = 0.0f64;
    for _ in 0..100 {
        let h = complex_gaussian(&mut rng, 1.0);
        let p: f64 = rng.random_range(0.01..100.0);
        let s2: f64 = rng.random_range(1e-3..10.0);
        let g = CMatrix::from_element(1, 1, Complex64::new(p.sqrt(), 0.0));
        let r = rate_first_hop(&CMatrix::from_element(1, 1, h), &one, &rf, &g, s2).unwrap();
        siso = siso.max((r - (1.0 + p * h.norm_sqr() / s2).log2()).abs());
    }

    let passed = rzf <= 1e-10 && r2 <= 1e-12 && sinr <= 1e-12 && siso <= 1e-12;
    outcome(
        passed,
        format!("RZF rel err {rzf:.1e}, R2 loop err {r2:.1e}, SINR err {sinr:.1e}, SISO err {siso:.1e}"),
    )
}

/// One UAV, one user, single-element arrays: every stage is a scalar and the
/// objective varies smoothly with the UAV position.
fn smooth_instance(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        seed,
        bs_antennas_x: 1,
        bs_antennas_y: 1,
        uav_rx_antennas_x: 1,
        uav_rx_antennas_y: 1,
        uav_tx_antennas_x: 1,
        uav_tx_antennas_y: 1,
        n_users: 1,
        m_uavs: vec![1],
        user_drops: 1,
        ..Preset::Desk.config()
    }
}

fn criterion_3() -> Outcome {
    let mut worst = f64::INFINITY;
    let mut parts = Vec::new();
    for seed in 1..=5u64 {
        let cfg = smooth_instance(seed);
        let model = cfg.system_model(30.0).unwrap();
        let scheme = cfg.scheme(SchemeId::Joint, 1);
        let base = base_layout(&cfg, draw_users(&cfg, 0), 1).unwrap();
        let batch = batch_ids(&cfg, 0);
        let swarm = cfg.swarm(swarm_seed(&cfg, 0, 1, 0));
        let pso = optimize(&model, &scheme, &swarm, &base, &batch, ObjectiveKind::TotalRate).unwrap();
        let (lo, hi) = cfg.bounds();
        let mut grid_best = f64::NEG_INFINITY;
        let mut x = lo[0];
        while x <= hi[0] {
            let mut y = lo[1];
            while y <= hi[1] {
                if let Ok(v) = evaluate_objective(&model, &scheme, &base, &[x, y, 1.0, 1.0], &batch, ObjectiveKind::TotalRate) {
                    grid_best = grid_best.max(v);
                }
                y += 1.0;
            }
            x += 1.0;
        }
        let ratio = pso.objective / grid_best;
        worst = worst.min(ratio);
        parts.push(format!("{ratio:.4}"));
    }
    outcome(worst >= 0.99, format!("PSO / 1 m grid optimum over 5 seeds: [{}]", parts.join(", ")))
}

fn criterion_4() -> Outcome {
    let cfg = Preset::Desk.config();
    let s1 = fig3_surface(&cfg, 1).unwrap();
    let s2 = fig3_surface(&cfg, 2).unwrap();
    let centers = &cfg.hotspot_centers_m;
    let (a, b) = (centers[0], centers[1]);
    let peak = s1.argmax();
    let between = (a[0].min(b[0])..=a[0].max(b[0])).contains(&peak.x) && (a[1].min(b[1])..=a[1].max(b[1])).contains(&peak.y);
    let dist = |p: [f64; 2]| centers.iter().map(|c| (p[0] - c[0]).hypot(p[1] - c[1])).fold(f64::INFINITY, f64::min);
    let worst = s2.optimized.iter().flat_map(|c| c.uav_ground.iter().map(|p| dist(*p))).fold(0.0, f64::max);
    let higher = s2.optimized_r2 > s1.optimized_r2;
    outcome(
        higher && between && worst <= 15.0,
        format!(
            "mean R2 M=2 {:.3} vs M=1 {:.3}; M=1 argmax ({}, {}) between hotspots {between}; \
             farthest M=2 UAV {worst:.1} m from a hotspot",
            s2.optimized_r2, s1.optimized_r2, peak.x, peak.y
        ),
    )
}

fn run_cli(preset: &str, dir: &Path) -> Vec<ResultRow> {
    let status = Command::new(env!("CARGO_BIN_EXE_uavrelay"))
        .args(["run", "--preset", preset, "--seed", "42", "--out"])
        .arg(dir)
        .status()
        .expect("binary runs");
    assert!(status.success(), "run --preset {preset} failed: {status}");
    parse_results_csv(&fs::read_to_string(dir.join("results.csv")).unwrap()).unwrap()
}

fn mean(rows: &[ResultRow], id: SchemeId, m: usize, p: f64) -> f64 {
    rows.iter()
        .find(|r| r.scheme == id && r.m_uavs == m && r.p_t_dbm == p)
        .map(|r| r.mean_rate_bps_hz)
        .unwrap_or_else(|| panic!("no row for {id} M={m} P_T={p}"))
}

fn criterion_5(rows: &[ResultRow], cfg: &ExperimentConfig) -> Outcome {
    let mut a_fail = Vec::new();
    let mut b_fail = Vec::new();
    for &m in &cfg.m_uavs {
        for &p in &cfg.p_t_dbm {
            let j = mean(rows, SchemeId::Joint, m, p);
            if j < mean(rows, SchemeId::FixedEqual, m, p) {
                a_fail.push(format!("M={m}/{p}dBm"));
            }
            let off = mean(rows, SchemeId::JointNoDirect, m, p);
            if j <= off {
                b_fail.push(format!("M={m}/{p}dBm ({j:.4} vs {off:.4})"));
            }
        }
    }
    let p_top = *cfg.p_t_dbm.last().unwrap();
    let ratios: Vec<String> = cfg
        .p_t_dbm
        .iter()
        .map(|&p| format!("{:.2}", mean(rows, SchemeId::Joint, 2, p) / mean(rows, SchemeId::Joint, 1, p)))
        .collect();
    let ratio = mean(rows, SchemeId::Joint, 2, p_top) / mean(rows, SchemeId::Joint, 1, p_top);
    let (a, b, c) = (a_fail.is_empty(), b_fail.is_empty(), ratio >= 1.5);
    outcome(
        a && b && c,
        format!(
            "(a) {} (b) {} (c) M2/M1 at {p_top} dBm {ratio:.3} [{}]",
            if a { "ok".to_string() } else { format!("fails at {}", a_fail.join(" ")) },
            if b { "ok".to_string() } else { format!("fails at {}", b_fail.join(" ")) },
            ratios.join(" ")
        ),
    )
}

fn criterion_6(rows: &[ResultRow], cfg: &ExperimentConfig) -> Outcome {
    let mut fails = Vec::new();
    for &p in &cfg.p_t_dbm {
        for &m in &cfg.m_uavs {
            let j = mean(rows, SchemeId::Joint, m, p);
            let u = mean(rows, SchemeId::JointUavPaOnly, m, p);
            let f = mean(rows, SchemeId::FixedEqual, m, p);
            if !(j >= u && u >= f) {
                fails.push(format!("order M={m}/{p}dBm ({j:.3}, {u:.3}, {f:.3})"));
            }
        }
        let (m_lo, m_hi) = (cfg.m_uavs[0], cfg.m_uavs[1]);
        let (lo, hi) = (mean(rows, SchemeId::Joint, m_lo, p), mean(rows, SchemeId::Joint, m_hi, p));
        if hi < lo {
            fails.push(format!("M={m_hi} < M={m_lo} at {p}dBm ({hi:.3} vs {lo:.3})"));
        }
    }
    outcome(
        fails.is_empty(),
        if fails.is_empty() {
            "PA ordering and UAV-count gain hold at every power".to_string()
        } else {
            fails.join("; ")
        },
    )
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().unwrap();
    let mut results: Vec<(usize, Outcome, f64)> = Vec::new();
    let mut timed = |n: usize, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let s = t.elapsed().as_secs_f64();
        println!("{} criterion {n}: {} ({s:.1} s)", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, o, s));
    };

    timed(1, &mut criterion_1);
    timed(2, &mut criterion_2);
    timed(3, &mut criterion_3);
    timed(4, &mut criterion_4);

    let run_a = tmp.path().join("desk_a");
    let desk = Preset::Desk.config();
    let mut rows_a = Vec::new();
    timed(5, &mut || {
        rows_a = run_cli("desk", &run_a);
        criterion_5(&rows_a, &desk)
    });
    let fig5 = Preset::DeskFig5.config();
    timed(6, &mut || {
        let rows = run_cli("desk-fig5", &tmp.path().join("fig5"));
        criterion_6(&rows, &fig5)
    });
    timed(7, &mut || {
        let run_b = tmp.path().join("desk_b");
        run_cli("desk", &run_b);
        let a = fs::read(run_a.join("results.csv")).unwrap();
        let b = fs::read(run_b.join("results.csv")).unwrap();
        outcome(a == b, format!("results.csv {} bytes, identical: {}", a.len(), a == b))
    });

    let failed: Vec<usize> = results.iter().filter(|r| !r.1.passed).map(|r| r.0).collect();
    println!("{} of {} criteria passed", results.len() - failed.len(), results.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

