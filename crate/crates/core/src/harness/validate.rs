//! Self-check suite run by the `validate` subcommand.
//!
//! Every check is a plain function over the objects it inspects, so a
//! deliberately corrupted object can be fed to it directly.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;

use super::config::ExperimentConfig;
use super::sweep::{base_layout, draw_users};
use crate::beamforming::{bb_uav_transmit_rzf, HybridBeamformers, PowerAllocation, RfStage};
use crate::channel::keyed_rng;
use crate::clustering::{kmeans_associate, Assignment};
use crate::linalg::{CMatrix, Svd};
use crate::placement::{evaluate_candidate, evaluate_objective, slot_bounds, warm_start, ObjectiveKind, SchemeId, SystemModel};
use crate::pso::{run_swarm, SwarmConfig};
use crate::rates::{rate_first_hop, rate_second_hop};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        CheckResult {
            name,
            passed,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

/// Every RF entry has modulus `1/√N` to 1e-12.
pub fn check_constant_modulus(stages: &[&RfStage]) -> CheckResult {
    let worst = stages.iter().map(|s| s.cm_deviation()).fold(0.0, f64::max);
    CheckResult::new("constant-modulus", worst <= 1e-12, format!("max deviation {worst:e}"))
}

/// Radiated powers match their budgets to 1e-9 relative.
pub fn check_power_normalization(hb: &HybridBeamformers, p_t: f64, p_uav: f64) -> CheckResult {
    let mut worst = (hb.bs_transmit_power() - p_t).abs() / p_t;
    for m in 0..hb.uavs.len() {
        worst = worst.max((hb.uav_transmit_power(m) - p_uav).abs() / p_uav);
    }
    CheckResult::new("power-normalization", worst <= 1e-9, format!("max relative error {worst:e}"))
}

/// Each UAV receive combiner has orthonormal rows to 1e-10.
pub fn check_receive_unitarity(hb: &HybridBeamformers) -> CheckResult {
    let mut worst: f64 = 0.0;
    for u in &hb.uavs {
        let b = &u.b_ur.matrix;
        let g = b * b.adjoint();
        let eye = CMatrix::identity(g.nrows(), g.ncols());
        worst = worst.max((g - eye).iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    CheckResult::new("receive-unitarity", worst <= 1e-10, format!("max |BBᴴ − I| entry {worst:e}"))
}

/// Every allocated power is nonnegative.
pub fn check_nonnegative_powers(pa: &PowerAllocation) -> CheckResult {
    let min = pa.p_bs.iter().chain(pa.p_uav.iter().flatten()).copied().fold(f64::INFINITY, f64::min);
    CheckResult::new("nonnegative-power", pa.is_nonnegative(), format!("smallest entry {min:e}"))
}

fn non_increasing(v: &[f64], slack: f64) -> bool {
    v.windows(2).all(|w| w[1] <= w[0] + slack * w[0].abs().max(1.0))
}

/// K-means objective traces never increase.
pub fn check_kmeans_monotone(traces: &[Vec<f64>]) -> CheckResult {
    let bad = traces.iter().filter(|t| !non_increasing(t, 1e-12)).count();
    CheckResult::new("kmeans-monotone", bad == 0, format!("{bad} of {} traces increase", traces.len()))
}

/// Swarm global-best histories never decrease.
pub fn check_swarm_monotone(histories: &[Vec<f64>]) -> CheckResult {
    let bad = histories.iter().filter(|h| h.windows(2).any(|w| w[1] < w[0])).count();
    CheckResult::new("swarm-monotone", bad == 0, format!("{bad} of {} histories decrease", histories.len()))
}

fn random_matrix<R: Rng>(rng: &mut R, r: usize, c: usize) -> CMatrix {
    CMatrix::from_fn(r, c, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

/// RZF against an explicit LU inverse on random square systems.
pub fn check_rzf_oracle(seed: u64) -> CheckResult {
    let mut rng = keyed_rng(seed, &[0x727a66]);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let h = random_matrix(&mut rng, 4, 4);
        let beta = 10f64.powi(-rng.random_range(0..6));
        let b = match bb_uav_transmit_rzf(&h, beta) {
            Ok(b) => b.matrix,
            Err(e) => return CheckResult::new("rzf-oracle", false, e.to_string()),
        };
        let mut gram = h.adjoint() * &h;
        for i in 0..4 {
            gram[(i, i)] += Complex64::new(beta * 4.0, 0.0);
        }
        let Some(inv) = gram.try_inverse() else {
            return CheckResult::new("rzf-oracle", false, "oracle inverse failed");
        };
        let oracle = inv * h.adjoint();
        let scale = oracle.iter().map(|z| z.norm()).fold(0.0, f64::max);
        worst = worst.max((b - &oracle).iter().map(|z| z.norm()).fold(0.0, f64::max) / scale);
    }
    CheckResult::new("rzf-oracle", worst <= 1e-10, format!("max relative error {worst:e}"))
}

/// First-hop rate against `log₂(1 + p|g|²/σ²)` and the second-hop sum against a loop.
pub fn check_rate_oracles(seed: u64) -> CheckResult {
    let mut rng = keyed_rng(seed, &[0x72617465]);
    let mut worst: f64 = 0.0;
    let f = RfStage {
        matrix: CMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)),
        quantized_pairs: vec![(0.0, 0.0)],
    };
    let one = CMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
    for _ in 0..50 {
        let g = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let p: f64 = rng.random_range(0.01..10.0);
        let s2: f64 = rng.random_range(0.01..1.0);
        let h = CMatrix::from_element(1, 1, g);
        let gb = CMatrix::from_element(1, 1, Complex64::new(p.sqrt(), 0.0));
        let rate = match rate_first_hop(&h, &one, &f, &gb, s2) {
            Ok(r) => r,
            Err(e) => return CheckResult::new("rate-oracles", false, e.to_string()),
        };
        worst = worst.max((rate - (1.0 + p * g.norm_sqr() / s2).log2()).abs());
    }
    for _ in 0..20 {
        let m = rng.random_range(1..4usize);
        let km = rng.random_range(1..4usize);
        let mut owner: Vec<usize> = (0..m * km).map(|k| k % m).collect();
        for i in (1..owner.len()).rev() {
            owner.swap(i, rng.random_range(0..=i));
        }
        let Ok(a) = Assignment::from_owners(owner.clone(), m) else {
            return CheckResult::new("rate-oracles", false, "bad assignment");
        };
        let sinrs: Vec<f64> = (0..m * km).map(|_| rng.random_range(0.0..50.0)).collect();
        let fast = rate_second_hop(&a, &sinrs);
        for (uav, r) in fast.iter().enumerate() {
            let mut naive = 0.0;
            for (k, s) in sinrs.iter().enumerate() {
                if owner[k] == uav {
                    naive += (1.0 + s).ln() / std::f64::consts::LN_2;
                }
            }
            worst = worst.max((r - naive).abs());
        }
    }
    CheckResult::new("rate-oracles", worst <= 1e-12, format!("max abs error {worst:e}"))
}

/// Small model on the config's physics: arrays as configured, first power level.
fn toy_model(cfg: &ExperimentConfig) -> crate::error::Result<SystemModel> {
    cfg.system_model(cfg.p_t_dbm[0])
}

/// Run every check at toy scale.
pub fn run_validation(cfg: &ExperimentConfig) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let model = match toy_model(cfg) {
        Ok(m) => m,
        Err(e) => {
            out.push(CheckResult::new("model", false, e.to_string()));
            return out;
        }
    };
    let m = *cfg.m_uavs.iter().max().expect("checked config");
    let scheme = cfg.scheme(SchemeId::Joint, m);
    let mut stages_ok = Vec::new();
    let mut power = Vec::new();
    let mut unitary = Vec::new();
    let mut nonneg = Vec::new();
    let mut rng = keyed_rng(cfg.seed, &[0x76616c]);
    let mut kmeans_traces = Vec::new();
    let mut setup_error = None;
    for drop in 0..4 {
        let users = draw_users(cfg, drop);
        let base = match base_layout(cfg, users.clone(), m) {
            Ok(b) => b,
            Err(e) => {
                setup_error = Some(e.to_string());
                break;
            }
        };
        if let Ok(km) = kmeans_associate(&users, m, cfg.kmeans_max_iters, &mut rng) {
            kmeans_traces.push(km.objective_trace);
        }
        let bounds = slot_bounds(&base, m);
        let slots = bounds.sample(&mut rng);
        let cand = match crate::placement::decode(&slots, m, cfg.n_users) {
            Ok(c) => c,
            Err(e) => {
                setup_error = Some(e.to_string());
                break;
            }
        };
        match evaluate_candidate(&model, &scheme, &base, &cand, drop as u64) {
            Ok(ev) => {
                let hb = ev.beamformers;
                let mut stages: Vec<&RfStage> = vec![&hb.f_b];
                for u in &hb.uavs {
                    stages.push(&u.f_ur);
                    stages.push(&u.f_ut);
                }
                stages_ok.push(check_constant_modulus(&stages));
                power.push(check_power_normalization(&hb, model.p_t, model.p_uav));
                unitary.push(check_receive_unitarity(&hb));
                nonneg.push(check_nonnegative_powers(&hb.pa));
                let svd_ok = hb.uavs.iter().all(|u| {
                    let s = Svd::new(&u.effective_h1.matrix);
                    (s.reconstruct() - &u.effective_h1.matrix).iter().all(|z| z.norm() < 1e-9)
                });
                if !svd_ok {
                    setup_error = Some("effective channel SVD does not reconstruct".into());
                }
            }
            Err(e) => setup_error = Some(e.to_string()),
        }
    }
    if let Some(e) = setup_error {
        out.push(CheckResult::new("pipeline", false, e));
    }
    let merge = |name: &'static str, v: Vec<CheckResult>| {
        let failed: Vec<&CheckResult> = v.iter().filter(|c| !c.passed).collect();
        match failed.first() {
            Some(c) => CheckResult::new(name, false, c.detail.clone()),
            None if v.is_empty() => CheckResult::new(name, false, "no instances evaluated"),
            None => CheckResult::new(name, true, format!("{} instances", v.len())),
        }
    };
    out.push(merge("constant-modulus", stages_ok));
    out.push(merge("power-normalization", power));
    out.push(merge("receive-unitarity", unitary));
    out.push(merge("nonnegative-power", nonneg));
    out.push(check_kmeans_monotone(&kmeans_traces));

    let base = base_layout(cfg, draw_users(cfg, 0), m);
    let histories: Vec<Vec<f64>> = match &base {
        Ok(base) => (0..20u64)
            .map(|s| {
                let swarm = SwarmConfig {
                    n_particles: 6,
                    n_iters: 8,
                    ..cfg.swarm(s)
                };
                let objective = |x: &[f64]| evaluate_objective(&model, &scheme, base, x, &[s], ObjectiveKind::TotalRate);
                let start = warm_start(&model, base, m, s).ok().map(|c| crate::placement::encode(&c));
                run_swarm(&swarm, &slot_bounds(base, m), start.as_deref(), &objective, &mut keyed_rng(s, &[1]), |_| {}).history
            })
            .collect(),
        Err(_) => Vec::new(),
    };
    out.push(if histories.is_empty() {
        CheckResult::new("swarm-monotone", false, "no layout")
    } else {
        check_swarm_monotone(&histories)
    });
    out.push(check_rzf_oracle(cfg.seed));
    out.push(check_rate_oracles(cfg.seed));
    out
}
