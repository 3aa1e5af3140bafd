//! Monte Carlo sweeps over schemes, UAV counts and transmit powers.
//!
//! For every `(scheme, M, P_T)` the swarm runs once per user drop on a fixed
//! batch of channel realizations; the optimized configuration is then scored
//! on fresh realizations. Every scheme sees the same drops, the same swarm
//! seeds and the same channel realizations.

use std::f64::consts::TAU;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, UserDistribution};
use super::output::ResultRow;
use crate::channel::keyed_rng;
use crate::error::Result;
use crate::geometry::{NetworkLayout, Position3D};
use crate::placement::{evaluate_candidate, optimize, IterationRecord, SchemeId};

/// Realization ids used by the swarm batches start here, far above report ids.
const BATCH_BASE: u64 = 1 << 40;

/// Ground positions of one user drop.
pub fn draw_users(cfg: &ExperimentConfig, drop: usize) -> Vec<Position3D> {
    let mut rng = keyed_rng(cfg.seed, &[0x7573, drop as u64]);
    let (lo, hi) = cfg.bounds();
    let k = cfg.n_users;
    (0..k)
        .map(|i| {
            let (x, y) = match cfg.user_distribution {
                UserDistribution::TwoHotspot => {
                    let c = cfg.hotspot_centers_m[i * cfg.hotspot_centers_m.len() / k];
                    let r = cfg.hotspot_radius_m * rng.random::<f64>().sqrt();
                    let t = TAU * rng.random::<f64>();
                    (c[0] + r * t.cos(), c[1] + r * t.sin())
                }
                UserDistribution::Uniform => (rng.random_range(lo[0]..=hi[0]), rng.random_range(lo[1]..=hi[1])),
            };
            Position3D::new(x.clamp(lo[0], hi[0]), y.clamp(lo[1], hi[1]), 0.0)
        })
        .collect()
}

/// Layout with `m` UAVs parked at the box center; callers move them.
pub fn base_layout(cfg: &ExperimentConfig, users: Vec<Position3D>, m: usize) -> Result<NetworkLayout> {
    let (lo, hi) = cfg.bounds();
    let center = Position3D::new((lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0, cfg.uav_height_m);
    NetworkLayout::new(cfg.bs(), vec![center; m], users, lo, hi)
}

/// Swarm seed shared by every scheme for a given drop and UAV count.
pub fn swarm_seed(cfg: &ExperimentConfig, drop: usize, m: usize, p_index: usize) -> u64 {
    use rand::RngCore;
    keyed_rng(cfg.seed, &[0x7073, drop as u64, m as u64, p_index as u64]).next_u64()
}

pub fn batch_ids(cfg: &ExperimentConfig, drop: usize) -> Vec<u64> {
    let b = cfg.pso_batch_realizations as u64;
    (0..b).map(|i| BATCH_BASE + drop as u64 * b + i).collect()
}

/// R_T of one scored realization.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationRecord {
    pub scheme: SchemeId,
    pub m_uavs: usize,
    pub p_t_dbm: f64,
    pub drop: usize,
    pub realization: u64,
    pub rate_bps_hz: f64,
}

/// Swarm progress of one optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct SwarmTraceRecord {
    pub scheme: SchemeId,
    pub m_uavs: usize,
    pub p_t_dbm: f64,
    pub drop: usize,
    pub record: IterationRecord,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutput {
    pub rows: Vec<ResultRow>,
    pub realizations: Vec<RealizationRecord>,
    pub swarm_trace: Vec<SwarmTraceRecord>,
}

/// Sample mean and standard deviation (`n − 1` denominator; 0 for one sample).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

struct DropResult {
    records: Vec<RealizationRecord>,
    trace: Vec<SwarmTraceRecord>,
}

fn run_drop(cfg: &ExperimentConfig, id: SchemeId, m: usize, p_index: usize, drop: usize, n_drops: usize) -> Result<DropResult> {
    let p_t_dbm = cfg.p_t_dbm[p_index];
    let model = cfg.system_model(p_t_dbm)?;
    let scheme = cfg.scheme(id, m);
    let base = base_layout(cfg, draw_users(cfg, drop), m)?;
    let swarm = cfg.swarm(swarm_seed(cfg, drop, m, p_index));
    let outcome = optimize(&model, &scheme, &swarm, &base, &batch_ids(cfg, drop), cfg.objective)?;
    let mut records = Vec::new();
    for r in (drop..cfg.n_realizations).step_by(n_drops) {
        let eval = evaluate_candidate(&model, &scheme, &base, &outcome.candidate, r as u64)?;
        records.push(RealizationRecord {
            scheme: id,
            m_uavs: m,
            p_t_dbm,
            drop,
            realization: r as u64,
            rate_bps_hz: eval.rates.r_total,
        });
    }
    let trace = outcome
        .trace
        .into_iter()
        .map(|record| SwarmTraceRecord {
            scheme: id,
            m_uavs: m,
            p_t_dbm,
            drop,
            record,
        })
        .collect();
    Ok(DropResult { records, trace })
}

/// Run every configured `(scheme, M, P_T)` cell in order, handing each
/// finished row to `on_row` before starting the next.
pub fn run_sweep(cfg: &ExperimentConfig, mut on_row: impl FnMut(&ResultRow) -> Result<()>) -> Result<SweepOutput> {
    cfg.check()?;
    let n_drops = cfg.user_drops.min(cfg.n_realizations);
    let mut out = SweepOutput::default();
    for &id in &cfg.schemes {
        for &m in &cfg.m_uavs {
            for p_index in 0..cfg.p_t_dbm.len() {
                let started = Instant::now();
                let drops: Vec<DropResult> = (0..n_drops)
                    .into_par_iter()
                    .map(|d| run_drop(cfg, id, m, p_index, d, n_drops))
                    .collect::<Result<_>>()?;
                let mut records: Vec<RealizationRecord> = Vec::with_capacity(cfg.n_realizations);
                for d in drops {
                    records.extend(d.records);
                    out.swarm_trace.extend(d.trace);
                }
                records.sort_by_key(|r| r.realization);
                let values: Vec<f64> = records.iter().map(|r| r.rate_bps_hz).collect();
                let (mean, std) = mean_std(&values);
                let row = ResultRow {
                    scheme: id,
                    m_uavs: m,
                    p_t_dbm: cfg.p_t_dbm[p_index],
                    mean_rate_bps_hz: mean,
                    std_rate_bps_hz: std,
                    n_realizations: values.len(),
                    seed: cfg.seed,
                    wall_time_s: started.elapsed().as_secs_f64(),
                };
                log::info!("{} M={} P_T={} dBm: {:.4} bps/Hz", id, m, row.p_t_dbm, mean);
                on_row(&row)?;
                out.rows.push(row);
                out.realizations.extend(records);
            }
        }
    }
    Ok(out)
}
