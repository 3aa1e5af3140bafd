//! Second-hop rate over a lattice of positions for one UAV.

use std::fs;
use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::sweep::{base_layout, batch_ids, draw_users, swarm_seed};
use crate::error::{Error, Result};
use crate::placement::{evaluate_candidate, optimize, Candidate, ObjectiveKind, SchemeId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub x: f64,
    pub y: f64,
    /// Mean `∑ R₂` over the scored realizations.
    pub r2: f64,
}

#[derive(Debug, Clone)]
pub struct SurfaceResult {
    pub m_uavs: usize,
    pub points: Vec<SurfacePoint>,
    /// Swarm optimum on the second-hop objective, one per user drop.
    pub optimized: Vec<Candidate>,
    /// Mean `∑ R₂` of the per-drop optima over the same realizations as the lattice.
    pub optimized_r2: f64,
}

impl SurfaceResult {
    pub fn argmax(&self) -> SurfacePoint {
        *self
            .points
            .iter()
            .max_by(|a, b| a.r2.total_cmp(&b.r2))
            .expect("nonempty lattice")
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x_m,y_m,r2_bps_hz\n");
        for p in &self.points {
            s.push_str(&format!("{},{},{}\n", p.x, p.y, p.r2));
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(format!("surface_m{}.csv", self.m_uavs));
        fs::write(&path, self.to_csv()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

fn lattice(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![(lo + hi) / 2.0];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Mean second-hop rate over the user distribution with UAV 0 swept over a
/// lattice at `surface_p_t_dbm`.
///
/// Each user drop gets its own swarm optimum for `∑ R₂`; the other UAVs and
/// the power allocation stay at that optimum while UAV 0 moves. Realizations
/// are spread over the drops as in a sweep.
pub fn fig3_surface(cfg: &ExperimentConfig, m: usize) -> Result<SurfaceResult> {
    cfg.check()?;
    if m == 0 || cfg.n_users % m != 0 {
        return Err(Error::config("m_uavs", format!("{m} UAVs cannot split {} users equally", cfg.n_users)));
    }
    let model = cfg.system_model(cfg.surface_p_t_dbm)?;
    let scheme = cfg.scheme(SchemeId::Joint, m);
    let n_drops = cfg.user_drops.min(cfg.n_realizations);
    let mut bases = Vec::with_capacity(n_drops);
    let mut optimized = Vec::with_capacity(n_drops);
    for drop in 0..n_drops {
        let base = base_layout(cfg, draw_users(cfg, drop), m)?;
        let swarm = cfg.swarm(swarm_seed(cfg, drop, m, usize::MAX));
        let outcome = optimize(&model, &scheme, &swarm, &base, &batch_ids(cfg, drop), ObjectiveKind::SecondHop)?;
        bases.push(base);
        optimized.push(outcome.candidate);
    }
    let mean_r2 = |uav0: Option<[f64; 2]>| -> Result<f64> {
        let mut total = 0.0;
        for r in 0..cfg.n_realizations {
            let drop = r % n_drops;
            let mut c = optimized[drop].clone();
            if let Some(p) = uav0 {
                c.uav_ground[0] = p;
            }
            total += match evaluate_candidate(&model, &scheme, &bases[drop], &c, r as u64) {
                Ok(ev) => ev.rates.r2_sum(),
                Err(Error::DegenerateGeometry) => 0.0,
                Err(e) => return Err(e),
            };
        }
        Ok(total / cfg.n_realizations as f64)
    };
    let optimized_r2 = mean_r2(None)?;
    let (lo, hi) = cfg.bounds();
    let mut points = Vec::with_capacity(cfg.surface_lattice * cfg.surface_lattice);
    for &x in &lattice(lo[0], hi[0], cfg.surface_lattice) {
        for &y in &lattice(lo[1], hi[1], cfg.surface_lattice) {
            points.push(SurfacePoint { x, y, r2: mean_r2(Some([x, y]))? });
        }
    }
    Ok(SurfaceResult {
        m_uavs: m,
        points,
        optimized,
        optimized_r2,
    })
}
