//! Joint UAV placement and power allocation: particle encoding, the
//! pipeline objective and the swarm driver.
//!
//! A particle is `[x₁, y₁, …, x_M, y_M, √p̂_b,1 … √p̂_b,K, √p̂_u,(1,1) … √p̂_u,(M,K_m)]`.
//! Amplitudes live in `[0, 1]`; κ scaling inside the pipeline maps them onto
//! the power budgets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::beamforming::{design_beamformers, DesignOptions, HybridBeamformers, PowerAllocation};
use crate::channel::{synthesize_channels, ArraySet, ChannelParams, ChannelSet};
use crate::clustering::{associate_equal, kmeans_associate, Assignment};
use crate::error::{Error, Result};
use crate::geometry::NetworkLayout;
use crate::pso::{run_swarm, SlotBounds, SwarmConfig, SwarmState};
use crate::rates::{evaluate_rates, FirstHopMode, NoiseModel, RateBreakdown, RateOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SchemeId {
    #[serde(rename = "J-HBF-PSOLPA")]
    Joint,
    #[serde(rename = "J-HBF-PSOLPA-no-direct")]
    JointNoDirect,
    #[serde(rename = "J-HBF-PSOLPA-uav-pa-only")]
    JointUavPaOnly,
    #[serde(rename = "FL-EQPA")]
    FixedEqual,
}

impl SchemeId {
    pub const ALL: [SchemeId; 4] = [SchemeId::Joint, SchemeId::JointNoDirect, SchemeId::JointUavPaOnly, SchemeId::FixedEqual];

    pub fn as_str(&self) -> &'static str {
        match self {
            SchemeId::Joint => "J-HBF-PSOLPA",
            SchemeId::JointNoDirect => "J-HBF-PSOLPA-no-direct",
            SchemeId::JointUavPaOnly => "J-HBF-PSOLPA-uav-pa-only",
            SchemeId::FixedEqual => "FL-EQPA",
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::config("schemes", format!("unknown scheme `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PaMode {
    BsAndUav,
    UavOnly,
    Equal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Placement {
    Optimized,
    /// Ground coordinates of every UAV.
    Fixed(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub scheme_id: SchemeId,
    pub m_uavs: usize,
    pub direct_link: bool,
    pub pa_mode: PaMode,
    pub placement: Placement,
}

impl SchemeConfig {
    /// Standard settings of a scheme; FL-EQPA sits at `fixed` positions.
    pub fn standard(scheme_id: SchemeId, m_uavs: usize, fixed: Vec<[f64; 2]>) -> Self {
        let (direct_link, pa_mode, placement) = match scheme_id {
            SchemeId::Joint => (true, PaMode::BsAndUav, Placement::Optimized),
            SchemeId::JointNoDirect => (false, PaMode::BsAndUav, Placement::Optimized),
            SchemeId::JointUavPaOnly => (true, PaMode::UavOnly, Placement::Optimized),
            SchemeId::FixedEqual => (true, PaMode::Equal, Placement::Fixed(fixed)),
        };
        SchemeConfig {
            scheme_id,
            m_uavs,
            direct_link,
            pa_mode,
            placement,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.scheme_id == SchemeId::FixedEqual
            && (self.pa_mode != PaMode::Equal || !matches!(self.placement, Placement::Fixed(_)))
        {
            return Err(Error::config("schemes", "FL-EQPA requires fixed placement and equal power allocation"));
        }
        if let Placement::Fixed(p) = &self.placement {
            if p.len() != self.m_uavs {
                return Err(Error::config("fixed_uav_xy_m", format!("{} positions for {} UAVs", p.len(), self.m_uavs)));
            }
        }
        Ok(())
    }
}

/// Quantity maximized by the swarm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    /// End-to-end `R_T`.
    TotalRate,
    /// Sum relay-phase rate `∑ R₂`.
    SecondHop,
}

impl ObjectiveKind {
    pub fn of(&self, rates: &RateBreakdown) -> f64 {
        match self {
            ObjectiveKind::TotalRate => rates.r_total,
            ObjectiveKind::SecondHop => rates.r2_sum(),
        }
    }
}

/// Everything about the network except where the UAVs are and how power is split.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    pub channel: ChannelParams,
    pub arrays: ArraySet,
    pub noise: NoiseModel,
    /// BS budget (Watts).
    pub p_t: f64,
    /// Per-UAV budget (Watts).
    pub p_uav: f64,
    pub n_rf_bs: Option<usize>,
    pub n_rf_uav: Option<usize>,
    pub inter_uav_interference: bool,
    pub first_hop: FirstHopMode,
    pub kmeans_max_iters: usize,
}

impl SystemModel {
    pub fn design_options(&self, direct_link: bool) -> DesignOptions {
        DesignOptions {
            n_rf_bs: self.n_rf_bs,
            n_rf_uav: self.n_rf_uav,
            direct_link,
            p_t: self.p_t,
            p_uav: self.p_uav,
            sigma2_second_hop: self.noise.sigma2_second_hop,
        }
    }

    pub fn rate_options(&self, direct_link: bool) -> RateOptions {
        RateOptions {
            direct_link,
            inter_uav_interference: self.inter_uav_interference,
            first_hop: self.first_hop,
        }
    }
}

/// A decoded particle.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub uav_ground: Vec<[f64; 2]>,
    /// `√p̂_b` per user.
    pub bs_amplitudes: Vec<f64>,
    /// `√p̂_u` per UAV, per group slot.
    pub uav_amplitudes: Vec<Vec<f64>>,
}

pub fn slot_count(m: usize, k: usize) -> usize {
    2 * m + k + k
}

pub fn slot_bounds(layout: &NetworkLayout, m: usize) -> SlotBounds {
    let k = layout.n_users();
    let mut lo = Vec::with_capacity(slot_count(m, k));
    let mut hi = Vec::with_capacity(slot_count(m, k));
    for _ in 0..m {
        lo.extend_from_slice(&layout.bounds_min);
        hi.extend_from_slice(&layout.bounds_max);
    }
    lo.resize(slot_count(m, k), 0.0);
    hi.resize(slot_count(m, k), 1.0);
    SlotBounds { lo, hi }
}

pub fn encode(c: &Candidate) -> Vec<f64> {
    c.uav_ground
        .iter()
        .flatten()
        .chain(&c.bs_amplitudes)
        .chain(c.uav_amplitudes.iter().flatten())
        .copied()
        .collect()
}

pub fn decode(slots: &[f64], m: usize, k: usize) -> Result<Candidate> {
    if slots.len() != slot_count(m, k) || m == 0 || k % m != 0 {
        return Err(Error::InvalidInput(format!("{} slots do not fit M = {m}, K = {k}", slots.len())));
    }
    let km = k / m;
    let uav_ground = slots[..2 * m].chunks(2).map(|c| [c[0], c[1]]).collect();
    let bs_amplitudes = slots[2 * m..2 * m + k].to_vec();
    let uav_amplitudes = slots[2 * m + k..].chunks(km).map(<[f64]>::to_vec).collect();
    Ok(Candidate {
        uav_ground,
        bs_amplitudes,
        uav_amplitudes,
    })
}

/// Power allocation actually used by a scheme for a candidate.
pub fn scheme_power_allocation(pa_mode: PaMode, c: &Candidate) -> PowerAllocation {
    let ones_bs = vec![1.0; c.bs_amplitudes.len()];
    let ones_uav: Vec<Vec<f64>> = c.uav_amplitudes.iter().map(|g| vec![1.0; g.len()]).collect();
    match pa_mode {
        PaMode::BsAndUav => PowerAllocation::from_amplitudes(&c.bs_amplitudes, &c.uav_amplitudes),
        PaMode::UavOnly => PowerAllocation::from_amplitudes(&ones_bs, &c.uav_amplitudes),
        PaMode::Equal => PowerAllocation::from_amplitudes(&ones_bs, &ones_uav),
    }
}

/// Everything produced by one pipeline evaluation.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub layout: NetworkLayout,
    pub assignment: Assignment,
    pub channels: ChannelSet,
    pub beamformers: HybridBeamformers,
    pub rates: RateBreakdown,
}

/// Candidate → layout → association → channels of `realization` → stages → rates.
pub fn evaluate_candidate(
    model: &SystemModel,
    scheme: &SchemeConfig,
    base: &NetworkLayout,
    candidate: &Candidate,
    realization: u64,
) -> Result<Evaluation> {
    let ground = match &scheme.placement {
        Placement::Optimized => candidate.uav_ground.clone(),
        Placement::Fixed(p) => p.clone(),
    };
    let layout = base.with_uav_ground(&ground);
    layout.check()?;
    let assignment = associate_equal(&layout.users, &ground)?;
    let channels = synthesize_channels(&model.channel, &layout, &model.arrays, realization)?;
    if !channels.is_finite() {
        return Err(Error::NumericalBlowup {
            context: "channel synthesis",
            condition: f64::INFINITY,
        });
    }
    let pa = scheme_power_allocation(scheme.pa_mode, candidate);
    let beamformers = design_beamformers(
        &model.channel,
        &model.arrays,
        &layout,
        &channels,
        &assignment,
        pa,
        &model.design_options(scheme.direct_link),
    )?;
    let rates = evaluate_rates(&channels, &beamformers, &assignment, &model.noise, &model.rate_options(scheme.direct_link))?;
    Ok(Evaluation {
        layout,
        assignment,
        channels,
        beamformers,
        rates,
    })
}

/// Mean objective over a batch of channel realizations.
pub fn evaluate_objective(
    model: &SystemModel,
    scheme: &SchemeConfig,
    base: &NetworkLayout,
    slots: &[f64],
    batch: &[u64],
    kind: ObjectiveKind,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty realization batch".into()));
    }
    let candidate = decode(slots, scheme.m_uavs, base.n_users())?;
    let mut total = 0.0;
    for &r in batch {
        total += kind.of(&evaluate_candidate(model, scheme, base, &candidate, r)?.rates);
    }
    Ok(total / batch.len() as f64)
}

/// One row of the optional per-iteration trace.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub global_best: f64,
    pub best_uav_ground: Vec<[f64; 2]>,
}

#[derive(Debug, Clone)]
pub struct OptimizeOutcome {
    pub candidate: Candidate,
    pub objective: f64,
    /// Global best after initialization and after every iteration.
    pub history: Vec<f64>,
    pub trace: Vec<IterationRecord>,
}

/// UAVs at the K-means centroids of the users, all amplitudes 1.
pub fn warm_start(model: &SystemModel, base: &NetworkLayout, m: usize, seed: u64) -> Result<Candidate> {
    let mut rng = crate::channel::keyed_rng(seed, &[0x6b6d]);
    let km = kmeans_associate(&base.users, m, model.kmeans_max_iters, &mut rng)?;
    let k = base.n_users();
    let uav_ground = km
        .centroids
        .iter()
        .map(|c| {
            [
                c[0].clamp(base.bounds_min[0], base.bounds_max[0]),
                c[1].clamp(base.bounds_min[1], base.bounds_max[1]),
            ]
        })
        .collect();
    Ok(Candidate {
        uav_ground,
        bs_amplitudes: vec![1.0; k],
        uav_amplitudes: vec![vec![1.0; k / m]; m],
    })
}

/// Swarm search over placement and power allocation.
///
/// Fixed-placement schemes with equal powers have nothing to search; they
/// return the fixed candidate evaluated on `batch`.
pub fn optimize(
    model: &SystemModel,
    scheme: &SchemeConfig,
    swarm: &SwarmConfig,
    base: &NetworkLayout,
    batch: &[u64],
    kind: ObjectiveKind,
) -> Result<OptimizeOutcome> {
    scheme.check()?;
    swarm.validate()?;
    let m = scheme.m_uavs;
    let k = base.n_users();
    let start = warm_start(model, base, m, swarm.rng_seed)?;
    let objective = |x: &[f64]| evaluate_objective(model, scheme, base, x, batch, kind);

    if let (Placement::Fixed(p), PaMode::Equal) = (&scheme.placement, scheme.pa_mode) {
        let candidate = Candidate {
            uav_ground: p.clone(),
            ..start
        };
        let value = objective(&encode(&candidate))?;
        return Ok(OptimizeOutcome {
            candidate,
            objective: value,
            history: vec![value],
            trace: Vec::new(),
        });
    }

    let bounds = slot_bounds(base, m);
    let mut rng = crate::channel::keyed_rng(swarm.rng_seed, &[0x7073_6f]);
    let mut warm = encode(&start);
    let random = bounds.sample(&mut rng);
    warm[2 * m..].copy_from_slice(&random[2 * m..]);
    let mut trace = Vec::new();
    let record = |s: &SwarmState, trace: &mut Vec<IterationRecord>| {
        if let Ok(c) = decode(&s.global_best_position, m, k) {
            trace.push(IterationRecord {
                iteration: s.iteration,
                global_best: s.global_best_objective,
                best_uav_ground: c.uav_ground,
            });
        }
    };
    let run = run_swarm(swarm, &bounds, Some(&warm), &objective, &mut rng, |s| record(s, &mut trace));
    if !run.best_objective.is_finite() {
        return Err(Error::NumericalBlowup {
            context: "swarm found no feasible candidate",
            condition: f64::INFINITY,
        });
    }
    Ok(OptimizeOutcome {
        candidate: decode(&run.best_position, m, k)?,
        objective: run.best_objective,
        history: run.history,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{base_layout, batch_ids, draw_users, ExperimentConfig, Preset};

    fn desk() -> (ExperimentConfig, SystemModel) {
        let cfg = Preset::Desk.config();
        let model = cfg.system_model(20.0).unwrap();
        (cfg, model)
    }

    fn base(cfg: &ExperimentConfig, m: usize) -> NetworkLayout {
        base_layout(cfg, draw_users(cfg, 0), m).unwrap()
    }

    fn sample_slots() -> Vec<f64> {
        vec![60.0, 80.0, 90.0, 55.0, 0.9, 0.2, 0.5, 1.0, 0.3, 0.7, 0.6, 0.1]
    }

    #[test]
    fn encode_decode_round_trip() {
        let slots = sample_slots();
        let c = decode(&slots, 2, 4).unwrap();
        assert_eq!(c.uav_ground, vec![[60.0, 80.0], [90.0, 55.0]]);
        assert_eq!(c.bs_amplitudes, vec![0.9, 0.2, 0.5, 1.0]);
        assert_eq!(c.uav_amplitudes, vec![vec![0.3, 0.7], vec![0.6, 0.1]]);
        assert_eq!(encode(&c), slots);
        assert_eq!(slot_count(2, 4), 12);
        assert!(decode(&slots, 3, 4).is_err());
        assert!(decode(&slots[..11], 2, 4).is_err());
    }

    #[test]
    fn bounds_cover_box_then_unit_amplitudes() {
        let (cfg, _) = desk();
        let b = slot_bounds(&base(&cfg, 2), 2);
        let (lo, hi) = cfg.bounds();
        assert_eq!(b.lo[..4], [lo[0], lo[1], lo[0], lo[1]]);
        assert_eq!(b.hi[..4], [hi[0], hi[1], hi[0], hi[1]]);
        assert!(b.lo[4..].iter().all(|&v| v == 0.0) && b.hi[4..].iter().all(|&v| v == 1.0));
        assert_eq!(b.len(), 12);
    }

    #[test]
    fn objective_is_pure() {
        let (cfg, model) = desk();
        let scheme = cfg.scheme(SchemeId::Joint, 2);
        let l = base(&cfg, 2);
        let batch = batch_ids(&cfg, 0);
        let a = evaluate_objective(&model, &scheme, &l, &sample_slots(), &batch, ObjectiveKind::TotalRate).unwrap();
        let b = evaluate_objective(&model, &scheme, &l, &sample_slots(), &batch, ObjectiveKind::TotalRate).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert!(a.is_finite() && a > 0.0);
    }

    #[test]
    fn fixed_equal_scheme_ignores_particle() {
        let (cfg, model) = desk();
        let scheme = cfg.scheme(SchemeId::FixedEqual, 2);
        let l = base(&cfg, 2);
        let batch = batch_ids(&cfg, 0);
        let mut other = sample_slots();
        other[0] = 51.0;
        other[5] = 0.01;
        other[10] = 1.0;
        let a = evaluate_objective(&model, &scheme, &l, &sample_slots(), &batch, ObjectiveKind::TotalRate).unwrap();
        let b = evaluate_objective(&model, &scheme, &l, &other, &batch, ObjectiveKind::TotalRate).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn objective_is_invariant_to_uniform_amplitude_scale() {
        let (cfg, model) = desk();
        let scheme = cfg.scheme(SchemeId::Joint, 2);
        let l = base(&cfg, 2);
        let batch = batch_ids(&cfg, 0);
        let slots = sample_slots();
        let mut scaled = slots.clone();
        scaled[4..8].iter_mut().for_each(|a| *a *= 0.5);
        scaled[8..10].iter_mut().for_each(|a| *a *= 0.25);
        let a = evaluate_objective(&model, &scheme, &l, &slots, &batch, ObjectiveKind::TotalRate).unwrap();
        let b = evaluate_objective(&model, &scheme, &l, &scaled, &batch, ObjectiveKind::TotalRate).unwrap();
        assert!((a - b).abs() < 1e-9 * a);
    }

    #[test]
    fn uav_only_scheme_ignores_bs_amplitudes() {
        let (cfg, model) = desk();
        let scheme = cfg.scheme(SchemeId::JointUavPaOnly, 2);
        let l = base(&cfg, 2);
        let batch = batch_ids(&cfg, 0);
        let mut other = sample_slots();
        other[4..8].copy_from_slice(&[0.1, 0.9, 0.3, 0.4]);
        let a = evaluate_objective(&model, &scheme, &l, &sample_slots(), &batch, ObjectiveKind::SecondHop).unwrap();
        let b = evaluate_objective(&model, &scheme, &l, &other, &batch, ObjectiveKind::SecondHop).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_iterations_return_warm_start() {
        let (cfg, model) = desk();
        let scheme = cfg.scheme(SchemeId::Joint, 1);
        let l = base(&cfg, 1);
        let batch = batch_ids(&cfg, 0);
        let swarm = SwarmConfig {
            n_particles: 1,
            n_iters: 0,
            rng_seed: 3,
            ..SwarmConfig::default()
        };
        let out = optimize(&model, &scheme, &swarm, &l, &batch, ObjectiveKind::TotalRate).unwrap();
        let warm = warm_start(&model, &l, 1, 3).unwrap();
        assert_eq!(out.candidate.uav_ground, warm.uav_ground);
        assert!(out.candidate.bs_amplitudes.iter().all(|a| (0.0..=1.0).contains(a)));
        assert_eq!(out.history.len(), 1);
        let direct = evaluate_objective(&model, &scheme, &l, &encode(&out.candidate), &batch, ObjectiveKind::TotalRate).unwrap();
        assert_eq!(out.objective, direct);
    }

    #[test]
    fn short_swarm_improves_on_warm_start_monotonically() {
        let (cfg, model) = desk();
        let scheme = cfg.scheme(SchemeId::Joint, 2);
        let l = base(&cfg, 2);
        let batch = batch_ids(&cfg, 0);
        let swarm = SwarmConfig {
            n_particles: 6,
            n_iters: 5,
            rng_seed: 9,
            ..SwarmConfig::default()
        };
        let out = optimize(&model, &scheme, &swarm, &l, &batch, ObjectiveKind::TotalRate).unwrap();
        assert_eq!(out.history.len(), 6);
        assert!(out.history.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(out.trace.len(), 6);
        let warm = warm_start(&model, &l, 2, 9).unwrap();
        let w = evaluate_objective(&model, &scheme, &l, &encode(&warm), &batch, ObjectiveKind::TotalRate).unwrap();
        assert!(out.objective >= w);
        let bounds = slot_bounds(&l, 2);
        assert!(bounds.contains(&encode(&out.candidate)));
    }

    #[test]
    fn scheme_names_round_trip() {
        for id in SchemeId::ALL {
            assert_eq!(id.as_str().parse::<SchemeId>().unwrap(), id);
        }
        assert!("nope".parse::<SchemeId>().is_err());
    }

    #[test]
    fn fixed_scheme_requires_matching_positions() {
        let bad = SchemeConfig::standard(SchemeId::FixedEqual, 2, vec![[50.0, 50.0]]);
        assert!(bad.check().is_err());
        assert!(SchemeConfig::standard(SchemeId::FixedEqual, 1, vec![[50.0, 50.0]]).check().is_ok());
    }
}
