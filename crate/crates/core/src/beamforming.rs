//! Hybrid beamforming: codebook RF stages and effective-channel baseband stages.
//!
//! RF stages are stored in column form, `N × N_RF`, with columns
//! `e(λx, λy)/√N` where `e` has phase `+2πd·n·λ`. A transmit stage multiplies
//! the channel on the right (`H·F`); a receive stage is applied as the
//! transpose of its column form (`Fᵀ·H`), which matches its columns to the
//! `−2πd` arrival phase of the channel's steering vectors.

use num_complex::Complex64;

use crate::channel::{ArraySet, ChannelParams, ChannelSet, Hop};
use crate::clustering::Assignment;
use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, AngleSupport, ArrayGeometry, NetworkLayout};
use crate::linalg::{frobenius_sq, CMatrix, Svd};

/// Quantized direction-cosine pairs `λ = −1 + (2u−1)/N` for the whole grid,
/// x index outer, y index inner.
pub fn quantized_angle_grid(n_x: usize, n_y: usize) -> Vec<(f64, f64)> {
    let lam = |i: usize, n: usize| -1.0 + (2.0 * i as f64 - 1.0) / n as f64;
    (1..=n_x)
        .flat_map(|u| (1..=n_y).map(move |k| (lam(u, n_x), lam(k, n_y))))
        .collect()
}

/// Range of `sin` over `[lo, hi]`.
fn sin_range(lo: f64, hi: f64) -> (f64, f64) {
    use std::f64::consts::{FRAC_PI_2, PI};
    let mut min = lo.sin().min(hi.sin());
    let mut max = lo.sin().max(hi.sin());
    // critical points π/2 + nπ inside the interval
    let first = ((lo - FRAC_PI_2) / PI).ceil() as i64;
    let last = ((hi - FRAC_PI_2) / PI).floor() as i64;
    for n in first..=last {
        let v = (FRAC_PI_2 + n as f64 * PI).sin();
        min = min.min(v);
        max = max.max(v);
    }
    (min, max)
}

/// A support window precomputed for membership tests in direction-cosine space.
struct SupportRegion {
    sin_min: f64,
    sin_max: f64,
    mean_azimuth: f64,
    spread_azimuth: f64,
}

impl SupportRegion {
    const EPS: f64 = 1e-12;

    fn new(support: &AngleSupport) -> Self {
        let (sin_min, sin_max) = sin_range(
            support.mean_elevation - support.spread_elevation,
            support.mean_elevation + support.spread_elevation,
        );
        SupportRegion {
            sin_min,
            sin_max,
            mean_azimuth: support.mean_azimuth,
            spread_azimuth: support.spread_azimuth,
        }
    }

    fn az_ok(&self, phi: f64) -> bool {
        wrap_angle(phi - self.mean_azimuth).abs() <= self.spread_azimuth + Self::EPS
    }

    /// Membership of the point with polar form `(r, ψ)`.
    fn contains_polar(&self, r: f64, psi: f64) -> bool {
        let eps = Self::EPS;
        if r < eps {
            return self.sin_min <= eps && self.sin_max >= -eps;
        }
        (self.sin_min <= r + eps && r <= self.sin_max + eps && self.az_ok(psi))
            || (self.sin_min <= -r + eps && -r <= self.sin_max + eps && self.az_ok(psi + std::f64::consts::PI))
    }
}

/// Whether the direction-cosine point `(λx, λy)` belongs to
/// `{sinθ·(cosφ, sinφ) : θ, φ in the window}`.
pub fn support_contains(support: &AngleSupport, lx: f64, ly: f64) -> bool {
    SupportRegion::new(support).contains_polar(lx.hypot(ly), ly.atan2(lx))
}

/// Grid indices inside each support.
fn grid_members(grid: &[(f64, f64)], supports: &[AngleSupport]) -> Vec<Vec<usize>> {
    let polar: Vec<(f64, f64)> = grid.iter().map(|&(x, y)| (x.hypot(y), y.atan2(x))).collect();
    supports
        .iter()
        .map(|s| {
            let region = SupportRegion::new(s);
            (0..grid.len()).filter(|&i| region.contains_polar(polar[i].0, polar[i].1)).collect()
        })
        .collect()
}

/// RF stage: `N × N_RF` constant-modulus matrix plus the grid pairs of its columns.
#[derive(Debug, Clone, PartialEq)]
pub struct RfStage {
    pub matrix: CMatrix,
    pub quantized_pairs: Vec<(f64, f64)>,
}

impl RfStage {
    pub fn from_pairs(geom: &ArrayGeometry, pairs: Vec<(f64, f64)>) -> Self {
        let n = geom.n_elements();
        let scale = Complex64::new(1.0 / (n as f64).sqrt(), 0.0);
        let mut matrix = CMatrix::zeros(n, pairs.len());
        for (j, &(lx, ly)) in pairs.iter().enumerate() {
            matrix.set_column(j, &(geom.response(lx, ly, 1.0) * scale));
        }
        RfStage {
            matrix,
            quantized_pairs: pairs,
        }
    }

    pub fn n_elements(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_rf(&self) -> usize {
        self.matrix.ncols()
    }

    /// Row form used on the receive side, `N_RF × N`.
    pub fn combiner(&self) -> CMatrix {
        self.matrix.transpose()
    }

    /// Largest deviation of any entry modulus from `1/√N`.
    pub fn cm_deviation(&self) -> f64 {
        let target = 1.0 / (self.n_elements() as f64).sqrt();
        self.matrix.iter().map(|z| (z.norm() - target).abs()).fold(0.0, f64::max)
    }
}

fn cos_dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Round-robin over supports: each support in turn takes its nearest unused
/// candidate, until `n` picks are made or candidates run out.
fn round_robin(candidates: &[Vec<usize>], grid: &[(f64, f64)], supports: &[AngleSupport], n: usize, taken: &mut Vec<usize>) {
    let ordered: Vec<Vec<usize>> = supports
        .iter()
        .zip(candidates)
        .map(|(s, cand)| {
            let c = s.center_cosines();
            let mut v: Vec<(f64, usize)> = cand.iter().map(|&i| (cos_dist(grid[i], c), i)).collect();
            v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            v.into_iter().map(|(_, i)| i).collect()
        })
        .collect();
    let mut cursors = vec![0usize; supports.len()];
    loop {
        let mut progressed = false;
        for (s, list) in ordered.iter().enumerate() {
            if taken.len() >= n {
                return;
            }
            while cursors[s] < list.len() && taken.contains(&list[cursors[s]]) {
                cursors[s] += 1;
            }
            if cursors[s] < list.len() {
                taken.push(list[cursors[s]]);
                cursors[s] += 1;
                progressed = true;
            }
        }
        if !progressed {
            return;
        }
    }
}

/// Keep the grid pairs inside the union of `supports`, at most `n_rf` of them,
/// preferring pairs closest to each support's center.
pub fn select_rf_columns(geom: &ArrayGeometry, supports: &[AngleSupport], n_rf: usize) -> Result<RfStage> {
    let grid = quantized_angle_grid(geom.n_x, geom.n_y);
    if n_rf > grid.len() {
        return Err(Error::InvalidInput(format!("{n_rf} RF chains exceed {} grid pairs", grid.len())));
    }
    let inside = grid_members(&grid, supports);
    let mut taken = Vec::new();
    round_robin(&inside, &grid, supports, n_rf, &mut taken);
    if taken.is_empty() {
        return Err(Error::EmptyRfSupport);
    }
    Ok(RfStage::from_pairs(geom, taken.into_iter().map(|i| grid[i]).collect()))
}

/// Like [`select_rf_columns`], but always returns exactly `n_rf` columns:
/// in-support pairs first, then the grid pairs nearest the support centers.
/// Small arrays have coarse grids whose points can all miss a ±10° window.
pub fn select_rf_columns_filled(geom: &ArrayGeometry, supports: &[AngleSupport], n_rf: usize) -> Result<RfStage> {
    let grid = quantized_angle_grid(geom.n_x, geom.n_y);
    if n_rf > grid.len() || supports.is_empty() {
        return Err(Error::InvalidInput(format!("cannot pick {n_rf} of {} grid pairs", grid.len())));
    }
    let inside = grid_members(&grid, supports);
    let mut taken = Vec::new();
    round_robin(&inside, &grid, supports, n_rf, &mut taken);
    let all: Vec<Vec<usize>> = vec![(0..grid.len()).collect(); supports.len()];
    round_robin(&all, &grid, supports, n_rf, &mut taken);
    Ok(RfStage::from_pairs(geom, taken.into_iter().map(|i| grid[i]).collect()))
}

/// Baseband stage.
#[derive(Debug, Clone, PartialEq)]
pub struct BbStage {
    pub matrix: CMatrix,
}

/// Effective first-hop channel `F_urᵀ·H₁·F_b` with its SVD.
#[derive(Debug, Clone)]
pub struct EffectiveChannel {
    pub matrix: CMatrix,
    pub svd: Svd,
}

pub fn effective_h1(f_ur: &RfStage, h1: &CMatrix, f_b: &RfStage) -> EffectiveChannel {
    let matrix = f_ur.combiner() * h1 * &f_b.matrix;
    let svd = Svd::new(&matrix);
    EffectiveChannel { matrix, svd }
}

/// UAV receive baseband combiner `U₁ᴴ` (orthonormal rows).
pub fn bb_uav_receive(svd: &Svd) -> BbStage {
    BbStage {
        matrix: svd.u.adjoint(),
    }
}

/// Regularized zero-forcing precoder `(𝓗ᴴ𝓗 + β·N_RF·I)⁻¹𝓗ᴴ` for a `K_m × N_RF` effective channel.
pub fn bb_uav_transmit_rzf(effective_h2: &CMatrix, beta: f64) -> Result<BbStage> {
    if !(beta >= 0.0) {
        return Err(Error::InvalidInput(format!("RZF regularization must be nonnegative, got {beta}")));
    }
    let n_rf = effective_h2.ncols();
    let h_adj = effective_h2.adjoint();
    let mut gram = &h_adj * effective_h2;
    let ridge = Complex64::new(beta * n_rf as f64, 0.0);
    for i in 0..n_rf {
        gram[(i, i)] += ridge;
    }
    let scale = gram.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let chol = gram.cholesky().ok_or(Error::RankDeficientZf)?;
    let l = chol.l_dirty();
    let min_pivot = (0..n_rf).map(|i| l[(i, i)].re).fold(f64::INFINITY, f64::min);
    if scale == 0.0 || min_pivot * min_pivot <= 1e-13 * scale {
        return Err(Error::RankDeficientZf);
    }
    Ok(BbStage {
        matrix: chol.solve(&h_adj),
    })
}

/// Per-UAV effective second-hop channels `H₂^(m)[group m]·F_ut^(m)`, one group per UAV.
pub fn effective_h2_blocks(channels: &ChannelSet, f_ut: &[RfStage], assignment: &Assignment) -> Vec<CMatrix> {
    (0..assignment.n_uavs())
        .map(|m| channels.h2_rows(m, assignment.group(m)) * &f_ut[m].matrix)
        .collect()
}

/// Stack the BB-visible BS channels `[H_D·F_b ; F_ur^(1)ᵀH₁^(1)F_b ; …]`.
pub fn stack_bs_effective(direct: Option<&CMatrix>, first_hop: &[&CMatrix]) -> CMatrix {
    let blocks: Vec<&CMatrix> = direct.into_iter().chain(first_hop.iter().copied()).collect();
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(b);
        r += b.nrows();
    }
    out
}

/// BS baseband precoder `√(P_T/K)·V` from the first `K` right singular vectors of the stack.
pub fn bb_bs(effective_stack: &CMatrix, p_t: f64, k: usize) -> Result<BbStage> {
    let n_rf = effective_stack.ncols();
    if k > n_rf {
        return Err(Error::InvalidInput(format!("{k} streams exceed {n_rf} BS RF chains")));
    }
    // pad with zero rows so the thin SVD yields a full set of right singular vectors
    let padded = if effective_stack.nrows() < n_rf {
        let mut p = CMatrix::zeros(n_rf, n_rf);
        p.view_mut((0, 0), effective_stack.shape()).copy_from(effective_stack);
        p
    } else {
        effective_stack.clone()
    };
    let svd = Svd::new(&padded);
    let v = svd.v_adjoint.adjoint();
    let scale = Complex64::new((p_t / k as f64).sqrt(), 0.0);
    Ok(BbStage {
        matrix: v.columns(0, k).into_owned() * scale,
    })
}

/// Per-user powers (Watts) at the BS and at each UAV, with the κ scales applied so far.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    /// `p_b,k` for every user `k`.
    pub p_bs: Vec<f64>,
    /// `p_u,i^(m)` for the `i`-th user of UAV `m`'s group.
    pub p_uav: Vec<Vec<f64>>,
    pub kappa_b: f64,
    pub kappa_u: Vec<f64>,
}

impl PowerAllocation {
    /// From normalized amplitudes `√p̂ ∈ [0,1]` (so powers are their squares).
    pub fn from_amplitudes(bs: &[f64], uav: &[Vec<f64>]) -> Self {
        PowerAllocation {
            p_bs: bs.iter().map(|a| a * a).collect(),
            p_uav: uav.iter().map(|g| g.iter().map(|a| a * a).collect()).collect(),
            kappa_b: 1.0,
            kappa_u: vec![1.0; uav.len()],
        }
    }

    pub fn equal(k: usize, group_sizes: &[usize]) -> Self {
        let uav: Vec<Vec<f64>> = group_sizes.iter().map(|&g| vec![1.0; g]).collect();
        Self::from_amplitudes(&vec![1.0; k], &uav)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.p_bs.iter().chain(self.p_uav.iter().flatten()).all(|p| *p >= 0.0)
    }
}

/// RF and BB stages of one UAV.
#[derive(Debug, Clone)]
pub struct UavBeamformers {
    pub f_ur: RfStage,
    pub b_ur: BbStage,
    pub f_ut: RfStage,
    pub b_ut: BbStage,
    /// Effective first-hop channel this UAV's combiner was designed on.
    pub effective_h1: EffectiveChannel,
}

/// Every stage of the transmit/receive chain plus the power allocation.
#[derive(Debug, Clone)]
pub struct HybridBeamformers {
    pub f_b: RfStage,
    pub b_b: BbStage,
    pub uavs: Vec<UavBeamformers>,
    pub pa: PowerAllocation,
}

fn diag_sqrt(m: &CMatrix, powers: &[f64]) -> CMatrix {
    let mut out = m.clone();
    for (j, p) in powers.iter().enumerate() {
        out.column_mut(j).scale_mut(p.sqrt());
    }
    out
}

impl HybridBeamformers {
    /// `B_b·P_b`.
    pub fn g_bs(&self) -> CMatrix {
        diag_sqrt(&self.b_b.matrix, &self.pa.p_bs)
    }

    /// `B_ut^(m)·P_u^(m)`.
    pub fn g_uav(&self, m: usize) -> CMatrix {
        diag_sqrt(&self.uavs[m].b_ut.matrix, &self.pa.p_uav[m])
    }

    /// `‖F_b·B_b·P_b‖_F²`.
    pub fn bs_transmit_power(&self) -> f64 {
        frobenius_sq(&(&self.f_b.matrix * self.g_bs()))
    }

    /// `‖F_ut^(m)·B_ut^(m)·P_u^(m)‖_F²`.
    pub fn uav_transmit_power(&self, m: usize) -> f64 {
        frobenius_sq(&(&self.uavs[m].f_ut.matrix * self.g_uav(m)))
    }
}

/// Scale `powers` by κ² so that `‖F·B·diag(√p)‖_F² = target`; returns κ.
fn normalize_one(f: &CMatrix, b: &CMatrix, powers: &mut [f64], target: f64, who: &str) -> Result<f64> {
    if powers.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::InvalidInput(format!("negative power allocation at {who}")));
    }
    let fb = f * b;
    let current: f64 = powers
        .iter()
        .enumerate()
        .map(|(j, p)| p * fb.column(j).norm_squared())
        .sum();
    if !(current > 0.0) || !current.is_finite() {
        return Err(Error::DegeneratePowerAllocation {
            transmitter: who.to_string(),
        });
    }
    let kappa_sq = target / current;
    powers.iter_mut().for_each(|p| *p *= kappa_sq);
    Ok(kappa_sq.sqrt())
}

/// Apply κ scaling so the BS radiates `p_t` and UAV `m` radiates `p_u_targets[m]`.
pub fn normalize_power(hb: &HybridBeamformers, p_t: f64, p_u_targets: &[f64]) -> Result<HybridBeamformers> {
    let mut out = hb.clone();
    let kb = normalize_one(&out.f_b.matrix, &out.b_b.matrix, &mut out.pa.p_bs, p_t, "BS")?;
    out.pa.kappa_b *= kb;
    for (m, target) in p_u_targets.iter().enumerate() {
        let u = &out.uavs[m];
        let ku = normalize_one(&u.f_ut.matrix, &u.b_ut.matrix, &mut out.pa.p_uav[m], *target, &format!("UAV {m}"))?;
        out.pa.kappa_u[m] *= ku;
    }
    Ok(out)
}

/// Knobs of the stage design that are not part of the channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignOptions {
    /// BS RF chains; `None` means `K`.
    pub n_rf_bs: Option<usize>,
    /// RF chains per UAV side; `None` means `K_m`.
    pub n_rf_uav: Option<usize>,
    /// Include BS → user channels in the BS stage design.
    pub direct_link: bool,
    /// BS budget `P_T` (Watts).
    pub p_t: f64,
    /// Per-UAV budget `P_u` (Watts).
    pub p_uav: f64,
    /// Second-hop noise variance for the RZF regularizer `β = σ²/P_u`.
    pub sigma2_second_hop: f64,
}

/// Build RF and BB stages for the BS and every UAV, then normalize `pa` to the budgets.
pub fn design_beamformers(
    params: &ChannelParams,
    arrays: &ArraySet,
    layout: &NetworkLayout,
    channels: &ChannelSet,
    assignment: &Assignment,
    pa: PowerAllocation,
    opts: &DesignOptions,
) -> Result<HybridBeamformers> {
    let k = layout.n_users();
    let m_count = layout.n_uavs();
    let n_rf_bs = opts.n_rf_bs.unwrap_or(k);
    let n_rf_uav = opts.n_rf_uav.unwrap_or(layout.users_per_uav());

    let mut bs_supports = Vec::with_capacity(m_count + k);
    for uav in &layout.uavs {
        bs_supports.push(params.support(Hop::First, &layout.bs, uav)?);
    }
    if opts.direct_link {
        for user in &layout.users {
            bs_supports.push(params.support(Hop::Second, &layout.bs, user)?);
        }
    }
    let f_b = select_rf_columns_filled(&arrays.bs, &bs_supports, n_rf_bs)?;

    let mut f_ur = Vec::with_capacity(m_count);
    let mut f_ut = Vec::with_capacity(m_count);
    for (m, uav) in layout.uavs.iter().enumerate() {
        let rx = params.support(Hop::First, uav, &layout.bs)?;
        f_ur.push(select_rf_columns_filled(&arrays.uav_rx, &[rx], n_rf_uav)?);
        let tx: Vec<AngleSupport> = assignment
            .group(m)
            .iter()
            .map(|&u| params.support(Hop::Second, uav, &layout.users[u]))
            .collect::<Result<_>>()?;
        f_ut.push(select_rf_columns_filled(&arrays.uav_tx, &tx, n_rf_uav)?);
    }

    let eff_h1: Vec<EffectiveChannel> = (0..m_count)
        .map(|m| effective_h1(&f_ur[m], &channels.h1[m], &f_b))
        .collect();
    let eff_h2 = effective_h2_blocks(channels, &f_ut, assignment);
    let hd_eff = opts.direct_link.then(|| &channels.hd * &f_b.matrix);
    let stack = stack_bs_effective(hd_eff.as_ref(), &eff_h1.iter().map(|e| &e.matrix).collect::<Vec<_>>());
    let b_b = bb_bs(&stack, opts.p_t, k)?;

    let beta = opts.sigma2_second_hop / opts.p_uav;
    let mut uavs = Vec::with_capacity(m_count);
    for (m, ((fr, ft), eff)) in f_ur.into_iter().zip(f_ut).zip(eff_h1).enumerate() {
        let b_ur = bb_uav_receive(&eff.svd);
        let b_ut = bb_uav_transmit_rzf(&eff_h2[m], beta)?;
        uavs.push(UavBeamformers {
            f_ur: fr,
            b_ur,
            f_ut: ft,
            b_ut,
            effective_h1: eff,
        });
    }
    let hb = HybridBeamformers { f_b, b_b, uavs, pa };
    normalize_power(&hb, opts.p_t, &vec![opts.p_uav; m_count])
}
