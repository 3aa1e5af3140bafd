//! First-hop, second-hop and end-to-end achievable rates (bps/Hz).

use serde::{Deserialize, Serialize};

use crate::beamforming::{HybridBeamformers, RfStage};
use crate::channel::ChannelSet;
use crate::clustering::Assignment;
use crate::error::{Error, Result};
use crate::linalg::{diag_condition, log2_det_hpd, CMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Per-antenna noise at each UAV receiver (Watts).
    pub sigma2_relay: f64,
    /// Noise at a user during the source phase (Watts).
    pub sigma2_direct: f64,
    /// Noise at a user during the relay phase (Watts).
    pub sigma2_second_hop: f64,
}

impl NoiseModel {
    pub fn uniform(sigma2: f64) -> Self {
        NoiseModel {
            sigma2_relay: sigma2,
            sigma2_direct: sigma2,
            sigma2_second_hop: sigma2,
        }
    }
}

/// How a UAV's first-hop rate is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FirstHopMode {
    /// Only the `K_m` streams routed to this UAV count as signal; the other
    /// BS streams arriving at it are interference.
    Routed,
    /// All `K` BS streams count as signal, power allocation included.
    AllStreams,
    /// All `K` streams with `B_b·B_bᴴ` and no power allocation.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateOptions {
    pub direct_link: bool,
    pub inter_uav_interference: bool,
    pub first_hop: FirstHopMode,
}

impl Default for RateOptions {
    fn default() -> Self {
        RateOptions {
            direct_link: true,
            inter_uav_interference: true,
            first_hop: FirstHopMode::AllStreams,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateBreakdown {
    pub r1_per_uav: Vec<f64>,
    pub r2_per_uav: Vec<f64>,
    pub per_user_sinr: Vec<f64>,
    pub r_total: f64,
}

impl RateBreakdown {
    pub fn r2_sum(&self) -> f64 {
        self.r2_per_uav.iter().sum()
    }
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * num_complex::Complex64::new(0.5, 0.0)
}

fn log_det(context: &'static str, m: &CMatrix) -> Result<f64> {
    log2_det_hpd(&hermitian_part(m)).ok_or_else(|| Error::NumericalBlowup {
        context,
        condition: diag_condition(m),
    })
}

/// Noise covariance after RF and BB combining, `σ²·B·Fᵀ·F̄·Bᴴ`.
fn combined_noise(b_ur: &CMatrix, f_ur: &RfStage, sigma2: f64) -> CMatrix {
    let w = b_ur * f_ur.combiner();
    (&w * w.adjoint()) * num_complex::Complex64::new(sigma2, 0.0)
}

/// `log₂|I + Q₁⁻¹·B·𝓗₁·G·Gᴴ·𝓗₁ᴴ·Bᴴ|` with `Q₁` the combined receive noise.
pub fn rate_first_hop(effective_h1: &CMatrix, b_ur: &CMatrix, f_ur: &RfStage, g_b: &CMatrix, sigma2: f64) -> Result<f64> {
    let empty = CMatrix::zeros(g_b.nrows(), 0);
    rate_first_hop_with_interference(effective_h1, b_ur, f_ur, g_b, &empty, sigma2)
}

/// First-hop rate of the streams in `g_own` while the streams in `g_other`
/// reach the same receiver as interference.
pub fn rate_first_hop_with_interference(
    effective_h1: &CMatrix,
    b_ur: &CMatrix,
    f_ur: &RfStage,
    g_own: &CMatrix,
    g_other: &CMatrix,
    sigma2: f64,
) -> Result<f64> {
    let q = combined_noise(b_ur, f_ur, sigma2);
    let a_own = b_ur * effective_h1 * g_own;
    let a_oth = b_ur * effective_h1 * g_other;
    let base = &q + &a_oth * a_oth.adjoint();
    let full = &base + &a_own * a_own.adjoint();
    let r = log_det("first-hop signal", &full)? - log_det("first-hop noise", &base)?;
    Ok(r.max(0.0))
}

/// One side (direct or relayed) of a user's received signal.
///
/// `gains[j] = |h·F·b_j|²` for every stream `j` the transmitter sends, and
/// `powers[j]` is that stream's allocated power.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkTerms {
    pub gains: Vec<f64>,
    pub powers: Vec<f64>,
    /// Index of this user's own stream.
    pub own: usize,
}

impl LinkTerms {
    /// `|h·F·b_j|²` for every column of `b`.
    pub fn from_channel(h_row: &CMatrix, f: &CMatrix, b: &CMatrix, powers: &[f64], own: usize) -> Self {
        let hf = h_row * f * b;
        LinkTerms {
            gains: hf.iter().map(|z| z.norm_sqr()).collect(),
            powers: powers.to_vec(),
            own,
        }
    }

    fn desired(&self) -> f64 {
        self.powers[self.own] * self.gains[self.own]
    }

    fn interference(&self) -> f64 {
        self.gains
            .iter()
            .zip(&self.powers)
            .enumerate()
            .filter(|(j, _)| *j != self.own)
            .map(|(_, (g, p))| g * p)
            .sum()
    }
}

/// Two-term SINR of one user: direct-link SINR plus relay-link SINR.
///
/// `extra_interference` is added to the relay-link denominator (signals from
/// other UAVs in the relay phase).
pub fn sinr_user(direct: Option<&LinkTerms>, relay: &LinkTerms, extra_interference: f64, noise: &NoiseModel) -> f64 {
    let direct_term = direct.map_or(0.0, |d| d.desired() / (d.interference() + noise.sigma2_direct));
    let relay_term = relay.desired() / (relay.interference() + extra_interference + noise.sigma2_second_hop);
    direct_term + relay_term
}

/// `Σ_i log₂(1 + γ_i)` over each UAV's own users.
pub fn rate_second_hop(assignment: &Assignment, sinrs: &[f64]) -> Vec<f64> {
    assignment
        .groups()
        .iter()
        .map(|g| g.iter().map(|&k| (1.0 + sinrs[k]).log2()).sum())
        .collect()
}

/// `Σ_m ½·min(R₁^(m), R₂^(m))` for half-duplex decode-and-forward relays.
pub fn rate_total(r1: &[f64], r2: &[f64]) -> f64 {
    assert_eq!(r1.len(), r2.len(), "one first-hop and one second-hop rate per UAV");
    r1.iter().zip(r2).map(|(a, b)| 0.5 * a.min(*b)).sum()
}

fn row_of(m: &CMatrix, i: usize) -> CMatrix {
    CMatrix::from_fn(1, m.ncols(), |_, j| m[(i, j)])
}

fn select_columns(m: &CMatrix, cols: &[usize]) -> CMatrix {
    CMatrix::from_fn(m.nrows(), cols.len(), |i, j| m[(i, cols[j])])
}

/// Received relay-phase power at `user` from every UAV other than its own.
pub fn inter_uav_interference(channels: &ChannelSet, hb: &HybridBeamformers, assignment: &Assignment, user: usize) -> f64 {
    let own = assignment.owner(user);
    (0..assignment.n_uavs())
        .filter(|&m| m != own)
        .map(|m| {
            let h = row_of(&channels.h2[m], user);
            let y = h * &hb.uavs[m].f_ut.matrix * hb.g_uav(m);
            y.iter().map(|z| z.norm_sqr()).sum::<f64>()
        })
        .sum()
}

/// Per-user SINRs for the whole network.
pub fn user_sinrs(
    channels: &ChannelSet,
    hb: &HybridBeamformers,
    assignment: &Assignment,
    noise: &NoiseModel,
    opts: &RateOptions,
) -> Vec<f64> {
    (0..assignment.n_users())
        .map(|k| {
            let m = assignment.owner(k);
            let slot = assignment.group(m).iter().position(|&u| u == k).expect("user in own group");
            let direct = opts.direct_link.then(|| {
                let h = row_of(&channels.hd, k);
                LinkTerms::from_channel(&h, &hb.f_b.matrix, &hb.b_b.matrix, &hb.pa.p_bs, k)
            });
            let h2 = row_of(&channels.h2[m], k);
            let relay = LinkTerms::from_channel(&h2, &hb.uavs[m].f_ut.matrix, &hb.uavs[m].b_ut.matrix, &hb.pa.p_uav[m], slot);
            let extra = if opts.inter_uav_interference {
                inter_uav_interference(channels, hb, assignment, k)
            } else {
                0.0
            };
            sinr_user(direct.as_ref(), &relay, extra, noise)
        })
        .collect()
}

/// First-hop rate of every UAV.
pub fn first_hop_rates(hb: &HybridBeamformers, assignment: &Assignment, noise: &NoiseModel, mode: FirstHopMode) -> Result<Vec<f64>> {
    let g_b = hb.g_bs();
    let k = assignment.n_users();
    (0..assignment.n_uavs())
        .map(|m| {
            let u = &hb.uavs[m];
            let eff = &u.effective_h1.matrix;
            match mode {
                FirstHopMode::Routed => {
                    let own = assignment.group(m);
                    let other: Vec<usize> = (0..k).filter(|j| !own.contains(j)).collect();
                    rate_first_hop_with_interference(
                        eff,
                        &u.b_ur.matrix,
                        &u.f_ur,
                        &select_columns(&g_b, own),
                        &select_columns(&g_b, &other),
                        noise.sigma2_relay,
                    )
                }
                FirstHopMode::AllStreams => rate_first_hop(eff, &u.b_ur.matrix, &u.f_ur, &g_b, noise.sigma2_relay),
                FirstHopMode::Literal => rate_first_hop(eff, &u.b_ur.matrix, &u.f_ur, &hb.b_b.matrix, noise.sigma2_relay),
            }
        })
        .collect()
}

/// Evaluate every rate of one configuration.
pub fn evaluate_rates(
    channels: &ChannelSet,
    hb: &HybridBeamformers,
    assignment: &Assignment,
    noise: &NoiseModel,
    opts: &RateOptions,
) -> Result<RateBreakdown> {
    let per_user_sinr = user_sinrs(channels, hb, assignment, noise, opts);
    let r2_per_uav = rate_second_hop(assignment, &per_user_sinr);
    let r1_per_uav = first_hop_rates(hb, assignment, noise, opts.first_hop)?;
    let r_total = rate_total(&r1_per_uav, &r2_per_uav);
    Ok(RateBreakdown {
        r1_per_uav,
        r2_per_uav,
        per_user_sinr,
        r_total,
    })
}
