//! Geometry-based mmWave channel synthesis.
//!
//! Every path amplitude carries `τ^(−η)` on the complex gain itself (not on
//! power), so received power falls as `τ^(−2η)`.
//!
//! Randomness is keyed by `(seed, realization, link)`: each link owns its own
//! ChaCha stream, so the path gains and angle offsets of a link do not depend
//! on which other links were drawn or on where the endpoints are. Moving a UAV
//! changes path loss and mean angles while keeping the small-scale draws fixed.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{angles_between, distance_3d, steering_vector, AngleSupport, ArrayGeometry, NetworkLayout, Position3D};
use crate::linalg::{CMatrix, CVector};

/// Which hop a link belongs to; selects the angular window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hop {
    /// BS → UAV.
    First,
    /// UAV → user and BS → user.
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AngleSource {
    /// Mean angles follow the endpoint positions.
    Geometry,
    /// Mean angles are the fixed per-hop values in [`LinkWindow::fixed_mean`].
    Fixed,
}

/// Angular window of one hop, in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkWindow {
    pub spread_elevation: f64,
    pub spread_azimuth: f64,
    /// `(elevation, azimuth)` used when the angle source is [`AngleSource::Fixed`].
    pub fixed_mean: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub n_clusters: usize,
    pub n_paths_first_hop: usize,
    pub n_paths_second_hop: usize,
    pub path_loss_exponent: f64,
    pub carrier_freq_hz: f64,
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_per_hz: f64,
    pub first_hop: LinkWindow,
    pub second_hop: LinkWindow,
    pub angle_source: AngleSource,
    pub rng_seed: u64,
}

impl ChannelParams {
    /// Angular window of the link `from → to`.
    pub fn support(&self, hop: Hop, from: &Position3D, to: &Position3D) -> Result<AngleSupport> {
        let window = match hop {
            Hop::First => &self.first_hop,
            Hop::Second => &self.second_hop,
        };
        let (el, az) = match self.angle_source {
            AngleSource::Geometry => angles_between(from, to)?,
            AngleSource::Fixed => {
                // still reject coincident endpoints
                angles_between(from, to)?;
                window.fixed_mean
            }
        };
        Ok(AngleSupport::new(el, az, window.spread_elevation, window.spread_azimuth))
    }

    pub fn noise_power_dbm(&self) -> f64 {
        noise_power_dbm(self.noise_psd_dbm_per_hz, self.bandwidth_hz)
    }
}

/// Thermal noise power over the band, `psd + 10·log10(bandwidth)`.
pub fn noise_power_dbm(noise_psd_dbm_per_hz: f64, bandwidth_hz: f64) -> f64 {
    noise_psd_dbm_per_hz + 10.0 * bandwidth_hz.log10()
}

/// Arrays at the BS and on every UAV (receive and transmit side).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArraySet {
    pub bs: ArrayGeometry,
    pub uav_rx: ArrayGeometry,
    pub uav_tx: ArrayGeometry,
}

/// Identity of a link for RNG keying.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkId {
    BsToUav { uav: usize },
    UavToUser { uav: usize, user: usize },
    BsToUser { user: usize },
}

impl LinkId {
    fn stream(&self) -> u64 {
        match *self {
            LinkId::BsToUav { uav } => (1 << 60) | uav as u64,
            LinkId::UavToUser { uav, user } => (2 << 60) | ((uav as u64) << 30) | user as u64,
            LinkId::BsToUser { user } => (3 << 60) | user as u64,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 32-byte ChaCha key derived from a seed and a sequence of labels.
pub fn keyed_rng(seed: u64, labels: &[u64]) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = splitmix64(seed);
    for l in labels {
        state = splitmix64(state ^ splitmix64(*l));
    }
    for chunk in key.chunks_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// RNG for one link of one Monte Carlo realization.
pub fn link_rng(seed: u64, realization: u64, link: LinkId) -> ChaCha8Rng {
    let mut rng = keyed_rng(seed, &[realization]);
    rng.set_stream(link.stream());
    rng
}

/// Circularly symmetric complex Gaussian with variance `var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// One propagation path: departure and arrival directions plus complex gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathDraw {
    pub departure: (f64, f64),
    pub arrival: (f64, f64),
    pub gain: Complex64,
}

/// Draw `n` paths with angles uniform in the windows and gains `CN(0, 1/n)`.
pub fn sample_paths<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    departure: &AngleSupport,
    arrival: &AngleSupport,
) -> Vec<PathDraw> {
    let var = 1.0 / n as f64;
    (0..n)
        .map(|_| {
            let d = departure.at_offsets(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
            let a = arrival.at_offsets(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
            PathDraw {
                departure: d,
                arrival: a,
                gain: complex_gaussian(rng, var),
            }
        })
        .collect()
}

/// `Σ z·τ^(−η)·a_rx·a_txᵀ` over the given paths.
pub fn h1_from_paths(
    paths: &[PathDraw],
    distance: f64,
    path_loss_exponent: f64,
    geom_tx: &ArrayGeometry,
    geom_rx: &ArrayGeometry,
) -> CMatrix {
    let loss = distance.powf(-path_loss_exponent);
    let mut h = CMatrix::zeros(geom_rx.n_elements(), geom_tx.n_elements());
    for p in paths {
        let a_rx = steering_vector(geom_rx, p.arrival.0, p.arrival.1);
        let a_tx = steering_vector(geom_tx, p.departure.0, p.departure.1);
        h.ger(p.gain * loss, &a_rx, &a_tx, Complex64::new(1.0, 0.0));
    }
    h
}

/// `Σ z·τ^(−η)·a_tx` over the given paths (only the departure side matters for
/// a single-antenna receiver).
pub fn user_channel_from_paths(
    paths: &[PathDraw],
    distance: f64,
    path_loss_exponent: f64,
    geom_tx: &ArrayGeometry,
) -> CVector {
    let loss = distance.powf(-path_loss_exponent);
    let mut h = CVector::zeros(geom_tx.n_elements());
    for p in paths {
        h.axpy(p.gain * loss, &steering_vector(geom_tx, p.departure.0, p.departure.1), Complex64::new(1.0, 0.0));
    }
    h
}

/// BS → UAV `uav_index` channel (`N_r × N_b`), drawing `C·L` paths from `rng`.
pub fn synthesize_h1<R: Rng + ?Sized>(
    params: &ChannelParams,
    layout: &NetworkLayout,
    uav_index: usize,
    geom_tx: &ArrayGeometry,
    geom_rx: &ArrayGeometry,
    rng: &mut R,
) -> Result<(CMatrix, Vec<PathDraw>)> {
    let uav = &layout.uavs[uav_index];
    let departure = params.support(Hop::First, &layout.bs, uav)?;
    let arrival = params.support(Hop::First, uav, &layout.bs)?;
    let n = params.n_clusters * params.n_paths_first_hop;
    let paths = sample_paths(rng, n, &departure, &arrival);
    let h = h1_from_paths(&paths, distance_3d(&layout.bs, uav), params.path_loss_exponent, geom_tx, geom_rx);
    Ok((h, paths))
}

/// Transmitter → single-antenna user channel (length `N`), drawing `Q` paths.
pub fn synthesize_user_channel<R: Rng + ?Sized>(
    params: &ChannelParams,
    tx_pos: &Position3D,
    user_pos: &Position3D,
    geom_tx: &ArrayGeometry,
    rng: &mut R,
) -> Result<(CVector, Vec<PathDraw>)> {
    let departure = params.support(Hop::Second, tx_pos, user_pos)?;
    let arrival = params.support(Hop::Second, user_pos, tx_pos)?;
    let paths = sample_paths(rng, params.n_paths_second_hop, &departure, &arrival);
    let h = user_channel_from_paths(&paths, distance_3d(tx_pos, user_pos), params.path_loss_exponent, geom_tx);
    Ok((h, paths))
}

/// One realization of every channel in the network.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// BS → UAV m, `N_r × N_b`.
    pub h1: Vec<CMatrix>,
    /// UAV m → every user, `K × N_t` (row k is user k). Group rows are
    /// selected with [`ChannelSet::h2_rows`] once users are associated.
    pub h2: Vec<CMatrix>,
    /// BS → every user, `K × N_b`.
    pub hd: CMatrix,
    pub path_gains: Vec<(LinkId, Vec<Complex64>)>,
}

impl ChannelSet {
    /// Rows of `h2[uav]` for the listed users, in order.
    pub fn h2_rows(&self, uav: usize, users: &[usize]) -> CMatrix {
        let full = &self.h2[uav];
        CMatrix::from_fn(users.len(), full.ncols(), |i, j| full[(users[i], j)])
    }

    pub fn is_finite(&self) -> bool {
        let fin = |m: &CMatrix| m.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        self.h1.iter().all(fin) && self.h2.iter().all(fin) && fin(&self.hd)
    }
}

fn stack_rows(rows: Vec<CVector>, n: usize) -> CMatrix {
    CMatrix::from_fn(rows.len(), n, |i, j| rows[i][j])
}

/// All channels of realization `realization` for `layout`.
pub fn synthesize_channels(
    params: &ChannelParams,
    layout: &NetworkLayout,
    arrays: &ArraySet,
    realization: u64,
) -> Result<ChannelSet> {
    let seed = params.rng_seed;
    let mut path_gains = Vec::new();
    let mut h1 = Vec::with_capacity(layout.n_uavs());
    let mut h2 = Vec::with_capacity(layout.n_uavs());
    for m in 0..layout.n_uavs() {
        let link = LinkId::BsToUav { uav: m };
        let mut rng = link_rng(seed, realization, link);
        let (h, paths) = synthesize_h1(params, layout, m, &arrays.bs, &arrays.uav_rx, &mut rng)?;
        path_gains.push((link, paths.iter().map(|p| p.gain).collect()));
        h1.push(h);

        let mut rows = Vec::with_capacity(layout.n_users());
        for (k, user) in layout.users.iter().enumerate() {
            let link = LinkId::UavToUser { uav: m, user: k };
            let mut rng = link_rng(seed, realization, link);
            let (h, paths) = synthesize_user_channel(params, &layout.uavs[m], user, &arrays.uav_tx, &mut rng)?;
            path_gains.push((link, paths.iter().map(|p| p.gain).collect()));
            rows.push(h);
        }
        h2.push(stack_rows(rows, arrays.uav_tx.n_elements()));
    }
    let mut rows = Vec::with_capacity(layout.n_users());
    for (k, user) in layout.users.iter().enumerate() {
        let link = LinkId::BsToUser { user: k };
        let mut rng = link_rng(seed, realization, link);
        let (h, paths) = synthesize_user_channel(params, &layout.bs, user, &arrays.bs, &mut rng)?;
        path_gains.push((link, paths.iter().map(|p| p.gain).collect()));
        rows.push(h);
    }
    let hd = stack_rows(rows, arrays.bs.n_elements());
    Ok(ChannelSet {
        h1,
        h2,
        hd,
        path_gains,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::geometry::direction_cosines;

    fn deg(d: f64) -> f64 {
        d.to_radians()
    }

    pub(crate) fn params() -> ChannelParams {
        let w1 = LinkWindow {
            spread_elevation: deg(10.0),
            spread_azimuth: deg(10.0),
            fixed_mean: (deg(60.0), deg(120.0)),
        };
        let w2 = LinkWindow {
            fixed_mean: (deg(30.0), deg(150.0)),
            ..w1
        };
        ChannelParams {
            n_clusters: 1,
            n_paths_first_hop: 10,
            n_paths_second_hop: 10,
            path_loss_exponent: 3.6,
            carrier_freq_hz: 28e9,
            bandwidth_hz: 100e6,
            noise_psd_dbm_per_hz: -174.0,
            first_hop: w1,
            second_hop: w2,
            angle_source: AngleSource::Geometry,
            rng_seed: 7,
        }
    }

    pub(crate) fn layout() -> NetworkLayout {
        NetworkLayout::new(
            Position3D::new(0.0, 0.0, 10.0),
            vec![Position3D::new(50.0, 50.0, 20.0), Position3D::new(90.0, 40.0, 20.0)],
            (0..4).map(|k| Position3D::new(55.0 + 10.0 * k as f64, 60.0, 0.0)).collect(),
            [0.0; 2],
            [100.0; 2],
        )
        .unwrap()
    }

    pub(crate) fn arrays() -> ArraySet {
        let g = ArrayGeometry::new(4, 4, 0.5).unwrap();
        ArraySet { bs: g, uav_rx: g, uav_tx: g }
    }

    #[test]
    fn noise_power_examples() {
        assert!((noise_power_dbm(-174.0, 100e6) - (-94.0)).abs() < 1e-12);
        assert_eq!(noise_power_dbm(-174.0, 1.0), -174.0);
        assert!((noise_power_dbm(0.0, 10.0) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn single_path_unit_gain_is_outer_product() {
        let g = ArrayGeometry::new(2, 2, 0.5).unwrap();
        let path = PathDraw {
            departure: (0.3, 0.2),
            arrival: (-0.4, 1.0),
            gain: Complex64::new(1.0, 0.0),
        };
        let h = h1_from_paths(&[path], 1.0, 3.6, &g, &g);
        let expect = steering_vector(&g, -0.4, 1.0) * steering_vector(&g, 0.3, 0.2).transpose();
        assert!((h - &expect).norm() < 1e-14);
        let svd = crate::linalg::Svd::new(&expect);
        assert_eq!(svd.rank(1e-10), 1);

        let v = user_channel_from_paths(&[path], 1.0, 3.6, &g);
        assert!((v - steering_vector(&g, 0.3, 0.2)).norm() < 1e-14);
    }

    #[test]
    fn doubling_distance_scales_by_path_loss() {
        let p = params();
        let base = layout();
        // move UAV 0 twice as far along the same ray from the BS: same angles, τ doubled
        let mut far = base.clone();
        let bs = base.bs;
        let u = base.uavs[0];
        far.uavs[0] = Position3D::new(bs.x + 2.0 * (u.x - bs.x), bs.y + 2.0 * (u.y - bs.y), bs.z + 2.0 * (u.z - bs.z));
        far.bounds_max = [200.0; 2];
        let a = arrays();
        let mut r1 = link_rng(1, 0, LinkId::BsToUav { uav: 0 });
        let mut r2 = link_rng(1, 0, LinkId::BsToUav { uav: 0 });
        let (h_near, _) = synthesize_h1(&p, &base, 0, &a.bs, &a.uav_rx, &mut r1).unwrap();
        let (h_far, _) = synthesize_h1(&p, &far, 0, &a.bs, &a.uav_rx, &mut r2).unwrap();
        let factor = 2f64.powf(-3.6);
        for (n, f) in h_near.iter().zip(h_far.iter()) {
            assert!((n * factor - f).norm() <= 1e-12 * n.norm().max(1e-300));
        }
    }

    #[test]
    fn synthesis_is_deterministic_and_shaped() {
        let p = params();
        let l = layout();
        let a = arrays();
        let c1 = synthesize_channels(&p, &l, &a, 3).unwrap();
        let c2 = synthesize_channels(&p, &l, &a, 3).unwrap();
        assert_eq!(c1, c2);
        assert!(c1.is_finite());
        assert_eq!(c1.h1.len(), 2);
        assert_eq!(c1.h1[0].shape(), (16, 16));
        assert_eq!(c1.h2[1].shape(), (4, 16));
        assert_eq!(c1.hd.shape(), (4, 16));
        assert_eq!(c1.h2_rows(0, &[1, 3]).shape(), (2, 16));
        let c3 = synthesize_channels(&p, &l, &a, 4).unwrap();
        assert_ne!(c1.h1[0], c3.h1[0]);
    }

    #[test]
    fn h1_is_homogeneous_in_a_path_gain() {
        let g = ArrayGeometry::new(3, 2, 0.5).unwrap();
        let sup = AngleSupport::new(0.3, 0.5, deg(10.0), deg(10.0));
        let mut rng = keyed_rng(11, &[]);
        let mut paths = sample_paths(&mut rng, 5, &sup, &sup);
        let base = h1_from_paths(&paths, 30.0, 3.6, &g, &g);
        let only0 = h1_from_paths(&paths[..1], 30.0, 3.6, &g, &g);
        let c = Complex64::new(-1.7, 0.4);
        paths[0].gain *= c;
        let scaled = h1_from_paths(&paths, 30.0, 3.6, &g, &g);
        let expect = &base + &only0 * (c - Complex64::new(1.0, 0.0));
        assert!((scaled - expect).norm() < 1e-12 * base.norm());
    }

    #[test]
    fn sampled_angles_stay_in_window() {
        let sup_d = AngleSupport::new(0.2, 2.9, deg(10.0), deg(10.0));
        let sup_a = AngleSupport::new(-0.9, -3.0, deg(5.0), deg(20.0));
        let mut rng = keyed_rng(5, &[1, 2]);
        for p in sample_paths(&mut rng, 2000, &sup_d, &sup_a) {
            assert!(sup_d.contains(p.departure.0, p.departure.1));
            assert!(sup_a.contains(p.arrival.0, p.arrival.1));
        }
    }

    #[test]
    fn user_gain_variance_contract() {
        // Monte Carlo estimate of E[Σ_q |z_q|²] for z_q ~ CN(0, 1/Q)
        let sup = AngleSupport::new(0.0, 0.0, 0.1, 0.1);
        let mut rng = keyed_rng(99, &[]);
        let draws = 10_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            acc += sample_paths(&mut rng, 10, &sup, &sup).iter().map(|p| p.gain.norm_sqr()).sum::<f64>();
        }
        let mean = acc / draws as f64;
        assert!((mean - 1.0).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn fixed_angle_source_uses_table_means() {
        let mut p = params();
        p.angle_source = AngleSource::Fixed;
        let l = layout();
        let s = p.support(Hop::Second, &l.uavs[0], &l.users[0]).unwrap();
        assert_eq!((s.mean_elevation, s.mean_azimuth), (deg(30.0), deg(150.0)));
        let (u, v) = s.center_cosines();
        assert_eq!((u, v), direction_cosines(deg(30.0), deg(150.0)));
    }

    #[test]
    fn coincident_user_is_rejected() {
        let p = params();
        let g = ArrayGeometry::new(2, 2, 0.5).unwrap();
        let pos = Position3D::new(1.0, 1.0, 0.0);
        let mut rng = keyed_rng(1, &[]);
        assert!(synthesize_user_channel(&p, &pos, &pos, &g, &mut rng).is_err());
    }
}
