//! Experiment configuration: a flat TOML document with units in key names.
//!
//! A preset supplies every key; a config file may override any subset.
//! Unknown keys are rejected by name.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{AngleSource, ArraySet, ChannelParams, LinkWindow};
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, Position3D};
use crate::linalg::dbm_to_watts;
use crate::placement::{ObjectiveKind, SchemeConfig, SchemeId, SystemModel};
use crate::pso::SwarmConfig;
use crate::rates::{FirstHopMode, NoiseModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UserDistribution {
    /// Equal shares of users uniform in disks around each hotspot center.
    TwoHotspot,
    /// Users uniform over the whole deployment box.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,

    pub bs_antennas_x: usize,
    pub bs_antennas_y: usize,
    pub uav_rx_antennas_x: usize,
    pub uav_rx_antennas_y: usize,
    pub uav_tx_antennas_x: usize,
    pub uav_tx_antennas_y: usize,
    pub element_spacing_wavelengths: f64,
    /// 0 means one RF chain per BS stream (`K`).
    pub n_rf_bs: usize,
    /// 0 means one RF chain per UAV stream (`K/M`).
    pub n_rf_uav: usize,

    pub n_clusters: usize,
    pub n_paths_first_hop: usize,
    pub n_paths_second_hop: usize,
    pub path_loss_exponent: f64,
    pub carrier_freq_hz: f64,
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_per_hz: f64,

    pub angle_source: AngleSource,
    pub first_hop_elevation_deg: f64,
    pub first_hop_azimuth_deg: f64,
    pub second_hop_elevation_deg: f64,
    pub second_hop_azimuth_deg: f64,
    pub elevation_spread_deg: f64,
    pub azimuth_spread_deg: f64,

    pub bs_x_m: f64,
    pub bs_y_m: f64,
    pub bs_height_m: f64,
    pub uav_height_m: f64,
    pub x_min_m: f64,
    pub x_max_m: f64,
    pub y_min_m: f64,
    pub y_max_m: f64,

    pub n_users: usize,
    pub user_distribution: UserDistribution,
    pub hotspot_centers_m: Vec<[f64; 2]>,
    pub hotspot_radius_m: f64,
    /// Independent user layouts; realizations are spread over them round-robin.
    pub user_drops: usize,

    pub m_uavs: Vec<usize>,
    pub schemes: Vec<SchemeId>,
    /// Positions of the fixed-placement scheme; the first `M` are used.
    pub fixed_uav_xy_m: Vec<[f64; 2]>,
    pub p_t_dbm: Vec<f64>,
    /// UAV budget relative to the BS budget.
    pub p_uav_offset_db: f64,
    pub n_realizations: usize,

    pub inter_uav_interference: bool,
    pub first_hop_mode: FirstHopMode,
    pub objective: ObjectiveKind,
    pub kmeans_max_iters: usize,

    pub pso_particles: usize,
    pub pso_iterations: usize,
    pub pso_gamma1: f64,
    pub pso_gamma2: f64,
    pub pso_gamma3: f64,
    pub pso_velocity_cap_fraction: f64,
    pub pso_batch_realizations: usize,

    pub surface_p_t_dbm: f64,
    pub surface_lattice: usize,

    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Full-size arrays and 2000 realizations.
    Paper,
    /// 16-element arrays, four users, one and two UAVs.
    Desk,
    /// Desk arrays with six users and two or three UAVs.
    DeskFig5,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Preset::Paper),
            "desk" => Ok(Preset::Desk),
            "desk-fig5" => Ok(Preset::DeskFig5),
            other => Err(Error::config("preset", format!("unknown preset `{other}` (expected paper, desk or desk-fig5)"))),
        }
    }
}

impl Preset {
    pub fn config(self) -> ExperimentConfig {
        let paper = ExperimentConfig::paper();
        match self {
            Preset::Paper => paper,
            Preset::Desk => ExperimentConfig {
                bs_antennas_x: 4,
                bs_antennas_y: 4,
                uav_rx_antennas_x: 4,
                uav_rx_antennas_y: 4,
                uav_tx_antennas_x: 4,
                uav_tx_antennas_y: 4,
                n_users: 4,
                m_uavs: vec![1, 2],
                n_realizations: 100,
                user_drops: 4,
                ..paper
            },
            Preset::DeskFig5 => ExperimentConfig {
                n_users: 6,
                m_uavs: vec![2, 3],
                schemes: vec![SchemeId::Joint, SchemeId::JointUavPaOnly, SchemeId::JointNoDirect, SchemeId::FixedEqual],
                ..Preset::Desk.config()
            },
        }
    }
}

impl ExperimentConfig {
    pub fn paper() -> Self {
        ExperimentConfig {
            seed: 42,
            bs_antennas_x: 8,
            bs_antennas_y: 8,
            uav_rx_antennas_x: 8,
            uav_rx_antennas_y: 8,
            uav_tx_antennas_x: 8,
            uav_tx_antennas_y: 8,
            element_spacing_wavelengths: 0.5,
            n_rf_bs: 0,
            n_rf_uav: 0,
            n_clusters: 1,
            n_paths_first_hop: 10,
            n_paths_second_hop: 10,
            path_loss_exponent: 3.6,
            carrier_freq_hz: 28e9,
            bandwidth_hz: 100e6,
            noise_psd_dbm_per_hz: -174.0,
            angle_source: AngleSource::Geometry,
            first_hop_elevation_deg: 60.0,
            first_hop_azimuth_deg: 120.0,
            second_hop_elevation_deg: 30.0,
            second_hop_azimuth_deg: 150.0,
            elevation_spread_deg: 10.0,
            azimuth_spread_deg: 10.0,
            bs_x_m: 0.0,
            bs_y_m: 0.0,
            bs_height_m: 10.0,
            uav_height_m: 20.0,
            x_min_m: 0.0,
            x_max_m: 100.0,
            y_min_m: 0.0,
            y_max_m: 100.0,
            n_users: 12,
            user_distribution: UserDistribution::TwoHotspot,
            hotspot_centers_m: vec![[60.0, 75.0], [90.0, 55.0]],
            hotspot_radius_m: 10.0,
            user_drops: 10,
            m_uavs: vec![1, 2, 3],
            schemes: SchemeId::ALL.to_vec(),
            fixed_uav_xy_m: vec![[50.0, 50.0], [100.0, 50.0], [75.0, 100.0]],
            p_t_dbm: vec![10.0, 20.0, 30.0, 40.0, 50.0],
            p_uav_offset_db: 0.0,
            n_realizations: 2000,
            inter_uav_interference: true,
            first_hop_mode: FirstHopMode::AllStreams,
            objective: ObjectiveKind::TotalRate,
            kmeans_max_iters: 100,
            pso_particles: 20,
            pso_iterations: 50,
            pso_gamma1: 2.0,
            pso_gamma2: 2.0,
            pso_gamma3: 1.1,
            pso_velocity_cap_fraction: 0.2,
            pso_batch_realizations: 4,
            surface_p_t_dbm: 20.0,
            surface_lattice: 11,
            output_dir: PathBuf::from("out"),
        }
    }

    /// Preset values overridden by the keys present in `text`.
    pub fn from_toml_over(preset: &ExperimentConfig, text: &str) -> Result<Self> {
        let overrides: toml::Table = toml::from_str(text).map_err(|e| Error::config("<file>", e.message().to_string()))?;
        let mut table = toml::Table::try_from(preset).map_err(|e| Error::config("<preset>", e.to_string()))?;
        for (key, value) in overrides {
            if !table.contains_key(&key) {
                return Err(Error::config(key, "unknown key"));
            }
            table.insert(key, value);
        }
        let cfg: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config("<file>", e.message().to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Resolve preset, optional file and optional seed override.
    pub fn load(preset: Preset, file: Option<&Path>, seed: Option<u64>) -> Result<Self> {
        let base = preset.config();
        let mut cfg = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::config("--config", format!("{}: {e}", path.display())))?;
                Self::from_toml_over(&base, &text)?
            }
            None => base,
        };
        if let Some(s) = seed {
            cfg.seed = s;
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn check(&self) -> Result<()> {
        let positive_counts = [
            ("bs_antennas_x", self.bs_antennas_x),
            ("bs_antennas_y", self.bs_antennas_y),
            ("uav_rx_antennas_x", self.uav_rx_antennas_x),
            ("uav_rx_antennas_y", self.uav_rx_antennas_y),
            ("uav_tx_antennas_x", self.uav_tx_antennas_x),
            ("uav_tx_antennas_y", self.uav_tx_antennas_y),
            ("n_clusters", self.n_clusters),
            ("n_paths_first_hop", self.n_paths_first_hop),
            ("n_paths_second_hop", self.n_paths_second_hop),
            ("n_users", self.n_users),
            ("user_drops", self.user_drops),
            ("n_realizations", self.n_realizations),
            ("pso_particles", self.pso_particles),
            ("pso_batch_realizations", self.pso_batch_realizations),
            ("surface_lattice", self.surface_lattice),
        ];
        for (key, v) in positive_counts {
            if v == 0 {
                return Err(Error::config(key, "must be at least 1"));
            }
        }
        let positive_reals = [
            ("element_spacing_wavelengths", self.element_spacing_wavelengths),
            ("carrier_freq_hz", self.carrier_freq_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("path_loss_exponent", self.path_loss_exponent),
        ];
        for (key, v) in positive_reals {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, "must be positive and finite"));
            }
        }
        if !(self.x_max_m > self.x_min_m) {
            return Err(Error::config("x_max_m", "must exceed x_min_m"));
        }
        if !(self.y_max_m > self.y_min_m) {
            return Err(Error::config("y_max_m", "must exceed y_min_m"));
        }
        if !(self.bs_height_m >= 0.0) || !(self.uav_height_m >= 0.0) {
            return Err(Error::config("uav_height_m", "heights must be nonnegative"));
        }
        if self.m_uavs.is_empty() {
            return Err(Error::config("m_uavs", "must list at least one UAV count"));
        }
        for &m in &self.m_uavs {
            if m == 0 || self.n_users % m != 0 {
                return Err(Error::config("m_uavs", format!("{m} UAVs cannot split {} users equally", self.n_users)));
            }
            if self.schemes.contains(&SchemeId::FixedEqual) && self.fixed_uav_xy_m.len() < m {
                return Err(Error::config("fixed_uav_xy_m", format!("needs at least {m} positions")));
            }
        }
        if self.schemes.is_empty() {
            return Err(Error::config("schemes", "must list at least one scheme"));
        }
        if self.p_t_dbm.is_empty() || self.p_t_dbm.iter().any(|p| !p.is_finite()) {
            return Err(Error::config("p_t_dbm", "must be a nonempty list of finite values"));
        }
        if self.user_distribution == UserDistribution::TwoHotspot && self.hotspot_centers_m.is_empty() {
            return Err(Error::config("hotspot_centers_m", "needs at least one center"));
        }
        if !(self.hotspot_radius_m >= 0.0) {
            return Err(Error::config("hotspot_radius_m", "must be nonnegative"));
        }
        for (key, s) in [("elevation_spread_deg", self.elevation_spread_deg), ("azimuth_spread_deg", self.azimuth_spread_deg)] {
            if !(s >= 0.0 && s <= 180.0) {
                return Err(Error::config(key, "must lie in [0, 180]"));
            }
        }
        self.swarm(0).validate()?;
        Ok(())
    }

    pub fn arrays(&self) -> Result<ArraySet> {
        let s = self.element_spacing_wavelengths;
        Ok(ArraySet {
            bs: ArrayGeometry::new(self.bs_antennas_x, self.bs_antennas_y, s)?,
            uav_rx: ArrayGeometry::new(self.uav_rx_antennas_x, self.uav_rx_antennas_y, s)?,
            uav_tx: ArrayGeometry::new(self.uav_tx_antennas_x, self.uav_tx_antennas_y, s)?,
        })
    }

    pub fn channel_params(&self) -> ChannelParams {
        let window = |el: f64, az: f64| LinkWindow {
            spread_elevation: self.elevation_spread_deg.to_radians(),
            spread_azimuth: self.azimuth_spread_deg.to_radians(),
            fixed_mean: (el.to_radians(), az.to_radians()),
        };
        ChannelParams {
            n_clusters: self.n_clusters,
            n_paths_first_hop: self.n_paths_first_hop,
            n_paths_second_hop: self.n_paths_second_hop,
            path_loss_exponent: self.path_loss_exponent,
            carrier_freq_hz: self.carrier_freq_hz,
            bandwidth_hz: self.bandwidth_hz,
            noise_psd_dbm_per_hz: self.noise_psd_dbm_per_hz,
            first_hop: window(self.first_hop_elevation_deg, self.first_hop_azimuth_deg),
            second_hop: window(self.second_hop_elevation_deg, self.second_hop_azimuth_deg),
            angle_source: self.angle_source,
            rng_seed: self.channel_seed(),
        }
    }

    /// Seed of every channel draw, derived from the master seed.
    pub fn channel_seed(&self) -> u64 {
        use rand::RngCore;
        crate::channel::keyed_rng(self.seed, &[0x6368]).next_u64()
    }

    pub fn noise(&self) -> NoiseModel {
        let p = self.noise_psd_dbm_per_hz + 10.0 * self.bandwidth_hz.log10();
        NoiseModel::uniform(dbm_to_watts(p))
    }

    pub fn system_model(&self, p_t_dbm: f64) -> Result<SystemModel> {
        Ok(SystemModel {
            channel: self.channel_params(),
            arrays: self.arrays()?,
            noise: self.noise(),
            p_t: dbm_to_watts(p_t_dbm),
            p_uav: dbm_to_watts(p_t_dbm + self.p_uav_offset_db),
            n_rf_bs: (self.n_rf_bs > 0).then_some(self.n_rf_bs),
            n_rf_uav: (self.n_rf_uav > 0).then_some(self.n_rf_uav),
            inter_uav_interference: self.inter_uav_interference,
            first_hop: self.first_hop_mode,
            kmeans_max_iters: self.kmeans_max_iters,
        })
    }

    pub fn swarm(&self, rng_seed: u64) -> SwarmConfig {
        SwarmConfig {
            n_particles: self.pso_particles,
            n_iters: self.pso_iterations,
            gamma1: self.pso_gamma1,
            gamma2: self.pso_gamma2,
            gamma3: self.pso_gamma3,
            velocity_cap: self.pso_velocity_cap_fraction,
            rng_seed,
        }
    }

    pub fn scheme(&self, id: SchemeId, m: usize) -> SchemeConfig {
        SchemeConfig::standard(id, m, self.fixed_uav_xy_m.iter().take(m).copied().collect())
    }

    pub fn bs(&self) -> Position3D {
        Position3D::new(self.bs_x_m, self.bs_y_m, self.bs_height_m)
    }

    pub fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        ([self.x_min_m, self.y_min_m], [self.x_max_m, self.y_max_m])
    }
}
