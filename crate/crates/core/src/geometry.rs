//! Network geometry, link angles and uniform rectangular array responses.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3D {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Position3D { x, y, z }
    }

    pub fn ground(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

/// Euclidean distance in meters.
pub fn distance_3d(a: &Position3D, b: &Position3D) -> f64 {
    ((a.x - b.x).powi(2) + (a.y - b.y).powi(2) + (a.z - b.z).powi(2)).sqrt()
}

/// Mean elevation/azimuth of the line of sight from `from` toward `to`.
///
/// Azimuth is `atan2(Δy, Δx)`; elevation is measured from the horizontal
/// plane, positive when `to` is above `from`.
pub fn angles_between(from: &Position3D, to: &Position3D) -> Result<(f64, f64)> {
    let dx = to.x - from.x;
    let dy = to.y - from.y;
    let dz = to.z - from.z;
    let horizontal = dx.hypot(dy);
    if horizontal == 0.0 && dz == 0.0 {
        return Err(Error::DegenerateGeometry);
    }
    Ok((dz.atan2(horizontal), dy.atan2(dx)))
}

/// Positions of the BS, every UAV and every user, plus the UAV flying span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkLayout {
    pub bs: Position3D,
    pub uavs: Vec<Position3D>,
    pub users: Vec<Position3D>,
    pub bounds_min: [f64; 2],
    pub bounds_max: [f64; 2],
}

impl NetworkLayout {
    pub fn new(
        bs: Position3D,
        uavs: Vec<Position3D>,
        users: Vec<Position3D>,
        bounds_min: [f64; 2],
        bounds_max: [f64; 2],
    ) -> Result<Self> {
        let layout = NetworkLayout {
            bs,
            uavs,
            users,
            bounds_min,
            bounds_max,
        };
        layout.check()?;
        Ok(layout)
    }

    pub fn n_uavs(&self) -> usize {
        self.uavs.len()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    /// Users per UAV under equal clustering.
    pub fn users_per_uav(&self) -> usize {
        self.users.len() / self.uavs.len().max(1)
    }

    pub fn check(&self) -> Result<()> {
        let m = self.uavs.len();
        let k = self.users.len();
        if m == 0 || k == 0 {
            return Err(Error::InvalidInput(format!(
                "layout needs at least one UAV and one user (got M={m}, K={k})"
            )));
        }
        if k % m != 0 {
            return Err(Error::IndivisibleUsers { users: k, clusters: m });
        }
        for i in 0..2 {
            if self.bounds_min[i] > self.bounds_max[i] {
                return Err(Error::InvalidInput("bounds_min exceeds bounds_max".into()));
            }
        }
        for (i, u) in self.uavs.iter().enumerate() {
            if !self.in_bounds(u.x, u.y) {
                return Err(Error::InvalidInput(format!(
                    "UAV {i} at ({}, {}) outside flying span",
                    u.x, u.y
                )));
            }
        }
        let all = std::iter::once(&self.bs).chain(&self.uavs).chain(&self.users);
        if all.clone().any(|p| p.z < 0.0) {
            return Err(Error::InvalidInput("negative height".into()));
        }
        if all.clone().any(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite())) {
            return Err(Error::InvalidInput("non-finite coordinate".into()));
        }
        Ok(())
    }

    pub fn in_bounds(&self, x: f64, y: f64) -> bool {
        x >= self.bounds_min[0]
            && x <= self.bounds_max[0]
            && y >= self.bounds_min[1]
            && y <= self.bounds_max[1]
    }

    /// Copy of this layout with UAVs moved to the given ground positions (heights kept).
    pub fn with_uav_ground(&self, ground: &[[f64; 2]]) -> NetworkLayout {
        let mut out = self.clone();
        for (uav, g) in out.uavs.iter_mut().zip(ground) {
            uav.x = g[0];
            uav.y = g[1];
        }
        out
    }
}

/// Uniform rectangular array of `n_x × n_y` elements spaced `spacing` wavelengths apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub n_x: usize,
    pub n_y: usize,
    pub spacing: f64,
}

impl ArrayGeometry {
    pub fn new(n_x: usize, n_y: usize, spacing: f64) -> Result<Self> {
        if n_x == 0 || n_y == 0 {
            return Err(Error::InvalidInput("array dimensions must be positive".into()));
        }
        if !(spacing > 0.0) {
            return Err(Error::InvalidInput("element spacing must be positive".into()));
        }
        Ok(ArrayGeometry { n_x, n_y, spacing })
    }

    pub fn n_elements(&self) -> usize {
        self.n_x * self.n_y
    }

    /// Array response for direction cosines `(u, v)` with phase sign `sign`.
    ///
    /// Element `(ix, iy)` sits at index `ix * n_y + iy` (x-progression ⊗ y-progression).
    pub fn response(&self, u: f64, v: f64, sign: f64) -> CVector {
        let kx = sign * 2.0 * PI * self.spacing * u;
        let ky = sign * 2.0 * PI * self.spacing * v;
        let (step_x, step_y) = (Complex64::from_polar(1.0, kx), Complex64::from_polar(1.0, ky));
        let mut out = CVector::zeros(self.n_elements());
        let mut ex = Complex64::new(1.0, 0.0);
        for ix in 0..self.n_x {
            let mut e = ex;
            for iy in 0..self.n_y {
                out[ix * self.n_y + iy] = e;
                e *= step_y;
            }
            ex *= step_x;
        }
        out
    }
}

/// Direction cosines `sinθ·(cosφ, sinφ)` seen by the array.
pub fn direction_cosines(elevation: f64, azimuth: f64) -> (f64, f64) {
    let s = elevation.sin();
    (s * azimuth.cos(), s * azimuth.sin())
}

/// URA steering vector with phase `−2πd·n·sinθ·cosφ` along x and
/// `−2πd·n·sinθ·sinφ` along y. Entries have unit modulus.
pub fn steering_vector(geom: &ArrayGeometry, elevation: f64, azimuth: f64) -> CVector {
    let (u, v) = direction_cosines(elevation, azimuth);
    geom.response(u, v, -1.0)
}

/// Mean angles and half-widths of one link's angular window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleSupport {
    pub mean_elevation: f64,
    pub mean_azimuth: f64,
    pub spread_elevation: f64,
    pub spread_azimuth: f64,
}

impl AngleSupport {
    pub fn new(mean_elevation: f64, mean_azimuth: f64, spread_elevation: f64, spread_azimuth: f64) -> Self {
        AngleSupport {
            mean_elevation,
            mean_azimuth,
            spread_elevation: spread_elevation.abs(),
            spread_azimuth: spread_azimuth.abs(),
        }
    }

    /// Whether `(elevation, azimuth)` lies inside the window (azimuth compared modulo 2π).
    pub fn contains(&self, elevation: f64, azimuth: f64) -> bool {
        const EPS: f64 = 1e-12;
        (elevation - self.mean_elevation).abs() <= self.spread_elevation + EPS
            && wrap_angle(azimuth - self.mean_azimuth).abs() <= self.spread_azimuth + EPS
    }

    /// Sample a direction in the window from two uniform `[-1, 1]` offsets.
    pub fn at_offsets(&self, el_offset: f64, az_offset: f64) -> (f64, f64) {
        (
            self.mean_elevation + el_offset * self.spread_elevation,
            self.mean_azimuth + az_offset * self.spread_azimuth,
        )
    }

    pub fn center_cosines(&self) -> (f64, f64) {
        direction_cosines(self.mean_elevation, self.mean_azimuth)
    }
}

/// Wrap an angle to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}
