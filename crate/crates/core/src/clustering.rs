//! UAV–user association: K-means over ground positions plus an equal-size repair.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::Position3D;

/// Exclusive user → UAV association.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    owner: Vec<usize>,
    groups: Vec<Vec<usize>>,
}

impl Assignment {
    /// Build from the serving UAV of every user.
    pub fn from_owners(owner: Vec<usize>, n_uavs: usize) -> Result<Self> {
        let mut groups = vec![Vec::new(); n_uavs];
        for (k, &m) in owner.iter().enumerate() {
            if m >= n_uavs {
                return Err(Error::InvalidInput(format!("user {k} assigned to UAV {m} of {n_uavs}")));
            }
            groups[m].push(k);
        }
        Ok(Assignment { owner, groups })
    }

    pub fn n_users(&self) -> usize {
        self.owner.len()
    }

    pub fn n_uavs(&self) -> usize {
        self.groups.len()
    }

    /// Serving UAV of `user`.
    pub fn owner(&self, user: usize) -> usize {
        self.owner[user]
    }

    pub fn owners(&self) -> &[usize] {
        &self.owner
    }

    /// Users of UAV `m` in increasing index order.
    pub fn group(&self, m: usize) -> &[usize] {
        &self.groups[m]
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// `K × M` binary association matrix.
    pub fn z_matrix(&self) -> Vec<Vec<u8>> {
        self.owner
            .iter()
            .map(|&m| (0..self.n_uavs()).map(|j| u8::from(j == m)).collect())
            .collect()
    }

    pub fn is_equal_sized(&self) -> bool {
        let target = self.n_users() / self.n_uavs();
        self.n_users() % self.n_uavs() == 0 && self.groups.iter().all(|g| g.len() == target)
    }
}

fn sq_dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Nearest center per point; ties go to the lowest index.
fn nearest(point: [f64; 2], centers: &[[f64; 2]]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (m, c) in centers.iter().enumerate() {
        let d = sq_dist(point, *c);
        if d < best_d {
            best = m;
            best_d = d;
        }
    }
    best
}

/// `Σ_m Σ_k z_km ‖x_k − c_m‖²`.
pub fn kmeans_objective(users: &[Position3D], assignment: &Assignment, centroids: &[[f64; 2]]) -> f64 {
    users
        .iter()
        .enumerate()
        .map(|(k, u)| sq_dist(u.ground(), centroids[assignment.owner(k)]))
        .sum()
}

/// Associate every user with its nearest center (no size constraint).
pub fn nearest_assignment(users: &[Position3D], centers: &[[f64; 2]]) -> Assignment {
    let owner = users.iter().map(|u| nearest(u.ground(), centers)).collect();
    Assignment::from_owners(owner, centers.len()).expect("owners index centers")
}

#[derive(Debug, Clone)]
pub struct KMeansOutcome {
    pub assignment: Assignment,
    pub centroids: Vec<[f64; 2]>,
    /// Objective after each assignment step.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
}

/// K-means++ seeding followed by Lloyd iterations on ground positions.
pub fn kmeans_associate<R: Rng + ?Sized>(
    users: &[Position3D],
    n_clusters: usize,
    max_iters: usize,
    rng: &mut R,
) -> Result<KMeansOutcome> {
    if n_clusters == 0 {
        return Err(Error::InvalidInput("need at least one cluster".into()));
    }
    if users.len() < n_clusters {
        return Err(Error::MoreClustersThanUsers {
            users: users.len(),
            clusters: n_clusters,
        });
    }
    let seeds = kmeanspp_seeds(users, n_clusters, rng);
    Ok(kmeans_from_seeds(users, &seeds, max_iters))
}

fn kmeanspp_seeds<R: Rng + ?Sized>(users: &[Position3D], n_clusters: usize, rng: &mut R) -> Vec<[f64; 2]> {
    let pts: Vec<[f64; 2]> = users.iter().map(Position3D::ground).collect();
    let mut seeds = vec![pts[rng.random_range(0..pts.len())]];
    while seeds.len() < n_clusters {
        let d2: Vec<f64> = pts
            .iter()
            .map(|p| seeds.iter().map(|s| sq_dist(*p, *s)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = d2.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                if target < *d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            // all points coincide with existing seeds
            rng.random_range(0..pts.len())
        };
        seeds.push(pts[next]);
    }
    seeds
}

/// Lloyd iterations from explicit initial centroids.
pub fn kmeans_from_seeds(users: &[Position3D], seeds: &[[f64; 2]], max_iters: usize) -> KMeansOutcome {
    let mut centroids = seeds.to_vec();
    let mut assignment = nearest_assignment(users, &centroids);
    let mut trace = vec![kmeans_objective(users, &assignment, &centroids)];
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        for (m, c) in centroids.iter_mut().enumerate() {
            let g = assignment.group(m);
            if g.is_empty() {
                continue;
            }
            let n = g.len() as f64;
            *c = [
                g.iter().map(|&k| users[k].x).sum::<f64>() / n,
                g.iter().map(|&k| users[k].y).sum::<f64>() / n,
            ];
        }
        let next = nearest_assignment(users, &centroids);
        trace.push(kmeans_objective(users, &next, &centroids));
        if next == assignment {
            break;
        }
        assignment = next;
    }
    KMeansOutcome {
        assignment,
        centroids,
        objective_trace: trace,
        iterations,
    }
}

/// Force every group to exactly `K/M` users.
///
/// Repeatedly moves the user whose move from an over-full to an under-full
/// group costs the least extra squared distance to the centroids.
pub fn rebalance_equal(assignment: &Assignment, users: &[Position3D], centroids: &[[f64; 2]]) -> Result<Assignment> {
    let k = assignment.n_users();
    let m = assignment.n_uavs();
    if m == 0 || k % m != 0 {
        return Err(Error::IndivisibleUsers { users: k, clusters: m });
    }
    let target = k / m;
    let mut owner = assignment.owners().to_vec();
    let mut sizes = vec![0usize; m];
    for &o in &owner {
        sizes[o] += 1;
    }
    while sizes.iter().any(|&s| s > target) {
        let mut best: Option<(f64, usize, usize)> = None;
        for (user, &from) in owner.iter().enumerate() {
            if sizes[from] <= target {
                continue;
            }
            let p = users[user].ground();
            let here = sq_dist(p, centroids[from]);
            for to in (0..m).filter(|&t| sizes[t] < target) {
                let penalty = sq_dist(p, centroids[to]) - here;
                if best.is_none_or(|(b, _, _)| penalty < b) {
                    best = Some((penalty, user, to));
                }
            }
        }
        let (_, user, to) = best.expect("an over-full group implies an under-full one");
        sizes[owner[user]] -= 1;
        sizes[to] += 1;
        owner[user] = to;
    }
    Assignment::from_owners(owner, m)
}

/// Nearest-UAV association with the equal-size repair.
pub fn associate_equal(users: &[Position3D], centers: &[[f64; 2]]) -> Result<Assignment> {
    rebalance_equal(&nearest_assignment(users, centers), users, centers)
}
