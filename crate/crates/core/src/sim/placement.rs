//! Receptor positions on the receiver sphere and the lookup grid used to
//! find which receptor patch, if any, contains a contact point.

use std::f64::consts::PI;

/// Unit vector in the receiver frame; `+x` points away from the transmitter.
pub type Direction = [f64; 3];

#[inline]
pub(crate) fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Deterministic low-discrepancy (golden-spiral) placement of `count`
/// directions. A single receptor faces the transmitter.
pub fn fibonacci_directions(count: usize) -> Vec<Direction> {
    if count == 1 {
        return vec![[-1.0, 0.0, 0.0]];
    }
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let x = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
            let rho = (1.0 - x * x).max(0.0).sqrt();
            let phi = golden * i as f64;
            [x, rho * phi.cos(), rho * phi.sin()]
        })
        .collect()
}

/// Azimuth θ ∈ (−π, π] and altitude φ ∈ [−π/2, π/2] of a receiver-frame
/// direction, with the transmitter direction at (0, 0).
pub fn map_coordinates(u: &Direction) -> (f64, f64) {
    let theta = u[1].atan2(-u[0]);
    let theta = if theta == -PI { PI } else { theta };
    (theta, u[2].clamp(-1.0, 1.0).asin())
}

/// Smallest angular separation between any two directions, brute force.
pub fn min_separation(dirs: &[Direction]) -> f64 {
    let mut best = -1.0f64;
    for i in 0..dirs.len() {
        for j in (i + 1)..dirs.len() {
            best = best.max(dot(&dirs[i], &dirs[j]));
        }
    }
    best.clamp(-1.0, 1.0).acos()
}

/// Uniform cell grid over the cube `[-1, 1]³` holding receptor directions,
/// so a patch lookup only scans the 27 cells around the query point.
#[derive(Clone, Debug)]
pub struct SphereGrid {
    cells_per_axis: usize,
    cell: f64,
    starts: Vec<u32>,
    members: Vec<u32>,
    directions: Vec<Direction>,
    cos_patch: f64,
}

impl SphereGrid {
    /// `patch_angle` is the angular radius within which a contact belongs
    /// to a receptor.
    pub fn new(directions: Vec<Direction>, patch_angle: f64) -> SphereGrid {
        let spacing = (4.0 * PI / directions.len().max(1) as f64).sqrt();
        let cell = spacing.max(2.0 * patch_angle).max(2.0 / 128.0);
        let cells_per_axis = ((2.0 / cell).ceil() as usize).max(1);
        let ncells = cells_per_axis.pow(3);
        let mut keys: Vec<(usize, u32)> = directions
            .iter()
            .enumerate()
            .map(|(i, u)| (Self::key(u, cell, cells_per_axis), i as u32))
            .collect();
        keys.sort_unstable();
        let mut starts = vec![0u32; ncells + 1];
        for &(k, _) in &keys {
            starts[k + 1] += 1;
        }
        for i in 0..ncells {
            starts[i + 1] += starts[i];
        }
        SphereGrid {
            cells_per_axis,
            cell,
            starts,
            members: keys.into_iter().map(|(_, i)| i).collect(),
            directions,
            cos_patch: patch_angle.min(PI).cos(),
        }
    }

    fn coord(v: f64, cell: f64, n: usize) -> usize {
        (((v + 1.0) / cell).floor().max(0.0) as usize).min(n - 1)
    }

    fn key(u: &Direction, cell: f64, n: usize) -> usize {
        let (i, j, k) = (
            Self::coord(u[0], cell, n),
            Self::coord(u[1], cell, n),
            Self::coord(u[2], cell, n),
        );
        (i * n + j) * n + k
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    /// Receptor whose patch contains direction `u`, preferring the closest
    /// one if patches overlap.
    pub fn locate(&self, u: &Direction) -> Option<u32> {
        let n = self.cells_per_axis;
        let c = [
            Self::coord(u[0], self.cell, n),
            Self::coord(u[1], self.cell, n),
            Self::coord(u[2], self.cell, n),
        ];
        let mut best: Option<(f64, u32)> = None;
        for i in c[0].saturating_sub(1)..=(c[0] + 1).min(n - 1) {
            for j in c[1].saturating_sub(1)..=(c[1] + 1).min(n - 1) {
                for k in c[2].saturating_sub(1)..=(c[2] + 1).min(n - 1) {
                    let key = (i * n + j) * n + k;
                    let range = self.starts[key] as usize..self.starts[key + 1] as usize;
                    for &m in &self.members[range] {
                        let d = dot(u, &self.directions[m as usize]);
                        if d >= self.cos_patch && best.is_none_or(|(bd, bm)| d > bd || (d == bd && m < bm)) {
                            best = Some((d, m));
                        }
                    }
                }
            }
        }
        best.map(|(_, m)| m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};

    fn random_unit(rng: &mut impl rand::Rng) -> Direction {
        loop {
            let v = [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ];
            let n = dot(&v, &v);
            if n > 1e-6 && n <= 1.0 {
                let s = n.sqrt();
                return [v[0] / s, v[1] / s, v[2] / s];
            }
        }
    }

    #[test]
    fn single_receptor_faces_tx() {
        let d = fibonacci_directions(1);
        assert_eq!(d, vec![[-1.0, 0.0, 0.0]]);
        assert_eq!(map_coordinates(&d[0]), (0.0, 0.0));
    }

    #[test]
    fn table_one_spacing() {
        let dirs = fibonacci_directions(10_000);
        let sep = min_separation(&dirs);
        let patch = 4e-9 / 2.5e-6;
        assert!(sep > patch, "min separation {sep}");
        // well above the patch size, same order as the mean spacing 0.035 rad
        assert!(sep > 0.02, "min separation {sep}");
    }

    #[test]
    fn grid_matches_brute_force() {
        let dirs = fibonacci_directions(700);
        let patch = 0.05;
        let grid = SphereGrid::new(dirs.clone(), patch);
        let mut rng = rand_pcg::Pcg64Mcg::seed_from_u64(3);
        let mut hits = 0;
        for _ in 0..20_000 {
            let u = random_unit(&mut rng);
            let brute = dirs
                .iter()
                .enumerate()
                .filter(|(_, d)| dot(&u, d) >= patch.cos())
                .max_by(|a, b| dot(&u, a.1).total_cmp(&dot(&u, b.1)))
                .map(|(i, _)| i as u32);
            assert_eq!(grid.locate(&u), brute);
            hits += brute.is_some() as usize;
        }
        assert!(hits > 0);
        for (i, d) in dirs.iter().enumerate() {
            assert_eq!(grid.locate(d), Some(i as u32));
        }
    }

    #[test]
    fn map_coordinates_ranges() {
        let (t, p) = map_coordinates(&[1.0, 0.0, 0.0]);
        assert_eq!(t, PI);
        assert_eq!(p, 0.0);
        let (_, p) = map_coordinates(&[0.0, 0.0, 1.0]);
        assert!((p - PI / 2.0).abs() < 1e-15);
    }
}
