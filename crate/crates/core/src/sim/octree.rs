//! Adaptive octree over molecule positions, rebuilt every step. Cubes split
//! only where the local population exceeds the leaf capacity, so dense burst
//! clouds near the transmitter get fine cells while the sparse far field
//! stays coarse.

#[derive(Clone, Debug)]
struct Node {
    center: [f64; 3],
    half: f64,
    /// Index of the first of eight children, or `u32::MAX` for a leaf.
    first_child: u32,
    start: u32,
    end: u32,
}

#[derive(Clone, Debug)]
pub struct Octree {
    nodes: Vec<Node>,
    order: Vec<u32>,
}

const LEAF_CAPACITY: usize = 16;
const MAX_DEPTH: u32 = 16;

fn octant(center: &[f64; 3], p: &[f64; 3]) -> usize {
    (p[0] >= center[0]) as usize | ((p[1] >= center[1]) as usize) << 1 | ((p[2] >= center[2]) as usize) << 2
}

impl Octree {
    /// Builds a tree over `points` inside the cube of half side `half`
    /// centred on `center`. Points outside are clamped into the boundary
    /// cells.
    pub fn build(points: &[[f64; 3]], center: [f64; 3], half: f64) -> Octree {
        let mut tree = Octree {
            nodes: vec![Node {
                center,
                half,
                first_child: u32::MAX,
                start: 0,
                end: points.len() as u32,
            }],
            order: (0..points.len() as u32).collect(),
        };
        tree.split(0, points, 0);
        tree
    }

    fn split(&mut self, node: usize, points: &[[f64; 3]], depth: u32) {
        let (start, end) = (self.nodes[node].start as usize, self.nodes[node].end as usize);
        if end - start <= LEAF_CAPACITY || depth >= MAX_DEPTH {
            return;
        }
        let center = self.nodes[node].center;
        let half = self.nodes[node].half * 0.5;
        // Stable bucket sort of the node's slice by octant.
        let slice = &mut self.order[start..end];
        slice.sort_by_key(|&i| octant(&center, &points[i as usize]));
        let mut bounds = [start; 9];
        let mut cursor = start;
        for (oct, bound) in bounds.iter_mut().enumerate().skip(1) {
            while cursor < end && octant(&center, &points[self.order[cursor] as usize]) < oct {
                cursor += 1;
            }
            *bound = cursor;
        }
        bounds[8] = end;
        let first = self.nodes.len() as u32;
        self.nodes[node].first_child = first;
        for oct in 0..8 {
            let offset = |bit: usize| if oct & bit != 0 { half } else { -half };
            self.nodes.push(Node {
                center: [center[0] + offset(1), center[1] + offset(2), center[2] + offset(4)],
                half,
                first_child: u32::MAX,
                start: bounds[oct] as u32,
                end: bounds[oct + 1] as u32,
            });
        }
        for oct in 0..8 {
            self.split(first as usize + oct, points, depth + 1);
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// All index pairs `(i, j)`, `i < j`, closer than `radius`, sorted.
    pub fn pairs_within(&self, points: &[[f64; 3]], radius: f64) -> Vec<(u32, u32)> {
        let r2 = radius * radius;
        let mut pairs = Vec::new();
        let mut stack = Vec::new();
        for (i, p) in points.iter().enumerate() {
            stack.clear();
            stack.push(0usize);
            while let Some(n) = stack.pop() {
                let node = &self.nodes[n];
                if node.start == node.end {
                    continue;
                }
                let reach = node.half + radius;
                if (0..3).any(|k| (p[k] - node.center[k]).abs() > reach) {
                    continue;
                }
                if node.first_child == u32::MAX {
                    for &j in &self.order[node.start as usize..node.end as usize] {
                        if (j as usize) > i {
                            let q = &points[j as usize];
                            let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
                            if d2 < r2 {
                                pairs.push((i as u32, j));
                            }
                        }
                    }
                } else {
                    stack.extend((0..8).map(|c| node.first_child as usize + c));
                }
            }
        }
        pairs.sort_unstable();
        pairs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};

    #[test]
    fn matches_brute_force() {
        let mut rng = rand_pcg::Pcg64Mcg::seed_from_u64(11);
        // clustered plus uniform points
        let mut pts: Vec<[f64; 3]> = (0..1500)
            .map(|_| {
                [
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ]
            })
            .collect();
        pts.extend((0..1500).map(|_| {
            [
                rng.random_range(0.1..0.15),
                rng.random_range(-0.02..0.03),
                rng.random_range(0.5..0.52),
            ]
        }));
        let tree = Octree::build(&pts, [0.0; 3], 1.0);
        assert!(tree.node_count() > 9);
        let radius = 0.01;
        let fast = tree.pairs_within(&pts, radius);
        let mut brute = Vec::new();
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                let d2: f64 = (0..3).map(|k| (pts[i][k] - pts[j][k]).powi(2)).sum();
                if d2 < radius * radius {
                    brute.push((i as u32, j as u32));
                }
            }
        }
        assert!(!brute.is_empty());
        assert_eq!(fast, brute);
    }

    #[test]
    fn empty_and_tiny() {
        assert!(Octree::build(&[], [0.0; 3], 1.0).pairs_within(&[], 0.1).is_empty());
        let pts = [[0.0, 0.0, 0.0], [0.05, 0.0, 0.0]];
        assert_eq!(Octree::build(&pts, [0.0; 3], 1.0).pairs_within(&pts, 0.1), vec![(0, 1)]);
    }
}
