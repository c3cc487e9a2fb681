//! Linker: groups masked voxels into sources.
//!
//! Two masked voxels belong to the same source when they are within
//! `radius_xy` in both x and y and within `radius_z` in z (a box
//! neighbourhood). Components whose bounding box is too small are dropped.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub radius_xy: usize,
    pub radius_z: usize,
    pub min_size_xy: usize,
    pub min_size_z: usize,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self { radius_xy: 2, radius_z: 2, min_size_xy: 3, min_size_z: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    /// Ascending voxel indices.
    pub voxels: Vec<usize>,
    /// Inclusive `[min, max]` per axis (x, y, z).
    pub bbox: [[usize; 2]; 3],
}

impl Component {
    pub fn extent(&self, axis: usize) -> usize {
        self.bbox[axis][1] - self.bbox[axis][0] + 1
    }
}

struct DisjointSet {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self { parent: (0..n as u32).collect(), size: vec![1; n] }
    }

    fn find(&mut self, mut a: u32) -> u32 {
        let mut root = a;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        while self.parent[a as usize] != root {
            let next = self.parent[a as usize];
            self.parent[a as usize] = root;
            a = next;
        }
        root
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        let (big, small) = if self.size[ra as usize] >= self.size[rb as usize] { (ra, rb) } else { (rb, ra) };
        self.parent[small as usize] = big;
        self.size[big as usize] += self.size[small as usize];
    }
}

/// Link the ascending voxel list `voxels` of a `dims` cube.
///
/// Voxels are z-fastest, so the list decomposes into runs along z within
/// each (x, y) column; linking works on runs rather than single voxels.
pub fn link(voxels: &[usize], dims: (usize, usize, usize), cfg: &LinkConfig) -> Vec<Component> {
    let (nx, ny, nz) = dims;
    if voxels.is_empty() {
        return Vec::new();
    }
    debug_assert!(voxels.windows(2).all(|w| w[0] < w[1]));

    // (column, first z, last z, offset of first voxel in `voxels`).
    // Consecutive channels only join when the spectral radius allows it.
    let coalesce = cfg.radius_z > 0;
    let mut runs: Vec<(usize, usize, usize, usize)> = Vec::new();
    for (i, &v) in voxels.iter().enumerate() {
        let (col, z) = (v / nz, v % nz);
        match runs.last_mut() {
            Some(r) if coalesce && r.0 == col && r.2 + 1 == z => r.2 = z,
            _ => runs.push((col, z, z, i)),
        }
    }
    let ncols = nx * ny;
    let mut col_start = vec![0u32; ncols + 1];
    for r in &runs {
        col_start[r.0 + 1] += 1;
    }
    for c in 0..ncols {
        col_start[c + 1] += col_start[c];
    }

    let (rxy, rz) = (cfg.radius_xy as isize, cfg.radius_z);
    let mut ds = DisjointSet::new(runs.len());
    for (i, &(col, z0, z1, _)) in runs.iter().enumerate() {
        let (x, y) = ((col / ny) as isize, (col % ny) as isize);
        for dx in -rxy..=0 {
            for dy in -rxy..=rxy {
                if dx == 0 && dy > 0 {
                    break;
                }
                let (qx, qy) = (x + dx, y + dy);
                if qx < 0 || qy < 0 || qx >= nx as isize || qy >= ny as isize {
                    continue;
                }
                let qcol = qx as usize * ny + qy as usize;
                let (lo, hi) = (col_start[qcol] as usize, col_start[qcol + 1] as usize);
                // In the same column only earlier runs are examined.
                let hi = if qcol == col { i } else { hi };
                for (j, &(_, w0, w1, _)) in runs.iter().enumerate().take(hi).skip(lo) {
                    if w0 > z1 + rz {
                        break;
                    }
                    if z0 <= w1 + rz {
                        ds.union(i as u32, j as u32);
                    }
                }
            }
        }
    }

    // Group by root, ordered by each component's smallest voxel.
    let mut comp_of_root = vec![u32::MAX; runs.len()];
    let mut comps: Vec<Component> = Vec::new();
    for (i, &(col, z0, z1, off)) in runs.iter().enumerate() {
        let r = ds.find(i as u32) as usize;
        let (x, y) = (col / ny, col % ny);
        if comp_of_root[r] == u32::MAX {
            comp_of_root[r] = comps.len() as u32;
            comps.push(Component { voxels: Vec::new(), bbox: [[x, x], [y, y], [z0, z1]] });
        }
        let c = &mut comps[comp_of_root[r] as usize];
        c.voxels.extend_from_slice(&voxels[off..off + (z1 - z0 + 1)]);
        for (axis, (a, b)) in [(x, x), (y, y), (z0, z1)].into_iter().enumerate() {
            c.bbox[axis][0] = c.bbox[axis][0].min(a);
            c.bbox[axis][1] = c.bbox[axis][1].max(b);
        }
    }
    // Runs of one component may interleave with another's in memory order.
    for c in &mut comps {
        c.voxels.sort_unstable();
    }
    comps
        .into_iter()
        .filter(|c| {
            c.extent(0) >= cfg.min_size_xy && c.extent(1) >= cfg.min_size_xy && c.extent(2) >= cfg.min_size_z
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const DIMS: (usize, usize, usize) = (12, 12, 12);

    fn idx(x: usize, y: usize, z: usize) -> usize {
        (x * DIMS.1 + y) * DIMS.2 + z
    }

    fn no_size_cut() -> LinkConfig {
        LinkConfig { min_size_xy: 1, min_size_z: 1, ..LinkConfig::default() }
    }

    #[test]
    fn radius_defines_adjacency() {
        let mut two = vec![idx(2, 5, 5), idx(4, 5, 5)];
        two.sort();
        assert_eq!(link(&two, DIMS, &no_size_cut()).len(), 1);
        let mut three = vec![idx(2, 5, 5), idx(5, 5, 5)];
        three.sort();
        assert_eq!(link(&three, DIMS, &no_size_cut()).len(), 2);
        // Both fail the default 3-voxel extent cut on their own.
        assert!(link(&three, DIMS, &LinkConfig::default()).is_empty());
    }

    #[test]
    fn size_filter_uses_bounding_box() {
        let block = |sx, sy, sz| {
            let mut v = Vec::new();
            for x in 0..sx {
                for y in 0..sy {
                    for z in 0..sz {
                        v.push(idx(3 + x, 3 + y, 3 + z));
                    }
                }
            }
            v.sort();
            v
        };
        let kept = link(&block(3, 3, 3), DIMS, &LinkConfig::default());
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].voxels.len(), 27);
        assert!(link(&block(2, 2, 5), DIMS, &LinkConfig::default()).is_empty());
    }

    #[test]
    fn chain_links_transitively() {
        let v: Vec<usize> = (0..6).map(|k| idx(2 * k, 0, 0)).collect();
        let comps = link(&v, DIMS, &no_size_cut());
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].bbox[0], [0, 10]);
    }

    /// Pairwise O(n²) flood fill used as an independent reference.
    fn brute_force(voxels: &[usize], cfg: &LinkConfig) -> Vec<Vec<usize>> {
        let pos = |v: usize| ((v / (DIMS.1 * DIMS.2)) as isize, ((v / DIMS.2) % DIMS.1) as isize, (v % DIMS.2) as isize);
        let mut label = vec![usize::MAX; voxels.len()];
        let mut groups = Vec::new();
        for s in 0..voxels.len() {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = groups.len();
            let mut stack = vec![s];
            let mut members = vec![];
            while let Some(a) = stack.pop() {
                members.push(voxels[a]);
                let (ax, ay, az) = pos(voxels[a]);
                for b in 0..voxels.len() {
                    let (bx, by, bz) = pos(voxels[b]);
                    let near = (ax - bx).abs() <= cfg.radius_xy as isize
                        && (ay - by).abs() <= cfg.radius_xy as isize
                        && (az - bz).abs() <= cfg.radius_z as isize;
                    if near && label[b] == usize::MAX {
                        label[b] = label[s];
                        stack.push(b);
                    }
                }
            }
            members.sort();
            groups.push(members);
        }
        groups.sort();
        groups
    }

    #[test]
    fn matches_brute_force_on_random_masks() {
        use rand::Rng;
        let mut rng = crate::seed::rng(11);
        for trial in 0..40 {
            let density = [0.01, 0.05, 0.2][trial % 3];
            let voxels: Vec<usize> = (0..DIMS.0 * DIMS.1 * DIMS.2).filter(|_| rng.random::<f64>() < density).collect();
            let cfg = LinkConfig { radius_xy: 1 + trial % 2, radius_z: 1 + trial % 3, min_size_xy: 1, min_size_z: 1 };
            let mut got: Vec<Vec<usize>> = link(&voxels, DIMS, &cfg).into_iter().map(|c| c.voxels).collect();
            got.sort();
            assert_eq!(got, brute_force(&voxels, &cfg), "trial {trial}");
        }
    }
}
