//! Connected-component labeling of binary masks.

use alloc::vec;
use alloc::vec::Vec;

use crate::volume::Mask;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    /// Face neighbours only.
    Six,
    /// Face, edge and corner neighbours.
    TwentySix,
}

/// One connected foreground region; linear voxel indices, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    pub voxels: Vec<usize>,
}

impl Region {
    pub fn size(&self) -> usize {
        self.voxels.len()
    }

    pub fn min_index(&self) -> usize {
        self.voxels[0]
    }
}

/// Label the foreground into disjoint regions.
///
/// Regions are returned in ascending order of their minimum linear voxel
/// index, which makes the labeling deterministic.
pub fn connected_components(m: &Mask, conn: Connectivity) -> Vec<Region> {
    let dims = m.dims();
    let offsets = neighbor_offsets(conn);
    let mut visited = vec![false; m.data().len()];
    let mut regions = Vec::new();
    let mut stack: Vec<usize> = Vec::new();

    for seed in 0..m.data().len() {
        if visited[seed] || !m.get(seed) {
            continue;
        }
        // Scanning in linear order, the seed is the region's minimum index.
        let mut voxels = Vec::new();
        visited[seed] = true;
        stack.push(seed);
        while let Some(cur) = stack.pop() {
            voxels.push(cur);
            let c = m.geom().coords(cur);
            for &(di, dj, dk) in &offsets {
                let ni = c[0] as i64 + di;
                let nj = c[1] as i64 + dj;
                let nk = c[2] as i64 + dk;
                if ni < 0
                    || nj < 0
                    || nk < 0
                    || ni >= dims[0] as i64
                    || nj >= dims[1] as i64
                    || nk >= dims[2] as i64
                {
                    continue;
                }
                let n = m.geom().index(ni as usize, nj as usize, nk as usize);
                if !visited[n] && m.get(n) {
                    visited[n] = true;
                    stack.push(n);
                }
            }
        }
        voxels.sort_unstable();
        regions.push(Region { voxels });
    }
    regions
}

fn neighbor_offsets(conn: Connectivity) -> Vec<(i64, i64, i64)> {
    match conn {
        Connectivity::Six => vec![
            (-1, 0, 0),
            (1, 0, 0),
            (0, -1, 0),
            (0, 1, 0),
            (0, 0, -1),
            (0, 0, 1),
        ],
        Connectivity::TwentySix => {
            let mut v = Vec::with_capacity(26);
            for dk in -1..=1 {
                for dj in -1..=1 {
                    for di in -1..=1 {
                        if di != 0 || dj != 0 || dk != 0 {
                            v.push((di, dj, dk));
                        }
                    }
                }
            }
            v
        }
    }
}
