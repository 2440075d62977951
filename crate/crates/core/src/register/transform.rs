//! Transform chains and pull-back warping.

use alloc::vec::Vec;

use crate::error::Result;
use crate::geometry::Geometry;
use crate::volume::{InterpMode, Mask, Volume};

use super::affine::Affine3;
use super::field::DisplacementField;

#[derive(Debug, Clone, PartialEq)]
pub enum TransformStep {
    Affine(Affine3),
    Displacement(DisplacementField),
}

impl TransformStep {
    #[inline]
    fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        match self {
            TransformStep::Affine(a) => a.apply(p),
            TransformStep::Displacement(u) => {
                let idx = u.mapper().world_to_index(p);
                let d = u.sample_index(idx);
                [p[0] + d[0], p[1] + d[1], p[2] + d[2]]
            }
        }
    }
}

/// World-point map built from affine and displacement steps applied in
/// sequence. Warping a source image onto a target grid uses a chain that
/// maps target-space points into source space.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransformChain {
    steps: Vec<TransformStep>,
}

impl TransformChain {
    pub fn identity() -> Self {
        Self { steps: Vec::new() }
    }

    pub fn from_affine(a: Affine3) -> Self {
        Self { steps: alloc::vec![TransformStep::Affine(a)] }
    }

    pub fn from_field(u: DisplacementField) -> Self {
        Self { steps: alloc::vec![TransformStep::Displacement(u)] }
    }

    pub fn steps(&self) -> &[TransformStep] {
        &self.steps
    }

    /// Append a step applied after the existing ones; adjacent affines are
    /// merged exactly.
    pub fn then(mut self, step: TransformStep) -> Self {
        match (self.steps.last_mut(), step) {
            (Some(TransformStep::Affine(prev)), TransformStep::Affine(next)) => {
                *prev = prev.then(&next);
            }
            (_, step) => self.steps.push(step),
        }
        self
    }

    pub fn then_chain(mut self, other: TransformChain) -> Self {
        for s in other.steps {
            self = self.then(s);
        }
        self
    }

    #[inline]
    pub fn apply(&self, mut p: [f64; 3]) -> [f64; 3] {
        for s in &self.steps {
            p = s.apply(p);
        }
        p
    }

    /// Collapse the chain into a single displacement field on `geom`.
    pub fn bake(&self, geom: &Geometry) -> Result<DisplacementField> {
        let mapper = geom.mapper();
        let mut data = Vec::with_capacity(geom.len());
        for k in 0..geom.dims[2] {
            for j in 0..geom.dims[1] {
                for i in 0..geom.dims[0] {
                    let p = mapper.index_to_world([i as f64, j as f64, k as f64]);
                    let q = self.apply(p);
                    data.push([
                        (q[0] - p[0]) as f32,
                        (q[1] - p[1]) as f32,
                        (q[2] - p[2]) as f32,
                    ]);
                }
            }
        }
        DisplacementField::new(geom.clone(), data)
    }
}

/// `compose(outer, inner)`: the map applying `outer` first, then `inner`.
/// Affine pairs compose exactly; displacement steps stay separate so the
/// final resampling interpolates the data only once.
pub fn compose(outer: &TransformChain, inner: &TransformChain) -> TransformChain {
    outer.clone().then_chain(inner.clone())
}

/// Pull-back warp of `moving` onto `target`: each output voxel samples the
/// moving image at `map(world(x))`.
pub fn warp_with(moving: &Volume, target: &Geometry, map: &TransformChain, mode: InterpMode) -> Volume {
    let tmap = target.mapper();
    let mmap = moving.geom().mapper();
    let mut data = Vec::with_capacity(target.len());
    for k in 0..target.dims[2] {
        for j in 0..target.dims[1] {
            for i in 0..target.dims[0] {
                let p = tmap.index_to_world([i as f64, j as f64, k as f64]);
                let q = map.apply(p);
                data.push(moving.sample_index(mmap.world_to_index(q), mode));
            }
        }
    }
    Volume::new(target.clone(), data).expect("length matches target")
}

/// Pull-back warp of a label mask; always nearest-neighbour.
pub fn warp_mask_with(moving: &Mask, target: &Geometry, map: &TransformChain) -> Mask {
    let tmap = target.mapper();
    let mmap = moving.geom().mapper();
    let mut data = Vec::with_capacity(target.len());
    for k in 0..target.dims[2] {
        for j in 0..target.dims[1] {
            for i in 0..target.dims[0] {
                let p = tmap.index_to_world([i as f64, j as f64, k as f64]);
                let q = map.apply(p);
                data.push(moving.sample_nearest(mmap.world_to_index(q)));
            }
        }
    }
    Mask::new(target.clone(), data).expect("mask values are binary")
}

/// Warp through a single displacement field; the output grid is the field's.
pub fn warp(moving: &Volume, field: &DisplacementField, mode: InterpMode) -> Volume {
    warp_with(moving, field.geom(), &TransformChain::from_field(field.clone()), mode)
}

/// Mask variant of [`warp`]; interpolation is forced to nearest-neighbour.
pub fn warp_mask_field(moving: &Mask, field: &DisplacementField) -> Mask {
    warp_mask_with(moving, field.geom(), &TransformChain::from_field(field.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn zero_field_warp_is_identity() {
        let g = Geometry::axial([6, 5, 4], [1.5, 1.0, 2.0]);
        let n = g.len();
        let v = Volume::new(g.clone(), (0..n).map(|i| (i % 17) as f32).collect()).unwrap();
        let out = warp(&v, &DisplacementField::zero(g), InterpMode::Linear);
        for (a, b) in out.data().iter().zip(v.data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn pull_back_translation_moves_delta_opposite() {
        // u = +2 voxels in x everywhere: output(x) = input(x + u), so a
        // delta at voxel 5 shows up at voxel 3.
        let g = Geometry::axial([9, 3, 3], [1.0; 3]);
        let mut v = Volume::filled(g.clone(), 0.0);
        let at = g.index(5, 1, 1);
        v.data_mut()[at] = 1.0;
        let field =
            DisplacementField::new(g.clone(), vec![[2.0, 0.0, 0.0]; g.len()]).unwrap();
        let out = warp(&v, &field, InterpMode::Linear);
        assert_eq!(out.at(3, 1, 1), 1.0);
        assert_eq!(out.at(5, 1, 1), 0.0);
    }

    #[test]
    fn warped_mask_stays_binary() {
        let g = Geometry::axial([8, 8, 8], [1.0; 3]);
        let mut m = Mask::empty(g.clone());
        for lin in 0..m.data().len() {
            if lin % 3 == 0 {
                m.set(lin, true);
            }
        }
        let field =
            DisplacementField::new(g.clone(), vec![[0.7, -0.3, 0.4]; g.len()]).unwrap();
        let out = warp_mask_field(&m, &field);
        assert!(out.data().iter().all(|&v| v <= 1));
    }

    #[test]
    fn chain_merges_adjacent_affines() {
        let a = Affine3::translation([1.0, 0.0, 0.0]);
        let b = Affine3::translation([0.0, 2.0, 0.0]);
        let chain = TransformChain::identity()
            .then(TransformStep::Affine(a))
            .then(TransformStep::Affine(b));
        assert_eq!(chain.steps().len(), 1);
        assert_eq!(chain.apply([0.0; 3]), [1.0, 2.0, 0.0]);
    }

    #[test]
    fn bake_reproduces_chain() {
        let g = Geometry::axial([5, 5, 5], [2.0; 3]);
        let chain = TransformChain::from_affine(Affine3::translation([3.0, -1.0, 0.5]));
        let baked = chain.bake(&g).unwrap();
        for d in baked.data() {
            assert!((d[0] - 3.0).abs() < 1e-5);
            assert!((d[1] + 1.0).abs() < 1e-5);
            assert!((d[2] - 0.5).abs() < 1e-5);
        }
    }

    #[test]
    fn warp_linear_stays_in_input_range() {
        let g = Geometry::axial([7, 7, 7], [1.0; 3]);
        let n = g.len();
        let v = Volume::new(g.clone(), (0..n).map(|i| ((i * 31) % 11) as f32).collect()).unwrap();
        let field = DisplacementField::new(
            g.clone(),
            (0..n).map(|i| [((i % 5) as f32 - 2.0) * 0.4, 0.3, -0.6]).collect(),
        )
        .unwrap();
        let out = warp(&v, &field, InterpMode::Linear);
        let (lo, hi) = v.min_max();
        for &x in out.data() {
            assert!(x >= lo && x <= hi);
        }
    }
}
