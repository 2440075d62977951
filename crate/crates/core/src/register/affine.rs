//! Homogeneous 4x4 world-coordinate affine transforms.

use crate::geometry::invert3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine3 {
    m: [[f64; 4]; 4],
}

impl Affine3 {
    pub fn identity() -> Self {
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Self { m }
    }

    pub fn from_matrix(m: [[f64; 4]; 4]) -> Self {
        Self { m }
    }

    pub fn translation(t: [f64; 3]) -> Self {
        let mut a = Self::identity();
        for k in 0..3 {
            a.m[k][3] = t[k];
        }
        a
    }

    /// Build from a 3x3 linear part and a translation.
    pub fn from_linear_translation(l: [[f64; 3]; 3], t: [f64; 3]) -> Self {
        let mut m = [[0.0; 4]; 4];
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] = l[r][c];
            }
            m[r][3] = t[r];
        }
        m[3][3] = 1.0;
        Self { m }
    }

    pub fn matrix(&self) -> &[[f64; 4]; 4] {
        &self.m
    }

    pub fn linear(&self) -> [[f64; 3]; 3] {
        let mut l = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                l[r][c] = self.m[r][c];
            }
        }
        l
    }

    pub fn translation_part(&self) -> [f64; 3] {
        [self.m[0][3], self.m[1][3], self.m[2][3]]
    }

    #[inline]
    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let m = &self.m;
        [
            m[0][0] * p[0] + m[0][1] * p[1] + m[0][2] * p[2] + m[0][3],
            m[1][0] * p[0] + m[1][1] * p[1] + m[1][2] * p[2] + m[1][3],
            m[2][0] * p[0] + m[2][1] * p[1] + m[2][2] * p[2] + m[2][3],
        ]
    }

    /// `self.then(next)` applies `self` first, then `next` (i.e. `next * self`).
    pub fn then(&self, next: &Affine3) -> Affine3 {
        let mut out = [[0.0; 4]; 4];
        for r in 0..4 {
            for c in 0..4 {
                out[r][c] = (0..4).map(|k| next.m[r][k] * self.m[k][c]).sum();
            }
        }
        Affine3 { m: out }
    }

    pub fn inverse(&self) -> Option<Affine3> {
        let linv = invert3(&self.linear())?;
        let t = self.translation_part();
        let mut ti = [0.0; 3];
        for r in 0..3 {
            ti[r] = -(linv[r][0] * t[0] + linv[r][1] * t[1] + linv[r][2] * t[2]);
        }
        Some(Affine3::from_linear_translation(linv, ti))
    }

    /// Largest absolute deviation from the identity matrix.
    pub fn max_deviation_from_identity(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..4 {
            for c in 0..4 {
                let id = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((self.m[r][c] - id).abs());
            }
        }
        worst
    }
}
