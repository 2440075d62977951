//! Independent brute-force oracles for the metric panel. Everything here is
//! computed from first principles (voxel loops, pair enumeration, flood
//! fill) without touching the implementation's formulas.

use std::collections::VecDeque;

use ventriq_core::Mask;

pub struct Counts {
    pub tp: f64,
    pub fp: f64,
    pub fne: f64,
    pub tn: f64,
}

pub fn count(a: &Mask, b: &Mask) -> Counts {
    let (mut tp, mut fp, mut fne, mut tn) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..a.data().len() {
        match (a.get(i), b.get(i)) {
            (true, true) => tp += 1.0,
            (false, true) => fp += 1.0,
            (true, false) => fne += 1.0,
            (false, false) => tn += 1.0,
        }
    }
    Counts { tp, fp, fne, tn }
}

pub fn dice(a: &Mask, b: &Mask) -> f64 {
    let inter = (0..a.data().len()).filter(|&i| a.get(i) && b.get(i)).count() as f64;
    let va = a.volume() as f64;
    let vb = b.volume() as f64;
    if va + vb == 0.0 {
        return 1.0;
    }
    2.0 * inter / (va + vb)
}

pub fn jaccard(a: &Mask, b: &Mask) -> f64 {
    let inter = (0..a.data().len()).filter(|&i| a.get(i) && b.get(i)).count() as f64;
    let union = (0..a.data().len()).filter(|&i| a.get(i) || b.get(i)).count() as f64;
    if union == 0.0 {
        return 1.0;
    }
    inter / union
}

pub fn tpr(a: &Mask, b: &Mask) -> Option<f64> {
    let va = a.volume() as f64;
    if va == 0.0 {
        return None;
    }
    let inter = (0..a.data().len()).filter(|&i| a.get(i) && b.get(i)).count() as f64;
    Some(inter / va)
}

pub fn volumetric_similarity(a: &Mask, b: &Mask) -> f64 {
    let va = a.volume() as f64;
    let vb = b.volume() as f64;
    if va + vb == 0.0 {
        return 1.0;
    }
    1.0 - (va - vb).abs() / (va + vb)
}

fn h(probs: &[f64]) -> f64 {
    probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum()
}

/// Mutual information via H(A) + H(B) - H(A,B), normalized by min entropy.
pub fn normalized_mi(a: &Mask, b: &Mask) -> f64 {
    let c = count(a, b);
    let n = c.tp + c.fp + c.fne + c.tn;
    let pa = (c.tp + c.fne) / n;
    let pb = (c.tp + c.fp) / n;
    let ha = h(&[pa, 1.0 - pa]);
    let hb = h(&[pb, 1.0 - pb]);
    let hab = h(&[c.tp / n, c.fp / n, c.fne / n, c.tn / n]);
    let mi = ha + hb - hab;
    let denom = ha.min(hb);
    if denom <= 0.0 {
        return if c.fp + c.fne == 0.0 { 1.0 } else { 0.0 };
    }
    (mi / denom).clamp(0.0, 1.0)
}

pub fn kappa(a: &Mask, b: &Mask) -> f64 {
    let c = count(a, b);
    let n = c.tp + c.fp + c.fne + c.tn;
    let po = (c.tp + c.tn) / n;
    let pe = ((c.tp + c.fne) / n) * ((c.tp + c.fp) / n)
        + ((c.fp + c.tn) / n) * ((c.fne + c.tn) / n);
    if (1.0 - pe).abs() < 1e-15 {
        return if c.fp + c.fne == 0.0 { 1.0 } else { 0.0 };
    }
    (po - pe) / (1.0 - pe)
}

pub fn icc(a: &Mask, b: &Mask) -> Option<f64> {
    let n = a.data().len() as f64;
    let m = (a.volume() as f64 + b.volume() as f64) / (2.0 * n);
    let mut cross = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for i in 0..a.data().len() {
        let x = a.get(i) as u8 as f64 - m;
        let y = b.get(i) as u8 as f64 - m;
        cross += x * y;
        va += x * x;
        vb += y * y;
    }
    let fg_a = a.volume();
    let fg_b = b.volume();
    let total = a.data().len();
    if (fg_a == 0 && fg_b == 0) || (fg_a == total && fg_b == total) {
        return None;
    }
    Some(2.0 * cross / (va + vb))
}

/// Adjusted Rand index via literal enumeration of all voxel pairs.
pub fn ari_pairs(a: &Mask, b: &Mask) -> f64 {
    let n = a.data().len();
    let (mut n11, mut n10, mut n01, mut n00) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..n {
        for j in (i + 1)..n {
            let same_a = a.get(i) == a.get(j);
            let same_b = b.get(i) == b.get(j);
            match (same_a, same_b) {
                (true, true) => n11 += 1.0,
                (true, false) => n10 += 1.0,
                (false, true) => n01 += 1.0,
                (false, false) => n00 += 1.0,
            }
        }
    }
    let num = 2.0 * (n11 * n00 - n10 * n01);
    let den = (n11 + n10) * (n10 + n00) + (n11 + n01) * (n01 + n00);
    if den == 0.0 {
        let equal = (0..n).all(|i| a.get(i) == b.get(i));
        return if equal { 1.0 } else { 0.0 };
    }
    num / den
}

pub fn pbd_rescaled(a: &Mask, b: &Mask) -> f64 {
    let c = count(a, b);
    if c.tp == 0.0 {
        return if c.fp + c.fne == 0.0 { 1.0 } else { 0.0 };
    }
    let pbd = (c.fp + c.fne) / (2.0 * c.tp);
    1.0 / (1.0 + pbd)
}

/// 26-connected regions by BFS flood fill.
fn regions(m: &Mask) -> Vec<Vec<usize>> {
    let dims = m.dims();
    let mut seen = vec![false; m.data().len()];
    let mut out = Vec::new();
    for s in 0..m.data().len() {
        if seen[s] || !m.get(s) {
            continue;
        }
        let mut q = VecDeque::from([s]);
        seen[s] = true;
        let mut voxels = Vec::new();
        while let Some(cur) = q.pop_front() {
            voxels.push(cur);
            let c = m.geom().coords(cur);
            for dk in -1i64..=1 {
                for dj in -1i64..=1 {
                    for di in -1i64..=1 {
                        if di == 0 && dj == 0 && dk == 0 {
                            continue;
                        }
                        let (x, y, z) = (c[0] as i64 + di, c[1] as i64 + dj, c[2] as i64 + dk);
                        if x < 0 || y < 0 || z < 0
                            || x >= dims[0] as i64 || y >= dims[1] as i64 || z >= dims[2] as i64
                        {
                            continue;
                        }
                        let idx = m.geom().index(x as usize, y as usize, z as usize);
                        if !seen[idx] && m.get(idx) {
                            seen[idx] = true;
                            q.push_back(idx);
                        }
                    }
                }
            }
        }
        out.push(voxels);
    }
    out
}

/// Raw detection/outline error rates by definition: unmatched-region volume
/// and matched-support symmetric difference over the mean total volume.
pub fn der_oer_raw(a: &Mask, b: &Mask) -> (f64, f64) {
    let va = a.volume();
    let vb = b.volume();
    if va + vb == 0 {
        return (0.0, 0.0);
    }
    let mta = (va + vb) as f64 / 2.0;
    let mut unmatched = 0usize;
    let mut in_matched_a = vec![false; a.data().len()];
    let mut in_matched_b = vec![false; b.data().len()];
    for r in regions(a) {
        if r.iter().any(|&v| b.get(v)) {
            for &v in &r {
                in_matched_a[v] = true;
            }
        } else {
            unmatched += r.len();
        }
    }
    for r in regions(b) {
        if r.iter().any(|&v| a.get(v)) {
            for &v in &r {
                in_matched_b[v] = true;
            }
        } else {
            unmatched += r.len();
        }
    }
    let sym_diff = (0..a.data().len())
        .filter(|&i| in_matched_a[i] != in_matched_b[i])
        .count();
    (unmatched as f64 / mta, sym_diff as f64 / mta)
}
