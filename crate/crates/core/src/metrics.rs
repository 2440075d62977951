//! Segmentation-comparison metrics computed from a voxelwise confusion
//! matrix plus region-correspondence analysis.
//!
//! All panel values are reported as similarities in [0, 1] where 1 means
//! perfect agreement: detection and outline error rates are divided by 2 and
//! flipped (`1 - x/2`), the probabilistic distance is reported as
//! `1/(1+PBD)`, and mutual information is normalized by the smaller marginal
//! entropy so identical masks score 1. Empty-vs-empty pairs score 1 for
//! every metric.

use alloc::vec;

use crate::components::{connected_components, Connectivity};
use crate::error::{Error, Result};
use crate::volume::Mask;

/// Voxel counts comparing a reference mask `a` with a prediction `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
    pub true_neg: u64,
}

impl ConfusionCounts {
    pub fn new(true_pos: u64, false_pos: u64, false_neg: u64, true_neg: u64) -> Self {
        Self { true_pos, false_pos, false_neg, true_neg }
    }

    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.false_neg + self.true_neg
    }

    /// Foreground volume of the reference mask.
    pub fn ref_volume(&self) -> u64 {
        self.true_pos + self.false_neg
    }

    /// Foreground volume of the prediction mask.
    pub fn pred_volume(&self) -> u64 {
        self.true_pos + self.false_pos
    }
}

/// Count agreement voxelwise; `a` is the reference, `b` the prediction.
pub fn confusion(a: &Mask, b: &Mask) -> Result<ConfusionCounts> {
    if a.dims() != b.dims() {
        return Err(Error::DimMismatch);
    }
    let mut c = ConfusionCounts::new(0, 0, 0, 0);
    for (&x, &y) in a.data().iter().zip(b.data()) {
        match (x != 0, y != 0) {
            (true, true) => c.true_pos += 1,
            (false, true) => c.false_pos += 1,
            (true, false) => c.false_neg += 1,
            (false, false) => c.true_neg += 1,
        }
    }
    Ok(c)
}

/// Dice similarity coefficient; empty vs empty is 1 by convention.
pub fn dice(c: &ConfusionCounts) -> f64 {
    let denom = 2 * c.true_pos + c.false_pos + c.false_neg;
    if denom == 0 {
        return 1.0;
    }
    2.0 * c.true_pos as f64 / denom as f64
}

/// Jaccard index; empty vs empty is 1 by convention.
pub fn jaccard(c: &ConfusionCounts) -> f64 {
    let denom = c.true_pos + c.false_pos + c.false_neg;
    if denom == 0 {
        return 1.0;
    }
    c.true_pos as f64 / denom as f64
}

/// True positive rate (sensitivity).
pub fn tpr(c: &ConfusionCounts) -> Result<f64> {
    let denom = c.ref_volume();
    if denom == 0 {
        return Err(Error::EmptyReference);
    }
    Ok(c.true_pos as f64 / denom as f64)
}

/// Volumetric similarity: one minus the absolute volume difference divided
/// by the sum of both volumes.
pub fn volumetric_similarity(c: &ConfusionCounts) -> f64 {
    let va = c.ref_volume();
    let vb = c.pred_volume();
    if va + vb == 0 {
        return 1.0;
    }
    1.0 - va.abs_diff(vb) as f64 / (va + vb) as f64
}

fn xlog2x_ratio(p: f64, q: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        p * libm::log2(p / q)
    }
}

/// Mutual information in bits between the two binary label variables.
pub fn mutual_information(c: &ConfusionCounts) -> f64 {
    let n = c.total() as f64;
    debug_assert!(n > 0.0);
    let p11 = c.true_pos as f64 / n;
    let p01 = c.false_pos as f64 / n;
    let p10 = c.false_neg as f64 / n;
    let p00 = c.true_neg as f64 / n;
    let pa1 = p11 + p10;
    let pa0 = p01 + p00;
    let pb1 = p11 + p01;
    let pb0 = p10 + p00;
    xlog2x_ratio(p11, pa1 * pb1)
        + xlog2x_ratio(p01, pa0 * pb1)
        + xlog2x_ratio(p10, pa1 * pb0)
        + xlog2x_ratio(p00, pa0 * pb0)
}

fn binary_entropy(p: f64) -> f64 {
    let q = 1.0 - p;
    let mut h = 0.0;
    if p > 0.0 {
        h -= p * libm::log2(p);
    }
    if q > 0.0 {
        h -= q * libm::log2(q);
    }
    h
}

/// Mutual information divided by the smaller marginal entropy, so identical
/// masks score 1. With a constant mask the quotient degenerates: equal masks
/// score 1, anything else 0.
pub fn normalized_mutual_information(c: &ConfusionCounts) -> f64 {
    let n = c.total() as f64;
    let ha = binary_entropy(c.ref_volume() as f64 / n);
    let hb = binary_entropy(c.pred_volume() as f64 / n);
    let denom = ha.min(hb);
    if denom <= 0.0 {
        return if c.false_pos + c.false_neg == 0 { 1.0 } else { 0.0 };
    }
    (mutual_information(c) / denom).clamp(0.0, 1.0)
}

/// Cohen's kappa. When chance agreement is 1 (both masks constant) the
/// quotient degenerates: equal masks score 1, anything else 0.
pub fn cohen_kappa(c: &ConfusionCounts) -> f64 {
    let n = c.total() as f64;
    let po = (c.true_pos + c.true_neg) as f64 / n;
    let pe = (c.ref_volume() as f64 * c.pred_volume() as f64
        + (c.total() - c.ref_volume()) as f64 * (c.total() - c.pred_volume()) as f64)
        / (n * n);
    if 1.0 - pe < 1e-15 {
        return if c.false_pos + c.false_neg == 0 { 1.0 } else { 0.0 };
    }
    (po - pe) / (1.0 - pe)
}

/// Two-rater intraclass correlation over voxels:
/// `2*sum((a-m)(b-m)) / (sum((a-m)^2) + sum((b-m)^2))` with `m` the grand
/// mean of both masks.
pub fn icc(a: &Mask, b: &Mask) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::DimMismatch);
    }
    let n = a.data().len() as f64;
    let va = a.volume() as f64;
    let vb = b.volume() as f64;
    let m = (va + vb) / (2.0 * n);
    let mut cross = 0.0f64;
    let mut var_a = 0.0f64;
    let mut var_b = 0.0f64;
    for (&x, &y) in a.data().iter().zip(b.data()) {
        let da = x as f64 - m;
        let db = y as f64 - m;
        cross += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    // Both masks constant: no voxelwise variance to correlate.
    if va == 0.0 && vb == 0.0 || va == n && vb == n {
        return Err(Error::DegenerateMarginals);
    }
    Ok(2.0 * cross / (var_a + var_b))
}

fn choose2(n: u64) -> i128 {
    let n = n as i128;
    n * (n - 1) / 2
}

/// Adjusted Rand index of the two binary partitions. A zero adjustment
/// denominator (both partitions trivial) scores 1 for equal masks, else 0.
pub fn adjusted_rand(c: &ConfusionCounts) -> f64 {
    let s = choose2(c.true_pos) + choose2(c.false_pos) + choose2(c.false_neg) + choose2(c.true_neg);
    let row = choose2(c.ref_volume()) + choose2(c.total() - c.ref_volume());
    let col = choose2(c.pred_volume()) + choose2(c.total() - c.pred_volume());
    let all = choose2(c.total());
    let num = 2 * (s * all - row * col);
    let den = (row + col) * all - 2 * row * col;
    if den == 0 {
        return if c.false_pos + c.false_neg == 0 { 1.0 } else { 0.0 };
    }
    num as f64 / den as f64
}

/// Probabilistic distance reported as the similarity `1/(1+PBD)` with
/// `PBD = (fp+fn)/(2*tp)` for binary masks. No overlap at all scores 0;
/// empty vs empty scores 1.
pub fn pbd_rescaled(c: &ConfusionCounts) -> f64 {
    let disagree = c.false_pos + c.false_neg;
    if c.true_pos == 0 {
        return if disagree == 0 { 1.0 } else { 0.0 };
    }
    // 1/(1 + (fp+fn)/(2 tp)) collapses to 2tp/(2tp+fp+fn).
    2.0 * c.true_pos as f64 / (2 * c.true_pos + disagree) as f64
}

/// Raw detection and outline error rates, normalized by the mean total
/// volume `(|a|+|b|)/2`; both lie in [0, 2].
///
/// A region is "detected in both" iff it overlaps at least one voxel of the
/// other mask. DER sums the volumes of regions detected in only one mask;
/// OER is `|union - intersection|` restricted to the matched-region support.
pub fn der_oer(a: &Mask, b: &Mask, conn: Connectivity) -> Result<(f64, f64)> {
    if a.dims() != b.dims() {
        return Err(Error::DimMismatch);
    }
    let va = a.volume();
    let vb = b.volume();
    if va + vb == 0 {
        return Ok((0.0, 0.0));
    }
    let mta = (va + vb) as f64 / 2.0;

    let mut matched_a = vec![false; a.data().len()];
    let mut matched_b = vec![false; b.data().len()];
    let mut unmatched = 0u64;
    for region in connected_components(a, conn) {
        if region.voxels.iter().any(|&v| b.get(v)) {
            for &v in &region.voxels {
                matched_a[v] = true;
            }
        } else {
            unmatched += region.size() as u64;
        }
    }
    for region in connected_components(b, conn) {
        if region.voxels.iter().any(|&v| a.get(v)) {
            for &v in &region.voxels {
                matched_b[v] = true;
            }
        } else {
            unmatched += region.size() as u64;
        }
    }

    let mut outline = 0u64;
    for i in 0..matched_a.len() {
        if matched_a[i] != matched_b[i] {
            outline += 1;
        }
    }
    Ok((unmatched as f64 / mta, outline as f64 / mta))
}

/// The full panel of similarity metrics; entries whose computation is
/// undefined for the pair (e.g. TPR with an empty reference) are `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricPanel {
    pub dice: Option<f64>,
    pub jaccard: Option<f64>,
    pub tpr: Option<f64>,
    pub vs: Option<f64>,
    pub mi: Option<f64>,
    pub ari: Option<f64>,
    pub icc: Option<f64>,
    pub pbd: Option<f64>,
    pub kap: Option<f64>,
    pub der: Option<f64>,
    pub oer: Option<f64>,
}

impl MetricPanel {
    pub const NAMES: [&'static str; 11] = [
        "dice", "jaccard", "tpr", "vs", "mi", "ari", "icc", "pbd", "kap", "der", "oer",
    ];

    pub fn values(&self) -> [Option<f64>; 11] {
        [
            self.dice, self.jaccard, self.tpr, self.vs, self.mi, self.ari, self.icc, self.pbd,
            self.kap, self.der, self.oer,
        ]
    }

    fn all(v: f64) -> Self {
        Self {
            dice: Some(v),
            jaccard: Some(v),
            tpr: Some(v),
            vs: Some(v),
            mi: Some(v),
            ari: Some(v),
            icc: Some(v),
            pbd: Some(v),
            kap: Some(v),
            der: Some(v),
            oer: Some(v),
        }
    }
}

/// Assemble all eleven similarity values for a mask pair. Region matching
/// for DER/OER uses 26-connectivity.
pub fn metric_panel(a: &Mask, b: &Mask) -> Result<MetricPanel> {
    let c = confusion(a, b)?;
    if c.ref_volume() + c.pred_volume() == 0 {
        return Ok(MetricPanel::all(1.0));
    }
    let (der_raw, oer_raw) = der_oer(a, b, Connectivity::TwentySix)?;
    Ok(MetricPanel {
        dice: Some(dice(&c)),
        jaccard: Some(jaccard(&c)),
        tpr: tpr(&c).ok(),
        vs: Some(volumetric_similarity(&c)),
        mi: Some(normalized_mutual_information(&c)),
        ari: Some(adjusted_rand(&c)),
        icc: icc(a, b).ok(),
        pbd: Some(pbd_rescaled(&c)),
        kap: Some(cohen_kappa(&c)),
        der: Some(1.0 - der_raw / 2.0),
        oer: Some(1.0 - oer_raw / 2.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Geometry;
    use approx::assert_abs_diff_eq;

    fn mask_from_bits(dims: [usize; 3], bits: &[u8]) -> Mask {
        Mask::new(Geometry::axial(dims, [1.0; 3]), bits.to_vec()).unwrap()
    }

    #[test]
    fn confusion_enumeration_case() {
        // 2x2x1 grid, a = {v0, v1}, b = {v1, v2}.
        let a = mask_from_bits([2, 2, 1], &[1, 1, 0, 0]);
        let b = mask_from_bits([2, 2, 1], &[0, 1, 1, 0]);
        let c = confusion(&a, &b).unwrap();
        assert_eq!(c, ConfusionCounts::new(1, 1, 1, 1));
    }

    #[test]
    fn confusion_identity_and_disjoint() {
        let a = mask_from_bits([2, 2, 1], &[1, 1, 1, 0]);
        let c = confusion(&a, &a).unwrap();
        assert_eq!((c.true_pos, c.false_pos, c.false_neg), (3, 0, 0));
        let b = mask_from_bits([2, 2, 1], &[0, 0, 0, 1]);
        assert_eq!(confusion(&a, &b).unwrap().true_pos, 0);
    }

    #[test]
    fn dims_must_match() {
        let a = mask_from_bits([2, 1, 1], &[1, 0]);
        let b = mask_from_bits([1, 2, 1], &[1, 0]);
        assert_eq!(confusion(&a, &b), Err(Error::DimMismatch));
    }

    #[test]
    fn dice_jaccard_tpr_basics() {
        let c = ConfusionCounts::new(1, 1, 1, 1);
        assert_abs_diff_eq!(dice(&c), 0.5);
        assert_abs_diff_eq!(jaccard(&c), 1.0 / 3.0);
        assert_abs_diff_eq!(tpr(&c).unwrap(), 0.5);
        let empty = ConfusionCounts::new(0, 0, 0, 8);
        assert_eq!(dice(&empty), 1.0);
        assert_eq!(jaccard(&empty), 1.0);
        assert_eq!(tpr(&empty), Err(Error::EmptyReference));
    }

    #[test]
    fn volumetric_similarity_cases() {
        // |a| = 3, |b| = 1, tp = 1 -> 1 - 2/4.
        let c = ConfusionCounts::new(1, 0, 2, 5);
        assert_abs_diff_eq!(volumetric_similarity(&c), 0.5);
        // Equal volumes, partial overlap.
        let c = ConfusionCounts::new(2, 3, 3, 10);
        assert_abs_diff_eq!(volumetric_similarity(&c), 1.0);
    }

    #[test]
    fn mutual_information_identity_quarter() {
        // a == b, foreground fraction 0.25 -> MI = H(0.25).
        let c = ConfusionCounts::new(16, 0, 0, 48);
        assert_abs_diff_eq!(mutual_information(&c), 0.811278, epsilon = 1e-5);
        assert_abs_diff_eq!(normalized_mutual_information(&c), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn mutual_information_independent_is_zero() {
        let c = ConfusionCounts::new(1, 1, 1, 1);
        assert_abs_diff_eq!(mutual_information(&c), 0.0, epsilon = 1e-12);
        // Product joint with unequal marginals.
        let c = ConfusionCounts::new(6, 2, 18, 6);
        let n = 32.0;
        let pa = 24.0 / n;
        let pb = 8.0 / n;
        assert!((c.true_pos as f64 / n - pa * pb).abs() < 1e-12);
        assert_abs_diff_eq!(mutual_information(&c), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn kappa_cases() {
        assert_abs_diff_eq!(cohen_kappa(&ConfusionCounts::new(1, 1, 1, 1)), 0.0);
        assert_abs_diff_eq!(cohen_kappa(&ConfusionCounts::new(5, 0, 0, 11)), 1.0);
        // Both all-foreground: degenerate but equal.
        assert_eq!(cohen_kappa(&ConfusionCounts::new(8, 0, 0, 0)), 1.0);
    }

    #[test]
    fn icc_identity_and_complement() {
        let a = mask_from_bits([4, 1, 1], &[1, 1, 0, 0]);
        assert_abs_diff_eq!(icc(&a, &a).unwrap(), 1.0);
        let b = mask_from_bits([4, 1, 1], &[0, 0, 1, 1]);
        // Direct-sum oracle for the complement of a balanced mask: m = 0.5,
        // cross = -sum((a-m)^2) so the quotient is exactly -1.
        assert_abs_diff_eq!(icc(&a, &b).unwrap(), -1.0);
        let z = mask_from_bits([4, 1, 1], &[0, 0, 0, 0]);
        assert_eq!(icc(&z, &z), Err(Error::DegenerateMarginals));
    }

    #[test]
    fn adjusted_rand_small_case_matches_pair_enumeration() {
        // 3x3x1 case checked against an all-pairs oracle.
        let a = mask_from_bits([3, 3, 1], &[1, 1, 0, 0, 1, 0, 0, 0, 0]);
        let b = mask_from_bits([3, 3, 1], &[1, 1, 1, 0, 0, 0, 0, 0, 0]);
        let c = confusion(&a, &b).unwrap();

        // Oracle: enumerate all voxel pairs and classify agreement.
        let (mut both_same, mut a_same_b_diff, mut a_diff_b_same, mut both_diff) =
            (0i128, 0i128, 0i128, 0i128);
        let n = a.data().len();
        for i in 0..n {
            for j in (i + 1)..n {
                let sa = a.get(i) == a.get(j);
                let sb = b.get(i) == b.get(j);
                match (sa, sb) {
                    (true, true) => both_same += 1,
                    (true, false) => a_same_b_diff += 1,
                    (false, true) => a_diff_b_same += 1,
                    (false, false) => both_diff += 1,
                }
            }
        }
        let num = 2 * (both_same * both_diff - a_same_b_diff * a_diff_b_same);
        let den = (both_same + a_same_b_diff) * (a_same_b_diff + both_diff)
            + (both_same + a_diff_b_same) * (a_diff_b_same + both_diff);
        let expect = num as f64 / den as f64;
        assert_eq!(adjusted_rand(&c), expect);
    }

    #[test]
    fn adjusted_rand_identity() {
        let c = ConfusionCounts::new(10, 0, 0, 54);
        assert_abs_diff_eq!(adjusted_rand(&c), 1.0);
    }

    #[test]
    fn pbd_cases() {
        assert_eq!(pbd_rescaled(&ConfusionCounts::new(4, 0, 0, 4)), 1.0);
        assert_abs_diff_eq!(pbd_rescaled(&ConfusionCounts::new(1, 1, 1, 1)), 0.5);
        assert_eq!(pbd_rescaled(&ConfusionCounts::new(0, 3, 2, 1)), 0.0);
        assert_eq!(pbd_rescaled(&ConfusionCounts::new(0, 0, 0, 6)), 1.0);
    }

    #[test]
    fn der_oer_hand_enumerated_case() {
        // 6x1x1 grid, a = {0,1} u {4}, b = {0,1,2}: MTA = 3,
        // unmatched {4} -> der = 1/3; matched support union {0,1,2} minus
        // intersection {0,1} -> oer = 1/3.
        let a = mask_from_bits([6, 1, 1], &[1, 1, 0, 0, 1, 0]);
        let b = mask_from_bits([6, 1, 1], &[1, 1, 1, 0, 0, 0]);
        let (der_raw, oer_raw) = der_oer(&a, &b, Connectivity::TwentySix).unwrap();
        assert_abs_diff_eq!(der_raw, 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(oer_raw, 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn der_oer_identity_and_disjoint() {
        let a = mask_from_bits([4, 1, 1], &[1, 1, 0, 0]);
        assert_eq!(der_oer(&a, &a, Connectivity::Six).unwrap(), (0.0, 0.0));
        let b = mask_from_bits([4, 1, 1], &[0, 0, 1, 1]);
        let (der_raw, oer_raw) = der_oer(&a, &b, Connectivity::Six).unwrap();
        assert_abs_diff_eq!(der_raw, 2.0);
        assert_abs_diff_eq!(oer_raw, 0.0);
    }

    #[test]
    fn panel_identity_is_all_ones() {
        let a = mask_from_bits([3, 3, 1], &[1, 0, 0, 1, 1, 0, 0, 0, 1]);
        let p = metric_panel(&a, &a).unwrap();
        for v in p.values() {
            assert_abs_diff_eq!(v.unwrap(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn panel_disjoint_pairs() {
        let a = mask_from_bits([4, 1, 1], &[1, 1, 0, 0]);
        let b = mask_from_bits([4, 1, 1], &[0, 0, 1, 1]);
        let p = metric_panel(&a, &b).unwrap();
        assert_eq!(p.dice, Some(0.0));
        assert_eq!(p.jaccard, Some(0.0));
        assert_eq!(p.tpr, Some(0.0));
    }

    #[test]
    fn panel_empty_vs_empty_is_all_ones() {
        let z = mask_from_bits([2, 2, 1], &[0, 0, 0, 0]);
        let p = metric_panel(&z, &z).unwrap();
        assert_eq!(p.values(), [Some(1.0); 11]);
    }
}
