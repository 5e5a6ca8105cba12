//! Detection quality metrics: local-window contrast and suppression
//! ratios (LSNRG, BSF, SCRG, CG), probability of detection / false-alarm
//! rate, and threshold-swept ROC curves.

use serde::{Deserialize, Serialize};

use crate::pipeline::{Component, Frame, Mask};

/// Ground-truth target: centroid plus an a x b bounding box.
#[derive(Debug, Clone, Copy)]
pub struct Target {
    pub row: f64,
    pub col: f64,
    pub a: usize,
    pub b: usize,
}

/// Per-frame lists of ground-truth targets.
pub type TargetTruth = Vec<Vec<Target>>;

/// Local evaluation window: an a x b target core surrounded by a border
/// of width d, clipped to the image at the edges.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WindowGeometry {
    pub d: usize,
    pub a: usize,
    pub b: usize,
}

impl Default for WindowGeometry {
    fn default() -> Self {
        WindowGeometry { d: 40, a: 9, b: 9 }
    }
}

struct RegionStats {
    mean: f64,
    std: f64,
    max: f64,
}

fn clip_box(center: f64, half_lo: i64, half_hi: i64, limit: usize) -> (usize, usize, bool) {
    let c = center.round() as i64;
    let lo = c - half_lo;
    let hi = c + half_hi; // inclusive
    let clipped = lo < 0 || hi >= limit as i64;
    (lo.max(0) as usize, hi.min(limit as i64 - 1) as usize, clipped)
}

fn box_bounds(t: Target, rows: usize, cols: usize, a: usize, b: usize) -> (usize, usize, usize, usize, bool) {
    // a rows x b cols, centered on the rounded centroid
    let (r0, r1, cr) = clip_box(t.row, (a as i64 - 1) / 2, a as i64 / 2, rows);
    let (c0, c1, cc) = clip_box(t.col, (b as i64 - 1) / 2, b as i64 / 2, cols);
    (r0, r1, c0, c1, cr || cc)
}

fn region_stats(image: &Frame, include: impl Fn(usize, usize) -> bool) -> Option<RegionStats> {
    let (rows, cols) = image.dims();
    let mut vals = Vec::new();
    for j in 0..cols {
        for i in 0..rows {
            if include(i, j) {
                vals.push(image.at(i, j));
            }
        }
    }
    if vals.is_empty() {
        return None;
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let max = vals.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    Some(RegionStats { mean, std: var.sqrt(), max })
}

/// Statistics of the target core and of the surrounding neighborhood
/// ring, with the window clipped to the image bounds.
fn window_stats(image: &Frame, t: Target, geom: WindowGeometry) -> (RegionStats, RegionStats, bool) {
    let (rows, cols) = image.dims();
    let (tr0, tr1, tc0, tc1, clipped_core) = box_bounds(t, rows, cols, geom.a, geom.b);
    let big_a = geom.a + 2 * geom.d;
    let big_b = geom.b + 2 * geom.d;
    let (wr0, wr1, wc0, wc1, clipped_win) = box_bounds(t, rows, cols, big_a, big_b);
    let core = region_stats(image, |i, j| i >= tr0 && i <= tr1 && j >= tc0 && j <= tc1)
        .expect("core region is nonempty after clipping");
    let ring = region_stats(image, |i, j| {
        i >= wr0 && i <= wr1 && j >= wc0 && j <= wc1 && !(i >= tr0 && i <= tr1 && j >= tc0 && j <= tc1)
    })
    .expect("ring region is nonempty after clipping");
    (core, ring, clipped_core || clipped_win)
}

/// Signal-to-clutter ratio |mu_t - mu_b| / sigma_b. Returns +inf when the
/// neighborhood is degenerate (zero variance).
pub fn scr(image: &Frame, t: Target, geom: WindowGeometry) -> f64 {
    let (core, ring, _) = window_stats(image, t, geom);
    let num = (core.mean - ring.mean).abs();
    if ring.std == 0.0 {
        if num == 0.0 { 0.0 } else { f64::INFINITY }
    } else {
        num / ring.std
    }
}

/// Local signal-to-noise ratio: max target pixel / max neighborhood pixel.
pub fn lsnr(image: &Frame, t: Target, geom: WindowGeometry) -> f64 {
    let (core, ring, _) = window_stats(image, t, geom);
    if ring.max == 0.0 {
        if core.max == 0.0 { 0.0 } else { f64::INFINITY }
    } else {
        core.max / ring.max
    }
}

/// Local contrast |mu_t - mu_b|.
pub fn con(image: &Frame, t: Target, geom: WindowGeometry) -> f64 {
    let (core, ring, _) = window_stats(image, t, geom);
    (core.mean - ring.mean).abs()
}

/// Neighborhood standard deviation, the ingredient of BSF.
pub fn ring_std(image: &Frame, t: Target, geom: WindowGeometry) -> f64 {
    let (_, ring, _) = window_stats(image, t, geom);
    ring.std
}

fn ratio(out: f64, inp: f64) -> f64 {
    if out == inp {
        // identity processing is exactly 1, even at degenerate sentinels
        1.0
    } else if inp == 0.0 {
        f64::INFINITY
    } else {
        out / inp
    }
}

/// SCR gain of processing: SCR(output) / SCR(input).
pub fn scrg(input: &Frame, output: &Frame, t: Target, geom: WindowGeometry) -> f64 {
    ratio(scr(output, t, geom), scr(input, t, geom))
}

/// LSNR gain of processing.
pub fn lsnrg(input: &Frame, output: &Frame, t: Target, geom: WindowGeometry) -> f64 {
    ratio(lsnr(output, t, geom), lsnr(input, t, geom))
}

/// Background suppression factor: sigma_in / sigma_out over the ring.
pub fn bsf(input: &Frame, output: &Frame, t: Target, geom: WindowGeometry) -> f64 {
    let s_in = ring_std(input, t, geom);
    let s_out = ring_std(output, t, geom);
    if s_in == s_out {
        1.0
    } else if s_out == 0.0 {
        f64::INFINITY
    } else {
        s_in / s_out
    }
}

/// Contrast gain: CON(output) / CON(input).
pub fn cg(input: &Frame, output: &Frame, t: Target, geom: WindowGeometry) -> f64 {
    ratio(con(output, t, geom), con(input, t, geom))
}

/// Whether the evaluation window of a target is clipped by the image edge.
pub fn window_clipped(image: &Frame, t: Target, geom: WindowGeometry) -> bool {
    window_stats(image, t, geom).2
}

fn mask_components(mask: &Mask) -> Vec<Component> {
    let (rows, cols) = mask.dims();
    let ones = Frame::from_fn(rows, cols, |_, _| 1.0);
    crate::pipeline::components(mask, &ones)
}

/// What an unmatched mask component contributes to the false-alarm rate:
/// its pixel count (default) or a single count per component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaUnit {
    Pixels,
    Components,
}

/// Detection / false-alarm counting over a frame stack. A component is a
/// true detection when its centroid lies within `match_radius` of an
/// unmatched ground-truth centroid (greedy nearest-first assignment);
/// unmatched components contribute their pixels to the false-alarm count.
pub fn pd_fa(masks: &[Mask], truth: &TargetTruth, match_radius: f64) -> (f64, f64) {
    pd_fa_counting(masks, truth, match_radius, FaUnit::Pixels)
}

/// [`pd_fa`] with an explicit false-alarm unit; the denominator is the
/// total pixel count either way.
pub fn pd_fa_counting(
    masks: &[Mask],
    truth: &TargetTruth,
    match_radius: f64,
    unit: FaUnit,
) -> (f64, f64) {
    assert_eq!(masks.len(), truth.len(), "masks and truth must align");
    let mut true_detections = 0usize;
    let mut actual_targets = 0usize;
    let mut false_pixels = 0usize;
    let mut total_pixels = 0usize;
    for (mask, targets) in masks.iter().zip(truth) {
        let (rows, cols) = mask.dims();
        total_pixels += rows * cols;
        actual_targets += targets.len();
        let comps = mask_components(mask);
        // all candidate pairs within the radius, nearest first
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (ci, c) in comps.iter().enumerate() {
            for (ti, t) in targets.iter().enumerate() {
                let dist = ((c.centroid_row - t.row).powi(2) + (c.centroid_col - t.col).powi(2)).sqrt();
                if dist <= match_radius {
                    pairs.push((dist, ci, ti));
                }
            }
        }
        pairs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut comp_used = vec![false; comps.len()];
        let mut truth_used = vec![false; targets.len()];
        for (_, ci, ti) in pairs {
            if !comp_used[ci] && !truth_used[ti] {
                comp_used[ci] = true;
                truth_used[ti] = true;
                true_detections += 1;
            }
        }
        for (ci, c) in comps.iter().enumerate() {
            if !comp_used[ci] {
                false_pixels += match unit {
                    FaUnit::Pixels => c.pixels,
                    FaUnit::Components => 1,
                };
            }
        }
    }
    let pd = if actual_targets == 0 { 1.0 } else { true_detections as f64 / actual_targets as f64 };
    let fa = false_pixels as f64 / total_pixels as f64;
    (pd, fa)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fa: f64,
    pub pd: f64,
}

/// Threshold sweep over max-normalized target images: n_points uniform
/// thresholds on [0,1], each scored with [`pd_fa`]. Points come back
/// sorted by Fa with Pd made nondecreasing (standard ROC staircase).
pub fn roc(target_images: &[Frame], truth: &TargetTruth, n_points: usize, match_radius: f64) -> Vec<RocPoint> {
    assert!(n_points >= 2);
    let normalized: Vec<Frame> = target_images
        .iter()
        .map(|f| {
            let m = f.max();
            if m > 0.0 { f.map(|v| v / m) } else { f.clone() }
        })
        .collect();
    let mut points: Vec<RocPoint> = (0..n_points)
        .map(|t| {
            let threshold = t as f64 / (n_points - 1) as f64;
            let masks: Vec<Mask> = normalized
                .iter()
                .map(|f| {
                    let (rows, cols) = f.dims();
                    let mut m = Mask::zeros(rows, cols);
                    for j in 0..cols {
                        for i in 0..rows {
                            if f.at(i, j) > threshold {
                                m.set(i, j, true);
                            }
                        }
                    }
                    m
                })
                .collect();
            let (pd, fa) = pd_fa(&masks, truth, match_radius);
            RocPoint { threshold, fa, pd }
        })
        .collect();
    points.sort_by(|a, b| a.fa.partial_cmp(&b.fa).unwrap().then(a.pd.partial_cmp(&b.pd).unwrap()));
    let mut best = 0.0_f64;
    for p in points.iter_mut() {
        best = best.max(p.pd);
        p.pd = best;
    }
    points
}

/// Area under the staircase Pd(Fa) over [0, fa_limit], normalized by
/// fa_limit. Pd extends left-constant from the smallest swept Fa.
pub fn roc_auc(points: &[RocPoint], fa_limit: f64) -> f64 {
    assert!(fa_limit > 0.0);
    let mut area = 0.0;
    let mut prev_fa = 0.0;
    let mut prev_pd = 0.0;
    for p in points {
        let fa = p.fa.min(fa_limit);
        if fa > prev_fa {
            area += (fa - prev_fa) * prev_pd;
        }
        prev_fa = prev_fa.max(fa);
        prev_pd = prev_pd.max(p.pd);
        if prev_fa >= fa_limit {
            break;
        }
    }
    area += (fa_limit - prev_fa).max(0.0) * prev_pd;
    area / fa_limit
}

/// Per-target metric row of a [`MetricsReport`].
#[derive(Debug, Clone, Serialize)]
pub struct TargetMetrics {
    pub frame: usize,
    pub target: usize,
    pub lsnrg: f64,
    pub bsf: f64,
    pub scrg: f64,
    pub cg: f64,
    pub clipped: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub geometry: WindowGeometry,
    pub per_target: Vec<TargetMetrics>,
    pub average_cg: f64,
    pub roc: Vec<RocPoint>,
}

/// Evaluate all per-target gain metrics plus a ROC sweep for a processed
/// sequence against its inputs and ground truth.
pub fn evaluate(
    inputs: &[Frame],
    outputs: &[Frame],
    truth: &TargetTruth,
    geom: WindowGeometry,
    n_roc_points: usize,
    match_radius: f64,
) -> MetricsReport {
    assert_eq!(inputs.len(), outputs.len());
    assert_eq!(inputs.len(), truth.len());
    let mut per_target = Vec::new();
    let mut cg_sum = 0.0;
    let mut cg_count = 0usize;
    for (frame_idx, ((input, output), targets)) in
        inputs.iter().zip(outputs).zip(truth).enumerate()
    {
        for (target_idx, &t) in targets.iter().enumerate() {
            let row = TargetMetrics {
                frame: frame_idx,
                target: target_idx,
                lsnrg: lsnrg(input, output, t, geom),
                bsf: bsf(input, output, t, geom),
                scrg: scrg(input, output, t, geom),
                cg: cg(input, output, t, geom),
                clipped: window_clipped(input, t, geom),
            };
            if row.cg.is_finite() {
                cg_sum += row.cg;
                cg_count += 1;
            }
            per_target.push(row);
        }
    }
    let average_cg = if cg_count > 0 { cg_sum / cg_count as f64 } else { f64::NAN };
    MetricsReport {
        geometry: geom,
        per_target,
        average_cg,
        roc: roc(outputs, truth, n_roc_points, match_radius),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn target_at(row: f64, col: f64) -> Target {
        Target { row, col, a: 9, b: 9 }
    }

    /// 100x100 frame: core box at 100, ring alternating 40/60
    /// (mean 50, std 10).
    fn constructed_frame() -> (Frame, Target, WindowGeometry) {
        let t = target_at(50.0, 50.0);
        let geom = WindowGeometry { d: 10, a: 9, b: 9 };
        let f = Frame::from_fn(100, 100, |i, j| {
            let in_core = (46..=54).contains(&i) && (46..=54).contains(&j);
            if in_core {
                100.0
            } else if (i + j) % 2 == 0 {
                40.0
            } else {
                60.0
            }
        });
        (f, t, geom)
    }

    #[test]
    fn scr_constructed_value() {
        let (f, t, geom) = constructed_frame();
        // |100 - 50| / 10 = 5, up to the ring's checkerboard parity
        let v = scr(&f, t, geom);
        assert!((v - 5.0).abs() < 0.05, "scr = {v}");
    }

    #[test]
    fn scr_degenerate_and_zero() {
        let f = Frame::from_fn(100, 100, |_, _| 3.0);
        let t = target_at(50.0, 50.0);
        let geom = WindowGeometry { d: 10, a: 9, b: 9 };
        // constant image: numerator 0 with sigma 0 -> 0, not inf
        assert_eq!(scr(&f, t, geom), 0.0);
        // distinct core on constant ring -> degenerate +inf sentinel
        let f2 = Frame::from_fn(100, 100, |i, j| {
            if (46..=54).contains(&i) && (46..=54).contains(&j) { 9.0 } else { 3.0 }
        });
        assert_eq!(scr(&f2, t, geom), f64::INFINITY);
    }

    #[test]
    fn identity_processing_gains_are_one() {
        let (f, t, geom) = constructed_frame();
        assert_eq!(lsnrg(&f, &f, t, geom), 1.0);
        assert_eq!(bsf(&f, &f, t, geom), 1.0);
        assert_eq!(scrg(&f, &f, t, geom), 1.0);
        assert_eq!(cg(&f, &f, t, geom), 1.0);
    }

    #[test]
    fn bsf_perfect_suppression() {
        let (f, t, geom) = constructed_frame();
        let out = Frame::from_fn(100, 100, |i, j| {
            if (46..=54).contains(&i) && (46..=54).contains(&j) { 1.0 } else { 0.0 }
        });
        assert_eq!(bsf(&f, &out, t, geom), f64::INFINITY);
    }

    #[test]
    fn gains_match_hand_formula() {
        let (f, t, geom) = constructed_frame();
        // halve the ring contrast, keep the core
        let out = f.map(|v| if v == 100.0 { 100.0 } else { 50.0 + (v - 50.0) * 0.5 });
        let expected_scrg = scr(&out, t, geom) / scr(&f, t, geom);
        assert!((scrg(&f, &out, t, geom) - expected_scrg).abs() < 1e-12);
        assert!((bsf(&f, &out, t, geom) - 2.0).abs() < 1e-9);
        assert!((cg(&f, &out, t, geom) - 1.0).abs() < 1e-12); // means unchanged
    }

    #[test]
    fn gains_scale_invariant() {
        let (f, t, geom) = constructed_frame();
        let out = f.map(|v| if v == 100.0 { 90.0 } else { 50.0 + (v - 50.0) * 0.3 });
        let alpha = 7.5;
        let fs = f.map(|v| v * alpha);
        let outs = out.map(|v| v * alpha);
        for (m1, m2) in [
            (lsnrg(&f, &out, t, geom), lsnrg(&fs, &outs, t, geom)),
            (bsf(&f, &out, t, geom), bsf(&fs, &outs, t, geom)),
            (scrg(&f, &out, t, geom), scrg(&fs, &outs, t, geom)),
            (cg(&f, &out, t, geom), cg(&fs, &outs, t, geom)),
        ] {
            assert!((m1 - m2).abs() <= 1e-9 * m1.abs().max(1.0), "{m1} vs {m2}");
        }
    }

    fn blob_mask(rows: usize, cols: usize, spots: &[(usize, usize)]) -> Mask {
        let mut m = Mask::zeros(rows, cols);
        for &(i, j) in spots {
            m.set(i, j, true);
        }
        m
    }

    #[test]
    fn pd_fa_perfect_and_empty() {
        let truth: TargetTruth = vec![vec![target_at(10.0, 10.0)]];
        let mask = blob_mask(100, 100, &[(10, 10)]);
        assert_eq!(pd_fa(&[mask], &truth, 4.0), (1.0, 0.0));
        let empty = Mask::zeros(100, 100);
        assert_eq!(pd_fa(&[empty], &truth, 4.0), (0.0, 0.0));
    }

    #[test]
    fn pd_fa_counts_false_pixels() {
        // one matched target plus a spurious 2-pixel component
        let truth: TargetTruth = vec![vec![target_at(10.0, 10.0)]];
        let mask = blob_mask(100, 100, &[(10, 10), (80, 80), (80, 81)]);
        let (pd, fa) = pd_fa(&[mask], &truth, 4.0);
        assert_eq!(pd, 1.0);
        assert_eq!(fa, 2.0 / 10000.0);
        // component counting collapses the 2-pixel blob to one detection
        let mask = blob_mask(100, 100, &[(10, 10), (80, 80), (80, 81)]);
        let (pd, fa) = pd_fa_counting(&[mask], &truth, 4.0, FaUnit::Components);
        assert_eq!(pd, 1.0);
        assert_eq!(fa, 1.0 / 10000.0);
    }

    #[test]
    fn pd_fa_greedy_matching_is_one_to_one() {
        // two components near one target: only one may match
        let truth: TargetTruth = vec![vec![target_at(10.0, 10.0)]];
        let mask = blob_mask(100, 100, &[(10, 10), (12, 12)]);
        let (pd, fa) = pd_fa(&[mask], &truth, 4.0);
        assert_eq!(pd, 1.0);
        assert_eq!(fa, 1.0 / 10000.0);
    }

    #[test]
    fn roc_perfect_detector_contains_origin_top() {
        let truth: TargetTruth = vec![vec![target_at(20.0, 30.0)]];
        let ft = Frame::from_fn(64, 64, |i, j| if (i, j) == (20, 30) { 1.0 } else { 0.0 });
        let points = roc(&[ft], &truth, 11, 4.0);
        assert!(points.iter().any(|p| p.fa == 0.0 && p.pd == 1.0));
    }

    #[test]
    fn roc_zero_images_flat() {
        let truth: TargetTruth = vec![vec![target_at(20.0, 30.0)]];
        let ft = Frame::zeros(64, 64);
        let points = roc(&[ft], &truth, 5, 4.0);
        assert!(points.iter().all(|p| p.fa == 0.0 && p.pd == 0.0));
    }

    #[test]
    fn roc_matches_per_threshold_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ft = Frame::from_fn(32, 32, |_, _| rng.gen_range(0.0..1.0));
        let truth: TargetTruth = vec![vec![target_at(16.0, 16.0)]];
        let n = 9;
        let points = roc(&[ft.clone()], &truth, n, 4.0);
        // independent recomputation at each threshold, before the staircase
        let m = ft.max();
        let norm = ft.map(|v| v / m);
        let mut raw: Vec<(f64, f64, f64)> = (0..n)
            .map(|t| {
                let th = t as f64 / (n - 1) as f64;
                let mut mask = Mask::zeros(32, 32);
                for j in 0..32 {
                    for i in 0..32 {
                        if norm.at(i, j) > th {
                            mask.set(i, j, true);
                        }
                    }
                }
                let (pd, fa) = pd_fa(&[mask], &truth, 4.0);
                (th, fa, pd)
            })
            .collect();
        raw.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.2.partial_cmp(&b.2).unwrap()));
        let mut best = 0.0_f64;
        for ((_, fa, pd), p) in raw.iter().zip(&points) {
            best = best.max(*pd);
            assert_eq!(*fa, p.fa);
            assert_eq!(best, p.pd);
        }
    }

    #[test]
    fn pd_fa_monotone_in_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ft = Frame::from_fn(32, 32, |_, _| rng.gen_range(0.0..1.0));
        let truth: TargetTruth = vec![vec![]];
        let mut prev_fa = f64::INFINITY;
        for t in 0..10 {
            let th = t as f64 / 9.0;
            let mut mask = Mask::zeros(32, 32);
            for j in 0..32 {
                for i in 0..32 {
                    if ft.at(i, j) > th {
                        mask.set(i, j, true);
                    }
                }
            }
            let (_, fa) = pd_fa(&[mask], &truth, 4.0);
            assert!(fa <= prev_fa + 1e-15);
            prev_fa = fa;
        }
    }

    #[test]
    fn roc_auc_staircase() {
        let points = vec![
            RocPoint { threshold: 0.9, fa: 0.0, pd: 0.5 },
            RocPoint { threshold: 0.5, fa: 0.5, pd: 1.0 },
        ];
        // pd = 0.5 on [0, 0.5), pd = 1.0 on [0.5, 1.0]
        let auc = roc_auc(&points, 1.0);
        assert!((auc - 0.75).abs() < 1e-12);
        // perfect detector
        let perfect = vec![RocPoint { threshold: 0.5, fa: 0.0, pd: 1.0 }];
        assert_eq!(roc_auc(&perfect, 1e-3), 1.0);
    }

    #[test]
    fn evaluate_identity_report() {
        let (f, t, geom) = constructed_frame();
        let truth: TargetTruth = vec![vec![t]];
        let report = evaluate(&[f.clone()], &[f], &truth, geom, 5, 4.0);
        assert_eq!(report.per_target.len(), 1);
        let row = &report.per_target[0];
        assert_eq!(row.lsnrg, 1.0);
        assert_eq!(row.bsf, 1.0);
        assert_eq!(row.scrg, 1.0);
        assert_eq!(row.cg, 1.0);
        assert_eq!(report.average_cg, 1.0);
    }
}
