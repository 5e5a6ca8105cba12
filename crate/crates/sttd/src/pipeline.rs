//! End-to-end detection: stack frames into tensors, decompose each group,
//! rebuild per-frame target/background/noise images, and segment targets
//! by adaptive thresholding.

use rayon::prelude::*;
use serde::Serialize;

use crate::asttv::DiffSpectra;
use crate::error::{Error, Result};
use crate::solver::{decompose_with_spectra, Decomposition, SolverParams, TvMode};
use crate::tensor::Tensor3;

/// Grayscale image, column-major, element (i, j) at `i + rows*j`.
/// Matches the frontal-slice layout of [`Tensor3`].
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Frame {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Frame { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Frame { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut fr = Frame::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                fr.data[i + rows * j] = f(i, j);
            }
        }
        fr
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i + self.rows * j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i + self.rows * j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn max(&self) -> f64 {
        self.data.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Population standard deviation.
    pub fn std(&self) -> f64 {
        let m = self.mean();
        (self.data.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.data.len() as f64).sqrt()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Frame {
        Frame { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }
}

/// Ordered grayscale frames of identical dimensions, intensities in [0,1].
#[derive(Debug, Clone)]
pub struct FrameSequence {
    rows: usize,
    cols: usize,
    frames: Vec<Frame>,
    /// Source file paths when loaded from disk, empty for synthetic data.
    pub source_paths: Vec<String>,
    /// Bit depth of the source images (8 or 16), if file-backed.
    pub bit_depth: Option<u8>,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>) -> Result<Self> {
        let first = frames.first().ok_or(Error::SequenceTooShort { needed: 1, got: 0 })?;
        let (rows, cols) = first.dims();
        for (idx, f) in frames.iter().enumerate() {
            if f.dims() != (rows, cols) {
                return Err(Error::DimensionMismatch {
                    expected: format!("{rows}x{cols}"),
                    got: format!("frame {idx}: {}x{}", f.dims().0, f.dims().1),
                });
            }
        }
        Ok(FrameSequence { rows, cols, frames, source_paths: Vec::new(), bit_depth: None })
    }

    pub fn frame_dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frame(&self, idx: usize) -> &Frame {
        &self.frames[idx]
    }
}

/// Consecutive disjoint groups of `len` frames; when the sequence length
/// is not divisible, the final group holds the last `len` frames and
/// overlaps its predecessor. Overlapped frames are reported from the
/// earlier group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grouping {
    pub starts: Vec<usize>,
    pub len: usize,
    pub n_frames: usize,
}

pub fn group_frames(seq: &FrameSequence, len: usize) -> Result<(Vec<Tensor3>, Grouping)> {
    if len < 2 {
        return Err(Error::InvalidParameter("group length must be >= 2".into()));
    }
    if seq.len() < len {
        return Err(Error::SequenceTooShort { needed: len, got: seq.len() });
    }
    let mut starts: Vec<usize> = (0..=seq.len() - len).step_by(len).collect();
    let last = *starts.last().unwrap();
    if last + len < seq.len() {
        starts.push(seq.len() - len);
    }
    let (rows, cols) = seq.frame_dims();
    let tensors = starts
        .iter()
        .map(|&s| {
            let mut t = Tensor3::zeros(rows, cols, len);
            for k in 0..len {
                t.slice_mut(k).copy_from_slice(seq.frame(s + k).data());
            }
            t
        })
        .collect();
    Ok((tensors, Grouping { starts, len, n_frames: seq.len() }))
}

/// Per-frame images recovered from the group decompositions.
pub struct ReconstructedFrames {
    pub background: Vec<Frame>,
    pub target: Vec<Frame>,
    pub noise: Vec<Frame>,
}

pub fn reconstruct(groups: &[Decomposition], grouping: &Grouping) -> ReconstructedFrames {
    assert_eq!(groups.len(), grouping.starts.len());
    let (rows, cols, _) = groups[0].b.dims();
    let blank = || vec![None::<Frame>; grouping.n_frames];
    let (mut bg, mut tg, mut ns) = (blank(), blank(), blank());
    for (dec, &start) in groups.iter().zip(&grouping.starts) {
        for k in 0..grouping.len {
            let f = start + k;
            if bg[f].is_none() {
                let pull = |t: &Tensor3| Frame::from_vec(rows, cols, t.slice(k).to_vec());
                bg[f] = Some(pull(&dec.b));
                tg[f] = Some(pull(&dec.t));
                ns[f] = Some(pull(&dec.n));
            }
        }
    }
    ReconstructedFrames {
        background: bg.into_iter().map(Option::unwrap).collect(),
        target: tg.into_iter().map(Option::unwrap).collect(),
        noise: ns.into_iter().map(Option::unwrap).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    rows: usize,
    cols: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mask { rows, cols, data: vec![false; rows * cols] }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> bool {
        self.data[i + self.rows * j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.data[i + self.rows * j] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }
}

/// A connected region of mask pixels (8-connectivity).
#[derive(Debug, Clone, Serialize)]
pub struct Component {
    pub centroid_row: f64,
    pub centroid_col: f64,
    pub pixels: usize,
    pub peak: f64,
}

/// Label 8-connected components and summarize each with its centroid,
/// pixel count, and peak image value.
pub fn components(mask: &Mask, image: &Frame) -> Vec<Component> {
    let (rows, cols) = mask.dims();
    let mut seen = vec![false; rows * cols];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for j in 0..cols {
        for i in 0..rows {
            if !mask.at(i, j) || seen[i + rows * j] {
                continue;
            }
            let mut sum_i = 0.0;
            let mut sum_j = 0.0;
            let mut count = 0usize;
            let mut peak = f64::NEG_INFINITY;
            stack.push((i, j));
            seen[i + rows * j] = true;
            while let Some((ci, cj)) = stack.pop() {
                sum_i += ci as f64;
                sum_j += cj as f64;
                count += 1;
                peak = peak.max(image.at(ci, cj));
                for di in -1i64..=1 {
                    for dj in -1i64..=1 {
                        let ni = ci as i64 + di;
                        let nj = cj as i64 + dj;
                        if ni < 0 || nj < 0 || ni >= rows as i64 || nj >= cols as i64 {
                            continue;
                        }
                        let (ni, nj) = (ni as usize, nj as usize);
                        if mask.at(ni, nj) && !seen[ni + rows * nj] {
                            seen[ni + rows * nj] = true;
                            stack.push((ni, nj));
                        }
                    }
                }
            }
            out.push(Component {
                centroid_row: sum_i / count as f64,
                centroid_col: sum_j / count as f64,
                pixels: count,
                peak,
            });
        }
    }
    out
}

/// Adaptive threshold segmentation of a target image. The image is first
/// max-normalized to [0,1]; the threshold is max(vmin, mean + k*std) of
/// the normalized image and exceedance is strict.
pub fn segment(ft: &Frame, k: f64, vmin: f64) -> (Mask, Vec<Component>) {
    let (rows, cols) = ft.dims();
    let peak = ft.max();
    let scaled = if peak > 0.0 { ft.map(|v| v / peak) } else { ft.clone() };
    let t_th = vmin.max(scaled.mean() + k * scaled.std());
    let mut mask = Mask::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            if scaled.at(i, j) > t_th {
                mask.set(i, j, true);
            }
        }
    }
    let comps = components(&mask, ft);
    (mask, comps)
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupDiagnostics {
    pub start_frame: usize,
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
}

pub struct DetectionResult {
    pub background: Vec<Frame>,
    pub target: Vec<Frame>,
    pub noise: Vec<Frame>,
    pub masks: Vec<Mask>,
    pub components: Vec<Vec<Component>>,
    pub groups: Vec<GroupDiagnostics>,
}

/// Full pipeline: group, decompose (groups in parallel), reconstruct,
/// segment every frame.
pub fn detect(seq: &FrameSequence, params: &SolverParams, k: f64, vmin: f64) -> Result<DetectionResult> {
    let (tensors, grouping) = group_frames(seq, params.group_len)?;
    let (rows, cols) = seq.frame_dims();
    let spectra = match params.tv_mode {
        TvMode::None => DiffSpectra::without_tv(rows, cols, params.group_len),
        _ => DiffSpectra::new(rows, cols, params.group_len),
    };
    let decs: Vec<Decomposition> = tensors
        .par_iter()
        .map(|t| decompose_with_spectra(t, params, &spectra))
        .collect::<Result<_>>()?;
    let groups = decs
        .iter()
        .zip(&grouping.starts)
        .map(|(d, &s)| GroupDiagnostics {
            start_frame: s,
            iterations: d.iterations,
            final_residual: d.final_residual,
            converged: d.converged,
        })
        .collect();
    let rec = reconstruct(&decs, &grouping);
    let seg: Vec<(Mask, Vec<Component>)> =
        rec.target.par_iter().map(|ft| segment(ft, k, vmin)).collect();
    let (masks, comps) = seg.into_iter().unzip();
    Ok(DetectionResult {
        background: rec.background,
        target: rec.target,
        noise: rec.noise,
        masks,
        components: comps,
        groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::random_tensor;

    fn seq_of(n: usize, rows: usize, cols: usize) -> FrameSequence {
        let frames = (0..n)
            .map(|f| Frame::from_fn(rows, cols, |i, j| (f * rows * cols + i + j) as f64 % 7.0 / 7.0))
            .collect();
        FrameSequence::new(frames).unwrap()
    }

    #[test]
    fn grouping_disjoint_when_divisible() {
        let seq = seq_of(120, 4, 4);
        let (tensors, g) = group_frames(&seq, 3).unwrap();
        assert_eq!(tensors.len(), 40);
        assert_eq!(g.starts, (0..120).step_by(3).collect::<Vec<_>>());
    }

    #[test]
    fn grouping_overlaps_tail() {
        let seq = seq_of(7, 3, 3);
        let (_, g) = group_frames(&seq, 3).unwrap();
        assert_eq!(g.starts, vec![0, 3, 4]);
    }

    #[test]
    fn grouping_single_group() {
        let seq = seq_of(5, 3, 3);
        let (tensors, g) = group_frames(&seq, 5).unwrap();
        assert_eq!(tensors.len(), 1);
        assert_eq!(g.starts, vec![0]);
    }

    #[test]
    fn grouping_too_short() {
        let seq = seq_of(2, 3, 3);
        match group_frames(&seq, 3) {
            Err(Error::SequenceTooShort { needed: 3, got: 2 }) => {}
            other => panic!("unexpected {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn group_stack_round_trip() {
        let seq = seq_of(3, 4, 5);
        let (tensors, g) = group_frames(&seq, 3).unwrap();
        // treat the stacked tensor as a perfect "decomposition" into B
        let dec = Decomposition {
            b: tensors[0].clone(),
            t: Tensor3::zeros(4, 5, 3),
            n: Tensor3::zeros(4, 5, 3),
            iterations: 0,
            final_residual: 0.0,
            converged: true,
        };
        let rec = reconstruct(&[dec], &g);
        for f in 0..3 {
            assert_eq!(&rec.background[f], seq.frame(f));
        }
    }

    #[test]
    fn overlapped_frames_come_from_earlier_group() {
        let seq = seq_of(7, 3, 3);
        let (_, g) = group_frames(&seq, 3).unwrap();
        let mk = |tag: f64| {
            let b = Tensor3::from_fn(3, 3, 3, |_, _, _| tag);
            Decomposition {
                b,
                t: Tensor3::zeros(3, 3, 3),
                n: Tensor3::zeros(3, 3, 3),
                iterations: 0,
                final_residual: 0.0,
                converged: true,
            }
        };
        let rec = reconstruct(&[mk(1.0), mk(2.0), mk(3.0)], &g);
        // frames 4 and 5 overlap groups 2 and 3; the earlier group wins
        assert_eq!(rec.background[4].at(0, 0), 2.0);
        assert_eq!(rec.background[5].at(0, 0), 2.0);
        assert_eq!(rec.background[6].at(0, 0), 3.0);
    }

    #[test]
    fn segment_zero_image_is_empty() {
        let ft = Frame::zeros(8, 8);
        let (mask, comps) = segment(&ft, 3.0, 0.85);
        assert_eq!(mask.count(), 0);
        assert!(comps.is_empty());
    }

    #[test]
    fn segment_single_hot_pixel() {
        let mut ft = Frame::zeros(10, 10);
        ft.set(4, 7, 1.0);
        let (mask, comps) = segment(&ft, 3.0, 0.85);
        assert_eq!(mask.count(), 1);
        assert!(mask.at(4, 7));
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].pixels, 1);
        assert_eq!((comps[0].centroid_row, comps[0].centroid_col), (4.0, 7.0));
    }

    #[test]
    fn segment_threshold_formula() {
        // max is already 1.0 so rescaling is the identity; the low-level
        // pattern gives mean + k*std well below vmin, so vmin wins
        let n = 100usize;
        let mut ft = Frame::from_fn(n, n, |i, j| if (i + n * j) % 2 == 0 { 0.06 } else { 0.14 });
        ft.set(3, 3, 1.0);
        let stat = ft.mean() + 3.0 * ft.std();
        assert!(stat < 0.85, "mean+3std = {stat}");
        let (mask, comps) = segment(&ft, 3.0, 0.85);
        // only the hot pixel exceeds the vmin-dominated threshold
        assert_eq!(mask.count(), 1);
        assert!(mask.at(3, 3));
        assert_eq!(comps.len(), 1);
    }

    #[test]
    fn segment_strict_inequality_with_vmin_one() {
        let ft = Frame::from_fn(6, 6, |i, j| (i + j) as f64 / 10.0);
        let (mask, _) = segment(&ft, 1e12, 1.0);
        assert_eq!(mask.count(), 0);
    }

    #[test]
    fn components_eight_connectivity() {
        let mut mask = Mask::zeros(5, 5);
        // diagonal pair must merge into one component
        mask.set(1, 1, true);
        mask.set(2, 2, true);
        // distant singleton stays separate
        mask.set(4, 0, true);
        let img = Frame::from_fn(5, 5, |i, j| (i * 5 + j) as f64);
        let comps = components(&mask, &img);
        assert_eq!(comps.len(), 2);
        let big = comps.iter().find(|c| c.pixels == 2).unwrap();
        assert_eq!((big.centroid_row, big.centroid_col), (1.5, 1.5));
        assert_eq!(big.peak, 12.0);
    }

    #[test]
    fn detect_zero_sequence() {
        let frames = (0..6).map(|_| Frame::zeros(8, 8)).collect();
        let seq = FrameSequence::new(frames).unwrap();
        let res = detect(&seq, &SolverParams::default(), 3.0, 0.85).unwrap();
        assert_eq!(res.masks.len(), 6);
        assert!(res.masks.iter().all(|m| m.count() == 0));
        assert!(res.groups.iter().all(|g| g.converged && g.iterations == 1));
    }

    #[test]
    fn detect_frame_counts_match() {
        let t = random_tensor(8, 8, 7, 77);
        let frames = (0..7)
            .map(|k| Frame::from_fn(8, 8, |i, j| 0.5 + 0.1 * t.at(i, j, k)))
            .collect();
        let seq = FrameSequence::new(frames).unwrap();
        let res = detect(&seq, &SolverParams::default(), 3.0, 0.85).unwrap();
        assert_eq!(res.background.len(), 7);
        assert_eq!(res.target.len(), 7);
        assert_eq!(res.noise.len(), 7);
        assert_eq!(res.masks.len(), 7);
        assert_eq!(res.components.len(), 7);
        assert_eq!(res.groups.len(), 3); // starts 0, 3, 4
    }

    #[test]
    fn detect_deterministic() {
        let t = random_tensor(8, 8, 3, 88);
        let frames = (0..3)
            .map(|k| Frame::from_fn(8, 8, |i, j| 0.5 + 0.1 * t.at(i, j, k)))
            .collect();
        let seq = FrameSequence::new(frames).unwrap();
        let a = detect(&seq, &SolverParams::default(), 3.0, 0.85).unwrap();
        let b = detect(&seq, &SolverParams::default(), 3.0, 0.85).unwrap();
        for f in 0..3 {
            assert_eq!(a.target[f], b.target[f]);
            assert_eq!(a.masks[f], b.masks[f]);
        }
    }
}
