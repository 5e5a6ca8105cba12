//! Seeded synthetic scenes: backgrounds, implanted Gaussian-blob targets
//! with controlled SCR, and additive Gaussian noise. The test-data source
//! for end-to-end runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::metrics::{scr, Target, TargetTruth, WindowGeometry};
use crate::pipeline::{Frame, FrameSequence};

#[derive(Debug, Clone, PartialEq)]
pub enum BackgroundKind {
    Flat { level: f64 },
    /// Intensity ramps linearly across columns.
    LinearGradient { start: f64, end: f64 },
    /// Box-blurred white noise, affinely mapped to
    /// [base - amplitude/2, base + amplitude/2]. Static across frames.
    Cloud { base: f64, amplitude: f64, blur_radius: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetIntensity {
    /// Blob peak amplitude, used directly.
    Peak(f64),
    /// Desired measured SCR on the noisy first frame; the amplitude is
    /// found by bisection.
    Scr(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpec {
    /// Per-frame centroid (row, col). Length must equal the frame count.
    pub trajectory: Vec<(f64, f64)>,
    pub a: usize,
    pub b: usize,
    pub intensity: TargetIntensity,
}

impl TargetSpec {
    /// Constant-velocity trajectory helper.
    pub fn linear(
        start: (f64, f64),
        velocity: (f64, f64),
        frames: usize,
        a: usize,
        b: usize,
        intensity: TargetIntensity,
    ) -> Self {
        let trajectory = (0..frames)
            .map(|f| (start.0 + velocity.0 * f as f64, start.1 + velocity.1 * f as f64))
            .collect();
        TargetSpec { trajectory, a, b, intensity }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub height: usize,
    pub width: usize,
    pub frames: usize,
    pub background: BackgroundKind,
    pub targets: Vec<TargetSpec>,
    /// Noise standard deviation on the [0,1] intensity scale.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.frames == 0 {
            return Err(Error::InvalidParameter("scene dims must be positive".into()));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::InvalidParameter("noise_sigma must be >= 0".into()));
        }
        for (idx, t) in self.targets.iter().enumerate() {
            if t.trajectory.len() != self.frames {
                return Err(Error::InvalidParameter(format!(
                    "target {idx}: trajectory length {} != frame count {}",
                    t.trajectory.len(),
                    self.frames
                )));
            }
            if t.a == 0 || t.b == 0 {
                return Err(Error::InvalidParameter(format!("target {idx}: box must be >= 1x1")));
            }
            for &(r, c) in &t.trajectory {
                if r < 0.0 || c < 0.0 || r >= self.height as f64 || c >= self.width as f64 {
                    return Err(Error::InvalidParameter(format!(
                        "target {idx}: centroid ({r}, {c}) out of bounds"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn derived_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 step over (seed, stream)
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn box_blur(frame: &Frame, radius: usize) -> Frame {
    if radius == 0 {
        return frame.clone();
    }
    let (rows, cols) = frame.dims();
    let r = radius as i64;
    // separable blur with clamped borders
    let mut tmp = Frame::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            let mut acc = 0.0;
            for di in -r..=r {
                let ii = (i as i64 + di).clamp(0, rows as i64 - 1) as usize;
                acc += frame.at(ii, j);
            }
            tmp.set(i, j, acc / (2 * r + 1) as f64);
        }
    }
    let mut out = Frame::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            let mut acc = 0.0;
            for dj in -r..=r {
                let jj = (j as i64 + dj).clamp(0, cols as i64 - 1) as usize;
                acc += tmp.at(i, jj);
            }
            out.set(i, j, acc / (2 * r + 1) as f64);
        }
    }
    out
}

fn background_frame(spec: &SceneSpec) -> Frame {
    let (h, w) = (spec.height, spec.width);
    match &spec.background {
        BackgroundKind::Flat { level } => Frame::from_fn(h, w, |_, _| level.clamp(0.0, 1.0)),
        BackgroundKind::LinearGradient { start, end } => Frame::from_fn(h, w, |_, j| {
            let t = if w > 1 { j as f64 / (w - 1) as f64 } else { 0.0 };
            (start + (end - start) * t).clamp(0.0, 1.0)
        }),
        BackgroundKind::Cloud { base, amplitude, blur_radius } => {
            let mut rng = ChaCha8Rng::seed_from_u64(derived_seed(spec.seed, u64::MAX));
            let white = Frame::from_fn(h, w, |_, _| rng.gen_range(0.0..1.0));
            let smooth = box_blur(&box_blur(&white, *blur_radius), *blur_radius);
            let lo = smooth.data().iter().copied().fold(f64::INFINITY, f64::min);
            let hi = smooth.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let span = (hi - lo).max(1e-12);
            smooth.map(|v| {
                (base - amplitude / 2.0 + amplitude * (v - lo) / span).clamp(0.0, 1.0)
            })
        }
    }
}

/// Truncated Gaussian blob with sigma = min(a,b)/3, peak `amplitude`,
/// added within the a x b box around the centroid.
fn add_blob(frame: &mut Frame, center: (f64, f64), a: usize, b: usize, amplitude: f64) {
    let (rows, cols) = frame.dims();
    let sigma = (a.min(b) as f64) / 3.0;
    let (cr, cc) = center;
    let r0 = (cr.round() as i64 - (a as i64 - 1) / 2).max(0) as usize;
    let r1 = (cr.round() as i64 + a as i64 / 2).min(rows as i64 - 1) as usize;
    let c0 = (cc.round() as i64 - (b as i64 - 1) / 2).max(0) as usize;
    let c1 = (cc.round() as i64 + b as i64 / 2).min(cols as i64 - 1) as usize;
    for j in c0..=c1 {
        for i in r0..=r1 {
            let dr = i as f64 - cr;
            let dc = j as f64 - cc;
            let g = amplitude * (-(dr * dr + dc * dc) / (2.0 * sigma * sigma)).exp();
            frame.set(i, j, (frame.at(i, j) + g).min(1.0));
        }
    }
}

fn noise_frame(rows: usize, cols: usize, sigma: f64, seed: u64, frame_idx: u64) -> Frame {
    if sigma == 0.0 {
        return Frame::zeros(rows, cols);
    }
    let normal = Normal::new(0.0, sigma).expect("sigma validated nonnegative");
    let mut rng = ChaCha8Rng::seed_from_u64(derived_seed(seed, frame_idx));
    Frame::from_fn(rows, cols, |_, _| normal.sample(&mut rng))
}

/// Measurement geometry used when solving for a blob amplitude that hits
/// a requested SCR.
fn scr_geometry(a: usize, b: usize) -> WindowGeometry {
    WindowGeometry { d: 40, a, b }
}

fn measured_scr(bg: &Frame, noise0: &Frame, t: &TargetSpec, amplitude: f64) -> f64 {
    let mut clean = bg.clone();
    add_blob(&mut clean, t.trajectory[0], t.a, t.b, amplitude);
    let noisy = Frame::from_fn(clean.dims().0, clean.dims().1, |i, j| {
        (clean.at(i, j) + noise0.at(i, j)).clamp(0.0, 1.0)
    });
    let (r, c) = t.trajectory[0];
    scr(&noisy, Target { row: r, col: c, a: t.a, b: t.b }, scr_geometry(t.a, t.b))
}

/// Solve for the blob amplitude meeting the requested SCR within 5%
/// (bisection; SCR is monotone in the amplitude).
fn solve_amplitude(bg: &Frame, noise0: &Frame, t: &TargetSpec, want: f64) -> Result<f64> {
    let at_max = measured_scr(bg, noise0, t, 1.0);
    if at_max < want {
        return Err(Error::Infeasible(format!(
            "requested SCR {want} exceeds maximum {at_max:.3} at amplitude 1"
        )));
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut mid = 0.5;
    for _ in 0..60 {
        mid = 0.5 * (lo + hi);
        let got = measured_scr(bg, noise0, t, mid);
        if (got - want).abs() <= 0.05 * want {
            return Ok(mid);
        }
        if got < want {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

/// Generate the frame sequence and its ground truth. Deterministic per
/// spec (including the seed).
pub fn generate(spec: &SceneSpec) -> Result<(FrameSequence, TargetTruth)> {
    spec.validate()?;
    let bg = background_frame(spec);
    let noise0 = noise_frame(spec.height, spec.width, spec.noise_sigma, spec.seed, 0);
    let amplitudes: Vec<f64> = spec
        .targets
        .iter()
        .map(|t| match t.intensity {
            TargetIntensity::Peak(a) => Ok(a),
            TargetIntensity::Scr(s) => solve_amplitude(&bg, &noise0, t, s),
        })
        .collect::<Result<_>>()?;
    let mut frames = Vec::with_capacity(spec.frames);
    let mut truth: TargetTruth = Vec::with_capacity(spec.frames);
    for f in 0..spec.frames {
        let mut clean = bg.clone();
        let mut frame_truth = Vec::new();
        for (t, &amp) in spec.targets.iter().zip(&amplitudes) {
            let center = t.trajectory[f];
            add_blob(&mut clean, center, t.a, t.b, amp);
            frame_truth.push(Target { row: center.0, col: center.1, a: t.a, b: t.b });
        }
        let noise = noise_frame(spec.height, spec.width, spec.noise_sigma, spec.seed, f as u64);
        let noisy = Frame::from_fn(spec.height, spec.width, |i, j| {
            (clean.at(i, j) + noise.at(i, j)).clamp(0.0, 1.0)
        });
        frames.push(noisy);
        truth.push(frame_truth);
    }
    Ok((FrameSequence::new(frames)?, truth))
}

/// Add i.i.d. zero-mean Gaussian noise (on the [0,1] scale) to every
/// frame and clip. Deterministic per seed.
pub fn add_noise(seq: &FrameSequence, sigma: f64, seed: u64) -> Result<FrameSequence> {
    if sigma < 0.0 {
        return Err(Error::InvalidParameter("sigma must be >= 0".into()));
    }
    let (rows, cols) = seq.frame_dims();
    let frames = seq
        .frames()
        .iter()
        .enumerate()
        .map(|(f, frame)| {
            let noise = noise_frame(rows, cols, sigma, seed, f as u64);
            Frame::from_fn(rows, cols, |i, j| (frame.at(i, j) + noise.at(i, j)).clamp(0.0, 1.0))
        })
        .collect();
    FrameSequence::new(frames)
}
