//! Frame I/O: binary PGM (8/16-bit, big-endian) as the lossless
//! interchange format, grayscale PNG on input, and the fixed-format CSV
//! helpers shared by the CLI outputs.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::{Target, TargetTruth};
use crate::pipeline::{Frame, FrameSequence, Mask};

fn format_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Format { path: path.display().to_string(), message: message.into() }
}

/// PGM header tokenizer: skips whitespace and '#' comments.
struct PgmTokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PgmTokens<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        PgmTokens { bytes, pos: 0 }
    }

    fn next_token(&mut self) -> Option<&'a [u8]> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        if self.pos >= self.bytes.len() {
            return None;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        Some(&self.bytes[start..self.pos])
    }

    fn next_usize(&mut self) -> Option<usize> {
        std::str::from_utf8(self.next_token()?).ok()?.parse().ok()
    }
}

/// Read a binary (P5) PGM. Values are normalized to [0,1] by the maxval;
/// 16-bit samples are big-endian per the format. Returns the frame and
/// its bit depth (8 or 16).
pub fn read_pgm(path: &Path) -> Result<(Frame, u8)> {
    let bytes = fs::read(path)?;
    let mut toks = PgmTokens::new(&bytes);
    match toks.next_token() {
        Some(b"P5") => {}
        _ => return Err(format_error(path, "not a binary PGM (missing P5 magic)")),
    }
    let width = toks.next_usize().ok_or_else(|| format_error(path, "bad width"))?;
    let height = toks.next_usize().ok_or_else(|| format_error(path, "bad height"))?;
    let maxval = toks.next_usize().ok_or_else(|| format_error(path, "bad maxval"))?;
    if width == 0 || height == 0 {
        return Err(format_error(path, "zero image dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(format_error(path, format!("unsupported maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    let data = &bytes[toks.pos + 1..];
    let depth: u8 = if maxval < 256 { 8 } else { 16 };
    let bytes_per = if depth == 8 { 1 } else { 2 };
    let needed = width * height * bytes_per;
    if data.len() < needed {
        return Err(format_error(
            path,
            format!("raster truncated: need {needed} bytes, have {}", data.len()),
        ));
    }
    let scale = 1.0 / maxval as f64;
    let frame = Frame::from_fn(height, width, |i, j| {
        let idx = (i * width + j) * bytes_per;
        let v = if depth == 8 {
            data[idx] as u64
        } else {
            u16::from_be_bytes([data[idx], data[idx + 1]]) as u64
        };
        v as f64 * scale
    });
    Ok((frame, depth))
}

/// Write a binary (P5) PGM. Values are clamped to [0,1] and quantized to
/// the requested depth; 16-bit samples are written big-endian.
pub fn write_pgm(path: &Path, frame: &Frame, depth: u8) -> Result<()> {
    assert!(depth == 8 || depth == 16, "depth must be 8 or 16");
    let (rows, cols) = frame.dims();
    let maxval: u32 = if depth == 8 { 255 } else { 65535 };
    let mut out = Vec::with_capacity(20 + rows * cols * (depth as usize / 8));
    write!(out, "P5\n{cols} {rows}\n{maxval}\n")?;
    for i in 0..rows {
        for j in 0..cols {
            let q = (frame.at(i, j).clamp(0.0, 1.0) * maxval as f64).round() as u32;
            if depth == 8 {
                out.push(q as u8);
            } else {
                out.extend_from_slice(&(q as u16).to_be_bytes());
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Write a mask as an 8-bit PGM with values 0 and 255.
pub fn write_mask_pgm(path: &Path, mask: &Mask) -> Result<()> {
    let (rows, cols) = mask.dims();
    let frame = Frame::from_fn(rows, cols, |i, j| if mask.at(i, j) { 1.0 } else { 0.0 });
    write_pgm(path, &frame, 8)
}

fn read_png(path: &Path) -> Result<(Frame, u8)> {
    let img = image::open(path).map_err(|e| format_error(path, e.to_string()))?;
    match img {
        image::DynamicImage::ImageLuma8(buf) => {
            let (w, h) = (buf.width() as usize, buf.height() as usize);
            let frame =
                Frame::from_fn(h, w, |i, j| buf.get_pixel(j as u32, i as u32)[0] as f64 / 255.0);
            Ok((frame, 8))
        }
        image::DynamicImage::ImageLuma16(buf) => {
            let (w, h) = (buf.width() as usize, buf.height() as usize);
            let frame =
                Frame::from_fn(h, w, |i, j| buf.get_pixel(j as u32, i as u32)[0] as f64 / 65535.0);
            Ok((frame, 16))
        }
        _ => Err(format_error(path, "PNG must be grayscale (8- or 16-bit)")),
    }
}

/// Read a single frame by extension (.pgm or .png).
pub fn read_frame(path: &Path) -> Result<(Frame, u8)> {
    match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()) {
        Some(ref e) if e == "pgm" => read_pgm(path),
        Some(ref e) if e == "png" => read_png(path),
        _ => Err(format_error(path, "unsupported extension (expect .pgm or .png)")),
    }
}

/// Load every .pgm/.png file in a directory, in lexicographic filename
/// order, as one sequence.
pub fn load_dir(dir: &Path) -> Result<FrameSequence> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
                Some("pgm") | Some("png")
            )
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(format_error(dir, "no .pgm or .png frames found"));
    }
    let mut frames = Vec::with_capacity(paths.len());
    let mut depth = 8;
    for p in &paths {
        let (f, d) = read_frame(p)?;
        depth = depth.max(d);
        frames.push(f);
    }
    let mut seq = FrameSequence::new(frames)?;
    seq.source_paths = paths.iter().map(|p| p.display().to_string()).collect();
    seq.bit_depth = Some(depth);
    Ok(seq)
}

/// Canonical CSV number format: fixed 6 decimals, '.' separator.
pub fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

/// Write CSV rows with a header; LF line endings throughout.
pub fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut out = String::with_capacity(header.len() + 1 + rows.iter().map(|r| r.len() + 1).sum::<usize>());
    out.push_str(header);
    out.push('\n');
    for r in rows {
        out.push_str(r);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Ground-truth table: one row per target per frame.
pub fn write_truth(path: &Path, truth: &TargetTruth) -> Result<()> {
    let mut rows = Vec::new();
    for (frame, targets) in truth.iter().enumerate() {
        for t in targets {
            rows.push(format!("{frame},{},{},{},{}", fmt(t.row), fmt(t.col), t.a, t.b));
        }
    }
    write_csv(path, "frame,row,col,a,b", &rows)
}

/// Read a ground-truth table back. `n_frames` sizes the result so that
/// trailing target-free frames survive the round trip.
pub fn read_truth(path: &Path, n_frames: usize) -> Result<TargetTruth> {
    let text = fs::read_to_string(path)?;
    let mut truth: TargetTruth = vec![Vec::new(); n_frames];
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(format_error(path, format!("line {}: expected 5 fields", lineno + 1)));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|_| format_error(path, format!("line {}: bad number '{s}'", lineno + 1)))
        };
        let frame = parse(fields[0])? as usize;
        if frame >= n_frames {
            return Err(format_error(
                path,
                format!("line {}: frame {frame} out of range (< {n_frames})", lineno + 1),
            ));
        }
        truth[frame].push(Target {
            row: parse(fields[1])?,
            col: parse(fields[2])?,
            a: parse(fields[3])? as usize,
            b: parse(fields[4])? as usize,
        });
    }
    Ok(truth)
}
