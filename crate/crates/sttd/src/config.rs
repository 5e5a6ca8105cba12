//! Run configuration: solver, segmentation, and metric parameters in one
//! serializable bundle, plus the flat key=value file formats for run
//! configs and synthetic scene specs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{FaUnit, WindowGeometry};
use crate::solver::SolverParams;
use crate::synth::{BackgroundKind, SceneSpec, TargetIntensity, TargetSpec};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub solver: SolverParams,
    /// Segmentation threshold slope: t = max(vmin, mean + k * std).
    pub k: f64,
    pub vmin: f64,
    /// Metric window: border width d around an a x b core.
    pub d: usize,
    pub a: usize,
    pub b: usize,
    /// Centroid matching radius for detection counting.
    pub match_radius: f64,
    pub fa_unit: FaUnit,
    /// Thread cap; None means all available cores. Execution detail, not
    /// an algorithm parameter: excluded from serialized run records so
    /// outputs stay byte-identical across thread counts.
    #[serde(skip)]
    pub threads: Option<usize>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            solver: SolverParams::default(),
            k: 3.0,
            vmin: 0.85,
            d: 40,
            a: 9,
            b: 9,
            match_radius: 4.0,
            fa_unit: FaUnit::Pixels,
            threads: None,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn geometry(&self) -> WindowGeometry {
        WindowGeometry { d: self.d, a: self.a, b: self.b }
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        let checks = [
            (self.k >= 0.0, "k must be >= 0"),
            ((0.0..=1.0).contains(&self.vmin), "vmin must be in [0, 1]"),
            (self.d >= 1, "d must be >= 1"),
            (self.a >= 1 && self.b >= 1, "a and b must be >= 1"),
            (self.match_radius >= 0.0, "match_radius must be >= 0"),
            (self.threads != Some(0), "threads must be >= 1"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::InvalidParameter(msg.into()));
            }
        }
        Ok(())
    }

    /// Apply one key=value assignment (config-file line or flag override).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::InvalidParameter(format!("bad value '{value}' for {what}"));
        match key {
            "L" | "l" => self.solver.group_len = value.parse().map_err(|_| bad("L"))?,
            "H" | "h" => self.solver.h = value.parse().map_err(|_| bad("H"))?,
            "lambda_tv" => self.solver.lambda_tv = value.parse().map_err(|_| bad(key))?,
            "lambda3" => self.solver.lambda3 = value.parse().map_err(|_| bad(key))?,
            "delta" => self.solver.delta = value.parse().map_err(|_| bad(key))?,
            "eps" => self.solver.eps = value.parse().map_err(|_| bad(key))?,
            "mu0" => self.solver.mu0 = value.parse().map_err(|_| bad(key))?,
            "mu_max" => self.solver.mu_max = value.parse().map_err(|_| bad(key))?,
            "rho" => self.solver.rho = value.parse().map_err(|_| bad(key))?,
            "zeta" => self.solver.zeta = value.parse().map_err(|_| bad(key))?,
            "max_iter" => self.solver.max_iter = value.parse().map_err(|_| bad(key))?,
            "surrogate" => self.solver.surrogate = value.parse()?,
            "tv_mode" => self.solver.tv_mode = value.parse()?,
            "k" => self.k = value.parse().map_err(|_| bad(key))?,
            "vmin" => self.vmin = value.parse().map_err(|_| bad(key))?,
            "d" => self.d = value.parse().map_err(|_| bad(key))?,
            "a" => self.a = value.parse().map_err(|_| bad(key))?,
            "b" => self.b = value.parse().map_err(|_| bad(key))?,
            "match_radius" => self.match_radius = value.parse().map_err(|_| bad(key))?,
            "fa_unit" => {
                self.fa_unit = match value {
                    "pixels" => FaUnit::Pixels,
                    "components" => FaUnit::Components,
                    _ => return Err(bad(key)),
                }
            }
            "threads" => self.threads = Some(value.parse().map_err(|_| bad(key))?),
            "seed" => self.seed = value.parse().map_err(|_| bad(key))?,
            other => return Err(Error::InvalidParameter(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Parse a flat key=value config ('#' starts a comment) on top of the
    /// defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (key, value) in key_value_lines(text)? {
            cfg.set(&key, &value)?;
        }
        Ok(cfg)
    }
}

fn key_value_lines(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::InvalidParameter(format!("line {}: expected key=value", lineno + 1))
        })?;
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

fn parse_target_line(value: &str) -> Result<(f64, f64, f64, f64, usize, usize, TargetIntensity)> {
    let bad = || Error::InvalidParameter(format!("bad target line '{value}'"));
    let f: Vec<&str> = value.split(',').map(str::trim).collect();
    if f.len() != 8 {
        return Err(bad());
    }
    let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| bad()) };
    let intensity = match f[6] {
        "scr" => TargetIntensity::Scr(num(f[7])?),
        "peak" => TargetIntensity::Peak(num(f[7])?),
        _ => return Err(bad()),
    };
    Ok((
        num(f[0])?,
        num(f[1])?,
        num(f[2])?,
        num(f[3])?,
        num(f[4])? as usize,
        num(f[5])? as usize,
        intensity,
    ))
}

/// Parse a synthetic scene spec from flat key=value text. `target` lines
/// repeat, one per target, as
/// `target = row,col,row_step,col_step,a,b,scr|peak,value`.
pub fn parse_scene_spec(text: &str) -> Result<SceneSpec> {
    let mut height = 64usize;
    let mut width = 64usize;
    let mut frames = 30usize;
    let mut seed = 0u64;
    let mut noise_sigma = 0.0f64;
    let mut background = "flat".to_string();
    let mut bg_level = 0.3f64;
    let mut bg_level2 = 0.7f64;
    let mut bg_amplitude = 0.2f64;
    let mut bg_blur = 6usize;
    let mut targets_raw = Vec::new();
    for (key, value) in key_value_lines(text)? {
        let bad = || Error::InvalidParameter(format!("bad value '{value}' for {key}"));
        match key.as_str() {
            "height" => height = value.parse().map_err(|_| bad())?,
            "width" => width = value.parse().map_err(|_| bad())?,
            "frames" => frames = value.parse().map_err(|_| bad())?,
            "seed" => seed = value.parse().map_err(|_| bad())?,
            "noise_sigma" => noise_sigma = value.parse().map_err(|_| bad())?,
            "background" => background = value,
            "bg_level" => bg_level = value.parse().map_err(|_| bad())?,
            "bg_level2" => bg_level2 = value.parse().map_err(|_| bad())?,
            "bg_amplitude" => bg_amplitude = value.parse().map_err(|_| bad())?,
            "bg_blur" => bg_blur = value.parse().map_err(|_| bad())?,
            "target" => targets_raw.push(parse_target_line(&value)?),
            other => {
                return Err(Error::InvalidParameter(format!("unknown scene key '{other}'")))
            }
        }
    }
    let background = match background.as_str() {
        "flat" => BackgroundKind::Flat { level: bg_level },
        "gradient" => BackgroundKind::LinearGradient { start: bg_level, end: bg_level2 },
        "cloud" => BackgroundKind::Cloud {
            base: bg_level,
            amplitude: bg_amplitude,
            blur_radius: bg_blur,
        },
        other => {
            return Err(Error::InvalidParameter(format!("unknown background '{other}'")))
        }
    };
    let targets = targets_raw
        .into_iter()
        .map(|(r, c, vr, vc, a, b, intensity)| {
            TargetSpec::linear((r, c), (vr, vc), frames, a, b, intensity)
        })
        .collect();
    let spec = SceneSpec { height, width, frames, background, targets, noise_sigma, seed };
    spec.validate()?;
    Ok(spec)
}
