//! `key = value` run configuration.
//!
//! One setting per line, `#` starts a comment. Keys are grouped by prefix:
//!
//! ```text
//! objective.motion_weight = 100          # scalar, 6 diagonal values, or 36 row-major
//! objective.sensor_weight = 1000
//! objective.ego_weight = 0.0001
//! search.initial_step_fraction = 0.0025
//! search.shrink_factor = 0.5
//! search.step_tolerance = 0.0001
//! search.max_evaluations = 12000
//! bounds.dx = 5                          # also dy, dtheta, ds, domega, da
//! inflation.base_margin = 1.0            # also lateral_margin, bottom_deflate
//! synth.num_samples = 10                 # also annotation_frequency, sensor_period,
//!                                        # scan_phase, start_time, seed
//! synth.ego = 0, 0, 0, 0, 0, 0           # x, y, theta, speed, yaw_rate, accel
//! track.car1.initial = -5, -5, 0, 20, 0, 0
//! track.car1.dims = 4.5, 1.9, 1.6
//! track.car1.z = 0.8
//! track.car1.points_per_face = 20
//! track.car1.noise_sigma = 0.02
//! track.car1.longitudinal_offset = 0
//! track.car1.time_slice = 0.03
//! ```
//!
//! Unknown or repeated keys are errors. Settings that are absent keep their
//! defaults; tracks appear in the order their first key appears.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use annofix_core::association::InflationParams;
use annofix_core::geometry::BoxDims;
use annofix_core::objective::{scaled_identity, ObjectiveConfig, WeightMatrix};
use annofix_core::optimizer::{SearchBounds, SearchConfig};
use annofix_core::pipeline::CorrectionConfig;
use annofix_core::scene::Scene;
use annofix_core::synth::{InjectedError, SynthConfig, SynthTrack, DEFAULT_NOISE_SIGMA};
use annofix_core::TrackState;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObjectiveOverrides {
    pub motion_weight: Option<WeightMatrix>,
    pub sensor_weight: Option<f64>,
    pub ego_weight: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct InflationOverrides {
    pub base_margin: Option<f64>,
    pub lateral_margin: Option<f64>,
    pub bottom_deflate: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
struct TrackEntry {
    id: String,
    initial: Option<TrackState>,
    dims: Option<[f64; 3]>,
    z: Option<f64>,
    points_per_face: Option<usize>,
    noise_sigma: Option<f64>,
    longitudinal_offset: Option<f64>,
    time_slice: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
struct SynthEntries {
    num_samples: Option<usize>,
    annotation_frequency: Option<f64>,
    sensor_period: Option<f64>,
    scan_phase: Option<f64>,
    start_time: Option<f64>,
    seed: Option<u64>,
    ego: Option<TrackState>,
    tracks: Vec<TrackEntry>,
}

/// Parsed configuration file. Defaults that depend on the scene (the
/// motion weight and the sensor period) are filled in by
/// [`RunConfig::correction_for`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub objective: ObjectiveOverrides,
    pub search: SearchConfig,
    pub bounds: SearchBounds,
    pub inflation: InflationOverrides,
    synth: SynthEntries,
}

struct Ctx<'a> {
    path: &'a Path,
    line: usize,
    key: &'a str,
}

impl Ctx<'_> {
    fn err(&self, message: impl std::fmt::Display) -> Error {
        Error::Config {
            path: self.path.to_path_buf(),
            message: format!("line {}: {}: {message}", self.line, self.key),
        }
    }

    fn f64(&self, v: &str) -> Result<f64> {
        let x: f64 = v
            .parse()
            .map_err(|_| self.err(format!("not a number: {v:?}")))?;
        if !x.is_finite() {
            return Err(self.err("must be finite"));
        }
        Ok(x)
    }

    fn usize(&self, v: &str) -> Result<usize> {
        v.parse()
            .map_err(|_| self.err(format!("not a non-negative integer: {v:?}")))
    }

    fn u64(&self, v: &str) -> Result<u64> {
        v.parse()
            .map_err(|_| self.err(format!("not a non-negative integer: {v:?}")))
    }

    fn list(&self, v: &str) -> Result<Vec<f64>> {
        v.split(',').map(|s| self.f64(s.trim())).collect()
    }

    fn fixed<const N: usize>(&self, v: &str) -> Result<[f64; N]> {
        let values = self.list(v)?;
        values.try_into().map_err(|got: Vec<f64>| {
            self.err(format!(
                "expected {N} comma-separated values, got {}",
                got.len()
            ))
        })
    }

    fn state(&self, v: &str) -> Result<TrackState> {
        Ok(TrackState::from_array(self.fixed::<6>(v)?))
    }

    fn matrix(&self, v: &str) -> Result<WeightMatrix> {
        let values = self.list(v)?;
        match values.len() {
            1 => Ok(scaled_identity(values[0])),
            6 => {
                let mut m = [[0.0; 6]; 6];
                for (i, d) in values.iter().enumerate() {
                    m[i][i] = *d;
                }
                Ok(m)
            }
            36 => {
                let mut m = [[0.0; 6]; 6];
                for (i, d) in values.iter().enumerate() {
                    m[i / 6][i % 6] = *d;
                }
                Ok(m)
            }
            n => Err(self.err(format!("expected 1, 6 or 36 values, got {n}"))),
        }
    }
}

fn set<T>(slot: &mut Option<T>, value: T, ctx: &Ctx) -> Result<()> {
    if slot.is_some() {
        return Err(ctx.err("set twice"));
    }
    *slot = Some(value);
    Ok(())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            message: format!("cannot read config: {e}"),
        })?;
        Self::parse(&text, path)
    }

    /// `origin` only labels error messages.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config {
                    path: origin.to_path_buf(),
                    message: format!("line {}: expected key = value", i + 1),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            let ctx = Ctx {
                path: origin,
                line: i + 1,
                key,
            };
            if !seen.insert(key.to_string()) {
                return Err(ctx.err("set twice"));
            }
            cfg.apply(key, value, &ctx)?;
        }
        cfg.search.validate().map_err(|e| config_error(origin, e))?;
        cfg.bounds.validate().map_err(|e| config_error(origin, e))?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, v: &str, ctx: &Ctx) -> Result<()> {
        let o = &mut self.objective;
        let s = &mut self.synth;
        match key {
            "objective.motion_weight" => o.motion_weight = Some(ctx.matrix(v)?),
            "objective.sensor_weight" => o.sensor_weight = Some(ctx.f64(v)?),
            "objective.ego_weight" => o.ego_weight = Some(ctx.f64(v)?),
            "search.initial_step_fraction" => self.search.initial_step_fraction = ctx.f64(v)?,
            "search.shrink_factor" => self.search.shrink_factor = ctx.f64(v)?,
            "search.step_tolerance" => self.search.step_tolerance = ctx.f64(v)?,
            "search.max_evaluations" => self.search.max_evaluations = Some(ctx.usize(v)?),
            "bounds.dx" => self.bounds.dx = ctx.f64(v)?,
            "bounds.dy" => self.bounds.dy = ctx.f64(v)?,
            "bounds.dtheta" => self.bounds.dtheta = ctx.f64(v)?,
            "bounds.ds" => self.bounds.ds = ctx.f64(v)?,
            "bounds.domega" => self.bounds.domega = ctx.f64(v)?,
            "bounds.da" => self.bounds.da = ctx.f64(v)?,
            "inflation.base_margin" => self.inflation.base_margin = Some(ctx.f64(v)?),
            "inflation.lateral_margin" => self.inflation.lateral_margin = Some(ctx.f64(v)?),
            "inflation.bottom_deflate" => self.inflation.bottom_deflate = Some(ctx.f64(v)?),
            "synth.num_samples" => s.num_samples = Some(ctx.usize(v)?),
            "synth.annotation_frequency" => s.annotation_frequency = Some(ctx.f64(v)?),
            "synth.sensor_period" => s.sensor_period = Some(ctx.f64(v)?),
            "synth.scan_phase" => s.scan_phase = Some(ctx.f64(v)?),
            "synth.start_time" => s.start_time = Some(ctx.f64(v)?),
            "synth.seed" => s.seed = Some(ctx.u64(v)?),
            "synth.ego" => s.ego = Some(ctx.state(v)?),
            _ => return self.apply_track(key, v, ctx),
        }
        Ok(())
    }

    fn apply_track(&mut self, key: &str, v: &str, ctx: &Ctx) -> Result<()> {
        let unknown = || ctx.err("unknown key");
        let rest = key.strip_prefix("track.").ok_or_else(unknown)?;
        let (id, field) = rest.rsplit_once('.').ok_or_else(unknown)?;
        if id.is_empty() {
            return Err(unknown());
        }
        let tracks = &mut self.synth.tracks;
        let pos = match tracks.iter().position(|t| t.id == id) {
            Some(p) => p,
            None => {
                tracks.push(TrackEntry {
                    id: id.to_string(),
                    ..TrackEntry::default()
                });
                tracks.len() - 1
            }
        };
        let t = &mut tracks[pos];
        match field {
            "initial" => set(&mut t.initial, ctx.state(v)?, ctx),
            "dims" => set(&mut t.dims, ctx.fixed::<3>(v)?, ctx),
            "z" => set(&mut t.z, ctx.f64(v)?, ctx),
            "points_per_face" => set(&mut t.points_per_face, ctx.usize(v)?, ctx),
            "noise_sigma" => set(&mut t.noise_sigma, ctx.f64(v)?, ctx),
            "longitudinal_offset" => set(&mut t.longitudinal_offset, ctx.f64(v)?, ctx),
            "time_slice" => set(&mut t.time_slice, ctx.f64(v)?, ctx),
            _ => Err(unknown()),
        }
    }

    /// Correction settings for `scene`, with file values over defaults.
    pub fn correction_for(&self, scene: &Scene) -> CorrectionConfig {
        let mut objective = ObjectiveConfig::for_frequency(scene.metadata.annotation_frequency);
        let o = &self.objective;
        objective.motion_weight = o.motion_weight.unwrap_or(objective.motion_weight);
        objective.sensor_weight = o.sensor_weight.unwrap_or(objective.sensor_weight);
        objective.ego_weight = o.ego_weight.unwrap_or(objective.ego_weight);
        let mut inflation = InflationParams::with_sensor_period(scene.metadata.sensor_period);
        let i = &self.inflation;
        inflation.base_margin = i.base_margin.unwrap_or(inflation.base_margin);
        inflation.lateral_margin = i.lateral_margin.unwrap_or(inflation.lateral_margin);
        inflation.bottom_deflate = i.bottom_deflate.unwrap_or(inflation.bottom_deflate);
        CorrectionConfig {
            objective,
            search: self.search,
            bounds: self.bounds,
            inflation,
        }
    }

    /// Synthetic scene description. Every track needs `initial` and `dims`.
    pub fn synth(&self, origin: &Path) -> Result<SynthConfig> {
        let s = &self.synth;
        let fail = |message: String| Error::Config {
            path: origin.to_path_buf(),
            message,
        };
        if s.tracks.is_empty() {
            return Err(fail(
                "no tracks configured (track.<id>.initial, track.<id>.dims)".into(),
            ));
        }
        let mut tracks = Vec::with_capacity(s.tracks.len());
        for t in &s.tracks {
            let initial = t
                .initial
                .ok_or_else(|| fail(format!("track.{}.initial missing", t.id)))?;
            let [l, w, h] = t
                .dims
                .ok_or_else(|| fail(format!("track.{}.dims missing", t.id)))?;
            let dims =
                BoxDims::new(l, w, h).map_err(|e| fail(format!("track.{}.dims: {e}", t.id)))?;
            tracks.push(SynthTrack {
                id: t.id.clone(),
                initial,
                dims,
                z: t.z.unwrap_or(0.5 * h),
                points_per_face: t.points_per_face.unwrap_or(20),
                noise_sigma: t.noise_sigma.unwrap_or(DEFAULT_NOISE_SIGMA),
                injected: InjectedError {
                    longitudinal_offset: t.longitudinal_offset.unwrap_or(0.0),
                    time_slice: t.time_slice.unwrap_or(0.0),
                },
            });
        }
        let cfg = SynthConfig {
            num_samples: s.num_samples.unwrap_or(10),
            annotation_frequency: s.annotation_frequency.unwrap_or(10.0),
            sensor_period: s.sensor_period.unwrap_or(0.1),
            scan_phase: s.scan_phase.unwrap_or(0.0),
            start_time: s.start_time.unwrap_or(0.0),
            tracks,
            ego: s
                .ego
                .unwrap_or(TrackState::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)),
            seed: s.seed.unwrap_or(0),
        };
        cfg.validate().map_err(|e| fail(e.to_string()))?;
        Ok(cfg)
    }
}

fn config_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Config {
        path: PathBuf::from(path),
        message: e.to_string(),
    }
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Config text that [`RunConfig::synth`] turns back into `cfg`.
pub fn synth_config_text(cfg: &SynthConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "synth.num_samples = {}", cfg.num_samples);
    let _ = writeln!(
        out,
        "synth.annotation_frequency = {:?}",
        cfg.annotation_frequency
    );
    let _ = writeln!(out, "synth.sensor_period = {:?}", cfg.sensor_period);
    let _ = writeln!(out, "synth.scan_phase = {:?}", cfg.scan_phase);
    let _ = writeln!(out, "synth.start_time = {:?}", cfg.start_time);
    let _ = writeln!(out, "synth.seed = {}", cfg.seed);
    let _ = writeln!(out, "synth.ego = {}", join(&cfg.ego.to_array()));
    for t in &cfg.tracks {
        let d = t.dims;
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "track.{}.initial = {}",
            t.id,
            join(&t.initial.to_array())
        );
        let _ = writeln!(
            out,
            "track.{}.dims = {}",
            t.id,
            join(&[d.length(), d.width(), d.height()])
        );
        let _ = writeln!(out, "track.{}.z = {:?}", t.id, t.z);
        let _ = writeln!(
            out,
            "track.{}.points_per_face = {}",
            t.id, t.points_per_face
        );
        let _ = writeln!(out, "track.{}.noise_sigma = {:?}", t.id, t.noise_sigma);
        let _ = writeln!(
            out,
            "track.{}.longitudinal_offset = {:?}",
            t.id, t.injected.longitudinal_offset
        );
        let _ = writeln!(
            out,
            "track.{}.time_slice = {:?}",
            t.id, t.injected.time_slice
        );
    }
    out
}
