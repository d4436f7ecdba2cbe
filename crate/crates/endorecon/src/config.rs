//! `key = value` pipeline configuration with command-line overrides.

use std::fmt::Write as _;
use std::path::PathBuf;

use endorecon_core::tsdf::{ScaleMode, Weighting};
use endorecon_core::{Aabb, FusionConfig, IcpConfig, Vec3};

use crate::error::{Error, Result};

/// Every configuration key with its default and a one-line description.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("dataset", "", "dataset directory (synth layout)"),
    ("output", "", "output directory"),
    ("voxel_size", "1.0", "TSDF voxel edge length, world units"),
    ("sigma_multiplier", "3", "truncation = sigma_multiplier * sigma before clamping"),
    ("tau_min", "2*voxel_size", "lower truncation clamp"),
    ("tau_max", "10*voxel_size", "upper truncation clamp and auto-fit padding"),
    ("weight_cap", "100", "per-voxel weight ceiling"),
    ("sigma_floor", "0.001", "smallest sigma used for weights"),
    ("weighting", "inverse_sigma", "inverse_sigma | uniform"),
    ("scale_mode", "per_frame", "per_frame | global | disabled"),
    ("bounds", "auto", "auto | min_x min_y min_z max_x max_y max_z"),
    ("min_weight", "1e-6", "marching cubes skips cubes with a lighter corner"),
    ("icp_max_iters", "100", "registration iteration limit"),
    ("icp_trim", "0.1", "fraction of worst correspondences dropped"),
    ("icp_tol", "auto", "stop when the residual changes less; auto = 1e-7 * reference extent"),
    ("icp_init", "centroid", "centroid (centroid + RMS radius match) | identity"),
    ("eval_samples", "5000", "reconstruction surface samples registered to the reference"),
    ("subsample_keep", "10", "frames kept per block by reconstruct"),
    ("consistency_keep", "7", "frames kept per block by each consistency run"),
    ("subsample_block", "10", "block length of the subsample rule"),
    ("seed", "0", "root seed"),
    ("dump_volume", "false", "also dump the fused volume next to each mesh (.tsdf)"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    Centroid,
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub dataset: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub voxel_size: f64,
    pub sigma_multiplier: f64,
    pub tau_min: Option<f64>,
    pub tau_max: Option<f64>,
    pub weight_cap: f64,
    pub sigma_floor: f64,
    pub weighting: Weighting,
    pub scale_mode: ScaleMode,
    pub bounds: Option<Aabb>,
    pub min_weight: f64,
    pub icp_max_iters: usize,
    pub icp_trim: f64,
    pub icp_tol: Option<f64>,
    pub icp_init: InitMode,
    pub eval_samples: usize,
    pub subsample_keep: usize,
    pub consistency_keep: usize,
    pub subsample_block: usize,
    pub seed: u64,
    pub dump_volume: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            output: None,
            voxel_size: 1.0,
            sigma_multiplier: 3.0,
            tau_min: None,
            tau_max: None,
            weight_cap: 100.0,
            sigma_floor: 1e-3,
            weighting: Weighting::InverseSigma,
            scale_mode: ScaleMode::PerFrame,
            bounds: None,
            min_weight: 1e-6,
            icp_max_iters: 100,
            icp_trim: 0.1,
            icp_tol: None,
            icp_init: InitMode::Centroid,
            eval_samples: 5000,
            subsample_keep: 10,
            consistency_keep: 7,
            subsample_block: 10,
            seed: 0,
            dump_volume: false,
        }
    }
}

fn usage(msg: String) -> Error {
    Error::Usage(msg)
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| usage(format!("invalid value `{value}` for `{key}`")))
}

fn auto_or<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value == "auto" { Ok(None) } else { parse(key, value).map(Some) }
}

impl PipelineConfig {
    /// Reads `key = value` lines; `#` starts a comment.
    pub fn parse_text(text: &str) -> Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("config line {}: expected key = value", n + 1)))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(out)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "dataset" => self.dataset = (!value.is_empty()).then(|| PathBuf::from(value)),
            "output" => self.output = (!value.is_empty()).then(|| PathBuf::from(value)),
            "voxel_size" => self.voxel_size = parse(key, value)?,
            "sigma_multiplier" => self.sigma_multiplier = parse(key, value)?,
            "tau_min" => self.tau_min = auto_or(key, value)?,
            "tau_max" => self.tau_max = auto_or(key, value)?,
            "weight_cap" => self.weight_cap = parse(key, value)?,
            "sigma_floor" => self.sigma_floor = parse(key, value)?,
            "weighting" => {
                self.weighting = match value {
                    "inverse_sigma" => Weighting::InverseSigma,
                    "uniform" => Weighting::Uniform,
                    _ => return Err(usage(format!("invalid value `{value}` for `{key}`"))),
                }
            }
            "scale_mode" => {
                self.scale_mode = match value {
                    "per_frame" => ScaleMode::PerFrame,
                    "global" => ScaleMode::Global,
                    "disabled" => ScaleMode::Disabled,
                    _ => return Err(usage(format!("invalid value `{value}` for `{key}`"))),
                }
            }
            "bounds" => {
                self.bounds = if value == "auto" {
                    None
                } else {
                    let v: Vec<f64> = value.split_whitespace().map(|x| parse(key, x)).collect::<Result<_>>()?;
                    let [a, b, c, d, e, f] = v[..] else {
                        return Err(usage(format!("`{key}` needs six numbers or `auto`")));
                    };
                    Some(Aabb { min: Vec3::new(a, b, c), max: Vec3::new(d, e, f) })
                }
            }
            "min_weight" => self.min_weight = parse(key, value)?,
            "icp_max_iters" => self.icp_max_iters = parse(key, value)?,
            "icp_trim" => self.icp_trim = parse(key, value)?,
            "icp_tol" => self.icp_tol = auto_or(key, value)?,
            "icp_init" => {
                self.icp_init = match value {
                    "centroid" => InitMode::Centroid,
                    "identity" => InitMode::Identity,
                    _ => return Err(usage(format!("invalid value `{value}` for `{key}`"))),
                }
            }
            "eval_samples" => self.eval_samples = parse(key, value)?,
            "subsample_keep" => self.subsample_keep = parse(key, value)?,
            "consistency_keep" => self.consistency_keep = parse(key, value)?,
            "subsample_block" => self.subsample_block = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "dump_volume" => self.dump_volume = parse(key, value)?,
            _ => return Err(usage(format!("unknown config key `{key}` (see --help)"))),
        }
        Ok(())
    }

    /// Defaults, then the optional file, then `KEY=VALUE` overrides in order.
    pub fn load(file_text: Option<&str>, overrides: &[String]) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(text) = file_text {
            for (k, v) in Self::parse_text(text)? {
                cfg.set(&k, &v)?;
            }
        }
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| usage(format!("override `{o}` is not KEY=VALUE")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.fusion().validate()?;
        if self.min_weight.is_nan() || self.min_weight < 0.0 {
            return Err(usage("min_weight must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.icp_trim) {
            return Err(usage("icp_trim must lie in [0, 1)".into()));
        }
        if !(1..=self.subsample_block).contains(&self.subsample_keep) {
            return Err(usage("need 1 <= subsample_keep <= subsample_block".into()));
        }
        if !(1..=self.subsample_block).contains(&self.consistency_keep) {
            return Err(usage("need 1 <= consistency_keep <= subsample_block".into()));
        }
        if self.eval_samples < 7 {
            return Err(usage("eval_samples must be at least 7".into()));
        }
        if let Some(b) = &self.bounds {
            if !(b.min.x < b.max.x && b.min.y < b.max.y && b.min.z < b.max.z) {
                return Err(usage("bounds need min < max on every axis".into()));
            }
        }
        Ok(())
    }

    pub fn fusion(&self) -> FusionConfig {
        let mut f = FusionConfig::with_voxel_size(self.voxel_size);
        f.sigma_multiplier = self.sigma_multiplier;
        f.tau_min = self.tau_min.unwrap_or(2.0 * self.voxel_size);
        f.tau_max = self.tau_max.unwrap_or(10.0 * self.voxel_size);
        f.weight_cap = self.weight_cap;
        f.sigma_floor = self.sigma_floor;
        f.weighting = self.weighting;
        f.scale_mode = self.scale_mode;
        f.bounds = self.bounds;
        f
    }

    pub fn icp(&self, reference_extent: f64) -> IcpConfig {
        IcpConfig {
            max_iters: self.icp_max_iters,
            trim_fraction: self.icp_trim,
            tol: self.icp_tol.unwrap_or(1e-7 * reference_extent),
        }
    }

    /// Fully resolved `key = value` listing that reloads to the same config.
    pub fn to_text(&self) -> String {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let auto = |x: Option<f64>| x.map_or("auto".to_string(), |x| x.to_string());
        let mut out = String::new();
        let mut put = |k: &str, v: String| writeln!(out, "{k} = {v}").unwrap();
        put("dataset", path(&self.dataset));
        put("output", path(&self.output));
        put("voxel_size", self.voxel_size.to_string());
        put("sigma_multiplier", self.sigma_multiplier.to_string());
        put("tau_min", auto(self.tau_min));
        put("tau_max", auto(self.tau_max));
        put("weight_cap", self.weight_cap.to_string());
        put("sigma_floor", self.sigma_floor.to_string());
        put("weighting", match self.weighting {
            Weighting::InverseSigma => "inverse_sigma",
            Weighting::Uniform => "uniform",
        }.into());
        put("scale_mode", match self.scale_mode {
            ScaleMode::PerFrame => "per_frame",
            ScaleMode::Global => "global",
            ScaleMode::Disabled => "disabled",
        }.into());
        put("bounds", self.bounds.map_or("auto".into(), |b| {
            format!("{} {} {} {} {} {}", b.min.x, b.min.y, b.min.z, b.max.x, b.max.y, b.max.z)
        }));
        put("min_weight", self.min_weight.to_string());
        put("icp_max_iters", self.icp_max_iters.to_string());
        put("icp_trim", self.icp_trim.to_string());
        put("icp_tol", auto(self.icp_tol));
        put("icp_init", match self.icp_init {
            InitMode::Centroid => "centroid",
            InitMode::Identity => "identity",
        }.into());
        put("eval_samples", self.eval_samples.to_string());
        put("subsample_keep", self.subsample_keep.to_string());
        put("consistency_keep", self.consistency_keep.to_string());
        put("subsample_block", self.subsample_block.to_string());
        put("seed", self.seed.to_string());
        put("dump_volume", self.dump_volume.to_string());
        out
    }
}

/// Help text listing every key.
pub fn keys_help() -> String {
    let mut out = String::from("Configuration keys (file lines `key = value`, or `--set key=value`):\n");
    for (k, d, doc) in KEYS {
        let d = if d.is_empty() { "-" } else { d };
        writeln!(out, "  {k:<17} [{d}] {doc}").unwrap();
    }
    out
}
