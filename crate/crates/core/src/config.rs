//! Hyper-parameters and the INI-style run configuration.
//!
//! ```ini
//! [run]
//! seed = 42
//! clusters = 3
//! data = toy.icg
//! out_dir = out
//!
//! [phase1]
//! epochs = 30
//!
//! [graph]
//! k_a = 1
//! k_b = 10
//! ```
//!
//! Every key is optional; unknown sections or keys are rejected.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;

use crate::data::AugmentPolicy;
use crate::error::{Error, Result};

/// Network widths shared by both training phases.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Backbone output dimension `d`.
    pub feature_dim: usize,
    /// ISM projection dimension.
    pub proj_dim: usize,
    /// Hidden encoder widths; the bottleneck width is the cluster count.
    pub hidden: Vec<usize>,
    /// Square input side length.
    pub image_size: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            feature_dim: 64,
            proj_dim: 32,
            hidden: vec![500, 500, 2000],
            image_size: 16,
        }
    }
}

/// Which losses drive phase 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase1Objective {
    /// Instance contrast + cluster contrast + reconstruction.
    Full,
    /// Reconstruction loss only.
    ReconstructionOnly,
}

impl FromStr for Phase1Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Self::Full),
            "reconstruction_only" => Ok(Self::ReconstructionOnly),
            _ => Err(Error::Config(format!(
                "objective must be full or reconstruction_only, got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phase1Config {
    pub tau_i: f64,
    pub tau_c: f64,
    pub batch_size: usize,
    pub lr: f64,
    pub epochs: usize,
    pub objective: Phase1Objective,
    pub augment: AugmentPolicy,
}

impl Default for Phase1Config {
    fn default() -> Self {
        Self {
            tau_i: 0.5,
            tau_c: 1.0,
            batch_size: 128,
            lr: 1e-4,
            epochs: 30,
            objective: Phase1Objective::Full,
            augment: AugmentPolicy::default(),
        }
    }
}

/// Which k-NN graphs feed the two GCN streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphMode {
    /// Stream a on the `k_a` graph, stream b on the `k_b` graph.
    Dual,
    /// Both streams share the `k_a` graph and start from identical weights,
    /// which makes them one GCN in effect.
    SingleA,
    /// As [`GraphMode::SingleA`] with the `k_b` graph.
    SingleB,
}

impl FromStr for GraphMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dual" => Ok(Self::Dual),
            "single_a" => Ok(Self::SingleA),
            "single_b" => Ok(Self::SingleB),
            _ => Err(Error::Config(format!(
                "mode must be dual, single_a or single_b, got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphConfig {
    pub t_heat: f64,
    pub k_a: usize,
    pub k_b: usize,
    pub mode: GraphMode,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            t_heat: 1.0,
            k_a: 1,
            k_b: 10,
            mode: GraphMode::Dual,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phase2Config {
    /// Weight of a stream's own previous layer in the fusion.
    pub sigma: f64,
    /// Weight of the other stream's previous layer in the fusion.
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    pub t_dof: f64,
    pub iterations: usize,
    pub lr: f64,
}

impl Default for Phase2Config {
    fn default() -> Self {
        Self {
            sigma: 0.4,
            gamma: 0.2,
            alpha: 0.1,
            beta: 0.1,
            eta: 0.1,
            t_dof: 1.0,
            iterations: 200,
            lr: 1e-4,
        }
    }
}

/// Every hyper-parameter of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub num_clusters: usize,
    pub seed: u64,
    pub model: ModelConfig,
    pub phase1: Phase1Config,
    pub graph: GraphConfig,
    pub phase2: Phase2Config,
}

impl Config {
    pub fn new(num_clusters: usize) -> Self {
        Self {
            num_clusters,
            seed: 42,
            model: ModelConfig::default(),
            phase1: Phase1Config::default(),
            graph: GraphConfig::default(),
            phase2: Phase2Config::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.num_clusters < 2 {
            return fail(format!("clusters must be at least 2, got {}", self.num_clusters));
        }
        let m = &self.model;
        if m.feature_dim == 0 || m.proj_dim == 0 || m.hidden.contains(&0) {
            return fail("model widths must be positive".into());
        }
        if m.image_size < 10 {
            return fail(format!("image_size must be at least 10, got {}", m.image_size));
        }
        let p1 = &self.phase1;
        if !(p1.tau_i > 0.0) || !(p1.tau_c > 0.0) {
            return fail(format!("temperatures must be positive, got tau_i={} tau_c={}", p1.tau_i, p1.tau_c));
        }
        if p1.batch_size == 0 {
            return fail("batch_size must be positive".into());
        }
        if !(p1.lr >= 0.0) || !(self.phase2.lr >= 0.0) {
            return fail("learning rates must be nonnegative".into());
        }
        let a = &p1.augment;
        if !(a.min_crop_area > 0.0 && a.min_crop_area <= 1.0) || !(a.noise_sigma >= 0.0) || !(a.jitter >= 0.0) {
            return fail("augmentation parameters out of range".into());
        }
        let g = &self.graph;
        if !(g.t_heat > 0.0) {
            return fail(format!("t_heat must be positive, got {}", g.t_heat));
        }
        if g.k_a == 0 || g.k_b == 0 {
            return fail("k_a and k_b must be positive".into());
        }
        if g.mode == GraphMode::Dual && g.k_a == g.k_b {
            return fail(format!("k_a and k_b must differ, both are {}", g.k_a));
        }
        let p2 = &self.phase2;
        check_fusion(p2.sigma, p2.gamma)?;
        if !(p2.alpha >= 0.0 && p2.beta >= 0.0 && p2.eta >= 0.0) {
            return fail("alpha, beta and eta must be nonnegative".into());
        }
        if !(p2.t_dof > 0.0) {
            return fail(format!("t_dof must be positive, got {}", p2.t_dof));
        }
        Ok(())
    }
}

/// `σ, γ ≥ 0` and `σ + γ ≤ 1`.
pub fn check_fusion(sigma: f64, gamma: f64) -> Result<()> {
    if !(sigma >= 0.0 && gamma >= 0.0 && sigma + gamma <= 1.0 + 1e-12) {
        return Err(Error::Config(format!(
            "fusion coefficients need sigma, gamma >= 0 and sigma + gamma <= 1, got {sigma} and {gamma}"
        )));
    }
    Ok(())
}

/// [`Config`] plus the file locations of a pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub config: Config,
    pub data: PathBuf,
    pub out_dir: PathBuf,
    pub dry_run: bool,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.data.as_os_str().is_empty() {
            return Err(Error::Config("run.data is required".into()));
        }
        if self.data.starts_with(&self.out_dir) && self.data.parent() == Some(self.out_dir.as_path()) {
            let name = self.data.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            if crate::pipeline::OUTPUT_FILES.contains(&name) {
                return Err(Error::Config(format!(
                    "data path {} would be overwritten by a run output",
                    self.data.display()
                )));
            }
        }
        Ok(())
    }

    pub fn from_ini_str(text: &str, base: &Path) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut cfg = Config::new(3);
        let mut data = PathBuf::new();
        let mut out_dir = base.join("out");
        for (section, props) in ini.iter() {
            let section = section.unwrap_or("");
            for (key, value) in props.iter() {
                let value = value.trim();
                let at = || format!("[{section}] {key}");
                match (section, key) {
                    ("run", "seed") => cfg.seed = parse(value, at)?,
                    ("run", "clusters") => cfg.num_clusters = parse(value, at)?,
                    ("run", "data") => data = base.join(value),
                    ("run", "out_dir") => out_dir = base.join(value),
                    ("model", "feature_dim") => cfg.model.feature_dim = parse(value, at)?,
                    ("model", "proj_dim") => cfg.model.proj_dim = parse(value, at)?,
                    ("model", "image_size") => cfg.model.image_size = parse(value, at)?,
                    ("model", "hidden") => {
                        cfg.model.hidden = value
                            .split(',')
                            .map(|v| parse(v.trim(), at))
                            .collect::<Result<_>>()?
                    }
                    ("phase1", "tau_i") => cfg.phase1.tau_i = parse(value, at)?,
                    ("phase1", "tau_c") => cfg.phase1.tau_c = parse(value, at)?,
                    ("phase1", "batch_size") => cfg.phase1.batch_size = parse(value, at)?,
                    ("phase1", "lr") => cfg.phase1.lr = parse(value, at)?,
                    ("phase1", "epochs") => cfg.phase1.epochs = parse(value, at)?,
                    ("phase1", "objective") => cfg.phase1.objective = value.parse()?,
                    ("phase1", "min_crop_area") => cfg.phase1.augment.min_crop_area = parse(value, at)?,
                    ("phase1", "flip") => cfg.phase1.augment.flip = parse(value, at)?,
                    ("phase1", "noise_sigma") => cfg.phase1.augment.noise_sigma = parse(value, at)?,
                    ("phase1", "jitter") => cfg.phase1.augment.jitter = parse(value, at)?,
                    ("graph", "t_heat") => cfg.graph.t_heat = parse(value, at)?,
                    ("graph", "k_a") => cfg.graph.k_a = parse(value, at)?,
                    ("graph", "k_b") => cfg.graph.k_b = parse(value, at)?,
                    ("graph", "mode") => cfg.graph.mode = value.parse()?,
                    ("phase2", "sigma") => cfg.phase2.sigma = parse(value, at)?,
                    ("phase2", "gamma") => cfg.phase2.gamma = parse(value, at)?,
                    ("phase2", "alpha") => cfg.phase2.alpha = parse(value, at)?,
                    ("phase2", "beta") => cfg.phase2.beta = parse(value, at)?,
                    ("phase2", "eta") => cfg.phase2.eta = parse(value, at)?,
                    ("phase2", "t_dof") => cfg.phase2.t_dof = parse(value, at)?,
                    ("phase2", "iterations") => cfg.phase2.iterations = parse(value, at)?,
                    ("phase2", "lr") => cfg.phase2.lr = parse(value, at)?,
                    _ => return Err(Error::Config(format!("unknown key {}", at()))),
                }
            }
        }
        Ok(Self {
            config: cfg,
            data,
            out_dir,
            dry_run: false,
        })
    }

    /// Loads a config file; relative paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_ini_str(&text, base)
    }

    /// Serializes back to the INI form accepted by [`RunConfig::from_ini_str`].
    pub fn to_ini_string(&self) -> String {
        let c = &self.config;
        let hidden: Vec<String> = c.model.hidden.iter().map(ToString::to_string).collect();
        let mode = match c.graph.mode {
            GraphMode::Dual => "dual",
            GraphMode::SingleA => "single_a",
            GraphMode::SingleB => "single_b",
        };
        let objective = match c.phase1.objective {
            Phase1Objective::Full => "full",
            Phase1Objective::ReconstructionOnly => "reconstruction_only",
        };
        format!(
            "[run]\nseed = {}\nclusters = {}\ndata = {}\nout_dir = {}\n\n\
             [model]\nfeature_dim = {}\nproj_dim = {}\nimage_size = {}\nhidden = {}\n\n\
             [phase1]\ntau_i = {}\ntau_c = {}\nbatch_size = {}\nlr = {}\nepochs = {}\nobjective = {}\n\
             min_crop_area = {}\nflip = {}\nnoise_sigma = {}\njitter = {}\n\n\
             [graph]\nt_heat = {}\nk_a = {}\nk_b = {}\nmode = {}\n\n\
             [phase2]\nsigma = {}\ngamma = {}\nalpha = {}\nbeta = {}\neta = {}\nt_dof = {}\niterations = {}\nlr = {}\n",
            c.seed,
            c.num_clusters,
            self.data.display(),
            self.out_dir.display(),
            c.model.feature_dim,
            c.model.proj_dim,
            c.model.image_size,
            hidden.join(","),
            c.phase1.tau_i,
            c.phase1.tau_c,
            c.phase1.batch_size,
            c.phase1.lr,
            c.phase1.epochs,
            objective,
            c.phase1.augment.min_crop_area,
            c.phase1.augment.flip,
            c.phase1.augment.noise_sigma,
            c.phase1.augment.jitter,
            c.graph.t_heat,
            c.graph.k_a,
            c.graph.k_b,
            mode,
            c.phase2.sigma,
            c.phase2.gamma,
            c.phase2.alpha,
            c.phase2.beta,
            c.phase2.eta,
            c.phase2.t_dof,
            c.phase2.iterations,
            c.phase2.lr,
        )
    }
}

fn parse<T: FromStr>(value: &str, at: impl Fn() -> String) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{}: cannot parse {value:?}", at())))
}
