//! Run configuration: a TOML file of `key = value` pairs, overridden by flags.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::Args;
use manimask_core::{DataFormat, Error as CoreError, Norm, OoseMethod, SynthKind, SynthOptions};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    MapsGlobal,
    MapsLocal,
    Pcoa,
    Random,
    ExactGlobal,
    ExactLocal,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Self::MapsGlobal => "maps_global",
            Self::MapsLocal => "maps_local",
            Self::Pcoa => "pcoa",
            Self::Random => "random",
            Self::ExactGlobal => "exact_global",
            Self::ExactLocal => "exact_local",
        }
    }

    /// Whether masks for smaller sizes are prefixes of the largest one.
    pub fn nested(self) -> bool {
        !matches!(self, Self::ExactGlobal | Self::ExactLocal)
    }
}

impl FromStr for Algorithm {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, CoreError> {
        Ok(match s.trim() {
            "maps_global" | "maps-global" => Self::MapsGlobal,
            "maps_local" | "maps-local" => Self::MapsLocal,
            "pcoa" => Self::Pcoa,
            "random" => Self::Random,
            "exact_global" | "exact-global" => Self::ExactGlobal,
            "exact_local" | "exact-local" => Self::ExactLocal,
            other => return Err(CoreError::Parameter(format!("unknown algorithm `{other}`"))),
        })
    }
}

/// Flags shared by `mask`, `evaluate` and `oose`. Every flag overrides the
/// matching key of the `--config` file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML file with any of the keys below (snake_case)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Input dataset (CSV or binary)
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// csv or f64le; guessed from the extension otherwise
    #[arg(long)]
    pub format: Option<String>,
    /// Sidecar with image_shape / param_cols; defaults to <dataset>.meta when present
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// Generate the data instead of reading it: swiss_roll or translating_blob
    #[arg(long)]
    pub synth: Option<String>,
    /// Points to generate
    #[arg(long)]
    pub n: Option<usize>,
    /// Generator seed (defaults to --seed)
    #[arg(long)]
    pub synth_seed: Option<u64>,
    /// Blob image side length
    #[arg(long)]
    pub grid: Option<usize>,
    /// Blob radius in pixels
    #[arg(long)]
    pub radius: Option<f64>,
    /// Name written to the dataset column of results
    #[arg(long)]
    pub name: Option<String>,
    /// Mask selectors, comma separated
    #[arg(long, value_delimiter = ',')]
    pub algorithm: Option<Vec<String>>,
    /// Mask sizes, comma separated, strictly increasing
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Neighbors for the Isomap graph and the secant set
    #[arg(long)]
    pub k_isomap: Option<usize>,
    /// Neighbors for LLE weights and the cliques of maps_local
    #[arg(long)]
    pub k_lle: Option<usize>,
    /// Embedding dimension
    #[arg(long = "dim", short = 'l')]
    pub dim: Option<usize>,
    /// l1 or linf, for maps_global and exact_global
    #[arg(long)]
    pub norm: Option<String>,
    /// LLE regularization
    #[arg(long)]
    pub reg: Option<f64>,
    /// Base seed; random trial t uses seed + t
    #[arg(long)]
    pub seed: Option<u64>,
    /// Random masks averaged per cell in `evaluate`
    #[arg(long)]
    pub trials: Option<usize>,
    /// Random masks averaged per cell in `oose`
    #[arg(long)]
    pub oose_trials: Option<usize>,
    /// Neighborhood size for neighbor preservation
    #[arg(long)]
    pub np_k: Option<usize>,
    /// Learners for `evaluate`: isomap, lle
    #[arg(long, value_delimiter = ',')]
    pub learners: Option<Vec<String>>,
    /// OoSE methods for `oose`: isomap, lle, gaze
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Results CSV (default <out>/results.csv)
    #[arg(long)]
    pub results: Option<PathBuf>,
    /// Append to an existing results file instead of replacing it
    #[arg(long)]
    pub append: bool,
    /// Where full-data references are cached (default <out>/cache)
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Recompute full-data references even when cached
    #[arg(long)]
    pub no_cache: bool,
    /// Embed only the largest connected component when the graph splits
    #[arg(long)]
    pub largest_component: bool,
    /// Recompute shortest paths for every Isomap leave-one-out fold
    #[arg(long)]
    pub exact_folds: bool,
    /// Also write embeddings (CSV + JSON sidecar) under <out>/embeddings
    #[arg(long)]
    pub save_embeddings: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    dataset: Option<PathBuf>,
    format: Option<String>,
    meta: Option<PathBuf>,
    synth: Option<String>,
    n: Option<usize>,
    synth_seed: Option<u64>,
    grid: Option<usize>,
    radius: Option<f64>,
    name: Option<String>,
    algorithm: Option<StringOrList>,
    sizes: Option<Vec<usize>>,
    k_isomap: Option<usize>,
    k_lle: Option<usize>,
    dim: Option<usize>,
    norm: Option<String>,
    reg: Option<f64>,
    seed: Option<u64>,
    trials: Option<usize>,
    oose_trials: Option<usize>,
    np_k: Option<usize>,
    learners: Option<StringOrList>,
    methods: Option<StringOrList>,
    out: Option<PathBuf>,
    results: Option<PathBuf>,
    append: Option<bool>,
    cache_dir: Option<PathBuf>,
    no_cache: Option<bool>,
    largest_component: Option<bool>,
    exact_folds: Option<bool>,
    save_embeddings: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum StringOrList {
    One(String),
    Many(Vec<String>),
}

impl StringOrList {
    fn into_vec(self) -> Vec<String> {
        match self {
            Self::One(s) => s.split(',').map(str::to_string).collect(),
            Self::Many(v) => v,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Source {
    File {
        path: PathBuf,
        format: DataFormat,
        meta: Option<PathBuf>,
    },
    Synth {
        kind: SynthKind,
        n: usize,
        seed: u64,
        options: SynthOptions,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Learner {
    Isomap,
    Lle,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: Source,
    pub name: String,
    /// Empty when the command should pick its own default.
    pub algorithms: Vec<Algorithm>,
    pub sizes: Vec<usize>,
    pub k_isomap: usize,
    pub k_lle: usize,
    pub dim: usize,
    pub norm: Norm,
    pub reg: f64,
    pub seed: u64,
    pub trials: usize,
    pub oose_trials: usize,
    pub np_k: usize,
    pub learners: Vec<Learner>,
    /// Empty when the command should pick its own default.
    pub methods: Vec<OoseMethod>,
    pub out: PathBuf,
    pub results: PathBuf,
    pub append: bool,
    pub cache_dir: Option<PathBuf>,
    pub largest_component: bool,
    pub exact_folds: bool,
    pub save_embeddings: bool,
}

pub fn default_meta_path(dataset: &Path) -> PathBuf {
    dataset.with_extension("meta")
}

fn parse_list<T: FromStr<Err = CoreError>>(items: &[String]) -> Result<Vec<T>> {
    items
        .iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<T>().map_err(Into::into))
        .collect()
}

fn parse_learner(s: &str) -> Result<Learner> {
    match s.trim() {
        "isomap" => Ok(Learner::Isomap),
        "lle" => Ok(Learner::Lle),
        other => Err(CoreError::Parameter(format!("unknown learner `{other}`")).into()),
    }
}

impl RunConfig {
    pub fn resolve(args: &RunArgs) -> Result<Self> {
        let file = match &args.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CoreError::Io { path: p.clone(), source: e })?;
                toml::from_str::<FileConfig>(&text)
                    .map_err(|e| CoreError::Parameter(format!("{}: {e}", p.display())))?
            }
            None => FileConfig::default(),
        };
        // relative paths in a config file are relative to the file
        let base = args
            .config
            .as_ref()
            .and_then(|p| p.parent().map(Path::to_path_buf))
            .unwrap_or_default();
        let rebase = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };

        let seed = args.seed.or(file.seed).unwrap_or(0);
        let dataset = args.dataset.clone().or(file.dataset.map(rebase));
        let synth = args.synth.clone().or(file.synth);
        let source = match (dataset, synth) {
            (Some(_), Some(_)) => bail!(CoreError::Parameter("give either a dataset or a synth kind, not both".into())),
            (None, None) => bail!(CoreError::Parameter("no dataset: pass --dataset or --synth".into())),
            (Some(path), None) => {
                let format = match args.format.clone().or(file.format) {
                    Some(f) => f.parse()?,
                    None => DataFormat::from_path(&path),
                };
                let meta = args.meta.clone().or(file.meta.map(rebase)).or_else(|| {
                    let guess = default_meta_path(&path);
                    guess.exists().then_some(guess)
                });
                Source::File { path, format, meta }
            }
            (None, Some(kind)) => {
                let defaults = SynthOptions::default();
                Source::Synth {
                    kind: kind.parse()?,
                    n: args.n.or(file.n).unwrap_or(200),
                    seed: args.synth_seed.or(file.synth_seed).unwrap_or(seed),
                    options: SynthOptions {
                        grid: args.grid.or(file.grid).unwrap_or(defaults.grid),
                        radius: args.radius.or(file.radius).unwrap_or(defaults.radius),
                    },
                }
            }
        };
        let name = args.name.clone().or(file.name).unwrap_or_else(|| match &source {
            Source::File { path, .. } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into()),
            Source::Synth { kind, .. } => kind.name().to_string(),
        });

        let algorithms = match args.algorithm.clone().or(file.algorithm.map(StringOrList::into_vec)) {
            Some(list) => parse_list::<Algorithm>(&list)?,
            None => Vec::new(),
        };
        let sizes = args.sizes.clone().or(file.sizes).unwrap_or_default();
        if sizes.windows(2).any(|w| w[0] >= w[1]) {
            bail!(CoreError::Parameter(format!("mask sizes must be strictly increasing, got {sizes:?}")));
        }
        if sizes.first() == Some(&0) {
            bail!(CoreError::Parameter("mask sizes must be positive".into()));
        }
        let norm = match args.norm.clone().or(file.norm) {
            Some(s) => s.parse()?,
            None => Norm::default(),
        };
        let learners = match args.learners.clone().or(file.learners.map(StringOrList::into_vec)) {
            Some(list) => list.iter().map(|s| parse_learner(s)).collect::<Result<Vec<_>>>()?,
            None => vec![Learner::Isomap, Learner::Lle],
        };
        let methods = match args.methods.clone().or(file.methods.map(StringOrList::into_vec)) {
            Some(list) => parse_list::<OoseMethod>(&list)?,
            None => Vec::new(),
        };
        let reg = args.reg.or(file.reg).unwrap_or(1e-3);
        if !(reg.is_finite() && reg >= 0.0) {
            bail!(CoreError::Parameter(format!("reg must be a finite value >= 0, got {reg}")));
        }
        let out = args
            .out
            .clone()
            .or(file.out.map(rebase))
            .unwrap_or_else(|| PathBuf::from("out"));
        let results = args
            .results
            .clone()
            .or(file.results.map(rebase))
            .unwrap_or_else(|| out.join("results.csv"));
        let no_cache = args.no_cache || file.no_cache.unwrap_or(false);
        let cache_dir = if no_cache {
            None
        } else {
            Some(args.cache_dir.clone().or(file.cache_dir.map(rebase)).unwrap_or_else(|| out.join("cache")))
        };

        let cfg = Self {
            source,
            name,
            algorithms,
            sizes,
            k_isomap: args.k_isomap.or(file.k_isomap).unwrap_or(10),
            k_lle: args.k_lle.or(file.k_lle).unwrap_or(10),
            dim: args.dim.or(file.dim).unwrap_or(2),
            norm,
            reg,
            seed,
            trials: args.trials.or(file.trials).unwrap_or(100),
            oose_trials: args.oose_trials.or(file.oose_trials).unwrap_or(20),
            np_k: args.np_k.or(file.np_k).unwrap_or(20),
            learners,
            methods,
            out,
            results,
            append: args.append || file.append.unwrap_or(false),
            cache_dir,
            largest_component: args.largest_component || file.largest_component.unwrap_or(false),
            exact_folds: args.exact_folds || file.exact_folds.unwrap_or(false),
            save_embeddings: args.save_embeddings || file.save_embeddings.unwrap_or(false),
        };
        for (what, v) in [
            ("k_isomap", cfg.k_isomap),
            ("k_lle", cfg.k_lle),
            ("dim", cfg.dim),
            ("np_k", cfg.np_k),
            ("trials", cfg.trials),
            ("oose_trials", cfg.oose_trials),
        ] {
            if v == 0 {
                bail!(CoreError::Parameter(format!("{what} must be at least 1")));
            }
        }
        Ok(cfg)
    }

    pub fn algorithms_or(&self, default: &[Algorithm]) -> Vec<Algorithm> {
        if self.algorithms.is_empty() {
            default.to_vec()
        } else {
            self.algorithms.clone()
        }
    }

    pub fn require_sizes(&self) -> Result<&[usize]> {
        if self.sizes.is_empty() {
            bail!(CoreError::Parameter("no mask sizes: pass --sizes or set `sizes`".into()));
        }
        Ok(&self.sizes)
    }

    /// Checked against the loaded data, since `d` is unknown until then.
    pub fn check_sizes(&self, d: usize) -> Result<()> {
        if let Some(&m) = self.sizes.iter().find(|&&m| m > d) {
            bail!(CoreError::Parameter(format!("mask size {m} exceeds data dimension {d}")));
        }
        Ok(())
    }
}

pub fn load_source(source: &Source) -> Result<manimask_core::DataMatrix> {
    match source {
        Source::File { path, format, meta } => manimask_core::load_dataset(path, *format, meta.as_deref())
            .with_context(|| format!("loading {}", path.display())),
        Source::Synth { kind, n, seed, options } => {
            Ok(manimask_core::synth_dataset(*kind, *n, *seed, *options)?)
        }
    }
}
