use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use manimask_core::io::write_binary_dataset;
use manimask_core::metrics::neighbor_preservation_with;
use manimask_core::{
    apply_mask, build_clique_array, build_secants, embedding_error, exact_mask_global, exact_mask_local, geodesics,
    isomap, knn_graph, leave_one_out, lle_embed, lle_weights, maps_global, maps_local, neighbor_preservation,
    pcoa, random_mask, residual_variance, synth_dataset, DataFormat, DataMatrix, Embedding, Error as CoreError,
    EvalReport, LooConfig, Mask, Metric, NeighborGraph, OoseMethod, Sidecar, SynthKind, SynthOptions,
};
use rayon::prelude::*;

use crate::config::{default_meta_path, load_source, Algorithm, Learner, RunConfig};
use crate::output::{ensure_dir, write_embedding, write_mask, EmbeddingInfo, ResultsWriter};
use crate::refs::{self, RefParams};

/// Loads the data; with `largest_component` set, drops points outside the
/// largest component of the Isomap graph so full-data references exist.
fn prepare(cfg: &RunConfig) -> Result<DataMatrix> {
    let x = load_source(&cfg.source)?;
    cfg.check_sizes(x.d())?;
    if !cfg.largest_component {
        return Ok(x);
    }
    let geo = geodesics(&knn_graph(&x, cfg.k_isomap)?);
    if geo.connected() {
        return Ok(x);
    }
    let keep = geo.largest_component();
    eprintln!(
        "warning: graph has {} components; keeping the largest ({} of {} points)",
        geo.component_count(),
        keep.len(),
        x.n()
    );
    Ok(x.select_rows(&keep)?)
}

/// Masks for every requested size. Nested selectors run once at the
/// largest size; the exhaustive oracles run per size.
pub fn select_masks(x: &DataMatrix, alg: Algorithm, sizes: &[usize], cfg: &RunConfig, seed: u64) -> Result<Vec<Mask>> {
    let m_max = *sizes.last().expect("sizes checked non-empty");
    let full = match alg {
        Algorithm::MapsGlobal => {
            let a = build_secants(x, &knn_graph(x, cfg.k_isomap)?)?;
            maps_global(&a, m_max, cfg.norm)?
        }
        Algorithm::MapsLocal => {
            let b = build_clique_array(x, &knn_graph(x, cfg.k_lle)?)?;
            maps_local(&b, m_max)?
        }
        Algorithm::Pcoa => pcoa(x, m_max)?,
        Algorithm::Random => random_mask(x.d(), m_max, seed)?,
        Algorithm::ExactGlobal => {
            let a = build_secants(x, &knn_graph(x, cfg.k_isomap)?)?;
            return sizes
                .iter()
                .map(|&m| Ok(exact_mask_global(&a, m, cfg.norm)?.0))
                .collect();
        }
        Algorithm::ExactLocal => {
            let b = build_clique_array(x, &knn_graph(x, cfg.k_lle)?)?;
            return sizes.iter().map(|&m| Ok(exact_mask_local(&b, m)?.0)).collect();
        }
    };
    debug_assert!(alg.nested());
    sizes.iter().map(|&m| Ok(full.prefix(m)?)).collect()
}

pub fn mask(cfg: &RunConfig) -> Result<()> {
    let sizes = cfg.require_sizes()?;
    let x = load_source(&cfg.source)?;
    cfg.check_sizes(x.d())?;
    let algorithms = cfg.algorithms_or(&[Algorithm::MapsGlobal]);
    for &alg in &algorithms {
        let dir = if algorithms.len() == 1 {
            cfg.out.clone()
        } else {
            cfg.out.join(alg.name())
        };
        for mask in select_masks(&x, alg, sizes, cfg, cfg.seed)? {
            write_mask(&dir, &mask, x.image_shape())?;
        }
        eprintln!("{}: wrote {} masks to {}", alg.name(), sizes.len(), dir.display());
    }
    Ok(())
}

struct Scores {
    residual_variance: Option<f64>,
    neighbor_preservation: Option<f64>,
    embedding_error: Option<f64>,
    isomap: Option<(Embedding, Vec<usize>)>,
    lle: Option<Embedding>,
}

struct EvalContext<'a> {
    x: &'a DataMatrix,
    refs: &'a refs::References,
    np_graph: &'a NeighborGraph,
    cfg: &'a RunConfig,
}

impl EvalContext<'_> {
    fn score(&self, mask: &Mask) -> Result<Scores> {
        let cfg = self.cfg;
        let xm = apply_mask(self.x, mask)?;
        let mut s = Scores {
            residual_variance: None,
            neighbor_preservation: None,
            embedding_error: None,
            isomap: None,
            lle: None,
        };
        if cfg.learners.contains(&Learner::Isomap) {
            let out = isomap(&xm, cfg.k_isomap, cfg.dim, cfg.largest_component)?;
            if out.kept.len() == self.x.n() {
                s.residual_variance = Some(residual_variance(&self.refs.geodesics, &out.embedding)?);
                s.neighbor_preservation = Some(neighbor_preservation_with(self.np_graph, &out.embedding)?);
            } else {
                // masked graph split: score the component that was embedded
                let geo = self.refs.geodesics.restrict(&out.kept);
                s.residual_variance = Some(residual_variance(&geo, &out.embedding)?);
                let sub = self.x.select_rows(&out.kept)?;
                s.neighbor_preservation = Some(neighbor_preservation(&sub, &out.embedding, cfg.np_k)?);
            }
            s.isomap = Some((out.embedding, out.kept));
        }
        if cfg.learners.contains(&Learner::Lle) {
            let w = lle_weights(&xm, &knn_graph(&xm, cfg.k_lle)?, cfg.reg)?;
            let y = lle_embed(&w, cfg.dim)?;
            s.embedding_error = Some(embedding_error(&self.refs.weights, &y)?);
            s.lle = Some(y);
        }
        Ok(s)
    }
}

fn report(cfg: &RunConfig, alg: Algorithm, m: usize, k: usize, metric: Metric, values: &[f64]) -> Result<EvalReport> {
    let mut r = if values.len() == 1 {
        EvalReport::new(metric, values[0])?
    } else {
        EvalReport::from_trials(metric, values)?
    };
    r.dataset = cfg.name.clone();
    r.algorithm = alg.name().to_string();
    r.m = m;
    r.k = k;
    r.l = cfg.dim;
    r.seed = cfg.seed;
    Ok(r)
}

fn trial_seed(base: u64, t: usize) -> u64 {
    base.wrapping_add(t as u64)
}

pub fn evaluate(cfg: &RunConfig) -> Result<()> {
    let sizes = cfg.require_sizes()?;
    let x = prepare(cfg)?;
    let params = RefParams {
        k_isomap: cfg.k_isomap,
        k_lle: cfg.k_lle,
        dim: cfg.dim,
        reg: cfg.reg,
    };
    let refs = refs::load_or_compute(&x, &params, cfg.cache_dir.as_deref())?;
    let np_graph = knn_graph(&x, cfg.np_k)?;
    let ctx = EvalContext {
        x: &x,
        refs: &refs,
        np_graph: &np_graph,
        cfg,
    };
    let all_points: Vec<usize> = (0..x.n()).collect();
    let emb_dir = cfg.out.join("embeddings");
    if cfg.save_embeddings {
        let info = EmbeddingInfo {
            dataset: &cfg.name,
            algorithm: "full",
            learner: "isomap",
            m: x.d(),
            k: cfg.k_isomap,
            l: cfg.dim,
            n: x.n(),
            points: &all_points,
            eigenvalues: refs.isomap.eigenvalues(),
            warnings: refs.isomap.warnings(),
        };
        write_embedding(&emb_dir, "full_isomap", &refs.isomap, &info)?;
    }

    let mut out = ResultsWriter::open(&cfg.results, cfg.append)?;
    let algorithms = cfg.algorithms_or(&[Algorithm::MapsGlobal, Algorithm::MapsLocal, Algorithm::Pcoa, Algorithm::Random]);
    for &alg in &algorithms {
        let trials = if alg == Algorithm::Random { cfg.trials } else { 1 };
        // per trial: one mask per size
        let masks: Vec<Vec<Mask>> = (0..trials)
            .map(|t| select_masks(&x, alg, sizes, cfg, trial_seed(cfg.seed, t)))
            .collect::<Result<_>>()?;
        for (si, &m) in sizes.iter().enumerate() {
            let scores: Vec<Scores> = masks.par_iter().map(|per| ctx.score(&per[si])).collect::<Result<_>>()?;
            let first = &scores[0];
            let mut line = format!("{} m={m}:", alg.name());
            for (metric, k, pick) in [
                (Metric::ResidualVariance, cfg.k_isomap, (|s: &Scores| s.residual_variance) as fn(&Scores) -> Option<f64>),
                (Metric::NeighborPreservation, cfg.np_k, |s: &Scores| s.neighbor_preservation),
                (Metric::EmbeddingError, cfg.k_lle, |s: &Scores| s.embedding_error),
            ] {
                if pick(first).is_none() {
                    continue;
                }
                let values: Vec<f64> = scores.iter().filter_map(pick).collect();
                let r = report(cfg, alg, m, k, metric, &values)?;
                line += &format!(" {}={:.4}", metric.name(), r.value);
                out.row(&r)?;
            }
            eprintln!("{line}");
            if cfg.save_embeddings && alg != Algorithm::Random {
                save_cell_embeddings(cfg, &emb_dir, alg, m, first, &all_points)?;
            }
        }
    }
    Ok(())
}

fn save_cell_embeddings(
    cfg: &RunConfig,
    dir: &std::path::Path,
    alg: Algorithm,
    m: usize,
    s: &Scores,
    all_points: &[usize],
) -> Result<()> {
    if let Some((y, kept)) = &s.isomap {
        let info = EmbeddingInfo {
            dataset: &cfg.name,
            algorithm: alg.name(),
            learner: "isomap",
            m,
            k: cfg.k_isomap,
            l: cfg.dim,
            n: y.n(),
            points: kept,
            eigenvalues: y.eigenvalues(),
            warnings: y.warnings(),
        };
        write_embedding(dir, &format!("{}_m{m}_isomap", alg.name()), y, &info)?;
    }
    if let Some(y) = &s.lle {
        let info = EmbeddingInfo {
            dataset: &cfg.name,
            algorithm: alg.name(),
            learner: "lle",
            m,
            k: cfg.k_lle,
            l: cfg.dim,
            n: y.n(),
            points: all_points,
            eigenvalues: y.eigenvalues(),
            warnings: y.warnings(),
        };
        write_embedding(dir, &format!("{}_m{m}_lle", alg.name()), y, &info)?;
    }
    Ok(())
}

pub fn oose(cfg: &RunConfig) -> Result<()> {
    let sizes = cfg.require_sizes()?;
    let x = prepare(cfg)?;
    let methods = if cfg.methods.is_empty() {
        let mut m = vec![OoseMethod::Isomap, OoseMethod::Lle];
        if x.params().is_some() {
            m.push(OoseMethod::Gaze);
        }
        m
    } else {
        cfg.methods.clone()
    };
    if methods.contains(&OoseMethod::Gaze) && x.params().is_none() {
        bail!(CoreError::Parameter(
            "gaze estimation needs parameter columns (param_cols in the sidecar)".into()
        ));
    }
    let algorithms = cfg.algorithms_or(&[Algorithm::MapsGlobal, Algorithm::MapsLocal, Algorithm::Random]);
    let mut out = ResultsWriter::open(&cfg.results, cfg.append)?;
    for &method in &methods {
        let k = if method == OoseMethod::Isomap { cfg.k_isomap } else { cfg.k_lle };
        let loo = LooConfig {
            k,
            dim: cfg.dim,
            reg: cfg.reg,
            exact_folds: cfg.exact_folds,
        };
        for &alg in &algorithms {
            let trials = if alg == Algorithm::Random { cfg.oose_trials } else { 1 };
            let masks: Vec<Vec<Mask>> = (0..trials)
                .map(|t| select_masks(&x, alg, sizes, cfg, trial_seed(cfg.seed, t)))
                .collect::<Result<_>>()?;
            for (si, &m) in sizes.iter().enumerate() {
                let values: Vec<f64> = masks
                    .iter()
                    .map(|per| Ok(leave_one_out(&x, &per[si], method, &loo)?.value))
                    .collect::<Result<_>>()?;
                let r = report(cfg, alg, m, k, method.metric(), &values)?;
                eprintln!("{} {} m={m}: {}={:.6}", method.name(), alg.name(), r.metric, r.value);
                out.row(&r)?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// swiss_roll or translating_blob
    #[arg(long)]
    pub kind: String,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Blob image side length
    #[arg(long, default_value_t = 16)]
    pub grid: usize,
    /// Blob radius in pixels
    #[arg(long, default_value_t = 2.0)]
    pub radius: f64,
    /// Output data file
    #[arg(long)]
    pub out: PathBuf,
    /// csv or f64le; guessed from the extension otherwise
    #[arg(long)]
    pub format: Option<String>,
    /// Sidecar path (default: the output path with a .meta extension)
    #[arg(long)]
    pub meta: Option<PathBuf>,
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let kind: SynthKind = args.kind.parse()?;
    let x = synth_dataset(
        kind,
        args.n,
        args.seed,
        SynthOptions {
            grid: args.grid,
            radius: args.radius,
        },
    )?;
    let format = match &args.format {
        Some(f) => f.parse()?,
        None => DataFormat::from_path(&args.out),
    };
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    let meta = args.meta.clone().unwrap_or_else(|| default_meta_path(&args.out));
    match format {
        DataFormat::Csv => manimask_core::io::write_csv_dataset(&x, &args.out, Some(&meta))?,
        DataFormat::F64LeBinary => {
            write_binary_dataset(&x, &args.out)?;
            let sidecar = Sidecar {
                image_shape: x.image_shape(),
                param_cols: None,
            };
            fs::write(&meta, sidecar.render()).map_err(|e| CoreError::Io { path: meta.clone(), source: e })?;
            if x.params().is_some() {
                eprintln!("note: the binary format stores points only; write CSV to keep the generating parameters");
            }
        }
    }
    eprintln!("wrote {} points of dimension {} to {}", x.n(), x.d(), args.out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Mask JSON file
    #[arg(long)]
    pub mask: PathBuf,
    /// Image shape as HxW (e.g. 16x16)
    #[arg(long)]
    pub shape: Option<String>,
    /// Dataset sidecar to take image_shape from
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// Output PGM (default: the mask path with a .pgm extension)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_shape(s: &str) -> Result<(usize, usize)> {
    let bad = || CoreError::Parameter(format!("image shape must look like HxW, got `{s}`"));
    let (h, w) = s.split_once(['x', 'X', ',']).ok_or_else(bad)?;
    Ok((h.trim().parse().map_err(|_| bad())?, w.trim().parse().map_err(|_| bad())?))
}

pub fn render_mask(args: &RenderArgs) -> Result<()> {
    let text = fs::read_to_string(&args.mask).map_err(|e| CoreError::Io {
        path: args.mask.clone(),
        source: e,
    })?;
    let mask = Mask::from_json(&text)?;
    let (h, w) = match (&args.shape, &args.meta) {
        (Some(s), _) => parse_shape(s)?,
        (None, Some(meta)) => Sidecar::read(meta)?
            .image_shape
            .ok_or_else(|| CoreError::Metadata(format!("{} has no image_shape", meta.display())))?,
        (None, None) => bail!(CoreError::Parameter("pass --shape HxW or --meta with an image_shape".into())),
    };
    let out = args.out.clone().unwrap_or_else(|| args.mask.with_extension("pgm"));
    fs::write(&out, mask.to_pgm(h, w)?).map_err(|e| CoreError::Io {
        path: out.clone(),
        source: e,
    })?;
    Ok(())
}
