//! Command-line front end: data generation, the three trainers, sampling,
//! reconstruction, and inspection outputs. Every stochastic subcommand takes
//! `--seed`; identical arguments and seed give byte-identical artifacts.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fas::archive::{load_batch, save_batch, ArchivedModel, ModelArchive};
use fas::cd::{train_cd, CdTrainConfig, MixtureExpertSet};
use fas::datagen::{extract_patches, generate_edge_batch, EdgeImageParams, NoiseParams};
use fas::pgm::{read_pgm, write_pgm};
use fas::pl::{
    brute_force_joint, conditional_distribution, gibbs_chain, log_pseudo_likelihood, train_pl,
    PlModel, PlTrainConfig, QuantizedSpace,
};
use fas::simple::{train_simple, EdgeSource, FixedSource, SimpleTrainConfig, StudentTExpertSet};
use fas::viz::{render_filter_mosaic, violation_histogram, Histogram};
use fas::{DataBatch, Error, GrayImage, Result, RngStream};

#[derive(Parser)]
#[command(name = "fas", version, about = "Learn frequently-approximately-satisfied linear constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a batch of synthetic soft-edge images with anti-correlated noise.
    GenEdges(GenEdges),
    /// Extract noised square patches from grayscale PGM images.
    ExtractPatches(ExtractPatches),
    /// Train student-t experts by momentum gradient descent on the batch energy.
    TrainSimple(TrainSimple),
    /// Train student-t experts by exact pseudo-likelihood over quantized data.
    TrainPl(TrainPl),
    /// Train two-Gaussian mixture experts by one-step contrastive divergence.
    TrainCd(TrainCd),
    /// Run a single-site Gibbs chain under a quantized model.
    SampleGibbs(SampleGibbs),
    /// Reconstruct data cases through a mixture-expert model.
    Reconstruct(Reconstruct),
    /// Render learned filters as a PGM mosaic.
    RenderFilters(RenderFilters),
    /// Export a histogram of pooled filter outputs as CSV.
    #[command(name = "histogram")]
    HistogramCmd(HistogramArgs),
    /// Check the pseudo-likelihood code against brute-force enumeration.
    OracleCheck(OracleCheck),
}

#[derive(Args)]
struct GenEdges {
    /// Number of images.
    #[arg(long, default_value_t = 1000)]
    count: usize,
    /// Side length of the square images.
    #[arg(long, default_value_t = 16)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skip the anti-correlated noise step.
    #[arg(long)]
    no_noise: bool,
    /// Mask pixels outside the inscribed circle.
    #[arg(long)]
    circular_mask: bool,
    /// Output data-batch archive.
    #[arg(long)]
    out: PathBuf,
    /// Also write the first few images as PGM files into this directory.
    #[arg(long)]
    preview_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ExtractPatches {
    /// Source PGM images.
    #[arg(long, required = true, num_args = 1..)]
    images: Vec<PathBuf>,
    #[arg(long, default_value_t = 16)]
    patch_size: usize,
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skip the anti-correlated noise applied to each patch.
    #[arg(long)]
    no_noise: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainSimple {
    /// JSON training configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    updates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Disable energy-proportional case reweighting.
    #[arg(long)]
    no_reweight: bool,
    /// Number of filters.
    #[arg(long, default_value_t = 25)]
    filters: usize,
    /// Student-t sharpness parameter.
    #[arg(long, default_value_t = 100.0)]
    k: f64,
    /// Train on a fixed data-batch archive instead of fresh edge images.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Edge-image side length when no --data is given.
    #[arg(long, default_value_t = 16)]
    size: usize,
    /// Output model archive.
    #[arg(long)]
    out: PathBuf,
    /// Per-update mean-energy trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct TrainPl {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Optimizer: "ascent" or "conjugate_gradient".
    #[arg(long)]
    method: Option<String>,
    #[arg(long, default_value_t = 2)]
    filters: usize,
    #[arg(long, default_value_t = 100.0)]
    k: f64,
    /// Number of quantization levels (uniform on [0,1]).
    #[arg(long, default_value_t = 16)]
    levels: usize,
    /// Training data-batch archive; values are snapped to the lattice.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Per-iteration objective trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct TrainCd {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    updates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of mixture experts.
    #[arg(long, default_value_t = 256)]
    experts: usize,
    /// Training data-batch archive.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Per-update diagnostics trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct SampleGibbs {
    /// Model archive (must carry a pseudo-likelihood model).
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 1000)]
    sweeps: usize,
    #[arg(long, default_value_t = 100)]
    burn_in: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep every k-th visited state.
    #[arg(long, default_value_t = 1)]
    thin: usize,
    /// Output data-batch archive of visited states.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Reconstruct {
    /// Model archive (must carry a mixture-expert model).
    #[arg(long)]
    model: PathBuf,
    /// Data-batch archive of cases to reconstruct.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output data-batch archive of reconstructions.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RenderFilters {
    #[arg(long)]
    model: PathBuf,
    /// Patch width; filters must have length width * height.
    #[arg(long, default_value_t = 16)]
    width: usize,
    #[arg(long, default_value_t = 16)]
    height: usize,
    /// Mosaic columns.
    #[arg(long, default_value_t = 5)]
    cols: usize,
    /// Output PGM file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct HistogramArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 64)]
    bins: usize,
    /// Output CSV file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OracleCheck {
    /// Dimension of the reference model.
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    levels: usize,
    #[arg(long, default_value_t = 2)]
    experts: usize,
    #[arg(long, default_value_t = 100.0)]
    k: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Maximum allowed deviation from the enumeration oracle.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenEdges(a) => gen_edges(a),
        Command::ExtractPatches(a) => extract_patches_cmd(a),
        Command::TrainSimple(a) => train_simple_cmd(a),
        Command::TrainPl(a) => train_pl_cmd(a),
        Command::TrainCd(a) => train_cd_cmd(a),
        Command::SampleGibbs(a) => sample_gibbs_cmd(a),
        Command::Reconstruct(a) => reconstruct_cmd(a),
        Command::RenderFilters(a) => render_filters_cmd(a),
        Command::HistogramCmd(a) => histogram_cmd(a),
        Command::OracleCheck(a) => oracle_check_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn load_config<T: serde::de::DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p)?;
            serde_json::from_str(&text).map_err(|e| Error::Archive(format!("{}: {e}", p.display())))
        }
    }
}

fn write_csv(path: &PathBuf, header: &str, rows: impl Iterator<Item = String>) -> Result<()> {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

fn gen_edges(a: GenEdges) -> Result<()> {
    let params = EdgeImageParams {
        width: a.size,
        height: a.size,
        noise_self: if a.no_noise { 0.0 } else { 0.4 },
        noise_neighbor: if a.no_noise { 0.0 } else { 0.1 },
        circular_mask: a.circular_mask,
        ..EdgeImageParams::default()
    };
    let rng = RngStream::from_seed(a.seed);
    let batch = generate_edge_batch(&params, a.count, &rng)?;
    if let Some(dir) = &a.preview_dir {
        fs::create_dir_all(dir)?;
        for i in 0..batch.count().min(16) {
            let img = GrayImage::from_pixels(a.size, a.size, batch.case(i).to_vec())?;
            write_pgm(&img, dir.join(format!("edge_{i:02}.pgm")), 255)?;
        }
    }
    save_batch(&batch, &a.out)?;
    println!("wrote {} images of {} pixels to {}", batch.count(), batch.n(), a.out.display());
    Ok(())
}

fn extract_patches_cmd(a: ExtractPatches) -> Result<()> {
    let images: Vec<GrayImage> = a
        .images
        .iter()
        .map(read_pgm)
        .collect::<Result<_>>()?;
    let noise = if a.no_noise { None } else { Some(NoiseParams::default()) };
    let mut rng = RngStream::from_seed(a.seed);
    let batch = extract_patches(&images, a.patch_size, a.count, &mut rng, noise)?;
    save_batch(&batch, &a.out)?;
    println!("wrote {} patches of {} pixels to {}", batch.count(), batch.n(), a.out.display());
    Ok(())
}

fn train_simple_cmd(a: TrainSimple) -> Result<()> {
    let mut config: SimpleTrainConfig = load_config(&a.config)?;
    if let Some(v) = a.learning_rate {
        config.learning_rate = v;
    }
    if let Some(v) = a.momentum {
        config.momentum = v;
    }
    if let Some(v) = a.batch_size {
        config.batch_size = v;
    }
    if let Some(v) = a.updates {
        config.updates = v;
    }
    if let Some(v) = a.seed {
        config.seed = v;
    }
    if a.no_reweight {
        config.reweight_by_energy = false;
    }
    config.validate()?;

    let data = a.data.as_ref().map(load_batch).transpose()?;
    let n = match &data {
        Some(b) => b.n(),
        None => a.size * a.size,
    };
    let mut init_rng = RngStream::new(config.seed, 1);
    let model = StudentTExpertSet::random_init(n, a.filters, a.k, &mut init_rng)?;

    let (trained, trace) = match &data {
        Some(batch) => train_simple(model, &mut FixedSource(batch), &config)?,
        None => {
            let params = EdgeImageParams {
                width: a.size,
                height: a.size,
                ..EdgeImageParams::default()
            };
            train_simple(model, &mut EdgeSource::new(params), &config)?
        }
    };
    if let Some(path) = &a.trace {
        write_csv(
            path,
            "update,mean_energy",
            trace.iter().enumerate().map(|(u, e)| format!("{u},{e}")),
        )?;
    }
    ModelArchive::new(ArchivedModel::Simple { model: trained, config }).save(&a.out)?;
    println!("wrote model to {}", a.out.display());
    Ok(())
}

fn train_pl_cmd(a: TrainPl) -> Result<()> {
    let mut config: PlTrainConfig = load_config(&a.config)?;
    if let Some(v) = a.learning_rate {
        config.learning_rate = v;
    }
    if let Some(v) = a.momentum {
        config.momentum = v;
    }
    if let Some(v) = a.iterations {
        config.iterations = v;
    }
    if let Some(v) = a.seed {
        config.seed = v;
    }
    if let Some(m) = &a.method {
        config.method = serde_json::from_value(serde_json::Value::String(m.clone()))
            .map_err(|_| Error::InvalidInput(format!("unknown method {m}")))?;
    }
    config.validate()?;

    let raw = load_batch(&a.data)?;
    let space = QuantizedSpace::uniform(a.levels)?;
    let (batch, max_snap) = space.snap_batch(&raw);
    if max_snap > 0.0 {
        eprintln!("snapped data to the lattice (max distance {max_snap:.3e})");
    }
    let mut init_rng = RngStream::new(config.seed, 1);
    let experts = StudentTExpertSet::random_init(batch.n(), a.filters, a.k, &mut init_rng)?;
    let model = PlModel::new(experts, space);
    let (trained, trace) = train_pl(model, &batch, &config)?;
    if let Some(path) = &a.trace {
        write_csv(
            path,
            "iter,objective",
            trace.iter().enumerate().map(|(i, o)| format!("{i},{o}")),
        )?;
    }
    ModelArchive::new(ArchivedModel::Pl { model: trained, config }).save(&a.out)?;
    println!("wrote model to {}", a.out.display());
    Ok(())
}

fn train_cd_cmd(a: TrainCd) -> Result<()> {
    let mut config: CdTrainConfig = load_config(&a.config)?;
    if let Some(v) = a.learning_rate {
        config.learning_rate = v;
    }
    if let Some(v) = a.momentum {
        config.momentum = v;
    }
    if let Some(v) = a.batch_size {
        config.batch_size = v;
    }
    if let Some(v) = a.updates {
        config.updates = v;
    }
    if let Some(v) = a.seed {
        config.seed = v;
    }
    config.validate()?;

    let batch = load_batch(&a.data)?;
    let mut init_rng = RngStream::new(config.seed, 1);
    let model = MixtureExpertSet::random_init(batch.n(), a.experts, &mut init_rng);
    let (trained, trace) = train_cd(model, &mut FixedSource(&batch), &config)?;
    if let Some(path) = &a.trace {
        write_csv(
            path,
            "update,mean_recon_error,mean_responsibility,lambda_norm",
            trace.iter().map(|d| {
                format!(
                    "{},{},{},{}",
                    d.update, d.mean_recon_error, d.mean_responsibility, d.lambda_norm
                )
            }),
        )?;
    }
    ModelArchive::new(ArchivedModel::Cd { model: trained, config }).save(&a.out)?;
    println!("wrote model to {}", a.out.display());
    Ok(())
}

fn sample_gibbs_cmd(a: SampleGibbs) -> Result<()> {
    if a.thin == 0 {
        return Err(Error::InvalidInput("thinning factor must be >= 1".into()));
    }
    let archive = ModelArchive::load(&a.model)?;
    let model = match archive.body {
        ArchivedModel::Pl { model, .. } => model,
        _ => return Err(Error::InvalidInput("sample-gibbs needs a pseudo-likelihood model".into())),
    };
    let mut rng = RngStream::from_seed(a.seed);
    let start = vec![model.space.level(0); model.n()];
    let states = gibbs_chain(&model, &start, a.sweeps, a.burn_in, &mut rng)?;
    let mut batch = DataBatch::empty(model.n());
    for state in states.iter().step_by(a.thin) {
        batch.push_case(state)?;
    }
    save_batch(&batch, &a.out)?;
    println!("wrote {} states to {}", batch.count(), a.out.display());
    Ok(())
}

fn reconstruct_cmd(a: Reconstruct) -> Result<()> {
    let archive = ModelArchive::load(&a.model)?;
    let model = match archive.body {
        ArchivedModel::Cd { model, .. } => model,
        _ => return Err(Error::InvalidInput("reconstruct needs a mixture-expert model".into())),
    };
    let batch = load_batch(&a.data)?;
    if batch.n() != model.n {
        return Err(Error::DimensionMismatch { expected: model.n, got: batch.n() });
    }
    let map = model.reconstruction_map()?;
    let mut rng = RngStream::from_seed(a.seed);
    let mut out = DataBatch::empty(model.n);
    for case in batch.cases() {
        let rec = model.reconstruct_with(case, &map, &mut rng)?;
        out.push_case(&rec.d_hat)?;
    }
    save_batch(&out, &a.out)?;
    println!("wrote {} reconstructions to {}", out.count(), a.out.display());
    Ok(())
}

fn model_filters(body: &ArchivedModel) -> Vec<Vec<f64>> {
    match body {
        ArchivedModel::Simple { model, .. } => model.weights.clone(),
        ArchivedModel::Pl { model, .. } => model.experts.weights.clone(),
        ArchivedModel::Cd { model, .. } => (0..model.m())
            .map(|j| model.lambda.column(j).iter().cloned().collect())
            .collect(),
    }
}

fn render_filters_cmd(a: RenderFilters) -> Result<()> {
    let archive = ModelArchive::load(&a.model)?;
    let filters = model_filters(&archive.body);
    let mosaic = render_filter_mosaic(&filters, a.width, a.height, a.cols)?;
    write_pgm(&mosaic, &a.out, 255)?;
    println!("wrote {} filters to {}", filters.len(), a.out.display());
    Ok(())
}

fn histogram_cmd(a: HistogramArgs) -> Result<()> {
    let archive = ModelArchive::load(&a.model)?;
    let batch = load_batch(&a.data)?;
    let hist = match &archive.body {
        ArchivedModel::Simple { model, .. } => violation_histogram(model, &batch, a.bins)?,
        ArchivedModel::Pl { model, .. } => violation_histogram(&model.experts, &batch, a.bins)?,
        ArchivedModel::Cd { model, .. } => {
            let mut outputs = Vec::with_capacity(model.m() * batch.count());
            for case in batch.cases() {
                outputs.extend(model.violations(case)?);
            }
            Histogram::symmetric(&outputs, a.bins)?
        }
    };
    fs::write(&a.out, hist.to_csv())?;
    println!("wrote {} bins to {}", hist.counts.len(), a.out.display());
    Ok(())
}

fn oracle_check_cmd(a: OracleCheck) -> Result<()> {
    let mut rng = RngStream::from_seed(a.seed);
    let experts = StudentTExpertSet::random_init(a.n, a.experts, a.k, &mut rng)?;
    let model = PlModel::new(experts, QuantizedSpace::uniform(a.levels)?);
    let table = brute_force_joint(&model)?;

    let mass: f64 = table.probs.iter().sum();
    let mass_dev = (mass - 1.0).abs();

    let mut cond_dev = 0.0_f64;
    let mut probe = DataBatch::empty(model.n());
    for s in 0..table.probs.len() {
        let d = table.state(s, &model.space);
        for i in 0..model.n() {
            let fast = conditional_distribution(&model, &d, i)?;
            let exact = table.conditional(&d, i, &model.space)?;
            for (p, q) in fast.iter().zip(&exact) {
                cond_dev = cond_dev.max((p - q).abs());
            }
        }
        probe.push_case(&d)?;
    }

    let pl = log_pseudo_likelihood(&model, &probe)?;
    let mut pl_exact = 0.0;
    for case in probe.cases() {
        for i in 0..model.n() {
            let cond = table.conditional(case, i, &model.space)?;
            let t = model.space.index_of(case[i], i)?;
            pl_exact += cond[t].ln();
        }
    }
    let pl_dev = (pl - pl_exact).abs();

    println!("joint mass deviation:        {mass_dev:.3e}");
    println!("max conditional deviation:   {cond_dev:.3e}");
    println!("pseudo-likelihood deviation: {pl_dev:.3e}");
    if mass_dev > 1e-12 || cond_dev > a.tol || pl_dev > a.tol {
        return Err(Error::InvalidInput(format!(
            "oracle deviation exceeds tolerance {:.1e}",
            a.tol
        )));
    }
    println!("oracle check passed");
    Ok(())
}
