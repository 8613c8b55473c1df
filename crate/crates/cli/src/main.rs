//! `pdnet`: data generation, classical and learned reconstruction, training
//! and evaluation. Exit status 0 on success, 2 on usage errors, 1 on
//! runtime errors.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pdnet_core::cp::{cp_solve, CpConfig, SparseTransform};
use pdnet_core::metrics::MetricsReport;
use pdnet_core::mri::io::{read_cplx, read_kspace, read_mask, write_cplx, write_kspace, write_mask, write_pgm};
use pdnet_core::mri::{gen_phantom, gen_poisson_mask, simulate_acquisition, zero_fill_recon, ComplexImage, DEFAULT_CENTER_FRACTION};
use pdnet_core::nets::{reconstruct, Variant};
use pdnet_core::train::{build_dataset, load_checkpoint, save_checkpoint, validate, DataSource, MaskSpec, TrainConfig, Trainer};
use pdnet_core::Error;

#[derive(Parser)]
#[command(name = "pdnet", version, about = "Compressed-sensing MRI reconstruction with primal-dual methods")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn pow2_size(s: &str) -> Result<usize, String> {
    let n: usize = s.parse().map_err(|e| format!("{e}"))?;
    if n == 0 || !n.is_power_of_two() {
        return Err(format!("{n} is not a power of two"));
    }
    Ok(n)
}

#[derive(Clone, Copy, ValueEnum)]
enum TransformArg {
    Haar,
    Identity,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    #[value(name = "pdhg-cs")]
    PdhgCs,
    Cp,
    Pd,
}

impl From<ModelArg> for Variant {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::PdhgCs => Variant::PdhgCs,
            ModelArg::Cp => Variant::Cp,
            ModelArg::Pd => Variant::Pd,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write `phantom_00000.cplx`, `phantom_00001.cplx`, ... into a directory.
    GenPhantoms {
        #[arg(long)]
        count: usize,
        #[arg(long, value_parser = pow2_size)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Variable-density Poisson-disk sampling mask.
    GenMask {
        #[arg(long)]
        accel: f64,
        #[arg(long)]
        size: usize,
        #[arg(long, default_value_t = DEFAULT_CENTER_FRACTION)]
        center_frac: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Undersampled, noisy k-space of an image.
    Simulate {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        noise_sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Zero-filled inverse Fourier reconstruction.
    ReconZf {
        #[arg(long)]
        kspace: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write a 16-bit PGM of the magnitude.
        #[arg(long)]
        pgm: Option<PathBuf>,
    },
    /// Chambolle-Pock reconstruction with an l1 sparsity prior.
    ReconCp {
        #[arg(long)]
        kspace: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 500)]
        iters: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, value_enum, default_value_t = TransformArg::Haar)]
        transform: TransformArg,
        /// Haar decomposition depth.
        #[arg(long, default_value_t = 2)]
        levels: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        pgm: Option<PathBuf>,
        /// Per-iteration diagnostics as JSON lines.
        #[arg(long)]
        diagnostics: Option<PathBuf>,
    },
    /// Reconstruction with a trained unrolled network.
    ReconNet {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        kspace: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        /// Require the checkpoint to hold this model.
        #[arg(long, value_enum)]
        model: Option<ModelArg>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        pgm: Option<PathBuf>,
    },
    /// Train an unrolled network on synthetic phantoms or a directory of images.
    Train {
        #[arg(long, value_enum)]
        model: ModelArg,
        /// Directory of `.cplx` ground-truth images; synthetic phantoms otherwise.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        base_images: usize,
        #[arg(long, default_value_t = 64, value_parser = pow2_size)]
        size: usize,
        /// Skip the 8-fold dihedral augmentation.
        #[arg(long)]
        no_augment: bool,
        #[arg(long, default_value_t = 50)]
        epochs: usize,
        #[arg(long, default_value_t = 4)]
        batch_size: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 6.0)]
        accel: f64,
        #[arg(long, default_value_t = DEFAULT_CENTER_FRACTION)]
        center_frac: f64,
        #[arg(long, default_value_t = 0.005)]
        noise_sigma: f64,
        /// Defaults to 7/8 of the dataset.
        #[arg(long)]
        train_count: Option<usize>,
        /// Defaults to the samples after the training split.
        #[arg(long)]
        val_count: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch history as JSON lines.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// PSNR, SSIM and NMSE of a reconstruction against a reference.
    Eval {
        #[arg(long)]
        recon: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Also write the JSON object to this file.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parameter(_) | Error::UnsupportedSize { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

fn write_image(img: &ComplexImage, out: &Path, pgm: Option<&Path>) -> CmdResult {
    write_cplx(out, img)?;
    if let Some(p) = pgm {
        write_pgm(p, img)?;
    }
    Ok(())
}

fn gen_phantoms(count: usize, size: usize, seed: u64, out: &Path) -> CmdResult {
    std::fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    for i in 0..count {
        let img = gen_phantom(size, seed.wrapping_add(i as u64))?;
        write_cplx(out.join(format!("phantom_{i:05}.cplx")), &img)?;
    }
    Ok(())
}

fn recon_cp(args: ReconCpArgs) -> CmdResult {
    let f = read_kspace(&args.kspace)?;
    let mask = read_mask(&args.mask)?;
    let transform = match args.transform {
        TransformArg::Haar => SparseTransform::Haar(args.levels),
        TransformArg::Identity => SparseTransform::Identity,
    };
    let cfg = CpConfig { lambda: args.lambda, max_iters: args.iters, tolerance: args.tol, transform, ..Default::default() };
    let (img, diag) = cp_solve(&f, &mask, &cfg)?;
    write_image(&img, &args.out, args.pgm.as_deref())?;
    if let Some(p) = &args.diagnostics {
        let file = File::create(p).map_err(|e| io_err(p, e))?;
        diag.write_json_lines(BufWriter::new(file)).map_err(|e| io_err(p, e))?;
    }
    eprintln!("{} iterations, converged: {}", diag.iterations, diag.converged);
    Ok(())
}

struct ReconCpArgs {
    kspace: PathBuf,
    mask: PathBuf,
    lambda: f64,
    iters: usize,
    tol: f64,
    transform: TransformArg,
    levels: usize,
    out: PathBuf,
    pgm: Option<PathBuf>,
    diagnostics: Option<PathBuf>,
}

struct TrainArgs {
    model: ModelArg,
    data: Option<PathBuf>,
    base_images: usize,
    size: usize,
    no_augment: bool,
    cfg: TrainConfig,
    train_count: Option<usize>,
    val_count: Option<usize>,
    out: PathBuf,
    history: Option<PathBuf>,
}

fn train_cmd(a: TrainArgs) -> CmdResult {
    let source = match &a.data {
        Some(dir) => DataSource::Directory(dir.clone()),
        None => DataSource::Synthetic { count: a.base_images, size: a.size, seed: a.cfg.seed },
    };
    let spec = MaskSpec { accel: a.cfg.accel, center_fraction: a.cfg.center_fraction, seed: a.cfg.seed };
    let data = build_dataset(&source, spec, a.cfg.noise_sigma, !a.no_augment)?;
    let train_count = a.train_count.unwrap_or(data.len() * 7 / 8);
    let val_count = a.val_count.unwrap_or(data.len().saturating_sub(train_count));
    let cfg = TrainConfig { variant: a.model.into(), train_count, val_count, base_images: a.base_images, image_size: a.size, ..a.cfg };
    let mut trainer = Trainer::new(cfg.clone(), &data)?;
    for _ in 0..cfg.epochs {
        let r = trainer.run_epoch()?;
        eprintln!("epoch {} train {:.6e} val {:.6e} ({:.1}s)", r.epoch, r.train_loss, r.val_loss, r.wall_time_s);
    }
    let (ckpt, history) = trainer.finish();
    save_checkpoint(&a.out, &ckpt)?;
    if let Some(p) = &a.history {
        let file = File::create(p).map_err(|e| io_err(p, e))?;
        history.write_json_lines(BufWriter::new(file)).map_err(|e| io_err(p, e))?;
    }
    let val = &data[cfg.train_count..cfg.train_count + cfg.val_count];
    println!("{}", validate(&ckpt, val, Some(cfg.variant))?.to_json());
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::GenPhantoms { count, size, seed, out } => gen_phantoms(count, size, seed, &out),
        Command::GenMask { accel, size, center_frac, seed, out } => {
            let mask = gen_poisson_mask(size, size, accel, center_frac, seed)?;
            write_mask(&out, &mask)?;
            eprintln!("sampled fraction {:.4}", mask.sampled_fraction());
            Ok(())
        }
        Command::Simulate { image, mask, noise_sigma, seed, out } => {
            if !(noise_sigma >= 0.0) {
                return Err(Failure::Usage(format!("noise sigma must be >= 0, got {noise_sigma}")));
            }
            let img = read_cplx(&image)?;
            let mask = read_mask(&mask)?;
            write_kspace(&out, &simulate_acquisition(&img, &mask, noise_sigma, seed)?)?;
            Ok(())
        }
        Command::ReconZf { kspace, mask, out, pgm } => {
            let f = read_kspace(&kspace)?;
            let mask = read_mask(&mask)?;
            write_image(&zero_fill_recon(&f, &mask)?, &out, pgm.as_deref())
        }
        Command::ReconCp { kspace, mask, lambda, iters, tol, transform, levels, out, pgm, diagnostics } => {
            recon_cp(ReconCpArgs { kspace, mask, lambda, iters, tol, transform, levels, out, pgm, diagnostics })
        }
        Command::ReconNet { checkpoint, kspace, mask, model, out, pgm } => {
            let ckpt = load_checkpoint(&checkpoint)?;
            if let Some(m) = model {
                ckpt.expect_variant(m.into())?;
            }
            let f = read_kspace(&kspace)?;
            let mask = read_mask(&mask)?;
            write_image(&reconstruct(ckpt.params(), &f, &mask)?, &out, pgm.as_deref())
        }
        Command::Train {
            model,
            data,
            base_images,
            size,
            no_augment,
            epochs,
            batch_size,
            lr,
            accel,
            center_frac,
            noise_sigma,
            train_count,
            val_count,
            seed,
            out,
            history,
        } => {
            let cfg = TrainConfig {
                epochs,
                batch_size,
                learning_rate: lr,
                seed,
                accel,
                center_fraction: center_frac,
                noise_sigma,
                ..TrainConfig::default()
            };
            train_cmd(TrainArgs { model, data, base_images, size, no_augment, cfg, train_count, val_count, out, history })
        }
        Command::Eval { recon, reference, json } => {
            let report = MetricsReport::compute(&read_cplx(&reference)?, &read_cplx(&recon)?)?;
            let text = report.to_json().to_string();
            if let Some(p) = &json {
                std::fs::write(p, format!("{text}\n")).map_err(|e| io_err(p, e))?;
            }
            println!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
