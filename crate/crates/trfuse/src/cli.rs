//! Command-line pipeline: simulate an observation pair, fuse it, evaluate
//! the reconstruction, run the signature analysis, and self-check.
//!
//! Exit codes: 0 success, 2 usage error, 3 data/shape error, 4 numerical
//! failure.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::check::run_self_checks;
use crate::degradation::{
    add_noise, degrade, equal_band_groups, load_spectral_operator, rescale_to, DegradationModel,
    SimulationConfig,
};
use crate::error::{Error, Result};
use crate::io::{
    export_tensor_csv, import_tensor_csv, parse_band_groups, read_labels, read_matrix,
    read_tensor, write_matrix, write_tensor, write_trace_csv, SimulationManifest,
};
use crate::metrics::{evaluate, signature_analysis, QualityReport};
use crate::numerics::CGConfig;
use crate::solver::{rank_preset, FusionMode, FusionProblem, Solver, SolverConfig};
use crate::tensor::DenseTensor;

pub const OUT_DIR_ENV: &str = "TRFUSE_OUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "trfuse",
    about = "Coupled tensor-ring fusion of hyperspectral and multispectral images",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Degrade a high-resolution cube into a noisy (HSI, MSI) pair.
    Simulate(SimulateCmd),
    /// Fuse an (HSI, MSI) pair into a high-resolution cube.
    Fuse(FuseCmd),
    /// Score a reconstruction against a reference.
    Evaluate(EvaluateCmd),
    /// Compare ring-extracted class signatures against SVD references.
    Signatures(SignaturesCmd),
    /// Run the fast invariant self-test.
    Check(CheckCmd),
    /// Convert a flat CSV (plus shape) into an HTEN tensor.
    ImportCsv(ImportCsvCmd),
    /// Flatten an HTEN tensor into CSV with a shape sidecar.
    ExportCsv(ExportCsvCmd),
}

#[derive(Args, Debug)]
pub struct SimulateCmd {
    /// High-resolution hyperspectral cube (HTEN).
    pub hr_path: PathBuf,
    /// Spatial downsampling factor.
    #[arg(long, default_value_t = 4)]
    pub factor: usize,
    /// Averaging kernel size (>= factor).
    #[arg(long, default_value_t = 8)]
    pub kernel_size: usize,
    /// Number of MSI bands for the default contiguous band averaging.
    #[arg(long, default_value_t = 4)]
    pub msi_bands: usize,
    /// Explicit band groups, e.g. "0..23;23..46;46..68;68..90".
    #[arg(long)]
    pub band_groups: Option<String>,
    /// Spectral response file (text, one row per MSI band) instead of
    /// band averaging.
    #[arg(long, conflicts_with = "band_groups")]
    pub spectral_response: Option<PathBuf>,
    /// Signal-to-noise ratio in dB; "inf" for noise-free.
    #[arg(long, default_value = "30")]
    pub snr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Rescale the input so its range is [0, scale-max] before degrading.
    #[arg(long, default_value_t = 255.0)]
    pub scale_max: f64,
    /// Re-run an earlier simulation from its manifest (overrides the flags).
    #[arg(long)]
    pub from_manifest: Option<PathBuf>,
    /// Output directory (defaults to $TRFUSE_OUT_DIR or ".").
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FuseCmd {
    /// Observed HSI (HTEN).
    pub y_path: PathBuf,
    /// Observed MSI (HTEN).
    pub z_path: PathBuf,
    /// Simulation manifest describing the degradation operators.
    #[arg(long)]
    pub model: PathBuf,
    /// ctrf or nctrf.
    #[arg(long, default_value = "nctrf")]
    pub mode: String,
    /// Ring ranks "R1,R2,R3".
    #[arg(long, conflicts_with = "preset")]
    pub ranks: Option<String>,
    /// Named rank preset: snr20, snr30 or snr40.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, default_value_t = 50)]
    pub iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.001)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1.5)]
    pub rho: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub mu0: f64,
    #[arg(long, default_value_t = 1e6)]
    pub mu_max: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub cg_tol: f64,
    #[arg(long, default_value_t = 300)]
    pub cg_iters: usize,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateCmd {
    pub x_hat_path: PathBuf,
    pub x_ref_path: PathBuf,
    /// Spatial resolution ratio used by ERGAS.
    #[arg(long, default_value_t = 4.0)]
    pub ratio: f64,
    #[arg(long, default_value_t = 255.0)]
    pub peak: f64,
    /// Append the scores as a CSV row (header written when the file is new).
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SignaturesCmd {
    /// Pixel stack as an order-2 HTEN (pixels x bands).
    pub pixels_path: PathBuf,
    /// Text file with one class label per line.
    pub labels_path: PathBuf,
    /// Ring ranks "R1,R2,R3"; R3 must equal the class count.
    #[arg(long)]
    pub ranks: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct CheckCmd {
    /// Deliberately corrupt one unfolding (negative control).
    #[arg(long, hide = true)]
    pub corrupt_unfolding: bool,
}

#[derive(Args, Debug)]
pub struct ImportCsvCmd {
    pub csv_path: PathBuf,
    /// Shape "M,N,B"; defaults to the ".shape" sidecar.
    #[arg(long)]
    pub shape: Option<String>,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ExportCsvCmd {
    pub hten_path: PathBuf,
    #[arg(short, long)]
    pub out: PathBuf,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidArgument(_) => 2,
        Error::ShapeMismatch(_) | Error::ModeOutOfRange { .. } | Error::Io(_) | Error::Format(_) => 3,
        Error::Numerical(_) => 4,
    }
}

fn out_dir(explicit: Option<PathBuf>) -> PathBuf {
    explicit
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn parse_ranks(s: &str) -> Result<(usize, usize, usize)> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad rank {t:?}")))
        })
        .collect::<Result<_>>()?;
    if parts.len() != 3 {
        return Err(Error::InvalidArgument(format!(
            "ranks need three entries, got {s:?}"
        )));
    }
    Ok((parts[0], parts[1], parts[2]))
}

fn parse_shape(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad extent {t:?}")))
        })
        .collect()
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(cmd) => {
            let manifest = cmd_simulate(&cmd)?;
            println!("wrote {} and {}", manifest.y_file, manifest.z_file);
            Ok(())
        }
        Command::Fuse(cmd) => {
            let (x_hat_path, report) = cmd_fuse(&cmd)?;
            println!("wrote {}", x_hat_path.display());
            println!("{report}");
            Ok(())
        }
        Command::Evaluate(cmd) => {
            let q = cmd_evaluate(&cmd)?;
            println!("{q}");
            Ok(())
        }
        Command::Signatures(cmd) => {
            let report = cmd_signatures(&cmd)?;
            print!("{report}");
            Ok(())
        }
        Command::Check(cmd) => cmd_check(cmd.corrupt_unfolding),
        Command::ImportCsv(cmd) => {
            let shape = cmd.shape.as_deref().map(parse_shape).transpose()?;
            let t = import_tensor_csv(&cmd.csv_path, shape)?;
            write_tensor(&cmd.out, &t)?;
            println!("wrote {}", cmd.out.display());
            Ok(())
        }
        Command::ExportCsv(cmd) => {
            let t = read_tensor(&cmd.hten_path)?;
            export_tensor_csv(&cmd.out, &t)?;
            println!("wrote {}", cmd.out.display());
            Ok(())
        }
    }
}

/// Builds the degradation model, degrades the (rescaled) input, adds noise,
/// and writes the pair plus operators and the reproduction manifest.
pub fn cmd_simulate(cmd: &SimulateCmd) -> Result<SimulationManifest> {
    let dir = out_dir(cmd.out.clone());
    std::fs::create_dir_all(&dir)?;
    let hr_raw = read_tensor(&cmd.hr_path)?;
    if hr_raw.order() != 3 {
        return Err(Error::ShapeMismatch(format!(
            "expected an order-3 cube, got order {}",
            hr_raw.order()
        )));
    }

    // flags, or everything from a previous run's manifest
    let (factor, kernel_size, band_groups, spectral_file, snr_db, seed, scale_max) =
        match &cmd.from_manifest {
            Some(path) => {
                let m = SimulationManifest::read(path)?;
                (
                    m.spatial_factor,
                    m.kernel_size,
                    m.band_groups.clone(),
                    m.band_groups.is_empty().then(|| m.sibling(path, &m.p3_file)),
                    m.snr_db,
                    m.seed,
                    m.scale_max,
                )
            }
            None => {
                let b_full = hr_raw.shape()[2];
                let groups = match &cmd.band_groups {
                    Some(s) => parse_band_groups(s)?,
                    None if cmd.spectral_response.is_none() => {
                        equal_band_groups(b_full, cmd.msi_bands)?
                    }
                    None => Vec::new(),
                };
                (
                    cmd.factor,
                    cmd.kernel_size,
                    groups,
                    cmd.spectral_response.clone(),
                    cmd.snr,
                    cmd.seed,
                    cmd.scale_max,
                )
            }
        };

    let hr = rescale_to(&hr_raw, scale_max)?;
    let (m_full, n_full, b_full) = (hr.shape()[0], hr.shape()[1], hr.shape()[2]);
    let model = match &spectral_file {
        Some(path) => {
            let p3 = if path.extension().is_some_and(|e| e == "hten") {
                read_matrix(path)?
            } else {
                load_spectral_operator(path)?
            };
            if p3.ncols() != b_full {
                return Err(Error::ShapeMismatch(format!(
                    "spectral response has {} columns for {} bands",
                    p3.ncols(),
                    b_full
                )));
            }
            DegradationModel::with_spectral_matrix(m_full, n_full, factor, kernel_size, p3)?
        }
        None => DegradationModel::build(
            m_full,
            n_full,
            b_full,
            factor,
            kernel_size,
            band_groups.clone(),
        )?,
    };

    let (y0, z0) = degrade(&hr, &model)?;
    let noise = SimulationConfig {
        snr_db,
        seed,
        scale_max,
    };
    let y = add_noise(&y0, &noise);
    // an independent stream for the second observation
    let z = add_noise(
        &z0,
        &SimulationConfig {
            seed: seed.wrapping_add(1),
            ..noise
        },
    );

    let manifest = SimulationManifest {
        hr_shape: [m_full, n_full, b_full],
        spatial_factor: factor,
        kernel_size,
        band_groups,
        snr_db,
        seed,
        scale_max,
        p1_file: "p1.hten".into(),
        p2_file: "p2.hten".into(),
        p3_file: "p3.hten".into(),
        y_file: "y.hten".into(),
        z_file: "z.hten".into(),
        xref_file: "xref.hten".into(),
    };
    write_matrix(&dir.join(&manifest.p1_file), &model.p1)?;
    write_matrix(&dir.join(&manifest.p2_file), &model.p2)?;
    write_matrix(&dir.join(&manifest.p3_file), &model.p3)?;
    write_tensor(&dir.join(&manifest.y_file), &y)?;
    write_tensor(&dir.join(&manifest.z_file), &z)?;
    write_tensor(&dir.join(&manifest.xref_file), &hr)?;
    manifest.write(&dir.join("model.txt"))?;
    Ok(manifest)
}

/// Loads the pair and the model, runs the solver, writes the estimate and
/// the per-sweep trace. Returns the estimate path and a short textual
/// summary.
pub fn cmd_fuse(cmd: &FuseCmd) -> Result<(PathBuf, String)> {
    let dir = out_dir(cmd.out.clone());
    std::fs::create_dir_all(&dir)?;
    let y = read_tensor(&cmd.y_path)?;
    let z = read_tensor(&cmd.z_path)?;
    let manifest = SimulationManifest::read(&cmd.model)?;
    let model = DegradationModel {
        p1: read_matrix(&manifest.sibling(&cmd.model, &manifest.p1_file))?,
        p2: read_matrix(&manifest.sibling(&cmd.model, &manifest.p2_file))?,
        p3: read_matrix(&manifest.sibling(&cmd.model, &manifest.p3_file))?,
        spatial_factor: manifest.spatial_factor,
        kernel_size: manifest.kernel_size,
        band_groups: manifest.band_groups.clone(),
    };
    let mode = FusionMode::parse(&cmd.mode)?;
    let ranks = match (&cmd.ranks, &cmd.preset) {
        (Some(r), _) => parse_ranks(r)?,
        (None, Some(p)) => rank_preset(p).ok_or_else(|| {
            Error::InvalidArgument(format!("unknown preset {p:?} (snr20|snr30|snr40)"))
        })?,
        (None, None) => {
            return Err(Error::InvalidArgument(
                "either --ranks or --preset is required".into(),
            ))
        }
    };
    let cfg = SolverConfig {
        mode,
        lambda: cmd.lambda,
        rho: cmd.rho,
        mu0: cmd.mu0,
        mu_max: cmd.mu_max,
        outer_iters: cmd.iters,
        cg: CGConfig {
            tol: cmd.cg_tol,
            max_iter: cmd.cg_iters,
        },
        seed: cmd.seed,
    };
    let problem = FusionProblem::new(y, z, model, ranks)?;
    let mut solver = Solver::new(problem, cfg)?;
    let mut wall = Vec::with_capacity(cmd.iters);
    let start = Instant::now();
    for _ in 0..cmd.iters {
        let t0 = Instant::now();
        solver.sweep()?;
        wall.push(t0.elapsed().as_secs_f64());
    }
    let total = start.elapsed().as_secs_f64();
    let x_hat = solver.reconstruct()?;
    let x_hat_path = dir.join("x_hat.hten");
    write_tensor(&x_hat_path, &x_hat)?;
    write_trace_csv(&dir.join("trace.csv"), solver.trace(), mode, &wall)?;
    let last = solver.trace().last();
    let summary = format!(
        "mode={} ranks={},{},{} sweeps={} objective={:.6e} wall={:.2}s",
        mode.as_str(),
        ranks.0,
        ranks.1,
        ranks.2,
        cmd.iters,
        last.map_or(f64::NAN, |r| r.objective),
        total
    );
    Ok((x_hat_path, summary))
}

/// Scores a reconstruction and optionally appends a CSV row.
pub fn cmd_evaluate(cmd: &EvaluateCmd) -> Result<QualityReport> {
    let x_hat = read_tensor(&cmd.x_hat_path)?;
    let x_ref = read_tensor(&cmd.x_ref_path)?;
    let q = evaluate(&x_hat, &x_ref, cmd.ratio, cmd.peak)?;
    if let Some(csv) = &cmd.csv {
        append_csv_row(csv, &q)?;
    }
    Ok(q)
}

fn append_csv_row(path: &Path, q: &QualityReport) -> Result<()> {
    use std::io::Write as _;
    let fresh = !path.exists();
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    if fresh {
        writeln!(f, "{}", QualityReport::CSV_HEADER)?;
    }
    writeln!(f, "{}", q.csv_row())?;
    Ok(())
}

pub fn cmd_signatures(cmd: &SignaturesCmd) -> Result<crate::metrics::SignatureReport> {
    let pixels_t = read_tensor(&cmd.pixels_path)?;
    if pixels_t.order() != 2 {
        return Err(Error::ShapeMismatch(format!(
            "pixel stack must be order-2 (pixels x bands), got order {}",
            pixels_t.order()
        )));
    }
    let pixels = crate::tensor::Matrix::from_shape_vec(
        (pixels_t.shape()[0], pixels_t.shape()[1]),
        pixels_t.data().to_vec(),
    )
    .map_err(|e| Error::Format(e.to_string()))?;
    let labels = read_labels(&cmd.labels_path)?;
    let ranks = parse_ranks(&cmd.ranks)?;
    signature_analysis(&pixels, &labels, ranks, cmd.seed)
}

/// Prints one line per invariant; any failure surfaces as a numerical error
/// so the process exits non-zero.
pub fn cmd_check(corrupt_unfolding: bool) -> Result<()> {
    let report = run_self_checks(corrupt_unfolding)?;
    for name in &report.passed {
        println!("ok   {name}");
    }
    for name in &report.failed {
        println!("FAIL {name}");
    }
    if report.all_passed() {
        println!("all {} checks passed", report.passed.len());
        Ok(())
    } else {
        Err(Error::Numerical(format!(
            "{} of {} checks failed",
            report.failed.len(),
            report.passed.len() + report.failed.len()
        )))
    }
}

/// Convenience for tests and the FFI layer: evaluate two in-memory tensors.
pub fn evaluate_tensors(
    x_hat: &DenseTensor,
    x_ref: &DenseTensor,
    ratio: f64,
    peak: f64,
) -> Result<QualityReport> {
    evaluate(x_hat, x_ref, ratio, peak)
}
