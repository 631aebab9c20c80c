//! `ntksketch`: compute NTK / CNTK sketch features, fit ridge models on them
//! and evaluate the exact kernels.

mod config;

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use ntk_sketch::cntk_oracle::theta_cntk;
use ntk_sketch::cntk_sketch::CntkSketchState;
use ntk_sketch::features::{
    accuracy, batch_transform, class_ids, classify, encode_labels, load_dataset, load_features, predict,
    read_images, ridge_fit, save_features, DatasetFormat, Dtype, FeatureMatrix, RegularizerPreset, Samples,
};
use ntk_sketch::ntk_sketch::NtkSketchState;
use ntk_sketch::poly_approx::{
    choose_degrees, fit_ntk_polynomial, sup_error, taylor_coeffs_kappa0, taylor_coeffs_kappa1, TargetFn,
    DEFAULT_FIT_GRID,
};
use ntk_sketch::relu_ntk::{k_relu, theta_ntk};
use ntk_sketch::sketch::SparseVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::json;

use config::{build_config, SketchArgs, Target};

#[derive(Parser)]
#[command(name = "ntksketch", version, about = "Randomized NTK and CNTK feature maps")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON sketch configuration; explicit flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Map a dataset to sketch features.
    #[command(subcommand)]
    Features(FeaturesCmd),
    /// Fit ridge regression on training features and evaluate on test features.
    Regress {
        /// Feature file of the training split.
        #[arg(long)]
        train: PathBuf,
        /// Feature file of the test split.
        #[arg(long)]
        test: PathBuf,
        /// Regularizer; defaults to the `strong` preset (0.3).
        #[arg(long, conflicts_with = "preset")]
        lambda: Option<f64>,
        /// strong (0.3), medium (0.03) or weak (0.01).
        #[arg(long)]
        preset: Option<String>,
        /// Treat labels as real-valued targets instead of class ids.
        #[arg(long)]
        regression: bool,
    },
    /// Exact kernel matrices.
    #[command(subcommand)]
    Kernel(KernelCmd),
    /// Numerical self-checks.
    #[command(subcommand)]
    Validate(ValidateCmd),
    /// Tabulate kernel curves as CSV.
    #[command(subcommand)]
    Plot(PlotCmd),
}

#[derive(Subcommand)]
enum FeaturesCmd {
    /// Fully connected NTK features from CSV or LibSVM rows.
    Ntk {
        /// Dataset with the label in the last column (CSV) or first field (LIBSVM).
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = TextFormat::Csv)]
        format: TextFormat,
        /// Destination feature file.
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value_t = StoreType::F32)]
        dtype: StoreType,
        #[command(flatten)]
        sketch: SketchArgs,
    },
    /// Convolutional NTK features from an image batch file.
    Cntk {
        /// Image batch file.
        #[arg(long)]
        input: PathBuf,
        /// Destination feature file.
        #[arg(long)]
        output: PathBuf,
        /// Odd filter size q.
        #[arg(long, default_value_t = 3)]
        filter: usize,
        #[arg(long, value_enum, default_value_t = StoreType::F32)]
        dtype: StoreType,
        #[command(flatten)]
        sketch: SketchArgs,
    },
}

#[derive(Subcommand)]
enum KernelCmd {
    /// Θ_ntk between all pairs of rows, printed as CSV.
    ExactNtk {
        /// Dataset, as for `features ntk`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = TextFormat::Csv)]
        format: TextFormat,
        #[arg(long, default_value_t = 2)]
        depth: usize,
    },
    /// Θ_cntk between all pairs of images, printed as CSV.
    ExactCntk {
        /// Image batch file.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 2)]
        depth: usize,
        #[arg(long, default_value_t = 3)]
        filter: usize,
    },
}

#[derive(Subcommand)]
enum ValidateCmd {
    /// Degrees and sup-norm errors of the polynomial surrogates.
    Poly {
        #[arg(long, default_value_t = 2)]
        depth: usize,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        /// Degree of the fitted surrogate for K^(L)/(L+1).
        #[arg(long, default_value_t = 8)]
        fit_degree: usize,
        /// Uniform grid points on [-1, 1].
        #[arg(long, default_value_t = 10_000)]
        grid: usize,
    },
    /// Relative error of sketched NTK inner products on random pairs.
    Sketch {
        /// Input dimension of the random test vectors.
        #[arg(long, default_value_t = 16)]
        dim: usize,
        /// Random vector pairs to compare.
        #[arg(long, default_value_t = 20)]
        pairs: usize,
        #[command(flatten)]
        sketch: SketchArgs,
    },
}

#[derive(Subcommand)]
enum PlotCmd {
    /// K^(L)(α)/(L+1) on a uniform grid of [-1, 1].
    ReluNtk {
        /// Comma-separated depths.
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,16,32")]
        depths: Vec<usize>,
        #[arg(long, default_value_t = 201)]
        points: usize,
        /// Print K^(L) instead of K^(L)/(L+1).
        #[arg(long)]
        raw: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TextFormat {
    Csv,
    Libsvm,
}

#[derive(Clone, Copy, ValueEnum)]
enum StoreType {
    F32,
    F64,
}

impl From<StoreType> for Dtype {
    fn from(t: StoreType) -> Self {
        match t {
            StoreType::F32 => Dtype::F32,
            StoreType::F64 => Dtype::F64,
        }
    }
}

impl From<TextFormat> for DatasetFormat {
    fn from(f: TextFormat) -> Self {
        match f {
            TextFormat::Csv => DatasetFormat::Csv,
            TextFormat::Libsvm => DatasetFormat::LibSvm,
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let config_file = cli.config.as_deref();
    match cli.command {
        Command::Features(cmd) => features(cmd, config_file, cli.seed),
        Command::Regress {
            train,
            test,
            lambda,
            preset,
            regression,
        } => {
            let lambda = match (lambda, preset) {
                (Some(l), _) => l,
                (None, Some(name)) => RegularizerPreset::parse(&name)
                    .with_context(|| format!("unknown preset {name:?}"))?
                    .lambda(),
                (None, None) => RegularizerPreset::Strong.lambda(),
            };
            regress(&train, &test, lambda, regression)
        }
        Command::Kernel(cmd) => kernel(cmd),
        Command::Validate(cmd) => validate(cmd, config_file, cli.seed),
        Command::Plot(PlotCmd::ReluNtk { depths, points, raw }) => plot(&depths, points, raw),
    }
}

fn features(cmd: FeaturesCmd, config_file: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let (fm, output, dtype) = match cmd {
        FeaturesCmd::Ntk {
            input,
            format,
            output,
            dtype,
            sketch,
        } => {
            let data = load_dataset(&input, format.into())?;
            let cfg = build_config(&sketch, config_file, seed, Target::Ntk)?;
            let fm = match &data.samples {
                Samples::Dense(rows) => {
                    let d = rows[0].len();
                    batch_transform(&NtkSketchState::new(d, cfg)?, rows)?
                }
                Samples::Sparse(rows) => {
                    let d = rows[0].dim();
                    batch_transform(&NtkSketchState::new(d, cfg)?, rows)?
                }
                Samples::Images(_) => unreachable!("text formats never yield images"),
            };
            (fm.with_labels(data.labels)?, output, dtype)
        }
        FeaturesCmd::Cntk {
            input,
            output,
            filter,
            dtype,
            sketch,
        } => {
            let (images, labels) = read_images(&input)?;
            let (d1, d2, c) = images[0].dims();
            let cfg = build_config(&sketch, config_file, seed, Target::Cntk { d1, d2 })?;
            let state = CntkSketchState::new(d1, d2, c, filter, cfg)?;
            let mut fm = batch_transform(&state, &images)?;
            if let Some(labels) = labels {
                fm = fm.with_labels(labels)?;
            }
            (fm, output, dtype)
        }
    };
    save_features(&output, &fm, dtype.into())?;
    println!(
        "{}",
        json!({
            "rows": fm.rows(),
            "cols": fm.cols(),
            "kind": fm.provenance.kind,
            "config_hash": fm.provenance.config_hash,
            "seed": fm.provenance.seed,
            "output": output,
        })
    );
    Ok(())
}

fn labels_of(fm: &FeatureMatrix, path: &Path) -> Result<Vec<f64>> {
    fm.provenance
        .labels
        .clone()
        .with_context(|| format!("{} carries no labels", path.display()))
}

fn regress(train: &Path, test: &Path, lambda: f64, regression: bool) -> Result<()> {
    let z_train = load_features(train)?;
    let z_test = load_features(test)?;
    let y_train = labels_of(&z_train, train)?;
    let y_test = labels_of(&z_test, test)?;
    if regression {
        let targets = nalgebra_column(&y_train);
        let model = ridge_fit(&z_train, &targets, lambda)?;
        let pred = predict(&model, &z_test)?;
        let mse = pred.iter().zip(&y_test).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / y_test.len() as f64;
        println!("{}", json!({ "lambda": lambda, "test_rmse": mse.sqrt(), "test_rows": y_test.len() }));
    } else {
        let train_ids = class_ids(&y_train)?;
        let test_ids = class_ids(&y_test)?;
        let classes = train_ids.iter().chain(&test_ids).max().map_or(1, |m| m + 1).max(2);
        let model = ridge_fit(&z_train, &encode_labels(&train_ids, classes)?, lambda)?;
        let train_acc = accuracy(&classify(&model, &z_train)?, &train_ids);
        let test_acc = accuracy(&classify(&model, &z_test)?, &test_ids);
        println!(
            "{}",
            json!({
                "lambda": lambda,
                "classes": classes,
                "train_accuracy": train_acc,
                "test_accuracy": test_acc,
                "test_rows": test_ids.len(),
            })
        );
    }
    Ok(())
}

fn nalgebra_column(v: &[f64]) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_column_slice(v.len(), 1, v)
}

fn print_matrix(rows: &[Vec<f64>]) -> Result<()> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

fn kernel(cmd: KernelCmd) -> Result<()> {
    match cmd {
        KernelCmd::ExactNtk { input, format, depth } => {
            let data = load_dataset(&input, format.into())?;
            let rows: Vec<Vec<f64>> = match data.samples {
                Samples::Dense(rows) => rows,
                Samples::Sparse(rows) => rows.iter().map(SparseVector::to_dense).collect(),
                Samples::Images(_) => unreachable!("text formats never yield images"),
            };
            let gram = rows
                .iter()
                .map(|y| rows.iter().map(|z| theta_ntk(depth, y, z)).collect::<Result<Vec<_>, _>>())
                .collect::<Result<Vec<_>, _>>()?;
            print_matrix(&gram)
        }
        KernelCmd::ExactCntk { input, depth, filter } => {
            let (images, _) = read_images(&input)?;
            let gram = images
                .iter()
                .map(|y| images.iter().map(|z| theta_cntk(y, z, filter, depth)).collect::<Result<Vec<_>, _>>())
                .collect::<Result<Vec<_>, _>>()?;
            print_matrix(&gram)
        }
    }
}

fn validate(cmd: ValidateCmd, config_file: Option<&Path>, seed: Option<u64>) -> Result<()> {
    match cmd {
        ValidateCmd::Poly {
            depth,
            eps,
            fit_degree,
            grid,
        } => {
            let choice = choose_degrees(depth, eps)?;
            let e1 = sup_error(&taylor_coeffs_kappa1(choice.p), TargetFn::Kappa1, grid);
            let e0 = sup_error(&taylor_coeffs_kappa0(choice.p_prime), TargetFn::Kappa0, grid);
            let fit = fit_ntk_polynomial(depth, fit_degree, DEFAULT_FIT_GRID)?;
            let fit_err = sup_error(&fit.polynomial, TargetFn::NormalizedNtk { depth }, grid);
            println!(
                "{}",
                json!({
                    "depth": depth,
                    "eps": eps,
                    "p": choice.p,
                    "p_prime": choice.p_prime,
                    "kappa1_sup_error": e1,
                    "kappa1_bound": choice.kappa1_error_bound,
                    "kappa0_sup_error": e0,
                    "kappa0_bound": choice.kappa0_error_bound,
                    "fit_degree": fit_degree,
                    "fit_coefficients": fit.polynomial.coefficients(),
                    "fit_sup_error": fit_err,
                })
            );
        }
        ValidateCmd::Sketch { dim, pairs, sketch } => {
            if pairs == 0 {
                bail!("--pairs must be positive");
            }
            let cfg = build_config(&sketch, config_file, seed, Target::Ntk)?;
            let state = NtkSketchState::new(dim, cfg.clone())?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
            let mut errors = Vec::with_capacity(pairs);
            for _ in 0..pairs {
                let y: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                let z: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                let a = state.transform(&y)?;
                let b = state.transform(&z)?;
                let est: f64 = a.iter().zip(&b).map(|(u, v)| u * v).sum();
                let exact = theta_ntk(cfg.depth, &y, &z)?;
                errors.push((est - exact).abs() / exact.abs());
            }
            let failures = errors.iter().filter(|&&e| e > cfg.eps).count();
            errors.sort_by(f64::total_cmp);
            println!(
                "{}",
                json!({
                    "pairs": pairs,
                    "eps": cfg.eps,
                    "failure_fraction": failures as f64 / pairs as f64,
                    "median_relative_error": errors[pairs / 2],
                    "max_relative_error": errors[pairs - 1],
                    "config": cfg,
                })
            );
        }
    }
    Ok(())
}

fn plot(depths: &[usize], points: usize, raw: bool) -> Result<()> {
    if points < 2 {
        bail!("--points must be at least 2");
    }
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let header: Vec<String> = depths.iter().map(|l| format!("L{l}")).collect();
    writeln!(out, "alpha,{}", header.join(","))?;
    for k in 0..points {
        let alpha = -1.0 + 2.0 * k as f64 / (points - 1) as f64;
        let values = depths
            .iter()
            .map(|&l| {
                let v = k_relu(l, alpha)?;
                Ok(format!("{:.12}", if raw { v } else { v / (l as f64 + 1.0) }))
            })
            .collect::<Result<Vec<_>>>()?;
        writeln!(out, "{alpha:.6},{}", values.join(","))?;
    }
    Ok(())
}
