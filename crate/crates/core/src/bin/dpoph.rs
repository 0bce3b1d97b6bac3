use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use dpoph::bench::{
    ground_truth, ground_truth_weighted, prepare, retrieval_csv, retrieval_sweep, retrieve,
    run_experiment, DataConfig, PrivacyRecord, SignatureFile, SignatureHeader,
};
use dpoph::data::{binarize, load_libsvm, WeightedDataset};
use dpoph::estimate::{mse_csv, mse_sim, MseConfig};
use dpoph::privacy::discount_factor;
use dpoph::randomness::{derive_seed, stream, Purpose};
use dpoph::sketch::Scheme;
use dpoph::{Error, Hasher, Result, Variant};

#[derive(Parser)]
#[command(name = "dpoph", version, about = "Differentially private hashing for Jaccard similarity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Discount factors N over a grid of f.
    Tables(TablesArgs),
    /// Non-private b-bit signatures of a dataset.
    Sketch(SketchArgs),
    /// Privatized signatures of a dataset.
    DpSketch(DpSketchArgs),
    /// End-to-end retrieval benchmark.
    Retrieve(RetrieveArgs),
    /// MSE study of the debiased estimator.
    MseSim(MseArgs),
    /// Retrieval metrics from stored signatures.
    Eval(EvalArgs),
    /// Runs a TOML experiment config.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct TablesArgs {
    #[arg(long = "D")]
    dim: u32,
    #[arg(long = "K")]
    bins: u32,
    /// Nonzero counts to tabulate.
    #[arg(long = "f-min", value_delimiter = ',', required = true)]
    f: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    b: Vec<u8>,
    #[arg(long, default_value_t = 1e-6)]
    delta: f64,
    #[arg(long, value_delimiter = ',', default_value = "oph-fix,oph-re,mh")]
    variant: Vec<Variant>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DataArgs {
    /// libsvm file, optionally gzipped.
    #[arg(long)]
    dataset: PathBuf,
    /// Dimension override.
    #[arg(long = "D")]
    dim: Option<u32>,
    /// Zero-pad D up to a multiple of K.
    #[arg(long)]
    pad: bool,
}

#[derive(Args)]
struct HashArgs {
    #[arg(long = "K")]
    bins: u32,
    #[arg(long, default_value_t = 1)]
    b: u8,
    #[arg(long)]
    variant: Variant,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SketchArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    hash: HashArgs,
    /// Binary signature file.
    #[arg(long)]
    out: PathBuf,
    /// Also write the CSV debug form.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct DpSketchArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    hash: HashArgs,
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value_t = 1e-6)]
    delta: f64,
    #[arg(long = "f-min", default_value_t = 1)]
    f_min: u32,
    /// Seed of the response noise; derived from --seed when absent.
    #[arg(long)]
    noise_seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct RetrieveArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Query file; otherwise queries are split off the dataset.
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long = "D")]
    dim: Option<u32>,
    #[arg(long)]
    pad: bool,
    #[arg(long = "n-queries")]
    n_queries: Option<usize>,
    #[arg(long = "n-database")]
    n_database: Option<usize>,
    #[arg(long = "K", value_delimiter = ',')]
    bins: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    b: Vec<u8>,
    #[arg(long, value_delimiter = ',', required = true)]
    variant: Vec<Variant>,
    /// Privacy levels; `inf` disables the response noise.
    #[arg(long, value_delimiter = ',', required = true)]
    epsilon: Vec<f64>,
    #[arg(long, default_value_t = 1e-6)]
    delta: f64,
    #[arg(long = "f-min", default_value_t = 1)]
    f_min: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    runs: usize,
    #[arg(long = "R", value_delimiter = ',', default_value = "10")]
    r_grid: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    top: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MseArgs {
    #[arg(long = "D")]
    dim: u32,
    #[arg(long = "K")]
    bins: u32,
    #[arg(long, default_value_t = 1)]
    b: u8,
    #[arg(long = "f-min", value_delimiter = ',', required = true)]
    f: Vec<u32>,
    #[arg(long, value_delimiter = ',', required = true)]
    epsilon: Vec<f64>,
    #[arg(long, default_value_t = 1e-6)]
    delta: f64,
    #[arg(long, value_delimiter = ',', default_value = "oph-fix,oph-re,mh")]
    variant: Vec<Variant>,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    jaccard: f64,
    /// Replicates.
    #[arg(long, default_value_t = 10_000)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Database vectors the database signatures were computed from.
    #[arg(long)]
    dataset: PathBuf,
    /// Query vectors the query signatures were computed from.
    #[arg(long)]
    queries: PathBuf,
    #[arg(long = "D")]
    dim: Option<u32>,
    #[arg(long)]
    db_sigs: PathBuf,
    #[arg(long)]
    query_sigs: PathBuf,
    #[arg(long = "R", value_delimiter = ',', default_value = "10")]
    r_grid: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    top: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn tables(a: TablesArgs) -> Result<()> {
    let mut csv = String::from("variant,D,K,f,b,delta,N\n");
    for &v in &a.variant {
        for &b in &a.b {
            for &f in &a.f {
                let delta = if v.is_pure() { 0.0 } else { a.delta };
                let n = discount_factor(a.dim, a.bins, f, b, delta, v)?.n;
                csv.push_str(&format!("{v},{},{},{f},{b},{delta},{n}\n", a.dim, a.bins));
            }
        }
    }
    emit(a.out.as_deref(), &csv)
}

fn load_data(d: &DataArgs, bins: u32) -> Result<WeightedDataset> {
    let data = load_libsvm(&d.dataset, d.dim)?;
    if d.pad {
        let dim = data.dim().div_ceil(bins) * bins;
        data.pad_to(dim)
    } else {
        Ok(data)
    }
}

fn save(file: &SignatureFile, out: &Path, csv: Option<&Path>) -> Result<()> {
    file.save(out)?;
    if let Some(c) = csv {
        emit(Some(c), &file.to_csv())?;
    }
    eprintln!("wrote {} signatures to {}", file.ids.len(), out.display());
    Ok(())
}

fn sketch(a: SketchArgs) -> Result<()> {
    let data = load_data(&a.data, a.hash.bins)?;
    let h = Hasher::new(a.hash.variant, a.hash.seed, data.dim(), a.hash.bins, a.hash.b)?;
    let sigs = data
        .vectors()
        .par_iter()
        .map(|u| h.sketch_weighted(u))
        .collect::<Result<Vec<_>>>()?;
    let meta = match sigs.first() {
        Some(s) => *s.meta(),
        None => return Err(Error::config("dataset", "no vectors")),
    };
    let file = SignatureFile::new(SignatureHeader { meta, privacy: None }, data.ids().to_vec(), sigs)?;
    save(&file, &a.out, a.csv.as_deref())
}

fn dp_sketch(a: DpSketchArgs) -> Result<()> {
    let data = load_data(&a.data, a.hash.bins)?;
    let h = Hasher::new(a.hash.variant, a.hash.seed, data.dim(), a.hash.bins, a.hash.b)?;
    let delta = if a.hash.variant.is_pure() { 0.0 } else { a.delta };
    let p = h.privatizer(a.epsilon, delta, a.f_min)?;
    let noise = a
        .noise_seed
        .unwrap_or_else(|| derive_seed(a.hash.seed, Purpose::Noise, 0, 0));
    let sigs = data
        .vectors()
        .par_iter()
        .enumerate()
        .map(|(i, u)| {
            let mut rng = stream(derive_seed(noise, Purpose::Noise, 0, i as u64));
            h.dp_sketch_weighted(u, &p, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let meta = match sigs.first() {
        Some(s) => *s.meta(),
        None => return Err(Error::config("dataset", "no vectors")),
    };
    let privacy = Some(PrivacyRecord {
        epsilon: a.epsilon,
        delta,
        n: p.discount().n,
        noise_seed: noise,
    });
    eprintln!("N = {}, eps' = {}", p.discount().n, p.eps_prime());
    let file = SignatureFile::new(SignatureHeader { meta, privacy }, data.ids().to_vec(), sigs)?;
    save(&file, &a.out, a.csv.as_deref())
}

fn retrieve_cmd(a: RetrieveArgs) -> Result<()> {
    if a.bins.is_empty() {
        return Err(Error::config("K", "required"));
    }
    let data = DataConfig {
        dataset: Some(a.dataset.clone()),
        queries: a.queries.clone(),
        synthetic: None,
        dim: a.dim,
        pad: a.pad,
        n_queries: a.n_queries,
        n_database: a.n_database,
    };
    let weighted = a.variant.contains(&Variant::BcwsRand);
    let prep = prepare(&data, Path::new("."), &a.bins, a.f_min, a.top, weighted, a.seed)?;
    eprintln!(
        "{} queries, {} database vectors, D = {}",
        prep.queries.len(),
        prep.database.len(),
        prep.dim
    );
    let mut rows = Vec::new();
    for &v in &a.variant {
        for &k in &a.bins {
            for &b in &a.b {
                rows.extend(retrieval_sweep(
                    &prep, v, k, b, &a.epsilon, a.delta, a.f_min, a.runs, &a.r_grid, a.seed,
                )?);
            }
        }
    }
    emit(a.out.as_deref(), &retrieval_csv(&rows))
}

fn mse_cmd(a: MseArgs) -> Result<()> {
    let mut cfg = MseConfig::new(a.dim, a.bins, a.b, a.f, a.epsilon);
    cfg.delta = a.delta;
    cfg.variants = a.variant;
    cfg.jaccard = a.jaccard;
    cfg.replicates = a.runs;
    cfg.seed = a.seed;
    emit(a.out.as_deref(), &mse_csv(&mse_sim(&cfg)?))
}

fn eval(a: EvalArgs) -> Result<()> {
    let db_file = SignatureFile::load(&a.db_sigs)?;
    let q_file = SignatureFile::load(&a.query_sigs)?;
    let dim = db_file.header.meta.dim;
    let db = load_libsvm(&a.dataset, Some(a.dim.unwrap_or(dim)))?;
    let qs = load_libsvm(&a.queries, Some(a.dim.unwrap_or(dim)))?;
    let pick = |d: &WeightedDataset, ids: &[usize], what: &str| -> Result<WeightedDataset> {
        let pos = ids
            .iter()
            .map(|&id| {
                d.ids()
                    .iter()
                    .position(|&x| x == id)
                    .ok_or_else(|| Error::config(what, format!("signature id {id} not in the data")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(d.select(&pos))
    };
    let db = pick(&db, &db_file.ids, "dataset")?;
    let qs = pick(&qs, &q_file.ids, "queries")?;
    let truth = match db_file.header.meta.scheme {
        Scheme::Bcws | Scheme::DpBcws => {
            ground_truth_weighted(qs.vectors(), db.vectors(), db.ids(), a.top)?
        }
        _ => {
            let (qb, dbb) = (binarize(&qs), binarize(&db));
            ground_truth(qb.vectors(), dbb.vectors(), dbb.ids(), a.top)?
        }
    };
    let res = retrieve(&q_file.signatures, &db_file.signatures, db.ids(), &truth, &a.r_grid)?;
    let mut csv = String::from("scheme,K,b,R,precision,recall\n");
    let m = &db_file.header.meta;
    for (i, r) in res.r_grid.iter().enumerate() {
        csv.push_str(&format!(
            "{},{},{},{r},{:.6},{:.6}\n",
            m.scheme,
            m.bins,
            m.bits.map_or("raw".into(), |b| b.to_string()),
            res.precision[i],
            res.recall[i]
        ));
    }
    emit(a.out.as_deref(), &csv)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Tables(a) => tables(a),
        Command::Sketch(a) => sketch(a),
        Command::DpSketch(a) => dp_sketch(a),
        Command::Retrieve(a) => retrieve_cmd(a),
        Command::MseSim(a) => mse_cmd(a),
        Command::Eval(a) => eval(a),
        Command::Experiment(a) => emit(a.out.as_deref(), &run_experiment(&a.config)?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
