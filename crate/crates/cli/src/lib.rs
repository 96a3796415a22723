//! Drivers behind the `symgcp` subcommands: multi-start decomposition,
//! synthetic data generation and scoring against a planted factor.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use symgcp::config::{GenConfig, OptimizerChoice, RunConfig};
use symgcp::io::{read_matrix_csv, read_tensor, read_vector, write_file, write_matrix_csv, write_sparse_tensor, write_vector};
use symgcp::optimize::init::initialize_with_rng;
use symgcp::optimize::{fit_adam, fit_lbfgsb, FitOutcome, FitTrace};
use symgcp::synth::{cosine_score, generate_binary, negate_fix};
use symgcp::{Error, ModePartition, Objective, ObjectiveConfig, Result, SymKruskal, TensorData};

/// Relative tolerance for deciding that input data is symmetric.
const AUTO_SYMMETRY_TOL: f64 = 1e-12;

pub const SUMMARY_CSV: &str = "summary.csv";
pub const SUMMARY_TOML: &str = "summary.toml";
pub const RESULT_TOML: &str = "result.toml";

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(o) = &self.output {
            cfg.output = o.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
    }
}

/// Outcome of one initialization, as written to `init_XXX/result.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitRecord {
    /// 1-based.
    pub init: usize,
    pub objective: Option<f64>,
    pub iterations: usize,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<f64>,
}

impl InitRecord {
    pub fn succeeded(&self) -> bool {
        self.error.is_none() && self.objective.is_some()
    }
}

/// Contents of `summary.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub input: String,
    pub partition: String,
    pub rank: usize,
    pub loss: String,
    pub optimizer: String,
    pub seed: u64,
    pub fastpath: bool,
    pub n_initializations: usize,
    pub n_failed: usize,
    /// Initialization with the lowest final objective.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_init: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_objective: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct DecomposeReport {
    pub summary: RunSummary,
    pub inits: Vec<InitRecord>,
    pub output: PathBuf,
}

impl DecomposeReport {
    pub fn best(&self) -> Option<&InitRecord> {
        self.summary.best_init.map(|i| &self.inits[i - 1])
    }
}

pub fn init_dir(output: &Path, init: usize) -> PathBuf {
    output.join(format!("init_{init:03}"))
}

fn toml_string<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::Config(format!("cannot serialize: {e}")))
}

fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml_string(value)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e
            .span()
            .map_or(1, |s| text.as_bytes()[..s.start].iter().filter(|b| **b == b'\n').count() + 1),
        msg: e.message().to_string(),
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes λ as `lambda.csv` and factor `k` as `factor_k.csv` (1-based).
pub fn write_model(dir: &Path, m: &SymKruskal) -> Result<()> {
    write_file(&dir.join("lambda.csv"), |w| write_vector(w, m.lambda()))?;
    for (k, f) in m.factors().iter().enumerate() {
        write_file(&dir.join(format!("factor_{}.csv", k + 1)), |w| write_matrix_csv(w, f))?;
    }
    Ok(())
}

pub fn read_model(dir: &Path, partition: &ModePartition) -> Result<SymKruskal> {
    let lambda = read_vector(&dir.join("lambda.csv"))?;
    let factors = (1..=partition.num_cells())
        .map(|k| read_matrix_csv(&dir.join(format!("factor_{k}.csv"))))
        .collect::<Result<Vec<_>>>()?;
    SymKruskal::new(lambda, factors, partition.clone())
}

/// Whether the fast path applies: explicit setting, or symmetric data under
/// a partition with at least one repeated cell.
fn resolve_fastpath(cfg: &RunConfig, data: &TensorData, partition: &ModePartition) -> Result<bool> {
    if let Some(on) = cfg.fastpath {
        return Ok(on);
    }
    if partition.cells().iter().all(|c| c.len() == 1) {
        return Ok(false);
    }
    let scale = match data {
        TensorData::Dense(t) => t.values().iter().fold(1.0f64, |a, v| a.max(v.abs())),
        TensorData::Sparse(t) => t.values().iter().fold(1.0f64, |a, v| a.max(v.abs())),
    };
    data.is_symmetric(partition, AUTO_SYMMETRY_TOL * scale)
}

fn run_one(
    objective: &Objective<'_>,
    cfg: &RunConfig,
    optimizer: &OptimizerChoice,
    init: usize,
) -> Result<FitOutcome> {
    let data = objective.data();
    let oc = objective.config();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(init as u64);
    let nonneg = oc.loss.base.lower_bound().is_some();
    let start = initialize_with_rng(data, &oc.partition, oc.rank, &mut rng, nonneg)?;
    match optimizer {
        OptimizerChoice::Lbfgsb(c) => fit_lbfgsb(objective, start, c),
        OptimizerChoice::Adam(c) => {
            let mut c = c.clone();
            c.sampler.seed = rng.next_u64();
            fit_adam(objective, start, &c)
        }
    }
}

fn record_init(dir: &Path, init: usize, outcome: Result<FitOutcome>, wall: f64) -> Result<InitRecord> {
    create_dir(dir)?;
    let rec = match outcome {
        Ok(out) => {
            write_model(dir, &out.model)?;
            write_file(&dir.join("trace.csv"), |w| out.trace.write_csv(w))?;
            InitRecord {
                init,
                objective: Some(out.objective),
                iterations: out.iterations,
                status: out.status,
                error: None,
                wall_seconds: Some(wall),
            }
        }
        Err(e) => {
            log::warn!("initialization {init} failed: {e}");
            InitRecord {
                init,
                objective: None,
                iterations: 0,
                status: "failed".into(),
                error: Some(e.to_string()),
                wall_seconds: Some(wall),
            }
        }
    };
    write_toml(&dir.join(RESULT_TOML), &rec)?;
    Ok(rec)
}

/// Index (1-based) of the successful record with the lowest objective; ties
/// go to the earlier initialization.
pub fn select_best(records: &[InitRecord]) -> Option<usize> {
    records
        .iter()
        .filter(|r| r.succeeded())
        .min_by(|a, b| {
            a.objective
                .unwrap()
                .total_cmp(&b.objective.unwrap())
                .then(a.init.cmp(&b.init))
        })
        .map(|r| r.init)
}

/// Fits `n_initializations` random starts and writes one directory per start
/// plus `summary.csv` and `summary.toml`. Per-start failures are recorded
/// and do not stop the run.
pub fn decompose(cfg: &RunConfig) -> Result<DecomposeReport> {
    cfg.validate()?;
    let loss = cfg.loss_spec()?;
    let optimizer = cfg.optimizer()?;
    let data = read_tensor(&cfg.input, cfg.tensor_format()?)?;
    let partition = cfg.partition_for(data.order())?;
    partition.cell_sizes(data.dims())?;
    let fastpath = resolve_fastpath(cfg, &data, &partition)?;
    let ocfg = ObjectiveConfig::new(loss, partition.clone(), cfg.rank)
        .with_gamma(cfg.gamma)
        .with_optimize_lambda(cfg.optimize_lambda)
        .with_fastpath(fastpath);
    let objective = Objective::new(ocfg, &data)?;
    log::info!(
        "{:?} tensor, partition {partition}, rank {}, loss {}, fast path {}",
        data.dims(),
        cfg.rank,
        cfg.loss,
        if fastpath { "on" } else { "off" }
    );

    create_dir(&cfg.output)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        pool = pool.num_threads(t);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
    let records: Vec<Result<InitRecord>> = pool.install(|| {
        (1..=cfg.n_initializations)
            .into_par_iter()
            .map(|init| {
                let t = Instant::now();
                let outcome = run_one(&objective, cfg, &optimizer, init);
                let rec = record_init(&init_dir(&cfg.output, init), init, outcome, t.elapsed().as_secs_f64())?;
                match rec.objective {
                    Some(f) => log::info!("init {init}: objective {f:.6e} ({})", rec.status),
                    None => log::info!("init {init}: failed"),
                }
                Ok(rec)
            })
            .collect()
    });
    let inits = records.into_iter().collect::<Result<Vec<_>>>()?;
    let best = select_best(&inits);
    let summary = RunSummary {
        input: cfg.input.display().to_string(),
        partition: partition.to_string(),
        rank: cfg.rank,
        loss: cfg.loss.clone(),
        optimizer: match optimizer {
            OptimizerChoice::Lbfgsb(_) => "lbfgsb".into(),
            OptimizerChoice::Adam(_) => "adam".into(),
        },
        seed: cfg.seed,
        fastpath,
        n_initializations: cfg.n_initializations,
        n_failed: inits.iter().filter(|r| !r.succeeded()).count(),
        best_init: best,
        best_objective: best.and_then(|b| inits[b - 1].objective),
    };
    write_file(&cfg.output.join(SUMMARY_CSV), |w| {
        use std::io::Write;
        writeln!(w, "init,objective,iterations,status,best")?;
        for r in &inits {
            let obj = r.objective.map_or(String::new(), |f| format!("{f:e}"));
            writeln!(w, "{},{},{},{},{}", r.init, obj, r.iterations, r.status, Some(r.init) == best)?;
        }
        Ok(())
    })?;
    write_toml(&cfg.output.join(SUMMARY_TOML), &summary)?;
    Ok(DecomposeReport {
        summary,
        inits,
        output: cfg.output.clone(),
    })
}

/// Files written by [`generate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateReport {
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub delta: f64,
    pub rho_high: f64,
    pub rho_low: f64,
    pub seed: u64,
    pub nnz: usize,
    pub nnz_fraction: f64,
    pub clamped: usize,
}

/// Writes `a_star.csv`, `x.tns` and `generate.toml` into `output`.
pub fn generate(cfg: &GenConfig, output: &Path) -> Result<GenerateReport> {
    let bin = cfg.binary();
    let truth = generate_binary(&bin)?;
    create_dir(output)?;
    write_file(&output.join("a_star.csv"), |w| write_matrix_csv(w, &truth.a_star))?;
    write_file(&output.join("x.tns"), |w| write_sparse_tensor(w, &truth.x))?;
    let report = GenerateReport {
        m: bin.m,
        n: bin.n,
        r: bin.r,
        delta: bin.delta,
        rho_high: bin.rho_high,
        rho_low: bin.rho_low,
        seed: bin.seed,
        nnz: truth.x.nnz(),
        nnz_fraction: truth.x.nnz() as f64 / truth.x.num_entries() as f64,
        clamped: truth.clamped,
    };
    write_toml(&output.join("generate.toml"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitScore {
    pub init: usize,
    pub objective: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateReport {
    pub scores: Vec<InitScore>,
    /// Score of the initialization with the lowest objective.
    pub best_init: usize,
    pub best_score: f64,
}

/// Scores factor `cell` (1-based) of every successful initialization in
/// `run_dir` against `a_star`, after sign alignment. Writes `scores_csv`.
pub fn evaluate(a_star_path: &Path, run_dir: &Path, cell: usize, scores_csv: &Path) -> Result<EvaluateReport> {
    let a_star = read_matrix_csv(a_star_path)?;
    let summary: RunSummary = read_toml(&run_dir.join(SUMMARY_TOML))?;
    let partition = parse_displayed_partition(&summary.partition)?;
    if cell == 0 || cell > partition.num_cells() {
        return Err(Error::Config(format!(
            "cell {cell} out of range for partition {partition}"
        )));
    }
    let multiplicity = partition.cells()[cell - 1].len();
    let mut scores = Vec::new();
    for init in 1..=summary.n_initializations {
        let dir = init_dir(run_dir, init);
        let rec: InitRecord = read_toml(&dir.join(RESULT_TOML))?;
        let Some(objective) = rec.objective.filter(|_| rec.succeeded()) else {
            continue;
        };
        let model = read_model(&dir, &partition)?;
        let factor = model.factor(cell - 1);
        let (fixed, _) = negate_fix(factor, model.lambda(), &a_star, multiplicity)?;
        scores.push(InitScore {
            init,
            objective,
            score: cosine_score(&a_star, &fixed)?,
        });
    }
    let best = scores
        .iter()
        .min_by(|a, b| a.objective.total_cmp(&b.objective).then(a.init.cmp(&b.init)))
        .cloned()
        .ok_or_else(|| Error::Config(format!("no successful initializations in {}", run_dir.display())))?;
    write_file(scores_csv, |w| {
        use std::io::Write;
        writeln!(w, "init,objective,score,best")?;
        for s in &scores {
            writeln!(w, "{},{:e},{},{}", s.init, s.objective, s.score, s.init == best.init)?;
        }
        Ok(())
    })?;
    Ok(EvaluateReport {
        scores,
        best_init: best.init,
        best_score: best.score,
    })
}

/// Parses a partition as written in `summary.toml`, whose order is the
/// largest mode number it mentions.
fn parse_displayed_partition(text: &str) -> Result<ModePartition> {
    let order = text
        .split(|c: char| !c.is_ascii_digit())
        .filter_map(|t| t.parse::<usize>().ok())
        .max()
        .ok_or_else(|| Error::InvalidPartition(format!("no modes in `{text}`")))?;
    ModePartition::parse(text, order)
}

/// Reads an initialization's trace.
pub fn read_trace(run_dir: &Path, init: usize) -> Result<FitTrace> {
    let path = init_dir(run_dir, init).join("trace.csv");
    let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
    FitTrace::read_csv(std::io::BufReader::new(file), &path.display().to_string())
}

/// Loads the config for `decompose` and applies command-line overrides.
pub fn load_run_config(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}
