use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ctmix::copula::{write_iteration_csv, InitialWorking};
use ctmix::data::DataMatrix;
use ctmix::evaluation::{
    fit_estimator_traced, lpds, resolve_marginal_classes, run_comparison, write_report_csv, Dgp, EstimatorId,
    EstimatorSpec, FittedEstimator, MarginalPlan, Protocol, Replication,
};
use ctmix::io::{load_csv, save_csv, write_atomic, CsvOptions, ModelFile, TrainingInfo};
use ctmix::marginals::{select_marginals, MarginalOptions, MarginalSpec};
use ctmix::seed::derive_seed;
use ctmix::vb::write_trace_csv;
use ctmix::{Error, Result};

#[derive(Parser)]
#[command(name = "ctmix", version, about = "Copula-type mixture density estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit an estimator and save it as JSON.
    Fit(FitArgs),
    /// Print the LPDS of a saved model on a data set.
    Score(ScoreArgs),
    /// Draw a sample from the two-component simulation design.
    Simulate(SimulateArgs),
    /// Compare estimators by LPDS over replications.
    Compare(CompareArgs),
    /// Cross-validated selection of marginal estimators per column.
    Marginals(MarginalsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    /// Implied marginals of a mixture fitted to the data
    Implied,
    /// Standard normal working marginals
    Normal,
}

#[derive(Args)]
struct ModelArgs {
    /// Initial number of mixture components
    #[arg(long, default_value_t = 5)]
    k_init: usize,
    /// Folds used to select the marginal estimators
    #[arg(long, default_value_t = 10)]
    folds_marginals: usize,
    /// Upper bound on degrees of freedom
    #[arg(long, default_value_t = 100)]
    nu_max: u32,
    /// Factor pruning threshold
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    /// Starting working marginals for copula-type estimators
    #[arg(long, value_enum, default_value_t = InitArg::Implied)]
    init: InitArg,
    /// Comma-separated marginal estimator per column, or one for all
    /// columns; selected by cross-validation when omitted
    #[arg(long)]
    marginals: Option<String>,
}

impl ModelArgs {
    fn spec(&self, id: EstimatorId, d: usize) -> Result<EstimatorSpec> {
        if self.k_init == 0 {
            return Err(Error::Usage("--k-init must be at least 1".into()));
        }
        let mut spec = EstimatorSpec::new(id);
        spec.vb.k_init = self.k_init;
        spec.priors.lambda0 = self.nu_max;
        spec.priors.epsilon = self.epsilon;
        spec.init = match self.init {
            InitArg::Implied => InitialWorking::Implied,
            InitArg::Normal => InitialWorking::StandardNormal,
        };
        spec.marginals = match &self.marginals {
            None => MarginalPlan::Select {
                candidates: MarginalSpec::standard_candidates(),
                folds: self.folds_marginals,
            },
            Some(list) => {
                let mut classes = parse_list::<MarginalSpec>(list)?;
                if classes.len() == 1 {
                    classes = vec![classes[0].clone(); d];
                }
                MarginalPlan::Classes(classes)
            }
        };
        Ok(spec)
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    /// MN, Mt, MFA, MtFA, NC, tC or CT-<family>
    #[arg(long)]
    estimator: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    model: ModelArgs,
    /// Model file to write
    #[arg(long)]
    out: PathBuf,
    /// CSV of the VB sweeps or copula-type iterations
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Use the bivariate normal/t design instead of the t5 design
    #[arg(long)]
    motivating: bool,
    #[arg(long)]
    out: PathBuf,
    /// Also write the latent X sample
    #[arg(long)]
    x_out: Option<PathBuf>,
    /// Also write the U sample
    #[arg(long)]
    u_out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long, conflicts_with = "simulate", required_unless_present = "simulate")]
    data: Option<PathBuf>,
    /// Simulation settings, e.g. d=5,n=500[,test=1000]
    #[arg(long)]
    simulate: Option<String>,
    /// Comma-separated estimator ids
    #[arg(long, default_value = "mn,nc,ct-mn")]
    estimators: String,
    /// Cross-validation folds; 0 scores simulated data on a fresh test sample
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: PathBuf,
    /// Write zero run times so that the report depends only on the inputs
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct MarginalsArgs {
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated candidates
    #[arg(long, default_value = "kernel,univ_mix_normal,univ_mix_t,implied_mix_normal,implied_mix_t")]
    candidates: String,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write the table here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_list<T: std::str::FromStr<Err = Error>>(list: &str) -> Result<Vec<T>> {
    let items: Vec<T> = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::Usage(format!("empty list '{list}'")));
    }
    Ok(items)
}

fn load(path: &PathBuf) -> Result<DataMatrix> {
    Ok(load_csv(path, CsvOptions::default())?.data)
}

fn run_fit(a: FitArgs) -> Result<()> {
    let id: EstimatorId = a.estimator.parse()?;
    let data = load(&a.data)?;
    let mut spec = a.model.spec(id, data.ncols())?;
    spec.vb.trace = a.trace.is_some();
    if a.trace.is_some() && matches!(id, EstimatorId::Copula(_)) {
        return Err(Error::Usage(format!("{id} has no iterative trace")));
    }
    let (classes, selection) = if id.needs_marginals() {
        resolve_marginal_classes(&data, &spec, derive_seed(a.seed, &[2]))?
    } else {
        (Vec::new(), Vec::new())
    };
    let (model, vb_trace) = fit_estimator_traced(&data, &spec, Some(&classes), a.seed)?;
    let loglik = match &model {
        FittedEstimator::CopulaType { model } => model.loglik().unwrap_or(f64::NAN),
        m => {
            let mut s = 0.0;
            for row in data.rows() {
                s += m.logpdf(row)?;
            }
            s
        }
    };
    if let Some(path) = &a.trace {
        match &model {
            FittedEstimator::CopulaType { model } => {
                write_atomic(path, |w| Ok(write_iteration_csv(&model.iteration_log, w)?))?
            }
            _ => write_atomic(path, |w| Ok(write_trace_csv(&vb_trace, w)?))?,
        }
    }
    spec.vb.trace = false;
    let training = TrainingInfo {
        n: data.nrows(),
        d: data.ncols(),
        columns: data.names().map(<[String]>::to_vec),
        loglik,
    };
    ModelFile::new(spec, a.seed, selection, training, model).save(&a.out)?;
    eprintln!("{id}: training log-likelihood {loglik}");
    Ok(())
}

fn run_score(a: ScoreArgs) -> Result<()> {
    let file = ModelFile::load(&a.model)?;
    let data = load(&a.data)?;
    if data.ncols() != file.model.dim() {
        return Err(Error::Data(format!(
            "data has {} columns, model expects {}",
            data.ncols(),
            file.model.dim()
        )));
    }
    println!("{}", lpds(&file.model, &data)?);
    Ok(())
}

fn run_simulate(a: SimulateArgs) -> Result<()> {
    if a.n == 0 {
        return Err(Error::Usage("--n must be positive".into()));
    }
    let dgp = if a.motivating {
        Dgp::motivating()?
    } else {
        if a.d == 0 {
            return Err(Error::Usage("--d must be positive".into()));
        }
        Dgp::standard(a.d)?
    };
    let x = dgp.sample_x(a.n, a.seed);
    let u = dgp.x_to_u(&x);
    let y = dgp.u_to_y(&u)?;
    save_csv(&y, &a.out)?;
    if let Some(p) = &a.x_out {
        save_csv(&x, p)?;
    }
    if let Some(p) = &a.u_out {
        save_csv(&u, p)?;
    }
    Ok(())
}

struct SimSettings {
    d: usize,
    n: usize,
    test: usize,
}

fn parse_simulate(s: &str) -> Result<SimSettings> {
    let mut out = SimSettings { d: 0, n: 0, test: 1000 };
    for part in s.split(',') {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("expected key=value in '{part}'")))?;
        let v: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Usage(format!("'{v}' is not a count")))?;
        match k.trim() {
            "d" => out.d = v,
            "n" => out.n = v,
            "test" => out.test = v,
            other => return Err(Error::Usage(format!("unknown simulation key '{other}'"))),
        }
    }
    if out.d == 0 || out.n == 0 || out.test == 0 {
        return Err(Error::Usage("--simulate needs positive d and n".into()));
    }
    Ok(out)
}

fn run_compare(a: CompareArgs) -> Result<()> {
    if a.reps == 0 {
        return Err(Error::Usage("--reps must be positive".into()));
    }
    let ids = parse_list::<EstimatorId>(&a.estimators)?;
    let mut reps = Vec::with_capacity(a.reps);
    let d;
    let mut truth = None;
    if let Some(sim) = &a.simulate {
        let sim = parse_simulate(sim)?;
        d = sim.d;
        let dgp = Dgp::standard(sim.d)?;
        truth = Some(dgp.marginals().to_vec());
        for r in 0..a.reps as u64 {
            let train = dgp.sample(sim.n, derive_seed(a.seed, &[r, 0]))?;
            let protocol = if a.folds == 0 {
                let test = dgp.sample(sim.test, derive_seed(a.seed, &[r, 1]))?;
                Protocol::Holdout { train, test }
            } else {
                Protocol::CrossValidated { data: train, folds: a.folds }
            };
            reps.push(Replication {
                protocol,
                seed: derive_seed(a.seed, &[r, 2]),
            });
        }
    } else {
        if a.folds == 0 {
            return Err(Error::Usage("--folds 0 needs --simulate to draw a test sample".into()));
        }
        let data = load(a.data.as_ref().expect("clap requires --data without --simulate"))?;
        d = data.ncols();
        for r in 0..a.reps as u64 {
            reps.push(Replication {
                protocol: Protocol::CrossValidated {
                    data: data.clone(),
                    folds: a.folds,
                },
                seed: derive_seed(a.seed, &[r, 2]),
            });
        }
    }
    let mut specs = ids
        .iter()
        .map(|&id| a.model.spec(id, d))
        .collect::<Result<Vec<_>>>()?;
    // Simulated data use the generating marginals unless told otherwise.
    if let Some(m) = &truth {
        if a.model.marginals.is_none() {
            let classes: Vec<MarginalSpec> = m.iter().cloned().map(MarginalSpec::Fixed).collect();
            for s in &mut specs {
                s.marginals = MarginalPlan::Classes(classes.clone());
            }
        }
    }
    let report = run_comparison(&reps, &specs, a.seed)?;
    write_atomic(&a.out, |w| Ok(write_report_csv(&report, !a.no_timing, w)?))?;
    for row in &report.rows {
        for (r, msg) in &row.failures {
            eprintln!("{} replication {r} failed: {msg}", row.estimator);
        }
        eprintln!("{}: mean LPDS {} (sd {})", row.estimator, row.mean_lpds(), row.sd_lpds());
    }
    Ok(())
}

fn run_marginals(a: MarginalsArgs) -> Result<()> {
    let data = load(&a.data)?;
    let candidates = parse_list::<MarginalSpec>(&a.candidates)?;
    let opts = MarginalOptions::default();
    let sel = select_marginals(&data, &candidates, a.folds, a.seed, &opts)?;
    let mut text = String::from("column,candidate,cv_lpds,selected\n");
    for s in &sel {
        let name = data
            .names()
            .map(|n| n[s.column].clone())
            .unwrap_or_else(|| format!("x{}", s.column + 1));
        let chosen = s.spec.to_string();
        for c in &s.scores {
            let score = c.lpds.map_or_else(|| "failed".to_string(), |v| v.to_string());
            text.push_str(&format!("{name},{},{score},{}\n", c.candidate, c.candidate == chosen));
        }
    }
    match &a.out {
        Some(p) => write_atomic(p, |w| Ok(w.write_all(text.as_bytes())?)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Usage(_) => 1,
        Error::Data(_) | Error::Parse { .. } | Error::Version { .. } | Error::Io(_) | Error::Json(_) => 2,
        Error::Fit { .. } | Error::Numeric(_) | Error::Domain(_) => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Fit(a) => run_fit(a),
        Command::Score(a) => run_score(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Compare(a) => run_compare(a),
        Command::Marginals(a) => run_marginals(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
