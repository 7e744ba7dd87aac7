mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use mcstfa::aecm::{FitConfig, SkewMode};
use mcstfa::init::{InitMethod, Linkage};
use mcstfa::io::{self, ModelFile};
use mcstfa::metrics::{adjusted_rand_index, contingency_table, run_grid};
use mcstfa::model::{parsimony_table, ModelId};
use mcstfa::simulate::{simulate, SimSpec};
use mcstfa::Error;

/// Mixtures of common skew-t factor analyzers: fitting, simulation and
/// clustering evaluation.
#[derive(Parser, Debug)]
#[command(version, about, term_width = 80)]
struct Cli {
    /// TOML file with one table per subcommand; flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// fit a (G, q) grid and keep the converged model with the largest BIC
    Fit(FitArgs),
    /// draw data from a mixture of common skew-t factor analyzers
    Simulate(SimulateArgs),
    /// compare two labelings: confusion table and adjusted Rand index
    Eval(EvalArgs),
    /// free-parameter counts over a range of dimensions
    ParamsTable(ParamsTableArgs),
}

#[derive(Args, Debug)]
struct FitArgs {
    /// numeric CSV, one observation per row
    data: Option<PathBuf>,
    /// number of components, `G` or `Gmin..Gmax`
    #[arg(long, short = 'g')]
    components: Option<String>,
    /// number of factors, `q` or `qmin..qmax`
    #[arg(long, short = 'q')]
    factors: Option<String>,
    /// `mcstfa` or `mctfa` (skewness pinned at zero)
    #[arg(long)]
    model: Option<String>,
    /// Aitken tolerance on the log-likelihood [default: 1e-5]
    #[arg(long)]
    tol: Option<f64>,
    /// [default: 2000]
    #[arg(long)]
    max_iter: Option<usize>,
    /// lower bound for the degrees of freedom [default: 0.5]
    #[arg(long)]
    min_dof: Option<f64>,
    /// upper bound for the degrees of freedom [default: 400]
    #[arg(long)]
    max_dof: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// hclust-complete, hclust-ward, hclust-average or labels-file=PATH
    #[arg(long)]
    init: Option<String>,
    /// true labels; the ARI of every cell is reported
    #[arg(long)]
    labels: Option<PathBuf>,
    /// best model as JSON [default: model.json]
    #[arg(long)]
    out: Option<PathBuf>,
    /// grid summary CSV [default: grid.csv]
    #[arg(long)]
    grid_out: Option<PathBuf>,
    /// hard labels of the best model [default: fit_labels.csv]
    #[arg(long)]
    labels_out: Option<PathBuf>,
    /// worker threads for the grid [default: available cores]
    #[arg(long)]
    threads: Option<usize>,
    /// extra runs per cell from perturbed starting partitions
    #[arg(long)]
    restarts: Option<usize>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// simulation spec as JSON
    #[arg(long, conflicts_with = "paper_4_2")]
    spec: Option<PathBuf>,
    /// built-in four-component, 15-dimensional design
    #[arg(long = "paper-4-2")]
    paper_4_2: bool,
    /// overrides the seed of the spec
    #[arg(long)]
    seed: Option<u64>,
    /// prefix for data.csv, labels.csv, params.json and spec.json
    #[arg(long)]
    out_prefix: Option<String>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    pred: Option<PathBuf>,
    #[arg(long = "true")]
    truth: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ParamsTableArgs {
    /// `a..b`
    #[arg(long)]
    p_range: Option<String>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    g: Option<usize>,
    /// comma-separated, e.g. `MCStFA,CCC,UUU` [default: all]
    #[arg(long)]
    models: Option<String>,
    /// [default: standard output]
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::AllCellsFailed => 4,
            ref e if e.is_input() => 2,
            _ => 3,
        };
        Failure { code, message: e.to_string() }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = config::load(cli.config.as_deref())
        .map_err(Failure::input)
        .and_then(|cfg| match cli.command {
            Command::Fit(a) => cmd_fit(a, cfg.fit),
            Command::Simulate(a) => cmd_simulate(a, cfg.simulate),
            Command::Eval(a) => cmd_eval(a, cfg.eval),
            Command::ParamsTable(a) => cmd_params_table(a, cfg.params_table),
        });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// Parses `a` or `a..b` (inclusive).
fn parse_range(s: &str, what: &str) -> Result<Vec<usize>, Failure> {
    let bad = || Failure::input(format!("invalid {what} '{s}': expected N or A..B"));
    let s = s.trim();
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (
            a.trim().parse::<usize>().map_err(|_| bad())?,
            b.trim().trim_start_matches('=').parse::<usize>().map_err(|_| bad())?,
        ),
        None => {
            let v = s.parse::<usize>().map_err(|_| bad())?;
            (v, v)
        }
    };
    if lo == 0 || lo > hi {
        return Err(bad());
    }
    Ok((lo..=hi).collect())
}

fn parse_init(s: &str) -> Result<InitSpec, Failure> {
    if let Some(path) = s.strip_prefix("labels-file=") {
        return Ok(InitSpec::LabelsFile(PathBuf::from(path)));
    }
    let linkage = match s {
        "hclust-complete" | "complete" => Linkage::Complete,
        "hclust-ward" | "ward" => Linkage::Ward,
        "hclust-average" | "average" => Linkage::Average,
        _ => return Err(Failure::input(format!("unknown init '{s}'"))),
    };
    Ok(InitSpec::Hierarchical(linkage))
}

enum InitSpec {
    Hierarchical(Linkage),
    LabelsFile(PathBuf),
}

fn cmd_fit(a: FitArgs, c: config::FitSection) -> CmdResult {
    let data_path = a.data.or(c.data).ok_or_else(|| Failure::input("no data file given"))?;
    let g_values = parse_range(&a.components.or(c.components).ok_or_else(|| Failure::input("--components is required"))?, "components")?;
    let q_values = parse_range(&a.factors.or(c.factors).ok_or_else(|| Failure::input("--factors is required"))?, "factors")?;
    let defaults = FitConfig::default();
    let skew = match a.model.or(c.model).as_deref().unwrap_or("mcstfa").to_ascii_lowercase().as_str() {
        "mcstfa" => SkewMode::Free,
        "mctfa" => SkewMode::Zero,
        other => return Err(Failure::input(format!("unknown model '{other}', expected mcstfa or mctfa"))),
    };
    let init = parse_init(a.init.or(c.init).as_deref().unwrap_or("hclust-complete"))?;
    let data = io::read_data_csv(&data_path)?;
    let init = match init {
        InitSpec::Hierarchical(l) => InitMethod::Hierarchical(l),
        InitSpec::LabelsFile(path) => {
            let (codes, names) = io::encode_labels(&io::read_labels(&path)?);
            if codes.len() != data.n() {
                return Err(Failure::input(format!("{} starting labels for {} observations", codes.len(), data.n())));
            }
            if g_values.iter().any(|&g| g != names.len()) {
                return Err(Failure::input(format!("starting labels define {} groups; --components must be {}", names.len(), names.len())));
            }
            InitMethod::Labels(codes)
        }
    };
    let config = FitConfig {
        max_iter: a.max_iter.or(c.max_iter).unwrap_or(defaults.max_iter),
        epsilon: a.tol.or(c.tol).unwrap_or(defaults.epsilon),
        min_dof: a.min_dof.or(c.min_dof).unwrap_or(defaults.min_dof),
        max_dof: a.max_dof.or(c.max_dof).unwrap_or(defaults.max_dof),
        skew,
        init,
        restarts: a.restarts.or(c.restarts).unwrap_or(0),
        seed: a.seed.or(c.seed).unwrap_or(0),
        ..defaults
    };
    let truth = match a.labels.or(c.labels) {
        Some(path) => {
            let (codes, _) = io::encode_labels(&io::read_labels(&path)?);
            if codes.len() != data.n() {
                return Err(Failure::input(format!("{} true labels for {} observations", codes.len(), data.n())));
            }
            Some(codes)
        }
        None => None,
    };
    if let Some(t) = a.threads.or(c.threads) {
        if t == 0 {
            return Err(Failure::input("--threads must be at least 1"));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            warn!("thread pool already initialised: {e}");
        }
    }
    let out = a.out.or(c.out).unwrap_or_else(|| PathBuf::from("model.json"));
    let grid_out = a.grid_out.or(c.grid_out).unwrap_or_else(|| PathBuf::from("grid.csv"));
    let labels_out = a.labels_out.or(c.labels_out).unwrap_or_else(|| PathBuf::from("fit_labels.csv"));

    info!("fitting G in {g_values:?}, q in {q_values:?} on {} x {} data", data.n(), data.p());
    let grid = run_grid(&data, &g_values, &q_values, &config, truth.as_deref())?;
    create_parent(&grid_out)?;
    io::write_grid_csv(std::fs::File::create(&grid_out).map_err(Error::from)?, &grid.cells)?;
    for cell in grid.cells.iter().filter(|c| c.error.is_some()) {
        eprintln!("G={} q={}: {}", cell.g, cell.q, cell.error.as_deref().unwrap_or_default());
    }
    let Some(best) = grid.best_fit() else {
        let finished = grid.cells.iter().any(|c| c.error.is_none());
        return Err(Failure {
            code: if finished { 4 } else { 3 },
            message: if finished {
                format!("no cell converged within {} iterations (grid written to {})", config.max_iter, grid_out.display())
            } else {
                "every cell failed numerically".into()
            },
        });
    };
    let (g, q) = grid.best.expect("best cell exists");
    create_parent(&out)?;
    ModelFile::from_fit(best, &config).save(&out)?;
    create_parent(&labels_out)?;
    io::write_labels(&labels_out, &best.hard_labels)?;
    println!("best: G={g} q={q} loglik={:.4} BIC={:.4} iterations={}", best.loglik(), best.bic, best.iterations);
    if let Some(t) = &truth {
        println!("ARI: {:.4}", adjusted_rand_index(t, &best.hard_labels)?);
    }
    Ok(())
}

fn create_parent(path: &Path) -> Result<(), Failure> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(Error::from)?;
        }
    }
    Ok(())
}

fn cmd_simulate(a: SimulateArgs, c: config::SimulateSection) -> CmdResult {
    let builtin = a.paper_4_2 || c.paper_4_2.unwrap_or(false);
    let spec_path = a.spec.or(c.spec);
    let seed = a.seed.or(c.seed);
    let mut spec = match (spec_path, builtin) {
        (Some(_), true) => return Err(Failure::input("--spec and --paper-4-2 are mutually exclusive")),
        (Some(path), false) => {
            let f = std::fs::File::open(&path).map_err(Error::from)?;
            serde_json::from_reader::<_, SimSpec>(std::io::BufReader::new(f))
                .map_err(|e| Failure::input(format!("invalid spec {}: {e}", path.display())))?
        }
        (None, true) => SimSpec::replication(seed.unwrap_or(1)),
        (None, false) => return Err(Failure::input("give --spec or --paper-4-2")),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let sim = simulate(&spec)?;
    let prefix = a.out_prefix.or(c.out_prefix).unwrap_or_default();
    let path = |name: &str| PathBuf::from(format!("{prefix}{name}"));
    create_parent(&path("data.csv"))?;
    io::write_data_csv(&path("data.csv"), &sim.data)?;
    io::write_labels(&path("labels.csv"), &sim.labels)?;
    ModelFile::from_params(&sim.params, SkewMode::Free, None).save(&path("params.json"))?;
    let mut f = std::fs::File::create(path("spec.json")).map_err(Error::from)?;
    serde_json::to_writer_pretty(&mut f, &spec).map_err(Error::from)?;
    use std::io::Write;
    writeln!(f).map_err(Error::from)?;
    println!("wrote {} observations of dimension {} to {}", sim.data.n(), sim.data.p(), path("data.csv").display());
    Ok(())
}

fn cmd_eval(a: EvalArgs, c: config::EvalSection) -> CmdResult {
    let pred = a.pred.or(c.pred).ok_or_else(|| Failure::input("--pred is required"))?;
    let truth = a.truth.or(c.truth).ok_or_else(|| Failure::input("--true is required"))?;
    let pred = io::read_labels(&pred)?;
    let truth = io::read_labels(&truth)?;
    if pred.len() != truth.len() {
        return Err(Failure::input(format!("label files differ in length ({} true, {} predicted)", truth.len(), pred.len())));
    }
    let table = contingency_table(&truth, &pred)?;
    let width = table
        .col_labels
        .iter()
        .chain(&table.row_labels)
        .map(String::len)
        .chain(table.counts.iter().flatten().map(|c| c.to_string().len()))
        .max()
        .unwrap_or(1)
        .max(4);
    print!("{:>width$}", "true");
    for c in &table.col_labels {
        print!(" {c:>width$}");
    }
    println!();
    for (r, row) in table.row_labels.iter().zip(&table.counts) {
        print!("{r:>width$}");
        for c in row {
            print!(" {c:>width$}");
        }
        println!();
    }
    println!("ARI: {:.4}", adjusted_rand_index(&truth, &pred)?);
    Ok(())
}

fn cmd_params_table(a: ParamsTableArgs, c: config::ParamsTableSection) -> CmdResult {
    let range = a.p_range.or(c.p_range).ok_or_else(|| Failure::input("--p-range is required"))?;
    let ps = parse_range(&range, "p range")?;
    let q = a.q.or(c.q).ok_or_else(|| Failure::input("--q is required"))?;
    let g = a.g.or(c.g).ok_or_else(|| Failure::input("--g is required"))?;
    let models = match a.models.or(c.models) {
        Some(list) => list
            .split(',')
            .map(|m| m.trim().parse::<ModelId>().map_err(|_| Failure::input(format!("unknown model '{m}'"))))
            .collect::<Result<Vec<_>, _>>()?,
        None => ModelId::ALL.to_vec(),
    };
    let rows = parsimony_table(ps[0]..=ps[ps.len() - 1], q, g, &models).map_err(|e| Failure::input(e.to_string()))?;
    match a.out.or(c.out) {
        Some(path) => {
            create_parent(&path)?;
            io::write_parsimony_csv(std::fs::File::create(&path).map_err(Error::from)?, &rows)?;
        }
        None => io::write_parsimony_csv(std::io::stdout().lock(), &rows)?,
    }
    Ok(())
}
