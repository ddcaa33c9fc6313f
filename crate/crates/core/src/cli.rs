//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::classify::{
    classify_known_eps, error_sum, map_rule, predictive_classify, rb_rule, risk_table, ErrorSum, KnownEpsLabels,
    PredictiveLabels, PredictiveSpec, RiskTableRow, TwoClassSpec,
};
use crate::decision::{decide, DecideReport, LossKind};
use crate::evidence::{evidence_report, rb_table, Convention, EvidenceReport};
use crate::grid::build_grid;
use crate::limits::{
    eta_limit_model, finite_eta_ladder, geometric_model, lambda_limit, lpl_sandwich_grid, map_limit_contrast,
    region_limit, reparameterization_demo, ContrastRow, EtaTrace, GeometricSpec, GridProblem, GridSandwich, LimitTrace,
    ReparameterizationReport,
};
use crate::model::{marginalize, prior_predictive, FiniteModel, ModelDoc, PsiMap};
use crate::regress::{
    as_vector, functional_inference, rb_grid_check, read_matrix_csv, FunctionalReport, GridCheck, RegressionSpec,
};
use crate::report::{Cell, Precision, Table};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "relbelief",
    version,
    about = "Relative belief inference and prior-based decision rules"
)]
pub struct Cli {
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Report format; each command has its own default.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Number formatting in CSV output.
    #[arg(long, global = true, value_enum, default_value_t = Precision::Short)]
    pub precision: Precision,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a model file and print its prior quantities.
    Model {
        #[arg(long)]
        model: PathBuf,
    },
    /// Relative belief inferences for one observation.
    Evidence {
        #[arg(long)]
        model: PathBuf,
        /// Observation label, or index when no label matches.
        #[arg(long)]
        x: String,
        /// Credible region content.
        #[arg(long, default_value_t = 0.95)]
        gamma: f64,
        /// Hypothesized psi value (label or index).
        #[arg(long)]
        psi0: Option<String>,
        #[arg(long, default_value = "sup-geq")]
        convention: Convention,
    },
    /// Bayes rule and risks for a prior-based loss.
    Decide {
        #[arg(long)]
        model: PathBuf,
        /// One of rb, map, rb-eta.
        #[arg(long)]
        loss: LossKind,
        /// Cap for the rb-eta loss.
        #[arg(long)]
        eta: Option<f64>,
    },
    /// Two-class classification experiments.
    Classify {
        #[command(subcommand)]
        command: ClassifyCommand,
    },
    /// Estimation and prediction of a linear functional in normal regression.
    Regress(RegressArgs),
    /// Limit experiments driven by a JSON config.
    Limits {
        #[arg(value_enum)]
        experiment: Experiment,
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum ClassifyCommand {
    /// Monte Carlo conditional misclassification rates of both predictive classifiers.
    Table1 {
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        /// Comma-separated beta values.
        #[arg(long, value_delimiter = ',', default_value = "1,14,32,100")]
        betas: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        mu: f64,
        #[arg(long, default_value_t = 10)]
        n: u64,
        #[arg(long, default_value_t = 200_000)]
        reps: u64,
        #[arg(long)]
        seed: u64,
    },
    /// Known prevalence: labels and exact error sums.
    Known {
        #[arg(long)]
        psi0: f64,
        #[arg(long)]
        psi1: f64,
        #[arg(long)]
        epsilon: f64,
    },
    /// Predictive classifier for one new item.
    Predictive {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        c_bar: f64,
        #[arg(long)]
        f0: f64,
        #[arg(long)]
        f1: f64,
    },
}

#[derive(Debug, Args)]
pub struct RegressArgs {
    #[arg(long)]
    pub design: PathBuf,
    #[arg(long)]
    pub response: PathBuf,
    #[arg(long)]
    pub sigma2: f64,
    #[arg(long)]
    pub tau2: f64,
    #[arg(long)]
    pub w: PathBuf,
    /// Also compare with the argmax of cell-level RB on this many cells.
    #[arg(long)]
    pub grid_cells: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Eta,
    Lambda,
    Region,
    Sandwich,
    Contrast,
    Reparam,
}

/// Config of `limits eta`: a model file body or the truncated geometric example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtaConfig {
    #[serde(default)]
    pub model: Option<ModelDoc>,
    #[serde(default)]
    pub geometric: Option<GeometricSpec>,
    pub x: usize,
    /// Ladder length; defaults to halving down past the smallest prior mass.
    #[serde(default)]
    pub steps: Option<usize>,
}

/// Config of the grid experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    #[serde(flatten)]
    pub problem: GridProblem,
    pub lo: f64,
    pub hi: f64,
    /// Cell counts, coarsest first.
    pub cells: Vec<usize>,
    #[serde(default)]
    pub gamma: Option<f64>,
}

/// Config of `limits reparam`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReparamConfig {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
    /// Normal (mean, variance) of psi a priori.
    pub prior: (f64, f64),
    /// Normal (mean, variance) of psi a posteriori.
    pub posterior: (f64, f64),
}

/// Summary printed by the `model` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub theta: Vec<String>,
    pub x: Vec<String>,
    pub prior: Vec<f64>,
    pub prior_predictive: Vec<f64>,
    pub psi_labels: Vec<String>,
    pub psi_prior: Vec<f64>,
    pub renormalized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnownReport {
    pub spec: TwoClassSpec,
    pub at_x0: KnownEpsLabels,
    pub at_x1: KnownEpsLabels,
    pub map_errors: ErrorSum,
    pub rb_errors: ErrorSum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressReport {
    pub functional: FunctionalReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_check: Option<GridCheck>,
}

/// A finished command: its JSON form and, where it has one, a table.
pub struct Output {
    pub json: String,
    pub table: Option<Table>,
    pub default_format: Format,
}

impl Output {
    fn new<T: Serialize>(report: &T, table: Option<Table>, default_format: Format) -> Result<Self> {
        Ok(Self {
            json: serde_json::to_string_pretty(report).map_err(|e| Error::Parse(e.to_string()))? + "\n",
            table,
            default_format,
        })
    }

    pub fn render(&self, format: Option<Format>, precision: Precision) -> Result<String> {
        match format.unwrap_or(self.default_format) {
            Format::Json => Ok(self.json.clone()),
            Format::Csv => self
                .table
                .as_ref()
                .map(|t| t.to_csv(precision))
                .ok_or_else(|| Error::Parse("this report has no CSV form".into())),
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<(FiniteModel, PsiMap)> {
    ModelDoc::from_json(&read_text(path)?)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
        .build()
}

/// Resolves a label, falling back to a numeric index.
fn resolve(field: &'static str, labels: &[String], key: &str) -> Result<usize> {
    if let Some(i) = labels.iter().position(|l| l == key) {
        return Ok(i);
    }
    let index: usize = key
        .parse()
        .map_err(|_| Error::Parse(format!("{field}: no label or index {key:?}")))?;
    if index >= labels.len() {
        return Err(Error::IndexOutOfRange {
            field,
            index,
            len: labels.len(),
        });
    }
    Ok(index)
}

fn grids(lo: f64, hi: f64, cells: &[usize]) -> Result<Vec<crate::grid::Grid1D>> {
    cells.iter().map(|&n| build_grid(lo, hi, n)).collect()
}

fn trace_table(trace: &LimitTrace) -> Table {
    let mut t = Table::new(&[
        "step",
        "parameter",
        "eta",
        "action",
        "region_cells",
        "posterior_content",
        "discrepancy",
    ]);
    for r in &trace.rows {
        t.push(vec![
            r.step.into(),
            r.parameter.into(),
            r.eta.into(),
            r.action.into(),
            r.region_cells.into(),
            r.posterior_content.into(),
            r.discrepancy.into(),
        ]);
    }
    t
}

pub fn run(cli: &Cli) -> Result<Output> {
    match &cli.command {
        Command::Model { model } => {
            let (m, psi) = load_model(model)?;
            let marg = marginalize(&m, &psi)?;
            let summary = ModelSummary {
                theta: m.theta_labels().to_vec(),
                x: m.x_labels().to_vec(),
                prior: m.prior().to_vec(),
                prior_predictive: prior_predictive(&m),
                psi_labels: psi.labels().to_vec(),
                psi_prior: marg.prior,
                renormalized: m.renormalized(),
            };
            let mut t = Table::new(&["theta", "prior"]);
            for (l, p) in summary.theta.iter().zip(&summary.prior) {
                t.push(vec![l.as_str().into(), (*p).into()]);
            }
            Output::new(&summary, Some(t), Format::Json)
        }
        Command::Evidence {
            model,
            x,
            gamma,
            psi0,
            convention,
        } => {
            let (m, psi) = load_model(model)?;
            let xi = resolve("x", m.x_labels(), x)?;
            let prior = crate::model::psi_prior(&m, &psi)?;
            let post = crate::model::psi_posterior(&m, &psi, xi)?;
            let table = rb_table(&prior, &post, Some(psi.labels()))?;
            let p0 = psi0
                .as_deref()
                .map(|k| {
                    let source = resolve("psi0", psi.labels(), k)?;
                    table
                        .position_of_source(source)
                        .ok_or(Error::ZeroPriorMass { psi: source })
                })
                .transpose()?;
            let report: EvidenceReport = evidence_report(&table, *gamma, *convention, p0)?;
            let mut t = Table::new(&["label", "prior", "posterior", "rb", "plausible", "credible"]);
            for i in 0..report.labels.len() {
                t.push(vec![
                    report.labels[i].as_str().into(),
                    report.prior[i].into(),
                    report.posterior[i].into(),
                    report.rb[i].into(),
                    report.plausible.members.contains(&i).into(),
                    report.credible.members.contains(&i).into(),
                ]);
            }
            Output::new(&report, Some(t), Format::Json)
        }
        Command::Decide { model, loss, eta } => {
            let (m, psi) = load_model(model)?;
            let report: DecideReport = decide(&m, &psi, *loss, *eta)?;
            let mut t = Table::new(&["x", "action", "tie", "posterior_risk"]);
            for (i, xl) in m.x_labels().iter().enumerate() {
                t.push(vec![
                    xl.as_str().into(),
                    report.rule_labels[i].as_str().into(),
                    report.rule.ties[i].into(),
                    report.risk.posterior_risk[i].into(),
                ]);
            }
            Output::new(&report, Some(t), Format::Json)
        }
        Command::Classify { command } => run_classify(command),
        Command::Regress(args) => {
            let design = read_matrix_csv(&args.design)?;
            let response = as_vector(read_matrix_csv(&args.response)?)?;
            let w: DVector<f64> = as_vector(read_matrix_csv(&args.w)?)?;
            let spec = RegressionSpec::new(design, response, args.sigma2, args.tau2)?;
            let functional = functional_inference(&spec, &w)?;
            let grid_check = args
                .grid_cells
                .map(|n| {
                    let reach = 6.0 * functional.sigma2_psi.sqrt();
                    rb_grid_check(&spec, &w, &build_grid(-reach, reach, n)?)
                })
                .transpose()?;
            let f = &functional;
            let mut t = Table::new(&[
                "psi_map",
                "psi_rb",
                "sigma2_psi",
                "sigma2_psi_post",
                "z_map",
                "z_rb",
                "sigma2_z",
                "sigma2_z_post",
            ]);
            t.push(
                [
                    f.psi_map,
                    f.psi_rb,
                    f.sigma2_psi,
                    f.sigma2_psi_post,
                    f.z_map,
                    f.z_rb,
                    f.sigma2_z,
                    f.sigma2_z_post,
                ]
                .into_iter()
                .map(Cell::from)
                .collect(),
            );
            Output::new(&RegressReport { functional, grid_check }, Some(t), Format::Json)
        }
        Command::Limits { experiment, config } => run_limits(*experiment, config),
    }
}

pub fn risk_rows_table(rows: &[RiskTableRow]) -> Table {
    let mut t = Table::new(&[
        "beta", "map_err0", "map_err1", "map_sum", "rb_err0", "rb_err1", "rb_sum", "reps", "seed",
    ]);
    for r in rows {
        t.push(vec![
            r.beta.into(),
            r.map_err0.into(),
            r.map_err1.into(),
            r.map_sum.into(),
            r.rb_err0.into(),
            r.rb_err1.into(),
            r.rb_sum.into(),
            r.reps.into(),
            r.seed.into(),
        ]);
    }
    t
}

fn run_classify(command: &ClassifyCommand) -> Result<Output> {
    match *command {
        ClassifyCommand::Table1 {
            alpha,
            ref betas,
            mu,
            n,
            reps,
            seed,
        } => {
            let rows = risk_table(alpha, betas, mu, n, reps, seed)?;
            Output::new(&rows, Some(risk_rows_table(&rows)), Format::Csv)
        }
        ClassifyCommand::Known { psi0, psi1, epsilon } => {
            let spec = TwoClassSpec::new(psi0, psi1, epsilon)?;
            let report = KnownReport {
                spec,
                at_x0: classify_known_eps(&spec, 0)?,
                at_x1: classify_known_eps(&spec, 1)?,
                map_errors: error_sum(&spec, map_rule(&spec)?)?,
                rb_errors: error_sum(&spec, rb_rule(&spec)?)?,
            };
            let mut t = Table::new(&["rule", "label_x0", "label_x1", "err0", "err1", "sum"]);
            for (name, labels, e) in [
                ("map", map_rule(&spec)?, report.map_errors),
                ("rb", rb_rule(&spec)?, report.rb_errors),
            ] {
                t.push(vec![
                    name.into(),
                    labels[0].into(),
                    labels[1].into(),
                    e.err0.into(),
                    e.err1.into(),
                    e.sum.into(),
                ]);
            }
            Output::new(&report, Some(t), Format::Json)
        }
        ClassifyCommand::Predictive {
            alpha,
            beta,
            n,
            c_bar,
            f0,
            f1,
        } => {
            let labels: PredictiveLabels = predictive_classify(&PredictiveSpec {
                alpha,
                beta,
                n,
                c_bar,
                f0_at_x: f0,
                f1_at_x: f1,
            })?;
            let mut t = Table::new(&["c_map", "c_rb", "map_ratio", "rb_ratio"]);
            t.push(vec![
                u64::from(labels.c_map).into(),
                u64::from(labels.c_rb).into(),
                labels.map_ratio.into(),
                labels.rb_ratio.into(),
            ]);
            Output::new(&labels, Some(t), Format::Json)
        }
    }
}

fn run_limits(experiment: Experiment, config: &Path) -> Result<Output> {
    match experiment {
        Experiment::Eta => {
            let cfg: EtaConfig = read_json(config)?;
            let (model, psi) = match (cfg.model, cfg.geometric) {
                (Some(doc), None) => doc.build()?,
                (None, Some(spec)) => {
                    let (m, p, _) = geometric_model(&spec)?;
                    (m, p)
                }
                _ => {
                    return Err(Error::Parse(
                        "eta config needs exactly one of \"model\" or \"geometric\"".into(),
                    ))
                }
            };
            let prior = crate::model::psi_prior(&model, &psi)?;
            let ladder = match cfg.steps {
                Some(k) => crate::decision::eta_ladder(&prior, k),
                None => finite_eta_ladder(&prior),
            };
            let trace: EtaTrace = eta_limit_model(&model, &psi, cfg.x, &ladder)?;
            let t = trace_table(&trace.trace);
            Output::new(&trace, Some(t), Format::Csv)
        }
        Experiment::Lambda => {
            let cfg: GridConfig = read_json(config)?;
            let trace = lambda_limit(&cfg.problem, &grids(cfg.lo, cfg.hi, &cfg.cells)?)?;
            let t = trace_table(&trace);
            Output::new(&trace, Some(t), Format::Csv)
        }
        Experiment::Region => {
            let cfg: GridConfig = read_json(config)?;
            let gamma = cfg.gamma.unwrap_or(0.95);
            let trace = region_limit(&cfg.problem, gamma, &grids(cfg.lo, cfg.hi, &cfg.cells)?)?;
            let t = trace_table(&trace);
            Output::new(&trace, Some(t), Format::Csv)
        }
        Experiment::Sandwich => {
            let cfg: GridConfig = read_json(config)?;
            let gamma = cfg.gamma.unwrap_or(0.95);
            let rows: Vec<GridSandwich> = lpl_sandwich_grid(&cfg.problem, gamma, &grids(cfg.lo, cfg.hi, &cfg.cells)?)?;
            let mut t = Table::new(&[
                "n_cells",
                "gamma",
                "gamma_next",
                "eta",
                "region_size",
                "lower_holds",
                "upper_holds",
                "equal",
            ]);
            for g in &rows {
                for s in &g.report.steps {
                    t.push(vec![
                        g.n_cells.into(),
                        g.report.gamma.into(),
                        g.report.gamma_next.into(),
                        s.eta.into(),
                        s.region_size.into(),
                        s.lower_holds.into(),
                        s.upper_holds.into(),
                        s.equal.into(),
                    ]);
                }
            }
            Output::new(&rows, Some(t), Format::Csv)
        }
        Experiment::Contrast => {
            let cfg: GridConfig = read_json(config)?;
            let rows: Vec<ContrastRow> = map_limit_contrast(&cfg.problem, &grids(cfg.lo, cfg.hi, &cfg.cells)?)?;
            let mut t = Table::new(&["n_cells", "cell_width", "map_action", "rb_action", "separation_cells"]);
            for r in &rows {
                t.push(vec![
                    r.n_cells.into(),
                    r.cell_width.into(),
                    r.map_action.into(),
                    r.rb_action.into(),
                    r.separation_cells.into(),
                ]);
            }
            Output::new(&rows, Some(t), Format::Csv)
        }
        Experiment::Reparam => {
            let cfg: ReparamConfig = read_json(config)?;
            let r: ReparameterizationReport =
                reparameterization_demo(&build_grid(cfg.lo, cfg.hi, cfg.cells)?, cfg.prior, cfg.posterior)?;
            let mut t = Table::new(&[
                "n_cells",
                "rb_cell_psi",
                "rb_cell_tau",
                "max_rb_relative_gap",
                "map_cell_psi",
                "map_cell_tau",
                "map_shift_cells",
            ]);
            t.push(vec![
                r.n_cells.into(),
                r.rb_cell_psi.into(),
                r.rb_cell_tau.into(),
                r.max_rb_relative_gap.into(),
                r.map_cell_psi.into(),
                r.map_cell_tau.into(),
                r.map_shift_cells.into(),
            ]);
            Output::new(&r, Some(t), Format::Json)
        }
    }
}

/// Exit status for a failed command: 3 for numerical guards, 2 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical_guard() {
        3
    } else {
        2
    }
}

/// Runs the CLI and writes the report; returns the process exit status.
pub fn main_with(cli: Cli) -> i32 {
    let result = run(&cli)
        .and_then(|out| out.render(cli.format, cli.precision))
        .and_then(|text| match &cli.output {
            Some(path) => std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
            None => {
                print!("{text}");
                Ok(())
            }
        });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
