//! `anneal`: experiment drivers and one-off runs.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use anneal_core::anneal::{AnnealerConfig, RunReport, Tuning};
use anneal_core::config::{OracleKind, RunConfig};
use anneal_core::ellipsoid::{ellipsoid_minimize, EllipsoidConfig};
use anneal_core::entropic::{theta_profile, DEFAULT_GRID_SIZE, DEFAULT_S_MAX};
use anneal_core::experiments::fixtures::{format_matrix_blocks, read_matrix_file};
use anneal_core::experiments::suites::run_annealer;
use anneal_core::experiments::{
    covariance_experiment, extremal_fixtures, gap_experiment, gen_extremal_dnn, gen_objective,
    gen_unit_vector, mean_experiment, reference_moments, separation_experiment, AnnealMethod, Body,
    ExperimentTable, GapProblem, NamedMatrix, ReferenceScale, SamplingGrid, SeparationMethod,
};
use anneal_core::linalg::Vector;
use anneal_core::schedule::ScheduleKind;
use anneal_core::theory::heuristic_params;

#[derive(Parser)]
#[command(
    name = "anneal",
    version,
    about = "Simulated annealing over membership oracles"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct Common {
    /// `key = value` file; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file. Tables also get a `<stem>.long.csv` companion.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Drop wall-clock columns so reruns are byte-identical.
    #[arg(long, global = true)]
    no_timing: bool,
}

#[derive(Args, Default)]
struct TuningArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    vartheta: Option<f64>,
    #[arg(long = "eps-bar")]
    eps_bar: Option<f64>,
    /// Failure probability.
    #[arg(long)]
    p: Option<f64>,
    /// kalai-vempala, ah-type or combined-min.
    #[arg(long)]
    schedule: Option<ScheduleKind>,
}

#[derive(Args)]
struct GridArgs {
    /// Comma-separated walk lengths; 0 means i.i.d. sampling (cube only).
    #[arg(long, value_delimiter = ',')]
    ell: Vec<usize>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    samples: Vec<usize>,
}

#[derive(Args)]
struct MomentArgs {
    /// Cube dimension.
    #[arg(long, conflicts_with = "m")]
    n: Option<usize>,
    /// DNN matrix order.
    #[arg(long)]
    m: Option<usize>,
    #[command(flatten)]
    grid: GridArgs,
    /// Reference walk length 50 000 instead of 5 000.
    #[arg(long)]
    paper_scale: bool,
    #[arg(long)]
    ref_samples: Option<usize>,
    #[arg(long)]
    ref_ell: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum InstanceKind {
    Objective,
    Extremal,
}

#[derive(Args)]
struct BodyArgs {
    /// ball, cube, dnn or copositive-cap.
    #[arg(long)]
    oracle: Option<OracleKind>,
    /// Matrix order for matrix bodies.
    #[arg(long)]
    m: Option<usize>,
    /// Dimension for vector bodies.
    #[arg(long)]
    n: Option<usize>,
    /// Matrix file; its first block `Y` gives the objective `svec(Y)/‖svec(Y)‖`.
    #[arg(long)]
    objective: Option<PathBuf>,
    /// Seed of a random objective when no file is given (default: --seed).
    #[arg(long)]
    objective_seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Profile of `⟨θ, H(θ)θ⟩` over `‖θ‖` for the unit ball.
    ThetaBall {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_S_MAX)]
        s_max: f64,
        #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
        grid: usize,
    },
    /// Covariance approximation error over an `ℓ × N` grid.
    Covlab(MomentArgs),
    /// Mean approximation error over an `ℓ × N` grid.
    Meanlab(MomentArgs),
    /// Final optimality gap on a random DNN instance over an `ℓ × N` grid.
    Gap {
        /// DNN matrix order (default 5).
        #[arg(long)]
        m: Option<usize>,
        /// kv (covariance-adaptive) or heuristic.
        #[arg(long, default_value = "heuristic")]
        method: AnnealMethod,
        /// Seed of the random objective (default: --seed).
        #[arg(long)]
        objective_seed: Option<u64>,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        tuning: TuningArgs,
    },
    /// Separating copositive matrices for the extremal fixtures.
    Separate {
        /// heuristic or ellipsoid.
        #[arg(long, default_value = "heuristic")]
        method: SeparationMethod,
        /// Matrix file; defaults to the ten shipped fixtures.
        #[arg(long)]
        fixtures: Option<PathBuf>,
        /// Number of seeds; with more than one, a `<stem>.spread.csv` summary is written.
        #[arg(long, default_value_t = 1)]
        repeats: usize,
    },
    /// One annealing run; writes a JSON report.
    Anneal {
        #[command(flatten)]
        body: BodyArgs,
        /// kv (covariance-adaptive) or heuristic.
        #[arg(long, default_value = "heuristic")]
        method: AnnealMethod,
        /// Sample count N (default: the heuristic choice for the dimension).
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        ell: Option<usize>,
        /// Fixed number of phases.
        #[arg(long)]
        phases: Option<usize>,
        /// Per-phase CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        tuning: TuningArgs,
    },
    /// Central-cut ellipsoid method; writes a JSON result.
    Ellipsoid {
        #[command(flatten)]
        body: BodyArgs,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long, default_value_t = 1_000_000)]
        max_iters: usize,
        /// Per-iteration CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Random objectives (JSON) or extremal DNN matrices (block text).
    GenInstance {
        #[arg(long, value_enum)]
        kind: InstanceKind,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
}

/// Flag values merged over the config file.
struct Ctx {
    cfg: RunConfig,
    out: Option<PathBuf>,
    timing: bool,
}

impl Ctx {
    fn seed(&self) -> u64 {
        self.cfg.seed.unwrap_or(0)
    }

    fn tuning(&self, t: &TuningArgs) -> Tuning {
        let d = Tuning::default();
        Tuning {
            schedule: t.schedule.or(self.cfg.schedule),
            alpha: t.alpha.or(self.cfg.alpha).unwrap_or(d.alpha),
            vartheta: t.vartheta.or(self.cfg.vartheta),
            epsilon_bar: t.eps_bar.or(self.cfg.epsilon_bar).unwrap_or(d.epsilon_bar),
            failure_prob: t.p.or(self.cfg.p).unwrap_or(d.failure_prob),
        }
    }

    fn grid(&self, g: &GridArgs, ell: &[usize], samples: &[usize]) -> SamplingGrid {
        let pick = |flag: &[usize], cfg: Option<usize>, default: &[usize]| {
            if !flag.is_empty() {
                flag.to_vec()
            } else if let Some(v) = cfg {
                vec![v]
            } else {
                default.to_vec()
            }
        };
        SamplingGrid {
            walk_lengths: pick(&g.ell, self.cfg.ell, ell),
            sample_sizes: pick(&g.samples, self.cfg.samples, samples),
        }
    }

    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(
                File::create(p).with_context(|| format!("creating {}", p.display()))?,
            )),
            None => Box::new(io::stdout().lock()),
        })
    }

    fn emit_table(&self, table: &ExperimentTable, id: &[&str]) -> Result<()> {
        let t = if self.timing {
            table.clone()
        } else {
            table.without(&["seconds"])
        };
        t.write_csv(self.writer()?)?;
        if let Some(p) = &self.out {
            let long = sibling(p, "long.csv");
            t.write_long_csv(File::create(&long)?, id)?;
        }
        Ok(())
    }
}

/// `dir/stem.<suffix>` next to `path`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        // a closed downstream pipe is not an error
        if let Some(io) = e.downcast_ref::<io::Error>() {
            if io.kind() == io::ErrorKind::BrokenPipe {
                return;
            }
        }
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let file_cfg = match &cli.common.config {
        Some(p) => RunConfig::read(p).with_context(|| format!("reading {}", p.display()))?,
        None => RunConfig::default(),
    };
    let flags = RunConfig {
        seed: cli.common.seed,
        ..Default::default()
    };
    let ctx = Ctx {
        cfg: file_cfg.overlay(&flags),
        out: cli.common.out.clone(),
        timing: !cli.common.no_timing,
    };
    match &cli.cmd {
        Command::ThetaBall { n, s_max, grid } => theta_ball(&ctx, *n, *s_max, *grid),
        Command::Covlab(a) => moments(&ctx, a, true),
        Command::Meanlab(a) => moments(&ctx, a, false),
        Command::Gap {
            m,
            method,
            objective_seed,
            grid,
            tuning,
        } => gap(&ctx, *m, *method, *objective_seed, grid, tuning),
        Command::Separate {
            method,
            fixtures,
            repeats,
        } => separate(&ctx, *method, fixtures.as_deref(), *repeats),
        Command::Anneal {
            body,
            method,
            samples,
            ell,
            phases,
            csv,
            tuning,
        } => anneal(
            &ctx,
            body,
            *method,
            *samples,
            *ell,
            *phases,
            csv.as_deref(),
            tuning,
        ),
        Command::Ellipsoid {
            body,
            tol,
            max_iters,
            trace,
        } => ellipsoid(&ctx, body, *tol, *max_iters, trace.as_deref()),
        Command::GenInstance { kind, m, count } => gen_instance(&ctx, *kind, *m, *count),
    }
}

fn theta_ball(ctx: &Ctx, n: Option<usize>, s_max: f64, grid: usize) -> Result<()> {
    let n = n.or(ctx.cfg.n).context("--n is required")?;
    let profile = theta_profile(n, s_max, grid)?;
    profile.write_csv(ctx.writer()?)?;
    eprintln!(
        "n = {n}: sup = {:.6} at s = {:.4e}; (n+1)/2 = {}, bound n+1 = {}",
        profile.sup,
        profile.argmax(),
        (n as f64 + 1.0) / 2.0,
        n + 1
    );
    Ok(())
}

fn moments(ctx: &Ctx, a: &MomentArgs, covariance: bool) -> Result<()> {
    let body = match (a.n.or(ctx.cfg.n), a.m.or(ctx.cfg.m)) {
        (Some(n), None) => Body::Cube(n),
        (None, Some(m)) => Body::Dnn(m),
        (Some(_), Some(_)) => bail!("give either --n (cube) or --m (DNN), not both"),
        (None, None) => bail!("--n (cube) or --m (DNN) is required"),
    };
    let default_ell: &[usize] = match body {
        Body::Cube(_) => &[0, 10, 100, 1000],
        Body::Dnn(_) => &[10, 100, 1000],
    };
    let grid = ctx.grid(&a.grid, default_ell, &[500, 1000, 2000, 4000, 8000]);
    let mut scale = if a.paper_scale {
        ReferenceScale::PAPER
    } else {
        ReferenceScale::DESK
    };
    if let Some(s) = a.ref_samples {
        scale.samples = s;
    }
    if let Some(l) = a.ref_ell {
        scale.walk_length = l;
    }
    let seed = ctx.seed();
    let reference = reference_moments(body, scale, seed)?;
    let table = if covariance {
        covariance_experiment(body, &grid, &reference, seed)?
    } else {
        mean_experiment(body, &grid, &reference, seed)?
    };
    ctx.emit_table(&table, &["body", "size", "ell", "N"])
}

fn gap(
    ctx: &Ctx,
    m: Option<usize>,
    method: AnnealMethod,
    objective_seed: Option<u64>,
    grid: &GridArgs,
    tuning: &TuningArgs,
) -> Result<()> {
    let m = m.or(ctx.cfg.m).unwrap_or(5);
    let (n_eq, l_eq) = heuristic_params((m * (m + 1) / 2) as u64)?;
    let grid = ctx.grid(grid, &[l_eq as usize], &[n_eq as usize]);
    let problem = GapProblem::new(m, objective_seed.unwrap_or(ctx.seed()))?;
    eprintln!(
        "reference value {:.9e} ({} separation calls)",
        problem.reference_value, problem.reference_calls
    );
    let table = gap_experiment(&problem, method, &ctx.tuning(tuning), &grid, ctx.seed())?;
    ctx.emit_table(&table, &["m", "ell", "N"])
}

fn separate(
    ctx: &Ctx,
    method: SeparationMethod,
    fixtures: Option<&Path>,
    repeats: usize,
) -> Result<()> {
    if repeats == 0 {
        bail!("--repeats must be >= 1");
    }
    let fixtures: Vec<NamedMatrix> = match fixtures {
        Some(p) => read_matrix_file(p).with_context(|| format!("reading {}", p.display()))?,
        None => extremal_fixtures(),
    };
    let seed = ctx.seed();
    let (table, _) = separation_experiment(&fixtures, method, seed)?;
    ctx.emit_table(&table, &["name"])?;
    if repeats > 1 {
        let mut runs = vec![table.column_f64("objective").context("objective column")?];
        for r in 1..repeats as u64 {
            let (t, _) = separation_experiment(&fixtures, method, seed.wrapping_add(r))?;
            runs.push(t.column_f64("objective").context("objective column")?);
        }
        let mut spread = ExperimentTable::new(&["name", "runs", "min", "mean", "max"]);
        for (i, y) in fixtures.iter().enumerate() {
            let v: Vec<f64> = runs.iter().map(|r| r[i]).collect();
            let min = v.iter().copied().fold(f64::INFINITY, f64::min);
            let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            spread.push(vec![
                y.name.as_str().into(),
                repeats.into(),
                min.into(),
                mean.into(),
                max.into(),
            ])?;
        }
        match &ctx.out {
            Some(p) => spread.write_csv(File::create(sibling(p, "spread.csv"))?)?,
            None => spread.write_csv(io::stderr())?,
        }
    }
    Ok(())
}

struct ResolvedBody {
    kind: OracleKind,
    size: usize,
    objective: Vector,
}

fn resolve_body(ctx: &Ctx, b: &BodyArgs) -> Result<ResolvedBody> {
    let kind = b
        .oracle
        .or(ctx.cfg.oracle)
        .context("--oracle is required")?;
    let size = if kind.is_matrix() {
        b.m.or(ctx.cfg.m)
            .context("--m is required for matrix bodies")?
    } else {
        b.n.or(ctx.cfg.n)
            .context("--n is required for vector bodies")?
    };
    let path = b.objective.clone().or_else(|| ctx.cfg.objective.clone());
    let objective = match path {
        Some(p) => {
            if !kind.is_matrix() {
                bail!("objective files hold matrices; use a matrix body");
            }
            let y = read_matrix_file(&p)
                .with_context(|| format!("reading {}", p.display()))?
                .into_iter()
                .next()
                .context("objective file holds no matrix")?;
            if y.matrix.order() != size {
                bail!(
                    "objective is {}x{}, body order is {size}",
                    y.matrix.order(),
                    y.matrix.order()
                );
            }
            y.normalized_objective()
        }
        None => {
            let seed = b.objective_seed.unwrap_or(ctx.seed());
            if kind.is_matrix() {
                gen_objective(size, seed)?.c
            } else {
                gen_unit_vector(size, seed)?
            }
        }
    };
    Ok(ResolvedBody {
        kind,
        size,
        objective,
    })
}

#[allow(clippy::too_many_arguments)]
fn anneal(
    ctx: &Ctx,
    body: &BodyArgs,
    method: AnnealMethod,
    samples: Option<usize>,
    ell: Option<usize>,
    phases: Option<usize>,
    csv: Option<&Path>,
    tuning: &TuningArgs,
) -> Result<()> {
    let b = resolve_body(ctx, body)?;
    let oracle = b.kind.build(b.size)?;
    let (n_eq, l_eq) = heuristic_params(oracle.dim() as u64)?;
    let mut cfg = AnnealerConfig::new(
        b.objective,
        samples.or(ctx.cfg.samples).unwrap_or(n_eq as usize),
        ell.or(ctx.cfg.ell).unwrap_or(l_eq as usize),
        ctx.seed(),
    )
    .with_tuning(&ctx.tuning(tuning));
    cfg.phases = phases.or(ctx.cfg.phases);
    let mut report: RunReport = run_annealer(method, oracle.as_ref(), &cfg)?;
    if !ctx.timing {
        report.strip_timing();
    }
    if let Some(p) = csv {
        report.write_csv(File::create(p)?, ctx.timing)?;
    }
    let mut w = ctx.writer()?;
    writeln!(w, "{}", report.to_json()?)?;
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    eprintln!(
        "final objective {:.9e} after {} phases, {} oracle calls",
        report.final_objective,
        report.phases.len(),
        report.total_calls()
    );
    Ok(())
}

fn ellipsoid(
    ctx: &Ctx,
    body: &BodyArgs,
    tol: f64,
    max_iters: usize,
    trace: Option<&Path>,
) -> Result<()> {
    let b = resolve_body(ctx, body)?;
    let (sep, radius) = b.kind.separator(b.size)?;
    let mut cfg = EllipsoidConfig::new(radius, tol);
    cfg.max_iters = max_iters;
    cfg.trace = trace.is_some();
    let result = ellipsoid_minimize(&b.objective, sep.as_ref(), &cfg)?;
    if let Some(p) = trace {
        result.write_trace_csv(File::create(p)?)?;
    }
    let mut w = ctx.writer()?;
    let json = serde_json::json!({
        "oracle": b.kind,
        "size": b.size,
        "point": result.point.as_slice(),
        "value": result.value,
        "oracle_calls": result.oracle_calls,
        "iterations": result.iterations,
        "converged": result.converged,
        "gap_bound": result.gap_bound,
        "repairs": result.repairs,
    });
    writeln!(w, "{}", serde_json::to_string_pretty(&json)?)?;
    eprintln!(
        "value {:.9e} after {} calls (converged: {})",
        result.value, result.oracle_calls, result.converged
    );
    Ok(())
}

fn gen_instance(ctx: &Ctx, kind: InstanceKind, m: Option<usize>, count: usize) -> Result<()> {
    let seed = ctx.seed();
    let mut w = ctx.writer()?;
    match kind {
        InstanceKind::Objective => {
            let m = m.or(ctx.cfg.m).context("--m is required")?;
            let objs = (0..count as u64)
                .map(|i| gen_objective(m, seed.wrapping_add(i)))
                .collect::<anneal_core::Result<Vec<_>>>()?;
            writeln!(w, "{}", serde_json::to_string_pretty(&objs)?)?;
        }
        InstanceKind::Extremal => {
            let mut mats = Vec::with_capacity(count);
            for i in 0..count as u64 {
                let s = seed.wrapping_add(i);
                let g = gen_extremal_dnn(s)?;
                mats.push(NamedMatrix {
                    name: format!("extremal_seed_{s}"),
                    matrix: g.matrix,
                });
            }
            write!(w, "{}", format_matrix_blocks(&mats))?;
        }
    }
    Ok(())
}
