use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use recycle_core::recycling::{Placement, StrategyDescriptor};
use recycle_lab::image::load_image;
use recycle_lab::output::{csv_bytes, write_csv};
use recycle_lab::similarity::similarity_report;
use recycle_lab::sweep::{cg_vs_minres, compare, dimension_sweep, flops_table};
use recycle_lab::{
    compute_references, make_inpainting, record_sequence, replay, LabError, ReplayConfig, Result, RunConfig,
    SequenceRecord, StopChoice, REFERENCE_TOL,
};

#[derive(Parser)]
#[command(name = "recycle-lab", version, about = "Record and replay Hessian-system sequences of bilevel learning runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the bilevel problem without recycling and store its Hessian systems.
    Record(RecordArgs),
    /// Add high-accuracy reference solutions to a stored sequence.
    References(ReferenceArgs),
    /// Re-solve a stored sequence under one strategy.
    Replay(ReplayArgs),
    /// Replay a comma-separated list of strategies.
    Compare(CompareArgs),
    /// Relative differences between consecutive systems.
    Similarity(SeqArgs),
    /// Replay one strategy for several recycle dimensions.
    Sweep(SweepArgs),
    /// Counted FLOPs of a replay next to the closed forms.
    Flops(ReplayArgs),
    /// MINRES and CG, cold and warm started, without recycling.
    Baseline(BaselineArgs),
}

#[derive(Args)]
struct RecordArgs {
    /// `builtin`, `builtin:<size>`, a CSV grid, a PGM file or an IDX file (`path#index`).
    #[arg(long, default_value = "builtin")]
    image: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.3)]
    rate: f64,
    #[arg(long, default_value_t = 0.3)]
    noise: f64,
    /// Residual tolerance of the recorded solves.
    #[arg(long, default_value_t = 1e-2)]
    delta: f64,
    #[arg(long, default_value_t = 500)]
    max_inner: usize,
    #[arg(long, default_value_t = 25)]
    max_upper: usize,
    /// Also compute reference solutions.
    #[arg(long)]
    references: bool,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SeqArgs {
    /// Directory written by `record`.
    #[arg(long)]
    seq: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReferenceArgs {
    #[arg(long)]
    seq: PathBuf,
    #[arg(long, default_value_t = REFERENCE_TOL)]
    tol: f64,
    /// Output directory; the input directory is updated when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SolveArgs {
    /// Recycle space dimension.
    #[arg(long, default_value_t = 30)]
    recycle_dim: usize,
    /// Stop rule; follows the strategy's -NSC suffix when omitted.
    #[arg(long, value_parser = parse_stop)]
    stop: Option<StopChoice>,
    #[arg(long, default_value_t = 1e-2)]
    delta: f64,
    /// Build the recycle space from the previous Hessian.
    #[arg(long)]
    inner: bool,
    #[arg(long, default_value_t = 500)]
    max_inner: usize,
    /// Warm-start each solve from the previous solution.
    #[arg(long)]
    warm_start: bool,
    /// Also compute the upper cost after one linesearch step per system.
    #[arg(long)]
    one_step: bool,
}

#[derive(Args)]
struct ReplayArgs {
    #[command(flatten)]
    seq: SeqArgs,
    /// Strategy acronym such as `Ritz-S`, `RGen-L(R)` or `RGen-L(R)-NSC`.
    #[arg(long, default_value = "None")]
    strategy: String,
    #[command(flatten)]
    solve: SolveArgs,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    seq: SeqArgs,
    #[arg(long, default_value = "None,Ritz-S,RGen-L(R),RGen-L(R)-NSC")]
    strategies: String,
    #[command(flatten)]
    solve: SolveArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    seq: SeqArgs,
    #[arg(long, default_value = "Ritz-S")]
    strategy: String,
    /// Comma-separated recycle dimensions.
    #[arg(long, default_value = "0,5,10,20,30,40,60")]
    dims: String,
    #[command(flatten)]
    solve: SolveArgs,
}

#[derive(Args)]
struct BaselineArgs {
    #[command(flatten)]
    seq: SeqArgs,
    #[arg(long, default_value_t = 1e-2)]
    delta: f64,
    #[arg(long, default_value_t = 500)]
    max_inner: usize,
}

fn parse_stop(s: &str) -> std::result::Result<StopChoice, String> {
    match s {
        "res" => Ok(StopChoice::Residual),
        "nsc" => Ok(StopChoice::Nsc),
        "true-hg" => Ok(StopChoice::TrueHg),
        _ => Err(format!("expected res, nsc or true-hg, got {s:?}")),
    }
}

fn parse_strategy(s: &str, inner: bool) -> Result<StrategyDescriptor> {
    let d: StrategyDescriptor = s.trim().parse()?;
    Ok(if inner { d.with_placement(Placement::Inner) } else { d })
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|item| {
            item.trim()
                .parse()
                .map_err(|_| LabError::Config(format!("bad {what} {item:?}")))
        })
        .collect()
}

impl SolveArgs {
    fn config(&self, strategy: StrategyDescriptor) -> ReplayConfig {
        let mut cfg = ReplayConfig::new(strategy, self.recycle_dim, self.delta)
            .with_max_iter(self.max_inner)
            .with_warm_start(self.warm_start)
            .with_one_step(self.one_step);
        if let Some(stop) = self.stop {
            cfg = cfg.with_stop(stop);
        }
        cfg
    }
}

fn emit<T: Serialize>(out: Option<&Path>, rows: &[T]) -> Result<()> {
    match out {
        Some(path) => write_csv(path, rows),
        None => {
            let bytes = csv_bytes(rows)?;
            std::io::stdout()
                .write_all(&bytes)
                .map_err(|e| LabError::io(Path::new("<stdout>"), e))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Record(a) => {
            let cfg = RunConfig {
                image: a.image,
                seed: a.seed,
                rate: a.rate,
                noise: a.noise,
                delta: a.delta,
                max_inner: a.max_inner,
                max_upper: a.max_upper,
                ..RunConfig::default()
            };
            let img = load_image(&cfg.image)?;
            let (prob, theta0) = make_inpainting(&cfg, &img)?;
            let mut seq = record_sequence(&cfg, prob, &theta0)?;
            if a.references {
                compute_references(&mut seq, REFERENCE_TOL)?;
            }
            seq.save(&a.out)?;
            eprintln!(
                "recorded {} systems, {} inner iterations, converged: {}",
                seq.len(),
                seq.total_iterations(),
                seq.converged
            );
        }
        Command::References(a) => {
            let mut seq = SequenceRecord::load(&a.seq)?;
            compute_references(&mut seq, a.tol)?;
            seq.save(a.out.as_deref().unwrap_or(&a.seq))?;
            let worst = seq
                .reference_residuals
                .iter()
                .flatten()
                .fold(0.0f64, |m, &r| m.max(r));
            eprintln!("references for {} systems, largest residual {worst:e}", seq.len());
        }
        Command::Replay(a) => {
            let seq = SequenceRecord::load(&a.seq.seq)?;
            let cfg = a.solve.config(parse_strategy(&a.strategy, a.solve.inner)?);
            let report = replay(&seq, &cfg)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            emit(a.seq.out.as_deref(), &report.rows)?;
            eprintln!("{}: {} inner iterations", cfg.strategy, report.total_iterations());
        }
        Command::Compare(a) => {
            let seq = SequenceRecord::load(&a.seq.seq)?;
            let base = a.solve.config(StrategyDescriptor::NONE);
            let list = a
                .strategies
                .split(',')
                .map(|s| {
                    let d = parse_strategy(s, a.solve.inner)?;
                    let stop = a.solve.stop.unwrap_or(if d.nsc { StopChoice::Nsc } else { StopChoice::Residual });
                    Ok((d, stop))
                })
                .collect::<Result<Vec<_>>>()?;
            let reports = compare(&seq, &base, &list)?;
            let rows: Vec<_> = reports.iter().flat_map(|r| r.rows.iter().cloned()).collect();
            emit(a.seq.out.as_deref(), &rows)?;
            for ((d, _), r) in list.iter().zip(&reports) {
                eprintln!("{d}: {} inner iterations", r.total_iterations());
            }
        }
        Command::Similarity(a) => {
            let seq = SequenceRecord::load(&a.seq)?;
            emit(a.out.as_deref(), &similarity_report(&seq)?)?;
        }
        Command::Sweep(a) => {
            let seq = SequenceRecord::load(&a.seq.seq)?;
            let base = a.solve.config(parse_strategy(&a.strategy, a.solve.inner)?);
            let dims: Vec<usize> = parse_list(&a.dims, "recycle dimension")?;
            emit(a.seq.out.as_deref(), &dimension_sweep(&seq, &base, &dims)?)?;
        }
        Command::Flops(a) => {
            let seq = SequenceRecord::load(&a.seq.seq)?;
            let cfg = a.solve.config(parse_strategy(&a.strategy, a.solve.inner)?);
            let report = replay(&seq, &cfg)?;
            emit(a.seq.out.as_deref(), &flops_table(&seq, &report)?)?;
        }
        Command::Baseline(a) => {
            let seq = SequenceRecord::load(&a.seq.seq)?;
            emit(a.seq.out.as_deref(), &cg_vs_minres(&seq, a.delta, a.max_inner)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
