use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ioamc::format::{self, parse_fraction, parse_task_set, parse_util, VerdictDoc};
use ioamc::harness::{self, Axis, SweepConfig, STANDARD_TESTS};
use ioamc::trace;
use ioamc_core::amc::{audsley_assign, SchedTest};
use ioamc_core::rta::{ss_pibs_rta, ss_rta};
use ioamc_core::sim::{run, scenarios, SimTrace};
use ioamc_core::taskgen::{generate, pibs_to_ss, GenParams};
use ioamc_core::{Rational, TaskSet};

#[derive(Parser)]
#[command(
    name = "ioamc",
    version,
    about = "Sporadic Server / PIBS analysis, simulation and experiments"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a random task set as JSON.
    Generate {
        #[command(flatten)]
        gen: GenArgs,
        /// Total LO utilization.
        #[arg(long, default_value = "0.5")]
        util: String,
        /// Set index within a batch (the seed used is `seed ^ index`).
        #[arg(long, default_value_t = 0)]
        index: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run a schedulability test on a task-set JSON file.
    Analyze {
        set: PathBuf,
        /// Test name, or `all`.
        #[arg(long, default_value = "IO-AMC-rtb")]
        test: String,
        /// Assign priorities with Audsley's algorithm first.
        #[arg(long)]
        audsley: bool,
    },
    /// Simulate a task set under a workload.
    Simulate {
        set: PathBuf,
        workload: PathBuf,
        #[command(flatten)]
        output: TraceOut,
    },
    /// Replay one of the built-in bottom-half walkthroughs.
    ReplayFig {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(scenarios::NAMES))]
        name: String,
        #[command(flatten)]
        output: TraceOut,
    },
    /// Acceptance ratio of each test over the utilization grid.
    Sweep {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Write the sets behind dominance violations here.
        #[arg(long, default_value = "counterexamples")]
        dump_dir: PathBuf,
    },
    /// Weighted schedulability of each test along one generation parameter.
    Weighted {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long, value_parser = ["p_hi", "cf", "n"])]
        axis: String,
        /// Comma-separated axis values; a standard range by default.
        #[arg(long)]
        values: Option<String>,
    },
    /// Simulate accepted sets under stress and count HI deadline misses.
    Safety {
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 5000)]
        sets: usize,
        /// Failing sets and workloads are written here.
        #[arg(long, default_value = "safety-failures")]
        archive_dir: PathBuf,
    },
}

#[derive(Args, Clone)]
struct GenArgs {
    #[arg(long, default_value_t = 15)]
    n_main: usize,
    #[arg(long, default_value_t = 5)]
    n_io: usize,
    #[arg(long, default_value = "0.05")]
    io_util: String,
    /// Criticality factor.
    #[arg(long, default_value = "2")]
    cf: String,
    #[arg(long, default_value_t = 0.5)]
    p_hi: f64,
    #[arg(long, default_value_t = 1)]
    period_min: u64,
    #[arg(long, default_value_t = 100)]
    period_max: u64,
    /// LO servers and PIBS keep a reduced budget in HI mode.
    #[arg(long)]
    extended: bool,
}

impl GenArgs {
    fn params(&self, seed: u64) -> Result<GenParams> {
        let (n, d) = parse_fraction(&self.cf)?;
        Ok(GenParams {
            n_main: self.n_main,
            n_io: self.n_io,
            io_total_util: parse_util(&self.io_util)?,
            crit_factor: Rational::new(n.into(), d.into()),
            p_hi: self.p_hi,
            period_range: (self.period_min, self.period_max),
            extended: self.extended,
            seed,
            ..GenParams::default()
        })
    }
}

#[derive(Args, Clone)]
struct ExperimentArgs {
    #[command(flatten)]
    gen: GenArgs,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    n_sets: usize,
    /// Comma-separated test names; the six standard tests by default.
    #[arg(long)]
    tests: Option<String>,
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Rayon worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

impl ExperimentArgs {
    fn config(&self) -> Result<SweepConfig> {
        if self.threads > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(self.threads)
                .build_global()?;
        }
        let tests = match &self.tests {
            Some(list) => list
                .split(',')
                .map(|t| {
                    t.parse::<SchedTest>()
                        .with_context(|| format!("test {t:?}"))
                })
                .collect::<Result<_>>()?,
            None => STANDARD_TESTS.to_vec(),
        };
        Ok(SweepConfig::new(
            tests,
            self.n_sets,
            self.gen.params(self.seed)?,
        ))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TraceFormat {
    Ndjson,
    Csv,
}

#[derive(Args, Clone)]
struct TraceOut {
    #[arg(long, value_enum, default_value = "ndjson")]
    format: TraceFormat,
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Also write executed segments as CSV.
    #[arg(long)]
    segments: Option<PathBuf>,
    /// Also write per-job records as CSV.
    #[arg(long)]
    jobs: Option<PathBuf>,
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(
            fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    })
}

fn read(path: &PathBuf) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Writes the trace; returns whether it is well formed.
fn emit_trace(trace: &SimTrace, output: &TraceOut) -> Result<bool> {
    let mut out = sink(&output.out)?;
    match output.format {
        TraceFormat::Ndjson => trace::write_ndjson(trace, &mut out)?,
        TraceFormat::Csv => trace::write_csv(trace, &mut out)?,
    }
    out.flush()?;
    if let Some(p) = &output.segments {
        trace::write_segments_csv(trace, fs::File::create(p)?)?;
    }
    if let Some(p) = &output.jobs {
        trace::write_jobs_csv(trace, fs::File::create(p)?)?;
    }
    eprintln!(
        "{} events, {} jobs, {} misses ({} HI), mode change at {}",
        trace.events.len(),
        trace.jobs.len(),
        trace.misses().count(),
        trace.hi_misses(),
        trace
            .mode_change_at
            .map_or("-".to_string(), |t| t.to_string())
    );
    match trace.check_well_formed() {
        Ok(()) => Ok(true),
        Err(e) => {
            eprintln!("malformed trace: {e}");
            Ok(false)
        }
    }
}

fn verdict(set: &TaskSet, test: SchedTest, audsley: bool) -> Result<VerdictDoc> {
    let target = if test.uses_pibs() {
        set.clone()
    } else {
        pibs_to_ss(set)?
    };
    let target = if audsley {
        match audsley_assign(&target, test) {
            Some(t) => t,
            None => {
                eprintln!("{test}: no feasible priority order");
                target
            }
        }
    } else {
        target
    };
    Ok(match test {
        SchedTest::SsRta => VerdictDoc::from_rta(test.name(), &target, &ss_rta(&target)),
        SchedTest::SsPibsRta => VerdictDoc::from_rta(test.name(), &target, &ss_pibs_rta(&target)),
        _ => VerdictDoc::from(&test.evaluate(&target)?),
    })
}

fn exec(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Generate {
            gen,
            util,
            index,
            seed,
            out,
        } => {
            let params = GenParams {
                total_util: parse_util(&util)?,
                ..gen.params(seed)?.for_index(index)
            };
            let set = generate(&params)?;
            let mut w = sink(&out)?;
            writeln!(w, "{}", format::task_set_json(&set))?;
            w.flush()?;
            Ok(true)
        }
        Cmd::Analyze { set, test, audsley } => {
            let set = parse_task_set(&read(&set)?)?;
            let tests = if test == "all" {
                SchedTest::ALL.to_vec()
            } else {
                vec![test.parse()?]
            };
            let docs = tests
                .into_iter()
                .map(|t| verdict(&set, t, audsley))
                .collect::<Result<Vec<_>>>()?;
            let json = if docs.len() == 1 {
                serde_json::to_string_pretty(&docs[0])?
            } else {
                serde_json::to_string_pretty(&docs)?
            };
            println!("{json}");
            Ok(true)
        }
        Cmd::Simulate {
            set,
            workload,
            output,
        } => {
            let set = parse_task_set(&read(&set)?)?;
            let input = format::parse_workload(&read(&workload)?)?;
            let trace = run(&set, &input.workload, input.horizon, input.config)?;
            emit_trace(&trace, &output)
        }
        Cmd::ReplayFig { name, output } => {
            let s = scenarios::by_name(&name).context("unknown scenario")?;
            let trace = run(&s.set, &s.workload, s.horizon, s.config)?;
            emit_trace(&trace, &output)
        }
        Cmd::Sweep { exp, dump_dir } => {
            let cfg = exp.config()?;
            let result = harness::sweep(&cfg)?;
            let mut w = sink(&exp.out)?;
            result.write_csv(&mut w)?;
            w.flush()?;
            report(&result.violations);
            for p in harness::dump_counterexamples(&cfg, &result.violations, &dump_dir)? {
                eprintln!("wrote {}", p.display());
            }
            Ok(result.violations.is_empty())
        }
        Cmd::Weighted { exp, axis, values } => {
            let cfg = exp.config()?;
            let axis = match values {
                None => Axis::standard(&axis).expect("validated by clap"),
                Some(v) => parse_axis(&axis, &v)?,
            };
            let result = harness::weighted(&cfg, &axis)?;
            let mut w = sink(&exp.out)?;
            harness::write_weighted_csv(&result.rows, &mut w)?;
            w.flush()?;
            report(&result.violations);
            Ok(result.violations.is_empty())
        }
        Cmd::Safety {
            gen,
            seed,
            sets,
            archive_dir,
        } => {
            let params = gen.params(seed)?;
            let report = harness::safety_campaign(&params, sets)?;
            eprintln!(
                "{} accepted of {} generated, {} mode changes, {} with HI misses",
                report.accepted,
                report.generated,
                report.mode_changes,
                report.failures.len()
            );
            for f in &report.failures {
                fs::create_dir_all(&archive_dir)?;
                let base = archive_dir.join(format!("seed{}", f.seed));
                fs::write(
                    base.with_extension("set.json"),
                    format::task_set_json(&f.set),
                )?;
                let input = format::SimInput {
                    workload: f.workload.clone(),
                    horizon: f.horizon,
                    config: Default::default(),
                };
                fs::write(
                    base.with_extension("workload.json"),
                    serde_json::to_string_pretty(&format::WorkloadDoc::from_input(&input))?,
                )?;
                eprintln!(
                    "seed {}: {} HI misses, archived under {}",
                    f.seed,
                    f.hi_misses,
                    archive_dir.display()
                );
            }
            Ok(report.failures.is_empty())
        }
    }
}

fn parse_axis(name: &str, values: &str) -> Result<Axis> {
    let parts = values.split(',').map(str::trim);
    Ok(match name {
        "p_hi" => Axis::PHi(
            parts
                .map(|v| v.parse::<f64>().context("p_hi value"))
                .collect::<Result<_>>()?,
        ),
        "cf" => Axis::CritFactor(
            parts
                .map(|v| parse_fraction(v).map(|(n, d)| Rational::new(n.into(), d.into())))
                .collect::<Result<_>>()?,
        ),
        "n" => Axis::Tasks(
            parts
                .map(|v| v.parse::<usize>().context("task count"))
                .collect::<Result<_>>()?,
        ),
        _ => bail!("unknown axis {name}"),
    })
}

fn report(violations: &[harness::Violation]) {
    for v in violations {
        eprintln!("violation: {v}");
    }
}

fn main() -> ExitCode {
    match exec(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
