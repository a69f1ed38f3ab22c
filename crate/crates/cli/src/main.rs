use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use voxelbench_core::costmodel::{
    knc_cycle_model, render_tables, CycleModelInputs, ProfileSet, ReferenceData,
};
use voxelbench_core::harness::{append_jsonl, write_csv, RunConfig, RunResult};
use voxelbench_core::microbench::{
    gen_gather_pattern, parse_size, run_gather_bench, run_update_bench_reps, BenchKind, CacheSizes,
    MicrobenchConfig, MicrobenchRecord,
};
use voxelbench_core::{run_benchmark, scaling_sweep, KernelConfig};

/// Exit status when a run completes but breaks one of its invariants.
const VIOLATION_EXIT: u8 = 2;

#[derive(Parser)]
#[command(
    name = "voxelbench",
    version,
    about = "Cone-beam back-projection kernel benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic projection set.
    Synth {
        /// Destination file.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        scan: ScanArgs,
        /// JSON or TOML run file whose `synth` section is used.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Time one kernel configuration.
    Run(RunArgs),
    /// Time one kernel configuration at 1..=N workers.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Largest worker count; defaults to the available cores.
        #[arg(long)]
        max_threads: Option<usize>,
    },
    /// Gather latency or streaming update bandwidth.
    Microbench(MicrobenchArgs),
    /// Evaluate the cycle model.
    Model {
        /// JSON file with the model inputs; the archived inputs when omitted.
        inputs: Option<PathBuf>,
        /// Print the instruction-count and efficiency tables instead.
        #[arg(long)]
        tables: bool,
    },
}

#[derive(Args, Default)]
struct ScanArgs {
    /// Volume edge length in voxels.
    #[arg(long)]
    edge: Option<usize>,
    /// Number of projections.
    #[arg(long)]
    views: Option<usize>,
    /// Detector width in pixels.
    #[arg(long)]
    width: Option<usize>,
    /// Detector height in pixels.
    #[arg(long)]
    height: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    /// JSON or TOML run file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Projection set written by `synth`.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[command(flatten)]
    scan: ScanArgs,
    /// Kernel, e.g. "lanes=8 strategy=padded-gather recip=exact clip=on".
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
    /// Timed repetitions; the best one is reported.
    #[arg(long)]
    reps: Option<usize>,
    /// JSON-lines file results are appended to.
    #[arg(long)]
    results: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the reconstructed volume here.
    #[arg(long)]
    output_volume: Option<PathBuf>,
    /// Fail when the RMSE against the reference kernel exceeds this.
    #[arg(long)]
    max_rmse: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Gather,
    Update,
}

#[derive(Args)]
struct MicrobenchArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    /// Gathered elements sharing one cache line.
    #[arg(long, default_value_t = 16)]
    elements_per_line: u32,
    /// Lanes per gather.
    #[arg(long, default_value_t = 16)]
    lanes: u32,
    /// Bytes, with an optional K/M/G suffix; half of L1 when omitted.
    #[arg(long, value_parser = size_arg)]
    working_set: Option<usize>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    /// Append the record to this JSON-lines file.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn size_arg(s: &str) -> std::result::Result<usize, String> {
    parse_size(s).ok_or_else(|| format!("not a size: '{s}'"))
}

fn read_run_file(path: &Path) -> Result<RunConfig> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg = if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
    } else {
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
    };
    Ok(cfg)
}

fn apply_scan(cfg: &mut RunConfig, scan: &ScanArgs) -> Result<()> {
    let s = &mut cfg.synth;
    if let Some(edge) = scan.edge {
        s.params.edge = edge;
        s.params.origin = -s.params.spacing * (edge as f32 - 1.0) / 2.0;
    }
    if let Some(views) = scan.views {
        s.geometry.num_projections = views;
    }
    if let Some(w) = scan.width {
        s.params.width = w;
    }
    if let Some(h) = scan.height {
        s.params.height = h;
    }
    s.params.validate()?;
    s.geometry.validate()?;
    Ok(())
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => read_run_file(path)?,
            None => RunConfig::default(),
        };
        apply_scan(&mut cfg, &self.scan)?;
        if let Some(d) = &self.dataset {
            cfg.dataset = Some(d.clone());
        }
        if let Some(k) = &self.kernel {
            cfg.kernel = k.parse::<KernelConfig>()?;
        }
        if let Some(t) = self.threads {
            cfg.threads = t;
        }
        if let Some(r) = self.reps {
            cfg.repetitions = r;
        }
        if let Some(p) = &self.results {
            cfg.results_path = Some(p.clone());
        }
        if let Some(p) = &self.csv {
            cfg.csv_path = Some(p.clone());
        }
        if let Some(p) = &self.output_volume {
            cfg.output_volume = Some(p.clone());
        }
        if self.max_rmse.is_some() {
            cfg.max_rmse = self.max_rmse;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Prints and stores the results, then reports any invariant violations.
fn emit(cfg: &RunConfig, results: &[RunResult]) -> Result<bool> {
    for r in results {
        println!("{}", serde_json::to_string(r)?);
    }
    if let Some(p) = &cfg.results_path {
        append_jsonl(p, results)?;
    }
    if let Some(p) = &cfg.csv_path {
        write_csv(p, results)?;
    }
    let mut healthy = true;
    for r in results {
        for v in r.violations(cfg.max_rmse) {
            eprintln!("violation ({} threads): {v}", r.config.threads);
            healthy = false;
        }
    }
    Ok(healthy)
}

fn microbench(args: &MicrobenchArgs) -> Result<()> {
    let ws = args
        .working_set
        .unwrap_or_else(|| CacheSizes::detect().l1_working_set());
    let (kind, config, result) = match args.kind {
        Kind::Gather => {
            if args.threads != 1 {
                bail!("the gather benchmark is single-threaded");
            }
            let pat = gen_gather_pattern(args.elements_per_line, args.lanes, ws)?;
            let r = run_gather_bench(&pat, args.reps)?;
            let cfg = MicrobenchConfig {
                elements_per_line: Some(args.elements_per_line),
                lanes: Some(args.lanes),
                working_set_bytes: pat.working_set_bytes(),
                threads: 1,
                reps: args.reps,
            };
            (BenchKind::Gather, cfg, r)
        }
        Kind::Update => {
            let r = run_update_bench_reps(ws, args.threads, args.reps)?;
            let cfg = MicrobenchConfig {
                elements_per_line: None,
                lanes: None,
                working_set_bytes: ws,
                threads: args.threads,
                reps: args.reps,
            };
            (BenchKind::Update, cfg, r)
        }
    };
    if result.noisy {
        eprintln!("warning: repetitions disagree by more than 10%, result is noisy");
    }
    let record = MicrobenchRecord::new(kind, config, &result);
    let line = serde_json::to_string(&record)?;
    println!("{line}");
    if let Some(path) = &args.json {
        use std::io::Write;
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .with_context(|| format!("opening {}", path.display()))?;
        writeln!(f, "{line}")?;
    }
    Ok(())
}

fn model(inputs: Option<&Path>, tables: bool) -> Result<()> {
    if tables {
        print!("{}", render_tables(&ProfileSet::shipped()));
        return Ok(());
    }
    let inputs: CycleModelInputs = match inputs {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => ReferenceData::shipped().cycle_model.inputs,
    };
    let b = knc_cycle_model(&inputs)?;
    let mut out = serde_json::to_value(b)?;
    out["gatherShare"] = b.gather_share().into();
    out["inputs"] = serde_json::to_value(inputs)?;
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn real_main() -> Result<bool> {
    match Cli::parse().command {
        Command::Synth { out, scan, config } => {
            let mut cfg = match &config {
                Some(path) => read_run_file(path)?,
                None => RunConfig::default(),
            };
            apply_scan(&mut cfg, &scan)?;
            let set = cfg.synth.synthesize()?;
            set.write(&out)?;
            eprintln!(
                "wrote {} projections of {}x{} for a {}^3 volume to {}",
                set.len(),
                set.params.width,
                set.params.height,
                set.params.edge,
                out.display()
            );
            Ok(true)
        }
        Command::Run(args) => {
            let cfg = args.config()?;
            let r = run_benchmark(&cfg)?;
            emit(&cfg, &[r])
        }
        Command::Sweep { run, max_threads } => {
            let cfg = run.config()?;
            let max = max_threads
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let results = scaling_sweep(&cfg, max)?;
            emit(&cfg, &results)
        }
        Command::Microbench(args) => microbench(&args).map(|_| true),
        Command::Model { inputs, tables } => model(inputs.as_deref(), tables).map(|_| true),
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(VIOLATION_EXIT),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
