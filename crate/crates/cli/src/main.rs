use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hetnet::admm::AdmmParams;
use hetnet::bench::{bench_routing, compare_methods, problem_size, summarize, Comparison};
use hetnet::instance_io::{instance_to_toml, load_instance};
use hetnet::maxmin::{n_maxmin_solve, OuterParams, SolveReport, SolveStatus};
use hetnet::model::Instance;
use hetnet::qos::{complementarity_residual, qos_solve, QosSpec};
use hetnet::scenario::{self, ScenarioConfig, Template};
use hetnet::Error;

const EXIT_CAP: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_INTERNAL: u8 = 4;

#[derive(Parser)]
#[command(
    name = "hetnet",
    version,
    about = "Max-min fair routing and precoding for heterogeneous networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario instance file.
    Generate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the joint max-min problem.
    Solve(SolveArgs),
    /// Solve with per-commodity rate floors.
    Qos {
        #[command(flatten)]
        solve: SolveArgs,
        /// Floor for one commodity as INDEX=NATS_PER_SEC; adds to the demands in the file.
        #[arg(long = "floor", value_parser = parse_floor)]
        floors: Vec<(usize, f64)>,
        /// Weight of the total floor violation.
        #[arg(long, default_value_t = 1.0)]
        weight: f64,
    },
    /// Compare the joint solver with both heuristics over seeds and commodity counts.
    Compare {
        #[command(flatten)]
        shape: ShapeArgs,
        #[command(flatten)]
        params: ParamArgs,
        /// Commodity counts, comma separated.
        #[arg(
            long = "counts",
            value_delimiter = ',',
            default_value = "5,10,15,20,25,30"
        )]
        counts: Vec<usize>,
        /// Seeds as a list of values and ranges, e.g. `1-20` or `1,4,9`.
        #[arg(long, default_value = "1-20", value_parser = parse_seeds)]
        seeds: SeedList,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Time the routing-only inner solver with one worker and with `--workers`.
    Bench {
        #[arg(long, value_enum, default_value_t = TemplateArg::Doubled114)]
        template: TemplateArg,
        /// Commodity counts, comma separated.
        #[arg(
            long = "counts",
            value_delimiter = ',',
            default_value = "50,100,200,300"
        )]
        counts: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0.01)]
        rho1: f64,
        #[arg(long, default_value_t = 4)]
        workers: usize,
        #[arg(long, default_value_t = 20_000)]
        max_inner: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Check an instance file and print its dimensions.
    Validate {
        #[arg(long)]
        instance: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    /// Comma-separated values.
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum TemplateArg {
    Hetnet57,
    Doubled114,
}

impl From<TemplateArg> for Template {
    fn from(t: TemplateArg) -> Self {
        match t {
            TemplateArg::Hetnet57 => Template::Hetnet57,
            TemplateArg::Doubled114 => Template::Doubled114,
        }
    }
}

#[derive(Args, Clone)]
struct ShapeArgs {
    #[arg(long, value_enum, default_value_t = TemplateArg::Hetnet57)]
    template: TemplateArg,
    /// Base station power budget in dB.
    #[arg(long, default_value_t = 20.0)]
    power_db: f64,
    /// Meters; users connect to base stations within this distance.
    #[arg(long, default_value_t = 300.0)]
    serving_radius: f64,
    /// Meters; interference from farther base stations is dropped. All are kept when absent.
    #[arg(long)]
    interference_radius: Option<f64>,
    /// Drop wireless links; commodities end at base stations.
    #[arg(long)]
    routing_only: bool,
}

impl ShapeArgs {
    fn config(&self, commodities: usize, seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            template: self.template.into(),
            commodities,
            power_db: self.power_db,
            serving_radius: self.serving_radius,
            interference_radius: self.interference_radius,
            seed,
            routing_only: self.routing_only,
            ..Default::default()
        }
    }
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    #[arg(long, default_value_t = 10)]
    commodities: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl ScenarioArgs {
    fn config(&self) -> ScenarioConfig {
        self.shape.config(self.commodities, self.seed)
    }
}

#[derive(Args, Clone)]
struct ParamArgs {
    #[arg(long, default_value_t = 0.1)]
    rho1: f64,
    #[arg(long, default_value_t = 0.001)]
    rho2: f64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 100)]
    max_outer: usize,
    #[arg(long, default_value_t = 2000)]
    max_inner: usize,
}

impl ParamArgs {
    fn build(&self) -> (OuterParams, AdmmParams) {
        (
            OuterParams {
                max_outer: self.max_outer,
                ..Default::default()
            },
            AdmmParams {
                rho1: self.rho1,
                rho2: self.rho2,
                workers: self.workers,
                max_iters: self.max_inner,
                ..Default::default()
            },
        )
    }
}

#[derive(Args, Clone)]
struct SolveArgs {
    /// Instance file; a scenario is generated from the scenario flags when absent.
    #[arg(long, conflicts_with_all = ["template", "commodities", "power_db", "seed", "serving_radius", "interference_radius", "routing_only"])]
    instance: Option<PathBuf>,
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Directory for the report, trace, flows and precoders.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

impl SolveArgs {
    fn instance(&self) -> Result<Instance, Error> {
        match &self.instance {
            Some(path) => load_instance(path),
            None => Ok(scenario::generate(&self.scenario.config())?.instance),
        }
    }
}

#[derive(Clone, Debug)]
struct SeedList(Vec<u64>);

fn parse_seeds(s: &str) -> Result<SeedList, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().map_err(|e| format!("{part}: {e}"))?;
                let b: u64 = b.trim().parse().map_err(|e| format!("{part}: {e}"))?;
                if b < a {
                    return Err(format!("empty seed range {part}"));
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|e| format!("{part}: {e}"))?),
        }
    }
    if out.is_empty() {
        return Err("no seeds given".into());
    }
    Ok(SeedList(out))
}

fn parse_floor(s: &str) -> Result<(usize, f64), String> {
    let (m, v) = s.split_once('=').ok_or("expected INDEX=VALUE")?;
    Ok((
        m.trim().parse().map_err(|e| format!("index: {e}"))?,
        v.trim().parse().map_err(|e| format!("value: {e}"))?,
    ))
}

/// Exit status for a library error.
fn error_code(e: &Error) -> u8 {
    match e {
        Error::Model(_)
        | Error::Parse { .. }
        | Error::Io(_)
        | Error::InvalidParameter(_)
        | Error::UnknownTemplate(_)
        | Error::NoAdmissibleLink(_) => EXIT_INPUT,
        _ => EXIT_INTERNAL,
    }
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(error_code(&e))
}

fn status_code(report: &SolveReport) -> ExitCode {
    match report.status {
        SolveStatus::Converged => ExitCode::SUCCESS,
        SolveStatus::IterationCap => ExitCode::from(EXIT_CAP),
    }
}

fn summary_csv(report: &SolveReport) -> String {
    let mut s =
        String::from("status,min_rate,min_rate_nats,outer_iters,inner_iters,worst_violation\n");
    let status = match report.status {
        SolveStatus::Converged => "converged",
        SolveStatus::IterationCap => "iteration_cap",
    };
    let inner: usize = report.outer.iter().map(|r| r.inner_iters).sum();
    let _ = writeln!(
        s,
        "{status},{:e},{:e},{},{inner},{:e}",
        report.min_rate,
        report.min_rate_nats,
        report.outer.len(),
        report.validation.worst()
    );
    s
}

fn flows_csv(inst: &Instance, report: &SolveReport) -> String {
    let m = inst.num_commodities();
    let mut s = String::from("link,label,commodity,rate\n");
    for l in 0..inst.num_links() {
        for c in 0..m {
            let _ = writeln!(
                s,
                "{l},{},{c},{:e}",
                inst.link_label(l),
                report.flow.link_rates[l * m + c]
            );
        }
    }
    s
}

fn precoders_csv(inst: &Instance, report: &SolveReport) -> String {
    let mut s = String::from("wireless_link,label,re,im\n");
    for (i, p) in report.precoders.0.iter().enumerate() {
        let _ = writeln!(
            s,
            "{i},{},{:e},{:e}",
            inst.link_label(inst.wireless_link_index(i)),
            p.re,
            p.im
        );
    }
    s
}

fn write_file(path: &Path, body: &str) -> Result<(), Error> {
    std::fs::write(path, body).map_err(Error::from)
}

/// Prints the report in `format` and, with an output directory, writes all artifacts.
fn emit(
    inst: &Instance,
    report: &SolveReport,
    format: Format,
    out: Option<&Path>,
    extra: Option<String>,
) -> Result<(), Error> {
    let body = match format {
        Format::Json => report.to_json()? + "\n",
        Format::Csv => summary_csv(report),
    };
    match out {
        None => print!("{body}"),
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let name = match format {
                Format::Json => "report.json",
                Format::Csv => "summary.csv",
            };
            write_file(&dir.join(name), &body)?;
            write_file(&dir.join("trace.csv"), &report.trace_csv())?;
            write_file(&dir.join("flows.csv"), &flows_csv(inst, report))?;
            write_file(&dir.join("precoders.csv"), &precoders_csv(inst, report))?;
            if let Some(extra) = &extra {
                write_file(&dir.join("qos.csv"), extra)?;
            }
            println!("min_rate_nats {:e}", report.min_rate_nats);
        }
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn cmd_solve(args: &SolveArgs) -> ExitCode {
    let inst = match args.instance() {
        Ok(i) => i,
        Err(e) => return fail(e),
    };
    let (outer, admm) = args.params.build();
    let report = match n_maxmin_solve(&inst, &outer, &admm) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    if let Err(e) = emit(&inst, &report, args.format, args.out.as_deref(), None) {
        return fail(e);
    }
    status_code(&report)
}

fn cmd_qos(args: &SolveArgs, floors: &[(usize, f64)], weight: f64) -> ExitCode {
    let inst = match args.instance() {
        Ok(i) => i,
        Err(e) => return fail(e),
    };
    let mut spec = QosSpec::from_instance(&inst);
    spec.weight = weight;
    for &(m, v) in floors {
        if m >= inst.num_commodities() {
            return fail(Error::InvalidParameter(format!("no commodity {m}")));
        }
        spec.floors[m] = Some(v);
    }
    let (outer, admm) = args.params.build();
    let (report, alpha) = match qos_solve(&inst, &spec, &outer, &admm) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let unit = inst.rate_unit();
    let mut table = String::from("commodity,floor_nats,rate_nats,violation_nats\n");
    for (m, f) in spec.floors.iter().enumerate() {
        let floor = f.map(|v| format!("{v:e}")).unwrap_or_default();
        let _ = writeln!(
            table,
            "{m},{floor},{:e},{:e}",
            report.flow.commodity_rates[m] * unit,
            alpha[m] * unit
        );
    }
    eprintln!(
        "complementarity {:e}",
        complementarity_residual(&inst, &spec, &report)
    );
    if args.out.is_none() && args.format == Format::Csv {
        print!("{table}");
    }
    if let Err(e) = emit(
        &inst,
        &report,
        args.format,
        args.out.as_deref(),
        Some(table),
    ) {
        return fail(e);
    }
    status_code(&report)
}

fn cell(r: &Result<f64, String>) -> String {
    match r {
        Ok(v) => format!("{v:.6}"),
        Err(_) => "ERR".into(),
    }
}

fn cmd_compare(
    shape: &ShapeArgs,
    params: &ParamArgs,
    counts: &[usize],
    seeds: &SeedList,
    format: Format,
) -> ExitCode {
    let (outer, admm) = params.build();
    let mut cells: Vec<Comparison> = Vec::new();
    for &m in counts {
        for &seed in &seeds.0 {
            let config = shape.config(m, seed);
            match compare_methods(&config, &outer, &admm) {
                Ok(c) => {
                    for (name, r) in [
                        ("n_maxmin", &c.n_maxmin),
                        ("greedy", &c.greedy),
                        ("orthogonal", &c.orthogonal),
                    ] {
                        if let Err(e) = r {
                            eprintln!("M={m} seed={seed} {name}: {e}");
                        }
                    }
                    eprintln!(
                        "M={m} seed={seed}: {} {} {} ({:.1}s)",
                        cell(&c.n_maxmin),
                        cell(&c.greedy),
                        cell(&c.orthogonal),
                        c.seconds
                    );
                    cells.push(c);
                }
                Err(e) => return fail(e),
            }
        }
    }
    let rows = summarize(&cells);
    let failures: usize = rows.iter().map(|r| r.failures).sum();
    match format {
        Format::Json => match serde_json::to_string_pretty(&rows) {
            Ok(s) => println!("{s}"),
            Err(e) => return fail(Error::Serialize(e.to_string())),
        },
        Format::Csv => {
            println!("commodities,seeds,n_maxmin,greedy,orthogonal,ratio,failures");
            for r in &rows {
                println!(
                    "{},{},{:.6},{:.6},{:.6},{:.4},{}",
                    r.commodities, r.seeds, r.n_maxmin, r.greedy, r.orthogonal, r.ratio, r.failures
                );
            }
        }
    }
    if failures > 0 {
        ExitCode::from(EXIT_INTERNAL)
    } else {
        ExitCode::SUCCESS
    }
}

struct BenchRow {
    commodities: usize,
    variables: usize,
    constraints: usize,
    sequential_secs: f64,
    parallel_secs: f64,
    iterations: usize,
    objective_gap: f64,
    converged: bool,
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    template: TemplateArg,
    counts: &[usize],
    seed: u64,
    rho1: f64,
    workers: usize,
    max_inner: usize,
    format: Format,
) -> ExitCode {
    let admm = AdmmParams {
        rho1,
        max_iters: max_inner,
        ..Default::default()
    };
    let mut rows = Vec::new();
    for &m in counts {
        let config = ScenarioConfig {
            template: template.into(),
            commodities: m,
            seed,
            routing_only: true,
            ..Default::default()
        };
        let inst = match scenario::generate(&config) {
            Ok(s) => s.instance,
            Err(e) => return fail(e),
        };
        let size = problem_size(&inst);
        let runs = match bench_routing(&inst, &admm, &[1, workers]) {
            Ok(r) => r,
            Err(e) => return fail(e),
        };
        let (seq, par) = (&runs[0], &runs[1]);
        rows.push(BenchRow {
            commodities: m,
            variables: size.variables,
            constraints: size.constraints,
            sequential_secs: seq.seconds,
            parallel_secs: par.seconds,
            iterations: seq.iterations,
            objective_gap: (seq.objective - par.objective).abs(),
            converged: seq.converged && par.converged,
        });
    }
    match format {
        Format::Json => {
            let values: Vec<_> = rows
                .iter()
                .map(|r| {
                    serde_json::json!({
                        "commodities": r.commodities,
                        "variables": r.variables,
                        "constraints": r.constraints,
                        "sequential_secs": r.sequential_secs,
                        "parallel_secs": r.parallel_secs,
                        "workers": workers,
                        "speedup": r.sequential_secs / r.parallel_secs,
                        "iterations": r.iterations,
                        "objective_gap": r.objective_gap,
                        "converged": r.converged,
                    })
                })
                .collect();
            println!("{}", serde_json::Value::Array(values));
        }
        Format::Csv => {
            println!("commodities,variables,constraints,sequential_secs,parallel_secs,workers,speedup,iterations,objective_gap,converged");
            for r in &rows {
                println!(
                    "{},{},{},{:.3},{:.3},{workers},{:.2},{},{:e},{}",
                    r.commodities,
                    r.variables,
                    r.constraints,
                    r.sequential_secs,
                    r.parallel_secs,
                    r.sequential_secs / r.parallel_secs,
                    r.iterations,
                    r.objective_gap,
                    r.converged
                );
            }
        }
    }
    ExitCode::SUCCESS
}

fn cmd_validate(path: &Path) -> ExitCode {
    match load_instance(path) {
        Ok(inst) => {
            println!(
                "nodes {} wired {} wireless {} tones {} commodities {}",
                inst.num_nodes(),
                inst.num_wired(),
                inst.num_wireless(),
                inst.topology().num_tones,
                inst.num_commodities()
            );
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INPUT)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match &cli.command {
        Command::Generate { scenario: s, out } => {
            let generated = scenario::generate(&s.config()).and_then(|sc| {
                for w in &sc.warnings {
                    eprintln!("warning: {w}");
                }
                instance_to_toml(&sc.instance)
            });
            let text = match generated {
                Ok(t) => t,
                Err(e) => return fail(e),
            };
            match out {
                None => print!("{text}"),
                Some(p) => {
                    if let Err(e) = write_file(p, &text) {
                        return fail(e);
                    }
                }
            }
            ExitCode::SUCCESS
        }
        Command::Solve(args) => cmd_solve(args),
        Command::Qos {
            solve,
            floors,
            weight,
        } => cmd_qos(solve, floors, *weight),
        Command::Compare {
            shape,
            params,
            counts,
            seeds,
            format,
        } => cmd_compare(shape, params, counts, seeds, *format),
        Command::Bench {
            template,
            counts,
            seed,
            rho1,
            workers,
            max_inner,
            format,
        } => cmd_bench(
            *template, counts, *seed, *rho1, *workers, *max_inner, *format,
        ),
        Command::Validate { instance } => cmd_validate(instance),
    }
}
