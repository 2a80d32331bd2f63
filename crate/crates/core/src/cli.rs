//! Command-line driver: `synth`, `verify`, `metrics`, `bench` and `target`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::circuit::{circuit_to_unitary, metrics, Circuit, Metrics};
use crate::decomposer::DecomposeConfig;
use crate::error::{Result, SynthError};
use crate::gatemodel::{distance, distance_frobenius};
use crate::instantiate::BackendRegistry;
use crate::numkit::{is_unitary, ComplexMatrix, C64};
use crate::pipeline::{synthesize, SynthOptions, SynthOutcome};
use crate::qasm::{emit_qasm, parse_qasm};
use crate::targets;
use crate::topology::Topology;
use crate::verify::state_fidelities;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "blocksynth", version, about = "Synthesize unitaries into U3/CNOT circuits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Synthesize a unitary file into OpenQASM 2.0.
    Synth(SynthArgs),
    /// Compare a circuit against a target unitary.
    Verify(VerifyArgs),
    /// Print gate counts, depth and parallelism of a circuit.
    Metrics(MetricsArgs),
    /// Synthesize a built-in benchmark suite.
    Bench(BenchArgs),
    /// Write a built-in benchmark unitary to a file.
    Target(TargetArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TopologyKind {
    All,
    Linear,
}

#[derive(Args, Debug, Clone)]
pub struct TopologyArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub topology: TopologyKind,
    /// Coupling graph file with one `i j` edge per line. Overrides
    /// `--topology`.
    #[arg(long)]
    pub coupling: Option<PathBuf>,
}

impl TopologyArgs {
    fn build(&self, n: usize) -> Result<Topology> {
        if let Some(path) = &self.coupling {
            return Topology::parse_coupling(n, &read(path)?).map_err(|e| e.context(path.display().to_string()));
        }
        Ok(match self.topology {
            TopologyKind::All => Topology::all_to_all(n),
            TopologyKind::Linear => Topology::linear(n),
        })
    }
}

#[derive(Args, Debug, Clone)]
pub struct SynthSettings {
    #[arg(long, default_value_t = 2)]
    pub block_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random restarts per decomposition layer.
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    /// Independent decomposition attempts; the fewest-CNOT result wins.
    #[arg(long, default_value_t = 16)]
    pub attempts: usize,
    #[arg(long, default_value_t = 24)]
    pub max_layers: usize,
    #[arg(long, default_value = "template2q")]
    pub backend: String,
    #[arg(long, default_value_t = 1e-8)]
    pub native_threshold: f64,
    /// Worker threads. Defaults to the number of processors.
    #[arg(long)]
    pub jobs: Option<usize>,
}

impl SynthSettings {
    fn options(&self) -> SynthOptions {
        SynthOptions {
            decompose: DecomposeConfig {
                block_size: self.block_size,
                threshold: self.threshold,
                max_layers: self.max_layers,
                restarts_per_layer: self.restarts,
                seed: self.seed,
                ..DecomposeConfig::default()
            },
            native_threshold: self.native_threshold,
            attempts: self.attempts,
        }
    }

    fn run<T: Send>(&self, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(j) = self.jobs {
            if j == 0 {
                return Err(SynthError::invalid("--jobs must be positive"));
            }
            builder = builder.num_threads(j);
        }
        let pool = builder
            .build()
            .map_err(|e| SynthError::ResourceLimit(format!("thread pool: {e}")))?;
        pool.install(f)
    }
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Target unitary file.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// QASM output path. Printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub topology: TopologyArgs,
    #[command(flatten)]
    pub settings: SynthSettings,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long)]
    pub circuit: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub random_states: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct MetricsArgs {
    #[arg(long)]
    pub circuit: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Small,
    Stretch,
}

impl Suite {
    pub fn targets(self) -> &'static [&'static str] {
        match self {
            Suite::Small => &["toffoli", "fredkin", "qft3", "tfim-3-1", "tfim-3-5", "tfim-3-10"],
            Suite::Stretch => &["qft4", "tfim-4-1", "tfim-4-5", "tfim-4-10", "tfim-5-1"],
        }
    }
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value = "small")]
    pub suite: Suite,
    #[arg(long, value_enum, default_value = "all")]
    pub topology: TopologyKind,
    /// Directory for the per-target QASM files.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub settings: SynthSettings,
}

#[derive(Args, Debug)]
pub struct TargetArgs {
    /// `toffoli`, `fredkin`, `qft3`, `qft4` or `tfim-<n>-<steps>`.
    pub name: String,
    #[arg(long)]
    pub out: PathBuf,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| SynthError::invalid(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| SynthError::invalid(format!("cannot write {}: {e}", path.display())))
}

/// Parses the unitary file format: `dim <d>` and then `d` rows of `2d`
/// numbers, alternating real and imaginary parts. Blank lines and lines
/// starting with `#` are skipped.
pub fn parse_unitary(text: &str) -> Result<ComplexMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let perr = |line: usize, message: String| SynthError::Parse { line, message };
    let (line, header) = lines.next().ok_or_else(|| perr(1, "empty unitary file".into()))?;
    let dim: usize = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["dim", d] => d.parse().map_err(|_| perr(line, format!("bad dimension `{d}`")))?,
        _ => return Err(perr(line, "expected `dim <d>`".into())),
    };
    if dim < 2 || !dim.is_power_of_two() {
        return Err(perr(line, format!("dimension {dim} is not a power of two")));
    }
    let mut data = Vec::with_capacity(dim * dim);
    let mut last = line;
    for r in 0..dim {
        let (line, row) = lines
            .next()
            .ok_or_else(|| perr(last, format!("expected {dim} rows, found {r}")))?;
        last = line;
        let values = row
            .split_whitespace()
            .map(|v| v.parse::<f64>().map_err(|_| perr(line, format!("bad number `{v}`"))))
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != 2 * dim {
            return Err(perr(
                line,
                format!("expected {} numbers, found {}", 2 * dim, values.len()),
            ));
        }
        data.extend(values.chunks(2).map(|p| C64::new(p[0], p[1])));
    }
    if let Some((line, _)) = lines.next() {
        return Err(perr(line, "unexpected trailing data".into()));
    }
    let m = ComplexMatrix::from_vec(dim, data)?;
    if !is_unitary(&m, 1e-6) {
        return Err(SynthError::invalid("matrix is not unitary within 1e-6"));
    }
    Ok(m)
}

pub fn format_unitary(m: &ComplexMatrix) -> String {
    let mut out = format!("dim {}\n", m.dim());
    for i in 0..m.dim() {
        let row: Vec<String> = (0..m.dim())
            .flat_map(|j| {
                let z = m[(i, j)];
                [format!("{:.17e}", z.re), format!("{:.17e}", z.im)]
            })
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

fn num_qubits(m: &ComplexMatrix) -> usize {
    m.dim().trailing_zeros() as usize
}

/// One synthesis run, as reported by `synth` and `bench`.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub input: String,
    pub topology: String,
    pub block_size: usize,
    pub threshold: f64,
    pub seed: u64,
    pub distance: f64,
    pub converged: bool,
    pub blocks: usize,
    pub metrics: Metrics,
    pub wall_time: f64,
}

impl RunReport {
    fn new(input: &str, topology: &Topology, s: &SynthSettings, out: &SynthOutcome, wall_time: f64) -> Self {
        RunReport {
            input: input.to_string(),
            topology: topology.to_string(),
            block_size: s.block_size,
            threshold: s.threshold,
            seed: s.seed,
            distance: out.distance,
            converged: out.converged,
            blocks: out.blocks.blocks.len(),
            metrics: metrics(&out.circuit),
            wall_time,
        }
    }

    pub fn key_values(&self) -> String {
        let m = &self.metrics;
        format!(
            "input = {}\ntopology = {}\nblock_size = {}\nthreshold = {:e}\nseed = {}\ndistance = {:.6e}\nconverged = {}\nblocks = {}\ncnots = {}\nu3s = {}\ndepth = {}\nparallelism = {:.4}\nwall_time_s = {:.3}\n",
            self.input,
            self.topology,
            self.block_size,
            self.threshold,
            self.seed,
            self.distance,
            self.converged,
            self.blocks,
            m.cnot_count,
            m.u3_count,
            m.depth,
            m.parallelism,
            self.wall_time
        )
    }
}

pub fn metrics_header() -> String {
    format!("{:>6} {:>6} {:>6} {:>11}", "CNOTs", "U3s", "Depth", "Parallelism")
}

pub fn metrics_row(m: &Metrics) -> String {
    format!(
        "{:>6} {:>6} {:>6} {:>11.4}",
        m.cnot_count, m.u3_count, m.depth, m.parallelism
    )
}

/// Aligned table of report rows. TFIM rows also show the CNOT count of a
/// first-order Trotter circuit for the same evolution.
pub fn report_table(reports: &[RunReport]) -> String {
    let mut out = format!(
        "{:<12} {:<16} {} {:>10} {:>8} {:>8}\n",
        "Target",
        "Topology",
        metrics_header(),
        "Distance",
        "Trotter",
        "Time(s)"
    );
    for r in reports {
        let trotter = tfim_shape(&r.input)
            .map(|(n, k)| targets::tfim_trotter_cnots(n, k).to_string())
            .unwrap_or_else(|| "-".into());
        writeln!(
            out,
            "{:<12} {:<16} {} {:>10.3e} {:>8} {:>8.2}",
            r.input,
            r.topology,
            metrics_row(&r.metrics),
            r.distance,
            trotter,
            r.wall_time
        )
        .unwrap();
    }
    out
}

fn tfim_shape(name: &str) -> Option<(usize, usize)> {
    let rest = name.strip_prefix("tfim-")?;
    let (n, k) = rest.split_once('-')?;
    Some((n.parse().ok()?, k.parse().ok()?))
}

/// CNOT growth across the TFIM rows: `(synthesized max/min, Trotter
/// max/min)`. `None` unless at least two TFIM rows share a width.
pub fn tfim_growth(reports: &[RunReport]) -> Option<(f64, f64)> {
    let rows: Vec<(usize, usize, usize)> = reports
        .iter()
        .filter_map(|r| tfim_shape(&r.input).map(|(n, k)| (n, k, r.metrics.cnot_count)))
        .collect();
    let n = rows.first()?.0;
    let rows: Vec<_> = rows.into_iter().filter(|r| r.0 == n).collect();
    if rows.len() < 2 {
        return None;
    }
    let synth: Vec<usize> = rows.iter().map(|r| r.2).collect();
    let trotter: Vec<usize> = rows.iter().map(|r| targets::tfim_trotter_cnots(n, r.1)).collect();
    let ratio = |v: &[usize]| *v.iter().max().unwrap() as f64 / (*v.iter().min().unwrap()).max(1) as f64;
    Some((ratio(&synth), ratio(&trotter)))
}

fn run_synthesis(target: &ComplexMatrix, topology: &Topology, settings: &SynthSettings) -> Result<(SynthOutcome, f64)> {
    let registry = BackendRegistry::with_builtins();
    let backend = registry.get(&settings.backend)?;
    let opts = settings.options();
    let start = Instant::now();
    let out = settings.run(|| synthesize(target, topology, &opts, backend.as_ref()))?;
    Ok((out, start.elapsed().as_secs_f64()))
}

fn cmd_synth(args: &SynthArgs) -> Result<i32> {
    let target = parse_unitary(&read(&args.input)?).map_err(|e| e.context(args.input.display().to_string()))?;
    let topology = args.topology.build(num_qubits(&target))?;
    let (out, secs) = run_synthesis(&target, &topology, &args.settings)?;
    let qasm = emit_qasm(&out.circuit);
    match &args.out {
        Some(p) => write(p, &qasm)?,
        None => print!("{qasm}"),
    }
    let report = RunReport::new(&args.input.display().to_string(), &topology, &args.settings, &out, secs);
    if let Some(p) = &args.report {
        write(
            p,
            &format!(
                "{}\n{}",
                report.key_values(),
                report_table(std::slice::from_ref(&report))
            ),
        )?;
    }
    eprint!("{}", report_table(std::slice::from_ref(&report)));
    if out.converged {
        Ok(EXIT_OK)
    } else {
        eprintln!(
            "warning: best circuit is at distance {:.3e}, above the threshold {:e}",
            out.distance, args.settings.threshold
        );
        Ok(EXIT_NOT_CONVERGED)
    }
}

fn load_circuit(path: &Path) -> Result<Circuit> {
    parse_qasm(&read(path)?).map_err(|e| e.context(path.display().to_string()))
}

fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    let circuit = load_circuit(&args.circuit)?;
    let target = parse_unitary(&read(&args.target)?).map_err(|e| e.context(args.target.display().to_string()))?;
    if circuit.num_qubits() != num_qubits(&target) {
        return Err(SynthError::invalid(format!(
            "circuit has {} qubits but the target has {}",
            circuit.num_qubits(),
            num_qubits(&target)
        )));
    }
    let u = circuit_to_unitary(&circuit)?;
    let d = distance(&u, &target)?.value();
    let df = distance_frobenius(&u, &target)?;
    let stats = state_fidelities(&u, &target, args.random_states, args.seed)?;
    println!("distance = {d:.6e}");
    println!("distance_frobenius = {df:.6e}");
    println!("states = {}", stats.states);
    println!("min_fidelity = {:.12}", stats.min);
    println!("avg_fidelity = {:.12}", stats.mean);
    Ok(if d <= args.tol { EXIT_OK } else { EXIT_ERROR })
}

fn cmd_metrics(args: &MetricsArgs) -> Result<i32> {
    let circuit = load_circuit(&args.circuit)?;
    println!("{}", metrics_header());
    println!("{}", metrics_row(&metrics(&circuit)));
    Ok(EXIT_OK)
}

fn cmd_bench(args: &BenchArgs) -> Result<i32> {
    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir).map_err(|e| SynthError::invalid(format!("cannot create {}: {e}", dir.display())))?;
    }
    let mut reports = Vec::new();
    for name in args.suite.targets() {
        let target = targets::by_name(name)?;
        let topology = match args.topology {
            TopologyKind::All => Topology::all_to_all(num_qubits(&target)),
            TopologyKind::Linear => Topology::linear(num_qubits(&target)),
        };
        let (out, secs) = run_synthesis(&target, &topology, &args.settings).map_err(|e| e.context(*name))?;
        if let Some(dir) = &args.out_dir {
            write(&dir.join(format!("{name}.qasm")), &emit_qasm(&out.circuit))?;
        }
        let report = RunReport::new(name, &topology, &args.settings, &out, secs);
        eprintln!(
            "{name}: {} CNOTs at distance {:.3e}",
            report.metrics.cnot_count, report.distance
        );
        reports.push(report);
    }
    let mut text = report_table(&reports);
    if let Some((synth, trotter)) = tfim_growth(&reports) {
        writeln!(text, "tfim CNOT growth: synthesized {synth:.2}x, trotter {trotter:.2}x").unwrap();
    }
    print!("{text}");
    if let Some(p) = &args.report {
        let kv: Vec<String> = reports.iter().map(RunReport::key_values).collect();
        write(p, &format!("{}\n{text}", kv.join("\n")))?;
    }
    Ok(if reports.iter().all(|r| r.converged) {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

fn cmd_target(args: &TargetArgs) -> Result<i32> {
    write(&args.out, &format_unitary(&targets::by_name(&args.name)?))?;
    Ok(EXIT_OK)
}

pub fn execute(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Target(a) => cmd_target(a),
    }
}

/// Parses `args` and runs the command, returning the process exit code.
/// Usage errors exit with 1.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::max_abs_diff;

    #[test]
    fn unitary_file_round_trip() {
        let q = targets::qft(3);
        let back = parse_unitary(&format_unitary(&q)).unwrap();
        assert_eq!(back, q);
    }

    #[test]
    fn unitary_file_errors() {
        assert!(matches!(parse_unitary(""), Err(SynthError::Parse { .. })));
        assert!(matches!(
            parse_unitary("dim 3\n"),
            Err(SynthError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_unitary("dim 2\n1 0 0 0\n"),
            Err(SynthError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_unitary("dim 2\n1 0 0\n0 0 1 0\n"),
            Err(SynthError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_unitary("dim 2\n2 0 0 0\n0 0 1 0\n"),
            Err(SynthError::InvalidArgument(_))
        ));
        let ok = parse_unitary("# comment\ndim 2\n\n0 0 1 0\n1 0 0 0\n").unwrap();
        assert!(
            max_abs_diff(
                &ok,
                &ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()
            ) == 0.0
        );
    }

    #[test]
    fn tfim_growth_ratios() {
        let mk = |name: &str, cx: usize| RunReport {
            input: name.into(),
            topology: "all-to-all(3)".into(),
            block_size: 2,
            threshold: 1e-3,
            seed: 0,
            distance: 0.0,
            converged: true,
            blocks: 0,
            metrics: Metrics {
                cnot_count: cx,
                u3_count: 0,
                depth: 0,
                parallelism: 0.0,
            },
            wall_time: 0.0,
        };
        let rows = [mk("toffoli", 8), mk("tfim-3-1", 6), mk("tfim-3-10", 9)];
        assert_eq!(tfim_growth(&rows), Some((1.5, 10.0)));
        assert_eq!(tfim_growth(&rows[..2]), None);
    }

    #[test]
    fn usage_errors_exit_with_one() {
        assert_eq!(run(["blocksynth", "synth"]), EXIT_ERROR);
        assert_eq!(run(["blocksynth", "frobnicate"]), EXIT_ERROR);
    }
}
