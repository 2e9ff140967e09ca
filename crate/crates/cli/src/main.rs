//! Command-line surface for the symmetrization library: every subcommand
//! parses its inputs, runs the corresponding pipeline, writes deterministic
//! machine-readable output (state JSON or result JSON), and echoes a run
//! manifest with parameters, seed, depth report, and timing.

use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;

use qsym_core::convert::{nsil_to_occ, occ_to_nsil, second_to_first, OCC};
use qsym_core::error::Error;
use qsym_core::interferometry::{image_pipeline, ArrayConfig, Photons};
use qsym_core::les::{les_to_perm_parallel, perm_to_les, validate_les};
use qsym_core::perm::Permutation;
use qsym_core::sort::{build_bitonic, build_bubble, SortingNetwork};
use qsym_core::state::{BasisConfig, DepthReport, Layout, SparseState, Val};
use qsym_core::symmetrize::{
    berry_sil_symmetrize, data_marginal, dicke, dicke_superposition, exact_sil_symmetrize,
    nsil_symmetrize_single, nsil_symmetrize_superposed, oracle_symmetrized, BerryConfig,
    ResourceKind, DATA,
};

#[derive(Parser)]
#[command(name = "qsym", about = "Quantum symmetrization toolkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Suppress the run manifest echo.
    #[arg(long, global = true)]
    quiet: bool,
    /// Write the primary output to a file instead of stdout.
    #[arg(long, global = true)]
    out: Option<std::path::PathBuf>,
    /// Seed for measurement sampling.
    #[arg(long, global = true, env = "QSYM_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Symmetrize a list or a state file.
    Symmetrize(SymmetrizeArgs),
    /// Prepare a Dicke state or a weighted superposition of them.
    Dicke(DickeArgs),
    /// Convert occupation numbers to a mode list (and back with --inverse).
    Convert(ConvertArgs),
    /// Decode a lower exceeding sequence to a permutation (or encode back).
    Les(LesArgs),
    /// Run the interferometric-imaging pipeline.
    Telescope(TelescopeArgs),
}

#[derive(Args)]
struct SymmetrizeArgs {
    /// Input list like "122" or "1,2,2", or a path to a state JSON file.
    input: String,
    #[arg(long, value_parser = ["single", "superposed", "sil-exact", "sil-berry"], default_value = "superposed")]
    mode: String,
    #[arg(long, value_parser = ["bitonic", "bubble"], default_value = "bitonic")]
    network: String,
    /// Padding exponent for the probabilistic route.
    #[arg(long, default_value_t = 3.0)]
    a: f64,
    /// Explicit padding range override for the probabilistic route.
    #[arg(long)]
    f_n: Option<u64>,
    /// Project out the repetitive branch of the probabilistic route.
    #[arg(long)]
    postselect: bool,
    /// Element bound of the list register (defaults to the largest element).
    #[arg(long)]
    bound: Option<Val>,
}

#[derive(Args)]
struct DickeArgs {
    /// Number of qubits.
    n: usize,
    /// Hamming weight (omit when using --weights).
    k: Option<usize>,
    /// Weighted superposition "k=w,k=w" with real weights.
    #[arg(long)]
    weights: Option<String>,
    #[arg(long, value_parser = ["bitonic", "bubble"], default_value = "bitonic")]
    network: String,
}

#[derive(Args)]
struct ConvertArgs {
    /// Occupation counts like "1,2,1" (or a mode list with --inverse).
    input: String,
    /// Convert a mode list back to occupation counts.
    #[arg(long)]
    inverse: bool,
    /// Number of modes (required for --inverse).
    #[arg(long)]
    modes: Option<usize>,
    /// Also emit the symmetrized first-quantized state JSON.
    #[arg(long)]
    state: bool,
}

#[derive(Args)]
struct LesArgs {
    /// Sequence like "121153" or "1,2,1,1,5,3" (a permutation with --inverse).
    input: String,
    /// Encode a permutation image back to its sequence.
    #[arg(long)]
    inverse: bool,
}

#[derive(Args)]
struct TelescopeArgs {
    #[arg(long, default_value_t = 4)]
    detectors: usize,
    #[arg(long, default_value_t = 2.0)]
    spacing: f64,
    #[arg(long, default_value_t = 1.0)]
    wavelength: f64,
    #[arg(long, default_value_t = 0)]
    fov_offset: i64,
    /// Photon angles as sines, comma separated.
    #[arg(long, conflicts_with = "grid")]
    photons: Option<String>,
    /// Grid mode: integer bins, comma separated.
    #[arg(long)]
    grid: Option<String>,
    /// Write per-outcome probabilities as CSV.
    #[arg(long)]
    csv: Option<std::path::PathBuf>,
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    params: serde_json::Value,
    seed: u64,
    depth: DepthReport,
    timing_ms: f64,
    outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_fidelity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    success_probability: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let result = run(&cli, started);
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Internal(_)
        | Error::NotBijective { .. }
        | Error::IncomparableTuples { .. }
        | Error::NormDrift { .. }
        | Error::RegisterEntangled { .. } => 3,
        _ => 2,
    }
}

fn run(cli: &Cli, started: Instant) -> Result<(), Error> {
    match &cli.command {
        Command::Symmetrize(args) => cmd_symmetrize(cli, args, started),
        Command::Dicke(args) => cmd_dicke(cli, args, started),
        Command::Convert(args) => cmd_convert(cli, args, started),
        Command::Les(args) => cmd_les(cli, args, started),
        Command::Telescope(args) => cmd_telescope(cli, args, started),
    }
}

fn parse_list(text: &str) -> Result<Vec<Val>, Error> {
    let cleaned = text.trim();
    if cleaned.is_empty() {
        return Err(Error::InvalidArgument("empty list".into()));
    }
    if cleaned.contains(',') {
        cleaned
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<Val>()
                    .map_err(|_| Error::InvalidArgument(format!("bad element `{tok}`")))
            })
            .collect()
    } else if cleaned.chars().all(|c| c.is_ascii_digit()) {
        Ok(cleaned
            .chars()
            .map(|c| c.to_digit(10).expect("digit") as Val)
            .collect())
    } else {
        Err(Error::InvalidArgument(format!("bad list `{text}`")))
    }
}

fn network_for(kind: &str, n: usize) -> SortingNetwork {
    match kind {
        "bubble" => build_bubble(n),
        _ => build_bitonic(n),
    }
}

fn emit_output(cli: &Cli, text: &str) -> Result<Vec<String>, Error> {
    match &cli.out {
        Some(path) => {
            std::fs::write(path, text)
                .map_err(|e| Error::InvalidArgument(format!("cannot write {path:?}: {e}")))?;
            Ok(vec![path.display().to_string()])
        }
        None => {
            let mut stdout = std::io::stdout();
            stdout.write_all(text.as_bytes()).ok();
            if !text.ends_with('\n') {
                stdout.write_all(b"\n").ok();
            }
            Ok(vec!["stdout".into()])
        }
    }
}

fn emit_manifest(cli: &Cli, manifest: &RunManifest) {
    if !cli.quiet {
        eprintln!("{}", serde_json::to_string_pretty(manifest).expect("manifest"));
    }
}

fn cmd_symmetrize(cli: &Cli, args: &SymmetrizeArgs, started: Instant) -> Result<(), Error> {
    let (state, depth, success, oracle) = if args.input.ends_with(".json") {
        let text = std::fs::read_to_string(&args.input)
            .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", args.input)))?;
        let input = SparseState::from_json(&text)?;
        let n = input.layout().spec(DATA)?.arity;
        let net = network_for(&args.network, n);
        run_symmetrize_state(&input, args, &net)?
    } else {
        let l = parse_list(&args.input)?;
        let bound = args.bound.unwrap_or_else(|| *l.iter().max().unwrap_or(&0));
        let net = network_for(&args.network, l.len());
        run_symmetrize_list(&l, bound, args, &net)?
    };
    let outputs = emit_output(cli, &state.to_json())?;
    emit_manifest(
        cli,
        &RunManifest {
            command: "symmetrize".into(),
            params: serde_json::json!({
                "input": args.input, "mode": args.mode, "network": args.network,
                "a": args.a, "f_n": args.f_n, "postselect": args.postselect,
            }),
            seed: cli.seed,
            depth,
            timing_ms: started.elapsed().as_secs_f64() * 1e3,
            outputs,
            oracle_fidelity: oracle,
            success_probability: Some(success),
        },
    );
    Ok(())
}

fn run_symmetrize_list(
    l: &[Val],
    bound: Val,
    args: &SymmetrizeArgs,
    net: &SortingNetwork,
) -> Result<(SparseState, DepthReport, f64, Option<f64>), Error> {
    let layout = Layout::of(&[(DATA, l.len(), bound)]);
    let cfg = BerryConfig {
        a: args.a,
        f_n: args.f_n,
        postselect: args.postselect,
    };
    match args.mode.as_str() {
        "single" => {
            let run = nsil_symmetrize_single(l, bound, net, ResourceKind::ExactLes)?;
            let out = data_marginal(&run.state)?;
            let oracle =
                oracle_symmetrized(layout, &[(l.to_vec(), Complex64::new(1.0, 0.0))])?;
            let fid = out.fidelity(&oracle)?;
            Ok((out, run.depth, run.success_probability, Some(fid)))
        }
        "superposed" => {
            let s = SparseState::basis(layout.clone(), BasisConfig::new(l.to_vec()))?;
            let run = nsil_symmetrize_superposed(&s, net)?;
            let oracle =
                oracle_symmetrized(layout, &[(l.to_vec(), Complex64::new(1.0, 0.0))])?;
            let fid = run.state.fidelity(&oracle)?;
            Ok((run.state, run.depth, run.success_probability, Some(fid)))
        }
        "sil-exact" => {
            let s = SparseState::basis(layout.clone(), BasisConfig::new(l.to_vec()))?;
            let (out, depth) = exact_sil_symmetrize(&s, DATA, net)?;
            let oracle =
                oracle_symmetrized(layout, &[(l.to_vec(), Complex64::new(1.0, 0.0))])?;
            let fid = out.fidelity(&oracle)?;
            Ok((out, depth, 1.0, Some(fid)))
        }
        _ => {
            let s = SparseState::basis(layout.clone(), BasisConfig::new(l.to_vec()))?;
            let run = berry_sil_symmetrize(&s, DATA, &cfg, net)?;
            let oracle = if args.postselect {
                oracle_symmetrized(layout, &[(l.to_vec(), Complex64::new(1.0, 0.0))])?
            } else {
                oracle_symmetrized(layout, &[(l.to_vec(), Complex64::new(1.0, 0.0))])?
                    .add_register(qsym_core::symmetrize::FAIL, 1, 1, &[0])?
            };
            let fid = run.state.fidelity(&oracle)?;
            Ok((run.state, run.depth, run.success_probability, Some(fid)))
        }
    }
}

fn run_symmetrize_state(
    input: &SparseState,
    args: &SymmetrizeArgs,
    net: &SortingNetwork,
) -> Result<(SparseState, DepthReport, f64, Option<f64>), Error> {
    match args.mode.as_str() {
        "sil-exact" => {
            let (out, depth) = exact_sil_symmetrize(input, DATA, net)?;
            let fid = oracle_fidelity_for(input, &out)?;
            Ok((out, depth, 1.0, fid))
        }
        "sil-berry" => {
            let cfg = BerryConfig {
                a: args.a,
                f_n: args.f_n,
                postselect: args.postselect,
            };
            let run = berry_sil_symmetrize(input, DATA, &cfg, net)?;
            Ok((run.state, run.depth, run.success_probability, None))
        }
        _ => {
            let run = nsil_symmetrize_superposed(input, net)?;
            let fid = oracle_fidelity_for(input, &run.state)?;
            Ok((run.state, run.depth, run.success_probability, fid))
        }
    }
}

fn oracle_fidelity_for(input: &SparseState, output: &SparseState) -> Result<Option<f64>, Error> {
    let weights: Vec<(Vec<Val>, Complex64)> = input
        .terms()
        .map(|(c, a)| (c.flat().to_vec(), *a))
        .collect();
    let oracle = oracle_symmetrized((*input.layout()).clone(), &weights)?;
    Ok(Some(output.fidelity(&oracle)?))
}

fn cmd_dicke(cli: &Cli, args: &DickeArgs, started: Instant) -> Result<(), Error> {
    let net = network_for(&args.network, args.n);
    let (state, label) = match (&args.weights, args.k) {
        (Some(spec), _) => {
            let mut weights = Vec::new();
            for part in spec.split(',') {
                let (k, w) = part
                    .split_once('=')
                    .ok_or_else(|| Error::InvalidArgument(format!("bad weight `{part}`")))?;
                let k: usize = k
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad weight key `{k}`")))?;
                let w: f64 = w
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad weight value `{w}`")))?;
                weights.push((k, Complex64::new(w, 0.0)));
            }
            (
                dicke_superposition(args.n, &weights, &net)?,
                format!("weights {spec}"),
            )
        }
        (None, Some(k)) => (dicke(args.n, k, &net)?, format!("k = {k}")),
        (None, None) => {
            return Err(Error::InvalidArgument(
                "provide a Hamming weight or --weights".into(),
            ))
        }
    };
    let outputs = emit_output(cli, &state.to_json())?;
    emit_manifest(
        cli,
        &RunManifest {
            command: "dicke".into(),
            params: serde_json::json!({"n": args.n, "spec": label, "network": args.network}),
            seed: cli.seed,
            depth: DepthReport::default(),
            timing_ms: started.elapsed().as_secs_f64() * 1e3,
            outputs,
            oracle_fidelity: None,
            success_probability: None,
        },
    );
    Ok(())
}

fn cmd_convert(cli: &Cli, args: &ConvertArgs, started: Instant) -> Result<(), Error> {
    let list = parse_list(&args.input)?;
    let mut depth = DepthReport::default();
    let mut outputs;
    if args.inverse {
        let m = args.modes.ok_or_else(|| {
            Error::InvalidArgument("--inverse requires --modes".into())
        })?;
        let counts = nsil_to_occ(&list, m)?;
        let text = counts
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",");
        outputs = emit_output(cli, &text)?;
    } else {
        let (l, d) = occ_to_nsil(&list)?;
        depth = d;
        if args.state {
            let occ_layout = Layout::of(&[(OCC, list.len(), l.len() as Val)]);
            let s = SparseState::basis(occ_layout, BasisConfig::new(list.clone()))?;
            let net = build_bitonic(l.len());
            let run = second_to_first(&s, &net)?;
            depth = run.depth;
            outputs = emit_output(cli, &run.state.to_json())?;
        } else {
            let text = l
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(",");
            outputs = emit_output(cli, &text)?;
        }
    }
    if outputs.is_empty() {
        outputs = vec!["stdout".into()];
    }
    emit_manifest(
        cli,
        &RunManifest {
            command: "convert".into(),
            params: serde_json::json!({
                "input": args.input, "inverse": args.inverse,
                "modes": args.modes, "state": args.state,
            }),
            seed: cli.seed,
            depth,
            timing_ms: started.elapsed().as_secs_f64() * 1e3,
            outputs,
            oracle_fidelity: None,
            success_probability: None,
        },
    );
    Ok(())
}

fn cmd_les(cli: &Cli, args: &LesArgs, started: Instant) -> Result<(), Error> {
    let list = parse_list(&args.input)?;
    let (text, depth) = if args.inverse {
        let image: Vec<usize> = list.iter().map(|&v| v as usize).collect();
        let p = Permutation::new(image)?;
        let s = perm_to_les(&p);
        (join_vals(&s), DepthReport::default())
    } else {
        validate_les(&list)?;
        let (p, depth) = les_to_perm_parallel(&list)?;
        let image: Vec<Val> = p.image().iter().map(|&v| v as Val).collect();
        (join_vals(&image), depth)
    };
    let outputs = emit_output(cli, &text)?;
    emit_manifest(
        cli,
        &RunManifest {
            command: "les".into(),
            params: serde_json::json!({"input": args.input, "inverse": args.inverse}),
            seed: cli.seed,
            depth,
            timing_ms: started.elapsed().as_secs_f64() * 1e3,
            outputs,
            oracle_fidelity: None,
            success_probability: None,
        },
    );
    Ok(())
}

fn join_vals(vals: &[Val]) -> String {
    if vals.iter().all(|&v| v < 10) {
        vals.iter().map(|v| v.to_string()).collect()
    } else {
        vals.iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }
}

fn cmd_telescope(cli: &Cli, args: &TelescopeArgs, started: Instant) -> Result<(), Error> {
    let cfg = ArrayConfig::new(args.detectors, args.spacing, args.wavelength, args.fov_offset)?;
    let photons = match (&args.grid, &args.photons) {
        (Some(grid), _) => Photons::Grid(parse_list(grid)?),
        (None, Some(angles)) => {
            let sines: Result<Vec<f64>, Error> = angles
                .split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidArgument(format!("bad angle `{tok}`")))
                })
                .collect();
            Photons::Sines(sines?)
        }
        (None, None) => {
            return Err(Error::InvalidArgument(
                "provide --grid bins or --photons angles".into(),
            ))
        }
    };
    let net = build_bitonic(photons.len().max(1));
    let run = image_pipeline(&cfg, &photons, &net, cli.seed)?;

    let result = serde_json::json!({
        "recovered_multiset": run.recovered,
        "sampled": run.sampled,
        "multiset_distribution": run.multiset_distribution
            .iter()
            .map(|(k, p)| serde_json::json!({"bins": k, "probability": p}))
            .collect::<Vec<_>>(),
        "ordered_distribution": run.ordered_distribution
            .iter()
            .map(|(k, p)| serde_json::json!({"bins": k, "probability": p}))
            .collect::<Vec<_>>(),
    });
    let mut outputs = emit_output(cli, &serde_json::to_string_pretty(&result).expect("json"))?;
    if let Some(csv) = &args.csv {
        let mut text = String::from("bins,probability\n");
        for (k, p) in &run.ordered_distribution {
            let bins = k
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(" ");
            text.push_str(&format!("{bins},{p}\n"));
        }
        std::fs::write(csv, text)
            .map_err(|e| Error::InvalidArgument(format!("cannot write {csv:?}: {e}")))?;
        outputs.push(csv.display().to_string());
    }
    emit_manifest(
        cli,
        &RunManifest {
            command: "telescope".into(),
            params: serde_json::json!({
                "detectors": args.detectors, "spacing": args.spacing,
                "wavelength": args.wavelength, "fov_offset": args.fov_offset,
                "grid": args.grid, "photons": args.photons,
            }),
            seed: cli.seed,
            depth: run.depth,
            timing_ms: started.elapsed().as_secs_f64() * 1e3,
            outputs,
            oracle_fidelity: None,
            success_probability: None,
        },
    );
    Ok(())
}
