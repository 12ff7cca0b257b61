//! `spcolor`: batch runs of the spectral coloring algorithms with JSON reports.
//!
//! Seeds: the `--seed` value plants colorings directly (stream 0) and feeds
//! generators directly; recovery routines get `derive_seed(seed, 1)`.

mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use spectral_coloring::coloring::{color_3_expander, color_expander, find_independent_set};
use spectral_coloring::eval::{labels_from_sets, permutation_match};
use spectral_coloring::graph::{coloring_quality, normalized_adjacency};
use spectral_coloring::instances::{derive_seed, generate, parse_generator_spec, Manifest};
use spectral_coloring::planting::{
    class_deviation, plant_k_coloring, recover_full, recover_partial_list, save_planted, statistically_bad,
    FullRecoveryParams, PlantedInstance, DEFAULT_PLANTED_LAMBDA,
};
use spectral_coloring::recovery::RecoveryParams;
use spectral_coloring::spectral::{eig_sym, eigenvalues_sym, verify_rank_inequality, SpectralDecomposition};
use spectral_coloring::{io, Error, Graph, Partition};

use config::Options;

const RANK_TAUS: [f64; 5] = [0.3, 0.5, 0.7, 0.9, 1.0];
const RANK_SIGMAS: [f64; 3] = [0.25, 0.5, 0.75];

#[derive(Parser)]
#[command(name = "spcolor", version, about = "Spectral coloring and independent-set runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Options,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Generate an instance from a JSON generator spec
    Gen,
    /// Eigenvalues and threshold ranks of the normalized adjacency
    Spectrum,
    /// Check the bottom/top threshold-rank inequality
    RankCheck,
    /// k-coloring of a one-sided expander
    Color,
    /// 3-coloring of a one-sided expander
    Color3,
    /// Independent set in a graph with small bottom threshold rank
    IndepSet,
    /// Plant a random k-coloring into a host graph
    Plant,
    /// Plant, then list candidate colorings
    RecoverPartial,
    /// Plant, then recover a complete proper coloring
    RecoverFull,
    /// Coloring quality of a partition
    Eval,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Gen => "gen",
            Command::Spectrum => "spectrum",
            Command::RankCheck => "rank-check",
            Command::Color => "color",
            Command::Color3 => "color3",
            Command::IndepSet => "indep-set",
            Command::Plant => "plant",
            Command::RecoverPartial => "recover-partial",
            Command::RecoverFull => "recover-full",
            Command::Eval => "eval",
        }
    }
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Algorithmic(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        if e.is_algorithmic() {
            Failure::Algorithmic(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure::Input(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Failure {
        Failure::Input(e.to_string())
    }
}

#[derive(Debug, Default, Serialize)]
struct Spectra {
    lambda2: Option<f64>,
    lambda3: Option<f64>,
    lambda_min: Option<f64>,
    tau: Option<f64>,
    top_rank: Option<usize>,
    bottom_rank: Option<usize>,
}

impl Spectra {
    fn from_values(ev: &[f64], tau: Option<f64>) -> Spectra {
        let slack = spectral_coloring::spectral::EIG_SLACK;
        Spectra {
            lambda2: ev.get(1).copied(),
            lambda3: ev.get(2).copied(),
            lambda_min: ev.last().copied(),
            tau,
            top_rank: tau.map(|t| ev.iter().filter(|&&x| x >= t - slack).count()),
            bottom_rank: tau.map(|t| ev.iter().filter(|&&x| x <= -t + slack).count()),
        }
    }

    fn from_spec(spec: &SpectralDecomposition, tau: Option<f64>) -> Spectra {
        Spectra::from_values(&spec.eigenvalues, tau)
    }
}

#[derive(Debug, Serialize)]
struct RunReport {
    command: String,
    parameters: Options,
    seed: u64,
    spectra: Option<Spectra>,
    result: Value,
    agreement: Option<f64>,
    success: bool,
    wall_time_secs: f64,
}

struct Outcome {
    spectra: Option<Spectra>,
    result: Value,
    agreement: Option<f64>,
    success: bool,
}

impl Outcome {
    fn ok(result: Value) -> Outcome {
        Outcome { spectra: None, result, agreement: None, success: true }
    }
}

fn need<T: Clone>(v: &Option<T>, flag: &str) -> Result<T, Failure> {
    v.clone().ok_or_else(|| Failure::Input(format!("--{flag} is required")))
}

fn with_path<T>(path: &Path, r: Result<T, Error>) -> Result<T, Failure> {
    r.map_err(|e| match Failure::from(e) {
        Failure::Input(m) => Failure::Input(format!("{}: {m}", path.display())),
        f => f,
    })
}

fn input_graph(o: &Options) -> Result<Graph, Failure> {
    let path = need(&o.input, "input")?;
    with_path(&path, io::load_graph(&path))
}

fn load_partition(path: &Path) -> Result<Partition, Failure> {
    with_path(path, io::load_partition(path))
}

fn load_opt_partition(p: &Option<PathBuf>) -> Result<Option<Partition>, Failure> {
    p.as_deref().map(load_partition).transpose()
}

fn agreement(reference: &Option<Partition>, labels: &[Option<usize>]) -> Result<Option<f64>, Failure> {
    match reference {
        Some(r) => Ok(Some(permutation_match(r, labels)?.1)),
        None => Ok(None),
    }
}

fn normalized_spectrum(g: &Graph) -> Result<SpectralDecomposition, Failure> {
    Ok(eig_sym(&normalized_adjacency(g)?)?)
}

fn run_gen(o: &Options) -> Result<Outcome, Failure> {
    let path = need(&o.spec, "spec")?;
    let text = fs::read_to_string(&path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let spec = with_path(&path, parse_generator_spec(&text))?;
    let inst = generate(&spec, o.seed())?;
    let manifest = Manifest::new(&spec, o.seed(), &inst);
    if let Some(dir) = &o.output_dir {
        fs::create_dir_all(dir)?;
        io::save_graph(&inst.graph, dir.join("graph.el"))?;
        if let Some(p) = &inst.partition {
            io::save_partition(p, dir.join("partition.part"))?;
        }
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    }
    Ok(Outcome::ok(json!({ "manifest": manifest, "marked": inst.marked })))
}

fn run_spectrum(o: &Options) -> Result<Outcome, Failure> {
    let g = input_graph(o)?;
    let spec = normalized_spectrum(&g)?;
    let mut out = Outcome::ok(json!({ "eigenvalues": spec.eigenvalues }));
    out.spectra = Some(Spectra::from_spec(&spec, o.tau));
    Ok(out)
}

fn run_rank_check(o: &Options) -> Result<Outcome, Failure> {
    let g = input_graph(o)?;
    let a = normalized_adjacency(&g)?;
    let spec = eig_sym(&a)?;
    let taus = o.tau.map(|t| vec![t]).unwrap_or_else(|| RANK_TAUS.to_vec());
    let sigmas = o.sigma.map(|s| vec![s]).unwrap_or_else(|| RANK_SIGMAS.to_vec());
    let mut reports = Vec::new();
    for &tau in &taus {
        for &sigma in &sigmas {
            reports.push(verify_rank_inequality(&a, &spec, tau, sigma)?);
        }
    }
    let holds = reports.iter().all(|r| r.holds);
    Ok(Outcome {
        spectra: Some(Spectra::from_spec(&spec, o.tau)),
        result: json!({ "holds": holds, "reports": reports }),
        agreement: None,
        success: holds,
    })
}

fn run_color(o: &Options, three: bool) -> Result<Outcome, Failure> {
    let g = input_graph(o)?;
    let reference = load_opt_partition(&o.reference.clone().or(o.partition.clone()))?;
    let params = o.recovery(RecoveryParams::default().lambda, derive_seed(o.seed(), 1));
    let res = if three {
        color_3_expander(&g, o.gamma.unwrap_or(0.05), &params)?
    } else {
        color_expander(&g, need(&o.k, "k")?, &params)?
    };
    let agreement = agreement(&reference, &res.labels(g.n()))?;
    let spectra = Spectra {
        lambda2: res.provenance.lambda2,
        ..Spectra::default()
    };
    Ok(Outcome { spectra: Some(spectra), result: serde_json::to_value(&res)?, agreement, success: true })
}

fn run_indep_set(o: &Options) -> Result<Outcome, Failure> {
    let g = input_graph(o)?;
    let gamma = o.gamma.unwrap_or(0.05);
    let lam = o.lambda.unwrap_or(0.5 - gamma);
    let params = o.recovery(lam, derive_seed(o.seed(), 1));
    let res = find_independent_set(&g, gamma, lam, params.rank_cap, &params)?;
    let reference = load_opt_partition(&o.reference.clone().or(o.partition.clone()))?;
    let agreement = match &reference {
        Some(r) => agreement(&reference, &labels_from_sets(r.n(), &[res.set.clone()]))?,
        None => None,
    };
    let fraction = res.set.len() as f64 / g.n().max(1) as f64;
    Ok(Outcome {
        spectra: Some(Spectra { bottom_rank: Some(res.bottom_rank), tau: Some(lam), ..Spectra::default() }),
        result: json!({ "independent_set": res, "fraction": fraction }),
        agreement,
        success: true,
    })
}

fn planted(o: &Options) -> Result<PlantedInstance, Failure> {
    let host = input_graph(o)?;
    let mut inst = plant_k_coloring(&host, need(&o.k, "k")?, o.seed())?;
    if let Some(d) = o.d {
        if !(d > 0.0) {
            return Err(Failure::Input(format!("--d must be positive, got {d}")));
        }
        inst.d = d;
    }
    Ok(inst)
}

fn host_spectra(inst: &PlantedInstance, tau: Option<f64>) -> Result<Spectra, Failure> {
    let ev = eigenvalues_sym(&(inst.host.adjacency_matrix() / inst.d))?;
    Ok(Spectra::from_values(&ev, tau))
}

fn run_plant(o: &Options) -> Result<Outcome, Failure> {
    let inst = planted(o)?;
    if let Some(dir) = &o.output_dir {
        save_planted(&inst, dir)?;
        io::save_graph(&inst.graph, dir.join("graph.el"))?;
    }
    Ok(Outcome::ok(json!({
        "n": inst.graph.n(),
        "k": inst.k(),
        "d": inst.d,
        "host_edges": inst.host.num_edges(),
        "removed_edges": inst.host.num_edges() - inst.graph.num_edges(),
        "class_sizes": inst.planted.class_sizes(),
        "class_deviation": class_deviation(&inst.planted),
        "statistically_bad": statistically_bad(&inst).len(),
        "planted": inst.planted,
    })))
}

fn run_recover_partial(o: &Options) -> Result<Outcome, Failure> {
    let inst = planted(o)?;
    let params = o.recovery(DEFAULT_PLANTED_LAMBDA, derive_seed(o.seed(), 1));
    let list = recover_partial_list(&inst.graph, inst.d, inst.k(), &params)?;
    let scores = list
        .partitions
        .iter()
        .map(|p| permutation_match(&inst.planted, &p.labels()).map(|m| m.1))
        .collect::<Result<Vec<f64>, Error>>()?;
    let best = scores.iter().copied().enumerate().fold(None, |acc: Option<(usize, f64)>, (i, s)| match acc {
        Some((_, b)) if b >= s => acc,
        _ => Some((i, s)),
    });
    Ok(Outcome {
        spectra: Some(host_spectra(&inst, o.tau)?),
        result: json!({
            "candidates": list.len(),
            "capped": list.capped,
            "eigenvalues": list.eigenvalues,
            "best_index": best.map(|b| b.0),
            "best_partition": best.map(|b| &list.partitions[b.0]),
            "agreements": scores,
        }),
        agreement: best.map(|b| b.1),
        success: !list.is_empty(),
    })
}

fn run_recover_full(o: &Options) -> Result<Outcome, Failure> {
    let inst = planted(o)?;
    let params = FullRecoveryParams {
        recovery: o.recovery(DEFAULT_PLANTED_LAMBDA, derive_seed(o.seed(), 1)),
        size_limit: o.size_limit,
    };
    let out = recover_full(&inst, &params)?;
    let agreement = match &out.partition {
        Some(p) => Some(permutation_match(&inst.planted, &p.labels())?.1),
        None => None,
    };
    Ok(Outcome {
        spectra: Some(host_spectra(&inst, o.tau)?),
        success: out.partition.is_some(),
        result: serde_json::to_value(&out)?,
        agreement,
    })
}

fn run_eval(o: &Options) -> Result<Outcome, Failure> {
    let g = input_graph(o)?;
    let p = load_partition(&need(&o.partition, "partition")?)?;
    let reference = load_opt_partition(&o.reference)?;
    let q = coloring_quality(&g, &p, None)?;
    let agreement = agreement(&reference, &p.labels())?;
    Ok(Outcome { spectra: None, result: serde_json::to_value(&q)?, agreement, success: true })
}

fn dispatch(cmd: Command, o: &Options) -> Result<Outcome, Failure> {
    match cmd {
        Command::Gen => run_gen(o),
        Command::Spectrum => run_spectrum(o),
        Command::RankCheck => run_rank_check(o),
        Command::Color => run_color(o, false),
        Command::Color3 => run_color(o, true),
        Command::IndepSet => run_indep_set(o),
        Command::Plant => run_plant(o),
        Command::RecoverPartial => run_recover_partial(o),
        Command::RecoverFull => run_recover_full(o),
        Command::Eval => run_eval(o),
    }
}

fn load_options(flags: Options) -> Result<Options, Failure> {
    let base = match &flags.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<Options>(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?
        }
        None => Options::default(),
    };
    Ok(flags.over(base))
}

fn emit(report: &RunReport, out: Option<&Path>) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(report)?;
    match out {
        Some(path) => fs::write(path, text + "\n")?,
        None => {
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
                _ => {}
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let start = Instant::now();
    let result = load_options(cli.opts).and_then(|o| {
        let outcome = dispatch(cli.command, &o);
        outcome.map(|r| (o, r))
    });
    match result {
        Ok((o, outcome)) => {
            let report = RunReport {
                command: cli.command.name().to_string(),
                seed: o.seed(),
                spectra: outcome.spectra,
                result: outcome.result,
                agreement: outcome.agreement,
                success: outcome.success,
                wall_time_secs: start.elapsed().as_secs_f64(),
                parameters: o.clone(),
            };
            if let Err(Failure::Input(e) | Failure::Algorithmic(e)) = emit(&report, o.out.as_deref()) {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
            if report.success {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(Failure::Input(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Algorithmic(e)) => {
            eprintln!("failed: {e}");
            ExitCode::from(2)
        }
    }
}
