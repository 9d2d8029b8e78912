//! Command-line driver: configuration merging, experiment orchestration and
//! CSV output.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analysis::{convergence_sweep, stability_probe_seeded, KRule, METRICS, DEFAULT_SEED};
use crate::error::{QcError, Result};
use crate::lattice::{backward_difference, LatticeConfig};
use crate::load::{sample_load, LoadSpec};
use crate::operators::{assemble, ghost_vector, Model};
use crate::potential::{check_assumptions, linearize, LinearizedCoeffs, ModelSelector, PotentialSpec};
use crate::solver::solve_operator;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ASSUMPTION: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "qc1d", version, about = "1D linearized quasicontinuum experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Solve each model and write u and Du per lattice site.
    Solve(CliArgs),
    /// Convergence sweep against the exact continuum solution.
    Sweep(CliArgs),
    /// QCE ghost forces and the deformation they cause under zero load.
    Ghost(CliArgs),
    /// Random coercivity probe of the coupled operators.
    Stability(CliArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CliArgs {
    /// Comma-separated models: atomistic, continuum, qce, qnl, or all.
    #[arg(long)]
    pub model: Option<String>,
    /// lj or explicit:phi'_F,phi''_F,phi'_2F,phi''_2F
    #[arg(long)]
    pub potential: Option<String>,
    /// Uniform reference strain.
    #[arg(long = "F")]
    pub f: Option<String>,
    /// zero or sin:m,A[;m,A...]
    #[arg(long)]
    pub load: Option<String>,
    /// Lattice half-size, or a comma-separated doubling list.
    #[arg(long = "N")]
    pub n: Option<String>,
    /// Interface rule: frac:theta or fixed:k.
    #[arg(long = "K")]
    pub k: Option<String>,
    /// Output path prefix.
    #[arg(long)]
    pub out: Option<String>,
    /// key=value file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Also write each operator as "i j value" triplets.
    #[arg(long)]
    pub dump_matrix: bool,
    #[arg(long)]
    pub trials: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Solve,
    Sweep,
    Ghost,
    Stability,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Solve => "solve",
            CommandKind::Sweep => "sweep",
            CommandKind::Ghost => "ghost",
            CommandKind::Stability => "stability",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: CommandKind,
    pub models: Vec<Model>,
    pub potential: PotentialSpec,
    pub f: f64,
    pub load: LoadSpec,
    pub n_list: Vec<usize>,
    pub k_rule: KRule,
    pub out: String,
    pub trials: usize,
    pub seed: u64,
    pub dump_matrix: bool,
}

const KEYS: [&str; 10] = [
    "model", "potential", "F", "load", "N", "K", "out", "trials", "seed", "dump_matrix",
];

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            QcError::Config(format!("config line {}: expected key=value", lineno + 1))
        })?;
        let key = key.trim().trim_start_matches("--");
        if !KEYS.contains(&key) {
            return Err(QcError::Config(format!("unknown config key '{key}'")));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn bad(key: &str, value: &str, why: impl std::fmt::Display) -> QcError {
    QcError::Config(format!("invalid value '{value}' for '{key}': {why}"))
}

fn parse_models(value: &str) -> Result<Vec<Model>> {
    if value.trim().eq_ignore_ascii_case("all") {
        return Ok(Model::ALL.to_vec());
    }
    let mut models = Vec::new();
    for part in value.split(',') {
        let m: Model = part.parse().map_err(|e| bad("model", value, e))?;
        if !models.contains(&m) {
            models.push(m);
        }
    }
    Ok(models)
}

fn parse_n_list(value: &str) -> Result<Vec<usize>> {
    let list = value
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| bad("N", value, e))?;
    if list.is_empty() || list.contains(&0) {
        return Err(bad("N", value, "lattice sizes must be positive"));
    }
    if list.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(bad("N", value, "each level must double the previous one"));
    }
    Ok(list)
}

impl RunConfig {
    /// Builds a configuration from merged string settings.
    pub fn from_settings(command: CommandKind, settings: &BTreeMap<String, String>) -> Result<Self> {
        let get = |key: &str, default: &str| -> String {
            settings.get(key).cloned().unwrap_or_else(|| default.to_string())
        };
        let default_n = if command == CommandKind::Sweep {
            "32,64,128,256,512"
        } else {
            "64"
        };
        let default_load = if command == CommandKind::Ghost { "zero" } else { "sin:1,1" };

        let models = match command {
            CommandKind::Ghost => vec![Model::Qce],
            _ => parse_models(&get("model", "qce,qnl"))?,
        };
        let potential_s = get("potential", "lj");
        let potential: PotentialSpec = potential_s.parse().map_err(|e| bad("potential", &potential_s, e))?;
        let f_s = get("F", "1.0");
        let f: f64 = f_s.trim().parse().map_err(|e| bad("F", &f_s, e))?;
        if !(f.is_finite() && f > 0.0) {
            return Err(bad("F", &f_s, "strain must be positive"));
        }
        let load_s = get("load", default_load);
        let load: LoadSpec = load_s.parse().map_err(|e| bad("load", &load_s, e))?;
        let n_list = parse_n_list(&get("N", default_n))?;
        if command == CommandKind::Sweep && n_list.len() < 4 {
            return Err(bad("N", &get("N", default_n), "a sweep needs at least 4 levels"));
        }
        let k_s = get("K", "frac:0.25");
        let k_rule: KRule = k_s.parse().map_err(|e| bad("K", &k_s, e))?;
        if models.iter().any(|m| m.has_interface()) {
            for &n in &n_list {
                let k = k_rule.k_for(n);
                LatticeConfig::new(n, k, f).map_err(|e| bad("K", &k_s, format!("N = {n}: {e}")))?;
            }
        }
        let trials_s = get("trials", "200");
        let trials: usize = trials_s.trim().parse().map_err(|e| bad("trials", &trials_s, e))?;
        if trials == 0 {
            return Err(bad("trials", &trials_s, "need at least one trial"));
        }
        let seed_s = get("seed", &DEFAULT_SEED.to_string());
        let seed: u64 = seed_s.trim().parse().map_err(|e| bad("seed", &seed_s, e))?;
        let dump_s = get("dump_matrix", "false");
        let dump_matrix: bool = dump_s.trim().parse().map_err(|e| bad("dump_matrix", &dump_s, e))?;
        let out = get("out", "qc1d");
        if out.is_empty() {
            return Err(bad("out", &out, "empty output prefix"));
        }
        Ok(RunConfig {
            command,
            models,
            potential,
            f,
            load,
            n_list,
            k_rule,
            out,
            trials,
            seed,
            dump_matrix,
        })
    }

    /// Config file settings overridden by command-line flags.
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let (command, args) = match &cli.command {
            CliCommand::Solve(a) => (CommandKind::Solve, a),
            CliCommand::Sweep(a) => (CommandKind::Sweep, a),
            CliCommand::Ghost(a) => (CommandKind::Ghost, a),
            CliCommand::Stability(a) => (CommandKind::Stability, a),
        };
        let mut settings = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| QcError::Io(format!("{}: {e}", path.display())))?;
                parse_config_text(&text)?
            }
            None => BTreeMap::new(),
        };
        let flags = [
            ("model", &args.model),
            ("potential", &args.potential),
            ("F", &args.f),
            ("load", &args.load),
            ("N", &args.n),
            ("K", &args.k),
            ("out", &args.out),
            ("trials", &args.trials),
            ("seed", &args.seed),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                settings.insert(key.to_string(), v.clone());
            }
        }
        if args.dump_matrix {
            settings.insert("dump_matrix".into(), "true".into());
        }
        RunConfig::from_settings(command, &settings)
    }
}

/// Exit status for a failed run.
pub fn exit_code(err: &QcError) -> i32 {
    match err {
        QcError::Io(_) => EXIT_IO,
        QcError::Config(_)
        | QcError::LengthMismatch { .. }
        | QcError::NormDomain(_)
        | QcError::PotentialDomain(_)
        | QcError::Load { .. } => EXIT_CONFIG,
        QcError::Ellipticity(_) | QcError::ComplexRoot(_) | QcError::DegenerateRoot(_) => EXIT_ASSUMPTION,
        QcError::IncompatibleRhs { .. }
        | QcError::Singular { .. }
        | QcError::ResidualTooLarge { .. }
        | QcError::Symmetry { .. }
        | QcError::Assembly(_)
        | QcError::Interface(_) => EXIT_SOLVER,
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn meta_line(cfg: &RunConfig, coeffs: &LinearizedCoeffs) -> String {
    let probe = match cfg.command {
        CommandKind::Stability => format!(" trials={} seed={}", cfg.trials, cfg.seed),
        _ => String::new(),
    };
    format!(
        "#meta tool=qc1d version={} command={} potential={} F={} phi1_F={} phi2_F={} phi1_2F={} phi2_2F={} load={} K={}{probe}\n",
        env!("CARGO_PKG_VERSION"),
        cfg.command.name(),
        cfg.potential,
        fmt_num(cfg.f),
        fmt_num(coeffs.phi1_f),
        fmt_num(coeffs.phi2_f),
        fmt_num(coeffs.phi1_2f),
        fmt_num(coeffs.phi2_2f),
        cfg.load,
        cfg.k_rule,
    )
}

struct Output<'a> {
    prefix: &'a str,
    written: Vec<PathBuf>,
}

impl Output<'_> {
    fn create(&mut self, suffix: &str) -> Result<(PathBuf, BufWriter<File>)> {
        let path = PathBuf::from(format!("{}_{suffix}", self.prefix));
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
        let file = File::create(&path).map_err(|e| io_err(&path, e))?;
        self.written.push(path.clone());
        Ok((path, BufWriter::new(file)))
    }
}

fn io_err(path: &Path, e: std::io::Error) -> QcError {
    QcError::Io(format!("{}: {e}", path.display()))
}

fn lattice_for(model: Model, n: usize, k_rule: KRule, f: f64) -> Result<LatticeConfig> {
    let k = k_rule.k_for(n);
    if model.has_interface() {
        LatticeConfig::new(n, k, f)
    } else {
        let mut l = LatticeConfig::periodic(n, f)?;
        l.k = k;
        Ok(l)
    }
}

fn selector(models: &[Model]) -> ModelSelector {
    match (models.contains(&Model::Qce), models.contains(&Model::Qnl)) {
        (true, true) => ModelSelector::Both,
        (true, false) => ModelSelector::Qce,
        (false, true) => ModelSelector::Qnl,
        _ => ModelSelector::None,
    }
}

/// Runs one command and returns the files written. Coercivity failures are
/// reported on stderr; a non-elliptic continuum limit is fatal.
pub fn run(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let coeffs = linearize(&cfg.potential, cfg.f)?;
    if !(coeffs.c_cont > 0.0) {
        return Err(QcError::Ellipticity(coeffs.c_cont));
    }
    let report = check_assumptions(&coeffs, selector(&cfg.models));
    for fail in report.failures() {
        eprintln!("warning: assumption {} fails (margin {:e})", fail.name, fail.margin);
    }
    let meta = meta_line(cfg, &coeffs);
    let mut out = Output {
        prefix: &cfg.out,
        written: Vec::new(),
    };
    let w = |path: &Path, e: std::io::Error| io_err(path, e);

    match cfg.command {
        CommandKind::Solve => {
            for &model in &cfg.models {
                for &n in &cfg.n_list {
                    let lattice = lattice_for(model, n, cfg.k_rule, cfg.f)?;
                    let op = assemble(model, &lattice, &coeffs)?;
                    let f = sample_load(&cfg.load, &lattice)?;
                    let u = solve_operator(&op, &f)?.solution;
                    let du = backward_difference(&u, &lattice)?;
                    let (path, mut file) = out.create(&format!("solve_{model}_N{n}.csv"))?;
                    let mut text = meta.clone();
                    text.push_str("j,x,u,Du\n");
                    for (j, v) in u.iter() {
                        text.push_str(&format!(
                            "{j},{},{},{}\n",
                            fmt_num(lattice.x(j)),
                            fmt_num(v),
                            fmt_num(du.get(j))
                        ));
                    }
                    file.write_all(text.as_bytes()).map_err(|e| w(&path, e))?;
                    file.flush().map_err(|e| w(&path, e))?;
                    if cfg.dump_matrix {
                        let (path, mut file) = out.create(&format!("matrix_{model}_N{n}.txt"))?;
                        op.write_triplets(&mut file)?;
                        file.flush().map_err(|e| w(&path, e))?;
                    }
                }
            }
        }
        CommandKind::Sweep => {
            let (path, mut file) = out.create("sweep.csv")?;
            let mut text = meta.clone();
            text.push_str("model,N,h,K,e_linf,de_l1,de_l2,de_linf\n");
            let mut footer = String::new();
            for &model in &cfg.models {
                let rep = convergence_sweep(model, &cfg.potential, cfg.f, &cfg.load, &cfg.n_list, cfg.k_rule)?;
                for r in &rep.rows {
                    text.push_str(&format!(
                        "{model},{},{},{},{},{},{},{}\n",
                        r.n,
                        fmt_num(r.h),
                        r.k,
                        fmt_num(r.norms.e_linf),
                        fmt_num(r.norms.de_l1),
                        fmt_num(r.norms.de_l2),
                        fmt_num(r.norms.de_linf)
                    ));
                    if let Some(msg) = &r.failure {
                        footer.push_str(&format!("#failed,{model},{},{}\n", r.n, msg.replace(',', ";")));
                    }
                }
                for name in METRICS {
                    let rate = rep.rate(name).unwrap_or(f64::NAN);
                    footer.push_str(&format!("#rate,{model},{name},{}\n", fmt_num(rate)));
                }
                if rep.outside_theory {
                    footer.push_str(&format!("#outside_theory,{model}\n"));
                }
            }
            text.push_str(&footer);
            file.write_all(text.as_bytes()).map_err(|e| w(&path, e))?;
            file.flush().map_err(|e| w(&path, e))?;
        }
        CommandKind::Ghost => {
            for &n in &cfg.n_list {
                let lattice = lattice_for(Model::Qce, n, cfg.k_rule, cfg.f)?;
                let op = assemble(Model::Qce, &lattice, &coeffs)?;
                let g = ghost_vector(&lattice, &coeffs)?.g;
                let f = sample_load(&cfg.load, &lattice)?;
                let u = solve_operator(&op, &f)?.solution;
                let (path, mut file) = out.create(&format!("ghost_N{n}.csv"))?;
                let mut text = meta.clone();
                text.push_str("j,g,u_qce\n");
                for (j, v) in u.iter() {
                    text.push_str(&format!("{j},{},{}\n", fmt_num(g.get(j)), fmt_num(v)));
                }
                file.write_all(text.as_bytes()).map_err(|e| w(&path, e))?;
                file.flush().map_err(|e| w(&path, e))?;
            }
        }
        CommandKind::Stability => {
            let (path, mut file) = out.create("stability.csv")?;
            let mut text = meta.clone();
            text.push_str("model,N,K,nu_theory,min_ratio\n");
            for &model in &cfg.models {
                let nu = match model {
                    Model::Qce => coeffs.nu_qce,
                    Model::Qnl => coeffs.nu_qnl,
                    _ => coeffs.c_cont,
                };
                for &n in &cfg.n_list {
                    let lattice = lattice_for(model, n, cfg.k_rule, cfg.f)?;
                    let op = assemble(model, &lattice, &coeffs)?;
                    let r = stability_probe_seeded(&op, nu, cfg.trials, cfg.seed)?;
                    text.push_str(&format!(
                        "{model},{n},{},{},{}\n",
                        lattice.k,
                        fmt_num(nu),
                        fmt_num(r.min_ratio)
                    ));
                }
            }
            file.write_all(text.as_bytes()).map_err(|e| w(&path, e))?;
            file.flush().map_err(|e| w(&path, e))?;
        }
    }
    Ok(out.written)
}

/// Parses `args` (program name first), runs, and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let outcome = RunConfig::from_cli(&cli).and_then(|cfg| run(&cfg));
    match outcome {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults() {
        let cfg = RunConfig::from_settings(CommandKind::Sweep, &BTreeMap::new()).unwrap();
        assert_eq!(cfg.n_list, vec![32, 64, 128, 256, 512]);
        assert_eq!(cfg.models, vec![Model::Qce, Model::Qnl]);
        assert_eq!(cfg.k_rule, KRule::Fraction(0.25));
    }

    #[test]
    fn errors_name_the_key() {
        for (key, value) in [("F", "abc"), ("N", "32,48"), ("K", "frac:0.99"), ("model", "qcx"), ("trials", "0")] {
            let err = RunConfig::from_settings(CommandKind::Solve, &settings(&[(key, value)])).unwrap_err();
            assert!(err.to_string().contains(&format!("'{key}'")), "{err}");
            assert_eq!(exit_code(&err), EXIT_CONFIG);
        }
    }

    #[test]
    fn config_text() {
        let m = parse_config_text("# comment\nmodel = qnl\n\nN=16,32\n").unwrap();
        assert_eq!(m["model"], "qnl");
        assert_eq!(m["N"], "16,32");
        let err = parse_config_text("colour=red").unwrap_err();
        assert!(err.to_string().contains("'colour'"));
    }

    #[test]
    fn sweep_needs_four_levels() {
        let err = RunConfig::from_settings(CommandKind::Sweep, &settings(&[("N", "32,64")])).unwrap_err();
        assert!(err.to_string().contains("'N'"));
    }
}
