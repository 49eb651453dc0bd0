use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use scguard_core::dot::to_dot;
use scguard_core::io::{parse_any, AnyModel, AttackedModelFile, ModelFile, VerdictDocument};
use scguard_core::runtime::{AttackerPolicy, Simulator};
use scguard_core::safety::{check, Method};
use scguard_core::synthesis::{check_observability, realize_supervisor, supremal_controllable};
use scguard_core::{build_model, AttackMode, AttackedModel, StateSet, VulnerabilitySpec};

#[derive(Parser)]
#[command(
    name = "scguard",
    version,
    about = "Safe controllability of supervisors under actuator and sensor attacks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the attacked closed loop from a plant and a supervisor.
    Build {
        plant: PathBuf,
        supervisor: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Comma-separated vulnerable events.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        vulnerable: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decide whether the attack can be detected before damage.
    Check {
        model: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        method: MethodArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a model as a graph.
    Export {
        model: PathBuf,
        #[arg(long, value_enum, default_value = "dot")]
        format: FormatArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the closed loop with the online defense and log every step.
    Simulate {
        model: PathBuf,
        /// `all-out`, `random:<p>` or a script file of `attack`/`skip` lines.
        #[arg(long, default_value = "all-out")]
        policy: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        max_steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthesize a supervisor for a plant and a specification.
    Synthesize {
        plant: PathBuf,
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Ae,
    Se,
    Si,
}

impl From<ModeArg> for AttackMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Ae => AttackMode::Ae,
            ModeArg::Se => AttackMode::Se,
            ModeArg::Si => AttackMode::Si,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Diagnoser,
    Verifier,
    Oracle,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Dot,
}

const SAFE: u8 = 0;
const UNSAFE: u8 = 1;
const ERROR: u8 = 2;
const DISAGREEMENT: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(ERROR)
        }
    }
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Build {
            plant,
            supervisor,
            mode,
            vulnerable,
            out,
        } => cmd_build(
            &plant,
            &supervisor,
            mode.into(),
            &vulnerable,
            out.as_deref(),
        ),
        Command::Check { model, method, out } => cmd_check(&model, method, out.as_deref()),
        Command::Export { model, format, out } => cmd_export(&model, format, out.as_deref()),
        Command::Simulate {
            model,
            policy,
            seed,
            max_steps,
            out,
        } => cmd_simulate(&model, &policy, seed, max_steps, out.as_deref()),
        Command::Synthesize { plant, spec, out } => cmd_synthesize(&plant, &spec, out.as_deref()),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn load_plain(path: &Path) -> Result<(scguard_core::Automaton, Vec<String>)> {
    ModelFile::load(&read(path)?).with_context(|| path.display().to_string())
}

fn load_attacked(path: &Path) -> Result<AttackedModel> {
    match parse_any(&read(path)?).with_context(|| path.display().to_string())? {
        AnyModel::Attacked(m) => Ok(*m),
        AnyModel::Plain(..) => bail!(
            "{}: expected an attacked model (see `scguard build`)",
            path.display()
        ),
    }
}

fn cmd_build(
    plant: &Path,
    supervisor: &Path,
    mode: AttackMode,
    vulnerable: &[String],
    out: Option<&Path>,
) -> Result<u8> {
    let vulnerable: Vec<&str> = vulnerable
        .iter()
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .collect();
    if vulnerable.is_empty() {
        bail!("vulnerable set empty");
    }
    let (g, unsafe_states) = load_plain(plant)?;
    let (h, _) = load_plain(supervisor)?;
    let spec = match mode {
        AttackMode::Ae => VulnerabilitySpec::actuators(vulnerable),
        AttackMode::Se | AttackMode::Si => VulnerabilitySpec::sensors(vulnerable),
    }
    .with_unsafe(unsafe_states.iter().map(String::as_str));
    let m = build_model(mode, &g, &h, &spec)?;
    eprintln!(
        "built {} model: {} states, {} transitions",
        mode,
        m.model.num_states(),
        m.model.num_transitions()
    );
    emit(out, &AttackedModelFile::from_model(&m).to_json())?;
    Ok(SAFE)
}

fn cmd_check(path: &Path, method: MethodArg, out: Option<&Path>) -> Result<u8> {
    let m = load_attacked(path)?;
    let methods: Vec<Method> = match method {
        MethodArg::Diagnoser => vec![Method::Diagnoser],
        MethodArg::Verifier => vec![Method::Verifier],
        MethodArg::Oracle => vec![Method::Oracle],
        MethodArg::All => Method::ALL.to_vec(),
    };
    let model = &m;
    let verdicts = std::thread::scope(|s| {
        let handles: Vec<_> = methods
            .iter()
            .map(|&k| s.spawn(move || check(model, k)))
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .map_err(|_| anyhow!("checker panicked"))?
                    .map_err(anyhow::Error::from)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let doc = VerdictDocument::new(&m, verdicts);
    if !doc.deadlocks.is_empty() {
        let states: Vec<String> = doc
            .deadlocks
            .iter()
            .map(|d| {
                format!(
                    "{} (plant {}, supervisor {})",
                    d.state, d.plant, d.supervisor
                )
            })
            .collect();
        eprintln!(
            "warning: the closed loop deadlocks at one of the following {} states: {}",
            states.len(),
            states.join(", ")
        );
    }
    if doc.blocking {
        eprintln!("warning: the closed loop is blocking");
    }
    emit(out, &doc.to_json())?;
    if doc.agree == Some(false) {
        let summary: Vec<String> = doc
            .verdicts
            .iter()
            .map(|v| format!("{}={}", v.method, if v.safe { "safe" } else { "unsafe" }))
            .collect();
        eprintln!("error: methods disagree: {}", summary.join(", "));
        return Ok(DISAGREEMENT);
    }
    Ok(if doc.safe { SAFE } else { UNSAFE })
}

fn cmd_export(path: &Path, format: FormatArg, out: Option<&Path>) -> Result<u8> {
    let FormatArg::Dot = format;
    let text = match parse_any(&read(path)?).with_context(|| path.display().to_string())? {
        AnyModel::Plain(a, unsafe_states) => {
            let set: StateSet = unsafe_states
                .iter()
                .filter_map(|s| a.find_state(s))
                .collect();
            to_dot(&a, &set)
        }
        AnyModel::Attacked(m) => to_dot(&m.model, &m.unsafe_states),
    };
    emit(out, &text)?;
    Ok(SAFE)
}

fn parse_policy(policy: &str) -> Result<AttackerPolicy> {
    if policy == "all-out" {
        return Ok(AttackerPolicy::AllOut);
    }
    if let Some(p) = policy.strip_prefix("random:") {
        let p: f64 = p
            .parse()
            .with_context(|| format!("bad probability in `{policy}`"))?;
        return Ok(AttackerPolicy::random(p)?);
    }
    let path = Path::new(policy);
    if path.is_file() {
        return AttackerPolicy::parse_script(&read(path)?).with_context(|| policy.to_string());
    }
    bail!("unknown policy `{policy}` (expected all-out, random:<p> or a script file)")
}

fn cmd_simulate(
    path: &Path,
    policy: &str,
    seed: u64,
    max_steps: usize,
    out: Option<&Path>,
) -> Result<u8> {
    let policy = parse_policy(policy)?;
    let m = load_attacked(path)?;
    let sim = Simulator::new(m, policy)?;
    let log = sim.simulate(seed, max_steps)?;
    let mut text = String::new();
    for record in &log {
        text.push_str(&serde_json::to_string(record)?);
        text.push('\n');
    }
    emit(out, &text)?;
    Ok(SAFE)
}

fn cmd_synthesize(plant: &Path, spec: &Path, out: Option<&Path>) -> Result<u8> {
    let (g, _) = load_plain(plant)?;
    let (k, _) = load_plain(spec)?;
    let al = g.alphabet();
    let Some(sup) = supremal_controllable(&g, &k, &al.uncontrollable())? else {
        eprintln!("refused: the supremal controllable sublanguage is empty");
        return Ok(UNSAFE);
    };
    let report = check_observability(&g, &sup, &al.observable(), &al.controllable())?;
    if let Some(w) = report.witness {
        eprintln!("refused: the supremal controllable sublanguage is not observable");
        eprintln!("{}", serde_json::to_string_pretty(&w)?);
        return Ok(UNSAFE);
    }
    let h = realize_supervisor(&g, &sup, &al.observable())?;
    eprintln!(
        "supervisor: {} states, {} transitions",
        h.num_states(),
        h.num_transitions()
    );
    emit(out, &ModelFile::from_automaton(&h, &[]).to_json())?;
    Ok(SAFE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies() {
        assert_eq!(parse_policy("all-out").unwrap(), AttackerPolicy::AllOut);
        assert_eq!(
            parse_policy("random:0.25").unwrap(),
            AttackerPolicy::SeededRandom(0.25)
        );
        assert!(parse_policy("random:x").is_err());
        assert!(parse_policy("random:-1").is_err());
        assert!(parse_policy("/no/such/script")
            .unwrap_err()
            .to_string()
            .contains("unknown policy"));
    }

    #[test]
    fn arguments() {
        let cli = Cli::try_parse_from([
            "scguard",
            "build",
            "g.json",
            "h.json",
            "--mode",
            "se",
            "--vulnerable",
            "a3,b3",
        ])
        .unwrap();
        let Command::Build {
            vulnerable, mode, ..
        } = cli.command
        else {
            panic!()
        };
        assert_eq!(vulnerable, ["a3", "b3"]);
        assert_eq!(AttackMode::from(mode), AttackMode::Se);
        assert!(Cli::try_parse_from(["scguard", "check", "m.json", "--method", "guess"]).is_err());
        assert!(Cli::try_parse_from(["scguard", "export", "m.json", "--format", "svg"]).is_err());
    }
}
