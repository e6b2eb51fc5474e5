//! `macsel`: evaluate, rank and select WSN MAC protocol categories, sweep
//! the models, and run the validating simulator.
//!
//! Exit codes: 0 success, 1 domain error, 2 usage or parse error,
//! 3 validation tolerance exceeded.

mod format;

use std::collections::BTreeSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use macsel_core::category::CategoryId;
use macsel_core::config::{parse_section, ConfigDocument, ConfigError};
use macsel_core::cpf::{linspace, report, sweep, write_sweep_csv, builtin_categories, SweepAxis};
use macsel_core::desim::{self, compare_model_sim, Protocol, Schedule, SimError};
use macsel_core::error::ModelError;
use macsel_core::registry::{review_worklist, select, ProtocolRecord, Registry, RegistryError, Requirement};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "macsel", version, about = "MAC protocol category selection for wireless sensor networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Energy, delay and CPF of every category.
    Evaluate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        json: bool,
    },
    /// Rank the categories that can meet the requirements and list their protocols.
    Select {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        registry: RegistryArg,
        /// Comma-separated requirement ids.
        #[arg(long, value_delimiter = ',')]
        require: Vec<String>,
        #[arg(long)]
        json: bool,
    },
    /// Evaluate the categories over a range of one context parameter (CSV).
    Sweep {
        #[command(flatten)]
        model: ModelArgs,
        /// pkt_rate, n_nodes or network_radius.
        #[arg(long)]
        axis: SweepAxis,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        steps: usize,
        /// Output file; standard output if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Run the discrete-event simulator for one protocol.
    Simulate {
        #[command(flatten)]
        sim: SimArgs,
        /// TSMP only: use this schedule instead of building one.
        #[arg(long)]
        schedule: Option<PathBuf>,
        /// Also write the result as JSON to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Compare the simulator against the category model.
    Validate {
        #[command(flatten)]
        sim: SimArgs,
        /// Packet rates to compare at (default 1,5,10,15,20; TSMP: the configured rate).
        #[arg(long, value_delimiter = ',')]
        rates: Vec<f64>,
        /// Largest accepted relative divergence.
        #[arg(long, default_value_t = 0.10)]
        tolerance: f64,
        /// Also write the report to this file (CSV if it ends in .csv, JSON otherwise).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Inspect or extend the protocol registry.
    Registry {
        #[command(flatten)]
        registry: RegistryArg,
        #[command(subcommand)]
        action: RegistryAction,
    },
}

#[derive(Args)]
struct ModelArgs {
    /// Configuration document with context, profile and weights sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Network context (replaces the config's context section).
    #[arg(long)]
    context: Option<PathBuf>,
    /// Radio profile (replaces the config's profile section).
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long)]
    n_nodes: Option<u32>,
    #[arg(long, allow_negative_numbers = true)]
    network_radius: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    tx_range: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pkt_rate: Option<f64>,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long)]
    protocol: Protocol,
    /// Configuration document; the simulation section holds simulator settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Simulated seconds per replication.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    max_reps: Option<u32>,
    #[arg(long)]
    pkt_rate: Option<f64>,
}

#[derive(Args)]
struct RegistryArg {
    /// Registry file. Without it (and without MACSEL_REGISTRY) read-only
    /// commands use the built-in seed registry.
    #[arg(long, env = "MACSEL_REGISTRY")]
    registry: Option<PathBuf>,
}

#[derive(Subcommand)]
enum RegistryAction {
    /// Print the registry.
    List {
        #[arg(long)]
        json: bool,
    },
    /// Write the seed registry to the registry file.
    Init {
        /// Overwrite an existing file.
        #[arg(long)]
        force: bool,
    },
    AddProtocol {
        #[arg(long)]
        name: String,
        #[arg(long)]
        category: String,
        /// Requirements the protocol meets.
        #[arg(long, value_delimiter = ',')]
        satisfies: Vec<String>,
        /// Requirements it was checked against without meeting them.
        #[arg(long, value_delimiter = ',')]
        fails: Vec<String>,
    },
    AddCategory {
        #[arg(long)]
        id: String,
        #[arg(long)]
        representative: String,
        #[arg(long, default_value = "")]
        note: String,
    },
    /// Add a requirement and print the order in which to review protocols against it.
    AddRequirement {
        #[arg(long)]
        id: String,
        #[arg(long, default_value = "")]
        description: String,
    },
    /// Record whether a protocol meets a requirement.
    Review {
        #[arg(long)]
        protocol: String,
        #[arg(long)]
        requirement: String,
        #[arg(long, action = clap::ArgAction::Set)]
        satisfied: bool,
    },
    /// Protocols not yet reviewed against a requirement, in review order.
    Pending {
        #[arg(long)]
        requirement: String,
    },
}

/// A failure with its exit code.
#[derive(Debug)]
enum Failure {
    Domain(String),
    Usage(String),
    Threshold(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Domain(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Threshold(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Domain(m) | Failure::Usage(m) | Failure::Threshold(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Invalid(_) => Failure::Domain(e.to_string()),
            ConfigError::Malformed { .. } | ConfigError::Io { .. } => Failure::Usage(e.to_string()),
        }
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::Domain(e.to_string())
    }
}

impl From<RegistryError> for Failure {
    fn from(e: RegistryError) -> Self {
        match e {
            RegistryError::Malformed { .. } | RegistryError::Io { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Domain(e.to_string()),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Failure::Domain(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| Failure::Domain(format!("cannot write {}: {e}", path.display())))
}

fn print(text: &str) -> Outcome {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Failure::Domain(format!("cannot write output: {e}")))
}

fn print_json<T: Serialize>(value: &T) -> Outcome {
    let mut s = serde_json::to_string_pretty(value).expect("results serialize");
    s.push('\n');
    print(&s)
}

impl ModelArgs {
    fn load(&self) -> Result<ConfigDocument, Failure> {
        let mut doc = match &self.config {
            Some(p) => ConfigDocument::parse(&read(p)?)?,
            None => ConfigDocument::default(),
        };
        if let Some(p) = &self.context {
            doc.context = parse_section(&read(p)?, "context")?;
        }
        if let Some(p) = &self.profile {
            doc.profile = parse_section(&read(p)?, "profile")?;
        }
        if let Some(a) = self.alpha {
            doc.weights.alpha = a;
        }
        if let Some(b) = self.beta {
            doc.weights.beta = b;
        }
        if let Some(n) = self.n_nodes {
            doc.context.n_nodes = n;
        }
        if let Some(r) = self.network_radius {
            doc.context.network_radius = r;
        }
        if let Some(d) = self.tx_range {
            doc.context.tx_range = d;
        }
        if let Some(g) = self.pkt_rate {
            doc.context.pkt_rate = g;
        }
        let v = doc.validate();
        if !v.is_empty() {
            return Err(ConfigError::Invalid(v).into());
        }
        Ok(doc)
    }
}

impl SimArgs {
    fn load(&self) -> Result<desim::SimConfig, Failure> {
        let mut cfg = match &self.config {
            Some(p) => ConfigDocument::parse(&read(p)?)?.sim_config(),
            None if self.protocol == Protocol::Tsmp => desim::tsmp_reference_config(),
            None => ConfigDocument::default().sim_config(),
        };
        if let Some(s) = self.seed {
            cfg.settings.seed = s;
        }
        if let Some(d) = self.duration {
            cfg.settings.sim_duration = d;
        }
        if let Some(m) = self.max_reps {
            cfg.settings.max_reps = m;
        }
        if let Some(g) = self.pkt_rate {
            cfg.context.pkt_rate = g;
        }
        let v = cfg.validate();
        if !v.is_empty() {
            return Err(ConfigError::Invalid(v).into());
        }
        Ok(cfg)
    }
}

impl RegistryArg {
    /// The registry to read: the file if one is configured, else the seed.
    fn read_only(&self) -> Result<Registry, Failure> {
        match &self.registry {
            Some(p) => Ok(Registry::load(p)?),
            None => Ok(Registry::seed()),
        }
    }

    fn path(&self) -> Result<&Path, Failure> {
        self.registry
            .as_deref()
            .ok_or_else(|| Failure::Usage("no registry file: pass --registry or set MACSEL_REGISTRY".into()))
    }

    fn writable(&self) -> Result<(Registry, &Path), Failure> {
        let path = self.path()?;
        if !path.exists() {
            return Err(Failure::Usage(format!(
                "{} does not exist; create it with `macsel registry init`",
                path.display()
            )));
        }
        Ok((Registry::load(path)?, path))
    }
}

fn evaluate(model: &ModelArgs, json: bool) -> Outcome {
    let doc = model.load()?;
    let r = report(&doc.context, &doc.profile, &doc.weights)?;
    if json {
        print_json(&r)
    } else {
        print(&format::evaluation(&r))
    }
}

fn run_select(model: &ModelArgs, registry: &RegistryArg, require: &[String], json: bool) -> Outcome {
    let doc = model.load()?;
    let reg = registry.read_only()?;
    let req: BTreeSet<String> = require.iter().filter(|s| !s.is_empty()).cloned().collect();
    let sel = select(&reg, &doc.context, &doc.profile, &req, &doc.weights)?;
    if json {
        print_json(&sel)
    } else {
        let listed: Vec<String> = req.into_iter().collect();
        print(&format::selection(&sel, &listed))
    }
}

#[allow(clippy::too_many_arguments)]
fn run_sweep(model: &ModelArgs, axis: SweepAxis, from: f64, to: f64, steps: usize, out: Option<&Path>, json: bool) -> Outcome {
    if !(from < to) {
        return Err(Failure::Usage(format!("--from ({from}) must be less than --to ({to})")));
    }
    if steps < 2 {
        return Err(Failure::Usage(format!("--steps must be at least 2, got {steps}")));
    }
    let doc = model.load()?;
    let values = linspace(from, to, steps)?;
    let rows = sweep(&doc.context, &doc.profile, &doc.weights, axis, &values)?;
    let text = if json {
        let mut s = serde_json::to_string_pretty(&rows).expect("rows serialize");
        s.push('\n');
        s
    } else {
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &rows, &builtin_categories()).map_err(|e| Failure::Domain(e.to_string()))?;
        String::from_utf8(buf).expect("csv is utf-8")
    };
    match out {
        Some(p) => write_file(p, &text),
        None => print(&text),
    }
}

fn simulate(sim: &SimArgs, schedule: Option<&Path>, out: Option<&Path>, json: bool) -> Outcome {
    let cfg = sim.load()?;
    let stats = match (sim.protocol, schedule) {
        (Protocol::Tsmp, Some(p)) => {
            let sched: Schedule = parse_section(&read(p)?, "schedule")?;
            desim::run_tsmp(&cfg, &sched)?
        }
        (_, Some(_)) => return Err(Failure::Usage("--schedule only applies to --protocol tsmp".into())),
        (protocol, None) => desim::run(protocol, &cfg)?,
    };
    if let Some(p) = out {
        write_file(p, &serde_json::to_string_pretty(&stats).expect("stats serialize"))?;
    }
    if json {
        print_json(&stats)
    } else {
        print(&format::sim_stats(&stats))
    }
}

fn divergence_csv(r: &desim::DivergenceReport) -> String {
    let mut s = String::from("pkt_rate,model_energy,sim_energy,sim_energy_half_width,model_delay,sim_delay,divergence\n");
    for p in &r.points {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            p.pkt_rate,
            p.model_energy,
            p.sim_energy,
            p.sim_energy_half_width,
            p.model_delay,
            p.sim_delay.map_or(String::new(), |d| d.to_string()),
            p.divergence
        ));
    }
    s
}

fn validate(sim: &SimArgs, rates: &[f64], tolerance: f64, out: Option<&Path>, json: bool) -> Outcome {
    let cfg = sim.load()?;
    let rates: Vec<f64> = match (rates.is_empty(), sim.protocol) {
        (false, _) => rates.to_vec(),
        (true, Protocol::Tsmp) => vec![cfg.context.pkt_rate],
        (true, _) => vec![1.0, 5.0, 10.0, 15.0, 20.0],
    };
    let r = compare_model_sim(sim.protocol, &cfg, &rates)?;
    if let Some(p) = out {
        let text = if p.extension().is_some_and(|e| e == "csv") {
            divergence_csv(&r)
        } else {
            serde_json::to_string_pretty(&r).expect("report serializes")
        };
        write_file(p, &text)?;
    }
    if json {
        print_json(&r)?;
    } else {
        print(&format::divergence(&r, tolerance))?;
    }
    if r.max_divergence > tolerance {
        return Err(Failure::Threshold(format!(
            "max divergence {} exceeds tolerance {}",
            format::sig6(r.max_divergence),
            format::sig6(tolerance)
        )));
    }
    Ok(())
}

fn registry(arg: &RegistryArg, action: &RegistryAction) -> Outcome {
    match action {
        RegistryAction::List { json } => {
            let reg = arg.read_only()?;
            if *json {
                print(&reg.to_json())
            } else {
                print(&format::registry(&reg))
            }
        }
        RegistryAction::Init { force } => {
            let path = arg.path()?;
            if path.exists() && !force {
                return Err(Failure::Domain(format!("{} exists; pass --force to overwrite", path.display())));
            }
            Registry::seed().save(path)?;
            print(&format!("wrote seed registry to {}\n", path.display()))
        }
        RegistryAction::AddProtocol {
            name,
            category,
            satisfies,
            fails,
        } => {
            let (reg, path) = arg.writable()?;
            let satisfies: BTreeSet<String> = satisfies.iter().filter(|s| !s.is_empty()).cloned().collect();
            let mut reviewed = satisfies.clone();
            reviewed.extend(fails.iter().filter(|s| !s.is_empty()).cloned());
            let next = reg.add_protocol(ProtocolRecord {
                name: name.clone(),
                category: CategoryId::new(category.clone()),
                satisfies,
                reviewed_against: reviewed,
            })?;
            next.save(path)?;
            print(&format!("added protocol {name}\n"))
        }
        RegistryAction::AddCategory { id, representative, note } => {
            let (reg, path) = arg.writable()?;
            let next = reg.add_category(CategoryId::new(id.clone()), representative, note)?;
            next.save(path)?;
            print(&format!(
                "added category {id}; it has no performance model, so selection will skip it with a warning\n"
            ))
        }
        RegistryAction::AddRequirement { id, description } => {
            let (reg, path) = arg.writable()?;
            let (next, worklist) = reg.add_requirement(Requirement {
                id: id.clone(),
                description: description.clone(),
            })?;
            next.save(path)?;
            let mut text = format!("added requirement {id}\nreview order:\n");
            for (i, p) in worklist.iter().enumerate() {
                text.push_str(&format!("  {}. {p}\n", i + 1));
            }
            print(&text)
        }
        RegistryAction::Review {
            protocol,
            requirement,
            satisfied,
        } => {
            let (reg, path) = arg.writable()?;
            let next = reg.record_review(protocol, requirement, *satisfied)?;
            next.save(path)?;
            let verdict = if *satisfied { "satisfies" } else { "does not satisfy" };
            print(&format!("recorded: {protocol} {verdict} {requirement}\n"))
        }
        RegistryAction::Pending { requirement } => {
            let reg = arg.read_only()?;
            if !reg.has_requirement(requirement) {
                return Err(Failure::Domain(format!("unknown requirement '{requirement}'")));
            }
            let pending: BTreeSet<&str> = reg.pending_reviews(requirement).iter().map(|p| p.name.as_str()).collect();
            let mut text = String::new();
            for name in review_worklist(&reg).iter().filter(|n| pending.contains(n.as_str())) {
                text.push_str(name);
                text.push('\n');
            }
            print(&text)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Evaluate { model, json } => evaluate(model, *json),
        Command::Select {
            model,
            registry,
            require,
            json,
        } => run_select(model, registry, require, *json),
        Command::Sweep {
            model,
            axis,
            from,
            to,
            steps,
            out,
            json,
        } => run_sweep(model, *axis, *from, *to, *steps, out.as_deref(), *json),
        Command::Simulate {
            sim,
            schedule,
            out,
            json,
        } => simulate(sim, schedule.as_deref(), out.as_deref(), *json),
        Command::Validate {
            sim,
            rates,
            tolerance,
            out,
            json,
        } => validate(sim, rates, *tolerance, out.as_deref(), *json),
        Command::Registry { registry: arg, action } => registry(arg, action),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
