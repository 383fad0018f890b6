use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use cvkit::harness::{emit_results, run_experiment, ExperimentConfig};
use cvkit::requirements::RequirementKind;
use cvkit::structured::{constrained_viterbi, viterbi, LinearChain, SequenceScorer};
use cvkit::{parse_rules, Label, Requirement};

#[derive(Parser, Debug)]
#[command(
    name = "cvkit",
    version,
    about = "Concurrent verification experiments and constrained decoding"
)]
struct Cli {
    /// JSON experiment configuration; explicit flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory receiving results.json, results.csv, config.json and manifest.json.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Monte Carlo trials for complexity estimates.
    #[arg(long, global = true)]
    trials: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct ExperimentArgs {
    /// Sample size.
    #[arg(long)]
    m: Option<usize>,
    /// Independent sample draws or instances.
    #[arg(long)]
    draws: Option<usize>,
    /// Rule file replacing the generated requirement.
    #[arg(long)]
    requirement: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sandwich bound for inference-time verification on realizable instances.
    Itv(ExperimentArgs),
    /// The two-point instance where learning then verifying loses 0.5.
    Counterexample(ExperimentArgs),
    /// Margin bound for verified multi-class linear scorers.
    BoundMulticlass(ExperimentArgs),
    /// Additive and multiplicative bounds for verified chain models.
    BoundStructured(ExperimentArgs),
    /// Complexity estimators and masked-versus-unmasked inequalities.
    Complexity(ExperimentArgs),
    /// Decode a JSON-lines dataset with a linear chain model.
    Decode {
        /// Linear chain model JSON.
        #[arg(long)]
        model: PathBuf,
        /// One `{"x": [...], "y": [...]?, "l": n?}` object per line.
        #[arg(long)]
        data: PathBuf,
        /// Rule file; decoding is unconstrained without it.
        #[arg(long)]
        rules: Option<PathBuf>,
    },
    /// Parse a rule file and report inputs with no admissible output.
    CheckRules {
        #[arg(long)]
        rules: PathBuf,
        /// One `{"x": [...], "l": n?}` object per line.
        #[arg(long)]
        inputs: Option<PathBuf>,
        /// Sequence length for structured rules when a line has no `l`.
        #[arg(long)]
        length: Option<usize>,
    },
}

fn merge(base: &mut Value, overlay: Value) {
    if let (Value::Object(b), Value::Object(o)) = (base, overlay) {
        for (k, v) in o {
            b.insert(k, v);
        }
    }
}

fn build_config(cli: &Cli, experiment: &str, args: &ExperimentArgs) -> Result<ExperimentConfig> {
    let mut value = serde_json::to_value(ExperimentConfig::for_experiment(experiment))?;
    if let Some(path) = &cli.config {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let file: Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if let Some(name) = file.get("experiment").and_then(Value::as_str) {
            if name != experiment {
                bail!("config names experiment {name:?} but the subcommand is {experiment:?}");
            }
        }
        merge(&mut value, file);
    }
    let mut cfg = ExperimentConfig::from_json(&value.to_string())?;
    cfg.seed = cli.seed.unwrap_or(cfg.seed);
    cfg.trials = cli.trials.unwrap_or(cfg.trials);
    cfg.m = args.m.unwrap_or(cfg.m);
    cfg.draws = args.draws.unwrap_or(cfg.draws);
    if cli.out.is_some() {
        cfg.out.clone_from(&cli.out);
    }
    if args.requirement.is_some() {
        cfg.requirement.clone_from(&args.requirement);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn experiment(cli: &Cli, name: &str, args: &ExperimentArgs) -> Result<bool> {
    let cfg = build_config(cli, name, args)?;
    let outcome = run_experiment(&cfg)?;
    if let Some(dir) = &cfg.out {
        emit_results(&outcome, &cfg, dir)?;
    }
    let passed = outcome.passed();
    println!(
        "{}",
        json!({ "experiment": name, "seed": cfg.seed, "passed": passed })
    );
    Ok(passed)
}

fn json_lines(path: &Path) -> Result<Vec<Value>> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), n + 1))?,
        );
    }
    Ok(out)
}

fn vector(record: &Value, key: &str) -> Result<Option<Vec<f64>>> {
    match record.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => Ok(Some(
            serde_json::from_value(v.clone()).with_context(|| format!("field {key:?}"))?,
        )),
    }
}

fn length_field(record: &Value) -> Result<Option<usize>> {
    match record.get("l") {
        None | Some(Value::Null) => Ok(None),
        Some(v) => Ok(Some(
            v.as_u64()
                .context("field \"l\" must be a non-negative integer")? as usize,
        )),
    }
}

fn decode(model: &Path, data: &Path, rules: Option<&Path>, out: Option<&Path>) -> Result<bool> {
    let chain = LinearChain::from_json(&fs::read_to_string(model)?)?;
    let req = rules
        .map(|p| -> Result<Requirement> { Ok(parse_rules(&fs::read_to_string(p)?)?) })
        .transpose()?;
    let mut lines = Vec::new();
    let mut all_ok = true;
    for (i, record) in json_lines(data)?.iter().enumerate() {
        let x = vector(record, "x")?.with_context(|| format!("line {} has no \"x\"", i + 1))?;
        let length = chain.length_of(&x)?;
        if let Some(l) = length_field(record)? {
            if l != length {
                bail!(
                    "line {}: \"l\" is {l} but x encodes {length} positions",
                    i + 1
                );
            }
        }
        let decoded = match &req {
            Some(r) => constrained_viterbi(&chain, &x, r),
            None => viterbi(&chain, &x),
        };
        let mut entry = json!({ "index": i });
        match decoded {
            Ok(y) => {
                entry["y"] = json!(y.iter().map(|l| l.0).collect::<Vec<_>>());
                entry["score"] = json!(chain.score_sequence(&x, &y)?);
                if let Some(truth) = record.get("y").filter(|v| !v.is_null()) {
                    let truth: Vec<usize> = serde_json::from_value(truth.clone())?;
                    let truth: Vec<Label> = truth.into_iter().map(Label).collect();
                    entry["hamming"] = json!(cvkit::losses::hamming_loss(&y, &truth)?);
                }
            }
            Err(e) => {
                all_ok = false;
                entry["error"] = json!(e.to_string());
            }
        }
        lines.push(entry.to_string());
    }
    let text = lines.iter().map(|l| format!("{l}\n")).collect::<String>();
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("decoded.jsonl"), text)?;
        }
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(all_ok)
}

fn check_rules(rules: &Path, inputs: Option<&Path>, length: Option<usize>) -> Result<bool> {
    let req = parse_rules(
        &fs::read_to_string(rules).with_context(|| format!("reading {}", rules.display()))?,
    )?;
    let kind = match req.kind() {
        RequirementKind::Flat => "flat",
        RequirementKind::Structured => "structured",
    };
    let mut summary =
        json!({ "kind": kind, "label_count": req.label_count(), "rules": req.rules().len() });
    let mut feasible = true;
    if let Some(path) = inputs {
        let records = json_lines(path)?;
        let report = match req.kind() {
            RequirementKind::Flat => {
                let xs = records
                    .iter()
                    .enumerate()
                    .map(|(i, r)| {
                        vector(r, "x")?.with_context(|| format!("line {} has no \"x\"", i + 1))
                    })
                    .collect::<Result<Vec<_>>>()?;
                req.check_feasibility(&xs)?
            }
            RequirementKind::Structured => {
                let mut with_len = Vec::with_capacity(records.len());
                for (i, r) in records.iter().enumerate() {
                    let x =
                        vector(r, "x")?.with_context(|| format!("line {} has no \"x\"", i + 1))?;
                    let l = length_field(r)?
                        .or(length)
                        .or(req.labels().fixed_length())
                        .with_context(|| {
                            format!("line {} needs a sequence length (\"l\" or --length)", i + 1)
                        })?;
                    with_len.push((x, l));
                }
                req.check_feasibility_structured(&with_len)?
            }
        };
        feasible = report.is_feasible();
        summary["feasibility"] = serde_json::to_value(&report)?;
    }
    summary["feasible"] = json!(feasible);
    println!("{summary}");
    Ok(feasible)
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Itv(a) => experiment(cli, "itv", a),
        Command::Counterexample(a) => experiment(cli, "counterexample", a),
        Command::BoundMulticlass(a) => experiment(cli, "bound-multiclass", a),
        Command::BoundStructured(a) => experiment(cli, "bound-structured", a),
        Command::Complexity(a) => experiment(cli, "complexity", a),
        Command::Decode { model, data, rules } => {
            decode(model, data, rules.as_deref(), cli.out.as_deref())
        }
        Command::CheckRules {
            rules,
            inputs,
            length,
        } => check_rules(rules, inputs.as_deref(), *length),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
