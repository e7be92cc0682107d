use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use mincsp::graph::{to_dot, to_json as graph_json};
use mincsp::{
    classify_with, core, enumerate_chains, enumerate_one_defect, explore, gen, is_core,
    is_multimorphism, recognize, solve, BinaryOpPair, ClassifyOptions, Domain, GadgetBudget,
    Instance, Language, Method, MorphismError, Oracle, OracleError, Recognized, Route,
    SolveOptions, SolverError,
};

const USAGE: u8 = 2;
const NONE: u8 = 1;
const BUDGET: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "mincsp",
    version,
    about = "Classify and solve {0,1}-valued minimum CSPs on small domains"
)]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    /// Cap on enumerated assignments (solve) or tuple-pair evaluations (check-mm).
    #[arg(long, global = true)]
    budget: Option<u128>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
    Dot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Auto,
    Brute,
    Chain,
    OneDefect,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum GenKind {
    Any,
    Chain,
    OneDefect,
    Noncore,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide tractability of a language and print the report.
    Classify {
        lang: PathBuf,
        /// Attach a multimorphism-graph exploration of the core.
        #[arg(long)]
        graph: bool,
    },
    /// Minimize an instance exactly.
    Solve {
        lang: PathBuf,
        inst: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
        method: MethodArg,
        /// Operation pair file to use as the tractability witness.
        #[arg(long)]
        witness: Option<PathBuf>,
    },
    /// Explore the multimorphism graph with certified gadgets.
    Graph {
        lang: PathBuf,
        /// Maximum number of auxiliary variables per gadget.
        #[arg(long, default_value_t = 2)]
        budget_vars: usize,
        /// Maximum number of gadgets examined per auxiliary-variable count.
        #[arg(long)]
        max_gadgets: Option<usize>,
        /// Also write the graph in DOT format to this path.
        #[arg(long)]
        emit_dot: Option<PathBuf>,
    },
    /// Check whether an operation pair is a multimorphism of a language.
    CheckMm { lang: PathBuf, mm: PathBuf },
    /// Compute a core of a language with its retraction.
    Core { lang: PathBuf },
    /// Generate a random language and instance.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        domain: usize,
        #[arg(long, default_value_t = 2)]
        arity: usize,
        #[arg(long, default_value_t = 3)]
        functions: usize,
        #[arg(long, value_enum, default_value_t = GenKind::Any)]
        kind: GenKind,
        #[arg(long, default_value_t = 6)]
        vars: usize,
        #[arg(long, default_value_t = 8)]
        terms: usize,
        /// Write `language.json` and `instance.json` into this directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Debug)]
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn usage(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: USAGE,
            error: error.into(),
        }
    }

    fn code(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code,
            error: error.into(),
        }
    }
}

struct Output {
    text: String,
    code: u8,
}

impl Output {
    fn ok(text: String) -> Self {
        Output { text, code: 0 }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(out) => {
            print!("{}", out.text);
            ExitCode::from(out.code)
        }
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(Failure::usage)
}

fn load_language(path: &Path) -> Result<Language, Failure> {
    Language::from_json(&read(path)?)
        .with_context(|| format!("invalid language file {}", path.display()))
        .map_err(Failure::usage)
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON value serializes") + "\n"
}

fn structure_value(r: &Recognized, domain: &Domain) -> Value {
    match r {
        Recognized::Chain(c) => json!({"kind": "chain", "structure": c.describe(domain)}),
        Recognized::OneDefect(o) => json!({"kind": "one_defect", "structure": o.describe(domain)}),
    }
}

fn run(cli: &Cli) -> Result<Output, Failure> {
    if cli.format == Format::Dot && !matches!(cli.command, Command::Graph { .. }) {
        return Err(Failure::usage(anyhow!(
            "--format dot is only available for `graph`"
        )));
    }
    match &cli.command {
        Command::Classify { lang, graph } => cmd_classify(cli, lang, *graph),
        Command::Solve {
            lang,
            inst,
            method,
            witness,
        } => cmd_solve(cli, lang, inst, *method, witness.as_deref()),
        Command::Graph {
            lang,
            budget_vars,
            max_gadgets,
            emit_dot,
        } => cmd_graph(cli, lang, *budget_vars, *max_gadgets, emit_dot.as_deref()),
        Command::CheckMm { lang, mm } => cmd_check_mm(cli, lang, mm),
        Command::Core { lang } => cmd_core(cli, lang),
        Command::Gen {
            seed,
            domain,
            arity,
            functions,
            kind,
            vars,
            terms,
            out_dir,
        } => cmd_gen(
            cli,
            GenArgs {
                seed: *seed,
                domain: *domain,
                arity: *arity,
                functions: *functions,
                kind: *kind,
                vars: *vars,
                terms: *terms,
            },
            out_dir.as_deref(),
        ),
    }
}

fn cmd_classify(cli: &Cli, lang: &Path, graph: bool) -> Result<Output, Failure> {
    let language = load_language(lang)?;
    let options = ClassifyOptions {
        graph: graph.then(GadgetBudget::default),
    };
    let report = classify_with(&language, &options).map_err(Failure::usage)?;
    if cli.format == Format::Json {
        return Ok(Output::ok(report.to_json() + "\n"));
    }
    let domain = &report.domain;
    let mut s = String::new();
    writeln!(s, "verdict: {}", report.verdict.as_str()).ok();
    writeln!(
        s,
        "core domain: {}",
        domain.format_tuple(&report.core_domain).join(" ")
    )
    .ok();
    writeln!(
        s,
        "retraction: {}",
        domain.format_tuple(report.retraction.map()).join(" ")
    )
    .ok();
    writeln!(s, "criterion: {}", report.criterion).ok();
    let core_domain = report.core_language.domain();
    match &report.witness {
        Some(w) => {
            let structure = match &w.kind {
                mincsp::WitnessKind::Constant => String::new(),
                mincsp::WitnessKind::Structured(r) => {
                    format!(
                        " {}",
                        structure_value(r, core_domain)["structure"]
                            .as_str()
                            .unwrap_or_default()
                    )
                }
            };
            writeln!(s, "witness: {}{structure}", w.kind_name()).ok();
        }
        None => {
            writeln!(s, "witness: none").ok();
        }
    }
    let (chains, defects) = report.failure_counts();
    writeln!(s, "verified structures: {}", report.verified.len()).ok();
    writeln!(
        s,
        "failed chains: {chains}, failed 1-defect chains: {defects}"
    )
    .ok();
    if !report.ignored_relations.is_empty() {
        writeln!(
            s,
            "ignored relations: {}",
            report.ignored_relations.join(", ")
        )
        .ok();
    }
    Ok(Output::ok(s))
}

fn cmd_solve(
    cli: &Cli,
    lang: &Path,
    inst: &Path,
    method: MethodArg,
    witness: Option<&Path>,
) -> Result<Output, Failure> {
    let language = load_language(lang)?;
    let instance = Instance::from_json(&read(inst)?, &language)
        .with_context(|| format!("invalid instance file {}", inst.display()))
        .map_err(Failure::usage)?;
    let witness = witness
        .map(|p| {
            BinaryOpPair::from_json(&read(p)?, language.domain())
                .with_context(|| format!("invalid operation pair file {}", p.display()))
                .map_err(Failure::usage)
        })
        .transpose()?;
    let options = SolveOptions {
        method: match method {
            MethodArg::Auto => Method::Auto,
            MethodArg::Brute => Method::Brute,
            MethodArg::Chain => Method::Chain,
            MethodArg::OneDefect => Method::OneDefect,
        },
        witness,
        oracle: cli.budget.map(Oracle::with_budget).unwrap_or_default(),
        ..SolveOptions::default()
    };
    let solution = solve(&instance, &language, &options).map_err(|e| {
        let code = match &e {
            SolverError::NoTractableWitness(_)
            | SolverError::Oracle(OracleError::BudgetExceeded { .. }) => BUDGET,
            SolverError::Precondition { .. }
            | SolverError::WrongStructure(_)
            | SolverError::Infeasible => NONE,
            _ => USAGE,
        };
        Failure::code(code, e)
    })?;
    let domain = language.domain();
    let Some(sol) = solution else {
        let text = match cli.format {
            Format::Json => pretty(&json!({"feasible": false, "value": null})),
            _ => "infeasible\n".to_string(),
        };
        return Ok(Output { text, code: NONE });
    };
    let route = match &sol.route {
        Route::Brute => json!({"kind": "brute"}),
        Route::Structured(r) => structure_value(r, domain),
        Route::Core { image, witness } => {
            let mut v = structure_value(witness, &domain.subdomain(image));
            v["core_domain"] = json!(domain.format_tuple(image));
            v
        }
    };
    let assignment: Vec<Value> = instance
        .variables()
        .iter()
        .zip(&sol.assignment)
        .map(|(v, &e)| json!([v, domain.label(e)]))
        .collect();
    let text = match cli.format {
        Format::Json => pretty(&json!({
            "feasible": true,
            "value": sol.value.to_string(),
            "assignment": assignment,
            "route": route,
        })),
        _ => {
            let mut s = format!("value: {}\n", sol.value);
            for (v, &e) in instance.variables().iter().zip(&sol.assignment) {
                writeln!(s, "{v} = {}", domain.label(e)).ok();
            }
            s
        }
    };
    Ok(Output::ok(text))
}

fn cmd_graph(
    cli: &Cli,
    lang: &Path,
    budget_vars: usize,
    max_gadgets: Option<usize>,
    emit_dot: Option<&Path>,
) -> Result<Output, Failure> {
    let language = load_language(lang)?;
    let mut budget = GadgetBudget::with_aux(budget_vars);
    if let Some(m) = max_gadgets {
        budget.max_gadgets = m;
    }
    let ex = explore(&language, &budget);
    let dot = to_dot(&ex);
    if let Some(path) = emit_dot {
        fs::write(path, &dot)
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(Failure::usage)?;
    }
    let text = match cli.format {
        Format::Json => pretty(&graph_json(&ex)),
        Format::Dot => dot,
        Format::Text => {
            let mut s = String::new();
            writeln!(s, "gadgets examined: {}", ex.search.gadgets_examined).ok();
            writeln!(s, "certified edges: {}", ex.search.certificates.len()).ok();
            writeln!(s, "derived edges: {}", ex.closure.derived_count()).ok();
            let domain = language.domain();
            let sigma: Vec<String> = ex
                .sigma
                .certified
                .keys()
                .map(|&(x, y)| format!("{{{},{}}}", domain.label(x), domain.label(y)))
                .collect();
            writeln!(s, "definable pairs: {}", sigma.join(" ")).ok();
            match &ex.witness {
                Some(w) => writeln!(s, "loop witness: {}", w.vertex.label(domain)).ok(),
                None => writeln!(s, "loop witness: none").ok(),
            };
            for c in ex.candidates.iter().filter(|c| c.verified()) {
                let v = match &c.kind {
                    mincsp::graph::CandidateKind::Chain(ch) => {
                        format!("chain {}", ch.describe(domain))
                    }
                    mincsp::graph::CandidateKind::OneDefect(o) => {
                        format!("one_defect {}", o.describe(domain))
                    }
                };
                writeln!(s, "verified candidate: {v}").ok();
            }
            s
        }
    };
    Ok(Output::ok(text))
}

fn cmd_check_mm(cli: &Cli, lang: &Path, mm: &Path) -> Result<Output, Failure> {
    let language = load_language(lang)?;
    let domain = language.domain();
    let pair = BinaryOpPair::from_json(&read(mm)?, domain)
        .with_context(|| format!("invalid operation pair file {}", mm.display()))
        .map_err(Failure::usage)?;
    let budget = cli
        .budget
        .unwrap_or(mincsp::morphisms::DEFAULT_CHECK_BUDGET);
    let violation = is_multimorphism(&pair, &language, budget).map_err(|e| match e {
        MorphismError::BudgetExceeded { .. } => Failure::code(BUDGET, e),
        e => Failure::usage(e),
    })?;
    let structure = recognize(&pair).map(|r| structure_value(&r, domain));
    let code = if violation.is_some() { NONE } else { 0 };
    let text = match cli.format {
        Format::Json => pretty(&json!({
            "multimorphism": violation.is_none(),
            "structure": structure,
            "violation": violation.as_ref().map(|v| v.to_json_value(domain)),
        })),
        _ => match &violation {
            None => "multimorphism\n".to_string(),
            Some(v) => format!(
                "violated by {} at x={} y={}: h(f)+h(g) = {} > h(x)+h(y) = {}\n",
                v.function,
                domain.format_tuple(&v.x).join(""),
                domain.format_tuple(&v.y).join(""),
                v.rhs,
                v.lhs
            ),
        },
    };
    Ok(Output { text, code })
}

fn cmd_core(cli: &Cli, lang: &Path) -> Result<Output, Failure> {
    let language = load_language(lang)?;
    let domain = language.domain();
    let c = core(&language);
    let core_language: Value =
        serde_json::from_str(&c.language.to_json()).expect("language JSON round-trips");
    let text = match cli.format {
        Format::Json => pretty(&json!({
            "is_core": is_core(&language),
            "core_domain": domain.format_tuple(&c.image),
            "retraction": domain.format_tuple(c.retraction.map()),
            "steps": c.steps,
            "language": core_language,
        })),
        _ => format!(
            "core domain: {}\nretraction: {}\n",
            domain.format_tuple(&c.image).join(" "),
            domain.format_tuple(c.retraction.map()).join(" ")
        ),
    };
    Ok(Output::ok(text))
}

struct GenArgs {
    seed: u64,
    domain: usize,
    arity: usize,
    functions: usize,
    kind: GenKind,
    vars: usize,
    terms: usize,
}

fn cmd_gen(cli: &Cli, args: GenArgs, out_dir: Option<&Path>) -> Result<Output, Failure> {
    if !(1..=8).contains(&args.domain) || args.arity == 0 || args.arity > 4 || args.functions == 0 {
        return Err(Failure::usage(anyhow!(
            "need 1 <= domain <= 8, 1 <= arity <= 4 and at least one function"
        )));
    }
    let mut rng = gen::rng(args.seed);
    let domain = Domain::letters(args.domain);
    let structured = match args.kind {
        GenKind::Chain => {
            let chains = enumerate_chains(&domain);
            Some(
                chains[(args.seed % chains.len() as u64) as usize]
                    .pair()
                    .clone(),
            )
        }
        GenKind::OneDefect => {
            let all = enumerate_one_defect(&domain).map_err(Failure::usage)?;
            if all.is_empty() {
                return Err(Failure::usage(anyhow!(
                    "1-defect chains need a 4-element domain"
                )));
            }
            Some(all[(args.seed % all.len() as u64) as usize].pair().clone())
        }
        _ => None,
    };
    let language = match (&structured, args.kind) {
        (Some(pair), _) => gen::random_language_with(&mut rng, pair, args.functions, args.arity),
        (None, GenKind::Noncore) => gen::random_noncore_language(&mut rng, args.domain),
        (None, _) => gen::random_language(&mut rng, args.domain, args.functions, args.arity),
    };
    let instance = gen::random_instance(&mut rng, &language, args.vars, args.terms, false);
    let language_json = language.to_json();
    let instance_json = instance.to_json();
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)
            .and_then(|_| fs::write(dir.join("language.json"), language_json.clone() + "\n"))
            .and_then(|_| fs::write(dir.join("instance.json"), instance_json.clone() + "\n"))
            .with_context(|| format!("cannot write into {}", dir.display()))
            .map_err(Failure::usage)?;
    }
    let value = json!({
        "seed": args.seed,
        "language": serde_json::from_str::<Value>(&language_json).expect("language JSON round-trips"),
        "instance": serde_json::from_str::<Value>(&instance_json).expect("instance JSON round-trips"),
        "witness": structured.as_ref().map(|p| p.to_json_value(&domain)),
    });
    let text = match cli.format {
        Format::Json => pretty(&value),
        _ => format!("{}\n{}\n", language_json, instance_json),
    };
    Ok(Output::ok(text))
}
