//! The `dialogue-lab` binary: subcommands over the library modules with a
//! shared key=value configuration file and a run manifest per output
//! directory.
//!
//! Exit codes: 0 success, 1 data violations, 2 usage error, 3 backend or
//! I/O failure. Option precedence is flags > config file > defaults; the
//! resolved configuration is recorded in the manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::coding::{self, scheme_default};
use crate::corpus::{self, Corpus, Group, LengthUnit};
use crate::ena::{self, Accumulation, EnaModel, StanzaConfig, Window};
use crate::report::{self, NetworkStyle};
use crate::sim::{self, AgentSet, ChatBackend, Limits};
use crate::stats::significance_stars;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "dialogue-lab", version, about = "Simulate tutoring dialogues and compare dialogue corpora")]
struct Cli {
    /// key=value configuration file; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a corpus file; prints violations one per line
    Validate { file: PathBuf },
    /// Cohen's kappa between two code-list files (one code per line)
    Kappa { codes_a: PathBuf, codes_b: PathBuf },
    /// Per-subtype paired comparison table as CSV
    Stats {
        corpus: PathBuf,
        /// grouping key; only "subtype" is supported
        #[arg(long, default_value = "subtype")]
        by: String,
        /// pairing key; only "problem_id" is supported
        #[arg(long = "paired-on", default_value = "problem_id")]
        paired_on: String,
        /// write CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit an epistemic network model and write its outputs
    Ena {
        corpus: PathBuf,
        /// stanza window: a number or "whole"
        #[arg(long)]
        window: Option<String>,
        /// "binary" or "weighted"
        #[arg(long)]
        accumulation: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the tripartite simulation over a scenario file
    Simulate {
        scenarios: PathBuf,
        /// backend: a chat-completions base URL, or "script:<file>"
        #[arg(long)]
        backend: Option<String>,
        #[arg(long = "max-turns")]
        max_turns: Option<usize>,
        #[arg(long = "max-chars")]
        max_chars: Option<usize>,
        /// directory holding teacher.txt, student.txt, dean.txt
        #[arg(long)]
        templates: Option<PathBuf>,
        #[arg(long)]
        concurrency: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render tables and figures from an ena output directory
    Report {
        ena_dir: PathBuf,
        /// corpus override; defaults to the path recorded in the model manifest
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// simulate → code-merge → stats → ena → report
    Pipeline {
        #[arg(long)]
        scenarios: PathBuf,
        #[arg(long)]
        backend: Option<String>,
        /// coded human corpus to pair against
        #[arg(long)]
        human: PathBuf,
        /// code-assignment sidecar for the simulated dialogues
        #[arg(long)]
        codes: PathBuf,
        #[arg(long)]
        window: Option<String>,
        #[arg(long)]
        accumulation: Option<String>,
        #[arg(long = "max-turns")]
        max_turns: Option<usize>,
        #[arg(long = "max-chars")]
        max_chars: Option<usize>,
        #[arg(long)]
        templates: Option<PathBuf>,
        #[arg(long)]
        concurrency: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

enum CliError {
    /// data violations → exit 1
    Data(String),
    /// usage errors → exit 2
    Usage(String),
    /// backend / I/O failures → exit 3
    Io(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Data(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
        }
    }
    fn message(&self) -> &str {
        match self {
            CliError::Data(m) | CliError::Usage(m) | CliError::Io(m) => m,
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(path, contents)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Resolved option values after applying precedence.
#[derive(Debug, Clone)]
struct Config {
    window: Window,
    accumulation: Accumulation,
    max_turns: usize,
    max_chars: usize,
    concurrency: usize,
    backend: Option<String>,
    model: String,
    token_env: String,
    length_unit: LengthUnit,
    /// (key, value, source) for the manifest
    provenance: Vec<(String, String, &'static str)>,
}

impl Config {
    fn defaults() -> Config {
        Config {
            window: Window::Size(4),
            accumulation: Accumulation::Binary,
            max_turns: 30,
            max_chars: 100_000,
            concurrency: 4,
            backend: None,
            model: "gpt-4o".to_string(),
            token_env: "DIALOGUE_LAB_TOKEN".to_string(),
            length_unit: LengthUnit::Characters,
            provenance: Vec::new(),
        }
    }
}

fn parse_window(value: &str) -> Result<Window, CliError> {
    match value {
        "whole" | "whole_conversation" => Ok(Window::WholeConversation),
        other => {
            let w: usize = other
                .parse()
                .map_err(|_| CliError::Usage(format!("invalid window {other:?}")))?;
            if w < 2 {
                return Err(CliError::Usage("window must be at least 2".to_string()));
            }
            Ok(Window::Size(w))
        }
    }
}

fn parse_accumulation(value: &str) -> Result<Accumulation, CliError> {
    match value {
        "binary" => Ok(Accumulation::Binary),
        "weighted" => Ok(Accumulation::Weighted),
        other => Err(CliError::Usage(format!("invalid accumulation {other:?}"))),
    }
}

fn load_config(path: Option<&Path>) -> Result<Config, CliError> {
    let mut config = Config::defaults();
    let Some(path) = path else {
        return Ok(config);
    };
    let text = read_text(path)?;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Usage(format!(
                "{}:{}: expected key=value",
                path.display(),
                idx + 1
            )));
        };
        let (key, value) = (key.trim(), value.trim());
        match key {
            "window" => config.window = parse_window(value)?,
            "accumulation" => config.accumulation = parse_accumulation(value)?,
            "max_turns" => {
                config.max_turns = value
                    .parse()
                    .map_err(|_| CliError::Usage(format!("invalid max_turns {value:?}")))?
            }
            "max_chars" => {
                config.max_chars = value
                    .parse()
                    .map_err(|_| CliError::Usage(format!("invalid max_chars {value:?}")))?
            }
            "concurrency" => {
                config.concurrency = value
                    .parse()
                    .map_err(|_| CliError::Usage(format!("invalid concurrency {value:?}")))?
            }
            "backend" => config.backend = Some(value.to_string()),
            "model" => config.model = value.to_string(),
            "token_env" => config.token_env = value.to_string(),
            "length_unit" => {
                config.length_unit = match value {
                    "characters" => LengthUnit::Characters,
                    "whitespace_tokens" => LengthUnit::WhitespaceTokens,
                    other => {
                        return Err(CliError::Usage(format!("invalid length_unit {other:?}")))
                    }
                }
            }
            other => return Err(CliError::Usage(format!("unknown config key {other:?}"))),
        }
        config
            .provenance
            .push((key.to_string(), value.to_string(), "file"));
    }
    Ok(config)
}

fn apply_flag<T>(slot: &mut T, flag: Option<T>, key: &str, config: &mut Vec<(String, String, &'static str)>)
where
    T: std::fmt::Debug,
{
    if let Some(value) = flag {
        config.push((key.to_string(), format!("{value:?}"), "flag"));
        *slot = value;
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    format!("{:x}", hasher.finalize())
}

/// Write the run manifest: version, resolved configuration, input digests,
/// exclusion report, and timing. Timing is the only non-reproducible field.
fn write_manifest(
    out_dir: &Path,
    config: &Config,
    inputs: &[(&str, &Path, &[u8])],
    exclusions: &[String],
    started: Instant,
) -> Result<(), CliError> {
    let mut manifest = String::new();
    writeln!(manifest, "tool=dialogue-lab {VERSION}").unwrap();
    writeln!(manifest, "window={}", match config.window {
        Window::Size(w) => w.to_string(),
        Window::WholeConversation => "whole_conversation".to_string(),
    })
    .unwrap();
    writeln!(manifest, "accumulation={}", match config.accumulation {
        Accumulation::Binary => "binary",
        Accumulation::Weighted => "weighted",
    })
    .unwrap();
    writeln!(manifest, "max_turns={}", config.max_turns).unwrap();
    writeln!(manifest, "max_chars={}", config.max_chars).unwrap();
    writeln!(manifest, "concurrency={}", config.concurrency).unwrap();
    if let Some(backend) = &config.backend {
        writeln!(manifest, "backend={backend}").unwrap();
    }
    for (key, value, source) in &config.provenance {
        writeln!(manifest, "override.{source}.{key}={value}").unwrap();
    }
    for (name, path, bytes) in inputs {
        writeln!(manifest, "input.{name}={} sha256={}", path.display(), sha256_hex(bytes)).unwrap();
    }
    for exclusion in exclusions {
        writeln!(manifest, "excluded={exclusion}").unwrap();
    }
    writeln!(manifest, "timing_ms={}", started.elapsed().as_millis()).unwrap();
    write_file(&out_dir.join("run_manifest.txt"), manifest.as_bytes())
}

/// Entry point used by the binary and by integration tests.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("dialogue-lab: {}", err.message());
            err.code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Validate { file } => cmd_validate(&file),
        Command::Kappa { codes_a, codes_b } => cmd_kappa(&codes_a, &codes_b),
        Command::Stats { corpus, by, paired_on, out } => cmd_stats(&corpus, &by, &paired_on, out.as_deref()),
        Command::Ena { corpus, window, accumulation, out } => {
            cmd_ena(config, &corpus, window, accumulation, &out)
        }
        Command::Simulate { scenarios, backend, max_turns, max_chars, templates, concurrency, out } => {
            cmd_simulate(config, &scenarios, backend, max_turns, max_chars, templates, concurrency, &out)
        }
        Command::Report { ena_dir, corpus, out } => cmd_report(config, &ena_dir, corpus, &out),
        Command::Pipeline {
            scenarios, backend, human, codes, window, accumulation,
            max_turns, max_chars, templates, concurrency, out,
        } => cmd_pipeline(
            config, &scenarios, backend, &human, &codes, window, accumulation,
            max_turns, max_chars, templates, concurrency, &out,
        ),
    }
}

fn load_corpus(path: &Path) -> Result<Corpus, CliError> {
    let bytes = read_file(path)?;
    corpus::parse_corpus(&bytes).map_err(|e| CliError::Data(e.to_string()))
}

fn cmd_validate(file: &Path) -> Result<(), CliError> {
    let corpus = load_corpus(file)?;
    let violations = corpus::validate(&corpus, &scheme_default());
    if violations.is_empty() {
        return Ok(());
    }
    for v in &violations {
        println!("{v}");
    }
    Err(CliError::Data(format!("{} violation(s)", violations.len())))
}

fn cmd_kappa(codes_a: &Path, codes_b: &Path) -> Result<(), CliError> {
    let scheme = scheme_default();
    let load = |path: &Path| -> Result<Vec<String>, CliError> {
        Ok(read_text(path)?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect())
    };
    let a = load(codes_a)?;
    let b = load(codes_b)?;
    let report = coding::cohen_kappa(&a, &b, &scheme).map_err(|e| CliError::Data(e.to_string()))?;
    println!("kappa,{:.6}", report.kappa);
    println!("observed,{:.6}", report.observed_agreement);
    println!("expected,{:.6}", report.expected_agreement);
    println!("n_items,{}", report.n_items);
    let ids: Vec<&str> = scheme.ids().collect();
    println!("confusion,{}", ids.join(","));
    for (i, row) in report.confusion.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(u64::to_string).collect();
        println!("{},{}", ids[i], cells.join(","));
    }
    Ok(())
}

fn cmd_stats(corpus_path: &Path, by: &str, paired_on: &str, out: Option<&Path>) -> Result<(), CliError> {
    if by != "subtype" {
        return Err(CliError::Usage(format!("--by {by:?} is not supported (only \"subtype\")")));
    }
    if paired_on != "problem_id" {
        return Err(CliError::Usage(format!(
            "--paired-on {paired_on:?} is not supported (only \"problem_id\")"
        )));
    }
    let corpus = load_corpus(corpus_path)?;
    let rows =
        report::subtype_table(&corpus, &scheme_default()).map_err(|e| CliError::Data(e.to_string()))?;
    let csv = report::emit_table2_csv(&rows);
    match out {
        Some(path) => write_file(path, csv.as_bytes()),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn edge_csv(model: &EnaModel, weights: &[f64]) -> String {
    let k = model.code_ids.len();
    let mut out = String::from("code_a,code_b,weight\n");
    for (e, (i, j)) in ena::pair_list(k).into_iter().enumerate() {
        writeln!(out, "{},{},{:.6}", model.code_ids[i], model.code_ids[j], weights[e]).unwrap();
    }
    out
}

fn group_style(positive: &str, label_pos: &str, negative: &str, label_neg: &str) -> NetworkStyle {
    let mut style = NetworkStyle::default();
    style.legend = vec![
        (label_pos.to_string(), positive.to_string()),
        (label_neg.to_string(), negative.to_string()),
    ];
    style
}

/// Write every analytical output of a fitted model into `out`.
fn write_ena_outputs(model: &EnaModel, corpus_path: &Path, out: &Path) -> Result<(), CliError> {
    let mut points = String::from("dialogue_id,group,x,y\n");
    for p in &model.unit_points {
        writeln!(points, "{},{},{:.6},{:.6}", p.dialogue_id, p.group, p.x, p.y).unwrap();
    }
    write_file(&out.join("points.csv"), points.as_bytes())?;

    let mut nodes = String::from("code,x,y\n");
    for (i, id) in model.code_ids.iter().enumerate() {
        writeln!(nodes, "{},{:.6},{:.6}", id, model.node_positions[i][0], model.node_positions[i][1])
            .unwrap();
    }
    write_file(&out.join("nodes.csv"), nodes.as_bytes())?;

    let human_mean = &model.group_means[&Group::Human];
    let ai_mean = &model.group_means[&Group::Ai];
    let diff = ena::difference_network(human_mean, ai_mean);
    write_file(&out.join("edges_human.csv"), edge_csv(model, human_mean).as_bytes())?;
    write_file(&out.join("edges_ai.csv"), edge_csv(model, ai_mean).as_bytes())?;
    write_file(&out.join("edges_diff.csv"), edge_csv(model, &diff).as_bytes())?;

    let render = |weights: &[f64], style: &NetworkStyle| -> Result<String, CliError> {
        let (nodes, edges) = report::network_from_weights(model, weights);
        report::render_network_svg(&nodes, &edges, style).map_err(|e| CliError::Data(e.to_string()))
    };
    let human_style = {
        let mut s = NetworkStyle::default();
        s.legend = vec![("human".to_string(), s.positive_color.clone())];
        s
    };
    let ai_style = {
        let mut s = NetworkStyle::default();
        s.positive_color = s.negative_color.clone();
        s.legend = vec![("ai".to_string(), s.positive_color.clone())];
        s
    };
    let diff_style = group_style("#c0392b", "human > ai", "#2980b9", "ai > human");
    write_file(&out.join("human_network.svg"), render(human_mean, &human_style)?.as_bytes())?;
    write_file(&out.join("ai_network.svg"), render(ai_mean, &ai_style)?.as_bytes())?;
    write_file(&out.join("difference_network.svg"), render(&diff, &diff_style)?.as_bytes())?;

    // model manifest: configuration, fit, centroid tests, exclusions
    let mut manifest = String::new();
    // a corpus living in the output directory is recorded by name so the
    // directory stays relocatable (and reproducible across runs)
    let recorded = if corpus_path.parent() == Some(out) {
        PathBuf::from(corpus_path.file_name().unwrap_or_default())
    } else {
        corpus_path.to_path_buf()
    };
    writeln!(manifest, "corpus={}", recorded.display()).unwrap();
    writeln!(manifest, "config: {}", model.config).unwrap();
    writeln!(manifest, "normalization=spherical rotation=means").unwrap();
    writeln!(manifest, "units={}", model.unit_points.len()).unwrap();
    writeln!(manifest, "fit_x={:.6}", model.fit[0]).unwrap();
    writeln!(manifest, "fit_y={:.6}", model.fit[1]).unwrap();
    writeln!(manifest, "rank_deficient={}", model.rank_deficient).unwrap();
    if let Ok([test_x, test_y]) = model.centroid_tests() {
        writeln!(
            manifest,
            "centroid_x: t({:.2})={:.3}, p={:.4}{}, d={:.3}",
            test_x.df,
            test_x.t,
            test_x.p_two_sided,
            significance_stars(test_x.p_two_sided),
            test_x.d.unwrap_or(f64::NAN)
        )
        .unwrap();
        writeln!(
            manifest,
            "centroid_y: t({:.2})={:.3}, p={:.4}{}, d={:.3}",
            test_y.df,
            test_y.t,
            test_y.p_two_sided,
            significance_stars(test_y.p_two_sided),
            test_y.d.unwrap_or(f64::NAN)
        )
        .unwrap();
    }
    for e in &model.exclusions {
        writeln!(manifest, "excluded={} reason={}", e.dialogue_id, e.reason).unwrap();
    }
    write_file(&out.join("model_manifest.txt"), manifest.as_bytes())
}

fn cmd_ena(
    mut config: Config,
    corpus_path: &Path,
    window: Option<String>,
    accumulation: Option<String>,
    out: &Path,
) -> Result<(), CliError> {
    let started = Instant::now();
    if let Some(w) = window {
        config.provenance.push(("window".to_string(), w.clone(), "flag"));
        config.window = parse_window(&w)?;
    }
    if let Some(a) = accumulation {
        config.provenance.push(("accumulation".to_string(), a.clone(), "flag"));
        config.accumulation = parse_accumulation(&a)?;
    }
    let bytes = read_file(corpus_path)?;
    let corpus = corpus::parse_corpus(&bytes).map_err(|e| CliError::Data(e.to_string()))?;
    let cfg = StanzaConfig {
        window: config.window,
        accumulation: config.accumulation,
    };
    let model = EnaModel::fit(&corpus, &scheme_default(), &cfg).map_err(|e| CliError::Data(e.to_string()))?;
    write_ena_outputs(&model, corpus_path, out)?;
    let exclusions: Vec<String> = model
        .exclusions
        .iter()
        .map(|e| format!("{} ({})", e.dialogue_id, e.reason))
        .collect();
    write_manifest(out, &config, &[("corpus", corpus_path, &bytes)], &exclusions, started)
}

fn load_templates(dir: Option<&Path>) -> Result<AgentSet, CliError> {
    let Some(dir) = dir else {
        return Ok(AgentSet::default_templates());
    };
    let mut agents = AgentSet::default_templates();
    agents.teacher.prompt_template = read_text(&dir.join("teacher.txt"))?;
    agents.student.prompt_template = read_text(&dir.join("student.txt"))?;
    agents.dean.prompt_template = read_text(&dir.join("dean.txt"))?;
    Ok(agents)
}

fn make_backend(spec: &str, config: &Config) -> Result<Box<dyn ChatBackend>, CliError> {
    if let Some(path) = spec.strip_prefix("script:") {
        let text = read_text(Path::new(path))?;
        let backend =
            sim::KeyedScriptedBackend::parse(&text).map_err(|e| CliError::Data(e.to_string()))?;
        Ok(Box::new(backend))
    } else {
        Ok(Box::new(sim::HttpBackend::new(spec, &config.model, &config.token_env)))
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    mut config: Config,
    scenarios_path: &Path,
    backend_spec: Option<String>,
    max_turns: Option<usize>,
    max_chars: Option<usize>,
    templates: Option<PathBuf>,
    concurrency: Option<usize>,
    out: &Path,
) -> Result<(), CliError> {
    let started = Instant::now();
    apply_flag(&mut config.max_turns, max_turns, "max_turns", &mut config.provenance);
    apply_flag(&mut config.max_chars, max_chars, "max_chars", &mut config.provenance);
    apply_flag(&mut config.concurrency, concurrency, "concurrency", &mut config.provenance);
    if let Some(spec) = backend_spec {
        config.provenance.push(("backend".to_string(), spec.clone(), "flag"));
        config.backend = Some(spec);
    }
    let backend_spec = config
        .backend
        .clone()
        .ok_or_else(|| CliError::Usage("no backend given (use --backend or the config file)".to_string()))?;
    let backend = make_backend(&backend_spec, &config)?;
    let agents = load_templates(templates.as_deref())?;

    let scenario_bytes = read_file(scenarios_path)?;
    let scenarios = sim::parse_scenarios(
        std::str::from_utf8(&scenario_bytes)
            .map_err(|e| CliError::Data(format!("scenario file is not UTF-8: {e}")))?,
    )
    .map_err(|e| CliError::Data(e.to_string()))?;
    let limits = Limits {
        max_turns: config.max_turns,
        max_chars: config.max_chars,
    };
    let result = sim::batch_simulate(&scenarios, &agents, backend.as_ref(), &limits, config.concurrency);
    for failure in &result.failures {
        eprintln!("simulation failed for problem {}: {}", failure.problem_id, failure.error);
    }
    write_file(out, corpus::serialize_corpus(&result.corpus).as_bytes())?;
    if let Some(dir) = out.parent() {
        let failures: Vec<String> = result
            .failures
            .iter()
            .map(|f| format!("{}: {}", f.problem_id, f.error))
            .collect();
        write_manifest(dir, &config, &[("scenarios", scenarios_path, &scenario_bytes)], &failures, started)?;
    }
    if !result.failures.is_empty() {
        return Err(CliError::Io(format!("{} simulation(s) failed", result.failures.len())));
    }
    Ok(())
}

fn cmd_report(
    config: Config,
    ena_dir: &Path,
    corpus_override: Option<PathBuf>,
    out: &Path,
) -> Result<(), CliError> {
    let started = Instant::now();
    let manifest = read_text(&ena_dir.join("model_manifest.txt"))?;
    let corpus_path = match corpus_override {
        Some(path) => path,
        None => manifest
            .lines()
            .find_map(|l| l.strip_prefix("corpus="))
            .map(|p| {
                let p = PathBuf::from(p);
                if p.is_relative() { ena_dir.join(p) } else { p }
            })
            .ok_or_else(|| {
                CliError::Data("model manifest names no corpus; pass --corpus".to_string())
            })?,
    };
    let bytes = read_file(&corpus_path)?;
    let corpus = corpus::parse_corpus(&bytes).map_err(|e| CliError::Data(e.to_string()))?;
    let scheme = scheme_default();

    // re-render networks from the recorded node positions and edge weights
    let nodes_csv = read_text(&ena_dir.join("nodes.csv"))?;
    let mut positions = Vec::new();
    let mut code_ids = Vec::new();
    for line in nodes_csv.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(CliError::Data(format!("bad nodes.csv line: {line:?}")));
        }
        code_ids.push(fields[0].to_string());
        let x: f64 = fields[1].parse().map_err(|_| CliError::Data("bad node x".to_string()))?;
        let y: f64 = fields[2].parse().map_err(|_| CliError::Data("bad node y".to_string()))?;
        positions.push([x, y]);
    }
    let read_edges = |name: &str| -> Result<Vec<f64>, CliError> {
        let text = read_text(&ena_dir.join(name))?;
        let mut weights = Vec::new();
        for line in text.lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            let w: f64 = fields
                .last()
                .unwrap()
                .parse()
                .map_err(|_| CliError::Data(format!("bad weight in {name}")))?;
            weights.push(w);
        }
        Ok(weights)
    };

    let k = code_ids.len();
    let render = |weights: &[f64], style: &NetworkStyle| -> Result<String, CliError> {
        let pairs = ena::pair_list(k);
        let mut incident = vec![0.0; k];
        let mut edges = Vec::new();
        for (e, &(i, j)) in pairs.iter().enumerate() {
            if weights[e] != 0.0 {
                incident[i] += weights[e].abs();
                incident[j] += weights[e].abs();
                edges.push(report::NetworkEdge { a: i, b: j, weight: weights[e] });
            }
        }
        let nodes: Vec<report::NetworkNode> = code_ids
            .iter()
            .enumerate()
            .map(|(i, id)| report::NetworkNode {
                label: id.clone(),
                x: positions[i][0],
                y: positions[i][1],
                magnitude: incident[i],
            })
            .collect();
        report::render_network_svg(&nodes, &edges, style).map_err(|e| CliError::Data(e.to_string()))
    };

    let human = read_edges("edges_human.csv")?;
    let ai = read_edges("edges_ai.csv")?;
    let diff = read_edges("edges_diff.csv")?;
    let human_style = {
        let mut s = NetworkStyle::default();
        s.legend = vec![("human".to_string(), s.positive_color.clone())];
        s
    };
    let ai_style = {
        let mut s = NetworkStyle::default();
        s.positive_color = s.negative_color.clone();
        s.legend = vec![("ai".to_string(), s.positive_color.clone())];
        s
    };
    let diff_style = group_style("#c0392b", "human > ai", "#2980b9", "ai > human");
    write_file(&out.join("human_network.svg"), render(&human, &human_style)?.as_bytes())?;
    write_file(&out.join("ai_network.svg"), render(&ai, &ai_style)?.as_bytes())?;
    write_file(&out.join("difference_network.svg"), render(&diff, &diff_style)?.as_bytes())?;

    let rows = report::subtype_table(&corpus, &scheme).map_err(|e| CliError::Data(e.to_string()))?;
    write_file(&out.join("table2.csv"), report::emit_table2_csv(&rows).as_bytes())?;
    let lengths = report::emit_lengths_csv(&corpus, config.length_unit)
        .map_err(|e| CliError::Data(e.to_string()))?;
    write_file(&out.join("lengths.csv"), lengths.as_bytes())?;
    write_manifest(out, &config, &[("corpus", &corpus_path, &bytes)], &[], started)
}

#[allow(clippy::too_many_arguments)]
fn cmd_pipeline(
    mut config: Config,
    scenarios_path: &Path,
    backend_spec: Option<String>,
    human_path: &Path,
    codes_path: &Path,
    window: Option<String>,
    accumulation: Option<String>,
    max_turns: Option<usize>,
    max_chars: Option<usize>,
    templates: Option<PathBuf>,
    concurrency: Option<usize>,
    out: &Path,
) -> Result<(), CliError> {
    let started = Instant::now();
    if let Some(w) = window {
        config.provenance.push(("window".to_string(), w.clone(), "flag"));
        config.window = parse_window(&w)?;
    }
    if let Some(a) = accumulation {
        config.provenance.push(("accumulation".to_string(), a.clone(), "flag"));
        config.accumulation = parse_accumulation(&a)?;
    }
    apply_flag(&mut config.max_turns, max_turns, "max_turns", &mut config.provenance);
    apply_flag(&mut config.max_chars, max_chars, "max_chars", &mut config.provenance);
    apply_flag(&mut config.concurrency, concurrency, "concurrency", &mut config.provenance);
    if let Some(spec) = backend_spec {
        config.provenance.push(("backend".to_string(), spec.clone(), "flag"));
        config.backend = Some(spec);
    }
    let backend_spec = config
        .backend
        .clone()
        .ok_or_else(|| CliError::Usage("no backend given (use --backend or the config file)".to_string()))?;
    let backend = make_backend(&backend_spec, &config)?;
    let agents = load_templates(templates.as_deref())?;
    let scheme = scheme_default();

    // simulate
    let scenario_bytes = read_file(scenarios_path)?;
    let scenarios = sim::parse_scenarios(
        std::str::from_utf8(&scenario_bytes)
            .map_err(|e| CliError::Data(format!("scenario file is not UTF-8: {e}")))?,
    )
    .map_err(|e| CliError::Data(e.to_string()))?;
    let limits = Limits {
        max_turns: config.max_turns,
        max_chars: config.max_chars,
    };
    let result = sim::batch_simulate(&scenarios, &agents, backend.as_ref(), &limits, config.concurrency);
    if !result.failures.is_empty() {
        for failure in &result.failures {
            eprintln!("simulation failed for problem {}: {}", failure.problem_id, failure.error);
        }
        return Err(CliError::Io(format!("{} simulation(s) failed", result.failures.len())));
    }

    // code-merge: apply the sidecar to the simulated dialogues, then join
    // with the human corpus
    let codes_bytes = read_file(codes_path)?;
    let assignments = coding::parse_assignments(
        std::str::from_utf8(&codes_bytes)
            .map_err(|e| CliError::Data(format!("sidecar is not UTF-8: {e}")))?,
    )
    .map_err(|e| CliError::Data(e.to_string()))?;
    let coded_ai = coding::apply_assignments(&result.corpus, &assignments, &scheme)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let human_bytes = read_file(human_path)?;
    let mut merged =
        corpus::parse_corpus(&human_bytes).map_err(|e| CliError::Data(e.to_string()))?;
    merged.merge(coded_ai);
    let violations = corpus::validate(&merged, &scheme);
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("{v}");
        }
        return Err(CliError::Data(format!("{} violation(s) in merged corpus", violations.len())));
    }
    let merged_path = out.join("corpus.jsonl");
    write_file(&merged_path, corpus::serialize_corpus(&merged).as_bytes())?;

    // stats
    let rows = report::subtype_table(&merged, &scheme).map_err(|e| CliError::Data(e.to_string()))?;
    write_file(&out.join("table2.csv"), report::emit_table2_csv(&rows).as_bytes())?;
    let lengths = report::emit_lengths_csv(&merged, config.length_unit)
        .map_err(|e| CliError::Data(e.to_string()))?;
    write_file(&out.join("lengths.csv"), lengths.as_bytes())?;

    // ena + report renderings
    let cfg = StanzaConfig {
        window: config.window,
        accumulation: config.accumulation,
    };
    let model =
        EnaModel::fit(&merged, &scheme, &cfg).map_err(|e| CliError::Data(e.to_string()))?;
    write_ena_outputs(&model, &merged_path, out)?;

    let exclusions: Vec<String> = model
        .exclusions
        .iter()
        .map(|e| format!("{} ({})", e.dialogue_id, e.reason))
        .collect();
    write_manifest(
        out,
        &config,
        &[
            ("scenarios", scenarios_path, &scenario_bytes),
            ("human", human_path, &human_bytes),
            ("codes", codes_path, &codes_bytes),
        ],
        &exclusions,
        started,
    )
}
