//! Command-line entry point wiring the pipeline end to end.
//!
//! Exit status: 0 on success, 1 on data errors (bad files, unknown ids,
//! invalid parameters), 2 on usage errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use tkk::data::{
    is_interaction_file, load_interactions, load_predictions, load_spider_examples, load_tables,
    write_training_file, FileHeader, RawExample, SchemaSet,
};
use tkk::decompose::{
    build_main_example, build_subtask_examples, recompose, ExampleKind, SubtaskExample, SUBTASKS,
};
use tkk::eval::{classify_hardness, evaluate_corpus, EmMode, EvalOptions, EvalReport, Hardness};
use tkk::exec::SqliteBackend;
use tkk::sample::{downsample, task_seed, BalanceConfig};
use tkk::split::{
    fraction_subset, ids_of, iid_resplit, ka_kc_schedule, schema_overlap, SplitManifest,
};
use tkk::sql;

#[derive(Parser)]
#[command(
    name = "tkk",
    about = "Clause-level data factory and evaluation harness for staged text-to-SQL training",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a query and print its canonical form and AST
    Parse(ParseArgs),
    /// Build the knowledge-acquisition (subtask) training file
    BuildKa(BuildKaArgs),
    /// Build the knowledge-composition (main-task) training file
    BuildKc(BuildKcArgs),
    /// Score predictions against gold examples
    Evaluate(EvaluateArgs),
    /// Construct a split manifest (iid | fraction | ka-kc)
    Split(SplitArgs),
    /// Corpus statistics: clause frequencies, subtask census, hardness
    Stats(StatsArgs),
}

#[derive(Args)]
struct ParseArgs {
    /// SQL text to parse
    #[arg(long, conflicts_with = "data")]
    sql: Option<String>,
    /// Example file; parses every gold query and reports coverage
    #[arg(long, requires = "tables")]
    data: Option<PathBuf>,
    #[arg(long)]
    tables: Option<PathBuf>,
    /// Machine-readable output
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BuildKaArgs {
    #[arg(long)]
    tables: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Minimum parsing proportion per subtask, in (0, 1]
    #[arg(long, default_value_t = 0.5)]
    ratio: f64,
    /// Sampling seed; falls back to TKK_SEED
    #[arg(long, env = "TKK_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BuildKcArgs {
    #[arg(long)]
    tables: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Drop bare empty-clause markers from main-task targets
    #[arg(long)]
    no_empty_markers: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    tables: PathBuf,
    /// Gold example file
    #[arg(long)]
    gold: PathBuf,
    /// Prediction file: plain text aligned by order, or JSON lines with id + target
    #[arg(long)]
    pred: PathBuf,
    /// Exact-match mode for the headline rates
    #[arg(long, default_value = "set_match")]
    em: EmMode,
    /// Directory of <db_id>/<db_id>.sqlite files; enables execution accuracy
    #[arg(long)]
    db_dir: Option<PathBuf>,
    /// Write the full JSON report here
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SplitArgs {
    /// iid | fraction | ka-kc
    #[arg(long)]
    kind: String,
    #[arg(long)]
    tables: PathBuf,
    /// Training examples (the pool's train side for iid)
    #[arg(long)]
    data: PathBuf,
    /// Dev examples (iid only)
    #[arg(long)]
    dev: Option<PathBuf>,
    #[arg(long, env = "TKK_SEED", default_value_t = 0)]
    seed: u64,
    /// Subset fraction (fraction kind)
    #[arg(long)]
    fraction: Option<f64>,
    /// Acquisition-stage fraction (ka-kc kind)
    #[arg(long)]
    ka_fraction: Option<f64>,
    /// Composition-stage fraction (ka-kc kind)
    #[arg(long)]
    kc_fraction: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    tables: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Second corpus; reports the share of its examples whose schema appears
    /// in --data (the IID property)
    #[arg(long)]
    dev: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Parse(args) => cmd_parse(args),
        Command::BuildKa(args) => cmd_build_ka(args),
        Command::BuildKc(args) => cmd_build_kc(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Split(args) => cmd_split(args),
        Command::Stats(args) => cmd_stats(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

// ---------------------------------------------------------------------------
// Shared corpus plumbing
// ---------------------------------------------------------------------------

struct Corpus {
    schemas: SchemaSet,
    examples: Vec<RawExample>,
}

fn load_corpus(tables: &Path, data: &Path) -> Result<Corpus> {
    let schemas = load_tables(tables).context("loading tables file")?;
    let examples = load_examples_auto(data, &schemas).context("loading example file")?;
    Ok(Corpus { schemas, examples })
}

/// Parse failures are logged with their example ids, never silently dropped.
fn report_failures(failures: &[(String, String)], total: usize) {
    for (id, detail) in failures {
        eprintln!("skipping example {id}: {detail}");
    }
    let parsed = total - failures.len();
    eprintln!(
        "parse coverage: {parsed}/{total} ({:.2}%)",
        if total == 0 {
            100.0
        } else {
            100.0 * parsed as f64 / total as f64
        }
    );
}

// ---------------------------------------------------------------------------
// parse
// ---------------------------------------------------------------------------

fn cmd_parse(args: ParseArgs) -> Result<()> {
    if let Some(text) = &args.sql {
        let query = sql::parse_query(text).map_err(|e| anyhow::anyhow!("{e}"))?;
        let canonical = sql::print_canonical(&query);
        if args.json {
            println!(
                "{}",
                serde_json::json!({
                    "canonical": canonical,
                    "hardness": classify_hardness(&query).as_str(),
                    "ast": format!("{query:#?}"),
                })
            );
        } else {
            println!("{canonical}");
            println!("hardness: {}", classify_hardness(&query).as_str());
            println!("{query:#?}");
        }
        return Ok(());
    }
    let (Some(data), Some(tables)) = (&args.data, &args.tables) else {
        bail!("either --sql or --data with --tables is required");
    };
    let corpus = load_corpus(tables, data)?;
    let mut failures = Vec::new();
    for ex in &corpus.examples {
        match sql::parse_query(&ex.gold_query) {
            Ok(query) => {
                if !args.json {
                    println!("{}\t{}", ex.example_id, sql::print_canonical(&query));
                }
            }
            Err(e) => failures.push((ex.example_id.clone(), e.to_string())),
        }
    }
    let total = corpus.examples.len();
    report_failures(&failures, total);
    if args.json {
        println!(
            "{}",
            serde_json::json!({
                "total": total,
                "parsed": total - failures.len(),
                "failed_ids": failures.iter().map(|(id, _)| id.clone()).collect::<Vec<_>>(),
            })
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// build-ka / build-kc
// ---------------------------------------------------------------------------

fn cmd_build_ka(args: BuildKaArgs) -> Result<()> {
    let corpus = load_corpus(&args.tables, &args.data)?;
    let mut per_task: BTreeMap<&'static str, Vec<SubtaskExample>> = BTreeMap::new();
    let mut failures = Vec::new();
    for ex in &corpus.examples {
        let schema = &corpus.schemas[&ex.db_id];
        match build_subtask_examples(ex, schema) {
            Ok(records) => {
                for rec in records {
                    per_task.entry(rec.task.as_str()).or_default().push(rec);
                }
            }
            Err(e) => failures.push((ex.example_id.clone(), e.to_string())),
        }
    }
    report_failures(&failures, corpus.examples.len());

    let mut out_records = Vec::new();
    for task in SUBTASKS {
        let records = per_task.remove(task.as_str()).unwrap_or_default();
        let cfg = BalanceConfig {
            ratio: args.ratio,
            seed: task_seed(args.seed, task),
        };
        let kept = downsample(&records, &cfg).map_err(|e| anyhow::anyhow!("{e}"))?;
        out_records.extend(kept);
    }

    let mut header = FileHeader::new("build-ka");
    header.tables = Some(args.tables.display().to_string());
    header.data = Some(args.data.display().to_string());
    header.ratio = Some(args.ratio);
    header.seed = Some(args.seed);
    write_training_file(&out_records, &header, &args.out)?;

    if args.json {
        println!(
            "{}",
            serde_json::json!({
                "out": args.out.display().to_string(),
                "records": out_records.len(),
                "ratio": args.ratio,
                "seed": args.seed,
            })
        );
    } else {
        println!(
            "wrote {} records to {}",
            out_records.len(),
            args.out.display()
        );
    }
    Ok(())
}

fn cmd_build_kc(args: BuildKcArgs) -> Result<()> {
    let corpus = load_corpus(&args.tables, &args.data)?;
    let include_markers = !args.no_empty_markers;
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for ex in &corpus.examples {
        let schema = &corpus.schemas[&ex.db_id];
        match build_main_example(ex, schema, include_markers) {
            Ok(rec) => records.push(rec),
            Err(e) => failures.push((ex.example_id.clone(), e.to_string())),
        }
    }
    report_failures(&failures, corpus.examples.len());

    let mut header = FileHeader::new("build-kc");
    header.tables = Some(args.tables.display().to_string());
    header.data = Some(args.data.display().to_string());
    header.include_empty_markers = Some(include_markers);
    write_training_file(&records, &header, &args.out)?;

    if args.json {
        println!(
            "{}",
            serde_json::json!({
                "out": args.out.display().to_string(),
                "records": records.len(),
                "include_empty_markers": include_markers,
            })
        );
    } else {
        println!("wrote {} records to {}", records.len(), args.out.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let corpus = load_corpus(&args.tables, &args.gold)?;
    let mut preds = load_predictions(&args.pred, &corpus.examples)?;
    for pred in &mut preds {
        let recomposed = recompose(&pred.raw_target);
        pred.recomposed_sql = Some(recomposed.sql);
    }
    let options = EvalOptions {
        em_mode: args.em,
        db_dir: args.db_dir.clone(),
    };
    let backend = SqliteBackend;
    let report = evaluate_corpus(
        &preds,
        &corpus.examples,
        &options,
        args.db_dir
            .as_ref()
            .map(|_| &backend as &dyn tkk::exec::ExecutionBackend),
    )
    .map_err(|e| anyhow::anyhow!("{e}"))?;

    if let Some(out) = &args.out {
        std::fs::write(out, serde_json::to_string_pretty(&report)?)
            .with_context(|| format!("writing report to {}", out.display()))?;
    }
    if args.json {
        println!("{}", serde_json::to_string(&report)?);
    } else {
        print_report(&report);
    }
    Ok(())
}

fn print_report(report: &EvalReport) {
    println!("examples scored: {}/{}", report.scored, report.total);
    println!(
        "exact match (headline {}): {:.4}",
        match report.em_mode {
            EmMode::Strict => "strict",
            EmMode::SetMatch => "set_match",
        },
        report.em_rate
    );
    println!("  strict:    {:.4}", report.em_strict_rate);
    println!("  set match: {:.4}", report.em_set_rate);
    if let (Some(ex_rate), Some(ex_scored)) = (report.ex_rate, report.ex_scored) {
        println!("execution accuracy: {ex_rate:.4} over {ex_scored} executed");
    }
    println!("question match:    {:.4}", report.qm_rate);
    println!(
        "interaction match: {:.4} over {} interactions",
        report.im_rate, report.interactions
    );
    println!("hardness breakdown:");
    for row in &report.hardness_table {
        println!(
            "  {:<6} {:>5} examples  em {:.4}",
            row.hardness.as_str(),
            row.count,
            row.em_rate
        );
    }
    for defect in &report.defects {
        eprintln!("defect: {defect}");
    }
}

// ---------------------------------------------------------------------------
// split
// ---------------------------------------------------------------------------

fn cmd_split(args: SplitArgs) -> Result<()> {
    let corpus = load_corpus(&args.tables, &args.data)?;
    let manifest = match args.kind.as_str() {
        "iid" => {
            let dev_path = args
                .dev
                .as_ref()
                .context("--dev is required for --kind iid")?;
            let dev = load_examples_auto(dev_path, &corpus.schemas)?;
            // ids may collide across the two files; namespace the dev side
            let dev: Vec<RawExample> = dev
                .into_iter()
                .map(|mut ex| {
                    ex.example_id = format!("dev-{}", ex.example_id);
                    if let Some(iid) = ex.interaction_id {
                        ex.interaction_id = Some(iid + 1_000_000);
                    }
                    ex
                })
                .collect();
            let (train2, dev2) = iid_resplit(&corpus.examples, &dev, args.seed)
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            let overlap = schema_overlap(&train2, &dev2);
            eprintln!("resplit schema overlap: {overlap:.4}");
            let mut m = SplitManifest::new("iid", args.seed);
            m.train_ids = Some(ids_of(&train2));
            m.dev_ids = Some(ids_of(&dev2));
            m
        }
        "fraction" => {
            let fraction = args
                .fraction
                .context("--fraction is required for --kind fraction")?;
            let subset = fraction_subset(&corpus.examples, fraction, args.seed)
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            let mut m = SplitManifest::new("fraction", args.seed);
            m.fraction = Some(fraction);
            m.ids = Some(ids_of(&subset));
            m
        }
        "ka-kc" => {
            let ka_fraction = args
                .ka_fraction
                .context("--ka-fraction is required for --kind ka-kc")?;
            let kc_fraction = args
                .kc_fraction
                .context("--kc-fraction is required for --kind ka-kc")?;
            let (ka, kc) = ka_kc_schedule(&corpus.examples, ka_fraction, kc_fraction, args.seed)
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            let mut m = SplitManifest::new("ka-kc", args.seed);
            m.ka_fraction = Some(ka_fraction);
            m.kc_fraction = Some(kc_fraction);
            m.ka_ids = Some(ids_of(&ka));
            m.kc_ids = Some(ids_of(&kc));
            m
        }
        other => bail!("unknown split kind '{other}' (iid | fraction | ka-kc)"),
    };
    let body = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&args.out, body.as_bytes())
        .with_context(|| format!("writing manifest to {}", args.out.display()))?;
    if args.json {
        println!("{}", serde_json::to_string(&manifest)?);
    } else {
        println!("wrote {} manifest to {}", manifest.kind, args.out.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// stats
// ---------------------------------------------------------------------------

fn cmd_stats(args: StatsArgs) -> Result<()> {
    let corpus = load_corpus(&args.tables, &args.data)?;
    let mut clause_counts: BTreeMap<&'static str, usize> = BTreeMap::new();
    // per subtask: (parsing, classification)
    let mut census: BTreeMap<&'static str, (usize, usize)> = BTreeMap::new();
    let mut hardness: BTreeMap<&'static str, usize> = BTreeMap::new();
    let mut failures = Vec::new();
    let mut max_input_chars = 0usize;
    let mut max_input_ws_tokens = 0usize;

    for ex in &corpus.examples {
        let schema = &corpus.schemas[&ex.db_id];
        let query = match sql::parse_query(&ex.gold_query) {
            Ok(q) => q,
            Err(e) => {
                failures.push((ex.example_id.clone(), e.to_string()));
                continue;
            }
        };
        *hardness
            .entry(classify_hardness(&query).as_str())
            .or_default() += 1;
        for (name, present) in [
            ("where", query.where_clause.is_some()),
            ("group_by", !query.group_by.is_empty()),
            ("having", query.having.is_some()),
            ("order_by", query.order_by.is_some()),
            ("limit", query.limit.is_some()),
            ("set_op", query.set_tail.is_some()),
        ] {
            if present {
                *clause_counts.entry(name).or_default() += 1;
            }
        }
        let records = build_subtask_examples(ex, schema).expect("query already parsed");
        for rec in &records {
            let slot = census.entry(rec.task.as_str()).or_default();
            match rec.kind {
                ExampleKind::Parsing => slot.0 += 1,
                ExampleKind::Classification => slot.1 += 1,
            }
            max_input_chars = max_input_chars.max(rec.input.chars().count());
            max_input_ws_tokens = max_input_ws_tokens.max(rec.input.split_whitespace().count());
        }
    }
    report_failures(&failures, corpus.examples.len());

    let dev_overlap = match &args.dev {
        Some(dev_path) => {
            let dev = load_examples_auto(dev_path, &corpus.schemas)?;
            Some(schema_overlap(&corpus.examples, &dev))
        }
        None => None,
    };

    let census_json: BTreeMap<String, serde_json::Value> = SUBTASKS
        .iter()
        .map(|t| {
            let (parsing, classification) = census.get(t.as_str()).copied().unwrap_or((0, 0));
            (
                t.as_str().to_string(),
                serde_json::json!({"parsing": parsing, "classification": classification}),
            )
        })
        .collect();
    let hardness_json: BTreeMap<String, usize> = Hardness::ALL
        .iter()
        .map(|h| {
            (
                h.as_str().to_string(),
                hardness.get(h.as_str()).copied().unwrap_or(0),
            )
        })
        .collect();

    let summary = serde_json::json!({
        "examples": corpus.examples.len(),
        "parsed": corpus.examples.len() - failures.len(),
        "clause_frequencies": clause_counts,
        "subtask_census": census_json,
        "hardness": hardness_json,
        "max_input_chars": max_input_chars,
        "max_input_whitespace_tokens": max_input_ws_tokens,
        "dev_schema_overlap": dev_overlap,
    });
    if args.json {
        println!("{summary}");
    } else {
        println!("{}", serde_json::to_string_pretty(&summary)?);
    }
    Ok(())
}
