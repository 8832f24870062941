use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use sga_core::config::PipelineConfig;
use sga_core::encoder::attention_csv;
use sga_core::graph::{all_word_paths, to_dot, to_json, PairIndex};
use sga_core::numerics::{ParamSet, Tape, Tensor};
use sga_core::parse::{read_conllu, DependencyTree};
use sga_core::pipeline::{forward_batch, Model, ModelConfig, RelationMode, Sentence};
use sga_core::relation::LabelVocab;
use sga_core::train::{toy_train, LrSchedule, TrainOptions};
use sga_core::verify::{run_suite, Suite};

use crate::{Cli, Command, EncodeArgs, GraphArgs, GraphFormat, ModelArgs, PathsArgs, SuiteArg, ToytrainArgs, VerifyArgs, EXIT_VERIFY_FAILED};

pub fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Graph(a) => graph(a),
        Command::Encode(a) => encode(a),
        Command::Verify(a) => verify(a),
        Command::Toytrain(a) => toytrain(a),
        Command::Paths(a) => paths(a),
    }
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var("SGA_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| anyhow!("SGA_SEED must be a non-negative integer, got `{v}`")),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(anyhow!("SGA_SEED: {e}")),
    }
}

fn read_trees(path: &Path) -> Result<Vec<DependencyTree>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading `{}`", path.display()))?;
    read_conllu(&text).with_context(|| format!("parsing `{}`", path.display()))
}

fn prepare(trees: Vec<DependencyTree>, max_chars: usize) -> Result<Vec<Sentence>> {
    trees
        .into_iter()
        .enumerate()
        .map(|(i, t)| Sentence::prepare_with_limit(t, max_chars).with_context(|| format!("sentence {}", i + 1)))
        .collect()
}

/// `001`, or `001-<sent_id>` with the id reduced to filename-safe characters.
fn stem(index: usize, tree: &DependencyTree) -> String {
    match &tree.sent_id {
        Some(id) => {
            let safe: String = id
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
                .collect();
            format!("{:03}-{safe}", index + 1)
        }
        None => format!("{:03}", index + 1),
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing `{}`", path.display()))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating `{}`", path.display()))
}

fn graph(args: GraphArgs) -> Result<ExitCode> {
    let trees = read_trees(&args.input)?;
    create_dir(&args.out_dir)?;
    for (i, tree) in trees.iter().enumerate() {
        let g = sga_core::graph::build_syntax_graph(tree).with_context(|| format!("sentence {}", i + 1))?;
        let (ext, body) = match args.format {
            GraphFormat::Dot => ("dot", to_dot(&g)),
            GraphFormat::Json => ("json", serde_json::to_string_pretty(&to_json(&g))? + "\n"),
        };
        write(&args.out_dir.join(format!("{}.{ext}", stem(i, tree))), body)?;
    }
    Ok(ExitCode::SUCCESS)
}

/// Resolves the configuration and seed: `--seed`, then the file's `seed`,
/// then `SGA_SEED`, then 0.
fn resolve(model: &ModelArgs, toy_default: bool) -> Result<(ModelConfig, u64)> {
    let mut cfg = PipelineConfig {
        toy: toy_default,
        ..PipelineConfig::default()
    };
    if let Some(path) = &model.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading `{}`", path.display()))?;
        cfg.update(&text).with_context(|| format!("in `{}`", path.display()))?;
    }
    if model.toy {
        cfg.toy = true;
    }
    cfg.apply_overrides(model.overrides.iter().map(String::as_str))?;
    let seed = match model.seed.or(cfg.seed) {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    };
    Ok((cfg.model_config()?, seed))
}

#[derive(Serialize)]
struct RelationsJson<'a> {
    nodes: usize,
    characters: String,
    /// Distinct relation paths, rendered as label strings.
    paths: Vec<Vec<String>>,
    /// Row-major `nodes x nodes` index into `paths` and `encodings`.
    pair_index: &'a [usize],
    encodings: Vec<&'a [f64]>,
}

fn encode(args: EncodeArgs) -> Result<ExitCode> {
    let (config, seed) = resolve(&args.model, false)?;
    let sentences = prepare(read_trees(&args.input)?, args.model.max_chars)?;
    let mut model = Model::new(config, LabelVocab::universal(), seed)?;
    if let Some(path) = &args.params {
        let bytes = fs::read(path).with_context(|| format!("reading `{}`", path.display()))?;
        let loaded = ParamSet::from_bytes(&bytes).with_context(|| format!("loading `{}`", path.display()))?;
        model
            .load_params(&loaded)
            .with_context(|| format!("parameters in `{}` do not fit the configured model", path.display()))?;
    }
    if let Some(path) = &args.save_params {
        write(path, model.params.to_bytes())?;
    }
    let mode = if args.baseline {
        RelationMode::Baseline
    } else if args.zero_relations {
        RelationMode::ZeroRelations
    } else {
        RelationMode::Syntax
    };

    create_dir(&args.out_dir)?;
    for (i, s) in sentences.iter().enumerate() {
        let dir = args.out_dir.join(stem(i, &s.tree));
        let attn_dir = dir.join("attention");
        create_dir(&attn_dir)?;

        let mut tape = Tape::new();
        let fwd = forward_batch(&mut tape, &model, std::slice::from_ref(s), mode).with_context(|| format!("sentence {}", i + 1))?;
        let out = &fwd.outputs[0];
        for (b, block) in out.attention.iter().enumerate() {
            for (h, trace) in block.iter().enumerate() {
                let name = format!("block{b:02}_head{h:02}");
                write(&attn_dir.join(format!("{name}.csv")), attention_csv(tape.value(trace.weights), &s.chars))?;
                if args.dump_scores {
                    write(
                        &attn_dir.join(format!("{name}_scores.csv")),
                        attention_csv(tape.value(trace.scores), &s.chars),
                    )?;
                }
            }
        }

        let mut emb = ParamSet::new();
        emb.add("embeddings", tape.value(out.output).clone())?;
        write(&dir.join("embeddings.sga"), emb.to_bytes())?;

        if let Some(rel) = fwd.relation_tensor(&tape, 0) {
            if mode == RelationMode::Syntax {
                let rel = rel?;
                write(&dir.join("relations.json"), relations_json(s, &fwd.distinct.paths, &rel.pairs, &rel.encodings)?)?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn relations_json(s: &Sentence, paths: &[Vec<sga_core::graph::DirectedLabel>], pairs: &PairIndex, encodings: &Tensor) -> Result<String> {
    let doc = RelationsJson {
        nodes: pairs.nodes,
        characters: s.chars.iter().collect(),
        paths: paths.iter().map(|p| p.iter().map(ToString::to_string).collect()).collect(),
        pair_index: &pairs.index,
        encodings: (0..encodings.rows()).map(|r| encodings.row_slice(r)).collect(),
    };
    Ok(serde_json::to_string(&doc)? + "\n")
}

fn verify(args: VerifyArgs) -> Result<ExitCode> {
    let suite = match args.suite {
        SuiteArg::Algebra => Suite::Algebra,
        SuiteArg::Graph => Suite::Graph,
        SuiteArg::Gradcheck => Suite::Gradcheck,
        SuiteArg::Dedup => Suite::Dedup,
        SuiteArg::All => Suite::All,
    };
    let seed = match args.seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    };
    let report = run_suite(suite, seed)?;
    let json = serde_json::to_string_pretty(&report)? + "\n";
    match &args.out {
        Some(path) => write(path, &json)?,
        None => print!("{json}"),
    }
    for c in report.checks.iter().filter(|c| !c.pass) {
        eprintln!("FAILED {}: measured {:e} > tolerance {:e}", c.name, c.measured, c.tolerance);
    }
    Ok(if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VERIFY_FAILED)
    })
}

fn toytrain(args: ToytrainArgs) -> Result<ExitCode> {
    let (config, seed) = resolve(&args.model, true)?;
    if args.target_dim == 0 {
        bail!("--target-dim must be positive");
    }
    if !(args.lr > 0.0 && args.lr.is_finite()) {
        bail!("--lr must be a positive number");
    }
    let corpus = prepare(read_trees(&args.corpus)?, args.model.max_chars)?;
    let mut model = Model::new(config, LabelVocab::universal(), seed)?.with_readout(args.target_dim, seed)?;
    let schedule = match args.warmup {
        Some(warmup_steps) => LrSchedule::Warmup {
            d_model: config.d_model,
            warmup_steps,
            factor: args.warmup_factor,
        },
        None => LrSchedule::Fixed(args.lr),
    };
    let curve = toy_train(
        &mut model,
        &corpus,
        TrainOptions {
            epochs: args.epochs,
            schedule,
            mode: RelationMode::Syntax,
        },
    )?;
    let mut csv = String::from("epoch,loss\n");
    for (e, l) in curve.iter().enumerate() {
        let _ = writeln!(csv, "{e},{l}");
    }
    write(&args.out, csv)?;
    if let Some(path) = &args.save_params {
        write(path, model.params.to_bytes())?;
    }
    let last = curve.last().copied().unwrap_or(f64::NAN);
    eprintln!(
        "{} sentences, {} epochs: loss {} -> {} ({:.2}% of initial)",
        corpus.len(),
        args.epochs,
        curve[0],
        last,
        100.0 * last / curve[0]
    );
    Ok(ExitCode::SUCCESS)
}

fn paths(args: PathsArgs) -> Result<ExitCode> {
    let trees = read_trees(&args.input)?;
    let mut tsv = String::from("sentence\tfrom\tto\tfrom_form\tto_form\thops\tpath\n");
    for (i, tree) in trees.iter().enumerate() {
        let g = sga_core::graph::build_syntax_graph(tree).with_context(|| format!("sentence {}", i + 1))?;
        let id = tree.sent_id.clone().unwrap_or_else(|| (i + 1).to_string());
        for p in all_word_paths(&g) {
            let labels: Vec<String> = p.labels.iter().map(ToString::to_string).collect();
            let _ = writeln!(
                tsv,
                "{id}\t{}\t{}\t{}\t{}\t{}\t{}",
                p.from,
                p.to,
                g.form(p.from),
                g.form(p.to),
                p.hops(),
                labels.join(" ")
            );
        }
    }
    match &args.out {
        Some(path) => write(path, tsv)?,
        None => print!("{tsv}"),
    }
    Ok(ExitCode::SUCCESS)
}
