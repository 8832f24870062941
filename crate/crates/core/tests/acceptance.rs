//! Acceptance criteria, one line each. Runs with a plain `main` so the
//! lines are always printed, not only on failure.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sga_core::encoder::{score_terms, syntax_score};
use sga_core::graph::{build_syntax_graph, shortest_relation_path, DirectedLabel};
use sga_core::numerics::{Tape, Tensor};
use sga_core::parse::{read_conllu, DependencyTree};
use sga_core::pipeline::{forward_batch, Model, ModelConfig, RelationMode, Sentence};
use sga_core::relation::LabelVocab;
use sga_core::train::{toy_train, LrSchedule, TrainOptions};
use sga_core::verify::{random_sentences, run_suite, Suite};

struct Outcome {
    pass: bool,
    summary: String,
}

fn fixture(name: &str) -> Vec<DependencyTree> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    read_conllu(&std::fs::read_to_string(path).expect("fixture readable")).expect("fixture parses")
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn four_term_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (d_model, d_head, draws) = (8, 4, 1000);
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let x_i = random_vec(&mut rng, d_model);
        let x_j = random_vec(&mut rng, d_model);
        let r_f = random_vec(&mut rng, d_model);
        let r_b = random_vec(&mut rng, d_model);
        let w_q = Tensor::new(vec![d_head, d_model], random_vec(&mut rng, d_head * d_model)).unwrap();
        let w_k = Tensor::new(vec![d_head, d_model], random_vec(&mut rng, d_head * d_model)).unwrap();
        let factored = syntax_score(&x_i, &x_j, &r_f, &r_b, &w_q, &w_k).unwrap();
        let terms = score_terms(&x_i, &x_j, &r_f, &r_b, &w_q, &w_k).unwrap();
        worst = worst.max((factored - terms.total()).abs());
    }
    Outcome {
        pass: worst <= 1e-10,
        summary: format!("max |factored - (a+b+c+d)| = {worst:.2e} <= 1e-10 over {draws} draws"),
    }
}

fn zero_relation_reduction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let sentences = random_sentences(&mut rng, 50, 8).unwrap();
    let model = Model::new(ModelConfig::toy(), LabelVocab::universal(), 2).unwrap();
    let mut differing = 0;
    for s in &sentences {
        let mut tape = Tape::new();
        let z = forward_batch(&mut tape, &model, std::slice::from_ref(s), RelationMode::ZeroRelations).unwrap();
        let b = forward_batch(&mut tape, &model, std::slice::from_ref(s), RelationMode::Baseline).unwrap();
        if tape.value(z.outputs[0].output).data() != tape.value(b.outputs[0].output).data() {
            differing += 1;
        }
    }
    Outcome {
        pass: differing == 0,
        summary: format!("{differing} of {} random sentences differ bitwise from the baseline encoder", sentences.len()),
    }
}

fn suite_outcome(suite: Suite, seed: u64) -> Outcome {
    let report = run_suite(suite, seed).unwrap();
    let parts: Vec<String> = report
        .checks
        .iter()
        .map(|c| {
            format!(
                "{} {:.2e}/{:.0e} ({} samples){}",
                c.name,
                c.measured,
                c.tolerance,
                c.samples,
                if c.pass { "" } else { " FAILED" }
            )
        })
        .collect();
    Outcome {
        pass: report.pass,
        summary: parts.join("; "),
    }
}

fn row_stochastic_fixtures() -> Outcome {
    let mut trees = fixture("morning_flight.conllu");
    trees.extend(fixture("dogs_bark.conllu"));
    trees.extend(fixture("corpus10.conllu"));
    let sentences: Vec<Sentence> = trees.into_iter().map(|t| Sentence::prepare(t).unwrap()).collect();
    let model = Model::new(ModelConfig::default(), LabelVocab::universal(), 6).unwrap();
    let mut tape = Tape::new();
    let fwd = forward_batch(&mut tape, &model, &sentences, RelationMode::Syntax).unwrap();
    let mut worst = 0.0f64;
    let mut maps = 0;
    let mut out_of_range = false;
    for out in &fwd.outputs {
        for block in &out.attention {
            for head in block {
                let w = tape.value(head.weights);
                for r in 0..w.rows() {
                    let row = w.row_slice(r);
                    worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
                    out_of_range |= row.iter().any(|v| !(0.0..=1.0).contains(v));
                }
                maps += 1;
            }
        }
    }
    Outcome {
        pass: worst <= 1e-12 && !out_of_range,
        summary: format!(
            "max |row sum - 1| = {worst:.2e} <= 1e-12 over {maps} maps ({} sentences, 6 blocks x 4 heads)",
            sentences.len()
        ),
    }
}

fn toy_overfit() -> Outcome {
    let corpus: Vec<Sentence> = fixture("corpus10.conllu")
        .into_iter()
        .map(|t| Sentence::prepare(t).unwrap())
        .collect();
    let run = || {
        let mut model = Model::new(ModelConfig::toy(), LabelVocab::universal(), 0)
            .unwrap()
            .with_readout(2, 0)
            .unwrap();
        toy_train(
            &mut model,
            &corpus,
            TrainOptions {
                epochs: 200,
                schedule: LrSchedule::Fixed(0.003),
                mode: RelationMode::Syntax,
            },
        )
        .unwrap()
    };
    let a = run();
    let b = run();
    let ratio = a[200] / a[0];
    Outcome {
        pass: ratio <= 0.1 && a == b,
        summary: format!(
            "{} sentences, 200 epochs: loss {:.4} -> {:.2e} ({:.3}% of initial, limit 10%); repeat run {}",
            corpus.len(),
            a[0],
            a[200],
            100.0 * ratio,
            if a == b { "identical" } else { "DIFFERS" }
        ),
    }
}

fn morning_flight_fixture() -> Outcome {
    let tree = fixture("morning_flight.conllu").remove(0);
    let g = build_syntax_graph(&tree).unwrap();
    let p = shortest_relation_path(&g, 1, 7).unwrap();
    let expected = [DirectedLabel::rev("nsubj"), DirectedLabel::fwd("obj"), DirectedLabel::fwd("nmod")];
    let rendered: Vec<String> = p.labels.iter().map(ToString::to_string).collect();
    Outcome {
        pass: g.node_count() == 8 && g.edges().len() == 22 && g.self_loops().count() == 8 && p.labels == expected,
        summary: format!(
            "{} words, {} directed edges of which {} self-loops; I -> Denver = [{}] ({} hops)",
            g.node_count(),
            g.edges().len(),
            g.self_loops().count(),
            rendered.join(", "),
            p.hops()
        ),
    }
}

fn main() -> ExitCode {
    type Criterion = (&'static str, u64, fn() -> Outcome);
    let criteria: [Criterion; 8] = [
        ("four-term score identity", 5, four_term_identity),
        ("zero-relation reduction", 30, zero_relation_reduction),
        ("graph-structure suite", 10, || suite_outcome(Suite::Graph, 3)),
        ("dedup equivalence", 30, || suite_outcome(Suite::Dedup, 4)),
        ("end-to-end gradient check", 120, || suite_outcome(Suite::Gradcheck, 0)),
        ("row-stochastic attention on fixtures", 120, row_stochastic_fixtures),
        ("toy overfit", 300, toy_overfit),
        ("figure sentence reproduction", 5, morning_flight_fixture),
    ];
    let mut failures = 0;
    for (k, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(*limit);
        let pass = outcome.pass && in_time;
        failures += usize::from(!pass);
        println!(
            "{} [{}] {name}: {} [{:.2} s, limit {limit} s{}]",
            if pass { "PASS" } else { "FAIL" },
            k + 1,
            outcome.summary,
            elapsed.as_secs_f64(),
            if in_time { "" } else { ", TOO SLOW" }
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
