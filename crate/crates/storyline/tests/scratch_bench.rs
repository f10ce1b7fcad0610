use std::time::Instant;

use storyline::chains::{ChainOrder, ChainPolicy};
use storyline::corpus::{
    generate_cloze_stories, generate_synthetic, save_documents, SyntheticConfig,
};
use storyline::discourse::DiscourseConfig;
use storyline::event_lm::EventLmConfig;
use storyline::extract::ExtractorConfig;
use storyline::formats::save_jsonl;
use storyline::pipeline::{run, FilterMode, GraphSource, PipelineConfig};

const ALL_MODES: [FilterMode; 5] = FilterMode::ALL_MODES;
use storyline::qa::QaConfig;
use storyline::salience::SalienceConfig;

#[test]
fn parser_bench() {
    use storyline::discourse::{discourse_f1, gold_flags, train_discourse};

    let started = Instant::now();
    let gen = SyntheticConfig { num_docs: 400, ..SyntheticConfig::default() };
    let train = generate_synthetic(&gen).unwrap();
    let held = generate_synthetic(&SyntheticConfig {
        doc_offset: 9000,
        num_docs: 100,
        ..gen.clone()
    })
    .unwrap();
    let train_flags = gold_flags(&train).unwrap();
    let held_flags = gold_flags(&held).unwrap();

    for epochs in [6usize] {
        let mut base_sum = 0.0;
        let mut aware_sum = 0.0;
        let mut worst = f64::INFINITY;
        for seed in 0..10u64 {
            let mut f1s = [0.0f64; 2];
            for (slot, aware) in [(0usize, false), (1usize, true)] {
                let config = DiscourseConfig {
                    seed: 100 + seed,
                    epochs,
                    salience_aware: aware,
                    early_stop_accuracy: Some(0.999),
                    ..DiscourseConfig::default()
                };
                let (model, _) = train_discourse(&train, &train_flags, config).unwrap();
                let mut pred = Vec::new();
                let mut gold = Vec::new();
                for (doc, flags) in held.iter().zip(&held_flags) {
                    for c in model.classify_document(doc, flags).unwrap() {
                        pred.push(c.label);
                    }
                    gold.extend(
                        doc.gold().and_then(|g| g.discourse.clone()).unwrap(),
                    );
                }
                f1s[slot] = discourse_f1(&pred, &gold).macro_f1;
            }
            println!(
                "epochs {epochs} seed {seed}: base {:.4} aware {:.4} ({:+.4})",
                f1s[0],
                f1s[1],
                f1s[1] - f1s[0]
            );
            base_sum += f1s[0];
            aware_sum += f1s[1];
            worst = worst.min(f1s[1] - f1s[0]);
        }
        println!(
            "epochs {epochs}: base mean {:.4} aware mean {:.4} gap {:+.4} worst seed {:+.4} elapsed {:.1}s",
            base_sum / 10.0,
            aware_sum / 10.0,
            (aware_sum - base_sum) / 10.0,
            worst,
            started.elapsed().as_secs_f64()
        );
    }
}

#[test]
fn trend_bench() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    let started = Instant::now();

    let gen = SyntheticConfig { num_docs: 2000, ..SyntheticConfig::default() };
    let train = generate_synthetic(&gen).unwrap();
    let eval = generate_synthetic(&SyntheticConfig {
        doc_offset: 5000,
        num_docs: 300,
        ..gen.clone()
    })
    .unwrap();
    save_documents(&dir.join("train.jsonl"), &train).unwrap();
    save_documents(&dir.join("eval.jsonl"), &eval).unwrap();
    let stories = generate_cloze_stories(&gen, 400, 1).unwrap();
    let dev = generate_cloze_stories(&gen, 300, 2).unwrap();
    save_jsonl(&dir.join("stories.jsonl"), &stories).unwrap();
    save_jsonl(&dir.join("dev.jsonl"), &dev).unwrap();
    println!("corpus generated in {:.1}s", started.elapsed().as_secs_f64());

    let config = PipelineConfig {
        seed: 17,
        train_docs: dir.join("train.jsonl"),
        eval_docs: dir.join("eval.jsonl"),
        stories: dir.join("stories.jsonl"),
        dev_stories: Some(dir.join("dev.jsonl")),
        modes: ALL_MODES.to_vec(),
        orders: vec![ChainOrder::Textual],
        seeds: vec![1, 2, 3],
        graph_source: GraphSource::Gold,
        chain_policy: ChainPolicy::Partition,
        filter_shortcuts: true,
        out_dir: dir.join("out"),
        salience: SalienceConfig { epochs: 3, ..SalienceConfig::default() },
        discourse: DiscourseConfig { epochs: 3, ..DiscourseConfig::default() },
        extractor: ExtractorConfig::default(),
        lm: EventLmConfig { epochs: 3, ..EventLmConfig::default() },
        qa: QaConfig { epochs: 2, ..QaConfig::default() },
        classifier_epochs: 300,
        classifier_learning_rate: 0.5,
    };

    let run_started = Instant::now();
    let report = run(&config).unwrap();
    let elapsed = run_started.elapsed().as_secs_f64();
    println!("pipeline run in {elapsed:.1}s\n{}", report.to_table());

    let cell = |mode| report.cell(mode, ChainOrder::Textual).unwrap();
    let all = cell(FilterMode::All);
    let aware = cell(FilterMode::SalienceAwareDiscourse);
    println!(
        "criterion 6 gap: {:+.4} (aware {:.4} vs all {:.4})",
        aware.mean_cloze_accuracy - all.mean_cloze_accuracy,
        aware.mean_cloze_accuracy,
        all.mean_cloze_accuracy
    );
    println!(
        "criterion 7 qa:  {:+.4} (aware {:.4} vs all {:.4})",
        aware.mean_qa_macro_f1 - all.mean_qa_macro_f1,
        aware.mean_qa_macro_f1,
        all.mean_qa_macro_f1
    );
    for mode in ALL_MODES {
        let c = cell(mode);
        let sup = c.mean_supervised_accuracy.unwrap();
        println!(
            "criterion 9 {mode}: sup {:.4} vs cloze {:.4} ({})",
            sup,
            c.mean_cloze_accuracy,
            if sup >= c.mean_cloze_accuracy { "ok" } else { "VIOLATED" }
        );
    }
    println!("total {:.1}s", started.elapsed().as_secs_f64());
}
