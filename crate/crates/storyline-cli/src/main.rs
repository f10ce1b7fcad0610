use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use storyline::chains::{ChainOrder, ChainPolicy};
use storyline::corpus::{
    generate_cloze_stories, generate_synthetic, load_documents, save_documents, SyntheticConfig,
};
use storyline::discourse::{gold_flags, train_discourse, DiscourseConfig, DiscourseModel};
use storyline::event_lm::{
    classifier_accuracy, cloze_accuracy, train_ending_classifier, train_mlm, ClozeStory,
    EventLmConfig, MaskedEventLM,
};
use storyline::extract::{train_extractor, ExtractorConfig, ExtractorModel};
use storyline::formats::{
    load_jsonl, record_chains, save_jsonl, ChainRecord, GraphRecord, LabelRecord, ScoreRecord,
};
use storyline::ioutil;
use storyline::pipeline::{run as run_pipeline, PipelineConfig};
use storyline::qa::{metrics as qa_metrics, train_qa, PrefixTable, QaConfig, QaExample, QaModel};
use storyline::salience::{train_salience, KernelBank, SalienceConfig, SalienceModel};

#[derive(Parser)]
#[command(name = "storyline", about = "Salient event chain extraction and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// World parameters shared by the corpus and story generators.
#[derive(Args)]
struct WorldArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    backbone_min: Option<usize>,
    #[arg(long)]
    backbone_max: Option<usize>,
    #[arg(long)]
    distractor_rate: Option<f64>,
    #[arg(long)]
    inversion_rate: Option<f64>,
    #[arg(long)]
    context_event_rate: Option<f64>,
    #[arg(long)]
    transition_sparsity: Option<f64>,
    #[arg(long)]
    event_vocab_size: Option<usize>,
}

impl WorldArgs {
    fn config(&self, num_docs: usize, doc_offset: usize) -> SyntheticConfig {
        let base = SyntheticConfig::default();
        SyntheticConfig {
            seed: self.seed,
            num_docs,
            doc_offset,
            backbone_min: self.backbone_min.unwrap_or(base.backbone_min),
            backbone_max: self.backbone_max.unwrap_or(base.backbone_max),
            distractor_rate: self.distractor_rate.unwrap_or(base.distractor_rate),
            inversion_rate: self.inversion_rate.unwrap_or(base.inversion_rate),
            context_event_rate: self.context_event_rate.unwrap_or(base.context_event_rate),
            transition_sparsity: self.transition_sparsity.unwrap_or(base.transition_sparsity),
            event_vocab_size: self.event_vocab_size.unwrap_or(base.event_vocab_size),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic gold-annotated corpus.
    Synth {
        #[command(flatten)]
        world: WorldArgs,
        #[arg(long)]
        docs: usize,
        /// Shifts document ids and random streams, for disjoint splits.
        #[arg(long, default_value_t = 0)]
        doc_offset: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate two-choice story-ending evaluation items.
    Stories {
        #[command(flatten)]
        world: WorldArgs,
        #[arg(long)]
        count: usize,
        /// Independent story stream within the same world.
        #[arg(long, default_value_t = 1)]
        stream: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the joint event and temporal-relation extractor.
    ExtractTrain {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Decode temporal graphs for a document file.
    ExtractGraph {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract chains from a graph file.
    Chains {
        #[arg(long)]
        graphs: PathBuf,
        #[arg(long, value_parser = parse_order)]
        order: ChainOrder,
        #[arg(long, value_parser = parse_policy, default_value = "partition")]
        policy: ChainPolicy,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train or apply the event salience scorer.
    Salience {
        #[command(subcommand)]
        command: SalienceCommand,
    },
    /// Train or apply the sentence discourse-role parser.
    Discourse {
        #[command(subcommand)]
        command: DiscourseCommand,
    },
    /// Train the masked event language model.
    Lm {
        #[command(subcommand)]
        command: LmCommand,
    },
    /// Evaluate story-ending prediction.
    Cloze {
        #[command(subcommand)]
        command: ClozeCommand,
    },
    /// Train or evaluate the temporal question answerer.
    Qa {
        #[command(subcommand)]
        command: QaCommand,
    },
    /// Run the full filter/order/seed sweep.
    Pipeline {
        #[command(subcommand)]
        command: PipelineCommand,
    },
}

#[derive(Subcommand)]
enum SalienceCommand {
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum DiscourseCommand {
    Train {
        #[arg(long)]
        corpus: PathBuf,
        /// "on" feeds gold salience flags into the parser's event gate.
        #[arg(long, value_parser = parse_switch, action = clap::ArgAction::Set)]
        salience_aware: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    Label {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        /// Salience score file; events above 0.5 count as salient.
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum LmCommand {
    Train {
        #[arg(long)]
        chains: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        window: Option<usize>,
    },
}

#[derive(Subcommand)]
enum ClozeCommand {
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        stories: PathBuf,
        /// Labeled stories for the supervised ending classifier.
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum QaCommand {
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Prefix table for question categorization; omit for the default.
        #[arg(long)]
        prefixes: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum PipelineCommand {
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse_order(s: &str) -> Result<ChainOrder, String> {
    s.parse().map_err(|e: storyline::Error| e.to_string())
}

fn parse_policy(s: &str) -> Result<ChainPolicy, String> {
    match s {
        "partition" => Ok(ChainPolicy::Partition),
        "overlapping" => Ok(ChainPolicy::Overlapping),
        other => Err(format!("chain policy must be 'partition' or 'overlapping', got {other:?}")),
    }
}

fn parse_switch(s: &str) -> Result<bool, String> {
    match s {
        "on" => Ok(true),
        "off" => Ok(false),
        other => Err(format!("expected 'on' or 'off', got {other:?}")),
    }
}

#[derive(Serialize)]
struct ClozeReport {
    stories: usize,
    accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    supervised_accuracy: Option<f64>,
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Synth { world, docs, doc_offset, out } => {
            let config = world.config(docs, doc_offset);
            let generated = generate_synthetic(&config)?;
            save_documents(&out, &generated)?;
            println!("wrote {} documents to {}", generated.len(), out.display());
        }
        Command::Stories { world, count, stream, out } => {
            let config = world.config(1, 0);
            let stories = generate_cloze_stories(&config, count, stream)?;
            save_jsonl(&out, &stories)?;
            println!("wrote {} stories to {}", stories.len(), out.display());
        }
        Command::ExtractTrain { corpus, out, seed, epochs } => {
            let docs = load_documents(&corpus)?;
            let mut config = ExtractorConfig::default();
            if let Some(s) = seed {
                config.seed = s;
            }
            if let Some(e) = epochs {
                config.epochs = e;
            }
            let model = train_extractor(&docs, config)?;
            model.save(&out)?;
            println!("trained extractor on {} documents -> {}", docs.len(), out.display());
        }
        Command::ExtractGraph { model, input, out } => {
            let extractor = ExtractorModel::load(&model)?;
            let docs = load_documents(&input)?;
            let records: Vec<GraphRecord> = docs
                .iter()
                .map(|doc| {
                    let decoded = extractor.decode(doc)?;
                    Ok(GraphRecord::from_decoded(doc, &decoded))
                })
                .collect::<storyline::Result<_>>()?;
            save_jsonl(&out, &records)?;
            println!("decoded {} graphs to {}", records.len(), out.display());
        }
        Command::Chains { graphs, order, policy, out } => {
            let records: Vec<GraphRecord> = load_jsonl(&graphs)?;
            let chains: Vec<ChainRecord> = records
                .iter()
                .map(|r| record_chains(r, order, policy))
                .collect::<storyline::Result<_>>()?;
            save_jsonl(&out, &chains)?;
            println!("wrote {order} chains for {} documents to {}", chains.len(), out.display());
        }
        Command::Salience { command } => match command {
            SalienceCommand::Train { corpus, out, seed, epochs } => {
                let docs = load_documents(&corpus)?;
                let mut config = SalienceConfig::default();
                if let Some(s) = seed {
                    config.seed = s;
                }
                if let Some(e) = epochs {
                    config.epochs = e;
                }
                let model = train_salience(&docs, KernelBank::default(), config)?;
                model.save(&out)?;
                println!("trained salience scorer on {} documents -> {}", docs.len(), out.display());
            }
            SalienceCommand::Score { model, input, out } => {
                let scorer = SalienceModel::load(&model)?;
                let docs = load_documents(&input)?;
                let records: Vec<ScoreRecord> = docs
                    .iter()
                    .map(|d| ScoreRecord { doc_id: d.doc_id.clone(), scores: scorer.score_document(d) })
                    .collect();
                save_jsonl(&out, &records)?;
                println!("scored {} documents to {}", records.len(), out.display());
            }
        },
        Command::Discourse { command } => match command {
            DiscourseCommand::Train { corpus, salience_aware, out, seed, epochs } => {
                let docs = load_documents(&corpus)?;
                let flags = gold_flags(&docs)?;
                let mut config = DiscourseConfig { salience_aware, ..DiscourseConfig::default() };
                if let Some(s) = seed {
                    config.seed = s;
                }
                if let Some(e) = epochs {
                    config.epochs = e;
                }
                let (model, _) = train_discourse(&docs, &flags, config)?;
                model.save(&out)?;
                println!("trained discourse parser on {} documents -> {}", docs.len(), out.display());
            }
            DiscourseCommand::Label { model, input, scores, out } => {
                let parser = DiscourseModel::load(&model)?;
                let docs = load_documents(&input)?;
                let score_records: Vec<ScoreRecord> = load_jsonl(&scores)?;
                let aligned =
                    storyline::formats::align_by_doc(&score_records, &docs, |r| &r.doc_id, "scores")?;
                let records: Vec<LabelRecord> = docs
                    .iter()
                    .zip(aligned)
                    .map(|(doc, rec)| {
                        let flags: Vec<bool> = rec.scores.iter().map(|p| *p > 0.5).collect();
                        let classified = parser.classify_document(doc, &flags)?;
                        Ok(LabelRecord {
                            doc_id: doc.doc_id.clone(),
                            labels: classified.into_iter().map(|c| c.label).collect(),
                        })
                    })
                    .collect::<storyline::Result<_>>()?;
                save_jsonl(&out, &records)?;
                println!("labeled {} documents to {}", records.len(), out.display());
            }
        },
        Command::Lm { command } => match command {
            LmCommand::Train { chains, out, seed, epochs, window } => {
                let records: Vec<ChainRecord> = load_jsonl(&chains)?;
                let mut config = EventLmConfig::default();
                if let Some(s) = seed {
                    config.seed = s;
                }
                if let Some(e) = epochs {
                    config.epochs = e;
                }
                if let Some(w) = window {
                    config.window = w;
                }
                let mut windows = Vec::new();
                for record in &records {
                    for lemmas in record.lemma_chains() {
                        windows.extend(storyline::event_lm::make_windows(&lemmas, config.window));
                    }
                }
                if windows.is_empty() {
                    bail!(
                        "no training windows: every chain in {} is shorter than {}",
                        chains.display(),
                        config.window
                    );
                }
                let model = train_mlm(&windows, config)?;
                model.save(&out)?;
                println!("trained event LM on {} windows -> {}", windows.len(), out.display());
            }
        },
        Command::Cloze { command } => match command {
            ClozeCommand::Eval { model, stories, dev, out } => {
                let lm = MaskedEventLM::load(&model)?;
                let items: Vec<ClozeStory> = load_jsonl(&stories)?;
                let accuracy = cloze_accuracy(&lm, &items)?;
                let supervised_accuracy = match dev {
                    Some(path) => {
                        let dev_items: Vec<ClozeStory> = load_jsonl(&path)?;
                        let clf = train_ending_classifier(&lm, &dev_items, 300, 0.5)?;
                        Some(classifier_accuracy(&clf, &lm, &items)?)
                    }
                    None => None,
                };
                let report = ClozeReport { stories: items.len(), accuracy, supervised_accuracy };
                ioutil::write_json(&out, &report)?;
                println!("cloze accuracy {accuracy:.4} on {} stories -> {}", items.len(), out.display());
            }
        },
        Command::Qa { command } => match command {
            QaCommand::Train { data, out, seed, epochs } => {
                let examples: Vec<QaExample> = load_jsonl(&data)?;
                let mut config = QaConfig::default();
                if let Some(s) = seed {
                    config.seed = s;
                }
                if let Some(e) = epochs {
                    config.epochs = e;
                }
                let model = train_qa(&examples, config)?;
                model.save(&out)?;
                println!("trained QA model on {} examples -> {}", examples.len(), out.display());
            }
            QaCommand::Eval { model, data, prefixes, out } => {
                let qa_model = QaModel::load(&model)?;
                let mut examples: Vec<QaExample> = load_jsonl(&data)?;
                let table = match prefixes {
                    Some(path) => PrefixTable::load(&path)?,
                    None => PrefixTable::default(),
                };
                for ex in &mut examples {
                    ex.question.category = table.categorize(&ex.question.text());
                }
                let predictions = examples
                    .iter()
                    .map(|ex| qa_model.answer(&ex.question.tokens, &ex.content))
                    .collect::<storyline::Result<Vec<_>>>()?;
                let questions: Vec<_> = examples.into_iter().map(|ex| ex.question).collect();
                let report = qa_metrics(&predictions, &questions)?;
                ioutil::write_json(&out, &report)?;
                println!(
                    "QA macro F1 {:.4}, exact match {:.4} -> {}",
                    report.macro_f1,
                    report.exact_match,
                    out.display()
                );
            }
        },
        Command::Pipeline { command } => match command {
            PipelineCommand::Run { config } => {
                let config = PipelineConfig::load(&config)
                    .with_context(|| "pipeline configuration rejected")?;
                let report = run_pipeline(&config)?;
                println!("{}", report.to_table());
                println!("report written under {}", config.out_dir.display());
            }
        },
    }
    Ok(())
}
