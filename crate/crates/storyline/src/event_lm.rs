//! Masked language model over event-lemma windows, the max-probability
//! cloze decision rule, and a supervised ending classifier on top of it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chains::EventChain;
use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::nn::{
    checkpoint, Adam, AdamConfig, BiLstm, Init, ParamId, ParamSet, Tape, Var, INIT_SCALE,
};
use crate::rng::SeededRng;
use crate::vocab::Vocab;

pub const MASK: &str = "<mask>";
pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";

const MASK_ID: usize = 0;
const UNK_ID: usize = 2;

const INIT_SALT: u64 = 0x4c_4d_01;
const TRAIN_SALT: u64 = 0x4c_4d_02;

/// Probability floor when converting scores to log-odds; scores can be
/// exactly 0 only for event-free endings.
const LOGIT_CLAMP: f64 = 1e-12;

/// Event-lemma vocabulary with mask/pad/unknown sentinels at ids 0..2.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EventVocab {
    vocab: Vocab,
}

impl EventVocab {
    /// Interns every lemma of every window, in order.
    pub fn from_windows(windows: &[Vec<String>]) -> Self {
        let mut vocab = Vocab::with_specials(&[MASK, PAD, UNK]);
        for w in windows {
            for lemma in w {
                vocab.intern(lemma);
            }
        }
        EventVocab { vocab }
    }

    pub fn id(&self, lemma: &str) -> usize {
        self.vocab.get_or(lemma, UNK_ID)
    }

    pub fn item(&self, id: usize) -> &str {
        self.vocab.item(id)
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    /// Never true: the sentinels are always present.
    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }
}

/// Which ending a cloze decision picks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClozeChoice {
    A,
    B,
}

/// Two-ending cloze instance: a fixed-length event context plus two
/// candidate endings, each a (possibly empty) set of event lemmas.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClozeStory {
    pub context_events: Vec<String>,
    pub ending_a_events: Vec<String>,
    pub ending_b_events: Vec<String>,
    pub gold: ClozeChoice,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EventLmConfig {
    pub seed: u64,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    /// Window length; contexts for next-event queries have length window - 1.
    pub window: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
}

impl Default for EventLmConfig {
    fn default() -> Self {
        EventLmConfig {
            seed: 31,
            embed_dim: 16,
            hidden_dim: 16,
            window: 5,
            epochs: 30,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EventLmMeta {
    config: EventLmConfig,
    vocab: EventVocab,
}

/// Bidirectional recurrent masked LM over event ids: embedding, encoder,
/// and a shared output projection to vocabulary logits at each position.
#[derive(Debug, Clone)]
pub struct MaskedEventLM {
    config: EventLmConfig,
    vocab: EventVocab,
    params: ParamSet,
    emb: ParamId,
    encoder: BiLstm,
    out_w: ParamId,
    out_b: ParamId,
}

impl MaskedEventLM {
    pub fn new(config: EventLmConfig, vocab: EventVocab) -> Self {
        let mut rng = SeededRng::derive(config.seed, INIT_SALT);
        let mut params = ParamSet::new();
        let emb = params.register(
            "lm.emb",
            vocab.len(),
            config.embed_dim,
            Init::Uniform(INIT_SCALE),
            &mut rng,
        );
        let encoder =
            BiLstm::new("lm.enc", config.embed_dim, config.hidden_dim, &mut params, &mut rng, INIT_SCALE);
        let out_w = params.register(
            "lm.out_w",
            vocab.len(),
            encoder.output_dim(),
            Init::Uniform(INIT_SCALE),
            &mut rng,
        );
        let out_b = params.register("lm.out_b", vocab.len(), 1, Init::Zeros, &mut rng);
        MaskedEventLM { config, vocab, params, emb, encoder, out_w, out_b }
    }

    pub fn config(&self) -> &EventLmConfig {
        &self.config
    }

    pub fn vocab(&self) -> &EventVocab {
        &self.vocab
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn states(&self, tape: &mut Tape, params: &ParamSet, ids: &[usize]) -> Vec<Var> {
        let emb = tape.param(params, self.emb);
        let xs: Vec<Var> =
            ids.iter().map(|id| tape.row(emb, *id, self.config.embed_dim)).collect();
        self.encoder.encode(tape, params, &xs)
    }

    /// Vocabulary distribution at one position of an id sequence.
    fn position_distribution_with(
        &self,
        tape: &mut Tape,
        params: &ParamSet,
        ids: &[usize],
        position: usize,
    ) -> Var {
        let states = self.states(tape, params, ids);
        let w = tape.param(params, self.out_w);
        let b = tape.param(params, self.out_b);
        let logits =
            tape.affine(w, states[position], b, self.vocab.len(), self.encoder.output_dim());
        tape.softmax(logits)
    }

    /// Cross-entropy of the true id at a masked position.
    pub fn masked_loss_with(
        &self,
        tape: &mut Tape,
        params: &ParamSet,
        window: &[usize],
        position: usize,
    ) -> Result<Var> {
        if position >= window.len() {
            return Err(Error::PositionOutOfRange { position, len: window.len() });
        }
        let mut ids = window.to_vec();
        let target = ids[position];
        ids[position] = MASK_ID;
        let dist = self.position_distribution_with(tape, params, &ids, position);
        Ok(tape.cross_entropy(dist, target))
    }

    /// Distributions over the vocabulary with each position masked in turn.
    pub fn all_position_distributions(&self, window: &[String]) -> Vec<Vec<f64>> {
        let ids: Vec<usize> = window.iter().map(|l| self.vocab.id(l)).collect();
        (0..ids.len())
            .map(|pos| {
                let mut masked = ids.clone();
                masked[pos] = MASK_ID;
                let mut tape = Tape::new();
                let dist =
                    self.position_distribution_with(&mut tape, &self.params, &masked, pos);
                tape.value(dist).to_vec()
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let meta = EventLmMeta { config: self.config.clone(), vocab: self.vocab.clone() };
        checkpoint::save(path, &meta, &self.params)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (meta, tensors) = checkpoint::load::<EventLmMeta>(path)?;
        let mut model = MaskedEventLM::new(meta.config, meta.vocab);
        checkpoint::restore(&mut model.params, &tensors)?;
        Ok(model)
    }
}

/// Lemma sequence for a chain's events.
pub fn chain_lemmas(doc: &Document, chain: &EventChain) -> Vec<String> {
    chain.events.iter().map(|i| doc.mention_lemma(&doc.events[*i])).collect()
}

/// Sliding windows of length `l`, stride 1. Sequences shorter than `l`
/// yield none; no padding.
pub fn make_windows(lemmas: &[String], l: usize) -> Vec<Vec<String>> {
    assert!(l >= 2, "window length must be at least 2");
    if lemmas.len() < l {
        return Vec::new();
    }
    lemmas.windows(l).map(<[String]>::to_vec).collect()
}

/// Train the masked LM: one uniformly chosen position per window per step,
/// cross-entropy at that position, per-window optimizer steps, seeded epoch
/// shuffles. Deterministic per seed.
pub fn train_mlm(windows: &[Vec<String>], config: EventLmConfig) -> Result<MaskedEventLM> {
    if windows.is_empty() {
        return Err(Error::EmptyInput("masked LM training windows".into()));
    }
    if let Some(w) = windows.iter().find(|w| w.len() != config.window) {
        return Err(Error::DimensionMismatch {
            context: "masked LM training window".into(),
            expected: config.window,
            got: w.len(),
        });
    }
    let vocab = EventVocab::from_windows(windows);
    let mut model = MaskedEventLM::new(config, vocab);
    let id_windows: Vec<Vec<usize>> =
        windows.iter().map(|w| w.iter().map(|l| model.vocab.id(l)).collect()).collect();
    let mut adam = Adam::new(model.config.adam, &model.params);
    let mut rng = SeededRng::derive(model.config.seed, TRAIN_SALT);
    for _epoch in 0..model.config.epochs {
        let mut order: Vec<usize> = (0..id_windows.len()).collect();
        rng.shuffle(&mut order);
        for wi in order {
            let position = rng.below(model.config.window);
            let mut tape = Tape::new();
            let loss =
                model.masked_loss_with(&mut tape, &model.params, &id_windows[wi], position)?;
            if !tape.scalar(loss).is_finite() {
                return Err(Error::NonFiniteLoss("masked LM training".into()));
            }
            tape.backward(loss);
            tape.apply_grads(&mut model.params);
            adam.step(&mut model.params)?;
        }
    }
    Ok(model)
}

/// Mean masked cross-entropy over every position of every window.
pub fn mean_masked_loss(model: &MaskedEventLM, windows: &[Vec<String>]) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for w in windows {
        let ids: Vec<usize> = w.iter().map(|l| model.vocab.id(l)).collect();
        for pos in 0..ids.len() {
            let mut tape = Tape::new();
            let loss = model
                .masked_loss_with(&mut tape, &model.params, &ids, pos)
                .expect("position within window");
            total += tape.scalar(loss);
            count += 1;
        }
    }
    total / count as f64
}

/// Fraction of (window, position) pairs whose masked argmax recovers the
/// true id. Ties break toward the smaller id; deterministic.
pub fn masked_accuracy(model: &MaskedEventLM, windows: &[Vec<String>]) -> f64 {
    let mut hits = 0usize;
    let mut count = 0usize;
    for w in windows {
        let ids: Vec<usize> = w.iter().map(|l| model.vocab.id(l)).collect();
        let dists = model.all_position_distributions(w);
        for (pos, dist) in dists.iter().enumerate() {
            let argmax = dist
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite probabilities"))
                .map(|(i, _)| i)
                .expect("non-empty vocabulary");
            hits += usize::from(argmax == ids[pos]);
            count += 1;
        }
    }
    hits as f64 / count as f64
}

/// Distribution over the vocabulary for the event following a context of
/// `window - 1` lemmas: the model scores `[context..., MASK]` and the mask
/// position is read off. Unknown lemmas map to the unknown id.
pub fn next_event_distribution(model: &MaskedEventLM, context: &[String]) -> Result<Vec<f64>> {
    let want = model.config.window - 1;
    if context.len() != want {
        return Err(Error::DimensionMismatch {
            context: "next-event context".into(),
            expected: want,
            got: context.len(),
        });
    }
    let mut ids: Vec<usize> = context.iter().map(|l| model.vocab.id(l)).collect();
    ids.push(MASK_ID);
    let mut tape = Tape::new();
    let dist = model.position_distribution_with(&mut tape, &model.params, &ids, want);
    Ok(tape.value(dist).to_vec())
}

/// An ending's score: max next-event probability over its events; an
/// event-free ending scores 0.
fn ending_score(dist: &[f64], vocab: &EventVocab, ending: &[String]) -> f64 {
    ending.iter().map(|l| dist[vocab.id(l)]).fold(0.0, f64::max)
}

/// Pick the ending whose best event is most probable next; ties go to A.
pub fn cloze_choose(
    model: &MaskedEventLM,
    story: &ClozeStory,
) -> Result<(ClozeChoice, f64, f64)> {
    let dist = next_event_distribution(model, &story.context_events)?;
    let score_a = ending_score(&dist, &model.vocab, &story.ending_a_events);
    let score_b = ending_score(&dist, &model.vocab, &story.ending_b_events);
    let choice = if score_b > score_a { ClozeChoice::B } else { ClozeChoice::A };
    Ok((choice, score_a, score_b))
}

/// Fraction of stories whose cloze choice matches gold.
pub fn cloze_accuracy(model: &MaskedEventLM, stories: &[ClozeStory]) -> Result<f64> {
    if stories.is_empty() {
        return Err(Error::EmptyInput("cloze evaluation stories".into()));
    }
    let mut hits = 0usize;
    for story in stories {
        let (choice, _, _) = cloze_choose(model, story)?;
        hits += usize::from(choice == story.gold);
    }
    Ok(hits as f64 / stories.len() as f64)
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(LOGIT_CLAMP, 1.0 - LOGIT_CLAMP);
    (p / (1.0 - p)).ln()
}

/// Per-ending feature triple: max and mean next-event probability over the
/// ending's events, plus the log-odds gap between this ending's max and the
/// alternative's.
fn ending_features(
    dist: &[f64],
    vocab: &EventVocab,
    ending: &[String],
    other: &[String],
) -> [f64; 3] {
    let probs: Vec<f64> = ending.iter().map(|l| dist[vocab.id(l)]).collect();
    let max = probs.iter().copied().fold(0.0, f64::max);
    let mean = if probs.is_empty() { 0.0 } else { probs.iter().sum::<f64>() / probs.len() as f64 };
    let other_max = other.iter().map(|l| dist[vocab.id(l)]).fold(0.0, f64::max);
    [max, mean, logit(max) - logit(other_max)]
}

/// Logistic scorer over the three ending features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndingClassifier {
    pub weights: [f64; 3],
    pub bias: f64,
}

impl EndingClassifier {
    /// Probability that an ending with these features is the correct one.
    pub fn probability(&self, features: &[f64; 3]) -> f64 {
        let z = self.bias
            + self.weights.iter().zip(features).map(|(w, f)| w * f).sum::<f64>();
        crate::nn::sigmoid(z)
    }

    /// Score both endings; the higher classifier probability wins, ties to A.
    pub fn classify(&self, model: &MaskedEventLM, story: &ClozeStory) -> Result<ClozeChoice> {
        let dist = next_event_distribution(model, &story.context_events)?;
        let fa = ending_features(
            &dist,
            &model.vocab,
            &story.ending_a_events,
            &story.ending_b_events,
        );
        let fb = ending_features(
            &dist,
            &model.vocab,
            &story.ending_b_events,
            &story.ending_a_events,
        );
        let pa = self.probability(&fa);
        let pb = self.probability(&fb);
        Ok(if pb > pa { ClozeChoice::B } else { ClozeChoice::A })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::ioutil::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        crate::ioutil::read_json(path)
    }
}

/// Full-batch logistic regression over dev stories: the gold ending's
/// features are the positive row, the other ending's the negative row.
/// Zero init plus a convex objective makes this deterministic with no seed.
pub fn train_ending_classifier(
    model: &MaskedEventLM,
    dev: &[ClozeStory],
    epochs: usize,
    learning_rate: f64,
) -> Result<EndingClassifier> {
    if dev.is_empty() {
        return Err(Error::EmptyInput("ending classifier dev stories".into()));
    }
    let mut rows: Vec<([f64; 3], f64)> = Vec::with_capacity(2 * dev.len());
    for story in dev {
        let dist = next_event_distribution(model, &story.context_events)?;
        let fa = ending_features(
            &dist,
            &model.vocab,
            &story.ending_a_events,
            &story.ending_b_events,
        );
        let fb = ending_features(
            &dist,
            &model.vocab,
            &story.ending_b_events,
            &story.ending_a_events,
        );
        let (pos, neg) = match story.gold {
            ClozeChoice::A => (fa, fb),
            ClozeChoice::B => (fb, fa),
        };
        rows.push((pos, 1.0));
        rows.push((neg, 0.0));
    }
    let mut clf = EndingClassifier { weights: [0.0; 3], bias: 0.0 };
    let scale = 1.0 / rows.len() as f64;
    for _ in 0..epochs {
        let mut gw = [0.0; 3];
        let mut gb = 0.0;
        for (f, y) in &rows {
            let err = clf.probability(f) - y;
            for (g, x) in gw.iter_mut().zip(f) {
                *g += err * x * scale;
            }
            gb += err * scale;
        }
        for (w, g) in clf.weights.iter_mut().zip(&gw) {
            *w -= learning_rate * g;
        }
        clf.bias -= learning_rate * gb;
    }
    Ok(clf)
}

/// Fraction of stories the classifier gets right.
pub fn classifier_accuracy(
    clf: &EndingClassifier,
    model: &MaskedEventLM,
    stories: &[ClozeStory],
) -> Result<f64> {
    if stories.is_empty() {
        return Err(Error::EmptyInput("classifier evaluation stories".into()));
    }
    let mut hits = 0usize;
    for story in stories {
        hits += usize::from(clf.classify(model, story)? == story.gold);
    }
    Ok(hits as f64 / stories.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{grad_check, GRAD_CHECK_EPS, GRAD_CHECK_TOL};

    fn lemmas(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| (*s).to_string()).collect()
    }

    /// Rotations of a five-event cycle; every masked position is inferable.
    fn cycle_windows(copies: usize) -> Vec<Vec<String>> {
        let cycle = ["wake", "cook", "eat", "wash", "sleep"];
        let mut windows = Vec::new();
        for _ in 0..copies {
            for start in 0..cycle.len() {
                let w: Vec<String> =
                    (0..5).map(|i| cycle[(start + i) % cycle.len()].to_string()).collect();
                windows.push(w);
            }
        }
        windows
    }

    #[test]
    fn window_counts_match_length_arithmetic() {
        let seven = lemmas(&["a", "b", "c", "d", "e", "f", "g"]);
        let windows = make_windows(&seven, 5);
        assert_eq!(windows.len(), 3);
        assert_eq!(windows[0], lemmas(&["a", "b", "c", "d", "e"]));
        assert_eq!(windows[2], lemmas(&["c", "d", "e", "f", "g"]));

        assert!(make_windows(&lemmas(&["a", "b", "c", "d"]), 5).is_empty());

        let five = lemmas(&["a", "b", "c", "d", "e"]);
        assert_eq!(make_windows(&five, 5), vec![five.clone()]);
    }

    #[test]
    fn vocab_places_specials_before_lemmas() {
        let vocab = EventVocab::from_windows(&[lemmas(&["run", "jump", "run"])]);
        assert_eq!(vocab.id(MASK), MASK_ID);
        assert_eq!(vocab.id(UNK), UNK_ID);
        assert_eq!(vocab.id("run"), 3);
        assert_eq!(vocab.id("jump"), 4);
        assert_eq!(vocab.id("swim"), UNK_ID);
        assert_eq!(vocab.len(), 5);
    }

    #[test]
    fn zeroed_projection_gives_exactly_uniform_distribution() {
        let windows = cycle_windows(1);
        let mut model = MaskedEventLM::new(EventLmConfig::default(), EventVocab::from_windows(&windows));
        let (out_w, out_b) = (model.out_w, model.out_b);
        model.params_mut().get_mut(out_w).value.data.fill(0.0);
        model.params_mut().get_mut(out_b).value.data.fill(0.0);
        let dist =
            next_event_distribution(&model, &lemmas(&["wake", "cook", "eat", "wash"])).unwrap();
        assert_eq!(dist.len(), model.vocab().len());
        assert!(dist.iter().all(|p| *p == dist[0]), "all entries equal");
        assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distribution_sums_to_one_and_length_is_checked() {
        let model = train_mlm(&cycle_windows(1), EventLmConfig { epochs: 1, ..Default::default() })
            .unwrap();
        let dist =
            next_event_distribution(&model, &lemmas(&["wake", "cook", "eat", "wash"])).unwrap();
        assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(dist.iter().all(|p| *p > 0.0));

        let err = next_event_distribution(&model, &lemmas(&["wake", "cook", "eat"]));
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn initial_loss_is_near_log_vocab_size() {
        let windows = cycle_windows(2);
        let model =
            train_mlm(&windows, EventLmConfig { epochs: 0, ..Default::default() }).unwrap();
        let expected = (model.vocab().len() as f64).ln();
        let loss = mean_masked_loss(&model, &windows);
        assert!(
            (loss - expected).abs() < 0.1,
            "initial loss {loss} should sit near ln|V| = {expected}"
        );
    }

    #[test]
    fn zero_epochs_is_initialization_and_seeds_are_reproducible() {
        let windows = cycle_windows(1);
        let trained =
            train_mlm(&windows, EventLmConfig { epochs: 0, ..Default::default() }).unwrap();
        let fresh = MaskedEventLM::new(
            EventLmConfig::default(),
            EventVocab::from_windows(&windows),
        );
        for (a, b) in trained.params().iter().zip(fresh.params().iter()) {
            assert_eq!(a.value.data, b.value.data, "{} untouched by zero epochs", a.name);
        }

        let once = train_mlm(&windows, EventLmConfig { epochs: 2, ..Default::default() }).unwrap();
        let twice = train_mlm(&windows, EventLmConfig { epochs: 2, ..Default::default() }).unwrap();
        for (a, b) in once.params().iter().zip(twice.params().iter()) {
            assert_eq!(a.value.data, b.value.data, "{} reproducible per seed", a.name);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let windows = cycle_windows(1);
        let config = EventLmConfig { embed_dim: 5, hidden_dim: 4, ..Default::default() };
        let model = MaskedEventLM::new(config, EventVocab::from_windows(&windows));
        let ids: Vec<usize> = windows[0].iter().map(|l| model.vocab().id(l)).collect();
        let mut params = model.params.clone();
        let mut rng = SeededRng::new(5);
        let report = grad_check(&mut params, GRAD_CHECK_EPS, Some(4), &mut rng, |tape, ps| {
            model.masked_loss_with(tape, ps, &ids, 2).unwrap()
        })
        .unwrap();
        assert!(report.max_rel_err < GRAD_CHECK_TOL, "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn markov_cycle_overfits_to_perfect_masked_accuracy() {
        let windows = cycle_windows(3);
        let model =
            train_mlm(&windows, EventLmConfig { epochs: 60, ..Default::default() }).unwrap();
        let acc = masked_accuracy(&model, &windows);
        assert!(acc == 1.0, "masked accuracy {acc} on a deterministic cycle");

        let dist =
            next_event_distribution(&model, &lemmas(&["wake", "cook", "eat", "wash"])).unwrap();
        let argmax = dist
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        assert_eq!(model.vocab().item(argmax), "sleep");
    }

    #[test]
    fn cloze_prefers_true_successor_and_ties_go_to_a() {
        let model =
            train_mlm(&cycle_windows(3), EventLmConfig { epochs: 60, ..Default::default() })
                .unwrap();
        let context = lemmas(&["wake", "cook", "eat", "wash"]);

        let story = ClozeStory {
            context_events: context.clone(),
            ending_a_events: lemmas(&["sleep"]),
            ending_b_events: lemmas(&["cook"]),
            gold: ClozeChoice::A,
        };
        let (choice, sa, sb) = cloze_choose(&model, &story).unwrap();
        assert_eq!(choice, ClozeChoice::A);
        assert!(sa > sb);

        let swapped = ClozeStory {
            context_events: context.clone(),
            ending_a_events: story.ending_b_events.clone(),
            ending_b_events: story.ending_a_events.clone(),
            gold: ClozeChoice::B,
        };
        let (choice, sa, sb) = cloze_choose(&model, &swapped).unwrap();
        assert_eq!(choice, ClozeChoice::B);
        assert!(sb > sa);

        let empty = ClozeStory {
            context_events: context.clone(),
            ending_a_events: Vec::new(),
            ending_b_events: Vec::new(),
            gold: ClozeChoice::A,
        };
        let (choice, sa, sb) = cloze_choose(&model, &empty).unwrap();
        assert_eq!((choice, sa, sb), (ClozeChoice::A, 0.0, 0.0));

        let identical = ClozeStory {
            context_events: context,
            ending_a_events: lemmas(&["sleep", "cook"]),
            ending_b_events: lemmas(&["sleep", "cook"]),
            gold: ClozeChoice::A,
        };
        let (choice, sa, sb) = cloze_choose(&model, &identical).unwrap();
        assert_eq!(choice, ClozeChoice::A);
        assert_eq!(sa, sb);
    }

    #[test]
    fn unknown_ending_events_keep_a_positive_score() {
        let model =
            train_mlm(&cycle_windows(1), EventLmConfig { epochs: 1, ..Default::default() })
                .unwrap();
        let story = ClozeStory {
            context_events: lemmas(&["wake", "cook", "eat", "wash"]),
            ending_a_events: lemmas(&["never-seen-lemma"]),
            ending_b_events: Vec::new(),
            gold: ClozeChoice::A,
        };
        let (choice, sa, _) = cloze_choose(&model, &story).unwrap();
        assert!(sa > 0.0, "unknown lemma falls back to the unknown id");
        assert_eq!(choice, ClozeChoice::A);
    }

    #[test]
    fn ending_classifier_separates_and_ties_go_to_a() {
        let model =
            train_mlm(&cycle_windows(3), EventLmConfig { epochs: 60, ..Default::default() })
                .unwrap();
        let cycle = ["wake", "cook", "eat", "wash", "sleep"];
        let mut dev = Vec::new();
        for start in 0..cycle.len() {
            let context: Vec<String> =
                (0..4).map(|i| cycle[(start + i) % cycle.len()].to_string()).collect();
            let succ = cycle[(start + 4) % cycle.len()].to_string();
            let wrong = cycle[(start + 2) % cycle.len()].to_string();
            let gold = if start % 2 == 0 { ClozeChoice::A } else { ClozeChoice::B };
            let (a, b) = match gold {
                ClozeChoice::A => (vec![succ], vec![wrong]),
                ClozeChoice::B => (vec![wrong], vec![succ]),
            };
            dev.push(ClozeStory {
                context_events: context,
                ending_a_events: a,
                ending_b_events: b,
                gold,
            });
        }
        let clf = train_ending_classifier(&model, &dev, 400, 0.5).unwrap();
        assert_eq!(classifier_accuracy(&clf, &model, &dev).unwrap(), 1.0);

        let tie = ClozeStory {
            context_events: dev[0].context_events.clone(),
            ending_a_events: lemmas(&["sleep"]),
            ending_b_events: lemmas(&["sleep"]),
            gold: ClozeChoice::A,
        };
        assert_eq!(clf.classify(&model, &tie).unwrap(), ClozeChoice::A);

        assert!(matches!(
            train_ending_classifier(&model, &[], 10, 0.5),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn checkpoint_round_trips_scores() {
        let model =
            train_mlm(&cycle_windows(1), EventLmConfig { epochs: 3, ..Default::default() })
                .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lm.json");
        model.save(&path).unwrap();
        let loaded = MaskedEventLM::load(&path).unwrap();
        let context = lemmas(&["wake", "cook", "eat", "wash"]);
        assert_eq!(
            next_event_distribution(&model, &context).unwrap(),
            next_event_distribution(&loaded, &context).unwrap()
        );
    }

    #[test]
    fn empty_and_ragged_window_sets_are_rejected() {
        assert!(matches!(
            train_mlm(&[], EventLmConfig::default()),
            Err(Error::EmptyInput(_))
        ));
        let ragged = vec![lemmas(&["a", "b", "c", "d", "e"]), lemmas(&["a", "b"])];
        assert!(matches!(
            train_mlm(&ragged, EventLmConfig::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
