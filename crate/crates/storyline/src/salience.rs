//! Event salience scoring: Gaussian-kernel interaction features over mention
//! embeddings plus handcrafted features, a linear scorer with a sigmoid, and
//! strict greater-than filtering at 0.5.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{abstract_lemma_set, derive_salience_labels, Document};
use crate::error::{Error, Result};
use crate::nn::{checkpoint, Adam, AdamConfig, Init, ParamId, ParamSet, Tape, Var, INIT_SCALE};
use crate::rng::SeededRng;
use crate::vocab::Vocab;

/// Squared-norm clamp for cosines, i.e. a norm floor of 1e-12.
pub const NORM_CLAMP: f64 = 1e-24;

/// Finite-difference step for this model's gradient checks. The exact-match
/// kernel (width 1e-3) has third derivatives large enough that the crate
/// default step would leave truncation above tolerance; rounding noise is
/// still negligible at this size.
pub const KERNEL_GRAD_CHECK_EPS: f64 = 1.5e-4;

const INIT_SALT: u64 = 0x53_41_4c_01;
const TRAIN_SALT: u64 = 0x53_41_4c_02;

/// Gaussian kernels (mean, width) with strictly decreasing means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelBank {
    kernels: Vec<(f64, f64)>,
}

impl KernelBank {
    pub fn new(kernels: Vec<(f64, f64)>) -> Result<Self> {
        if kernels.is_empty() {
            return Err(Error::InvalidConfig("kernel bank cannot be empty".into()));
        }
        if kernels.windows(2).any(|w| w[0].0 <= w[1].0) {
            return Err(Error::InvalidConfig("kernel means must be strictly decreasing".into()));
        }
        if kernels.iter().any(|(mu, sigma)| !(-1.0..=1.0).contains(mu) || *sigma <= 0.0) {
            return Err(Error::InvalidConfig(
                "kernel means must lie in [-1, 1] and widths must be positive".into(),
            ));
        }
        Ok(KernelBank { kernels })
    }

    pub fn kernels(&self) -> &[(f64, f64)] {
        &self.kernels
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }
}

impl Default for KernelBank {
    /// An exact-match kernel plus ten soft bins: the usual kernel-pooling
    /// layout.
    fn default() -> Self {
        let mut kernels = vec![(1.0, 1e-3)];
        for i in 0..10 {
            kernels.push((0.9 - 0.2 * i as f64, 0.1));
        }
        KernelBank { kernels }
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().max(NORM_CLAMP).sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().max(NORM_CLAMP).sqrt();
    dot / (na * nb)
}

/// Reference kernel features: brute-force double loop over neighbors and
/// kernels. phi_k = sum_j exp(-(cos(target, n_j) - mu_k)^2 / (2 sigma_k^2)).
pub fn kernel_features_plain(
    target: &[f64],
    neighbors: &[Vec<f64>],
    bank: &KernelBank,
) -> Vec<f64> {
    let mut phi = vec![0.0; bank.len()];
    for n in neighbors {
        let c = cosine(target, n);
        for (k, (mu, sigma)) in bank.kernels().iter().enumerate() {
            phi[k] += (-(c - mu) * (c - mu) / (2.0 * sigma * sigma)).exp();
        }
    }
    phi
}

/// Cosine similarity between two tape vectors with clamped norms.
pub fn cosine_on_tape(tape: &mut Tape, a: Var, b: Var) -> Var {
    let num = tape.dot(a, b);
    let na = tape.dot(a, a);
    let nb = tape.dot(b, b);
    let ra = tape.rsqrt_clamped(na, NORM_CLAMP);
    let rb = tape.rsqrt_clamped(nb, NORM_CLAMP);
    let t = tape.mul(num, ra);
    tape.mul(t, rb)
}

fn phi_from_cosines(tape: &mut Tape, cosines: &[Var], bank: &KernelBank) -> Var {
    if cosines.is_empty() {
        return tape.zeros(bank.len());
    }
    let mut per_kernel = Vec::with_capacity(bank.len());
    for (mu, sigma) in bank.kernels() {
        let gs: Vec<Var> = cosines.iter().map(|c| tape.gauss(*c, *mu, *sigma)).collect();
        per_kernel.push(tape.add_many(&gs));
    }
    tape.concat(&per_kernel)
}

/// Differentiable kernel features for one target against its neighbors.
pub fn kernel_features_on_tape(
    tape: &mut Tape,
    target: Var,
    neighbors: &[Var],
    bank: &KernelBank,
) -> Var {
    let cosines: Vec<Var> =
        neighbors.iter().map(|n| cosine_on_tape(tape, target, *n)).collect();
    phi_from_cosines(tape, &cosines, bank)
}

/// Per-event handcrafted features over event-mention lemmas:
/// ln(1 + lemma frequency) and first-mention sentence / sentence count.
pub fn handcrafted_features(doc: &Document) -> (Vec<f64>, Vec<f64>) {
    let lemmas: Vec<String> = doc.events.iter().map(|m| doc.mention_lemma(m)).collect();
    let mut count: BTreeMap<&str, usize> = BTreeMap::new();
    let mut first_sent: BTreeMap<&str, usize> = BTreeMap::new();
    for (lemma, m) in lemmas.iter().zip(&doc.events) {
        *count.entry(lemma).or_insert(0) += 1;
        let e = first_sent.entry(lemma).or_insert(m.sent);
        *e = (*e).min(m.sent);
    }
    let n_sent = doc.sentences.len() as f64;
    let freqs = lemmas.iter().map(|l| (1.0 + count[l.as_str()] as f64).ln()).collect();
    let locs = lemmas.iter().map(|l| first_sent[l.as_str()] as f64 / n_sent).collect();
    (freqs, locs)
}

/// Reference (non-tape) base features for one event:
/// (ln(1+freq), first-mention location, mean cosine to other mentions).
pub fn base_features(
    doc: &Document,
    event: usize,
    event_embs: &[Vec<f64>],
    entity_embs: &[Vec<f64>],
) -> [f64; 3] {
    let (freqs, locs) = handcrafted_features(doc);
    let mut cos_sum = 0.0;
    let mut n = 0usize;
    for (j, e) in event_embs.iter().enumerate() {
        if j != event {
            cos_sum += cosine(&event_embs[event], e);
            n += 1;
        }
    }
    for e in entity_embs {
        cos_sum += cosine(&event_embs[event], e);
        n += 1;
    }
    let mean_cos = if n == 0 { 0.0 } else { cos_sum / n as f64 };
    [freqs[event], locs[event], mean_cos]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SalienceConfig {
    pub seed: u64,
    pub embed_dim: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
}

impl Default for SalienceConfig {
    fn default() -> Self {
        SalienceConfig { seed: 7, embed_dim: 16, epochs: 5, adam: AdamConfig::default() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SalienceMeta {
    config: SalienceConfig,
    bank: KernelBank,
    vocab: Vocab,
}

/// Trained salience scorer: lemma embeddings, a weight per feature
/// dimension (2K kernel features + 3 base features), and a bias.
#[derive(Debug, Clone)]
pub struct SalienceModel {
    config: SalienceConfig,
    bank: KernelBank,
    vocab: Vocab,
    params: ParamSet,
    emb: ParamId,
    w: ParamId,
    b: ParamId,
}

const UNK: usize = 0;

impl SalienceModel {
    pub fn new(config: SalienceConfig, bank: KernelBank, vocab: Vocab) -> Self {
        let mut rng = SeededRng::derive(config.seed, INIT_SALT);
        let mut params = ParamSet::new();
        let emb = params.register(
            "salience.emb",
            vocab.len(),
            config.embed_dim,
            Init::Uniform(INIT_SCALE),
            &mut rng,
        );
        let w = params.register(
            "salience.w",
            2 * bank.len() + 3,
            1,
            Init::Uniform(INIT_SCALE),
            &mut rng,
        );
        let b = params.register("salience.b", 1, 1, Init::Zeros, &mut rng);
        SalienceModel { config, bank, vocab, params, emb, w, b }
    }

    /// Lemma vocabulary over event and entity mentions, in document order,
    /// with the unknown token at id 0.
    pub fn build_vocab(docs: &[Document]) -> Vocab {
        let mut vocab = Vocab::with_specials(&["<unk>"]);
        for doc in docs {
            for m in doc.events.iter().chain(&doc.entities) {
                vocab.intern(&doc.mention_lemma(m));
            }
        }
        vocab
    }

    pub fn config(&self) -> &SalienceConfig {
        &self.config
    }

    pub fn bank(&self) -> &KernelBank {
        &self.bank
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn mention_rows(&self, tape: &mut Tape, emb: Var, doc: &Document) -> (Vec<Var>, Vec<Var>) {
        let d = self.config.embed_dim;
        let events = doc
            .events
            .iter()
            .map(|m| tape.row(emb, self.vocab.get_or(&doc.mention_lemma(m), UNK), d))
            .collect();
        let entities = doc
            .entities
            .iter()
            .map(|m| tape.row(emb, self.vocab.get_or(&doc.mention_lemma(m), UNK), d))
            .collect();
        (events, entities)
    }

    fn warn_on_zero_norms(&self, doc: &Document) {
        let table = &self.params.get(self.emb).value;
        let d = self.config.embed_dim;
        for m in doc.events.iter().chain(&doc.entities) {
            let row = self.vocab.get_or(&doc.mention_lemma(m), UNK);
            let sq: f64 = table.data[row * d..(row + 1) * d].iter().map(|x| x * x).sum();
            if sq < NORM_CLAMP {
                log::warn!(
                    "zero-norm embedding for lemma {:?} in {}; norm clamped",
                    doc.mention_lemma(m),
                    doc.doc_id
                );
            }
        }
    }

    /// Per-event salience probabilities on the given tape.
    pub fn doc_probs_with(
        &self,
        tape: &mut Tape,
        params: &ParamSet,
        doc: &Document,
    ) -> Vec<Var> {
        if doc.events.is_empty() {
            return Vec::new();
        }
        let emb = tape.param(params, self.emb);
        let w = tape.param(params, self.w);
        let b = tape.param(params, self.b);
        let (events, entities) = self.mention_rows(tape, emb, doc);
        let (freqs, locs) = handcrafted_features(doc);
        let dim = 2 * self.bank.len() + 3;
        let mut probs = Vec::with_capacity(events.len());
        for i in 0..events.len() {
            let cos_ee: Vec<Var> = (0..events.len())
                .filter(|j| *j != i)
                .map(|j| cosine_on_tape(tape, events[i], events[j]))
                .collect();
            let cos_ent: Vec<Var> =
                entities.iter().map(|e| cosine_on_tape(tape, events[i], *e)).collect();
            let phi_ee = phi_from_cosines(tape, &cos_ee, &self.bank);
            let phi_ent = phi_from_cosines(tape, &cos_ent, &self.bank);
            let hand = tape.leaf(vec![freqs[i], locs[i]]);
            let all_cos: Vec<Var> = cos_ee.iter().chain(&cos_ent).copied().collect();
            let mean_cos =
                if all_cos.is_empty() { tape.zeros(1) } else { tape.mean_many(&all_cos) };
            let feats = tape.concat(&[phi_ee, phi_ent, hand, mean_cos]);
            debug_assert_eq!(tape.len(feats), dim);
            let z = tape.dot(w, feats);
            let zb = tape.add(z, b);
            probs.push(tape.sigmoid(zb));
        }
        probs
    }

    /// Mean BCE over the document's events, for gradient computation.
    pub fn doc_loss_with(
        &self,
        tape: &mut Tape,
        params: &ParamSet,
        doc: &Document,
        labels: &[bool],
    ) -> Result<Var> {
        if labels.len() != doc.events.len() {
            return Err(Error::DimensionMismatch {
                context: format!("salience labels for {}", doc.doc_id),
                expected: doc.events.len(),
                got: labels.len(),
            });
        }
        let probs = self.doc_probs_with(tape, params, doc);
        if probs.is_empty() {
            return Err(Error::EmptyInput(format!("document {} has no events", doc.doc_id)));
        }
        let losses: Vec<Var> = probs
            .iter()
            .zip(labels)
            .map(|(p, y)| tape.bce(*p, f64::from(*y)))
            .collect();
        let total = tape.add_many(&losses);
        Ok(tape.scale(total, 1.0 / losses.len() as f64))
    }

    /// Salience scores for every event in the document.
    pub fn score_document(&self, doc: &Document) -> Vec<f64> {
        self.warn_on_zero_norms(doc);
        let mut tape = Tape::new();
        let probs = self.doc_probs_with(&mut tape, &self.params, doc);
        probs.iter().map(|p| tape.scalar(*p)).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let meta = SalienceMeta {
            config: self.config.clone(),
            bank: self.bank.clone(),
            vocab: self.vocab.clone(),
        };
        checkpoint::save(path, &meta, &self.params)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (meta, tensors) = checkpoint::load::<SalienceMeta>(path)?;
        let mut model = SalienceModel::new(meta.config, meta.bank, meta.vocab);
        checkpoint::restore(&mut model.params, &tensors)?;
        Ok(model)
    }
}

/// Salience labels for training: gold flags when present, otherwise derived
/// from the gold abstract.
pub fn event_labels(doc: &Document) -> Result<Vec<bool>> {
    if let Some(flags) = doc.gold().and_then(|g| g.salience.as_ref()) {
        return Ok(flags.iter().map(|v| *v == 1).collect());
    }
    if let Some(lemmas) = abstract_lemma_set(doc) {
        return Ok(derive_salience_labels(doc, &lemmas));
    }
    Err(Error::MissingArtifact {
        mode: "salience training".into(),
        artifact: format!("gold salience flags or abstract for {}", doc.doc_id),
    })
}

/// Train with per-document Adam steps over label BCE; deterministic per seed.
pub fn train_salience(
    docs: &[Document],
    bank: KernelBank,
    config: SalienceConfig,
) -> Result<SalienceModel> {
    let mut labeled: Vec<(usize, Vec<bool>)> = Vec::new();
    for (i, doc) in docs.iter().enumerate() {
        if doc.events.is_empty() {
            continue;
        }
        labeled.push((i, event_labels(doc)?));
    }
    if labeled.is_empty() {
        return Err(Error::EmptyInput("salience training corpus has no events".into()));
    }
    let any_pos = labeled.iter().any(|(_, l)| l.iter().any(|x| *x));
    let any_neg = labeled.iter().any(|(_, l)| l.iter().any(|x| !*x));
    if !any_pos || !any_neg {
        log::warn!("salience corpus has a single class; training proceeds");
    }

    let vocab = SalienceModel::build_vocab(docs);
    let mut model = SalienceModel::new(config, bank, vocab);
    let mut adam = Adam::new(model.config.adam, &model.params);
    let mut rng = SeededRng::derive(model.config.seed, TRAIN_SALT);
    for _epoch in 0..model.config.epochs {
        let mut order: Vec<usize> = (0..labeled.len()).collect();
        rng.shuffle(&mut order);
        for li in order {
            let (di, labels) = &labeled[li];
            let mut tape = Tape::new();
            let loss = model.doc_loss_with(&mut tape, &model.params, &docs[*di], labels)?;
            if !tape.scalar(loss).is_finite() {
                return Err(Error::NonFiniteLoss(format!(
                    "salience training on {}",
                    docs[*di].doc_id
                )));
            }
            tape.backward(loss);
            tape.apply_grads(&mut model.params);
            adam.step(&mut model.params)?;
        }
    }
    Ok(model)
}

/// Indices of events whose score is strictly greater than the threshold,
/// in document order. Strictness means an untrained all-zero scorer
/// (every score exactly 0.5) filters everything out.
pub fn filter_salient(scores: &[f64], threshold: f64) -> Vec<usize> {
    (0..scores.len()).filter(|i| scores[*i] > threshold).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, Mention, SyntheticConfig};
    use crate::nn::{grad_check, GRAD_CHECK_TOL};

    #[test]
    fn default_bank_has_eleven_decreasing_kernels() {
        let bank = KernelBank::default();
        assert_eq!(bank.len(), 11);
        assert_eq!(bank.kernels()[0], (1.0, 1e-3));
        assert!((bank.kernels()[10].0 - (-0.9)).abs() < 1e-12);
        assert!(bank.kernels().windows(2).all(|w| w[0].0 > w[1].0));
        KernelBank::new(bank.kernels().to_vec()).unwrap();
        assert!(KernelBank::new(vec![(0.5, 0.1), (0.5, 0.1)]).is_err());
        assert!(KernelBank::new(vec![(0.5, 0.0)]).is_err());
    }

    #[test]
    fn kernel_feature_hand_values() {
        let bank = KernelBank::new(vec![(0.9, 0.1), (0.8, 0.1)]).unwrap();
        let target = vec![1.0, 0.0];
        let neighbor = vec![0.9, (1.0f64 - 0.81).sqrt()];
        let phi = kernel_features_plain(&target, &[neighbor], &bank);
        assert!((phi[0] - 1.0).abs() < 1e-12, "exact-mean kernel fires at 1.0");
        assert!((phi[1] - (-0.5f64).exp()).abs() < 1e-12, "adjacent kernel at exp(-1/2)");

        assert_eq!(kernel_features_plain(&target, &[], &bank), vec![0.0, 0.0]);
    }

    #[test]
    fn kernel_features_match_brute_force_on_tape() {
        let bank = KernelBank::default();
        let mut rng = SeededRng::new(99);
        for _ in 0..25 {
            let d = 8;
            let target: Vec<f64> = (0..d).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let n = rng.below(6);
            let neighbors: Vec<Vec<f64>> =
                (0..n).map(|_| (0..d).map(|_| rng.uniform(-1.0, 1.0)).collect()).collect();
            let plain = kernel_features_plain(&target, &neighbors, &bank);

            let mut tape = Tape::new();
            let t = tape.leaf(target.clone());
            let ns: Vec<Var> = neighbors.iter().map(|v| tape.leaf(v.clone())).collect();
            let phi = kernel_features_on_tape(&mut tape, t, &ns, &bank);
            for (a, b) in tape.value(phi).iter().zip(&plain) {
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }
    }

    fn tiny_doc() -> Document {
        Document {
            doc_id: "t".into(),
            sentences: vec![
                vec!["alpha".into(), "strike".into(), ".".into()],
                vec!["beta".into(), "strike".into(), ".".into()],
                vec!["gamma".into(), "retreat".into(), ".".into()],
                vec!["delta".into(), "calm".into(), ".".into()],
            ],
            events: vec![Mention::single(0, 1), Mention::single(1, 1), Mention::single(2, 1)],
            entities: vec![Mention::single(0, 0)],
            gold: None,
        }
    }

    #[test]
    fn handcrafted_feature_values() {
        let doc = tiny_doc();
        let (freqs, locs) = handcrafted_features(&doc);
        // "strike" occurs twice, "retreat" once; four sentences total.
        assert!((freqs[0] - 3.0f64.ln()).abs() < 1e-12);
        assert!((freqs[1] - 3.0f64.ln()).abs() < 1e-12);
        assert!((freqs[2] - 2.0f64.ln()).abs() < 1e-12);
        assert!((locs[0] - 0.0).abs() < 1e-12, "first mention of strike is sentence 0");
        assert!((locs[1] - 0.0).abs() < 1e-12);
        assert!((locs[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn base_features_for_isolated_event() {
        let doc = Document {
            doc_id: "solo".into(),
            sentences: vec![
                vec!["x".into(), "strike".into()],
                vec!["y".into()],
                vec!["z".into()],
                vec!["w".into()],
            ],
            events: vec![Mention::single(0, 1)],
            entities: vec![],
            gold: None,
        };
        let embs = vec![vec![0.3, 0.4]];
        let f = base_features(&doc, 0, &embs, &[]);
        assert!((f[0] - 2.0f64.ln()).abs() < 1e-12);
        assert_eq!(f[1], 0.0);
        assert_eq!(f[2], 0.0, "no other mentions, mean cosine defaults to zero");
    }

    #[test]
    fn tape_scores_match_plain_assembly() {
        let doc = tiny_doc();
        let model = SalienceModel::new(
            SalienceConfig { embed_dim: 6, ..SalienceConfig::default() },
            KernelBank::default(),
            SalienceModel::build_vocab(std::slice::from_ref(&doc)),
        );
        let scores = model.score_document(&doc);
        assert_eq!(scores.len(), 3);

        let d = model.config.embed_dim;
        let table = &model.params.get(model.emb).value.data;
        let row = |lemma: &str| {
            let r = model.vocab.get(lemma).unwrap();
            table[r * d..(r + 1) * d].to_vec()
        };
        let event_embs: Vec<Vec<f64>> =
            doc.events.iter().map(|m| row(&doc.mention_lemma(m))).collect();
        let entity_embs: Vec<Vec<f64>> =
            doc.entities.iter().map(|m| row(&doc.mention_lemma(m))).collect();
        let w = &model.params.get(model.w).value.data;
        let b = model.params.get(model.b).value.data[0];
        for i in 0..doc.events.len() {
            let neighbors: Vec<Vec<f64>> = event_embs
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, e)| e.clone())
                .collect();
            let phi_ee = kernel_features_plain(&event_embs[i], &neighbors, &model.bank);
            let phi_ent = kernel_features_plain(&event_embs[i], &entity_embs, &model.bank);
            let base = base_features(&doc, i, &event_embs, &entity_embs);
            let feats: Vec<f64> = phi_ee
                .into_iter()
                .chain(phi_ent)
                .chain([base[0], base[1], base[2]])
                .collect();
            let z: f64 = feats.iter().zip(w).map(|(f, w)| f * w).sum::<f64>() + b;
            let expected = crate::nn::sigmoid(z);
            assert!(
                (scores[i] - expected).abs() < 1e-9,
                "event {i}: {} vs {expected}",
                scores[i]
            );
        }
    }

    #[test]
    fn zero_weights_score_half_and_bias_saturates() {
        let doc = tiny_doc();
        let mut model = SalienceModel::new(
            SalienceConfig { embed_dim: 4, ..SalienceConfig::default() },
            KernelBank::default(),
            SalienceModel::build_vocab(std::slice::from_ref(&doc)),
        );
        for v in model.params.get_mut(model.w).value.data.iter_mut() {
            *v = 0.0;
        }
        let scores = model.score_document(&doc);
        assert!(scores.iter().all(|s| (*s - 0.5).abs() < 1e-12));

        model.params.get_mut(model.b).value.data[0] = 10.0;
        let scores = model.score_document(&doc);
        assert!(scores.iter().all(|s| *s > 0.9999));

        model.params.get_mut(model.b).value.data[0] = -10.0;
        let low = model.score_document(&doc);
        assert!(low.iter().all(|s| *s < 0.0001 && *s > 0.0));
    }

    #[test]
    fn raising_bias_never_lowers_scores() {
        let doc = tiny_doc();
        let mut model = SalienceModel::new(
            SalienceConfig { embed_dim: 6, ..SalienceConfig::default() },
            KernelBank::default(),
            SalienceModel::build_vocab(std::slice::from_ref(&doc)),
        );
        let before = model.score_document(&doc);
        model.params.get_mut(model.b).value.data[0] += 1.0;
        let after = model.score_document(&doc);
        for (a, b) in before.iter().zip(&after) {
            assert!(b >= a);
        }
    }

    #[test]
    fn filter_is_strict_and_order_preserving() {
        assert_eq!(filter_salient(&[0.7, 0.5, 0.2], 0.5), vec![0]);
        assert_eq!(filter_salient(&[0.9, 0.9, 0.9], 0.5), vec![0, 1, 2]);
        assert_eq!(filter_salient(&[], 0.5), Vec::<usize>::new());
        // Idempotent: filtering already-kept scores keeps them all.
        let kept = filter_salient(&[0.7, 0.6], 0.5);
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let doc = tiny_doc();
        // Norm-sensitive paths (1/sqrt of squared norms) need the default
        // embedding width; tiny dims leave norms near the curvature spike.
        let model = SalienceModel::new(
            SalienceConfig::default(),
            KernelBank::default(),
            SalienceModel::build_vocab(std::slice::from_ref(&doc)),
        );
        let labels = vec![true, false, true];
        let mut params = model.params.clone();
        let mut rng = SeededRng::new(5);
        let report = grad_check(&mut params, KERNEL_GRAD_CHECK_EPS, None, &mut rng, |tape, ps| {
            model.doc_loss_with(tape, ps, &doc, &labels).unwrap()
        })
        .unwrap();
        assert!(report.max_rel_err < GRAD_CHECK_TOL, "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn training_separates_backbone_from_distractors() {
        let corpus = generate_synthetic(&SyntheticConfig {
            num_docs: 30,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let config = SalienceConfig {
            embed_dim: 8,
            epochs: 4,
            ..SalienceConfig::default()
        };
        let model = train_salience(&corpus, KernelBank::default(), config).unwrap();
        let mut correct = 0usize;
        let mut total = 0usize;
        let mut pos_sum = 0.0;
        let mut pos_n = 0usize;
        let mut neg_sum = 0.0;
        let mut neg_n = 0usize;
        for doc in &corpus {
            let scores = model.score_document(doc);
            for (s, y) in scores.iter().zip(event_labels(doc).unwrap()) {
                total += 1;
                if (*s > 0.5) == y {
                    correct += 1;
                }
                if y {
                    pos_sum += s;
                    pos_n += 1;
                } else {
                    neg_sum += s;
                    neg_n += 1;
                }
            }
        }
        let acc = correct as f64 / total as f64;
        assert!(acc > 0.95, "training accuracy {acc}");
        assert!(pos_sum / pos_n as f64 > neg_sum / neg_n as f64 + 0.2);
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let corpus = generate_synthetic(&SyntheticConfig {
            num_docs: 4,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let config = SalienceConfig { epochs: 0, embed_dim: 4, ..SalienceConfig::default() };
        let trained = train_salience(&corpus, KernelBank::default(), config.clone()).unwrap();
        let fresh = SalienceModel::new(
            config,
            KernelBank::default(),
            SalienceModel::build_vocab(&corpus),
        );
        for (a, b) in trained.params.iter().zip(fresh.params.iter()) {
            assert_eq!(a.value.data, b.value.data, "{}", a.name);
        }
    }

    #[test]
    fn checkpoint_round_trip_preserves_scores() {
        let corpus = generate_synthetic(&SyntheticConfig {
            num_docs: 6,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let config = SalienceConfig { embed_dim: 6, epochs: 1, ..SalienceConfig::default() };
        let model = train_salience(&corpus, KernelBank::default(), config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("salience.json");
        model.save(&path).unwrap();
        let loaded = SalienceModel::load(&path).unwrap();
        for doc in &corpus {
            assert_eq!(model.score_document(doc), loaded.score_document(doc));
        }
    }

    #[test]
    fn missing_labels_are_reported() {
        let mut doc = tiny_doc();
        doc.gold = None;
        assert!(matches!(event_labels(&doc), Err(Error::MissingArtifact { .. })));
    }
}
