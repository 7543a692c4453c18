use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::vocab::{BOS, EOS, PAD};
use crate::autodiff::{AttnSpec, Graph, ParamSet, Tensor, Var};
use crate::corpus::Batch;
use crate::error::{invalid, Error, Result};
use crate::lang::Lang;

/// Parameter-set tag of the main model inside a [`Graph`].
pub const MODEL_SET: u32 = 0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub d_model: usize,
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub heads: usize,
    pub ffn: usize,
    pub max_len: usize,
    pub dropout: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { d_model: 64, enc_layers: 2, dec_layers: 2, heads: 4, ffn: 256, max_len: 32, dropout: 0.1 }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.heads == 0 || self.ffn == 0 || self.max_len == 0 {
            return invalid("model extents must be positive");
        }
        if self.enc_layers == 0 || self.dec_layers == 0 {
            return invalid("model needs at least one encoder and one decoder layer");
        }
        if !self.d_model.is_multiple_of(self.heads) {
            return invalid(format!("d_model {} not divisible by heads {}", self.d_model, self.heads));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return invalid("dropout must lie in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
struct Ln {
    g: usize,
    b: usize,
}

#[derive(Clone, Copy, Debug)]
struct Attn {
    wq: usize,
    wk: usize,
    wv: usize,
    wo: usize,
}

#[derive(Clone, Copy, Debug)]
struct Ffn {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

#[derive(Clone, Copy, Debug)]
struct EncLayer {
    ln1: Ln,
    attn: Attn,
    ln2: Ln,
    ffn: Ffn,
}

#[derive(Clone, Copy, Debug)]
struct DecLayer {
    ln1: Ln,
    self_attn: Attn,
    ln2: Ln,
    cross: Attn,
    ln3: Ln,
    ffn: Ffn,
}

#[derive(Clone, Debug)]
struct Layout {
    tokens: usize,
    lang: usize,
    enc: Vec<EncLayer>,
    enc_ln: Ln,
    dec: Vec<DecLayer>,
    dec_ln: Ln,
}

/// Shared encoder and decoder over one joint vocabulary.
///
/// `embed.tokens` is both the input embedding and, transposed, the output
/// projection; there is no separate output matrix. `embed.lang` holds one
/// additive row per language.
#[derive(Clone, Debug)]
pub struct Seq2Seq {
    config: ModelConfig,
    vocab_size: usize,
    params: ParamSet,
    layout: Layout,
}

/// Decoder hidden vectors at output position 1, before the tied projection.
#[derive(Clone, Debug)]
pub struct FirstStepOutput {
    /// Graph link, absent once detached.
    pub var: Option<Var>,
    /// `batch × d` values.
    pub values: Tensor,
    pub input_lang: Lang,
    pub output_lang: Lang,
}

impl FirstStepOutput {
    pub fn is_detached(&self) -> bool {
        self.var.is_none()
    }

    /// Graph-free copy.
    pub fn detach(&self) -> FirstStepOutput {
        FirstStepOutput { var: None, ..self.clone() }
    }

    pub fn width(&self) -> usize {
        self.values.cols()
    }

    pub fn batch(&self) -> usize {
        self.values.rows()
    }

    /// The vectors as a graph value: the linked node, or a fresh constant.
    pub fn as_var(&self, g: &mut Graph) -> Var {
        self.var.unwrap_or_else(|| g.constant(&self.values))
    }
}

/// Model parameters placed into a graph. Entries may be left unbound.
pub struct ModelVars {
    vars: Vec<Option<Var>>,
}

impl ModelVars {
    fn get(&self, i: usize) -> Var {
        self.vars[i].expect("parameter not bound for this pass")
    }
}

/// Encoder output plus the key mask needed by cross-attention.
#[derive(Clone, Debug)]
pub struct Encoded {
    pub states: Var,
    pub key_valid: Vec<bool>,
    pub batch: usize,
    pub len: usize,
}

/// Cross-attention keys and values, one pair per decoder layer.
#[derive(Clone, Debug)]
pub struct CrossMemory {
    pub kv: Vec<(Var, Var)>,
    pub key_valid: Vec<bool>,
    pub batch: usize,
    pub len: usize,
}

/// Output of a teacher-forced decoder pass.
pub struct Decoded {
    /// `(batch·len) × |V|`.
    pub logits: Var,
    /// `(batch·len) × d`, final-layer decoder states.
    pub hidden: Var,
    pub first_step: FirstStepOutput,
}

fn sinusoid(pos: usize, d: usize) -> impl Iterator<Item = f64> {
    (0..d).map(move |i| {
        let k = (i / 2) as f64;
        let angle = pos as f64 / 10000f64.powf(2.0 * k / d as f64);
        if i % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

fn xavier(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::randn(&[fan_in, fan_out], (2.0 / (fan_in + fan_out) as f64).sqrt(), rng)
}

impl Seq2Seq {
    pub fn new(config: ModelConfig, vocab_size: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        if vocab_size <= 4 {
            return invalid("vocabulary has no ordinary tokens");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.d_model;
        let f = config.ffn;
        let mut ps = ParamSet::new(MODEL_SET);
        let scale = (d as f64).sqrt().recip();
        let tokens = ps.insert("embed.tokens", Tensor::randn(&[vocab_size, d], scale, &mut rng));
        let lang = ps.insert("embed.lang", Tensor::randn(&[2, d], scale, &mut rng));
        let ln = |ps: &mut ParamSet, name: &str| Ln {
            g: ps.insert(format!("{name}.g"), Tensor::full(&[d], 1.0)),
            b: ps.insert(format!("{name}.b"), Tensor::zeros(&[d])),
        };
        let attn = |ps: &mut ParamSet, name: &str, rng: &mut ChaCha8Rng| Attn {
            wq: ps.insert(format!("{name}.wq"), xavier(d, d, rng)),
            wk: ps.insert(format!("{name}.wk"), xavier(d, d, rng)),
            wv: ps.insert(format!("{name}.wv"), xavier(d, d, rng)),
            wo: ps.insert(format!("{name}.wo"), xavier(d, d, rng)),
        };
        let ffn = |ps: &mut ParamSet, name: &str, rng: &mut ChaCha8Rng| Ffn {
            w1: ps.insert(format!("{name}.w1"), xavier(d, f, rng)),
            b1: ps.insert(format!("{name}.b1"), Tensor::zeros(&[f])),
            w2: ps.insert(format!("{name}.w2"), xavier(f, d, rng)),
            b2: ps.insert(format!("{name}.b2"), Tensor::zeros(&[d])),
        };
        let mut enc = Vec::new();
        for l in 0..config.enc_layers {
            let p = format!("enc.{l}");
            enc.push(EncLayer {
                ln1: ln(&mut ps, &format!("{p}.ln1")),
                attn: attn(&mut ps, &format!("{p}.attn"), &mut rng),
                ln2: ln(&mut ps, &format!("{p}.ln2")),
                ffn: ffn(&mut ps, &format!("{p}.ffn"), &mut rng),
            });
        }
        let enc_ln = ln(&mut ps, "enc.ln");
        let mut dec = Vec::new();
        for l in 0..config.dec_layers {
            let p = format!("dec.{l}");
            dec.push(DecLayer {
                ln1: ln(&mut ps, &format!("{p}.ln1")),
                self_attn: attn(&mut ps, &format!("{p}.self"), &mut rng),
                ln2: ln(&mut ps, &format!("{p}.ln2")),
                cross: attn(&mut ps, &format!("{p}.cross"), &mut rng),
                ln3: ln(&mut ps, &format!("{p}.ln3")),
                ffn: ffn(&mut ps, &format!("{p}.ffn"), &mut rng),
            });
        }
        let dec_ln = ln(&mut ps, "dec.ln");
        let layout = Layout { tokens, lang, enc, enc_ln, dec, dec_ln };
        Ok(Seq2Seq { config, vocab_size, params: ps, layout })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn d_model(&self) -> usize {
        self.config.d_model
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Names of θ_Enc: encoder weights plus the shared embeddings.
    pub fn encoder_param_names(&self) -> Vec<&str> {
        self.params.names().iter().map(String::as_str).filter(|n| !n.starts_with("dec.")).collect()
    }

    /// Names of θ_Dec: decoder weights plus the shared embeddings.
    pub fn decoder_param_names(&self) -> Vec<&str> {
        self.params.names().iter().map(String::as_str).filter(|n| !n.starts_with("enc.")).collect()
    }

    /// Binds every parameter; frozen bindings never receive gradient.
    pub fn bind(&self, g: &mut Graph, frozen: bool) -> ModelVars {
        ModelVars { vars: self.params.bind(g, frozen).into_iter().map(Some).collect() }
    }

    /// Binds, as constants, only what the decoder needs.
    fn bind_decoder_const(&self, g: &mut Graph) -> ModelVars {
        let vars = self.params.iter().map(|(name, t)| (!name.starts_with("enc.")).then(|| g.constant(t))).collect();
        ModelVars { vars }
    }

    fn check_ids(&self, ids: &[Vec<u32>]) -> Result<()> {
        for row in ids {
            if let Some(&bad) = row.iter().find(|&&i| i as usize >= self.vocab_size) {
                return invalid(format!("token id {bad} outside vocabulary of {}", self.vocab_size));
            }
        }
        Ok(())
    }

    fn embed(&self, g: &mut Graph, mv: &ModelVars, ids: &[Vec<u32>], lang: Lang, pos_offset: usize) -> Var {
        let b = ids.len();
        let len = ids[0].len();
        let d = self.d_model();
        let flat: Vec<usize> = ids.iter().flat_map(|r| r.iter().map(|&i| i as usize)).collect();
        let tok = g.embedding(mv.get(self.layout.tokens), &flat);
        let lang_row = g.select_rows(mv.get(self.layout.lang), &[lang.index()]);
        let x = g.add_row(tok, lang_row);
        let x = g.scale(x, (d as f64).sqrt());
        let mut pos = Vec::with_capacity(b * len * d);
        for _ in 0..b {
            for t in 0..len {
                pos.extend(sinusoid(t + pos_offset, d));
            }
        }
        let pos = g.constant(&Tensor::new(vec![b * len, d], pos).expect("positional table shape"));
        g.add(x, pos)
    }

    fn layer_norm(&self, g: &mut Graph, mv: &ModelVars, x: Var, ln: Ln) -> Var {
        g.layer_norm(x, mv.get(ln.g), mv.get(ln.b))
    }

    fn ffn(&self, g: &mut Graph, mv: &ModelVars, x: Var, f: Ffn) -> Var {
        let h = g.matmul(x, mv.get(f.w1));
        let h = g.add_row(h, mv.get(f.b1));
        let h = g.relu(h);
        let h = g.matmul(h, mv.get(f.w2));
        g.add_row(h, mv.get(f.b2))
    }

    fn dropout(&self, g: &mut Graph, x: Var, rng: &mut Option<&mut ChaCha8Rng>) -> Var {
        match rng {
            Some(r) => g.dropout(x, self.config.dropout, *r),
            None => x,
        }
    }

    /// Contextual states for a padded batch. PAD keys are masked out.
    pub fn encode(
        &self,
        g: &mut Graph,
        mv: &ModelVars,
        ids: &[Vec<u32>],
        lang: Lang,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Encoded> {
        if ids.is_empty() || ids[0].is_empty() {
            return invalid("encode needs a non-empty batch");
        }
        let len = ids[0].len();
        if ids.iter().any(|r| r.len() != len) {
            return Err(Error::Shape("encoder batch rows must share one padded width".into()));
        }
        self.check_ids(ids)?;
        let batch = ids.len();
        let key_valid: Vec<bool> = ids.iter().flat_map(|r| r.iter().map(|&i| i != PAD)).collect();
        let mut x = self.embed(g, mv, ids, lang, 0);
        x = self.dropout(g, x, &mut rng);
        let heads = self.config.heads;
        for layer in &self.layout.enc {
            let h = self.layer_norm(g, mv, x, layer.ln1);
            let spec = AttnSpec { batch, heads, q_len: len, k_len: len, key_valid: key_valid.clone(), causal: false };
            let a = self.attend(g, mv, h, h, layer.attn, spec);
            let a = self.dropout(g, a, &mut rng);
            x = g.add(x, a);
            let h = self.layer_norm(g, mv, x, layer.ln2);
            let f = self.ffn(g, mv, h, layer.ffn);
            let f = self.dropout(g, f, &mut rng);
            x = g.add(x, f);
        }
        let states = self.layer_norm(g, mv, x, self.layout.enc_ln);
        Ok(Encoded { states, key_valid, batch, len })
    }

    fn attend(&self, g: &mut Graph, mv: &ModelVars, q_in: Var, kv_in: Var, w: Attn, spec: AttnSpec) -> Var {
        let q = g.matmul(q_in, mv.get(w.wq));
        let k = g.matmul(kv_in, mv.get(w.wk));
        let v = g.matmul(kv_in, mv.get(w.wv));
        let o = g.attention(q, k, v, spec);
        g.matmul(o, mv.get(w.wo))
    }

    /// Projects encoder states into per-layer cross-attention keys/values.
    pub fn cross_memory(&self, g: &mut Graph, mv: &ModelVars, enc: &Encoded) -> CrossMemory {
        let kv = self
            .layout
            .dec
            .iter()
            .map(|l| (g.matmul(enc.states, mv.get(l.cross.wk)), g.matmul(enc.states, mv.get(l.cross.wv))))
            .collect();
        CrossMemory { kv, key_valid: enc.key_valid.clone(), batch: enc.batch, len: enc.len }
    }

    /// Decoder stack over `inputs` (each row starts with BOS, PAD after the end).
    fn decoder_hidden(
        &self,
        g: &mut Graph,
        mv: &ModelVars,
        mem: &CrossMemory,
        inputs: &[Vec<u32>],
        out_lang: Lang,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Var {
        let batch = inputs.len();
        let len = inputs[0].len();
        let heads = self.config.heads;
        let self_valid: Vec<bool> = inputs.iter().flat_map(|r| r.iter().map(|&i| i != PAD)).collect();
        let mut x = self.embed(g, mv, inputs, out_lang, 0);
        x = self.dropout(g, x, &mut rng);
        for (l, layer) in self.layout.dec.iter().enumerate() {
            let h = self.layer_norm(g, mv, x, layer.ln1);
            let spec = AttnSpec { batch, heads, q_len: len, k_len: len, key_valid: self_valid.clone(), causal: true };
            let a = self.attend(g, mv, h, h, layer.self_attn, spec);
            let a = self.dropout(g, a, &mut rng);
            x = g.add(x, a);
            let h = self.layer_norm(g, mv, x, layer.ln2);
            let q = g.matmul(h, mv.get(layer.cross.wq));
            let (k, v) = mem.kv[l];
            let spec =
                AttnSpec { batch, heads, q_len: len, k_len: mem.len, key_valid: mem.key_valid.clone(), causal: false };
            let o = g.attention(q, k, v, spec);
            let c = g.matmul(o, mv.get(layer.cross.wo));
            let c = self.dropout(g, c, &mut rng);
            x = g.add(x, c);
            let h = self.layer_norm(g, mv, x, layer.ln3);
            let f = self.ffn(g, mv, h, layer.ffn);
            let f = self.dropout(g, f, &mut rng);
            x = g.add(x, f);
        }
        self.layer_norm(g, mv, x, self.layout.dec_ln)
    }

    /// Tied output projection: `hidden · Eᵀ`.
    pub fn project(&self, g: &mut Graph, mv: &ModelVars, hidden: Var) -> Var {
        g.matmul_t(hidden, mv.get(self.layout.tokens), false, true)
    }

    /// Teacher-forced decoding. Every row of `inputs` must begin with BOS and
    /// share one padded width; row `i`'s position-1 state is captured as the
    /// first-step output.
    pub fn decode_teacher_forced(
        &self,
        g: &mut Graph,
        mv: &ModelVars,
        mem: &CrossMemory,
        inputs: &[Vec<u32>],
        in_lang: Lang,
        out_lang: Lang,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Decoded> {
        if inputs.len() != mem.batch {
            return Err(Error::Shape(format!("decoder batch {} vs encoder batch {}", inputs.len(), mem.batch)));
        }
        if inputs.iter().any(|r| r.first() != Some(&BOS)) {
            return invalid("decoder inputs must begin with BOS");
        }
        let len = inputs[0].len();
        if inputs.iter().any(|r| r.len() != len) {
            return Err(Error::Shape("decoder batch rows must share one padded width".into()));
        }
        self.check_ids(inputs)?;
        let hidden = self.decoder_hidden(g, mv, mem, inputs, out_lang, rng);
        let logits = self.project(g, mv, hidden);
        let rows: Vec<usize> = (0..inputs.len()).map(|b| b * len).collect();
        let first = g.select_rows(hidden, &rows);
        let first_step =
            FirstStepOutput { var: Some(first), values: g.detach(first), input_lang: in_lang, output_lang: out_lang };
        Ok(Decoded { logits, hidden, first_step })
    }

    /// Mean token cross-entropy of reconstructing `targets` (in `out_lang`)
    /// from the encoded `source` batch (in `in_lang`).
    pub fn seq_loss(
        &self,
        g: &mut Graph,
        mv: &ModelVars,
        source: &Batch,
        targets: &[Vec<u32>],
        out_lang: Lang,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Var, FirstStepOutput)> {
        if source.len() != targets.len() {
            return Err(Error::Shape("source/target batch sizes differ".into()));
        }
        let enc = self.encode(g, mv, &source.ids, source.lang, rng.as_deref_mut())?;
        let mem = self.cross_memory(g, mv, &enc);
        let width = targets.iter().map(|t| t.len() + 1).max().unwrap_or(1);
        let mut inputs = Vec::with_capacity(targets.len());
        let mut gold = Vec::with_capacity(targets.len() * width);
        for t in targets {
            let mut inp = Vec::with_capacity(width);
            inp.push(BOS);
            inp.extend_from_slice(t);
            inp.resize(width, PAD);
            inputs.push(inp);
            for p in 0..width {
                gold.push(match p.cmp(&t.len()) {
                    std::cmp::Ordering::Less => Some(t[p] as usize),
                    std::cmp::Ordering::Equal => Some(EOS as usize),
                    std::cmp::Ordering::Greater => None,
                });
            }
        }
        let dec = self.decode_teacher_forced(g, mv, &mem, &inputs, source.lang, out_lang, rng)?;
        let loss = g.cross_entropy(dec.logits, &gold);
        Ok((loss, dec.first_step))
    }

    /// Inference-only next-token scorer for `src` translated into `out_lang`.
    pub fn scorer(&self, src: &Batch, out_lang: Lang) -> Result<TransformerScorer<'_>> {
        let mut g = Graph::new();
        let mv = self.bind(&mut g, true);
        let enc = self.encode(&mut g, &mv, &src.ids, src.lang, None)?;
        let mem = self.cross_memory(&mut g, &mv, &enc);
        Ok(TransformerScorer::from_memory(self, &g, &mem, out_lang))
    }

    /// Greedy decoding with the first step run on the graph `g`, so the
    /// returned first-step output stays linked for backpropagation. Later
    /// steps are inference-only. Sequences include EOS when it was produced.
    pub fn generate_greedy(
        &self,
        g: &mut Graph,
        mv: &ModelVars,
        src: &Batch,
        out_lang: Lang,
        max_len: usize,
    ) -> Result<(Vec<Vec<u32>>, FirstStepOutput)> {
        if max_len == 0 {
            return invalid("max_len must be at least 1");
        }
        let enc = self.encode(g, mv, &src.ids, src.lang, None)?;
        let mem = self.cross_memory(g, mv, &enc);
        let start = vec![vec![BOS]; src.len()];
        let dec = self.decode_teacher_forced(g, mv, &mem, &start, src.lang, out_lang, None)?;
        let logits = g.detach(dec.logits);
        let mut scorer = TransformerScorer::from_memory(self, g, &mem, out_lang);
        let first: Vec<Vec<f64>> =
            (0..src.len()).map(|i| crate::autodiff::log_softmax(&mask_specials(logits.row(i).to_vec()))).collect();
        let seqs = super::generate::greedy_from(&mut scorer, src.len(), max_len, Some(first));
        Ok((seqs, dec.first_step))
    }

    /// Inference-only greedy translation.
    pub fn translate_greedy(&self, src: &Batch, out_lang: Lang, max_len: usize) -> Result<Vec<Vec<u32>>> {
        let mut scorer = self.scorer(src, out_lang)?;
        super::generate::generate_greedy(&mut scorer, src.len(), max_len)
    }

    pub fn translate_beam(&self, src: &Batch, out_lang: Lang, max_len: usize, beam: usize) -> Result<Vec<Vec<u32>>> {
        let mut scorer = self.scorer(src, out_lang)?;
        super::generate::generate_beam(&mut scorer, src.len(), max_len, beam)
    }

    /// First-step outputs without a graph link.
    pub fn first_step_outputs(&self, src: &Batch, out_lang: Lang) -> Result<FirstStepOutput> {
        let mut g = Graph::new();
        let mv = self.bind(&mut g, true);
        let enc = self.encode(&mut g, &mv, &src.ids, src.lang, None)?;
        let mem = self.cross_memory(&mut g, &mv, &enc);
        let start = vec![vec![BOS]; src.len()];
        let dec = self.decode_teacher_forced(&mut g, &mv, &mem, &start, src.lang, out_lang, None)?;
        Ok(dec.first_step.detach())
    }
}

/// Sets PAD and BOS to `-inf` so they are never generated.
fn mask_specials(mut logits: Vec<f64>) -> Vec<f64> {
    logits[PAD as usize] = f64::NEG_INFINITY;
    logits[BOS as usize] = f64::NEG_INFINITY;
    logits
}

/// Next-token log-probabilities for a batch of equal-length prefixes.
pub trait StepScorer {
    fn vocab_size(&self) -> usize;

    /// `rows[i]` names the source sentence prefix `i` belongs to. Every prefix
    /// starts with BOS. Returns one log-probability row per prefix; PAD and
    /// BOS must be `-inf`.
    fn next_log_probs(&mut self, rows: &[usize], prefixes: &[Vec<u32>]) -> Vec<Vec<f64>>;
}

/// Decoder-side scorer with cached cross-attention memory.
pub struct TransformerScorer<'m> {
    model: &'m Seq2Seq,
    kv: Vec<(Tensor, Tensor)>,
    key_valid: Vec<bool>,
    src_len: usize,
    out_lang: Lang,
}

impl<'m> TransformerScorer<'m> {
    fn from_memory(model: &'m Seq2Seq, g: &Graph, mem: &CrossMemory, out_lang: Lang) -> Self {
        TransformerScorer {
            model,
            kv: mem.kv.iter().map(|&(k, v)| (g.detach(k), g.detach(v))).collect(),
            key_valid: mem.key_valid.clone(),
            src_len: mem.len,
            out_lang,
        }
    }

    fn logits(&mut self, rows: &[usize], prefixes: &[Vec<u32>]) -> Vec<Vec<f64>> {
        let mut g = Graph::new();
        let mv = self.model.bind_decoder_const(&mut g);
        let sel: Vec<usize> = rows.iter().flat_map(|&r| (r * self.src_len)..((r + 1) * self.src_len)).collect();
        let kv = self
            .kv
            .iter()
            .map(|(k, v)| {
                let k = g.constant(k);
                let v = g.constant(v);
                (g.select_rows(k, &sel), g.select_rows(v, &sel))
            })
            .collect();
        let key_valid = sel.iter().map(|&i| self.key_valid[i]).collect();
        let mem = CrossMemory { kv, key_valid, batch: rows.len(), len: self.src_len };
        let hidden = self.model.decoder_hidden(&mut g, &mv, &mem, prefixes, self.out_lang, None);
        let t = prefixes[0].len();
        let last: Vec<usize> = (0..prefixes.len()).map(|i| i * t + t - 1).collect();
        let h = g.select_rows(hidden, &last);
        let logits = self.model.project(&mut g, &mv, h);
        let out = g.detach(logits);
        (0..prefixes.len()).map(|i| mask_specials(out.row(i).to_vec())).collect()
    }
}

impl StepScorer for TransformerScorer<'_> {
    fn vocab_size(&self) -> usize {
        self.model.vocab_size
    }

    fn next_log_probs(&mut self, rows: &[usize], prefixes: &[Vec<u32>]) -> Vec<Vec<f64>> {
        self.logits(rows, prefixes).into_iter().map(|l| crate::autodiff::log_softmax(&l)).collect()
    }
}
