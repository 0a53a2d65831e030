//! Sentence encoding: bidirectional GRU word features, entity selection and
//! the entity-aware query vector.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Tape, Var};
use crate::datakit::QueryType;
use crate::error::{Error, Result};
use crate::params::{ParamId, ParamStore};
use crate::tensor::Matrix;
use crate::vocab::{is_interrogative, noun_lexicon};

pub const DEFAULT_HIDDEN: usize = 128;

/// Single-direction GRU.
///
/// `z = σ(x W_z + h U_z + b_z)`, `r = σ(x W_r + h U_r + b_r)`,
/// `n = tanh(x W_n + b_n + r ⊙ (h U_n))`, `h' = (1 - z) ⊙ n + z ⊙ h`.
/// Gate blocks are packed column-wise in the order `z, r, n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gru {
    pub input_dim: usize,
    pub hidden: usize,
    pub w_x: ParamId,
    pub w_h: ParamId,
    pub bias: ParamId,
}

impl Gru {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input_dim: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            input_dim,
            hidden,
            w_x: store.add_weight(format!("{name}.w_x"), input_dim, 3 * hidden, rng),
            w_h: store.add_weight(format!("{name}.w_h"), hidden, 3 * hidden, rng),
            bias: store.add_bias(format!("{name}.bias"), hidden, 3 * hidden, rng),
        }
    }

    /// Hidden states for every row of `x` (`L x input_dim`), returned in input
    /// order. With `reverse`, the recurrence runs from the last row.
    pub fn run(&self, tape: &mut Tape, x: Var, reverse: bool) -> Vec<Var> {
        let h_dim = self.hidden;
        let steps = tape.shape(x).0;
        let wx = tape.param(self.w_x);
        let wh = tape.param(self.w_h);
        let b = tape.param(self.bias);
        let xw = tape.matmul(x, wx);
        let xw = tape.add_row(xw, b);
        let mut h = tape.constant(Matrix::zeros(1, h_dim));
        let mut out = vec![h; steps];
        let order: Vec<usize> = if reverse {
            (0..steps).rev().collect()
        } else {
            (0..steps).collect()
        };
        for step in order {
            let xt = tape.slice_rows(xw, step, 1);
            let hu = tape.matmul(h, wh);
            let x_zr = tape.slice_cols(xt, 0, 2 * h_dim);
            let h_zr = tape.slice_cols(hu, 0, 2 * h_dim);
            let zr = tape.add(x_zr, h_zr);
            let zr = tape.sigmoid(zr);
            let z = tape.slice_cols(zr, 0, h_dim);
            let r = tape.slice_cols(zr, h_dim, h_dim);
            let x_n = tape.slice_cols(xt, 2 * h_dim, h_dim);
            let h_n = tape.slice_cols(hu, 2 * h_dim, h_dim);
            let gated = tape.mul(r, h_n);
            let n = tape.add(x_n, gated);
            let n = tape.tanh(n);
            let keep_new = tape.one_minus(z);
            let a = tape.mul(keep_new, n);
            let c = tape.mul(z, h);
            h = tape.add(a, c);
            out[step] = h;
        }
        out
    }
}

/// Bidirectional GRU; step `i` output is `[forward_i ; backward_i]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiGru {
    pub forward: Gru,
    pub backward: Gru,
}

/// Per-step outputs plus the final state of each direction.
pub struct BiGruOutput {
    /// `L x 2H`.
    pub steps: Var,
    /// Forward state after the last step.
    pub forward_last: Var,
    /// Backward state after the first step.
    pub backward_first: Var,
}

impl BiGru {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input_dim: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            forward: Gru::new(store, &format!("{name}.fwd"), input_dim, hidden, rng),
            backward: Gru::new(store, &format!("{name}.bwd"), input_dim, hidden, rng),
        }
    }

    pub fn output_dim(&self) -> usize {
        2 * self.forward.hidden
    }

    pub fn run(&self, tape: &mut Tape, x: Var) -> BiGruOutput {
        let f = self.forward.run(tape, x, false);
        let b = self.backward.run(tape, x, true);
        let rows: Vec<Var> = f
            .iter()
            .zip(&b)
            .map(|(&fi, &bi)| tape.concat_cols(&[fi, bi]))
            .collect();
        BiGruOutput {
            steps: tape.concat_rows(&rows),
            forward_last: *f.last().expect("non-empty sequence"),
            backward_first: b[0],
        }
    }
}

/// How the query vector is formed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryMode {
    /// Entity feature plus attention over the sentence.
    #[default]
    EntityAttention,
    /// Final recurrent states, duplicated to the same width.
    LastHidden,
}

impl std::str::FromStr for QueryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entity_attention" => Ok(QueryMode::EntityAttention),
            "last_hidden" => Ok(QueryMode::LastHidden),
            other => Err(Error::Config(format!("unknown query mode {other:?}"))),
        }
    }
}

/// Noun detector used to pick the entity of declarative sentences.
pub trait PosTagger: Sync {
    fn is_noun(&self, token: &str) -> bool;
}

/// Noun lookup in a fixed word list.
#[derive(Clone, Debug)]
pub struct LexiconTagger {
    nouns: HashSet<String>,
}

impl LexiconTagger {
    pub fn new<S: AsRef<str>>(nouns: &[S]) -> Self {
        Self {
            nouns: nouns.iter().map(|n| n.as_ref().to_lowercase()).collect(),
        }
    }
}

impl Default for LexiconTagger {
    fn default() -> Self {
        Self {
            nouns: noun_lexicon().map(str::to_string).collect(),
        }
    }
}

impl PosTagger for LexiconTagger {
    fn is_noun(&self, token: &str) -> bool {
        self.nouns.contains(&token.to_lowercase())
    }
}

/// 0-based index of the queried entity: the first interrogative word for
/// questions, the first noun otherwise. Falls back to 0 with a warning.
pub fn select_entity<S: AsRef<str>>(
    tokens: &[S],
    query_type: QueryType,
    tagger: &dyn PosTagger,
) -> Result<usize> {
    if tokens.is_empty() {
        return Err(Error::Input("empty sentence".into()));
    }
    let find = |pred: &dyn Fn(&str) -> bool| tokens.iter().position(|t| pred(t.as_ref()));
    let found = match query_type {
        QueryType::Interrogative => {
            find(&|t| is_interrogative(t)).or_else(|| find(&|t| tagger.is_noun(t)))
        }
        QueryType::Declarative => find(&|t| tagger.is_noun(t)).or_else(|| find(&|t| is_interrogative(t))),
    };
    Ok(found.unwrap_or_else(|| {
        let sentence: Vec<&str> = tokens.iter().map(AsRef::as_ref).collect();
        log::warn!(
            "no entity token in {:?}; using the first word",
            sentence.join(" ")
        );
        0
    }))
}

/// Trainable pieces of the sentence encoder.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LangParams {
    pub gru: BiGru,
    pub w1: ParamId,
    pub w2: ParamId,
}

impl LangParams {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        word_dim: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let gru = BiGru::new(store, "lang.gru", word_dim, hidden, rng);
        let ds = 2 * hidden;
        Self {
            gru,
            w1: store.add_weight("lang.w1", ds, ds, rng),
            w2: store.add_weight("lang.w2", ds, ds, rng),
        }
    }

    /// Width `d_s` of the word features.
    pub fn feature_dim(&self) -> usize {
        2 * self.gru.forward.hidden
    }
}

/// Encoded sentence on a tape.
pub struct SentenceEncoding {
    /// Word features `L x d_s`.
    pub words: Var,
    pub entity: usize,
    /// Attention over words (`L x 1`); `None` in last-hidden mode.
    pub attention: Option<Var>,
    /// Query vector `1 x 2 d_s`.
    pub query: Var,
}

/// Word features `L x d_s` for embedded tokens `L x word_dim`.
pub fn encode_words(tape: &mut Tape, embeddings: &Matrix, params: &LangParams) -> Result<BiGruOutput> {
    if embeddings.rows() == 0 {
        return Err(Error::Input("empty sentence".into()));
    }
    if embeddings.cols() != params.gru.forward.input_dim {
        return Err(Error::Input(format!(
            "word embeddings of dim {} (expected {})",
            embeddings.cols(),
            params.gru.forward.input_dim
        )));
    }
    let x = tape.constant(embeddings.clone());
    Ok(params.gru.run(tape, x))
}

/// `γ_i = (W1 s_e)·(W2 s_i)`, `s_a = Σ softmax(γ)_i s_i`, `s_q = [s_e ; s_a]`.
/// Returns `(s_q, attention)`.
pub fn query_representation(
    tape: &mut Tape,
    words: Var,
    entity: usize,
    params: &LangParams,
) -> (Var, Var) {
    let se = tape.slice_rows(words, entity, 1);
    let w1 = tape.param(params.w1);
    let w2 = tape.param(params.w2);
    let key = tape.matmul(se, w1);
    let proj = tape.matmul(words, w2);
    let key_t = tape.transpose(key);
    let logits = tape.matmul(proj, key_t);
    let attn = tape.softmax_col(logits);
    let attn_t = tape.transpose(attn);
    let sa = tape.matmul(attn_t, words);
    (tape.concat_cols(&[se, sa]), attn)
}

/// Full sentence encoding under `mode`.
pub fn encode_sentence(
    tape: &mut Tape,
    embeddings: &Matrix,
    entity: usize,
    mode: QueryMode,
    params: &LangParams,
) -> Result<SentenceEncoding> {
    let out = encode_words(tape, embeddings, params)?;
    if entity >= embeddings.rows() {
        return Err(Error::Input(format!(
            "entity index {entity} outside sentence of {} words",
            embeddings.rows()
        )));
    }
    Ok(match mode {
        QueryMode::EntityAttention => {
            let (query, attn) = query_representation(tape, out.steps, entity, params);
            SentenceEncoding {
                words: out.steps,
                entity,
                attention: Some(attn),
                query,
            }
        }
        QueryMode::LastHidden => {
            let last = tape.concat_cols(&[out.forward_last, out.backward_first]);
            SentenceEncoding {
                words: out.steps,
                entity,
                attention: None,
                query: tape.concat_cols(&[last, last]),
            }
        }
    })
}
