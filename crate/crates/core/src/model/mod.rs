//! Shared encoder, the two attentional decoders, and the convolutional
//! critic that scores attention traces.

mod checkpoint;
mod config;
mod critic;
mod decoder;
mod encoder;
mod nn;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::params::{Group, ParamId, ParamStore};
use crate::tensor::Tensor;
use crate::text::{Embeddings, Vocabulary, PAD};

pub use checkpoint::{Checkpoint, NamedTensor};
pub use config::{AttentionKind, ModelConfig};
pub use critic::{Head, Trace};
pub use decoder::{DecodeMode, Decoded, DecoderState, Step};
pub use encoder::Encoded;

/// Which decoder: `G_s` produces simple text, `G_d` complex text.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Decoder {
    Simple,
    Complex,
}

impl Decoder {
    pub fn group(self) -> Group {
        match self {
            Decoder::Simple => Group::SimpleDecoder,
            Decoder::Complex => Group::ComplexDecoder,
        }
    }

    fn prefix(self) -> &'static str {
        match self {
            Decoder::Simple => "gs",
            Decoder::Complex => "gd",
        }
    }
}

impl std::str::FromStr for Decoder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s" | "gs" | "simple" => Ok(Decoder::Simple),
            "d" | "gd" | "complex" => Ok(Decoder::Complex),
            other => Err(Error::Config(format!("unknown decoder `{other}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct GruParams {
    pub w_x: ParamId,
    pub w_h: ParamId,
    pub b_x: ParamId,
    pub b_h: ParamId,
}

#[derive(Clone, Debug)]
pub(crate) enum AttentionParams {
    Bilinear { w: ParamId },
    Additive { w_k: ParamId, w_q: ParamId, v: ParamId },
}

#[derive(Clone, Debug)]
pub(crate) struct DecoderParams {
    pub embedding: ParamId,
    pub layers: Vec<GruParams>,
    /// Affine map from encoder final states to each layer's initial state.
    pub init: Vec<(ParamId, ParamId)>,
    pub attention: AttentionParams,
    pub w_out: ParamId,
    pub b_out: ParamId,
}

#[derive(Clone, Debug)]
pub(crate) struct CriticParams {
    /// `(width, weight [width * context, filters], bias [filters])`.
    pub convs: Vec<(usize, ParamId, ParamId)>,
    pub d_head: (ParamId, ParamId),
    pub c_head: (ParamId, ParamId),
}

#[derive(Clone, Debug)]
pub(crate) struct ModelParams {
    pub embedding: ParamId,
    /// `[layer][direction]`, forward first.
    pub encoder: Vec<[GruParams; 2]>,
    pub simple: DecoderParams,
    pub complex: DecoderParams,
    pub critic: CriticParams,
}

/// All model parameters together with the vocabulary and sizes they were
/// built for.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub store: ParamStore,
    pub(crate) ids: ModelParams,
}

struct Init<'a> {
    store: &'a mut ParamStore,
    rng: ChaCha8Rng,
}

impl Init<'_> {
    fn uniform(&mut self, name: String, group: Group, shape: &[usize], bound: f64) -> ParamId {
        let len = shape.iter().product();
        let data = (0..len).map(|_| self.rng.gen_range(-bound..=bound)).collect();
        self.store.add(name, group, Tensor::new(shape.to_vec(), data).expect("valid shape"))
    }

    fn zeros(&mut self, name: String, group: Group, shape: &[usize]) -> ParamId {
        self.store.add(name, group, Tensor::zeros(shape))
    }

    fn gru(&mut self, name: &str, group: Group, input: usize, hidden: usize) -> GruParams {
        let k = 1.0 / (hidden as f64).sqrt();
        GruParams {
            w_x: self.uniform(format!("{name}.w_x"), group, &[input, 3 * hidden], k),
            w_h: self.uniform(format!("{name}.w_h"), group, &[hidden, 3 * hidden], k),
            b_x: self.uniform(format!("{name}.b_x"), group, &[3 * hidden], k),
            b_h: self.uniform(format!("{name}.b_h"), group, &[3 * hidden], k),
        }
    }

    fn linear(&mut self, name: &str, group: Group, input: usize, output: usize) -> (ParamId, ParamId) {
        let k = 1.0 / (input as f64).sqrt();
        (
            self.uniform(format!("{name}.w"), group, &[input, output], k),
            self.uniform(format!("{name}.b"), group, &[output], k),
        )
    }
}

impl Model {
    /// Fresh parameters. Embedding rows come from `embeddings` where the
    /// token is present (vectors must have `config.emb_dim` components);
    /// other rows are drawn at random and the padding row is zero.
    pub fn new(config: ModelConfig, vocab: Vocabulary, embeddings: Option<&Embeddings>, seed: u64) -> Result<Self> {
        config.validate()?;
        if let Some(e) = embeddings {
            if !e.vectors.is_empty() && e.dim != config.emb_dim {
                return Err(Error::Config(format!(
                    "embedding file has dimension {}, model expects {}",
                    e.dim, config.emb_dim
                )));
            }
        }
        let mut store = ParamStore::new();
        let mut init = Init {
            store: &mut store,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        let (v, e, h) = (vocab.len(), config.emb_dim, config.hidden);
        let c = config.context_dim();

        let mut table = Vec::with_capacity(v * e);
        for (id, token) in vocab.tokens().iter().enumerate() {
            match embeddings.and_then(|emb| emb.get(token)) {
                _ if id == PAD => table.extend(std::iter::repeat(0.0).take(e)),
                Some(row) => table.extend_from_slice(row),
                None => table.extend((0..e).map(|_| 0.1 * init.rng.sample::<f64, _>(StandardNormal))),
            }
        }
        let table = Tensor::new(vec![v, e], table)?;
        let embedding = init.store.add("embedding", Group::StaticEmbedding, table.clone());

        let encoder = (0..config.encoder_layers)
            .map(|l| {
                let input = if l == 0 { e } else { c };
                [
                    init.gru(&format!("enc.l{l}.fwd"), Group::Encoder, input, h),
                    init.gru(&format!("enc.l{l}.bwd"), Group::Encoder, input, h),
                ]
            })
            .collect();

        let decoder = |which: Decoder, init: &mut Init| -> DecoderParams {
            let group = which.group();
            let p = which.prefix();
            let embedding = if config.tie_decoder_embeddings {
                embedding
            } else {
                init.store.add(format!("{p}.embedding"), group, table.clone())
            };
            let layers = (0..config.decoder_layers)
                .map(|l| {
                    let input = if l == 0 { e + c } else { h };
                    init.gru(&format!("{p}.l{l}"), group, input, h)
                })
                .collect();
            let init_proj = (0..config.decoder_layers)
                .map(|l| init.linear(&format!("{p}.init{l}"), group, c, h))
                .collect();
            let attention = match config.attention {
                AttentionKind::Bilinear => {
                    let k = 1.0 / (c as f64).sqrt();
                    AttentionParams::Bilinear {
                        w: init.uniform(format!("{p}.attn.w"), group, &[c, h], k),
                    }
                }
                AttentionKind::Additive => {
                    let a = config.attention_dim;
                    AttentionParams::Additive {
                        w_k: init.uniform(format!("{p}.attn.w_k"), group, &[c, a], 1.0 / (c as f64).sqrt()),
                        w_q: init.uniform(format!("{p}.attn.w_q"), group, &[h, a], 1.0 / (h as f64).sqrt()),
                        v: init.uniform(format!("{p}.attn.v"), group, &[a, 1], 1.0 / (a as f64).sqrt()),
                    }
                }
            };
            let k = 1.0 / ((h + c) as f64).sqrt();
            let w_out = init.uniform(format!("{p}.out.w"), group, &[h + c, v], k);
            let b_out = init.zeros(format!("{p}.out.b"), group, &[v]);
            DecoderParams {
                embedding,
                layers,
                init: init_proj,
                attention,
                w_out,
                b_out,
            }
        };
        let simple = decoder(Decoder::Simple, &mut init);
        let complex = decoder(Decoder::Complex, &mut init);

        let f = config.cnn_filters;
        let convs = config
            .cnn_widths
            .iter()
            .map(|&w| {
                let k = 1.0 / ((w * c) as f64).sqrt();
                let weight = init.uniform(format!("critic.conv{w}.w"), Group::CriticConv, &[w * c, f], k);
                let bias = init.uniform(format!("critic.conv{w}.b"), Group::CriticConv, &[f], k);
                (w, weight, bias)
            })
            .collect();
        let features = f * config.cnn_widths.len();
        let d_head = init.linear("critic.d_head", Group::DiscriminatorHead, features, 1);
        let c_head = init.linear("critic.c_head", Group::ClassifierHead, features, 1);

        let ids = ModelParams {
            embedding,
            encoder,
            simple,
            complex,
            critic: CriticParams { convs, d_head, c_head },
        };
        Ok(Self {
            config,
            vocab,
            store,
            ids,
        })
    }

    pub(crate) fn decoder_params(&self, which: Decoder) -> &DecoderParams {
        match which {
            Decoder::Simple => &self.ids.simple,
            Decoder::Complex => &self.ids.complex,
        }
    }

    /// Parameters of the convolution stack shared by both critic heads.
    pub fn critic_conv_params(&self) -> Vec<ParamId> {
        self.ids.critic.convs.iter().flat_map(|&(_, w, b)| [w, b]).collect()
    }

    /// `(weight, bias)` of a critic head.
    pub fn head_params(&self, head: Head) -> (ParamId, ParamId) {
        match head {
            Head::Discriminator => self.ids.critic.d_head,
            Head::Classifier => self.ids.critic.c_head,
        }
    }

    pub fn static_embedding(&self) -> ParamId {
        self.ids.embedding
    }

    pub fn decoder_embedding(&self, which: Decoder) -> ParamId {
        self.decoder_params(which).embedding
    }

    /// Maximum free-running length for a source of `n` tokens.
    pub fn max_decode_len(n: usize) -> usize {
        n * 3 / 2 + 5
    }
}
