//! Training objectives: reconstruction, denoising, adversarial,
//! diversification and labeled cross-entropy.
//!
//! Builders that take a [`Session`] add their loss to that session's graph;
//! which parameters receive gradients is decided by the session's trainable
//! groups. The paired critic/generator functions run each loss in its own
//! session so the critic term never reaches the generator and vice versa.

mod noise;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{DecodeMode, Decoded, Decoder, Encoded, Head, Model, Trace};
use crate::params::{Gradients, GroupSet, Session};
use crate::tensor::{NodeId, Tensor};
use crate::text::EOS;

pub use noise::{bigram_swap, noise, SWAP_PROB};

/// Floor applied to every probability before taking its log.
pub const EPSILON: f64 = 1e-7;

/// `ids` followed by the end-of-sentence marker.
pub fn with_eos(ids: &[usize]) -> Vec<usize> {
    let mut v = Vec::with_capacity(ids.len() + 1);
    v.extend_from_slice(ids);
    v.push(EOS);
    v
}

fn require_batch(batch: &[Vec<usize>], what: &str) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::EmptyInput(format!("{what} batch is empty")));
    }
    Ok(())
}

/// Mean over sentences of the per-token negative log-likelihood of
/// `targets` under a teacher-forced decode.
pub fn sequence_nll(sess: &mut Session, decoded: &Decoded, targets: &[Vec<usize>], eps: f64) -> Result<NodeId> {
    let b = targets.len();
    let t_max = decoded.steps.len();
    let mut picks = Vec::with_capacity(t_max);
    let mut weights = Vec::with_capacity(t_max * b);
    for (t, step) in decoded.steps.iter().enumerate() {
        let idx: Vec<usize> = targets.iter().map(|s| s.get(t).copied().unwrap_or(0)).collect();
        picks.push(sess.graph.pick(step.probs, &idx)?);
        weights.extend(
            targets
                .iter()
                .map(|s| if t < s.len() { 1.0 / (s.len() * b) as f64 } else { 0.0 }),
        );
    }
    let g = &mut sess.graph;
    let all = if picks.len() == 1 { picks[0] } else { g.concat(&picks, 0)? };
    let logs = g.ln_clamped(all, eps)?;
    let w = g.input(Tensor::vector(weights));
    let weighted = g.mul(logs, w)?;
    let total = g.sum(weighted)?;
    g.scale(total, -1.0)
}

/// `-log P(targets | encoded source)` through one decoder, teacher-forced,
/// with an end marker appended to every target.
pub fn decoder_nll(
    model: &Model,
    sess: &mut Session,
    which: Decoder,
    enc: &Encoded,
    targets: &[Vec<usize>],
    eps: f64,
) -> Result<NodeId> {
    let targets: Vec<Vec<usize>> = targets.iter().map(|t| with_eos(t)).collect();
    let dec = model.decode(sess, which, enc, DecodeMode::TeacherForced(&targets))?;
    sequence_nll(sess, &dec, &targets, eps)
}

/// Encodes `inputs` and scores `targets` through `which`.
pub fn transduction_nll(
    model: &Model,
    sess: &mut Session,
    which: Decoder,
    inputs: &[Vec<usize>],
    targets: &[Vec<usize>],
    eps: f64,
) -> Result<NodeId> {
    let enc = model.encode(sess, inputs)?;
    decoder_nll(model, sess, which, &enc, targets, eps)
}

/// `L_rec`: each simple sentence reconstructed through `G_s`, each complex
/// one through `G_d`.
pub fn reconstruction_loss(
    model: &Model,
    sess: &mut Session,
    simple: &[Vec<usize>],
    complex: &[Vec<usize>],
    eps: f64,
) -> Result<NodeId> {
    require_batch(simple, "simple")?;
    require_batch(complex, "complex")?;
    let ls = transduction_nll(model, sess, Decoder::Simple, simple, simple, eps)?;
    let ld = transduction_nll(model, sess, Decoder::Complex, complex, complex, eps)?;
    sess.graph.add(ls, ld)
}

/// Bigram-swaps every sentence of `batch` with one generator.
pub fn noisy_batch(batch: &[Vec<usize>], rng: &mut ChaCha8Rng, swap_prob: f64) -> Vec<Vec<usize>> {
    batch.iter().map(|s| bigram_swap(s, rng, swap_prob)).collect()
}

/// `L_denoi`: as [`reconstruction_loss`] but each sentence is encoded after
/// bigram-swap noise drawn from `seed` (simple batch first).
pub fn denoising_loss(
    model: &Model,
    sess: &mut Session,
    simple: &[Vec<usize>],
    complex: &[Vec<usize>],
    seed: u64,
    swap_prob: f64,
    eps: f64,
) -> Result<NodeId> {
    require_batch(simple, "simple")?;
    require_batch(complex, "complex")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noisy_s = noisy_batch(simple, &mut rng, swap_prob);
    let noisy_d = noisy_batch(complex, &mut rng, swap_prob);
    let ls = transduction_nll(model, sess, Decoder::Simple, &noisy_s, simple, eps)?;
    let ld = transduction_nll(model, sess, Decoder::Complex, &noisy_d, complex, eps)?;
    sess.graph.add(ls, ld)
}

/// The two halves of `L_cross` over labeled `(complex, simple)` pairs:
/// `-log P_Gs(simple | complex)` and `-log P_Gd(complex | simple)`.
pub fn cross_entropy_terms(
    model: &Model,
    sess: &mut Session,
    pairs: &[(Vec<usize>, Vec<usize>)],
    eps: f64,
) -> Result<(NodeId, NodeId)> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("labeled pair batch is empty".into()));
    }
    let complex: Vec<Vec<usize>> = pairs.iter().map(|p| p.0.clone()).collect();
    let simple: Vec<Vec<usize>> = pairs.iter().map(|p| p.1.clone()).collect();
    let to_simple = transduction_nll(model, sess, Decoder::Simple, &complex, &simple, eps)?;
    let to_complex = transduction_nll(model, sess, Decoder::Complex, &simple, &complex, eps)?;
    Ok((to_simple, to_complex))
}

/// `L_cross`, both halves summed.
pub fn cross_entropy_loss(
    model: &Model,
    sess: &mut Session,
    pairs: &[(Vec<usize>, Vec<usize>)],
    eps: f64,
) -> Result<NodeId> {
    let (a, b) = cross_entropy_terms(model, sess, pairs, eps)?;
    sess.graph.add(a, b)
}

/// `-mean log p` over a `[B]` probability node.
pub fn neg_mean_log(sess: &mut Session, p: NodeId, eps: f64) -> Result<NodeId> {
    let g = &mut sess.graph;
    let l = g.ln_clamped(p, eps)?;
    let m = g.mean(l)?;
    g.scale(m, -1.0)
}

/// `-mean log (1 - p)` over a `[B]` probability node.
pub fn neg_mean_log_complement(sess: &mut Session, p: NodeId, eps: f64) -> Result<NodeId> {
    let q = sess.graph.affine(p, -1.0, 1.0)?;
    neg_mean_log(sess, q, eps)
}

/// Length cap for free-running decodes of each source.
pub fn decode_caps(batch: &[Vec<usize>]) -> Vec<usize> {
    batch.iter().map(|s| Model::max_decode_len(s.len())).collect()
}

/// `A_s(X)` for sources without a simple target: greedy free-running
/// decode through `G_s`.
pub fn free_running_trace(model: &Model, sess: &mut Session, enc: &Encoded, batch: &[Vec<usize>]) -> Result<Trace> {
    let caps = decode_caps(batch);
    let dec = model.decode(sess, Decoder::Simple, enc, DecodeMode::FreeRunning(&caps))?;
    model.trace(sess, &dec)
}

/// Teacher-forced self-reconstruction trace through `which`.
pub fn self_trace(model: &Model, sess: &mut Session, which: Decoder, enc: &Encoded, batch: &[Vec<usize>]) -> Result<Trace> {
    let targets: Vec<Vec<usize>> = batch.iter().map(|t| with_eos(t)).collect();
    let dec = model.decode(sess, which, enc, DecodeMode::TeacherForced(&targets))?;
    model.trace(sess, &dec)
}

/// The three traces the critic losses compare.
pub struct CriticTraces {
    /// `A_s(X_s)`: simple sentences through `G_s`, teacher-forced.
    pub simple_via_gs: Trace,
    /// `A_s(X_d)`: complex sentences through `G_s`, free-running.
    pub complex_via_gs: Trace,
    /// `A_d(X_d)`: complex sentences through `G_d`, teacher-forced.
    pub complex_via_gd: Trace,
}

impl CriticTraces {
    pub fn build(model: &Model, sess: &mut Session, simple: &[Vec<usize>], complex: &[Vec<usize>]) -> Result<Self> {
        require_batch(simple, "simple")?;
        require_batch(complex, "complex")?;
        let enc_s = model.encode(sess, simple)?;
        let enc_d = model.encode(sess, complex)?;
        Ok(Self {
            simple_via_gs: self_trace(model, sess, Decoder::Simple, &enc_s, simple)?,
            complex_via_gs: free_running_trace(model, sess, &enc_d, complex)?,
            complex_via_gd: self_trace(model, sess, Decoder::Complex, &enc_d, complex)?,
        })
    }
}

/// `(L_adv,D, L_div,C)`:
/// `-mean log D(A_s(X_s)) - mean log(1 - D(A_s(X_d)))` and
/// `-mean log C(A_s(X_s)) - mean log(1 - C(A_d(X_d)))`.
pub fn critic_losses(model: &Model, sess: &mut Session, traces: &CriticTraces, eps: f64) -> Result<(NodeId, NodeId)> {
    let f_ss = model.critic_features(sess, &traces.simple_via_gs)?;
    let f_sd = model.critic_features(sess, &traces.complex_via_gs)?;
    let f_dd = model.critic_features(sess, &traces.complex_via_gd)?;
    let d_real = model.critic_head(sess, Head::Discriminator, f_ss)?;
    let d_fake = model.critic_head(sess, Head::Discriminator, f_sd)?;
    let c_s = model.critic_head(sess, Head::Classifier, f_ss)?;
    let c_d = model.critic_head(sess, Head::Classifier, f_dd)?;
    let a = neg_mean_log(sess, d_real, eps)?;
    let b = neg_mean_log_complement(sess, d_fake, eps)?;
    let adv = sess.graph.add(a, b)?;
    let a = neg_mean_log(sess, c_s, eps)?;
    let b = neg_mean_log_complement(sess, c_d, eps)?;
    let div = sess.graph.add(a, b)?;
    Ok((adv, div))
}

/// `(L_adv,Gs, L_div,Gs)`: `-mean log D(A_s(X_d))` and `-mean log C(A_s(X_d))`.
pub fn generator_terms(model: &Model, sess: &mut Session, complex_via_gs: &Trace, eps: f64) -> Result<(NodeId, NodeId)> {
    let f = model.critic_features(sess, complex_via_gs)?;
    let d = model.critic_head(sess, Head::Discriminator, f)?;
    let c = model.critic_head(sess, Head::Classifier, f)?;
    Ok((neg_mean_log(sess, d, eps)?, neg_mean_log(sess, c, eps)?))
}

/// A loss value with the gradients it produced.
#[derive(Clone, Debug)]
pub struct Evaluated {
    pub value: f64,
    pub grads: Gradients,
}

fn evaluate(
    model: &Model,
    groups: GroupSet,
    build: impl FnOnce(&mut Session) -> Result<NodeId>,
) -> Result<Evaluated> {
    let mut sess = Session::new(&model.store, groups);
    let root = build(&mut sess)?;
    let value = sess.scalar(root)?;
    let grads = sess.backward(root)?;
    Ok(Evaluated { value, grads })
}

/// `(L_adv,D, L_adv,Gs)`, the first differentiated only with respect to
/// `θ_D` and the second only with respect to `θ_E, θ_Gs`.
pub fn adversarial_losses(
    model: &Model,
    simple: &[Vec<usize>],
    complex: &[Vec<usize>],
    eps: f64,
) -> Result<(Evaluated, Evaluated)> {
    let critic = evaluate(model, GroupSet::discriminator(), |sess| {
        let traces = CriticTraces::build(model, sess, simple, complex)?;
        Ok(critic_losses(model, sess, &traces, eps)?.0)
    })?;
    let generator = evaluate(model, GroupSet::simple_path(), |sess| {
        require_batch(simple, "simple")?;
        require_batch(complex, "complex")?;
        let enc = model.encode(sess, complex)?;
        let trace = free_running_trace(model, sess, &enc, complex)?;
        Ok(generator_terms(model, sess, &trace, eps)?.0)
    })?;
    Ok((critic, generator))
}

/// `(L_div,C, L_div,Gs)`, the first differentiated only with respect to
/// `θ_C` and the second only with respect to `θ_E, θ_Gs`.
pub fn diversification_losses(
    model: &Model,
    simple: &[Vec<usize>],
    complex: &[Vec<usize>],
    eps: f64,
) -> Result<(Evaluated, Evaluated)> {
    let critic = evaluate(model, GroupSet::classifier(), |sess| {
        let traces = CriticTraces::build(model, sess, simple, complex)?;
        Ok(critic_losses(model, sess, &traces, eps)?.1)
    })?;
    let generator = evaluate(model, GroupSet::simple_path(), |sess| {
        require_batch(simple, "simple")?;
        require_batch(complex, "complex")?;
        let enc = model.encode(sess, complex)?;
        let trace = free_running_trace(model, sess, &enc, complex)?;
        Ok(generator_terms(model, sess, &trace, eps)?.1)
    })?;
    Ok((critic, generator))
}

fn clamped_ln(p: f64, eps: f64) -> f64 {
    p.max(eps).ln()
}

/// Critic and generator loss values from given critic outputs on real
/// (simple-domain) and fake (complex-input) traces:
/// `(-mean ln p_real - mean ln(1 - p_fake), -mean ln p_fake)`.
pub fn critic_pair_from_probs(real: &[f64], fake: &[f64], eps: f64) -> Result<(f64, f64)> {
    if real.is_empty() || fake.is_empty() {
        return Err(Error::EmptyInput("critic outputs are empty".into()));
    }
    let mean = |xs: &[f64], f: &dyn Fn(f64) -> f64| xs.iter().map(|&x| f(x)).sum::<f64>() / xs.len() as f64;
    let critic = -mean(real, &|p| clamped_ln(p, eps)) - mean(fake, &|p| clamped_ln(1.0 - p, eps));
    let generator = -mean(fake, &|p| clamped_ln(p, eps));
    Ok((critic, generator))
}

/// Token-mean negative log-likelihood of given target probabilities, one
/// slice per sentence, averaged over sentences.
pub fn nll_from_probs(per_sentence: &[Vec<f64>], eps: f64) -> Result<f64> {
    if per_sentence.is_empty() || per_sentence.iter().any(Vec::is_empty) {
        return Err(Error::EmptyInput("no target probabilities".into()));
    }
    let total: f64 = per_sentence
        .iter()
        .map(|s| -s.iter().map(|&p| clamped_ln(p, eps)).sum::<f64>() / s.len() as f64)
        .sum();
    Ok(total / per_sentence.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::params::GroupSet;
    use crate::text::{tokenize, Vocabulary};

    fn toy() -> Model {
        let vocab = Vocabulary::build([&tokenize("a b c d e f g h").unwrap()], 100);
        let cfg = ModelConfig {
            emb_dim: 4,
            hidden: 3,
            cnn_filters: 2,
            ..ModelConfig::desk()
        };
        Model::new(cfg, vocab, None, 17).unwrap()
    }

    fn batches() -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
        (vec![vec![4, 5, 6], vec![7, 8]], vec![vec![9, 10, 11, 4], vec![5]])
    }

    #[test]
    fn closed_form_critic_values() {
        let (d, g) = critic_pair_from_probs(&[0.5; 3], &[0.5; 4], EPSILON).unwrap();
        assert!((d - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert!((g - 2f64.ln()).abs() < 1e-12);
        let (d, _) = critic_pair_from_probs(&[0.8], &[0.3], EPSILON).unwrap();
        assert!((d - (-(0.8f64).ln() - (0.7f64).ln())).abs() < 1e-12);
        assert!((d - 0.5798).abs() < 1e-4);
        let (c, _) = critic_pair_from_probs(&[0.9], &[0.2], EPSILON).unwrap();
        assert!((c - 0.3285).abs() < 1e-4);
        let (perfect, winner) = critic_pair_from_probs(&[1.0], &[0.0], EPSILON).unwrap();
        assert_eq!(perfect, 0.0);
        assert!((winner + EPSILON.ln()).abs() < 1e-9);
        let (_, won) = critic_pair_from_probs(&[0.5], &[1.0], EPSILON).unwrap();
        assert_eq!(won, 0.0);
    }

    #[test]
    fn clamp_bounds_the_loss() {
        let (d, g) = critic_pair_from_probs(&[0.0], &[1.0], EPSILON).unwrap();
        assert!(d <= -2.0 * EPSILON.ln() + 1e-9);
        assert!(g >= 0.0);
        assert_eq!(nll_from_probs(&[vec![1.0, 1.0]], EPSILON).unwrap(), 0.0);
        let uniform = nll_from_probs(&[vec![0.125; 3], vec![0.125; 5]], EPSILON).unwrap();
        assert!((uniform - 8f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn losses_are_non_negative_and_finite() {
        let m = toy();
        let (s, d) = batches();
        let mut sess = Session::frozen(&m.store);
        for root in [
            reconstruction_loss(&m, &mut sess, &s, &d, EPSILON).unwrap(),
            denoising_loss(&m, &mut sess, &s, &d, 3, SWAP_PROB, EPSILON).unwrap(),
            cross_entropy_loss(&m, &mut sess, &[(d[0].clone(), s[0].clone())], EPSILON).unwrap(),
        ] {
            let v = sess.scalar(root).unwrap();
            assert!(v.is_finite() && v >= 0.0);
        }
    }

    #[test]
    fn zero_noise_denoising_equals_reconstruction_bitwise() {
        let m = toy();
        let (s, d) = batches();
        let mut sess = Session::frozen(&m.store);
        let rec = reconstruction_loss(&m, &mut sess, &s, &d, EPSILON).unwrap();
        let den = denoising_loss(&m, &mut sess, &s, &d, 5, 0.0, EPSILON).unwrap();
        assert_eq!(sess.scalar(rec).unwrap().to_bits(), sess.scalar(den).unwrap().to_bits());
    }

    #[test]
    fn cross_entropy_on_identity_pairs_is_reconstruction() {
        let m = toy();
        let (s, _) = batches();
        let pairs: Vec<_> = s.iter().map(|x| (x.clone(), x.clone())).collect();
        let mut sess = Session::frozen(&m.store);
        let rec = reconstruction_loss(&m, &mut sess, &s, &s, EPSILON).unwrap();
        let cross = cross_entropy_loss(&m, &mut sess, &pairs, EPSILON).unwrap();
        assert_eq!(sess.scalar(rec).unwrap().to_bits(), sess.scalar(cross).unwrap().to_bits());
    }

    #[test]
    fn empty_batches_are_errors() {
        let m = toy();
        let (s, _) = batches();
        let mut sess = Session::frozen(&m.store);
        assert!(reconstruction_loss(&m, &mut sess, &s, &[], EPSILON).is_err());
        assert!(cross_entropy_loss(&m, &mut sess, &[], EPSILON).is_err());
        assert!(adversarial_losses(&m, &[], &s, EPSILON).is_err());
    }

    #[test]
    fn batch_order_does_not_matter() {
        let m = toy();
        let (s, d) = batches();
        let rev = |b: &Vec<Vec<usize>>| b.iter().rev().cloned().collect::<Vec<_>>();
        let mut sess = Session::frozen(&m.store);
        let a = reconstruction_loss(&m, &mut sess, &s, &d, EPSILON).unwrap();
        let b = reconstruction_loss(&m, &mut sess, &rev(&s), &rev(&d), EPSILON).unwrap();
        assert!((sess.scalar(a).unwrap() - sess.scalar(b).unwrap()).abs() < 1e-12);
    }

    fn groups_with_nonzero_grads(m: &Model, grads: &Gradients) -> GroupSet {
        let mut set = GroupSet::EMPTY;
        for (id, g) in grads.iter() {
            if g.iter().any(|&x| x != 0.0) {
                set = set.with(m.store.get(id).group);
            }
        }
        set
    }

    #[test]
    fn stop_gradient_contract() {
        let m = toy();
        let (s, d) = batches();
        let (adv_d, adv_g) = adversarial_losses(&m, &s, &d, EPSILON).unwrap();
        let (div_c, div_g) = diversification_losses(&m, &s, &d, EPSILON).unwrap();
        assert_eq!(groups_with_nonzero_grads(&m, &adv_d.grads), GroupSet::discriminator());
        assert_eq!(groups_with_nonzero_grads(&m, &div_c.grads), GroupSet::classifier());
        let gen = GroupSet::simple_path();
        assert_eq!(groups_with_nonzero_grads(&m, &adv_g.grads), gen);
        assert_eq!(groups_with_nonzero_grads(&m, &div_g.grads), gen);
        for e in [&adv_d, &adv_g, &div_c, &div_g] {
            assert!(e.value.is_finite() && e.value >= 0.0);
        }
    }
}
