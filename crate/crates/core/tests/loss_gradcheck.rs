//! Every training loss differentiated end to end through encode, decode and
//! the critic, against central differences of the rebuilt loss.

use simplify_core::gradcheck::{in_session, loss_check, loss_checks, toy_batches, toy_model};
use simplify_core::losses::{self, EPSILON};
use simplify_core::model::{AttentionKind, Decoder};
use simplify_core::params::{Group, GroupSet};

const TOLERANCE: f64 = 1e-4;

fn assert_all_close(attention: AttentionKind) {
    let checks = loss_checks(attention).unwrap();
    assert_eq!(checks.len(), 8);
    for c in checks {
        assert!(c.elements > 0, "{}: no parameters checked", c.name);
        assert!(c.worst < TOLERANCE, "{}: worst relative error {:e} over {} elements", c.name, c.worst, c.elements);
    }
}

#[test]
fn toy_vocabulary_has_twelve_entries() {
    assert_eq!(toy_model(AttentionKind::Bilinear).unwrap().vocab.len(), 12);
}

#[test]
fn every_loss_matches_finite_differences_bilinear() {
    assert_all_close(AttentionKind::Bilinear);
}

#[test]
fn every_loss_matches_finite_differences_additive() {
    assert_all_close(AttentionKind::Additive);
}

#[test]
fn target_log_likelihood_gradient_reaches_simple_decoder() {
    let model = toy_model(AttentionKind::Bilinear).unwrap();
    let (tgt, src) = toy_batches();
    let loss = in_session(GroupSet::of(&[Group::SimpleDecoder]), move |m, sess| {
        let enc = m.encode(sess, &src)?;
        losses::decoder_nll(m, sess, Decoder::Simple, &enc, &tgt, EPSILON)
    });
    let grads = loss(&model).unwrap().grads;
    assert!(grads.iter().all(|(id, _)| model.store.get(id).group == Group::SimpleDecoder));
    let c = loss_check("target likelihood", &model, &loss).unwrap();
    assert!(c.elements > 0 && c.worst < TOLERANCE, "{c:?}");
}
