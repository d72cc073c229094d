use simplify_core::gradcheck::{numeric_partial, operator_checks, Sampler};
use simplify_core::tensor::{Graph, Tensor};
use simplify_core::Error;

const TRIALS: u64 = 50;
const TOLERANCE: f64 = 1e-4;

#[test]
fn every_operator_matches_finite_differences() {
    let checks = operator_checks(TRIALS).unwrap();
    assert!(checks.len() >= 20);
    for c in &checks {
        assert!(c.elements > 0, "{}: nothing compared", c.name);
        assert!(c.worst < TOLERANCE, "{}: worst relative error {:e}", c.name, c.worst);
    }
}

#[test]
fn tanh_derivative_at_zero_is_one() {
    let mut g = Graph::new();
    let x = g.leaf(Tensor::scalar(0.0));
    let y = g.tanh(x).unwrap();
    g.backward(y).unwrap();
    let analytic = g.grad(x).unwrap().data()[0];
    let numeric = numeric_partial(&mut g, y, x, 0, 1e-5).unwrap();
    assert!((analytic - 1.0).abs() < 1e-12);
    assert!((numeric - 1.0).abs() < 1e-9);
}

#[test]
fn gradient_of_linear_sum_is_the_coefficient() {
    let mut g = Graph::new();
    let x = g.leaf(Tensor::vector(vec![0.3, -1.2, 4.0]));
    let scaled = g.scale(x, 2.5).unwrap();
    let s = g.sum(scaled).unwrap();
    g.backward(s).unwrap();
    assert_eq!(g.grad(x).unwrap().data(), &[2.5, 2.5, 2.5]);
}

#[test]
fn sigmoid_of_zero_is_half() {
    let mut g = Graph::new();
    let x = g.input(Tensor::scalar(0.0));
    let y = g.sigmoid(x).unwrap();
    assert_eq!(g.value(y).item(), Some(0.5));
}

#[test]
fn identity_matmul_returns_the_operand() {
    let mut rng = Sampler::new(3);
    let mut g = Graph::new();
    let i3 = g.input(Tensor::identity(3));
    let m = rng.tensor(&[3, 3], 5.0);
    let mn = g.input(m.clone());
    let p = g.matmul(i3, mn).unwrap();
    assert_eq!(g.value(p), &m);
}

#[test]
fn softmax_of_equal_scores_is_uniform() {
    let mut g = Graph::new();
    let x = g.input(Tensor::vector(vec![1.0, 1.0, 1.0]));
    let y = g.softmax(x, 0).unwrap();
    for &p in g.value(y).data() {
        assert!((p - 1.0 / 3.0).abs() < 1e-15);
    }
}

#[test]
fn softmax_rows_are_distributions() {
    let mut rng = Sampler::new(11);
    for _ in 0..50 {
        let mut g = Graph::new();
        let x = g.input(rng.tensor(&[4, 7], 30.0));
        let y = g.softmax(x, 1).unwrap();
        for row in g.value(y).data().chunks(7) {
            assert!(row.iter().all(|&p| p >= 0.0));
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }
}

#[test]
fn evaluation_is_bitwise_deterministic() {
    let mut rng = Sampler::new(5);
    let mut g = Graph::new();
    let a = g.leaf(rng.tensor(&[4, 6], 1.0));
    let b = g.leaf(rng.tensor(&[6, 3], 1.0));
    let c = g.matmul(a, b).unwrap();
    let s = g.softmax(c, 1).unwrap();
    let l = g.ln(s).unwrap();
    let root = g.sum(l).unwrap();
    let first = g.value(root).data()[0].to_bits();
    let again = g.evaluate(root).unwrap().data()[0].to_bits();
    assert_eq!(first, again);
}

#[test]
fn shape_mismatch_names_the_node() {
    let mut g = Graph::new();
    let a = g.input(Tensor::zeros(&[2, 3]));
    let b = g.input(Tensor::zeros(&[2, 3]));
    let err = g.matmul(a, b).unwrap_err();
    match err {
        Error::Shape { node, op, .. } => {
            assert_eq!(node, 2);
            assert_eq!(op, "matmul");
        }
        other => panic!("unexpected error {other:?}"),
    }
}

#[test]
fn backward_on_non_scalar_is_a_contract_error() {
    let mut g = Graph::new();
    let a = g.leaf(Tensor::zeros(&[2, 3]));
    let t = g.tanh(a).unwrap();
    assert!(matches!(g.backward(t), Err(Error::Contract(_))));
}

#[test]
fn shared_subgraph_gradients_accumulate() {
    // y = tanh(x) used by two branches: dy = dtanh * (2 + 3)
    let mut g = Graph::new();
    let x = g.leaf(Tensor::scalar(0.4));
    let t = g.tanh(x).unwrap();
    let b1 = g.scale(t, 2.0).unwrap();
    let b2 = g.scale(t, 3.0).unwrap();
    let s = g.add(b1, b2).unwrap();
    g.backward(s).unwrap();
    let expected = 5.0 * (1.0 - 0.4f64.tanh().powi(2));
    assert!((g.grad(x).unwrap().data()[0] - expected).abs() < 1e-14);
}

#[test]
fn every_reachable_leaf_gets_a_gradient() {
    let mut g = Graph::new();
    let a = g.leaf(Tensor::vector(vec![1.0, 2.0]));
    let b = g.leaf(Tensor::vector(vec![3.0, 4.0]));
    let unused = g.leaf(Tensor::vector(vec![5.0]));
    let c = g.mul(a, b).unwrap();
    let s = g.sum(c).unwrap();
    g.backward(s).unwrap();
    assert!(g.grad(a).is_some());
    assert!(g.grad(b).is_some());
    assert!(g.grad(unused).is_none());
}
