use proptest::prelude::*;

use unfold_ee::autodiff::{grad_check, softmax_rows, value_and_grad, AdError, Tape, Tensor, Var};

fn tensor(rows: usize, cols: usize, lo: f64, hi: f64) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(lo..hi, rows * cols).prop_map(move |d| Tensor::new(rows, cols, d).unwrap())
}

type Unary = fn(&mut Tape, Var) -> Result<Var, AdError>;

fn unaries() -> Vec<(&'static str, Unary)> {
    vec![
        ("square", |t, x| t.square(x)),
        ("sqrt", |t, x| t.sqrt(x)),
        ("log2", |t, x| t.log2(x)),
        ("exp", |t, x| Ok(t.exp(x))),
        ("sigmoid", |t, x| Ok(t.sigmoid(x))),
        ("neg", |t, x| Ok(t.neg(x))),
        ("scale", |t, x| Ok(t.scale(x, -2.5))),
        ("softmax", |t, x| Ok(t.softmax(x))),
        ("transpose", |t, x| t.transpose(x)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn primitives_match_central_differences(
        x in tensor(2, 3, 0.2, 2.0),
        w in tensor(2, 3, -1.0, 1.0),
    ) {
        for (name, op) in unaries() {
            // Contract with a fixed weight so every output entry matters.
            let f = move |t: &mut Tape, v: &[Var]| {
                let y = op(t, v[0])?;
                let y = t.reshape(y, 2, 3)?;
                let p = t.mul(y, v[1])?;
                Ok(t.sum(p))
            };
            let err = grad_check(&f, &[x.clone(), w.clone()], 1e-6).unwrap();
            prop_assert!(err < 1e-5, "{name}: {err}");
        }
    }

    #[test]
    fn binary_ops_and_matmul_match_central_differences(
        a in tensor(3, 2, 0.5, 2.0),
        b in tensor(3, 2, 0.5, 2.0),
        c in tensor(2, 4, -1.0, 1.0),
    ) {
        let f = |t: &mut Tape, v: &[Var]| {
            let s = t.add(v[0], v[1])?;
            let d = t.sub(v[0], v[1])?;
            let q = t.div(s, v[1])?;
            let p = t.mul(q, d)?;
            let m = t.matmul(p, v[2])?;
            let both = t.concat_cols(&[m, p])?;
            let r = t.relu(both);
            Ok(t.sum(r))
        };
        let err = grad_check(&f, &[a, b, c], 1e-6).unwrap();
        prop_assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn gradients_are_linear(
        x in tensor(2, 2, 0.2, 2.0),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let f1 = |t: &mut Tape, v: &[Var]| {
            let y = t.exp(v[0]);
            Ok(t.sum(y))
        };
        let f2 = |t: &mut Tape, v: &[Var]| {
            let y = t.log2(v[0])?;
            Ok(t.sum(y))
        };
        let both = move |t: &mut Tape, v: &[Var]| {
            let p = f1(t, v)?;
            let q = f2(t, v)?;
            let p = t.scale(p, a);
            let q = t.scale(q, b);
            t.add(p, q)
        };
        let (_, g1) = value_and_grad(&f1, std::slice::from_ref(&x)).unwrap();
        let (_, g2) = value_and_grad(&f2, std::slice::from_ref(&x)).unwrap();
        let (_, g) = value_and_grad(&both, std::slice::from_ref(&x)).unwrap();
        for i in 0..x.len() {
            let expect = a * g1[0].data()[i] + b * g2[0].data()[i];
            prop_assert!((g[0].data()[i] - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn softmax_backward_sums_to_zero(
        x in tensor(3, 4, -5.0, 5.0),
        w in tensor(3, 4, -2.0, 2.0),
    ) {
        let f = |t: &mut Tape, v: &[Var]| {
            let s = t.softmax(v[0]);
            let p = t.mul(s, v[1])?;
            Ok(t.sum(p))
        };
        let (_, g) = value_and_grad(&f, &[x.clone(), w]).unwrap();
        for r in 0..3 {
            let row: f64 = (0..4).map(|c| g[0].get(r, c)).sum();
            prop_assert!(row.abs() < 1e-12);
        }
        let s = softmax_rows(&x);
        for r in 0..3 {
            let total: f64 = (0..4).map(|c| s.get(r, c)).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn domain_errors_are_reported() {
    let mut t = Tape::new();
    let x = t.input(Tensor::scalar(-1.0));
    assert!(matches!(t.sqrt(x), Err(AdError::Domain { .. })));
    assert!(matches!(t.log2(x), Err(AdError::Domain { .. })));
}

#[test]
fn backward_needs_a_scalar() {
    let mut t = Tape::new();
    let x = t.input(Tensor::zeros(2, 1));
    assert!(t.backward(x).is_err());
    assert!(t.grad(x).is_err());
}
