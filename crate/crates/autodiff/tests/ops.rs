use hytl_autodiff::{AutodiffError, Tape, Tensor};

#[test]
fn softmax_of_zeros_is_uniform() {
    let tape = Tape::new();
    let x = tape.constant(vec![0.0; 3], &[3]);
    let y = x.softmax(0).unwrap().value();
    for v in y {
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }
}

#[test]
fn softmax_is_shift_stable() {
    let tape = Tape::new();
    let x = tape.constant(vec![1000.0, 1001.0, 999.0, -5.0, 0.0, 5.0], &[2, 3]);
    let y = x.softmax(1).unwrap().value();
    assert!(y.iter().all(|v| v.is_finite()));
    for row in y.chunks(3) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn layernorm_normalizes_rows() {
    let tape = Tape::new();
    let x = tape.constant(vec![3.0, -1.0, 7.5, 0.25, 10.0, 11.0, 12.0, 13.0], &[2, 4]);
    let g = tape.constant(vec![1.0; 4], &[4]);
    let b = tape.constant(vec![0.0; 4], &[4]);
    let y = x.layernorm(g, b, 1e-12).unwrap().value();
    for row in y.chunks(4) {
        let mean = row.iter().sum::<f64>() / 4.0;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-9);
        assert!((var - 1.0).abs() < 1e-9);
    }
}

#[test]
fn layernorm_rejects_nonpositive_eps() {
    let tape = Tape::new();
    let x = tape.constant(vec![1.0, 2.0], &[2]);
    let g = tape.constant(vec![1.0; 2], &[2]);
    assert!(matches!(
        x.layernorm(g, g, 0.0),
        Err(AutodiffError::InvalidArgument { .. })
    ));
}

#[test]
fn identity_matmul() {
    let tape = Tape::new();
    let a: Vec<f64> = (0..16).map(|i| (i as f64 * 0.37).sin()).collect();
    let mut eye = vec![0.0; 16];
    for i in 0..4 {
        eye[i * 5] = 1.0;
    }
    let y = tape
        .constant(eye, &[4, 4])
        .matmul(tape.constant(a.clone(), &[4, 4]))
        .unwrap();
    assert_eq!(y.value(), a);
}

#[test]
fn shape_mismatch_reports_both_shapes() {
    let tape = Tape::new();
    let a = tape.constant(vec![0.0; 6], &[2, 3]);
    let b = tape.constant(vec![0.0; 6], &[2, 3]);
    let err = a.matmul(b).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("[2, 3] vs [2, 3]"), "{msg}");
    let c = tape.constant(vec![0.0; 4], &[4]);
    let msg = a.add(c).unwrap_err().to_string();
    assert!(msg.contains("[2, 3]") && msg.contains("[4]"), "{msg}");
}

#[test]
fn tanh_derivative_at_zero_is_one() {
    let tape = Tape::new();
    let x = tape.variable(vec![0.0], &[1]);
    let y = x.tanh().sum_all();
    let g = tape.backward(y).unwrap();
    assert_eq!(g.get(x).unwrap(), &[1.0]);
}

#[test]
fn product_rule() {
    let tape = Tape::new();
    let x = tape.variable(vec![2.0], &[1]);
    let y = tape.variable(vec![3.0], &[1]);
    let z = x.mul(y).unwrap().sum_all();
    let g = tape.backward(z).unwrap();
    assert_eq!(g.get(x).unwrap(), &[3.0]);
    assert_eq!(g.get(y).unwrap(), &[2.0]);
}

#[test]
fn non_scalar_loss_is_rejected() {
    let tape = Tape::new();
    let x = tape.variable(vec![1.0, 2.0], &[2]);
    assert!(matches!(
        tape.backward(x.square()),
        Err(AutodiffError::NotScalarLoss(_))
    ));
}

#[test]
fn shared_subexpression_accumulates() {
    // y = x² + x² → dy/dx = 4x
    let tape = Tape::new();
    let x = tape.variable(vec![1.5], &[1]);
    let s = x.square();
    let y = s.add(s).unwrap().sum_all();
    let g = tape.backward(y).unwrap();
    assert_eq!(g.get(x).unwrap(), &[6.0]);
}

#[test]
fn constants_get_no_gradient() {
    let tape = Tape::new();
    let c = tape.constant(vec![1.0, 2.0], &[2]);
    let x = tape.variable(vec![0.5, 0.5], &[2]);
    let y = c.mul(x).unwrap().sum_all();
    let g = tape.backward(y).unwrap();
    assert!(g.get(c).is_none());
    let detached = x.detach();
    let z = detached.square().sum_all();
    let g = tape.backward(z).unwrap();
    assert!(g.get(x).is_none());
}

#[test]
fn concat_slice_gather_shapes() {
    let tape = Tape::new();
    let a = tape.constant((0..6).map(f64::from).collect(), &[2, 3]);
    let b = tape.constant(vec![9.0, 9.0], &[2, 1]);
    let c = Tensor::concat(&[a, b], 1).unwrap();
    assert_eq!(c.dims(), vec![2, 4]);
    assert_eq!(c.value(), vec![0.0, 1.0, 2.0, 9.0, 3.0, 4.0, 5.0, 9.0]);
    let s = c.slice(1, 1, 2).unwrap();
    assert_eq!(s.value(), vec![1.0, 2.0, 4.0, 5.0]);
    let g = a.gather_rows(&[1, 1, 0]).unwrap();
    assert_eq!(g.dims(), vec![3, 3]);
    assert_eq!(&g.value()[..3], &[3.0, 4.0, 5.0]);
    assert!(a.gather_rows(&[2]).is_err());
    let rank3 = tape.constant(vec![0.0; 24], &[2, 3, 4]);
    assert_eq!(rank3.sum(1).unwrap().dims(), vec![2, 4]);
    assert_eq!(rank3.mean(2).unwrap().dims(), vec![2, 3]);
}

#[test]
fn replay_is_bit_identical() {
    let run = || {
        let tape = Tape::new();
        let x = tape.variable((0..12).map(|i| (i as f64).cos()).collect(), &[3, 4]);
        let w = tape.variable((0..8).map(|i| (i as f64 * 0.3).sin()).collect(), &[4, 2]);
        let h = x.matmul(w).unwrap().tanh().softmax(1).unwrap().log().mean_all();
        let g = tape.backward(h).unwrap();
        (
            h.item().to_bits(),
            g.get(w).unwrap().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        )
    };
    assert_eq!(run(), run());
}
