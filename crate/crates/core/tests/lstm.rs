use polyphone_core::numcore::{grad_check, GradCheckOptions, LstmParams};
use polyphone_core::{Result, Rng, Tensor};

fn random(shape: &[usize], rng: &mut Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.uniform(-0.8, 0.8)).collect()).unwrap()
}

/// `sum(outputs ⊙ r)` over the trace of one direction.
fn weighted_output(p: &[Tensor], lengths: &[usize], reverse: bool, r: &Tensor) -> Result<f64> {
    let lstm = LstmParams::new(p[0].clone(), p[1].clone(), p[2].clone())?;
    let out = lstm.run(&p[3], lengths, reverse)?.outputs();
    Ok(out.data().iter().zip(r.data()).map(|(a, b)| a * b).sum())
}

#[test]
fn bptt_matches_finite_differences_in_both_directions() {
    let (batch, steps, d, h) = (3, 6, 4, 5);
    let lengths = [6, 2, 4];
    for reverse in [false, true] {
        let mut rng = Rng::new(21 + u64::from(reverse));
        let mut params = vec![random(&[4 * h, d], &mut rng), random(&[4 * h, h], &mut rng), random(&[4 * h], &mut rng), random(&[batch, steps, d], &mut rng)];
        let r = random(&[batch, steps, h], &mut rng);
        let lstm = LstmParams::new(params[0].clone(), params[1].clone(), params[2].clone()).unwrap();
        let trace = lstm.run(&params[3], &lengths, reverse).unwrap();
        let mut grads = lstm.zeros_like();
        let dxs = lstm.backward(&trace, &r, 0, &mut grads).unwrap();
        let analytic = vec![grads.w_x, grads.w_h, grads.b, dxs];
        let report = grad_check(&mut params, &analytic, &GradCheckOptions::default(), |p| weighted_output(p, &lengths, reverse, &r)).unwrap();
        assert!(report.max_rel_error() < 1e-6, "reverse={reverse}: {:?}", report.worst());
    }
}

#[test]
fn padded_inputs_get_no_gradient() {
    let (batch, steps, d, h) = (2, 5, 3, 4);
    let mut rng = Rng::new(8);
    let lstm = LstmParams::init(d, h, 1.0, &mut rng).unwrap();
    let xs = random(&[batch, steps, d], &mut rng);
    let r = random(&[batch, steps, h], &mut rng);
    for reverse in [false, true] {
        let trace = lstm.run(&xs, &[5, 2], reverse).unwrap();
        let dxs = lstm.backward(&trace, &r, 0, &mut lstm.zeros_like()).unwrap();
        for t in 2..steps {
            assert!(dxs.data()[(steps + t) * d..][..d].iter().all(|&v| v == 0.0));
        }
    }
}
