//! Central finite-difference gradient checks in f64.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Graph, Var};
use crate::error::Result;
use crate::tensor::Tensor;

pub type Build = dyn Fn(&mut Graph<f64>, &[Var]) -> Result<Var>;

fn loss_of(build: &Build, inputs: &[Tensor<f64>], target: &Tensor<f64>) -> f64 {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
    let y = build(&mut g, &vars).unwrap();
    let t = g.input(target.clone());
    let l = g.mse(y, t).unwrap();
    g.value(l).data()[0]
}

/// Max relative error between analytic and central-difference gradients.
pub fn max_rel_error(build: &Build, inputs: &[Tensor<f64>], seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
    let y = build(&mut g, &vars).unwrap();
    let target = Tensor::from_fn(g.shape(y), |_| rng.gen::<f64>() * 2.0 - 1.0);
    let t = g.input(target.clone());
    let l = g.mse(y, t).unwrap();
    g.backward(l).unwrap();
    let analytic: Vec<Vec<f64>> =
        vars.iter().zip(inputs).map(|(v, x)| g.grad(*v).map(|s| s.to_vec()).unwrap_or(alloc::vec![0.0; x.len()])).collect();

    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut work = inputs.to_vec();
    for (k, grads) in analytic.iter().enumerate() {
        for i in 0..inputs[k].len() {
            let orig = work[k].data()[i];
            work[k].data_mut()[i] = orig + h;
            let up = loss_of(build, &work, &target);
            work[k].data_mut()[i] = orig - h;
            let down = loss_of(build, &work, &target);
            work[k].data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = grads[i];
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((a - numeric).abs() / denom);
        }
    }
    worst
}

/// Uniform entries in [-1, 1).
pub fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.gen::<f64>() * 2.0 - 1.0)
}

pub const TOL: f64 = 1e-4;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Causality;

    #[test]
    fn conv2d_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inputs = [rand_tensor(&mut rng, &[1, 2, 6, 6]), rand_tensor(&mut rng, &[3, 2, 3, 3]), rand_tensor(&mut rng, &[3])];
        let err = max_rel_error(&|g, v| g.conv2d(v[0], v[1], v[2], 1), &inputs, 2);
        assert!(err < TOL, "{err}");
    }

    #[test]
    fn conv_transpose2d_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inputs = [rand_tensor(&mut rng, &[2, 2, 3, 3]), rand_tensor(&mut rng, &[2, 3, 5, 5]), rand_tensor(&mut rng, &[3])];
        let err = max_rel_error(&|g, v| g.conv_transpose2d(v[0], v[1], v[2], 2, 2, 1), &inputs, 4);
        assert!(err < TOL, "{err}");
    }

    #[test]
    fn maxpool_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inputs = [rand_tensor(&mut rng, &[2, 2, 4, 6])];
        let err = max_rel_error(&|g, v| g.maxpool2d(v[0]), &inputs, 6);
        assert!(err < TOL, "{err}");
    }

    #[test]
    fn conv1d_gradients_both_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let inputs = [rand_tensor(&mut rng, &[2, 3, 11]), rand_tensor(&mut rng, &[2, 3, 5]), rand_tensor(&mut rng, &[2])];
        for mode in [Causality::Causal, Causality::AntiCausal] {
            let err = max_rel_error(&move |g, v| g.conv1d(v[0], v[1], v[2], 2, mode), &inputs, 8);
            assert!(err < TOL, "{mode:?}: {err}");
        }
    }

    #[test]
    fn weight_norm_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let inputs = [rand_tensor(&mut rng, &[3, 2, 4]), rand_tensor(&mut rng, &[3])];
        let err = max_rel_error(&|g, v| g.weight_norm(v[0], v[1]), &inputs, 10);
        assert!(err < TOL, "{err}");
    }

    #[test]
    fn linear_and_elementwise_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let inputs = [rand_tensor(&mut rng, &[3, 4]), rand_tensor(&mut rng, &[5, 4]), rand_tensor(&mut rng, &[5])];
        let err = max_rel_error(
            &|g, v| {
                let y = g.linear(v[0], v[1], Some(v[2]))?;
                let a = g.sigmoid(y);
                let b = g.tanh(y);
                let c = g.mul(a, b)?;
                let d = g.relu(y);
                let e = g.add(c, d)?;
                let s = g.slice_cols(e, 1, 3)?;
                g.reshape(s, &[9])
            },
            &inputs,
            12,
        );
        assert!(err < TOL, "{err}");
    }

    #[test]
    fn sequence_op_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let inputs = [rand_tensor(&mut rng, &[2, 3, 4])];
        let err = max_rel_error(
            &|g, v| {
                let a = g.select_step(v[0], 0)?;
                let b = g.select_step(v[0], 2)?;
                let ab = g.mul(a, b)?;
                let s = g.stack_steps(&[ab, a])?;
                g.mean_time(s)
            },
            &inputs,
            14,
        );
        assert!(err < TOL, "{err}");
    }

    #[test]
    fn cross_entropy_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let inputs = [rand_tensor(&mut rng, &[5, 2])];
        let err = max_rel_error(
            &|g, v| {
                let l = g.weighted_cross_entropy(v[0], &[0, 1, 1, 0, 1], &[0.556, 5.0])?;
                g.reshape(l, &[1])
            },
            &inputs,
            16,
        );
        assert!(err < TOL, "{err}");
    }

    #[test]
    fn mse_gradient_matches_closed_form() {
        let mut g = Graph::<f64>::new();
        let p = g.leaf(Tensor::new(&[4], alloc::vec![1.0, 2.0, -1.0, 0.5]).unwrap());
        let t = g.input(Tensor::new(&[4], alloc::vec![0.0, 2.5, 1.0, 0.5]).unwrap());
        let l = g.mse(p, t).unwrap();
        g.backward(l).unwrap();
        let want = [2.0 * 1.0 / 4.0, 2.0 * -0.5 / 4.0, 2.0 * -2.0 / 4.0, 0.0];
        for (a, b) in g.grad(p).unwrap().iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let inputs = [rand_tensor(&mut rng, &[3, 3]), rand_tensor(&mut rng, &[3, 3])];
        let err = max_rel_error(
            &|g, v| {
                let l = g.mse(v[0], v[1])?;
                g.reshape(l, &[1])
            },
            &inputs,
            18,
        );
        assert!(err < TOL, "{err}");
    }

    #[test]
    fn lstm_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (n, d, h, steps) = (2, 3, 4, 3);
        let inputs = [
            rand_tensor(&mut rng, &[n, steps, d]),
            rand_tensor(&mut rng, &[4 * h, d]),
            rand_tensor(&mut rng, &[4 * h, h]),
            rand_tensor(&mut rng, &[4 * h]),
        ];
        let build = move |g: &mut Graph<f64>, v: &[Var]| {
            let mut hs = g.input(Tensor::zeros(&[n, h]));
            let mut cs = g.input(Tensor::zeros(&[n, h]));
            let mut outs = Vec::new();
            for t in 0..steps {
                let x = g.select_step(v[0], t)?;
                (hs, cs) = crate::models::layers::lstm_step(g, x, hs, cs, [v[1], v[2], v[3]], h)?;
                outs.push(hs);
            }
            g.stack_steps(&outs)
        };
        let err = max_rel_error(&build, &inputs, 18);
        assert!(err < TOL, "{err}");
    }
}
