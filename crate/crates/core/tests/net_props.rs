use moldream::net::{Activation, Dense, Mlp};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn inputs(rows: usize, dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..rows * dim)
        .map(|_| {
            if rng.gen_bool(0.3) {
                0.0
            } else {
                rng.gen_range(-1.0..1.0)
            }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prediction_does_not_depend_on_batching(seed in any::<u64>(), rows in 1usize..40, dim in 1usize..30, width in 1usize..70) {
        let mlp = Mlp::init(&[dim, width, width / 2 + 1, 1], Activation::Relu, seed).unwrap();
        let x = inputs(rows, dim, seed ^ 1);
        let (batched, _) = mlp.forward_batch(&x, rows).unwrap();
        for r in 0..rows {
            let single = mlp.predict(&x[r * dim..(r + 1) * dim]).unwrap();
            prop_assert!((single - batched[r]).abs() <= 1e-10);
        }
    }

    #[test]
    fn forward_matches_a_hand_written_pass(seed in any::<u64>(), dim in 1usize..12, width in 1usize..12) {
        let mlp = Mlp::init(&[dim, width, 1], Activation::Relu, seed).unwrap();
        let x = inputs(1, dim, seed ^ 2);
        let l = mlp.layers();
        let hidden: Vec<f64> = (0..width)
            .map(|j| {
                let mut s = l[0].bias[j];
                for (k, xk) in x.iter().enumerate() {
                    s += xk * l[0].weight(k, j);
                }
                s.max(0.0)
            })
            .collect();
        let mut out = l[1].bias[0];
        for (j, h) in hidden.iter().enumerate() {
            out += h * l[1].weight(j, 0);
        }
        prop_assert!((mlp.predict(&x).unwrap() - out).abs() <= 1e-12);
    }
}

/// Full-batch gradient descent with a small step on a linear least-squares
/// problem never increases the loss.
#[test]
fn loss_never_increases_on_a_convex_problem() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (n, dim) = (32, 5);
    let x: Vec<f64> = (0..n * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut mlp = Mlp::init(&[dim, 1], Activation::Identity, 1).unwrap();
    let loss = |m: &Mlp| {
        let (p, _) = m.forward_batch(&x, n).unwrap();
        p.iter().zip(&y).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / n as f64
    };
    let mut previous = loss(&mlp);
    for _ in 0..200 {
        let mut gw = vec![0.0; dim];
        let mut gb = 0.0;
        for r in 0..n {
            let (p, cache) = mlp.forward(&x[r * dim..(r + 1) * dim]).unwrap();
            let g = mlp.backward(&cache, 2.0 * (p - y[r]) / n as f64).unwrap();
            for (a, b) in gw.iter_mut().zip(&g.weights[0]) {
                *a += b;
            }
            gb += g.biases[0][0];
        }
        let l = &mlp.layers()[0];
        let updated = Dense {
            inputs: dim,
            outputs: 1,
            weights: l.weights.iter().zip(&gw).map(|(w, g)| w - 0.05 * g).collect(),
            bias: vec![l.bias[0] - 0.05 * gb],
        };
        mlp = Mlp::from_layers(vec![updated], Activation::Identity).unwrap();
        let current = loss(&mlp);
        assert!(current <= previous + 1e-15, "{current} > {previous}");
        previous = current;
    }
}
