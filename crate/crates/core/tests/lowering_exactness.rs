use lipcert::benchgen::{build_mnist_cnn, CnnModel};
use lipcert::lowering::{
    lower_avgpool, lower_conv, lower_maxpool_explicit, lower_maxpool_implicit, lower_network, zm_at, Approach,
};
use lipcert::netmodel::{Conv2d, Kernel, LayerSpec, NetworkSpec, Padding, Pool2d, Shape};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

mod common;
use common::{conv_oracle, max_of, mean_of, pool_oracle, random_vec};

#[test]
fn conv_matrix_matches_padded_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    // (h, w, c, out, kh, kw, stride, same)
    let configs = [
        (5, 5, 1, 2, 3, 3, (1, 1), false),
        (5, 5, 1, 2, 3, 3, (1, 1), true),
        (6, 7, 2, 3, 3, 2, (2, 1), true),
        (7, 6, 3, 1, 2, 3, (2, 2), false),
        (8, 8, 2, 2, 4, 4, (3, 3), true),
        (4, 4, 1, 1, 1, 1, (1, 1), false),
    ];
    for (h, w, c, o, kh, kw, stride, same) in configs {
        let data = random_vec(&mut rng, o * c * kh * kw);
        let kernel = Kernel::new(o, c, kh, kw, data).unwrap();
        let conv = Conv2d {
            kernel: kernel.clone(),
            bias: vec![0.0; o],
            stride,
            padding: if same { Padding::Same } else { Padding::Valid },
        };
        let shape = Shape::Image { h, w, c };
        let block = lower_conv(&conv, shape).unwrap();
        let net = NetworkSpec::new("c", shape, vec![LayerSpec::Conv2d(conv)]).unwrap();
        for _ in 0..20 {
            let x = random_vec(&mut rng, h * w * c);
            let want = conv_oracle(&x, (h, w, c), &kernel, stride, same);
            for got in [block.matrix.matvec(&x), net.forward(&x).unwrap()] {
                assert_eq!(got.len(), want.len());
                for (a, b) in got.iter().zip(&want) {
                    assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn avgpool_matrix_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let configs = [(4, 4, 1, (2, 2), (2, 2)), (3, 3, 2, (2, 2), (1, 1)), (6, 4, 3, (3, 2), (3, 2)), (5, 5, 1, (1, 1), (2, 2))];
    for (h, w, c, pool, stride) in configs {
        let p = Pool2d { pool, stride };
        let m = lower_avgpool(&p, Shape::Image { h, w, c }).unwrap().matrix;
        for _ in 0..20 {
            let x = random_vec(&mut rng, h * w * c);
            let want = pool_oracle(&x, (h, w, c), p, mean_of);
            for (a, b) in m.matvec(&x).iter().zip(&want) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn maxpool_lowerings_are_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let configs = [
        (4, 4, 1, (2, 2), (2, 2)),
        (4, 6, 2, (2, 3), (2, 3)),
        (3, 3, 1, (2, 2), (1, 1)),
        (6, 6, 3, (3, 3), (3, 3)),
        (5, 3, 1, (3, 1), (2, 1)),
    ];
    for (h, w, c, pool, stride) in configs {
        let p = Pool2d { pool, stride };
        let shape = Shape::Image { h, w, c };
        let ex = lower_maxpool_explicit(&p, shape).unwrap();
        let im = lower_maxpool_implicit(&p, shape).unwrap();
        let ones = im.ones.to_dense();
        for _ in 0..50 {
            let x = random_vec(&mut rng, h * w * c);
            let want = pool_oracle(&x, (h, w, c), p, max_of);

            let mut u = x.clone();
            for s in &ex.stages {
                // ½M⁺u + ½Z·M⁻u with Z read off u
                let z = s.signs_at(&u);
                let plus = s.m_plus.matvec(&u);
                let minus = s.m_minus.matvec(&u);
                u = plus.iter().zip(&minus).zip(&z).map(|((a, b), z)| 0.5 * a + 0.5 * z * b).collect();
            }
            assert_eq!(u, want);

            let zm = zm_at(&im, &x).unwrap();
            assert_eq!(zm.abs(), ones);
            let got: Vec<f64> = (0..zm.rows())
                .map(|r| (0..zm.cols()).map(|j| (0.5 * ones.get(r, j) + 0.5 * zm.get(r, j)) * x[j]).sum())
                .collect();
            assert_eq!(got, want);
        }
    }
}

#[test]
fn lowered_plans_match_network_forward() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for model in [CnnModel::A, CnnModel::B, CnnModel::C] {
        let net = build_mnist_cnn(model, 3);
        for approach in [Approach::Explicit, Approach::Implicit] {
            let plan = lower_network(&net, approach).unwrap();
            for _ in 0..5 {
                let x = random_vec(&mut rng, net.input_dim());
                let (a, b) = (plan.forward(&x).unwrap(), net.forward(&x).unwrap());
                for (u, v) in a.iter().zip(&b) {
                    assert!((u - v).abs() <= 1e-10 * v.abs().max(1.0), "{model} {approach}: {u} vs {v}");
                }
            }
        }
    }
}
