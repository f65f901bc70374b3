use hvac_nn::gradcheck::{op_names, op_suite};
use hvac_nn::{
    check_inputs, check_params, Adam, Checkpoint, GradCheckConfig, Graph, LstmCell, Mlp,
    ParamStore, Tensor,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-4;

#[test]
fn every_op_passes_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let results = op_suite(50, GradCheckConfig::default(), &mut rng).unwrap();
    assert_eq!(results.len(), op_names().len());
    for (name, err) in results {
        assert!(err < TOL, "{name}: max relative error {err}");
    }
}

#[test]
fn three_layer_mlp_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..5 {
        let mut store = ParamStore::new();
        let mlp = Mlp::new(&mut store, "m", &[4, 6, 5, 2], &mut rng).unwrap();
        let x = Tensor::uniform(3, 4, 1.5, &mut rng);
        let target = Tensor::uniform(3, 2, 1.0, &mut rng);
        let report = check_params(&mut store, GradCheckConfig::default(), |g, s| {
            let xv = g.constant(x.clone());
            let y = mlp.forward(g, s, xv)?;
            let t = g.constant(target.clone());
            let d = g.sub(y, t)?;
            let sq = g.square(d);
            Ok(g.mean(sq))
        })
        .unwrap();
        assert!(report.max_rel_error < TOL, "{report:?}");
        assert_eq!(report.checked, store.numel());
    }
}

#[test]
fn lstm_unrolled_five_steps_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut store = ParamStore::new();
    let cell = LstmCell::new(&mut store, "l", 2, 3, &mut rng).unwrap();
    let xs: Vec<Tensor> = (0..5).map(|_| Tensor::uniform(2, 2, 1.0, &mut rng)).collect();
    let report = check_params(&mut store, GradCheckConfig::default(), |g, s| {
        let (mut h, mut c) = cell.zero_state(g, 2);
        for x in &xs {
            let xv = g.constant(x.clone());
            (h, c) = cell.forward(g, s, xv, h, c)?;
        }
        let t = g.tanh(c);
        let hc = g.mul(h, t)?;
        Ok(g.sum(hc))
    })
    .unwrap();
    assert!(report.max_rel_error < TOL, "{report:?}");

    // inputs and initial state as well
    let inputs = vec![Tensor::uniform(1, 2, 1.0, &mut rng), Tensor::uniform(1, 3, 1.0, &mut rng), Tensor::uniform(1, 3, 1.0, &mut rng)];
    let snapshot = store.clone();
    let report = check_inputs(&inputs, GradCheckConfig::default(), |g, v| {
        let (mut h, mut c) = (v[1], v[2]);
        for _ in 0..5 {
            (h, c) = cell.forward(g, &snapshot, v[0], h, c)?;
        }
        Ok(g.sum(h))
    })
    .unwrap();
    assert!(report.max_rel_error < TOL, "{report:?}");
}

fn quadratic_grads(store: &ParamStore) -> Vec<Tensor> {
    let mut g = Graph::new();
    let id = store.find("theta").unwrap();
    let t = g.param(store, id);
    let k = g.constant(Tensor::row(&[1.0, 10.0]));
    let sq = g.square(t);
    let w = g.mul(sq, k).unwrap();
    let l = g.sum(w);
    g.backward(l).unwrap().param_grads(store)
}

#[test]
fn adam_converges_on_two_dim_quadratic() {
    // measured |theta| after 200 steps at lr 0.05 was about 4e-5
    let mut store = ParamStore::new();
    store.add("theta", Tensor::row(&[1.0, -1.5])).unwrap();
    let mut adam = Adam::new(0.05);
    for _ in 0..200 {
        let grads = quadratic_grads(&store);
        adam.step(&mut store, &grads).unwrap();
    }
    let d = store.values()[0].data();
    assert!(d[0].hypot(d[1]) < 1e-3, "{d:?}");
}

#[test]
fn backward_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut store = ParamStore::new();
    let mlp = Mlp::new(&mut store, "m", &[3, 8, 2], &mut rng).unwrap();
    let mut g = Graph::new();
    let x = g.constant(Tensor::uniform(5, 3, 1.0, &mut rng));
    let y = mlp.forward(&mut g, &store, x).unwrap();
    let l = g.log_softmax(y);
    let l = g.mean(l);
    let a = g.backward(l).unwrap().param_grads(&store);
    let b = g.backward(l).unwrap().param_grads(&store);
    assert_eq!(a, b);
}

#[test]
fn checkpoint_file_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut store = ParamStore::new();
    Mlp::new(&mut store, "m", &[3, 4, 2], &mut rng).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    Checkpoint::from_store(&store).with_metadata("k", "v").save(&path).unwrap();
    let mut fresh = ParamStore::new();
    Mlp::new(&mut fresh, "m", &[3, 4, 2], &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
    let ck = Checkpoint::load(&path).unwrap();
    ck.load_into(&mut fresh).unwrap();
    assert_eq!(fresh, store);
    assert_eq!(ck.meta("k").unwrap(), "v");
}

proptest! {
    #[test]
    fn sigmoid_in_unit_interval(x in -700.0f64..700.0) {
        let mut g = Graph::new();
        let v = g.constant(Tensor::scalar(x));
        let s = g.sigmoid(v);
        let y = g.value(s).item();
        prop_assert!((0.0..=1.0).contains(&y));
    }

    #[test]
    fn softmax_rows_sum_to_one(vals in proptest::collection::vec(-30.0f64..30.0, 6)) {
        let mut g = Graph::new();
        let v = g.constant(Tensor::new(3, 2, vals).unwrap());
        let s = g.softmax(v);
        let t = g.value(s);
        for r in 0..3 {
            prop_assert!((t.row_slice(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn matmul_is_linear(seed: u64, k in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Tensor::uniform(3, 4, 1.0, &mut rng);
        let b = Tensor::uniform(4, 2, 1.0, &mut rng);
        let lhs = a.map(|x| k * x).matmul(&b).unwrap();
        let rhs = a.matmul(&b).unwrap().map(|x| k * x);
        for (x, y) in lhs.data().iter().zip(rhs.data()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}
