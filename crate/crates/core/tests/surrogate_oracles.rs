mod common;

use common::multilinear;
use evpt_core::surrogate::{
    eval_net, load_model, save_model, Activation, Axis, DenseNet, GridTable, Layer, Metadata, Normalization, PortInfo, SurrogateModel,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type RawLayer = (Vec<Vec<f64>>, Vec<f64>, Activation);

/// Straightforward matrix walk: normalize, multiply row by row, activate,
/// denormalize.
fn walk(layers: &[RawLayer], norm_in: &[(f64, f64)], norm_out: &[(f64, f64)], x: &[f64]) -> Vec<f64> {
    let mut h: Vec<f64> = x.iter().zip(norm_in).map(|(v, (m, s))| (v - m) / s).collect();
    for (w, b, act) in layers {
        let mut next = Vec::with_capacity(w.len());
        for (row, bias) in w.iter().zip(b) {
            let mut z = *bias;
            for (wij, hj) in row.iter().zip(&h) {
                z += wij * hj;
            }
            next.push(match act {
                Activation::Tanh => z.tanh(),
                Activation::Relu => {
                    if z > 0.0 {
                        z
                    } else {
                        0.0
                    }
                }
                Activation::Identity => z,
            });
        }
        h = next;
    }
    h.iter().zip(norm_out).map(|(v, (m, s))| v * s + m).collect()
}

#[test]
fn random_net_matches_matrix_walk() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let widths = [rng.random_range(1..5), rng.random_range(1..12), rng.random_range(1..12), rng.random_range(1..4)];
        let acts = [if rng.random::<bool>() { Activation::Tanh } else { Activation::Relu }, Activation::Tanh, Activation::Identity];
        let mut raw = Vec::new();
        for l in 0..3 {
            let w: Vec<Vec<f64>> = (0..widths[l + 1]).map(|_| (0..widths[l]).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let b: Vec<f64> = (0..widths[l + 1]).map(|_| rng.random_range(-0.5..0.5)).collect();
            raw.push((w, b, acts[l]));
        }
        let norm = |n: usize, rng: &mut ChaCha8Rng| -> Vec<(f64, f64)> {
            (0..n).map(|_| (rng.random_range(-5.0..5.0), rng.random_range(0.5..3.0))).collect()
        };
        let (nin, nout) = (norm(widths[0], &mut rng), norm(widths[3], &mut rng));
        let net = DenseNet::new(
            raw.iter().map(|(w, b, a)| Layer { weights: w.clone(), bias: b.clone(), activation: *a }).collect(),
            nin.iter().map(|&(mean, scale)| Normalization { mean, scale }).collect(),
            nout.iter().map(|&(mean, scale)| Normalization { mean, scale }).collect(),
        )
        .unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..widths[0]).map(|_| rng.random_range(-10.0..10.0)).collect();
            let (got, want) = (eval_net(&net, &x), walk(&raw, &nin, &nout, &x));
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-12 * w.abs().max(1.0), "{g} vs {w}");
            }
        }
    }
}

fn table_strategy(max_dims: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    prop::collection::vec((-10.0f64..10.0, prop::collection::vec(0.05f64..4.0, 1..5)), 2..=max_dims)
        .prop_map(|axes| {
            axes.into_iter()
                .map(|(start, steps)| {
                    let mut c = vec![start];
                    for s in steps {
                        c.push(c.last().unwrap() + s);
                    }
                    c
                })
                .collect::<Vec<_>>()
        })
        .prop_flat_map(|coords| {
            let n: usize = coords.iter().map(Vec::len).product();
            (Just(coords), prop::collection::vec(-1e3f64..1e3, n))
        })
}

proptest! {
    #[test]
    fn random_tables_match_brute_force((coords, values) in table_strategy(3), u in prop::collection::vec(-0.3f64..1.3, 3)) {
        let axes = coords.iter().enumerate().map(|(i, c)| Axis::new(format!("x{i}"), "-", c.clone())).collect();
        let t = GridTable::new(axes, values.clone()).unwrap();
        let x: Vec<f64> = coords.iter().zip(&u).map(|(c, f)| c[0] + f * (c[c.len() - 1] - c[0])).collect();
        let (got, want) = (t.eval(&x), multilinear(&coords, &values, &x));
        prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{} vs {}", got, want);
    }

    #[test]
    fn interpolation_stays_within_node_range((coords, values) in table_strategy(3), u in prop::collection::vec(-1.0f64..2.0, 3)) {
        let axes = coords.iter().enumerate().map(|(i, c)| Axis::new(format!("x{i}"), "-", c.clone())).collect();
        let t = GridTable::new(axes, values.clone()).unwrap();
        let x: Vec<f64> = coords.iter().zip(&u).map(|(c, f)| c[0] + f * (c[c.len() - 1] - c[0])).collect();
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let y = t.eval(&x);
        prop_assert!(y >= lo - 1e-9 && y <= hi + 1e-9);
    }

    #[test]
    fn table_model_files_round_trip((coords, values) in table_strategy(2)) {
        let axes = coords.iter().enumerate().map(|(i, c)| Axis::new(format!("x{i}"), "-", c.clone())).collect();
        let t = GridTable::new(axes, values).unwrap();
        let m = SurrogateModel::from_table(t, vec![PortInfo::new("y", "W")], Metadata { source: "p".into(), created: "c".into(), ..Default::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
        save_model(&m, &a).unwrap();
        let loaded = load_model(&a).unwrap();
        prop_assert_eq!(&loaded, &m);
        save_model(&loaded, &b).unwrap();
        prop_assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }
}
