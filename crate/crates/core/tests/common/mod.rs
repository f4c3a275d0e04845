//! Independent oracles and fixture helpers shared by integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn scenario(name: &str) -> PathBuf {
    fixtures().join("scenarios").join(format!("{name}.toml"))
}

/// Brute-force multilinear interpolation: clamp each coordinate, locate its
/// cell by linear scan, then sum all 2^d corner values with product weights.
/// `values` is row-major with the last axis fastest.
pub fn multilinear(coords: &[Vec<f64>], values: &[f64], x: &[f64]) -> f64 {
    let d = coords.len();
    let mut lo = vec![0usize; d];
    let mut t = vec![0.0; d];
    for k in 0..d {
        let c = &coords[k];
        let xk = x[k].max(c[0]).min(c[c.len() - 1]);
        let mut i = 0;
        while i + 2 < c.len() && xk > c[i + 1] {
            i += 1;
        }
        lo[k] = i;
        t[k] = (xk - c[i]) / (c[i + 1] - c[i]);
    }
    let mut sum = 0.0;
    for corner in 0..(1usize << d) {
        let mut w = 1.0;
        let mut flat = 0;
        for k in 0..d {
            let up = (corner >> (d - 1 - k)) & 1 == 1;
            w *= if up { t[k] } else { 1.0 - t[k] };
            flat = flat * coords[k].len() + lo[k] + up as usize;
        }
        sum += w * values[flat];
    }
    sum
}

/// Root-mean-square difference of two equally long series.
pub fn rmse(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

#[test]
fn oracle_hits_corners_and_midpoints() {
    let coords = vec![vec![0.0, 1.0, 3.0], vec![10.0, 20.0]];
    let values = vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
    assert_eq!(multilinear(&coords, &values, &[1.0, 20.0]), 3.0);
    assert_eq!(multilinear(&coords, &values, &[2.0, 15.0]), 3.5);
    assert_eq!(multilinear(&coords, &values, &[-5.0, 99.0]), 1.0);
}
