//! Shared oracles and instance builders for the integration tests.
#![allow(dead_code)]

use olp::{Column, Instance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn solve_dense(mut a: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[piv][c].abs() < 1e-12 {
            return None;
        }
        a.swap(c, piv);
        rhs.swap(c, piv);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                rhs[r] -= f * rhs[c];
            }
        }
    }
    Some((0..n).map(|i| rhs[i] / a[i][i]).collect())
}

/// Best objective over all basic solutions: every column at 0, at 1, or free,
/// with as many tight rows as free columns.
pub fn enumerate_vertices(c: &[f64], rows: &[Vec<f64>], d: &[f64]) -> f64 {
    let (m, s) = (rows.len(), c.len());
    let mut best = f64::NEG_INFINITY;
    let mut status = vec![0u8; s];
    loop {
        let free: Vec<usize> = (0..s).filter(|&j| status[j] == 2).collect();
        if free.len() <= m {
            for mask in 0u32..(1 << m) {
                if mask.count_ones() as usize != free.len() {
                    continue;
                }
                let tight: Vec<usize> = (0..m).filter(|&i| mask & (1 << i) != 0).collect();
                let mut x: Vec<f64> = status.iter().map(|&v| f64::from(v == 1)).collect();
                if !free.is_empty() {
                    let sys = tight
                        .iter()
                        .map(|&i| free.iter().map(|&j| rows[i][j]).collect())
                        .collect();
                    let r = tight
                        .iter()
                        .map(|&i| {
                            d[i] - (0..s)
                                .filter(|j| !free.contains(j))
                                .map(|j| rows[i][j] * x[j])
                                .sum::<f64>()
                        })
                        .collect();
                    match solve_dense(sys, r) {
                        Some(v) => free.iter().zip(v).for_each(|(&j, v)| x[j] = v),
                        None => continue,
                    }
                }
                let in_box = x.iter().all(|&v| (-1e-9..=1.0 + 1e-9).contains(&v));
                let fits = rows.iter().zip(d).all(|(row, &di)| {
                    row.iter().zip(&x).map(|(a, x)| a * x).sum::<f64>() <= di + 1e-9
                });
                if in_box && fits {
                    best = best.max(c.iter().zip(&x).map(|(c, x)| c * x).sum());
                }
            }
        }
        let mut j = 0;
        while j < s && status[j] == 2 {
            status[j] = 0;
            j += 1;
        }
        if j == s {
            break;
        }
        status[j] += 1;
    }
    best
}

pub fn quantized(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random_bool(0.5) {
        rng.random::<f64>()
    } else {
        f64::from(rng.random_range(0..=4u8)) * 0.25
    }
}

pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(1..=3);
    let n = rng.random_range(20..=300);
    let columns = (0..n)
        .map(|_| {
            let a = (0..m)
                .map(|_| {
                    if rng.random_bool(0.3) {
                        0.0
                    } else {
                        rng.random::<f64>()
                    }
                })
                .collect();
            Column::new(rng.random::<f64>() * 5.0, a)
        })
        .collect();
    let b = (0..m)
        .map(|_| n as f64 * rng.random_range(0.02..0.3))
        .collect();
    Instance::new(b, columns).expect("random instance")
}
