//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Exact minimal enclosing circle (Welzl, randomized incremental form).
pub fn welzl(points: &[[f64; 2]], seed: u64) -> ([f64; 2], f64) {
    let mut p = points.to_vec();
    p.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let outside = |c: [f64; 2], r: f64, q: [f64; 2]| d(c, q) > r * (1.0 + 1e-12) + 1e-15;
    let mut c = p[0];
    let mut r = 0.0;
    for i in 1..p.len() {
        if !outside(c, r, p[i]) {
            continue;
        }
        c = p[i];
        r = 0.0;
        for j in 0..i {
            if !outside(c, r, p[j]) {
                continue;
            }
            c = [(p[i][0] + p[j][0]) / 2.0, (p[i][1] + p[j][1]) / 2.0];
            r = d(c, p[i]);
            for k in 0..j {
                if outside(c, r, p[k]) {
                    c = circumcenter(p[i], p[j], p[k]);
                    r = d(c, p[i]);
                }
            }
        }
    }
    (c, r)
}

fn d(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn circumcenter(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> [f64; 2] {
    let (bx, by) = (b[0] - a[0], b[1] - a[1]);
    let (cx, cy) = (c[0] - a[0], c[1] - a[1]);
    let den = 2.0 * (bx * cy - by * cx);
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    [a[0] + (cy * b2 - by * c2) / den, a[1] + (bx * c2 - cx * b2) / den]
}

/// Kendall tau-b by counting every pair.
pub fn tau_b_brute(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let (mut nc, mut nd, mut tx, mut ty) = (0i64, 0i64, 0u64, 0u64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i].partial_cmp(&x[j]).unwrap();
            let dy = y[i].partial_cmp(&y[j]).unwrap();
            use std::cmp::Ordering::Equal;
            match (dx == Equal, dy == Equal) {
                (true, true) => {
                    tx += 1;
                    ty += 1;
                }
                (true, false) => tx += 1,
                (false, true) => ty += 1,
                (false, false) if dx == dy => nc += 1,
                _ => nd += 1,
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as u64;
    let denom = ((n0 - tx) as f64 * (n0 - ty) as f64).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        (nc - nd) as f64 / denom
    }
}

/// MCC straight from its definition, in integers until the final division.
pub fn mcc_direct(tp: u64, fp: u64, fn_: u64, tn: u64) -> f64 {
    let num = (tp * tn) as i64 - (fp * fn_) as i64;
    let den = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if den == 0 {
        0.0
    } else {
        num as f64 / (den as f64).sqrt()
    }
}

/// Closed-form DCG-based NDCG.
pub fn ndcg_direct(order: &[usize], rel: &[f64]) -> f64 {
    let dcg = |r: Vec<f64>| -> f64 { r.iter().enumerate().map(|(i, v)| v / (i as f64 + 2.0).log2()).sum() };
    let mut ideal = rel.to_vec();
    ideal.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let idcg = dcg(ideal);
    if idcg == 0.0 {
        1.0
    } else {
        dcg(order.iter().map(|&i| rel[i]).collect()) / idcg
    }
}
