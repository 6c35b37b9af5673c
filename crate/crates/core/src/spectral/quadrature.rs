//! Quadrature on spheres and Taylor coefficients of real-analytic functions.

use nalgebra::{DMatrix, SymmetricEigen};

/// Gauss rule for the weight `(1 - t²)^a` on `[-1, 1]` by Golub–Welsch.
pub fn gauss_gegenbauer(points: usize, a: f64) -> (Vec<f64>, Vec<f64>) {
    let mut jac = DMatrix::<f64>::zeros(points, points);
    for k in 1..points {
        let kf = k as f64;
        let b = (kf * (kf + 2.0 * a) / ((2.0 * kf + 2.0 * a + 1.0) * (2.0 * kf + 2.0 * a - 1.0))).sqrt();
        jac[(k, k - 1)] = b;
        jac[(k - 1, k)] = b;
    }
    let mu0 = std::f64::consts::PI.sqrt() * libm::tgamma(a + 1.0) / libm::tgamma(a + 1.5);
    let eig = SymmetricEigen::new(jac);
    let mut rule: Vec<(f64, f64)> = (0..points)
        .map(|i| (eig.eigenvalues[i], mu0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    rule.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    rule.into_iter().unzip()
}

/// Product rule on the unit sphere `S^{d-1} ⊂ R^d`: nodes and surface weights.
///
/// `S^{d-1}` is sliced as `(t, √(1-t²) x')` with Gegenbauer weight `(1-t²)^{(d-3)/2}` in `t`;
/// the circle uses `2·points` equispaced angles.
pub fn sphere_rule(d: usize, points: usize) -> Vec<(Vec<f64>, f64)> {
    match d {
        0 => vec![],
        1 => vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)],
        2 => {
            let m = 2 * points;
            let w = 2.0 * std::f64::consts::PI / m as f64;
            (0..m)
                .map(|j| {
                    let phi = w * (j as f64 + 0.5);
                    (vec![phi.cos(), phi.sin()], w)
                })
                .collect()
        }
        _ => {
            let (ts, ws) = gauss_gegenbauer(points, (d as f64 - 3.0) / 2.0);
            let lower = sphere_rule(d - 1, points);
            let mut out = Vec::with_capacity(ts.len() * lower.len());
            for (t, w) in ts.iter().zip(&ws) {
                let s = (1.0 - t * t).max(0.0).sqrt();
                for (x, v) in &lower {
                    let mut p = Vec::with_capacity(d);
                    p.push(*t);
                    p.extend(x.iter().map(|c| s * c));
                    out.push((p, w * v));
                }
            }
            out
        }
    }
}

/// Taylor coefficient `[ε^order] f` of a function real-analytic on a neighbourhood of
/// `[-radius, radius]`, from Chebyshev interpolation at `nodes` points.
pub fn taylor_coefficient(f: impl Fn(f64) -> f64, radius: f64, order: usize, nodes: usize) -> f64 {
    let n = nodes as f64;
    let values: Vec<f64> = (0..nodes)
        .map(|j| f(radius * (std::f64::consts::PI * (j as f64 + 0.5) / n).cos()))
        .collect();
    // Chebyshev coefficients of t ↦ f(radius · t).
    let coeffs: Vec<f64> = (0..nodes)
        .map(|k| {
            let s: f64 = values
                .iter()
                .enumerate()
                .map(|(j, v)| v * (std::f64::consts::PI * k as f64 * (j as f64 + 0.5) / n).cos())
                .sum();
            if k == 0 {
                s / n
            } else {
                2.0 * s / n
            }
        })
        .collect();
    // Coefficients at round-off level would only amplify noise below.
    let noise = 64.0 * f64::EPSILON * values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let keep = coeffs.iter().rposition(|c| c.abs() > noise).map_or(1, |k| k + 1);
    let coeffs = &coeffs[..keep];
    // [t^order] of T_k, by the three-term recurrence truncated at degree `order`.
    let mut prev = vec![0.0; order + 1];
    let mut cur = vec![0.0; order + 1];
    prev[0] = 1.0;
    if order >= 1 {
        cur[1] = 1.0;
    }
    let mut acc = coeffs[0] * prev[order];
    if coeffs.len() > 1 {
        acc += coeffs[1] * cur[order];
    }
    for c in coeffs.iter().skip(2) {
        let mut next = vec![0.0; order + 1];
        for d in 0..=order {
            next[d] = -prev[d] + if d > 0 { 2.0 * cur[d - 1] } else { 0.0 };
        }
        acc += c * next[order];
        prev = std::mem::replace(&mut cur, next);
    }
    acc / radius.powi(order as i32)
}
