#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rmtfolio::linalg::Matrix;
use rmtfolio::{ReturnPanel, WeightBounds};

pub fn normal_panel(rng: &mut ChaCha8Rng, l: usize, n: usize) -> ReturnPanel<f64> {
    let m = Matrix::from_fn(l, n, |_, _| StandardNormal.sample(rng));
    ReturnPanel::from_matrix(m).unwrap()
}

/// `A Aᵀ` with `A` of shape n×rank.
pub fn random_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> Matrix<f64> {
    let a = Matrix::from_fn(n, rank, |_, _| StandardNormal.sample(rng));
    a.matmul(&a.transpose()).unwrap()
}

pub fn risk(h: &Matrix<f64>, w: &[f64]) -> f64 {
    h.quadratic_form(w)
}

/// Brute-force minimum of `wᵀHw` over {Σw = 1, R̄ᵀw = t, bounds} for n ≤ 3:
/// the feasible set is a segment (n = 3) or a point (n = 2), scanned with
/// step `h_step` including both ends.
pub fn grid_oracle(h: &Matrix<f64>, means: &[f64], t: f64, b: &WeightBounds<f64>, h_step: f64) -> Option<f64> {
    let n = means.len();
    let within = |w: &[f64]| w.iter().all(|&x| x >= b.lower - 1e-12 && x <= b.upper + 1e-12);
    match n {
        2 => {
            let (m0, m1) = (means[0], means[1]);
            if (m1 - m0).abs() < 1e-15 {
                // any split; scan
                let mut best: Option<f64> = None;
                let mut x = b.lower;
                while x <= b.upper.min(1.0 - b.lower) + 1e-12 {
                    let w = [x, 1.0 - x];
                    if within(&w) {
                        let r = risk(h, &w);
                        best = Some(best.map_or(r, |v: f64| v.min(r)));
                    }
                    x += h_step;
                }
                return best;
            }
            let w1 = (t - m0) / (m1 - m0);
            let w = [1.0 - w1, w1];
            within(&w).then(|| risk(h, &w))
        }
        3 => {
            // particular solution and direction d ⟂ (1, R̄)
            let ones = [1.0, 1.0, 1.0];
            let d = [
                ones[1] * means[2] - ones[2] * means[1],
                ones[2] * means[0] - ones[0] * means[2],
                ones[0] * means[1] - ones[1] * means[0],
            ];
            let dn = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            if dn < 1e-14 {
                return None;
            }
            let d = [d[0] / dn, d[1] / dn, d[2] / dn];
            // least-norm particular solution of [1;R̄] w = [1; t]
            let a = [ones, [means[0], means[1], means[2]]];
            let g = [
                [3.0, means.iter().sum::<f64>()],
                [means.iter().sum::<f64>(), means.iter().map(|m| m * m).sum::<f64>()],
            ];
            let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
            let y = [(g[1][1] * 1.0 - g[0][1] * t) / det, (g[0][0] * t - g[1][0] * 1.0) / det];
            let p: Vec<f64> = (0..3).map(|i| a[0][i] * y[0] + a[1][i] * y[1]).collect();
            let (mut smin, mut smax) = (f64::NEG_INFINITY, f64::INFINITY);
            for i in 0..3 {
                if d[i].abs() < 1e-15 {
                    if p[i] < b.lower - 1e-12 || p[i] > b.upper + 1e-12 {
                        return None;
                    }
                    continue;
                }
                let s1 = (b.lower - p[i]) / d[i];
                let s2 = (b.upper - p[i]) / d[i];
                smin = smin.max(s1.min(s2));
                smax = smax.min(s1.max(s2));
            }
            if smin > smax + 1e-12 {
                return None;
            }
            let smax = smax.max(smin);
            let steps = ((smax - smin) / h_step).ceil().max(1.0) as usize;
            let mut best = f64::INFINITY;
            for k in 0..=steps {
                let s = smin + (smax - smin) * k as f64 / steps as f64;
                let w: Vec<f64> = (0..3).map(|i| p[i] + s * d[i]).collect();
                best = best.min(risk(h, &w));
            }
            Some(best)
        }
        _ => panic!("grid oracle is for two or three assets"),
    }
}

/// Extreme attainable returns for uniform bounds, by sorting.
pub fn attainable(means: &[f64], b: &WeightBounds<f64>) -> (f64, f64) {
    let mut s = means.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let fill = |order: &[f64]| {
        let mut budget = 1.0 - b.lower * order.len() as f64;
        let mut r = 0.0;
        for &m in order {
            let take = budget.min(b.upper - b.lower).max(0.0);
            r += (b.lower + take) * m;
            budget -= take;
        }
        r
    };
    let lo = fill(&s);
    s.reverse();
    (lo, fill(&s))
}

/// Independent first-order optimality check: least-squares multipliers on
/// the interior weights, then sign conditions on weights at a bound.
/// Returns the worst violation relative to the gradient scale.
pub fn kkt_violation(h: &Matrix<f64>, means: &[f64], with_return: bool, b: &WeightBounds<f64>, w: &[f64]) -> f64 {
    let n = w.len();
    let g: Vec<f64> = h.mul_vec(w).iter().map(|x| 2.0 * x).collect();
    let at_lo = |i: usize| (w[i] - b.lower).abs() <= 1e-9;
    let at_hi = |i: usize| (w[i] - b.upper).abs() <= 1e-9;
    let interior: Vec<usize> = (0..n).filter(|&i| !at_lo(i) && !at_hi(i)).collect();
    let rows: Vec<Vec<f64>> = if with_return { vec![vec![1.0; n], means.to_vec()] } else { vec![vec![1.0; n]] };
    let m = rows.len();
    // normal equations on the interior set
    let mut gram = vec![vec![0.0; m]; m];
    let mut rhs = vec![0.0; m];
    for &i in &interior {
        for r in 0..m {
            rhs[r] -= rows[r][i] * g[i];
            for c in 0..m {
                gram[r][c] += rows[r][i] * rows[c][i];
            }
        }
    }
    let nu: Vec<f64> = if interior.is_empty() {
        // no interior weights: any multipliers; use least squares on all
        vec![0.0; m]
    } else if m == 1 {
        vec![rhs[0] / gram[0][0]]
    } else {
        let det = gram[0][0] * gram[1][1] - gram[0][1] * gram[1][0];
        if det.abs() < 1e-300 {
            vec![rhs[0] / gram[0][0], 0.0]
        } else {
            vec![
                (gram[1][1] * rhs[0] - gram[0][1] * rhs[1]) / det,
                (gram[0][0] * rhs[1] - gram[1][0] * rhs[0]) / det,
            ]
        }
    };
    let z = |i: usize| g[i] + (0..m).map(|r| rows[r][i] * nu[r]).sum::<f64>();
    let hmax = h.diagonal().into_iter().fold(0.0f64, f64::max);
    let scale = g.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(nu[0].abs()).max(hmax).max(1e-300);
    let mut worst = 0.0f64;
    for i in 0..n {
        let zi = z(i);
        let v = if at_lo(i) && at_hi(i) {
            0.0
        } else if at_lo(i) {
            (-zi).max(0.0)
        } else if at_hi(i) {
            zi.max(0.0)
        } else {
            zi.abs()
        };
        worst = worst.max(v / scale);
    }
    worst
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}
