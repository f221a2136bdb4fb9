//! Small descriptive-statistics helpers shared across modules.

use nalgebra::DMatrix;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance (divisor n).
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Ranks starting at 1, ties receive their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = 0.5 * ((i + 1) + (j + 1)) as f64;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    pearson(&average_ranks(xs), &average_ranks(ys))
}

/// Kendall's tau-a by direct pair enumeration.
pub fn kendall_tau(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    let mut s = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (xs[i] - xs[j]).signum() * (ys[i] - ys[j]).signum();
            s += v as i64;
        }
    }
    s as f64 / (n * (n - 1) / 2) as f64
}

/// Sample correlation matrix of the columns of a T×k matrix.
pub fn correlation_matrix(data: &DMatrix<f64>) -> DMatrix<f64> {
    let (t, k) = data.shape();
    let means: Vec<f64> = (0..k).map(|j| data.column(j).sum() / t as f64).collect();
    let mut cov = DMatrix::<f64>::zeros(k, k);
    for row in 0..t {
        for a in 0..k {
            let da = data[(row, a)] - means[a];
            for b in a..k {
                cov[(a, b)] += da * (data[(row, b)] - means[b]);
            }
        }
    }
    let mut corr = DMatrix::identity(k, k);
    for a in 0..k {
        for b in (a + 1)..k {
            let r = cov[(a, b)] / (cov[(a, a)] * cov[(b, b)]).sqrt();
            corr[(a, b)] = r;
            corr[(b, a)] = r;
        }
    }
    corr
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

/// Riemann zeta function for real `s > 1` via Euler–Maclaurin summation.
pub fn riemann_zeta(s: f64) -> f64 {
    assert!(s > 1.0, "zeta requires s > 1");
    const N: usize = 12;
    // B_{2j} / (2j)!
    const B2J_OVER_FACT: [f64; 6] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
        1.0 / 47900160.0,
        -691.0 / 1_307_674_368_000.0,
    ];
    let n = N as f64;
    let mut sum: f64 = (1..N).map(|k| (k as f64).powf(-s)).sum();
    sum += n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s);
    // Rising factorial s(s+1)...(s+2j-2) times N^{-s-2j+1}.
    let mut rising = s;
    let mut npow = n.powf(-s - 1.0);
    for (j, coef) in B2J_OVER_FACT.iter().enumerate() {
        sum += coef * rising * npow;
        let m = 2.0 * j as f64;
        rising *= (s + m + 1.0) * (s + m + 2.0);
        npow /= n * n;
    }
    sum
}
