use rand::Rng;

use crate::numerics::Matrix;
use crate::seed::rng;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding followed by Lloyd iterations.
///
/// Rows are visited in lexicographic order, so the labelling of each
/// observation does not depend on the order of the input rows.
pub fn kmeans_labels(x: &Matrix<f64>, k: usize, seed: u64, max_iter: usize) -> Vec<usize> {
    let n = x.rows();
    let k = k.clamp(1, n.max(1));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        x.row(a)
            .iter()
            .zip(x.row(b))
            .map(|(p, q)| p.total_cmp(q))
            .find(|c| c.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let rows: Vec<&[f64]> = order.iter().map(|&i| x.row(i)).collect();

    let mut r = rng(seed);
    let mut centers: Vec<Vec<f64>> = vec![rows[r.random_range(0..n)].to_vec()];
    let mut d2: Vec<f64> = rows.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut t = r.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, &v) in d2.iter().enumerate() {
                if t < v {
                    idx = i;
                    break;
                }
                t -= v;
            }
            idx
        } else {
            r.random_range(0..n)
        };
        centers.push(rows[pick].to_vec());
        let c = centers.last().unwrap();
        for (i, p) in rows.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, c));
        }
    }

    let assign = |centers: &[Vec<f64>]| -> Vec<usize> {
        rows.iter()
            .map(|p| {
                let mut best = 0;
                let mut bd = f64::INFINITY;
                for (j, c) in centers.iter().enumerate() {
                    let v = sq_dist(p, c);
                    if v < bd {
                        bd = v;
                        best = j;
                    }
                }
                best
            })
            .collect()
    };
    let mut labels = assign(&centers);
    for _ in 0..max_iter {
        let d = x.cols();
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in rows.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p.iter()) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                centers[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        let next = assign(&centers);
        if next == labels {
            break;
        }
        labels = next;
    }

    let mut out = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        out[i] = labels[pos];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_two_blobs() {
        let mut rows = Vec::new();
        for i in 0..20 {
            let e = i as f64 * 0.01;
            rows.push(vec![-5.0 + e, 0.0]);
            rows.push(vec![5.0 - e, 1.0]);
        }
        let x = Matrix::from_rows(&rows);
        let labels = kmeans_labels(&x, 2, 3, 50);
        for i in 0..20 {
            assert_eq!(labels[2 * i], labels[0]);
            assert_eq!(labels[2 * i + 1], labels[1]);
        }
        assert_ne!(labels[0], labels[1]);
    }

    #[test]
    fn invariant_to_row_order() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![((i * 7) % 11) as f64, ((i * 5) % 13) as f64])
            .collect();
        let mut rev = rows.clone();
        rev.reverse();
        let a = kmeans_labels(&Matrix::from_rows(&rows), 3, 9, 50);
        let b = kmeans_labels(&Matrix::from_rows(&rev), 3, 9, 50);
        for i in 0..30 {
            assert_eq!(a[i], b[29 - i]);
        }
    }
}
