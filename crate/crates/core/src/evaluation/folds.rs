use rand::seq::SliceRandom;

use crate::seed::rng;

/// Seeded Fisher–Yates shuffle of `0..n`, cut into `b` contiguous blocks
/// whose sizes differ by at most one. Each fold lists its row indices in
/// increasing order.
pub fn fold_partition(n: usize, b: usize, seed: u64) -> Vec<Vec<usize>> {
    assert!(b >= 1 && b <= n.max(1), "need 1 <= folds <= n");
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng(seed));
    let (base, extra) = (n / b, n % b);
    let mut out = Vec::with_capacity(b);
    let mut start = 0;
    for f in 0..b {
        let len = base + usize::from(f < extra);
        let mut fold = idx[start..start + len].to_vec();
        fold.sort_unstable();
        out.push(fold);
        start += len;
    }
    out
}

/// Indices of `0..n` not in `fold`.
pub fn complement(n: usize, fold: &[usize]) -> Vec<usize> {
    let mut mask = vec![true; n];
    for &i in fold {
        mask[i] = false;
    }
    (0..n).filter(|&i| mask[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leave_one_out() {
        let f = fold_partition(7, 7, 3);
        assert!(f.iter().all(|v| v.len() == 1));
    }

    #[test]
    fn disjoint_cover_balanced() {
        let f = fold_partition(103, 10, 11);
        let mut all: Vec<usize> = f.concat();
        all.sort_unstable();
        assert_eq!(all, (0..103).collect::<Vec<_>>());
        let sizes: Vec<usize> = f.iter().map(Vec::len).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        assert_eq!(complement(103, &f[0]).len(), 103 - f[0].len());
    }
}
