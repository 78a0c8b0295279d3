/// Maximum-weight perfect matching on a square matrix (`n x n`, row-major).
/// Returns the column assigned to each row.
///
/// Shortest augmenting paths with row/column potentials, O(n^3).
pub fn max_weight_assignment(n: usize, weight: &[i64]) -> Vec<usize> {
    assert_eq!(weight.len(), n * n);
    if n == 0 {
        return Vec::new();
    }
    let max = weight.iter().copied().max().unwrap_or(0);
    // minimize max - w, which is non-negative
    let cost = |i: usize, j: usize| max - weight[i * n + j];

    // 1-based arrays; column 0 is the virtual start
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of = vec![0usize; n];
    for j in 1..=n {
        col_of[row_of[j] - 1] = j - 1;
    }
    col_of
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_antidiagonal() {
        assert_eq!(max_weight_assignment(2, &[1, 5, 5, 1]), vec![1, 0]);
    }

    #[test]
    fn three_by_three() {
        // best: 0->2 (9), 1->0 (7), 2->1 (8) = 24
        let w = [1, 2, 9, 7, 1, 1, 1, 8, 2];
        assert_eq!(max_weight_assignment(3, &w), vec![2, 0, 1]);
    }
}
