//! Maximum-weight assignment via the Hungarian algorithm with row and
//! column potentials, O(n³) on the square padding of the input.

/// Injective map from row labels to column labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `map[row]` is the matched column, or `None` for rows left unmatched
    /// when there are more rows than columns.
    pub map: Vec<Option<usize>>,
    /// Sum of matched weights.
    pub total: f64,
}

/// Assignment maximizing the summed weight of a row-major `rows × cols`
/// matrix. Padding cells have weight zero, so only real pairs are reported.
pub fn munkres_assign(weights: &[f64], rows: usize, cols: usize) -> Assignment {
    assert_eq!(weights.len(), rows * cols, "weight matrix shape");
    let n = rows.max(cols);
    if n == 0 {
        return Assignment {
            map: Vec::new(),
            total: 0.0,
        };
    }
    let cost = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            -weights[i * cols + j]
        } else {
            0.0
        }
    };

    // 1-based arrays; p[j] is the row matched to column j.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
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
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut map = vec![None; rows];
    let mut total = 0.0;
    for j in 1..=n {
        let i = p[j];
        if i >= 1 && i - 1 < rows && j - 1 < cols {
            map[i - 1] = Some(j - 1);
            total += weights[(i - 1) * cols + (j - 1)];
        }
    }
    Assignment { map, total }
}
