//! Small dense linear algebra around a Jacobi SVD: rank, kernels,
//! minimum-norm solves and pivot selection for the tangency systems.

use nalgebra::DMatrix;

/// Thin SVD `m = u · diag(σ) · vt` with `σ` in decreasing order and a
/// complete `cols × cols` right basis.
struct Decomposition {
    u: DMatrix<f64>,
    singular_values: Vec<f64>,
    vt: DMatrix<f64>,
}

/// One-sided Jacobi SVD: rotates column pairs of `m` until they are
/// mutually orthogonal, accumulating the rotations in `V`.
fn svd(m: &DMatrix<f64>) -> Decomposition {
    let (rows, cols) = m.shape();
    let mut a = m.clone();
    let mut v = DMatrix::<f64>::identity(cols, cols);
    for _ in 0..80 {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..rows {
                    alpha += a[(i, p)] * a[(i, p)];
                    beta += a[(i, q)] * a[(i, q)];
                    gamma += a[(i, p)] * a[(i, q)];
                }
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for x in [&mut a, &mut v] {
                    for i in 0..x.nrows() {
                        let (xp, xq) = (x[(i, p)], x[(i, q)]);
                        x[(i, p)] = c * xp - s * xq;
                        x[(i, q)] = s * xp + c * xq;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..cols).map(|j| a.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let mut u = DMatrix::zeros(rows, cols);
    let mut vt = DMatrix::zeros(cols, cols);
    for (k, &j) in order.iter().enumerate() {
        if norms[j] > 0.0 {
            u.set_column(k, &(a.column(j) / norms[j]));
        }
        vt.set_row(k, &v.column(j).transpose());
    }
    Decomposition {
        u,
        singular_values: order.iter().map(|&j| norms[j]).collect(),
        vt,
    }
}

/// Row-major rows to a matrix with `cols` columns.
pub fn to_matrix(rows: &[Vec<f64>], cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j])
}

/// Singular values in decreasing order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    svd(m).singular_values
}

/// Number of singular values above `threshold`.
pub fn rank_above(m: &DMatrix<f64>, threshold: f64) -> usize {
    singular_values(m).iter().filter(|&&s| s > threshold).count()
}

/// Absolute threshold `rel_tol · σ_max`.
pub fn threshold(m: &DMatrix<f64>, rel_tol: f64) -> f64 {
    rel_tol * singular_values(m).first().copied().unwrap_or(0.0)
}

/// Orthonormal basis of `{x : m x = 0}` at the given absolute threshold.
pub fn nullspace(m: &DMatrix<f64>, threshold: f64) -> Vec<Vec<f64>> {
    let cols = m.ncols();
    if cols == 0 {
        return Vec::new();
    }
    let dec = svd(m);
    let mut out = Vec::new();
    for (k, &s) in dec.singular_values.iter().enumerate() {
        if s <= threshold {
            out.push(canonical_sign(dec.vt.row(k).iter().copied().collect()));
        }
    }
    out
}

/// Flips `u` so that its largest-magnitude entry is positive.
fn canonical_sign(mut u: Vec<f64>) -> Vec<f64> {
    let lead = u
        .iter()
        .copied()
        .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
    if lead < 0.0 {
        u.iter_mut().for_each(|x| *x = -*x);
    }
    u
}

/// Minimum-norm least-squares solution of `m x = b`.
pub fn min_norm_solve(m: &DMatrix<f64>, b: &[f64], threshold: f64) -> Vec<f64> {
    let cols = m.ncols();
    if m.nrows() == 0 {
        return vec![0.0; cols];
    }
    let svd = FullSvd::new(m);
    let rank = svd.rank_above(threshold);
    svd.solve(b, rank)
}

/// 2-norm condition number of a square matrix (infinite when singular).
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

/// SVD with a complete right singular basis, singular values descending.
pub struct FullSvd {
    u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    vt: DMatrix<f64>,
    rows: usize,
}

impl FullSvd {
    pub fn new(m: &DMatrix<f64>) -> Self {
        let dec = svd(m);
        FullSvd {
            u: dec.u,
            singular_values: dec.singular_values,
            vt: dec.vt,
            rows: m.nrows(),
        }
    }

    pub fn rank_above(&self, threshold: f64) -> usize {
        self.singular_values.iter().filter(|&&s| s > threshold).count()
    }

    pub fn max_singular_value(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    /// Ratio of the largest to the `rank`-th singular value.
    pub fn condition(&self, rank: usize) -> f64 {
        if rank == 0 {
            return 1.0;
        }
        let lo = self.singular_values[rank - 1];
        if lo > 0.0 {
            self.max_singular_value() / lo
        } else {
            f64::INFINITY
        }
    }

    /// Minimum-norm least-squares solution keeping the `rank` leading
    /// singular triplets.
    pub fn solve(&self, b: &[f64], rank: usize) -> Vec<f64> {
        assert_eq!(b.len(), self.rows);
        let cols = self.vt.ncols();
        let mut x = vec![0.0; cols];
        for k in 0..rank.min(self.singular_values.len()) {
            let s = self.singular_values[k];
            if s == 0.0 {
                continue;
            }
            let coef: f64 = (0..self.rows).map(|i| self.u[(i, k)] * b[i]).sum::<f64>() / s;
            for (j, xj) in x.iter_mut().enumerate() {
                *xj += coef * self.vt[(k, j)];
            }
        }
        x
    }

    /// Orthonormal basis of the complement of the `rank` leading right
    /// singular vectors.
    pub fn kernel(&self, rank: usize) -> Vec<Vec<f64>> {
        (rank..self.vt.nrows())
            .map(|k| canonical_sign(self.vt.row(k).iter().copied().collect()))
            .collect()
    }
}

/// Greedy oldest-first selection of linearly independent rows: row `k` is
/// kept iff it raises the rank of the rows kept before it.
pub fn independent_rows(rows: &[Vec<f64>], cols: usize, threshold: f64) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for k in 0..rows.len() {
        let mut trial: Vec<Vec<f64>> = kept.iter().map(|&i| rows[i].clone()).collect();
        trial.push(rows[k].clone());
        if rank_above(&to_matrix(&trial, cols), threshold) > kept.len() {
            kept.push(k);
        }
    }
    kept
}

/// Column pivoting by Gram-Schmidt: picks `rows.len()` columns making the
/// square submatrix as well-conditioned as the greedy choice allows.
/// Assumes the rows are linearly independent.
pub fn pivot_columns(rows: &[Vec<f64>], cols: usize) -> Vec<usize> {
    let r = rows.len();
    let mut columns: Vec<Vec<f64>> = (0..cols)
        .map(|j| rows.iter().map(|row| row[j]).collect())
        .collect();
    let mut chosen = Vec::with_capacity(r);
    for _ in 0..r {
        let mut best = None;
        let mut best_norm = 0.0;
        for (j, c) in columns.iter().enumerate() {
            if chosen.contains(&j) {
                continue;
            }
            let norm = c.iter().map(|x| x * x).sum::<f64>();
            if norm > best_norm {
                best_norm = norm;
                best = Some(j);
            }
        }
        let Some(j) = best else { break };
        chosen.push(j);
        let scale = best_norm.sqrt();
        let unit: Vec<f64> = columns[j].iter().map(|x| x / scale).collect();
        for c in columns.iter_mut() {
            let dot: f64 = c.iter().zip(&unit).map(|(a, b)| a * b).sum();
            c.iter_mut().zip(&unit).for_each(|(a, b)| *a -= dot * b);
        }
    }
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nullspace_of_rank_one() {
        let m = to_matrix(&[vec![1.0, 1.0, 0.0]], 3);
        let ns = nullspace(&m, 1e-12);
        assert_eq!(ns.len(), 2);
        for u in &ns {
            assert!((u[0] + u[1]).abs() < 1e-14);
            let norm: f64 = u.iter().map(|x| x * x).sum();
            assert!((norm - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn min_norm_solution() {
        let m = to_matrix(&[vec![1.0, 1.0]], 2);
        let x = min_norm_solve(&m, &[2.0], 1e-12);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn greedy_rows_and_columns() {
        let rows = vec![
            vec![1.0, 0.0, 0.0],
            vec![2.0, 0.0, 0.0],
            vec![0.0, 0.0, 3.0],
        ];
        assert_eq!(independent_rows(&rows, 3, 1e-12), vec![0, 2]);
        let sel = vec![rows[0].clone(), rows[2].clone()];
        let mut cols = pivot_columns(&sel, 3);
        cols.sort();
        assert_eq!(cols, vec![0, 2]);
    }

    #[test]
    fn tall_rank_deficient_system() {
        let rows = vec![
            vec![-1.0, 0.0, 0.0, 0.0],
            vec![0.0, -1.0, 0.0, 0.0],
            vec![0.0, 0.0, -1.0, 0.0],
            vec![0.0; 4],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, -0.3, 0.0],
            vec![9.08, 1.31, -89.18, 1.0],
        ];
        let m = to_matrix(&rows, 4);
        let dec = svd(&m);
        let s = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(dec.singular_values.clone()));
        assert!((&dec.u * s * &dec.vt - &m).amax() < 1e-13);
        let b = [3.0, -2.0, 0.0, 0.0, 0.0, 0.0, 7.0];
        let x = FullSvd::new(&m).solve(&b, 4);
        let r = &m * nalgebra::DVector::from_vec(x) - nalgebra::DVector::from_vec(b.to_vec());
        assert!(r.amax() < 1e-12, "{r}");
    }

    #[test]
    fn condition_of_singular_matrix_is_infinite() {
        let m = to_matrix(&[vec![1.0, 2.0], vec![2.0, 4.0]], 2);
        assert!(condition_number(&m) > 1e15);
        assert_eq!(condition_number(&DMatrix::identity(3, 3)), 1.0);
    }
}
