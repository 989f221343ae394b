//! Symmetric eigen-decomposition (cyclic Jacobi) and principal components.

/// Eigenpairs of a symmetric row-major `n x n` matrix, sorted by descending
/// eigenvalue. Each eigenvector's largest-magnitude entry is made positive.
pub fn symmetric_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| m[b * n + b].partial_cmp(&m[a * n + a]).unwrap().then(a.cmp(&b)));
    let values = order.iter().map(|&i| m[i * n + i]).collect();
    let vectors = order
        .iter()
        .map(|&i| {
            let mut col: Vec<f64> = (0..n).map(|k| v[k * n + i]).collect();
            let big = col
                .iter()
                .copied()
                .fold(0.0_f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
            if big < 0.0 {
                col.iter_mut().for_each(|x| *x = -*x);
            }
            col
        })
        .collect();
    (values, vectors)
}

/// Mean and population covariance (row-major) of equally sized rows.
pub fn mean_and_covariance(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows[0].len();
    let count = rows.len() as f64;
    let mut mean = vec![0.0; n];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    let mut cov = vec![0.0; n * n];
    let mut c = vec![0.0; n];
    for r in rows {
        for k in 0..n {
            c[k] = r[k] - mean[k];
        }
        for i in 0..n {
            let ci = c[i];
            if ci == 0.0 {
                continue;
            }
            let row = &mut cov[i * n..(i + 1) * n];
            for j in i..n {
                row[j] += ci * c[j];
            }
        }
    }
    for i in 0..n {
        for j in i..n {
            let x = cov[i * n + j] / count;
            cov[i * n + j] = x;
            cov[j * n + i] = x;
        }
    }
    (mean, cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reconstructs_random_symmetric_matrix() {
        let n = 12;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let x: f64 = rng.random_range(-1.0..1.0);
                a[i * n + j] = x;
                a[j * n + i] = x;
            }
        }
        let (vals, vecs) = symmetric_eigen(&a, n);
        for w in vals.windows(2) {
            assert!(w[0] >= w[1]);
        }
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = vecs[i].iter().zip(&vecs[j]).map(|(x, y)| x * y).sum();
                assert!((dot - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
                let rec: f64 = (0..n).map(|k| vals[k] * vecs[k][i] * vecs[k][j]).sum();
                assert!((rec - a[i * n + j]).abs() < 1e-12);
            }
        }
        // Oracle: nalgebra's solver gives the same spectrum.
        let m = nalgebra::DMatrix::from_row_slice(n, n, &a);
        let mut want: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
        want.sort_by(|x, y| y.partial_cmp(x).unwrap());
        for (g, w) in vals.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_input_is_already_solved() {
        let a = [3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0];
        let (vals, vecs) = symmetric_eigen(&a, 3);
        assert_eq!(vals, vec![3.0, 2.0, 1.0]);
        assert_eq!(vecs[1], vec![0.0, 0.0, 1.0]);
    }
}
