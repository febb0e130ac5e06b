//! Oracles shared by unit tests.

use crate::data::SiloDataset;

/// Least-squares fit over the pooled `sets` by Gaussian elimination on the
/// normal equations. With `bias`, the intercept is the last coefficient.
pub(crate) fn least_squares(sets: &[&SiloDataset], bias: bool) -> Vec<f64> {
    let d = sets[0].dim() + usize::from(bias);
    let mut a = vec![vec![0.0; d + 1]; d];
    for s in sets {
        for i in 0..s.len() {
            let mut x = s.row(i).to_vec();
            if bias {
                x.push(1.0);
            }
            for r in 0..d {
                for c in 0..d {
                    a[r][c] += x[r] * x[c];
                }
                a[r][d] += x[r] * s.label(i);
            }
        }
    }
    for col in 0..d {
        let piv = (col..d).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        for r in 0..d {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=d {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    (0..d).map(|r| a[r][d] / a[r][r]).collect()
}
