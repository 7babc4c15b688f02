//! Small dense complex solver.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest supported system size.
pub const MAX_DIM: usize = 16;

/// Pivots with magnitude below this are treated as singular.
pub const PIVOT_FLOOR: f64 = 1e-300;

/// Solves `m y = rhs` by Gaussian elimination with partial pivoting.
///
/// `m` is row-major and consumed as scratch.
pub fn complex_solve(
    mut m: Vec<Vec<Complex64>>,
    mut rhs: Vec<Complex64>,
) -> Result<Vec<Complex64>> {
    let n = rhs.len();
    if n == 0 || n > MAX_DIM {
        return Err(Error::Dimension(format!(
            "system size {n} not in 1..={MAX_DIM}"
        )));
    }
    if m.len() != n || m.iter().any(|row| row.len() != n) {
        return Err(Error::Dimension(format!("matrix is not {n}x{n}")));
    }

    for col in 0..n {
        let (pivot_row, pivot_mag) =
            (col..n)
                .map(|r| (r, m[r][col].norm()))
                .fold(
                    (col, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
        if !(pivot_mag >= PIVOT_FLOOR) {
            return Err(Error::SingularMatrix {
                column: col,
                pivot: pivot_mag,
            });
        }
        m.swap(col, pivot_row);
        rhs.swap(col, pivot_row);

        let pivot = m[col][col];
        for r in col + 1..n {
            let factor = m[r][col] / pivot;
            if factor == Complex64::new(0.0, 0.0) {
                continue;
            }
            for c in col..n {
                let v = m[col][c];
                m[r][c] -= factor * v;
            }
            let v = rhs[col];
            rhs[r] -= factor * v;
        }
    }

    let mut y = vec![Complex64::new(0.0, 0.0); n];
    for r in (0..n).rev() {
        let mut acc = rhs[r];
        for c in r + 1..n {
            acc -= m[r][c] * y[c];
        }
        y[r] = acc / m[r][r];
    }
    Ok(y)
}
