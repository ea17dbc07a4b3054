//! Small exact and floating-point linear algebra helpers.
//!
//! Exact work is done over [`BigRational`]; complex work goes through
//! `nalgebra` with `Complex<f64>` entries.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

/// Parses `"p/q"`, `"p"` or a plain decimal such as `"0.25"` into an exact rational.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num: BigInt = num.trim().parse().ok()?;
        let den: BigInt = den.trim().parse().ok()?;
        if den.is_zero() {
            return None;
        }
        return Some(BigRational::new(num, den));
    }
    if let Some((int, frac)) = text.split_once('.') {
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let negative = int.starts_with('-');
        let int_part: BigInt = if int.is_empty() || int == "-" || int == "+" {
            BigInt::zero()
        } else {
            int.parse().ok()?
        };
        let scale = num_traits::pow(BigInt::from(10), frac.len());
        let frac_part: BigInt = frac.parse().ok()?;
        let magnitude = int_part.abs() * &scale + frac_part;
        let num = if negative { -magnitude } else { magnitude };
        return Some(BigRational::new(num, scale));
    }
    let num: BigInt = text.parse().ok()?;
    Some(BigRational::from_integer(num))
}

/// Formats a rational as `"p/q"` (or `"p"` when integral).
pub fn format_rational(value: &Rational) -> String {
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

pub fn rational_to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// Exact conversion of a finite double into a rational (every finite double is dyadic).
pub fn rational_from_f64(value: f64) -> Rational {
    BigRational::from_float(value).expect("finite double")
}

/// Exact determinant by Gaussian elimination over the rationals.
pub fn det_rational(matrix: &[Vec<Rational>]) -> Rational {
    let n = matrix.len();
    let mut a: Vec<Vec<Rational>> = matrix.to_vec();
    let mut det = Rational::one();
    for col in 0..n {
        let Some(pivot) = (col..n).find(|&r| !a[r][col].is_zero()) else {
            return Rational::zero();
        };
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        let p = a[col][col].clone();
        det *= &p;
        for r in col + 1..n {
            if a[r][col].is_zero() {
                continue;
            }
            let factor = &a[r][col] / &p;
            for c in col..n {
                let delta = &factor * &a[col][c];
                a[r][c] -= delta;
            }
        }
    }
    det
}

/// Solves `A x = b` exactly. Returns `None` when `A` is singular.
pub fn solve_rational(matrix: &[Vec<Rational>], rhs: &[Rational]) -> Option<Vec<Rational>> {
    let n = matrix.len();
    let mut a: Vec<Vec<Rational>> = matrix
        .iter()
        .zip(rhs)
        .map(|(row, b)| {
            let mut row = row.clone();
            row.push(b.clone());
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(pivot, col);
        let p = a[col][col].clone();
        for c in col..=n {
            a[col][c] = &a[col][c] / &p;
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone();
            for c in col..=n {
                let delta = &factor * &a[col][c];
                a[r][c] -= delta;
            }
        }
    }
    Some(a.into_iter().map(|row| row[n].clone()).collect())
}

pub fn transpose<T: Clone>(matrix: &[Vec<T>]) -> Vec<Vec<T>> {
    if matrix.is_empty() {
        return Vec::new();
    }
    (0..matrix[0].len())
        .map(|c| matrix.iter().map(|row| row[c].clone()).collect())
        .collect()
}

pub fn to_complex_matrix(matrix: &[Vec<Complex64>]) -> DMatrix<Complex64> {
    let n = matrix.len();
    let m = matrix.first().map_or(0, Vec::len);
    DMatrix::from_fn(n, m, |r, c| matrix[r][c])
}

pub fn det_complex(matrix: &DMatrix<Complex64>) -> Complex64 {
    if matrix.nrows() == 0 {
        return Complex64::new(1.0, 0.0);
    }
    matrix.clone().lu().determinant()
}

/// Adjugate via cofactors, `adj[i][j] = (-1)^{i+j} det(minor(j, i))`.
///
/// Works at singular matrices, which is where it is needed.
pub fn adjugate_complex(matrix: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = matrix.nrows();
    if n == 1 {
        return DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
    }
    let mut adj = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let minor = matrix.clone().remove_row(j).remove_column(i);
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            adj[(i, j)] = det_complex(&minor) * sign;
        }
    }
    adj
}

/// Largest singular value over smallest, `inf` for singular input.
pub fn condition_number(matrix: &DMatrix<Complex64>) -> f64 {
    if matrix.nrows() == 0 {
        return 1.0;
    }
    let sv = matrix.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn abs_rational(value: &Rational) -> Rational {
    value.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn parses_fractions_integers_and_decimals() {
        assert_eq!(parse_rational("3/4"), Some(q(3, 4)));
        assert_eq!(parse_rational(" -6/8 "), Some(q(-3, 4)));
        assert_eq!(parse_rational("5"), Some(q(5, 1)));
        assert_eq!(parse_rational("0.25"), Some(q(1, 4)));
        assert_eq!(parse_rational("-1.5"), Some(q(-3, 2)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("abc"), None);
        assert_eq!(format_rational(&q(6, 8)), "3/4");
        assert_eq!(format_rational(&q(4, 2)), "2");
    }

    #[test]
    fn rational_determinant_and_solve() {
        let m = vec![vec![q(2, 1), q(1, 1)], vec![q(1, 1), q(3, 1)]];
        assert_eq!(det_rational(&m), q(5, 1));
        let x = solve_rational(&m, &[q(1, 1), q(0, 1)]).unwrap();
        assert_eq!(x, vec![q(3, 5), q(-1, 5)]);
        let singular = vec![vec![q(1, 1), q(2, 1)], vec![q(2, 1), q(4, 1)]];
        assert!(det_rational(&singular).is_zero());
        assert!(solve_rational(&singular, &[q(1, 1), q(1, 1)]).is_none());
    }

    #[test]
    fn adjugate_of_singular_matrix_spans_nullspace() {
        let c = |x: f64| Complex64::new(x, 0.0);
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0), c(2.0), c(2.0), c(4.0)]);
        let adj = adjugate_complex(&m);
        let prod = &m * &adj;
        assert!(prod.iter().all(|z| z.norm() < 1e-12));
        assert!(adj.iter().any(|z| z.norm() > 0.5));
    }
}
