//! Matrix exponential of CTMC generators.
//!
//! Scaling and squaring with the degree-13 Padé approximant (Higham, 2005).
//! The input is scaled by `2^-s` so that its 1-norm is at most
//! [`PADE13_THETA`], the approximant is evaluated with three matrix products
//! and one LU solve, and the result is squared `s` times.

use alloc::string::String;

use num_traits::Float;


use crate::model::{validate_generator, ModelError};
use crate::Matrix;

/// 1-norm threshold below which the degree-13 approximant meets double
/// precision backward error.
pub const PADE13_THETA: f64 = 5.371920351148152;

/// Rows of the output are renormalized only when they are this close to one.
pub const RENORMALIZE_TOL: f64 = 1e-9;

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExpmError {
    #[error("input is not a generator: {0}")]
    Validation(ModelError),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

fn one_norm(m: &Matrix) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Exponential of an arbitrary square matrix by Padé-13 scaling and squaring.
pub fn expm_general(a: &Matrix) -> Result<Matrix, ExpmError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(ExpmError::Numeric("matrix is not square".into()));
    }
    let norm = one_norm(a);
    if !norm.is_finite() {
        return Err(ExpmError::Numeric("non-finite input".into()));
    }
    let s = if norm > PADE13_THETA {
        Float::ceil(Float::log2(norm / PADE13_THETA)) as i32
    } else {
        0
    };
    let a = a * Float::powi(2f64, -s);
    let ident = Matrix::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE13;

    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &ident * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &ident * b[0];

    let lu = (&v - &u).lu();
    let mut r = lu
        .solve(&(&v + &u))
        .ok_or_else(|| ExpmError::Numeric("singular Padé denominator".into()))?;
    for _ in 0..s {
        r = &r * &r;
    }
    if r.iter().any(|x| !x.is_finite()) {
        return Err(ExpmError::Numeric("non-finite result".into()));
    }
    Ok(r)
}

/// `exp(Q)` for a generator `Q`, returned as a row-stochastic matrix.
///
/// Round-off negatives below `1e-12` in magnitude are clamped to zero and
/// rows are renormalized when their sums deviate from one by less than
/// [`RENORMALIZE_TOL`]; larger deviations are reported as numeric errors.
pub fn expm(q: &Matrix) -> Result<Matrix, ExpmError> {
    validate_generator(0, q).map_err(ExpmError::Validation)?;
    let mut p = expm_general(q)?;
    let n = p.nrows();
    for i in 0..n {
        let mut sum = 0.0;
        for j in 0..n {
            let v = p[(i, j)];
            if v < 0.0 {
                if v < -1e-12 {
                    return Err(ExpmError::Numeric(alloc::format!(
                        "entry ({i}, {j}) = {v} is negative"
                    )));
                }
                p[(i, j)] = 0.0;
            }
            sum += p[(i, j)];
        }
        if (sum - 1.0).abs() >= RENORMALIZE_TOL {
            return Err(ExpmError::Numeric(alloc::format!(
                "row {i} sums to {sum}"
            )));
        }
        for j in 0..n {
            p[(i, j)] /= sum;
        }
    }
    Ok(p)
}
