//! Dense kernels: matrix exponential and checked LU solves.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative residual accepted from a resolvent solve.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[allow(clippy::excessive_precision)]
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
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

fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with diagonal Padé
/// approximants of degree 3..13 (Higham 2005).
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix exponential input"));
    }
    let id = DMatrix::<f64>::identity(n, n);
    let nrm = norm1(a);
    if nrm == 0.0 {
        return Ok(id);
    }
    let a2 = a * a;
    for &(m, theta) in &THETA {
        if nrm <= theta {
            let b: &[f64] = match m {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            // u = A Σ b_{2k+1} A^{2k}, v = Σ b_{2k} A^{2k}
            let mut u = DMatrix::zeros(n, n);
            let mut v = DMatrix::zeros(n, n);
            let mut p = id.clone();
            for k in 0..=m / 2 {
                u += &p * b[2 * k + 1];
                v += &p * b[2 * k];
                p = &p * &a2;
            }
            let u = a * u;
            return pade_solve(&u, &v);
        }
    }
    let s = ((nrm / THETA_13).log2().ceil()).max(0.0) as i32;
    let scale = 2f64.powi(-s);
    let a1 = a * scale;
    let a2 = &a1 * &a1;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &B13;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &id * b[1];
    let u = &a1 * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &id * b[0];
    let mut r = pade_solve(&u, &v)?;
    for _ in 0..s {
        r = &r * &r;
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix exponential"));
    }
    Ok(r)
}

fn pade_solve(u: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = v + u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .ok_or(Error::NonFinite("Pade denominator is singular"))
}

/// Solves `a x = b` by partial-pivot LU and returns `x` with the relative
/// residual `‖a x − b‖∞ / (‖a‖∞ ‖x‖∞ + ‖b‖∞)`.
pub fn solve_checked(a: &DMatrix<f64>, b: &DVector<f64>, rate: f64) -> Result<(DVector<f64>, f64)> {
    let x = a.clone().lu().solve(b).ok_or_else(|| Error::Resolvent {
        rate,
        reason: "singular matrix".into(),
    })?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Resolvent {
            rate,
            reason: "non-finite solution".into(),
        });
    }
    let r = a * &x - b;
    let a_inf = a
        .row_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let denom = a_inf * x.amax() + b.amax();
    let rel = if denom > 0.0 { r.amax() / denom } else { 0.0 };
    if rel > RESIDUAL_TOL {
        return Err(Error::Resolvent {
            rate,
            reason: format!("relative residual {rel:e}"),
        });
    }
    Ok((x, rel))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state_exact(a: f64, b: f64, t: f64) -> [f64; 4] {
        let g = a + b;
        let (al, be) = (b / g, a / g);
        let e = (-g * t).exp();
        [al + be * e, be - be * e, al - al * e, be + al * e]
    }

    #[test]
    fn zero_matrix_gives_identity() {
        let e = expm(&DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(e, DMatrix::identity(3, 3));
    }

    #[test]
    fn two_state_matches_closed_form_across_scales() {
        for &(a, b, t) in &[
            (0.3, 0.7, 1e-4),
            (1.0, 2.0, 0.5),
            (40.0, 3.0, 2.0),
            (5.0, 1e-3, 30.0),
        ] {
            let q = DMatrix::from_row_slice(2, 2, &[-a, a, b, -b]) * t;
            let e = expm(&q).unwrap();
            let x = two_state_exact(a, b, t);
            for k in 0..4 {
                assert!((e[(k / 2, k % 2)] - x[k]).abs() < 1e-13, "{a} {b} {t}");
            }
        }
    }

    #[test]
    fn diagonal_matrix() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![-3.0, 0.5, 2.0]));
        let e = expm(&d).unwrap();
        for (k, v) in [-3.0f64, 0.5, 2.0].iter().enumerate() {
            assert!((e[(k, k)] - v.exp()).abs() < 1e-14 * v.exp().max(1.0));
        }
    }

    #[test]
    fn checked_solve_reports_residual() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, -1.0, -2.0, 4.0]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let (x, rel) = solve_checked(&a, &b, 1.0).unwrap();
        assert!((&a * x - b).amax() < 1e-14);
        assert!(rel < 1e-15);
        assert!(solve_checked(&DMatrix::zeros(2, 2), &DVector::zeros(2), 1.0).is_err());
    }
}
