//! Exact rational linear algebra.
//!
//! Everything here works over `BigRational`, so results are exact whenever the
//! input data is rational. The floating-point pipeline in [`crate::geometry`]
//! and [`crate::gale`] is cross-checked against these routines: vertex
//! enumeration and null-space computation have no rounding story to argue
//! about when redone over the rationals.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rat = BigRational;

/// Parse a decimal literal (`-12`, `0.5`, `2.75e-3`) into an exact rational.
pub fn parse_decimal(s: &str) -> Result<Rat> {
    let s = s.trim();
    let err = || Error::Parse(format!("not a decimal number: {s:?}"));
    let (mantissa, exp10) = match s.find(['e', 'E']) {
        Some(pos) => {
            let exp: i64 = s[pos + 1..].parse().map_err(|_| err())?;
            (&s[..pos], exp)
        }
        None => (s, 0),
    };
    let (sign, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.find('.') {
        Some(pos) => (&digits[..pos], &digits[pos + 1..]),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    let mut numer = BigInt::zero();
    for c in int_part.chars().chain(frac_part.chars()) {
        let d = c.to_digit(10).ok_or_else(err)?;
        numer = numer * 10 + d;
    }
    numer *= BigInt::from(sign);
    let shift = exp10 - frac_part.len() as i64;
    let ten = BigInt::from(10);
    let rat = if shift >= 0 {
        Rat::from_integer(numer * ten.pow(shift as u32))
    } else {
        Rat::new(numer, ten.pow((-shift) as u32))
    };
    Ok(rat)
}

/// Exact rational value of a finite f64 (every finite double is rational).
pub fn rat_of_f64(x: f64) -> Rat {
    Rat::from_float(x).expect("finite float")
}

pub fn to_f64(r: &Rat) -> f64 {
    r.to_f64().expect("rational within f64 range")
}

/// Reduced row echelon form in place. Returns the pivot columns.
fn rref(m: &mut [Vec<Rat>]) -> Vec<usize> {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for x in &mut m[r] {
            *x *= &inv;
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let factor = m[i][c].clone();
                for j in 0..cols {
                    let t = &m[r][j] * &factor;
                    m[i][j] -= t;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows {
            break;
        }
    }
    pivots
}

pub fn rank(a: &[Vec<Rat>]) -> usize {
    let mut m = a.to_vec();
    rref(&mut m).len()
}

/// Solve the square system `a x = b` exactly. `None` when `a` is singular.
pub fn solve_square(a: &[Vec<Rat>], b: &[Rat]) -> Option<Vec<Rat>> {
    let n = a.len();
    let mut m: Vec<Vec<Rat>> = a
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    let pivots = rref(&mut m);
    if pivots.len() != n || pivots.iter().any(|&c| c >= n) {
        return None;
    }
    Some(m.into_iter().map(|row| row[n].clone()).collect())
}

/// Basis of the null space `{x : a x = 0}`, one vector per free column.
pub fn null_space(a: &[Vec<Rat>]) -> Vec<Vec<Rat>> {
    let cols = if a.is_empty() { 0 } else { a[0].len() };
    let mut m = a.to_vec();
    let pivots = rref(&mut m);
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&fc| {
            let mut v = vec![Rat::zero(); cols];
            v[fc] = Rat::one();
            for (r, &pc) in pivots.iter().enumerate() {
                v[pc] = -m[r][fc].clone();
            }
            v
        })
        .collect()
}

/// Exact vertex enumeration of `{x : a x + b >= 0}`: every n-subset of rows
/// that meets in a point feasible for all rows. Returns each vertex with its
/// full active set, sorted by active set; duplicates (from non-simple
/// vertices) are merged. No tolerances anywhere.
pub fn enumerate_vertices(a: &[Vec<Rat>], b: &[Rat]) -> Vec<(Vec<Rat>, Vec<usize>)> {
    let m = a.len();
    let n = if m == 0 { 0 } else { a[0].len() };
    let mut out: Vec<(Vec<Rat>, Vec<usize>)> = Vec::new();
    let mut subset: Vec<usize> = (0..n).collect();
    loop {
        let sub_a: Vec<Vec<Rat>> = subset.iter().map(|&i| a[i].clone()).collect();
        let sub_b: Vec<Rat> = subset.iter().map(|&i| -b[i].clone()).collect();
        if let Some(x) = solve_square(&sub_a, &sub_b) {
            let values: Vec<Rat> = (0..m)
                .map(|i| {
                    a[i].iter()
                        .zip(&x)
                        .map(|(c, xi)| c * xi)
                        .fold(b[i].clone(), |acc, t| acc + t)
                })
                .collect();
            if values.iter().all(|v| !v.is_negative()) {
                let active: Vec<usize> = (0..m).filter(|&i| values[i].is_zero()).collect();
                if !out.iter().any(|(p, _)| p == &x) {
                    out.push((x, active));
                }
            }
        }
        // next n-combination of 0..m in lexicographic order
        let mut i = n;
        loop {
            if i == 0 {
                return {
                    out.sort_by(|(_, s), (_, t)| s.cmp(t));
                    out
                };
            }
            i -= 1;
            if subset[i] != i + m - n {
                break;
            }
        }
        subset[i] += 1;
        for j in i + 1..n {
            subset[j] = subset[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rat {
        Rat::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn parses_decimal_strings_exactly() {
        assert_eq!(parse_decimal("0.5").unwrap(), r(1, 2));
        assert_eq!(parse_decimal("-1.25").unwrap(), r(-5, 4));
        assert_eq!(parse_decimal("3").unwrap(), r(3, 1));
        assert_eq!(parse_decimal("2.75e-3").unwrap(), r(11, 4000));
        assert_eq!(parse_decimal("1e2").unwrap(), r(100, 1));
        assert_eq!(parse_decimal(".5").unwrap(), r(1, 2));
        assert!(parse_decimal("nope").is_err());
        assert!(parse_decimal("").is_err());
        assert!(parse_decimal(".").is_err());
    }

    #[test]
    fn f64_conversion_is_exact() {
        assert_eq!(rat_of_f64(0.25), r(1, 4));
        // 0.1 is not exactly representable; its rational image is the binary value
        assert_ne!(rat_of_f64(0.1), r(1, 10));
        assert_eq!(to_f64(&rat_of_f64(0.1)), 0.1);
    }

    #[test]
    fn solves_square_systems() {
        let a = vec![vec![r(2, 1), r(1, 1)], vec![r(1, 1), r(3, 1)]];
        let b = vec![r(5, 1), r(10, 1)];
        let x = solve_square(&a, &b).unwrap();
        assert_eq!(x, vec![r(1, 1), r(3, 1)]);
        let singular = vec![vec![r(1, 1), r(2, 1)], vec![r(2, 1), r(4, 1)]];
        assert!(solve_square(&singular, &b).is_none());
    }

    #[test]
    fn null_space_of_simplex_rows() {
        // rows of the standard 2-simplex facet matrix, transposed: null space
        // of A^T is spanned by (1, 1, 1)
        let at = vec![
            vec![r(1, 1), r(0, 1), r(-1, 1)],
            vec![r(0, 1), r(1, 1), r(-1, 1)],
        ];
        let basis = null_space(&at);
        assert_eq!(basis.len(), 1);
        let v = &basis[0];
        assert_eq!(v[0], v[2]);
        assert_eq!(v[1], v[2]);
        assert_eq!(rank(&at), 2);
    }

    #[test]
    fn enumerates_unit_square_vertices() {
        let a = vec![
            vec![r(1, 1), r(0, 1)],
            vec![r(-1, 1), r(0, 1)],
            vec![r(0, 1), r(1, 1)],
            vec![r(0, 1), r(-1, 1)],
        ];
        let b = vec![r(0, 1), r(1, 1), r(0, 1), r(1, 1)];
        let verts = enumerate_vertices(&a, &b);
        assert_eq!(verts.len(), 4);
        assert_eq!(verts[0].1, vec![0, 2]); // origin: x = 0, y = 0 active
        assert!(verts.iter().any(|(p, _)| p == &vec![r(1, 1), r(1, 1)]));
    }
}
