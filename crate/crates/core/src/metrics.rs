//! Metric layer: exact 1-Wasserstein between empirical marginals, normalized
//! deviation and the perturbation norms.

use crate::error::{ensure_len, invalid, Error, Result};
use crate::series::EmpiricalMarginal;
use crate::{Exact, Scalar};

fn frac<T: Exact>(num: usize, den: usize) -> T {
    T::from_usize(num).expect("count representable") / T::from_usize(den).expect("count representable")
}

/// Exact W1 between two empirical measures.
///
/// Equal sample counts use the sorted matching `(1/n) Σ |a_(i) − b_(i)|`;
/// otherwise `|F_a − F_b|` is integrated over the merged breakpoints.
pub fn wasserstein1<T: Exact>(a: &EmpiricalMarginal<T>, b: &EmpiricalMarginal<T>) -> T {
    if a.len() == b.len() {
        let n = T::from_usize(a.len()).expect("count representable");
        let total = a
            .samples()
            .iter()
            .zip(b.samples())
            .fold(T::zero(), |acc, (&x, &y)| acc + (x - y).abs());
        total / n
    } else {
        wasserstein1_cdf(a, b)
    }
}

/// W1 as `∫ |F_a(r) − F_b(r)| dr`, exact for step cdfs. Valid for any sample
/// counts.
pub fn wasserstein1_cdf<T: Exact>(a: &EmpiricalMarginal<T>, b: &EmpiricalMarginal<T>) -> T {
    let (xa, xb) = (a.samples(), b.samples());
    let (na, nb) = (xa.len(), xb.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut total = T::zero();
    let mut prev: Option<T> = None;
    // Sweep the merged order statistics; between breakpoints both cdfs are flat.
    while i < na || j < nb {
        let next = match (xa.get(i), xb.get(j)) {
            (Some(&u), Some(&v)) => if u <= v { u } else { v },
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        if let Some(p) = prev {
            let gap = frac::<T>(i, na) - frac::<T>(j, nb);
            total += gap.abs() * (next - p);
        }
        while i < na && xa[i] <= next {
            i += 1;
        }
        while j < nb && xb[j] <= next {
            j += 1;
        }
        prev = Some(next);
    }
    total
}

/// `Σ|pred − ref| / Σ|ref|` over all entries of two equally shaped matrices,
/// given flattened in the same order.
pub fn normalized_deviation<T: Exact>(predictions: &[T], references: &[T]) -> Result<T> {
    ensure_len("normalized deviation inputs", references.len(), predictions.len())?;
    let (num, den) = predictions
        .iter()
        .zip(references)
        .fold((T::zero(), T::zero()), |(n, d), (&p, &r)| (n + (p - r).abs(), d + r.abs()));
    if den == T::zero() {
        return Err(Error::DivisionByZero(
            "normalized deviation: reference values sum to zero in absolute value".into(),
        ));
    }
    Ok(num / den)
}

/// Relative perturbation size `sqrt(Σ (δ_i / max(|x_i|, floor))²)`.
pub fn relative_l2_norm<T: Scalar>(delta: &[T], x: &[T], floor: T) -> Result<T> {
    ensure_len("relative norm", x.len(), delta.len())?;
    if floor <= T::zero() {
        return Err(invalid("relative norm floor must be positive"));
    }
    Ok(delta
        .iter()
        .zip(x)
        .map(|(&d, &v)| {
            let q = d / v.abs().max(floor);
            q * q
        })
        .sum::<T>()
        .sqrt())
}

/// Gradient of `‖δ‖_x²` with respect to `δ`.
pub fn relative_l2_norm_sq_grad<T: Scalar>(delta: &[T], x: &[T], floor: T) -> Vec<T> {
    delta
        .iter()
        .zip(x)
        .map(|(&d, &v)| {
            let s = v.abs().max(floor);
            T::lit(2.0) * d / (s * s)
        })
        .collect()
}

pub fn l2_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&a| a * a).sum::<T>().sqrt()
}

pub fn l2_distance<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    ensure_len("l2 distance", a.len(), b.len())?;
    Ok(a.iter().zip(b).map(|(&u, &v)| (u - v) * (u - v)).sum::<T>().sqrt())
}
