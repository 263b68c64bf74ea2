//! Cubic Hermite interpolation on one interval.

/// Value at `x ∈ [x0, x1]` of the cubic matching `(y0, d0)` and `(y1, d1)`.
#[inline]
pub(crate) fn cubic(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let s = (x - x0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reproduces_cubics() {
        let f = |x: f64| 2.0 * x * x * x - x * x + 3.0 * x - 1.0;
        let df = |x: f64| 6.0 * x * x - 2.0 * x + 3.0;
        let (a, b) = (0.3, 1.7);
        for x in [0.3, 0.5, 1.0, 1.7] {
            let v = cubic(a, b, f(a), f(b), df(a), df(b), x);
            assert_relative_eq!(v, f(x), epsilon = 1e-13);
        }
    }
}
