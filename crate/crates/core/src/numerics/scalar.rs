use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating point element type of a [`Tensor`](super::Tensor).
///
/// Training runs in `f32`; gradient checks run the same code in `f64`.
pub trait Scalar:
    num_traits::Float + Default + Debug + Display + Sum + Send + Sync + 'static
{
    /// `c = a * b + beta * c` for row/column-strided matrices.
    ///
    /// `a` is `m x k`, `b` is `k x n`, `c` is `m x n`.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        a_strides: (isize, isize),
        b: &[Self],
        b_strides: (isize, isize),
        beta: Self,
        c: &mut [Self],
        c_strides: (isize, isize),
    );

    fn from_f64(v: f64) -> Self;

    fn as_f64(self) -> f64;
}

fn span(rows: usize, cols: usize, strides: (isize, isize)) -> usize {
    if rows == 0 || cols == 0 {
        return 0;
    }
    let (rs, cs) = strides;
    assert!(rs >= 0 && cs >= 0, "negative strides are not supported");
    (rows - 1) * rs as usize + (cols - 1) * cs as usize + 1
}

macro_rules! impl_scalar {
    ($t:ty, $gemm:path) => {
        impl Scalar for $t {
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                a: &[Self],
                a_strides: (isize, isize),
                b: &[Self],
                b_strides: (isize, isize),
                beta: Self,
                c: &mut [Self],
                c_strides: (isize, isize),
            ) {
                assert!(span(m, k, a_strides) <= a.len(), "gemm: lhs out of bounds");
                assert!(span(k, n, b_strides) <= b.len(), "gemm: rhs out of bounds");
                assert!(span(m, n, c_strides) <= c.len(), "gemm: output out of bounds");
                if m == 0 || n == 0 {
                    return;
                }
                // SAFETY: every index touched by the kernel lies inside the
                // spans checked above.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        1.0,
                        a.as_ptr(),
                        a_strides.0,
                        a_strides.1,
                        b.as_ptr(),
                        b_strides.0,
                        b_strides.1,
                        beta,
                        c.as_mut_ptr(),
                        c_strides.0,
                        c_strides.1,
                    );
                }
            }

            fn from_f64(v: f64) -> Self {
                v as $t
            }

            fn as_f64(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_scalar!(f32, matrixmultiply::sgemm);
impl_scalar!(f64, matrixmultiply::dgemm);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_matches_naive_product() {
        let a = [1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2x3
        let b = [7.0f64, 8.0, 9.0, 10.0, 11.0, 12.0]; // 3x2
        let mut c = [1.0f64; 4];
        f64::gemm(2, 3, 2, &a, (3, 1), &b, (2, 1), 0.0, &mut c, (2, 1));
        assert_eq!(c, [58.0, 64.0, 139.0, 154.0]);

        // transposed view of b, accumulating into c
        let bt = [7.0f64, 9.0, 11.0, 8.0, 10.0, 12.0];
        f64::gemm(2, 3, 2, &a, (3, 1), &bt, (1, 3), 1.0, &mut c, (2, 1));
        assert_eq!(c, [116.0, 128.0, 278.0, 308.0]);
    }
}
