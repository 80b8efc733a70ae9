//! Primitive tensor operations and their vector-Jacobian products.
//!
//! Convolutions are lowered to GEMM through an im2col buffer laid out as
//! `(channels * k * k) x (out_h * out_w)`. A transposed convolution is the
//! adjoint of the convolution with the same geometry, so it reuses the same
//! two lowering routines with their roles swapped.

use crate::error::{Error, Result};

use super::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Geometry {
    kernel: usize,
    stride: usize,
    padding: usize,
}

impl Geometry {
    fn new(kernel: usize, stride: usize, padding: usize) -> Result<Self> {
        if kernel == 0 || stride == 0 {
            return Err(Error::dim(format!(
                "kernel ({kernel}) and stride ({stride}) must be positive"
            )));
        }
        Ok(Self { kernel, stride, padding })
    }

    /// Output extent of a convolution over an axis of length `len`.
    fn conv_out(&self, len: usize) -> Result<usize> {
        let padded = len + 2 * self.padding;
        if padded < self.kernel {
            return Err(Error::dim(format!(
                "kernel {} larger than padded extent {padded}",
                self.kernel
            )));
        }
        Ok((padded - self.kernel) / self.stride + 1)
    }

    /// Output extent of a transposed convolution over an axis of length `len`.
    fn transposed_out(&self, len: usize) -> Result<usize> {
        let full = (len.max(1) - 1) * self.stride + self.kernel;
        if len == 0 || full <= 2 * self.padding {
            return Err(Error::dim(format!(
                "transposed convolution of extent {len} collapses to nothing"
            )));
        }
        Ok(full - 2 * self.padding)
    }
}

/// Image and column-grid extents shared by `im2col` / `col2im`.
#[derive(Clone, Copy)]
struct Lowering {
    channels: usize,
    height: usize,
    width: usize,
    grid_h: usize,
    grid_w: usize,
    geo: Geometry,
}

impl Lowering {
    fn rows(&self) -> usize {
        self.channels * self.geo.kernel * self.geo.kernel
    }

    fn cols(&self) -> usize {
        self.grid_h * self.grid_w
    }

    fn is_pointwise(&self) -> bool {
        self.geo.kernel == 1 && self.geo.stride == 1 && self.geo.padding == 0
    }

    /// Output columns `ox` whose input column `ox * s + kj - p` lies inside the image.
    fn valid_cols(&self, kj: usize) -> (usize, usize) {
        let Geometry { stride: s, padding: p, .. } = self.geo;
        let lo = p.saturating_sub(kj).div_ceil(s).min(self.grid_w);
        let hi = if self.width + p > kj { (self.width + p - kj).div_ceil(s).min(self.grid_w) } else { 0 };
        (lo, hi.max(lo))
    }

    fn im2col<T: Scalar>(&self, image: &[T], cols: &mut [T]) {
        let Geometry { kernel: k, stride: s, padding: p } = self.geo;
        let (gh, gw) = (self.grid_h, self.grid_w);
        let mut row = 0;
        for c in 0..self.channels {
            let plane = &image[c * self.height * self.width..(c + 1) * self.height * self.width];
            for ki in 0..k {
                for kj in 0..k {
                    let (lo, hi) = self.valid_cols(kj);
                    let out = &mut cols[row * gh * gw..(row + 1) * gh * gw];
                    for oy in 0..gh {
                        let line = &mut out[oy * gw..(oy + 1) * gw];
                        let iy = (oy * s + ki) as isize - p as isize;
                        if iy < 0 || iy >= self.height as isize || lo == hi {
                            line.fill(T::zero());
                            continue;
                        }
                        line[..lo].fill(T::zero());
                        line[hi..].fill(T::zero());
                        let src = &plane[iy as usize * self.width..(iy as usize + 1) * self.width];
                        let start = lo * s + kj - p;
                        if s == 1 {
                            line[lo..hi].copy_from_slice(&src[start..start + hi - lo]);
                        } else {
                            for (dst, &v) in line[lo..hi].iter_mut().zip(src[start..].iter().step_by(s)) {
                                *dst = v;
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
    }

    /// Scatter-adds a column buffer back into an image (which is not cleared).
    fn col2im<T: Scalar>(&self, cols: &[T], image: &mut [T]) {
        let Geometry { kernel: k, stride: s, padding: p } = self.geo;
        let (gh, gw) = (self.grid_h, self.grid_w);
        let mut row = 0;
        for c in 0..self.channels {
            let plane =
                &mut image[c * self.height * self.width..(c + 1) * self.height * self.width];
            for ki in 0..k {
                for kj in 0..k {
                    let (lo, hi) = self.valid_cols(kj);
                    let src = &cols[row * gh * gw..(row + 1) * gh * gw];
                    row += 1;
                    if lo == hi {
                        continue;
                    }
                    let start = lo * s + kj - p;
                    for oy in 0..gh {
                        let iy = (oy * s + ki) as isize - p as isize;
                        if iy < 0 || iy >= self.height as isize {
                            continue;
                        }
                        let dst =
                            &mut plane[iy as usize * self.width..(iy as usize + 1) * self.width];
                        let line = &src[oy * gw + lo..oy * gw + hi];
                        if s == 1 {
                            for (d, &v) in dst[start..start + hi - lo].iter_mut().zip(line) {
                                *d = *d + v;
                            }
                        } else {
                            for (d, &v) in dst[start..].iter_mut().step_by(s).zip(line) {
                                *d = *d + v;
                            }
                        }
                    }
                }
            }
        }
    }
}

fn check_bias<T: Scalar>(bias: &Tensor<T>, channels: usize) -> Result<()> {
    if bias.shape() != [channels] {
        return Err(Error::dim(format!(
            "bias shape {:?} does not match {channels} output channels",
            bias.shape()
        )));
    }
    Ok(())
}

fn square_kernel(shape: &[usize], what: &str) -> Result<(usize, usize, usize)> {
    match *shape {
        [a, b, kh, kw] if kh == kw => Ok((a, b, kh)),
        _ => Err(Error::dim(format!("{what} weight must be 4-d with a square kernel, got {shape:?}"))),
    }
}

struct ConvPlan {
    n: usize,
    in_ch: usize,
    out_ch: usize,
    lowering: Lowering,
    out_h: usize,
    out_w: usize,
}

fn plan_conv<T: Scalar>(input: &Tensor<T>, weight: &Tensor<T>, stride: usize, padding: usize) -> Result<ConvPlan> {
    let (n, c, h, w) = input.dims4()?;
    let (out_ch, in_ch, k) = square_kernel(weight.shape(), "conv2d")?;
    if c != in_ch {
        return Err(Error::dim(format!(
            "conv2d input has {c} channels, weight expects {in_ch}"
        )));
    }
    let geo = Geometry::new(k, stride, padding)?;
    let (out_h, out_w) = (geo.conv_out(h)?, geo.conv_out(w)?);
    Ok(ConvPlan {
        n,
        in_ch,
        out_ch,
        lowering: Lowering { channels: c, height: h, width: w, grid_h: out_h, grid_w: out_w, geo },
        out_h,
        out_w,
    })
}

/// 2-d cross-correlation with zero padding.
///
/// `weight` is `out_ch x in_ch x k x k`; `bias` has `out_ch` entries.
pub fn conv2d<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    let plan = plan_conv(input, weight, stride, padding)?;
    check_bias(bias, plan.out_ch)?;
    input.check_finite("conv2d input")?;
    let low = plan.lowering;
    let (rows, cols) = (low.rows(), low.cols());
    let mut out = vec![T::zero(); plan.n * plan.out_ch * cols];
    let mut buf = if low.is_pointwise() { Vec::new() } else { vec![T::zero(); rows * cols] };
    for b in 0..plan.n {
        let x = input.batch_slice(b);
        let colbuf: &[T] = if low.is_pointwise() {
            x
        } else {
            low.im2col(x, &mut buf);
            &buf
        };
        let y = &mut out[b * plan.out_ch * cols..(b + 1) * plan.out_ch * cols];
        for (co, &bv) in bias.data().iter().enumerate() {
            y[co * cols..(co + 1) * cols].fill(bv);
        }
        T::gemm(
            plan.out_ch,
            rows,
            cols,
            weight.data(),
            (rows as isize, 1),
            colbuf,
            (cols as isize, 1),
            T::one(),
            y,
            (cols as isize, 1),
        );
    }
    Tensor::from_vec_unchecked(vec![plan.n, plan.out_ch, plan.out_h, plan.out_w], out)
}

/// Gradients of [`conv2d`] given the output adjoint.
///
/// Returns `(d_input, d_weight, d_bias)`; `d_input` is skipped when
/// `want_input` is false.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
    stride: usize,
    padding: usize,
    want_input: bool,
) -> Result<(Option<Tensor<T>>, Tensor<T>, Tensor<T>)> {
    let plan = plan_conv(input, weight, stride, padding)?;
    let low = plan.lowering;
    let (rows, cols) = (low.rows(), low.cols());
    if grad_out.shape() != [plan.n, plan.out_ch, plan.out_h, plan.out_w] {
        return Err(Error::dim("conv2d output gradient has the wrong shape"));
    }
    let mut d_weight = vec![T::zero(); plan.out_ch * rows];
    let mut d_bias = vec![T::zero(); plan.out_ch];
    let mut d_input = want_input.then(|| vec![T::zero(); input.len()]);
    let mut buf = vec![T::zero(); rows * cols];
    let per_in = plan.in_ch * low.height * low.width;
    for b in 0..plan.n {
        let dy = grad_out.batch_slice(b);
        for (co, db) in d_bias.iter_mut().enumerate() {
            *db = *db + dy[co * cols..(co + 1) * cols].iter().copied().sum::<T>();
        }
        let x = input.batch_slice(b);
        let colbuf: &[T] = if low.is_pointwise() {
            x
        } else {
            low.im2col(x, &mut buf);
            &buf
        };
        // dW += dY (out_ch x cols) * cols^T (cols x rows)
        T::gemm(
            plan.out_ch,
            cols,
            rows,
            dy,
            (cols as isize, 1),
            colbuf,
            (1, cols as isize),
            T::one(),
            &mut d_weight,
            (rows as isize, 1),
        );
        if let Some(dx) = d_input.as_mut() {
            let dx = &mut dx[b * per_in..(b + 1) * per_in];
            if low.is_pointwise() {
                T::gemm(plan.in_ch, plan.out_ch, cols, weight.data(), (1, rows as isize), dy, (cols as isize, 1), T::zero(), dx, (cols as isize, 1));
            } else {
                T::gemm(rows, plan.out_ch, cols, weight.data(), (1, rows as isize), dy, (cols as isize, 1), T::zero(), &mut buf, (cols as isize, 1));
                low.col2im(&buf, dx);
            }
        }
    }
    let d_input = d_input
        .map(|d| Tensor::from_vec_unchecked(input.shape().to_vec(), d))
        .transpose()?;
    Ok((
        d_input,
        Tensor::from_vec_unchecked(weight.shape().to_vec(), d_weight)?,
        Tensor::from_vec_unchecked(vec![plan.out_ch], d_bias)?,
    ))
}

fn plan_transposed<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<ConvPlan> {
    let (n, c, h, w) = input.dims4()?;
    let (in_ch, out_ch, k) = square_kernel(weight.shape(), "transposed_conv2d")?;
    if c != in_ch {
        return Err(Error::dim(format!(
            "transposed_conv2d input has {c} channels, weight expects {in_ch}"
        )));
    }
    let geo = Geometry::new(k, stride, padding)?;
    let (out_h, out_w) = (geo.transposed_out(h)?, geo.transposed_out(w)?);
    debug_assert_eq!(geo.conv_out(out_h)?, h);
    Ok(ConvPlan {
        n,
        in_ch,
        out_ch,
        // the lowering is expressed over the *output* image; the grid is the input
        lowering: Lowering { channels: out_ch, height: out_h, width: out_w, grid_h: h, grid_w: w, geo },
        out_h,
        out_w,
    })
}

/// Transposed 2-d convolution (fractionally strided convolution).
///
/// `weight` is `in_ch x out_ch x k x k`; output extent is
/// `(H - 1) * stride - 2 * padding + k`.
pub fn transposed_conv2d<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    let plan = plan_transposed(input, weight, stride, padding)?;
    check_bias(bias, plan.out_ch)?;
    input.check_finite("transposed_conv2d input")?;
    let low = plan.lowering;
    let (rows, cols) = (low.rows(), low.cols());
    let plane = plan.out_h * plan.out_w;
    let mut out = vec![T::zero(); plan.n * plan.out_ch * plane];
    let mut buf = vec![T::zero(); rows * cols];
    for b in 0..plan.n {
        let x = input.batch_slice(b);
        // cols = W^T (rows x in_ch) * x (in_ch x cols)
        T::gemm(rows, plan.in_ch, cols, weight.data(), (1, rows as isize), x, (cols as isize, 1), T::zero(), &mut buf, (cols as isize, 1));
        let y = &mut out[b * plan.out_ch * plane..(b + 1) * plan.out_ch * plane];
        for (co, &bv) in bias.data().iter().enumerate() {
            y[co * plane..(co + 1) * plane].fill(bv);
        }
        low.col2im(&buf, y);
    }
    Tensor::from_vec_unchecked(vec![plan.n, plan.out_ch, plan.out_h, plan.out_w], out)
}

/// Gradients of [`transposed_conv2d`]; same conventions as [`conv2d_backward`].
pub fn transposed_conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
    stride: usize,
    padding: usize,
    want_input: bool,
) -> Result<(Option<Tensor<T>>, Tensor<T>, Tensor<T>)> {
    let plan = plan_transposed(input, weight, stride, padding)?;
    let low = plan.lowering;
    let (rows, cols) = (low.rows(), low.cols());
    if grad_out.shape() != [plan.n, plan.out_ch, plan.out_h, plan.out_w] {
        return Err(Error::dim("transposed_conv2d output gradient has the wrong shape"));
    }
    let plane = plan.out_h * plan.out_w;
    let mut d_weight = vec![T::zero(); plan.in_ch * rows];
    let mut d_bias = vec![T::zero(); plan.out_ch];
    let mut d_input = want_input.then(|| vec![T::zero(); input.len()]);
    let mut buf = vec![T::zero(); rows * cols];
    for b in 0..plan.n {
        let dy = grad_out.batch_slice(b);
        for (co, db) in d_bias.iter_mut().enumerate() {
            *db = *db + dy[co * plane..(co + 1) * plane].iter().copied().sum::<T>();
        }
        low.im2col(dy, &mut buf);
        let x = input.batch_slice(b);
        // dW (in_ch x rows) += x (in_ch x cols) * buf^T (cols x rows)
        T::gemm(plan.in_ch, cols, rows, x, (cols as isize, 1), &buf, (1, cols as isize), T::one(), &mut d_weight, (rows as isize, 1));
        if let Some(dx) = d_input.as_mut() {
            let dx = &mut dx[b * plan.in_ch * cols..(b + 1) * plan.in_ch * cols];
            T::gemm(plan.in_ch, rows, cols, weight.data(), (rows as isize, 1), &buf, (cols as isize, 1), T::zero(), dx, (cols as isize, 1));
        }
    }
    let d_input = d_input
        .map(|d| Tensor::from_vec_unchecked(input.shape().to_vec(), d))
        .transpose()?;
    Ok((
        d_input,
        Tensor::from_vec_unchecked(weight.shape().to_vec(), d_weight)?,
        Tensor::from_vec_unchecked(vec![plan.out_ch], d_bias)?,
    ))
}

pub fn relu<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Subgradient at zero is taken as zero.
pub fn relu_backward<T: Scalar>(input: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::from_vec_unchecked(input.shape().to_vec(), data).expect("shape preserved")
}

pub fn add<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.shape() != b.shape() {
        return Err(Error::dim(format!("add of {:?} and {:?}", a.shape(), b.shape())));
    }
    let mut out = a.clone();
    out.add_assign(b);
    Ok(out)
}

/// Concatenates along the channel axis; `a` occupies the leading block.
pub fn concat_channels<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, ca, h, w) = a.dims4()?;
    let (nb, cb, hb, wb) = b.dims4()?;
    if (n, h, w) != (nb, hb, wb) {
        return Err(Error::dim(format!(
            "concat_channels of {:?} and {:?}: batch/spatial extents differ",
            a.shape(),
            b.shape()
        )));
    }
    let mut out = Vec::with_capacity(n * (ca + cb) * h * w);
    for i in 0..n {
        out.extend_from_slice(a.batch_slice(i));
        out.extend_from_slice(b.batch_slice(i));
    }
    Tensor::from_vec_unchecked(vec![n, ca + cb, h, w], out)
}

/// Splits a channel-concatenated gradient back into its two operands.
pub fn split_channels<T: Scalar>(grad: &Tensor<T>, lead: usize) -> Result<(Tensor<T>, Tensor<T>)> {
    let (n, c, h, w) = grad.dims4()?;
    if lead > c {
        return Err(Error::dim("split point beyond channel extent"));
    }
    let plane = h * w;
    let mut a = Vec::with_capacity(n * lead * plane);
    let mut b = Vec::with_capacity(n * (c - lead) * plane);
    for i in 0..n {
        let s = grad.batch_slice(i);
        a.extend_from_slice(&s[..lead * plane]);
        b.extend_from_slice(&s[lead * plane..]);
    }
    Ok((
        Tensor::from_vec_unchecked(vec![n, lead, h, w], a)?,
        Tensor::from_vec_unchecked(vec![n, c - lead, h, w], b)?,
    ))
}

fn l1_normalizer<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<usize> {
    if pred.shape() != target.shape() {
        return Err(Error::dim(format!(
            "l1_loss of {:?} against {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    if pred.is_empty() {
        return Err(Error::dim("l1_loss of empty tensors"));
    }
    Ok(pred.len())
}

/// `sum |pred - target| / (C * H * W)`, averaged over the batch.
pub fn l1_loss<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<T> {
    let count = l1_normalizer(pred, target)?;
    let total: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| (p - t).abs().as_f64())
        .sum();
    Ok(T::from_f64(total / count as f64))
}

/// Gradient of [`l1_loss`] with respect to `pred`; the target gradient is its negation.
pub fn l1_loss_backward<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>, seed: T) -> Result<Tensor<T>> {
    let count = l1_normalizer(pred, target)?;
    let scale = seed / T::from_f64(count as f64);
    let data = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            if p > t {
                scale
            } else if p < t {
                -scale
            } else {
                T::zero()
            }
        })
        .collect();
    Tensor::from_vec_unchecked(pred.shape().to_vec(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(shape: &[usize]) -> Tensor<f64> {
        Tensor::full(shape, 1.0)
    }

    #[test]
    fn constant_field_counts_overlapping_taps() {
        let y = conv2d(&ones(&[1, 1, 3, 3]), &ones(&[1, 1, 3, 3]), &Tensor::zeros(&[1]), 1, 1).unwrap();
        assert_eq!(y.shape(), [1, 1, 3, 3]);
        assert_eq!(y.data()[4], 9.0);
        assert_eq!(y.data()[0], 4.0);
        assert_eq!(y.data()[1], 6.0);
    }

    #[test]
    fn identity_kernel_is_exact() {
        let x = Tensor::from_fn(&[2, 1, 3, 4], |i| (i as f64 * 0.37).sin());
        let y = conv2d(&x, &ones(&[1, 1, 1, 1]), &Tensor::zeros(&[1]), 1, 0).unwrap();
        assert_eq!(y, x);
        let yt = transposed_conv2d(&x, &ones(&[1, 1, 1, 1]), &Tensor::zeros(&[1]), 1, 0).unwrap();
        assert_eq!(yt, x);
    }

    #[test]
    fn transposed_single_tap_scatter() {
        let v = 0.75;
        let x = Tensor::full(&[1, 1, 1, 1], v);
        let y = transposed_conv2d(&x, &ones(&[1, 1, 2, 2]), &Tensor::zeros(&[1]), 2, 0).unwrap();
        assert_eq!(y.shape(), [1, 1, 2, 2]);
        assert!(y.data().iter().all(|&o| o == v));
    }

    #[test]
    fn output_extent_formulas() {
        let x = Tensor::<f32>::zeros(&[1, 2, 64, 64]);
        let y = conv2d(&x, &Tensor::zeros(&[4, 2, 3, 3]), &Tensor::zeros(&[4]), 2, 1).unwrap();
        assert_eq!(y.shape(), [1, 4, 32, 32]);
        let z = transposed_conv2d(&y, &Tensor::zeros(&[4, 2, 4, 4]), &Tensor::zeros(&[2]), 2, 1).unwrap();
        assert_eq!(z.shape(), [1, 2, 64, 64]);
    }

    #[test]
    fn shape_and_numeric_errors() {
        let x = Tensor::<f32>::zeros(&[1, 2, 4, 4]);
        let w = Tensor::<f32>::zeros(&[1, 3, 3, 3]);
        assert!(matches!(conv2d(&x, &w, &Tensor::zeros(&[1]), 1, 1), Err(Error::Dimension(_))));
        let w = Tensor::<f32>::zeros(&[1, 2, 3, 3]);
        assert!(matches!(conv2d(&x, &w, &Tensor::zeros(&[2]), 1, 1), Err(Error::Dimension(_))));
        let mut bad = x.clone();
        bad.data_mut()[3] = f32::INFINITY;
        assert!(matches!(conv2d(&bad, &w, &Tensor::zeros(&[1]), 1, 1), Err(Error::NonFinite(_))));
        let a = Tensor::<f32>::zeros(&[1, 1, 2, 2]);
        let b = Tensor::<f32>::zeros(&[1, 1, 2, 3]);
        assert!(matches!(concat_channels(&a, &b), Err(Error::Dimension(_))));
        assert!(matches!(l1_loss(&a, &b), Err(Error::Dimension(_))));
    }

    #[test]
    fn relu_examples() {
        let x = Tensor::new(vec![3], vec![-1.0f32, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), [0.0, 0.0, 2.0]);
        let g = relu_backward(&x, &Tensor::full(&[3], 1.0));
        assert_eq!(g.data(), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn concat_places_first_operand_first() {
        let a = Tensor::new(vec![1, 1, 2, 2], vec![1.0f32, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor::new(vec![1, 1, 2, 2], vec![5.0f32, 6.0, 7.0, 8.0]).unwrap();
        let c = concat_channels(&a, &b).unwrap();
        assert_eq!(c.shape(), [1, 2, 2, 2]);
        assert_eq!(&c.data()[..4], a.data());
        let empty = Tensor::<f32>::zeros(&[1, 0, 2, 2]);
        assert_eq!(concat_channels(&a, &empty).unwrap(), a);
        let (sa, sb) = split_channels(&c, 1).unwrap();
        assert_eq!((sa, sb), (a, b));
    }

    #[test]
    fn l1_examples() {
        let t = Tensor::from_fn(&[2, 3, 2, 2], |i| i as f64 * 0.1);
        assert_eq!(l1_loss(&t, &t).unwrap(), 0.0);
        let p = t.map(|v| v + 0.5);
        assert!((l1_loss(&p, &t).unwrap() - 0.5).abs() < 1e-12);
        let g = l1_loss_backward(&p, &t, 1.0).unwrap();
        assert!(g.data().iter().all(|&v| (v - 1.0 / 24.0).abs() < 1e-15));
    }
}
