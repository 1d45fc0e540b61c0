//! Per-sample convolution kernels built on im2col + GEMM. Everything here works
//! on raw row-major slices; shape validation happens in the tape ops.

use crate::scalar::{matmul, Scalar};

/// Geometry of a 2-D patch extraction.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Patch2d {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl Patch2d {
    pub fn rows(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    pub fn cols(&self) -> usize {
        self.out_h * self.out_w
    }
}

pub(crate) fn im2col<S: Scalar>(x: &[S], g: &Patch2d, col: &mut [S]) {
    let k = g.kernel;
    let cols = g.cols();
    for c in 0..g.channels {
        let plane = &x[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ki in 0..k {
            for kj in 0..k {
                let row = (c * k + ki) * k + kj;
                let dst = &mut col[row * cols..(row + 1) * cols];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    let line = &mut dst[oy * g.out_w..(oy + 1) * g.out_w];
                    if iy < 0 || iy >= g.height as isize {
                        line.iter_mut().for_each(|v| *v = S::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * g.width..(iy as usize + 1) * g.width];
                    for (ox, v) in line.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                        *v = if ix < 0 || ix >= g.width as isize { S::zero() } else { src[ix as usize] };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters-and-adds columns back onto the image.
pub(crate) fn col2im<S: Scalar>(col: &[S], g: &Patch2d, x: &mut [S]) {
    let k = g.kernel;
    let cols = g.cols();
    for c in 0..g.channels {
        let plane = &mut x[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ki in 0..k {
            for kj in 0..k {
                let row = (c * k + ki) * k + kj;
                let src = &col[row * cols..(row + 1) * cols];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.height as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.width..(iy as usize + 1) * g.width];
                    for ox in 0..g.out_w {
                        let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.width as isize {
                            dst[ix as usize] = dst[ix as usize] + src[oy * g.out_w + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Geometry of a dilated 1-D patch extraction with asymmetric padding.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Patch1d {
    pub channels: usize,
    pub len: usize,
    pub kernel: usize,
    pub dilation: usize,
    pub pad_left: usize,
    pub out_len: usize,
}

impl Patch1d {
    pub fn rows(&self) -> usize {
        self.channels * self.kernel
    }
}

pub(crate) fn im2col_1d<S: Scalar>(x: &[S], g: &Patch1d, col: &mut [S]) {
    for c in 0..g.channels {
        let src = &x[c * g.len..(c + 1) * g.len];
        for j in 0..g.kernel {
            let row = c * g.kernel + j;
            let dst = &mut col[row * g.out_len..(row + 1) * g.out_len];
            let shift = (j * g.dilation) as isize - g.pad_left as isize;
            for (t, v) in dst.iter_mut().enumerate() {
                let i = t as isize + shift;
                *v = if i < 0 || i >= g.len as isize { S::zero() } else { src[i as usize] };
            }
        }
    }
}

pub(crate) fn col2im_1d<S: Scalar>(col: &[S], g: &Patch1d, x: &mut [S]) {
    for c in 0..g.channels {
        let dst = &mut x[c * g.len..(c + 1) * g.len];
        for j in 0..g.kernel {
            let row = c * g.kernel + j;
            let src = &col[row * g.out_len..(row + 1) * g.out_len];
            let shift = (j * g.dilation) as isize - g.pad_left as isize;
            for (t, v) in src.iter().enumerate() {
                let i = t as isize + shift;
                if i >= 0 && i < g.len as isize {
                    dst[i as usize] = dst[i as usize] + *v;
                }
            }
        }
    }
}

/// `out (m×p) = w (m×rows) · col (rows×p) + bias` for one sample.
pub(crate) fn project<S: Scalar>(w: &[S], col: &[S], bias: Option<&[S]>, m: usize, rows: usize, p: usize, out: &mut [S]) {
    matmul(m, rows, p, w, false, col, false, out, false);
    if let Some(b) = bias {
        for (o, bv) in b.iter().enumerate() {
            out[o * p..(o + 1) * p].iter_mut().for_each(|v| *v = *v + *bv);
        }
    }
}

pub(crate) fn add_row_sums<S: Scalar>(dy: &[S], m: usize, p: usize, db: &mut [S]) {
    for o in 0..m {
        let s: S = dy[o * p..(o + 1) * p].iter().copied().sum();
        db[o] = db[o] + s;
    }
}
