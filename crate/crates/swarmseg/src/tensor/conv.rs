//! Convolution-family kernels and their adjoints.
//!
//! `conv2d` is cross-correlation (no kernel flip), the convention every
//! deep-learning stack uses. `transposed_conv2d` is its exact linear adjoint:
//! for fixed kernel k, <conv(x, k), y> == <x, conv_t(y, k)> holds to
//! round-off, and the autodiff backward passes reuse these same loops.

use super::{Real, Shape4, Tensor4};
use crate::error::{Error, Result};

fn check_stride(stride: usize) -> Result<()> {
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be >= 1".into()));
    }
    Ok(())
}

fn check_bias<T: Real>(bias: Option<&Tensor4<T>>, c_out: usize) -> Result<()> {
    if let Some(b) = bias {
        let want = Shape4::new(1, c_out, 1, 1);
        if b.shape != want {
            return Err(Error::ShapeMismatch {
                context: "bias",
                left: b.shape.to_string(),
                right: want.to_string(),
            });
        }
    }
    Ok(())
}

/// floor((extent + 2*padding - k) / stride) + 1, guarded against underflow.
fn conv_out_dim(extent: usize, k: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = extent + 2 * padding;
    if padded < k {
        return None;
    }
    Some((padded - k) / stride + 1)
}

/// Forward cross-correlation.
///
/// input `[n, c_in, h, w]`, kernel `[c_out, c_in, kh, kw]`,
/// bias `[1, c_out, 1, 1]`. Output spatial dims follow the floor formula.
pub fn conv2d_raw<T: Real>(
    input: &Tensor4<T>,
    kernel: &Tensor4<T>,
    bias: Option<&Tensor4<T>>,
    stride: usize,
    padding: usize,
) -> Result<Tensor4<T>> {
    check_stride(stride)?;
    let (is, ks) = (input.shape, kernel.shape);
    if is.c != ks.c {
        return Err(Error::ShapeMismatch {
            context: "conv2d input channels vs kernel",
            left: is.to_string(),
            right: ks.to_string(),
        });
    }
    check_bias(bias, ks.n)?;
    let (oh, ow) = match (
        conv_out_dim(is.h, ks.h, stride, padding),
        conv_out_dim(is.w, ks.w, stride, padding),
    ) {
        (Some(oh), Some(ow)) => (oh, ow),
        _ => {
            return Err(Error::EmptyConvOutput {
                input: is.to_string(),
                kernel: ks.to_string(),
                stride,
                padding,
            })
        }
    };

    let os = Shape4::new(is.n, ks.n, oh, ow);
    let mut out = Tensor4::zeros(os);
    for n in 0..is.n {
        for co in 0..ks.n {
            let b = bias.map_or(T::zero(), |b| b.data[co]);
            for y in 0..oh {
                for x in 0..ow {
                    let mut acc = b;
                    for ci in 0..is.c {
                        for kh in 0..ks.h {
                            let ih = (y * stride + kh) as isize - padding as isize;
                            if ih < 0 || ih as usize >= is.h {
                                continue;
                            }
                            for kw in 0..ks.w {
                                let iw = (x * stride + kw) as isize - padding as isize;
                                if iw < 0 || iw as usize >= is.w {
                                    continue;
                                }
                                acc = acc
                                    + input.at(n, ci, ih as usize, iw as usize)
                                        * kernel.at(co, ci, kh, kw);
                            }
                        }
                    }
                    *out.at_mut(n, co, y, x) = acc;
                }
            }
        }
    }
    Ok(out)
}

/// Transposed convolution (the adjoint map of `conv2d_raw`).
///
/// input `[n, c_in, h, w]`, kernel `[c_in, c_out, kh, kw]` (note the layout:
/// the same buffer a forward conv with swapped channel roles would use),
/// bias `[1, c_out, 1, 1]`.
///
/// `output_hw`: target spatial dims. `None` means the canonical
/// `(h-1)*stride - 2*padding + kh`. Any size whose forward conv would map
/// back onto this input's dims is accepted; anything else is rejected, which
/// is what makes the adjoint identity testable without ambiguity.
pub fn transposed_conv2d_raw<T: Real>(
    input: &Tensor4<T>,
    kernel: &Tensor4<T>,
    bias: Option<&Tensor4<T>>,
    stride: usize,
    padding: usize,
    output_hw: Option<(usize, usize)>,
) -> Result<Tensor4<T>> {
    check_stride(stride)?;
    let (is, ks) = (input.shape, kernel.shape);
    if is.c != ks.n {
        return Err(Error::ShapeMismatch {
            context: "transposed_conv2d input channels vs kernel",
            left: is.to_string(),
            right: ks.to_string(),
        });
    }
    check_bias(bias, ks.c)?;

    let canonical = |extent: usize, k: usize| -> Option<usize> {
        ((extent - 1) * stride + k).checked_sub(2 * padding)
    };
    let (oh, ow) = match output_hw {
        Some(hw) => hw,
        None => match (canonical(is.h, ks.h), canonical(is.w, ks.w)) {
            (Some(h), Some(w)) if h > 0 && w > 0 => (h, w),
            _ => {
                return Err(Error::EmptyConvOutput {
                    input: is.to_string(),
                    kernel: ks.to_string(),
                    stride,
                    padding,
                })
            }
        },
    };
    // A forward conv over the requested output must land exactly on `input`.
    if conv_out_dim(oh, ks.h, stride, padding) != Some(is.h)
        || conv_out_dim(ow, ks.w, stride, padding) != Some(is.w)
    {
        return Err(Error::InvalidArgument(format!(
            "transposed_conv2d output {}x{} is not adjoint-compatible with input {} (kernel {}, stride {}, padding {})",
            oh, ow, is, ks, stride, padding
        )));
    }

    let os = Shape4::new(is.n, ks.c, oh, ow);
    let mut out = Tensor4::zeros(os);
    if let Some(b) = bias {
        for n in 0..os.n {
            for co in 0..os.c {
                let v = b.data[co];
                for y in 0..oh {
                    for x in 0..ow {
                        *out.at_mut(n, co, y, x) = v;
                    }
                }
            }
        }
    }
    // Scatter: each input cell distributes through the kernel footprint,
    // mirroring the gather in conv2d_raw term for term.
    for n in 0..is.n {
        for ci in 0..is.c {
            for h in 0..is.h {
                for w in 0..is.w {
                    let v = input.at(n, ci, h, w);
                    for co in 0..ks.c {
                        let k_base = kernel.shape.index(ci, co, 0, 0);
                        for kh in 0..ks.h {
                            let oy = (h * stride + kh) as isize - padding as isize;
                            if oy < 0 || oy as usize >= oh {
                                continue;
                            }
                            for kw in 0..ks.w {
                                let ox = (w * stride + kw) as isize - padding as isize;
                                if ox < 0 || ox as usize >= ow {
                                    continue;
                                }
                                let k = kernel.data[k_base + kh * ks.w + kw];
                                *out.at_mut(n, co, oy as usize, ox as usize) =
                                    out.at(n, co, oy as usize, ox as usize) + v * k;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Shared kernel-gradient pattern for both conv directions.
///
/// `g_k[a, b, kh, kw] = sum over n,h,w of small[n,a,h,w] *
/// large[n,b,h*stride+kh-padding, w*stride+kw-padding]` with out-of-range
/// `large` reads dropped. conv2d passes (gout, input); transposed passes
/// (input, gout). The channel layouts line up because the two kernel
/// conventions are transposes of each other.
fn correlate_kernel_grad<T: Real>(
    small: &Tensor4<T>,
    large: &Tensor4<T>,
    kh: usize,
    kw: usize,
    stride: usize,
    padding: usize,
) -> Tensor4<T> {
    let (ss, ls) = (small.shape, large.shape);
    let mut g = Tensor4::zeros(Shape4::new(ss.c, ls.c, kh, kw));
    for n in 0..ss.n {
        for a in 0..ss.c {
            for b in 0..ls.c {
                for y in 0..ss.h {
                    for x in 0..ss.w {
                        let sv = small.at(n, a, y, x);
                        if sv == T::zero() {
                            continue;
                        }
                        for i in 0..kh {
                            let lh = (y * stride + i) as isize - padding as isize;
                            if lh < 0 || lh as usize >= ls.h {
                                continue;
                            }
                            for j in 0..kw {
                                let lw = (x * stride + j) as isize - padding as isize;
                                if lw < 0 || lw as usize >= ls.w {
                                    continue;
                                }
                                *g.at_mut(a, b, i, j) = g.at(a, b, i, j)
                                    + sv * large.at(n, b, lh as usize, lw as usize);
                            }
                        }
                    }
                }
            }
        }
    }
    g
}

fn bias_grad<T: Real>(gout: &Tensor4<T>) -> Tensor4<T> {
    let s = gout.shape;
    let mut g = Tensor4::zeros(Shape4::new(1, s.c, 1, 1));
    for n in 0..s.n {
        for c in 0..s.c {
            for h in 0..s.h {
                for w in 0..s.w {
                    g.data[c] = g.data[c] + gout.at(n, c, h, w);
                }
            }
        }
    }
    g
}

pub(crate) struct ConvGrads<T: Real> {
    pub input: Option<Tensor4<T>>,
    pub kernel: Option<Tensor4<T>>,
    pub bias: Option<Tensor4<T>>,
}

pub(crate) fn conv2d_grads<T: Real>(
    input: &Tensor4<T>,
    kernel: &Tensor4<T>,
    gout: &Tensor4<T>,
    stride: usize,
    padding: usize,
    need: (bool, bool, bool),
) -> ConvGrads<T> {
    let g_input = need.0.then(|| {
        // Backward-input of a conv is a transposed conv with the same kernel
        // buffer, pinned to the original input dims.
        transposed_conv2d_raw(
            gout,
            kernel,
            None,
            stride,
            padding,
            Some((input.shape.h, input.shape.w)),
        )
        .expect("adjoint shape is valid by construction")
    });
    let g_kernel = need
        .1
        .then(|| correlate_kernel_grad(gout, input, kernel.shape.h, kernel.shape.w, stride, padding));
    let g_bias = need.2.then(|| bias_grad(gout));
    ConvGrads {
        input: g_input,
        kernel: g_kernel,
        bias: g_bias,
    }
}

pub(crate) fn transposed_conv2d_grads<T: Real>(
    input: &Tensor4<T>,
    kernel: &Tensor4<T>,
    gout: &Tensor4<T>,
    stride: usize,
    padding: usize,
    need: (bool, bool, bool),
) -> ConvGrads<T> {
    let g_input = need.0.then(|| {
        // Backward-input of a transposed conv is the forward conv.
        conv2d_raw(gout, kernel, None, stride, padding)
            .expect("adjoint shape is valid by construction")
    });
    let g_kernel = need
        .1
        .then(|| correlate_kernel_grad(input, gout, kernel.shape.h, kernel.shape.w, stride, padding));
    let g_bias = need.2.then(|| bias_grad(gout));
    ConvGrads {
        input: g_input,
        kernel: g_kernel,
        bias: g_bias,
    }
}

/// Source coordinate and blend weights for one output row/column position.
/// Half-pixel-center convention: src = (dst + 0.5) * in/out - 0.5, clamped.
#[inline]
fn bilinear_axis(dst: usize, in_dim: usize, out_dim: usize) -> (usize, usize, f64) {
    let scale = in_dim as f64 / out_dim as f64;
    let src = ((dst as f64 + 0.5) * scale - 0.5).max(0.0);
    let lo = (src.floor() as usize).min(in_dim - 1);
    let hi = (lo + 1).min(in_dim - 1);
    let frac = src - lo as f64;
    (lo, hi, frac)
}

/// Bilinear upsampling. Refuses to shrink; identity when dims match.
pub fn upsample_bilinear_raw<T: Real>(
    input: &Tensor4<T>,
    out_h: usize,
    out_w: usize,
) -> Result<Tensor4<T>> {
    let is = input.shape;
    if out_h < is.h || out_w < is.w || out_h == 0 || out_w == 0 {
        return Err(Error::UpsampleShrink {
            in_h: is.h,
            in_w: is.w,
            out_h,
            out_w,
        });
    }
    let os = Shape4::new(is.n, is.c, out_h, out_w);
    let mut out = Tensor4::zeros(os);
    for y in 0..out_h {
        let (h0, h1, fh) = bilinear_axis(y, is.h, out_h);
        for x in 0..out_w {
            let (w0, w1, fw) = bilinear_axis(x, is.w, out_w);
            let (fh_t, fw_t) = (T::from_f64_lossy(fh), T::from_f64_lossy(fw));
            let one = T::one();
            for n in 0..is.n {
                for c in 0..is.c {
                    let v = (one - fh_t) * (one - fw_t) * input.at(n, c, h0, w0)
                        + (one - fh_t) * fw_t * input.at(n, c, h0, w1)
                        + fh_t * (one - fw_t) * input.at(n, c, h1, w0)
                        + fh_t * fw_t * input.at(n, c, h1, w1);
                    *out.at_mut(n, c, y, x) = v;
                }
            }
        }
    }
    Ok(out)
}

/// Adjoint of `upsample_bilinear_raw`: scatter the same four weights back.
pub(crate) fn upsample_bilinear_backward<T: Real>(
    gout: &Tensor4<T>,
    in_h: usize,
    in_w: usize,
) -> Tensor4<T> {
    let os = gout.shape;
    let mut g = Tensor4::zeros(Shape4::new(os.n, os.c, in_h, in_w));
    for y in 0..os.h {
        let (h0, h1, fh) = bilinear_axis(y, in_h, os.h);
        for x in 0..os.w {
            let (w0, w1, fw) = bilinear_axis(x, in_w, os.w);
            let (fh_t, fw_t) = (T::from_f64_lossy(fh), T::from_f64_lossy(fw));
            let one = T::one();
            for n in 0..os.n {
                for c in 0..os.c {
                    let go = gout.at(n, c, y, x);
                    *g.at_mut(n, c, h0, w0) =
                        g.at(n, c, h0, w0) + (one - fh_t) * (one - fw_t) * go;
                    *g.at_mut(n, c, h0, w1) = g.at(n, c, h0, w1) + (one - fh_t) * fw_t * go;
                    *g.at_mut(n, c, h1, w0) = g.at(n, c, h1, w0) + fh_t * (one - fw_t) * go;
                    *g.at_mut(n, c, h1, w1) = g.at(n, c, h1, w1) + fh_t * fw_t * go;
                }
            }
        }
    }
    g
}
