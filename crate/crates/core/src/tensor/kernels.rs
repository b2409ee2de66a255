//! Raw forward and adjoint loops over row-major `[C, H, W]` buffers.
//!
//! These functions assume shapes were validated by the caller (the graph ops do
//! this) and never allocate beyond their outputs.

/// Output extent of a strided, padded, dilated sliding window.
pub fn conv_out_extent(
    input: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    dilation: usize,
) -> Option<usize> {
    let span = dilation * (kernel - 1) + 1;
    let padded = input + 2 * padding;
    if padded < span || stride == 0 {
        return None;
    }
    Some((padded - span) / stride + 1)
}

/// Range of output indices `o` for which `o * stride + offset` lands in `[0, n_in)`.
fn valid_range(n_out: usize, n_in: usize, offset: isize, stride: usize) -> (usize, usize) {
    let s = stride as isize;
    // smallest o with o*s + offset >= 0
    let lo = if offset >= 0 {
        0
    } else {
        ((-offset) + s - 1) / s
    };
    // largest o with o*s + offset <= n_in - 1, exclusive bound
    let top = n_in as isize - 1 - offset;
    let hi = if top < 0 { 0 } else { top / s + 1 };
    let lo = lo.max(0) as usize;
    let hi = (hi.max(0) as usize).min(n_out);
    (lo, hi.max(lo))
}

#[derive(Clone, Copy, Debug)]
pub struct ConvDims {
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub c_out: usize,
    pub kh: usize,
    pub kw: usize,
    pub h_out: usize,
    pub w_out: usize,
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
}

/// Cross-correlation: `out[o,y,x] = b[o] + sum w[o,c,i,j] * in[c, y*s + i*d - p, x*s + j*d - p]`.
#[allow(clippy::needless_range_loop)]
pub fn conv2d_forward(d: &ConvDims, input: &[f64], weight: &[f64], bias: &[f64], out: &mut [f64]) {
    let plane_out = d.h_out * d.w_out;
    for co in 0..d.c_out {
        out[co * plane_out..(co + 1) * plane_out].fill(bias[co]);
    }
    for co in 0..d.c_out {
        let out_plane = &mut out[co * plane_out..(co + 1) * plane_out];
        for ci in 0..d.c_in {
            let in_plane = &input[ci * d.h * d.w..(ci + 1) * d.h * d.w];
            for ky in 0..d.kh {
                let oy_off = (ky * d.dilation) as isize - d.padding as isize;
                let (y_lo, y_hi) = valid_range(d.h_out, d.h, oy_off, d.stride);
                for kx in 0..d.kw {
                    let wv = weight[((co * d.c_in + ci) * d.kh + ky) * d.kw + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    let ox_off = (kx * d.dilation) as isize - d.padding as isize;
                    let (x_lo, x_hi) = valid_range(d.w_out, d.w, ox_off, d.stride);
                    for oy in y_lo..y_hi {
                        let iy = (oy * d.stride) as isize + oy_off;
                        let in_row = &in_plane[iy as usize * d.w..(iy as usize + 1) * d.w];
                        let out_row = &mut out_plane[oy * d.w_out..(oy + 1) * d.w_out];
                        if d.stride == 1 {
                            let start = (x_lo as isize + ox_off) as usize;
                            let src = &in_row[start..start + (x_hi - x_lo)];
                            for (o, &i) in out_row[x_lo..x_hi].iter_mut().zip(src) {
                                *o += wv * i;
                            }
                        } else {
                            for ox in x_lo..x_hi {
                                let ix = ((ox * d.stride) as isize + ox_off) as usize;
                                out_row[ox] += wv * in_row[ix];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`conv2d_forward`]: accumulates into whichever gradient buffers are given.
#[allow(clippy::needless_range_loop)]
pub fn conv2d_backward(
    d: &ConvDims,
    input: &[f64],
    weight: &[f64],
    grad_out: &[f64],
    mut grad_input: Option<&mut [f64]>,
    mut grad_weight: Option<&mut [f64]>,
    grad_bias: Option<&mut [f64]>,
) {
    let plane_out = d.h_out * d.w_out;
    if let Some(gb) = grad_bias {
        for co in 0..d.c_out {
            gb[co] += grad_out[co * plane_out..(co + 1) * plane_out]
                .iter()
                .sum::<f64>();
        }
    }
    for co in 0..d.c_out {
        let g_plane = &grad_out[co * plane_out..(co + 1) * plane_out];
        for ci in 0..d.c_in {
            let in_base = ci * d.h * d.w;
            for ky in 0..d.kh {
                let oy_off = (ky * d.dilation) as isize - d.padding as isize;
                let (y_lo, y_hi) = valid_range(d.h_out, d.h, oy_off, d.stride);
                for kx in 0..d.kw {
                    let widx = ((co * d.c_in + ci) * d.kh + ky) * d.kw + kx;
                    let wv = weight[widx];
                    let ox_off = (kx * d.dilation) as isize - d.padding as isize;
                    let (x_lo, x_hi) = valid_range(d.w_out, d.w, ox_off, d.stride);
                    let mut gw = 0.0;
                    for oy in y_lo..y_hi {
                        let iy = ((oy * d.stride) as isize + oy_off) as usize;
                        let g_row = &g_plane[oy * d.w_out..(oy + 1) * d.w_out];
                        let row_base = in_base + iy * d.w;
                        if d.stride == 1 {
                            let start = row_base + (x_lo as isize + ox_off) as usize;
                            let n = x_hi - x_lo;
                            let g_seg = &g_row[x_lo..x_hi];
                            gw += g_seg
                                .iter()
                                .zip(&input[start..start + n])
                                .map(|(g, x)| g * x)
                                .sum::<f64>();
                            if let Some(gi) = grad_input.as_deref_mut() {
                                for (a, g) in gi[start..start + n].iter_mut().zip(g_seg) {
                                    *a += wv * g;
                                }
                            }
                        } else {
                            for ox in x_lo..x_hi {
                                let ix = ((ox * d.stride) as isize + ox_off) as usize;
                                let g = g_row[ox];
                                gw += g * input[row_base + ix];
                                if let Some(gi) = grad_input.as_deref_mut() {
                                    gi[row_base + ix] += wv * g;
                                }
                            }
                        }
                    }
                    if let Some(gwb) = grad_weight.as_deref_mut() {
                        gwb[widx] += gw;
                    }
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DeconvDims {
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub c_out: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
}

impl DeconvDims {
    pub fn h_out(&self) -> usize {
        (self.h - 1) * self.stride + self.kh
    }

    pub fn w_out(&self) -> usize {
        (self.w - 1) * self.stride + self.kw
    }
}

/// Transposed convolution without padding; weight layout `[C_in, C_out, kH, kW]`.
pub fn conv_transpose2d_forward(
    d: &DeconvDims,
    input: &[f64],
    weight: &[f64],
    bias: Option<&[f64]>,
    out: &mut [f64],
) {
    let (ho, wo) = (d.h_out(), d.w_out());
    for co in 0..d.c_out {
        let b = bias.map_or(0.0, |b| b[co]);
        out[co * ho * wo..(co + 1) * ho * wo].fill(b);
    }
    for ci in 0..d.c_in {
        for iy in 0..d.h {
            for ix in 0..d.w {
                let x = input[(ci * d.h + iy) * d.w + ix];
                if x == 0.0 {
                    continue;
                }
                for co in 0..d.c_out {
                    for ky in 0..d.kh {
                        let oy = iy * d.stride + ky;
                        let wbase = ((ci * d.c_out + co) * d.kh + ky) * d.kw;
                        let obase = (co * ho + oy) * wo + ix * d.stride;
                        for kx in 0..d.kw {
                            out[obase + kx] += x * weight[wbase + kx];
                        }
                    }
                }
            }
        }
    }
}

pub fn conv_transpose2d_backward(
    d: &DeconvDims,
    input: &[f64],
    weight: &[f64],
    grad_out: &[f64],
    mut grad_input: Option<&mut [f64]>,
    mut grad_weight: Option<&mut [f64]>,
    grad_bias: Option<&mut [f64]>,
) {
    let (ho, wo) = (d.h_out(), d.w_out());
    if let Some(gb) = grad_bias {
        for co in 0..d.c_out {
            gb[co] += grad_out[co * ho * wo..(co + 1) * ho * wo]
                .iter()
                .sum::<f64>();
        }
    }
    for ci in 0..d.c_in {
        for iy in 0..d.h {
            for ix in 0..d.w {
                let in_idx = (ci * d.h + iy) * d.w + ix;
                let x = input[in_idx];
                let mut gi = 0.0;
                for co in 0..d.c_out {
                    for ky in 0..d.kh {
                        let oy = iy * d.stride + ky;
                        let wbase = ((ci * d.c_out + co) * d.kh + ky) * d.kw;
                        let obase = (co * ho + oy) * wo + ix * d.stride;
                        for kx in 0..d.kw {
                            let g = grad_out[obase + kx];
                            gi += weight[wbase + kx] * g;
                            if let Some(gw) = grad_weight.as_deref_mut() {
                                gw[wbase + kx] += x * g;
                            }
                        }
                    }
                }
                if let Some(g) = grad_input.as_deref_mut() {
                    g[in_idx] += gi;
                }
            }
        }
    }
}

/// Non-overlapping max pooling. Returns the flat argmax index of every output cell;
/// ties resolve to the first cell in row-major scan order.
pub fn max_pool2d_forward(
    c: usize,
    h: usize,
    w: usize,
    window: usize,
    input: &[f64],
    out: &mut [f64],
) -> Vec<usize> {
    let (ho, wo) = (h / window, w / window);
    let mut argmax = vec![0usize; c * ho * wo];
    for ch in 0..c {
        for oy in 0..ho {
            for ox in 0..wo {
                let mut best_idx = (ch * h + oy * window) * w + ox * window;
                let mut best = input[best_idx];
                for dy in 0..window {
                    for dx in 0..window {
                        let idx = (ch * h + oy * window + dy) * w + ox * window + dx;
                        if input[idx] > best {
                            best = input[idx];
                            best_idx = idx;
                        }
                    }
                }
                let o = (ch * ho + oy) * wo + ox;
                out[o] = best;
                argmax[o] = best_idx;
            }
        }
    }
    argmax
}
