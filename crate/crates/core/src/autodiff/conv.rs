//! 3×3 "same" convolution kernels, lowered to GEMM through an im2col buffer.
//!
//! Layout: input `(N, Cin, H, W)`, weight `(Cout, Cin, 3, 3)`, bias `(Cout)`.
//! The column buffer for one batch member is `(Cin·9) × (H·W)`.

pub const KERNEL: usize = 3;
const TAPS: usize = KERNEL * KERNEL;

/// Fill `cols` with the zero-padded 3×3 neighbourhoods of `input`.
fn im2col(input: &[f64], cin: usize, h: usize, w: usize, cols: &mut [f64]) {
    let hw = h * w;
    debug_assert_eq!(cols.len(), cin * TAPS * hw);
    for ci in 0..cin {
        let plane = &input[ci * hw..(ci + 1) * hw];
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = (ci * TAPS + ky * KERNEL + kx) * hw;
                let dst = &mut cols[row..row + hw];
                for y in 0..h {
                    let out_row = &mut dst[y * w..(y + 1) * w];
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        out_row.fill(0.0);
                        continue;
                    }
                    let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                    // Output x reads source x + kx - 1.
                    match kx {
                        0 => {
                            out_row[0] = 0.0;
                            out_row[1..].copy_from_slice(&src[..w - 1]);
                        }
                        1 => out_row.copy_from_slice(src),
                        _ => {
                            out_row[..w - 1].copy_from_slice(&src[1..]);
                            out_row[w - 1] = 0.0;
                        }
                    }
                }
            }
        }
    }
}

/// Scatter-add a column buffer back onto the image grid (adjoint of `im2col`).
fn col2im(cols: &[f64], cin: usize, h: usize, w: usize, out: &mut [f64]) {
    let hw = h * w;
    for ci in 0..cin {
        let plane = &mut out[ci * hw..(ci + 1) * hw];
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = (ci * TAPS + ky * KERNEL + kx) * hw;
                let src = &cols[row..row + hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let col_row = &src[y * w..(y + 1) * w];
                    let dst = &mut plane[sy as usize * w..(sy as usize + 1) * w];
                    match kx {
                        0 => dst[..w - 1].iter_mut().zip(&col_row[1..]).for_each(|(d, s)| *d += s),
                        1 => dst.iter_mut().zip(col_row).for_each(|(d, s)| *d += s),
                        _ => dst[1..].iter_mut().zip(&col_row[..w - 1]).for_each(|(d, s)| *d += s),
                    }
                }
            }
        }
    }
}

/// Row-major `C = alpha·op(A)·op(B) + beta·C` with explicit strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    debug_assert!(k == 0 || (m - 1) * rsa + (k - 1) * csa < a.len());
    debug_assert!(k == 0 || (k - 1) * rsb + (n - 1) * csb < b.len());
    debug_assert!(c.len() >= m * n);
    // SAFETY: the debug assertions above spell out the bounds every caller
    // satisfies; all three buffers are live, distinct slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub struct ConvDims {
    pub n: usize,
    pub cin: usize,
    pub cout: usize,
    pub h: usize,
    pub w: usize,
}

pub fn forward(dims: &ConvDims, input: &[f64], weight: &[f64], bias: &[f64], out: &mut [f64]) {
    let ConvDims { n, cin, cout, h, w } = *dims;
    let hw = h * w;
    let kdim = cin * TAPS;
    let mut cols = vec![0.0; kdim * hw];
    for b in 0..n {
        im2col(&input[b * cin * hw..(b + 1) * cin * hw], cin, h, w, &mut cols);
        let dst = &mut out[b * cout * hw..(b + 1) * cout * hw];
        for (co, plane) in dst.chunks_exact_mut(hw).enumerate() {
            plane.fill(bias[co]);
        }
        gemm(cout, kdim, hw, weight, (kdim, 1), &cols, (hw, 1), 1.0, dst);
    }
}

/// Accumulates into whichever of the three gradient buffers is present.
pub fn backward(
    dims: &ConvDims,
    input: &[f64],
    weight: &[f64],
    grad_out: &[f64],
    grad_input: Option<&mut [f64]>,
    grad_weight: Option<&mut [f64]>,
    grad_bias: Option<&mut [f64]>,
) {
    let ConvDims { n, cin, cout, h, w } = *dims;
    let hw = h * w;
    let kdim = cin * TAPS;
    let mut cols = vec![0.0; kdim * hw];

    if let Some(gb) = grad_bias {
        for b in 0..n {
            let g = &grad_out[b * cout * hw..(b + 1) * cout * hw];
            for (co, plane) in g.chunks_exact(hw).enumerate() {
                gb[co] += plane.iter().sum::<f64>();
            }
        }
    }

    if let Some(gw) = grad_weight {
        for b in 0..n {
            im2col(&input[b * cin * hw..(b + 1) * cin * hw], cin, h, w, &mut cols);
            let g = &grad_out[b * cout * hw..(b + 1) * cout * hw];
            // gW (Cout × K) += gOut (Cout × HW) · colsᵀ (HW × K)
            gemm(cout, hw, kdim, g, (hw, 1), &cols, (1, hw), 1.0, gw);
        }
    }

    if let Some(gi) = grad_input {
        for b in 0..n {
            let g = &grad_out[b * cout * hw..(b + 1) * cout * hw];
            // gCols (K × HW) = Wᵀ (K × Cout) · gOut (Cout × HW)
            gemm(kdim, cout, hw, weight, (1, kdim), g, (hw, 1), 0.0, &mut cols);
            col2im(&cols, cin, h, w, &mut gi[b * cin * hw..(b + 1) * cin * hw]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct nested-loop convolution.
    fn naive(dims: &ConvDims, input: &[f64], weight: &[f64], bias: &[f64]) -> Vec<f64> {
        let ConvDims { n, cin, cout, h, w } = *dims;
        let mut out = vec![0.0; n * cout * h * w];
        for b in 0..n {
            for co in 0..cout {
                for y in 0..h {
                    for x in 0..w {
                        let mut acc = bias[co];
                        for ci in 0..cin {
                            for ky in 0..3 {
                                for kx in 0..3 {
                                    let sy = y as isize + ky as isize - 1;
                                    let sx = x as isize + kx as isize - 1;
                                    if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                        continue;
                                    }
                                    let iv = input[((b * cin + ci) * h + sy as usize) * w + sx as usize];
                                    acc += weight[((co * cin + ci) * 3 + ky) * 3 + kx] * iv;
                                }
                            }
                        }
                        out[((b * cout + co) * h + y) * w + x] = acc;
                    }
                }
            }
        }
        out
    }

    fn pseudo(len: usize, seed: u64) -> Vec<f64> {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (0..len)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            })
            .collect()
    }

    #[test]
    fn matches_naive_on_odd_sizes() {
        for &(h, w) in &[(1, 1), (1, 5), (3, 2), (7, 5), (8, 8)] {
            let dims = ConvDims { n: 2, cin: 3, cout: 4, h, w };
            let input = pseudo(2 * 3 * h * w, 1);
            let weight = pseudo(4 * 3 * 9, 2);
            let bias = pseudo(4, 3);
            let mut out = vec![0.0; 2 * 4 * h * w];
            forward(&dims, &input, &weight, &bias, &mut out);
            let reference = naive(&dims, &input, &weight, &bias);
            for (a, b) in out.iter().zip(&reference) {
                assert!((a - b).abs() < 1e-12, "{h}x{w}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        let (cin, h, w) = (2, 5, 4);
        let x = pseudo(cin * h * w, 7);
        let y = pseudo(cin * 9 * h * w, 8);
        let mut cols = vec![0.0; y.len()];
        im2col(&x, cin, h, w, &mut cols);
        let lhs: f64 = cols.iter().zip(&y).map(|(a, b)| a * b).sum();
        let mut back = vec![0.0; x.len()];
        col2im(&y, cin, h, w, &mut back);
        let rhs: f64 = back.iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
