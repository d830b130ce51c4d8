//! Windowed structural similarity between scalar grids.
//!
//! The local statistics are uniform means over an odd square window; the
//! reported value is the mean local SSIM over every window position that
//! fully fits the slice. Volumes are scored as the mean of the 2D SSIM of
//! their z-slices. Stabilizers are the conventional C1 = (0.01 r)^2 and
//! C2 = (0.03 r)^2 for dynamic range r.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::Scalar;

struct SliceView<'a, S> {
    data: &'a [S],
    ny: usize,
    nx: usize,
}

fn slices<S: Scalar>(g: &Grid<S>) -> Vec<SliceView<'_, S>> {
    let dims = g.dims();
    match dims.len() {
        2 => vec![SliceView {
            data: g.data(),
            ny: dims[0],
            nx: dims[1],
        }],
        3 => {
            let (nz, ny, nx) = (dims[0], dims[1], dims[2]);
            (0..nz)
                .map(|z| SliceView {
                    data: &g.data()[z * ny * nx..(z + 1) * ny * nx],
                    ny,
                    nx,
                })
                .collect()
        }
        _ => unreachable!("grids are rank 2 or 3"),
    }
}

/// Largest odd window not exceeding the slice extent.
fn effective_window(requested: usize, ny: usize, nx: usize) -> usize {
    let cap = ny.min(nx);
    let mut w = requested.min(cap);
    if w % 2 == 0 {
        w -= 1;
    }
    w.max(1)
}

/// Summed-area table with a zero top row and left column.
struct Integral {
    acc: Vec<f64>,
    nx1: usize,
}

impl Integral {
    fn build(ny: usize, nx: usize, f: impl Fn(usize) -> f64) -> Integral {
        let nx1 = nx + 1;
        let mut acc = vec![0.0f64; (ny + 1) * nx1];
        for y in 0..ny {
            let mut row = 0.0f64;
            for x in 0..nx {
                row += f(y * nx + x);
                acc[(y + 1) * nx1 + x + 1] = acc[y * nx1 + x + 1] + row;
            }
        }
        Integral { acc, nx1 }
    }

    /// Sum over the half-open box `[y0, y1) x [x0, x1)`.
    fn sum(&self, y0: usize, x0: usize, y1: usize, x1: usize) -> f64 {
        self.acc[y1 * self.nx1 + x1] - self.acc[y0 * self.nx1 + x1]
            - self.acc[y1 * self.nx1 + x0]
            + self.acc[y0 * self.nx1 + x0]
    }
}

struct WindowTerms {
    a1: f64,
    a2: f64,
    b1: f64,
    b2: f64,
    mu_a: f64,
    mu_b: f64,
    s: f64,
}

#[inline]
fn window_terms(
    sa: f64,
    sb: f64,
    saa: f64,
    sbb: f64,
    sab: f64,
    inv_n: f64,
    c1: f64,
    c2: f64,
) -> WindowTerms {
    let mu_a = sa * inv_n;
    let mu_b = sb * inv_n;
    let var_a = (saa * inv_n - mu_a * mu_a).max(0.0);
    let var_b = (sbb * inv_n - mu_b * mu_b).max(0.0);
    let cov = sab * inv_n - mu_a * mu_b;
    let a1 = 2.0 * mu_a * mu_b + c1;
    let a2 = 2.0 * cov + c2;
    let b1 = mu_a * mu_a + mu_b * mu_b + c1;
    let b2 = var_a + var_b + c2;
    WindowTerms {
        a1,
        a2,
        b1,
        b2,
        mu_a,
        mu_b,
        s: (a1 * a2) / (b1 * b2),
    }
}

fn slice_ssim<S: Scalar>(a: &SliceView<'_, S>, b: &SliceView<'_, S>, window: usize, c1: f64, c2: f64) -> f64 {
    let (ny, nx) = (a.ny, a.nx);
    let w = effective_window(window, ny, nx);
    let ia = Integral::build(ny, nx, |i| a.data[i].as_f64());
    let ib = Integral::build(ny, nx, |i| b.data[i].as_f64());
    let iaa = Integral::build(ny, nx, |i| {
        let v = a.data[i].as_f64();
        v * v
    });
    let ibb = Integral::build(ny, nx, |i| {
        let v = b.data[i].as_f64();
        v * v
    });
    let iab = Integral::build(ny, nx, |i| a.data[i].as_f64() * b.data[i].as_f64());
    let inv_n = 1.0 / (w * w) as f64;
    let mut acc = 0.0f64;
    let mut count = 0usize;
    for y in 0..=(ny - w) {
        for x in 0..=(nx - w) {
            let t = window_terms(
                ia.sum(y, x, y + w, x + w),
                ib.sum(y, x, y + w, x + w),
                iaa.sum(y, x, y + w, x + w),
                ibb.sum(y, x, y + w, x + w),
                iab.sum(y, x, y + w, x + w),
                inv_n,
                c1,
                c2,
            );
            acc += t.s;
            count += 1;
        }
    }
    acc / count as f64
}

fn stabilizers(range: f64) -> (f64, f64) {
    ((0.01 * range) * (0.01 * range), (0.03 * range) * (0.03 * range))
}

fn check_pair<S: Scalar>(a: &Grid<S>, b: &Grid<S>, range: f64) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimMismatch {
            expected: a.dims().to_vec(),
            got: b.dims().to_vec(),
        });
    }
    if !(range.is_finite() && range > 0.0) {
        return Err(Error::invalid(format!("ssim range {range} must be positive")));
    }
    Ok(())
}

/// Mean windowed SSIM of two grids, in [-1, 1].
pub fn ssim<S: Scalar>(a: &Grid<S>, b: &Grid<S>, window: usize, range: f64) -> Result<f64> {
    check_pair(a, b, range)?;
    let (c1, c2) = stabilizers(range);
    let sa = slices(a);
    let sb = slices(b);
    let mut acc = 0.0f64;
    for (va, vb) in sa.iter().zip(&sb) {
        acc += slice_ssim(va, vb, window, c1, c2);
    }
    Ok(acc / sa.len() as f64)
}

/// Mean SSIM plus its gradient with respect to the second image.
///
/// The value accumulates per window exactly like [`ssim`]. The gradient of
/// each window's score is linear in `a_j` and `b_j`, so the per-window
/// coefficients are box-summed back onto pixels with a second pass of
/// summed-area tables.
pub fn ssim_with_grad<S: Scalar>(
    a: &Grid<S>,
    b: &Grid<S>,
    window: usize,
    range: f64,
) -> Result<(f64, Vec<f64>)> {
    check_pair(a, b, range)?;
    let (c1, c2) = stabilizers(range);
    let sa = slices(a);
    let sb = slices(b);
    let nslices = sa.len();
    let mut grad = vec![0.0f64; a.len()];
    let mut acc = 0.0f64;
    let mut offset = 0usize;
    for (va, vb) in sa.iter().zip(&sb) {
        let (ny, nx) = (va.ny, va.nx);
        let w = effective_window(window, ny, nx);
        let ia = Integral::build(ny, nx, |i| va.data[i].as_f64());
        let ib = Integral::build(ny, nx, |i| vb.data[i].as_f64());
        let iaa = Integral::build(ny, nx, |i| {
            let v = va.data[i].as_f64();
            v * v
        });
        let ibb = Integral::build(ny, nx, |i| {
            let v = vb.data[i].as_f64();
            v * v
        });
        let iab = Integral::build(ny, nx, |i| va.data[i].as_f64() * vb.data[i].as_f64());
        let inv_n = 1.0 / (w * w) as f64;
        let wy = ny - w + 1;
        let wx = nx - w + 1;
        // Per-window coefficients of grad_j = k0 + ka * a_j + kb * b_j.
        let mut k0 = vec![0.0f64; wy * wx];
        let mut ka = vec![0.0f64; wy * wx];
        let mut kb = vec![0.0f64; wy * wx];
        let mut slice_acc = 0.0f64;
        for y in 0..wy {
            for x in 0..wx {
                let t = window_terms(
                    ia.sum(y, x, y + w, x + w),
                    ib.sum(y, x, y + w, x + w),
                    iaa.sum(y, x, y + w, x + w),
                    ibb.sum(y, x, y + w, x + w),
                    iab.sum(y, x, y + w, x + w),
                    inv_n,
                    c1,
                    c2,
                );
                slice_acc += t.s;
                let scale = 2.0 * inv_n / (t.b1 * t.b2);
                let wi = y * wx + x;
                k0[wi] = scale
                    * (t.mu_a * t.a2 - t.mu_a * t.a1 - t.s * (t.mu_b * t.b2 - t.mu_b * t.b1));
                ka[wi] = scale * t.a1;
                kb[wi] = -scale * t.s * t.b1;
            }
        }
        acc += slice_acc / (wy * wx) as f64;
        // Box-sum the coefficient planes over the windows containing each pixel.
        let ik0 = Integral::build(wy, wx, |i| k0[i]);
        let ika = Integral::build(wy, wx, |i| ka[i]);
        let ikb = Integral::build(wy, wx, |i| kb[i]);
        let norm = 1.0 / ((wy * wx) as f64 * nslices as f64);
        for y in 0..ny {
            let y0 = y.saturating_sub(w - 1).min(wy - 1);
            let y1 = y.min(wy - 1) + 1;
            for x in 0..nx {
                let x0 = x.saturating_sub(w - 1).min(wx - 1);
                let x1 = x.min(wx - 1) + 1;
                let aj = va.data[y * nx + x].as_f64();
                let bj = vb.data[y * nx + x].as_f64();
                let g = ik0.sum(y0, x0, y1, x1)
                    + aj * ika.sum(y0, x0, y1, x1)
                    + bj * ikb.sum(y0, x0, y1, x1);
                grad[offset + y * nx + x] = g * norm;
            }
        }
        offset += ny * nx;
    }
    Ok((acc / nslices as f64, grad))
}
