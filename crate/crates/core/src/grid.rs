//! Dense d-dimensional scalar grids and vector grids, d in {2, 3}.
//!
//! Grids are row-major with axis 0 slowest: `[y, x]` for d = 2 and
//! `[z, y, x]` for d = 3. Positions, spacings and displacement components
//! follow the same axis order. Sampling positions are `f64` regardless of
//! the stored scalar type; interpolation weights accumulate in `f64`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Axis capacity of stack-allocated coordinate buffers.
pub const MAX_DIM: usize = 3;

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 || dims.len() > MAX_DIM {
        return Err(Error::invalid(format!(
            "grid rank must be 2 or 3, got {}",
            dims.len()
        )));
    }
    if dims.contains(&0) {
        return Err(Error::invalid(format!("grid dims contain zero: {dims:?}")));
    }
    Ok(())
}

/// Row-major scalar grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<S> {
    dims: Vec<usize>,
    data: Vec<S>,
}

impl<S: Scalar> Grid<S> {
    pub fn zeros(dims: &[usize]) -> Self {
        check_dims(dims).expect("valid dims");
        let len = dims.iter().product();
        Grid {
            dims: dims.to_vec(),
            data: vec![S::zero(); len],
        }
    }

    /// Builds a grid from row-major data, rejecting NaN/Inf.
    pub fn from_vec(dims: &[usize], data: Vec<S>) -> Result<Self> {
        check_dims(dims)?;
        let len: usize = dims.iter().product();
        if data.len() != len {
            return Err(Error::invalid(format!(
                "data length {} does not match dims {:?}",
                data.len(),
                dims
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("grid data"));
        }
        Ok(Grid {
            dims: dims.to_vec(),
            data,
        })
    }

    /// Fills a grid by evaluating `f` at every integer coordinate.
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize; MAX_DIM]) -> S) -> Self {
        let mut grid = Grid::zeros(dims);
        let mut coords = [0usize; MAX_DIM];
        for i in 0..grid.data.len() {
            grid.point_coords(i, &mut coords);
            grid.data[i] = f(&coords);
        }
        grid
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    /// Strides per axis, in elements. Unused trailing axes get stride 0.
    pub fn strides(&self) -> [usize; MAX_DIM] {
        let d = self.ndim();
        let mut s = [0usize; MAX_DIM];
        let mut acc = 1usize;
        for a in (0..d).rev() {
            s[a] = acc;
            acc *= self.dims[a];
        }
        s
    }

    /// Writes the integer coordinates of linear index `idx` into `out[..d]`.
    pub fn point_coords(&self, idx: usize, out: &mut [usize; MAX_DIM]) {
        let d = self.ndim();
        let mut rem = idx;
        for a in (0..d).rev() {
            out[a] = rem % self.dims[a];
            rem /= self.dims[a];
        }
    }

    pub fn get(&self, coords: &[usize]) -> S {
        let strides = self.strides();
        let mut idx = 0usize;
        for (a, &c) in coords.iter().enumerate() {
            debug_assert!(c < self.dims[a]);
            idx += c * strides[a];
        }
        self.data[idx]
    }

    pub fn set(&mut self, coords: &[usize], v: S) {
        let strides = self.strides();
        let mut idx = 0usize;
        for (a, &c) in coords.iter().enumerate() {
            idx += c * strides[a];
        }
        self.data[idx] = v;
    }

    pub fn min_max(&self) -> (S, S) {
        let mut lo = self.data[0];
        let mut hi = self.data[0];
        for &v in &self.data {
            if v < lo {
                lo = v;
            }
            if v > hi {
                hi = v;
            }
        }
        (lo, hi)
    }

    /// Multilinear interpolation at a fractional position with clamp-to-edge
    /// semantics outside the grid.
    pub fn sample(&self, pos: &[f64; MAX_DIM]) -> f64 {
        let d = self.ndim();
        let strides = self.strides();
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0.0f64; MAX_DIM];
        for a in 0..d {
            let n = self.dims[a];
            let p = pos[a].clamp(0.0, (n - 1) as f64);
            if n == 1 {
                base[a] = 0;
                frac[a] = 0.0;
            } else {
                let i = (p.floor() as usize).min(n - 2);
                base[a] = i;
                frac[a] = p - i as f64;
            }
        }
        let mut acc = 0.0f64;
        for corner in 0..(1usize << d) {
            let mut w = 1.0f64;
            let mut idx = 0usize;
            for a in 0..d {
                let hi = (corner >> a) & 1 == 1;
                w *= if hi { frac[a] } else { 1.0 - frac[a] };
                let c = (base[a] + hi as usize).min(self.dims[a] - 1);
                idx += c * strides[a];
            }
            acc += w * self.data[idx].as_f64();
        }
        acc
    }

    /// Interpolated value plus its derivative with respect to each position
    /// component. The derivative is zero along axes where the position is
    /// clamped outside the grid.
    pub fn sample_with_grad(&self, pos: &[f64; MAX_DIM]) -> (f64, [f64; MAX_DIM]) {
        let d = self.ndim();
        let strides = self.strides();
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0.0f64; MAX_DIM];
        let mut inside = [false; MAX_DIM];
        for a in 0..d {
            let n = self.dims[a];
            let p = pos[a].clamp(0.0, (n - 1) as f64);
            inside[a] = n > 1 && pos[a] > 0.0 && pos[a] < (n - 1) as f64;
            if n == 1 {
                base[a] = 0;
                frac[a] = 0.0;
            } else {
                let i = (p.floor() as usize).min(n - 2);
                base[a] = i;
                frac[a] = p - i as f64;
            }
        }
        let mut value = 0.0f64;
        let mut grad = [0.0f64; MAX_DIM];
        for corner in 0..(1usize << d) {
            let mut idx = 0usize;
            let mut w = [0.0f64; MAX_DIM];
            for a in 0..d {
                let hi = (corner >> a) & 1 == 1;
                w[a] = if hi { frac[a] } else { 1.0 - frac[a] };
                let c = (base[a] + hi as usize).min(self.dims[a] - 1);
                idx += c * strides[a];
            }
            let v = self.data[idx].as_f64();
            let mut prod = 1.0f64;
            for a in 0..d {
                prod *= w[a];
            }
            value += prod * v;
            for a in 0..d {
                if !inside[a] {
                    continue;
                }
                let sign = if (corner >> a) & 1 == 1 { 1.0 } else { -1.0 };
                let mut rest = sign;
                for b in 0..d {
                    if b != a {
                        rest *= w[b];
                    }
                }
                grad[a] += rest * v;
            }
        }
        (value, grad)
    }

    /// Resamples onto `new_dims` where output index `j` on axis `a` reads the
    /// input at `j * ratio[a]` (origin-aligned mapping used by spacing changes).
    pub fn resample_map(&self, new_dims: &[usize], ratios: &[f64]) -> Grid<S> {
        let mut out = Grid::zeros(new_dims);
        let d = new_dims.len();
        let mut coords = [0usize; MAX_DIM];
        for i in 0..out.data.len() {
            out.point_coords(i, &mut coords);
            let mut pos = [0.0f64; MAX_DIM];
            for a in 0..d {
                pos[a] = coords[a] as f64 * ratios[a];
            }
            out.data[i] = S::of_f64(self.sample(&pos));
        }
        out
    }

    /// Endpoint-preserving resize used between pyramid levels, with an
    /// optional value scale applied to every sample.
    pub fn resize_align_corners(&self, new_dims: &[usize], value_scale: f64) -> Grid<S> {
        let d = self.ndim();
        let mut out = Grid::zeros(new_dims);
        let mut coords = [0usize; MAX_DIM];
        for i in 0..out.data.len() {
            out.point_coords(i, &mut coords);
            let mut pos = [0.0f64; MAX_DIM];
            for a in 0..d {
                pos[a] = if new_dims[a] > 1 {
                    coords[a] as f64 * (self.dims[a] - 1) as f64 / (new_dims[a] - 1) as f64
                } else {
                    0.0
                };
            }
            out.data[i] = S::of_f64(self.sample(&pos) * value_scale);
        }
        out
    }

    /// Halves every axis by averaging 2^d blocks (partial blocks at odd
    /// borders average the available cells). Axes of length 1 stay length 1.
    pub fn restrict(&self) -> Grid<S> {
        let d = self.ndim();
        let mut new_dims = self.dims.clone();
        for n in new_dims.iter_mut() {
            *n = (*n).div_ceil(2).max(1);
        }
        let mut out = Grid::zeros(&new_dims);
        let mut coords = [0usize; MAX_DIM];
        let mut cell = [0usize; MAX_DIM];
        for i in 0..out.data.len() {
            out.point_coords(i, &mut coords);
            let mut sum = 0.0f64;
            let mut count = 0.0f64;
            for offsets in 0..(1usize << d) {
                let mut valid = true;
                for a in 0..d {
                    let c = 2 * coords[a] + ((offsets >> a) & 1);
                    if c >= self.dims[a] {
                        valid = false;
                        break;
                    }
                    cell[a] = c;
                }
                if valid {
                    sum += self.get(&cell[..d]).as_f64();
                    count += 1.0;
                }
            }
            out.data[i] = S::of_f64(sum / count);
        }
        out
    }
}

/// Free-function alias for the warping interpolant.
pub fn trilinear_sample<S: Scalar>(grid: &Grid<S>, pos: &[f64; MAX_DIM]) -> f64 {
    grid.sample(pos)
}

/// Dense vector grid: one d-vector per grid point, components interleaved
/// in axis order.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorGrid<S> {
    dims: Vec<usize>,
    data: Vec<S>,
}

impl<S: Scalar> VectorGrid<S> {
    pub fn zeros(dims: &[usize]) -> Self {
        check_dims(dims).expect("valid dims");
        let len: usize = dims.iter().product::<usize>() * dims.len();
        VectorGrid {
            dims: dims.to_vec(),
            data: vec![S::zero(); len],
        }
    }

    pub fn from_vec(dims: &[usize], data: Vec<S>) -> Result<Self> {
        check_dims(dims)?;
        let len: usize = dims.iter().product::<usize>() * dims.len();
        if data.len() != len {
            return Err(Error::invalid(format!(
                "vector data length {} does not match dims {:?}",
                data.len(),
                dims
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("vector grid data"));
        }
        Ok(VectorGrid {
            dims: dims.to_vec(),
            data,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn npoints(&self) -> usize {
        self.data.len() / self.dims.len()
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn vector(&self, point: usize, out: &mut [f64; MAX_DIM]) {
        let d = self.ndim();
        for c in 0..d {
            out[c] = self.data[point * d + c].as_f64();
        }
    }

    pub fn set_vector(&mut self, point: usize, v: &[f64; MAX_DIM]) {
        let d = self.ndim();
        for c in 0..d {
            self.data[point * d + c] = S::of_f64(v[c]);
        }
    }

    pub fn magnitude(&self, point: usize) -> f64 {
        let d = self.ndim();
        let mut acc = 0.0f64;
        for c in 0..d {
            let v = self.data[point * d + c].as_f64();
            acc += v * v;
        }
        acc.sqrt()
    }

    pub fn mean_magnitude(&self) -> f64 {
        let n = self.npoints();
        let mut acc = 0.0f64;
        for p in 0..n {
            acc += self.magnitude(p);
        }
        acc / n as f64
    }

    /// Extracts one component as a scalar grid.
    pub fn component(&self, c: usize) -> Grid<S> {
        let d = self.ndim();
        let n = self.npoints();
        let mut data = Vec::with_capacity(n);
        for p in 0..n {
            data.push(self.data[p * d + c]);
        }
        Grid::from_vec(&self.dims, data).expect("component grid")
    }

    pub fn from_components(components: &[Grid<S>]) -> Result<Self> {
        let d = components.len();
        let dims = components[0].dims().to_vec();
        if dims.len() != d {
            return Err(Error::invalid(
                "component count must equal grid rank".to_string(),
            ));
        }
        for g in components {
            if g.dims() != dims.as_slice() {
                return Err(Error::DimMismatch {
                    expected: dims,
                    got: g.dims().to_vec(),
                });
            }
        }
        let n: usize = dims.iter().product();
        let mut data = Vec::with_capacity(n * d);
        for p in 0..n {
            for comp in components {
                data.push(comp.data()[p]);
            }
        }
        VectorGrid::from_vec(&dims, data)
    }

    /// Resizes every component with the align-corners mapping, scaling the
    /// vector values by `value_scale` (x2 when moving to a finer level).
    pub fn resize_scaled(&self, new_dims: &[usize], value_scale: f64) -> VectorGrid<S> {
        let d = self.ndim();
        let comps: Vec<Grid<S>> = (0..d)
            .map(|c| self.component(c).resize_align_corners(new_dims, value_scale))
            .collect();
        VectorGrid::from_components(&comps).expect("resized vector grid")
    }

    pub fn scaled(&self, s: f64) -> VectorGrid<S> {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v = S::of_f64(v.as_f64() * s);
        }
        out
    }
}
