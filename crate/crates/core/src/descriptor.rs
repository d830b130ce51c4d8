//! Reduction of a displacement field sequence to the one-dimensional motion
//! descriptor: per-point motion directions relative to a focus point, the
//! magnitude/direction-change masks, and the masked per-frame means.
//!
//! Sign convention: fields hold motion vectors, and the per-point direction
//! is `alpha = -cos(v, C - x)`, so tissue moving toward the focus point
//! scores negative (contraction) and motion away from it positive.

use crate::config::{DescriptorConfig, FocusSelector};
use crate::error::{Error, MaskFilter, Result};
use crate::focus::{FocusKind, FocusPoint};
use crate::grid::{Grid, MAX_DIM};
use crate::parallel::par_fill;
use crate::scalar::Scalar;
use crate::sequence::DisplacementFieldSequence;

/// Displacements shorter than this contribute a neutral direction of zero.
const ZERO_MOTION: f64 = 1e-8;

/// Spatial binary mask over the field grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    dims: Vec<usize>,
    active: Vec<bool>,
}

impl Mask {
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn and(&self, other: &Mask) -> Mask {
        debug_assert_eq!(self.dims, other.dims);
        Mask {
            dims: self.dims.clone(),
            active: self
                .active
                .iter()
                .zip(&other.active)
                .map(|(&a, &b)| a && b)
                .collect(),
        }
    }

    /// Mean of the active coordinates per axis.
    pub fn center_of_mass(&self) -> Option<Vec<f64>> {
        let d = self.dims.len();
        let mut sums = vec![0.0f64; d];
        let mut n = 0usize;
        let mut coords = [0usize; MAX_DIM];
        for (p, &on) in self.active.iter().enumerate() {
            if !on {
                continue;
            }
            decode(p, &self.dims, &mut coords);
            for a in 0..d {
                sums[a] += coords[a] as f64;
            }
            n += 1;
        }
        if n == 0 {
            return None;
        }
        Some(sums.iter().map(|s| s / n as f64).collect())
    }

    /// Renders the mask as a 0/1 scalar grid for export.
    pub fn to_grid<S: Scalar>(&self) -> Grid<S> {
        let mut g = Grid::zeros(&self.dims);
        for (slot, &on) in g.data_mut().iter_mut().zip(&self.active) {
            *slot = if on { S::one() } else { S::zero() };
        }
        g
    }
}

fn decode(mut idx: usize, dims: &[usize], out: &mut [usize; MAX_DIM]) {
    for a in (0..dims.len()).rev() {
        out[a] = idx % dims[a];
        idx /= dims[a];
    }
}

/// Per-frame grids of the motion direction `-cos(v_i, C - x_i)`, zero where
/// the displacement is (near) zero or the point coincides with the focus.
pub fn direction_field<S: Scalar>(
    fields: &DisplacementFieldSequence<S>,
    focus: &FocusPoint,
) -> Result<Vec<Grid<S>>> {
    focus.validate_in_grid(fields.dims())?;
    let dims = fields.dims().to_vec();
    let d = dims.len();
    let focus_coords = focus.coords.clone();
    let mut out = Vec::with_capacity(fields.len());
    for field in fields.fields() {
        let mut alpha = Grid::zeros(&dims);
        let data = field.data();
        par_fill(alpha.data_mut(), |p| {
            let mut coords = [0usize; MAX_DIM];
            decode(p, &dims, &mut coords);
            let mut dot = 0.0f64;
            let mut v2 = 0.0f64;
            let mut w2 = 0.0f64;
            for a in 0..d {
                let v = data[p * d + a].as_f64();
                let w = focus_coords[a] - coords[a] as f64;
                dot += v * w;
                v2 += v * v;
                w2 += w * w;
            }
            if v2.sqrt() < ZERO_MOTION || w2.sqrt() < ZERO_MOTION {
                S::zero()
            } else {
                let c = dot / (v2.sqrt() * w2.sqrt());
                S::of_f64(-c.clamp(-1.0, 1.0))
            }
        });
        out.push(alpha);
    }
    Ok(out)
}

/// Temporally averaged displacement magnitude per grid point.
pub fn average_magnitude<S: Scalar>(fields: &DisplacementFieldSequence<S>) -> Vec<f64> {
    let n = fields.npoints();
    let t = fields.len();
    let mut avg = vec![0.0f64; n];
    for field in fields.fields() {
        for (p, slot) in avg.iter_mut().enumerate() {
            *slot += field.magnitude(p);
        }
    }
    for slot in avg.iter_mut() {
        *slot /= t as f64;
    }
    avg
}

/// Nearest-rank percentile: for `p > 0` the value at rank `ceil(p/100 * N)`
/// of the ascending sort (1-based); `p = 0` maps to the minimum.
fn nearest_rank(sorted: &[f64], percentile: f64) -> f64 {
    let n = sorted.len();
    let rank = ((percentile / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Points whose temporally averaged magnitude reaches the nearest-rank
/// percentile stay active; ties at the threshold are retained.
pub fn magnitude_mask<S: Scalar>(
    fields: &DisplacementFieldSequence<S>,
    t_norm_percentile: f64,
) -> Result<Mask> {
    if !(0.0..=100.0).contains(&t_norm_percentile) {
        return Err(Error::invalid(format!(
            "percentile {t_norm_percentile} outside [0, 100]"
        )));
    }
    let avg = average_magnitude(fields);
    let mut sorted = avg.clone();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite magnitudes"));
    let threshold = nearest_rank(&sorted, t_norm_percentile);
    Ok(Mask {
        dims: fields.dims().to_vec(),
        active: avg.iter().map(|&m| m >= threshold).collect(),
    })
}

/// Points whose direction range `max_t alpha - min_t alpha` reaches the
/// threshold stay active; static or unidirectional points drop out.
pub fn direction_change_mask<S: Scalar>(alpha_frames: &[Grid<S>], t_delta_alpha: f64) -> Mask {
    let dims = alpha_frames[0].dims().to_vec();
    let n = alpha_frames[0].len();
    let mut active = vec![false; n];
    for (p, slot) in active.iter_mut().enumerate() {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for frame in alpha_frames {
            let v = frame.data()[p].as_f64();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        *slot = (hi - lo) >= t_delta_alpha;
    }
    Mask { dims, active }
}

/// The one-dimensional motion descriptor.
#[derive(Debug, Clone)]
pub struct MotionDescriptor<S> {
    /// Smoothed curve, in [-1, 1].
    pub alpha: Vec<S>,
    /// Masked per-frame mean before smoothing.
    pub alpha_raw: Vec<S>,
    /// Masked per-frame mean displacement magnitude.
    pub magnitude: Vec<S>,
    pub mask: Mask,
    pub focus: FocusPoint,
    pub config: DescriptorConfig,
}

impl<S: Scalar> MotionDescriptor<S> {
    /// Magnitude curve min-max normalized to [0, 1] (zeros when constant).
    pub fn magnitude_normalized(&self) -> Vec<f64> {
        let vals: Vec<f64> = self.magnitude.iter().map(|v| v.as_f64()).collect();
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo <= 0.0 {
            return vec![0.0; vals.len()];
        }
        vals.iter().map(|v| (v - lo) / (hi - lo)).collect()
    }

    /// Descriptor CSV: `frame, alpha_raw, alpha, magnitude, magnitude_normalized`.
    pub fn to_csv(&self) -> String {
        let norm = self.magnitude_normalized();
        let mut out = String::from("frame,alpha_raw,alpha,magnitude,magnitude_normalized\n");
        for t in 0..self.alpha.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                t,
                self.alpha_raw[t].as_f64(),
                self.alpha[t].as_f64(),
                self.magnitude[t].as_f64(),
                norm[t]
            ));
        }
        out
    }
}

/// Cyclic Gaussian smoothing, kernel truncated at +/-4 sigma and
/// renormalized; sigma <= 0 is the identity.
pub fn smooth_cyclic<S: Scalar>(curve: &[S], sigma: f64) -> Vec<S> {
    if sigma <= 0.0 {
        return curve.to_vec();
    }
    let t = curve.len();
    let radius = (4.0 * sigma).ceil() as i64;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    let mut total = 0.0f64;
    for j in -radius..=radius {
        let w = (-(j as f64) * (j as f64) / (2.0 * sigma * sigma)).exp();
        kernel.push(w);
        total += w;
    }
    for w in kernel.iter_mut() {
        *w /= total;
    }
    let mut out = Vec::with_capacity(t);
    for i in 0..t {
        let mut acc = 0.0f64;
        for (k, w) in kernel.iter().enumerate() {
            let j = k as i64 - radius;
            let idx = (i as i64 + j).rem_euclid(t as i64) as usize;
            acc += w * curve[idx].as_f64();
        }
        out.push(S::of_f64(acc));
    }
    out
}

fn masked_mean_curves<S: Scalar>(
    fields: &DisplacementFieldSequence<S>,
    alpha_frames: &[Grid<S>],
    mask: &Mask,
) -> (Vec<S>, Vec<S>) {
    let t = fields.len();
    let count = mask.count() as f64;
    let mut alpha_raw = Vec::with_capacity(t);
    let mut magnitude = Vec::with_capacity(t);
    for ti in 0..t {
        let mut alpha_sum = 0.0f64;
        let mut mag_sum = 0.0f64;
        let field = fields.field(ti);
        let frame = &alpha_frames[ti];
        for (p, &on) in mask.active.iter().enumerate() {
            if !on {
                continue;
            }
            alpha_sum += frame.data()[p].as_f64();
            mag_sum += field.magnitude(p);
        }
        alpha_raw.push(S::of_f64(alpha_sum / count));
        magnitude.push(S::of_f64(mag_sum / count));
    }
    (alpha_raw, magnitude)
}

fn combined_mask<S: Scalar>(mag_mask: &Mask, alpha_frames: &[Grid<S>], t_delta_alpha: f64) -> Result<Mask> {
    let dc_mask = direction_change_mask(alpha_frames, t_delta_alpha);
    if dc_mask.count() == 0 {
        return Err(Error::DegenerateMask {
            filter: MaskFilter::DirectionChange,
        });
    }
    if mag_mask.count() == 0 {
        return Err(Error::DegenerateMask {
            filter: MaskFilter::Magnitude,
        });
    }
    let mask = mag_mask.and(&dc_mask);
    if mask.count() == 0 {
        return Err(Error::DegenerateMask {
            filter: MaskFilter::Intersection,
        });
    }
    Ok(mask)
}

/// Centre of the grid, independent of the fields.
pub fn focus_vol(dims: &[usize]) -> FocusPoint {
    FocusPoint::volume_center(dims)
}

/// Wraps externally supplied coordinates after a bounds check.
pub fn focus_explicit(coords: Vec<f64>, kind: FocusKind, dims: &[usize]) -> Result<FocusPoint> {
    FocusPoint::explicit(coords, kind, dims)
}

/// Self-supervised focus point: bootstrap from the volume centre, take the
/// centre of mass of the combined mask, then run exactly one fixed-point
/// refinement (recompute mask and centre of mass at the new focus).
pub fn focus_mse<S: Scalar>(
    fields: &DisplacementFieldSequence<S>,
    config: &DescriptorConfig,
) -> Result<FocusPoint> {
    config.validate()?;
    let mag_mask = magnitude_mask(fields, config.t_norm_percentile)?;
    let mut focus = FocusPoint::volume_center(fields.dims());
    for _ in 0..2 {
        let alpha_frames = direction_field(fields, &focus)?;
        let mask = combined_mask(&mag_mask, &alpha_frames, config.t_delta_alpha)?;
        let coords = mask.center_of_mass().ok_or(Error::DegenerateMask {
            filter: MaskFilter::Intersection,
        })?;
        focus = FocusPoint {
            coords,
            kind: FocusKind::Mse,
        };
    }
    Ok(focus)
}

/// Full descriptor computation: resolve the focus per config, build the
/// combined mask, reduce to per-frame means, smooth cyclically.
pub fn compute_descriptor<S: Scalar>(
    fields: &DisplacementFieldSequence<S>,
    config: &DescriptorConfig,
) -> Result<MotionDescriptor<S>> {
    config.validate()?;
    let focus = match &config.focus {
        FocusSelector::Vol => FocusPoint::volume_center(fields.dims()),
        FocusSelector::Explicit { coords } => {
            FocusPoint::explicit(coords.clone(), FocusKind::Explicit, fields.dims())?
        }
        FocusSelector::Mse => focus_mse(fields, config)?,
    };
    compute_descriptor_at(fields, &focus, config)
}

/// Descriptor computation at a fixed, already-resolved focus point.
pub fn compute_descriptor_at<S: Scalar>(
    fields: &DisplacementFieldSequence<S>,
    focus: &FocusPoint,
    config: &DescriptorConfig,
) -> Result<MotionDescriptor<S>> {
    config.validate()?;
    let mag_mask = magnitude_mask(fields, config.t_norm_percentile)?;
    let alpha_frames = direction_field(fields, focus)?;
    let mask = combined_mask(&mag_mask, &alpha_frames, config.t_delta_alpha)?;
    let (alpha_raw, magnitude) = masked_mean_curves(fields, &alpha_frames, &mask);
    let alpha = smooth_cyclic(&alpha_raw, config.gaussian_sigma);
    Ok(MotionDescriptor {
        alpha,
        alpha_raw,
        magnitude,
        mask,
        focus: focus.clone(),
        config: config.clone(),
    })
}
