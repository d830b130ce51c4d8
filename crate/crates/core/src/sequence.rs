//! Time-resolved image sequences and their displacement field sequences.

use crate::error::{Error, Result};
use crate::grid::{Grid, VectorGrid};
use crate::scalar::Scalar;

/// Cine sequence: T scalar frames over a fixed grid with physical spacing
/// in millimetres per axis.
#[derive(Debug, Clone)]
pub struct ImageSequence<S> {
    frames: Vec<Grid<S>>,
    spacing: Vec<f64>,
    intensity_range: (S, S),
}

impl<S: Scalar> ImageSequence<S> {
    pub fn new(frames: Vec<Grid<S>>, spacing: Vec<f64>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::invalid(format!(
                "sequence needs at least 2 frames, got {}",
                frames.len()
            )));
        }
        let dims = frames[0].dims().to_vec();
        for f in &frames {
            if f.dims() != dims.as_slice() {
                return Err(Error::DimMismatch {
                    expected: dims,
                    got: f.dims().to_vec(),
                });
            }
        }
        if spacing.len() != dims.len() {
            return Err(Error::invalid(format!(
                "spacing has {} entries for a rank-{} grid",
                spacing.len(),
                dims.len()
            )));
        }
        if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::invalid(format!("non-positive spacing {spacing:?}")));
        }
        let mut lo = frames[0].data()[0];
        let mut hi = lo;
        for f in &frames {
            let (flo, fhi) = f.min_max();
            if flo < lo {
                lo = flo;
            }
            if fhi > hi {
                hi = fhi;
            }
        }
        Ok(ImageSequence {
            frames,
            spacing,
            intensity_range: (lo, hi),
        })
    }

    pub fn frames(&self) -> &[Grid<S>] {
        &self.frames
    }

    pub fn frame(&self, t: usize) -> &Grid<S> {
        &self.frames[t]
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> &[usize] {
        self.frames[0].dims()
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn intensity_range(&self) -> (S, S) {
        self.intensity_range
    }

    /// Linear resampling to a new physical spacing. Output dims per axis are
    /// `round(dims * spacing / target)`; output index `j` reads the input at
    /// `j * target / spacing`, so resampling at the current spacing is the
    /// identity at every grid point.
    pub fn resample(&self, target_spacing: &[f64]) -> Result<ImageSequence<S>> {
        let d = self.dims().len();
        if target_spacing.len() != d {
            return Err(Error::invalid(format!(
                "target spacing has {} entries for a rank-{d} grid",
                target_spacing.len()
            )));
        }
        if target_spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::invalid(format!(
                "non-positive target spacing {target_spacing:?}"
            )));
        }
        let mut new_dims = vec![0usize; d];
        let mut ratios = vec![0.0f64; d];
        for a in 0..d {
            let exact = self.dims()[a] as f64 * self.spacing[a] / target_spacing[a];
            new_dims[a] = (exact.round() as usize).max(1);
            ratios[a] = target_spacing[a] / self.spacing[a];
        }
        let frames = self
            .frames
            .iter()
            .map(|f| f.resample_map(&new_dims, &ratios))
            .collect();
        ImageSequence::new(frames, target_spacing.to_vec())
    }
}

/// Per-frame dense motion fields. Field `t` holds the motion vector of each
/// grid point between frames `t` and `t+1 mod T`, in grid-index units, so
/// the count equals the frame count (the last pair closes the cycle).
#[derive(Debug, Clone)]
pub struct DisplacementFieldSequence<S> {
    fields: Vec<VectorGrid<S>>,
    spacing: Vec<f64>,
}

impl<S: Scalar> DisplacementFieldSequence<S> {
    pub fn new(fields: Vec<VectorGrid<S>>, spacing: Vec<f64>) -> Result<Self> {
        if fields.len() < 2 {
            return Err(Error::invalid(format!(
                "field sequence needs at least 2 fields, got {}",
                fields.len()
            )));
        }
        let dims = fields[0].dims().to_vec();
        for f in &fields {
            if f.dims() != dims.as_slice() {
                return Err(Error::DimMismatch {
                    expected: dims,
                    got: f.dims().to_vec(),
                });
            }
        }
        if spacing.len() != dims.len() {
            return Err(Error::invalid(format!(
                "spacing has {} entries for a rank-{} grid",
                spacing.len(),
                dims.len()
            )));
        }
        Ok(DisplacementFieldSequence { fields, spacing })
    }

    pub fn fields(&self) -> &[VectorGrid<S>] {
        &self.fields
    }

    pub fn field(&self, t: usize) -> &VectorGrid<S> {
        &self.fields[t]
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn dims(&self) -> &[usize] {
        self.fields[0].dims()
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn npoints(&self) -> usize {
        self.fields[0].npoints()
    }

    /// Rotates the sequence by `k` frames (field `t` of the result is field
    /// `(t + k) mod T` of the input).
    pub fn rotated(&self, k: usize) -> DisplacementFieldSequence<S> {
        let t = self.fields.len();
        let fields = (0..t).map(|i| self.fields[(i + k) % t].clone()).collect();
        DisplacementFieldSequence {
            fields,
            spacing: self.spacing.clone(),
        }
    }

    /// Multiplies every displacement vector by `s`.
    pub fn scaled(&self, s: f64) -> DisplacementFieldSequence<S> {
        DisplacementFieldSequence {
            fields: self.fields.iter().map(|f| f.scaled(s)).collect(),
            spacing: self.spacing.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_sequence() -> ImageSequence<f64> {
        // two identical frames holding a 1x4 ramp
        let frame = Grid::from_vec(&[1, 4], vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        ImageSequence::new(vec![frame.clone(), frame], vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn resample_dims_follow_spacing_ratio() {
        let frame: Grid<f64> = Grid::zeros(&[12, 128, 128]);
        let seq = ImageSequence::new(vec![frame.clone(), frame], vec![5.0, 1.25, 1.25]).unwrap();
        let out = seq.resample(&[2.5, 2.5, 2.5]).unwrap();
        assert_eq!(out.dims(), &[24, 64, 64]);
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn resample_at_current_spacing_is_identity() {
        let seq = ramp_sequence();
        let out = seq.resample(&[1.0, 1.0]).unwrap();
        assert_eq!(out.dims(), seq.dims());
        for (a, b) in out.frame(0).data().iter().zip(seq.frame(0).data()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn resample_ramp_to_double_spacing() {
        let seq = ramp_sequence();
        let out = seq.resample(&[1.0, 2.0]).unwrap();
        assert_eq!(out.dims(), &[1, 2]);
        assert_eq!(out.frame(0).data(), &[0.0, 2.0]);
    }

    #[test]
    fn resample_rejects_non_positive_spacing() {
        let seq = ramp_sequence();
        assert!(seq.resample(&[1.0, 0.0]).is_err());
        assert!(seq.resample(&[-1.0, 1.0]).is_err());
    }

    #[test]
    fn sequence_requires_two_frames_and_uniform_dims() {
        let frame: Grid<f64> = Grid::zeros(&[4, 4]);
        assert!(ImageSequence::new(vec![frame.clone()], vec![1.0, 1.0]).is_err());
        let other: Grid<f64> = Grid::zeros(&[4, 5]);
        assert!(ImageSequence::new(vec![frame, other], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn intensity_range_brackets_data() {
        let a = Grid::from_vec(&[2, 2], vec![-1.0, 0.0, 1.0, 2.0]).unwrap();
        let b = Grid::from_vec(&[2, 2], vec![0.0, 5.0, 0.5, 0.25]).unwrap();
        let seq = ImageSequence::new(vec![a, b], vec![1.0, 1.0]).unwrap();
        assert_eq!(seq.intensity_range(), (-1.0, 5.0));
    }
}
