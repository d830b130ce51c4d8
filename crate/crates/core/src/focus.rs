//! Focus points: the reference location the motion direction is measured
//! against. Coordinates are fractional grid indices in axis order.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FocusKind {
    /// Centre of mass of the combined descriptor mask.
    Mse,
    /// Centre of the whole volume/image.
    Vol,
    /// Externally supplied left-ventricle blood-pool centre.
    Lv,
    /// Externally supplied mean septum landmark.
    Sept,
    /// Any other externally supplied coordinate.
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocusPoint {
    pub coords: Vec<f64>,
    pub kind: FocusKind,
}

impl FocusPoint {
    /// Centre of the grid: `(dims - 1) / 2` per axis, fractional allowed.
    pub fn volume_center(dims: &[usize]) -> FocusPoint {
        FocusPoint {
            coords: dims.iter().map(|&n| (n - 1) as f64 / 2.0).collect(),
            kind: FocusKind::Vol,
        }
    }

    /// Wraps externally supplied coordinates, checking they lie inside the
    /// grid bounding box (inclusive of the boundary).
    pub fn explicit(coords: Vec<f64>, kind: FocusKind, dims: &[usize]) -> Result<FocusPoint> {
        let fp = FocusPoint { coords, kind };
        fp.validate_in_grid(dims)?;
        Ok(fp)
    }

    pub fn validate_in_grid(&self, dims: &[usize]) -> Result<()> {
        if self.coords.len() != dims.len() {
            return Err(Error::invalid(format!(
                "focus point has {} coordinates for a rank-{} grid",
                self.coords.len(),
                dims.len()
            )));
        }
        for (a, (&c, &n)) in self.coords.iter().zip(dims).enumerate() {
            if !c.is_finite() || c < 0.0 || c > (n - 1) as f64 {
                return Err(Error::invalid(format!(
                    "focus coordinate {c} on axis {a} is outside the grid [0, {}]",
                    n - 1
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volume_center_is_half_extent() {
        assert_eq!(FocusPoint::volume_center(&[64, 64]).coords, vec![31.5, 31.5]);
        assert_eq!(
            FocusPoint::volume_center(&[16, 64, 64]).coords,
            vec![7.5, 31.5, 31.5]
        );
        assert_eq!(FocusPoint::volume_center(&[1, 1]).coords, vec![0.0, 0.0]);
    }

    #[test]
    fn explicit_accepts_interior_and_boundary() {
        assert!(FocusPoint::explicit(vec![20.0, 31.0], FocusKind::Lv, &[64, 64]).is_ok());
        assert!(FocusPoint::explicit(vec![63.0, 63.0], FocusKind::Explicit, &[64, 64]).is_ok());
    }

    #[test]
    fn explicit_rejects_out_of_grid() {
        let err = FocusPoint::explicit(vec![-1.0, 0.0], FocusKind::Explicit, &[64, 64]);
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
        assert!(FocusPoint::explicit(vec![0.0, 64.0], FocusKind::Explicit, &[64, 64]).is_err());
    }
}
