//! Configuration for registration and descriptor computation, with the
//! per-view presets baked in.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Acquisition view. Selects the preset target spacing and direction-change
/// threshold; everything else is shared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    /// Short axis: stacked slices forming a 3D volume per frame.
    Sax,
    /// Four-chamber long axis: a single 2D slice per frame.
    #[serde(rename = "fourch")]
    FourCh,
}

impl View {
    /// Isotropic target spacing in millimetres.
    pub fn target_spacing_mm(self) -> f64 {
        match self {
            View::Sax => 2.5,
            View::FourCh => 1.0,
        }
    }

    pub fn descriptor_defaults(self) -> DescriptorConfig {
        DescriptorConfig {
            t_norm_percentile: 50.0,
            t_delta_alpha: match self {
                View::Sax => 0.8,
                View::FourCh => 1.2,
            },
            gaussian_sigma: 2.0,
            focus: FocusSelector::Mse,
        }
    }
}

impl std::str::FromStr for View {
    type Err = Error;

    fn from_str(s: &str) -> Result<View> {
        match s.to_ascii_lowercase().as_str() {
            "sax" => Ok(View::Sax),
            "fourch" | "4ch" | "lax" => Ok(View::FourCh),
            other => Err(Error::invalid(format!("unknown view '{other}'"))),
        }
    }
}

/// How the focus point is chosen when computing a descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FocusSelector {
    /// Self-supervised: centre of mass of the combined mask.
    Mse,
    /// Centre of the volume.
    Vol,
    /// Externally supplied coordinates in axis order.
    Explicit { coords: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorConfig {
    /// Percentile (nearest-rank, in [0, 100]) of the temporally averaged
    /// displacement magnitudes below which points are masked out.
    pub t_norm_percentile: f64,
    /// Minimum direction-change range (in [0, 2]) a point must span over the
    /// cycle to stay in the mask.
    pub t_delta_alpha: f64,
    /// Standard deviation, in frames, of the cyclic Gaussian smoothing of
    /// the descriptor curve.
    pub gaussian_sigma: f64,
    pub focus: FocusSelector,
}

impl DescriptorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=100.0).contains(&self.t_norm_percentile) {
            return Err(Error::invalid(format!(
                "t_norm_percentile {} outside [0, 100]",
                self.t_norm_percentile
            )));
        }
        if !(0.0..=2.0).contains(&self.t_delta_alpha) {
            return Err(Error::invalid(format!(
                "t_delta_alpha {} outside [0, 2]",
                self.t_delta_alpha
            )));
        }
        if !self.gaussian_sigma.is_finite() || self.gaussian_sigma < 0.0 {
            return Err(Error::invalid(format!(
                "gaussian_sigma {} must be non-negative",
                self.gaussian_sigma
            )));
        }
        Ok(())
    }
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        View::Sax.descriptor_defaults()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationConfig {
    /// Weight of the diffusion regularizer in the composite loss.
    pub lambda_smooth: f64,
    /// Coarse-to-fine levels, downsampled by 2 per level.
    pub pyramid_levels: usize,
    /// Optimizer iteration cap per level.
    pub iterations_per_level: usize,
    /// Initial line-search trial step, in grid units of field change.
    pub step_size: f64,
    /// Odd edge length of the local SSIM window.
    pub ssim_window: usize,
    /// Relative loss-change threshold that ends a level.
    pub convergence_tol: f64,
    /// Warm-start each frame pair from the previous pair's solution.
    pub warm_start: bool,
}

impl RegistrationConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.lambda_smooth.is_finite() || self.lambda_smooth < 0.0 {
            return Err(Error::invalid(format!(
                "lambda_smooth {} must be non-negative",
                self.lambda_smooth
            )));
        }
        if self.pyramid_levels == 0 {
            return Err(Error::invalid("pyramid_levels must be at least 1".to_string()));
        }
        if self.ssim_window < 3 || self.ssim_window % 2 == 0 {
            return Err(Error::invalid(format!(
                "ssim_window {} must be odd and at least 3",
                self.ssim_window
            )));
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::invalid(format!(
                "step_size {} must be positive",
                self.step_size
            )));
        }
        if !(self.convergence_tol.is_finite() && self.convergence_tol > 0.0) {
            return Err(Error::invalid(format!(
                "convergence_tol {} must be positive",
                self.convergence_tol
            )));
        }
        Ok(())
    }
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        RegistrationConfig {
            lambda_smooth: 0.001,
            pyramid_levels: 3,
            iterations_per_level: 100,
            step_size: 1.0,
            ssim_window: 7,
            convergence_tol: 1e-5,
            warm_start: true,
        }
    }
}
