//! Effective run configuration: view presets overridden by a JSON config
//! file, overridden by command-line flags. The resolved config is echoed
//! into every output JSON so runs are reproducible from their artifacts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use cardiokey_core::config::{DescriptorConfig, FocusSelector, RegistrationConfig, View};
use cardiokey_core::error::{Error, Result};

/// Flat, all-optional JSON config file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub view: Option<View>,
    pub lambda: Option<f64>,
    pub pyramid_levels: Option<usize>,
    pub iterations_per_level: Option<usize>,
    pub step_size: Option<f64>,
    pub ssim_window: Option<usize>,
    pub convergence_tol: Option<f64>,
    pub warm_start: Option<bool>,
    pub t_norm: Option<f64>,
    pub t_delta_alpha: Option<f64>,
    pub sigma: Option<f64>,
    /// `mse`, `vol`, or `explicit:X,Y[,Z]`.
    pub focus: Option<String>,
    pub target_spacing_mm: Option<f64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
    }
}

/// Command-line overrides shared by the pipeline commands.
#[derive(Debug, Default, clap::Args)]
pub struct ConfigFlags {
    /// JSON config file; explicit flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// View preset: sax or fourch.
    #[arg(long)]
    pub view: Option<String>,
    /// Regularization weight of the registration loss.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Pyramid levels.
    #[arg(long)]
    pub levels: Option<usize>,
    /// Optimizer iterations per level.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Initial line-search step in grid units.
    #[arg(long)]
    pub step: Option<f64>,
    /// SSIM window edge length (odd).
    #[arg(long)]
    pub window: Option<usize>,
    /// Relative loss-change convergence tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Disable warm-starting between frame pairs.
    #[arg(long)]
    pub no_warm_start: bool,
    /// Magnitude-mask percentile in [0, 100].
    #[arg(long)]
    pub t_norm: Option<f64>,
    /// Direction-change threshold in [0, 2].
    #[arg(long)]
    pub t_delta_alpha: Option<f64>,
    /// Gaussian smoothing sigma in frames.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Focus point: mse, vol, or explicit:X,Y[,Z] (X is the fastest axis).
    #[arg(long)]
    pub focus: Option<String>,
    /// Isotropic resampling target in millimetres (view default otherwise).
    #[arg(long)]
    pub target_spacing: Option<f64>,
    /// Seed echoed into outputs.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker-thread cap; results are identical for any value.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Write every intermediate artifact next to the outputs.
    #[arg(long)]
    pub emit_intermediates: bool,
}

/// Fully resolved configuration, serialized into every output.
#[derive(Debug, Clone, Serialize)]
pub struct EffectiveConfig {
    pub view: View,
    pub target_spacing_mm: f64,
    pub registration: RegistrationConfig,
    pub descriptor: DescriptorConfig,
    pub seed: u64,
}

/// `explicit:X,Y[,Z]` coordinates arrive in x-fastest order; internal axis
/// order is slowest first, so they are reversed.
pub fn parse_focus(text: &str) -> Result<FocusSelector> {
    let lower = text.to_ascii_lowercase();
    match lower.as_str() {
        "mse" => Ok(FocusSelector::Mse),
        "vol" => Ok(FocusSelector::Vol),
        _ => {
            if let Some(rest) = lower.strip_prefix("explicit:") {
                let parts: Vec<&str> = rest.split(',').collect();
                if parts.len() < 2 || parts.len() > 3 {
                    return Err(Error::invalid(format!(
                        "focus '{text}' needs 2 or 3 coordinates"
                    )));
                }
                let mut coords = Vec::with_capacity(parts.len());
                for p in &parts {
                    coords.push(p.trim().parse::<f64>().map_err(|_| {
                        Error::invalid(format!("focus coordinate '{p}' is not a number"))
                    })?);
                }
                coords.reverse();
                Ok(FocusSelector::Explicit { coords })
            } else {
                Err(Error::invalid(format!(
                    "focus '{text}' must be mse, vol, or explicit:X,Y[,Z]"
                )))
            }
        }
    }
}

pub fn resolve(flags: &ConfigFlags) -> Result<EffectiveConfig> {
    let file = match &flags.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let view = match &flags.view {
        Some(v) => v.parse::<View>()?,
        None => file.view.unwrap_or(View::Sax),
    };
    let mut registration = RegistrationConfig::default();
    let mut descriptor = view.descriptor_defaults();
    let mut target_spacing = view.target_spacing_mm();
    let mut seed = 0u64;

    if let Some(v) = file.lambda {
        registration.lambda_smooth = v;
    }
    if let Some(v) = file.pyramid_levels {
        registration.pyramid_levels = v;
    }
    if let Some(v) = file.iterations_per_level {
        registration.iterations_per_level = v;
    }
    if let Some(v) = file.step_size {
        registration.step_size = v;
    }
    if let Some(v) = file.ssim_window {
        registration.ssim_window = v;
    }
    if let Some(v) = file.convergence_tol {
        registration.convergence_tol = v;
    }
    if let Some(v) = file.warm_start {
        registration.warm_start = v;
    }
    if let Some(v) = file.t_norm {
        descriptor.t_norm_percentile = v;
    }
    if let Some(v) = file.t_delta_alpha {
        descriptor.t_delta_alpha = v;
    }
    if let Some(v) = file.sigma {
        descriptor.gaussian_sigma = v;
    }
    if let Some(v) = &file.focus {
        descriptor.focus = parse_focus(v)?;
    }
    if let Some(v) = file.target_spacing_mm {
        target_spacing = v;
    }
    if let Some(v) = file.seed {
        seed = v;
    }

    if let Some(v) = flags.lambda {
        registration.lambda_smooth = v;
    }
    if let Some(v) = flags.levels {
        registration.pyramid_levels = v;
    }
    if let Some(v) = flags.iterations {
        registration.iterations_per_level = v;
    }
    if let Some(v) = flags.step {
        registration.step_size = v;
    }
    if let Some(v) = flags.window {
        registration.ssim_window = v;
    }
    if let Some(v) = flags.tol {
        registration.convergence_tol = v;
    }
    if flags.no_warm_start {
        registration.warm_start = false;
    }
    if let Some(v) = flags.t_norm {
        descriptor.t_norm_percentile = v;
    }
    if let Some(v) = flags.t_delta_alpha {
        descriptor.t_delta_alpha = v;
    }
    if let Some(v) = flags.sigma {
        descriptor.gaussian_sigma = v;
    }
    if let Some(v) = &flags.focus {
        descriptor.focus = parse_focus(v)?;
    }
    if let Some(v) = flags.target_spacing {
        target_spacing = v;
    }
    if let Some(v) = flags.seed {
        seed = v;
    }

    registration.validate()?;
    descriptor.validate()?;
    if !(target_spacing.is_finite() && target_spacing > 0.0) {
        return Err(Error::invalid(format!(
            "target spacing {target_spacing} must be positive"
        )));
    }
    Ok(EffectiveConfig {
        view,
        target_spacing_mm: target_spacing,
        registration,
        descriptor,
        seed,
    })
}

/// Number of worker threads: flag, then config file, then the rayon default.
pub fn thread_count(flags: &ConfigFlags) -> Result<Option<usize>> {
    if let Some(n) = flags.threads {
        return Ok(Some(n));
    }
    if let Some(path) = &flags.config {
        return Ok(FileConfig::load(path)?.threads);
    }
    Ok(None)
}
