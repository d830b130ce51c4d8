//! Synthetic cine phantom: an annulus that contracts and relaxes following a
//! signed radial-rate schedule, with a constant torsional component and a
//! rotating angular texture so the motion is observable by registration.
//!
//! Motion vectors are the forward tissue motion per frame pair, so the
//! analytic fields drive the descriptor exactly like registered ones. The
//! torsion keeps the per-point direction cosine a smooth, strictly monotone
//! function of the radial rate: the descriptor curve then crosses zero and
//! peaks at the same frames as the schedule, which is what makes the
//! generated truth keyframes usable as an oracle.
//!
//! Off-band points carry a small static drift (constant in time) so the
//! magnitude percentile has genuine structure to separate; the
//! direction-change filter removes the drift exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, VectorGrid, MAX_DIM};
use crate::keyframes::{Keyframe, KeyframeSet, KeyframeStatus};
use crate::scalar::Scalar;
use crate::sequence::{DisplacementFieldSequence, ImageSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhantomProfile {
    /// Two-peaked diastole: distinct PF and MD.
    Normal,
    /// Single diastolic peak: MD falls back onto PF.
    NoMdPeak,
    /// Short systole and a low, flat diastole.
    WeakRelaxation,
}

impl std::str::FromStr for PhantomProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<PhantomProfile> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "normal" => Ok(PhantomProfile::Normal),
            "no_md_peak" => Ok(PhantomProfile::NoMdPeak),
            "weak_relaxation" => Ok(PhantomProfile::WeakRelaxation),
            other => Err(Error::invalid(format!("unknown phantom profile '{other}'"))),
        }
    }
}

/// Lobe layout of a schedule, in frame units. Systole spans `[s0, s1]`
/// (negative), diastole the wrapped remainder (non-negative).
struct ScheduleShape {
    s0: f64,
    s1: f64,
    /// Valley between the diastolic bumps; `None` for a single bump.
    e0: Option<f64>,
    /// Peak rates of the diastolic bumps relative to the first.
    amp2: f64,
}

impl ScheduleShape {
    fn for_profile(t: usize, profile: PhantomProfile) -> ScheduleShape {
        let tf = t as f64;
        match profile {
            PhantomProfile::Normal => ScheduleShape {
                s0: 0.05 * tf,
                s1: 0.35 * tf,
                e0: Some(0.58 * tf),
                amp2: 0.55,
            },
            PhantomProfile::NoMdPeak => ScheduleShape {
                s0: 0.05 * tf,
                s1: 0.35 * tf,
                e0: None,
                amp2: 0.0,
            },
            PhantomProfile::WeakRelaxation => ScheduleShape {
                s0: 0.05 * tf,
                s1: 0.25 * tf,
                e0: Some(0.55 * tf),
                amp2: 0.8,
            },
        }
    }

    /// Systolic peak amplitude that balances the diastolic area, for unit
    /// first-bump amplitude.
    fn systole_amp(&self, t: usize) -> f64 {
        let tf = t as f64;
        let dia_area = match self.e0 {
            Some(e0) => (e0 - self.s1) + self.amp2 * (self.s0 + tf - e0),
            None => self.s0 + tf - self.s1,
        };
        dia_area / (self.s1 - self.s0)
    }

    fn value(&self, x: f64, t: usize) -> f64 {
        let tf = t as f64;
        let xc = if x < self.s0 { x + tf } else { x };
        if xc >= self.s0 && xc < self.s1 {
            let u = (xc - self.s0) / (self.s1 - self.s0);
            return -self.systole_amp(t) * (std::f64::consts::PI * u).sin();
        }
        match self.e0 {
            Some(e0) => {
                if xc < e0 {
                    let u = (xc - self.s1) / (e0 - self.s1);
                    (std::f64::consts::PI * u).sin()
                } else {
                    let u = (xc - e0) / (self.s0 + tf - e0);
                    self.amp2 * (std::f64::consts::PI * u).sin()
                }
            }
            None => {
                let u = (xc - self.s1) / (self.s0 + tf - self.s1);
                (std::f64::consts::PI * u).sin()
            }
        }
    }

    fn truth(&self, t: usize) -> KeyframeSet {
        let tf = t as f64;
        let round = |x: f64| -> usize { (x.round() as i64).rem_euclid(t as i64) as usize };
        let ms = round((self.s0 + self.s1) / 2.0);
        let es = round(self.s1);
        let ed = round(self.s0);
        let (pf, md) = match self.e0 {
            Some(e0) => (
                Keyframe {
                    index: round((self.s1 + e0) / 2.0),
                    status: KeyframeStatus::Detected,
                },
                Keyframe {
                    index: round((e0 + self.s0 + tf) / 2.0),
                    status: KeyframeStatus::Detected,
                },
            ),
            None => {
                let peak = round((self.s1 + self.s0 + tf) / 2.0);
                (
                    Keyframe {
                        index: peak,
                        status: KeyframeStatus::Detected,
                    },
                    // single diastolic peak: MD coincides with PF
                    Keyframe {
                        index: peak,
                        status: KeyframeStatus::Fallback,
                    },
                )
            }
        };
        KeyframeSet {
            t,
            ed: Keyframe {
                index: ed,
                status: KeyframeStatus::Detected,
            },
            ms: Keyframe {
                index: ms,
                status: KeyframeStatus::Detected,
            },
            es: Keyframe {
                index: es,
                status: KeyframeStatus::Detected,
            },
            pf,
            md,
        }
    }
}

/// Rescales the positive part so the discrete schedule sums exactly to zero.
fn close_cycle(schedule: &mut [f64]) {
    let pos: f64 = schedule.iter().filter(|v| **v > 0.0).sum();
    let neg: f64 = -schedule.iter().filter(|v| **v < 0.0).sum::<f64>();
    if pos > 0.0 && neg > 0.0 {
        let factor = neg / pos;
        for v in schedule.iter_mut() {
            if *v > 0.0 {
                *v *= factor;
            }
        }
    }
}

/// Signed radial-rate schedule (grid units per frame, negative during
/// systole), scaled to a peak diastolic rate of 0.5 before cycle closure.
pub fn default_schedule(t: usize, profile: PhantomProfile) -> Result<Vec<f64>> {
    if t < 10 {
        return Err(Error::invalid(format!(
            "phantom schedules need T >= 10, got {t}"
        )));
    }
    let shape = ScheduleShape::for_profile(t, profile);
    let mut schedule: Vec<f64> = (0..t).map(|i| 0.5 * shape.value(i as f64, t)).collect();
    close_cycle(&mut schedule);
    Ok(schedule)
}

/// Truth keyframes implied by the analytic lobe layout of a profile.
pub fn schedule_truth(t: usize, profile: PhantomProfile) -> Result<KeyframeSet> {
    if t < 10 {
        return Err(Error::invalid(format!(
            "phantom schedules need T >= 10, got {t}"
        )));
    }
    Ok(ScheduleShape::for_profile(t, profile).truth(t))
}

/// Analytic description of a synthetic contracting/relaxing sequence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub dims: Vec<usize>,
    pub t: usize,
    /// Annulus centre in grid-index units, axis order.
    pub center: Vec<f64>,
    /// Signed radial motion rate per frame; negative contracts.
    pub schedule: Vec<f64>,
    pub ring_radius: f64,
    pub ring_width: f64,
    /// Torsional angular rate in radians per frame.
    pub rotation_rate: f64,
    /// Additive intensity noise level (absolute units).
    pub noise_sigma: f64,
    pub seed: u64,
    pub truth_keyframes: KeyframeSet,
}

impl PhantomSpec {
    /// Standard phantom for a grid: annulus at 0.28 of the short in-plane
    /// extent, radius swing 0.35 of the ring radius.
    ///
    /// The normal profile keeps its two diastolic peaks resolvable under
    /// the default descriptor smoothing (sigma 2) from T = 25 upward; below
    /// that the peaks sit inside the kernel radius and merge into one, like
    /// a real low-frame-rate acquisition.
    pub fn build(
        dims: &[usize],
        t: usize,
        profile: PhantomProfile,
        seed: u64,
        noise_sigma: f64,
    ) -> Result<PhantomSpec> {
        if dims.len() < 2 || dims.len() > 3 {
            return Err(Error::invalid(format!(
                "phantom dims must be rank 2 or 3, got {dims:?}"
            )));
        }
        let (ny, nx) = (dims[dims.len() - 2], dims[dims.len() - 1]);
        if ny.min(nx) < 24 {
            return Err(Error::invalid(format!(
                "phantom in-plane extent must be at least 24, got {dims:?}"
            )));
        }
        let ring_radius = 0.28 * ny.min(nx) as f64;
        let mut schedule = default_schedule(t, profile)?;
        let systole_area: f64 = -schedule.iter().filter(|v| **v < 0.0).sum::<f64>();
        let swing_target = 0.35 * ring_radius;
        let scale = swing_target / systole_area;
        for v in schedule.iter_mut() {
            *v *= scale;
        }
        let truth = schedule_truth(t, profile)?;
        // The angular texture has k-fold symmetry; quantize the torsion so
        // the pattern returns onto itself after T frames and the cycle
        // closes for the final frame pair.
        let turns = (0.05 * TEXTURE_WAVENUMBER * t as f64 / (2.0 * std::f64::consts::PI))
            .round()
            .max(1.0);
        let rotation_rate = 2.0 * std::f64::consts::PI * turns / (TEXTURE_WAVENUMBER * t as f64);
        let spec = PhantomSpec {
            dims: dims.to_vec(),
            t,
            center: dims.iter().map(|&n| (n - 1) as f64 / 2.0).collect(),
            schedule,
            ring_radius,
            ring_width: (0.25 * ring_radius).min(4.0),
            rotation_rate,
            noise_sigma,
            seed,
            truth_keyframes: truth,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t < 10 {
            return Err(Error::invalid(format!("phantom needs T >= 10, got {}", self.t)));
        }
        if self.schedule.len() != self.t {
            return Err(Error::invalid(format!(
                "schedule has {} entries for T = {}",
                self.schedule.len(),
                self.t
            )));
        }
        if !self.schedule.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("phantom schedule"));
        }
        if self.center.len() != self.dims.len() {
            return Err(Error::invalid("centre rank must match dims".to_string()));
        }
        if !(self.ring_radius > 0.0 && self.ring_width > 0.0) {
            return Err(Error::invalid("ring geometry must be positive".to_string()));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::invalid("noise_sigma must be non-negative".to_string()));
        }
        // exactly one contiguous negative run, cyclically
        let neg: Vec<bool> = self.schedule.iter().map(|&v| v < 0.0).collect();
        let transitions = (0..self.t)
            .filter(|&i| neg[i] && !neg[(i + 1) % self.t])
            .count();
        if self.schedule.iter().any(|&v| v < 0.0) && transitions != 1 {
            return Err(Error::invalid(format!(
                "schedule must hold one contiguous negative run, found {transitions}"
            )));
        }
        for (_, kf) in self.truth_keyframes.entries() {
            if kf.index >= self.t {
                return Err(Error::invalid("truth keyframe outside sequence".to_string()));
            }
        }
        Ok(())
    }
}

/// splitmix64 step, used as a counter-based generator.
fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 / (1u64 << 53) as f64
}

/// Standard normal draw for a (seed, stream, index) triple.
fn gaussian(seed: u64, stream: u64, index: u64) -> f64 {
    let base = splitmix(seed ^ stream.wrapping_mul(0xA24BAED4963EE407) ^ index);
    let u1 = unit_f64(splitmix(base)).max(f64::MIN_POSITIVE);
    let u2 = unit_f64(splitmix(base ^ 0x9E3779B97F4A7C15));
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

struct PointGeometry {
    rho: f64,
    /// In-plane radial unit vector (outward), axis order.
    unit_r: [f64; MAX_DIM],
    /// In-plane tangential unit vector, axis order.
    unit_t: [f64; MAX_DIM],
    theta: f64,
    support: f64,
    /// Static background texture value at this point.
    background: f64,
}

fn geometry(spec: &PhantomSpec, band: (f64, f64)) -> Vec<PointGeometry> {
    let d = spec.dims.len();
    let n: usize = spec.dims.iter().product();
    let (ya, xa) = (d - 2, d - 1);
    let taper = spec.ring_width;
    let mut out = Vec::with_capacity(n);
    let mut coords = [0usize; MAX_DIM];
    for p in 0..n {
        let mut rem = p;
        for a in (0..d).rev() {
            coords[a] = rem % spec.dims[a];
            rem /= spec.dims[a];
        }
        let dy = coords[ya] as f64 - spec.center[ya];
        let dx = coords[xa] as f64 - spec.center[xa];
        let rho = (dy * dy + dx * dx).sqrt();
        let mut unit_r = [0.0f64; MAX_DIM];
        let mut unit_t = [0.0f64; MAX_DIM];
        let theta = dy.atan2(dx);
        if rho > 1e-9 {
            unit_r[ya] = dy / rho;
            unit_r[xa] = dx / rho;
            unit_t[ya] = dx / rho;
            unit_t[xa] = -dy / rho;
        }
        let support = if rho < 0.75 {
            0.0
        } else if rho >= band.0 && rho <= band.1 {
            1.0
        } else if rho > band.0 - taper && rho < band.0 {
            0.5 * (1.0 + (std::f64::consts::PI * (band.0 - rho) / taper).cos())
        } else if rho > band.1 && rho < band.1 + taper {
            0.5 * (1.0 + (std::f64::consts::PI * (rho - band.1) / taper).cos())
        } else {
            0.0
        };
        out.push(PointGeometry {
            rho,
            unit_r,
            unit_t,
            theta,
            support,
            background: background_pattern(spec.seed, coords[ya] as f64, coords[xa] as f64),
        });
    }
    out
}

const TEXTURE_AMPLITUDE: f64 = 0.3;
const TEXTURE_WAVENUMBER: f64 = 6.0;
const DRIFT_FRACTION: f64 = 0.04;
const BASE_INTENSITY: f64 = 0.1;
const BACKGROUND_AMPLITUDE: f64 = 0.25;

/// Static in-plane background texture: a few seeded random-phase plane
/// waves. Gives the solver structure to anchor the motionless surroundings,
/// like the static anatomy around a heart.
fn background_pattern(seed: u64, y: f64, x: f64) -> f64 {
    let mut acc = 0.0;
    for k in 0..5u64 {
        let dir = 2.0 * std::f64::consts::PI * unit_f64(splitmix(seed ^ (k * 2 + 1)));
        let freq = 2.0 * std::f64::consts::PI / (6.0 + 8.0 * unit_f64(splitmix(seed ^ (k * 2 + 2))));
        let phase = 2.0 * std::f64::consts::PI * unit_f64(splitmix(seed ^ (k + 77)));
        acc += (freq * (y * dir.sin() + x * dir.cos()) + phase).cos();
    }
    acc / 5.0
}

/// Renders the phantom: intensity frames, analytic motion fields, truth
/// keyframes. Deterministic for a fixed spec.
pub fn generate<S: Scalar>(
    spec: &PhantomSpec,
) -> Result<(ImageSequence<S>, DisplacementFieldSequence<S>, KeyframeSet)> {
    spec.validate()?;
    let d = spec.dims.len();
    let t = spec.t;
    let n: usize = spec.dims.iter().product();

    // radius trajectory
    let mut radius = Vec::with_capacity(t + 1);
    radius.push(spec.ring_radius);
    for &a in &spec.schedule {
        radius.push(radius.last().unwrap() + a);
    }
    let r_min = radius.iter().cloned().fold(f64::INFINITY, f64::min);
    let r_max = radius.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sigma_r = spec.ring_width / 2.0;
    let band = (r_min - 3.0 * sigma_r, r_max + 3.0 * sigma_r);
    if band.0 <= 1.0 {
        return Err(Error::invalid(format!(
            "ring radius {} too small for its swing and width",
            spec.ring_radius
        )));
    }

    let geo = geometry(spec, band);
    let max_rate = spec
        .schedule
        .iter()
        .fold(0.0f64, |m, a| m.max(a.abs()));
    let drift_amp = DRIFT_FRACTION * max_rate;

    // static per-point drift on unsupported points
    let mut drift = vec![[0.0f64; MAX_DIM]; n];
    for (p, slot) in drift.iter_mut().enumerate() {
        if geo[p].support != 0.0 || drift_amp == 0.0 {
            continue;
        }
        let mut v = [0.0f64; MAX_DIM];
        let mut norm = 0.0;
        for (a, va) in v.iter_mut().enumerate().take(d) {
            *va = gaussian(spec.seed, 0xD81F, (p * MAX_DIM + a) as u64);
            norm += *va * *va;
        }
        let norm = norm.sqrt().max(1e-12);
        for va in v.iter_mut().take(d) {
            *va = *va / norm * drift_amp;
        }
        *slot = v;
    }

    let zc = if d == 3 {
        (spec.dims[0] - 1) as f64 / 2.0
    } else {
        0.0
    };
    let mut frames = Vec::with_capacity(t);
    let mut fields = Vec::with_capacity(t);
    for ti in 0..t {
        let r_t = radius[ti];
        let phase = TEXTURE_WAVENUMBER * spec.rotation_rate * ti as f64;
        let mut frame = Grid::zeros(&spec.dims);
        let frame_data = frame.data_mut();
        let mut field = VectorGrid::zeros(&spec.dims);
        for p in 0..n {
            let g = &geo[p];
            let zprof = if d == 3 {
                let z = (p / (spec.dims[1] * spec.dims[2])) as f64;
                0.8 + 0.2 * (std::f64::consts::PI * (z - zc) / zc.max(1.0)).cos()
            } else {
                1.0
            };
            let ring = (-(g.rho - r_t) * (g.rho - r_t) / (2.0 * sigma_r * sigma_r)).exp();
            let texture = 1.0 + TEXTURE_AMPLITUDE * (TEXTURE_WAVENUMBER * g.theta - phase).cos();
            let mut intensity = BASE_INTENSITY + ring * texture * zprof;
            if g.support < 1.0 {
                intensity += BACKGROUND_AMPLITUDE * (1.0 - g.support) * g.background;
            }
            if spec.noise_sigma > 0.0 {
                intensity += spec.noise_sigma * gaussian(spec.seed, ti as u64 + 1, p as u64);
            }
            frame_data[p] = S::of_f64(intensity);

            let rate = spec.schedule[ti];
            let mut v = [0.0f64; MAX_DIM];
            if g.support > 0.0 {
                for a in 0..d {
                    v[a] = g.support
                        * (rate * g.unit_r[a] + spec.rotation_rate * g.rho * g.unit_t[a]);
                }
            } else {
                v = drift[p];
            }
            field.set_vector(p, &v);
        }
        frames.push(frame);
        fields.push(field);
    }
    let spacing = vec![1.0; d];
    Ok((
        ImageSequence::new(frames, spacing.clone())?,
        DisplacementFieldSequence::new(fields, spacing)?,
        spec.truth_keyframes,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registration::warp_by_motion;
    use crate::ssim::ssim;

    #[test]
    fn normal_schedule_has_expected_feature_windows() {
        let s = default_schedule(40, PhantomProfile::Normal).unwrap();
        let argmin = (0..40).min_by(|&a, &b| s[a].partial_cmp(&s[b]).unwrap()).unwrap();
        assert!((6..=12).contains(&argmin), "argmin at {argmin}");
        let upcross = (0..40)
            .find(|&i| s[i] < 0.0 && s[(i + 1) % 40] >= 0.0)
            .map(|i| i + 1)
            .unwrap();
        assert!((12..=16).contains(&upcross), "upward crossing at {upcross}");
        let argmax = (0..40).max_by(|&a, &b| s[a].partial_cmp(&s[b]).unwrap()).unwrap();
        assert!((16..=22).contains(&argmax), "argmax at {argmax}");
        // secondary peak: max over the tail window
        let secondary = (26..=34).max_by(|&a, &b| s[a].partial_cmp(&s[b]).unwrap()).unwrap();
        assert!(s[secondary] > 0.0);
        assert!(
            s[secondary] > s[25] && s[secondary] > s[35],
            "secondary bump must peak inside 26..=34"
        );
    }

    #[test]
    fn schedules_close_the_cycle() {
        for profile in [
            PhantomProfile::Normal,
            PhantomProfile::NoMdPeak,
            PhantomProfile::WeakRelaxation,
        ] {
            for t in [10usize, 25, 30, 40] {
                let s = default_schedule(t, profile).unwrap();
                let sum: f64 = s.iter().sum();
                assert!(sum.abs() < 1e-6, "{profile:?} T={t}: sum {sum}");
            }
        }
    }

    #[test]
    fn no_md_peak_has_single_positive_maximum() {
        let s = default_schedule(40, PhantomProfile::NoMdPeak).unwrap();
        let mut maxima = 0;
        for i in 0..40 {
            let prev = s[(i + 39) % 40];
            let next = s[(i + 1) % 40];
            if s[i] > 0.0 && s[i] > prev && s[i] > next {
                maxima += 1;
            }
        }
        assert_eq!(maxima, 1);
    }

    #[test]
    fn schedule_rejects_short_sequences() {
        assert!(default_schedule(5, PhantomProfile::Normal).is_err());
    }

    #[test]
    fn zero_schedule_gives_static_frames_and_zero_fields() {
        let truth = schedule_truth(20, PhantomProfile::Normal).unwrap();
        let spec = PhantomSpec {
            dims: vec![32, 32],
            t: 20,
            center: vec![15.5, 15.5],
            schedule: vec![0.0; 20],
            ring_radius: 9.0,
            ring_width: 3.0,
            rotation_rate: 0.0,
            noise_sigma: 0.0,
            seed: 1,
            truth_keyframes: truth,
        };
        let (images, fields, _) = generate::<f64>(&spec).unwrap();
        for t in 1..20 {
            assert_eq!(images.frame(t).data(), images.frame(0).data());
        }
        for f in fields.fields() {
            assert!(f.data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn analytic_field_warps_frame_onto_successor() {
        let spec = PhantomSpec::build(&[64, 64], 30, PhantomProfile::Normal, 3, 0.0).unwrap();
        let (images, fields, _) = generate::<f64>(&spec).unwrap();
        let (lo, hi) = images.intensity_range();
        for t in [0usize, 7, 14, 21, 29] {
            let predicted = warp_by_motion(images.frame(t), fields.field(t));
            let actual = images.frame((t + 1) % 30);
            let score = ssim(actual, &predicted, 7, hi - lo).unwrap();
            assert!(score > 0.98, "frame {t}: ssim {score}");
        }
    }

    #[test]
    fn frame_differences_track_schedule_magnitude() {
        let spec = PhantomSpec::build(&[64, 64], 30, PhantomProfile::Normal, 9, 0.0).unwrap();
        let (images, _, _) = generate::<f64>(&spec).unwrap();
        let diffs: Vec<f64> = (0..30)
            .map(|t| {
                let a = images.frame(t).data();
                let b = images.frame((t + 1) % 30).data();
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        let mut order: Vec<usize> = (0..30).collect();
        order.sort_by(|&a, &b| spec.schedule[a].abs().partial_cmp(&spec.schedule[b].abs()).unwrap());
        let low: f64 = order[..5].iter().map(|&i| diffs[i]).sum::<f64>() / 5.0;
        let high: f64 = order[25..].iter().map(|&i| diffs[i]).sum::<f64>() / 5.0;
        assert!(
            high > 2.0 * low,
            "fast frames must differ more: high {high}, low {low}"
        );
        // the single largest intensity change happens near the largest |rate|
        let max_diff = (0..30)
            .max_by(|&a, &b| diffs[a].partial_cmp(&diffs[b]).unwrap())
            .unwrap();
        let max_rate = (0..30)
            .max_by(|&a, &b| {
                spec.schedule[a]
                    .abs()
                    .partial_cmp(&spec.schedule[b].abs())
                    .unwrap()
            })
            .unwrap();
        let dist = crate::keyframes::cfd(max_diff, max_rate, 30).unwrap();
        assert!(dist <= 2, "max diff at {max_diff}, max rate at {max_rate}");
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let spec = PhantomSpec::build(&[32, 32], 12, PhantomProfile::Normal, 42, 0.02).unwrap();
        let (a, fa, _) = generate::<f64>(&spec).unwrap();
        let (b, fb, _) = generate::<f64>(&spec).unwrap();
        for t in 0..12 {
            assert_eq!(a.frame(t).data(), b.frame(t).data());
            assert_eq!(fa.field(t).data(), fb.field(t).data());
        }
    }

    #[test]
    fn truth_keyframes_are_consistent_with_schedule() {
        for t in [25usize, 30, 40] {
            let spec = PhantomSpec::build(&[48, 48], t, PhantomProfile::Normal, 5, 0.0).unwrap();
            let truth = spec.truth_keyframes;
            let s = &spec.schedule;
            let argmin = (0..t).min_by(|&a, &b| s[a].partial_cmp(&s[b]).unwrap()).unwrap();
            assert!(crate::keyframes::cfd(truth.ms.index, argmin, t).unwrap() <= 1);
            let argmax = (0..t).max_by(|&a, &b| s[a].partial_cmp(&s[b]).unwrap()).unwrap();
            assert!(crate::keyframes::cfd(truth.pf.index, argmax, t).unwrap() <= 1);
        }
    }
}
