//! Implementations of the five subcommands.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use cardiokey_core::cvol;
use cardiokey_core::descriptor::{compute_descriptor, MotionDescriptor};
use cardiokey_core::error::{Error, Result};
use cardiokey_core::focus::FocusPoint;
use cardiokey_core::keyframes::{detect_keyframes, evaluate, KeyframeSet, KeyframeSetWire};
use cardiokey_core::phantom::{generate, PhantomProfile, PhantomSpec};
use cardiokey_core::registration::{register_sequence_with_traces, LossRecord, SequenceTraces};
use cardiokey_core::sequence::{DisplacementFieldSequence, ImageSequence};

use crate::runconfig::EffectiveConfig;
use crate::verbose;

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Error::parse(path, e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct KeyframeOutput<'a> {
    #[serde(flatten)]
    keyframes: KeyframeSetWire,
    focus: &'a FocusPoint,
    config: &'a EffectiveConfig,
}

#[derive(Serialize)]
struct DescriptorOutput<'a> {
    focus: &'a FocusPoint,
    mask_points: usize,
    config: &'a EffectiveConfig,
}

fn write_descriptor_artifacts(
    out: &Path,
    desc: &MotionDescriptor<f64>,
    spacing: &[f64],
    config: &EffectiveConfig,
) -> Result<()> {
    write_text(&out.join("descriptor.csv"), &desc.to_csv())?;
    cvol::write_frames(
        &out.join("mask"),
        std::slice::from_ref(&desc.mask.to_grid::<f64>()),
        spacing,
    )?;
    write_json_pretty(
        &out.join("descriptor.json"),
        &DescriptorOutput {
            focus: &desc.focus,
            mask_points: desc.mask.count(),
            config,
        },
    )
}

fn flat_traces(traces: &[(usize, Vec<LossRecord>)]) -> String {
    let mut out = String::from("frame_pair,iteration,level,loss\n");
    for (frame, records) in traces {
        for r in records {
            out.push_str(&format!("{},{},{},{}\n", frame, r.iteration, r.level, r.loss));
        }
    }
    out
}

fn load_and_resample(input: &Path, config: &EffectiveConfig) -> Result<ImageSequence<f64>> {
    let seq: ImageSequence<f64> = cvol::read_volume(input)?;
    verbose(&format!(
        "loaded {:?}: T={} dims {:?} spacing {:?}",
        input,
        seq.len(),
        seq.dims(),
        seq.spacing()
    ));
    let target = vec![config.target_spacing_mm; seq.dims().len()];
    let resampled = seq.resample(&target)?;
    verbose(&format!(
        "resampled to {:?} at {} mm",
        resampled.dims(),
        config.target_spacing_mm
    ));
    Ok(resampled)
}

fn register(
    seq: &ImageSequence<f64>,
    config: &EffectiveConfig,
) -> Result<(DisplacementFieldSequence<f64>, SequenceTraces)> {
    verbose(&format!("registering {} frame pairs", seq.len()));
    let out = register_sequence_with_traces(seq, &config.registration)?;
    verbose("registration done");
    Ok(out)
}

/// Full pipeline. Exactly one of `input` (cvol, runs registration) or
/// `fields` (precomputed field artifact) must be given.
pub fn detect(
    input: Option<&Path>,
    fields_dir: Option<&Path>,
    out: &Path,
    config: &EffectiveConfig,
    emit_intermediates: bool,
) -> Result<()> {
    ensure_dir(out)?;
    let (fields, traces) = match (input, fields_dir) {
        (Some(input), None) => {
            let seq = load_and_resample(input, config)?;
            let (fields, traces) = register(&seq, config)?;
            if emit_intermediates {
                cvol::write_volume(&out.join("resampled"), &seq)?;
            }
            (fields, Some(traces))
        }
        (None, Some(dir)) => {
            let fields: DisplacementFieldSequence<f64> = cvol::read_fields(dir)?;
            verbose(&format!(
                "loaded fields {:?}: T={} dims {:?}",
                dir,
                fields.len(),
                fields.dims()
            ));
            (fields, None)
        }
        _ => {
            return Err(Error::invalid(
                "detect needs exactly one of --input or --fields".to_string(),
            ))
        }
    };
    let desc = compute_descriptor(&fields, &config.descriptor)?;
    verbose(&format!(
        "descriptor ready: focus {:?}, {} mask points",
        desc.focus.coords,
        desc.mask.count()
    ));
    let keyframes = detect_keyframes(&desc.alpha)?;
    write_json_pretty(
        &out.join("keyframes.json"),
        &KeyframeOutput {
            keyframes: KeyframeSetWire::from(&keyframes),
            focus: &desc.focus,
            config,
        },
    )?;
    write_descriptor_artifacts(out, &desc, fields.spacing(), config)?;
    if emit_intermediates {
        cvol::write_fields(&out.join("fields"), &fields)?;
        if let Some(traces) = traces {
            write_text(&out.join("loss_trace.csv"), &flat_traces(&traces))?;
        }
    }
    Ok(())
}

/// Registration only: cvol in, field artifact and loss trace out.
pub fn register_cmd(input: &Path, out: &Path, config: &EffectiveConfig) -> Result<()> {
    ensure_dir(out)?;
    let seq = load_and_resample(input, config)?;
    let (fields, traces) = register(&seq, config)?;
    cvol::write_fields(&out.join("fields"), &fields)?;
    write_text(&out.join("loss_trace.csv"), &flat_traces(&traces))?;
    write_json_pretty(&out.join("registration.json"), config)?;
    Ok(())
}

/// Descriptor only, from precomputed fields.
pub fn describe(fields_dir: &Path, out: &Path, config: &EffectiveConfig) -> Result<()> {
    ensure_dir(out)?;
    let fields: DisplacementFieldSequence<f64> = cvol::read_fields(fields_dir)?;
    verbose(&format!(
        "loaded fields {:?}: T={} dims {:?}",
        fields_dir,
        fields.len(),
        fields.dims()
    ));
    let desc = compute_descriptor(&fields, &config.descriptor)?;
    verbose(&format!(
        "descriptor ready: focus {:?}, {} mask points",
        desc.focus.coords,
        desc.mask.count()
    ));
    write_descriptor_artifacts(out, &desc, fields.spacing(), config)
}

#[derive(Deserialize)]
struct ReferenceFile {
    cases: BTreeMap<String, KeyframeSetWire>,
}

/// Scores a directory of keyframe JSONs against a reference file.
pub fn evaluate_cmd(predictions: &Path, references: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(references).map_err(|e| Error::io(references, e))?;
    let refs: ReferenceFile =
        serde_json::from_str(&text).map_err(|e| Error::parse(references, e.to_string()))?;
    let mut entries: Vec<(String, PathBuf)> = Vec::new();
    for entry in fs::read_dir(predictions).map_err(|e| Error::io(predictions, e))? {
        let entry = entry.map_err(|e| Error::io(predictions, e))?;
        let path = entry.path();
        if path.extension().is_some_and(|e| e == "json") {
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            entries.push((stem, path));
        }
    }
    if entries.is_empty() {
        return Err(Error::invalid(format!(
            "no prediction JSON files in {predictions:?}"
        )));
    }
    entries.sort();
    let mut missing = Vec::new();
    let mut preds: Vec<KeyframeSet> = Vec::new();
    let mut ref_sets: Vec<KeyframeSet> = Vec::new();
    let mut ids = Vec::new();
    let ref_cases: BTreeMap<String, KeyframeSet> = refs
        .cases
        .into_iter()
        .map(|(k, v)| (k, KeyframeSet::from(v)))
        .collect();
    for (id, path) in &entries {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let wire: KeyframeSetWire =
            serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        match ref_cases.get(id) {
            Some(rf) => {
                preds.push(KeyframeSet::from(wire));
                ref_sets.push(*rf);
                ids.push(id.clone());
            }
            None => missing.push(id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::invalid(format!(
            "no reference for case(s): {}",
            missing.join(", ")
        )));
    }
    let eval = evaluate(&preds, &ref_sets, Some(&ids))?;
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    write_text(out, &eval.to_csv())
}

/// Phantom truth sidecar: keyframes plus the generating parameters.
#[derive(Serialize)]
struct TruthFile<'a> {
    #[serde(flatten)]
    keyframes: KeyframeSetWire,
    profile: PhantomProfile,
    seed: u64,
    center: &'a [f64],
    schedule: &'a [f64],
    ring_radius: f64,
    ring_width: f64,
    rotation_rate: f64,
    noise_sigma: f64,
    spacing_mm: &'a [f64],
}

pub struct PhantomArgsResolved {
    pub dims: Vec<usize>,
    pub t: usize,
    pub profile: PhantomProfile,
    pub seed: u64,
    pub noise_sigma: f64,
    pub spacing_mm: f64,
    pub emit_fields: bool,
}

/// Generates a phantom cvol plus its truth.json (and optionally the
/// analytic fields artifact).
pub fn phantom_cmd(args: &PhantomArgsResolved, out: &Path) -> Result<()> {
    let spec = PhantomSpec::build(&args.dims, args.t, args.profile, args.seed, args.noise_sigma)?;
    let (images, fields, truth) = generate::<f64>(&spec)?;
    let spacing = vec![args.spacing_mm; args.dims.len()];
    let images = ImageSequence::new(images.frames().to_vec(), spacing.clone())?;
    ensure_dir(out)?;
    cvol::write_volume(out, &images)?;
    write_json_pretty(
        &out.join("truth.json"),
        &TruthFile {
            keyframes: KeyframeSetWire::from(&truth),
            profile: args.profile,
            seed: args.seed,
            center: &spec.center,
            schedule: &spec.schedule,
            ring_radius: spec.ring_radius,
            ring_width: spec.ring_width,
            rotation_rate: spec.rotation_rate,
            noise_sigma: spec.noise_sigma,
            spacing_mm: &spacing,
        },
    )?;
    if args.emit_fields {
        let fields = DisplacementFieldSequence::new(fields.fields().to_vec(), spacing)?;
        cvol::write_fields(&out.join("fields"), &fields)?;
    }
    Ok(())
}
