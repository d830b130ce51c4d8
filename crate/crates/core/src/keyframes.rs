//! Rule-based keyframe detection on the motion descriptor curve, the cyclic
//! frame difference metric, and batch evaluation.
//!
//! Detection anchors on the global minimum (MS) and resolves the remaining
//! four keyframes by forward scans over the cyclic curve: ES is the last
//! upward zero crossing before the first local maximum after MS, PF that
//! first maximum, ED the last downward crossing before returning to MS, and
//! MD the last interior maximum between PF and ED. Absent features degrade
//! to deterministic fallbacks flagged in the per-keyframe status.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeyframeStatus {
    Detected,
    Fallback,
    Missing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Keyframe {
    pub index: usize,
    pub status: KeyframeStatus,
}

impl Keyframe {
    fn detected(index: usize) -> Keyframe {
        Keyframe {
            index,
            status: KeyframeStatus::Detected,
        }
    }

    fn fallback(index: usize) -> Keyframe {
        Keyframe {
            index,
            status: KeyframeStatus::Fallback,
        }
    }
}

/// The five detected keyframes of one cine cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyframeSet {
    /// Sequence length the indices refer to.
    pub t: usize,
    pub ed: Keyframe,
    pub ms: Keyframe,
    pub es: Keyframe,
    pub pf: Keyframe,
    pub md: Keyframe,
}

pub const KEYFRAME_NAMES: [&str; 5] = ["ED", "MS", "ES", "PF", "MD"];

impl KeyframeSet {
    pub fn entries(&self) -> [(&'static str, Keyframe); 5] {
        [
            ("ED", self.ed),
            ("MS", self.ms),
            ("ES", self.es),
            ("PF", self.pf),
            ("MD", self.md),
        ]
    }

    /// Checks the cyclic order MS -> ES -> PF -> MD -> ED when every
    /// keyframe is detected; trivially true otherwise.
    pub fn cyclic_order_holds(&self) -> bool {
        let all_detected = self
            .entries()
            .iter()
            .all(|(_, k)| k.status == KeyframeStatus::Detected);
        if !all_detected {
            return true;
        }
        let t = self.t as i64;
        let offs = |i: usize| ((i as i64 - self.ms.index as i64).rem_euclid(t)) as u64;
        let seq = [
            offs(self.es.index),
            offs(self.pf.index),
            offs(self.md.index),
            offs(self.ed.index),
        ];
        seq.windows(2).all(|w| w[0] <= w[1])
    }
}

fn cyclic_offset(from: usize, to: usize, t: usize) -> usize {
    ((to as i64 - from as i64).rem_euclid(t as i64)) as usize
}

/// Local maxima of a cyclic curve: positions where the last non-flat slope
/// before them rises and the next non-flat slope falls. Plateaus report
/// their midpoint. Constant curves have no extrema.
fn cyclic_local_maxima(a: &[f64]) -> Vec<usize> {
    let t = a.len();
    let mut sgn = Vec::with_capacity(t);
    for i in 0..t {
        let d = a[(i + 1) % t] - a[i];
        sgn.push(if d > 0.0 {
            1i8
        } else if d < 0.0 {
            -1i8
        } else {
            0i8
        });
    }
    let nonzero: Vec<usize> = (0..t).filter(|&i| sgn[i] != 0).collect();
    if nonzero.is_empty() {
        return Vec::new();
    }
    let mut maxima = Vec::new();
    let m = nonzero.len();
    for k in 0..m {
        let i = nonzero[k];
        let j = nonzero[(k + 1) % m];
        if sgn[i] == 1 && sgn[j] == -1 {
            // rise ends entering i+1, fall starts leaving j: plateau [i+1, j]
            let start = (i + 1) % t;
            let len = cyclic_offset(start, j, t);
            maxima.push((start + len / 2) % t);
        }
    }
    maxima.sort_unstable();
    maxima
}

/// Upward zero crossing inside the pair `(i, i+1)`: negative to
/// non-negative. Returns the cyclic fractional position of the
/// linear-interpolated zero.
fn upward_crossing(a: &[f64], i: usize) -> Option<f64> {
    let t = a.len();
    let (u, v) = (a[i], a[(i + 1) % t]);
    if u < 0.0 && v >= 0.0 {
        Some(i as f64 + u / (u - v))
    } else {
        None
    }
}

/// Downward zero crossing inside the pair `(i, i+1)`: non-negative to
/// negative.
fn downward_crossing(a: &[f64], i: usize) -> Option<f64> {
    let t = a.len();
    let (u, v) = (a[i], a[(i + 1) % t]);
    if u >= 0.0 && v < 0.0 {
        Some(i as f64 + u / (u - v))
    } else {
        None
    }
}

fn round_cyclic(pos: f64, t: usize) -> usize {
    ((pos + 0.5).floor() as i64).rem_euclid(t as i64) as usize
}

/// Detects the five keyframes from a (smoothed) descriptor curve.
pub fn detect_keyframes<S: Scalar>(alpha: &[S]) -> Result<KeyframeSet> {
    let t = alpha.len();
    if t < 5 {
        return Err(Error::invalid(format!(
            "keyframe detection needs at least 5 frames, got {t}"
        )));
    }
    let a: Vec<f64> = alpha.iter().map(|v| v.as_f64()).collect();
    if !a.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("descriptor curve"));
    }

    // MS: global minimum, earliest index on ties.
    let mut ms = 0usize;
    for (i, &v) in a.iter().enumerate() {
        if v < a[ms] {
            ms = i;
        }
    }
    let ms_kf = Keyframe::detected(ms);

    let maxima = cyclic_local_maxima(&a);
    let first_max_after = |from: usize| -> Option<usize> {
        maxima
            .iter()
            .copied()
            .filter(|&p| p != from)
            .min_by_key(|&p| cyclic_offset(from, p, t))
    };

    // ES: last upward crossing between MS and the first subsequent maximum.
    let es_limit = first_max_after(ms).map(|p| cyclic_offset(ms, p, t));
    let es_kf = {
        let lim = es_limit.unwrap_or(0);
        let mut found: Option<f64> = None;
        for k in 0..lim {
            if let Some(pos) = upward_crossing(&a, (ms + k) % t) {
                found = Some(pos);
            }
        }
        match found {
            Some(pos) => Keyframe::detected(round_cyclic(pos, t)),
            None => {
                // steepest rise after MS
                let mut best = (ms + 1) % t;
                let mut best_slope = f64::NEG_INFINITY;
                for k in 1..t {
                    let i = (ms + k) % t;
                    let slope = (a[(i + 1) % t] - a[(i + t - 1) % t]) / 2.0;
                    if slope > best_slope {
                        best_slope = slope;
                        best = i;
                    }
                }
                Keyframe::fallback(best)
            }
        }
    };

    // PF: first local maximum scanned forward from ES.
    let pf_kf = match first_max_after(es_kf.index) {
        Some(p) => {
            if es_kf.status == KeyframeStatus::Detected {
                Keyframe::detected(p)
            } else {
                Keyframe::fallback(p)
            }
        }
        None => {
            // no extrema at all: fall back to the global maximum
            let mut best = 0usize;
            for (i, &v) in a.iter().enumerate() {
                if v > a[best] {
                    best = i;
                }
            }
            Keyframe::fallback(best)
        }
    };
    let pf = pf_kf.index;

    // ED: last downward crossing between PF and MS.
    let ed_kf = {
        let lim = cyclic_offset(pf, ms, t);
        let mut found: Option<f64> = None;
        for k in 0..lim {
            if let Some(pos) = downward_crossing(&a, (pf + k) % t) {
                found = Some(pos);
            }
        }
        match found {
            Some(pos) => Keyframe::detected(round_cyclic(pos, t)),
            None => {
                // highest point strictly between PF and MS
                let mut best: Option<usize> = None;
                for k in 1..lim.max(1) {
                    let i = (pf + k) % t;
                    if best.is_none_or(|b| a[i] > a[b]) {
                        best = Some(i);
                    }
                }
                Keyframe::fallback(best.unwrap_or(pf))
            }
        }
    };

    // MD: last local maximum strictly inside (PF, ED).
    let md_kf = {
        let span = cyclic_offset(pf, ed_kf.index, t);
        let interior: Vec<usize> = maxima
            .iter()
            .copied()
            .filter(|&p| {
                let off = cyclic_offset(pf, p, t);
                off > 0 && off < span
            })
            .collect();
        match interior.iter().max_by_key(|&&p| cyclic_offset(pf, p, t)) {
            Some(&p) => Keyframe::detected(p),
            None => Keyframe::fallback(pf),
        }
    };

    Ok(KeyframeSet {
        t,
        ed: ed_kf,
        ms: ms_kf,
        es: es_kf,
        pf: pf_kf,
        md: md_kf,
    })
}

/// Cyclic frame difference between a reference and a predicted index.
pub fn cfd(p: usize, p_hat: usize, t: usize) -> Result<usize> {
    if p >= t || p_hat >= t {
        return Err(Error::invalid(format!(
            "indices ({p}, {p_hat}) must be below T = {t}"
        )));
    }
    let direct = p.abs_diff(p_hat);
    let wrapped = t - p.max(p_hat) + p.min(p_hat);
    Ok(direct.min(wrapped))
}

/// One evaluated keyframe of one case.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub case_id: String,
    pub keyframe: &'static str,
    pub reference: usize,
    pub prediction: usize,
    pub cfd: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyframeAggregate {
    pub keyframe: &'static str,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

/// Per-case rows plus per-keyframe and pooled aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub rows: Vec<EvalRow>,
    /// One entry per keyframe name; `None` when the reference never carries it.
    pub per_keyframe: Vec<Option<KeyframeAggregate>>,
    pub pooled: KeyframeAggregate,
}

fn moments(values: &[usize]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = values
        .iter()
        .map(|&v| {
            let d = v as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    (mean, var.sqrt())
}

/// Scores predictions against references, skipping keyframes the reference
/// marks missing. Case ids default to the list position.
pub fn evaluate(
    predictions: &[KeyframeSet],
    references: &[KeyframeSet],
    case_ids: Option<&[String]>,
) -> Result<Evaluation> {
    if predictions.len() != references.len() {
        return Err(Error::invalid(format!(
            "{} predictions against {} references",
            predictions.len(),
            references.len()
        )));
    }
    if let Some(ids) = case_ids {
        if ids.len() != predictions.len() {
            return Err(Error::invalid("case id count mismatch".to_string()));
        }
    }
    let mut rows = Vec::new();
    let mut per_kf: Vec<Vec<usize>> = vec![Vec::new(); 5];
    for (i, (pred, rf)) in predictions.iter().zip(references).enumerate() {
        if pred.t != rf.t {
            return Err(Error::invalid(format!(
                "case {i}: prediction T = {} but reference T = {}",
                pred.t, rf.t
            )));
        }
        let case_id = case_ids
            .map(|ids| ids[i].clone())
            .unwrap_or_else(|| format!("case{i}"));
        for (k, ((name, pk), (_, rk))) in pred.entries().iter().zip(rf.entries().iter()).enumerate()
        {
            if rk.status == KeyframeStatus::Missing {
                continue;
            }
            let d = cfd(rk.index, pk.index, rf.t)?;
            per_kf[k].push(d);
            rows.push(EvalRow {
                case_id: case_id.clone(),
                keyframe: name,
                reference: rk.index,
                prediction: pk.index,
                cfd: d,
            });
        }
    }
    let per_keyframe: Vec<Option<KeyframeAggregate>> = per_kf
        .iter()
        .enumerate()
        .map(|(k, vals)| {
            if vals.is_empty() {
                None
            } else {
                let (mean, sd) = moments(vals);
                Some(KeyframeAggregate {
                    keyframe: KEYFRAME_NAMES[k],
                    n: vals.len(),
                    mean,
                    sd,
                })
            }
        })
        .collect();
    let all: Vec<usize> = per_kf.iter().flatten().copied().collect();
    let (mean, sd) = moments(&all);
    Ok(Evaluation {
        rows,
        per_keyframe,
        pooled: KeyframeAggregate {
            keyframe: "all",
            n: all.len(),
            mean,
            sd,
        },
    })
}

impl Evaluation {
    /// Per-case rows followed by an aggregate block.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("case_id,keyframe,reference,prediction,cfd\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.case_id, r.keyframe, r.reference, r.prediction, r.cfd
            ));
        }
        out.push_str("# aggregate\nkeyframe,n,mean_cfd,sd_cfd\n");
        for agg in self.per_keyframe.iter().flatten() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                agg.keyframe, agg.n, agg.mean, agg.sd
            ));
        }
        out.push_str(&format!(
            "{},{},{},{}\n",
            self.pooled.keyframe, self.pooled.n, self.pooled.mean, self.pooled.sd
        ));
        out
    }
}

// Wire format for keyframe JSON files.

#[derive(Debug, Serialize, Deserialize)]
struct KeyframesByName {
    #[serde(rename = "ED")]
    ed: Keyframe,
    #[serde(rename = "MS")]
    ms: Keyframe,
    #[serde(rename = "ES")]
    es: Keyframe,
    #[serde(rename = "PF")]
    pf: Keyframe,
    #[serde(rename = "MD")]
    md: Keyframe,
}

/// Serializable form of a [`KeyframeSet`]:
/// `{"T": n, "keyframes": {"ED": {"index": i, "status": "detected"}, ...}}`.
#[derive(Debug, Serialize, Deserialize)]
pub struct KeyframeSetWire {
    #[serde(rename = "T")]
    t: usize,
    keyframes: KeyframesByName,
}

impl From<&KeyframeSet> for KeyframeSetWire {
    fn from(set: &KeyframeSet) -> Self {
        KeyframeSetWire {
            t: set.t,
            keyframes: KeyframesByName {
                ed: set.ed,
                ms: set.ms,
                es: set.es,
                pf: set.pf,
                md: set.md,
            },
        }
    }
}

impl From<KeyframeSetWire> for KeyframeSet {
    fn from(wire: KeyframeSetWire) -> Self {
        KeyframeSet {
            t: wire.t,
            ed: wire.keyframes.ed,
            ms: wire.keyframes.ms,
            es: wire.keyframes.es,
            pf: wire.keyframes.pf,
            md: wire.keyframes.md,
        }
    }
}
