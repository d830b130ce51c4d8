//! Variational pairwise registration: gradient descent with backtracking
//! line search on the dense displacement field, minimizing
//! `(1 - SSIM(fixed, warp(moving, field))) + lambda * smoothness(field)`
//! over a coarse-to-fine pyramid.
//!
//! `register_pair` returns the raw pull field: `moved(p) = moving(p + field(p))`
//! reconstructs the fixed image. `register_sequence` negates that solution so
//! the stored sequence holds the tissue motion vector per grid point.

use crate::config::RegistrationConfig;
use crate::error::{Error, Result};
use crate::grid::{Grid, VectorGrid, MAX_DIM};
use crate::parallel::par_fill;
use crate::scalar::Scalar;
use crate::sequence::{DisplacementFieldSequence, ImageSequence};
use crate::ssim::{ssim, ssim_with_grad};

/// One accepted optimizer state: `(level, iteration, loss)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub level: usize,
    pub iteration: usize,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct RegistrationResult<S> {
    /// Pull field on the fixed grid, in grid-index units.
    pub field: VectorGrid<S>,
    pub final_loss: f64,
    /// Accepted-step losses, non-increasing within each level.
    pub loss_trace: Vec<LossRecord>,
    /// The moving image warped by `field`.
    pub moved: Grid<S>,
}

/// Loss trace per frame pair of a registered sequence.
pub type SequenceTraces = Vec<(usize, Vec<LossRecord>)>;

/// Diffusion regularizer: sum over grid points of the squared Frobenius
/// norm of the field Jacobian. Forward differences, with the last row along
/// each axis replicating its backward difference, so a unit-diagonal
/// Jacobian contributes exactly `d` per point.
pub fn smoothness<S: Scalar>(field: &VectorGrid<S>) -> f64 {
    let dims = field.dims().to_vec();
    let d = dims.len();
    let n = field.npoints();
    let data = field.data();
    let strides = point_strides(&dims);
    let mut acc = 0.0f64;
    let mut coords = [0usize; MAX_DIM];
    for p in 0..n {
        decode(p, &dims, &mut coords);
        for a in 0..d {
            let (q, r) = neighbor_pair(p, &coords, &dims, &strides, a);
            for c in 0..d {
                let diff = data[q * d + c].as_f64() - data[r * d + c].as_f64();
                acc += diff * diff;
            }
        }
    }
    acc
}

/// Gradient of [`smoothness`] with respect to every field component.
fn smoothness_grad(field: &VectorGrid<f64>, grad: &mut [f64]) {
    let dims = field.dims().to_vec();
    let d = dims.len();
    let n = field.npoints();
    let data = field.data();
    let strides = point_strides(&dims);
    for g in grad.iter_mut() {
        *g = 0.0;
    }
    let mut coords = [0usize; MAX_DIM];
    for p in 0..n {
        decode(p, &dims, &mut coords);
        for a in 0..d {
            let (q, r) = neighbor_pair(p, &coords, &dims, &strides, a);
            for c in 0..d {
                let diff = data[q * d + c] - data[r * d + c];
                grad[q * d + c] += 2.0 * diff;
                grad[r * d + c] -= 2.0 * diff;
            }
        }
    }
}

fn point_strides(dims: &[usize]) -> [usize; MAX_DIM] {
    let d = dims.len();
    let mut s = [0usize; MAX_DIM];
    let mut acc = 1usize;
    for a in (0..d).rev() {
        s[a] = acc;
        acc *= dims[a];
    }
    s
}

fn decode(mut idx: usize, dims: &[usize], out: &mut [usize; MAX_DIM]) {
    for a in (0..dims.len()).rev() {
        out[a] = idx % dims[a];
        idx /= dims[a];
    }
}

/// Difference pair for the Jacobian entry of point `p` along axis `a`:
/// `(forward neighbor, p)` in the interior, `(p, backward neighbor)` at the
/// far border, `(p, p)` when the axis has length 1.
#[inline]
fn neighbor_pair(
    p: usize,
    coords: &[usize; MAX_DIM],
    dims: &[usize],
    strides: &[usize; MAX_DIM],
    a: usize,
) -> (usize, usize) {
    if dims[a] == 1 {
        (p, p)
    } else if coords[a] + 1 < dims[a] {
        (p + strides[a], p)
    } else {
        (p, p - strides[a])
    }
}

/// Warps `moving` by the pull field: `out(p) = moving(p + field(p))`.
pub fn warp<S: Scalar>(moving: &Grid<S>, field: &VectorGrid<S>) -> Grid<S> {
    let dims = moving.dims().to_vec();
    let d = dims.len();
    let mut out = Grid::zeros(&dims);
    let field_data = field.data();
    par_fill(out.data_mut(), |p| {
        let mut coords = [0usize; MAX_DIM];
        decode(p, &dims, &mut coords);
        let mut pos = [0.0f64; MAX_DIM];
        for a in 0..d {
            pos[a] = coords[a] as f64 + field_data[p * d + a].as_f64();
        }
        S::of_f64(moving.sample(&pos))
    });
    out
}

/// Warps `moving` backward by a motion field: `out(p) = moving(p - motion(p))`.
/// This is the consistency transport for sequences storing motion vectors.
pub fn warp_by_motion<S: Scalar>(moving: &Grid<S>, motion: &VectorGrid<S>) -> Grid<S> {
    warp(moving, &motion.scaled(-1.0))
}

struct WarpEval {
    values: Grid<f64>,
    /// Spatial gradient of the moving image at the warped position, per
    /// point and axis: `d moved(p) / d field[p][a]`.
    grads: Vec<[f64; MAX_DIM]>,
}

fn warp_with_grad(moving: &Grid<f64>, field: &VectorGrid<f64>) -> WarpEval {
    let dims = moving.dims().to_vec();
    let d = dims.len();
    let field_data = field.data();
    let n = field.npoints();
    let mut cells: Vec<(f64, [f64; MAX_DIM])> = vec![(0.0, [0.0; MAX_DIM]); n];
    par_fill(&mut cells, |p| {
        let mut coords = [0usize; MAX_DIM];
        decode(p, &dims, &mut coords);
        let mut pos = [0.0f64; MAX_DIM];
        for a in 0..d {
            pos[a] = coords[a] as f64 + field_data[p * d + a];
        }
        moving.sample_with_grad(&pos)
    });
    let mut values = Grid::zeros(&dims);
    let mut grads = vec![[0.0f64; MAX_DIM]; n];
    for (p, (v, g)) in cells.into_iter().enumerate() {
        values.data_mut()[p] = v;
        grads[p] = g;
    }
    WarpEval { values, grads }
}

struct LevelProblem<'a> {
    moving: &'a Grid<f64>,
    fixed: &'a Grid<f64>,
    window: usize,
    range: f64,
    lambda: f64,
}

impl LevelProblem<'_> {
    fn loss(&self, field: &VectorGrid<f64>) -> Result<f64> {
        let moved = warp(self.moving, field);
        let sim = ssim(self.fixed, &moved, self.window, self.range)?;
        Ok((1.0 - sim) + self.lambda * smoothness(field))
    }

    fn loss_and_grad(&self, field: &VectorGrid<f64>) -> Result<(f64, Vec<f64>)> {
        let d = field.ndim();
        let n = field.npoints();
        let eval = warp_with_grad(self.moving, field);
        let (sim, sim_grad) = ssim_with_grad(self.fixed, &eval.values, self.window, self.range)?;
        let mut grad = vec![0.0f64; n * d];
        smoothness_grad(field, &mut grad);
        for g in grad.iter_mut() {
            *g *= self.lambda;
        }
        for p in 0..n {
            let gb = -sim_grad[p]; // d(1 - ssim)/d moved(p)
            for a in 0..d {
                grad[p * d + a] += gb * eval.grads[p][a];
            }
        }
        let value = (1.0 - sim) + self.lambda * smoothness(field);
        Ok((value, grad))
    }
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;
const GRAD_FLOOR: f64 = 1e-14;

/// Runs the optimizer at one pyramid level, appending accepted losses to the
/// trace. Warping uses the identical loss path as the line-search probes, so
/// the trace is non-increasing by construction.
fn solve_level(
    problem: &LevelProblem<'_>,
    mut field: VectorGrid<f64>,
    level: usize,
    cfg: &RegistrationConfig,
    trace: &mut Vec<LossRecord>,
) -> Result<VectorGrid<f64>> {
    let d = field.ndim();
    let n = field.npoints();
    let (mut loss, mut grad) = problem.loss_and_grad(&field)?;
    if !loss.is_finite() {
        return Err(Error::NumericalFailure {
            iteration: 0,
            detail: format!("non-finite initial loss at level {level}"),
        });
    }
    trace.push(LossRecord {
        level,
        iteration: 0,
        loss,
    });
    let mut step = cfg.step_size;
    for it in 1..=cfg.iterations_per_level {
        let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gmax < GRAD_FLOOR {
            break;
        }
        // Normalized steepest-descent direction: a step of s changes the
        // field by at most s grid units.
        let inv = 1.0 / gmax;
        let slope: f64 = grad.iter().map(|g| -(g * inv) * g).sum();
        let mut trial = (step * 2.0).min(1e4);
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let mut cand = field.clone();
            {
                let data = cand.data_mut();
                for i in 0..n * d {
                    data[i] -= trial * grad[i] * inv;
                }
            }
            let cand_loss = problem.loss(&cand)?;
            if !cand_loss.is_finite() {
                return Err(Error::NumericalFailure {
                    iteration: it,
                    detail: format!("non-finite loss during line search at level {level}"),
                });
            }
            if cand_loss <= loss + ARMIJO_C1 * trial * slope {
                field = cand;
                step = trial;
                let prev = loss;
                loss = cand_loss;
                accepted = true;
                trace.push(LossRecord {
                    level,
                    iteration: it,
                    loss,
                });
                if (prev - loss).abs() <= cfg.convergence_tol * prev.abs().max(1e-12) {
                    return Ok(field);
                }
                break;
            }
            trial *= 0.5;
        }
        if !accepted {
            break;
        }
        let refreshed = problem.loss_and_grad(&field)?;
        loss = refreshed.0;
        grad = refreshed.1;
    }
    Ok(field)
}

fn to_f64_grid<S: Scalar>(g: &Grid<S>) -> Grid<f64> {
    Grid::from_vec(g.dims(), g.data().iter().map(|v| v.as_f64()).collect()).expect("finite grid")
}

/// Pyramid depth is capped so the coarsest level keeps every axis at least
/// 8 points long (or the requested depth if smaller).
fn effective_levels(dims: &[usize], requested: usize) -> usize {
    let mut levels = 1usize;
    let mut min_dim = *dims.iter().min().expect("non-empty dims");
    while levels < requested && min_dim / 2 >= 8 {
        levels += 1;
        min_dim /= 2;
    }
    levels
}

/// Minimizes the composite loss for one image pair.
pub fn register_pair<S: Scalar>(
    moving: &Grid<S>,
    fixed: &Grid<S>,
    cfg: &RegistrationConfig,
    init: Option<&VectorGrid<S>>,
) -> Result<RegistrationResult<S>> {
    cfg.validate()?;
    if moving.dims() != fixed.dims() {
        return Err(Error::DimMismatch {
            expected: moving.dims().to_vec(),
            got: fixed.dims().to_vec(),
        });
    }
    let moving64 = to_f64_grid(moving);
    let fixed64 = to_f64_grid(fixed);
    let (lo_m, hi_m) = moving64.min_max();
    let (lo_f, hi_f) = fixed64.min_max();
    let range = (hi_m.max(hi_f) - lo_m.min(lo_f)).max(f64::EPSILON);

    let levels = effective_levels(moving.dims(), cfg.pyramid_levels);
    let mut pyr_moving = vec![moving64];
    let mut pyr_fixed = vec![fixed64];
    for l in 1..levels {
        pyr_moving.push(pyr_moving[l - 1].restrict());
        pyr_fixed.push(pyr_fixed[l - 1].restrict());
    }

    let coarsest = levels - 1;
    let mut field: VectorGrid<f64> = match init {
        Some(f0) => {
            if f0.dims() != moving.dims() {
                return Err(Error::DimMismatch {
                    expected: moving.dims().to_vec(),
                    got: f0.dims().to_vec(),
                });
            }
            let f64_init = VectorGrid::from_vec(
                f0.dims(),
                f0.data().iter().map(|v| v.as_f64()).collect(),
            )?;
            let scale = 1.0 / (1usize << coarsest) as f64;
            f64_init.resize_scaled(pyr_moving[coarsest].dims(), scale)
        }
        None => VectorGrid::zeros(pyr_moving[coarsest].dims()),
    };
    if init.is_some() {
        // A warm start is a bad guess whenever the motion reverses between
        // pairs; keep it only if it actually beats the zero field.
        let problem = LevelProblem {
            moving: &pyr_moving[coarsest],
            fixed: &pyr_fixed[coarsest],
            window: cfg.ssim_window,
            range,
            lambda: cfg.lambda_smooth,
        };
        let zero = VectorGrid::zeros(pyr_moving[coarsest].dims());
        if problem.loss(&zero)? <= problem.loss(&field)? {
            field = zero;
        }
    }

    let mut trace = Vec::new();
    for level in (0..levels).rev() {
        let problem = LevelProblem {
            moving: &pyr_moving[level],
            fixed: &pyr_fixed[level],
            window: cfg.ssim_window,
            range,
            lambda: cfg.lambda_smooth,
        };
        field = solve_level(&problem, field, level, cfg, &mut trace)?;
        if level > 0 {
            field = field.resize_scaled(pyr_moving[level - 1].dims(), 2.0);
        }
    }

    let final_loss = trace.last().map(|r| r.loss).unwrap_or(f64::NAN);
    let field_s = VectorGrid::from_vec(
        field.dims(),
        field.data().iter().map(|&v| S::of_f64(v)).collect(),
    )?;
    let moved = warp(moving, &field_s);
    Ok(RegistrationResult {
        field: field_s,
        final_loss,
        loss_trace: trace,
        moved,
    })
}

/// Registers every sequential pair `(I_t, I_{t+1 mod T})` and returns the
/// motion-vector fields (the negated pull solutions) plus each pair's loss
/// trace. When warm-starting is enabled each pair starts from the previous
/// pair's solution; otherwise the pairs are independent and evaluated in
/// parallel, with identical output either way for a fixed config.
pub fn register_sequence_with_traces<S: Scalar>(
    seq: &ImageSequence<S>,
    cfg: &RegistrationConfig,
) -> Result<(DisplacementFieldSequence<S>, SequenceTraces)> {
    let t = seq.len();
    let results: Vec<(VectorGrid<S>, Vec<LossRecord>)> = if cfg.warm_start {
        let mut pairs = Vec::with_capacity(t);
        let mut prev: Option<VectorGrid<S>> = None;
        for i in 0..t {
            let res = register_pair(seq.frame(i), seq.frame((i + 1) % t), cfg, prev.as_ref())
                .map_err(|e| Error::FramePair {
                    frame: i,
                    source: Box::new(e),
                })?;
            prev = Some(res.field.clone());
            pairs.push((res.field, res.loss_trace));
        }
        pairs
    } else {
        use rayon::prelude::*;
        let pairs: Vec<Result<(VectorGrid<S>, Vec<LossRecord>)>> = (0..t)
            .into_par_iter()
            .map(|i| {
                register_pair(seq.frame(i), seq.frame((i + 1) % t), cfg, None)
                    .map(|r| (r.field, r.loss_trace))
                    .map_err(|e| Error::FramePair {
                        frame: i,
                        source: Box::new(e),
                    })
            })
            .collect();
        pairs.into_iter().collect::<Result<Vec<_>>>()?
    };
    let mut motion = Vec::with_capacity(t);
    let mut traces = Vec::with_capacity(t);
    for (i, (field, trace)) in results.into_iter().enumerate() {
        motion.push(field.scaled(-1.0));
        traces.push((i, trace));
    }
    Ok((
        DisplacementFieldSequence::new(motion, seq.spacing().to_vec())?,
        traces,
    ))
}

/// [`register_sequence_with_traces`] without the traces.
pub fn register_sequence<S: Scalar>(
    seq: &ImageSequence<S>,
    cfg: &RegistrationConfig,
) -> Result<DisplacementFieldSequence<S>> {
    register_sequence_with_traces(seq, cfg).map(|(fields, _)| fields)
}

/// Renders loss records as `iteration,level,loss` CSV.
pub fn loss_trace_csv(records: &[LossRecord]) -> String {
    let mut out = String::from("iteration,level,loss\n");
    for r in records {
        out.push_str(&format!("{},{},{}\n", r.iteration, r.level, r.loss));
    }
    out
}
