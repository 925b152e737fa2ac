//! The stochastic iterative j-slice matching scheme
//!
//!   σ_{k+1} = ((1−γ_k) id + γ_k T^j_{σ_k,μ;P_k})♯ σ_k,
//!
//! with i.i.d. Haar frames P_k and a step-size schedule γ_k. Runs record a
//! per-iteration trajectory (losses, frames, SW₂ diagnostics) and are
//! bit-reproducible from their seeds. The consecutive-iterates identity
//! W₂²(σ_{k+1}, σ_k) = γ_k² Σ_{i≤j} W₂²(σ_k^{θ_i}, μ^{θ_i}) is exposed as a
//! replayable runtime check.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matching::SliceMatchingMap;
use crate::measure::DiscreteMeasure;
use crate::oracle;
use crate::slicing::{sw2, DirectionSampler, Estimate, OrthogonalFrame};

/// Step-size sequence γ_k. The inverse-k and log-over-k families are defined
/// for k ≥ 1; index 0 is pinned to γ_0 = 1 for them, and [`run`] feeds
/// iteration k (1-based) the schedule index k, so the first step is a full
/// one.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    kind: ScheduleKind,
}

#[derive(Debug, Clone, PartialEq)]
enum ScheduleKind {
    InverseK,
    LogOverK,
    Constant(f64),
    Custom(Vec<f64>),
}

impl Schedule {
    /// γ_k = 1/k for k ≥ 1.
    pub fn inverse_k() -> Self {
        Self {
            kind: ScheduleKind::InverseK,
        }
    }

    /// γ_k = (1 + log₂ k)/k for k ≥ 1.
    pub fn log_over_k() -> Self {
        Self {
            kind: ScheduleKind::LogOverK,
        }
    }

    /// Constant γ_k = c. Not square-summable, so not A2-compliant; the
    /// convergence guarantees exclude it (c = 1 is the original
    /// full-step scheme).
    pub fn constant(c: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::GammaOutOfRange(c));
        }
        Ok(Self {
            kind: ScheduleKind::Constant(c),
        })
    }

    /// Explicit values indexed by step index k; errs once exhausted.
    pub fn custom(values: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::GammaOutOfRange(bad));
        }
        Ok(Self {
            kind: ScheduleKind::Custom(values),
        })
    }

    /// γ_k, clamped to [0, 1].
    pub fn gamma(&self, k: usize) -> Result<f64> {
        let g = match &self.kind {
            ScheduleKind::InverseK => {
                if k == 0 {
                    1.0
                } else {
                    1.0 / k as f64
                }
            }
            ScheduleKind::LogOverK => {
                if k == 0 {
                    1.0
                } else {
                    (1.0 + (k as f64).log2()) / k as f64
                }
            }
            ScheduleKind::Constant(c) => *c,
            ScheduleKind::Custom(values) => *values.get(k).ok_or(Error::ScheduleExhausted(k))?,
        };
        Ok(g.clamp(0.0, 1.0))
    }

    /// Whether the sequence satisfies Σγ_k = ∞ and Σγ_k² < ∞. True for the
    /// inverse-k and log-over-k families; false for constant and custom
    /// (finite lists cannot witness the condition).
    pub fn a2_compliant(&self) -> bool {
        matches!(self.kind, ScheduleKind::InverseK | ScheduleKind::LogOverK)
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            ScheduleKind::InverseK => "inverse-k",
            ScheduleKind::LogOverK => "log-over-k",
            ScheduleKind::Constant(_) => "constant",
            ScheduleKind::Custom(_) => "custom-list",
        }
    }

    pub fn parameter(&self) -> Option<f64> {
        match self.kind {
            ScheduleKind::Constant(c) => Some(c),
            _ => None,
        }
    }
}

/// One iteration: every atom moves to (1−γ)x + γT^j(x). Returns the next
/// measure and the slice-loss sum Σ_{i≤j} W₂²(σ^{θ_i}, μ^{θ_i}) of the
/// current one.
pub fn step(
    current: &DiscreteMeasure,
    target: &DiscreteMeasure,
    frame: &OrthogonalFrame,
    j: usize,
    gamma: f64,
) -> Result<(DiscreteMeasure, f64)> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::GammaOutOfRange(gamma));
    }
    let map = SliceMatchingMap::build(current, target, frame, j)?;
    let loss = map.slice_loss_sum();
    let dim = current.dim();
    let mut coords = Vec::with_capacity(current.len() * dim);
    for a in 0..current.len() {
        coords.extend_from_slice(&map.apply_atom_partial(a, gamma));
    }
    let next =
        DiscreteMeasure::from_normalized_parts(dim, coords, current.weights().to_vec());
    Ok((next, loss))
}

/// Per-run diagnostic configuration. `sw2_directions = 0` skips the SW₂
/// estimates entirely; the estimator uses its own seed so its noise never
/// couples to the optimization path.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub sw2_directions: usize,
    pub sw2_seed: u64,
    /// retain every σ_k so identities can be replayed after the fact
    pub retain_measures: bool,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Self {
            sw2_directions: 2000,
            sw2_seed: 1,
            retain_measures: false,
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone)]
pub struct RunSnapshot {
    pub n: usize,
    pub j: usize,
    pub iterations: usize,
    pub schedule: String,
    pub schedule_parameter: Option<f64>,
    pub frame_sampler: String,
    pub frame_seed: Option<u64>,
    pub sw2_directions: usize,
    pub sw2_seed: u64,
}

/// One recorded iteration. `slice_loss_sum` is measured at σ_{k−1} against
/// the frame used for the step; `sw2` is the estimate for the resulting σ_k.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub k: usize,
    pub gamma: f64,
    pub frame: OrthogonalFrame,
    pub slice_loss_sum: f64,
    /// γ_k² · slice_loss_sum, the squared step length of the iteration
    pub consecutive_cost: f64,
    pub sw2: Option<Estimate>,
    pub measure: Option<DiscreteMeasure>,
}

/// Full record of a run: initial diagnostics, per-step records, and the
/// final measure.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshot: RunSnapshot,
    pub initial_sw2: Option<Estimate>,
    pub initial: Option<DiscreteMeasure>,
    pub steps: Vec<StepRecord>,
    pub final_measure: DiscreteMeasure,
}

impl Trajectory {
    /// σ_k for k in 0..=K; requires the run to have retained measures.
    pub fn measure_at(&self, k: usize) -> Result<&DiscreteMeasure> {
        if k > self.steps.len() {
            return Err(Error::StepIndexOutOfRange {
                k,
                max: self.steps.len(),
            });
        }
        if k == 0 {
            self.initial.as_ref().ok_or(Error::MeasuresNotRetained)
        } else {
            self.steps[k - 1]
                .measure
                .as_ref()
                .ok_or(Error::MeasuresNotRetained)
        }
    }

    /// CSV export: header plus one row per iteration; row k = 0 carries the
    /// initial state.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,gamma,slice_loss_sum,consecutive_cost,sw2_estimate,sw2_stderr\n");
        let fmt_sw2 = |e: &Option<Estimate>| match e {
            Some(e) => format!("{:.12e},{:.12e}", e.value, e.stderr),
            None => String::from(","),
        };
        let _ = writeln!(out, "0,0,0,0,{}", fmt_sw2(&self.initial_sw2));
        for s in &self.steps {
            let _ = writeln!(
                out,
                "{},{:.12e},{:.12e},{:.12e},{}",
                s.k,
                s.gamma,
                s.slice_loss_sum,
                s.consecutive_cost,
                fmt_sw2(&s.sw2)
            );
        }
        out
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        Ok(std::fs::write(path, self.to_csv())?)
    }
}

/// Runs K iterations of the scheme with freshly sampled frames.
pub fn run(
    initial: &DiscreteMeasure,
    target: &DiscreteMeasure,
    j: usize,
    schedule: &Schedule,
    sampler: &mut DirectionSampler,
    iterations: usize,
    diagnostics: &Diagnostics,
) -> Result<Trajectory> {
    let n = initial.dim();
    if target.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: target.dim(),
        });
    }
    if j == 0 || j > n {
        return Err(Error::SliceCountOutOfRange { j, n });
    }
    if iterations == 0 {
        return Err(Error::ZeroIterations);
    }

    let mut diag_sampler = DirectionSampler::uniform_sphere(diagnostics.sw2_seed);
    let mut estimate = |m: &DiscreteMeasure| -> Result<Option<Estimate>> {
        if diagnostics.sw2_directions == 0 {
            Ok(None)
        } else {
            Ok(Some(sw2(
                m,
                target,
                &mut diag_sampler,
                diagnostics.sw2_directions,
            )?))
        }
    };

    let snapshot = RunSnapshot {
        n,
        j,
        iterations,
        schedule: schedule.kind_name().to_string(),
        schedule_parameter: schedule.parameter(),
        frame_sampler: sampler.kind_name().to_string(),
        frame_seed: sampler.seed(),
        sw2_directions: diagnostics.sw2_directions,
        sw2_seed: diagnostics.sw2_seed,
    };

    let initial_sw2 = estimate(initial)?;
    let mut current = initial.clone();
    let mut steps = Vec::with_capacity(iterations);
    for k in 1..=iterations {
        let gamma = schedule.gamma(k)?;
        let frame = sampler.sample_haar(n)?;
        let (next, slice_loss_sum) = step(&current, target, &frame, j, gamma)?;
        let sw2_k = estimate(&next)?;
        steps.push(StepRecord {
            k,
            gamma,
            frame,
            slice_loss_sum,
            consecutive_cost: gamma * gamma * slice_loss_sum,
            sw2: sw2_k,
            measure: diagnostics.retain_measures.then(|| next.clone()),
        });
        current = next;
    }
    Ok(Trajectory {
        snapshot,
        initial_sw2,
        initial: diagnostics.retain_measures.then(|| initial.clone()),
        steps,
        final_measure: current,
    })
}

/// Residuals of the consecutive-iterates identity at step k.
#[derive(Debug, Clone)]
pub struct ConsecutiveReport {
    pub k: usize,
    /// Σ_i w_i ‖x_i^{k} − x_i^{k−1}‖², the cost of the induced coupling
    pub displacement_cost: f64,
    /// γ_k² · Σ_{i≤j} W₂²(σ_{k−1}^{θ_i}, μ^{θ_i})
    pub gamma_sq_loss: f64,
    /// relative gap between the two (0 when both vanish)
    pub identity_residual: f64,
    /// exact W₂²(σ_k, σ_{k−1}) when the oracle was requested
    pub oracle_w2_sq: Option<f64>,
    /// relative gap between the oracle value and the displacement cost
    pub oracle_residual: Option<f64>,
}

fn relative_gap(a: f64, b: f64) -> f64 {
    let denom = a.abs().max(b.abs());
    if denom == 0.0 {
        0.0
    } else {
        (a - b).abs() / denom
    }
}

/// Verifies W₂²(σ_k, σ_{k−1}) = γ_k² Σ_{i≤j} W₂²(σ_{k−1}^{θ_i}, μ^{θ_i}) on a
/// recorded trajectory. The displacement cost of the induced coupling must
/// match γ²·loss to rounding; with `with_oracle` the exact solver additionally
/// confirms the induced coupling is optimal (small instances only).
pub fn check_consecutive_identity(
    trajectory: &Trajectory,
    k: usize,
    with_oracle: bool,
) -> Result<ConsecutiveReport> {
    if k == 0 || k > trajectory.steps.len() {
        return Err(Error::StepIndexOutOfRange {
            k,
            max: trajectory.steps.len(),
        });
    }
    let before = trajectory.measure_at(k - 1)?;
    let after = trajectory.measure_at(k)?;
    let record = &trajectory.steps[k - 1];
    let displacement_cost: f64 = before
        .points()
        .zip(after.points())
        .zip(before.weights())
        .map(|((x, y), w)| {
            w * x
                .iter()
                .zip(y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum();
    let gamma_sq_loss = record.consecutive_cost;
    let (oracle_w2_sq, oracle_residual) = if with_oracle {
        let (w2, _) = oracle::w2_exact(before, after)?;
        let w2_sq = w2 * w2;
        (Some(w2_sq), Some(relative_gap(w2_sq, displacement_cost)))
    } else {
        (None, None)
    };
    Ok(ConsecutiveReport {
        k,
        displacement_cost,
        gamma_sq_loss,
        identity_residual: relative_gap(displacement_cost, gamma_sq_loss),
        oracle_w2_sq,
        oracle_residual,
    })
}
