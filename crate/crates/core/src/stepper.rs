//! Linearly implicit time stepping with adaptive step control.
//!
//! One step freezes the mobility at the current state and solves
//!
//! ```text
//! (I − dt B(u^k) L) u^{k+1} = u^k        (B(u) = −M⁻¹K_F(u), L = M⁻¹K)
//! ```
//!
//! with a sparse LU factorization. Because `1ᵀ M B = 0`, the discrete mass
//! is preserved up to the linear-solve residual, and testing the step with
//! `K u^{k+1}` shows the discrete energy cannot grow.

use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use faer::prelude::Solve;
use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, DiagnosticsRecord};
use crate::error::{Error, SolverError};
use crate::grid::GraphGrid;
use crate::operators::{self, FaceAverage, Mobility};

/// When snapshots are emitted during a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SnapshotCadence {
    /// Every `k` accepted steps.
    Steps(usize),
    /// Every `Δt` of simulated time.
    Time(f64),
}

impl Default for SnapshotCadence {
    fn default() -> Self {
        SnapshotCadence::Steps(100)
    }
}

fn d_n() -> f64 {
    1.0
}
fn d_eps() -> f64 {
    1e-6
}
fn d_theta() -> f64 {
    0.25
}
fn d_dt_init() -> f64 {
    1e-7
}
fn d_dt_min() -> f64 {
    1e-14
}
fn d_dt_max() -> f64 {
    0.5
}
fn d_adapt_target() -> f64 {
    1e-3
}
fn d_linear_tol() -> f64 {
    1e-12
}
fn d_t_end() -> f64 {
    100.0
}
fn d_steady_tol() -> f64 {
    1e-3
}
fn d_negativity_slack() -> f64 {
    1e-12
}
fn d_entropy_base() -> f64 {
    1.0
}
fn d_max_steps() -> usize {
    1_000_000
}
fn d_true() -> bool {
    true
}

/// Solver parameters. Every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Mobility exponent `n`.
    #[serde(default = "d_n")]
    pub n: f64,
    /// Regularization `ε` of the mobility.
    #[serde(default = "d_eps")]
    pub eps: f64,
    /// Initial lift exponent: `u0 + ε^θ` when `ε > 0`.
    #[serde(default = "d_theta")]
    pub theta: f64,
    /// Admit `0 ≤ n < 1`.
    #[serde(default)]
    pub allow_small_exponent: bool,
    #[serde(default)]
    pub avg: FaceAverage,
    #[serde(default = "d_dt_init")]
    pub dt_init: f64,
    #[serde(default = "d_dt_min")]
    pub dt_min: f64,
    #[serde(default = "d_dt_max")]
    pub dt_max: f64,
    /// Target relative change of `u` per step.
    #[serde(default = "d_adapt_target")]
    pub adapt_target: f64,
    #[serde(default = "d_negativity_slack")]
    pub negativity_slack: f64,
    /// Relative residual of the inner linear solve.
    #[serde(default = "d_linear_tol")]
    pub linear_tol: f64,
    #[serde(default = "d_t_end")]
    pub t_end: f64,
    #[serde(default = "d_steady_tol")]
    pub steady_tol: f64,
    #[serde(default = "d_true")]
    pub stop_on_steady: bool,
    /// Base point `A` of the entropy density.
    #[serde(default = "d_entropy_base")]
    pub entropy_base: f64,
    #[serde(default = "d_max_steps")]
    pub max_steps: usize,
    #[serde(default)]
    pub snapshot: SnapshotCadence,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            n: d_n(),
            eps: d_eps(),
            theta: d_theta(),
            allow_small_exponent: false,
            avg: FaceAverage::default(),
            dt_init: d_dt_init(),
            dt_min: d_dt_min(),
            dt_max: d_dt_max(),
            adapt_target: d_adapt_target(),
            negativity_slack: d_negativity_slack(),
            linear_tol: d_linear_tol(),
            t_end: d_t_end(),
            steady_tol: d_steady_tol(),
            stop_on_steady: true,
            entropy_base: d_entropy_base(),
            max_steps: d_max_steps(),
            snapshot: SnapshotCadence::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::Config(m.to_string()));
        if !(0.0 < self.dt_min && self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return bad("require 0 < dt_min <= dt_init <= dt_max");
        }
        if !(self.theta > 0.0 && self.theta < 0.5) {
            return bad("theta must lie in (0, 0.5)");
        }
        if !(self.linear_tol > 0.0 && self.linear_tol <= 1e-10) {
            return bad("linear_tol must lie in (0, 1e-10]");
        }
        if !(self.adapt_target > 0.0) {
            return bad("adapt_target must be positive");
        }
        if !(self.steady_tol > 0.0) {
            return bad("steady_tol must be positive");
        }
        if !(self.t_end > 0.0) {
            return bad("t_end must be positive");
        }
        if !(self.negativity_slack >= 0.0) {
            return bad("negativity_slack must be nonnegative");
        }
        if !(self.entropy_base > 0.0) {
            return bad("entropy_base must be positive");
        }
        if let SnapshotCadence::Steps(0) = self.snapshot {
            return bad("snapshot step cadence must be at least 1");
        }
        if let SnapshotCadence::Time(dt) = self.snapshot {
            if !(dt > 0.0) {
                return bad("snapshot time cadence must be positive");
            }
        }
        self.mobility()?;
        Ok(())
    }

    pub fn mobility(&self) -> Result<Mobility, SolverError> {
        Ok(Mobility::new(
            self.n,
            self.eps,
            self.avg,
            self.allow_small_exponent,
        )?)
    }

    /// `ε^θ` added to the initial data, zero when `ε = 0`.
    pub fn initial_lift(&self) -> f64 {
        if self.eps > 0.0 {
            self.eps.powf(self.theta)
        } else {
            0.0
        }
    }
}

/// Film heights over the global unknowns plus the clock.
#[derive(Debug, Clone, PartialEq)]
pub struct FilmState {
    pub u: Vec<f64>,
    pub t: f64,
    pub step: usize,
}

impl FilmState {
    pub fn new(u: Vec<f64>) -> FilmState {
        FilmState { u, t: 0.0, step: 0 }
    }

    /// Initial state with the regularizing lift applied.
    pub fn lifted(mut u0: Vec<f64>, cfg: &SolverConfig) -> FilmState {
        let lift = cfg.initial_lift();
        for x in &mut u0 {
            *x += lift;
        }
        FilmState::new(u0)
    }
}

/// Row-compressed copy of the stiffness `K = M L` used to form products.
struct Stiffness {
    rows: Vec<Vec<(usize, f64)>>,
}

impl Stiffness {
    fn new(grid: &GraphGrid) -> Stiffness {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); grid.len()];
        let mut add = |i: usize, j: usize, v: f64| {
            if let Some(e) = rows[i].iter_mut().find(|e| e.0 == j) {
                e.1 += v;
            } else {
                rows[i].push((j, v));
            }
        };
        for f in grid.faces() {
            add(f.left, f.left, f.coeff);
            add(f.left, f.right, -f.coeff);
            add(f.right, f.right, f.coeff);
            add(f.right, f.left, -f.coeff);
        }
        Stiffness { rows }
    }
}

/// Reusable implicit stepper for one grid and mobility.
pub struct ImplicitStepper<'g> {
    grid: &'g GraphGrid,
    mobility: Mobility,
    linear_tol: f64,
    stiffness: Stiffness,
    symbolic: Option<SymbolicLu<usize>>,
}

impl<'g> ImplicitStepper<'g> {
    pub fn new(grid: &'g GraphGrid, cfg: &SolverConfig) -> Result<ImplicitStepper<'g>, SolverError> {
        Ok(ImplicitStepper {
            grid,
            mobility: cfg.mobility()?,
            linear_tol: cfg.linear_tol,
            stiffness: Stiffness::new(grid),
            symbolic: None,
        })
    }

    /// Triplets of `A = I + dt M⁻¹ K_F(u) M⁻¹ K`.
    pub fn system_triplets(&self, u: &[f64], dt: f64) -> Vec<Triplet<usize, usize, f64>> {
        let grid = self.grid;
        let m = grid.measure();
        let mob = self.mobility.face_values(grid, u);
        let mut entries: Vec<Triplet<usize, usize, f64>> =
            (0..grid.len()).map(|i| Triplet::new(i, i, 1.0)).collect();
        for (f, &fm) in grid.faces().iter().zip(&mob) {
            let k = dt * f.coeff * fm;
            let (a, b) = (f.left, f.right);
            // row a gets (k/m_a)(e_a − e_b)ᵀ M⁻¹K, row b the negative scaled by 1/m_b
            for (row, sign) in [(a, 1.0), (b, -1.0)] {
                let scale = sign * k / m[row];
                for &(c, v) in &self.stiffness.rows[a] {
                    entries.push(Triplet::new(row, c, scale * v / m[a]));
                }
                for &(c, v) in &self.stiffness.rows[b] {
                    entries.push(Triplet::new(row, c, -scale * v / m[b]));
                }
            }
        }
        entries
    }

    /// Solves one linearly implicit step from `u` with step `dt`. No
    /// projection or acceptance test is applied here.
    ///
    /// The increment `δ = u^{k+1} − u^k` is solved for, `A δ = dt B(u) L u`,
    /// so the residual scales with the (small) increment rather than with
    /// `‖A‖ ‖u‖`. Convergence means `‖A u^{k+1} − u^k‖₂ ≤ linear_tol ‖u^k‖₂`.
    pub fn solve(&mut self, u: &[f64], dt: f64) -> Result<Vec<f64>, SolverError> {
        self.grid.check_len(u)?;
        let n = self.grid.len();
        let mut b = operators::evaluate_rhs(self.grid, u, &self.mobility)?;
        for x in &mut b {
            *x *= dt;
        }
        let u_norm = norm(u);
        if b.iter().all(|&x| x == 0.0) {
            return Ok(u.to_vec());
        }

        let entries = self.system_triplets(u, dt);
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &entries)
            .map_err(|e| SolverError::LinearSolve(format!("{e:?}")))?;
        if self.symbolic.is_none() {
            self.symbolic = Some(
                SymbolicLu::try_new(a.symbolic())
                    .map_err(|e| SolverError::LinearSolve(format!("{e:?}")))?,
            );
        }
        let symbolic = self.symbolic.clone().expect("symbolic factorization present");
        let lu = Lu::try_new_with_symbolic(symbolic, a.as_ref())
            .map_err(|e| SolverError::LinearSolve(format!("{e:?}")))?;

        let target = self.linear_tol * u_norm.max(f64::MIN_POSITIVE);
        let mut delta = vec![0.0; n];
        let mut r = b.clone();
        let mut r_norm = norm(&r);
        for _ in 0..4 {
            let mut rhs = Mat::<f64>::from_fn(n, 1, |i, _| r[i]);
            lu.solve_in_place(rhs.as_mut());
            for (i, d) in delta.iter_mut().enumerate() {
                *d += rhs[(i, 0)];
            }
            r = residual(&entries, &delta, &b);
            r_norm = norm(&r);
            if !r_norm.is_finite() {
                return Err(SolverError::LinearSolve("non-finite residual".into()));
            }
            if r_norm <= target {
                return Ok(u.iter().zip(&delta).map(|(a, d)| a + d).collect());
            }
        }
        Err(SolverError::LinearSolve(format!(
            "relative residual {:.3e} above tolerance {:.1e}",
            r_norm / u_norm,
            self.linear_tol
        )))
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn residual(entries: &[Triplet<usize, usize, f64>], x: &[f64], b: &[f64]) -> Vec<f64> {
    let mut r = b.to_vec();
    for t in entries {
        r[t.row] -= t.val * x[t.col];
    }
    r
}

/// Single implicit step with a fresh factorization. Returns the unprojected
/// state at `t + dt`.
pub fn step(
    grid: &GraphGrid,
    state: &FilmState,
    dt: f64,
    cfg: &SolverConfig,
) -> Result<FilmState, SolverError> {
    if !(dt > 0.0) {
        return Err(SolverError::Config(format!("dt = {dt} must be positive")));
    }
    let mut stepper = ImplicitStepper::new(grid, cfg)?;
    let u = stepper.solve(&state.u, dt)?;
    if u.iter().any(|x| !x.is_finite()) {
        return Err(SolverError::NonFinite {
            t: state.t + dt,
            step: state.step + 1,
        });
    }
    Ok(FilmState {
        u,
        t: state.t + dt,
        step: state.step + 1,
    })
}

const CHANGE_FLOOR: f64 = 1e-12;

/// Step-size controller. Returns `(accept, dt_next)`.
///
/// `r = ‖u_new − u_old‖∞ / max(‖u_old‖∞, floor)`; a step is accepted when
/// `r ≤ 2·target` and `min(u_new) ≥ −slack`, and the next step is
/// `dt · clip(target / r, 0.3, 2)` clipped into `[dt_min, dt_max]`.
pub fn adapt_dt(
    prev: &[f64],
    new: &[f64],
    dt: f64,
    cfg: &SolverConfig,
) -> Result<(bool, f64), SolverError> {
    let change = prev
        .iter()
        .zip(new)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let scale = prev.iter().map(|a| a.abs()).fold(0.0, f64::max).max(CHANGE_FLOOR);
    let r = change / scale;
    let min_new = new.iter().copied().fold(f64::INFINITY, f64::min);
    let accept = r <= 2.0 * cfg.adapt_target && min_new >= -cfg.negativity_slack;
    let factor = if r > 0.0 {
        (cfg.adapt_target / r).clamp(0.3, 2.0)
    } else {
        2.0
    };
    let factor = if accept { factor } else { factor.min(0.3) };
    let dt_next = (dt * factor).clamp(cfg.dt_min, cfg.dt_max);
    if !accept && dt <= cfg.dt_min {
        return Err(SolverError::StepUnderflow { t: f64::NAN, step: 0, dt });
    }
    Ok((accept, dt_next))
}

/// `‖u − K‖∞ ≤ tol`.
pub fn detect_steady(u: &[f64], k: f64, tol: f64) -> bool {
    u.iter().all(|x| (x - k).abs() <= tol)
}

/// Receives the output of [`run`] as it is produced.
pub trait RunObserver {
    fn on_record(&mut self, _record: &DiagnosticsRecord) -> std::io::Result<()> {
        Ok(())
    }
    fn on_snapshot(&mut self, _state: &FilmState) -> std::io::Result<()> {
        Ok(())
    }
}

/// Observer that discards everything.
pub struct NoOutput;
impl RunObserver for NoOutput {}

/// Observer that keeps snapshots in memory.
#[derive(Default)]
pub struct Collect {
    pub snapshots: Vec<FilmState>,
}
impl RunObserver for Collect {
    fn on_snapshot(&mut self, state: &FilmState) -> std::io::Result<()> {
        self.snapshots.push(state.clone());
        Ok(())
    }
}

/// An accepted step whose energy rose above the per-step slack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyViolation {
    pub step: usize,
    pub t: f64,
    pub increase: f64,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub final_state: FilmState,
    pub records: Vec<DiagnosticsRecord>,
    pub steady_value: f64,
    pub steady: bool,
    pub rejected_steps: usize,
    pub clamp_events: usize,
    pub energy_violations: Vec<EnergyViolation>,
    pub hit_max_steps: bool,
}

/// Per-step energy slack relative to `E(0)`.
pub const ENERGY_SLACK: f64 = 1e-10;

/// Diagnostics of one state.
pub fn record_for(
    grid: &GraphGrid,
    state: &FilmState,
    cfg: &SolverConfig,
    clamp_events: usize,
) -> DiagnosticsRecord {
    let u = &state.u;
    DiagnosticsRecord {
        t: state.t,
        mass: diagnostics::mass(grid, u),
        energy: diagnostics::energy(grid, u),
        entropy: diagnostics::entropy(grid, u, cfg.n, cfg.eps, cfg.entropy_base),
        min_u: u.iter().copied().fold(f64::INFINITY, f64::min),
        max_u: u.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        vertex_residual_max: operators::max_vertex_residual(grid, u),
        clamp_events,
        decay_moment: diagnostics::decay_moment(grid, u, cfg.n),
    }
}

/// Advances `state0` (already lifted) to `t_end` or until the state is
/// within `steady_tol` of the constant `K` fixed by the initial mass.
pub fn run(
    grid: &GraphGrid,
    state0: FilmState,
    cfg: &SolverConfig,
    observer: &mut dyn RunObserver,
) -> Result<RunSummary, Error> {
    cfg.validate()?;
    grid.check_len(&state0.u)?;
    let mut stepper = ImplicitStepper::new(grid, cfg)?;
    let k_steady = diagnostics::steady_value(grid, &state0.u);

    let first = record_for(grid, &state0, cfg, 0);
    observer.on_record(&first)?;
    observer.on_snapshot(&state0)?;
    let e0 = first.energy;
    let mut records = vec![first];

    let mut state = state0;
    let mut dt = cfg.dt_init;
    let mut rejected = 0;
    let mut clamps_total = 0;
    let mut violations = Vec::new();
    let mut steady = false;
    let mut hit_max = false;
    let mut next_snapshot_time = match cfg.snapshot {
        SnapshotCadence::Time(every) => every,
        SnapshotCadence::Steps(_) => f64::INFINITY,
    };
    let mut last_snapshot_step = 0;
    let t_eps = 1e-12 * cfg.t_end;

    let fail = |state: &FilmState, e: SolverError| -> Error {
        Error::Solver(SolverError::AtStep {
            t: state.t,
            step: state.step,
            source: Box::new(e),
        })
    };

    while state.t < cfg.t_end - t_eps {
        if state.step >= cfg.max_steps {
            warn!("stopping at max_steps = {}", cfg.max_steps);
            hit_max = true;
            break;
        }
        let dt_try = dt.min(cfg.t_end - state.t);
        let (accept, dt_next, candidate) = match stepper.solve(&state.u, dt_try) {
            Ok(u_new) => {
                if u_new.iter().any(|x| !x.is_finite()) {
                    return Err(fail(
                        &state,
                        SolverError::NonFinite {
                            t: state.t + dt_try,
                            step: state.step + 1,
                        },
                    ));
                }
                let (accept, dt_next) = adapt_dt(&state.u, &u_new, dt_try, cfg)
                    .map_err(|e| underflow_at(e, &state))?;
                (accept, dt_next, Some(u_new))
            }
            Err(SolverError::LinearSolve(msg)) => {
                debug!("linear solve rejected step at t = {}: {msg}", state.t);
                if dt_try <= cfg.dt_min {
                    return Err(underflow_at(
                        SolverError::StepUnderflow { t: 0.0, step: 0, dt: dt_try },
                        &state,
                    ));
                }
                (false, (dt_try * 0.3).max(cfg.dt_min), None)
            }
            Err(e) => return Err(fail(&state, e)),
        };

        if !accept {
            rejected += 1;
            dt = dt_next;
            continue;
        }
        let mut u_new = candidate.expect("accepted step has a state");
        let mut clamps = 0;
        for x in u_new.iter_mut() {
            if *x < 0.0 {
                *x = 0.0;
                clamps += 1;
            }
        }
        if clamps > 0 {
            warn!(
                "clamped {clamps} negative entries at t = {:.6e}, step {}",
                state.t + dt_try,
                state.step + 1
            );
        }
        clamps_total += clamps;

        let prev_energy = records.last().map(|r| r.energy).unwrap_or(e0);
        state = FilmState {
            u: u_new,
            t: state.t + dt_try,
            step: state.step + 1,
        };
        let rec = record_for(grid, &state, cfg, clamps);
        if rec.energy > prev_energy + ENERGY_SLACK * e0 {
            warn!(
                "energy increased by {:.3e} at t = {:.6e}, step {}",
                rec.energy - prev_energy,
                state.t,
                state.step
            );
            violations.push(EnergyViolation {
                step: state.step,
                t: state.t,
                increase: rec.energy - prev_energy,
            });
        }
        observer.on_record(&rec)?;
        records.push(rec);

        steady = detect_steady(&state.u, k_steady, cfg.steady_tol);
        let done = (steady && cfg.stop_on_steady) || state.t >= cfg.t_end - t_eps;
        let due = match cfg.snapshot {
            SnapshotCadence::Steps(every) => state.step.is_multiple_of(every),
            SnapshotCadence::Time(every) => {
                if state.t >= next_snapshot_time {
                    while next_snapshot_time <= state.t {
                        next_snapshot_time += every;
                    }
                    true
                } else {
                    false
                }
            }
        };
        if due || done {
            observer.on_snapshot(&state)?;
            last_snapshot_step = state.step;
        }
        dt = dt_next;
        if done {
            break;
        }
    }
    if last_snapshot_step != state.step {
        observer.on_snapshot(&state)?;
    }

    Ok(RunSummary {
        final_state: state,
        records,
        steady_value: k_steady,
        steady,
        rejected_steps: rejected,
        clamp_events: clamps_total,
        energy_violations: violations,
        hit_max_steps: hit_max,
    })
}

fn underflow_at(e: SolverError, state: &FilmState) -> Error {
    match e {
        SolverError::StepUnderflow { dt, .. } => Error::Solver(SolverError::StepUnderflow {
            t: state.t,
            step: state.step,
            dt,
        }),
        other => Error::Solver(other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EdgeSpec, GraphSpec, MetricGraph};

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn adapt_unit_ratio_keeps_dt() {
        let c = cfg();
        let prev = vec![1.0, 1.0];
        let new = vec![1.0 + c.adapt_target, 1.0];
        let (acc, dt) = adapt_dt(&prev, &new, 1e-3, &c).unwrap();
        assert!(acc);
        assert!((dt - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn adapt_rejects_large_change() {
        let c = cfg();
        let prev = vec![1.0, 1.0];
        let new = vec![1.0 + 4.0 * c.adapt_target, 1.0];
        let (acc, dt) = adapt_dt(&prev, &new, 1e-3, &c).unwrap();
        assert!(!acc);
        assert!((dt - 0.3e-3).abs() < 1e-15);
    }

    #[test]
    fn adapt_doubles_on_steady_state() {
        let c = cfg();
        let u = vec![0.5; 4];
        assert_eq!(adapt_dt(&u, &u, 1e-3, &c).unwrap(), (true, 2e-3));
        assert_eq!(adapt_dt(&u, &u, 0.4, &c).unwrap(), (true, c.dt_max));
    }

    #[test]
    fn adapt_rejects_negativity_and_underflows() {
        let c = cfg();
        let prev = vec![1.0, 1.0];
        let new = vec![1.0, -1e-9];
        let (acc, _) = adapt_dt(&prev, &new, 1e-3, &c).unwrap();
        assert!(!acc);
        let big = vec![10.0, 1.0];
        assert!(matches!(
            adapt_dt(&prev, &big, c.dt_min, &c),
            Err(SolverError::StepUnderflow { .. })
        ));
    }

    #[test]
    fn steady_detection() {
        let k = 0.25;
        let mut u = vec![k; 5];
        assert!(detect_steady(&u, k, 1e-3));
        u[2] = k + 2e-3;
        assert!(!detect_steady(&u, k, 1e-3));
    }

    #[test]
    fn config_validation() {
        assert!(cfg().validate().is_ok());
        let mut c = cfg();
        c.theta = 0.5;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.dt_init = 1.0;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.linear_tol = 1e-8;
        assert!(c.validate().is_err());
    }

    #[test]
    fn constant_is_fixed_point_of_step() {
        let g = MetricGraph::build(&GraphSpec::builtin("star3").unwrap()).unwrap();
        let grid = GraphGrid::uniform(&g, 6).unwrap();
        let s = FilmState::new(vec![0.3; grid.len()]);
        let next = step(&grid, &s, 0.1, &cfg()).unwrap();
        assert!(next.u.iter().all(|&x| (x - 0.3).abs() <= 1e-12 * 0.3));
        assert_eq!(next.step, 1);
    }

    #[test]
    fn constant_run_stops_after_first_step() {
        let g = MetricGraph::build(&GraphSpec {
            vertices: vec!["a".into(), "b".into()],
            edges: vec![EdgeSpec::new("a", "b", 1.0)],
            boundary: vec!["a".into(), "b".into()],
        })
        .unwrap();
        let grid = GraphGrid::uniform(&g, 8).unwrap();
        let summary = run(&grid, FilmState::new(vec![0.2; grid.len()]), &cfg(), &mut NoOutput).unwrap();
        assert!(summary.steady);
        assert_eq!(summary.final_state.step, 1);
        assert_eq!(summary.records.len(), 2);
    }
}
