//! Graph-Laplacian eigenpairs of the assembled operator and a small modal
//! (Galerkin) reference integrator used as an oracle for the film solver.

use std::str::FromStr;

use diffsol::{NalgebraLU, NalgebraMat, OdeBuilder, OdeSolverMethod};
use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::SolverError;
use crate::grid::GraphGrid;
use crate::operators::{self, FaceAverage, Mobility};
use crate::stepper::SolverConfig;

/// Eigenvalue `λ ≥ 0` of `L = M⁻¹K` with an `M`-orthonormal eigenvector.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub lambda: f64,
    pub phi: Vec<f64>,
}

/// Largest relative residual `‖Lφ − λφ‖ / max(λ, 1)` accepted from the
/// dense eigensolver.
const EIGEN_RESIDUAL_TOL: f64 = 1e-10;

/// The `k` smallest eigenpairs of the assembled `L`, ascending.
///
/// Solved densely through the symmetric pencil `M^{-1/2} K M^{-1/2}`, so the
/// returned `φ = M^{-1/2} v` are orthonormal in the measure-weighted product.
pub fn graph_laplacian_eigen(grid: &GraphGrid, k: usize) -> Result<Vec<EigenPair>, SolverError> {
    let n = grid.len();
    if k > n {
        return Err(SolverError::Eigen(format!(
            "requested {k} eigenpairs but the grid has {n} unknowns"
        )));
    }
    let m = grid.measure();
    let inv_sqrt: Vec<f64> = m.iter().map(|x| 1.0 / x.sqrt()).collect();
    let mut s = DMatrix::<f64>::zeros(n, n);
    for f in grid.faces() {
        let (l, r, c) = (f.left, f.right, f.coeff);
        s[(l, l)] += c * inv_sqrt[l] * inv_sqrt[l];
        s[(r, r)] += c * inv_sqrt[r] * inv_sqrt[r];
        let off = -c * inv_sqrt[l] * inv_sqrt[r];
        s[(l, r)] += off;
        s[(r, l)] += off;
    }
    let eig = SymmetricEigen::try_new(s, f64::EPSILON, 10_000)
        .ok_or_else(|| SolverError::Eigen("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    // The graph is connected, so the null space is exactly the constants;
    // pin that pair and remove its round-off from the others.
    let constant = vec![1.0 / grid.total_measure().sqrt(); n];
    let mut pairs = Vec::with_capacity(k);
    for (rank, &idx) in order.iter().take(k).enumerate() {
        if rank == 0 {
            pairs.push(EigenPair {
                lambda: 0.0,
                phi: constant.clone(),
            });
            continue;
        }
        let lambda = eig.eigenvalues[idx].max(0.0);
        let col = eig.eigenvectors.column(idx);
        let mut phi: Vec<f64> = (0..n).map(|i| col[i] * inv_sqrt[i]).collect();
        refine(grid, lambda, &mut phi)?;
        // Modified Gram-Schmidt against the accepted pairs keeps degenerate
        // eigenspaces orthonormal after refinement.
        for prev in &pairs {
            let along = m_dot(m, &phi, &prev.phi);
            phi.iter_mut().zip(&prev.phi).for_each(|(p, q)| *p -= along * q);
        }
        let norm = m_dot(m, &phi, &phi).sqrt();
        phi.iter_mut().for_each(|p| *p /= norm);
        // Fix the sign so the largest-magnitude entry is positive.
        let pivot = phi
            .iter()
            .copied()
            .fold(0.0_f64, |a, b| if b.abs() > a.abs() { b } else { a });
        if pivot < 0.0 {
            phi.iter_mut().for_each(|x| *x = -*x);
        }
        let res = eigen_residual(grid, lambda, &phi);
        if res > EIGEN_RESIDUAL_TOL * lambda.max(1.0) {
            return Err(SolverError::Eigen(format!(
                "eigenpair λ = {lambda:.6e} has residual {res:.3e}"
            )));
        }
        pairs.push(EigenPair { lambda, phi });
    }
    Ok(pairs)
}

fn m_dot(m: &[f64], a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).zip(m).map(|((x, y), w)| x * y * w).sum()
}

/// One step of shifted inverse iteration `(K − σM) y = Mφ` with a sparse
/// LU, which brings the residual down to the round-off of applying `L`.
fn refine(grid: &GraphGrid, lambda: f64, phi: &mut [f64]) -> Result<(), SolverError> {
    let n = grid.len();
    let m = grid.measure();
    let sigma = lambda - 1e-8 * lambda.max(1.0);
    let mut entries = Vec::with_capacity(4 * grid.faces().len() + n);
    for f in grid.faces() {
        entries.push(Triplet::new(f.left, f.left, f.coeff));
        entries.push(Triplet::new(f.right, f.right, f.coeff));
        entries.push(Triplet::new(f.left, f.right, -f.coeff));
        entries.push(Triplet::new(f.right, f.left, -f.coeff));
    }
    for (i, w) in m.iter().enumerate() {
        entries.push(Triplet::new(i, i, -sigma * w));
    }
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &entries)
        .map_err(|e| SolverError::Eigen(format!("{e:?}")))?;
    let lu = a
        .sp_lu()
        .map_err(|e| SolverError::Eigen(format!("{e:?}")))?;
    let mut rhs = Mat::<f64>::from_fn(n, 1, |i, _| m[i] * phi[i]);
    lu.solve_in_place(rhs.as_mut());
    let y: Vec<f64> = (0..n).map(|i| rhs[(i, 0)]).collect();
    if y.iter().any(|x| !x.is_finite()) {
        return Err(SolverError::Eigen(format!(
            "inverse iteration broke down near λ = {lambda:.6e}"
        )));
    }
    let sign = if m_dot(m, &y, phi) < 0.0 { -1.0 } else { 1.0 };
    let norm = m_dot(m, &y, &y).sqrt();
    for (p, v) in phi.iter_mut().zip(&y) {
        *p = sign * v / norm;
    }
    Ok(())
}

/// `‖Lφ − λφ‖∞` for a candidate pair.
pub fn eigen_residual(grid: &GraphGrid, lambda: f64, phi: &[f64]) -> f64 {
    let lphi = operators::neg_laplacian_apply(grid, phi);
    lphi.iter()
        .zip(phi)
        .map(|(l, p)| (l - lambda * p).abs())
        .fold(0.0, f64::max)
}

/// `Φᵀ M Φ` of a set of eigenvectors.
pub fn gram_matrix(grid: &GraphGrid, pairs: &[EigenPair]) -> DMatrix<f64> {
    let m = grid.measure();
    DMatrix::from_fn(pairs.len(), pairs.len(), |a, b| {
        pairs[a]
            .phi
            .iter()
            .zip(&pairs[b].phi)
            .zip(m)
            .map(|((x, y), w)| x * y * w)
            .sum()
    })
}

/// Edge classes of the eight-edge example network with known closed-form
/// eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeClass {
    /// Outer edges ending in a boundary vertex.
    Pendant,
    /// Cycle edges whose modes are `(2πi)²`.
    CycleLong,
    /// Cycle edges whose modes are `(πi)²`.
    CycleShort,
}

impl FromStr for EdgeClass {
    type Err = SolverError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pendant" => Ok(EdgeClass::Pendant),
            "cycle-long" => Ok(EdgeClass::CycleLong),
            "cycle-short" => Ok(EdgeClass::CycleShort),
            other => Err(SolverError::Eigen(format!(
                "unknown edge class `{other}` (expected pendant, cycle-long or cycle-short)"
            ))),
        }
    }
}

impl EdgeClass {
    pub fn name(self) -> &'static str {
        match self {
            EdgeClass::Pendant => "pendant",
            EdgeClass::CycleLong => "cycle-long",
            EdgeClass::CycleShort => "cycle-short",
        }
    }
}

/// Closed-form eigenvalue of mode `i ≥ 1` for an edge class.
pub fn analytic_example_eigen(class: EdgeClass, i: usize) -> Result<f64, SolverError> {
    if i == 0 {
        return Err(SolverError::Eigen("mode index must be at least 1".into()));
    }
    let pi_i = std::f64::consts::PI * i as f64;
    Ok(match class {
        EdgeClass::Pendant | EdgeClass::CycleShort => pi_i * pi_i,
        EdgeClass::CycleLong => 4.0 * pi_i * pi_i,
    })
}

/// One row of an eigenvalue comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenComparison {
    pub class: EdgeClass,
    pub mode: usize,
    pub analytic: f64,
    /// Closest computed eigenvalue.
    pub computed: f64,
    pub rel_error: f64,
}

/// Matches each analytic value against the nearest computed eigenvalue.
pub fn compare_with_analytic(
    pairs: &[EigenPair],
    classes: &[EdgeClass],
    modes: usize,
) -> Result<Vec<EigenComparison>, SolverError> {
    let mut rows = Vec::new();
    for &class in classes {
        for i in 1..=modes {
            let analytic = analytic_example_eigen(class, i)?;
            let Some(computed) = pairs
                .iter()
                .map(|p| p.lambda)
                .min_by(|a, b| (a - analytic).abs().total_cmp(&(b - analytic).abs()))
            else {
                continue;
            };
            rows.push(EigenComparison {
                class,
                mode: i,
                analytic,
                computed,
                rel_error: (computed - analytic).abs() / analytic,
            });
        }
    }
    Ok(rows)
}

/// Largest mode count accepted by the reference integrator.
pub const MAX_GALERKIN_MODES: usize = 32;

const GAUSS_X: [f64; 3] = [0.112_701_665_379_258_3, 0.5, 0.887_298_334_620_741_7];
const GAUSS_W: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];
const GALERKIN_RTOL: f64 = 1e-8;

/// Dense modal system `c' = −Gᵀ diag(F(u)) G Λ c`, where `G` holds the face
/// differences of the eigenvectors and `F` is the cell mean of the mobility
/// along the piecewise linear `u = Φc`, integrated by 3-point Gauss rule.
struct ModalSystem {
    lambda: Vec<f64>,
    /// `phi[k][i]`.
    phi: Vec<Vec<f64>>,
    /// Per face: `(left, right, coeff)`.
    faces: Vec<(usize, usize, f64)>,
    /// Per face and mode: `φ_k(right) − φ_k(left)`.
    diff: Vec<Vec<f64>>,
    mobility: Mobility,
    n_nodes: usize,
}

impl ModalSystem {
    fn nodal(&self, c: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.n_nodes];
        for (ck, phi) in c.iter().zip(&self.phi) {
            for (x, p) in u.iter_mut().zip(phi) {
                *x += ck * p;
            }
        }
        u
    }

    fn cell_mobility(&self, ul: f64, ur: f64) -> f64 {
        GAUSS_X
            .iter()
            .zip(GAUSS_W)
            .map(|(x, w)| w * self.mobility.value(ul + (ur - ul) * x))
            .sum()
    }

    fn cell_mobility_dir(&self, ul: f64, ur: f64, vl: f64, vr: f64) -> f64 {
        GAUSS_X
            .iter()
            .zip(GAUSS_W)
            .map(|(x, w)| {
                w * self.mobility.derivative(ul + (ur - ul) * x) * (vl + (vr - vl) * x)
            })
            .sum()
    }

    fn grad(&self, f: usize, c: &[f64], scale_by_lambda: bool) -> f64 {
        self.diff[f]
            .iter()
            .zip(c)
            .zip(&self.lambda)
            .map(|((d, ck), l)| if scale_by_lambda { d * ck * l } else { d * ck })
            .sum()
    }

    fn rhs(&self, c: &[f64], out: &mut [f64]) {
        let u = self.nodal(c);
        out.iter_mut().for_each(|x| *x = 0.0);
        for (f, &(l, r, coeff)) in self.faces.iter().enumerate() {
            let q = coeff * self.cell_mobility(u[l], u[r]) * self.grad(f, c, true);
            for (o, d) in out.iter_mut().zip(&self.diff[f]) {
                *o -= d * q;
            }
        }
    }

    fn jac_mul(&self, c: &[f64], v: &[f64], out: &mut [f64]) {
        let u = self.nodal(c);
        let dv = self.nodal(v);
        out.iter_mut().for_each(|x| *x = 0.0);
        for (f, &(l, r, coeff)) in self.faces.iter().enumerate() {
            let q = coeff
                * (self.cell_mobility(u[l], u[r]) * self.grad(f, v, true)
                    + self.cell_mobility_dir(u[l], u[r], dv[l], dv[r]) * self.grad(f, c, true));
            for (o, d) in out.iter_mut().zip(&self.diff[f]) {
                *o -= d * q;
            }
        }
    }
}

/// Modal trajectory sampled at the requested times.
#[derive(Debug, Clone)]
pub struct GalerkinTrajectory {
    pub times: Vec<f64>,
    /// Modal coefficients per time.
    pub coeffs: Vec<Vec<f64>>,
    /// Nodal values `Φc` per time.
    pub states: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
}

/// Initial modal coefficients `c_k = ⟨u0, φ_k⟩_M`.
pub fn project(grid: &GraphGrid, pairs: &[EigenPair], u0: &[f64]) -> Vec<f64> {
    let m = grid.measure();
    pairs
        .iter()
        .map(|p| p.phi.iter().zip(u0).zip(m).map(|((a, b), w)| a * b * w).sum())
        .collect()
}

/// Integrates the `modes`-term Galerkin system from `u0` with an adaptive
/// BDF method at relative tolerance `1e-8` and returns the solution at
/// `times` (ascending, starting at or after 0).
pub fn galerkin_reference_solve(
    grid: &GraphGrid,
    modes: usize,
    u0: &[f64],
    cfg: &SolverConfig,
    times: &[f64],
) -> Result<GalerkinTrajectory, SolverError> {
    grid.check_len(u0)?;
    if modes == 0 || modes > MAX_GALERKIN_MODES {
        return Err(SolverError::Config(format!(
            "galerkin mode count {modes} outside 1..={MAX_GALERKIN_MODES}"
        )));
    }
    if !(cfg.eps > 0.0) {
        return Err(SolverError::Config("galerkin reference requires eps > 0".into()));
    }
    if u0.iter().any(|&x| !(x > 0.0)) {
        return Err(SolverError::Config("galerkin reference requires positive data".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(SolverError::Config("output times must be ascending and nonnegative".into()));
    }
    let mobility = Mobility::new(cfg.n, cfg.eps, FaceAverage::Arithmetic, cfg.allow_small_exponent)?;
    let pairs = graph_laplacian_eigen(grid, modes)?;
    let c0 = project(grid, &pairs, u0);

    let faces: Vec<(usize, usize, f64)> =
        grid.faces().iter().map(|f| (f.left, f.right, f.coeff)).collect();
    let diff = faces
        .iter()
        .map(|&(l, r, _)| pairs.iter().map(|p| p.phi[r] - p.phi[l]).collect())
        .collect();
    let sys = ModalSystem {
        lambda: pairs.iter().map(|p| p.lambda).collect(),
        phi: pairs.iter().map(|p| p.phi.clone()).collect(),
        faces,
        diff,
        mobility,
        n_nodes: grid.len(),
    };

    let mut coeffs = Vec::with_capacity(times.len());
    let positive: Vec<f64> = times.iter().copied().filter(|&t| t > 0.0).collect();
    for _ in 0..times.len() - positive.len() {
        coeffs.push(c0.clone());
    }
    if !positive.is_empty() {
        let atol = 1e-10 * c0.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
        let init = c0.clone();
        let problem = OdeBuilder::<NalgebraMat<f64>>::new()
            .rtol(GALERKIN_RTOL)
            .atol(vec![atol; modes])
            .rhs_implicit(
                |x: &[f64], _p: &[f64], _t: f64, y: &mut [f64]| sys.rhs(x, y),
                |x: &[f64], _p: &[f64], _t: f64, v: &[f64], y: &mut [f64]| sys.jac_mul(x, v, y),
            )
            .init(
                move |_p: &[f64], _t: f64, y: &mut [f64]| y.copy_from_slice(&init),
                modes,
            )
            .build()
            .map_err(|e| SolverError::Ode(e.to_string()))?;
        let mut solver = problem
            .bdf::<NalgebraLU<f64>>()
            .map_err(|e| SolverError::Ode(e.to_string()))?;
        let (dense, _) = solver
            .solve_dense(&positive)
            .map_err(|e| SolverError::Ode(e.to_string()))?;
        for col in 0..positive.len() {
            coeffs.push((0..modes).map(|r| dense[(r, col)]).collect());
        }
    }
    let states = coeffs.iter().map(|c| sys.nodal(c)).collect();
    Ok(GalerkinTrajectory {
        times: times.to_vec(),
        coeffs,
        states,
        eigenvalues: sys.lambda.clone(),
    })
}
