//! Discrete operators of the mixed system `u_t = (f_ε(u) w_s)_s`, `w = −u_ss`.
//!
//! Both operators are assembled face by face. With `M = diag(measure)` and
//! the face stiffness `K_F = Σ_faces F c (e_l − e_r)(e_l − e_r)ᵀ`:
//!
//! ```text
//! L    =  M⁻¹ K        (K = K_F with F ≡ 1)
//! B(u) = −M⁻¹ K_F(u)
//! ```
//!
//! A vertex row sums the faces of all incident edges, so the Kirchhoff flux
//! balance is the natural condition of the closure and a vertex of degree one
//! gets the no-flux condition. Every face flux enters two rows with opposite
//! signs, which makes `Σ_i m_i (B w)_i` vanish up to rounding.

use std::io::Write;

use faer::sparse::{SparseRowMat, Triplet};
use serde::{Deserialize, Serialize};

use crate::error::DiscretizationError;
use crate::grid::GraphGrid;

/// How the face mobility is formed from the two adjacent nodal mobilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaceAverage {
    #[default]
    Arithmetic,
    Harmonic,
    Geometric,
}

impl FaceAverage {
    pub fn combine(self, a: f64, b: f64) -> f64 {
        match self {
            FaceAverage::Arithmetic => 0.5 * (a + b),
            FaceAverage::Harmonic => {
                if a + b > 0.0 {
                    2.0 * a * b / (a + b)
                } else {
                    0.0
                }
            }
            FaceAverage::Geometric => (a * b).sqrt(),
        }
    }
}

/// Regularized mobility `f_ε(z) = |z|ⁿ + ε` plus the face-averaging rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mobility {
    pub n: f64,
    pub eps: f64,
    pub avg: FaceAverage,
}

impl Mobility {
    /// Checks `n ≥ 1` and `eps ≥ 0`. `allow_small_exponent` admits `0 ≤ n < 1`.
    pub fn new(
        n: f64,
        eps: f64,
        avg: FaceAverage,
        allow_small_exponent: bool,
    ) -> Result<Mobility, DiscretizationError> {
        if !(eps >= 0.0) {
            return Err(DiscretizationError::NegativeEps(eps));
        }
        if !(n >= 1.0) && !(allow_small_exponent && n >= 0.0) {
            return Err(DiscretizationError::ExponentOutOfRange(n));
        }
        Ok(Mobility { n, eps, avg })
    }

    #[inline]
    pub fn value(&self, z: f64) -> f64 {
        z.abs().powf(self.n) + self.eps
    }

    /// Derivative of `f_ε` (for `z ≥ 0`).
    #[inline]
    pub fn derivative(&self, z: f64) -> f64 {
        if self.n == 0.0 {
            0.0
        } else {
            self.n * z.abs().powf(self.n - 1.0) * z.signum()
        }
    }

    /// Face mobilities for every face of the grid, in face order.
    pub fn face_values(&self, grid: &GraphGrid, u: &[f64]) -> Vec<f64> {
        grid.faces()
            .iter()
            .map(|f| self.avg.combine(self.value(u[f.left]), self.value(u[f.right])))
            .collect()
    }
}

/// An assembled sparse operator.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    matrix: SparseRowMat<usize, f64>,
    /// Self-adjoint in the measure-weighted inner product.
    pub measure_symmetric: bool,
    /// Rows sum to zero; `apply` then works on differences `x_j − x_i` so
    /// that constants map to exactly zero.
    pub zero_row_sum: bool,
    pub tag: String,
}

impl DiscreteOperator {
    fn from_triplets(
        n: usize,
        entries: &[Triplet<usize, usize, f64>],
        measure_symmetric: bool,
        tag: &str,
    ) -> DiscreteOperator {
        let matrix = SparseRowMat::try_new_from_triplets(n, n, entries)
            .expect("operator triplets are in range");
        DiscreteOperator {
            matrix,
            measure_symmetric,
            zero_row_sum: true,
            tag: tag.to_string(),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn nnz(&self) -> usize {
        self.matrix.compute_nnz()
    }

    pub fn matrix(&self) -> &SparseRowMat<usize, f64> {
        &self.matrix
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let ptr = self.matrix.symbolic().row_ptr();
        let range = ptr[i]..ptr[i + 1];
        (
            &self.matrix.symbolic().col_idx()[range.clone()],
            &self.matrix.val()[range],
        )
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let (cols, vals) = self.row(i);
                if self.zero_row_sum {
                    cols.iter()
                        .zip(vals)
                        .filter(|(&c, _)| c != i)
                        .map(|(&c, &v)| v * (x[c] - x[i]))
                        .sum()
                } else {
                    cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
                }
            })
            .collect()
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.dim())
            .flat_map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(move |(&c, &v)| (i, c, v))
            })
            .collect()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.dim(), self.dim());
        for (i, j, v) in self.triplets() {
            m[(i, j)] += v;
        }
        m
    }

    /// Writes `row col value` lines preceded by a `#` header.
    pub fn write_triplets<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# {} {}x{} nnz={}", self.tag, self.dim(), self.dim(), self.nnz())?;
        for (i, j, v) in self.triplets() {
            writeln!(out, "{i} {j} {v:.16e}")?;
        }
        Ok(())
    }
}

/// `M⁻¹ K_F` as triplets, with per-face mobility `face_mob`.
fn flux_triplets(grid: &GraphGrid, face_mob: &[f64], sign: f64) -> Vec<Triplet<usize, usize, f64>> {
    let m = grid.measure();
    let mut entries = Vec::with_capacity(4 * grid.faces().len());
    for (f, &mob) in grid.faces().iter().zip(face_mob) {
        let k = sign * f.coeff * mob;
        let (a, b) = (f.left, f.right);
        entries.push(Triplet::new(a, a, k / m[a]));
        entries.push(Triplet::new(a, b, -k / m[a]));
        entries.push(Triplet::new(b, b, k / m[b]));
        entries.push(Triplet::new(b, a, -k / m[b]));
    }
    entries
}

/// The negative second-difference operator `L` (`w = L u`).
pub fn assemble_neg_laplacian(grid: &GraphGrid) -> DiscreteOperator {
    let ones = vec![1.0; grid.faces().len()];
    DiscreteOperator::from_triplets(
        grid.len(),
        &flux_triplets(grid, &ones, 1.0),
        true,
        "neg_laplacian",
    )
}

/// The mobility-weighted flux divergence `B(u)` (`u_t = B(u) w`).
pub fn assemble_mobility_flux_div(
    grid: &GraphGrid,
    u: &[f64],
    mobility: &Mobility,
) -> Result<DiscreteOperator, DiscretizationError> {
    grid.check_len(u)?;
    let mob = mobility.face_values(grid, u);
    Ok(DiscreteOperator::from_triplets(
        grid.len(),
        &flux_triplets(grid, &mob, -1.0),
        true,
        "mobility_flux_div",
    ))
}

/// `K_F x` evaluated face by face (no matrix).
pub fn face_stiffness_apply(grid: &GraphGrid, face_mob: &[f64], x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; grid.len()];
    for (f, &mob) in grid.faces().iter().zip(face_mob) {
        let q = f.coeff * mob * (x[f.left] - x[f.right]);
        out[f.left] += q;
        out[f.right] -= q;
    }
    out
}

/// `L u` evaluated matrix-free.
pub fn neg_laplacian_apply(grid: &GraphGrid, u: &[f64]) -> Vec<f64> {
    let ones = vec![1.0; grid.faces().len()];
    let mut w = face_stiffness_apply(grid, &ones, u);
    for (wi, m) in w.iter_mut().zip(grid.measure()) {
        *wi /= m;
    }
    w
}

/// Semi-discrete right-hand side `B(u) L u`.
pub fn evaluate_rhs(
    grid: &GraphGrid,
    u: &[f64],
    mobility: &Mobility,
) -> Result<Vec<f64>, DiscretizationError> {
    grid.check_len(u)?;
    let w = neg_laplacian_apply(grid, u);
    let mob = mobility.face_values(grid, u);
    let mut rhs = face_stiffness_apply(grid, &mob, &w);
    for (r, m) in rhs.iter_mut().zip(grid.measure()) {
        *r = -*r / m;
    }
    Ok(rhs)
}

/// Discrete Kirchhoff balances at one interior vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexResidual {
    pub vertex: usize,
    /// `Σ_{J⁺} d_j u_s(1) − Σ_{J⁻} d_j u_s(0)` by one-sided differences.
    pub u_balance: f64,
    /// Same balance for `w`.
    pub w_balance: f64,
}

fn one_sided_balance(grid: &GraphGrid, x: &[f64], vertex: usize) -> f64 {
    let g = grid.graph();
    let mut total = 0.0;
    for (j, e) in g.edges().iter().enumerate() {
        let n = grid.cells(j);
        let d = e.weight / grid.dx(j);
        if e.head == vertex {
            total += d * (x[vertex] - x[grid.node_index(j, n - 1)]);
        }
        if e.tail == vertex {
            total -= d * (x[grid.node_index(j, 1)] - x[vertex]);
        }
    }
    total
}

/// Kirchhoff flux residuals for `u` and `w` at each interior vertex.
pub fn vertex_flux_residual(grid: &GraphGrid, u: &[f64], w: &[f64]) -> Vec<VertexResidual> {
    grid.graph()
        .interior_set()
        .into_iter()
        .map(|v| VertexResidual {
            vertex: v,
            u_balance: one_sided_balance(grid, u, v),
            w_balance: one_sided_balance(grid, w, v),
        })
        .collect()
}

/// Largest absolute residual over both fields and all interior vertices.
pub fn max_vertex_residual(grid: &GraphGrid, u: &[f64]) -> f64 {
    let w = neg_laplacian_apply(grid, u);
    vertex_flux_residual(grid, u, &w)
        .iter()
        .map(|r| r.u_balance.abs().max(r.w_balance.abs()))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EdgeSpec, GraphSpec, MetricGraph};
    use std::f64::consts::PI;

    fn line(cells: usize) -> GraphGrid {
        let g = MetricGraph::build(&GraphSpec {
            vertices: vec!["a1".into(), "a2".into()],
            edges: vec![EdgeSpec::new("a1", "a2", 1.0)],
            boundary: vec!["a1".into(), "a2".into()],
        })
        .unwrap();
        GraphGrid::uniform(&g, cells).unwrap()
    }

    fn star(cells: usize) -> GraphGrid {
        let g = MetricGraph::build(&GraphSpec::builtin("star3").unwrap()).unwrap();
        GraphGrid::uniform(&g, cells).unwrap()
    }

    fn sample(grid: &GraphGrid, f: impl Fn(usize, f64) -> f64) -> Vec<f64> {
        let mut u = vec![0.0; grid.len()];
        for j in 0..grid.graph().edge_count() {
            for k in 0..=grid.cells(j) {
                u[grid.node_index(j, k)] = f(j, grid.local_coord(j, k));
            }
        }
        u
    }

    #[test]
    fn constants_in_kernel() {
        let grid = star(7);
        let l = assemble_neg_laplacian(&grid);
        let lu = l.apply(&vec![0.37; grid.len()]);
        assert!(lu.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn cosine_is_neumann_eigenfunction() {
        let grid = line(200);
        let u = sample(&grid, |_, s| (PI * s).cos());
        let lu = assemble_neg_laplacian(&grid).apply(&u);
        let mut max_err: f64 = 0.0;
        for (i, (&a, &b)) in lu.iter().zip(&u).enumerate() {
            let _ = i;
            max_err = max_err.max((a - PI * PI * b).abs());
        }
        assert!(max_err / (PI * PI) <= 1e-3, "max err {max_err}");
    }

    #[test]
    fn kirchhoff_linear_is_harmonic_at_center() {
        // star edges point into a0; slopes 1, 2, -3 sum to zero at s = 1
        let grid = star(5);
        let slopes = [1.0, 2.0, -3.0];
        let u = sample(&grid, |j, s| 2.0 + slopes[j] * (s - 1.0));
        let lu = assemble_neg_laplacian(&grid).apply(&u);
        assert!(lu[0].abs() < 1e-12);
        let w = neg_laplacian_apply(&grid, &u);
        let res = vertex_flux_residual(&grid, &u, &w);
        assert_eq!(res.len(), 1);
        assert!(res[0].u_balance.abs() < 1e-12);
    }

    #[test]
    fn flux_div_kills_constants_and_reduces_to_laplacian() {
        let grid = star(6);
        let u: Vec<f64> = (0..grid.len()).map(|i| 0.5 + 0.1 * (i as f64).sin()).collect();
        let mob = Mobility::new(1.0, 1e-3, FaceAverage::Arithmetic, false).unwrap();
        let b = assemble_mobility_flux_div(&grid, &u, &mob).unwrap();
        assert!(b.apply(&vec![2.5; grid.len()]).iter().all(|&x| x == 0.0));

        let unit = Mobility::new(1.0, 0.0, FaceAverage::Arithmetic, false).unwrap();
        let b1 = assemble_mobility_flux_div(&grid, &vec![1.0; grid.len()], &unit).unwrap();
        let l = assemble_neg_laplacian(&grid);
        let (bd, ld) = (b1.to_dense(), l.to_dense());
        assert!((bd + ld).abs().max() < 1e-12);
    }

    #[test]
    fn rhs_matches_operator_product() {
        let grid = star(5);
        let u: Vec<f64> = (0..grid.len()).map(|i| 0.3 + 0.05 * (i as f64 * 1.3).cos()).collect();
        let mob = Mobility::new(2.0, 1e-4, FaceAverage::Harmonic, false).unwrap();
        let rhs = evaluate_rhs(&grid, &u, &mob).unwrap();
        let b = assemble_mobility_flux_div(&grid, &u, &mob).unwrap();
        let l = assemble_neg_laplacian(&grid);
        let prod = b.apply(&l.apply(&u));
        for (a, c) in rhs.iter().zip(&prod) {
            assert!((a - c).abs() <= 1e-9 * (1.0 + c.abs()));
        }
    }

    #[test]
    fn mobility_parameter_checks() {
        assert!(matches!(
            Mobility::new(0.5, 0.0, FaceAverage::Arithmetic, false),
            Err(DiscretizationError::ExponentOutOfRange(_))
        ));
        assert!(Mobility::new(0.0, 0.0, FaceAverage::Arithmetic, true).is_ok());
        assert!(matches!(
            Mobility::new(1.0, -1e-3, FaceAverage::Arithmetic, false),
            Err(DiscretizationError::NegativeEps(_))
        ));
    }

    #[test]
    fn face_averages() {
        assert_eq!(FaceAverage::Arithmetic.combine(1.0, 3.0), 2.0);
        assert_eq!(FaceAverage::Harmonic.combine(1.0, 3.0), 1.5);
        assert_eq!(FaceAverage::Geometric.combine(1.0, 4.0), 2.0);
        assert_eq!(FaceAverage::Harmonic.combine(0.0, 0.0), 0.0);
    }

    #[test]
    fn triplet_dump_has_header() {
        let grid = line(3);
        let mut buf = Vec::new();
        assemble_neg_laplacian(&grid).write_triplets(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# neg_laplacian 4x4"));
        assert_eq!(text.lines().count(), 1 + 10);
    }
}
