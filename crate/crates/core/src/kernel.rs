//! Weighted Hilbert spaces spanned by a fixed family of functions, their
//! Bergman kernels and densities of states.
//!
//! A [`FunctionSpan`] fixes the functions; a [`WeightedSpace`] equips the span
//! with the inner product `<f, g> = sum_j f(z_j) conj(g(z_j)) w_j e^{-phi_j}`.
//! The kernel is `K(z, zeta) = sum_l e_l(z) conj(e_l(zeta))` over an
//! orthonormal basis `e_l`, and the density of states is
//! `B(z) = K(z, z) e^{-phi(z)}`.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::measure::{QuadratureMeasure, WeightFunction};

/// Relative eigenvalue cutoff used when orthonormalizing a Gram matrix.
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpanKind {
    /// `1, z, ..., z^degree`
    Monomials { degree: usize },
    Tabulated,
}

/// Basis functions evaluated at the nodes of a measure: rows are nodes,
/// columns are basis functions.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSpan {
    values: DMatrix<Complex64>,
    kind: SpanKind,
}

impl FunctionSpan {
    pub fn monomials(degree: usize, measure: &QuadratureMeasure) -> Self {
        let nodes: Vec<Complex64> = measure.nodes().collect();
        let values = DMatrix::from_fn(nodes.len(), degree + 1, |j, m| nodes[j].powu(m as u32));
        Self {
            values,
            kind: SpanKind::Monomials { degree },
        }
    }

    pub fn tabulated(values: DMatrix<Complex64>) -> Result<Self> {
        if values.ncols() == 0 || values.nrows() == 0 {
            return Err(Error::InvalidConfiguration(
                "a span needs at least one node and one function".into(),
            ));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidConfiguration("span values must be finite".into()));
        }
        Ok(Self {
            values,
            kind: SpanKind::Tabulated,
        })
    }

    pub fn values(&self) -> &DMatrix<Complex64> {
        &self.values
    }

    pub fn kind(&self) -> SpanKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn n_nodes(&self) -> usize {
        self.values.nrows()
    }

    /// Whether the columns are known to be restrictions of holomorphic
    /// functions. Tabulated spans carry no such guarantee.
    pub fn is_holomorphic(&self) -> bool {
        matches!(self.kind, SpanKind::Monomials { .. })
    }

    /// Basis values at an arbitrary point, when a closed form is known.
    pub fn eval_at(&self, z: Complex64) -> Option<DVector<Complex64>> {
        match self.kind {
            SpanKind::Monomials { degree } => Some(monomial_row(degree, z)),
            SpanKind::Tabulated => None,
        }
    }
}

fn monomial_row(degree: usize, z: Complex64) -> DVector<Complex64> {
    let mut out = DVector::from_element(degree + 1, Complex64::new(1.0, 0.0));
    for m in 1..=degree {
        out[m] = out[m - 1] * z;
    }
    out
}

/// Span values with row `j` scaled by `sqrt(w_j e^{-phi_j})`, so that the
/// Gram matrix is `A* A`.
fn weighted_design(
    span: &FunctionSpan,
    measure: &QuadratureMeasure,
    weight: &WeightFunction,
) -> Result<DMatrix<Complex64>> {
    check_len(measure.len(), span.n_nodes())?;
    check_len(measure.len(), weight.len())?;
    let mut scaled = span.values().clone();
    for (j, (w, phi)) in measure.masses().iter().zip(weight.values()).enumerate() {
        let s = (w * (-phi).exp()).sqrt();
        scaled.row_mut(j).scale_mut(s);
    }
    Ok(scaled)
}

/// `G_{mn} = sum_j conj(V_{jm}) V_{jn} w_j e^{-phi_j}`, symmetrized.
pub fn assemble_gram(
    span: &FunctionSpan,
    measure: &QuadratureMeasure,
    weight: &WeightFunction,
) -> Result<DMatrix<Complex64>> {
    let a = weighted_design(span, measure, weight)?;
    Ok(hermitian_part(&a.ad_mul(&a)))
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

pub(crate) fn hermitian_part(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Coefficients `C` (d x r) with `C* G C = I_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Orthonormalization {
    pub coeffs: DMatrix<Complex64>,
    pub rank: usize,
    /// Eigenvalues of the diagonally equilibrated Gram matrix, descending.
    pub eigenvalues: Vec<f64>,
}

/// Orthonormalize a Hermitian positive semidefinite Gram matrix.
///
/// The matrix is first equilibrated by its diagonal, `D^{-1/2} G D^{-1/2}`,
/// so that basis functions with very different norms (high monomials under a
/// steep weight) are not discarded. Eigenvalues at or below
/// `tol_rel * lambda_max` of the equilibrated matrix are dropped. Columns
/// with zero norm are never part of the space.
pub fn orthonormal_basis(gram: &DMatrix<Complex64>, tol_rel: f64) -> Orthonormalization {
    let d = gram.nrows();
    let active: Vec<usize> = (0..d)
        .filter(|&m| {
            let g = gram[(m, m)].re;
            g > 0.0 && g.is_finite()
        })
        .collect();
    let empty = || Orthonormalization {
        coeffs: DMatrix::zeros(d, 0),
        rank: 0,
        eigenvalues: Vec::new(),
    };
    if active.is_empty() {
        return empty();
    }
    let inv_sqrt: Vec<f64> = active.iter().map(|&m| 1.0 / gram[(m, m)].re.sqrt()).collect();
    let n = active.len();
    let equilibrated = DMatrix::from_fn(n, n, |a, b| {
        gram[(active[a], active[b])] * (inv_sqrt[a] * inv_sqrt[b])
    });
    let eig = SymmetricEigen::new(hermitian_part(&equilibrated));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lambda_max = eig.eigenvalues[order[0]];
    if lambda_max <= 0.0 || !lambda_max.is_finite() {
        return empty();
    }
    let kept: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| eig.eigenvalues[i] > tol_rel * lambda_max)
        .collect();
    let mut coeffs = DMatrix::zeros(d, kept.len());
    for (col, &i) in kept.iter().enumerate() {
        let s = 1.0 / eig.eigenvalues[i].sqrt();
        for (a, &m) in active.iter().enumerate() {
            coeffs[(m, col)] = eig.eigenvectors[(a, i)] * (inv_sqrt[a] * s);
        }
    }
    Orthonormalization {
        coeffs,
        rank: kept.len(),
        eigenvalues: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
    }
}

/// Same decomposition as [`orthonormal_basis`] for `G = A* A`, computed from
/// the singular values of the column-equilibrated `A`. Also returns `A C`,
/// the orthonormal basis scaled by `sqrt(w e^{-phi})` at the nodes.
///
/// Squaring `A` into `G` squares its condition number; working on `A`
/// keeps densities accurate for nearly dependent spans such as high
/// monomials on a few nodes.
fn orthonormal_basis_from_design(a: &DMatrix<Complex64>, tol_rel: f64) -> (Orthonormalization, DMatrix<Complex64>) {
    let (n_nodes, d) = a.shape();
    let norms: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
    let active: Vec<usize> = (0..d).filter(|&m| norms[m] > 0.0 && norms[m].is_finite()).collect();
    let empty = || {
        (
            Orthonormalization {
                coeffs: DMatrix::zeros(d, 0),
                rank: 0,
                eigenvalues: Vec::new(),
            },
            DMatrix::zeros(n_nodes, 0),
        )
    };
    if active.is_empty() {
        return empty();
    }
    let n = active.len();
    let equilibrated = DMatrix::from_fn(n_nodes, n, |j, b| a[(j, active[b])] / norms[active[b]]);
    let svd = SVD::new(equilibrated, true, true);
    let (u, v_t) = (svd.u.expect("left vectors"), svd.v_t.expect("right vectors"));
    let sigma = &svd.singular_values;
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&x, &y| sigma[y].total_cmp(&sigma[x]));
    let lambda_max = sigma[order[0]].powi(2);
    if lambda_max <= 0.0 || !lambda_max.is_finite() {
        return empty();
    }
    let kept: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| sigma[i].powi(2) > tol_rel * lambda_max)
        .collect();
    let mut coeffs = DMatrix::zeros(d, kept.len());
    let mut weighted_basis = DMatrix::zeros(n_nodes, kept.len());
    for (col, &i) in kept.iter().enumerate() {
        let s = 1.0 / sigma[i];
        for (b, &m) in active.iter().enumerate() {
            coeffs[(m, col)] = v_t[(i, b)].conj() * (s / norms[m]);
        }
        weighted_basis.set_column(col, &u.column(i));
    }
    let mut eigenvalues: Vec<f64> = order.iter().map(|&i| sigma[i].powi(2)).collect();
    eigenvalues.resize(n, 0.0);
    (
        Orthonormalization {
            coeffs,
            rank: kept.len(),
            eigenvalues,
        },
        weighted_basis,
    )
}

/// A span equipped with the inner product of a weight.
#[derive(Debug, Clone)]
pub struct WeightedSpace<'a> {
    span: &'a FunctionSpan,
    measure: &'a QuadratureMeasure,
    weight: WeightFunction,
    gram: DMatrix<Complex64>,
    ortho: Orthonormalization,
    /// Orthonormal basis at the nodes, `V C` (nodes x rank).
    node_basis: DMatrix<Complex64>,
}

impl<'a> WeightedSpace<'a> {
    pub fn new(
        span: &'a FunctionSpan,
        measure: &'a QuadratureMeasure,
        weight: WeightFunction,
    ) -> Result<Self> {
        Self::with_tolerance(span, measure, weight, DEFAULT_RANK_TOL)
    }

    pub fn with_tolerance(
        span: &'a FunctionSpan,
        measure: &'a QuadratureMeasure,
        weight: WeightFunction,
        tol_rel: f64,
    ) -> Result<Self> {
        let design = weighted_design(span, measure, &weight)?;
        let gram = hermitian_part(&design.ad_mul(&design));
        let (ortho, mut node_basis) = orthonormal_basis_from_design(&design, tol_rel);
        for (j, (w, phi)) in measure.masses().iter().zip(weight.values()).enumerate() {
            let s = (w * (-phi).exp()).sqrt();
            node_basis.row_mut(j).unscale_mut(s);
        }
        Ok(Self {
            span,
            measure,
            weight,
            gram,
            ortho,
            node_basis,
        })
    }

    pub fn span(&self) -> &'a FunctionSpan {
        self.span
    }

    pub fn measure(&self) -> &'a QuadratureMeasure {
        self.measure
    }

    pub fn weight(&self) -> &WeightFunction {
        &self.weight
    }

    pub fn gram(&self) -> &DMatrix<Complex64> {
        &self.gram
    }

    pub fn orthonormalization(&self) -> &Orthonormalization {
        &self.ortho
    }

    pub fn rank(&self) -> usize {
        self.ortho.rank
    }

    pub fn node_basis(&self) -> &DMatrix<Complex64> {
        &self.node_basis
    }

    /// `K(z_j, z_j)` at every node, without forming the full kernel.
    pub fn kernel_diagonal(&self) -> Vec<f64> {
        self.node_basis
            .row_iter()
            .map(|row| row.iter().fold(0.0, |acc, e| acc + e.norm_sqr()))
            .collect()
    }

    /// `B_j = K(z_j, z_j) e^{-phi_j}` at every node.
    pub fn density(&self) -> BergmanDensity {
        let values = self
            .kernel_diagonal()
            .into_iter()
            .zip(self.weight.values())
            .map(|(k, phi)| k * (-phi).exp())
            .collect();
        BergmanDensity { values }
    }

    /// `max |C* G C - I|` entrywise, with `C* G C` evaluated as `(A C)* (A C)`
    /// for the weighted design `A`, `G = A* A`. Forming `G` first would add
    /// round-off proportional to its condition number.
    pub fn orthonormality_defect(&self) -> f64 {
        let a = weighted_design(self.span, self.measure, &self.weight).expect("validated at construction");
        let ac = a * &self.ortho.coeffs;
        let m = ac.ad_mul(&ac);
        let id = DMatrix::<Complex64>::identity(m.nrows(), m.ncols());
        (m - id).iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Off-node kernel evaluation, available when the span has a closed form.
    pub fn evaluator(&self) -> Option<KernelEvaluator> {
        match self.span.kind() {
            SpanKind::Monomials { degree } => Some(KernelEvaluator {
                degree,
                coeffs: self.ortho.coeffs.clone(),
            }),
            SpanKind::Tabulated => None,
        }
    }
}

/// Evaluates the kernel of a monomial span at arbitrary points.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelEvaluator {
    degree: usize,
    coeffs: DMatrix<Complex64>,
}

impl KernelEvaluator {
    pub fn rank(&self) -> usize {
        self.coeffs.ncols()
    }

    /// Orthonormal basis values `e_l(z)`.
    pub fn basis_at(&self, z: Complex64) -> DVector<Complex64> {
        self.coeffs.tr_mul(&monomial_row(self.degree, z))
    }

    pub fn kernel_at(&self, z: Complex64, zeta: Complex64) -> Complex64 {
        let ez = self.basis_at(z);
        let ezeta = self.basis_at(zeta);
        ez.iter().zip(ezeta.iter()).map(|(a, b)| a * b.conj()).sum()
    }

    pub fn diagonal_at(&self, z: Complex64) -> f64 {
        self.basis_at(z).iter().fold(0.0, |acc, e| acc + e.norm_sqr())
    }
}

/// `K_{ij} = K(z_i, z_j)` on all node pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub values: DMatrix<Complex64>,
    pub rank: usize,
}

impl KernelMatrix {
    pub fn n_nodes(&self) -> usize {
        self.values.nrows()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|j| self.values[(j, j)].re).collect()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.values[(i, j)]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.values.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.values.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Dense kernel `(V C)(V C)*` on node pairs.
pub fn kernel_matrix(space: &WeightedSpace<'_>) -> KernelMatrix {
    let e = space.node_basis();
    KernelMatrix {
        values: hermitian_part(&(e * e.adjoint())),
        rank: space.rank(),
    }
}

/// Density of states `B_j = K_{jj} e^{-phi_j}` at the nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BergmanDensity {
    pub values: Vec<f64>,
}

impl BergmanDensity {
    /// `sum_j w_j B_j`
    pub fn integral(&self, measure: &QuadratureMeasure) -> f64 {
        measure.integrate(&self.values)
    }

    /// `sum_{j in indices} w_j B_j`
    pub fn integral_over(&self, measure: &QuadratureMeasure, indices: &[usize]) -> f64 {
        measure.integrate_over(&self.values, indices)
    }
}

pub fn bergman_density(kernel: &KernelMatrix, weight: &WeightFunction) -> Result<BergmanDensity> {
    check_len(kernel.n_nodes(), weight.len())?;
    let values = kernel
        .diagonal()
        .into_iter()
        .zip(weight.values())
        .map(|(k, phi)| k * (-phi).exp())
        .collect();
    Ok(BergmanDensity { values })
}

/// `max_{i,j} |sum_k K_ik K_kj w_k e^{-phi_k} - K_ij|`.
pub fn reproducing_residual(
    kernel: &KernelMatrix,
    weight: &WeightFunction,
    measure: &QuadratureMeasure,
) -> Result<f64> {
    let n = kernel.n_nodes();
    check_len(n, weight.len())?;
    check_len(n, measure.len())?;
    let mut weighted = kernel.values.clone();
    for (k, (w, phi)) in measure.masses().iter().zip(weight.values()).enumerate() {
        weighted.column_mut(k).scale_mut(w * (-phi).exp());
    }
    let reproduced = weighted * &kernel.values;
    Ok((reproduced - &kernel.values)
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max))
}

/// Checks `K_{phi1}(z_j, z_j) <= K_{phi2}(z_j, z_j)` at every node, which
/// the extremal characterization guarantees when `phi1 <= phi2`.
///
/// Both spaces must share span and measure. Fails with the first node where
/// `phi1 > phi2`.
pub fn kernel_monotonicity_check(lower: &WeightedSpace<'_>, upper: &WeightedSpace<'_>) -> Result<bool> {
    check_len(lower.measure().len(), upper.measure().len())?;
    if let Some(node) = lower
        .weight()
        .values()
        .iter()
        .zip(upper.weight().values())
        .position(|(a, b)| a > b)
    {
        return Err(Error::PreconditionViolated {
            node,
            reason: "phi1 > phi2".into(),
        });
    }
    let k1 = lower.kernel_diagonal();
    let k2 = upper.kernel_diagonal();
    Ok(k1.iter().zip(&k2).all(|(a, b)| *a <= b + 1e-12 * (1.0 + b)))
}
