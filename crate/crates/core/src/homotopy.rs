//! The affine weight path `phi_t = phi + t u`, `u = psi - phi`, and the
//! derivative machinery of `G(t) = sum_j rho_j w_j B_{phi_t}(z_j)` along it.
//!
//! With `E_jk = w_j w_k e^{-phi_t(z_j) - phi_t(z_k)}`, `G'(t)` is computed
//! three ways:
//!
//! * direct: `-sum_j rho_j u_j K_jj e^{-phi_t,j} w_j + sum_{j,k} rho_j u_k |K_jk|^2 E_jk`
//! * symmetric: `1/2 sum_{j,k} (rho_j - rho_k)(u_k - u_j) |K_jk|^2 E_jk`
//! * crossing: `sum_{u_j < 0 <= u_k} (u_k - u_j) |K_jk|^2 E_jk`
//!
//! The first two agree for every `rho` (reproducing property); the third
//! agrees with them when `rho = 1_{u<0}` and is manifestly nonnegative.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernel::{kernel_matrix, FunctionSpan, KernelMatrix, WeightedSpace};
use crate::measure::{QuadratureMeasure, WeightFunction};

pub const DEFAULT_FD_STEP: f64 = 1e-3;
/// Step ladder used to measure the convergence order of central differences.
pub const FD_ORDER_STEPS: [f64; 3] = [1e-2, 1e-3, 1e-4];
pub const DEFAULT_T_POINTS: usize = 11;
/// Absolute slack on `G(t_{i+1}) >= G(t_i)`.
pub const MONOTONE_TOL: f64 = 1e-12;

/// `n` equispaced points on `[0, 1]`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomotopyPath {
    base: Vec<f64>,
    direction: Vec<f64>,
    u_sup: f64,
    t_grid: Vec<f64>,
}

impl HomotopyPath {
    pub fn new(phi: &WeightFunction, psi: &WeightFunction) -> Result<Self> {
        if phi.len() != psi.len() {
            return Err(Error::DimensionMismatch {
                expected: phi.len(),
                actual: psi.len(),
            });
        }
        let direction: Vec<f64> = phi.values().iter().zip(psi.values()).map(|(f, p)| p - f).collect();
        let u_sup = direction.iter().fold(0.0f64, |m, u| m.max(u.abs()));
        Ok(Self {
            base: phi.values().to_vec(),
            direction,
            u_sup,
            t_grid: uniform_grid(DEFAULT_T_POINTS),
        })
    }

    pub fn with_t_grid(mut self, t_grid: Vec<f64>) -> Self {
        self.t_grid = t_grid;
        self
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    /// `u = psi - phi`, the constant velocity of the path.
    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    pub fn u_sup(&self) -> f64 {
        self.u_sup
    }

    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    /// Envelope `2 u_sup e^{2 u_sup}` for the difference-quotient and L2
    /// bounds, valid for `|tau| <= 1`.
    pub fn bound_constant(&self) -> f64 {
        2.0 * self.u_sup * (2.0 * self.u_sup).exp()
    }

    /// `1_{u < 0}`, the indicator of `{psi < phi}`.
    pub fn sublevel_indicator(&self) -> Vec<f64> {
        self.direction.iter().map(|&u| if u < 0.0 { 1.0 } else { 0.0 }).collect()
    }

    /// `rho = k(u)` for a nonincreasing piecewise-linear profile `k`.
    pub fn profile_indicator(&self, profile: &MonotoneProfile) -> Vec<f64> {
        self.direction.iter().map(|&u| profile.eval(u)).collect()
    }
}

/// `phi_t = phi + t u`. `t` is not restricted to `[0, 1]`.
pub fn weight_at(path: &HomotopyPath, t: f64) -> WeightFunction {
    WeightFunction::tabulated(
        path.base
            .iter()
            .zip(&path.direction)
            .map(|(f, u)| f + t * u)
            .collect(),
    )
    .expect("finite path")
}

/// Nonincreasing piecewise-linear function, constant beyond its end knots.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneProfile {
    knots: Vec<(f64, f64)>,
}

impl MonotoneProfile {
    pub fn new(mut knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidConfiguration("profile needs at least one knot".into()));
        }
        knots.sort_by(|a, b| a.0.total_cmp(&b.0));
        if knots.windows(2).any(|w| w[1].1 > w[0].1 || w[1].0 == w[0].0) {
            return Err(Error::InvalidConfiguration(
                "profile must be nonincreasing with distinct knots".into(),
            ));
        }
        Ok(Self { knots })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let first = self.knots[0];
        let last = self.knots[self.knots.len() - 1];
        if x <= first.0 {
            return first.1;
        }
        if x >= last.0 {
            return last.1;
        }
        let i = self.knots.partition_point(|k| k.0 <= x);
        let (x0, y0) = self.knots[i - 1];
        let (x1, y1) = self.knots[i];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

fn check_rho(path: &HomotopyPath, rho: &[f64]) -> Result<()> {
    if rho.len() != path.len() {
        return Err(Error::DimensionMismatch {
            expected: path.len(),
            actual: rho.len(),
        });
    }
    Ok(())
}

/// `G(t) = sum_j rho_j w_j B_{phi_t}(z_j)`.
pub fn g_of_t(
    path: &HomotopyPath,
    rho: &[f64],
    t: f64,
    span: &FunctionSpan,
    measure: &QuadratureMeasure,
) -> Result<f64> {
    check_rho(path, rho)?;
    let space = WeightedSpace::new(span, measure, weight_at(path, t))?;
    let b = space.density();
    Ok(measure
        .masses()
        .iter()
        .zip(rho)
        .zip(&b.values)
        .map(|((w, r), b)| w * r * b)
        .sum())
}

/// `sum_k u_k K_t(z_i, z_k) K_t(z_k, z_j) w_k e^{-phi_t(z_k)}` for every
/// pair, the derivative of `K_t` along the path.
pub fn kernel_derivative_matrix(path: &HomotopyPath, space_t: &WeightedSpace<'_>) -> DMatrix<Complex64> {
    let k = kernel_matrix(space_t);
    let mut weighted = k.values.clone();
    let factors = space_t
        .measure()
        .masses()
        .iter()
        .zip(space_t.weight().values())
        .zip(&path.direction);
    for (col, ((w, phi), u)) in factors.enumerate() {
        weighted.column_mut(col).scale_mut(u * w * (-phi).exp());
    }
    weighted * k.values
}

/// Single entry of [`kernel_derivative_matrix`].
pub fn kernel_derivative_rhs(path: &HomotopyPath, space_t: &WeightedSpace<'_>, i: usize, j: usize) -> Complex64 {
    let e = space_t.node_basis();
    let w = space_t.measure().masses();
    let phi = space_t.weight().values();
    (0..e.nrows())
        .map(|k| {
            let kik: Complex64 = e.row(i).iter().zip(e.row(k).iter()).map(|(a, b)| a * b.conj()).sum();
            let kkj: Complex64 = e.row(k).iter().zip(e.row(j).iter()).map(|(a, b)| a * b.conj()).sum();
            kik * kkj * (path.direction[k] * w[k] * (-phi[k]).exp())
        })
        .sum()
}

fn kernel_at(path: &HomotopyPath, t: f64, span: &FunctionSpan, measure: &QuadratureMeasure) -> Result<KernelMatrix> {
    Ok(kernel_matrix(&WeightedSpace::new(span, measure, weight_at(path, t))?))
}

/// `(K_{t+tau} - K_{t-tau}) / (2 tau)` entrywise.
pub fn kernel_fd(
    path: &HomotopyPath,
    t: f64,
    tau: f64,
    span: &FunctionSpan,
    measure: &QuadratureMeasure,
) -> Result<DMatrix<Complex64>> {
    if tau == 0.0 {
        return Err(Error::InvalidConfiguration("finite-difference step must be nonzero".into()));
    }
    let plus = kernel_at(path, t + tau, span, measure)?;
    let minus = kernel_at(path, t - tau, span, measure)?;
    Ok((plus.values - minus.values) / Complex64::new(2.0 * tau, 0.0))
}

/// Outcome of a bound check: `lhs <= bound` up to round-off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub lhs: f64,
    pub bound: f64,
    /// `K_t(z_i, z_i)`
    pub diagonal: f64,
}

impl BoundCheck {
    /// When the diagonal vanishes the left side must vanish too.
    pub fn holds(&self) -> bool {
        self.lhs <= self.bound + 1e-12 * (1.0 + self.diagonal)
    }
}

fn check_step(tau: f64) -> Result<()> {
    if tau == 0.0 || tau.abs() > 1.0 {
        return Err(Error::InvalidConfiguration(format!("step {tau} must satisfy 0 < |tau| <= 1")));
    }
    Ok(())
}

/// `|K_{t+tau}(z_i,z_i) - K_t(z_i,z_i)| / |tau| <= C_u K_t(z_i,z_i)`.
pub fn difference_quotient_bound_check(
    path: &HomotopyPath,
    t: f64,
    tau: f64,
    i: usize,
    span: &FunctionSpan,
    measure: &QuadratureMeasure,
) -> Result<BoundCheck> {
    node(difference_quotient_bounds(path, t, tau, span, measure)?, i)
}

/// [`difference_quotient_bound_check`] at every node.
pub fn difference_quotient_bounds(
    path: &HomotopyPath,
    t: f64,
    tau: f64,
    span: &FunctionSpan,
    measure: &QuadratureMeasure,
) -> Result<Vec<BoundCheck>> {
    check_step(tau)?;
    let k_t = WeightedSpace::new(span, measure, weight_at(path, t))?.kernel_diagonal();
    let k_tau = WeightedSpace::new(span, measure, weight_at(path, t + tau))?.kernel_diagonal();
    let c_u = path.bound_constant();
    Ok(k_t
        .iter()
        .zip(&k_tau)
        .map(|(&a, &b)| BoundCheck {
            lhs: ((b - a) / tau).abs(),
            bound: c_u * a,
            diagonal: a,
        })
        .collect())
}

/// `sum_k |K_{t+tau}(z_i,z_k) - K_t(z_i,z_k)|^2 w_k e^{-phi_t(z_k)} <= C_u |tau| K_t(z_i,z_i)`.
pub fn l2_difference_bound_check(
    path: &HomotopyPath,
    t: f64,
    tau: f64,
    i: usize,
    span: &FunctionSpan,
    measure: &QuadratureMeasure,
) -> Result<BoundCheck> {
    node(l2_difference_bounds(path, t, tau, span, measure)?, i)
}

/// [`l2_difference_bound_check`] at every node.
pub fn l2_difference_bounds(
    path: &HomotopyPath,
    t: f64,
    tau: f64,
    span: &FunctionSpan,
    measure: &QuadratureMeasure,
) -> Result<Vec<BoundCheck>> {
    check_step(tau)?;
    let phi_t = weight_at(path, t);
    let k_t = kernel_at(path, t, span, measure)?;
    let k_tau = kernel_at(path, t + tau, span, measure)?;
    let f: Vec<f64> = measure
        .masses()
        .iter()
        .zip(phi_t.values())
        .map(|(w, phi)| w * (-phi).exp())
        .collect();
    let c_u = path.bound_constant();
    Ok((0..k_t.n_nodes())
        .map(|i| {
            let lhs = (0..k_t.n_nodes())
                .map(|k| (k_tau.get(i, k) - k_t.get(i, k)).norm_sqr() * f[k])
                .sum();
            let diagonal = k_t.get(i, i).re;
            BoundCheck {
                lhs,
                bound: c_u * tau.abs() * diagonal,
                diagonal,
            }
        })
        .collect())
}

fn node(checks: Vec<BoundCheck>, i: usize) -> Result<BoundCheck> {
    let len = checks.len();
    checks
        .into_iter()
        .nth(i)
        .ok_or(Error::IndexOutOfRange { index: i, len })
}

/// `G(t)` and the three expressions for `G'(t)`, with a central-difference
/// estimate for cross-validation.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeReport {
    pub t: f64,
    pub g_value: f64,
    pub direct: f64,
    pub symmetric: f64,
    pub crossing: f64,
    pub fd_estimate: f64,
    pub fd_step: f64,
    /// Largest pairwise relative deviation among the three forms, measured
    /// against the magnitude of the summands.
    pub max_pairwise_dev: f64,
}

/// The three derivative expressions at one kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeForms {
    pub direct: f64,
    pub symmetric: f64,
    pub crossing: f64,
    /// Magnitude of the summands, used to normalize deviations.
    pub scale: f64,
}

impl DerivativeForms {
    pub fn max_pairwise_dev(&self) -> f64 {
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(self.scale).max(f64::MIN_POSITIVE);
        rel(self.direct, self.symmetric)
            .max(rel(self.symmetric, self.crossing))
            .max(rel(self.direct, self.crossing))
    }
}

pub fn derivative_forms(path: &HomotopyPath, rho: &[f64], space_t: &WeightedSpace<'_>) -> Result<DerivativeForms> {
    check_rho(path, rho)?;
    let k = kernel_matrix(space_t);
    let u = &path.direction;
    // f_j = w_j e^{-phi_t,j}
    let f: Vec<f64> = space_t
        .measure()
        .masses()
        .iter()
        .zip(space_t.weight().values())
        .map(|(w, phi)| w * (-phi).exp())
        .collect();
    let n = u.len();
    let mut first = 0.0;
    let mut scale = 0.0;
    for j in 0..n {
        let term = rho[j] * u[j] * k.get(j, j).re * f[j];
        first -= term;
        scale += term.abs();
    }
    let mut second = 0.0;
    let mut symmetric = 0.0;
    let mut crossing = 0.0;
    for j in 0..n {
        for l in 0..n {
            let kk = k.get(j, l).norm_sqr() * f[j] * f[l];
            second += rho[j] * u[l] * kk;
            symmetric += 0.5 * (rho[j] - rho[l]) * (u[l] - u[j]) * kk;
            if u[j] < 0.0 && u[l] >= 0.0 {
                crossing += (u[l] - u[j]) * kk;
            }
        }
    }
    Ok(DerivativeForms {
        direct: first + second,
        symmetric,
        crossing,
        scale,
    })
}

/// Central difference of `G` at `t` with step `tau`.
pub fn g_central_difference(
    path: &HomotopyPath,
    rho: &[f64],
    t: f64,
    tau: f64,
    span: &FunctionSpan,
    measure: &QuadratureMeasure,
) -> Result<f64> {
    if tau == 0.0 {
        return Err(Error::InvalidConfiguration("finite-difference step must be nonzero".into()));
    }
    let plus = g_of_t(path, rho, t + tau, span, measure)?;
    let minus = g_of_t(path, rho, t - tau, span, measure)?;
    Ok((plus - minus) / (2.0 * tau))
}

pub fn g_derivative_forms(
    path: &HomotopyPath,
    rho: &[f64],
    t: f64,
    tau: f64,
    span: &FunctionSpan,
    measure: &QuadratureMeasure,
) -> Result<DerivativeReport> {
    check_rho(path, rho)?;
    let space = WeightedSpace::new(span, measure, weight_at(path, t))?;
    let forms = derivative_forms(path, rho, &space)?;
    let b = space.density();
    let g_value = measure
        .masses()
        .iter()
        .zip(rho)
        .zip(&b.values)
        .map(|((w, r), b)| w * r * b)
        .sum();
    Ok(DerivativeReport {
        t,
        g_value,
        direct: forms.direct,
        symmetric: forms.symmetric,
        crossing: forms.crossing,
        fd_estimate: g_central_difference(path, rho, t, tau, span, measure)?,
        fd_step: tau,
        max_pairwise_dev: forms.max_pairwise_dev(),
    })
}

/// `(t, G(t))` on the path's grid with `rho = 1_{u<0}`.
pub fn monotonicity_sweep(
    path: &HomotopyPath,
    span: &FunctionSpan,
    measure: &QuadratureMeasure,
) -> Result<Vec<(f64, f64)>> {
    let rho = path.sublevel_indicator();
    path.t_grid
        .iter()
        .map(|&t| Ok((t, g_of_t(path, &rho, t, span, measure)?)))
        .collect()
}

/// Whether consecutive values never drop by more than [`MONOTONE_TOL`].
pub fn is_nondecreasing(curve: &[(f64, f64)]) -> bool {
    curve.windows(2).all(|w| w[1].1 >= w[0].1 - MONOTONE_TOL)
}

/// Convergence order `log(e_1 / e_2) / log(tau_1 / tau_2)` between two steps.
pub fn observed_order(err_coarse: f64, err_fine: f64, tau_coarse: f64, tau_fine: f64) -> f64 {
    (err_coarse / err_fine).ln() / (tau_coarse / tau_fine).ln()
}
