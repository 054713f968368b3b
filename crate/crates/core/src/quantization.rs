//! Semiclassical scaling of the density of states in one complex dimension.
//!
//! For a smooth strictly subharmonic weight, `k^{-1} B_{k phi}` approaches the
//! Monge-Ampere density `Delta phi / (4 pi)` in the interior as `k` grows. The
//! normalization is fixed by the Fock weight `|z|^2`, whose kernel
//! `(k/pi) e^{k z conj(zeta)}` gives `B = k/pi` and density `1/pi`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernel::{BergmanDensity, FunctionSpan, KernelEvaluator, WeightedSpace};
use crate::measure::{eval_weight, MeasureKind, QuadratureMeasure, WeightFamily, WeightFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensitySource {
    Analytic,
    FiniteDifference,
}

/// `Delta phi / (4 pi)` at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct MongeAmpereDensity {
    pub values: Vec<f64>,
    pub source: DensitySource,
}

fn closed_form(weight: &WeightFunction) -> Result<&WeightFamily> {
    weight.closed_form().ok_or_else(|| {
        Error::Unsupported("Monge-Ampere density needs a closed-form weight".into())
    })
}

pub fn ma_density(weight: &WeightFunction, measure: &QuadratureMeasure) -> Result<MongeAmpereDensity> {
    let family = closed_form(weight)?;
    let values = measure
        .nodes()
        .map(|z| family.laplacian_at(z).expect("closed form") / (4.0 * PI))
        .collect();
    Ok(MongeAmpereDensity {
        values,
        source: DensitySource::Analytic,
    })
}

/// Five-point Laplacian stencil of step `h` centred at each node.
pub fn ma_density_fd(weight: &WeightFunction, measure: &QuadratureMeasure, h: f64) -> Result<MongeAmpereDensity> {
    let family = closed_form(weight)?;
    if h.is_nan() || h <= 0.0 {
        return Err(Error::InvalidConfiguration(format!("stencil step {h} must be positive")));
    }
    let f = |z: Complex64| family.value_at(z).expect("closed form");
    let values = measure
        .nodes()
        .map(|z| {
            let dx = Complex64::new(h, 0.0);
            let dy = Complex64::new(0.0, h);
            let lap = (f(z + dx) + f(z - dx) + f(z + dy) + f(z - dy) - 4.0 * f(z)) / (h * h);
            lap / (4.0 * PI)
        })
        .collect();
    Ok(MongeAmpereDensity {
        values,
        source: DensitySource::FiniteDifference,
    })
}

/// Density of states for the weight `k phi` on a monomial span.
#[derive(Debug, Clone)]
pub struct ScaledBergman {
    pub k: f64,
    pub degree: usize,
    pub rank: usize,
    pub node_density: BergmanDensity,
    weight: WeightFamily,
    evaluator: KernelEvaluator,
}

impl ScaledBergman {
    /// `B_{k phi}(z)` at an arbitrary point.
    pub fn density_at(&self, z: Complex64) -> f64 {
        let phi = self.weight.value_at(z).expect("closed form");
        self.evaluator.diagonal_at(z) * (-phi).exp()
    }

    pub fn kernel_at(&self, z: Complex64, zeta: Complex64) -> Complex64 {
        self.evaluator.kernel_at(z, zeta)
    }
}

fn disk_radius(measure: &QuadratureMeasure) -> Result<f64> {
    match measure.kind() {
        MeasureKind::DiskProduct { radius, .. } => Ok(radius),
        MeasureKind::Discrete => Err(Error::InvalidConfiguration(
            "scaling studies need a disk-product measure".into(),
        )),
    }
}

pub fn scaled_bergman(phi: &WeightFamily, k: f64, degree: usize, measure: &QuadratureMeasure) -> Result<ScaledBergman> {
    disk_radius(measure)?;
    if !phi.is_closed_form() {
        return Err(Error::Unsupported("scaling studies need a closed-form weight".into()));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidConfiguration(format!("scale k = {k} must be positive")));
    }
    let exactness = measure.exactness_degree().unwrap_or(0);
    if exactness < 2 * degree {
        return Err(Error::InvalidConfiguration(format!(
            "degree {degree} needs quadrature exactness {}, rule has {exactness}",
            2 * degree
        )));
    }
    let family = phi.scaled(k);
    let weight = eval_weight(&family, measure)?;
    let span = FunctionSpan::monomials(degree, measure);
    let space = WeightedSpace::new(&span, measure, weight)?;
    Ok(ScaledBergman {
        k,
        degree,
        rank: space.rank(),
        node_density: space.density(),
        weight: family,
        evaluator: space.evaluator().expect("monomial span"),
    })
}

/// Truncation degree as a function of `k`: `ceil(factor k R^2)`, capped so
/// that the quadrature still integrates the Gram matrix exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegreeRule {
    pub factor: f64,
}

impl Default for DegreeRule {
    fn default() -> Self {
        Self { factor: 1.5 }
    }
}

impl DegreeRule {
    pub fn degree(&self, k: f64, radius: f64, exactness: usize) -> usize {
        let wanted = (self.factor * k * radius * radius).ceil() as usize;
        wanted.min(exactness / 2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub k: f64,
    pub degree: usize,
    /// Node indices with `|z| <= interior_radius` and positive curvature.
    pub eval_points: Vec<usize>,
    /// Interior nodes where `Delta phi <= 0`.
    pub skipped: Vec<usize>,
    /// `k^{-1} B_{k phi}(z_j) / (Delta phi(z_j) / (4 pi))`
    pub ratios: Vec<f64>,
    /// Raw `B_{k phi}(z_j)` at the evaluation points.
    pub densities: Vec<f64>,
    pub max_abs_dev: Option<f64>,
    pub mean_abs_dev: Option<f64>,
    /// The same ratio at `z = 0`, when the curvature there is positive.
    pub origin_ratio: Option<f64>,
}

pub fn tcz_convergence_report(
    phi: &WeightFamily,
    k_list: &[f64],
    rule: DegreeRule,
    measure: &QuadratureMeasure,
    interior_radius: f64,
) -> Result<Vec<ScalingReport>> {
    let radius = disk_radius(measure)?;
    let exactness = measure.exactness_degree().unwrap_or(0);
    let base = eval_weight(phi, measure)?;
    let ma = ma_density(&base, measure)?;
    let interior: Vec<usize> = measure
        .points()
        .iter()
        .filter(|p| p.z().norm() <= interior_radius)
        .map(|p| p.index)
        .collect();
    let (eval_points, skipped): (Vec<usize>, Vec<usize>) = interior.iter().partition(|&&j| ma.values[j] > 0.0);
    let origin = Complex64::new(0.0, 0.0);
    let ma_origin = phi.laplacian_at(origin).expect("closed form") / (4.0 * PI);
    k_list
        .iter()
        .map(|&k| {
            let degree = rule.degree(k, radius, exactness);
            let (densities, origin_ratio) = if eval_points.is_empty() && ma_origin <= 0.0 {
                (Vec::new(), None)
            } else {
                let scaled = scaled_bergman(phi, k, degree, measure)?;
                let densities: Vec<f64> = eval_points.iter().map(|&j| scaled.node_density.values[j]).collect();
                let origin_ratio = (ma_origin > 0.0).then(|| scaled.density_at(origin) / k / ma_origin);
                (densities, origin_ratio)
            };
            let ratios: Vec<f64> = eval_points
                .iter()
                .zip(&densities)
                .map(|(&j, b)| b / k / ma.values[j])
                .collect();
            let devs: Vec<f64> = ratios.iter().map(|r| (r - 1.0).abs()).collect();
            let max_abs_dev = devs.iter().copied().reduce(f64::max);
            let mean_abs_dev = (!devs.is_empty()).then(|| devs.iter().sum::<f64>() / devs.len() as f64);
            Ok(ScalingReport {
                k,
                degree,
                eval_points: eval_points.clone(),
                skipped: skipped.clone(),
                ratios,
                densities,
                max_abs_dev,
                mean_abs_dev,
                origin_ratio,
            })
        })
        .collect()
}

/// `pi k^{-1} B_{k|z|^2}(0)` for the constant-only contribution on a disk of
/// radius `R`: `1 / (1 - e^{-k R^2})`.
pub fn fock_origin_ratio(k: f64, radius: f64) -> f64 {
    1.0 / (1.0 - (-k * radius * radius).exp())
}
