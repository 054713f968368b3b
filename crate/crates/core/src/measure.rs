//! Discrete measure spaces `(X, mu)` and weights tabulated on them.
//!
//! Every computation in this crate treats the quadrature rule itself as the
//! measure space. A disk-product rule is only an approximation of Lebesgue
//! measure when continuum limits are being studied.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A node of a measure space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub re: f64,
    pub im: f64,
    pub index: usize,
}

impl Point {
    pub fn z(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasureKind {
    Discrete,
    DiskProduct {
        radius: f64,
        n_radial: usize,
        n_angular: usize,
    },
}

/// Nodes in the complex plane carrying strictly positive masses.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureMeasure {
    points: Vec<Point>,
    masses: Vec<f64>,
    kind: MeasureKind,
    exactness_degree: Option<usize>,
}

impl QuadratureMeasure {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    /// Highest total degree `a + b` for which `z^a conj(z)^b` is integrated
    /// exactly. `None` for discrete measures.
    pub fn exactness_degree(&self) -> Option<usize> {
        self.exactness_degree
    }

    pub fn is_domain_discretization(&self) -> bool {
        matches!(self.kind, MeasureKind::DiskProduct { .. })
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn nodes(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.points.iter().map(Point::z)
    }

    /// `sum_j w_j z_j^a conj(z_j)^b`.
    pub fn moment(&self, a: u32, b: u32) -> Complex64 {
        self.points
            .iter()
            .zip(&self.masses)
            .map(|(p, &w)| {
                let z = p.z();
                z.powu(a) * z.conj().powu(b) * w
            })
            .sum()
    }

    /// `sum_{j in indices} w_j f_j`.
    pub fn integrate_over(&self, values: &[f64], indices: &[usize]) -> f64 {
        indices.iter().fold(0.0, |acc, &j| acc + self.masses[j] * values[j])
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.masses.iter().zip(values).fold(0.0, |acc, (w, v)| acc + w * v)
    }
}

/// Arbitrary finite point set with masses. Duplicate coordinates are allowed;
/// they receive distinct indices.
pub fn build_discrete_measure(points: &[(f64, f64)], masses: &[f64]) -> Result<QuadratureMeasure> {
    if points.is_empty() {
        return Err(Error::InvalidMeasure("at least one point is required".into()));
    }
    if points.len() != masses.len() {
        return Err(Error::InvalidMeasure(format!(
            "{} points but {} masses",
            points.len(),
            masses.len()
        )));
    }
    for (j, (&(re, im), &w)) in points.iter().zip(masses).enumerate() {
        if !(re.is_finite() && im.is_finite()) {
            return Err(Error::InvalidMeasure(format!("point {j} has non-finite coordinates")));
        }
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::InvalidMeasure(format!("mass {w} at point {j} is not positive")));
        }
    }
    let points = points
        .iter()
        .enumerate()
        .map(|(index, &(re, im))| Point { re, im, index })
        .collect();
    Ok(QuadratureMeasure {
        points,
        masses: masses.to_vec(),
        kind: MeasureKind::Discrete,
        exactness_degree: None,
    })
}

/// Product rule on the disk `|z| <= radius`: Gauss-Legendre in `s = r^2` on
/// `[0, radius^2]` times equispaced angles.
///
/// Area is `r dr dtheta = ds dtheta / 2`, so node masses are
/// `pi * W_i / n_angular` for Gauss weights `W_i` on `[0, radius^2]`.
pub fn build_disk_measure(radius: f64, n_radial: usize, n_angular: usize) -> Result<QuadratureMeasure> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidMeasure(format!("radius {radius} must be positive")));
    }
    if n_radial == 0 || n_angular == 0 {
        return Err(Error::InvalidMeasure(
            "n_radial and n_angular must both be at least 1".into(),
        ));
    }
    let r2 = radius * radius;
    let (s_nodes, s_weights) = gauss_legendre(n_radial);
    let mut points = Vec::with_capacity(n_radial * n_angular);
    let mut masses = Vec::with_capacity(n_radial * n_angular);
    for (x, wx) in s_nodes.iter().zip(&s_weights) {
        let s = 0.5 * r2 * (x + 1.0);
        let r = s.sqrt();
        let mass = PI * 0.5 * r2 * wx / n_angular as f64;
        for k in 0..n_angular {
            let theta = 2.0 * PI * k as f64 / n_angular as f64;
            let index = points.len();
            points.push(Point {
                re: r * theta.cos(),
                im: r * theta.sin(),
                index,
            });
            masses.push(mass);
        }
    }
    Ok(QuadratureMeasure {
        points,
        masses,
        kind: MeasureKind::DiskProduct {
            radius,
            n_radial,
            n_angular,
        },
        exactness_degree: Some((2 * n_radial - 1).min(n_angular - 1)),
    })
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
        nodes[i] = -x;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Declarative description of a weight `phi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WeightFamily {
    /// `phi = c`
    Constant { c: f64 },
    /// `phi = a |z|^2`
    Gauss { a: f64 },
    /// `phi = sum_m coeffs[m] |z|^(2m)`
    RadialPoly { coeffs: Vec<f64> },
    /// `phi = b Re(z^2)`
    Harmonic { b: f64 },
    /// Values given node by node.
    Tabulated { values: Vec<f64> },
}

impl WeightFamily {
    pub fn value_at(&self, z: Complex64) -> Option<f64> {
        let r2 = z.norm_sqr();
        match self {
            Self::Constant { c } => Some(*c),
            Self::Gauss { a } => Some(a * r2),
            Self::RadialPoly { coeffs } => Some(coeffs.iter().rev().fold(0.0, |acc, a| acc * r2 + a)),
            Self::Harmonic { b } => Some(b * (z * z).re),
            Self::Tabulated { .. } => None,
        }
    }

    /// Closed-form Laplacian `(d^2/dx^2 + d^2/dy^2) phi`.
    pub fn laplacian_at(&self, z: Complex64) -> Option<f64> {
        let r2 = z.norm_sqr();
        match self {
            Self::Constant { .. } | Self::Harmonic { .. } => Some(0.0),
            Self::Gauss { a } => Some(4.0 * a),
            // Delta r^(2m) = 4 m^2 r^(2m-2)
            Self::RadialPoly { coeffs } => Some(
                coeffs
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(m, a)| 4.0 * (m * m) as f64 * a * r2.powi(m as i32 - 1))
                    .sum(),
            ),
            Self::Tabulated { .. } => None,
        }
    }

    pub fn is_closed_form(&self) -> bool {
        !matches!(self, Self::Tabulated { .. })
    }

    /// The family of `k * phi`.
    pub fn scaled(&self, k: f64) -> Self {
        match self {
            Self::Constant { c } => Self::Constant { c: k * c },
            Self::Gauss { a } => Self::Gauss { a: k * a },
            Self::RadialPoly { coeffs } => Self::RadialPoly {
                coeffs: coeffs.iter().map(|a| k * a).collect(),
            },
            Self::Harmonic { b } => Self::Harmonic { b: k * b },
            Self::Tabulated { values } => Self::Tabulated {
                values: values.iter().map(|v| k * v).collect(),
            },
        }
    }
}

/// A weight tabulated at every node of a measure, optionally remembering the
/// closed form it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFunction {
    values: Vec<f64>,
    closed_form: Option<WeightFamily>,
}

impl WeightFunction {
    pub fn tabulated(values: Vec<f64>) -> Result<Self> {
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteWeight { node });
        }
        Ok(Self {
            values,
            closed_form: None,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn closed_form(&self) -> Option<&WeightFamily> {
        self.closed_form.as_ref()
    }

    /// Family that reproduces this weight under [`eval_weight`].
    pub fn family(&self) -> WeightFamily {
        self.closed_form.clone().unwrap_or_else(|| WeightFamily::Tabulated {
            values: self.values.clone(),
        })
    }

    pub fn value_at(&self, z: Complex64) -> Option<f64> {
        self.closed_form.as_ref().and_then(|f| f.value_at(z))
    }

    pub fn laplacian_at(&self, z: Complex64) -> Option<f64> {
        self.closed_form.as_ref().and_then(|f| f.laplacian_at(z))
    }

    /// `e^{-phi_j}` at every node.
    pub fn exp_neg(&self) -> Vec<f64> {
        self.values.iter().map(|v| (-v).exp()).collect()
    }

    /// `phi + c`. A closed form survives when the family can express it.
    pub fn shifted(&self, c: f64) -> Self {
        let closed_form = match &self.closed_form {
            Some(WeightFamily::Constant { c: c0 }) => Some(WeightFamily::Constant { c: c0 + c }),
            Some(WeightFamily::Gauss { a }) => Some(WeightFamily::RadialPoly { coeffs: vec![c, *a] }),
            Some(WeightFamily::RadialPoly { coeffs }) => {
                let mut coeffs = if coeffs.is_empty() { vec![0.0] } else { coeffs.clone() };
                coeffs[0] += c;
                Some(WeightFamily::RadialPoly { coeffs })
            }
            _ => None,
        };
        Self {
            values: self.values.iter().map(|v| v + c).collect(),
            closed_form,
        }
    }

    /// `k * phi`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| k * v).collect(),
            closed_form: self.closed_form.as_ref().map(|f| f.scaled(k)),
        }
    }
}

/// Tabulate a weight family at the nodes of `measure`.
pub fn eval_weight(family: &WeightFamily, measure: &QuadratureMeasure) -> Result<WeightFunction> {
    match family {
        WeightFamily::Tabulated { values } => {
            if values.len() != measure.len() {
                return Err(Error::DimensionMismatch {
                    expected: measure.len(),
                    actual: values.len(),
                });
            }
            WeightFunction::tabulated(values.clone())
        }
        closed => {
            let values: Vec<f64> = measure
                .nodes()
                .map(|z| closed.value_at(z).expect("closed form"))
                .collect();
            if let Some(node) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteWeight { node });
            }
            Ok(WeightFunction {
                values,
                closed_form: Some(closed.clone()),
            })
        }
    }
}
