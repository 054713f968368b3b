//! Comparison of Bergman densities for two weights on the same span.
//!
//! For weights `phi`, `psi` and the sublevel set `S = {psi < phi + c}`,
//! `sum_{S} w_j B_phi(z_j) <= sum_{S} w_j B_psi(z_j)`. On a finite node set
//! every weight is bounded, so the less-singular hypothesis is automatic.

use crate::error::{Error, Result};
use crate::kernel::{BergmanDensity, FunctionSpan, WeightedSpace};
use crate::measure::{QuadratureMeasure, WeightFunction};

/// Relative slack allowed on `lhs <= rhs`.
pub const COMPARISON_TOL: f64 = 1e-12;
/// Margin above which an inequality counts as strict.
pub const STRICTNESS_MARGIN: f64 = 1e-10;

/// `{j : psi_j < phi_j + c}`. Ties are excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct SublevelSet {
    indices: Vec<usize>,
    shift: f64,
    n_nodes: usize,
}

impl SublevelSet {
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// `empty != S != X`
    pub fn is_proper(&self) -> bool {
        !self.indices.is_empty() && self.indices.len() < self.n_nodes
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.binary_search(&j).is_ok()
    }

    /// The characteristic function of the set.
    pub fn indicator(&self) -> Vec<f64> {
        let mut rho = vec![0.0; self.n_nodes];
        for &j in &self.indices {
            rho[j] = 1.0;
        }
        rho
    }
}

fn same_len(a: &WeightFunction, b: &WeightFunction) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(())
}

pub fn sublevel_set(phi: &WeightFunction, psi: &WeightFunction, c: f64) -> Result<SublevelSet> {
    same_len(phi, psi)?;
    let indices = phi
        .values()
        .iter()
        .zip(psi.values())
        .enumerate()
        .filter(|(_, (f, p))| **p < **f + c)
        .map(|(j, _)| j)
        .collect();
    Ok(SublevelSet {
        indices,
        shift: c,
        n_nodes: phi.len(),
    })
}

/// Both sides of the comparison inequality on one sublevel set.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub shift: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub set_size: usize,
    pub set_proper: bool,
    /// The setting guarantees strict inequality: proper set, holomorphic
    /// span, measure discretizing a domain.
    pub strict_expected: bool,
    pub rank_phi: usize,
    pub rank_psi: usize,
}

impl ComparisonReport {
    /// `lhs <= rhs + tol (1 + rhs)`
    pub fn holds(&self) -> bool {
        self.margin >= -COMPARISON_TOL * (1.0 + self.rhs)
    }
}

/// Densities of both weights on a shared span and measure.
#[derive(Debug, Clone)]
pub struct DensityPair<'a> {
    pub phi: WeightedSpace<'a>,
    pub psi: WeightedSpace<'a>,
    pub b_phi: BergmanDensity,
    pub b_psi: BergmanDensity,
}

impl<'a> DensityPair<'a> {
    pub fn new(
        phi: &WeightFunction,
        psi: &WeightFunction,
        span: &'a FunctionSpan,
        measure: &'a QuadratureMeasure,
    ) -> Result<Self> {
        same_len(phi, psi)?;
        let phi = WeightedSpace::new(span, measure, phi.clone())?;
        let psi = WeightedSpace::new(span, measure, psi.clone())?;
        let b_phi = phi.density();
        let b_psi = psi.density();
        Ok(Self { phi, psi, b_phi, b_psi })
    }

    pub fn report(&self, c: f64) -> ComparisonReport {
        let set = sublevel_set(self.phi.weight(), self.psi.weight(), c)
            .expect("weights share a measure");
        self.report_on(&set)
    }

    pub fn report_on(&self, set: &SublevelSet) -> ComparisonReport {
        let measure = self.phi.measure();
        let lhs = self.b_phi.integral_over(measure, set.indices());
        let rhs = self.b_psi.integral_over(measure, set.indices());
        let span = self.phi.span();
        ComparisonReport {
            shift: set.shift(),
            lhs,
            rhs,
            margin: rhs - lhs,
            set_size: set.len(),
            set_proper: set.is_proper(),
            strict_expected: set.is_proper()
                && span.is_holomorphic()
                && measure.is_domain_discretization(),
            rank_phi: self.phi.rank(),
            rank_psi: self.psi.rank(),
        }
    }
}

pub fn comparison_integrals(
    phi: &WeightFunction,
    psi: &WeightFunction,
    span: &FunctionSpan,
    measure: &QuadratureMeasure,
    c: f64,
) -> Result<ComparisonReport> {
    Ok(DensityPair::new(phi, psi, span, measure)?.report(c))
}

/// One report per shift, in the order of `c_grid`.
pub fn shifted_comparison_sweep(
    phi: &WeightFunction,
    psi: &WeightFunction,
    span: &FunctionSpan,
    measure: &QuadratureMeasure,
    c_grid: &[f64],
) -> Result<Vec<ComparisonReport>> {
    let pair = DensityPair::new(phi, psi, span, measure)?;
    Ok(c_grid.iter().map(|&c| pair.report(c)).collect())
}

/// `psi_0 = phi + min(psi - phi, 0)`, evaluated as `min(phi, psi)` so that
/// `psi_0 = psi` holds exactly on `{psi < phi}`.
pub fn reduce_less_singular(phi: &WeightFunction, psi: &WeightFunction) -> Result<WeightFunction> {
    same_len(phi, psi)?;
    WeightFunction::tabulated(
        phi.values()
            .iter()
            .zip(psi.values())
            .map(|(f, p)| if p < f { *p } else { *f })
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SandwichLink {
    /// `int_{psi<phi} B_phi <= int_{psi0<phi} B_psi0`
    Reduced,
    /// `int_{psi0<phi} B_psi0 <= int_{psi<phi} B_psi`
    Monotone,
}

/// The chain `lhs <= middle <= rhs` through the reduced weight `psi_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SandwichReport {
    pub lhs: f64,
    pub middle: f64,
    pub rhs: f64,
    /// `{psi_0 < phi} == {psi < phi}`
    pub sets_agree: bool,
}

impl SandwichReport {
    pub fn failing_link(&self) -> Option<SandwichLink> {
        if self.middle - self.lhs < -COMPARISON_TOL * (1.0 + self.middle) {
            Some(SandwichLink::Reduced)
        } else if self.rhs - self.middle < -COMPARISON_TOL * (1.0 + self.rhs) {
            Some(SandwichLink::Monotone)
        } else {
            None
        }
    }

    pub fn holds(&self) -> bool {
        self.sets_agree && self.failing_link().is_none()
    }
}

pub fn sandwich_check(
    phi: &WeightFunction,
    psi: &WeightFunction,
    span: &FunctionSpan,
    measure: &QuadratureMeasure,
) -> Result<SandwichReport> {
    let psi0 = reduce_less_singular(phi, psi)?;
    let set = sublevel_set(phi, psi, 0.0)?;
    let set0 = sublevel_set(phi, &psi0, 0.0)?;
    let b_phi = WeightedSpace::new(span, measure, phi.clone())?.density();
    let b_psi0 = WeightedSpace::new(span, measure, psi0)?.density();
    let b_psi = WeightedSpace::new(span, measure, psi.clone())?.density();
    Ok(SandwichReport {
        lhs: b_phi.integral_over(measure, set.indices()),
        middle: b_psi0.integral_over(measure, set0.indices()),
        rhs: b_psi.integral_over(measure, set.indices()),
        sets_agree: set == set0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrictnessVerdict {
    Strict,
    EqualBothZero,
    /// Strictness is not guaranteed in this setting and was not observed.
    NotApplicable,
    /// Strictness was guaranteed but the margin stayed below threshold.
    Violated,
}

impl StrictnessVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Strict => "strict",
            Self::EqualBothZero => "equal-both-zero",
            Self::NotApplicable => "not-applicable",
            Self::Violated => "violated",
        }
    }
}

pub fn strictness_check(report: &ComparisonReport, kernel_psi_nontrivial: bool) -> StrictnessVerdict {
    let zero_scale = COMPARISON_TOL * (1.0 + report.rhs);
    if report.lhs.abs() <= zero_scale && report.rhs.abs() <= zero_scale {
        StrictnessVerdict::EqualBothZero
    } else if report.margin > STRICTNESS_MARGIN {
        StrictnessVerdict::Strict
    } else if report.strict_expected && kernel_psi_nontrivial && report.rhs > 0.0 {
        StrictnessVerdict::Violated
    } else {
        StrictnessVerdict::NotApplicable
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Premise {
    /// `B_phi >= B_psi` on Omega
    DensityDominates,
    /// `phi <= psi` off Omega
    BoundaryOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxPrincipleVerdict {
    PremisesFail { node: usize, premise: Premise },
    ConclusionHolds,
    Counterexample { node: usize },
}

/// Maximum principle for densities: if `B_phi >= B_psi` on `omega`,
/// `omega` is not everything, and `phi <= psi` off `omega`, then
/// `phi <= psi` everywhere.
pub fn max_principle_check(
    phi: &WeightFunction,
    psi: &WeightFunction,
    omega: &[usize],
    span: &FunctionSpan,
    measure: &QuadratureMeasure,
) -> Result<MaxPrincipleVerdict> {
    let pair = DensityPair::new(phi, psi, span, measure)?;
    max_principle_from_densities(phi, psi, omega, &pair.b_phi, &pair.b_psi)
}

/// Same as [`max_principle_check`] with the densities already computed.
pub fn max_principle_from_densities(
    phi: &WeightFunction,
    psi: &WeightFunction,
    omega: &[usize],
    b_phi: &BergmanDensity,
    b_psi: &BergmanDensity,
) -> Result<MaxPrincipleVerdict> {
    same_len(phi, psi)?;
    let n = phi.len();
    let mut in_omega = vec![false; n];
    for &j in omega {
        if j >= n {
            return Err(Error::IndexOutOfRange { index: j, len: n });
        }
        in_omega[j] = true;
    }
    if in_omega.iter().all(|&b| b) {
        return Err(Error::OmegaCoversSpace);
    }
    let (f, p) = (phi.values(), psi.values());
    for j in 0..n {
        if in_omega[j] {
            let (bf, bp) = (b_phi.values[j], b_psi.values[j]);
            if bf < bp - COMPARISON_TOL * (1.0 + bp) {
                return Ok(MaxPrincipleVerdict::PremisesFail {
                    node: j,
                    premise: Premise::DensityDominates,
                });
            }
        } else if f[j] > p[j] {
            return Ok(MaxPrincipleVerdict::PremisesFail {
                node: j,
                premise: Premise::BoundaryOrder,
            });
        }
    }
    match (0..n).find(|&j| f[j] > p[j]) {
        Some(node) => Ok(MaxPrincipleVerdict::Counterexample { node }),
        None => Ok(MaxPrincipleVerdict::ConclusionHolds),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{build_discrete_measure, build_disk_measure, eval_weight, WeightFamily};
    use approx::assert_relative_eq;
    use std::f64::consts::E;

    fn tab(v: &[f64]) -> WeightFunction {
        WeightFunction::tabulated(v.to_vec()).unwrap()
    }

    fn two_node() -> (QuadratureMeasure, FunctionSpan) {
        let m = build_discrete_measure(&[(0.0, 0.0), (1.0, 0.0)], &[1.0, 1.0]).unwrap();
        let span = FunctionSpan::monomials(0, &m);
        (m, span)
    }

    #[test]
    fn sublevel_examples() {
        let phi = tab(&[0.0, 0.0]);
        assert!(sublevel_set(&phi, &phi, 0.0).unwrap().is_empty());
        let lower = tab(&[-1.0, -1.0]);
        assert_eq!(sublevel_set(&phi, &lower, 0.0).unwrap().indices(), &[0, 1]);
        let s = sublevel_set(&phi, &tab(&[-1.0, 1.0]), 0.0).unwrap();
        assert_eq!(s.indices(), &[0]);
        assert!(s.is_proper());
        assert_eq!(s.indicator(), vec![1.0, 0.0]);
    }

    #[test]
    fn two_node_reference_instance() {
        let (m, span) = two_node();
        let r = comparison_integrals(&tab(&[0.0, 0.0]), &tab(&[-1.0, 1.0]), &span, &m, 0.0).unwrap();
        // K_psi = 1 / (e + e^{-1}), B_psi(z_0) = e / (e + e^{-1})
        let rhs = E / (E + 1.0 / E);
        assert_relative_eq!(r.lhs, 0.5, max_relative = 1e-12);
        assert_relative_eq!(r.rhs, rhs, max_relative = 1e-12);
        assert_relative_eq!(r.margin, rhs - 0.5, max_relative = 1e-12);
        assert!((r.margin - 0.380797).abs() < 1e-6);
        assert_eq!(r.set_size, 1);
        assert!(r.set_proper);
        assert!(!r.strict_expected);
        assert_eq!(strictness_check(&r, true), StrictnessVerdict::Strict);
    }

    #[test]
    fn full_and_empty_sets() {
        let m = build_disk_measure(1.0, 4, 8).unwrap();
        let span = FunctionSpan::monomials(3, &m);
        let phi = eval_weight(&WeightFamily::Gauss { a: 1.0 }, &m).unwrap();
        let full = comparison_integrals(&phi, &phi.shifted(-1.0), &span, &m, 0.0).unwrap();
        assert_relative_eq!(full.lhs, 4.0, max_relative = 1e-9);
        assert_relative_eq!(full.rhs, 4.0, max_relative = 1e-9);
        let empty = comparison_integrals(&phi, &phi, &span, &m, 0.0).unwrap();
        assert_eq!((empty.lhs, empty.rhs, empty.set_size), (0.0, 0.0, 0));
        assert_eq!(strictness_check(&empty, true), StrictnessVerdict::EqualBothZero);
    }

    #[test]
    fn reduction_examples() {
        let phi = tab(&[0.0, 0.0]);
        assert_eq!(reduce_less_singular(&phi, &tab(&[-1.0, 1.0])).unwrap().values(), &[-1.0, 0.0]);
        assert_eq!(reduce_less_singular(&phi, &tab(&[0.5, 1.0])).unwrap().values(), &[0.0, 0.0]);
        assert_eq!(reduce_less_singular(&phi, &tab(&[-0.5, -1.0])).unwrap().values(), &[-0.5, -1.0]);
        let psi0 = reduce_less_singular(&phi, &tab(&[-1.0, 1.0])).unwrap();
        assert_eq!(reduce_less_singular(&phi, &psi0).unwrap(), psi0);
    }

    #[test]
    fn sandwich_two_node_and_equal() {
        let (m, span) = two_node();
        let s = sandwich_check(&tab(&[0.0, 0.0]), &tab(&[-1.0, 1.0]), &span, &m).unwrap();
        assert!(s.holds(), "{s:?}");
        // psi_0 = (-1, 0): K = 1/(e + 1), B_psi0(z_0) = e/(e+1)
        assert_relative_eq!(s.middle, E / (E + 1.0), max_relative = 1e-12);
        let phi = tab(&[0.3, -0.2]);
        let s = sandwich_check(&phi, &phi, &span, &m).unwrap();
        assert_eq!((s.lhs, s.middle, s.rhs), (0.0, 0.0, 0.0));
        assert!(s.holds());
    }

    #[test]
    fn sandwich_reports_failing_link() {
        let r = SandwichReport {
            lhs: 1.0,
            middle: 0.5,
            rhs: 2.0,
            sets_agree: true,
        };
        assert_eq!(r.failing_link(), Some(SandwichLink::Reduced));
        let r = SandwichReport {
            lhs: 0.1,
            middle: 0.5,
            rhs: 0.2,
            sets_agree: true,
        };
        assert_eq!(r.failing_link(), Some(SandwichLink::Monotone));
    }

    #[test]
    fn sweep_two_node() {
        let (m, span) = two_node();
        let phi = tab(&[0.0, 0.0]);
        let psi = tab(&[-1.0, 1.0]);
        let reports = shifted_comparison_sweep(&phi, &psi, &span, &m, &[-2.0, -1.0, 0.0, 1.0, 2.0]).unwrap();
        let sizes: Vec<usize> = reports.iter().map(|r| r.set_size).collect();
        // ties at c = -1 and c = 1 are excluded
        assert_eq!(sizes, vec![0, 0, 1, 1, 2]);
        assert!(reports.iter().all(ComparisonReport::holds));
        assert_relative_eq!(reports[4].lhs, 1.0, max_relative = 1e-12);
        assert_relative_eq!(reports[4].rhs, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn disk_strictness() {
        let m = build_disk_measure(1.0, 10, 24).unwrap();
        let span = FunctionSpan::monomials(10, &m);
        let phi = eval_weight(&WeightFamily::Constant { c: 0.0 }, &m).unwrap();
        let psi = eval_weight(&WeightFamily::Harmonic { b: 0.5 }, &m).unwrap();
        let r = comparison_integrals(&phi, &psi, &span, &m, 0.0).unwrap();
        assert!(r.set_proper && r.strict_expected);
        assert_eq!(strictness_check(&r, true), StrictnessVerdict::Strict);
        assert!(r.margin > STRICTNESS_MARGIN);
    }

    #[test]
    fn strictness_verdicts_without_margin() {
        let base = ComparisonReport {
            shift: 0.0,
            lhs: 1.0,
            rhs: 1.0,
            margin: 0.0,
            set_size: 2,
            set_proper: true,
            strict_expected: true,
            rank_phi: 2,
            rank_psi: 2,
        };
        assert_eq!(strictness_check(&base, true), StrictnessVerdict::Violated);
        assert_eq!(strictness_check(&base, false), StrictnessVerdict::NotApplicable);
        let discrete = ComparisonReport {
            strict_expected: false,
            ..base
        };
        assert_eq!(strictness_check(&discrete, true), StrictnessVerdict::NotApplicable);
    }

    #[test]
    fn max_principle_examples() {
        let m = build_disk_measure(1.0, 3, 6).unwrap();
        let span = FunctionSpan::monomials(2, &m);
        let phi = eval_weight(&WeightFamily::Gauss { a: 0.4 }, &m).unwrap();
        let omega: Vec<usize> = (0..9).collect();
        assert_eq!(
            max_principle_check(&phi, &phi, &omega, &span, &m).unwrap(),
            MaxPrincipleVerdict::ConclusionHolds
        );
        let lower = phi.shifted(-1.0);
        let v = max_principle_check(&lower, &phi, &omega, &span, &m).unwrap();
        assert_ne!(v, MaxPrincipleVerdict::Counterexample { node: 0 });
        assert!(!matches!(v, MaxPrincipleVerdict::Counterexample { .. }));
        let all: Vec<usize> = (0..m.len()).collect();
        assert_eq!(
            max_principle_check(&phi, &phi, &all, &span, &m),
            Err(Error::OmegaCoversSpace)
        );
        assert!(matches!(
            max_principle_check(&phi, &phi, &[1000], &span, &m),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn max_principle_detects_boundary_premise() {
        let (m, span) = two_node();
        let v = max_principle_check(&tab(&[0.0, 1.0]), &tab(&[0.0, 0.0]), &[0], &span, &m).unwrap();
        assert_eq!(
            v,
            MaxPrincipleVerdict::PremisesFail {
                node: 1,
                premise: Premise::BoundaryOrder
            }
        );
    }
}
