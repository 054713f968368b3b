//! Kernel quantities checked against independent computations: direct
//! sums and a Cholesky solve of the normal equations, closed forms on the
//! disk and in one dimension.

use std::f64::consts::{E, PI};

use bergman_core::comparison::comparison_integrals;
use bergman_core::homotopy::{g_of_t, kernel_derivative_matrix, kernel_fd, weight_at, HomotopyPath};
use bergman_core::kernel::{kernel_matrix, reproducing_residual, FunctionSpan, WeightedSpace};
use bergman_core::measure::{build_discrete_measure, build_disk_measure, eval_weight, WeightFamily, WeightFunction};
use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Raw {
    points: Vec<(f64, f64)>,
    masses: Vec<f64>,
    phi: Vec<f64>,
    values: DMatrix<Complex64>,
}

fn random_raw(seed: u64, n: usize, d: usize) -> Raw {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Raw {
        points: (0..n).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect(),
        masses: (0..n).map(|_| rng.random_range(0.1f64.ln()..10f64.ln()).exp()).collect(),
        phi: (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
        values: DMatrix::from_fn(n, d, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))),
    }
}

/// Gram matrix by explicit loops.
fn direct_gram(raw: &Raw) -> DMatrix<Complex64> {
    let (n, d) = raw.values.shape();
    DMatrix::from_fn(d, d, |a, b| {
        (0..n)
            .map(|j| raw.values[(j, a)].conj() * raw.values[(j, b)] * (raw.masses[j] * (-raw.phi[j]).exp()))
            .sum()
    })
}

/// `sup_h |h(z_j)|^2 / ||h||^2 = v* G^{-1} v` with `v_a = conj(V_{ja})`,
/// attained by `h = sum_a c_a V_a` with `G c = v`.
fn extremal_oracle(raw: &Raw, j: usize) -> (f64, DVector<Complex64>) {
    let g = direct_gram(raw);
    let v = DVector::from_iterator(raw.values.ncols(), raw.values.row(j).iter().map(|x| x.conj()));
    let c = Cholesky::new(g).expect("full rank").solve(&v);
    let value: Complex64 = v.iter().zip(c.iter()).map(|(a, b)| a.conj() * b).sum();
    (value.re, c)
}

fn norm_sq(raw: &Raw, coeffs: &DVector<Complex64>) -> f64 {
    let h = &raw.values * coeffs;
    h.iter()
        .enumerate()
        .map(|(j, x)| x.norm_sqr() * raw.masses[j] * (-raw.phi[j]).exp())
        .sum()
}

#[test]
fn diagonal_matches_extremal_quotient() {
    for seed in 0..20 {
        let raw = random_raw(seed, 25, 6);
        let m = build_discrete_measure(&raw.points, &raw.masses).unwrap();
        let span = FunctionSpan::tabulated(raw.values.clone()).unwrap();
        let space = WeightedSpace::new(&span, &m, WeightFunction::tabulated(raw.phi.clone()).unwrap()).unwrap();
        let diag = space.kernel_diagonal();
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        for (j, &dj) in diag.iter().enumerate() {
            let (oracle, best) = extremal_oracle(&raw, j);
            assert!((dj - oracle).abs() <= 1e-9 * oracle, "seed {seed} node {j}: {dj} vs {oracle}");
            let attained = (&raw.values * &best)[j].norm_sqr() / norm_sq(&raw, &best);
            assert!((attained - oracle).abs() <= 1e-9 * oracle);
            for _ in 0..5 {
                let h = DVector::from_fn(6, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
                let q = (&raw.values * &h)[j].norm_sqr() / norm_sq(&raw, &h);
                assert!(q <= dj * (1.0 + 1e-12));
            }
        }
    }
}

#[test]
fn kernel_matches_projection_oracle() {
    // K = V G^{-1} V* for a full-rank span.
    let raw = random_raw(7, 20, 5);
    let m = build_discrete_measure(&raw.points, &raw.masses).unwrap();
    let span = FunctionSpan::tabulated(raw.values.clone()).unwrap();
    let weight = WeightFunction::tabulated(raw.phi.clone()).unwrap();
    let k = kernel_matrix(&WeightedSpace::new(&span, &m, weight.clone()).unwrap());
    let g_inv = Cholesky::new(direct_gram(&raw)).unwrap().inverse();
    let oracle = &raw.values * g_inv * raw.values.adjoint();
    let scale = oracle.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let err = (&k.values - &oracle).iter().map(|x| x.norm()).fold(0.0, f64::max);
    assert!(err <= 1e-10 * scale, "{err}");
    assert!(reproducing_residual(&k, &weight, &m).unwrap() <= 1e-10);
}

#[test]
fn disk_kernel_matches_closed_form() {
    let m = build_disk_measure(1.0, 64, 128).unwrap();
    let span = FunctionSpan::monomials(30, &m);
    let space = WeightedSpace::new(&span, &m, eval_weight(&WeightFamily::Constant { c: 0.0 }, &m).unwrap()).unwrap();
    let eval = space.evaluator().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut sample = || {
        let r = 0.6 * rng.random::<f64>().sqrt();
        Complex64::from_polar(r, rng.random_range(0.0..2.0 * PI))
    };
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (z, zeta) = (sample(), sample());
        let exact = 1.0 / (PI * (1.0 - z * zeta.conj()).powi(2));
        worst = worst.max((eval.kernel_at(z, zeta) - exact).norm() / exact.norm());
    }
    assert!(worst <= 1e-6, "{worst}");
    // Only the constant survives at the origin.
    for d in [1, 5, 12] {
        let span = FunctionSpan::monomials(d, &m);
        let space = WeightedSpace::new(&span, &m, eval_weight(&WeightFamily::Constant { c: 0.0 }, &m).unwrap()).unwrap();
        let k0 = space.evaluator().unwrap().diagonal_at(Complex64::new(0.0, 0.0));
        assert!((k0 - 1.0 / PI).abs() < 1e-13);
    }
}

#[test]
fn two_node_reference_values() {
    let m = build_discrete_measure(&[(0.0, 0.0), (1.0, 0.0)], &[1.0, 1.0]).unwrap();
    let span = FunctionSpan::monomials(0, &m);
    let phi = WeightFunction::tabulated(vec![0.0, 0.0]).unwrap();
    let psi = WeightFunction::tabulated(vec![-1.0, 1.0]).unwrap();
    let r = comparison_integrals(&phi, &psi, &span, &m, 0.0).unwrap();
    let rhs = E / (E + 1.0 / E);
    assert!((r.lhs - 0.5).abs() <= 1e-12);
    assert!((r.rhs - rhs).abs() <= 1e-12);
    assert!((r.margin - (rhs - 0.5)).abs() <= 1e-12);
    // G(t) = e^t / (e^t + e^{-t}) along the path.
    let path = HomotopyPath::new(&phi, &psi).unwrap();
    let rho = path.sublevel_indicator();
    for t in [0.0, 0.25, 0.5, 1.0] {
        let g = g_of_t(&path, &rho, t, &span, &m).unwrap();
        assert!((g - 1.0 / (1.0 + (-2.0 * t).exp())).abs() <= 1e-12);
    }
}

#[test]
fn one_dimensional_kernel_derivative() {
    // K_t(z, z) = |h(z)|^2 / ||h||_t^2 and its derivative in closed form.
    let raw = random_raw(11, 6, 1);
    let m = build_discrete_measure(&raw.points, &raw.masses).unwrap();
    let span = FunctionSpan::tabulated(raw.values.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let psi: Vec<f64> = raw.phi.iter().map(|p| p + rng.random_range(-1.0..1.0)).collect();
    let phi_w = WeightFunction::tabulated(raw.phi.clone()).unwrap();
    let path = HomotopyPath::new(&phi_w, &WeightFunction::tabulated(psi).unwrap()).unwrap();
    let t = 0.3;
    let h = raw.values.column(0);
    let f = |j: usize| raw.masses[j] * (-(raw.phi[j] + t * path.direction()[j])).exp();
    let norm2: f64 = (0..6).map(|j| h[j].norm_sqr() * f(j)).sum();
    let moment: f64 = (0..6).map(|j| path.direction()[j] * h[j].norm_sqr() * f(j)).sum();
    let space = WeightedSpace::new(&span, &m, weight_at(&path, t)).unwrap();
    let analytic = kernel_derivative_matrix(&path, &space);
    let fd = kernel_fd(&path, t, 1e-4, &span, &m).unwrap();
    for i in 0..6 {
        let exact = h[i].norm_sqr() * moment / (norm2 * norm2);
        assert!((analytic[(i, i)].re - exact).abs() <= 1e-12 * (1.0 + exact.abs()));
        assert!((fd[(i, i)].re - exact).abs() <= 1e-7 * exact.abs().max(1e-300), "{} vs {exact}", fd[(i, i)].re);
    }
}
