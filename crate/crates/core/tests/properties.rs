use bergman_core::comparison::{comparison_integrals, reduce_less_singular, sandwich_check, sublevel_set, DensityPair};
use bergman_core::homotopy::{
    derivative_forms, difference_quotient_bounds, is_nondecreasing, l2_difference_bounds, monotonicity_sweep,
    weight_at, HomotopyPath, MonotoneProfile,
};
use bergman_core::kernel::{kernel_matrix, kernel_monotonicity_check, FunctionSpan, WeightedSpace};
use bergman_core::measure::{build_discrete_measure, QuadratureMeasure, WeightFunction};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Instance {
    points: Vec<(f64, f64)>,
    masses: Vec<f64>,
    phi: Vec<f64>,
    psi: Vec<f64>,
    monomial_degree: Option<usize>,
    table: Vec<(f64, f64)>,
    dim: usize,
}

impl Instance {
    fn measure(&self) -> QuadratureMeasure {
        build_discrete_measure(&self.points, &self.masses).unwrap()
    }

    fn span(&self, m: &QuadratureMeasure) -> FunctionSpan {
        match self.monomial_degree {
            Some(d) => FunctionSpan::monomials(d, m),
            None => FunctionSpan::tabulated(DMatrix::from_fn(m.len(), self.dim, |j, k| {
                let (re, im) = self.table[j * self.dim + k];
                Complex64::new(re, im)
            }))
            .unwrap(),
        }
    }

    fn phi(&self) -> WeightFunction {
        WeightFunction::tabulated(self.phi.clone()).unwrap()
    }

    fn psi(&self) -> WeightFunction {
        WeightFunction::tabulated(self.psi.clone()).unwrap()
    }
}

fn instance() -> impl Strategy<Value = Instance> {
    (2usize..=20, 1usize..=6).prop_flat_map(|(n, dim)| {
        let pts = prop::collection::vec((-0.7f64..0.7, -0.7f64..0.7), n);
        let masses = prop::collection::vec((0.1f64).ln()..(10.0f64).ln(), n);
        let w = || prop::collection::vec(-2.0f64..2.0, n);
        let table = prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * dim);
        (pts, masses, w(), w(), any::<bool>(), table).prop_map(move |(points, logm, phi, psi, mono, table)| Instance {
            points,
            masses: logm.into_iter().map(f64::exp).collect(),
            phi,
            psi,
            monomial_degree: mono.then(|| dim - 1),
            table,
            dim,
        })
    })
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn trace_equals_rank(inst in instance()) {
        let m = inst.measure();
        let span = inst.span(&m);
        let space = WeightedSpace::new(&span, &m, inst.phi()).unwrap();
        let rank = space.rank() as f64;
        let trace = space.density().integral(&m);
        prop_assert!((trace - rank).abs() <= 1e-9 * rank.max(1.0), "trace {} rank {}", trace, rank);
    }

    #[test]
    fn density_ignores_constant_shift(inst in instance(), c in -5.0f64..5.0) {
        let m = inst.measure();
        let span = inst.span(&m);
        let a = WeightedSpace::new(&span, &m, inst.phi()).unwrap();
        let b = WeightedSpace::new(&span, &m, inst.phi().shifted(c)).unwrap();
        for (x, y) in a.density().values.iter().zip(&b.density().values) {
            prop_assert!(rel_close(*x, *y, 1e-12), "{} vs {}", x, y);
        }
        let (ka, kb) = (kernel_matrix(&a), kernel_matrix(&b));
        for j in 0..m.len() {
            prop_assert!(rel_close(kb.get(j, j).re, c.exp() * ka.get(j, j).re, 1e-12));
        }
    }

    #[test]
    fn kernel_is_positive_semidefinite(inst in instance()) {
        let m = inst.measure();
        let span = inst.span(&m);
        let k = kernel_matrix(&WeightedSpace::new(&span, &m, inst.phi()).unwrap());
        let top = k.max_eigenvalue().max(0.0);
        prop_assert!(k.min_eigenvalue() >= -1e-12 * top);
    }

    #[test]
    fn comparison_holds_on_every_shift(inst in instance(), c in -3.0f64..3.0) {
        let m = inst.measure();
        let span = inst.span(&m);
        let r = comparison_integrals(&inst.phi(), &inst.psi(), &span, &m, c).unwrap();
        prop_assert!(r.margin >= -1e-12 * (1.0 + r.rhs), "lhs {} rhs {}", r.lhs, r.rhs);
    }

    #[test]
    fn sublevel_sets_grow_with_shift(inst in instance(), c1 in -3.0f64..3.0, dc in 0.0f64..3.0) {
        let (phi, psi) = (inst.phi(), inst.psi());
        let small = sublevel_set(&phi, &psi, c1).unwrap();
        let large = sublevel_set(&phi, &psi, c1 + dc).unwrap();
        prop_assert!(small.indices().iter().all(|&j| large.contains(j)));
    }

    #[test]
    fn reduction_is_idempotent_and_keeps_the_set(inst in instance()) {
        let (phi, psi) = (inst.phi(), inst.psi());
        let once = reduce_less_singular(&phi, &psi).unwrap();
        let twice = reduce_less_singular(&phi, &once).unwrap();
        prop_assert_eq!(once.values(), twice.values());
        prop_assert_eq!(sublevel_set(&phi, &psi, 0.0).unwrap(), sublevel_set(&phi, &once, 0.0).unwrap());
        prop_assert!(once.values().iter().zip(phi.values()).all(|(a, b)| a <= b));
    }

    #[test]
    fn sandwich_chain_holds(inst in instance()) {
        let m = inst.measure();
        let span = inst.span(&m);
        let chain = sandwich_check(&inst.phi(), &inst.psi(), &span, &m).unwrap();
        prop_assert!(chain.holds(), "{:?}", chain);
    }

    #[test]
    fn lowering_the_weight_shrinks_the_kernel(inst in instance()) {
        let m = inst.measure();
        let span = inst.span(&m);
        let lower = reduce_less_singular(&inst.phi(), &inst.psi()).unwrap();
        let lower = WeightedSpace::new(&span, &m, lower).unwrap();
        let upper = WeightedSpace::new(&span, &m, inst.phi()).unwrap();
        prop_assert!(kernel_monotonicity_check(&lower, &upper).unwrap());
    }

    #[test]
    fn derivative_forms_agree(inst in instance(), t in 0.0f64..1.0) {
        let m = inst.measure();
        let span = inst.span(&m);
        let path = HomotopyPath::new(&inst.phi(), &inst.psi()).unwrap();
        let space = WeightedSpace::new(&span, &m, weight_at(&path, t)).unwrap();
        let forms = derivative_forms(&path, &path.sublevel_indicator(), &space).unwrap();
        prop_assert!(forms.max_pairwise_dev() <= 1e-10, "{:?}", forms);
        prop_assert!(forms.crossing >= -1e-12);
    }

    #[test]
    fn monotone_profiles_give_nonnegative_derivative(inst in instance(), t in 0.0f64..1.0, a in -2.0f64..0.0, b in 0.0f64..2.0) {
        let m = inst.measure();
        let span = inst.span(&m);
        let path = HomotopyPath::new(&inst.phi(), &inst.psi()).unwrap();
        let profile = MonotoneProfile::new(vec![(a, 1.0), (b, 0.0)]).unwrap();
        let rho = path.profile_indicator(&profile);
        let space = WeightedSpace::new(&span, &m, weight_at(&path, t)).unwrap();
        let forms = derivative_forms(&path, &rho, &space).unwrap();
        let rel = (forms.direct - forms.symmetric).abs() / forms.scale.max(forms.symmetric.abs()).max(1e-300);
        prop_assert!(rel <= 1e-10);
        prop_assert!(forms.symmetric >= -1e-12 * (1.0 + forms.scale));
    }

    #[test]
    fn g_is_nondecreasing_between_the_comparison_integrals(inst in instance()) {
        let m = inst.measure();
        let span = inst.span(&m);
        let (phi, psi) = (inst.phi(), inst.psi());
        let path = HomotopyPath::new(&phi, &psi).unwrap();
        let curve = monotonicity_sweep(&path, &span, &m).unwrap();
        prop_assert!(is_nondecreasing(&curve));
        let r = DensityPair::new(&phi, &psi, &span, &m).unwrap().report(0.0);
        prop_assert!(rel_close(curve[0].1, r.lhs, 1e-12));
        prop_assert!(rel_close(curve[curve.len() - 1].1, r.rhs, 1e-12));
    }

    #[test]
    fn difference_bounds_hold(inst in instance(), t in 0.0f64..1.0, tau in prop::sample::select(vec![0.5, 0.1, 0.01, -0.3])) {
        let m = inst.measure();
        let span = inst.span(&m);
        let path = HomotopyPath::new(&inst.phi(), &inst.psi()).unwrap();
        for b in difference_quotient_bounds(&path, t, tau, &span, &m).unwrap() {
            prop_assert!(b.holds(), "{:?}", b);
        }
        for b in l2_difference_bounds(&path, t, tau, &span, &m).unwrap() {
            prop_assert!(b.holds(), "{:?}", b);
        }
    }
}
