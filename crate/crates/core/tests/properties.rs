use nnpde::elliptic::assemble;
use nnpde::grid::{channel_grid, Grid, GridSpec};
use nnpde::limit::{estimate_kernel, spectrum};
use nnpde::network::{forward, init, Activation, InitDistribution, ParamSet};
use nnpde::objective::{adjoint_rhs, cosine_basis, objective, ObjectiveMode};
use nnpde::rans::{synth_target, ClosureNet, NetShape, RansConfig, Standardizer};
use nnpde::trainer::{train, TrainConfig};
use nnpde::Field;
use proptest::prelude::*;

fn grid(dim: usize, n: usize) -> Grid {
    GridSpec { dim, n }.build().unwrap()
}

fn interior_field(g: &Grid, vals: &[f64]) -> Field {
    let mask = g.boundary_mask();
    Field::from_fn(g.len(), |i| if mask[i] { 0.0 } else { vals[i % vals.len()] })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn trapezoid_exact_for_affine(n in 3usize..200, a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let g = grid(1, n);
        let f = g.sample(|x| a + b * x[0]);
        let exact = a + 0.5 * b;
        prop_assert!((g.integrate(&f).unwrap() - exact).abs() <= 1e-12 * (1.0 + exact.abs()));
    }

    #[test]
    fn trapezoid_exact_for_affine_2d(n in 3usize..40, a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0) {
        let g = grid(2, n);
        let f = g.sample(|x| a + b * x[0] + c * x[1]);
        let exact = a + 0.5 * b + 0.5 * c;
        prop_assert!((g.integrate(&f).unwrap() - exact).abs() <= 1e-12 * (1.0 + exact.abs()));
    }

    #[test]
    fn channel_faces_odd_and_increasing(half in 1usize..100, eta in 0.01f64..0.999, delta in 0.1f64..10.0) {
        let g = channel_grid(2 * half, delta, eta).unwrap();
        let n = g.faces.len();
        for j in 0..n {
            prop_assert_eq!(g.faces[j], -g.faces[n - 1 - j]);
        }
        prop_assert!(g.faces.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn operator_symmetric_and_coercive(dim in 1usize..3, n in 4usize..24, vals in prop::collection::vec(-1.0f64..1.0, 8..40)) {
        let g = grid(dim, n);
        let op = assemble(&g, 0.1).unwrap();
        let u = interior_field(&g, &vals);
        let rev: Vec<f64> = vals.iter().rev().map(|v| v * 0.5 + 0.1).collect();
        let v = interior_field(&g, &rev);
        let au = op.apply(&u).unwrap();
        let av = op.apply(&v).unwrap();
        let lhs = g.inner(&au, &v).unwrap();
        let rhs = g.inner(&u, &av).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        let uu = g.inner(&u, &u).unwrap();
        prop_assert!(g.inner(&u, &au).unwrap() >= uu * (1.0 - 1e-12));
    }

    #[test]
    fn solve_inverts_apply(dim in 1usize..3, n in 4usize..24, vals in prop::collection::vec(-1.0f64..1.0, 8..40)) {
        let g = grid(dim, n);
        let op = assemble(&g, 0.1).unwrap();
        let f = interior_field(&g, &vals);
        let u = op.solve(&f).unwrap();
        prop_assert!(op.residual_max(&u, &f).unwrap() <= 1e-10);
    }

    #[test]
    fn forward_linear_in_c(seed in 0u64..1000, n_hidden in 1usize..40, k in -3.0f64..3.0) {
        let g = grid(1, 33);
        let p = init(n_hidden, 1, 2.0 / 3.0, Activation::Tanh, &InitDistribution::standard(seed)).unwrap();
        let mut q: ParamSet = p.clone();
        for c in q.c.iter_mut() {
            *c *= k;
        }
        let a = forward(&p, &g).unwrap();
        let b = forward(&q, &g).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            prop_assert!((k * x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn bessel_inequality(vals in prop::collection::vec(-2.0f64..2.0, 65), l in 1usize..30) {
        let g = grid(1, 65);
        let basis = cosine_basis(&g, l).unwrap();
        let u = Field(vals);
        let h = Field::zeros(65);
        let weak = objective(&u, &h, &basis, ObjectiveMode::Weak).unwrap();
        let strong = objective(&u, &h, &basis, ObjectiveMode::Strong).unwrap();
        prop_assert!(weak <= strong * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn adjoint_rhs_matches_directional_derivative(
        vals in prop::collection::vec(-1.0f64..1.0, 33),
        dir in prop::collection::vec(-1.0f64..1.0, 33),
        strong in any::<bool>(),
    ) {
        let g = grid(1, 33);
        let mode = if strong { ObjectiveMode::Strong } else { ObjectiveMode::Weak };
        let basis = cosine_basis(&g, 8).unwrap();
        let h = g.sample(|x| x[0] * (1.0 - x[0]));
        let u = Field(vals);
        let r = adjoint_rhs(&u, &h, &basis, mode).unwrap();
        let eps = 1e-6;
        let up = Field(u.iter().zip(&dir).map(|(a, d)| a + eps * d).collect());
        let um = Field(u.iter().zip(&dir).map(|(a, d)| a - eps * d).collect());
        let fd = (objective(&up, &h, &basis, mode).unwrap() - objective(&um, &h, &basis, mode).unwrap()) / (2.0 * eps);
        let an = g.inner(&r, &dir).unwrap();
        prop_assert!((fd - an).abs() <= 1e-7 * (1.0 + an.abs()));
    }

    #[test]
    fn kernel_symmetric_and_psd(seed in 0u64..500, m in 50usize..400) {
        let g = grid(1, 17);
        let k = estimate_kernel(&g, &InitDistribution::standard(seed), Activation::Tanh, 1.0, m, seed).unwrap();
        prop_assert_eq!(k.values.clone(), k.values.transpose());
        let s = spectrum(&k).unwrap();
        prop_assert!(s.eigenvalues.iter().all(|&l| l >= -1e-8));
    }

    #[test]
    fn synthetic_target_symmetric(re in 3000.0f64..60000.0) {
        let cfg = RansConfig::with_re(re);
        let t = synth_target(&cfg).unwrap();
        let n = t.u.len();
        prop_assert_eq!(t.u[0], 0.0);
        prop_assert_eq!(t.u[n - 1], 0.0);
        for j in 0..n {
            prop_assert!((t.u[j] - t.u[n - 1 - j]).abs() <= 1e-12);
        }
    }

    #[test]
    fn closure_output_odd_under_reflection(
        seed in 0u64..1000,
        p in prop::collection::vec(-1.0f64..1.0, 4),
        pert in -0.5f64..0.5,
    ) {
        let mut net = ClosureNet::new(NetShape::default(), seed);
        let q: Vec<f64> = net.params.iter().enumerate().map(|(i, v)| v + pert * ((i as f64).cos())).collect();
        net.set_params(&q).unwrap();
        net.standardizer = Standardizer::from_samples(&[[-1.0, 0.0, 0.0, -5.0], [1.0, 2.0, 3.0, 5.0]]);
        let x = [p[0], 1.0 + p[1], 1.5 + p[2], 5.0 * p[3]];
        let a = net.eval(&x);
        let b = net.eval(&[-x[0], x[1], x[2], -x[3]]);
        prop_assert!(a.iter().all(|v| v.is_finite()));
        prop_assert!((a[0] + b[0]).abs() <= 1e-12 && (a[1] + b[1]).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn watchdog_keeps_history_monotone(seed in 0u64..1000, n_hidden in 2usize..30, dt in 0.001f64..0.2) {
        let cfg = TrainConfig {
            n_hidden,
            seed,
            dt,
            steps: 40,
            grid: GridSpec { dim: 1, n: 33 },
            ..TrainConfig::default()
        };
        let st = train(&cfg).unwrap();
        for w in st.history.windows(2) {
            prop_assert!(w[1].j - w[0].j <= cfg.monotonicity_tol * w[0].j.abs());
        }
    }
}
