use proptest::prelude::*;

use levelset::design::{design_objective, frank_wolfe_design, Design, DesignProblem, FwConfig};
use levelset::env::{generate, Generator, InstanceSpec, ThresholdSpec};
use levelset::harness::{format_float, read_metrics, write_metrics, MetricRow, SCHEMA_VERSION};
use levelset::kernels::{dense_inv_quadform, reg_inv_quadform, ArmSet, FeatureCombo, InverseOperator, KernelSpec};
use levelset::melk::{run_melk, MelkConfig};
use levelset::milk::PairSet;
use levelset::robust::{catoni_mean, RobustMeanParams};

fn points(n: usize, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-1.0f64..1.0, d), n)
}

fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    })
}

fn linear_case() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, f64)> {
    (2usize..8, 1usize..4).prop_flat_map(|(n, d)| (points(n, d), weights(n), 1e-3f64..1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_route_matches_dense_route((pts, w, gamma) in linear_case(), i in 0usize..8, j in 0usize..8) {
        let n = pts.len();
        let arms = ArmSet::new(pts, KernelSpec::Linear).unwrap();
        let lambda = Design::new(w).unwrap();
        let u = FeatureCombo::arm(i % n);
        let v = FeatureCombo::difference(j % n, (j + 1) % n, 0.7).unwrap();
        let a = reg_inv_quadform(&arms, &u, &v, &lambda, gamma).unwrap();
        let b = dense_inv_quadform(&arms, &u, &v, &lambda, gamma).unwrap();
        prop_assert!((a - b).abs() <= 1e-8 * (1.0 + b.abs()), "{a} vs {b}");
    }

    #[test]
    fn inverse_norm_is_nonnegative_and_symmetric(
        (pts, w, gamma) in linear_case(),
        ls in 0.2f64..2.0,
        c in prop::collection::vec(-2.0f64..2.0, 3),
    ) {
        let n = pts.len();
        let arms = ArmSet::new(pts, KernelSpec::SquaredExponential { lengthscale: ls }).unwrap();
        let op = InverseOperator::new(&arms, &Design::new(w).unwrap(), gamma).unwrap();
        let u = FeatureCombo::new([(0, c[0]), (n - 1, c[1])]).unwrap();
        let v = FeatureCombo::new([(n / 2, c[2])]).unwrap();
        prop_assert!(op.norm_sq(&u).unwrap() >= -1e-10);
        let uv = op.bilinear(&u, &v).unwrap();
        let vu = op.bilinear(&v, &u).unwrap();
        prop_assert!((uv - vu).abs() <= 1e-8 * (1.0 + uv.abs()));
    }

    #[test]
    fn bilinear_is_linear_in_each_argument((pts, w, gamma) in linear_case(), s in -3.0f64..3.0) {
        let n = pts.len();
        let arms = ArmSet::new(pts, KernelSpec::Linear).unwrap();
        let op = InverseOperator::new(&arms, &Design::new(w).unwrap(), gamma).unwrap();
        let u = FeatureCombo::arm(0);
        let v1 = FeatureCombo::arm(n - 1);
        let v2 = FeatureCombo::arm(n / 2);
        let sum = FeatureCombo::new([(n - 1, 1.0), (n / 2, s)]).unwrap();
        let lhs = op.bilinear(&u, &sum).unwrap();
        let rhs = op.bilinear(&u, &v1).unwrap() + s * op.bilinear(&u, &v2).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-8 * (1.0 + lhs.abs()));
    }

    #[test]
    fn design_objective_is_convex((pts, w1, gamma) in linear_case(), t in 0.0f64..1.0, seed in 0u64..1000) {
        let n = pts.len();
        let arms = ArmSet::new(pts, KernelSpec::Linear).unwrap();
        let targets = (0..n).map(FeatureCombo::arm).collect();
        let p = DesignProblem::new(&arms, targets, gamma).unwrap();
        // second design: a rotation of the first
        let k = (seed as usize) % n;
        let w2: Vec<f64> = (0..n).map(|i| w1[(i + k) % n]).collect();
        let mix: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let f = |w: &[f64]| design_objective(&p, &Design::new(w.to_vec()).unwrap()).unwrap().0;
        prop_assert!(f(&mix) <= t * f(&w1) + (1.0 - t) * f(&w2) + 1e-9 * (1.0 + f(&mix)));
    }

    #[test]
    fn frank_wolfe_never_worse_than_uniform((pts, _w, gamma) in linear_case()) {
        let n = pts.len();
        let arms = ArmSet::new(pts, KernelSpec::Linear).unwrap();
        let targets = (0..n).map(FeatureCombo::arm).collect();
        let p = DesignProblem::new(&arms, targets, gamma).unwrap();
        let res = frank_wolfe_design(&p, &FwConfig { max_iters: 100, ..FwConfig::default() }).unwrap();
        let uniform = design_objective(&p, &Design::uniform(n)).unwrap().0;
        prop_assert!(res.value <= uniform * (1.0 + 1e-12));
        prop_assert!((res.design.weights().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn catoni_is_shift_equivariant(xs in prop::collection::vec(-5.0f64..5.0, 12..60), c in -10.0f64..10.0) {
        let params = RobustMeanParams { delta_prime: 0.05, variance_bound: 30.0 };
        let m = catoni_mean(&xs, &params).unwrap();
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        let ms = catoni_mean(&shifted, &params).unwrap();
        prop_assert!((ms - (m + c)).abs() < 1e-7, "{ms} vs {}", m + c);
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(m >= lo - 1e-9 && m <= hi + 1e-9);
    }

    #[test]
    fn metric_rows_survive_csv(f1 in 0.0f64..1.0, wall in 0.0f64..1e6, seed in 0u64..1000, c in 1u64..1_000_000) {
        let row = MetricRow {
            schema_version: SCHEMA_VERSION,
            algorithm: "melk".into(),
            instance: "probe, \"quoted\"".into(),
            seed,
            checkpoint_samples: c,
            f1,
            n_good: 3,
            n_bad: 4,
            n_active: 5,
            round: 2,
            wall_time_ms: wall,
        };
        let mut buf = Vec::new();
        write_metrics(&mut buf, std::slice::from_ref(&row)).unwrap();
        let back = read_metrics(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), 1);
        prop_assert_eq!(&back[0], &row);
        prop_assert_eq!(format_float(f1).parse::<f64>().unwrap(), f1);
    }

    #[test]
    fn pair_removal_keeps_counts_consistent(n in 1usize..7, ops in prop::collection::vec((0usize..7, 0usize..7), 0..30)) {
        let mut pairs = PairSet::full(n);
        prop_assert_eq!(pairs.len(), n * (n - 1));
        for (x, xp) in ops {
            let (x, xp) = (x % n, xp % n);
            let before = pairs.len();
            let removed = pairs.remove(x, xp);
            prop_assert_eq!(pairs.len(), before - usize::from(removed));
            prop_assert!(!pairs.contains(x, xp));
        }
        let total: usize = (0..n).map(|x| pairs.outstanding(x)).sum();
        prop_assert_eq!(total, pairs.len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn melk_classified_sets_only_grow(seed in 0u64..10_000, alpha in 0.2f64..0.4) {
        let spec = InstanceSpec::new(
            Generator::Soare { n: 8, d: 3, xi_range: 0.2 },
            ThresholdSpec::Explicit { alpha },
        )
        .with_sigma(0.3);
        let mut env = generate(&spec, seed).unwrap();
        let arms = env.arms().clone();
        let mut cfg = MelkConfig::new(alpha, 0.1, env.signal_bound(), 0.3);
        cfg.max_samples = Some(2_000_000);
        let res = run_melk(&arms, &mut env, &cfg, seed).unwrap();
        for w in res.trajectory.windows(2) {
            prop_assert!(w[1].samples >= w[0].samples);
            prop_assert!(w[1].n_active <= w[0].n_active);
            prop_assert!(w[1].n_bad >= w[0].n_bad);
            prop_assert!(w[0].good.iter().all(|g| w[1].good.contains(g)));
        }
        prop_assert!(res.good.iter().all(|g| !res.bad.contains(g)));
        prop_assert_eq!(res.good.len() + res.bad.len() + res.active.len(), arms.len());
    }
}
