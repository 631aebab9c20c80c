use ntk_sketch::cntk_oracle::{cntk_trace, theta_cntk, ImageTensor};
use ntk_sketch::poly_approx::{
    choose_degrees, fit_ntk_polynomial, sup_error, taylor_coeffs_kappa0, taylor_coeffs_kappa1, TargetFn,
};
use ntk_sketch::relu_ntk::{k_relu, k_relu_trace, kappa0, kappa1, theta_ntk};
use proptest::prelude::*;

fn vector(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, len).prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-3))
}

fn image(d1: usize, d2: usize, c: usize) -> impl Strategy<Value = ImageTensor> {
    prop::collection::vec(-2.0f64..2.0, d1 * d2 * c).prop_map(move |v| ImageTensor::new(d1, d2, c, v).unwrap())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn arc_cosine_kernels_are_bounded_and_ordered(a in -1.0f64..=1.0, b in -1.0f64..=1.0) {
        let (k0, k1) = (kappa0(a).unwrap(), kappa1(a).unwrap());
        prop_assert!((0.0..=1.0).contains(&k0));
        prop_assert!((0.0..=1.0).contains(&k1));
        if a < b {
            prop_assert!(k0 <= kappa0(b).unwrap() + 1e-15);
            prop_assert!(k1 <= kappa1(b).unwrap() + 1e-15);
        }
    }

    #[test]
    fn recursion_layers_are_consistent(depth in 1usize..8, a in -1.0f64..=1.0) {
        let tr = k_relu_trace(depth, a).unwrap();
        prop_assert_eq!(tr.sigma[0], a);
        prop_assert_eq!(tr.k[0], a);
        for h in 1..=depth {
            prop_assert!((tr.sigma[h] - kappa1(tr.sigma[h - 1]).unwrap()).abs() < 1e-15);
            let expect = tr.k[h - 1] * tr.sigma_dot[h] + tr.sigma[h];
            prop_assert!((tr.k[h] - expect).abs() < 1e-12);
            prop_assert!(tr.k[h].abs() <= h as f64 + 1.0 + 1e-12);
        }
    }

    #[test]
    fn ntk_is_symmetric_and_bihomogeneous(
        depth in 1usize..6, y in vector(7), z in vector(7), c in 0.1f64..10.0, c2 in 0.1f64..10.0
    ) {
        let t = theta_ntk(depth, &y, &z).unwrap();
        prop_assert_eq!(t, theta_ntk(depth, &z, &y).unwrap());
        let ys: Vec<f64> = y.iter().map(|v| v * c).collect();
        let zs: Vec<f64> = z.iter().map(|v| v * c2).collect();
        let scaled = theta_ntk(depth, &ys, &zs).unwrap();
        prop_assert!((scaled - c * c2 * t).abs() <= 1e-9 * (1.0 + (c * c2 * t).abs()));
    }

    #[test]
    fn ntk_diagonal_is_depth_plus_one_times_norm(depth in 1usize..10, y in vector(9)) {
        let n2: f64 = y.iter().map(|v| v * v).sum();
        prop_assert!(rel(theta_ntk(depth, &y, &y).unwrap(), (depth as f64 + 1.0) * n2) < 1e-12);
    }

    #[test]
    fn ntk_depends_only_on_norms_and_angle(depth in 1usize..5, y in vector(4), z in vector(4)) {
        // A coordinate permutation is orthogonal.
        let perm = |v: &[f64]| vec![v[2], v[0], v[3], v[1]];
        let a = theta_ntk(depth, &y, &z).unwrap();
        let b = theta_ntk(depth, &perm(&y), &perm(&z)).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
    }

    #[test]
    fn cntk_is_symmetric_and_bihomogeneous(
        y in image(4, 3, 2), z in image(4, 3, 2), c in 0.2f64..5.0, c2 in 0.2f64..5.0, depth in 1usize..4
    ) {
        let t = theta_cntk(&y, &z, 3, depth).unwrap();
        let back = theta_cntk(&z, &y, 3, depth).unwrap();
        prop_assert!((t - back).abs() <= 1e-12 * (1.0 + t.abs()));
        let scaled = theta_cntk(&y.scaled(c), &z.scaled(c2), 3, depth).unwrap();
        prop_assert!((scaled - c * c2 * t).abs() <= 1e-9 * (1.0 + (c * c2 * t).abs()));
    }

    #[test]
    fn cntk_self_kernel_is_nonnegative(y in image(3, 3, 1), depth in 1usize..4) {
        prop_assert!(theta_cntk(&y, &y, 3, depth).unwrap() >= 0.0);
    }

    #[test]
    fn cntk_gamma_respects_cauchy_schwarz(y in image(3, 4, 1), z in image(3, 4, 1)) {
        let t = cntk_trace(&y, &z, 3, 2).unwrap();
        let p = 12;
        for h in 1..=2 {
            for a in 0..p {
                for b in 0..p {
                    let bound = (t.norms_y[h][a] * t.norms_z[h][b]).sqrt() / 9.0;
                    prop_assert!(t.gamma[h][a * p + b] <= bound * (1.0 + 1e-12) + 1e-300);
                    prop_assert!(t.gamma[h][a * p + b] >= 0.0);
                }
            }
        }
    }

    #[test]
    fn taylor_errors_stay_below_their_bounds(depth in 1usize..4, eps in 0.2f64..0.9) {
        let choice = choose_degrees(depth, eps).unwrap();
        let p1 = taylor_coeffs_kappa1(choice.p);
        let p0 = taylor_coeffs_kappa0(choice.p_prime);
        prop_assert!(sup_error(&p1, TargetFn::Kappa1, 1001) <= choice.kappa1_error_bound);
        prop_assert!(sup_error(&p0, TargetFn::Kappa0, 1001) <= choice.kappa0_error_bound);
    }
}

#[test]
fn taylor_coefficients_are_nonnegative_and_approach_the_kernels_at_one() {
    for p in [1, 4, 16, 64] {
        let k1 = taylor_coeffs_kappa1(p);
        let k0 = taylor_coeffs_kappa0(p);
        assert!(k1.coefficients().iter().chain(k0.coefficients()).all(|&c| c >= 0.0));
        assert!(k1.eval(1.0) <= 1.0 + 1e-15 && k0.eval(1.0) <= 1.0 + 1e-15);
    }
    assert!(1.0 - taylor_coeffs_kappa1(64).eval(1.0) < 1e-3);
}

#[test]
fn fitted_polynomials_improve_with_degree() {
    let errs: Vec<f64> = [2, 4, 8]
        .iter()
        .map(|&d| fit_ntk_polynomial(3, d, 801).unwrap().sup_residual)
        .collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    let fit = fit_ntk_polynomial(3, 8, 801).unwrap();
    assert!(fit.polynomial.coefficients().iter().all(|&c| c >= 0.0));
    assert!(sup_error(&fit.polynomial, TargetFn::NormalizedNtk { depth: 3 }, 2001) < 0.06);
}

#[test]
fn small_image_example() {
    // Zero padding only: a single bright pixel in the corner of a 4×4 image.
    let mut data = vec![0.0; 16];
    data[0] = 2.0;
    let y = ImageTensor::new(4, 4, 1, data).unwrap();
    let depth = 3;
    let t = theta_cntk(&y, &y, 3, depth).unwrap();
    let trace = cntk_trace(&y, &y, 3, depth).unwrap();
    assert!((t - trace.theta()).abs() < 1e-15);
    // Γ^(0) is the pixel inner product.
    assert_eq!(trace.gamma[0][0], 4.0);
    assert!(t > 0.0 && t.is_finite());
    assert_eq!(theta_cntk(&y, &ImageTensor::zeros(4, 4, 1).unwrap(), 3, depth).unwrap(), 0.0);
}

#[test]
fn normalized_ntk_at_zero_for_deep_networks() {
    let v = k_relu(32, 0.0).unwrap() / 33.0;
    assert!((0.2..=0.4).contains(&v), "{v}");
    assert_eq!(k_relu(5, 1.0).unwrap(), 6.0);
}
