//! Sketched intermediates track the exact kernel recursion layer by layer.

use ntk_sketch::cntk_oracle::{cntk_trace, ImageTensor};
use ntk_sketch::cntk_sketch::CntkSketchState;
use ntk_sketch::ntk_sketch::{NtkSketchState, SketchConfig, SketchDims};
use ntk_sketch::polysketch::PolySketchTree;
use ntk_sketch::relu_ntk::k_relu_trace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn cosine(y: &[f64], z: &[f64]) -> f64 {
    dot(y, z) / (dot(y, y) * dot(z, z)).sqrt()
}

/// Per-seed errors `⟨φ^(h)(y), φ^(h)(z)⟩ − Σ^(h)` and `⟨ψ^(h)(y), ψ^(h)(z)⟩ − K^(h)`.
fn ntk_layer_errors(dim: usize, seeds: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let (d, depth) = (16, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let y = gaussian(&mut rng, d);
    // Correlated partner so the angle is away from π/2.
    let z: Vec<f64> = y.iter().zip(gaussian(&mut rng, d)).map(|(a, b)| a + 0.7 * b).collect();
    let exact = k_relu_trace(depth, cosine(&y, &z)).unwrap();
    (0..seeds)
        .map(|seed| {
            let cfg = SketchConfig::new(depth, 0.5, 0.1, seed)
                .unwrap()
                .with_degrees(3, 6)
                .with_dims(SketchDims::uniform(dim));
            let st = NtkSketchState::new(d, cfg).unwrap();
            let (ty, tz) = (st.layer_trace(&y).unwrap(), st.layer_trace(&z).unwrap());
            let phi = (0..=depth).map(|h| dot(&ty.phi[h], &tz.phi[h]) - exact.sigma[h]).collect();
            let psi = (0..=depth).map(|h| dot(&ty.psi[h], &tz.psi[h]) - exact.k[h]).collect();
            (phi, psi)
        })
        .unzip()
}

fn column(errs: &[Vec<f64>], h: usize) -> impl Iterator<Item = f64> + '_ {
    errs.iter().map(move |e| e[h])
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn ntk_layers_follow_the_recursion() {
    let seeds = 16;
    let (phi, psi) = ntk_layer_errors(4096, seeds);
    let (phi_small, _) = ntk_layer_errors(512, seeds);
    // Sketch noise compounds with depth, so only the input layer gets a
    // per-seed band; every layer must be centred and shrink with dimension.
    let ok = column(&phi, 0).filter(|e| e.abs() < 0.1).count();
    assert!(ok * 10 >= seeds as usize * 9, "{ok}/{seeds} seeds within 0.1");
    for h in 0..=2 {
        let m = mean(column(&phi, h));
        assert!(m.abs() < 0.05, "layer {h}: mean φ error {m}");
        let rms = mean(column(&phi, h).map(|e| e * e)).sqrt();
        let rms_small = mean(column(&phi_small, h).map(|e| e * e)).sqrt();
        assert!(rms < rms_small, "layer {h}: rms {rms} at 4096 vs {rms_small} at 512");
        let mp = mean(column(&psi, h));
        assert!(mp.abs() < 0.1 * (h as f64 + 1.0), "layer {h}: mean ψ error {mp}");
    }
}

#[test]
fn ntk_features_have_the_expected_squared_norm() {
    let (d, depth) = (12, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let y = gaussian(&mut rng, d);
    let n2 = dot(&y, &y);
    let mut ratios = Vec::new();
    for seed in 0..16 {
        let cfg = SketchConfig::new(depth, 0.5, 0.1, seed)
            .unwrap()
            .with_degrees(3, 6)
            .with_dims(SketchDims::uniform(1024));
        let psi = NtkSketchState::new(d, cfg).unwrap().transform(&y).unwrap();
        ratios.push(dot(&psi, &psi) / n2);
    }
    ratios.sort_by(f64::total_cmp);
    let median = ratios[ratios.len() / 2];
    assert!((median - 3.0).abs() < 0.4, "median ‖Ψ‖²/‖y‖² = {median}");
}

#[test]
fn polynomial_sketch_with_linear_weights_is_a_jl_map() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (y, z) = (gaussian(&mut rng, 20), gaussian(&mut rng, 20));
    let ny = dot(&y, &y).sqrt();
    let nz = dot(&z, &z).sqrt();
    let yh: Vec<f64> = y.iter().map(|v| v / ny).collect();
    let zh: Vec<f64> = z.iter().map(|v| v / nz).collect();
    let truth = dot(&yh, &zh);
    let mut ok = 0;
    for seed in 0..20 {
        let tree = PolySketchTree::from_seed(1, 20, 1024, seed, false).unwrap();
        let a = tree.apply_polynomial(&yh, &[0.0, 1.0]).unwrap();
        let b = tree.apply_polynomial(&zh, &[0.0, 1.0]).unwrap();
        if (dot(&a, &b) - truth).abs() < 0.1 {
            ok += 1;
        }
    }
    assert!(ok >= 18, "{ok}/20");
}

#[test]
fn cntk_pixels_follow_the_recursion() {
    let (d1, d2, c, q, depth) = (4, 4, 1, 3, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let y = ImageTensor::new(d1, d2, c, gaussian(&mut rng, d1 * d2 * c)).unwrap();
    let z = ImageTensor::new(d1, d2, c, gaussian(&mut rng, d1 * d2 * c)).unwrap();
    let oracle = cntk_trace(&y, &z, q, depth).unwrap();
    let pixels = d1 * d2;
    let q2 = (q * q) as f64;

    let (mut ok, mut total) = (0, 0);
    for seed in 0..10 {
        let cfg = SketchConfig::for_cntk(depth, 0.5, 0.1, seed, d1, d2, 32)
            .unwrap()
            .with_degrees(2, 4)
            .with_dims(SketchDims::uniform(4096));
        let st = CntkSketchState::new(d1, d2, c, q, cfg).unwrap();
        let (ty, tz) = (st.layer_trace(&y).unwrap(), st.layer_trace(&z).unwrap());
        for h in 1..depth {
            for a in 0..pixels {
                for b in (0..pixels).step_by(5) {
                    let scale = (oracle.norms_y[h][a] * oracle.norms_z[h][b]).sqrt() / q2;
                    let got = dot(&ty.phi[h][a], &tz.phi[h][b]);
                    total += 1;
                    if (got - oracle.gamma[h][a * pixels + b]).abs() <= 0.1 * scale {
                        ok += 1;
                    }
                }
            }
        }
    }
    assert!(ok * 10 >= total * 9, "{ok}/{total} pixel pairs within tolerance");
}
