use mmrac_core::identifier::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A point of `Π` with some coordinates pinned to the faces.
fn point_in_pi(rng: &mut ChaCha8Rng, k: usize) -> DVector<f64> {
    let mut w: DVector<f64> = DVector::from_fn(k, |_, _| rng.gen_range(0.0..1.0));
    for i in 0..k {
        if rng.gen_bool(0.3) {
            w[i] = 0.0;
        }
    }
    let s = w.sum();
    if s > 1.0 || rng.gen_bool(0.3) && s > 0.0 {
        w /= s;
    }
    w
}

fn random_point(rng: &mut ChaCha8Rng, k: usize) -> DVector<f64> {
    DVector::from_fn(k, |_, _| rng.gen_range(-1.5..1.5))
}

fn random_spd(rng: &mut ChaCha8Rng, k: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(k, k, |_, _| rng.gen_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(k, k) * 0.1
}

/// Directions `d` with `w + εd ∈ Π` for small `ε`.
fn feasible_direction(rng: &mut ChaCha8Rng, w: &DVector<f64>) -> DVector<f64> {
    let target = point_in_pi(rng, w.len());
    target - w
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn clip_is_the_euclidean_projection(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(1..=6);
        let x = random_point(&mut rng, k);
        let p = clip_to_pi(&x);
        prop_assert!(pi_violation(&p) <= 1e-12);
        prop_assert!((clip_to_pi(&p) - &p).amax() <= 1e-12);
        // Variational inequality (x − p)·(q − p) ≤ 0 for every q ∈ Π.
        for _ in 0..20 {
            let q = point_in_pi(&mut rng, k);
            prop_assert!((&x - &p).dot(&(&q - &p)) <= 1e-12);
        }
    }

    #[test]
    fn tangent_projection_is_moreau_decomposition(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(1..=6);
        let w = point_in_pi(&mut rng, k);
        let v = random_point(&mut rng, k);
        let d = project_update(&w, &v, ACTIVE_TOL).unwrap();
        // d lies in the tangent cone.
        prop_assert!(pi_violation(&(&w + &d * 1e-6)) <= 1e-12);
        // v − d is orthogonal to d and polar to the cone.
        let r = &v - &d;
        prop_assert!(r.dot(&d).abs() <= 1e-10);
        for _ in 0..20 {
            let q = feasible_direction(&mut rng, &w);
            prop_assert!(r.dot(&q) <= 1e-10);
        }
    }

    #[test]
    fn interior_projection_is_identity(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(1..=6);
        let w = DVector::from_fn(k, |_, _| rng.gen_range(0.01..0.9) / k as f64);
        let v = random_point(&mut rng, k);
        prop_assert_eq!(project_update(&w, &v, ACTIVE_TOL).unwrap(), v);
    }

    #[test]
    fn steps_stay_in_pi_and_weights_sum_to_one(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(1..=6);
        let mut we = WeightEstimate::new(point_in_pi(&mut rng, k)).unwrap();
        for _ in 0..50 {
            let v = random_point(&mut rng, k) * 10.0;
            let d = project_update(we.wbar(), &v, ACTIVE_TOL).unwrap();
            we = step_weights(&we, &d, rng.gen_range(0.0..0.2));
            prop_assert!(pi_violation(we.wbar()) <= 1e-12);
            let full = we.full();
            prop_assert!((full.sum() - 1.0).abs() <= 1e-12);
            prop_assert!(full.iter().all(|&x| x >= -1e-12));
        }
    }

    #[test]
    fn raw_update_is_a_descent_direction(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, k) = (rng.gen_range(1..=4), rng.gen_range(1..=5));
        let e = DMatrix::from_fn(n, k, |_, _| rng.gen_range(-1.0..1.0));
        let eps_n = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let w = point_in_pi(&mut rng, k);
        let gamma = random_spd(&mut rng, k);
        let v = raw_update(&e, &eps_n, &w, &gamma);
        // ∇J = Eᵀ(E w̄ + ε_N) for J = ½‖E w̄ + ε_N‖².
        let grad = e.transpose() * (&e * &w + &eps_n);
        prop_assert!(grad.dot(&v) <= 1e-14);
        prop_assert!((grad.dot(&v) + grad.dot(&(&gamma * &grad))).abs() <= 1e-10 * (1.0 + grad.norm_squared()));
    }

    #[test]
    fn epsilons_vanish_at_the_true_weights(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, p, big_n) = (rng.gen_range(1..=4), rng.gen_range(2..=6), rng.gen_range(2..=5));
        let thetas: Vec<DMatrix<f64>> = (0..big_n).map(|_| DMatrix::from_fn(n, p, |_, _| rng.gen_range(-1.0..1.0))).collect();
        let raw: Vec<f64> = (0..big_n).map(|_| rng.gen_range(0.1..1.0)).collect();
        let s: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|x| x / s).collect();
        let theta_p = thetas.iter().zip(&w).fold(DMatrix::zeros(n, p), |acc, (t, wi)| acc + t * *wi);
        let phi = DVector::from_fn(p, |_, _| rng.gen_range(-2.0..2.0));
        let z = &theta_p * &phi;
        let outs: Vec<DVector<f64>> = thetas.iter().map(|t| t * &phi).collect();
        let ms2 = normalization(&phi, 0.01);
        let em = epsilons(&z, &outs, ms2);
        let wbar = DVector::from_column_slice(&w[..big_n - 1]);
        prop_assert!((&em.e * &wbar + em.eps_last()).amax() <= 1e-12);
    }
}
