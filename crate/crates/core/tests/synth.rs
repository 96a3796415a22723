mod common;

use common::*;
use ndarray::Array2;
use proptest::prelude::*;
use rand_distr::{Distribution, Normal};
use symgcp::synth::{cosine_score, generate_binary, negate_fix, BinaryGenConfig};
use symgcp::{ModePartition, SymKruskal};

fn cosine(a: &Array2<f64>, i: usize, b: &Array2<f64>, j: usize) -> f64 {
    let (x, y) = (a.column(i), b.column(j));
    let (nx, ny) = (x.dot(&x).sqrt(), y.dot(&y).sqrt());
    if nx == 0.0 || ny == 0.0 {
        0.0
    } else {
        x.dot(&y) / (nx * ny)
    }
}

fn brute_force_score(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let r = a.ncols();
    permutations(r)
        .iter()
        .map(|p| (0..r).map(|j| cosine(a, j, b, p[j])).sum::<f64>() / r as f64)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn random_matrix(seed: u64, rows: usize, cols: usize) -> Array2<f64> {
    let mut rng = rng(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    Array2::from_shape_simple_fn((rows, cols), || normal.sample(&mut rng))
}

#[test]
fn score_matches_permutation_enumeration() {
    for (seed, r) in [(1, 2), (2, 4), (3, 6), (4, 8), (5, 9)] {
        let a = random_matrix(seed, 7, r);
        let b = random_matrix(seed + 100, 7, r);
        let s = cosine_score(&a, &b).unwrap();
        let oracle = brute_force_score(&a, &b);
        assert!((s - oracle).abs() < 1e-12, "r={r}: {s} vs {oracle}");
    }
}

#[test]
fn generated_tensor_is_symmetric_and_binary() {
    let cfg = BinaryGenConfig {
        m: 3,
        n: 12,
        r: 3,
        seed: 9,
        ..BinaryGenConfig::default()
    };
    let g = generate_binary(&cfg).unwrap();
    assert!(g.x.values().iter().all(|v| *v == 1.0));
    assert_eq!(g.x.max_symmetry_deviation(&ModePartition::full(3)).unwrap(), 0.0);
    let noise = g.a_star.column(2);
    assert!(noise.iter().all(|v| *v == cfg.noise_value()));
    let again = generate_binary(&cfg).unwrap();
    assert_eq!(g.x, again.x);
    assert_eq!(g.a_star, again.a_star);
}

#[test]
fn negate_fix_keeps_the_model_for_odd_multiplicity() {
    let a = random_matrix(7, 5, 3);
    let flipped = {
        let mut f = a.clone();
        f.column_mut(1).mapv_inplace(|v| -v);
        f
    };
    let lambda = vec![1.0, 2.0, 3.0];
    let lam_flipped = vec![1.0, -2.0, 3.0];
    let (fixed, lam) = negate_fix(&flipped, &lam_flipped, &a, 3).unwrap();
    assert_eq!(lam, lambda);
    assert!((cosine_score(&a, &fixed).unwrap() - 1.0).abs() < 1e-12);
    let before = SymKruskal::new(lam_flipped, vec![flipped], ModePartition::full(3)).unwrap();
    let after = SymKruskal::new(lam, vec![fixed], ModePartition::full(3)).unwrap();
    for (x, y) in before.reconstruct().values().iter().zip(after.reconstruct().values()) {
        assert!((x - y).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn score_ignores_column_order_and_scale(seed in any::<u64>(), r in 1usize..7) {
        let a = random_matrix(seed, 6, r);
        let perm: Vec<usize> = (0..r).rev().collect();
        let mut b = Array2::zeros((6, r));
        for (j, &p) in perm.iter().enumerate() {
            b.column_mut(j).assign(&(&a.column(p) * (1.0 + j as f64)));
        }
        prop_assert!((cosine_score(&a, &b).unwrap() - 1.0).abs() < 1e-12);
    }
}
