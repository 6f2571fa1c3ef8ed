//! Seeded random sampling shared by the measurement routines.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Real;

/// Default seed for every sampled check.
pub const DEFAULT_SEED: u64 = 42;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform point in the box `[lo, hi]`.
pub fn uniform_in_box<T: Real, R: Rng>(rng: &mut R, lo: &[T], hi: &[T]) -> Vec<T> {
    lo.iter()
        .zip(hi)
        .map(|(&a, &b)| {
            let u: f64 = rng.gen();
            a + (b - a) * T::lit(u)
        })
        .collect()
}

/// `count` uniform point pairs in the box.
pub fn pairs_in_box<T: Real, R: Rng>(
    rng: &mut R,
    lo: &[T],
    hi: &[T],
    count: usize,
) -> Vec<(Vec<T>, Vec<T>)> {
    (0..count)
        .map(|_| (uniform_in_box(rng, lo, hi), uniform_in_box(rng, lo, hi)))
        .collect()
}

/// Uniform direction on the unit sphere of `ℝ^dim`.
pub fn unit_vector<T: Real, R: Rng>(rng: &mut R, dim: usize) -> Vec<T> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 && n <= 1.0 {
            return v.iter().map(|x| T::lit(x / n)).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let a: Vec<f64> = uniform_in_box(&mut rng(7), &[0.0, 0.0], &[1.0, 2.0]);
        let b: Vec<f64> = uniform_in_box(&mut rng(7), &[0.0, 0.0], &[1.0, 2.0]);
        assert_eq!(a, b);
        assert!(a[1] >= 0.0 && a[1] <= 2.0);
    }

    #[test]
    fn unit_vectors_are_unit() {
        let mut r = rng(1);
        for _ in 0..20 {
            let v: Vec<f64> = unit_vector(&mut r, 3);
            let n: f64 = v.iter().map(|x| x * x).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }
}
