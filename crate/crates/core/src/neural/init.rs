//! Seeded weight initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tensor::{Scalar, Tensor};

/// Deterministic initializer. All sampling happens in 64-bit and is then
/// converted, so a given seed yields the same weights in f32 and f64 runs
/// (up to rounding).
pub struct Initializer {
    rng: ChaCha8Rng,
}

impl Initializer {
    pub fn new(seed: u64) -> Self {
        Initializer {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform in [-r, r] with r = sqrt(6 / (fan_in + fan_out)).
    pub fn glorot_uniform<F: Scalar>(&mut self, rows: usize, cols: usize) -> Tensor<F> {
        let r = (6.0 / (rows + cols) as f64).sqrt();
        let data: Vec<F> = (0..rows * cols)
            .map(|_| F::from_f64(self.rng.gen_range(-r..r)))
            .collect();
        Tensor::from_vec(rows, cols, data)
    }

    /// Square orthogonal matrix via Gram-Schmidt on a Gaussian draw.
    pub fn orthogonal<F: Scalar>(&mut self, n: usize) -> Tensor<F> {
        loop {
            let mut rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| self.gaussian()).collect())
                .collect();
            let mut ok = true;
            for i in 0..n {
                for j in 0..i {
                    let dot: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
                    let (a, b) = {
                        let prev = rows[j].clone();
                        (dot, prev)
                    };
                    for (x, p) in rows[i].iter_mut().zip(&b) {
                        *x -= a * p;
                    }
                }
                let norm: f64 = rows[i].iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm < 1e-8 {
                    ok = false;
                    break;
                }
                for x in rows[i].iter_mut() {
                    *x /= norm;
                }
            }
            if ok {
                let data: Vec<F> = rows
                    .into_iter()
                    .flatten()
                    .map(F::from_f64)
                    .collect();
                return Tensor::from_vec(n, n, data);
            }
        }
    }

    pub fn constant<F: Scalar>(&mut self, rows: usize, cols: usize, v: f64) -> Tensor<F> {
        Tensor::from_vec(rows, cols, vec![F::from_f64(v); rows * cols])
    }

    fn gaussian(&mut self) -> f64 {
        // Box-Muller.
        let u1: f64 = self.rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = self.rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}
