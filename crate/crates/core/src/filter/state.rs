use super::{LinearFilter, Shape};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

/// Recursive evaluation of a filter: one state per pole.
///
/// For a simple pole the state is `s_k(n) = Σ_{j≥1} α_k^{j−1} U_{n−j}`, so
/// `V_n = a0 U_n + Σ_k ρ_k s_k(n)` and `s_k(n+1) = α_k s_k(n) + U_n`. The
/// double pole carries an EMA and an EMA of that EMA.
#[derive(Debug, Clone)]
pub struct FilterState {
    kind: StateKind,
}

#[derive(Debug, Clone)]
enum StateKind {
    Simple {
        poles: Vec<Complex64>,
        residues: Vec<Complex64>,
        a0: f64,
        states: Vec<Complex64>,
    },
    Double {
        alpha: f64,
        gain: f64,
        ema: f64,
        double: f64,
    },
}

impl FilterState {
    pub fn new(filter: &LinearFilter) -> Self {
        let kind = match filter.shape {
            Shape::Simple { .. } => {
                let (poles, residues, a0) = filter.simple_terms().unwrap();
                let states = vec![Complex64::new(0.0, 0.0); poles.len()];
                StateKind::Simple {
                    poles,
                    residues,
                    a0,
                    states,
                }
            }
            Shape::DoublePole { alpha } => StateKind::Double {
                alpha,
                gain: filter.gain(),
                ema: 0.0,
                double: 0.0,
            },
        };
        Self { kind }
    }

    /// State drawn from the stationary law under i.i.d. N(0, 1) returns, as
    /// if the filter had been running forever. Available when all poles are
    /// real; `None` otherwise.
    pub fn stationary<R: Rng + ?Sized>(filter: &LinearFilter, rng: &mut R) -> Option<Self> {
        let mut state = Self::new(filter);
        match &mut state.kind {
            StateKind::Simple { poles, states, .. } => {
                if poles.iter().any(|p| p.im != 0.0) {
                    return None;
                }
                let n = poles.len();
                if n == 0 {
                    return Some(state);
                }
                let cov = DMatrix::from_fn(n, n, |i, j| 1.0 / (1.0 - poles[i].re * poles[j].re));
                let draws = correlated_normals(cov, rng);
                for (s, x) in states.iter_mut().zip(draws) {
                    *s = Complex64::new(x, 0.0);
                }
            }
            StateKind::Double { alpha, ema, double, .. } => {
                let (s1, s2) = LinearFilter::double_pole_sums(*alpha);
                let x = *alpha * *alpha;
                let cov = DMatrix::from_row_slice(2, 2, &[1.0 / (1.0 - x), s1, s1, s2]);
                let draws = correlated_normals(cov, rng);
                *ema = draws[0];
                *double = draws[1];
            }
        }
        Some(state)
    }

    /// Feeds `U_n` and returns `V_n`.
    pub fn push(&mut self, u: f64) -> f64 {
        match &mut self.kind {
            StateKind::Simple {
                poles,
                residues,
                a0,
                states,
            } => {
                let mut v = *a0 * u;
                for ((s, p), r) in states.iter_mut().zip(poles.iter()).zip(residues.iter()) {
                    v += (r * *s).re;
                    *s = p * *s + u;
                }
                v
            }
            StateKind::Double {
                alpha,
                gain,
                ema,
                double,
            } => {
                *ema = *alpha * *ema + u;
                *double = *alpha * *double + *ema;
                *gain * *double
            }
        }
    }
}

/// Draws from N(0, cov) using a symmetric square root (robust to the
/// near-singular Cauchy-like covariances of close poles).
fn correlated_normals<R: Rng + ?Sized>(cov: DMatrix<f64>, rng: &mut R) -> Vec<f64> {
    let n = cov.nrows();
    let eig = SymmetricEigen::new(cov);
    let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|k| eig.eigenvectors[(i, k)] * eig.eigenvalues[k].max(0.0).sqrt() * z[k])
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn check_against_convolution(f: &LinearFilter) {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u: Vec<f64> = (0..300).map(|_| rng.sample(StandardNormal)).collect();
        let a = f.weights(300);
        let mut st = f.state();
        for (n, &un) in u.iter().enumerate() {
            let v = st.push(un);
            let want: f64 = (0..=n).map(|j| a[j] * u[n - j]).sum();
            assert!((v - want).abs() < 1e-11, "n={n}: {v} vs {want}");
        }
    }

    #[test]
    fn recursion_matches_convolution() {
        check_against_convolution(&LinearFilter::ema1(20.0, true).unwrap());
        check_against_convolution(&LinearFilter::ema2(5.0, 12.0, false).unwrap());
        check_against_convolution(&LinearFilter::ema2(8.0, 8.0, true).unwrap());
        let p = Complex64::new(0.6, 0.3);
        let r = Complex64::new(0.4, -0.2);
        check_against_convolution(&LinearFilter::from_poles(vec![p, p.conj()], vec![r, r.conj()], 0.5).unwrap());
    }

    #[test]
    fn stationary_start_has_unit_variance() {
        for f in [
            LinearFilter::ema2(10.0, 20.0, true).unwrap(),
            LinearFilter::ema2(10.0, 10.0, true).unwrap(),
        ] {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let n = 20000;
            let mut acc = 0.0;
            for _ in 0..n {
                let mut st = FilterState::stationary(&f, &mut rng).unwrap();
                let v = st.push(rng.sample(StandardNormal));
                acc += v * v;
            }
            let var = acc / n as f64;
            // SE of a variance estimate is about sqrt(2/n) ≈ 0.01
            assert!((var - 1.0).abs() < 0.05, "variance {var}");
        }
    }
}
