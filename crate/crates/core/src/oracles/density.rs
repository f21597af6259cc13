//! Density-matrix simulation of the distillation circuit.
//!
//! Simulates the full protocol on the 16-dimensional state of two shared
//! pairs: local X-rotations (`+pi/2` on one side, `-pi/2` on the other),
//! bilateral CNOTs, measurement of the second pair in the computational
//! basis, and post-selection on coinciding outcomes. This is an
//! independent route to the distillation map and its success probability;
//! it never touches the closed-form coefficient update.

use num_complex::Complex64;

use crate::quantum::BellDiagonalState;

type C = Complex64;

const DIM: usize = 16;

/// Dense square complex matrix, row-major.
#[derive(Clone)]
struct Mat {
    n: usize,
    data: Vec<C>,
}

impl Mat {
    fn zeros(n: usize) -> Self {
        Mat {
            n,
            data: vec![C::ZERO; n * n],
        }
    }

    fn at(&self, i: usize, j: usize) -> C {
        self.data[i * self.n + j]
    }

    fn set(&mut self, i: usize, j: usize, v: C) {
        self.data[i * self.n + j] = v;
    }

    fn mul(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.n, rhs.n);
        let n = self.n;
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.at(i, k);
                if a == C::ZERO {
                    continue;
                }
                for j in 0..n {
                    let v = out.at(i, j) + a * rhs.at(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    fn dagger(&self) -> Mat {
        let mut out = Mat::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out.set(i, j, self.at(j, i).conj());
            }
        }
        out
    }

    fn kron(&self, rhs: &Mat) -> Mat {
        let n = self.n * rhs.n;
        let mut out = Mat::zeros(n);
        for i1 in 0..self.n {
            for j1 in 0..self.n {
                let a = self.at(i1, j1);
                if a == C::ZERO {
                    continue;
                }
                for i2 in 0..rhs.n {
                    for j2 in 0..rhs.n {
                        out.set(i1 * rhs.n + i2, j1 * rhs.n + j2, a * rhs.at(i2, j2));
                    }
                }
            }
        }
        out
    }

    fn trace(&self) -> C {
        (0..self.n).map(|i| self.at(i, i)).sum()
    }
}

/// Bell basis vectors over two qubits in the coefficient order
/// `(Phi+, Psi-, Psi+, Phi-)`.
fn bell_vectors() -> [[C; 4]; 4] {
    let s = C::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let z = C::ZERO;
    [
        [s, z, z, s],   // Phi+
        [z, s, -s, z],  // Psi-
        [z, s, s, z],   // Psi+
        [s, z, z, -s],  // Phi-
    ]
}

/// 4x4 density matrix of a Bell-diagonal state.
fn bds_density(state: &BellDiagonalState) -> Mat {
    let bells = bell_vectors();
    let coeffs = state.coefficients();
    let mut rho = Mat::zeros(4);
    for (vec, w) in bells.iter().zip(coeffs) {
        for i in 0..4 {
            for j in 0..4 {
                let v = rho.at(i, j) + C::new(w, 0.0) * vec[i] * vec[j].conj();
                rho.set(i, j, v);
            }
        }
    }
    rho
}

/// `Rx(theta)` on one qubit.
fn rx(theta: f64) -> Mat {
    let c = C::new((theta / 2.0).cos(), 0.0);
    let s = C::new(0.0, -(theta / 2.0).sin());
    let mut m = Mat::zeros(2);
    m.set(0, 0, c);
    m.set(0, 1, s);
    m.set(1, 0, s);
    m.set(1, 1, c);
    m
}

/// Single-qubit gate embedded at `pos` in the 4-qubit register ordered
/// `(A1, B1, A2, B2)`.
fn embed(gate: &Mat, pos: usize) -> Mat {
    let id = {
        let mut m = Mat::zeros(2);
        m.set(0, 0, C::ONE);
        m.set(1, 1, C::ONE);
        m
    };
    let mut out: Option<Mat> = None;
    for q in 0..4 {
        let factor = if q == pos { gate.clone() } else { id.clone() };
        out = Some(match out {
            None => factor,
            Some(acc) => acc.kron(&factor),
        });
    }
    out.unwrap()
}

/// CNOT as a permutation over the 4-qubit basis. Bits are indexed
/// most-significant-first: A1 = bit 3, B1 = bit 2, A2 = bit 1, B2 = bit 0.
fn cnot(control_bit: usize, target_bit: usize) -> Mat {
    let mut m = Mat::zeros(DIM);
    for col in 0..DIM {
        let row = if col & (1 << control_bit) != 0 {
            col ^ (1 << target_bit)
        } else {
            col
        };
        m.set(row, col, C::ONE);
    }
    m
}

/// Runs the circuit on two Bell-diagonal inputs. Returns the Bell
/// coefficients of the surviving pair, the success probability, and the
/// largest off-diagonal magnitude in the Bell basis (a sanity figure: the
/// output must stay Bell-diagonal).
pub fn distill_circuit(
    s1: &BellDiagonalState,
    s2: &BellDiagonalState,
) -> ([f64; 4], f64, f64) {
    let rho = bds_density(s1).kron(&bds_density(s2));

    // Alice rotates A1, A2 by +pi/2; Bob rotates B1, B2 by -pi/2.
    let mut u = embed(&rx(std::f64::consts::FRAC_PI_2), 0);
    u = embed(&rx(-std::f64::consts::FRAC_PI_2), 1).mul(&u);
    u = embed(&rx(std::f64::consts::FRAC_PI_2), 2).mul(&u);
    u = embed(&rx(-std::f64::consts::FRAC_PI_2), 3).mul(&u);
    // Bilateral CNOTs: A1 -> A2 and B1 -> B2.
    u = cnot(3, 1).mul(&u);
    u = cnot(2, 0).mul(&u);

    let rho = u.mul(&rho).mul(&u.dagger());

    // Measure A2 (bit 1) and B2 (bit 0); keep coincident outcomes.
    let mut kept = Mat::zeros(DIM);
    for outcome in [0usize, 3usize] {
        let mut proj = Mat::zeros(DIM);
        for i in 0..DIM {
            if i & 3 == outcome {
                proj.set(i, i, C::ONE);
            }
        }
        let term = proj.mul(&rho).mul(&proj);
        for k in 0..DIM * DIM {
            kept.data[k] += term.data[k];
        }
    }
    let p_success = kept.trace().re;

    // Partial trace over (A2, B2) down to (A1, B1).
    let mut reduced = Mat::zeros(4);
    for a in 0..4 {
        for b in 0..4 {
            let mut sum = C::ZERO;
            for e in 0..4 {
                sum += kept.at(a * 4 + e, b * 4 + e);
            }
            reduced.set(a, b, sum / C::new(p_success, 0.0));
        }
    }

    let bells = bell_vectors();
    let mut coeffs = [0.0; 4];
    let mut max_offdiag = 0.0f64;
    for (m, bm) in bells.iter().enumerate() {
        for (n, bn) in bells.iter().enumerate() {
            let mut amp = C::ZERO;
            for i in 0..4 {
                for j in 0..4 {
                    amp += bm[i].conj() * reduced.at(i, j) * bn[j];
                }
            }
            if m == n {
                coeffs[m] = amp.re;
            } else {
                max_offdiag = max_offdiag.max(amp.norm());
            }
        }
    }
    (coeffs, p_success, max_offdiag)
}

/// Uniform sample from the probability simplex (coefficients of a random
/// Bell-diagonal state).
pub fn random_bds(rng: &mut impl rand::Rng) -> BellDiagonalState {
    loop {
        let raw: [f64; 4] = std::array::from_fn(|_| -rng.random::<f64>().max(1e-300).ln());
        let sum: f64 = raw.iter().sum();
        let state = BellDiagonalState::new(raw[0] / sum, raw[1] / sum, raw[2] / sum, raw[3] / sum)
            .expect("simplex sample is a valid state");
        // Keep the success probability away from zero so the comparison
        // tolerance is meaningful after the division.
        let p = (state.a() + state.b()) * (state.a() + state.b())
            + (state.c() + state.d()) * (state.c() + state.d());
        if p > 1e-3 {
            return state;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn circuit_matches_closed_form_on_werner_inputs() {
        let w = crate::quantum::WernerState::new(0.9).unwrap().to_bell_diagonal();
        let (coeffs, p, offdiag) = distill_circuit(&w, &w);
        assert!(offdiag < 1e-12);
        assert_relative_eq!(p, 0.8755555555555556, max_relative = 1e-12);
        assert_relative_eq!(coeffs[0], 0.9263959390862944, max_relative = 1e-12);
        let (closed, p_closed) = crate::quantum::dejmps_distill(&w, &w);
        assert_relative_eq!(p, p_closed, max_relative = 1e-12);
        for (x, y) in coeffs.iter().zip(closed.coefficients()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
