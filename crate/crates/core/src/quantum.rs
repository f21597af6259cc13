//! Bell-diagonal state algebra and secret-key-rate utilities.
//!
//! All operations here are pure and stateless; they may be called from any
//! number of concurrent workers without synchronization.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Coefficient drift below this is absorbed silently.
pub const NORM_TOLERANCE: f64 = 1e-12;
/// Coefficient drift above this is treated as a logic bug and rejected.
pub const NORM_REJECT: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("bell coefficient out of [0,1]: ({0}, {1}, {2}, {3})")]
    CoefficientOutOfRange(f64, f64, f64, f64),
    #[error("bell coefficients sum to {sum}; drift {drift:e} exceeds {max:e}")]
    NormalizationDrift { sum: f64, drift: f64, max: f64 },
    #[error("werner fidelity {0} outside [0.25, 1]")]
    FidelityOutOfRange(f64),
    #[error("invalid link parameter: {0}")]
    InvalidLinkParameter(String),
}

/// A two-qubit mixed state diagonal in the Bell basis.
///
/// Coefficients `(a, b, c, d)` weight the projectors onto
/// `{Phi+, Psi-, Psi+, Phi-}` respectively; `Phi+` is the reference state,
/// so the fidelity of the state equals `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellDiagonalState {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl BellDiagonalState {
    /// Builds a state, renormalizing drift up to [`NORM_REJECT`] and
    /// rejecting anything worse.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self, QuantumError> {
        let lo = -NORM_TOLERANCE;
        let hi = 1.0 + NORM_TOLERANCE;
        for x in [a, b, c, d] {
            if !(lo..=hi).contains(&x) || !x.is_finite() {
                return Err(QuantumError::CoefficientOutOfRange(a, b, c, d));
            }
        }
        let sum = a + b + c + d;
        let drift = (sum - 1.0).abs();
        if drift > NORM_REJECT {
            return Err(QuantumError::NormalizationDrift {
                sum,
                drift,
                max: NORM_REJECT,
            });
        }
        let (a, b, c, d) = if drift > NORM_TOLERANCE {
            (a / sum, b / sum, c / sum, d / sum)
        } else {
            (a, b, c, d)
        };
        let clamp = |x: f64| x.clamp(0.0, 1.0);
        Ok(Self {
            a: clamp(a),
            b: clamp(b),
            c: clamp(c),
            d: clamp(d),
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    /// Overlap with the reference state `Phi+`.
    pub fn fidelity(&self) -> f64 {
        self.a
    }

    pub fn coefficients(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }
}

/// Symmetric Bell-diagonal state with `b = c = d = (1 - fidelity) / 3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WernerState {
    fidelity: f64,
}

impl WernerState {
    pub fn new(fidelity: f64) -> Result<Self, QuantumError> {
        if !(0.25..=1.0 + NORM_TOLERANCE).contains(&fidelity) || !fidelity.is_finite() {
            return Err(QuantumError::FidelityOutOfRange(fidelity));
        }
        Ok(Self {
            fidelity: fidelity.min(1.0),
        })
    }

    pub fn fidelity(&self) -> f64 {
        self.fidelity
    }

    pub fn to_bell_diagonal(&self) -> BellDiagonalState {
        let rest = (1.0 - self.fidelity) / 3.0;
        BellDiagonalState {
            a: self.fidelity,
            b: rest,
            c: rest,
            d: rest,
        }
    }
}

/// Physical parameters of the elementary link between the two nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParameters {
    /// Fiber length between the nodes, km.
    pub link_length_km: f64,
    /// Attenuation length of the fiber, km.
    pub attenuation_length_km: f64,
    /// Losses beyond channel transmissivity (coupling, detectors), in [0,1].
    pub k_loss: f64,
    /// Characteristic memory time of the quantum storage, seconds.
    pub coherence_time_s: f64,
    /// Signal speed in fiber, km/s.
    pub signal_speed_km_per_s: f64,
    /// Fidelity of a freshly generated Werner pair.
    pub initial_fidelity: f64,
}

pub const DEFAULT_ATTENUATION_LENGTH_KM: f64 = 22.0;
pub const DEFAULT_K_LOSS: f64 = 0.9;
pub const DEFAULT_COHERENCE_TIME_S: f64 = 0.1;
pub const DEFAULT_SIGNAL_SPEED_KM_PER_S: f64 = 200_000.0;

impl LinkParameters {
    /// Link with default fiber/hardware constants.
    pub fn new(link_length_km: f64, initial_fidelity: f64) -> Result<Self, QuantumError> {
        Self {
            link_length_km,
            attenuation_length_km: DEFAULT_ATTENUATION_LENGTH_KM,
            k_loss: DEFAULT_K_LOSS,
            coherence_time_s: DEFAULT_COHERENCE_TIME_S,
            signal_speed_km_per_s: DEFAULT_SIGNAL_SPEED_KM_PER_S,
            initial_fidelity,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self, QuantumError> {
        let err = |m: String| Err(QuantumError::InvalidLinkParameter(m));
        if !self.link_length_km.is_finite() || self.link_length_km < 0.0 {
            return err(format!("link_length_km = {}", self.link_length_km));
        }
        if !(self.attenuation_length_km > 0.0) {
            return err(format!(
                "attenuation_length_km = {}",
                self.attenuation_length_km
            ));
        }
        if !(0.0..=1.0).contains(&self.k_loss) {
            return err(format!("k_loss = {}", self.k_loss));
        }
        if !(self.coherence_time_s > 0.0) {
            return err(format!("coherence_time_s = {}", self.coherence_time_s));
        }
        if !(self.signal_speed_km_per_s > 0.0) {
            return err(format!(
                "signal_speed_km_per_s = {}",
                self.signal_speed_km_per_s
            ));
        }
        if !(self.initial_fidelity > 0.25 && self.initial_fidelity <= 1.0) {
            return err(format!("initial_fidelity = {}", self.initial_fidelity));
        }
        let p = generation_probability(&self);
        if !(p > 0.0 && p <= 1.0) {
            return err(format!("derived p_gen = {p}"));
        }
        Ok(self)
    }

    /// One-way classical communication delay, seconds. This is the duration
    /// of one heralded generation attempt and the MDP time step.
    pub fn dt(&self) -> f64 {
        self.link_length_km / self.signal_speed_km_per_s
    }
}

/// Success probability of one heralded entanglement generation attempt:
/// `K * exp(-L / L_att)`.
pub fn generation_probability(params: &LinkParameters) -> f64 {
    params.k_loss * (-params.link_length_km / params.attenuation_length_km).exp()
}

/// Depolarizing memory noise over `elapsed_s` seconds: each coefficient `x`
/// maps to `e^(-2t/Tc) x + (1 - e^(-2t/Tc)) / 4`.
pub fn depolarize(
    state: &BellDiagonalState,
    elapsed_s: f64,
    coherence_time_s: f64,
) -> BellDiagonalState {
    assert!(elapsed_s >= 0.0, "elapsed_s must be non-negative");
    assert!(coherence_time_s > 0.0, "coherence_time_s must be positive");
    let decay = (-2.0 * elapsed_s / coherence_time_s).exp();
    let mix = (1.0 - decay) * 0.25;
    BellDiagonalState {
        a: decay * state.a + mix,
        b: decay * state.b + mix,
        c: decay * state.c + mix,
        d: decay * state.d + mix,
    }
}

/// Werner-state specialization of [`depolarize`].
pub fn depolarize_werner_fidelity(fidelity: f64, elapsed_s: f64, coherence_time_s: f64) -> f64 {
    assert!(elapsed_s >= 0.0, "elapsed_s must be non-negative");
    assert!(coherence_time_s > 0.0, "coherence_time_s must be positive");
    let decay = (-2.0 * elapsed_s / coherence_time_s).exp();
    decay * fidelity + (1.0 - decay) * 0.25
}

/// DEJMPS distillation of two Bell-diagonal states.
///
/// Returns the normalized post-distillation state and the success
/// probability `(A1+B1)(A2+B2) + (C1+D1)(C2+D2)`. For any inputs with
/// `a >= 0.25` the success probability is at least 0.25, so the division
/// cannot degenerate; this is asserted rather than handled.
pub fn dejmps_distill(
    s1: &BellDiagonalState,
    s2: &BellDiagonalState,
) -> (BellDiagonalState, f64) {
    let p_success = (s1.a + s1.b) * (s2.a + s2.b) + (s1.c + s1.d) * (s2.c + s2.d);
    assert!(
        p_success > 1e-12,
        "degenerate distillation: p_success = {p_success}"
    );
    let a = (s1.a * s2.a + s1.b * s2.b) / p_success;
    let b = (s1.c * s2.d + s2.c * s1.d) / p_success;
    let c = (s1.c * s2.c + s1.d * s2.d) / p_success;
    let d = (s1.a * s2.b + s2.a * s1.b) / p_success;
    let state = BellDiagonalState::new(a, b, c, d)
        .expect("distillation output drifted beyond tolerance");
    (state, p_success)
}

/// Symmetrization: maps a Bell-diagonal state to the Werner state with the
/// same fidelity. The input must have `a >= 0.25`, which holds for every
/// state the Werner environments produce.
pub fn twirl_to_werner(state: &BellDiagonalState) -> WernerState {
    WernerState::new(state.a).expect("twirl input fidelity below 0.25")
}

/// Binary entropy with the `0 log 0 = 0` convention. Arguments are clamped
/// to `[0, 1]`; drift beyond [`NORM_TOLERANCE`] outside that interval is a
/// logic bug.
pub fn binary_entropy(p: f64) -> f64 {
    let p = clamp_unit(p);
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -(p * p.log2()) - (1.0 - p) * (1.0 - p).log2()
}

/// Shannon entropy of the four Bell coefficients, `0 log 0 = 0`.
pub fn shannon_entropy(state: &BellDiagonalState) -> f64 {
    state
        .coefficients()
        .iter()
        .map(|&x| {
            let x = clamp_unit(x);
            if x <= 0.0 {
                0.0
            } else {
                -x * x.log2()
            }
        })
        .sum()
}

fn clamp_unit(p: f64) -> f64 {
    assert!(
        (-NORM_TOLERANCE..=1.0 + NORM_TOLERANCE).contains(&p),
        "entropy argument {p} outside [0, 1]"
    );
    p.clamp(0.0, 1.0)
}

/// Asymptotic BB84 secret key rate of a Bell-diagonal state delivered every
/// `time_s` seconds: `max(0, (1 - h(B+C) - h(B+D)) / T)`.
pub fn skr_bb84_bds(state: &BellDiagonalState, time_s: f64) -> f64 {
    assert!(time_s > 0.0, "time_s must be positive");
    let raw = 1.0 - binary_entropy(state.b + state.c) - binary_entropy(state.b + state.d);
    (raw / time_s).max(0.0)
}

/// BB84 secret key rate for a Werner state: `max(0, (1 - 2 h(2(1-F)/3)) / T)`.
pub fn skr_bb84_werner(fidelity: f64, time_s: f64) -> f64 {
    assert!(time_s > 0.0, "time_s must be positive");
    let raw = 1.0 - 2.0 * binary_entropy(2.0 / 3.0 * (1.0 - fidelity));
    (raw / time_s).max(0.0)
}

/// Six-state protocol secret key rate: `max(0, 1 - H(rho)) / T` with `H`
/// the Shannon entropy of the Bell coefficients.
pub fn skr_six_state(state: &BellDiagonalState, time_s: f64) -> f64 {
    assert!(time_s > 0.0, "time_s must be positive");
    (1.0 - shannon_entropy(state)).max(0.0) / time_s
}

/// Werner-state specialization of [`skr_six_state`], using
/// `H = -F log2 F - (1-F) log2((1-F)/3)`.
pub fn skr_six_state_werner(fidelity: f64, time_s: f64) -> f64 {
    assert!(time_s > 0.0, "time_s must be positive");
    let f = clamp_unit(fidelity);
    let mut entropy = 0.0;
    if f > 0.0 {
        entropy -= f * f.log2();
    }
    if f < 1.0 {
        entropy -= (1.0 - f) * ((1.0 - f) / 3.0).log2();
    }
    (1.0 - entropy).max(0.0) / time_s
}
