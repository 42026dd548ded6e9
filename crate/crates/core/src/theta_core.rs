//! Theta units: mismatch sampling, the velocity-to-frequency law, phase
//! accumulation and the 8-tap square-wave readout.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StdNormal};

use crate::error::{Error, Result};

/// Lower truncation bound for sampled idle frequencies.
pub const F_IDLE_FLOOR: f64 = 100.0;
/// Smallest frequency the law will report.
pub const MIN_FREQUENCY: f64 = 1e-6;
/// Taps per unit.
pub const TAPS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Response {
    #[default]
    Linear,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct VelocityVector {
    pub vx: f64,
    pub vy: f64,
}

impl VelocityVector {
    pub const ZERO: VelocityVector = VelocityVector { vx: 0.0, vy: 0.0 };

    pub fn new(vx: f64, vy: f64) -> Self {
        Self { vx, vy }
    }

    pub fn dot(&self, other: &VelocityVector) -> f64 {
        self.vx * other.vx + self.vy * other.vy
    }

    pub fn norm(&self) -> f64 {
        self.vx.hypot(self.vy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaUnit {
    pub f_idle: f64,
    pub beta: f64,
    pub v_pref_code: [u8; 2],
    pub response: Response,
    /// Half-range of the sigmoid response in Hz.
    pub f_swing: f64,
    pub dac_offset: [f64; 2],
}

impl ThetaUnit {
    pub fn linear(f_idle: f64, beta: f64) -> Self {
        Self {
            f_idle,
            beta,
            v_pref_code: [8, 8],
            response: Response::Linear,
            f_swing: DEFAULT_F_SWING,
            dac_offset: [0.0, 0.0],
        }
    }

    /// Decoded preferred velocity.
    pub fn v_pref(&self) -> Result<VelocityVector> {
        Ok(VelocityVector::new(
            decode_velocity_code(self.v_pref_code[0])? as f64,
            decode_velocity_code(self.v_pref_code[1])? as f64,
        ))
    }

    /// Inner product of the (offset-shifted) velocity with the preferred velocity.
    pub fn inner_product(&self, v: VelocityVector) -> Result<f64> {
        let vp = self.v_pref()?;
        Ok((v.vx + self.dac_offset[0]) * vp.vx + (v.vy + self.dac_offset[1]) * vp.vy)
    }
}

pub const DEFAULT_F_SWING: f64 = 400.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    /// Independent truncated Gaussian draws.
    #[default]
    Random,
    /// Deterministic normal quantiles with a fixed gain permutation.
    Quantile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PopulationSpec {
    pub n_units: usize,
    pub f_idle_mean: f64,
    pub f_idle_std: f64,
    pub beta_mean: f64,
    pub beta_std: f64,
    pub dac_offset_std: f64,
    pub response: Response,
    pub f_swing: f64,
    pub sampling: Sampling,
    pub seed: u64,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        Self {
            n_units: 128,
            f_idle_mean: 2023.771,
            f_idle_std: 374.611,
            beta_mean: 20.802,
            beta_std: 3.688,
            dac_offset_std: 0.0,
            response: Response::Linear,
            f_swing: DEFAULT_F_SWING,
            sampling: Sampling::Random,
            seed: 0,
        }
    }
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpec(m.to_string()));
        if self.n_units == 0 {
            return bad("n_units must be >= 1");
        }
        let all = [
            self.f_idle_mean,
            self.f_idle_std,
            self.beta_mean,
            self.beta_std,
            self.dac_offset_std,
            self.f_swing,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return bad("non-finite parameter");
        }
        if self.f_idle_mean <= F_IDLE_FLOOR {
            return bad("f_idle_mean must exceed the 100 Hz truncation floor");
        }
        if self.beta_mean <= 0.0 {
            return bad("beta_mean must be positive");
        }
        if self.f_idle_std < 0.0 || self.beta_std < 0.0 || self.dac_offset_std < 0.0 {
            return bad("standard deviations must be >= 0");
        }
        if self.f_swing <= 0.0 {
            return bad("f_swing must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaPopulation {
    pub units: Vec<ThetaUnit>,
}

impl ThetaPopulation {
    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }
}

fn truncated(dist: &Normal<f64>, rng: &mut ChaCha8Rng, floor: f64) -> f64 {
    loop {
        let x = dist.sample(rng);
        if x > floor {
            return x;
        }
    }
}

fn coprime_stride(n: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    (37..).find(|s| gcd(*s, n) == 1).unwrap_or(1)
}

pub fn sample_population(spec: &PopulationSpec) -> Result<ThetaPopulation> {
    spec.validate()?;
    let n = spec.n_units;
    let mut units = Vec::with_capacity(n);
    match spec.sampling {
        Sampling::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let nf = Normal::new(spec.f_idle_mean, spec.f_idle_std)
                .map_err(|e| Error::InvalidSpec(e.to_string()))?;
            let nb = Normal::new(spec.beta_mean, spec.beta_std)
                .map_err(|e| Error::InvalidSpec(e.to_string()))?;
            let nd = Normal::new(0.0, spec.dac_offset_std)
                .map_err(|e| Error::InvalidSpec(e.to_string()))?;
            for _ in 0..n {
                let f_idle = truncated(&nf, &mut rng, F_IDLE_FLOOR);
                let beta = truncated(&nb, &mut rng, 0.0);
                let dac_offset = [nd.sample(&mut rng), nd.sample(&mut rng)];
                units.push(ThetaUnit {
                    response: spec.response,
                    f_swing: spec.f_swing,
                    dac_offset,
                    ..ThetaUnit::linear(f_idle, beta)
                });
            }
        }
        Sampling::Quantile => {
            let z = StdNormal::new(0.0, 1.0).expect("standard normal");
            let q: Vec<f64> = (0..n)
                .map(|i| z.inverse_cdf((i as f64 + 0.5) / n as f64))
                .collect();
            let stride = coprime_stride(n);
            for i in 0..n {
                let f_idle = (spec.f_idle_mean + spec.f_idle_std * q[i]).max(F_IDLE_FLOOR + 0.5);
                let beta = (spec.beta_mean + spec.beta_std * q[(i * stride) % n]).max(1e-3);
                units.push(ThetaUnit {
                    response: spec.response,
                    f_swing: spec.f_swing,
                    ..ThetaUnit::linear(f_idle, beta)
                });
            }
        }
    }
    Ok(ThetaPopulation { units })
}

/// Maps a 4-bit code to a signed velocity unit; 8 is zero.
pub fn decode_velocity_code(code: u8) -> Result<i32> {
    if !(1..=15).contains(&code) {
        return Err(Error::InvalidCode(code));
    }
    Ok(code as i32 - 8)
}

/// Inverse of [`decode_velocity_code`].
pub fn encode_velocity(value: i32) -> Result<u8> {
    if !(-7..=7).contains(&value) {
        return Err(Error::InvalidArgument(format!("velocity {value} outside [-7, 7]")));
    }
    Ok((value + 8) as u8)
}

pub fn instantaneous_frequency(unit: &ThetaUnit, v: VelocityVector) -> Result<f64> {
    let p = unit.inner_product(v)?;
    Ok(frequency_at(unit, p))
}

/// Frequency law evaluated at a given inner product.
pub fn frequency_at(unit: &ThetaUnit, p: f64) -> f64 {
    let f = match unit.response {
        Response::Linear => unit.f_idle + unit.beta * p,
        Response::Sigmoid => unit.f_idle + unit.f_swing * (unit.beta * p / unit.f_swing).tanh(),
    };
    f.max(MIN_FREQUENCY)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OscillatorState {
    pub phase: f64,
    pub held: bool,
}

impl OscillatorState {
    pub fn step(&self, f: f64, dt: f64) -> Result<OscillatorState> {
        if !(f >= 0.0) || !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("step with f={f}, dt={dt}")));
        }
        let inc = f * dt;
        if inc >= 0.5 {
            return Err(Error::Aliasing(inc));
        }
        if self.held {
            return Ok(OscillatorState { phase: 0.0, held: true });
        }
        let mut phase = self.phase + inc;
        if phase >= 1.0 {
            phase -= 1.0;
        }
        Ok(OscillatorState { phase, held: false })
    }

    pub fn tap_output(&self, k: usize) -> bool {
        tap_bit(self.phase, k)
    }
}

/// Square-wave value of tap `k` at `phase`.
pub fn tap_bit(phase: f64, k: usize) -> bool {
    assert!(k < TAPS, "tap index {k} out of range");
    let x = phase + k as f64 / TAPS as f64;
    x - x.floor() < 0.5
}

pub fn step(state: &OscillatorState, f: f64, dt: f64) -> Result<OscillatorState> {
    state.step(f, dt)
}

pub fn tap_output(state: &OscillatorState, k: usize) -> Result<bool> {
    if k >= TAPS {
        return Err(Error::InvalidArgument(format!("tap index {k} out of range")));
    }
    Ok(state.tap_output(k))
}

/// Zeroes every phase and asserts hold.
pub fn reset_all(states: &mut [OscillatorState]) {
    for s in states {
        s.phase = 0.0;
        s.held = true;
    }
}

pub fn release_all(states: &mut [OscillatorState]) {
    for s in states {
        s.held = false;
    }
}
