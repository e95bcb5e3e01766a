//! Samplers for the three randomness families: uniform parity matrices,
//! right-hand sides (uniform or small-bias), and κ-wise independent
//! sign-flip vectors.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Gf2w;
use crate::gf2::{BitMatrix, BitVector};
use crate::rng::{tag, LabRng};

/// `k x m` matrix with i.i.d. uniform entries (rows uniform and independent,
/// hence pairwise-independent columns).
pub fn sample_parity_matrix(k: usize, m: usize, rng: &mut LabRng) -> BitMatrix {
    let rows = (0..k).map(|_| uniform_bits(m, rng)).collect();
    BitMatrix::from_rows(rows, m).expect("rows built with length m")
}

pub fn uniform_bits(len: usize, rng: &mut LabRng) -> BitVector {
    BitVector::from_bits((0..len).map(|_| rng.gen::<bool>()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RhsMode {
    Uniform,
    DeltaBiased { delta: f64 },
}

impl Default for RhsMode {
    fn default() -> Self {
        RhsMode::Uniform
    }
}

/// Field width used by the powering generator so that `(k-1)/2^w <= delta`.
pub fn small_bias_width(k: usize, delta: f64) -> Result<u32> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta", format!("{delta} not in (0,1)")));
    }
    let need = ((k.max(2) - 1) as f64 / delta).log2().ceil().max(1.0);
    if need > 64.0 {
        return Err(Error::invalid(
            "delta",
            format!("bias {delta} at k={k} needs a field wider than 64 bits"),
        ));
    }
    Ok(need as u32)
}

/// Samples `b ∈ {0,1}^k`.
///
/// The biased mode is the powering generator: draw `x, y` uniform in
/// GF(2^w) and output bit `j = <x^j, y>` (inner product of the bit
/// representations). Every nonzero parity of the output has bias at most
/// `(k-1)/2^w <= delta`; the seed is `2w = O(log k + log 1/delta)` bits.
pub fn sample_rhs(k: usize, mode: RhsMode, rng: &mut LabRng) -> Result<BitVector> {
    match mode {
        RhsMode::Uniform => Ok(uniform_bits(k, rng)),
        RhsMode::DeltaBiased { delta } => {
            let w = small_bias_width(k, delta)?;
            let field = Gf2w::new(w)?;
            let x = rng.gen::<u64>() & field.mask();
            let y = rng.gen::<u64>() & field.mask();
            let mut power = 1u64;
            let bits = (0..k).map(|_| {
                let bit = (power & y).count_ones() % 2 == 1;
                power = field.mul(power, x);
                bit
            });
            Ok(BitVector::from_bits(bits.collect::<Vec<_>>()))
        }
    }
}

/// Default symmetrization parameters `s = ceil(20 log2(mt))`, `κ = ceil(12 log2(mt))`.
///
/// `s` is bumped to the next odd number so the majority vote never ties.
pub fn default_symmetrization(m: usize, t: usize) -> (usize, usize) {
    let l = ((m * t).max(2) as f64).log2();
    let mut s = (20.0 * l).ceil() as usize;
    if s % 2 == 0 {
        s += 1;
    }
    let kappa = (12.0 * l).ceil() as usize;
    (s, kappa)
}

/// κ-wise independent family `σ: [m] -> {0,1}`.
///
/// A draw is a uniformly random polynomial of degree `κ-1` over GF(2^w)
/// with `2^w >= m`; coordinate `j` is the low bit of the polynomial at the
/// field element `j`. Values at κ distinct points are jointly uniform, so
/// any κ coordinates are independent fair bits.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignFlipFamily {
    pub kappa: usize,
    pub m: usize,
    pub field_width: u32,
    pub seed: u64,
}

impl SignFlipFamily {
    pub fn new(kappa: usize, m: usize, seed: u64) -> Result<Self> {
        if kappa == 0 {
            return Err(Error::invalid("kappa", "must be at least 1"));
        }
        if m == 0 {
            return Err(Error::invalid("m", "must be at least 1"));
        }
        Ok(Self {
            kappa,
            m,
            field_width: Gf2w::width_for(m),
            seed,
        })
    }

    /// Coefficients of draw `r`, taken from a dedicated substream.
    pub fn coefficients(&self, r: u64) -> Vec<u64> {
        let field = Gf2w::new(self.field_width).expect("width validated at construction");
        let mut rng = LabRng::for_stream(self.seed, tag::SIGN_FLIP, r);
        (0..self.coefficient_count()).map(|_| rng.gen::<u64>() & field.mask()).collect()
    }

    /// Beyond `2^w` coefficients the polynomial is already a uniformly random
    /// function on every field point, so the degree is capped there.
    pub fn coefficient_count(&self) -> usize {
        self.kappa.min(1usize << self.field_width.min(20))
    }

    /// Seed bits consumed by one draw.
    pub fn seed_bits_per_draw(&self) -> usize {
        self.coefficient_count() * self.field_width as usize
    }

    pub fn draw(&self, r: u64) -> BitVector {
        let field = Gf2w::new(self.field_width).expect("width validated at construction");
        let coeffs = self.coefficients(r);
        BitVector::from_bits((0..self.m).map(|j| field.eval_poly(&coeffs, j as u64) & 1 == 1))
    }
}

/// `draw_sign_flip(family, r)`.
pub fn draw_sign_flip(family: &SignFlipFamily, r: u64) -> BitVector {
    family.draw(r)
}
