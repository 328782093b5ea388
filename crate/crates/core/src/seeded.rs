//! Seeded, portable pseudo-randomness for reproducible families.
//!
//! The generator is SplitMix64 (Steele, Lea, Vigna): a single 64-bit state
//! advanced by the golden-ratio increment and finalized by two xor-shift
//! multiplies. It is trivially portable, so seeded verification families
//! reproduce bit-for-bit across platforms.

use crate::field::DensityField;
use crate::grid::Grid;

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> SplitMix64 {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1) with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn next_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

/// A smooth random density `1 + s * (trigonometric polynomial)` with
/// `n_modes` harmonics, rescaled so the minimum stays at `floor > 0` away
/// from vacuum, then normalized to `target_mass`.
pub fn random_trig_density(
    grid: &Grid,
    rng: &mut SplitMix64,
    n_modes: usize,
    floor: f64,
    target_mass: f64,
) -> DensityField {
    let tau = 2.0 * std::f64::consts::PI / grid.length();
    let coeffs: Vec<(f64, f64)> = (0..n_modes)
        .map(|k| {
            let decay = 1.0 / (k + 1) as f64;
            (rng.next_in(-1.0, 1.0) * decay, rng.next_in(-1.0, 1.0) * decay)
        })
        .collect();
    let bump = |x: f64| -> f64 {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, &(a, b))| {
                let w = (k + 1) as f64 * tau * x;
                a * w.cos() + b * w.sin()
            })
            .sum()
    };
    let raw: Vec<f64> = grid.cell_centers().iter().map(|&x| bump(x)).collect();
    let amp = raw.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let scale = (1.0 - floor) / amp;
    let values: Vec<f64> = raw.iter().map(|v| 1.0 + scale * v).collect();
    DensityField::from_raw(grid, values)
        .normalized_to(target_mass)
        .expect("trig density has positive mass")
}
