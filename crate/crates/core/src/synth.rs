//! Deterministic synthetic radargrams with layer ground truth.
//!
//! # Generator
//!
//! Every sample is driven by one `ChaCha8Rng` (crate `rand_chacha` 0.3,
//! seeded with `SeedableRng::seed_from_u64(seed)`); uniform reals are
//! `rand` 0.8's `Standard` `f64` in `[0, 1)`. Draws happen in this order:
//!
//! 1. three undulation phases `phi_k = 2*pi*U`;
//! 2. one spacing per layer, `s_i = mean_spacing * (1 + jitter * (2U - 1))`;
//! 3. one speckle draw per pixel, row-major;
//! 4. per column, one draw deciding a vertical streak (`U < perturbation_rate`)
//!    followed, for streak columns only, by a gain draw `0.6 + 0.8U`;
//! 5. per layer, one draw deciding truncation (`U < annotation_dropout`)
//!    followed, for truncated layers only, by a span length
//!    `1 + floor(U * ceil(width / 2))` (capped at `width`) and a start column
//!    `floor(U * (width - length + 1))`.
//!
//! Layer `i` (1-based) sits at `round(sum_{j<=i} s_j + A*u(x))` where
//! `u(x) = sum_k w_k sin(2*pi*k*x/wavelength + phi_k) / sum_k w_k`,
//! `w = (1, 0.5, 0.25)` and `A` is the undulation amplitude. All layers share
//! the undulation, so they never cross.
//!
//! Intensity before noise is `fill(i) + sum_l band_l(y)`, where `i` counts
//! the layers at or above row `y`, `fill(i) = 30 + 90 * decay^i` and
//! `band_l(y) = 120 * decay^(l-1) * exp(-(y - row_l)^2 / 2)`. The value is
//! multiplied by speckle `1 + noise_level * (2U - 1)` and by the column's
//! streak gain, then rounded and clamped to `0..=255`.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::types::{LayerId, LayerMap, Radargram};
use crate::{Error, Result};

const UNDULATION_WEIGHTS: [f64; 3] = [1.0, 0.5, 0.25];
const FILL_FLOOR: f64 = 30.0;
const FILL_RANGE: f64 = 90.0;
const BAND_AMPLITUDE: f64 = 120.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub height: usize,
    pub width: usize,
    pub num_layers: usize,
    pub mean_spacing_px: f64,
    /// Relative spacing jitter in `[0, 1)`.
    pub spacing_jitter: f64,
    pub undulation_amplitude_px: f64,
    pub undulation_wavelength_px: f64,
    /// Per-layer contrast factor in `[0, 1]`.
    pub contrast_decay: f64,
    pub noise_level: f64,
    /// Probability that a column carries a vertical streak.
    pub perturbation_rate: f64,
    /// Probability that a layer's annotation is emitted incomplete.
    pub annotation_dropout: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            height: 128,
            width: 256,
            num_layers: 8,
            mean_spacing_px: 12.0,
            spacing_jitter: 0.15,
            undulation_amplitude_px: 3.0,
            undulation_wavelength_px: 128.0,
            contrast_decay: 0.85,
            noise_level: 0.1,
            perturbation_rate: 0.02,
            annotation_dropout: 0.3,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(alloc::format!("synth: {msg}")));
        if self.height == 0 || self.width == 0 {
            return bad("image must be non-empty");
        }
        if self.num_layers == 0 || self.num_layers > 255 {
            return bad("num_layers must be in 1..=255");
        }
        let finite_nonneg = |x: f64| x.is_finite() && x >= 0.0;
        if !(self.mean_spacing_px.is_finite() && self.mean_spacing_px > 0.0) {
            return bad("mean_spacing_px must be positive");
        }
        if !(0.0..1.0).contains(&self.spacing_jitter) {
            return bad("spacing_jitter must be in [0, 1)");
        }
        if !finite_nonneg(self.undulation_amplitude_px) || !finite_nonneg(self.noise_level) {
            return bad("undulation amplitude and noise level must be non-negative");
        }
        if !(self.undulation_wavelength_px.is_finite() && self.undulation_wavelength_px > 0.0) {
            return bad("undulation_wavelength_px must be positive");
        }
        if !(0.0..=1.0).contains(&self.contrast_decay)
            || !(0.0..=1.0).contains(&self.perturbation_rate)
        {
            return bad("contrast_decay and perturbation_rate must be in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.annotation_dropout) {
            return bad("annotation_dropout must be in [0, 1)");
        }

        let n = self.num_layers as f64;
        let min_spacing = self.mean_spacing_px * (1.0 - self.spacing_jitter);
        let deepest =
            n * self.mean_spacing_px * (1.0 + self.spacing_jitter) + self.undulation_amplitude_px;
        if n * self.mean_spacing_px >= self.height as f64
            || deepest > (self.height - 1) as f64
            || min_spacing < 1.0
            || min_spacing - self.undulation_amplitude_px < 0.0
        {
            return Err(Error::InvalidArgument(alloc::format!(
                "synth: {} layers at spacing {} (jitter {}, undulation {}) overflow {} rows",
                self.num_layers,
                self.mean_spacing_px,
                self.spacing_jitter,
                self.undulation_amplitude_px,
                self.height
            )));
        }
        Ok(())
    }
}

/// One generated radargram with its complete and degraded annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSample {
    pub image: Radargram,
    pub truth: LayerMap,
    pub annotation: LayerMap,
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen::<f64>()
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthSample> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (h, w, n) = (cfg.height, cfg.width, cfg.num_layers);

    let phases: Vec<f64> = (0..UNDULATION_WEIGHTS.len())
        .map(|_| 2.0 * core::f64::consts::PI * uniform(&mut rng))
        .collect();
    let weight_sum: f64 = UNDULATION_WEIGHTS.iter().sum();
    let shift: Vec<f64> = (0..w)
        .map(|x| {
            let u: f64 = UNDULATION_WEIGHTS
                .iter()
                .zip(&phases)
                .enumerate()
                .map(|(k, (wk, phi))| {
                    let arg = 2.0 * core::f64::consts::PI * (k + 1) as f64 * x as f64
                        / cfg.undulation_wavelength_px
                        + phi;
                    wk * Float::sin(arg)
                })
                .sum();
            cfg.undulation_amplitude_px * u / weight_sum
        })
        .collect();

    let mut depth = 0.0;
    let mut truth = LayerMap::new(w)?;
    // rows[l][x] for l in 0..n
    let mut rows: Vec<Vec<u32>> = Vec::with_capacity(n);
    for l in 0..n {
        depth += cfg.mean_spacing_px * (1.0 + cfg.spacing_jitter * (2.0 * uniform(&mut rng) - 1.0));
        let curve: Vec<u32> = shift
            .iter()
            .map(|s| Float::round(depth + s).clamp(0.0, (h - 1) as f64) as u32)
            .collect();
        truth.insert_complete((l + 1) as LayerId, &curve)?;
        rows.push(curve);
    }

    let band_gain: Vec<f64> = (0..n)
        .map(|l| BAND_AMPLITUDE * Float::powi(cfg.contrast_decay, l as i32))
        .collect();
    let mut clean = vec![0.0f64; h * w];
    for x in 0..w {
        let mut above = 0usize;
        for y in 0..h {
            while above < n && rows[above][x] as usize <= y {
                above += 1;
            }
            let mut v = FILL_FLOOR + FILL_RANGE * Float::powi(cfg.contrast_decay, above as i32);
            for (l, curve) in rows.iter().enumerate() {
                let d = y as f64 - curve[x] as f64;
                if d.abs() <= 4.0 {
                    v += band_gain[l] * Float::exp(-d * d / 2.0);
                }
            }
            clean[y * w + x] = v;
        }
    }

    let speckle: Vec<f64> = (0..h * w)
        .map(|_| 1.0 + cfg.noise_level * (2.0 * uniform(&mut rng) - 1.0))
        .collect();
    let gains: Vec<f64> = (0..w)
        .map(|_| {
            if uniform(&mut rng) < cfg.perturbation_rate {
                0.6 + 0.8 * uniform(&mut rng)
            } else {
                1.0
            }
        })
        .collect();
    let pixels = (0..h * w)
        .map(|i| {
            let v = clean[i] * speckle[i] * gains[i % w];
            Float::round(v).clamp(0.0, 255.0) as u8
        })
        .collect();
    let image = Radargram::new(h, w, pixels)?;

    let mut annotation = truth.clone();
    let max_span = w.div_ceil(2);
    for l in 0..n {
        if uniform(&mut rng) < cfg.annotation_dropout {
            let len = (1 + (uniform(&mut rng) * max_span as f64) as usize).min(w);
            let start = (uniform(&mut rng) * (w - len + 1) as f64) as usize;
            let id = (l + 1) as LayerId;
            let mut curve = annotation.layer(id).unwrap_or_default().to_vec();
            curve[start..start + len].fill(None);
            annotation.insert(id, curve)?;
        }
    }

    Ok(SynthSample {
        image,
        truth,
        annotation,
    })
}

/// `count` samples; sample `i` uses seed `cfg.seed + i` (wrapping).
pub fn generate_corpus(cfg: &SynthConfig, count: usize) -> Result<Vec<SynthSample>> {
    (0..count)
        .map(|i| generate(&config_for_index(cfg, i)))
        .collect()
}

/// Configuration of the `index`-th corpus member.
pub fn config_for_index(cfg: &SynthConfig, index: usize) -> SynthConfig {
    SynthConfig {
        seed: cfg.seed.wrapping_add(index as u64),
        ..cfg.clone()
    }
}
