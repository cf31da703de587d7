//! Synthetic GPR signal model.
//!
//! Generates physically motivated range profiles: a Gaussian monocycle
//! transmit pulse convolved with a channel impulse response made of
//! time-delayed, weighted Gaussian echoes, sampled stroboscopically and
//! corrupted by additive white Gaussian noise. Labeled multi-class datasets
//! and hyperbola B-scans are built on top of the single-profile synthesis.

use crate::error::{Error, Result};
use crate::parallel;
use crate::rng::{self, stream};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

/// Free-space EM propagation speed used throughout (m/s).
pub const C0: f64 = 3.0e8;

/// Free-space impedance √(μ₀/ε₀) (Ω).
pub const Z0: f64 = 376.730_313_668;

/// Transmit pulse description: a Gaussian of peak amplitude `A` centered at
/// the delay `τ = 1/f_c`; the radiated monocycle is its first derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSpec {
    pub center_frequency: f64,
    pub peak_amplitude: f64,
}

impl PulseSpec {
    pub fn new(center_frequency: f64, peak_amplitude: f64) -> Result<Self> {
        if !(center_frequency > 0.0) {
            return Err(Error::param("pulse center frequency must be positive"));
        }
        if peak_amplitude == 0.0 || !peak_amplitude.is_finite() {
            return Err(Error::param("pulse peak amplitude must be nonzero"));
        }
        Ok(Self {
            center_frequency,
            peak_amplitude,
        })
    }

    /// Pulse delay τ = 1/f_c.
    pub fn delay(&self) -> f64 {
        1.0 / self.center_frequency
    }
}

impl Default for PulseSpec {
    /// 2 GHz unit-amplitude pulse, matching an L-band impulse radar.
    fn default() -> Self {
        Self {
            center_frequency: 2.0e9,
            peak_amplitude: 1.0,
        }
    }
}

/// One point scatterer of the channel impulse response.
#[derive(Debug, Clone, PartialEq)]
pub struct ScattererSpec {
    /// Reflectivity α (dimensionless).
    pub reflectivity: f64,
    /// One-way range from the antenna (m).
    pub range_m: f64,
    /// Echo duration ΔT (s).
    pub duration_s: f64,
}

impl ScattererSpec {
    pub fn new(reflectivity: f64, range_m: f64, duration_s: f64) -> Result<Self> {
        if range_m < 0.0 {
            return Err(Error::param("scatterer range must be non-negative"));
        }
        if !(duration_s > 0.0) {
            return Err(Error::param("scatterer duration must be positive"));
        }
        Ok(Self {
            reflectivity,
            range_m,
            duration_s,
        })
    }
}

/// Receiver description: sample count, stroboscopic sampling interval, soil
/// parameters, and the additive noise level. Stroboscopic acquisition is
/// modeled as ideal sampling at `T_s`; pulse-train averaging reduces to the
/// single `noise_std` knob.
#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionSpec {
    pub sample_count: usize,
    /// Stroboscopic sampling interval T_s (s).
    pub sample_interval_s: f64,
    /// Relative permittivity ε_r of the soil.
    pub relative_permittivity: f64,
    /// Conductivity σ (S/m).
    pub conductivity: f64,
    /// Standard deviation of additive white Gaussian noise.
    pub noise_std: f64,
    pub seed: u64,
}

impl AcquisitionSpec {
    pub fn new(
        sample_count: usize,
        sample_interval_s: f64,
        relative_permittivity: f64,
        conductivity: f64,
        noise_std: f64,
        seed: u64,
    ) -> Result<Self> {
        if sample_count == 0 {
            return Err(Error::param("sample count must be positive"));
        }
        if !(sample_interval_s > 0.0) {
            return Err(Error::param("sampling interval must be positive"));
        }
        if !(relative_permittivity >= 1.0) {
            return Err(Error::param("relative permittivity must be >= 1"));
        }
        if conductivity < 0.0 {
            return Err(Error::param("conductivity must be non-negative"));
        }
        if noise_std < 0.0 {
            return Err(Error::param("noise std must be non-negative"));
        }
        Ok(Self {
            sample_count,
            sample_interval_s,
            relative_permittivity,
            conductivity,
            noise_std,
            seed,
        })
    }
}

impl Default for AcquisitionSpec {
    /// 128 samples at 25 ps in ε_r = 4 soil, noiseless.
    fn default() -> Self {
        Self {
            sample_count: 128,
            sample_interval_s: 25.0e-12,
            relative_permittivity: 4.0,
            conductivity: 0.01,
            noise_std: 0.0,
            seed: 0,
        }
    }
}

/// Template from which labeled profiles of one class are drawn. Ranges are
/// inclusive; each profile draws a scatterer count, then per-scatterer
/// reflectivity, depth and duration uniformly, and finally a multiplicative
/// amplitude jitter of `1 ± amplitude_jitter`.
///
/// Two overlay generators model the parts of a real trace that are not the
/// target itself: a strong shallow ground bounce shared by every profile,
/// and per-profile random soil-clutter scatterers spread over the whole
/// depth window. Zero-width ranges (`(0.0, 0.0)` / `(0, 0)`) disable them.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSpec {
    pub name: String,
    pub scatterer_count: (usize, usize),
    pub reflectivity: (f64, f64),
    pub depth_m: (f64, f64),
    pub duration_s: (f64, f64),
    pub amplitude_jitter: f64,
    /// Ground-bounce overlay: reflectivity range (zero disables).
    pub ground_reflectivity: (f64, f64),
    /// Ground-bounce depth range (m).
    pub ground_depth_m: (f64, f64),
    /// Background soil-clutter scatterer count range.
    pub background_count: (usize, usize),
    /// Background reflectivity range.
    pub background_reflectivity: (f64, f64),
}

// background scatterers span the usable depth window with broad durations
const BACKGROUND_DEPTH_M: (f64, f64) = (0.02, 0.19);
const BACKGROUND_DURATION_S: (f64, f64) = (0.10e-9, 0.50e-9);
const GROUND_DURATION_S: (f64, f64) = (0.40e-9, 0.50e-9);

impl ClassSpec {
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::param("class name must be non-empty"));
        }
        if self.scatterer_count.0 == 0 || self.scatterer_count.0 > self.scatterer_count.1 {
            return Err(Error::param(format!(
                "class {}: bad scatterer count range",
                self.name
            )));
        }
        for (lo, hi, what) in [
            (self.reflectivity.0, self.reflectivity.1, "reflectivity"),
            (self.depth_m.0, self.depth_m.1, "depth"),
            (self.duration_s.0, self.duration_s.1, "duration"),
        ] {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::param(format!("class {}: bad {what} range", self.name)));
            }
        }
        if self.depth_m.0 < 0.0 || !(self.duration_s.0 > 0.0) {
            return Err(Error::param(format!("class {}: non-physical range", self.name)));
        }
        if !(0.0..1.0).contains(&self.amplitude_jitter) {
            return Err(Error::param(format!(
                "class {}: amplitude jitter must be in [0, 1)",
                self.name
            )));
        }
        for (lo, hi, what) in [
            (self.ground_reflectivity.0, self.ground_reflectivity.1, "ground reflectivity"),
            (self.ground_depth_m.0, self.ground_depth_m.1, "ground depth"),
            (
                self.background_reflectivity.0,
                self.background_reflectivity.1,
                "background reflectivity",
            ),
        ] {
            if !(lo <= hi) || !lo.is_finite() || lo < 0.0 {
                return Err(Error::param(format!("class {}: bad {what} range", self.name)));
            }
        }
        if self.background_count.0 > self.background_count.1 {
            return Err(Error::param(format!(
                "class {}: bad background count range",
                self.name
            )));
        }
        Ok(())
    }

    fn draw(&self, rng: &mut impl Rng) -> Vec<ScattererSpec> {
        let count = rng.random_range(self.scatterer_count.0..=self.scatterer_count.1);
        let gain = 1.0 + self.amplitude_jitter * (2.0 * rng.random::<f64>() - 1.0);
        let mut scatterers: Vec<ScattererSpec> = (0..count)
            .map(|_| {
                let alpha = uniform(rng, self.reflectivity) * gain;
                let depth = uniform(rng, self.depth_m);
                let dur = uniform(rng, self.duration_s);
                ScattererSpec {
                    reflectivity: alpha,
                    range_m: depth,
                    duration_s: dur,
                }
            })
            .collect();
        if self.ground_reflectivity.1 > 0.0 {
            scatterers.push(ScattererSpec {
                reflectivity: uniform(rng, self.ground_reflectivity),
                range_m: uniform(rng, self.ground_depth_m),
                duration_s: uniform(rng, GROUND_DURATION_S),
            });
        }
        if self.background_count.1 > 0 {
            let n = rng.random_range(self.background_count.0..=self.background_count.1);
            for _ in 0..n {
                scatterers.push(ScattererSpec {
                    reflectivity: uniform(rng, self.background_reflectivity),
                    range_m: uniform(rng, BACKGROUND_DEPTH_M),
                    duration_s: uniform(rng, BACKGROUND_DURATION_S),
                });
            }
        }
        scatterers
    }
}

fn uniform(rng: &mut impl Rng, range: (f64, f64)) -> f64 {
    if range.0 == range.1 {
        range.0
    } else {
        rng.random_range(range.0..range.1)
    }
}

/// The four stock classes: diffuse clutter plus large/medium/small targets.
///
/// Target classes are tight templates with small per-profile jitter, the way
/// neighboring traces over a buried object are near-duplicates; clutter is
/// deliberately diverse, and its reflectivity overlaps the small class so
/// the two stay confusable, mirroring the difficulty structure of real
/// surveys.
pub fn default_classes() -> Vec<ClassSpec> {
    let ground_reflectivity = (0.90, 1.30);
    let ground_depth_m = (0.010, 0.016);
    vec![
        ClassSpec {
            name: "clutter".into(),
            scatterer_count: (4, 6),
            reflectivity: (0.30, 0.70),
            depth_m: (0.02, 0.19),
            duration_s: (0.10e-9, 0.50e-9),
            amplitude_jitter: 0.2,
            ground_reflectivity,
            ground_depth_m,
            background_count: (0, 0),
            background_reflectivity: (0.0, 0.0),
        },
        ClassSpec {
            name: "large".into(),
            scatterer_count: (3, 3),
            reflectivity: (1.50, 1.90),
            depth_m: (0.10, 0.12),
            duration_s: (0.45e-9, 0.55e-9),
            amplitude_jitter: 0.1,
            ground_reflectivity,
            ground_depth_m,
            background_count: (2, 4),
            background_reflectivity: (0.12, 0.30),
        },
        ClassSpec {
            name: "medium".into(),
            scatterer_count: (3, 3),
            reflectivity: (0.85, 1.15),
            depth_m: (0.15, 0.17),
            duration_s: (0.30e-9, 0.40e-9),
            amplitude_jitter: 0.1,
            ground_reflectivity,
            ground_depth_m,
            background_count: (2, 4),
            background_reflectivity: (0.12, 0.30),
        },
        ClassSpec {
            name: "small".into(),
            scatterer_count: (2, 2),
            reflectivity: (0.35, 0.60),
            depth_m: (0.115, 0.135),
            duration_s: (0.15e-9, 0.22e-9),
            amplitude_jitter: 0.1,
            ground_reflectivity,
            ground_depth_m,
            background_count: (2, 4),
            background_reflectivity: (0.12, 0.30),
        },
    ]
}

/// A single A-scan.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeProfile {
    pub samples: Array1<f64>,
    pub sample_interval_s: f64,
}

impl RangeProfile {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Ordered stack of A-scans along a survey line; columns are profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct BScan {
    /// M×L matrix: rows are time samples, columns are antenna positions.
    pub data: Array2<f64>,
    pub sample_interval_s: f64,
    /// Spatial step Δx between traces (m).
    pub trace_spacing_m: f64,
}

impl BScan {
    pub fn sample_count(&self) -> usize {
        self.data.nrows()
    }

    pub fn trace_count(&self) -> usize {
        self.data.ncols()
    }
}

/// Column-profile matrix with per-column class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    /// M×L matrix; each column is one range profile.
    pub data: Array2<f64>,
    /// One label index per column, pointing into `class_names`.
    pub labels: Vec<u16>,
    pub class_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(data: Array2<f64>, labels: Vec<u16>, class_names: Vec<String>) -> Result<Self> {
        if labels.len() != data.ncols() {
            return Err(Error::dim(format!(
                "{} labels for {} columns",
                labels.len(),
                data.ncols()
            )));
        }
        if class_names.is_empty() {
            return Err(Error::param("dataset needs at least one class name"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| (l as usize) >= class_names.len()) {
            return Err(Error::param(format!(
                "label index {bad} out of range for {} classes",
                class_names.len()
            )));
        }
        Ok(Self {
            data,
            labels,
            class_names,
        })
    }

    pub fn sample_count(&self) -> usize {
        self.data.nrows()
    }

    pub fn column_count(&self) -> usize {
        self.data.ncols()
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }
}

/// Gaussian pulse `A·exp(−2π²f_c²(t−τ)²)`.
pub fn gaussian_pulse(t: f64, p: &PulseSpec) -> f64 {
    let fc = p.center_frequency;
    let dt = t - p.delay();
    p.peak_amplitude * (-2.0 * std::f64::consts::PI.powi(2) * fc * fc * dt * dt).exp()
}

/// Monocycle: first derivative of the Gaussian pulse,
/// `−4π²f_c²A(t−τ)·exp(−2π²f_c²(t−τ)²)`.
pub fn monocycle(t: f64, p: &PulseSpec) -> f64 {
    let fc = p.center_frequency;
    let dt = t - p.delay();
    let pi2 = std::f64::consts::PI.powi(2);
    -4.0 * pi2 * fc * fc * p.peak_amplitude * dt * (-2.0 * pi2 * fc * fc * dt * dt).exp()
}

/// Channel impulse response: sum of weighted Gaussian echoes, each delayed by
/// the two-way travel time `t_m = 2·r_m/(c₀/√ε_r)`. An empty scatterer list
/// is a valid all-zero channel.
pub fn cir(t: f64, scatterers: &[ScattererSpec], relative_permittivity: f64) -> f64 {
    let v = phase_velocity(relative_permittivity);
    scatterers
        .iter()
        .map(|s| {
            let tm = 2.0 * s.range_m / v;
            let arg = (t - tm) / s.duration_s;
            s.reflectivity * (-4.0 * std::f64::consts::PI * arg * arg).exp()
        })
        .sum()
}

/// Phase velocity in the soil, `c₀/√ε_r` (m/s).
pub fn phase_velocity(relative_permittivity: f64) -> f64 {
    C0 / relative_permittivity.sqrt()
}

/// Attenuation coefficient `Z₀·σ/(2√ε_r)` (Np/m).
pub fn attenuation_coefficient(conductivity: f64, relative_permittivity: f64) -> f64 {
    Z0 * conductivity / (2.0 * relative_permittivity.sqrt())
}

/// Depth resolution `v_p/B` (m) for receiver bandwidth `B` (Hz).
pub fn depth_resolution(relative_permittivity: f64, bandwidth: f64) -> f64 {
    phase_velocity(relative_permittivity) / bandwidth
}

// Pulse support is truncated at ±6/f_c, where the Gaussian envelope has
// decayed below 1e-30 of its peak.
const PULSE_SUPPORT_CYCLES: f64 = 6.0;
// The continuous convolution is evaluated on a grid this many times denser
// than the output sampling.
const OVERSAMPLE: usize = 4;

/// Synthesize one range profile: the monocycle convolved with the CIR,
/// sampled at `T_s`, plus seeded white Gaussian noise.
///
/// The convolution is evaluated on a dense grid (T_s/4 step) and sampled.
/// Fails when the profile is too short to contain the deepest scatterer's
/// echo center.
pub fn synthesize_profile(
    p: &PulseSpec,
    scatterers: &[ScattererSpec],
    acq: &AcquisitionSpec,
) -> Result<RangeProfile> {
    let m = acq.sample_count;
    let ts = acq.sample_interval_s;
    let tau = p.delay();
    let window = (m as f64 - 1.0) * ts;
    let v = phase_velocity(acq.relative_permittivity);
    for s in scatterers {
        let tm = 2.0 * s.range_m / v;
        if tm + tau > window {
            return Err(Error::ProfileTooShort(format!(
                "echo center at {:.3e} s needs {} samples but profile has {} (T_s = {:.3e} s)",
                tm + tau,
                ((tm + tau) / ts).ceil() as usize + 1,
                m,
                ts
            )));
        }
    }

    let mut samples = Array1::<f64>::zeros(m);
    if !scatterers.is_empty() {
        let du = ts / OVERSAMPLE as f64;
        let half = PULSE_SUPPORT_CYCLES / p.center_frequency;
        let k0 = (((tau - half) / du).floor().max(0.0)) as i64;
        let k1 = ((tau + half) / du).ceil() as i64;
        let pulse: Vec<f64> = (k0..=k1).map(|k| monocycle(k as f64 * du, p)).collect();
        // dense CIR on the grid of every argument the convolution needs
        let j_lo = -k1;
        let j_hi = (m as i64 - 1) * OVERSAMPLE as i64 - k0;
        let h: Vec<f64> = (j_lo..=j_hi)
            .map(|j| cir(j as f64 * du, scatterers, acq.relative_permittivity))
            .collect();
        for n in 0..m {
            let base = n as i64 * OVERSAMPLE as i64;
            let mut acc = 0.0;
            for (ki, pv) in pulse.iter().enumerate() {
                let j = base - (k0 + ki as i64) - j_lo;
                acc += pv * h[j as usize];
            }
            samples[n] = acc * du;
        }
    }

    if acq.noise_std > 0.0 {
        let mut rng = stream(acq.seed, rng::TAG_PROFILE_NOISE, 0);
        let normal = Normal::new(0.0, acq.noise_std)
            .map_err(|e| Error::param(format!("noise distribution: {e}")))?;
        for v in samples.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }

    Ok(RangeProfile {
        samples,
        sample_interval_s: ts,
    })
}

/// Generate a labeled dataset: `counts[c]` profiles drawn from `classes[c]`,
/// columns in class order. A pure function of `(specs, seed)`; per-column
/// seeds are derived from `(seed, column index)` so generation parallelizes
/// without affecting the result.
pub fn generate_dataset(
    pulse: &PulseSpec,
    classes: &[ClassSpec],
    counts: &[usize],
    acq: &AcquisitionSpec,
    seed: u64,
) -> Result<LabeledDataset> {
    if classes.is_empty() || classes.len() != counts.len() {
        return Err(Error::param(format!(
            "{} classes but {} counts",
            classes.len(),
            counts.len()
        )));
    }
    if counts.iter().any(|&c| c == 0) {
        return Err(Error::param("class counts must be positive"));
    }
    for c in classes {
        c.validate()?;
    }
    let total: usize = counts.iter().sum();
    let mut labels = Vec::with_capacity(total);
    for (idx, &count) in counts.iter().enumerate() {
        labels.extend(std::iter::repeat(idx as u16).take(count));
    }

    let columns: Vec<Result<Array1<f64>>> = parallel::install(|| {
        labels
            .par_iter()
            .enumerate()
            .map(|(col, &label)| {
                let mut rng = stream(seed, rng::TAG_DATASET_COLUMN, col as u64);
                let scatterers = classes[label as usize].draw(&mut rng);
                let col_acq = AcquisitionSpec {
                    seed: rng.random::<u64>(),
                    ..acq.clone()
                };
                synthesize_profile(pulse, &scatterers, &col_acq).map(|p| p.samples)
            })
            .collect()
    });

    let mut data = Array2::<f64>::zeros((acq.sample_count, total));
    for (col, result) in columns.into_iter().enumerate() {
        data.column_mut(col).assign(&result?);
    }
    LabeledDataset::new(
        data,
        labels,
        classes.iter().map(|c| c.name.clone()).collect(),
    )
}

/// Synthesize the B-scan of a single point target at `(x₀, depth)`: at each
/// antenna position the target appears at slant range `√(d² + (x−x₀)²)`,
/// producing the classic hyperbolic response.
pub fn synthesize_bscan(
    target_x: f64,
    depth: f64,
    acq: &AcquisitionSpec,
    positions: &[f64],
    p: &PulseSpec,
) -> Result<BScan> {
    if positions.len() < 2 {
        return Err(Error::param("a B-scan needs at least two positions"));
    }
    if positions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("positions must be strictly increasing"));
    }
    if !(depth > 0.0) {
        return Err(Error::param("target depth must be positive"));
    }
    let spacing = positions[1] - positions[0];
    let mut data = Array2::<f64>::zeros((acq.sample_count, positions.len()));
    for (i, &x) in positions.iter().enumerate() {
        let dx = x - target_x;
        let slant = (depth * depth + dx * dx).sqrt();
        let scatterer = ScattererSpec {
            reflectivity: 1.0,
            range_m: slant,
            duration_s: p.delay(),
        };
        let mut rng = stream(acq.seed, rng::TAG_DATASET_COLUMN, i as u64);
        let col_acq = AcquisitionSpec {
            seed: rng.random::<u64>(),
            ..acq.clone()
        };
        let profile = synthesize_profile(p, &[scatterer], &col_acq)?;
        data.column_mut(i).assign(&profile.samples);
    }
    Ok(BScan {
        data,
        sample_interval_s: acq.sample_interval_s,
        trace_spacing_m: spacing,
    })
}
