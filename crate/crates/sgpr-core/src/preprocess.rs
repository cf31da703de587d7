//! Classical GPR pre-processing and frequency-wavenumber migration.
//!
//! Time gating, dewow (running-mean trace removal), mean and PCA background
//! subtraction, time-varying gain, and constant-velocity Stolt migration of
//! B-scans. All operations preserve array dimensions.

use crate::error::{Error, Result};
use crate::linalg;
use crate::signal_model::{BScan, RangeProfile};
use ndarray::{Array1, Array2};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Per-sample multiplicative gain curve.
#[derive(Debug, Clone, PartialEq)]
pub struct GainCurve {
    values: Array1<f64>,
}

impl GainCurve {
    pub fn new(values: Array1<f64>) -> Result<Self> {
        if values.iter().any(|&g| !g.is_finite() || g < 0.0) {
            return Err(Error::param("gain entries must be finite and >= 0"));
        }
        Ok(Self { values })
    }

    /// Exponential gain `exp(k·n)` over `len` samples.
    pub fn exponential(len: usize, log_gain_per_sample: f64) -> Result<Self> {
        Self::new(Array1::from_shape_fn(len, |n| {
            (log_gain_per_sample * n as f64).exp()
        }))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }
}

/// Zero every sample outside `[n_start, n_end)`.
pub fn time_gate(profile: &RangeProfile, n_start: usize, n_end: usize) -> Result<RangeProfile> {
    let m = profile.len();
    if n_start > n_end || n_end > m {
        return Err(Error::param(format!(
            "gate [{n_start}, {n_end}) invalid for {m} samples"
        )));
    }
    let mut samples = profile.samples.clone();
    for (n, v) in samples.iter_mut().enumerate() {
        if n < n_start || n >= n_end {
            *v = 0.0;
        }
    }
    Ok(RangeProfile {
        samples,
        sample_interval_s: profile.sample_interval_s,
    })
}

/// Gate every column of a data matrix, preserving dimensions.
pub fn time_gate_matrix(data: &Array2<f64>, n_start: usize, n_end: usize) -> Result<Array2<f64>> {
    let m = data.nrows();
    if n_start > n_end || n_end > m {
        return Err(Error::param(format!(
            "gate [{n_start}, {n_end}) invalid for {m} samples"
        )));
    }
    let mut out = data.clone();
    for n in 0..m {
        if n < n_start || n >= n_end {
            out.row_mut(n).fill(0.0);
        }
    }
    Ok(out)
}

/// Dewow: subtract from each trace the mean of a centered window of
/// `window_width` traces (clamped at the survey edges). A window at least as
/// wide as the scan degenerates to whole-line background subtraction.
pub fn dewow(bscan: &BScan, window_width: usize) -> Result<BScan> {
    if window_width == 0 || window_width % 2 == 0 {
        return Err(Error::param("dewow window must be odd and >= 1"));
    }
    let l = bscan.trace_count();
    if window_width >= l {
        return background_subtraction_mean(bscan);
    }
    let half = window_width / 2;
    let m = bscan.sample_count();
    let mut out = Array2::<f64>::zeros((m, l));
    for c in 0..l {
        let lo = c.saturating_sub(half);
        let hi = (c + half).min(l - 1);
        let count = (hi - lo + 1) as f64;
        let mut mean = Array1::<f64>::zeros(m);
        for w in lo..=hi {
            mean += &bscan.data.column(w);
        }
        mean.mapv_inplace(|v| v / count);
        let col = &bscan.data.column(c) - &mean;
        out.column_mut(c).assign(&col);
    }
    Ok(BScan {
        data: out,
        sample_interval_s: bscan.sample_interval_s,
        trace_spacing_m: bscan.trace_spacing_m,
    })
}

/// Subtract the mean trace of the whole survey line from every trace.
pub fn background_subtraction_mean(bscan: &BScan) -> Result<BScan> {
    let l = bscan.trace_count();
    if l == 0 {
        return Err(Error::param("background subtraction needs >= 1 trace"));
    }
    let mut mean = Array1::<f64>::zeros(bscan.sample_count());
    for c in 0..l {
        mean += &bscan.data.column(c);
    }
    mean.mapv_inplace(|v| v / l as f64);
    let mut out = bscan.data.clone();
    for mut col in out.columns_mut() {
        col -= &mean;
    }
    Ok(BScan {
        data: out,
        sample_interval_s: bscan.sample_interval_s,
        trace_spacing_m: bscan.trace_spacing_m,
    })
}

/// Remove the leading `n_components` principal features: subtract the
/// truncated-SVD reconstruction of the scan.
pub fn background_subtraction_pca(bscan: &BScan, n_components: usize) -> Result<BScan> {
    let (m, l) = bscan.data.dim();
    if n_components == 0 {
        return Err(Error::param("n_components must be >= 1"));
    }
    if n_components >= m.min(l) {
        return Err(Error::param(format!(
            "n_components {n_components} must be < min(M, L) = {}",
            m.min(l)
        )));
    }
    let (u, s, v) = linalg::svd(bscan.data.view());
    let mut out = bscan.data.clone();
    for k in 0..n_components {
        let uk = u.column(k);
        let vk = v.column(k);
        for i in 0..m {
            for j in 0..l {
                out[(i, j)] -= s[k] * uk[i] * vk[j];
            }
        }
    }
    Ok(BScan {
        data: out,
        sample_interval_s: bscan.sample_interval_s,
        trace_spacing_m: bscan.trace_spacing_m,
    })
}

/// Apply a per-sample gain curve to one profile.
pub fn time_gain(profile: &RangeProfile, gain: &GainCurve) -> Result<RangeProfile> {
    if gain.len() != profile.len() {
        return Err(Error::dim(format!(
            "gain has {} entries for {} samples",
            gain.len(),
            profile.len()
        )));
    }
    Ok(RangeProfile {
        samples: &profile.samples * gain.values(),
        sample_interval_s: profile.sample_interval_s,
    })
}

/// Apply a gain curve to every column of a matrix.
pub fn time_gain_matrix(data: &Array2<f64>, gain: &GainCurve) -> Result<Array2<f64>> {
    if gain.len() != data.nrows() {
        return Err(Error::dim(format!(
            "gain has {} entries for {} samples",
            gain.len(),
            data.nrows()
        )));
    }
    let mut out = data.clone();
    for mut col in out.columns_mut() {
        col *= gain.values();
    }
    Ok(out)
}

// signed angular-frequency bins of an n-point FFT with sample step d
fn fftfreq(n: usize, d: f64) -> Vec<f64> {
    let df = 2.0 * std::f64::consts::PI / (n as f64 * d);
    (0..n)
        .map(|i| {
            if i <= (n - 1) / 2 {
                i as f64 * df
            } else {
                (i as i64 - n as i64) as f64 * df
            }
        })
        .collect()
}

fn fft_axis(data: &mut Array2<Complex<f64>>, axis: usize, inverse: bool, planner: &mut FftPlanner<f64>) {
    let n = if axis == 0 { data.nrows() } else { data.ncols() };
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    if axis == 0 {
        for c in 0..data.ncols() {
            for i in 0..n {
                buf[i] = data[(i, c)];
            }
            fft.process(&mut buf);
            for i in 0..n {
                data[(i, c)] = buf[i];
            }
        }
    } else {
        for r in 0..data.nrows() {
            for i in 0..n {
                buf[i] = data[(r, i)];
            }
            fft.process(&mut buf);
            for i in 0..n {
                data[(r, i)] = buf[i];
            }
        }
    }
}

/// Constant-velocity Stolt (frequency-wavenumber) migration.
///
/// 2-D Fourier transform over (t, x), remap ω → k_z along the dispersion
/// relation `k_z = √(4ω²/v_p² − k_x²)` by linear interpolation in ω with the
/// evanescent region zeroed, then inverse transform at the imaging condition.
/// The output grid matches the input: depth sample `n` corresponds to
/// two-way time `n·T_s`.
pub fn fk_migrate(bscan: &BScan, v_p: f64) -> Result<BScan> {
    if !(v_p > 0.0) {
        return Err(Error::param("phase velocity must be positive"));
    }
    let (m, l) = bscan.data.dim();
    let dt = bscan.sample_interval_s;
    let dx = bscan.trace_spacing_m;
    if !(dt > 0.0 && dx > 0.0) {
        return Err(Error::param("B-scan must carry positive dt and dx"));
    }
    if m < 2 || l < 2 {
        return Err(Error::param("migration needs at least a 2x2 scan"));
    }

    // monostatic two-way geometry: exploding-reflector velocity v_p/2
    let vm = v_p / 2.0;
    let pt = (2 * m).next_power_of_two();
    let px = (2 * l).next_power_of_two();

    let mut spec = Array2::<Complex<f64>>::from_elem((pt, px), Complex::new(0.0, 0.0));
    for i in 0..m {
        for j in 0..l {
            spec[(i, j)] = Complex::new(bscan.data[(i, j)], 0.0);
        }
    }
    let mut planner = FftPlanner::<f64>::new();
    fft_axis(&mut spec, 0, false, &mut planner); // over t → ω
    fft_axis(&mut spec, 1, false, &mut planner); // over x → k_x

    let omega = fftfreq(pt, dt);
    let kx = fftfreq(px, dx);
    // output depth grid dz = vm·dt keeps time and depth indices aligned
    let kz = fftfreq(pt, vm * dt);
    let domega = 2.0 * std::f64::consts::PI / (pt as f64 * dt);
    let omega_max = omega.iter().cloned().fold(0.0f64, f64::max);

    let mut migrated = Array2::<Complex<f64>>::from_elem((pt, px), Complex::new(0.0, 0.0));
    for (j, &kxj) in kx.iter().enumerate() {
        for (i, &kzi) in kz.iter().enumerate() {
            if kzi == 0.0 && kxj == 0.0 {
                migrated[(i, j)] = spec[(0, j)] * vm;
                continue;
            }
            let knorm = (kzi * kzi + kxj * kxj).sqrt();
            let w_t = kzi.signum() * vm * knorm;
            if kzi == 0.0 {
                continue; // purely evanescent row (ω would be v_m|k_x| with k_z = 0)
            }
            if w_t.abs() > omega_max {
                continue;
            }
            // linear interpolation on the signed ω axis
            let pos = w_t / domega;
            let i0 = pos.floor() as i64;
            let frac = pos - i0 as f64;
            let wrap = |idx: i64| -> usize { idx.rem_euclid(pt as i64) as usize };
            let s0 = spec[(wrap(i0), j)];
            let s1 = spec[(wrap(i0 + 1), j)];
            // the two bins must be adjacent on the signed axis, not across
            // the Nyquist wrap
            let within = (i0.rem_euclid(pt as i64)) != pt as i64 / 2;
            if !within {
                continue;
            }
            let value = s0 * (1.0 - frac) + s1 * frac;
            let jacobian = vm * kzi.abs() / knorm;
            migrated[(i, j)] = value * jacobian;
        }
    }

    fft_axis(&mut migrated, 0, true, &mut planner);
    fft_axis(&mut migrated, 1, true, &mut planner);
    let scale = 1.0 / (pt as f64 * px as f64);
    let mut out = Array2::<f64>::zeros((m, l));
    for i in 0..m {
        for j in 0..l {
            out[(i, j)] = migrated[(i, j)].re * scale;
        }
    }
    Ok(BScan {
        data: out,
        sample_interval_s: dt,
        trace_spacing_m: dx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_model::{
        phase_velocity, synthesize_bscan, AcquisitionSpec, PulseSpec,
    };
    use approx::assert_relative_eq;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn profile(values: Vec<f64>) -> RangeProfile {
        RangeProfile {
            samples: Array1::from_vec(values),
            sample_interval_s: 25e-12,
        }
    }

    fn random_scan(m: usize, l: usize, seed: u64) -> BScan {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        BScan {
            data: Array2::from_shape_fn((m, l), |_| rng.random::<f64>() - 0.5),
            sample_interval_s: 25e-12,
            trace_spacing_m: 0.01,
        }
    }

    #[test]
    fn gate_identity_empty_and_impulse() {
        let p = profile(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(time_gate(&p, 0, 4).unwrap().samples, p.samples);
        assert!(time_gate(&p, 2, 2).unwrap().samples.iter().all(|&v| v == 0.0));
        let mut impulse = vec![0.0; 30];
        impulse[15] = 2.0;
        let gated = time_gate(&profile(impulse), 10, 20).unwrap();
        assert_eq!(gated.samples[15], 2.0);
        assert_eq!(gated.samples.iter().filter(|&&v| v != 0.0).count(), 1);
        assert!(time_gate(&p, 3, 2).is_err());
        assert!(time_gate(&p, 0, 5).is_err());
    }

    #[test]
    fn dewow_removes_common_structure() {
        let m = 8;
        let mut scan = random_scan(m, 1, 3);
        let common = scan.data.column(0).to_owned();
        let mut data = Array2::<f64>::zeros((m, 10));
        for mut col in data.columns_mut() {
            col.assign(&common);
        }
        scan.data = data;
        let out = dewow(&scan, 3).unwrap();
        assert!(out.data.iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn dewow_whole_scan_equals_background_mean() {
        let scan = random_scan(12, 9, 4);
        let a = dewow(&scan, 9).unwrap();
        let b = background_subtraction_mean(&scan).unwrap();
        assert_eq!(a.data, b.data);
        let c = dewow(&scan, 11).unwrap();
        assert_eq!(c.data, b.data);
    }

    #[test]
    fn dewow_removes_dc_offset() {
        let mut scan = random_scan(10, 15, 5);
        scan.data.mapv_inplace(|v| v + 7.5);
        let out = dewow(&scan, 5).unwrap();
        // the constant offset is common to every window
        let base = dewow(&random_scan(10, 15, 5), 5).unwrap();
        assert!((&out.data - &base.data).iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn background_mean_zeroes_identical_columns_and_means() {
        let m = 6;
        let mut data = Array2::<f64>::zeros((m, 5));
        let col = array![1.0, -2.0, 0.5, 3.0, 0.0, 1.5];
        for mut c in data.columns_mut() {
            c.assign(&col);
        }
        let scan = BScan {
            data,
            sample_interval_s: 1.0,
            trace_spacing_m: 1.0,
        };
        let out = background_subtraction_mean(&scan).unwrap();
        assert!(out.data.iter().all(|&v| v.abs() < 1e-12));

        let scan = random_scan(7, 11, 8);
        let out = background_subtraction_mean(&scan).unwrap();
        for i in 0..7 {
            let mean: f64 = out.data.row(i).sum() / 11.0;
            assert!(mean.abs() < 1e-12);
        }
    }

    #[test]
    fn pca_removes_rank_one_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = Array1::from_shape_fn(10, |_| rng.random::<f64>() - 0.5);
        let v = Array1::from_shape_fn(8, |_| rng.random::<f64>() - 0.5);
        let mut data = Array2::<f64>::zeros((10, 8));
        for i in 0..10 {
            for j in 0..8 {
                data[(i, j)] = u[i] * v[j];
            }
        }
        let norm_in = data.mapv(|v| v * v).sum().sqrt();
        let scan = BScan {
            data,
            sample_interval_s: 1.0,
            trace_spacing_m: 1.0,
        };
        let out = background_subtraction_pca(&scan, 1).unwrap();
        let norm_out = out.data.mapv(|v| v * v).sum().sqrt();
        assert!(norm_out < 1e-9 * norm_in);
    }

    #[test]
    fn pca_residual_matches_full_svd_oracle() {
        let scan = random_scan(9, 7, 10);
        let r = 7 - 1; // min(M, L) − 1 components
        let out = background_subtraction_pca(&scan, r).unwrap();
        // oracle: the residual must equal the smallest singular triplet
        let (u, s, v) = linalg::svd(scan.data.view());
        let k = 6; // index of the smallest retained triplet
        let mut expected = Array2::<f64>::zeros((9, 7));
        for i in 0..9 {
            for j in 0..7 {
                expected[(i, j)] = s[k] * u[(i, k)] * v[(j, k)];
            }
        }
        let diff = (&out.data - &expected).mapv(f64::abs).sum();
        assert!(diff < 1e-9, "diff {diff}");
        // orthogonality: projection of the output onto removed components
        for c in 0..r {
            let proj: f64 = (0..7)
                .map(|j| u.column(c).dot(&out.data.column(j)) * v[(j, c)])
                .sum();
            assert!(proj.abs() < 1e-9);
        }
        assert!(background_subtraction_pca(&scan, 7).is_err());
    }

    #[test]
    fn gain_identity_zero_and_attenuation_inverse() {
        let p = profile(vec![1.0, -2.0, 3.0, 0.5]);
        let ones = GainCurve::new(Array1::ones(4)).unwrap();
        assert_eq!(time_gain(&p, &ones).unwrap().samples, p.samples);
        let zeros = GainCurve::new(Array1::zeros(4)).unwrap();
        assert!(time_gain(&p, &zeros)
            .unwrap()
            .samples
            .iter()
            .all(|&v| v == 0.0));

        // exponential gain undoes a synthetic exponential loss model
        let m = 64;
        let alpha = crate::signal_model::attenuation_coefficient(0.05, 6.0);
        let vp = phase_velocity(6.0);
        let ts = 25e-12;
        let decay_per_sample = alpha * vp * ts;
        let clean = profile((0..m).map(|i| ((i as f64) * 0.3).sin()).collect());
        let lossy = RangeProfile {
            samples: Array1::from_shape_fn(m, |i| {
                clean.samples[i] * (-decay_per_sample * i as f64).exp()
            }),
            sample_interval_s: ts,
        };
        let comp = GainCurve::exponential(m, decay_per_sample).unwrap();
        let restored = time_gain(&lossy, &comp).unwrap();
        for i in 0..m {
            assert_relative_eq!(restored.samples[i], clean.samples[i], epsilon = 1e-9);
        }

        let bad = GainCurve::new(Array1::ones(3)).unwrap();
        assert!(time_gain(&p, &bad).is_err());
        assert!(GainCurve::new(array![1.0, -0.2]).is_err());
    }

    #[test]
    fn linear_operators_on_random_pairs() {
        let a = random_scan(10, 12, 20);
        let b = random_scan(10, 12, 21);
        let (ca, cb) = (1.7, -0.6);
        let mix = BScan {
            data: &a.data * ca + &b.data * cb,
            sample_interval_s: a.sample_interval_s,
            trace_spacing_m: a.trace_spacing_m,
        };
        type Op = fn(&BScan) -> Result<BScan>;
        let ops: Vec<(&str, Op)> = vec![
            ("dewow", |s| dewow(s, 5)),
            ("bg-mean", background_subtraction_mean),
        ];
        for (name, op) in ops {
            let lhs = op(&mix).unwrap().data;
            let rhs = &op(&a).unwrap().data * ca + &op(&b).unwrap().data * cb;
            let diff = (&lhs - &rhs).mapv(f64::abs).sum();
            assert!(diff < 1e-9, "{name} not linear: {diff}");
        }
    }

    #[test]
    fn migrate_zero_input_and_errors() {
        let zero = BScan {
            data: Array2::zeros((16, 8)),
            sample_interval_s: 25e-12,
            trace_spacing_m: 0.01,
        };
        let out = fk_migrate(&zero, 1.5e8).unwrap();
        assert_eq!(out.data.dim(), (16, 8));
        assert!(out.data.iter().all(|&v| v == 0.0));
        assert!(fk_migrate(&zero, 0.0).is_err());
        assert!(fk_migrate(&zero, -1.0).is_err());
    }

    // windowed-energy localization; the echo wavelet is odd around its
    // center so a bare |peak| flips between its two lobes
    fn energy_peak_row(y: ndarray::ArrayView1<f64>, w: i64) -> usize {
        let m = y.len() as i64;
        let mut best = (0i64, -1.0f64);
        for n in 0..m {
            let mut e = 0.0;
            for k in -w..=w {
                let i = n + k;
                if (0..m).contains(&i) {
                    e += y[i as usize] * y[i as usize];
                }
            }
            if e > best.1 {
                best = (n, e);
            }
        }
        best.0 as usize
    }

    #[test]
    fn migrate_focuses_hyperbola_and_localizes_apex() {
        let p = PulseSpec::default();
        let acq = AcquisitionSpec {
            sample_count: 224,
            ..AcquisitionSpec::default()
        };
        let vp = phase_velocity(acq.relative_permittivity);
        let positions: Vec<f64> = (0..64).map(|i| i as f64 * 0.01).collect();
        let (x0, depth) = (0.32, 0.10);
        let scan = synthesize_bscan(x0, depth, &acq, &positions, &p).unwrap();
        let migrated = fk_migrate(&scan, vp).unwrap();
        assert_eq!(migrated.data.dim(), scan.data.dim());

        let ratio = |scan: &BScan| -> f64 {
            let peak = scan.data.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
            let energy = scan.data.mapv(|v| v * v).sum();
            peak * peak / energy
        };
        let before = ratio(&scan);
        let after = ratio(&migrated);
        assert!(
            after >= 2.0 * before,
            "focusing ratio {after:.4} vs {before:.4}"
        );

        // apex trace: the column holding the most energy
        let apex_col = (0..migrated.data.ncols())
            .max_by(|&a, &b| {
                let ea: f64 = migrated.data.column(a).mapv(|v| v * v).sum();
                let eb: f64 = migrated.data.column(b).mapv(|v| v * v).sum();
                ea.partial_cmp(&eb).unwrap()
            })
            .unwrap();
        let expected_col = (x0 / 0.01).round() as i64;
        assert!(
            (apex_col as i64 - expected_col).abs() <= 1,
            "apex column {apex_col} vs {expected_col}"
        );
        // depth sample: two-way time 2d/v_p plus the pulse-center offset
        // observed in the raw scan
        let apex_raw = energy_peak_row(scan.data.column(32), 8) as f64;
        let t_geom = 2.0 * depth / vp / acq.sample_interval_s;
        let offset = apex_raw - t_geom;
        let apex_row = energy_peak_row(migrated.data.column(apex_col), 8) as f64;
        let expected_row = t_geom + offset;
        assert!(
            (apex_row - expected_row).abs() <= 2.0,
            "apex row {apex_row} vs {expected_row}"
        );
    }

    #[test]
    fn migrate_keeps_flat_layer_depth() {
        // same echo time in every column
        let m = 64;
        let l = 32;
        let mut data = Array2::<f64>::zeros((m, l));
        for j in 0..l {
            data[(20, j)] = 1.0;
            data[(21, j)] = -0.5;
        }
        let scan = BScan {
            data,
            sample_interval_s: 25e-12,
            trace_spacing_m: 0.01,
        };
        let out = fk_migrate(&scan, 1.2e8).unwrap();
        for j in 0..l {
            let peak = out
                .data
                .column(j)
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
                .unwrap()
                .0 as i64;
            assert!((peak - 20).abs() <= 1, "column {j} peak at {peak}");
        }
    }
}
