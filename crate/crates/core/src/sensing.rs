//! Target echoes, sample covariance, MUSIC spectra and jamming metrics.

use std::io::Write;

use crate::channels::steering_ula;
use crate::error::{Error, Result};
use crate::linalg::{complex_gaussian, frob_sq, hermitian_eigen, CMatrix, CVector, C64};
use crate::scene::RandomStream;

#[derive(Debug, Clone)]
pub struct EchoFrame {
    /// `N x L` received echo block.
    pub y_s: CMatrix,
    pub true_theta: f64,
    pub sigma2_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MusicSpectrum {
    /// Angles in degrees.
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub peak_angle: f64,
    pub peak_value: f64,
}

/// Echo noise variance that puts the direct-path echo at `snr_db`:
/// `snr = chi^2 (P0/N) ||h_d||^4 / (N sigma2_s)`.
pub fn echo_noise_variance(chi: f64, p0: f64, h_d: &CVector, snr_db: f64) -> f64 {
    let n = h_d.len() as f64;
    chi * chi * (p0 / n) * h_d.norm_squared().powi(2) / (n * 10f64.powf(snr_db / 10.0))
}

/// `Y_s = chi (h_d + h_D)(h_d + h_D)* X + N_s`, noise i.i.d. CN(0, sigma2_s).
pub fn synth_echo(
    h_s_d: &CVector,
    h_s_dris: &CVector,
    chi: f64,
    x: &CMatrix,
    sigma2_s: f64,
    true_theta: f64,
    stream: &mut RandomStream,
) -> Result<EchoFrame> {
    let n = h_s_d.len();
    if h_s_dris.len() != n || x.nrows() != n {
        return Err(Error::dims(
            "synth_echo",
            format!("paths and X with {n} rows"),
            format!("h_D {}, X {}x{}", h_s_dris.len(), x.nrows(), x.ncols()),
        ));
    }
    if !(0.0..=1.0).contains(&chi) {
        return Err(Error::invalid(format!("chi must lie in [0, 1], got {chi}")));
    }
    if !(sigma2_s >= 0.0) {
        return Err(Error::invalid("echo noise variance must be >= 0"));
    }
    let h = h_s_d + h_s_dris;
    // chi h (h* X): rank one
    let proj = h.adjoint() * x;
    let mut y = (&h * proj) * C64::new(chi, 0.0);
    if sigma2_s > 0.0 {
        y += complex_gaussian(n, x.ncols(), stream) * C64::new(sigma2_s.sqrt(), 0.0);
    }
    Ok(EchoFrame {
        y_s: y,
        true_theta,
        sigma2_s,
    })
}

/// `(1/L) Y Y*`.
pub fn sample_covariance(y_s: &CMatrix) -> Result<CMatrix> {
    if y_s.ncols() == 0 || y_s.nrows() == 0 {
        return Err(Error::invalid("empty echo frame"));
    }
    Ok(y_s * y_s.adjoint() / C64::new(y_s.ncols() as f64, 0.0))
}

/// Angle grid on [-90, 90] degrees.
pub fn angle_grid(step_deg: f64) -> Result<Vec<f64>> {
    if !(step_deg > 0.0) || step_deg > 180.0 {
        return Err(Error::invalid(format!(
            "grid step must lie in (0, 180], got {step_deg}"
        )));
    }
    let count = (180.0 / step_deg + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| (-90.0 + i as f64 * step_deg).min(90.0)).collect())
}

/// MUSIC pseudo-spectrum `1 / ||E_n* alpha(theta)||^2` over the angle grid,
/// with `E_n` the eigenvectors of the `N - n_sources` smallest eigenvalues.
/// Ties for the maximum go to the smallest angle.
pub fn music_spectrum(r: &CMatrix, grid_step_deg: f64, n_sources: usize, spacing: f64) -> Result<MusicSpectrum> {
    let n = r.nrows();
    if !r.is_square() || n == 0 {
        return Err(Error::dims(
            "music_spectrum",
            "non-empty square covariance",
            format!("{:?}", r.shape()),
        ));
    }
    if n_sources >= n {
        return Err(Error::invalid(format!(
            "n_sources {n_sources} must be below array size {n}"
        )));
    }
    let grid = angle_grid(grid_step_deg)?;
    let (_, vecs) = hermitian_eigen(r)?;
    let noise = vecs.columns(0, n - n_sources).into_owned();
    let en_adj = noise.adjoint();
    // denominator floor keeps exact nulls finite
    let floor = f64::EPSILON * f64::EPSILON * n as f64;
    let mut values = Vec::with_capacity(grid.len());
    for &deg in &grid {
        let a = steering_ula(n, deg.to_radians(), spacing)?;
        let d = (&en_adj * a).norm_squared();
        values.push(1.0 / d.max(floor));
    }
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    Ok(MusicSpectrum {
        peak_angle: grid[best],
        peak_value: values[best],
        grid,
        values,
    })
}

fn prominence_db(s: &MusicSpectrum) -> f64 {
    let mut v = s.values.clone();
    let mid = v.len() / 2;
    let (_, floor, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    10.0 * (s.peak_value / *floor).log10()
}

/// Drop in floor-normalized peak prominence from `clean` to `jammed`, in dB.
pub fn peak_loss(clean: &MusicSpectrum, jammed: &MusicSpectrum) -> Result<f64> {
    if clean.grid != jammed.grid {
        return Err(Error::invalid("peak_loss needs spectra on identical grids"));
    }
    Ok(prominence_db(clean) - prominence_db(jammed))
}

/// `|peak_angle - true_theta|` in degrees.
pub fn doa_bias(spectrum: &MusicSpectrum, true_theta_deg: f64) -> f64 {
    (spectrum.peak_angle - true_theta_deg).abs()
}

/// Two-column CSV `angle_deg,value`.
pub fn write_spectrum_csv<W: Write>(spectrum: &MusicSpectrum, mut out: W) -> std::io::Result<()> {
    writeln!(out, "angle_deg,value")?;
    for (a, v) in spectrum.grid.iter().zip(&spectrum.values) {
        writeln!(
            out,
            "{},{}",
            crate::experiments::fmt_sig(*a),
            crate::experiments::fmt_sig(*v)
        )?;
    }
    Ok(())
}

/// Hermitian residual `||R - R*||_F / ||R||_F`.
pub fn hermitian_residual(r: &CMatrix) -> f64 {
    let n = frob_sq(r).sqrt();
    if n == 0.0 {
        0.0
    } else {
        frob_sq(&(r - r.adjoint())).sqrt() / n
    }
}
