//! MUI power, per-user SINR, sum rate and the jamming lower bound.
//!
//! Symbol expectations are realized as sample means over the `L` symbols of
//! the frame.

use crate::error::{Error, Result};
use crate::linalg::{frob_sq, CMatrix};
use crate::waveform::SymbolMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct CommReport {
    pub mui_power: f64,
    pub sinr_per_user: Vec<f64>,
    pub sum_rate: f64,
    pub sinr_bound_per_user: Vec<f64>,
    pub rate_from_bound: f64,
}

fn check_shapes(op: &'static str, h: &CMatrix, x: &CMatrix, s: &SymbolMatrix) -> Result<()> {
    if h.ncols() != x.nrows() || h.nrows() != s.n_users() || x.ncols() != s.frame_len() {
        return Err(Error::dims(
            op,
            "H (K x N), X (N x L), S (K x L)",
            format!(
                "H {}x{}, X {}x{}, S {}x{}",
                h.nrows(),
                h.ncols(),
                x.nrows(),
                x.ncols(),
                s.n_users(),
                s.frame_len()
            ),
        ));
    }
    Ok(())
}

fn check_noise(sigma2: f64) -> Result<()> {
    if sigma2 > 0.0 && sigma2.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("noise variance must be positive, got {sigma2}")))
    }
}

/// `||H X - S||_F^2`.
pub fn mui_power(h_pt: &CMatrix, x: &CMatrix, s: &SymbolMatrix) -> Result<f64> {
    check_shapes("mui_power", h_pt, x, s)?;
    Ok(frob_sq(&(h_pt * x - &s.entries)))
}

/// Per-user frame averages `(1/L) sum_l |s_kl|^2`.
fn symbol_power(s: &SymbolMatrix) -> Vec<f64> {
    let l = s.frame_len() as f64;
    s.entries
        .row_iter()
        .map(|r| r.iter().map(|z| z.norm_sqr()).sum::<f64>() / l)
        .collect()
}

/// Per-user frame averages of `|r_kl|^2` for a `K x L` residual.
fn row_power(r: &CMatrix) -> Vec<f64> {
    let l = r.ncols() as f64;
    r.row_iter().map(|row| row.norm_squared() / l).collect()
}

/// `gamma_k = mean_l |s_kl|^2 / (mean_l |(h_PT,k + h_ACA,k) x_l - s_kl|^2 + sigma2)`.
pub fn sinr_per_user(h_pt: &CMatrix, h_aca: &CMatrix, x: &CMatrix, s: &SymbolMatrix, sigma2: f64) -> Result<Vec<f64>> {
    check_shapes("sinr_per_user", h_pt, x, s)?;
    if h_aca.shape() != h_pt.shape() {
        return Err(Error::dims(
            "sinr_per_user",
            format!("H_ACA {:?}", h_pt.shape()),
            format!("{:?}", h_aca.shape()),
        ));
    }
    check_noise(sigma2)?;
    let resid = (h_pt + h_aca) * x - &s.entries;
    Ok(symbol_power(s)
        .into_iter()
        .zip(row_power(&resid))
        .map(|(sig, int)| sig / (int + sigma2))
        .collect())
}

/// `sum_k log2(1 + gamma_k)`.
pub fn sum_rate(gammas: &[f64]) -> Result<f64> {
    if let Some(g) = gammas.iter().find(|&&g| !(g >= 0.0)) {
        return Err(Error::invalid(format!("SINR must be >= 0, got {g}")));
    }
    Ok(gammas.iter().map(|g| (1.0 + g).log2()).sum())
}

/// Jamming lower bound
/// `rho_k^2 / (mean_l |h_PT,k x_l - s_kl|^2 + P0 L_cas,k N_D mu_bar + sigma2)`,
/// using the analytic symbol power `rho_k^2`.
#[allow(clippy::too_many_arguments)]
pub fn sinr_lower_bound(
    h_pt: &CMatrix,
    x: &CMatrix,
    s: &SymbolMatrix,
    l_cas: &[f64],
    n_d: usize,
    mu_bar: f64,
    p0: f64,
    sigma2: f64,
) -> Result<Vec<f64>> {
    check_shapes("sinr_lower_bound", h_pt, x, s)?;
    check_noise(sigma2)?;
    if l_cas.len() != s.n_users() {
        return Err(Error::dims(
            "sinr_lower_bound",
            format!("{} gains", s.n_users()),
            l_cas.len().to_string(),
        ));
    }
    if l_cas.iter().any(|&g| !(g >= 0.0)) || !(mu_bar >= 0.0) || !(p0 >= 0.0) {
        return Err(Error::invalid("gains, mu_bar and power must be >= 0"));
    }
    let mui = row_power(&(h_pt * x - &s.entries));
    Ok(s.per_user_amplitude
        .iter()
        .zip(mui)
        .zip(l_cas)
        .map(|((rho, m), lc)| rho * rho / (m + p0 * lc * n_d as f64 * mu_bar + sigma2))
        .collect())
}

/// Interference-free rate `sum_k log2(1 + rho_k^2 / sigma2)`.
pub fn upper_bound_rate(amplitudes: &[f64], sigma2: f64) -> Result<f64> {
    check_noise(sigma2)?;
    Ok(amplitudes.iter().map(|r| (1.0 + r * r / sigma2).log2()).sum())
}

/// Every report field for one waveform on one channel draw.
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    h_pt: &CMatrix,
    h_aca: &CMatrix,
    x: &CMatrix,
    s: &SymbolMatrix,
    l_cas: &[f64],
    n_d: usize,
    mu_bar: f64,
    p0: f64,
    sigma2: f64,
) -> Result<CommReport> {
    let sinr = sinr_per_user(h_pt, h_aca, x, s, sigma2)?;
    let bound = sinr_lower_bound(h_pt, x, s, l_cas, n_d, mu_bar, p0, sigma2)?;
    Ok(CommReport {
        mui_power: mui_power(h_pt, x, s)?,
        sum_rate: sum_rate(&sinr)?,
        rate_from_bound: sum_rate(&bound)?,
        sinr_per_user: sinr,
        sinr_bound_per_user: bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_gaussian, C64};
    use crate::scene::derive_stream;
    use crate::waveform::gen_symbols;

    fn instance(seed: u64) -> (CMatrix, CMatrix, CMatrix, SymbolMatrix) {
        let mut st = derive_stream(seed, "cm", 0);
        let h = complex_gaussian(3, 4, &mut st);
        let ha = complex_gaussian(3, 4, &mut st) * C64::new(0.3, 0.0);
        let x = complex_gaussian(4, 6, &mut st);
        let s = gen_symbols(3, 6, &[1.0, 0.7, 1.3], &mut st).unwrap();
        (h, ha, x, s)
    }

    #[test]
    fn mui_cases() {
        let (h, _, x, s) = instance(1);
        assert!((mui_power(&h, &CMatrix::zeros(4, 6), &s).unwrap() - frob_sq(&s.entries)).abs() < 1e-12);
        // exact solve: square H, X = H^-1 S
        let hs = complex_gaussian(3, 3, &mut derive_stream(1, "sq", 0));
        let xs = hs.clone().try_inverse().unwrap() * &s.entries;
        assert!(mui_power(&hs, &xs, &s).unwrap() < 1e-20);
        // entrywise double loop
        let mut brute = 0.0;
        for k in 0..3 {
            for l in 0..6 {
                let mut acc = C64::new(0.0, 0.0);
                for n in 0..4 {
                    acc += h[(k, n)] * x[(n, l)];
                }
                brute += (acc - s.entries[(k, l)]).norm_sqr();
            }
        }
        assert!((mui_power(&h, &x, &s).unwrap() - brute).abs() < 1e-12 * brute);
        assert!(mui_power(&h, &CMatrix::zeros(5, 6), &s).is_err());
    }

    #[test]
    fn sinr_special_cases() {
        let (_, _, _, s) = instance(2);
        let hs = complex_gaussian(3, 3, &mut derive_stream(2, "sq", 0));
        let xs = hs.clone().try_inverse().unwrap() * &s.entries;
        let zero = CMatrix::zeros(3, 3);
        let g = sinr_per_user(&hs, &zero, &xs, &s, 0.01).unwrap();
        for (gk, rho) in g.iter().zip(&s.per_user_amplitude) {
            assert!((gk - rho * rho / 0.01).abs() < 1e-8 * gk);
        }
        let g = sinr_per_user(&hs, &zero, &CMatrix::zeros(3, 6), &s, 0.01).unwrap();
        for (gk, rho) in g.iter().zip(&s.per_user_amplitude) {
            assert!((gk - rho * rho / (rho * rho + 0.01)).abs() < 1e-12);
        }
        assert!(sinr_per_user(&hs, &zero, &xs, &s, 0.0).is_err());
    }

    #[test]
    fn sinr_matches_per_symbol_loop() {
        let (h, ha, x, s) = instance(3);
        let g = sinr_per_user(&h, &ha, &x, &s, 0.05).unwrap();
        for k in 0..3 {
            let (mut num, mut den) = (0.0, 0.0);
            for l in 0..6 {
                let mut y = C64::new(0.0, 0.0);
                for n in 0..4 {
                    y += (h[(k, n)] + ha[(k, n)]) * x[(n, l)];
                }
                num += s.entries[(k, l)].norm_sqr();
                den += (y - s.entries[(k, l)]).norm_sqr();
            }
            let expect = (num / 6.0) / (den / 6.0 + 0.05);
            assert!((g[k] - expect).abs() < 1e-12 * expect);
        }
    }

    #[test]
    fn sum_rate_cases() {
        assert_eq!(sum_rate(&[0.0, 0.0]).unwrap(), 0.0);
        assert!((sum_rate(&[1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((sum_rate(&[1.0, 3.0]).unwrap() - 3.0).abs() < 1e-15);
        assert!(sum_rate(&[-0.1]).is_err());
    }

    #[test]
    fn sum_rate_monotone_under_perturbation() {
        let base = [0.3, 2.0, 5.0];
        let r0 = sum_rate(&base).unwrap();
        for k in 0..3 {
            let mut up = base;
            up[k] += 1e-3;
            assert!(sum_rate(&up).unwrap() > r0);
        }
    }

    #[test]
    fn bound_without_jamming_equals_jam_free_sinr() {
        let (h, _, x, s) = instance(4);
        let zero = CMatrix::zeros(3, 4);
        let free = sinr_per_user(&h, &zero, &x, &s, 0.02).unwrap();
        for (n_d, mu) in [(0, 1.6078), (1024, 0.0)] {
            let b = sinr_lower_bound(&h, &x, &s, &[1e-3; 3], n_d, mu, 1.0, 0.02).unwrap();
            for (a, c) in free.iter().zip(&b) {
                assert!((a - c).abs() < 1e-12 * a);
            }
        }
    }

    #[test]
    fn bound_mui_free_closed_form() {
        let (_, _, _, s) = instance(5);
        let hs = complex_gaussian(3, 3, &mut derive_stream(5, "sq", 0));
        let xs = hs.clone().try_inverse().unwrap() * &s.entries;
        let (p0, sigma2) = (1.5849e-3, 1.8e-15);
        let lc = [1e-13, 2e-13, 3e-13];
        let b = sinr_lower_bound(&hs, &xs, &s, &lc, 1024, 1.6078, p0, sigma2).unwrap();
        for k in 0..3 {
            let rho2 = s.per_user_amplitude[k].powi(2);
            let expect = rho2 / (p0 * lc[k] * 1024.0 * 1.6078 + sigma2);
            assert!((b[k] - expect).abs() < 1e-6 * expect);
        }
    }

    #[test]
    fn upper_bound_cases() {
        assert_eq!(upper_bound_rate(&[0.0, 0.0], 1.0).unwrap(), 0.0);
        assert!((upper_bound_rate(&[0.5], 0.25).unwrap() - 1.0).abs() < 1e-15);
    }
}
