//! Channel synthesis: steering vectors, large-scale fading, fading draws, and
//! the pilot-phase / aged / sensing channel compositions.
//!
//! Orientation: every user channel matrix is `K x N` (rows are users, columns
//! BS antennas), so the received block is `H X` with `X` of size `N x L`.
//! `G` is `N x N_D` and the DRIS-to-user channel `H_I` is `N_D x K`; the
//! reflected user channel is therefore `(G diag(phi) H_I)^T`.
//!
//! Geometry: the BS array is a ULA along +x centered on `bs_position`, with
//! broadside toward +y. DRIS elements sit on an `n_h x n_v` grid in the x-z
//! plane centered on `dris_position`; element `r = h * n_v + v`, which matches
//! the Kronecker ordering of [`steering_upa`].

use std::f64::consts::TAU;

use crate::dris::{aca_reflection_delta, sample_reflection, DrisProfile, ReflectionVector};
use crate::error::{Error, Result};
use crate::linalg::{cis, complex_gaussian, kron, CMatrix, CVector, C64};
use crate::scene::{distance, Placement, RandomStream, ScenarioConfig, Vec3};

/// ULA response: entry `m` is `exp(j 2 pi m spacing sin(theta))`.
pub fn steering_ula(n: usize, theta: f64, spacing: f64) -> Result<CVector> {
    if n == 0 {
        return Err(Error::invalid("steering vector needs at least one element"));
    }
    let step = TAU * spacing * theta.sin();
    Ok(CVector::from_fn(n, |m, _| cis(step * m as f64)))
}

/// UPA response `alpha(n_h, phi_h) kron alpha(n_v, phi_v)`.
pub fn steering_upa(n_h: usize, n_v: usize, phi_h: f64, phi_v: f64, spacing: f64) -> Result<CVector> {
    Ok(kron(
        &steering_ula(n_h, phi_h, spacing)?,
        &steering_ula(n_v, phi_v, spacing)?,
    ))
}

fn check_distance(d_m: f64) -> Result<()> {
    if d_m > 0.0 && d_m.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("distance must be positive, got {d_m}")))
    }
}

/// LoS large-scale loss `35.6 + 22 log10(d)` dB.
pub fn path_loss_los_db(d_m: f64) -> Result<f64> {
    check_distance(d_m)?;
    Ok(35.6 + 22.0 * d_m.log10())
}

/// NLoS large-scale loss `32.6 + 36.7 log10(d)` dB.
pub fn path_loss_nlos_db(d_m: f64) -> Result<f64> {
    check_distance(d_m)?;
    Ok(32.6 + 36.7 * d_m.log10())
}

/// Linear power gain of the LoS model.
pub fn los_gain(d_m: f64) -> Result<f64> {
    Ok(10f64.powf(-path_loss_los_db(d_m)? / 10.0))
}

/// Linear power gain of the NLoS model.
pub fn nlos_gain(d_m: f64) -> Result<f64> {
    Ok(10f64.powf(-path_loss_nlos_db(d_m)? / 10.0))
}

pub fn bs_antenna_positions(config: &ScenarioConfig) -> Vec<Vec3> {
    let d = config.array_spacing * config.wavelength();
    let c = config.bs_position;
    let mid = (config.n_tx as f64 - 1.0) / 2.0;
    (0..config.n_tx)
        .map(|n| [c[0] + (n as f64 - mid) * d, c[1], c[2]])
        .collect()
}

pub fn dris_element_positions(config: &ScenarioConfig, profile: &DrisProfile) -> Vec<Vec3> {
    let d = config.array_spacing * config.wavelength();
    let c = config.dris_position;
    let mid_h = (profile.n_h as f64 - 1.0) / 2.0;
    let mid_v = (profile.n_v as f64 - 1.0) / 2.0;
    let mut out = Vec::with_capacity(profile.n_d());
    for h in 0..profile.n_h {
        for v in 0..profile.n_v {
            out.push([c[0] + (h as f64 - mid_h) * d, c[1], c[2] + (v as f64 - mid_v) * d]);
        }
    }
    out
}

/// Direct BS-user channel `H_d` (`K x N`): Rayleigh fading scaled by the NLoS
/// gain at each user's direct distance.
pub fn gen_direct_channel(
    placement: &Placement,
    config: &ScenarioConfig,
    stream: &mut RandomStream,
) -> Result<CMatrix> {
    let mut h = complex_gaussian(placement.distances_direct.len(), config.n_tx, stream);
    for (k, &d) in placement.distances_direct.iter().enumerate() {
        let amp = nlos_gain(d)?.sqrt();
        h.row_mut(k).scale_mut(amp);
    }
    Ok(h)
}

/// Near-field BS-DRIS channel `G` (`N x N_D`): exact per-pair path phases with
/// the LoS gain taken at the center-to-center distance.
pub fn gen_bs_dris_channel(config: &ScenarioConfig, profile: &DrisProfile) -> Result<CMatrix> {
    let center = distance(&config.bs_position, &config.dris_position);
    if !(center > 0.0) {
        return Err(Error::invalid("BS and DRIS positions coincide"));
    }
    let amp = los_gain(center)?.sqrt();
    let lambda = config.wavelength();
    let ants = bs_antenna_positions(config);
    let elems = dris_element_positions(config, profile);
    Ok(CMatrix::from_fn(ants.len(), elems.len(), |n, r| {
        amp * cis(-TAU * distance(&ants[n], &elems[r]) / lambda)
    }))
}

/// DRIS-user channel `H_I` (`N_D x K`): Rayleigh fading scaled by the LoS gain
/// at each DRIS-user distance.
pub fn gen_dris_user_channel(
    placement: &Placement,
    _config: &ScenarioConfig,
    profile: &DrisProfile,
    stream: &mut RandomStream,
) -> Result<CMatrix> {
    let mut h = complex_gaussian(profile.n_d(), placement.distances_dris_user.len(), stream);
    for (k, &d) in placement.distances_dris_user.iter().enumerate() {
        let amp = los_gain(d)?.sqrt();
        h.column_mut(k).scale_mut(amp);
    }
    Ok(h)
}

/// Cascaded large-scale gain per user: BS-DRIS LoS gain times DRIS-user LoS gain.
pub fn cascaded_gains(placement: &Placement) -> Result<Vec<f64>> {
    let bs_dris = los_gain(placement.distance_bs_dris)?;
    placement
        .distances_dris_user
        .iter()
        .map(|&d| Ok(bs_dris * los_gain(d)?))
        .collect()
}

/// `(G diag(phi) H_I)^T` as a `K x N` matrix.
fn reflected_channel(g: &CMatrix, phi: &CVector, h_dris_user: &CMatrix, op: &'static str) -> Result<CMatrix> {
    let n_d = g.ncols();
    if phi.len() != n_d || h_dris_user.nrows() != n_d {
        return Err(Error::dims(
            op,
            format!("G with {n_d} columns, phi and H_I with {n_d} rows"),
            format!(
                "phi {} and H_I {}x{}",
                phi.len(),
                h_dris_user.nrows(),
                h_dris_user.ncols()
            ),
        ));
    }
    let mut scaled = h_dris_user.clone();
    for (r, mut row) in scaled.row_iter_mut().enumerate() {
        row *= phi[r];
    }
    Ok((g * scaled).transpose())
}

/// Pilot-phase channel `H_d + (G diag(phi_PT) H_I)^T`.
pub fn compose_pt_channel(
    h_direct: &CMatrix,
    g: &CMatrix,
    phi_pt: &ReflectionVector,
    h_dris_user: &CMatrix,
) -> Result<CMatrix> {
    let refl = reflected_channel(g, &phi_pt.coefficients, h_dris_user, "compose_pt_channel")?;
    if refl.shape() != h_direct.shape() {
        return Err(Error::dims(
            "compose_pt_channel",
            format!("{:?}", refl.shape()),
            format!("{:?}", h_direct.shape()),
        ));
    }
    Ok(h_direct + refl)
}

/// Aged-channel increment `(G diag(phi_DT - phi_PT) H_I)^T`.
pub fn compose_aca_channel(
    g: &CMatrix,
    phi_pt: &ReflectionVector,
    phi_dt: &ReflectionVector,
    h_dris_user: &CMatrix,
) -> Result<CMatrix> {
    let delta = aca_reflection_delta(phi_pt, phi_dt)?;
    reflected_channel(g, &delta.coefficients, h_dris_user, "compose_aca_channel")
}

/// Sensing-path vectors and the large-scale gains they were built from.
#[derive(Debug, Clone)]
pub struct SensingPaths {
    pub direct: CVector,
    pub dris: CVector,
    pub l_s_direct: f64,
    pub l_s_cas: f64,
}

/// Target direction `(phi_h, phi_v)` seen from the DRIS, as sines of the
/// direction cosines along the grid axes x and z.
pub fn dris_target_angles(config: &ScenarioConfig) -> (f64, f64) {
    let t = config.target_position();
    let c = config.dris_position;
    let d = distance(&t, &c);
    let ux = (t[0] - c[0]) / d;
    let uz = (t[2] - c[2]) / d;
    (ux.clamp(-1.0, 1.0).asin(), uz.clamp(-1.0, 1.0).asin())
}

/// Sensing large-scale gains: LoS to the target for the direct path, and the
/// BS-DRIS times DRIS-target LoS product for the reflected path.
pub fn sensing_gains(config: &ScenarioConfig) -> Result<(f64, f64)> {
    let t = config.target_position();
    let l_d = los_gain(distance(&config.bs_position, &t))?;
    let l_cas = los_gain(distance(&config.bs_position, &config.dris_position))?
        * los_gain(distance(&config.dris_position, &t))?;
    Ok((l_d, l_cas))
}

/// `h_d = sqrt(L_d) alpha(N, theta)` and
/// `h_D = sqrt(L_cas) G_u diag(phi) alpha(N_h, N_v, phi_h, phi_v)`, where `G_u`
/// is `G` rescaled to unit-modulus entries (its own LoS gain is already part
/// of `L_cas`).
pub fn sensing_paths(
    config: &ScenarioConfig,
    profile: &DrisProfile,
    g: &CMatrix,
    phi_t: &ReflectionVector,
) -> Result<SensingPaths> {
    let (l_d, l_cas) = sensing_gains(config)?;
    sensing_paths_with_gains(config, profile, g, phi_t, l_d, l_cas)
}

pub fn sensing_paths_with_gains(
    config: &ScenarioConfig,
    profile: &DrisProfile,
    g: &CMatrix,
    phi_t: &ReflectionVector,
    l_s_direct: f64,
    l_s_cas: f64,
) -> Result<SensingPaths> {
    if l_s_direct < 0.0 || l_s_cas < 0.0 {
        return Err(Error::invalid("sensing gains must be >= 0"));
    }
    let n = config.n_tx;
    let direct = steering_ula(n, config.target_angle_rad(), config.array_spacing)? * C64::new(l_s_direct.sqrt(), 0.0);
    if g.nrows() != n || g.ncols() != profile.n_d() || phi_t.len() != profile.n_d() {
        return Err(Error::dims(
            "sensing_paths",
            format!("G {}x{} and phi of length {}", n, profile.n_d(), profile.n_d()),
            format!("G {}x{} and phi of length {}", g.nrows(), g.ncols(), phi_t.len()),
        ));
    }
    if profile.n_d() == 0 || l_s_cas == 0.0 {
        return Ok(SensingPaths {
            direct,
            dris: CVector::zeros(n),
            l_s_direct,
            l_s_cas,
        });
    }
    let g_mod = g[(0, 0)].norm();
    if !(g_mod > 0.0) {
        return Err(Error::Numerical("BS-DRIS channel has zero gain".into()));
    }
    let (phi_h, phi_v) = dris_target_angles(config);
    let a = steering_upa(profile.n_h, profile.n_v, phi_h, phi_v, config.array_spacing)?;
    let weighted = a.component_mul(&phi_t.coefficients);
    let dris = (g * weighted) * C64::new(l_s_cas.sqrt() / g_mod, 0.0);
    Ok(SensingPaths {
        direct,
        dris,
        l_s_direct,
        l_s_cas,
    })
}

/// One coherence block's channel realizations.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    pub h_direct: CMatrix,
    pub g_bs_dris: CMatrix,
    pub h_dris_user: CMatrix,
    pub phi_pt: ReflectionVector,
    pub phi_dt: ReflectionVector,
    pub h_pt: CMatrix,
    pub h_aca: CMatrix,
    pub l_cas_per_user: Vec<f64>,
}

/// Draws fading and both reflection vectors, then composes `H_PT` and `H_ACA`.
/// Each random component comes from its own fork of `stream`.
pub fn draw_channel_set(
    config: &ScenarioConfig,
    profile: &DrisProfile,
    placement: &Placement,
    g: CMatrix,
    stream: &RandomStream,
) -> Result<ChannelSet> {
    let h_direct = gen_direct_channel(placement, config, &mut stream.fork("h_direct", 0))?;
    let h_dris_user = gen_dris_user_channel(placement, config, profile, &mut stream.fork("h_dris_user", 0))?;
    let phi_pt = sample_reflection(profile, &mut stream.fork("phi", 0));
    let phi_dt = sample_reflection(profile, &mut stream.fork("phi", 1));
    let h_pt = compose_pt_channel(&h_direct, &g, &phi_pt, &h_dris_user)?;
    let h_aca = compose_aca_channel(&g, &phi_pt, &phi_dt, &h_dris_user)?;
    Ok(ChannelSet {
        l_cas_per_user: cascaded_gains(placement)?,
        h_direct,
        g_bs_dris: g,
        h_dris_user,
        phi_pt,
        phi_dt,
        h_pt,
        h_aca,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frob_sq;
    use crate::scene::{derive_stream, place_users};
    use std::f64::consts::PI;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn ula_cases() {
        let v = steering_ula(4, 0.0, 0.5).unwrap();
        assert!(v.iter().all(|&z| close(z, C64::new(1.0, 0.0), 1e-15)));
        let v = steering_ula(2, PI / 2.0, 0.5).unwrap();
        assert!(close(v[1], C64::new(-1.0, 0.0), 1e-12));
        let v = steering_ula(8, 0.3, 0.5).unwrap();
        assert!((v.norm_squared() - 8.0).abs() < 1e-12);
        assert!(close(v[3], cis(TAU * 1.5 * 0.3f64.sin()), 1e-12));
        assert!(steering_ula(0, 0.1, 0.5).is_err());
    }

    #[test]
    fn upa_cases() {
        let v = steering_upa(1, 1, 0.4, -0.2, 0.5).unwrap();
        assert_eq!(v.len(), 1);
        assert!(close(v[0], C64::new(1.0, 0.0), 1e-15));
        let v = steering_upa(2, 2, 0.0, 0.0, 0.5).unwrap();
        assert!(v.iter().all(|&z| close(z, C64::new(1.0, 0.0), 1e-15)));
        let v = steering_upa(2, 3, 0.2, 0.4, 0.5).unwrap();
        for h in 0..2 {
            for w in 0..3 {
                let expect = cis(TAU * 0.5 * (h as f64 * 0.2f64.sin() + w as f64 * 0.4f64.sin()));
                assert!(close(v[h * 3 + w], expect, 1e-12));
            }
        }
        assert!(steering_upa(0, 2, 0.0, 0.0, 0.5).is_err());
    }

    #[test]
    fn path_loss_values() {
        assert!((path_loss_los_db(1.0).unwrap() - 35.6).abs() < 1e-12);
        assert!((path_loss_nlos_db(180.0).unwrap() - 115.3685).abs() < 1e-3);
        assert!((path_loss_los_db(100.0).unwrap() - 79.6).abs() < 1e-12);
        assert!(path_loss_los_db(0.0).is_err());
        assert!(path_loss_nlos_db(-3.0).is_err());
    }

    #[test]
    fn bs_dris_channel_geometry() {
        let cfg = ScenarioConfig {
            n_tx: 1,
            frame_len: 1,
            ..Default::default()
        };
        let one = DrisProfile::reference().with_grid(1, 1);
        let g = gen_bs_dris_channel(&cfg, &one).unwrap();
        let amp = los_gain(5f64.sqrt()).unwrap().sqrt();
        assert!((g[(0, 0)].norm() - amp).abs() < 1e-15 * amp.max(1.0));

        let cfg = ScenarioConfig::default();
        let prof = DrisProfile::reference().with_grid(4, 3);
        let g = gen_bs_dris_channel(&cfg, &prof).unwrap();
        assert_eq!(g.shape(), (16, 12));
        let m0 = g[(0, 0)].norm();
        assert!(g.iter().all(|z| (z.norm() - m0).abs() < 1e-12 * m0));
        let d00 = distance(&bs_antenna_positions(&cfg)[0], &dris_element_positions(&cfg, &prof)[0]);
        let expect = (-TAU * d00 / cfg.wavelength()).rem_euclid(TAU);
        let got = g[(0, 0)].arg().rem_euclid(TAU);
        let diff = (expect - got).abs();
        assert!(diff.min(TAU - diff) < 1e-6);

        let bad = ScenarioConfig {
            dris_position: cfg.bs_position,
            ..cfg
        };
        assert!(gen_bs_dris_channel(&bad, &prof).is_err());
    }

    #[test]
    fn direct_channel_unit_distance_variance() {
        // user at 1 m from the BS: 10^4 entries with variance 10^-3.56
        let cfg = ScenarioConfig {
            n_tx: 10_000,
            frame_len: 10_000,
            ..Default::default()
        };
        let placement = Placement {
            user_positions: vec![[0.0, 0.0, 2.0]],
            distances_direct: vec![1.0],
            distances_dris_user: vec![1.0],
            distance_bs_dris: 5f64.sqrt(),
        };
        let h = gen_direct_channel(&placement, &cfg, &mut derive_stream(9, "hd", 0)).unwrap();
        let var = frob_sq(&h) / 1e4;
        let expect = 10f64.powf(-3.26);
        // NLoS at 1 m is 32.6 dB; the LoS model gives 35.6 dB
        assert!((var / expect - 1.0).abs() < 0.05, "{var} vs {expect}");

        let prof = DrisProfile::reference().with_grid(10_000, 1);
        let hi = gen_dris_user_channel(&placement, &cfg, &prof, &mut derive_stream(9, "hi", 0)).unwrap();
        let var = frob_sq(&hi) / 1e4;
        assert!((var / 10f64.powf(-3.56) - 1.0).abs() < 0.05);
    }

    #[test]
    fn zero_radius_shares_large_scale_gain_and_is_deterministic() {
        let cfg = ScenarioConfig {
            user_region_radius: 0.0,
            ..Default::default()
        };
        let p = place_users(&cfg, &mut derive_stream(1, "p", 0));
        assert!(p.distances_direct.windows(2).all(|w| w[0] == w[1]));
        let a = gen_direct_channel(&p, &cfg, &mut derive_stream(1, "h", 0)).unwrap();
        let b = gen_direct_channel(&p, &cfg, &mut derive_stream(1, "h", 0)).unwrap();
        assert_eq!(a, b);
    }

    fn small_set(n_d: usize, seed: u64) -> (ScenarioConfig, DrisProfile, ChannelSet) {
        let cfg = ScenarioConfig {
            n_tx: 4,
            n_users: 3,
            frame_len: 8,
            ..Default::default()
        };
        let prof = DrisProfile::reference().with_element_count(n_d);
        let s = derive_stream(seed, "trial", 0);
        let p = place_users(&cfg, &mut s.fork("place", 0));
        let g = gen_bs_dris_channel(&cfg, &prof).unwrap();
        let set = draw_channel_set(&cfg, &prof, &p, g, &s).unwrap();
        (cfg, prof, set)
    }

    #[test]
    fn composition_identities() {
        let (_, prof, set) = small_set(16, 2);
        let zero = ReflectionVector {
            coefficients: CVector::zeros(prof.n_d()),
            indices: vec![],
        };
        let hp = compose_pt_channel(&set.h_direct, &set.g_bs_dris, &zero, &set.h_dris_user).unwrap();
        assert_eq!(hp, set.h_direct);

        let same = compose_aca_channel(&set.g_bs_dris, &set.phi_pt, &set.phi_pt, &set.h_dris_user).unwrap();
        assert!(same.iter().all(|z| z.norm() == 0.0));

        let h_dt = compose_pt_channel(&set.h_direct, &set.g_bs_dris, &set.phi_dt, &set.h_dris_user).unwrap();
        let resid = frob_sq(&(h_dt - &set.h_pt - &set.h_aca)).sqrt();
        assert!(resid < 1e-12 * frob_sq(&set.h_pt).sqrt());

        // phi and -phi average back to the direct channel
        let neg = ReflectionVector {
            coefficients: -set.phi_pt.coefficients.clone(),
            indices: vec![],
        };
        let hn = compose_pt_channel(&set.h_direct, &set.g_bs_dris, &neg, &set.h_dris_user).unwrap();
        let avg = (&set.h_pt + hn) * C64::new(0.5, 0.0);
        assert!(frob_sq(&(avg - &set.h_direct)).sqrt() < 1e-12 * frob_sq(&set.h_pt).sqrt());
    }

    #[test]
    fn single_element_is_rank_one_perturbation() {
        let (_, _, set) = small_set(1, 3);
        let diff = &set.h_pt - &set.h_direct;
        let s = crate::linalg::thin_svd(&diff).unwrap().singular_values;
        assert!(s[1] < 1e-10 * s[0]);
    }

    #[test]
    fn composition_rejects_bad_shapes() {
        let (_, _, set) = small_set(16, 4);
        let short = ReflectionVector {
            coefficients: CVector::zeros(3),
            indices: vec![],
        };
        assert!(compose_pt_channel(&set.h_direct, &set.g_bs_dris, &short, &set.h_dris_user).is_err());
        assert!(compose_aca_channel(&set.g_bs_dris, &set.phi_pt, &short, &set.h_dris_user).is_err());
    }

    #[test]
    fn sensing_path_basics() {
        let cfg = ScenarioConfig::default();
        let prof = DrisProfile::reference().with_grid(8, 8);
        let g = gen_bs_dris_channel(&cfg, &prof).unwrap();
        let phi = sample_reflection(&prof, &mut derive_stream(1, "phi", 0));
        let paths = sensing_paths_with_gains(&cfg, &prof, &g, &phi, 2.5e-9, 0.0).unwrap();
        assert!(paths.dris.iter().all(|z| z.norm() == 0.0));
        assert!((paths.direct.norm_squared() - 2.5e-9 * 16.0).abs() < 1e-20);
        let paths = sensing_paths(&cfg, &prof, &g, &phi).unwrap();
        assert!(paths.dris.norm() > 0.0);
        assert!(paths.l_s_cas < paths.l_s_direct);
    }

    #[test]
    fn sensing_dris_norm_concentrates_with_surface_size() {
        // relative spread of ||h_D||^2 over reflection draws shrinks as N_D grows
        let cfg = ScenarioConfig::default();
        let spread = |n_d: usize| {
            let prof = DrisProfile::reference().with_element_count(n_d);
            let g = gen_bs_dris_channel(&cfg, &prof).unwrap();
            let vals: Vec<f64> = (0..200)
                .map(|i| {
                    let phi = sample_reflection(&prof, &mut derive_stream(3, "phi", i));
                    sensing_paths(&cfg, &prof, &g, &phi).unwrap().dris.norm_squared()
                })
                .collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let v = vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / vals.len() as f64;
            v.sqrt() / m
        };
        assert!(spread(1024) < spread(16));
    }
}
