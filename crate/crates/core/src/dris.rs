//! DISCO RIS codebook, random reflection sampling and the ACA variance scalar.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{cis, CVector, C64};
use crate::scene::RandomStream;

/// Discrete phase/amplitude codebook of a DISCO RIS and its element grid.
///
/// Entry `i` of `amplitudes` is the amplitude paired with phase `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DrisProfile {
    pub n_h: usize,
    pub n_v: usize,
    pub bits: u32,
    pub phases: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub probs: Vec<f64>,
}

impl DrisProfile {
    pub fn new(
        n_h: usize,
        n_v: usize,
        bits: u32,
        phases: Vec<f64>,
        amplitudes: Vec<f64>,
        probs: Vec<f64>,
    ) -> Result<Self> {
        let p = Self {
            n_h,
            n_v,
            bits,
            phases,
            amplitudes,
            probs,
        };
        p.validate()?;
        Ok(p)
    }

    /// One-bit 32x32 surface with phases {pi/9, 7pi/6}, amplitudes {0.8, 1}
    /// drawn with equal probability.
    pub fn reference() -> Self {
        Self {
            n_h: 32,
            n_v: 32,
            bits: 1,
            phases: vec![PI / 9.0, 7.0 * PI / 6.0],
            amplitudes: vec![0.8, 1.0],
            probs: vec![0.5, 0.5],
        }
    }

    pub fn n_d(&self) -> usize {
        self.n_h * self.n_v
    }

    pub fn codebook_size(&self) -> usize {
        1usize << self.bits
    }

    pub fn validate(&self) -> Result<()> {
        if self.bits > 16 {
            return Err(Error::config("dris.bits", "must be <= 16"));
        }
        let m = self.codebook_size();
        for (key, len) in [
            ("dris.phases", self.phases.len()),
            ("dris.amplitudes", self.amplitudes.len()),
            ("dris.probs", self.probs.len()),
        ] {
            if len != m {
                return Err(Error::config(key, format!("expected 2^bits = {m} entries, got {len}")));
            }
        }
        if self.phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::config("dris.phases", "must be finite"));
        }
        if self.amplitudes.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
            return Err(Error::config("dris.amplitudes", "each amplitude must lie in (0, 1]"));
        }
        if self.probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::config("dris.probs", "probabilities must be finite and >= 0"));
        }
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::config("dris.probs", format!("must sum to 1, got {total}")));
        }
        Ok(())
    }

    /// Complex coefficient `mu_i * exp(j phi_i)` of codebook entry `i`.
    pub fn coefficient(&self, i: usize) -> C64 {
        self.amplitudes[i] * cis(self.phases[i])
    }

    /// Same profile on an `n_h x n_v` grid.
    pub fn with_grid(&self, n_h: usize, n_v: usize) -> Self {
        Self {
            n_h,
            n_v,
            ..self.clone()
        }
    }

    /// Same profile with `n_d` elements on the most square grid available
    /// (`n_h` the largest divisor of `n_d` not above its square root).
    pub fn with_element_count(&self, n_d: usize) -> Self {
        if n_d == 0 {
            return self.with_grid(0, 0);
        }
        let mut n_h = (n_d as f64).sqrt().floor() as usize;
        while n_h > 1 && !n_d.is_multiple_of(n_h) {
            n_h -= 1;
        }
        let n_h = n_h.max(1);
        self.with_grid(n_h, n_d / n_h)
    }

    /// `E[c]` for one codebook draw.
    pub fn mean_coefficient(&self) -> C64 {
        (0..self.codebook_size())
            .map(|i| self.probs[i] * self.coefficient(i))
            .sum()
    }

    /// `E[|c|^2]` for one codebook draw.
    pub fn mean_power(&self) -> f64 {
        self.probs.iter().zip(&self.amplitudes).map(|(p, a)| p * a * a).sum()
    }
}

/// One realization of the time-varying reflection vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionVector {
    pub coefficients: CVector,
    /// Codebook index drawn by each element; empty for derived vectors.
    pub indices: Vec<usize>,
}

impl ReflectionVector {
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }
}

/// Every element independently draws codebook entry `i` with probability `p_i`.
pub fn sample_reflection(profile: &DrisProfile, stream: &mut RandomStream) -> ReflectionVector {
    let mut cum = Vec::with_capacity(profile.probs.len());
    let mut acc = 0.0;
    for p in &profile.probs {
        acc += p;
        cum.push(acc);
    }
    let last = cum.len() - 1;
    let indices: Vec<usize> = (0..profile.n_d())
        .map(|_| {
            let u: f64 = stream.random::<f64>() * acc;
            cum.iter().position(|&c| u < c).unwrap_or(last)
        })
        .collect();
    let coefficients = CVector::from_iterator(indices.len(), indices.iter().map(|&i| profile.coefficient(i)));
    ReflectionVector { coefficients, indices }
}

/// `sum_{i1,i2} p_i1 p_i2 (mu_i1^2 + mu_i2^2 - 2 mu_i1 mu_i2 cos(phi_i1 - phi_i2))`,
/// i.e. `E|c - c'|^2` for two independent codebook draws.
pub fn mean_mu_bar(profile: &DrisProfile) -> f64 {
    let m = profile.codebook_size();
    let mut total = 0.0;
    for i1 in 0..m {
        for i2 in 0..m {
            let (a1, a2) = (profile.amplitudes[i1], profile.amplitudes[i2]);
            let term = a1 * a1 + a2 * a2 - 2.0 * a1 * a2 * (profile.phases[i1] - profile.phases[i2]).cos();
            total += profile.probs[i1] * profile.probs[i2] * term;
        }
    }
    total.max(0.0)
}

/// Elementwise `phi_dt - phi_pt`.
pub fn aca_reflection_delta(phi_pt: &ReflectionVector, phi_dt: &ReflectionVector) -> Result<ReflectionVector> {
    if phi_pt.len() != phi_dt.len() {
        return Err(Error::dims(
            "aca_reflection_delta",
            format!("length {}", phi_pt.len()),
            format!("length {}", phi_dt.len()),
        ));
    }
    Ok(ReflectionVector {
        coefficients: &phi_dt.coefficients - &phi_pt.coefficients,
        indices: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::derive_stream;

    fn singleton() -> DrisProfile {
        DrisProfile::new(4, 4, 0, vec![0.0], vec![1.0], vec![1.0]).unwrap()
    }

    #[test]
    fn default_codebook_mu_bar() {
        let mu = mean_mu_bar(&DrisProfile::reference());
        assert!((mu - 1.6078).abs() < 5e-4, "{mu}");
    }

    #[test]
    fn mu_bar_enumerated_cases() {
        assert_eq!(mean_mu_bar(&singleton()), 0.0);
        let anti = DrisProfile::new(1, 1, 1, vec![0.0, PI], vec![1.0, 1.0], vec![0.5, 0.5]).unwrap();
        // pairs (0,0),(pi,pi) contribute 0, (0,pi),(pi,0) contribute 4 each with weight 1/4
        assert!((mean_mu_bar(&anti) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn mu_bar_matches_moment_identity() {
        // E|c - c'|^2 = 2 (E|c|^2 - |E c|^2)
        let p = DrisProfile::reference();
        let alt = 2.0 * (p.mean_power() - p.mean_coefficient().norm_sqr());
        assert!((mean_mu_bar(&p) - alt).abs() < 1e-12);
    }

    #[test]
    fn singleton_codebook_samples_are_exact() {
        let v = sample_reflection(&singleton(), &mut derive_stream(1, "dris", 0));
        assert_eq!(v.len(), 16);
        assert!(v.coefficients.iter().all(|&c| c == C64::new(1.0, 0.0)));
    }

    #[test]
    fn samples_are_deterministic_and_codebook_valued() {
        let p = DrisProfile::reference();
        let a = sample_reflection(&p, &mut derive_stream(2, "dris", 0));
        let b = sample_reflection(&p, &mut derive_stream(2, "dris", 0));
        assert_eq!(a, b);
        for (c, &i) in a.coefficients.iter().zip(&a.indices) {
            assert!((c.norm() - p.amplitudes[i]).abs() < 1e-15);
            assert!((c - p.coefficient(i)).norm() < 1e-15);
        }
    }

    #[test]
    fn index_frequencies_concentrate() {
        let p = DrisProfile::reference().with_grid(100_000, 1);
        let v = sample_reflection(&p, &mut derive_stream(3, "dris", 0));
        let ones = v.indices.iter().filter(|&&i| i == 1).count() as f64 / 1e5;
        assert!((0.49..=0.51).contains(&ones), "{ones}");
    }

    #[test]
    fn delta_cases() {
        let p = DrisProfile::reference().with_grid(2, 1);
        let a = sample_reflection(&p, &mut derive_stream(4, "dris", 0));
        let z = aca_reflection_delta(&a, &a).unwrap();
        assert!(z.coefficients.iter().all(|c| c.norm() == 0.0));

        let pt = ReflectionVector {
            coefficients: CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]),
            indices: vec![],
        };
        let dt = ReflectionVector {
            coefficients: CVector::from_vec(vec![C64::new(1.0, 0.0), cis(PI)]),
            indices: vec![],
        };
        let d = aca_reflection_delta(&pt, &dt).unwrap();
        assert!((d.coefficients[0]).norm() < 1e-15);
        assert!((d.coefficients[1] - C64::new(-2.0, 0.0)).norm() < 1e-15);

        let short = sample_reflection(&p.with_grid(1, 1), &mut derive_stream(4, "dris", 1));
        assert!(aca_reflection_delta(&a, &short).is_err());
    }

    #[test]
    fn delta_modulus_bounded_by_two() {
        let p = DrisProfile::reference().with_grid(10_000, 1);
        let a = sample_reflection(&p, &mut derive_stream(5, "dris", 0));
        let b = sample_reflection(&p, &mut derive_stream(5, "dris", 1));
        let d = aca_reflection_delta(&a, &b).unwrap();
        assert!(d.coefficients.iter().all(|c| c.norm() <= 2.0 + 1e-12));
    }

    #[test]
    fn profile_validation() {
        let p = DrisProfile::reference();
        assert!(DrisProfile::new(2, 2, 1, p.phases.clone(), p.amplitudes.clone(), vec![0.6, 0.6]).is_err());
        assert!(DrisProfile::new(2, 2, 1, p.phases.clone(), vec![0.0, 1.0], p.probs.clone()).is_err());
        assert!(DrisProfile::new(2, 2, 2, p.phases.clone(), p.amplitudes.clone(), p.probs.clone()).is_err());
    }

    #[test]
    fn element_count_grids() {
        let p = DrisProfile::reference();
        for (n, h, v) in [
            (16, 4, 4),
            (1024, 32, 32),
            (4096, 64, 64),
            (32, 4, 8),
            (7, 1, 7),
            (0, 0, 0),
        ] {
            let g = p.with_element_count(n);
            assert_eq!((g.n_h, g.n_v), (h, v));
        }
    }
}
