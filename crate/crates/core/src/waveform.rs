//! ISAC waveform design.
//!
//! * [`solve_p1`]: closed-form orthogonal Procrustes waveform with
//!   `(1/L) X X* = (P0/N) I`.
//! * [`solve_p2`]: global minimizer of `||A X - B||_F^2` on the sphere
//!   `||X||_F^2 = L P0`, with `A = [sqrt(k) H; sqrt(1-k) I]` and
//!   `B = [sqrt(k) S; sqrt(1-k) X0]`, via the secular equation in the
//!   Lagrange multiplier.
//! * [`oracle_norm_ls`]: projected gradient with random restarts. It touches
//!   only gradients and norms and serves as an independent check of
//!   [`solve_p2`].

use std::f64::consts::FRAC_PI_4;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{cis, complex_gaussian, frob_sq, hermitian_eigen, is_finite, thin_svd, CMatrix, C64};
use crate::scene::RandomStream;

/// Root tolerance on `|g(lambda)| / (L P0)`.
pub const SECULAR_TOL: f64 = 1e-10;
pub const SECULAR_MAX_STEPS: usize = 200;

/// Desired symbols `S` (`K x L`) with per-user amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolMatrix {
    pub entries: CMatrix,
    pub per_user_amplitude: Vec<f64>,
}

impl SymbolMatrix {
    pub fn n_users(&self) -> usize {
        self.entries.nrows()
    }

    pub fn frame_len(&self) -> usize {
        self.entries.ncols()
    }

    /// Same symbols with every amplitude multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> SymbolMatrix {
        SymbolMatrix {
            entries: &self.entries * C64::new(factor, 0.0),
            per_user_amplitude: self.per_user_amplitude.iter().map(|a| a * factor).collect(),
        }
    }
}

/// Optimized transmit matrix (`N x L`) with solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformSolution {
    pub x: CMatrix,
    /// Weighted objective `||A X - B||_F^2`; for P1 the plain MUI power.
    pub objective: f64,
    /// Lagrange multiplier of the norm constraint (0 for P1).
    pub multiplier: f64,
    /// Relative residual of the solution's constraint.
    pub constraint_residual: f64,
    pub iterations: usize,
}

/// I.i.d. uniform QPSK symbols, row `k` scaled by `amplitudes[k]`.
pub fn gen_symbols(
    k_users: usize,
    frame_len: usize,
    amplitudes: &[f64],
    stream: &mut RandomStream,
) -> Result<SymbolMatrix> {
    if amplitudes.len() != k_users {
        return Err(Error::dims(
            "gen_symbols",
            format!("{k_users} amplitudes"),
            amplitudes.len().to_string(),
        ));
    }
    if amplitudes.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
        return Err(Error::invalid("symbol amplitudes must be positive and finite"));
    }
    let mut entries = CMatrix::zeros(k_users, frame_len);
    for k in 0..k_users {
        for l in 0..frame_len {
            let q: u32 = stream.random_range(0..4);
            entries[(k, l)] = amplitudes[k] * cis(FRAC_PI_4 * (2 * q + 1) as f64);
        }
    }
    Ok(SymbolMatrix {
        entries,
        per_user_amplitude: amplitudes.to_vec(),
    })
}

fn check_problem(h_pt: &CMatrix, s: &SymbolMatrix, p0: f64, op: &'static str) -> Result<()> {
    let (k, n) = h_pt.shape();
    if s.n_users() != k {
        return Err(Error::dims(
            op,
            format!("S with {k} rows"),
            format!("{} rows", s.n_users()),
        ));
    }
    if n > s.frame_len() {
        return Err(Error::invalid(format!(
            "{op}: antenna count {n} exceeds frame length {}",
            s.frame_len()
        )));
    }
    if !(p0 > 0.0) || !p0.is_finite() {
        return Err(Error::invalid(format!("{op}: power must be positive, got {p0}")));
    }
    if !is_finite(h_pt) || !is_finite(&s.entries) {
        return Err(Error::Numerical(format!("{op}: non-finite channel or symbols")));
    }
    Ok(())
}

/// `(1/L) X X*` vs `(P0/N) I`, relative Frobenius residual.
pub fn covariance_residual(x: &CMatrix, p0: f64) -> f64 {
    let (n, l) = x.shape();
    let target = p0 / n as f64;
    let cov = x * x.adjoint() / C64::new(l as f64, 0.0);
    let diff = cov - CMatrix::identity(n, n) * C64::new(target, 0.0);
    frob_sq(&diff).sqrt() / (target * (n as f64).sqrt())
}

/// Strict-sensing waveform: `X0 = sqrt(P0 L / N) U I_{NxL} V*` from the SVD
/// `U S V*` of `H* S`.
pub fn solve_p1(h_pt: &CMatrix, s: &SymbolMatrix, p0: f64) -> Result<WaveformSolution> {
    check_problem(h_pt, s, p0, "solve_p1")?;
    let (n, l) = (h_pt.ncols(), s.frame_len());
    let m = h_pt.adjoint() * &s.entries;
    let svd = thin_svd(&m)?;
    // thin V* is N x L since N <= L, so U V* = U I_{NxL} V*_full
    let scale = (p0 * l as f64 / n as f64).sqrt();
    let x = (&svd.u * &svd.v_adjoint) * C64::new(scale, 0.0);
    let objective = frob_sq(&(h_pt * &x - &s.entries));
    Ok(WaveformSolution {
        constraint_residual: covariance_residual(&x, p0),
        x,
        objective,
        multiplier: 0.0,
        iterations: 1,
    })
}

/// Normal-equation pieces `A*A` and `A*B` of the trade-off problem.
fn normal_equations(h: &CMatrix, s: &CMatrix, x0: &CMatrix, kappa: f64) -> (CMatrix, CMatrix) {
    let n = h.ncols();
    let k = C64::new(kappa, 0.0);
    let one_minus = C64::new(1.0 - kappa, 0.0);
    let gram = h.adjoint() * h * k + CMatrix::identity(n, n) * one_minus;
    let rhs = h.adjoint() * s * k + x0 * one_minus;
    (gram, rhs)
}

/// `||A X - B||_F^2 = k ||H X - S||^2 + (1 - k) ||X - X0||^2`.
pub fn tradeoff_objective(h: &CMatrix, s: &CMatrix, x0: &CMatrix, kappa: f64, x: &CMatrix) -> f64 {
    kappa * frob_sq(&(h * x - s)) + (1.0 - kappa) * frob_sq(&(x - x0))
}

fn check_tradeoff(h_pt: &CMatrix, s: &SymbolMatrix, x0: &CMatrix, kappa: f64, p0: f64, op: &'static str) -> Result<()> {
    check_problem(h_pt, s, p0, op)?;
    if !(0.0..=1.0).contains(&kappa) {
        return Err(Error::invalid(format!("{op}: kappa must lie in [0, 1], got {kappa}")));
    }
    if x0.shape() != (h_pt.ncols(), s.frame_len()) {
        return Err(Error::dims(
            op,
            format!("X0 {}x{}", h_pt.ncols(), s.frame_len()),
            format!("{}x{}", x0.nrows(), x0.ncols()),
        ));
    }
    Ok(())
}

/// Pareto trade-off waveform: global minimizer of `||A X - B||_F^2` subject to
/// `||X||_F^2 = L P0`.
///
/// With `A*A = Q diag(w) Q*` and `C = Q* A* B`, the stationary points are
/// `X(lambda) = Q diag(1/(w + lambda)) C`; the global one has
/// `lambda > -w_min` and solves `sum_i ||C_i||^2 / (w_i + lambda)^2 = L P0`.
/// When the rows of `C` along the smallest eigenvalue vanish and the
/// remaining terms cannot reach the target, `lambda = -w_min` and the missing
/// norm is placed along the smallest eigenvector.
pub fn solve_p2(h_pt: &CMatrix, s: &SymbolMatrix, x0: &CMatrix, kappa: f64, p0: f64) -> Result<WaveformSolution> {
    check_tradeoff(h_pt, s, x0, kappa, p0, "solve_p2")?;
    let (n, l) = (h_pt.ncols(), s.frame_len());
    let target = l as f64 * p0;

    let (gram, rhs) = normal_equations(h_pt, &s.entries, x0, kappa);
    let (w, q) = hermitian_eigen(&gram)?;
    let c = q.adjoint() * &rhs;
    let row_mass: Vec<f64> = c.row_iter().map(|r| r.norm_squared()).collect();
    let total_mass: f64 = row_mass.iter().sum();

    let w_min = w[0];
    let w_scale = w[n - 1].abs().max(1.0);
    // shifted eigenvalues d_i = w_i - w_min >= 0
    let d: Vec<f64> = w.iter().map(|&wi| (wi - w_min).max(0.0)).collect();
    let in_min_group: Vec<bool> = d.iter().map(|&di| di <= 1e-12 * w_scale).collect();
    let min_mass: f64 = row_mass
        .iter()
        .zip(&in_min_group)
        .filter(|(_, &g)| g)
        .map(|(m, _)| m)
        .sum();

    let norm_at = |t: f64| -> f64 { d.iter().zip(&row_mass).map(|(di, m)| m / (di + t).powi(2)).sum() };

    let hard_case = min_mass <= 1e-24 * total_mass.max(f64::MIN_POSITIVE);
    if hard_case {
        let rest: f64 = d
            .iter()
            .zip(&row_mass)
            .zip(&in_min_group)
            .filter(|(_, &g)| !g)
            .map(|((di, m), _)| m / di.powi(2))
            .sum();
        if rest <= target {
            let mut y = CMatrix::zeros(n, l);
            for i in 0..n {
                if !in_min_group[i] {
                    let scaled = c.row(i) / C64::new(d[i], 0.0);
                    y.set_row(i, &scaled);
                }
            }
            // deficit goes on the first minimal eigenvector, first column
            y[(0, 0)] += C64::new((target - rest).max(0.0).sqrt(), 0.0);
            let x = &q * y;
            return Ok(finish_p2(h_pt, s, x0, kappa, x, -w_min, target, 0));
        }
    }

    // bracket in t = lambda + w_min: ||X||^2 >= min_mass / t^2 and <= total / t^2
    let mut lo = (min_mass / target).sqrt();
    // widened so rounding cannot push the root past it when all w_i coincide
    let mut hi = (total_mass / target).sqrt() * (1.0 + 1e-9);
    if hard_case || !(lo > 0.0) {
        lo = hi * 1e-300_f64.max(f64::MIN_POSITIVE);
        while norm_at(lo) < target {
            // cannot happen outside the hard case; guard against rounding
            lo *= 0.5;
            if lo == 0.0 {
                return Err(Error::Numerical("secular equation lost its bracket".into()));
            }
        }
    }
    if !(norm_at(hi) <= target) {
        return Err(Error::Numerical("secular equation upper bracket invalid".into()));
    }

    let mut t = 0.5 * (lo + hi);
    let mut steps = 0;
    loop {
        steps += 1;
        let s2 = norm_at(t);
        let g = s2 - target;
        if g.abs() <= SECULAR_TOL * target {
            break;
        }
        if g > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        if steps >= SECULAR_MAX_STEPS {
            return Err(Error::Numerical(format!(
                "secular equation not solved in {SECULAR_MAX_STEPS} steps (residual {:.3e})",
                g / target
            )));
        }
        // Newton on 1/||X(t)|| - 1/sqrt(target), nearly linear in t
        let ds2: f64 = -2.0 * d.iter().zip(&row_mass).map(|(di, m)| m / (di + t).powi(3)).sum::<f64>();
        let phi = 1.0 / s2.sqrt() - 1.0 / target.sqrt();
        let dphi = -0.5 * s2.powf(-1.5) * ds2;
        let newton = t - phi / dphi;
        t = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }

    let mut y = CMatrix::zeros(n, l);
    for (i, di) in d.iter().enumerate() {
        let scaled = c.row(i) / C64::new(di + t, 0.0);
        y.set_row(i, &scaled);
    }
    let x = &q * y;
    Ok(finish_p2(h_pt, s, x0, kappa, x, t - w_min, target, steps))
}

#[allow(clippy::too_many_arguments)]
fn finish_p2(
    h: &CMatrix,
    s: &SymbolMatrix,
    x0: &CMatrix,
    kappa: f64,
    x: CMatrix,
    multiplier: f64,
    target: f64,
    iterations: usize,
) -> WaveformSolution {
    WaveformSolution {
        objective: tradeoff_objective(h, &s.entries, x0, kappa, &x),
        constraint_residual: (frob_sq(&x) - target).abs() / target,
        x,
        multiplier,
        iterations,
    }
}

/// Settings of the projected-gradient oracle.
#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    pub restarts: usize,
    pub max_iterations: usize,
    /// Stop when the tangential gradient norm falls below `tol` times the
    /// gradient scale `||A*A|| ||X|| + ||A*B||`.
    pub tol: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            restarts: 6,
            max_iterations: 200_000,
            tol: 1e-12,
        }
    }
}

/// Projected gradient descent on `||A X - B||_F^2` over the sphere
/// `||X||_F^2 = L P0`, restarted from X0 and from random points, keeping the
/// best stationary point.
///
/// The step is `1/(2 ||A*A||_F)`, below the inverse gradient-Lipschitz
/// constant, so every restart is monotone non-increasing in the objective.
pub fn oracle_norm_ls(
    h_pt: &CMatrix,
    s: &SymbolMatrix,
    x0: &CMatrix,
    kappa: f64,
    p0: f64,
    opts: OracleOptions,
    stream: &mut RandomStream,
) -> Result<WaveformSolution> {
    check_tradeoff(h_pt, s, x0, kappa, p0, "oracle_norm_ls")?;
    let (n, l) = (h_pt.ncols(), s.frame_len());
    let target = l as f64 * p0;
    let radius = target.sqrt();
    let (gram, rhs) = normal_equations(h_pt, &s.entries, x0, kappa);
    let lip = frob_sq(&gram).sqrt();
    let step = 0.5 / lip.max(f64::MIN_POSITIVE);
    let grad_scale = lip * radius + frob_sq(&rhs).sqrt();

    let project = |y: CMatrix| -> CMatrix {
        let nrm = frob_sq(&y).sqrt();
        if nrm > 0.0 {
            y * C64::new(radius / nrm, 0.0)
        } else {
            let mut e = CMatrix::zeros(n, l);
            e[(0, 0)] = C64::new(radius, 0.0);
            e
        }
    };
    let objective = |x: &CMatrix| tradeoff_objective(h_pt, &s.entries, x0, kappa, x);

    let mut best: Option<(WaveformSolution, bool)> = None;
    let mut total_iters = 0;
    for restart in 0..opts.restarts.max(1) {
        let start = if restart == 0 {
            project(x0.clone())
        } else {
            project(complex_gaussian(n, l, stream))
        };
        let mut x = start;
        let mut converged = false;
        let mut iters = 0;
        let mut lambda = 0.0;
        while iters < opts.max_iterations {
            iters += 1;
            // half-gradient A*A X - A*B
            let grad = &gram * &x - &rhs;
            let radial = grad.iter().zip(x.iter()).map(|(g, xi)| (xi.conj() * g).re).sum::<f64>() / target;
            lambda = -radial;
            let tangential = &grad - &x * C64::new(radial, 0.0);
            if frob_sq(&tangential).sqrt() <= opts.tol * grad_scale {
                converged = true;
                break;
            }
            x = project(&x - grad * C64::new(2.0 * step, 0.0));
        }
        total_iters += iters;
        let obj = objective(&x);
        let sol = WaveformSolution {
            constraint_residual: (frob_sq(&x) - target).abs() / target,
            x,
            objective: obj,
            multiplier: lambda,
            iterations: iters,
        };
        let better = match &best {
            None => true,
            Some((b, _)) => obj < b.objective,
        };
        if better {
            best = Some((sol, converged));
        }
    }
    let (mut sol, converged) = best.expect("at least one restart");
    sol.iterations = total_iters;
    if converged {
        Ok(sol)
    } else {
        Err(Error::NotConverged {
            iterations: total_iters,
            objective: sol.objective,
            best: Box::new(sol),
        })
    }
}

/// Objective trace of a single projected-gradient run from `start`, for
/// checking the descent property.
pub fn oracle_trace(
    h_pt: &CMatrix,
    s: &SymbolMatrix,
    x0: &CMatrix,
    kappa: f64,
    p0: f64,
    start: &CMatrix,
    iterations: usize,
) -> Result<Vec<f64>> {
    check_tradeoff(h_pt, s, x0, kappa, p0, "oracle_trace")?;
    let radius = (s.frame_len() as f64 * p0).sqrt();
    let (gram, rhs) = normal_equations(h_pt, &s.entries, x0, kappa);
    let step = 0.5 / frob_sq(&gram).sqrt();
    let mut x = start * C64::new(radius / frob_sq(start).sqrt(), 0.0);
    let mut trace = vec![tradeoff_objective(h_pt, &s.entries, x0, kappa, &x)];
    for _ in 0..iterations {
        let grad = &gram * &x - &rhs;
        let y = &x - grad * C64::new(2.0 * step, 0.0);
        x = &y * C64::new(radius / frob_sq(&y).sqrt(), 0.0);
        trace.push(tradeoff_objective(h_pt, &s.entries, x0, kappa, &x));
    }
    Ok(trace)
}
