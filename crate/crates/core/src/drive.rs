//! Quasi-static driving of a resonant level coupled to a semi-infinite chain.
//!
//! Reservoir particle and energy changes are accumulated from the flows
//! during the quasi-static sweep of ε_s: ΔN_R = −Δn_d and
//! ΔE_R = W − Δ(ε_s n_d) − Δ⟨H_SR⟩/2 with work W = ∫ n_d dε_s, where the
//! coupling energy is shared equally between level and reservoir. The
//! equilibrium inputs n_d(ε_s) and ⟨H_SR⟩(ε_s) are taken from a finite
//! reservoir of M sites, doubling M until the changes settle. The
//! free-energy change ΔΩ_R is the ε_s-integral of the spectral rate
//! dΩ_R/dε_s = (1/π) ∫ dε ω(ε) Im[G_R² ∂_ε Σ_R] plus the discrete terms of
//! any bound states.

use crate::error::{Error, Result};
use crate::greens::{surface_g, surface_g_derivative, surface_g_second_derivative};
use crate::quadrature::{gauss_legendre, integrate, EnergyGrid, QuadTol};
use crate::stats::Distribution;
use crate::transport::THERMAL_WINDOW;
use crate::tridiag::{eigen_first_rows, PartialEigen};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveProtocol {
    pub eps_start: f64,
    pub eps_end: f64,
    pub v: f64,
    pub t0: f64,
    pub mu: f64,
    pub temperature: f64,
    /// Gauss–Legendre nodes for the ε_s path integrals.
    pub steps: usize,
}

impl DriveProtocol {
    /// ε_s: 1 → 1.5, V = 1, t0 = 1.25, μ = 0.
    pub fn level_sweep(temperature: f64) -> Self {
        DriveProtocol { eps_start: 1.0, eps_end: 1.5, v: 1.0, t0: 1.25, mu: 0.0, temperature, steps: 16 }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.eps_start, self.eps_end, self.v, self.t0, self.mu, self.temperature];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidModel("drive parameters must be finite".into()));
        }
        if self.t0 == 0.0 {
            return Err(Error::InvalidModel("lead hopping t0 must be nonzero".into()));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::InvalidModel(format!("temperature must be positive, got {}", self.temperature)));
        }
        if self.steps == 0 {
            return Err(Error::InvalidModel("drive path needs at least one quadrature step".into()));
        }
        Ok(())
    }

    pub fn distribution(&self) -> Distribution {
        Distribution::new(self.temperature, self.mu)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DriveOptions {
    pub initial_sites: usize,
    pub max_sites: usize,
    /// Largest change of (ΔE_R, ΔN_R) accepted between M and 2M.
    pub convergence: f64,
    pub quad: QuadTol,
}

impl Default for DriveOptions {
    fn default() -> Self {
        DriveOptions { initial_sites: 2000, max_sites: 16000, convergence: 1e-8, quad: QuadTol::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveResult {
    pub temperature: f64,
    pub mu: f64,
    pub d_e: f64,
    pub d_n: f64,
    pub d_omega: f64,
    /// (ΔE_R − μ ΔN_R − ΔΩ_R)/T.
    pub ds_correct: f64,
    /// (ΔE_R − μ ΔN_R)/T.
    pub ds_conv: f64,
    /// Q − Q_conv = −ΔΩ_R.
    pub q_diff: f64,
    pub reservoir_sites: usize,
    pub omega_error: f64,
}

impl DriveResult {
    fn new(p: &DriveProtocol, d_e: f64, d_n: f64, d_omega: f64, omega_error: f64, sites: usize) -> Self {
        let t = p.temperature;
        let conv = (d_e - p.mu * d_n) / t;
        DriveResult {
            temperature: t,
            mu: p.mu,
            d_e,
            d_n,
            d_omega,
            ds_correct: conv - d_omega / t,
            ds_conv: conv,
            q_diff: -d_omega,
            reservoir_sites: sites,
            omega_error,
        }
    }
}

fn self_energy(e: f64, p: &DriveProtocol) -> (num_complex::Complex64, num_complex::Complex64) {
    let v2 = p.v * p.v;
    (surface_g(e, p.t0) * v2, surface_g_derivative(e, p.t0) * v2)
}

/// Bound states of the level: real roots of ε − ε_s − V² g(ε) outside the
/// lead band.
pub fn bound_state_energies(eps_s: f64, v: f64, t0: f64) -> Vec<f64> {
    if v == 0.0 {
        return Vec::new();
    }
    let w = 2.0 * t0.abs();
    let h = |e: f64| e - eps_s - v * v * surface_g(e, t0).re;
    let mut out = Vec::new();
    // h is increasing outside the band, so each side holds at most one root.
    for side in [1.0, -1.0] {
        let edge = side * w;
        let at_edge = h(edge);
        if at_edge * side >= 0.0 {
            continue;
        }
        let mut far = edge + side * (1.0 + eps_s.abs() + v * v / t0.abs());
        while h(far) * side < 0.0 {
            far = edge + 2.0 * (far - edge);
        }
        let (mut a, mut b) = (edge, far);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if h(m) * side < 0.0 {
                a = m;
            } else {
                b = m;
            }
            if (b - a).abs() <= 1e-15 * m.abs().max(1.0) {
                break;
            }
        }
        out.push(0.5 * (a + b));
    }
    out
}

/// dΩ_R/dε_s at fixed V, returned with its quadrature error estimate.
pub fn omega_flow_rate(eps_s: f64, p: &DriveProtocol, tol: QuadTol) -> Result<(f64, f64)> {
    if p.v == 0.0 {
        return Ok((0.0, 0.0));
    }
    let d = p.distribution();
    let w = 2.0 * p.t0.abs();
    let mut pts = vec![eps_s, p.mu];
    for k in [1.0, 3.0, 10.0, 20.0, THERMAL_WINDOW] {
        pts.push(p.mu - k * p.temperature);
        pts.push(p.mu + k * p.temperature);
    }
    pts.retain(|x| x.abs() < w);
    let grid = EnergyGrid::builder(-w, w).breakpoints(pts).sqrt_edges([-w, w]).tol(tol).build()?;
    let (band, err) = integrate(&grid, |e| {
        let (s, ds) = self_energy(e, p);
        let g = 1.0 / (e - eps_s - s);
        (g * g * ds).im * d.omega(e)
    })?;
    let mut rate = band / std::f64::consts::PI;
    for eb in bound_state_energies(eps_s, p.v, p.t0) {
        let v2 = p.v * p.v;
        let s1 = surface_g_derivative(eb, p.t0).re * v2;
        let s2 = surface_g_second_derivative(eb, p.t0).re * v2;
        let z = 1.0 / (1.0 - s1);
        log::warn!("bound state at {eb:.6} for level {eps_s:.6}; adding its discrete free-energy term");
        rate += d.f(eb) * z * (1.0 - z) - d.omega(eb) * z * z * z * s2;
    }
    Ok((rate, err / std::f64::consts::PI))
}

/// ΔΩ_R = ∫ dΩ_R/dε_s dε_s over the protocol.
pub fn omega_change(p: &DriveProtocol, tol: QuadTol) -> Result<(f64, f64)> {
    p.validate()?;
    if p.eps_start == p.eps_end {
        return Ok((0.0, 0.0));
    }
    let rule = gauss_legendre(p.steps, p.eps_start, p.eps_end)?;
    let (mut total, mut err) = (0.0, 0.0);
    for (&x, &wt) in rule.nodes.iter().zip(&rule.weights) {
        let (r, e) = omega_flow_rate(x, p, tol)?;
        total += wt * r;
        err += wt.abs() * e;
    }
    Ok((total, err))
}

/// Level and first-reservoir-site components of the eigenvectors of the
/// level plus an M-site reservoir.
#[derive(Debug, Clone)]
pub struct FiniteSpectrum {
    pub eps_s: f64,
    pub v: f64,
    pub eigen: PartialEigen,
}

impl FiniteSpectrum {
    pub fn new(eps_s: f64, v: f64, t0: f64, sites: usize) -> Result<Self> {
        let mut diag = vec![0.0; sites + 1];
        diag[0] = eps_s;
        let mut off = vec![t0; sites];
        off[0] = v;
        Ok(FiniteSpectrum { eps_s, v, eigen: eigen_first_rows(&diag, &off, 2)? })
    }

    /// (n_d, ⟨H_SR⟩).
    pub fn level_expectations(&self, d: &Distribution) -> (f64, f64) {
        let (mut n, mut c) = (0.0, 0.0);
        for (k, &e) in self.eigen.values.iter().enumerate() {
            let f = d.f(e);
            let (a, b) = (self.eigen.rows[0][k], self.eigen.rows[1][k]);
            n += f * a * a;
            c += f * a * b;
        }
        (n, 2.0 * self.v * c)
    }
}

struct PathSpectra {
    start: FiniteSpectrum,
    end: FiniteSpectrum,
    nodes: Vec<FiniteSpectrum>,
    weights: Vec<f64>,
}

impl PathSpectra {
    fn new(p: &DriveProtocol, sites: usize) -> Result<Self> {
        let rule = gauss_legendre(p.steps, p.eps_start, p.eps_end)?;
        let nodes = rule.nodes.iter().map(|&x| FiniteSpectrum::new(x, p.v, p.t0, sites)).collect::<Result<_>>()?;
        Ok(PathSpectra {
            start: FiniteSpectrum::new(p.eps_start, p.v, p.t0, sites)?,
            end: FiniteSpectrum::new(p.eps_end, p.v, p.t0, sites)?,
            nodes,
            weights: rule.weights,
        })
    }

    /// (ΔE_R, ΔN_R) at one temperature.
    fn deltas(&self, d: &Distribution) -> (f64, f64) {
        let (n0, c0) = self.start.level_expectations(d);
        let (n1, c1) = self.end.level_expectations(d);
        let work: f64 = self.nodes.iter().zip(&self.weights).map(|(s, w)| w * s.level_expectations(d).0).sum();
        let d_e = work - (self.end.eps_s * n1 - self.start.eps_s * n0) - 0.5 * (c1 - c0);
        (d_e, -(n1 - n0))
    }
}

/// Runs one protocol at several temperatures, sharing the finite-reservoir
/// spectra. Entries of `temperatures` override `p.temperature`.
pub fn run_drive_sweep(p: &DriveProtocol, temperatures: &[f64], opts: &DriveOptions) -> Result<Vec<DriveResult>> {
    p.validate()?;
    let protos: Vec<DriveProtocol> = temperatures.iter().map(|&t| DriveProtocol { temperature: t, ..*p }).collect();
    for q in &protos {
        q.validate()?;
    }
    if p.eps_start == p.eps_end {
        return Ok(protos.iter().map(|q| DriveResult::new(q, 0.0, 0.0, 0.0, 0.0, 0)).collect());
    }
    if opts.initial_sites < 2 || opts.max_sites < opts.initial_sites {
        return Err(Error::InvalidArgument("reservoir sizes must satisfy 2 <= initial <= max".into()));
    }
    let mut sites = opts.initial_sites;
    let eval = |m: usize| -> Result<Vec<(f64, f64)>> {
        let spectra = PathSpectra::new(p, m)?;
        Ok(protos.iter().map(|q| spectra.deltas(&q.distribution())).collect())
    };
    let mut prev = eval(sites)?;
    let mut trace = Vec::new();
    let converged = loop {
        if 2 * sites > opts.max_sites {
            break None;
        }
        sites *= 2;
        let next = eval(sites)?;
        let change = prev.iter().zip(&next).fold(0.0f64, |m, (a, b)| m.max((a.0 - b.0).abs()).max((a.1 - b.1).abs()));
        log::debug!("drive: M = {sites}, change {change:.3e}");
        trace.push((sites, change));
        prev = next;
        if change < opts.convergence {
            break Some(sites);
        }
    };
    let sites = converged.ok_or(Error::ReservoirConvergence { trace })?;
    protos
        .iter()
        .zip(prev)
        .map(|(q, (d_e, d_n))| {
            let (d_omega, err) = omega_change(q, opts.quad)?;
            Ok(DriveResult::new(q, d_e, d_n, d_omega, err, sites))
        })
        .collect()
}

pub fn run_drive(p: &DriveProtocol, opts: &DriveOptions) -> Result<DriveResult> {
    Ok(run_drive_sweep(p, &[p.temperature], opts)?[0])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatDifference {
    pub temperature: f64,
    pub mu: f64,
    /// Q − Q_conv = −ΔΩ_R.
    pub q_diff: f64,
}

/// Heat discrepancy over a (T, μ) grid, μ-major.
pub fn heat_difference_curves(p: &DriveProtocol, temperatures: &[f64], mus: &[f64], tol: QuadTol) -> Result<Vec<HeatDifference>> {
    let mut out = Vec::with_capacity(temperatures.len() * mus.len());
    for &mu in mus {
        for &t in temperatures {
            let q = DriveProtocol { temperature: t, mu, ..*p };
            let (d_omega, _) = omega_change(&q, tol)?;
            out.push(HeatDifference { temperature: t, mu, q_diff: -d_omega });
        }
    }
    Ok(out)
}
