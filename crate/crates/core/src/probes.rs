//! Floating thermoelectric probes: solve I^(0)_P = I^(1)_P = 0 at every
//! probe for its chemical potential and temperature by damped Newton
//! iteration in (μ_P, ln T_P), with a homotopy in the applied bias as
//! fallback.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lattice::{DeviceModel, Role};
use crate::quadrature::{EnergyGrid, QuadTol};
use crate::stats::{fp, Distribution};
use crate::transport::{device_levels, SampledTransmissions, THERMAL_WINDOW};

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeState {
    pub mu: Vec<f64>,
    pub temperature: Vec<f64>,
    /// max over probes and ν of |I^(ν)_P|.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct ProbeOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub homotopy_stages: usize,
    pub quad: QuadTol,
    /// Largest quadrature panel in units of the lowest temperature.
    pub panel_width: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions { tol: 1e-10, max_iter: 50, homotopy_stages: 4, quad: QuadTol::default(), panel_width: 3.0 }
    }
}

#[derive(Debug, Clone)]
pub struct ProbeSolution {
    pub state: ProbeState,
    /// Model with the floating reservoirs set to the solved (μ, T).
    pub model: DeviceModel,
    pub table: SampledTransmissions,
    pub particle: Vec<f64>,
    pub energy: Vec<f64>,
    pub entropy: Vec<f64>,
}

impl ProbeSolution {
    /// Ṡ_P: entropy injected into the device by all probes.
    pub fn entropy_production(&self) -> f64 {
        self.model.floating_indices().iter().map(|&k| self.entropy[k]).sum()
    }
}

fn apply(model: &DeviceModel, floating: &[usize], mu: &[f64], temp: &[f64]) -> DeviceModel {
    let mut m = model.clone();
    for (k, &a) in floating.iter().enumerate() {
        m.reservoirs[a].mu = mu[k];
        m.reservoirs[a].temperature = temp[k];
    }
    m
}

/// Reference (μ, T) scale of the fixed reservoirs: (μ_min, μ_max, T_min, T_max).
fn fixed_scale(model: &DeviceModel) -> (f64, f64, f64, f64) {
    let mut s = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for r in model.reservoirs.iter().filter(|r| r.role == Role::Fixed) {
        s = (s.0.min(r.mu), s.1.max(r.mu), s.2.min(r.temperature), s.3.max(r.temperature));
    }
    s
}

/// Quadrature grid resolving Fermi functions with temperatures in
/// [t_lo, t_hi] and chemical potentials in [mu_lo, mu_hi].
fn probe_grid(model: &DeviceModel, mu_lo: f64, mu_hi: f64, t_lo: f64, t_hi: f64, opts: &ProbeOptions) -> Result<EnergyGrid> {
    let lo = mu_lo - THERMAL_WINDOW * t_hi;
    let hi = mu_hi + THERMAL_WINDOW * t_hi;
    let edges: Vec<f64> = model.band_edges().into_iter().filter(|&e| e > lo && e < hi).collect();
    let levels: Vec<f64> = device_levels(model).into_iter().filter(|&e| e > lo && e < hi).collect();
    EnergyGrid::builder(lo, hi)
        .breakpoints([mu_lo, mu_hi])
        .breakpoints(levels)
        .sqrt_edges(edges)
        .max_width(opts.panel_width * t_lo)
        .tol(opts.quad)
        .build()
}

struct Newton<'a> {
    table: &'a SampledTransmissions,
    dists: Vec<Distribution>,
    floating: &'a [usize],
}

impl Newton<'_> {
    fn set(&mut self, x: &[f64]) {
        let n = self.floating.len();
        for (k, &a) in self.floating.iter().enumerate() {
            self.dists[a] = Distribution::new(x[n + k].exp(), x[k]);
        }
    }

    fn residual(&mut self, x: &[f64]) -> Vec<f64> {
        self.set(x);
        let (i0, i1, _) = self.table.currents(&self.dists);
        let n = self.floating.len();
        let mut r = vec![0.0; 2 * n];
        for (k, &a) in self.floating.iter().enumerate() {
            r[k] = i0[a];
            r[n + k] = i1[a];
        }
        r
    }

    /// Jacobian of the residual with respect to (μ_P, ln T_P).
    fn jacobian(&mut self, x: &[f64]) -> DMatrix<f64> {
        self.set(x);
        let n = self.floating.len();
        let r = self.table.n_res;
        let mut jac = DMatrix::zeros(2 * n, 2 * n);
        let mut dmu = vec![0.0; n];
        let mut dlt = vec![0.0; n];
        for k in 0..self.table.len() {
            let e = self.table.nodes[k];
            let w = self.table.weights[k];
            let t = self.table.block(k);
            for (c, &g) in self.floating.iter().enumerate() {
                let d = self.dists[g];
                let xg = d.x(e);
                let q = fp(xg);
                dmu[c] = q / d.temperature;
                dlt[c] = q * xg;
            }
            for (ra, &a) in self.floating.iter().enumerate() {
                let row = &t[a * r..(a + 1) * r];
                let rowsum: f64 = row.iter().sum();
                for (c, &g) in self.floating.iter().enumerate() {
                    let coef = if g == a { rowsum - row[g] } else { -row[g] };
                    let (jm, jt) = (w * coef * dmu[c], w * coef * dlt[c]);
                    jac[(ra, c)] += jm;
                    jac[(ra, n + c)] += jt;
                    jac[(n + ra, c)] += e * jm;
                    jac[(n + ra, n + c)] += e * jt;
                }
            }
        }
        jac
    }
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Damped Newton from `x0`; returns (x, residual norm, iterations, converged).
fn newton(nw: &mut Newton, x0: Vec<f64>, opts: &ProbeOptions) -> (Vec<f64>, f64, usize, bool) {
    let mut x = x0;
    let mut r = nw.residual(&x);
    let mut it = 0;
    while norm_inf(&r) >= opts.tol && it < opts.max_iter {
        it += 1;
        let jac = nw.jacobian(&x);
        let Some(dx) = jac.lu().solve(&DVector::from_vec(r.iter().map(|v| -v).collect())) else {
            return (x, norm_inf(&r), it, false);
        };
        let mut lambda = 1.0;
        let f0 = sq(&r);
        let mut accepted = false;
        for _ in 0..=30 {
            let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a + lambda * d).collect();
            if trial.iter().all(|v| v.is_finite()) {
                let rt = nw.residual(&trial);
                if rt.iter().all(|v| v.is_finite()) && sq(&rt) < f0 {
                    x = trial;
                    r = rt;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return (x, norm_inf(&r), it, false);
        }
    }
    let res = norm_inf(&r);
    (x, res, it, res < opts.tol)
}

fn trivial_state(model: &DeviceModel, floating: &[usize]) -> ProbeState {
    ProbeState {
        mu: floating.iter().map(|&a| model.reservoirs[a].mu).collect(),
        temperature: floating.iter().map(|&a| model.reservoirs[a].temperature).collect(),
        residual_norm: 0.0,
        iterations: 0,
        converged: true,
    }
}

fn finish(model: &DeviceModel, floating: &[usize], table: SampledTransmissions, state: ProbeState) -> ProbeSolution {
    let solved = apply(model, floating, &state.mu, &state.temperature);
    let (particle, energy, entropy) = table.currents(&solved.distributions());
    ProbeSolution { state, model: solved, table, particle, energy, entropy }
}

/// Solves the floating conditions. The initial guess is `init` if given,
/// otherwise the (μ, T) currently stored on the floating reservoirs (the
/// chain builder stores a linear μ profile and the environment temperature).
pub fn solve_floating(model: &DeviceModel, opts: &ProbeOptions, init: Option<&ProbeState>) -> Result<ProbeSolution> {
    let floating = model.floating_indices();
    let (mu_lo, mu_hi, t_lo, t_hi) = fixed_scale(model);
    if !mu_lo.is_finite() {
        return Err(Error::InvalidModel("floating probes need at least one fixed reservoir".into()));
    }
    let start = match init {
        Some(s) => {
            if s.mu.len() != floating.len() || s.temperature.len() != floating.len() {
                return Err(Error::InvalidArgument("initial probe state has the wrong length".into()));
            }
            s.clone()
        }
        None => trivial_state(model, &floating),
    };
    // Upper estimate of probe heating: T² + 3Δμ²/(4π²) from the Wiedemann–Franz
    // balance of a probe between the two extreme reservoirs.
    let dmu = mu_hi - mu_lo;
    let mut hot = 1.25 * (t_hi * t_hi + 3.0 * dmu * dmu / (4.0 * std::f64::consts::PI.powi(2))).sqrt();
    hot = hot.max(start.temperature.iter().fold(t_hi, |m, &t| m.max(t)) * 1.1);
    let mut cold = start.temperature.iter().fold(t_lo, |m, &t| m.min(t));
    let decoupled = floating.iter().all(|&a| {
        model.reservoirs[a].sites().is_empty() || {
            match &model.reservoirs[a].coupling {
                crate::lattice::Coupling::WideBand { gamma } => gamma.iter().all(|&(_, g)| g == 0.0),
                _ => false,
            }
        }
    });
    for _attempt in 0..4 {
        let grid = probe_grid(model, mu_lo, mu_hi, cold, hot, opts)?;
        let table = SampledTransmissions::build(model, &grid)?;
        if floating.is_empty() || decoupled {
            return Ok(finish(model, &floating, table, trivial_state(&apply(model, &floating, &start.mu, &start.temperature), &floating)));
        }
        let n = floating.len();
        let mut nw = Newton { table: &table, dists: model.distributions(), floating: &floating };
        let x0: Vec<f64> = start.mu.iter().copied().chain(start.temperature.iter().map(|t| t.ln())).collect();
        let (mut x, mut res, mut iters, mut ok) = newton(&mut nw, x0.clone(), opts);
        if !ok {
            // Homotopy in the bias: scale fixed μ deviations about their mean.
            let fixed: Vec<usize> = (0..model.reservoirs.len()).filter(|k| !floating.contains(k)).collect();
            let mean = fixed.iter().map(|&k| model.reservoirs[k].mu).sum::<f64>() / fixed.len() as f64;
            let stages = opts.homotopy_stages.max(1);
            let mut xs = x0.clone();
            xs[..n].fill(mean);
            let mut total_it = iters;
            ok = true;
            for stage in 1..=stages {
                let scale = stage as f64 / stages as f64;
                let mut base = model.distributions();
                for &k in &fixed {
                    base[k].mu = mean + scale * (model.reservoirs[k].mu - mean);
                }
                nw.dists = base;
                let (xn, rn, itn, okn) = newton(&mut nw, xs.clone(), opts);
                total_it += itn;
                xs = xn;
                if !okn {
                    ok = false;
                    res = rn;
                    break;
                }
                res = rn;
            }
            x = xs;
            iters = total_it;
        }
        let temps: Vec<f64> = if iters == 0 { start.temperature.clone() } else { x[n..].iter().map(|v| v.exp()).collect() };
        let state = ProbeState { mu: x[..n].to_vec(), temperature: temps.clone(), residual_norm: res, iterations: iters, converged: ok };
        if temps.iter().any(|&t| !(t > 0.0) || !t.is_finite() || t < f64::MIN_POSITIVE) {
            return Err(Error::ProbeSolve { reason: "probe temperature underflow".into(), best: Box::new(state) });
        }
        if !ok {
            return Err(Error::ProbeSolve { reason: "Newton and bias homotopy exhausted".into(), best: Box::new(state) });
        }
        let t_min = temps.iter().fold(f64::INFINITY, |m, &t| m.min(t));
        let t_max = temps.iter().fold(0.0f64, |m, &t| m.max(t));
        // The rule must resolve the solved distributions; otherwise widen it.
        if t_max <= hot && t_min >= 0.8 * cold {
            return Ok(finish(model, &floating, table, state));
        }
        hot = hot.max(1.25 * t_max);
        cold = cold.min(t_min);
    }
    Err(Error::ProbeSolve { reason: "quadrature rule could not be adapted to the probe temperatures".into(), best: Box::new(start) })
}
