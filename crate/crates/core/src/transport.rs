//! Multi-terminal Landauer–Büttiker observables: transmissions, particle,
//! energy and entropy currents, probe entropy production and the Joule
//! entropy rate. Currents are in units of 1/h and positive when flowing from
//! the reservoir into the device.

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::greens::{assemble_greens, GreensState};
use crate::lattice::DeviceModel;
use crate::quadrature::{adapted_rule, integrate_vec, EnergyGrid, QuadTol};
use crate::stats::Distribution;

/// Half-width of the thermal window in units of kT.
pub const THERMAL_WINDOW: f64 = 40.0;

#[derive(Debug, Clone)]
pub struct TransmissionMatrix {
    pub energy: f64,
    pub n: usize,
    /// Row-major T_αβ, zero on the diagonal.
    pub values: Vec<f64>,
}

impl TransmissionMatrix {
    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.n + b]
    }
}

/// T_αβ = Tr[Γ^α G_R Γ^β G_A] for every reservoir pair (diagonal couplings).
pub fn transmission_matrix(state: &GreensState) -> TransmissionMatrix {
    let r = state.gammas.len();
    let mut values = vec![0.0; r * r];
    fill_transmissions(state, &mut values);
    TransmissionMatrix { energy: state.energy, n: r, values }
}

fn fill_transmissions(state: &GreensState, out: &mut [f64]) {
    let r = state.gammas.len();
    for a in 0..r {
        for b in 0..r {
            if a == b {
                out[a * r + b] = 0.0;
                continue;
            }
            let mut t = 0.0;
            for &(i, gi) in &state.gammas[a] {
                if gi == 0.0 {
                    continue;
                }
                for &(j, gj) in &state.gammas[b] {
                    t += gi * gj * state.g_r[(i, j)].norm_sqr();
                }
            }
            out[a * r + b] = t;
        }
    }
}

pub fn transmission(state: &GreensState, a: usize, b: usize) -> Result<f64> {
    let r = state.gammas.len();
    if a == b || a >= r || b >= r {
        return Err(Error::InvalidArgument(format!("transmission needs two distinct reservoirs, got ({a}, {b}) of {r}")));
    }
    Ok(transmission_matrix(state).get(a, b))
}

/// Integration grid for Fermi-difference integrands: the hull of every lead
/// band and every thermal window μ_α ± 40 T_α, with breakpoints at μ_α,
/// μ_α ± {1, 3, 10, 20, 40} T_α, the lead band edges (square-root panels) and the
/// eigenvalues of the isolated device.
pub fn thermal_grid(model: &DeviceModel, tol: QuadTol) -> Result<EnergyGrid> {
    let dists = model.distributions();
    thermal_grid_for(model, &dists, tol, 1.0)
}

/// Same as [`thermal_grid`] for explicit distributions; `spread` widens the
/// thermal windows (used when probe temperatures are not yet known).
pub fn thermal_grid_for(model: &DeviceModel, dists: &[Distribution], tol: QuadTol, spread: f64) -> Result<EnergyGrid> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut pts = Vec::new();
    for d in dists {
        let w = THERMAL_WINDOW * d.temperature * spread;
        lo = lo.min(d.mu - w);
        hi = hi.max(d.mu + w);
        pts.push(d.mu);
        for k in [1.0, 3.0, 10.0, 20.0, THERMAL_WINDOW] {
            pts.push(d.mu - k * d.temperature);
            pts.push(d.mu + k * d.temperature);
        }
    }
    if let Some((a, b)) = model.lead_band() {
        lo = lo.min(a);
        hi = hi.max(b);
    }
    pts.extend(device_levels(model));
    EnergyGrid::builder(lo, hi).breakpoints(pts).sqrt_edges(model.band_edges()).tol(tol).build()
}

/// Eigenvalues of the isolated device Hamiltonian, used as breakpoint hints.
pub fn device_levels(model: &DeviceModel) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(model.hamiltonian()).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

#[derive(Debug, Clone)]
pub struct ReservoirCurrents {
    /// I^(0)_α.
    pub particle: Vec<f64>,
    /// I^(1)_α.
    pub energy: Vec<f64>,
    /// I^S_α.
    pub entropy: Vec<f64>,
    /// Quadrature error estimate (max norm).
    pub error: f64,
}

impl ReservoirCurrents {
    /// Heat current into the device from α, J_E − μ_α J_N.
    pub fn heat(&self, model: &DeviceModel, a: usize) -> f64 {
        self.energy[a] - model.reservoirs[a].mu * self.particle[a]
    }

    /// Clausius entropy production Σ_α Q_α(into reservoir)/T_α.
    pub fn clausius_production(&self, model: &DeviceModel) -> f64 {
        (0..model.reservoirs.len()).map(|a| -self.heat(model, a) / model.reservoirs[a].temperature).sum()
    }
}

/// Particle, energy and entropy currents of every reservoir from one
/// adaptive integration.
pub fn reservoir_currents(model: &DeviceModel, tol: QuadTol) -> Result<ReservoirCurrents> {
    let grid = thermal_grid(model, tol)?;
    reservoir_currents_on(model, &grid)
}

pub fn reservoir_currents_on(model: &DeviceModel, grid: &EnergyGrid) -> Result<ReservoirCurrents> {
    let r = model.reservoirs.len();
    let dists = model.distributions();
    let mut failure = None;
    let mut f = vec![0.0; r];
    let mut s = vec![0.0; r];
    let res = integrate_vec(grid, 3 * r, |e, out| {
        let st = match assemble_greens(model, e) {
            Ok(st) => st,
            Err(err) => {
                failure.get_or_insert(err);
                return;
            }
        };
        let t = transmission_matrix(&st);
        for k in 0..r {
            f[k] = dists[k].f(e);
            s[k] = dists[k].s(e);
        }
        for a in 0..r {
            let (mut i0, mut is) = (0.0, 0.0);
            for b in 0..r {
                let tab = t.get(a, b);
                i0 += tab * (f[a] - f[b]);
                is += tab * (s[a] - s[b]);
            }
            out[a] = i0;
            out[r + a] = e * i0;
            out[2 * r + a] = is;
        }
    })?;
    if let Some(err) = failure {
        return Err(err);
    }
    let error = res.error.iter().fold(0.0f64, |m, x| m.max(*x));
    Ok(ReservoirCurrents {
        particle: res.value[..r].to_vec(),
        energy: res.value[r..2 * r].to_vec(),
        entropy: res.value[2 * r..].to_vec(),
        error,
    })
}

/// I^(ν)_α = ∫dε ε^ν Σ_β T_αβ (f_α − f_β), ν ∈ {0, 1}.
pub fn reservoir_current(model: &DeviceModel, a: usize, nu: u32, tol: QuadTol) -> Result<f64> {
    if a >= model.reservoirs.len() || nu > 1 {
        return Err(Error::InvalidArgument(format!("no current for reservoir {a}, moment {nu}")));
    }
    let c = reservoir_currents(model, tol)?;
    Ok(if nu == 0 { c.particle[a] } else { c.energy[a] })
}

/// I^S_α = ∫dε Σ_β T_αβ (s_α − s_β): entropy carried into the device from α.
pub fn entropy_current(model: &DeviceModel, a: usize, tol: QuadTol) -> Result<f64> {
    if a >= model.reservoirs.len() {
        return Err(Error::InvalidArgument(format!("no reservoir {a}")));
    }
    Ok(reservoir_currents(model, tol)?.entropy[a])
}

/// Ṡ_P: total entropy injected into the device by the floating probes.
pub fn probe_entropy_production(model: &DeviceModel, currents: &ReservoirCurrents) -> f64 {
    model.floating_indices().iter().map(|&k| currents.entropy[k]).sum()
}

/// Joule entropy rate P/T0 with P = I (μ1 − μ2), where `i1` is the particle
/// current flowing from reservoir 1 into the device.
pub fn joule_entropy_rate(i1: f64, mu1: f64, mu2: f64, t0: f64) -> f64 {
    i1 * (mu1 - mu2) / t0
}

/// Transmission matrices tabulated on a fixed composite quadrature rule,
/// so that currents for any set of reservoir distributions reduce to sums.
#[derive(Debug, Clone)]
pub struct SampledTransmissions {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub n_res: usize,
    /// Node-major R×R blocks.
    pub t: Vec<f64>,
}

impl SampledTransmissions {
    /// Adapts a rule on `grid` to the transmission structure (row sums and
    /// source couplings of T), then tabulates the full matrices.
    pub fn build(model: &DeviceModel, grid: &EnergyGrid) -> Result<Self> {
        let r = model.reservoirs.len();
        let mut failure = None;
        let mut buf = vec![0.0; r * r];
        let rule = adapted_rule(grid, 1 + 2 * r, |e, out| match assemble_greens(model, e) {
            Ok(st) => {
                fill_transmissions(&st, &mut buf);
                out[0] = if r > 1 { buf[1] } else { 0.0 };
                for a in 0..r {
                    out[1 + a] = buf[a * r..(a + 1) * r].iter().sum();
                    out[1 + r + a] = buf[a * r];
                }
            }
            Err(err) => {
                failure.get_or_insert(err);
            }
        })?;
        if let Some(err) = failure {
            return Err(err);
        }
        let mut t = vec![0.0; rule.nodes.len() * r * r];
        for (k, &e) in rule.nodes.iter().enumerate() {
            let st = assemble_greens(model, e)?;
            fill_transmissions(&st, &mut t[k * r * r..(k + 1) * r * r]);
        }
        Ok(SampledTransmissions { nodes: rule.nodes, weights: rule.weights, n_res: r, t })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn block(&self, k: usize) -> &[f64] {
        let r2 = self.n_res * self.n_res;
        &self.t[k * r2..(k + 1) * r2]
    }

    /// (I^(0), I^(1), I^S) for every reservoir.
    pub fn currents(&self, dists: &[Distribution]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let r = self.n_res;
        let mut i0 = vec![0.0; r];
        let mut i1 = vec![0.0; r];
        let mut is = vec![0.0; r];
        let mut f = vec![0.0; r];
        let mut s = vec![0.0; r];
        for k in 0..self.len() {
            let e = self.nodes[k];
            let w = self.weights[k];
            for a in 0..r {
                f[a] = dists[a].f(e);
                s[a] = dists[a].s(e);
            }
            let t = self.block(k);
            for a in 0..r {
                let row = &t[a * r..(a + 1) * r];
                let (mut x0, mut xs) = (0.0, 0.0);
                for b in 0..r {
                    x0 += row[b] * (f[a] - f[b]);
                    xs += row[b] * (s[a] - s[b]);
                }
                i0[a] += w * x0;
                i1[a] += w * e * x0;
                is[a] += w * xs;
            }
        }
        (i0, i1, is)
    }
}
