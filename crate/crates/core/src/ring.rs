//! Bond-resolved currents in the particle, energy, free-energy and entropy
//! channels, from Green's functions of the open device or from eigenstate
//! sums of the isolated ring, plus the conventional entropy current
//! (j_e − μ j_n)/T for comparison.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::greens::assemble_greens;
use crate::lattice::DeviceModel;
use crate::quadrature::{integrate_vec, EnergyGrid, QuadTol};
use crate::stats::{entropy, fermi, fp, Channel, Distribution};
use crate::transport::{device_levels, THERMAL_WINDOW};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct BondCurrentField {
    pub n_sites: usize,
    /// Oriented edges (i, j); currents are positive for flow i → j.
    pub edges: Vec<(usize, usize)>,
    pub j_n: Vec<f64>,
    pub j_e: Vec<f64>,
    pub j_omega: Vec<f64>,
    pub j_s: Vec<f64>,
    pub j_s_conv: Vec<f64>,
    /// Per-site injection from the reservoirs in each channel, indexed by
    /// [`Channel::index`].
    pub injection: [Vec<f64>; 4],
    pub temperature: f64,
    pub mu: f64,
    pub flux: Option<f64>,
    pub cycle: Option<Vec<usize>>,
    pub error: f64,
}

impl BondCurrentField {
    pub fn channel(&self, c: Channel) -> &[f64] {
        match c {
            Channel::Particle => &self.j_n,
            Channel::Energy => &self.j_e,
            Channel::FreeEnergy => &self.j_omega,
            Channel::Entropy => &self.j_s,
        }
    }
}

/// Energy grid for spectral integrands of a device with wide-band
/// broadening: device levels and thermal breakpoints, mapped tails to ±∞.
pub fn spectral_grid(model: &DeviceModel, temperature: f64, mu: f64, tol: QuadTol) -> Result<EnergyGrid> {
    let levels = device_levels(model);
    let mut lo = levels[0].min(mu - THERMAL_WINDOW * temperature);
    let mut hi = levels[levels.len() - 1].max(mu + THERMAL_WINDOW * temperature);
    if let Some((a, b)) = model.lead_band() {
        lo = lo.min(a);
        hi = hi.max(b);
    }
    let width = (hi - lo).max(1e-12);
    let mut pts = levels;
    pts.push(mu);
    for k in [1.0, 3.0, 10.0, 20.0, THERMAL_WINDOW] {
        pts.push(mu - k * temperature);
        pts.push(mu + k * temperature);
    }
    let mut b = EnergyGrid::builder(lo, hi).breakpoints(pts).sqrt_edges(model.band_edges()).tol(tol);
    if model.has_wide_band() {
        b = b.tails(0.5 * width);
    }
    b.build()
}

/// Bond currents of the open device in all channels, with (T, μ) of the
/// first reservoir as the reference for the conventional entropy current.
pub fn bond_currents(model: &DeviceModel, tol: QuadTol) -> Result<BondCurrentField> {
    let r0 = model.reservoirs.first().ok_or_else(|| Error::InvalidModel("bond currents need a reservoir".into()))?;
    let (t_ref, mu_ref) = (r0.temperature, r0.mu);
    let t_min = model.reservoirs.iter().fold(f64::INFINITY, |m, r| m.min(r.temperature));
    let grid = spectral_grid(model, t_min, mu_ref, tol)?;
    let edges: Vec<(usize, usize)> = model.hoppings.iter().map(|h| (h.i, h.j)).collect();
    let h_ji: Vec<Complex64> = model.hoppings.iter().map(|h| h.amplitude.conj()).collect();
    let n = model.n_sites;
    let ne = edges.len();
    let dists = model.distributions();
    let block = ne + n;
    let mut failure = None;
    let res = integrate_vec(&grid, 4 * block, |e, out| {
        let st = match assemble_greens(model, e) {
            Ok(s) => s,
            Err(err) => {
                failure.get_or_insert(err);
                return;
            }
        };
        let g = &st.g_r;
        let gam = st.gamma_total();
        for c in Channel::ALL {
            let w: Vec<f64> = dists.iter().map(|d| d.weight(c, e)).collect();
            let dv = st.weighted_gamma(&w);
            let o = &mut out[c.index() * block..(c.index() + 1) * block];
            for (k, &(i, j)) in edges.iter().enumerate() {
                let mij = weighted_entry(g, &dv, i, j);
                o[k] = 2.0 * (h_ji[k] * mij).im;
            }
            for i in 0..n {
                let mii = weighted_entry(g, &dv, i, i).re;
                let aii = -2.0 * g[(i, i)].im;
                o[ne + i] = dv[i] * aii - gam[i] * mii;
            }
        }
    })?;
    if let Some(err) = failure {
        return Err(err);
    }
    let part = |c: Channel| res.value[c.index() * block..c.index() * block + ne].to_vec();
    let inj = |c: Channel| res.value[c.index() * block + ne..(c.index() + 1) * block].to_vec();
    let j_n = part(Channel::Particle);
    let j_e = part(Channel::Energy);
    let j_s_conv = j_e.iter().zip(&j_n).map(|(e, n)| (e - mu_ref * n) / t_ref).collect();
    Ok(BondCurrentField {
        n_sites: n,
        edges,
        j_n,
        j_e,
        j_omega: part(Channel::FreeEnergy),
        j_s: part(Channel::Entropy),
        j_s_conv,
        injection: [inj(Channel::Particle), inj(Channel::Energy), inj(Channel::FreeEnergy), inj(Channel::Entropy)],
        temperature: t_ref,
        mu: mu_ref,
        flux: model.flux.as_ref().map(|f| f.phi),
        cycle: model.flux.as_ref().map(|f| f.ring_cycle.clone()),
        error: res.error.iter().fold(0.0f64, |m, x| m.max(*x)),
    })
}

/// (G diag(d) G†)_ij.
#[inline]
fn weighted_entry(g: &DMatrix<Complex64>, d: &[f64], i: usize, j: usize) -> Complex64 {
    let mut z = Complex64::new(0.0, 0.0);
    for (k, &dk) in d.iter().enumerate() {
        if dk != 0.0 {
            z += g[(i, k)] * g[(j, k)].conj() * dk;
        }
    }
    z
}

/// Eigenstates of the isolated device and their bond velocities
/// v_ν(i → j) = 2π · 2 Im(H_ji ψ_ν(i) ψ_ν(j)*), in units of 1/h.
#[derive(Debug, Clone)]
pub struct EigenstateSet {
    pub energies: Vec<f64>,
    pub vectors: DMatrix<Complex64>,
    pub edges: Vec<(usize, usize)>,
    /// velocities[ν][edge].
    pub velocities: Vec<Vec<f64>>,
    pub n_sites: usize,
    pub flux: Option<f64>,
    pub cycle: Option<Vec<usize>>,
}

pub fn eigenstates(model: &DeviceModel) -> EigenstateSet {
    let se = SymmetricEigen::new(model.hamiltonian());
    let mut order: Vec<usize> = (0..model.n_sites).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let energies: Vec<f64> = order.iter().map(|&k| se.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(model.n_sites, model.n_sites, |i, nu| se.eigenvectors[(i, order[nu])]);
    let edges: Vec<(usize, usize)> = model.hoppings.iter().map(|h| (h.i, h.j)).collect();
    let velocities = (0..model.n_sites)
        .map(|nu| {
            model.hoppings.iter().map(|h| TWO_PI * 2.0 * (h.amplitude.conj() * vectors[(h.i, nu)] * vectors[(h.j, nu)].conj()).im).collect()
        })
        .collect();
    EigenstateSet {
        energies,
        vectors,
        edges,
        velocities,
        n_sites: model.n_sites,
        flux: model.flux.as_ref().map(|f| f.phi),
        cycle: model.flux.as_ref().map(|f| f.ring_cycle.clone()),
    }
}

impl EigenstateSet {
    /// ω_ν = T ln p(ε_ν).
    pub fn omega(&self, temperature: f64, mu: f64) -> Vec<f64> {
        let d = Distribution::new(temperature, mu);
        self.energies.iter().map(|&e| d.omega(e)).collect()
    }

    fn sum(&self, weight: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.edges.len()];
        for (nu, &e) in self.energies.iter().enumerate() {
            let w = weight(e);
            for (o, v) in out.iter_mut().zip(&self.velocities[nu]) {
                *o += w * v;
            }
        }
        out
    }

    /// j_s = Σ_ν s(ε_ν) v_ν.
    pub fn entropy_current(&self, temperature: f64, mu: f64) -> Vec<f64> {
        self.sum(|e| entropy((e - mu) / temperature))
    }

    /// The same current written as Σ_ν [(ε_ν − μ) f(ε_ν) − ω_ν] v_ν / T.
    pub fn entropy_current_from_free_energy(&self, temperature: f64, mu: f64) -> Vec<f64> {
        let d = Distribution::new(temperature, mu);
        self.sum(|e| ((e - mu) * d.f(e) - d.omega(e)) / temperature)
    }

    /// All channels of the closed-ring equilibrium state.
    pub fn field(&self, temperature: f64, mu: f64) -> BondCurrentField {
        let d = Distribution::new(temperature, mu);
        let j_n = self.sum(|e| d.f(e));
        let j_e = self.sum(|e| e * d.f(e));
        let j_omega = self.sum(|e| d.omega(e));
        let j_s = self.entropy_current(temperature, mu);
        let j_s_conv = self.sum(|e| (e - mu) * d.f(e) / temperature);
        let zeros = vec![0.0; self.n_sites];
        BondCurrentField {
            n_sites: self.n_sites,
            edges: self.edges.clone(),
            j_n,
            j_e,
            j_omega,
            j_s,
            j_s_conv,
            injection: [zeros.clone(), zeros.clone(), zeros.clone(), zeros],
            temperature,
            mu,
            flux: self.flux,
            cycle: self.cycle.clone(),
            error: 0.0,
        }
    }
}

pub fn eigenstate_entropy_current(model: &DeviceModel, temperature: f64, mu: f64) -> Vec<f64> {
    eigenstates(model).entropy_current(temperature, mu)
}

#[derive(Debug, Clone)]
pub struct MuDerivative {
    /// T ∂_μ j_s = Σ_ν x_ν f p v_ν with x = (ε − μ)/T.
    pub analytic: Vec<f64>,
    /// T times the central difference of the eigenstate entropy current.
    pub numeric: Vec<f64>,
    /// T ∂_μ of the conventional current (ε − μ) f v / T.
    pub conventional: Vec<f64>,
    /// Conventional minus corrected: −Σ_ν f(ε_ν) v_ν.
    pub extra: Vec<f64>,
}

pub fn dmu_entropy_current(model: &DeviceModel, temperature: f64, mu: f64, dmu: f64) -> Result<MuDerivative> {
    if !(dmu > 0.0) {
        return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {dmu}")));
    }
    let es = eigenstates(model);
    let analytic = es.sum(|e| {
        let x = (e - mu) / temperature;
        x * fp(x)
    });
    let extra = es.sum(|e| -fermi((e - mu) / temperature));
    let up = es.entropy_current(temperature, mu + dmu);
    let dn = es.entropy_current(temperature, mu - dmu);
    let numeric = up.iter().zip(&dn).map(|(a, b)| temperature * (a - b) / (2.0 * dmu)).collect();
    let conventional = analytic.iter().zip(&extra).map(|(a, x)| a + x).collect();
    Ok(MuDerivative { analytic, numeric, conventional, extra })
}

#[derive(Debug, Clone)]
pub struct DivergenceReport {
    /// Net bond outflow per site, Σ_j J_{i→j}.
    pub divergence: Vec<f64>,
    /// Net injection from the reservoirs per site.
    pub injection: Vec<f64>,
}

impl DivergenceReport {
    pub fn max_divergence(&self) -> f64 {
        self.divergence.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Site balance outflow − injection (vanishes in any steady state).
    pub fn balance(&self) -> Vec<f64> {
        self.divergence.iter().zip(&self.injection).map(|(d, i)| d - i).collect()
    }
}

pub fn divergence_check(field: &BondCurrentField, channel: Channel) -> DivergenceReport {
    let j = field.channel(channel);
    let mut divergence = vec![0.0; field.n_sites];
    for (k, &(a, b)) in field.edges.iter().enumerate() {
        divergence[a] += j[k];
        divergence[b] -= j[k];
    }
    DivergenceReport { divergence, injection: field.injection[channel.index()].clone() }
}

/// Mean current around the flux cycle (oriented along the cycle) and the
/// largest deviation of any bond from that mean.
pub fn total_circulating(field: &BondCurrentField, values: &[f64]) -> Result<(f64, f64)> {
    let cycle = field.cycle.as_ref().ok_or_else(|| Error::InvalidModel("device has no ring cycle".into()))?;
    let mut oriented = Vec::with_capacity(cycle.len());
    for k in 0..cycle.len() {
        let (a, b) = (cycle[k], cycle[(k + 1) % cycle.len()]);
        let idx = field
            .edges
            .iter()
            .position(|&(i, j)| (i, j) == (a, b) || (i, j) == (b, a))
            .ok_or_else(|| Error::InvalidModel(format!("cycle bond ({a}, {b}) is not an edge")))?;
        let sign = if field.edges[idx] == (a, b) { 1.0 } else { -1.0 };
        oriented.push(sign * values[idx]);
    }
    let mean = oriented.iter().sum::<f64>() / oriented.len() as f64;
    let dev = oriented.iter().fold(0.0f64, |m, x| m.max((x - mean).abs()));
    Ok((mean, dev))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_ring;

    const T_HOP: f64 = 2.7;

    fn ring(phi: f64, gamma: f64, t: f64, mu: f64) -> DeviceModel {
        build_ring(6, T_HOP, phi, gamma, t, mu).unwrap()
    }

    #[test]
    fn zero_flux_carries_no_current() {
        let f = bond_currents(&ring(0.0, 0.05 * T_HOP, 0.1 * T_HOP, 0.5 * T_HOP), QuadTol::default()).unwrap();
        for c in Channel::ALL {
            assert!(f.channel(c).iter().all(|x| x.abs() < 1e-12));
        }
        let d = dmu_entropy_current(&ring(0.0, 0.0, 0.1 * T_HOP, 0.5 * T_HOP), 0.1 * T_HOP, 0.5 * T_HOP, 1e-4 * T_HOP).unwrap();
        assert!(d.analytic.iter().chain(&d.extra).all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn six_fold_symmetry_and_continuity() {
        let t = 0.05 * T_HOP;
        let f = bond_currents(&ring(0.05, 0.05 * T_HOP, t, 0.5 * T_HOP), QuadTol::default()).unwrap();
        for c in Channel::ALL {
            let j = f.channel(c);
            for k in 1..6 {
                assert!((j[k] - j[0]).abs() < 1e-10 * j[0].abs().max(1.0));
            }
            let rep = divergence_check(&f, c);
            assert!(rep.max_divergence() < 1e-10);
            assert!(rep.balance().iter().all(|x| x.abs() < 1e-10));
        }
        assert!(f.j_n[0].abs() > 1e-3);
    }

    #[test]
    fn channel_identity_per_bond() {
        for &t in &[1e-3 * T_HOP, 0.1 * T_HOP, 2.0 * T_HOP] {
            let mu = 0.5 * T_HOP;
            let f = bond_currents(&ring(0.05, 0.05 * T_HOP, t, mu), QuadTol::default()).unwrap();
            for k in 0..6 {
                let lhs = t * f.j_s[k];
                let rhs = f.j_e[k] - mu * f.j_n[k] - f.j_omega[k];
                assert!((lhs - rhs).abs() < 1e-8, "T={t}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn eigenstate_forms_agree() {
        let es = eigenstates(&ring(0.05, 0.0, 1.0, 0.0));
        for &t in &[1e-3, 0.05, 0.27, 5.4] {
            let a = es.entropy_current(t, 0.5 * T_HOP);
            let b = es.entropy_current_from_free_energy(t, 0.5 * T_HOP);
            // The free-energy form cancels two O(|ε − μ| / T) terms.
            let scale = es.energies.iter().map(|e| (e - 0.5 * T_HOP).abs()).fold(0.0, f64::max) / t;
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-13 * scale.max(1.0), "T={t}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn eigenstate_particle_current_matches_correlation_matrix() {
        let m = ring(0.05, 0.0, 1.0, 0.0);
        let es = eigenstates(&m);
        let (t, mu) = (0.2, 0.3);
        let f = es.field(t, mu);
        // ρ = Σ f |ν⟩⟨ν| and J = 2π·2 Im(H_ji ρ_ij).
        let d = Distribution::new(t, mu);
        let mut rho = DMatrix::<Complex64>::zeros(6, 6);
        for nu in 0..6 {
            let v = es.vectors.column(nu);
            rho += (v * v.adjoint()) * Complex64::new(d.f(es.energies[nu]), 0.0);
        }
        for (k, h) in m.hoppings.iter().enumerate() {
            let j = TWO_PI * 2.0 * (h.amplitude.conj() * rho[(h.i, h.j)]).im;
            assert!((j - f.j_n[k]).abs() < 1e-12);
        }
        let rep = divergence_check(&f, Channel::FreeEnergy);
        assert!(rep.max_divergence() < 1e-13);
    }

    #[test]
    fn open_ring_approaches_eigenstate_sum() {
        let (t, mu) = (0.1 * T_HOP, 0.5 * T_HOP);
        let exact = eigenstate_entropy_current(&ring(0.05, 0.0, t, mu), t, mu)[0];
        let mut errs = Vec::new();
        for g in [1e-2, 1e-3, 1e-4] {
            let f = bond_currents(&ring(0.05, g * T_HOP, t, mu), QuadTol { rel_tol: 1e-11, abs_tol: 1e-15, max_panels: 50_000 }).unwrap();
            errs.push((f.j_s[0] - exact).abs());
        }
        assert!(errs[1] < 0.2 * errs[0] && errs[2] < 0.2 * errs[1], "{errs:?}");
        assert!(errs[2] < 1e-3 * exact.abs());
    }

    #[test]
    fn mu_derivative() {
        let m = ring(0.05, 0.0, 1.0, 0.0);
        let d = dmu_entropy_current(&m, 0.1 * T_HOP, 0.5 * T_HOP, 1e-4 * T_HOP).unwrap();
        for (a, n) in d.analytic.iter().zip(&d.numeric) {
            assert!((a - n).abs() < 1e-5 * a.abs());
        }
        let cold = dmu_entropy_current(&m, 1e-3 * T_HOP, 0.5 * T_HOP, 1e-6 * T_HOP).unwrap();
        assert!(cold.analytic.iter().all(|x| x.abs() < 1e-100));
        assert!(cold.extra.iter().all(|x| x.abs() > 1e-3));
        assert!(dmu_entropy_current(&m, 0.1, 0.0, 0.0).is_err());
    }

    #[test]
    fn circulating_total() {
        let es = eigenstates(&ring(0.05, 0.0, 1.0, 0.0));
        let f = es.field(0.3, 0.5 * T_HOP);
        let (mean, dev) = total_circulating(&f, &f.j_s).unwrap();
        assert!(dev < 1e-12 * mean.abs().max(1e-300) + 1e-15);
        assert_eq!(mean, f.j_s.iter().sum::<f64>() / 6.0);
    }
}
