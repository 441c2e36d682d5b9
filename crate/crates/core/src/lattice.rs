//! Device geometries as site graphs with complex hoppings and reservoir
//! attachments: the driven resonant level, the flux-threaded ring and the
//! chain decorated with floating probes.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::stats::Distribution;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hopping {
    pub i: usize,
    pub j: usize,
    /// Matrix element H_ij; H_ji is its conjugate.
    pub amplitude: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Coupling {
    /// Semi-infinite tight-binding lead with hopping `t0_lead` and on-site
    /// energy `eps0_lead`, attached to `contact_site` with amplitude `contact`.
    SemiInfiniteChain { t0_lead: f64, eps0_lead: f64, contact_site: usize, contact: f64 },
    /// Energy-independent broadening, diagonal entries (site, Γ_ii).
    WideBand { gamma: Vec<(usize, f64)> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Fixed,
    /// Floating probe: (μ, T) are unknowns fixed by zero particle and energy
    /// current.
    Floating,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirAttachment {
    pub label: String,
    pub coupling: Coupling,
    pub temperature: f64,
    pub mu: f64,
    pub role: Role,
}

impl ReservoirAttachment {
    pub fn distribution(&self) -> Distribution {
        Distribution::new(self.temperature, self.mu)
    }

    /// Sites whose self-energy this reservoir touches.
    pub fn sites(&self) -> Vec<usize> {
        match &self.coupling {
            Coupling::SemiInfiniteChain { contact_site, .. } => vec![*contact_site],
            Coupling::WideBand { gamma } => gamma.iter().map(|&(s, _)| s).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluxSpec {
    /// Flux in units of φ0.
    pub phi: f64,
    pub ring_cycle: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceModel {
    pub n_sites: usize,
    pub onsite: Vec<f64>,
    pub hoppings: Vec<Hopping>,
    pub reservoirs: Vec<ReservoirAttachment>,
    pub flux: Option<FluxSpec>,
}

impl DeviceModel {
    pub fn new(onsite: Vec<f64>, hoppings: Vec<Hopping>, reservoirs: Vec<ReservoirAttachment>, flux: Option<FluxSpec>) -> Result<Self> {
        let m = DeviceModel { n_sites: onsite.len(), onsite, hoppings, reservoirs, flux };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_sites;
        if n == 0 {
            return Err(Error::InvalidModel("device has no sites".into()));
        }
        if self.onsite.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidModel("non-finite on-site energy".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for h in &self.hoppings {
            if h.i >= n || h.j >= n {
                return Err(Error::InvalidModel(format!("edge ({}, {}) out of range for {n} sites", h.i, h.j)));
            }
            if h.i == h.j {
                return Err(Error::InvalidModel(format!("self-loop edge at site {}", h.i)));
            }
            if !seen.insert((h.i.min(h.j), h.i.max(h.j))) {
                return Err(Error::InvalidModel(format!("duplicate edge ({}, {})", h.i, h.j)));
            }
        }
        for r in &self.reservoirs {
            if !(r.temperature > 0.0 && r.temperature.is_finite()) {
                return Err(Error::InvalidModel(format!("reservoir `{}` has non-positive temperature", r.label)));
            }
            if !r.mu.is_finite() {
                return Err(Error::InvalidModel(format!("reservoir `{}` has non-finite chemical potential", r.label)));
            }
            match &r.coupling {
                Coupling::SemiInfiniteChain { t0_lead, contact_site, .. } => {
                    if *t0_lead == 0.0 {
                        return Err(Error::InvalidModel(format!("reservoir `{}` has zero lead hopping", r.label)));
                    }
                    if *contact_site >= n {
                        return Err(Error::InvalidModel(format!("reservoir `{}` contact out of range", r.label)));
                    }
                }
                Coupling::WideBand { gamma } => {
                    for &(s, g) in gamma {
                        if s >= n {
                            return Err(Error::InvalidModel(format!("reservoir `{}` site {s} out of range", r.label)));
                        }
                        if !(g >= 0.0) {
                            return Err(Error::InvalidModel(format!("reservoir `{}` has negative Γ", r.label)));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Dense single-particle Hamiltonian of the isolated device.
    pub fn hamiltonian(&self) -> DMatrix<Complex64> {
        let n = self.n_sites;
        let mut h = DMatrix::zeros(n, n);
        for (i, &e) in self.onsite.iter().enumerate() {
            h[(i, i)] = Complex64::new(e, 0.0);
        }
        for hop in &self.hoppings {
            h[(hop.i, hop.j)] += hop.amplitude;
            h[(hop.j, hop.i)] += hop.amplitude.conj();
        }
        h
    }

    pub fn hamiltonian_element(&self, i: usize, j: usize) -> Complex64 {
        if i == j {
            return Complex64::new(self.onsite[i], 0.0);
        }
        self.hoppings
            .iter()
            .find_map(|h| {
                if h.i == i && h.j == j {
                    Some(h.amplitude)
                } else if h.i == j && h.j == i {
                    Some(h.amplitude.conj())
                } else {
                    None
                }
            })
            .unwrap_or_default()
    }

    pub fn is_time_reversal_symmetric(&self) -> bool {
        self.hoppings.iter().all(|h| h.amplitude.im == 0.0)
    }

    pub fn floating_indices(&self) -> Vec<usize> {
        (0..self.reservoirs.len()).filter(|&k| self.reservoirs[k].role == Role::Floating).collect()
    }

    pub fn distributions(&self) -> Vec<Distribution> {
        self.reservoirs.iter().map(|r| r.distribution()).collect()
    }

    /// Energy range of all semi-infinite lead bands, if any.
    pub fn lead_band(&self) -> Option<(f64, f64)> {
        let mut band: Option<(f64, f64)> = None;
        for r in &self.reservoirs {
            if let Coupling::SemiInfiniteChain { t0_lead, eps0_lead, .. } = r.coupling {
                let lo = eps0_lead - 2.0 * t0_lead.abs();
                let hi = eps0_lead + 2.0 * t0_lead.abs();
                band = Some(band.map_or((lo, hi), |(a, b)| (a.min(lo), b.max(hi))));
            }
        }
        band
    }

    /// Band edges of every semi-infinite lead, where the spectral functions
    /// have square-root singularities.
    pub fn band_edges(&self) -> Vec<f64> {
        let mut edges = Vec::new();
        for r in &self.reservoirs {
            if let Coupling::SemiInfiniteChain { t0_lead, eps0_lead, .. } = r.coupling {
                edges.push(eps0_lead - 2.0 * t0_lead.abs());
                edges.push(eps0_lead + 2.0 * t0_lead.abs());
            }
        }
        edges.sort_by(f64::total_cmp);
        edges.dedup();
        edges
    }

    pub fn has_wide_band(&self) -> bool {
        self.reservoirs.iter().any(|r| matches!(&r.coupling, Coupling::WideBand { gamma } if gamma.iter().any(|&(_, g)| g > 0.0)))
    }

    /// Product of the bond phases around the flux cycle.
    pub fn loop_phase(&self) -> Option<Complex64> {
        let flux = self.flux.as_ref()?;
        let c = &flux.ring_cycle;
        let mut z = Complex64::new(1.0, 0.0);
        for k in 0..c.len() {
            let h = self.hamiltonian_element(c[k], c[(k + 1) % c.len()]);
            z *= h / h.norm();
        }
        Some(z)
    }

    pub fn with_reservoir_state(&self, k: usize, temperature: f64, mu: f64) -> DeviceModel {
        let mut m = self.clone();
        m.reservoirs[k].temperature = temperature;
        m.reservoirs[k].mu = mu;
        m
    }
}

/// Single level `eps_s` coupled with amplitude `v` to the end of a
/// semi-infinite chain with hopping `t0` and on-site energy 0.
pub fn build_rlm(eps_s: f64, v: f64, t0: f64, temperature: f64, mu: f64) -> Result<DeviceModel> {
    if t0 == 0.0 {
        return Err(Error::InvalidModel("lead hopping t0 must be nonzero".into()));
    }
    DeviceModel::new(
        vec![eps_s],
        vec![],
        vec![ReservoirAttachment {
            label: "R".into(),
            coupling: Coupling::SemiInfiniteChain { t0_lead: t0, eps0_lead: 0.0, contact_site: 0, contact: v },
            temperature,
            mu,
            role: Role::Fixed,
        }],
        None,
    )
}

/// `n`-site ring threaded by flux `phi` (units of φ0), uniform Peierls
/// phases, with a wide-band surface reservoir of strength `surface_gamma`
/// on every site.
pub fn build_ring(n: usize, t_hop: f64, phi: f64, surface_gamma: f64, temperature: f64, mu: f64) -> Result<DeviceModel> {
    if n < 3 {
        return Err(Error::InvalidModel(format!("ring needs at least 3 sites, got {n}")));
    }
    let phases = vec![2.0 * std::f64::consts::PI * phi / n as f64; n];
    build_ring_with_phases(t_hop, &phases, phi, surface_gamma, temperature, mu)
}

/// Ring with an explicit phase per bond (i → i+1); used to check that only
/// the loop sum of the phases matters.
pub fn build_ring_with_phases(t_hop: f64, phases: &[f64], phi: f64, surface_gamma: f64, temperature: f64, mu: f64) -> Result<DeviceModel> {
    let n = phases.len();
    if n < 3 {
        return Err(Error::InvalidModel(format!("ring needs at least 3 sites, got {n}")));
    }
    let hoppings = (0..n).map(|i| Hopping { i, j: (i + 1) % n, amplitude: Complex64::from_polar(t_hop, phases[i]) }).collect();
    let mut reservoirs = Vec::new();
    if surface_gamma > 0.0 {
        reservoirs.push(ReservoirAttachment {
            label: "surface".into(),
            coupling: Coupling::WideBand { gamma: (0..n).map(|s| (s, surface_gamma)).collect() },
            temperature,
            mu,
            role: Role::Fixed,
        });
    } else if surface_gamma < 0.0 {
        return Err(Error::InvalidModel("surface_gamma must be nonnegative".into()));
    }
    DeviceModel::new(vec![0.0; n], hoppings, reservoirs, Some(FluxSpec { phi, ring_cycle: (0..n).collect() }))
}

/// `n`-site chain between source `a` (site 0) and drain `b` (site n−1) leads
/// of hopping `t0`, with one floating wide-band probe of strength `gamma_p`
/// on every site. Reservoir order: a, b, P_1, …, P_n.
pub fn build_probed_chain(n: usize, t0: f64, gamma_p: f64, t_env: f64, mu_a: f64, mu_b: f64) -> Result<DeviceModel> {
    if n == 0 {
        return Err(Error::InvalidModel("chain needs at least one site".into()));
    }
    if t0 == 0.0 {
        return Err(Error::InvalidModel("chain hopping t0 must be nonzero".into()));
    }
    if gamma_p < 0.0 {
        return Err(Error::InvalidModel(format!("probe coupling must be nonnegative, got {gamma_p}")));
    }
    let hoppings = (0..n.saturating_sub(1)).map(|i| Hopping { i, j: i + 1, amplitude: Complex64::new(t0, 0.0) }).collect();
    let lead = |label: &str, site: usize, mu: f64| ReservoirAttachment {
        label: label.into(),
        coupling: Coupling::SemiInfiniteChain { t0_lead: t0, eps0_lead: 0.0, contact_site: site, contact: t0 },
        temperature: t_env,
        mu,
        role: Role::Fixed,
    };
    let mut reservoirs = vec![lead("a", 0, mu_a), lead("b", n - 1, mu_b)];
    for s in 0..n {
        let mu0 = if n == 1 { 0.5 * (mu_a + mu_b) } else { mu_a + (mu_b - mu_a) * s as f64 / (n - 1) as f64 };
        reservoirs.push(ReservoirAttachment {
            label: format!("P{}", s + 1),
            coupling: Coupling::WideBand { gamma: vec![(s, gamma_p)] },
            temperature: t_env,
            mu: mu0,
            role: Role::Floating,
        });
    }
    DeviceModel::new(vec![0.0; n], hoppings, reservoirs, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;
    use proptest::prelude::*;

    fn is_hermitian(h: &DMatrix<Complex64>) -> bool {
        (h - h.adjoint()).camax() == 0.0
    }

    fn spectrum(m: &DeviceModel) -> Vec<f64> {
        let mut v: Vec<f64> = SymmetricEigen::new(m.hamiltonian()).eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn builders_are_hermitian() {
        assert!(is_hermitian(&build_rlm(1.0, 1.0, 1.25, 0.1, 0.0).unwrap().hamiltonian()));
        assert!(is_hermitian(&build_ring(6, 2.7, 0.05, 0.135, 0.02, 0.0).unwrap().hamiltonian()));
        assert!(is_hermitian(&build_probed_chain(7, 2.7, 0.1, 0.01, 0.05, -0.05).unwrap().hamiltonian()));
    }

    #[test]
    fn ring_peierls_phase() {
        let m = build_ring(6, 1.0, 0.05, 0.05, 0.1, 0.0).unwrap();
        let h01 = m.hamiltonian_element(0, 1);
        assert!((h01.arg() - 0.05235987755982988).abs() < 1e-15);
        let z = m.loop_phase().unwrap();
        let expect = Complex64::from_polar(1.0, 0.1 * std::f64::consts::PI);
        assert!((z - expect).norm() < 1e-14);
    }

    #[test]
    fn ring_zero_flux_is_real() {
        let m = build_ring(6, 1.0, 0.0, 0.05, 0.1, 0.0).unwrap();
        assert!(m.is_time_reversal_symmetric());
    }

    #[test]
    fn half_flux_spectrum_even() {
        let a = spectrum(&build_ring(6, 1.0, 0.5, 0.0, 0.1, 0.0).unwrap());
        let b = spectrum(&build_ring(6, 1.0, -0.5, 0.0, 0.1, 0.0).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn ring_spectrum_closed_form() {
        let (n, t, phi) = (6, 1.3, 0.05);
        let got = spectrum(&build_ring(n, t, phi, 0.0, 0.1, 0.0).unwrap());
        let mut want: Vec<f64> = (0..n).map(|m| 2.0 * t * (2.0 * std::f64::consts::PI * (m as f64 + phi) / n as f64).cos()).collect();
        want.sort_by(f64::total_cmp);
        for (x, y) in got.iter().zip(&want) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_inputs() {
        assert!(build_rlm(1.0, 1.0, 0.0, 0.1, 0.0).is_err());
        assert!(build_ring(2, 1.0, 0.0, 0.0, 0.1, 0.0).is_err());
        assert!(build_probed_chain(3, 2.7, -1.0, 0.01, 0.0, 0.0).is_err());
        assert!(build_rlm(1.0, 1.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn probed_chain_layout() {
        let m = build_probed_chain(4, 2.7, 0.3, 0.01, 0.05, -0.05).unwrap();
        assert_eq!(m.reservoirs.len(), 6);
        assert_eq!(m.floating_indices(), vec![2, 3, 4, 5]);
        assert_eq!(m.reservoirs[5].sites(), vec![3]);
        assert_eq!(m.band_edges(), vec![-5.4, 5.4]);
    }

    proptest! {
        #[test]
        fn gauge_invariance(raw in proptest::collection::vec(-3.0f64..3.0, 6), phi in -1.0f64..1.0) {
            let n = raw.len();
            let total = 2.0 * std::f64::consts::PI * phi;
            let mean = raw.iter().sum::<f64>() / n as f64;
            let phases: Vec<f64> = raw.iter().map(|r| r - mean + total / n as f64).collect();
            let a = spectrum(&build_ring_with_phases(1.0, &phases, phi, 0.0, 0.1, 0.0).unwrap());
            let b = spectrum(&build_ring(n, 1.0, phi, 0.0, 0.1, 0.0).unwrap());
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-12 * 2.0);
            }
        }
    }
}
