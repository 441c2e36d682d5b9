//! Lead surface Green's functions, embedding self-energies, the device
//! retarded Green's function and channel-weighted correlation matrices
//! G_R (Σ_α Γ^α w_α) G_A.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{Coupling, DeviceModel};
use crate::stats::{Channel, Distribution};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Retarded surface Green's function of a semi-infinite chain with hopping
/// `t0` and zero on-site energy: the causal root of g = 1/(ε − t0² g).
pub fn surface_g(e: f64, t0: f64) -> Complex64 {
    let t2 = t0 * t0;
    let e2 = e * e;
    if e2 < 4.0 * t2 {
        Complex64::new(e, -(4.0 * t2 - e2).sqrt()) / (2.0 * t2)
    } else {
        // 2/(ε + sign(ε)√(ε²−4t0²)) avoids cancellation far from the band.
        let r = (e2 - 4.0 * t2).sqrt();
        Complex64::new(2.0 / (e + e.signum() * r), 0.0)
    }
}

/// dg/dε = −g/(ε − 2 t0² g); diverges at the band edges.
pub fn surface_g_derivative(e: f64, t0: f64) -> Complex64 {
    let g = surface_g(e, t0);
    -g / (e - 2.0 * t0 * t0 * g)
}

/// d²g/dε², used for bound-state residues outside the band.
pub fn surface_g_second_derivative(e: f64, t0: f64) -> Complex64 {
    let t2 = t0 * t0;
    let g = surface_g(e, t0);
    let g1 = surface_g_derivative(e, t0);
    let d = e - 2.0 * t2 * g;
    -(g1 * d - g * (1.0 - 2.0 * t2 * g1)) / (d * d)
}

/// Retarded self-energy of one reservoir as (site, Σ_ii) entries.
pub fn self_energy(coupling: &Coupling, e: f64) -> Vec<(usize, Complex64)> {
    match coupling {
        Coupling::SemiInfiniteChain { t0_lead, eps0_lead, contact_site, contact } => {
            vec![(*contact_site, contact * contact * surface_g(e - eps0_lead, *t0_lead))]
        }
        Coupling::WideBand { gamma } => gamma.iter().map(|&(s, g)| (s, Complex64::new(0.0, -0.5 * g))).collect(),
    }
}

/// Device Green's function at one energy.
#[derive(Debug, Clone)]
pub struct GreensState {
    pub energy: f64,
    pub g_r: DMatrix<Complex64>,
    /// Total retarded self-energy on each site (all couplings are diagonal).
    pub sigma: Vec<Complex64>,
    /// Γ^α as (site, Γ_ii) entries for every reservoir α.
    pub gammas: Vec<Vec<(usize, f64)>>,
}

impl GreensState {
    pub fn g_a(&self) -> DMatrix<Complex64> {
        self.g_r.adjoint()
    }

    /// A = i(G_R − G_A).
    pub fn spectral(&self) -> DMatrix<Complex64> {
        (&self.g_r - self.g_r.adjoint()) * I
    }

    /// Σ_α Γ^α_kk w_α for every site k.
    pub fn weighted_gamma(&self, weights: &[f64]) -> Vec<f64> {
        let mut d = vec![0.0; self.g_r.nrows()];
        for (gam, &w) in self.gammas.iter().zip(weights) {
            for &(s, g) in gam {
                d[s] += g * w;
            }
        }
        d
    }

    /// Total broadening Γ_kk = −2 Im Σ_kk.
    pub fn gamma_total(&self) -> Vec<f64> {
        self.sigma.iter().map(|s| -2.0 * s.im).collect()
    }
}

pub fn assemble_greens(model: &DeviceModel, e: f64) -> Result<GreensState> {
    let n = model.n_sites;
    let mut sigma = vec![Complex64::new(0.0, 0.0); n];
    let mut gammas = Vec::with_capacity(model.reservoirs.len());
    for r in &model.reservoirs {
        let se = self_energy(&r.coupling, e);
        let mut gam = Vec::with_capacity(se.len());
        for (s, z) in se {
            sigma[s] += z;
            gam.push((s, -2.0 * z.im));
        }
        gammas.push(gam);
    }
    let mut a = -model.hamiltonian();
    for k in 0..n {
        a[(k, k)] += Complex64::new(e, 0.0) - sigma[k];
    }
    let g_r = a.try_inverse().ok_or(Error::Singular { energy: e })?;
    if g_r.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Singular { energy: e });
    }
    Ok(GreensState { energy: e, g_r, sigma, gammas })
}

/// M = G_R (Σ_α Γ^α w_α) G_A: Hermitian, positive semidefinite for w ≥ 0,
/// equal to i(G_R − G_A) when every w_α = 1.
pub fn weighted_matrix(state: &GreensState, weights: &[f64]) -> DMatrix<Complex64> {
    let d = state.weighted_gamma(weights);
    weighted_from_diag(&state.g_r, &d)
}

pub fn weighted_from_diag(g: &DMatrix<Complex64>, d: &[f64]) -> DMatrix<Complex64> {
    let mut gd = g.clone();
    for (k, &dk) in d.iter().enumerate() {
        gd.column_mut(k).scale_mut(dk);
    }
    gd * g.adjoint()
}

/// Per-reservoir channel weights w_α(ε).
pub fn channel_weights(dists: &[Distribution], channel: Channel, e: f64) -> Vec<f64> {
    dists.iter().map(|d| d.weight(channel, e)).collect()
}

/// Real poles of G_R outside the lead bands of a model whose only
/// reservoirs are semi-infinite chains (with any wide-band broadening every
/// pole acquires a width). Found by counting eigenvalues of H + Σ(ε), which
/// is Hermitian and decreasing in ε outside the band.
pub fn bound_states(model: &DeviceModel) -> Vec<f64> {
    let Some((lo, hi)) = model.lead_band() else { return Vec::new() };
    if model.has_wide_band() {
        return Vec::new();
    }
    let h_eff = |e: f64| {
        let mut h = model.hamiltonian();
        for r in &model.reservoirs {
            for (s, z) in self_energy(&r.coupling, e) {
                h[(s, s)] += Complex64::new(z.re, 0.0);
            }
        }
        SymmetricEigen::new(h).eigenvalues
    };
    let above = |e: f64| h_eff(e).iter().filter(|&&x| x > e).count();
    let below = |e: f64| h_eff(e).iter().filter(|&&x| x < e).count();
    let hn = model.hamiltonian();
    let mut bound = hn.iter().map(|z| z.norm()).sum::<f64>();
    for r in &model.reservoirs {
        if let Coupling::SemiInfiniteChain { t0_lead, contact, .. } = r.coupling {
            bound += contact * contact / t0_lead.abs();
        }
    }
    let far_hi = hi.max(0.0) + bound + 1.0;
    let far_lo = lo.min(0.0) - bound - 1.0;
    let mut poles = Vec::new();
    // Above the band: count(e) steps down from count(hi) to 0.
    let n_hi = above(hi);
    for k in 0..n_hi {
        // Largest e with count(e) > k.
        let (mut a, mut b) = (hi, far_hi);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if above(m) > k {
                a = m;
            } else {
                b = m;
            }
            if b - a < 1e-15 * b.abs().max(1.0) {
                break;
            }
        }
        poles.push(0.5 * (a + b));
    }
    let n_lo = below(lo);
    for k in 0..n_lo {
        let (mut a, mut b) = (far_lo, lo);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if below(m) > k {
                b = m;
            } else {
                a = m;
            }
            if b - a < 1e-15 * a.abs().max(1.0) {
                break;
            }
        }
        poles.push(0.5 * (a + b));
    }
    poles.sort_by(f64::total_cmp);
    poles
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_probed_chain, build_rlm};
    use proptest::prelude::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    /// Decimation oracle: iterate g ← 1/(ε + iη − t0² g) to convergence.
    fn decimated(e: f64, t0: f64, eta: f64) -> Complex64 {
        let mut g = Complex64::new(0.0, -1.0 / t0.abs());
        let z = Complex64::new(e, eta);
        for _ in 0..200_000 {
            let next = 1.0 / (z - t0 * t0 * g);
            if (next - g).norm() < 1e-15 {
                return next;
            }
            g = 0.5 * (g + next);
        }
        g
    }

    #[test]
    fn surface_g_examples() {
        assert!(close(surface_g(0.0, 1.0), Complex64::new(0.0, -1.0), 1e-15));
        assert!(close(surface_g(2.0, 1.0), Complex64::new(1.0, 0.0), 1e-15));
        let g = surface_g(100.0, 1.0);
        assert!((g.re - 0.0100010002).abs() < 1e-9 && g.im == 0.0);
        assert!(close(surface_g(0.0, 1.25), Complex64::new(0.0, -0.8), 1e-15));
    }

    #[test]
    fn surface_g_matches_decimation() {
        for &e in &[-3.0, -1.7, -0.3, 0.4, 1.9, 2.6, 7.0] {
            let exact = surface_g(e, 1.0);
            let dec = decimated(e, 1.0, 1e-9);
            assert!(close(exact, dec, 1e-6), "e={e}: {exact} vs {dec}");
        }
    }

    #[test]
    fn surface_g_derivatives_match_differences() {
        let h = 1e-5;
        for &e in &[-2.6, -1.1, 0.3, 1.8, 3.3] {
            let num = (surface_g(e + h, 1.2) - surface_g(e - h, 1.2)) / (2.0 * h);
            assert!(close(surface_g_derivative(e, 1.2), num, 1e-7));
            let num2 = (surface_g_derivative(e + h, 1.2) - surface_g_derivative(e - h, 1.2)) / (2.0 * h);
            if e.abs() > 2.4 {
                assert!(close(surface_g_second_derivative(e, 1.2), num2, 1e-6));
            }
        }
    }

    #[test]
    fn rlm_broadening_at_band_centre() {
        let m = build_rlm(1.0, 1.0, 1.25, 0.1, 0.0).unwrap();
        let s = assemble_greens(&m, 0.0).unwrap();
        assert!((s.sigma[0].im + 0.8).abs() < 1e-15);
        assert!((s.gammas[0][0].1 - 1.6).abs() < 1e-15);
    }

    #[test]
    fn decoupled_level_is_singular_at_its_energy() {
        let m = build_rlm(0.0, 0.0, 1.0, 0.1, 0.0).unwrap();
        assert!(matches!(assemble_greens(&m, 0.0), Err(Error::Singular { .. })));
    }

    #[test]
    fn completeness_and_positivity_on_probed_chain() {
        let m = build_probed_chain(5, 2.7, 0.3, 0.01, 0.05, -0.05).unwrap();
        let dists = m.distributions();
        for &e in &[-6.0, -3.1, -0.02, 0.0, 0.04, 2.2, 5.3] {
            let st = assemble_greens(&m, e).unwrap();
            let a = st.spectral();
            let ones = vec![1.0; m.reservoirs.len()];
            assert!((weighted_matrix(&st, &ones) - &a).camax() < 1e-10);
            let fl = channel_weights(&dists, Channel::Particle, e);
            let pl: Vec<f64> = dists.iter().map(|d| d.p(e)).collect();
            let sum = weighted_matrix(&st, &fl) + weighted_matrix(&st, &pl);
            assert!((sum - &a).camax() < 1e-10);
            assert!((st.g_a() - st.g_r.adjoint()).camax() < 1e-13);
            let ev = SymmetricEigen::new(a).eigenvalues;
            assert!(ev.iter().all(|&x| x >= -1e-10));
        }
    }

    #[test]
    fn entropy_weighted_matrix_vanishes_in_tails() {
        let m = build_probed_chain(3, 1.0, 0.2, 0.01, 0.0, 0.0).unwrap();
        let st = assemble_greens(&m, 1.0).unwrap();
        let w = channel_weights(&m.distributions(), Channel::Entropy, 1.0);
        assert!(weighted_matrix(&st, &w).norm() < 1e-12);
    }

    #[test]
    fn bound_state_search() {
        let none = build_rlm(1.0, 1.0, 1.25, 0.1, 0.0).unwrap();
        assert!(bound_states(&none).is_empty());
        // Level far above the band splits off a bound state at ε with
        // ε − ε_s − V² g(ε) = 0.
        let m = build_rlm(4.0, 1.0, 1.0, 0.1, 0.0).unwrap();
        let b = bound_states(&m);
        assert_eq!(b.len(), 1);
        let e = b[0];
        assert!((e - 4.0 - surface_g(e, 1.0).re).abs() < 1e-12);
        let strong = build_rlm(0.0, 3.0, 1.0, 0.1, 0.0).unwrap();
        assert_eq!(bound_states(&strong).len(), 2);
    }

    proptest! {
        #[test]
        fn surface_g_fixed_point(e in -10.0f64..10.0, t0 in 0.2f64..3.0) {
            let g = surface_g(e, t0);
            prop_assert!(g.im <= 0.0);
            let back = 1.0 / (e - t0 * t0 * g);
            prop_assert!((back - g).norm() <= 1e-10 * g.norm().max(1.0));
        }
    }
}
