//! Checks that cross module boundaries: lattice → greens → transport →
//! probes, and the open ring against its closed eigenstate limit.

use entroflow::greens::assemble_greens;
use entroflow::lattice::{build_probed_chain, build_ring};
use entroflow::probes::{solve_floating, ProbeOptions};
use entroflow::quadrature::{integrate, EnergyGrid, QuadTol};
use entroflow::ring::{bond_currents, eigenstates};
use entroflow::stats::Distribution;
use entroflow::transport::{joule_entropy_rate, probe_entropy_production, reservoir_currents, transmission};

#[test]
fn landauer_current_from_explicit_integral() {
    let chain = build_probed_chain(8, 1.0, 0.0, 0.05, 0.1, -0.1).unwrap();
    let tol = QuadTol::default();
    let c = reservoir_currents(&chain, tol).unwrap();
    let (fa, fb) = (Distribution::new(0.05, 0.1), Distribution::new(0.05, -0.1));
    let grid = EnergyGrid::builder(-2.0, 2.0).sqrt_edges([-2.0, 2.0]).breakpoints([-0.1, 0.1]).tol(tol).build().unwrap();
    let (i0, _) = integrate(&grid, |e| transmission(&assemble_greens(&chain, e).unwrap(), 0, 1).unwrap() * (fa.f(e) - fb.f(e))).unwrap();
    assert!((c.particle[0] - i0).abs() < 1e-9 * i0.abs(), "{} vs {i0}", c.particle[0]);
    assert!((c.particle[0] + c.particle[1]).abs() < 1e-12);
}

#[test]
fn floating_probes_conserve_and_produce_entropy() {
    let chain = build_probed_chain(12, 2.7, 0.5, 0.01, 0.05, -0.05).unwrap();
    let sol = solve_floating(&chain, &ProbeOptions::default(), None).unwrap();
    assert!(sol.state.converged);
    let c = reservoir_currents(&sol.model, QuadTol::default()).unwrap();
    for k in sol.model.floating_indices() {
        assert!(c.particle[k].abs() < 1e-9 && c.energy[k].abs() < 1e-9, "probe {k}");
    }
    assert!(c.particle.iter().sum::<f64>().abs() < 1e-10);
    assert!(c.energy.iter().sum::<f64>().abs() < 1e-10);
    // Steady state: the device entropy is stationary, so the entropy currents balance.
    assert!(c.entropy.iter().sum::<f64>().abs() < 1e-10);
    let s_p = probe_entropy_production(&sol.model, &c);
    assert!((sol.entropy_production() - s_p).abs() < 1e-8 * s_p);
    let clausius = c.clausius_production(&sol.model);
    let joule = joule_entropy_rate(c.particle[0], 0.05, -0.05, 0.01);
    assert!((clausius - joule).abs() < 1e-8 * joule, "{clausius} vs {joule}");
    assert!(s_p > 0.0 && s_p < clausius);
}

#[test]
fn weakly_broadened_ring_approaches_eigenstate_currents() {
    let (t, mu) = (0.1, 0.5);
    let closed = eigenstates(&build_ring(6, 1.0, 0.05, 0.0, t, mu).unwrap()).field(t, mu);
    let mut devs = Vec::new();
    for g in [0.04, 0.02, 0.01] {
        let open = bond_currents(&build_ring(6, 1.0, 0.05, g, t, mu).unwrap(), QuadTol::default()).unwrap();
        devs.push((open.j_n[0] / closed.j_n[0] - 1.0).abs().max((open.j_s[0] / closed.j_s[0] - 1.0).abs()));
    }
    assert!(devs.windows(2).all(|w| w[1] < w[0]), "{devs:?}");
    assert!(devs[2] < 0.05, "{devs:?}");
}
