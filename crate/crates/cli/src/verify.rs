//! The invariant suite run by `entroflow verify`.
//!
//! Each group returns named measurements with a bound. Groups run on the
//! worker pool and are reported in a fixed order; values are deterministic
//! (no timings), so two runs produce identical tables.

use entroflow::drive::{omega_change, omega_flow_rate, run_drive, run_drive_sweep, DriveOptions, DriveProtocol};
use entroflow::greens::{assemble_greens, surface_g};
use entroflow::lattice::{build_probed_chain, build_ring};
use entroflow::oracle::{equilibrium_correlations, evolve_correlations, reservoir_grand_potential, slow_ramp, FactorizedState, LevelRamp};
use entroflow::quadrature::QuadTol;
use entroflow::ring::{bond_currents, divergence_check, dmu_entropy_current, eigenstates, total_circulating};
use entroflow::stats::Channel;
use entroflow::transport::{reservoir_currents, transmission, transmission_matrix};
use entroflow::units::{Quantity, Unit, UnitSystem};
use rayon::prelude::*;
use rayon::ThreadPool;

use crate::config::{log_grid, VerifySetup};
use crate::experiments::{crossover, solve_chain};
use crate::output::{Cell, Table};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    AtMost(f64),
    AtLeast(f64),
    Above(f64),
    Below(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Invariant {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
}

impl Invariant {
    fn new(name: &str, value: f64, bound: Bound) -> Self {
        Invariant { name: name.to_owned(), value, bound }
    }

    pub fn tolerance(&self) -> f64 {
        match self.bound {
            Bound::AtMost(x) | Bound::AtLeast(x) | Bound::Above(x) | Bound::Below(x) => x,
        }
    }

    pub fn pass(&self) -> bool {
        let v = self.value;
        match self.bound {
            Bound::AtMost(x) => v <= x,
            Bound::AtLeast(x) => v >= x,
            Bound::Above(x) => v > x,
            Bound::Below(x) => v < x,
        }
    }
}

type Group = anyhow::Result<Vec<Invariant>>;
type GroupFn<'a> = Box<dyn Fn() -> Group + Send + Sync + 'a>;

fn max_abs(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn units() -> Group {
    let u = UnitSystem::electron_volt();
    let kt = u.to_natural(Quantity::new(300.0, Unit::Kelvin))?;
    let back = u.from_natural(kt, Unit::Kelvin)?;
    Ok(vec![
        Invariant::new("units.kelvin_roundtrip_rel", (back - 300.0).abs() / 300.0, Bound::AtMost(1e-15)),
        Invariant::new("units.thermal_energy_300K_dev", (kt - 0.025851999786).abs(), Bound::AtMost(1e-12)),
    ])
}

fn greens() -> Group {
    let t0 = 1.3;
    let res = max_abs([-4.0, -2.7, -1.0, 0.0, 0.5, 2.5, 2.61, 6.0].map(|e| {
        let g = surface_g(e, t0);
        (g * g * (t0 * t0) - g * e + 1.0).norm()
    }));
    Ok(vec![Invariant::new("greens.surface_fixed_point_residual", res, Bound::AtMost(1e-12))])
}

fn transport(tol: QuadTol) -> Group {
    let chain = build_probed_chain(5, 1.0, 0.0, 0.1, 0.0, 0.0)?;
    let mut ballistic: f64 = 0.0;
    for e in [-1.99, -1.2, 0.0, 0.3, 1.7, 1.999] {
        ballistic = ballistic.max((transmission(&assemble_greens(&chain, e)?, 0, 1)? - 1.0).abs());
    }
    let mut eq = build_probed_chain(6, 2.7, 0.3, 0.0099, 0.02, 0.02)?;
    for r in eq.reservoirs.iter_mut() {
        r.mu = 0.02;
    }
    let c = reservoir_currents(&eq, tol)?;
    let eq_max = max_abs(c.particle.iter().chain(&c.energy).chain(&c.entropy).copied());
    let multi = build_probed_chain(6, 2.7, 0.4, 0.01, 0.05, -0.05)?;
    let mut recip: f64 = 0.0;
    for e in [-5.0, -0.7, 0.0, 0.01, 3.3] {
        let t = transmission_matrix(&assemble_greens(&multi, e)?);
        for a in 0..t.n {
            for b in 0..t.n {
                recip = recip.max((t.get(a, b) - t.get(b, a)).abs());
            }
        }
    }
    Ok(vec![
        Invariant::new("transport.ballistic_transmission_dev", ballistic, Bound::AtMost(1e-10)),
        Invariant::new("transport.equilibrium_current_max", eq_max, Bound::AtMost(tol.abs_tol)),
        Invariant::new("transport.reciprocity_dev", recip, Bound::AtMost(1e-12)),
    ])
}

/// Log-log slope by least squares.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.abs().ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn drive(setup: &VerifySetup) -> Group {
    let d = &setup.drive;
    let low = log_grid(0.01, 0.1, 7);
    let mut temps = low.clone();
    temps.extend([0.2, 1.0]);
    let rows = run_drive_sweep(&d.protocol(1.0), &temps, &d.options())?;
    let low_rows = &rows[..low.len()];
    let at = |t: f64| rows.iter().find(|r| r.temperature == t).expect("temperature on grid");
    let ratio = at(0.01).ds_correct.abs() / at(1.0).ds_correct.abs();
    let monotone = low_rows.windows(2).map(|w| w[0].ds_correct.abs() - w[1].ds_correct.abs()).fold(f64::NEG_INFINITY, f64::max);
    let slope = loglog_slope(&low, &low_rows.iter().map(|r| r.ds_conv).collect::<Vec<_>>());
    let book = max_abs(rows.iter().map(|r| r.ds_correct - (r.ds_conv - r.d_omega / r.temperature)));

    let mid = at(0.2);
    let p = d.protocol(0.2);
    let finite = reservoir_grand_potential(p.eps_end, p.v, p.t0, 2000, 0.2, p.mu)?
        - reservoir_grand_potential(p.eps_start, p.v, p.t0, 2000, 0.2, p.mu)?;

    let ramp = LevelRamp {
        eps_start: p.eps_start,
        eps_end: p.eps_end,
        v: p.v,
        t0: p.t0,
        sites: setup.oracle_sites,
        ramp_time: setup.oracle_ramp_time,
    };
    let oracle = slow_ramp(&ramp, 0.2, p.mu, setup.oracle_dt)?;
    let reflection = setup.oracle_ramp_time * 2.0 * p.t0.abs() / setup.oracle_sites as f64;
    Ok(vec![
        Invariant::new("drive.dS_correct_ratio_0.01_to_1", ratio, Bound::AtMost(0.05)),
        Invariant::new("drive.dS_correct_monotone_below_0.1", monotone, Bound::Below(0.0)),
        Invariant::new("drive.dS_conv_loglog_slope_dev", (slope + 1.0).abs(), Bound::AtMost(0.1)),
        Invariant::new("drive.entropy_bookkeeping_dev", book, Bound::AtMost(1e-12)),
        Invariant::new("drive.dOmega_vs_finite_chain_dev", (mid.d_omega - finite).abs(), Bound::AtMost(1e-7)),
        Invariant::new("oracle.ramp_to_reflection_time", reflection, Bound::Below(1.0)),
        Invariant::new("oracle.dN_R_rel_dev", (oracle.d_n_r - mid.d_n).abs() / mid.d_n.abs(), Bound::AtMost(0.01)),
        Invariant::new("oracle.dE_R_rel_dev", (oracle.d_e_r - mid.d_e).abs() / mid.d_e.abs(), Bound::AtMost(0.01)),
    ])
}

fn drive_path(setup: &VerifySetup) -> Group {
    let opts = DriveOptions { initial_sites: 400, max_sites: 800, convergence: f64::INFINITY, quad: setup.drive.quad.tol() };
    let p = setup.drive.protocol(0.2);
    let split = 0.5 * (p.eps_start + p.eps_end);
    let whole = run_drive(&p, &opts)?;
    let a = run_drive(&DriveProtocol { eps_end: split, ..p }, &opts)?;
    let b = run_drive(&DriveProtocol { eps_start: split, ..p }, &opts)?;
    let dev = max_abs([a.d_n + b.d_n - whole.d_n, a.d_e + b.d_e - whole.d_e, a.d_omega + b.d_omega - whole.d_omega]);
    let null = run_drive(&DriveProtocol { eps_end: p.eps_start, ..p }, &opts)?;
    Ok(vec![
        Invariant::new("drive.path_split_dev", dev, Bound::AtMost(1e-10)),
        Invariant::new("drive.null_protocol_max", max_abs([null.d_e, null.d_n, null.d_omega]), Bound::AtMost(0.0)),
    ])
}

fn heat(setup: &VerifySetup) -> Group {
    let d = &setup.drive;
    let tol = d.quad.tol();
    let p = d.protocol(1.0);
    let q = |t: f64| omega_change(&DriveProtocol { temperature: t, ..p }, tol).map(|x| x.0);
    let decay = q(5.0 * p.v)?.abs() / q(0.05 * p.v)?.abs();
    let decoupled = omega_change(&DriveProtocol { v: 0.0, temperature: 0.3, ..p }, tol)?.0;
    Ok(vec![
        Invariant::new("heat.decay_ratio_5V_to_0.05V", decay, Bound::AtMost(0.1)),
        Invariant::new("heat.decoupled_level_max", decoupled.abs(), Bound::AtMost(0.0)),
    ])
}

fn ring(setup: &VerifySetup) -> Group {
    let r = &setup.ring;
    let tol = r.quad.tol();
    let t = r.t_hop.abs();
    let closed = build_ring(r.n, r.t_hop, r.flux, 0.0, r.temperature, r.mu)?;
    let es = eigenstates(&closed);
    let (mut forms, mut identity, mut divergence, mut balance): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for &temp in &r.temperatures {
        let a = es.entropy_current(temp, r.mu);
        let b = es.entropy_current_from_free_energy(temp, r.mu);
        forms = forms.max(max_abs(a.iter().zip(&b).map(|(x, y)| x - y)));
        let model = build_ring(r.n, r.t_hop, r.flux, r.surface_gamma, temp, r.mu)?;
        for f in [bond_currents(&model, tol)?, es.field(temp, r.mu)] {
            identity = identity.max(max_abs((0..f.edges.len()).map(|k| temp * f.j_s[k] - (f.j_e[k] - r.mu * f.j_n[k] - f.j_omega[k]))));
            divergence = divergence.max(divergence_check(&f, Channel::FreeEnergy).max_divergence());
            for c in Channel::ALL {
                balance = balance.max(max_abs(divergence_check(&f, c).balance()));
            }
        }
    }
    let zero = build_ring(r.n, r.t_hop, 0.0, r.surface_gamma, r.temperature, r.mu)?;
    let fz = bond_currents(&zero, tol)?;
    let zero_max = max_abs(Channel::ALL.iter().flat_map(|&c| fz.channel(c).to_vec()));

    let total = |temp: f64| -> anyhow::Result<(f64, f64)> {
        let f = es.field(temp, r.mu);
        Ok((total_circulating(&f, &f.j_s)?.0, total_circulating(&f, &f.j_s_conv)?.0))
    };
    let (s_cold, c_cold) = total(1e-3 * t)?;
    let (s_hot, c_hot) = total(t)?;

    let warm = dmu_entropy_current(&closed, 0.1 * t, r.mu, 1e-4 * t)?;
    let rel = max_abs(warm.analytic.iter().zip(&warm.numeric).map(|(a, n)| (a - n) / a));
    let cold = dmu_entropy_current(&closed, 1e-3 * t, r.mu, 1e-6 * t)?;

    let exact = es.entropy_current(0.1 * t, r.mu)[0];
    let fine = build_ring(r.n, r.t_hop, r.flux, 1e-4 * t, 0.1 * t, r.mu)?;
    let narrow = bond_currents(&fine, QuadTol { rel_tol: 1e-11, abs_tol: 1e-15, max_panels: 50_000 })?.j_s[0];
    Ok(vec![
        Invariant::new("ring.free_energy_form_dev", forms, Bound::AtMost(1e-12)),
        Invariant::new("ring.channel_identity_dev", identity, Bound::AtMost(1e-8)),
        Invariant::new("ring.omega_divergence_max", divergence, Bound::AtMost(1e-8)),
        Invariant::new("ring.site_balance_max", balance, Bound::AtMost(1e-8)),
        Invariant::new("ring.zero_flux_current_max", zero_max, Bound::AtMost(1e-12)),
        Invariant::new("ring.third_law_ratio", s_cold.abs() / s_hot.abs(), Bound::AtMost(1e-4)),
        Invariant::new("ring.conventional_to_corrected_cold", c_cold.abs() / s_cold.abs(), Bound::AtLeast(100.0)),
        Invariant::new("ring.conventional_cold_to_hot", c_cold.abs() / c_hot.abs(), Bound::Above(1.0)),
        Invariant::new("ring.dmu_rel_dev", rel, Bound::AtMost(1e-5)),
        Invariant::new("ring.dmu_cold_corrected_max", max_abs(cold.analytic.iter().copied()), Bound::AtMost(1e-12)),
        Invariant::new("ring.dmu_cold_extra_min", cold.extra.iter().fold(f64::INFINITY, |m, x| m.min(x.abs())), Bound::AtLeast(1e-3)),
        Invariant::new("ring.narrow_broadening_rel_dev", ((narrow - exact) / exact).abs(), Bound::AtMost(1e-3)),
    ])
}

fn probes(setup: &VerifySetup) -> Group {
    let p = &setup.probes;
    let gamma = 0.3 * p.t0.abs();
    let sol = solve_chain(p, p.profile_sites, gamma)?;
    let st = &sol.state;
    let monotone = st.mu.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let min_t = st.temperature.iter().fold(f64::INFINITY, |m, x| m.min(*x));
    let clausius: f64 =
        sol.model.reservoirs.iter().enumerate().map(|(a, r)| -(sol.energy[a] - r.mu * sol.particle[a]) / r.temperature).sum();
    Ok(vec![
        Invariant::new("probes.residual_max", st.residual_norm, Bound::AtMost(p.solver.tol)),
        Invariant::new("probes.mu_step_max", monotone, Bound::Below(0.0)),
        Invariant::new("probes.min_T_minus_T0", min_t - p.t_env, Bound::AtLeast(-p.solver.tol)),
        Invariant::new("probes.particle_sum", sol.particle.iter().sum::<f64>().abs(), Bound::AtMost(1e-9)),
        Invariant::new("probes.energy_sum", sol.energy.iter().sum::<f64>().abs(), Bound::AtMost(1e-9)),
        Invariant::new("probes.entropy_production", sol.entropy_production(), Bound::Above(0.0)),
        Invariant::new("probes.clausius_production", clausius, Bound::AtLeast(0.0)),
    ])
}

fn crossover_group(setup: &VerifySetup, pool: &ThreadPool) -> Group {
    let p = &setup.probes;
    let pts = crossover(p, &setup.crossover_sites, pool).into_iter().collect::<crate::error::Result<Vec<_>>>()?;
    let ng = p.gamma_p.len();
    let ratios: Vec<f64> = pts.iter().map(|x| x.ratio).collect();
    let mut step = f64::INFINITY;
    for g in 0..ng {
        for k in 0..setup.crossover_sites.len() - 1 {
            step = step.min(ratios[(k + 1) * ng + g] - ratios[k * ng + g]);
        }
    }
    Ok(vec![
        Invariant::new("crossover.ratio_min", ratios.iter().fold(f64::INFINITY, |m, x| m.min(*x)), Bound::Above(0.0)),
        Invariant::new("crossover.ratio_max", ratios.iter().fold(f64::NEG_INFINITY, |m, x| m.max(*x)), Bound::Below(1.05)),
        Invariant::new("crossover.ratio_step_in_N_min", step, Bound::Above(0.0)),
    ])
}

/// Weak-coupling continuity: Ṡ_P falls monotonically to zero as γ_p shrinks.
fn probe_continuity(setup: &VerifySetup) -> Group {
    let p = &setup.probes;
    let mut rates = Vec::new();
    for g in [0.3, 0.03, 0.003] {
        rates.push(solve_chain(p, 10, g * p.t0.abs())?.entropy_production());
    }
    let step = rates.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    Ok(vec![
        Invariant::new("probes.weak_coupling_step_max", step, Bound::Below(0.0)),
        Invariant::new("probes.weak_coupling_ratio", rates[2] / rates[0], Bound::AtMost(0.1)),
    ])
}

fn oracle_statics() -> Group {
    let r = LevelRamp { eps_start: 1.0, eps_end: 1.0, v: 1.0, t0: 1.25, sites: 40, ramp_time: 0.0 };
    let h = r.hamiltonian(0.0);
    let (c, _) = equilibrium_correlations(&h, 0.2, 0.1)?;
    let occ = c.occupations();
    let bounds = (-occ[0]).max(occ[occ.len() - 1] - 1.0).max(0.0);
    let mut st = FactorizedState::equilibrium(&h, 0.2, 0.0, 0.0)?;
    for k in 0..st.cols {
        st.re[k] *= 0.5;
    }
    let (d, mut o) = (vec![0.0; 41], vec![1.25; 40]);
    let mut d = d;
    d[0] = 1.0;
    o[0] = 1.0;
    let n0: f64 = (0..41).map(|k| st.density(k)).sum();
    let e0 = st.tridiagonal_energy(&d, &o);
    let ev = evolve_correlations(&r, &st, 10.0, 0.02)?;
    let n1: f64 = (0..41).map(|k| ev.state.density(k)).sum();
    let e1 = ev.state.tridiagonal_energy(&d, &o);

    let ring = build_ring(6, 2.7, 0.05, 0.0, 0.3, 1.35)?;
    let hr = ring.hamiltonian();
    let (cr, _) = equilibrium_correlations(&hr, 0.3, 1.35)?;
    let f = eigenstates(&ring).field(0.3, 1.35);
    let bond = max_abs(ring.hoppings.iter().enumerate().map(|(k, hop)| cr.bond_current(&hr, hop.i, hop.j) - f.j_n[k]));
    Ok(vec![
        Invariant::new("oracle.occupation_bound_violation", bounds, Bound::AtMost(1e-10)),
        Invariant::new("oracle.hermiticity_dev", c.hermiticity_error(), Bound::AtMost(1e-12)),
        Invariant::new("oracle.number_drift", (n1 - n0).abs(), Bound::AtMost(1e-10)),
        Invariant::new("oracle.energy_drift", (e1 - e0).abs(), Bound::AtMost(1e-10)),
        Invariant::new("oracle.ring_bond_current_dev", bond, Bound::AtMost(1e-12)),
    ])
}

/// Halving rel_tol moves each result by less than the first error estimate.
fn quadrature(setup: &VerifySetup) -> Group {
    let tol = setup.drive.quad.tol();
    let half = QuadTol { rel_tol: 0.5 * tol.rel_tol, ..tol };
    let p = setup.drive.protocol(0.01);
    let (a, ea) = omega_flow_rate(1.2, &p, tol)?;
    let (b, _) = omega_flow_rate(1.2, &p, half)?;
    let r = &setup.ring;
    let model = build_ring(r.n, r.t_hop, r.flux, r.surface_gamma, r.temperature, r.mu)?;
    let fa = bond_currents(&model, tol)?;
    let fb = bond_currents(&model, half)?;
    let ring_shift =
        max_abs(Channel::ALL.iter().flat_map(|&c| fa.channel(c).iter().zip(fb.channel(c)).map(|(x, y)| x - y).collect::<Vec<_>>()));
    let ratio = |shift: f64, err: f64| if shift == 0.0 { 0.0 } else { shift / err };
    Ok(vec![
        Invariant::new("quad.halving_shift_over_error_drive", ratio((a - b).abs(), ea), Bound::AtMost(1.0)),
        Invariant::new("quad.halving_shift_over_error_ring", ratio(ring_shift, fa.error), Bound::AtMost(1.0)),
    ])
}

/// Runs every group; a group that errors contributes one failing row.
pub fn run_suite(setup: &VerifySetup, pool: &ThreadPool) -> Vec<Invariant> {
    let groups: Vec<(&str, GroupFn<'_>)> = vec![
        ("units", Box::new(units)),
        ("greens", Box::new(greens)),
        ("transport", Box::new(|| transport(setup.drive.quad.tol()))),
        ("drive", Box::new(|| drive(setup))),
        ("drive_path", Box::new(|| drive_path(setup))),
        ("heat", Box::new(|| heat(setup))),
        ("ring", Box::new(|| ring(setup))),
        ("probes", Box::new(|| probes(setup))),
        ("crossover", Box::new(|| crossover_group(setup, pool))),
        ("probe_continuity", Box::new(|| probe_continuity(setup))),
        ("oracle", Box::new(oracle_statics)),
        ("quad", Box::new(|| quadrature(setup))),
    ];
    let results: Vec<Group> = pool.install(|| groups.par_iter().map(|(_, g)| g()).collect());
    let mut out = Vec::new();
    for ((name, _), r) in groups.iter().zip(results) {
        match r {
            Ok(rows) => out.extend(rows),
            Err(e) => {
                log::error!("verify group {name} failed: {e:#}");
                out.push(Invariant::new(&format!("{name}.error"), f64::NAN, Bound::AtMost(0.0)));
            }
        }
    }
    out
}

pub fn table(rows: &[Invariant]) -> Table {
    let mut t = Table::new("verify_invariants.csv", &["name", "value", "tolerance", "pass"]);
    for r in rows {
        t.push(vec![Cell::Text(r.name.clone()), r.value.into(), r.tolerance().into(), r.pass().into()]);
    }
    t
}
