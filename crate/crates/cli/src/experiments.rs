//! Experiment pipelines: each turns a resolved setup into CSV tables.
//! Sweep points run on the supplied rayon pool; rows keep sweep order.

use entroflow::drive::{heat_difference_curves, run_drive_sweep};
use entroflow::lattice::{build_probed_chain, build_ring};
use entroflow::probes::{solve_floating, ProbeSolution};
use entroflow::ring::{bond_currents, eigenstates, total_circulating};
use entroflow::transport::joule_entropy_rate;
use rayon::prelude::*;
use rayon::ThreadPool;

use crate::config::{DriveSetup, ProbeSetup, RingSetup};
use crate::error::{CliError, Result};
use crate::output::{RunOutput, Table};

/// Keeps the rows that succeeded and remembers the first failure.
fn finish(tables: Vec<Table>, failures: Vec<CliError>) -> RunOutput {
    RunOutput { tables, failure: failures.into_iter().next() }
}

pub fn drive(setup: &DriveSetup, pool: &ThreadPool) -> RunOutput {
    let mut failures = Vec::new();
    let mut vs_t = Table::new("drive_vs_T.csv", &["T", "dE_R", "dN_R", "dOmega_R", "dS_correct", "dS_conv"]);
    match run_drive_sweep(&setup.protocol(setup.temperatures[0]), &setup.temperatures, &setup.options()) {
        Ok(rows) => {
            for r in rows {
                vs_t.push(vec![r.temperature.into(), r.d_e.into(), r.d_n.into(), r.d_omega.into(), r.ds_correct.into(), r.ds_conv.into()]);
            }
        }
        Err(e) => failures.push(CliError::numerical("quasistatic-drive")(e)),
    }
    let mut heat = Table::new("heat_diff.csv", &["T", "mu", "Q_diff"]);
    let curves: Vec<_> = pool.install(|| {
        setup
            .heat_mus
            .par_iter()
            .map(|&mu| {
                let p = entroflow::drive::DriveProtocol { mu, ..setup.protocol(1.0) };
                heat_difference_curves(&p, &setup.heat_temperatures, &[mu], setup.quad.tol())
            })
            .collect()
    });
    for c in curves {
        match c {
            Ok(rows) => {
                for h in rows {
                    heat.push(vec![h.temperature.into(), h.mu.into(), h.q_diff.into()]);
                }
            }
            Err(e) => failures.push(CliError::numerical("quasistatic-drive")(e)),
        }
    }
    finish(vec![vs_t, heat], failures)
}

pub fn ring(setup: &RingSetup, pool: &ThreadPool) -> RunOutput {
    let mut failures = Vec::new();
    let mut bonds = Table::new("ring_bonds.csv", &["bond_index", "site_i", "site_j", "j_n", "j_e", "j_omega", "j_s", "j_s_conv"]);
    let open = build_ring(setup.n, setup.t_hop, setup.flux, setup.surface_gamma, setup.temperature, setup.mu)
        .and_then(|m| bond_currents(&m, setup.quad.tol()));
    match open {
        Ok(f) => {
            for (k, &(i, j)) in f.edges.iter().enumerate() {
                bonds.push(vec![
                    k.into(),
                    i.into(),
                    j.into(),
                    f.j_n[k].into(),
                    f.j_e[k].into(),
                    f.j_omega[k].into(),
                    f.j_s[k].into(),
                    f.j_s_conv[k].into(),
                ]);
            }
        }
        Err(e) => failures.push(CliError::numerical("ring-observables")(e)),
    }
    let mut totals = Table::new("ring_total_vs_T.csv", &["T", "I_S_total", "I_S_conv_total"]);
    match build_ring(setup.n, setup.t_hop, setup.flux, 0.0, setup.temperature, setup.mu) {
        Ok(closed) => {
            let es = eigenstates(&closed);
            let rows: Vec<Result<(f64, f64, f64)>> = pool.install(|| {
                setup
                    .temperatures
                    .par_iter()
                    .map(|&t| {
                        let f = es.field(t, setup.mu);
                        let (s, _) = total_circulating(&f, &f.j_s).map_err(CliError::numerical("ring-observables"))?;
                        let (c, _) = total_circulating(&f, &f.j_s_conv).map_err(CliError::numerical("ring-observables"))?;
                        Ok((t, s, c))
                    })
                    .collect()
            });
            for r in rows {
                match r {
                    Ok((t, s, c)) => totals.push(vec![t.into(), s.into(), c.into()]),
                    Err(e) => failures.push(e),
                }
            }
        }
        Err(e) => failures.push(CliError::numerical("ring-observables")(e)),
    }
    finish(vec![bonds, totals], failures)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossoverPoint {
    pub sites: usize,
    pub gamma_p: f64,
    pub entropy_production: f64,
    pub joule: f64,
    pub ratio: f64,
}

pub fn solve_chain(setup: &ProbeSetup, sites: usize, gamma_p: f64) -> Result<ProbeSolution> {
    let model =
        build_probed_chain(sites, setup.t0, gamma_p, setup.t_env, setup.mu_a, setup.mu_b).map_err(CliError::numerical("lattice-model"))?;
    solve_floating(&model, &setup.options(), None).map_err(CliError::numerical("probe-solver"))
}

pub fn crossover_point(setup: &ProbeSetup, sites: usize, gamma_p: f64) -> Result<CrossoverPoint> {
    let sol = solve_chain(setup, sites, gamma_p)?;
    let entropy_production = sol.entropy_production();
    let joule = joule_entropy_rate(sol.particle[0], setup.mu_a, setup.mu_b, setup.t_env);
    Ok(CrossoverPoint { sites, gamma_p, entropy_production, joule, ratio: entropy_production / joule })
}

/// Crossover points, N-major.
pub fn crossover(setup: &ProbeSetup, sites: &[usize], pool: &ThreadPool) -> Vec<Result<CrossoverPoint>> {
    let points: Vec<(usize, f64)> = sites.iter().flat_map(|&n| setup.gamma_p.iter().map(move |&g| (n, g))).collect();
    pool.install(|| points.par_iter().map(|&(n, g)| crossover_point(setup, n, g)).collect())
}

pub fn probes(setup: &ProbeSetup, pool: &ThreadPool) -> RunOutput {
    let mut failures = Vec::new();
    let mut cross = Table::new("crossover.csv", &["N", "gamma_p", "S_dot_P", "P_over_T0", "ratio"]);
    for p in crossover(setup, &setup.sites, pool) {
        match p {
            Ok(p) => cross.push(vec![p.sites.into(), p.gamma_p.into(), p.entropy_production.into(), p.joule.into(), p.ratio.into()]),
            Err(e) => failures.push(e),
        }
    }
    let mut profile = Table::new("probe_profile.csv", &["gamma_p", "n", "mu_P", "T_P"]);
    let sols: Vec<Result<ProbeSolution>> =
        pool.install(|| setup.gamma_p.par_iter().map(|&g| solve_chain(setup, setup.profile_sites, g)).collect());
    for (g, s) in setup.gamma_p.iter().zip(sols) {
        match s {
            Ok(s) => {
                for (k, (mu, t)) in s.state.mu.iter().zip(&s.state.temperature).enumerate() {
                    profile.push(vec![(*g).into(), (k + 1).into(), (*mu).into(), (*t).into()]);
                }
            }
            Err(e) => failures.push(e),
        }
    }
    finish(vec![cross, profile], failures)
}
