//! Exact free-fermion statics and dynamics on finite composites, used as a
//! brute-force check of the Green's-function results.
//!
//! Correlations follow C_ij = ⟨c_i† c_j⟩, so C = f(h)ᵀ and ⟨H⟩ = Σ h_ij C_ij.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::stats::{fermi, softplus};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Occupation of a level at energy e; T = 0 fills levels below μ and
/// half-fills a level exactly at μ.
fn occupation(e: f64, temperature: f64, mu: f64) -> f64 {
    if temperature > 0.0 {
        fermi((e - mu) / temperature)
    } else if e < mu {
        1.0
    } else if e > mu {
        0.0
    } else {
        0.5
    }
}

fn grand_potential_term(e: f64, temperature: f64, mu: f64) -> f64 {
    if temperature > 0.0 {
        -temperature * softplus(-(e - mu) / temperature)
    } else {
        (e - mu).min(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    pub c: DMatrix<Complex64>,
}

impl CorrelationMatrix {
    pub fn dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn particle_number(&self) -> f64 {
        self.c.trace().re
    }

    /// Σ_ij h_ij C_ij.
    pub fn expectation(&self, h: &DMatrix<Complex64>) -> f64 {
        h.iter().zip(self.c.iter()).map(|(a, b)| a * b).sum::<Complex64>().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.c - self.c.adjoint()).camax()
    }

    /// Eigenvalues of C, ascending.
    pub fn occupations(&self) -> Vec<f64> {
        let mut v: Vec<f64> = SymmetricEigen::new(self.c.clone()).eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Particle current i → j along the bond of `h`, in units of 1/h:
    /// 2π · 2 Im(h_ji ⟨c_j† c_i⟩).
    pub fn bond_current(&self, h: &DMatrix<Complex64>, i: usize, j: usize) -> f64 {
        TWO_PI * 2.0 * (h[(j, i)] * self.c[(j, i)]).im
    }
}

fn check_hermitian(h: &DMatrix<Complex64>) -> Result<()> {
    if !h.is_square() || h.nrows() == 0 {
        return Err(Error::InvalidArgument("single-particle matrix must be square and nonempty".into()));
    }
    let scale = h.camax().max(1.0);
    if (h - h.adjoint()).camax() > 1e-12 * scale {
        return Err(Error::InvalidArgument("single-particle matrix is not Hermitian".into()));
    }
    Ok(())
}

/// Grand-canonical C = f(h)ᵀ and Ω = −T Σ_ν ln(1 + e^{−(ε_ν − μ)/T}).
pub fn equilibrium_correlations(h: &DMatrix<Complex64>, temperature: f64, mu: f64) -> Result<(CorrelationMatrix, f64)> {
    check_hermitian(h)?;
    if !(temperature >= 0.0) {
        return Err(Error::InvalidArgument(format!("temperature must be non-negative, got {temperature}")));
    }
    let se = SymmetricEigen::new(h.clone());
    let n = h.nrows();
    let mut c = DMatrix::<Complex64>::zeros(n, n);
    let mut omega = 0.0;
    for (nu, &e) in se.eigenvalues.iter().enumerate() {
        omega += grand_potential_term(e, temperature, mu);
        let f = occupation(e, temperature, mu);
        if f == 0.0 {
            continue;
        }
        let v = se.eigenvectors.column(nu);
        for j in 0..n {
            for i in 0..n {
                c[(i, j)] += v[i].conj() * v[j] * f;
            }
        }
    }
    Ok((CorrelationMatrix { c }, omega))
}

/// A real symmetric tridiagonal single-particle Hamiltonian h(t).
pub trait TridiagonalSchedule {
    fn dim(&self) -> usize;
    /// Fills the diagonal (length dim) and the off-diagonal (length dim − 1).
    fn fill(&self, t: f64, diag: &mut [f64], off: &mut [f64]);
    /// Largest |hopping| in the reservoir, for the reflection-time estimate.
    fn reservoir_hopping(&self) -> f64;
    /// Number of reservoir sites.
    fn reservoir_sites(&self) -> usize;
}

/// A level (site 0) coupled by V to an M-site chain, with ε_s ramped
/// linearly from `eps_start` to `eps_end` over [0, ramp_time] and held
/// afterwards.
#[derive(Debug, Clone, Copy)]
pub struct LevelRamp {
    pub eps_start: f64,
    pub eps_end: f64,
    pub v: f64,
    pub t0: f64,
    pub sites: usize,
    pub ramp_time: f64,
}

impl LevelRamp {
    pub fn level(&self, t: f64) -> f64 {
        if self.ramp_time <= 0.0 || t >= self.ramp_time {
            return self.eps_end;
        }
        self.eps_start + (self.eps_end - self.eps_start) * (t / self.ramp_time).max(0.0)
    }

    pub fn hamiltonian(&self, t: f64) -> DMatrix<Complex64> {
        let n = self.dim();
        let (mut d, mut o) = (vec![0.0; n], vec![0.0; n - 1]);
        self.fill(t, &mut d, &mut o);
        tridiagonal_dense(&d, &o)
    }
}

impl TridiagonalSchedule for LevelRamp {
    fn dim(&self) -> usize {
        self.sites + 1
    }

    fn fill(&self, t: f64, diag: &mut [f64], off: &mut [f64]) {
        diag.fill(0.0);
        diag[0] = self.level(t);
        off.fill(self.t0);
        off[0] = self.v;
    }

    fn reservoir_hopping(&self) -> f64 {
        self.t0.abs()
    }

    fn reservoir_sites(&self) -> usize {
        self.sites
    }
}

pub fn tridiagonal_dense(diag: &[f64], off: &[f64]) -> DMatrix<Complex64> {
    let n = diag.len();
    let mut h = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = diag[i].into();
    }
    for (i, &e) in off.iter().enumerate() {
        h[(i, i + 1)] = e.into();
        h[(i + 1, i)] = e.into();
    }
    h
}

/// C = conj(B) Bᵀ kept as the factor B = V √λ, one column per occupied
/// eigenstate. Site-major storage: entry (site k, column c) sits at
/// k · cols + c, real and imaginary parts split.
#[derive(Debug, Clone)]
pub struct FactorizedState {
    pub n: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl FactorizedState {
    /// Equilibrium state of h, dropping eigenstates with occupation below
    /// `cutoff`.
    pub fn equilibrium(h: &DMatrix<Complex64>, temperature: f64, mu: f64, cutoff: f64) -> Result<Self> {
        check_hermitian(h)?;
        let se = SymmetricEigen::new(h.clone());
        let n = h.nrows();
        let keep: Vec<(usize, f64)> =
            se.eigenvalues.iter().enumerate().map(|(nu, &e)| (nu, occupation(e, temperature, mu))).filter(|&(_, f)| f > cutoff).collect();
        let cols = keep.len();
        let (mut re, mut im) = (vec![0.0; n * cols], vec![0.0; n * cols]);
        for (c, &(nu, f)) in keep.iter().enumerate() {
            let w = f.sqrt();
            for k in 0..n {
                let z = se.eigenvectors[(k, nu)] * w;
                re[k * cols + c] = z.re;
                im[k * cols + c] = z.im;
            }
        }
        Ok(FactorizedState { n, cols, re, im })
    }

    pub fn density(&self, k: usize) -> f64 {
        let r = &self.re[k * self.cols..(k + 1) * self.cols];
        let i = &self.im[k * self.cols..(k + 1) * self.cols];
        r.iter().zip(i).map(|(a, b)| a * a + b * b).sum()
    }

    /// ⟨c_i† c_j⟩ = Σ_c conj(B_ic) B_jc.
    pub fn correlation(&self, i: usize, j: usize) -> Complex64 {
        let (ri, ii) = (&self.re[i * self.cols..(i + 1) * self.cols], &self.im[i * self.cols..(i + 1) * self.cols]);
        let (rj, ij) = (&self.re[j * self.cols..(j + 1) * self.cols], &self.im[j * self.cols..(j + 1) * self.cols]);
        let mut z = Complex64::new(0.0, 0.0);
        for c in 0..self.cols {
            z += Complex64::new(ri[c], -ii[c]) * Complex64::new(rj[c], ij[c]);
        }
        z
    }

    pub fn to_correlation(&self) -> CorrelationMatrix {
        CorrelationMatrix { c: DMatrix::from_fn(self.n, self.n, |i, j| self.correlation(i, j)) }
    }

    /// ⟨H⟩ for a real tridiagonal h.
    pub fn tridiagonal_energy(&self, diag: &[f64], off: &[f64]) -> f64 {
        let mut e: f64 = diag.iter().enumerate().map(|(k, d)| d * self.density(k)).sum();
        for (k, &t) in off.iter().enumerate() {
            e += 2.0 * t * self.correlation(k, k + 1).re;
        }
        e
    }
}

/// Warning raised when a ramp outlasts the time for reservoir excitations to
/// return from the far end of the truncated chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionWarning {
    pub ramp_time: f64,
    pub reflection_time: f64,
    pub suggested_sites: usize,
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub state: FactorizedState,
    pub steps: usize,
    pub warning: Option<ReflectionWarning>,
}

/// Propagates B over [0, duration] with Cayley steps
/// (1 + i dt h/2) B' = (1 − i dt h/2) B, h evaluated at the step midpoint.
/// Unitary to rounding and second order in dt.
pub fn evolve_correlations<S: TridiagonalSchedule>(schedule: &S, initial: &FactorizedState, duration: f64, dt: f64) -> Result<Evolution> {
    let n = schedule.dim();
    if initial.n != n {
        return Err(Error::InvalidArgument(format!("state has {} sites, schedule {}", initial.n, n)));
    }
    if !(dt > 0.0) || !(duration >= 0.0) {
        return Err(Error::InvalidArgument("time step must be positive and duration non-negative".into()));
    }
    let reflection_time = schedule.reservoir_sites() as f64 / (2.0 * schedule.reservoir_hopping());
    let warning = (duration > reflection_time).then(|| {
        let suggested_sites = (2.0 * schedule.reservoir_hopping() * duration * 1.25).ceil() as usize;
        log::warn!(
            "ramp time {duration} exceeds reflection time {reflection_time:.1} of the truncated reservoir; use at least {suggested_sites} sites"
        );
        ReflectionWarning { ramp_time: duration, reflection_time, suggested_sites }
    });
    let steps = (duration / dt).ceil() as usize;
    let h = if steps > 0 { duration / steps as f64 } else { 0.0 };
    let mut st = initial.clone();
    let mut stepper = CayleyStepper::new(n, st.cols);
    let (mut diag, mut off) = (vec![0.0; n], vec![0.0; n.saturating_sub(1)]);
    for k in 0..steps {
        schedule.fill((k as f64 + 0.5) * h, &mut diag, &mut off);
        stepper.step(&mut st, &diag, &off, h);
    }
    Ok(Evolution { state: st, steps, warning })
}

struct CayleyStepper {
    // Thomas coefficients: y_k = (r_k − l_k y_{k−1}) / m_k, x_k = y_k − u_k x_{k+1}.
    inv_m: Vec<Complex64>,
    l: Vec<Complex64>,
    u: Vec<Complex64>,
    rhs_re: Vec<f64>,
    rhs_im: Vec<f64>,
}

impl CayleyStepper {
    fn new(n: usize, cols: usize) -> Self {
        let z = Complex64::new(0.0, 0.0);
        CayleyStepper { inv_m: vec![z; n], l: vec![z; n], u: vec![z; n], rhs_re: vec![0.0; n * cols], rhs_im: vec![0.0; n * cols] }
    }

    fn step(&mut self, st: &mut FactorizedState, d: &[f64], e: &[f64], dt: f64) {
        let n = st.n;
        let cols = st.cols;
        let a = 0.5 * dt;
        let i = Complex64::i();
        // Factorize 1 + i a h.
        for k in 0..n {
            let b = Complex64::new(1.0, a * d[k]);
            self.l[k] = if k > 0 { i * (a * e[k - 1]) } else { Complex64::new(0.0, 0.0) };
            let m = if k > 0 { b - self.l[k] * self.u[k - 1] } else { b };
            self.inv_m[k] = 1.0 / m;
            self.u[k] = if k + 1 < n { i * (a * e[k]) * self.inv_m[k] } else { Complex64::new(0.0, 0.0) };
        }
        // Right-hand side (1 − i a h) B and forward sweep, row by row.
        for k in 0..n {
            let (rr, ri) = (&mut self.rhs_re[k * cols..(k + 1) * cols], &mut self.rhs_im[k * cols..(k + 1) * cols]);
            let (br, bi) = (&st.re[k * cols..(k + 1) * cols], &st.im[k * cols..(k + 1) * cols]);
            // (hB)_k = d_k B_k + e_{k−1} B_{k−1} + e_k B_{k+1}; rhs = B − i a hB.
            let dk = a * d[k];
            for c in 0..cols {
                rr[c] = br[c] + dk * bi[c];
                ri[c] = bi[c] - dk * br[c];
            }
            if k > 0 {
                let w = a * e[k - 1];
                let (pr, pi) = (&st.re[(k - 1) * cols..k * cols], &st.im[(k - 1) * cols..k * cols]);
                for c in 0..cols {
                    rr[c] += w * pi[c];
                    ri[c] -= w * pr[c];
                }
            }
            if k + 1 < n {
                let w = a * e[k];
                let (nr, ni) = (&st.re[(k + 1) * cols..(k + 2) * cols], &st.im[(k + 1) * cols..(k + 2) * cols]);
                for c in 0..cols {
                    rr[c] += w * ni[c];
                    ri[c] -= w * nr[c];
                }
            }
        }
        for k in 0..n {
            let (lr, li) = (self.l[k].re, self.l[k].im);
            let (mr, mi) = (self.inv_m[k].re, self.inv_m[k].im);
            let (head_re, cur_re) = self.rhs_re.split_at_mut(k * cols);
            let (head_im, cur_im) = self.rhs_im.split_at_mut(k * cols);
            let (cr, ci) = (&mut cur_re[..cols], &mut cur_im[..cols]);
            if k > 0 {
                let (pr, pi) = (&head_re[(k - 1) * cols..], &head_im[(k - 1) * cols..]);
                for c in 0..cols {
                    cr[c] -= lr * pr[c] - li * pi[c];
                    ci[c] -= lr * pi[c] + li * pr[c];
                }
            }
            for c in 0..cols {
                let (x, y) = (cr[c], ci[c]);
                cr[c] = x * mr - y * mi;
                ci[c] = x * mi + y * mr;
            }
        }
        // Back substitution into the state.
        for k in (0..n).rev() {
            let (ur, ui) = (self.u[k].re, self.u[k].im);
            let (yr, yi) = (&self.rhs_re[k * cols..(k + 1) * cols], &self.rhs_im[k * cols..(k + 1) * cols]);
            let (head_re, tail_re) = st.re.split_at_mut((k + 1) * cols);
            let (head_im, tail_im) = st.im.split_at_mut((k + 1) * cols);
            let (xr, xi) = (&mut head_re[k * cols..], &mut head_im[k * cols..]);
            xr.copy_from_slice(yr);
            xi.copy_from_slice(yi);
            if k + 1 < n {
                let (nr, ni) = (&tail_re[..cols], &tail_im[..cols]);
                for c in 0..cols {
                    xr[c] -= ur * nr[c] - ui * ni[c];
                    xi[c] -= ur * ni[c] + ui * nr[c];
                }
            }
        }
    }
}

/// Reservoir observables of the level-plus-chain composite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReservoirSnapshot {
    pub n_r: f64,
    /// ⟨H_R⟩ + ⟨H_SR⟩/2.
    pub e_r: f64,
    pub n_d: f64,
}

pub fn reservoir_snapshot(st: &FactorizedState, ramp: &LevelRamp) -> ReservoirSnapshot {
    let n_d = st.density(0);
    let n_r: f64 = (1..st.n).map(|k| st.density(k)).sum();
    let mut e_r = ramp.v * st.correlation(0, 1).re;
    for k in 1..st.n - 1 {
        e_r += 2.0 * ramp.t0 * st.correlation(k, k + 1).re;
    }
    ReservoirSnapshot { n_r, e_r, n_d }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RampResult {
    pub d_n_r: f64,
    pub d_e_r: f64,
    pub warning: Option<ReflectionWarning>,
}

/// ΔN_R and ΔE_R of a linear ramp started from the grand-canonical state of
/// the initial composite.
pub fn slow_ramp(ramp: &LevelRamp, temperature: f64, mu: f64, dt: f64) -> Result<RampResult> {
    let h0 = ramp.hamiltonian(0.0);
    let st0 = FactorizedState::equilibrium(&h0, temperature, mu, 1e-16)?;
    let before = reservoir_snapshot(&st0, ramp);
    let ev = evolve_correlations(ramp, &st0, ramp.ramp_time, dt)?;
    let after = reservoir_snapshot(&ev.state, ramp);
    Ok(RampResult { d_n_r: after.n_r - before.n_r, d_e_r: after.e_r - before.e_r, warning: ev.warning })
}

/// Grand potential held by the reservoir of a level coupled by V to an
/// M-site chain: Σ_ν ω(ε_ν) (1 − |ψ_ν(level)|²). Differences of this
/// quantity give ΔΩ_R independently of any energy integral.
pub fn reservoir_grand_potential(eps_s: f64, v: f64, t0: f64, sites: usize, temperature: f64, mu: f64) -> Result<f64> {
    let mut diag = vec![0.0; sites + 1];
    diag[0] = eps_s;
    let mut off = vec![t0; sites];
    off[0] = v;
    let pe = crate::tridiag::eigen_first_rows(&diag, &off, 1)?;
    Ok(pe.values.iter().zip(&pe.rows[0]).map(|(&e, a)| grand_potential_term(e, temperature, mu) * (1.0 - a * a)).sum())
}
