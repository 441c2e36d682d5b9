//! Adaptive Gauss–Kronrod (7, 15) energy integration with breakpoints,
//! square-root substitution at band edges and mapped semi-infinite tails.
//! Integrands may be vector valued; the error criterion uses the max norm.

#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::tridiag::eigen_first_rows;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadTol {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadTol {
    fn default() -> Self {
        QuadTol { rel_tol: 1e-9, abs_tol: 1e-12, max_panels: 20_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Map {
    Linear,
    /// ε = lo + u², removing a square-root singularity at lo.
    SqrtLo,
    /// ε = hi − u², removing a square-root singularity at hi.
    SqrtHi,
    /// ε = lo + s·t/(1 − t), t ∈ [0, 1).
    TailUp,
    /// ε = hi − s·t/(1 − t), t ∈ [0, 1).
    TailDown,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub map: Map,
    /// Length scale of a tail map.
    pub scale: f64,
}

impl Segment {
    /// Range of the mapped variable.
    fn u_range(&self) -> (f64, f64) {
        match self.map {
            Map::Linear => (self.lo, self.hi),
            Map::SqrtLo | Map::SqrtHi => (0.0, (self.hi - self.lo).sqrt()),
            Map::TailUp | Map::TailDown => (0.0, 1.0),
        }
    }

    /// (ε, dε/du) at mapped coordinate u.
    #[inline]
    fn point(&self, u: f64) -> (f64, f64) {
        match self.map {
            Map::Linear => (u, 1.0),
            Map::SqrtLo => (self.lo + u * u, 2.0 * u),
            Map::SqrtHi => (self.hi - u * u, 2.0 * u),
            Map::TailUp => {
                let q = 1.0 - u;
                (self.lo + self.scale * u / q, self.scale / (q * q))
            }
            Map::TailDown => {
                let q = 1.0 - u;
                (self.hi - self.scale * u / q, self.scale / (q * q))
            }
        }
    }

    fn energy_interval(&self, a: f64, b: f64) -> (f64, f64) {
        let (x, y) = (self.point(a).0, self.point(b).0);
        (x.min(y), x.max(y))
    }
}

/// Ordered, disjoint segments covering the integration window. Every
/// breakpoint is a segment boundary.
#[derive(Debug, Clone)]
pub struct EnergyGrid {
    pub segments: Vec<Segment>,
    pub breakpoints: Vec<f64>,
    pub tol: QuadTol,
    /// Initial subdivision of each segment in its mapped variable.
    pub initial_pieces: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct GridBuilder {
    lo: f64,
    hi: f64,
    breakpoints: Vec<f64>,
    sqrt_edges: Vec<f64>,
    tail_scale: Option<f64>,
    max_width: Option<f64>,
    tol: QuadTol,
}

impl EnergyGrid {
    pub fn builder(lo: f64, hi: f64) -> GridBuilder {
        GridBuilder { lo, hi, breakpoints: Vec::new(), sqrt_edges: Vec::new(), tail_scale: None, max_width: None, tol: QuadTol::default() }
    }

    pub fn lo(&self) -> f64 {
        self.segments.first().map_or(0.0, |s| s.lo)
    }

    pub fn hi(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.hi)
    }
}

impl GridBuilder {
    pub fn breakpoints(mut self, pts: impl IntoIterator<Item = f64>) -> Self {
        self.breakpoints.extend(pts);
        self
    }

    /// Points with an integrable square-root singularity on either side.
    pub fn sqrt_edges(mut self, pts: impl IntoIterator<Item = f64>) -> Self {
        self.sqrt_edges.extend(pts);
        self
    }

    /// Extend the window to ±∞ with mapped tails of the given length scale.
    pub fn tails(mut self, scale: f64) -> Self {
        self.tail_scale = Some(scale);
        self
    }

    /// Upper bound on the width of initial linear panels.
    pub fn max_width(mut self, w: f64) -> Self {
        self.max_width = Some(w);
        self
    }

    pub fn tol(mut self, tol: QuadTol) -> Self {
        self.tol = tol;
        self
    }

    pub fn build(self) -> Result<EnergyGrid> {
        if !(self.lo < self.hi) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::InvalidArgument(format!("bad integration window [{}, {}]", self.lo, self.hi)));
        }
        let edges: Vec<f64> = self.sqrt_edges.iter().copied().filter(|&e| e >= self.lo && e <= self.hi).collect();
        let mut pts: Vec<f64> = self
            .breakpoints
            .iter()
            .chain(edges.iter())
            .copied()
            .filter(|&e| e > self.lo && e < self.hi && e.is_finite())
            .chain([self.lo, self.hi])
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * a.abs().max(b.abs()).max(1e-300));
        let is_edge = |x: f64| edges.iter().any(|&e| (e - x).abs() <= 1e-14 * e.abs().max(1e-300));
        let mut segments = Vec::new();
        let push_linear = |segments: &mut Vec<Segment>, lo: f64, hi: f64| segments.push(Segment { lo, hi, map: Map::Linear, scale: 0.0 });
        if let Some(s) = self.tail_scale {
            let inner = self.lo - s;
            segments.push(Segment { lo: f64::NEG_INFINITY, hi: inner, map: Map::TailDown, scale: s });
            if is_edge(self.lo) {
                segments.push(Segment { lo: inner, hi: self.lo, map: Map::SqrtHi, scale: 0.0 });
            } else {
                push_linear(&mut segments, inner, self.lo);
            }
        }
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            match (is_edge(a), is_edge(b)) {
                (false, false) => push_linear(&mut segments, a, b),
                (true, false) => segments.push(Segment { lo: a, hi: b, map: Map::SqrtLo, scale: 0.0 }),
                (false, true) => segments.push(Segment { lo: a, hi: b, map: Map::SqrtHi, scale: 0.0 }),
                (true, true) => {
                    let m = 0.5 * (a + b);
                    segments.push(Segment { lo: a, hi: m, map: Map::SqrtLo, scale: 0.0 });
                    segments.push(Segment { lo: m, hi: b, map: Map::SqrtHi, scale: 0.0 });
                }
            }
        }
        if let Some(s) = self.tail_scale {
            let outer = self.hi + s;
            if is_edge(self.hi) {
                segments.push(Segment { lo: self.hi, hi: outer, map: Map::SqrtLo, scale: 0.0 });
            } else {
                push_linear(&mut segments, self.hi, outer);
            }
            segments.push(Segment { lo: outer, hi: f64::INFINITY, map: Map::TailUp, scale: s });
        }
        let initial_pieces = segments
            .iter()
            .map(|s| match (self.max_width, s.map) {
                (Some(w), Map::Linear | Map::SqrtLo | Map::SqrtHi) => ((s.hi - s.lo) / w).ceil().max(1.0) as usize,
                _ => 1,
            })
            .collect();
        Ok(EnergyGrid { segments, breakpoints: pts, tol: self.tol, initial_pieces })
    }
}

#[derive(Debug, Clone)]
pub struct Integral {
    pub value: Vec<f64>,
    pub error: Vec<f64>,
    pub panels: usize,
}

/// Fixed composite rule: Kronrod nodes of the converged panels.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Panel {
    seg: usize,
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: Vec<f64>,
    worst: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.worst.total_cmp(&other.worst).then_with(|| other.seg.cmp(&self.seg)).then_with(|| other.a.total_cmp(&self.a))
    }
}

fn gk15<F: FnMut(f64, &mut [f64])>(seg: &Segment, a: f64, b: f64, dim: usize, f: &mut F, buf: &mut [Vec<f64>; 15]) -> (Vec<f64>, Vec<f64>) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = 0;
    for (j, &x) in XGK.iter().enumerate() {
        let xs: &[f64] = if j < 7 { &[-1.0, 1.0] } else { &[1.0] };
        for &sgn in xs {
            let u = c + sgn * h * x;
            let (e, jac) = seg.point(u);
            let row = &mut buf[k];
            row.iter_mut().for_each(|x| *x = 0.0);
            if jac != 0.0 && e.is_finite() {
                f(e, row);
                row.iter_mut().for_each(|x| *x *= jac);
            }
            k += 1;
        }
    }
    // buf layout: pairs (−x_j, +x_j) for j = 0..7, then the centre.
    let mut value = vec![0.0; dim];
    let mut error = vec![0.0; dim];
    for d in 0..dim {
        let fc = buf[14][d];
        let mut resk = WGK[7] * fc;
        let mut resg = WG[3] * fc;
        let mut resabs = WGK[7] * fc.abs();
        for j in 0..7 {
            let s = buf[2 * j][d] + buf[2 * j + 1][d];
            resk += WGK[j] * s;
            resabs += WGK[j] * (buf[2 * j][d].abs() + buf[2 * j + 1][d].abs());
            if j % 2 == 1 {
                resg += WG[j / 2] * s;
            }
        }
        let mean = 0.5 * resk;
        let mut resasc = WGK[7] * (fc - mean).abs();
        for j in 0..7 {
            resasc += WGK[j] * ((buf[2 * j][d] - mean).abs() + (buf[2 * j + 1][d] - mean).abs());
        }
        let (resk, resabs, resasc) = (resk * h, resabs * h.abs(), resasc * h.abs());
        let mut err = (resk - resg * h).abs();
        if resasc != 0.0 && err != 0.0 {
            err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
        }
        if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
            err = err.max(50.0 * f64::EPSILON * resabs);
        }
        value[d] = resk;
        error[d] = err;
    }
    (value, error)
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn refine<F: FnMut(f64, &mut [f64])>(grid: &EnergyGrid, dim: usize, f: &mut F) -> Result<Vec<Panel>> {
    let mut buf: [Vec<f64>; 15] = std::array::from_fn(|_| vec![0.0; dim]);
    let mut heap = BinaryHeap::new();
    let mut done = Vec::new();
    for (si, seg) in grid.segments.iter().enumerate() {
        let (u0, u1) = seg.u_range();
        let k = grid.initial_pieces[si];
        for p in 0..k {
            let a = u0 + (u1 - u0) * p as f64 / k as f64;
            let b = if p + 1 == k { u1 } else { u0 + (u1 - u0) * (p + 1) as f64 / k as f64 };
            let (value, error) = gk15(seg, a, b, dim, f, &mut buf);
            let worst = norm_inf(&error);
            heap.push(Panel { seg: si, a, b, value, error, worst });
        }
    }
    loop {
        let n_panels = heap.len() + done.len();
        let mut total = vec![0.0; dim];
        let mut errs = vec![0.0; dim];
        for p in heap.iter().chain(done.iter()) {
            for d in 0..dim {
                total[d] += p.value[d];
                errs[d] += p.error[d];
            }
        }
        let tol = grid.tol.abs_tol.max(grid.tol.rel_tol * norm_inf(&total));
        let err = norm_inf(&errs);
        if err <= tol {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let seg = &grid.segments[worst.seg];
        let m = 0.5 * (worst.a + worst.b);
        if n_panels >= grid.tol.max_panels
            || !(m > worst.a && m < worst.b)
            || (worst.b - worst.a) <= 1e-13 * worst.a.abs().max(worst.b.abs())
        {
            let (lo, hi) = seg.energy_interval(worst.a, worst.b);
            if n_panels >= grid.tol.max_panels {
                return Err(Error::Quadrature { lo, hi, error: worst.worst, total_error: err, tolerance: tol });
            }
            done.push(worst);
            continue;
        }
        for (a, b) in [(worst.a, m), (m, worst.b)] {
            let (value, error) = gk15(seg, a, b, dim, f, &mut buf);
            let w = norm_inf(&error);
            heap.push(Panel { seg: worst.seg, a, b, value, error, worst: w });
        }
    }
    let mut panels: Vec<Panel> = heap.into_vec();
    panels.extend(done);
    panels.sort_by(|p, q| p.seg.cmp(&q.seg).then(p.a.total_cmp(&q.a)));
    Ok(panels)
}

/// Adaptive integral of a vector-valued integrand `f(ε, out)` over the grid.
pub fn integrate_vec<F: FnMut(f64, &mut [f64])>(grid: &EnergyGrid, dim: usize, mut f: F) -> Result<Integral> {
    let panels = refine(grid, dim, &mut f)?;
    let mut value = vec![0.0; dim];
    let mut error = vec![0.0; dim];
    for p in &panels {
        for d in 0..dim {
            value[d] += p.value[d];
            error[d] += p.error[d];
        }
    }
    Ok(Integral { value, error, panels: panels.len() })
}

/// Adaptive integral of a scalar integrand; returns (value, error estimate).
pub fn integrate<F: FnMut(f64) -> f64>(grid: &EnergyGrid, mut f: F) -> Result<(f64, f64)> {
    let r = integrate_vec(grid, 1, |e, out| out[0] = f(e))?;
    Ok((r.value[0], r.error[0]))
}

/// Builds a fixed composite rule adapted to the vector integrand `f`: the
/// 15 Kronrod nodes of every converged panel, ordered by energy.
pub fn adapted_rule<F: FnMut(f64, &mut [f64])>(grid: &EnergyGrid, dim: usize, mut f: F) -> Result<Rule> {
    let panels = refine(grid, dim, &mut f)?;
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(panels.len() * 15);
    for p in &panels {
        let seg = &grid.segments[p.seg];
        let c = 0.5 * (p.a + p.b);
        let h = 0.5 * (p.b - p.a);
        for j in 0..8 {
            let xs: &[f64] = if j < 7 { &[-1.0, 1.0] } else { &[1.0] };
            for &sgn in xs {
                let (e, jac) = seg.point(c + sgn * h * XGK[j]);
                if e.is_finite() && jac != 0.0 {
                    pts.push((e, WGK[j] * h * jac));
                }
            }
        }
    }
    pts.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(Rule { nodes: pts.iter().map(|p| p.0).collect(), weights: pts.iter().map(|p| p.1).collect() })
}

/// n-point Gauss–Legendre rule on [a, b].
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<Rule> {
    let diag = vec![0.0; n];
    let off: Vec<f64> = (1..n).map(|k| k as f64 / ((4 * k * k - 1) as f64).sqrt()).collect();
    let pe = eigen_first_rows(&diag, &off, 1)?;
    let mut pts: Vec<(f64, f64)> = pe.values.iter().zip(&pe.rows[0]).map(|(&x, &z)| (x, 2.0 * z * z)).collect();
    pts.sort_by(|x, y| x.0.total_cmp(&y.0));
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    Ok(Rule { nodes: pts.iter().map(|p| c + h * p.0).collect(), weights: pts.iter().map(|p| h * p.1).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{entropy, fp};
    use std::f64::consts::PI;

    #[test]
    fn polynomial_exact() {
        let g = EnergyGrid::builder(-1.0, 2.0).build().unwrap();
        let (v, _) = integrate(&g, |x| 3.0 * x * x - x).unwrap();
        assert!((v - 7.5).abs() < 1e-13);
    }

    #[test]
    fn fermi_derivative_integrates_to_one() {
        let t = 0.013;
        let g = EnergyGrid::builder(-1.0, 1.0).breakpoints([0.2]).tails(1.0).build().unwrap();
        let (v, e) = integrate(&g, |x| fp((x - 0.2) / t) / t).unwrap();
        assert!((v - 1.0).abs() < 1e-10, "{v} ± {e}");
    }

    #[test]
    fn sommerfeld_entropy_integral() {
        for &t in &[1e-3, 0.05, 2.0] {
            let g = EnergyGrid::builder(-40.0 * t, 40.0 * t).breakpoints([0.0]).tails(t).build().unwrap();
            let (v, _) = integrate(&g, |x| entropy(x / t)).unwrap();
            // High-resolution trapezoid oracle on [−60T, 60T].
            let n = 600_000;
            let h = 120.0 * t / n as f64;
            let trap: f64 = (0..=n)
                .map(|k| {
                    let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                    w * entropy((-60.0 * t + k as f64 * h) / t)
                })
                .sum::<f64>()
                * h;
            assert!((v - PI * PI * t / 3.0).abs() < 1e-9 * t);
            assert!((trap - PI * PI * t / 3.0).abs() < 1e-9 * t);
        }
    }

    #[test]
    fn band_edge_square_root() {
        // ∫_{-2}^{2} √(4−ε²) dε = 2π.
        let g = EnergyGrid::builder(-2.0, 2.0).sqrt_edges([-2.0, 2.0]).build().unwrap();
        let r = integrate_vec(&g, 1, |e, o| o[0] = (4.0 - e * e).max(0.0).sqrt()).unwrap();
        assert!((r.value[0] - 2.0 * PI).abs() < 1e-12);
        assert!(r.panels < 10);
    }

    #[test]
    fn tails_with_edges() {
        // ∫ over the real line of the band density of a chain outside the band is
        // zero; add a Lorentzian to test the tails: ∫ γ/(π(ε²+γ²)) = 1.
        let g = EnergyGrid::builder(-2.0, 2.0).sqrt_edges([-2.0, 2.0]).tails(1.0).build().unwrap();
        let (v, _) = integrate(&g, |e| 0.1 / (PI * (e * e + 0.01))).unwrap();
        assert!((v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn grid_invariants() {
        let g = EnergyGrid::builder(-3.0, 3.0).breakpoints([0.5, -1.0, 0.5]).sqrt_edges([-2.0, 2.0]).tails(1.0).build().unwrap();
        for w in g.segments.windows(2) {
            assert_eq!(w[0].hi, w[1].lo);
        }
        for b in [-3.0, -2.0, -1.0, 0.5, 2.0, 3.0] {
            assert!(g.segments.iter().any(|s| s.lo == b));
        }
        assert_eq!(g.lo(), f64::NEG_INFINITY);
    }

    #[test]
    fn nonconvergence_reports_worst_panel() {
        let tol = QuadTol { rel_tol: 1e-14, abs_tol: 0.0, max_panels: 20 };
        let g = EnergyGrid::builder(0.0, 1.0).tol(tol).build().unwrap();
        match integrate(&g, |x| (1.0 / (x + 1e-9)).sin()) {
            Err(Error::Quadrature { lo, hi, .. }) => assert!(lo >= 0.0 && hi <= 1.0),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn adapted_rule_reproduces_integrals() {
        let g = EnergyGrid::builder(-1.0, 1.0).breakpoints([0.0]).max_width(0.1).build().unwrap();
        let rule = adapted_rule(&g, 1, |e, o| o[0] = (3.0 * e).cos()).unwrap();
        let v: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * (3.0 * x).cos()).sum();
        assert!((v - 2.0 * 3f64.sin() / 3.0).abs() < 1e-13);
        assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn gauss_legendre_exactness() {
        let r = gauss_legendre(12, 1.0, 1.5).unwrap();
        let v: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(23)).sum();
        let exact = (1.5f64.powi(24) - 1.0) / 24.0;
        assert!((v - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn halving_tolerance_stays_within_error() {
        let t = 0.02;
        let mk = |rel| {
            EnergyGrid::builder(-1.0, 1.0)
                .breakpoints([0.1])
                .tol(QuadTol { rel_tol: rel, abs_tol: 1e-15, max_panels: 10_000 })
                .build()
                .unwrap()
        };
        let f = |e: f64| entropy((e - 0.1) / t) * (1.0 + e * e).sqrt();
        let (a, ea) = integrate(&mk(1e-6), f).unwrap();
        let (b, _) = integrate(&mk(5e-7), f).unwrap();
        assert!((a - b).abs() <= ea.max(1e-15));
    }
}
