//! Fermi-Dirac statistics of a reservoir and the per-channel weights
//! f, ε·f, ω and s. All functions are evaluated in overflow-free form in the
//! reduced variable x = (ε − μ)/T.

/// ln(1 + eˣ) without overflow or cancellation.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distribution {
    pub temperature: f64,
    pub mu: f64,
}

impl Distribution {
    pub fn new(temperature: f64, mu: f64) -> Self {
        Distribution { temperature, mu }
    }

    #[inline]
    pub fn x(&self, e: f64) -> f64 {
        (e - self.mu) / self.temperature
    }

    #[inline]
    pub fn f(&self, e: f64) -> f64 {
        fermi(self.x(e))
    }

    #[inline]
    pub fn p(&self, e: f64) -> f64 {
        fermi(-self.x(e))
    }

    #[inline]
    pub fn ln_p(&self, e: f64) -> f64 {
        -softplus(-self.x(e))
    }

    /// Grand-potential contribution of one orbital, ω = T ln p ≤ 0.
    #[inline]
    pub fn omega(&self, e: f64) -> f64 {
        self.temperature * self.ln_p(e)
    }

    /// Entropy per orbital, s = −[f ln f + p ln p] ≥ 0.
    #[inline]
    pub fn s(&self, e: f64) -> f64 {
        entropy(self.x(e))
    }

    /// ∂f/∂μ = f p / T.
    #[inline]
    pub fn df_dmu(&self, e: f64) -> f64 {
        fp(self.x(e)) / self.temperature
    }

    /// ∂f/∂T = f p x / T.
    #[inline]
    pub fn df_dt(&self, e: f64) -> f64 {
        let x = self.x(e);
        fp(x) * x / self.temperature
    }

    pub fn weight(&self, channel: Channel, e: f64) -> f64 {
        match channel {
            Channel::Particle => self.f(e),
            Channel::Energy => e * self.f(e),
            Channel::FreeEnergy => self.omega(e),
            Channel::Entropy => self.s(e),
        }
    }
}

#[inline]
pub fn fermi(x: f64) -> f64 {
    if x > 0.0 {
        let q = (-x).exp();
        q / (1.0 + q)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// f(x)·p(x) = f(x)·f(−x) ∈ [0, 1/4].
#[inline]
pub fn fp(x: f64) -> f64 {
    let q = (-x.abs()).exp();
    q / ((1.0 + q) * (1.0 + q))
}

/// s(x) = −[f ln f + p ln p], written as |x| f(|x|) + ln(1 + e^{−|x|}).
#[inline]
pub fn entropy(x: f64) -> f64 {
    let a = x.abs();
    let q = (-a).exp();
    a * q / (1.0 + q) + q.ln_1p()
}

/// The four current channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    /// Weight f: particle (lesser) channel.
    Particle,
    /// Weight ε f: energy channel.
    Energy,
    /// Weight ω = T ln p: free-energy channel.
    FreeEnergy,
    /// Weight s: entropy channel.
    Entropy,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::Particle, Channel::Energy, Channel::FreeEnergy, Channel::Entropy];

    pub fn index(self) -> usize {
        match self {
            Channel::Particle => 0,
            Channel::Energy => 1,
            Channel::FreeEnergy => 2,
            Channel::Entropy => 3,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn stable_far_tails() {
        let d = Distribution::new(1.0, 0.0);
        for &e in &[-1e4, -700.0, 700.0, 1e4] {
            assert!(d.f(e).is_finite() && d.s(e).is_finite() && d.omega(e).is_finite());
            assert!(d.s(e) < 1e-290);
        }
        assert_eq!(d.ln_p(-1e4), -1e4);
        assert_eq!(d.f(-1e4), 1.0);
    }

    #[test]
    fn half_filling_values() {
        let d = Distribution::new(0.3, 0.2);
        assert_eq!(d.f(0.2), 0.5);
        assert!((d.s(0.2) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((d.omega(0.2) + 0.3 * std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn df_dmu_matches_central_difference() {
        let (t, mu, h) = (0.1, 0.3, 1e-6);
        for &e in &[0.0, 0.25, 0.3, 0.37, 0.6] {
            let d = Distribution::new(t, mu);
            let num = (Distribution::new(t, mu + h).f(e) - Distribution::new(t, mu - h).f(e)) / (2.0 * h);
            assert!((d.df_dmu(e) - num).abs() <= 1e-6 * num.abs());
            let numt = (Distribution::new(t + h, mu).f(e) - Distribution::new(t - h, mu).f(e)) / (2.0 * h);
            assert!((d.df_dt(e) - numt).abs() <= 1e-6 * numt.abs().max(1e-8));
        }
    }

    proptest! {
        #[test]
        fn entropy_identity(x in -30.0f64..30.0, t in 1e-3f64..10.0) {
            let d = Distribution::new(t, 0.0);
            let e = x * t;
            let lhs = t * d.s(e);
            let rhs = e * d.f(e) - t * d.ln_p(e);
            let scale = (e * d.f(e)).abs().max((t * d.ln_p(e)).abs()).max(lhs);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
        }

        #[test]
        fn omega_is_t_ln_p(x in -700.0f64..700.0, t in 1e-3f64..10.0) {
            let d = Distribution::new(t, 0.1);
            let e = 0.1 + x * t;
            let direct = t * (-d.f(e)).ln_1p();
            if d.f(e) < 0.5 {
                prop_assert!((d.omega(e) - direct).abs() <= 1e-12 * direct.abs().max(1e-300));
            }
        }

        #[test]
        fn bounds(x in -1e4f64..1e4) {
            let f = fermi(x);
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert!(entropy(x) >= 0.0);
            prop_assert!(-softplus(-x) <= 0.0);
            prop_assert!((0.0..=0.25).contains(&fp(x)));
        }

        #[test]
        fn entropy_matches_definition(x in -20.0f64..20.0) {
            let f = fermi(x);
            let p = fermi(-x);
            let direct = -(f * f.ln() + p * p.ln());
            prop_assert!((entropy(x) - direct).abs() <= 1e-13 * direct.max(1e-300) + 1e-15);
        }
    }
}
