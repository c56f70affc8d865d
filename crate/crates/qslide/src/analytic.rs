//! Closed-form oracle for the launch chain.
//!
//! Everything here is analytic: Krawtchouk polynomials and their binomial
//! weights (the eigenbasis of the engineered chains), the exact walker
//! amplitude on the linear-field chain, the launch momentum law theta(t,a),
//! the large-N Gaussian packet parameters, and the Gaussian-weighted widget
//! transmission integrals. The simulator modules are tested against these
//! expressions, never the other way around.
//!
//! Conventions: the field chain has couplings `sqrt(n(N+1-n))` and on-site
//! fields `a*n`; its period is `2*b*pi` with `b = 1/sqrt(a^2+4)`. A packet
//! with per-site phase `e^{i*theta*r}` has momentum `theta`, negative for
//! motion toward larger site index.

use std::f64::consts::PI;

use num_complex::Complex64;
use statrs::function::gamma::ln_gamma;

use crate::error::{QslideError, Result};
use crate::quad;

/// Wrap an angle to (-pi, pi].
pub fn wrap_phase(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut w = x.rem_euclid(two_pi);
    if w > PI {
        w -= two_pi;
    }
    w
}

/// ln binom(n, k) via log-gamma; exact enough for n in the thousands.
fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Parameters (degree N, success probability p) shared by the Krawtchouk
/// polynomials, their weights, and the integer-spectrum chain.
#[derive(Debug, Clone, Copy)]
pub struct KrawtchoukContext {
    pub n: usize,
    pub p: f64,
}

impl KrawtchoukContext {
    pub fn new(n: usize, p: f64) -> Result<Self> {
        if n < 1 {
            return Err(QslideError::InvalidSize("degree must be at least 1".into()));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(QslideError::Domain(format!("p must lie in (0,1), got {p}")));
        }
        Ok(Self { n, p })
    }
}

/// Krawtchouk polynomial K_n(x) by forward recurrence from K_0 = 1:
/// `K_{m+1} = ((p(N-m) + m(1-p) - x) K_m - m(1-p) K_{m-1}) / (p(N-m))`.
///
/// Normalized so K_n(0) = 1; self-dual, K_n(r) = K_r(n) for integer
/// arguments.
pub fn krawtchouk(n: usize, x: f64, ctx: &KrawtchoukContext) -> Result<f64> {
    if n > ctx.n {
        return Err(QslideError::Range(format!(
            "polynomial index {n} exceeds degree {}",
            ctx.n
        )));
    }
    let (p, big_n) = (ctx.p, ctx.n as f64);
    let mut km1 = 0.0;
    let mut k0 = 1.0;
    for m in 0..n {
        let mf = m as f64;
        let k1 = ((p * (big_n - mf) + mf * (1.0 - p) - x) * k0 - mf * (1.0 - p) * km1)
            / (p * (big_n - mf));
        km1 = k0;
        k0 = k1;
    }
    Ok(k0)
}

/// Binomial weight `binom(N,n) p^n (1-p)^{N-n}`, computed in log space.
pub fn weight(n: usize, ctx: &KrawtchoukContext) -> Result<f64> {
    if n > ctx.n {
        return Err(QslideError::Range(format!(
            "weight index {n} exceeds degree {}",
            ctx.n
        )));
    }
    let ln_w = ln_binomial(ctx.n, n)
        + n as f64 * ctx.p.ln()
        + (ctx.n - n) as f64 * (1.0 - ctx.p).ln();
    Ok(ln_w.exp())
}

/// Orthonormal Krawtchouk function
/// `chi_n(x) = sqrt(binom(N,n) (p/(1-p))^n) K_n(x)`; satisfies
/// `sum_s weight(s) chi_m(s) chi_n(s) = delta_mn` over s = 0..N.
pub fn normalized_krawtchouk(n: usize, x: f64, ctx: &KrawtchoukContext) -> Result<f64> {
    let ln_pref = 0.5 * (ln_binomial(ctx.n, n) + n as f64 * (ctx.p / (1.0 - ctx.p)).ln());
    Ok(ln_pref.exp() * krawtchouk(n, x, ctx)?)
}

/// Success probability matching a field slope: `p = (1 +- sqrt(a^2/(a^2+4)))/2`,
/// upper branch for a <= 0 so that `(1-2p)/sqrt(p(1-p)) = a` round-trips.
pub fn p_of_a(a: f64) -> f64 {
    let root = (a * a / (a * a + 4.0)).sqrt();
    if a <= 0.0 {
        0.5 * (1.0 + root)
    } else {
        0.5 * (1.0 - root)
    }
}

/// Inverse chain period scale `b = 1/sqrt(a^2+4)`; the chain period is `2*b*pi`.
pub fn period_scale(a: f64) -> f64 {
    1.0 / (a * a + 4.0).sqrt()
}

fn check_period(t: f64, a: f64) -> Result<f64> {
    let b = period_scale(a);
    if !(t > 0.0 && t < 2.0 * b * PI) {
        return Err(QslideError::Domain(format!(
            "t = {t} outside the open chain period (0, {})",
            2.0 * b * PI
        )));
    }
    Ok(b)
}

/// Packet momentum theta(t, a) on the field chain, in (-pi, pi].
///
/// Piecewise in t about the half period b*pi: for t in (0, b*pi] this is
/// `-arctan(a b tan(t/2b)) - pi/2`, and the second half continues it oddly
/// about (b*pi, 0). Both branches are evaluated through the pole-free form
/// `theta = -pi/2 - tau/2 + theta_g(tau)` with tau = t/b, which is
/// continuous across the boundary.
pub fn momentum_theta(t: f64, a: f64) -> Result<f64> {
    let b = check_period(t, a)?;
    if a == 0.0 {
        // Flat field: the packet momentum is -pi/2 outbound, +pi/2 on return.
        return Ok(if t <= b * PI { -PI / 2.0 } else { PI / 2.0 });
    }
    let p = p_of_a(a);
    let tau = t / b;
    let theta_g = (p * tau.sin()).atan2(1.0 - p + p * tau.cos());
    Ok(wrap_phase(-PI / 2.0 - tau / 2.0 + theta_g))
}

/// Exact walker amplitude `<r| exp(-i H_field t) |0>` in polar form.
///
/// `magnitude = sqrt(binom(N,r)) q^{r/2} (1-q)^{(N-r)/2}` with
/// `q = 4 b^2 sin^2(t/2b)`; `phase = r*momentum_theta + global_phase`.
/// The r-independent `global_phase` equals `N (p tau - theta_g)` wrapped
/// to (-pi, pi].
#[derive(Debug, Clone, Copy)]
pub struct AmplitudeResult {
    pub magnitude: f64,
    pub phase: f64,
    pub momentum_theta: f64,
    pub global_phase: f64,
}

impl AmplitudeResult {
    pub fn complex(&self) -> Complex64 {
        Complex64::from_polar(self.magnitude, self.phase)
    }
}

/// Evaluate the exact amplitude at site r, degree N, time t in (0, 2b*pi).
pub fn amplitude(r: usize, a: f64, t: f64, n: usize) -> Result<AmplitudeResult> {
    if r > n {
        return Err(QslideError::Range(format!("site {r} exceeds degree {n}")));
    }
    let b = check_period(t, a)?;
    let tau = t / b;
    let q = 4.0 * b * b * (0.5 * tau).sin().powi(2);
    let p = p_of_a(a);
    let theta_g = (p * tau.sin()).atan2(1.0 - p + p * tau.cos());
    let theta = momentum_theta(t, a)?;

    // Log-space magnitude; skip vanishing-exponent terms so q = 1 (the
    // perfect-transfer point) stays finite.
    let mut ln_mag = 0.5 * ln_binomial(n, r);
    if r > 0 {
        ln_mag += 0.5 * r as f64 * q.ln();
    }
    if n - r > 0 {
        ln_mag += 0.5 * (n - r) as f64 * (1.0 - q).ln();
    }
    let magnitude = ln_mag.exp();

    let global_phase = wrap_phase(n as f64 * (p * tau - theta_g));
    let phase = wrap_phase(r as f64 * theta + global_phase);
    Ok(AmplitudeResult {
        magnitude,
        phase,
        momentum_theta: theta,
        global_phase,
    })
}

/// Large-N Gaussian parameters of the binomial packet profile:
/// amplitude ~ exp(-(r - center)^2 / (4 sigma^2)) e^{i theta r}.
#[derive(Debug, Clone, Copy)]
pub struct GaussianPacket {
    pub center: f64,
    pub sigma: f64,
    pub momentum: f64,
    pub sigma_k: f64,
    /// False when sigma < 3 sites and the Gaussian replacement of the
    /// binomial profile is not yet trustworthy.
    pub in_gaussian_regime: bool,
}

/// Gaussian packet parameters at time t on the degree-N field chain:
/// `center = N q`, `sigma = sqrt(N q (1-q))`, `sigma_k = 1/(2 sigma)`.
pub fn gaussian_packet(n: usize, a: f64, t: f64) -> Result<GaussianPacket> {
    let b = check_period(t, a)?;
    let q = 4.0 * b * b * (0.5 * t / b).sin().powi(2);
    let center = n as f64 * q;
    let sigma = (n as f64 * q * (1.0 - q)).sqrt();
    if sigma == 0.0 {
        return Err(QslideError::Domain(
            "packet width vanishes at the perfect-transfer point".into(),
        ));
    }
    Ok(GaussianPacket {
        center,
        sigma,
        momentum: momentum_theta(t, a)?,
        sigma_k: 0.5 / sigma,
        in_gaussian_regime: sigma >= 3.0,
    })
}

/// Plane-wave transmission of the phase-gate widget:
/// `T(k) = 64 / (64 + cos^2(2k) csc^6(k) sec^2(k))` for k in (-pi, 0),
/// evaluated in the pole-free form `64 s^6 c^2 / (64 s^6 c^2 + cos^2 2k)`.
pub fn transmission_b(k: f64) -> Result<f64> {
    if !(k > -PI && k < 0.0) {
        return Err(QslideError::Domain(format!(
            "momentum {k} outside the band (-pi, 0)"
        )));
    }
    let s6 = k.sin().powi(6);
    let c2 = k.cos().powi(2);
    let num = 64.0 * s6 * c2;
    Ok(num / (num + (2.0 * k).cos().powi(2)))
}

/// Gaussian-weighted transmission
/// `T_G(theta) = integral over (-pi, 0) of N(k; theta, sigma_k) T(k) dk`
/// for an arbitrary per-momentum transmission `t_of_k`.
///
/// The interval is pre-split at theta and theta +- {1,3,10} sigma_k so the
/// adaptive rule cannot step over a packet much narrower than the band.
pub fn gaussian_transmission_with<F: Fn(f64) -> Result<f64>>(
    theta: f64,
    sigma_k: f64,
    t_of_k: F,
) -> Result<f64> {
    if !(theta > -PI && theta < 0.0) {
        return Err(QslideError::Domain(format!(
            "packet momentum {theta} outside the band (-pi, 0)"
        )));
    }
    if !(sigma_k > 0.0) {
        return Err(QslideError::Domain(format!(
            "momentum width must be positive, got {sigma_k}"
        )));
    }
    let norm = 1.0 / ((2.0 * PI).sqrt() * sigma_k);
    let density = |k: f64| {
        let z = (k - theta) / sigma_k;
        norm * (-0.5 * z * z).exp()
    };
    let mut cuts = vec![-PI, 0.0];
    for m in [-10.0, -3.0, -1.0, 0.0, 1.0, 3.0, 10.0] {
        let k = (theta + m * sigma_k).clamp(-PI, 0.0);
        cuts.push(k);
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("cut NaN"));
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
    let tol = 1e-10 / (cuts.len() - 1) as f64;
    // Quadrature nodes are strictly interior, but a supplied t_of_k may
    // still fail (e.g. a scattering resonance); capture the first error.
    let failure: std::cell::RefCell<Option<QslideError>> = std::cell::RefCell::new(None);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        if w[1] - w[0] < 1e-13 {
            continue;
        }
        let q = quad::integrate(
            |k| match t_of_k(k) {
                Ok(t) => density(k) * t,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            },
            w[0],
            w[1],
            tol,
        )?;
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
        total += q.value;
    }
    Ok(total)
}

/// [`gaussian_transmission_with`] specialized to the phase-gate formula.
pub fn gaussian_transmission_b(theta: f64, sigma_k: f64) -> Result<f64> {
    gaussian_transmission_with(theta, sigma_k, transmission_b)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::jacobi::{build_chain, eigendecompose, ChainKind};

    /// Fixed linear congruential generator; deterministic test inputs.
    pub(crate) struct Lcg(u64);

    impl Lcg {
        pub fn new(seed: u64) -> Self {
            Lcg(seed)
        }
        pub fn next_f64(&mut self) -> f64 {
            self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (self.0 >> 11) as f64 / (1u64 << 53) as f64
        }
    }

    #[test]
    fn krawtchouk_seeds() {
        let ctx = KrawtchoukContext::new(7, 0.4).unwrap();
        for &x in &[-1.5, 0.0, 2.0, 7.0] {
            assert_eq!(krawtchouk(0, x, &ctx).unwrap(), 1.0);
            let k1 = krawtchouk(1, x, &ctx).unwrap();
            assert!((k1 - (1.0 - x / (0.4 * 7.0))).abs() < 1e-14);
        }
    }

    #[test]
    fn krawtchouk_self_duality() {
        let ctx = KrawtchoukContext::new(5, 0.5).unwrap();
        let lhs = krawtchouk(2, 3.0, &ctx).unwrap();
        let rhs = krawtchouk(3, 2.0, &ctx).unwrap();
        assert!((lhs + 0.2).abs() < 1e-12);
        assert!((lhs - rhs).abs() < 1e-12);
        for &p in &[0.2, 0.5, 0.7] {
            for n_deg in 1..=12usize {
                let ctx = KrawtchoukContext::new(n_deg, p).unwrap();
                for r in 0..=n_deg {
                    for n in 0..=n_deg {
                        let a = krawtchouk(r, n as f64, &ctx).unwrap();
                        let b = krawtchouk(n, r as f64, &ctx).unwrap();
                        assert!(
                            (a - b).abs() <= 1e-9 * a.abs().max(1.0),
                            "duality broken at N={n_deg} p={p} ({r},{n})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn weights_normalize_and_orthogonalize() {
        let ctx = KrawtchoukContext::new(12, 0.37).unwrap();
        assert!((weight(0, &ctx).unwrap() - 0.63f64.powi(12)).abs() < 1e-15);
        let total: f64 = (0..=12).map(|n| weight(n, &ctx).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for n_deg in 1..=10usize {
            let ctx = KrawtchoukContext::new(n_deg, 0.3).unwrap();
            for m in 0..=n_deg {
                for n in 0..=n_deg {
                    let mut acc = 0.0;
                    for s in 0..=n_deg {
                        acc += weight(s, &ctx).unwrap()
                            * normalized_krawtchouk(m, s as f64, &ctx).unwrap()
                            * normalized_krawtchouk(n, s as f64, &ctx).unwrap();
                    }
                    let want = if m == n { 1.0 } else { 0.0 };
                    assert!(
                        (acc - want).abs() < 1e-9,
                        "orthogonality broken at N={n_deg} ({m},{n}): {acc}"
                    );
                }
            }
        }
    }

    #[test]
    fn p_of_a_branches_and_round_trip() {
        assert_eq!(p_of_a(0.0), 0.5);
        let want = 0.5 * (1.0 + 1.0 / 2.0f64.sqrt());
        assert!((p_of_a(-2.0) - want).abs() < 1e-15);
        for &a in &[3.0, -2.0, 0.7, -11.0] {
            let p = p_of_a(a);
            assert!(p > 0.0 && p < 1.0);
            let back = (1.0 - 2.0 * p) / (p * (1.0 - p)).sqrt();
            assert!((back - a).abs() < 1e-12, "round trip failed for a={a}");
        }
    }

    #[test]
    fn perfect_transfer_amplitude() {
        let n = 9;
        let r = amplitude(n, 0.0, PI / 2.0, n).unwrap();
        assert!((r.magnitude - 1.0).abs() < 1e-12);
        for site in 0..n {
            assert!(amplitude(site, 0.0, PI / 2.0, n).unwrap().magnitude < 1e-12);
        }
    }

    #[test]
    fn amplitude_unitarity() {
        let total: f64 = (0..=10)
            .map(|r| amplitude(r, -2.0, 0.3, 10).unwrap().magnitude.powi(2))
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn amplitude_matches_spectral_propagator() {
        let n = 40;
        let a = -2.0;
        let t = 0.226 * PI;
        let chain = build_chain(ChainKind::Field, n + 1, a, 0.0).unwrap();
        let spec = eigendecompose(&chain).unwrap();
        let mut psi0 = vec![Complex64::new(0.0, 0.0); n + 1];
        psi0[0] = Complex64::new(1.0, 0.0);
        let psi = spec.evolve(&psi0, t).unwrap();
        let mut worst = 0.0f64;
        for r in 0..=n {
            let pred = amplitude(r, a, t, n).unwrap().complex();
            worst = worst.max((psi[r] - pred).norm());
        }
        assert!(worst < 1e-10, "max deviation {worst}");
    }

    #[test]
    fn momentum_flat_field() {
        for &t in &[0.1, 0.7, PI / 2.0] {
            assert_eq!(momentum_theta(t, 0.0).unwrap(), -PI / 2.0);
        }
        assert_eq!(momentum_theta(PI / 2.0 + 0.3, 0.0).unwrap(), PI / 2.0);
    }

    #[test]
    fn momentum_zero_at_half_period() {
        let b = period_scale(-2.0);
        assert!(momentum_theta(b * PI, -2.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn momentum_analytic_seed() {
        let b = period_scale(-2.0);
        let t_star = 2.0 * b * (1.0 / (2.0 * b)).atan();
        assert!((t_star - 0.21502178459838077 * PI).abs() < 1e-12);
        assert!((momentum_theta(t_star, -2.0).unwrap() + PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn momentum_continuous_and_odd_about_half_period() {
        for &a in &[-2.0, -0.5, -4.0] {
            let b = period_scale(a);
            for &delta in &[1e-3, 1e-2, 0.1, 0.3] {
                let plus = momentum_theta(b * PI + delta * b, a).unwrap();
                let minus = momentum_theta(b * PI - delta * b, a).unwrap();
                assert!(
                    (plus + minus).abs() < 1e-10,
                    "odd symmetry broken at a={a} delta={delta}"
                );
            }
            let eps = 1e-9;
            let below = momentum_theta(b * PI - eps, a).unwrap();
            let above = momentum_theta(b * PI + eps, a).unwrap();
            assert!((below - above).abs() < 1e-6);
        }
    }

    #[test]
    fn momentum_range_by_field_sign() {
        let mut rng = Lcg::new(7);
        for _ in 0..200 {
            let u = rng.next_f64();
            for &a in &[-3.0, -1.0] {
                let b = period_scale(a);
                let t = (0.001 + 0.998 * u) * 2.0 * b * PI;
                let th = momentum_theta(t, a).unwrap();
                assert!(th > -PI / 2.0 && th < PI / 2.0, "a={a} t={t} theta={th}");
            }
            for &a in &[1.0, 3.0] {
                let b = period_scale(a);
                let t = (0.001 + 0.998 * u) * 2.0 * b * PI;
                let th = momentum_theta(t, a).unwrap();
                assert!(
                    (th > PI / 2.0 && th <= PI) || (th > -PI && th < -PI / 2.0),
                    "a={a} t={t} theta={th}"
                );
            }
        }
    }

    #[test]
    fn momentum_outside_period_rejected() {
        let b = period_scale(-2.0);
        assert!(momentum_theta(0.0, -2.0).is_err());
        assert!(momentum_theta(2.0 * b * PI, -2.0).is_err());
        assert!(momentum_theta(-0.1, -2.0).is_err());
    }

    #[test]
    fn gaussian_packet_parameters() {
        let g = gaussian_packet(400, 0.0, PI / 4.0).unwrap();
        assert!((g.center - 200.0).abs() < 1e-9);
        assert!((g.sigma - 10.0).abs() < 1e-9);
        assert!((g.sigma_k * g.sigma - 0.5).abs() < 1e-15);
        assert!(g.in_gaussian_regime);
        let narrow = gaussian_packet(8, 0.0, 0.3).unwrap();
        assert!(!narrow.in_gaussian_regime);
    }

    #[test]
    fn gaussian_packet_overlaps_binomial_profile() {
        let n = 400;
        let a = -2.0;
        let t = 0.226 * PI;
        let g = gaussian_packet(n, a, t).unwrap();
        let mut dot = 0.0;
        let mut na = 0.0;
        let mut nb = 0.0;
        for r in 0..=n {
            let exact = amplitude(r, a, t, n).unwrap().magnitude;
            let gauss = (-((r as f64 - g.center).powi(2)) / (4.0 * g.sigma * g.sigma)).exp();
            dot += exact * gauss;
            na += exact * exact;
            nb += gauss * gauss;
        }
        assert!(dot / (na.sqrt() * nb.sqrt()) >= 0.999);
    }

    #[test]
    fn transmission_b_landmarks() {
        assert!((transmission_b(-PI / 4.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(transmission_b(-PI / 2.0).unwrap() < 1e-30);
        assert!((transmission_b(-PI / 8.0).unwrap() - 0.2554791617945659).abs() < 1e-12);
        assert!(transmission_b(0.0).is_err());
        assert!(transmission_b(-PI).is_err());
        let mut rng = Lcg::new(3);
        for _ in 0..100 {
            let k = -PI + (1e-6 + (1.0 - 2e-6) * rng.next_f64()) * PI;
            let t = transmission_b(k).unwrap();
            assert!((0.0..=1.0).contains(&t));
        }
    }

    #[test]
    fn gaussian_transmission_plane_wave_limit() {
        let t = gaussian_transmission_b(-PI / 4.0, 1e-4).unwrap();
        assert!((t - 1.0).abs() < 1e-6, "got {t}");
    }

    #[test]
    fn gaussian_transmission_bounded() {
        for &(theta, sk) in &[
            (-PI / 4.0, 0.05),
            (-PI / 3.0, 0.2),
            (-0.9 * PI, 0.3),
            (-PI / 4.0, 1e-3),
        ] {
            let t = gaussian_transmission_b(theta, sk).unwrap();
            assert!((0.0..=1.0 + 1e-12).contains(&t), "theta={theta} sk={sk} t={t}");
        }
    }

    #[test]
    fn gaussian_transmission_packet_value() {
        // sigma_k of the slide-launched packet; the widget circuit
        // simulation lands within half a percentage point of this.
        let t = gaussian_transmission_b(-PI / 4.0, 0.052281099112099197).unwrap();
        assert!((t - 0.9969).abs() < 2e-4, "got {t}");
    }
}
