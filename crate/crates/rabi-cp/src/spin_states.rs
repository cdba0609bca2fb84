//! Collective-spin input states in the Dicke basis.
//!
//! N particles in two modes a/b span the j = N/2 Dicke manifold
//! |n, N-n>, n = 0..N, where n counts particles in well a and the
//! population imbalance operator is Jz = (n_a - n_b)/2. Input states are
//! real superpositions c_n |n, N-n>; their first and second spin moments
//! are computed exactly from the tridiagonal ladder action
//! J+ |n, N-n> = sqrt((n+1)(N-n)) |n+1, N-n-1>.
//!
//! The bosonic and fermionic coherent states of the two-mode model reduce to
//! the same binomial Dicke state: every quantity used downstream depends only
//! on collective-spin moments, which coincide. For the fermionic product
//! state, N is the number of occupied transverse modes.

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;

/// Real coefficient vector over the Dicke basis |n, N-n>, n = 0..N.
///
/// Invariant: sum of squared coefficients is 1 within 1e-12 (constructors
/// normalize exactly).
#[derive(Debug, Clone, PartialEq)]
pub struct DickeState {
    particles: usize,
    coeffs: Vec<f64>,
}

impl DickeState {
    /// Build a state from raw coefficients; the vector is renormalized.
    pub fn from_coeffs(particles: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != particles + 1 {
            return Err(Error::invalid(
                "coeffs",
                format!("expected {} entries, got {}", particles + 1, coeffs.len()),
            ));
        }
        if !coeffs.iter().all(|c| c.is_finite()) {
            return Err(Error::invalid("coeffs", "non-finite coefficient"));
        }
        let norm2: f64 = coeffs.iter().map(|c| c * c).sum();
        if norm2 <= 0.0 {
            return Err(Error::invalid("coeffs", "zero norm"));
        }
        let inv = norm2.sqrt().recip();
        let mut coeffs = coeffs;
        for c in &mut coeffs {
            *c *= inv;
        }
        Ok(Self { particles, coeffs })
    }

    /// Particle count N.
    pub fn particles(&self) -> usize {
        self.particles
    }

    /// Coefficient c_n.
    pub fn coeff(&self, n: usize) -> f64 {
        self.coeffs[n]
    }

    /// Full coefficient vector c_0..c_N.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// True when c_n = c_{N-n} for all n within 1e-12.
    pub fn is_symmetric(&self) -> bool {
        let n = self.particles;
        (0..=n / 2).all(|k| (self.coeffs[k] - self.coeffs[n - k]).abs() <= SYMMETRY_TOL)
    }

    /// L2 norm (1 by construction; exposed for oracle checks).
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Exact spin moments of this state.
    pub fn moments(&self) -> SpinMoments {
        moments(self)
    }

    /// Plain-text column dump `n c_n`, one basis state per line.
    pub fn write_columns<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        for (n, c) in self.coeffs.iter().enumerate() {
            writeln!(out, "{n} {c}")?;
        }
        Ok(())
    }
}

/// Ladder amplitude A_n = sqrt((n+1)(N-n)) coupling n <-> n+1.
pub(crate) fn ladder_amp(particles: usize, n: usize) -> f64 {
    ((n + 1) as f64 * (particles - n) as f64).sqrt()
}

/// Coherent spin state along +x: c_n = sqrt(binom(N,n)) / 2^(N/2).
///
/// Built outward from the peak with the ratio recurrence
/// c_{n+1}/c_n = sqrt((N-n)/(n+1)), so large N never overflows; far tails
/// underflow to zero harmlessly.
pub fn make_css(particles: usize) -> Result<DickeState> {
    if particles == 0 {
        return Err(Error::invalid("particles", "N must be at least 1"));
    }
    let mut c = vec![0.0; particles + 1];
    let mid = particles / 2;
    c[mid] = 1.0;
    for n in mid..particles {
        c[n + 1] = c[n] * ((particles - n) as f64 / (n + 1) as f64).sqrt();
    }
    for n in (0..mid).rev() {
        // c_n = c_{n+1} * sqrt((n+1)/(N-n))
        c[n] = c[n + 1] * ((n + 1) as f64 / (particles - n) as f64).sqrt();
    }
    DickeState::from_coeffs(particles, c)
}

/// Gaussian squeezed state c_n ~ exp(-(n - N/2)^2 / (4 sigma^2)),
/// truncated to n in [0, N] and renormalized.
pub fn make_gaussian_squeezed(particles: usize, sigma: f64) -> Result<DickeState> {
    if particles < 2 {
        return Err(Error::invalid("particles", "N must be at least 2"));
    }
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma", "width must be positive"));
    }
    if sigma > (particles as f64).sqrt() {
        log::warn!(
            "sigma = {sigma} exceeds sqrt(N) = {}: wider than a coherent state (anti-squeezed)",
            (particles as f64).sqrt()
        );
    }
    let center = particles as f64 / 2.0;
    let c: Vec<f64> = (0..=particles)
        .map(|n| {
            let d = n as f64 - center;
            (-d * d / (4.0 * sigma * sigma)).exp()
        })
        .collect();
    DickeState::from_coeffs(particles, c)
}

/// Twin-Fock state |N/2, N/2>: a Jz eigenstate with zero imbalance variance.
pub fn make_twin_fock(particles: usize) -> Result<DickeState> {
    if particles == 0 || !particles.is_multiple_of(2) {
        return Err(Error::invalid("particles", "N must be even and positive"));
    }
    let mut c = vec![0.0; particles + 1];
    c[particles / 2] = 1.0;
    DickeState::from_coeffs(particles, c)
}

/// First moments and symmetrized second moments of the collective spin.
///
/// `second[i][j] = <(J_i J_j + J_j J_i)/2>`; for real states the y-row
/// cross entries vanish and `mean[1] = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinMoments {
    particles: usize,
    mean: [f64; 3],
    second: [[f64; 3]; 3],
}

impl SpinMoments {
    /// Particle count N of the underlying state.
    pub fn particles(&self) -> usize {
        self.particles
    }

    /// (<Jx>, <Jy>, <Jz>).
    pub fn mean(&self) -> [f64; 3] {
        self.mean
    }

    /// Symmetrized second-moment matrix.
    pub fn second(&self) -> [[f64; 3]; 3] {
        self.second
    }

    /// <Jx^2 + Jy^2 + Jz^2> = (N/2)(N/2 + 1) for any pure state here.
    pub fn trace_second(&self) -> f64 {
        self.second[0][0] + self.second[1][1] + self.second[2][2]
    }

    /// Variance of J along axis i.
    pub fn variance(&self, axis: usize) -> f64 {
        self.second[axis][axis] - self.mean[axis] * self.mean[axis]
    }
}

/// Exact moments from the tridiagonal ladder action on the coefficients.
pub fn moments(state: &DickeState) -> SpinMoments {
    let np = state.particles;
    let c = &state.coeffs;
    let half = np as f64 / 2.0;

    let mut jx = 0.0;
    let mut jz = 0.0;
    let mut jz2 = 0.0;
    let mut diag = 0.0; // <J+J- + J-J+>/4, the shared diagonal of Jx^2 and Jy^2
    let mut off = 0.0; // <J+^2 + J-^2>/4 contribution (couples n, n+2)
    let mut sxz = 0.0;

    for n in 0..=np {
        let m = n as f64 - half;
        let w = c[n] * c[n];
        jz += m * w;
        jz2 += m * m * w;
        let nf = n as f64;
        let npf = np as f64;
        diag += w * (nf * (npf - nf + 1.0) + (nf + 1.0) * (npf - nf)) / 4.0;
        if n < np {
            let a = ladder_amp(np, n);
            jx += c[n + 1] * c[n] * a;
            sxz += c[n + 1] * c[n] * a * (m + (m + 1.0)) / 2.0;
        }
        if n + 2 <= np {
            off += 0.5 * c[n] * c[n + 2] * ladder_amp(np, n) * ladder_amp(np, n + 1);
        }
    }

    let jx2 = diag + off;
    let jy2 = diag - off;
    // Real coefficients: <Jy> = 0 and all symmetrized cross moments with Jy
    // vanish identically.
    SpinMoments {
        particles: np,
        mean: [jx, 0.0, jz],
        second: [[jx2, 0.0, sxz], [0.0, jy2, 0.0], [sxz, 0.0, jz2]],
    }
}

/// Spin squeezing parameter xi^2 = N <Jz^2> / <Jx>^2 from exact moments.
///
/// Undefined for <Jx> = 0 (twin Fock); callers wanting the Heisenberg-limit
/// analysis should use [`squeezing_parameter_gaussian`] instead.
pub fn squeezing_parameter(m: &SpinMoments) -> Result<f64> {
    let jx = m.mean[0];
    if jx == 0.0 {
        return Err(Error::UndefinedSqueezing);
    }
    Ok(m.particles as f64 * m.second[2][2] / (jx * jx))
}

/// Gaussian-approximation squeezing parameter
/// xi^2(sigma) = 4 sigma^2 exp(1/(4 sigma^2)) / N.
///
/// Minimized at sigma = 1/2 with minimum e/N; this branch parameterizes the
/// squeezed-to-Fock family where the moment ratio becomes 0/0.
pub fn squeezing_parameter_gaussian(particles: usize, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    4.0 * s2 * (1.0 / (4.0 * s2)).exp() / particles as f64
}

/// Width sigma whose Gaussian-approximation xi^2 equals the target, on the
/// squeezed branch sigma <= sqrt(N)/2. Solved by bisection.
pub fn sigma_for_squeezing(particles: usize, xi2: f64) -> Result<f64> {
    let n = particles as f64;
    if !(xi2 > 0.0) {
        return Err(Error::invalid("xi2", "must be positive"));
    }
    let xi2_min = std::f64::consts::E / n;
    if xi2 < xi2_min {
        return Err(Error::invalid(
            "xi2",
            format!("below the Gaussian-family minimum e/N = {xi2_min:.3e}"),
        ));
    }
    let f = |s: f64| squeezing_parameter_gaussian(particles, s) - xi2;
    let mut lo = 0.5; // xi^2 is increasing in sigma on [1/2, sqrt(N)/2]
    let mut hi = n.sqrt() / 2.0;
    if f(hi) < 0.0 {
        // Target slightly above the CSS-width value e^(1/N); extend the
        // bracket into the anti-squeezed regime.
        hi = n.sqrt();
    }
    if f(lo) > 0.0 || f(hi) < 0.0 {
        return Err(Error::invalid("xi2", "not bracketed by the sigma family"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if (hi - lo) < 1e-14 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    #[test]
    fn css_single_spin() {
        let s = make_css(1).unwrap();
        assert_relative_eq!(s.coeff(0), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_relative_eq!(s.coeff(1), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        // <Jx> = N/2 for any CSS
        let m = make_css(4).unwrap().moments();
        assert_relative_eq!(m.mean()[0], 2.0, max_relative = 1e-14);
    }

    #[test]
    fn css_rejects_zero_particles() {
        assert!(make_css(0).is_err());
    }

    #[test]
    fn css_is_jx_eigenstate() {
        let m = make_css(2500).unwrap().moments();
        assert_relative_eq!(m.mean()[0], 1250.0, max_relative = 1e-12);
        assert_abs_diff_eq!(m.variance(0), 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(m.mean()[2], 0.0, epsilon = 1e-10);
        // Var(Jz) = N/4 for the binomial distribution
        assert_relative_eq!(m.second()[2][2], 625.0, max_relative = 1e-12);
    }

    #[test]
    fn css_squeezing_is_unity_and_formula_gives_exp_inv_n() {
        let n = 2500;
        let m = make_css(n).unwrap().moments();
        let xi2 = squeezing_parameter(&m).unwrap();
        assert_relative_eq!(xi2, 1.0, max_relative = 1e-10);
        // Under the width identification sigma^2 = N/4 the Gaussian branch
        // gives exactly e^(1/N) ~ 1.0004.
        let xi2_g = squeezing_parameter_gaussian(n, (n as f64).sqrt() / 2.0);
        assert_relative_eq!(xi2_g, (1.0 / n as f64).exp(), max_relative = 1e-12);
        assert_abs_diff_eq!(xi2_g, 1.0004, epsilon = 1e-6);
    }

    #[test]
    fn gaussian_rejects_bad_width() {
        assert!(make_gaussian_squeezed(100, 0.0).is_err());
        assert!(make_gaussian_squeezed(100, -1.0).is_err());
        assert!(make_gaussian_squeezed(1, 1.0).is_err());
    }

    #[test]
    fn gaussian_css_width_matches_css_moments() {
        // make_gaussian_squeezed(N, sqrt(N)/2) and make_css(N) agree in all
        // first and second moments within 2% for N >= 400.
        for n in [400usize, 900, 2500] {
            let g = make_gaussian_squeezed(n, (n as f64).sqrt() / 2.0)
                .unwrap()
                .moments();
            let c = make_css(n).unwrap().moments();
            for i in 0..3 {
                let (a, b) = (g.mean()[i], c.mean()[i]);
                assert!(
                    (a - b).abs() <= 0.02 * b.abs().max(1.0),
                    "mean[{i}]: {a} vs {b}"
                );
                for j in 0..3 {
                    let (a, b) = (g.second()[i][j], c.second()[i][j]);
                    assert!(
                        (a - b).abs() <= 0.02 * b.abs().max(1.0),
                        "second[{i}][{j}]: {a} vs {b}"
                    );
                }
            }
            let xi2 = squeezing_parameter(&g).unwrap();
            assert_abs_diff_eq!(xi2, 1.0, epsilon = 1e-3);
        }
    }

    #[test]
    fn gaussian_moment_formulas_sigma_10() {
        let n = 2500;
        let sigma = 10.0;
        let m = make_gaussian_squeezed(n, sigma).unwrap().moments();
        let nf = n as f64;
        assert_relative_eq!(m.second()[2][2], sigma * sigma, max_relative = 0.01);
        let jx_formula = nf / 2.0 * (-1.0 / (8.0 * sigma * sigma)).exp();
        assert_relative_eq!(m.mean()[0], jx_formula, max_relative = 1e-3);
        let jx2_formula = nf * nf / 8.0 * (1.0 + (-1.0 / (2.0 * sigma * sigma)).exp());
        let jy2_formula = nf * nf / 8.0 * (1.0 - (-1.0 / (2.0 * sigma * sigma)).exp());
        assert_relative_eq!(m.second()[0][0], jx2_formula, max_relative = 0.01);
        assert_relative_eq!(m.second()[1][1], jy2_formula, max_relative = 0.01);
    }

    #[test]
    fn gaussian_formula_error_bound_sweep() {
        // Gaussian-approximation formulas vs exact moments: relative error
        // <= 3/sigma^2 for 2 <= sigma <= sqrt(N)/2, N >= 400.
        for &(n, sigma) in &[
            (400usize, 2.0),
            (400, 5.0),
            (400, 10.0),
            (2500, 2.0),
            (2500, 10.0),
            (2500, 25.0),
        ] {
            let bound = 3.0 / (sigma * sigma);
            let m = make_gaussian_squeezed(n, sigma).unwrap().moments();
            let nf = n as f64;
            let s2 = sigma * sigma;
            let jx_f = nf / 2.0 * (-1.0 / (8.0 * s2)).exp();
            let jz2_f = s2;
            let jx2_f = nf * nf / 8.0 * (1.0 + (-1.0 / (2.0 * s2)).exp());
            let jy2_f = nf * nf / 8.0 * (1.0 - (-1.0 / (2.0 * s2)).exp());
            for (exact, formula, what) in [
                (m.mean()[0], jx_f, "Jx"),
                (m.second()[2][2], jz2_f, "Jz2"),
                (m.second()[0][0], jx2_f, "Jx2"),
                (m.second()[1][1], jy2_f, "Jy2"),
            ] {
                let rel = (exact / formula - 1.0).abs();
                assert!(
                    rel <= bound,
                    "{what} at N={n}, sigma={sigma}: rel {rel:.2e} > {bound:.2e}"
                );
            }
        }
    }

    #[test]
    fn gaussian_fig2_width_gives_xi2_0017() {
        // Width solved from the xi^2 formula for the strongest squeezing
        // value of the sensitivity curves.
        let n = 2500;
        let sigma = sigma_for_squeezing(n, 0.017).unwrap();
        assert_abs_diff_eq!(sigma * sigma, 10.37, epsilon = 0.01);
        let m = make_gaussian_squeezed(n, sigma).unwrap().moments();
        let xi2 = squeezing_parameter(&m).unwrap();
        assert_relative_eq!(xi2, 0.017, max_relative = 0.05);
    }

    #[test]
    fn gaussian_half_sigma_squeezing() {
        // sigma = 1/2 formula branch is exactly e/N; exact moments agree
        // within 15%.
        let n = 100;
        let xi2_g = squeezing_parameter_gaussian(n, 0.5);
        assert_relative_eq!(xi2_g, std::f64::consts::E / n as f64, max_relative = 1e-12);
        let m = make_gaussian_squeezed(n, 0.5).unwrap().moments();
        let xi2 = squeezing_parameter(&m).unwrap();
        assert_relative_eq!(xi2, std::f64::consts::E / n as f64, max_relative = 0.15);
    }

    #[test]
    fn xi2_half_width_within_15pct_of_heisenberg_floor_for_n_at_least_100() {
        for n in [100usize, 400, 1600] {
            let m = make_gaussian_squeezed(n, 0.5).unwrap().moments();
            let xi2 = squeezing_parameter(&m).unwrap();
            let floor = std::f64::consts::E / n as f64;
            assert!(
                (xi2 / floor - 1.0).abs() <= 0.15,
                "N={n}: xi2 {xi2:.4e} vs e/N {floor:.4e}"
            );
        }
    }

    #[test]
    fn sigma_for_half_squeezing() {
        let sigma = sigma_for_squeezing(2500, 0.5).unwrap();
        // 25/sqrt(2) up to the exp(1/(4 sigma^2)) factor
        assert_abs_diff_eq!(sigma * sigma, 312.5, epsilon = 0.5);
        let m = make_gaussian_squeezed(2500, sigma).unwrap().moments();
        assert_relative_eq!(squeezing_parameter(&m).unwrap(), 0.5, max_relative = 0.02);
    }

    #[test]
    fn twin_fock_moments() {
        let s = make_twin_fock(100).unwrap();
        let m = s.moments();
        assert_eq!(m.mean(), [0.0, 0.0, 0.0]);
        assert_eq!(m.second()[2][2], 0.0);
        let expect = 50.0 * 51.0 / 2.0;
        assert_relative_eq!(m.second()[0][0], expect, max_relative = 1e-12);
        assert_relative_eq!(m.second()[1][1], expect, max_relative = 1e-12);
        assert!(matches!(
            squeezing_parameter(&m),
            Err(Error::UndefinedSqueezing)
        ));
    }

    #[test]
    fn twin_fock_rejects_odd() {
        assert!(make_twin_fock(101).is_err());
        let s = make_twin_fock(2).unwrap();
        assert_eq!(s.coeffs(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn gaussian_narrow_width_limits_to_twin_fock() {
        let n = 100;
        let tf = make_twin_fock(n).unwrap();
        let mut last = f64::INFINITY;
        for sigma in [0.3, 0.2, 0.1] {
            let g = make_gaussian_squeezed(n, sigma).unwrap();
            let dist2: f64 = g
                .coeffs()
                .iter()
                .zip(tf.coeffs())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            assert!(dist2 < last);
            last = dist2;
        }
        assert!(last < 1e-8);
    }

    #[test]
    fn column_dump_round_trips_values() {
        let s = make_css(4).unwrap();
        let mut buf = Vec::new();
        s.write_columns(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        let c2: f64 = lines[2].split_whitespace().nth(1).unwrap().parse().unwrap();
        assert_relative_eq!(c2, s.coeff(2), max_relative = 1e-15);
    }

    proptest! {
        #[test]
        fn constructors_normalize(n in 1usize..400, sigma in 0.3f64..12.0) {
            let css = make_css(n).unwrap();
            prop_assert!((css.norm() - 1.0).abs() < 1e-12);
            if n >= 2 {
                let g = make_gaussian_squeezed(n, sigma).unwrap();
                prop_assert!((g.norm() - 1.0).abs() < 1e-12);
                prop_assert!(g.is_symmetric());
            }
        }

        #[test]
        fn moments_trace_and_variance_invariants(n in 1usize..300, sigma in 0.4f64..10.0) {
            let state = if n >= 2 && n % 2 == 0 {
                make_gaussian_squeezed(n, sigma).unwrap()
            } else {
                make_css(n).unwrap()
            };
            let m = state.moments();
            let j = n as f64 / 2.0;
            // Tr(S) = j(j+1) for any pure state in the Dicke manifold
            prop_assert!((m.trace_second() / (j * (j + 1.0)) - 1.0).abs() < 1e-9);
            for axis in 0..3 {
                prop_assert!(m.variance(axis) >= -1e-9 * j * (j + 1.0));
            }
            // symmetric matrix
            for i in 0..3 {
                for k in 0..3 {
                    prop_assert_eq!(m.second()[i][k], m.second()[k][i]);
                }
            }
        }
    }
}
