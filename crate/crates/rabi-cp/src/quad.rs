//! Adaptive Simpson quadrature used by the mode-averaged detuning and the
//! interaction-picture commutator integral.

use std::cell::Cell;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub(crate) struct QuadResult {
    pub value: f64,
    pub error: f64,
}

const MAX_DEPTH: u32 = 40;
const MAX_EVALS: u64 = 2_000_000;
const SCALE_PROBES: usize = 17;

/// Integrate `f` over `[a, b]` to the requested relative tolerance.
///
/// The error estimate is the usual |S_fine - S_coarse|/15 Richardson bound,
/// accumulated over accepted panels; the per-panel tolerance halves at each
/// split so the total stays within `rel_tol` of the integral magnitude. The
/// magnitude scale comes from a uniform probe of the integrand, not from the
/// coarse Simpson value alone: oscillatory integrands can cancel to near
/// zero on the three initial nodes, and a collapsed scale would send the
/// recursion into an unbounded refinement spiral. A hard evaluation budget
/// backstops pathological integrands.
pub(crate) fn adaptive_simpson<F>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<QuadResult>
where
    F: Fn(f64) -> f64,
{
    debug_assert!(b >= a);
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
        });
    }
    let mut probe_max = 0.0f64;
    for i in 0..SCALE_PROBES {
        let x = a + (b - a) * (i as f64 + 0.5) / SCALE_PROBES as f64;
        probe_max = probe_max.max(f(x).abs());
    }
    let fa = f(a);
    let fb = f(b);
    let mid = 0.5 * (a + b);
    let fm = f(mid);
    let whole = simpson(a, b, fa, fm, fb);
    let scale = whole.abs().max((b - a) * probe_max);
    if scale == 0.0 {
        // flat zero on every probe: the integral of a smooth integrand is 0
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
        });
    }
    let evals = Cell::new(0u64);
    let counted = |x: f64| {
        evals.set(evals.get() + 1);
        f(x)
    };
    let mut acc = Accum::default();
    recurse(
        &counted,
        a,
        b,
        fa,
        fm,
        fb,
        whole,
        rel_tol * scale,
        MAX_DEPTH,
        &evals,
        &mut acc,
    );
    if acc.failed {
        return Err(Error::QuadratureNoConvergence {
            requested: rel_tol,
            achieved: acc.error / scale,
        });
    }
    Ok(QuadResult {
        value: acc.value,
        error: acc.error,
    })
}

#[derive(Default)]
struct Accum {
    value: f64,
    error: f64,
    failed: bool,
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    evals: &Cell<u64>,
    acc: &mut Accum,
) where
    F: Fn(f64) -> f64,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let err = (left + right - whole).abs() / 15.0;
    let out_of_budget = depth == 0 || evals.get() > MAX_EVALS;
    if err <= tol || out_of_budget {
        if out_of_budget && err > tol {
            acc.failed = true;
        }
        acc.value += left + right + (left + right - whole) / 15.0;
        acc.error += err;
        return;
    }
    let half_tol = 0.5 * tol;
    recurse(f, a, m, fa, flm, fm, left, half_tol, depth - 1, evals, acc);
    recurse(f, m, b, fm, frm, fb, right, half_tol, depth - 1, evals, acc);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = adaptive_simpson(|x| x * x * x - 2.0 * x, 0.0, 2.0, 1e-12).unwrap();
        assert!(r.value.abs() < 1e-12);
    }

    #[test]
    fn oscillatory_integral() {
        let r = adaptive_simpson(|x| (10.0 * x).sin(), 0.0, 1.0, 1e-10).unwrap();
        let exact = (1.0 - (10.0f64).cos()) / 10.0;
        assert!((r.value - exact).abs() < 1e-9 * exact.abs().max(1.0));
    }

    #[test]
    fn quartic_potential_tail() {
        // 1/x^4 over [1, 10]: exact (1 - 10^-3)/3
        let r = adaptive_simpson(|x| x.powi(-4), 1.0, 10.0, 1e-10).unwrap();
        let exact = (1.0 - 1e-3) / 3.0;
        assert!((r.value / exact - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_width_interval_and_flat_zero() {
        let r = adaptive_simpson(|x| x.exp(), 1.5, 1.5, 1e-9).unwrap();
        assert_eq!(r.value, 0.0);
        let r = adaptive_simpson(|_| 0.0, 0.0, 3.0, 1e-9).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn antisymmetric_nodes_do_not_collapse_the_scale() {
        // sin(2 pi x) over [0, 1]: zero at the three Simpson nodes and zero
        // integral, but the probe scale keeps the refinement finite
        let r =
            adaptive_simpson(|x| (2.0 * std::f64::consts::PI * x).sin(), 0.0, 1.0, 1e-9).unwrap();
        assert!(r.value.abs() < 1e-12);
        // a full period of sin(2 pi x) sin(4 pi x): exact 0, nodes at zeros
        let r = adaptive_simpson(
            |x| {
                let w = 2.0 * std::f64::consts::PI * x;
                1.0e5 * w.sin() * (2.0 * w).sin()
            },
            0.0,
            1.0,
            1e-9,
        )
        .unwrap();
        assert!(r.value.abs() < 1e-4);
    }
}
