//! Casimir-Polder atom-surface potentials and the detuning they induce.
//!
//! A dielectric plate sits at distance `d` from the nearer well (well a) of a
//! double well with separation `l`. Positions `x` are measured from the
//! double-well center, so the atom-plate separation is `x + l/2 + d` and the
//! well centers sit at x = -l/2 (near) and x = +l/2 (far).
//!
//! Two asymptotic potentials are implemented: the retardation-dominated
//! zero-temperature quartic law and the thermal cubic law that takes over
//! when the separation is no longer small against the thermal wavelength
//! hbar c / (k_B T).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::adaptive_simpson;

/// CODATA values used throughout.
#[derive(Debug, Clone, Copy)]
pub struct PhysicalConstants {
    /// Reduced Planck constant, J s.
    pub hbar: f64,
    /// Speed of light, m/s.
    pub c_light: f64,
    /// Boltzmann constant, J/K.
    pub k_boltzmann: f64,
}

/// The one set of constants the crate uses.
pub const CODATA: PhysicalConstants = PhysicalConstants {
    hbar: 1.054_571_817e-34,
    c_light: 2.997_924_58e8,
    k_boltzmann: 1.380_649e-23,
};

/// How the mode densities of the two wells sample the potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ModeModel {
    /// Evaluate the potential at the well centers x = -l/2 and +l/2.
    PointSample,
    /// Average against normalized Gaussian densities of the given width
    /// centered on the wells (adaptive quadrature, rel. tolerance 1e-9).
    Gaussian { width_m: f64 },
}

/// Plate-and-trap geometry plus material response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSetup {
    /// Plate to near-well distance, m.
    pub d_m: f64,
    /// Well separation, m.
    pub l_m: f64,
    /// Static dielectric constant of the plate.
    pub epsilon0: f64,
    /// Static atomic polarizability, m^3.
    pub alpha0_m3: f64,
    /// Plate temperature, K (used by the thermal law).
    pub temperature_k: f64,
    /// Mode sampling model.
    pub mode_model: ModeModel,
    /// Fraction of each mode's density residing in the opposite well.
    ///
    /// The two-mode wave functions are superpositions of the lowest doublet
    /// and keep a minority component in the far well, which reduces the
    /// detuning by (1 - 2 mix). The experiments layer calibrates this once
    /// against the d = 4 um working point; 0 means perfectly localized
    /// modes.
    pub localization_mix: f64,
}

impl SurfaceSetup {
    pub fn new(
        d_m: f64,
        l_m: f64,
        epsilon0: f64,
        alpha0_m3: f64,
        temperature_k: f64,
        mode_model: ModeModel,
    ) -> Result<Self> {
        let s = Self {
            d_m,
            l_m,
            epsilon0,
            alpha0_m3,
            temperature_k,
            mode_model,
            localization_mix: 0.0,
        };
        s.validate()?;
        Ok(s)
    }

    /// Sapphire plate at 4 um from a Rb trap with l = 4.8 um, T = 300 K,
    /// point-sampled modes.
    pub fn reference() -> Self {
        Self {
            d_m: 4.0e-6,
            l_m: 4.8e-6,
            epsilon0: 9.4,
            alpha0_m3: 47.3e-30,
            temperature_k: 300.0,
            mode_model: ModeModel::PointSample,
            localization_mix: 0.0,
        }
    }

    pub fn with_distance(mut self, d_m: f64) -> Self {
        self.d_m = d_m;
        self
    }

    pub fn with_temperature(mut self, t_k: f64) -> Self {
        self.temperature_k = t_k;
        self
    }

    pub fn with_mode_model(mut self, mode_model: ModeModel) -> Self {
        self.mode_model = mode_model;
        self
    }

    pub fn with_localization_mix(mut self, mix: f64) -> Self {
        self.localization_mix = mix;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_m > 0.0) {
            return Err(Error::invalid("d_m", "plate distance must be positive"));
        }
        if !(self.l_m > 0.0) {
            return Err(Error::invalid("l_m", "well separation must be positive"));
        }
        if !(self.epsilon0 > 1.0) {
            return Err(Error::invalid(
                "epsilon0",
                "dielectric constant must exceed 1",
            ));
        }
        if !(self.alpha0_m3 > 0.0) {
            return Err(Error::invalid(
                "alpha0_m3",
                "polarizability must be positive",
            ));
        }
        if !(self.temperature_k >= 0.0) {
            return Err(Error::invalid(
                "temperature_k",
                "temperature must be non-negative",
            ));
        }
        if !(0.0..0.5).contains(&self.localization_mix) {
            return Err(Error::invalid("localization_mix", "must lie in [0, 0.5)"));
        }
        if let ModeModel::Gaussian { width_m } = self.mode_model {
            if !(width_m > 0.0) {
                return Err(Error::invalid("width_m", "mode width must be positive"));
            }
            // modes must remain well-localized in their wells
            if width_m >= self.l_m / 4.0 {
                return Err(Error::invalid(
                    "width_m",
                    format!(
                        "mode width {width_m} must stay below l/4 = {}",
                        self.l_m / 4.0
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Dielectric reduction factor (eps0 - 1)/(eps0 + 1).
    fn dielectric_factor(&self) -> f64 {
        (self.epsilon0 - 1.0) / (self.epsilon0 + 1.0)
    }

    /// Atom-plate separation for an atom at x (from the trap center).
    fn separation(&self, x_m: f64) -> f64 {
        x_m + self.l_m / 2.0 + self.d_m
    }
}

/// Which asymptotic Casimir-Polder law to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PotentialKind {
    ZeroTemperature,
    Thermal,
}

/// Retarded zero-temperature potential
/// V = -0.24 hbar c alpha0 / (x + l/2 + d)^4 * (eps0-1)/(eps0+1), in J.
pub fn v_cp_zero_temperature(x_m: f64, s: &SurfaceSetup) -> Result<f64> {
    let sep = s.separation(x_m);
    if !(sep > 0.0) {
        return Err(Error::NonPhysicalGeometry { separation_m: sep });
    }
    Ok(-0.24 * CODATA.hbar * CODATA.c_light * s.alpha0_m3 / sep.powi(4) * s.dielectric_factor())
}

/// Thermal potential V = -k_B T alpha0 / (4 (x + l/2 + d)^3) * (eps0-1)/(eps0+1), in J.
pub fn v_cp_thermal(x_m: f64, s: &SurfaceSetup) -> Result<f64> {
    let sep = s.separation(x_m);
    if !(sep > 0.0) {
        return Err(Error::NonPhysicalGeometry { separation_m: sep });
    }
    if !(s.temperature_k > 0.0) {
        return Err(Error::invalid("temperature_k", "thermal law needs T > 0"));
    }
    Ok(
        -CODATA.k_boltzmann * s.temperature_k * s.alpha0_m3 / (4.0 * sep.powi(3))
            * s.dielectric_factor(),
    )
}

/// Thermal wavelength hbar c / (k_B T) of the photons emitted by the plate.
pub fn thermal_wavelength(t_k: f64) -> Result<f64> {
    if !(t_k > 0.0) {
        return Err(Error::invalid(
            "temperature_k",
            "temperature must be positive",
        ));
    }
    Ok(CODATA.hbar * CODATA.c_light / (CODATA.k_boltzmann * t_k))
}

/// Detuning rate with its numerical-integration error bound.
#[derive(Debug, Clone, Copy)]
pub struct DetuningResult {
    /// delta/hbar in 1/s.
    pub delta_rate: f64,
    /// Propagated quadrature error (0 for point-sampled modes).
    pub quad_error: f64,
}

/// Inter-well detuning delta/hbar = (<V>_b - <V>_a) / (2 hbar), in 1/s.
///
/// Well a is nearer the plate, so attractive potentials give delta > 0. The
/// half-difference matches the delta Jz coupling with Jz = (n_a - n_b)/2. A
/// nonzero `localization_mix` eps mixes the mode densities and rescales the
/// result by (1 - 2 eps) exactly.
pub fn detuning(s: &SurfaceSetup, kind: PotentialKind) -> Result<DetuningResult> {
    s.validate()?;
    let potential = |x: f64| -> Result<f64> {
        match kind {
            PotentialKind::ZeroTemperature => v_cp_zero_temperature(x, s),
            PotentialKind::Thermal => v_cp_thermal(x, s),
        }
    };
    let half_l = s.l_m / 2.0;
    let (va, vb, err) = match s.mode_model {
        ModeModel::PointSample => {
            let va = potential(-half_l)?;
            let vb = potential(half_l)?;
            (va, vb, 0.0)
        }
        ModeModel::Gaussian { width_m } => {
            if width_m > s.d_m / 3.0 {
                return Err(Error::invalid(
                    "width_m",
                    format!(
                        "Gaussian tail would overlap the plate: width {width_m} > d/3 = {}",
                        s.d_m / 3.0
                    ),
                ));
            }
            let (va, ea) = mode_average(&potential, -half_l, width_m, s)?;
            let (vb, eb) = mode_average(&potential, half_l, width_m, s)?;
            (va, vb, ea + eb)
        }
    };
    let scale = 1.0 - 2.0 * s.localization_mix;
    Ok(DetuningResult {
        delta_rate: scale * (vb - va) / (2.0 * CODATA.hbar),
        quad_error: scale * err / (2.0 * CODATA.hbar),
    })
}

/// Gaussian-weighted average of the potential around a well center.
///
/// Integrates over +-8 widths, clipped to stay strictly off the plate, and
/// normalizes by the weight integrated over the same window.
fn mode_average<P>(potential: &P, center: f64, width: f64, s: &SurfaceSetup) -> Result<(f64, f64)>
where
    P: Fn(f64) -> Result<f64>,
{
    let plate_x = -s.l_m / 2.0 - s.d_m;
    let lo = (center - 8.0 * width).max(plate_x + 1e-3 * width);
    let hi = center + 8.0 * width;
    let weight = |x: f64| {
        let u = (x - center) / width;
        (-0.5 * u * u).exp()
    };
    // The potential is finite on [lo, hi] by construction; sample once to
    // surface geometry errors before the closures go numeric.
    potential(lo)?;
    let num = adaptive_simpson(
        |x| weight(x) * potential(x).unwrap_or(f64::NAN),
        lo,
        hi,
        1e-9,
    )?;
    let den = adaptive_simpson(weight, lo, hi, 1e-9)?;
    if !(den.value > 0.0) {
        return Err(Error::invalid("width_m", "degenerate mode weight"));
    }
    let avg = num.value / den.value;
    let err = (num.error + avg.abs() * den.error) / den.value;
    Ok((avg, err))
}

/// One row of the detuning-vs-distance table.
#[derive(Debug, Clone)]
pub struct DetuningRow {
    pub d_m: f64,
    /// Zero-temperature detuning, 1/s.
    pub delta_zero_t: f64,
    /// Thermal detunings, one per requested temperature, 1/s.
    pub delta_thermal: Vec<f64>,
    /// Worst propagated quadrature error across the row.
    pub quad_error: f64,
}

/// Plot-ready detuning table over a distance grid.
#[derive(Debug, Clone)]
pub struct DetuningTable {
    pub temperatures_k: Vec<f64>,
    pub rows: Vec<DetuningRow>,
}

impl DetuningTable {
    /// CSV with header `d_m, delta_0K_persec, delta_<T>K_persec..., err_persec`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("d_m,delta_0K_persec");
        for t in &self.temperatures_k {
            out.push_str(&format!(",delta_{}K_persec", t));
        }
        out.push_str(",err_persec\n");
        for row in &self.rows {
            out.push_str(&format!("{},{}", row.d_m, row.delta_zero_t));
            for v in &row.delta_thermal {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(&format!(",{}\n", row.quad_error));
        }
        out
    }
}

/// Evaluate the zero-temperature and thermal detunings over a distance grid.
pub fn detuning_curve(
    d_grid_m: &[f64],
    s: &SurfaceSetup,
    temperatures_k: &[f64],
) -> Result<DetuningTable> {
    if d_grid_m.is_empty() {
        return Err(Error::invalid("d_grid", "empty distance grid"));
    }
    let mut rows = Vec::with_capacity(d_grid_m.len());
    for &d in d_grid_m {
        if !(d > 0.0) {
            return Err(Error::invalid("d_grid", "distances must be positive"));
        }
        let setup = s.with_distance(d);
        let zero = detuning(&setup, PotentialKind::ZeroTemperature)?;
        let mut delta_thermal = Vec::with_capacity(temperatures_k.len());
        let mut err = zero.quad_error;
        for &t in temperatures_k {
            let th = detuning(&setup.with_temperature(t), PotentialKind::Thermal)?;
            err = err.max(th.quad_error);
            delta_thermal.push(th.delta_rate);
        }
        rows.push(DetuningRow {
            d_m: d,
            delta_zero_t: zero.delta_rate,
            delta_thermal,
            quad_error: err,
        });
    }
    Ok(DetuningTable {
        temperatures_k: temperatures_k.to_vec(),
        rows,
    })
}

/// Separation at which the zero-temperature and thermal magnitudes cross,
/// found by bisection. Analytically 0.96 lambda_th; solved numerically so
/// the two printed laws check each other.
pub fn potential_crossing_separation(s: &SurfaceSetup) -> Result<f64> {
    if !(s.temperature_k > 0.0) {
        return Err(Error::invalid("temperature_k", "crossing needs T > 0"));
    }
    let lam = thermal_wavelength(s.temperature_k)?;
    // |V0|/|Vth| = 0.96 lambda / sep: monotone, bracket around lambda
    let f = |sep: f64| -> f64 {
        let x = sep - s.l_m / 2.0 - s.d_m; // map separation back to x
        let v0 = v_cp_zero_temperature(x, s).unwrap();
        let vt = v_cp_thermal(x, s).unwrap();
        v0.abs() - vt.abs()
    };
    let (mut lo, mut hi) = (0.05 * lam, 20.0 * lam);
    if f(lo) <= 0.0 || f(hi) >= 0.0 {
        return Err(Error::DegenerateInput("crossing not bracketed".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * lam {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
