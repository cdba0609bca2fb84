//! Measurement model, Fisher-information sensitivity, Monte-Carlo record
//! generation, and maximum-likelihood fitting of the detuning.
//!
//! The population imbalance is measured at k times with m repetitions each.
//! For m >> 1 the sample mean at each time is Gaussian with mean <Jz(t,delta)>
//! and variance (Var Jz(t,delta) + sigma_res^2)/m; detection noise convolves
//! every shot, so the variances add before dividing by m. The single-time
//! sensitivity is
//!
//!   Delta^2 delta(t) = (Var Jz + sigma_res^2) / (m [d<Jz>/d delta]^2),
//!
//! and the fit error aggregates inverse variances over the schedule:
//! Delta^2 delta_ML = (sum_i 1/Delta^2 delta(t_i))^-1, the inverse Fisher
//! information of the joint Gaussian model.
//!
//! When residual interactions are switched on (gamma > 0) the model mean
//! includes the first-order Dyson correction, mirroring an analysis that
//! knows the interaction strength; the remaining fit bias is second order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dynamics::{
    dyson_correction_quiet, mean_jz, mean_jz_derivative, var_jz, InterferometerParams,
};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Strategy};
use crate::spin_states::SpinMoments;

/// Probe times and per-time repetition count.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSchedule {
    times_s: Vec<f64>,
    repetitions: usize,
}

impl MeasurementSchedule {
    /// Times must be strictly positive and increasing; k >= 1, m >= 1.
    pub fn new(times_s: Vec<f64>, repetitions: usize) -> Result<Self> {
        if times_s.is_empty() {
            return Err(Error::invalid("times", "need at least one probe time"));
        }
        if repetitions == 0 {
            return Err(Error::invalid(
                "repetitions",
                "need at least one repetition",
            ));
        }
        let mut prev = 0.0;
        for &t in &times_s {
            if !(t > prev) || !t.is_finite() {
                return Err(Error::invalid(
                    "times",
                    "times must be strictly positive and increasing",
                ));
            }
            prev = t;
        }
        Ok(Self {
            times_s,
            repetitions,
        })
    }

    /// k uniformly spaced times t_i = 2 pi i / (omega k) across the first
    /// Rabi period.
    pub fn uniform_first_period(p: &InterferometerParams, k: usize, m: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k", "need at least one probe time"));
        }
        let period = p.rabi_period();
        let times = (1..=k).map(|i| i as f64 * period / k as f64).collect();
        Self::new(times, m)
    }

    /// All mk measurements at the optimal working point t = pi / omega.
    pub fn optimal_point(p: &InterferometerParams, mk: usize) -> Result<Self> {
        Self::new(vec![std::f64::consts::PI / p.omega()], mk)
    }

    pub fn times(&self) -> &[f64] {
        &self.times_s
    }

    pub fn repetitions(&self) -> usize {
        self.repetitions
    }

    pub fn len(&self) -> usize {
        self.times_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_s.is_empty()
    }
}

/// The two experimental noise channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// gamma = N E_C / E_J, the residual-interaction strength.
    pub gamma: f64,
    /// Detection resolution (std. dev. in particles) of each imbalance shot.
    pub sigma_res: f64,
}

impl NoiseModel {
    pub const NONE: NoiseModel = NoiseModel {
        gamma: 0.0,
        sigma_res: 0.0,
    };

    pub fn new(gamma: f64, sigma_res: f64) -> Result<Self> {
        if !(gamma >= 0.0) {
            return Err(Error::invalid("gamma", "must be non-negative"));
        }
        if !(sigma_res >= 0.0) {
            return Err(Error::invalid("sigma_res", "must be non-negative"));
        }
        Ok(Self { gamma, sigma_res })
    }

    fn ec_rate(&self, state_m: &SpinMoments, p: &InterferometerParams) -> f64 {
        if self.gamma == 0.0 {
            0.0
        } else {
            self.gamma * p.ej_rate() / state_m.particles() as f64
        }
    }
}

/// Model mean of a single imbalance shot, including the first-order
/// interaction correction when gamma > 0.
pub fn model_mean(
    state_m: &SpinMoments,
    p: &InterferometerParams,
    t: f64,
    noise: &NoiseModel,
) -> Result<f64> {
    let bare = mean_jz(state_m, p, t);
    if noise.gamma == 0.0 {
        return Ok(bare);
    }
    let corr = dyson_correction_quiet(state_m, p, t, noise.ec_rate(state_m, p))?;
    Ok(bare + corr)
}

/// Per-shot variance: quantum projection noise plus detection noise.
fn shot_variance(
    state_m: &SpinMoments,
    p: &InterferometerParams,
    t: f64,
    noise: &NoiseModel,
) -> f64 {
    var_jz(state_m, p, t) + noise.sigma_res * noise.sigma_res
}

/// Distribution of the sample mean of m imbalance shots at one probe time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShotDistribution {
    Gaussian {
        mean: f64,
        variance: f64,
    },
    /// Degenerate zero-variance case (e.g. a Jz eigenstate at t = 0 with
    /// perfect detection); flagged rather than silently divided by zero.
    PointMass {
        value: f64,
    },
}

impl ShotDistribution {
    pub fn density(&self, n: f64) -> f64 {
        match *self {
            ShotDistribution::Gaussian { mean, variance } => {
                let z = n - mean;
                (-z * z / (2.0 * variance)).exp() / (2.0 * std::f64::consts::PI * variance).sqrt()
            }
            ShotDistribution::PointMass { value } => {
                if n == value {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ShotDistribution::Gaussian { mean, .. } => mean,
            ShotDistribution::PointMass { value } => value,
        }
    }
}

/// p(n_i | delta): Gaussian with mean <Jz(t,delta)> and variance
/// (Var Jz + sigma_res^2)/m. `p` carries the conditioning delta.
pub fn shot_distribution(
    state_m: &SpinMoments,
    p: &InterferometerParams,
    t: f64,
    noise: &NoiseModel,
    m: usize,
) -> Result<ShotDistribution> {
    if m == 0 {
        return Err(Error::invalid("m", "need at least one repetition"));
    }
    let mean = model_mean(state_m, p, t, noise)?;
    let variance = shot_variance(state_m, p, t, noise) / m as f64;
    if variance <= 0.0 {
        return Ok(ShotDistribution::PointMass { value: mean });
    }
    Ok(ShotDistribution::Gaussian { mean, variance })
}

/// Density of observing sample mean `n` at time `t` given the detuning in `p`.
pub fn shot_probability(
    n: f64,
    state_m: &SpinMoments,
    p: &InterferometerParams,
    t: f64,
    noise: &NoiseModel,
    m: usize,
) -> Result<f64> {
    Ok(shot_distribution(state_m, p, t, noise, m)?.density(n))
}

/// Single-time sensitivity Delta^2 delta(t) in (1/s)^2.
///
/// The delta derivative of the mean is analytic (closed-form derivatives of
/// the rotation coefficients); a central-difference cross-check lives in the
/// tests. Errors at derivative zeros, where no information is acquired.
pub fn single_time_sensitivity(
    state_m: &SpinMoments,
    p: &InterferometerParams,
    t: f64,
    m: usize,
    noise: &NoiseModel,
) -> Result<f64> {
    if m == 0 {
        return Err(Error::invalid("m", "need at least one repetition"));
    }
    let dmean = mean_jz_derivative(state_m, p, t);
    if dmean == 0.0 {
        return Err(Error::DivergentSensitivity { t_s: t });
    }
    let var = shot_variance(state_m, p, t, noise);
    Ok(var / (m as f64 * dmean * dmean))
}

/// Per-time sensitivities over a schedule; divergent points come back as
/// +inf so the aggregation can skip them (a uniform grid's full-period point
/// carries no delta information).
pub fn per_time_sensitivities(
    state_m: &SpinMoments,
    p: &InterferometerParams,
    schedule: &MeasurementSchedule,
    noise: &NoiseModel,
) -> Vec<f64> {
    schedule
        .times()
        .iter()
        .map(|&t| {
            single_time_sensitivity(state_m, p, t, schedule.repetitions(), noise)
                .unwrap_or(f64::INFINITY)
        })
        .collect()
}

/// Delta delta_ML = (sum_i 1/Delta^2 delta(t_i))^(-1/2).
///
/// Infinite entries contribute zero weight; rejects an all-infinite input.
pub fn aggregate_sensitivity(per_time: &[f64]) -> Result<f64> {
    if per_time.is_empty() {
        return Err(Error::invalid("per_time", "nothing to aggregate"));
    }
    let mut fisher = 0.0;
    let mut finite = 0usize;
    for &s2 in per_time {
        if s2.is_nan() || s2 <= 0.0 {
            return Err(Error::DegenerateInput(format!(
                "per-time sensitivity {s2} is not a positive variance"
            )));
        }
        if s2.is_finite() {
            fisher += 1.0 / s2;
            finite += 1;
        }
    }
    if finite == 0 {
        return Err(Error::AllDivergent);
    }
    Ok(fisher.recip().sqrt())
}

/// Exact closed-form CSS sensitivity Delta delta(t)/delta for m repetitions.
///
/// Derived from the rotation route with binomial moments:
/// Var Jz(t) = (N/4)(1 - u^2) and d<Jz>/d(delta) =
/// (N/2)(cos a/omega)[(cos W - 1)cos 2a - sin^2 a W sin W]. Reduces to the
/// familiar 1/(sqrt(m N) tan a |cos W - 1 - (sin^2 a/cos a) W sin W|) for
/// small a. Returns +inf at derivative zeros.
pub fn css_relative_sensitivity(
    particles: usize,
    p: &InterferometerParams,
    t: f64,
    m: usize,
) -> f64 {
    let w_t = p.omega() * t;
    let (sin_w, cos_w) = w_t.sin_cos();
    let (sa, ca) = (p.sin_alpha(), p.cos_alpha());
    let cos_2a = ca * ca - sa * sa;
    let u = sa * ca * (cos_w - 1.0);
    let bracket = (cos_w - 1.0) * cos_2a - sa * sa * w_t * sin_w;
    if bracket == 0.0 {
        return f64::INFINITY;
    }
    (1.0 - u * u).sqrt() / ((m as f64 * particles as f64).sqrt() * (sa * ca).abs() * bracket.abs())
}

/// A measurement record: per-time sample means of the imbalance.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    times_s: Vec<f64>,
    means: Vec<f64>,
}

impl MeasurementRecord {
    pub fn new(times_s: Vec<f64>, means: Vec<f64>) -> Result<Self> {
        if times_s.len() != means.len() || times_s.is_empty() {
            return Err(Error::invalid(
                "record",
                "times and means must align and be non-empty",
            ));
        }
        Ok(Self { times_s, means })
    }

    pub fn times(&self) -> &[f64] {
        &self.times_s
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// CSV with header `t_s,n_mean`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_s,n_mean\n");
        for (t, n) in self.times_s.iter().zip(&self.means) {
            out.push_str(&format!("{t},{n}\n"));
        }
        out
    }

    /// Parse the `t_s,n_mean` format; errors carry 1-based line numbers.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut times = Vec::new();
        let mut means = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (idx == 0 && line.starts_with("t_s")) {
                continue;
            }
            let mut parts = line.split(',');
            let t = parts
                .next()
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| {
                    Error::invalid("record", format!("line {}: bad time field", idx + 1))
                })?;
            let n = parts
                .next()
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| {
                    Error::invalid("record", format!("line {}: bad mean field", idx + 1))
                })?;
            times.push(t);
            means.push(n);
        }
        Self::new(times, means)
    }
}

/// Draw a record: for each probe time, the sample mean of m Gaussian shots
/// with mean <Jz(t, delta_true)> and per-shot variance Var Jz + sigma_res^2.
/// `p` carries the true detuning. Deterministic for a given seed.
pub fn simulate_record(
    state_m: &SpinMoments,
    p: &InterferometerParams,
    schedule: &MeasurementSchedule,
    noise: &NoiseModel,
    seed: u64,
) -> Result<MeasurementRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_record_with_rng(state_m, p, schedule, noise, &mut rng)
}

/// Record generation on a caller-provided stream (Monte-Carlo trials pin one
/// ChaCha stream per trial index so results are schedule-independent).
pub fn simulate_record_with_rng(
    state_m: &SpinMoments,
    p: &InterferometerParams,
    schedule: &MeasurementSchedule,
    noise: &NoiseModel,
    rng: &mut ChaCha8Rng,
) -> Result<MeasurementRecord> {
    let m = schedule.repetitions();
    let mut means = Vec::with_capacity(schedule.len());
    for &t in schedule.times() {
        let mu = model_mean(state_m, p, t, noise)?;
        let var = shot_variance(state_m, p, t, noise);
        if var <= 0.0 {
            // degenerate zero-variance channel: shots equal the mean exactly
            means.push(mu);
            continue;
        }
        let normal = Normal::new(mu, var.sqrt())
            .map_err(|e| Error::invalid("shot", format!("bad distribution: {e}")))?;
        let sum: f64 = (0..m).map(|_| normal.sample(rng)).sum();
        means.push(sum / m as f64);
    }
    MeasurementRecord::new(schedule.times().to_vec(), means)
}

/// Outcome of a single-parameter fit.
#[derive(Debug, Clone)]
pub struct EstimationResult {
    /// Fitted detuning, 1/s.
    pub delta_est: f64,
    /// Delta delta_ML from the Fisher aggregate at the fitted value, 1/s.
    pub delta_err: f64,
    /// Per-time Delta^2 delta(t_i) at the fitted value, (1/s)^2.
    pub per_time_sensitivity: Vec<f64>,
    /// Objective evaluations spent by the line search.
    pub iterations: usize,
    /// Objective at the optimum (negative log-likelihood or weighted SSR).
    pub residual: f64,
}

/// Which objective the fit minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMethod {
    /// Residuals weighted by the delta-dependent model variance
    /// (iteratively-reweighted-least-squares equivalent of the Gaussian
    /// maximum-likelihood estimate).
    MaxLikelihood,
    /// Weighted least squares with weights frozen at the search-interval
    /// midpoint (the "least squares fit of a theoretical curve" reading).
    FixedWeightLeastSquares,
}

/// Maximum-likelihood estimate of the detuning from a record.
///
/// E_J is known; delta is the single fit parameter, located by a bounded
/// Brent search (relative tolerance well below 1e-6) over `search`, which
/// must bracket the truth.
pub fn fit_ml(
    record: &MeasurementRecord,
    state_m: &SpinMoments,
    ej_rate: f64,
    repetitions: usize,
    noise: &NoiseModel,
    search: (f64, f64),
) -> Result<EstimationResult> {
    fit(
        record,
        state_m,
        ej_rate,
        repetitions,
        noise,
        search,
        FitMethod::MaxLikelihood,
    )
}

/// Fixed-weight least-squares variant; agrees with `fit_ml` within
/// Delta delta_ML / 10 at the reference working point.
pub fn fit_least_squares(
    record: &MeasurementRecord,
    state_m: &SpinMoments,
    ej_rate: f64,
    repetitions: usize,
    noise: &NoiseModel,
    search: (f64, f64),
) -> Result<EstimationResult> {
    fit(
        record,
        state_m,
        ej_rate,
        repetitions,
        noise,
        search,
        FitMethod::FixedWeightLeastSquares,
    )
}

fn fit(
    record: &MeasurementRecord,
    state_m: &SpinMoments,
    ej_rate: f64,
    repetitions: usize,
    noise: &NoiseModel,
    search: (f64, f64),
    method: FitMethod,
) -> Result<EstimationResult> {
    let (lo, hi) = search;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid("search", "need a finite interval lo < hi"));
    }
    if noise.gamma > 0.5 {
        return Err(Error::invalid("gamma", "beyond the perturbative model"));
    }
    let m = repetitions as f64;
    if repetitions == 0 {
        return Err(Error::invalid(
            "repetitions",
            "need at least one repetition",
        ));
    }

    // Weights for the fixed-weight mode come from the model variance at the
    // interval midpoint and stay frozen during the search.
    let fixed_weights: Option<Vec<f64>> = match method {
        FitMethod::MaxLikelihood => None,
        FitMethod::FixedWeightLeastSquares => {
            let p_ref = InterferometerParams::new(ej_rate, 0.5 * (lo + hi))?;
            Some(
                record
                    .times()
                    .iter()
                    .map(|&t| {
                        let v = shot_variance(state_m, &p_ref, t, noise) / m;
                        if v > 0.0 {
                            1.0 / v
                        } else {
                            0.0
                        }
                    })
                    .collect(),
            )
        }
    };

    let objective = |delta: f64| -> f64 {
        let p = match InterferometerParams::new(ej_rate, delta) {
            Ok(p) => p,
            Err(_) => return f64::INFINITY,
        };
        let mut acc = 0.0;
        for (i, (&t, &n)) in record.times().iter().zip(record.means()).enumerate() {
            let mu = match model_mean(state_m, &p, t, noise) {
                Ok(mu) => mu,
                Err(_) => return f64::INFINITY,
            };
            let r = n - mu;
            match &fixed_weights {
                Some(w) => acc += w[i] * r * r,
                None => {
                    // delta-dependent weights, no ln(var) term: the variance
                    // carries no delta information in this model (the Fisher
                    // information is built on the mean derivative alone), so
                    // the estimator is the reweighted-least-squares fixed
                    // point and a zero-noise record recovers delta exactly.
                    let var = shot_variance(state_m, &p, t, noise) / m;
                    if var <= 0.0 {
                        return f64::INFINITY;
                    }
                    acc += r * r / var;
                }
            }
        }
        acc
    };

    let tol = 1e-9 * hi.abs().max(lo.abs()).max(1.0);
    let found = brent_min(&objective, lo, hi, tol, 300);
    if !found.f_min.is_finite() {
        return Err(Error::FlatLikelihood);
    }
    let edge = 1e-4 * (hi - lo);
    if found.x_min <= lo + edge || found.x_min >= hi - edge {
        return Err(Error::OptimumNotBracketed { lo, hi });
    }

    let p_est = InterferometerParams::new(ej_rate, found.x_min)?;
    let schedule = MeasurementSchedule::new(record.times().to_vec(), repetitions)?;
    let per_time = per_time_sensitivities(state_m, &p_est, &schedule, noise);
    let delta_err = aggregate_sensitivity(&per_time)?;
    Ok(EstimationResult {
        delta_est: found.x_min,
        delta_err,
        per_time_sensitivity: per_time,
        iterations: found.evaluations,
        residual: found.f_min,
    })
}

/// One row of the fitted-result CSV:
/// `delta_est_persec,delta_err_persec,k,m,xi2,sigma_res,gamma,seed`.
pub fn result_to_csv(
    result: &EstimationResult,
    k: usize,
    m: usize,
    xi2: f64,
    noise: &NoiseModel,
    seed: u64,
) -> String {
    format!(
        "delta_est_persec,delta_err_persec,k,m,xi2,sigma_res,gamma,seed\n{},{},{},{},{},{},{},{}\n",
        result.delta_est, result.delta_err, k, m, xi2, noise.sigma_res, noise.gamma, seed
    )
}

/// Monte-Carlo summary of repeated simulate-and-fit trials.
#[derive(Debug, Clone, Copy)]
pub struct MonteCarloSummary {
    pub trials: usize,
    /// Root-mean-square error of delta_est against the truth.
    pub rmse: f64,
    pub mean_est: f64,
    /// Trials whose fit failed (excluded from the moments).
    pub failures: usize,
}

/// Run seeded simulate-and-fit trials and compare the estimator spread with
/// the truth. Trial i draws from ChaCha stream i+1 of `seed`, so the result
/// is identical however the work is scheduled.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_fit_rmse(
    state_m: &SpinMoments,
    p_true: &InterferometerParams,
    schedule: &MeasurementSchedule,
    noise: &NoiseModel,
    seed: u64,
    trials: usize,
    search: (f64, f64),
    strategy: Strategy,
) -> Result<MonteCarloSummary> {
    if trials == 0 {
        return Err(Error::invalid("trials", "need at least one trial"));
    }
    let estimates: Vec<Option<f64>> = map_indexed(strategy, trials, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64 + 1);
        let record = simulate_record_with_rng(state_m, p_true, schedule, noise, &mut rng).ok()?;
        let fitres = fit_ml(
            &record,
            state_m,
            p_true.ej_rate(),
            schedule.repetitions(),
            noise,
            search,
        )
        .ok()?;
        Some(fitres.delta_est)
    });
    let truth = p_true.delta_rate();
    let mut sq = 0.0;
    let mut sum = 0.0;
    let mut ok = 0usize;
    for est in estimates.iter().flatten() {
        sq += (est - truth) * (est - truth);
        sum += est;
        ok += 1;
    }
    if ok == 0 {
        return Err(Error::DegenerateInput(
            "every Monte-Carlo fit failed".into(),
        ));
    }
    Ok(MonteCarloSummary {
        trials,
        rmse: (sq / ok as f64).sqrt(),
        mean_est: sum / ok as f64,
        failures: trials - ok,
    })
}

/// Least-squares exponent beta of Delta delta ~ N^(-beta).
///
/// Needs at least four distinct particle numbers spanning a decade.
pub fn scaling_exponent(results: &[(f64, f64)]) -> Result<f64> {
    if results.len() < 4 {
        return Err(Error::DegenerateInput(
            "need at least 4 (N, delta_err) points".into(),
        ));
    }
    let mut ns: Vec<f64> = results.iter().map(|r| r.0).collect();
    ns.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ns.dedup();
    if ns.len() < 4 {
        return Err(Error::DegenerateInput("need 4 distinct N values".into()));
    }
    if ns[ns.len() - 1] / ns[0] < 10.0 {
        return Err(Error::DegenerateInput(
            "N values must span at least one decade".into(),
        ));
    }
    for &(n, err) in results {
        if !(n > 0.0) || !(err > 0.0) || !err.is_finite() {
            return Err(Error::DegenerateInput(format!(
                "non-positive entry (N={n}, err={err})"
            )));
        }
    }
    // slope of ln(err) against ln(N)
    let k = results.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(n, err) in results {
        let x = n.ln();
        let y = err.ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let denom = k * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return Err(Error::DegenerateInput("degenerate regression".into()));
    }
    Ok(-(k * sxy - sx * sy) / denom)
}

struct BrentResult {
    x_min: f64,
    f_min: f64,
    evaluations: usize,
}

/// Bounded scalar minimization: golden-section with parabolic acceleration.
fn brent_min<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, max_iter: usize) -> BrentResult {
    const GOLD: f64 = 0.381_966_011_250_105; // (3 - sqrt(5)) / 2
    let (mut a, mut b) = (a, b);
    let mut x = a + GOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    let mut evals = 1usize;
    for _ in 0..max_iter {
        let mid = 0.5 * (a + b);
        let tol1 = tol.max(1e-14 * x.abs());
        let tol2 = 2.0 * tol1;
        if (x - mid).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut use_golden = true;
        if e.abs() > tol1 {
            // parabolic step through x, w, v
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            e = d;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if mid > x { tol1 } else { -tol1 };
                }
                use_golden = false;
            }
        }
        if use_golden {
            e = if x < mid { b - x } else { a - x };
            d = GOLD * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else {
            x + if d > 0.0 { tol1 } else { -tol1 }
        };
        let fu = f(u);
        evals += 1;
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    BrentResult {
        x_min: x,
        f_min: fx,
        evaluations: evals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin_states::{
        make_css, make_gaussian_squeezed, make_twin_fock, sigma_for_squeezing,
    };
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn reference_css() -> (SpinMoments, InterferometerParams) {
        (
            make_css(2500).unwrap().moments(),
            InterferometerParams::reference(),
        )
    }

    #[test]
    fn brent_finds_quadratic_minimum() {
        // function-value minimization localizes a smooth minimum to
        // ~sqrt(machine eps) at best
        let r = brent_min(&|x: f64| (x - 1.7).powi(2) + 3.0, 0.0, 5.0, 1e-12, 200);
        assert_abs_diff_eq!(r.x_min, 1.7, epsilon = 1e-7);
        assert_abs_diff_eq!(r.f_min, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn schedule_validation() {
        assert!(MeasurementSchedule::new(vec![], 5).is_err());
        assert!(MeasurementSchedule::new(vec![0.0, 0.1], 5).is_err());
        assert!(MeasurementSchedule::new(vec![0.2, 0.1], 5).is_err());
        assert!(MeasurementSchedule::new(vec![0.1, 0.2], 0).is_err());
        let p = InterferometerParams::reference();
        let s = MeasurementSchedule::uniform_first_period(&p, 10, 10).unwrap();
        assert_eq!(s.len(), 10);
        assert_relative_eq!(s.times()[9], p.rabi_period(), max_relative = 1e-14);
    }

    #[test]
    fn noise_model_validation() {
        assert!(NoiseModel::new(-0.1, 0.0).is_err());
        assert!(NoiseModel::new(0.0, -1.0).is_err());
        assert_eq!(NoiseModel::NONE.sigma_res, 0.0);
    }

    #[test]
    fn shot_distribution_reduces_to_bare_model_without_noise() {
        let (m, p) = reference_css();
        let t = 0.3 * p.rabi_period();
        let d = shot_distribution(&m, &p, t, &NoiseModel::NONE, 7).unwrap();
        match d {
            ShotDistribution::Gaussian { mean, variance } => {
                assert_relative_eq!(mean, mean_jz(&m, &p, t), max_relative = 1e-14);
                assert_relative_eq!(variance, var_jz(&m, &p, t) / 7.0, max_relative = 1e-14);
            }
            _ => panic!("expected Gaussian"),
        }
    }

    #[test]
    fn shot_variance_adds_detection_noise_per_shot() {
        let (m, p) = reference_css();
        let noise = NoiseModel::new(0.0, 40.0).unwrap();
        let t = std::f64::consts::PI / p.omega();
        for mk in [1usize, 10] {
            let d = shot_distribution(&m, &p, t, &noise, mk).unwrap();
            if let ShotDistribution::Gaussian { variance, .. } = d {
                // var_jz example + quadrature addition: ~ (625 + 1600)/m
                assert_relative_eq!(variance, 2225.0 / mk as f64, max_relative = 0.01);
            } else {
                panic!("expected Gaussian");
            }
        }
    }

    #[test]
    fn shot_density_integrates_to_one() {
        let (m, p) = reference_css();
        let noise = NoiseModel::new(0.0, 40.0).unwrap();
        let t = 0.4 * p.rabi_period();
        let d = shot_distribution(&m, &p, t, &noise, 10).unwrap();
        let (mean, sd) = match d {
            ShotDistribution::Gaussian { mean, variance } => (mean, variance.sqrt()),
            _ => panic!(),
        };
        let integral = crate::quad::adaptive_simpson(
            |n| d.density(n),
            mean - 8.5 * sd,
            mean + 8.5 * sd,
            1e-11,
        )
        .unwrap();
        assert_abs_diff_eq!(integral.value, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn degenerate_zero_variance_is_flagged() {
        // twin Fock has Var Jz = 0 at t -> 0; with perfect detection the
        // distribution collapses to a point mass
        let m = make_twin_fock(100).unwrap().moments();
        let p = InterferometerParams::new(52.3, 0.0).unwrap();
        let d = shot_distribution(&m, &p, 1e-300, &NoiseModel::NONE, 1).unwrap();
        assert!(matches!(d, ShotDistribution::PointMass { .. }));
        assert_eq!(d.density(1.0), 0.0);
    }

    #[test]
    fn sensitivity_matches_closed_form_on_css() {
        let (m, p) = reference_css();
        let delta = p.delta_rate();
        for i in 1..40 {
            let t = i as f64 * p.rabi_period() / 41.0;
            let generic = single_time_sensitivity(&m, &p, t, 1, &NoiseModel::NONE)
                .unwrap()
                .sqrt()
                / delta;
            let closed = css_relative_sensitivity(2500, &p, t, 1);
            assert_relative_eq!(generic, closed, max_relative = 1e-10);
        }
    }

    #[test]
    fn css_optimal_point_values() {
        let (_, p) = reference_css();
        let t_opt = std::f64::consts::PI / p.omega();
        let rel = css_relative_sensitivity(2500, &p, t_opt, 1);
        assert_abs_diff_eq!(rel, 0.1189, epsilon = 1e-3);
        // mk = 100 at the optimal point
        assert_abs_diff_eq!(rel / 10.0, 0.0119, epsilon = 1e-4);
    }

    #[test]
    fn sensitivity_diverges_at_zero_time_and_full_period() {
        let (m, p) = reference_css();
        assert!(matches!(
            single_time_sensitivity(&m, &p, 0.0, 1, &NoiseModel::NONE),
            Err(Error::DivergentSensitivity { .. })
        ));
        let schedule = MeasurementSchedule::uniform_first_period(&p, 10, 10).unwrap();
        let per = per_time_sensitivities(&m, &p, &schedule, &NoiseModel::NONE);
        // the full-period point carries no delta signal: its variance is
        // astronomically larger than any informative point (exactly zero
        // derivative rounds to inf; here rounding leaves a huge finite value)
        assert!(per[9] > 1e12 * per[4]);
        assert!(per[..9].iter().all(|s| s.is_finite()));
    }

    #[test]
    fn aggregate_identical_points_scales_as_sqrt_k() {
        let s2 = 0.37;
        let one = aggregate_sensitivity(&[s2]).unwrap();
        let nine = aggregate_sensitivity(&[s2; 9]).unwrap();
        assert_relative_eq!(nine, one / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn aggregate_rejects_all_divergent_and_nan() {
        assert!(matches!(
            aggregate_sensitivity(&[f64::INFINITY, f64::INFINITY]),
            Err(Error::AllDivergent)
        ));
        assert!(aggregate_sensitivity(&[]).is_err());
        assert!(aggregate_sensitivity(&[0.1, f64::NAN]).is_err());
        assert!(aggregate_sensitivity(&[0.1, -0.2]).is_err());
    }

    #[test]
    fn optimal_point_formula_in_terms_of_squeezing() {
        // Delta delta_ML / delta = xi omega / (2 delta sqrt(N) sqrt(mk))
        // within O(sin^2 alpha) ~ 0.5% at the reference point, for symmetric
        // states at the optimal time.
        let p = InterferometerParams::reference();
        let t_opt = std::f64::consts::PI / p.omega();
        let n = 2500usize;
        let mk = 100usize;
        for state in [
            make_css(n).unwrap(),
            make_gaussian_squeezed(n, sigma_for_squeezing(n, 0.5).unwrap()).unwrap(),
        ] {
            let m = state.moments();
            let xi2 = crate::spin_states::squeezing_parameter(&m).unwrap();
            let s2 = single_time_sensitivity(&m, &p, t_opt, mk, &NoiseModel::NONE).unwrap();
            let exact = s2.sqrt() / p.delta_rate();
            let formula = xi2.sqrt() * p.omega()
                / (2.0 * p.delta_rate() * (n as f64).sqrt() * (mk as f64).sqrt());
            assert_relative_eq!(exact, formula, max_relative = 6e-3);
        }
    }

    #[test]
    fn detection_noise_doubles_the_uniform_grid_error() {
        let (m, p) = reference_css();
        let schedule = MeasurementSchedule::uniform_first_period(&p, 10, 10).unwrap();
        let clean = aggregate_sensitivity(&per_time_sensitivities(
            &m,
            &p,
            &schedule,
            &NoiseModel::NONE,
        ))
        .unwrap();
        let noisy = aggregate_sensitivity(&per_time_sensitivities(
            &m,
            &p,
            &schedule,
            &NoiseModel::new(0.0, 40.0).unwrap(),
        ))
        .unwrap();
        let ratio = noisy / clean;
        assert!((1.8..=2.1).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn record_csv_round_trip_and_line_errors() {
        let rec = MeasurementRecord::new(vec![0.1, 0.2], vec![-3.5, 2.0]).unwrap();
        let csv = rec.to_csv();
        assert!(csv.starts_with("t_s,n_mean\n"));
        let back = MeasurementRecord::from_csv(&csv).unwrap();
        assert_eq!(back, rec);
        let err = MeasurementRecord::from_csv("t_s,n_mean\n0.1,notanumber\n").unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn simulated_records_are_seed_deterministic() {
        let (m, p) = reference_css();
        let schedule = MeasurementSchedule::uniform_first_period(&p, 10, 10).unwrap();
        let noise = NoiseModel::new(0.0, 40.0).unwrap();
        let a = simulate_record(&m, &p, &schedule, &noise, 7).unwrap();
        let b = simulate_record(&m, &p, &schedule, &noise, 7).unwrap();
        assert_eq!(a, b);
        let c = simulate_record(&m, &p, &schedule, &noise, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn record_statistics_match_the_model() {
        // law of large numbers + variance check at one probe time
        let (m, p) = reference_css();
        let t = 0.37 * p.rabi_period();
        let schedule = MeasurementSchedule::new(vec![t], 10).unwrap();
        let noise = NoiseModel::new(0.0, 40.0).unwrap();
        let trials = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut vals = Vec::with_capacity(trials);
        for _ in 0..trials {
            let r = simulate_record_with_rng(&m, &p, &schedule, &noise, &mut rng).unwrap();
            vals.push(r.means()[0]);
        }
        let mean: f64 = vals.iter().sum::<f64>() / trials as f64;
        let var: f64 = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / trials as f64;
        let model_mu = mean_jz(&m, &p, t);
        let model_var = (var_jz(&m, &p, t) + 1600.0) / 10.0;
        let se = (model_var / trials as f64).sqrt();
        assert!((mean - model_mu).abs() < 3.0 * se, "{mean} vs {model_mu}");
        assert_relative_eq!(var, model_var, max_relative = 0.05);
    }

    #[test]
    fn noise_free_fit_recovers_truth() {
        let (m, p) = reference_css();
        let schedule = MeasurementSchedule::uniform_first_period(&p, 10, 10).unwrap();
        // inject exact model means: zero sampling noise
        let means: Vec<f64> = schedule
            .times()
            .iter()
            .map(|&t| mean_jz(&m, &p, t))
            .collect();
        let record = MeasurementRecord::new(schedule.times().to_vec(), means).unwrap();
        let fitres = fit_ml(&record, &m, p.ej_rate(), 10, &NoiseModel::NONE, (2.0, 7.0)).unwrap();
        assert_relative_eq!(fitres.delta_est, p.delta_rate(), max_relative = 1e-6);
        // error invariant: delta_err^-2 equals the summed inverse variances
        let fisher: f64 = fitres
            .per_time_sensitivity
            .iter()
            .filter(|s| s.is_finite())
            .map(|s| 1.0 / s)
            .sum();
        assert_relative_eq!(fitres.delta_err.powi(-2), fisher, max_relative = 1e-9);
    }

    #[test]
    fn ml_and_fixed_weight_fits_agree() {
        let (m, p) = reference_css();
        let schedule = MeasurementSchedule::uniform_first_period(&p, 10, 10).unwrap();
        let noise = NoiseModel::new(0.0, 40.0).unwrap();
        let record = simulate_record(&m, &p, &schedule, &noise, 3).unwrap();
        let a = fit_ml(&record, &m, p.ej_rate(), 10, &noise, (2.0, 7.0)).unwrap();
        let b = fit_least_squares(&record, &m, p.ej_rate(), 10, &noise, (2.0, 7.0)).unwrap();
        assert!(
            (a.delta_est - b.delta_est).abs() < a.delta_err / 10.0,
            "ML {} vs LS {} exceeds {}",
            a.delta_est,
            b.delta_est,
            a.delta_err / 10.0
        );
    }

    #[test]
    fn fit_rejects_unbracketed_interval() {
        let (m, p) = reference_css();
        let schedule = MeasurementSchedule::uniform_first_period(&p, 10, 10).unwrap();
        let means: Vec<f64> = schedule
            .times()
            .iter()
            .map(|&t| mean_jz(&m, &p, t))
            .collect();
        let record = MeasurementRecord::new(schedule.times().to_vec(), means).unwrap();
        let res = fit_ml(&record, &m, p.ej_rate(), 10, &NoiseModel::NONE, (5.5, 8.0));
        assert!(matches!(res, Err(Error::OptimumNotBracketed { .. })));
    }

    #[test]
    fn monte_carlo_is_strategy_independent() {
        let m = make_css(400).unwrap().moments();
        let p = InterferometerParams::reference();
        let schedule = MeasurementSchedule::uniform_first_period(&p, 10, 10).unwrap();
        let noise = NoiseModel::new(0.0, 40.0).unwrap();
        let a = monte_carlo_fit_rmse(
            &m,
            &p,
            &schedule,
            &noise,
            5,
            64,
            (1.0, 8.0),
            crate::exec::Strategy::Auto,
        )
        .unwrap();
        let b = monte_carlo_fit_rmse(
            &m,
            &p,
            &schedule,
            &noise,
            5,
            64,
            (1.0, 8.0),
            crate::exec::Strategy::Sequential,
        )
        .unwrap();
        assert_eq!(a.rmse, b.rmse);
        assert_eq!(a.mean_est, b.mean_est);
        assert_eq!(a.failures, 0);
    }

    #[test]
    fn scaling_exponent_synthetic_and_errors() {
        let pts: Vec<(f64, f64)> = [100.0, 300.0, 1000.0, 3000.0]
            .iter()
            .map(|&n: &f64| (n, 1.0 / n))
            .collect();
        assert_relative_eq!(scaling_exponent(&pts).unwrap(), 1.0, max_relative = 1e-12);
        // shot-noise synthetic
        let pts_half: Vec<(f64, f64)> = [100.0, 300.0, 1000.0, 3000.0]
            .iter()
            .map(|&n: &f64| (n, n.powf(-0.5)))
            .collect();
        assert_relative_eq!(
            scaling_exponent(&pts_half).unwrap(),
            0.5,
            max_relative = 1e-12
        );
        assert!(scaling_exponent(&pts[..3]).is_err());
        let same_n = vec![(100.0, 0.1), (100.0, 0.2), (100.0, 0.05), (100.0, 0.3)];
        assert!(scaling_exponent(&same_n).is_err());
        let narrow = vec![(100.0, 0.1), (150.0, 0.09), (200.0, 0.08), (400.0, 0.06)];
        assert!(scaling_exponent(&narrow).is_err());
    }

    #[test]
    fn result_csv_shape() {
        let r = EstimationResult {
            delta_est: 4.4,
            delta_err: 0.09,
            per_time_sensitivity: vec![1.0],
            iterations: 12,
            residual: 3.4,
        };
        let csv = result_to_csv(&r, 10, 10, 1.0, &NoiseModel::new(0.1, 40.0).unwrap(), 7);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "delta_est_persec,delta_err_persec,k,m,xi2,sigma_res,gamma,seed"
        );
        assert_eq!(lines.next().unwrap(), "4.4,0.09,10,10,1,40,0.1,7");
    }

    proptest! {
        #[test]
        fn aggregation_is_permutation_invariant_and_monotone(
            mut s2 in proptest::collection::vec(1e-6f64..1e3, 2..12),
            extra in 1e-6f64..1e3,
        ) {
            let base = aggregate_sensitivity(&s2).unwrap();
            let mut rev = s2.clone();
            rev.reverse();
            let same = aggregate_sensitivity(&rev).unwrap();
            prop_assert!((base - same).abs() <= 1e-12 * base);
            // adding a time point never increases the aggregated error
            s2.push(extra);
            let more = aggregate_sensitivity(&s2).unwrap();
            prop_assert!(more <= base * (1.0 + 1e-12));
        }

        #[test]
        fn analytic_derivative_matches_finite_differences(
            frac in 0.02f64..0.98,
            alpha in 5e-3f64..0.3,
        ) {
            let ej = 52.3;
            let p = InterferometerParams::new(ej, ej * alpha.tan()).unwrap();
            let m = make_css(200).unwrap().moments();
            let t = frac * p.rabi_period();
            let d_analytic = mean_jz_derivative(&m, &p, t);
            let h = 1e-6 * p.delta_rate();
            let up = mean_jz(&m, &p.with_delta(p.delta_rate() + h).unwrap(), t);
            let dn = mean_jz(&m, &p.with_delta(p.delta_rate() - h).unwrap(), t);
            let fd = (up - dn) / (2.0 * h);
            // away from derivative zeros the two agree to 1e-6 relative
            if d_analytic.abs() > 1e-3 * m.particles() as f64 / p.omega() {
                prop_assert!((d_analytic / fd - 1.0).abs() < 1e-5);
            }
        }
    }
}
