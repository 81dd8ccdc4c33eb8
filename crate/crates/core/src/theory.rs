//! Monte Carlo verifiers for the closed-form leakage of least-squares
//! regression, and the conditional-subsampling gap.
//!
//! Three mechanisms make the fitted coefficients `beta_hat` differ between two
//! training distributions: a different true coefficient (reason 1), a model
//! class that cannot represent the truth (a missing intercept, reason 2), and
//! scaled features changing the estimator's variance by `1/c^2` (reason 3).

use std::fmt;
use std::io::Write;

use rayon::prelude::*;

use crate::datagen::{gen_linear, subsample_by_attribute, FeatureSampler, LinearParams, SubsampleParams};
use crate::error::{Error, Result};
use crate::numerics::{ols_fit, CompensatedSum, Dataset, SeededRng, Z95};

/// Largest tolerated fraction of singular fits in [`mc_beta`].
pub const MAX_SINGULAR_FRACTION: f64 = 0.01;

/// Empirical distribution summary of `beta_hat` over repeated fits.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaDistributionEstimate {
    /// Intercept first when it was fitted.
    pub mean: Vec<f64>,
    /// 1/n divisor.
    pub variance: Vec<f64>,
    pub n_trials: usize,
    pub ci95_halfwidth: Vec<f64>,
    /// Normal-approximation half-width for each variance entry.
    pub variance_ci95_halfwidth: Vec<f64>,
    pub singular_fits: usize,
    pub intercept: bool,
}

impl BetaDistributionEstimate {
    pub fn slope_index(&self) -> usize {
        usize::from(self.intercept)
    }

    pub fn slope_mean(&self) -> f64 {
        self.mean[self.slope_index()]
    }

    pub fn slope_variance(&self) -> f64 {
        self.variance[self.slope_index()]
    }

    pub fn slope_ci(&self) -> f64 {
        self.ci95_halfwidth[self.slope_index()]
    }
}

/// Mean, 1/n variance and their 95% half-widths, summed with compensation in
/// trial order.
fn moments(values: &[f64]) -> (f64, f64, f64, f64) {
    let n = values.len() as f64;
    let mut s = CompensatedSum::default();
    values.iter().for_each(|&v| s.add(v));
    let m = s.value() / n;
    let (mut s2, mut s4) = (CompensatedSum::default(), CompensatedSum::default());
    for &v in values {
        let d2 = (v - m) * (v - m);
        s2.add(d2);
        s4.add(d2 * d2);
    }
    let var = s2.value() / n;
    let m4 = s4.value() / n;
    let ci = Z95 * (var / n).sqrt();
    let var_ci = Z95 * ((m4 - var * var).max(0.0) / n).sqrt();
    (m, var, ci, var_ci)
}

/// Repeatedly samples a dataset from `params`, fits least squares, and
/// summarises the fitted coefficients.
pub fn mc_beta(params: &LinearParams, intercept: bool, trials: usize, rng: &SeededRng) -> Result<BetaDistributionEstimate> {
    if trials < 100 {
        return Err(Error::invalid(format!("mc_beta needs at least 100 trials, got {trials}")));
    }
    let fits: Vec<Option<Vec<f64>>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let data = gen_linear(params, &mut rng.derive("mc-beta", t as u64))?;
            match ols_fit(&data, intercept) {
                Ok(fit) => Ok(Some(fit.beta_hat)),
                Err(Error::SingularSystem { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let singular_fits = fits.iter().filter(|f| f.is_none()).count();
    if singular_fits as f64 > MAX_SINGULAR_FRACTION * trials as f64 {
        return Err(Error::DegenerateConfiguration(format!(
            "{singular_fits} of {trials} least-squares fits were singular"
        )));
    }
    let ok: Vec<&Vec<f64>> = fits.iter().flatten().collect();
    let width = ok[0].len();
    let mut est = BetaDistributionEstimate {
        mean: Vec::with_capacity(width),
        variance: Vec::with_capacity(width),
        n_trials: ok.len(),
        ci95_halfwidth: Vec::with_capacity(width),
        variance_ci95_halfwidth: Vec::with_capacity(width),
        singular_fits,
        intercept,
    };
    for j in 0..width {
        let column: Vec<f64> = ok.iter().map(|b| b[j]).collect();
        let (m, v, ci, vci) = moments(&column);
        est.mean.push(m);
        est.variance.push(v);
        est.ci95_halfwidth.push(ci);
        est.variance_ci95_halfwidth.push(vci);
    }
    Ok(est)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    /// Reported for context; never fails a run.
    Info,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
            Outcome::Info => "info",
        })
    }
}

impl From<bool> for Outcome {
    fn from(ok: bool) -> Self {
        if ok {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }
}

/// One line of a theory report.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub check: String,
    pub estimate: f64,
    pub target: f64,
    pub tolerance: f64,
    pub outcome: Outcome,
}

impl CheckRow {
    fn new(check: &str, estimate: f64, target: f64, tolerance: f64, outcome: impl Into<Outcome>) -> Self {
        CheckRow { check: check.to_string(), estimate, target, tolerance, outcome: outcome.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub rows: Vec<CheckRow>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.outcome != Outcome::Fail)
    }

    pub fn row(&self, check: &str) -> Option<&CheckRow> {
        self.rows.iter().find(|r| r.check == check)
    }
}

/// CSV with header `check,estimate,target,tolerance,pass`.
pub fn write_report_csv<W: Write>(rows: &[CheckRow], mut out: W) -> Result<()> {
    writeln!(out, "check,estimate,target,tolerance,pass")?;
    for r in rows {
        writeln!(out, "{},{:?},{:?},{:?},{}", r.check, r.estimate, r.target, r.tolerance, r.outcome)?;
    }
    Ok(())
}

/// Shared settings of the regression checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionSetup {
    pub noise_variance: f64,
    pub feature_sampler: FeatureSampler,
    pub n: usize,
    pub trials: usize,
}

impl Default for RegressionSetup {
    fn default() -> Self {
        RegressionSetup { noise_variance: 1.0, feature_sampler: FeatureSampler::default(), n: 100, trials: 20_000 }
    }
}

impl RegressionSetup {
    fn params(&self, beta0: f64, beta1: f64, scale: f64) -> LinearParams {
        LinearParams {
            beta0,
            beta1,
            noise_variance: self.noise_variance,
            feature_sampler: self.feature_sampler,
            scale,
            n: self.n,
        }
    }
}

/// Different true coefficients give different expected fits: each mean slope
/// must match its plant within its CI and the two must be separated by more
/// than the summed CIs.
pub fn check_reason1(beta0_pair: (f64, f64), beta1_pair: (f64, f64), setup: &RegressionSetup, rng: &SeededRng) -> Result<CheckReport> {
    let e0 = mc_beta(&setup.params(beta0_pair.0, beta1_pair.0, 1.0), true, setup.trials, &rng.derive("reason1", 0))?;
    let e1 = mc_beta(&setup.params(beta0_pair.1, beta1_pair.1, 1.0), true, setup.trials, &rng.derive("reason1", 1))?;
    let sep = (e1.slope_mean() - e0.slope_mean()).abs();
    let sep_tol = e0.slope_ci() + e1.slope_ci();
    Ok(CheckReport {
        rows: vec![
            CheckRow::new("reason1", sep, 0.0, sep_tol, sep > sep_tol),
            CheckRow::new(
                "reason1-plant0",
                e0.slope_mean(),
                beta1_pair.0,
                e0.slope_ci(),
                (e0.slope_mean() - beta1_pair.0).abs() <= e0.slope_ci(),
            ),
            CheckRow::new(
                "reason1-plant1",
                e1.slope_mean(),
                beta1_pair.1,
                e1.slope_ci(),
                (e1.slope_mean() - beta1_pair.1).abs() <= e1.slope_ci(),
            ),
        ],
    })
}

/// Relative tolerance between the no-intercept slope shift and its oracle.
pub const REASON2_TOLERANCE: f64 = 0.15;

/// Monte Carlo estimate of `tau = E[sum X / sum X^2]` for `n` draws of the feature law.
pub fn estimate_tau(sampler: FeatureSampler, n: usize, trials: usize, rng: &SeededRng) -> Result<(f64, f64)> {
    if trials < 2 || n == 0 {
        return Err(Error::invalid("tau estimate needs n >= 1 and at least 2 trials"));
    }
    let ratios: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut r = rng.derive("tau", t as u64);
            let (mut s1, mut s2) = (CompensatedSum::default(), CompensatedSum::default());
            for _ in 0..n {
                let x = sampler.sample(&mut r);
                s1.add(x);
                s2.add(x * x);
            }
            s1.value() / s2.value()
        })
        .collect();
    if ratios.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateConfiguration("feature law produced an all-zero sample".into()));
    }
    let (m, _, ci, _) = moments(&ratios);
    Ok((m, ci))
}

/// Slope shift of a no-intercept fit to `Y = X + 1 + noise` when the features
/// are scaled by `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Reason2Shift {
    pub slope0: BetaDistributionEstimate,
    pub slope1: BetaDistributionEstimate,
    pub shift: f64,
    /// Summed CI half-widths of the two mean slopes.
    pub shift_ci: f64,
    pub tau: f64,
}

pub fn reason2_shift(c: f64, setup: &RegressionSetup, rng: &SeededRng) -> Result<Reason2Shift> {
    if !(c > 0.0) {
        return Err(Error::invalid(format!("scale c must be > 0, got {c}")));
    }
    let slope0 = mc_beta(&setup.params(1.0, 1.0, 1.0), false, setup.trials, &rng.derive("reason2", 0))?;
    let slope1 = mc_beta(&setup.params(1.0, 1.0, c), false, setup.trials, &rng.derive("reason2", 1))?;
    let (tau, _) = estimate_tau(setup.feature_sampler, setup.n, setup.trials, &rng.derive("reason2", 2))?;
    Ok(Reason2Shift {
        shift: slope1.slope_mean() - slope0.slope_mean(),
        shift_ci: slope0.slope_ci() + slope1.slope_ci(),
        slope0,
        slope1,
        tau,
    })
}

/// The missing intercept shifts the mean slope when features are scaled by
/// `c`. The shift must be nonzero beyond its CI and match `(1/c - 1) tau`;
/// the ratio to the alternative factor `(c - 1) tau` is reported alongside.
/// With `control` set, symmetric zero-mean features must give no shift.
pub fn check_reason2(c: f64, setup: &RegressionSetup, control: Option<FeatureSampler>, rng: &SeededRng) -> Result<CheckReport> {
    let s = reason2_shift(c, setup, rng)?;
    let oracle = (1.0 / c - 1.0) * s.tau;
    let alt = (c - 1.0) * s.tau;
    let nonzero = s.shift.abs() > s.shift_ci;
    let close = (s.shift - oracle).abs() <= REASON2_TOLERANCE * oracle.abs();
    let mut rows = vec![
        CheckRow::new("reason2", s.shift, oracle, REASON2_TOLERANCE, nonzero && close),
        CheckRow::new("reason2-nonzero", s.shift.abs(), 0.0, s.shift_ci, nonzero),
        CheckRow::new("reason2-ratio-inverse-factor", s.shift / oracle, 1.0, REASON2_TOLERANCE, Outcome::Info),
        CheckRow::new("reason2-ratio-direct-factor", s.shift / alt, 1.0, REASON2_TOLERANCE, Outcome::Info),
    ];
    if let Some(sampler) = control {
        let ctl_setup = RegressionSetup { feature_sampler: sampler, ..*setup };
        let ctl = reason2_shift(c, &ctl_setup, &rng.derive("reason2-control", 0))?;
        rows.push(CheckRow::new("reason2-control", ctl.shift, 0.0, ctl.shift_ci, ctl.shift.abs() <= ctl.shift_ci));
    }
    Ok(CheckReport { rows })
}

/// Relative tolerance on the variance ratio.
pub const REASON3_TOLERANCE: f64 = 0.10;

/// Variance ratio `Var[slope | D^1] / Var[slope | D^0]` for features scaled by `c`.
pub fn reason3_ratio(c: f64, setup: &RegressionSetup, rng: &SeededRng) -> Result<f64> {
    let e0 = mc_beta(&setup.params(1.0, 1.0, 1.0), true, setup.trials, &rng.derive("reason3", 0))?;
    let e1 = mc_beta(&setup.params(1.0, 1.0, c), true, setup.trials, &rng.derive("reason3", 1))?;
    Ok(e1.slope_variance() / e0.slope_variance())
}

/// Scaling features by `c` with the same coefficients divides the slope's variance by `c^2`.
pub fn check_reason3(c: f64, setup: &RegressionSetup, rng: &SeededRng) -> Result<CheckReport> {
    if !(c > 0.0) {
        return Err(Error::invalid(format!("scale c must be > 0, got {c}")));
    }
    let ratio = reason3_ratio(c, setup, rng)?;
    let target = 1.0 / (c * c);
    Ok(CheckReport {
        rows: vec![CheckRow::new(
            "reason3",
            ratio,
            target,
            REASON3_TOLERANCE,
            (ratio - target).abs() <= REASON3_TOLERANCE * target,
        )],
    })
}

/// Binary population `(X, T) -> Y` with `Pr(Y=0 | X=0, T=t) = p_t` and X independent of T.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsamplingBase {
    pub p0: f64,
    pub p1: f64,
    /// `Pr(Y=0 | X=1)`, the same for both values of T.
    pub q: f64,
    pub pr_x0: f64,
    pub pr_t0: f64,
    pub size: usize,
}

impl SubsamplingBase {
    /// Base large enough for either stratum to supply `n` rows with high probability.
    pub fn for_output(p0: f64, p1: f64, n: usize) -> Self {
        SubsamplingBase { p0, p1, q: 0.5, pr_x0: 0.5, pr_t0: 0.5, size: 4 * n }
    }

    /// Rows `(X, T)`, label Y.
    pub fn generate(&self, rng: &mut SeededRng) -> Result<Dataset> {
        for (name, p) in [("p0", self.p0), ("p1", self.p1), ("q", self.q), ("pr_x0", self.pr_x0), ("pr_t0", self.pr_t0)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        let mut features = Vec::with_capacity(2 * self.size);
        let mut labels = Vec::with_capacity(self.size);
        for _ in 0..self.size {
            let x0 = rng.bernoulli(self.pr_x0);
            let t0 = rng.bernoulli(self.pr_t0);
            let p_y0 = match (x0, t0) {
                (true, true) => self.p0,
                (true, false) => self.p1,
                (false, _) => self.q,
            };
            let y0 = rng.bernoulli(p_y0);
            features.push(if x0 { 0.0 } else { 1.0 });
            features.push(if t0 { 0.0 } else { 1.0 });
            labels.push(if y0 { 0.0 } else { 1.0 });
        }
        Dataset::new(features, 2, labels)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsamplingGapReport {
    pub p0: f64,
    pub p1: f64,
    pub ratios: (f64, f64),
    pub t_is_feature: bool,
    pub analytic_gap: f64,
    /// `Pr(Y=0 | X=0)` in the first dataset minus the second; conditioned on
    /// T = 0 as well when T is a feature.
    pub empirical_gap: f64,
    pub standard_error: f64,
    /// Gap and standard error per value of T when T is a feature.
    pub stratum_gaps: Vec<(f64, f64)>,
}

impl SubsamplingGapReport {
    /// Every reported gap within three standard errors of the analytic value.
    pub fn passed(&self) -> bool {
        let within = |gap: f64, se: f64| (gap - self.analytic_gap).abs() <= 3.0 * se;
        within(self.empirical_gap, self.standard_error) && self.stratum_gaps.iter().all(|&(g, se)| within(g, se))
    }

    pub fn rows(&self) -> Vec<CheckRow> {
        let name = if self.t_is_feature { "subsampling-feature" } else { "subsampling-gap" };
        vec![CheckRow::new(name, self.empirical_gap, self.analytic_gap, 3.0 * self.standard_error, self.passed())]
    }
}

/// `(count, Pr(Y=0))` over rows satisfying `keep`.
fn conditional_y0(data: &Dataset, keep: impl Fn(&[f64]) -> bool) -> (usize, f64) {
    let mut count = 0usize;
    let mut zeros = 0usize;
    for (row, &y) in data.rows().zip(data.labels()) {
        if keep(row) {
            count += 1;
            zeros += usize::from(y == 0.0);
        }
    }
    (count, if count == 0 { f64::NAN } else { zeros as f64 / count as f64 })
}

fn gap_and_se(a: (usize, f64), b: (usize, f64)) -> Result<(f64, f64)> {
    if a.0 == 0 || b.0 == 0 {
        return Err(Error::DegenerateConfiguration("no rows with X = 0 in a subsample".into()));
    }
    let var = |(m, p): (usize, f64)| p * (1.0 - p) / m as f64;
    Ok((a.1 - b.1, (var(a) + var(b)).sqrt()))
}

/// Subsamples one base population at two ratios of `Pr(T=0)` and compares
/// `Pr(Y=0 | X=0)` between the results. With T hidden the analytic gap is
/// `(rho0 - rho1)(p0 - p1)`, i.e. `(p0 - p1)^2` when `rho_b = p_b`; with T a
/// feature the conditionals agree and the gap is 0.
pub fn subsampling_gap(
    base: &SubsamplingBase,
    ratios: (f64, f64),
    t_is_feature: bool,
    n: usize,
    rng: &SeededRng,
) -> Result<SubsamplingGapReport> {
    let population = base.generate(&mut rng.derive("subsampling-base", 0))?;
    let draw = |ratio: f64, ordinal: u64| {
        let params = SubsampleParams { base: population.clone(), t_column: 1, ratio, t_is_feature, n };
        subsample_by_attribute(&params, &mut rng.derive("subsampling", ordinal))
    };
    let d0 = draw(ratios.0, 0)?;
    let d1 = draw(ratios.1, 1)?;
    let (analytic_gap, empirical_gap, standard_error, stratum_gaps) = if t_is_feature {
        let per_t = [0.0, 1.0]
            .iter()
            .map(|&t| {
                let keep = |row: &[f64]| row[0] == 0.0 && row[1] == t;
                gap_and_se(conditional_y0(&d0, keep), conditional_y0(&d1, keep))
            })
            .collect::<Result<Vec<_>>>()?;
        (0.0, per_t[0].0, per_t[0].1, per_t)
    } else {
        let keep = |row: &[f64]| row[0] == 0.0;
        let (gap, se) = gap_and_se(conditional_y0(&d0, keep), conditional_y0(&d1, keep))?;
        ((ratios.0 - ratios.1) * (base.p0 - base.p1), gap, se, Vec::new())
    };
    Ok(SubsamplingGapReport {
        p0: base.p0,
        p1: base.p1,
        ratios,
        t_is_feature,
        analytic_gap,
        empirical_gap,
        standard_error,
        stratum_gaps,
    })
}

/// Settings of the full theory check suite.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryConfig {
    pub setup: RegressionSetup,
    pub reason1_trials: usize,
    pub beta0_pair: (f64, f64),
    pub beta1_pair: (f64, f64),
    pub scale: f64,
    /// Symmetric feature law for the reason-2 negative control.
    pub control_sampler: FeatureSampler,
    pub p0: f64,
    pub p1: f64,
    pub subsample_n: usize,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        TheoryConfig {
            setup: RegressionSetup::default(),
            reason1_trials: 10_000,
            beta0_pair: (1.0, 1.0),
            beta1_pair: (1.0, 1.5),
            scale: 2.0,
            control_sampler: FeatureSampler::Normal { mean: 0.0, variance: 1.0 },
            p0: 0.8,
            p1: 0.2,
            subsample_n: 100_000,
        }
    }
}

impl TheoryConfig {
    pub fn subsampling_base(&self) -> SubsamplingBase {
        SubsamplingBase::for_output(self.p0, self.p1, self.subsample_n)
    }
}

/// Runs every regression check and both subsampling cases.
pub fn run_theory(config: &TheoryConfig, rng: &SeededRng) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    let r1 = RegressionSetup { trials: config.reason1_trials, ..config.setup };
    rows.extend(check_reason1(config.beta0_pair, config.beta1_pair, &r1, &rng.derive("theory-reason1", 0))?.rows);
    rows.extend(check_reason2(config.scale, &config.setup, Some(config.control_sampler), &rng.derive("theory-reason2", 0))?.rows);
    rows.extend(check_reason3(config.scale, &config.setup, &rng.derive("theory-reason3", 0))?.rows);
    rows.extend(run_subsampling(config, rng)?);
    Ok(rows)
}

/// Subsampling gap with T hidden and with T as a feature, at `rho_b = p_b`.
pub fn run_subsampling(config: &TheoryConfig, rng: &SeededRng) -> Result<Vec<CheckRow>> {
    let base = config.subsampling_base();
    let mut rows = Vec::new();
    for t_is_feature in [false, true] {
        let report = subsampling_gap(&base, (config.p0, config.p1), t_is_feature, config.subsample_n, &rng.derive("theory-subsampling", 0))?;
        rows.extend(report.rows());
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(trials: usize) -> RegressionSetup {
        RegressionSetup { trials, ..RegressionSetup::default() }
    }

    #[test]
    fn noiseless_fits_have_no_variance() {
        let s = RegressionSetup { noise_variance: 0.0, ..setup(200) };
        let e = mc_beta(&s.params(1.0, 2.0, 1.0), true, s.trials, &SeededRng::from_seed(1)).unwrap();
        assert!(e.variance.iter().all(|&v| v <= 1e-16), "{:?}", e.variance);
    }

    #[test]
    fn fits_are_unbiased() {
        let s = RegressionSetup { n: 50, ..setup(10_000) };
        let e = mc_beta(&s.params(1.0, 2.0, 1.0), true, s.trials, &SeededRng::from_seed(2)).unwrap();
        for (j, plant) in [1.0, 2.0].into_iter().enumerate() {
            assert!((e.mean[j] - plant).abs() <= 1.5 * e.ci95_halfwidth[j], "{} vs {plant}", e.mean[j]);
        }
    }

    #[test]
    fn variance_scales_with_inverse_n() {
        let rng = SeededRng::from_seed(3);
        let small = RegressionSetup { n: 50, ..setup(4000) };
        let large = RegressionSetup { n: 100, ..setup(4000) };
        let v50 = mc_beta(&small.params(1.0, 2.0, 1.0), true, 4000, &rng.derive("a", 0)).unwrap().slope_variance();
        let v100 = mc_beta(&large.params(1.0, 2.0, 1.0), true, 4000, &rng.derive("b", 0)).unwrap().slope_variance();
        assert!((v100 / v50 - 0.5).abs() <= 0.1, "ratio {}", v100 / v50);
    }

    #[test]
    fn too_few_trials_or_singular_designs_are_rejected() {
        let s = setup(99);
        assert!(matches!(mc_beta(&s.params(0.0, 1.0, 1.0), true, 99, &SeededRng::from_seed(1)), Err(Error::InvalidParameter(_))));
        let constant = RegressionSetup { feature_sampler: FeatureSampler::Constant(1.0), ..setup(100) };
        assert!(matches!(
            mc_beta(&constant.params(0.0, 1.0, 1.0), true, 100, &SeededRng::from_seed(1)),
            Err(Error::DegenerateConfiguration(_))
        ));
    }

    #[test]
    fn reason1_separates_different_slopes() {
        let rng = SeededRng::from_seed(4);
        let r = check_reason1((1.0, 1.0), (1.0, 1.5), &setup(2000), &rng).unwrap();
        assert!(r.row("reason1").unwrap().outcome == Outcome::Pass);
        let same = check_reason1((1.0, 1.0), (1.0, 1.0), &setup(2000), &rng).unwrap();
        assert_eq!(same.row("reason1").unwrap().outcome, Outcome::Fail);
    }

    #[test]
    fn reason1_separation_grows_with_gap() {
        let rng = SeededRng::from_seed(5);
        let a = check_reason1((1.0, 1.0), (1.0, 1.2), &setup(1000), &rng).unwrap();
        let b = check_reason1((1.0, 1.0), (1.0, 1.8), &setup(1000), &rng).unwrap();
        assert!(b.row("reason1").unwrap().estimate > a.row("reason1").unwrap().estimate);
    }

    #[test]
    fn reason2_single_point_matches_hand_computation() {
        // n = 1, X = x fixed: slope = (x + 1 + e) / x, so E = 1 + 1/x and 1 + 1/(c x)
        let x = 2.0;
        let s = RegressionSetup { feature_sampler: FeatureSampler::Constant(x), n: 1, noise_variance: 1.0, trials: 20_000 };
        let r = reason2_shift(2.0, &s, &SeededRng::from_seed(6)).unwrap();
        assert!((r.slope0.slope_mean() - 1.5).abs() <= 2.0 * r.slope0.slope_ci());
        assert!((r.slope1.slope_mean() - 1.25).abs() <= 2.0 * r.slope1.slope_ci());
        assert!((r.tau - 0.5).abs() < 1e-12);
    }

    #[test]
    fn reason2_no_shift_without_scaling() {
        let r = reason2_shift(1.0, &setup(2000), &SeededRng::from_seed(7)).unwrap();
        assert!(r.shift.abs() <= r.shift_ci);
    }

    #[test]
    fn reason3_ratio_is_one_without_scaling() {
        let ratio = reason3_ratio(1.0, &setup(5000), &SeededRng::from_seed(8)).unwrap();
        assert!((ratio - 1.0).abs() <= 0.1, "{ratio}");
    }

    #[test]
    fn reason3_ratio_for_c_three() {
        let r = check_reason3(3.0, &setup(5000), &SeededRng::from_seed(9)).unwrap();
        assert!(r.passed(), "{:?}", r.rows);
    }

    #[test]
    fn equal_conditionals_give_no_gap() {
        let base = SubsamplingBase::for_output(0.5, 0.5, 20_000);
        let r = subsampling_gap(&base, (0.5, 0.5), false, 20_000, &SeededRng::from_seed(10)).unwrap();
        assert_eq!(r.analytic_gap, 0.0);
        assert!(r.passed());
    }

    #[test]
    fn report_csv_layout() {
        let rows = vec![CheckRow::new("reason3", 0.25, 0.25, 0.1, true), CheckRow::new("x", 1.0, 1.0, 0.0, Outcome::Info)];
        let mut buf = Vec::new();
        write_report_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "check,estimate,target,tolerance,pass\nreason3,0.25,0.25,0.1,pass\nx,1.0,1.0,0.0,info\n");
    }
}
