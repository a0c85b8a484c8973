//! Stochastic oracle for the quadrature pipeline: sample correlated
//! shadowing pairs, form failure indicators, and estimate the joint
//! failure probability and the indicator correlation with standard
//! errors. A mean-shifted (exponentially tilted) estimator covers the
//! deep-tail regime where plain Monte Carlo sees no events.
//!
//! Reproducibility contract: samples are drawn in fixed-size chunks, each
//! chunk from its own counter-derived ChaCha stream `(seed, chunk_index)`.
//! Results are therefore bit-identical for a given `(seed, n_samples,
//! method)` no matter how many threads execute the chunks, and the batch
//! count used for batch-means standard errors does not perturb the sample
//! set.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::bivariate::ShadowingCorrelation;
use crate::error::{Error, Result};
use crate::gaussian::StandardScore;

/// Samples per RNG stream. Fixed so the sample sequence is a function of
/// `(seed, n_samples)` alone.
const CHUNK_SIZE: u64 = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McMethod {
    Plain,
    Importance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub n_samples: u64,
    pub seed: u64,
    pub method: McMethod,
    /// Batches for batch-means standard errors (default 64).
    pub batch_count: u32,
}

impl SimConfig {
    pub fn new(n_samples: u64, seed: u64, method: McMethod) -> Self {
        Self {
            n_samples,
            seed,
            method,
            batch_count: 64,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidConfig("n_samples must be >= 1".into()));
        }
        if self.batch_count == 0 || u64::from(self.batch_count) > self.n_samples {
            return Err(Error::InvalidConfig(format!(
                "batch_count must be in [1, n_samples]; got {} with n_samples = {}",
                self.batch_count, self.n_samples
            )));
        }
        Ok(())
    }
}

/// A point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub method: McMethod,
}

/// One standardized shadowing draw per link, with correlation rho_h.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadowingSamplePair {
    pub x1: StandardScore,
    pub x2: StandardScore,
}

/// Draw one correlated pair: `x1 = z1`, `x2 = rho*z1 + sqrt(1-rho^2)*z2`.
pub fn sample_pair<R: Rng + ?Sized>(rho_h: ShadowingCorrelation, rng: &mut R) -> ShadowingSamplePair {
    let rho = rho_h.value();
    let s = (1.0 - rho * rho).sqrt();
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    ShadowingSamplePair {
        x1: StandardScore::from_finite(z1),
        x2: StandardScore::from_finite(rho * z1 + s * z2),
    }
}

fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

fn chunk_bounds(n: u64) -> impl Iterator<Item = (u64, u64, u64)> {
    // (chunk index, first global sample, count)
    let chunks = n.div_ceil(CHUNK_SIZE);
    (0..chunks).map(move |c| {
        let start = c * CHUNK_SIZE;
        (c, start, CHUNK_SIZE.min(n - start))
    })
}

/// Estimate `P(X1 > b1, X2 > b2)` empirically.
pub fn estimate_joint_failure(
    b1: StandardScore,
    b2: StandardScore,
    rho_h: ShadowingCorrelation,
    config: &SimConfig,
) -> Result<McEstimate> {
    config.validate()?;
    match config.method {
        McMethod::Plain => Ok(joint_plain(b1.value(), b2.value(), rho_h.value(), config)),
        McMethod::Importance => joint_importance(b1.value(), b2.value(), rho_h.value(), config),
    }
}

fn joint_plain(b1: f64, b2: f64, rho: f64, config: &SimConfig) -> McEstimate {
    let s = (1.0 - rho * rho).sqrt();
    let n = config.n_samples;
    let hits: u64 = chunk_bounds(n)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(c, _, count)| {
            let mut rng = chunk_rng(config.seed, c);
            let mut hits = 0u64;
            for _ in 0..count {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                let x2 = rho * z1 + s * z2;
                if z1 > b1 && x2 > b2 {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    let p = hits as f64 / n as f64;
    McEstimate {
        estimate: p,
        std_error: (p * (1.0 - p) / n as f64).sqrt(),
        n_samples: n,
        method: McMethod::Plain,
    }
}

/// Mean shift to the corner `(b1, b2)` with unchanged covariance. The
/// likelihood ratio against the centered density is
/// `exp(-mu' S^-1 e - mu' S^-1 mu / 2)` for a draw `mu + e`, computed in
/// log space so nothing under- or overflows at deep thresholds.
fn joint_importance(b1: f64, b2: f64, rho: f64, config: &SimConfig) -> Result<McEstimate> {
    if rho.abs() >= 1.0 {
        return Err(Error::DegenerateCorrelation { rho_h: rho });
    }
    let s = (1.0 - rho * rho).sqrt();
    let inv_det = 1.0 / ((1.0 - rho) * (1.0 + rho));
    let a1 = (b1 - rho * b2) * inv_det;
    let a2 = (b2 - rho * b1) * inv_det;
    let half_m = 0.5 * (b1 * a1 + b2 * a2);
    let n = config.n_samples;

    let partials: Vec<(f64, f64)> = chunk_bounds(n)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(c, _, count)| {
            let mut rng = chunk_rng(config.seed, c);
            let (mut sw, mut sw2) = (0.0_f64, 0.0_f64);
            for _ in 0..count {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                let e1 = z1;
                let e2 = rho * z1 + s * z2;
                // The shifted draw is (b1 + e1, b2 + e2): it lands in the
                // orthant exactly when both perturbations are positive.
                if e1 > 0.0 && e2 > 0.0 {
                    let w = (-(a1 * e1 + a2 * e2) - half_m).exp();
                    sw += w;
                    sw2 += w * w;
                }
            }
            (sw, sw2)
        })
        .collect();

    let (sw, sw2) = partials
        .into_iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let nf = n as f64;
    let estimate = sw / nf;
    let var = ((sw2 - sw * sw / nf) / (nf - 1.0).max(1.0)).max(0.0);
    Ok(McEstimate {
        estimate,
        std_error: (var / nf).sqrt(),
        n_samples: n,
        method: McMethod::Importance,
    })
}

/// Per-batch indicator counts for batch-means error estimation.
#[derive(Debug, Clone, Copy, Default)]
struct BatchCounts {
    n: u64,
    fail1: u64,
    fail2: u64,
    both: u64,
}

/// Sample Pearson correlation of the two failure indicator sequences,
/// with a batch-means standard error over `batch_count` batches.
///
/// Plain sampling only; needs `batch_count >= 2` for the error estimate.
pub fn estimate_event_correlation(
    b1: StandardScore,
    b2: StandardScore,
    rho_h: ShadowingCorrelation,
    config: &SimConfig,
) -> Result<McEstimate> {
    config.validate()?;
    if config.method != McMethod::Plain {
        return Err(Error::InvalidConfig(
            "indicator correlation is estimated with the plain method only".into(),
        ));
    }
    if config.batch_count < 2 {
        return Err(Error::InvalidConfig(
            "batch-means standard errors need batch_count >= 2".into(),
        ));
    }
    let (b1, b2, rho) = (b1.value(), b2.value(), rho_h.value());
    let s = (1.0 - rho * rho).sqrt();
    let n = config.n_samples;
    let b_count = u64::from(config.batch_count);
    let base = n / b_count;
    let rem = n % b_count;
    // Batch k holds base + 1 samples for k < rem, else base.
    let batch_of = move |g: u64| -> usize {
        let cut = rem * (base + 1);
        if g < cut {
            (g / (base + 1)) as usize
        } else {
            (rem + (g - cut) / base) as usize
        }
    };

    let partials: Vec<Vec<(usize, BatchCounts)>> = chunk_bounds(n)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(c, start, count)| {
            let mut rng = chunk_rng(config.seed, c);
            let mut out: Vec<(usize, BatchCounts)> = Vec::new();
            for i in 0..count {
                let g = start + i;
                let k = batch_of(g);
                if out.last().map(|(kk, _)| *kk) != Some(k) {
                    out.push((k, BatchCounts::default()));
                }
                let acc = &mut out.last_mut().expect("just pushed").1;
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                let x2 = rho * z1 + s * z2;
                let i1 = z1 > b1;
                let i2 = x2 > b2;
                acc.n += 1;
                acc.fail1 += u64::from(i1);
                acc.fail2 += u64::from(i2);
                acc.both += u64::from(i1 && i2);
            }
            out
        })
        .collect();

    let mut batches = vec![BatchCounts::default(); config.batch_count as usize];
    for chunk in partials {
        for (k, c) in chunk {
            let b = &mut batches[k];
            b.n += c.n;
            b.fail1 += c.fail1;
            b.fail2 += c.fail2;
            b.both += c.both;
        }
    }

    let s1: u64 = batches.iter().map(|b| b.fail1).sum();
    let s2: u64 = batches.iter().map(|b| b.fail2).sum();
    let s12: u64 = batches.iter().map(|b| b.both).sum();
    if s1 == 0 || s1 == n || s2 == 0 || s2 == n {
        return Err(Error::InsufficientEvents {
            failures1: s1,
            failures2: s2,
            n_samples: n,
        });
    }

    let nf = n as f64;
    let p1 = s1 as f64 / nf;
    let p2 = s2 as f64 / nf;
    let cov = s12 as f64 / nf - p1 * p2;
    let v1 = p1 - p1 * p1;
    let v2 = p2 - p2 * p2;
    let denom = (v1 * v2).sqrt();
    let r = cov / denom;

    // Batch means of the centered indicator product, normalized by the
    // global sigmas.
    let bf = f64::from(config.batch_count);
    let mut var_acc = 0.0_f64;
    for b in &batches {
        let bn = b.n as f64;
        let c_k = (b.both as f64 - p2 * b.fail1 as f64 - p1 * b.fail2 as f64 + bn * p1 * p2) / bn;
        let g_k = c_k / denom;
        var_acc += (g_k - r) * (g_k - r);
    }
    let std_error = (var_acc / (bf * (bf - 1.0))).sqrt();

    Ok(McEstimate {
        estimate: r,
        std_error,
        n_samples: n,
        method: McMethod::Plain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bivariate::upper_tail;
    use crate::gaussian::q_raw;

    fn score(x: f64) -> StandardScore {
        StandardScore::new(x).unwrap()
    }

    fn corr(r: f64) -> ShadowingCorrelation {
        ShadowingCorrelation::new(r).unwrap()
    }

    #[test]
    fn comonotone_pairs_are_bitwise_equal() {
        let mut rng = chunk_rng(9, 0);
        for _ in 0..200 {
            let p = sample_pair(corr(1.0), &mut rng);
            assert_eq!(p.x1.value(), p.x2.value());
        }
    }

    #[test]
    fn sample_correlation_converges() {
        // 3*(1 - rho^2)/sqrt(N) normal-theory bound, rounded up to 0.004.
        for &rho in &[0.0, 0.5] {
            let mut rng = chunk_rng(1234, 0);
            let n = 1_000_000;
            let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for _ in 0..n {
                let p = sample_pair(corr(rho), &mut rng);
                let (x, y) = (p.x1.value(), p.x2.value());
                sx += x;
                sy += y;
                sxx += x * x;
                syy += y * y;
                sxy += x * y;
            }
            let nf = n as f64;
            let c = (sxy / nf - sx / nf * sy / nf)
                / ((sxx / nf - (sx / nf).powi(2)) * (syy / nf - (sy / nf).powi(2))).sqrt();
            assert!((c - rho).abs() <= 0.004, "rho = {rho}: sample corr = {c}");
        }
    }

    #[test]
    fn plain_joint_estimate_covers_known_orthant() {
        let cfg = SimConfig::new(1_000_000, 7, McMethod::Plain);
        let est = estimate_joint_failure(score(0.0), score(0.0), corr(0.0), &cfg).unwrap();
        assert!((est.estimate - 0.25).abs() <= 3.0 * est.std_error);
        assert!((est.std_error - (0.25_f64 * 0.75 / 1e6).sqrt()).abs() <= 1e-4);
    }

    #[test]
    fn plain_joint_tracks_quadrature_at_moderate_eps() {
        let cfg = SimConfig::new(1_000_000, 42, McMethod::Plain);
        let (b, r) = (1.2816, 0.5);
        let est = estimate_joint_failure(score(b), score(b), corr(r), &cfg).unwrap();
        let exact = upper_tail(score(b), score(b), corr(r)).unwrap().value.value();
        let z = (est.estimate - exact) / est.std_error;
        assert!(z.abs() <= 3.0, "z = {z}");
    }

    #[test]
    fn importance_reaches_the_deep_tail() {
        let cfg = SimConfig::new(1_000_000, 42, McMethod::Importance);
        let (b, r) = (3.719, 0.5);
        let est = estimate_joint_failure(score(b), score(b), corr(r), &cfg).unwrap();
        let exact = upper_tail(score(b), score(b), corr(r)).unwrap().value.value();
        assert!((exact - 2.33e-6).abs() <= 0.01e-6);
        let z = (est.estimate - exact) / est.std_error;
        assert!(z.abs() <= 3.0, "z = {z}, est = {}, exact = {exact}", est.estimate);
        assert!(est.std_error / est.estimate <= 0.02);
    }

    #[test]
    fn importance_rejects_degenerate_correlation() {
        let cfg = SimConfig::new(1000, 1, McMethod::Importance);
        assert!(estimate_joint_failure(score(1.0), score(1.0), corr(1.0), &cfg).is_err());
    }

    #[test]
    fn plain_and_importance_agree() {
        let (b, r) = (1.2816, 0.5);
        let plain = estimate_joint_failure(
            score(b),
            score(b),
            corr(r),
            &SimConfig::new(400_000, 5, McMethod::Plain),
        )
        .unwrap();
        let tilted = estimate_joint_failure(
            score(b),
            score(b),
            corr(r),
            &SimConfig::new(400_000, 5, McMethod::Importance),
        )
        .unwrap();
        let combined = (plain.std_error.powi(2) + tilted.std_error.powi(2)).sqrt();
        assert!((plain.estimate - tilted.estimate).abs() <= 3.0 * combined);
    }

    #[test]
    fn estimates_are_deterministic() {
        let cfg = SimConfig::new(200_000, 11, McMethod::Plain);
        let a = estimate_joint_failure(score(1.0), score(1.0), corr(0.3), &cfg).unwrap();
        let b = estimate_joint_failure(score(1.0), score(1.0), corr(0.3), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn estimates_do_not_depend_on_thread_count() {
        let cfg = SimConfig::new(300_000, 3, McMethod::Plain);
        let run = || {
            (
                estimate_joint_failure(score(1.0), score(1.5), corr(0.4), &cfg).unwrap(),
                estimate_event_correlation(score(1.0), score(1.5), corr(0.4), &cfg).unwrap(),
            )
        };
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(run);
        let many = rayon::ThreadPoolBuilder::new()
            .num_threads(8)
            .build()
            .unwrap()
            .install(run);
        assert_eq!(single, many);
    }

    #[test]
    fn correlation_estimate_is_invariant_to_batch_count() {
        let mut cfg = SimConfig::new(100_000, 17, McMethod::Plain);
        cfg.batch_count = 4;
        let a = estimate_event_correlation(score(1.2816), score(1.2816), corr(0.5), &cfg).unwrap();
        cfg.batch_count = 64;
        let b = estimate_event_correlation(score(1.2816), score(1.2816), corr(0.5), &cfg).unwrap();
        assert_eq!(a.estimate, b.estimate);
        assert_ne!(a.std_error, b.std_error);
    }

    #[test]
    fn correlation_tracks_quadrature() {
        let cfg = SimConfig::new(1_000_000, 42, McMethod::Plain);
        let (b, r) = (1.2816, 0.5);
        let est = estimate_event_correlation(score(b), score(b), corr(r), &cfg).unwrap();
        let eps = q_raw(b);
        let l = upper_tail(score(b), score(b), corr(r)).unwrap().value.value();
        let exact = (l - eps * eps) / (eps * (1.0 - eps));
        let z = (est.estimate - exact) / est.std_error;
        assert!(z.abs() <= 3.0, "z = {z}");
    }

    #[test]
    fn identical_indicators_give_exactly_one() {
        let cfg = SimConfig::new(10_000, 2, McMethod::Plain);
        let est = estimate_event_correlation(score(1.2816), score(1.2816), corr(1.0), &cfg).unwrap();
        assert_eq!(est.estimate, 1.0);
    }

    #[test]
    fn marginal_failure_rates_match_q() {
        let n = 1_000_000u64;
        let mut rng = chunk_rng(8, 0);
        let (b1, b2, rho) = (1.2816, 2.0, 0.6);
        let (mut f1, mut f2) = (0u64, 0u64);
        for _ in 0..n {
            let p = sample_pair(corr(rho), &mut rng);
            f1 += u64::from(p.x1.value() > b1);
            f2 += u64::from(p.x2.value() > b2);
        }
        for (fails, b) in [(f1, b1), (f2, b2)] {
            let eps = q_raw(b);
            let se = (eps * (1.0 - eps) / n as f64).sqrt();
            let freq = fails as f64 / n as f64;
            assert!((freq - eps).abs() <= 3.0 * se, "b = {b}: freq = {freq}, eps = {eps}");
        }
    }

    #[test]
    fn no_events_is_a_reported_error() {
        let cfg = SimConfig::new(1_000, 4, McMethod::Plain);
        match estimate_event_correlation(score(6.0), score(6.0), corr(0.2), &cfg) {
            Err(Error::InsufficientEvents {
                failures1,
                failures2,
                n_samples,
            }) => {
                assert_eq!(failures1, 0);
                assert_eq!(failures2, 0);
                assert_eq!(n_samples, 1_000);
            }
            other => panic!("expected insufficient events, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = SimConfig::new(0, 1, McMethod::Plain);
        assert!(estimate_joint_failure(score(0.0), score(0.0), corr(0.0), &cfg).is_err());
        cfg = SimConfig::new(10, 1, McMethod::Plain);
        cfg.batch_count = 11;
        assert!(estimate_joint_failure(score(0.0), score(0.0), corr(0.0), &cfg).is_err());
        cfg = SimConfig::new(100, 1, McMethod::Importance);
        assert!(estimate_event_correlation(score(0.0), score(0.0), corr(0.0), &cfg).is_err());
    }
}
