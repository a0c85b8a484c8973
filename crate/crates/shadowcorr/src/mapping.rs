//! The forward and inverse mapping between shadowing cross-correlation and
//! failure-event correlation for a dual-connectivity pair of links, plus
//! the link-budget arithmetic that feeds it.
//!
//! Pipeline: a link budget resolves to a normalized fade margin `beta`;
//! `beta` gives the per-link failure probability `eps = Q(beta)`; two links
//! plus a shadowing correlation `rho_h` give the joint failure probability
//! `L` (an orthant probability) and from it the Pearson correlation of the
//! two failure indicators,
//!
//! ```text
//! rho = (L - eps1*eps2) / (sigma1 * sigma2),   sigma_i = sqrt(eps_i*(1 - eps_i)).
//! ```

use crate::bivariate::{upper_tail, upper_tail_degenerate, ShadowingCorrelation};
use crate::error::{Error, Result};
use crate::gaussian::{q_function, q_inverse, StandardScore, UnitProbability};

/// Link-budget inputs for one wireless path, all in dB / dBm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    /// Transmit power (dBm).
    pub p_t: f64,
    /// Path loss (dB).
    pub p_l: f64,
    /// Receive threshold (dBm).
    pub p_th: f64,
    /// Shadowing standard deviation (dB).
    pub sigma_db: f64,
}

impl LinkBudget {
    pub fn new(p_t: f64, p_l: f64, p_th: f64, sigma_db: f64) -> Result<Self> {
        for (what, v) in [
            ("transmit power", p_t),
            ("path loss", p_l),
            ("receive threshold", p_th),
        ] {
            if !v.is_finite() {
                return Err(Error::Domain {
                    what,
                    requirement: "finite",
                    value: v,
                });
            }
        }
        if !(sigma_db.is_finite() && sigma_db > 0.0) {
            return Err(Error::Domain {
                what: "shadowing std-dev",
                requirement: "finite and > 0",
                value: sigma_db,
            });
        }
        Ok(Self {
            p_t,
            p_l,
            p_th,
            sigma_db,
        })
    }
}

/// Normalized fade margin: `(P_t - P_l - P_th) / sigma_dB`.
pub fn normalized_margin(budget: &LinkBudget) -> Result<StandardScore> {
    StandardScore::new((budget.p_t - budget.p_l - budget.p_th) / budget.sigma_db)
}

/// The derived per-link triple: margin, failure probability, reliability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkReliability {
    beta: StandardScore,
    epsilon: UnitProbability,
    reliability: UnitProbability,
}

impl LinkReliability {
    pub fn from_beta(beta: StandardScore) -> Self {
        let epsilon = q_function(beta);
        Self {
            beta,
            epsilon,
            reliability: UnitProbability::from_clamped(1.0 - epsilon.value()),
        }
    }

    pub fn from_epsilon(epsilon: UnitProbability) -> Result<Self> {
        let beta = q_inverse(epsilon)?;
        Ok(Self {
            beta,
            epsilon,
            reliability: UnitProbability::from_clamped(1.0 - epsilon.value()),
        })
    }

    pub fn from_budget(budget: &LinkBudget) -> Result<Self> {
        Ok(Self::from_beta(normalized_margin(budget)?))
    }

    pub fn beta(&self) -> StandardScore {
        self.beta
    }

    pub fn epsilon(&self) -> UnitProbability {
        self.epsilon
    }

    pub fn reliability(&self) -> UnitProbability {
        self.reliability
    }
}

/// Reliability triple for a margin `beta`: `eps = Q(beta)`, `R = 1 - eps`.
pub fn link_reliability(beta: StandardScore) -> LinkReliability {
    LinkReliability::from_beta(beta)
}

/// Standard deviation of a Bernoulli failure indicator with mean `eps`.
pub fn indicator_sigma(epsilon: UnitProbability) -> f64 {
    let e = epsilon.value();
    (e * (1.0 - e)).sqrt()
}

/// Two links and the shadowing cross-correlation between them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualLinkScenario {
    pub link1: LinkReliability,
    pub link2: LinkReliability,
    pub rho_h: ShadowingCorrelation,
}

impl DualLinkScenario {
    pub fn new(link1: LinkReliability, link2: LinkReliability, rho_h: ShadowingCorrelation) -> Self {
        Self {
            link1,
            link2,
            rho_h,
        }
    }

    pub fn from_betas(b1: StandardScore, b2: StandardScore, rho_h: ShadowingCorrelation) -> Self {
        Self::new(LinkReliability::from_beta(b1), LinkReliability::from_beta(b2), rho_h)
    }

    pub fn from_epsilons(
        e1: UnitProbability,
        e2: UnitProbability,
        rho_h: ShadowingCorrelation,
    ) -> Result<Self> {
        Ok(Self::new(
            LinkReliability::from_epsilon(e1)?,
            LinkReliability::from_epsilon(e2)?,
            rho_h,
        ))
    }
}

/// Failure-event correlation plus the quantities it is assembled from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationResult {
    /// Pearson correlation of the two failure indicators, in [-1, 1].
    pub rho: f64,
    /// Joint failure probability `L = P(X1 > beta1, X2 > beta2)`.
    pub joint_failure: UnitProbability,
    pub sigma_ind1: f64,
    pub sigma_ind2: f64,
}

/// Overshoot beyond [-1, 1] tolerated (then clamped) before the result is
/// treated as a quadrature failure.
const RHO_CLAMP_SLACK: f64 = 1e-9;

/// Forward mapping: `(beta1, beta2, rho_h) -> rho`.
pub fn event_correlation(scenario: &DualLinkScenario) -> Result<CorrelationResult> {
    let e1 = scenario.link1.epsilon().value();
    let e2 = scenario.link2.epsilon().value();
    for e in [e1, e2] {
        if e == 0.0 || e == 1.0 {
            return Err(Error::DegenerateScenario { epsilon: e });
        }
    }
    let joint = upper_tail(scenario.link1.beta(), scenario.link2.beta(), scenario.rho_h)?;
    let l = joint.value.value();
    let v1 = e1 * (1.0 - e1);
    let v2 = e2 * (1.0 - e2);
    let raw = (l - e1 * e2) / (v1 * v2).sqrt();
    if !raw.is_finite() || raw.abs() > 1.0 + RHO_CLAMP_SLACK {
        return Err(Error::Internal(format!(
            "event correlation {raw} overshoots [-1, 1] beyond slack; quadrature failure"
        )));
    }
    Ok(CorrelationResult {
        rho: raw.clamp(-1.0, 1.0),
        joint_failure: joint.value,
        sigma_ind1: v1.sqrt(),
        sigma_ind2: v2.sqrt(),
    })
}

/// Joint failure probability of the duplicated transmission: packet loss
/// end-to-end requires both links to fail at once.
pub fn dual_failure_probability(scenario: &DualLinkScenario) -> Result<UnitProbability> {
    let joint = upper_tail(scenario.link1.beta(), scenario.link2.beta(), scenario.rho_h)?;
    #[cfg(debug_assertions)]
    {
        if let Ok(c) = event_correlation(scenario) {
            let ee = scenario.link1.epsilon().value() * scenario.link2.epsilon().value();
            let rebuilt = ee + c.rho * c.sigma_ind1 * c.sigma_ind2;
            let l = joint.value.value();
            // The 1e-14*ee term is the rounding floor of the two
            // cancelling products when L << eps1*eps2.
            debug_assert!(
                (rebuilt - l).abs() <= 1e-12 * l + 1e-14 * ee + 1e-300,
                "identity eps1*eps2 + rho*s1*s2 = L broke: {rebuilt} vs {l}"
            );
        }
    }
    Ok(joint.value)
}

/// Largest event correlation attainable for the given marginals (the
/// Frechet upper bound on the joint failure, reached at rho_h = 1).
pub fn max_event_correlation(eps1: UnitProbability, eps2: UnitProbability) -> Result<f64> {
    let (e1, e2) = (eps1.value(), eps2.value());
    for e in [e1, e2] {
        if e == 0.0 || e == 1.0 {
            return Err(Error::DegenerateScenario { epsilon: e });
        }
    }
    let v1 = e1 * (1.0 - e1);
    let v2 = e2 * (1.0 - e2);
    Ok((e1.min(e2) - e1 * e2) / (v1 * v2).sqrt())
}

/// Inverse mapping: the rho_h whose forward image is `rho_target`.
///
/// The forward map is strictly increasing in rho_h (Slepian), so a
/// bracketed bisection cannot miss. Both edges of the preimage are
/// located and their midpoint returned; where the map is so flat that a
/// whole interval of rho_h values produces the same f64 correlation, this
/// lands in the middle of that interval, which is the best any inverse of
/// the rounded value can do.
pub fn invert_correlation(
    rho_target: f64,
    eps1: UnitProbability,
    eps2: UnitProbability,
) -> Result<ShadowingCorrelation> {
    if !rho_target.is_finite() {
        return Err(Error::Domain {
            what: "target correlation",
            requirement: "finite",
            value: rho_target,
        });
    }
    let (e1, e2) = (eps1.value(), eps2.value());
    for e in [e1, e2] {
        if e <= 0.0 || e >= 1.0 {
            return Err(Error::DegenerateScenario { epsilon: e });
        }
    }
    let link1 = LinkReliability::from_epsilon(eps1)?;
    let link2 = LinkReliability::from_epsilon(eps2)?;
    // Same association order as event_correlation, so the bounds below are
    // bit-compatible with forward-map outputs.
    let v1 = e1 * (1.0 - e1);
    let v2 = e2 * (1.0 - e2);
    let denom = (v1 * v2).sqrt();

    let corr_at = |rho_h: f64| -> Result<f64> {
        let rho_h = ShadowingCorrelation::new(rho_h)?;
        if rho_h.value().abs() == 1.0 {
            let l = upper_tail_degenerate(link1.beta(), link2.beta(), rho_h)?;
            Ok(((l.value.value() - e1 * e2) / denom).clamp(-1.0, 1.0))
        } else {
            Ok(event_correlation(&DualLinkScenario::new(link1, link2, rho_h))?.rho)
        }
    };

    let rho_min = corr_at(-1.0)?;
    let rho_max = corr_at(1.0)?;
    let slack = 4.0 * f64::EPSILON * rho_min.abs().max(rho_max.abs()).max(1e-300);
    if rho_target < rho_min - slack || rho_target > rho_max + slack {
        return Err(Error::TargetUnattainable {
            target: rho_target,
            min: rho_min,
            max: rho_max,
        });
    }
    if rho_target >= rho_max {
        return ShadowingCorrelation::new(1.0);
    }
    if rho_target <= rho_min {
        return ShadowingCorrelation::new(-1.0);
    }

    // Left edge of { rho_h : f(rho_h) >= target }.
    let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
    for _ in 0..53 {
        let mid = 0.5 * (lo + hi);
        if corr_at(mid)? < rho_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let left = 0.5 * (lo + hi);

    // Right edge of { rho_h : f(rho_h) <= target }.
    let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
    for _ in 0..53 {
        let mid = 0.5 * (lo + hi);
        if corr_at(mid)? <= rho_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let right = 0.5 * (lo + hi);

    ShadowingCorrelation::new((0.5 * (left + right)).clamp(-1.0, 1.0))
}

/// The rho_h values of the reference mapping table.
pub const TABLE_RHO_H: [f64; 8] = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.7, 1.0];

/// The reference mapping evaluated at eps1 = eps2 = 1e-4: `(rho_h, rho)`
/// for each tabulated rho_h.
pub fn table_one() -> Vec<(ShadowingCorrelation, f64)> {
    let eps = UnitProbability::new(1e-4).expect("1e-4 is a valid probability");
    TABLE_RHO_H
        .iter()
        .map(|&rh| {
            let rho_h = ShadowingCorrelation::new(rh).expect("tabulated rho_h is valid");
            let scenario = DualLinkScenario::from_epsilons(eps, eps, rho_h)
                .expect("eps = 1e-4 resolves to a finite beta");
            let rho = event_correlation(&scenario)
                .expect("forward mapping is defined for eps = 1e-4")
                .rho;
            (rho_h, rho)
        })
        .collect()
}
