//! Bivariate standard-normal upper-orthant probability
//! `L(b1, b2; rho_h) = P(X1 > b1, X2 > b2)`, computed by two independent
//! numerical routes so each can serve as the other's oracle:
//!
//! * [`upper_tail_single_integral`]: adaptive Gauss-Kronrod quadrature of
//!   the reduced one-dimensional integral
//!   `int_{b2}^inf Q((b1 - rho*x)/sqrt(1-rho^2)) * phi(x) dx`.
//! * [`upper_tail_second_method`]: the Drezner-Wesolowsky correlation
//!   integral with Genz's double-precision modifications (the `bvnd`
//!   algorithm), evaluated by fixed-order Gauss-Legendre rules.
//!
//! Both compute the small joint tail directly, never as a difference of
//! CDF values, so no catastrophic cancellation occurs at the 1e-8-scale
//! values the failure-correlation mapping needs.

use crate::error::{Error, Result};
use crate::gaussian::{pdf_raw, q_raw, StandardScore, UnitProbability};

/// Pearson correlation between the two standardized shadowing variables.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ShadowingCorrelation(f64);

impl ShadowingCorrelation {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && (-1.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::Domain {
                what: "shadowing correlation",
                requirement: "in [-1, 1]",
                value,
            })
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Which evaluation route produced an orthant probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrthantMethod {
    SingleIntegral,
    SecondMethod,
    ClosedFormDegenerate,
}

/// An orthant probability together with its provenance and an absolute
/// error bound for the numerical route that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrthantProbability {
    pub value: UnitProbability,
    pub method: OrthantMethod,
    pub abs_error_bound: f64,
}

/// Correlations this close to +/-1 are routed to the closed form: the
/// 1/sqrt(1 - rho^2) factor in the integrand is numerically explosive.
pub const DEGENERATE_SNAP: f64 = 1e-10;

/// Below this the value has no meaningful support in f64 and is reported
/// as zero.
const VALUE_FLOOR: f64 = 1e-300;

/// P(X1 > b1, X2 > b2) by adaptive quadrature of the reduced single
/// integral. Relative error is ~1e-13 whenever the value is representable.
pub fn upper_tail_single_integral(
    b1: StandardScore,
    b2: StandardScore,
    rho_h: ShadowingCorrelation,
) -> Result<OrthantProbability> {
    let rho = rho_h.value();
    if rho.abs() >= 1.0 {
        return Err(Error::DegenerateCorrelation { rho_h: rho });
    }
    let (value, bound) = single_integral_raw(b1.value(), b2.value(), rho);
    finish(value, bound, OrthantMethod::SingleIntegral)
}

/// P(X1 > b1, X2 > b2) by the Drezner-Wesolowsky / Genz `bvnd` algorithm.
/// Structurally independent of the single-integral route; absolute error
/// is a few 1e-16.
pub fn upper_tail_second_method(
    b1: StandardScore,
    b2: StandardScore,
    rho_h: ShadowingCorrelation,
) -> Result<OrthantProbability> {
    let rho = rho_h.value();
    if rho.abs() >= 1.0 {
        return Err(Error::DegenerateCorrelation { rho_h: rho });
    }
    let raw = bvnd_upper(b1.value(), b2.value(), rho);
    // The correlation integral can land a few 1e-16 outside [0, 1] when
    // the true value is at that scale.
    let clamped = raw.clamp(0.0, 1.0);
    if (raw - clamped).abs() > 1e-12 {
        return Err(Error::Internal(format!(
            "bvnd returned {raw} for b1={}, b2={}, rho_h={rho}",
            b1.value(),
            b2.value()
        )));
    }
    finish(clamped, 1e-15 + (raw - clamped).abs(), OrthantMethod::SecondMethod)
}

/// Closed form at |rho_h| = 1, where the pair is co- or antimonotone.
pub fn upper_tail_degenerate(
    b1: StandardScore,
    b2: StandardScore,
    rho_h: ShadowingCorrelation,
) -> Result<OrthantProbability> {
    let rho = rho_h.value();
    if rho.abs() != 1.0 {
        return Err(Error::NotDegenerate { rho_h: rho });
    }
    let (b1, b2) = (b1.value(), b2.value());
    let value = if rho > 0.0 {
        // X1 = X2: both exceed iff the larger threshold is exceeded.
        q_raw(b1.max(b2))
    } else {
        // X2 = -X1: the event is b1 < X < -b2.
        (q_raw(b1) - q_raw(-b2)).max(0.0)
    };
    finish(value, 4.0 * f64::EPSILON * value, OrthantMethod::ClosedFormDegenerate)
}

/// Dispatcher: correlations within [`DEGENERATE_SNAP`] of +/-1 go to the
/// closed form, everything else to the single-integral route.
pub fn upper_tail(
    b1: StandardScore,
    b2: StandardScore,
    rho_h: ShadowingCorrelation,
) -> Result<OrthantProbability> {
    let rho = rho_h.value();
    if rho.abs() > 1.0 - DEGENERATE_SNAP {
        let snapped = ShadowingCorrelation::new(1.0_f64.copysign(rho))?;
        upper_tail_degenerate(b1, b2, snapped)
    } else {
        upper_tail_single_integral(b1, b2, rho_h)
    }
}

fn finish(value: f64, bound: f64, method: OrthantMethod) -> Result<OrthantProbability> {
    if !value.is_finite() || !(-1e-12..=1.0 + 1e-12).contains(&value) {
        return Err(Error::Internal(format!(
            "orthant probability {value} escaped [0, 1]"
        )));
    }
    let (value, bound) = if value < VALUE_FLOOR {
        (0.0, bound.max(value.max(0.0)))
    } else {
        (value, bound)
    };
    Ok(OrthantProbability {
        value: UnitProbability::from_clamped(value),
        method,
        abs_error_bound: bound,
    })
}

// ---------------------------------------------------------------------------
// Route 1: adaptive Gauss-Kronrod on the reduced single integral.
// ---------------------------------------------------------------------------

/// Per-panel relative tolerance for the adaptive rule.
const REL_TOL: f64 = 1e-14;
/// March until the tail envelope drops below this fraction of the total.
const TRUNCATION_RATIO: f64 = 1e-20;
/// phi(x) underflows well before this; nothing lives outside [-40, 40].
const X_CAP: f64 = 40.0;

fn single_integral_raw(b1: f64, b2: f64, rho: f64) -> (f64, f64) {
    // Integrate over the variable with the larger threshold so the routine
    // is exactly symmetric in its arguments.
    let (outer, inner) = if b1 >= b2 { (b1, b2) } else { (b2, b1) };
    if q_raw(outer) == 0.0 || outer >= X_CAP {
        // Frechet: the value is below min(eps1, eps2), already underflowed.
        return (0.0, 0.0);
    }
    let inv_s = 1.0 / (1.0 - rho * rho).sqrt();
    let f = |x: f64| q_raw((inner - rho * x) * inv_s) * pdf_raw(x);

    let mut total = 0.0_f64;
    let mut comp = 0.0_f64; // Kahan compensation
    let mut err = 0.0_f64;
    let mut a = outer.max(-X_CAP);
    while a < X_CAP {
        let b = (a + 1.0).min(X_CAP);
        let scale = total.max(0.0);
        let v = adapt_gk15(&f, a, b, scale, 0, &mut err);
        let y = v - comp;
        let t = total + y;
        comp = (t - total) - y;
        total = t;
        a = b;
        if a >= 1.0 && total > 0.0 {
            // Envelope of the remaining mass: the Q factor is at most 1,
            // so the tail is below Q(a) <= phi(a)/a.
            let tail = pdf_raw(a) / a;
            if tail <= TRUNCATION_RATIO * total {
                err += tail;
                break;
            }
        }
    }
    (total, err)
}

fn adapt_gk15<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    scale: f64,
    depth: u32,
    err_acc: &mut f64,
) -> f64 {
    let (value, err) = gk15(f, a, b);
    if err <= REL_TOL * scale.max(value.abs()) || depth >= 24 {
        *err_acc += err;
        return value;
    }
    let mid = 0.5 * (a + b);
    adapt_gk15(f, a, mid, scale, depth + 1, err_acc) + adapt_gk15(f, mid, b, scale, depth + 1, err_acc)
}

// 15-point Kronrod nodes (positive half; even indices are Kronrod-only,
// odd indices carry the embedded 7-point Gauss rule).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resg = WG[3] * fc;
    let mut resk = WGK[7] * fc;
    for j in 0..3 {
        let i = 2 * j + 1;
        let d = h * XGK[i];
        let s = f(c - d) + f(c + d);
        resg += WG[j] * s;
        resk += WGK[i] * s;
    }
    for j in 0..4 {
        let i = 2 * j;
        let d = h * XGK[i];
        resk += WGK[i] * (f(c - d) + f(c + d));
    }
    ((resk * h), ((resk - resg) * h).abs())
}

// ---------------------------------------------------------------------------
// Route 2: Drezner-Wesolowsky / Genz bvnd.
//
// The correlation-integral identity
//   P(X > h, Y > k; r) = Q(h)Q(k)
//     + (1/2pi) int_0^asin(r) exp(-(hs - hk sin t)/(cos^2 t)) dt
// is integrated by fixed Gauss-Legendre rules for |r| <= 0.925; closer to
// |r| = 1 Genz's asymptotic expansion around the comonotone limit is used.
// Port of the tvpack BVND routine; for r < -0.925 only the second
// threshold is negated (k -> -k, hk -> -hk), which is the identity
//   P(X>h, Y>k; r) = P(X>h) - P(X>h, Y'>-k; -r), Y' = -Y.
// ---------------------------------------------------------------------------

const FRAC_1_TWO_PI: f64 = 0.159_154_943_091_895_335_77;
const SQRT_TWO_PI: f64 = 2.506_628_274_631_000_502_4;

// Gauss-Legendre (weight, node) pairs, tvpack's tables.
const GL6: [(f64, f64); 3] = [
    (0.1713244923791705, -0.9324695142031522),
    (0.3607615730481384, -0.6612093864662647),
    (0.4679139345726904, -0.2386191860831970),
];
const GL12: [(f64, f64); 6] = [
    (0.04717533638651177, -0.9815606342467191),
    (0.1069393259953183, -0.9041172563704750),
    (0.1600783285433464, -0.7699026741943050),
    (0.2031674267230659, -0.5873179542866171),
    (0.2334925365383547, -0.3678314989981802),
    (0.2491470458134029, -0.1252334085114692),
];
const GL20: [(f64, f64); 10] = [
    (0.01761400713915212, -0.9931285991850949),
    (0.04060142980038694, -0.9639719272779138),
    (0.06267204833410906, -0.9122344282513259),
    (0.08327674157670475, -0.8391169718222188),
    (0.1019301198172404, -0.7463319064601508),
    (0.1181945319615184, -0.6360536807265150),
    (0.1316886384491766, -0.5108670019508271),
    (0.1420961093183821, -0.3737060887154196),
    (0.1491729864726037, -0.2277858511416451),
    (0.1527533871307259, -0.07652652113349733),
];

/// Standard-normal CDF, tail-stable.
fn phid(z: f64) -> f64 {
    q_raw(-z)
}

fn bvnd_upper(h_in: f64, k_in: f64, r: f64) -> f64 {
    let h = h_in;
    let mut k = k_in;
    let mut hk = h * k;
    let mut bvn = 0.0_f64;

    let quad: &[(f64, f64)] = if r.abs() < 0.3 {
        &GL6
    } else if r.abs() < 0.75 {
        &GL12
    } else {
        &GL20
    };

    if r.abs() <= 0.925 {
        if r != 0.0 {
            let hs = 0.5 * (h * h + k * k);
            let asr = 0.5 * r.asin();
            for &(w, x) in quad {
                for is in [-1.0_f64, 1.0] {
                    let sn = (asr * (is * x + 1.0)).sin();
                    bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
                }
            }
            bvn *= asr * FRAC_1_TWO_PI;
        }
        bvn + q_raw(h) * q_raw(k)
    } else {
        if r < 0.0 {
            k = -k;
            hk = -hk;
        }
        if r.abs() < 1.0 {
            let a_sq = (1.0 - r) * (1.0 + r);
            let mut a = a_sq.sqrt();
            let b_sq = (h - k) * (h - k);
            let c = (4.0 - hk) / 8.0;
            let d = (12.0 - hk) / 16.0;
            let asr = -0.5 * (b_sq / a_sq + hk);
            if asr > -100.0 {
                bvn = a
                    * asr.exp()
                    * (1.0 - c * (b_sq - a_sq) * (1.0 - d * b_sq / 5.0) / 3.0
                        + c * d * a_sq * a_sq / 5.0);
            }
            if -hk < 100.0 {
                let b = b_sq.sqrt();
                bvn -= (-0.5 * hk).exp()
                    * SQRT_TWO_PI
                    * phid(-b / a)
                    * b
                    * (1.0 - c * b_sq * (1.0 - d * b_sq / 5.0) / 3.0);
            }
            a *= 0.5;
            for &(w, x) in quad {
                for is in [-1.0_f64, 1.0] {
                    let t = a * (is * x + 1.0);
                    let xs = t * t;
                    let rs = (1.0 - xs).sqrt();
                    let asr1 = -0.5 * (b_sq / xs + hk);
                    if asr1 > -100.0 {
                        bvn += a
                            * w
                            * asr1.exp()
                            * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs
                                - (1.0 + c * xs * (1.0 + d * xs)));
                    }
                }
            }
            bvn = -bvn * FRAC_1_TWO_PI;
        }
        if r > 0.0 {
            bvn + phid(-h.max(k))
        } else {
            bvn = -bvn;
            if k > h {
                bvn += phid(k) - phid(h);
            }
            bvn
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn score(x: f64) -> StandardScore {
        StandardScore::new(x).unwrap()
    }

    fn corr(r: f64) -> ShadowingCorrelation {
        ShadowingCorrelation::new(r).unwrap()
    }

    fn sheppard(rho: f64) -> f64 {
        0.25 + rho.asin() / (2.0 * std::f64::consts::PI)
    }

    #[test]
    fn correlation_type_rejects_out_of_range() {
        assert!(ShadowingCorrelation::new(1.5).is_err());
        assert!(ShadowingCorrelation::new(-1.0001).is_err());
        assert!(ShadowingCorrelation::new(f64::NAN).is_err());
        assert!(ShadowingCorrelation::new(1.0).is_ok());
    }

    #[test]
    fn single_integral_factorizes_at_zero_correlation() {
        let l = upper_tail_single_integral(score(3.719), score(3.719), corr(0.0)).unwrap();
        let expected = q_raw(3.719) * q_raw(3.719);
        let rel = ((l.value.value() - expected) / expected).abs();
        assert!(rel <= 1e-12, "rel = {rel}");
        assert!((l.value.value() - 1.0e-8).abs() <= 2e-10);
        assert_eq!(l.method, OrthantMethod::SingleIntegral);
    }

    #[test]
    fn single_integral_matches_sheppard_at_origin() {
        let l = upper_tail_single_integral(score(0.0), score(0.0), corr(0.5)).unwrap();
        assert!((l.value.value() - 1.0 / 3.0).abs() <= 1e-13);
    }

    #[test]
    fn single_integral_matches_reference_tail_value() {
        // Reference: 40-digit quadrature of the reduced integral.
        let l = upper_tail_single_integral(score(3.719), score(3.719), corr(0.5)).unwrap();
        let reference = 2.3313510921549722e-6;
        let rel = ((l.value.value() - reference) / reference).abs();
        assert!(rel <= 1e-10, "got {}, rel = {rel}", l.value.value());
    }

    #[test]
    fn single_integral_rejects_degenerate_correlation() {
        assert!(matches!(
            upper_tail_single_integral(score(0.0), score(0.0), corr(1.0)),
            Err(Error::DegenerateCorrelation { .. })
        ));
    }

    #[test]
    fn second_method_independent_medians() {
        let l = upper_tail_second_method(score(0.0), score(0.0), corr(0.0)).unwrap();
        assert_eq!(l.value.value(), 0.25);
        assert_eq!(l.method, OrthantMethod::SecondMethod);
    }

    #[test]
    fn second_method_matches_sheppard() {
        let l = upper_tail_second_method(score(0.0), score(0.0), corr(0.3)).unwrap();
        assert!((l.value.value() - sheppard(0.3)).abs() <= 1e-14);
        assert!((l.value.value() - 0.29849334201033915).abs() <= 1e-14);
    }

    #[test]
    fn methods_agree_on_deep_tail() {
        let a = upper_tail_single_integral(score(3.719), score(3.719), corr(0.5)).unwrap();
        let b = upper_tail_second_method(score(3.719), score(3.719), corr(0.5)).unwrap();
        let rel = ((a.value.value() - b.value.value()) / a.value.value()).abs();
        assert!(rel <= 1e-6, "rel = {rel}");
    }

    #[test]
    fn methods_agree_at_mixed_thresholds() {
        // Reference: 40-digit quadrature.
        let reference = 3.0813481800660616e-4;
        let a = upper_tail_single_integral(score(2.0), score(3.0), corr(0.4)).unwrap();
        let b = upper_tail_second_method(score(2.0), score(3.0), corr(0.4)).unwrap();
        assert!(((a.value.value() - reference) / reference).abs() <= 1e-12);
        assert!(((b.value.value() - reference) / reference).abs() <= 1e-9);
    }

    #[test]
    fn methods_agree_at_strong_negative_correlation() {
        for &(b1, b2) in &[(0.0, 0.0), (1.0, 1.0), (2.0, 1.0), (3.0, 3.0)] {
            let a = upper_tail_single_integral(score(b1), score(b2), corr(-0.95)).unwrap();
            let b = upper_tail_second_method(score(b1), score(b2), corr(-0.95)).unwrap();
            let diff = (a.value.value() - b.value.value()).abs();
            assert!(
                diff <= 1e-14_f64.max(1e-6 * a.value.value()),
                "b1={b1}, b2={b2}: single={}, second={}",
                a.value.value(),
                b.value.value()
            );
        }
    }

    #[test]
    fn degenerate_comonotone_takes_binding_threshold() {
        let l = upper_tail_degenerate(score(1.0), score(2.0), corr(1.0)).unwrap();
        assert_eq!(l.value.value(), q_raw(2.0));
        let l = upper_tail_degenerate(score(3.719), score(3.719), corr(1.0)).unwrap();
        assert_eq!(l.value.value(), q_raw(3.719));
        assert!((l.value.value() - 1e-4).abs() <= 2e-6);
    }

    #[test]
    fn degenerate_antimonotone_disjoint_events_are_impossible() {
        let l = upper_tail_degenerate(score(1.0), score(1.0), corr(-1.0)).unwrap();
        assert_eq!(l.value.value(), 0.0);
        // Overlapping case: P(-1 < X < 1).
        let l = upper_tail_degenerate(score(-1.0), score(-1.0), corr(-1.0)).unwrap();
        assert!((l.value.value() - (1.0 - 2.0 * q_raw(1.0))).abs() <= 1e-15);
    }

    #[test]
    fn degenerate_rejects_interior_correlation() {
        assert!(matches!(
            upper_tail_degenerate(score(0.0), score(0.0), corr(0.5)),
            Err(Error::NotDegenerate { .. })
        ));
    }

    #[test]
    fn dispatcher_routes_degenerate_and_snaps() {
        let exact = upper_tail(score(1.0), score(2.0), corr(1.0)).unwrap();
        assert_eq!(exact.method, OrthantMethod::ClosedFormDegenerate);
        assert_eq!(exact.value.value(), q_raw(2.0));

        let snapped = upper_tail(score(1.0), score(2.0), corr(1.0 - 1e-12)).unwrap();
        assert_eq!(snapped.method, OrthantMethod::ClosedFormDegenerate);
        assert_eq!(snapped.value.value(), exact.value.value());
    }

    #[test]
    fn dispatcher_factorizes_independent_links() {
        let b = 1.2816;
        let l = upper_tail(score(b), score(b), corr(0.0)).unwrap();
        let expected = q_raw(b) * q_raw(b);
        assert!(((l.value.value() - expected) / expected).abs() <= 1e-12);
    }

    #[test]
    fn dispatcher_agrees_with_both_internal_methods() {
        let (b1, b2, r) = (score(2.0), score(3.0), corr(0.4));
        let d = upper_tail(b1, b2, r).unwrap().value.value();
        let a = upper_tail_single_integral(b1, b2, r).unwrap().value.value();
        let b = upper_tail_second_method(b1, b2, r).unwrap().value.value();
        assert_eq!(d, a);
        assert!(((d - b) / d).abs() <= 1e-6);
    }

    #[test]
    fn single_integral_is_exactly_symmetric() {
        for &(b1, b2, r) in &[(2.0, 3.0, 0.4), (0.5, -1.5, -0.6), (3.719, 1.0, 0.9)] {
            let a = upper_tail_single_integral(score(b1), score(b2), corr(r)).unwrap();
            let b = upper_tail_single_integral(score(b2), score(b1), corr(r)).unwrap();
            assert_eq!(a.value.value(), b.value.value());
        }
    }

    #[test]
    fn values_below_support_floor_report_zero() {
        // rho < 0 with deep thresholds: the joint tail is ~1e-350.
        let l = upper_tail(score(9.0), score(9.0), corr(-0.9)).unwrap();
        assert_eq!(l.value.value(), 0.0);
        // Just above the floor the value is still reported faithfully.
        let l = upper_tail(score(8.0), score(8.0), corr(-0.9)).unwrap();
        assert!(l.value.value() > 1e-285 && l.value.value() < 1e-280);
    }

    #[test]
    fn error_bound_is_reported() {
        let l = upper_tail_single_integral(score(2.0), score(2.0), corr(0.3)).unwrap();
        assert!(l.abs_error_bound > 0.0);
        assert!(l.abs_error_bound < 1e-10 * l.value.value().max(1e-300));
    }
}
