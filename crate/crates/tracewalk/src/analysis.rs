//! Closed-form analysis of the two-layer walk: the conductance direction
//! and strength of the layer-1 law, edge conductances, the moment
//! generating function of the layer-0 step along that direction, its
//! positive root, the tilted (conditioned) walk, and the regime classifier.

use serde::Serialize;
use thiserror::Error;

use crate::stats::dot;
use crate::walk::{Direction, Layer, Point, StepDistribution};

/// Tolerance below which log(beta) and log(alpha) are considered tied and
/// the walk is flagged as sitting on the ballistic/sub-ballistic boundary.
pub const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("drift projection onto the conductance direction is {projection} <= 0 (recurrent regime)")]
    NotTransient { projection: f64 },
    #[error("given alpha does not solve the MGF equation (|phi - 1| = {residual})")]
    AlphaNotRoot { residual: f64 },
    #[error("positions do not differ by a signed unit vector")]
    NotAnEdgePair,
}

/// Direction and strength of the exponential tilt in the layer-1
/// conductance law: `log_beta * ell` equals the vector of per-axis log
/// step-ratios log(p(e_j)/p(-e_j)).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConductanceDirection {
    pub ell: Vec<f64>,
    pub log_beta: f64,
}

impl ConductanceDirection {
    pub fn beta(&self) -> f64 {
        self.log_beta.exp()
    }

    /// True when every axis has equal forward/backward weight. By
    /// convention the direction is then e1 and the tilt strength is 1.
    pub fn is_balanced(&self) -> bool {
        self.log_beta == 0.0
    }
}

/// Unit vector along the per-axis log step-ratios, plus the ratio-vector
/// norm as log(beta). Requires strictly positive weights.
pub fn conductance_direction(dist1: &StepDistribution) -> ConductanceDirection {
    let d = dist1.dim();
    let w = dist1.weights();
    assert!(
        w.iter().all(|&x| x > 0.0),
        "conductance direction needs strictly positive weights"
    );
    let ratios: Vec<f64> = (0..d).map(|j| (w[2 * j] / w[2 * j + 1]).ln()).collect();
    let norm = dot(&ratios, &ratios).sqrt();
    if norm == 0.0 {
        // balanced: the tilt vanishes and the direction is conventional
        let mut ell = vec![0.0; d];
        ell[0] = 1.0;
        return ConductanceDirection { ell, log_beta: 0.0 };
    }
    ConductanceDirection {
        ell: ratios.iter().map(|r| r / norm).collect(),
        log_beta: norm,
    }
}

/// The layer-1 conductance of the edge {x, y}, evaluated literally as the
/// product of backward weights over the coordinate gaps times
/// beta^((x v y) . ell), where x v y is the coordinatewise maximum.
///
/// For a unit step e this reduces to p(e) * beta^(x . ell); the reduction
/// is checked in tests, the literal form is what ships.
pub fn edge_conductance(
    dist1: &StepDistribution,
    x: &Point,
    y: &Point,
) -> Result<f64, AnalysisError> {
    let d = dist1.dim();
    if x.dim() != d || y.dim() != d {
        return Err(AnalysisError::NotAnEdgePair);
    }
    let l1: i64 = x
        .coords()
        .iter()
        .zip(y.coords())
        .map(|(a, b)| (a - b).abs())
        .sum();
    if l1 != 1 {
        return Err(AnalysisError::NotAnEdgePair);
    }
    let cd = conductance_direction(dist1);
    let w = dist1.weights();
    let mut prod = 1.0;
    for j in 0..d {
        let gap = (y.coords()[j] - x.coords()[j]).abs();
        if gap == 1 {
            prod *= w[2 * j + 1]; // p(-e_j)
        }
    }
    let anchor = x.join_max(y);
    Ok(prod * (cd.log_beta * anchor.dot(&cd.ell)).exp())
}

/// Transition weight of a unit step under the conductance law, in the
/// reduced form p(e) * beta^(x . ell). Identical to `edge_conductance`
/// up to floating error; this is the form for hot loops.
pub fn step_conductance(
    dist1: &StepDistribution,
    cd: &ConductanceDirection,
    x: &Point,
    dir: Direction,
) -> f64 {
    dist1.weight(dir) * (cd.log_beta * x.dot(&cd.ell)).exp()
}

/// phi(t) = sum_e p(e) exp(-t e.ell): the moment generating function of
/// minus the step projection onto ell. phi(0) = 1 exactly.
pub fn mgf(dist0: &StepDistribution, ell: &[f64], t: f64) -> f64 {
    dist0
        .weights()
        .iter()
        .enumerate()
        .map(|(k, &w)| w * (-t * Direction(k as u8).proj(ell)).exp())
        .sum()
}

fn mgf_deriv(dist0: &StepDistribution, ell: &[f64], t: f64) -> f64 {
    dist0
        .weights()
        .iter()
        .enumerate()
        .map(|(k, &w)| {
            let proj = Direction(k as u8).proj(ell);
            -proj * w * (-t * proj).exp()
        })
        .sum()
}

/// Root of the MGF equation: t > 0 with phi(t) = 1 and alpha = exp(t).
/// Both fields are +infinity when the support has no step projecting
/// negatively onto ell (no back-tracking is possible at all).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaRoot {
    pub t: f64,
    pub alpha: f64,
}

impl AlphaRoot {
    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
    }
}

/// Cap on the bracketing abscissa: exp(700) is still finite in f64, and
/// any realistic root lies far below.
const T_CAP: f64 = 700.0;

/// Find the unique strictly positive solution of phi(t) = 1.
///
/// phi is strictly convex with phi(0) = 1 and phi'(0) = -drift.ell < 0,
/// so when some support step projects negatively on ell there is exactly
/// one crossing t > 0: bracket it by doubling, bisect to 1e-13, then take
/// one guarded Newton step.
pub fn solve_alpha(dist0: &StepDistribution, ell: &[f64]) -> Result<AlphaRoot, AnalysisError> {
    let projection = dot(&dist0.drift(), ell);
    if projection <= 0.0 {
        return Err(AnalysisError::NotTransient { projection });
    }
    let has_backstep = dist0
        .weights()
        .iter()
        .enumerate()
        .any(|(k, &w)| w > 0.0 && Direction(k as u8).proj(ell) < 0.0);
    if !has_backstep {
        return Ok(AlphaRoot {
            t: f64::INFINITY,
            alpha: f64::INFINITY,
        });
    }

    let phi = |t: f64| mgf(dist0, ell, t);

    // bracket: lo has phi < 1, hi has phi > 1
    let mut lo;
    let mut hi = 1.0;
    if phi(hi) > 1.0 {
        lo = hi / 2.0;
        let mut tries = 0;
        while phi(lo) >= 1.0 {
            hi = lo;
            lo /= 2.0;
            tries += 1;
            if tries > 200 {
                // root indistinguishable from 0 at f64 precision
                return Ok(AlphaRoot { t: lo, alpha: lo.exp() });
            }
        }
    } else {
        lo = hi;
        loop {
            hi *= 2.0;
            if hi > T_CAP {
                // no crossing below the overflow guard: treat as
                // back-tracking too improbable to resolve
                return Ok(AlphaRoot {
                    t: f64::INFINITY,
                    alpha: f64::INFINITY,
                });
            }
            if phi(hi) > 1.0 {
                break;
            }
            lo = hi;
        }
    }

    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) > 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut t = 0.5 * (lo + hi);
    // one guarded Newton polish
    let dphi = mgf_deriv(dist0, ell, t);
    if dphi != 0.0 {
        let polished = t - (phi(t) - 1.0) / dphi;
        if polished > 0.0 && polished.is_finite() && (polished - t).abs() <= (hi - lo) {
            t = polished;
        }
    }
    Ok(AlphaRoot { t, alpha: t.exp() })
}

/// Reweight the layer-0 steps by alpha^(-e.ell): the harmonic tilt that
/// conditions the walk to drift against ell. Returns the tilted
/// distribution and its drift.
pub fn doob_transform(
    dist0: &StepDistribution,
    ell: &[f64],
    alpha: f64,
) -> Result<(StepDistribution, Vec<f64>), AnalysisError> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(AnalysisError::AlphaNotRoot {
            residual: f64::INFINITY,
        });
    }
    let t = alpha.ln();
    let residual = (mgf(dist0, ell, t) - 1.0).abs();
    if residual > 1e-9 {
        return Err(AnalysisError::AlphaNotRoot { residual });
    }
    let mut weights: Vec<f64> = dist0
        .weights()
        .iter()
        .enumerate()
        .map(|(k, &w)| w * (-t * Direction(k as u8).proj(ell)).exp())
        .collect();
    let sum: f64 = weights.iter().sum(); // == 1 up to the root residual
    for w in &mut weights {
        *w /= sum;
    }
    let tilted = StepDistribution::from_normalized(weights, Layer::Zero);
    let drift = tilted.drift();
    Ok((tilted, drift))
}

/// The walk's qualitative transport regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Recurrent,
    Ballistic,
    SubBallistic,
    Boundary,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Regime::Recurrent => "recurrent",
            Regime::Ballistic => "ballistic",
            Regime::SubBallistic => "sub-ballistic",
            Regime::Boundary => "boundary",
        };
        f.write_str(s)
    }
}

/// All closed-form parameters of a (layer-0, layer-1) pair in one place.
/// Infinite values serialize as the string "inf"; fields that do not exist
/// in the recurrent regime serialize as null.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyticProfile {
    pub d: usize,
    pub ell: Vec<f64>,
    pub log_beta: f64,
    pub beta: f64,
    pub balanced: bool,
    pub delta0: Vec<f64>,
    pub delta1: Vec<f64>,
    /// drift(layer 0) . ell: positive means transient
    pub drift_projection: f64,
    pub transient: bool,
    pub regime: Regime,
    #[serde(serialize_with = "ser_maybe_inf")]
    pub t_root: Option<f64>,
    #[serde(serialize_with = "ser_maybe_inf")]
    pub alpha: Option<f64>,
    #[serde(serialize_with = "ser_maybe_inf")]
    pub kappa: Option<f64>,
    pub doob_weights: Option<Vec<f64>>,
    pub doob_drift: Option<Vec<f64>>,
}

pub(crate) fn ser_maybe_inf<S: serde::Serializer>(
    v: &Option<f64>,
    s: S,
) -> Result<S::Ok, S::Error> {
    match v {
        None => s.serialize_none(),
        Some(x) if x.is_infinite() => s.serialize_str("inf"),
        Some(x) => s.serialize_f64(*x),
    }
}

/// Classify a parameter pair: transient iff the layer-0 drift projects
/// positively onto the conductance direction; within the transient phase,
/// ballistic iff beta < alpha, sub-ballistic iff beta > alpha, boundary
/// when the logs tie within 1e-9. Balanced layer-1 (beta = 1) is
/// classified ballistic with kappa = +infinity: the trapping mechanism
/// vanishes when the tilt does.
pub fn classify(dist0: &StepDistribution, dist1: &StepDistribution) -> AnalyticProfile {
    let cd = conductance_direction(dist1);
    let delta0 = dist0.drift();
    let delta1 = dist1.drift();
    let drift_projection = dot(&delta0, &cd.ell);
    let transient = drift_projection > 0.0;
    let d = dist0.dim();

    if !transient {
        return AnalyticProfile {
            d,
            ell: cd.ell,
            log_beta: cd.log_beta,
            beta: cd.log_beta.exp(),
            balanced: cd.log_beta == 0.0,
            delta0,
            delta1,
            drift_projection,
            transient,
            regime: Regime::Recurrent,
            t_root: None,
            alpha: None,
            kappa: None,
            doob_weights: None,
            doob_drift: None,
        };
    }

    let root = solve_alpha(dist0, &cd.ell).expect("projection checked positive");
    let balanced = cd.log_beta == 0.0;
    let (regime, kappa) = if balanced {
        (Regime::Ballistic, f64::INFINITY)
    } else if !root.is_finite() {
        (Regime::Ballistic, f64::INFINITY)
    } else if (cd.log_beta - root.t).abs() < BOUNDARY_TOL {
        (Regime::Boundary, root.t / cd.log_beta)
    } else if cd.log_beta < root.t {
        (Regime::Ballistic, root.t / cd.log_beta)
    } else {
        (Regime::SubBallistic, root.t / cd.log_beta)
    };

    let (doob_weights, doob_drift) = if root.is_finite() {
        let (tilted, drift) =
            doob_transform(dist0, &cd.ell, root.alpha).expect("root solves the MGF equation");
        (Some(tilted.weights().to_vec()), Some(drift))
    } else {
        (None, None)
    };

    AnalyticProfile {
        d,
        ell: cd.ell,
        log_beta: cd.log_beta,
        beta: cd.log_beta.exp(),
        balanced,
        delta0,
        delta1,
        drift_projection,
        transient,
        regime,
        t_root: Some(root.t),
        alpha: Some(root.alpha),
        kappa: Some(kappa),
        doob_weights,
        doob_drift,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk::RandomSeed;
    use rand::Rng;

    fn dist(weights: &[f64], layer: Layer) -> StepDistribution {
        StepDistribution::validate(weights, layer).unwrap()
    }

    #[test]
    fn direction_single_axis_tilt() {
        let cd = conductance_direction(&dist(&[0.4, 0.2, 0.2, 0.2], Layer::One));
        assert_eq!(cd.ell, vec![1.0, 0.0]);
        assert!((cd.beta() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn direction_balanced_convention() {
        let cd = conductance_direction(&dist(&[0.25, 0.25, 0.25, 0.25], Layer::One));
        assert_eq!(cd.log_beta, 0.0);
        assert_eq!(cd.ell, vec![1.0, 0.0]);
        assert!(cd.is_balanced());
    }

    #[test]
    fn direction_general_two_axis_case() {
        let cd = conductance_direction(&dist(&[0.09, 0.01, 0.40, 0.50], Layer::One));
        let r1 = (0.09f64 / 0.01).ln();
        let r2 = (0.40f64 / 0.50).ln();
        let norm = (r1 * r1 + r2 * r2).sqrt();
        assert!((cd.log_beta - norm).abs() < 1e-12);
        assert!((cd.ell[0] - r1 / norm).abs() < 1e-12);
        assert!((cd.ell[1] - r2 / norm).abs() < 1e-12);
        // the advertised decimals
        assert!((cd.log_beta - 2.20853).abs() < 1e-5);
        assert!((cd.ell[0] - 0.99488).abs() < 1e-5);
        assert!((cd.ell[1] + 0.10103).abs() < 1e-5);
    }

    #[test]
    fn direction_reconstructs_log_ratios() {
        // log_beta * ell must reproduce the per-axis log ratios to 1e-12,
        // across randomized strictly-positive distributions
        let mut rng = RandomSeed::new(5150, 0).rng();
        for _ in 0..200 {
            let d = 1 + (rng.next_u32() % 3) as usize;
            let mut w: Vec<f64> = (0..2 * d)
                .map(|_| 0.05 + crate::walk::uniform_f64(&mut rng))
                .collect();
            let sum: f64 = w.iter().sum();
            for x in &mut w {
                *x /= sum;
            }
            let dd = dist(&w, Layer::One);
            let cd = conductance_direction(&dd);
            for j in 0..d {
                let expect = (dd.weights()[2 * j] / dd.weights()[2 * j + 1]).ln();
                assert!((cd.log_beta * cd.ell[j] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conductance_display_examples() {
        let d1 = dist(&[0.4, 0.2, 0.2, 0.2], Layer::One);
        let c = edge_conductance(&d1, &Point::from_coords(&[0, 0]), &Point::from_coords(&[1, 0]))
            .unwrap();
        assert!((c - 0.4).abs() < 1e-12); // p(e1) * beta^0 with anchor (1,0), backward weight 0.2 * 2
        let c2 = edge_conductance(&d1, &Point::from_coords(&[1, 0]), &Point::from_coords(&[1, 1]))
            .unwrap();
        assert!((c2 - 0.4).abs() < 1e-12); // p(e2) * beta^1 = 0.2 * 2
        assert_eq!(
            edge_conductance(&d1, &Point::from_coords(&[0, 0]), &Point::from_coords(&[2, 0]))
                .unwrap_err(),
            AnalysisError::NotAnEdgePair
        );
    }

    #[test]
    fn conductance_reduction_identity() {
        // literal display == p(e) * beta^(x.ell) for random x and e
        let mut rng = RandomSeed::new(99, 0).rng();
        for _ in 0..200 {
            let d = 1 + (rng.next_u32() % 3) as usize;
            let mut w: Vec<f64> = (0..2 * d)
                .map(|_| 0.05 + crate::walk::uniform_f64(&mut rng))
                .collect();
            let sum: f64 = w.iter().sum();
            for x in &mut w {
                *x /= sum;
            }
            let dd = dist(&w, Layer::One);
            let cd = conductance_direction(&dd);
            let coords: Vec<i64> = (0..d).map(|_| (rng.next_u32() % 21) as i64 - 10).collect();
            let x = Point::from_coords(&coords);
            let dir = Direction((rng.next_u32() % (2 * d as u32)) as u8);
            let y = x.stepped(dir);
            let lit = edge_conductance(&dd, &x, &y).unwrap();
            let red = step_conductance(&dd, &cd, &x, dir);
            assert!(
                (lit - red).abs() <= 1e-12 * red.max(1.0),
                "literal {lit} vs reduced {red}"
            );
        }
    }

    #[test]
    fn mgf_at_zero_is_one() {
        let d0 = dist(&[0.2, 0.15, 0.5, 0.15], Layer::Zero);
        assert_eq!(mgf(&d0, &[1.0, 0.0], 0.0), 1.0);
    }

    #[test]
    fn mgf_closed_form_values() {
        let d0 = dist(&[0.7, 0.3], Layer::Zero);
        let at_root = mgf(&d0, &[1.0], (7.0f64 / 3.0).ln());
        assert!((at_root - 1.0).abs() < 1e-14);
        let at_one = mgf(&d0, &[1.0], 1.0);
        let expect = 0.7 * (-1.0f64).exp() + 0.3 * 1.0f64.exp();
        assert!((at_one - expect).abs() < 1e-15);
        assert!((at_one - 1.07300).abs() < 2e-5);
    }

    #[test]
    fn mgf_is_convex_on_a_grid() {
        let d0 = dist(&[0.5, 0.2, 0.15, 0.15], Layer::Zero);
        let ell = [0.8, -0.6];
        let h = 0.05;
        for i in 0..200 {
            let t = -2.0 + i as f64 * h;
            let second = mgf(&d0, &ell, t + h) - 2.0 * mgf(&d0, &ell, t) + mgf(&d0, &ell, t - h);
            assert!(second > 0.0, "second difference at t={t} not positive");
        }
    }

    #[test]
    fn alpha_quadratic_closed_form() {
        let d0 = dist(&[0.7, 0.3], Layer::Zero);
        let root = solve_alpha(&d0, &[1.0]).unwrap();
        assert!((root.alpha - 7.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_not_transient_error() {
        let d0 = dist(&[0.7, 0.3], Layer::Zero);
        let err = solve_alpha(&d0, &[-1.0]).unwrap_err();
        assert!(matches!(err, AnalysisError::NotTransient { .. }));
    }

    #[test]
    fn alpha_forward_only_sentinel() {
        let d0 = dist(&[1.0, 0.0], Layer::Zero);
        let root = solve_alpha(&d0, &[1.0]).unwrap();
        assert!(root.t.is_infinite() && root.alpha.is_infinite());
    }

    #[test]
    fn alpha_root_residual_and_uniqueness() {
        let mut rng = RandomSeed::new(4242, 0).rng();
        let mut tested = 0;
        while tested < 100 {
            let d = 1 + (rng.next_u32() % 3) as usize;
            let mut w: Vec<f64> = (0..2 * d)
                .map(|_| 0.02 + crate::walk::uniform_f64(&mut rng))
                .collect();
            w[0] += 1.0; // push drift forward
            let sum: f64 = w.iter().sum();
            for x in &mut w {
                *x /= sum;
            }
            let d0 = dist(&w, Layer::Zero);
            let d1w: Vec<f64> = (0..2 * d)
                .map(|_| 0.05 + crate::walk::uniform_f64(&mut rng))
                .collect();
            let s1: f64 = d1w.iter().sum();
            let d1 = dist(&d1w.iter().map(|x| x / s1).collect::<Vec<_>>(), Layer::One);
            let cd = conductance_direction(&d1);
            let Ok(root) = solve_alpha(&d0, &cd.ell) else {
                continue; // recurrent draw, not part of this property
            };
            if !root.is_finite() {
                continue;
            }
            assert!((mgf(&d0, &cd.ell, root.t) - 1.0).abs() < 1e-10);
            assert!(mgf(&d0, &cd.ell, root.t / 2.0) < 1.0);
            tested += 1;
        }
    }

    #[test]
    fn doob_d1_hand_computation() {
        let d0 = dist(&[0.7, 0.3], Layer::Zero);
        let (tilted, drift) = doob_transform(&d0, &[1.0], 7.0 / 3.0).unwrap();
        assert!((tilted.weights()[0] - 0.3).abs() < 1e-12);
        assert!((tilted.weights()[1] - 0.7).abs() < 1e-12);
        assert!((drift[0] + 0.4).abs() < 1e-12);
    }

    #[test]
    fn doob_family_hand_computation() {
        let d0 = dist(&[4.0 / 7.0, 1.0 / 7.0, 1.0 / 7.0, 1.0 / 7.0], Layer::Zero);
        let root = solve_alpha(&d0, &[1.0, 0.0]).unwrap();
        assert!((root.alpha - 4.0).abs() < 1e-10);
        let (tilted, drift) = doob_transform(&d0, &[1.0, 0.0], root.alpha).unwrap();
        let expect = [1.0 / 7.0, 4.0 / 7.0, 1.0 / 7.0, 1.0 / 7.0];
        for (got, want) in tilted.weights().iter().zip(expect) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((drift[0] + 3.0 / 7.0).abs() < 1e-12);
        assert!(drift[1].abs() < 1e-12);
    }

    #[test]
    fn doob_near_balanced_limit() {
        // p = (0.5 + eps, 0.5 - eps): the tilted walk is the exact mirror,
        // so its drift is -drift to machine precision
        let eps = 1e-3;
        let d0 = dist(&[0.5 + eps, 0.5 - eps], Layer::Zero);
        let root = solve_alpha(&d0, &[1.0]).unwrap();
        let (_, drift) = doob_transform(&d0, &[1.0], root.alpha).unwrap();
        assert!((drift[0] + 2.0 * eps).abs() < 1e-5);
    }

    #[test]
    fn doob_rejects_non_root() {
        let d0 = dist(&[0.7, 0.3], Layer::Zero);
        let err = doob_transform(&d0, &[1.0], 2.0).unwrap_err();
        assert!(matches!(err, AnalysisError::AlphaNotRoot { .. }));
    }

    fn family(d: usize, k: usize, gamma: f64, layer: Layer) -> StepDistribution {
        let denom = 2.0 * d as f64 + k as f64 * (gamma - 1.0);
        let mut w = vec![1.0 / denom; 2 * d];
        for j in 0..k {
            w[2 * j] = gamma / denom;
        }
        dist(&w, layer)
    }

    #[test]
    fn classify_ballistic_family() {
        let p = classify(&family(2, 1, 4.0, Layer::Zero), &family(2, 1, 3.0, Layer::One));
        assert!(p.transient);
        assert_eq!(p.regime, Regime::Ballistic);
        assert!((p.beta - 3.0).abs() < 1e-12);
        assert!((p.alpha.unwrap() - 4.0).abs() < 1e-9);
        assert!((p.kappa.unwrap() - 4.0f64.ln() / 3.0f64.ln()).abs() < 1e-9);
        assert!((p.kappa.unwrap() - 1.26186).abs() < 1e-5);
    }

    #[test]
    fn classify_sub_ballistic_family() {
        let p = classify(&family(2, 1, 2.0, Layer::Zero), &family(2, 1, 5.0, Layer::One));
        assert!(p.transient);
        assert_eq!(p.regime, Regime::SubBallistic);
    }

    #[test]
    fn classify_mean_drifts_disagree_with_conductance_direction() {
        // delta0 . delta1 < 0 yet the drift projects positively on ell:
        // the conductance direction, not the mean drift, decides
        let d0 = dist(&[0.2, 0.15, 0.5, 0.15], Layer::Zero);
        let d1 = dist(&[0.09, 0.01, 0.40, 0.50], Layer::One);
        let p = classify(&d0, &d1);
        let dot01 = dot(&p.delta0, &p.delta1);
        assert!(dot01 < 0.0, "construction should have opposing mean drifts");
        assert!((dot01 + 0.031).abs() < 1e-12);
        assert!(p.drift_projection > 0.0);
        assert!((p.drift_projection - 0.014381075913).abs() < 1e-9);
        assert!(p.transient);
    }

    #[test]
    fn classify_recurrent_when_projection_negative() {
        let d0 = dist(&[0.7, 0.3], Layer::Zero);
        let d1 = dist(&[1.0 / 3.0, 2.0 / 3.0], Layer::One);
        let p = classify(&d0, &d1);
        assert!(!p.transient);
        assert_eq!(p.regime, Regime::Recurrent);
        assert_eq!(p.alpha, None);
        assert_eq!(p.kappa, None);
    }

    #[test]
    fn classify_boundary_tie() {
        let p = classify(&family(2, 1, 4.0, Layer::Zero), &family(2, 1, 4.0, Layer::One));
        assert_eq!(p.regime, Regime::Boundary);
    }

    #[test]
    fn classify_balanced_layer_one() {
        let p = classify(&dist(&[0.7, 0.3], Layer::Zero), &dist(&[0.5, 0.5], Layer::One));
        assert!(p.balanced);
        assert_eq!(p.regime, Regime::Ballistic);
        assert_eq!(p.kappa, Some(f64::INFINITY));
        assert_eq!(p.beta, 1.0);
    }

    #[test]
    fn classify_is_scale_free_in_layer_one_weights() {
        let base = [0.32, 0.08, 0.35, 0.25];
        let d0 = dist(&[0.6, 0.2, 0.1, 0.1], Layer::Zero);
        let a = classify(&d0, &dist(&base, Layer::One));
        let scaled: Vec<f64> = base.iter().map(|w| w * 3.7).collect();
        let sum: f64 = scaled.iter().sum();
        let renorm: Vec<f64> = scaled.iter().map(|w| w / sum).collect();
        let b = classify(&d0, &dist(&renorm, Layer::One));
        assert!((a.log_beta - b.log_beta).abs() < 1e-12);
        for j in 0..2 {
            assert!((a.ell[j] - b.ell[j]).abs() < 1e-12);
        }
        assert_eq!(a.regime, b.regime);
        assert!((a.alpha.unwrap() - b.alpha.unwrap()).abs() < 1e-10);
    }

    #[test]
    fn drift_sign_pattern_matches_direction_sign_pattern() {
        let mut rng = RandomSeed::new(31337, 0).rng();
        for _ in 0..200 {
            let d = 1 + (rng.next_u32() % 3) as usize;
            let mut w: Vec<f64> = (0..2 * d)
                .map(|_| 0.05 + crate::walk::uniform_f64(&mut rng))
                .collect();
            let sum: f64 = w.iter().sum();
            for x in &mut w {
                *x /= sum;
            }
            let d1 = dist(&w, Layer::One);
            let cd = conductance_direction(&d1);
            let delta1 = d1.drift();
            for j in 0..d {
                assert!(
                    delta1[j] * cd.ell[j] > 0.0 || (delta1[j] == 0.0 && cd.ell[j] == 0.0),
                    "axis {j}: drift and direction must share sign"
                );
            }
        }
    }
}
