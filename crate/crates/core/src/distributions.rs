//! Service-time laws: exact moments, samplers and Laplace–Stieltjes transforms.
//!
//! Every family has a closed-form mean and raw moments. The transform
//! `E exp(-s X)` is closed-form except for the lognormal and Pareto laws, which
//! go through adaptive quadrature of `exp(-s x) f(x)` on a truncated support
//! with the analytic tail bound `exp(-s T) P(X > T)` added back.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, LogNormal, Pareto};
use serde::{Deserialize, Serialize};
use statrs::function::{erf::erfc, gamma::gamma_ur, gamma::ln_gamma};

use crate::error::{Error, Result};
use crate::quadrature::{self, Tolerance};

/// Largest supported raw-moment order.
pub const MAX_MOMENT: u32 = 4;

/// Truncation point is pushed out until the neglected tail is below this.
const TAIL_TOLERANCE: f64 = 1e-15;

const QUAD_TOLERANCE: Tolerance = Tolerance {
    abs: 1e-13,
    rel: 1e-11,
    max_intervals: 20_000,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Branch {
    pub weight: f64,
    pub rate: f64,
}

/// A nonnegative service-time law with finite, strictly positive mean.
///
/// Values built through the constructors are validated; values deserialized
/// from a config must be passed through [`ServiceDistribution::validate`]
/// (done by `SystemParams::validate`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ServiceDistribution {
    Deterministic { value: f64 },
    Exponential { rate: f64 },
    Erlang { k: u32, rate: f64 },
    HyperExponential { branches: Vec<Branch> },
    /// Atom `a` with probability `p`, atom `b` with probability `1 - p`.
    TwoPoint { a: f64, b: f64, p: f64 },
    Gamma { shape: f64, rate: f64 },
    Lognormal { mu: f64, sigma: f64 },
    Pareto { scale: f64, alpha: f64 },
}

fn positive(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be finite and > 0, got {v}")))
    }
}

fn probability(field: &'static str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must lie in [0, 1], got {v}")))
    }
}

impl ServiceDistribution {
    pub fn deterministic(value: f64) -> Result<Self> {
        Self::Deterministic { value }.validated()
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        Self::Exponential { rate }.validated()
    }

    pub fn erlang(k: u32, rate: f64) -> Result<Self> {
        Self::Erlang { k, rate }.validated()
    }

    pub fn hyper_exponential(branches: Vec<Branch>) -> Result<Self> {
        Self::HyperExponential { branches }.validated()
    }

    pub fn two_point(a: f64, b: f64, p: f64) -> Result<Self> {
        Self::TwoPoint { a, b, p }.validated()
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        Self::Gamma { shape, rate }.validated()
    }

    pub fn lognormal(mu: f64, sigma: f64) -> Result<Self> {
        Self::Lognormal { mu, sigma }.validated()
    }

    pub fn pareto(scale: f64, alpha: f64) -> Result<Self> {
        Self::Pareto { scale, alpha }.validated()
    }

    fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    pub fn family(&self) -> &'static str {
        match self {
            Self::Deterministic { .. } => "deterministic",
            Self::Exponential { .. } => "exponential",
            Self::Erlang { .. } => "erlang",
            Self::HyperExponential { .. } => "hyper_exponential",
            Self::TwoPoint { .. } => "two_point",
            Self::Gamma { .. } => "gamma",
            Self::Lognormal { .. } => "lognormal",
            Self::Pareto { .. } => "pareto",
        }
    }

    /// Checks the family invariants, including a strictly positive mean.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Deterministic { value } => positive("value", value)?,
            Self::Exponential { rate } => positive("rate", rate)?,
            Self::Erlang { k, rate } => {
                if k == 0 {
                    return Err(Error::invalid("k", "must be >= 1"));
                }
                positive("rate", rate)?;
            }
            Self::HyperExponential { ref branches } => {
                if branches.is_empty() {
                    return Err(Error::invalid("branches", "must not be empty"));
                }
                for br in branches {
                    probability("weight", br.weight)?;
                    positive("rate", br.rate)?;
                }
                let total: f64 = branches.iter().map(|b| b.weight).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid(
                        "branches",
                        format!("weights must sum to 1, got {total}"),
                    ));
                }
            }
            Self::TwoPoint { a, b, p } => {
                if !(a.is_finite() && b.is_finite() && a >= 0.0 && b >= a) {
                    return Err(Error::invalid(
                        "a",
                        format!("atoms must satisfy 0 <= a <= b, got a = {a}, b = {b}"),
                    ));
                }
                probability("p", p)?;
                if !(self.mean() > 0.0) {
                    return Err(Error::invalid("b", "two-point law must have positive mean"));
                }
            }
            Self::Gamma { shape, rate } => {
                positive("shape", shape)?;
                positive("rate", rate)?;
            }
            Self::Lognormal { mu, sigma } => {
                if !mu.is_finite() {
                    return Err(Error::invalid("mu", format!("must be finite, got {mu}")));
                }
                positive("sigma", sigma)?;
            }
            Self::Pareto { scale, alpha } => {
                positive("scale", scale)?;
                if !(alpha.is_finite() && alpha > 1.0) {
                    return Err(Error::invalid(
                        "alpha",
                        format!("must be > 1 for a finite mean, got {alpha}"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Deterministic { value } => value,
            Self::Exponential { rate } => 1.0 / rate,
            Self::Erlang { k, rate } => k as f64 / rate,
            Self::HyperExponential { ref branches } => {
                branches.iter().map(|b| b.weight / b.rate).sum()
            }
            Self::TwoPoint { a, b, p } => p * a + (1.0 - p) * b,
            Self::Gamma { shape, rate } => shape / rate,
            Self::Lognormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
            Self::Pareto { scale, alpha } => scale * alpha / (alpha - 1.0),
        }
    }

    /// Raw moment `E X^k` for `1 <= k <= 4`.
    pub fn moment(&self, k: u32) -> Result<f64> {
        if k == 0 || k > MAX_MOMENT {
            return Err(Error::UnsupportedMoment(k));
        }
        let kf = k as f64;
        // shape (shape + 1) ... (shape + k - 1)
        let rising = |shape: f64| (0..k).map(|i| shape + i as f64).product::<f64>();
        let factorial = rising(1.0);
        Ok(match *self {
            Self::Deterministic { value } => value.powi(k as i32),
            Self::Exponential { rate } => factorial / rate.powi(k as i32),
            Self::Erlang { k: stages, rate } => rising(stages as f64) / rate.powi(k as i32),
            Self::HyperExponential { ref branches } => branches
                .iter()
                .map(|b| b.weight * factorial / b.rate.powi(k as i32))
                .sum(),
            Self::TwoPoint { a, b, p } => p * a.powi(k as i32) + (1.0 - p) * b.powi(k as i32),
            Self::Gamma { shape, rate } => rising(shape) / rate.powi(k as i32),
            Self::Lognormal { mu, sigma } => (kf * mu + 0.5 * kf * kf * sigma * sigma).exp(),
            Self::Pareto { scale, alpha } => {
                if alpha <= kf {
                    return Err(Error::MomentDiverges { order: k, alpha });
                }
                alpha * scale.powi(k as i32) / (alpha - kf)
            }
        })
    }

    /// Laplace–Stieltjes transform `E exp(-s X)` for `s >= 0`.
    pub fn laplace(&self, s: f64) -> Result<f64> {
        check_argument(s)?;
        if s == 0.0 {
            return Ok(1.0);
        }
        Ok(match *self {
            Self::Deterministic { value } => (-s * value).exp(),
            Self::Exponential { rate } => rate / (rate + s),
            Self::Erlang { k, rate } => (rate / (rate + s)).powi(k as i32),
            Self::HyperExponential { ref branches } => branches
                .iter()
                .map(|b| b.weight * b.rate / (b.rate + s))
                .sum(),
            Self::TwoPoint { a, b, p } => p * (-s * a).exp() + (1.0 - p) * (-s * b).exp(),
            Self::Gamma { shape, rate } => (rate / (rate + s)).powf(shape),
            Self::Lognormal { .. } | Self::Pareto { .. } => return self.laplace_quadrature(s),
        })
    }

    /// Density-based quadrature route for the transform, available for every
    /// absolutely continuous family. Atomic laws have no density and fail.
    pub fn laplace_quadrature(&self, s: f64) -> Result<f64> {
        check_argument(s)?;
        if s == 0.0 {
            return Ok(1.0);
        }
        if matches!(self, Self::Deterministic { .. } | Self::TwoPoint { .. }) {
            return Err(Error::QuadratureFailure(format!(
                "{} law has no density",
                self.family()
            )));
        }
        let lower = self.support_start();
        let mut upper = lower.max(self.mean());
        let tail = |t: f64| (-s * t).exp() * self.survival(t);
        let mut doublings = 0;
        while tail(upper) > TAIL_TOLERANCE {
            upper *= 2.0;
            doublings += 1;
            if doublings > 1100 || !upper.is_finite() {
                return Err(Error::QuadratureFailure(
                    "could not bound the transform tail".into(),
                ));
            }
        }
        let points = self.breakpoints(lower, upper);
        let body = quadrature::integrate(
            |x| (-s * x).exp() * self.density(x).unwrap_or(0.0),
            &points,
            QUAD_TOLERANCE,
        )?;
        Ok(body + tail(upper))
    }

    fn support_start(&self) -> f64 {
        match *self {
            Self::Pareto { scale, .. } => scale,
            _ => 0.0,
        }
    }

    // Geometric grid so that every scale of the support gets its own panels.
    fn breakpoints(&self, lower: f64, upper: f64) -> Vec<f64> {
        let anchor = match *self {
            Self::Lognormal { mu, .. } => mu.exp(),
            Self::Pareto { scale, .. } => scale,
            _ => self.mean(),
        };
        let mut pts = vec![lower];
        for j in -60..=1100 {
            let x = anchor * 2f64.powi(j);
            if x >= upper {
                break;
            }
            if x > lower {
                pts.push(x);
            }
        }
        pts.push(upper);
        pts
    }

    /// Probability density at `x`, or `None` for laws with atoms.
    pub fn density(&self, x: f64) -> Option<f64> {
        if x < 0.0 {
            return Some(0.0);
        }
        Some(match *self {
            Self::Deterministic { .. } | Self::TwoPoint { .. } => return None,
            Self::Exponential { rate } => rate * (-rate * x).exp(),
            Self::Erlang { k, rate } => gamma_density(k as f64, rate, x),
            Self::HyperExponential { ref branches } => branches
                .iter()
                .map(|b| b.weight * b.rate * (-b.rate * x).exp())
                .sum(),
            Self::Gamma { shape, rate } => gamma_density(shape, rate, x),
            Self::Lognormal { mu, sigma } => {
                if x == 0.0 {
                    return Some(0.0);
                }
                let z = (x.ln() - mu) / sigma;
                (-0.5 * z * z).exp() / (x * sigma * (2.0 * std::f64::consts::PI).sqrt())
            }
            Self::Pareto { scale, alpha } => {
                if x < scale {
                    0.0
                } else {
                    alpha * scale.powf(alpha) / x.powf(alpha + 1.0)
                }
            }
        })
    }

    /// `P(X > x)`.
    pub fn survival(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 1.0;
        }
        match *self {
            Self::Deterministic { value } => f64::from(u8::from(value > x)),
            Self::Exponential { rate } => (-rate * x).exp(),
            Self::Erlang { k, rate } => gamma_ur(k as f64, rate * x),
            Self::HyperExponential { ref branches } => branches
                .iter()
                .map(|b| b.weight * (-b.rate * x).exp())
                .sum(),
            Self::TwoPoint { a, b, p } => {
                p * f64::from(u8::from(a > x)) + (1.0 - p) * f64::from(u8::from(b > x))
            }
            Self::Gamma { shape, rate } => {
                if x == 0.0 {
                    1.0
                } else {
                    gamma_ur(shape, rate * x)
                }
            }
            Self::Lognormal { mu, sigma } => {
                if x == 0.0 {
                    1.0
                } else {
                    0.5 * erfc((x.ln() - mu) / (sigma * std::f64::consts::SQRT_2))
                }
            }
            Self::Pareto { scale, alpha } => {
                if x < scale {
                    1.0
                } else {
                    (scale / x).powf(alpha)
                }
            }
        }
    }

    /// True when the law is a single atom.
    pub fn is_degenerate(&self) -> bool {
        match *self {
            Self::Deterministic { .. } => true,
            Self::TwoPoint { a, b, p } => a == b || p == 0.0 || p == 1.0,
            _ => false,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Deterministic { value } => value,
            Self::Exponential { rate } => exp1(rng) / rate,
            Self::Erlang { k, rate } => {
                if k <= 16 {
                    (0..k).map(|_| exp1(rng)).sum::<f64>() / rate
                } else {
                    Gamma::new(k as f64, 1.0 / rate)
                        .expect("validated parameters")
                        .sample(rng)
                }
            }
            Self::HyperExponential { ref branches } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let last = branches.len() - 1;
                for (i, b) in branches.iter().enumerate() {
                    acc += b.weight;
                    if u < acc || i == last {
                        return exp1(rng) / b.rate;
                    }
                }
                unreachable!("branches is non-empty")
            }
            Self::TwoPoint { a, b, p } => {
                if rng.random::<f64>() < p {
                    a
                } else {
                    b
                }
            }
            Self::Gamma { shape, rate } => Gamma::new(shape, 1.0 / rate)
                .expect("validated parameters")
                .sample(rng),
            Self::Lognormal { mu, sigma } => LogNormal::new(mu, sigma)
                .expect("validated parameters")
                .sample(rng),
            Self::Pareto { scale, alpha } => Pareto::new(scale, alpha)
                .expect("validated parameters")
                .sample(rng),
        }
    }
}

fn exp1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}

fn gamma_density(shape: f64, rate: f64, x: f64) -> f64 {
    if x == 0.0 {
        return if shape == 1.0 {
            rate
        } else if shape > 1.0 {
            0.0
        } else {
            f64::INFINITY
        };
    }
    ((shape - 1.0) * x.ln() - rate * x + shape * rate.ln() - ln_gamma(shape)).exp()
}

fn check_argument(s: f64) -> Result<()> {
    if s.is_finite() && s >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("s", format!("transform argument must be finite and >= 0, got {s}")))
    }
}

/// Target first and second raw moments for a two-point law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentMatchSpec {
    target_mean: f64,
    target_second_moment: f64,
}

impl MomentMatchSpec {
    pub fn new(target_mean: f64, target_second_moment: f64) -> Result<Self> {
        positive("target_mean", target_mean)?;
        if !target_second_moment.is_finite() || target_second_moment < target_mean * target_mean {
            return Err(Error::Infeasible {
                mean: target_mean,
                second: target_second_moment,
            });
        }
        Ok(Self {
            target_mean,
            target_second_moment,
        })
    }

    pub fn target_mean(&self) -> f64 {
        self.target_mean
    }

    pub fn target_second_moment(&self) -> f64 {
        self.target_second_moment
    }
}

/// Two-point law with atom at zero reproducing the targeted mean and second
/// moment; zero variance collapses to a deterministic law.
pub fn match_two_point(spec: MomentMatchSpec) -> Result<ServiceDistribution> {
    let m1 = spec.target_mean;
    let m2 = spec.target_second_moment;
    if m2 == m1 * m1 {
        return ServiceDistribution::deterministic(m1);
    }
    // With a = 0: (1 - p) b = m1 and (1 - p) b^2 = m2.
    let b = m2 / m1;
    let p = 1.0 - m1 / b;
    ServiceDistribution::two_point(0.0, b, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn means() {
        assert_eq!(ServiceDistribution::exponential(2.0).unwrap().mean(), 0.5);
        assert_eq!(ServiceDistribution::two_point(0.0, 2.0, 0.5).unwrap().mean(), 1.0);
        assert_eq!(ServiceDistribution::deterministic(0.5).unwrap().mean(), 0.5);
        assert!(close(ServiceDistribution::pareto(1.0, 1.5).unwrap().mean(), 3.0, 1e-15));
        assert!(close(
            ServiceDistribution::lognormal(0.0, 1.0).unwrap().mean(),
            0.5f64.exp(),
            1e-15
        ));
    }

    #[test]
    fn moments() {
        let e = ServiceDistribution::exponential(1.0).unwrap();
        assert_eq!(e.moment(2).unwrap(), 2.0);
        assert_eq!(e.moment(4).unwrap(), 24.0);
        let tp = ServiceDistribution::two_point(0.0, 2.0, 0.5).unwrap();
        assert_eq!(tp.moment(2).unwrap(), 2.0);
        let erl = ServiceDistribution::erlang(3, 2.0).unwrap();
        assert!(close(erl.moment(2).unwrap(), 12.0 / 4.0, 1e-15));
        assert!(matches!(
            ServiceDistribution::pareto(1.0, 1.5).unwrap().moment(2),
            Err(Error::MomentDiverges { order: 2, .. })
        ));
        assert!(matches!(e.moment(5), Err(Error::UnsupportedMoment(5))));
        assert!(matches!(e.moment(0), Err(Error::UnsupportedMoment(0))));
    }

    #[test]
    fn closed_form_transforms() {
        let e = ServiceDistribution::exponential(2.0).unwrap();
        assert!(close(e.laplace(1.0).unwrap(), 2.0 / 3.0, 1e-15));
        let tp = ServiceDistribution::two_point(0.0, 2.0, 0.5).unwrap();
        assert!(close(tp.laplace(1.0).unwrap(), 0.5 + 0.5 * (-2.0f64).exp(), 1e-15));
        assert!((tp.laplace(1.0).unwrap() - 0.567668).abs() < 1e-6);
        let all = [
            ServiceDistribution::deterministic(0.5).unwrap(),
            e.clone(),
            tp,
            ServiceDistribution::lognormal(0.0, 1.0).unwrap(),
            ServiceDistribution::pareto(1.0, 1.5).unwrap(),
        ];
        for d in &all {
            assert_eq!(d.laplace(0.0).unwrap(), 1.0);
        }
        assert!(e.laplace(-1.0).is_err());
        assert!(e.laplace(f64::NAN).is_err());
    }

    #[test]
    fn quadrature_refuses_atoms() {
        let d = ServiceDistribution::deterministic(1.0).unwrap();
        assert!(matches!(d.laplace_quadrature(1.0), Err(Error::QuadratureFailure(_))));
    }

    #[test]
    fn heavy_tail_transform_is_accurate() {
        // Pareto(1, 2): E e^{-X} = 2 ∫_1^∞ e^{-x} x^{-3} dx = 2 E_3(1).
        // E_3(1) = 0.1096919671977602 (exponential integral, n = 3).
        let p = ServiceDistribution::pareto(1.0, 2.0).unwrap();
        assert!(close(p.laplace(1.0).unwrap(), 2.0 * 0.109_691_967_197_760_2, 1e-10));
    }

    #[test]
    fn constructors_reject_bad_params() {
        assert!(ServiceDistribution::deterministic(0.0).is_err());
        assert!(ServiceDistribution::two_point(0.0, 0.0, 0.5).is_err());
        assert!(ServiceDistribution::two_point(0.0, 1.0, 1.0).is_err());
        assert!(ServiceDistribution::two_point(2.0, 1.0, 0.5).is_err());
        assert!(ServiceDistribution::exponential(0.0).is_err());
        assert!(ServiceDistribution::erlang(0, 1.0).is_err());
        assert!(ServiceDistribution::pareto(1.0, 1.0).is_err());
        assert!(ServiceDistribution::lognormal(0.0, 0.0).is_err());
        assert!(ServiceDistribution::gamma(-1.0, 1.0).is_err());
        assert!(ServiceDistribution::hyper_exponential(vec![Branch {
            weight: 0.5,
            rate: 1.0
        }])
        .is_err());
        assert!(ServiceDistribution::hyper_exponential(vec![]).is_err());
    }

    #[test]
    fn two_point_matching() {
        let d = match_two_point(MomentMatchSpec::new(1.0, 2.0).unwrap()).unwrap();
        assert_eq!(d, ServiceDistribution::TwoPoint { a: 0.0, b: 2.0, p: 0.5 });
        let d = match_two_point(MomentMatchSpec::new(1.0, 1.0).unwrap()).unwrap();
        assert_eq!(d, ServiceDistribution::Deterministic { value: 1.0 });
        let d = match_two_point(MomentMatchSpec::new(0.5, 0.5).unwrap()).unwrap();
        assert_eq!(d, ServiceDistribution::TwoPoint { a: 0.0, b: 1.0, p: 0.5 });
        assert!(matches!(
            MomentMatchSpec::new(1.0, 0.5),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn sampler_is_deterministic_under_seed() {
        let d = ServiceDistribution::lognormal(0.2, 0.7).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..100).map(|_| d.sample(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(3), draw(3));
        assert_ne!(draw(3), draw(4));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(ServiceDistribution::deterministic(0.5).unwrap().sample(&mut rng), 0.5);
    }

    #[test]
    fn exponential_sample_mean() {
        let d = ServiceDistribution::exponential(2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let mean = (0..n).map(|_| d.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 3.0 * 0.5 / 1e3, "mean {mean}");
    }

    #[test]
    fn two_point_zero_fraction() {
        let d = ServiceDistribution::two_point(0.0, 2.0, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 1_000_000;
        let zeros = (0..n).filter(|_| d.sample(&mut rng) == 0.0).count();
        assert!((zeros as f64 / n as f64 - 0.5).abs() < 0.002);
    }

    #[test]
    fn config_shape() {
        let d: ServiceDistribution =
            serde_json::from_str(r#"{"family":"exponential","rate":2.0}"#).unwrap();
        assert_eq!(d, ServiceDistribution::Exponential { rate: 2.0 });
        let err = serde_json::from_str::<ServiceDistribution>(
            r#"{"family":"exponential","rate":2.0,"mean":3}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("mean"), "{err}");
        let h: ServiceDistribution = serde_json::from_str(
            r#"{"family":"hyper_exponential","branches":[{"weight":0.3,"rate":1},{"weight":0.7,"rate":5}]}"#,
        )
        .unwrap();
        h.validate().unwrap();
    }
}
