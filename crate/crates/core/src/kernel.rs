//! Radial kernel profiles, their `eps`-rescaling and the two constants that
//! enter every continuum limit:
//!
//! * surface tension `sigma = ∫ eta(h) |h_1|² dh`
//! * total mass      `beta  = ∫ eta(h) dh`
//!
//! Both reduce to one-dimensional radial integrals,
//! `sigma = (S_{d-1}/d) ∫ eta(r) r^{d+1} dr` and `beta = S_{d-1} ∫ eta(r) r^{d-1} dr`,
//! with `S_{d-1}` the area of the unit sphere.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Radial profile `eta(t)`, `t >= 0`.
#[derive(Debug, Clone, Copy)]
pub enum RadialKernel {
    /// `1` on `[0, 1]`, `0` beyond.
    Indicator,
    /// `exp(-t²)` cut off at `t = 3`.
    TruncatedGaussian,
    /// `(1 - t²)_+`.
    Polynomial,
    /// Arbitrary profile; `support` is its cutoff radius if compact.
    Custom { profile: fn(f64) -> f64, support: Option<f64> },
}

impl RadialKernel {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "indicator" => Ok(Self::Indicator),
            "gaussian" | "truncated_gaussian" => Ok(Self::TruncatedGaussian),
            "polynomial" => Ok(Self::Polynomial),
            other => Err(Error::Configuration(alloc::format!("unknown kernel '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Indicator => "indicator",
            Self::TruncatedGaussian => "truncated_gaussian",
            Self::Polynomial => "polynomial",
            Self::Custom { .. } => "custom",
        }
    }

    pub fn profile(&self, t: f64) -> f64 {
        match self {
            Self::Indicator => {
                if t <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::TruncatedGaussian => {
                if t <= 3.0 {
                    math::exp(-t * t)
                } else {
                    0.0
                }
            }
            Self::Polynomial => {
                if t < 1.0 {
                    1.0 - t * t
                } else {
                    0.0
                }
            }
            Self::Custom { profile, .. } => profile(t),
        }
    }

    /// Radius beyond which the profile vanishes, if any.
    pub fn support_radius(&self) -> Option<f64> {
        match self {
            Self::Indicator | Self::Polynomial => Some(1.0),
            Self::TruncatedGaussian => Some(3.0),
            Self::Custom { support, .. } => *support,
        }
    }
}

/// `eta_eps(z) = eps^{-d} eta(|z| / eps)`.
pub fn eval_scaled(kernel: &RadialKernel, d: usize, eps: f64, z: &[f64]) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::invalid("length scale eps must be positive"));
    }
    let r = math::norm(z);
    Ok(scaled_profile(kernel, d, eps, r))
}

#[inline]
pub(crate) fn scaled_profile(kernel: &RadialKernel, d: usize, eps: f64, r: f64) -> f64 {
    kernel.profile(r / eps) / math::powi(eps, d as i32)
}

const QUAD_TOL: f64 = 1e-13;

/// `∫_0^∞ eta(r) r^p dr`, or a kernel-condition error if it diverges.
fn radial_moment(kernel: &RadialKernel, p: i32) -> Result<f64> {
    let f = |r: f64| kernel.profile(r) * math::powi(r, p);
    if let Some(radius) = kernel.support_radius() {
        return Ok(math::integrate(&f, 0.0, radius, QUAD_TOL));
    }
    // unbounded support: integrate over doubling shells until the shell
    // contributions become negligible
    let mut total = math::integrate(&f, 0.0, 1.0, QUAD_TOL);
    let mut a = 1.0;
    let mut growing = 0;
    let mut last_shell = f64::INFINITY;
    for _ in 0..60 {
        let b = 2.0 * a;
        let shell = math::integrate(&f, a, b, QUAD_TOL);
        total += shell;
        if !total.is_finite() {
            break;
        }
        if shell.abs() <= 1e-14 * total.abs() {
            return Ok(total);
        }
        if shell >= last_shell {
            growing += 1;
            if growing >= 4 {
                break;
            }
        } else {
            growing = 0;
        }
        last_shell = shell;
        a = b;
    }
    Err(Error::KernelCondition(alloc::format!(
        "radial moment of order {p} does not converge"
    )))
}

/// Surface tension `sigma_eta` in dimension `d`.
pub fn surface_tension(kernel: &RadialKernel, d: usize) -> Result<f64> {
    check_dim(d)?;
    let m = radial_moment(kernel, d as i32 + 1)?;
    Ok(math::unit_sphere_area(d) / d as f64 * m)
}

/// Total mass `beta_eta` in dimension `d`.
pub fn total_mass(kernel: &RadialKernel, d: usize) -> Result<f64> {
    check_dim(d)?;
    let m = radial_moment(kernel, d as i32 - 1)?;
    Ok(math::unit_sphere_area(d) * m)
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    Ok(())
}

/// `sigma_eta` and `beta_eta` for one `(kernel, d)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConstants {
    pub dim: usize,
    pub sigma: f64,
    pub beta: f64,
}

impl KernelConstants {
    pub fn compute(kernel: &RadialKernel, d: usize) -> Result<Self> {
        let sigma = surface_tension(kernel, d)?;
        let beta = total_mass(kernel, d)?;
        if !(sigma > 0.0 && sigma.is_finite() && beta > 0.0 && beta.is_finite()) {
            return Err(Error::KernelCondition("kernel constants must be positive and finite".into()));
        }
        Ok(Self { dim: d, sigma, beta })
    }
}

/// Outcome of checking (K1) positivity at 0, (K2) monotonicity and (K3)
/// integrability of the second radial moment.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub positive_at_zero: bool,
    pub non_increasing: bool,
    pub integrable: bool,
    pub failures: Vec<String>,
}

impl ConditionReport {
    pub fn all_pass(&self) -> bool {
        self.positive_at_zero && self.non_increasing && self.integrable
    }
}

/// Samples the profile on `10^4` points of `[0, T]` (1.5 times the support
/// radius, or 10 for unbounded profiles) and checks the moment integral.
pub fn validate_conditions(kernel: &RadialKernel, d: usize) -> ConditionReport {
    let mut failures = Vec::new();
    let eta0 = kernel.profile(0.0);
    let near0 = kernel.profile(1e-9);
    let positive_at_zero = eta0 > 0.0 && (near0 - eta0).abs() <= 1e-6 * eta0.max(1.0);
    if !positive_at_zero {
        failures.push(String::from("K1: eta(0) must be positive and eta continuous at 0"));
    }
    let span = kernel.support_radius().map(|r| r * 1.5).unwrap_or(10.0);
    let samples = 10_000;
    let mut prev = eta0;
    let mut non_increasing = true;
    for i in 1..=samples {
        let t = span * i as f64 / samples as f64;
        let v = kernel.profile(t);
        if v > prev + 1e-15 * prev.abs().max(1.0) {
            non_increasing = false;
            failures.push(alloc::format!("K2: profile increases near t = {t}"));
            break;
        }
        prev = v;
    }
    let integrable = d > 0 && radial_moment(kernel, d as i32 + 1).is_ok();
    if !integrable {
        failures.push(alloc::format!("K3: ∫ eta(r) r^(d+1) dr diverges for d = {d}"));
    }
    ConditionReport { positive_at_zero, non_increasing, integrable, failures }
}

#[cfg(test)]
mod tests {
    use super::*;
    use math::PI;

    #[test]
    fn indicator_scaled_values() {
        let k = RadialKernel::Indicator;
        assert_eq!(eval_scaled(&k, 2, 0.5, &[0.2, 0.0]).unwrap(), 4.0);
        assert_eq!(eval_scaled(&k, 2, 0.5, &[0.6, 0.0]).unwrap(), 0.0);
        assert!(eval_scaled(&k, 2, 0.0, &[0.0, 0.0]).is_err());
        assert!(eval_scaled(&k, 2, -1.0, &[0.0, 0.0]).is_err());
        for kern in [RadialKernel::Indicator, RadialKernel::TruncatedGaussian, RadialKernel::Polynomial] {
            assert!(eval_scaled(&kern, 3, 0.1, &[0.0; 3]).unwrap() > 0.0);
        }
    }

    #[test]
    fn indicator_constants_closed_form() {
        let k = RadialKernel::Indicator;
        assert!((surface_tension(&k, 1).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!((surface_tension(&k, 2).unwrap() - PI / 4.0).abs() < 1e-12);
        assert!((surface_tension(&k, 3).unwrap() - 4.0 * PI / 15.0).abs() < 1e-12);
        assert!((total_mass(&k, 1).unwrap() - 2.0).abs() < 1e-12);
        assert!((total_mass(&k, 2).unwrap() - PI).abs() < 1e-12);
        assert!((total_mass(&k, 3).unwrap() - 4.0 * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn rescaling_identity() {
        let k = RadialKernel::TruncatedGaussian;
        let z = [0.03, -0.02];
        let eps = 0.05;
        let lhs = eval_scaled(&k, 2, eps, &z).unwrap();
        let rhs = eval_scaled(&k, 2, 1.0, &[z[0] / eps, z[1] / eps]).unwrap() / (eps * eps);
        assert!((lhs - rhs).abs() <= 1e-12 * lhs);
    }

    #[test]
    fn conditions() {
        assert!(validate_conditions(&RadialKernel::Indicator, 2).all_pass());
        assert!(validate_conditions(&RadialKernel::TruncatedGaussian, 3).all_pass());
        let increasing = RadialKernel::Custom { profile: |t| t, support: Some(1.0) };
        let r = validate_conditions(&increasing, 2);
        assert!(!r.non_increasing);
        let heavy = RadialKernel::Custom { profile: |t| 1.0 / (1.0 + t), support: None };
        let r = validate_conditions(&heavy, 2);
        assert!(r.non_increasing && !r.integrable);
        assert!(matches!(surface_tension(&heavy, 2), Err(Error::KernelCondition(_))));
    }

    #[test]
    fn unbounded_profile_converges() {
        let g = RadialKernel::Custom { profile: |t| math::exp(-t * t), support: None };
        // ∫ exp(-|h|²) dh over R² = pi
        assert!((total_mass(&g, 2).unwrap() - PI).abs() < 1e-10);
    }
}
