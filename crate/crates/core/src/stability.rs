//! Local analysis at the origin and the study of the zeros of `g_{β,h}`.

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{beta_c, vector_field_planar, ModelParams, PlanarState, BETA_TC, H_TC};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilityError {
    #[error("normal form is not tricritical: degree-{degree} coefficient is {value:e}")]
    NotTricritical { degree: usize, value: f64 },
    #[error("no tangency for h = {h}: {reason}")]
    NoTangency { h: f64, reason: String },
}

/// Bracketed bisection to `tol` followed by a few Newton steps, for a
/// function with `f(lo)` and `f(hi)` of opposite sign.
pub fn bisect<F, D>(f: F, df: D, mut lo: f64, mut hi: f64, tol: f64) -> Option<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if (flo < 0.0) == (fhi < 0.0) {
        return None;
    }
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..3 {
        let d = df(x);
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let next = x - f(x) / d;
        if !(next >= lo && next <= hi) {
            break;
        }
        x = next;
    }
    Some(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Stable,
    Critical,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralInfo {
    pub k_plus: Complex64,
    pub k_minus: Complex64,
    pub beta_c: f64,
    pub regime: Regime,
}

impl SpectralInfo {
    pub fn trace(&self) -> f64 {
        (self.k_plus + self.k_minus).re
    }

    pub fn det(&self) -> f64 {
        (self.k_plus * self.k_minus).re
    }
}

/// Real parts within this distance of zero count as critical.
pub const CRITICAL_TOL: f64 = 1e-8;

/// Closed-form eigenvalues of the linearization at the origin.
pub fn eigenvalues(p: &ModelParams) -> SpectralInfo {
    let a = p.beta / p.h.cosh().powi(2) - 1.5;
    let root = Complex64::new(a * a - 2.0, 0.0).sqrt();
    let k_plus = a + root;
    let k_minus = a - root;
    let re = k_plus.re.max(k_minus.re);
    let regime = if re.abs() <= CRITICAL_TOL {
        Regime::Critical
    } else if re < 0.0 {
        Regime::Stable
    } else {
        Regime::Unstable
    };
    SpectralInfo {
        k_plus,
        k_minus,
        beta_c: beta_c(p.h),
        regime,
    }
}

/// Jacobian of the planar field at `s` by central differences.
pub fn numeric_jacobian(p: &ModelParams, s: &PlanarState) -> Matrix2<f64> {
    let step = 1e-6;
    let mut jac = Matrix2::zeros();
    for col in 0..2 {
        let mut plus = s.to_array();
        let mut minus = s.to_array();
        plus[col] += step;
        minus[col] -= step;
        let fp = vector_field_planar(&PlanarState::from_array(plus), p).to_array();
        let fm = vector_field_planar(&PlanarState::from_array(minus), p).to_array();
        for row in 0..2 {
            jac[(row, col)] = (fp[row] - fm[row]) / (2.0 * step);
        }
    }
    jac
}

/// Eigenvalues of the finite-difference Jacobian at the origin, sorted by
/// decreasing imaginary part.
pub fn numeric_eigenvalues(p: &ModelParams) -> [Complex64; 2] {
    let ev = numeric_jacobian(p, &PlanarState::default()).complex_eigenvalues();
    let mut out = [ev[0], ev[1]];
    out.sort_by(|a, b| b.im.total_cmp(&a.im).then(b.re.total_cmp(&a.re)));
    out
}

/// First Lyapunov number on the Hopf curve,
/// `ℓ₁(h) = β_c(h)[cosh 2h − 2] / (4 cosh⁴ 2h)`.
pub fn first_lyapunov(h: f64) -> f64 {
    let c2 = (2.0 * h).cosh();
    beta_c(h) * (c2 - 2.0) / (4.0 * c2.powi(4))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HopfKind {
    Supercritical,
    Subcritical,
    /// `ℓ₁ = 0`; decided by the second Lyapunov number.
    Degenerate,
}

pub fn hopf_kind(h: f64) -> HopfKind {
    let l1 = first_lyapunov(h);
    if l1.abs() < 1e-14 {
        HopfKind::Degenerate
    } else if l1 < 0.0 {
        HopfKind::Supercritical
    } else {
        HopfKind::Subcritical
    }
}

/// `n`-th derivative of `tanh` at `x`, through the polynomial `P_n(T)` with
/// `tanh⁽ⁿ⁾ = P_n(tanh x)`, `P_{n+1} = P_n'(T)(1 − T²)`.
pub fn tanh_derivative(n: usize, x: f64) -> f64 {
    // coefficients of P in powers of T
    let mut poly = vec![0.0, 1.0];
    for _ in 0..n {
        let deriv: Vec<f64> = poly
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| k as f64 * c)
            .collect();
        let mut next = vec![0.0; deriv.len() + 2];
        for (k, c) in deriv.iter().enumerate() {
            next[k] += c;
            next[k + 2] -= c;
        }
        poly = next;
    }
    let t = x.tanh();
    poly.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

/// Taylor coefficients `[g₀, g₁, …, g_order]` of `g_{β,h}` at `λ = 0`, from
/// the exact derivatives of `tanh(λ ± h)`.
pub fn g_taylor_coefficients(p: &ModelParams, order: usize) -> Vec<f64> {
    let mut fact = 1.0;
    (0..=order)
        .map(|n| {
            if n > 0 {
                fact *= n as f64;
            }
            let sum = tanh_derivative(n, p.h) + tanh_derivative(n, -p.h);
            let linear = if n == 1 { 3.0 } else { 0.0 };
            linear - p.beta * sum / fact
        })
        .collect()
}

/// Same coefficients by trapezoidal quadrature of the Cauchy integral on a
/// circle of radius `radius` (must stay below the distance to the nearest
/// pole of `tanh(λ ± h)`, `√(h² + π²/4)`).
pub fn g_taylor_coefficients_contour(
    p: &ModelParams,
    order: usize,
    radius: f64,
    nodes: usize,
) -> Vec<f64> {
    let hc = Complex64::new(p.h, 0.0);
    let g = |z: Complex64| 3.0 * z - p.beta * ((z + hc).tanh() + (z - hc).tanh());
    let samples: Vec<(Complex64, Complex64)> = (0..nodes)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / nodes as f64;
            let z = Complex64::from_polar(radius, theta);
            (z, g(z))
        })
        .collect();
    (0..=order)
        .map(|n| {
            let s: Complex64 = samples.iter().map(|(z, gz)| gz / z.powu(n as u32)).sum();
            (s / nodes as f64).re
        })
        .collect()
}

/// Intermediate quantities of the second Lyapunov number computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondLyapunov {
    /// Taylor coefficients of the `λ`-equation `λ̇ = √2 x − g(λ)` in `λ`,
    /// degrees 0 through 5 (the sign-flipped coefficients of `g`).
    pub normal_form: Vec<f64>,
    /// Degree-5 coefficient, `−4/15` at the tricritical point.
    pub quintic: f64,
    /// `H₃₂ = E(q, q, q, q̄, q̄)`.
    pub h32: [Complex64; 2],
    pub ell2: f64,
}

/// Tolerance on the coefficients that must vanish at the tricritical point.
pub const TRICRITICAL_TOL: f64 = 1e-9;

/// Second Lyapunov number at `(h_tc, β_tc)`, via the quintic multilinear
/// form of the normal form and the critical eigenvector
/// `p = q = (1/√2, −i/√2)` of `A = ((0, −√2), (√2, 0))`.
pub fn second_lyapunov_tricritical() -> Result<SecondLyapunov, StabilityError> {
    let p = ModelParams {
        beta: BETA_TC,
        h: H_TC,
    };
    let normal_form: Vec<f64> = g_taylor_coefficients(&p, 5)
        .into_iter()
        .map(|c| -c)
        .collect();
    for degree in 1..=4 {
        if normal_form[degree].abs() > TRICRITICAL_TOL {
            return Err(StabilityError::NotTricritical {
                degree,
                value: normal_form[degree],
            });
        }
    }
    let quintic = normal_form[5];
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let q = [Complex64::new(s, 0.0), Complex64::new(0.0, -s)];
    let qbar = [q[0].conj(), q[1].conj()];
    // E(u¹, …, u⁵) = (0, c·w₁w₂w₃w₄w₅), with w the second component
    let quintic_form = |args: [&[Complex64; 2]; 5]| -> [Complex64; 2] {
        let prod: Complex64 = args.iter().map(|u| u[1]).product();
        [Complex64::new(0.0, 0.0), quintic * prod]
    };
    let h32 = quintic_form([&q, &q, &q, &qbar, &qbar]);
    let pairing: Complex64 = q.iter().zip(&h32).map(|(pk, hk)| pk.conj() * hk).sum();
    Ok(SecondLyapunov {
        normal_form,
        quintic,
        h32,
        ell2: pairing.re / 12.0,
    })
}

/// `Γ_{β,h}(λ) = (β/3)[tanh(λ+h) + tanh(λ−h)]`.
pub fn gamma(lambda: f64, p: &ModelParams) -> f64 {
    p.beta / 3.0 * ((lambda + p.h).tanh() + (lambda - p.h).tanh())
}

pub fn gamma_prime(lambda: f64, p: &ModelParams) -> f64 {
    p.beta / 3.0 * (sech2(lambda + p.h) + sech2(lambda - p.h))
}

fn sech2(x: f64) -> f64 {
    let c = x.cosh();
    1.0 / (c * c)
}

/// Positive inflection point of `Γ`, `½ arccosh[(cosh 4h − 3)/(2 cosh 2h)]`,
/// when the argument is at least one.
pub fn inflection_point(h: f64) -> Option<f64> {
    let arg = ((4.0 * h).cosh() - 3.0) / (2.0 * (2.0 * h).cosh());
    if (h - H_TC).abs() < 1e-14 {
        Some(0.0)
    } else if arg >= 1.0 {
        Some(0.5 * arg.acosh())
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GammaCase {
    /// `h ≤ h_tc`, `β ≤ β_c`: strictly concave, no positive fixed point.
    ConcaveNoCrossing,
    /// `h > h_tc`, `β < β_T`: no positive fixed point.
    BelowSeparation,
    /// `h > h_tc`, `β_T < β < β_c`: two positive fixed points.
    TwoCrossings,
    /// `h > h_tc`, `β = β_T`: a double (tangent) fixed point.
    Tangent,
    /// `h > h_tc`, `β = β_c`: exactly one positive fixed point.
    CriticalSingle,
    /// `β > β_c`: exactly one positive fixed point.
    SingleCrossing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaAnalysis {
    pub lambda_i: Option<f64>,
    pub positive_zeros: Vec<f64>,
    pub zero_count: usize,
    pub beta_t: Option<f64>,
    pub case: GammaCase,
}

/// Zeros closer than this are reported as one tangency; positive zeros
/// below it are identified with the zero at the origin.
pub const ZERO_MERGE_TOL: f64 = 1e-8;
const ROOT_TOL: f64 = 1e-13;

/// Positive zeros of `g_{β,h}` (equivalently fixed points of `Γ_{β,h}`),
/// located on the monotone pieces given by the curvature structure.
pub fn gamma_positive_zeros(p: &ModelParams) -> Vec<f64> {
    let d = |l: f64| gamma(l, p) - l;
    let dd = |l: f64| gamma_prime(l, p) - 1.0;
    let ddd = |l: f64| {
        -2.0 * p.beta / 3.0
            * ((l + p.h).tanh() * sech2(l + p.h) + (l - p.h).tanh() * sech2(l - p.h))
    };
    let upper = 2.0 * p.beta / 3.0 + 1.0;
    let slope0 = dd(0.0);
    let convex_start = inflection_point(p.h).filter(|&li| li > 0.0);

    let mut zeros = Vec::new();
    match convex_start {
        None => {
            if slope0 > 0.0 {
                if let Some(peak) = bisect(dd, ddd, 0.0, upper, ROOT_TOL) {
                    zeros.extend(bisect(d, dd, peak, upper, ROOT_TOL));
                }
            }
        }
        Some(li) => {
            let slope_max = dd(li);
            if slope0 >= 0.0 {
                if let Some(peak) = bisect(dd, ddd, li, upper, ROOT_TOL) {
                    zeros.extend(bisect(d, dd, peak, upper, ROOT_TOL));
                }
            } else if slope_max > 0.0 {
                let trough = bisect(dd, ddd, 0.0, li, ROOT_TOL);
                let peak = bisect(dd, ddd, li, upper, ROOT_TOL);
                if let (Some(a), Some(b)) = (trough, peak) {
                    let dmax = d(b);
                    if dmax == 0.0 {
                        zeros.push(b);
                    } else if dmax > 0.0 {
                        zeros.extend(bisect(d, dd, a, b, ROOT_TOL));
                        zeros.extend(bisect(d, dd, b, upper, ROOT_TOL));
                    }
                }
            }
        }
    }
    zeros.retain(|&z| z > ZERO_MERGE_TOL);
    if zeros.len() == 2 && zeros[1] - zeros[0] < ZERO_MERGE_TOL {
        let mid = 0.5 * (zeros[0] + zeros[1]);
        zeros = vec![mid];
    }
    zeros
}

pub fn analyze_gamma(p: &ModelParams) -> GammaAnalysis {
    let lambda_i = inflection_point(p.h);
    let positive_zeros = gamma_positive_zeros(p);
    let zero_count = positive_zeros.len();
    let bc = beta_c(p.h);
    let beta_t = if p.h > H_TC { beta_t(p.h).ok() } else { None };
    let on_hopf = (p.beta - bc).abs() <= 1e-12 * bc;
    let case = if p.beta > bc && !on_hopf {
        GammaCase::SingleCrossing
    } else if p.h <= H_TC {
        if on_hopf || p.beta < bc {
            GammaCase::ConcaveNoCrossing
        } else {
            GammaCase::SingleCrossing
        }
    } else if on_hopf {
        GammaCase::CriticalSingle
    } else {
        match zero_count {
            0 => GammaCase::BelowSeparation,
            1 => GammaCase::Tangent,
            _ => GammaCase::TwoCrossings,
        }
    };
    GammaAnalysis {
        lambda_i,
        positive_zeros,
        zero_count,
        beta_t,
        case,
    }
}

/// `β(λ) = 3 / [sech²(λ+h) + sech²(λ−h)]`, the value making `Γ'(λ) = 1`.
pub fn tangency_beta(lambda: f64, h: f64) -> f64 {
    3.0 / (sech2(lambda + h) + sech2(lambda - h))
}

/// Separation curve `β_T(h)` together with the tangency point `λ*`.
pub fn beta_t_with_point(h: f64) -> Result<(f64, f64), StabilityError> {
    if h <= H_TC {
        return Err(StabilityError::NoTangency {
            h,
            reason: "requires h > h_tc".into(),
        });
    }
    let li = inflection_point(h).ok_or_else(|| StabilityError::NoTangency {
        h,
        reason: "no inflection point".into(),
    })?;
    let residual = |l: f64| {
        let b = tangency_beta(l, h);
        b / 3.0 * ((l + h).tanh() + (l - h).tanh()) - l
    };
    let dres = |l: f64| {
        let e = 1e-7 * l.max(1.0);
        (residual(l + e) - residual(l - e)) / (2.0 * e)
    };
    if residual(li) >= 0.0 {
        return Err(StabilityError::NoTangency {
            h,
            reason: "residual nonnegative at the inflection point".into(),
        });
    }
    let mut hi = li + 1.0;
    let mut tries = 0;
    while residual(hi) <= 0.0 {
        hi *= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(StabilityError::NoTangency {
                h,
                reason: "could not bracket the tangency".into(),
            });
        }
    }
    let lam = bisect(residual, dres, li, hi, 1e-14).ok_or_else(|| StabilityError::NoTangency {
        h,
        reason: "bracket failure".into(),
    })?;
    Ok((tangency_beta(lam, h), lam))
}

pub fn beta_t(h: f64) -> Result<f64, StabilityError> {
    beta_t_with_point(h).map(|(b, _)| b)
}

/// Full stability report for one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub h: f64,
    pub beta: f64,
    pub beta_c: f64,
    pub eigs: SpectralInfo,
    pub ell1: f64,
    pub hopf: HopfKind,
    pub gamma: GammaAnalysis,
}

pub fn stability_report(p: &ModelParams) -> StabilityReport {
    StabilityReport {
        h: p.h,
        beta: p.beta,
        beta_c: beta_c(p.h),
        eigs: eigenvalues(p),
        ell1: first_lyapunov(p.h),
        hopf: hopf_kind(p.h),
        gamma: analyze_gamma(p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(beta: f64, h: f64) -> ModelParams {
        ModelParams::new(beta, h).unwrap()
    }

    #[test]
    fn eigenvalues_on_hopf_curve_are_imaginary() {
        for &h in &[0.0, 0.4, H_TC, 1.2] {
            let s = eigenvalues(&params(beta_c(h), h));
            assert!(s.k_plus.re.abs() < 1e-14);
            assert!((s.k_plus.im - 2f64.sqrt()).abs() < 1e-12);
            assert!((s.k_minus.im + 2f64.sqrt()).abs() < 1e-12);
            assert_eq!(s.regime, Regime::Critical);
        }
    }

    #[test]
    fn trace_and_determinant() {
        for &(b, h) in &[(1.0, 0.0), (3.0, 0.5), (0.05, 0.1), (7.0, 0.2)] {
            let s = eigenvalues(&params(b, h));
            assert!((s.trace() - (2.0 * b / h.cosh().powi(2) - 3.0)).abs() < 1e-12);
            assert!((s.det() - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn regimes() {
        assert_eq!(eigenvalues(&params(1.0, 0.0)).regime, Regime::Stable);
        assert_eq!(eigenvalues(&params(2.0, 0.0)).regime, Regime::Unstable);
    }

    #[test]
    fn tanh_derivative_polynomials() {
        let t = 0.3f64.tanh();
        assert!((tanh_derivative(1, 0.3) - (1.0 - t * t)).abs() < 1e-15);
        assert!((tanh_derivative(3, 0.3) - (-2.0 + 8.0 * t * t - 6.0 * t.powi(4))).abs() < 1e-14);
        // tanh⁽⁵⁾(h_tc) = −64/9 since tanh² h_tc = 1/3
        assert!((tanh_derivative(5, H_TC) + 64.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn taylor_routes_agree() {
        let p = params(2.7, 0.9);
        let a = g_taylor_coefficients(&p, 7);
        let b = g_taylor_coefficients_contour(&p, 7, 0.5, 128);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-11, "{x} vs {y}");
        }
    }

    #[test]
    fn inflection_structure() {
        assert!(inflection_point(0.3).is_none());
        assert_eq!(inflection_point(H_TC), Some(0.0));
        assert!(inflection_point(1.0).unwrap() > 0.0);
    }

    #[test]
    fn beta_t_rejects_small_h() {
        assert!(beta_t(0.5).is_err());
        assert!(beta_t(H_TC).is_err());
    }

    #[test]
    fn bisect_handles_endpoints() {
        assert_eq!(bisect(|x| x, |_| 1.0, 0.0, 1.0, 1e-12), Some(0.0));
        assert_eq!(bisect(|x| x + 5.0, |_| 1.0, 0.0, 1.0, 1e-12), None);
        let r = bisect(|x| x * x - 2.0, |x| 2.0 * x, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }
}
