//! Saddle-free oscillatory integrals: the kernel-weighted `J(K,j;M,w,b)`
//! family, the contour integrals `Ĩ_C` (and the base oscillatory integral
//! `I_{C₀}`), the elementary kernel `h(z,w)`, and the Gaussian
//! self-similarity identity.

pub(crate) mod families;
mod hkernel;

use rug::Integer;

use crate::arith::{nu, HPComplex, HPReal, PrecCtx, EPS_MAX};
use crate::{Error, Result};

pub use hkernel::h_kernel;

/// Specification of a `J(K, j; M, w, b)` integral.
#[derive(Clone, Debug)]
pub struct JSpec {
    pub k: u64,
    pub j: u32,
    /// Kernel length; may be astronomically large (`⌈8^j K³ e^ν⌉`).
    pub m: Integer,
    /// Exponential decay offset, `0 ≤ w < K`.
    pub w: HPReal,
    /// Quadratic argument, `0 ≤ b ≤ 1`.
    pub b: HPReal,
}

/// Which of the contour integrals is requested.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContourTag {
    /// Oscillatory base integral `I_{C₀}(K,j;a,b)` over `[0, K)`.
    C0,
    /// `Ĩ_{C̄₁}(K,j;w,b)` along `K − it`.
    C1Bar,
    /// `Ĩ_{C₇}(K,j;w,b)` along the `e^{−πi/4}` diagonal of length `√2 K`.
    C7,
    /// `Ĩ_{C₉}(K,j;w,b)` along `[0, ∞)`.
    C9,
    /// `Ĩ_{C₉}(K,j;W,−2ib)` with the composite rotated argument.
    C9Rotated,
}

impl std::fmt::Display for ContourTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ContourTag::C0 => write!(f, "C0"),
            ContourTag::C1Bar => write!(f, "C1bar"),
            ContourTag::C7 => write!(f, "C7"),
            ContourTag::C9 => write!(f, "C9"),
            ContourTag::C9Rotated => write!(f, "C9_rotated"),
        }
    }
}

/// Self-similarity of the Gaussian: `∫_{−∞}^{∞} e^{ηt−t²} dt = √π·e^{η²/4}`.
pub fn gaussian_selfsim(eta: &HPComplex, ctx: &PrecCtx) -> HPComplex {
    let quarter = eta.mul(eta, ctx).scale(&HPReal::from_f64(0.25, ctx), ctx);
    quarter.exp(ctx).scale(&ctx.sqrt_pi(), ctx)
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < EPS_MAX) {
        return Err(Error::EpsOutOfRange(eps));
    }
    Ok(())
}

fn check_large_enough(k: u64, j: u32, eps: f64) -> Result<f64> {
    let v = nu(k, j, eps);
    if 10.0 * v * v >= k as f64 {
        return Err(Error::HypothesisViolated(format!(
            "10ν² < K fails: 10·({v:.4})² = {:.4} ≥ K = {k}",
            10.0 * v * v
        )));
    }
    Ok(v)
}

/// Evaluates `J(K, j; M, w, b)` to within a small multiple of `eps`,
/// returning the value and the achieved absolute error bound.
pub fn integral_j(spec: &JSpec, ctx: &PrecCtx, eps: f64) -> Result<(HPComplex, f64)> {
    check_eps(eps)?;
    if spec.k == 0 {
        return Err(Error::InvalidArgument("K must be positive".into()));
    }
    if spec.m < 0 {
        return Err(Error::InvalidArgument("M must be nonnegative".into()));
    }
    if spec.m == 0 {
        // The kernel factor 1 − e^{−2πMt} vanishes identically.
        return Ok((HPComplex::zero(ctx), 0.0));
    }
    let v = check_large_enough(spec.k, spec.j, eps)?;
    // M < e^{10ν²}
    let m_bits = spec.m.significant_bits() as f64;
    if m_bits * std::f64::consts::LN_2 >= 10.0 * v * v {
        return Err(Error::HypothesisViolated(format!(
            "M < e^{{10ν²}} fails: log M ≈ {:.2} ≥ 10ν² = {:.2}",
            m_bits * std::f64::consts::LN_2,
            10.0 * v * v
        )));
    }
    if spec.w.is_sign_negative() || !spec.w.lt_f64(spec.k as f64) {
        return Err(Error::HypothesisViolated(format!(
            "0 ≤ w < K fails: w = {}, K = {}",
            spec.w.to_f64(),
            spec.k
        )));
    }
    if spec.b.is_sign_negative() || spec.b.gt_f64(1.0) {
        return Err(Error::HypothesisViolated(format!(
            "0 ≤ b ≤ 1 fails: b = {}",
            spec.b.to_f64()
        )));
    }
    let m_hp = HPReal::from_integer(&spec.m, ctx);
    // Target the role these integrals play inside the algorithm
    // (±8^{−j}K^{−2}ε), well inside the stated ±O(ν³ε) contract.
    let tol = inner_tol(spec.k, spec.j, eps);
    let fam = families::j_family(spec.k, spec.j as usize, &m_hp, &spec.w, &spec.b, ctx, tol);
    Ok((fam.vals[spec.j as usize].clone(), fam.err))
}

fn inner_tol(k: u64, j: u32, eps: f64) -> f64 {
    (eps * 8.0f64.powi(-(j as i32)) / (k as f64).powi(2)).clamp(1e-260, 0.25)
}

/// Evaluates the requested contour integral to within a small multiple of
/// `eps`. Argument conventions per tag:
///
/// - `C0`: `w` holds the real linear argument `a ∈ [−1, 1]`, `b` real in
///   `[0, 1]`; no lower bound on `b`.
/// - `C1Bar`, `C7`, `C9`: `w` real in `[0, 1]`, `b` real with `1 ≤ 2bK`.
/// - `C9Rotated`: `w` is the composite complex argument (with `Re w ≥ 1`),
///   `b` is `−2i·b₀` for the real quadratic argument `b₀` with `1 ≤ 2b₀K`.
pub fn integral_i_tilde(
    tag: ContourTag,
    k: u64,
    j: u32,
    w: &HPComplex,
    b: &HPComplex,
    ctx: &PrecCtx,
    eps: f64,
) -> Result<(HPComplex, f64)> {
    check_eps(eps)?;
    if k == 0 {
        return Err(Error::InvalidArgument("K must be positive".into()));
    }
    if tag != ContourTag::C0 {
        check_large_enough(k, j, eps)?;
    }
    let jm = j as usize;
    match tag {
        ContourTag::C0 => {
            let a = real_part_only(w, "C0 linear argument")?;
            let bb = real_part_only(b, "C0 quadratic argument")?;
            if !a.ge_f64(-1.0) || !a.le_f64(1.0) {
                return Err(Error::HypothesisViolated(format!(
                    "C0 requires −1 ≤ a ≤ 1, got {}",
                    a.to_f64()
                )));
            }
            if bb.is_sign_negative() || bb.gt_f64(1.0) {
                return Err(Error::HypothesisViolated(format!(
                    "C0 requires 0 ≤ b ≤ 1, got {}",
                    bb.to_f64()
                )));
            }
            let fam = families::i_c0_family(k, jm, &a, &bb, ctx, inner_tol(k, j, eps));
            Ok((fam.vals[jm].clone(), fam.err))
        }
        ContourTag::C1Bar | ContourTag::C7 | ContourTag::C9 => {
            let ww = real_part_only(w, "contour decay argument")?;
            let bb = real_part_only(b, "contour quadratic argument")?;
            if ww.is_sign_negative() || ww.gt_f64(1.0) {
                return Err(Error::HypothesisViolated(format!(
                    "requires 0 ≤ w ≤ 1, got {}",
                    ww.to_f64()
                )));
            }
            check_2bk(&bb, k)?;
            let tol = inner_tol(k, j, eps);
            let fam = match tag {
                ContourTag::C1Bar => families::i_c1bar_family(k, jm, &ww, &bb, ctx, tol),
                ContourTag::C7 => families::i_c7_family(k, jm, &ww, &bb, ctx, tol),
                _ => families::i_c9_family(k, jm, &ww, &bb, ctx, tol),
            };
            Ok((fam.vals[jm].clone(), fam.err))
        }
        ContourTag::C9Rotated => {
            if !b.re().is_zero() || !b.im().lt_f64(0.0) {
                return Err(Error::HypothesisViolated(
                    "C9_rotated expects a purely imaginary quadratic argument −2ib₀ with b₀ > 0"
                        .into(),
                ));
            }
            let b0 = b.im().neg(ctx).mul_2exp(-1, ctx);
            check_2bk(&b0, k)?;
            if !w.re().ge_f64(1.0 - 1e-12) {
                return Err(Error::HypothesisViolated(format!(
                    "C9_rotated requires Re w ≥ 1, got {}",
                    w.re().to_f64()
                )));
            }
            let fam = families::i_c9rot_family(k, jm, w, &b0, ctx, inner_tol(k, j, eps));
            Ok((fam.vals[jm].clone(), fam.err))
        }
    }
}

fn real_part_only(v: &HPComplex, what: &str) -> Result<HPReal> {
    if !v.im().is_zero() {
        return Err(Error::InvalidArgument(format!("{what} must be real")));
    }
    Ok(v.re())
}

fn check_2bk(b: &HPReal, k: u64) -> Result<()> {
    let two_bk = 2.0 * b.to_f64() * k as f64;
    if two_bk < 1.0 - 1e-12 {
        return Err(Error::HypothesisViolated(format!(
            "1 ≤ 2bK fails: 2bK = {two_bk:.6}"
        )));
    }
    if b.gt_f64(1.0) {
        return Err(Error::HypothesisViolated(format!(
            "0 ≤ b ≤ 1 fails: b = {}",
            b.to_f64()
        )));
    }
    Ok(())
}
