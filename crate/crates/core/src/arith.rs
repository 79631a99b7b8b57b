//! Arbitrary-precision real/complex arithmetic context.
//!
//! Everything numerical in this crate goes through [`PrecCtx`], which fixes the
//! working mantissa width once and hands out correctly rounded operations on
//! [`HPReal`] and [`HPComplex`]. The context also counts multiplication-class
//! operations (`mul`, `div`, complex `mul`/`div`), which the CLI reports as
//! `op_count`.
//!
//! Two precision policies are provided:
//!
//! - [`PrecCtx::for_params`]: the conservative width `⌈C₃·ν²⌉ + guard` with
//!   `ν = (j+1)·ln(K/ε)` and `C₃ = 4` by default.
//! - [`PrecCtx::practical`]: a leaner width that tracks the actual accuracy
//!   target plus headroom for phase reduction and series cancellation. The
//!   precision-monotonicity tests exercise both.

use rug::{Complex, Float, Integer, Rational};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::{Error, Result};

/// Upper limit of the valid `eps` range: evaluation targets must satisfy
/// `0 < eps < e⁻¹`.
pub const EPS_MAX: f64 = 0.367_879_441_171_442_32;

/// Complexity parameter `ν(K, j, ε) = (j+1)·ln(K/ε)`.
pub fn nu(k: u64, j: u32, eps: f64) -> f64 {
    (j as f64 + 1.0) * ((k as f64) / eps).ln()
}

struct CtxInner {
    bits: u32,
    eps_guard: u32,
    ops: AtomicU64,
    pi: Float,
    two_pi: Float,
    sqrt_pi: Float,
}

/// Immutable precision context; cheap to clone and safe to share across
/// threads. π-derived constants are computed once at construction.
#[derive(Clone)]
pub struct PrecCtx {
    inner: Arc<CtxInner>,
}

impl fmt::Debug for PrecCtx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PrecCtx")
            .field("bits", &self.inner.bits)
            .field("eps_guard", &self.inner.eps_guard)
            .finish()
    }
}

impl PrecCtx {
    /// Context with an explicit mantissa width. Rejects widths below 64 bits.
    pub fn new(bits: u32) -> Result<PrecCtx> {
        Self::with_guard(bits, 32)
    }

    fn with_guard(bits: u32, eps_guard: u32) -> Result<PrecCtx> {
        if bits < 64 {
            return Err(Error::InvalidArgument(format!(
                "mantissa width must be at least 64 bits, got {bits}"
            )));
        }
        let pi = Float::with_val(bits, rug::float::Constant::Pi);
        let two_pi = Float::with_val(bits, &pi * 2u32);
        let sqrt_pi = pi.clone().sqrt();
        Ok(PrecCtx {
            inner: Arc::new(CtxInner {
                bits,
                eps_guard,
                ops: AtomicU64::new(0),
                pi,
                two_pi,
                sqrt_pi,
            }),
        })
    }

    /// Working precision for a top-level evaluation of `F(K, j; a, b)` to
    /// within `±ε`: `⌈c₃·ν²⌉ + guard` bits with the default `c₃ = 4`.
    pub fn for_params(k: u64, j: u32, eps: f64) -> Result<PrecCtx> {
        Self::for_params_c3(k, j, eps, 4.0)
    }

    /// Same as [`PrecCtx::for_params`] with a configurable leading constant.
    pub fn for_params_c3(k: u64, j: u32, eps: f64, c3: f64) -> Result<PrecCtx> {
        check_eps(eps)?;
        if k == 0 {
            return Err(Error::InvalidArgument("K must be positive".into()));
        }
        if !(c3 > 0.0) {
            return Err(Error::InvalidArgument("c3 must be positive".into()));
        }
        let guard = 32u32;
        let v = nu(k, j, eps);
        let bits = (c3 * v * v).ceil() as u64 + guard as u64;
        let bits = bits.clamp(64, u32::MAX as u64) as u32;
        Self::with_guard(bits, guard)
    }

    /// Leaner width sized from the actual per-subroutine accuracy targets
    /// (`~8^{-j}K^{-3}ε`), plus headroom for `K²`-sized phase reduction and
    /// for cancellation in exponential series.
    pub fn practical(k: u64, j: u32, eps: f64) -> Result<PrecCtx> {
        check_eps(eps)?;
        if k == 0 {
            return Err(Error::InvalidArgument("K must be positive".into()));
        }
        let lg_k = ((k + 2) as f64).log2();
        let target = 3.0 * j as f64 + 3.0 * lg_k + (1.0 / eps).log2();
        let bits = 128.0 + 1.6 * target + 2.0 * lg_k + 24.0 * (j as f64 + 1.0);
        let bits = (bits.ceil() as u64).clamp(96, 1 << 22) as u32;
        Self::with_guard(bits, 32)
    }

    /// Derived context with `multiplier ×` the mantissa width (oracles run at
    /// a multiple of the precision under test).
    pub fn scaled(&self, multiplier: f64) -> Result<PrecCtx> {
        if !(multiplier >= 1.0) {
            return Err(Error::InvalidArgument(
                "precision multiplier must be at least 1".into(),
            ));
        }
        let bits = ((self.bits() as f64) * multiplier).ceil() as u64;
        Self::with_guard(bits.clamp(64, u32::MAX as u64) as u32, self.inner.eps_guard)
    }

    pub fn bits(&self) -> u32 {
        self.inner.bits
    }

    pub fn eps_guard(&self) -> u32 {
        self.inner.eps_guard
    }

    /// Number of multiplication-class operations performed through this
    /// context (and its clones) so far.
    pub fn op_count(&self) -> u64 {
        self.inner.ops.load(Ordering::Relaxed)
    }

    pub fn reset_op_count(&self) {
        self.inner.ops.store(0, Ordering::Relaxed);
    }

    #[inline]
    fn tick(&self) {
        self.inner.ops.fetch_add(1, Ordering::Relaxed);
    }

    #[inline]
    pub(crate) fn tick_n(&self, n: u64) {
        self.inner.ops.fetch_add(n, Ordering::Relaxed);
    }

    pub fn pi(&self) -> HPReal {
        HPReal(self.inner.pi.clone())
    }

    pub fn two_pi(&self) -> HPReal {
        HPReal(self.inner.two_pi.clone())
    }

    pub fn sqrt_pi(&self) -> HPReal {
        HPReal(self.inner.sqrt_pi.clone())
    }

    /// Absolute rounding granularity `2^{-bits}` as an `f64` (clamped away
    /// from zero), used in error bookkeeping.
    pub fn ulp(&self) -> f64 {
        2.0f64.powi(-(self.bits().min(1000) as i32))
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < EPS_MAX) {
        return Err(Error::EpsOutOfRange(eps));
    }
    Ok(())
}

/// Arbitrary-precision real number tied to no particular context; operations
/// round to the width of the context they are invoked with.
#[derive(Clone, Debug, PartialEq, PartialOrd)]
pub struct HPReal(Float);

impl HPReal {
    pub fn zero(ctx: &PrecCtx) -> HPReal {
        HPReal(Float::new(ctx.bits()))
    }

    pub fn one(ctx: &PrecCtx) -> HPReal {
        HPReal(Float::with_val(ctx.bits(), 1))
    }

    pub fn from_u64(v: u64, ctx: &PrecCtx) -> HPReal {
        HPReal(Float::with_val(ctx.bits(), v))
    }

    pub fn from_i64(v: i64, ctx: &PrecCtx) -> HPReal {
        HPReal(Float::with_val(ctx.bits(), v))
    }

    pub fn from_f64(v: f64, ctx: &PrecCtx) -> HPReal {
        HPReal(Float::with_val(ctx.bits(), v))
    }

    pub fn from_integer(v: &Integer, ctx: &PrecCtx) -> HPReal {
        HPReal(Float::with_val(ctx.bits(), v))
    }

    pub fn from_rational(v: &Rational, ctx: &PrecCtx) -> HPReal {
        HPReal(Float::with_val(ctx.bits(), v))
    }

    /// Parses a decimal string (or exact rational `p/q`) at context precision.
    pub fn parse(s: &str, ctx: &PrecCtx) -> Result<HPReal> {
        if let Some((num, den)) = s.split_once('/') {
            let num = num.trim().parse::<Integer>().map_err(|e| {
                Error::InvalidArgument(format!("bad rational numerator {num:?}: {e}"))
            })?;
            let den = den.trim().parse::<Integer>().map_err(|e| {
                Error::InvalidArgument(format!("bad rational denominator {den:?}: {e}"))
            })?;
            if den == 0 {
                return Err(Error::InvalidArgument("rational with zero denominator".into()));
            }
            let q = Rational::from((num, den));
            return Ok(HPReal(Float::with_val(ctx.bits(), q)));
        }
        let parsed = Float::parse(s)
            .map_err(|e| Error::InvalidArgument(format!("bad number {s:?}: {e}")))?;
        Ok(HPReal(Float::with_val(ctx.bits(), parsed)))
    }

    pub fn raw(&self) -> &Float {
        &self.0
    }

    pub(crate) fn from_raw(f: Float) -> HPReal {
        HPReal(f)
    }

    pub fn add(&self, o: &HPReal, ctx: &PrecCtx) -> HPReal {
        HPReal(Float::with_val(ctx.bits(), &self.0 + &o.0))
    }

    pub fn sub(&self, o: &HPReal, ctx: &PrecCtx) -> HPReal {
        HPReal(Float::with_val(ctx.bits(), &self.0 - &o.0))
    }

    pub fn mul(&self, o: &HPReal, ctx: &PrecCtx) -> HPReal {
        ctx.tick();
        HPReal(Float::with_val(ctx.bits(), &self.0 * &o.0))
    }

    pub fn div(&self, o: &HPReal, ctx: &PrecCtx) -> HPReal {
        ctx.tick();
        HPReal(Float::with_val(ctx.bits(), &self.0 / &o.0))
    }

    pub fn mul_u(&self, v: u64, ctx: &PrecCtx) -> HPReal {
        ctx.tick();
        HPReal(Float::with_val(ctx.bits(), &self.0 * v))
    }

    pub fn div_u(&self, v: u64, ctx: &PrecCtx) -> HPReal {
        ctx.tick();
        HPReal(Float::with_val(ctx.bits(), &self.0 / v))
    }

    pub fn neg(&self, ctx: &PrecCtx) -> HPReal {
        HPReal(Float::with_val(ctx.bits(), -&self.0))
    }

    pub fn abs(&self, ctx: &PrecCtx) -> HPReal {
        HPReal(Float::with_val(ctx.bits(), self.0.abs_ref()))
    }

    pub fn sqrt(&self, ctx: &PrecCtx) -> HPReal {
        HPReal(Float::with_val(ctx.bits(), self.0.sqrt_ref()))
    }

    pub fn exp(&self, ctx: &PrecCtx) -> HPReal {
        HPReal(Float::with_val(ctx.bits(), self.0.exp_ref()))
    }

    pub fn ln(&self, ctx: &PrecCtx) -> HPReal {
        HPReal(Float::with_val(ctx.bits(), self.0.ln_ref()))
    }

    pub fn recip(&self, ctx: &PrecCtx) -> HPReal {
        ctx.tick();
        HPReal(Float::with_val(ctx.bits(), self.0.recip_ref()))
    }

    /// Integer power by binary exponentiation; each squaring/multiply ticks.
    pub fn powi(&self, mut e: u64, ctx: &PrecCtx) -> HPReal {
        let mut result = HPReal::one(ctx);
        if e == 0 {
            return result;
        }
        let mut base = self.clone();
        loop {
            if e & 1 == 1 {
                result = result.mul(&base, ctx);
            }
            e >>= 1;
            if e == 0 {
                break;
            }
            base = base.mul(&base, ctx);
        }
        result
    }

    /// Exact multiplication by a power of two.
    pub fn mul_2exp(&self, e: i32, ctx: &PrecCtx) -> HPReal {
        let mut f = Float::with_val(ctx.bits(), &self.0);
        if e >= 0 {
            f <<= e as u32;
        } else {
            f >>= (-e) as u32;
        }
        HPReal(f)
    }

    pub fn floor(&self, ctx: &PrecCtx) -> HPReal {
        HPReal(Float::with_val(ctx.bits(), self.0.floor_ref()))
    }

    pub fn ceil(&self, ctx: &PrecCtx) -> HPReal {
        HPReal(Float::with_val(ctx.bits(), self.0.ceil_ref()))
    }

    /// Fractional part in `[0, 1)`: `x − ⌊x⌋`, exact in the representation.
    pub fn frac1(&self, ctx: &PrecCtx) -> HPReal {
        let fl = Float::with_val(ctx.bits(), self.0.floor_ref());
        let mut r = Float::with_val(ctx.bits(), &self.0 - fl);
        // Guard against r == 1 after rounding when x is a hair below an integer.
        if r >= 1.0 {
            r -= 1u32;
        }
        if r < 0.0 {
            r += 1u32;
        }
        HPReal(r)
    }

    /// Nearest integer (ties to even, MPFR semantics).
    pub fn round(&self, ctx: &PrecCtx) -> HPReal {
        HPReal(Float::with_val(ctx.bits(), self.0.round_ref()))
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }

    /// Conservative `log2 |x|` for bounds; `None` for zero.
    pub fn log2_abs(&self) -> Option<i64> {
        self.0.get_exp().map(|e| e as i64)
    }

    pub fn to_u64_floor(&self) -> Option<u64> {
        let f = Float::with_val(64, self.0.floor_ref());
        f.to_integer().and_then(|i| i.to_u64())
    }

    pub fn to_integer(&self) -> Option<Integer> {
        self.0.to_integer()
    }

    pub fn is_finite(&self) -> bool {
        self.0.is_finite()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Exact comparison against an f64 constant (no rounding of `self`).
    pub fn gt_f64(&self, v: f64) -> bool {
        self.0 > v
    }

    pub fn lt_f64(&self, v: f64) -> bool {
        self.0 < v
    }

    pub fn ge_f64(&self, v: f64) -> bool {
        self.0 >= v
    }

    pub fn le_f64(&self, v: f64) -> bool {
        self.0 <= v
    }

    pub fn is_sign_negative(&self) -> bool {
        self.0.is_sign_negative() && !self.0.is_zero()
    }

    /// Full-precision decimal rendering (round-trips through parse).
    pub fn to_decimal_string(&self) -> String {
        self.0.to_string_radix(10, None)
    }
}

impl fmt::Display for HPReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Arbitrary-precision complex number (MPC-backed).
#[derive(Clone, Debug, PartialEq)]
pub struct HPComplex(Complex);

impl HPComplex {
    pub fn zero(ctx: &PrecCtx) -> HPComplex {
        HPComplex(Complex::new(ctx.bits()))
    }

    pub fn one(ctx: &PrecCtx) -> HPComplex {
        HPComplex(Complex::with_val(ctx.bits(), (1, 0)))
    }

    pub fn new(re: HPReal, im: HPReal) -> HPComplex {
        let prec = re.0.prec().max(im.0.prec());
        HPComplex(Complex::with_val(prec, (re.0, im.0)))
    }

    pub fn from_real(re: &HPReal, ctx: &PrecCtx) -> HPComplex {
        HPComplex(Complex::with_val(ctx.bits(), &re.0))
    }

    pub fn from_f64s(re: f64, im: f64, ctx: &PrecCtx) -> HPComplex {
        HPComplex(Complex::with_val(ctx.bits(), (re, im)))
    }

    pub fn raw(&self) -> &Complex {
        &self.0
    }

    pub fn re(&self) -> HPReal {
        HPReal(self.0.real().clone())
    }

    pub fn im(&self) -> HPReal {
        HPReal(self.0.imag().clone())
    }

    pub fn add(&self, o: &HPComplex, ctx: &PrecCtx) -> HPComplex {
        HPComplex(Complex::with_val(ctx.bits(), &self.0 + &o.0))
    }

    pub fn sub(&self, o: &HPComplex, ctx: &PrecCtx) -> HPComplex {
        HPComplex(Complex::with_val(ctx.bits(), &self.0 - &o.0))
    }

    pub fn mul(&self, o: &HPComplex, ctx: &PrecCtx) -> HPComplex {
        ctx.tick();
        HPComplex(Complex::with_val(ctx.bits(), &self.0 * &o.0))
    }

    pub fn div(&self, o: &HPComplex, ctx: &PrecCtx) -> HPComplex {
        ctx.tick();
        HPComplex(Complex::with_val(ctx.bits(), &self.0 / &o.0))
    }

    pub fn scale(&self, s: &HPReal, ctx: &PrecCtx) -> HPComplex {
        ctx.tick();
        HPComplex(Complex::with_val(ctx.bits(), &self.0 * &s.0))
    }

    pub fn scale_u(&self, v: u64, ctx: &PrecCtx) -> HPComplex {
        ctx.tick();
        HPComplex(Complex::with_val(ctx.bits(), &self.0 * v))
    }

    pub fn unscale(&self, s: &HPReal, ctx: &PrecCtx) -> HPComplex {
        ctx.tick();
        HPComplex(Complex::with_val(ctx.bits(), &self.0 / &s.0))
    }

    pub fn unscale_u(&self, v: u64, ctx: &PrecCtx) -> HPComplex {
        ctx.tick();
        HPComplex(Complex::with_val(ctx.bits(), &self.0 / v))
    }

    pub fn neg(&self, ctx: &PrecCtx) -> HPComplex {
        HPComplex(Complex::with_val(ctx.bits(), -&self.0))
    }

    /// Exact multiplication by a power of two.
    pub fn mul_2exp(&self, e: i32, ctx: &PrecCtx) -> HPComplex {
        let mut c = Complex::with_val(ctx.bits(), &self.0);
        if e >= 0 {
            c <<= e as u32;
        } else {
            c >>= (-e) as u32;
        }
        HPComplex(c)
    }

    pub fn conj(&self, ctx: &PrecCtx) -> HPComplex {
        HPComplex(Complex::with_val(ctx.bits(), &*self.0.as_conj()))
    }

    /// Multiplication by `i` (exact rotation, not counted).
    pub fn mul_i(&self, ctx: &PrecCtx) -> HPComplex {
        let re = Float::with_val(ctx.bits(), -self.0.imag());
        let im = Float::with_val(ctx.bits(), self.0.real());
        HPComplex(Complex::with_val(ctx.bits(), (re, im)))
    }

    /// Multiplication by `i^k` (exact).
    pub fn mul_pow_i(&self, k: u32, ctx: &PrecCtx) -> HPComplex {
        match k % 4 {
            0 => self.clone(),
            1 => self.mul_i(ctx),
            2 => self.neg(ctx),
            _ => self.mul_i(ctx).neg(ctx),
        }
    }

    pub fn abs(&self, ctx: &PrecCtx) -> HPReal {
        let re = self.0.real();
        let im = self.0.imag().clone();
        HPReal(Float::with_val(ctx.bits(), re.hypot_ref(&im)))
    }

    pub fn abs_f64(&self) -> f64 {
        self.0.real().to_f64().hypot(self.0.imag().to_f64())
    }

    /// `exp(z)` for complex `z`.
    pub fn exp(&self, ctx: &PrecCtx) -> HPComplex {
        HPComplex(Complex::with_val(ctx.bits(), self.0.exp_ref()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.real().is_finite() && self.0.imag().is_finite()
    }
}

impl fmt::Display for HPComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}i", self.0.real(), self.0.imag())
    }
}

/// `exp(2πi·x)`, with the argument reduced modulo 1 exactly in the
/// representation before any rounding multiplication. This keeps phases like
/// `aK + bK²` accurate without extra precision beyond the stored width.
pub fn e2pi(x: &HPReal, ctx: &PrecCtx) -> HPComplex {
    let r = x.frac1(ctx);
    let theta = r.mul(&ctx.two_pi(), ctx);
    let (s, c) = theta.0.sin_cos(Float::new(ctx.bits()));
    HPComplex(Complex::with_val(ctx.bits(), (c, s)))
}

/// `exp(2πi·x)` for an `x` given as an exact integer multiple pair
/// `x = p·y + q·y²` is not needed; callers reduce themselves.
///
/// `exp(w)` for complex `w` written as `re + i·im` where `im` is handled by
/// exact mod-1 reduction of `im/(2π)` is not generally possible, so this is
/// plain complex exp.
pub fn exp_complex(w: &HPComplex, ctx: &PrecCtx) -> HPComplex {
    w.exp(ctx)
}

/// Exact binomial coefficient rendered in the context.
pub fn binom(n: u64, k: u64, ctx: &PrecCtx) -> Result<HPReal> {
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "binomial requires k ≤ n, got n={n}, k={k}"
        )));
    }
    Ok(HPReal::from_integer(&binom_int(n, k), ctx))
}

/// Exact binomial coefficient as an integer.
pub fn binom_int(n: u64, k: u64) -> Integer {
    let k = k.min(n - k.min(n));
    let n_int = Integer::from(n);
    n_int.binomial(k as u32)
}

/// Exact factorial rendered in the context.
pub fn factorial(n: u64, ctx: &PrecCtx) -> HPReal {
    HPReal::from_integer(&Integer::from(Integer::factorial(n as u32)), ctx)
}

/// Rounds a positive float up to the next integer and converts to `u64`,
/// saturating at `u64::MAX`.
pub fn ceil_to_u64(x: &HPReal) -> u64 {
    if x.0.is_sign_negative() {
        return 0;
    }
    let c = Float::with_val(64, x.0.ceil_ref());
    c.to_integer()
        .and_then(|i| i.to_u64())
        .unwrap_or(u64::MAX)
}
