//! The elementary kernel `h(z, w) = ∫₀¹ tᶻ e^{wt} dt` for integer `z ≥ 0` and
//! `Re(w) ≤ 0`, a constrained incomplete-gamma variant.
//!
//! Integration by parts gives the two-term contiguous relation
//! `w·h(z, w) + z·h(z−1, w) = e^w`, so a whole family `h(0..=zmax, w)` costs
//! O(zmax) operations once one member is known. The relation is run
//!
//! - upward (the unrolled explicit antiderivative) while `z < |w|`, where the
//!   per-step amplification `z/|w|` stays below one, and
//! - downward from a series seed at the top order while `z ≥ |w|`, where the
//!   amplification `|w|/(z+1)` stays below one.
//!
//! The seed `h(z, w) = Σ_r w^r / (r!·(z+r+1))` is the Taylor elimination of
//! the exponential; for large `|w|` its cancellation (up to `e^{|w|}`) is
//! absorbed by temporarily raising the working precision.

use rug::{Complex, Float};

use crate::arith::{HPComplex, PrecCtx};
use crate::{Error, Result};

/// Evaluates `h(z, w)` for all `z = 0..=zmax` at once.
///
/// `exp_w` optionally supplies a precomputed `e^w`; callers whose `w` has a
/// huge imaginary part of exactly known fractional phase (e.g. `2πi·aK`)
/// should pass `e2pi(frac(aK))` so the phase is reduced exactly.
pub fn h_family(
    zmax: usize,
    w: &HPComplex,
    exp_w: Option<&HPComplex>,
    ctx: &PrecCtx,
) -> Vec<HPComplex> {
    let bits = ctx.bits();
    let aw = w.abs_f64();
    let ew = match exp_w {
        Some(e) => e.clone(),
        None => w.exp(ctx),
    };

    let mut vals = vec![HPComplex::zero(ctx); zmax + 1];

    if aw == 0.0 {
        for (z, v) in vals.iter_mut().enumerate() {
            *v = HPComplex::from_f64s(1.0, 0.0, ctx).unscale_u(z as u64 + 1, ctx);
        }
        return vals;
    }

    // Upward sweep for z ≤ ⌊|w|⌋ (explicit antiderivative direction).
    let z_up = if aw >= 1.0 {
        (aw.floor() as usize).min(zmax)
    } else {
        usize::MAX // sentinel: no upward sweep, seed everything
    };

    if z_up != usize::MAX {
        // h(0, w) = (e^w − 1)/w; |w| ≥ 1 here so the subtraction is benign.
        let one = HPComplex::one(ctx);
        vals[0] = ew.sub(&one, ctx).div(w, ctx);
        for z in 1..=z_up {
            let t = vals[z - 1].scale_u(z as u64, ctx);
            vals[z] = ew.sub(&t, ctx).div(w, ctx);
        }
        if z_up >= zmax {
            return vals;
        }
    }

    // Seed the top order by series, then recurse downward.
    let start = if z_up == usize::MAX { 0 } else { z_up + 1 };
    vals[zmax] = series_seed(zmax, w, bits, ctx);
    let mut z = zmax;
    while z > start {
        // h(z−1, w) = (e^w − w·h(z, w)) / z
        let t = w.mul(&vals[z], ctx);
        vals[z - 1] = ew.sub(&t, ctx).unscale_u(z as u64, ctx);
        z -= 1;
    }
    if start == 0 && z_up == usize::MAX {
        return vals;
    }
    vals
}

/// Single-order kernel evaluation; rejects `Re(w) > 0`.
pub fn h_kernel(z: usize, w: &HPComplex, ctx: &PrecCtx) -> Result<HPComplex> {
    if w.re().to_f64() > 0.0 {
        return Err(Error::HypothesisViolated(format!(
            "h(z, w) requires Re(w) ≤ 0, got Re(w) = {}",
            w.re().to_f64()
        )));
    }
    if !w.is_finite() {
        return Err(Error::NonFinite("h kernel argument"));
    }
    Ok(h_family(z, w, None, ctx).pop().expect("nonempty family"))
}

/// `h(z, w)` by Taylor elimination of the exponential, summed at a precision
/// raised enough to absorb the `e^{|w|}`-scale cancellation among terms.
fn series_seed(z: usize, w: &HPComplex, bits: u32, ctx: &PrecCtx) -> HPComplex {
    let aw = w.abs_f64();
    let extra = if aw > 16.0 {
        (1.45 * aw).ceil() as u32 + 24
    } else {
        16
    };
    let p = bits + extra;
    let wr = Complex::with_val(p, w.raw());
    let mut term = Complex::with_val(p, (1, 0)); // w^r / r!
    let mut sum = Complex::new(p);
    sum += Float::with_val(p, 1) / Float::with_val(p, (z + 1) as u64);
    let cutoff = -((bits + extra) as i64) - 8;
    let rmax = (4.0 * aw) as usize + 8 * (bits as usize) + 64;
    for r in 1..=rmax {
        ctx.tick_n(2);
        term *= &wr;
        term /= Float::with_val(p, r as u64);
        let contrib = Complex::with_val(p, &term / Float::with_val(p, (z + r + 1) as u64));
        sum += &contrib;
        let mag = contrib
            .real()
            .clone()
            .hypot(&Float::with_val(p, contrib.imag()));
        let small = match mag.get_exp() {
            None => true,
            Some(e) => (e as i64) < cutoff,
        };
        if small && (r as f64) > aw {
            break;
        }
    }
    HPComplex::new(
        crate::arith::HPReal::from_raw(Float::with_val(bits, sum.real())),
        crate::arith::HPReal::from_raw(Float::with_val(bits, sum.imag())),
    )
}
