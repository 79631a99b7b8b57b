//! Slow reference implementations with rigorous error bounds: literal
//! high-precision summation for `F` and `G`, exhaustive enumeration for the
//! Diophantine counter, and adaptive quadrature for the contour integrands.
//!
//! Oracles carry certificates: every evaluation returns a bound alongside the
//! value. They are deliberately O(K) or worse and refuse requests beyond
//! their configured size guards.

use rayon::prelude::*;

use crate::apps::DioSystem;
use crate::arith::{e2pi, HPComplex, HPReal, PrecCtx};
use crate::theta::raw_direct_sum;
use crate::{Error, Result};

/// Oracle configuration; precision is expressed relative to the context of
/// the computation under test.
#[derive(Clone, Copy, Debug)]
pub struct OracleCfg {
    /// Mantissa-width multiplier (≥ 1).
    pub bits_multiplier: f64,
    /// Refuse direct sums longer than this.
    pub max_terms: u64,
}

impl Default for OracleCfg {
    fn default() -> Self {
        OracleCfg {
            bits_multiplier: 4.0,
            max_terms: 100_000_000,
        }
    }
}

impl OracleCfg {
    fn check(&self) -> Result<()> {
        if !(self.bits_multiplier >= 1.0) {
            return Err(Error::InvalidArgument(
                "oracle bits multiplier must be ≥ 1".into(),
            ));
        }
        Ok(())
    }
}

/// Literal evaluation of `F(K, j; a, b) = K^{-j} Σ_{k=0}^{K} k^j e(ak + bk²)`
/// at `bits_multiplier ×` the given context's precision.
pub fn direct_theta(
    k: u64,
    j: u32,
    a: &HPReal,
    b: &HPReal,
    ctx: &PrecCtx,
    cfg: &OracleCfg,
) -> Result<(HPComplex, f64)> {
    cfg.check()?;
    if k.saturating_add(1) > cfg.max_terms {
        return Err(Error::OracleInfeasible(format!(
            "direct sum of {} terms exceeds max_terms = {}",
            k + 1,
            cfg.max_terms
        )));
    }
    let octx = ctx.scaled(cfg.bits_multiplier)?;
    let mut z = vec![HPComplex::zero(&octx); j as usize + 1];
    z[j as usize] = HPComplex::one(&octx);
    let (v, bound) = raw_direct_sum(k, &z, a, b, &octx);
    Ok((v, bound))
}

/// Literal evaluation of `G(K, j; a, b) = Σ_{k=1}^{K} k^{−j} e(ak + bk²)`.
pub fn direct_g(
    k: u64,
    j: u32,
    a: &HPReal,
    b: &HPReal,
    ctx: &PrecCtx,
    cfg: &OracleCfg,
) -> Result<(HPComplex, f64)> {
    cfg.check()?;
    if k > cfg.max_terms {
        return Err(Error::OracleInfeasible(format!(
            "direct sum of {k} terms exceeds max_terms = {}",
            cfg.max_terms
        )));
    }
    let octx = ctx.scaled(cfg.bits_multiplier)?;
    let chunk: u64 = 8192;
    let n_chunks = (k + chunk - 1) / chunk.max(1) + 1;
    let partials: Vec<HPComplex> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let lo = (ci * chunk).max(1);
            let hi = ((ci + 1) * chunk - 1).min(k);
            let mut acc = HPComplex::zero(&octx);
            let mut kk = lo;
            while kk <= hi {
                let kf = HPReal::from_u64(kk, &octx);
                let k2 = kf.mul(&kf, &octx);
                let phase = a.mul(&kf, &octx).add(&b.mul(&k2, &octx), &octx);
                let w = kf.recip(&octx).powi(j as u64, &octx);
                acc = acc.add(&e2pi(&phase, &octx).scale(&w, &octx), &octx);
                kk += 1;
            }
            acc
        })
        .collect();
    let mut total = HPComplex::zero(&octx);
    for p in partials {
        total = total.add(&p, &octx);
    }
    let phase_mag = (a.to_f64().abs() * k as f64 + b.to_f64().abs() * (k as f64).powi(2)).max(1.0);
    Ok((total, (k as f64 + 1.0) * (32.0 + 16.0 * phase_mag) * octx.ulp()))
}

/// Exhaustive enumeration of the Diophantine system: counts tuples
/// `0 ≤ k_r ≤ K` with
/// `Σ_{r≤s}(α_r k_r + β_r k_r²) − Σ_{r>s}(α_r k_r + β_r k_r²) ≡ 0 (mod M)`.
pub fn brute_diophantine(sys: &DioSystem) -> Result<u64> {
    sys.validate()?;
    let n = (sys.s + sys.t) as usize;
    let states = (sys.k as f64 + 1.0).powi(n as i32);
    if states > 1.0e8 {
        return Err(Error::OracleInfeasible(format!(
            "enumeration of {states:.3e} states exceeds 1e8"
        )));
    }
    let m = sys.m as i128;
    // Residue table per position: ±(α k + β k²) mod M.
    let mut tables: Vec<Vec<i128>> = Vec::with_capacity(n);
    for r in 0..n {
        let sign: i128 = if (r as u32) < sys.s { 1 } else { -1 };
        let alpha = sys.alphas[r] as i128;
        let beta = sys.betas[r] as i128;
        let mut col = Vec::with_capacity(sys.k as usize + 1);
        for k in 0..=sys.k {
            let k = k as i128;
            let v = (sign * (alpha * k + beta * k * k)) % m;
            col.push(v.rem_euclid(m));
        }
        tables.push(col);
    }
    // Depth-first enumeration with running residue.
    fn walk(tables: &[Vec<i128>], pos: usize, acc: i128, m: i128) -> u64 {
        if pos == tables.len() {
            return u64::from(acc == 0);
        }
        if pos == tables.len() - 1 {
            // Count matches in the last coordinate directly.
            let need = (m - acc) % m;
            return tables[pos].iter().filter(|&&v| v == need).count() as u64;
        }
        let mut total = 0;
        for &v in &tables[pos] {
            total += walk(tables, pos + 1, (acc + v) % m, m);
        }
        total
    }
    Ok(walk(&tables, 0, 0, m))
}

/// Adaptive Simpson quadrature for complex-valued integrands over a real
/// interval: bisects until the Richardson estimate of the local error is
/// below the budget or the depth cap (60) is reached.
pub fn adaptive_quadrature<F>(
    f: &F,
    a: &HPReal,
    b: &HPReal,
    ctx: &PrecCtx,
    tol: f64,
) -> (HPComplex, f64)
where
    F: Fn(&HPReal) -> HPComplex,
{
    let fa = f(a);
    let fb = f(b);
    let m = a.add(b, ctx).mul_2exp(-1, ctx);
    let fm = f(&m);
    let whole = simpson_rule(a, b, &fa, &fm, &fb, ctx);
    let mut out_err = 0.0;
    let v = adapt(
        f, a, b, &fa, &fm, &fb, &whole, tol, 60, ctx, &mut out_err,
    );
    (v, out_err)
}

fn simpson_rule(
    a: &HPReal,
    b: &HPReal,
    fa: &HPComplex,
    fm: &HPComplex,
    fb: &HPComplex,
    ctx: &PrecCtx,
) -> HPComplex {
    let h6 = b.sub(a, ctx).div_u(6, ctx);
    fa.add(&fm.scale_u(4, ctx), ctx).add(fb, ctx).scale(&h6, ctx)
}

#[allow(clippy::too_many_arguments)]
fn adapt<F>(
    f: &F,
    a: &HPReal,
    b: &HPReal,
    fa: &HPComplex,
    fm: &HPComplex,
    fb: &HPComplex,
    whole: &HPComplex,
    tol: f64,
    depth: u32,
    ctx: &PrecCtx,
    err: &mut f64,
) -> HPComplex
where
    F: Fn(&HPReal) -> HPComplex,
{
    let m = a.add(b, ctx).mul_2exp(-1, ctx);
    let lm = a.add(&m, ctx).mul_2exp(-1, ctx);
    let rm = m.add(b, ctx).mul_2exp(-1, ctx);
    let flm = f(&lm);
    let frm = f(&rm);
    let left = simpson_rule(a, &m, fa, &flm, fm, ctx);
    let right = simpson_rule(&m, b, fm, &frm, fb, ctx);
    let sum = left.add(&right, ctx);
    let delta = sum.sub(whole, ctx);
    let est = delta.abs_f64() / 15.0;
    if est <= tol || depth == 0 {
        *err += est + ctx.ulp() * 8.0;
        // Richardson extrapolation.
        return sum.add(&delta.scale(&HPReal::from_f64(1.0 / 15.0, ctx), ctx), ctx);
    }
    let l = adapt(f, a, &m, fa, &flm, fm, &left, tol / 2.0, depth - 1, ctx, err);
    let r = adapt(f, &m, b, fm, &frm, fb, &right, tol / 2.0, depth - 1, ctx, err);
    l.add(&r, ctx)
}
