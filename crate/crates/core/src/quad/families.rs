//! Internal evaluators for the saddle-free integral families.
//!
//! Everything here reduces to moments `∫ tᶻ e^{−λt−γt²} dt` over a truncated
//! range, which in turn reduce to the kernel `h(z, w)` after splitting the
//! range into intervals short enough that the quadratic factor admits a short
//! Taylor expansion. The splitting scale is chosen from the decay rate, so
//! the number of intervals and Taylor terms is polynomial in `log(1/tol)`
//! regardless of the parameter regime.
//!
//! All evaluators return one value per derivative order `l = 0..=jmax`
//! (callers always need the whole family) together with an absolute error
//! bound for the batch.

use crate::arith::{binom_int, e2pi, HPComplex, HPReal, PrecCtx};
use crate::euler::power_tail_family;
use crate::quad::hkernel::h_family;

/// Family of values plus an absolute error bound valid for every member.
pub(crate) struct Family {
    pub vals: Vec<HPComplex>,
    pub err: f64,
}

impl Family {
    fn zeros(jmax: usize, ctx: &PrecCtx, err: f64) -> Family {
        Family {
            vals: vec![HPComplex::zero(ctx); jmax + 1],
            err,
        }
    }
}

fn digits(tol: f64) -> f64 {
    (1.0 / tol.clamp(1e-280, 0.5)).ln()
}

/// Whether a total quadratic phase `q2` is small enough to eliminate by one
/// Taylor expansion: the series needs ~e·q2 terms and cancels e^{q2}, which
/// must fit in the working precision.
fn taylor_gate(q2: f64, d: f64, bits: u32) -> bool {
    let by_prec = ((bits as f64 - 96.0) * std::f64::consts::LN_2 - d).max(40.0);
    q2 <= (3.0 * d + 40.0).min(by_prec)
}

fn taylor_cap(q2: f64, d: f64) -> usize {
    (4.0 * q2 + 2.0 * d + 48.0).ceil() as usize
}

/// Moments `M_z = ∫₀ᵀ tᶻ e^{−λt−γt²} dt`, `z = 0..=zmax`, where `T` is the
/// smaller of `upper` and the point where the integrand magnitude has decayed
/// below `tol`. Requires `Re λ ≥ 0`, `Re γ ≥ 0`, not both zero.
pub(crate) fn decaying_moments(
    zmax: usize,
    lambda: &HPComplex,
    gamma: &HPComplex,
    upper: Option<&HPReal>,
    ctx: &PrecCtx,
    tol: f64,
) -> Family {
    let lr = lambda.re().to_f64();
    let gr = gamma.re().to_f64();
    let g_abs = gamma.abs_f64();
    debug_assert!(lr >= -1e-12 && gr >= -1e-12, "decay requires Re ≥ 0");

    let d0 = digits(tol) + (4.0 * (zmax as f64 + 1.0)).ln() + 4.0;
    // Truncation point: Re(λ)t + Re(γ)t² ≥ d0 + zmax·ln t.
    let solve = |d: f64| -> f64 {
        if gr > 1e-300 {
            (-lr + (lr * lr + 4.0 * gr * d).sqrt()) / (2.0 * gr)
        } else {
            d / lr.max(1e-300)
        }
    };
    let mut t_star = solve(d0);
    t_star = solve(d0 + zmax as f64 * t_star.max(1.0).ln());
    t_star = solve(d0 + zmax as f64 * t_star.max(1.0).ln());

    let mut capped = false;
    let mut t_hp = HPReal::from_f64(t_star, ctx);
    if let Some(u) = upper {
        if u.to_f64() <= t_star {
            t_hp = u.clone();
            t_star = u.to_f64();
            capped = true;
        }
    }
    if !(t_star > 0.0) {
        return Family::zeros(zmax, ctx, tol);
    }

    // Interval count: keep the per-interval quadratic phase below ~2.
    let n_int = ((t_star * (g_abs / 2.0).sqrt()).ceil() as usize).clamp(8, 1 << 16);
    let c = t_hp.div_u(n_int as u64, ctx);
    let lam_c = lambda.scale(&c, ctx);
    let gam_c2 = gamma.scale(&c.mul(&c, ctx), ctx);
    let g_abs_c = gam_c2.abs_f64();

    let mut acc = vec![HPComplex::zero(ctx); zmax + 1];
    let mut err = if capped { 0.0 } else { tol * 0.5 };
    let lr_c = lam_c.re().to_f64();
    let gr_c = gam_c2.re().to_f64();

    for n in 0..n_int {
        let nf = n as f64;
        let banked = lr_c * nf + gr_c * nf * nf;
        if banked > d0 + 30.0 {
            break;
        }
        // e^{−λ'n − γ'n²}
        let n_hp = HPReal::from_u64(n as u64, ctx);
        let n2_hp = HPReal::from_u64((n * n) as u64, ctx);
        let arg = lam_c
            .scale(&n_hp, ctx)
            .add(&gam_c2.scale(&n2_hp, ctx), ctx)
            .neg(ctx);
        let pre = arg.exp(ctx);

        // Taylor order for e^{−γ'v²} on [0,1].
        let target = (tol * banked.exp() / (8.0 * n_int as f64)).clamp(1e-280, 0.5);
        let mut r_n = 0usize;
        let mut term = 1.0f64;
        while term > target && r_n < 256 {
            r_n += 1;
            term *= g_abs_c / r_n as f64;
        }
        err += term * banked.min(700.0).exp().recip() * 2.0;

        let a_n = zmax + 2 * r_n;
        let eta = lam_c.add(&gam_c2.scale_u(2 * n as u64, ctx), ctx).neg(ctx);
        let fam = h_family(a_n, &eta, None, ctx);

        // G_s = Σ_r (−γ')^r/r! · h(s+2r)
        let mut g = vec![HPComplex::zero(ctx); zmax + 1];
        let mut tay = HPComplex::one(ctx);
        for r in 0..=r_n {
            if r > 0 {
                tay = tay.mul(&gam_c2, ctx).neg(ctx).unscale_u(r as u64, ctx);
            }
            for s in 0..=zmax {
                g[s] = g[s].add(&tay.mul(&fam[s + 2 * r], ctx), ctx);
            }
        }

        // B_z = Σ_s C(z,s) n^{z−s} G_s, then fold the interval prefactor.
        let mut npow = vec![HPReal::one(ctx)];
        for d in 1..=zmax {
            npow.push(if n == 0 {
                HPReal::zero(ctx)
            } else {
                npow[d - 1].mul(&n_hp, ctx)
            });
        }
        for z in 0..=zmax {
            let mut b_z = HPComplex::zero(ctx);
            for s in 0..=z {
                let cf = HPReal::from_integer(&binom_int(z as u64, s as u64), ctx)
                    .mul(&npow[z - s], ctx);
                b_z = b_z.add(&g[s].scale(&cf, ctx), ctx);
            }
            acc[z] = acc[z].add(&pre.mul(&b_z, ctx), ctx);
        }
    }

    // Scale back: M_z = c^{z+1} · acc_z.
    let mut cpow = c.clone();
    let mut vals = Vec::with_capacity(zmax + 1);
    for z in 0..=zmax {
        vals.push(acc[z].scale(&cpow, ctx));
        if z < zmax {
            cpow = cpow.mul(&c, ctx);
        }
    }
    err += ctx.ulp() * 64.0 * (1.0 + t_star.powi(zmax as i32 + 1).abs());
    Family { vals, err }
}

/// `Ĩ_{C7}(K, l; w, b) = e^{−πi(l+1)/4} K^{−l} ∫₀^{√2 K} s^l
/// e^{−√2πw(1−i)s − 2πbs²} ds` for `l = 0..=jmax`.
pub(crate) fn i_c7_family(
    kk: u64,
    jmax: usize,
    w: &HPReal,
    b: &HPReal,
    ctx: &PrecCtx,
    tol: f64,
) -> Family {
    let s2pi = ctx.pi().mul(&HPReal::from_u64(2, ctx).sqrt(ctx), ctx);
    let lw = w.mul(&s2pi, ctx);
    let lambda = HPComplex::new(lw.clone(), lw.neg(ctx));
    let gamma = HPComplex::from_real(&ctx.two_pi().mul(b, ctx), ctx);
    let upper = HPReal::from_u64(2, ctx)
        .sqrt(ctx)
        .mul(&HPReal::from_u64(kk, ctx), ctx);
    let m = decaying_moments(jmax, &lambda, &gamma, Some(&upper), ctx, tol);
    rotate_and_normalize(kk, jmax, m, ctx)
}

/// `Ĩ_{C9}(K, l; w, b)` via rotation of the ray to the `e^{−πi/4}` direction
/// (exact by Cauchy's theorem; the integrand then decays like a Gaussian).
pub(crate) fn i_c9_family(
    kk: u64,
    jmax: usize,
    w: &HPReal,
    b: &HPReal,
    ctx: &PrecCtx,
    tol: f64,
) -> Family {
    let s2pi = ctx.pi().mul(&HPReal::from_u64(2, ctx).sqrt(ctx), ctx);
    let lw = w.mul(&s2pi, ctx);
    let lambda = HPComplex::new(lw.clone(), lw.neg(ctx));
    let gamma = HPComplex::from_real(&ctx.two_pi().mul(b, ctx), ctx);
    let m = decaying_moments(jmax, &lambda, &gamma, None, ctx, tol);
    rotate_and_normalize(kk, jmax, m, ctx)
}

fn rotate_and_normalize(kk: u64, jmax: usize, m: Family, ctx: &PrecCtx) -> Family {
    // e^{−πi(l+1)/4} prefactors and the K^{−l} normalization.
    let rot = e2pi(&HPReal::from_f64(-0.125, ctx), ctx);
    let inv_k = HPReal::from_u64(kk, ctx).recip(ctx);
    let mut phase = rot.clone();
    let mut kpow = HPReal::one(ctx);
    let mut vals = Vec::with_capacity(jmax + 1);
    for l in 0..=jmax {
        vals.push(m.vals[l].mul(&phase, ctx).scale(&kpow, ctx));
        if l < jmax {
            phase = phase.mul(&rot, ctx);
            kpow = kpow.mul(&inv_k, ctx);
        }
    }
    Family { vals, err: m.err }
}

/// `Ĩ_{C9}(K, l; W, −2ib) = K^{−l} ∫₀^∞ t^l e^{−2πWt − 4πbt²} dt` for a
/// complex `W` with `Re W > 0`.
pub(crate) fn i_c9rot_family(
    kk: u64,
    jmax: usize,
    w_arg: &HPComplex,
    b: &HPReal,
    ctx: &PrecCtx,
    tol: f64,
) -> Family {
    let lambda = w_arg.scale(&ctx.two_pi(), ctx);
    let gamma = HPComplex::from_real(&ctx.two_pi().mul(b, ctx).mul_2exp(1, ctx), ctx);
    let m = decaying_moments(jmax, &lambda, &gamma, None, ctx, tol);
    normalize_by_k(kk, jmax, m, ctx)
}

fn normalize_by_k(kk: u64, jmax: usize, m: Family, ctx: &PrecCtx) -> Family {
    let inv_k = HPReal::from_u64(kk, ctx).recip(ctx);
    let mut kpow = HPReal::one(ctx);
    let mut vals = Vec::with_capacity(jmax + 1);
    for l in 0..=jmax {
        vals.push(m.vals[l].scale(&kpow, ctx));
        if l < jmax {
            kpow = kpow.mul(&inv_k, ctx);
        }
    }
    Family { vals, err: m.err }
}

/// `Ĩ_{C̄1}(K, l; w, b)`: the conjugate right-edge contour. The prefactor
/// `e^{−2πwK}` usually kills it outright; otherwise the integrand decays at
/// rate `4πbK ≥ 2π` per unit.
pub(crate) fn i_c1bar_family(
    kk: u64,
    jmax: usize,
    w: &HPReal,
    b: &HPReal,
    ctx: &PrecCtx,
    tol: f64,
) -> Family {
    let d = digits(tol);
    let k_hp = HPReal::from_u64(kk, ctx);
    let wk2pi = ctx.two_pi().mul(w, ctx).mul(&k_hp, ctx);
    let wk_f = wk2pi.to_f64();
    if wk_f > d + 30.0 {
        return Family::zeros(jmax, ctx, tol);
    }
    // prefactor −i·e^{−2πwK}·e^{−2πibK²}
    let k2 = k_hp.mul(&k_hp, ctx);
    let pref = HPComplex::from_real(&wk2pi.neg(ctx).exp(ctx), ctx)
        .mul(&e2pi(&b.mul(&k2, ctx).neg(ctx), ctx), ctx)
        .mul_i(ctx)
        .neg(ctx);
    let pref_mag = (-wk_f).exp();

    let four_pi_bk = ctx.two_pi().mul(b, ctx).mul(&k_hp, ctx).mul_2exp(1, ctx);
    let lambda = HPComplex::new(four_pi_bk, ctx.two_pi().mul(w, ctx).neg(ctx));
    // Integrand carries e^{+2πibt²}, so γ = −2πib.
    let gamma = HPComplex::new(HPReal::zero(ctx), ctx.two_pi().mul(b, ctx).neg(ctx));
    let tol_m = tol / (pref_mag * 2.0f64.powi(jmax as i32 + 1)).max(1e-280);
    let m = decaying_moments(jmax, &lambda, &gamma, Some(&k_hp), ctx, tol_m);

    // Ĩ_{C̄1}(K,l;w,b) = pref · Σ_s C(l,s)(−i)^s K^{−s} M_s
    let inv_k = k_hp.recip(ctx);
    let mut scaled = Vec::with_capacity(jmax + 1);
    let mut kpow = HPReal::one(ctx);
    for s in 0..=jmax {
        scaled.push(m.vals[s].scale(&kpow, ctx).mul_pow_i(3 * (s as u32 % 4), ctx));
        if s < jmax {
            kpow = kpow.mul(&inv_k, ctx);
        }
    }
    let mut vals = Vec::with_capacity(jmax + 1);
    for l in 0..=jmax {
        let mut sum = HPComplex::zero(ctx);
        for s in 0..=l {
            let cf = HPReal::from_integer(&binom_int(l as u64, s as u64), ctx);
            sum = sum.add(&scaled[s].scale(&cf, ctx), ctx);
        }
        vals.push(pref.mul(&sum, ctx));
    }
    Family {
        vals,
        err: m.err * pref_mag * 2.0f64.powi(jmax as i32 + 1) + tol * 0.25,
    }
}

/// `Ĩ_{C0}(K, l; w, b) = K^{−l} ∫₀^K t^l e^{−2πwt − 2πibt²} dt` for real
/// `w ≥ 0`, `b ≥ 0`. Dispatch: eliminate the quadratic factor by Taylor
/// expansion when `2πbK²` is modest, otherwise split the contour into the
/// `C₇` diagonal minus the `C̄₁` edge.
pub(crate) fn i_c0_decay_family(
    kk: u64,
    jmax: usize,
    w: &HPReal,
    b: &HPReal,
    ctx: &PrecCtx,
    tol: f64,
) -> Family {
    let d = digits(tol);
    let kf = kk as f64;
    let q2_f = 2.0 * std::f64::consts::PI * b.to_f64() * kf * kf;
    if b.is_zero() || taylor_gate(q2_f, d, ctx.bits()) {
        let k_hp = HPReal::from_u64(kk, ctx);
        let wk = ctx.two_pi().mul(w, ctx).mul(&k_hp, ctx).neg(ctx);
        let harg = HPComplex::from_real(&wk, ctx);
        let q2 = ctx
            .two_pi()
            .mul(b, ctx)
            .mul(&k_hp, ctx)
            .mul(&k_hp, ctx);
        let mut r_n = 0usize;
        let mut term = 1.0f64;
        let target = (tol / (8.0 * kf)).clamp(1e-280, 0.5);
        let cap = taylor_cap(q2_f, d);
        while term > target && r_n < cap {
            r_n += 1;
            term *= q2_f / r_n as f64;
        }
        let fam = h_family(jmax + 2 * r_n, &harg, None, ctx);
        let mut vals = vec![HPComplex::zero(ctx); jmax + 1];
        let mut tay = HPComplex::one(ctx);
        for r in 0..=r_n {
            if r > 0 {
                // (−2πibK²)^r / r!
                let f = q2.div_u(r as u64, ctx);
                tay = tay.scale(&f, ctx).mul_i(ctx).neg(ctx);
            }
            for l in 0..=jmax {
                vals[l] = vals[l].add(&tay.mul(&fam[l + 2 * r], ctx), ctx);
            }
        }
        for v in vals.iter_mut() {
            *v = v.scale_u(kk, ctx);
        }
        return Family {
            vals,
            err: term * kf * 2.0 + ctx.ulp() * 32.0 * kf,
        };
    }
    let c7 = i_c7_family(kk, jmax, w, b, ctx, tol / 2.0);
    let c1 = i_c1bar_family(kk, jmax, w, b, ctx, tol / 2.0);
    let vals = (0..=jmax)
        .map(|l| c7.vals[l].sub(&c1.vals[l], ctx))
        .collect();
    Family {
        vals,
        err: c7.err + c1.err,
    }
}

/// Completed-Gaussian integral `I_{C₈}(K, l; a, b)` in closed form, via the
/// self-similarity of the Gaussian: shift to the stationary point and use
/// the central moments `∫ v^m e^{−2πbv²} dv = Γ((m+1)/2)/(2πb)^{(m+1)/2}`
/// for even `m`.
pub(crate) fn c8_gaussian_family(
    kk: u64,
    jmax: usize,
    a: &HPReal,
    b: &HPReal,
    ctx: &PrecCtx,
) -> Family {
    // phase e^{−πi a²/(2b)} = e2pi(−a²/(4b)), reduced exactly.
    let a2_4b = a.mul(a, ctx).div(&b.mul_2exp(2, ctx), ctx);
    let ph = e2pi(&a2_4b.neg(ctx), ctx);
    // μ = a e^{3πi/4} / (2b)
    let rot3 = e2pi(&HPReal::from_f64(0.375, ctx), ctx);
    let mu = rot3.scale(&a.div(&b.mul_2exp(1, ctx), ctx), ctx);
    // g_m = Γ((m+1)/2) (2πb)^{−(m+1)/2} for even m, iterated.
    let gam = ctx.two_pi().mul(b, ctx);
    let mut g = Vec::with_capacity(jmax / 2 + 1);
    g.push(ctx.sqrt_pi().div(&gam.sqrt(ctx), ctx).div(&gam.sqrt(ctx), ctx));
    // Γ(1/2)/γ^{1/2} = √π/√γ ... fix: first entry is √π · γ^{−1/2}
    g[0] = ctx.sqrt_pi().div(&gam.sqrt(ctx), ctx);
    for i in 1..=jmax / 2 {
        let m = 2 * i;
        // Γ((m+1)/2) = Γ((m−1)/2)·(m−1)/2
        let f = HPReal::from_u64((m - 1) as u64, ctx).div(&gam.mul_2exp(1, ctx), ctx);
        let prev = g[i - 1].clone();
        g.push(prev.mul(&f, ctx));
    }
    let rot = e2pi(&HPReal::from_f64(0.125, ctx), ctx); // e^{πi/4}
    let inv_k = HPReal::from_u64(kk, ctx).recip(ctx);
    let mut phase = rot.clone();
    let mut kpow = HPReal::one(ctx);
    let mut vals = Vec::with_capacity(jmax + 1);
    // μ powers
    let mut mupow = vec![HPComplex::one(ctx)];
    for d in 1..=jmax {
        let prev = mupow[d - 1].clone();
        mupow.push(prev.mul(&mu, ctx));
    }
    for l in 0..=jmax {
        let mut sum = HPComplex::zero(ctx);
        let mut m = 0usize;
        while m <= l {
            let cf = HPReal::from_integer(&binom_int(l as u64, m as u64), ctx).mul(&g[m / 2], ctx);
            sum = sum.add(&mupow[l - m].scale(&cf, ctx), ctx);
            m += 2;
        }
        vals.push(sum.mul(&ph, ctx).mul(&phase, ctx).scale(&kpow, ctx));
        if l < jmax {
            phase = phase.mul(&rot, ctx);
            kpow = kpow.mul(&inv_k, ctx);
        }
    }
    Family {
        vals,
        err: ctx.ulp() * 64.0 / b.to_f64().max(1e-280).sqrt(),
    }
}

/// Universal evaluator for the oscillatory base integral
/// `I_{C₀}(K, l; a, b) = K^{−l} ∫₀^K t^l e^{2πi(at + bt²)} dt`,
/// real `a`, real `b ≥ 0`, for `l = 0..=jmax`.
///
/// Dispatch: plain Taylor elimination while the total quadratic phase is
/// modest; otherwise Cauchy pushes depending on whether the phase derivative
/// `a + 2bt` keeps a sign on `[0, K]` (no stationary point) or vanishes
/// inside (stationary-point extraction through the completed Gaussian).
pub(crate) fn i_c0_family(
    kk: u64,
    jmax: usize,
    a: &HPReal,
    b: &HPReal,
    ctx: &PrecCtx,
    tol: f64,
) -> Family {
    let d = digits(tol);
    let kf = kk as f64;
    let k_hp = HPReal::from_u64(kk, ctx);
    let q2_f = 2.0 * std::f64::consts::PI * b.to_f64().abs() * kf * kf;

    if b.is_zero() || taylor_gate(q2_f, d, ctx.bits()) {
        // K · Σ_r (2πibK²)^r/r! · h(l+2r, 2πiaK)
        let ak = a.mul(&k_hp, ctx);
        let harg = HPComplex::new(HPReal::zero(ctx), ctx.two_pi().mul(&ak, ctx));
        let hint = e2pi(&ak, ctx);
        let q2 = ctx.two_pi().mul(b, ctx).mul(&k_hp, ctx).mul(&k_hp, ctx);
        let mut r_n = 0usize;
        let mut term = 1.0f64;
        let target = (tol / (8.0 * kf)).clamp(1e-280, 0.5);
        let cap = taylor_cap(q2_f, d);
        while term > target && r_n < cap {
            r_n += 1;
            term *= q2_f / r_n as f64;
        }
        let fam = h_family(jmax + 2 * r_n, &harg, Some(&hint), ctx);
        let mut vals = vec![HPComplex::zero(ctx); jmax + 1];
        let mut tay = HPComplex::one(ctx);
        for r in 0..=r_n {
            if r > 0 {
                let f = q2.div_u(r as u64, ctx);
                tay = tay.scale(&f, ctx).mul_i(ctx);
            }
            for l in 0..=jmax {
                vals[l] = vals[l].add(&tay.mul(&fam[l + 2 * r], ctx), ctx);
            }
        }
        for v in vals.iter_mut() {
            *v = v.scale_u(kk, ctx);
        }
        return Family {
            vals,
            err: term * kf * 2.0 + ctx.ulp() * 32.0 * kf,
        };
    }

    let two_bk = b.mul(&k_hp, ctx).mul_2exp(1, ctx);
    let a_plus_2bk = a.add(&two_bk, ctx);

    if a.to_f64() > 0.0 && !a.is_sign_negative() && !a.is_zero() {
        return i_c0_rising(kk, jmax, a, b, &a_plus_2bk, ctx, tol);
    }
    if a_plus_2bk.to_f64() <= 0.0 && a_plus_2bk.is_sign_negative() {
        // Reflect t ← K − t; the reflected linear coefficient is positive.
        let a2 = a_plus_2bk.neg(ctx);
        let inner = i_c0_family(kk, jmax, &a2, b, ctx, tol / 2.0f64.powi(jmax as i32 + 1));
        let phase = e2pi(&a.mul(&k_hp, ctx).add(&b.mul(&k_hp, ctx).mul(&k_hp, ctx), ctx), ctx);
        let mut vals = Vec::with_capacity(jmax + 1);
        for l in 0..=jmax {
            let mut sum = HPComplex::zero(ctx);
            for t in 0..=l {
                let cf = HPReal::from_integer(&binom_int(l as u64, t as u64), ctx);
                let term = inner.vals[t].scale(&cf, ctx);
                sum = if t % 2 == 1 {
                    sum.sub(&term, ctx)
                } else {
                    sum.add(&term, ctx)
                };
            }
            vals.push(phase.mul(&sum, ctx));
        }
        return Family {
            vals,
            err: inner.err * 2.0f64.powi(jmax as i32) + tol * 0.1,
        };
    }

    // Stationary point inside [0, K]: a ≤ 0 ≤ a + 2bK.
    i_c0_saddle(kk, jmax, a, b, &a_plus_2bk, ctx, tol)
}

/// No-stationary-point case with `a > 0`: push the contour to `+i∞`.
/// `I_{C₀} = i^{l+1} Ĩ_{C₉}(K,l;a,b) − i e(aK+bK²) Σ_s i^s C(l,s) Ĩ_{C₀}(K,s;a+2bK,b)`.
fn i_c0_rising(
    kk: u64,
    jmax: usize,
    a: &HPReal,
    b: &HPReal,
    a_plus_2bk: &HPReal,
    ctx: &PrecCtx,
    tol: f64,
) -> Family {
    let split = tol / (2.0 * 2.0f64.powi(jmax as i32 + 1));
    let ic9 = i_c9_family(kk, jmax, a, b, ctx, split);
    let dec = i_c0_decay_family(kk, jmax, a_plus_2bk, b, ctx, split);
    let k_hp = HPReal::from_u64(kk, ctx);
    let phase = e2pi(&a.mul(&k_hp, ctx).add(&b.mul(&k_hp, ctx).mul(&k_hp, ctx), ctx), ctx);
    let mut vals = Vec::with_capacity(jmax + 1);
    for l in 0..=jmax {
        let mut edge = HPComplex::zero(ctx);
        for s in 0..=l {
            let cf = HPReal::from_integer(&binom_int(l as u64, s as u64), ctx);
            edge = edge.add(&dec.vals[s].scale(&cf, ctx).mul_pow_i(s as u32 % 4, ctx), ctx);
        }
        let edge = phase.mul(&edge, ctx).mul_i(ctx);
        vals.push(ic9.vals[l].mul_pow_i((l as u32 + 1) % 4, ctx).sub(&edge, ctx));
    }
    Family {
        vals,
        err: (ic9.err + dec.err) * 2.0f64.powi(jmax as i32 + 1),
    }
}

/// Stationary-point case: extract the completed Gaussian along the `e^{πi/4}`
/// line and subtract the three saddle-free complements.
fn i_c0_saddle(
    kk: u64,
    jmax: usize,
    a: &HPReal,
    b: &HPReal,
    a_plus_2bk: &HPReal,
    ctx: &PrecCtx,
    tol: f64,
) -> Family {
    let split = tol / (4.0 * 2.0f64.powi(jmax as i32 + 2));
    let k_hp = HPReal::from_u64(kk, ctx);
    let om = a_plus_2bk; // = a + 2bK ≥ 0

    let c8 = c8_gaussian_family(kk, jmax, a, b, ctx);
    let c5 = i_c9_family(kk, jmax, &a.neg(ctx), b, ctx, split);
    // C6 complement: Ĩ_{C9}(K, t; (1−i)a + 4bK, −2ib)
    let w_rot = HPComplex::new(
        a.add(&b.mul(&k_hp, ctx).mul_2exp(2, ctx), ctx),
        a.neg(ctx),
    );
    let rotf = i_c9rot_family(kk, jmax, &w_rot, b, ctx, split);
    let dec = i_c0_decay_family(kk, jmax, om, b, ctx, split);

    let ak = a.mul(&k_hp, ctx);
    let phase_ak = e2pi(&ak, ctx);
    let phase_abk = e2pi(&ak.add(&b.mul(&k_hp, ctx).mul(&k_hp, ctx), ctx), ctx);
    // e^{−2π(a+2bK)K}
    let decay = ctx.two_pi().mul(om, ctx).mul(&k_hp, ctx).neg(ctx).exp(ctx);
    let rot8 = e2pi(&HPReal::from_f64(0.125, ctx), ctx); // e^{πi/4}
    let sqrt2 = HPReal::from_u64(2, ctx).sqrt(ctx);

    let mut vals = Vec::with_capacity(jmax + 1);
    let mut rot_l = rot8.clone(); // e^{πi(l+1)/4}
    let mut two_pow = sqrt2.clone(); // 2^{(l+1)/2}
    for l in 0..=jmax {
        let mut c6 = HPComplex::zero(ctx);
        let mut c1 = HPComplex::zero(ctx);
        for t in 0..=l {
            let cf = HPReal::from_integer(&binom_int(l as u64, t as u64), ctx);
            c6 = c6.add(&rotf.vals[t].scale(&cf, ctx), ctx);
            c1 = c1.add(&dec.vals[t].scale(&cf, ctx).mul_pow_i(t as u32 % 4, ctx), ctx);
        }
        let c6 = c6
            .mul(&rot_l, ctx)
            .mul(&phase_ak, ctx)
            .scale(&decay, ctx)
            .scale(&two_pow, ctx);
        let c1 = phase_abk.mul(&c1, ctx).mul_i(ctx);
        let c5_term = c5.vals[l].mul_pow_i((l as u32 + 1) % 4, ctx);
        let c5_term = if l % 2 == 1 { c5_term.neg(ctx) } else { c5_term };
        vals.push(
            c8.vals[l]
                .sub(&c5_term, ctx)
                .sub(&c6, ctx)
                .sub(&c1, ctx),
        );
        if l < jmax {
            rot_l = rot_l.mul(&rot8, ctx);
            two_pow = two_pow.mul(&sqrt2, ctx);
        }
    }
    Family {
        vals,
        err: (c8.err + c5.err + rotf.err + dec.err) * 2.0f64.powi(jmax as i32 + 2),
    }
}

/// The kernel-weighted family
/// `J(K, l; M, w, b) = K^{−l} ∫₀^K t^l e^{−2πwt−2πibt²}
/// (1 − e^{−2πMt})/(e^{2πt} − 1) dt` for `l = 0..=jmax`.
///
/// The geometric kernel is unfolded into `Σ_{m=1}^{M} e^{−2πm t}`; on the
/// `[0,1)` interval the `m`-tail is summed analytically (explicit
/// antiderivative plus an Euler–Maclaurin power tail), elsewhere the
/// exponential decay in `m·n` truncates the sum after a few terms.
pub(crate) fn j_family(
    kk: u64,
    jmax: usize,
    m_total: &HPReal,
    w: &HPReal,
    b: &HPReal,
    ctx: &PrecCtx,
    tol: f64,
) -> Family {
    let mf = m_total.to_f64();
    if !(mf >= 1.0) {
        return Family::zeros(jmax, ctx, 0.0);
    }
    let m_int: u64 = if mf < 9.0e18 {
        m_total.to_u64_floor().unwrap_or(u64::MAX)
    } else {
        u64::MAX
    };
    let d = digits(tol) + (4.0 * (jmax as f64 + 1.0)).ln() + 4.0;
    let wf = w.to_f64();
    let bf = b.to_f64();
    let two_pi_f = 2.0 * std::f64::consts::PI;

    let t_cap = ((d / (two_pi_f * (1.0 + wf))).ceil() as u64).clamp(1, kk);
    let mut err = (-(two_pi_f * (1.0 + wf) * t_cap as f64)).exp() * 0.2;

    let b2pi = ctx.two_pi().mul(b, ctx);
    let e_m2pi = ctx.two_pi().neg(ctx).exp(ctx); // e^{−2π}
    let mut vals = vec![HPComplex::zero(ctx); jmax + 1];

    for n in 0..t_cap {
        let nf = n as f64;
        let banked = two_pi_f * (1.0 + wf) * nf;
        // Taylor order for e^{−2πib u²} on the shifted unit interval.
        let target = (tol * banked.min(700.0).exp() / (8.0 * t_cap as f64)).clamp(1e-280, 0.5);
        let mut r_n = 0usize;
        let mut term = 1.0f64;
        while term > target && r_n < 256 {
            r_n += 1;
            term *= two_pi_f * bf / r_n as f64;
        }
        err += 2.0 * term * (-banked.min(700.0)).exp();
        let a_n = jmax + 2 * r_n;

        // Accumulate S_z = Σ_m (m-weight)·h(z, −2π(m + w + 2ibn)).
        let mut s = vec![HPComplex::zero(ctx); a_n + 1];
        if n == 0 {
            let m_star = ((a_n as f64 - wf).ceil().max(1.0)) as u64;
            let head_end = (m_star - 1).min(m_int);
            for m in 1..=head_end {
                let c_m = HPReal::from_u64(m, ctx).add(w, ctx);
                let harg =
                    HPComplex::from_real(&ctx.two_pi().mul(&c_m, ctx).neg(ctx), ctx);
                let fam = h_family(a_n, &harg, None, ctx);
                for z in 0..=a_n {
                    s[z] = s[z].add(&fam[z], ctx);
                }
            }
            if m_int >= m_star {
                // Explicit-antiderivative tail: exponential part E_v, power
                // part via the Euler–Maclaurin tail sum.
                let lp = (d / two_pi_f).ceil() as u64 + 2;
                let p1_end = (m_star + lp).min(m_int);
                let mut e_v = vec![HPReal::zero(ctx); a_n + 2];
                let mut ebase = ctx
                    .two_pi()
                    .mul(&HPReal::from_u64(m_star, ctx).add(w, ctx), ctx)
                    .neg(ctx)
                    .exp(ctx);
                for m in m_star..=p1_end {
                    let c_m = HPReal::from_u64(m, ctx).add(w, ctx);
                    let inv = ctx.two_pi().mul(&c_m, ctx).recip(ctx);
                    let mut pw = inv.clone();
                    for v in 1..=a_n + 1 {
                        e_v[v] = e_v[v].add(&ebase.mul(&pw, ctx), ctx);
                        if v <= a_n {
                            pw = pw.mul(&inv, ctx);
                        }
                    }
                    ebase = ebase.mul(&e_m2pi, ctx);
                }
                err += 2.0 * (a_n as f64 + 1.0)
                    * (-(two_pi_f * (p1_end as f64 + 1.0 + wf))).min(-1.0).exp();

                let (pt, pt_err) =
                    power_tail_family(m_star, m_total, a_n, w, ctx, tol / 8.0);
                err += pt_err;

                let inv_2pi = ctx.two_pi().recip(ctx);
                let mut fact = HPReal::one(ctx); // α!
                let mut tp = inv_2pi.clone(); // (2π)^{−α−1}
                for alpha in 0..=a_n {
                    if alpha > 0 {
                        fact = fact.mul_u(alpha as u64, ctx);
                        tp = tp.mul(&inv_2pi, ctx);
                    }
                    // −Σ_v ff(α,v)·E_v + α!·(2π)^{−α−1}·pt[α]
                    let mut ex = HPReal::zero(ctx);
                    let mut ff = HPReal::one(ctx);
                    for v in 1..=alpha + 1 {
                        ex = ex.add(&ff.mul(&e_v[v], ctx), ctx);
                        if v <= alpha {
                            ff = ff.mul_u((alpha + 1 - v) as u64, ctx);
                        }
                    }
                    let tail = fact.mul(&tp, ctx).mul(&pt[alpha], ctx).sub(&ex, ctx);
                    s[alpha] = s[alpha].add(&HPComplex::from_real(&tail, ctx), ctx);
                }
            }
        } else {
            let need = ((d - two_pi_f * wf * nf) / (two_pi_f * nf)).ceil();
            if need < 1.0 {
                continue;
            }
            let m_hi = (need as u64).min(m_int);
            let emn = e_m2pi.powi(n, ctx);
            let mut acc_em = emn.clone();
            let four_pi_bn = b2pi.mul_u(2 * n, ctx);
            for m in 1..=m_hi {
                let c_m = HPReal::from_u64(m, ctx).add(w, ctx);
                let harg = HPComplex::new(
                    ctx.two_pi().mul(&c_m, ctx).neg(ctx),
                    four_pi_bn.neg(ctx),
                );
                let fam = h_family(a_n, &harg, None, ctx);
                for z in 0..=a_n {
                    s[z] = s[z].add(&fam[z].scale(&acc_em, ctx), ctx);
                }
                acc_em = acc_em.mul(&emn, ctx);
            }
        }

        // Fold the Taylor expansion and the (n+u)^l binomial.
        let pre = if n == 0 {
            HPComplex::one(ctx)
        } else {
            let n_hp = HPReal::from_u64(n, ctx);
            let expw = ctx.two_pi().mul(w, ctx).mul(&n_hp, ctx).neg(ctx).exp(ctx);
            e2pi(&b.mul(&n_hp, ctx).mul(&n_hp, ctx).neg(ctx), ctx).scale(&expw, ctx)
        };
        let mut g = vec![HPComplex::zero(ctx); jmax + 1];
        let mut tay = HPComplex::one(ctx);
        for r in 0..=r_n {
            if r > 0 {
                let f = b2pi.div_u(r as u64, ctx);
                tay = tay.scale(&f, ctx).mul_i(ctx).neg(ctx);
            }
            for q in 0..=jmax {
                g[q] = g[q].add(&tay.mul(&s[q + 2 * r], ctx), ctx);
            }
        }
        let n_hp = HPReal::from_u64(n, ctx);
        let mut npow = vec![HPReal::one(ctx)];
        for dd in 1..=jmax {
            npow.push(if n == 0 {
                HPReal::zero(ctx)
            } else {
                npow[dd - 1].mul(&n_hp, ctx)
            });
        }
        for l in 0..=jmax {
            let mut b_l = HPComplex::zero(ctx);
            for q in 0..=l {
                let cf =
                    HPReal::from_integer(&binom_int(l as u64, q as u64), ctx).mul(&npow[l - q], ctx);
                b_l = b_l.add(&g[q].scale(&cf, ctx), ctx);
            }
            vals[l] = vals[l].add(&pre.mul(&b_l, ctx), ctx);
        }
    }

    let inv_k = HPReal::from_u64(kk, ctx).recip(ctx);
    let mut kpow = HPReal::one(ctx);
    for (l, v) in vals.iter_mut().enumerate() {
        if l > 0 {
            kpow = kpow.mul(&inv_k, ctx);
            *v = v.scale(&kpow, ctx);
        }
    }
    err += ctx.ulp() * 256.0;
    Family { vals, err }
}
