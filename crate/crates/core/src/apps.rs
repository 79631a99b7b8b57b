//! Applications built on the theta evaluator: the inverse-power sums
//! `G(K, j; a, b) = Σ_{k=1}^{K} k^{−j} e(ak + bk²)` and the counter for
//! Waring-type congruence systems.

use rug::Rational;

use crate::arith::{binom_int, e2pi, nu, HPComplex, HPReal, EPS_MAX};
use crate::theta::{theta_linear_combination, theta_sum, EvalOptions};
use crate::{Error, Result};

/// Diophantine system: count tuples `0 ≤ k_r ≤ K` with
/// `Σ_{r=1}^{s}(α_r k_r + β_r k_r²) − Σ_{r=s+1}^{s+t}(α_r k_r + β_r k_r²)
/// ≡ 0 (mod M)`.
#[derive(Clone, Debug)]
pub struct DioSystem {
    pub m: u64,
    pub k: u64,
    pub s: u32,
    pub t: u32,
    pub alphas: Vec<i64>,
    pub betas: Vec<i64>,
}

impl DioSystem {
    pub fn validate(&self) -> Result<()> {
        let n = self.s as usize + self.t as usize;
        if n == 0 {
            return Err(Error::InvalidArgument("system requires s + t ≥ 1".into()));
        }
        if self.alphas.len() != n || self.betas.len() != n {
            return Err(Error::InvalidArgument(format!(
                "coefficient vectors must have length s + t = {n}, got {} and {}",
                self.alphas.len(),
                self.betas.len()
            )));
        }
        if self.m == 0 || self.k == 0 {
            return Err(Error::InvalidArgument("M and K must be positive".into()));
        }
        Ok(())
    }
}

/// Evaluates `G(K, j; a, b)` by dyadic blocks: each block `[N, 2N)` with
/// `16 | N` splits into 16 sub-blocks on which `k^{−j}` expands in a
/// geometrically decaying binomial series, turning the block into a single
/// linear combination of quadratic sums. A short head (`k < 64`) and up to
/// 31 alignment terms per block are summed directly.
pub fn g_sum(
    k: u64,
    j: u32,
    a: &HPReal,
    b: &HPReal,
    eps: f64,
    opts: &EvalOptions,
) -> Result<(HPComplex, f64)> {
    if !(eps > 0.0 && eps < EPS_MAX) {
        return Err(Error::EpsOutOfRange(eps));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("K must be positive".into()));
    }
    if a.is_sign_negative() || !a.lt_f64(1.0) || b.is_sign_negative() || !b.lt_f64(1.0) {
        return Err(Error::InvalidArgument("a, b must lie in [0, 1)".into()));
    }
    let ctx = opts.context(k, j, eps)?;
    let mut total = HPComplex::zero(&ctx);
    let mut err = 0.0f64;

    let direct_term = |kk: u64, total: &mut HPComplex, err: &mut f64| {
        let kf = HPReal::from_u64(kk, &ctx);
        let phase = a.mul(&kf, &ctx).add(&b.mul(&kf, &ctx).mul(&kf, &ctx), &ctx);
        let w = kf.recip(&ctx).powi(j as u64, &ctx);
        *total = total.add(&e2pi(&phase, &ctx).scale(&w, &ctx), &ctx);
        *err += 8.0 * ctx.ulp();
    };

    // Collect dyadic blocks from the top; peel alignment terms directly.
    let mut blocks: Vec<u64> = Vec::new(); // block start N; block is [N, 2N−1]
    let mut hi = k;
    while hi >= 64 {
        let d = (hi - 31) % 32;
        for kk in (hi - d + 1)..=hi {
            direct_term(kk, &mut total, &mut err);
        }
        hi -= d;
        let n = (hi + 1) / 2;
        blocks.push(n);
        hi = n - 1;
    }
    for kk in 1..=hi {
        direct_term(kk, &mut total, &mut err);
    }

    let n_calls = (blocks.len() * 16).max(1) as f64;
    let eps_block = (eps / (64.0 * n_calls)).clamp(1e-250, 0.25);
    let l_cap = (10.0 * ((k as f64) / eps).ln()).ceil() as usize;

    for n in blocks {
        let len = n / 16; // sub-block length; k_f = len − 1
        let kf_sub = len - 1;
        for m in 0..16u64 {
            let n_m = n + m * len;
            let n_m_hp = HPReal::from_u64(n_m, &ctx);
            let a_m = a
                .add(&b.mul(&n_m_hp, &ctx).mul_2exp(1, &ctx), &ctx)
                .frac1(&ctx);
            let c_m = e2pi(
                &a.mul(&n_m_hp, &ctx)
                    .add(&b.mul(&n_m_hp, &ctx).mul(&n_m_hp, &ctx), &ctx),
                &ctx,
            );
            // z_l = (−1)^l C(j+l−1, l) (k_f/N_m)^l, truncated adaptively.
            let (z, zmax, trunc) = block_coefficients(j, kf_sub, n_m, eps_block, l_cap, &ctx);
            let rep = theta_linear_combination(kf_sub, &z, &a_m, b, eps_block, opts)?;
            let weight = n_m_hp.recip(&ctx).powi(j as u64, &ctx);
            let scaled = rep
                .value
                .mul(&c_m, &ctx)
                .scale(&weight, &ctx)
                .scale(&HPReal::from_f64(zmax, &ctx), &ctx);
            total = total.add(&scaled, &ctx);
            let w_f = weight.to_f64().abs();
            err += (rep.err_bound * zmax + trunc) * w_f + 8.0 * ctx.ulp();
        }
    }
    Ok((total, err))
}

/// Builds the (scaled) coefficient vector for one sub-block; returns the
/// vector, the scale factor pulled out so that `|z_l| ≤ 1`, and the
/// truncation-error bound.
fn block_coefficients(
    j: u32,
    kf_sub: u64,
    n_m: u64,
    tol: f64,
    l_cap: usize,
    ctx: &crate::arith::PrecCtx,
) -> (Vec<HPComplex>, f64, f64) {
    if j == 0 {
        return (vec![HPComplex::one(ctx)], 1.0, 0.0);
    }
    let ratio = HPReal::from_u64(kf_sub, ctx).div(&HPReal::from_u64(n_m, ctx), ctx);
    let ratio_f = ratio.to_f64();
    let mag = kf_sub as f64 + 1.0;
    let mut zs: Vec<HPReal> = Vec::new();
    let mut l = 0usize;
    let mut trunc;
    loop {
        // z_l = (−1)^l C(j+l−1, l)·(k_f/N_m)^l
        let coeff = HPReal::from_integer(&binom_int(j as u64 + l as u64 - 1, l as u64), ctx)
            .mul(&ratio.powi(l as u64, ctx), ctx);
        let coeff = if l % 2 == 1 { coeff.neg(ctx) } else { coeff };
        zs.push(coeff);
        // Geometric tail bound, valid once the term ratio has dropped
        // below 1/8 (from l ≥ j − 3 on, since k_f/N_m ≤ 1/16).
        let next = binom_f64(j as u64 + l as u64, l as u64 + 1) * ratio_f.powi(l as i32 + 1) * mag;
        trunc = 1.2 * next / (1.0 - 0.13);
        l += 1;
        if (trunc < tol && l + 3 > j as usize) || l > l_cap {
            break;
        }
    }
    let zmax = zs.iter().map(|z| z.to_f64().abs()).fold(1.0f64, f64::max);
    let inv = HPReal::from_f64(zmax, ctx).recip(ctx);
    let z = zs
        .iter()
        .map(|v| HPComplex::from_real(&v.mul(&inv, ctx), ctx))
        .collect();
    (z, zmax, trunc * 2.0)
}

fn binom_f64(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut acc = 1.0f64;
    for i in 0..k {
        acc *= (n - i) as f64 / (k - i) as f64;
    }
    acc
}

/// Exact count of solutions of the congruence system, via the character-sum
/// average `(1/M) Σ_{l=0}^{M−1} Π_r F(K,0;α_r l/M, β_r l/M) Π_r conj(F(…))`
/// rounded to the nearest integer. Errors out rather than mis-round if the
/// accumulated error bound reaches 1/2.
pub fn diophantine_count(sys: &DioSystem, eps: f64, opts: &EvalOptions) -> Result<u64> {
    sys.validate()?;
    let n = sys.s as usize + sys.t as usize;
    let kp1 = sys.k as f64 + 1.0;
    // Per-factor evaluation target small enough that the rounded average is
    // exact; the reported bounds are re-checked below.
    let cap = 1.0 / (4.0 * sys.m as f64 * kp1.powi(n as i32 - 1));
    let slack = 1e4 * nu(sys.k, 0, 1e-6).powi(3) * n as f64 * sys.m as f64;
    let eps_term = (cap / slack).min(eps).clamp(1e-240, EPS_MAX * 0.99);
    let ctx = opts.context(sys.k, 0, eps_term)?;

    let mut total = HPComplex::zero(&ctx);
    let mut err_total = 0.0f64;
    for l in 0..sys.m {
        let mut prod = HPComplex::one(&ctx);
        let mut mags: Vec<f64> = Vec::with_capacity(n);
        let mut errs: Vec<f64> = Vec::with_capacity(n);
        for r in 0..n {
            let ar = reduced_fraction(sys.alphas[r], l, sys.m, &ctx);
            let br = reduced_fraction(sys.betas[r], l, sys.m, &ctx);
            let rep = theta_sum(sys.k, 0, &ar, &br, eps_term, opts)?;
            let f = if (r as u32) < sys.s {
                rep.value
            } else {
                rep.value.conj(&ctx)
            };
            mags.push(f.abs_f64());
            errs.push(rep.err_bound);
            prod = prod.mul(&f, &ctx);
        }
        if l == 0 {
            // The trivial character contributes exactly (K+1)^{s+t}.
            let want = kp1.powi(n as i32);
            debug_assert!(
                (prod.re().to_f64() - want).abs() <= want * 1e-6 + errs.iter().sum::<f64>(),
                "l = 0 term should be (K+1)^(s+t)"
            );
        }
        // Product error: Σ_r e_r Π_{r'≠r}(|v|+e).
        let mut perr = 0.0;
        for r in 0..n {
            let mut p = errs[r];
            for (rr, m) in mags.iter().enumerate() {
                if rr != r {
                    p *= m + errs[rr];
                }
            }
            perr += p;
        }
        err_total += perr;
        total = total.add(&prod, &ctx);
    }
    let m_hp = HPReal::from_u64(sys.m, &ctx);
    let avg = total.unscale(&m_hp, &ctx);
    let err_avg = err_total / sys.m as f64 + 64.0 * ctx.ulp() * kp1.powi(n as i32);
    if err_avg >= 0.5 {
        return Err(Error::InsufficientPrecision(format!(
            "accumulated error bound {err_avg:.3e} reaches 1/2; cannot round safely"
        )));
    }
    let re = avg.re().to_f64();
    let im = avg.im().to_f64();
    if !(im.abs() < 0.5) {
        return Err(Error::InsufficientPrecision(format!(
            "imaginary part {im:.3e} of the count is not negligible"
        )));
    }
    let rounded = re.round();
    if (re - rounded).abs() + err_avg >= 0.5 {
        return Err(Error::InsufficientPrecision(format!(
            "count {re} too far from an integer (err {err_avg:.3e})"
        )));
    }
    if rounded < 0.0 {
        return Err(Error::InsufficientPrecision(
            "negative rounded count".into(),
        ));
    }
    Ok(rounded as u64)
}

/// `(c·l mod M)/M ∈ [0, 1)`, reduced exactly in integer arithmetic.
fn reduced_fraction(c: i64, l: u64, m: u64, ctx: &crate::arith::PrecCtx) -> HPReal {
    let num = (c as i128 * l as i128).rem_euclid(m as i128) as u64;
    HPReal::from_rational(&Rational::from((num, m)), ctx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::PrecCtx;

    #[test]
    fn g_sum_all_ones() {
        let o = EvalOptions::default();
        let ctx = PrecCtx::new(128).unwrap();
        let (v, e) = g_sum(100, 0, &HPReal::zero(&ctx), &HPReal::zero(&ctx), 1e-8, &o).unwrap();
        assert!(
            (v.re().to_f64() - 100.0).abs() <= e + 1e-10,
            "got {} (err {e})",
            v.re().to_f64()
        );
        assert!(v.im().to_f64().abs() <= e + 1e-10);
    }

    #[test]
    fn g_sum_matches_theta_at_j0() {
        // G(K,0;a,b) = F(K,0;a,b) − 1.
        let o = EvalOptions::default();
        let ctx = o.context(1000, 0, 1e-8).unwrap();
        let a = HPReal::from_f64(0.3, &ctx);
        let b = HPReal::from_f64(0.2, &ctx);
        let (g, ge) = g_sum(1000, 0, &a, &b, 1e-8, &o).unwrap();
        let f = theta_sum(1000, 0, &a, &b, 1e-8, &o).unwrap();
        let one = HPComplex::one(&ctx);
        let d = g.sub(&f.value.sub(&one, &ctx), &ctx).abs_f64();
        assert!(d <= ge + f.err_bound + 1e-9, "difference {d}");
    }

    #[test]
    fn dio_trivial_congruence() {
        // s=1, t=0, α=(0), β=(0), M=5, K=10 → the congruence always holds.
        let sys = DioSystem {
            m: 5,
            k: 10,
            s: 1,
            t: 0,
            alphas: vec![0],
            betas: vec![0],
        };
        let o = EvalOptions::default();
        assert_eq!(diophantine_count(&sys, 1e-6, &o).unwrap(), 11);
    }

    #[test]
    fn dio_matches_brute_small() {
        // s=1, t=1, α=(1,1), β=(0,0), M=2, K=3 → pairs with k₁ ≡ k₂ (mod 2).
        let sys = DioSystem {
            m: 2,
            k: 3,
            s: 1,
            t: 1,
            alphas: vec![1, 1],
            betas: vec![0, 0],
        };
        let o = EvalOptions::default();
        assert_eq!(diophantine_count(&sys, 1e-6, &o).unwrap(), 8);
        assert_eq!(crate::oracle::brute_diophantine(&sys).unwrap(), 8);
    }

    #[test]
    fn dio_validates_shapes() {
        let sys = DioSystem {
            m: 2,
            k: 3,
            s: 1,
            t: 1,
            alphas: vec![1],
            betas: vec![0, 0],
        };
        assert!(sys.validate().is_err());
    }
}
