//! Top-level evaluation of `F(K, j; a, b)` and of linear combinations
//! `Σ_l z_l F(K, l; a, b)`.
//!
//! Each pass normalizes `(a, b)` into `[0,1) × [0,1/4]` (conjugating when
//! needed), then dispatches: short sums are evaluated directly, nearly linear
//! phases (`q ≤ p`) go to the Euler–Maclaurin branch, and the main case
//! `p < q` performs one Poisson pass that rewrites the sum in terms of a new
//! quadratic sum of length `q = ⌊a + 2bK⌋ ≤ (K+1)/2` plus saddle-free
//! remainder integrals.

use rayon::prelude::*;

use crate::arith::{self, binom_int, e2pi, nu, HPComplex, HPReal, PrecCtx, EPS_MAX};
use crate::euler::em_quadratic_sum;
use crate::quad::families::{
    i_c1bar_family, i_c7_family, i_c9_family, i_c9rot_family, j_family, Family,
};
use crate::{Error, Result};

/// Argument tuple of a quadratic sum.
#[derive(Clone, Debug)]
pub struct ThetaArgs {
    pub k: u64,
    pub j: u32,
    pub a: HPReal,
    pub b: HPReal,
}

/// Normalized argument pair in `[0,1) × [0,1/4]` plus the conjugation flag.
#[derive(Clone, Debug)]
pub struct NormArgs {
    pub a0: HPReal,
    pub b0: HPReal,
    pub conjugated: bool,
}

/// Result of one Poisson pass:
/// `Σ_l z_l F(K,l;a,b) = Σ_l coeffs_l F(q,l;a*,b*) + remainder ± err`.
#[derive(Clone, Debug)]
pub struct IterStep {
    /// Length of the new sum, `⌊a + 2bK⌋ ≤ (K+1)/2`.
    pub q: u64,
    /// `a/(2b) mod 1`.
    pub a_star: HPReal,
    /// `−1/(4b) mod 1`.
    pub b_star: HPReal,
    /// Coefficient vector of the new linear combination, length `j+1`.
    pub coeffs: Vec<HPComplex>,
    /// Fully evaluated remainder.
    pub remainder: HPComplex,
    /// Absolute bound on the remainder's evaluation error.
    pub err: f64,
    /// Whether the surrounding run reached this step through an odd number of
    /// conjugations (set by the driver; `false` for a standalone call).
    pub conjugated: bool,
}

/// Which branch handled (part of) an evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Corput,
    EulerMaclaurin,
    Direct,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Branch::Corput => write!(f, "corput"),
            Branch::EulerMaclaurin => write!(f, "euler_maclaurin"),
            Branch::Direct => write!(f, "direct"),
        }
    }
}

/// Evaluation outcome with error bound and run statistics.
#[derive(Clone, Debug)]
pub struct EvalReport {
    pub value: HPComplex,
    /// Absolute error bound accumulated along the run.
    pub err_bound: f64,
    /// Number of Poisson passes performed.
    pub iterations: u32,
    /// Branch taken at each stage, final (terminating) branch last.
    pub branch_trace: Vec<Branch>,
    /// Multiplication-class operations performed by this evaluation.
    pub op_count: u64,
    /// Working mantissa width used.
    pub bits: u32,
}

/// Working-precision policy for an evaluation.
#[derive(Clone, Copy, Debug)]
pub enum BitsPolicy {
    /// `⌈c₃·ν²⌉ + guard` bits (the conservative worst-case width).
    TheoremBound { c3: f64 },
    /// Width sized from the actual accuracy targets (default).
    Practical,
    /// Explicit width.
    Fixed(u32),
}

/// Tunables for the evaluator.
#[derive(Clone, Copy, Debug)]
pub struct EvalOptions {
    pub bits: BitsPolicy,
    /// Direct-summation threshold; `None` uses `Λ = 1000·ν⁶`.
    pub lambda_override: Option<u64>,
    /// Check the coefficient-growth bound at run time.
    pub check_coefficient_growth: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            bits: BitsPolicy::Practical,
            lambda_override: None,
            check_coefficient_growth: true,
        }
    }
}

impl EvalOptions {
    pub fn context(&self, k: u64, j: u32, eps: f64) -> Result<PrecCtx> {
        match self.bits {
            BitsPolicy::TheoremBound { c3 } => PrecCtx::for_params_c3(k, j, eps, c3),
            BitsPolicy::Practical => PrecCtx::practical(k, j, eps),
            BitsPolicy::Fixed(bits) => PrecCtx::new(bits),
        }
    }
}

/// Direct-summation threshold `Λ(K, j, ε) = 1000·ν⁶`.
pub fn lambda_threshold(k: u64, j: u32, eps: f64) -> f64 {
    let v = nu(k, j, eps);
    1000.0 * v.powi(6)
}

/// Largest supported derivative order for a given `K`: `64·(1 + ln K)²`.
pub fn j_max(k: u64) -> u32 {
    let l = 1.0 + (k.max(1) as f64).ln();
    (64.0 * l * l).floor().min(u32::MAX as f64) as u32
}

/// Reduces `(a, b)` into `[0,1) × [0,1/4]` using the shift identities
/// `F(K,j;a,b) = F(K,j;a+1,b) = F(K,j;a,b+1) = F(K,j;a±1/2,b±1/2)` and, when
/// needed, complex conjugation (`F(K,j;a,b) = conj F(K,j;−a,−b)`).
pub fn normalize(a: &HPReal, b: &HPReal, ctx: &PrecCtx) -> Result<NormArgs> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::NonFinite("normalize arguments"));
    }
    let half = HPReal::from_f64(0.5, ctx);
    let mut a0 = a.frac1(ctx);
    let mut b0 = b.frac1(ctx);
    let mut conjugated = false;
    if b0.gt_f64(0.5) {
        a0 = a0.add(&half, ctx).frac1(ctx);
        b0 = b0.sub(&half, ctx);
    }
    if b0.gt_f64(0.25) {
        // b₀ ∈ (1/4, 1/2]: conjugate, then shift the resulting b ∈ [1/2, 3/4).
        conjugated = true;
        a0 = a0.neg(ctx).frac1(ctx);
        b0 = b0.neg(ctx).frac1(ctx);
        if !b0.lt_f64(0.5) {
            a0 = a0.add(&half, ctx).frac1(ctx);
            b0 = b0.sub(&half, ctx);
        }
    }
    Ok(NormArgs { a0, b0, conjugated })
}

/// Saddle-point coefficients `w_{s,j,a,b,K}`, `s = 0..=j`, of the completed
/// Gaussian along the stationary-phase line:
/// `I_{C₈}(K,j;a−m,b) = e^{2πi(a/2b)m − (2πi/4b)m²} Σ_s w_s (m/q)^s`.
pub fn saddle_coefficients(
    j: u32,
    a: &HPReal,
    b: &HPReal,
    k: u64,
    ctx: &PrecCtx,
) -> Result<Vec<HPComplex>> {
    if !b.gt_f64(0.0) {
        return Err(Error::InvalidArgument(
            "saddle coefficients require b > 0".into(),
        ));
    }
    let k_hp = HPReal::from_u64(k, ctx);
    let a2bk = a.add(&b.mul(&k_hp, ctx).mul_2exp(1, ctx), ctx);
    let q_hp = a2bk.floor(ctx);
    let q = q_hp.to_u64_floor().unwrap_or(0);
    if q == 0 {
        return Err(Error::InvalidArgument(
            "saddle coefficients require q = ⌊a+2bK⌋ ≥ 1".into(),
        ));
    }
    Ok(wsj_row(j, a, b, k, q, ctx))
}

/// The `w_{s,j}` row without precondition checks (`b > 0`, `q ≥ 1` assumed).
fn wsj_row(j: u32, a: &HPReal, b: &HPReal, k: u64, q: u64, ctx: &PrecCtx) -> Vec<HPComplex> {
    let ju = j as usize;
    let k_hp = HPReal::from_u64(k, ctx);
    // common = j!·√(2π)·e^{πi/4}·e^{−πia²/(2b)} / (2^{j/2}·(2√(πb))^{j+1}·K^j)
    let sqrt_2pi = ctx.two_pi().sqrt(ctx);
    let rot8 = e2pi(&HPReal::from_f64(0.125, ctx), ctx);
    let phase = e2pi(&a.mul(a, ctx).div(&b.mul_2exp(2, ctx), ctx).neg(ctx), ctx);
    let sqrt_pib = ctx.pi().mul(b, ctx).sqrt(ctx);
    let denom = sqrt_pib
        .mul_2exp(1, ctx)
        .powi(j as u64 + 1, ctx)
        .mul(&HPReal::from_u64(2, ctx).powi(j as u64, ctx).sqrt(ctx), ctx)
        .mul(&k_hp.powi(j as u64, ctx), ctx);
    let common = phase
        .mul(&rot8, ctx)
        .scale(&arith::factorial(j as u64, ctx).mul(&sqrt_2pi, ctx).div(&denom, ctx), ctx);

    // φ = √(2π/b), A = a·e^{−3πi/4}·φ
    let phi = ctx.two_pi().div(b, ctx).sqrt(ctx);
    let rot_m38 = e2pi(&HPReal::from_f64(-0.375, ctx), ctx);
    let a_rot = rot_m38.scale(&a.mul(&phi, ctx), ctx);
    let mut a_pow = vec![HPComplex::one(ctx)];
    for l in 1..=ju {
        let prev = a_pow[l - 1].clone();
        a_pow.push(prev.mul(&a_rot, ctx));
    }
    // e^{(j−s)·3πi/4} powers
    let rot38 = e2pi(&HPReal::from_f64(0.375, ctx), ctx);

    let q_hp = HPReal::from_u64(q, ctx);
    let qphi = q_hp.mul(&phi, ctx);
    let mut out = Vec::with_capacity(ju + 1);
    let mut qphi_pow = HPReal::one(ctx);
    let mut s_fact = HPReal::one(ctx);
    for s in 0..=ju {
        if s > 0 {
            qphi_pow = qphi_pow.mul(&qphi, ctx);
            s_fact = s_fact.mul_u(s as u64, ctx);
        }
        // Σ_{l ≡ j−s (2), l ≤ j−s} (−1)^{(j+l−s)/2} A^l / (l!·((j−s−l)/2)!)
        let mut inner = HPComplex::zero(ctx);
        let mut l = (ju - s) % 2;
        while l <= ju - s {
            let g = (ju - s - l) / 2;
            let denom = arith::factorial(l as u64, ctx).mul(&arith::factorial(g as u64, ctx), ctx);
            let mut term = a_pow[l].unscale(&denom, ctx);
            if (ju + l - s) / 2 % 2 == 1 {
                term = term.neg(ctx);
            }
            inner = inner.add(&term, ctx);
            l += 2;
        }
        let mut w = common.mul(&inner, ctx).scale(&qphi_pow, ctx).unscale(&s_fact, ctx);
        // e^{(j−s)3πi/4}
        let e_rot = rot38_pow(&rot38, (ju - s) as u32, ctx);
        w = w.mul(&e_rot, ctx);
        out.push(w);
    }
    out
}

fn rot38_pow(rot38: &HPComplex, e: u32, ctx: &PrecCtx) -> HPComplex {
    // e^{3πi/4·e}: period 8 in e.
    let mut acc = HPComplex::one(ctx);
    for _ in 0..(e % 8) {
        acc = acc.mul(rot38, ctx);
    }
    acc
}

/// Direct evaluation of `Σ_l z_l F(K, l; a, b)`, parallelized over ranges.
pub(crate) fn raw_direct_sum(
    kk: u64,
    zs: &[HPComplex],
    a: &HPReal,
    b: &HPReal,
    ctx: &PrecCtx,
) -> (HPComplex, f64) {
    let j = zs.len() - 1;
    let k_hp = HPReal::from_u64(kk, ctx);
    let inv_k = if kk > 0 { k_hp.recip(ctx) } else { HPReal::one(ctx) };
    let chunk: u64 = 8192;
    let n_chunks = kk / chunk + 1;
    let partials: Vec<HPComplex> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let lo = ci * chunk;
            let hi = ((ci + 1) * chunk - 1).min(kk);
            let mut acc = HPComplex::zero(ctx);
            for k in lo..=hi {
                let kf = HPReal::from_u64(k, ctx);
                let k2 = HPReal::from_u64(k.wrapping_mul(k), ctx);
                let k2 = if k < (1u64 << 32) { k2 } else { kf.mul(&kf, ctx) };
                let phase = a.mul(&kf, ctx).add(&b.mul(&k2, ctx), ctx);
                let e = e2pi(&phase, ctx);
                if j == 0 {
                    acc = acc.add(&e.mul(&zs[0], ctx), ctx);
                } else {
                    let r = kf.mul(&inv_k, ctx);
                    let mut w = zs[0].clone();
                    let mut rp = HPReal::one(ctx);
                    for zl in zs.iter().skip(1) {
                        rp = rp.mul(&r, ctx);
                        w = w.add(&zl.scale(&rp, ctx), ctx);
                    }
                    acc = acc.add(&e.mul(&w, ctx), ctx);
                }
            }
            acc
        })
        .collect();
    let mut total = HPComplex::zero(ctx);
    for p in partials {
        total = total.add(&p, ctx);
    }
    let zsum: f64 = zs.iter().map(|z| z.abs_f64()).sum();
    // Rounding: phases reach |a|K + |b|K² before the mod-1 reduction.
    let phase_mag = (a.to_f64().abs() * kk as f64 + b.to_f64().abs() * (kk as f64).powi(2)).max(1.0);
    let bound = (kk as f64 + 1.0) * (zsum + 1.0) * (32.0 + 16.0 * phase_mag) * ctx.ulp();
    (total, bound)
}

/// One Poisson pass on normalized arguments with `p < q`. Validates the
/// branch conditions, then defers to the internal step.
pub fn corput_step(
    args: &ThetaArgs,
    z: &[HPComplex],
    ctx: &PrecCtx,
    eps: f64,
    opts: &EvalOptions,
) -> Result<IterStep> {
    if !(eps > 0.0 && eps < EPS_MAX) {
        return Err(Error::EpsOutOfRange(eps));
    }
    if z.len() != args.j as usize + 1 {
        return Err(Error::InvalidArgument(format!(
            "coefficient vector length {} does not match j = {}",
            z.len(),
            args.j
        )));
    }
    if args.a.is_sign_negative() || !args.a.lt_f64(1.0) || args.b.is_sign_negative()
        || args.b.gt_f64(0.25)
    {
        return Err(Error::InvalidArgument(
            "corput step expects normalized (a, b) ∈ [0,1) × [0,1/4]".into(),
        ));
    }
    let lam = opts
        .lambda_override
        .map(|l| l as f64)
        .unwrap_or_else(|| lambda_threshold(args.k, args.j, eps));
    if (args.k as f64) <= lam {
        return Err(Error::HypothesisViolated(format!(
            "K = {} not large enough (threshold Λ = {lam:.3e}); take the direct branch",
            args.k
        )));
    }
    let k_hp = HPReal::from_u64(args.k, ctx);
    let q = args
        .a
        .add(&args.b.mul(&k_hp, ctx).mul_2exp(1, ctx), ctx)
        .floor(ctx)
        .to_u64_floor()
        .unwrap_or(0);
    let p = if args.a.is_zero() { 0 } else { 1 };
    if q <= p {
        return Err(Error::WrongBranch(format!(
            "corput step requires p < q, got p = {p}, q = {q}"
        )));
    }
    corput_step_inner(args.k, args.j, &args.a, &args.b, z, ctx, eps, args.k)
}

/// The Poisson pass proper. Arguments must be normalized and satisfy
/// `p < q`; `k0` is the original top-level length (used for accuracy
/// targets).
#[allow(clippy::too_many_arguments)]
fn corput_step_inner(
    kc: u64,
    j: u32,
    a: &HPReal,
    b: &HPReal,
    z: &[HPComplex],
    ctx: &PrecCtx,
    eps: f64,
    k0: u64,
) -> Result<IterStep> {
    let jm = j as usize;
    let k_hp = HPReal::from_u64(kc, ctx);
    let two_bk = b.mul(&k_hp, ctx).mul_2exp(1, ctx);
    let a2bk = a.add(&two_bk, ctx);
    let q_hp = a2bk.floor(ctx);
    let q = q_hp
        .to_u64_floor()
        .ok_or_else(|| Error::InvalidArgument("q overflow".into()))?;
    let p: u64 = if a.is_zero() { 0 } else { 1 };
    debug_assert!(q > p);
    let p1 = q - p;
    let om = a2bk.sub(&q_hp, ctx); // ω = {a+2bK}
    let om1 = if p == 0 {
        HPReal::zero(ctx)
    } else {
        HPReal::one(ctx).sub(a, ctx) // ω₁ = ⌈a⌉ − a
    };
    let one = HPReal::one(ctx);

    // PV truncation point M = ⌈8^j K³ e^ν⌉.
    let nu_c = nu(kc, j, eps);
    let m_pv = HPReal::from_u64(8, ctx)
        .powi(j as u64, ctx)
        .mul(&k_hp.powi(3, ctx), ctx)
        .mul(&HPReal::from_f64(nu_c, ctx).exp(ctx), ctx)
        .ceil(ctx);

    // Per-family absolute target; the step tolerance is ~8^{−j}K₀^{−2}ε.
    let target = 8.0f64.powi(-(j as i32)) * eps / (k0 as f64).powi(2);
    let tol_f = (target / (64.0 * 2.0f64.powi(j as i32))).clamp(1e-280, 0.25);

    // The twelve integral families (shared across all l).
    let jobs: Vec<Box<dyn FnOnce() -> Family + Send>> = vec![
        {
            let (k_, w_, b_) = (kc, om.clone(), b.clone());
            let c = ctx.clone();
            let m = HPReal::from_u64(p1, &c);
            Box::new(move || j_family(k_, jm, &m, &w_, &b_, &c, tol_f))
        },
        {
            let (k_, w_, b_) = (kc, om1.clone(), b.clone());
            let c = ctx.clone();
            let m = HPReal::from_u64(p1, &c);
            Box::new(move || j_family(k_, jm, &m, &w_, &b_, &c, tol_f))
        },
        {
            let (k_, b_) = (kc, b.clone());
            let c = ctx.clone();
            let m = m_pv.sub(&q_hp, ctx);
            let w_ = two_bk.sub(&om, ctx);
            Box::new(move || j_family(k_, jm, &m, &w_, &b_, &c, tol_f))
        },
        {
            let (k_, b_) = (kc, b.clone());
            let c = ctx.clone();
            let m = m_pv.sub(&q_hp, ctx).sub(&one, ctx);
            let w_ = one.sub(&om, ctx);
            Box::new(move || j_family(k_, jm, &m, &w_, &b_, &c, tol_f))
        },
        {
            let (k_, b_) = (kc, b.clone());
            let c = ctx.clone();
            let m = m_pv.add(&HPReal::from_u64(p, ctx), ctx);
            let w_ = two_bk.sub(&om1, ctx);
            Box::new(move || j_family(k_, jm, &m, &w_, &b_, &c, tol_f))
        },
        {
            let (k_, b_) = (kc, b.clone());
            let c = ctx.clone();
            let m = m_pv.add(&HPReal::from_u64(p, ctx), ctx).sub(&one, ctx);
            let w_ = one.sub(&om1, ctx);
            Box::new(move || j_family(k_, jm, &m, &w_, &b_, &c, tol_f))
        },
        {
            let (k_, w_, b_) = (kc, om.clone(), b.clone());
            let c = ctx.clone();
            Box::new(move || i_c7_family(k_, jm, &w_, &b_, &c, tol_f))
        },
        {
            let (k_, w_, b_) = (kc, om1.clone(), b.clone());
            let c = ctx.clone();
            Box::new(move || i_c7_family(k_, jm, &w_, &b_, &c, tol_f))
        },
        {
            let (k_, w_, b_) = (kc, om.clone(), b.clone());
            let c = ctx.clone();
            Box::new(move || i_c1bar_family(k_, jm, &w_, &b_, &c, tol_f))
        },
        {
            let (k_, b_) = (kc, b.clone());
            let c = ctx.clone();
            let w_ = one.sub(&om, ctx);
            Box::new(move || i_c9_family(k_, jm, &w_, &b_, &c, tol_f))
        },
        {
            let (k_, b_) = (kc, b.clone());
            let c = ctx.clone();
            let w_ = one.sub(&om1, ctx);
            Box::new(move || i_c9_family(k_, jm, &w_, &b_, &c, tol_f))
        },
        {
            let (k_, b_) = (kc, b.clone());
            let c = ctx.clone();
            let w_ = HPComplex::new(om.add(&two_bk, ctx), two_bk.sub(&om, ctx));
            Box::new(move || i_c9rot_family(k_, jm, &w_, &b_, &c, tol_f))
        },
    ];
    let mut fams: Vec<Family> = jobs.into_par_iter().map(|f| f()).collect();
    let c9r = fams.pop().unwrap();
    let c9b = fams.pop().unwrap();
    let c9a = fams.pop().unwrap();
    let c1b = fams.pop().unwrap();
    let c7b = fams.pop().unwrap();
    let c7a = fams.pop().unwrap();
    let jf6 = fams.pop().unwrap();
    let jf5 = fams.pop().unwrap();
    let jf4 = fams.pop().unwrap();
    let jf3 = fams.pop().unwrap();
    let jf2 = fams.pop().unwrap();
    let jf1 = fams.pop().unwrap();

    // Saddle coefficient matrix w_{s,l} for l = 0..=j, and its growth check.
    let wmat: Vec<Vec<HPComplex>> = (0..=j).map(|l| wsj_row(l, a, b, kc, q, ctx)).collect();
    check_lemma_a4(&wmat, j, b, two_bk.to_f64(), nu_c)?;

    // Shared constants.
    let ak_bk2 = a.mul(&k_hp, ctx).add(&b.mul(&k_hp, ctx).mul(&k_hp, ctx), ctx);
    let phase_abk = e2pi(&ak_bk2, ctx);
    let phase_ak = e2pi(&a.mul(&k_hp, ctx), ctx);
    let c1 = phase_abk.mul_i(ctx); // i·e(aK+bK²)
    let c5 = c1.neg(ctx);
    let om_decay = ctx.two_pi().mul(&om, ctx).mul(&k_hp, ctx).neg(ctx).exp(ctx);
    let rot8 = e2pi(&HPReal::from_f64(0.125, ctx), ctx);
    let sqrt2 = HPReal::from_u64(2, ctx).sqrt(ctx);
    let half = HPReal::from_f64(0.5, ctx);

    let mut remainder = HPComplex::zero(ctx);
    let mut err = 0.0f64;
    let fam_err: f64 = jf1.err
        + jf2.err
        + jf3.err
        + jf4.err
        + jf5.err
        + jf6.err
        + c7a.err
        + c7b.err
        + c1b.err
        + c9a.err
        + c9b.err
        + c9r.err;

    for l in 0..=jm {
        let zl = &z[l];
        let zl_mag = zl.abs_f64();
        if zl_mag == 0.0 {
            continue;
        }
        // S̃₁ assembly.
        let mut term_a = HPComplex::zero(ctx); // Σ_t i^t C(l,t)(J(p₁,ω) + Ĩ_C7(ω) − Ĩ_C̄1(ω))
        let mut term_rot = HPComplex::zero(ctx); // Σ_t C(l,t)·Ĩ_C9rot
        let mut term_m = HPComplex::zero(ctx); // Σ_t (−i)^t C(l,t)(J(M−q−1,1−ω) + Ĩ_C9(1−ω))
        let mut term_p = HPComplex::zero(ctx); // Σ_t i^t C(l,t)·J(M+p, 2bK−ω₁)
        for t in 0..=l {
            let cf = HPReal::from_integer(&binom_int(l as u64, t as u64), ctx);
            let base = jf1.vals[t].add(&c7a.vals[t], ctx).sub(&c1b.vals[t], ctx);
            term_a = term_a.add(&base.scale(&cf, ctx).mul_pow_i(t as u32, ctx), ctx);
            term_rot = term_rot.add(&c9r.vals[t].scale(&cf, ctx), ctx);
            let basem = jf4.vals[t].add(&c9a.vals[t], ctx);
            term_m = term_m.add(&basem.scale(&cf, ctx).mul_pow_i(3 * (t as u32 % 4), ctx), ctx);
            term_p = term_p.add(&jf5.vals[t].scale(&cf, ctx).mul_pow_i(t as u32, ctx), ctx);
        }
        // c₂ = (−1)^l i^{l+1}, c₃ = e^{(l+1)πi/4}·e^{2πiaK}, c₄ = (−i)^{l+1},
        // c₆ = i^{l+1}
        let l32 = l as u32;
        let c2_apply = |x: &HPComplex| -> HPComplex {
            let y = x.mul_pow_i((l32 + 1) % 4, ctx);
            if l % 2 == 1 {
                y.neg(ctx)
            } else {
                y
            }
        };
        let c3 = rot8_pow(&rot8, l32 + 1, ctx).mul(&phase_ak, ctx);
        let two_half = sqrt2.powi(l as u64 + 1, ctx); // 2^{(l+1)/2}

        let s1 = c1
            .mul(&term_a, ctx)
            .neg(ctx)
            .sub(&c2_apply(&jf2.vals[l].add(&c7b.vals[l], ctx)), ctx)
            .sub(
                &c3.mul(&term_rot, ctx)
                    .scale(&two_half, ctx)
                    .scale(&om_decay, ctx),
                ctx,
            );

        let s2 = jf3.vals[l]
            .mul_pow_i(3 * ((l32 + 1) % 4), ctx) // c₄·J(M−q, 2bK−ω)
            .sub(&c5.mul(&term_m, ctx), ctx)
            .add(&c5.mul(&term_p, ctx), ctx)
            .add(
                &jf6.vals[l]
                    .add(&c9b.vals[l], ctx)
                    .mul_pow_i((l32 + 1) % 4, ctx), // c₆·(J(M+p−1,1−ω₁) + Ĩ_C9(1−ω₁))
                ctx,
            );

        // c̃_bd = ½e(aK+bK²) + ½δ_l − w_{0,l}·δ_{1−p}
        let mut cbd = phase_abk.scale(&half, ctx);
        if l == 0 {
            cbd = cbd.add(&HPComplex::from_real(&half, ctx), ctx);
        }
        if p == 1 {
            cbd = cbd.sub(&wmat[l][0], ctx);
        }

        let r_l = s1.add(&s2, ctx).add(&cbd, ctx);
        remainder = remainder.add(&zl.mul(&r_l, ctx), ctx);
        err += zl_mag * (fam_err * 2.0f64.powi(l as i32 + 1) + 8.0 * ctx.ulp());
    }

    // PV truncation tail: O(K/M) with the conjugate-pair pairing.
    let zsum: f64 = z.iter().map(|v| v.abs_f64()).sum();
    err += zsum * 4.0 * (j as f64 + 2.0) * (kc as f64) / m_pv.to_f64();

    // New coefficients w̃_s = Σ_{l≥s} z_l w_{s,l}.
    let mut coeffs = Vec::with_capacity(jm + 1);
    for s in 0..=jm {
        let mut acc = HPComplex::zero(ctx);
        for l in s..=jm {
            if z[l].abs_f64() == 0.0 {
                continue;
            }
            acc = acc.add(&z[l].mul(&wmat[l][s], ctx), ctx);
        }
        coeffs.push(acc);
    }

    // New arguments, reduced mod 1.
    let a_star = a.div(&b.mul_2exp(1, ctx), ctx).frac1(ctx);
    let b_star = b.mul_2exp(2, ctx).recip(ctx).neg(ctx).frac1(ctx);

    Ok(IterStep {
        q,
        a_star,
        b_star,
        coeffs,
        remainder,
        err,
        conjugated: false,
    })
}

fn rot8_pow(rot8: &HPComplex, e: u32, ctx: &PrecCtx) -> HPComplex {
    let mut acc = HPComplex::one(ctx);
    for _ in 0..(e % 8) {
        acc = acc.mul(rot8, ctx);
    }
    acc
}

/// Coefficient-growth certificate: the row sums `Σ_{m=s}^{j} |w_{s,m}|` stay
/// under the stated envelopes.
fn check_lemma_a4(
    wmat: &[Vec<HPComplex>],
    j: u32,
    b: &HPReal,
    two_bk: f64,
    nu_c: f64,
) -> Result<()> {
    let jm = j as usize;
    let bf = b.to_f64();
    let nu3 = nu_c.powi(3);
    for s in 0..=jm {
        let mut row = 0.0f64;
        for (l, wrow) in wmat.iter().enumerate().take(jm + 1).skip(s) {
            let _ = l;
            row += wrow[s].abs_f64();
        }
        let slack = 1.0 + 1e-9;
        if two_bk >= 2.0 * nu3 {
            let mut geom = 0.0;
            let mut g = 1.0;
            for _ in 0..=jm {
                geom += g;
                g *= j as f64 / two_bk;
            }
            let bound = std::f64::consts::E / (2.0 * bf).sqrt()
                * (1.0 + 1.0 / two_bk).powi(j as i32)
                * geom;
            if row > bound * slack {
                return Err(Error::CoefficientBound(format!(
                    "row {s}: Σ|w| = {row:.6e} exceeds {bound:.6e} (2bK ≥ 2ν³ regime)"
                )));
            }
        }
        if two_bk < 4.0 * nu3 {
            let bound =
                (2.0 * bf).sqrt().recip() * (j as f64 + 1.0) * 4.0f64.powi(j as i32 + 2);
            if row > bound * slack {
                return Err(Error::CoefficientBound(format!(
                    "row {s}: Σ|w| = {row:.6e} exceeds {bound:.6e} (2bK < 4ν³ regime)"
                )));
            }
        }
    }
    Ok(())
}

/// Evaluates `F(K, j; a, b)` to within `±O(ν^κ·eps)`.
pub fn theta_sum(
    k: u64,
    j: u32,
    a: &HPReal,
    b: &HPReal,
    eps: f64,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let mut z = Vec::with_capacity(j as usize + 1);
    let ctx = opts.context(k, j, eps)?;
    for _ in 0..j {
        z.push(HPComplex::zero(&ctx));
    }
    z.push(HPComplex::one(&ctx));
    theta_linear_combination(k, &z, a, b, eps, opts)
}

/// Evaluates `Σ_{l=0}^{j} z_l F(K, l; a, b)` (with `|z_l| ≤ 1`) to within
/// `±O(ν^κ·eps)`.
pub fn theta_linear_combination(
    k: u64,
    z: &[HPComplex],
    a: &HPReal,
    b: &HPReal,
    eps: f64,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    if !(eps > 0.0 && eps < EPS_MAX) {
        return Err(Error::EpsOutOfRange(eps));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("K must be positive".into()));
    }
    if z.is_empty() {
        return Err(Error::InvalidArgument("empty coefficient vector".into()));
    }
    let j = (z.len() - 1) as u32;
    if j > j_max(k) {
        return Err(Error::JTooLarge { j, j_max: j_max(k) });
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::NonFinite("theta arguments"));
    }
    if a.is_sign_negative() || !a.lt_f64(1.0) || b.is_sign_negative() || !b.lt_f64(1.0) {
        return Err(Error::InvalidArgument("a, b must lie in [0, 1)".into()));
    }
    let ctx = opts.context(k, j, eps)?;
    for (l, zl) in z.iter().enumerate() {
        if zl.abs_f64() > 1.0 + 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "|z_{l}| = {} exceeds 1",
                zl.abs_f64()
            )));
        }
    }

    let k0 = k;
    let coeff_cap = 8.0f64.powi(j as i32)
        * (k0 as f64).powi(2)
        * std::f64::consts::E
        * (2.0 * (k0 as f64).ln()).powi(2)
        * 16.0;

    let mut zc: Vec<HPComplex> = z.to_vec();
    let mut aa = a.clone();
    let mut bb = b.clone();
    let mut kc = k;
    let mut sigma = false;
    let mut acc = HPComplex::zero(&ctx);
    let mut err = 0.0f64;
    let mut iterations = 0u32;
    let mut trace = Vec::new();
    let iter_cap = (k as f64).log2().floor() as u32 + 1;

    loop {
        let na = normalize(&aa, &bb, &ctx)?;
        if na.conjugated {
            for zl in zc.iter_mut() {
                *zl = zl.conj(&ctx);
            }
            sigma = !sigma;
        }
        aa = na.a0;
        bb = na.b0;

        let lam = opts
            .lambda_override
            .map(|l| l as f64)
            .unwrap_or_else(|| lambda_threshold(kc, j, eps));
        if (kc as f64) <= lam.max(8.0) {
            let (v, e) = raw_direct_sum(kc, &zc, &aa, &bb, &ctx);
            acc = acc.add(&apply_sigma(&v, sigma, &ctx), &ctx);
            err += e;
            trace.push(Branch::Direct);
            break;
        }

        let k_hp = HPReal::from_u64(kc, &ctx);
        let q = aa
            .add(&bb.mul(&k_hp, &ctx).mul_2exp(1, &ctx), &ctx)
            .floor(&ctx)
            .to_u64_floor()
            .unwrap_or(0);
        let p: u64 = if aa.is_zero() { 0 } else { 1 };

        if q <= p {
            let mut v = HPComplex::zero(&ctx);
            for (l, zl) in zc.iter().enumerate() {
                if zl.abs_f64() == 0.0 {
                    continue;
                }
                let (vl, el) = em_quadratic_sum(kc, l as u32, &aa, &bb, &ctx, eps)?;
                v = v.add(&zl.mul(&vl, &ctx), &ctx);
                err += zl.abs_f64() * el;
            }
            acc = acc.add(&apply_sigma(&v, sigma, &ctx), &ctx);
            trace.push(Branch::EulerMaclaurin);
            break;
        }

        if iterations >= iter_cap {
            return Err(Error::InvalidArgument(format!(
                "iteration cap {iter_cap} exceeded (internal error)"
            )));
        }
        let step = corput_step_inner(kc, j, &aa, &bb, &zc, &ctx, eps, k0)?;
        acc = acc.add(&apply_sigma(&step.remainder, sigma, &ctx), &ctx);
        err += step.err;
        debug_assert!(step.q as f64 <= (kc as f64 + 1.0) / 2.0);
        zc = step.coeffs;
        aa = step.a_star;
        bb = step.b_star;
        kc = step.q;
        iterations += 1;
        trace.push(Branch::Corput);

        if opts.check_coefficient_growth {
            let zmax = zc.iter().map(|v| v.abs_f64()).fold(0.0, f64::max);
            if zmax > coeff_cap {
                return Err(Error::CoefficientBound(format!(
                    "max|w̃| = {zmax:.6e} exceeds cap {coeff_cap:.6e} at iteration {iterations}"
                )));
            }
        }
    }

    Ok(EvalReport {
        value: acc,
        err_bound: err,
        iterations,
        branch_trace: trace,
        op_count: ctx.op_count(),
        bits: ctx.bits(),
    })
}

fn apply_sigma(v: &HPComplex, sigma: bool, ctx: &PrecCtx) -> HPComplex {
    if sigma {
        v.conj(ctx)
    } else {
        v.clone()
    }
}
