//! Complex-argument Bessel and Hankel functions of integer order.
//!
//! `J_n` comes from Miller's backward recurrence, normalized with the
//! generating-function identity `exp(-iz) = J_0 + 2 Σ (-i)^k J_k`, which holds
//! everywhere in the complex plane. `H1_n` is not formed as `J + iY`: for
//! large `Im z` that sum cancels catastrophically. Instead
//! `H1_n(z) = 2/(π i^(n+1)) K_n(-iz)` with `K_0`, `K_1` from a power series
//! (|w| ≤ 2) or Steed's continued fraction (|w| > 2), followed by forward
//! recurrence, which is stable for `H1` in the upper half plane. The lower
//! half plane follows from `J_n(z̄) = conj J_n(z)` and `H1_n(z̄) = conj H2_n(z)`.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Largest supported order magnitude.
pub const MAX_ORDER: usize = 4000;
/// Largest supported argument modulus.
pub const MAX_ABS_ARG: f64 = 1e4;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
// Kept well below sqrt(f64::MAX): complex division squares the modulus.
const RESCALE: f64 = 1e120;
const HUGE: f64 = 1e300;

type C = Complex64;

/// Values of J_l, J_l', H1_l, H1_l' at a single order and argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylinderFunctionSet {
    pub order: i32,
    pub x: C,
    pub j: C,
    pub dj: C,
    pub h1: C,
    pub dh1: C,
}

impl CylinderFunctionSet {
    /// `J H1' - J' H1`, which equals `2i/(πx)`.
    pub fn wronskian(&self) -> C {
        self.j * self.dh1 - self.dj * self.h1
    }
}

/// Orders 0..len of J, J', and optionally H1, H1' at one argument.
///
/// `len()` can be smaller than requested when high orders are not
/// representable in double precision (J underflows or H1 overflows). The
/// dropped orders are negligible in any convergent sum over l.
#[derive(Debug, Clone)]
pub struct CylinderBatch {
    pub x: C,
    pub j: Vec<C>,
    pub dj: Vec<C>,
    pub h1: Vec<C>,
    pub dh1: Vec<C>,
}

impl CylinderBatch {
    pub fn len(&self) -> usize {
        self.j.len()
    }

    pub fn is_empty(&self) -> bool {
        self.j.is_empty()
    }

    pub fn has_hankel(&self) -> bool {
        !self.h1.is_empty()
    }
}

fn check_arg(x: C) -> Result<()> {
    if !(x.re.is_finite() && x.im.is_finite()) {
        return Err(Error::Domain(format!("non-finite Bessel argument {x}")));
    }
    if x.re == 0.0 && x.im == 0.0 {
        return Err(Error::Domain("Bessel argument x = 0".into()));
    }
    if x.norm() > MAX_ABS_ARG {
        return Err(Error::Domain(format!(
            "|x| = {:e} exceeds supported range {:e}",
            x.norm(),
            MAX_ABS_ARG
        )));
    }
    Ok(())
}

fn envj(n: f64, x: f64) -> f64 {
    0.5 * (6.28 * n).log10() - n * (1.36 * x / n).log10()
}

// Secant solve of envj(n, x) = obj starting from n0.
fn envj_solve(x: f64, n0: f64, obj: f64) -> f64 {
    let mut n0 = n0.max(1.0);
    let mut f0 = envj(n0, x) - obj;
    let mut n1 = n0 + 5.0;
    let mut f1 = envj(n1, x) - obj;
    let mut nn = n1;
    for _ in 0..40 {
        if f1 == f0 {
            break;
        }
        nn = (n1 - (n1 - n0) / (1.0 - f0 / f1)).round();
        if !nn.is_finite() || nn < 1.0 {
            nn = 1.0;
        }
        let f = envj(nn, x) - obj;
        if (nn - n1).abs() < 1.0 {
            break;
        }
        n0 = n1;
        f0 = f1;
        n1 = nn;
        f1 = f;
    }
    nn
}

/// Starting order for backward recurrence so that orders up to `n_max`
/// carry about `digits` significant digits.
fn miller_start(az: f64, n_max: usize) -> usize {
    let digits = 17.0;
    let n = n_max.max(1) as f64;
    let hmp = 0.5 * digits;
    let ejn = envj(n, az);
    let (obj, n0) = if ejn <= hmp {
        (digits, (1.1 * az).floor() + 1.0)
    } else {
        (hmp + ejn, n)
    };
    let nn = envj_solve(az, n0, obj) + 10.0;
    (nn as usize).max(n_max + 20).max((az as usize) + 20)
}

fn minus_i_pow(k: usize) -> C {
    match k % 4 {
        0 => C::new(1.0, 0.0),
        1 => C::new(0.0, -1.0),
        2 => C::new(-1.0, 0.0),
        _ => C::new(0.0, 1.0),
    }
}

/// J_0..=J_{n_max} for Im z ≥ 0, times exp(−Im z) when `scaled`. Entries
/// that underflow come back as zero.
fn j_upper(n_max: usize, z: C, scaled: bool) -> Result<Vec<C>> {
    if z.im > 700.0 && !scaled {
        return Err(Error::Overflow(format!(
            "J_n({z}) not representable (Im x too large)"
        )));
    }
    let start = miller_start(z.norm(), n_max);
    let mut out = vec![C::new(0.0, 0.0); n_max + 1];
    // number of rescalings applied after each stored value was recorded
    let mut stamp = vec![0u32; n_max + 1];
    let mut rescales = 0u32;
    let two_over_z = 2.0 / z;
    let mut fp1 = C::new(0.0, 0.0);
    let mut f = C::new(1e-30, 0.0);
    let mut sum = C::new(0.0, 0.0);
    for k in (1..=start).rev() {
        if k <= n_max {
            out[k] = f;
            stamp[k] = rescales;
        }
        sum += 2.0 * minus_i_pow(k) * f;
        let fm1 = two_over_z * (k as f64) * f - fp1;
        fp1 = f;
        f = fm1;
        if f.l1_norm() > RESCALE {
            let s = 1.0 / RESCALE;
            f *= s;
            fp1 *= s;
            sum *= s;
            rescales += 1;
        }
    }
    out[0] = f;
    stamp[0] = rescales;
    sum += f;
    let shift = if scaled { z.im } else { 0.0 };
    let norm = (-C::i() * z - shift).exp() / sum;
    if !(norm.re.is_finite() && norm.im.is_finite()) {
        return Err(Error::Overflow(format!("J normalization failed at x = {z}")));
    }
    for (v, &st) in out.iter_mut().zip(&stamp) {
        *v *= norm;
        for _ in st..rescales {
            *v /= RESCALE;
        }
    }
    Ok(out)
}

/// K_0(w) and K_1(w) multiplied by exp(w), for Re w ≥ 0, w ≠ 0.
pub fn bessel_k01_scaled(w: C) -> Result<(C, C)> {
    if w.re < 0.0 {
        return Err(Error::Domain(format!("K_n requires Re w ≥ 0, got {w}")));
    }
    if w.norm() == 0.0 {
        return Err(Error::Domain("K_n argument w = 0".into()));
    }
    if w.norm() <= 2.0 {
        let (k0, k1) = k01_series(w);
        let e = w.exp();
        Ok((k0 * e, k1 * e))
    } else {
        k01_steed(w)
    }
}

fn k01_series(w: C) -> (C, C) {
    let t = w * w * 0.25;
    let lg = (w * 0.5).ln();
    // term_k = t^k/(k!)^2 and term1_k = t^k/(k!(k+1)!)
    let mut term = C::new(1.0, 0.0);
    let mut term1 = C::new(1.0, 0.0);
    let mut i0 = term;
    let mut i1s = term1;
    let mut harm = 0.0;
    let mut s0 = C::new(0.0, 0.0);
    // psi(k+1) + psi(k+2) = -2γ + 2H_k + 1/(k+1)
    let mut s1 = term1 * (-2.0 * EULER_GAMMA + 1.0);
    for k in 1..60 {
        let kf = k as f64;
        term = term * t / (kf * kf);
        term1 = term1 * t / (kf * (kf + 1.0));
        harm += 1.0 / kf;
        i0 += term;
        i1s += term1;
        s0 += term * harm;
        s1 += term1 * (-2.0 * EULER_GAMMA + 2.0 * harm + 1.0 / (kf + 1.0));
        if term.norm() < 1e-18 * i0.norm() && term1.norm() < 1e-18 * i1s.norm() {
            break;
        }
    }
    let i1 = w * 0.5 * i1s;
    let k0 = -(lg + EULER_GAMMA) * i0 + s0;
    let k1 = 1.0 / w + lg * i1 - w * 0.25 * s1;
    (k0, k1)
}

// Steed's method with the Temme/Thompson-Barnett CF2 at order zero.
fn k01_steed(x: C) -> Result<(C, C)> {
    let one = C::new(1.0, 0.0);
    let mut b = 2.0 * (one + x);
    let mut d = one / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = C::new(0.0, 0.0);
    let mut q2 = one;
    let a1 = 0.25;
    let mut q = C::new(a1, 0.0);
    let mut c = C::new(a1, 0.0);
    let mut a = -a1;
    let mut s = one + q * delh;
    let mut converged = false;
    for i in 2..20_000 {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = one / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if dels.norm() < 1e-17 * s.norm() {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence(format!("K_0/K_1 continued fraction at w = {x}")));
    }
    let h = a1 * h;
    let k0 = (PI / (2.0 * x)).sqrt() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    Ok((k0, k1))
}

/// H1_0..=H1_{n_max} for Im z ≥ 0, truncated where values overflow.
fn h_upper(n_max: usize, z: C) -> Result<Vec<C>> {
    let w = -C::i() * z;
    if w.re > 700.0 {
        return Err(Error::Overflow(format!(
            "H1_n({z}) not representable (Im x too large)"
        )));
    }
    let (k0s, k1s) = bessel_k01_scaled(w)?;
    let e = (-w).exp();
    let h0 = C::new(0.0, -2.0 / PI) * k0s * e;
    let h1 = -(2.0 / PI) * k1s * e;
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(h0);
    if n_max >= 1 {
        out.push(h1);
    }
    let two_over_z = 2.0 / z;
    for n in 1..n_max {
        let next = two_over_z * (n as f64) * out[n] - out[n - 1];
        if !(next.norm() < HUGE) {
            break;
        }
        out.push(next);
    }
    Ok(out)
}

fn derivatives(f: &[C]) -> Vec<C> {
    let n = f.len() - 1;
    let mut d = Vec::with_capacity(n);
    d.push(-f[1]);
    for k in 1..n {
        d.push((f[k - 1] - f[k + 1]) * 0.5);
    }
    d
}

/// Bessel J_n for n = 0..=n_max. Underflowed high orders are zero.
pub fn bessel_j_batch(n_max: usize, z: C) -> Result<Vec<C>> {
    check_arg(z)?;
    if z.im < 0.0 {
        let v = j_upper(n_max, z.conj(), false)?;
        Ok(v.into_iter().map(|c| c.conj()).collect())
    } else {
        j_upper(n_max, z, false)
    }
}

/// J, J' and (if `hankel`) H1, H1' for orders 0..=n_max.
pub fn cylinder_batch(n_max: usize, z: C, hankel: bool) -> Result<CylinderBatch> {
    batch(n_max, z, hankel, false)
}

/// J and J' for orders 0..=n_max, both multiplied by exp(−|Im z|). Ratios
/// such as J'/J stay available where J itself overflows.
pub fn cylinder_batch_scaled(n_max: usize, z: C) -> Result<CylinderBatch> {
    batch(n_max, z, false, true)
}

fn batch(n_max: usize, z: C, hankel: bool, scaled: bool) -> Result<CylinderBatch> {
    check_arg(z)?;
    if n_max > MAX_ORDER {
        return Err(Error::Domain(format!("order {n_max} exceeds {MAX_ORDER}")));
    }
    let m = n_max + 1;
    let lower = z.im < 0.0;
    let zu = if lower { z.conj() } else { z };
    let ju = j_upper(m, zu, scaled)?;
    let mut valid = ju.iter().take_while(|v| v.norm() > 0.0).count();
    let mut j: Vec<C> = if lower {
        ju.iter().map(|c| c.conj()).collect()
    } else {
        ju.clone()
    };
    let mut h = Vec::new();
    if hankel {
        let hu = h_upper(m, zu)?;
        valid = valid.min(hu.len());
        h = if lower {
            hu.iter()
                .zip(&ju)
                .map(|(hv, jv)| (2.0 * jv - hv).conj())
                .collect()
        } else {
            hu
        };
        h.truncate(valid);
    }
    j.truncate(valid);
    if valid < 2 {
        return Err(Error::Overflow(format!(
            "cylinder functions at x = {z} not representable"
        )));
    }
    let dj = derivatives(&j);
    j.truncate(valid - 1);
    let (dh, h) = if hankel {
        let dh = derivatives(&h);
        h.truncate(valid - 1);
        (dh, h)
    } else {
        (Vec::new(), h)
    };
    Ok(CylinderBatch {
        x: z,
        j,
        dj,
        h1: h,
        dh1: dh,
    })
}

/// J_l, J_l', H1_l, H1_l' at a single integer order.
pub fn bessel_set(l: i32, x: C) -> Result<CylinderFunctionSet> {
    let n = l.unsigned_abs() as usize;
    if n > MAX_ORDER {
        return Err(Error::Domain(format!("|l| = {n} exceeds {MAX_ORDER}")));
    }
    let b = cylinder_batch(n, x, true)?;
    if b.len() <= n {
        return Err(Error::Overflow(format!(
            "order {l} at x = {x} outside the representable range"
        )));
    }
    let sign = if l < 0 && n % 2 == 1 { -1.0 } else { 1.0 };
    let set = CylinderFunctionSet {
        order: l,
        x,
        j: b.j[n] * sign,
        dj: b.dj[n] * sign,
        h1: b.h1[n] * sign,
        dh1: b.dh1[n] * sign,
    };
    for v in [set.j, set.dj, set.h1, set.dh1] {
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::Overflow(format!("non-finite value at l = {l}, x = {x}")));
        }
    }
    Ok(set)
}

/// K_0(x) e^x and K_1(x) e^x for real x > 0.
pub fn bessel_k01_scaled_real(x: f64) -> Result<(f64, f64)> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("K_n requires x > 0, got {x}")));
    }
    let (a, b) = bessel_k01_scaled(C::new(x, 0.0))?;
    Ok((a.re, b.re))
}

/// J_0(x) and J_1(x) for real x.
pub fn bessel_j01_real(x: f64) -> Result<(f64, f64)> {
    if x == 0.0 {
        return Ok((1.0, 0.0));
    }
    let v = bessel_j_batch(1, C::new(x, 0.0))?;
    Ok((v[0].re, v[1].re))
}
