//! Tables of `J(μ, ν; A, β) = ∫₀^∞ x^{μ-1} e^{-Ax} K_ν(βx) dx` for `ν ∈ {0, 1}`
//! and `μ = μ₀, μ₀+1, …` with `μ₀ ∈ {1/2, 1}`, for `A > β > 0`.
//!
//! In closed form `J = √π (2β)^ν (A+β)^{-μ-ν} Γ(μ+ν)Γ(μ-ν)/Γ(μ+½)
//! ₂F₁(μ+ν, ν+½; μ+½; m)` with `m = (A-β)/(A+β)`. Along `μ` it is the
//! minimal solution of
//! `(A²-β²) J_{μ+2} - A(2μ+1) J_{μ+1} + (μ²-ν²) J_μ = 0`,
//! whose dominant companion grows faster by `1/m` per step.

use crate::specfun::Real;

/// `J(μ₀+n, 0)` in `col[0][n]` and `J(μ₀+n, 1)` in `col[1][n]`. The entry
/// `col[1][0]` (order 1 at `μ ≤ 1`) diverges and is left at zero.
pub(crate) struct JTable<R> {
    pub col: [Vec<R>; 2],
    /// `log2 J` for cheap magnitude tests.
    pub log2: [Vec<f64>; 2],
}

/// `Γ(t/2)` for a positive integer `t`.
pub(crate) fn gamma_half<R: Real>(t: u64) -> R {
    assert!(t > 0);
    if t % 2 == 0 {
        let mut g = R::one();
        for k in 2..t / 2 {
            g = g.mul_u64(k);
        }
        g
    } else {
        // Γ(n+½) = √π (2n-1)!! / 2^n
        let n = (t - 1) / 2;
        let mut g = R::pi().sqrt();
        for k in 0..n {
            g = g.mul_u64(2 * k + 1);
        }
        g.ldexp(-(n as i64))
    }
}

fn powi<R: Real>(x: R, n: u64) -> R {
    let mut out = R::one();
    let mut base = x;
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            out *= base;
        }
        base = base * base;
        e >>= 1;
    }
    out
}

/// `x^{t/2}` for `t ≥ 0`.
fn pow_half<R: Real>(x: R, t: u64) -> R {
    let p = powi(x, t / 2);
    if t % 2 == 1 {
        p * x.sqrt()
    } else {
        p
    }
}

fn small<R: Real>(term: R, sum: R, bits: u32) -> bool {
    term.is_zero() || term.log2_abs() < sum.log2_abs() - bits as f64
}

/// `J(tμ/2, ν)` from the hypergeometric series, effective for `m ≤ 1/2`.
fn j_series<R: Real>(tmu: u64, nu: u64, a: R, beta: R, m: R) -> R {
    let apb = a + beta;
    let (ta, tb, tc) = (tmu + 2 * nu, 2 * nu + 1, tmu + 1);
    let mut term = R::one();
    let mut sum = R::one();
    for k in 0..100_000u64 {
        term = term.mul_u64((ta + 2 * k) * (tb + 2 * k)) * m;
        term = term.div_u64((tc + 2 * k) * (2 * k + 2));
        sum += term;
        if small(term, sum, R::BITS + 4) {
            break;
        }
    }
    let pref = R::pi().sqrt() * powi(beta.ldexp(1), nu) * gamma_half::<R>(ta) * gamma_half::<R>(tmu - 2 * nu)
        / (gamma_half::<R>(tc) * pow_half(apb, ta));
    pref * sum
}

/// Complete elliptic integrals `K(m)` and `E(m) - (1-m)K(m)` by the AGM.
fn elliptic<R: Real>(m: R, one_minus_m: R) -> (R, R) {
    let mut a = R::one();
    let mut b = one_minus_m.sqrt();
    // c₁ = (1 - √(1-m))/2 written without cancellation.
    let mut c = m / (R::one() + b).ldexp(1);
    let mut acc = c * c;
    let mut pow = 1i64;
    for _ in 0..200 {
        let an = (a + b).ldexp(-1);
        let bn = (a * b).sqrt();
        a = an;
        b = bn;
        if small(a - b, a, R::BITS + 2) {
            break;
        }
        c = (a - b).ldexp(-1);
        pow += 1;
        acc += (c * c).ldexp(pow - 1);
    }
    let k = R::pi() / a.ldexp(1);
    // E - (1-m)K = K (m/2 - Σ_{n≥1} 2^{n-1} c_n²)
    (k, k * (m.ldexp(-1) - acc))
}

/// Seeds `J(μ₀,0), J(μ₀+1,0), J(μ₀+1,1), J(μ₀+2,1)`.
fn seeds<R: Real>(half: bool, a: R, beta: R, m: R, m64: f64) -> [R; 4] {
    let t0 = if half { 1 } else { 2 };
    if m64 <= 0.5 {
        return [
            j_series(t0, 0, a, beta, m),
            j_series(t0 + 2, 0, a, beta, m),
            j_series(t0 + 2, 1, a, beta, m),
            j_series(t0 + 4, 1, a, beta, m),
        ];
    }
    let apb = a + beta;
    let d2 = (a - beta) * apb;
    let (j0, j1) = if half {
        let one_minus_m = beta.ldexp(1) / apb;
        let (k, e_rest) = elliptic(m, one_minus_m);
        let sp = R::pi().sqrt();
        let root = apb.sqrt();
        (sp * k.ldexp(1) / root, sp / (apb * root) * (k - e_rest / m))
    } else {
        let d = d2.sqrt();
        let j0 = ((a + d) / beta).ln() / d;
        (j0, (a * j0 - R::one()) / d2)
    };
    // One forward step for J(μ₀+2, 0), then J(μ,1) = ((μ-1)J(μ-1,0) - A J(μ,0))/β.
    let j2 = (a * j1.mul_u64(t0 + 1) - j0.mul_u64(t0 * t0).div_u64(4)) / d2;
    let k1 = (j0.mul_u64(t0).div_u64(2) - a * j1) / beta;
    let k2 = (j1.mul_u64(t0 + 2).div_u64(2) - a * j2) / beta;
    [j0, j1, k1, k2]
}

/// Builds `J(μ₀+n, ν)` for `n ≤ n_max`.
pub(crate) fn j_table<R: Real>(half: bool, a: R, beta: R, n_max: usize) -> JTable<R> {
    let apb = a + beta;
    let amb = a - beta;
    let m = amb / apb;
    let m64 = m.to_f64();
    assert!(m64 > 0.0 && m64 < 1.0, "J table needs A > β > 0");
    let s = seeds(half, a, beta, m, m64);
    let d2 = amb * apb;
    let t0: u64 = if half { 1 } else { 2 };
    let n = n_max + 1;
    let loss = -(m64.log2());
    let mut col = [vec![R::zero(); n], vec![R::zero(); n]];
    for nu in 0..2u64 {
        // First index with a finite value and the two seeds there.
        let start = nu as usize;
        let (s0, s1) = if nu == 0 { (s[0], s[1]) } else { (s[2], s[3]) };
        let c = &mut col[nu as usize];
        if start >= n {
            continue;
        }
        let steps = n - start;
        let forward_loss = loss * steps as f64;
        let tmu = |k: usize| t0 + 2 * k as u64; // 2μ at index k
        let coef = |k: usize| {
            let t = tmu(k);
            (t * t - 4 * nu * nu, t + 1)
        };
        if forward_loss <= 24.0 || steps <= 2 {
            c[start] = s0;
            if start + 1 < n {
                c[start + 1] = s1;
            }
            let inv = d2.recip();
            for k in start..n.saturating_sub(2) {
                // D2·J_{k+2} = A(2μ+1)J_{k+1} - (μ²-ν²)J_k
                let (q, p) = coef(k);
                c[k + 2] = (a * c[k + 1].mul_u64(p) - c[k].mul_u64(q).div_u64(4)) * inv;
            }
        } else {
            let extra = ((R::BITS as f64 + 24.0) / loss).ceil() as usize + 4;
            let top = n + extra;
            let mut y2 = R::zero();
            let mut y1 = R::one().ldexp(-1000);
            let mut buf: Vec<R> = Vec::with_capacity(n);
            for k in (start..top).rev() {
                // (μ²-ν²) y_k = A(2μ+1) y_{k+1} - D2 y_{k+2}
                let (q, p) = coef(k);
                let y0 = (a * y1.mul_u64(p) - d2 * y2).mul_u64(4).div_u64(q);
                y2 = y1;
                y1 = y0;
                if k < n {
                    buf.push(y0);
                }
                // Keep the unnormalised iterates near unit size.
                if k >= n {
                    let e = y1.log2_abs().round() as i64;
                    y1 = y1.ldexp(-e);
                    y2 = y2.ldexp(-e);
                }
            }
            buf.reverse();
            let scale = s0 / buf[0];
            for (k, v) in buf.into_iter().enumerate() {
                c[start + k] = v * scale;
            }
        }
    }
    let log2 = [
        col[0].iter().map(|x| x.log2_abs()).collect(),
        col[1].iter().map(|x| x.log2_abs()).collect(),
    ];
    JTable { col, log2 }
}
