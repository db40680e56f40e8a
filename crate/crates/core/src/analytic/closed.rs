//! Closed-form ASER.
//!
//! Writing `-P'` as exponential atoms and the two CDFs as their finite
//! expansions, every piece of `∫P'·F_SD·F_SRD` reduces to a Gamma integral or
//! to `J(μ,ν;A,β) = ∫x^{μ-1}e^{-Ax}K_ν(βx)dx`. The terms alternate in sign and
//! dwarf the result at high SNR, so the sum is evaluated in working precision
//! chosen from a ladder: a level is accepted once it and the level below it
//! agree and both sit clearly above their own rounding floor.

use crate::constellation::{derivative_atoms, DerivativeAtoms, SepParams};
use crate::specfun::{binom_u128, omega_table, Fx, Real};

use super::jint::{gamma_half, j_table, JTable};
use super::{AnalyticError, CdfModel};

/// Working widths in 64-bit limbs.
const LADDER: [usize; 12] = [1, 2, 3, 4, 5, 6, 7, 8, 10, 12, 14, 16];
/// Relative agreement demanded between successive levels.
const AGREE: f64 = 1e-9;
/// Bits a level must keep above its rounding floor to count at all.
const MARGIN_BITS: f64 = 30.0;
/// Longest z-series tried before giving up.
const Z_CAP: usize = 20_000;

/// A rung of the working-precision ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Precision(usize);

impl Precision {
    pub const LOWEST: Precision = Precision(0);
    pub const HIGHEST: Precision = Precision(LADDER.len() - 1);

    pub fn bits(self) -> u32 {
        64 * LADDER[self.0] as u32
    }

    /// Smallest rung with at least `bits` of mantissa.
    pub fn at_least(bits: u32) -> Precision {
        (0..LADDER.len()).map(Precision).find(|p| p.bits() >= bits).unwrap_or(Self::HIGHEST)
    }

    pub fn next(self) -> Option<Precision> {
        (self.0 + 1 < LADDER.len()).then_some(Precision(self.0 + 1))
    }

    pub fn prev(self) -> Option<Precision> {
        self.0.checked_sub(1).map(Precision)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormReport {
    pub value: f64,
    /// Rung whose value was accepted.
    pub precision: Precision,
    /// Relative difference from the rung below.
    pub rel_diff: f64,
}

impl ClosedFormReport {
    /// Where a neighbouring evaluation (say the next SNR of a sweep) should
    /// start: one rung below, so that it still gets a comparison.
    pub fn hint(&self) -> Precision {
        self.precision.prev().unwrap_or(Precision::LOWEST)
    }
}

pub fn aser_closed_form(model: &CdfModel, p: &SepParams) -> Result<f64, AnalyticError> {
    aser_closed_form_at(model, p, Precision::LOWEST).map(|r| r.value)
}

/// Climbs the ladder from `start` until two successive rungs agree.
pub fn aser_closed_form_at(model: &CdfModel, p: &SepParams, start: Precision) -> Result<ClosedFormReport, AnalyticError> {
    model.config.validate()?;
    let mut prev: Option<f64> = None;
    let mut level = Some(start);
    while let Some(prec) = level {
        let out = evaluate_at(prec, model, p)?;
        let trusted = out.value > 0.0 && out.value.log2() > out.noise_log2 + MARGIN_BITS;
        if trusted {
            if let Some(v) = prev {
                let rel_diff = ((out.value - v) / out.value).abs();
                if rel_diff <= AGREE {
                    if out.value > 1.0 + 1e-9 {
                        return Err(AnalyticError::OutOfRange { value: out.value });
                    }
                    return Ok(ClosedFormReport { value: out.value.min(1.0), precision: prec, rel_diff });
                }
            }
            prev = Some(out.value);
        } else {
            prev = None;
        }
        level = prec.next();
    }
    Err(AnalyticError::PrecisionExhausted { bits: Precision::HIGHEST.bits() })
}

struct LevelOutput {
    value: f64,
    /// log2 of the largest rounding error any partial sum could carry.
    noise_log2: f64,
}

fn evaluate_at(prec: Precision, model: &CdfModel, p: &SepParams) -> Result<LevelOutput, AnalyticError> {
    match LADDER[prec.0] {
        1 => evaluate::<Fx<1>>(model, p),
        2 => evaluate::<Fx<2>>(model, p),
        3 => evaluate::<Fx<3>>(model, p),
        4 => evaluate::<Fx<4>>(model, p),
        5 => evaluate::<Fx<5>>(model, p),
        6 => evaluate::<Fx<6>>(model, p),
        7 => evaluate::<Fx<7>>(model, p),
        8 => evaluate::<Fx<8>>(model, p),
        10 => evaluate::<Fx<10>>(model, p),
        12 => evaluate::<Fx<12>>(model, p),
        14 => evaluate::<Fx<14>>(model, p),
        _ => evaluate::<Fx<16>>(model, p),
    }
}

fn lg<R: Real>(x: R) -> f64 {
    if x.is_zero() {
        f64::NEG_INFINITY
    } else {
        x.log2_abs()
    }
}

/// `h_z = k^z/(3/2)_z` for every confluent atom and `g_z = Σ_B c_B h_z`,
/// grown on demand, with an upper bound on `log2 |g_z|` that ignores
/// cancellation between atoms.
struct ZCoefficients<R> {
    atoms: Vec<(R, R)>,
    h: Vec<Vec<R>>,
    g: Vec<R>,
    bound: Vec<f64>,
}

impl<R: Real> ZCoefficients<R> {
    fn new(atoms: &DerivativeAtoms<R>) -> Self {
        ZCoefficients {
            atoms: atoms.confluent.clone(),
            h: atoms.confluent.iter().map(|_| Vec::new()).collect(),
            g: Vec::new(),
            bound: Vec::new(),
        }
    }

    fn ensure(&mut self, len: usize) {
        while self.g.len() < len {
            let z = self.g.len();
            let mut g = R::zero();
            let mut hi = f64::NEG_INFINITY;
            for (h, &(c, k)) in self.h.iter_mut().zip(&self.atoms) {
                let next = match h.last() {
                    None => R::one(),
                    Some(&prev) => (prev * k).mul_u64(2).div_u64(2 * z as u64 + 1),
                };
                h.push(next);
                let t = c * next;
                g += t;
                hi = hi.max(lg(t));
            }
            self.g.push(g);
            self.bound.push(hi + (self.atoms.len() as f64).log2());
        }
    }
}

fn powers<R: Real>(x: R, n: usize) -> Vec<R> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = R::one();
    for _ in 0..=n {
        out.push(acc);
        acc *= x;
    }
    out
}

fn factorial<R: Real>(n: usize) -> R {
    (2..=n as u64).fold(R::one(), |acc, k| acc.mul_u64(k))
}

/// `S_q = Σ_z k^z/(3/2)_z · J(1+q+z, ν)` for `q ≤ q_max` and both orders,
/// which is the integral of `x^q e^{-Ax} K_ν(βx) ₁F₁(1; 3/2; kx)`.
struct AtomColumns<R> {
    s: [Vec<R>; 2],
    /// Bits lost to the forward recurrence, if it was used.
    loss: f64,
}

/// One `S_q` by direct summation. All terms are positive. `None` when the
/// table is too short to reach the truncation point.
fn atom_series<R: Real>(tab: &JTable<R>, nu: usize, q: usize, h: &[R]) -> Option<R> {
    let col = &tab.col[nu];
    let mut sum = R::zero();
    let mut last = f64::INFINITY;
    for (z, &hz) in h.iter().enumerate() {
        let n = q + z;
        if n >= col.len() {
            return None;
        }
        let term = hz * col[n];
        sum += term;
        let tl = lg(term);
        if z > 0 && tl < lg(sum) - R::BITS as f64 - 8.0 && tl < last {
            return Some(sum);
        }
        last = tl;
    }
    None
}

/// Fills `S_q` from two summed seeds with the recurrence
/// `((A-k)²-β²) S_{q+2} = 2μ(A-k) S_{q+1} - ((μ-½)²-ν²) S_q + (A-k/2) J_{q+1} - (μ-¼) J_q`
/// (`μ = 1+q`), which follows from the J recurrence and
/// `(z+3/2) h_{z+1} = k h_z`. Its homogeneous part is the J recurrence at
/// `A-k`, so it is run forward only while the growth of the dominant
/// solution stays under 24 bits; otherwise every entry is summed.
fn atom_columns<R: Real>(tab: &JTable<R>, q_max: usize, a: R, beta: R, k: R, h: &[R]) -> Option<AtomColumns<R>> {
    let a1 = a - k;
    let m = ((a1 - beta) / (a1 + beta)).to_f64();
    let loss = -m.log2() * q_max as f64;
    let forward = loss <= 24.0;
    let inv = ((a1 - beta) * (a1 + beta)).recip();
    let forcing = a - k.ldexp(-1);
    let mut s = [vec![R::zero(); q_max + 1], vec![R::zero(); q_max + 1]];
    for nu in 0..2usize {
        if nu > q_max {
            continue;
        }
        let col = &tab.col[nu];
        let out = &mut s[nu];
        if forward {
            out[nu] = atom_series(tab, nu, nu, h)?;
            if nu + 1 <= q_max {
                out[nu + 1] = atom_series(tab, nu, nu + 1, h)?;
            }
            for q in nu..q_max.saturating_sub(1) {
                let t = 2 + 2 * q as u64;
                let c0 = (t - 1) * (t - 1);
                let c0 = R::from_i64(c0 as i64 - 4 * (nu * nu) as i64).ldexp(-2);
                let rhs = (a1 * out[q + 1]).mul_u64(t) - c0 * out[q] + forcing * col[q + 1]
                    - col[q].mul_u64(2 * t - 1).ldexp(-2);
                out[q + 2] = rhs * inv;
            }
        } else {
            for q in nu..=q_max {
                out[q] = atom_series(tab, nu, q, h)?;
            }
        }
    }
    Some(AtomColumns { s, loss: if forward { loss } else { 0.0 } })
}

/// One evaluation of the closed form in arithmetic `R`.
fn evaluate<R: Real>(model: &CdfModel, p: &SepParams) -> Result<LevelOutput, AnalyticError> {
    let cfg = model.config;
    let (ns, nr, nd) = (cfg.ns, cfg.nr, cfg.nd);
    let f = R::from_f64;
    let (l0, l1, l2) = (f(model.snrs.l0), f(model.snrs.l1), f(model.snrs.l2));
    let (inv0, inv1, inv2) = (l0.recip(), l1.recip(), l2.recip());
    let atoms = derivative_atoms::<R>(p);
    let b = atoms.b;
    let k_max = atoms.confluent.iter().map(|(_, k)| k.to_f64()).fold(0.0, f64::max);
    let mut zc = ZCoefficients::new(&atoms);
    let om_d = omega_table(ns.max(nr), nd);
    let om_r = omega_table(ns, nr);

    let mut total = R::zero();
    let mut noise = f64::NEG_INFINITY;

    // C1[v][w]: coefficient of λ^w e^{-vλ/λ₀} in F_SD.
    let inv0_pow = powers(inv0, ns * (nd - 1));
    let c1: Vec<Vec<R>> = (0..=ns)
        .map(|v| {
            (0..=v * (nd - 1))
                .map(|w| {
                    let c = om_d.get_real::<R>(w, v) * R::from_u128(binom_u128(ns as u32, v as u32)) * inv0_pow[w];
                    if v % 2 == 1 {
                        -c
                    } else {
                        c
                    }
                })
                .collect()
        })
        .collect();

    // Direct part: Σ C1 ∫λ^w e^{-sλ} P'(λ) dλ.
    for (v, row) in c1.iter().enumerate() {
        let s = inv0.mul_u64(v as u64);
        for (w, &c) in row.iter().enumerate() {
            let mut l = R::zero();
            let mut hi = f64::NEG_INFINITY;
            for &(ca, a) in &atoms.power {
                let base = a + s;
                let t = ca * gamma_half::<R>(2 * w as u64 + 1) * powers(base.recip(), w)[w] / base.sqrt();
                hi = hi.max(lg(t));
                l += t;
            }
            let base = b + s;
            let inv = base.recip();
            let mut gz = factorial::<R>(w) * powers(inv, w + 1)[w + 1];
            let mut z = 0usize;
            let mut last = f64::INFINITY;
            loop {
                zc.ensure(z + 1);
                let t = zc.g[z] * gz;
                let tl = zc.bound[z] + lg(gz);
                hi = hi.max(tl);
                l += t;
                if z > 2 && tl < hi - R::BITS as f64 - 8.0 && tl < last {
                    break;
                }
                last = tl;
                gz = (gz * inv).mul_u64((w + 1 + z) as u64);
                z += 1;
                if z > Z_CAP {
                    return Err(AnalyticError::SeriesCap { terms: Z_CAP });
                }
            }
            let piece = c * l;
            noise = noise.max(lg(c) + hi);
            total += piece;
        }
    }

    let is1 = l1.sqrt().recip();
    let is2 = l2.sqrt().recip();
    let nd_fact: u128 = (2..nd as u128).product();
    let max_p = ns * (nr - 1) + (nr - 1) * (nd - 1) + nd;
    let is1_pow = powers(is1, 2 * max_p + 2);
    let is2_pow = powers(is2, 2 * max_p + 2 * nd + 2);

    for i in 1..=ns {
        for m in 0..nr {
            let t = inv1.mul_u64(i as u64) + inv2.mul_u64(m as u64 + 1);
            let beta = (is1 * is2).ldexp(1) * R::from_u64((i * (m + 1)) as u64).sqrt();
            let inv_beta = beta.recip();
            let rq = (R::from_u64(i as u64) / R::from_u64(m as u64 + 1)).sqrt();
            let j_max = i * (nr - 1);
            let pmax = j_max + m * (nd - 1) + nd;
            let rq_pow = powers(rq, pmax);
            let rq_neg = powers(rq.recip(), j_max);

            // D[P][ν]: summed coefficients of λ^P K_ν(βλ) e^{-Tλ}.
            let mut d = vec![vec![R::zero(); pmax + 1]; pmax + 1];
            let mut dmag = vec![vec![f64::NEG_INFINITY; pmax + 1]; pmax + 1];
            let mut base = R::from_u128(
                2 * nr as u128 * binom_u128(ns as u32, i as u32) * binom_u128(nr as u32 - 1, m as u32),
            )
            .div_u64(nd_fact as u64);
            if (i + m) % 2 == 1 {
                base = -base;
            }
            for j in 0..=j_max {
                let oj = om_r.get_real::<R>(j, i);
                for n in 0..=m * (nd - 1) {
                    let on = om_d.get_real::<R>(n, m);
                    let pp = j + n + nd;
                    let head = base * oj * on;
                    for r in 0..pp {
                        let theta = r as i64 - j as i64 + 1;
                        let rqt = if theta >= 0 { rq_pow[theta as usize] } else { rq_neg[(-theta) as usize] };
                        let c = head
                            * R::from_u128(binom_u128(pp as u32 - 1, r as u32))
                            * is1_pow[r + j + 1]
                            * is2_pow[2 * nd + 2 * n + j - r - 1]
                            * rqt;
                        let nu = theta.unsigned_abs() as usize;
                        d[pp][nu] += c;
                        dmag[pp][nu] = dmag[pp][nu].max(lg(c));
                    }
                }
            }
            // K_ν = K_{ν-2} + (2(ν-1)/(βλ)) K_{ν-1} pushes every order down to 0 or 1.
            let lb = lg(inv_beta);
            for nu in (2..=pmax).rev() {
                for pp in nu..=pmax {
                    let val = d[pp][nu];
                    if val.is_zero() {
                        continue;
                    }
                    d[pp][nu - 2] += val;
                    d[pp - 1][nu - 1] += (val * inv_beta).mul_u64(2 * (nu as u64 - 1));
                    let mg = dmag[pp][nu];
                    dmag[pp][nu - 2] = dmag[pp][nu - 2].max(mg);
                    dmag[pp - 1][nu - 1] = dmag[pp - 1][nu - 1].max(mg + lb + ((2 * (nu - 1)) as f64).log2());
                    d[pp][nu] = R::zero();
                }
            }

            for (v, row) in c1.iter().enumerate() {
                let s = inv0.mul_u64(v as u64);
                let qmax = row.len() - 1 + pmax;
                // E[ν][q] = Σ_w C1[v][w] D[q-w][ν]
                let mut e = [vec![R::zero(); qmax + 1], vec![R::zero(); qmax + 1]];
                let mut emag = [vec![f64::NEG_INFINITY; qmax + 1], vec![f64::NEG_INFINITY; qmax + 1]];
                for (w, &c) in row.iter().enumerate() {
                    let cl = lg(c);
                    for pp in 0..=pmax {
                        for nu in 0..2 {
                            let dv = d[pp][nu];
                            if !dv.is_zero() {
                                e[nu][w + pp] += c * dv;
                                emag[nu][w + pp] = emag[nu][w + pp].max(cl + dmag[pp][nu]);
                            }
                        }
                    }
                }

                for &(ca, a) in &atoms.power {
                    let tab = j_table::<R>(true, a + s + t, beta, qmax);
                    let cl = lg(ca);
                    let mut acc = R::zero();
                    for nu in 0..2 {
                        for q in nu..=qmax {
                            if e[nu][q].is_zero() {
                                continue;
                            }
                            acc += e[nu][q] * tab.col[nu][q];
                            noise = noise.max(cl + emag[nu][q] + tab.log2[nu][q]);
                        }
                    }
                    total += ca * acc;
                }

                let ab = b + s + t;
                let ratio = (ab.to_f64() + beta.to_f64()) / k_max;
                let mut zcur = ((R::BITS as f64 + 40.0) / ratio.log2().max(1e-3)).ceil() as usize + 8;
                loop {
                    if zcur > Z_CAP {
                        return Err(AnalyticError::SeriesCap { terms: Z_CAP });
                    }
                    let tab = j_table::<R>(false, ab, beta, qmax + zcur);
                    zc.ensure(qmax + zcur + 1);
                    let mut pieces = Vec::with_capacity(atoms.confluent.len());
                    for (&(cb, k), h) in atoms.confluent.iter().zip(&zc.h) {
                        match atom_columns(&tab, qmax, ab, beta, k, h) {
                            Some(cols) => pieces.push((cb, cols)),
                            None => break,
                        }
                    }
                    if pieces.len() < atoms.confluent.len() {
                        zcur *= 2;
                        continue;
                    }
                    for (cb, cols) in pieces {
                        let cl = lg(cb);
                        let mut acc = R::zero();
                        for nu in 0..2 {
                            for q in nu..=qmax {
                                if e[nu][q].is_zero() {
                                    continue;
                                }
                                acc += e[nu][q] * cols.s[nu][q];
                                noise = noise.max(cl + emag[nu][q] + lg(cols.s[nu][q]) + cols.loss);
                            }
                        }
                        total += cb * acc;
                    }
                    break;
                }
            }
        }
    }

    Ok(LevelOutput { value: -total.to_f64(), noise_log2: noise - R::BITS as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{aser_quadrature, avg_snr_from_geometry, build_cdf_model, NetworkConfig};

    fn model(n: usize, db: f64) -> CdfModel {
        let cfg = NetworkConfig::symmetric(n);
        build_cdf_model(&cfg, &avg_snr_from_geometry(&cfg, db)).unwrap()
    }

    #[test]
    fn ladder_navigation() {
        assert_eq!(Precision::LOWEST.bits(), 64);
        assert_eq!(Precision::HIGHEST.bits(), 1024);
        assert_eq!(Precision::at_least(300).bits(), 320);
        assert_eq!(Precision::LOWEST.prev(), None);
        assert_eq!(Precision::HIGHEST.next(), None);
    }

    #[test]
    fn atom_recurrence_matches_summation() {
        type F = Fx<3>;
        let (a, beta, k) = (F::from_f64(0.9), F::from_f64(0.01), F::from_f64(0.5));
        let tab = j_table::<F>(false, a, beta, 1500);
        let mut h = vec![F::one()];
        for z in 0..1400u64 {
            let next = (*h.last().unwrap() * k).mul_u64(2).div_u64(2 * z + 3);
            h.push(next);
        }
        let cols = atom_columns(&tab, 30, a, beta, k, &h).unwrap();
        assert!(cols.loss > 0.0, "recurrence path expected");
        for nu in 0..2 {
            for q in [nu, 5, 17, 30] {
                let direct = atom_series(&tab, nu, q, &h).unwrap();
                let d = ((cols.s[nu][q] - direct) / direct).to_f64().abs();
                assert!(d < 1e-40, "ν={nu} q={q}: rel diff {d:e}");
            }
        }
    }

    #[test]
    fn single_antenna_matches_quadrature() {
        for &db in &[0.0, 10.0, 20.0] {
            let m = model(1, db);
            let p = SepParams::rqam(2, 2, 1.0);
            let cf = aser_closed_form(&m, &p).unwrap();
            let q = aser_quadrature(&m, &p).unwrap();
            assert!(((cf - q) / q).abs() < 1e-7, "db={db}: {cf} vs {q}");
        }
    }
}
