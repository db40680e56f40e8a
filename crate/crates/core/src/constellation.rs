//! Constellation geometry and conditional symbol error probability over AWGN.
//!
//! SNR `λ` is the symbol energy over the complex noise density, so a unit
//! energy constellation sees complex noise of variance `1/λ`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::quad::{integrate, QuadControl};
use crate::specfun::{hyp1f1, q_function, Real, SpecError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Hqam,
    Rqam,
    Sqam,
    Xqam32,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Hqam => "hqam",
            Scheme::Rqam => "rqam",
            Scheme::Sqam => "sqam",
            Scheme::Xqam32 => "xqam",
        })
    }
}

impl FromStr for Scheme {
    type Err = ConstellationError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hqam" => Ok(Scheme::Hqam),
            "rqam" => Ok(Scheme::Rqam),
            "sqam" => Ok(Scheme::Sqam),
            "xqam" | "xqam32" => Ok(Scheme::Xqam32),
            other => Err(ConstellationError::UnknownScheme(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConstellationError {
    #[error("unknown scheme `{0}` (expected hqam, rqam, sqam or xqam)")]
    UnknownScheme(String),
    #[error("unsupported order {order} for {scheme}: {supported}")]
    UnsupportedOrder { scheme: Scheme, order: usize, supported: &'static str },
    #[error("aspect ratio sigma must be positive and finite, got {0}")]
    BadSigma(f64),
    #[error("SNR must be positive and finite, got {0}")]
    BadSnr(f64),
}

pub const HQAM_ORDERS: [usize; 5] = [4, 8, 16, 32, 64];

/// A unit-energy two-dimensional signal set.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    pub scheme: Scheme,
    pub points: Vec<[f64; 2]>,
    /// In-phase and quadrature level counts, decision distances and
    /// `d_q/d_i` for the rectangular family.
    pub rect: Option<RectLayout>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectLayout {
    pub mi: usize,
    pub mq: usize,
    pub d_i: f64,
    pub d_q: f64,
    pub sigma: f64,
}

impl Constellation {
    pub fn order(&self) -> usize {
        self.points.len()
    }

    /// `M`-point hexagonal QAM: the `M` triangular-lattice points of least
    /// average energy.
    pub fn hqam(order: usize) -> Result<Self, ConstellationError> {
        if !HQAM_ORDERS.contains(&order) {
            return Err(ConstellationError::UnsupportedOrder {
                scheme: Scheme::Hqam,
                order,
                supported: "one of 4, 8, 16, 32, 64",
            });
        }
        Ok(Constellation { scheme: Scheme::Hqam, points: hex_layout(order), rect: None })
    }

    /// `mi × mq` rectangular QAM with `d_q = sigma·d_i`.
    pub fn rqam(mi: usize, mq: usize, sigma: f64) -> Result<Self, ConstellationError> {
        Self::rect(Scheme::Rqam, mi, mq, sigma)
    }

    pub fn sqam(order: usize) -> Result<Self, ConstellationError> {
        let side = (order as f64).sqrt().round() as usize;
        if side * side != order || !side.is_power_of_two() || side < 2 {
            return Err(ConstellationError::UnsupportedOrder {
                scheme: Scheme::Sqam,
                order,
                supported: "an even power of two (4, 16, 64, ...)",
            });
        }
        Self::rect(Scheme::Sqam, side, side, 1.0)
    }

    fn rect(scheme: Scheme, mi: usize, mq: usize, sigma: f64) -> Result<Self, ConstellationError> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(ConstellationError::BadSigma(sigma));
        }
        if !mi.is_power_of_two() || !mq.is_power_of_two() || mi * mq < 2 {
            return Err(ConstellationError::UnsupportedOrder {
                scheme,
                order: mi * mq,
                supported: "M_I and M_Q powers of two with M_I·M_Q ≥ 2",
            });
        }
        let (fi, fq) = ((mi * mi - 1) as f64, (mq * mq - 1) as f64);
        let d_i = (12.0 / (fi + fq * sigma * sigma)).sqrt();
        let d_q = sigma * d_i;
        let mut points = Vec::with_capacity(mi * mq);
        for k in 0..mq {
            for i in 0..mi {
                let x = (2.0 * i as f64 - (mi as f64 - 1.0)) * d_i / 2.0;
                let y = (2.0 * k as f64 - (mq as f64 - 1.0)) * d_q / 2.0;
                points.push([x, y]);
            }
        }
        Ok(Constellation { scheme, points, rect: Some(RectLayout { mi, mq, d_i, d_q, sigma }) })
    }

    /// 32-point cross: the odd-integer 6×6 grid without its four corners.
    pub fn xqam32() -> Self {
        let s = 20f64.sqrt().recip();
        let mut points = Vec::with_capacity(32);
        for y in (-5..=5).step_by(2) {
            for x in (-5..=5).step_by(2) {
                if (x as i32).abs() == 5 && (y as i32).abs() == 5 {
                    continue;
                }
                points.push([x as f64 * s, y as f64 * s]);
            }
        }
        Constellation { scheme: Scheme::Xqam32, points, rect: None }
    }
}

/// Builds a constellation by scheme and order. Rectangular orders split as
/// `M_I = 2^⌈k/2⌉`, `M_Q = 2^⌊k/2⌋` for `M = 2^k`.
pub fn generate(scheme: Scheme, order: usize, sigma: Option<f64>) -> Result<Constellation, ConstellationError> {
    match scheme {
        Scheme::Hqam => Constellation::hqam(order),
        Scheme::Sqam => Constellation::sqam(order),
        Scheme::Xqam32 => {
            if order != 32 {
                return Err(ConstellationError::UnsupportedOrder { scheme, order, supported: "32" });
            }
            Ok(Constellation::xqam32())
        }
        Scheme::Rqam => {
            if !order.is_power_of_two() || order < 2 {
                return Err(ConstellationError::UnsupportedOrder {
                    scheme,
                    order,
                    supported: "a power of two ≥ 2",
                });
            }
            let k = order.trailing_zeros();
            Constellation::rqam(1 << k.div_ceil(2), 1 << (k / 2), sigma.unwrap_or(1.0))
        }
    }
}

const SQRT3_2: f64 = 0.866_025_403_784_438_6;

// Lattice point a·(1,0) + b·(1/2, √3/2), squared norm a² + ab + b².
fn hex_layout(m: usize) -> Vec<[f64; 2]> {
    const R: i64 = 12;
    let lattice: Vec<(i64, i64)> = (-R..=R).flat_map(|a| (-R..=R).map(move |b| (a, b))).collect();
    let xy = |(a, b): (i64, i64)| [a as f64 + 0.5 * b as f64, b as f64 * SQRT3_2];
    let mi = m as i64;
    let mut best: Option<(i64, usize, Vec<(i64, i64)>)> = None;
    const GRID: usize = 40;
    for iu in 0..=GRID {
        for iw in 0..=(GRID - iu) {
            let (u, w) = (iu as f64 / GRID as f64, iw as f64 / GRID as f64);
            let c = [u + 0.5 * w, w * SQRT3_2];
            let mut order: Vec<(f64, usize)> = lattice
                .iter()
                .enumerate()
                .map(|(idx, &p)| {
                    let q = xy(p);
                    ((q[0] - c[0]).powi(2) + (q[1] - c[1]).powi(2), idx)
                })
                .collect();
            order.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            let chosen: Vec<(i64, i64)> = order[..m].iter().map(|&(_, idx)| lattice[idx]).collect();
            // M²·(average energy about the centroid), exact in lattice units.
            let (sa, sb) = chosen.iter().fold((0, 0), |(x, y), &(a, b)| (x + a, y + b));
            let sq: i64 = chosen.iter().map(|&(a, b)| a * a + a * b + b * b).sum();
            let energy = mi * sq - (sa * sa + sa * sb + sb * sb);
            let links = chosen
                .iter()
                .enumerate()
                .flat_map(|(i, p)| chosen[i + 1..].iter().map(move |q| (p.0 - q.0, p.1 - q.1)))
                .filter(|&(da, db)| da * da + da * db + db * db == 1)
                .count();
            let better = match &best {
                None => true,
                Some((e, l, _)) => energy < *e || (energy == *e && links > *l),
            };
            if better {
                best = Some((energy, links, chosen));
            }
        }
    }
    let (energy, _, chosen) = best.expect("candidate grid is non-empty");
    let avg_energy = energy as f64 / (mi * mi) as f64;
    let (sa, sb) = chosen.iter().fold((0, 0), |(x, y), &(a, b)| (x + a, y + b));
    let cx = (sa as f64 + 0.5 * sb as f64) / m as f64;
    let cy = sb as f64 * SQRT3_2 / m as f64;
    let scale = avg_energy.sqrt().recip();
    chosen
        .into_iter()
        .map(|p| {
            let q = xy(p);
            [(q[0] - cx) * scale, (q[1] - cy) * scale]
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryStats {
    pub d_min: f64,
    pub avg_neighbors: f64,
    pub peak_energy: f64,
    pub avg_energy: f64,
    pub papr: f64,
}

fn dist2(p: [f64; 2], q: [f64; 2]) -> f64 {
    (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)
}

const NEIGHBOR_TOL: f64 = 1e-9;

fn min_distance(points: &[[f64; 2]]) -> f64 {
    let mut d2 = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            d2 = d2.min(dist2(*p, *q));
        }
    }
    d2.sqrt()
}

/// Nearest-neighbour adjacency lists.
fn neighbors(points: &[[f64; 2]], d_min: f64) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); points.len()];
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if (dist2(points[i], points[j]).sqrt() - d_min).abs() <= NEIGHBOR_TOL * d_min {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    adj
}

pub fn stats(c: &Constellation) -> GeometryStats {
    let m = c.points.len() as f64;
    let d_min = min_distance(&c.points);
    let adj = neighbors(&c.points, d_min);
    let avg_neighbors = adj.iter().map(Vec::len).sum::<usize>() as f64 / m;
    let energies = c.points.iter().map(|p| p[0] * p[0] + p[1] * p[1]);
    let peak_energy = energies.clone().fold(0.0, f64::max);
    let avg_energy = energies.sum::<f64>() / m;
    GeometryStats { d_min, avg_neighbors, peak_energy, avg_energy, papr: peak_energy / avg_energy }
}

/// Average number of neighbour pairs that are themselves neighbours, i.e.
/// pairs of nearest neighbours that subtend 60° at a point.
pub fn triangle_pairs(c: &Constellation) -> f64 {
    let d_min = min_distance(&c.points);
    let adj = neighbors(&c.points, d_min);
    let mut count = 0usize;
    for list in &adj {
        for (x, &a) in list.iter().enumerate() {
            for &b in &list[x + 1..] {
                if adj[a].contains(&b) {
                    count += 1;
                }
            }
        }
    }
    count as f64 / c.points.len() as f64
}

/// Maximum-likelihood (minimum-distance) detection, ties to the lowest index.
pub fn detect(received: [f64; 2], c: &Constellation) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, p) in c.points.iter().enumerate() {
        let d = dist2(received, *p);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Parameters of the conditional SEP approximation of each family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SepParams {
    /// `k`: average nearest-neighbour count; `kc`: average 60° neighbour
    /// pair count; `alpha`: `d_min²/2` at unit energy.
    Hqam { k: f64, kc: f64, alpha: f64 },
    Rqam { n1: f64, n2: f64, zeta: f64, rho: f64 },
    Xqam { e1: f64, e2: f64, c: f64, m: f64 },
}

impl SepParams {
    pub fn rqam(mi: usize, mq: usize, sigma: f64) -> Self {
        let zeta = (6.0 / ((mi * mi - 1) as f64 + (mq * mq - 1) as f64 * sigma * sigma)).sqrt();
        SepParams::Rqam { n1: 1.0 - 1.0 / mi as f64, n2: 1.0 - 1.0 / mq as f64, zeta, rho: sigma * zeta }
    }

    pub fn xqam(m: usize) -> Self {
        let m = m as f64;
        let r = (2.0 * m).sqrt();
        SepParams::Xqam { e1: 4.0 - 6.0 / r, e2: 4.0 - 12.0 / r + 12.0 / m, c: 48.0 / (31.0 * m - 32.0), m }
    }
}

pub fn sep_params(c: &Constellation) -> SepParams {
    match (c.scheme, c.rect) {
        (Scheme::Rqam | Scheme::Sqam, Some(r)) => SepParams::rqam(r.mi, r.mq, r.sigma),
        (Scheme::Xqam32, _) => SepParams::xqam(c.points.len()),
        _ => {
            let s = stats(c);
            let alpha = s.d_min * s.d_min / (2.0 * s.avg_energy);
            SepParams::Hqam { k: s.avg_neighbors, kc: triangle_pairs(c), alpha }
        }
    }
}

/// Conditional SEP at instantaneous SNR `λ ≥ 0`.
pub fn sep_conditional(p: &SepParams, lambda: f64) -> f64 {
    let q = |c: f64| q_function((c * lambda).sqrt());
    match *p {
        SepParams::Hqam { k, kc, alpha } => {
            let qa = q(alpha);
            let qb = q(2.0 * alpha / 3.0);
            k * qa + 2.0 / 3.0 * kc * qb * qb - 2.0 * kc * qa * q(alpha / 3.0)
        }
        SepParams::Rqam { n1, n2, zeta, rho } => {
            let (qz, qr) = (q(zeta * zeta), q(rho * rho));
            2.0 * (n1 * qz + n2 * qr - 2.0 * n1 * n2 * qz * qr)
        }
        SepParams::Xqam { e1, e2, c, m } => {
            let q1 = q(2.0 * c);
            e1 * q1 + 4.0 / m * q(4.0 * c) - e2 * q1 * q1
        }
    }
}

/// `d/dλ Q(√(cλ))`.
fn dq(c: f64, lambda: f64) -> f64 {
    -(c / (8.0 * PI * lambda)).sqrt() * (-0.5 * c * lambda).exp()
}

/// `dP/dλ` of the conditional SEP for `λ > 0`, by the product rule on the
/// Q-function form. Every term keeps its own exponential scale, so the value
/// is accurate wherever it is representable.
pub fn sep_derivative(p: &SepParams, lambda: f64) -> Result<f64, ConstellationError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(ConstellationError::BadSnr(lambda));
    }
    let q = |c: f64| q_function((c * lambda).sqrt());
    let d = |c: f64| dq(c, lambda);
    Ok(match *p {
        SepParams::Hqam { k, kc, alpha } => {
            let (a2, a3) = (2.0 * alpha / 3.0, alpha / 3.0);
            k * d(alpha) + 4.0 / 3.0 * kc * q(a2) * d(a2) - 2.0 * kc * (d(alpha) * q(a3) + q(alpha) * d(a3))
        }
        SepParams::Rqam { n1, n2, zeta, rho } => {
            let (z2, r2) = (zeta * zeta, rho * rho);
            2.0 * (n1 * d(z2) + n2 * d(r2) - 2.0 * n1 * n2 * (d(z2) * q(r2) + q(z2) * d(r2)))
        }
        SepParams::Xqam { e1, e2, c, m } => {
            let c2 = 2.0 * c;
            e1 * d(c2) + 4.0 / m * d(4.0 * c) - 2.0 * e2 * q(c2) * d(c2)
        }
    })
}

/// The derivative written as a sum of exponential atoms:
/// `Σ c·λ^{-1/2}·e^{-aλ}` over `power`, plus `Σ c·e^{-bλ}·₁F₁(1; 3/2; kλ)`
/// over `confluent`, all confluent atoms sharing one `b`.
#[derive(Debug, Clone)]
pub struct DerivativeAtoms<R> {
    pub power: Vec<(R, R)>,
    pub confluent: Vec<(R, R)>,
    pub b: R,
}

pub fn derivative_atoms<R: Real>(p: &SepParams) -> DerivativeAtoms<R> {
    let f = R::from_f64;
    let pi = R::pi();
    let two = R::from_u64(2);
    let three = R::from_u64(3);
    match *p {
        SepParams::Hqam { k, kc, alpha } => {
            let (k, kc, al) = (f(k), f(kc), f(alpha));
            let half = R::one().div_u64(2);
            let a2 = (al / (two * pi)).sqrt() * (kc - k) * half;
            let a3 = -(kc / three) * (al / (three * pi)).sqrt();
            let a6 = kc * half * (al / (R::from_u64(6) * pi)).sqrt();
            let s3 = three.sqrt();
            let b1 = two * kc * al / (R::from_u64(9) * pi);
            let b2 = -(kc * al) / (two * s3 * pi);
            DerivativeAtoms {
                power: vec![(a2, al * half), (a3, al / three), (a6, al.div_u64(6))],
                confluent: vec![(b1, al / three), (b2, al * half), (b2, al.div_u64(6))],
                b: two * al / three,
            }
        }
        SepParams::Rqam { n1, n2, zeta, rho } => {
            let (n1, n2, z, r) = (f(n1), f(n2), f(zeta), f(rho));
            let s2p = (two * pi).sqrt();
            let (z2, r2) = (z * z, r * r);
            let cb = -(z * r * n1 * n2) / pi;
            DerivativeAtoms {
                power: vec![
                    (z * n1 * (n2 - R::one()) / s2p, z2.div_u64(2)),
                    (r * n2 * (n1 - R::one()) / s2p, r2.div_u64(2)),
                ],
                confluent: vec![(cb, r2.div_u64(2)), (cb, z2.div_u64(2))],
                b: (z2 + r2).div_u64(2),
            }
        }
        SepParams::Xqam { e1, e2, c, m } => {
            let (e1, e2, c) = (f(e1), f(e2), f(c));
            let four_m = R::from_u64(4) / f(m);
            DerivativeAtoms {
                power: vec![
                    ((e2 - e1).div_u64(2) * (c / pi).sqrt(), c),
                    (-four_m * (c / (two * pi)).sqrt(), two * c),
                ],
                confluent: vec![(-(e2 * c) / pi, c)],
                b: two * c,
            }
        }
    }
}

/// The derivative evaluated from its confluent-hypergeometric form. The
/// atoms cancel against each other as `λ` grows, so this loses relative
/// accuracy at high SNR; [`sep_derivative`] does not.
pub fn sep_derivative_confluent(p: &SepParams, lambda: f64) -> Result<f64, SpecError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(SpecError::Domain { func: "sep_derivative_confluent", detail: format!("λ = {lambda}") });
    }
    let atoms = derivative_atoms::<f64>(p);
    let mut sum = 0.0;
    for (c, a) in &atoms.power {
        sum += c * (-a * lambda).exp() / lambda.sqrt();
    }
    for (c, k) in &atoms.confluent {
        sum += c * (-atoms.b * lambda).exp() * hyp1f1(1.0, 1.5, k * lambda)?;
    }
    Ok(sum)
}

/// Exact SEP of minimum-distance detection over AWGN, from the probability
/// that the noise leaves each Voronoi cell (polar integration per edge).
pub fn exact_sep(c: &Constellation, lambda: f64) -> f64 {
    let sigma2 = 0.5 / lambda;
    let reach = c.points.iter().map(|p| p[0].abs().max(p[1].abs())).fold(0.0, f64::max) + 50.0 * sigma2.sqrt();
    let ctl = QuadControl { rel_tol: 1e-12, abs_tol: 1e-300, max_evals: 20_000 };
    let mut total = 0.0;
    for (i, p) in c.points.iter().enumerate() {
        // Polygon relative to p with per-edge tags: Some(neighbour) or None for the box.
        let mut poly: Vec<([f64; 2], Option<usize>)> = vec![
            ([-reach - p[0], -reach - p[1]], None),
            ([reach - p[0], -reach - p[1]], None),
            ([reach - p[0], reach - p[1]], None),
            ([-reach - p[0], reach - p[1]], None),
        ];
        for (j, q) in c.points.iter().enumerate() {
            if j != i {
                let n = [q[0] - p[0], q[1] - p[1]];
                let h = 0.5 * (n[0] * n[0] + n[1] * n[1]);
                poly = clip(&poly, n, h, j);
            }
        }
        let mut cell = 0.0;
        for e in 0..poly.len() {
            let (v1, tag) = poly[e];
            let v2 = poly[(e + 1) % poly.len()].0;
            let Some(j) = tag else { continue };
            let q = c.points[j];
            let n = [q[0] - p[0], q[1] - p[1]];
            let d = 0.5 * (n[0] * n[0] + n[1] * n[1]).sqrt();
            let phi = n[1].atan2(n[0]);
            let t1 = v1[1].atan2(v1[0]);
            // Subtended angle, robust to the zero-length edges that clipping
            // leaves where several cells meet at one vertex.
            let span = (v1[0] * v2[1] - v1[1] * v2[0]).atan2(v1[0] * v2[0] + v1[1] * v2[1]);
            if span <= 0.0 {
                continue;
            }
            let t2 = t1 + span;
            let g = |t: f64| {
                let cs = (t - phi).cos();
                (-d * d / (2.0 * sigma2 * cs * cs)).exp()
            };
            cell += integrate(g, t1, t2, &ctl).map(|r| r.value).unwrap_or_else(|e| e.value);
        }
        total += cell / (2.0 * PI);
    }
    total / c.points.len() as f64
}

// Clips a convex polygon (counter-clockwise) to the half-plane n·x ≤ h. The
// tag of a vertex names the edge leaving it.
fn clip(poly: &[([f64; 2], Option<usize>)], n: [f64; 2], h: f64, tag: usize) -> Vec<([f64; 2], Option<usize>)> {
    let inside = |v: [f64; 2]| n[0] * v[0] + n[1] * v[1] - h;
    let mut out = Vec::with_capacity(poly.len() + 1);
    for e in 0..poly.len() {
        let (a, ta) = poly[e];
        let (b, _) = poly[(e + 1) % poly.len()];
        let (fa, fb) = (inside(a), inside(b));
        if fa <= 0.0 {
            out.push((a, ta));
        }
        if (fa <= 0.0) != (fb <= 0.0) {
            let t = fa / (fa - fb);
            let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            // Entering the half-plane continues the old edge; leaving starts the new one.
            out.push((x, if fa <= 0.0 { Some(tag) } else { ta }));
        }
    }
    out
}
