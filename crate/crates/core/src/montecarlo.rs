//! Channel-level simulation of the relay network: Rayleigh draws, joint
//! transmit antenna selection, amplify-and-forward with MRC at every
//! receiver.
//!
//! Channel entries have unit variance per real dimension, so `E|h|² = 2`,
//! and the instantaneous link SNR is `λ̄·‖h‖²/2`.
//!
//! Trials are split into chunks of [`CHUNK`]. Chunk `c` draws from a
//! ChaCha8 generator seeded with the master seed and switched to stream `c`,
//! and the per-chunk moments are merged in chunk order. The estimate thus
//! depends only on `(seed, trials)`, not on how rayon schedules the chunks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::analytic::{AvgSnrTriple, NetworkConfig};
use crate::constellation::{detect, sep_conditional, Constellation, SepParams};

/// Trials per independently seeded sub-stream.
pub const CHUNK: u64 = 1 << 15;

type C64 = [f64; 2];

fn norm2(z: C64) -> f64 {
    z[0] * z[0] + z[1] * z[1]
}

fn cmul(a: C64, b: C64) -> C64 {
    [a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0]]
}

fn conj(a: C64) -> C64 {
    [a[0], -a[1]]
}

fn gaussian<G: Rng + ?Sized>(rng: &mut G, sd: f64) -> C64 {
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    [sd * x, sd * y]
}

/// One realisation of the three channel matrices, row-major with one row
/// per receive antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDraw {
    pub ns: usize,
    pub nr: usize,
    pub nd: usize,
    /// `N_R × N_S`
    pub h_sr: Vec<C64>,
    /// `N_D × N_S`
    pub h_sd: Vec<C64>,
    /// `N_D × N_R`
    pub h_rd: Vec<C64>,
}

impl ChannelDraw {
    fn column(m: &[C64], cols: usize, j: usize) -> impl Iterator<Item = C64> + '_ {
        m.iter().skip(j).step_by(cols).copied()
    }

    /// `‖h_SR^{(i)}‖²`: source antenna `i` to all relay antennas.
    pub fn sr_gain(&self, i: usize) -> f64 {
        Self::column(&self.h_sr, self.ns, i).map(norm2).sum()
    }

    pub fn sd_gain(&self, i: usize) -> f64 {
        Self::column(&self.h_sd, self.ns, i).map(norm2).sum()
    }

    /// `‖h_RD^{(k)}‖²`: relay antenna `k` to all destination antennas.
    pub fn rd_gain(&self, k: usize) -> f64 {
        Self::column(&self.h_rd, self.nr, k).map(norm2).sum()
    }
}

pub fn draw_channels<G: Rng + ?Sized>(cfg: &NetworkConfig, rng: &mut G) -> ChannelDraw {
    let (ns, nr, nd) = (cfg.ns, cfg.nr, cfg.nd);
    let mut fill = |n: usize| (0..n).map(|_| gaussian(rng, 1.0)).collect::<Vec<_>>();
    let h_sr = fill(nr * ns);
    let h_sd = fill(nd * ns);
    let h_rd = fill(nd * nr);
    ChannelDraw { ns, nr, nd, h_sr, h_sd, h_rd }
}

/// Instantaneous SNRs `(λ_SD, λ_SR, λ_RD)` of source antenna `i` and relay
/// antenna `k`.
fn link_snrs(draw: &ChannelDraw, snrs: &AvgSnrTriple, i: usize, k: usize) -> (f64, f64, f64) {
    (snrs.l0 * draw.sd_gain(i) / 2.0, snrs.l1 * draw.sr_gain(i) / 2.0, snrs.l2 * draw.rd_gain(k) / 2.0)
}

fn harmonic(a: f64, b: f64) -> f64 {
    if a + b > 0.0 {
        a * b / (a + b)
    } else {
        0.0
    }
}

/// `λ_SD + λ_SR λ_RD / (λ_SR + λ_RD)` for the antenna pair `(i, k)`.
pub fn e2e_snr(draw: &ChannelDraw, snrs: &AvgSnrTriple, i: usize, k: usize) -> f64 {
    let (sd, sr, rd) = link_snrs(draw, snrs, i, k);
    sd + harmonic(sr, rd)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionResult {
    pub i_star: usize,
    pub k_star: usize,
    pub lambda_e2e: f64,
}

/// Joint argmax of the end-to-end SNR over all `(i, k)`; the first pair in
/// lexicographic order wins ties.
pub fn select_antennas(draw: &ChannelDraw, snrs: &AvgSnrTriple) -> SelectionResult {
    let sd: Vec<f64> = (0..draw.ns).map(|i| snrs.l0 * draw.sd_gain(i) / 2.0).collect();
    let sr: Vec<f64> = (0..draw.ns).map(|i| snrs.l1 * draw.sr_gain(i) / 2.0).collect();
    let rd: Vec<f64> = (0..draw.nr).map(|k| snrs.l2 * draw.rd_gain(k) / 2.0).collect();
    let mut best = SelectionResult { i_star: 0, k_star: 0, lambda_e2e: f64::NEG_INFINITY };
    for i in 0..draw.ns {
        for (k, &r) in rd.iter().enumerate() {
            let v = sd[i] + harmonic(sr[i], r);
            if v > best.lambda_e2e {
                best = SelectionResult { i_star: i, k_star: k, lambda_e2e: v };
            }
        }
    }
    best
}

/// Sample mean with its standard error `√(Σ(x-x̄)²/n)/√n`; for 0/1 samples
/// this is the binomial `√(p(1-p)/n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEstimate {
    pub aser: f64,
    pub std_err: f64,
    pub trials: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if self.n == 0 {
            return o;
        }
        if o.n == 0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * o.n as f64 / n as f64,
            m2: self.m2 + o.m2 + d * d * (self.n as f64 * o.n as f64 / n as f64),
        }
    }
}

/// Runs `sample` `trials` times over the chunked sub-streams and merges.
fn simulate<F>(trials: u64, seed: u64, sample: F) -> SimEstimate
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    assert!(trials >= 1, "at least one trial is required");
    let chunks = trials.div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let n = CHUNK.min(trials - c * CHUNK);
            let mut m = Moments::default();
            for _ in 0..n {
                m.push(sample(&mut rng));
            }
            m
        })
        .collect();
    let m = parts.into_iter().fold(Moments::default(), Moments::merge);
    let var = (m.m2 / m.n as f64).max(0.0);
    SimEstimate { aser: m.mean.clamp(0.0, 1.0), std_err: (var / m.n as f64).sqrt(), trials, seed }
}

/// Average of the conditional SEP at the selected pair's end-to-end SNR.
pub fn aser_semi_analytic(cfg: &NetworkConfig, snrs: &AvgSnrTriple, p: &SepParams, trials: u64, seed: u64) -> SimEstimate {
    simulate(trials, seed, |rng| {
        let draw = draw_channels(cfg, rng);
        sep_conditional(p, select_antennas(&draw, snrs).lambda_e2e)
    })
}

/// MRC over the receive antennas: `ĥ^H y / ‖h‖`, leaving unit-variance noise
/// when the per-antenna noise has unit variance.
fn mrc(h: &[C64], y: &[C64]) -> (C64, f64) {
    let g: f64 = h.iter().map(|&z| norm2(z)).sum::<f64>().sqrt();
    let mut acc = [0.0, 0.0];
    for (&hh, &yy) in h.iter().zip(y) {
        let t = cmul(conj(hh), yy);
        acc[0] += t[0];
        acc[1] += t[1];
    }
    if g > 0.0 {
        ([acc[0] / g, acc[1] / g], g)
    } else {
        ([0.0, 0.0], 0.0)
    }
}

/// Symbol-level simulation of both time slots.
///
/// Every receiver sees unit-variance complex noise and link `AB` carries
/// amplitude `√λ̄_AB · h/√2`. The relay MRC-combines and rescales by
/// `1/√λ_SR` (the approximate gain, proportional to `1/‖h_SR‖`), then
/// forwards from the selected antenna. The destination combines the direct
/// and relayed slots with weights matched to each branch's noise variance and
/// detects the normalised statistic.
pub fn relay_symbol_sim(cfg: &NetworkConfig, snrs: &AvgSnrTriple, c: &Constellation, trials: u64, seed: u64) -> SimEstimate {
    let unit = std::f64::consts::FRAC_1_SQRT_2;
    simulate(trials, seed, |rng| {
        let draw = draw_channels(cfg, rng);
        let sel = select_antennas(&draw, snrs);
        let (i, k) = (sel.i_star, sel.k_star);
        let sym = rng.random_range(0..c.points.len());
        let x = c.points[sym];
        let scaled = |h: C64, amp: f64| [h[0] * amp * unit, h[1] * amp * unit];

        // Slot 1, source to destination and relay.
        let a0 = snrs.l0.sqrt();
        let g_sd: Vec<C64> = ChannelDraw::column(&draw.h_sd, draw.ns, i).map(|h| scaled(h, a0)).collect();
        let y_sd: Vec<C64> = g_sd
            .iter()
            .map(|&g| {
                let n = gaussian(rng, unit);
                let s = cmul(g, x);
                [s[0] + n[0], s[1] + n[1]]
            })
            .collect();
        let a1 = snrs.l1.sqrt();
        let g_sr: Vec<C64> = ChannelDraw::column(&draw.h_sr, draw.ns, i).map(|h| scaled(h, a1)).collect();
        let y_sr: Vec<C64> = g_sr
            .iter()
            .map(|&g| {
                let n = gaussian(rng, unit);
                let s = cmul(g, x);
                [s[0] + n[0], s[1] + n[1]]
            })
            .collect();

        let (z0, amp0) = mrc(&g_sd, &y_sd);
        let (r, amp1) = mrc(&g_sr, &y_sr);
        // Relay output x + n/√γ₁ with γ₁ = amp1².
        let relay_tx = if amp1 > 0.0 { [r[0] / amp1, r[1] / amp1] } else { [0.0, 0.0] };

        // Slot 2, relay antenna k to destination.
        let a2 = snrs.l2.sqrt();
        let g_rd: Vec<C64> = ChannelDraw::column(&draw.h_rd, draw.nr, k).map(|h| scaled(h, a2)).collect();
        let y_rd: Vec<C64> = g_rd
            .iter()
            .map(|&g| {
                let n = gaussian(rng, unit);
                let s = cmul(g, relay_tx);
                [s[0] + n[0], s[1] + n[1]]
            })
            .collect();
        let (z2, amp2) = mrc(&g_rd, &y_rd);

        // z0 = amp0·x + n (var 1); z2 = amp2·x + noise of variance γ₂/γ₁ + 1.
        let (g0, g1, g2) = (amp0 * amp0, amp1 * amp1, amp2 * amp2);
        let var2 = if g1 > 0.0 { g2 / g1 + 1.0 } else { f64::INFINITY };
        let w0 = amp0;
        let w2 = amp2 / var2;
        let den = g0 + g2 / var2;
        let est = if den > 0.0 {
            [(w0 * z0[0] + w2 * z2[0]) / den, (w0 * z0[1] + w2 * z2[1]) / den]
        } else {
            [0.0, 0.0]
        };
        (detect(est, c) != sym) as u8 as f64
    })
}

/// Uniform symbols over AWGN at SNR `λ` (unit average symbol energy) with
/// minimum-distance detection.
pub fn awgn_symbol_sim(c: &Constellation, lambda: f64, trials: u64, seed: u64) -> SimEstimate {
    let sd = (0.5 / lambda).sqrt();
    simulate(trials, seed, |rng| {
        let sym = rng.random_range(0..c.points.len());
        let n = gaussian(rng, sd);
        let x = c.points[sym];
        (detect([x[0] + n[0], x[1] + n[1]], c) != sym) as u8 as f64
    })
}

/// Repeats `run` with doubling trial counts, starting at `initial`, until the
/// relative standard error drops below `rel_err` or `cap` trials are used.
pub fn until_precise(initial: u64, cap: u64, rel_err: f64, mut run: impl FnMut(u64) -> SimEstimate) -> SimEstimate {
    let mut trials = initial.max(1);
    loop {
        let est = run(trials);
        if (est.aser > 0.0 && est.std_err < rel_err * est.aser) || trials >= cap {
            return est;
        }
        trials = (trials * 2).min(cap);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::avg_snr_from_geometry;
    use crate::constellation::{generate, sep_params, Scheme};

    #[test]
    fn chunk_merge_matches_serial() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let mut serial = Moments::default();
        xs.iter().for_each(|&x| serial.push(x));
        let mut parts = [Moments::default(); 3];
        for (i, &x) in xs.iter().enumerate() {
            parts[i % 3].push(x);
        }
        let merged = parts.iter().copied().fold(Moments::default(), Moments::merge);
        assert_eq!(merged.n, serial.n);
        assert!((merged.mean - serial.mean).abs() < 1e-12);
        assert!((merged.m2 - serial.m2).abs() < 1e-8 * serial.m2);
    }

    #[test]
    fn harmonic_limits() {
        assert!((harmonic(1e12, 3.0) - 3.0).abs() < 1e-9);
        assert_eq!(harmonic(2.0, 2.0), 1.0);
        assert_eq!(harmonic(0.0, 0.0), 0.0);
    }

    fn random_draw(cfg: &NetworkConfig, seed: u64) -> ChannelDraw {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        draw_channels(cfg, &mut rng)
    }

    #[test]
    fn draws_are_reproducible() {
        let cfg = NetworkConfig::with_antennas(2, 3, 4);
        let a = random_draw(&cfg, 9);
        assert_eq!(a, random_draw(&cfg, 9));
        assert_ne!(a, random_draw(&cfg, 10));
        assert_eq!((a.h_sr.len(), a.h_sd.len(), a.h_rd.len()), (6, 8, 12));
    }

    #[test]
    fn e2e_from_raw_entries() {
        let cfg = NetworkConfig::with_antennas(2, 2, 3);
        let d = random_draw(&cfg, 3);
        let snrs = AvgSnrTriple { l0: 2.0, l1: 5.0, l2: 7.0 };
        // h_sd is N_D × N_S, row-major.
        let sd: f64 = (0..3).map(|r| norm2(d.h_sd[r * 2 + 1])).sum::<f64>() * 2.0 / 2.0;
        let sr: f64 = (0..2).map(|r| norm2(d.h_sr[r * 2 + 1])).sum::<f64>() * 5.0 / 2.0;
        let rd: f64 = (0..3).map(|r| norm2(d.h_rd[r * 2])).sum::<f64>() * 7.0 / 2.0;
        let want = sd + sr * rd / (sr + rd);
        assert!((e2e_snr(&d, &snrs, 1, 0) - want).abs() < 1e-12 * want);
    }

    #[test]
    fn relay_term_limits() {
        let cfg = NetworkConfig::symmetric(2);
        let d = random_draw(&cfg, 4);
        let snrs = AvgSnrTriple { l0: 1.0, l1: 3.0, l2: 3.0 };
        let (sd, _, rd) = link_snrs(&d, &snrs, 0, 1);
        let big = AvgSnrTriple { l1: 3e9, ..snrs };
        let relay = e2e_snr(&d, &big, 0, 1) - sd;
        assert!((relay - rd).abs() < 1e-6 * rd);
        let x = harmonic(4.5, 4.5);
        assert_eq!(x, 2.25);
    }

    #[test]
    fn selection_is_exhaustive_argmax() {
        let cfg = NetworkConfig::symmetric(2);
        let snrs = avg_snr_from_geometry(&cfg, 5.0);
        for seed in 0..200 {
            let d = random_draw(&cfg, seed);
            let sel = select_antennas(&d, &snrs);
            let mut best = (0, 0, f64::NEG_INFINITY);
            for i in 0..2 {
                for k in 0..2 {
                    let v = e2e_snr(&d, &snrs, i, k);
                    if v > best.2 {
                        best = (i, k, v);
                    }
                }
            }
            assert_eq!((sel.i_star, sel.k_star), (best.0, best.1));
            assert!((sel.lambda_e2e - best.2).abs() <= 1e-12 * best.2);
            assert!(sel.lambda_e2e >= link_snrs(&d, &snrs, sel.i_star, 0).0);
        }
    }

    #[test]
    fn single_candidate_selection() {
        let cfg = NetworkConfig::with_antennas(1, 1, 3);
        let snrs = avg_snr_from_geometry(&cfg, 0.0);
        for seed in 0..20 {
            let sel = select_antennas(&random_draw(&cfg, seed), &snrs);
            assert_eq!((sel.i_star, sel.k_star), (0, 0));
        }
    }

    #[test]
    fn estimates_are_deterministic() {
        let cfg = NetworkConfig::symmetric(2);
        let snrs = avg_snr_from_geometry(&cfg, 3.0);
        let p = SepParams::rqam(4, 4, 1.0);
        let n = 3 * CHUNK + 17;
        let a = aser_semi_analytic(&cfg, &snrs, &p, n, 11);
        assert_eq!(a, aser_semi_analytic(&cfg, &snrs, &p, n, 11));
        assert_ne!(a.aser, aser_semi_analytic(&cfg, &snrs, &p, n, 12).aser);
        assert_eq!(a.trials, n);
    }

    #[test]
    fn noiseless_detection() {
        let c = generate(Scheme::Sqam, 16, None).unwrap();
        assert_eq!(awgn_symbol_sim(&c, 1e8, 100_000, 1).aser, 0.0);
        let cfg = NetworkConfig::symmetric(2);
        let snrs = avg_snr_from_geometry(&cfg, 80.0);
        assert_eq!(relay_symbol_sim(&cfg, &snrs, &c, 100_000, 1).aser, 0.0);
    }

    #[test]
    fn doubling_stops_at_cap() {
        let mut seen = Vec::new();
        let est = until_precise(10, 70, 0.05, |t| {
            seen.push(t);
            SimEstimate { aser: 0.0, std_err: 0.0, trials: t, seed: 0 }
        });
        assert_eq!(seen, vec![10, 20, 40, 70]);
        assert_eq!(est.trials, 70);
    }

    #[test]
    fn single_trial_equals_conditional_sep() {
        let cfg = NetworkConfig::symmetric(2);
        let snrs = avg_snr_from_geometry(&cfg, 8.0);
        let p = sep_params(&generate(Scheme::Hqam, 8, None).unwrap());
        let est = aser_semi_analytic(&cfg, &snrs, &p, 1, 42);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        rng.set_stream(0);
        let draw = draw_channels(&cfg, &mut rng);
        let want = sep_conditional(&p, select_antennas(&draw, &snrs).lambda_e2e);
        assert_eq!(est.aser, want);
        assert_eq!(est.std_err, 0.0);
    }
}
