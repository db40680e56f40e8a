//! `key = value` sweep configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use relay_aser::analytic::NetworkConfig;
use relay_aser::constellation::{generate, Constellation, ConstellationError, Scheme};
use thiserror::Error;

pub const KEYS: [&str; 18] = [
    "scheme",
    "order",
    "mi",
    "mq",
    "sigma",
    "ns",
    "nr",
    "nd",
    "phi",
    "dsr_ratio",
    "drd_ratio",
    "snr_start_db",
    "snr_stop_db",
    "snr_step_db",
    "evaluators",
    "trials",
    "seed",
    "output",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Evaluator {
    Closed,
    Quadrature,
    McSemi,
    McSymbol,
}

impl FromStr for Evaluator {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "closed" => Ok(Evaluator::Closed),
            "quadrature" => Ok(Evaluator::Quadrature),
            "mc-semi" => Ok(Evaluator::McSemi),
            "mc-symbol" => Ok(Evaluator::McSymbol),
            other => Err(format!("unknown evaluator `{other}` (expected closed, quadrature, mc-semi or mc-symbol)")),
        }
    }
}

/// Where a setting came from, for error messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Flag,
    Default,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Flag => f.write_str("command line"),
            Origin::Default => f.write_str("defaults"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{origin}: {message}")]
pub struct ConfigError {
    pub origin: Origin,
    pub message: String,
}

fn err(origin: &Origin, message: impl Into<String>) -> ConfigError {
    ConfigError { origin: origin.clone(), message: message.into() }
}

/// Raw settings before validation. Later sources override earlier ones.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<&'static str, (String, Origin)>,
}

fn known_key(key: &str) -> Option<&'static str> {
    KEYS.iter().copied().find(|k| *k == key)
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut raw = RawConfig::default();
        for (idx, line) in text.lines().enumerate() {
            let origin = Origin::Line(idx + 1);
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(&origin, format!("expected `key = value`, found `{content}`")))?;
            let key = key.trim();
            let k = known_key(key).ok_or_else(|| err(&origin, format!("unknown key `{key}`")))?;
            if let Some((_, first)) = raw.entries.get(k) {
                return Err(err(&origin, format!("`{k}` already set on {first}")));
            }
            raw.entries.insert(k, (value.trim().to_string(), origin));
        }
        Ok(raw)
    }

    /// Overrides a key from the command line.
    pub fn set_flag(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let k = known_key(key).ok_or_else(|| err(&Origin::Flag, format!("unknown key `{key}`")))?;
        self.entries.insert(k, (value.trim().to_string(), Origin::Flag));
        Ok(())
    }

    fn get<T: FromStr>(&self, key: &'static str) -> Result<Option<(T, Origin)>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some((v, o)) => v
                .parse::<T>()
                .map(|x| Some((x, o.clone())))
                .map_err(|e| err(o, format!("malformed value `{v}` for `{key}`: {e}"))),
        }
    }

    fn get_or<T: FromStr>(&self, key: &'static str, default: T) -> Result<(T, Origin), ConfigError>
    where
        T::Err: fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or((default, Origin::Default)))
    }

    pub fn resolve(&self) -> Result<SweepSpec, ConfigError> {
        let (scheme, scheme_origin) =
            self.get::<Scheme>("scheme")?.ok_or_else(|| err(&Origin::Default, "`scheme` is required"))?;
        let order = self.get::<usize>("order")?;
        let mi = self.get::<usize>("mi")?;
        let mq = self.get::<usize>("mq")?;
        let sigma = self.get::<f64>("sigma")?;
        let constellation = build_constellation(scheme, &scheme_origin, order, mi, mq, sigma)?;

        let (ns, ons) = self.get_or("ns", 2usize)?;
        let (nr, onr) = self.get_or("nr", 2usize)?;
        let (nd, ond) = self.get_or("nd", 2usize)?;
        for (name, n, o) in [("ns", ns, &ons), ("nr", nr, &onr), ("nd", nd, &ond)] {
            if !(1..=8).contains(&n) {
                return Err(err(o, format!("`{name}` must lie in 1..=8, got {n}")));
            }
        }
        let (phi, ophi) = self.get_or("phi", 2.5f64)?;
        if !(phi >= 0.0 && phi.is_finite()) {
            return Err(err(&ophi, format!("`phi` must be non-negative, got {phi}")));
        }
        let (dsr, odsr) = self.get_or("dsr_ratio", 1.0f64 / 3.0)?;
        let (drd, odrd) = self.get_or("drd_ratio", 2.0f64 / 3.0)?;
        for (name, d, o) in [("dsr_ratio", dsr, &odsr), ("drd_ratio", drd, &odrd)] {
            if !(d > 0.0 && d.is_finite()) {
                return Err(err(o, format!("`{name}` must be positive, got {d}")));
            }
        }

        let (start, _) = self.get_or("snr_start_db", 0.0f64)?;
        let (stop, ostop) = self.get_or("snr_stop_db", 30.0f64)?;
        let (step, ostep) = self.get_or("snr_step_db", 1.0f64)?;
        if !(start.is_finite() && stop.is_finite()) {
            return Err(err(&ostop, "SNR limits must be finite"));
        }
        if start > stop {
            return Err(err(&ostop, format!("snr_stop_db ({stop}) is below snr_start_db ({start})")));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(err(&ostep, format!("`snr_step_db` must be positive, got {step}")));
        }

        let (evaluators, oev) = match self.entries.get("evaluators") {
            None => (vec![Evaluator::Closed], Origin::Default),
            Some((v, o)) => {
                let mut list = Vec::new();
                for part in v.split(',').filter(|s| !s.trim().is_empty()) {
                    let e = part.parse::<Evaluator>().map_err(|m| err(o, m))?;
                    if !list.contains(&e) {
                        list.push(e);
                    }
                }
                list.sort();
                (list, o.clone())
            }
        };
        if evaluators.is_empty() {
            return Err(err(&oev, "at least one evaluator is required"));
        }
        if evaluators.contains(&Evaluator::McSemi) && evaluators.contains(&Evaluator::McSymbol) {
            return Err(err(&oev, "choose one of mc-semi and mc-symbol: the output has a single Monte Carlo column"));
        }

        let trials = match self.get::<u64>("trials")? {
            Some((0, o)) => return Err(err(&o, "`trials` must be at least 1")),
            Some((t, _)) => Some(t),
            None => None,
        };
        let (seed, _) = self.get_or("seed", 1u64)?;
        let output = self.entries.get("output").map(|(v, _)| PathBuf::from(v));

        Ok(SweepSpec {
            constellation,
            network: NetworkConfig { ns, nr, nd, d_sd: 1.0, d_sr: dsr, d_rd: drd, phi },
            snr_start_db: start,
            snr_stop_db: stop,
            snr_step_db: step,
            evaluators,
            trials,
            seed,
            output,
        })
    }
}

fn build_constellation(
    scheme: Scheme,
    origin: &Origin,
    order: Option<(usize, Origin)>,
    mi: Option<(usize, Origin)>,
    mq: Option<(usize, Origin)>,
    sigma: Option<(f64, Origin)>,
) -> Result<Constellation, ConfigError> {
    let fail = |o: &Origin, e: ConstellationError| err(o, e.to_string());
    if scheme == Scheme::Rqam {
        if let (Some((i, oi)), Some((q, _))) = (&mi, &mq) {
            if let Some((m, om)) = &order {
                if *m != i * q {
                    return Err(err(om, format!("order {m} disagrees with mi × mq = {}", i * q)));
                }
            }
            let s = sigma.as_ref().map_or(1.0, |x| x.0);
            return Constellation::rqam(*i, *q, s).map_err(|e| fail(oi, e));
        }
        if mi.is_some() != mq.is_some() {
            let o = mi.as_ref().or(mq.as_ref()).map(|x| x.1.clone()).unwrap_or(Origin::Default);
            return Err(err(&o, "`mi` and `mq` must be given together"));
        }
    } else if let Some((_, o)) = mi.as_ref().or(mq.as_ref()) {
        return Err(err(o, format!("`mi`/`mq` apply only to rqam, not {scheme}")));
    }
    if scheme != Scheme::Rqam {
        if let Some((_, o)) = &sigma {
            return Err(err(o, format!("`sigma` applies only to rqam, not {scheme}")));
        }
    }
    let (m, om) = order.ok_or_else(|| err(origin, format!("`order` is required for {scheme}")))?;
    generate(scheme, m, sigma.map(|s| s.0)).map_err(|e| fail(&om, e))
}

/// A validated sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub constellation: Constellation,
    pub network: NetworkConfig,
    pub snr_start_db: f64,
    pub snr_stop_db: f64,
    pub snr_step_db: f64,
    /// Sorted, without duplicates.
    pub evaluators: Vec<Evaluator>,
    /// Fixed Monte Carlo trial count; `None` selects adaptive sizing.
    pub trials: Option<u64>,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

impl SweepSpec {
    pub fn grid(&self) -> Vec<f64> {
        let n = ((self.snr_stop_db - self.snr_start_db) / self.snr_step_db + 1e-9).floor() as usize + 1;
        (0..n).map(|j| self.snr_start_db + j as f64 * self.snr_step_db).collect()
    }

    pub fn wants(&self, e: Evaluator) -> bool {
        self.evaluators.contains(&e)
    }

    pub fn wants_mc(&self) -> bool {
        self.wants(Evaluator::McSemi) || self.wants(Evaluator::McSymbol)
    }
}

pub fn parse_config(text: &str) -> Result<SweepSpec, ConfigError> {
    RawConfig::parse(text)?.resolve()
}
