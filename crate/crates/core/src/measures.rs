//! Symmetric base measures with closed-form moments.
//!
//! Only nonnegative atoms and scale parameters are stored; the negative half
//! is mirrored, so every measure here is symmetric by construction.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::special::gamma;
use crate::{Error, Result};

/// Total-mass tolerance for discrete measures.
pub const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum MeasureKind {
    /// Mass 1/2 at -1 and +1.
    Rademacher,
    /// Centered normal with standard deviation `scale`.
    Gaussian { scale: f64 },
    /// Uniform on `[-half_width, half_width]`.
    Uniform { half_width: f64 },
    /// Mass 1/2 at `-atom` and `+atom`.
    SymmetricTwoPoint { atom: f64 },
    /// Each `(value, prob)` puts `prob / 2` on `-value` and on `+value`;
    /// `zero_mass` sits at the origin.
    SymmetricDiscrete { atoms: Vec<(f64, f64)>, zero_mass: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaseMeasure {
    kind: MeasureKind,
    name: String,
    // Full mirrored support with cumulative masses, for finite kinds.
    table: Option<SupportTable>,
}

#[derive(Debug, Clone, PartialEq)]
struct SupportTable {
    points: Vec<f64>,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl BaseMeasure {
    pub fn rademacher() -> Self {
        Self::build(MeasureKind::Rademacher)
    }

    pub fn gaussian(scale: f64) -> Result<Self> {
        check_positive("gaussian scale", scale)?;
        Ok(Self::build(MeasureKind::Gaussian { scale }))
    }

    pub fn uniform(half_width: f64) -> Result<Self> {
        check_positive("uniform half-width", half_width)?;
        Ok(Self::build(MeasureKind::Uniform { half_width }))
    }

    pub fn two_point(atom: f64) -> Result<Self> {
        check_positive("two-point atom", atom)?;
        Ok(Self::build(MeasureKind::SymmetricTwoPoint { atom }))
    }

    /// Discrete measure from `(value, prob)` pairs with `value >= 0`.
    /// A pair with value 0 puts its mass at the origin. Masses must sum
    /// to 1 and the origin may not carry all of it.
    pub fn discrete(pairs: &[(f64, f64)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidMeasure("discrete measure needs atoms".into()));
        }
        let mut zero_mass = 0.0;
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        for &(v, p) in pairs {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidMeasure(format!("atom {v} must be finite and >= 0")));
            }
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::InvalidMeasure(format!("probability {p} must be >= 0")));
            }
            if v == 0.0 {
                zero_mass += p;
            } else if let Some(slot) = atoms.iter_mut().find(|(x, _)| *x == v) {
                slot.1 += p;
            } else {
                atoms.push((v, p));
            }
        }
        let total: f64 = zero_mass + atoms.iter().map(|a| a.1).sum::<f64>();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidMeasure(format!("total mass {total} != 1")));
        }
        atoms.retain(|a| a.1 > 0.0);
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("measure is the Dirac mass at 0".into()));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self::build(MeasureKind::SymmetricDiscrete { atoms, zero_mass }))
    }

    fn build(kind: MeasureKind) -> Self {
        let name = kind_name(&kind);
        let table = finite_support(&kind).map(|pairs| {
            let mut cumulative = Vec::with_capacity(pairs.len());
            let mut acc = 0.0;
            for &(_, p) in &pairs {
                acc += p;
                cumulative.push(acc);
            }
            SupportTable {
                points: pairs.iter().map(|p| p.0).collect(),
                probs: pairs.iter().map(|p| p.1).collect(),
                cumulative,
            }
        });
        Self { kind, name, table }
    }

    pub fn kind(&self) -> &MeasureKind {
        &self.kind
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// `E|X|^k`, closed form.
    pub fn abs_moment(&self, k: u32) -> f64 {
        let k_f = k as f64;
        match &self.kind {
            MeasureKind::Rademacher => 1.0,
            MeasureKind::Gaussian { scale } => {
                // E|Z|^k = 2^{k/2} Gamma((k+1)/2) / sqrt(pi)
                scale.powi(k as i32) * 2f64.powf(k_f / 2.0) * gamma((k_f + 1.0) / 2.0) / std::f64::consts::PI.sqrt()
            }
            MeasureKind::Uniform { half_width } => half_width.powi(k as i32) / (k_f + 1.0),
            MeasureKind::SymmetricTwoPoint { atom } => atom.powi(k as i32),
            MeasureKind::SymmetricDiscrete { atoms, zero_mass } => {
                let atoms_part: f64 = atoms.iter().map(|&(v, p)| p * v.powi(k as i32)).sum();
                if k == 0 {
                    atoms_part + zero_mass
                } else {
                    atoms_part
                }
            }
        }
    }

    /// sigma^2.
    pub fn variance(&self) -> f64 {
        match &self.kind {
            MeasureKind::Gaussian { scale } => scale * scale,
            _ => self.abs_moment(2),
        }
    }

    /// mu_4.
    pub fn fourth_moment(&self) -> f64 {
        match &self.kind {
            MeasureKind::Gaussian { scale } => 3.0 * scale.powi(4),
            _ => self.abs_moment(4),
        }
    }

    /// `E|X|^5`; finiteness is the moment hypothesis of the self-normalized
    /// limit theorem.
    pub fn abs_fifth_moment(&self) -> f64 {
        match &self.kind {
            MeasureKind::Gaussian { scale } => 8.0 * (2.0 / std::f64::consts::PI).sqrt() * scale.powi(5),
            _ => self.abs_moment(5),
        }
    }

    /// `mu_4 / sigma^4`.
    pub fn kurtosis(&self) -> f64 {
        self.fourth_moment() / self.variance().powi(2)
    }

    /// Whether `int exp(v0 z^2) d rho(z) < inf` for some `v0 > 0`, the
    /// hypothesis under which `T_n / n` concentrates and `S_n / n^{3/4}`
    /// has a quartic limit. Bounded kinds satisfy it for every `v0`;
    /// the Gaussian for `v0 < 1 / (2 scale^2)`.
    pub fn satisfies_star(&self) -> bool {
        match &self.kind {
            MeasureKind::Rademacher
            | MeasureKind::Uniform { .. }
            | MeasureKind::SymmetricTwoPoint { .. }
            | MeasureKind::SymmetricDiscrete { .. } => true,
            MeasureKind::Gaussian { .. } => true,
        }
    }

    /// Largest `v0` (exclusive) for which the exponential square moment is
    /// finite; infinite for bounded support.
    pub fn star_threshold(&self) -> f64 {
        match &self.kind {
            MeasureKind::Gaussian { scale } => 1.0 / (2.0 * scale * scale),
            _ => f64::INFINITY,
        }
    }

    /// Mirrored support as `(value, prob)` sorted by value, for finite kinds.
    pub fn support(&self) -> Option<Vec<(f64, f64)>> {
        self.table.as_ref().map(|t| t.points.iter().copied().zip(t.probs.iter().copied()).collect())
    }

    pub fn is_finite_support(&self) -> bool {
        self.table.is_some()
    }

    /// One draw.
    #[inline]
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            MeasureKind::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            MeasureKind::SymmetricTwoPoint { atom } => {
                if rng.random::<bool>() {
                    *atom
                } else {
                    -atom
                }
            }
            MeasureKind::Gaussian { scale } => scale * rng.sample::<f64, _>(StandardNormal),
            MeasureKind::Uniform { half_width } => half_width * (2.0 * rng.random::<f64>() - 1.0),
            MeasureKind::SymmetricDiscrete { .. } => {
                let table = self.table.as_ref().expect("discrete measures carry a table");
                let u: f64 = rng.random();
                let idx = table.cumulative.partition_point(|&c| c <= u);
                table.points[idx.min(table.points.len() - 1)]
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<f64> {
        (0..count).map(|_| self.sample_one(rng)).collect()
    }

    /// Fills `out` with i.i.d. draws, redrawing until the sum of squares
    /// is positive. Returns that sum.
    pub fn sample_nonzero<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) -> f64 {
        loop {
            let mut t = 0.0;
            for x in out.iter_mut() {
                *x = self.sample_one(rng);
                t += *x * *x;
            }
            if t > 0.0 {
                return t;
            }
        }
    }
}

fn check_positive(what: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidMeasure(format!("{what} must be positive and finite, got {v}")))
    }
}

fn kind_name(kind: &MeasureKind) -> String {
    match kind {
        MeasureKind::Rademacher => "rademacher".into(),
        MeasureKind::Gaussian { scale } => format!("gaussian:{scale}"),
        MeasureKind::Uniform { half_width } => format!("uniform:{half_width}"),
        MeasureKind::SymmetricTwoPoint { atom } => format!("twopoint:{atom}"),
        MeasureKind::SymmetricDiscrete { atoms, zero_mass } => {
            let mut parts: Vec<String> = Vec::new();
            if *zero_mass > 0.0 {
                parts.push(format!("0,{zero_mass}"));
            }
            parts.extend(atoms.iter().map(|(v, p)| format!("{v},{p}")));
            format!("discrete:{}", parts.join(";"))
        }
    }
}

fn finite_support(kind: &MeasureKind) -> Option<Vec<(f64, f64)>> {
    let pairs = match kind {
        MeasureKind::Rademacher => vec![(-1.0, 0.5), (1.0, 0.5)],
        MeasureKind::SymmetricTwoPoint { atom } => vec![(-atom, 0.5), (*atom, 0.5)],
        MeasureKind::SymmetricDiscrete { atoms, zero_mass } => {
            let mut v: Vec<(f64, f64)> = atoms.iter().rev().map(|&(x, p)| (-x, p / 2.0)).collect();
            if *zero_mass > 0.0 {
                v.push((0.0, *zero_mass));
            }
            v.extend(atoms.iter().map(|&(x, p)| (x, p / 2.0)));
            v
        }
        MeasureKind::Gaussian { .. } | MeasureKind::Uniform { .. } => return None,
    };
    Some(pairs)
}

impl fmt::Display for BaseMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl FromStr for BaseMeasure {
    type Err = Error;

    /// Parses `rademacher`, `gaussian:S`, `uniform:A`, `twopoint:X` and
    /// `discrete:v1,p1;v2,p2;...`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h.trim(), Some(a.trim())),
            None => (s, None),
        };
        let number = |a: Option<&str>| -> Result<f64> {
            let a = a.ok_or_else(|| Error::InvalidMeasure(format!("`{head}` needs a parameter")))?;
            a.parse::<f64>().map_err(|_| Error::InvalidMeasure(format!("bad number `{a}` in `{s}`")))
        };
        match head.to_ascii_lowercase().as_str() {
            "rademacher" if arg.is_none() => Ok(Self::rademacher()),
            "gaussian" => Self::gaussian(number(arg)?),
            "uniform" => Self::uniform(number(arg)?),
            "twopoint" => Self::two_point(number(arg)?),
            "discrete" => {
                let body = arg.ok_or_else(|| Error::InvalidMeasure("discrete needs atoms".into()))?;
                let mut pairs = Vec::new();
                for item in body.split(';').filter(|t| !t.trim().is_empty()) {
                    let (v, p) = item
                        .split_once(',')
                        .ok_or_else(|| Error::InvalidMeasure(format!("atom `{item}` is not `value,prob`")))?;
                    let v = number(Some(v.trim()))?;
                    let p = number(Some(p.trim()))?;
                    pairs.push((v, p));
                }
                Self::discrete(&pairs)
            }
            _ => Err(Error::InvalidMeasure(format!("unknown measure `{s}`"))),
        }
    }
}
