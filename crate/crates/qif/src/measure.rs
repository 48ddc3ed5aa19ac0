//! Information-flow measures over output partitions.
//!
//! A deterministic program partitions its secret inputs by the observation
//! they produce. Under a uniform prior, every measure supported here is a
//! function of the class sizes `n_1..n_m` and the input count `N`:
//!
//! * Shannon leakage:   `SE = log2 N − (1/N) Σ n_j log2 n_j`
//! * Min-entropy leakage: `ME = log2 m` (the number of classes)
//! * Guessing-entropy leakage: `GE = (N² − Σ n_j²) / (2N)`
//! * Channel capacity: `CC = ME` — the maximum of Shannon leakage over all
//!   priors is attained by the uniform one and equals `log2 m`.
//!
//! Comparisons against a rational threshold are exact wherever feasible:
//! ME/CC and GE comparisons are always exact (big integers and rationals);
//! SE comparisons are exact for modest instances and otherwise fall back to
//! floating point with an explicit tolerance, reporting a comparison that
//! lands inside the tolerance band as indeterminate rather than guessing.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::exec::{equiv, Mode, Observation, ObservationTable};

/// Absolute tolerance for floating-point Shannon comparisons. IEEE doubles
/// carry ~15–16 significant digits; 1e-9 leaves ample headroom for the
/// (few thousand) log2 summands that feed an SE value while still being
/// far tighter than any threshold a user plausibly cares about.
pub const SE_FLOAT_TOLERANCE: f64 = 1e-9;

/// Largest input count for which SE comparisons use exact big-integer
/// arithmetic. `N = 4096` keeps the integers involved to a few hundred
/// kilobits.
pub const SE_EXACT_MAX_N: u64 = 4096;

/// Largest threshold denominator for which SE comparisons stay exact; the
/// denominator multiplies every exponent in the big-integer form.
pub const SE_EXACT_MAX_DENOM: u64 = 16;

/// How a program splits its secret inputs: one class per distinct
/// observation, sizes in descending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputPartition {
    /// Total number of secret inputs, always `2^(high bits)`.
    pub n_inputs: u64,
    /// Class sizes, descending; they sum to `n_inputs`.
    pub sizes: Vec<u64>,
    /// One representative input index per class, aligned with `sizes`.
    pub class_reps: Vec<u64>,
    /// True when the looser termination-insensitive equivalence would have
    /// merged two classes that exact equality kept apart. That relation is
    /// not transitive, so it cannot define the partition itself; the flag
    /// tells the analyst the exact partition may over-separate.
    pub merged_warning: bool,
    /// How many inputs diverged.
    pub diverging_inputs: u64,
}

/// Groups the table's inputs by exact observation equality.
pub fn partition(table: &ObservationTable) -> OutputPartition {
    let mut classes: HashMap<&Observation, (u64, u64)> = HashMap::new();
    let mut diverging_inputs = 0u64;
    for (i, obs) in table.rows.iter().enumerate() {
        let entry = classes.entry(obs).or_insert((0, i as u64));
        entry.0 += 1;
        if matches!(obs, Observation::Diverged { .. }) {
            diverging_inputs += 1;
        }
    }
    let mut ordered: Vec<(&Observation, u64, u64)> = classes
        .into_iter()
        .map(|(obs, (size, rep))| (obs, size, rep))
        .collect();
    ordered.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));

    let merged_warning = (0..ordered.len()).any(|i| {
        (i + 1..ordered.len()).any(|j| equiv(table.mode, ordered[i].0, ordered[j].0))
    });

    OutputPartition {
        n_inputs: table.n_inputs(),
        sizes: ordered.iter().map(|c| c.1).collect(),
        class_reps: ordered.iter().map(|c| c.2).collect(),
        merged_warning,
        diverging_inputs,
    }
}

/// Which measure a value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeasureKind {
    #[serde(rename = "SE")]
    Se,
    #[serde(rename = "ME")]
    Me,
    #[serde(rename = "GE")]
    Ge,
    #[serde(rename = "CC")]
    Cc,
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MeasureKind::Se => "SE",
            MeasureKind::Me => "ME",
            MeasureKind::Ge => "GE",
            MeasureKind::Cc => "CC",
        })
    }
}

/// Exact representation backing a measure value; the `f64` view is for
/// display only, decisions go through [`compare`].
#[derive(Debug, Clone, PartialEq)]
pub enum ExactForm {
    /// ME/CC: the value is `log2` of this class count.
    ClassCount(u64),
    /// GE: an exact rational.
    Rational(BigRational),
    /// SE: determined by the partition itself.
    Partition { n: u64, sizes: Vec<u64> },
}

impl fmt::Display for ExactForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExactForm::ClassCount(m) => write!(f, "log2({m})"),
            ExactForm::Rational(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            ExactForm::Partition { n, sizes } => {
                write!(f, "partition N={n} sizes={sizes:?}")
            }
        }
    }
}

/// A measure value with both a display float and its exact form.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureValue {
    pub kind: MeasureKind,
    pub value: f64,
    pub exact: ExactForm,
}

/// Shannon-entropy leakage under the uniform prior.
pub fn shannon_qif(p: &OutputPartition) -> MeasureValue {
    let n = p.n_inputs as f64;
    let sum: f64 = p
        .sizes
        .iter()
        .map(|&s| {
            let s = s as f64;
            s * s.log2()
        })
        .sum();
    MeasureValue {
        kind: MeasureKind::Se,
        value: n.log2() - sum / n,
        exact: ExactForm::Partition {
            n: p.n_inputs,
            sizes: p.sizes.clone(),
        },
    }
}

/// Min-entropy leakage under the uniform prior: `log2` of the number of
/// distinct observations.
pub fn min_entropy_qif(p: &OutputPartition) -> MeasureValue {
    let m = p.sizes.len() as u64;
    MeasureValue {
        kind: MeasureKind::Me,
        value: (m as f64).log2(),
        exact: ExactForm::ClassCount(m),
    }
}

/// Guessing-entropy leakage under the uniform prior, as an exact rational.
pub fn guessing_qif(p: &OutputPartition) -> MeasureValue {
    let n = BigInt::from(p.n_inputs);
    let sum_sq: BigInt = p.sizes.iter().map(|&s| BigInt::from(s) * s).sum();
    let value = BigRational::new(&n * &n - sum_sq, 2 * n);
    MeasureValue {
        kind: MeasureKind::Ge,
        value: value.to_f64().unwrap_or(f64::NAN),
        exact: ExactForm::Rational(value),
    }
}

/// Channel capacity: the maximum Shannon leakage over all priors, which
/// for a deterministic program equals the min-entropy leakage under the
/// uniform prior.
pub fn channel_capacity(p: &OutputPartition) -> MeasureValue {
    let me = min_entropy_qif(p);
    MeasureValue {
        kind: MeasureKind::Cc,
        ..me
    }
}

/// Direction of a threshold comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    /// `value > q`
    Greater,
    /// `value ≤ q`
    LessEq,
}

/// Result of a comparison. `WithinTolerance` arises only on the
/// floating-point SE path when the value and threshold are closer than
/// [`SE_FLOAT_TOLERANCE`]; exact paths always answer definitely.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareOutcome {
    True,
    False,
    WithinTolerance,
}

fn outcome(ord: Ordering, rel: Relation) -> CompareOutcome {
    let holds = match rel {
        Relation::Greater => ord == Ordering::Greater,
        Relation::LessEq => ord != Ordering::Greater,
    };
    if holds {
        CompareOutcome::True
    } else {
        CompareOutcome::False
    }
}

/// `base^exp` by square-and-multiply; `num`'s own `pow` takes a `u32`
/// exponent, which is too small for the exact SE form.
fn big_pow(base: &BigUint, mut exp: u64) -> BigUint {
    let mut result = BigUint::one();
    let mut acc = base.clone();
    while exp > 0 {
        if exp & 1 == 1 {
            result *= &acc;
        }
        exp >>= 1;
        if exp > 0 {
            acc = &acc * &acc;
        }
    }
    result
}

/// Exact sign of `log2(m) − q` for `m ≥ 1`, `q = p/r ≥ 0`.
fn cmp_log2_vs_q(m: u64, q: &BigRational) -> Ordering {
    assert!(m >= 1);
    let p = q.numer();
    let r = q.denom();
    if m == 1 {
        // log2(1) = 0
        return BigInt::zero().cmp(p);
    }
    if m.is_power_of_two() {
        let t = m.trailing_zeros();
        return (r * BigInt::from(t)).cmp(p);
    }
    // 2^t < m < 2^(t+1) strictly, since m is not a power of two.
    let t = 63 - m.leading_zeros();
    if &(r * BigInt::from(t)) >= p {
        return Ordering::Greater; // log2 m > t ≥ p/r
    }
    if &(r * BigInt::from(t + 1)) <= p {
        return Ordering::Less; // log2 m < t+1 ≤ p/r
    }
    // r·t < p < r·(t+1): decide m^r vs 2^p exactly. Exponents here are
    // bounded by r·(t+1), so this stays cheap for thresholds with modest
    // denominators.
    let r = r.to_u64().expect("threshold denominator is impractically large");
    let p = p.to_u64().expect("threshold numerator is impractically large");
    big_pow(&BigUint::from(m), r).cmp(&(BigUint::one() << p))
}

/// Exact sign of `SE(partition) − q`, usable when `n` and the threshold
/// denominator are within the exact-zone limits.
///
/// With `N = n`, `SE > p/r  ⇔  N^(N·r) > 2^(N·p) · Π n_j^(n_j·r)` — both
/// sides are what you get by exponentiating `r·N·SE` and `r·N·q` base 2.
fn cmp_se_exact(n: u64, sizes: &[u64], q: &BigRational) -> Ordering {
    let nh = n.trailing_zeros() as u64; // n is always a power of two
    let r = q
        .denom()
        .to_u64()
        .expect("exact SE zone requires a small denominator");
    let p = q.numer().to_u64().expect("threshold out of exact SE range");
    let lhs = BigUint::one() << (nh * n * r);
    let mut rhs = BigUint::one() << (n * p);
    for &s in sizes {
        if s > 1 {
            rhs *= big_pow(&BigUint::from(s), s * r);
        }
    }
    lhs.cmp(&rhs)
}

/// Compares a measure value against a non-negative rational threshold.
///
/// ME, CC, and GE comparisons are always exact. SE comparisons are exact
/// when `N ≤ SE_EXACT_MAX_N` and the threshold denominator is at most
/// `SE_EXACT_MAX_DENOM`; otherwise floating point decides, and a result
/// inside the tolerance band is reported as `WithinTolerance`.
pub fn compare(v: &MeasureValue, q: &BigRational, rel: Relation) -> CompareOutcome {
    assert!(!q.is_negative(), "thresholds must be non-negative");
    match &v.exact {
        ExactForm::ClassCount(m) => outcome(cmp_log2_vs_q(*m, q), rel),
        ExactForm::Rational(value) => outcome(value.cmp(q), rel),
        ExactForm::Partition { n, sizes } => {
            // A threshold at or above log2 N decides immediately: SE never
            // exceeds log2 N. This also keeps the exact-zone exponents small.
            let nh = n.trailing_zeros();
            if q >= &BigRational::from(BigInt::from(nh)) {
                return outcome(
                    if q > &BigRational::from(BigInt::from(nh)) {
                        Ordering::Less
                    } else {
                        cmp_se_at_max(sizes)
                    },
                    rel,
                );
            }
            let denom_ok = q.denom().to_u64().is_some_and(|r| r <= SE_EXACT_MAX_DENOM);
            if *n <= SE_EXACT_MAX_N && denom_ok {
                outcome(cmp_se_exact(*n, sizes, q), rel)
            } else {
                let qf = q.to_f64().unwrap_or(f64::NAN);
                if (v.value - qf).abs() <= SE_FLOAT_TOLERANCE {
                    CompareOutcome::WithinTolerance
                } else {
                    outcome(
                        v.value.partial_cmp(&qf).unwrap_or(Ordering::Equal),
                        rel,
                    )
                }
            }
        }
    }
}

/// Sign of `SE − log2 N`: equality holds exactly when every class is a
/// singleton; otherwise SE is strictly below.
fn cmp_se_at_max(sizes: &[u64]) -> Ordering {
    if sizes.iter().all(|&s| s == 1) {
        Ordering::Equal
    } else {
        Ordering::Less
    }
}

/// Parses a non-negative rational from `p/r`, integer, or finite decimal
/// notation. Decimals convert exactly (`0.75` is 3/4, not a float).
pub fn parse_rational(s: &str) -> Result<BigRational, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty threshold".into());
    }
    let parse_int = |digits: &str, what: &str| -> Result<BigInt, String> {
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("invalid {what} {digits:?}: expected decimal digits"));
        }
        digits
            .parse::<BigInt>()
            .map_err(|e| format!("invalid {what} {digits:?}: {e}"))
    };
    if let Some((num, den)) = s.split_once('/') {
        let num = parse_int(num, "numerator")?;
        let den = parse_int(den, "denominator")?;
        if den.is_zero() {
            return Err("denominator must be nonzero".into());
        }
        return Ok(BigRational::new(num, den));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        let whole = if whole.is_empty() {
            BigInt::zero()
        } else {
            parse_int(whole, "integer part")?
        };
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("invalid fractional part {frac:?}"));
        }
        let scale = big_pow(&BigUint::from(10u32), frac.len() as u64);
        let scale = BigInt::from(scale);
        let frac_val = parse_int(frac, "fractional part")?;
        return Ok(BigRational::new(whole * &scale + frac_val, scale));
    }
    Ok(BigRational::from(parse_int(s, "threshold")?))
}

/// Renders a rational as `p/r` (the denominator is kept even when 1, so
/// the format is uniform).
pub fn rational_string(q: &BigRational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

/// Exact forms of all four measures, stringified for reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactStrings {
    #[serde(rename = "SE")]
    pub se: String,
    #[serde(rename = "ME")]
    pub me: String,
    #[serde(rename = "GE")]
    pub ge: String,
    #[serde(rename = "CC")]
    pub cc: String,
}

/// The full measurement of one program, serializable as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub program: String,
    pub mode: Mode,
    #[serde(rename = "N")]
    pub n_inputs: u64,
    pub class_sizes: Vec<u64>,
    #[serde(rename = "SE")]
    pub se: f64,
    #[serde(rename = "ME")]
    pub me: f64,
    #[serde(rename = "GE")]
    pub ge: f64,
    #[serde(rename = "CC")]
    pub cc: f64,
    pub exact_forms: ExactStrings,
    pub warnings: Vec<String>,
}

/// Evaluates every measure on a partition and bundles the results.
pub fn report(program: &str, mode: Mode, p: &OutputPartition) -> MeasureReport {
    let se = shannon_qif(p);
    let me = min_entropy_qif(p);
    let ge = guessing_qif(p);
    let cc = channel_capacity(p);
    let mut warnings = Vec::new();
    if p.diverging_inputs > 0 {
        warnings.push(format!(
            "{} of {} inputs diverge; divergence is treated as one observable class",
            p.diverging_inputs, p.n_inputs
        ));
    }
    if p.merged_warning {
        warnings.push(
            "termination-insensitive equivalence would merge some classes that exact \
             observation equality keeps apart"
                .to_string(),
        );
    }
    MeasureReport {
        program: program.to_string(),
        mode,
        n_inputs: p.n_inputs,
        class_sizes: p.sizes.clone(),
        se: se.value,
        me: me.value,
        ge: ge.value,
        cc: cc.value,
        exact_forms: ExactStrings {
            se: se.exact.to_string(),
            me: me.exact.to_string(),
            ge: ge.exact.to_string(),
            cc: cc.exact.to_string(),
        },
        warnings,
    }
}
