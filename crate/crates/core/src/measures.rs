//! Finite signed measures on the real line.
//!
//! A [`SignedMeasure`] is a finite sum of Dirac atoms plus a piecewise-constant
//! density. Both parts are kept in canonical form (sorted, merged, no zero
//! entries) so that two representations of the same measure compare equal
//! bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{GbvError, Result};

/// Which one-sided limit a trace or a cumulative sum refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Minus,
    Plus,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Minus, Side::Plus];

    pub fn flip(self) -> Side {
        match self {
            Side::Minus => Side::Plus,
            Side::Plus => Side::Minus,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Minus => "minus",
            Side::Plus => "plus",
        }
    }
}

impl std::str::FromStr for Side {
    type Err = GbvError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minus" | "-" => Ok(Side::Minus),
            "plus" | "+" => Ok(Side::Plus),
            other => Err(GbvError::InvalidMeasurement(format!(
                "unknown side {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An interval of the real line with explicit open/closed endpoint flags.
///
/// Infinite endpoints are always open.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
    lo_closed: bool,
    hi_closed: bool,
}

impl Interval {
    pub fn new(lo: f64, hi: f64, lo_closed: bool, hi_closed: bool) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() {
            return Err(GbvError::InvalidInterval("NaN endpoint".into()));
        }
        if lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return Err(GbvError::InvalidInterval(format!("[{lo}, {hi}] is empty")));
        }
        let lo_closed = lo_closed && lo.is_finite();
        let hi_closed = hi_closed && hi.is_finite();
        let nonempty = lo < hi || (lo == hi && lo_closed && hi_closed);
        if !nonempty {
            return Err(GbvError::InvalidInterval(format!("({lo}, {hi}) is empty")));
        }
        Ok(Interval {
            lo,
            hi,
            lo_closed,
            hi_closed,
        })
    }

    /// `[lo, hi]`, or `[lo, +inf)` when `hi` is infinite.
    pub fn closed(lo: f64, hi: f64) -> Result<Self> {
        Self::new(lo, hi, true, true)
    }

    pub fn real_line() -> Self {
        Interval {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
            lo_closed: false,
            hi_closed: false,
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn lo_closed(&self) -> bool {
        self.lo_closed
    }

    pub fn hi_closed(&self) -> bool {
        self.hi_closed
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_closed {
            x >= self.lo
        } else {
            x > self.lo
        };
        let below = if self.hi_closed {
            x <= self.hi
        } else {
            x < self.hi
        };
        above && below
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        let lo_ok =
            self.lo > other.lo || (self.lo == other.lo && (other.lo_closed || !self.lo_closed));
        let hi_ok =
            self.hi < other.hi || (self.hi == other.hi && (other.hi_closed || !self.hi_closed));
        lo_ok && hi_ok
    }
}

/// A Dirac atom `weight * delta_location`. Serialized as `[location, weight]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64)", into = "(f64, f64)")]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

impl Atom {
    pub fn new(location: f64, weight: f64) -> Self {
        Atom { location, weight }
    }
}

impl From<(f64, f64)> for Atom {
    fn from((location, weight): (f64, f64)) -> Self {
        Atom { location, weight }
    }
}

impl From<Atom> for (f64, f64) {
    fn from(a: Atom) -> Self {
        (a.location, a.weight)
    }
}

/// Constant density `value` on `[left, right)`. Serialized as `[left, right, value]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64, f64)", into = "(f64, f64, f64)")]
pub struct DensityPiece {
    pub left: f64,
    pub right: f64,
    pub value: f64,
}

impl DensityPiece {
    pub fn new(left: f64, right: f64, value: f64) -> Self {
        DensityPiece { left, right, value }
    }

    fn mass(&self) -> f64 {
        self.value * (self.right - self.left)
    }
}

impl From<(f64, f64, f64)> for DensityPiece {
    fn from((left, right, value): (f64, f64, f64)) -> Self {
        DensityPiece { left, right, value }
    }
}

impl From<DensityPiece> for (f64, f64, f64) {
    fn from(p: DensityPiece) -> Self {
        (p.left, p.right, p.value)
    }
}

#[derive(Deserialize)]
struct RawMeasure {
    #[serde(default)]
    atoms: Vec<Atom>,
    #[serde(default)]
    density: Vec<DensityPiece>,
}

impl TryFrom<RawMeasure> for SignedMeasure {
    type Error = GbvError;

    fn try_from(raw: RawMeasure) -> Result<Self> {
        SignedMeasure::new(raw.atoms, raw.density)
    }
}

/// Finite signed measure: atoms plus a piecewise-constant density.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure")]
pub struct SignedMeasure {
    atoms: Vec<Atom>,
    density: Vec<DensityPiece>,
}

impl SignedMeasure {
    /// Builds a measure in canonical form. Colliding atoms are summed and zero
    /// weights dropped; density pieces must not overlap.
    pub fn new(atoms: Vec<Atom>, density: Vec<DensityPiece>) -> Result<Self> {
        for a in &atoms {
            if !a.location.is_finite() || !a.weight.is_finite() {
                return Err(GbvError::InvalidMeasure(format!("non-finite atom {a:?}")));
            }
        }
        for p in &density {
            if !(p.left.is_finite() && p.right.is_finite() && p.value.is_finite()) {
                return Err(GbvError::InvalidMeasure(format!(
                    "non-finite density piece {p:?}"
                )));
            }
            if p.left >= p.right {
                return Err(GbvError::InvalidMeasure(format!(
                    "density piece [{}, {}) is empty",
                    p.left, p.right
                )));
            }
        }
        let mut density = density;
        density.sort_by(|a, b| a.left.total_cmp(&b.left));
        if let Some(w) = density.windows(2).find(|w| w[0].right > w[1].left) {
            return Err(GbvError::InvalidMeasure(format!(
                "density pieces [{}, {}) and [{}, {}) overlap",
                w[0].left, w[0].right, w[1].left, w[1].right
            )));
        }
        Ok(SignedMeasure {
            atoms: canonical_atoms(atoms),
            density: merge_adjacent(density),
        })
    }

    pub fn zero() -> Self {
        SignedMeasure::default()
    }

    pub fn dirac(location: f64) -> Self {
        Self::atomic([(location, 1.0)])
    }

    /// Purely atomic measure from `(location, weight)` pairs.
    ///
    /// Panics on non-finite input.
    pub fn atomic<I: IntoIterator<Item = (f64, f64)>>(atoms: I) -> Self {
        Self::new(atoms.into_iter().map(Atom::from).collect(), Vec::new())
            .expect("atomic measure with finite entries")
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn density(&self) -> &[DensityPiece] {
        &self.density
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty() && self.density.is_empty()
    }

    pub fn is_atomic(&self) -> bool {
        self.density.is_empty()
    }

    /// Weight of the atom at exactly `t`, or 0.
    pub fn atom_weight_at(&self, t: f64) -> f64 {
        self.atoms
            .binary_search_by(|a| a.location.total_cmp(&t))
            .map(|i| self.atoms[i].weight)
            .unwrap_or(0.0)
    }

    /// Total-variation norm.
    pub fn tv_norm(&self) -> f64 {
        let atoms: f64 = self.atoms.iter().map(|a| a.weight.abs()).sum();
        let dens: f64 = self.density.iter().map(|p| p.mass().abs()).sum();
        atoms + dens
    }

    /// `mu((-inf, t))` for [`Side::Minus`], `mu((-inf, t])` for [`Side::Plus`].
    pub fn cumulative(&self, t: f64, side: Side) -> f64 {
        let mut acc = 0.0;
        for a in &self.atoms {
            let below = match side {
                Side::Minus => a.location < t,
                Side::Plus => a.location <= t,
            };
            if !below {
                break;
            }
            acc += a.weight;
        }
        for p in &self.density {
            if p.left >= t {
                break;
            }
            acc += p.value * (p.right.min(t) - p.left);
        }
        acc
    }

    /// Restriction to `k`. Atoms respect the endpoint flags; density pieces
    /// are clipped (endpoints are Lebesgue-null).
    pub fn restrict(&self, k: &Interval) -> SignedMeasure {
        let atoms = self
            .atoms
            .iter()
            .copied()
            .filter(|a| k.contains(a.location))
            .collect();
        let density = self
            .density
            .iter()
            .filter_map(|p| {
                let left = p.left.max(k.lo());
                let right = p.right.min(k.hi());
                (left < right).then_some(DensityPiece {
                    left,
                    right,
                    value: p.value,
                })
            })
            .collect();
        SignedMeasure { atoms, density }
    }

    pub fn scale(&self, alpha: f64) -> SignedMeasure {
        if alpha == 0.0 {
            return SignedMeasure::zero();
        }
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom::new(a.location, alpha * a.weight))
            .collect();
        let density = self
            .density
            .iter()
            .map(|p| DensityPiece::new(p.left, p.right, alpha * p.value))
            .collect();
        SignedMeasure {
            atoms: canonical_atoms(atoms),
            density: merge_adjacent(density),
        }
    }

    /// Sum of two measures, in canonical form.
    pub fn add(&self, other: &SignedMeasure) -> SignedMeasure {
        let atoms = self.atoms.iter().chain(&other.atoms).copied().collect();
        let density = refine_sum(self.density.iter().chain(&other.density).copied().collect());
        SignedMeasure {
            atoms: canonical_atoms(atoms),
            density,
        }
    }

    pub fn sub(&self, other: &SignedMeasure) -> SignedMeasure {
        self.add(&other.scale(-1.0))
    }
}

pub(crate) fn canonical_atoms(mut atoms: Vec<Atom>) -> Vec<Atom> {
    // -0.0 and 0.0 must land in the same slot
    atoms.iter_mut().for_each(|a| a.location += 0.0);
    atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
    let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
    for a in atoms {
        match out.last_mut() {
            Some(last) if last.location == a.location => last.weight += a.weight,
            _ => out.push(a),
        }
    }
    out.retain(|a| a.weight != 0.0);
    out
}

/// Drops zero pieces and fuses touching pieces with equal values. Input is
/// sorted and disjoint.
fn merge_adjacent(pieces: Vec<DensityPiece>) -> Vec<DensityPiece> {
    let mut out: Vec<DensityPiece> = Vec::with_capacity(pieces.len());
    for p in pieces.into_iter().filter(|p| p.value != 0.0) {
        match out.last_mut() {
            Some(last) if last.right == p.left && last.value == p.value => last.right = p.right,
            _ => out.push(p),
        }
    }
    out
}

/// Sums possibly overlapping pieces over their common refinement.
fn refine_sum(pieces: Vec<DensityPiece>) -> Vec<DensityPiece> {
    let mut cuts: Vec<f64> = pieces.iter().flat_map(|p| [p.left, p.right]).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let refined = cuts
        .windows(2)
        .map(|w| {
            let value = pieces
                .iter()
                .filter(|p| p.left <= w[0] && w[1] <= p.right)
                .map(|p| p.value)
                .sum();
            DensityPiece::new(w[0], w[1], value)
        })
        .collect();
    merge_adjacent(refined)
}

/// Continuous piecewise-linear function with compact support, used as a test
/// function in weak* pairings.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinearTestFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseLinearTestFunction {
    /// The first and last values must be 0 so that the zero extension outside
    /// the hull stays continuous.
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() != values.len() {
            return Err(GbvError::InvalidTestFunction(format!(
                "{} breakpoints but {} values",
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints.len() < 2 {
            return Err(GbvError::InvalidTestFunction(
                "need at least two breakpoints".into(),
            ));
        }
        if breakpoints.iter().chain(&values).any(|x| !x.is_finite()) {
            return Err(GbvError::InvalidTestFunction("non-finite entry".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(GbvError::InvalidTestFunction(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        if values[0] != 0.0 || values[values.len() - 1] != 0.0 {
            return Err(GbvError::InvalidTestFunction(
                "endpoint values must be 0 for a continuous zero extension".into(),
            ));
        }
        Ok(PiecewiseLinearTestFunction {
            breakpoints,
            values,
        })
    }

    /// Hat function with peak 1 at `center`, supported on `[center - half_width, center + half_width]`.
    pub fn hat(center: f64, half_width: f64) -> Result<Self> {
        Self::new(
            vec![center - half_width, center, center + half_width],
            vec![0.0, 1.0, 0.0],
        )
    }

    /// Unit hat centred at 0 with support `[-1, 1]`.
    pub fn unit_hat() -> Self {
        Self::hat(0.0, 1.0).expect("unit hat is valid")
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Index of the linear segment `[x_i, x_{i+1})` holding `x`, if any.
    fn segment(&self, x: f64) -> Option<usize> {
        let n = self.breakpoints.len();
        if x < self.breakpoints[0] || x >= self.breakpoints[n - 1] {
            return None;
        }
        Some(self.breakpoints.partition_point(|&b| b <= x) - 1)
    }

    fn slope(&self, i: usize) -> f64 {
        (self.values[i + 1] - self.values[i]) / (self.breakpoints[i + 1] - self.breakpoints[i])
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.segment(x) {
            Some(i) => self.values[i] + self.slope(i) * (x - self.breakpoints[i]),
            None => 0.0,
        }
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Exact integral over `[l, r]`.
    pub fn integral(&self, l: f64, r: f64) -> f64 {
        self.breakpoints
            .windows(2)
            .map(|w| {
                let p = w[0].max(l);
                let q = w[1].min(r);
                if p < q {
                    0.5 * (q - p) * (self.eval(p) + self.eval_left(q))
                } else {
                    0.0
                }
            })
            .sum()
    }

    // Left limit; equals eval everywhere by continuity but avoids reading the
    // next segment at a right endpoint.
    fn eval_left(&self, x: f64) -> f64 {
        match self.breakpoints.binary_search_by(|b| b.total_cmp(&x)) {
            Ok(i) => self.values[i],
            Err(_) => self.eval(x),
        }
    }

    /// `<g, mu>`.
    ///
    /// Atoms falling in one linear segment are summed as
    /// `g(x_i) * sum(w) + slope * sum(w * (tau - x_i))`, which keeps
    /// cancellations such as `g(0) - g(h)` exact to rounding of `h`.
    pub fn pair(&self, mu: &SignedMeasure) -> f64 {
        let mut total = 0.0;
        let mut current: Option<(usize, f64, f64)> = None;
        let flush = |acc: &mut f64, c: Option<(usize, f64, f64)>| {
            if let Some((i, sum_w, sum_moment)) = c {
                *acc += self.values[i] * sum_w + self.slope(i) * sum_moment;
            }
        };
        for a in mu.atoms() {
            let Some(i) = self.segment(a.location) else {
                continue;
            };
            let offset = a.location - self.breakpoints[i];
            match current.as_mut() {
                Some((j, sum_w, sum_moment)) if *j == i => {
                    *sum_w += a.weight;
                    *sum_moment += a.weight * offset;
                }
                _ => {
                    flush(&mut total, current);
                    current = Some((i, a.weight, a.weight * offset));
                }
            }
        }
        flush(&mut total, current);
        for p in mu.density() {
            total += p.value * self.integral(p.left, p.right);
        }
        total
    }
}

/// Free-function form of [`SignedMeasure::tv_norm`].
pub fn tv_norm(mu: &SignedMeasure) -> f64 {
    mu.tv_norm()
}

/// Free-function form of [`SignedMeasure::cumulative`].
pub fn cumulative(mu: &SignedMeasure, t: f64, side: Side) -> f64 {
    mu.cumulative(t, side)
}

/// Free-function form of [`SignedMeasure::restrict`].
pub fn restrict(mu: &SignedMeasure, k: &Interval) -> SignedMeasure {
    mu.restrict(k)
}

/// Free-function form of [`PiecewiseLinearTestFunction::pair`].
pub fn pair_continuous(g: &PiecewiseLinearTestFunction, mu: &SignedMeasure) -> f64 {
    g.pair(mu)
}
