//! Doubly truncated bivariate series with exact rational coefficients.
//!
//! A `SeriesBox` stores finitely many terms c * y^e * q^f on declared
//! denominator grids (e = y_num/y_den, f = q_num/q_den), together with a
//! validity window. The window semantics make "unknown" and "zero"
//! distinguishable:
//!
//! - stored coefficients are the true coefficients for
//!   q_min <= f < q_max and y_lo <= e <= y_hi;
//! - the true series has no support below q_min (hard bound);
//! - direction `NegY` (container of Laurent slices in y^-1): per q-slice the
//!   stored maximal y-exponent is the true maximum, so unknown terms live
//!   only at f >= q_max or e < y_lo. Direction `PosY` is the mirror image.
//!
//! Every operation shrinks windows conservatively under these rules; the
//! q-direction product rule is
//!   q_max_out = min(a.q_max + b.q_min, b.q_max + a.q_min)
//! and the y-direction rule is its mirror with the actual stored support
//! extremum playing the role of q_min.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::rational::{fmt_rat, parse_rat, rat, Rat};

/// Laurent expansion direction used for inversion and evaluation.
///
/// `NegY` expands units in powers of y^-1 (the highest y-power of the leading
/// q-slice is peeled); `PosY` expands in powers of y.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "neg_y")]
    NegY,
    #[serde(rename = "pos_y")]
    PosY,
}

impl Direction {
    pub fn flipped(self) -> Self {
        match self {
            Direction::NegY => Direction::PosY,
            Direction::PosY => Direction::NegY,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::NegY => "neg_y",
            Direction::PosY => "pos_y",
        }
    }
}

/// Guaranteed-completeness report for a product.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowReport {
    pub guaranteed_q_max: Rat,
    pub guaranteed_y_window: (Rat, Rat),
}

/// Doubly truncated bivariate series; see module docs for window semantics.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesBox {
    q_den: i64,
    y_den: i64,
    q_max: i64,
    y_lo: i64,
    y_hi: i64,
    direction: Direction,
    /// (q_num, y_num) -> nonzero coefficient; BTreeMap order is the
    /// canonical term order (ascending q, then ascending y).
    terms: BTreeMap<(i64, i64), Rat>,
}

fn lcm(a: i64, b: i64) -> i64 {
    a / gcd(a, b) * b
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.max(1)
}

/// Reduce a rational exponent onto a 1/den grid.
fn to_grid(exp: &Rat, den: i64, var: char) -> Result<i64> {
    let scaled = exp * rat(den, 1);
    if scaled.denom() == &1.into() {
        scaled
            .numer()
            .try_into()
            .map_err(|_| EngineError::Parameter(format!("exponent {} overflows the grid", fmt_rat(exp))))
    } else {
        Err(EngineError::Grid {
            var,
            exp: fmt_rat(exp),
            den,
        })
    }
}

impl SeriesBox {
    // ---------------------------------------------------------------------
    // construction
    // ---------------------------------------------------------------------

    /// Empty (zero) series on the given window. `q_min` is reported equal to
    /// `q_max` for the zero series, which keeps window arithmetic total.
    pub fn zero(q_den: i64, y_den: i64, q_max: &Rat, y_window: (&Rat, &Rat), direction: Direction) -> Result<Self> {
        if q_den < 1 || y_den < 1 {
            return Err(EngineError::Parameter("denominators must be positive".into()));
        }
        let q_max = to_grid(q_max, q_den, 'q')?;
        let y_lo = to_grid(y_window.0, y_den, 'y')?;
        let y_hi = to_grid(y_window.1, y_den, 'y')?;
        if y_lo > y_hi {
            return Err(EngineError::Parameter("empty y-window".into()));
        }
        Ok(SeriesBox {
            q_den,
            y_den,
            q_max,
            y_lo,
            y_hi,
            direction,
            terms: BTreeMap::new(),
        })
    }

    /// Build a series from explicit terms; exponents must sit on the declared
    /// grids and inside the declared window.
    pub fn make_series(
        q_den: i64,
        y_den: i64,
        terms: &[(Rat, Rat, Rat)],
        q_max: &Rat,
        y_window: (&Rat, &Rat),
        direction: Direction,
    ) -> Result<Self> {
        let mut s = Self::zero(q_den, y_den, q_max, y_window, direction)?;
        for (qe, ye, c) in terms {
            let qk = to_grid(qe, q_den, 'q')?;
            let yk = to_grid(ye, y_den, 'y')?;
            if qk >= s.q_max || yk < s.y_lo || yk > s.y_hi {
                return Err(EngineError::Window {
                    q: fmt_rat(qe),
                    y: fmt_rat(ye),
                });
            }
            if !c.is_zero() {
                let slot = s.terms.entry((qk, yk)).or_insert_with(Rat::zero);
                *slot += c;
                if slot.is_zero() {
                    s.terms.remove(&(qk, yk));
                }
            }
        }
        Ok(s)
    }

    /// Insert a term known to be on-grid and in-window (internal generator use).
    pub(crate) fn push_raw(&mut self, q_num: i64, y_num: i64, c: Rat) {
        if c.is_zero() || q_num >= self.q_max || y_num < self.y_lo || y_num > self.y_hi {
            return;
        }
        let slot = self.terms.entry((q_num, y_num)).or_insert_with(Rat::zero);
        *slot += c;
        if slot.is_zero() {
            self.terms.remove(&(q_num, y_num));
        }
    }

    /// The unit series 1 on the given window.
    pub fn one(q_den: i64, y_den: i64, q_max: &Rat, y_window: (&Rat, &Rat), direction: Direction) -> Result<Self> {
        let mut s = Self::zero(q_den, y_den, q_max, y_window, direction)?;
        if s.q_max <= 0 || s.y_lo > 0 || s.y_hi < 0 {
            return Err(EngineError::Parameter("window does not contain the constant term".into()));
        }
        s.terms.insert((0, 0), rat(1, 1));
        Ok(s)
    }

    /// Raw term map (grid-numerator keys); crate-internal plumbing.
    pub(crate) fn raw_terms(&self) -> &BTreeMap<(i64, i64), Rat> {
        &self.terms
    }

    pub(crate) fn grid_keys(&self, q_exp: &Rat, y_exp: &Rat) -> Result<(i64, i64)> {
        Ok((to_grid(q_exp, self.q_den, 'q')?, to_grid(y_exp, self.y_den, 'y')?))
    }

    // ---------------------------------------------------------------------
    // accessors
    // ---------------------------------------------------------------------

    pub fn q_den(&self) -> i64 {
        self.q_den
    }

    pub fn y_den(&self) -> i64 {
        self.y_den
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Smallest represented q-exponent; equals `q_max` for the zero series.
    pub fn q_min(&self) -> Rat {
        rat(self.q_min_key(), self.q_den)
    }

    pub fn q_max(&self) -> Rat {
        rat(self.q_max, self.q_den)
    }

    pub fn y_window(&self) -> (Rat, Rat) {
        (rat(self.y_lo, self.y_den), rat(self.y_hi, self.y_den))
    }

    fn q_min_key(&self) -> i64 {
        self.terms.keys().next().map(|k| k.0).unwrap_or(self.q_max)
    }

    /// Largest stored y-exponent key (hard support bound in NegY).
    fn supp_hi_key(&self) -> Option<i64> {
        self.terms.keys().map(|k| k.1).max()
    }

    /// Smallest stored y-exponent key (hard support bound in PosY).
    fn supp_lo_key(&self) -> Option<i64> {
        self.terms.keys().map(|k| k.1).min()
    }

    /// Iterate terms in canonical order as (q_exp, y_exp, coeff).
    pub fn iter_terms(&self) -> impl Iterator<Item = (Rat, Rat, &Rat)> + '_ {
        self.terms
            .iter()
            .map(move |((qk, yk), c)| (rat(*qk, self.q_den), rat(*yk, self.y_den), c))
    }

    /// First term (canonical order) with nonzero coefficient, as exact exponents.
    pub fn first_nonzero(&self) -> Option<(Rat, Rat, Rat)> {
        self.terms
            .iter()
            .next()
            .map(|((qk, yk), c)| (rat(*qk, self.q_den), rat(*yk, self.y_den), c.clone()))
    }

    // ---------------------------------------------------------------------
    // grid handling
    // ---------------------------------------------------------------------

    /// Copy of `self` re-expressed on a finer compatible grid.
    fn rescaled(&self, q_den: i64, y_den: i64) -> SeriesBox {
        debug_assert!(q_den % self.q_den == 0 && y_den % self.y_den == 0);
        let fq = q_den / self.q_den;
        let fy = y_den / self.y_den;
        if fq == 1 && fy == 1 {
            return self.clone();
        }
        SeriesBox {
            q_den,
            y_den,
            q_max: self.q_max * fq,
            y_lo: self.y_lo * fy,
            y_hi: self.y_hi * fy,
            direction: self.direction,
            terms: self
                .terms
                .iter()
                .map(|((q, y), c)| ((q * fq, y * fy), c.clone()))
                .collect(),
        }
    }

    fn common_grid(a: &SeriesBox, b: &SeriesBox) -> (SeriesBox, SeriesBox) {
        let qd = lcm(a.q_den, b.q_den);
        let yd = lcm(a.y_den, b.y_den);
        (a.rescaled(qd, yd), b.rescaled(qd, yd))
    }

    fn check_direction(a: &SeriesBox, b: &SeriesBox) -> Result<()> {
        if a.direction != b.direction {
            return Err(EngineError::Direction(
                a.direction.name().into(),
                b.direction.name().into(),
            ));
        }
        Ok(())
    }

    // ---------------------------------------------------------------------
    // ring operations
    // ---------------------------------------------------------------------

    /// Termwise sum on the intersection of validity regions.
    pub fn add(&self, other: &SeriesBox) -> Result<SeriesBox> {
        Self::check_direction(self, other)?;
        let (a, b) = Self::common_grid(self, other);
        let q_max = a.q_max.min(b.q_max);
        let (y_lo, y_hi) = match a.direction {
            // knowledge is one-sided: NegY knows [y_lo, +inf), hard above stored tops
            Direction::NegY => (a.y_lo.max(b.y_lo), a.y_hi.max(b.y_hi)),
            Direction::PosY => (a.y_lo.min(b.y_lo), a.y_hi.min(b.y_hi)),
        };
        let mut out = SeriesBox {
            q_den: a.q_den,
            y_den: a.y_den,
            q_max,
            y_lo,
            y_hi,
            direction: a.direction,
            terms: BTreeMap::new(),
        };
        for ((q, y), c) in a.terms.iter().chain(b.terms.iter()) {
            out.push_raw(*q, *y, c.clone());
        }
        Ok(out)
    }

    pub fn neg(&self) -> SeriesBox {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = -c.clone();
        }
        out
    }

    pub fn sub(&self, other: &SeriesBox) -> Result<SeriesBox> {
        self.add(&other.neg())
    }

    pub fn scale(&self, s: &Rat) -> SeriesBox {
        if s.is_zero() {
            let mut out = self.clone();
            out.terms.clear();
            return out;
        }
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c *= s;
        }
        out
    }

    /// Exact multiplication by a monomial c * y^(y_shift) * q^(q_shift);
    /// windows shift along (no information is lost).
    pub fn mul_monomial(&self, q_shift: &Rat, y_shift: &Rat, c: &Rat) -> Result<SeriesBox> {
        let qs = to_grid(q_shift, self.q_den, 'q')?;
        let ys = to_grid(y_shift, self.y_den, 'y')?;
        if c.is_zero() {
            let mut out = self.clone();
            out.terms.clear();
            return Ok(out);
        }
        Ok(SeriesBox {
            q_den: self.q_den,
            y_den: self.y_den,
            q_max: self.q_max + qs,
            y_lo: self.y_lo + ys,
            y_hi: self.y_hi + ys,
            direction: self.direction,
            terms: self
                .terms
                .iter()
                .map(|((q, y), v)| ((q + qs, y + ys), v * c))
                .collect(),
        })
    }

    /// Cauchy product with a completeness report.
    pub fn mul(&self, other: &SeriesBox) -> Result<(SeriesBox, WindowReport)> {
        Self::check_direction(self, other)?;
        let (a, b) = Self::common_grid(self, other);
        let a_qmin = a.q_min_key();
        let b_qmin = b.q_min_key();
        let q_max = (a.q_max + b_qmin).min(b.q_max + a_qmin);
        let (y_lo, y_hi) = match a.direction {
            Direction::NegY => {
                // true support tops are bounded by max(stored top, y_lo - 1):
                // window-dropping only removes content below y_lo
                let ta = a.supp_hi_key().unwrap_or(i64::MIN / 4).max(a.y_lo - 1);
                let tb = b.supp_hi_key().unwrap_or(i64::MIN / 4).max(b.y_lo - 1);
                let hi = ta.saturating_add(tb);
                let lo = (a.y_lo.saturating_add(tb)).max(b.y_lo.saturating_add(ta));
                (lo.min(hi), hi)
            }
            Direction::PosY => {
                let sa = a.supp_lo_key().unwrap_or(i64::MAX / 4).min(a.y_hi + 1);
                let sb = b.supp_lo_key().unwrap_or(i64::MAX / 4).min(b.y_hi + 1);
                let lo = sa.saturating_add(sb);
                let hi = (a.y_hi.saturating_add(sb)).min(b.y_hi.saturating_add(sa));
                (lo, hi.max(lo))
            }
        };
        let mut out = SeriesBox {
            q_den: a.q_den,
            y_den: a.y_den,
            q_max,
            y_lo,
            y_hi,
            direction: a.direction,
            terms: BTreeMap::new(),
        };
        for ((qa, ya), ca) in &a.terms {
            if qa + b_qmin >= q_max {
                break; // a is sorted ascending in q; all later terms overflow too
            }
            let q_bound = q_max - qa;
            for ((qb, yb), cb) in b.terms.range(..(q_bound, i64::MIN)) {
                let (q, y) = (qa + qb, ya + yb);
                if y < out.y_lo || y > out.y_hi {
                    continue;
                }
                let slot = out.terms.entry((q, y)).or_insert_with(Rat::zero);
                *slot += ca * cb;
            }
        }
        out.terms.retain(|_, c| !c.is_zero());
        let report = WindowReport {
            guaranteed_q_max: rat(q_max, out.q_den),
            guaranteed_y_window: (rat(y_lo, out.y_den), rat(y_hi, out.y_den)),
        };
        Ok((out, report))
    }

    /// Product, discarding the window report.
    pub fn mul_s(&self, other: &SeriesBox) -> Result<SeriesBox> {
        Ok(self.mul(other)?.0)
    }

    // ---------------------------------------------------------------------
    // inversion
    // ---------------------------------------------------------------------

    /// Multiplicative inverse of a unit, by monomial peel-off plus geometric
    /// expansion in the declared direction.
    pub fn invert_unit(&self) -> Result<SeriesBox> {
        match self.direction {
            Direction::NegY => self.invert_neg_y(),
            Direction::PosY => {
                let flipped = self.substitute_y_power(-1)?;
                flipped.invert_neg_y()?.substitute_y_power(-1)
            }
        }
    }

    fn invert_neg_y(&self) -> Result<SeriesBox> {
        if self.terms.is_empty() {
            return Err(EngineError::NotInvertible);
        }
        let q0 = self.q_min_key();
        // extreme monomial of the leading q-slice: highest y-power
        let ((_, e0), c0) = self
            .terms
            .range((q0, i64::MIN)..(q0 + 1, i64::MIN))
            .next_back()
            .map(|(k, v)| (*k, v.clone()))
            .ok_or(EngineError::NotInvertible)?;
        // normalize: ahat = self / (c0 y^e0 q^q0); ahat(0,0) = 1
        let ahat = self.mul_monomial(
            &rat(-q0, self.q_den),
            &rat(-e0, self.y_den),
            &(rat(1, 1) / c0.clone()),
        )?;
        let t_slices = ahat.q_max.max(0);
        // split into q-slices
        let mut slices: BTreeMap<i64, BTreeMap<i64, Rat>> = BTreeMap::new();
        for ((q, y), c) in &ahat.terms {
            slices.entry(*q).or_default().insert(*y, c.clone());
        }
        let guarantee = ahat.y_lo; // per-slice knowledge floor of ahat
        const KNOWN_EVERYWHERE: i64 = i64::MIN / 2;

        // 1-dimensional helpers on single q-slices; each slice carries its own
        // knowledge floor g (KNOWN_EVERYWHERE = no unknown region).
        type Slice = BTreeMap<i64, Rat>;
        fn top(s: &Slice) -> Option<i64> {
            s.keys().next_back().copied()
        }
        // bound on the true top of a slice: stored top, or g-1 for content
        // hidden below the knowledge floor; None means identically zero
        fn top_bound(s: &Slice, g: i64) -> Option<i64> {
            match (top(s), g > KNOWN_EVERYWHERE) {
                (Some(t), true) => Some(t.max(g - 1)),
                (Some(t), false) => Some(t),
                (None, true) => Some(g - 1),
                (None, false) => None,
            }
        }
        fn mul1(a: &Slice, ga: i64, b: &Slice, gb: i64) -> (Slice, i64) {
            let mut g = KNOWN_EVERYWHERE;
            if ga > KNOWN_EVERYWHERE {
                if let Some(tb) = top_bound(b, gb) {
                    g = g.max(ga.saturating_add(tb));
                }
            }
            if gb > KNOWN_EVERYWHERE {
                if let Some(ta) = top_bound(a, ga) {
                    g = g.max(gb.saturating_add(ta));
                }
            }
            let mut out = Slice::new();
            for (ya, ca) in a {
                for (yb, cb) in b {
                    let y = ya + yb;
                    if y < g {
                        continue;
                    }
                    let slot = out.entry(y).or_insert_with(Rat::zero);
                    *slot += ca * cb;
                }
            }
            out.retain(|_, c| !c.is_zero());
            (out, g)
        }
        fn add1(a: &mut Slice, ga: i64, b: &Slice, gb: i64, scale: &Rat) -> i64 {
            let g = ga.max(gb);
            for (y, c) in b {
                if *y < g {
                    continue;
                }
                let slot = a.entry(*y).or_insert_with(Rat::zero);
                *slot += c * scale;
            }
            a.retain(|y, c| *y >= g && !c.is_zero());
            g
        }

        // invert the leading slice A0 = 1 - r0, r0 supported strictly below 0
        let a0 = slices.remove(&0).unwrap_or_default();
        let mut r0 = a0.clone();
        let one_c = r0.remove(&0);
        match one_c {
            Some(c) if c == rat(1, 1) => {}
            _ => return Err(EngineError::NotInvertible),
        }
        if r0.keys().next_back().map(|y| *y >= 0).unwrap_or(false) {
            // no extreme monomial: something at/above the peeled top remains
            return Err(EngineError::NotInvertible);
        }
        for c in r0.values_mut() {
            *c = -c.clone();
        }
        // v0 = sum_j r0^j; the sum's knowledge floor is the input's, so
        // anything a power pushes below that floor is droppable
        let minus_one = rat(-1, 1);
        let mut v0: Slice = BTreeMap::from([(0, rat(1, 1))]);
        let mut g_v0 = guarantee;
        let mut pow = r0.clone();
        let mut g_pow = guarantee;
        let mut iters = 0usize;
        while !pow.is_empty() {
            g_v0 = add1(&mut v0, g_v0, &pow, g_pow, &rat(1, 1));
            let (mut p, mut g) = mul1(&pow, g_pow, &r0, guarantee);
            g = g.max(guarantee);
            p.retain(|y, _| *y >= g);
            pow = p;
            g_pow = g;
            iters += 1;
            if iters > 4 * (self.y_hi - self.y_lo + 2).unsigned_abs() as usize + 64 {
                return Err(EngineError::NotInvertible);
            }
        }

        // slice recurrence: V_t = v0 * ( [t=0] - sum_{s>=1} A_s V_{t-s} )
        let mut v: Vec<(Slice, i64)> = Vec::with_capacity(t_slices as usize);
        for t in 0..t_slices {
            if t == 0 {
                v.push((v0.clone(), g_v0));
                continue;
            }
            let mut acc: Slice = BTreeMap::new();
            let mut g_acc = KNOWN_EVERYWHERE;
            for (s, a_s) in slices.range(1..=t) {
                let (vt, gvt) = &v[(t - s) as usize];
                let (prod, gp) = mul1(a_s, guarantee, vt, *gvt);
                g_acc = add1(&mut acc, g_acc, &prod, gp, &minus_one);
            }
            let (vt, gvt) = mul1(&v0, g_v0, &acc, g_acc);
            v.push((vt, gvt));
        }

        // assemble, then shift the peeled monomial back
        let y_floor = v.iter().map(|(_, g)| *g).max().unwrap_or(guarantee);
        let y_top = v
            .iter()
            .filter_map(|(s, _)| top(s))
            .max()
            .unwrap_or(0)
            .max(0);
        let mut inv_hat = SeriesBox {
            q_den: self.q_den,
            y_den: self.y_den,
            q_max: t_slices,
            y_lo: y_floor.max(i64::MIN / 4),
            y_hi: y_top,
            direction: Direction::NegY,
            terms: BTreeMap::new(),
        };
        for (t, (slice, _)) in v.iter().enumerate() {
            for (y, c) in slice {
                inv_hat.push_raw(t as i64, *y, c.clone());
            }
        }
        inv_hat.mul_monomial(
            &rat(-q0, self.q_den),
            &rat(-e0, self.y_den),
            &(rat(1, 1) / c0),
        )
    }

    // ---------------------------------------------------------------------
    // derivations and substitutions
    // ---------------------------------------------------------------------

    /// y d/dy: each term c y^e q^f maps to (e c) y^e q^f.
    pub fn deriv_y(&self) -> SeriesBox {
        let mut out = self.clone();
        out.terms = self
            .terms
            .iter()
            .filter_map(|((q, y), c)| {
                let nc = c * rat(*y, self.y_den);
                (!nc.is_zero()).then_some(((*q, *y), nc))
            })
            .collect();
        out
    }

    /// q d/dq: each term c y^e q^f maps to (f c) y^e q^f.
    pub fn deriv_q(&self) -> SeriesBox {
        let mut out = self.clone();
        out.terms = self
            .terms
            .iter()
            .filter_map(|((q, y), c)| {
                let nc = c * rat(*q, self.q_den);
                (!nc.is_zero()).then_some(((*q, *y), nc))
            })
            .collect();
        out
    }

    /// q -> q^k for positive k; exponents and q-window scale by k.
    pub fn substitute_q_power(&self, k: i64) -> Result<SeriesBox> {
        if k < 1 {
            return Err(EngineError::Parameter(format!("substitute_q_power needs k >= 1, got {k}")));
        }
        Ok(SeriesBox {
            q_den: self.q_den,
            y_den: self.y_den,
            q_max: self.q_max * k,
            y_lo: self.y_lo,
            y_hi: self.y_hi,
            direction: self.direction,
            terms: self
                .terms
                .iter()
                .map(|((q, y), c)| ((q * k, *y), c.clone()))
                .collect(),
        })
    }

    /// y -> y^c for nonzero integer c; the window scales by |c| and the
    /// direction flips when c < 0.
    pub fn substitute_y_power(&self, c: i64) -> Result<SeriesBox> {
        if c == 0 {
            return Err(EngineError::Parameter("substitute_y_power needs c != 0".into()));
        }
        let (y_lo, y_hi) = if c > 0 {
            (self.y_lo * c, self.y_hi * c)
        } else {
            (self.y_hi * c, self.y_lo * c)
        };
        Ok(SeriesBox {
            q_den: self.q_den,
            y_den: self.y_den,
            q_max: self.q_max,
            y_lo,
            y_hi,
            direction: if c > 0 { self.direction } else { self.direction.flipped() },
            terms: self
                .terms
                .iter()
                .map(|((q, y), v)| ((*q, y * c), v.clone()))
                .collect(),
        })
    }

    // ---------------------------------------------------------------------
    // queries
    // ---------------------------------------------------------------------

    /// Exact coefficient at (q_exp, y_exp); zero for absent terms inside the
    /// guaranteed window, `WindowError` outside it (unknown is not zero).
    pub fn coefficient(&self, q_exp: &Rat, y_exp: &Rat) -> Result<Rat> {
        let window_err = || EngineError::Window {
            q: fmt_rat(q_exp),
            y: fmt_rat(y_exp),
        };
        // below the hard q bound everything is known-zero
        if *q_exp < self.q_min() && !self.terms.is_empty() {
            return Ok(Rat::zero());
        }
        if *q_exp >= self.q_max() {
            return Err(window_err());
        }
        let known_y = match self.direction {
            Direction::NegY => *y_exp >= rat(self.y_lo, self.y_den),
            Direction::PosY => *y_exp <= rat(self.y_hi, self.y_den),
        };
        if !known_y {
            return Err(window_err());
        }
        let (Ok(qk), Ok(yk)) = (to_grid(q_exp, self.q_den, 'q'), to_grid(y_exp, self.y_den, 'y')) else {
            return Ok(Rat::zero()); // off-grid but inside the known region
        };
        Ok(self.terms.get(&(qk, yk)).cloned().unwrap_or_else(Rat::zero))
    }

    /// Compare all coefficients with q_exp < q_bound and y_exp in `y_window`.
    /// Errors if the requested region is not guaranteed for both series.
    pub fn equal_to_order(&self, other: &SeriesBox, q_bound: &Rat, y_window: (&Rat, &Rat)) -> Result<bool> {
        Self::check_direction(self, other)?;
        let (a, b) = Self::common_grid(self, other);
        let qb = to_grid(q_bound, a.q_den, 'q')?;
        let lo = to_grid(y_window.0, a.y_den, 'y')?;
        let hi = to_grid(y_window.1, a.y_den, 'y')?;
        if qb > a.q_max || qb > b.q_max {
            return Err(EngineError::Window {
                q: fmt_rat(q_bound),
                y: format!("[{}, {}]", fmt_rat(y_window.0), fmt_rat(y_window.1)),
            });
        }
        let known = |s: &SeriesBox| match s.direction {
            Direction::NegY => lo >= s.y_lo,
            Direction::PosY => hi <= s.y_hi,
        };
        if !known(&a) || !known(&b) {
            return Err(EngineError::Window {
                q: fmt_rat(q_bound),
                y: format!("[{}, {}]", fmt_rat(y_window.0), fmt_rat(y_window.1)),
            });
        }
        let in_region = |k: &(i64, i64)| k.0 < qb && k.1 >= lo && k.1 <= hi;
        for (k, c) in &a.terms {
            if in_region(k) && b.terms.get(k).map(|d| d != c).unwrap_or(true) {
                return Ok(false);
            }
        }
        for (k, c) in &b.terms {
            if in_region(k) && a.terms.get(k).map(|d| d != c).unwrap_or(true) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// First nonzero coefficient of `self` within the guaranteed window, in
    /// canonical order; None when the series vanishes there.
    pub fn pinpoint(&self) -> Option<(Rat, Rat, Rat)> {
        self.first_nonzero()
    }

    /// Narrow the declared window (drops terms outside the new one).
    pub fn restrict(&self, q_max: &Rat, y_window: (&Rat, &Rat)) -> Result<SeriesBox> {
        let qm = to_grid(q_max, self.q_den, 'q')?.min(self.q_max);
        let lo = to_grid(y_window.0, self.y_den, 'y')?;
        let hi = to_grid(y_window.1, self.y_den, 'y')?;
        // narrowing must stay inside the known region on the unknown side
        let lo = match self.direction {
            Direction::NegY => lo.max(self.y_lo),
            Direction::PosY => lo,
        };
        let hi = match self.direction {
            Direction::NegY => hi,
            Direction::PosY => hi.min(self.y_hi),
        };
        let mut out = SeriesBox {
            q_den: self.q_den,
            y_den: self.y_den,
            q_max: qm,
            y_lo: lo,
            y_hi: hi.max(lo),
            direction: self.direction,
            terms: BTreeMap::new(),
        };
        for ((q, y), c) in &self.terms {
            out.push_raw(*q, *y, c.clone());
        }
        Ok(out)
    }

    // ---------------------------------------------------------------------
    // JSON interchange
    // ---------------------------------------------------------------------

    pub fn to_json(&self) -> SeriesJson {
        SeriesJson {
            q_den: self.q_den,
            y_den: self.y_den,
            q_max: fmt_rat(&self.q_max()),
            y_window: [fmt_rat(&self.y_window().0), fmt_rat(&self.y_window().1)],
            direction: self.direction,
            terms: self
                .iter_terms()
                .map(|(q, y, c)| TermJson {
                    q: fmt_rat(&q),
                    y: fmt_rat(&y),
                    c: fmt_rat(c),
                })
                .collect(),
        }
    }

    pub fn from_json(j: &SeriesJson) -> Result<SeriesBox> {
        let q_max = parse_rat(&j.q_max)?;
        let lo = parse_rat(&j.y_window[0])?;
        let hi = parse_rat(&j.y_window[1])?;
        let terms: Vec<(Rat, Rat, Rat)> = j
            .terms
            .iter()
            .map(|t| Ok((parse_rat(&t.q)?, parse_rat(&t.y)?, parse_rat(&t.c)?)))
            .collect::<Result<_>>()?;
        SeriesBox::make_series(j.q_den, j.y_den, &terms, &q_max, (&lo, &hi), j.direction)
    }
}

/// JSON form of a series: exponents and coefficients as exact fraction
/// strings, terms in canonical order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeriesJson {
    pub q_den: i64,
    pub y_den: i64,
    pub q_max: String,
    pub y_window: [String; 2],
    pub direction: Direction,
    pub terms: Vec<TermJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermJson {
    pub q: String,
    pub y: String,
    pub c: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat_int;

    fn r(n: i64, d: i64) -> Rat {
        rat(n, d)
    }

    fn geom(q_max: i64) -> SeriesBox {
        // sum_{n>=0} q^n truncated
        let terms: Vec<(Rat, Rat, Rat)> = (0..q_max).map(|n| (rat_int(n), r(0, 1), r(1, 1))).collect();
        SeriesBox::make_series(1, 1, &terms, &rat_int(q_max), (&r(0, 1), &r(0, 1)), Direction::NegY).unwrap()
    }

    fn one_minus_q(q_max: i64) -> SeriesBox {
        SeriesBox::make_series(
            1,
            1,
            &[(r(0, 1), r(0, 1), r(1, 1)), (r(1, 1), r(0, 1), r(-1, 1))],
            &rat_int(q_max),
            (&r(0, 1), &r(0, 1)),
            Direction::NegY,
        )
        .unwrap()
    }

    fn theta_lead() -> SeriesBox {
        SeriesBox::make_series(
            8,
            2,
            &[(r(1, 8), r(1, 2), r(1, 1)), (r(1, 8), r(-1, 2), r(-1, 1))],
            &r(2, 1),
            (&r(-2, 1), &r(2, 1)),
            Direction::NegY,
        )
        .unwrap()
    }

    #[test]
    fn make_series_zero_convention() {
        let z = SeriesBox::make_series(1, 1, &[], &rat_int(10), (&r(0, 1), &r(0, 1)), Direction::NegY).unwrap();
        assert!(z.is_zero());
        assert_eq!(z.q_min(), rat_int(10)); // q_min = q_max for the zero series
    }

    #[test]
    fn make_series_unit_and_theta_lead() {
        let one = SeriesBox::make_series(1, 1, &[(r(0, 1), r(0, 1), r(1, 1))], &rat_int(4), (&r(0, 1), &r(0, 1)), Direction::NegY).unwrap();
        assert_eq!(one.coefficient(&r(0, 1), &r(0, 1)).unwrap(), r(1, 1));
        let t = theta_lead();
        assert_eq!(t.coefficient(&r(1, 8), &r(1, 2)).unwrap(), r(1, 1));
        assert_eq!(t.coefficient(&r(1, 8), &r(-1, 2)).unwrap(), r(-1, 1));
        assert_eq!(t.q_min(), r(1, 8));
    }

    #[test]
    fn make_series_errors() {
        // off grid
        let e = SeriesBox::make_series(1, 1, &[(r(1, 2), r(0, 1), r(1, 1))], &rat_int(4), (&r(0, 1), &r(0, 1)), Direction::NegY);
        assert!(matches!(e, Err(EngineError::Grid { var: 'q', .. })));
        // outside window
        let e = SeriesBox::make_series(1, 1, &[(r(0, 1), r(3, 1), r(1, 1))], &rat_int(4), (&r(0, 1), &r(0, 1)), Direction::NegY);
        assert!(matches!(e, Err(EngineError::Window { .. })));
    }

    #[test]
    fn add_examples() {
        let a = geom(6);
        let zero = SeriesBox::zero(1, 1, &rat_int(6), (&r(0, 1), &r(0, 1)), Direction::NegY).unwrap();
        assert_eq!(a.add(&zero).unwrap(), a);

        let one_plus_q = SeriesBox::make_series(
            1, 1,
            &[(r(0, 1), r(0, 1), r(1, 1)), (r(1, 1), r(0, 1), r(1, 1))],
            &rat_int(6), (&r(0, 1), &r(0, 1)), Direction::NegY,
        ).unwrap();
        let s = one_plus_q.add(&one_minus_q(6)).unwrap();
        assert_eq!(s.num_terms(), 1);
        assert_eq!(s.coefficient(&r(0, 1), &r(0, 1)).unwrap(), r(2, 1));

        let t = theta_lead();
        assert!(t.add(&t.neg()).unwrap().is_zero());
    }

    #[test]
    fn add_direction_mismatch() {
        let a = geom(4);
        let mut b = geom(4);
        b = b.substitute_y_power(1).unwrap(); // no-op, still NegY
        assert_eq!(b.direction(), Direction::NegY);
        let c = SeriesBox::zero(1, 1, &rat_int(4), (&r(0, 1), &r(0, 1)), Direction::PosY).unwrap();
        assert!(matches!(a.add(&c), Err(EngineError::Direction(..))));
        assert!(a.add(&b).is_ok());
    }

    #[test]
    fn mul_telescopes_geometric() {
        let (p, report) = one_minus_q(10).mul(&geom(10)).unwrap();
        assert_eq!(report.guaranteed_q_max, rat_int(10));
        assert_eq!(p.num_terms(), 1);
        assert_eq!(p.coefficient(&r(0, 1), &r(0, 1)).unwrap(), r(1, 1));
    }

    #[test]
    fn mul_unit_identity() {
        let a = theta_lead();
        let one = SeriesBox::one(8, 2, &r(2, 1), (&r(-2, 1), &r(2, 1)), Direction::NegY).unwrap();
        let (p, _) = one.mul(&a).unwrap();
        let lo = r(-3, 2);
        assert!(p.equal_to_order(&a, &r(1, 1), (&lo, &r(2, 1))).unwrap());
    }

    #[test]
    fn mul_binomial_square() {
        // (y^(1/2) - y^(-1/2))^2 = y - 2 + y^(-1)
        let half_diff = SeriesBox::make_series(
            1, 2,
            &[(r(0, 1), r(1, 2), r(1, 1)), (r(0, 1), r(-1, 2), r(-1, 1))],
            &rat_int(3), (&r(-3, 1), &r(3, 1)), Direction::NegY,
        ).unwrap();
        let (sq, _) = half_diff.mul(&half_diff).unwrap();
        assert_eq!(sq.coefficient(&r(0, 1), &r(1, 1)).unwrap(), r(1, 1));
        assert_eq!(sq.coefficient(&r(0, 1), &r(0, 1)).unwrap(), r(-2, 1));
        assert_eq!(sq.coefficient(&r(0, 1), &r(-1, 1)).unwrap(), r(1, 1));
        assert_eq!(sq.num_terms(), 3);
    }

    #[test]
    fn invert_geometric() {
        let inv = one_minus_q(8).invert_unit().unwrap();
        for n in 0..6 {
            assert_eq!(inv.coefficient(&rat_int(n), &r(0, 1)).unwrap(), r(1, 1));
        }
    }

    #[test]
    fn invert_half_integer_unit() {
        // invert(y^(1/2) - y^(-1/2)) in NegY, then multiply back to 1
        let a = SeriesBox::make_series(
            1, 2,
            &[(r(0, 1), r(1, 2), r(1, 1)), (r(0, 1), r(-1, 2), r(-1, 1))],
            &rat_int(4), (&r(-8, 1), &r(1, 1)), Direction::NegY,
        ).unwrap();
        let inv = a.invert_unit().unwrap();
        // leading term -? peel y^(1/2): inverse starts at y^(-1/2)
        assert_eq!(inv.coefficient(&r(0, 1), &r(-1, 2)).unwrap(), r(1, 1));
        assert_eq!(inv.coefficient(&r(0, 1), &r(-3, 2)).unwrap(), r(1, 1));
        let (back, rep) = a.mul(&inv).unwrap();
        let one = SeriesBox::one(1, 2, &rat_int(4), (&r(-4, 1), &r(1, 1)), Direction::NegY).unwrap();
        let lo = rep.guaranteed_y_window.0.clone().max(r(-4, 1));
        let qb = rep.guaranteed_q_max.clone().min(rat_int(4));
        assert!(back.equal_to_order(&one, &qb, (&lo, &rep.guaranteed_y_window.1)).unwrap());
    }

    #[test]
    fn invert_monomial() {
        let m = SeriesBox::make_series(24, 1, &[(r(1, 24), r(0, 1), r(1, 1))], &rat_int(2), (&r(0, 1), &r(0, 1)), Direction::NegY).unwrap();
        let inv = m.invert_unit().unwrap();
        assert_eq!(inv.coefficient(&r(-1, 24), &r(0, 1)).unwrap(), r(1, 1));
        assert_eq!(inv.num_terms(), 1);
    }

    #[test]
    fn invert_non_unit_fails() {
        let z = SeriesBox::zero(1, 1, &rat_int(4), (&r(0, 1), &r(0, 1)), Direction::NegY).unwrap();
        assert!(matches!(z.invert_unit(), Err(EngineError::NotInvertible)));
    }

    #[test]
    fn deriv_examples() {
        let m = SeriesBox::make_series(24, 1, &[(r(-1, 24), r(0, 1), r(1, 1))], &rat_int(2), (&r(0, 1), &r(0, 1)), Direction::NegY).unwrap();
        let d = m.deriv_q();
        assert_eq!(d.coefficient(&r(-1, 24), &r(0, 1)).unwrap(), r(-1, 24));

        let s = SeriesBox::make_series(
            1, 1,
            &[(r(0, 1), r(1, 1), r(1, 1)), (r(0, 1), r(-1, 1), r(1, 1))],
            &rat_int(2), (&r(-2, 1), &r(2, 1)), Direction::NegY,
        ).unwrap();
        let d = s.deriv_y();
        assert_eq!(d.coefficient(&r(0, 1), &r(1, 1)).unwrap(), r(1, 1));
        assert_eq!(d.coefficient(&r(0, 1), &r(-1, 1)).unwrap(), r(-1, 1));
    }

    #[test]
    fn substitution_examples() {
        let t = theta_lead();
        let t3 = t.substitute_q_power(3).unwrap();
        assert_eq!(t3.coefficient(&r(3, 8), &r(1, 2)).unwrap(), r(1, 1));
        assert_eq!(t3.q_max(), r(6, 1));

        assert_eq!(t.substitute_y_power(1).unwrap(), t);

        let y = SeriesBox::make_series(1, 1, &[(r(0, 1), r(1, 1), r(1, 1))], &rat_int(2), (&r(-2, 1), &r(2, 1)), Direction::NegY).unwrap();
        let yi = y.substitute_y_power(-1).unwrap();
        assert_eq!(yi.direction(), Direction::PosY);
        assert_eq!(yi.coefficient(&r(0, 1), &r(-1, 1)).unwrap(), r(1, 1));
    }

    #[test]
    fn substitute_then_coefficient_scaling() {
        let t = theta_lead();
        let t2 = t.substitute_q_power(2).unwrap();
        assert_eq!(
            t2.coefficient(&r(2, 8), &r(1, 2)).unwrap(),
            t.coefficient(&r(1, 8), &r(1, 2)).unwrap()
        );
    }

    #[test]
    fn coefficient_examples() {
        let e2ish = SeriesBox::make_series(
            1, 1,
            &[(r(0, 1), r(0, 1), r(1, 1)), (r(1, 1), r(0, 1), r(-24, 1))],
            &rat_int(3), (&r(0, 1), &r(0, 1)), Direction::NegY,
        ).unwrap();
        assert_eq!(e2ish.coefficient(&r(1, 1), &r(0, 1)).unwrap(), r(-24, 1));

        let z = SeriesBox::zero(1, 1, &rat_int(10), (&r(0, 1), &r(0, 1)), Direction::NegY).unwrap();
        assert_eq!(z.coefficient(&r(5, 1), &r(0, 1)).unwrap(), r(0, 1));

        // unknown is not zero
        assert!(matches!(
            e2ish.coefficient(&r(5, 1), &r(0, 1)),
            Err(EngineError::Window { .. })
        ));
        let t = theta_lead();
        assert!(matches!(
            t.coefficient(&r(1, 8), &r(-5, 1)),
            Err(EngineError::Window { .. })
        ));
        // above the stored top in NegY: known zero
        assert_eq!(t.coefficient(&r(1, 8), &r(3, 2)).unwrap(), r(0, 1));
    }

    #[test]
    fn equal_to_order_reflexive() {
        let t = theta_lead();
        assert!(t.equal_to_order(&t, &r(1, 1), (&r(-1, 1), &r(1, 1))).unwrap());
    }

    #[test]
    fn json_round_trip() {
        let t = theta_lead();
        let j = t.to_json();
        let s = serde_json::to_string(&j).unwrap();
        let j2: SeriesJson = serde_json::from_str(&s).unwrap();
        let t2 = SeriesBox::from_json(&j2).unwrap();
        assert_eq!(t, t2);
        // canonical term order: ascending q then ascending y
        assert!(j.terms.windows(2).all(|w| {
            let a = (parse_rat(&w[0].q).unwrap(), parse_rat(&w[0].y).unwrap());
            let b = (parse_rat(&w[1].q).unwrap(), parse_rat(&w[1].y).unwrap());
            a < b
        }));
    }
}

impl fmt::Display for SeriesBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0 (window q<{}, y in [{},{}])", fmt_rat(&self.q_max()),
                fmt_rat(&self.y_window().0), fmt_rat(&self.y_window().1));
        }
        let mut first = true;
        for (q, y, c) in self.iter_terms().take(24) {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({})", fmt_rat(c))?;
            if !y.is_zero() {
                write!(f, " y^{}", fmt_rat(&y))?;
            }
            if !q.is_zero() {
                write!(f, " q^{}", fmt_rat(&q))?;
            }
        }
        if self.terms.len() > 24 {
            write!(f, " + ... ({} terms)", self.terms.len())?;
        }
        Ok(())
    }
}
