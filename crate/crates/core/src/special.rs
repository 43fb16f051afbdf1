//! Truncated expansions of the special functions used throughout the engine:
//! Eisenstein series, twisted Weierstrass kernels P_k^± and their normalised
//! forms Q_k, twisted Eisenstein series E_m and E_1^±, the Weierstrass Laurent
//! series, theta functions, and the Dedekind eta function.
//!
//! Conventions:
//! - all generators take explicit truncation parameters, no global state;
//! - coefficients are exactly rational end to end; powers of i and of 2*pi*i
//!   are never stored in coefficients but recorded in a [`Prefactor`];
//! - generators that contain a geometric q^0 part (P_k^±, Q_k, E_1^±) emit
//!   the expansion matching the requested [`Direction`]; all other generators
//!   have finite q-slices and are direction-free;
//! - windows are expanded on the hard support side so that every true term
//!   below the q-truncation is present (the requested window only caps the
//!   unknown side).

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::qseries::QSeries;
use crate::rational::{bernoulli, bernoulli_at_one, factorial, rat, rat_int, Rat};
use crate::series::{Direction, SeriesBox};

/// Symbolic prefactor (power of i, power of 2*pi*i) kept out of coefficients.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prefactor {
    pub i_pow: i64,
    pub two_pi_i_pow: i64,
}

impl Prefactor {
    pub fn new(i_pow: i64, two_pi_i_pow: i64) -> Self {
        Prefactor { i_pow, two_pi_i_pow }
    }
}

/// Catalog of the special functions the engine can expand, with CLI names.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpecialFunctionTag {
    EisensteinG,
    EisensteinE,
    Pplus,
    Pminus,
    Qk,
    TwistedE,
    TwistedE1Plus,
    TwistedE1Minus,
    WeierstrassWp,
    Theta11,
    ThetaI0,
    ThetaJAdm,
    Eta,
}

impl SpecialFunctionTag {
    pub fn cli_name(self) -> &'static str {
        match self {
            SpecialFunctionTag::EisensteinG => "G2k",
            SpecialFunctionTag::EisensteinE => "Ek",
            SpecialFunctionTag::Pplus => "Pplus",
            SpecialFunctionTag::Pminus => "Pminus",
            SpecialFunctionTag::Qk => "Qk",
            SpecialFunctionTag::TwistedE => "Em",
            SpecialFunctionTag::TwistedE1Plus => "E1plus",
            SpecialFunctionTag::TwistedE1Minus => "E1minus",
            SpecialFunctionTag::WeierstrassWp => "wp",
            SpecialFunctionTag::Theta11 => "theta11",
            SpecialFunctionTag::ThetaI0 => "theta_i0",
            SpecialFunctionTag::ThetaJAdm => "theta_j",
            SpecialFunctionTag::Eta => "eta",
        }
    }

    pub fn from_cli_name(s: &str) -> Option<Self> {
        use SpecialFunctionTag::*;
        Some(match s {
            "G2k" => EisensteinG,
            "Ek" => EisensteinE,
            "Pplus" => Pplus,
            "Pminus" => Pminus,
            "Qk" => Qk,
            "Em" => TwistedE,
            "E1plus" => TwistedE1Plus,
            "E1minus" => TwistedE1Minus,
            "wp" => WeierstrassWp,
            "theta11" => Theta11,
            "theta_i0" => ThetaI0,
            "theta_j" => ThetaJAdm,
            "eta" => Eta,
            _ => return None,
        })
    }

    /// The prefactor of the defining display, as a function of the parameter.
    pub fn prefactor(self, param: i64) -> Prefactor {
        match self {
            SpecialFunctionTag::EisensteinG => Prefactor::new(0, param),
            SpecialFunctionTag::Pplus | SpecialFunctionTag::Pminus => Prefactor::new(0, param),
            SpecialFunctionTag::Theta11 => Prefactor::new(1, 0),
            _ => Prefactor::new(0, 0),
        }
    }
}

fn q_cap(q_order: i64) -> Rat {
    rat_int(q_order.max(1))
}

/// base^e as an exact rational, with 0^0 = 1.
fn ipow(base: i64, e: u32) -> Rat {
    BigRational::from_integer(BigInt::from(base).pow(e))
}

/// Divisor sum sigma_e(n) as an exact rational.
fn sigma(e: u32, n: i64) -> Rat {
    let mut acc = rat_int(0);
    for d in 1..=n {
        if n % d == 0 {
            acc += ipow(d, e);
        }
    }
    acc
}

// ---------------------------------------------------------------------------
// Eisenstein series
// ---------------------------------------------------------------------------

/// Normalised classical Eisenstein series: the (2 pi i)^k-stripped form
/// -B_k/k! + (2/(k-1)!) * sum_{n>=1} sigma_{k-1}(n) q^n, for even k >= 2.
/// Prefactor of the defining display: (2 pi i)^k.
pub fn eisenstein_g(k: i64, q_order: i64) -> Result<QSeries> {
    if k < 2 || k % 2 != 0 {
        return Err(EngineError::Parameter(format!("Eisenstein G needs even k >= 2, got {k}")));
    }
    let q_max = q_cap(q_order);
    let mut terms: Vec<(Rat, Rat)> = Vec::new();
    terms.push((rat_int(0), -bernoulli(k as usize) / factorial(k as usize)));
    let scale = rat_int(2) / factorial(k as usize - 1);
    let mut n = 1;
    while rat_int(n) < q_max {
        terms.push((rat_int(n), &scale * sigma(k as u32 - 1, n)));
        n += 1;
    }
    QSeries::from_terms(1, &terms, &q_max)
}

/// Eisenstein series normalised with constant coefficient 1.
pub fn eisenstein_e(k: i64, q_order: i64) -> Result<QSeries> {
    let g = eisenstein_g(k, q_order)?;
    let bk = bernoulli(k as usize);
    Ok(g.scale(&(-factorial(k as usize) / bk)))
}

// ---------------------------------------------------------------------------
// twisted Weierstrass kernels in two variables
// ---------------------------------------------------------------------------

/// P_k^+(y, q) stripped of its (2 pi i)^k prefactor:
/// (1/(k-1)!) sum_{n>=1} [ n^(k-1) y^n/(1-q^n) + (-1)^k n^(k-1) y^-n q^n/(1-q^n) ].
pub fn p_plus(k: i64, q_order: i64, y_window: (&Rat, &Rat), direction: Direction) -> Result<SeriesBox> {
    if k < 1 {
        return Err(EngineError::Parameter(format!("P_k needs k >= 1, got {k}")));
    }
    let qm = q_order.max(1);
    let (lo, hi) = widen(y_window, qm, direction);
    let mut out = SeriesBox::zero(1, 1, &q_cap(q_order), (&lo, &hi), direction)?;
    let (lo_k, hi_k) = window_keys(&out);
    let inv_fact = rat_int(1) / factorial(k as usize - 1);
    let sgn = if k % 2 == 0 { rat_int(1) } else { rat_int(-1) };

    // q^0 geometric part: sum_{n>=1} n^(k-1) y^n, expanded per direction
    match direction {
        Direction::PosY => {
            for n in 1..=hi_k.max(0) {
                out.push_raw(0, n, &inv_fact * ipow(n, k as u32 - 1));
            }
        }
        Direction::NegY => {
            // re-expansion: -sum_{m<=0} m^(k-1) y^m
            for m in lo_k.min(0)..=0 {
                let c = &inv_fact * ipow(m, k as u32 - 1);
                out.push_raw(0, m, -c);
            }
        }
    }
    for n in 1..=qm {
        let nk = ipow(n, k as u32 - 1);
        let mut m = 1;
        while n * m < qm {
            out.push_raw(n * m, n, &inv_fact * &nk); // y^n q^(nm)
            out.push_raw(n * m, -n, &inv_fact * &nk * &sgn); // (-1)^k y^-n q^(nm)
            m += 1;
        }
    }
    Ok(out)
}

/// P_k^-(y, q) stripped of its (2 pi i)^k prefactor:
/// (1/(k-1)!) sum_{n>=1} [ n^(k-1) y^n q^n/(1-q^n) + (-1)^k n^(k-1) y^-n/(1-q^n) ].
pub fn p_minus(k: i64, q_order: i64, y_window: (&Rat, &Rat), direction: Direction) -> Result<SeriesBox> {
    if k < 1 {
        return Err(EngineError::Parameter(format!("P_k needs k >= 1, got {k}")));
    }
    let qm = q_order.max(1);
    let (lo, hi) = widen(y_window, qm, direction);
    let mut out = SeriesBox::zero(1, 1, &q_cap(q_order), (&lo, &hi), direction)?;
    let (lo_k, hi_k) = window_keys(&out);
    let inv_fact = rat_int(1) / factorial(k as usize - 1);
    let sgn = if k % 2 == 0 { rat_int(1) } else { rat_int(-1) };

    // q^0 part: (-1)^k sum_{n>=1} n^(k-1) y^-n, per direction
    match direction {
        Direction::NegY => {
            for n in 1..=(-lo_k).max(0) {
                out.push_raw(0, -n, &inv_fact * ipow(n, k as u32 - 1) * &sgn);
            }
        }
        Direction::PosY => {
            // re-expansion: sum n^(k-1) y^-n = -sum_{m>=0} m^(k-1) y^m
            for m in 0..=hi_k.max(0) {
                let c = &inv_fact * ipow(m, k as u32 - 1) * &sgn;
                out.push_raw(0, m, -c);
            }
        }
    }
    for n in 1..=qm {
        let nk = ipow(n, k as u32 - 1);
        let mut m = 1;
        while n * m < qm {
            out.push_raw(n * m, n, &inv_fact * &nk); // y^n q^n/(1-q^n)
            out.push_raw(n * m, -n, &inv_fact * &nk * &sgn);
            m += 1;
        }
    }
    Ok(out)
}

/// Q_k(y, q) = (1/2) delta_{k,1} + (2 pi i)^{-k} P_k^+(y, q): pure rational
/// coefficients, no prefactor.
pub fn q_k(k: i64, q_order: i64, y_window: (&Rat, &Rat), direction: Direction) -> Result<SeriesBox> {
    let mut out = p_plus(k, q_order, y_window, direction)?;
    if k == 1 {
        out.push_raw(0, 0, rat(1, 2));
    }
    Ok(out)
}

fn widen(y_window: (&Rat, &Rat), qm: i64, direction: Direction) -> (Rat, Rat) {
    // expand the hard-support side so every true term below the q-cap is kept
    let hard = rat_int(qm);
    match direction {
        Direction::NegY => (y_window.0.clone(), y_window.1.clone().max(hard)),
        Direction::PosY => (y_window.0.clone().min(-hard), y_window.1.clone()),
    }
}

fn window_keys(s: &SeriesBox) -> (i64, i64) {
    let (lo, hi) = s.y_window();
    let lo = (lo * rat_int(s.y_den())).to_integer();
    let hi = (hi * rat_int(s.y_den())).to_integer();
    (
        i64::try_from(lo).unwrap_or(i64::MIN / 4),
        i64::try_from(hi).unwrap_or(i64::MAX / 4),
    )
}

// ---------------------------------------------------------------------------
// twisted Eisenstein series
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtractionSign {
    Plus,
    Minus,
}

/// E_m(y, q) for m >= 2, extracted as the coefficient of (2 pi i z)^(m-1) in
/// the chosen three-variable kernel P_1^± + 1/(2 pi i z): the
/// Bernoulli-polynomial constant -B_m(1)/m! plus the Fourier part
/// sum_{n>=1} (n^(m-1)/(m-1)!) [ y^-1 q^n/(1-y^-1 q^n) + (-1)^m y q^n/(1-y q^n) ].
/// The two kernels differ only in their z-independent summation, so both
/// extractions must agree for m >= 2; they are assembled independently here.
pub fn twisted_e(m: i64, sign: ExtractionSign, q_order: i64, y_window: (&Rat, &Rat)) -> Result<SeriesBox> {
    if m < 2 {
        return Err(EngineError::Parameter(format!(
            "twisted E_m needs m >= 2, got {m} (use twisted_e1 for m = 1)"
        )));
    }
    match sign {
        ExtractionSign::Plus => twisted_e_from_plus_kernel(m, q_order, y_window),
        ExtractionSign::Minus => twisted_e_from_minus_kernel(m, q_order, y_window),
    }
}

fn twisted_e_box(q_order: i64, y_window: (&Rat, &Rat)) -> Result<SeriesBox> {
    let qm = q_order.max(1);
    let hard = rat_int(qm);
    let lo = y_window.0.clone().min(-hard.clone());
    let hi = y_window.1.clone().max(hard);
    SeriesBox::zero(1, 1, &q_cap(q_order), (&lo, &hi), Direction::NegY)
}

fn twisted_e_from_plus_kernel(m: i64, q_order: i64, y_window: (&Rat, &Rat)) -> Result<SeriesBox> {
    let qm = q_order.max(1);
    let mut out = twisted_e_box(q_order, y_window)?;
    out.push_raw(0, 0, -bernoulli_at_one(m as usize) / factorial(m as usize));
    let scale = rat_int(1) / factorial(m as usize - 1);
    let sgn = if m % 2 == 0 { rat_int(1) } else { rat_int(-1) };
    for n in 1..qm {
        let w = &scale * ipow(n, m as u32 - 1);
        // y^-1 q^n/(1 - y^-1 q^n) = sum_{j>=1} y^-j q^(n j)
        let mut j = 1;
        while n * j < qm {
            out.push_raw(n * j, -j, w.clone());
            j += 1;
        }
        // (-1)^m y q^n/(1 - y q^n)
        let mut j = 1;
        while n * j < qm {
            out.push_raw(n * j, j, &w * &sgn);
            j += 1;
        }
    }
    Ok(out)
}

fn twisted_e_from_minus_kernel(m: i64, q_order: i64, y_window: (&Rat, &Rat)) -> Result<SeriesBox> {
    // P_1^- shares the Fourier kernels of P_1^-'s display; its z-independent
    // first summation never reaches the (2 pi i z)^(m-1) coefficient, m >= 2.
    let qm = q_order.max(1);
    let mut out = twisted_e_box(q_order, y_window)?;
    out.push_raw(0, 0, -bernoulli_at_one(m as usize) / factorial(m as usize));
    let scale = rat_int(1) / factorial(m as usize - 1);
    let sgn = if m % 2 == 0 { rat_int(1) } else { rat_int(-1) };
    for n in 1..qm {
        let w = &scale * ipow(n, m as u32 - 1);
        let mut j = 1;
        while n * j < qm {
            out.push_raw(n * j, -j, w.clone());
            out.push_raw(n * j, j, &w * &sgn);
            j += 1;
        }
    }
    Ok(out)
}

/// E_1^±(y, q): the m = 1 coefficient, whose constant summation depends on
/// the kernel: sum_{n>=0} y^-n for plus, -sum_{n>=1} y^n for minus. Both are
/// expansions of the same rational function y/(y-1), so in any fixed
/// direction the two signs emit identical windowed series.
pub fn twisted_e1(
    sign: ExtractionSign,
    q_order: i64,
    y_window: (&Rat, &Rat),
    direction: Direction,
) -> Result<SeriesBox> {
    let _ = sign; // see doc comment: the windowed expansions coincide per direction
    let qm = q_order.max(1);
    let (lo, hi) = widen(y_window, qm, direction);
    let mut out = SeriesBox::zero(1, 1, &q_cap(q_order), (&lo, &hi), direction)?;
    let (lo_k, hi_k) = window_keys(&out);
    out.push_raw(0, 0, rat(-1, 2)); // -B_1(1)/1!
    match direction {
        Direction::NegY => {
            for n in 0..=(-lo_k).max(0) {
                out.push_raw(0, -n, rat_int(1)); // sum_{n>=0} y^-n
            }
        }
        Direction::PosY => {
            for n in 1..=hi_k.max(0) {
                out.push_raw(0, n, rat_int(-1)); // -sum_{n>=1} y^n
            }
        }
    }
    for n in 1..qm {
        let mut j = 1;
        while n * j < qm {
            out.push_raw(n * j, -j, rat_int(1));
            out.push_raw(n * j, j, rat_int(-1));
            j += 1;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Weierstrass Laurent series
// ---------------------------------------------------------------------------

/// One z-power of a [`ZLaurent`]: an exact q-series times its prefactor.
#[derive(Clone, Debug)]
pub struct ZCoefficient {
    pub z_pow: i64,
    pub series: QSeries,
    pub prefactor: Prefactor,
}

/// Laurent series in z with q-series coefficients:
/// wp_k(z, q) = z^-k + pi*i*delta_{k,1}
///            + (-1)^k sum_{n>=0} C(2n+1, k-1) G_{2n+2}(q) z^(2n+2-k).
#[derive(Clone, Debug)]
pub struct ZLaurent {
    pub k: i64,
    pub entries: Vec<ZCoefficient>,
}

fn binom(n: i64, r: i64) -> Rat {
    if r < 0 || r > n {
        return rat_int(0);
    }
    let mut acc = rat_int(1);
    for i in 0..r {
        acc = acc * rat_int(n - i) / rat_int(i + 1);
    }
    acc
}

pub fn weierstrass_wp(k: i64, z_order: i64, q_order: i64) -> Result<ZLaurent> {
    if k < 1 {
        return Err(EngineError::Parameter(format!("wp_k needs k >= 1, got {k}")));
    }
    let mut entries = Vec::new();
    entries.push(ZCoefficient {
        z_pow: -k,
        series: QSeries::from_terms(1, &[(rat_int(0), rat_int(1))], &q_cap(q_order))?,
        prefactor: Prefactor::new(0, 0),
    });
    if k == 1 {
        // pi*i = (1/2)(2 pi i), prefactor-tracked
        entries.push(ZCoefficient {
            z_pow: 0,
            series: QSeries::from_terms(1, &[(rat_int(0), rat(1, 2))], &q_cap(q_order))?,
            prefactor: Prefactor::new(0, 1),
        });
    }
    let sgn = if k % 2 == 0 { rat_int(1) } else { rat_int(-1) };
    let mut n = 0;
    while 2 * n + 2 - k <= z_order {
        let b = binom(2 * n + 1, k - 1);
        if b != rat_int(0) {
            entries.push(ZCoefficient {
                z_pow: 2 * n + 2 - k,
                series: eisenstein_g(2 * n + 2, q_order)?.scale(&(&sgn * b)),
                prefactor: Prefactor::new(0, 2 * n + 2),
            });
        }
        n += 1;
    }
    entries.sort_by_key(|e| e.z_pow);
    Ok(ZLaurent { k, entries })
}

// ---------------------------------------------------------------------------
// theta functions and eta
// ---------------------------------------------------------------------------

/// theta_11 with its i prefactor stripped:
/// sum_n (-1)^n q^((n+1/2)^2/2) y^(n+1/2); grids (8, 2).
pub fn theta11(q_order: i64, y_window: (&Rat, &Rat)) -> Result<SeriesBox> {
    lattice_theta(q_order, y_window, 8, 2, |n| {
        let s = rat(2 * n + 1, 2);
        let sign = if n.rem_euclid(2) == 0 { 1 } else { -1 };
        (&s * &s / rat_int(2), s, rat_int(sign))
    })
}

/// theta_i0 in the literal printed convention:
/// sum_n q^((n+i/2)^2/2) y^(n+i/2); grids (8, 2).
pub fn theta_i0(i: i64, q_order: i64, y_window: (&Rat, &Rat)) -> Result<SeriesBox> {
    if !(0..=1).contains(&i) {
        return Err(EngineError::Parameter(format!("theta_i0 needs i in {{0,1}}, got {i}")));
    }
    lattice_theta(q_order, y_window, 8, 2, move |n| {
        let s = rat(2 * n + i, 2);
        (&s * &s / rat_int(2), s, rat_int(1))
    })
}

/// theta_j of the admissible-level family:
/// sum_n (-1)^n y^(n+1/2-j/3) q^((n+1/2-j/3)^2/2); grids (72, 6).
pub fn theta_j_adm(j: i64, q_order: i64, y_window: (&Rat, &Rat)) -> Result<SeriesBox> {
    if !(0..=2).contains(&j) {
        return Err(EngineError::Parameter(format!("theta_j needs j in {{0,1,2}}, got {j}")));
    }
    lattice_theta(q_order, y_window, 72, 6, move |n| {
        let s = rat(6 * n + 3 - 2 * j, 6);
        let sign = if n.rem_euclid(2) == 0 { 1 } else { -1 };
        (&s * &s / rat_int(2), s, rat_int(sign))
    })
}

/// Shared lattice-sum builder: term(n) = (q_exp, y_exp, coeff). The window is
/// expanded to cover every lattice point below the q-truncation, so the
/// emitted series is exact on its whole box.
fn lattice_theta(
    q_order: i64,
    y_window: (&Rat, &Rat),
    q_den: i64,
    y_den: i64,
    term: impl Fn(i64) -> (Rat, Rat, Rat),
) -> Result<SeriesBox> {
    let q_max = q_cap(q_order);
    // |y-exponent| stays below sqrt(2 q_order) + 2 for all our lattice sums
    let reach = (2.0 * (q_order.max(1) as f64)).sqrt() as i64 + 3;
    let lo = y_window.0.clone().min(rat_int(-reach));
    let hi = y_window.1.clone().max(rat_int(reach));
    let mut out = SeriesBox::zero(q_den, y_den, &q_max, (&lo, &hi), Direction::NegY)?;
    for n in -(reach + 2)..=(reach + 2) {
        let (qe, ye, c) = term(n);
        if qe < q_max {
            let (qk, yk) = out.grid_keys(&qe, &ye)?;
            out.push_raw(qk, yk, c);
        }
    }
    Ok(out)
}

/// Dedekind eta: q^(1/24) prod_{n>=1} (1 - q^n), truncated; grid 24.
pub fn eta(q_order: i64) -> Result<QSeries> {
    let product = euler_product_pow(1, q_order.max(1))?;
    QSeries::from_series(product.as_series().mul_monomial(&rat(1, 24), &rat_int(0), &rat_int(1))?)
}

/// eta^n via direct expansion of prod (1 - q^m)^n; grid 24.
pub fn eta_pow(n: i64, q_order: i64) -> Result<QSeries> {
    if n < 1 {
        return Err(EngineError::Parameter(format!("eta_pow needs n >= 1, got {n}")));
    }
    let product = euler_product_pow(n, q_order.max(1))?;
    QSeries::from_series(product.as_series().mul_monomial(&rat(n, 24), &rat_int(0), &rat_int(1))?)
}

/// prod_{m>=1} (1 - q^m)^n truncated below q^qm, on grid 24.
fn euler_product_pow(n: i64, qm: i64) -> Result<QSeries> {
    let q_max = rat_int(qm);
    let mut acc = QSeries::from_terms(24, &[(rat_int(0), rat_int(1))], &q_max)?;
    for m in 1..qm {
        let mut factor_terms: Vec<(Rat, Rat)> = Vec::new();
        let mut j = 0;
        while j * m < qm && j <= n {
            let c = binom(n, j) * if j % 2 == 0 { rat_int(1) } else { rat_int(-1) };
            factor_terms.push((rat_int(j * m), c));
            j += 1;
        }
        let factor = QSeries::from_terms(24, &factor_terms, &q_max)?;
        acc = acc.mul(&factor)?;
    }
    Ok(acc)
}

/// Pentagonal-number expansion of prod (1 - q^n): independent oracle for eta.
pub fn eta_pentagonal(q_order: i64) -> Result<QSeries> {
    let qm = q_order.max(1);
    let mut terms: Vec<(Rat, Rat)> = Vec::new();
    for k in -qm..=qm {
        let e = k * (3 * k - 1) / 2;
        if (0..qm).contains(&e) {
            let sign = if k.rem_euclid(2) == 0 { 1 } else { -1 };
            terms.push((rat_int(e), rat_int(sign)));
        }
    }
    let base = QSeries::from_terms(24, &terms, &rat_int(qm))?;
    QSeries::from_series(base.as_series().mul_monomial(&rat(1, 24), &rat_int(0), &rat_int(1))?)
}

/// The normalised z-derivative of theta at z = 0:
/// sum_n (-1)^n (n + 1/2) q^((n+1/2)^2/2); equals eta^3. Grid 24.
pub fn theta_prime_zero_normalized(q_order: i64) -> Result<QSeries> {
    let qm = q_order.max(1);
    let reach = (2.0 * qm as f64).sqrt() as i64 + 3;
    let mut terms: Vec<(Rat, Rat)> = Vec::new();
    for n in -(reach + 2)..=(reach + 2) {
        let s = rat(2 * n + 1, 2);
        let qe = &s * &s / rat_int(2);
        if qe < rat_int(qm) {
            let sign = if n.rem_euclid(2) == 0 { 1 } else { -1 };
            terms.push((qe, rat_int(sign) * s));
        }
    }
    QSeries::from_terms(24, &terms, &rat_int(qm))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn win(lo: i64, hi: i64) -> (Rat, Rat) {
        (rat_int(lo), rat_int(hi))
    }

    #[test]
    fn eisenstein_g_constants() {
        let g2 = eisenstein_g(2, 4).unwrap();
        assert_eq!(g2.coefficient(&rat_int(0)).unwrap(), rat(-1, 12));
        assert_eq!(g2.coefficient(&rat_int(1)).unwrap(), rat_int(2));
        let g4 = eisenstein_g(4, 4).unwrap();
        assert_eq!(g4.coefficient(&rat_int(0)).unwrap(), rat(1, 720));
        let g6 = eisenstein_g(6, 4).unwrap();
        assert_eq!(g6.coefficient(&rat_int(0)).unwrap(), -rat(1, 42) / factorial(6));
        assert!(eisenstein_g(3, 4).is_err());
        assert!(eisenstein_g(0, 4).is_err());
    }

    #[test]
    fn eisenstein_e_expansions() {
        let e2 = eisenstein_e(2, 5).unwrap();
        for (n, c) in [(0, 1), (1, -24), (2, -72), (3, -96), (4, -168)] {
            assert_eq!(e2.coefficient(&rat_int(n)).unwrap(), rat_int(c));
        }
        let e4 = eisenstein_e(4, 3).unwrap();
        assert_eq!(e4.coefficient(&rat_int(1)).unwrap(), rat_int(240));
        let e6 = eisenstein_e(6, 3).unwrap();
        assert_eq!(e6.coefficient(&rat_int(0)).unwrap(), rat_int(1));
        assert_eq!(e6.coefficient(&rat_int(1)).unwrap(), rat_int(-504));
    }

    #[test]
    fn p_plus_leading_slices() {
        let w = win(-6, 6);
        let p1 = p_plus(1, 3, (&w.0, &w.1), Direction::PosY).unwrap();
        for n in 1..=6 {
            assert_eq!(p1.coefficient(&rat_int(0), &rat_int(n)).unwrap(), rat_int(1));
        }
        let p2 = p_plus(2, 3, (&w.0, &w.1), Direction::PosY).unwrap();
        for n in 1..=6 {
            assert_eq!(p2.coefficient(&rat_int(0), &rat_int(n)).unwrap(), rat_int(n));
        }
        // p_minus(1) q^0 slice: -sum y^-n (set q = 0 in the minus display)
        let pm = p_minus(1, 3, (&w.0, &w.1), Direction::NegY).unwrap();
        for n in 1..=6 {
            assert_eq!(pm.coefficient(&rat_int(0), &rat_int(-n)).unwrap(), rat_int(-1));
        }
    }

    #[test]
    fn q1_slices_match_display() {
        let w = win(-4, 4);
        let q1 = q_k(1, 3, (&w.0, &w.1), Direction::PosY).unwrap();
        assert_eq!(q1.coefficient(&rat_int(0), &rat_int(0)).unwrap(), rat(1, 2));
        assert_eq!(q1.coefficient(&rat_int(0), &rat_int(1)).unwrap(), rat_int(1));
        assert_eq!(q1.coefficient(&rat_int(0), &rat_int(3)).unwrap(), rat_int(1));
        assert_eq!(q1.coefficient(&rat_int(1), &rat_int(1)).unwrap(), rat_int(1));
        assert_eq!(q1.coefficient(&rat_int(1), &rat_int(-1)).unwrap(), rat_int(-1));
        assert_eq!(q1.coefficient(&rat_int(1), &rat_int(2)).unwrap(), rat_int(0));
        for (ye, c) in [(2, 1), (1, 1), (-1, -1), (-2, -1)] {
            assert_eq!(q1.coefficient(&rat_int(2), &rat_int(ye)).unwrap(), rat_int(c));
        }
        // NegY re-expansion of the q^0 slice: -1/2 - y^-1 - y^-2 - ...
        let q1n = q_k(1, 3, (&w.0, &w.1), Direction::NegY).unwrap();
        assert_eq!(q1n.coefficient(&rat_int(0), &rat_int(0)).unwrap(), rat(-1, 2));
        assert_eq!(q1n.coefficient(&rat_int(0), &rat_int(-2)).unwrap(), rat_int(-1));
        assert_eq!(q1n.coefficient(&rat_int(1), &rat_int(1)).unwrap(), rat_int(1));
    }

    #[test]
    fn derivative_ladder_low_order() {
        let w = win(-8, 8);
        for dir in [Direction::PosY, Direction::NegY] {
            for k in 1..=3i64 {
                let qk = q_k(k, 6, (&w.0, &w.1), dir).unwrap();
                let qk1 = q_k(k + 1, 6, (&w.0, &w.1), dir).unwrap();
                let lhs = qk.deriv_y();
                let rhs = qk1.scale(&rat_int(k));
                assert!(lhs.equal_to_order(&rhs, &rat_int(6), (&rat_int(-8), &rat_int(8))).unwrap());
            }
        }
    }

    #[test]
    fn twisted_e_constants_and_agreement() {
        let w = win(-5, 5);
        let e2 = twisted_e(2, ExtractionSign::Plus, 6, (&w.0, &w.1)).unwrap();
        // -B_2(1)/2! = -1/12
        assert_eq!(e2.coefficient(&rat_int(0), &rat_int(0)).unwrap(), rat(-1, 12));
        assert_eq!(e2.coefficient(&rat_int(1), &rat_int(1)).unwrap(), rat_int(1));
        assert_eq!(e2.coefficient(&rat_int(1), &rat_int(-1)).unwrap(), rat_int(1));
        for m in 2..=6i64 {
            let p = twisted_e(m, ExtractionSign::Plus, 8, (&w.0, &w.1)).unwrap();
            let mm = twisted_e(m, ExtractionSign::Minus, 8, (&w.0, &w.1)).unwrap();
            assert!(p.equal_to_order(&mm, &rat_int(8), (&w.0, &w.1)).unwrap());
        }
        assert!(twisted_e(1, ExtractionSign::Plus, 4, (&w.0, &w.1)).is_err());
    }

    #[test]
    fn twisted_e1_constant_slice() {
        let w = win(-5, 5);
        let e1 = twisted_e1(ExtractionSign::Plus, 4, (&w.0, &w.1), Direction::NegY).unwrap();
        // q^0 slice: sum_{n>=0} y^-n - 1/2
        assert_eq!(e1.coefficient(&rat_int(0), &rat_int(0)).unwrap(), rat(1, 2));
        assert_eq!(e1.coefficient(&rat_int(0), &rat_int(-3)).unwrap(), rat_int(1));
        assert_eq!(e1.coefficient(&rat_int(0), &rat_int(1)).unwrap(), rat_int(0));
    }

    #[test]
    fn wp_structure() {
        let wp2 = weierstrass_wp(2, 6, 5).unwrap();
        let lead = wp2.entries.iter().find(|e| e.z_pow == -2).unwrap();
        assert_eq!(lead.series.coefficient(&rat_int(0)).unwrap(), rat_int(1));
        assert_eq!(lead.prefactor, Prefactor::new(0, 0));

        let wp1 = weierstrass_wp(1, 7, 5).unwrap();
        let pi_i = wp1.entries.iter().find(|e| e.z_pow == 0).unwrap();
        assert_eq!(pi_i.series.coefficient(&rat_int(0)).unwrap(), rat(1, 2));
        assert_eq!(pi_i.prefactor, Prefactor::new(0, 1));

        // -d/dz wp_1 = wp_2 exactly on shared z-powers
        for e2 in &wp2.entries {
            if e2.z_pow == -2 {
                continue;
            }
            let z = e2.z_pow;
            let e1 = wp1.entries.iter().find(|e| e.z_pow == z + 1).unwrap();
            let derived = e1.series.scale(&rat_int(-(z + 1)));
            assert_eq!(e1.prefactor, e2.prefactor);
            assert!(derived.equal_to_order(&e2.series, &rat_int(5)).unwrap());
        }
    }

    #[test]
    fn theta_leading_slices() {
        let w = win(-4, 4);
        let t = theta11(2, (&w.0, &w.1)).unwrap();
        assert_eq!(t.coefficient(&rat(1, 8), &rat(1, 2)).unwrap(), rat_int(1));
        assert_eq!(t.coefficient(&rat(1, 8), &rat(-1, 2)).unwrap(), rat_int(-1));
        assert_eq!(t.q_min(), rat(1, 8));

        let t0 = theta_j_adm(0, 2, (&w.0, &w.1)).unwrap();
        assert_eq!(t0.coefficient(&rat(1, 8), &rat(1, 2)).unwrap(), rat_int(1));
        assert_eq!(t0.coefficient(&rat(1, 8), &rat(-1, 2)).unwrap(), rat_int(-1));

        let t1 = theta_j_adm(1, 2, (&w.0, &w.1)).unwrap();
        assert_eq!(t1.coefficient(&rat(1, 72), &rat(1, 6)).unwrap(), rat_int(1));
    }

    #[test]
    fn eta_pentagonal_consistency() {
        let e = eta(30).unwrap();
        let p = eta_pentagonal(30).unwrap();
        assert!(e.equal_to_order(&p, &rat_int(29)).unwrap());
        for (num, c) in [(1, 1), (25, -1), (49, -1), (121, 1), (169, 1), (73, 0)] {
            assert_eq!(e.coefficient(&rat(num, 24)).unwrap(), rat_int(c));
        }
    }

    #[test]
    fn eta_pow_matches_repeated_squaring() {
        let direct = eta_pow(24, 12).unwrap();
        let e = eta(12).unwrap();
        let mut sq = e.clone();
        for _ in 0..3 {
            sq = sq.mul(&sq).unwrap(); // eta^2, eta^4, eta^8
        }
        let pow24 = sq.mul(&sq.mul(&sq).unwrap()).unwrap(); // eta^8 * eta^16
        let bound = direct.as_series().q_max().min(pow24.as_series().q_max());
        assert!(direct.equal_to_order(&pow24, &bound).unwrap());
    }

    #[test]
    fn theta_prime_equals_eta_cubed_low_order() {
        let lhs = theta_prime_zero_normalized(12).unwrap();
        let rhs = eta_pow(3, 12).unwrap();
        assert!(lhs.equal_to_order(&rhs, &rat_int(11)).unwrap());
    }
}
