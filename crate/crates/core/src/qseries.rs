//! Univariate q-series: a `SeriesBox` with trivial y-content.

use num_traits::Zero;

use crate::error::{EngineError, Result};
use crate::rational::{rat, Rat};
use crate::series::{Direction, SeriesBox};

/// A series in q alone (y-window collapsed to [0, 0]).
#[derive(Clone, Debug, PartialEq)]
pub struct QSeries(SeriesBox);

impl QSeries {
    pub fn zero(q_den: i64, q_max: &Rat) -> Result<Self> {
        let z = rat(0, 1);
        Ok(QSeries(SeriesBox::zero(q_den, 1, q_max, (&z, &z), Direction::NegY)?))
    }

    pub fn from_terms(q_den: i64, terms: &[(Rat, Rat)], q_max: &Rat) -> Result<Self> {
        let z = rat(0, 1);
        let triples: Vec<(Rat, Rat, Rat)> = terms
            .iter()
            .map(|(q, c)| (q.clone(), z.clone(), c.clone()))
            .collect();
        Ok(QSeries(SeriesBox::make_series(
            q_den,
            1,
            &triples,
            q_max,
            (&z, &z),
            Direction::NegY,
        )?))
    }

    /// Wrap a SeriesBox after checking it has no y-dependence.
    pub fn from_series(s: SeriesBox) -> Result<Self> {
        if s.iter_terms().any(|(_, y, _)| !y.is_zero()) {
            return Err(EngineError::Parameter("series has y-dependence".into()));
        }
        Ok(QSeries(s))
    }

    pub fn as_series(&self) -> &SeriesBox {
        &self.0
    }

    pub fn into_series(self) -> SeriesBox {
        self.0
    }

    /// Re-window the underlying box so it can combine with bivariate series.
    pub fn widened(&self, y_den: i64, y_window: (&Rat, &Rat), direction: Direction) -> Result<SeriesBox> {
        let mut out = SeriesBox::zero(self.0.q_den(), y_den, &self.0.q_max(), y_window, direction)?;
        for ((qk, _), c) in self.0.raw_terms() {
            out.push_raw(*qk, 0, c.clone());
        }
        Ok(out)
    }

    pub fn coefficient(&self, q_exp: &Rat) -> Result<Rat> {
        self.0.coefficient(q_exp, &rat(0, 1))
    }

    pub fn mul(&self, other: &QSeries) -> Result<QSeries> {
        Ok(QSeries(self.0.mul_s(&other.0)?))
    }

    pub fn add(&self, other: &QSeries) -> Result<QSeries> {
        Ok(QSeries(self.0.add(&other.0)?))
    }

    pub fn sub(&self, other: &QSeries) -> Result<QSeries> {
        Ok(QSeries(self.0.sub(&other.0)?))
    }

    pub fn scale(&self, s: &Rat) -> QSeries {
        QSeries(self.0.scale(s))
    }

    pub fn invert_unit(&self) -> Result<QSeries> {
        Ok(QSeries(self.0.invert_unit()?))
    }

    pub fn equal_to_order(&self, other: &QSeries, q_bound: &Rat) -> Result<bool> {
        let z = rat(0, 1);
        self.0.equal_to_order(&other.0, q_bound, (&z, &z))
    }
}
