//! JSON model files and report serialization.
//!
//! Floats are written with 17 significant digits so that every `f64`
//! survives a write/read cycle bit for bit.

use std::io;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{MlzError, Result};
use crate::matrix::RealSymMatrix;
use crate::models::{DiabaticModel, TtauPartner};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartnerFile {
    pub b11: Vec<f64>,
    pub a1: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub n: usize,
    pub slope: Vec<f64>,
    pub tau_slope: Vec<f64>,
    pub coupling: Vec<Vec<f64>>,
    pub tau: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partner: Option<PartnerFile>,
}

fn invalid(msg: impl Into<String>) -> MlzError {
    MlzError::InvalidModelFile(msg.into())
}

fn square(name: &str, rows: &[Vec<f64>], n: usize) -> Result<RealSymMatrix> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(invalid(format!("{name} must be {n}x{n}")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(invalid(format!("{name} has non-finite entries")));
    }
    RealSymMatrix::from_rows(rows).map_err(|e| invalid(format!("{name}: {e}")))
}

fn vector(name: &str, v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(invalid(format!(
            "{name} has {} entries, expected {n}",
            v.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(invalid(format!("{name} has non-finite entries")));
    }
    Ok(())
}

impl ModelFile {
    pub fn from_model(model: &DiabaticModel, partner: Option<&TtauPartner>) -> Self {
        Self {
            n: model.n(),
            slope: model.slope().to_vec(),
            tau_slope: model.tau_slope().to_vec(),
            coupling: model.coupling().rows(),
            tau: model.tau(),
            partner: partner.map(|p| PartnerFile {
                b11: p.b11.clone(),
                a1: p.a1.rows(),
                c: p.c.rows(),
            }),
        }
    }

    /// Validates dimensions, finiteness, symmetry and `τ > 0`.
    pub fn to_model(&self) -> Result<(DiabaticModel, Option<TtauPartner>)> {
        let n = self.n;
        if n == 0 {
            return Err(invalid("n must be at least 1"));
        }
        vector("slope", &self.slope, n)?;
        vector("tau_slope", &self.tau_slope, n)?;
        let coupling = square("coupling", &self.coupling, n)?;
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(invalid(format!(
                "tau must be positive and finite, got {}",
                self.tau
            )));
        }
        let model = DiabaticModel::new(
            self.slope.clone(),
            self.tau_slope.clone(),
            coupling,
            self.tau,
        )
        .map_err(|e| invalid(e.to_string()))?;
        let partner = match &self.partner {
            None => None,
            Some(p) => {
                vector("partner.b11", &p.b11, n)?;
                let a1 = square("partner.a1", &p.a1, n)?;
                let c = square("partner.c", &p.c, n)?;
                Some(TtauPartner::new(p.b11.clone(), a1, c)?)
            }
        };
        Ok((model, partner))
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| invalid(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        to_json(self)
    }
}

/// Pretty JSON with every float written as `{:.16e}`.
struct FullPrecision<'a>(PrettyFormatter<'a>);

impl Formatter for FullPrecision<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_array(writer)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object(writer)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object_value(writer)
    }
}

/// Serializes `value` as pretty JSON with full-precision floats and a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut buf, FullPrecision(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_bowtie, build_h5, build_h6};
    use proptest::prelude::*;

    #[test]
    fn round_trip_is_byte_identical() {
        let (model, partner) = build_h5(1.0, 1.0, 1.0, 0.15, 0.25, 1.0).unwrap();
        let text = ModelFile::from_model(&model, Some(&partner))
            .to_json()
            .unwrap();
        let parsed = ModelFile::parse(&text).unwrap();
        let (m2, p2) = parsed.to_model().unwrap();
        assert_eq!(m2, model);
        assert_eq!(p2.as_ref(), Some(&partner));
        assert_eq!(
            ModelFile::from_model(&m2, p2.as_ref()).to_json().unwrap(),
            text
        );
    }

    #[test]
    fn floats_carry_seventeen_digits() {
        let text = to_json(&[0.1_f64, -2.0]).unwrap();
        assert!(text.contains("1.0000000000000001e-1"), "{text}");
        assert!(text.contains("-2.0000000000000000e0"));
        assert_eq!(to_json(&f64::NAN).unwrap(), "null\n");
    }

    #[test]
    fn partner_is_optional() {
        let model = build_h6(1.0, 1.5, 1.0, 0.105, 1.0).unwrap();
        let text = ModelFile::from_model(&model, None).to_json().unwrap();
        assert!(!text.contains("partner"));
        assert!(ModelFile::parse(&text)
            .unwrap()
            .to_model()
            .unwrap()
            .1
            .is_none());
    }

    #[test]
    fn rejects_inconsistent_files() {
        let (model, partner) = build_bowtie(&[1.0, -1.0], &[0.2, 0.3], 1.0).unwrap();
        let good = ModelFile::from_model(&model, Some(&partner));

        let mut f = good.clone();
        f.n = 3;
        assert!(matches!(f.to_model(), Err(MlzError::InvalidModelFile(_))));

        let mut f = good.clone();
        f.coupling[0][2] += 1e-6;
        assert!(f.to_model().is_err());

        let mut f = good.clone();
        f.tau = 0.0;
        assert!(f.to_model().is_err());

        let mut f = good.clone();
        f.partner.as_mut().unwrap().c.pop();
        assert!(f.to_model().is_err());

        assert!(ModelFile::parse("{\"n\": 1}").is_err());
        assert!(ModelFile::parse("not json").is_err());
        let extra = good.to_json().unwrap().replacen('{', "{\"extra\": 1,", 1);
        assert!(ModelFile::parse(&extra).is_err());
    }

    proptest! {
        #[test]
        fn any_finite_float_round_trips(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let text = to_json(&v).unwrap();
            let back: f64 = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back.to_bits(), v.to_bits());
        }
    }
}
