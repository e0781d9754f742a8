use serde::Serialize;

use super::{AttributeKind, AttributeValue, EventLog, EventLogError, Result, Timestamp};

/// Quantile levels reported for every numeric or timestamp attribute.
pub const QUANTILE_LEVELS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum QuantileValue {
    /// An integer attribute whose quantile falls exactly on an observation.
    Int(i64),
    Real(f64),
    Timestamp(Timestamp),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributeSummary {
    pub name: String,
    pub kind: AttributeKind,
    pub empty_count: usize,
    pub total_count: usize,
    /// One value per entry of [`QUANTILE_LEVELS`]; `None` when every value is missing.
    pub quantiles: Option<[QuantileValue; 5]>,
}

/// Linear-interpolation quantile over ascending `sorted` values.
///
/// Returns `v[i] + (v[i+1] - v[i]) * frac` where `i + frac = p * (n - 1)`.
pub fn quantile_linear(sorted: &[f64], p: f64) -> Option<f64> {
    let (i, frac) = position(sorted.len(), p)?;
    Some(match sorted.get(i + 1) {
        Some(next) if frac > 0.0 => sorted[i] + (next - sorted[i]) * frac,
        _ => sorted[i],
    })
}

fn position(n: usize, p: f64) -> Option<(usize, f64)> {
    if n == 0 {
        return None;
    }
    let pos = p.clamp(0.0, 1.0) * (n - 1) as f64;
    let i = (pos.floor() as usize).min(n - 1);
    Some((i, pos - i as f64))
}

fn integer_quantiles(mut values: Vec<i64>) -> Option<[QuantileValue; 5]> {
    values.sort_unstable();
    let n = values.len();
    let q = |p: f64| {
        let (i, frac) = position(n, p)?;
        Some(match values.get(i + 1) {
            Some(&next) if frac > 0.0 => QuantileValue::Real(values[i] as f64 + (next as f64 - values[i] as f64) * frac),
            _ => QuantileValue::Int(values[i]),
        })
    };
    Some([q(0.0)?, q(0.25)?, q(0.5)?, q(0.75)?, q(1.0)?])
}

fn real_quantiles(mut values: Vec<f64>) -> Option<[QuantileValue; 5]> {
    values.sort_by(f64::total_cmp);
    let q = |p| quantile_linear(&values, p).map(QuantileValue::Real);
    Some([q(0.0)?, q(0.25)?, q(0.5)?, q(0.75)?, q(1.0)?])
}

fn timestamp_quantiles(mut values: Vec<Timestamp>) -> Option<[QuantileValue; 5]> {
    values.sort_unstable();
    let n = values.len();
    let q = |p: f64| {
        let (i, frac) = position(n, p)?;
        let t = match values.get(i + 1) {
            Some(next) if frac > 0.0 => {
                let span = (*next - values[i]).num_microseconds().unwrap_or(i64::MAX) as f64;
                values[i] + chrono::Duration::microseconds((span * frac).round() as i64)
            }
            _ => values[i],
        };
        Some(QuantileValue::Timestamp(t))
    };
    Some([q(0.0)?, q(0.25)?, q(0.5)?, q(0.75)?, q(1.0)?])
}

/// Fill count and quantiles of one numeric or timestamp column of the flat view.
pub fn attribute_statistics(log: &EventLog, attribute: &str) -> Result<AttributeSummary> {
    let info = *log.attribute_catalog().get(attribute).ok_or_else(|| EventLogError::UnknownAttribute(attribute.to_owned()))?;
    if info.empty_count == info.total_count {
        return Ok(AttributeSummary {
            name: attribute.to_owned(),
            kind: info.kind,
            empty_count: info.empty_count,
            total_count: info.total_count,
            quantiles: None,
        });
    }
    let values = log.events().map(|(c, e)| log.value(c, e, attribute)).filter(|v| !v.is_missing());
    let quantiles = match info.kind {
        AttributeKind::Integer => {
            integer_quantiles(values.filter_map(|v| if let AttributeValue::Int(i) = v { Some(i) } else { None }).collect())
        }
        AttributeKind::Real => real_quantiles(values.filter_map(|v| v.as_f64()).collect()),
        AttributeKind::Timestamp => timestamp_quantiles(
            values.filter_map(|v| if let AttributeValue::Timestamp(t) = v { Some(t) } else { None }).collect(),
        ),
        kind => return Err(EventLogError::NonNumericAttribute { name: attribute.to_owned(), kind }),
    };
    Ok(AttributeSummary {
        name: attribute.to_owned(),
        kind: info.kind,
        empty_count: info.empty_count,
        total_count: info.total_count,
        quantiles,
    })
}
