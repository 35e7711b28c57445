//! Regression fits, config hashing and artifact headers.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Least-squares fit `log y = slope·log x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub stderr: f64,
    pub points: usize,
}

/// Log-log fit over the pairs with `x > 0` and `y > 0`. Needs 3 points.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Option<Fit> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    fit_linear(&pts)
}

pub fn fit_linear(pts: &[(f64, f64)]) -> Option<Fit> {
    let n = pts.len();
    if n < 3 {
        return None;
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = (rss / (nf - 2.0) / sxx).sqrt();
    Some(Fit { slope, intercept, stderr, points: n })
}

/// Hex sha256 of the canonical (key-sorted, compact) JSON of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    // `serde_json::Value` keeps object keys in a BTreeMap, so a round trip
    // through it sorts every level.
    let v = serde_json::to_value(value).expect("config serializes");
    let s = serde_json::to_string(&v).expect("value serializes");
    hex::encode(Sha256::digest(s.as_bytes()))
}

/// First line of a CSV artifact.
pub fn csv_header(hash: &str) -> String {
    format!("# qcarleson {VERSION} config {hash}\n")
}

/// First line of an SVG artifact.
pub fn svg_header(hash: &str) -> String {
    format!("<!-- qcarleson {VERSION} config {hash} -->\n")
}

/// Wraps a JSON payload with the config hash and version every artifact carries.
pub fn json_artifact<T: Serialize>(hash: &str, kind: &str, payload: &T) -> serde_json::Value {
    serde_json::json!({
        "config_hash": hash,
        "version": VERSION,
        "kind": kind,
        "payload": payload,
    })
}

/// Relative change `|a−b|/max(|a|,|b|)`, 0 when both vanish.
pub fn rel_change(a: f64, b: f64) -> f64 {
    let m = a.abs().max(b.abs());
    if m == 0.0 {
        0.0
    } else {
        (a - b).abs() / m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let xs: Vec<f64> = (1..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-1.5)).collect();
        let f = fit_loglog(&xs, &ys).unwrap();
        assert!((f.slope + 1.5).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(f.stderr < 1e-10);
    }

    #[test]
    fn too_few_points() {
        assert!(fit_loglog(&[1.0, 2.0], &[1.0, 2.0]).is_none());
        assert!(fit_loglog(&[1.0, 2.0, 3.0], &[0.0, 0.0, 1.0]).is_none());
    }

    #[test]
    fn hash_ignores_key_order() {
        let a: serde_json::Value = serde_json::from_str(r#"{"x":1,"y":[1,2]}"#).unwrap();
        let b: serde_json::Value = serde_json::from_str(r#"{"y":[1,2],"x":1}"#).unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }
}
