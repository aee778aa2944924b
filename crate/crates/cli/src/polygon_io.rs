//! Polygon JSON: `{"vertices": [{"kind": "interior", "x": .., "y": ..} |
//! {"kind": "ideal", "u": <number or "inf">}, ...]}`, counter-clockwise.
//!
//! Parse errors carry the offending vertex index.

use anyhow::{anyhow, bail, Context, Result};
use serde_json::Value;

use liouville::domains::{GeodesicPolygon, Vertex};
use liouville::geodesics::BoundaryPoint;
use liouville::hplane::PlanePoint;

pub fn parse_polygon(text: &str) -> Result<GeodesicPolygon> {
    let root: Value = serde_json::from_str(text).context("polygon file is not valid JSON")?;
    let verts = root
        .get("vertices")
        .and_then(Value::as_array)
        .ok_or_else(|| anyhow!("polygon JSON needs a \"vertices\" array"))?;
    let mut out = Vec::with_capacity(verts.len());
    for (i, v) in verts.iter().enumerate() {
        out.push(parse_vertex(v).map_err(|e| anyhow!("vertex {i}: {e}"))?);
    }
    let n = out.len();
    GeodesicPolygon::new(out).map_err(|e| match e {
        liouville::domains::PolygonError::NotCounterClockwise => anyhow!(
            "vertices are in clockwise order; reverse them to make the polygon counter-clockwise"
        ),
        other => anyhow!("invalid polygon ({n} vertices): {other}"),
    })
}

fn parse_vertex(v: &Value) -> Result<Vertex> {
    let kind = v
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| anyhow!("missing \"kind\" (\"interior\" or \"ideal\")"))?;
    match kind {
        "interior" => {
            let x = number_field(v, "x")?;
            let y = number_field(v, "y")?;
            let p = PlanePoint::new(x, y).map_err(|e| anyhow!("{e}"))?;
            Ok(Vertex::Interior(p))
        }
        "ideal" => {
            let u = v.get("u").ok_or_else(|| anyhow!("missing \"u\""))?;
            if u.as_str() == Some("inf") {
                return Ok(Vertex::Ideal(BoundaryPoint::infinity()));
            }
            let x = u
                .as_f64()
                .ok_or_else(|| anyhow!("\"u\" must be a number or \"inf\""))?;
            Ok(Vertex::Ideal(BoundaryPoint::from_real(x)))
        }
        other => bail!("unknown vertex kind {other:?}"),
    }
}

fn number_field(v: &Value, name: &str) -> Result<f64> {
    v.get(name)
        .and_then(Value::as_f64)
        .ok_or_else(|| anyhow!("missing numeric field \"{name}\""))
}

pub fn polygon_to_json(poly: &GeodesicPolygon) -> String {
    let verts: Vec<Value> = poly
        .vertices()
        .iter()
        .map(|v| match v {
            Vertex::Interior(p) => serde_json::json!({"kind": "interior", "x": p.x, "y": p.y}),
            Vertex::Ideal(b) => match b.value() {
                Some(u) => serde_json::json!({"kind": "ideal", "u": u}),
                None => serde_json::json!({"kind": "ideal", "u": "inf"}),
            },
        })
        .collect();
    serde_json::json!({ "vertices": verts }).to_string()
}
