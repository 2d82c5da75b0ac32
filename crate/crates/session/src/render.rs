//! Phenotype rendering: the server maps a search-space point to drawing
//! parameters; clients only draw them.

use ide_core::landscape::SearchDomain;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Renderer {
    /// A small vector-graphic figure whose colour and shape follow the point.
    #[default]
    Figure,
    /// The raw point only.
    Vector,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhenotypeSpec {
    pub renderer: Renderer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Render {
    #[serde(rename = "type")]
    pub kind: Renderer,
    pub params: Value,
}

/// Position of each coordinate within its bounds, in `[0, 1]`.
fn normalized(domain: &SearchDomain, point: &[f64]) -> Vec<f64> {
    point
        .iter()
        .enumerate()
        .map(|(j, x)| {
            let (lo, hi) = (domain.lower()[j], domain.upper()[j]);
            if hi > lo {
                ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
            } else {
                0.5
            }
        })
        .collect()
}

/// Rounds a drawing parameter; the exact point travels separately.
fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

pub fn render(spec: &PhenotypeSpec, domain: &SearchDomain, point: &[f64]) -> Render {
    match spec.renderer {
        Renderer::Vector => Render { kind: Renderer::Vector, params: json!({ "vector": point }) },
        Renderer::Figure => {
            let u = normalized(domain, point);
            // coordinates are reused cyclically when there are fewer than seven
            let c = |k: usize| if u.is_empty() { 0.5 } else { u[k % u.len()] };
            Render {
                kind: Renderer::Figure,
                params: json!({
                    "vector": point,
                    "hue": round3(360.0 * c(0)),
                    "saturation": round3(0.35 + 0.6 * c(1)),
                    "lightness": round3(0.3 + 0.4 * c(2)),
                    "sides": 3 + (c(3) * 5.999).floor() as u32,
                    "scale": round3(0.5 + 0.5 * c(4)),
                    "rotation": round3(360.0 * c(5)),
                    "stroke_width": round3(1.0 + 3.0 * c(6)),
                }),
            }
        }
    }
}
