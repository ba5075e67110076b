//! WSAF-vs-PLAF figure data: observed points, the fitted band lines and a
//! set of points simulated from the fitted model, one layer each.

use std::fmt::Write as _;

use strainmix::model::{band_wsaf, clamp_wsaf, BandSet, ModelParams, Plaf, SampleData};
use strainmix::seed::{chain_seed, rng_from_seed};
use strainmix::simulator::simulate_counts;
use strainmix::Result;

pub const FIGURE_COLUMNS: [&str; 4] = ["layer", "band", "plaf", "wsaf"];

const LINE_POINTS: usize = 101;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layer {
    Observed,
    Band,
    Simulated,
}

impl Layer {
    fn as_str(self) -> &'static str {
        match self {
            Layer::Observed => "observed",
            Layer::Band => "band",
            Layer::Simulated => "simulated",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FigurePoint {
    pub layer: Layer,
    /// Subset mask of the band, for band lines only.
    pub band: Option<u32>,
    pub plaf: f64,
    pub wsaf: f64,
}

/// Builds all three layers. Simulated points reuse the observed per-SNP
/// depths; SNPs without reads are left out of both point layers.
pub fn figure_points(data: &SampleData, plaf: &Plaf, params: &ModelParams, seed: u64) -> Result<Vec<FigurePoint>> {
    let band_set = BandSet::new(params.k)?;
    let mut points = Vec::new();
    for (c, &p) in data.counts.iter().zip(plaf.freqs()) {
        if let Some(wsaf) = c.wsaf() {
            points.push(FigurePoint {
                layer: Layer::Observed,
                band: None,
                plaf: p,
                wsaf,
            });
        }
    }
    for i in 0..LINE_POINTS {
        let p = clamp_wsaf(i as f64 / (LINE_POINTS - 1) as f64);
        for (band, q) in band_set.bands().iter().zip(band_wsaf(&band_set, params, p)?) {
            points.push(FigurePoint {
                layer: Layer::Band,
                band: Some(band.subset_mask),
                plaf: p,
                wsaf: q,
            });
        }
    }
    let mut rng = rng_from_seed(chain_seed(seed, &data.sample_id, params.k, "figure"));
    let simulated = simulate_counts(&mut rng, params, plaf, data.counts.iter().map(|c| c.total()));
    for (c, &p) in simulated.iter().zip(plaf.freqs()) {
        if let Some(wsaf) = c.wsaf() {
            points.push(FigurePoint {
                layer: Layer::Simulated,
                band: None,
                plaf: p,
                wsaf,
            });
        }
    }
    Ok(points)
}

pub fn figure_rows(points: &[FigurePoint]) -> impl Iterator<Item = [String; 4]> + '_ {
    points.iter().map(|pt| {
        [
            pt.layer.as_str().to_string(),
            pt.band.map(|b| b.to_string()).unwrap_or_default(),
            pt.plaf.to_string(),
            pt.wsaf.to_string(),
        ]
    })
}

const PANEL: f64 = 260.0;
const MARGIN: f64 = 30.0;

/// Three side-by-side scatter panels (observed, bands, simulated).
pub fn render_svg(title: &str, points: &[FigurePoint]) -> String {
    let width = 3.0 * (PANEL + MARGIN) + MARGIN;
    let height = PANEL + 2.0 * MARGIN + 20.0;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<text x="{MARGIN}" y="16">{}</text>"#, escape(title));
    for (i, layer) in [Layer::Observed, Layer::Band, Layer::Simulated].into_iter().enumerate() {
        let x0 = MARGIN + i as f64 * (PANEL + MARGIN);
        let y0 = MARGIN + 10.0;
        let _ = writeln!(
            svg,
            r##"<rect x="{x0}" y="{y0}" width="{PANEL}" height="{PANEL}" fill="none" stroke="#444"/><text x="{x0}" y="{}">{}</text>"##,
            y0 + PANEL + 14.0,
            layer.as_str()
        );
        let to_x = |p: f64| x0 + p * PANEL;
        let to_y = |w: f64| y0 + (1.0 - w) * PANEL;
        let layer_points = points.iter().filter(|pt| pt.layer == layer);
        if layer == Layer::Band {
            let mut bands: Vec<u32> = layer_points.clone().filter_map(|pt| pt.band).collect();
            bands.sort_unstable();
            bands.dedup();
            for b in bands {
                let path: Vec<String> = layer_points
                    .clone()
                    .filter(|pt| pt.band == Some(b))
                    .map(|pt| format!("{:.2},{:.2}", to_x(pt.plaf), to_y(pt.wsaf)))
                    .collect();
                let _ = writeln!(
                    svg,
                    r##"<polyline fill="none" stroke="#c0392b" stroke-width="1.2" points="{}"/>"##,
                    path.join(" ")
                );
            }
        } else {
            for pt in layer_points {
                let _ = writeln!(
                    svg,
                    r##"<circle cx="{:.2}" cy="{:.2}" r="1.2" fill="#2c3e50" fill-opacity="0.5"/>"##,
                    to_x(pt.plaf),
                    to_y(pt.wsaf)
                );
            }
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use strainmix::model::SnpCounts;

    #[test]
    fn layers_and_band_lines() {
        let data = SampleData::new("s", vec![SnpCounts::new(3, 1), SnpCounts::new(0, 0)]);
        let plaf = Plaf::new(vec![0.2, 0.6]).unwrap();
        let params = ModelParams::new(vec![0.7, 0.3], 0.1, 10.0).unwrap();
        let pts = figure_points(&data, &plaf, &params, 1).unwrap();
        let count = |l| pts.iter().filter(|p| p.layer == l).count();
        assert_eq!(count(Layer::Observed), 1);
        assert_eq!(count(Layer::Band), 4 * LINE_POINTS);
        assert_eq!(count(Layer::Simulated), 1);
        let obs = pts.iter().find(|p| p.layer == Layer::Observed).unwrap();
        assert_eq!((obs.plaf, obs.wsaf), (0.2, 0.25));
        // The two-strain band at p = 1 - eps sits at (1 - alpha) + alpha p.
        let top = pts
            .iter()
            .filter(|p| p.band == Some(3))
            .last()
            .unwrap();
        assert!((top.wsaf - (0.9 + 0.1 * (1.0 - 1e-6))).abs() < 1e-12);
        assert_eq!(pts, figure_points(&data, &plaf, &params, 1).unwrap());
    }

    #[test]
    fn svg_has_three_panels() {
        let data = SampleData::new("a<b", vec![SnpCounts::new(3, 1)]);
        let plaf = Plaf::new(vec![0.2]).unwrap();
        let params = ModelParams::new(vec![1.0], 0.1, 10.0).unwrap();
        let svg = render_svg("a<b", &figure_points(&data, &plaf, &params, 1).unwrap());
        assert_eq!(svg.matches("<rect").count(), 3);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("a&lt;b"));
    }
}
