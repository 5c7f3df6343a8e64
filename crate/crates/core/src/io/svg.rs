use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::IoError;
use crate::geometry::StrokeField;
use crate::render::RenderConfig;

pub fn hex_color(rgb: [f64; 3]) -> String {
    let [r, g, b] = rgb.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8);
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// SVG 1.1 document: a background rect, then one quadratic path per stroke in
/// field order.
pub fn svg_document(field: &StrokeField, config: &RenderConfig) -> String {
    let (w, h) = (field.width(), field.height());
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(
        out,
        r#"  <rect x="0" y="0" width="{w}" height="{h}" fill="{}"/>"#,
        hex_color(config.background)
    );
    for stroke in field.strokes() {
        let c = stroke.world_curve();
        let _ = writeln!(
            out,
            r#"  <path d="M {} {} Q {} {} {} {}" fill="none" stroke="{}" stroke-width="{}" stroke-linecap="round"/>"#,
            c.p0.x,
            c.p0.y,
            c.p1.x,
            c.p1.y,
            c.p2.x,
            c.p2.y,
            hex_color(stroke.color),
            2.0 * stroke.width
        );
    }
    out.push_str("</svg>\n");
    out
}

pub fn export_svg(field: &StrokeField, config: &RenderConfig, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    fs::write(path, svg_document(field, config)).map_err(|e| IoError::write(path, e))
}
