//! File formats: versioned JSON documents, CSV tables and SVG plots.

use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::circuit::ComplexZ;
use crate::error::{Result, SkinError};
use crate::geometry::{
    delaunay, CellId, ChannelDims, Electrodes, Network, Node, Point2, SKIN_HEIGHT_MM, SKIN_WIDTH_MM,
};
use crate::stimulus::{Family, TimeSeries};

pub const SCHEMA_VERSION: u64 = 1;

const DEFAULT_NETWORK_JSON: &str = include_str!("../assets/default_network.json");

/// Serializes `value` as pretty JSON with an added `schemaVersion` key.
pub fn to_versioned_json<T: Serialize>(value: &T) -> Result<String> {
    let mut map = Map::new();
    map.insert("schemaVersion".into(), Value::from(SCHEMA_VERSION));
    match serde_json::to_value(value)? {
        Value::Object(fields) => map.extend(fields),
        _ => return Err(SkinError::field("document", "expected a JSON object")),
    }
    let mut text = serde_json::to_string_pretty(&Value::Object(map))?;
    text.push('\n');
    Ok(text)
}

/// Parses a versioned document; unknown fields are rejected by `T`.
pub fn from_versioned_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let mut value: Value = serde_json::from_str(text)?;
    let map = value
        .as_object_mut()
        .ok_or_else(|| SkinError::field("document", "expected a JSON object"))?;
    match map.remove("schemaVersion") {
        Some(Value::Number(n)) if n.as_u64() == Some(SCHEMA_VERSION) => {}
        Some(other) => {
            return Err(SkinError::field(
                "schemaVersion",
                format!("unsupported version {other}, expected {SCHEMA_VERSION}"),
            ))
        }
        None => return Err(SkinError::field("schemaVersion", "missing")),
    }
    Ok(serde_json::from_value(value)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: usize,
    x_mm: f64,
    y_mm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<CellId>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDoc {
    a: usize,
    b: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ElectrodesDoc {
    #[serde(rename = "BL")]
    bl: usize,
    #[serde(rename = "C")]
    c: usize,
    #[serde(rename = "TR")]
    tr: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelDoc {
    width_mm: f64,
    depth_mm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    nodes: Vec<NodeDoc>,
    edges: Vec<EdgeDoc>,
    electrodes: ElectrodesDoc,
    channel: ChannelDoc,
}

pub fn network_to_json(network: &Network) -> Result<String> {
    let doc = NetworkDoc {
        nodes: network
            .nodes
            .iter()
            .enumerate()
            .map(|(id, n)| NodeDoc {
                id,
                x_mm: n.position.x,
                y_mm: n.position.y,
                label: n.label,
            })
            .collect(),
        edges: network.edges.iter().map(|&[a, b]| EdgeDoc { a, b }).collect(),
        electrodes: ElectrodesDoc {
            bl: network.electrodes.bl,
            c: network.electrodes.c,
            tr: network.electrodes.tr,
        },
        channel: ChannelDoc {
            width_mm: network.channel.width_mm,
            depth_mm: network.channel.depth_mm,
        },
    };
    to_versioned_json(&doc)
}

/// Parses a network document and checks it against its own geometry: ids
/// must be 0..n in order, labels must match the containing cell and the
/// edge list must equal the Delaunay triangulation of the nodes.
pub fn network_from_json(text: &str) -> Result<Network> {
    let doc: NetworkDoc = from_versioned_json(text)?;
    let mut nodes = Vec::with_capacity(doc.nodes.len());
    for (i, n) in doc.nodes.iter().enumerate() {
        if n.id != i {
            return Err(SkinError::field(format!("nodes[{i}].id"), format!("expected {i}, got {}", n.id)));
        }
        let p = Point2::new(n.x_mm, n.y_mm);
        if !(0.0..=SKIN_WIDTH_MM).contains(&p.x) || !(0.0..=SKIN_HEIGHT_MM).contains(&p.y) {
            return Err(SkinError::field(format!("nodes[{i}]"), "position outside the skin"));
        }
        let cell = CellId::containing(&p);
        if n.label.is_some() && n.label != cell {
            return Err(SkinError::field(
                format!("nodes[{i}].label"),
                format!("node lies in {}", cell.map(|c| c.to_string()).unwrap_or_default()),
            ));
        }
        nodes.push(Node { position: p, label: cell });
    }
    let positions: Vec<Point2> = nodes.iter().map(|n| n.position).collect();
    let tri = delaunay(&positions)?;
    let mut edges: Vec<[usize; 2]> = doc
        .edges
        .iter()
        .map(|e| if e.a < e.b { [e.a, e.b] } else { [e.b, e.a] })
        .collect();
    edges.sort_unstable();
    if edges != tri.edges {
        return Err(SkinError::field("edges", "edge list is not the Delaunay triangulation of the nodes"));
    }
    let electrodes = Electrodes {
        bl: doc.electrodes.bl,
        c: doc.electrodes.c,
        tr: doc.electrodes.tr,
    };
    for (name, idx) in [("BL", electrodes.bl), ("C", electrodes.c), ("TR", electrodes.tr)] {
        if idx >= nodes.len() {
            return Err(SkinError::field(format!("electrodes.{name}"), format!("node {idx} does not exist")));
        }
    }
    if electrodes.bl == electrodes.c || electrodes.c == electrodes.tr || electrodes.bl == electrodes.tr {
        return Err(SkinError::field("electrodes", "electrodes must sit on distinct nodes"));
    }
    let channel = ChannelDims {
        width_mm: doc.channel.width_mm,
        depth_mm: doc.channel.depth_mm,
    };
    if !(channel.width_mm > 0.0 && channel.depth_mm > 0.0) {
        return Err(SkinError::field("channel", "dimensions must be positive"));
    }
    Ok(Network {
        nodes,
        edges: tri.edges,
        triangles: tri.triangles,
        electrodes,
        channel,
    })
}

/// The shipped 17-node reference network.
pub fn default_network() -> Network {
    network_from_json(DEFAULT_NETWORK_JSON).expect("bundled network asset is valid")
}

pub fn read_to_string(mut reader: impl Read) -> Result<String> {
    let mut s = String::new();
    reader.read_to_string(&mut s)?;
    Ok(s)
}

pub fn write_sweep_csv(writer: impl Write, rows: &[(f64, ComplexZ)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["freq_hz", "R_ohm", "X_ohm", "Zmod_ohm", "Zphase_deg"])?;
    for (f, z) in rows {
        w.write_record([
            f.to_string(),
            z.resistance.to_string(),
            z.reactance.to_string(),
            z.modulus().to_string(),
            z.phase_deg().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_iv_csv(writer: impl Write, rows: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["v_volt", "i_amp"])?;
    for (v, i) in rows {
        w.write_record([v.to_string(), i.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_series_csv(writer: impl Write, series: &TimeSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t_s", "R_ohm", "X_ohm"])?;
    for (i, z) in series.samples.iter().enumerate() {
        w.write_record([
            series.time(i).to_string(),
            z.resistance.to_string(),
            z.reactance.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct SeriesRow {
    t_s: f64,
    #[serde(rename = "R_ohm")]
    r_ohm: f64,
    #[serde(rename = "X_ohm")]
    x_ohm: f64,
}

/// Reads a uniformly sampled `t_s,R_ohm,X_ohm` table.
pub fn read_series_csv(reader: impl Read) -> Result<TimeSeries> {
    let mut r = csv::Reader::from_reader(reader);
    let rows: Vec<SeriesRow> = r.deserialize().collect::<std::result::Result<_, _>>()?;
    if rows.len() < 2 {
        return Err(SkinError::InsufficientData(format!("{} rows, need at least 2", rows.len())));
    }
    let period = rows[1].t_s - rows[0].t_s;
    if !(period > 0.0) {
        return Err(SkinError::field("t_s", "times must increase"));
    }
    for (i, w) in rows.windows(2).enumerate() {
        if ((w[1].t_s - w[0].t_s) - period).abs() > 1e-6 * period.max(1.0) {
            return Err(SkinError::field(format!("t_s[{}]", i + 1), "samples must be uniformly spaced"));
        }
    }
    Ok(TimeSeries::new(
        rows[0].t_s,
        period,
        rows.iter().map(|r| ComplexZ::new(r.r_ohm, r.x_ohm)).collect(),
    ))
}

const PLOT_W: f64 = 640.0;
const PLOT_H: f64 = 400.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line plot of one or more named curves; `log_x` plots x on a log10 axis.
pub fn svg_line_plot(title: &str, x_label: &str, y_label: &str, log_x: bool, curves: &[(&str, Vec<(f64, f64)>)]) -> String {
    let tx = |x: f64| if log_x { x.log10() } else { x };
    let pts = curves.iter().flat_map(|c| c.1.iter()).filter(|p| tx(p.0).is_finite() && p.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in pts {
        x0 = x0.min(tx(p.0));
        x1 = x1.max(tx(p.0));
        y0 = y0.min(p.1);
        y1 = y1.max(p.1);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let sx = |x: f64| MARGIN + (tx(x) - x0) / (x1 - x0) * (PLOT_W - 2.0 * MARGIN);
    let sy = |y: f64| PLOT_H - MARGIN - (y - y0) / (y1 - y0) * (PLOT_H - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PLOT_W}" height="{PLOT_H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, PLOT_W / 2.0, esc(title));
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        PLOT_W - 2.0 * MARGIN,
        PLOT_H - 2.0 * MARGIN
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, PLOT_W / 2.0, PLOT_H - 12.0, esc(x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        PLOT_H / 2.0,
        PLOT_H / 2.0,
        esc(y_label)
    );
    let fmt_x = |v: f64| if log_x { format!("{:.3e}", 10f64.powf(v)) } else { format!("{v:.3}") };
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="{}" text-anchor="start">{}</text>"#, PLOT_H - MARGIN + 16.0, fmt_x(x0));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, PLOT_W - MARGIN, PLOT_H - MARGIN + 16.0, fmt_x(x1));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{y0:.3}</text>"#, MARGIN - 4.0, PLOT_H - MARGIN);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{y1:.3}</text>"#, MARGIN - 4.0, MARGIN + 4.0);
    if y0 < 0.0 && y1 > 0.0 {
        let _ = writeln!(
            s,
            r##"<line x1="{MARGIN}" x2="{}" y1="{1}" y2="{1}" stroke="#999" stroke-dasharray="4 3"/>"##,
            PLOT_W - MARGIN,
            sy(0.0)
        );
    }
    for (k, (name, data)) in curves.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let path: Vec<String> = data
            .iter()
            .filter(|p| tx(p.0).is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{colour}">{}</text>"#,
            PLOT_W - MARGIN - 90.0,
            MARGIN + 16.0 * (k as f64 + 1.0),
            esc(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn family_colour(f: Family) -> &'static str {
    match f {
        Family::Red => "#e41a1c",
        Family::Blue => "#377eb8",
        Family::Gradient => "#ff7f00",
        Family::Green => "#4daf4a",
    }
}

/// Skin map: grid coloured by family (if given), channels and electrodes.
pub fn svg_network(network: &Network, families: Option<&[(CellId, Family)]>) -> String {
    let scale = 3.0;
    let (w, h) = (SKIN_WIDTH_MM * scale, SKIN_HEIGHT_MM * scale);
    // Row A at the bottom.
    let px = |p: Point2| (p.x * scale, h - p.y * scale);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="9">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for cell in CellId::all() {
        let r = cell.rectangle();
        let fill = families
            .and_then(|f| f.iter().find(|x| x.0 == cell))
            .map(|x| family_colour(x.1))
            .unwrap_or("none");
        let (x, y) = px(Point2::new(r.x0, r.y1));
        let _ = writeln!(
            s,
            r##"<rect x="{x}" y="{y}" width="{0}" height="{0}" fill="{fill}" fill-opacity="0.35" stroke="#ccc"><title>{cell}</title></rect>"##,
            10.0 * scale
        );
    }
    for e in 0..network.edges.len() {
        let seg = network.edge_segment(e);
        let (x1, y1) = px(seg.a);
        let (x2, y2) = px(seg.b);
        let _ = writeln!(
            s,
            r##"<line x1="{x1:.1}" y1="{y1:.1}" x2="{x2:.1}" y2="{y2:.1}" stroke="#333" stroke-width="{:.1}"/>"##,
            network.channel.width_mm * scale
        );
    }
    for (i, n) in network.nodes.iter().enumerate() {
        let (x, y) = px(n.position);
        let electrode = [
            (network.electrodes.bl, "BL"),
            (network.electrodes.c, "C"),
            (network.electrodes.tr, "TR"),
        ]
        .into_iter()
        .find(|e| e.0 == i);
        let (r, fill) = if electrode.is_some() { (7.0, "#000") } else { (4.0, "#666") };
        let _ = writeln!(s, r#"<circle cx="{x:.1}" cy="{y:.1}" r="{r}" fill="{fill}"/>"#);
        if let Some((_, name)) = electrode {
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="14">{name}</text>"#, x + 9.0, y - 9.0);
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Grid heat-map of localization scores: each scored cell is tinted in its
/// family colour with opacity proportional to the score. `highlight` is
/// outlined.
pub fn svg_score_map(title: &str, family: Family, scores: &[(CellId, f64)], highlight: Option<CellId>) -> String {
    let scale = 3.0;
    let top = 24.0;
    let (w, h) = (SKIN_WIDTH_MM * scale, SKIN_HEIGHT_MM * scale);
    let best = scores.iter().map(|x| x.1).fold(0.0, f64::max);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{}" font-family="sans-serif" font-size="9">"#,
        h + top
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="16" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, esc(title));
    for cell in CellId::all() {
        let r = cell.rectangle();
        let (x, y) = (r.x0 * scale, top + h - r.y1 * scale);
        let score = scores.iter().find(|c| c.0 == cell).map_or(0.0, |c| c.1);
        let opacity = if best > 0.0 { score / best } else { 0.0 };
        let stroke = if highlight == Some(cell) { r#"stroke="black" stroke-width="2""# } else { r##"stroke="#ddd""## };
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="{y}" width="{0}" height="{0}" fill="{1}" fill-opacity="{opacity:.3}" {stroke}><title>{cell} {score:.3}</title></rect>"#,
            10.0 * scale,
            family_colour(family)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::MaterialParams;
    use crate::stimulus::{PerturbCoeffs, Scenario};

    #[test]
    fn score_map_marks_highlight() {
        let c: CellId = "C3".parse().unwrap();
        let svg = svg_score_map("t", Family::Blue, &[(c, 1.0)], Some(c));
        assert!(svg.contains("C3 1.000"));
        assert_eq!(svg.matches("stroke-width=\"2\"").count(), 1);
        assert_eq!(svg.matches("<rect x=").count(), 320);
    }

    #[test]
    fn default_network_round_trips() {
        let net = default_network();
        assert_eq!(net.nodes.len(), 17);
        let text = network_to_json(&net).unwrap();
        assert_eq!(network_from_json(&text).unwrap(), net);
        assert_eq!(text, DEFAULT_NETWORK_JSON);
    }

    #[test]
    fn tampered_network_rejected() {
        let text = network_to_json(&default_network()).unwrap();
        let mut v: Value = serde_json::from_str(&text).unwrap();
        v["edges"].as_array_mut().unwrap().pop();
        assert!(matches!(
            network_from_json(&v.to_string()),
            Err(SkinError::InvalidField { field, .. }) if field == "edges"
        ));

        let mut v: Value = serde_json::from_str(&text).unwrap();
        v["extra"] = Value::from(1);
        assert!(matches!(network_from_json(&v.to_string()), Err(SkinError::Json(_))));

        let mut v: Value = serde_json::from_str(&text).unwrap();
        v["schemaVersion"] = Value::from(2);
        assert!(matches!(
            network_from_json(&v.to_string()),
            Err(SkinError::InvalidField { field, .. }) if field == "schemaVersion"
        ));

        let mut v: Value = serde_json::from_str(&text).unwrap();
        v["nodes"][3]["label"] = Value::from("P20");
        assert!(network_from_json(&v.to_string()).is_err());

        let mut v: Value = serde_json::from_str(&text).unwrap();
        v["electrodes"]["C"] = Value::from(99);
        assert!(network_from_json(&v.to_string()).is_err());
    }

    #[test]
    fn parameter_documents_round_trip() {
        let s = Scenario::default();
        assert_eq!(from_versioned_json::<Scenario>(&to_versioned_json(&s).unwrap()).unwrap(), s);
        let c = PerturbCoeffs::default();
        assert_eq!(from_versioned_json::<PerturbCoeffs>(&to_versioned_json(&c).unwrap()).unwrap(), c);
        let m = MaterialParams::default();
        assert_eq!(from_versioned_json::<MaterialParams>(&to_versioned_json(&m).unwrap()).unwrap(), m);
        assert!(from_versioned_json::<PerturbCoeffs>(r#"{"spreadMm": 1}"#).is_err());
        assert!(from_versioned_json::<PerturbCoeffs>(r#"[1]"#).is_err());
    }

    #[test]
    fn series_csv_round_trip() {
        let series = TimeSeries::new(
            0.0,
            0.25,
            (0..8).map(|i| ComplexZ::new(40.0 + i as f64 * 0.1, 6.5 - i as f64 * 0.01)).collect(),
        );
        let mut buf = Vec::new();
        write_series_csv(&mut buf, &series).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t_s,R_ohm,X_ohm\n"));
        let back = read_series_csv(buf.as_slice()).unwrap();
        assert_eq!(back.samples, series.samples);
        assert!((back.sample_period_s - 0.25).abs() < 1e-12);
    }

    #[test]
    fn uneven_series_rejected() {
        let text = "t_s,R_ohm,X_ohm\n0,1,1\n1,1,1\n3,1,1\n";
        assert!(read_series_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn sweep_and_iv_headers() {
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &[(100.0, ComplexZ::new(1.0, -1.0))]).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("freq_hz,R_ohm,X_ohm,Zmod_ohm,Zphase_deg\n"));
        let mut buf = Vec::new();
        write_iv_csv(&mut buf, &[(0.1, 0.001)]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "v_volt,i_amp\n0.1,0.001\n");
    }

    #[test]
    fn svg_outputs_are_well_formed() {
        let plot = svg_line_plot("Z", "f [Hz]", "X [ohm]", true, &[("X", vec![(10.0, -1.0), (1e6, 2.0)])]);
        assert!(plot.starts_with("<svg") && plot.trim_end().ends_with("</svg>"));
        let map = svg_network(&default_network(), None);
        assert_eq!(map.matches("<line").count(), default_network().edges.len());
    }
}
