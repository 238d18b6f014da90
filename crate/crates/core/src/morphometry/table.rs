//! D_-style per-cell feature table.

use std::io::Write;

use super::CellMorphology;

pub const MORPH_HEADER: [&str; 12] = [
    "cell_id",
    "centroid_x_um",
    "centroid_y_um",
    "centroid_z_um",
    "cell_volume_um3",
    "territory_volume_um3",
    "ramification_index",
    "n_endpoints",
    "n_branchpoints",
    "branch_len_avg_um",
    "branch_len_max_um",
    "branch_len_min_um",
];

/// Format with 6 significant digits, `%g` style: fixed notation for
/// exponents in [-4, 6), scientific otherwise, trailing zeros trimmed.
pub fn format_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{:.5e}", v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, v))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!(
            "{}e{}{:02}",
            trim_zeros(mantissa.to_string()),
            sign,
            exp.abs()
        )
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(format_sig).unwrap_or_default()
}

/// Write rows under the fixed header. Each `provenance` line is emitted
/// first, prefixed with `# `.
pub fn write_morph_table<W: Write>(
    rows: &[CellMorphology],
    provenance: &[String],
    mut out: W,
) -> std::io::Result<()> {
    for line in provenance {
        writeln!(out, "# {line}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MORPH_HEADER)?;
    for r in rows {
        w.write_record([
            r.cell_id.to_string(),
            format_sig(r.centroid_x_um),
            format_sig(r.centroid_y_um),
            format_sig(r.centroid_z_um),
            format_sig(r.cell_volume_um3),
            format_sig(r.territory_volume_um3),
            format_sig(r.ramification_index),
            r.n_endpoints.to_string(),
            r.n_branchpoints.to_string(),
            opt(r.branch_len_avg_um),
            opt(r.branch_len_max_um),
            opt(r.branch_len_min_um),
        ])?;
    }
    w.flush()
}
