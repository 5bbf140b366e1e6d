use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{HarnessError, ReportRow, ReportTable};
use crate::dynamics::Timing;

const HEADER: [&str; 6] = [
    "timing",
    "swept_value",
    "mean_influence",
    "std_dev",
    "replication_count",
    "nonconverged",
];

/// 17 significant digits in scientific notation; parses back bit-exact.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: Write>(table: &ReportTable, out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for row in &table.rows {
        w.write_record([
            row.timing.to_string(),
            num(row.value),
            num(row.mean),
            num(row.std_dev),
            row.replications.to_string(),
            row.nonconverged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(table: &ReportTable, path: &Path) -> Result<(), HarnessError> {
    write_csv(table, BufWriter::new(File::create(path)?))
}

/// Reads rows back from [`write_csv`] output.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<ReportRow>, HarnessError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(HarnessError::Parse(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record?;
        let field = |i: usize| record.get(i).unwrap_or_default();
        let float = |i: usize| {
            field(i)
                .parse::<f64>()
                .map_err(|e| HarnessError::Parse(format!("{:?}: {e}", field(i))))
        };
        let count = |i: usize| {
            field(i)
                .parse::<usize>()
                .map_err(|e| HarnessError::Parse(format!("{:?}: {e}", field(i))))
        };
        rows.push(ReportRow {
            timing: field(0).parse().map_err(HarnessError::Parse)?,
            value: float(1)?,
            mean: float(2)?,
            std_dev: float(3)?,
            replications: count(4)?,
            nonconverged: count(5)?,
        });
    }
    Ok(rows)
}

/// Sweep provenance as `key = value` lines.
pub fn write_provenance<W: Write>(table: &ReportTable, mut out: W) -> Result<(), HarnessError> {
    writeln!(out, "factor = {}", table.factor)?;
    writeln!(out, "config_hash = {}", table.config_hash)?;
    writeln!(out, "base_seed = {}", table.base_seed)?;
    writeln!(out, "replications = {}", table.replications)?;
    writeln!(out, "network_seed = derive_seed(base_seed, [replication])")?;
    writeln!(
        out,
        "schedule_seed = derive_seed(base_seed, [replication, 2, value_index])"
    )?;
    Ok(())
}

fn present_series(table: &ReportTable) -> Vec<(Timing, Vec<&ReportRow>)> {
    Timing::ALL
        .iter()
        .map(|&t| (t, table.series(t)))
        .filter(|(_, rows)| !rows.is_empty())
        .collect()
}

/// One whitespace-separated block per timing option (consensus, start,
/// uniform), separated by two blank lines so gnuplot sees them as indices.
pub fn write_plot_data<W: Write>(table: &ReportTable, mut out: W) -> Result<(), HarnessError> {
    writeln!(out, "# factor: {}", table.factor)?;
    for (idx, (timing, rows)) in present_series(table).into_iter().enumerate() {
        if idx > 0 {
            writeln!(out)?;
            writeln!(out)?;
        }
        writeln!(out, "# series: {timing}")?;
        writeln!(out, "# swept_value mean std_dev")?;
        for row in rows {
            writeln!(
                out,
                "{} {} {}",
                num(row.value),
                num(row.mean),
                num(row.std_dev)
            )?;
        }
    }
    Ok(())
}

pub fn emit_plot_data(table: &ReportTable, path: &Path) -> Result<(), HarnessError> {
    write_plot_data(table, BufWriter::new(File::create(path)?))
}

fn colour(t: Timing) -> &'static str {
    match t {
        Timing::Consensus => "#1f77b4",
        Timing::Start => "#d62728",
        Timing::Uniform => "#2ca02c",
    }
}

/// Line chart of mean influence against the swept value, y fixed to [0, 1].
pub fn write_svg<W: Write>(table: &ReportTable, mut out: W) -> Result<(), HarnessError> {
    let (w, h, pad) = (640.0, 400.0, 50.0);
    let values = table.values();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let x = |v: f64| pad + (v - lo) / span * (w - 2.0 * pad);
    let y = |v: f64| h - pad - v.clamp(0.0, 1.0) * (h - 2.0 * pad);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(
        svg,
        "<title>Average social influence vs {}</title>",
        table.factor
    );
    let _ = writeln!(
        svg,
        "<desc>config {} base_seed {} replications {}</desc>",
        table.config_hash, table.base_seed, table.replications
    );
    let _ = writeln!(
        svg,
        r#"<g stroke="black" fill="none"><line x1="{pad}" y1="{0}" x2="{1}" y2="{0}"/><line x1="{pad}" y1="{pad}" x2="{pad}" y2="{0}"/></g>"#,
        h - pad,
        w - pad
    );
    for tick in 0..=5 {
        let v = f64::from(tick) / 5.0;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{v:.1}</text>"#,
            pad - 5.0,
            y(v) + 3.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{}</text>"#,
        w / 2.0,
        h - 10.0,
        table.factor
    );
    let _ = writeln!(
        svg,
        r#"<text x="{pad}" y="{}" font-size="10">{lo}</text><text x="{}" y="{}" font-size="10" text-anchor="end">{hi}</text>"#,
        h - pad + 15.0,
        w - pad,
        h - pad + 15.0
    );
    for (idx, (timing, rows)) in present_series(table).into_iter().enumerate() {
        let points: Vec<String> = rows
            .iter()
            .filter(|r| r.mean.is_finite())
            .map(|r| format!("{:.2},{:.2}", x(r.value), y(r.mean)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"><title>{timing}</title></polyline>"#,
            colour(timing),
            points.join(" ")
        );
        let ly = pad + 15.0 * idx as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{ly}" font-size="11" fill="{}">{timing}</text>"#,
            w - pad - 70.0,
            colour(timing)
        );
    }
    svg.push_str("</svg>\n");
    out.write_all(svg.as_bytes())?;
    Ok(())
}

pub fn emit_svg(table: &ReportTable, path: &Path) -> Result<(), HarnessError> {
    write_svg(table, BufWriter::new(File::create(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::Factor;
    use proptest::prelude::*;

    fn table(rows: Vec<ReportRow>) -> ReportTable {
        ReportTable {
            factor: Factor::Coverage,
            rows,
            config_hash: "abc".into(),
            base_seed: 3,
            replications: 4,
        }
    }

    fn row(timing: Timing, value: f64, mean: f64) -> ReportRow {
        ReportRow {
            timing,
            value,
            mean,
            std_dev: 0.01,
            replications: 4,
            nonconverged: 0,
        }
    }

    #[test]
    fn empty_table_is_header_only() {
        let mut buf = Vec::new();
        write_csv(&table(vec![]), &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "timing,swept_value,mean_influence,std_dev,replication_count,nonconverged\n"
        );
    }

    #[test]
    fn decimal_format() {
        let mut buf = Vec::new();
        write_csv(&table(vec![row(Timing::Start, 0.1, 0.5)]), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let line = text.lines().nth(1).unwrap();
        assert_eq!(
            line,
            "start,1.0000000000000001e-1,5.0000000000000000e-1,1.0000000000000000e-2,4,0"
        );
    }

    proptest! {
        #[test]
        fn csv_round_trips(
            cells in proptest::collection::vec(
                (0usize..3, -1e3f64..1e3, 0f64..1.0, 0f64..1.0, 0usize..5000, 0usize..50),
                0..20,
            )
        ) {
            let rows: Vec<ReportRow> = cells
                .into_iter()
                .map(|(t, value, mean, std_dev, replications, nonconverged)| ReportRow {
                    timing: Timing::ALL[t],
                    value,
                    mean,
                    std_dev,
                    replications,
                    nonconverged,
                })
                .collect();
            let t = table(rows);
            let mut buf = Vec::new();
            write_csv(&t, &mut buf).unwrap();
            prop_assert_eq!(read_csv(buf.as_slice()).unwrap(), t.rows);
        }
    }

    #[test]
    fn plot_series_order_and_labels() {
        let t = table(vec![
            row(Timing::Uniform, 0.0, 0.1),
            row(Timing::Start, 0.0, 0.2),
            row(Timing::Consensus, 0.0, 0.3),
        ]);
        let mut buf = Vec::new();
        write_plot_data(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let labels: Vec<&str> = text
            .lines()
            .filter(|l| l.starts_with("# series:"))
            .collect();
        assert_eq!(
            labels,
            [
                "# series: consensus",
                "# series: start",
                "# series: uniform"
            ]
        );
        let data: Vec<&str> = text
            .lines()
            .filter(|l| !l.starts_with('#') && !l.is_empty())
            .collect();
        assert_eq!(data.len(), 3);
    }

    #[test]
    fn single_point_series() {
        let t = table(vec![row(Timing::Start, 0.4, 0.2)]);
        let mut buf = Vec::new();
        write_plot_data(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1);

        let mut svg = Vec::new();
        write_svg(&t, &mut svg).unwrap();
        let svg = String::from_utf8(svg).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("<title>start</title>"));
    }

    #[test]
    fn provenance_lines() {
        let mut buf = Vec::new();
        write_provenance(&table(vec![]), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("config_hash = abc\n"));
        assert!(text.contains("base_seed = 3\n"));
    }
}
