//! CSV and SVG emitters for fits and summaries, and the draws file reader.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use crate::diagnostics::{CovariateCell, Draws, PosteriorSummary, SpearmanMatrix, TrajectoryBand};
use crate::engine::ChainOutput;
use crate::error::{Error, Result};

const NA: &str = "NA";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), |x| x.to_string())
}

fn flush<W: Write>(w: csv::Writer<W>) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::io("<csv writer>", e.into_error()))?
        .flush()
        .map_err(|e| Error::io("<csv writer>", e))
}

/// Long-format draws: `chain,draw,parameter,value`.
pub fn write_draws_csv<W: Write>(chain: &ChainOutput, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["chain", "draw", "parameter", "value"])?;
    let c = chain.chain.to_string();
    for (s, draw) in chain.draws.iter().enumerate() {
        let s = s.to_string();
        for (name, v) in chain.layout.names.iter().zip(draw) {
            w.write_record([c.as_str(), s.as_str(), name.as_str(), v.to_string().as_str()])?;
        }
    }
    flush(w)
}

/// Reads one or more long-format draws files back into per-chain tables.
/// Parameters keep the order of first appearance.
pub fn read_draws_csv<R: Read>(readers: Vec<R>) -> Result<Draws> {
    let mut names: Vec<String> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    let mut cells: BTreeMap<(usize, usize), Vec<(usize, f64)>> = BTreeMap::new();
    for r in readers {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers()?.clone();
        if header.iter().collect::<Vec<_>>() != ["chain", "draw", "parameter", "value"] {
            return Err(Error::validation("draws file header must be chain,draw,parameter,value"));
        }
        for rec in rdr.records() {
            let rec = rec?;
            let row = rec.position().map_or(0, |p| p.line());
            let parse_err = |m: &str| Error::Parse {
                row,
                message: m.to_string(),
            };
            let chain: usize = rec[0].parse().map_err(|_| parse_err("bad chain index"))?;
            let draw: usize = rec[1].parse().map_err(|_| parse_err("bad draw index"))?;
            let value: f64 = rec[3].parse().map_err(|_| parse_err("bad value"))?;
            let name = rec[2].to_string();
            let p = match index.get(&name) {
                Some(&p) => p,
                None => {
                    names.push(name.clone());
                    index.insert(name, names.len() - 1);
                    names.len() - 1
                }
            };
            cells.entry((chain, draw)).or_default().push((p, value));
        }
    }
    let mut chains: BTreeMap<usize, Vec<Vec<f64>>> = BTreeMap::new();
    for ((chain, draw), vals) in cells {
        let mut row = vec![f64::NAN; names.len()];
        for (p, v) in vals {
            row[p] = v;
        }
        if row.iter().any(|v| v.is_nan()) {
            return Err(Error::validation(format!("chain {chain} draw {draw} lacks some parameters")));
        }
        let c = chains.entry(chain).or_default();
        if c.len() != draw {
            return Err(Error::validation(format!("chain {chain} draws are not numbered consecutively")));
        }
        c.push(row);
    }
    if chains.is_empty() {
        return Err(Error::validation("draws files hold no draws"));
    }
    Ok(Draws {
        names,
        chains: chains.into_values().collect(),
    })
}

pub fn write_summary_csv<W: Write>(rows: &[PosteriorSummary], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["parameter", "mean", "sd", "hpd_lo", "hpd_hi", "ess", "rhat"])?;
    for r in rows {
        w.write_record([
            r.parameter.clone(),
            r.mean.to_string(),
            r.sd.to_string(),
            r.hpd_lo.to_string(),
            r.hpd_hi.to_string(),
            r.ess.to_string(),
            opt(r.rhat),
        ])?;
    }
    flush(w)
}

/// Reads a `summary.csv` back.
pub fn read_summary_csv<R: Read>(reader: R) -> Result<Vec<PosteriorSummary>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec.position().map_or(0, |p| p.line());
        let num = |i: usize| -> Result<f64> {
            rec[i].parse().map_err(|_| Error::Parse {
                row,
                message: format!("bad number {:?}", &rec[i]),
            })
        };
        out.push(PosteriorSummary {
            parameter: rec[0].to_string(),
            mean: num(1)?,
            sd: num(2)?,
            hpd_lo: num(3)?,
            hpd_hi: num(4)?,
            ess: num(5)?,
            rhat: if &rec[6] == NA { None } else { Some(num(6)?) },
        });
    }
    Ok(out)
}

pub fn write_trajectory_csv<W: Write>(band: &TrajectoryBand, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["age", "mean", "hpd_lo", "hpd_hi"])?;
    for i in 0..band.ages.len() {
        w.write_record([
            band.ages[i].to_string(),
            band.mean[i].to_string(),
            band.lower[i].to_string(),
            band.upper[i].to_string(),
        ])?;
    }
    flush(w)
}

pub fn write_covariates_csv<W: Write>(cells: &[CovariateCell], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["outcome", "term", "mean", "hpd_lo", "hpd_hi", "hpd_excludes_zero"])?;
    for c in cells {
        w.write_record([
            c.outcome.clone(),
            c.term.clone(),
            c.mean.to_string(),
            c.hpd_lo.to_string(),
            c.hpd_hi.to_string(),
            c.hpd_excludes_zero.to_string(),
        ])?;
    }
    flush(w)
}

/// Square matrix with a leading label column; unavailable entries are `NA`.
pub fn write_spearman_csv<W: Write>(m: &SpearmanMatrix, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![String::new()];
    header.extend(m.labels.iter().cloned());
    w.write_record(&header)?;
    for (l, row) in m.labels.iter().zip(&m.values) {
        let mut rec = vec![l.clone()];
        rec.extend(row.iter().map(|v| opt(*v)));
        w.write_record(&rec)?;
    }
    flush(w)
}

/// Static SVG of a trajectory band: the HPD region filled, the mean as a
/// line, with labelled axes.
pub fn trajectory_svg(band: &TrajectoryBand, title: &str) -> String {
    let (w, h) = (640.0, 420.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 40.0, 50.0);
    let x0 = band.ages.first().copied().unwrap_or(0.0);
    let x1 = band.ages.last().copied().unwrap_or(1.0);
    let ymin = band.lower.iter().copied().fold(f64::INFINITY, f64::min);
    let ymax = band.upper.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = if ymax > ymin { 0.05 * (ymax - ymin) } else { 1.0 };
    let (y0, y1) = (ymin - pad, ymax + pad);
    let sx = |x: f64| ml + (x - x0) / (x1 - x0).max(f64::MIN_POSITIVE) * (w - ml - mr);
    let sy = |y: f64| h - mb - (y - y0) / (y1 - y0) * (h - mt - mb);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        w / 2.0,
        escape(title)
    );
    let mut poly = String::new();
    for (a, u) in band.ages.iter().zip(&band.upper) {
        let _ = write!(poly, "{:.2},{:.2} ", sx(*a), sy(*u));
    }
    for (a, l) in band.ages.iter().zip(&band.lower).rev() {
        let _ = write!(poly, "{:.2},{:.2} ", sx(*a), sy(*l));
    }
    let _ = writeln!(
        s,
        r#"<polygon points="{}" fill="steelblue" fill-opacity="0.3" stroke="none"/>"#,
        poly.trim_end()
    );
    let line: Vec<String> = band
        .ages
        .iter()
        .zip(&band.mean)
        .map(|(a, m)| format!("{:.2},{:.2}", sx(*a), sy(*m)))
        .collect();
    let _ = writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="navy" stroke-width="2"/>"#,
        line.join(" ")
    );
    let _ = writeln!(
        s,
        r#"<line x1="{ml}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{ml}" y1="{mt}" x2="{ml}" y2="{b}" stroke="black"/>"#,
        b = h - mb,
        r = w - mr
    );
    let mut age = x0.ceil();
    while age <= x1 + 1e-9 {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{age}</text>"#,
            sx(age),
            h - mb + 16.0
        );
        age += 1.0;
    }
    for i in 0..=4 {
        let v = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            ml - 6.0,
            sy(v) + 4.0,
            format_tick(v)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">age (years)</text>"#,
        (ml + w - mr) / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {})">latent facet {}</text>"#,
        (mt + h - mb) / 2.0,
        (mt + h - mb) / 2.0,
        band.facet
    );
    s.push_str("</svg>\n");
    s
}

fn format_tick(v: f64) -> String {
    if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else if v.abs() >= 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_round_trip() {
        let rows = vec![PosteriorSummary {
            parameter: "alpha.y1".into(),
            mean: 1.5,
            sd: 0.25,
            hpd_lo: 1.0,
            hpd_hi: 2.0,
            ess: 812.5,
            rhat: None,
        }];
        let mut buf = Vec::new();
        write_summary_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("parameter,mean,sd,hpd_lo,hpd_hi,ess,rhat\n"));
        assert!(text.contains("NA"));
        assert_eq!(read_summary_csv(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn svg_is_well_formed() {
        let band = TrajectoryBand {
            facet: 1,
            ages: vec![10.0, 10.5, 11.0],
            mean: vec![1.0, 2.0, 3.0],
            lower: vec![0.5, 1.5, 2.5],
            upper: vec![1.5, 2.5, 3.5],
        };
        let s = trajectory_svg(&band, "facet <1>");
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert!(s.contains("facet &lt;1&gt;"));
        assert!(s.contains("<polygon"));
    }
}
