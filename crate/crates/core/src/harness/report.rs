use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{Experiment, ExperimentConfig};
use crate::error::Result;

pub const SCHEMA_VERSION: u32 = 1;
pub const CSV_HEADER: &str = "suite,config_hash,seed,resolution,parameters,quantity,value,tolerance,verdict";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowVerdict {
    Pass,
    Fail,
    Inconclusive,
}

impl RowVerdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            RowVerdict::Pass
        } else {
            RowVerdict::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RowVerdict::Pass => "pass",
            RowVerdict::Fail => "fail",
            RowVerdict::Inconclusive => "inconclusive",
        }
    }
}

/// One measured quantity. `parameters` is a `key=value;…` list.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub suite: String,
    pub config_hash: String,
    pub seed: u64,
    pub resolution: usize,
    pub parameters: String,
    pub quantity: String,
    pub value: f64,
    pub tolerance: Option<f64>,
    pub verdict: RowVerdict,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub inconclusive: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub suite: String,
    pub config_hash: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub rows: Vec<ReportRow>,
    pub summary: Summary,
}

impl Report {
    pub(super) fn new(exp: &Experiment, rows: Vec<ReportRow>) -> Self {
        let mut summary = Summary::default();
        for r in &rows {
            match r.verdict {
                RowVerdict::Pass => summary.pass += 1,
                RowVerdict::Fail => summary.fail += 1,
                RowVerdict::Inconclusive => summary.inconclusive += 1,
            }
        }
        Self {
            schema_version: SCHEMA_VERSION,
            suite: exp.suite.name().into(),
            config_hash: exp.hash(),
            seed: exp.seed,
            config: exp.to_config(),
            rows,
            summary,
        }
    }

    pub fn any_failed(&self) -> bool {
        self.summary.fail > 0
    }

    /// Rows whose quantity matches `quantity`.
    pub fn find<'a>(&'a self, quantity: &'a str) -> impl Iterator<Item = &'a ReportRow> + 'a {
        self.rows.iter().filter(move |r| r.quantity == quantity)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(CSV_HEADER.split(',')).expect("in-memory write");
        for r in &self.rows {
            let seed = r.seed.to_string();
            let resolution = r.resolution.to_string();
            let value = format_number(r.value);
            let tol = r.tolerance.map(format_number).unwrap_or_default();
            w.write_record([
                r.suite.as_str(),
                &r.config_hash,
                &seed,
                &resolution,
                &r.parameters,
                &r.quantity,
                &value,
                &tol,
                r.verdict.as_str(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Line chart of each `(parameters, quantity)` series over resolutions,
    /// normalized by its first value. Series with fewer than two points or a
    /// zero first value are skipped.
    pub fn to_svg(&self) -> String {
        let mut series: BTreeMap<(String, String), Vec<(usize, f64)>> = BTreeMap::new();
        for r in &self.rows {
            series
                .entry((r.parameters.clone(), r.quantity.clone()))
                .or_default()
                .push((r.resolution, r.value));
        }
        let series: Vec<_> = series
            .into_iter()
            .filter_map(|(key, mut pts)| {
                pts.sort_by_key(|p| p.0);
                pts.dedup_by_key(|p| p.0);
                let first = pts.first()?.1;
                if pts.len() < 2 || first == 0.0 || !first.is_finite() || pts.iter().any(|p| p.0 == 0) {
                    return None;
                }
                let rel: Vec<(f64, f64)> = pts.iter().map(|&(n, v)| ((n as f64).log2(), v / first)).collect();
                rel.iter().all(|p| p.1.is_finite()).then_some((key, rel))
            })
            .collect();
        let (w, h, pad) = (640.0, 400.0, 50.0);
        let mut out = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
             <text x=\"{pad}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">{} (value / first value vs log2 N)</text>\n",
            xml(&self.suite)
        );
        if series.is_empty() {
            out.push_str("<text x=\"50\" y=\"200\" font-family=\"sans-serif\" font-size=\"12\">no resolution trend</text>\n</svg>\n");
            return out;
        }
        let pts = series.iter().flat_map(|(_, p)| p.iter());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if x1 - x0 < 1e-12 {
            x1 = x0 + 1.0;
        }
        if y1 - y0 < 1e-12 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
        let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
        let _ = writeln!(
            out,
            "<line x1=\"{pad}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
             <line x1=\"{pad}\" y1=\"{pad}\" x2=\"{pad}\" y2=\"{b}\" stroke=\"black\"/>\n\
             <text x=\"4\" y=\"{top}\" font-family=\"sans-serif\" font-size=\"10\">{y1:.3}</text>\n\
             <text x=\"4\" y=\"{b}\" font-family=\"sans-serif\" font-size=\"10\">{y0:.3}</text>",
            b = h - pad,
            r = w - pad,
            top = pad + 4.0,
        );
        const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
        for (i, ((params, quantity), p)) in series.iter().enumerate() {
            let path: Vec<String> = p.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(
                out,
                "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"><title>{} {}</title></polyline>",
                COLORS[i % COLORS.len()],
                path.join(" "),
                xml(params),
                xml(quantity)
            );
        }
        out.push_str("</svg>\n");
        out
    }

    /// Writes `rows.csv`, `report.json` and `trend.svg` into `dir`, each via
    /// a temporary file and a rename.
    pub fn write_all(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        atomic_write(&dir.join("rows.csv"), self.to_csv().as_bytes())?;
        atomic_write(&dir.join("report.json"), self.to_json().as_bytes())?;
        atomic_write(&dir.join("trend.svg"), self.to_svg().as_bytes())?;
        Ok(())
    }
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn format_number(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:e}")
    }
}

fn xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::Suite;

    fn row(n: usize, v: f64, verdict: RowVerdict) -> ReportRow {
        ReportRow {
            suite: "sewing".into(),
            config_hash: "abc".into(),
            seed: 1,
            resolution: n,
            parameters: "bundle=trivial;s=0.5".into(),
            quantity: "q".into(),
            value: v,
            tolerance: Some(0.1),
            verdict,
        }
    }

    #[test]
    fn csv_and_summary() {
        let exp = Suite::Sewing.defaults();
        let rep = Report::new(&exp, vec![row(16, 1.0, RowVerdict::Pass), row(32, 1.5, RowVerdict::Fail)]);
        assert!(rep.any_failed());
        assert_eq!(rep.summary, Summary { pass: 1, fail: 1, inconclusive: 0 });
        let csv = rep.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 3);
        assert!(lines[2].ends_with(",1.5e0,1e-1,fail"));
        let mut quoted = rep.clone();
        quoted.rows[0].parameters = "a,b".into();
        assert!(quoted.to_csv().contains(",\"a,b\","));
        let svg = rep.to_svg();
        assert!(svg.contains("<polyline") && svg.ends_with("</svg>\n"));
        let json: serde_json::Value = serde_json::from_str(&rep.to_json()).unwrap();
        assert_eq!(json["rows"][1]["verdict"], "fail");
        assert_eq!(json["summary"]["fail"], 1);
    }
}
