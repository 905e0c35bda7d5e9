//! File emission: CSV with a `#` header block, JSON reports, SVG
//! figures. Floats are printed with 17 significant digits so re-running
//! a config reproduces files byte for byte.

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use std::io::Write;
use std::path::{Path, PathBuf};

/// 17 significant digits: round-trips f64 exactly.
pub fn fnum(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.output_dir.join(name)
}

/// Writes a CSV file: one `# key = value` line per resolved config
/// entry (plus any `extra` pairs), then the column header, then rows.
pub fn write_csv(
    cfg: &RunConfig,
    name: &str,
    extra: &[(String, String)],
    columns: &[&str],
    rows: &[Vec<String>],
) -> CliResult<PathBuf> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    let path = out_path(cfg, name);
    let mut buf = String::new();
    for (k, v) in cfg.header_pairs().iter().chain(extra) {
        buf.push_str(&format!("# {k} = {v}\n"));
    }
    buf.push_str(&columns.join(","));
    buf.push('\n');
    for row in rows {
        if row.len() != columns.len() {
            return Err(CliError::Runtime(format!(
                "{name}: row with {} fields, expected {}",
                row.len(),
                columns.len()
            )));
        }
        buf.push_str(&row.join(","));
        buf.push('\n');
    }
    std::fs::write(&path, buf)?;
    Ok(path)
}

/// Writes a JSON report with the resolved config embedded under
/// "config".
pub fn write_json(
    cfg: &RunConfig,
    name: &str,
    mut body: serde_json::Map<String, serde_json::Value>,
) -> CliResult<PathBuf> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    let path = out_path(cfg, name);
    body.insert("config".into(), cfg.as_json());
    let text = serde_json::to_string_pretty(&serde_json::Value::Object(body))
        .map_err(|e| CliError::Runtime(format!("json: {e}")))?;
    let mut f = std::fs::File::create(&path)?;
    f.write_all(text.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(path)
}

/// A CSV file read back: named columns over f64 cells. Figure builders
/// consume this, never live model state, so every plot is reproducible
/// from the shipped data alone.
#[derive(Debug, Clone)]
pub struct CsvData {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvData {
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut columns = Vec::new();
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.starts_with('#') || line.is_empty() {
                continue;
            }
            if columns.is_empty() {
                columns = line.split(',').map(str::to_owned).collect();
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|cell| {
                    cell.parse::<f64>().map_err(|e| {
                        CliError::Runtime(format!(
                            "{}:{}: bad number '{cell}': {e}",
                            path.display(),
                            lineno + 1
                        ))
                    })
                })
                .collect::<CliResult<_>>()?;
            if row.len() != columns.len() {
                return Err(CliError::Runtime(format!(
                    "{}:{}: {} fields, expected {}",
                    path.display(),
                    lineno + 1,
                    row.len(),
                    columns.len()
                )));
            }
            rows.push(row);
        }
        if columns.is_empty() {
            return Err(CliError::Runtime(format!(
                "{}: no header line",
                path.display()
            )));
        }
        Ok(CsvData { columns, rows })
    }

    pub fn col(&self, name: &str) -> CliResult<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| CliError::Runtime(format!("missing column '{name}'")))
    }
}

/// Writes an SVG document; the `#` config block rides along as an XML
/// comment so figures are self-describing like the CSVs.
pub fn write_svg(cfg: &RunConfig, name: &str, body: &str, size: (u32, u32)) -> CliResult<PathBuf> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    let path = out_path(cfg, name);
    let (w, h) = size;
    let mut buf = String::new();
    buf.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\">\n"
    ));
    buf.push_str("<!--\n");
    for (k, v) in cfg.header_pairs() {
        buf.push_str(&format!("  {k} = {v}\n"));
    }
    buf.push_str("-->\n");
    buf.push_str(body);
    buf.push_str("</svg>\n");
    std::fs::write(&path, buf)?;
    Ok(path)
}
