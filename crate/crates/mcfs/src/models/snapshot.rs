//! Profile snapshots: `z,r,w1,..` rows written with 17 significant digits so
//! they read back bit-exactly. A leading `#` line records the dimension and
//! end conditions.

use std::fmt::Write as _;
use std::path::Path;

use super::{EndCondition, ModelError, SymmetricAnsatz};

pub fn to_string(a: &SymmetricAnsatz) -> String {
    let mut out = String::new();
    let end = |e: EndCondition| format!("{e:?}");
    writeln!(
        out,
        "# n={} ends={},{}",
        a.dim_n,
        end(a.ends[0]),
        end(a.ends[1])
    )
    .unwrap();
    let mut header = vec!["z".to_string(), "r".to_string()];
    header.extend((1..a.codim_m).map(|k| format!("w{k}")));
    writeln!(out, "{}", header.join(",")).unwrap();
    for k in 0..a.len() {
        let mut row = vec![fmt17(a.z_nodes[k]), fmt17(a.radius[k])];
        row.extend(a.offsets[k].iter().map(|&w| fmt17(w)));
        writeln!(out, "{}", row.join(",")).unwrap();
    }
    out
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_end(s: &str) -> Result<EndCondition, ModelError> {
    match s.trim() {
        "Capped" => Ok(EndCondition::Capped),
        "Open" => Ok(EndCondition::Open),
        "Periodic" => Ok(EndCondition::Periodic),
        other => Err(ModelError::InvalidProfile(format!(
            "unknown end condition {other:?}"
        ))),
    }
}

pub fn from_str(text: &str) -> Result<SymmetricAnsatz, ModelError> {
    let mut n = None;
    let mut ends = None;
    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            for field in meta.split_whitespace() {
                if let Some(v) = field.strip_prefix("n=") {
                    n = Some(v.parse::<usize>().map_err(|e| {
                        ModelError::InvalidProfile(format!("line {}: {e}", lineno + 1))
                    })?);
                } else if let Some(v) = field.strip_prefix("ends=") {
                    let parts: Vec<&str> = v.split(',').collect();
                    if parts.len() != 2 {
                        return Err(ModelError::InvalidProfile(format!(
                            "line {}: ends needs two values",
                            lineno + 1
                        )));
                    }
                    ends = Some([parse_end(parts[0])?, parse_end(parts[1])?]);
                }
            }
            continue;
        }
        if header.is_none() {
            let h: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
            if h.len() < 2 || h[0] != "z" || h[1] != "r" {
                return Err(ModelError::InvalidProfile(format!(
                    "line {}: header must start with z,r",
                    lineno + 1
                )));
            }
            header = Some(h);
            continue;
        }
        let width = header.as_ref().map(|h| h.len()).unwrap_or(0);
        let vals: Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let vals =
            vals.map_err(|e| ModelError::InvalidProfile(format!("line {}: {e}", lineno + 1)))?;
        if vals.len() != width {
            return Err(ModelError::InvalidProfile(format!(
                "line {}: expected {width} columns",
                lineno + 1
            )));
        }
        rows.push(vals);
    }
    let header = header.ok_or_else(|| ModelError::InvalidProfile("missing header".into()))?;
    let n = n.ok_or_else(|| ModelError::InvalidProfile("missing dimension line".into()))?;
    let ends = ends.ok_or_else(|| ModelError::InvalidProfile("missing end conditions".into()))?;
    let m = header.len() - 1;
    SymmetricAnsatz::new(
        n,
        m,
        rows.iter().map(|r| r[0]).collect(),
        rows.iter().map(|r| r[1]).collect(),
        rows.iter().map(|r| r[2..].to_vec()).collect(),
        ends,
    )
}

pub fn write(path: &Path, a: &SymmetricAnsatz) -> std::io::Result<()> {
    std::fs::write(path, to_string(a))
}

pub fn read(path: &Path) -> Result<SymmetricAnsatz, ModelError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ModelError::InvalidProfile(format!("{}: {e}", path.display())))?;
    from_str(&text)
}
