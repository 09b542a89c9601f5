//! Atomic file output: every artifact is written to a temporary file in the
//! target directory and renamed into place.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use jumplab::solver::DiscreteSolution;
use jumplab::Result;
use serde::Serialize;

pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp: PathBuf = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// One JSON document per line, floats in the fixed 17-digit encoding.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    write_atomic(path, jumplab::json::to_lines(items)?.as_bytes())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, item: &T) -> Result<()> {
    let mut s = jumplab::json::to_line(item)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

/// `nodes.csv` (id, x, y, u) and `elements.csv` (id, a, b, c, tag, ux, uy).
pub fn solution_csvs(sol: &DiscreteSolution) -> (String, String) {
    let mesh = &sol.mesh;
    let mut nodes = String::from("id,x,y,u\n");
    for (i, (p, u)) in mesh.vertices.iter().zip(&sol.values).enumerate() {
        let _ = writeln!(nodes, "{i},{:.16e},{:.16e},{:.16e}", p[0], p[1], u);
    }
    let mut elems = String::from("id,a,b,c,tag,ux,uy\n");
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let g = sol.gradients[t];
        let tag = serde_json::to_value(mesh.tags[t])
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        let _ = writeln!(
            elems,
            "{t},{},{},{},{tag},{:.16e},{:.16e}",
            tri[0], tri[1], tri[2], g[0], g[1]
        );
    }
    (nodes, elems)
}

/// Left-aligned first column, right-aligned others, padded to the widest
/// cell of each column.
pub fn text_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let n = header.len();
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (i, c) in r.iter().enumerate().take(n) {
            width[i] = width[i].max(c.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            if i == 0 {
                let _ = write!(s, "{c:<w$}", w = width[i]);
            } else {
                let _ = write!(s, "{c:>w$}", w = width[i]);
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    out.push_str(&line(width.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().iter().map(String::as_str).collect()));
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    out
}
