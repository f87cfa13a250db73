//! Line-oriented text formats.
//!
//! * documents: `id<TAB>text` per line
//! * gold labels: `id<TAB>class`
//! * Z: header `N L`, then `sample_id<TAB>lf_id` per matched cell
//! * T: header `L K`, then `lf_id<TAB>class_id` (one-hot) or
//!   `lf_id<TAB>v_0<TAB>...<TAB>v_{K-1}` (fractional) per LF
//!
//! Sample ids are arbitrary strings; they are mapped to dense indices in
//! document-file order.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2};

use super::{Signature, WeakDataset};
use crate::{Error, Result};

/// Locations of the files making up one dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetPaths {
    pub docs: PathBuf,
    pub z: PathBuf,
    pub t: PathBuf,
    pub gold: Option<PathBuf>,
}

impl DatasetPaths {
    /// Canonical file names inside `dir`.
    pub fn in_dir(dir: &Path, with_gold: bool) -> Self {
        DatasetPaths {
            docs: dir.join("docs.tsv"),
            z: dir.join("z.tsv"),
            t: dir.join("t.tsv"),
            gold: with_gold.then(|| dir.join("gold.tsv")),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Non-empty lines with 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.is_empty())
}

fn header(path: &Path, text: &str, what: &str) -> Result<(usize, usize, usize)> {
    let (line, row) = lines(text)
        .next()
        .ok_or_else(|| Error::parse(path, 1, format!("missing `{what}` header")))?;
    let parts: Vec<&str> = row.split_whitespace().collect();
    match parts.as_slice() {
        [a, b] => {
            let a = a
                .parse()
                .map_err(|_| Error::parse(path, line, format!("malformed `{what}` header")))?;
            let b = b
                .parse()
                .map_err(|_| Error::parse(path, line, format!("malformed `{what}` header")))?;
            Ok((line, a, b))
        }
        _ => Err(Error::parse(
            path,
            line,
            format!("malformed `{what}` header"),
        )),
    }
}

/// Reads a documents file into `(ids, texts)`.
pub fn read_docs(path: &Path) -> Result<(Vec<String>, Vec<String>)> {
    let text = read(path)?;
    let mut ids = Vec::new();
    let mut texts = Vec::new();
    let mut seen = HashMap::new();
    for (line, row) in lines(&text) {
        let (id, body) = row
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, line, "malformed row: expected `id<TAB>text`"))?;
        if seen.insert(id.to_string(), line).is_some() {
            return Err(Error::parse(path, line, format!("duplicate id `{id}`")));
        }
        ids.push(id.to_string());
        texts.push(body.to_string());
    }
    Ok((ids, texts))
}

fn index_of(ids: &[String]) -> HashMap<&str, usize> {
    ids.iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect()
}

/// Reads gold labels aligned to `ids`. Every id needs exactly one label.
pub fn read_gold(path: &Path, ids: &[String], num_classes: usize) -> Result<Vec<usize>> {
    let text = read(path)?;
    let index = index_of(ids);
    let mut gold = vec![None; ids.len()];
    for (line, row) in lines(&text) {
        let (id, class) = row
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, line, "malformed row: expected `id<TAB>class`"))?;
        let i = *index
            .get(id)
            .ok_or_else(|| Error::parse(path, line, format!("unknown sample id `{id}`")))?;
        let class: usize = class
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line, format!("malformed class id `{class}`")))?;
        if class >= num_classes {
            return Err(Error::parse(
                path,
                line,
                format!("class index {class} out of range (K={num_classes})"),
            ));
        }
        if gold[i].replace(class).is_some() {
            return Err(Error::parse(
                path,
                line,
                format!("duplicate label for `{id}`"),
            ));
        }
    }
    gold.into_iter()
        .enumerate()
        .map(|(i, g)| {
            g.ok_or_else(|| {
                Error::Dataset(format!("{}: no label for `{}`", path.display(), ids[i]))
            })
        })
        .collect()
}

/// Reads a `T` file; rows may be one-hot (`lf<TAB>class`) or fractional.
pub fn read_t_matrix(path: &Path) -> Result<Array2<f64>> {
    read_t(path, false)
}

fn read_t(path: &Path, one_hot_only: bool) -> Result<Array2<f64>> {
    let text = read(path)?;
    let (hline, l, k) = header(path, &text, "L K")?;
    if k < 2 {
        return Err(Error::parse(
            path,
            hline,
            format!("K inconsistent: need K >= 2, got {k}"),
        ));
    }
    let mut t = Array2::zeros((l, k));
    let mut seen = vec![false; l];
    for (line, row) in lines(&text).skip(1) {
        let fields: Vec<&str> = row.split('\t').collect();
        let lf: usize = fields[0]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line, "malformed row: bad LF id"))?;
        if lf >= l {
            return Err(Error::parse(
                path,
                line,
                format!("LF index out of range ({lf} >= {l})"),
            ));
        }
        if std::mem::replace(&mut seen[lf], true) {
            return Err(Error::parse(
                path,
                line,
                format!("duplicate row for LF {lf}"),
            ));
        }
        match fields.len() {
            2 => {
                let class: usize = fields[1]
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(path, line, "malformed row: bad class id"))?;
                if class >= k {
                    return Err(Error::parse(
                        path,
                        line,
                        format!("K inconsistent: class {class} with K={k}"),
                    ));
                }
                t[[lf, class]] = 1.0;
            }
            n if n == k + 1 && !one_hot_only => {
                for (j, v) in fields[1..].iter().enumerate() {
                    let v: f64 = v
                        .trim()
                        .parse()
                        .map_err(|_| Error::parse(path, line, "malformed row: bad value"))?;
                    if !v.is_finite() || v < 0.0 {
                        return Err(Error::parse(path, line, "negative or non-finite T entry"));
                    }
                    t[[lf, j]] = v;
                }
            }
            _ if one_hot_only => {
                return Err(Error::parse(
                    path,
                    line,
                    "T row not one-hot: expected `lf_id<TAB>class_id`",
                ))
            }
            n => {
                return Err(Error::parse(
                    path,
                    line,
                    format!("K inconsistent: row has {} values, K={k}", n - 1),
                ))
            }
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::parse(
            path,
            hline,
            format!("no row for LF {missing}"),
        ));
    }
    Ok(t)
}

fn read_z(path: &Path, ids: &[String]) -> Result<(usize, Vec<Signature>)> {
    let text = read(path)?;
    let (hline, n, l) = header(path, &text, "N L")?;
    if n != ids.len() {
        return Err(Error::parse(
            path,
            hline,
            format!("header says N={n} but the documents file has {}", ids.len()),
        ));
    }
    let index = index_of(ids);
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (line, row) in lines(&text).skip(1) {
        let (id, lf) = row.split_once('\t').ok_or_else(|| {
            Error::parse(path, line, "malformed row: expected `sample_id<TAB>lf_id`")
        })?;
        let i = *index
            .get(id)
            .ok_or_else(|| Error::parse(path, line, format!("unknown sample id `{id}`")))?;
        let lf: usize = lf
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line, format!("malformed LF id `{lf}`")))?;
        if lf >= l {
            return Err(Error::parse(
                path,
                line,
                format!("LF index out of range ({lf} >= {l})"),
            ));
        }
        rows[i].push(lf);
    }
    Ok((l, rows.into_iter().map(Signature::new).collect()))
}

/// Loads and validates a dataset; `T` must be one-hot.
pub fn load_dataset(paths: &DatasetPaths) -> Result<WeakDataset> {
    let (ids, texts) = read_docs(&paths.docs)?;
    let (num_lfs, signatures) = read_z(&paths.z, &ids)?;
    let t = read_t(&paths.t, true)?;
    if t.nrows() != num_lfs {
        return Err(Error::parse(
            &paths.t,
            1,
            format!("T declares L={} but Z declares L={num_lfs}", t.nrows()),
        ));
    }
    let gold = match &paths.gold {
        Some(g) => Some(read_gold(g, &ids, t.ncols())?),
        None => None,
    };
    WeakDataset::new(ids, texts, signatures, num_lfs, t, gold)
}

fn format_t(t: ArrayView2<'_, f64>) -> String {
    let mut out = format!("{} {}\n", t.nrows(), t.ncols());
    for (l, row) in t.rows().into_iter().enumerate() {
        let one_hot = row.iter().filter(|&&v| v == 1.0).count() == 1
            && row.iter().all(|&v| v == 0.0 || v == 1.0);
        if one_hot {
            let class = row.iter().position(|&v| v == 1.0).unwrap_or(0);
            let _ = writeln!(out, "{l}\t{class}");
        } else {
            let _ = write!(out, "{l}");
            for v in row {
                let _ = write!(out, "\t{v}");
            }
            out.push('\n');
        }
    }
    out
}

/// Writes a (possibly fractional) mapping matrix.
pub fn write_t_matrix(path: &Path, t: ArrayView2<'_, f64>) -> Result<()> {
    write(path, &format_t(t))
}

/// Writes `ds` in the canonical formats. Z cells are emitted in sample order,
/// then LF order.
pub fn write_dataset(ds: &WeakDataset, paths: &DatasetPaths) -> Result<()> {
    let mut docs = String::new();
    for (id, text) in ds.ids().iter().zip(ds.texts()) {
        let _ = writeln!(docs, "{id}\t{text}");
    }
    write(&paths.docs, &docs)?;

    let mut z = format!("{} {}\n", ds.len(), ds.num_lfs());
    for (id, sig) in ds.ids().iter().zip(ds.signatures()) {
        for lf in sig.lfs() {
            let _ = writeln!(z, "{id}\t{lf}");
        }
    }
    write(&paths.z, &z)?;
    write(&paths.t, &format_t(ds.t()))?;

    if let (Some(path), Some(gold)) = (&paths.gold, ds.gold()) {
        write_labels(path, ds.ids(), gold)?;
    }
    Ok(())
}

/// Writes `id<TAB>label` rows.
pub fn write_labels(path: &Path, ids: &[String], labels: &[usize]) -> Result<()> {
    let mut out = String::new();
    for (id, y) in ids.iter().zip(labels) {
        let _ = writeln!(out, "{id}\t{y}");
    }
    write(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn files(dir: &Path, docs: &str, z: &str, t: &str) -> DatasetPaths {
        let p = DatasetPaths::in_dir(dir, false);
        fs::write(&p.docs, docs).unwrap();
        fs::write(&p.z, z).unwrap();
        fs::write(&p.t, t).unwrap();
        p
    }

    #[test]
    fn smallest_well_formed_input() {
        let dir = tempfile::tempdir().unwrap();
        let p = files(
            dir.path(),
            "a\tfirst doc\nb\tsecond\nc\tthird\n",
            "3 2\na\t0\nc\t1\nc\t0\n",
            "2 2\n0\t0\n1\t1\n",
        );
        let ds = load_dataset(&p).unwrap();
        assert_eq!((ds.len(), ds.num_lfs(), ds.num_classes()), (3, 2, 2));
        assert_eq!(ds.signature(2).lfs(), &[0, 1]);
        assert!(!ds.is_matched(1));
    }

    #[test]
    fn lf_out_of_range_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = files(dir.path(), "a\tx\n", "1 2\na\t5\n", "2 2\n0\t0\n1\t1\n");
        let err = load_dataset(&p).unwrap_err().to_string();
        assert!(err.contains("LF index out of range"), "{err}");
        assert!(err.contains(":2:"), "{err}");
    }

    #[test]
    fn fractional_t_rejected_at_load() {
        let dir = tempfile::tempdir().unwrap();
        let p = files(dir.path(), "a\tx\n", "1 1\na\t0\n", "1 2\n0\t0.5\t0.5\n");
        let err = load_dataset(&p).unwrap_err().to_string();
        assert!(err.contains("not one-hot"), "{err}");
        // but the general reader accepts it
        let t = read_t_matrix(&p.t).unwrap();
        assert_eq!(t.row(0).to_vec(), vec![0.5, 0.5]);
    }

    #[test]
    fn inconsistent_k_and_missing_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = files(dir.path(), "a\tx\n", "1 2\n", "2 2\n0\t0\n1\t3\n");
        assert!(load_dataset(&p)
            .unwrap_err()
            .to_string()
            .contains("K inconsistent"));
        let p = files(dir.path(), "a\tx\n", "1 2\n", "2 2\n0\t0\n");
        assert!(load_dataset(&p)
            .unwrap_err()
            .to_string()
            .contains("no row for LF 1"));
    }

    #[test]
    fn malformed_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = files(dir.path(), "no tab here\n", "1 1\n", "1 2\n0\t0\n");
        assert!(load_dataset(&p)
            .unwrap_err()
            .to_string()
            .contains("malformed row"));
        let p = files(dir.path(), "a\tx\n", "1 1\nzz\t0\n", "1 2\n0\t0\n");
        assert!(load_dataset(&p)
            .unwrap_err()
            .to_string()
            .contains("unknown sample id"));
    }
}
