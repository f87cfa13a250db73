//! Grid search over run configurations, selected by dev score.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::Serialize;

use super::config::RunConfig;
use super::run::{execute, Splits};
use crate::{seed, Error, Result};

/// A base configuration plus the axes to sweep. Points are enumerated with the
/// last axis varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpace {
    pub base: RunConfig,
    pub axes: Vec<(String, Vec<String>)>,
    /// Evaluate only this many points, chosen by a seeded shuffle.
    pub budget: Option<usize>,
}

impl GridSpace {
    /// Values containing commas become axes; `budget` sets the budget; every
    /// other pair goes into the base configuration.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut space = GridSpace {
            base: RunConfig::default(),
            axes: Vec::new(),
            budget: None,
        };
        for (k, v) in pairs {
            space.set(&k, &v)?;
        }
        Ok(space)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        if key == "budget" {
            self.budget = match v.trim() {
                "" | "none" => None,
                s => Some(
                    s.parse()
                        .map_err(|_| Error::Config(format!("bad budget `{s}`")))?,
                ),
            };
            return Ok(());
        }
        let values: Vec<String> = v.split(',').map(|s| s.trim().to_string()).collect();
        // validate every value against a scratch config
        let mut probe = self.base.clone();
        for x in &values {
            probe.set(key, x)?;
        }
        self.axes.retain(|(k, _)| k != key);
        if values.len() > 1 {
            self.axes.push((key.to_string(), values));
        } else {
            self.base.set(key, &values[0])?;
        }
        Ok(())
    }

    pub fn num_points(&self) -> usize {
        self.axes.iter().map(|(_, v)| v.len()).product()
    }

    /// Assignment of the `index`-th point in grid order.
    pub fn point(&self, mut index: usize) -> Vec<(String, String)> {
        let mut out = vec![(String::new(), String::new()); self.axes.len()];
        for (slot, (k, vals)) in self.axes.iter().enumerate().rev() {
            out[slot] = (k.clone(), vals[index % vals.len()].clone());
            index /= vals.len();
        }
        out
    }

    pub fn config(&self, index: usize) -> Result<RunConfig> {
        let mut cfg = self.base.clone();
        cfg.apply(self.point(index))?;
        Ok(cfg)
    }

    /// Grid indices to evaluate, ascending.
    pub fn selection(&self) -> Vec<usize> {
        let n = self.num_points();
        let mut idx: Vec<usize> = (0..n).collect();
        if let Some(b) = self.budget.filter(|&b| b < n) {
            idx.shuffle(&mut seed::stream(self.base.seed, "grid", 0));
            idx.truncate(b);
            idx.sort_unstable();
        }
        idx
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    pub index: usize,
    pub point: Vec<(String, String)>,
    pub dev: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best: RunConfig,
    pub best_index: usize,
    pub rows: Vec<GridRow>,
}

impl GridResult {
    /// Tab-separated results table.
    pub fn table(&self) -> String {
        let mut out = String::from("index\tpoint\tdev\terror\n");
        for r in &self.rows {
            let point: Vec<String> = r.point.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let dev = r.dev.map_or("nan".to_string(), |d| d.to_string());
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                r.index,
                point.join(" "),
                dev,
                r.error.as_deref().unwrap_or("")
            );
        }
        out
    }
}

/// Evaluates the selected points with their configured repeats and picks the
/// best mean dev score; ties go to the earliest point in grid order.
pub fn grid_search(space: &GridSpace, splits: &Splits) -> Result<GridResult> {
    if space.num_points() == 0 || space.budget == Some(0) {
        return Err(Error::Config("empty search space".into()));
    }
    if splits.dev.is_none() {
        return Err(Error::Config(
            "grid search needs a dev split (dev_docs, dev_gold)".into(),
        ));
    }
    let mut rows = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for index in space.selection() {
        let cfg = space.config(index)?;
        let outcome = cfg.validate().and_then(|_| execute(&cfg, splits));
        let (dev, error) = match outcome {
            Ok(out) if out.report.failures.is_empty() => (out.report.dev.map(|d| d.mean), None),
            Ok(out) => (None, Some(out.report.failures[0].error.clone())),
            Err(e) => (None, Some(e.to_string())),
        };
        if let Some(d) = dev {
            if best.is_none_or(|(_, b)| d > b) {
                best = Some((index, d));
            }
        }
        rows.push(GridRow {
            index,
            point: space.point(index),
            dev,
            error,
        });
    }
    let (best_index, _) = best.ok_or_else(|| Error::Config("no grid point completed".into()))?;
    Ok(GridResult {
        best: space.config(best_index)?,
        best_index,
        rows,
    })
}

/// Writes `grid.tsv` and `best.txt` into `dir`.
pub fn write_grid(dir: &Path, result: &GridResult) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let put = |name: &str, s: String| {
        std::fs::write(dir.join(name), s).map_err(|e| Error::io(dir.join(name), e))
    };
    put("grid.tsv", result.table())?;
    put("best.txt", result.best.to_pairs_text())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(pairs: &[(&str, &str)]) -> GridSpace {
        GridSpace::from_pairs(pairs.iter().map(|(k, v)| (k.to_string(), v.to_string()))).unwrap()
    }

    #[test]
    fn cartesian_order() {
        let s = space(&[("p", "0.1,0.5"), ("k", "3,5,8")]);
        assert_eq!(s.num_points(), 6);
        assert_eq!(
            s.point(0),
            vec![("p".into(), "0.1".into()), ("k".into(), "3".into())]
        );
        assert_eq!(
            s.point(1),
            vec![("p".into(), "0.1".into()), ("k".into(), "5".into())]
        );
        assert_eq!(
            s.point(5),
            vec![("p".into(), "0.5".into()), ("k".into(), "8".into())]
        );
        assert_eq!(s.config(4).unwrap().k, 5);
    }

    #[test]
    fn singleton_space() {
        let s = space(&[("p", "0.3")]);
        assert_eq!(s.num_points(), 1);
        assert_eq!(s.config(0).unwrap().p, 0.3);
    }

    #[test]
    fn budget_is_seeded() {
        let s = space(&[
            ("p", "0.1,0.2,0.3,0.4,0.5"),
            ("k", "3,5,8,10"),
            ("budget", "5"),
        ]);
        let a = s.selection();
        assert_eq!(a.len(), 5);
        assert_eq!(a, s.selection());
        assert!(a.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn bad_axis_value() {
        let r = GridSpace::from_pairs([("k".to_string(), "3,x".to_string())]);
        assert!(r.is_err());
    }
}
