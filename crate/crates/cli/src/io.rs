//! Solution tables, metadata sidecars and key-value reports.
//!
//! Every float is written with 17 significant digits so a table read back
//! reproduces the stored values exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use qduhamel::propagator::SolutionMeta;
use qduhamel::LatticeSolution64;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn meta_path(table: &Path) -> PathBuf {
    let mut s = table.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

pub fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn solution_csv(solution: &LatticeSolution64) -> String {
    let mut out = String::from("t,component,value\n");
    for (t, v) in solution.times().iter().zip(solution.values()) {
        for (c, x) in v.iter().enumerate() {
            writeln!(out, "{},{c},{}", fmt_f64(*t), fmt_f64(*x)).expect("string write");
        }
    }
    out
}

pub fn read_solution(path: &Path) -> anyhow::Result<LatticeSolution64> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("t,component,value") {
        bail!("{}: expected header `t,component,value`", path.display());
    }
    let mut times: Vec<f64> = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row = n + 2;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [t, c, v] = fields[..] else {
            bail!("{}:{row}: expected three columns", path.display());
        };
        let parse = |s: &str| s.parse::<f64>().with_context(|| format!("{}:{row}: bad number {s:?}", path.display()));
        let (t, v) = (parse(t)?, parse(v)?);
        let c: usize = c.parse().with_context(|| format!("{}:{row}: bad component {c:?}", path.display()))?;
        if c == 0 {
            times.push(t);
            values.push(Vec::new());
        }
        match (times.last(), values.last_mut()) {
            (Some(&t0), Some(vals)) if t0 == t && vals.len() == c => vals.push(v),
            _ => bail!("{}:{row}: components must run 0, 1, ... for each t", path.display()),
        }
    }
    if values.windows(2).any(|w| w[0].len() != w[1].len()) {
        bail!("{}: ragged component count", path.display());
    }
    Ok(LatticeSolution64::new(times, values, SolutionMeta::default())?)
}

/// `key=value` lines in insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyValues(Vec<(String, String)>);

impl KeyValues {
    pub fn push(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.0.push((key.to_string(), value.to_string()));
        self
    }

    pub fn render(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn parse(text: &str) -> BTreeMap<String, String> {
        text.lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect()
    }
}

pub fn read_key_values(path: &Path) -> anyhow::Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(KeyValues::parse(&text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 1.7976931348623157e308, 0.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn table_round_trip() {
        let sol = LatticeSolution64::new(
            vec![1.0, 0.5],
            vec![vec![1.0 / 3.0, 2.0], vec![0.1, -0.2]],
            SolutionMeta::default(),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_file(&p, &solution_csv(&sol)).unwrap();
        let back = read_solution(&p).unwrap();
        assert_eq!(back.times(), sol.times());
        assert_eq!(back.values(), sol.values());
    }

    #[test]
    fn key_values_parse() {
        let mut kv = KeyValues::default();
        kv.push("a", 1).push("b", "x=y");
        let m = KeyValues::parse(&kv.render());
        assert_eq!(m["a"], "1");
        assert_eq!(m["b"], "x=y");
    }
}
