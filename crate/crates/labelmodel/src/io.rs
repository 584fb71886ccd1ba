//! Plain-text file formats.
//!
//! Everything is UTF-8 text, human-inspectable and diff-friendly:
//!
//! - label matrix: `n=<int> m=<int>` header, then `row,col,label` triplets
//!   with label in `{-1, 1}` (abstains are implicit);
//! - features: `n=<int> d=<int>` header, then one whitespace-separated real
//!   row per line;
//! - soft labels / predictions: one probability per line;
//! - truth: one `+-1` per line;
//! - dependency graph: `kind,i,j` lines with kind in
//!   `{similar, fixes, reinforces, excludes}`;
//! - independent parameters: `m=<int>` header, then `i,alpha,beta` with 17
//!   significant digits;
//! - factor weights: `M=<int>` header, then `index,descriptor,weight`;
//! - linear model: `d=<int> rho=<real>` header, then one weight per line.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::data::{DependencyEdge, DependencyKind, FeatureMatrix, LabelMatrix};
use crate::error::{Error, Result};
use crate::factor::{FactorKind, FactorSpec, Theta};
use crate::independent::{IndependentParams, NaturalParams};
use crate::noise_aware::LinearModel;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

/// Lines with 1-based numbering, trailing blank lines dropped, comments kept out.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_kv<T: std::str::FromStr>(path: &Path, line: usize, field: &str, key: &str) -> Result<T> {
    let value = field
        .strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .ok_or_else(|| Error::parse(path, line, format!("expected `{key}=<value>`")))?;
    value
        .parse::<T>()
        .map_err(|_| Error::parse(path, line, format!("bad value for `{key}`: '{value}'")))
}

fn real17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn load_label_matrix(path: &Path) -> Result<LabelMatrix> {
    let text = read(path)?;
    let mut lines = content_lines(&text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file; expected `n=<int> m=<int>` header"))?;
    let mut fields = header.split_whitespace();
    let n: usize = parse_kv(
        path,
        hline,
        fields
            .next()
            .ok_or_else(|| Error::parse(path, hline, "missing `n=` field"))?,
        "n",
    )?;
    let m: usize = parse_kv(
        path,
        hline,
        fields
            .next()
            .ok_or_else(|| Error::parse(path, hline, "missing `m=` field"))?,
        "m",
    )?;

    let mut entries = Vec::new();
    for (lineno, line) in lines {
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::parse(path, lineno, "expected `row,col,label`"));
        }
        let row: usize = parts[0]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad row '{}'", parts[0])))?;
        let col: usize = parts[1]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad col '{}'", parts[1])))?;
        let label: i64 = parts[2]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad label '{}'", parts[2])))?;
        if label != 1 && label != -1 {
            return Err(Error::parse(
                path,
                lineno,
                format!("label out of range: {label} (must be -1 or 1)"),
            ));
        }
        if row >= n || col >= m {
            return Err(Error::parse(
                path,
                lineno,
                format!("cell ({row},{col}) outside declared {n}x{m} matrix"),
            ));
        }
        entries.push((row, col, label as i8));
    }
    entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
    for w in entries.windows(2) {
        if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
            return Err(Error::parse(
                path,
                0,
                format!("duplicate cell ({}, {})", w[0].0, w[0].1),
            ));
        }
    }
    LabelMatrix::from_entries(n, m, &entries)
}

pub fn store_label_matrix(labels: &LabelMatrix, path: &Path) -> Result<()> {
    let mut out = format!("n={} m={}\n", labels.n(), labels.m());
    for (r, c, v) in labels.entries() {
        let _ = writeln!(out, "{r},{c},{v}");
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn load_feature_matrix(path: &Path) -> Result<FeatureMatrix> {
    let text = read(path)?;
    let mut lines = content_lines(&text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file; expected `n=<int> d=<int>` header"))?;
    let mut fields = header.split_whitespace();
    let n: usize = parse_kv(
        path,
        hline,
        fields
            .next()
            .ok_or_else(|| Error::parse(path, hline, "missing `n=` field"))?,
        "n",
    )?;
    let d: usize = parse_kv(
        path,
        hline,
        fields
            .next()
            .ok_or_else(|| Error::parse(path, hline, "missing `d=` field"))?,
        "d",
    )?;
    let mut rows = Vec::with_capacity(n);
    for (lineno, line) in lines {
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::parse(path, lineno, format!("bad real '{t}'")))
            })
            .collect::<Result<_>>()?;
        if row.len() != d {
            return Err(Error::parse(
                path,
                lineno,
                format!("row has {} values, expected d={d}", row.len()),
            ));
        }
        if let Some(x) = row.iter().find(|x| !x.is_finite()) {
            return Err(Error::parse(path, lineno, format!("non-finite value {x}")));
        }
        rows.push(row);
    }
    if rows.len() != n {
        return Err(Error::parse(
            path,
            0,
            format!("found {} rows, header declares n={n}", rows.len()),
        ));
    }
    FeatureMatrix::from_rows(d, &rows)
}

pub fn store_feature_matrix(features: &FeatureMatrix, path: &Path) -> Result<()> {
    let mut out = format!("n={} d={}\n", features.n(), features.d());
    for row in features.rows().take(features.n()) {
        let mut first = true;
        for x in row {
            if !first {
                out.push(' ');
            }
            let _ = write!(out, "{x}");
            first = false;
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn load_soft_labels(path: &Path) -> Result<Vec<f64>> {
    let text = read(path)?;
    let mut out = Vec::new();
    for (lineno, line) in content_lines(&text) {
        let p: f64 = line
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad probability '{line}'")))?;
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(Error::parse(
                path,
                lineno,
                format!("probability {p} outside [0, 1]"),
            ));
        }
        out.push(p);
    }
    Ok(out)
}

pub fn store_soft_labels(probs: &[f64], path: &Path) -> Result<()> {
    let mut out = String::new();
    for p in probs {
        let _ = writeln!(out, "{p}");
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn load_truth(path: &Path) -> Result<Vec<i8>> {
    let text = read(path)?;
    let mut out = Vec::new();
    for (lineno, line) in content_lines(&text) {
        let y: i64 = line
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad class '{line}'")))?;
        if y != 1 && y != -1 {
            return Err(Error::parse(
                path,
                lineno,
                format!("class must be -1 or 1, got {y}"),
            ));
        }
        out.push(y as i8);
    }
    Ok(out)
}

pub fn store_truth(truth: &[i8], path: &Path) -> Result<()> {
    let mut out = String::new();
    for y in truth {
        let _ = writeln!(out, "{y}");
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn load_dependencies(path: &Path) -> Result<Vec<DependencyEdge>> {
    let text = read(path)?;
    let mut out = Vec::new();
    for (lineno, line) in content_lines(&text) {
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::parse(path, lineno, "expected `kind,i,j`"));
        }
        let kind = DependencyKind::parse(parts[0])
            .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        let i: usize = parts[1]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad index '{}'", parts[1])))?;
        let j: usize = parts[2]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad index '{}'", parts[2])))?;
        let edge =
            DependencyEdge::new(kind, i, j).map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        out.push(edge);
    }
    Ok(out)
}

pub fn store_dependencies(edges: &[DependencyEdge], path: &Path) -> Result<()> {
    let mut out = String::new();
    for e in edges {
        let _ = writeln!(out, "{},{},{}", e.kind.as_str(), e.i, e.j);
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn load_independent_params(path: &Path) -> Result<IndependentParams> {
    let text = read(path)?;
    let mut lines = content_lines(&text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file; expected `m=<int>` header"))?;
    let m: usize = parse_kv(path, hline, header, "m")?;
    let mut alpha = vec![f64::NAN; m];
    let mut beta = vec![f64::NAN; m];
    let mut seen = vec![false; m];
    for (lineno, line) in lines {
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::parse(path, lineno, "expected `i,alpha,beta`"));
        }
        let i: usize = parts[0]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad index '{}'", parts[0])))?;
        if i >= m {
            return Err(Error::parse(path, lineno, format!("index {i} >= m={m}")));
        }
        if seen[i] {
            return Err(Error::parse(path, lineno, format!("duplicate index {i}")));
        }
        seen[i] = true;
        alpha[i] = parts[1]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad alpha '{}'", parts[1])))?;
        beta[i] = parts[2]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad beta '{}'", parts[2])))?;
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(Error::parse(path, 0, format!("missing parameters for function {i}")));
    }
    IndependentParams::new(alpha, beta)
}

pub fn store_independent_params(params: &IndependentParams, path: &Path) -> Result<()> {
    let mut out = format!("m={}\n", params.m());
    for i in 0..params.m() {
        let _ = writeln!(
            out,
            "{i},{},{}",
            real17(params.alpha()[i]),
            real17(params.beta()[i])
        );
    }
    fs::write(path, out)?;
    Ok(())
}

/// Natural-parameter export (`i,psi,phi` lines).
pub fn store_natural_params(nat: &NaturalParams, path: &Path) -> Result<()> {
    let mut out = format!("m={}\n", nat.m());
    for i in 0..nat.m() {
        let _ = writeln!(out, "{i},{},{}", real17(nat.psi()[i]), real17(nat.phi()[i]));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn store_theta(theta: &Theta, spec: &FactorSpec, path: &Path) -> Result<()> {
    if theta.len() != spec.len() {
        return Err(Error::Dimension(format!(
            "theta has length {}, spec has M={}",
            theta.len(),
            spec.len()
        )));
    }
    let mut out = format!("M={}\n", theta.len());
    for (k, (kind, w)) in spec.kinds().iter().zip(theta.weights()).enumerate() {
        let _ = writeln!(out, "{k},{},{}", kind.descriptor(), real17(*w));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn load_theta(path: &Path) -> Result<(Theta, FactorSpec)> {
    let text = read(path)?;
    let mut lines = content_lines(&text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file; expected `M=<int>` header"))?;
    let total: usize = parse_kv(path, hline, header, "M")?;
    let mut kinds = vec![None; total];
    let mut weights = vec![0.0; total];
    for (lineno, line) in lines {
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        // Pair descriptors contain one comma themselves.
        if parts.len() < 3 || parts.len() > 4 {
            return Err(Error::parse(path, lineno, "expected `index,descriptor,weight`"));
        }
        let k: usize = parts[0]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad index '{}'", parts[0])))?;
        if k >= total {
            return Err(Error::parse(path, lineno, format!("index {k} >= M={total}")));
        }
        if kinds[k].is_some() {
            return Err(Error::parse(path, lineno, format!("duplicate index {k}")));
        }
        let descriptor = parts[1..parts.len() - 1].join(",");
        let kind = FactorKind::parse_descriptor(&descriptor)
            .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        let w: f64 = parts[parts.len() - 1]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad weight '{}'", parts[parts.len() - 1])))?;
        if !w.is_finite() {
            return Err(Error::parse(path, lineno, format!("non-finite weight {w}")));
        }
        kinds[k] = Some(kind);
        weights[k] = w;
    }
    let kinds: Vec<FactorKind> = kinds
        .into_iter()
        .enumerate()
        .map(|(k, kind)| kind.ok_or_else(|| Error::parse(path, 0, format!("missing factor {k}"))))
        .collect::<Result<_>>()?;
    let spec = FactorSpec::from_kinds(kinds)?;
    Ok((Theta::new(weights)?, spec))
}

pub fn store_linear_model(model: &LinearModel, path: &Path) -> Result<()> {
    let mut out = format!("d={} rho={}\n", model.d(), model.rho());
    for w in model.weights() {
        let _ = writeln!(out, "{}", real17(*w));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn load_linear_model(path: &Path) -> Result<LinearModel> {
    let text = read(path)?;
    let mut lines = content_lines(&text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file; expected `d=<int> rho=<real>` header"))?;
    let mut fields = header.split_whitespace();
    let d: usize = parse_kv(
        path,
        hline,
        fields
            .next()
            .ok_or_else(|| Error::parse(path, hline, "missing `d=` field"))?,
        "d",
    )?;
    let rho: f64 = parse_kv(
        path,
        hline,
        fields
            .next()
            .ok_or_else(|| Error::parse(path, hline, "missing `rho=` field"))?,
        "rho",
    )?;
    let mut weights = Vec::with_capacity(d);
    for (lineno, line) in lines {
        let w: f64 = line
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad weight '{line}'")))?;
        weights.push(w);
    }
    if weights.len() != d {
        return Err(Error::parse(
            path,
            0,
            format!("found {} weights, header declares d={d}", weights.len()),
        ));
    }
    LinearModel::new(weights, rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::compute_lf_stats;
    use proptest::prelude::*;
    use tempfile::tempdir;

    fn write_tmp(dir: &tempfile::TempDir, name: &str, content: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, content).unwrap();
        p
    }

    #[test]
    fn label_matrix_format_round_trip() {
        let dir = tempdir().unwrap();
        let p = write_tmp(&dir, "l.txt", "n=2 m=2\n0,0,1\n1,1,-1\n");
        let lm = load_label_matrix(&p).unwrap();
        assert_eq!(lm.nnz(), 2);
        assert_eq!(lm.row_dense(1), vec![0, -1]);
        let q = dir.path().join("copy.txt");
        store_label_matrix(&lm, &q).unwrap();
        assert_eq!(load_label_matrix(&q).unwrap(), lm);
    }

    #[test]
    fn label_matrix_rejects_bad_files() {
        let dir = tempdir().unwrap();
        let range = write_tmp(&dir, "a.txt", "n=2 m=2\n0,0,2\n");
        let err = load_label_matrix(&range).unwrap_err();
        assert!(err.to_string().contains("out of range"), "{err}");
        assert!(err.to_string().contains(":2:"), "line number missing: {err}");

        let dup = write_tmp(&dir, "b.txt", "n=2 m=2\n0,0,1\n0,0,1\n");
        let err = load_label_matrix(&dup).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");

        let dims = write_tmp(&dir, "c.txt", "n=2 m=2\n5,0,1\n");
        assert!(load_label_matrix(&dims).is_err());

        let garbled = write_tmp(&dir, "d.txt", "n=2 m=2\n0;0;1\n");
        assert!(load_label_matrix(&garbled).is_err());

        assert!(load_label_matrix(&dir.path().join("missing.txt")).is_err());
    }

    #[test]
    fn stats_on_spec_fixture() {
        let dir = tempdir().unwrap();
        let p = write_tmp(&dir, "l.txt", "n=3 m=2\n0,0,1\n1,0,1\n1,1,-1\n");
        let s = compute_lf_stats(&load_label_matrix(&p).unwrap());
        assert!((s.coverage - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn feature_round_trip_and_errors() {
        let dir = tempdir().unwrap();
        let f = FeatureMatrix::from_rows(2, &[vec![0.25, -1.5], vec![1e-12, 3.0]]).unwrap();
        let p = dir.path().join("f.txt");
        store_feature_matrix(&f, &p).unwrap();
        assert_eq!(load_feature_matrix(&p).unwrap(), f);

        let bad = write_tmp(&dir, "bad.txt", "n=1 d=2\n0.5\n");
        assert!(load_feature_matrix(&bad).is_err());
        let nan = write_tmp(&dir, "nan.txt", "n=1 d=1\nNaN\n");
        assert!(load_feature_matrix(&nan).is_err());
        let short = write_tmp(&dir, "short.txt", "n=2 d=1\n0.5\n");
        assert!(load_feature_matrix(&short).is_err());
    }

    #[test]
    fn soft_labels_and_truth() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("p.txt");
        store_soft_labels(&[0.0, 0.25, 1.0], &p).unwrap();
        assert_eq!(load_soft_labels(&p).unwrap(), vec![0.0, 0.25, 1.0]);
        let bad = write_tmp(&dir, "bad.txt", "1.5\n");
        assert!(load_soft_labels(&bad).is_err());

        let t = dir.path().join("t.txt");
        store_truth(&[1, -1, 1], &t).unwrap();
        assert_eq!(load_truth(&t).unwrap(), vec![1, -1, 1]);
        let zero = write_tmp(&dir, "zero.txt", "0\n");
        assert!(load_truth(&zero).is_err());
    }

    #[test]
    fn dependency_file_round_trip() {
        let dir = tempdir().unwrap();
        let edges = vec![
            DependencyEdge::new(DependencyKind::Similar, 0, 1).unwrap(),
            DependencyEdge::new(DependencyKind::Fixing, 2, 3).unwrap(),
            DependencyEdge::new(DependencyKind::Reinforcing, 1, 4).unwrap(),
            DependencyEdge::new(DependencyKind::Exclusive, 4, 0).unwrap(),
        ];
        let p = dir.path().join("deps.txt");
        store_dependencies(&edges, &p).unwrap();
        assert_eq!(load_dependencies(&p).unwrap(), edges);
        let bad = write_tmp(&dir, "bad.txt", "sim,0,1\n");
        assert!(load_dependencies(&bad).is_err());
        let selfloop = write_tmp(&dir, "loop.txt", "similar,1,1\n");
        assert!(load_dependencies(&selfloop).is_err());
    }

    #[test]
    fn params_round_trip_exact() {
        let dir = tempdir().unwrap();
        let params = IndependentParams::new(
            vec![0.8123456789012345, 0.6, 0.99999],
            vec![0.1, 0.4999999999999999, 1.0],
        )
        .unwrap();
        let p = dir.path().join("params.txt");
        store_independent_params(&params, &p).unwrap();
        let back = load_independent_params(&p).unwrap();
        // 17 significant digits round-trip f64 exactly.
        assert_eq!(back.alpha(), params.alpha());
        assert_eq!(back.beta(), params.beta());

        let missing = write_tmp(&dir, "m.txt", "m=2\n0,0.8,0.4\n");
        assert!(load_independent_params(&missing).is_err());
    }

    #[test]
    fn theta_round_trip_with_dependencies() {
        let dir = tempdir().unwrap();
        let edges = vec![
            DependencyEdge::new(DependencyKind::Fixing, 0, 1).unwrap(),
            DependencyEdge::new(DependencyKind::Similar, 1, 2).unwrap(),
        ];
        let spec = FactorSpec::build(3, &edges, false).unwrap();
        let theta = Theta::new((0..spec.len()).map(|k| k as f64 * 0.125 - 0.8).collect()).unwrap();
        let p = dir.path().join("theta.txt");
        store_theta(&theta, &spec, &p).unwrap();
        let (theta2, spec2) = load_theta(&p).unwrap();
        assert_eq!(theta2, theta);
        assert_eq!(spec2, spec);
        assert_eq!(spec2.m(), 3);
    }

    #[test]
    fn linear_model_round_trip() {
        let dir = tempdir().unwrap();
        let model = LinearModel::new(vec![0.5, -1.25, 3e-7], 0.01).unwrap();
        let p = dir.path().join("model.txt");
        store_linear_model(&model, &p).unwrap();
        let back = load_linear_model(&p).unwrap();
        assert_eq!(back.weights(), model.weights());
        assert_eq!(back.rho(), model.rho());
    }

    proptest! {
        // Store-then-load reproduces the exact entry set.
        #[test]
        fn label_matrix_round_trip_property(
            (n, m, raw) in (1usize..10, 1usize..6).prop_flat_map(|(n, m)| {
                (Just(n), Just(m), proptest::collection::vec(
                    (0..n, 0..m, prop_oneof![Just(-1i8), Just(1i8)]), 0..20))
            })
        ) {
            let mut entries = raw;
            entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
            entries.dedup_by_key(|&mut (r, c, _)| (r, c));
            let lm = LabelMatrix::from_entries(n, m, &entries).unwrap();
            let dir = tempdir().unwrap();
            let p = dir.path().join("rt.txt");
            store_label_matrix(&lm, &p).unwrap();
            prop_assert_eq!(load_label_matrix(&p).unwrap(), lm);
        }
    }
}
