//! CSV readers and writers for peaks, frequencies, profiles and repeat numbers.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use dnamix_core::{FrequencyTable, MarkerData, MixtureDataset, Profile};

use crate::error::{CliError, CliResult};

/// Repeat number per `(marker, allele)`, overriding the numeric allele label.
pub type RepeatNumbers = HashMap<(String, String), f64>;

struct Table {
    headers: Vec<String>,
    rows: Vec<(u64, Vec<String>)>,
}

fn read_table(path: &Path) -> CliResult<Table> {
    let file = std::fs::File::open(path).map_err(|source| CliError::Io { path: path.into(), source })?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(false)
        .from_reader(file);
    let parse_err = |line: u64, e: csv::Error| CliError::Parse { path: path.into(), line, message: e.to_string() };
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(1, e))?
        .iter()
        .map(|h| h.to_ascii_lowercase())
        .collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e)
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(Table { headers, rows })
}

fn expect_headers(path: &Path, t: &Table, options: &[&[&str]]) -> CliResult<usize> {
    options
        .iter()
        .position(|o| t.headers.iter().map(String::as_str).eq(o.iter().copied()))
        .ok_or_else(|| CliError::Parse {
            path: path.into(),
            line: 1,
            message: format!(
                "expected header {}, found {}",
                options.iter().map(|o| o.join(",")).collect::<Vec<_>>().join(" or "),
                t.headers.join(",")
            ),
        })
}

fn positive(path: &Path, line: u64, field: &str, s: &str) -> CliResult<f64> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        Ok(v) => Err(CliError::Parse { path: path.into(), line, message: format!("{field} must be positive, got {v}") }),
        Err(_) => Err(CliError::Parse { path: path.into(), line, message: format!("{field} is not a number: {s:?}") }),
    }
}

fn nonempty<'a>(path: &Path, line: u64, field: &str, s: &'a str) -> CliResult<&'a str> {
    if s.is_empty() {
        Err(CliError::Parse { path: path.into(), line, message: format!("empty {field}") })
    } else {
        Ok(s)
    }
}

/// Reads `marker,allele,area` or `marker,allele,rel` and normalizes per marker.
/// With `repeat_correct`, each size is divided by the allele's repeat number
/// first: the override from `repeats` if present, else the allele label as a
/// number.
pub fn ingest_peaks(path: &Path, repeat_correct: bool, repeats: Option<&RepeatNumbers>) -> CliResult<MixtureDataset> {
    let t = read_table(path)?;
    expect_headers(path, &t, &[&["marker", "allele", "area"], &["marker", "allele", "rel"]])?;
    let mut order: Vec<String> = Vec::new();
    let mut by_marker: HashMap<String, Vec<(String, f64)>> = HashMap::new();
    for (line, row) in &t.rows {
        let marker = nonempty(path, *line, "marker", &row[0])?;
        let allele = nonempty(path, *line, "allele", &row[1])?;
        let mut size = positive(path, *line, &t.headers[2], &row[2])?;
        if repeat_correct {
            let key = (marker.to_string(), allele.to_string());
            let n = match repeats.and_then(|r| r.get(&key)) {
                Some(n) => *n,
                None => allele.parse::<f64>().ok().filter(|n| *n > 0.0).ok_or_else(|| CliError::Parse {
                    path: path.into(),
                    line: *line,
                    message: format!("no repeat number for allele {allele} at {marker}"),
                })?,
            };
            size /= n;
        }
        let entry = by_marker.entry(marker.to_string()).or_insert_with(|| {
            order.push(marker.to_string());
            Vec::new()
        });
        if entry.iter().any(|(a, _)| a == allele) {
            return Err(CliError::Parse {
                path: path.into(),
                line: *line,
                message: format!("duplicate row for marker {marker}, allele {allele}"),
            });
        }
        entry.push((allele.to_string(), size));
    }
    let markers = order
        .iter()
        .map(|m| {
            let rows = &by_marker[m];
            MarkerData::new(m.clone(), rows.iter().map(|r| r.0.clone()).collect(), rows.iter().map(|r| r.1).collect())
        })
        .collect::<dnamix_core::Result<Vec<_>>>()?;
    if markers.len() < 2 {
        return Err(CliError::Data(format!("{}: need at least two markers, found {}", path.display(), markers.len())));
    }
    Ok(MixtureDataset::new(markers)?)
}

/// `marker,allele,freq`; each marker is rescaled to sum to one.
pub fn read_frequencies(path: &Path) -> CliResult<FrequencyTable> {
    let t = read_table(path)?;
    expect_headers(path, &t, &[&["marker", "allele", "freq"]])?;
    let mut map: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for (line, row) in &t.rows {
        let marker = nonempty(path, *line, "marker", &row[0])?;
        let allele = nonempty(path, *line, "allele", &row[1])?;
        let q = positive(path, *line, "freq", &row[2])?;
        if map.entry(marker.into()).or_default().insert(allele.into(), q).is_some() {
            return Err(CliError::Parse {
                path: path.into(),
                line: *line,
                message: format!("duplicate frequency for marker {marker}, allele {allele}"),
            });
        }
    }
    Ok(FrequencyTable::normalized(map)?)
}

/// `marker,allele1,allele2`.
pub fn read_profile(path: &Path, name: &str) -> CliResult<Profile> {
    let t = read_table(path)?;
    expect_headers(path, &t, &[&["marker", "allele1", "allele2"]])?;
    let mut p = Profile::new(name);
    for (line, row) in &t.rows {
        let marker = nonempty(path, *line, "marker", &row[0])?;
        let a = nonempty(path, *line, "allele1", &row[1])?;
        let b = nonempty(path, *line, "allele2", &row[2])?;
        if p.genotypes.contains_key(marker) {
            return Err(CliError::Parse { path: path.into(), line: *line, message: format!("duplicate marker {marker}") });
        }
        p = p.with(marker, a, b);
    }
    Ok(p)
}

/// `marker,allele,repeats`.
pub fn read_repeat_numbers(path: &Path) -> CliResult<RepeatNumbers> {
    let t = read_table(path)?;
    expect_headers(path, &t, &[&["marker", "allele", "repeats"]])?;
    let mut out = RepeatNumbers::new();
    for (line, row) in &t.rows {
        let n = positive(path, *line, "repeats", &row[2])?;
        out.insert((row[0].clone(), row[1].clone()), n);
    }
    Ok(out)
}

pub fn peaks_csv(ds: &MixtureDataset) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Data(e.to_string());
    w.write_record(["marker", "allele", "rel"]).map_err(err)?;
    for md in &ds.markers {
        for (a, r) in md.alleles.iter().zip(&md.rel_sizes) {
            w.write_record([md.marker.as_str(), a.as_str(), &r.to_string()]).map_err(err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::Data(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn equal_areas_are_uniform() {
        let f = file("marker,allele,area\nA,1,500\nA,2,500\nA,3,500\nB,7,10\nB,8,10\n");
        let ds = ingest_peaks(f.path(), false, None).unwrap();
        for r in &ds.markers[0].rel_sizes {
            assert!((r - 1.0 / 3.0).abs() < 1e-12);
        }
        assert_eq!(ds.markers[1].rel_sizes, vec![0.5, 0.5]);
    }

    #[test]
    fn repeat_correction() {
        let f = file("marker,allele,area\nA,10,200\nA,20,100\nB,7,1\nB,8,1\n");
        let ds = ingest_peaks(f.path(), true, None).unwrap();
        assert!((ds.markers[0].rel_sizes[0] - 0.8).abs() < 1e-12);
        assert!((ds.markers[0].rel_sizes[1] - 0.2).abs() < 1e-12);

        let g = file("marker,allele,area\nA,x,200\nA,y,100\nB,7,1\nB,8,1\n");
        assert!(matches!(ingest_peaks(g.path(), true, None), Err(CliError::Parse { line: 2, .. })));
        let mut rep = RepeatNumbers::new();
        rep.insert(("A".into(), "x".into()), 10.0);
        rep.insert(("A".into(), "y".into()), 20.0);
        let ds = ingest_peaks(g.path(), true, Some(&rep)).unwrap();
        assert!((ds.markers[0].rel_sizes[0] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let f = file("marker,allele,rel\nA,1,0.5\nA,2,-1\nB,1,1\n");
        match ingest_peaks(f.path(), false, None) {
            Err(CliError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let f = file("marker,allele,rel\nA,1,0.5\nB,1,1\nA,1,0.5\n");
        match ingest_peaks(f.path(), false, None) {
            Err(CliError::Parse { line, message, .. }) => {
                assert_eq!(line, 4);
                assert!(message.contains("duplicate"));
            }
            other => panic!("{other:?}"),
        }
        let f = file("marker,allele,height\nA,1,1\n");
        assert!(matches!(ingest_peaks(f.path(), false, None), Err(CliError::Parse { line: 1, .. })));
        let f = file("marker,allele,rel\nA,1,1\n");
        assert!(matches!(ingest_peaks(f.path(), false, None), Err(CliError::Data(_))));
    }

    #[test]
    fn round_trip() {
        let f = file("marker,allele,rel\nA,1,0.31\nA,2,0.69000001\nB,9.3,0.2\nB,10,0.3\nB,11,0.5\n");
        let ds = ingest_peaks(f.path(), false, None).unwrap();
        let g = file(&peaks_csv(&ds).unwrap());
        let back = ingest_peaks(g.path(), false, None).unwrap();
        for (a, b) in ds.markers.iter().zip(&back.markers) {
            assert_eq!(a.alleles, b.alleles);
            for (x, y) in a.rel_sizes.iter().zip(&b.rel_sizes) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn frequencies_and_profiles() {
        let f = file("marker,allele,freq\nA,1,2\nA,2,2\nB,7,1\n");
        let t = read_frequencies(f.path()).unwrap();
        assert_eq!(t.get("A", "1").unwrap(), 0.5);
        let f = file("marker,allele,freq\nA,1,2\nA,1,2\n");
        assert!(matches!(read_frequencies(f.path()), Err(CliError::Parse { line: 3, .. })));
        let p = file("marker,allele1,allele2\nA,2,1\n# comment\nB,7,7\n");
        let prof = read_profile(p.path(), "s").unwrap();
        assert_eq!(prof.genotype("A").unwrap().to_string(), "1 2");
        assert!(read_profile(Path::new("/nonexistent/x.csv"), "s").is_err());
    }
}
