// SPDX-License-Identifier: Apache-2.0

//! File formats: profiles in and out, results out.
//!
//! Profiles travel as JSON (`{"n": …, "null_count": …, "prefs": [[…], …]}`)
//! or as CSV with one row per agent (`agent,rank1,rank2,…`, rows may be
//! shorter than the header when lists are truncated). CSV has no cell for
//! the null-object count, so padded profiles are JSON-only. Trading
//! outcomes and core estimates are emitted as JSON, matrices as dense
//! CSV. All writers are deterministic byte for byte.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use ttc_core::{CoreEstimate, PreferenceProfile, ProfileError, TtcOutcome};

/// On-disk profile encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    /// Self-describing object with explicit null count.
    Json,
    /// One row per agent; real objects only.
    Csv,
}

impl FileFormat {
    /// Guesses the format from a path's extension.
    pub fn infer(path: &Path) -> Option<FileFormat> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "json" => Some(FileFormat::Json),
            "csv" => Some(FileFormat::Csv),
            _ => None,
        }
    }
}

/// File and format failures.
#[derive(Debug, thiserror::Error)]
pub enum IoError {
    /// Filesystem access failed.
    #[error("{path}: {source}")]
    File {
        /// Path involved.
        path: String,
        /// Underlying error.
        source: std::io::Error,
    },
    /// JSON did not parse or did not match the schema.
    #[error("{path}: invalid JSON profile: {source}")]
    Json {
        /// Path involved.
        path: String,
        /// Underlying error.
        source: serde_json::Error,
    },
    /// CSV structure violated.
    #[error("{path}: line {line}: {msg}")]
    Malformed {
        /// Path involved.
        path: String,
        /// 1-based line of the offending row.
        line: usize,
        /// What was wrong.
        msg: String,
    },
    /// Parsed data failed profile validation.
    #[error("invalid profile: {0}")]
    Profile(#[from] ProfileError),
    /// CSV has no cell for a null-object count.
    #[error("CSV profiles cannot carry {null_count} null objects; use JSON")]
    CsvNulls {
        /// Null objects in the profile.
        null_count: usize,
    },
    /// Extension gave no format and none was passed.
    #[error("cannot infer a format for {path}; pass --format")]
    UnknownFormat {
        /// Path involved.
        path: String,
    },
}

#[derive(Serialize, Deserialize)]
struct ProfileDto {
    n: usize,
    null_count: usize,
    prefs: Vec<Vec<u32>>,
}

/// Serializes a profile as pretty JSON with a trailing newline.
pub fn profile_to_json(p: &PreferenceProfile) -> String {
    let dto = ProfileDto {
        n: p.n(),
        null_count: p.null_count(),
        prefs: p.lists().to_vec(),
    };
    let mut s = serde_json::to_string_pretty(&dto).expect("profile DTO always serializes");
    s.push('\n');
    s
}

/// Parses a JSON profile; `label` names the source in error messages.
pub fn profile_from_json(text: &str, label: &str) -> Result<PreferenceProfile, IoError> {
    let dto: ProfileDto = serde_json::from_str(text).map_err(|source| IoError::Json {
        path: label.to_string(),
        source,
    })?;
    Ok(PreferenceProfile::new(dto.n, dto.null_count, dto.prefs)?)
}

/// Serializes a profile as CSV. Padded profiles are refused; the format
/// has nowhere to record the null count.
pub fn profile_to_csv(p: &PreferenceProfile) -> Result<String, IoError> {
    if p.null_count() > 0 {
        return Err(IoError::CsvNulls { null_count: p.null_count() });
    }
    let widest = p.lists().iter().map(|l| l.len()).max().unwrap_or(0);
    let mut out = String::from("agent");
    for r in 1..=widest {
        out.push_str(&format!(",rank{r}"));
    }
    out.push('\n');
    for (i, list) in p.lists().iter().enumerate() {
        out.push_str(&format!("{}", i + 1));
        for id in list {
            out.push_str(&format!(",{id}"));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Parses a CSV profile; `label` names the source in error messages.
/// Agents must appear as rows 1..=n in order; rows may be shorter than
/// the header.
pub fn profile_from_csv(text: &str, label: &str) -> Result<PreferenceProfile, IoError> {
    let malformed = |line: usize, msg: String| IoError::Malformed {
        path: label.to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| malformed(1, "empty file; expected an agent,rank1,... header".into()))?;
    if header.split(',').next() != Some("agent") {
        return Err(malformed(1, format!("expected header starting with 'agent', got '{header}'")));
    }

    let mut prefs: Vec<Vec<u32>> = Vec::new();
    for (idx, row) in lines {
        let line = idx + 1;
        if row.trim().is_empty() {
            continue;
        }
        let mut fields = row.split(',');
        let agent_field = fields.next().unwrap_or("");
        let agent: usize = agent_field
            .trim()
            .parse()
            .map_err(|_| malformed(line, format!("agent id '{agent_field}' is not a number")))?;
        if agent != prefs.len() + 1 {
            return Err(malformed(
                line,
                format!("expected agent {}, found agent {agent}; rows must be in order", prefs.len() + 1),
            ));
        }
        let mut list = Vec::new();
        for f in fields {
            let f = f.trim();
            if f.is_empty() {
                continue;
            }
            let id: u32 = f
                .parse()
                .map_err(|_| malformed(line, format!("object id '{f}' is not a number")))?;
            list.push(id);
        }
        prefs.push(list);
    }
    if prefs.is_empty() {
        return Err(malformed(1, "no agent rows; the market has no agents".into()));
    }
    let n = prefs.len();
    Ok(PreferenceProfile::new(n, 0, prefs)?)
}

/// Reads a profile file, inferring the format from the extension when
/// none is passed.
pub fn read_profile(path: &Path, format: Option<FileFormat>) -> Result<PreferenceProfile, IoError> {
    let format = format
        .or_else(|| FileFormat::infer(path))
        .ok_or_else(|| IoError::UnknownFormat { path: path.display().to_string() })?;
    let text = fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })?;
    let label = path.display().to_string();
    match format {
        FileFormat::Json => profile_from_json(&text, &label),
        FileFormat::Csv => profile_from_csv(&text, &label),
    }
}

/// Writes a profile file, inferring the format from the extension when
/// none is passed.
pub fn write_profile(
    path: &Path,
    p: &PreferenceProfile,
    format: Option<FileFormat>,
) -> Result<(), IoError> {
    let format = format
        .or_else(|| FileFormat::infer(path))
        .ok_or_else(|| IoError::UnknownFormat { path: path.display().to_string() })?;
    let text = match format {
        FileFormat::Json => profile_to_json(p),
        FileFormat::Csv => profile_to_csv(p)?,
    };
    fs::write(path, text).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Serialize)]
struct OutcomeDto<'a> {
    allocation: &'a [u32],
    removal_round: &'a [u32],
    cycles: &'a [(u32, Vec<u32>)],
}

/// Serializes a trading outcome as pretty JSON with a trailing newline.
/// Cycles appear as `[round, [agents…]]` pairs.
pub fn outcome_to_json(o: &TtcOutcome) -> String {
    let dto = OutcomeDto {
        allocation: o.allocation().as_slice(),
        removal_round: o.removal_round(),
        cycles: o.cycles(),
    };
    let mut s = serde_json::to_string_pretty(&dto).expect("outcome DTO always serializes");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct EstimateDto<'a> {
    members: &'a [u32],
    scores: &'a [f64],
    mode: &'a str,
    convention: &'a str,
}

/// Serializes a core estimate as pretty JSON with a trailing newline.
pub fn estimate_to_json(e: &CoreEstimate) -> String {
    let dto = EstimateDto {
        members: &e.members,
        scores: &e.scores,
        mode: e.mode.as_str(),
        convention: e.convention.as_str(),
    };
    let mut s = serde_json::to_string_pretty(&dto).expect("estimate DTO always serializes");
    s.push('\n');
    s
}

/// Renders a dense row-major matrix as headerless CSV, one row per line,
/// entries in shortest round-trip decimal form.
pub fn dense_to_csv(n: usize, data: &[f64]) -> String {
    assert_eq!(data.len(), n * n, "dense data must be n*n");
    let mut out = String::new();
    for i in 0..n {
        for j in 0..n {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{}", data[i * n + j]));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ttc_core::{generate_random, normalize_rows, run_ttc, build_scores, NullPlacement};

    fn walkthrough() -> PreferenceProfile {
        PreferenceProfile::new(3, 0, vec![vec![2, 1, 3], vec![1, 2, 3], vec![1, 3, 2]]).unwrap()
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let p = walkthrough();
        let text = profile_to_json(&p);
        let back = profile_from_json(&text, "mem").unwrap();
        assert_eq!(back.lists(), p.lists());
        assert_eq!(back.n(), 3);
        assert_eq!(back.null_count(), 0);
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let p = PreferenceProfile::new(3, 0, vec![vec![2], vec![1, 2, 3], vec![1, 3]]).unwrap();
        let text = profile_to_csv(&p).unwrap();
        assert!(text.starts_with("agent,rank1,rank2,rank3\n"));
        let back = profile_from_csv(&text, "mem").unwrap();
        assert_eq!(back.lists(), p.lists());
    }

    #[test]
    fn csv_refuses_null_padding() {
        let mut p = walkthrough();
        p = p.pad_null(2, NullPlacement::Tail);
        match profile_to_csv(&p) {
            Err(IoError::CsvNulls { null_count: 2 }) => {}
            other => panic!("expected null refusal, got {other:?}"),
        }
        let text = profile_to_json(&p);
        let back = profile_from_json(&text, "mem").unwrap();
        assert_eq!(back.null_count(), 2);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let text = "agent,rank1\n1,2\n3,1\n";
        match profile_from_csv(text, "t.csv") {
            Err(IoError::Malformed { line: 3, msg, .. }) => {
                assert!(msg.contains("expected agent 2"), "{msg}");
            }
            other => panic!("expected order error, got {other:?}"),
        }
        match profile_from_csv("agent,rank1\n1,x\n", "t.csv") {
            Err(IoError::Malformed { line: 2, .. }) => {}
            other => panic!("expected parse error, got {other:?}"),
        }
        match profile_from_csv("agent,rank1\n", "t.csv") {
            Err(IoError::Malformed { line: 1, msg, .. }) => {
                assert!(msg.contains("no agents"), "{msg}");
            }
            other => panic!("expected empty error, got {other:?}"),
        }
        match profile_from_csv("id,rank1\n1,1\n", "t.csv") {
            Err(IoError::Malformed { line: 1, .. }) => {}
            other => panic!("expected header error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_profiles_are_rejected_on_read() {
        let text = "{\"n\": 2, \"null_count\": 0, \"prefs\": [[1, 1], [2]]}";
        match profile_from_json(text, "mem") {
            Err(IoError::Profile(ProfileError::DuplicateId { agent: 1, id: 1 })) => {}
            other => panic!("expected duplicate id, got {other:?}"),
        }
    }

    #[test]
    fn file_round_trip_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let p = generate_random(7, 4, 99).unwrap();
        for name in ["p.json", "p.csv"] {
            let path = dir.path().join(name);
            write_profile(&path, &p, None).unwrap();
            let back = read_profile(&path, None).unwrap();
            assert_eq!(back.lists(), p.lists(), "{name}");
        }
        let odd = dir.path().join("p.txt");
        assert!(matches!(
            write_profile(&odd, &p, None),
            Err(IoError::UnknownFormat { .. })
        ));
        write_profile(&odd, &p, Some(FileFormat::Json)).unwrap();
        let back = read_profile(&odd, Some(FileFormat::Json)).unwrap();
        assert_eq!(back.lists(), p.lists());
    }

    #[test]
    fn missing_file_is_a_file_error() {
        let r = read_profile(Path::new("/nonexistent/p.json"), None);
        assert!(matches!(r, Err(IoError::File { .. })));
    }

    #[test]
    fn outcome_json_shape() {
        let o = run_ttc(&walkthrough()).unwrap();
        let text = outcome_to_json(&o);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["allocation"], serde_json::json!([2, 1, 3]));
        assert_eq!(v["removal_round"], serde_json::json!([1, 1, 2]));
        assert_eq!(v["cycles"], serde_json::json!([[1, [1, 2]], [2, [3]]]));
    }

    #[test]
    fn estimate_json_shape() {
        use ttc_core::{identify_core_topk, right_singular_power, Convention, SolverOptions};
        let m = normalize_rows(&build_scores(&walkthrough()).unwrap()).unwrap();
        let s = right_singular_power(&m, &SolverOptions::default()).unwrap();
        let est = identify_core_topk(&s, Convention::ExampleConsistent, 1).unwrap();
        let text = estimate_to_json(&est);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["members"], serde_json::json!([3]));
        assert_eq!(v["mode"], "right-singular");
        assert_eq!(v["convention"], "example");
        assert_eq!(v["scores"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn matrix_csv_is_exact() {
        let m = normalize_rows(&build_scores(&walkthrough()).unwrap()).unwrap();
        let text = dense_to_csv(m.n(), &m.to_dense());
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows.len(), 3);
        for (i, row) in rows.iter().enumerate() {
            let got: Vec<f64> = row.split(',').map(|f| f.parse().unwrap()).collect();
            for (j, x) in got.iter().enumerate() {
                assert_eq!(*x, m.entry(i, j), "entry ({i},{j}) round-trips");
            }
        }
    }
}
