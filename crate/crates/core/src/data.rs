//! Panel data: outcome taxonomy, observations and CSV ingestion.
//!
//! The long-format CSV has one row per (subject, session):
//!
//! ```text
//! subject_id,session,age,position,post_season,y1,...,y10
//! ```
//!
//! An empty outcome cell means missing. Speed outcomes are expected on the
//! log scale already; nothing here transforms values.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_COVARIATES: usize = 4;
pub const COVARIATE_NAMES: [&str; N_COVARIATES] =
    ["post_season", "forward", "midfielder", "defender"];

pub const MAX_FACETS: usize = 8;

const MIN_AGE: f64 = 5.0;
const MAX_AGE: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Count,
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Accuracy,
    Speed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadingConstraint {
    FixedToOne,
    Free,
}

/// One measured outcome and where it sits in the measurement model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSpec {
    pub label: String,
    #[serde(default)]
    pub description: String,
    pub kind: OutcomeKind,
    pub channel: Channel,
    /// 1-based facet index of the latent curve this outcome loads on.
    pub facet: usize,
    pub loading: LoadingConstraint,
}

impl OutcomeSpec {
    fn new(
        label: &str,
        description: &str,
        kind: OutcomeKind,
        channel: Channel,
        facet: usize,
        loading: LoadingConstraint,
    ) -> Self {
        Self {
            label: label.to_string(),
            description: description.to_string(),
            kind,
            channel,
            facet,
            loading,
        }
    }

    pub fn is_count(&self) -> bool {
        self.kind == OutcomeKind::Count
    }
}

/// The ten-outcome battery: determination, response inhibition and choice
/// response tasks on the generic facet, Helix and Footbonaut on the
/// soccer-specific facet.
pub fn default_outcomes() -> Vec<OutcomeSpec> {
    use Channel::*;
    use LoadingConstraint::*;
    use OutcomeKind::*;
    vec![
        OutcomeSpec::new("y1", "determination: correct answers", Count, Accuracy, 1, FixedToOne),
        OutcomeSpec::new("y2", "determination: log median response time", Continuous, Speed, 1, Free),
        OutcomeSpec::new("y3", "response inhibition: log SSRT", Continuous, Speed, 1, Free),
        OutcomeSpec::new("y4", "response inhibition: log mean response time", Continuous, Speed, 1, Free),
        OutcomeSpec::new("y5", "response inhibition: correct answers", Count, Accuracy, 1, Free),
        OutcomeSpec::new("y6", "choice response: log mean response time (congruent)", Continuous, Speed, 1, Free),
        OutcomeSpec::new("y7", "choice response: log mean response time (incongruent)", Continuous, Speed, 1, Free),
        OutcomeSpec::new("y8", "helix: correct answers", Count, Accuracy, 2, FixedToOne),
        OutcomeSpec::new("y9", "footbonaut: correct answers", Count, Accuracy, 2, Free),
        OutcomeSpec::new("y10", "footbonaut: log mean response time", Continuous, Speed, 2, Free),
    ]
}

/// Checks the taxonomy and returns the number of facets.
pub fn validate_outcomes(outcomes: &[OutcomeSpec]) -> Result<usize> {
    if outcomes.is_empty() {
        return Err(Error::validation("at least one outcome is required"));
    }
    if outcomes.len() > 64 {
        return Err(Error::validation("at most 64 outcomes are supported"));
    }
    let mut labels = HashSet::new();
    for o in outcomes {
        if o.label.is_empty() || o.label.contains(',') || o.label.contains('.') {
            return Err(Error::validation(format!(
                "outcome label {:?} must be non-empty without ',' or '.'",
                o.label
            )));
        }
        if !labels.insert(o.label.as_str()) {
            return Err(Error::validation(format!("duplicate outcome label {}", o.label)));
        }
        if o.facet == 0 {
            return Err(Error::validation(format!("outcome {} has facet 0; facets are 1-based", o.label)));
        }
    }
    let n_facets = outcomes.iter().map(|o| o.facet).max().unwrap_or(0);
    if n_facets > MAX_FACETS {
        return Err(Error::validation(format!("at most {MAX_FACETS} facets are supported, got {n_facets}")));
    }
    for f in 1..=n_facets {
        let fixed = outcomes
            .iter()
            .filter(|o| o.facet == f && o.loading == LoadingConstraint::FixedToOne)
            .count();
        if fixed != 1 {
            return Err(Error::validation(format!(
                "facet {f} must have exactly one outcome with a loading fixed to one, found {fixed}"
            )));
        }
    }
    Ok(n_facets)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Position {
    Forward,
    Midfielder,
    Defender,
    Goalkeeper,
}

impl Position {
    pub const ALL: [Position; 4] = [
        Position::Forward,
        Position::Midfielder,
        Position::Defender,
        Position::Goalkeeper,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Position::Forward => "forward",
            Position::Midfielder => "midfielder",
            Position::Defender => "defender",
            Position::Goalkeeper => "goalkeeper",
        }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Position {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "forward" => Ok(Position::Forward),
            "midfielder" => Ok(Position::Midfielder),
            "defender" => Ok(Position::Defender),
            "goalkeeper" => Ok(Position::Goalkeeper),
            other => Err(format!(
                "unknown position {other:?} (expected forward, midfielder, defender or goalkeeper)"
            )),
        }
    }
}

/// One assessment occasion of one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Session label from the source file.
    pub session: u32,
    pub age: f64,
    pub position: Position,
    pub post_season: bool,
    /// One entry per outcome; `None` is missing.
    pub values: Vec<Option<f64>>,
}

impl Observation {
    pub fn covariates(&self) -> [f64; N_COVARIATES] {
        encode_covariates(self.post_season, self.position)
    }
}

/// Covariate row `(post_season, forward, midfielder, defender)`; goalkeeper
/// is the reference level.
pub fn encode_covariates(post_season: bool, position: Position) -> [f64; N_COVARIATES] {
    let flag = |p| if position == p { 1.0 } else { 0.0 };
    [
        if post_season { 1.0 } else { 0.0 },
        flag(Position::Forward),
        flag(Position::Midfielder),
        flag(Position::Defender),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subject {
    pub id: String,
    /// Occasions in strictly increasing age order; the index is the occasion
    /// number `t`.
    pub observations: Vec<Observation>,
}

/// A validated panel. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    outcomes: Vec<OutcomeSpec>,
    subjects: Vec<Subject>,
}

impl Dataset {
    /// Validates and sorts occasions by age. Occasions with no observed
    /// outcome are dropped.
    pub fn new(outcomes: Vec<OutcomeSpec>, subjects: Vec<Subject>) -> Result<Self> {
        validate_outcomes(&outcomes)?;
        let d = outcomes.len();
        let mut ids = HashSet::new();
        let mut kept = Vec::with_capacity(subjects.len());
        for mut s in subjects {
            if !ids.insert(s.id.clone()) {
                return Err(Error::validation(format!("duplicate subject id {}", s.id)));
            }
            for o in &s.observations {
                check_observation(o, &outcomes).map_err(|m| {
                    Error::validation(format!("subject {} session {}: {m}", s.id, o.session))
                })?;
            }
            s.observations.retain(|o| o.values.iter().any(Option::is_some));
            s.observations
                .sort_by(|a, b| a.age.total_cmp(&b.age));
            if let Some(w) = s.observations.windows(2).find(|w| w[0].age >= w[1].age) {
                return Err(Error::validation(format!(
                    "subject {} has two occasions at age {}",
                    s.id, w[0].age
                )));
            }
            let mut sessions = HashSet::new();
            for o in &s.observations {
                if !sessions.insert(o.session) {
                    return Err(Error::validation(format!(
                        "subject {} has duplicate session {}",
                        s.id, o.session
                    )));
                }
                debug_assert_eq!(o.values.len(), d);
            }
            if !s.observations.is_empty() {
                kept.push(s);
            }
        }
        if kept.is_empty() {
            return Err(Error::validation("dataset has no observed occasions"));
        }
        Ok(Self {
            outcomes,
            subjects: kept,
        })
    }

    pub fn outcomes(&self) -> &[OutcomeSpec] {
        &self.outcomes
    }

    pub fn subjects(&self) -> &[Subject] {
        &self.subjects
    }

    pub fn n_outcomes(&self) -> usize {
        self.outcomes.len()
    }

    pub fn n_occasions(&self) -> usize {
        self.subjects.iter().map(|s| s.observations.len()).sum()
    }

    /// Iterates over every occasion as `(subject index, observation)`.
    pub fn occasions(&self) -> impl Iterator<Item = (usize, &Observation)> {
        self.subjects
            .iter()
            .enumerate()
            .flat_map(|(i, s)| s.observations.iter().map(move |o| (i, o)))
    }

    /// Missingness mask in occasion order; `true` means absent.
    pub fn missing_mask(&self) -> Vec<Vec<bool>> {
        self.occasions()
            .map(|(_, o)| o.values.iter().map(Option::is_none).collect())
            .collect()
    }

    pub fn parse_csv<R: Read>(reader: R, outcomes: &[OutcomeSpec]) -> Result<Self> {
        parse_dataset(reader, outcomes)
    }

    pub fn read_csv(path: &Path, outcomes: &[OutcomeSpec]) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        parse_dataset(std::io::BufReader::new(f), outcomes)
    }

    /// Writes the dataset back in the input schema.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = ["subject_id", "session", "age", "position", "post_season"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(self.outcomes.iter().map(|o| o.label.clone()));
        w.write_record(&header)?;
        for s in &self.subjects {
            for o in &s.observations {
                let mut rec = vec![
                    s.id.clone(),
                    o.session.to_string(),
                    o.age.to_string(),
                    o.position.to_string(),
                    if o.post_season { "1" } else { "0" }.to_string(),
                ];
                for (v, spec) in o.values.iter().zip(&self.outcomes) {
                    rec.push(match v {
                        None => String::new(),
                        Some(x) if spec.is_count() => format!("{}", *x as i64),
                        Some(x) => x.to_string(),
                    });
                }
                w.write_record(&rec)?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// Returns a copy with a subset of cells removed, keeping subject and
    /// occasion structure. `drop(subject, occasion, outcome)` decides each
    /// observed cell. Occasions left empty are dropped.
    pub fn masked(&self, mut drop: impl FnMut(usize, usize, usize) -> bool) -> Result<Self> {
        let subjects = self
            .subjects
            .iter()
            .enumerate()
            .map(|(i, s)| Subject {
                id: s.id.clone(),
                observations: s
                    .observations
                    .iter()
                    .enumerate()
                    .map(|(t, o)| Observation {
                        values: o
                            .values
                            .iter()
                            .enumerate()
                            .map(|(d, v)| v.filter(|_| !drop(i, t, d)))
                            .collect(),
                        ..o.clone()
                    })
                    .collect(),
            })
            .collect();
        Dataset::new(self.outcomes.clone(), subjects)
    }
}

fn check_observation(o: &Observation, outcomes: &[OutcomeSpec]) -> Result<(), String> {
    if !o.age.is_finite() || o.age <= MIN_AGE || o.age >= MAX_AGE {
        return Err(format!("age {} outside ({MIN_AGE}, {MAX_AGE})", o.age));
    }
    if o.values.len() != outcomes.len() {
        return Err(format!(
            "{} outcome values but {} outcomes configured",
            o.values.len(),
            outcomes.len()
        ));
    }
    for (v, spec) in o.values.iter().zip(outcomes) {
        if let Some(x) = v {
            if !x.is_finite() {
                return Err(format!("{} is not finite", spec.label));
            }
            if spec.is_count() && (*x < 0.0 || x.fract() != 0.0) {
                return Err(format!(
                    "{} is a count outcome but holds {x}; counts must be non-negative integers",
                    spec.label
                ));
            }
        }
    }
    Ok(())
}

const FIXED_COLUMNS: [&str; 5] = ["subject_id", "session", "age", "position", "post_season"];

/// Parses the long-format panel CSV. Errors carry the 1-based file line.
pub fn parse_dataset<R: Read>(reader: R, outcomes: &[OutcomeSpec]) -> Result<Dataset> {
    validate_outcomes(outcomes)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let n_fixed = FIXED_COLUMNS.len();
    for (i, name) in FIXED_COLUMNS.iter().enumerate() {
        if header.get(i) != Some(*name) {
            return Err(Error::Parse {
                row: 1,
                message: format!(
                    "column {} must be {name:?}, found {:?}",
                    i + 1,
                    header.get(i).unwrap_or("")
                ),
            });
        }
    }
    let data_cols = header.len().saturating_sub(n_fixed);
    if data_cols != outcomes.len() {
        return Err(Error::Parse {
            row: 1,
            message: format!(
                "file has {data_cols} outcome columns but the configuration defines {} outcomes",
                outcomes.len()
            ),
        });
    }
    for (j, spec) in outcomes.iter().enumerate() {
        let got = &header[n_fixed + j];
        if got != spec.label {
            return Err(Error::Parse {
                row: 1,
                message: format!(
                    "outcome column {} is {got:?} but the configuration expects {:?}",
                    j + 1,
                    spec.label
                ),
            });
        }
    }

    let mut order: Vec<String> = Vec::new();
    let mut by_id: HashMap<String, Vec<Observation>> = HashMap::new();
    let mut seen: HashSet<(String, u32)> = HashSet::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec.position().map(|p| p.line()).unwrap_or(0);
        let err = |message: String| Error::Parse { row, message };
        if rec.len() != header.len() {
            return Err(err(format!(
                "expected {} fields, found {}",
                header.len(),
                rec.len()
            )));
        }
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(err("empty subject_id".into()));
        }
        let session: u32 = rec[1]
            .parse()
            .map_err(|_| err(format!("session {:?} is not a non-negative integer", &rec[1])))?;
        let age: f64 = rec[2]
            .parse()
            .map_err(|_| err(format!("age {:?} is not a number", &rec[2])))?;
        if !age.is_finite() || age <= MIN_AGE || age >= MAX_AGE {
            return Err(err(format!("age {age} outside ({MIN_AGE}, {MAX_AGE})")));
        }
        let position: Position = rec[3].parse().map_err(err)?;
        let post_season = match &rec[4] {
            "0" => false,
            "1" => true,
            other => return Err(err(format!("post_season {other:?} must be 0 or 1"))),
        };
        let mut values = Vec::with_capacity(outcomes.len());
        for (j, spec) in outcomes.iter().enumerate() {
            let cell = &rec[n_fixed + j];
            if cell.is_empty() {
                values.push(None);
                continue;
            }
            let x: f64 = cell
                .parse()
                .map_err(|_| err(format!("{} value {cell:?} is not a number", spec.label)))?;
            if !x.is_finite() {
                return Err(err(format!("{} value {cell:?} is not finite", spec.label)));
            }
            if spec.is_count() && (x < 0.0 || x.fract() != 0.0) {
                return Err(err(format!(
                    "{} value {cell} must be a non-negative integer count",
                    spec.label
                )));
            }
            values.push(Some(x));
        }
        if !seen.insert((id.clone(), session)) {
            return Err(err(format!("duplicate (subject_id, session) = ({id}, {session})")));
        }
        if !by_id.contains_key(&id) {
            order.push(id.clone());
        }
        by_id.entry(id).or_default().push(Observation {
            session,
            age,
            position,
            post_season,
            values,
        });
    }
    let subjects = order
        .into_iter()
        .map(|id| {
            let observations = by_id.remove(&id).unwrap_or_default();
            Subject { id, observations }
        })
        .collect();
    Dataset::new(outcomes.to_vec(), subjects)
}

/// One row of the per-outcome data summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeSummary {
    pub variable: String,
    pub outcome: String,
    pub mean_observations_per_subject: f64,
    pub proportion_missing: f64,
}

/// Mean observed cells per subject and the proportion of missing cells,
/// per outcome.
pub fn summarize(dataset: &Dataset) -> Result<Vec<OutcomeSummary>> {
    let n_subjects = dataset.subjects.len();
    let n_occ = dataset.n_occasions();
    if n_subjects == 0 || n_occ == 0 {
        return Err(Error::validation("cannot summarise an empty dataset"));
    }
    let mut observed = vec![0usize; dataset.n_outcomes()];
    for (_, o) in dataset.occasions() {
        for (c, v) in observed.iter_mut().zip(&o.values) {
            if v.is_some() {
                *c += 1;
            }
        }
    }
    Ok(dataset
        .outcomes
        .iter()
        .zip(observed)
        .map(|(spec, k)| OutcomeSummary {
            variable: spec.label.clone(),
            outcome: spec.description.clone(),
            mean_observations_per_subject: k as f64 / n_subjects as f64,
            proportion_missing: (n_occ - k) as f64 / n_occ as f64,
        })
        .collect())
}

pub fn write_summary_csv<W: Write>(rows: &[OutcomeSummary], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> String {
        "subject_id,session,age,position,post_season,y1,y2,y3,y4,y5,y6,y7,y8,y9,y10\n".into()
    }

    #[test]
    fn three_rows_one_subject() {
        let csv = header()
            + "p1,2,10.6,forward,1,120,0.1,-1.2,-0.6,80,,,25,20,1.0\n\
               p1,1,10.1,forward,0,118,0.2,-1.1,-0.5,79,,,24,21,1.1\n\
               p1,3,11.2,forward,0,121,0.0,-1.3,-0.7,82,-0.5,-0.4,26,22,0.9\n";
        let ds = Dataset::parse_csv(csv.as_bytes(), &default_outcomes()).unwrap();
        assert_eq!(ds.subjects().len(), 1);
        let obs = &ds.subjects()[0].observations;
        assert_eq!(obs.len(), 3);
        // occasion order follows age, not file order
        assert_eq!(obs.iter().map(|o| o.session).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert_eq!(obs[0].values[5], None);
        assert_eq!(obs[2].values[5], Some(-0.5));
    }

    #[test]
    fn unknown_position_names_row_and_value() {
        let csv = header() + "p1,1,10.1,forward,0,1,,,,,,,,,\np1,2,10.6,striker,0,1,,,,,,,,,\n";
        let err = Dataset::parse_csv(csv.as_bytes(), &default_outcomes()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 3"), "{msg}");
        assert!(msg.contains("striker"), "{msg}");
    }

    #[test]
    fn rejects_bad_rows() {
        let outs = default_outcomes();
        let neg = header() + "p1,1,10.1,forward,0,-3,,,,,,,,,\n";
        assert!(matches!(
            Dataset::parse_csv(neg.as_bytes(), &outs),
            Err(Error::Parse { row: 2, .. })
        ));
        let frac = header() + "p1,1,10.1,forward,0,3.5,,,,,,,,,\n";
        assert!(Dataset::parse_csv(frac.as_bytes(), &outs).is_err());
        let dup = header() + "p1,1,10.1,forward,0,3,,,,,,,,,\np1,1,10.6,forward,0,3,,,,,,,,,\n";
        let e = Dataset::parse_csv(dup.as_bytes(), &outs).unwrap_err();
        assert!(e.to_string().contains("row 3") && e.to_string().contains("duplicate"));
        let badage = header() + "p1,1,abc,forward,0,3,,,,,,,,,\n";
        assert!(Dataset::parse_csv(badage.as_bytes(), &outs).is_err());
        let oldage = header() + "p1,1,45,forward,0,3,,,,,,,,,\n";
        assert!(Dataset::parse_csv(oldage.as_bytes(), &outs).is_err());
        let season = header() + "p1,1,12,forward,2,3,,,,,,,,,\n";
        assert!(Dataset::parse_csv(season.as_bytes(), &outs).is_err());
        let short = header() + "p1,1,12,forward,0,3,,,\n";
        assert!(Dataset::parse_csv(short.as_bytes(), &outs).is_err());
    }

    #[test]
    fn outcome_count_mismatch_is_named() {
        let csv = "subject_id,session,age,position,post_season,y1,y2\np1,1,11,forward,0,3,0.1\n";
        let err = Dataset::parse_csv(csv.as_bytes(), &default_outcomes()).unwrap_err();
        assert!(err.to_string().contains("2 outcome columns"), "{err}");
        assert!(err.to_string().contains("10 outcomes"), "{err}");
    }

    #[test]
    fn covariate_encoding() {
        assert_eq!(encode_covariates(false, Position::Goalkeeper), [0.0, 0.0, 0.0, 0.0]);
        assert_eq!(encode_covariates(true, Position::Forward), [1.0, 1.0, 0.0, 0.0]);
        assert_eq!(encode_covariates(false, Position::Defender), [0.0, 0.0, 0.0, 1.0]);
        let mut all = HashSet::new();
        for s in [false, true] {
            for p in Position::ALL {
                let v = encode_covariates(s, p);
                all.insert(v.map(|x| x as u8));
            }
        }
        assert_eq!(all.len(), 8);
    }

    #[test]
    fn summary_single_cell() {
        let csv = header() + "p1,1,11,goalkeeper,0,130,,,,,,,,,\n";
        let ds = Dataset::parse_csv(csv.as_bytes(), &default_outcomes()).unwrap();
        let s = summarize(&ds).unwrap();
        assert_eq!(s[0].mean_observations_per_subject, 1.0);
        assert_eq!(s[0].proportion_missing, 0.0);
        for r in &s[1..] {
            assert_eq!(r.proportion_missing, 1.0);
            assert_eq!(r.mean_observations_per_subject, 0.0);
        }
        let total: f64 = s.iter().map(|r| r.proportion_missing).sum::<f64>() / 10.0;
        assert!((total - 0.9).abs() < 1e-12);
    }

    #[test]
    fn fully_observed_summary_is_zero() {
        let csv = header()
            + "a,1,11,goalkeeper,0,130,0,0,0,80,0,0,20,20,1\n\
               b,1,12,forward,1,131,0,0,0,81,0,0,21,21,1\n";
        let ds = Dataset::parse_csv(csv.as_bytes(), &default_outcomes()).unwrap();
        assert!(summarize(&ds).unwrap().iter().all(|r| r.proportion_missing == 0.0));
    }

    #[test]
    fn empty_occasions_are_dropped() {
        let csv = header() + "a,1,11,goalkeeper,0,,,,,,,,,,\na,2,11.5,goalkeeper,0,3,,,,,,,,,\n";
        let ds = Dataset::parse_csv(csv.as_bytes(), &default_outcomes()).unwrap();
        assert_eq!(ds.n_occasions(), 1);
    }

    #[test]
    fn taxonomy_checks() {
        let outs = default_outcomes();
        assert_eq!(validate_outcomes(&outs).unwrap(), 2);
        let mut bad = outs.clone();
        bad[1].loading = LoadingConstraint::FixedToOne;
        assert!(validate_outcomes(&bad).is_err());
        let counts: Vec<_> = outs.iter().filter(|o| o.is_count()).map(|o| o.label.as_str()).collect();
        assert_eq!(counts, ["y1", "y5", "y8", "y9"]);
    }
}
