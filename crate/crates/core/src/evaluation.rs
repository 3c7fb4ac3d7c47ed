//! Human ratings and the arm-comparison statistics computed from them.
//!
//! Raters score each explanation 1–5 on a set of criteria. For every
//! criterion the report gives per-arm mean, sample standard deviation and
//! standard error, a two-sided Welch t-test, and Cohen's d (pooled standard
//! deviation, logic-scaffolding minus zero-shot). |d| > 0.8 is flagged large.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::explanation::Method;

pub const LARGE_EFFECT: f64 = 0.8;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("effect size undefined: pooled standard deviation is zero")]
    UndefinedEffect,
    #[error("ratings log: {0}")]
    Io(String),
}

impl From<io::Error> for EvalError {
    fn from(e: io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

/// Ordered, duplicate-free list of rating criteria.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct CriterionSet(Vec<String>);

impl CriterionSet {
    pub fn new<I, S>(names: I) -> Result<Self, EvalError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(|s| s.into().trim().to_string()).collect();
        if names.is_empty() {
            return Err(EvalError::Contract("criterion set is empty".into()));
        }
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() {
                return Err(EvalError::Contract("empty criterion name".into()));
            }
            if names[..i].contains(n) {
                return Err(EvalError::Contract(format!("duplicate criterion `{n}`")));
            }
        }
        Ok(Self(names))
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.iter().any(|n| n == name)
    }
}

impl Default for CriterionSet {
    fn default() -> Self {
        Self(
            ["factuality", "personalization", "readability", "proper_utterance"]
                .map(String::from)
                .to_vec(),
        )
    }
}

impl TryFrom<Vec<String>> for CriterionSet {
    type Error = EvalError;
    fn try_from(v: Vec<String>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<CriterionSet> for Vec<String> {
    fn from(c: CriterionSet) -> Self {
        c.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub explanation_id: String,
    pub rater_id: String,
    pub criterion: String,
    pub score: u8,
    pub timestamp: DateTime<Utc>,
    /// Arm that produced the explanation; filled in by the store from its
    /// explanation registry so the log is self-describing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
}

impl RatingRecord {
    pub fn new(
        explanation_id: impl Into<String>,
        rater_id: impl Into<String>,
        criterion: impl Into<String>,
        score: u8,
    ) -> Self {
        Self {
            explanation_id: explanation_id.into(),
            rater_id: rater_id.into(),
            criterion: criterion.into(),
            score,
            timestamp: Utc::now(),
            method: None,
        }
    }

    fn key(&self) -> (String, String, String) {
        (
            self.explanation_id.clone(),
            self.rater_id.clone(),
            self.criterion.clone(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Acknowledgment {
    pub replaced: bool,
    pub count: usize,
}

/// Ratings keyed by (explanation, rater, criterion), last write wins.
/// Optionally backed by an append-only JSON-lines log.
#[derive(Debug)]
pub struct RatingStore {
    criteria: CriterionSet,
    explanations: BTreeMap<String, Method>,
    ratings: BTreeMap<(String, String, String), RatingRecord>,
    log: Option<(PathBuf, BufWriter<File>)>,
}

impl RatingStore {
    pub fn in_memory(criteria: CriterionSet) -> Self {
        Self {
            criteria,
            explanations: BTreeMap::new(),
            ratings: BTreeMap::new(),
            log: None,
        }
    }

    /// Opens (creating if needed) a ratings log, replaying existing lines.
    /// Records carrying a `method` register their explanation.
    pub fn open(path: impl AsRef<Path>, criteria: CriterionSet) -> Result<Self, EvalError> {
        let path = path.as_ref().to_path_buf();
        let mut store = Self::in_memory(criteria);
        if path.exists() {
            for rec in read_ratings_log(&path)? {
                store.apply(rec);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        store.log = Some((path, BufWriter::new(file)));
        Ok(store)
    }

    /// Builds a store from already-parsed records without validation against
    /// a registry (used for offline reporting).
    pub fn from_records(records: impl IntoIterator<Item = RatingRecord>, criteria: CriterionSet) -> Self {
        let mut store = Self::in_memory(criteria);
        for rec in records {
            store.apply(rec);
        }
        store
    }

    fn apply(&mut self, rec: RatingRecord) -> bool {
        if let Some(m) = rec.method {
            self.explanations.entry(rec.explanation_id.clone()).or_insert(m);
        }
        self.ratings.insert(rec.key(), rec).is_some()
    }

    pub fn register_explanation(&mut self, id: impl Into<String>, method: Method) {
        self.explanations.insert(id.into(), method);
    }

    pub fn method_of(&self, explanation_id: &str) -> Option<Method> {
        self.explanations.get(explanation_id).copied()
    }

    pub fn criteria(&self) -> &CriterionSet {
        &self.criteria
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &RatingRecord> {
        self.ratings.values()
    }

    pub fn get(&self, explanation_id: &str, rater_id: &str, criterion: &str) -> Option<&RatingRecord> {
        self.ratings
            .get(&(explanation_id.to_string(), rater_id.to_string(), criterion.to_string()))
    }

    pub fn record_rating(&mut self, mut rating: RatingRecord) -> Result<Acknowledgment, EvalError> {
        if !(1..=5).contains(&rating.score) {
            return Err(EvalError::Contract(format!("score {} outside 1..=5", rating.score)));
        }
        if !self.criteria.contains(&rating.criterion) {
            return Err(EvalError::Contract(format!("unknown criterion `{}`", rating.criterion)));
        }
        if rating.rater_id.trim().is_empty() {
            return Err(EvalError::Contract("empty rater id".into()));
        }
        let method = self
            .method_of(&rating.explanation_id)
            .ok_or_else(|| EvalError::Contract(format!("unknown explanation `{}`", rating.explanation_id)))?;
        rating.method = Some(method);
        if let Some((_, w)) = &mut self.log {
            serde_json::to_writer(&mut *w, &rating).map_err(|e| EvalError::Io(e.to_string()))?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        let replaced = self.apply(rating);
        Ok(Acknowledgment {
            replaced,
            count: self.ratings.len(),
        })
    }

    /// Rewrites the log with one line per live key.
    pub fn compact(&mut self) -> Result<(), EvalError> {
        let Some((path, _)) = &self.log else {
            return Ok(());
        };
        let path = path.clone();
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        {
            let mut w = BufWriter::new(tmp.as_file_mut());
            for rec in self.ratings.values() {
                serde_json::to_writer(&mut w, rec).map_err(|e| EvalError::Io(e.to_string()))?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
        tmp.persist(&path).map_err(|e| EvalError::Io(e.to_string()))?;
        let file = OpenOptions::new().append(true).open(&path)?;
        self.log = Some((path, BufWriter::new(file)));
        Ok(())
    }

    pub fn report(&self) -> StatsReport {
        build_stats_report(self.ratings.values(), &self.criteria)
    }
}

pub fn read_ratings_log(path: impl AsRef<Path>) -> Result<Vec<RatingRecord>, EvalError> {
    let text = std::fs::read_to_string(path.as_ref())?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| EvalError::Io(format!("line {}: {e}", i + 1)))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub n: usize,
    pub mean: f64,
    pub sample_sd: Option<f64>,
    pub sem: Option<f64>,
}

pub fn mean_and_sem(scores: &[f64]) -> Result<GroupSummary, EvalError> {
    if scores.is_empty() {
        return Err(EvalError::Contract("no scores".into()));
    }
    let n = scores.len();
    let mean = scores.iter().sum::<f64>() / n as f64;
    let (sample_sd, sem) = if n >= 2 {
        let var = scores.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        (Some(sd), Some(sd / (n as f64).sqrt()))
    } else {
        (None, None)
    };
    Ok(GroupSummary {
        n,
        mean,
        sample_sd,
        sem,
    })
}

fn sample_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p_two_sided: f64,
}

/// Welch's unequal-variance two-sample t-test.
pub fn t_test_two_sample(a: &[f64], b: &[f64]) -> Result<TTest, EvalError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(EvalError::Contract("each group needs at least two scores".into()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, va) = sample_variance(a);
    let (mb, vb) = sample_variance(b);
    let (qa, qb) = (va / na, vb / nb);
    let se2 = qa + qb;
    if se2 == 0.0 {
        // Both groups constant: no spread to scale by.
        let df = na + nb - 2.0;
        return Ok(if ma == mb {
            TTest {
                t: 0.0,
                df,
                p_two_sided: 1.0,
            }
        } else {
            TTest {
                t: (ma - mb).signum() * f64::INFINITY,
                df,
                p_two_sided: 0.0,
            }
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    Ok(TTest {
        t,
        df,
        p_two_sided: student_t_two_sided_p(t, df),
    })
}

/// Cohen's d with the pooled standard deviation; positive when `a` scores higher.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(EvalError::Contract("each group needs at least two scores".into()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, va) = sample_variance(a);
    let (mb, vb) = sample_variance(b);
    let pooled = (((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0)).sqrt();
    if pooled == 0.0 {
        return Err(EvalError::UndefinedEffect);
    }
    Ok((ma - mb) / pooled)
}

/// P(|T| >= |t|) for Student's t with `df` degrees of freedom:
/// I_{df/(df+t²)}(df/2, 1/2).
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    if t == 0.0 {
        return 1.0;
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// ln Γ(x) for x > 0 (Lanczos, g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized incomplete beta I_x(a, b), continued fraction (modified Lentz).
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 10_000;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionStatus {
    Complete,
    Incomplete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionStats {
    pub criterion: String,
    pub zero_shot: Option<GroupSummary>,
    pub logic_scaffolding: Option<GroupSummary>,
    pub t_statistic: Option<f64>,
    pub degrees_of_freedom: Option<f64>,
    pub p_value: Option<f64>,
    pub cohens_d: Option<f64>,
    pub large_effect: bool,
    pub status: CriterionStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub criteria: Vec<CriterionStats>,
    /// Ratings whose explanation arm was unknown and therefore not counted.
    pub unassigned_ratings: usize,
}

impl StatsReport {
    pub fn get(&self, criterion: &str) -> Option<&CriterionStats> {
        self.criteria.iter().find(|c| c.criterion == criterion)
    }

    pub fn large_effects(&self) -> Vec<&str> {
        self.criteria
            .iter()
            .filter(|c| c.large_effect)
            .map(|c| c.criterion.as_str())
            .collect()
    }
}

pub fn build_stats_report<'a>(
    records: impl IntoIterator<Item = &'a RatingRecord>,
    criteria: &CriterionSet,
) -> StatsReport {
    let mut groups: BTreeMap<(&str, Method), Vec<f64>> = BTreeMap::new();
    let mut unassigned = 0;
    for r in records {
        match r.method {
            Some(m) if criteria.contains(&r.criterion) => {
                groups.entry((r.criterion.as_str(), m)).or_default().push(r.score as f64);
            }
            Some(_) => {}
            None => unassigned += 1,
        }
    }

    let criteria = criteria
        .names()
        .iter()
        .map(|name| {
            let zs = groups.get(&(name.as_str(), Method::ZeroShot)).map(Vec::as_slice).unwrap_or(&[]);
            let ls = groups
                .get(&(name.as_str(), Method::LogicScaffolding))
                .map(Vec::as_slice)
                .unwrap_or(&[]);
            let mut stats = CriterionStats {
                criterion: name.clone(),
                zero_shot: mean_and_sem(zs).ok(),
                logic_scaffolding: mean_and_sem(ls).ok(),
                t_statistic: None,
                degrees_of_freedom: None,
                p_value: None,
                cohens_d: None,
                large_effect: false,
                status: CriterionStatus::Incomplete,
                note: None,
            };
            if zs.len() < 2 || ls.len() < 2 {
                stats.note = Some(format!(
                    "need at least 2 ratings per arm (zero_shot {}, logic_scaffolding {})",
                    zs.len(),
                    ls.len()
                ));
                return stats;
            }
            let tt = t_test_two_sample(ls, zs).expect("group sizes checked");
            stats.t_statistic = Some(tt.t);
            stats.degrees_of_freedom = Some(tt.df);
            stats.p_value = Some(tt.p_two_sided);
            stats.status = CriterionStatus::Complete;
            match cohens_d(ls, zs) {
                Ok(d) => {
                    stats.cohens_d = Some(d);
                    stats.large_effect = d.abs() > LARGE_EFFECT;
                }
                Err(e) => stats.note = Some(e.to_string()),
            }
            stats
        })
        .collect();

    StatsReport {
        criteria,
        unassigned_ratings: unassigned,
    }
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.prec$}"))
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<18} {:>4} {:>6} {:>6} | {:>4} {:>6} {:>6} | {:>8} {:>7} {:>9} {:>7}  large",
            "criterion", "n_zs", "mean", "sem", "n_ls", "mean", "sem", "t", "df", "p", "d"
        )?;
        for c in &self.criteria {
            let group = |g: &Option<GroupSummary>| match g {
                Some(g) => format!("{:>4} {:>6.3} {:>6}", g.n, g.mean, opt(g.sem, 3)),
                None => format!("{:>4} {:>6} {:>6}", 0, "-", "-"),
            };
            writeln!(
                f,
                "{:<18} {} | {} | {:>8} {:>7} {:>9} {:>7}  {}",
                c.criterion,
                group(&c.zero_shot),
                group(&c.logic_scaffolding),
                opt(c.t_statistic, 3),
                opt(c.degrees_of_freedom, 2),
                c.p_value.map_or_else(|| "-".into(), |p| format!("{p:.2e}")),
                opt(c.cohens_d, 3),
                if c.large_effect { "yes" } else { "" }
            )?;
        }
        if self.unassigned_ratings > 0 {
            writeln!(f, "({} ratings without a known arm were ignored)", self.unassigned_ratings)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_list() {
        let s = mean_and_sem(&[4.0, 4.0, 4.0]).unwrap();
        assert_eq!((s.mean, s.sample_sd, s.sem), (4.0, Some(0.0), Some(0.0)));
    }

    #[test]
    fn two_point_list() {
        let s = mean_and_sem(&[1.0, 5.0]).unwrap();
        assert_eq!(s.mean, 3.0);
        assert!((s.sample_sd.unwrap() - 8f64.sqrt()).abs() < 1e-12);
        assert!((s.sem.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn singleton_has_no_spread() {
        let s = mean_and_sem(&[3.0]).unwrap();
        assert_eq!(s.mean, 3.0);
        assert!(s.sample_sd.is_none() && s.sem.is_none());
        assert!(mean_and_sem(&[]).is_err());
    }

    #[test]
    fn welch_hand_example() {
        let r = t_test_two_sample(&[2.0, 4.0, 6.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((r.t - 1.0 / (8.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((r.t - 0.612372).abs() < 1e-6);
        assert!((r.df - 4.0).abs() < 1e-12);
    }

    #[test]
    fn identical_groups() {
        let a = [1.0, 2.0, 4.0];
        let r = t_test_two_sample(&a, &a).unwrap();
        assert_eq!((r.t, r.p_two_sided), (0.0, 1.0));
        assert_eq!(cohens_d(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_constant_groups() {
        let r = t_test_two_sample(&[3.0, 3.0], &[3.0, 3.0]).unwrap();
        assert_eq!((r.t, r.p_two_sided), (0.0, 1.0));
        let r = t_test_two_sample(&[4.0, 4.0], &[3.0, 3.0]).unwrap();
        assert_eq!(r.p_two_sided, 0.0);
        assert!(matches!(cohens_d(&[3.0, 3.0], &[3.0, 3.0]), Err(EvalError::UndefinedEffect)));
    }

    #[test]
    fn cohens_d_hand_example() {
        assert!((cohens_d(&[2.0, 4.0, 6.0], &[1.0, 3.0, 5.0]).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn p_value_known_points() {
        // t = 2.776445 at df 4 is the 97.5% quantile.
        assert!((student_t_two_sided_p(2.776_445_105_197_799, 4.0) - 0.05).abs() < 1e-9);
        // df = 1 is Cauchy: P(|T| > 1) = 0.5.
        assert!((student_t_two_sided_p(1.0, 1.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
    }

    fn store_with_two() -> RatingStore {
        let mut s = RatingStore::in_memory(CriterionSet::default());
        s.register_explanation("e1", Method::ZeroShot);
        s.register_explanation("e2", Method::LogicScaffolding);
        s
    }

    #[test]
    fn record_and_overwrite() {
        let mut s = store_with_two();
        let ack = s.record_rating(RatingRecord::new("e1", "r1", "factuality", 3)).unwrap();
        assert_eq!(ack, Acknowledgment { replaced: false, count: 1 });
        let ack = s.record_rating(RatingRecord::new("e1", "r1", "factuality", 5)).unwrap();
        assert_eq!(ack, Acknowledgment { replaced: true, count: 1 });
        assert_eq!(s.get("e1", "r1", "factuality").unwrap().score, 5);
        assert_eq!(s.get("e1", "r1", "factuality").unwrap().method, Some(Method::ZeroShot));
    }

    #[test]
    fn record_rejections() {
        let mut s = store_with_two();
        assert!(s.record_rating(RatingRecord::new("e1", "r1", "factuality", 6)).is_err());
        assert!(s.record_rating(RatingRecord::new("e1", "r1", "factuality", 0)).is_err());
        assert!(s.record_rating(RatingRecord::new("e1", "r1", "relevance", 3)).is_err());
        assert!(s.record_rating(RatingRecord::new("nope", "r1", "factuality", 3)).is_err());
        assert!(s.is_empty());
    }

    #[test]
    fn log_replay_and_compaction() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ratings.jsonl");
        {
            let mut s = RatingStore::open(&path, CriterionSet::default()).unwrap();
            s.register_explanation("e1", Method::ZeroShot);
            s.record_rating(RatingRecord::new("e1", "r1", "factuality", 2)).unwrap();
            s.record_rating(RatingRecord::new("e1", "r1", "factuality", 4)).unwrap();
            s.record_rating(RatingRecord::new("e1", "r2", "factuality", 1)).unwrap();
        }
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 3);
        let mut s = RatingStore::open(&path, CriterionSet::default()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.get("e1", "r1", "factuality").unwrap().score, 4);
        s.compact().unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 2);
        s.record_rating(RatingRecord::new("e1", "r3", "factuality", 5)).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 3);
    }

    fn push(s: &mut RatingStore, id: &str, criterion: &str, scores: &[u8]) {
        for (i, &score) in scores.iter().enumerate() {
            s.record_rating(RatingRecord::new(id, format!("r{i}"), criterion, score)).unwrap();
        }
    }

    #[test]
    fn report_flags_large_effect() {
        // ls mean 4.5 (SS 3), zs mean 3.0 (SS 2): pooled variance 5/5 = 1, d = 1.5
        let mut s = store_with_two();
        push(&mut s, "e2", "factuality", &[5, 5, 5, 3]);
        push(&mut s, "e1", "factuality", &[2, 3, 4]);
        let r = s.report();
        let f = r.get("factuality").unwrap();
        assert_eq!(f.status, CriterionStatus::Complete);
        assert_eq!(f.cohens_d, Some(1.5));
        assert!(f.large_effect);
        assert_eq!(r.large_effects(), vec!["factuality"]);
        assert_eq!(r.get("readability").unwrap().status, CriterionStatus::Incomplete);
    }

    #[test]
    fn empty_and_one_armed_reports() {
        let s = store_with_two();
        assert!(s.report().criteria.iter().all(|c| c.status == CriterionStatus::Incomplete));
        let mut s = store_with_two();
        push(&mut s, "e2", "factuality", &[5, 4, 3]);
        let r = s.report();
        assert!(r.criteria.iter().all(|c| c.status == CriterionStatus::Incomplete));
        assert_eq!(r.get("factuality").unwrap().logic_scaffolding.unwrap().n, 3);
    }

    #[test]
    fn criterion_set_rules() {
        assert!(CriterionSet::new(Vec::<String>::new()).is_err());
        assert!(CriterionSet::new(["a", "a"]).is_err());
        assert_eq!(CriterionSet::default().names().len(), 4);
    }
}
