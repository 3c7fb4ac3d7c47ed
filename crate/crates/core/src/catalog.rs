//! Item catalog and user interaction histories.
//!
//! Two on-disk catalog formats are understood:
//!
//! * JSON lines, one [`Item`] object per line (the canonical interchange form).
//! * MovieLens `movies.dat` rows: `id::title::genre|genre`.
//!
//! Histories use the MovieLens ratings layout `user::item::rating::timestamp`,
//! where the rating and timestamp columns may be omitted.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("catalog has no valid rows ({} skipped)", report.skipped.len())]
    Empty { report: IngestReport },
    #[error("history line {line}: {reason}")]
    MalformedHistory { line: usize, reason: String },
    #[error("invalid item: {0}")]
    InvalidItem(String),
    #[error("unknown catalog format `{0}` (expected jsonl or movielens)")]
    UnknownFormat(String),
}

/// A catalog entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub id: String,
    pub title: String,
    #[serde(default)]
    pub plot: String,
    #[serde(default)]
    pub genres: Vec<String>,
    #[serde(default)]
    pub year: Option<i32>,
    #[serde(default)]
    pub poster_url: Option<String>,
}

impl Item {
    pub fn new(id: impl Into<String>, title: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            title: title.into(),
            plot: String::new(),
            genres: Vec::new(),
            year: None,
            poster_url: None,
        }
    }

    pub fn with_plot(mut self, plot: impl Into<String>) -> Self {
        self.plot = plot.into();
        self
    }

    pub fn with_genres<I, S>(mut self, genres: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.genres = genres.into_iter().map(Into::into).collect();
        self
    }

    /// Checks the item invariants, normalizing what can be normalized:
    /// whitespace around the id and title is trimmed and case-folded genre
    /// duplicates are dropped (first occurrence kept).
    pub fn validated(mut self) -> Result<Self, CatalogError> {
        self.id = self.id.trim().to_string();
        self.title = self.title.trim().to_string();
        if self.id.is_empty() {
            return Err(CatalogError::InvalidItem("empty id".into()));
        }
        if self.title.is_empty() {
            return Err(CatalogError::InvalidItem(format!(
                "item `{}` has an empty title",
                self.id
            )));
        }
        let mut seen = HashSet::new();
        self.genres = self
            .genres
            .into_iter()
            .map(|g| g.trim().to_string())
            .filter(|g| !g.is_empty() && seen.insert(g.to_lowercase()))
            .collect();
        Ok(self)
    }

    /// Title as a person would say it: the trailing `(YYYY)` removed and
    /// MovieLens-style trailing articles moved to the front
    /// (`Godfather, The (1972)` becomes `The Godfather`).
    pub fn display_title(&self) -> String {
        display_title(&self.title)
    }
}

pub fn display_title(title: &str) -> String {
    let without_year = year_regex().replace(title.trim(), "");
    let base = without_year.trim();
    for article in ["The", "A", "An"] {
        let suffix = format!(", {article}");
        if let Some(stem) = base.strip_suffix(&suffix) {
            return format!("{article} {stem}");
        }
    }
    base.to_string()
}

fn year_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\s*\((\d{4})\)\s*$").unwrap())
}

fn parse_year(title: &str) -> Option<i32> {
    year_regex()
        .captures(title)
        .and_then(|c| c.get(1))
        .and_then(|m| m.as_str().parse().ok())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CatalogFormat {
    Jsonl,
    Movielens,
}

impl FromStr for CatalogFormat {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(Self::Jsonl),
            "movielens" | "ml" => Ok(Self::Movielens),
            other => Err(CatalogError::UnknownFormat(other.to_string())),
        }
    }
}

impl fmt::Display for CatalogFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Jsonl => "jsonl",
            Self::Movielens => "movielens",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedRow {
    pub line: usize,
    pub reason: String,
}

/// Row-count summary returned alongside every ingested catalog.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_accepted: usize,
    pub skipped: Vec<SkippedRow>,
}

/// Immutable id-ordered item collection.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    items: BTreeMap<String, Item>,
    source: String,
}

impl Catalog {
    /// Builds a catalog from already-constructed items; later duplicates of
    /// an id are rejected.
    pub fn from_items(
        items: impl IntoIterator<Item = Item>,
        source: impl Into<String>,
    ) -> Result<Self, CatalogError> {
        let mut map = BTreeMap::new();
        for item in items {
            let item = item.validated()?;
            if map.contains_key(&item.id) {
                return Err(CatalogError::InvalidItem(format!("duplicate id `{}`", item.id)));
            }
            map.insert(item.id.clone(), item);
        }
        Ok(Self {
            items: map,
            source: source.into(),
        })
    }

    pub fn get(&self, id: &str) -> Option<&Item> {
        self.items.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.items.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Items in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = &Item> {
        self.items.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.items.keys().map(String::as_str)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for item in self.items.values() {
            serde_json::to_writer(&mut out, item)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }
}

/// Reads a catalog file. Rows that fail validation are skipped and listed in
/// the returned report; a file without any valid row is an error.
pub fn ingest_catalog(
    path: impl AsRef<Path>,
    format: CatalogFormat,
) -> Result<(Catalog, IngestReport), CatalogError> {
    let path = path.as_ref();
    let text = read_text(path)?;
    parse_catalog(&text, format, path.display().to_string())
}

pub fn parse_catalog(
    text: &str,
    format: CatalogFormat,
    source: impl Into<String>,
) -> Result<(Catalog, IngestReport), CatalogError> {
    let mut report = IngestReport::default();
    let mut items = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        report.rows_read += 1;
        let parsed = match format {
            CatalogFormat::Jsonl => parse_jsonl_row(raw),
            CatalogFormat::Movielens => parse_movielens_row(raw),
        };
        match parsed.and_then(Item::validated) {
            Ok(item) if items.contains_key(&item.id) => report.skipped.push(SkippedRow {
                line,
                reason: format!("duplicate id `{}`", item.id),
            }),
            Ok(item) => {
                items.insert(item.id.clone(), item);
            }
            Err(e) => report.skipped.push(SkippedRow {
                line,
                reason: e.to_string(),
            }),
        }
    }
    report.rows_accepted = items.len();
    if items.is_empty() {
        return Err(CatalogError::Empty { report });
    }
    Ok((
        Catalog {
            items,
            source: format!("{format}:{}", source.into()),
        },
        report,
    ))
}

fn parse_jsonl_row(raw: &str) -> Result<Item, CatalogError> {
    serde_json::from_str(raw).map_err(|e| CatalogError::InvalidItem(e.to_string()))
}

fn parse_movielens_row(raw: &str) -> Result<Item, CatalogError> {
    let fields: Vec<&str> = raw.trim_end_matches(['\r', '\n']).split("::").collect();
    if fields.len() != 3 {
        return Err(CatalogError::InvalidItem(format!(
            "expected 3 `::`-separated fields, found {}",
            fields.len()
        )));
    }
    let title = fields[1].trim();
    let genres = fields[2]
        .split('|')
        .map(str::trim)
        .filter(|g| !g.is_empty() && *g != "(no genres listed)")
        .map(String::from)
        .collect();
    Ok(Item {
        id: fields[0].to_string(),
        title: title.to_string(),
        plot: String::new(),
        genres,
        year: parse_year(title),
        poster_url: None,
    })
}

/// Partial item fields used to supplement catalog entries.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ItemPatch {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plot: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub genres: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poster_url: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeReport {
    pub updated: Vec<String>,
    pub ignored_unknown: Vec<String>,
    pub rejected: Vec<SkippedRow>,
}

/// Returns a new catalog with `extra` applied; `catalog` is left untouched.
pub fn merge_metadata(
    catalog: &Catalog,
    extra: &BTreeMap<String, ItemPatch>,
) -> (Catalog, MergeReport) {
    let mut merged = catalog.clone();
    let mut report = MergeReport::default();
    for (id, patch) in extra {
        let Some(current) = merged.items.get(id) else {
            report.ignored_unknown.push(id.clone());
            continue;
        };
        let mut item = current.clone();
        if let Some(t) = &patch.title {
            item.title = t.clone();
        }
        if let Some(p) = &patch.plot {
            item.plot = p.clone();
        }
        if let Some(g) = &patch.genres {
            item.genres = g.clone();
        }
        if patch.year.is_some() {
            item.year = patch.year;
        }
        if patch.poster_url.is_some() {
            item.poster_url = patch.poster_url.clone();
        }
        match item.validated() {
            Ok(item) => {
                merged.items.insert(id.clone(), item);
                report.updated.push(id.clone());
            }
            Err(e) => report.rejected.push(SkippedRow {
                line: 0,
                reason: format!("{id}: {e}"),
            }),
        }
    }
    (merged, report)
}

/// Reads a metadata supplement: JSON lines of `{"id": ..., <ItemPatch fields>}`.
pub fn load_metadata(
    path: impl AsRef<Path>,
) -> Result<BTreeMap<String, ItemPatch>, CatalogError> {
    #[derive(Deserialize)]
    struct Row {
        id: String,
        #[serde(flatten)]
        patch: ItemPatch,
    }
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let row: Row = serde_json::from_str(raw).map_err(|e| {
            CatalogError::InvalidItem(format!("metadata line {}: {e}", idx + 1))
        })?;
        out.insert(row.id, row.patch);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interaction {
    pub item_id: String,
    #[serde(default)]
    pub rating: Option<u8>,
    #[serde(default)]
    pub timestamp: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserHistory {
    pub user_id: String,
    pub interactions: Vec<Interaction>,
}

impl UserHistory {
    pub fn new(user_id: impl Into<String>) -> Self {
        Self {
            user_id: user_id.into(),
            interactions: Vec::new(),
        }
    }

    pub fn from_item_ids<I, S>(user_id: impl Into<String>, ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            user_id: user_id.into(),
            interactions: ids
                .into_iter()
                .map(|id| Interaction {
                    item_id: id.into(),
                    rating: None,
                    timestamp: None,
                })
                .collect(),
        }
    }

    pub fn item_ids(&self) -> impl Iterator<Item = &str> {
        self.interactions.iter().map(|i| i.item_id.as_str())
    }

    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }
}

pub fn load_history(path: impl AsRef<Path>) -> Result<Vec<UserHistory>, CatalogError> {
    parse_history(&read_text(path.as_ref())?)
}

/// Parses `user::item[::rating[::timestamp]]` lines. Users appear in order of
/// first occurrence; interactions keep file order.
pub fn parse_history(text: &str) -> Result<Vec<UserHistory>, CatalogError> {
    let mut histories: Vec<UserHistory> = Vec::new();
    let mut position: BTreeMap<String, usize> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let bad = |reason: String| CatalogError::MalformedHistory { line, reason };
        let fields: Vec<&str> = raw.split("::").map(str::trim).collect();
        if !(2..=4).contains(&fields.len()) {
            return Err(bad(format!("expected 2 to 4 fields, found {}", fields.len())));
        }
        if fields[0].is_empty() || fields[1].is_empty() {
            return Err(bad("empty user or item id".into()));
        }
        let rating = match fields.get(2) {
            Some(r) if !r.is_empty() => {
                let value: u8 = r.parse().map_err(|_| bad(format!("rating `{r}` is not an integer")))?;
                if !(1..=5).contains(&value) {
                    return Err(bad(format!("rating {value} outside 1..=5")));
                }
                Some(value)
            }
            _ => None,
        };
        let timestamp = match fields.get(3) {
            Some(t) if !t.is_empty() => {
                Some(t.parse().map_err(|_| bad(format!("timestamp `{t}` is not an integer")))?)
            }
            _ => None,
        };
        let slot = *position.entry(fields[0].to_string()).or_insert_with(|| {
            histories.push(UserHistory::new(fields[0]));
            histories.len() - 1
        });
        histories[slot].interactions.push(Interaction {
            item_id: fields[1].to_string(),
            rating,
            timestamp,
        });
    }
    Ok(histories)
}

/// MovieLens 1M ships as ISO-8859-1; fall back to a Latin-1 decode when the
/// bytes are not valid UTF-8.
fn read_text(path: &Path) -> Result<String, CatalogError> {
    let bytes = std::fs::read(path).map_err(|source| CatalogError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(match String::from_utf8(bytes) {
        Ok(s) => s,
        Err(e) => e.into_bytes().iter().map(|&b| b as char).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn movielens_movie_row() {
        let (catalog, report) = parse_catalog(
            "1::Toy Story (1995)::Animation|Children's|Comedy\n",
            CatalogFormat::Movielens,
            "test",
        )
        .unwrap();
        assert_eq!(report.rows_accepted, 1);
        let item = catalog.get("1").unwrap();
        assert_eq!(item.title, "Toy Story (1995)");
        assert_eq!(item.genres, vec!["Animation", "Children's", "Comedy"]);
        assert_eq!(item.year, Some(1995));
    }

    #[test]
    fn title_without_year_leaves_year_unset() {
        let (catalog, _) =
            parse_catalog("7::Untitled::Drama", CatalogFormat::Movielens, "t").unwrap();
        assert_eq!(catalog.get("7").unwrap().year, None);
    }

    #[test]
    fn jsonl_rows_counted() {
        let text = r#"{"id":"a","title":"A"}
{"id":"b","title":"B","plot":"p"}
{"id":"c","title":"C","genres":["x"]}
"#;
        let (catalog, report) = parse_catalog(text, CatalogFormat::Jsonl, "t").unwrap();
        assert_eq!(catalog.len(), 3);
        assert_eq!(report.rows_read, 3);
        assert!(report.skipped.is_empty());
    }

    #[test]
    fn missing_title_is_skipped_and_reported() {
        let err = parse_catalog(r#"{"id":"a","title":"  "}"#, CatalogFormat::Jsonl, "t")
            .unwrap_err();
        match err {
            CatalogError::Empty { report } => {
                assert_eq!(report.rows_accepted, 0);
                assert_eq!(report.skipped.len(), 1);
                assert_eq!(report.skipped[0].line, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_rows_skipped_with_line_numbers() {
        let text = "{\"id\":\"a\",\"title\":\"A\"}\nnot json\n{\"id\":\"a\",\"title\":\"dup\"}\n";
        let (catalog, report) = parse_catalog(text, CatalogFormat::Jsonl, "t").unwrap();
        assert_eq!(catalog.len(), 1);
        let lines: Vec<_> = report.skipped.iter().map(|s| s.line).collect();
        assert_eq!(lines, vec![2, 3]);
    }

    #[test]
    fn genres_deduplicated_case_insensitively() {
        let item = Item::new("1", "X")
            .with_genres(["Drama", "drama", "Crime"])
            .validated()
            .unwrap();
        assert_eq!(item.genres, vec!["Drama", "Crime"]);
    }

    #[test]
    fn display_titles() {
        assert_eq!(display_title("Godfather, The (1972)"), "The Godfather");
        assert_eq!(display_title("Heat (1995)"), "Heat");
        assert_eq!(display_title("Scarface"), "Scarface");
    }

    #[test]
    fn merge_fills_plot_without_mutating_source() {
        let catalog = Catalog::from_items([Item::new("1", "Toy Story")], "t").unwrap();
        let extra = BTreeMap::from([(
            "1".to_string(),
            ItemPatch {
                plot: Some("A toy comes to life".into()),
                ..Default::default()
            },
        )]);
        let (merged, report) = merge_metadata(&catalog, &extra);
        assert_eq!(merged.get("1").unwrap().plot, "A toy comes to life");
        assert_eq!(catalog.get("1").unwrap().plot, "");
        assert_eq!(report.updated, vec!["1"]);
    }

    #[test]
    fn merge_ignores_unknown_ids() {
        let catalog = Catalog::from_items([Item::new("1", "Toy Story")], "t").unwrap();
        let extra = BTreeMap::from([("999".to_string(), ItemPatch::default())]);
        let (merged, report) = merge_metadata(&catalog, &extra);
        assert_eq!(merged, catalog);
        assert_eq!(report.ignored_unknown, vec!["999"]);
    }

    #[test]
    fn merge_empty_is_identity() {
        let catalog = Catalog::from_items([Item::new("1", "Toy Story")], "t").unwrap();
        let (merged, report) = merge_metadata(&catalog, &BTreeMap::new());
        assert_eq!(merged, catalog);
        assert_eq!(report, MergeReport::default());
    }

    #[test]
    fn movielens_rating_line() {
        let hist = parse_history("1::1193::5::978300760\n").unwrap();
        assert_eq!(hist.len(), 1);
        assert_eq!(hist[0].user_id, "1");
        assert_eq!(
            hist[0].interactions[0],
            Interaction {
                item_id: "1193".into(),
                rating: Some(5),
                timestamp: Some(978300760),
            }
        );
    }

    #[test]
    fn history_grouping_and_order() {
        let mut text = String::new();
        for i in 0..5 {
            text.push_str(&format!("u1::a{i}::3::{i}\nu2::b{i}\n"));
        }
        let hist = parse_history(&text).unwrap();
        assert_eq!(hist.len(), 2);
        assert_eq!(hist[0].len(), 5);
        assert_eq!(hist[1].len(), 5);
        let ids: Vec<_> = hist[0].item_ids().collect();
        assert_eq!(ids, vec!["a0", "a1", "a2", "a3", "a4"]);
    }

    #[test]
    fn empty_history_file() {
        assert!(parse_history("").unwrap().is_empty());
    }

    #[test]
    fn malformed_history_reports_line() {
        let err = parse_history("1::2::5::1\n1::3::9::1\n").unwrap_err();
        assert!(matches!(err, CatalogError::MalformedHistory { line: 2, .. }));
        let err = parse_history("just-one-field\n").unwrap_err();
        assert!(matches!(err, CatalogError::MalformedHistory { line: 1, .. }));
    }

    #[test]
    fn latin1_fallback() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("movies.dat");
        std::fs::write(&path, b"5::Am\xe9lie (2001)::Comedy|Romance\n").unwrap();
        let (catalog, _) = ingest_catalog(&path, CatalogFormat::Movielens).unwrap();
        assert_eq!(catalog.get("5").unwrap().title, "Amélie (2001)");
    }

    #[test]
    fn unreadable_file_is_io_error() {
        let err = ingest_catalog("/nonexistent/movies.dat", CatalogFormat::Movielens).unwrap_err();
        assert!(matches!(err, CatalogError::Io { .. }));
    }
}
