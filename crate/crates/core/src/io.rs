//! Rating file parsing.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::sync::Arc;

use log::warn;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{IdMap, Rating, RatingDataset, RatingScale};
use crate::error::{Error, Result};

/// Field separator for [`DatasetFormat::GenericDelimited`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Delimiter {
    Char(char),
    /// Any run of ASCII whitespace.
    Whitespace,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    /// `user TAB item TAB rating TAB timestamp` (MovieLens 100K `u.data`).
    MovielensTab,
    /// `user::item::rating::timestamp` (MovieLens 1M `ratings.dat`).
    MovielensDoubleColon,
    GenericDelimited {
        delimiter: Delimiter,
        user_col: usize,
        item_col: usize,
        rating_col: usize,
        has_header: bool,
    },
}

impl DatasetFormat {
    /// Comma-separated `user,item,rating[,...]`.
    pub fn csv(has_header: bool) -> Self {
        DatasetFormat::GenericDelimited {
            delimiter: Delimiter::Char(','),
            user_col: 0,
            item_col: 1,
            rating_col: 2,
            has_header,
        }
    }

    /// Whitespace-separated `user item rating` as used by FilmTrust.
    pub fn whitespace() -> Self {
        DatasetFormat::GenericDelimited {
            delimiter: Delimiter::Whitespace,
            user_col: 0,
            item_col: 1,
            rating_col: 2,
            has_header: false,
        }
    }

    fn skips_first_line(&self) -> bool {
        matches!(self, DatasetFormat::GenericDelimited { has_header: true, .. })
    }

    /// `(user, item, rating)` fields of one line.
    fn fields<'a>(&self, line: &'a str) -> std::result::Result<(&'a str, &'a str, &'a str), String> {
        let pick = |parts: Vec<&'a str>, expected: Option<usize>, cols: (usize, usize, usize)| {
            if let Some(n) = expected {
                if parts.len() != n {
                    return Err(format!("expected {n} fields, found {}", parts.len()));
                }
            }
            let max = cols.0.max(cols.1).max(cols.2);
            if parts.len() <= max {
                return Err(format!("expected at least {} fields, found {}", max + 1, parts.len()));
            }
            Ok((parts[cols.0].trim(), parts[cols.1].trim(), parts[cols.2].trim()))
        };
        match self {
            DatasetFormat::MovielensTab => pick(line.split('\t').collect(), Some(4), (0, 1, 2)),
            DatasetFormat::MovielensDoubleColon => {
                pick(line.split("::").collect(), Some(4), (0, 1, 2))
            }
            DatasetFormat::GenericDelimited {
                delimiter,
                user_col,
                item_col,
                rating_col,
                ..
            } => {
                let parts = match delimiter {
                    Delimiter::Char(c) => line.split(*c).collect(),
                    Delimiter::Whitespace => line.split_ascii_whitespace().collect(),
                };
                pick(parts, None, (*user_col, *item_col, *rating_col))
            }
        }
    }
}

/// Result of parsing a rating stream.
#[derive(Debug)]
pub struct Parsed {
    pub dataset: RatingDataset,
    /// 1-based line numbers whose (user, item) pair was seen again later;
    /// the later line wins.
    pub superseded_lines: Vec<usize>,
}

pub fn parse_ratings<R: Read>(reader: R, format: &DatasetFormat, scale: RatingScale) -> Result<Parsed> {
    let mut users = IdMap::new();
    let mut items = IdMap::new();
    let mut triples: Vec<Rating> = Vec::new();
    let mut lines_of: Vec<usize> = Vec::new();
    let mut seen: HashMap<(u32, u32), usize> = HashMap::new();
    let mut superseded = Vec::new();

    let reader = BufReader::new(reader);
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if idx == 0 && format.skips_first_line() {
            continue;
        }
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() {
            continue;
        }
        let (u, i, r) = format.fields(trimmed).map_err(|message| Error::Parse {
            line: lineno,
            message,
        })?;
        if u.is_empty() || i.is_empty() {
            return Err(Error::Parse {
                line: lineno,
                message: "empty user or item id".into(),
            });
        }
        let value: f64 = r.parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("rating '{r}' is not a number"),
        })?;
        if !value.is_finite() || !scale.contains(value) {
            return Err(Error::OutOfScale {
                line: lineno,
                value,
                min: scale.min_rating,
                max: scale.max_rating,
            });
        }
        let rating = Rating::new(users.get_or_insert(u), items.get_or_insert(i), value);
        match seen.get(&(rating.user, rating.item)) {
            Some(&slot) => {
                warn!(
                    "line {lineno}: duplicate rating for user '{u}' item '{i}', replacing line {}",
                    lines_of[slot]
                );
                superseded.push(lines_of[slot]);
                triples[slot] = rating;
                lines_of[slot] = lineno;
            }
            None => {
                seen.insert((rating.user, rating.item), triples.len());
                triples.push(rating);
                lines_of.push(lineno);
            }
        }
    }

    if triples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dataset = RatingDataset::with_ids(Arc::new(users), Arc::new(items), triples, scale)?;
    Ok(Parsed {
        dataset,
        superseded_lines: superseded,
    })
}

/// Loads a rating file, remapping user and item IDs to dense indices in
/// order of first appearance. Duplicate pairs keep the last occurrence.
pub fn load_dataset(path: impl AsRef<Path>, format: &DatasetFormat, scale: RatingScale) -> Result<RatingDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    Ok(parse_ratings(file, format, scale)?.dataset)
}

/// Hex SHA-256 of a file's bytes.
pub fn file_checksum(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
