//! Loading external rating logs and densifying them into an evaluation
//! ground truth.
//!
//! The file format is plain UTF-8 CSV with exactly three comma-separated
//! fields per line, `user_id,item_id,rating`, and an optional single header
//! line (detected by a missing or non-numeric third field on line 1).
//! Fields are taken verbatim; there is no quoting, so ids must not contain
//! commas.
//!
//! Real rating logs are far too sparse to serve as an oracle, so [`densify`]
//! keeps only the most-rated items and then the heaviest users on those
//! items, giving a small matrix with few missing cells.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::truth::GroundTruth;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("failed to read ratings file: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("densification produced an empty matrix")]
    InsufficientData,
}

/// One raw `user_id,item_id,rating` record.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub user_id: String,
    pub item_id: String,
    pub rating: f64,
}

/// The parsed contents of a ratings file, in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawRatingsFile {
    pub records: Vec<RawRecord>,
}

fn parse_record(line: &str, line_number: usize) -> Result<RawRecord, IngestError> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 3 {
        return Err(IngestError::Parse {
            line: line_number,
            reason: format!("expected 3 comma-separated fields, found {}", fields.len()),
        });
    }
    if fields[0].is_empty() {
        return Err(IngestError::Parse {
            line: line_number,
            reason: "empty user id".into(),
        });
    }
    if fields[1].is_empty() {
        return Err(IngestError::Parse {
            line: line_number,
            reason: "empty item id".into(),
        });
    }
    let rating: f64 = fields[2].trim().parse().map_err(|_| IngestError::Parse {
        line: line_number,
        reason: format!("invalid rating {:?}", fields[2]),
    })?;
    if !rating.is_finite() {
        return Err(IngestError::Parse {
            line: line_number,
            reason: format!("non-finite rating {:?}", fields[2]),
        });
    }
    Ok(RawRecord {
        user_id: fields[0].to_owned(),
        item_id: fields[1].to_owned(),
        rating,
    })
}

/// Does line 1 look like a header? True when the third field is missing or
/// does not parse as a number.
fn is_header(line: &str) -> bool {
    match line.split(',').nth(2) {
        None => true,
        Some(field) => field.trim().parse::<f64>().is_err(),
    }
}

/// Parse ratings CSV text. Blank lines are skipped; line numbers in errors
/// count every line of the input, header and blanks included.
pub fn parse_csv(text: &str) -> Result<RawRatingsFile, IngestError> {
    let mut records = Vec::new();
    let mut first_content_line = true;
    for (index, raw_line) in text.lines().enumerate() {
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        if line.is_empty() {
            continue;
        }
        if first_content_line {
            first_content_line = false;
            if is_header(line) {
                continue;
            }
        }
        records.push(parse_record(line, index + 1)?);
    }
    Ok(RawRatingsFile { records })
}

/// Load and parse a ratings CSV file.
pub fn load_csv(path: impl AsRef<Path>) -> Result<RawRatingsFile, IngestError> {
    parse_csv(&fs::read_to_string(path)?)
}

/// A densified ground truth plus the retained id mappings.
#[derive(Debug, Clone)]
pub struct Densified {
    pub truth: GroundTruth,
    /// Fraction of cells with a known rating.
    pub fill_rate: f64,
    /// Row index -> original user id, ordered by decreasing rating count.
    pub user_ids: Vec<String>,
    /// Column index -> original item id, ordered by decreasing rating count.
    pub item_ids: Vec<String>,
}

/// Ids ranked by record count, descending, ties broken lexicographically.
fn top_by_count<'a>(counts: &HashMap<&'a str, usize>, keep: usize) -> Vec<&'a str> {
    let mut ranked: Vec<(&str, usize)> = counts.iter().map(|(&id, &n)| (id, n)).collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(keep);
    ranked.into_iter().map(|(id, _)| id).collect()
}

/// Keep the `top_items` most-rated items, then the `top_users` users with
/// the most ratings restricted to those items. Duplicate (user, item) pairs
/// keep the last occurrence.
pub fn densify(
    raw: &RawRatingsFile,
    top_users: usize,
    top_items: usize,
) -> Result<Densified, IngestError> {
    let mut item_counts: HashMap<&str, usize> = HashMap::new();
    for record in &raw.records {
        *item_counts.entry(record.item_id.as_str()).or_default() += 1;
    }
    let kept_items = top_by_count(&item_counts, top_items);
    let item_index: HashMap<&str, usize> =
        kept_items.iter().enumerate().map(|(i, &id)| (id, i)).collect();

    let mut user_counts: HashMap<&str, usize> = HashMap::new();
    for record in &raw.records {
        if item_index.contains_key(record.item_id.as_str()) {
            *user_counts.entry(record.user_id.as_str()).or_default() += 1;
        }
    }
    let kept_users = top_by_count(&user_counts, top_users);
    let user_index: HashMap<&str, usize> =
        kept_users.iter().enumerate().map(|(i, &id)| (id, i)).collect();

    let n_users = kept_users.len();
    let n_items = kept_items.len();
    if n_users == 0 || n_items == 0 {
        return Err(IngestError::InsufficientData);
    }
    let mut values = vec![0.0; n_users * n_items];
    let mut available = vec![false; n_users * n_items];
    for record in &raw.records {
        if let (Some(&i), Some(&j)) = (
            user_index.get(record.user_id.as_str()),
            item_index.get(record.item_id.as_str()),
        ) {
            values[i * n_items + j] = record.rating;
            available[i * n_items + j] = true;
        }
    }
    let truth = GroundTruth::masked(n_users, n_items, values, available)
        .expect("constructed buffers match the declared shape");
    if truth.available_count() == 0 {
        return Err(IngestError::InsufficientData);
    }
    Ok(Densified {
        fill_rate: truth.fill_rate(),
        truth,
        user_ids: kept_users.into_iter().map(str::to_owned).collect(),
        item_ids: kept_items.into_iter().map(str::to_owned).collect(),
    })
}

/// Write a ground truth in the ratings CSV format, one line per available
/// cell. Ids are zero-padded (`u007`, `i042`) so lexicographic order equals
/// index order and a round trip through [`densify`] preserves the layout.
pub fn write_ground_truth_csv<W: Write>(truth: &GroundTruth, mut out: W) -> io::Result<()> {
    let user_width = truth.n_users().saturating_sub(1).to_string().len();
    let item_width = truth.n_items().saturating_sub(1).to_string().len();
    writeln!(out, "user_id,item_id,rating")?;
    for user in 0..truth.n_users() {
        for item in 0..truth.n_items() {
            if truth.is_available(user, item) {
                let rating = truth.value(user, item).expect("mask checked");
                writeln!(
                    out,
                    "u{user:0user_width$},i{item:0item_width$},{rating}"
                )?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_plain_records() {
        let raw = parse_csv("u1,i3,3.0\nu1,i6,2.0").unwrap();
        assert_eq!(raw.records.len(), 2);
        assert_eq!(raw.records[0].user_id, "u1");
        assert_eq!(raw.records[0].item_id, "i3");
        assert_eq!(raw.records[0].rating, 3.0);
    }

    #[test]
    fn skips_a_header_line() {
        let raw = parse_csv("user,item,rating\nu1,i1,4.5\n").unwrap();
        assert_eq!(raw.records.len(), 1);
        assert_eq!(raw.records[0].rating, 4.5);
    }

    #[test]
    fn reports_the_failing_line_number() {
        let err = parse_csv("u1,i1,3.0\nu1,i1,abc\n").unwrap_err();
        match err {
            IngestError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_wrong_field_counts_and_empty_ids() {
        // a malformed second line is an error even though line 1 was a header
        assert!(parse_csv("user,item,rating\nu1,i1\n").is_err());
        assert!(parse_csv("u1,i1,1.0\n,i1,1.0\n").is_err());
        assert!(parse_csv("u1,i1,1.0\nu2,,1.0\n").is_err());
        assert!(parse_csv("u1,i1,1.0\nu2,i1,1.0,extra\n").is_err());
        assert!(parse_csv("u1,i1,nan").is_err());
        assert!(parse_csv("u1,i1,inf").is_err());
    }

    #[test]
    fn handles_crlf_and_blank_lines() {
        let raw = parse_csv("user,item,rating\r\nu1,i1,2.0\r\n\r\nu2,i1,3.5\r\n").unwrap();
        assert_eq!(raw.records.len(), 2);
        assert_eq!(raw.records[1].rating, 3.5);
    }

    #[test]
    fn empty_input_parses_to_no_records() {
        assert_eq!(parse_csv("").unwrap().records.len(), 0);
        assert_eq!(parse_csv("user,item,rating\n").unwrap().records.len(), 0);
    }

    fn grid_records(n_users: usize, n_items: usize) -> RawRatingsFile {
        let mut records = Vec::new();
        for i in 0..n_users {
            for j in 0..n_items {
                records.push(RawRecord {
                    user_id: format!("u{i}"),
                    item_id: format!("i{j}"),
                    rating: (i + j) as f64,
                });
            }
        }
        RawRatingsFile { records }
    }

    #[test]
    fn full_grid_densifies_to_fill_rate_one() {
        let raw = grid_records(4, 8);
        let dense = densify(&raw, 4, 8).unwrap();
        assert_eq!(dense.truth.n_users(), 4);
        assert_eq!(dense.truth.n_items(), 8);
        assert_eq!(dense.fill_rate, 1.0);
    }

    #[test]
    fn popularity_selects_the_most_rated_item() {
        let raw = RawRatingsFile {
            records: vec![
                RawRecord { user_id: "alice".into(), item_id: "a".into(), rating: 1.0 },
                RawRecord { user_id: "alice".into(), item_id: "b".into(), rating: 2.0 },
                RawRecord { user_id: "alice".into(), item_id: "c".into(), rating: 3.0 },
                RawRecord { user_id: "bob".into(), item_id: "a".into(), rating: 4.0 },
            ],
        };
        let dense = densify(&raw, 10, 1).unwrap();
        assert_eq!(dense.item_ids, vec!["a".to_string()]);
        assert_eq!(dense.user_ids, vec!["alice".to_string(), "bob".to_string()]);
        assert_eq!(dense.truth.value(0, 0).unwrap(), 1.0);
        assert_eq!(dense.truth.value(1, 0).unwrap(), 4.0);
    }

    #[test]
    fn dimensions_never_exceed_the_caps() {
        let raw = grid_records(6, 7);
        let dense = densify(&raw, 3, 2).unwrap();
        assert_eq!(dense.truth.n_users(), 3);
        assert_eq!(dense.truth.n_items(), 2);
    }

    #[test]
    fn duplicates_keep_the_last_occurrence() {
        let raw = RawRatingsFile {
            records: vec![
                RawRecord { user_id: "u".into(), item_id: "i".into(), rating: 1.0 },
                RawRecord { user_id: "u".into(), item_id: "i".into(), rating: 9.0 },
            ],
        };
        let dense = densify(&raw, 1, 1).unwrap();
        assert_eq!(dense.truth.value(0, 0).unwrap(), 9.0);
    }

    #[test]
    fn empty_input_is_insufficient() {
        assert!(matches!(
            densify(&RawRatingsFile::default(), 5, 5),
            Err(IngestError::InsufficientData)
        ));
    }

    #[test]
    fn export_then_reload_round_trips() {
        let spec = crate::datagen::BlockModelSpec::new(13, 11, 3, 3, 5);
        let gt = crate::datagen::generate_ground_truth(&spec).unwrap();
        let mut buffer = Vec::new();
        write_ground_truth_csv(&gt, &mut buffer).unwrap();
        let raw = parse_csv(std::str::from_utf8(&buffer).unwrap()).unwrap();
        assert_eq!(raw.records.len(), 13 * 11);
        let dense = densify(&raw, 13, 11).unwrap();
        for i in 0..13 {
            for j in 0..11 {
                assert_eq!(dense.truth.value(i, j).unwrap(), gt.value(i, j).unwrap());
            }
        }
    }

    proptest! {
        /// Item/user selection is invariant under record permutation
        /// (duplicate-free inputs; duplicates are resolved by record order).
        #[test]
        fn densify_is_stable_under_permutation(
            pairs in proptest::collection::btree_set((0usize..8, 0usize..8), 1..40),
            seed in 0u64..500,
            top_u in 1usize..6,
            top_i in 1usize..6,
        ) {
            use rand::{Rng, SeedableRng};
            let records: Vec<RawRecord> = pairs
                .iter()
                .map(|&(u, j)| RawRecord {
                    user_id: format!("u{u}"),
                    item_id: format!("i{j}"),
                    rating: (u * 8 + j) as f64,
                })
                .collect();
            let mut shuffled = records.clone();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            for i in (1..shuffled.len()).rev() {
                shuffled.swap(i, rng.random_range(0..=i));
            }
            let a = densify(&RawRatingsFile { records }, top_u, top_i).unwrap();
            let b = densify(&RawRatingsFile { records: shuffled }, top_u, top_i).unwrap();
            prop_assert_eq!(a.user_ids, b.user_ids);
            prop_assert_eq!(a.item_ids, b.item_ids);
            for i in 0..a.truth.n_users() {
                for j in 0..a.truth.n_items() {
                    prop_assert_eq!(a.truth.is_available(i, j), b.truth.is_available(i, j));
                    if a.truth.is_available(i, j) {
                        prop_assert_eq!(
                            a.truth.value(i, j).unwrap(),
                            b.truth.value(i, j).unwrap()
                        );
                    }
                }
            }
        }

        /// Every retained rating appears in the raw input with the same value.
        #[test]
        fn retained_ratings_come_from_the_input(
            pairs in proptest::collection::btree_set((0usize..8, 0usize..8), 1..40),
        ) {
            let records: Vec<RawRecord> = pairs
                .iter()
                .map(|&(u, j)| RawRecord {
                    user_id: format!("u{u}"),
                    item_id: format!("i{j}"),
                    rating: (u * 8 + j) as f64 / 3.0,
                })
                .collect();
            let raw = RawRatingsFile { records };
            let dense = densify(&raw, 5, 5).unwrap();
            for i in 0..dense.truth.n_users() {
                for j in 0..dense.truth.n_items() {
                    if dense.truth.is_available(i, j) {
                        let v = dense.truth.value(i, j).unwrap();
                        prop_assert!(raw.records.iter().any(|r| r.user_id == dense.user_ids[i]
                            && r.item_id == dense.item_ids[j]
                            && r.rating == v));
                    }
                }
            }
        }
    }
}
