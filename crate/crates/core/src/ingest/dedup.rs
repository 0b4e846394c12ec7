use std::cmp::Ordering;
use std::collections::BTreeMap;

use super::{sort_by_date, CorpusRecord, RecordField};

pub fn non_null_field_count(r: &CorpusRecord) -> usize {
    RecordField::ALL.iter().filter(|&&f| r.has_field(f)).count()
}

/// `Greater` when `a` is the better representative of its group: more
/// non-null fields, then the later date, then the smaller record id.
fn representative_order(a: &CorpusRecord, b: &CorpusRecord) -> Ordering {
    non_null_field_count(a)
        .cmp(&non_null_field_count(b))
        .then_with(|| a.publish_date.map(|d| d.date).cmp(&b.publish_date.map(|d| d.date)))
        .then_with(|| b.record_id.cmp(&a.record_id))
}

/// Keeps one record per `dup_group_key`. The output is sorted by date then
/// id, so input order never affects it.
pub fn deduplicate(records: Vec<CorpusRecord>) -> Vec<CorpusRecord> {
    let mut best: BTreeMap<String, CorpusRecord> = BTreeMap::new();
    for r in records {
        match best.get_mut(&r.dup_group_key) {
            Some(cur) => {
                if representative_order(&r, cur) == Ordering::Greater {
                    *cur = r;
                }
            }
            None => {
                best.insert(r.dup_group_key.clone(), r);
            }
        }
    }
    let mut out: Vec<CorpusRecord> = best.into_values().collect();
    sort_by_date(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn record_with_doi_wins() {
        let with = record("b", "k", "2020-01-01");
        let mut without = record("a", "k", "2020-01-01");
        without.doi = None;
        let out = deduplicate(vec![without, with]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].record_id, "b");
    }

    #[test]
    fn singletons_pass_through() {
        let input = vec![record("a", "ka", "2020-01-01"), record("b", "kb", "2020-01-02")];
        assert_eq!(deduplicate(input.clone()), input);
    }

    #[test]
    fn completeness_tie_goes_to_latest_then_smallest_id() {
        let mut sparse = record("s", "k", "2022-01-01");
        sparse.journal = None;
        sparse.authors = None;
        let mut no_doi = record("f", "k", "2021-01-01");
        no_doi.doi = None;
        let group = vec![
            record("c", "k", "2020-05-01"),
            record("e", "k", "2020-09-01"),
            sparse,
            record("d", "k", "2020-07-01"),
            no_doi,
        ];
        // c, d, e tie on completeness; e is the latest of the three.
        assert_eq!(deduplicate(group)[0].record_id, "e");

        let twins = vec![record("z", "k", "2020-01-01"), record("y", "k", "2020-01-01")];
        assert_eq!(deduplicate(twins)[0].record_id, "y");
    }

    fn arb_records() -> impl Strategy<Value = Vec<CorpusRecord>> {
        prop::collection::vec((0u8..6, 0u8..4, 1u32..28, any::<bool>()), 0..25).prop_map(|rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, (key, month, day, doi))| {
                    let mut r = record(
                        &format!("r{i:02}"),
                        &format!("k{key}"),
                        &format!("2020-{:02}-{:02}", month + 1, day),
                    );
                    if !doi {
                        r.doi = None;
                    }
                    r
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn permutation_invariant_and_idempotent(records in arb_records(), rot in 0usize..25) {
            let once = deduplicate(records.clone());
            let mut shuffled = records.clone();
            shuffled.reverse();
            if !shuffled.is_empty() {
                let k = rot % shuffled.len();
                shuffled.rotate_left(k);
            }
            prop_assert_eq!(&deduplicate(shuffled), &once);
            prop_assert_eq!(&deduplicate(once.clone()), &once);
            let keys: std::collections::BTreeSet<_> = once.iter().map(|r| &r.dup_group_key).collect();
            prop_assert_eq!(keys.len(), once.len());
        }
    }
}
