//! Intent-slot relation mask and BIO transition mask.

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::data::{LabelSpace, Sample, SlotTag};
use crate::error::Result;

/// Score of an allowed transition. Forbidden transitions score `-inf`.
pub const ALLOWED: f64 = 1.0;

/// `Y × T` binary matrix; `rm[l][o]` marks intent `l` and slot label `o` as related.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RelationMask {
    pub rm: Array2<bool>,
    /// Whether the `O` column was forced to 1.
    pub forced_o: bool,
}

impl RelationMask {
    /// Every pair related.
    pub fn permissive(n_intents: usize, n_slots: usize) -> RelationMask {
        RelationMask {
            rm: Array2::from_elem((n_intents, n_slots), true),
            forced_o: false,
        }
    }

    pub fn n_intents(&self) -> usize {
        self.rm.nrows()
    }

    pub fn n_slots(&self) -> usize {
        self.rm.ncols()
    }

    pub fn related(&self, intent: usize, slot: usize) -> bool {
        self.rm[[intent, slot]]
    }
}

pub fn build_relation_mask(support: &[Sample], ls: &LabelSpace, force_o: bool) -> RelationMask {
    assert!(!support.is_empty(), "support set is empty");
    let mut rm = Array2::from_elem((ls.n_intents(), ls.n_slots()), false);
    for s in support {
        for &o in &s.slots {
            rm[[s.intent, o]] = true;
        }
    }
    if force_o {
        rm.column_mut(ls.outside()).fill(true);
    }
    RelationMask { rm, forced_o: force_o }
}

/// Transition scores (`ALLOWED` or `-inf`), plus a virtual START row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionMask {
    #[serde(serialize_with = "serialize_scores")]
    pub trans: Array2<f64>,
    #[serde(serialize_with = "serialize_scores_1d")]
    pub start: Array1<f64>,
}

fn score_repr(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn serialize_scores<S: serde::Serializer>(a: &Array2<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<Option<f64>>> = a
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|&v| score_repr(v)).collect())
        .collect();
    rows.serialize(s)
}

fn serialize_scores_1d<S: serde::Serializer>(a: &Array1<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    a.iter().map(|&v| score_repr(v)).collect::<Vec<_>>().serialize(s)
}

impl TransitionMask {
    /// Every transition allowed with the same score.
    pub fn permissive(n_slots: usize) -> TransitionMask {
        TransitionMask {
            trans: Array2::from_elem((n_slots, n_slots), ALLOWED),
            start: Array1::from_elem(n_slots, ALLOWED),
        }
    }

    pub fn from_tags(tags: &[SlotTag]) -> TransitionMask {
        let score = |ok: bool| if ok { ALLOWED } else { f64::NEG_INFINITY };
        let t = tags.len();
        TransitionMask {
            trans: Array2::from_shape_fn((t, t), |(a, b)| score(tags[a].allows_next(&tags[b]))),
            start: tags.iter().map(|tag| score(tag.allows_start())).collect(),
        }
    }

    /// From raw label names; fails on names outside the BIO grammar.
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<TransitionMask> {
        let tags = names
            .iter()
            .map(|n| SlotTag::parse(n.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_tags(&tags))
    }

    pub fn n_slots(&self) -> usize {
        self.start.len()
    }
}

pub fn build_transition_mask(ls: &LabelSpace) -> TransitionMask {
    TransitionMask::from_tags(ls.tags())
}

/// `f_o` with every column unrelated to `intent` set to `-inf`.
pub fn apply_relation_mask(f_o: &Array2<f64>, rm: &RelationMask, intent: usize) -> Array2<f64> {
    let mut out = f_o.clone();
    for (o, mut col) in out.columns_mut().into_iter().enumerate() {
        if !rm.related(intent, o) {
            col.fill(f64::NEG_INFINITY);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::rng::stream;
    use rand::seq::SliceRandom;
    use rand::Rng as _;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn music() -> LabelSpace {
        LabelSpace::new(
            names(&["PlayMusic", "GetWeather"]),
            names(&["O", "B-artist", "I-artist", "B-city", "I-city"]),
        )
        .unwrap()
    }

    fn sample(intent: usize, slots: &[usize]) -> Sample {
        Sample {
            tokens: slots.iter().map(|o| format!("w{o}")).collect(),
            intent,
            slots: slots.to_vec(),
        }
    }

    #[test]
    fn relation_from_cooccurrence() {
        let ls = music();
        let support = vec![sample(0, &[0, 1, 2]), sample(1, &[0, 3])];
        let rm = build_relation_mask(&support, &ls, true);
        assert!(rm.related(0, 1));
        assert!(!rm.related(0, 3));
        assert!(rm.related(1, 3));
        assert!(!rm.related(1, 4));
        assert!(rm.related(0, 0) && rm.related(1, 0));
    }

    #[test]
    fn all_outside_support_relates_only_o() {
        let ls = LabelSpace::new(names(&["a"]), names(&["B-x", "O"])).unwrap();
        let rm = build_relation_mask(&[sample(0, &[1, 1])], &ls, true);
        assert_eq!(rm.rm.row(0).to_vec(), vec![false, true]);
    }

    #[test]
    fn forced_o_column() {
        let ls = music();
        let support = vec![sample(0, &[1, 2]), sample(1, &[3, 0])];
        let rm = build_relation_mask(&support, &ls, true);
        assert!(rm.forced_o && rm.related(0, 0));
        let unforced = build_relation_mask(&support, &ls, false);
        assert!(!unforced.related(0, 0));
    }

    #[test]
    fn relation_ignores_support_order() {
        let ls = music();
        let mut support = vec![sample(0, &[0, 1, 2]), sample(1, &[0, 3]), sample(1, &[3, 4, 0])];
        let rm = build_relation_mask(&support, &ls, true);
        let mut rng = stream(1, "perm");
        for _ in 0..10 {
            support.shuffle(&mut rng);
            assert_eq!(build_relation_mask(&support, &ls, true), rm);
        }
    }

    #[test]
    fn bio_transitions() {
        let ls = music();
        let tm = build_transition_mask(&ls);
        let id = |n: &str| ls.slot_id(n).unwrap();
        assert_eq!(tm.trans[[id("B-artist"), id("I-artist")]], 1.0);
        assert_eq!(tm.trans[[id("O"), id("I-artist")]], f64::NEG_INFINITY);
        assert_eq!(tm.trans[[id("B-city"), id("I-artist")]], f64::NEG_INFINITY);
        assert_eq!(tm.trans[[id("I-city"), id("B-artist")]], 1.0);
        assert_eq!(tm.start[id("I-city")], f64::NEG_INFINITY);
        assert_eq!(tm.start[id("B-city")], 1.0);
        assert_eq!(tm.start[id("O")], 1.0);
    }

    /// Every label pair against a direct restatement of the BIO rule on strings.
    #[test]
    fn transition_mask_matches_string_rule() {
        let labels = names(&["O", "B-a", "I-a", "B-b", "I-b", "B-long-name", "I-long-name"]);
        let tm = TransitionMask::from_names(&labels).unwrap();
        for (i, prev) in labels.iter().enumerate() {
            for (j, next) in labels.iter().enumerate() {
                let allowed = match next.strip_prefix("I-") {
                    None => true,
                    Some(ty) => prev == &format!("B-{ty}") || prev == &format!("I-{ty}"),
                };
                let want = if allowed { 1.0 } else { f64::NEG_INFINITY };
                assert_eq!(tm.trans[[i, j]], want, "{prev} -> {next}");
            }
        }
        let names_only = TransitionMask::from_names(&labels).unwrap();
        assert_eq!(names_only, tm);
    }

    #[test]
    fn malformed_label_name() {
        assert!(matches!(
            TransitionMask::from_names(&["O", "Z-x"]),
            Err(Error::MalformedLabel(_))
        ));
    }

    #[test]
    fn apply_mask_cases() {
        let mut rng = stream(3, "mask");
        let f = Array2::from_shape_fn((3, 4), |_| rng.random_range(-5.0..5.0));
        let open = RelationMask::permissive(2, 4);
        assert_eq!(apply_relation_mask(&f, &open, 1), f);

        let mut one = RelationMask::permissive(2, 4);
        one.rm[[1, 2]] = false;
        let out = apply_relation_mask(&f, &one, 1);
        for ((i, o), &v) in out.indexed_iter() {
            if o == 2 {
                assert_eq!(v, f64::NEG_INFINITY);
            } else {
                assert_eq!(v, f[[i, o]]);
            }
        }
        for _ in 0..20 {
            let rm = RelationMask {
                rm: Array2::from_shape_fn((2, 4), |_| rng.random_bool(0.5)),
                forced_o: false,
            };
            for l in 0..2 {
                let out = apply_relation_mask(&f, &rm, l);
                for ((i, o), &v) in out.indexed_iter() {
                    let want = if rm.rm[[l, o]] { f[[i, o]] } else { f64::NEG_INFINITY };
                    assert_eq!(v, want);
                }
            }
        }
    }

    #[test]
    fn masks_dump_as_json() {
        let tm = build_transition_mask(&music());
        let json = serde_json::to_value(&tm).unwrap();
        assert!(json["start"][2].is_null());
        assert_eq!(json["start"][0], 1.0);
    }
}
