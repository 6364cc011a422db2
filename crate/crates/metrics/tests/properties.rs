use std::collections::HashMap;

use ldp_metrics::{bleu, cider, lcs_len, meteor_lite, rouge_l, Item, TokenizedCorpus};
use proptest::prelude::*;

// None of these words has a strippable suffix, so renaming them cannot create
// or break a stem match.
const VOCAB: [&str; 6] = ["cat", "dog", "mat", "sat", "ran", "sun"];

fn words(max: usize, min: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(VOCAB.to_vec()).prop_map(String::from), min..=max)
}

fn corpus_strategy() -> impl Strategy<Value = TokenizedCorpus> {
    prop::collection::vec((words(8, 0), prop::collection::vec(words(8, 1), 1..=3)), 2..=5).prop_map(|v| {
        TokenizedCorpus::new(
            v.into_iter()
                .enumerate()
                .map(|(i, (hypothesis, references))| Item { id: i.to_string(), hypothesis, references })
                .collect(),
        )
        .unwrap()
    })
}

fn relabel(c: &TokenizedCorpus, map: &HashMap<&str, &str>) -> TokenizedCorpus {
    let f = |s: &Vec<String>| s.iter().map(|t| map[t.as_str()].to_string()).collect::<Vec<_>>();
    TokenizedCorpus::new(
        c.items
            .iter()
            .map(|it| Item { id: it.id.clone(), hypothesis: f(&it.hypothesis), references: it.references.iter().map(f).collect() })
            .collect(),
    )
    .unwrap()
}

proptest! {
    #[test]
    fn metrics_ignore_vocabulary_permutation(c in corpus_strategy(), perm in Just(VOCAB.to_vec()).prop_shuffle()) {
        let map: HashMap<&str, &str> = VOCAB.iter().copied().zip(perm.iter().copied()).collect();
        let d = relabel(&c, &map);
        for n in 1..=4 {
            prop_assert_eq!(bleu(&c, n).unwrap().score, bleu(&d, n).unwrap().score);
        }
        prop_assert_eq!(rouge_l(&c).unwrap(), rouge_l(&d).unwrap());
        prop_assert_eq!(meteor_lite(&c).unwrap(), meteor_lite(&d).unwrap());
        prop_assert!((cider(&c).unwrap() - cider(&d).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn longer_reference_never_raises_bleu(h in words(8, 1), r in words(8, 1), pad in 1usize..6, n in 1usize..=4) {
        let c = TokenizedCorpus::new(vec![Item { id: "0".into(), hypothesis: h.clone(), references: vec![r.clone()] }]).unwrap();
        let mut longer = r;
        longer.extend(std::iter::repeat_n("zzz".to_string(), pad));
        let d = TokenizedCorpus::new(vec![Item { id: "0".into(), hypothesis: h, references: vec![longer] }]).unwrap();
        let (a, b) = (bleu(&c, n).unwrap(), bleu(&d, n).unwrap());
        prop_assert!(b.brevity_penalty <= a.brevity_penalty);
        prop_assert!(b.score <= a.score);
    }

    #[test]
    fn lcs_is_symmetric(a in words(10, 0), b in words(10, 0)) {
        prop_assert_eq!(lcs_len(&a, &b), lcs_len(&b, &a));
    }

    #[test]
    fn scores_stay_in_range(c in corpus_strategy()) {
        for n in 1..=4 {
            let s = bleu(&c, n).unwrap().score;
            prop_assert!((0.0..=1.0).contains(&s));
        }
        prop_assert!((0.0..=1.0).contains(&rouge_l(&c).unwrap()));
        prop_assert!((0.0..=1.0).contains(&meteor_lite(&c).unwrap()));
        prop_assert!(cider(&c).unwrap() >= 0.0);
    }
}
