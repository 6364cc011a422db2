mod oracle;

use ldp_metrics::cider::CiderOptions;
use ldp_metrics::{bleu, cider, cider_with, lcs_len, meteor_lite, rouge_l, MetricsError, TokenizedCorpus};

const TOL: f64 = 1e-10;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

#[test]
fn every_metric_matches_its_oracle_on_random_corpora() {
    for seed in 0..100 {
        let c = oracle::random_corpus(seed);
        for n in 1..=4 {
            let (got, want) = (bleu(&c, n).unwrap().score, oracle::bleu(&c, n));
            assert!(close(got, want), "seed {seed} BLEU-{n}: {got} vs {want}");
        }
        let (got, want) = (rouge_l(&c).unwrap(), oracle::rouge_l(&c));
        assert!(close(got, want), "seed {seed} ROUGE-L: {got} vs {want}");
        let (got, want) = (meteor_lite(&c).unwrap(), oracle::meteor(&c));
        assert!(close(got, want), "seed {seed} METEOR: {got} vs {want}");
        if c.len() < 2 {
            assert!(matches!(cider(&c), Err(MetricsError::DegenerateIdf(1))));
            continue;
        }
        let (got, want) = (cider(&c).unwrap(), oracle::cider(&c, None));
        assert!(close(got, want), "seed {seed} CIDEr: {got} vs {want}");
        let opts = CiderOptions { length_sigma: Some(6.0) };
        let (got, want) = (cider_with(&c, &opts).unwrap(), oracle::cider(&c, Some(6.0)));
        assert!(close(got, want), "seed {seed} CIDEr-D: {got} vs {want}");
    }
}

#[test]
fn lcs_matches_subset_enumeration() {
    for seed in 100..400 {
        let c = oracle::random_corpus(seed);
        for it in &c.items {
            for r in &it.references {
                assert_eq!(lcs_len(&it.hypothesis, r), oracle::lcs(&it.hypothesis, r));
            }
        }
    }
}

#[test]
fn hand_fixtures() {
    let c = TokenizedCorpus::from_text([("0", "the cat sat", vec!["the cat sat on mat"])]).unwrap();
    assert!((bleu(&c, 1).unwrap().score - 0.51342).abs() < 1e-5);
    let c = TokenizedCorpus::from_text([("0", "the cat sat", vec!["the cat on the mat"])]).unwrap();
    assert!((rouge_l(&c).unwrap() - 0.5).abs() < 1e-5);
    let c = TokenizedCorpus::from_text([
        ("0", "small sessile polyp in the rectum", vec!["small sessile polyp in the rectum"]),
        ("1", "q", vec!["large flat lesion of the cecum"]),
        ("2", "q", vec!["no polyp seen on withdrawal today"]),
    ])
    .unwrap();
    let per_item = ldp_metrics::cider::cider_items(&c, &CiderOptions::default()).unwrap();
    assert!((per_item[0] - 10.0).abs() < 1e-12);
    assert!((oracle::cider(&c, None) * 3.0 - per_item.iter().sum::<f64>()).abs() < 1e-10);
}
