use super::io::{format_predictions, report_csv};
use super::scores::align;
use super::*;

fn toks(s: &str) -> Vec<String> {
    normalize(s)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 5e-5
}

#[test]
fn normalizer_strips_case_and_punctuation() {
    assert_eq!(
        toks("No, the Scope is ADVANCING."),
        ["no", "the", "scope", "is", "advancing"]
    );
    assert!(toks("  ?! ").is_empty());
}

#[test]
fn bleu_examples() {
    let s = toks("the scope is advancing forward");
    assert_eq!(bleu4(&s, &s), 1.0);
    assert!(bleu4(&toks("a b c d"), &toks("e f g h")) <= 1e-6);
    let v = bleu4(
        &toks("the scope is advancing"),
        &toks("the scope is advancing forward"),
    );
    assert!(close(v, (1.0f64 - 5.0 / 4.0).exp()), "{v}");
    assert!(close(v, 0.7788));
    assert_eq!(bleu4(&[], &s), 0.0);
}

#[test]
fn short_identical_strings_fall_short_of_one() {
    let s = toks("a b c");
    assert!((bleu4(&s, &s) - 1e-9f64.powf(0.25)).abs() < 1e-12);
}

#[test]
fn rouge_examples() {
    let s = toks("a b c");
    assert_eq!(rouge_l(&s, &s), 1.0);
    assert!(close(rouge_l(&s, &toks("a x c")), 2.0 / 3.0));
    assert_eq!(rouge_l(&s, &toks("x y z")), 0.0);
    assert_eq!(rouge_l(&[], &s), 0.0);
}

#[test]
fn rouge_is_symmetric_for_equal_lengths() {
    let (a, b) = (toks("a b c d e"), toks("b a d c e"));
    assert_eq!(rouge_l(&a, &b), rouge_l(&b, &a));
}

#[test]
fn meteor_examples() {
    let s = toks("a b c d");
    assert!(close(
        meteor_lite(&s, &s),
        1.0 - 0.5 * (1.0f64 / 4.0).powi(3)
    ));
    assert_eq!(meteor_lite(&s, &toks("x y")), 0.0);
    let v = meteor_lite(&toks("c a b"), &toks("a b c"));
    assert!(close(v, 0.8519), "{v}");
    assert_eq!(align(&toks("c a b"), &toks("a b c")), (3, 2));
}

#[test]
fn meteor_prefers_fewest_chunks() {
    // "a" can align to either occurrence; the second keeps one chunk
    assert_eq!(align(&toks("a b"), &toks("a x a b")), (2, 1));
}

#[test]
fn keyword_examples() {
    let v = keyword_accuracy(
        &toks("the scope is advancing"),
        &toks("no, the scope is advancing."),
    );
    assert_eq!(v, 0.0);
    let s = toks("a tool is visible");
    assert_eq!(keyword_accuracy(&s, &s), 1.0);
    assert_eq!(
        keyword_accuracy(&toks("yes a tool is visible now"), &s),
        1.0
    );
    assert_eq!(keywords(&toks("no, the scope is advancing.")).len(), 3);
}

#[test]
fn stopword_only_reference_needs_exact_match() {
    assert_eq!(keyword_accuracy(&toks("the"), &toks("the")), 1.0);
    assert_eq!(keyword_accuracy(&toks("the a"), &toks("the")), 0.0);
}

#[test]
fn scores_stay_in_unit_interval() {
    let words = ["a", "b", "c", "the", "is"];
    let mut rng = crate::rng::SplitMix64::new(5);
    for _ in 0..200 {
        let mut sample = || -> Vec<String> {
            let n = rng.below(7);
            (0..n)
                .map(|_| words[rng.below(words.len())].to_string())
                .collect()
        };
        let (p, r) = (sample(), sample());
        for v in [
            bleu4(&p, &r),
            rouge_l(&p, &r),
            meteor_lite(&p, &r),
            keyword_accuracy(&p, &r),
        ] {
            assert!((0.0..=1.0).contains(&v), "{v} for {p:?} / {r:?}");
        }
    }
}

fn rec(p: &str, r: &str, phrasing: Phrasing, q: &str) -> EvalRecord {
    EvalRecord {
        prediction: p.into(),
        reference: r.into(),
        phrasing,
        question_type: q.into(),
    }
}

#[test]
fn perfect_predictions_score_one_with_zero_gap() {
    let recs = vec![
        rec(
            "the scope is advancing",
            "the scope is advancing",
            Phrasing::InTemplate,
            "motion",
        ),
        rec(
            "no tool is present",
            "no tool is present",
            Phrasing::OutOfTemplate,
            "tool",
        ),
    ];
    let report = aggregate(&recs);
    for m in [
        report.in_template.as_ref().unwrap(),
        report.out_of_template.as_ref().unwrap(),
    ] {
        assert_eq!((m.bleu4, m.rouge_l, m.acc), (1.0, 1.0, 1.0));
    }
    let gap = report.gap.unwrap();
    assert_eq!(
        (gap.bleu4, gap.rouge_l, gap.meteor, gap.acc),
        (0.0, 0.0, 0.0, 0.0)
    );
}

#[test]
fn single_record_aggregate_equals_pair_scores() {
    let r = rec(
        "the view is clear",
        "the view is occluded",
        Phrasing::InTemplate,
        "view",
    );
    let report = aggregate(std::slice::from_ref(&r));
    let m = report.in_template.unwrap();
    let s = score_pair(&r.prediction, &r.reference);
    assert_eq!(
        (m.bleu4, m.rouge_l, m.meteor, m.acc),
        (s.bleu4, s.rouge_l, s.meteor, s.acc)
    );
    assert!(report.out_of_template.is_none());
    assert!(report.gap.is_none());
}

#[test]
fn two_record_means() {
    let recs = vec![
        rec("a b c", "a x c", Phrasing::InTemplate, "q"),
        rec("a b c", "a b c", Phrasing::InTemplate, "q"),
    ];
    let m = aggregate(&recs).in_template.unwrap();
    assert!(close(m.rouge_l, (2.0 / 3.0 + 1.0) / 2.0));
    assert_eq!(m.acc, 0.5);
    // pooled unigram precision 5/6, bigrams 2/4, no trigram or 4-gram beyond the exact pair
    let want = (((5.0f64 / 6.0).ln() + (2.0f64 / 4.0).ln() + (1.0f64 / 2.0).ln() + 1e-9f64.ln())
        / 4.0)
        .exp();
    assert!((m.bleu4 - want).abs() < 1e-12, "{} vs {want}", m.bleu4);
}

#[test]
fn empty_input_reports_absent_splits() {
    let report = aggregate(&[]);
    assert!(report.in_template.is_none() && report.overall.is_none() && report.gap.is_none());
}

#[test]
fn degenerate_records_are_flagged() {
    let recs = vec![rec(
        "...",
        "a tool is visible",
        Phrasing::InTemplate,
        "tool",
    )];
    assert!(recs[0].is_degenerate());
    let m = aggregate(&recs).in_template.unwrap();
    assert_eq!(m.degenerate, 1);
    assert_eq!(m.bleu4, 0.0);
}

#[test]
fn predictions_round_trip_through_tsv() {
    let recs = vec![
        rec(
            "the scope is advancing",
            "the scope is withdrawing",
            Phrasing::InTemplate,
            "motion",
        ),
        rec(
            "a tool is visible",
            "a tool is visible",
            Phrasing::OutOfTemplate,
            "tool",
        ),
    ];
    assert_eq!(parse_predictions(&format_predictions(&recs)).unwrap(), recs);
}

#[test]
fn malformed_tsv_names_the_line() {
    let err = parse_predictions("a\tb\tin_template\tq\n\nonly\ttwo\n").unwrap_err();
    assert!(err.to_string().contains("line 3"), "{err}");
    let err = parse_predictions("a\tb\tsideways\tq\n").unwrap_err();
    assert!(err.to_string().contains("sideways"), "{err}");
}

#[test]
fn csv_has_a_row_per_present_split() {
    let recs = vec![
        rec("a b c d", "a b c d", Phrasing::InTemplate, "q"),
        rec("a b c d", "a b x d", Phrasing::OutOfTemplate, "q"),
    ];
    let csv = report_csv(&aggregate(&recs));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("in_template,1,0,1.000000"));
    assert!(lines[4].starts_with("gap,"));
}
