use tdora_web::{attention_view, audit_lines};

#[test]
fn attention_rows_are_distributions() {
    let v = attention_view(3, 4, true, false).unwrap();
    assert_eq!(v.weights.len(), 4);
    for head in &v.weights {
        for row in head {
            assert_eq!(row.len(), v.frames);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn lora_is_reversal_blind_and_temporal_dora_is_not() {
    let v = attention_view(5, 2, true, false).unwrap();
    assert!(v.lora_reversal_gap <= 1e-12, "{}", v.lora_reversal_gap);
    assert!(v.tdora_reversal_gap > 1e-6, "{}", v.tdora_reversal_gap);
}

#[test]
fn reversing_flips_the_answer_and_the_track() {
    let a = attention_view(1, 4, true, false).unwrap();
    let b = attention_view(1, 4, true, true).unwrap();
    assert_ne!(a.answer, b.answer);
    let rev: Vec<f64> = a.position.iter().rev().copied().collect();
    assert_eq!(rev, b.position);
}

#[test]
fn bad_heads_are_reported() {
    assert!(attention_view(1, 3, true, false).is_err());
}

#[test]
fn audit_matches_the_toy_model_counts() {
    let lines = audit_lines(32, 8, 4).unwrap();
    let get = |m: &str| lines.iter().find(|l| l.method == m).unwrap();
    assert_eq!(get("lora").out, 512);
    assert_eq!(get("temporal-dora").qkv, 1440);
    assert_eq!(get("temporal-dora").out, 864);
    assert_eq!(get("st-adapter").per_block, 2096 + 1072);
    assert!(get("temporal-dora").ratio < get("st-adapter").ratio);
}

#[test]
fn metrics_round_trip_as_json() {
    let s = tdora_web::text_metrics("a tool is visible", "a tool is visible").unwrap();
    let v: serde_json::Value = serde_json::from_str(&s).unwrap();
    for k in ["bleu4", "rouge_l", "acc"] {
        assert_eq!(v[k], 1.0, "{k}");
    }
    // One chunk over four matches still pays 0.5 * (1/4)^3.
    assert_eq!(v["meteor"], 1.0 - 0.5 / 64.0);
}
