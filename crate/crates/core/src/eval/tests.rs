use super::*;
use crate::inventory::fixture::*;
use crate::inventory::Inventory;
use crate::policy::Recommender;
use crate::IntentId;
use std::sync::Arc;

struct Fixed(&'static str, Vec<LabelId>);

impl Recommender for Fixed {
    fn name(&self) -> &str {
        self.0
    }

    fn recommend(&self, _text: &str, n: usize) -> Trajectory {
        Trajectory::new(self.1.iter().copied().take(n).collect()).unwrap()
    }
}

fn corpus() -> Corpus {
    let q = |text: &str, ids: &[u32]| AnnotatedQuery::new(text, ids.iter().map(|&i| IntentId(i)), Split::Test).unwrap();
    Corpus {
        inventory: Arc::new(f1()),
        queries: vec![q("how to apply", &[0, 1, 2]), q("credit card", &[0, 3])],
        seed: 3,
        generator: None,
    }
}

#[test]
fn offline_report_means_and_regeneration() {
    let c = corpus();
    let apply = Fixed("apply-first", vec![X_APPLY, X_CC, X_LOAN]);
    let cancel = Fixed("cancel-first", vec![X_CANCEL, X_QR, X_LOAN]);
    let methods: [&dyn Recommender; 2] = [&apply, &cancel];
    let r = run_offline_eval(&methods, &c, &[1, 3]).unwrap();
    assert_eq!(r.queries, 2);
    // apply-first: n=1 → (1 + 1/2)/2; n=3 → (1 + 1)/2.
    assert_eq!(r.methods[0].recall, vec![0.75, 1.0]);
    // Sum variant at n=3: (|{0,1,2}|+|{0}|+|{1}| = 5)/3 and (1 + 2)/2.
    assert!((r.methods[0].recall_sum[1] - (5.0 / 3.0 + 1.5) / 2.0).abs() < 1e-15);
    // cancel-first: n=1 → (0 + 1/2)/2.
    assert_eq!(r.methods[1].recall[0], 0.25);
    // "credit card" is fully covered by the cc label alone.
    assert_eq!(r.upper_bound, vec![1.0, 1.0]);
    assert_eq!(r.upper_bound_exact, vec![1.0, 1.0]);
    for q in &r.per_query {
        for m in &q.recall {
            for (k, v) in m.iter().enumerate() {
                assert!(*v <= q.upper_bound[k] + 1e-15);
            }
        }
    }
    let again = run_offline_eval(&methods, &c, &[1, 3]).unwrap();
    assert_eq!(r.to_json(), again.to_json());
    assert_eq!(r.to_table(), again.to_table());
    assert!(r.to_table().contains("upper bound"));
}

#[test]
fn empty_test_split_is_an_error() {
    let mut c = corpus();
    c.queries.iter_mut().for_each(|q| q.split = Split::Train);
    let apply = Fixed("a", vec![X_APPLY]);
    assert!(matches!(run_offline_eval(&[&apply], &c, &[3]), Err(EvalError::EmptySplit(_))));
}

#[test]
fn foreign_checkpoint_is_rejected() {
    use crate::policy::{Checkpoint, CheckpointModel, Method, PolicyModel, Vocab};
    use crate::inventory::TokenizerScheme;
    let c = corpus();
    let mut other: Inventory = f1();
    other = Inventory::new(
        other.intents().to_vec(),
        other.labels()[..4].to_vec(),
    )
    .unwrap();
    let vocab = Vocab::build(["how to apply"], TokenizerScheme::Whitespace);
    let model = PolicyModel::new(vocab, 8, 2, 4, 1).unwrap();
    let ck = Checkpoint::new(Method::Rl, "rl", None, CheckpointModel::Policy(model), Arc::new(other));
    assert!(matches!(check_checkpoints(&[ck], &c), Err(EvalError::InventoryMismatch { .. })));
}

#[test]
fn uniform_rows_are_seeded_by_text() {
    let u = UniformRecommender::new(5, 9);
    assert_eq!(u.recommend("a", 3), u.recommend("a", 3));
    assert_eq!(u.recommend("a", 9).len(), 5);
    let distinct: std::collections::BTreeSet<Vec<LabelId>> = (0..20).map(|i| u.recommend(&format!("q{i}"), 2).labels().to_vec()).collect();
    assert!(distinct.len() > 1);
}

#[test]
fn complementarity_rows() {
    let c = corpus();
    let a = Fixed("a", vec![X_APPLY, X_CC]);
    let r = complementarity(&[&a], &c, 2, crate::inventory::TokenizerScheme::Whitespace).unwrap();
    // "apply","credit card": div 1; overlap 1/3 for "how to apply", 2/3 for "credit card".
    assert_eq!(r.rows[0].diversity, 1.0);
    assert!((r.rows[0].overlap - 0.5).abs() < 1e-15);
    assert!(r.to_table().contains("overlap"));
}

#[test]
fn covering_label_set_always_clicks() {
    let c = corpus();
    let all = Fixed("all", vec![X_APPLY, X_CC, X_LOAN, X_QR, X_CANCEL]);
    let cfg = SimConfig {
        sessions: 500,
        ..SimConfig::default()
    };
    let r = simulate_online(&[&all], &c, &cfg).unwrap();
    let row = r.row("all").unwrap();
    assert_eq!((row.t, row.c, row.ctr), (500, 500, 1.0));
    let top = r.row(TOP_K_ROW).unwrap();
    assert_eq!((top.t, top.n), (0, 500));
    assert_eq!(r, simulate_online(&[&all], &c, &cfg).unwrap());
}

#[test]
fn click_rules() {
    let inv = f1();
    let script = |latent: u32, click_u: f64, choice_u: f64| SessionScript {
        query: "how to apply".into(),
        latent: IntentId(latent),
        click_u,
        choice_u,
    };
    let shown = [X_CANCEL, X_CC, X_APPLY];
    // Intent 0 is under cc and apply, in shown order.
    assert_eq!(oracle_click(&inv, &shown, &script(0, 0.0, 0.2), ClickModel::Oracle), Some(X_CC));
    assert_eq!(oracle_click(&inv, &shown, &script(0, 0.0, 0.7), ClickModel::Oracle), Some(X_APPLY));
    assert_eq!(oracle_click(&inv, &[X_LOAN], &script(0, 0.0, 0.5), ClickModel::Oracle), None);
    let noisy = ClickModel::NoisyOracle { p: 0.9 };
    assert_eq!(oracle_click(&inv, &shown, &script(0, 0.95, 0.2), noisy), None);
    assert_eq!(oracle_click(&inv, &shown, &script(0, 0.5, 0.2), noisy), Some(X_CC));
    assert_eq!(session_outcome(&[IntentId(1), IntentId(0)], &script(0, 0.0, 0.0)), crate::service::Resolution::Intent(IntentId(0)));
    assert_eq!(session_outcome(&[IntentId(1)], &script(0, 0.0, 0.0)), crate::service::Resolution::Transfer);
}

#[test]
fn scripts_draw_latent_from_the_potential_set() {
    let c = corpus();
    let s = session_scripts(&c, 2000, 4).unwrap();
    assert_eq!(s, session_scripts(&c, 2000, 4).unwrap());
    for x in &s {
        let aq = c.queries.iter().find(|q| q.text == x.query).unwrap();
        assert!(aq.contains(x.latent));
    }
    let apply = s.iter().filter(|x| x.query == "how to apply").count() as f64 / 2000.0;
    assert!((apply - 0.5).abs() < 0.05);
}
