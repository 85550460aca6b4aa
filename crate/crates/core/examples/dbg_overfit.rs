use parlance::corpus::{make_dataset, ParallelCorpus};
use parlance::eval::{evaluate_model, BleuConfig};
use parlance::nmt::{build_model, train, ModelSpec, TrainConfig};

fn main() {
    let corpus = ParallelCorpus {
        pairs: vec![
            ("ba ce di".into(), "an el ir".into()),
            ("ce di".into(), "el ir".into()),
        ],
    };
    let ds = make_dataset(&corpus, None).unwrap();
    let spec = ModelSpec::embedded(ds.pad_length, ds.source_vocab.id_bound(), ds.target_vocab.id_bound());
    for (epochs, lr) in [(300usize, 0.02f64), (400, 0.01), (600, 0.01), (800, 0.005)] {
        let mut model = build_model::<f32>(spec, 1).unwrap();
        let config = TrainConfig { epochs, batch_size: 2, lr, seed: 1, shuffle: false };
        let report = train(&mut model, &ds, &ds, &config).unwrap();
        let eval = evaluate_model(&model, &ds, &BleuConfig::default()).unwrap();
        println!("epochs={epochs} lr={lr}: loss={:.5} mean_bleu={} acc_masked={} unscored={}",
            report.final_epoch().unwrap().train_loss, eval.mean_bleu, eval.acc_masked, eval.unscored);
        for r in &eval.rows { println!("   tgt={:?} pred={:?}", r.target, r.predicted); }
    }
}
