use proptest::prelude::*;
use qfgn::checkpoint::{parse_checkpoint, Checkpoint};
use qfgn::config::RunConfig;
use qfgn::imaging::make_grid;
use qfgn::models::{build_model, ModelKind};
use qfgn::nn::Mode;

fn kind() -> impl Strategy<Value = ModelKind> {
    prop::sample::select(ModelKind::ALL.to_vec())
}

proptest! {
    #[test]
    fn config_round_trips(
        model in kind(),
        seed in 0u64..1 << 40,
        restarts in 1usize..9,
        lr in 1e-6f64..1.0,
        gamma in 1e-3f64..10.0,
        epochs in 1usize..5000,
        image in "[a-z]{1,8}\\.pgm",
    ) {
        let mut cfg = RunConfig { model, seed, restarts, image, ..RunConfig::default() };
        cfg.train.learning_rate = lr;
        cfg.train.epochs = epochs;
        cfg.fgfs.gamma = gamma;
        let back = RunConfig::parse(&cfg.to_toml()).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn truncated_checkpoints_are_rejected(cut in 0.0f64..1.0) {
        let text = Checkpoint::from_model(&build_model(ModelKind::Siren, 1), &RunConfig::default(), 0.5).to_text();
        let at = ((text.len() - 1) as f64 * cut) as usize;
        let at = (0..=at).rev().find(|&i| text.is_char_boundary(i)).unwrap();
        prop_assert!(parse_checkpoint(&text[..at]).is_err());
    }
}

#[test]
fn save_load_save_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ModelKind::ALL {
        let mut m = build_model(kind, 5);
        m.forward(&make_grid(4, 4), Mode::Train).unwrap();
        let path = dir.path().join(format!("{kind}.ckpt"));
        let ck = Checkpoint::from_model(&m, &RunConfig::default(), 1e-3);
        ck.save(&path).unwrap();
        let first = std::fs::read(&path).unwrap();
        Checkpoint::load(&path).unwrap().save(&path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
    }
}
