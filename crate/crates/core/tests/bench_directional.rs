use ttforecast::bench::{run_bench, BenchConfig, SyntheticSpec};
use ttforecast::model::ModelKind;

// Linear signal with a strong moving-average term, which a truncated AR(10)
// only approximates. ARIMA should give the best one-step forecasts.
#[test]
fn arima_has_lowest_one_step_mae_on_arma_signal() {
    let s = "arma:phi=0.5,theta=0.9,intercept=2,noise=1,n=3000"
        .parse::<SyntheticSpec>()
        .unwrap()
        .generate(21)
        .unwrap();
    let mut cfg = BenchConfig::default();
    cfg.settings.train.epochs = 150;
    cfg.settings.scale = true;
    cfg.parallel = false;
    let r = run_bench(&s, &cfg).unwrap();
    let mae = |k| r.scores(k, 1).unwrap().mae.unwrap();
    for k in ModelKind::ALL {
        eprintln!("{k}: h1 mae {:.5}", mae(k));
    }
    assert_eq!(r.scores(ModelKind::Arima, 1).unwrap().rank_mae, Some(1));
}
