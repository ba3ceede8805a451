use pairmix::artifact::{read_posterior, write_posterior};
use pairmix::avl::{parse_avl, write_avl, Schema};
use pairmix::commands::trajectories_to_events;
use pairmix::config::RouteConfig;
use pairmix::ingest::ingest_events;
use pairmix_core::inference::{gibbs_fit, FitConfig, ModelVariant};
use pairmix_core::synth::{generate_dataset, GroundTruth, StructuredSpec};
use pairmix_core::RngState;

fn synthetic(pairs: usize) -> pairmix_core::synth::SyntheticData {
    let gt = GroundTruth::structured(&StructuredSpec { pairs_per_period: pairs, ..StructuredSpec::default() }).unwrap();
    generate_dataset(&gt).unwrap()
}

#[test]
fn avl_round_trip_reproduces_synthetic_dataset() {
    let data = synthetic(25);
    let route = RouteConfig { route: data.dataset.route.clone(), direction: "0".into() };
    let mut buf = Vec::new();
    write_avl(&mut buf, &trajectories_to_events(&route, &data.trajectories)).unwrap();
    let parsed = parse_avl(&buf[..], &Schema::default()).unwrap();
    assert!(parsed.rejects.is_empty());
    let got = ingest_events(&parsed.events, 0, &route, &data.dataset.period_config).unwrap();
    assert_eq!(got.build.dataset, data.dataset);
    assert_eq!(got.extraction.departures, parsed.events.len() / 2);
}

#[test]
fn posterior_survives_disk() {
    let data = synthetic(20);
    let mut cfg = FitConfig::new(2, 4, ModelVariant::B);
    cfg.d1 = 5;
    cfg.d2 = 7;
    let post = gibbs_fit(&data.dataset, &cfg, RngState::new(3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let meta = write_posterior(dir.path(), &post, "0", "cli", data.dataset.pairs.len()).unwrap();
    let back = read_posterior(dir.path()).unwrap();
    assert_eq!(back.posterior, post);
    assert_eq!(back.meta, meta);
    assert_eq!(meta.config.niw.nu0, 10.0);

    // Any edit to the recorded settings is caught by the hash.
    let path = dir.path().join("meta.json");
    let text = std::fs::read_to_string(&path).unwrap().replace("\"d1\": 5", "\"d1\": 6");
    std::fs::write(&path, text).unwrap();
    assert!(read_posterior(dir.path()).is_err());
}
