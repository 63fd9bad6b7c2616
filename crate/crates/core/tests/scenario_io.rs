use bandit_pricing::environment::{DistributorKind, TrafficConfig};
use bandit_pricing::market::{Price, PriceBounds};
use bandit_pricing::policy::PolicySnapshot;
use bandit_pricing::scenario::metrics::{self, read_ndjson, to_csv, write_metrics};
use bandit_pricing::scenario::plots::{
    emit_plot_data, plot_table, PlotKind, DENSITY_POINTS, MANIFEST_FILE,
};
use bandit_pricing::scenario::{bundled, parse_scenario, to_json};
use bandit_pricing::simulation::{
    run_scenario, summarize, AgentKind, AgentSpec, ConvergenceCriterion, ScenarioConfig, StepRecord,
};

fn fixed_agent_config(steps: u64) -> ScenarioConfig {
    ScenarioConfig {
        steps,
        seed: 0,
        traffic: TrafficConfig::constant(100.0, 1.0),
        distributor: DistributorKind::SingleAgentThreshold,
        agents: vec![AgentSpec {
            label: "fixed".into(),
            kind: AgentKind::Deterministic {
                price: Price::new(0.5).unwrap(),
            },
        }],
        price_bounds: PriceBounds::new(0.0, 2.0).unwrap(),
        snapshot_every: 1,
    }
}

fn run_bundled(name: &str) -> (ScenarioConfig, Vec<StepRecord>) {
    let config = bundled::load(name).unwrap().config;
    let records = run_scenario(&config).unwrap();
    (config, records)
}

#[test]
fn ten_step_run_writes_header_plus_ten_rows() {
    let records = run_scenario(&fixed_agent_config(10)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_metrics(&records, dir.path()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join(metrics::CSV_FILE)).unwrap();
    assert_eq!(csv.lines().count(), 11);
    assert!(csv.ends_with('\n'));
    assert!(!csv.contains('\r'));
    assert_eq!(
        csv.lines().next().unwrap(),
        "step,volume,budget,dropped,bid_fixed,served_fixed,reward_fixed,cumrev_fixed,mean_fixed,stddev_fixed"
    );
    assert_eq!(csv.lines().last().unwrap(), "9,100,1,0,0.5,100,50,500,,");
}

#[test]
fn ndjson_sidecar_round_trips() {
    let (_, records) = run_bundled("three_ppo_isa");
    let dir = tempfile::tempdir().unwrap();
    write_metrics(&records, dir.path()).unwrap();
    let reloaded = read_ndjson(&dir.path().join(metrics::NDJSON_FILE)).unwrap();
    assert_eq!(reloaded, records);
}

#[test]
fn writing_twice_is_byte_stable() {
    let (_, records) = run_bundled("bandit_vs_fixed_naive");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    write_metrics(&records, a.path()).unwrap();
    write_metrics(&records, b.path()).unwrap();
    for file in [metrics::CSV_FILE, metrics::NDJSON_FILE] {
        assert_eq!(
            std::fs::read(a.path().join(file)).unwrap(),
            std::fs::read(b.path().join(file)).unwrap()
        );
    }
}

#[test]
fn csv_column_count_is_four_plus_six_per_agent() {
    for name in ["bandit_vs_fixed_naive", "three_ppo_isa"] {
        let (config, records) = run_bundled(name);
        let expected = 4 + 6 * config.agents.len();
        for line in to_csv(&records).lines() {
            assert_eq!(line.split(',').count(), expected, "{name}: {line}");
        }
    }
}

#[test]
fn reference_run_final_mean_column_is_in_range() {
    let (_, records) = run_bundled("fixed_budget_discovery");
    let csv = to_csv(&records);
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "mean_bandit-0").unwrap();
    let last: Vec<&str> = csv.lines().last().unwrap().split(',').collect();
    let mean: f64 = last[col].parse().unwrap();
    assert!((0.85..=1.0).contains(&mean), "{mean}");
}

#[test]
fn empty_records_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert!(write_metrics(&[], dir.path()).is_err());
}

#[test]
fn every_bundled_scenario_parses_runs_and_round_trips() {
    for name in bundled::NAMES {
        let parsed = bundled::load(name).unwrap();
        let reparsed = parse_scenario(&to_json(&parsed.config)).unwrap();
        assert_eq!(reparsed.config, parsed.config, "{name}");
        let records = run_scenario(&parsed.config).unwrap();
        assert_eq!(records.len() as u64, parsed.config.steps, "{name}");
    }
}

fn density_config(mean: f64, stddev: f64) -> (ScenarioConfig, Vec<StepRecord>) {
    let (config, mut records) = run_bundled("fixed_budget_discovery");
    records.truncate(5);
    records[3].agents[0].policy = Some(PolicySnapshot {
        mean,
        stddev,
        step_index: 3,
    });
    (config, records)
}

#[test]
fn density_peaks_at_grid_point_nearest_the_mean() {
    let (config, records) = density_config(1.0, 0.5);
    let table = plot_table(&records, &config, PlotKind::PolicyDensity(3)).unwrap();
    assert_eq!(table.rows.len(), DENSITY_POINTS);
    assert_eq!(table.columns, vec!["price", "pdf_bandit-0"]);
    let peak = table
        .rows
        .iter()
        .max_by(|a, b| a[1].total_cmp(&b[1]))
        .unwrap();
    let nearest = table
        .rows
        .iter()
        .min_by(|a, b| (a[0] - 1.0).abs().total_cmp(&(b[0] - 1.0).abs()))
        .unwrap();
    // 1.0 sits midway between two grid points, so either may hold the peak
    assert!(((peak[0] - 1.0).abs() - (nearest[0] - 1.0).abs()).abs() < 1e-12);
    let mode = 1.0 / (0.5 * (2.0 * std::f64::consts::PI).sqrt());
    let at_grid = mode * (-((peak[0] - 1.0) / 0.5).powi(2) / 2.0).exp();
    assert!((peak[1] - at_grid).abs() < 1e-12);
    assert!((peak[1] - 0.7979).abs() < 1e-3);
    assert_eq!(table.rows[0][0], 0.0);
    assert_eq!(table.rows[DENSITY_POINTS - 1][0], 2.0);
}

#[test]
fn density_at_missing_step_names_the_step() {
    let (config, records) = density_config(1.0, 0.5);
    let err = plot_table(&records, &config, PlotKind::PolicyDensity(77)).unwrap_err();
    assert!(err.to_string().contains("77"), "{err}");
}

#[test]
fn total_revenue_is_nondecreasing() {
    let (config, records) = run_bundled("three_ppo_isa");
    let table = plot_table(&records, &config, PlotKind::TotalRevenue).unwrap();
    for pair in table.rows.windows(2) {
        for (next, prev) in pair[1][1..].iter().zip(&pair[0][1..]) {
            assert!(next >= prev);
        }
    }
}

#[test]
fn race_scenario_never_drops_queries() {
    let (config, records) = run_bundled("three_bandit_race");
    let table = plot_table(&records, &config, PlotKind::ServedVolumes).unwrap();
    let dropped = table.columns.iter().position(|c| c == "dropped").unwrap();
    assert!(table.rows.iter().all(|r| r[dropped] == 0.0));
    assert_eq!(
        summarize(&records, &ConvergenceCriterion::default()).total_dropped,
        0.0
    );
}

#[test]
fn plot_kinds_parse_from_names() {
    assert_eq!(
        "policyTrace".parse::<PlotKind>().unwrap(),
        PlotKind::PolicyTrace
    );
    assert_eq!(
        "policyDensity:999".parse::<PlotKind>().unwrap(),
        PlotKind::PolicyDensity(999)
    );
    assert!("histogram".parse::<PlotKind>().is_err());
    assert!("policyDensity:x".parse::<PlotKind>().is_err());
}

#[test]
fn emitted_files_are_listed_in_the_manifest() {
    let (config, records) = run_bundled("bandit_vs_fixed_naive");
    let dir = tempfile::tempdir().unwrap();
    let kinds = [
        PlotKind::PolicyTrace,
        PlotKind::ServedVolumes,
        PlotKind::RevenueRate,
        PlotKind::TotalRevenue,
        PlotKind::PolicyDensity(999),
    ];
    emit_plot_data(&records, &config, &kinds, dir.path()).unwrap();
    let manifest = std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(manifest.lines().count(), kinds.len());
    for kind in kinds {
        let name = kind.file_name();
        assert!(manifest
            .lines()
            .any(|l| l.split(' ').next() == Some(name.as_str())));
        let data = std::fs::read_to_string(dir.path().join(&name)).unwrap();
        let header = data.lines().next().unwrap();
        assert!(header.starts_with("# "));
        let width = header.split_whitespace().count() - 1;
        for line in data.lines().skip(1) {
            assert_eq!(line.split(' ').count(), width, "{name}");
        }
    }
    let trace = std::fs::read_to_string(dir.path().join("policyTrace.dat")).unwrap();
    assert_eq!(
        trace.lines().next().unwrap(),
        "# step mean_bandit stddev_bandit"
    );
}
