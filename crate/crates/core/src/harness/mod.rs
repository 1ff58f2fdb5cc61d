//! Declarative Monte Carlo experiments: reproducible per-trial seeding,
//! parallel execution with an order-fixed merge, and comparison of
//! empirical frequencies against the analytic operations of the other
//! modules.

mod experiment;
mod report;
mod seed;
mod stats;

pub use experiment::{run_experiment, Comparison, Construction, ExperimentSpec, RunOptions, Statistic, Tolerance};
pub use report::{emit_report, round_sig, write_report, ComparisonRecord, Report, ReportFormat, SIGNIFICANT_DIGITS};
pub use seed::{trial_rng, GENERATOR};
pub use stats::{
    binomial_band, binomial_half_width, compare_distribution, ks_distance, DistributionRule, Interval, OutcomeVerdict,
    OTHER_OUTCOME,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn drunkard(trials: u64) -> ExperimentSpec {
        ExperimentSpec::from_json(&format!(
            r#"{{
                "name": "drunkard",
                "construction": {{
                    "kind": "markov_only",
                    "chain": {{ "family": {{ "constant_pq": "3/5" }}, "boundary": {{ "absorbing": "2/5" }} }},
                    "initial": {{ "1": "1" }},
                    "walk": {{ "max_steps": 100000, "escape_epsilon": 1e-6 }}
                }},
                "trials": {trials},
                "master_seed": 2024,
                "comparisons": [
                    {{ "stat": "absorbed" }},
                    {{ "stat": "max_at_most", "k": 3, "tolerance": {{ "rule": "binomial", "z": 3.0 }} }}
                ]
            }}"#
        ))
        .unwrap()
    }

    fn json(report: &Report) -> String {
        let mut out = Vec::new();
        emit_report(report, ReportFormat::Json, &mut out).unwrap();
        String::from_utf8(out).unwrap()
    }

    #[test]
    fn drunkard_absorption_matches() {
        let report = run_experiment(&drunkard(100_000), &RunOptions::default()).unwrap();
        let absorbed = &report.comparisons[0];
        assert_eq!(absorbed.exact.as_deref(), Some("4/9"));
        assert!((absorbed.empirical - 4.0 / 9.0).abs() < 0.0047, "{}", absorbed.empirical);
        assert!(report.all_passed, "{report:#?}");
        assert_eq!(report.samples.len(), 10);
    }

    #[test]
    fn truncated_recurrent_walk_band_keeps_sampling_width() {
        let spec = ExperimentSpec::from_json(
            r#"{
                "construction": {
                    "kind": "uhf",
                    "chain": { "family": { "constant_pq": "1/2" }, "boundary": { "absorbing": "1/2" } },
                    "initial": { "1": "1" },
                    "walk": { "max_steps": 10000 }
                },
                "trials": 20000,
                "master_seed": 77,
                "comparisons": [ { "stat": "finite_dimensional" } ]
            }"#,
        )
        .unwrap();
        let report = run_experiment(&spec, &RunOptions::default()).unwrap();
        let c = &report.comparisons[0];
        // Survival past 10^4 steps from 1 is about 0.016; the band must sit a
        // full sampling width below that.
        let survival = 1.0 - crate::markov::finite_horizon_absorption(&spec_chain(&spec), 1, 10_000).unwrap();
        let loss = survival + crate::markov::WalkOptions::default().escape_epsilon.unwrap();
        let width = 3.0 * (loss * (1.0 - loss) / 20_000.0).sqrt();
        assert!((c.acceptance.lo - (1.0 - loss - width)).abs() < 1e-9, "{c:?}");
        assert!(c.pass, "{c:?}");
    }

    fn spec_chain(spec: &ExperimentSpec) -> crate::markov::TransitionSpec {
        match &spec.construction {
            Construction::Uhf { chain, .. } => chain.clone(),
            _ => unreachable!(),
        }
    }

    #[test]
    fn single_trial_single_sample() {
        let report = run_experiment(&drunkard(1), &RunOptions::default()).unwrap();
        assert_eq!(report.samples.len(), 1);
        assert_eq!(report.comparisons[0].trials, 1);
    }

    #[test]
    fn reports_are_deterministic_across_thread_counts() {
        let spec = drunkard(5000);
        let one = json(&run_experiment(&spec, &RunOptions { threads: Some(1), ..Default::default() }).unwrap());
        let three = json(&run_experiment(&spec, &RunOptions { threads: Some(3), ..Default::default() }).unwrap());
        assert_eq!(one, three);
        assert_eq!(one, json(&run_experiment(&spec, &RunOptions::default()).unwrap()));
    }

    #[test]
    fn json_round_trip_and_csv_rows() {
        let report = run_experiment(&drunkard(3000), &RunOptions { record_runtime: true, ..Default::default() }).unwrap();
        assert!(report.runtime_seconds.is_some());
        let parsed: Report = serde_json::from_str(&json(&report)).unwrap();
        assert_eq!(parsed, report);
        let mut csv = Vec::new();
        emit_report(&report, ReportFormat::Csv, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 1 + report.comparisons.len());
    }

    #[test]
    fn empty_comparisons_still_emit() {
        let mut spec = drunkard(10);
        spec.comparisons.clear();
        let report = run_experiment(&spec, &RunOptions::default()).unwrap();
        let value: serde_json::Value = serde_json::from_str(&json(&report)).unwrap();
        assert_eq!(value["comparisons"], serde_json::json!([]));
        assert!(report.all_passed);
    }

    #[test]
    fn config_errors_have_locations() {
        let err = ExperimentSpec::from_json("{\n  \"trials\": 1,\n  \"oops\": 3\n}").unwrap_err();
        match err {
            Error::Config { location, .. } => assert!(location.starts_with("line 3"), "{location}"),
            other => panic!("{other:?}"),
        }
        let mut spec = drunkard(10);
        spec.trials = 0;
        assert!(matches!(spec.validate(), Err(Error::Config { location, .. }) if location == "trials"));
        let mut spec = drunkard(10);
        spec.comparisons.push(Comparison {
            statistic: Statistic::Simple,
            tolerance: Tolerance::default(),
        });
        assert!(matches!(spec.validate(), Err(Error::Config { location, .. }) if location == "comparisons[2]"));
    }

    #[test]
    fn write_report_names_the_path() {
        let report = run_experiment(&drunkard(5), &RunOptions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.csv");
        write_report(&report, ReportFormat::Csv, &path).unwrap();
        assert!(std::fs::read_to_string(&path).unwrap().starts_with("statistic,"));
        let missing = dir.path().join("no/such/dir/report.json");
        match write_report(&report, ReportFormat::Json, &missing) {
            Err(Error::Io { path, .. }) => assert_eq!(path, missing),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round_sig(1.0 / 3.0), 0.333333333333);
        assert_eq!(round_sig(0.0), 0.0);
        assert_eq!(round_sig(-2.0 / 3.0 * 1e-9), -6.66666666667e-10);
    }
}
