//! Runs every acceptance criterion at full scale and prints one line each.
//! Exits non-zero if a criterion fails that is not a documented shortfall.

use std::process::ExitCode;
use std::time::Instant;

use occam_harness::{run, Experiment, ExperimentConfig, Report};

/// Criteria whose thresholds exact Bayesian computation does not reach; see README.
const KNOWN_SHORTFALLS: [u32; 2] = [3, 8];

type Step = (&'static str, fn(&mut Vec<Check>));

struct Check {
    id: u32,
    pass: bool,
    detail: String,
}

fn report(e: Experiment, overrides: &[&str]) -> Report {
    let overrides: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    let cfg = ExperimentConfig::resolve(e, None, None, None, &overrides).unwrap();
    run(&cfg).unwrap_or_else(|err| panic!("{}: {err}", e.name()))
}

fn get(r: &Report, key: &str) -> f64 {
    r.aggregate(key).unwrap_or_else(|| panic!("{}: missing aggregate {key}", r.experiment))
}

fn tables(r: &Report) -> Vec<(String, Vec<u8>)> {
    r.tables.iter().map(|(k, t)| (k.clone(), t.to_csv().unwrap())).collect()
}

fn markov(checks: &mut Vec<Check>) {
    let r = report(Experiment::MarkovPosterior, &["orders=[1,3]", "true_orders=[1,3]", "lens=[300,1000]"]);
    let f1 = get(&r, "order-1.frac_p_true_gt_0.95");
    let f3 = get(&r, "order-3.frac_p_true_gt_0.95");
    checks.push(Check {
        id: 1,
        pass: f1 >= 0.90 && f3 >= 0.90,
        detail: format!("frac p(true)>0.95: order-1 T=300 {f1}, order-3 T=1000 {f3} (need >= 0.90)"),
    });
    let kl = get(&r, "order-1.mean_kl");
    let n = get(&r, "order-1.kl_trials");
    checks.push(Check {
        id: 2,
        pass: kl < 0.05 && n > 0.0,
        detail: format!("mean KL(raw bigram || bayes) = {kl} over {n} trials (need < 0.05)"),
    });

    let r = report(Experiment::MarkovPosterior, &["orders=[1,2,3]", "true_orders=[1,2,3]", "lens=[1000]"]);
    let agree: Vec<f64> = (1..=3).map(|s| get(&r, &format!("order-{s}.map_agreement_exact_bic"))).collect();
    checks.push(Check {
        id: 3,
        pass: agree.iter().all(|&a| a >= 0.95),
        detail: format!("exact/BIC argmax agreement at T=1000 for orders 1,2,3: {agree:?} (need >= 0.95 each)"),
    });
}

fn regression(checks: &mut Vec<Check>) {
    let r = report(Experiment::RegressionPosterior, &["dim=20", "len=15", "complex_trials=100"]);
    let s = get(&r, "simple.frac_pass");
    let c = get(&r, "complex.frac_pass");
    checks.push(Check {
        id: 4,
        pass: s >= 0.95 && c == 1.0,
        detail: format!("simple pass fraction {s} (need >= 0.95), complex p(d)=1 fraction {c} (need 1)"),
    });

    let r = report(Experiment::WishartGap, &[]);
    let z = get(&r, "identity.max_abs_z");
    let band: Vec<f64> = [16, 32, 64, 128]
        .iter()
        .map(|d| get(&r, &format!("gap.d{d}.mean_over_d_ln_d")))
        .collect();
    let lo = band.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = band.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check {
        id: 5,
        pass: z < 3.0 && lo >= 0.1 && hi <= 0.5 && hi / lo <= 1.25,
        detail: format!("max |z| = {z} (need < 3); gap/(d ln d) over d=16..128 in [{lo}, {hi}] (band [0.1, 0.5], ratio <= 1.25)"),
    });
}

fn attention(checks: &mut Vec<Check>) {
    let r = report(Experiment::AttentionVerify, &["vocab_size=3", "len=200", "c_values=[40,80]"]);
    let e40 = get(&r, "c40.max_error");
    let e80 = get(&r, "c80.trial0_error");
    checks.push(Check {
        id: 6,
        pass: e40 < 1e-2 && e80 < 1e-3,
        detail: format!("c=40 max error over 50 sequences {e40:e} (need < 1e-2), c=80 fixed-seed error {e80:e} (need < 1e-3)"),
    });
}

fn pcfg(checks: &mut Vec<Check>) {
    let r = report(Experiment::Pcfg, &["blocks=100000", "count_limit=12"]);
    let err = get(&r, "boundary.max_abs_err");
    let ok = get(&r, "boundary.ok_rows");
    let zero = get(&r, "simple.exact_zero_same_letter");
    let ps = get(&r, "enumeration.min_p_simple");
    checks.push(Check {
        id: 7,
        pass: err < 0.01 && ok > 0.0 && zero == 1.0 && ps > 0.5,
        detail: format!(
            "boundary max |err| {err} over {ok} rows (need < 0.01); simple P(a|a)=P(b|b)=0: {}; min p(simple) over count pairs {ps} (need > 0.5)",
            zero == 1.0
        ),
    });
}

fn boolean(checks: &mut Vec<Check>) {
    let r = report(Experiment::BooleanOracle, &["dims=[5]", "n_examples=[10]"]);
    let s = get(&r, "ambiguous.d5.n10.agree_simple");
    let c = get(&r, "complex.d5.n10.agree_complex");
    checks.push(Check {
        id: 8,
        pass: s >= 0.95 && c >= 0.95,
        detail: format!("ambiguous prompts agree with simple {s} (need >= 0.95); complex prompts agree with complex {c} (need >= 0.95)"),
    });
}

fn determinism(checks: &mut Vec<Check>) {
    let mut mismatched = Vec::new();
    for e in Experiment::ALL {
        let extra: &[&str] = match e {
            Experiment::LlmProbe => &["backend=\"bayes-oracle\""],
            _ => &[],
        };
        let first = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| report(e, extra));
        let second = report(e, extra);
        if tables(&first) != tables(&second) || first.aggregates != second.aggregates {
            mismatched.push(e.name());
        }
    }
    checks.push(Check {
        id: 9,
        pass: mismatched.is_empty(),
        detail: format!(
            "{} experiments re-run (1 thread vs pool), CSV bytes differ for: {mismatched:?}",
            Experiment::ALL.len()
        ),
    });
}

fn main() -> ExitCode {
    let mut checks = Vec::new();
    let steps: [Step; 6] = [
        ("markov", markov),
        ("regression", regression),
        ("attention", attention),
        ("pcfg", pcfg),
        ("boolean", boolean),
        ("determinism", determinism),
    ];
    for (name, step) in steps {
        let t = Instant::now();
        step(&mut checks);
        eprintln!("{name}: {:.1}s", t.elapsed().as_secs_f64());
    }
    checks.sort_by_key(|c| c.id);

    let mut unexpected = 0;
    for c in &checks {
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        let note = if !c.pass && KNOWN_SHORTFALLS.contains(&c.id) {
            " [known shortfall]"
        } else {
            ""
        };
        println!("{verdict} criterion {}: {}{note}", c.id, c.detail);
        if !c.pass && note.is_empty() {
            unexpected += 1;
        }
    }
    let passed = checks.iter().filter(|c| c.pass).count();
    println!("acceptance: {passed}/{} criteria pass, {unexpected} unexpected failures", checks.len());
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
