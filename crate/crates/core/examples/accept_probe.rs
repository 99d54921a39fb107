// Scratch probe for tuning the robustness acceptance runs. Not part of the
// shipped interface.

use ringfl::adversary::{AttackKind, AttackSpec, Knowledge};
use ringfl::aggregators::GarSpec;
use ringfl::harness::{run_experiment, Architecture, ExperimentConfig, TaskChoice};
use ringfl::tasks::ClassificationParams;
use ringfl::vector::HyperParams;
use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::Instant;

fn base_config(eta: f64, class_sep: f64, batch: usize, rounds: usize, full_batch: bool, lambda: i32, per_client: usize) -> ExperimentConfig {
    ExperimentConfig {
        params: HyperParams {
            n: 30,
            f: 6,
            d: 200,
            m: 32,
            lambda,
            eta,
            rounds,
            q: 0.5,
        },
        architecture: Architecture::Brace,
        attack: AttackSpec::none(),
        task: TaskChoice::Classification(ClassificationParams {
            classes: 10,
            features: 20,
            train_per_client: per_client,
            test_samples: 1000,
            class_sep,
            spread: 1.0,
            batch_size: batch,
        }),
        full_batch,
        seeds: vec![1, 2, 3, 4, 5],
        output_dir: PathBuf::from("/tmp/probe"),
    }
}

fn with_arch(mut c: ExperimentConfig, arch: Architecture) -> ExperimentConfig {
    c.architecture = arch;
    c
}

fn with_attack(mut c: ExperimentConfig, kind: AttackKind, f: usize) -> ExperimentConfig {
    c.params.f = f;
    c.attack = AttackSpec {
        kind,
        malicious: (0..f).collect::<BTreeSet<usize>>(),
        knowledge: Knowledge::Full,
    };
    c
}

fn run(label: &str, c: &ExperimentConfig) -> f64 {
    let t = Instant::now();
    let r = run_experiment(c).expect(label);
    println!(
        "{label:<32} median_err={:.4} median_loss={:.4}  ({:.1?})",
        r.median_final_metric,
        r.median_final_loss,
        t.elapsed()
    );
    r.median_final_metric
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let eta: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.05);
    let sep: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(3.0);
    let batch: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(32);
    let rounds: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(500);
    let full_batch = args.get(5).map(|s| s == "full").unwrap_or(false);
    let lambda: i32 = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(5);
    let per_client: usize = args.get(7).and_then(|s| s.parse().ok()).unwrap_or(60);
    println!("eta={eta} sep={sep} batch={batch} rounds={rounds} full_batch={full_batch} lambda={lambda}");

    let base = base_config(eta, sep, batch, rounds, full_batch, lambda, per_client);

    println!("--- criterion 6 (trim attack, f=6 / 20%) ---");
    let brace_clean = run("brace clean", &base);
    let brace_trim = run(
        "brace trim",
        &with_attack(base.clone(), AttackKind::Trim { b: 2.0 }, 6),
    );
    let rar_clean = run("rar-mean clean", &with_arch(base.clone(), Architecture::RarMean));
    let rar_trim = run(
        "rar-mean trim",
        &with_attack(with_arch(base.clone(), Architecture::RarMean), AttackKind::Trim { b: 2.0 }, 6),
    );
    let med_clean = run(
        "sc:median clean",
        &with_arch(base.clone(), Architecture::ServerClient(GarSpec::Median)),
    );
    let med_trim = run(
        "sc:median trim",
        &with_attack(
            with_arch(base.clone(), Architecture::ServerClient(GarSpec::Median)),
            AttackKind::Trim { b: 2.0 },
            6,
        ),
    );
    let tm_clean = run(
        "sc:trimmed-mean clean",
        &with_arch(base.clone(), Architecture::ServerClient(GarSpec::TrimmedMean { k: 6 })),
    );
    let tm_trim = run(
        "sc:trimmed-mean trim",
        &with_attack(
            with_arch(base.clone(), Architecture::ServerClient(GarSpec::TrimmedMean { k: 6 })),
            AttackKind::Trim { b: 2.0 },
            6,
        ),
    );
    println!(
        "deg: brace={:.4} (need <=0.03)  rar={:.4} (need >=0.05)  median={:.4} trimmed={:.4} (both > brace)",
        brace_trim - brace_clean,
        rar_trim - rar_clean,
        med_trim - med_clean,
        tm_trim - tm_clean
    );

    println!("--- criterion 7 (adaptive attack fractions) ---");
    let f40 = (0.40f64 * 30.0).round() as usize;
    let f45 = (0.45f64 * 30.0).round() as usize;
    let b40 = run(
        &format!("brace trim f={f40}"),
        &with_attack(base.clone(), AttackKind::Trim { b: 2.0 }, f40),
    );
    let b45 = run(
        &format!("brace adaptive f={f45}"),
        &with_attack(base.clone(), AttackKind::AdaptiveBrace { lambda }, f45),
    );
    println!(
        "40%: {:.4} vs clean {:.4} (need within 0.05) ; 45%: {:.4} (need >= clean+0.15)",
        b40, brace_clean, b45
    );
}
