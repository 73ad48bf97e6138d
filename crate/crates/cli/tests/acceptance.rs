//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use cvsteer::fock::{populations_from_radial_wigner, DensityMatrix, DEFAULT_N_MAX};
use cvsteer::metrology::{metrological_power, qfi_quadrature};
use cvsteer::sampling::{sample_gaussian_two_mode, SeededStream};
use cvsteer::tomography::estimate_cm;
use cvsteer::wigner::{
    negativity_closed_form, negativity_from_purities, negativity_numeric, wigner_subtracted,
    NegativityQuadrature,
};
use cvsteer::{
    steering_threshold_eta_b, ChannelParams, PhaseSpacePoint, SqueezingSpec,
    SubtractedStateParams, TwoModeCovariance,
};
use cvsteer_cli::pipeline::run_single;
use cvsteer_cli::{run_experiment_pipeline, run_sweep, RunConfig};

const ENSEMBLE_SIZE: usize = 1200;
const ENSEMBLE_SEED: u64 = 20_241;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

/// Physical symmetric-family states drawn from lossy two-mode squeezing.
struct Member {
    spec: SqueezingSpec,
    eta_a: f64,
    eta_b: f64,
    xi: f64,
}

impl Member {
    fn params(&self, xi: f64) -> SubtractedStateParams {
        let ch = ChannelParams::new(self.eta_a, self.eta_b).unwrap();
        let cm = TwoModeCovariance::from_squeezing(self.spec, ch).unwrap();
        SubtractedStateParams::new(cm, xi).unwrap()
    }
}

fn ensemble() -> Vec<Member> {
    let mut rng = SeededStream::new(ENSEMBLE_SEED);
    (0..ENSEMBLE_SIZE)
        .map(|_| {
            let v_plus = 0.2 + 0.79 * rng.uniform();
            let v_minus = (1.0 + 0.6 * rng.uniform()) / v_plus;
            Member {
                spec: SqueezingSpec::new(v_plus, v_minus).unwrap(),
                eta_a: 0.05 + 0.95 * rng.uniform(),
                eta_b: 0.05 + 0.95 * rng.uniform(),
                xi: 0.9 + 0.1 * rng.uniform(),
            }
        })
        .collect()
}

fn oracle_equivalence(members: &[Member]) -> Outcome {
    let opts = NegativityQuadrature::default();
    let mut worst = 0.0f64;
    for m in members {
        let params = m.params(m.xi);
        let closed = negativity_closed_form(&params).unwrap().value;
        match negativity_numeric(&params, &opts) {
            Ok(numeric) => worst = worst.max((closed - numeric.value).abs()),
            Err(e) => return outcome(false, format!("numeric oracle failed: {e}")),
        }
    }
    outcome(
        worst < 1e-6,
        format!("{} states, max |closed - numeric| = {worst:.2e}", members.len()),
    )
}

fn steering_equivalence(members: &[Member]) -> Outcome {
    let (mut checked, mut mismatches, mut negative) = (0, 0, 0);
    for member in members {
        let params = member.params(1.0);
        let cm = params.cm();
        if (cm.m() * (cm.n() - 1.0) - cm.correlation_sq()).abs() < 1e-6 {
            continue;
        }
        checked += 1;
        let n = negativity_closed_form(&params).unwrap().value;
        let g = cm.steerability_b_to_a();
        if n > 1e-9 {
            negative += 1;
        }
        if (n > 1e-9) != (g > 1e-9) {
            mismatches += 1;
        }
    }
    outcome(
        mismatches == 0 && negative > 0 && negative < checked,
        format!("{checked} states ({negative} negative), {mismatches} mismatches"),
    )
}

fn threshold_reproduction() -> Outcome {
    let high = SqueezingSpec::new(0.67, 1.61).unwrap();
    let low = SqueezingSpec::new(0.74, 1.38).unwrap();
    let cases = [
        (high, 1.0, 0.701),
        (low, 1.0, 0.623),
        (high, 0.99, 0.709),
        (low, 0.98, 0.637),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (spec, xi, reported) in cases {
        let eta = match steering_threshold_eta_b(spec, xi) {
            Ok(eta) => eta,
            Err(e) => return outcome(false, format!("threshold failed: {e}")),
        };
        // The closed-form negativity must switch on at the threshold.
        let at = |eta_b: f64| {
            let ch = ChannelParams::new(0.9, eta_b).unwrap();
            let cm = TwoModeCovariance::from_squeezing(spec, ch).unwrap();
            negativity_closed_form(&SubtractedStateParams::new(cm, xi).unwrap())
                .unwrap()
                .value
        };
        ok &= (eta - reported).abs() <= 0.03 && at(eta - 1e-3) == 0.0 && at(eta + 1e-3) > 0.0;
        parts.push(format!("{eta:.3} vs {reported}"));
    }
    outcome(ok, parts.join(", "))
}

fn point_values() -> Outcome {
    let measured = TwoModeCovariance::symmetric(1.056, 1.056, -0.287).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for (xi, expected) in [(1.0, 0.101), (0.98, 0.090)] {
        let params = SubtractedStateParams::new(measured, xi).unwrap();
        let closed = negativity_closed_form(&params).unwrap().value;
        let purity = negativity_from_purities(measured.purities(), xi).unwrap().value;
        let numeric = negativity_numeric(&params, &NegativityQuadrature::default())
            .unwrap()
            .value;
        ok &= (closed - expected).abs() <= 0.002
            && (purity - expected).abs() <= 0.002
            && (numeric - expected).abs() <= 0.002
            && (closed - purity).abs() < 1e-6
            && (closed - numeric).abs() < 1e-6;
        parts.push(format!("xi={xi}: N={closed:.4} (purity {purity:.4}, numeric {numeric:.4})"));
    }
    outcome(ok, parts.join("; "))
}

fn alice_loss_robustness() -> Outcome {
    let spec = SqueezingSpec::new(0.74, 1.38).unwrap();
    let state = |eta_a: f64| {
        let ch = ChannelParams::new(eta_a, 0.9).unwrap();
        let cm = TwoModeCovariance::from_squeezing(spec, ch).unwrap();
        SubtractedStateParams::new(cm, 0.98).unwrap()
    };
    let (lo, hi) = (state(0.3), state(0.9));
    let dn = (negativity_closed_form(&lo).unwrap().value
        - negativity_closed_form(&hi).unwrap().value)
        .abs();
    let mut dw = 0.0f64;
    for i in 0..41 {
        for j in 0..41 {
            let pt = PhaseSpacePoint::new(-4.0 + 0.2 * i as f64, -4.0 + 0.2 * j as f64);
            dw = dw.max((wigner_subtracted(&lo, pt) - wigner_subtracted(&hi, pt)).abs());
        }
    }
    let power = |p: &SubtractedStateParams| {
        let pops = populations_from_radial_wigner(p, DEFAULT_N_MAX).unwrap();
        metrological_power(&DensityMatrix::from_populations(&pops).unwrap())
            .unwrap()
            .metrological_power
    };
    let dm = (power(&lo) - power(&hi)).abs();
    outcome(
        dn < 1e-10 && dw < 1e-10 && dm < 1e-10,
        format!("eta_a 0.3 vs 0.9: dN={dn:.1e}, max dW={dw:.1e}, dM={dm:.1e}"),
    )
}

const PIPELINE_CONFIG: &str = r#"
[[squeezing]]
v_plus = 0.74
v_minus = 1.38

[channel]
eta_a = 0.9
eta_b = 0.9

[herald]
xi = 0.98

[sampling]
samples = 30000
seeds = [1]

[tomography]
n_max = 15
"#;

fn tomography_fidelity() -> Outcome {
    let config = RunConfig::from_toml(PIPELINE_CONFIG).unwrap();
    let point = config.points().unwrap()[0];
    let seeds = 1..=20u64;
    let mut passing = 0;
    let mut worst_time = Duration::ZERO;
    let mut lowest = f64::INFINITY;
    for seed in seeds.clone() {
        match run_single(&config, &point, seed) {
            Ok((run, _)) => {
                lowest = lowest.min(run.fidelity);
                worst_time = worst_time.max(run.elapsed);
                if run.fidelity >= 0.95 {
                    passing += 1;
                }
            }
            Err(e) => return outcome(false, format!("seed {seed}: {e:#}")),
        }
    }
    let total = seeds.count();
    outcome(
        passing * 100 >= 95 * total && worst_time < Duration::from_secs(60),
        format!(
            "{passing}/{total} seeds with fidelity >= 0.95 (lowest {lowest:.4}), slowest seed {:.1} s",
            worst_time.as_secs_f64()
        ),
    )
}

fn cm_estimation() -> Outcome {
    let measured = TwoModeCovariance::symmetric(1.056, 1.056, -0.287).unwrap();
    let samples = sample_gaussian_two_mode(&measured, 1_000_000, 7).unwrap();
    let est = match estimate_cm(&samples) {
        Ok(est) => est,
        Err(e) => return outcome(false, format!("estimate failed: {e}")),
    };
    let truth = [1.056, 1.056, 1.056, 1.056, -0.287, 0.287];
    let worst = est
        .elements
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let worst_se = est.std_errors.iter().copied().fold(0.0, f64::max);
    outcome(
        worst <= 0.01 && worst_se <= 0.01,
        format!("max element error {worst:.4}, max std error {worst_se:.4}"),
    )
}

fn heralded_power(db: f64, eta_b: f64) -> f64 {
    let spec = SqueezingSpec::from_db(-db, db).unwrap();
    let cm = TwoModeCovariance::from_squeezing(spec, ChannelParams::new(0.9, eta_b).unwrap())
        .unwrap();
    let params = SubtractedStateParams::new(cm, 1.0).unwrap();
    let pops = populations_from_radial_wigner(&params, DEFAULT_N_MAX).unwrap();
    metrological_power(&DensityMatrix::from_populations(&pops).unwrap())
        .unwrap()
        .metrological_power
}

fn metrology_properties() -> Outcome {
    let vac = DensityMatrix::vacuum(DEFAULT_N_MAX + 1).unwrap();
    let m_vac = metrological_power(&vac).unwrap().metrological_power;
    let one = DensityMatrix::fock_state(DEFAULT_N_MAX + 1, 1).unwrap();
    let m_one = metrological_power(&one).unwrap().metrological_power;
    let vac_qfi_ok = (0..64).all(|i| {
        let phi = i as f64 * std::f64::consts::PI / 32.0;
        (qfi_quadrature(&vac, phi).unwrap() - 2.0).abs() <= 1e-10
    });
    let weak = heralded_power(1.0, 0.9);
    let strong = heralded_power(3.0, 0.9);
    let monotone = [1.0, 3.0].iter().all(|&db| {
        let curve: Vec<f64> = (0..=10).map(|i| heralded_power(db, 1.0 - 0.05 * i as f64)).collect();
        curve.windows(2).all(|w| w[1] <= w[0] + 1e-12)
    });
    outcome(
        m_vac == 0.0
            && (m_one - 1.0).abs() <= 1e-8
            && vac_qfi_ok
            && weak > strong
            && strong > 0.0
            && monotone,
        format!(
            "M(vac)={m_vac}, M(|1>)={m_one:.10}, M(-1/+1 dB)={weak:.4} > M(-3/+3 dB)={strong:.4}, monotone={monotone}"
        ),
    )
}

fn purity_identity(members: &[Member]) -> Outcome {
    let mut worst = 0.0f64;
    for m in members {
        let params = m.params(m.xi);
        let closed = negativity_closed_form(&params).unwrap().value;
        match negativity_from_purities(params.cm().purities(), m.xi) {
            Ok(p) => worst = worst.max((closed - p.value).abs()),
            Err(e) => return outcome(false, format!("purity route failed: {e}")),
        }
    }
    outcome(
        worst < 1e-10,
        format!("{} states, max difference {worst:.2e}", members.len()),
    )
}

fn read_all(dir: &Path, files: &[&str]) -> Vec<Vec<u8>> {
    files.iter().map(|f| fs::read(dir.join(f)).unwrap()).collect()
}

fn reproducibility() -> Outcome {
    let sweep_config = RunConfig::from_toml(
        r#"
[[squeezing]]
v_plus = 0.74
v_minus = 1.38
xi = 0.98

[[squeezing]]
db_plus = -1.0
db_minus = 1.0

[channel]
eta_a = [0.3, 0.9]
eta_b = { start = 0.5, stop = 1.0, step = 0.05 }
"#,
    )
    .unwrap();
    let pipeline_config = RunConfig::from_toml(PIPELINE_CONFIG).unwrap();
    let dirs: Vec<_> = (0..4).map(|_| tempfile::tempdir().unwrap()).collect();
    for d in &dirs[..2] {
        run_sweep(&sweep_config, d.path()).unwrap();
    }
    for d in &dirs[2..] {
        run_experiment_pipeline(&pipeline_config, d.path()).unwrap();
    }
    let sweep_files = ["sweep.csv", "manifest.toml"];
    let pipeline_files = [
        "pipeline.csv",
        "manifest.toml",
        "p000_s1/records.csv",
        "p000_s1/rho.txt",
        "p000_s1/wigner.csv",
    ];
    let sweep_same = read_all(dirs[0].path(), &sweep_files) == read_all(dirs[1].path(), &sweep_files);
    let pipeline_same =
        read_all(dirs[2].path(), &pipeline_files) == read_all(dirs[3].path(), &pipeline_files);
    outcome(
        sweep_same && pipeline_same,
        format!("sweep identical: {sweep_same}, pipeline identical: {pipeline_same}"),
    )
}

fn main() -> ExitCode {
    let members = ensemble();
    type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;
    let criteria: Vec<(&str, Check)> = vec![
        ("1 oracle equivalence", Box::new(|| oracle_equivalence(&members))),
        ("2 steering-negativity equivalence", Box::new(|| steering_equivalence(&members))),
        ("3 threshold reproduction", Box::new(threshold_reproduction)),
        ("4 point values", Box::new(point_values)),
        ("5 eta_a robustness", Box::new(alice_loss_robustness)),
        ("6 tomography fidelity", Box::new(tomography_fidelity)),
        ("7 covariance estimation", Box::new(cm_estimation)),
        ("8 metrology properties", Box::new(metrology_properties)),
        ("9 purity-route identity", Box::new(|| purity_identity(&members))),
        ("10 reproducibility", Box::new(reproducibility)),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let start = Instant::now();
        let result = check();
        if !result.passed {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {} [{:.1} s]",
            if result.passed { "PASS" } else { "FAIL" },
            result.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
