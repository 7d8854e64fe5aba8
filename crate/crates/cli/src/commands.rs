use std::fs::File;
use std::path::Path;

use apstab_core::analysis::{
    almost_period_defect, boundedness_check, defect_settling_time, equilibrium, fit_exponential_rate, stationary_rhs,
    trajectory_distance, transient_length, write_distance_csv, DecayReport,
};
use apstab_core::certificate::{
    build_comparison_matrix, certify_at_beta, certify_lemma1, check_pointwise_criterion, maximize_beta,
    spectral_radius, uniform_times, CertificateReport, Feasibility, PointwiseReport,
};
use apstab_core::integrator::{HistoryFunction, IntegrateError, Integrator, SimConfig, SimInfo, Trajectory};
use apstab_core::model::{
    derive_bounds, find_almost_period, validate_assumptions, AlmostPeriodScan, AssumptionReport, BoundsSummary,
    NetworkModel, ValidationGrid,
};
use apstab_core::presets;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::args::RunArgs;
use crate::files::{create, load_model, read_json, write_json, Artifacts};
use crate::{CliError, EXIT_ASSERTION, EXIT_BLOW_UP, EXIT_INFEASIBLE};

fn input<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

fn model_from_args(run: &RunArgs) -> Result<NetworkModel, CliError> {
    let path = run
        .model
        .as_deref()
        .ok_or_else(|| CliError::Input("--model is required".into()))?;
    load_model(path)
}

fn checked_assumptions(model: &NetworkModel) -> Result<AssumptionReport, CliError> {
    let report = validate_assumptions(model, &ValidationGrid::default());
    if report.all_passed() {
        Ok(report)
    } else {
        Err(CliError::Assumptions(report))
    }
}

fn max_delay_horizon(bounds: &BoundsSummary) -> f64 {
    let tau = bounds.tau_sup.iter().flatten().copied().fold(0.0, f64::max);
    let lag = bounds
        .kernels
        .iter()
        .flatten()
        .map(|k| k.max_atom_lag())
        .fold(0.0, f64::max);
    tau + lag
}

fn max_tau(bounds: &BoundsSummary) -> f64 {
    bounds.tau_sup.iter().flatten().copied().fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateFile {
    pub model: String,
    #[serde(flatten)]
    pub report: CertificateReport,
    pub pointwise: Option<PointwiseReport>,
    pub assumptions: AssumptionReport,
}

pub fn certify(run: &RunArgs) -> Result<u8, CliError> {
    certify_model(&model_from_args(run)?, run).map(|(_, code)| code)
}

fn certify_model(model: &NetworkModel, run: &RunArgs) -> Result<(CertificateFile, u8), CliError> {
    let assumptions = checked_assumptions(model)?;
    let bounds = derive_bounds(model).map_err(input)?;
    let rho0 = spectral_radius(&build_comparison_matrix(&bounds, 0.0).map_err(input)?.entries).map_err(input)?;
    let arts = Artifacts::new(&run.out, &model.name)?;

    let (file, code) = match certify_at_beta(&bounds, 0.0).map_err(input)? {
        Feasibility::Infeasible { spectral_radius } => {
            println!(
                "{}: infeasible, spectral radius {spectral_radius:.6} at beta = 0",
                model.name
            );
            let file = CertificateFile {
                model: model.name.clone(),
                report: CertificateReport::infeasible(spectral_radius),
                pointwise: None,
                assumptions,
            };
            (file, EXIT_INFEASIBLE)
        }
        Feasibility::Feasible(_) => {
            let cert = maximize_beta(&bounds, run.beta_tol).map_err(input)?;
            let times = uniform_times(0.0, run.audit_horizon, run.audit_points);
            let pointwise = check_pointwise_criterion(model, &cert, &times).map_err(input)?;
            let cert = cert.mark_pointwise();
            let lemma1 = certify_lemma1(&bounds, &cert.xi).ok();
            println!(
                "{}: feasible, beta = {:.6}, eta = {:.3e}, pointwise min slack = {:.3e}",
                model.name, cert.beta, cert.eta, pointwise.min_slack
            );
            let file = CertificateFile {
                model: model.name.clone(),
                report: CertificateReport::feasible(&cert, Some(&pointwise), Some(rho0), lemma1),
                pointwise: Some(pointwise),
                assumptions,
            };
            (file, 0)
        }
    };
    write_json(&arts.certificate(), &file)?;
    Ok((file, code))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BlowUp {
    trajectory: String,
    time: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SimulationMeta {
    model: String,
    config: SimConfig,
    info: SimInfo,
    seed: u64,
    alt_history: Vec<f64>,
    files: Vec<String>,
    rows: usize,
    blow_up: Option<BlowUp>,
}

fn sim_config(run: &RunArgs) -> SimConfig {
    SimConfig {
        step: run.step,
        horizon: run.horizon,
        tail_tolerance: run.tail_tol,
        quadrature_nodes: run.nodes,
        record_stride: run.stride,
        ..SimConfig::default()
    }
}

/// Constant second history with entries uniform in `[−1, 1]`.
fn seeded_history(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}

pub fn simulate(run: &RunArgs) -> Result<u8, CliError> {
    simulate_model(&model_from_args(run)?, run)
}

fn integrator_for<'m>(model: &'m NetworkModel, run: &RunArgs) -> Result<Integrator<'m>, CliError> {
    let cfg = sim_config(run);
    let built = if run.allow_unverified {
        Integrator::new_unchecked(model, cfg)
    } else {
        Integrator::new(model, cfg)
    };
    built.map_err(|e| match e {
        IntegrateError::Assumptions(_) => {
            CliError::Assumptions(validate_assumptions(model, &ValidationGrid::default()))
        }
        other => input(other),
    })
}

fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<(), CliError> {
    traj.write_csv(create(path)?).map_err(input)
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn simulate_model(model: &NetworkModel, run: &RunArgs) -> Result<u8, CliError> {
    let arts = Artifacts::new(&run.out, &model.name)?;
    let alt_history = seeded_history(model.n, run.seed);
    let alt_model = model
        .clone()
        .with_history(HistoryFunction::constant(alt_history.clone()))
        .map_err(input)?;
    let primary = integrator_for(model, run)?;
    let alt = integrator_for(&alt_model, run)?;
    let mut meta = SimulationMeta {
        model: model.name.clone(),
        config: sim_config(run),
        info: primary.info(),
        seed: run.seed,
        alt_history,
        files: Vec::new(),
        rows: 0,
        blow_up: None,
    };
    for (label, integrator, path) in [
        ("primary", &primary, arts.trajectory()),
        ("alt", &alt, arts.alt_trajectory()),
    ] {
        log::info!("integrating {label} trajectory of {}", model.name);
        match integrator.run() {
            Ok(traj) => {
                write_trajectory(&path, &traj)?;
                meta.rows = traj.len();
                meta.files.push(file_name(&path));
            }
            Err(IntegrateError::BlowUp { time, partial }) => {
                write_trajectory(&path, &partial)?;
                meta.files.push(file_name(&path));
                meta.blow_up = Some(BlowUp {
                    trajectory: label.to_string(),
                    time,
                });
                write_json(&arts.simulation(), &meta)?;
                println!("{}: {label} trajectory blew up at t = {time:.6}", model.name);
                return Ok(EXIT_BLOW_UP);
            }
            Err(e) => return Err(input(e)),
        }
    }
    write_json(&arts.simulation(), &meta)?;
    println!(
        "{}: {} rows per trajectory, s_max = {}, tail bound = {:.3e}",
        model.name, meta.rows, meta.info.s_max, meta.info.tail_bound
    );
    Ok(0)
}

#[derive(Debug, Clone, Serialize)]
struct DecaySection {
    fit: Option<DecayReport>,
    error: Option<String>,
    certified_beta: f64,
    required_rate: f64,
    min_r_squared: f64,
    passed: bool,
}

#[derive(Debug, Clone, Serialize)]
struct BoundSection {
    trajectory: String,
    bound: f64,
    m0: f64,
    tolerance: f64,
    worst_margin: f64,
    passed: bool,
}

#[derive(Debug, Clone, Serialize)]
struct AlmostPeriodSection {
    epsilon: f64,
    scan_range: (f64, f64),
    window: (f64, f64),
    candidates: usize,
    checked: usize,
    beyond_horizon: usize,
    worst_defect: Option<f64>,
    best_omega: Option<f64>,
    best_defect: Option<f64>,
    settling_level: f64,
    settling_time: Option<f64>,
    tolerance: f64,
    /// The tolerance is an empirical envelope, not a proven bound.
    empirical_envelope: bool,
    evaluated: bool,
    note: Option<String>,
    passed: bool,
}

#[derive(Debug, Clone, Serialize)]
struct EquilibriumSection {
    state: Option<Vec<f64>>,
    newton_residual: Option<f64>,
    final_residual: f64,
    final_distance: Option<f64>,
    tolerance: f64,
    passed: bool,
}

#[derive(Debug, Clone, Serialize)]
struct Assertion {
    name: String,
    passed: bool,
}

#[derive(Debug, Clone, Serialize)]
struct AnalysisReport {
    model: String,
    beta: f64,
    xi: Vec<f64>,
    decay: DecaySection,
    boundedness: Vec<BoundSection>,
    almost_period: Option<AlmostPeriodSection>,
    equilibrium: Option<EquilibriumSection>,
    assertions: Vec<Assertion>,
    passed: bool,
}

pub fn analyze(run: &RunArgs) -> Result<u8, CliError> {
    analyze_model(&model_from_args(run)?, run)
}

fn read_trajectory(path: &Path, tag: &str) -> Result<Trajectory, CliError> {
    let file = File::open(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    Trajectory::read_csv(file, tag).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

#[allow(clippy::too_many_arguments)]
fn decay_section(
    model: &NetworkModel,
    run: &RunArgs,
    bounds: &BoundsSummary,
    beta: f64,
    xi: &[f64],
    arts: &Artifacts,
    traj: &Trajectory,
    alt: &Trajectory,
) -> Result<DecaySection, CliError> {
    let distance = trajectory_distance(traj, alt, xi).map_err(input)?;
    write_distance_csv(&distance, create(&arts.distance())?).map_err(input)?;
    let start = run.window_start.unwrap_or_else(|| max_delay_horizon(bounds).max(2.0));
    let end = run.window_end.unwrap_or_else(|| (start + 6.0).min(traj.end()));
    let required_rate = run.rate_factor * beta;
    let (fit, error, passed) = match fit_exponential_rate(&distance, (start, end), run.floor) {
        Ok(fit) => {
            let passed = fit.rate >= required_rate && fit.r_squared >= run.min_r2;
            (Some(fit), None, passed)
        }
        Err(e) => (None, Some(e.to_string()), false),
    };
    log::info!("{}: decay fit over [{start}, {end}] passed = {passed}", model.name);
    Ok(DecaySection {
        fit,
        error,
        certified_beta: beta,
        required_rate,
        min_r_squared: run.min_r2,
        passed,
    })
}

fn almost_period_section(
    model: &NetworkModel,
    run: &RunArgs,
    bounds: &BoundsSummary,
    beta: f64,
    xi: &[f64],
    traj: &Trajectory,
) -> Result<Option<AlmostPeriodSection>, CliError> {
    let signals = model.coefficient_signals();
    if signals.iter().all(|s| s.is_constant()) {
        return Ok(None);
    }
    let t0 = transient_length(beta, max_tau(bounds));
    let window = (t0, t0 + run.defect_window);
    let available = traj.end() - window.1;
    let scan_range = (run.scan_min.unwrap_or(1.0), run.scan_max.unwrap_or(available));
    let mut section = AlmostPeriodSection {
        epsilon: run.epsilon,
        scan_range,
        window,
        candidates: 0,
        checked: 0,
        beyond_horizon: 0,
        worst_defect: None,
        best_omega: None,
        best_defect: None,
        settling_level: run.defect_tol,
        settling_time: None,
        tolerance: run.defect_tol,
        empirical_envelope: true,
        evaluated: false,
        note: None,
        passed: true,
    };
    if scan_range.1 <= scan_range.0 || available <= 0.0 {
        let note = format!(
            "trajectory ends at {:.3}, too short for the window [{:.3}, {:.3}] plus a shift in {scan_range:?}",
            traj.end(),
            window.0,
            window.1
        );
        log::warn!("{}: almost-period check skipped: {note}", model.name);
        section.note = Some(note);
        return Ok(Some(section));
    }
    let omegas = find_almost_period(&signals, run.epsilon, scan_range, &AlmostPeriodScan::default()).map_err(input)?;
    section.candidates = omegas.len();
    let mut worst: Option<f64> = None;
    let mut best: Option<(f64, f64)> = None;
    for &omega in &omegas {
        if omega > available {
            section.beyond_horizon += 1;
            continue;
        }
        let defect = almost_period_defect(traj, omega, window, xi).map_err(input)?;
        section.checked += 1;
        worst = Some(worst.map_or(defect, |w| w.max(defect)));
        if best.is_none_or(|(_, d)| defect < d) {
            best = Some((omega, defect));
        }
    }
    if let Some((omega, defect)) = best {
        section.best_omega = Some(omega);
        section.best_defect = Some(defect);
        section.settling_time = defect_settling_time(traj, omega, run.defect_tol, xi).map_err(input)?;
    }
    section.worst_defect = worst;
    section.evaluated = section.checked > 0;
    if !section.evaluated {
        section.note = Some("no epsilon-almost-period inside the scan range fits the trajectory".into());
    }
    section.passed = worst.is_none_or(|w| w < run.defect_tol);
    Ok(Some(section))
}

fn equilibrium_section(model: &NetworkModel, run: &RunArgs, traj: &Trajectory) -> Option<EquilibriumSection> {
    if !model.is_autonomous() {
        return None;
    }
    let (_, end) = traj.last()?;
    let final_residual = stationary_rhs(model, end).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let solved = equilibrium(model, end).ok();
    let final_distance = solved
        .as_ref()
        .map(|eq| eq.state.iter().zip(end).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    Some(EquilibriumSection {
        newton_residual: solved.as_ref().map(|eq| eq.residual),
        state: solved.map(|eq| eq.state),
        final_residual,
        final_distance,
        tolerance: run.equilibrium_tol,
        passed: final_residual < run.equilibrium_tol,
    })
}

fn analyze_model(model: &NetworkModel, run: &RunArgs) -> Result<u8, CliError> {
    let arts = Artifacts::new(&run.out, &model.name)?;
    let certificate: CertificateFile = read_json(&arts.certificate())?;
    let traj = read_trajectory(&arts.trajectory(), &model.name)?;
    let alt = read_trajectory(&arts.alt_trajectory(), &model.name)?;
    let report = &certificate.report;
    let beta = match (report.feasible, report.beta) {
        (true, Some(beta)) => beta,
        _ => {
            return Err(CliError::Input(format!(
                "{}: certificate is infeasible",
                arts.certificate().display()
            )))
        }
    };
    let xi = report.xi.clone();
    if xi.len() != model.n || traj.n != model.n || alt.n != model.n {
        return Err(CliError::Input(
            "certificate, trajectories and model disagree on dimension".into(),
        ));
    }
    let bounds = derive_bounds(model).map_err(input)?;

    let decay = decay_section(model, run, &bounds, beta, &xi, &arts, &traj, &alt)?;
    let mut boundedness = Vec::new();
    if let Some(lemma) = report.lemma1 {
        for (label, tr, initial) in [
            ("primary", &traj, Some(model.history.weighted_sup(&xi))),
            ("alt", &alt, None),
        ] {
            let tolerance = 10.0 * tr.spacing;
            let r = boundedness_check(tr, &xi, lemma.i_hat, lemma.eta, initial, tolerance).map_err(input)?;
            boundedness.push(BoundSection {
                trajectory: label.to_string(),
                bound: r.bound,
                m0: r.m0,
                tolerance,
                worst_margin: r.worst_margin,
                passed: r.passed,
            });
        }
    }
    let almost_period = almost_period_section(model, run, &bounds, beta, &xi, &traj)?;
    let equilibrium = equilibrium_section(model, run, &traj);

    let mut assertions = vec![Assertion {
        name: "decay rate".into(),
        passed: decay.passed,
    }];
    assertions.extend(boundedness.iter().map(|b| Assertion {
        name: format!("ultimate bound ({})", b.trajectory),
        passed: b.passed,
    }));
    if let Some(ap) = almost_period.as_ref().filter(|s| s.evaluated) {
        assertions.push(Assertion {
            name: "almost-period defect".into(),
            passed: ap.passed,
        });
    }
    if let Some(eq) = &equilibrium {
        assertions.push(Assertion {
            name: "equilibrium residual".into(),
            passed: eq.passed,
        });
    }
    let passed = assertions.iter().all(|a| a.passed);
    let out = AnalysisReport {
        model: model.name.clone(),
        beta,
        xi,
        decay,
        boundedness,
        almost_period,
        equilibrium,
        assertions,
        passed,
    };
    write_json(&arts.report(), &out)?;
    for a in &out.assertions {
        println!("{}: {} {}", model.name, if a.passed { "PASS" } else { "FAIL" }, a.name);
    }
    Ok(if passed { 0 } else { EXIT_ASSERTION })
}

pub fn demo(run: &RunArgs) -> Result<u8, CliError> {
    // scan ranges chosen to contain a known almost-period of each model
    let cases = [
        (presets::constant_network(), None),
        (presets::periodic_network(), Some((5.5, 7.0))),
        (presets::quasi_periodic_network(), Some((150.0, 200.0))),
    ];
    let mut status = 0;
    for (model, scan) in cases {
        let arts = Artifacts::new(&run.out, &model.name)?;
        write_json(&arts.path("model.json"), &model)?;
        let (certificate, code) = certify_model(&model, run)?;
        let mut codes = vec![code];
        if code == 0 {
            let mut local = run.clone();
            if let (Some((lo, hi)), Some(beta)) = (scan, certificate.report.beta) {
                let bounds = derive_bounds(&model).map_err(input)?;
                let t0 = transient_length(beta, max_tau(&bounds));
                local.scan_min = Some(lo);
                local.scan_max = Some(hi);
                local.horizon = run.horizon.max(t0 + run.defect_window + hi + 1.0);
            }
            let sim = simulate_model(&model, &local)?;
            codes.push(sim);
            if sim == 0 {
                codes.push(analyze_model(&model, &local)?);
            }
        }
        println!("demo {}: exit codes {codes:?}", model.name);
        if status == 0 {
            status = codes.into_iter().find(|c| *c != 0).unwrap_or(0);
        }
    }
    Ok(status)
}
