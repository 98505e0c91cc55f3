use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use sgm_core::bounds::{self, BoundParams, BoundTerms};
use sgm_core::data::{binarize_labels, format_real, read_libsvm_file, subsample, Dataset, MinMaxScaler};
use sgm_core::experiments::{sweep_passes, sweep_step, table, write_sweep_csv, write_table_csv, Protocol, ScheduleSpec, TableOptions};
use sgm_core::kernels::{Kernel, PrecomputedMatrix};
use sgm_core::losses::Loss;
use sgm_core::model_selection::{cv_step_size, early_stopping, CvOptions, EarlyStopOptions, TuneMode};
use sgm_core::parallel::default_jobs;
use sgm_core::rng::{derive_seed, rng_from_seed};
use sgm_core::schedules::{check_consistency, preset_for, Regime, StepSchedule};
use sgm_core::sgm::{train, write_trace, Iterate, ModelFile, SgmRunConfig};

use crate::args::*;

/// Seed stream reserved for data preparation, apart from the training streams.
const DATA_SEED_INDEX: u64 = u64::MAX - 1;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Train(a) => cmd_train(a),
        Command::SweepPasses(a) => cmd_sweep_passes(a),
        Command::SweepStep(a) => cmd_sweep_step(a),
        Command::Cv(a) => cmd_cv(a),
        Command::EarlyStop(a) => cmd_early_stop(a),
        Command::Table(a) => cmd_table(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::CheckSchedule(a) => cmd_check_schedule(a),
        Command::Parse(a) => cmd_parse(a),
    }
}

struct Loaded {
    train: Dataset,
    test: Option<Arc<Dataset>>,
}

fn load(path: &Path) -> Result<Dataset> {
    read_libsvm_file(path).with_context(|| format!("loading {}", path.display()))
}

/// Reads the data files and applies the requested preparation; the scaler is fitted on
/// the training data only.
fn load_data(args: &DataArgs, seed: u64) -> Result<Loaded> {
    let mut train = load(&args.data)?;
    let mut test = args.test.as_deref().map(load).transpose()?;
    if args.binarize {
        train = binarize_labels(&train)?;
        test = test.map(|t| binarize_labels(&t)).transpose()?;
    }
    if let Some(n) = args.subsample {
        let mut rng = rng_from_seed(derive_seed(seed, DATA_SEED_INDEX));
        train = subsample(&train, n, &mut rng)?;
    }
    if args.scale {
        let scaler = MinMaxScaler::fit(&train);
        train = scaler.transform(&train);
        test = test.map(|t| scaler.transform(&t));
    }
    log::info!("training data: m={}, dim={}", train.len(), train.dim());
    Ok(Loaded { train, test: test.map(Arc::new) })
}

fn kernel_from_spec(spec: &str) -> Result<Kernel> {
    match spec.trim().strip_prefix("precomputed:") {
        Some(path) => Ok(Kernel::precomputed(
            PrecomputedMatrix::load(path).with_context(|| format!("loading kernel matrix {path}"))?,
        )),
        None => Ok(Kernel::parse_spec(spec)?),
    }
}

fn schedule_spec(args: &ScheduleArgs) -> Result<ScheduleSpec> {
    Ok(match (args.preset, args.eta) {
        (Some(preset), None) => ScheduleSpec::Preset { preset, beta: args.beta, eta1: None },
        (Some(preset), Some(EtaSpec::Value(v))) => ScheduleSpec::Preset { preset, beta: args.beta, eta1: Some(v) },
        (Some(_), Some(EtaSpec::InvSqrtM(_))) => bail!("--eta C/sqrt(m) cannot be combined with --preset"),
        (None, Some(EtaSpec::Value(v))) => ScheduleSpec::Explicit(StepSchedule::new(v, args.theta)?),
        (None, Some(EtaSpec::InvSqrtM(scale))) => {
            if args.theta != 0.0 {
                bail!("--eta C/sqrt(m) is a constant step; drop --theta");
            }
            ScheduleSpec::InvSqrtM { scale }
        }
        (None, None) => bail!("give a step size with --eta or a schedule with --preset"),
    })
}

fn jobs(run: &RunArgs) -> usize {
    run.jobs.filter(|&j| j > 0).unwrap_or_else(default_jobs)
}

fn protocol(model: &ModelArgs, proto: &ProtocolArgs, run: &RunArgs) -> Result<Protocol> {
    check_holdout(proto.holdout)?;
    if proto.reps == 0 {
        bail!("--reps must be at least 1");
    }
    Ok(Protocol {
        kernel: kernel_from_spec(&model.kernel)?,
        loss: model.loss,
        repetitions: proto.reps,
        seed: run.seed,
        holdout: proto.holdout,
        jobs: jobs(run),
        iterate: run.iterate,
    })
}

/// Writes the whole buffer at once so that a failed run leaves no partial file.
fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn tune_mode(tune: Tune, eta: f64) -> TuneMode {
    match tune {
        Tune::Eta => TuneMode::Eta,
        Tune::Theta => TuneMode::Theta { eta },
    }
}

fn default_grid(tune: Tune) -> Grid {
    let spec = match tune {
        Tune::Eta => "0.001:1:30:log",
        Tune::Theta => "0:1:30:lin",
    };
    spec.parse().expect("default grid is valid")
}

fn split(data: &Dataset, holdout: f64, seed: u64) -> Result<(Arc<Dataset>, Arc<Dataset>)> {
    check_holdout(holdout)?;
    let mut rng = rng_from_seed(derive_seed(seed, 0));
    let (train, val) = sgm_core::data::split_holdout(data, holdout, &mut rng)?;
    Ok((Arc::new(train), Arc::new(val)))
}

fn model_prefix(args: &TrainArgs) -> Option<PathBuf> {
    args.model_path.clone().or_else(|| args.run.out.as_ref().map(|p| p.with_extension("")))
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let Loaded { train: data, test } = load_data(&args.data, args.run.seed)?;
    let kernel = kernel_from_spec(&args.model.kernel)?;
    let data = Arc::new(data);
    let m = data.len();
    let kappa = kernel.kappa(&data)?;
    let spec = schedule_spec(&args.schedule)?;
    let schedule = spec.resolve(m, args.model.loss, kappa)?;
    let iterations = match (args.iterations, args.passes, &spec) {
        (Some(t), _, _) => t,
        (None, Some(p), _) => p * m as u64,
        (None, None, ScheduleSpec::Preset { preset, beta, eta1 }) => preset_for(*preset, m, *beta, *eta1, args.model.loss, kappa)?.t_star,
        (None, None, _) => m as u64,
    };
    let mut config = SgmRunConfig::new(schedule, iterations, args.run.seed)
        .check_invariants(args.check_invariants)
        .use_cache(!args.no_cache);
    config.record_every = args.record_every;
    config.allow_large_steps = args.allow_large_steps;
    log::info!("training {iterations} iterations with eta={} theta={}", schedule.eta(), schedule.theta());
    let out = train(data, kernel, args.model.loss, &config, test)?;
    if let Some(rep) = &out.invariants {
        log::info!(
            "invariant checks: {} step ({} violations), {} norm ({} violations)",
            rep.step_checks,
            rep.step_violations,
            rep.norm_checks,
            rep.norm_violations
        );
        if rep.violations() > 0 {
            log::warn!("{} invariant violations", rep.violations());
        }
    }
    let mut trace = Vec::new();
    write_trace(&out.trace, &mut trace)?;
    let mut models = Vec::new();
    if let Some(prefix) = model_prefix(&args) {
        let mut last = Vec::new();
        ModelFile::new(&out.last, args.model.loss, Iterate::Last, None).write(&mut last)?;
        models.push((prefix.with_extension("last.model"), last));
        if let Some(avg) = &out.averaged {
            let mut bytes = Vec::new();
            ModelFile::new(&avg.model, args.model.loss, Iterate::Averaged, Some(avg.a_t)).write(&mut bytes)?;
            models.push((prefix.with_extension("avg.model"), bytes));
        }
    }
    emit(args.run.out.as_deref(), &trace)?;
    for (path, bytes) in models {
        emit(Some(&path), &bytes)?;
    }
    Ok(())
}

fn cmd_sweep_passes(args: SweepPassesArgs) -> Result<()> {
    let Loaded { train: data, test } = load_data(&args.data, args.run.seed)?;
    let proto = protocol(&args.model, &args.protocol, &args.run)?;
    let spec = schedule_spec(&args.schedule)?;
    let rows = sweep_passes(&data, test, &proto, &spec, args.passes)?;
    let mut buf = Vec::new();
    write_sweep_csv(&rows, "pass", &mut buf)?;
    emit(args.run.out.as_deref(), &buf)
}

fn cmd_sweep_step(args: SweepStepArgs) -> Result<()> {
    let Loaded { train: data, test } = load_data(&args.data, args.run.seed)?;
    let proto = protocol(&args.model, &args.protocol, &args.run)?;
    let grid = args.grid.clone().unwrap_or_else(|| default_grid(args.tune));
    let rows = sweep_step(&data, test, &proto, tune_mode(args.tune, args.eta), &grid.0, args.passes)?;
    let name = match args.tune {
        Tune::Eta => "eta",
        Tune::Theta => "theta",
    };
    let mut buf = Vec::new();
    write_sweep_csv(&rows, name, &mut buf)?;
    emit(args.run.out.as_deref(), &buf)
}

fn report_test(model: &sgm_core::sgm::KernelModel, test: Option<&Arc<Dataset>>, loss: Loss) -> Result<()> {
    if let Some(test) = test {
        log::info!(
            "chosen model on test data: risk={} error={}",
            format_real(model.empirical_risk(test, loss)?),
            format_real(model.misclassification_rate(test)?)
        );
    }
    Ok(())
}

fn cmd_cv(args: CvArgs) -> Result<()> {
    let Loaded { train: data, test } = load_data(&args.data, args.run.seed)?;
    let kernel = kernel_from_spec(&args.model.kernel)?;
    let (train, val) = split(&data, args.holdout, args.run.seed)?;
    let grid = args.grid.clone().unwrap_or_else(|| default_grid(args.tune));
    let opts = CvOptions { passes: args.passes, iterate: args.run.iterate, seed: args.run.seed, jobs: jobs(&args.run), use_cache: true };
    let report = cv_step_size(train, val, &kernel, args.model.loss, tune_mode(args.tune, args.eta), &grid.0, &opts)?;
    report_test(&report.chosen_model, test.as_ref(), args.model.loss)?;
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    emit(args.run.out.as_deref(), &buf)
}

fn cmd_early_stop(args: EarlyStopArgs) -> Result<()> {
    let Loaded { train: data, test } = load_data(&args.data, args.run.seed)?;
    let kernel = kernel_from_spec(&args.model.kernel)?;
    let (train, val) = split(&data, args.holdout, args.run.seed)?;
    let kappa = kernel.kappa(&train)?;
    let schedule = schedule_spec(&args.schedule)?.resolve(train.len(), args.model.loss, kappa)?;
    let mut opts = EarlyStopOptions::per_pass(args.passes, train.len(), args.run.seed);
    if let Some(e) = args.eval_every {
        opts.eval_every = e;
    }
    opts.patience = args.patience;
    opts.iterate = args.run.iterate;
    let report = early_stopping(train, val, &kernel, args.model.loss, schedule, &opts)?;
    report_test(&report.chosen_model, test.as_ref(), args.model.loss)?;
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    emit(args.run.out.as_deref(), &buf)
}

fn cmd_table(args: TableArgs) -> Result<()> {
    let Loaded { train: data, test } = load_data(&args.data, args.run.seed)?;
    let proto = protocol(&args.model, &args.protocol, &args.run)?;
    let opts = TableOptions { grid_size: args.grid_size, max_passes: args.passes, patience: args.patience, ..TableOptions::default() };
    let rows = table(&data, test, &proto, &opts)?;
    let mut buf = Vec::new();
    write_table_csv(&rows, &mut buf)?;
    emit(args.run.out.as_deref(), &buf)
}

type BoundFn = fn(&BoundParams, &StepSchedule, u64, u64) -> Result<BoundTerms, bounds::BoundError>;

fn bound_fns(regime: Regime, form: Form) -> (BoundFn, BoundFn) {
    match (regime, form) {
        (Regime::Smooth, Form::Exact) => (bounds::bound_smooth_avg, bounds::bound_smooth_last),
        (Regime::Nonsmooth, Form::Exact) => (bounds::bound_nonsmooth_avg, bounds::bound_nonsmooth_last),
        (Regime::Smooth, Form::Polynomial) => (bounds::polynomial::smooth_avg, bounds::polynomial::smooth_last),
        (Regime::Nonsmooth, Form::Polynomial) => (bounds::polynomial::nonsmooth_avg, bounds::polynomial::nonsmooth_last),
    }
}

fn to_count(v: f64, name: &str) -> Result<u64> {
    let r = v.round();
    if !(r >= 1.0 && r.is_finite()) {
        bail!("{name} values must be at least 1, got {v}");
    }
    Ok(r as u64)
}

fn cmd_bounds(args: BoundsArgs) -> Result<()> {
    let kappa = match (args.kappa, &args.data) {
        (Some(k), _) => k,
        (None, Some(path)) => kernel_from_spec(&args.kernel)?.kappa(&load(path)?)?,
        (None, None) => {
            log::info!("no --kappa or --data; using kappa = 1");
            1.0
        }
    };
    let regime = if args.loss.is_smooth() { Regime::Smooth } else { Regime::Nonsmooth };
    let params = BoundParams::for_loss(args.loss, kappa, args.c_beta, args.schedule.beta)?;
    let (avg_fn, last_fn) = bound_fns(regime, args.form);
    let spec = schedule_spec(&args.schedule)?;
    let mut buf = Vec::new();
    writeln!(buf, "t,m,bound_avg,bound_last,term_sample,term_comp,term_approx")?;
    for &mv in &args.m.0 {
        let m = to_count(mv, "m")?;
        let schedule = spec.resolve(m as usize, args.loss, kappa)?;
        let ts: Vec<u64> = match (&args.t, &spec) {
            (Some(grid), _) => grid.0.iter().map(|&t| to_count(t, "t")).collect::<Result<_>>()?,
            (None, ScheduleSpec::Preset { preset, beta, eta1 }) => {
                vec![preset_for(*preset, m as usize, *beta, *eta1, args.loss, kappa)?.t_star]
            }
            (None, _) => bail!("give --t unless a --preset supplies the stopping time"),
        };
        for t in ts {
            let avg = avg_fn(&params, &schedule, t, m)?;
            let last = last_fn(&params, &schedule, t, m)?;
            let terms = if args.iterate == Iterate::Averaged { avg } else { last };
            writeln!(
                buf,
                "{t},{m},{},{},{},{},{}",
                format_real(avg.total()),
                format_real(last.total()),
                format_real(terms.sample),
                format_real(terms.computational),
                format_real(terms.approximation)
            )?;
        }
    }
    emit(args.out.as_deref(), &buf)
}

fn cmd_check_schedule(args: CheckScheduleArgs) -> Result<()> {
    let (theta, q, p) = match args.preset {
        Some(preset) => preset.family(args.beta),
        None => (args.theta.unwrap_or_default(), args.q.unwrap_or_default(), args.p.unwrap_or_default()),
    };
    let report = check_consistency(theta, q, p)?;
    log::info!(
        "theta={theta} q={q} p={p}: exponent (A) {}, exponent (B) {}",
        format_real(report.exponent_a),
        format_real(report.exponent_b)
    );
    println!("{report}");
    Ok(())
}

fn cmd_parse(args: ParseArgs) -> Result<()> {
    let data = load(&args.data)?;
    let mut buf = Vec::new();
    writeln!(buf, "m={}", data.len())?;
    writeln!(buf, "dim={}", data.dim())?;
    for (label, count) in data.label_histogram() {
        writeln!(buf, "label {}: {count}", format_real(label))?;
    }
    emit(None, &buf)
}
