mod args;
mod config;

use std::fs;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;
use mind_core::codec::{read_image, write_pgm, BitDepth};
use mind_core::phantom::generate;
use mind_core::threshold::{cached_monte_carlo_quantile, ThresholdRecord};
use mind_core::{
    add_noise, admm, chambolle_pock, estimate_sigma, kkt_diagnostics, monte_carlo_quantile, semismooth_newton,
    snr_to_sigma, universal_threshold, AdmmConfig, CpConfig, Dictionary, Image, ImageGrid, KktRecord, MindError,
    MindProblem, NoiseSpec, QualityReport, Regularizer, RegularizerKind, Solution, SolveReport, SsnConfig,
    ThresholdSpec,
};
use serde::Serialize;

use crate::args::{Cli, Command};
use crate::config::{RunConfig, SigmaMode, SolverChoice, Source, ThresholdMode};

const EXIT_NOT_CONVERGED: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_NOT_CONVERGED),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Returns whether every solver that ran converged.
fn run(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Denoise(a) => denoise(&RunConfig::resolve(a)?),
        Command::Compare { problem, reference } => compare(&RunConfig::resolve(problem)?, reference.as_deref()),
        Command::Threshold(a) => {
            let cfg = RunConfig::resolve(a)?;
            let data = load_data(&cfg)?;
            let setup = build_setup(&cfg, &data)?;
            print_json(&setup.threshold)?;
            Ok(true)
        }
        Command::Metrics { estimate, truth, peak } => {
            let q = QualityReport::compute(&read(&estimate)?, &read(&truth)?, peak)?;
            print_json(&q)?;
            Ok(true)
        }
        Command::AddNoise {
            input,
            output,
            sigma,
            snr,
            seed,
        } => {
            let f = read(&input)?;
            let sigma = match (sigma, snr) {
                (Some(s), None) => s,
                (None, Some(snr)) => snr_to_sigma(&f, snr)?,
                _ => bail!("give --sigma or --snr"),
            };
            let y = add_noise(&f, &NoiseSpec::new(sigma, seed)?)?;
            write_pgm(&output, &y, BitDepth::Sixteen)?;
            Ok(true)
        }
        Command::EstimateNoise { input } => {
            print_json(&estimate_sigma(&read(&input)?)?)?;
            Ok(true)
        }
        Command::Phantom { kind, size, output } => {
            let f = generate(kind, ImageGrid::new(size, size)?)?;
            write_pgm(&output, &f, BitDepth::Sixteen)?;
            Ok(true)
        }
    }
}

fn read(path: &Path) -> Result<Image> {
    read_image(path).with_context(|| format!("reading {}", path.display()))
}

fn print_json(v: &impl Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

struct Data {
    y: Image,
    truth: Option<Image>,
    /// Noise level used to generate a phantom.
    generating_sigma: Option<f64>,
}

fn load_data(cfg: &RunConfig) -> Result<Data> {
    match &cfg.source {
        Source::File { path, truth } => Ok(Data {
            y: read(path)?,
            truth: truth.as_deref().map(read).transpose()?,
            generating_sigma: None,
        }),
        Source::Phantom {
            phantom,
            size,
            snr,
            noise_seed,
        } => {
            let f = generate(*phantom, ImageGrid::new(*size, *size)?)?;
            let sigma = snr_to_sigma(&f, *snr)?;
            Ok(Data {
                y: add_noise(&f, &NoiseSpec::new(sigma, *noise_seed)?)?,
                truth: Some(f),
                generating_sigma: Some(sigma),
            })
        }
    }
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum SigmaSource {
    Given,
    Phantom,
    Estimated,
}

#[derive(Debug, Serialize)]
struct ThresholdInfo {
    q_n: f64,
    sigma: f64,
    sigma_source: SigmaSource,
    /// Present for Monte-Carlo calibration.
    #[serde(skip_serializing_if = "Option::is_none")]
    record: Option<ThresholdRecord>,
    cache_hit: bool,
}

struct Setup {
    dict: Dictionary,
    threshold: ThresholdInfo,
}

fn build_setup(cfg: &RunConfig, data: &Data) -> Result<Setup> {
    let grid = data.y.grid();
    let dict = Dictionary::build(grid, cfg.dictionary_kind(grid.width(), grid.height())?)?;
    let (sigma, sigma_source) = match (cfg.sigma, data.generating_sigma) {
        (SigmaMode::Known { sigma }, _) => (sigma, SigmaSource::Given),
        (SigmaMode::Estimate, Some(s)) => (s, SigmaSource::Phantom),
        (SigmaMode::Estimate, None) => (estimate_sigma(&data.y)?.sigma_hat, SigmaSource::Estimated),
    };
    let mut cache_hit = false;
    let (q_n, record) = match cfg.threshold {
        ThresholdMode::Explicit { q_n } => (q_n, None),
        ThresholdMode::Universal { c } => (universal_threshold(c, sigma, grid.n())?, None),
        ThresholdMode::MonteCarlo { alpha, reps, seed } => {
            let spec = ThresholdSpec {
                alpha,
                reps,
                seed,
                sigma,
            };
            let record = match &cfg.cache {
                Some(path) => {
                    cache_hit = ThresholdRecord::load(path).is_ok_and(|r| r.matches(&dict, &spec) && r.sigma > 0.0);
                    cached_monte_carlo_quantile(&dict, &spec, path)?
                }
                None => ThresholdRecord::new(&dict, &spec, monte_carlo_quantile(&dict, &spec)?),
            };
            (record.q_n, Some(record))
        }
    };
    Ok(Setup {
        dict,
        threshold: ThresholdInfo {
            q_n,
            sigma,
            sigma_source,
            record,
            cache_hit,
        },
    })
}

fn regularizer(cfg: &RunConfig) -> Result<Regularizer> {
    Ok(Regularizer::new(cfg.regularizer_kind())?)
}

fn solve(cfg: &RunConfig, p: &MindProblem, solver: SolverChoice) -> mind_core::Result<Solution> {
    match solver {
        SolverChoice::ChambollePock => {
            let mut c = match cfg.step_balance {
                Some(b) => {
                    let norm = p.dictionary().operator_norm(1e-9, 1000)?.value * (1.0 + 1e-6);
                    CpConfig::with_balanced_steps(p.data().n(), norm, b)?
                }
                None => CpConfig::for_problem(p)?,
            };
            if let Some(m) = cfg.max_iter {
                c.max_iter = m;
            }
            chambolle_pock(p, &c)
        }
        SolverChoice::Admm => {
            let mut c = AdmmConfig::for_problem(p)?;
            if let Some(rho) = cfg.rho {
                c = AdmmConfig::new(rho, c.operator_norm())?;
            }
            if let Some(m) = cfg.max_iter {
                c.max_iter = m;
            }
            if let Some(e) = cfg.eps_stop {
                c.eps_stop = e;
            }
            admm(p, &c)
        }
        SolverChoice::Ssn => {
            let d = SsnConfig::default();
            let c = SsnConfig {
                delta_init: cfg.delta_init.unwrap_or(d.delta_init),
                delta_factor: cfg.delta_factor.unwrap_or(d.delta_factor),
                delta_min: cfg.delta_min.unwrap_or(d.delta_min),
                rho_min: cfg.rho_min.unwrap_or(d.rho_min),
                r_min: cfg.r_min.unwrap_or(d.r_min),
                ..d
            };
            semismooth_newton(p, &c)
        }
    }
}

#[derive(Debug, Serialize)]
struct SolverSummary {
    solver: String,
    converged: bool,
    message: String,
    iterations: usize,
    wall_time_s: f64,
    final_objective: Option<f64>,
    final_relative_gap: Option<f64>,
    inner_cap_hits: usize,
    ssn_stages: usize,
    kkt: KktRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    quality: Option<QualityReport>,
}

impl SolverSummary {
    fn new(r: &SolveReport, kkt: KktRecord, quality: Option<QualityReport>) -> Self {
        Self {
            solver: r.solver.clone(),
            converged: r.converged,
            message: r.message.clone(),
            iterations: r.iterations,
            wall_time_s: r.wall_time_s,
            final_objective: r.final_objective(),
            final_relative_gap: r.final_relative_gap(),
            inner_cap_hits: r.inner_cap_hits,
            ssn_stages: r.ssn_stages.len(),
            kkt,
            quality,
        }
    }
}

#[derive(Debug, Serialize)]
struct RunReport<'a, T: Serialize> {
    config: &'a RunConfig,
    generator: &'static str,
    dictionary_fingerprint: String,
    dictionary_elements: usize,
    threshold: &'a ThresholdInfo,
    /// Quality of the noisy data itself, when the truth is known.
    #[serde(skip_serializing_if = "Option::is_none")]
    data_quality: Option<QualityReport>,
    result: T,
}

fn prepare(cfg: &RunConfig) -> Result<(Data, Setup, MindProblem)> {
    let data = load_data(cfg)?;
    let setup = build_setup(cfg, &data)?;
    let p = MindProblem::new(data.y.clone(), setup.dict.clone(), regularizer(cfg)?, setup.threshold.q_n)?;
    fs::create_dir_all(&cfg.output_dir).with_context(|| format!("creating {}", cfg.output_dir.display()))?;
    Ok((data, setup, p))
}

fn summarize(cfg: &RunConfig, p: &MindProblem, data: &Data, sol: &Solution) -> Result<SolverSummary> {
    let quality = data
        .truth
        .as_ref()
        .map(|f| QualityReport::compute(&sol.estimate, f, cfg.peak))
        .transpose()?;
    Ok(SolverSummary::new(&sol.report, kkt_diagnostics(p, &sol.estimate)?, quality))
}

fn write_report<T: Serialize>(cfg: &RunConfig, data: &Data, setup: &Setup, name: &str, result: T) -> Result<()> {
    let report = RunReport {
        config: cfg,
        generator: mind_core::rng::GENERATOR_NAME,
        dictionary_fingerprint: setup.dict.fingerprint(),
        dictionary_elements: setup.dict.element_count(),
        threshold: &setup.threshold,
        data_quality: data
            .truth
            .as_ref()
            .map(|f| QualityReport::compute(&data.y, f, cfg.peak))
            .transpose()?,
        result,
    };
    fs::write(cfg.output_dir.join(name), serde_json::to_string_pretty(&report)?)?;
    Ok(())
}

fn write_trace(path: &Path, r: &SolveReport) -> Result<()> {
    r.write_trace_csv(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?)?;
    Ok(())
}

fn denoise(cfg: &RunConfig) -> Result<bool> {
    let (data, setup, p) = prepare(cfg)?;
    let sol = solve(cfg, &p, cfg.solver)?;
    let out = &cfg.output_dir;
    write_pgm(out.join("estimate.pgm"), &sol.estimate, BitDepth::Sixteen)?;
    write_trace(&out.join("trace.csv"), &sol.report)?;
    let summary = summarize(cfg, &p, &data, &sol)?;
    eprintln!(
        "{}: {} after {} iterations in {:.2}s (q_n = {:.4e}, objective {:.6e})",
        summary.solver,
        if summary.converged { "converged" } else { "NOT converged" },
        summary.iterations,
        summary.wall_time_s,
        setup.threshold.q_n,
        summary.final_objective.unwrap_or(f64::NAN),
    );
    let converged = summary.converged;
    write_report(cfg, &data, &setup, "report.json", summary)?;
    Ok(converged)
}

#[derive(Debug, Serialize)]
struct CompareEntry {
    solver: SolverChoice,
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<SolverSummary>,
    /// Why the solver did not produce an estimate.
    #[serde(skip_serializing_if = "Option::is_none")]
    skipped: Option<String>,
}

fn compare(cfg: &RunConfig, reference: Option<&Path>) -> Result<bool> {
    let (data, setup, mut p) = prepare(cfg)?;
    if let Some(path) = reference {
        p = p.with_reference(read(path)?)?;
    }
    let mut entries = Vec::new();
    let mut all_converged = true;
    for solver in [SolverChoice::ChambollePock, SolverChoice::Admm, SolverChoice::Ssn] {
        if solver == SolverChoice::Ssn && cfg.regularizer_kind() == RegularizerKind::Tv {
            let why = "semismooth Newton needs a differentiable regularizer; skipped for TV".to_string();
            println!("{:<16} skipped: {why}", "ssn");
            entries.push(CompareEntry {
                solver,
                summary: None,
                skipped: Some(why),
            });
            continue;
        }
        let sol = match solve(cfg, &p, solver) {
            Ok(s) => s,
            Err(e @ MindError::NewtonDiverged { .. }) => {
                println!("{:<16} failed: {e}", "ssn");
                all_converged = false;
                entries.push(CompareEntry {
                    solver,
                    summary: None,
                    skipped: Some(e.to_string()),
                });
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let name = sol.report.solver.clone();
        write_trace(&cfg.output_dir.join(format!("trace-{name}.csv")), &sol.report)?;
        write_pgm(cfg.output_dir.join(format!("estimate-{name}.pgm")), &sol.estimate, BitDepth::Sixteen)?;
        let s = summarize(cfg, &p, &data, &sol)?;
        println!(
            "{:<16} {:<14} iters {:>6}  time {:>8.2}s  objective {:.6e}  gap {:.2e}{}",
            name,
            if s.converged { "converged" } else { "NOT converged" },
            s.iterations,
            s.wall_time_s,
            s.final_objective.unwrap_or(f64::NAN),
            s.kkt.relative_gap,
            s.quality.map(|q| format!("  psnr {:.2} dB", q.psnr)).unwrap_or_default(),
        );
        all_converged &= s.converged;
        entries.push(CompareEntry {
            solver,
            summary: Some(s),
            skipped: None,
        });
    }
    write_report(cfg, &data, &setup, "compare.json", entries)?;
    Ok(all_converged)
}
