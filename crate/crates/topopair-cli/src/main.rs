//! Command line front end: reproducible campaign runs from TOML configs.
//!
//! Every command reads one config file, writes its results into `--out`,
//! and closes the directory with a `manifest.json` carrying the config
//! echo, seeds, lattice hashes, tool version and an inventory of output
//! checksums.  Exit codes: 0 success, 2 configuration error, 3 numerical
//! or runtime failure.

mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde_json::json;

use config::RunConfig;
use topopair::biphoton::{factor_site_density, input_state, probability_map};
use topopair::campaign::{
    extract_window, log_grid, parameter_scan, prepare_input, run_prepared_ensemble, size_study,
    thin_factor, CleanReference, EnsembleConfig, ScanConfig, SizeStudyConfig, CHEB_TOL,
};
use topopair::evolve::chebyshev_columns;
use topopair::io::{fmt_f64, OutputDir};
use topopair::lattice::LatticeModel;
use topopair::linalg::{zgemm, Trans};
use topopair::metrics::{measure_sweep, MetricsRecord};
use topopair::oracle;
use topopair::spectral::{
    boundary_weight, bulk_gaps, classify_edge_modes, diagonalize, honeycomb_corner_splitting,
    propagating_gap, BOUNDARY_HOPS,
};
use topopair::{Error, Result};

#[derive(Parser)]
#[command(
    name = "topopair",
    version,
    about = "Two-photon edge states on topological photonic lattices"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Diagonalize one sample and export its classified spectrum
    Spectrum(CommonArgs),
    /// Prepare, propagate and measure a two-photon state
    Propagate(PropagateArgs),
    /// Scan protection and entanglement over a width grid
    Scan(CommonArgs),
    /// Disorder-ensemble statistics and the surviving spectral window
    Window(CommonArgs),
    /// Run the independent verification oracles
    Verify(CommonArgs),
    /// Compare edge content across sample sizes
    SizeStudy(CommonArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Run configuration (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Output directory; created if missing
    #[arg(long)]
    out: PathBuf,
    /// Override the configured base seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct PropagateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Override the snapshot spacing in z (0 = final state only)
    #[arg(long)]
    snapshot_dz: Option<f64>,
    /// Launch the raw window template without projecting it onto the
    /// edge-mode pair subspace first
    #[arg(long)]
    raw_template: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let start = Instant::now();
    let (common, name) = match &cli.cmd {
        Cmd::Spectrum(c) => (c.clone(), "spectrum"),
        Cmd::Propagate(p) => (p.common.clone(), "propagate"),
        Cmd::Scan(c) => (c.clone(), "scan"),
        Cmd::Window(c) => (c.clone(), "window"),
        Cmd::Verify(c) => (c.clone(), "verify"),
        Cmd::SizeStudy(c) => (c.clone(), "size-study"),
    };
    if let Some(w) = common.workers {
        if w > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build_global()
                .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
        }
    }
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        apply_seed(&mut cfg, seed, &cli.cmd)?;
    }
    if let Cmd::Propagate(p) = &cli.cmd {
        if let Some(dz) = p.snapshot_dz {
            if !dz.is_finite() || dz < 0.0 {
                return Err(Error::Config(format!(
                    "--snapshot-dz must be finite and non-negative, got {dz}"
                )));
            }
            cfg.propagation.snapshot_dz = dz;
        }
    }
    let mut out = OutputDir::create(&common.out)?;
    let details = match &cli.cmd {
        Cmd::Spectrum(_) => cmd_spectrum(&cfg, &mut out)?,
        Cmd::Propagate(p) => cmd_propagate(&cfg, p.raw_template, &mut out)?,
        Cmd::Scan(_) => cmd_scan(&cfg, &mut out)?,
        Cmd::Window(_) => cmd_window(&cfg, &mut out)?,
        Cmd::Verify(_) => cmd_verify(&cfg, &mut out)?,
        Cmd::SizeStudy(_) => cmd_size_study(&cfg, &mut out)?,
    };
    let meta = json!({
        "tool": "topopair",
        "version": env!("CARGO_PKG_VERSION"),
        "command": name,
        "config_path": common.config.display().to_string(),
        "config": cfg,
        "workers": common.workers.unwrap_or(0),
        "wall_clock_seconds": start.elapsed().as_secs_f64(),
        "details": details,
    });
    out.finish(&meta)
}

/// `--seed` overrides the verification seed for `verify` and the disorder
/// base seed everywhere else.
fn apply_seed(cfg: &mut RunConfig, seed: u64, cmd: &Cmd) -> Result<()> {
    if matches!(cmd, Cmd::Verify(_)) {
        let mut vt = cfg.verify.clone().unwrap_or_default();
        vt.seed = seed;
        cfg.verify = Some(vt);
        return Ok(());
    }
    match cfg.disorder.as_mut() {
        Some(d) => {
            d.seed = seed;
            Ok(())
        }
        None => Err(Error::Config(
            "--seed given but the config has no [disorder] section".into(),
        )),
    }
}

fn select_rows(a: &Array2<C64>, idx: &[usize]) -> Array2<C64> {
    let mut out = Array2::<C64>::zeros((idx.len(), a.ncols()));
    for (r, &i) in idx.iter().enumerate() {
        out.row_mut(r).assign(&a.row(i));
    }
    out
}

fn cmd_spectrum(cfg: &RunConfig, out: &mut OutputDir) -> Result<serde_json::Value> {
    let clean = cfg.model()?.build()?;
    let sample = match &cfg.disorder {
        Some(d) => clean.with_disorder(&d.spec(), d.seed)?,
        None => clean.clone(),
    };
    let spec = diagonalize(&sample)?;
    let gaps = bulk_gaps(sample.model())?;
    let prop = propagating_gap(&sample, &spec, &gaps)?;
    let classes = classify_edge_modes(&sample, &spec, &prop);

    let rows = (0..sample.dim()).map(|n| {
        let bw = boundary_weight(&sample, spec.vectors.column(n), BOUNDARY_HOPS);
        format!(
            "{n},{},{},{}",
            fmt_f64(spec.values[n]),
            fmt_f64(bw),
            u8::from(classes.is_edge[n])
        )
    });
    out.write_csv(
        "spectrum.csv",
        "index,eigenvalue,boundary_weight,edge",
        rows.collect::<Vec<_>>(),
    )?;
    if let Some(d) = sample.disorder() {
        let rows: Vec<String> = d
            .deltas
            .iter()
            .map(|(i, v)| format!("{i},{}", fmt_f64(*v)))
            .collect();
        out.write_csv("disorder.csv", "site,delta", rows)?;
    }

    let gap_json = |g: &topopair::spectral::Gap| {
        json!({
            "lower": g.lower,
            "upper": g.upper,
            "width": g.width(),
            "center": g.center(),
        })
    };
    let corner = match sample.model() {
        LatticeModel::Honeycomb(s) => Some(honeycomb_corner_splitting(s)),
        LatticeModel::Square(_) => None,
    };
    let report = json!({
        "sites": sample.dim(),
        "edge_modes": classes.edge_indices.len(),
        "bulk_gaps": gaps.iter().map(gap_json).collect::<Vec<_>>(),
        "propagating_gap": gap_json(&prop),
        "gap_width": prop.width(),
        "corner_splitting": corner,
        "disorder_seed": cfg.disorder.as_ref().map(|d| d.seed),
    });
    out.write_json("gap_report.json", &report)?;
    println!(
        "sites {}  edge modes {}  propagating gap [{:.6}, {:.6}]",
        sample.dim(),
        classes.edge_indices.len(),
        prop.lower,
        prop.upper
    );
    Ok(json!({
        "clean_lattice_hash": clean.canonical_hash(),
        "sample_hash": sample.canonical_hash(),
    }))
}

fn cmd_propagate(cfg: &RunConfig, raw: bool, out: &mut OutputDir) -> Result<serde_json::Value> {
    let state = cfg.state()?;
    let recipe = state.recipe(&cfg.model);
    let clean = CleanReference::build(&cfg.model)?;
    let input = prepare_input(&clean, &recipe)?;
    let p = &cfg.propagation;
    let (sample, seed) = match &cfg.disorder {
        Some(d) => (clean.lattice.with_disorder(&d.spec(), d.seed)?, d.seed),
        None => (clean.lattice.clone(), 0),
    };
    let launch: Array2<C64> = if raw {
        let bi = input_state(&clean.lattice, &recipe)?;
        let l = thin_factor(&bi.psi)?;
        let mut site = Array2::<C64>::zeros((clean.lattice.dim(), l.ncols()));
        for (row, &s) in bi.sites.iter().enumerate() {
            site.row_mut(s).assign(&l.row(row));
        }
        site
    } else {
        input.site_factor.clone()
    };

    // snapshot schedule: multiples of the spacing, then the final distance
    let mut zs = Vec::new();
    if p.snapshot_dz > 0.0 {
        let mut z = 0.0;
        while z < p.z - 1e-9 {
            zs.push(z);
            z += p.snapshot_dz;
        }
    }
    zs.push(p.z);

    let edge_sites = clean.lattice.input_edge().to_vec();
    let sites = clean.lattice.sites();
    let mut snap_rows = Vec::with_capacity(zs.len());
    let mut last_edge_block: Option<Array2<C64>> = None;
    for (i, &z) in zs.iter().enumerate() {
        let w = chebyshev_columns(sample.hamiltonian(), z, &launch, CHEB_TOL)?;
        let dens = factor_site_density(&w);
        let rows = dens.iter().enumerate().map(|(s, &d)| {
            format!(
                "{s},{},{},{}",
                fmt_f64(sites[s].position[0]),
                fmt_f64(sites[s].position[1]),
                fmt_f64(d)
            )
        });
        out.write_csv(
            &format!("density_{i:03}.csv"),
            "site,x,y,density",
            rows.collect::<Vec<_>>(),
        )?;
        let we = select_rows(&w, &edge_sites);
        let c_sites = zgemm(Trans::No, &we, Trans::Transpose, &we);
        out.write_matrix(
            &format!("joint_{i:03}"),
            probability_map(&c_sites).view(),
            "joint detection probability over the input-edge chain",
        )?;
        let x = zgemm(Trans::Adjoint, &clean.spectrum.vectors, Trans::No, &w);
        let xe = select_rows(&x, &clean.classes.edge_indices);
        let c_edge = zgemm(Trans::No, &xe, Trans::Transpose, &xe);
        out.write_matrix(
            &format!("spectral_{i:03}"),
            probability_map(&c_edge).view(),
            "probability over edge-mode pairs",
        )?;
        snap_rows.push(format!("{i},{}", fmt_f64(z)));
        if i + 1 == zs.len() {
            last_edge_block = Some(c_edge);
        }
    }
    out.write_csv("snapshots.csv", "index,z", snap_rows)?;

    let c_edge = last_edge_block.expect("schedule always has a final point");
    let sweep = measure_sweep(
        &clean.edge_values,
        &input.edge_block,
        &c_edge,
        p.sweep_center,
        p.sweep_half,
        p.sweep_step,
    )?;
    let record = MetricsRecord {
        seed,
        lattice_hash: sample.canonical_hash(),
        recipe: recipe.canonical_string(),
        z_forward: p.z,
        z_measure: sweep.z_measure,
        fidelity: sweep.fidelity,
        transmitted: sweep.transmitted,
        edge_weight: sweep.edge_weight,
        schmidt: input.schmidt,
    };
    out.write_csv("metrics.csv", MetricsRecord::CSV_HEADER, [record.csv_row()])?;
    println!(
        "E = {:.4}  F = {:.4}  F_N = {:.4}  z_m = {:.2}  S_N = {:.3}",
        sweep.edge_weight, sweep.fidelity, sweep.transmitted, sweep.z_measure, input.schmidt
    );
    Ok(json!({
        "clean_lattice_hash": clean.lattice.canonical_hash(),
        "sample_hash": sample.canonical_hash(),
        "projected": !raw,
        "input_weight": input.weight,
        "snapshots": zs.len(),
    }))
}

fn cmd_scan(cfg: &RunConfig, out: &mut OutputDir) -> Result<serde_json::Value> {
    let t = cfg.scan.clone().unwrap_or_default();
    let recipe = match &cfg.state {
        Some(s) => s.recipe(&cfg.model),
        // widths are placeholders: the grid overrides them cell by cell
        None => match &cfg.model {
            LatticeModel::Honeycomb(_) => topopair::biphoton::StateRecipe::honeycomb(1.0, 1.0),
            LatticeModel::Square(_) => topopair::biphoton::StateRecipe::square(1.0, 1.0),
        },
    };
    let grid = log_grid(t.lo, t.hi, t.points)?;
    let sc = ScanConfig {
        model: cfg.model.clone(),
        recipe,
        disorder: cfg.disorder.as_ref().map(|d| d.spec()),
        seed: cfg.disorder.as_ref().map(|d| d.seed).unwrap_or(0),
        sigma_c: grid.clone(),
        sigma_a: grid,
        z_forward: cfg.propagation.z,
    };
    let res = parameter_scan(&sc)?;
    let mut rows = Vec::with_capacity(sc.sigma_c.len() * sc.sigma_a.len());
    for (ic, &vc) in res.sigma_c.iter().enumerate() {
        for (ia, &va) in res.sigma_a.iter().enumerate() {
            rows.push(format!(
                "{},{},{},{},{}",
                fmt_f64(vc),
                fmt_f64(va),
                fmt_f64(res.edge[(ic, ia)]),
                fmt_f64(res.schmidt[(ic, ia)]),
                fmt_f64(res.product[(ic, ia)])
            ));
        }
    }
    out.write_csv(
        "scan.csv",
        "sigma_c,sigma_a,edge_weight,schmidt,product",
        rows,
    )?;
    out.write_matrix(
        "edge_map",
        res.edge.view(),
        "edge-pair weight after propagation; rows sigma_c, columns sigma_a",
    )?;
    out.write_matrix(
        "schmidt_map",
        res.schmidt.view(),
        "Schmidt number of the launched state; rows sigma_c, columns sigma_a",
    )?;
    out.write_matrix(
        "product_map",
        res.product.view(),
        "edge weight times Schmidt number; rows sigma_c, columns sigma_a",
    )?;
    if !res.failures.is_empty() {
        let rows: Vec<String> = res
            .failures
            .iter()
            .map(|(ic, ia, e)| format!("{ic},{ia},{}", e.replace(',', ";")))
            .collect();
        out.write_csv("failures.csv", "row,col,error", rows)?;
    }
    let mut best = (0usize, 0usize, f64::NEG_INFINITY);
    for (ic, _) in res.sigma_c.iter().enumerate() {
        for (ia, _) in res.sigma_a.iter().enumerate() {
            let v = res.product[(ic, ia)];
            if v.is_finite() && v > best.2 {
                best = (ic, ia, v);
            }
        }
    }
    println!(
        "grid {}x{}  best E*S_N = {:.4} at sigma_c = {:.3}, sigma_a = {:.3}",
        res.sigma_c.len(),
        res.sigma_a.len(),
        best.2,
        res.sigma_c[best.0],
        res.sigma_a[best.1]
    );
    Ok(json!({
        "clean_lattice_hash": res.clean_hash,
        "sample_hash": res.sample_hash,
        "grid_points": sc.sigma_c.len(),
        "failed_cells": res.failures.len(),
    }))
}

fn cmd_window(cfg: &RunConfig, out: &mut OutputDir) -> Result<serde_json::Value> {
    let ens = cfg.ensemble()?;
    let state = cfg.state()?;
    let recipe = state.recipe(&cfg.model);
    let clean = CleanReference::build(&cfg.model)?;
    let input = prepare_input(&clean, &recipe)?;
    let p = &cfg.propagation;
    let base_seed = cfg.disorder.as_ref().map(|d| d.seed).unwrap_or(0);
    let ecfg = EnsembleConfig {
        model: cfg.model.clone(),
        recipe,
        disorder: cfg.disorder.as_ref().map(|d| d.spec()),
        instances: ens.instances,
        base_seed,
        z_forward: p.z,
        z_center: p.sweep_center,
        sweep_half: p.sweep_half,
        sweep_step: p.sweep_step,
    };
    let res = run_prepared_ensemble(&ecfg, &clean, &input)?;
    out.write_csv(
        "metrics.csv",
        MetricsRecord::CSV_HEADER,
        res.records.iter().map(|r| r.csv_row()).collect::<Vec<_>>(),
    )?;
    out.write_matrix(
        "mean_spectral",
        res.mean_map.view(),
        "ensemble-mean probability over edge-mode pairs",
    )?;
    if !res.failures.is_empty() {
        let rows: Vec<String> = res
            .failures
            .iter()
            .map(|(s, e)| format!("{s},{}", e.replace(',', ";")))
            .collect();
        out.write_csv("failures.csv", "seed,error", rows)?;
    }
    let win = extract_window(&res.mean_map, ens.window_fraction)?;
    let gap_center = clean.classes.gap.center();
    let gap_center_index = clean
        .edge_values
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            (*a - gap_center)
                .abs()
                .partial_cmp(&(*b - gap_center).abs())
                .unwrap()
        })
        .map(|(i, _)| i)
        .unwrap_or(0);
    let report = json!({
        "lo": win.lo,
        "hi": win.hi,
        "len": win.len(),
        "center": win.center(),
        "threshold": win.threshold,
        "peak": win.peak,
        "fraction": ens.window_fraction,
        "edge_modes": res.edge_modes,
        "gap_center_index": gap_center_index,
    });
    out.write_json("window.json", &report)?;
    println!(
        "window [{}, {}] of 0..{}  center {:.2}  gap-center index {}",
        win.lo,
        win.hi,
        res.edge_modes - 1,
        win.center(),
        gap_center_index
    );
    Ok(json!({
        "clean_lattice_hash": res.clean_hash,
        "base_seed": base_seed,
        "instances": ens.instances,
        "failed_instances": res.failures.len(),
        "input_weight": res.input_weight,
        "input_schmidt": res.input_schmidt,
    }))
}

fn cmd_verify(cfg: &RunConfig, out: &mut OutputDir) -> Result<serde_json::Value> {
    let vt = cfg.verify.clone().unwrap_or_default();
    let rep = oracle::run_verification(vt.seed, vt.conserving, vt.cross, vt.evolution)?;
    out.write_json("verification.json", &rep)?;
    println!(
        "conserving {}: max |V2| = {:.3e}\ncross {}: max residual = {:.3e} ({} excluded terms)\nevolution {}: max residual = {:.3e}",
        rep.conserving_cases,
        rep.max_conserving_amplitude,
        rep.cross_cases,
        rep.max_cross_residual,
        rep.excluded_terms,
        rep.evolution_cases,
        rep.max_evolution_residual
    );
    Ok(json!({ "seed": vt.seed }))
}

fn cmd_size_study(cfg: &RunConfig, out: &mut OutputDir) -> Result<serde_json::Value> {
    let state = cfg.state()?;
    let sst = cfg
        .size_study
        .as_ref()
        .ok_or_else(|| Error::Config("this command needs a [size_study] section".into()))?;
    let d = cfg
        .disorder
        .as_ref()
        .ok_or_else(|| Error::Config("this command needs a [disorder] section".into()))?;
    let base = match &cfg.model {
        LatticeModel::Honeycomb(s) => *s,
        LatticeModel::Square(_) => {
            return Err(Error::Config(
                "size studies run on honeycomb samples; set model.kind = \"honeycomb\"".into(),
            ))
        }
    };
    let p = &cfg.propagation;
    let scfg = SizeStudyConfig {
        sizes: sst.sizes.clone(),
        base,
        recipe: state.recipe(&cfg.model),
        disorder: d.spec(),
        instances: sst.instances,
        base_seed: d.seed,
        z_forward: p.z,
        z_center: p.sweep_center,
        sweep_half: p.sweep_half,
        sweep_step: p.sweep_step,
    };
    let results = size_study(&scfg)?;
    let mut rows = Vec::with_capacity(results.len());
    for (row, outcome) in &results {
        rows.push(format!(
            "{},{},{},{},{},{},{}",
            row.nx,
            row.ny,
            row.sites,
            row.edge_modes,
            row.instances,
            fmt_f64(row.mean_edge_weight),
            fmt_f64(row.mean_transmitted)
        ));
        out.write_csv(
            &format!("metrics_{}x{}.csv", row.nx, row.ny),
            MetricsRecord::CSV_HEADER,
            outcome.records.iter().map(|r| r.csv_row()).collect::<Vec<_>>(),
        )?;
        println!(
            "{}x{}: sites {}  edge modes {}  mean E = {:.4}  mean F_N = {:.4}",
            row.nx, row.ny, row.sites, row.edge_modes, row.mean_edge_weight, row.mean_transmitted
        );
    }
    out.write_csv(
        "sizes.csv",
        "nx,ny,sites,edge_modes,instances,mean_edge_weight,mean_transmitted",
        rows,
    )?;
    let weights: Vec<f64> = results.iter().map(|(r, _)| r.mean_edge_weight).collect();
    let spread = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - weights.iter().cloned().fold(f64::INFINITY, f64::min);
    println!("edge-weight spread across sizes: {spread:.4}");
    Ok(json!({
        "base_seed": d.seed,
        "sizes": sst.sizes,
        "edge_weight_spread": spread,
    }))
}
