//! Subcommand implementations: sweeps, curves, optimizers, simulation, and
//! the self-test.

use std::path::Path;

use pass_noma::channel::{effective_channel, ComplexAmp, SystemGeometry, Ue};
use pass_noma::constellation::GraySymbol;
use pass_noma::dl_ber::{dl_ber, dl_cost, DlLinkConfig, QCoefficients};
use pass_noma::optimize::{
    moving_min, optimize_dl, optimize_dl_fixed_alpha, optimize_ul, sample_cost, OptimResult,
};
use pass_noma::simulate::{noise_moments, simulate_dl, simulate_ul, Scenario, SimSpec};
use pass_noma::ul_ber::{ber1, ber2, q_function, residual_prob, ul_cost, Residual, UlLinkConfig};

use crate::config::{dbm_to_watts, watts_to_dbm, Loaded};
use crate::output::{plain, sci, CsvOutput};
use crate::CliError;

/// Geometry with the SIC decoding order applied: when the swap flag is set,
/// the configured UE 2 takes the first-decoded role.
fn effective_geometry(loaded: &Loaded) -> Result<(SystemGeometry, bool), CliError> {
    let mut geom = loaded.config.geometry()?;
    let swap = loaded.config.ul.swap_sic_order;
    if swap {
        geom.ue.swap(0, 1);
    }
    Ok((geom, swap))
}

/// Analytic per-UE BERs in configured UE order.
fn ul_analytic(
    geom: &SystemGeometry,
    swap: bool,
    x: f64,
    cfg: &UlLinkConfig,
) -> Result<(f64, f64), CliError> {
    let h1 = effective_channel(geom, Ue::Ue1, x)?;
    let h2 = effective_channel(geom, Ue::Ue2, x)?;
    let first = ber1(&h1, &h2, cfg)?;
    let second = ber2(&h1, &h2, cfg)?;
    Ok(if swap { (second, first) } else { (first, second) })
}

/// Simulated per-UE BER and standard error in configured UE order.
fn ul_simulated(
    geom: &SystemGeometry,
    swap: bool,
    x: f64,
    cfg: &UlLinkConfig,
    n: u64,
    seed: u64,
    chunk: u64,
) -> Result<[(f64, f64); 2], CliError> {
    let spec = SimSpec {
        scenario: Scenario::UlPosition { geom, cfg, x },
        n_symbols: n,
        seed,
        chunk,
    };
    let sim = simulate_ul(&spec)?;
    let slot = |ue: Ue| (sim.ber(ue), sim.std_err(ue));
    Ok(if swap {
        [slot(Ue::Ue2), slot(Ue::Ue1)]
    } else {
        [slot(Ue::Ue1), slot(Ue::Ue2)]
    })
}

fn run_ul_optimizer(
    loaded: &Loaded,
    geom: &SystemGeometry,
    cfg: &UlLinkConfig,
) -> Result<OptimResult, CliError> {
    let opt = &loaded.config.optimize;
    optimize_ul(
        geom,
        cfg,
        opt.sample_step_m,
        &loaded.config.envelope_spec(),
        &loaded.config.fine_tune_spec(geom.wavelength()),
    )
    .map_err(CliError::from)
}

/// Three reference placements: optimized, inter-UE midpoint, at UE 1.
fn ul_placements(loaded: &Loaded, geom: &SystemGeometry, cfg: &UlLinkConfig) -> Result<[f64; 3], CliError> {
    let base = loaded.config.geometry()?;
    let midpoint = 0.5 * (base.ue[0].x + base.ue[1].x);
    let near_ue1 = base.ue[0].x.clamp(0.0, base.length);
    let optimized = run_ul_optimizer(loaded, geom, cfg)?.x_star;
    Ok([optimized, midpoint.clamp(0.0, base.length), near_ue1])
}

pub fn ul_ber_curve(loaded: &Loaded, out: &Path, seed: u64) -> Result<(), CliError> {
    let (geom, swap) = effective_geometry(loaded)?;
    let sim = &loaded.config.sim;
    let mut csv = CsvOutput::new(&loaded.sha256, seed);
    csv.header(&[
        "power_dBm",
        "x",
        "ber1_analytic",
        "ber2_analytic",
        "ber_avg_analytic",
        "ber1_sim",
        "ber2_sim",
        "ber_avg_sim",
        "sim_se1",
        "sim_se2",
    ]);
    let mut row_seed = seed;
    for &pv in &loaded.config.ul.powers {
        let p_w = loaded.config.ul_power_watts(pv);
        let cfg = loaded.config.ul_link(p_w)?;
        for x in ul_placements(loaded, &geom, &cfg)? {
            let (b1, b2) = ul_analytic(&geom, swap, x, &cfg)?;
            let sims = ul_simulated(&geom, swap, x, &cfg, sim.symbols, row_seed, sim.chunk)?;
            row_seed = row_seed.wrapping_add(1);
            csv.row(&[
                plain(watts_to_dbm(p_w)),
                plain(x),
                sci(b1),
                sci(b2),
                sci(0.5 * (b1 + b2)),
                sci(sims[0].0),
                sci(sims[1].0),
                sci(0.5 * (sims[0].0 + sims[1].0)),
                sci(sims[0].1),
                sci(sims[1].1),
            ]);
        }
    }
    csv.write_atomic(out)
}

pub fn ul_position_sweep(loaded: &Loaded, out: &Path, seed: u64) -> Result<(), CliError> {
    let (geom, _) = effective_geometry(loaded)?;
    let step = loaded.config.optimize.sample_step_m;
    let env = loaded.config.envelope_spec();

    let mut columns: Vec<String> = vec!["x".into()];
    let mut curves = Vec::new();
    for &pv in &loaded.config.ul.powers {
        let p_w = loaded.config.ul_power_watts(pv);
        let cfg = loaded.config.ul_link(p_w)?;
        let samples = sample_cost(|x| ul_cost(x, &geom, &cfg).expect("x in domain"), step, geom.length)?;
        let smoothed = moving_min(&samples, &env);
        if loaded.config.ul.powers.len() == 1 {
            columns.push("f_dB".into());
            columns.push("f_smoothed_dB".into());
        } else {
            let label = plain(watts_to_dbm(p_w));
            columns.push(format!("f_dB_{label}dBm"));
            columns.push(format!("f_smoothed_dB_{label}dBm"));
        }
        curves.push((samples, smoothed));
    }

    let mut csv = CsvOutput::new(&loaded.sha256, seed);
    let column_refs: Vec<&str> = columns.iter().map(|s| s.as_str()).collect();
    csv.header(&column_refs);
    let n = curves[0].0.len();
    for i in 0..n {
        let mut fields = vec![plain(curves[0].0.x_at(i))];
        for (samples, smoothed) in &curves {
            fields.push(plain(samples.values[i]));
            fields.push(plain(smoothed.values[i]));
        }
        csv.row(&fields);
    }
    csv.write_atomic(out)
}

pub fn dl_ber_curve(loaded: &Loaded, out: &Path, seed: u64) -> Result<(), CliError> {
    let geom = loaded.config.geometry()?;
    let dl = &loaded.config.dl;
    let sim = &loaded.config.sim;
    let mut csv = CsvOutput::new(&loaded.sha256, seed);
    csv.header(&[
        "power_dBm",
        "x",
        "alpha",
        "ber1_analytic",
        "ber2_analytic",
        "ber_avg_analytic",
        "ber1_sim",
        "ber2_sim",
        "ber_avg_sim",
        "sim_se1",
        "sim_se2",
    ]);
    let mut row_seed = seed;
    for (pi, &p_dbm) in dl.powers_dbm.iter().enumerate() {
        let cfg = loaded.config.dl_link(dbm_to_watts(p_dbm))?;
        let restarts = loaded.config.optimize.restarts;
        let joint = optimize_dl(&geom, &cfg, restarts, seed.wrapping_add(0x0D1 + pi as u64))?;
        let equal = optimize_dl_fixed_alpha(
            &geom,
            &cfg,
            0.5,
            restarts.div_ceil(2),
            seed.wrapping_add(0x0D2 + pi as u64),
        )?;
        let variants = [
            (joint.x_star, joint.alpha_star.unwrap_or(dl.alpha)),
            (dl.fixed_x, dl.fixed_alpha),
            (equal.x_star, 0.5),
        ];
        for (x, alpha) in variants {
            let b1 = dl_ber(Ue::Ue1, x, alpha, &geom, &cfg)?;
            let b2 = dl_ber(Ue::Ue2, x, alpha, &geom, &cfg)?;
            let spec = SimSpec {
                scenario: Scenario::DlPosition {
                    geom: &geom,
                    cfg: &cfg,
                    x,
                    alpha,
                },
                n_symbols: sim.symbols,
                seed: row_seed,
                chunk: sim.chunk,
            };
            row_seed = row_seed.wrapping_add(1);
            let s = simulate_dl(&spec)?;
            csv.row(&[
                plain(p_dbm),
                plain(x),
                plain(alpha),
                sci(b1),
                sci(b2),
                sci(0.5 * (b1 + b2)),
                sci(s.ber(Ue::Ue1)),
                sci(s.ber(Ue::Ue2)),
                sci(0.5 * (s.ber(Ue::Ue1) + s.ber(Ue::Ue2))),
                sci(s.std_err(Ue::Ue1)),
                sci(s.std_err(Ue::Ue2)),
            ]);
        }
    }
    csv.write_atomic(out)
}

pub fn dl_surface(loaded: &Loaded, out: &Path, seed: u64) -> Result<(), CliError> {
    let geom = loaded.config.geometry()?;
    let dl = &loaded.config.dl;
    let cfg = loaded.config.dl_link(dbm_to_watts(dl.surface_power_dbm))?;
    let mut csv = CsvOutput::new(&loaded.sha256, seed);
    csv.header(&["x", "alpha", "cost_dB"]);
    for i in 0..dl.surface_x_points {
        let x = geom.length * i as f64 / (dl.surface_x_points - 1) as f64;
        for j in 0..dl.surface_alpha_points {
            let alpha = j as f64 / (dl.surface_alpha_points - 1) as f64;
            csv.row(&[plain(x), plain(alpha), plain(dl_cost(x, alpha, &geom, &cfg)?)]);
        }
    }
    csv.write_atomic(out)
}

pub fn optimize_ul_cmd(loaded: &Loaded, out: &Path, seed: u64) -> Result<(), CliError> {
    let (geom, swap) = effective_geometry(loaded)?;
    let pv = loaded.config.ul.powers[0];
    let p_w = loaded.config.ul_power_watts(pv);
    let cfg = loaded.config.ul_link(p_w)?;
    let result = run_ul_optimizer(loaded, &geom, &cfg)?;
    let (b1, b2) = ul_analytic(&geom, swap, result.x_star, &cfg)?;

    println!("power_dBm: {}", plain(watts_to_dbm(p_w)));
    println!("x_star_m: {}", plain(result.x_star));
    if let Some(xs) = result.x_smooth {
        println!("x_smooth_m: {}", plain(xs));
    }
    println!("cost_db_sum: {}", plain(result.cost_db));
    println!(
        "cost_db_mean: {}",
        plain(10.0 * (0.5 * (b1 + b2)).max(f64::MIN_POSITIVE).log10())
    );
    println!("ber_ue1: {}", sci(b1));
    println!("ber_ue2: {}", sci(b2));

    let mut csv = CsvOutput::new(&loaded.sha256, seed);
    csv.header(&["stage", "x", "alpha", "cost_dB"]);
    if let Some(samples) = &result.samples {
        let i = samples.argmin();
        csv.row(&[
            "sample_minimum".into(),
            plain(samples.x_at(i)),
            String::new(),
            plain(samples.values[i]),
        ]);
    }
    for p in &result.trace {
        csv.row(&[
            "iterate".into(),
            plain(p.x),
            p.alpha.map(plain).unwrap_or_default(),
            plain(p.cost),
        ]);
    }
    csv.row(&[
        "optimum".into(),
        plain(result.x_star),
        String::new(),
        plain(result.cost_db),
    ]);
    csv.write_atomic(out)
}

pub fn optimize_dl_cmd(loaded: &Loaded, out: &Path, seed: u64) -> Result<(), CliError> {
    let geom = loaded.config.geometry()?;
    let p_dbm = loaded.config.dl.powers_dbm[0];
    let cfg = loaded.config.dl_link(dbm_to_watts(p_dbm))?;
    let result = optimize_dl(&geom, &cfg, loaded.config.optimize.restarts, seed)?;
    let alpha = result.alpha_star.expect("joint optimizer reports alpha");
    let b1 = dl_ber(Ue::Ue1, result.x_star, alpha, &geom, &cfg)?;
    let b2 = dl_ber(Ue::Ue2, result.x_star, alpha, &geom, &cfg)?;

    println!("power_dBm: {}", plain(p_dbm));
    println!("x_star_m: {}", plain(result.x_star));
    println!("alpha_star: {}", plain(alpha));
    println!("cost_db_sum: {}", plain(result.cost_db));
    println!(
        "cost_db_mean: {}",
        plain(10.0 * (0.5 * (b1 + b2)).max(f64::MIN_POSITIVE).log10())
    );
    println!("ber_ue1: {}", sci(b1));
    println!("ber_ue2: {}", sci(b2));
    println!("restarts: {}", result.restarts);

    let mut csv = CsvOutput::new(&loaded.sha256, seed);
    csv.header(&["stage", "x", "alpha", "cost_dB"]);
    for p in &result.trace {
        csv.row(&[
            "iterate".into(),
            plain(p.x),
            p.alpha.map(plain).unwrap_or_default(),
            plain(p.cost),
        ]);
    }
    csv.row(&[
        "optimum".into(),
        plain(result.x_star),
        plain(alpha),
        plain(result.cost_db),
    ]);
    csv.write_atomic(out)
}

pub enum SimScenarioArg {
    Ul,
    Dl,
}

pub fn simulate_cmd(
    loaded: &Loaded,
    out: &Path,
    seed: u64,
    scenario: SimScenarioArg,
    x_override: Option<f64>,
    alpha_override: Option<f64>,
) -> Result<(), CliError> {
    let sim = &loaded.config.sim;
    let mut csv = CsvOutput::new(&loaded.sha256, seed);
    let mut row_seed = seed;
    match scenario {
        SimScenarioArg::Ul => {
            let (geom, swap) = effective_geometry(loaded)?;
            let base = loaded.config.geometry()?;
            let x = x_override.unwrap_or(0.5 * (base.ue[0].x + base.ue[1].x));
            csv.header(&[
                "power_dBm",
                "x",
                "ber1_sim",
                "sim_se1",
                "ber2_sim",
                "sim_se2",
                "bits_per_ue",
            ]);
            for &pv in &loaded.config.ul.powers {
                let p_w = loaded.config.ul_power_watts(pv);
                let cfg = loaded.config.ul_link(p_w)?;
                let sims =
                    ul_simulated(&geom, swap, x, &cfg, sim.symbols, row_seed, sim.chunk)?;
                row_seed = row_seed.wrapping_add(1);
                csv.row(&[
                    plain(watts_to_dbm(p_w)),
                    plain(x),
                    sci(sims[0].0),
                    sci(sims[0].1),
                    sci(sims[1].0),
                    sci(sims[1].1),
                    (2 * sim.symbols).to_string(),
                ]);
            }
        }
        SimScenarioArg::Dl => {
            let geom = loaded.config.geometry()?;
            let dl = &loaded.config.dl;
            let x = x_override.unwrap_or(dl.fixed_x);
            let alpha = alpha_override.unwrap_or(dl.alpha);
            csv.header(&[
                "power_dBm",
                "x",
                "alpha",
                "ber1_sim",
                "sim_se1",
                "ber2_sim",
                "sim_se2",
                "bits_ue1",
                "bits_ue2",
            ]);
            for &p_dbm in &dl.powers_dbm {
                let cfg = loaded.config.dl_link(dbm_to_watts(p_dbm))?;
                let spec = SimSpec {
                    scenario: Scenario::DlPosition {
                        geom: &geom,
                        cfg: &cfg,
                        x,
                        alpha,
                    },
                    n_symbols: sim.symbols,
                    seed: row_seed,
                    chunk: sim.chunk,
                };
                row_seed = row_seed.wrapping_add(1);
                let s = simulate_dl(&spec)?;
                csv.row(&[
                    plain(p_dbm),
                    plain(x),
                    plain(alpha),
                    sci(s.ber(Ue::Ue1)),
                    sci(s.std_err(Ue::Ue1)),
                    sci(s.ber(Ue::Ue2)),
                    sci(s.std_err(Ue::Ue2)),
                    s.bits[0].to_string(),
                    s.bits[1].to_string(),
                ]);
            }
        }
    }
    csv.write_atomic(out)
}

/// Library sanity checks that need no configuration.
pub fn self_test() -> Result<(), CliError> {
    let mut failures = 0u32;
    let mut report = |name: &str, pass: bool, detail: String| {
        if pass {
            println!("self-test {name}: PASS");
        } else {
            println!("self-test {name}: FAIL ({detail})");
            failures += 1;
        }
    };

    // Gaussian source moments at 1e7 draws.
    let m = noise_moments(1.0, 10_000_000, 20_260_810, 1 << 16).map_err(CliError::from)?;
    let se_mean = 1.0 / (m.n as f64).sqrt();
    report(
        "noise mean",
        m.mean_re.abs() < 4.0 * se_mean && m.mean_im.abs() < 4.0 * se_mean,
        format!("means ({:.3e}, {:.3e})", m.mean_re, m.mean_im),
    );
    report(
        "noise variance",
        (m.var_re - 1.0).abs() < 0.01 && (m.var_im - 1.0).abs() < 0.01,
        format!("variances ({:.5}, {:.5})", m.var_re, m.var_im),
    );

    // Q-function fixed points.
    report(
        "q-function",
        q_function(0.0) == 0.5 && (q_function(1.2816) - 0.1).abs() < 1e-4,
        format!("Q(0) = {}", q_function(0.0)),
    );

    // Probability normalization on a few deterministic configurations.
    let mut ok = true;
    let mut detail = String::new();
    for k in 0..25 {
        let t = k as f64;
        let h1 = ComplexAmp::from_polar(0.3 + 0.1 * t, 0.25 * t - 3.0);
        let h2 = ComplexAmp::from_polar(2.6 - 0.09 * t, 3.0 - 0.23 * t);
        let cfg = UlLinkConfig::new(0.1 + 0.2 * t, 3.0 - 0.1 * t, 0.02 + 0.15 * t).unwrap();
        let s2 = GraySymbol::new(1, -1, 4).unwrap();
        let total: f64 = Residual::ALL
            .iter()
            .map(|r| residual_prob(r, &s2, &h1, &h2, &cfg).unwrap())
            .sum();
        if (total - 1.0).abs() > 1e-12 {
            ok = false;
            detail = format!("residual sum {total} at k={k}");
            break;
        }
        let dl = DlLinkConfig::new(0.5 + t, (t / 25.0).min(1.0), 4, 16, 0.4).unwrap();
        for ue in Ue::BOTH {
            let q = QCoefficients::generate(&dl, ue).unwrap();
            let (num, den) = q.weight_sum_exact();
            if num != den {
                ok = false;
                detail = format!("weight sum {num}/{den} at k={k}");
                break;
            }
        }
    }
    report("probability normalization", ok, detail);

    // Unit conversions round-trip to 1e-9 dB.
    let mut worst = 0.0f64;
    for dbm in [-120.0, -90.0, -30.0, 0.0, 17.5, 46.0] {
        worst = worst.max((watts_to_dbm(dbm_to_watts(dbm)) - dbm).abs());
    }
    report("unit round-trip", worst < 1e-9, format!("worst {worst:.2e} dB"));

    if failures > 0 {
        Err(CliError::Numerical(format!("{failures} self-test(s) failed")))
    } else {
        Ok(())
    }
}
