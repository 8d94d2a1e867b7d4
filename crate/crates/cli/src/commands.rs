//! One function per subcommand. Each validates everything, prepares the
//! output directory, computes, writes its files and returns the summary line.

use std::f64::consts::LN_2;

use rtgmi::gmi::{gmi, GmiOptions, GmiReport};
use rtgmi::prediction::{history_lags, predictor_coefficients, HistoryPattern, PredictorSpec};
use rtgmi::psk::{
    make_constellation, random_codeword, stationary_block, synthesize_psc_block, Interleave,
};
use rtgmi::rng::derive_seed;
use rtgmi::sim::{run, DecoderBackend, RtReport, SchemeConfig};
use rtgmi::{
    generate_path, psk_capacity, rate_budget, rate_ladder, FadingModel, LadderOptions, RateBudget,
};
use serde::Serialize;

use crate::config::{
    db_to_linear, fading_model, load_file, parse_constellation, parse_snr_grid, parse_snr_single,
    require, BackendKind, BlockKind, CommandKind, Failure, Invocation, Outcome, Params, Quantity,
};
use crate::output::{num, Envelope, Table, Writer, SCHEMA_VERSION};
use crate::plot::{line_plot, Series};

pub fn execute(kind: CommandKind, invocation: Invocation) -> Outcome<String> {
    let file = match &invocation.config {
        Some(path) => load_file(path)?,
        None => Params::default(),
    };
    let params = invocation.params.over(file);
    params.check_keys(kind)?;
    let mut writer = Writer::new(
        params.output_dir(),
        params.format.unwrap_or_default(),
        params.plot.unwrap_or(false),
    );
    match kind {
        CommandKind::Capacity => capacity(&params, &mut writer),
        CommandKind::Gmi => gmi_command(&params, &mut writer),
        CommandKind::Ladder => ladder(&params, &mut writer),
        CommandKind::Simulate => simulate(&params, &mut writer),
        CommandKind::Sweep => sweep(&params, &mut writer),
    }
}

fn envelope<'a, R: Serialize>(
    command: &'a str,
    params: &'a Params,
    result: &'a R,
) -> Envelope<'a, Params, R> {
    Envelope {
        schema_version: SCHEMA_VERSION,
        command,
        parameters: params,
        result,
    }
}

fn bits(nats: f64) -> f64 {
    nats / LN_2
}

fn positive(value: usize, key: &str) -> Outcome<usize> {
    if value == 0 {
        return Err(Failure::Config(format!("key `{key}` must be at least 1")));
    }
    Ok(value)
}

#[derive(Serialize)]
struct CapacityResult {
    constellation_order: usize,
    snr_db: f64,
    rho: f64,
    capacity_nats: f64,
    capacity_bits: f64,
    raw_capacity_nats: f64,
    clamped: bool,
    std_error_nats: f64,
    ci_halfwidth_nats: f64,
    n_samples: usize,
}

fn capacity(params: &Params, writer: &mut Writer) -> Outcome<String> {
    let order = parse_constellation(&require(&params.constellation, "constellation")?)?;
    let snr_db = parse_snr_single(&require(&params.snr_db, "snr-db")?)?;
    let samples = params.samples.unwrap_or(1_000_000);
    let seed = params.seed.unwrap_or(0);
    let rho = db_to_linear(snr_db);
    writer.prepare()?;

    let est = psk_capacity(order, rho, samples, seed)?;
    let result = CapacityResult {
        constellation_order: order,
        snr_db,
        rho,
        capacity_nats: est.nats,
        capacity_bits: bits(est.nats),
        raw_capacity_nats: est.raw_nats,
        clamped: est.clamped,
        std_error_nats: est.std_error,
        ci_halfwidth_nats: est.ci_halfwidth,
        n_samples: est.n_samples,
    };
    writer.json(&envelope("capacity", params, &result))?;
    let mut t = Table::new(
        "capacity",
        &[
            "snr_db",
            "rho",
            "capacity_nats",
            "capacity_bits",
            "ci_halfwidth_nats",
        ],
    );
    t.push(vec![
        num(snr_db),
        num(rho),
        num(est.nats),
        num(bits(est.nats)),
        num(est.ci_halfwidth),
    ]);
    writer.csv(&t)?;
    Ok(format!(
        "capacity: {:.6} bits/symbol (95% CI ± {:.6}) for {order}-PSK at {snr_db} dB",
        bits(est.nats),
        bits(est.ci_halfwidth)
    ))
}

#[derive(Serialize)]
struct CurvePoint {
    mu: f64,
    lambda_hat: f64,
}

#[derive(Serialize)]
struct GmiResult {
    constellation_order: usize,
    snr_db: f64,
    block: BlockKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    psc: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    depth: Option<usize>,
    rho: f64,
    n_samples: usize,
    mu_star: f64,
    gmi_nats: f64,
    gmi_bits: f64,
    g_at_mu_star_nats: f64,
    g_at_minus_one_nats: f64,
    g_at_minus_one_bits: f64,
    ci_halfwidth_nats: f64,
    std_error_nats: f64,
    ci_at_minus_one_nats: f64,
    lambda_curve: Vec<CurvePoint>,
}

fn gmi_command(params: &Params, writer: &mut Writer) -> Outcome<String> {
    let order = parse_constellation(&require(&params.constellation, "constellation")?)?;
    let snr_db = parse_snr_single(&require(&params.snr_db, "snr-db")?)?;
    let snr = db_to_linear(snr_db);
    let model = fading_model(params)?;
    let k = positive(params.block_len.unwrap_or(100_000), "K")?;
    let block_kind = params.block.unwrap_or_default();
    let seed = params.seed.unwrap_or(0);
    let defaults = GmiOptions::default();
    let options = GmiOptions {
        mu_range: (
            params.mu_min.unwrap_or(defaults.mu_range.0),
            params.mu_max.unwrap_or(defaults.mu_range.1),
        ),
        bootstrap_seed: derive_seed(seed, 2),
        ..defaults
    };
    if !(options.mu_range.0 < options.mu_range.1 && options.mu_range.1 < 0.0) {
        return Err(Failure::Config(format!(
            "keys `mu-min`, `mu-max`: need mu-min < mu-max < 0, got ({}, {})",
            options.mu_range.0, options.mu_range.1
        )));
    }
    let pts = make_constellation(order)?;
    let codeword = random_codeword(&pts, k, derive_seed(seed, 0));

    let (block, psc, depth) = match block_kind {
        BlockKind::Stationary => {
            let m = model.unwrap_or(FadingModel::ar1(0.0)?);
            (
                stationary_block(&codeword, &pts, &m, &m, snr, derive_seed(seed, 1))?,
                None,
                None,
            )
        }
        BlockKind::Interleaved => {
            let m = model.ok_or_else(|| {
                Failure::Config("missing required key `model` for `--block interleaved`".into())
            })?;
            let depth = params.depth.unwrap_or(8);
            if depth < 2 {
                return Err(Failure::Config(format!(
                    "key `depth` must be at least 2, got {depth}"
                )));
            }
            let psc = params.psc.unwrap_or(depth - 1);
            if psc == 0 || psc >= depth {
                return Err(Failure::Config(format!(
                    "key `psc` must lie in 1..{depth}, got {psc}"
                )));
            }
            let p = positive(params.predictor_order.unwrap_or(16), "predictor-order")?;
            let lags = history_lags(HistoryPattern::DecodedPscs, psc, depth, p);
            let pred = predictor_coefficients(&m, &PredictorSpec::new(lags, snr)?)?;
            writer.prepare()?;
            let path = generate_path(&m, pred.max_lag() + k * depth, derive_seed(seed, 3))?;
            let layout = Interleave { depth, index: psc };
            let b = synthesize_psc_block(
                &codeword,
                &pts,
                &path.samples,
                layout,
                &pred,
                snr,
                derive_seed(seed, 1),
            )?;
            (b, Some(psc), Some(depth))
        }
    };
    writer.prepare()?;

    let report: GmiReport = gmi(&block, &pts, &options)?;
    let result = GmiResult {
        constellation_order: order,
        snr_db,
        block: block_kind,
        psc,
        depth,
        rho: block.rho,
        n_samples: report.n_samples,
        mu_star: report.mu_star,
        gmi_nats: report.gmi,
        gmi_bits: bits(report.gmi),
        g_at_mu_star_nats: report.g_at_mu_star,
        g_at_minus_one_nats: report.g_at_minus_one,
        g_at_minus_one_bits: bits(report.g_at_minus_one),
        ci_halfwidth_nats: report.ci_halfwidth,
        std_error_nats: report.std_error,
        ci_at_minus_one_nats: report.ci_at_minus_one,
        lambda_curve: report
            .lambda_curve
            .iter()
            .map(|&(mu, lambda_hat)| CurvePoint { mu, lambda_hat })
            .collect(),
    };
    writer.json(&envelope("gmi", params, &result))?;
    let mut t = Table::new("lambda_curve", &["mu", "lambda_hat"]);
    for &(mu, l) in &report.lambda_curve {
        t.push(vec![num(mu), num(l)]);
    }
    writer.csv(&t)?;
    let series = [Series {
        label: "Λ̂(μ)",
        points: report.lambda_curve.clone(),
    }];
    writer.svg(
        "lambda_curve",
        &line_plot("Empirical log-MGF", "mu", "lambda_hat (nats)", &series),
    )?;
    Ok(format!(
        "GMI: {:.6} bits/symbol (95% CI ± {:.6}) at mu* = {:.4}; g(-1) = {:.6} bits/symbol; rho = {:.4}",
        bits(report.gmi),
        bits(report.ci_halfwidth),
        report.mu_star,
        bits(report.g_at_minus_one),
        block.rho
    ))
}

#[derive(Serialize)]
struct LadderResult {
    constellation_order: usize,
    snr_db: f64,
    depth: usize,
    predictor_order: usize,
    rho: Vec<f64>,
    capacity_nats: Vec<f64>,
    capacity_bits: Vec<f64>,
    capacity_std_error_nats: Vec<f64>,
    l_average_nats: f64,
    l_average_bits: f64,
    rt_estimate_nats: f64,
    convergence_gap_nats: f64,
    budget: RateBudget,
}

fn ladder(params: &Params, writer: &mut Writer) -> Outcome<String> {
    let order = parse_constellation(&require(&params.constellation, "constellation")?)?;
    let snr_db = parse_snr_single(&require(&params.snr_db, "snr-db")?)?;
    let model = fading_model(params)?
        .ok_or_else(|| Failure::Config("missing required key `model`".into()))?;
    let depth = positive(params.depth.unwrap_or(16), "depth")?;
    let p = positive(params.predictor_order.unwrap_or(16), "predictor-order")?;
    let opts = LadderOptions {
        n_samples: params.samples.unwrap_or(1 << 18),
        seed: params.seed.unwrap_or(1),
        ..LadderOptions::default()
    };
    let (lambda, delta) = (params.lambda.unwrap_or(0.2), params.delta.unwrap_or(0.05));
    rate_budget(0.0, lambda, delta, &[0.0])?;
    writer.prepare()?;

    let l = rate_ladder(&model, depth, db_to_linear(snr_db), order, p, &opts)?;
    let budget = rate_budget(l.rt_estimate, lambda, delta, &l.capacity)?;
    let mut t = Table::new("ladder", &["l", "rho", "capacity_nats", "capacity_bits"]);
    for (i, (r, c)) in l.rho.iter().zip(&l.capacity).enumerate() {
        t.push(vec![i.to_string(), num(*r), num(*c), num(bits(*c))]);
    }
    let result = LadderResult {
        constellation_order: order,
        snr_db,
        depth,
        predictor_order: p,
        rho: l.rho.clone(),
        capacity_nats: l.capacity.clone(),
        capacity_bits: l.capacity.iter().map(|&c| bits(c)).collect(),
        capacity_std_error_nats: l.capacity_std_error.clone(),
        l_average_nats: l.l_average,
        l_average_bits: bits(l.l_average),
        rt_estimate_nats: l.rt_estimate,
        convergence_gap_nats: l.convergence_gap,
        budget,
    };
    writer.json(&envelope("ladder", params, &result))?;
    writer.csv(&t)?;
    let series = [Series {
        label: "capacity",
        points: l
            .capacity
            .iter()
            .enumerate()
            .map(|(i, &c)| (i as f64, bits(c)))
            .collect(),
    }];
    writer.svg(
        "ladder",
        &line_plot(
            "Per-PSC capacity",
            "PSC index l",
            "capacity (bits/symbol)",
            &series,
        ),
    )?;
    Ok(format!(
        "L-average capacity: {:.6} bits/symbol at L = {depth} (convergence gap {:.6} bits/symbol)",
        bits(l.l_average),
        bits(l.convergence_gap)
    ))
}

#[derive(Serialize)]
struct SimulateResult<'a> {
    constellation_order: usize,
    snr_db: f64,
    rate_fraction: f64,
    achieved_rate_bits: f64,
    report: &'a RtReport,
}

fn simulate(params: &Params, writer: &mut Writer) -> Outcome<String> {
    let order = parse_constellation(&require(&params.constellation, "constellation")?)?;
    let snr_db = parse_snr_single(&require(&params.snr_db, "snr-db")?)?;
    let model = fading_model(params)?
        .ok_or_else(|| Failure::Config("missing required key `model`".into()))?;
    let k = require(&params.block_len, "K")?;
    let mut config = SchemeConfig::new(
        model,
        params.depth.unwrap_or(8),
        k,
        order,
        db_to_linear(snr_db),
    );
    if let Some(v) = params.rate_fraction {
        config.rate_fraction = v;
    }
    if let Some(v) = params.predictor_order {
        config.predictor_order = v;
    }
    if let Some(v) = params.trials {
        config.n_codeword_trials = v;
    }
    if let Some(v) = params.lambda {
        config.lambda = v;
    }
    if let Some(v) = params.delta {
        config.delta = v;
    }
    if let Some(v) = params.gmi_samples {
        config.gmi_samples = v;
    }
    config.genie = params.genie.unwrap_or(false);
    config.master_seed = params.seed.unwrap_or(0);
    config.backend = match params.backend.unwrap_or_default() {
        BackendKind::Auto => DecoderBackend::Auto,
        BackendKind::Exhaustive => DecoderBackend::Exhaustive,
        BackendKind::Ensemble => DecoderBackend::Ensemble,
    };
    config.validate()?;
    writer.prepare()?;

    let report = run(&config)?;
    let result = SimulateResult {
        constellation_order: order,
        snr_db,
        rate_fraction: config.rate_fraction,
        achieved_rate_bits: bits(report.achieved_rate),
        report: &report,
    };
    writer.json(&envelope("simulate", params, &result))?;
    let mut t = Table::new(
        "summary",
        &[
            "l",
            "rho",
            "gmi_nats",
            "rate_target_nats",
            "block_error",
            "block_error_ci",
            "budget_met",
        ],
    );
    for l in 0..report.depth {
        t.push(vec![
            l.to_string(),
            num(report.rho[l]),
            num(report.gmi[l]),
            num(report.rate_targets[l]),
            num(report.per_psc_block_error[l]),
            num(report.per_psc_ci[l]),
            report.budget_met[l].to_string(),
        ]);
    }
    writer.csv(&t)?;
    let series = [Series {
        label: if config.genie {
            "genie"
        } else {
            "decision-directed"
        },
        points: (1..report.depth)
            .map(|l| (l as f64, report.per_psc_block_error[l]))
            .collect(),
    }];
    writer.svg(
        "block_error",
        &line_plot("Per-PSC block error", "PSC index l", "block error", &series),
    )?;
    let met = report.budget_met.iter().filter(|&&b| b).count();
    Ok(format!(
        "achieved rate: {:.6} bits/symbol; overall block error {:.4} (95% CI ± {:.4}); budgets met {met}/{}",
        bits(report.achieved_rate),
        report.overall_error,
        report.overall_ci,
        report.depth
    ))
}

#[derive(Serialize)]
struct SweepRow {
    snr_db: f64,
    snr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    capacity_nats: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ci_halfwidth_nats: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    l_average_nats: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    convergence_gap_nats: Option<f64>,
}

#[derive(Serialize)]
struct SweepResult {
    constellation_order: usize,
    quantity: Quantity,
    rows: Vec<SweepRow>,
}

fn sweep(params: &Params, writer: &mut Writer) -> Outcome<String> {
    let order = parse_constellation(&require(&params.constellation, "constellation")?)?;
    let grid = parse_snr_grid(&require(&params.snr_db, "snr-db")?)?;
    let quantity = params.quantity.unwrap_or_default();
    let seed = params.seed.unwrap_or(0);
    let samples = params.samples.unwrap_or(1 << 18);
    let model = fading_model(params)?;
    let ladder_model = match quantity {
        Quantity::Ladder => Some(model.ok_or_else(|| {
            Failure::Config("missing required key `model` for `--quantity ladder`".into())
        })?),
        Quantity::Capacity => None,
    };
    let depth = positive(params.depth.unwrap_or(16), "depth")?;
    let p = positive(params.predictor_order.unwrap_or(16), "predictor-order")?;
    make_constellation(order)?;
    writer.prepare()?;

    let mut rows = Vec::with_capacity(grid.len());
    for &db in &grid {
        let snr = db_to_linear(db);
        let row = match &ladder_model {
            None => {
                let est = psk_capacity(order, snr, samples, seed)?;
                SweepRow {
                    snr_db: db,
                    snr,
                    capacity_nats: Some(est.nats),
                    ci_halfwidth_nats: Some(est.ci_halfwidth),
                    l_average_nats: None,
                    convergence_gap_nats: None,
                }
            }
            Some(m) => {
                let opts = LadderOptions {
                    n_samples: samples,
                    seed,
                    ..LadderOptions::default()
                };
                let l = rate_ladder(m, depth, snr, order, p, &opts)?;
                SweepRow {
                    snr_db: db,
                    snr,
                    capacity_nats: None,
                    ci_halfwidth_nats: None,
                    l_average_nats: Some(l.l_average),
                    convergence_gap_nats: Some(l.convergence_gap),
                }
            }
        };
        rows.push(row);
    }

    let mut t = match quantity {
        Quantity::Capacity => Table::new(
            "sweep",
            &[
                "snr_db",
                "snr",
                "capacity_nats",
                "capacity_bits",
                "ci_halfwidth_nats",
            ],
        ),
        Quantity::Ladder => Table::new(
            "sweep",
            &[
                "snr_db",
                "snr",
                "l_average_nats",
                "l_average_bits",
                "convergence_gap_nats",
            ],
        ),
    };
    let value = |r: &SweepRow| r.capacity_nats.or(r.l_average_nats).unwrap_or(f64::NAN);
    for r in &rows {
        let extra = r
            .ci_halfwidth_nats
            .or(r.convergence_gap_nats)
            .unwrap_or(f64::NAN);
        t.push(vec![
            num(r.snr_db),
            num(r.snr),
            num(value(r)),
            num(bits(value(r))),
            num(extra),
        ]);
    }
    let series = [Series {
        label: match quantity {
            Quantity::Capacity => "capacity",
            Quantity::Ladder => "L-average capacity",
        },
        points: rows.iter().map(|r| (r.snr_db, bits(value(r)))).collect(),
    }];
    let result = SweepResult {
        constellation_order: order,
        quantity,
        rows,
    };
    writer.json(&envelope("sweep", params, &result))?;
    writer.csv(&t)?;
    writer.svg(
        "sweep",
        &line_plot("SNR sweep", "SNR (dB)", "rate (bits/symbol)", &series),
    )?;
    let first = series[0].points.first().map_or(f64::NAN, |p| p.1);
    let last = series[0].points.last().map_or(f64::NAN, |p| p.1);
    Ok(format!(
        "sweep: {} points from {} dB to {} dB, {first:.6} to {last:.6} bits/symbol",
        grid.len(),
        grid[0],
        grid[grid.len() - 1]
    ))
}
