//! One runner per experiment kind.

use std::path::Path;

use assb_core::analytic::{asymptotic_entropy, exact_entropy, projected_channel_matrix, steady_zz};
use assb_core::channel::{
    build_superoperator, channel_expectation, gap_exponent_fit, purity, spectral_gap, steady_state, Block,
    DoubledVector, Operator, Superoperator,
};
use assb_core::hilbert::{alternating_state, dicke_state};
use assb_core::ops::{ancilla_cswap_branches, swap_branches};
use assb_core::scaling::{collapse_fit, CollapsePoint, CollapseResult};
use assb_core::trajectory::{
    ensemble_average, half_chain_entropy, random_state, run_ensemble, InitialState, ModelParams, Observable,
    ObservableSpec,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{BlockChoice, CollapseObservable, ExperimentConfig, Kind, Perturbation};
use crate::output::{Table, Value};
use crate::CliError;

/// Primary table plus an optional fit summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub table: Table,
    pub fit: Option<Table>,
    /// Validation checks that failed.
    pub failures: usize,
}

impl Outcome {
    fn plain(table: Table) -> Self {
        Self {
            table,
            fit: None,
            failures: 0,
        }
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    match cfg.kind {
        Kind::Trajectory => trajectory(cfg).map(Outcome::plain),
        Kind::ChannelSteady => channel_steady(cfg).map(Outcome::plain),
        Kind::ChannelGap => channel_gap(cfg),
        Kind::EntanglementExact => entanglement(cfg).map(Outcome::plain),
        Kind::Collapse => collapse(cfg),
        Kind::Validate => validate(cfg),
    }
}

fn params(cfg: &ExperimentConfig, sites: usize) -> Result<ModelParams, CliError> {
    Ok(ModelParams::new(sites, cfg.p_s(), cfg.p_x, cfg.p_y, cfg.p_z)?)
}

fn up(cfg: &ExperimentConfig, sites: usize) -> usize {
    cfg.up.unwrap_or(sites / 2)
}

fn block(cfg: &ExperimentConfig, p: &ModelParams) -> Block {
    let charge = Block::Charge { up: up(cfg, p.sites) };
    match cfg.block {
        BlockChoice::Charge => charge,
        BlockChoice::Balanced => Block::Balanced,
        BlockChoice::Full => Block::Full,
        BlockChoice::Auto if p.conserves_charge() => charge,
        BlockChoice::Auto if p.p_x == p.p_y => Block::Balanced,
        BlockChoice::Auto => Block::Full,
    }
}

fn block_name(b: Block) -> String {
    match b {
        Block::Full => "full".into(),
        Block::Charge { up } => format!("charge:{up}"),
        Block::Balanced => "balanced".into(),
    }
}

fn trajectory(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let mut t = Table::new(&["L", "time", "observable", "mean", "stderr", "trajectories"]);
    for &l in &cfg.sites {
        let p = params(cfg, l)?;
        let initial = cfg.initial.build(&p)?;
        let steps = cfg.steps.unwrap_or(8 * l);
        let observables = cfg
            .observables
            .iter()
            .map(|name| Observable::parse(name, l))
            .collect::<Result<Vec<_>, _>>()?;
        let specs = observables
            .iter()
            .map(|&o| ObservableSpec::new(o, cfg.period))
            .collect::<Result<Vec<_>, _>>()?;
        let records = run_ensemble(&p, &initial, steps, &specs, cfg.seed, cfg.trajectories)?;
        for o in &observables {
            let name = o.to_string();
            for point in ensemble_average(&records, &name)? {
                t.push(vec![
                    l.into(),
                    point.time.into(),
                    name.clone().into(),
                    point.mean.into(),
                    point.stderr.into(),
                    cfg.trajectories.into(),
                ]);
            }
        }
    }
    Ok(t)
}

fn channel_steady(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let mut t = Table::new(&[
        "L",
        "block",
        "p_s",
        "p_x",
        "p_y",
        "p_z",
        "chi",
        "s1sl",
        "xy1l",
        "zz1l",
        "purity",
        "residual",
        "degenerate",
    ]);
    for &l in &cfg.sites {
        let p = params(cfg, l)?;
        let b = block(cfg, &p);
        let s = build_superoperator(&p, b)?;
        let ss = steady_state(&s)?;
        let ev = |op: &Operator| channel_expectation(&ss.rho, op);
        let last = l - 1;
        t.push(vec![
            l.into(),
            block_name(b).into(),
            p.p_s.into(),
            p.p_x.into(),
            p.p_y.into(),
            p.p_z.into(),
            ev(&Operator::susceptibility(l))?.into(),
            ev(&Operator::spin_spin(0, last))?.into(),
            ev(&Operator::xy(0, last))?.into(),
            ev(&Operator::zz(0, last))?.into(),
            purity(&ss.rho).into(),
            ss.residual.into(),
            ss.degenerate.into(),
        ]);
    }
    Ok(t)
}

fn channel_gap(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let mut t = Table::new(&[
        "L",
        "block",
        "dim",
        "lambda2_re",
        "lambda2_im",
        "elementary_gap",
        "circuit_gap",
        "steady_count",
        "degenerate",
    ]);
    let mut elementary = Vec::new();
    let mut circuit = Vec::new();
    for &l in &cfg.sites {
        let p = params(cfg, l)?;
        let b = block(cfg, &p);
        let s = build_superoperator(&p, b)?;
        let g = spectral_gap(&s)?;
        elementary.push((l, g.elementary_gap));
        circuit.push((l, g.circuit_gap));
        t.push(vec![
            l.into(),
            block_name(b).into(),
            s.dim().into(),
            g.lambda2.re.into(),
            g.lambda2.im.into(),
            g.elementary_gap.into(),
            g.circuit_gap.into(),
            g.steady_count.into(),
            g.degenerate_flag.into(),
        ]);
    }
    // Δ ∝ L^{-z}; needs three sizes for a standard error.
    let fit = if cfg.sites.len() >= 3 {
        let mut f = Table::new(&["step", "z", "z_stderr"]);
        for (name, pts) in [("circuit", &circuit), ("elementary", &elementary)] {
            let (z, err) = gap_exponent_fit(pts)?;
            f.push(vec![name.into(), z.into(), err.into()]);
        }
        Some(f)
    } else {
        None
    };
    Ok(Outcome {
        table: t,
        fit,
        failures: 0,
    })
}

fn entanglement(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let mut t = Table::new(&["L", "N", "A", "entropy", "asymptotic"]);
    for &l in &cfg.sites {
        let n = up(cfg, l);
        let a = cfg.a_size.unwrap_or(l / 2);
        let s = exact_entropy(l, n, a)?;
        let asym = if n > 0 && n < l {
            asymptotic_entropy(l as f64, a as f64 / l as f64, n as f64 / l as f64)?
        } else {
            f64::NAN
        };
        t.push(vec![l.into(), n.into(), a.into(), s.into(), asym.into()]);
    }
    Ok(t)
}

fn collapse_value(cfg: &ExperimentConfig, l: usize, p: f64) -> Result<f64, CliError> {
    let (params, b) = match cfg.perturbation {
        Perturbation::Z => (ModelParams::with_z(l, p)?, Block::Charge { up: up(cfg, l) }),
        Perturbation::Xy => (ModelParams::with_xy(l, p)?, Block::Balanced),
    };
    let s = build_superoperator(&params, b)?;
    let rho = steady_state(&s)?.rho;
    let y = match cfg.collapse_observable {
        CollapseObservable::Purity => purity(&rho),
        CollapseObservable::Xy => channel_expectation(&rho, &Operator::xy(0, l - 1))?,
        CollapseObservable::SpinSpin => channel_expectation(&rho, &Operator::spin_spin(0, l - 1))?,
    };
    Ok(if cfg.size_correction {
        y * (l - 1) as f64 / l as f64
    } else {
        y
    })
}

/// Read `L, p, y[, sigma]` columns from a CSV table; `#` lines are skipped.
pub fn read_collapse_points(path: &Path) -> Result<Vec<CollapsePoint>, CliError> {
    let shown = path.display();
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::Config(format!("{shown}: {e}")))?;
    let headers = r
        .headers()
        .map_err(|e| CliError::Config(format!("{shown}: {e}")))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (Some(cl), Some(cp), Some(cy)) = (col("L"), col("p"), col("y")) else {
        return Err(CliError::Config(format!("{shown}: need columns L, p and y")));
    };
    let cs = col("sigma");
    let mut points = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::Config(format!("{shown}: {e}")))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let bad = |what: &str, v: &str| CliError::Config(format!("{shown}: line {line}: cannot parse {what} {v:?}"));
        let l: usize = field(cl).parse().map_err(|_| bad("L", field(cl)))?;
        let p: f64 = field(cp).parse().map_err(|_| bad("p", field(cp)))?;
        let y: f64 = field(cy).parse().map_err(|_| bad("y", field(cy)))?;
        let sigma: f64 = match cs {
            Some(i) if !field(i).is_empty() => field(i).parse().map_err(|_| bad("sigma", field(i)))?,
            _ => 0.0,
        };
        points.push(
            CollapsePoint::new(l, p, y, sigma).map_err(|e| CliError::Config(format!("{shown}: line {line}: {e}")))?,
        );
    }
    Ok(points)
}

pub fn fit_table(points: usize, r: &CollapseResult) -> Table {
    let mut f = Table::new(&["nu", "nu_stderr", "cost", "ambiguous", "used", "skipped", "points"]);
    f.push(vec![
        r.nu.into(),
        r.nu_stderr.into(),
        r.cost.into(),
        r.ambiguous.into(),
        r.used.into(),
        r.skipped.into(),
        points.into(),
    ]);
    f
}

fn collapse(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let points = match &cfg.input {
        Some(path) => read_collapse_points(path)?,
        None => {
            let jobs: Vec<(usize, f64)> = cfg
                .sites
                .iter()
                .flat_map(|&l| cfg.grid.iter().map(move |&p| (l, p)))
                .collect();
            jobs.par_iter()
                .map(|&(l, p)| Ok(CollapsePoint::new(l, p, collapse_value(cfg, l, p)?, 0.0)?))
                .collect::<Result<Vec<_>, CliError>>()?
        }
    };
    let result = collapse_fit(&points, cfg.seed)?;
    let mut t = Table::new(&["L", "p", "y", "sigma"]);
    for pt in &points {
        t.push(vec![pt.sites.into(), pt.p.into(), pt.y.into(), pt.sigma.into()]);
    }
    Ok(Outcome {
        table: t,
        fit: Some(fit_table(points.len(), &result)),
        failures: 0,
    })
}

struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn check(name: &'static str, worst: f64, tol: f64) -> Check {
    Check {
        name,
        passed: worst <= tol,
        detail: format!("max deviation {worst:.3e} (tol {tol:.0e})"),
    }
}

fn steady(params: &ModelParams, b: Block) -> Result<(Superoperator, DoubledVector), CliError> {
    let s = build_superoperator(params, b)?;
    let rho = steady_state(&s)?.rho;
    Ok((s, rho))
}

/// Exact oracles that every build should reproduce.
fn validate(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let mut checks = Vec::new();

    let (_, rho) = steady(&ModelParams::baseline(4)?, Block::Charge { up: 2 })?;
    let worst = [
        channel_expectation(&rho, &Operator::susceptibility(4))? - 1.5,
        channel_expectation(&rho, &Operator::spin_spin(0, 3))? - 0.25,
        purity(&rho) - 1.0,
    ]
    .iter()
    .fold(0.0f64, |m, d| m.max(d.abs()));
    checks.push(check("baseline-steady-state", worst, 1e-10));

    let mut worst = 0.0f64;
    for (l, pz) in [(4usize, 0.1), (5, 0.05)] {
        for n in 0..=l {
            let want = steady_zz(l, n as f64 - l as f64 / 2.0)?;
            let (_, rho) = steady(&ModelParams::with_z(l, pz)?, Block::Charge { up: n })?;
            for j in 1..l {
                worst = worst.max((channel_expectation(&rho, &Operator::zz(0, j))? - want).abs());
            }
        }
    }
    checks.push(check("zz-correlator", worst, 1e-9));

    let mut worst = 0.0f64;
    for l in (2..=10).step_by(2) {
        let s = half_chain_entropy(&dicke_state(l, l / 2)?)?;
        worst = worst.max((s - exact_entropy(l, l / 2, l / 2)?).abs());
    }
    let closed = -(2.0 / 6.0 * (1.0f64 / 6.0).ln() + 2.0 / 3.0 * (2.0f64 / 3.0).ln());
    worst = worst.max((exact_entropy(4, 2, 2)? - closed).abs());
    checks.push(check("dicke-entropy", worst, 1e-10));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let psi = random_state(4, &mut rng)?;
        for bond in 0..3 {
            for (a, b) in swap_branches(&psi, bond)?
                .iter()
                .zip(ancilla_cswap_branches(&psi, bond)?.iter())
            {
                worst = worst.max((a.probability - b.probability).abs());
                if let (Some(x), Some(y)) = (&a.state, &b.state) {
                    worst = worst.max(1.0 - x.fidelity(y)?);
                }
            }
        }
    }
    checks.push(check("ancilla-circuit", worst, 1e-12));

    let mut worst = 0.0f64;
    for pz in [0.0, 0.2, 1.0] {
        let s = build_superoperator(&ModelParams::with_z(3, pz)?, Block::Full)?;
        let proj = projected_channel_matrix(3, pz)?.to_dense();
        let dense = s.to_dense()?;
        for b in 0..8u64 {
            let row = s.basis().index(b, b).expect("full basis");
            for c in 0..8u64 {
                let col = s.basis().index(c, c).expect("full basis");
                worst = worst.max((dense[(row, col)] - proj[(b as usize, c as usize)]).abs());
            }
        }
        worst = worst.max(s.trace_defect());
    }
    checks.push(check("projected-channel", worst, 1e-12));

    // Ensemble against the exact channel, within 4 standard errors.
    let params = ModelParams::with_z(3, 0.2)?;
    let steps = 10;
    let initial = InitialState::Alternating.build(&params)?;
    let spec = [ObservableSpec::every_step(Observable::Susceptibility)];
    let records = run_ensemble(&params, &initial, steps, &spec, cfg.seed, 4000)?;
    let series = ensemble_average(&records, "susceptibility")?;
    let s = build_superoperator(&params, Block::Charge { up: 2 })?;
    let mut rho = DoubledVector::projector(s.basis().clone(), &alternating_state(3)?)?;
    let chi = Operator::susceptibility(3);
    let mut worst_sigma = 0.0f64;
    for point in &series {
        if point.time > 0 {
            rho = s.evolve(&rho, 3)?;
        }
        let want = channel_expectation(&rho, &chi)?;
        let dev = (point.mean - want).abs();
        worst_sigma = worst_sigma.max(if dev <= 1e-9 { 0.0 } else { dev / point.stderr });
    }
    checks.push(Check {
        name: "trajectory-channel",
        passed: worst_sigma <= 4.0,
        detail: format!("max deviation {worst_sigma:.2} standard errors (tol 4)"),
    });

    let mut t = Table::new(&["check", "passed", "detail"]);
    let failures = checks.iter().filter(|c| !c.passed).count();
    for c in checks {
        t.push(vec![c.name.into(), c.passed.into(), Value::Text(c.detail)]);
    }
    Ok(Outcome {
        table: t,
        fit: None,
        failures,
    })
}
